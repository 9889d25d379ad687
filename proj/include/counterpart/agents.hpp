#pragma once

// Scripted black-box agents. Each agent follows a concession schedule with a
// bounded seed-derived jitter and talks through a fixed template library whose
// wording depends on its style and on where it is in the game, so dialogue
// carries information about the strategy behind it.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "counterpart/errors.hpp"
#include "counterpart/game.hpp"
#include "counterpart/rng.hpp"

namespace counterpart {

enum class Style { Firm, Neutral, Conciliatory };

inline std::string_view to_string(Style s) {
    switch (s) {
        case Style::Firm: return "firm";
        case Style::Neutral: return "neutral";
        case Style::Conciliatory: return "conciliatory";
    }
    return "neutral";
}

enum class Stance { Opening, Conceding, FinalRounds };

struct BargainingParams {
    double initial_demand_frac = 0.7;    // [0.5, 1)
    double concession_rate = 0.05;       // [0, 0.2] per round
    double accept_threshold_frac = 0.4;  // (0, 1), own share; scaled by own delta^(r-1)
    int deadline_panic_rounds = 0;       // >= 0
    bool operator==(const BargainingParams&) const = default;
};

struct NegotiationParams {
    double initial_margin = 0.6;              // [0, 1] of the surplus span
    double concession_rate = 0.05;            // [0, 0.2] per round
    double accept_margin = 0.1;               // [0, 0.5] of the surplus span
    std::optional<int> outside_trigger_round;  // nullopt: never
    bool operator==(const NegotiationParams&) const = default;
};

struct ScriptedAgentSpec {
    AgentId agent_id;
    BargainingParams bargaining;
    NegotiationParams negotiation;
    Style style = Style::Neutral;
    double noise_sigma = 0.0;  // half-width of the uniform demand jitter
    bool talk_tracks_state = true;  // false: wording ignores the stance

    void validate() const {
        auto fail = [&](const std::string& m) { throw ConfigError("agent " + agent_id + ": " + m); };
        const auto& b = bargaining;
        const auto& n = negotiation;
        if (agent_id.empty()) fail("empty id");
        if (!(b.initial_demand_frac >= 0.5 && b.initial_demand_frac < 1.0)) fail("initial_demand_frac outside [0.5,1)");
        if (!(b.concession_rate >= 0.0 && b.concession_rate <= 0.2)) fail("bargaining concession_rate outside [0,0.2]");
        if (!(b.accept_threshold_frac > 0.0 && b.accept_threshold_frac < 1.0)) fail("accept_threshold_frac outside (0,1)");
        if (b.deadline_panic_rounds < 0) fail("deadline_panic_rounds negative");
        if (!(n.initial_margin >= 0.0 && n.initial_margin <= 1.0)) fail("initial_margin outside [0,1]");
        if (!(n.concession_rate >= 0.0 && n.concession_rate <= 0.2)) fail("negotiation concession_rate outside [0,0.2]");
        if (!(n.accept_margin >= 0.0 && n.accept_margin <= 0.5)) fail("accept_margin outside [0,0.5]");
        if (n.outside_trigger_round && *n.outside_trigger_round < 1) fail("outside_trigger_round must be positive");
        if (!(noise_sigma >= 0.0)) fail("noise_sigma negative");
    }

    bool operator==(const ScriptedAgentSpec&) const = default;
};

/// An agent's own payoff parameter: its discount factor in bargaining, its
/// relative valuation (sv for the seller, bv for the buyer) in negotiation.
struct PrivateValue {
    double value = 1.0;
    bool operator==(const PrivateValue&) const = default;
};

struct ProposalAction {
    Offer offer;
    std::string message;
};

struct ResponseAction {
    Decision decision = Decision::Reject;
    std::string message;
};

/// Inside its deadline window a bargaining agent keeps this share of its usual acceptance bar.
inline constexpr double kPanicFactor = 0.2;

/// Surplus span in negotiation, as a fraction of the price order S.
inline constexpr double kNegotiationSpanFrac = 0.5;

namespace detail {

// clang-format off
inline constexpr std::array<std::array<std::array<std::string_view, 10>, 3>, 3> kProposalTemplates{{
    // Firm
    {{
        {"My number is {amount} and it is not moving.", "{amount}. That is my position.", "I start at {amount} and I know my worth.",
         "Here is the deal: {amount}.", "I will be direct: {amount}.", "{amount}, no games.", "My opening is {amount} and it is strong for a reason.",
         "I do not haggle much. {amount}.", "Take {amount} seriously, it is where I stand.", "{amount} is what this is worth."},
        {"I can shade it to {amount}, nothing more.", "Fine, {amount}, but I am close to my limit.", "{amount}. Do not expect another step.",
         "I moved to {amount} and that is generous.", "{amount}, and my patience is short.", "A small step: {amount}.",
         "{amount}. I am not going to chase you.", "I adjust to {amount}, barely.", "{amount} and we are done moving.", "Last small move, {amount}."},
        {"{amount} is my final word.", "Final: {amount}. Walk away if you like.", "{amount}, take it or leave it.",
         "This is the end of the line at {amount}.", "{amount}. No more rounds of this.", "My last offer is {amount}.",
         "{amount} or nothing.", "Time is up. {amount}.", "{amount} and I mean it.", "Last call: {amount}."},
    }},
    // Neutral
    {{
        {"Let us start at {amount} and see where we land.", "I propose {amount}.", "How about {amount} to begin?",
         "My first proposal is {amount}.", "Starting point: {amount}.", "I suggest {amount} as a fair opening.", "Consider {amount}.",
         "{amount} seems reasonable to open.", "Opening with {amount}.", "I think {amount} is a sensible start."},
        {"I can adjust to {amount}.", "Let us try {amount}.", "Moving to {amount}.", "How does {amount} sound now?",
         "I will revise to {amount}.", "{amount} is my updated proposal.", "Meeting you partway at {amount}.",
         "Next proposal: {amount}.", "Adjusting to {amount}.", "Perhaps {amount} works."},
        {"We are running out of rounds, {amount}.", "Near the end, I propose {amount}.", "{amount} to close this out.",
         "With little time left, {amount}.", "Let us wrap up at {amount}.", "Closing proposal: {amount}.",
         "{amount} before time runs out.", "I suggest we settle on {amount}.", "{amount} as we near the deadline.", "Final proposal: {amount}."},
    }},
    // Conciliatory
    {{
        {"I want us both to do well, how about {amount}?", "Happy to work together, I offer {amount}.", "Let us be friends here: {amount}.",
         "I hope {amount} feels fair to you.", "I am flexible, {amount} to start.", "Glad to deal with you, {amount}?",
         "I would love to agree, {amount}.", "{amount}, and I am open to your ideas.", "Kindly consider {amount}.", "Let us make this easy: {amount}."},
        {"I can give a bit more, {amount}.", "For you, {amount}.", "I am happy to move to {amount}.", "Let me meet you at {amount}.",
         "{amount}, I really want a deal.", "I will happily go to {amount}.", "To show good faith, {amount}.",
         "Another step toward you: {amount}.", "I hope {amount} helps us agree.", "{amount}, let us find common ground."},
        {"Please, let us agree at {amount}.", "I would rather settle than lose this: {amount}.", "{amount}, I will take a deal over nothing.",
         "I really want to close, {amount}.", "Let us not walk away, {amount}.", "{amount}, please accept.",
         "We both lose if we stop, {amount}.", "I am giving ground: {amount}.", "Let us shake on {amount}.", "{amount}, for both our sakes."},
    }},
}};

inline constexpr std::array<std::array<std::array<std::string_view, 5>, 3>, 3> kResponseTemplates{{
    {{
        {"I know what I need from this.", "I expect serious numbers.", "You will have to do better than average.", "I am not in a hurry.", "My standards are high."},
        {"I am watching how you move.", "Every round costs you too.", "I keep my line.", "I have seen this before.", "Steady as I go."},
        {"The clock is running.", "We are near the end.", "Do not test me now.", "I hold my ground.", "Time matters to both of us."},
    }},
    {{
        {"Thanks for the proposal.", "Noted.", "I have considered it.", "Understood.", "Let me think about that."},
        {"I see where this is going.", "Thanks, noted.", "Okay, considered.", "Understood, thanks.", "Got it."},
        {"We are close to the deadline.", "Noted, time is short.", "Understood, little time left.", "Thanks, nearly done.", "Considered, near the end."},
    }},
    {{
        {"Thank you, I appreciate it!", "Lovely to deal with you.", "I value working together.", "Thanks so much for this.", "I am glad we are talking."},
        {"Thank you for moving.", "I appreciate the effort.", "Let us keep working together.", "That is kind of you.", "I am grateful for that."},
        {"Let us find a way together.", "I appreciate you, even now.", "Thanks, let us not give up.", "Grateful we got this far.", "Let us stay friendly."},
    }},
}};
// clang-format on

inline std::string fill_amount(std::string_view tmpl, const std::string& amount) {
    std::string out(tmpl);
    const std::string slot = "{amount}";
    if (auto pos = out.find(slot); pos != std::string::npos) out.replace(pos, slot.size(), amount);
    return out;
}

inline bool is_player_1(const PublicView& view, const AgentId& id) { return view.player_1_id == id; }

inline Stance stance_of(const ScriptedAgentSpec& spec, const PublicView& view) {
    const int r = view.round;
    if (view.config.max_rounds) {
        const int left = *view.config.max_rounds - r;
        const int window = view.config.family == Family::Bargaining
                               ? std::max(1, spec.bargaining.deadline_panic_rounds)
                               : 2;
        if (left < window) return Stance::FinalRounds;
    }
    if (view.config.family == Family::Negotiation && spec.negotiation.outside_trigger_round &&
        r >= *spec.negotiation.outside_trigger_round)
        return Stance::FinalRounds;
    if (r <= 2) return Stance::Opening;
    return Stance::Conceding;
}

/// Stance the agent's wording reflects; fixed when talk is decoupled.
inline Stance spoken_stance(const ScriptedAgentSpec& spec, const PublicView& view) {
    return spec.talk_tracks_state ? stance_of(spec, view) : Stance::Conceding;
}

inline double jitter(const ScriptedAgentSpec& spec, std::uint64_t seed, int round) {
    if (spec.noise_sigma == 0.0) return 0.0;
    Rng rng(stable_hash(seed, std::string_view(spec.agent_id), round, std::string_view("demand")));
    return spec.noise_sigma * (2.0 * rng.uniform() - 1.0);
}

/// Each agent has its own voice: one fixed template per turn kind.
inline std::size_t template_index(const ScriptedAgentSpec& spec, std::string_view turn, std::size_t n) {
    Rng rng(stable_hash(std::string_view(spec.agent_id), turn));
    return static_cast<std::size_t>(rng.below(n));
}

inline Money round_to_units(double units) { return Money::whole(std::llround(units)); }

}  // namespace detail

/// Own fraction (bargaining) or margin (negotiation) this agent demands at `round`.
inline double demand_schedule(double initial, double concession, double floor, int round, double noise) {
    return std::clamp(initial - concession * (round - 1) + noise, floor, 1.0);
}

inline Stance stance(const ScriptedAgentSpec& spec, const PublicView& view) {
    return detail::stance_of(spec, view);
}

inline ProposalAction act_propose(const ScriptedAgentSpec& spec, const PublicView& view,
                                  const PrivateValue& own, std::uint64_t seed) {
    const int r = view.round;
    const double noise = detail::jitter(spec, seed, r);
    ProposalAction act;
    std::string amount;
    if (view.config.family == Family::Bargaining) {
        const auto& p = spec.bargaining;
        const double frac = demand_schedule(p.initial_demand_frac, p.concession_rate, p.accept_threshold_frac, r, noise);
        const Money total = *view.config.money_M;
        Money mine = detail::round_to_units(frac * total.units());
        if (mine > total) mine = total;
        const Money theirs = total - mine;
        act.offer = Split{mine, theirs};
        amount = theirs.to_string() + " for you";
    } else {
        const auto& p = spec.negotiation;
        const double margin = demand_schedule(p.initial_margin, p.concession_rate, p.accept_margin, r, noise);
        const Money S = *view.config.price_order_S;
        const double span = kNegotiationSpanFrac * S.units();
        const double own_value = own.value * S.units();
        const bool seller = detail::is_player_1(view, spec.agent_id);
        double price = seller ? own_value + margin * span : own_value - margin * span;
        price = std::max(price, 0.0);
        act.offer = Price{detail::round_to_units(price)};
        amount = "a price of " + std::get<Price>(act.offer).price.to_string();
    }
    if (view.config.messages_allowed) {
        const auto& set = detail::kProposalTemplates[static_cast<std::size_t>(spec.style)]
                                                    [static_cast<std::size_t>(detail::spoken_stance(spec, view))];
        act.message = detail::fill_amount(set[detail::template_index(spec, "propose", set.size())], amount);
    }
    return act;
}

inline ResponseAction act_respond(const ScriptedAgentSpec& spec, const PublicView& view,
                                  const PrivateValue& own, std::uint64_t /*seed*/) {
    if (!view.current_offer) throw StateError("act_respond without a pending offer");
    const int r = view.round;
    ResponseAction act;
    if (view.config.family == Family::Bargaining) {
        const auto& p = spec.bargaining;
        const auto& split = std::get<Split>(*view.current_offer);
        const double offered = split.responder_gain.units() / view.config.money_M->units();
        // The bar falls with the agent's own discount: waiting costs it too.
        double threshold = p.accept_threshold_frac * std::pow(own.value, r - 1);
        if (view.config.max_rounds && p.deadline_panic_rounds > 0) {
            const int left = *view.config.max_rounds - r;
            if (left < p.deadline_panic_rounds) threshold *= kPanicFactor;
        }
        act.decision = offered >= threshold ? Decision::Accept : Decision::Reject;
    } else {
        const auto& p = spec.negotiation;
        const double S = view.config.price_order_S->units();
        const double price = std::get<Price>(*view.current_offer).price.units();
        const double own_value = own.value * S;
        const bool seller = detail::is_player_1(view, spec.agent_id);
        const double surplus = seller ? price - own_value : own_value - price;
        const double span = kNegotiationSpanFrac * S;
        if (surplus >= p.accept_margin * span)
            act.decision = Decision::Accept;
        else if (p.outside_trigger_round && r >= *p.outside_trigger_round && surplus < 0.0)
            act.decision = Decision::OutsideOption;
        else
            act.decision = Decision::Reject;
    }
    if (view.config.messages_allowed) {
        const auto& set = detail::kResponseTemplates[static_cast<std::size_t>(spec.style)]
                                                    [static_cast<std::size_t>(detail::spoken_stance(spec, view))];
        act.message = std::string(set[detail::template_index(spec, "respond", set.size())]);
    }
    return act;
}

/// Uniform draw on [lo, hi]; lo == hi is a point mass.
struct ParamRange {
    double lo = 0.0;
    double hi = 0.0;
    bool operator==(const ParamRange&) const = default;
};

struct PopulationSpec {
    enum class Role { Source, Target };

    Role role = Role::Source;
    int count = 1;
    std::uint64_t seed = 0;
    std::string id_prefix = "agent";

    ParamRange initial_demand_frac{0.55, 0.9};
    ParamRange bargaining_concession{0.01, 0.1};
    ParamRange accept_threshold_frac{0.2, 0.5};
    ParamRange deadline_panic_rounds{0, 2};  // integer axis, inclusive
    ParamRange initial_margin{0.3, 0.9};
    ParamRange negotiation_concession{0.0, 0.1};
    ParamRange accept_margin{0.0, 0.3};
    ParamRange outside_trigger_round{2, 6};  // integer axis, inclusive
    double never_outside_prob = 0.3;
    ParamRange noise_sigma{0.0, 0.03};
    std::array<double, 3> style_weights{1.0, 1.0, 1.0};  // Firm, Neutral, Conciliatory
    /// When set, one latent toughness drives both the parameters and the style,
    /// and each agent's wording follows its stance. When clear, style and
    /// wording carry no information about behaviour.
    bool style_coupling = true;

    std::vector<std::pair<std::string, ParamRange>> axes() const {
        return {{"initial_demand_frac", initial_demand_frac},
                {"bargaining_concession", bargaining_concession},
                {"accept_threshold_frac", accept_threshold_frac},
                {"deadline_panic_rounds", deadline_panic_rounds},
                {"initial_margin", initial_margin},
                {"negotiation_concession", negotiation_concession},
                {"accept_margin", accept_margin},
                {"outside_trigger_round", outside_trigger_round},
                {"noise_sigma", noise_sigma}};
    }

    void validate() const {
        if (count < 1) throw ConfigError("population count must be at least 1");
        auto check = [](const char* name, ParamRange r, double lo, double hi, bool hi_open) {
            const bool ok = r.lo <= r.hi && r.lo >= lo && (hi_open ? r.hi < hi : r.hi <= hi);
            if (!ok) throw ConfigError(std::string("population axis ") + name + " outside its domain");
        };
        check("initial_demand_frac", initial_demand_frac, 0.5, 1.0, true);
        check("bargaining_concession", bargaining_concession, 0.0, 0.2, false);
        check("accept_threshold_frac", accept_threshold_frac, 1e-9, 1.0, true);
        check("deadline_panic_rounds", deadline_panic_rounds, 0.0, 1e6, false);
        check("initial_margin", initial_margin, 0.0, 1.0, false);
        check("negotiation_concession", negotiation_concession, 0.0, 0.2, false);
        check("accept_margin", accept_margin, 0.0, 0.5, false);
        check("outside_trigger_round", outside_trigger_round, 1.0, 1e6, false);
        check("noise_sigma", noise_sigma, 0.0, 1.0, false);
        if (!(never_outside_prob >= 0.0 && never_outside_prob <= 1.0)) throw ConfigError("never_outside_prob outside [0,1]");
        double w = 0.0;
        for (double x : style_weights) {
            if (x < 0.0) throw ConfigError("negative style weight");
            w += x;
        }
        if (w <= 0.0) throw ConfigError("style weights sum to zero");
        const auto all = axes();
        if (std::all_of(all.begin(), all.end(), [](const auto& a) { return a.second.lo == a.second.hi; }))
            throw ConfigError("degenerate population: every parameter axis has zero width");
    }
};

/// True when the two populations occupy disjoint sub-ranges on at least one axis.
inline bool disjoint_on_some_axis(const PopulationSpec& a, const PopulationSpec& b) {
    const auto xa = a.axes();
    const auto xb = b.axes();
    for (std::size_t i = 0; i < xa.size(); ++i)
        if (xa[i].second.hi < xb[i].second.lo || xb[i].second.hi < xa[i].second.lo) return true;
    bool style_overlap = false;
    for (std::size_t s = 0; s < 3; ++s) style_overlap |= a.style_weights[s] > 0 && b.style_weights[s] > 0;
    return !style_overlap;
}

inline std::vector<ScriptedAgentSpec> generate_population(const PopulationSpec& pop) {
    pop.validate();
    Rng rng(stable_hash(pop.seed, static_cast<int>(pop.role), std::string_view(pop.id_prefix)));
    auto at = [](ParamRange r, double u) { return r.lo + (r.hi - r.lo) * u; };
    auto at_int = [](ParamRange r, double u) {
        const auto lo = static_cast<int>(std::ceil(r.lo));
        const auto hi = static_cast<int>(std::floor(r.hi));
        return lo + static_cast<int>(std::min<double>(hi - lo, std::floor(u * (hi - lo + 1))));
    };
    const double wsum = pop.style_weights[0] + pop.style_weights[1] + pop.style_weights[2];

    std::vector<ScriptedAgentSpec> out;
    out.reserve(static_cast<std::size_t>(pop.count));
    const int width = pop.count >= 100 ? 3 : 2;
    for (int i = 0; i < pop.count; ++i) {
        ScriptedAgentSpec a;
        std::string idx = std::to_string(i);
        a.agent_id = pop.id_prefix + "-" + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(idx.size()))), '0') + idx;

        // Latent toughness in [0,1]; blended with independent draws so axes are not collinear.
        const double tough = rng.uniform();
        auto draw = [&](bool tough_is_high) {
            const double v = rng.uniform();
            if (!pop.style_coupling) return v;
            const double t = tough_is_high ? tough : 1.0 - tough;
            return 0.75 * t + 0.25 * v;
        };
        a.bargaining.initial_demand_frac = at(pop.initial_demand_frac, draw(true));
        a.bargaining.concession_rate = at(pop.bargaining_concession, draw(false));
        a.bargaining.accept_threshold_frac = at(pop.accept_threshold_frac, draw(true));
        a.bargaining.deadline_panic_rounds = at_int(pop.deadline_panic_rounds, rng.uniform());
        a.negotiation.initial_margin = at(pop.initial_margin, draw(true));
        a.negotiation.concession_rate = at(pop.negotiation_concession, draw(false));
        a.negotiation.accept_margin = at(pop.accept_margin, draw(true));
        const double never = rng.uniform();
        const int trigger = at_int(pop.outside_trigger_round, rng.uniform());
        if (never >= pop.never_outside_prob) a.negotiation.outside_trigger_round = trigger;
        a.noise_sigma = at(pop.noise_sigma, rng.uniform());
        a.talk_tracks_state = pop.style_coupling;

        const double style_u = rng.uniform();
        if (pop.style_coupling) {
            a.style = tough > 2.0 / 3.0 ? Style::Firm : tough < 1.0 / 3.0 ? Style::Conciliatory : Style::Neutral;
        } else {
            double acc = 0.0;
            a.style = Style::Conciliatory;
            for (int s = 0; s < 3; ++s) {
                acc += pop.style_weights[static_cast<std::size_t>(s)] / wsum;
                if (style_u < acc) {
                    a.style = static_cast<Style>(s);
                    break;
                }
            }
        }
        a.validate();
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace counterpart
