#pragma once

// Decision points and the fixed-schema game-state blocks, dialogue text,
// Observer prompts, identity indicators and labels built from them.
//
// Everything here reads the game through PublicView, so a value masked under
// incomplete information cannot reach a feature cell or a prompt.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "counterpart/errors.hpp"
#include "counterpart/game.hpp"
#include "counterpart/table.hpp"

namespace counterpart {

enum class Task { Response, Proposal };

inline std::string_view to_string(Task t) { return t == Task::Response ? "response" : "proposal"; }

inline Task task_from_string(std::string_view s) {
    if (s == "response") return Task::Response;
    if (s == "proposal") return Task::Proposal;
    throw ConfigError("unknown task '" + std::string(s) + "'");
}

/// One decision to predict. `log` must outlive the point.
struct DecisionPoint {
    const GameLog* log = nullptr;
    Task task = Task::Response;
    int round = 1;
    AgentId deciding_agent_id;

    /// What an observer sees just before the decision.
    PublicView view() const { return public_view(*log, round, task == Task::Response); }
    const RoundRecord& record() const { return log->rounds[static_cast<std::size_t>(round - 1)]; }
};

/// Response points: one per responder decision. Proposal points: one per
/// proposal at round >= 2. Aborted games yield nothing; the final round of a
/// truncated game is dropped.
inline std::vector<DecisionPoint> extract_decision_points(const GameLog& log, Task task) {
    std::vector<DecisionPoint> out;
    if (log.outcome.kind == OutcomeKind::Aborted) return out;
    const int n = static_cast<int>(log.rounds.size());
    const int last = log.outcome.kind == OutcomeKind::Truncated ? n - 1 : n;
    for (int r = (task == Task::Proposal ? 2 : 1); r <= last; ++r) {
        const RoundRecord& rec = log.rounds[static_cast<std::size_t>(r - 1)];
        out.push_back({&log, task, r, task == Task::Response ? rec.responder_id : rec.proposer_id});
    }
    return out;
}

inline constexpr std::size_t kBargainingWidth = 24;
inline constexpr std::size_t kNegotiationWidth = 25;
inline constexpr int kHistoryDepth = 5;

inline std::size_t game_block_width(Family f) { return f == Family::Bargaining ? kBargainingWidth : kNegotiationWidth; }

inline std::vector<std::string> game_feature_names(Family family) {
    std::vector<std::string> names;
    if (family == Family::Bargaining) {
        names = {"round", "max_rounds", "round_frac", "money", "delta_1", "delta_2", "messages", "complete_info",
                 "offer_frac", "responder_gain", "proposer_gain", "inflation_loss_1", "inflation_loss_2"};
    } else {
        names = {"round", "max_rounds", "round_frac", "sv", "bv", "product_price_order", "messages", "complete_info",
                 "seller_outside", "buyer_outside", "price", "offer_frac", "offer_vs_buyer_outside", "rounds_remaining"};
    }
    for (int h = 1; h <= kHistoryDepth; ++h) {
        names.push_back("prev" + std::to_string(h) + "_offer_frac");
        names.push_back("prev" + std::to_string(h) + "_decision");
    }
    names.push_back("family_idx");
    return names;
}

namespace detail {

inline double opt_or_nan(const std::optional<double>& v) { return v ? *v : kNaN; }

inline double split_offer_frac(const Offer& o) {
    const auto& s = std::get<Split>(o);
    const double total = s.proposer_gain.units() + s.responder_gain.units();
    return total > 0.0 ? s.responder_gain.units() / total : kNaN;
}

inline double decision_code(Decision d) { return d == Decision::Accept ? 1.0 : 0.0; }

inline void append_history(std::vector<double>& cells, const PublicView& v, double (*offer_frac)(const PublicView&, const Offer&)) {
    for (int h = 1; h <= kHistoryDepth; ++h) {
        const int r = v.round - h;
        if (r < 1) {
            cells.push_back(kNaN);
            cells.push_back(kNaN);
            continue;
        }
        const RoundRecord& rec = v.history[static_cast<std::size_t>(r - 1)];
        cells.push_back(offer_frac(v, rec.offer));
        cells.push_back(decision_code(rec.decision));
    }
}

}  // namespace detail

inline std::vector<double> game_features_bargaining(const DecisionPoint& dp) {
    if (dp.log->config.family != Family::Bargaining) throw ConfigError("bargaining features requested for a negotiation point");
    const PublicView v = dp.view();
    const auto& c = v.config;
    const int r = v.round;
    std::vector<double> cells;
    cells.reserve(kBargainingWidth);
    cells.push_back(r);
    cells.push_back(c.max_rounds ? *c.max_rounds : kNaN);
    cells.push_back(c.max_rounds ? static_cast<double>(r) / *c.max_rounds : kNaN);
    cells.push_back(c.money_M->units());
    cells.push_back(detail::opt_or_nan(c.delta_1));
    cells.push_back(detail::opt_or_nan(c.delta_2));
    cells.push_back(c.messages_allowed ? 1.0 : 0.0);
    cells.push_back(c.complete_info ? 1.0 : 0.0);
    if (v.current_offer) {
        const auto& s = std::get<Split>(*v.current_offer);
        cells.push_back(detail::split_offer_frac(*v.current_offer));
        cells.push_back(s.responder_gain.units());
        cells.push_back(s.proposer_gain.units());
    } else {
        cells.insert(cells.end(), 3, kNaN);
    }
    cells.push_back(c.delta_1 ? 1.0 - std::pow(*c.delta_1, r - 1) : kNaN);
    cells.push_back(c.delta_2 ? 1.0 - std::pow(*c.delta_2, r - 1) : kNaN);
    detail::append_history(cells, v, [](const PublicView&, const Offer& o) { return detail::split_offer_frac(o); });
    cells.push_back(0.0);
    return cells;
}

inline std::vector<double> game_features_negotiation(const DecisionPoint& dp) {
    if (dp.log->config.family != Family::Negotiation) throw ConfigError("negotiation features requested for a bargaining point");
    const PublicView v = dp.view();
    const auto& c = v.config;
    const int r = v.round;
    const double S = c.price_order_S->units();
    const double seller_outside = c.sv ? *c.sv * S : kNaN;
    const double buyer_outside = c.bv ? *c.bv * S : kNaN;
    std::vector<double> cells;
    cells.reserve(kNegotiationWidth);
    cells.push_back(r);
    cells.push_back(c.max_rounds ? *c.max_rounds : kNaN);
    cells.push_back(c.max_rounds ? static_cast<double>(r) / *c.max_rounds : kNaN);
    cells.push_back(detail::opt_or_nan(c.sv));
    cells.push_back(detail::opt_or_nan(c.bv));
    cells.push_back(S);
    cells.push_back(c.messages_allowed ? 1.0 : 0.0);
    cells.push_back(c.complete_info ? 1.0 : 0.0);
    cells.push_back(seller_outside);
    cells.push_back(buyer_outside);
    if (v.current_offer) {
        const double price = std::get<Price>(*v.current_offer).price.units();
        cells.push_back(price);
        cells.push_back(price / S);
        cells.push_back(price / buyer_outside);  // NaN when bv is masked
    } else {
        cells.insert(cells.end(), 3, kNaN);
    }
    cells.push_back(c.max_rounds ? static_cast<double>(*c.max_rounds - r) : kNaN);
    detail::append_history(cells, v, [](const PublicView& pv, const Offer& o) {
        return std::get<Price>(o).price.units() / pv.config.price_order_S->units();
    });
    cells.push_back(1.0);
    return cells;
}

inline std::vector<double> game_features(const DecisionPoint& dp) {
    return dp.log->config.family == Family::Bargaining ? game_features_bargaining(dp) : game_features_negotiation(dp);
}

/// Messages of the decision round joined by single spaces; "Round r" when there are none.
/// A proposal point sees the messages of the last completed round.
inline std::string round_dialogue_text(const DecisionPoint& dp) {
    std::string text;
    auto add = [&](const std::string& m) {
        if (m.empty()) return;
        if (!text.empty()) text += ' ';
        text += m;
    };
    const int source_round = dp.task == Task::Response ? dp.round : dp.round - 1;
    if (source_round >= 1) {
        const RoundRecord& rec = dp.log->rounds[static_cast<std::size_t>(source_round - 1)];
        add(rec.proposer_message);
        add(rec.responder_message);
    }
    if (text.empty()) text = "Round " + std::to_string(dp.round);
    return text;
}

/// One-hot over the source roster plus a final column for the target.
inline std::vector<double> identity_onehot(const AgentId& agent, std::span<const AgentId> source_roster,
                                           const AgentId& target) {
    std::vector<double> v(source_roster.size() + 1, 0.0);
    if (agent == target) {
        v.back() = 1.0;
        return v;
    }
    const auto it = std::find(source_roster.begin(), source_roster.end(), agent);
    if (it == source_roster.end()) throw RosterError("agent '" + agent + "' is neither a source agent nor the target");
    v[static_cast<std::size_t>(it - source_roster.begin())] = 1.0;
    return v;
}

inline constexpr std::string_view kResponseSuffix = "{\"decision\": \"";
inline constexpr std::string_view kNegotiationProposalSuffix = "Offer: $";

namespace detail {

inline std::string player_name(const PublicView& v, const AgentId& id) { return id == v.player_1_id ? "Alice" : "Bob"; }

/// Parameters print with at least one decimal ("0.9", "0.95", "1.0").
inline std::string format_param(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", x);
    std::string s(buf);
    while (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
    return s;
}

inline std::string describe_offer(const PublicView& v, const AgentId& proposer, const Offer& offer) {
    const std::string who = player_name(v, proposer);
    if (const auto* s = std::get_if<Split>(&offer)) {
        const std::string other = who == "Alice" ? "Bob" : "Alice";
        return who + " offers " + who + "_gain: $" + s->proposer_gain.to_string() + ", " + other + "_gain: $" +
               s->responder_gain.to_string() + ".";
    }
    return who + " offers a price of $" + std::get<Price>(offer).price.to_string() + ".";
}

}  // namespace detail

/// Suffix that closes an Observer prompt for the given decision.
inline std::string observer_suffix(const DecisionPoint& dp) {
    if (dp.task == Task::Response) return std::string(kResponseSuffix);
    if (dp.log->config.family == Family::Negotiation) return std::string(kNegotiationProposalSuffix);
    const PublicView v = dp.view();
    return "Offer: " + detail::player_name(v, dp.deciding_agent_id) + "_gain: $";
}

/// Deterministic rendering of the public decision-time state followed by the task suffix.
inline std::string build_observer_prompt(const DecisionPoint& dp) {
    const PublicView v = dp.view();
    const auto& c = v.config;
    std::string p;
    if (c.family == Family::Bargaining) {
        p += "Game: bargaining between Alice and Bob over $" + c.money_M->to_string() + ".\n";
        p += "Alice's discount factor: " + (c.delta_1 ? detail::format_param(*c.delta_1) : std::string("private")) + ".\n";
        p += "Bob's discount factor: " + (c.delta_2 ? detail::format_param(*c.delta_2) : std::string("private")) + ".\n";
    } else {
        p += "Game: negotiation. Alice sells one item to Bob. Price scale: $" + c.price_order_S->to_string() + ".\n";
        p += "Alice's value: " + (c.sv ? detail::format_param(*c.sv) + " x scale" : std::string("private")) + ".\n";
        p += "Bob's value: " + (c.bv ? detail::format_param(*c.bv) + " x scale" : std::string("private")) + ".\n";
    }
    p += "Horizon: " + (c.max_rounds ? std::to_string(*c.max_rounds) + " rounds" : std::string("unlimited")) + ".\n";
    p += std::string("Messages: ") + (c.messages_allowed ? "on" : "off") + ". Information: " +
         (c.complete_info ? "complete" : "incomplete") + ".\n";
    for (const auto& rec : v.history) {
        p += "Round " + std::to_string(rec.round) + ": " + detail::describe_offer(v, rec.proposer_id, rec.offer);
        if (!rec.proposer_message.empty()) p += " " + detail::player_name(v, rec.proposer_id) + " says: \"" + rec.proposer_message + "\"";
        p += " " + detail::player_name(v, rec.responder_id) + ": " + std::string(to_string(rec.decision)) + ".";
        if (!rec.responder_message.empty()) p += " " + detail::player_name(v, rec.responder_id) + " says: \"" + rec.responder_message + "\"";
        p += "\n";
    }
    if (v.current_offer) {
        p += "Round " + std::to_string(v.round) + ": " + detail::describe_offer(v, v.proposer_id, *v.current_offer);
        if (!v.current_message.empty()) p += " " + detail::player_name(v, v.proposer_id) + " says: \"" + v.current_message + "\"";
        p += "\n" + detail::player_name(v, v.responder_id) + " responds.\n";
    } else {
        p += "Round " + std::to_string(v.round) + ": " + detail::player_name(v, v.proposer_id) + " proposes.\n";
    }
    p += observer_suffix(dp);
    return p;
}

/// Accept -> 1; reject and outside option -> 0.
inline double label_response(const DecisionPoint& dp) {
    return dp.record().decision == Decision::Accept ? 1.0 : 0.0;
}

/// Bargaining: the proposer's own share of the sum. Negotiation: price / S.
inline double label_proposal(const DecisionPoint& dp) {
    const RoundRecord& rec = dp.record();
    if (const auto* s = std::get_if<Split>(&rec.offer)) {
        const double total = s->proposer_gain.units() + s->responder_gain.units();
        return s->proposer_gain.units() / total;
    }
    return std::get<Price>(rec.offer).price.units() / dp.log->config.price_order_S->units();
}

/// Currency the opponent faces for a normalized proposal: (1 - y) * M, or y * S.
inline Money inverse_normalize(double y, const GameConfig& config) {
    if (config.family == Family::Bargaining) return config.money_M->scaled(1.0 - y);
    return config.price_order_S->scaled(y);
}

/// The logged amount that inverse_normalize reconstructs.
inline Money logged_amount(const DecisionPoint& dp) {
    const RoundRecord& rec = dp.record();
    if (const auto* s = std::get_if<Split>(&rec.offer)) return s->responder_gain;
    return std::get<Price>(rec.offer).price;
}

inline double label(const DecisionPoint& dp) {
    return dp.task == Task::Response ? label_response(dp) : label_proposal(dp);
}

}  // namespace counterpart
