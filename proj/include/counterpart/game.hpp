#pragma once

// Rules engine for the two game families.
//
// Bargaining: two players divide money_M over alternating rounds; a split
// accepted at round r pays share_i * delta_i^(r-1) to player i.
// Negotiation: player 1 is the seller (reserve sv*S), player 2 the buyer
// (valuation bv*S); a sale at price P pays surpluses (P - sv*S, bv*S - P) and
// the outside option pays (0, 0).
//
// Player 1 proposes in odd rounds, player 2 in even rounds. All transitions
// are pure: they take a state by value and return the successor.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "counterpart/errors.hpp"
#include "counterpart/money.hpp"

namespace counterpart {

enum class Family { Bargaining, Negotiation };

inline std::string_view to_string(Family f) {
    return f == Family::Bargaining ? "bargaining" : "negotiation";
}

using AgentId = std::string;

struct GameConfig {
    Family family = Family::Bargaining;
    std::optional<Money> money_M;        // bargaining
    std::optional<Money> price_order_S;  // negotiation
    std::optional<double> sv;            // negotiation, relative to S
    std::optional<double> bv;            // negotiation, relative to S
    std::optional<double> delta_1;       // bargaining
    std::optional<double> delta_2;       // bargaining
    std::optional<int> max_rounds;       // nullopt: unbounded horizon
    bool complete_info = true;
    bool messages_allowed = true;
    int sim_round_cap = 100;

    static GameConfig bargaining(Money money, double delta_1, double delta_2,
                                 std::optional<int> max_rounds, bool complete_info,
                                 bool messages_allowed) {
        GameConfig c;
        c.family = Family::Bargaining;
        c.money_M = money;
        c.delta_1 = delta_1;
        c.delta_2 = delta_2;
        c.max_rounds = max_rounds;
        c.complete_info = complete_info;
        c.messages_allowed = messages_allowed;
        return c;
    }

    static GameConfig negotiation(Money price_order, double sv, double bv,
                                  std::optional<int> max_rounds, bool complete_info,
                                  bool messages_allowed) {
        GameConfig c;
        c.family = Family::Negotiation;
        c.price_order_S = price_order;
        c.sv = sv;
        c.bv = bv;
        c.max_rounds = max_rounds;
        c.complete_info = complete_info;
        c.messages_allowed = messages_allowed;
        return c;
    }

    bool unbounded() const noexcept { return !max_rounds.has_value(); }

    /// Last round the engine will play: the horizon, or the simulation cap when unbounded.
    int round_limit() const noexcept { return max_rounds ? *max_rounds : sim_round_cap; }

    Money money() const { return *money_M; }
    Money price_order() const { return *price_order_S; }
    Money seller_value() const { return price_order_S->scaled(*sv); }
    Money buyer_value() const { return price_order_S->scaled(*bv); }

    void validate() const {
        auto fail = [](const std::string& m) { throw ConfigError("game config: " + m); };
        if (family == Family::Bargaining) {
            if (!money_M || !delta_1 || !delta_2) fail("bargaining needs money_M, delta_1, delta_2");
            if (price_order_S || sv || bv) fail("bargaining config carries negotiation fields");
            if (money_M->cents() <= 0) fail("money_M must be positive");
            for (double d : {*delta_1, *delta_2})
                if (!(d > 0.0 && d <= 1.0)) fail("discount factors must lie in (0,1]");
        } else {
            if (!price_order_S || !sv || !bv) fail("negotiation needs price_order_S, sv, bv");
            if (money_M || delta_1 || delta_2) fail("negotiation config carries bargaining fields");
            if (price_order_S->cents() <= 0) fail("price_order_S must be positive");
            if (!(*sv > 0.0) || !(*bv > 0.0)) fail("sv and bv must be positive");
        }
        if (max_rounds && *max_rounds < 1) fail("max_rounds must be positive");
        if (sim_round_cap < 1) fail("sim_round_cap must be at least 1");
    }

    bool operator==(const GameConfig&) const = default;
};

struct Split {
    Money proposer_gain;
    Money responder_gain;
    bool operator==(const Split&) const = default;
};

struct Price {
    Money price;
    bool operator==(const Price&) const = default;
};

using Offer = std::variant<Split, Price>;

enum class Decision { Accept, Reject, OutsideOption };

inline std::string_view to_string(Decision d) {
    switch (d) {
        case Decision::Accept: return "accept";
        case Decision::Reject: return "reject";
        case Decision::OutsideOption: return "outside";
    }
    return "reject";
}

struct RoundRecord {
    int round = 1;
    AgentId proposer_id;
    AgentId responder_id;
    Offer offer;
    std::string proposer_message;
    Decision decision = Decision::Reject;
    std::string responder_message;
    bool operator==(const RoundRecord&) const = default;
};

enum class OutcomeKind { Accepted, Outside, NoAgreement, Truncated, Aborted };

inline std::string_view to_string(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::Accepted: return "accepted";
        case OutcomeKind::Outside: return "outside";
        case OutcomeKind::NoAgreement: return "no_agreement";
        case OutcomeKind::Truncated: return "truncated";
        case OutcomeKind::Aborted: return "aborted";
    }
    return "aborted";
}

struct Outcome {
    OutcomeKind kind = OutcomeKind::NoAgreement;
    int round = 0;           // round at which the game ended
    std::string diagnostic;  // aborted games only
    bool operator==(const Outcome&) const = default;
};

struct GameLog {
    std::uint64_t seed = 0;  // per-game seed; doubles as the game id
    GameConfig config;
    AgentId player_1_id;
    AgentId player_2_id;
    std::vector<RoundRecord> rounds;
    Outcome outcome;
    std::pair<Money, Money> payoffs;
    bool operator==(const GameLog&) const = default;
};

/// Checks an offer against the family and configuration.
inline void check_offer(const GameConfig& config, const Offer& offer) {
    if (config.family == Family::Bargaining) {
        const auto* split = std::get_if<Split>(&offer);
        if (!split) throw RuleViolation("bargaining offer must be a split");
        if (split->proposer_gain.cents() < 0 || split->responder_gain.cents() < 0)
            throw RuleViolation("split gains must be non-negative");
        if (!within_one_unit(split->proposer_gain + split->responder_gain, config.money()))
            throw RuleViolation("split " + split->proposer_gain.to_string() + "/" +
                                split->responder_gain.to_string() + " does not sum to " +
                                config.money().to_string());
    } else {
        const auto* price = std::get_if<Price>(&offer);
        if (!price) throw RuleViolation("negotiation offer must be a price");
        if (price->price.cents() < 0) throw RuleViolation("price must be non-negative");
    }
}

class GameState {
public:
    enum class Phase { AwaitingProposal, AwaitingResponse };

    const GameConfig& config() const noexcept { return config_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const AgentId& player_1_id() const noexcept { return player_1_; }
    const AgentId& player_2_id() const noexcept { return player_2_; }
    int round() const noexcept { return static_cast<int>(history_.size()) + 1; }
    Phase phase() const noexcept { return pending_ ? Phase::AwaitingResponse : Phase::AwaitingProposal; }

    const AgentId& proposer_id() const noexcept { return round() % 2 == 1 ? player_1_ : player_2_; }
    const AgentId& responder_id() const noexcept { return round() % 2 == 1 ? player_2_ : player_1_; }

    /// Rounds left including the current one; nullopt when the horizon is unbounded.
    std::optional<int> rounds_remaining() const noexcept {
        if (!config_.max_rounds) return std::nullopt;
        return *config_.max_rounds - round() + 1;
    }

    const std::vector<RoundRecord>& history() const noexcept { return history_; }
    const Offer* pending_offer() const noexcept { return pending_ ? &pending_->first : nullptr; }
    const std::string& pending_message() const noexcept {
        static const std::string empty;
        return pending_ ? pending_->second : empty;
    }

private:
    friend GameState new_game(const GameConfig&, AgentId, AgentId, std::uint64_t);
    friend GameState apply_proposal(GameState, const Offer&, std::string);
    friend std::variant<GameState, GameLog> apply_response(GameState, Decision, std::string);
    friend GameLog abort_game(GameState, std::string);

    GameConfig config_;
    std::uint64_t seed_ = 0;
    AgentId player_1_;
    AgentId player_2_;
    std::vector<RoundRecord> history_;
    std::optional<std::pair<Offer, std::string>> pending_;
};

inline GameState new_game(const GameConfig& config, AgentId p1, AgentId p2, std::uint64_t seed = 0) {
    config.validate();
    if (p1 == p2) throw ConfigError("a game needs two distinct player ids");
    GameState s;
    s.config_ = config;
    s.seed_ = seed;
    s.player_1_ = std::move(p1);
    s.player_2_ = std::move(p2);
    return s;
}

inline GameState apply_proposal(GameState state, const Offer& offer, std::string message) {
    if (state.pending_) throw StateError("a proposal is already awaiting a response");
    check_offer(state.config_, offer);
    if (!state.config_.messages_allowed && !message.empty())
        throw RuleViolation("messages are disabled in this game");
    state.pending_.emplace(offer, std::move(message));
    return state;
}

inline std::pair<Money, Money> payoffs(const GameLog& log);

namespace detail {

inline GameLog close_game(const GameConfig& config, std::uint64_t seed,
                          const AgentId& p1, const AgentId& p2, std::vector<RoundRecord> rounds,
                          Outcome outcome) {
    GameLog log;
    log.seed = seed;
    log.config = config;
    log.player_1_id = p1;
    log.player_2_id = p2;
    log.rounds = std::move(rounds);
    log.outcome = std::move(outcome);
    log.payoffs = payoffs(log);
    return log;
}

}  // namespace detail

inline std::variant<GameState, GameLog> apply_response(GameState state, Decision decision,
                                                       std::string message) {
    if (!state.pending_) throw StateError("no proposal is awaiting a response");
    const GameConfig& cfg = state.config_;
    if (decision == Decision::OutsideOption && cfg.family == Family::Bargaining)
        throw RuleViolation("bargaining has no outside option");
    if (!cfg.messages_allowed && !message.empty())
        throw RuleViolation("messages are disabled in this game");

    const int r = state.round();
    RoundRecord rec;
    rec.round = r;
    rec.proposer_id = state.proposer_id();
    rec.responder_id = state.responder_id();
    rec.offer = std::move(state.pending_->first);
    rec.proposer_message = std::move(state.pending_->second);
    rec.decision = decision;
    rec.responder_message = std::move(message);
    state.pending_.reset();
    state.history_.push_back(std::move(rec));

    auto finish = [&](OutcomeKind kind) -> std::variant<GameState, GameLog> {
        return detail::close_game(cfg, state.seed_, state.player_1_, state.player_2_,
                                  std::move(state.history_), Outcome{kind, r, {}});
    };

    switch (decision) {
        case Decision::Accept: return finish(OutcomeKind::Accepted);
        case Decision::OutsideOption: return finish(OutcomeKind::Outside);
        case Decision::Reject: break;
    }
    if (cfg.max_rounds && r >= *cfg.max_rounds)
        return finish(cfg.family == Family::Bargaining ? OutcomeKind::NoAgreement : OutcomeKind::Outside);
    if (!cfg.max_rounds && r >= cfg.sim_round_cap) return finish(OutcomeKind::Truncated);
    return state;
}

/// Terminates a game early, e.g. after an external agent failed to respond.
inline GameLog abort_game(GameState state, std::string diagnostic) {
    const int r = state.round();
    return detail::close_game(state.config_, state.seed_, state.player_1_,
                              state.player_2_, std::move(state.history_),
                              Outcome{OutcomeKind::Aborted, r, std::move(diagnostic)});
}

/// Payoffs of a finished game, in player-slot order.
inline std::pair<Money, Money> payoffs(const GameLog& log) {
    const auto& cfg = log.config;
    if (log.outcome.kind != OutcomeKind::Accepted) {
        if (log.rounds.empty() && log.outcome.kind != OutcomeKind::Aborted)
            throw StateError("payoffs requested for a game with no rounds");
        return {Money{}, Money{}};
    }
    if (log.rounds.empty()) throw StateError("accepted game without rounds");
    const RoundRecord& last = log.rounds.back();
    const bool p1_proposed = last.proposer_id == log.player_1_id;
    if (cfg.family == Family::Bargaining) {
        const auto& split = std::get<Split>(last.offer);
        const Money share_1 = p1_proposed ? split.proposer_gain : split.responder_gain;
        const Money share_2 = p1_proposed ? split.responder_gain : split.proposer_gain;
        const int exponent = last.round - 1;
        return {share_1.scaled(std::pow(*cfg.delta_1, exponent)),
                share_2.scaled(std::pow(*cfg.delta_2, exponent))};
    }
    const Money price = std::get<Price>(last.offer).price;
    return {price - cfg.seller_value(), cfg.buyer_value() - price};
}

/// Config fields an outside observer sees; private values are nullopt (Missing)
/// under incomplete information.
struct ConfigView {
    Family family = Family::Bargaining;
    std::optional<Money> money_M;
    std::optional<Money> price_order_S;
    std::optional<double> sv;
    std::optional<double> bv;
    std::optional<double> delta_1;
    std::optional<double> delta_2;
    std::optional<int> max_rounds;
    bool complete_info = true;
    bool messages_allowed = true;
    bool operator==(const ConfigView&) const = default;
};

inline ConfigView mask_config(const GameConfig& c) {
    ConfigView v;
    v.family = c.family;
    v.money_M = c.money_M;
    v.price_order_S = c.price_order_S;
    v.max_rounds = c.max_rounds;
    v.complete_info = c.complete_info;
    v.messages_allowed = c.messages_allowed;
    if (c.complete_info) {
        v.sv = c.sv;
        v.bv = c.bv;
        v.delta_1 = c.delta_1;
        v.delta_2 = c.delta_2;
    }
    return v;
}

struct PublicView {
    ConfigView config;
    AgentId player_1_id;
    AgentId player_2_id;
    int round = 1;
    AgentId proposer_id;
    AgentId responder_id;
    std::vector<RoundRecord> history;     // completed rounds before `round`
    std::optional<Offer> current_offer;   // set while a response is pending
    std::string current_message;
    bool operator==(const PublicView&) const = default;
};

inline PublicView public_view(const GameState& s) {
    PublicView v;
    v.config = mask_config(s.config());
    v.player_1_id = s.player_1_id();
    v.player_2_id = s.player_2_id();
    v.round = s.round();
    v.proposer_id = s.proposer_id();
    v.responder_id = s.responder_id();
    v.history = s.history();
    if (const Offer* o = s.pending_offer()) {
        v.current_offer = *o;
        v.current_message = s.pending_message();
    }
    return v;
}

/// View of a logged game just before the decision at `round`. With
/// `with_current_offer` the round's offer and message are visible (response
/// point); otherwise the proposal itself is the decision (proposal point).
inline PublicView public_view(const GameLog& log, int round, bool with_current_offer) {
    if (round < 1 || round > static_cast<int>(log.rounds.size()) + (with_current_offer ? 0 : 1))
        throw StateError("round " + std::to_string(round) + " outside the logged game");
    PublicView v;
    v.config = mask_config(log.config);
    v.player_1_id = log.player_1_id;
    v.player_2_id = log.player_2_id;
    v.round = round;
    v.proposer_id = round % 2 == 1 ? log.player_1_id : log.player_2_id;
    v.responder_id = round % 2 == 1 ? log.player_2_id : log.player_1_id;
    v.history.assign(log.rounds.begin(), log.rounds.begin() + (round - 1));
    if (with_current_offer) {
        const RoundRecord& cur = log.rounds[static_cast<std::size_t>(round - 1)];
        v.current_offer = cur.offer;
        v.current_message = cur.proposer_message;
    }
    return v;
}

/// Full structural check of a finished game record.
inline void validate_log(const GameLog& log) {
    auto fail = [&](const std::string& m) { throw ValidationError("game " + std::to_string(log.seed) + ": " + m); };
    try {
        log.config.validate();
    } catch (const ConfigError& e) {
        fail(e.what());
    }
    if (log.player_1_id == log.player_2_id) fail("players must differ");
    const auto& cfg = log.config;
    const auto n = static_cast<int>(log.rounds.size());
    if (log.outcome.kind != OutcomeKind::Aborted && n == 0) fail("no rounds played");
    if (n > cfg.round_limit()) fail("more rounds than the horizon allows");
    for (int i = 0; i < n; ++i) {
        const RoundRecord& r = log.rounds[static_cast<std::size_t>(i)];
        if (r.round != i + 1) fail("round indices must be consecutive from 1");
        const AgentId& expected = (i % 2 == 0) ? log.player_1_id : log.player_2_id;
        const AgentId& other = (i % 2 == 0) ? log.player_2_id : log.player_1_id;
        if (r.proposer_id != expected || r.responder_id != other)
            fail("role alternation broken at round " + std::to_string(r.round));
        try {
            check_offer(cfg, r.offer);
        } catch (const RuleViolation& e) {
            fail(std::string("round ") + std::to_string(r.round) + ": " + e.what());
        }
        if (!cfg.messages_allowed && (!r.proposer_message.empty() || !r.responder_message.empty()))
            fail("message recorded in a no-message game");
        if (r.decision == Decision::OutsideOption && cfg.family == Family::Bargaining)
            fail("outside option in bargaining");
        if (i + 1 < n && r.decision != Decision::Reject)
            fail("terminal decision before the final round");
    }
    if (log.outcome.kind != OutcomeKind::Aborted && log.outcome.round != n)
        fail("outcome round does not match the transcript");
    const Decision last = n > 0 ? log.rounds.back().decision : Decision::Reject;
    switch (log.outcome.kind) {
        case OutcomeKind::Accepted:
            if (last != Decision::Accept) fail("accepted outcome without an accept");
            break;
        case OutcomeKind::Outside:
            if (cfg.family != Family::Negotiation) fail("outside outcome outside negotiation");
            if (last != Decision::OutsideOption && !(last == Decision::Reject && cfg.max_rounds && n == *cfg.max_rounds))
                fail("outside outcome without an outside decision or horizon exhaustion");
            break;
        case OutcomeKind::NoAgreement:
            if (cfg.family != Family::Bargaining || last != Decision::Reject || !cfg.max_rounds || n != *cfg.max_rounds)
                fail("no-agreement outcome requires a rejected final bargaining round");
            break;
        case OutcomeKind::Truncated:
            if (cfg.max_rounds || n != cfg.sim_round_cap || last != Decision::Reject)
                fail("truncation only at the simulation cap of an unbounded game");
            break;
        case OutcomeKind::Aborted:
            if (n > 0 && last != Decision::Reject) fail("aborted after a terminal decision");
            break;
    }
    if (payoffs(log) != log.payoffs) fail("payoffs inconsistent with the transcript");
}

}  // namespace counterpart
