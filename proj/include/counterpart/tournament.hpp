#pragma once

// Configuration grids, round-robin scheduling and game execution.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <variant>
#include <vector>

#include "counterpart/agents.hpp"
#include "counterpart/errors.hpp"
#include "counterpart/external_agent.hpp"
#include "counterpart/game.hpp"
#include "counterpart/rng.hpp"

namespace counterpart {

struct ConfigGrid {
    Family family = Family::Bargaining;
    std::vector<Money> scales;                     // money_M or price_order_S
    std::vector<std::optional<int>> horizons;      // nullopt: unbounded
    std::vector<bool> complete_info;
    std::vector<bool> messages_allowed;
    std::vector<double> delta_1;                   // bargaining
    std::vector<double> delta_2;                   // bargaining
    std::vector<double> sv;                        // negotiation
    std::vector<double> bv;                        // negotiation
    int sim_round_cap = 100;

    static ConfigGrid glee_bargaining() {
        ConfigGrid g;
        g.family = Family::Bargaining;
        g.scales = {Money::whole(100), Money::whole(10'000), Money::whole(1'000'000)};
        g.horizons = {12, std::nullopt};
        g.complete_info = {true, false};
        g.messages_allowed = {true, false};
        g.delta_1 = g.delta_2 = {0.8, 0.9, 0.95, 1.0};
        return g;
    }

    static ConfigGrid glee_negotiation() {
        ConfigGrid g;
        g.family = Family::Negotiation;
        g.scales = {Money::whole(100), Money::whole(10'000), Money::whole(1'000'000)};
        g.horizons = {1, 10, std::nullopt};
        g.complete_info = {true, false};
        g.messages_allowed = {true, false};
        g.sv = g.bv = {0.8, 1.0, 1.2, 1.5};
        return g;
    }
};

namespace detail {

inline auto config_sort_key(const GameConfig& c) {
    const int horizon = c.max_rounds ? *c.max_rounds : 1 << 30;
    const auto scale = c.family == Family::Bargaining ? c.money_M->cents() : c.price_order_S->cents();
    return std::make_tuple(static_cast<int>(c.family), scale, horizon, !c.complete_info, !c.messages_allowed,
                           c.delta_1.value_or(0), c.delta_2.value_or(0), c.sv.value_or(0), c.bv.value_or(0),
                           c.sim_round_cap);
}

}  // namespace detail

/// Deduplicated cartesian product in canonical order.
inline std::vector<GameConfig> enumerate_configs(const ConfigGrid& g) {
    auto need = [](bool empty, const char* axis) {
        if (empty) throw ConfigError(std::string("config grid axis '") + axis + "' is empty");
    };
    need(g.scales.empty(), "scales");
    need(g.horizons.empty(), "horizons");
    need(g.complete_info.empty(), "complete_info");
    need(g.messages_allowed.empty(), "messages_allowed");
    std::vector<std::pair<double, double>> params;
    if (g.family == Family::Bargaining) {
        need(g.delta_1.empty(), "delta_1");
        need(g.delta_2.empty(), "delta_2");
        for (double a : g.delta_1)
            for (double b : g.delta_2) params.emplace_back(a, b);
    } else {
        need(g.sv.empty(), "sv");
        need(g.bv.empty(), "bv");
        for (double a : g.sv)
            for (double b : g.bv) params.emplace_back(a, b);
    }
    std::vector<GameConfig> out;
    for (Money scale : g.scales)
        for (const auto& h : g.horizons)
            for (bool ci : g.complete_info)
                for (bool msg : g.messages_allowed)
                    for (const auto& [a, b] : params) {
                        GameConfig c = g.family == Family::Bargaining
                                           ? GameConfig::bargaining(scale, a, b, h, ci, msg)
                                           : GameConfig::negotiation(scale, a, b, h, ci, msg);
                        c.sim_round_cap = g.sim_round_cap;
                        c.validate();
                        out.push_back(c);
                    }
    std::sort(out.begin(), out.end(), [](const GameConfig& x, const GameConfig& y) {
        return detail::config_sort_key(x) < detail::config_sort_key(y);
    });
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Bargaining configurations of the university-hackathon stages (1, 2, 3, final).
inline std::vector<GameConfig> hackathon_bargaining_configs(bool final_only = false) {
    struct Row { std::int64_t m; std::optional<int> h; bool complete; double d1, d2; bool final_stage; };
    const Row rows[] = {
        {100, 12, true, 0.8, 0.95, false},
        {100, 12, true, 0.8, 1.0, false},
        {100, 12, true, 0.95, 0.95, false},
        {10'000, 12, false, 0.8, 0.8, false},
        {1'000'000, 12, false, 0.9, 0.9, false},
        {100, 12, false, 1.0, 1.0, true},
        {10'000, std::nullopt, false, 0.9, 0.8, true},
        {10'000, 12, true, 0.8, 1.0, true},
        {1'000'000, 12, false, 1.0, 0.8, true},
        {1'000'000, std::nullopt, true, 0.9, 0.9, true},
    };
    std::vector<GameConfig> out;
    for (const auto& r : rows)
        if (!final_only || r.final_stage)
            out.push_back(GameConfig::bargaining(Money::whole(r.m), r.d1, r.d2, r.h, r.complete, true));
    return out;
}

/// Negotiation configurations of the university-hackathon stages (2, 3, final).
inline std::vector<GameConfig> hackathon_negotiation_configs(bool final_only = false) {
    struct Row { double sv, bv; std::int64_t s; std::optional<int> h; bool complete; bool final_stage; };
    const Row rows[] = {
        {1.0, 1.2, 10'000, 1, true, false},
        {0.8, 1.5, 10'000, 1, false, false},
        {1.0, 1.5, 1'000'000, 10, false, false},
        {1.2, 1.0, 100, 10, false, true},
        {1.0, 1.2, 10'000, std::nullopt, false, true},
        {1.2, 1.5, 10'000, 1, true, true},
        {0.8, 1.5, 1'000'000, 10, false, true},
        {0.8, 1.5, 1'000'000, std::nullopt, true, true},
    };
    std::vector<GameConfig> out;
    for (const auto& r : rows)
        if (!final_only || r.final_stage)
            out.push_back(GameConfig::negotiation(Money::whole(r.s), r.sv, r.bv, r.h, r.complete, true));
    return out;
}

inline std::vector<std::string_view> config_preset_names() {
    return {"glee-grid-bargaining", "glee-grid-negotiation", "glee-grid", "hackathon-bargaining",
            "hackathon-negotiation", "hackathon", "hackathon-final", "hackathon-final-bargaining",
            "hackathon-final-negotiation"};
}

inline std::vector<GameConfig> config_preset(std::string_view name) {
    auto concat = [](std::vector<GameConfig> a, const std::vector<GameConfig>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };
    if (name == "glee-grid-bargaining") return enumerate_configs(ConfigGrid::glee_bargaining());
    if (name == "glee-grid-negotiation") return enumerate_configs(ConfigGrid::glee_negotiation());
    if (name == "glee-grid")
        return concat(enumerate_configs(ConfigGrid::glee_bargaining()), enumerate_configs(ConfigGrid::glee_negotiation()));
    if (name == "hackathon-bargaining") return hackathon_bargaining_configs();
    if (name == "hackathon-negotiation") return hackathon_negotiation_configs();
    if (name == "hackathon") return concat(hackathon_bargaining_configs(), hackathon_negotiation_configs());
    if (name == "hackathon-final") return concat(hackathon_bargaining_configs(true), hackathon_negotiation_configs(true));
    if (name == "hackathon-final-bargaining") return hackathon_bargaining_configs(true);
    if (name == "hackathon-final-negotiation") return hackathon_negotiation_configs(true);
    throw ConfigError("unknown config preset '" + std::string(name) + "'");
}

struct RosterEntry {
    AgentId id;
    std::variant<ScriptedAgentSpec, Endpoint> agent;

    static RosterEntry scripted(ScriptedAgentSpec spec) {
        AgentId id = spec.agent_id;
        return RosterEntry{std::move(id), std::move(spec)};
    }
    static RosterEntry external(AgentId id, Endpoint endpoint) { return RosterEntry{std::move(id), std::move(endpoint)}; }
};

struct TournamentPlan {
    std::vector<RosterEntry> roster;
    std::vector<GameConfig> configs;
    int games_per_pair = 1;
    std::uint64_t master_seed = 0;
    bool self_play = false;
    int workers = 1;
};

inline std::uint64_t game_seed(std::uint64_t master_seed, std::string_view p1, std::string_view p2,
                               std::size_t config_index, int repetition) {
    return stable_hash(master_seed, p1, p2, static_cast<std::uint64_t>(config_index), repetition);
}

/// Suffix given to the second seat in self-play games, so seat ids stay distinct.
inline constexpr std::string_view kSelfPlaySuffix = "#mirror";

namespace detail {

class Seat {
public:
    Seat(const RosterEntry& entry, AgentId seat_id) : entry_(&entry), id_(std::move(seat_id)) {
        if (const auto* ep = std::get_if<Endpoint>(&entry.agent)) session_.emplace(id_, *ep);
    }

    AgentAction propose(const PublicView& view, const PrivateValue& own, std::uint64_t seed) {
        if (session_) return session_->act(view, Turn::Propose, own);
        ScriptedAgentSpec spec = std::get<ScriptedAgentSpec>(entry_->agent);
        spec.agent_id = id_;
        return act_propose(spec, view, own, seed);
    }

    AgentAction respond(const PublicView& view, const PrivateValue& own, std::uint64_t seed) {
        if (session_) return session_->act(view, Turn::Respond, own);
        ScriptedAgentSpec spec = std::get<ScriptedAgentSpec>(entry_->agent);
        spec.agent_id = id_;
        return act_respond(spec, view, own, seed);
    }

private:
    const RosterEntry* entry_;
    AgentId id_;
    std::optional<ExternalAgentSession> session_;
};

inline PrivateValue private_value(const GameConfig& c, bool first_player) {
    if (c.family == Family::Bargaining) return {first_player ? *c.delta_1 : *c.delta_2};
    return {first_player ? *c.sv : *c.bv};
}

}  // namespace detail

/// Plays one game to completion. Failures of external agents abort the game
/// with a diagnostic instead of propagating.
inline GameLog play_game(const GameConfig& config, const RosterEntry& first, const RosterEntry& second,
                         std::uint64_t seed) {
    const AgentId id_1 = first.id;
    const AgentId id_2 = &first == &second || first.id == second.id ? second.id + std::string(kSelfPlaySuffix) : second.id;
    GameState state = new_game(config, id_1, id_2, seed);
    std::optional<detail::Seat> seat_1;
    std::optional<detail::Seat> seat_2;
    try {
        seat_1.emplace(first, id_1);
        seat_2.emplace(second, id_2);
    } catch (const Error& e) {
        return abort_game(std::move(state), std::string("connect: ") + e.what());
    }
    const std::uint64_t seed_1 = stable_hash(seed, 1);
    const std::uint64_t seed_2 = stable_hash(seed, 2);
    for (;;) {
        const bool p1_proposes = state.round() % 2 == 1;
        auto& proposer = p1_proposes ? *seat_1 : *seat_2;
        auto& responder = p1_proposes ? *seat_2 : *seat_1;
        try {
            auto prop = std::get<ProposalAction>(
                proposer.propose(public_view(state), detail::private_value(config, p1_proposes), p1_proposes ? seed_1 : seed_2));
            state = apply_proposal(state, prop.offer, std::move(prop.message));
        } catch (const Error& e) {
            std::string why = "proposal by " + state.proposer_id() + ": " + e.what();
            return abort_game(std::move(state), std::move(why));
        }
        try {
            auto resp = std::get<ResponseAction>(
                responder.respond(public_view(state), detail::private_value(config, !p1_proposes), p1_proposes ? seed_2 : seed_1));
            auto next = apply_response(state, resp.decision, std::move(resp.message));
            if (auto* log = std::get_if<GameLog>(&next)) return std::move(*log);
            state = std::get<GameState>(std::move(next));
        } catch (const Error& e) {
            std::string why = "response by " + state.responder_id() + ": " + e.what();
            return abort_game(std::move(state), std::move(why));
        }
    }
}

struct ScheduledGame {
    std::size_t first = 0;
    std::size_t second = 0;
    std::size_t config_index = 0;
    int repetition = 0;
    std::uint64_t seed = 0;
};

inline std::vector<ScheduledGame> schedule_round_robin(const TournamentPlan& plan) {
    if (plan.roster.size() < 2 && !plan.self_play) throw ConfigError("round robin needs at least two agents");
    if (plan.games_per_pair < 1) throw ConfigError("games_per_pair must be at least 1");
    if (plan.configs.empty()) throw ConfigError("tournament has no configs");
    for (std::size_t i = 0; i < plan.roster.size(); ++i)
        for (std::size_t j = i + 1; j < plan.roster.size(); ++j)
            if (plan.roster[i].id == plan.roster[j].id) throw ConfigError("duplicate agent id " + plan.roster[i].id);
    std::vector<ScheduledGame> games;
    for (std::size_t i = 0; i < plan.roster.size(); ++i)
        for (std::size_t j = 0; j < plan.roster.size(); ++j) {
            if (i == j && !plan.self_play) continue;
            for (std::size_t c = 0; c < plan.configs.size(); ++c)
                for (int rep = 0; rep < plan.games_per_pair; ++rep)
                    games.push_back({i, j, c, rep,
                                     game_seed(plan.master_seed, plan.roster[i].id, plan.roster[j].id, c, rep)});
        }
    return games;
}

/// Every ordered pair plays every config `games_per_pair` times. The result is
/// sorted by game seed, so it does not depend on the worker count.
inline std::vector<GameLog> run_round_robin(const TournamentPlan& plan) {
    for (const auto& c : plan.configs) c.validate();
    for (const auto& r : plan.roster)
        if (const auto* s = std::get_if<ScriptedAgentSpec>(&r.agent)) s->validate();
    const auto games = schedule_round_robin(plan);
    std::vector<GameLog> logs(games.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t k = next++; k < games.size(); k = next++) {
            const auto& g = games[k];
            logs[k] = play_game(plan.configs[g.config_index], plan.roster[g.first], plan.roster[g.second], g.seed);
        }
    };
    const int workers = std::max(1, plan.workers);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    std::vector<std::size_t> order(games.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return games[a].seed < games[b].seed; });
    std::vector<GameLog> sorted;
    sorted.reserve(logs.size());
    for (std::size_t k : order) sorted.push_back(std::move(logs[k]));
    return sorted;
}

}  // namespace counterpart
