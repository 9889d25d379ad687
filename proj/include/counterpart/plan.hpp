#pragma once

// Declarative simulation plans. A plan names a source and a target
// population, the configurations they play, and a master seed. A plan may
// start from a named preset and override any part of it.
//
//   {"preset": "desk", "seed": 3,
//    "configs": "hackathon-bargaining",
//    "target": {"population": {"count": 10}}}

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "counterpart/agents.hpp"
#include "counterpart/errors.hpp"
#include "counterpart/game_io.hpp"
#include "counterpart/tournament.hpp"

namespace counterpart {

// ---------------------------------------------------------------- agents

inline json to_json(const ScriptedAgentSpec& a) {
    json j{{"agent_id", a.agent_id},
           {"style", to_string(a.style)},
           {"noise_sigma", a.noise_sigma},
           {"talk_tracks_state", a.talk_tracks_state},
           {"bargaining",
            {{"initial_demand_frac", a.bargaining.initial_demand_frac},
             {"concession_rate", a.bargaining.concession_rate},
             {"accept_threshold_frac", a.bargaining.accept_threshold_frac},
             {"deadline_panic_rounds", a.bargaining.deadline_panic_rounds}}},
           {"negotiation",
            {{"initial_margin", a.negotiation.initial_margin},
             {"concession_rate", a.negotiation.concession_rate},
             {"accept_margin", a.negotiation.accept_margin},
             {"outside_trigger_round", a.negotiation.outside_trigger_round ? json(*a.negotiation.outside_trigger_round) : json(nullptr)}}}};
    return j;
}

inline Style style_from_string(std::string_view s) {
    if (s == "firm") return Style::Firm;
    if (s == "neutral") return Style::Neutral;
    if (s == "conciliatory") return Style::Conciliatory;
    throw ConfigError("unknown style '" + std::string(s) + "'");
}

inline ScriptedAgentSpec agent_spec_from_json(const json& j) {
    using detail::get_as;
    try {
        detail::expect_keys(j, "agent", {"agent_id", "style", "bargaining", "negotiation"}, {"noise_sigma", "talk_tracks_state"});
        ScriptedAgentSpec a;
        a.agent_id = get_as<std::string>(j, "agent_id", "agent");
        a.style = style_from_string(get_as<std::string>(j, "style", "agent"));
        if (j.contains("noise_sigma")) a.noise_sigma = get_as<double>(j, "noise_sigma", "agent");
        if (j.contains("talk_tracks_state")) a.talk_tracks_state = get_as<bool>(j, "talk_tracks_state", "agent");
        const json& b = j["bargaining"];
        detail::expect_keys(b, "agent.bargaining", {"initial_demand_frac", "concession_rate", "accept_threshold_frac", "deadline_panic_rounds"});
        a.bargaining.initial_demand_frac = get_as<double>(b, "initial_demand_frac", "agent.bargaining");
        a.bargaining.concession_rate = get_as<double>(b, "concession_rate", "agent.bargaining");
        a.bargaining.accept_threshold_frac = get_as<double>(b, "accept_threshold_frac", "agent.bargaining");
        a.bargaining.deadline_panic_rounds = get_as<int>(b, "deadline_panic_rounds", "agent.bargaining");
        const json& n = j["negotiation"];
        detail::expect_keys(n, "agent.negotiation", {"initial_margin", "concession_rate", "accept_margin"}, {"outside_trigger_round"});
        a.negotiation.initial_margin = get_as<double>(n, "initial_margin", "agent.negotiation");
        a.negotiation.concession_rate = get_as<double>(n, "concession_rate", "agent.negotiation");
        a.negotiation.accept_margin = get_as<double>(n, "accept_margin", "agent.negotiation");
        if (n.contains("outside_trigger_round") && !n["outside_trigger_round"].is_null())
            a.negotiation.outside_trigger_round = get_as<int>(n, "outside_trigger_round", "agent.negotiation");
        a.validate();
        return a;
    } catch (const detail::SchemaError& e) {
        throw ConfigError(e.what());
    }
}

// ---------------------------------------------------------------- populations

namespace detail {

inline ParamRange range_from_json(const json& j, std::string_view name) {
    if (j.is_number()) return {j.get<double>(), j.get<double>()};
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ConfigError("population." + std::string(name) + ": expected [lo, hi] or a number");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline json range_to_json(ParamRange r) { return json::array({r.lo, r.hi}); }

}  // namespace detail

inline json to_json(const PopulationSpec& p) {
    json j{{"count", p.count},
           {"seed", p.seed},
           {"id_prefix", p.id_prefix},
           {"never_outside_prob", p.never_outside_prob},
           {"style_weights", p.style_weights},
           {"style_coupling", p.style_coupling}};
    for (const auto& [name, range] : p.axes()) j[name] = detail::range_to_json(range);
    return j;
}

/// Fields absent from `j` keep the values already in `base`.
inline PopulationSpec population_from_json(const json& j, PopulationSpec base = {}) {
    if (!j.is_object()) throw ConfigError("population: expected an object");
    PopulationSpec p = std::move(base);
    std::map<std::string, ParamRange*> axes{{"initial_demand_frac", &p.initial_demand_frac},
                                            {"bargaining_concession", &p.bargaining_concession},
                                            {"accept_threshold_frac", &p.accept_threshold_frac},
                                            {"deadline_panic_rounds", &p.deadline_panic_rounds},
                                            {"initial_margin", &p.initial_margin},
                                            {"negotiation_concession", &p.negotiation_concession},
                                            {"accept_margin", &p.accept_margin},
                                            {"outside_trigger_round", &p.outside_trigger_round},
                                            {"noise_sigma", &p.noise_sigma}};
    try {
        for (const auto& [key, value] : j.items()) {
            if (auto it = axes.find(key); it != axes.end()) {
                *it->second = detail::range_from_json(value, key);
            } else if (key == "count") {
                p.count = value.get<int>();
            } else if (key == "seed") {
                p.seed = value.get<std::uint64_t>();
            } else if (key == "id_prefix") {
                p.id_prefix = value.get<std::string>();
            } else if (key == "never_outside_prob") {
                p.never_outside_prob = value.get<double>();
            } else if (key == "style_weights") {
                p.style_weights = value.get<std::array<double, 3>>();
            } else if (key == "style_coupling") {
                p.style_coupling = value.get<bool>();
            } else {
                throw ConfigError("population: unknown field '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("population: ") + e.what());
    }
    p.validate();
    return p;
}

// ---------------------------------------------------------------- configs

inline ConfigGrid grid_from_json(const json& j) {
    ConfigGrid g;
    try {
        detail::expect_keys(j, "grid", {"family", "scales", "horizons"},
                            {"complete_info", "messages_allowed", "delta_1", "delta_2", "sv", "bv", "sim_round_cap"});
        g.family = family_from_string(j["family"].get<std::string>());
        for (const auto& s : j["scales"]) g.scales.push_back(money_from_json(s));
        for (const auto& h : j["horizons"]) g.horizons.push_back(h.is_null() ? std::nullopt : std::optional<int>(h.get<int>()));
        g.complete_info = j.value("complete_info", std::vector<bool>{true, false});
        g.messages_allowed = j.value("messages_allowed", std::vector<bool>{true, false});
        g.delta_1 = j.value("delta_1", std::vector<double>{});
        g.delta_2 = j.value("delta_2", std::vector<double>{});
        g.sv = j.value("sv", std::vector<double>{});
        g.bv = j.value("bv", std::vector<double>{});
        g.sim_round_cap = j.value("sim_round_cap", 100);
    } catch (const detail::SchemaError& e) {
        throw ConfigError(e.what());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }
    return g;
}

/// A preset name, {"grid": {...}}, a config object, or an array of any of these.
inline std::vector<GameConfig> configs_from_json(const json& j) {
    if (j.is_string()) return config_preset(j.get<std::string>());
    if (j.is_array()) {
        std::vector<GameConfig> out;
        for (const auto& item : j) {
            auto part = configs_from_json(item);
            out.insert(out.end(), part.begin(), part.end());
        }
        return out;
    }
    if (j.is_object() && j.contains("grid")) return enumerate_configs(grid_from_json(j["grid"]));
    try {
        GameConfig c = config_from_json(j);
        c.validate();
        return {c};
    } catch (const detail::SchemaError& e) {
        throw ConfigError(e.what());
    }
}

// ---------------------------------------------------------------- plans

struct ExternalSeat {
    AgentId id;
    Endpoint endpoint;
};

struct PlanSide {
    PopulationSpec population;
    std::vector<GameConfig> configs;
    std::vector<ExternalSeat> external;
};

struct SimulationPlan {
    std::uint64_t seed = 0;
    int games_per_pair = 1;
    bool self_play = false;
    PlanSide source;
    PlanSide target;
};

inline std::vector<std::string_view> plan_preset_names() { return {"desk", "desk-uncoupled", "smoke"}; }

inline json plan_preset(std::string_view name) {
    // Source and target agents differ on the deadline window; both sides bargain slowly
    // enough that the window is reached.
    static const json desk = json::parse(R"({
        "seed": 0,
        "games_per_pair": 1,
        "self_play": false,
        "configs": "hackathon",
        "source": {"population": {"count": 13, "id_prefix": "src", "bargaining_concession": [0.0, 0.01],
                                  "initial_demand_frac": [0.8, 0.95], "deadline_panic_rounds": [0, 5]}},
        "target": {"population": {"count": 20, "id_prefix": "tgt", "bargaining_concession": [0.0, 0.01],
                                  "initial_demand_frac": [0.8, 0.95], "deadline_panic_rounds": [7, 11]}}
    })");
    if (name == "desk") return desk;
    if (name == "desk-uncoupled") {
        json j = desk;
        j["source"]["population"]["style_coupling"] = false;
        j["target"]["population"]["style_coupling"] = false;
        return j;
    }
    if (name == "smoke") {
        json j = desk;
        j["configs"] = "hackathon-final";
        j["source"]["population"]["count"] = 4;
        j["target"]["population"]["count"] = 5;
        // Faster concessions so that proposal labels vary enough for every task.
        j["source"]["population"]["bargaining_concession"] = {0.02, 0.06};
        j["target"]["population"]["bargaining_concession"] = {0.02, 0.06};
        return j;
    }
    throw ConfigError("unknown plan preset '" + std::string(name) + "'");
}

/// Expands "preset" keys (recursively) and applies the overriding fields on top.
inline json resolve_plan_json(json j, int depth = 0) {
    if (!j.is_object()) throw ConfigError("plan: expected a JSON object");
    if (depth > 8) throw ConfigError("plan: preset chain too deep");
    if (!j.contains("preset")) return j;
    const std::string name = j["preset"].get<std::string>();
    j.erase("preset");
    json base = resolve_plan_json(plan_preset(name), depth + 1);
    base.merge_patch(j);
    return base;
}

namespace detail {

inline PlanSide side_from_json(const json& j, const json& shared_configs, std::string_view side, std::uint64_t plan_seed) {
    if (!j.is_object()) throw ConfigError(std::string("plan.") + std::string(side) + ": expected an object");
    for (const auto& [key, _] : j.items())
        if (key != "population" && key != "configs" && key != "external")
            throw ConfigError("plan." + std::string(side) + ": unknown field '" + key + "'");
    PlanSide s;
    s.population.role = side == "source" ? PopulationSpec::Role::Source : PopulationSpec::Role::Target;
    s.population.id_prefix = std::string(side);
    s.population.seed = stable_hash(plan_seed, side);
    if (j.contains("population")) s.population = population_from_json(j["population"], s.population);
    const json& cj = j.contains("configs") ? j["configs"] : shared_configs;
    if (cj.is_null()) throw ConfigError("plan." + std::string(side) + ": no configs given");
    s.configs = configs_from_json(cj);
    if (j.contains("external")) {
        for (const auto& e : j["external"]) {
            if (!e.is_object() || !e.contains("id") || !e.contains("endpoint"))
                throw ConfigError("plan." + std::string(side) + ".external: entries need 'id' and 'endpoint'");
            s.external.push_back({e["id"].get<std::string>(), Endpoint::parse(e["endpoint"].get<std::string>())});
        }
    }
    return s;
}

}  // namespace detail

/// `j` must already be resolved. Population seeds default to hashes of the plan seed.
inline SimulationPlan plan_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("plan: expected a JSON object");
    for (const auto& [key, _] : j.items())
        if (key != "seed" && key != "games_per_pair" && key != "self_play" && key != "configs" && key != "source" && key != "target")
            throw ConfigError("plan: unknown field '" + key + "'");
    SimulationPlan p;
    try {
        p.seed = j.value("seed", std::uint64_t{0});
        p.games_per_pair = j.value("games_per_pair", 1);
        p.self_play = j.value("self_play", false);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("plan: ") + e.what());
    }
    if (p.games_per_pair < 1) throw ConfigError("plan: games_per_pair must be at least 1");
    if (!j.contains("source") || !j.contains("target")) throw ConfigError("plan: needs 'source' and 'target'");
    const json shared = j.value("configs", json(nullptr));
    p.source = detail::side_from_json(j["source"], shared, "source", p.seed);
    p.target = detail::side_from_json(j["target"], shared, "target", p.seed);
    if (!disjoint_on_some_axis(p.source.population, p.target.population))
        throw ConfigError("plan: source and target populations overlap on every parameter axis");
    return p;
}

struct SimulationResult {
    std::vector<ScriptedAgentSpec> source_agents;
    std::vector<ScriptedAgentSpec> target_agents;
    std::vector<GameLog> source_logs;
    std::vector<GameLog> target_logs;
};

inline TournamentPlan tournament_for(const PlanSide& side, const std::vector<ScriptedAgentSpec>& agents, const SimulationPlan& plan,
                                     std::string_view tag, int workers) {
    TournamentPlan t;
    for (const auto& a : agents) t.roster.push_back(RosterEntry::scripted(a));
    for (const auto& e : side.external) t.roster.push_back(RosterEntry::external(e.id, e.endpoint));
    t.configs = side.configs;
    t.games_per_pair = plan.games_per_pair;
    t.master_seed = stable_hash(plan.seed, tag);
    t.self_play = plan.self_play;
    t.workers = workers;
    return t;
}

inline SimulationResult run_simulation(const SimulationPlan& plan, int workers = 1) {
    SimulationResult r;
    r.source_agents = generate_population(plan.source.population);
    r.target_agents = generate_population(plan.target.population);
    r.source_logs = run_round_robin(tournament_for(plan.source, r.source_agents, plan, "source", workers));
    r.target_logs = run_round_robin(tournament_for(plan.target, r.target_agents, plan, "target", workers));
    return r;
}

}  // namespace counterpart
