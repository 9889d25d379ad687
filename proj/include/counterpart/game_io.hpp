#pragma once

// JSON forms of configs, logs and public views. Logs persist one object per
// line. Readers are strict: a missing field is a parse error and an unknown
// field is a version error, both carrying the 1-based line number.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "counterpart/errors.hpp"
#include "counterpart/game.hpp"

namespace counterpart {

using nlohmann::json;

namespace detail {

/// Schema problem found while decoding; the loader attaches the line number.
struct SchemaError : Error {
    SchemaError(std::string what, bool unknown_field)
        : Error(std::move(what)), unknown(unknown_field) {}
    bool unknown;
};

inline void expect_keys(const json& j, std::string_view where,
                        std::initializer_list<std::string_view> required,
                        std::initializer_list<std::string_view> optional = {}) {
    if (!j.is_object()) throw SchemaError(std::string(where) + ": expected an object", false);
    for (auto k : required)
        if (!j.contains(std::string(k)))
            throw SchemaError(std::string(where) + ": missing field '" + std::string(k) + "'", false);
    for (const auto& [key, _] : j.items()) {
        auto match = [&](std::string_view k) { return k == key; };
        if (std::none_of(required.begin(), required.end(), match) &&
            std::none_of(optional.begin(), optional.end(), match))
            throw SchemaError(std::string(where) + ": unknown field '" + key + "'", true);
    }
}

template <typename T>
T get_as(const json& j, std::string_view key, std::string_view where) {
    try {
        return j.at(std::string(key)).get<T>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string(where) + "." + std::string(key) + ": " + e.what(), false);
    }
}

}  // namespace detail

inline json money_to_json(Money m) {
    if (m.is_whole()) return json(m.cents() / 100);
    return json(m.units());
}

inline Money money_from_json(const json& j) {
    if (j.is_number_integer()) return Money::whole(j.get<std::int64_t>());
    if (j.is_number()) return Money::from_units(j.get<double>());
    throw detail::SchemaError("expected a currency amount", false);
}

inline Family family_from_string(std::string_view s) {
    if (s == "bargaining") return Family::Bargaining;
    if (s == "negotiation") return Family::Negotiation;
    throw detail::SchemaError("unknown family '" + std::string(s) + "'", false);
}

inline Decision decision_from_string(std::string_view s) {
    if (s == "accept") return Decision::Accept;
    if (s == "reject") return Decision::Reject;
    if (s == "outside") return Decision::OutsideOption;
    throw detail::SchemaError("unknown decision '" + std::string(s) + "'", false);
}

inline OutcomeKind outcome_kind_from_string(std::string_view s) {
    for (auto k : {OutcomeKind::Accepted, OutcomeKind::Outside, OutcomeKind::NoAgreement,
                   OutcomeKind::Truncated, OutcomeKind::Aborted})
        if (to_string(k) == s) return k;
    throw detail::SchemaError("unknown outcome '" + std::string(s) + "'", false);
}

inline json to_json(const GameConfig& c) {
    json j;
    j["family"] = std::string(to_string(c.family));
    if (c.family == Family::Bargaining) {
        j["money_M"] = money_to_json(*c.money_M);
        j["delta_1"] = *c.delta_1;
        j["delta_2"] = *c.delta_2;
    } else {
        j["price_order_S"] = money_to_json(*c.price_order_S);
        j["sv"] = *c.sv;
        j["bv"] = *c.bv;
    }
    j["max_rounds"] = c.max_rounds ? json(*c.max_rounds) : json(nullptr);
    j["complete_info"] = c.complete_info;
    j["messages_allowed"] = c.messages_allowed;
    j["sim_round_cap"] = c.sim_round_cap;
    return j;
}

inline GameConfig config_from_json(const json& j) {
    using detail::get_as;
    if (!j.is_object() || !j.contains("family")) throw detail::SchemaError("config: missing field 'family'", false);
    GameConfig c;
    c.family = family_from_string(get_as<std::string>(j, "family", "config"));
    if (c.family == Family::Bargaining) {
        detail::expect_keys(j, "config", {"family", "money_M", "delta_1", "delta_2", "max_rounds", "complete_info", "messages_allowed"}, {"sim_round_cap"});
        c.money_M = money_from_json(j.at("money_M"));
        c.delta_1 = get_as<double>(j, "delta_1", "config");
        c.delta_2 = get_as<double>(j, "delta_2", "config");
    } else {
        detail::expect_keys(j, "config", {"family", "price_order_S", "sv", "bv", "max_rounds", "complete_info", "messages_allowed"}, {"sim_round_cap"});
        c.price_order_S = money_from_json(j.at("price_order_S"));
        c.sv = get_as<double>(j, "sv", "config");
        c.bv = get_as<double>(j, "bv", "config");
    }
    if (!j.at("max_rounds").is_null()) c.max_rounds = get_as<int>(j, "max_rounds", "config");
    c.complete_info = get_as<bool>(j, "complete_info", "config");
    c.messages_allowed = get_as<bool>(j, "messages_allowed", "config");
    if (j.contains("sim_round_cap")) c.sim_round_cap = get_as<int>(j, "sim_round_cap", "config");
    return c;
}

inline json to_json(const Offer& o) {
    if (const auto* s = std::get_if<Split>(&o))
        return json{{"proposer_gain", money_to_json(s->proposer_gain)},
                    {"responder_gain", money_to_json(s->responder_gain)}};
    return json{{"price", money_to_json(std::get<Price>(o).price)}};
}

inline Offer offer_from_json(const json& j, Family family) {
    if (family == Family::Bargaining) {
        detail::expect_keys(j, "offer", {"proposer_gain", "responder_gain"});
        return Split{money_from_json(j.at("proposer_gain")), money_from_json(j.at("responder_gain"))};
    }
    detail::expect_keys(j, "offer", {"price"});
    return Price{money_from_json(j.at("price"))};
}

inline json to_json(const RoundRecord& r) {
    return json{{"round", r.round},
                {"proposer_id", r.proposer_id},
                {"responder_id", r.responder_id},
                {"offer", to_json(r.offer)},
                {"proposer_message", r.proposer_message},
                {"decision", std::string(to_string(r.decision))},
                {"responder_message", r.responder_message}};
}

inline RoundRecord round_from_json(const json& j, Family family) {
    using detail::get_as;
    detail::expect_keys(j, "round", {"round", "proposer_id", "responder_id", "offer", "proposer_message", "decision", "responder_message"});
    RoundRecord r;
    r.round = get_as<int>(j, "round", "round");
    r.proposer_id = get_as<std::string>(j, "proposer_id", "round");
    r.responder_id = get_as<std::string>(j, "responder_id", "round");
    r.offer = offer_from_json(j.at("offer"), family);
    r.proposer_message = get_as<std::string>(j, "proposer_message", "round");
    r.decision = decision_from_string(get_as<std::string>(j, "decision", "round"));
    r.responder_message = get_as<std::string>(j, "responder_message", "round");
    return r;
}

inline json to_json(const GameLog& log) {
    json rounds = json::array();
    for (const auto& r : log.rounds) rounds.push_back(to_json(r));
    json outcome{{"kind", std::string(to_string(log.outcome.kind))}, {"round", log.outcome.round}};
    if (log.outcome.kind == OutcomeKind::Aborted) outcome["diagnostic"] = log.outcome.diagnostic;
    return json{{"seed", log.seed},
                {"config", to_json(log.config)},
                {"players", json::array({log.player_1_id, log.player_2_id})},
                {"rounds", std::move(rounds)},
                {"outcome", std::move(outcome)},
                {"payoffs", json::array({money_to_json(log.payoffs.first), money_to_json(log.payoffs.second)})}};
}

inline GameLog log_from_json(const json& j) {
    using detail::get_as;
    detail::expect_keys(j, "log", {"seed", "config", "players", "rounds", "outcome", "payoffs"});
    GameLog log;
    log.seed = get_as<std::uint64_t>(j, "seed", "log");
    log.config = config_from_json(j.at("config"));
    const auto& players = j.at("players");
    if (!players.is_array() || players.size() != 2) throw detail::SchemaError("log.players: expected two ids", false);
    log.player_1_id = players[0].get<std::string>();
    log.player_2_id = players[1].get<std::string>();
    if (!j.at("rounds").is_array()) throw detail::SchemaError("log.rounds: expected an array", false);
    for (const auto& r : j.at("rounds")) log.rounds.push_back(round_from_json(r, log.config.family));
    const auto& o = j.at("outcome");
    detail::expect_keys(o, "outcome", {"kind", "round"}, {"diagnostic"});
    log.outcome.kind = outcome_kind_from_string(get_as<std::string>(o, "kind", "outcome"));
    log.outcome.round = get_as<int>(o, "round", "outcome");
    if (o.contains("diagnostic")) log.outcome.diagnostic = get_as<std::string>(o, "diagnostic", "outcome");
    const auto& p = j.at("payoffs");
    if (!p.is_array() || p.size() != 2) throw detail::SchemaError("log.payoffs: expected two amounts", false);
    log.payoffs = {money_from_json(p[0]), money_from_json(p[1])};
    return log;
}

inline json to_json(const ConfigView& c) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json j;
    j["family"] = std::string(to_string(c.family));
    if (c.family == Family::Bargaining) {
        j["money_M"] = money_to_json(*c.money_M);
        j["delta_1"] = opt(c.delta_1);
        j["delta_2"] = opt(c.delta_2);
    } else {
        j["price_order_S"] = money_to_json(*c.price_order_S);
        j["sv"] = opt(c.sv);
        j["bv"] = opt(c.bv);
    }
    j["max_rounds"] = c.max_rounds ? json(*c.max_rounds) : json(nullptr);
    j["complete_info"] = c.complete_info;
    j["messages_allowed"] = c.messages_allowed;
    return j;
}

inline ConfigView config_view_from_json(const json& j) {
    using detail::get_as;
    auto opt = [&](const char* k) -> std::optional<double> {
        if (j.at(k).is_null()) return std::nullopt;
        return get_as<double>(j, k, "view.config");
    };
    ConfigView c;
    c.family = family_from_string(get_as<std::string>(j, "family", "view.config"));
    if (c.family == Family::Bargaining) {
        detail::expect_keys(j, "view.config", {"family", "money_M", "delta_1", "delta_2", "max_rounds", "complete_info", "messages_allowed"});
        c.money_M = money_from_json(j.at("money_M"));
        c.delta_1 = opt("delta_1");
        c.delta_2 = opt("delta_2");
    } else {
        detail::expect_keys(j, "view.config", {"family", "price_order_S", "sv", "bv", "max_rounds", "complete_info", "messages_allowed"});
        c.price_order_S = money_from_json(j.at("price_order_S"));
        c.sv = opt("sv");
        c.bv = opt("bv");
    }
    if (!j.at("max_rounds").is_null()) c.max_rounds = get_as<int>(j, "max_rounds", "view.config");
    c.complete_info = get_as<bool>(j, "complete_info", "view.config");
    c.messages_allowed = get_as<bool>(j, "messages_allowed", "view.config");
    return c;
}

inline json to_json(const PublicView& v) {
    json history = json::array();
    for (const auto& r : v.history) history.push_back(to_json(r));
    return json{{"config", to_json(v.config)},
                {"players", json::array({v.player_1_id, v.player_2_id})},
                {"round", v.round},
                {"proposer_id", v.proposer_id},
                {"responder_id", v.responder_id},
                {"history", std::move(history)},
                {"current_offer", v.current_offer ? to_json(*v.current_offer) : json(nullptr)},
                {"current_message", v.current_message}};
}

inline PublicView view_from_json(const json& j) {
    using detail::get_as;
    detail::expect_keys(j, "view", {"config", "players", "round", "proposer_id", "responder_id", "history", "current_offer", "current_message"});
    PublicView v;
    v.config = config_view_from_json(j.at("config"));
    v.player_1_id = j.at("players").at(0).get<std::string>();
    v.player_2_id = j.at("players").at(1).get<std::string>();
    v.round = get_as<int>(j, "round", "view");
    v.proposer_id = get_as<std::string>(j, "proposer_id", "view");
    v.responder_id = get_as<std::string>(j, "responder_id", "view");
    for (const auto& r : j.at("history")) v.history.push_back(round_from_json(r, v.config.family));
    if (!j.at("current_offer").is_null()) v.current_offer = offer_from_json(j.at("current_offer"), v.config.family);
    v.current_message = get_as<std::string>(j, "current_message", "view");
    return v;
}

/// Decodes and validates one log line. `line` is used only for error reporting.
inline GameLog parse_log_line(std::string_view text, std::size_t line) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(line, std::string("malformed JSON: ") + e.what());
    }
    GameLog log;
    try {
        log = log_from_json(j);
    } catch (const detail::SchemaError& e) {
        if (e.unknown) throw VersionError(line, e.what());
        throw ParseError(line, e.what());
    } catch (const json::exception& e) {
        throw ParseError(line, e.what());
    }
    try {
        validate_log(log);
    } catch (const ValidationError& e) {
        throw ValidationError("line " + std::to_string(line) + ": " + e.what());
    }
    return log;
}

inline std::string serialize_log(const GameLog& log) { return to_json(log).dump(); }

inline void save_logs(std::span<const GameLog> logs, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    for (const auto& log : logs) out << serialize_log(log) << '\n';
    if (!out) throw Error("write failed: " + path.string());
}

inline std::vector<GameLog> load_logs(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<GameLog> logs;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        logs.push_back(parse_log_line(text, line));
    }
    return logs;
}

}  // namespace counterpart
