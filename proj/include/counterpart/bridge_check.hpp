#pragma once

// Conformance checks for endpoints that speak the encoder, predictor or
// agent wire protocols.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "counterpart/errors.hpp"
#include "counterpart/external_agent.hpp"
#include "counterpart/features.hpp"
#include "counterpart/game.hpp"
#include "counterpart/predictor.hpp"
#include "counterpart/text_encoder.hpp"

namespace counterpart {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

inline CheckResult run_check(const std::string& name, const std::function<std::string()>& body) {
    try {
        return {name, true, body()};
    } catch (const std::exception& e) {
        return {name, false, e.what()};
    }
}

inline void require(bool ok, const std::string& why) {
    if (!ok) throw Error(why);
}

inline bool close_enough(const std::vector<double>& a, const std::vector<double>& b, double rel_tol) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
        if (std::abs(a[i] - b[i]) > rel_tol * scale) return false;
    }
    return true;
}

/// A short bargaining game used to build realistic prompts and views.
inline GameLog sample_game() {
    GameState s = new_game(GameConfig::bargaining(Money::whole(100), 0.9, 0.8, 12, true, true), "alice", "bob", 1);
    s = apply_proposal(s, Split{Money::whole(70), Money::whole(30)}, "I propose 70 for me.");
    auto next = apply_response(s, Decision::Reject, "Too low for me.");
    s = std::get<GameState>(next);
    s = apply_proposal(s, Split{Money::whole(55), Money::whole(45)}, "How about 55?");
    return std::get<GameLog>(apply_response(s, Decision::Accept, "Deal."));
}

}  // namespace detail

inline std::vector<CheckResult> check_encoder(const Endpoint& endpoint, double rel_tol = 1e-5) {
    std::vector<CheckResult> out;
    TextEncoder enc(EncoderEndpoint::external(endpoint));
    const std::vector<std::string> batch{"take it", "no thanks, I want more", "Round 3"};

    out.push_back(detail::run_check("encoder.handshake", [&] {
        const auto e = enc.encode(TextKind::Dialogue, std::vector<std::string>{"hello"});
        return "dimension " + std::to_string(e.vectors.at(0).size());
    }));
    if (!out.back().passed) return out;

    out.push_back(detail::run_check("encoder.shape", [&] {
        const auto a = enc.encode(TextKind::Dialogue, batch);
        const auto b = enc.encode(TextKind::Dialogue, std::vector<std::string>{"", "x"});
        detail::require(a.vectors.size() == batch.size() && b.vectors.size() == 2, "vector count does not match the batch");
        return std::to_string(a.vectors.size() + b.vectors.size()) + " vectors of length " + std::to_string(enc.dimension());
    }));

    out.push_back(detail::run_check("encoder.order", [&] {
        const auto a = enc.encode(TextKind::Dialogue, batch);
        const std::vector<std::string> rotated{batch[2], batch[0], batch[1]};
        const auto b = enc.encode(TextKind::Dialogue, rotated);
        detail::require(detail::close_enough(a.vectors[0], b.vectors[1], rel_tol) && detail::close_enough(a.vectors[1], b.vectors[2], rel_tol) &&
                            detail::close_enough(a.vectors[2], b.vectors[0], rel_tol),
                        "outputs do not follow input order");
        return std::string("outputs follow input order");
    }));

    out.push_back(detail::run_check("encoder.determinism", [&] {
        const auto a = enc.encode(TextKind::Dialogue, batch);
        const auto b = enc.encode(TextKind::Dialogue, batch);
        bool bitwise = true;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (!detail::close_enough(a.vectors[i], b.vectors[i], rel_tol))
                throw Error("repeat differs beyond tolerance at batch item " + std::to_string(i) + " (\"" + batch[i] + "\")");
            bitwise = bitwise && a.vectors[i] == b.vectors[i];
        }
        return std::string(bitwise ? "bitwise identical" : "identical within tolerance");
    }));

    out.push_back(detail::run_check("encoder.observer", [&] {
        const GameLog log = detail::sample_game();
        const std::vector<std::string> prompts{build_observer_prompt({&log, Task::Response, 2, "alice"}),
                                               build_observer_prompt({&log, Task::Proposal, 2, "bob"})};
        const auto e = enc.encode(TextKind::Observer, prompts);
        detail::require(e.vectors.size() == prompts.size(), "vector count does not match the batch");
        if (!e.logits) return std::string("no logits returned");
        for (double p : *e.logits) detail::require(p >= 0.0 && p <= 1.0, "logit outside [0,1]: " + std::to_string(p));
        return std::string("logits are probabilities");
    }));
    return out;
}

inline std::vector<CheckResult> check_predictor(const Endpoint& endpoint, double rel_tol = 1e-5) {
    std::vector<CheckResult> out;
    TrainSet clf;
    clf.task = TaskKind::Classification;
    clf.X = Matrix::from_rows({{0.1, 1.0}, {0.2, kNaN}, {0.8, 0.0}, {0.9, 0.5}});
    clf.y = {0, 0, 1, 1};
    const Matrix test = Matrix::from_rows({{0.15, 0.5}, {0.85, kNaN}, {0.5, 0.5}});

    out.push_back(detail::run_check("predictor.classification", [&] {
        const auto p = external_predict(endpoint, clf, test);
        for (double x : p) detail::require(x >= 0.0 && x <= 1.0, "score outside [0,1]: " + std::to_string(x));
        return std::to_string(p.size()) + " scores in [0,1]";
    }));
    out.push_back(detail::run_check("predictor.regression", [&] {
        TrainSet reg = clf;
        reg.task = TaskKind::Regression;
        reg.y = {0.2, 0.3, 0.7, 0.75};
        const auto p = external_predict(endpoint, reg, test);
        return std::to_string(p.size()) + " finite values";
    }));
    out.push_back(detail::run_check("predictor.determinism", [&] {
        const auto a = external_predict(endpoint, clf, test);
        const auto b = external_predict(endpoint, clf, test);
        detail::require(detail::close_enough(a, b, rel_tol), "repeated request gave different predictions");
        return std::string(a == b ? "bitwise identical" : "identical within tolerance");
    }));
    return out;
}

inline std::vector<CheckResult> check_agent(const Endpoint& endpoint) {
    std::vector<CheckResult> out;
    const GameConfig bcfg = GameConfig::bargaining(Money::whole(100), 0.9, 0.8, 12, true, true);
    const GameConfig ncfg = GameConfig::negotiation(Money::whole(10'000), 1.0, 1.2, 10, true, true);
    out.push_back(detail::run_check("agent.propose", [&] {
        const GameState s = new_game(bcfg, "candidate", "other", 1);
        external_agent_act(endpoint, "candidate", public_view(s), Turn::Propose, {0.9});
        return std::string("legal bargaining proposal");
    }));
    out.push_back(detail::run_check("agent.respond", [&] {
        GameState s = new_game(ncfg, "other", "candidate", 1);
        s = apply_proposal(s, Price{Money::whole(11'000)}, "");
        external_agent_act(endpoint, "candidate", public_view(s), Turn::Respond, {1.2});
        return std::string("legal negotiation response");
    }));
    return out;
}

}  // namespace counterpart
