#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "counterpart/evaluation.hpp"
#include "counterpart/plan.hpp"
#include "oracles/generators.hpp"

using namespace counterpart;

namespace {

struct SmokeWorld {
    Corpus source, target;
    TextEncoder dialogue{EncoderEndpoint::parse("builtin")};
    TextEncoder observer{EncoderEndpoint::parse("builtin:32")};
    std::optional<EmbeddingStore> sd, td, so, to;
    EvaluationData data;

    SmokeWorld() {
        const auto plan = plan_from_json(resolve_plan_json(nlohmann::json{{"preset", "smoke"}}));
        auto sim = run_simulation(plan, 1);
        source = Corpus(std::move(sim.source_logs));
        target = Corpus(std::move(sim.target_logs));
        sd.emplace(source, dialogue, TextKind::Dialogue);
        td.emplace(target, dialogue, TextKind::Dialogue);
        so.emplace(source, observer, TextKind::Observer);
        to.emplace(target, observer, TextKind::Observer);
        data.source = &source;
        data.target = &target;
        data.source_roster = source.deciders();
        data.source_dialogue = &*sd;
        data.target_dialogue = &*td;
        data.source_observer = &*so;
        data.target_observer = &*to;
    }
};

SmokeWorld& world() {
    static SmokeWorld w;
    return w;
}

ProtocolConfig small_protocol() {
    ProtocolConfig p;
    p.k_grid = {0, 4};
    p.seeds = {0, 1};
    p.source_cap = 200;
    p.test_cap = 60;
    p.min_proposals = 5;
    p.min_label_sd = 0.0;
    return p;
}

}  // namespace

TEST(Split, DisjointAndSized) {
    Rng rng(1);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng.below(40);
        std::vector<std::uint64_t> games;
        for (std::size_t i = 0; i < n; ++i) games.push_back(rng.below(1000));
        std::set<std::uint64_t> uniq(games.begin(), games.end());
        const int K = static_cast<int>(rng.below(uniq.size() + 2));
        if (static_cast<std::size_t>(K) >= uniq.size()) {
            EXPECT_THROW(split_games(games, K, rng), StateError);
            continue;
        }
        const GameSplit s = split_games(games, K, rng);
        EXPECT_EQ(s.adaptation.size(), static_cast<std::size_t>(K));
        EXPECT_EQ(s.adaptation.size() + s.test.size(), uniq.size());
        EXPECT_TRUE(std::is_sorted(s.adaptation.begin(), s.adaptation.end()));
        EXPECT_TRUE(std::is_sorted(s.test.begin(), s.test.end()));
        std::vector<std::uint64_t> both;
        std::set_intersection(s.adaptation.begin(), s.adaptation.end(), s.test.begin(), s.test.end(), std::back_inserter(both));
        EXPECT_TRUE(both.empty());
    }
}

TEST(Split, SameSeedSameSplit) {
    std::vector<std::uint64_t> games(30);
    std::iota(games.begin(), games.end(), std::uint64_t{100});
    Rng a(5), b(5);
    EXPECT_EQ(split_games(games, 8, a).adaptation, split_games(games, 8, b).adaptation);
}

TEST(QuotaProperty, BalancedAtTheCap) {
    Rng rng(2);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<std::size_t> avail(1 + rng.below(12));
        std::size_t total = 0;
        for (auto& a : avail) total += (a = rng.below(200));
        const std::size_t cap = 1 + rng.below(800);
        const auto q = balanced_quotas(avail, cap, rng);
        ASSERT_EQ(q.size(), avail.size());
        EXPECT_EQ(std::accumulate(q.begin(), q.end(), std::size_t{0}), std::min(total, cap));
        std::size_t lo_capped = SIZE_MAX, hi = 0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            EXPECT_LE(q[i], avail[i]);
            hi = std::max(hi, q[i]);
            if (q[i] < avail[i]) lo_capped = std::min(lo_capped, q[i]);
        }
        // An agent cut short is never more than one row below anyone else.
        if (lo_capped != SIZE_MAX) {
            EXPECT_LE(hi, lo_capped + 1);
        }
    }
}

TEST(QuotaProperty, SampledRowsComeFromTheirAgents) {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::vector<std::size_t>> by_agent(1 + rng.below(6));
        std::size_t next = 0;
        for (auto& v : by_agent)
            for (std::uint64_t i = 0, n = rng.below(50); i < n; ++i) v.push_back(next++);
        const std::size_t cap = 1 + rng.below(150);
        const auto s = sample_source_rows(by_agent, cap, rng);
        EXPECT_TRUE(std::is_sorted(s.rows.begin(), s.rows.end()));
        EXPECT_EQ(std::set<std::size_t>(s.rows.begin(), s.rows.end()).size(), s.rows.size());
        for (std::size_t a = 0; a < by_agent.size(); ++a) {
            std::size_t mine = 0;
            for (std::size_t r : s.rows) mine += std::count(by_agent[a].begin(), by_agent[a].end(), r);
            EXPECT_EQ(mine, s.quotas[a]);
        }
    }
}

TEST(Cohort, CountAndSpread) {
    std::vector<double> labels(30, 0.5);
    EXPECT_FALSE(cohort_filter_proposal(labels));
    for (std::size_t i = 0; i < labels.size(); i += 2) labels[i] = 0.56;
    // Population sd is 0.03.
    EXPECT_TRUE(cohort_filter_proposal(labels));
    labels.pop_back();
    EXPECT_FALSE(cohort_filter_proposal(labels));
    EXPECT_TRUE(cohort_filter_proposal(labels, 29));
}

TEST(Stacks, ParseAndAblationSet) {
    EXPECT_EQ(FeatureStack::parse("G+T+O+I"), FeatureStack::parse("GTOI"));
    EXPECT_EQ(FeatureStack::parse("G,I").to_string(), "G+I");
    EXPECT_EQ(FeatureStack::parse("IG").to_string(), "G+I");
    EXPECT_THROW(FeatureStack::parse("GX"), ConfigError);
    EXPECT_THROW(FeatureStack::parse("+,"), ConfigError);
    const auto ab = ablation_stacks();
    ASSERT_EQ(ab.size(), 9u);
    std::set<std::string> blocks;
    for (const auto& ns : ab) blocks.insert(ns.stack.to_string());
    EXPECT_EQ(blocks.size(), 9u);
    EXPECT_EQ(ab.front().stack.to_string(), "G+T+O+I");
    EXPECT_EQ(ab.back().stack.to_string(), "I");
}

TEST(Stacks, ObserverBlockRequiresEncoder) {
    FeatureBlocks b;
    b.game = Matrix(2, 1);
    b.text = Matrix(2, 1);
    b.identity = Matrix(2, 1);
    EXPECT_THROW(select_feature_stack(b, FeatureStack::parse("GO")), ConfigError);
    EXPECT_THROW(select_feature_stack(b, FeatureStack::parse("L")), ConfigError);
    EXPECT_EQ(select_feature_stack(b, FeatureStack::parse("GTI")).cols(), 3u);
}

TEST(Protocol, JsonRoundTripAndErrors) {
    const ProtocolConfig q = protocol_preset("quick");
    EXPECT_EQ(q.k_grid, (std::vector<int>{0, 16}));
    const ProtocolConfig back = protocol_from_json(to_json(q));
    EXPECT_EQ(back.k_grid, q.k_grid);
    EXPECT_EQ(back.seeds, q.seeds);
    EXPECT_EQ(protocol_from_json(nlohmann::json{{"preset", "quick"}, {"test_cap", 7}}).test_cap, 7u);
    EXPECT_THROW(protocol_preset("slow"), ConfigError);
    EXPECT_THROW(protocol_from_json(nlohmann::json{{"colour", 1}}), ConfigError);
    EXPECT_THROW(protocol_from_json(nlohmann::json{{"k_grid", nlohmann::json::array()}}), ConfigError);
    EXPECT_THROW(protocol_from_json(nlohmann::json{{"k_grid", {-1}}}), ConfigError);
    EXPECT_THROW(protocol_from_json(nlohmann::json{{"source_cap", 0}}), ConfigError);
    EXPECT_THROW(protocol_from_json(nlohmann::json{{"seeds", "x"}}), ConfigError);
    EXPECT_THROW(protocol_from_json(nlohmann::json::array()), ConfigError);
}

TEST(Leakage, FitRowsMustComeFromTraining) {
    using detail::PoolRow;
    const std::vector<PoolRow> train{{false, 0}, {false, 1}, {true, 4}};
    const std::vector<PoolRow> test{{true, 5}, {true, 6}};
    EXPECT_NO_THROW(detail::assert_fit_on_training(train, train, test));
    const std::vector<PoolRow> leak{{false, 0}, {true, 5}};
    EXPECT_THROW(detail::assert_fit_on_training(leak, train, test), LeakageError);
    const std::vector<PoolRow> stranger{{true, 9}};
    EXPECT_THROW(detail::assert_fit_on_training(stranger, train, test), LeakageError);
}

TEST(Aggregate, MeanForResponseMedianForProposal) {
    auto cell = [](Task task, int K, CellStatus st, std::optional<double> m) {
        CellResult r;
        r.cell.task = task;
        r.cell.K = K;
        r.cell.stack_name = "G+I";
        r.status = st;
        r.metric = m;
        return r;
    };
    const std::vector<CellResult> rs{cell(Task::Response, 0, CellStatus::Ok, 0.6), cell(Task::Response, 0, CellStatus::Ok, 0.8),
                                     cell(Task::Response, 0, CellStatus::Undefined, std::nullopt),
                                     cell(Task::Proposal, 0, CellStatus::Ok, -3.0), cell(Task::Proposal, 0, CellStatus::Ok, 0.2),
                                     cell(Task::Proposal, 0, CellStatus::Ok, 0.4), cell(Task::Proposal, 2, CellStatus::Failed, std::nullopt)};
    const auto e = aggregate(rs);
    ASSERT_EQ(e.size(), 3u);
    EXPECT_NEAR(*e[0].central, 0.7, 1e-12);
    EXPECT_NEAR(e[0].se, std::sqrt(0.02) / std::sqrt(2.0), 1e-12);
    EXPECT_EQ(e[0].n, 2u);
    EXPECT_EQ(e[0].undefined, 1u);
    EXPECT_EQ(e[1].kind, Aggregation::Median);
    EXPECT_DOUBLE_EQ(*e[1].central, 0.2);
    EXPECT_FALSE(e[2].central);
    EXPECT_EQ(e[2].failed, 1u);
    const std::string csv = report_csv(e);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "family,task,stack,K,aggregation,central,se,n,undefined,failed,skipped");
    EXPECT_NE(csv.find("bargaining,response,G+I,0,mean,0.700000,0.100000,2,1,0,0"), std::string::npos) << csv;
    EXPECT_NE(csv.find(",2,median,,,0,0,1,0"), std::string::npos) << csv;
    EXPECT_NE(report_text(e).find("cells excluded: 1 undefined, 0 failed, 0 skipped"), std::string::npos);
}

TEST(DollarError, InverseNormalizesBothSides) {
    CellResult r;
    r.cell.task = Task::Proposal;
    r.cell.family = Family::Negotiation;
    r.cell.stack_name = "G";
    r.status = CellStatus::Ok;
    r.predictions = {1.0, 1.1, 0.9};
    r.labels = {1.0, 1.0, 1.0};
    r.scales = {Money::whole(1000), Money::whole(1000), Money::whole(1000)};
    const auto d = dollar_error_report({r});
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].rows, 3u);
    EXPECT_NEAR(*d[0].median_abs_error, 100.0, 1e-9);
    r.cell.family = Family::Bargaining;
    r.predictions = {0.5, 0.25, 0.75};
    r.labels = {0.5, 0.5, 0.5};
    EXPECT_NEAR(*dollar_error_report({r})[0].median_abs_error, 250.0, 1e-9);
}

TEST(Sweep, CellInvariantsOnSmokeLogs) {
    auto& w = world();
    SweepSpec spec;
    spec.protocol = small_protocol();
    spec.stacks = {{"G+T+I", FeatureStack::parse("GTI")}};
    const auto out = run_sweep(w.data, spec, PredictorEndpoint::parse("knn"));
    ASSERT_FALSE(out.results.empty());
    std::size_t ok = 0;
    for (const auto& r : out.results) {
        EXPECT_NE(r.status, CellStatus::Failed) << r.reason;
        if (r.status == CellStatus::Skipped) continue;
        EXPECT_TRUE(r.diag.splits_disjoint);
        EXPECT_TRUE(r.diag.identity_ok);
        EXPECT_EQ(r.diag.adaptation_games.size(), static_cast<std::size_t>(r.cell.K));
        EXPECT_LE(r.diag.source_rows, spec.protocol.source_cap);
        EXPECT_LE(r.diag.test_rows, spec.protocol.test_cap);
        EXPECT_EQ(r.diag.test_rows, std::min(r.diag.test_rows_before_cap, spec.protocol.test_cap));
        EXPECT_EQ(r.diag.pca_fits, 1u);
        EXPECT_EQ(r.diag.width, game_feature_names(r.cell.family).size() + spec.protocol.text_pca_dims + w.data.source_roster.size() + 1);
        EXPECT_EQ(r.predictions.size(), r.diag.test_rows);
        if (r.cell.K == 0) {
            EXPECT_EQ(r.diag.target_train_rows, 0u);
        }
        if (r.status == CellStatus::Ok) {
            ++ok;
            EXPECT_GE(*r.metric, r.cell.task == Task::Response ? 0.0 : -1e300);
            if (r.cell.task == Task::Response) {
                EXPECT_LE(*r.metric, 1.0);
            }
        }
    }
    EXPECT_GT(ok, 0u);
    for (const auto& c : out.cohort) EXPECT_EQ(c.included, c.proposals >= spec.protocol.min_proposals);
}

TEST(Sweep, WorkerCountDoesNotChangeResults) {
    auto& w = world();
    SweepSpec spec;
    spec.protocol = small_protocol();
    spec.stacks = {{"G+O+I", FeatureStack::parse("GOI")}, {"G", FeatureStack::parse("G")}};
    spec.families = {Family::Bargaining};
    const auto a = run_sweep(w.data, spec, PredictorEndpoint::parse("knn"), 1);
    const auto b = run_sweep(w.data, spec, PredictorEndpoint::parse("knn"), 3);
    ASSERT_EQ(a.results.size(), b.results.size());
    for (std::size_t i = 0; i < a.results.size(); ++i) {
        EXPECT_EQ(cell_to_json(a.results[i], true), cell_to_json(b.results[i], true)) << i;
    }
}

TEST(Sweep, IdentityOnlyAtZeroShotIsChance) {
    auto& w = world();
    SweepSpec spec;
    spec.protocol = small_protocol();
    spec.protocol.k_grid = {0};
    spec.tasks = {Task::Response};
    spec.stacks = {{"I", FeatureStack::parse("I")}};
    const auto out = run_sweep(w.data, spec, PredictorEndpoint::parse("knn"));
    std::size_t ok = 0;
    for (const auto& r : out.results) {
        if (r.status != CellStatus::Ok) continue;
        ++ok;
        // Every test row carries the same unseen-target indicator.
        EXPECT_DOUBLE_EQ(*r.metric, 0.5);
    }
    EXPECT_GT(ok, 0u);
}

TEST(Sweep, TargetsFilterAndEmptyCohortIsAConfigError) {
    auto& w = world();
    SweepSpec spec;
    spec.protocol = small_protocol();
    spec.protocol.k_grid = {0};
    spec.protocol.seeds = {0};
    spec.tasks = {Task::Response};
    spec.stacks = {{"G", FeatureStack::parse("G")}};
    const auto who = w.target.deciders(Family::Bargaining);
    spec.targets = {who.front(), "nobody"};
    spec.families = {Family::Bargaining};
    const auto cells = enumerate_cells(w.target, spec, nullptr);
    ASSERT_EQ(cells.size(), 1u);
    EXPECT_EQ(cells[0].target, who.front());

    spec.tasks = {Task::Proposal};
    spec.protocol.min_proposals = 1'000'000;
    try {
        enumerate_cells(w.target, spec, nullptr);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("empty proposal cohort"), std::string::npos) << e.what();
    }
}

TEST(Sweep, ObserverStackWithoutEncoderIsRejected) {
    auto& w = world();
    EvaluationData d = w.data;
    d.source_observer = d.target_observer = nullptr;
    SweepSpec spec;
    spec.protocol = small_protocol();
    spec.stacks = {{"O", FeatureStack::parse("O")}};
    EXPECT_THROW(run_sweep(d, spec, PredictorEndpoint::parse("knn")), ConfigError);
}

TEST(Sweep, TooFewGamesSkipsTheCell) {
    auto& w = world();
    EvaluationCell c{w.target.deciders(Family::Bargaining).front(), 100000, 0, Task::Response, Family::Bargaining, "G",
                     FeatureStack::parse("G")};
    const auto r = run_cell(c, w.data, small_protocol(), PredictorEndpoint::parse("knn"));
    EXPECT_EQ(r.status, CellStatus::Skipped);
    EXPECT_NE(r.reason.find("K=100000"), std::string::npos) << r.reason;
}
