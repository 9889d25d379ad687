// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "counterpart/evaluation.hpp"
#include "counterpart/features.hpp"
#include "counterpart/metrics.hpp"
#include "counterpart/plan.hpp"
#include "counterpart/tournament.hpp"
#include "oracles/feature_oracle.hpp"
#include "oracles/generators.hpp"
#include "oracles/metric_oracles.hpp"

using namespace counterpart;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool ok = true;
    std::string detail;
};

bool same_cell(double a, double b) {
    if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
    return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b));
}

std::string fmt(double x, int digits = 3) { return format_fixed(x, digits); }

int shell(const std::string& cmd, std::string* out = nullptr) {
    FILE* pipe = ::popen((cmd + " 2>&1").c_str(), "r");
    if (!pipe) return -1;
    char buf[4096];
    std::string text;
    while (std::fgets(buf, sizeof buf, pipe)) text += buf;
    const int st = ::pclose(pipe);
    if (out) *out = text;
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// ---------------------------------------------------------------- desk sweeps

struct World {
    Corpus source, target;
    TextEncoder encoder{EncoderEndpoint::parse("builtin")};
    std::optional<EmbeddingStore> sd, td;
    EvaluationData data;

    explicit World(const std::string& preset) {
        auto sim = run_simulation(plan_from_json(resolve_plan_json(nlohmann::json{{"preset", preset}})), 1);
        source = Corpus(std::move(sim.source_logs));
        target = Corpus(std::move(sim.target_logs));
        sd.emplace(source, encoder, TextKind::Dialogue);
        td.emplace(target, encoder, TextKind::Dialogue);
        data.source = &source;
        data.target = &target;
        data.source_roster = source.deciders();
        data.source_dialogue = &*sd;
        data.target_dialogue = &*td;
    }

    std::vector<CellResult> sweep(Family family, Task task, std::vector<NamedStack> stacks, std::vector<int> k_grid) {
        SweepSpec spec;
        spec.families = {family};
        spec.tasks = {task};
        spec.stacks = std::move(stacks);
        spec.protocol.k_grid = std::move(k_grid);
        return run_sweep(data, spec, PredictorEndpoint::parse("knn")).results;
    }
};

World& desk() {
    static World w("desk");
    return w;
}

NamedStack named(const std::string& s) { return {s, FeatureStack::parse(s)}; }

/// metric by (stack, K, target, seed) for the Ok cells.
using Table = std::map<std::tuple<std::string, int, std::string, int>, double>;

Table tabulate(const std::vector<CellResult>& rs) {
    Table t;
    for (const auto& r : rs)
        if (r.status == CellStatus::Ok) t[{r.cell.stack_name, r.cell.K, r.cell.target, r.cell.seed}] = *r.metric;
    return t;
}

/// Differences a - b over the (target, seed) pairs defined in both.
std::vector<double> paired(const Table& t, const std::string& sa, int ka, const std::string& sb, int kb) {
    std::vector<double> d;
    for (const auto& [key, v] : t) {
        const auto& [s, k, target, seed] = key;
        if (s != sa || k != ka) continue;
        if (const auto it = t.find({sb, kb, target, seed}); it != t.end()) d.push_back(v - it->second);
    }
    return d;
}

double mean_of(const Table& t, const std::string& s, int k) {
    std::vector<double> v;
    for (const auto& [key, x] : t)
        if (std::get<0>(key) == s && std::get<1>(key) == k) v.push_back(x);
    return v.empty() ? kNaN : mean(v);
}

// ---------------------------------------------------------------- criteria

Verdict grid_counts() {
    const auto b = enumerate_configs(ConfigGrid::glee_bargaining()).size();
    const auto n = enumerate_configs(ConfigGrid::glee_negotiation()).size();
    return {b == 384 && n == 576, std::to_string(b) + " bargaining, " + std::to_string(n) + " negotiation"};
}

Verdict schema_oracle() {
    Rng rng(101);
    std::size_t rows = 0;
    for (int g = 0; g < 200; ++g) {
        const GameConfig c = testing::random_config(rng);
        const GameLog log = testing::random_game(c, rng, 0.15);
        for (const Task task : {Task::Response, Task::Proposal})
            for (const auto& dp : extract_decision_points(log, task)) {
                const auto got = game_features(dp);
                const auto want = testing::oracle_features(log, dp.round, task == Task::Response);
                const std::size_t width = c.family == Family::Bargaining ? 24 : 25;
                if (got.size() != width || want.size() != width)
                    return {false, "game " + std::to_string(g) + ": width " + std::to_string(got.size())};
                for (std::size_t i = 0; i < width; ++i)
                    if (!same_cell(got[i], want[i]))
                        return {false, "game " + std::to_string(g) + " round " + std::to_string(dp.round) + " column " +
                                           testing::oracle_columns(c.family)[i]};
                ++rows;
            }
    }
    for (const Family f : {Family::Bargaining, Family::Negotiation})
        if (game_feature_names(f) != testing::oracle_columns(f)) return {false, "column names differ"};
    return {rows > 0, std::to_string(rows) + " rows from 200 games, widths 24/25"};
}

Verdict conservation() {
    Rng rng(102);
    std::size_t accepted = 0, outside = 0;
    for (int i = 0; i < 10'000; ++i) {
        const GameConfig c = testing::random_config(rng);
        const GameLog log = testing::random_game(c, rng);
        const std::string where = "game " + std::to_string(i);
        if (log.outcome.kind != OutcomeKind::Accepted) {
            if (log.payoffs != std::make_pair(Money{}, Money{})) return {false, where + ": nonzero payoff without agreement"};
            outside += log.outcome.kind == OutcomeKind::Outside;
            continue;
        }
        ++accepted;
        const RoundRecord& last = log.rounds.back();
        const bool p1 = last.proposer_id == log.player_1_id;
        double want1, want2;
        if (c.family == Family::Bargaining) {
            const auto& s = std::get<Split>(last.offer);
            if (!within_one_unit(s.proposer_gain + s.responder_gain, c.money())) return {false, where + ": shares do not sum to M"};
            const double e = last.round - 1;
            want1 = (p1 ? s.proposer_gain : s.responder_gain).units() * std::pow(*c.delta_1, e);
            want2 = (p1 ? s.responder_gain : s.proposer_gain).units() * std::pow(*c.delta_2, e);
        } else {
            const double p = std::get<Price>(last.offer).price.units(), S = c.price_order_S->units();
            want1 = p - *c.sv * S;
            want2 = *c.bv * S - p;
        }
        if (std::abs(log.payoffs.first.units() - want1) > 1.0 || std::abs(log.payoffs.second.units() - want2) > 1.0)
            return {false, where + ": payoff off by more than one unit"};
    }
    return {accepted > 0 && outside > 0,
            "10000 games, " + std::to_string(accepted) + " accepted, " + std::to_string(outside) + " outside options"};
}

Verdict normalization() {
    Rng rng(103);
    std::size_t n = 0;
    for (int g = 0; g < 1000; ++g) {
        const GameConfig c = testing::random_config(rng);
        const GameLog log = testing::random_game(c, rng);
        for (const auto& dp : extract_decision_points(log, Task::Proposal)) {
            if (!within_one_unit(inverse_normalize(label(dp), c), logged_amount(dp)))
                return {false, "game " + std::to_string(g) + " round " + std::to_string(dp.round)};
            ++n;
        }
    }
    return {n > 0, std::to_string(n) + " proposals"};
}

Verdict metric_oracles() {
    Rng rng(104);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + rng.below(60);
        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng.below(10)) / 10.0;
            y[i] = static_cast<double>(rng.below(2));
        }
        const auto a = auc(s, y), b = testing::pairwise_auc(s, y);
        if (a.has_value() != b.has_value() || (a && std::abs(*a - *b) > 1e-12)) return {false, "auc instance " + std::to_string(t)};
    }
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + rng.below(60);
        const auto p = testing::random_vector(rng, n, -2, 2), y = testing::random_vector(rng, n, -2, 2);
        const auto a = r_squared(p, y), b = testing::direct_r2(p, y);
        if (a.has_value() != b.has_value() || (a && std::abs(*a - *b) > 1e-12)) return {false, "r2 instance " + std::to_string(t)};
    }
    return {true, "100 AUC and 100 R2 instances"};
}

Verdict protocol_invariants() {
    World& w = desk();
    std::size_t cells = 0, ok = 0;
    std::string notes;
    for (const Family family : {Family::Bargaining, Family::Negotiation})
        for (const Task task : {Task::Response, Task::Proposal}) {
            std::vector<CellResult> rs;
            try {
                rs = w.sweep(family, task, {named("G+T+I")}, ProtocolConfig{}.k_grid);
            } catch (const ConfigError& e) {
                // Proposal cohorts may legitimately be empty; the sweep reports why.
                notes += std::string(", ") + std::string(to_string(family)) + " proposal cohort empty";
                continue;
            } catch (const LeakageError& e) {
                return {false, e.what()};
            }
            for (const auto& r : rs) {
                ++cells;
                const std::string where = r.cell.target + " " + std::string(to_string(family)) + "/" + std::string(to_string(task)) +
                                          " K=" + std::to_string(r.cell.K) + " seed " + std::to_string(r.cell.seed);
                if (r.status == CellStatus::Failed) return {false, where + ": " + r.reason};
                if (r.status == CellStatus::Skipped) continue;
                ok += r.status == CellStatus::Ok;
                const auto& d = r.diag;
                if (!d.splits_disjoint) return {false, where + ": adaptation and test games overlap"};
                if (!d.identity_ok) return {false, where + ": identity columns wrong"};
                if (d.adaptation_games.size() != static_cast<std::size_t>(r.cell.K)) return {false, where + ": wrong K"};
                if (d.test_rows > 500 || d.test_rows != std::min<std::size_t>(d.test_rows_before_cap, 500))
                    return {false, where + ": test cap"};
                std::size_t hi = 0, lo = SIZE_MAX;
                for (std::size_t a = 0; a < d.source_quotas.size(); ++a) {
                    hi = std::max(hi, d.source_quotas[a]);
                    if (d.source_quotas[a] < d.source_available[a]) lo = std::min(lo, d.source_quotas[a]);
                }
                if (lo != SIZE_MAX && hi > lo + 1) return {false, where + ": quota spread " + std::to_string(hi - lo)};
            }
        }
    return {cells > 0 && ok > 0, std::to_string(cells) + " cells, " + std::to_string(ok) + " defined" + notes};
}

Verdict k_shot() {
    const auto rs = desk().sweep(Family::Bargaining, Task::Response, {named("G+T+I")}, {0, 16});
    const Table t = tabulate(rs);
    const auto d = paired(t, "G+T+I", 16, "G+T+I", 0);
    if (d.size() < 2) return {false, "too few paired cells"};
    const double m0 = mean_of(t, "G+T+I", 0), m16 = mean_of(t, "G+T+I", 16);
    const double lift = m16 - m0, se = standard_error(d);
    return {lift >= 0.03 && mean(d) - 2.0 * se > 0.0,
            "bargaining AUC K=0 " + fmt(m0) + ", K=16 " + fmt(m16) + ", lift " + fmt(lift) + ", paired SE " + fmt(se, 4)};
}

Verdict text_ablation() {
    auto gap = [](World& w) {
        const Table t = tabulate(w.sweep(Family::Bargaining, Task::Response, {named("G+T+I"), named("G+I")}, {0}));
        const auto d = paired(t, "G+T+I", 0, "G+I", 0);
        return std::make_tuple(mean_of(t, "G+T+I", 0), mean_of(t, "G+I", 0), d.size() > 1 ? standard_error(d) : kNaN);
    };
    const auto [c_gti, c_gi, c_se] = gap(desk());
    World uncoupled("desk-uncoupled");
    const auto [u_gti, u_gi, u_se] = gap(uncoupled);
    const bool coupled_ok = c_gti >= c_gi;
    const bool collapsed = std::abs(u_gti - u_gi) < u_se;
    return {coupled_ok && collapsed, "K=0 coupled G+T+I " + fmt(c_gti) + " vs G+I " + fmt(c_gi) + "; uncoupled " + fmt(u_gti) +
                                         " vs " + fmt(u_gi) + " (gap " + fmt(u_gti - u_gi, 4) + ", paired SE " + fmt(u_se, 4) + ")"};
}

Verdict determinism(const fs::path& scratch) {
    const std::string cli = COUNTERPART_CLI;
    for (const int workers : {1, 3}) {
        const fs::path d = scratch / ("w" + std::to_string(workers));
        const std::string w = " --workers " + std::to_string(workers);
        std::string out;
        if (shell(cli + " simulate --preset smoke" + w + " --out " + (d / "run").string(), &out) != 0) return {false, out};
        if (shell(cli + " extract --run " + (d / "run").string() + " --out " + (d / "features").string(), &out) != 0) return {false, out};
        if (shell(cli + " evaluate --quiet --retain-predictions --run " + (d / "run").string() + w + " --out " + (d / "eval").string(), &out) != 0)
            return {false, out};
    }
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(scratch / "w1")) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), scratch / "w1");
        if (slurp(e.path()) != slurp(scratch / "w3" / rel)) return {false, rel.string() + " differs"};
        ++files;
    }
    return {files > 0, std::to_string(files) + " files byte-identical across 1 and 3 workers"};
}

Verdict ablation_driver(const fs::path& scratch) {
    const std::string cli = COUNTERPART_CLI;
    std::string out;
    const fs::path run = scratch / "abl_run", eval = scratch / "abl_eval";
    if (shell(cli + " simulate --preset desk --out " + run.string(), &out) != 0) return {false, out};
    if (shell(cli + " evaluate --quiet --ablation table4 --observer-encoder builtin --k-grid 0 --task response --family bargaining --run " +
                  run.string() + " --out " + eval.string(),
              &out) != 0)
        return {false, out};
    std::istringstream csv(slurp(eval / "report.csv"));
    std::string line;
    std::getline(csv, line);
    std::vector<std::string> stacks;
    std::optional<double> identity;
    while (std::getline(csv, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
        if (f.size() < 6) continue;
        stacks.push_back(f[2]);
        if (f[2] == "I" && f[3] == "0" && !f[5].empty()) identity = std::stod(f[5]);
    }
    std::vector<std::string> want;
    for (const auto& ns : ablation_stacks()) want.push_back(ns.name);
    std::string listed;
    for (const auto& s : stacks) listed += (listed.empty() ? "" : " ") + s;
    const bool ok = stacks == want && identity && std::abs(*identity - 0.5) <= 0.01;
    return {ok, "stacks [" + listed + "], identity-only K=0 AUC " + (identity ? fmt(*identity) : std::string("missing"))};
}

}  // namespace

int main() {
    const fs::path scratch = fs::temp_directory_path() / ("counterpart_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(scratch);
    fs::create_directories(scratch);

    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"grid counts", grid_counts},
        {"schema oracle", schema_oracle},
        {"conservation and payoffs", conservation},
        {"normalization round trip", normalization},
        {"metric oracles", metric_oracles},
        {"protocol invariants", protocol_invariants},
        {"k-shot adaptation", k_shot},
        {"text ablation", text_ablation},
        {"determinism", [&] { return determinism(scratch / "det"); }},
        {"ablation driver", [&] { return ablation_driver(scratch); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !v.ok;
        std::cout << (v.ok ? "PASS " : "FAIL ") << i + 1 << " " << criteria[i].first << ": " << v.detail << " (" << fmt(secs, 1) << " s)"
                  << std::endl;
    }
    fs::remove_all(scratch);
    return failed ? 1 : 0;
}
