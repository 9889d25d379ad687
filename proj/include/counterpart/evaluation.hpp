#pragma once

// K-shot cross-population evaluation: game-level splits, balanced source
// sampling, per-cell feature construction, prediction, metrics and tables.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "counterpart/errors.hpp"
#include "counterpart/features.hpp"
#include "counterpart/game.hpp"
#include "counterpart/metrics.hpp"
#include "counterpart/pca.hpp"
#include "counterpart/predictor.hpp"
#include "counterpart/rng.hpp"
#include "counterpart/stack.hpp"
#include "counterpart/table.hpp"
#include "counterpart/text_encoder.hpp"

namespace counterpart {

// ---------------------------------------------------------------- rows

/// A labeled decision with its game-state block; text is produced on demand.
struct DecisionRow {
    std::size_t log_index = 0;
    std::uint64_t game_id = 0;
    Family family = Family::Bargaining;
    Task task = Task::Response;
    int round = 1;
    AgentId agent;
    std::vector<double> game;
    double label = 0.0;
    Money scale;  // M or S of the game
};

/// Logs plus every decision row extracted from them, for both tasks.
class Corpus {
public:
    Corpus() = default;
    explicit Corpus(std::vector<GameLog> logs) : logs_(std::move(logs)) {
        for (std::size_t li = 0; li < logs_.size(); ++li) {
            const GameLog& log = logs_[li];
            for (const Task task : {Task::Response, Task::Proposal})
                for (const DecisionPoint& dp : extract_decision_points(log, task)) {
                    DecisionRow row;
                    row.log_index = li;
                    row.game_id = log.seed;
                    row.family = log.config.family;
                    row.task = task;
                    row.round = dp.round;
                    row.agent = dp.deciding_agent_id;
                    row.game = game_features(dp);
                    row.label = label(dp);
                    row.scale = log.config.family == Family::Bargaining ? *log.config.money_M : *log.config.price_order_S;
                    rows_.push_back(std::move(row));
                }
        }
    }

    const std::vector<GameLog>& logs() const { return logs_; }
    const std::vector<DecisionRow>& rows() const { return rows_; }

    DecisionPoint point(std::size_t row) const {
        const DecisionRow& r = rows_[row];
        return {&logs_[r.log_index], r.task, r.round, r.agent};
    }

    /// Sorted ids of agents that decide at least once.
    std::vector<AgentId> deciders(std::optional<Family> family = std::nullopt) const {
        std::set<AgentId> ids;
        for (const auto& r : rows_)
            if (!family || r.family == *family) ids.insert(r.agent);
        return {ids.begin(), ids.end()};
    }

private:
    std::vector<GameLog> logs_;
    std::vector<DecisionRow> rows_;
};

/// Lazily encoded text vectors for the rows of one corpus. Thread-safe.
class EmbeddingStore {
public:
    EmbeddingStore(const Corpus& corpus, TextEncoder& encoder, TextKind kind)
        : corpus_(&corpus), encoder_(&encoder), kind_(kind), vectors_(corpus.rows().size()), logits_(corpus.rows().size()) {}

    std::string text(std::size_t row) const {
        const DecisionPoint dp = corpus_->point(row);
        return kind_ == TextKind::Dialogue ? round_dialogue_text(dp) : build_observer_prompt(dp);
    }

    void ensure(std::span<const std::size_t> rows) {
        std::lock_guard lock(mu_);
        std::vector<std::size_t> missing;
        for (std::size_t r : rows)
            if (!vectors_[r]) missing.push_back(r);
        std::sort(missing.begin(), missing.end());
        missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
        if (missing.empty()) return;
        std::vector<std::string> texts;
        texts.reserve(missing.size());
        for (std::size_t r : missing) texts.push_back(text(r));
        Encoded enc = encoder_->encode(kind_, texts);
        for (std::size_t i = 0; i < missing.size(); ++i) {
            vectors_[missing[i]] = std::move(enc.vectors[i]);
            if (enc.logits) logits_[missing[i]] = (*enc.logits)[i];
        }
    }

    /// Only valid for rows passed to ensure().
    const std::vector<double>& vector(std::size_t row) const { return *vectors_[row]; }
    std::optional<double> logit(std::size_t row) const { return logits_[row]; }

private:
    const Corpus* corpus_;
    TextEncoder* encoder_;
    TextKind kind_;
    std::vector<std::optional<std::vector<double>>> vectors_;
    std::vector<std::optional<double>> logits_;
    std::mutex mu_;
};

// ---------------------------------------------------------------- protocol pieces

struct ProtocolConfig {
    std::vector<int> k_grid{0, 2, 4, 8, 16};
    std::vector<int> seeds{0, 1, 2, 3, 4};
    std::size_t source_cap = 3000;
    std::size_t test_cap = 500;
    std::size_t text_pca_dims = 5;
    std::size_t observer_pca_dims = 16;
    std::uint64_t master_seed = 0;
    std::size_t min_proposals = 30;
    double min_label_sd = 0.02;
};

inline nlohmann::json to_json(const ProtocolConfig& p) {
    return {{"k_grid", p.k_grid},
            {"seeds", p.seeds},
            {"source_cap", p.source_cap},
            {"test_cap", p.test_cap},
            {"text_pca_dims", p.text_pca_dims},
            {"observer_pca_dims", p.observer_pca_dims},
            {"master_seed", p.master_seed},
            {"min_proposals", p.min_proposals},
            {"min_label_sd", p.min_label_sd}};
}

inline std::vector<std::string_view> protocol_preset_names() { return {"default", "quick"}; }

/// "default" is the full grid; "quick" keeps K in {0,16} and two seeds.
inline ProtocolConfig protocol_preset(std::string_view name) {
    ProtocolConfig p;
    if (name == "default") return p;
    if (name == "quick") {
        p.k_grid = {0, 16};
        p.seeds = {0, 1};
        return p;
    }
    throw ConfigError("unknown protocol preset '" + std::string(name) + "'");
}

/// Fields override the preset named by "preset" (or the defaults). Unknown fields are errors.
inline ProtocolConfig protocol_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("protocol: expected a JSON object");
    ProtocolConfig p = j.contains("preset") ? protocol_preset(j["preset"].get<std::string>()) : ProtocolConfig{};
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "preset") continue;
            else if (key == "k_grid") p.k_grid = v.get<std::vector<int>>();
            else if (key == "seeds") p.seeds = v.get<std::vector<int>>();
            else if (key == "source_cap") p.source_cap = v.get<std::size_t>();
            else if (key == "test_cap") p.test_cap = v.get<std::size_t>();
            else if (key == "text_pca_dims") p.text_pca_dims = v.get<std::size_t>();
            else if (key == "observer_pca_dims") p.observer_pca_dims = v.get<std::size_t>();
            else if (key == "master_seed") p.master_seed = v.get<std::uint64_t>();
            else if (key == "min_proposals") p.min_proposals = v.get<std::size_t>();
            else if (key == "min_label_sd") p.min_label_sd = v.get<double>();
            else throw ConfigError("protocol: unknown field '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("protocol: ") + e.what());
    }
    if (p.k_grid.empty() || p.seeds.empty()) throw ConfigError("protocol: k_grid and seeds must be non-empty");
    for (int k : p.k_grid)
        if (k < 0) throw ConfigError("protocol: K must be non-negative");
    if (p.source_cap == 0 || p.test_cap == 0) throw ConfigError("protocol: caps must be positive");
    return p;
}

struct GameSplit {
    std::vector<std::uint64_t> adaptation;
    std::vector<std::uint64_t> test;
};

/// K games drawn uniformly for adaptation; the rest are test games. Both sorted.
inline GameSplit split_games(std::vector<std::uint64_t> games, int K, Rng& rng) {
    std::sort(games.begin(), games.end());
    games.erase(std::unique(games.begin(), games.end()), games.end());
    if (K < 0 || static_cast<std::size_t>(K) >= games.size())
        throw StateError("target has " + std::to_string(games.size()) + " games; need more than K=" + std::to_string(K));
    rng.shuffle(std::span(games));
    GameSplit s;
    s.adaptation.assign(games.begin(), games.begin() + K);
    s.test.assign(games.begin() + K, games.end());
    std::sort(s.adaptation.begin(), s.adaptation.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

struct SourceSample {
    std::vector<std::size_t> rows;    // sorted
    std::vector<std::size_t> quotas;  // per agent, in input order
};

/// Per-agent quotas level out at the cap: agents short of the level give all
/// their rows; the remainder goes one row each to agents in shuffled order.
inline std::vector<std::size_t> balanced_quotas(std::span<const std::size_t> available, std::size_t cap, Rng& rng) {
    std::size_t total = 0, most = 0;
    for (std::size_t a : available) {
        total += a;
        most = std::max(most, a);
    }
    std::vector<std::size_t> q(available.begin(), available.end());
    if (total <= cap) return q;
    auto taken = [&](std::size_t level) {
        std::size_t s = 0;
        for (std::size_t a : available) s += std::min(a, level);
        return s;
    };
    std::size_t lo = 0, hi = most;  // largest level with taken(level) <= cap
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo + 1) / 2;
        if (taken(mid) <= cap)
            lo = mid;
        else
            hi = mid - 1;
    }
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < available.size(); ++i) {
        q[i] = std::min(available[i], lo);
        if (available[i] > lo) open.push_back(i);
    }
    std::size_t left = cap - taken(lo);
    rng.shuffle(std::span(open));
    for (std::size_t i = 0; i < left; ++i) ++q[open[i]];
    return q;
}

inline SourceSample sample_source_rows(const std::vector<std::vector<std::size_t>>& rows_by_agent, std::size_t cap, Rng& rng) {
    std::vector<std::size_t> available;
    for (const auto& r : rows_by_agent) available.push_back(r.size());
    SourceSample s;
    s.quotas = balanced_quotas(available, cap, rng);
    for (std::size_t a = 0; a < rows_by_agent.size(); ++a) {
        std::vector<std::size_t> pool = rows_by_agent[a];
        std::sort(pool.begin(), pool.end());
        if (s.quotas[a] < pool.size()) rng.shuffle(std::span(pool));
        s.rows.insert(s.rows.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(s.quotas[a]));
    }
    std::sort(s.rows.begin(), s.rows.end());
    return s;
}

struct CohortDecision {
    AgentId agent;
    Family family = Family::Bargaining;
    std::size_t proposals = 0;
    double label_sd = 0.0;
    bool included = false;
};

/// At least `min_count` round>=2 proposals and population std of labels >= `min_sd`.
inline bool cohort_filter_proposal(std::span<const double> labels, std::size_t min_count = 30, double min_sd = 0.02) {
    return labels.size() >= min_count && population_sd(labels) >= min_sd;
}

// ---------------------------------------------------------------- cells

struct EvaluationCell {
    AgentId target;
    int K = 0;
    int seed = 0;
    Task task = Task::Response;
    Family family = Family::Bargaining;
    std::string stack_name;
    FeatureStack stack;
};

enum class CellStatus { Ok, Skipped, Undefined, Failed };

inline std::string_view to_string(CellStatus s) {
    switch (s) {
        case CellStatus::Ok: return "ok";
        case CellStatus::Skipped: return "skipped";
        case CellStatus::Undefined: return "undefined";
        case CellStatus::Failed: return "failed";
    }
    return "?";
}

struct CellDiagnostics {
    std::size_t source_rows = 0;
    std::size_t target_train_rows = 0;
    std::size_t test_rows = 0;
    std::size_t test_rows_before_cap = 0;
    std::vector<std::uint64_t> adaptation_games;
    std::size_t test_games = 0;
    std::vector<std::size_t> source_quotas;
    std::vector<std::size_t> source_available;
    std::size_t width = 0;
    bool splits_disjoint = true;
    bool identity_ok = true;
    std::size_t pca_fits = 0;
    std::vector<std::string> warnings;
};

struct CellResult {
    EvaluationCell cell;
    CellStatus status = CellStatus::Skipped;
    std::optional<double> metric;
    std::string reason;
    CellDiagnostics diag;
    std::vector<double> predictions;
    std::vector<double> labels;
    std::vector<Money> scales;
};

/// Shared read-only inputs of a sweep.
struct EvaluationData {
    const Corpus* source = nullptr;
    const Corpus* target = nullptr;
    std::vector<AgentId> source_roster;  // identity column order
    EmbeddingStore* source_dialogue = nullptr;
    EmbeddingStore* target_dialogue = nullptr;
    EmbeddingStore* source_observer = nullptr;
    EmbeddingStore* target_observer = nullptr;
};

class LeakageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

namespace detail {

struct PoolRow {
    bool from_target = false;
    std::size_t index = 0;
    auto operator<=>(const PoolRow&) const = default;
};

/// Every fitting row must belong to the training pool and none to the test pool.
inline void assert_fit_on_training(std::span<const PoolRow> fit, std::span<const PoolRow> train, std::span<const PoolRow> test) {
    const std::set<PoolRow> tr(train.begin(), train.end());
    const std::set<PoolRow> te(test.begin(), test.end());
    for (const PoolRow& r : fit)
        if (!tr.count(r) || te.count(r)) throw LeakageError("PCA fitting input includes a row outside the training pool");
}

inline Matrix embeddings(std::span<const PoolRow> rows, EmbeddingStore* src, EmbeddingStore* tgt) {
    Matrix m;
    for (const PoolRow& r : rows) m.append_row((r.from_target ? tgt : src)->vector(r.index));
    return m;
}

inline void ensure_all(std::span<const PoolRow> rows, EmbeddingStore* src, EmbeddingStore* tgt) {
    std::vector<std::size_t> s, t;
    for (const PoolRow& r : rows) (r.from_target ? t : s).push_back(r.index);
    if (!s.empty()) src->ensure(s);
    if (!t.empty()) tgt->ensure(t);
}

}  // namespace detail

/// Games of `target` in `family` that are not aborted.
inline std::vector<std::uint64_t> target_games(const Corpus& corpus, const AgentId& target, Family family) {
    std::vector<std::uint64_t> ids;
    for (const GameLog& log : corpus.logs())
        if (log.config.family == family && log.outcome.kind != OutcomeKind::Aborted &&
            (log.player_1_id == target || log.player_2_id == target))
            ids.push_back(log.seed);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

inline std::uint64_t cell_seed(const ProtocolConfig& p, const EvaluationCell& c) {
    return stable_hash(p.master_seed, std::string_view(c.target), c.K, c.seed, c.task, c.family);
}

/// split -> rows -> PCA on the training pool -> stack -> predict -> metric.
inline CellResult run_cell(const EvaluationCell& cell, const EvaluationData& data, const ProtocolConfig& protocol,
                           const PredictorEndpoint& predictor) {
    CellResult res;
    res.cell = cell;
    CellDiagnostics& dg = res.diag;
    Rng rng(cell_seed(protocol, cell));

    GameSplit split;
    try {
        split = split_games(target_games(*data.target, cell.target, cell.family), cell.K, rng);
    } catch (const StateError& e) {
        res.status = CellStatus::Skipped;
        res.reason = e.what();
        return res;
    }
    dg.adaptation_games = split.adaptation;
    dg.test_games = split.test.size();
    {
        std::vector<std::uint64_t> both;
        std::set_intersection(split.adaptation.begin(), split.adaptation.end(), split.test.begin(), split.test.end(),
                              std::back_inserter(both));
        dg.splits_disjoint = both.empty();
    }

    const auto& srows = data.source->rows();
    std::vector<std::vector<std::size_t>> by_agent(data.source_roster.size());
    std::map<AgentId, std::size_t> roster_pos;
    for (std::size_t i = 0; i < data.source_roster.size(); ++i) roster_pos[data.source_roster[i]] = i;
    for (std::size_t i = 0; i < srows.size(); ++i) {
        const auto& r = srows[i];
        if (r.family != cell.family || r.task != cell.task) continue;
        if (const auto it = roster_pos.find(r.agent); it != roster_pos.end()) by_agent[it->second].push_back(i);
    }
    for (const auto& v : by_agent) dg.source_available.push_back(v.size());
    SourceSample sample = sample_source_rows(by_agent, protocol.source_cap, rng);
    dg.source_quotas = sample.quotas;

    const auto& trows = data.target->rows();
    const std::set<std::uint64_t> adapt(split.adaptation.begin(), split.adaptation.end());
    const std::set<std::uint64_t> testg(split.test.begin(), split.test.end());
    std::vector<std::size_t> t_train, t_test;
    for (std::size_t i = 0; i < trows.size(); ++i) {
        const auto& r = trows[i];
        if (r.family != cell.family || r.task != cell.task || r.agent != cell.target) continue;
        if (adapt.count(r.game_id)) t_train.push_back(i);
        else if (testg.count(r.game_id)) t_test.push_back(i);
    }
    dg.test_rows_before_cap = t_test.size();
    if (t_test.size() > protocol.test_cap) {
        rng.shuffle(std::span(t_test));
        t_test.resize(protocol.test_cap);
        std::sort(t_test.begin(), t_test.end());
    }
    dg.source_rows = sample.rows.size();
    dg.target_train_rows = t_train.size();
    dg.test_rows = t_test.size();
    if (t_test.empty()) {
        res.status = CellStatus::Skipped;
        res.reason = "no test rows";
        return res;
    }

    std::vector<detail::PoolRow> train, test;
    for (std::size_t i : sample.rows) train.push_back({false, i});
    for (std::size_t i : t_train) train.push_back({true, i});
    for (std::size_t i : t_test) test.push_back({true, i});
    if (train.empty()) {
        res.status = CellStatus::Skipped;
        res.reason = "empty training pool";
        return res;
    }
    auto row_of = [&](const detail::PoolRow& r) -> const DecisionRow& { return (r.from_target ? trows : srows)[r.index]; };

    try {
        FeatureBlocks btrain, btest;
        btrain.game_names = btest.game_names = game_feature_names(cell.family);
        for (const auto& r : train) btrain.game.append_row(row_of(r).game);
        for (const auto& r : test) btest.game.append_row(row_of(r).game);

        auto project = [&](EmbeddingStore* src, EmbeddingStore* tgt, std::size_t dims, Matrix& out_train, Matrix& out_test) {
            detail::ensure_all(train, src, tgt);
            detail::ensure_all(test, src, tgt);
            detail::assert_fit_on_training(train, train, test);
            const PcaModel model = fit_pca(detail::embeddings(train, src, tgt), dims, &dg.warnings);
            ++dg.pca_fits;
            out_train = apply_pca(model, detail::embeddings(train, src, tgt));
            out_test = apply_pca(model, detail::embeddings(test, src, tgt));
        };
        if (cell.stack.text)
            project(data.source_dialogue, data.target_dialogue, protocol.text_pca_dims, btrain.text, btest.text);
        if (cell.stack.observer || cell.stack.logit) {
            if (!data.source_observer || !data.target_observer)
                throw ConfigError("stack " + cell.stack.to_string() + " needs an Observer encoder");
            if (cell.stack.observer) {
                btrain.observer.emplace();
                btest.observer.emplace();
                project(data.source_observer, data.target_observer, protocol.observer_pca_dims, *btrain.observer, *btest.observer);
            } else {
                detail::ensure_all(train, data.source_observer, data.target_observer);
                detail::ensure_all(test, data.source_observer, data.target_observer);
            }
            if (cell.stack.logit) {
                auto logit_block = [&](std::span<const detail::PoolRow> rows) {
                    Matrix m(rows.size(), 1);
                    for (std::size_t i = 0; i < rows.size(); ++i) {
                        const auto l = (rows[i].from_target ? data.target_observer : data.source_observer)->logit(rows[i].index);
                        if (!l) throw ConfigError("stack uses L but the Observer encoder returned no logits");
                        m(i, 0) = *l;
                    }
                    return m;
                };
                btrain.logit = logit_block(train);
                btest.logit = logit_block(test);
            }
        }

        const std::size_t id_width = data.source_roster.size() + 1;
        btrain.identity = Matrix(train.size(), id_width);
        btest.identity = Matrix(test.size(), id_width);
        for (std::size_t i = 0; i < train.size(); ++i) {
            const auto v = identity_onehot(row_of(train[i]).agent, data.source_roster, cell.target);
            std::copy(v.begin(), v.end(), btrain.identity.row(i).begin());
        }
        for (std::size_t i = 0; i < test.size(); ++i) {
            const auto v = identity_onehot(row_of(test[i]).agent, data.source_roster, cell.target);
            std::copy(v.begin(), v.end(), btest.identity.row(i).begin());
        }
        for (const auto& a : data.source_roster) btrain.identity_names.push_back("id_" + a);
        btrain.identity_names.push_back("id_target");
        btest.identity_names = btrain.identity_names;
        {
            std::size_t active = 0;
            for (std::size_t i = 0; i < train.size(); ++i) active += btrain.identity(i, id_width - 1) == 1.0;
            bool test_all = true;
            for (std::size_t i = 0; i < test.size(); ++i) test_all = test_all && btest.identity(i, id_width - 1) == 1.0;
            dg.identity_ok = active == t_train.size() && test_all && (cell.K > 0 || active == 0);
        }

        TrainSet ts;
        ts.task = cell.task == Task::Response ? TaskKind::Classification : TaskKind::Regression;
        ts.X = select_feature_stack(btrain, cell.stack);
        for (const auto& r : train) ts.y.push_back(row_of(r).label);
        const Matrix Xtest = select_feature_stack(btest, cell.stack);
        dg.width = ts.X.cols();

        res.predictions = predict(predictor, ts, Xtest, &dg.warnings);
    } catch (const LeakageError&) {
        throw;
    } catch (const Error& e) {
        res.status = CellStatus::Failed;
        res.reason = e.what();
        return res;
    }

    for (const auto& r : test) {
        res.labels.push_back(row_of(r).label);
        res.scales.push_back(row_of(r).scale);
    }
    res.metric = cell.task == Task::Response ? auc(res.predictions, res.labels) : r_squared(res.predictions, res.labels);
    if (res.metric) {
        res.status = CellStatus::Ok;
    } else {
        res.status = CellStatus::Undefined;
        res.reason = cell.task == Task::Response ? "single-class test set" : "test labels have no variance";
    }
    return res;
}

// ---------------------------------------------------------------- sweeps

struct SweepSpec {
    std::vector<Family> families{Family::Bargaining, Family::Negotiation};
    std::vector<Task> tasks{Task::Response, Task::Proposal};
    std::vector<NamedStack> stacks{{"G+T+I", FeatureStack::parse("GTI")}};
    std::vector<AgentId> targets;  // empty: every target that decides in the family
    ProtocolConfig protocol;
};

struct SweepOutput {
    std::vector<CellResult> results;
    std::vector<CohortDecision> cohort;
};

/// Which targets enter proposal cells, per family.
inline std::vector<CohortDecision> proposal_cohort(const Corpus& target, const std::vector<AgentId>& agents, Family family,
                                                   const ProtocolConfig& p) {
    std::vector<CohortDecision> out;
    for (const auto& a : agents) {
        std::vector<double> labels;
        for (const auto& r : target.rows())
            if (r.family == family && r.task == Task::Proposal && r.agent == a) labels.push_back(r.label);
        CohortDecision d{a, family, labels.size(), population_sd(labels), cohort_filter_proposal(labels, p.min_proposals, p.min_label_sd)};
        out.push_back(d);
    }
    return out;
}

inline std::vector<EvaluationCell> enumerate_cells(const Corpus& target, const SweepSpec& spec, std::vector<CohortDecision>* cohort) {
    std::vector<EvaluationCell> cells;
    for (const Family family : spec.families) {
        std::vector<AgentId> agents;
        if (spec.targets.empty()) {
            agents = target.deciders(family);
        } else {
            const auto present = target.deciders(family);
            for (const auto& a : spec.targets)
                if (std::binary_search(present.begin(), present.end(), a)) agents.push_back(a);
        }
        if (agents.empty()) continue;
        for (const Task task : spec.tasks) {
            std::vector<AgentId> chosen = agents;
            if (task == Task::Proposal) {
                const auto decisions = proposal_cohort(target, agents, family, spec.protocol);
                chosen.clear();
                for (const auto& d : decisions)
                    if (d.included) chosen.push_back(d.agent);
                if (cohort) cohort->insert(cohort->end(), decisions.begin(), decisions.end());
                if (chosen.empty()) {
                    std::string msg = "empty proposal cohort for " + std::string(to_string(family)) + ":";
                    for (const auto& d : decisions) {
                        char buf[128];
                        std::snprintf(buf, sizeof buf, " %s(n=%zu, sd=%.4f)", d.agent.c_str(), d.proposals, d.label_sd);
                        msg += buf;
                    }
                    throw ConfigError(msg);
                }
            }
            for (const auto& ns : spec.stacks)
                for (const auto& a : chosen)
                    for (const int K : spec.protocol.k_grid)
                        for (const int seed : spec.protocol.seeds)
                            cells.push_back({a, K, seed, task, family, ns.name, ns.stack});
        }
    }
    return cells;
}

/// Runs every cell on `workers` threads. Output order is the enumeration order.
inline SweepOutput run_sweep(const EvaluationData& data, const SweepSpec& spec, const PredictorEndpoint& predictor,
                             unsigned workers = 1, const std::function<void(std::size_t, std::size_t)>& progress = {}) {
    for (const auto& ns : spec.stacks)
        if ((ns.stack.observer || ns.stack.logit) && (!data.source_observer || !data.target_observer))
            throw ConfigError("stack " + ns.name + " uses the Observer block but no Observer encoder is configured");
    SweepOutput out;
    const auto cells = enumerate_cells(*data.target, spec, &out.cohort);
    out.results.resize(cells.size());
    std::atomic<std::size_t> next{0}, done{0};
    std::mutex err_mu, progress_mu;
    std::exception_ptr first_error;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            try {
                out.results[i] = run_cell(cells[i], data, spec.protocol, predictor);
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!first_error) first_error = std::current_exception();
                next = cells.size();
                return;
            }
            const std::size_t d = ++done;
            if (progress) {
                std::lock_guard lock(progress_mu);
                progress(d, cells.size());
            }
        }
    };
    workers = std::max(1u, workers);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

// ---------------------------------------------------------------- aggregation

enum class Aggregation { Mean, Median };

struct ReportEntry {
    Family family = Family::Bargaining;
    Task task = Task::Response;
    std::string stack;
    int K = 0;
    Aggregation kind = Aggregation::Mean;
    std::optional<double> central;  // empty when no defined cell
    double se = 0.0;
    std::size_t n = 0;
    std::size_t undefined = 0;
    std::size_t failed = 0;
    std::size_t skipped = 0;
};

/// Central value and standard error over defined per-(agent, seed) values.
inline std::pair<double, double> summarize(std::span<const double> values, Aggregation kind) {
    const double c = kind == Aggregation::Mean ? mean(values) : median({values.begin(), values.end()});
    return {c, standard_error(values)};
}

/// One entry per (family, task, stack, K) in first-seen order of the results.
inline std::vector<ReportEntry> aggregate(const std::vector<CellResult>& results) {
    std::vector<ReportEntry> entries;
    std::vector<std::vector<double>> values;
    std::map<std::tuple<int, int, std::string, int>, std::size_t> index;
    for (const auto& r : results) {
        const auto key = std::make_tuple(static_cast<int>(r.cell.family), static_cast<int>(r.cell.task), r.cell.stack_name, r.cell.K);
        auto [it, fresh] = index.try_emplace(key, entries.size());
        if (fresh) {
            ReportEntry e;
            e.family = r.cell.family;
            e.task = r.cell.task;
            e.stack = r.cell.stack_name;
            e.K = r.cell.K;
            e.kind = r.cell.task == Task::Response ? Aggregation::Mean : Aggregation::Median;
            entries.push_back(e);
            values.emplace_back();
        }
        ReportEntry& e = entries[it->second];
        switch (r.status) {
            case CellStatus::Ok: values[it->second].push_back(*r.metric); break;
            case CellStatus::Undefined: ++e.undefined; break;
            case CellStatus::Failed: ++e.failed; break;
            case CellStatus::Skipped: ++e.skipped; break;
        }
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        entries[i].n = values[i].size();
        if (values[i].empty()) continue;
        const auto [c, se] = summarize(values[i], entries[i].kind);
        entries[i].central = c;
        entries[i].se = se;
    }
    return entries;
}

struct DollarError {
    Family family = Family::Bargaining;
    std::string stack;
    int K = 0;
    std::size_t rows = 0;
    std::optional<double> median_abs_error;
};

/// Median absolute error in currency of inverse-normalized proposal predictions.
inline std::vector<DollarError> dollar_error_report(const std::vector<CellResult>& results) {
    std::vector<DollarError> out;
    std::vector<std::vector<double>> errs;
    std::map<std::tuple<int, std::string, int>, std::size_t> index;
    for (const auto& r : results) {
        if (r.cell.task != Task::Proposal || r.status != CellStatus::Ok) continue;
        const auto key = std::make_tuple(static_cast<int>(r.cell.family), r.cell.stack_name, r.cell.K);
        auto [it, fresh] = index.try_emplace(key, out.size());
        if (fresh) {
            out.push_back({r.cell.family, r.cell.stack_name, r.cell.K, 0, std::nullopt});
            errs.emplace_back();
        }
        for (std::size_t i = 0; i < r.predictions.size(); ++i) {
            const double yhat = r.predictions[i], y = r.labels[i], s = r.scales[i].units();
            const double a = r.cell.family == Family::Bargaining ? (1.0 - yhat) * s : yhat * s;
            const double b = r.cell.family == Family::Bargaining ? (1.0 - y) * s : y * s;
            errs[it->second].push_back(std::abs(a - b));
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].rows = errs[i].size();
        if (!errs[i].empty()) out[i].median_abs_error = median(errs[i]);
    }
    return out;
}

// ---------------------------------------------------------------- output

inline std::string format_fixed(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

inline nlohmann::json cell_to_json(const CellResult& r, bool with_predictions) {
    nlohmann::json j{{"target", r.cell.target},
                     {"family", to_string(r.cell.family)},
                     {"task", to_string(r.cell.task)},
                     {"stack", r.cell.stack_name},
                     {"blocks", r.cell.stack.to_string()},
                     {"K", r.cell.K},
                     {"seed", r.cell.seed},
                     {"status", to_string(r.status)},
                     {"metric", r.metric ? nlohmann::json(*r.metric) : nlohmann::json(nullptr)},
                     {"n_source", r.diag.source_rows},
                     {"n_target_train", r.diag.target_train_rows},
                     {"n_test", r.diag.test_rows},
                     {"n_test_before_cap", r.diag.test_rows_before_cap},
                     {"width", r.diag.width},
                     {"adaptation_games", r.diag.adaptation_games}};
    if (!r.reason.empty()) j["reason"] = r.reason;
    if (!r.diag.warnings.empty()) j["warnings"] = r.diag.warnings;
    if (with_predictions) {
        j["predictions"] = r.predictions;
        j["labels"] = r.labels;
    }
    return j;
}

inline std::string report_csv(const std::vector<ReportEntry>& entries) {
    std::ostringstream os;
    os << "family,task,stack,K,aggregation,central,se,n,undefined,failed,skipped\n";
    for (const auto& e : entries) {
        os << to_string(e.family) << ',' << to_string(e.task) << ',' << e.stack << ',' << e.K << ','
           << (e.kind == Aggregation::Mean ? "mean" : "median") << ',' << (e.central ? format_fixed(*e.central, 6) : "")
           << ',' << (e.central ? format_fixed(e.se, 6) : "") << ',' << e.n << ',' << e.undefined << ',' << e.failed << ','
           << e.skipped << '\n';
    }
    return os.str();
}

/// Stack x K tables, one block per family, one section per task.
inline std::string report_text(const std::vector<ReportEntry>& entries) {
    std::ostringstream os;
    for (const Task task : {Task::Response, Task::Proposal}) {
        std::vector<int> ks;
        std::vector<std::string> stacks;
        for (const auto& e : entries) {
            if (e.task != task) continue;
            if (std::find(ks.begin(), ks.end(), e.K) == ks.end()) ks.push_back(e.K);
            if (std::find(stacks.begin(), stacks.end(), e.stack) == stacks.end()) stacks.push_back(e.stack);
        }
        if (ks.empty()) continue;
        std::sort(ks.begin(), ks.end());
        os << (task == Task::Response ? "Response prediction (mean AUC +- SE)" : "Proposal prediction (median R2 +- SE)") << "\n";
        std::size_t name_w = 8;
        for (const auto& s : stacks) name_w = std::max(name_w, s.size() + 2);
        for (const Family family : {Family::Bargaining, Family::Negotiation}) {
            bool any = false;
            for (const auto& e : entries) any = any || (e.task == task && e.family == family);
            if (!any) continue;
            os << "\n" << to_string(family) << "\n";
            os << std::string(name_w, ' ');
            for (int k : ks) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%-18s", ("K=" + std::to_string(k)).c_str());
                os << buf;
            }
            os << "\n";
            for (const auto& s : stacks) {
                std::string line = s + std::string(name_w - s.size(), ' ');
                for (int k : ks) {
                    std::string cell = "-";
                    for (const auto& e : entries)
                        if (e.task == task && e.family == family && e.stack == s && e.K == k)
                            cell = e.central ? format_fixed(*e.central, 3) + " +- " + format_fixed(e.se, 3) : "empty";
                    char buf[32];
                    std::snprintf(buf, sizeof buf, "%-18s", cell.c_str());
                    line += buf;
                }
                while (!line.empty() && line.back() == ' ') line.pop_back();
                os << line << "\n";
            }
        }
        std::size_t undefined = 0, failed = 0, skipped = 0;
        for (const auto& e : entries)
            if (e.task == task) {
                undefined += e.undefined;
                failed += e.failed;
                skipped += e.skipped;
            }
        os << "\ncells excluded: " << undefined << " undefined, " << failed << " failed, " << skipped << " skipped\n\n";
    }
    return os.str();
}

}  // namespace counterpart
