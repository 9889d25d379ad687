// counterpart: simulate populations, extract features, run K-shot sweeps,
// check bridge endpoints and verify run directories.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "counterpart/bridge_check.hpp"
#include "counterpart/evaluation.hpp"
#include "counterpart/features.hpp"
#include "counterpart/game_io.hpp"
#include "counterpart/pca.hpp"
#include "counterpart/plan.hpp"
#include "counterpart/stack.hpp"
#include "counterpart/text_encoder.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace counterpart;
using counterpart::cli::RunManifest;

namespace {

constexpr const char* kSourceLogs = "source_logs.jsonl";
constexpr const char* kTargetLogs = "target_logs.jsonl";

json read_json_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot read " + p.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(p.string() + ": " + e.what());
    }
}

std::vector<int> parse_int_list(const std::string& s, const char* what) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError(std::string(what) + ": bad integer '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<Family> parse_families(const std::string& s) {
    if (s == "all") return {Family::Bargaining, Family::Negotiation};
    if (s != "bargaining" && s != "negotiation") throw ConfigError("--family: expected bargaining, negotiation or all");
    return {family_from_string(s)};
}

std::vector<Task> parse_tasks(const std::string& s) {
    if (s == "all") return {Task::Response, Task::Proposal};
    if (s != "response" && s != "proposal") throw ConfigError("--task: expected response, proposal or all");
    return {task_from_string(s)};
}

std::string number_cell(double x) {
    if (!std::isfinite(x)) return "NaN";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

std::vector<GameLog> load_logs_or_throw(const fs::path& p) {
    if (!fs::exists(p)) throw ConfigError("no such log file: " + p.string());
    return load_logs(p);
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
    std::string plan_path;
    std::string preset;
    std::optional<std::uint64_t> seed;
    int workers = 1;
    std::string out;
};

json build_plan_json(const SimulateOptions& o) {
    json j = o.plan_path.empty() ? json::object() : read_json_file(o.plan_path);
    if (!j.is_object()) throw ConfigError("plan: expected a JSON object");
    if (!o.preset.empty()) {
        const auto plans = plan_preset_names();
        const auto configs = config_preset_names();
        if (std::find(plans.begin(), plans.end(), o.preset) != plans.end()) {
            j["preset"] = o.preset;
        } else if (std::find(configs.begin(), configs.end(), o.preset) != configs.end()) {
            j["configs"] = o.preset;
            for (const char* side : {"source", "target"})
                if (j.contains(side) && j[side].is_object()) j[side].erase("configs");
        } else {
            throw ConfigError("unknown preset '" + o.preset + "'");
        }
    }
    if (!j.contains("preset") && !j.contains("source")) j["preset"] = "desk";
    j = resolve_plan_json(j);
    if (o.seed) j["seed"] = *o.seed;
    return j;
}

std::string family_counts(const std::vector<GameConfig>& configs) {
    std::size_t b = 0, n = 0;
    for (const auto& c : configs) (c.family == Family::Bargaining ? b : n)++;
    return std::to_string(configs.size()) + " configs (" + std::to_string(b) + " bargaining, " + std::to_string(n) + " negotiation)";
}

int cmd_simulate(const SimulateOptions& o) {
    const json pj = build_plan_json(o);
    const SimulationPlan plan = plan_from_json(pj);
    std::cerr << "source: " << plan.source.population.count << " agents, " << family_counts(plan.source.configs) << "\n";
    std::cerr << "target: " << plan.target.population.count << " agents, " << family_counts(plan.target.configs) << "\n";
    const SimulationResult r = run_simulation(plan, o.workers);

    const fs::path out(o.out);
    fs::create_directories(out);
    save_logs(r.source_logs, out / kSourceLogs);
    save_logs(r.target_logs, out / kTargetLogs);
    json agents{{"source", json::array()}, {"target", json::array()}};
    for (const auto& a : r.source_agents) agents["source"].push_back(to_json(a));
    for (const auto& a : r.target_agents) agents["target"].push_back(to_json(a));
    cli::write_text(out / "agents.json", agents.dump(2) + "\n");
    cli::write_text(out / "plan.json", pj.dump(2) + "\n");

    RunManifest m;
    m.command = "simulate";
    m.config = pj;
    m.master_seed = plan.seed;
    if (!o.plan_path.empty()) m.add_input(o.plan_path);
    for (const char* f : {kSourceLogs, kTargetLogs, "agents.json", "plan.json"}) m.add_output(out / f);
    cli::write_manifest(out, m);
    std::cout << "wrote " << r.source_logs.size() << " source and " << r.target_logs.size() << " target games to " << out.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- extract

struct InputOptions {
    std::string run;
    std::string source_logs;
    std::string target_logs;

    std::pair<fs::path, fs::path> resolve(bool need_target) const {
        fs::path s = source_logs, t = target_logs;
        if (!run.empty()) {
            if (s.empty()) s = fs::path(run) / kSourceLogs;
            if (t.empty()) t = fs::path(run) / kTargetLogs;
        }
        if (s.empty()) throw ConfigError("give --run or --source-logs");
        if (need_target && t.empty()) throw ConfigError("give --run or --target-logs");
        return {s, t};
    }
};

struct ExtractOptions {
    InputOptions in;
    std::string task = "all";
    std::string family = "all";
    std::string stack = "G+T+I";
    std::string encoder = "builtin";
    std::string observer_encoder;
    std::size_t text_pca_dims = 5;
    std::size_t observer_pca_dims = 16;
    std::string out;
};

/// Writes one feature CSV and one decision-point index for the rows of one corpus slice.
void write_feature_table(const Corpus& corpus, const std::vector<std::size_t>& rows, bool target_side, Family family,
                         const std::vector<AgentId>& roster, const FeatureStack& stack, EmbeddingStore* dialogue,
                         EmbeddingStore* observer, const ExtractOptions& o, const fs::path& features_path,
                         const fs::path& points_path, std::vector<std::string>& warnings) {
    FeatureBlocks b;
    b.game_names = game_feature_names(family);
    for (std::size_t r : rows) b.game.append_row(corpus.rows()[r].game);
    auto project = [&](EmbeddingStore* store, std::size_t dims) {
        store->ensure(rows);
        Matrix emb;
        for (std::size_t r : rows) emb.append_row(store->vector(r));
        return apply_pca(fit_pca(emb, dims, &warnings), emb);
    };
    if (stack.text) b.text = project(dialogue, o.text_pca_dims);
    if (stack.observer) b.observer = project(observer, o.observer_pca_dims);
    if (stack.logit) {
        observer->ensure(rows);
        Matrix l(rows.size(), 1);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto v = observer->logit(rows[i]);
            if (!v) throw ConfigError("stack uses L but the Observer encoder returned no logits");
            l(i, 0) = *v;
        }
        b.logit = std::move(l);
    }
    b.identity = Matrix(rows.size(), roster.size() + 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const AgentId& a = corpus.rows()[rows[i]].agent;
        const auto v = identity_onehot(a, roster, target_side ? a : AgentId{});
        std::copy(v.begin(), v.end(), b.identity.row(i).begin());
    }
    for (const auto& a : roster) b.identity_names.push_back("id_" + a);
    b.identity_names.push_back("id_target");

    std::vector<std::string> names;
    const Matrix X = select_feature_stack(b, stack, &names);
    std::ostringstream fcsv;
    for (const auto& n : names) fcsv << csv_field(n) << ',';
    fcsv << "label\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (double x : X.row(i)) fcsv << number_cell(x) << ',';
        fcsv << number_cell(corpus.rows()[rows[i]].label) << '\n';
    }
    cli::write_text(features_path, fcsv.str());

    std::ostringstream pcsv;
    pcsv << "row,game_id,round,agent,task,family,scale\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const DecisionRow& r = corpus.rows()[rows[i]];
        pcsv << i << ',' << r.game_id << ',' << r.round << ',' << csv_field(r.agent) << ',' << to_string(r.task) << ','
             << to_string(r.family) << ',' << r.scale.to_string() << '\n';
    }
    cli::write_text(points_path, pcsv.str());
}

int cmd_extract(const ExtractOptions& o) {
    const auto [spath, tpath] = o.in.resolve(false);
    const FeatureStack stack = FeatureStack::parse(o.stack);
    if ((stack.observer || stack.logit) && o.observer_encoder.empty())
        throw ConfigError("stack " + stack.to_string() + " needs --observer-encoder");

    struct Side {
        std::string name;
        fs::path path;
        Corpus corpus;
    };
    std::vector<Side> sides;
    sides.push_back({"source", spath, Corpus(load_logs_or_throw(spath))});
    if (!tpath.empty()) sides.push_back({"target", tpath, Corpus(load_logs_or_throw(tpath))});
    const std::vector<AgentId> roster = sides[0].corpus.deciders();

    TextEncoder dialogue_enc(EncoderEndpoint::parse(o.encoder));
    std::optional<TextEncoder> observer_enc;
    if (!o.observer_encoder.empty()) observer_enc.emplace(EncoderEndpoint::parse(o.observer_encoder));

    const fs::path out(o.out);
    fs::create_directories(out);
    RunManifest m;
    m.command = "extract";
    m.config = {{"stack", stack.to_string()},
                {"task", o.task},
                {"family", o.family},
                {"encoder", dialogue_enc.spec().describe()},
                {"observer_encoder", observer_enc ? json(observer_enc->spec().describe()) : json(nullptr)},
                {"text_pca_dims", o.text_pca_dims},
                {"observer_pca_dims", o.observer_pca_dims},
                {"source_roster", roster}};
    std::vector<std::string> warnings;
    for (auto& side : sides) {
        m.add_input(side.path);
        EmbeddingStore dstore(side.corpus, dialogue_enc, TextKind::Dialogue);
        std::optional<EmbeddingStore> ostore;
        if (observer_enc) ostore.emplace(side.corpus, *observer_enc, TextKind::Observer);
        for (const Family family : parse_families(o.family))
            for (const Task task : parse_tasks(o.task)) {
                std::vector<std::size_t> rows;
                for (std::size_t i = 0; i < side.corpus.rows().size(); ++i) {
                    const auto& r = side.corpus.rows()[i];
                    if (r.family == family && r.task == task) rows.push_back(i);
                }
                if (rows.empty()) continue;
                const std::string tag = side.name + "_" + std::string(to_string(family)) + "_" + std::string(to_string(task));
                const fs::path fpath = out / ("features_" + tag + ".csv");
                const fs::path ppath = out / ("points_" + tag + ".csv");
                write_feature_table(side.corpus, rows, side.name == "target", family, roster, stack, &dstore,
                                    ostore ? &*ostore : nullptr, o, fpath, ppath, warnings);
                m.add_output(fpath);
                m.add_output(ppath);
                std::cout << tag << ": " << rows.size() << " rows\n";
            }
    }
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    cli::write_manifest(out, m);
    return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateOptions {
    InputOptions in;
    std::string protocol_path;
    std::string k_grid;
    std::string seeds;
    std::vector<std::string> stacks;
    std::string ablation;
    std::string predictor = "knn";
    std::string encoder = "builtin";
    std::string observer_encoder;
    std::string targets;
    std::string family = "all";
    std::string task = "all";
    unsigned workers = 1;
    std::optional<std::uint64_t> seed;
    bool retain_predictions = false;
    bool quiet = false;
    std::string out;
};

PredictorEndpoint parse_predictor(std::string s) {
    if (s.starts_with("external:")) s = s.substr(9);
    return PredictorEndpoint::parse(s);
}

int cmd_evaluate(const EvaluateOptions& o) {
    const auto [spath, tpath] = o.in.resolve(true);
    SweepSpec spec;
    spec.protocol = o.protocol_path.empty() ? ProtocolConfig{} : protocol_from_json(read_json_file(o.protocol_path));
    if (!o.k_grid.empty()) spec.protocol.k_grid = parse_int_list(o.k_grid, "--k-grid");
    if (!o.seeds.empty()) spec.protocol.seeds = parse_int_list(o.seeds, "--seeds");
    if (o.seed) spec.protocol.master_seed = *o.seed;
    for (int k : spec.protocol.k_grid)
        if (k < 0) throw ConfigError("--k-grid: K must be non-negative");
    if (!o.ablation.empty()) {
        if (o.ablation != "table4") throw ConfigError("unknown ablation '" + o.ablation + "'");
        if (!o.stacks.empty()) throw ConfigError("--ablation and --stack are exclusive");
        spec.stacks = ablation_stacks();
    } else if (!o.stacks.empty()) {
        spec.stacks.clear();
        for (const auto& s : o.stacks) {
            const FeatureStack st = FeatureStack::parse(s);
            spec.stacks.push_back({st.to_string(), st});
        }
    }
    spec.families = parse_families(o.family);
    spec.tasks = parse_tasks(o.task);
    spec.targets = split_list(o.targets);
    const PredictorEndpoint predictor = parse_predictor(o.predictor);

    bool needs_text = false, needs_observer = false;
    for (const auto& ns : spec.stacks) {
        needs_text = needs_text || ns.stack.text;
        needs_observer = needs_observer || ns.stack.observer || ns.stack.logit;
    }
    if (needs_observer && o.observer_encoder.empty()) throw ConfigError("a requested stack uses O or L; give --observer-encoder");

    const Corpus source(load_logs_or_throw(spath));
    const Corpus target(load_logs_or_throw(tpath));
    TextEncoder dialogue_enc(EncoderEndpoint::parse(o.encoder));
    std::optional<TextEncoder> observer_enc;
    if (!o.observer_encoder.empty()) observer_enc.emplace(EncoderEndpoint::parse(o.observer_encoder));
    EmbeddingStore sd(source, dialogue_enc, TextKind::Dialogue), td(target, dialogue_enc, TextKind::Dialogue);
    std::optional<EmbeddingStore> so, to;
    if (observer_enc) {
        so.emplace(source, *observer_enc, TextKind::Observer);
        to.emplace(target, *observer_enc, TextKind::Observer);
    }

    // Encode every row up front, in row order, so batches do not depend on the worker count.
    auto all_rows = [](const Corpus& c) {
        std::vector<std::size_t> v(c.rows().size());
        std::iota(v.begin(), v.end(), std::size_t{0});
        return v;
    };
    if (needs_text) {
        sd.ensure(all_rows(source));
        td.ensure(all_rows(target));
    }
    if (needs_observer) {
        so->ensure(all_rows(source));
        to->ensure(all_rows(target));
    }

    EvaluationData data;
    data.source = &source;
    data.target = &target;
    data.source_roster = source.deciders();
    data.source_dialogue = &sd;
    data.target_dialogue = &td;
    data.source_observer = so ? &*so : nullptr;
    data.target_observer = to ? &*to : nullptr;

    std::size_t last_pct = 0;
    auto progress = [&](std::size_t done, std::size_t total) {
        if (o.quiet) return;
        const std::size_t pct = done * 10 / total;
        if (pct != last_pct || done == total) {
            last_pct = pct;
            std::cerr << "cells " << done << "/" << total << "\n";
        }
    };
    const SweepOutput sweep = run_sweep(data, spec, predictor, o.workers, progress);
    const auto entries = aggregate(sweep.results);

    const fs::path out(o.out);
    fs::create_directories(out);
    {
        std::ostringstream os;
        for (const auto& r : sweep.results) os << cell_to_json(r, o.retain_predictions).dump() << '\n';
        cli::write_text(out / "cells.jsonl", os.str());
    }
    cli::write_text(out / "report.csv", report_csv(entries));
    const std::string text = report_text(entries);
    cli::write_text(out / "report.txt", text);
    {
        std::ostringstream os;
        os << "family,stack,K,rows,median_abs_error\n";
        for (const auto& d : dollar_error_report(sweep.results))
            os << to_string(d.family) << ',' << d.stack << ',' << d.K << ',' << d.rows << ','
               << (d.median_abs_error ? format_fixed(*d.median_abs_error, 2) : "") << '\n';
        cli::write_text(out / "dollar_errors.csv", os.str());
    }
    {
        std::ostringstream os;
        os << "agent,family,proposals,label_sd,included\n";
        for (const auto& c : sweep.cohort)
            os << csv_field(c.agent) << ',' << to_string(c.family) << ',' << c.proposals << ',' << format_fixed(c.label_sd, 6) << ','
               << (c.included ? "yes" : "no") << '\n';
        cli::write_text(out / "cohort.csv", os.str());
    }

    RunManifest m;
    m.command = "evaluate";
    json stacks = json::array();
    for (const auto& ns : spec.stacks) stacks.push_back({{"name", ns.name}, {"blocks", ns.stack.to_string()}});
    json families = json::array(), tasks = json::array();
    for (auto f : spec.families) families.push_back(to_string(f));
    for (auto t : spec.tasks) tasks.push_back(to_string(t));
    m.config = {{"protocol", to_json(spec.protocol)},
                {"stacks", stacks},
                {"families", families},
                {"tasks", tasks},
                {"targets", spec.targets},
                {"predictor", predictor.describe()},
                {"encoder", dialogue_enc.spec().describe()},
                {"observer_encoder", observer_enc ? json(observer_enc->spec().describe()) : json(nullptr)},
                {"retain_predictions", o.retain_predictions}};
    m.master_seed = spec.protocol.master_seed;
    if (!o.protocol_path.empty()) m.add_input(o.protocol_path);
    m.add_input(spath);
    m.add_input(tpath);
    for (const char* f : {"cells.jsonl", "report.csv", "report.txt", "dollar_errors.csv", "cohort.csv"}) m.add_output(out / f);
    cli::write_manifest(out, m);
    std::cout << text;
    return 0;
}

// ---------------------------------------------------------------- bridge-check / verify

struct BridgeOptions {
    std::string encoder;
    std::string predictor;
    std::string agent;
    double tolerance = 1e-5;
};

int cmd_bridge_check(const BridgeOptions& o) {
    if (o.encoder.empty() && o.predictor.empty() && o.agent.empty())
        throw ConfigError("give at least one of --encoder, --predictor, --agent");
    std::vector<CheckResult> results;
    auto add = [&](std::vector<CheckResult> r) { results.insert(results.end(), r.begin(), r.end()); };
    if (!o.encoder.empty()) add(check_encoder(Endpoint::parse(o.encoder), o.tolerance));
    if (!o.predictor.empty()) add(check_predictor(Endpoint::parse(o.predictor), o.tolerance));
    if (!o.agent.empty()) add(check_agent(Endpoint::parse(o.agent)));
    bool ok = true;
    for (const auto& r : results) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
        ok = ok && r.passed;
    }
    return ok ? 0 : 1;
}

int cmd_verify(const std::string& dir) {
    const auto problems = cli::verify_manifest(dir);
    for (const auto& p : problems) std::cout << "FAIL " << p << "\n";
    if (problems.empty()) std::cout << "OK " << dir << "\n";
    return problems.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Counterpart prediction toolkit: populations, features, K-shot evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(cli::kToolVersion));

    SimulateOptions so;
    auto* sim = app.add_subcommand("simulate", "Run source and target round-robin tournaments");
    sim->add_option("--plan", so.plan_path, "Plan JSON file")->check(CLI::ExistingFile);
    sim->add_option("--preset", so.preset, "Plan preset (desk, desk-uncoupled, smoke) or config preset");
    sim->add_option("--seed", so.seed, "Override the plan seed");
    sim->add_option("--workers", so.workers, "Worker threads")->check(CLI::PositiveNumber);
    sim->add_option("--out", so.out, "Output directory")->required();

    ExtractOptions eo;
    auto* ext = app.add_subcommand("extract", "Write feature matrices for every decision point");
    ext->add_option("--run", eo.in.run, "Directory written by simulate")->check(CLI::ExistingDirectory);
    ext->add_option("--source-logs,--logs", eo.in.source_logs, "Source (or only) log file")->check(CLI::ExistingFile);
    ext->add_option("--target-logs", eo.in.target_logs, "Target log file")->check(CLI::ExistingFile);
    ext->add_option("--task", eo.task, "response, proposal or all");
    ext->add_option("--family", eo.family, "bargaining, negotiation or all");
    ext->add_option("--stack", eo.stack, "Feature blocks, e.g. G+T+I or G,I");
    ext->add_option("--encoder", eo.encoder, "Dialogue encoder: builtin[:dim] or endpoint");
    ext->add_option("--observer-encoder", eo.observer_encoder, "Observer encoder: builtin[:dim] or endpoint");
    ext->add_option("--text-pca", eo.text_pca_dims, "Dialogue PCA dimensions");
    ext->add_option("--observer-pca", eo.observer_pca_dims, "Observer PCA dimensions");
    ext->add_option("--out", eo.out, "Output directory")->required();

    EvaluateOptions vo;
    auto* ev = app.add_subcommand("evaluate", "Run the K x seed x target sweep and write reports");
    ev->add_option("--run", vo.in.run, "Directory written by simulate")->check(CLI::ExistingDirectory);
    ev->add_option("--source-logs", vo.in.source_logs, "Source log file")->check(CLI::ExistingFile);
    ev->add_option("--target-logs", vo.in.target_logs, "Target log file")->check(CLI::ExistingFile);
    ev->add_option("--protocol", vo.protocol_path, "Protocol JSON file")->check(CLI::ExistingFile);
    ev->add_option("--k-grid", vo.k_grid, "Comma-separated K values");
    ev->add_option("--seeds", vo.seeds, "Comma-separated split seeds");
    ev->add_option("--stack", vo.stacks, "Feature stack (repeatable)");
    ev->add_option("--ablation", vo.ablation, "Named stack set: table4");
    ev->add_option("--predictor", vo.predictor, "knn, knn:K, or [external:]endpoint");
    ev->add_option("--encoder", vo.encoder, "Dialogue encoder: builtin[:dim] or endpoint");
    ev->add_option("--observer-encoder", vo.observer_encoder, "Observer encoder: builtin[:dim] or endpoint");
    ev->add_option("--targets", vo.targets, "Comma-separated target ids (default: all)");
    ev->add_option("--family", vo.family, "bargaining, negotiation or all");
    ev->add_option("--task", vo.task, "response, proposal or all");
    ev->add_option("--workers", vo.workers, "Worker threads")->check(CLI::PositiveNumber);
    ev->add_option("--seed", vo.seed, "Override the protocol master seed");
    ev->add_flag("--retain-predictions", vo.retain_predictions, "Keep per-row predictions in cells.jsonl");
    ev->add_flag("--quiet", vo.quiet, "No progress lines");
    ev->add_option("--out", vo.out, "Output directory")->required();

    BridgeOptions bo;
    auto* br = app.add_subcommand("bridge-check", "Check endpoints against the wire protocols");
    br->add_option("--encoder", bo.encoder, "Encoder endpoint");
    br->add_option("--predictor", bo.predictor, "Predictor endpoint");
    br->add_option("--agent", bo.agent, "Agent endpoint");
    br->add_option("--tolerance", bo.tolerance, "Relative tolerance for repeat checks");

    std::string verify_dir;
    auto* ve = app.add_subcommand("verify", "Recompute the digests listed in a manifest");
    ve->add_option("dir", verify_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);
    try {
        if (sim->parsed()) return cmd_simulate(so);
        if (ext->parsed()) return cmd_extract(eo);
        if (ev->parsed()) return cmd_evaluate(vo);
        if (br->parsed()) return cmd_bridge_check(bo);
        if (ve->parsed()) return cmd_verify(verify_dir);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
