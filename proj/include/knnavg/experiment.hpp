#ifndef KNNAVG_EXPERIMENT_HPP
#define KNNAVG_EXPERIMENT_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"

#include "knnavg/core.hpp"
#include "knnavg/io.hpp"
#include "knnavg/knn_avg.hpp"
#include "knnavg/metrics.hpp"
#include "knnavg/nsga2.hpp"
#include "knnavg/problems.hpp"
#include "knnavg/rng.hpp"
#include "knnavg/stats.hpp"

namespace knnavg::experiment {

using json = nlohmann::json;

// -- grid ------------------------------------------------------------------

struct ExperimentGrid {
    std::vector<problems::ZdtVariant> problems{ problems::ZdtVariant::Zdt1 };
    std::vector<std::size_t> n_vars{ 2 };
    std::vector<double> sigmas{ 0.1 };
    std::vector<std::size_t> pop_sizes{ 10 };
    std::vector<std::size_t> ks{ 10 };
    std::vector<double> max_dists{ 0.25 };
    std::size_t repetitions{ 30 };
    std::size_t generations{ 100 };
    std::uint64_t base_seed{ 2021 };
    knn::WeightShape weights{ knn::WeightShape::Squared };
    nsga2::GaConfig ga{}; // pop_size and generations are taken from the grid
    metrics::Point2 reference_point{ metrics::default_reference_point };
    std::size_t front_samples{ metrics::default_front_samples };

    void validate() const
    {
        require(!problems.empty(), "ExperimentGrid: empty problem list");
        require(!n_vars.empty(), "ExperimentGrid: empty n_vars list");
        require(!sigmas.empty(), "ExperimentGrid: empty sigma list");
        require(!pop_sizes.empty(), "ExperimentGrid: empty pop_size list");
        require(!ks.empty(), "ExperimentGrid: empty k list");
        require(!max_dists.empty(), "ExperimentGrid: empty max_dist list");
        require(repetitions >= 1, "ExperimentGrid: repetitions must be positive");
        require(generations >= 1, "ExperimentGrid: generations must be positive");
        require(front_samples >= 2, "ExperimentGrid: front_samples must be at least 2");
        for (auto n : n_vars) { require(n >= 2, "ExperimentGrid: n_vars must be at least 2"); }
        for (auto s : sigmas) { require(s >= 0.0, "ExperimentGrid: sigma must be nonnegative"); }
        for (auto p : pop_sizes) { require(p >= 2 && p % 2 == 0, "ExperimentGrid: pop sizes must be positive and even"); }
        for (auto k : ks) { require(k >= 1, "ExperimentGrid: k must be positive"); }
        for (auto d : max_dists) { require(d > 0.0, "ExperimentGrid: max_dist must be positive"); }
    }
};

/// The full configuration product of the published study.
inline auto paper_grid() -> ExperimentGrid
{
    ExperimentGrid g;
    g.problems = { problems::ZdtVariant::Zdt1, problems::ZdtVariant::Zdt2, problems::ZdtVariant::Zdt3 };
    g.n_vars = { 2, 4, 10 };
    g.sigmas = { 0.0, 0.05, 0.1, 0.25, 0.5 };
    g.pop_sizes = { 10, 20 };
    g.ks = { 10, 25, 50, 100, 1000 };
    g.max_dists = { 0.25, 0.5, 1.0, 2.0, 4.0 };
    g.repetitions = 30;
    g.generations = 100;
    return g;
}

/// One optimization run. `knn` empty means the baseline arm.
struct RunConfig {
    problems::ZdtVariant problem{ problems::ZdtVariant::Zdt1 };
    std::size_t n_vars{ 2 };
    double sigma{ 0.1 };
    std::size_t pop_size{ 10 };
    std::size_t generations{ 100 };
    std::optional<knn::KnnConfig> knn;
    std::size_t repetition{};
    std::uint64_t seed{};
    nsga2::GaConfig ga{};
    metrics::Point2 reference_point{ metrics::default_reference_point };
    std::size_t front_samples{ metrics::default_front_samples };

    [[nodiscard]] auto is_baseline() const -> bool { return !knn.has_value(); }
    [[nodiscard]] auto k() const -> std::size_t { return knn ? knn->k : 1; }
    [[nodiscard]] auto max_dist() const -> double { return knn ? knn->max_dist : 0.0; }

    /// Benchmark cell: everything except the arm and the repetition.
    [[nodiscard]] auto cell_key() const -> std::string
    {
        return problems::to_string(problem) + ";n=" + std::to_string(n_vars) + ";sigma=" + io::format_double(sigma)
            + ";pop=" + std::to_string(pop_size) + ";gens=" + std::to_string(generations);
    }

    [[nodiscard]] auto arm_key() const -> std::string
    {
        if (!knn) { return "baseline"; }
        return "knn;k=" + std::to_string(knn->k) + ";md=" + io::format_double(knn->max_dist) + ";w=" + knn::to_string(knn->weights);
    }

    [[nodiscard]] auto fingerprint() const -> std::string
    {
        return cell_key() + ";" + arm_key() + ";rep=" + std::to_string(repetition);
    }

    [[nodiscard]] auto ga_config() const -> nsga2::GaConfig
    {
        auto g = ga;
        g.pop_size = pop_size;
        g.generations = generations;
        return g;
    }

    [[nodiscard]] auto evaluator() const -> nsga2::Evaluator
    {
        if (knn) { return nsga2::KnnAveraged{ *knn }; }
        return nsga2::PlainNoisy{};
    }
};

/// Seed of repetition `rep` in a benchmark cell:
///   mix64(mix64(base_seed) ^ fnv1a64(cell_key) ^ mix64(rep))
/// The arm is not part of the key, so every kNN setting and the baseline
/// share seeds repetition by repetition.
inline auto run_seed(std::uint64_t base_seed, std::string const& cell_key, std::size_t rep) -> std::uint64_t
{
    return mix64(mix64(base_seed) ^ fnv1a64(cell_key) ^ mix64(static_cast<std::uint64_t>(rep)));
}

struct GridCount {
    std::size_t cells{};
    std::size_t knn_runs{};
    std::size_t baseline_runs{};

    [[nodiscard]] auto total() const -> std::size_t { return knn_runs + baseline_runs; }
};

inline auto count_runs(ExperimentGrid const& grid) -> GridCount
{
    GridCount c;
    c.cells = grid.problems.size() * grid.n_vars.size() * grid.sigmas.size() * grid.pop_sizes.size();
    c.knn_runs = c.cells * grid.ks.size() * grid.max_dists.size() * grid.repetitions;
    c.baseline_runs = c.cells * grid.repetitions;
    return c;
}

/// Every run of the grid, ordered by problem, n_vars, sigma, pop_size, arm
/// (baseline first, then k, then max_dist) and repetition.
inline auto expand_grid(ExperimentGrid const& grid) -> std::vector<RunConfig>
{
    grid.validate();
    std::vector<RunConfig> runs;
    runs.reserve(count_runs(grid).total());
    for (auto problem : grid.problems) {
        for (auto n : grid.n_vars) {
            for (auto sigma : grid.sigmas) {
                for (auto pop : grid.pop_sizes) {
                    RunConfig base;
                    base.problem = problem;
                    base.n_vars = n;
                    base.sigma = sigma;
                    base.pop_size = pop;
                    base.generations = grid.generations;
                    base.ga = grid.ga;
                    base.reference_point = grid.reference_point;
                    base.front_samples = grid.front_samples;
                    auto const cell = base.cell_key();

                    std::vector<std::optional<knn::KnnConfig>> arms{ std::nullopt };
                    for (auto k : grid.ks) {
                        for (auto md : grid.max_dists) { arms.emplace_back(knn::KnnConfig{ k, md, grid.weights }); }
                    }
                    for (auto const& arm : arms) {
                        for (std::size_t rep = 0; rep < grid.repetitions; ++rep) {
                            RunConfig rc = base;
                            rc.knn = arm;
                            rc.repetition = rep;
                            rc.seed = run_seed(grid.base_seed, cell, rep);
                            runs.push_back(std::move(rc));
                        }
                    }
                }
            }
        }
    }
    return runs;
}

// -- single runs -----------------------------------------------------------

struct RunResult {
    RunConfig config;
    std::string fingerprint;
    std::uint64_t seed{};
    std::vector<Solution> final_set; // empty when loaded back from CSV
    std::size_t final_size{};
    metrics::MetricReport metrics;
    double duration_seconds{};
};

/// Same run, same outcome. Wall-clock time and the in-memory final set are ignored.
inline auto same_outcome(RunResult const& a, RunResult const& b) -> bool
{
    return a.fingerprint == b.fingerprint && a.seed == b.seed && a.final_size == b.final_size && a.metrics == b.metrics;
}

struct RunDetail {
    RunResult summary;
    nsga2::RunResult trajectory;
};

inline auto execute_run(RunConfig const& rc) -> RunDetail
{
    auto const start = std::chrono::steady_clock::now();
    problems::ZdtProblem const problem(rc.problem, rc.n_vars);
    problems::NoiseSpec const noise{ rc.sigma, {} };
    auto const front = problem.true_front(rc.front_samples);

    nsga2::RunOptions opts;
    opts.reference_point = rc.reference_point;
    opts.front = front;

    RngStream rng(rc.seed);
    auto trajectory = nsga2::run_optimization(problem, noise, rc.evaluator(), rc.ga_config(), rng, opts);

    RunResult r;
    r.config = rc;
    r.fingerprint = rc.fingerprint();
    r.seed = rc.seed;
    r.final_set = trajectory.final_set;
    r.final_size = trajectory.final_set.size();
    r.metrics = metrics::evaluate_final_set(trajectory.final_set, problem, front, rc.reference_point);
    r.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return { std::move(r), std::move(trajectory) };
}

// -- per-run CSV -------------------------------------------------------------

inline auto runs_csv_header() -> std::string
{
    return "fingerprint,problem,n_vars,sigma,pop_size,generations,arm,k,max_dist,weights,repetition,seed,"
           "hv,igd,delta_f,ref_f1,ref_f2,front_samples,final_size,duration_s";
}

inline auto to_csv_row(RunResult const& r) -> std::string
{
    auto const& c = r.config;
    return io::join_csv({ r.fingerprint, problems::to_string(c.problem), std::to_string(c.n_vars), io::format_double(c.sigma),
        std::to_string(c.pop_size), std::to_string(c.generations), c.is_baseline() ? "baseline" : "knn", std::to_string(c.k()),
        io::format_double(c.max_dist()), c.knn ? knn::to_string(c.knn->weights) : "none", std::to_string(c.repetition),
        std::to_string(r.seed), io::format_double(r.metrics.hv_mean_adjusted), io::format_double(r.metrics.igd_mean_adjusted),
        io::format_double(r.metrics.delta_f), io::format_double(r.metrics.reference_point[0]),
        io::format_double(r.metrics.reference_point[1]), std::to_string(r.metrics.front_sample_size), std::to_string(r.final_size),
        io::format_double(r.duration_seconds) });
}

inline auto parse_csv_row(std::string_view line) -> RunResult
{
    auto const f = io::split_csv(line);
    require(f.size() == 20, "runs.csv: expected 20 fields, got " + std::to_string(f.size()));
    RunResult r;
    auto& c = r.config;
    c.problem = problems::parse_variant(f[1]);
    c.n_vars = io::parse_u64(f[2]);
    c.sigma = io::parse_double(f[3]);
    c.pop_size = io::parse_u64(f[4]);
    c.generations = io::parse_u64(f[5]);
    if (f[6] == "knn") {
        c.knn = knn::KnnConfig{ io::parse_u64(f[7]), io::parse_double(f[8]), knn::parse_weight_shape(f[9]) };
    } else {
        require(f[6] == "baseline", "runs.csv: unknown arm '" + std::string(f[6]) + "'");
    }
    c.repetition = io::parse_u64(f[10]);
    c.seed = r.seed = io::parse_u64(f[11]);
    r.metrics.hv_mean_adjusted = io::parse_double(f[12]);
    r.metrics.igd_mean_adjusted = io::parse_double(f[13]);
    r.metrics.delta_f = io::parse_double(f[14]);
    r.metrics.reference_point = { io::parse_double(f[15]), io::parse_double(f[16]) };
    r.metrics.front_sample_size = io::parse_u64(f[17]);
    c.reference_point = r.metrics.reference_point;
    c.front_samples = r.metrics.front_sample_size;
    r.final_size = io::parse_u64(f[18]);
    r.duration_seconds = io::parse_double(f[19]);
    r.fingerprint = std::string(f[0]);
    require(r.fingerprint == c.fingerprint(), "runs.csv: fingerprint does not match its configuration columns");
    return r;
}

inline auto to_csv(std::span<RunResult const> results) -> std::string
{
    std::string out = runs_csv_header() + "\n";
    for (auto const& r : results) { out += to_csv_row(r) + "\n"; }
    return out;
}

inline auto parse_csv(std::istream& in) -> std::vector<RunResult>
{
    std::string line;
    require(static_cast<bool>(std::getline(in, line)) && line == runs_csv_header(), "runs.csv: missing or unexpected header");
    std::vector<RunResult> out;
    while (std::getline(in, line)) {
        if (!line.empty()) { out.push_back(parse_csv_row(line)); }
    }
    return out;
}

inline auto load_runs(std::filesystem::path const& file) -> std::vector<RunResult>
{
    std::ifstream in(file);
    require(in.good(), "cannot open " + file.string());
    return parse_csv(in);
}

// -- JSON documents -----------------------------------------------------------

inline auto to_json(Solution const& s) -> json
{
    json j{ { "variables", s.variables }, { "objectives", s.objectives } };
    if (s.raw_objectives) { j["raw_objectives"] = *s.raw_objectives; }
    return j;
}

inline auto config_json(RunConfig const& c) -> json
{
    json evaluator = c.knn ? json{ { "type", "knn" }, { "k", c.knn->k }, { "max_dist", c.knn->max_dist }, { "weights", knn::to_string(c.knn->weights) } }
                           : json{ { "type", "plain" } };
    auto const ga = c.ga_config();
    return { { "problem", problems::to_string(c.problem) }, { "n_vars", c.n_vars }, { "sigma", c.sigma }, { "pop_size", c.pop_size },
        { "generations", c.generations }, { "repetition", c.repetition }, { "evaluator", evaluator },
        { "ga",
            { { "crossover_prob", ga.crossover_prob }, { "mutation_prob", ga.mutation_prob }, { "eta_crossover", ga.eta_crossover },
                { "eta_mutation", ga.eta_mutation }, { "crossover_var_prob", ga.crossover_var_prob } } },
        { "reference_point", c.reference_point }, { "front_samples", c.front_samples } };
}

/// Full record of one run: configuration, seed, final set with raw, reported
/// and expected objectives, per-generation trace and the evaluation history.
inline auto run_document(RunDetail const& run) -> json
{
    auto const& s = run.summary;
    problems::ZdtProblem const problem(s.config.problem, s.config.n_vars);

    json final_set = json::array();
    for (auto const& sol : s.final_set) {
        auto j = to_json(sol);
        j["mean_objectives"] = problems::mean_objectives(problem, sol);
        final_set.push_back(std::move(j));
    }

    json trace = json::array();
    for (auto const& g : run.trajectory.trace) {
        trace.push_back({ { "generation", g.generation }, { "front_size", g.front_size }, { "hv", g.hv },
            { "igd", g.igd ? json(*g.igd) : json(nullptr) }, { "delta_f", g.delta_f }, { "first_front_truncated", g.first_front_truncated } });
    }

    json records = json::array();
    auto const& h = run.trajectory.history;
    for (std::size_t i = 0; i < h.size(); ++i) {
        records.push_back({ { "generation", h[i].generation }, { "variables", h[i].variables }, { "raw_objectives", h[i].raw_objectives },
            { "objectives", run.trajectory.history_objectives[i] } });
    }

    return { { "fingerprint", s.fingerprint }, { "seed", s.seed }, { "config", config_json(s.config) },
        { "metrics",
            { { "hv", s.metrics.hv_mean_adjusted }, { "igd", s.metrics.igd_mean_adjusted }, { "delta_f", s.metrics.delta_f },
                { "reference_point", s.metrics.reference_point }, { "front_sample_size", s.metrics.front_sample_size } } },
        { "final_set", final_set }, { "trace", trace }, { "history", { { "count", h.size() }, { "records", records } } },
        { "duration_seconds", s.duration_seconds } };
}

/// Evaluation history of a run document as CSV:
/// generation, x1..xn, raw_f1..raw_fm, f1..fm (objectives handed to the optimizer).
inline auto history_csv(json const& doc) -> std::string
{
    require(doc.contains("history") && doc["history"].contains("records"), "run file has no history records");
    auto const& records = doc["history"]["records"];
    std::ostringstream out;
    if (records.empty()) { return "generation\n"; }
    auto const n = records[0]["variables"].size();
    auto const m = records[0]["raw_objectives"].size();
    out << "generation";
    for (std::size_t i = 1; i <= n; ++i) { out << ",x" << i; }
    for (std::size_t i = 1; i <= m; ++i) { out << ",raw_f" << i; }
    for (std::size_t i = 1; i <= m; ++i) { out << ",f" << i; }
    out << "\n";
    for (auto const& r : records) {
        out << r["generation"].get<std::size_t>();
        for (auto const& v : r["variables"]) { out << ',' << io::format_double(v.get<double>()); }
        for (auto const& v : r["raw_objectives"]) { out << ',' << io::format_double(v.get<double>()); }
        for (auto const& v : r["objectives"]) { out << ',' << io::format_double(v.get<double>()); }
        out << "\n";
    }
    return out.str();
}

// -- grid configuration file --------------------------------------------------

namespace detail {
    inline void check_keys(json const& j, std::set<std::string> const& allowed, std::string const& where)
    {
        require(j.is_object(), where + " must be an object");
        for (auto const& [key, _] : j.items()) {
            require(allowed.contains(key), "unknown key '" + key + "' in " + where);
        }
    }
} // namespace detail

/// Reads a grid from JSON. Missing keys keep their defaults; unknown keys
/// are rejected.
inline auto grid_from_json(json const& j) -> ExperimentGrid
{
    detail::check_keys(j,
        { "problems", "n_vars", "sigmas", "pop_sizes", "ks", "max_dists", "repetitions", "generations", "base_seed", "weights", "ga",
            "metrics" },
        "grid config");
    ExperimentGrid g;
    try {
        if (j.contains("problems")) {
            g.problems.clear();
            for (auto const& p : j["problems"]) { g.problems.push_back(problems::parse_variant(p.get<std::string>())); }
        }
        if (j.contains("n_vars")) { g.n_vars = j["n_vars"].get<std::vector<std::size_t>>(); }
        if (j.contains("sigmas")) { g.sigmas = j["sigmas"].get<std::vector<double>>(); }
        if (j.contains("pop_sizes")) { g.pop_sizes = j["pop_sizes"].get<std::vector<std::size_t>>(); }
        if (j.contains("ks")) { g.ks = j["ks"].get<std::vector<std::size_t>>(); }
        if (j.contains("max_dists")) { g.max_dists = j["max_dists"].get<std::vector<double>>(); }
        if (j.contains("repetitions")) { g.repetitions = j["repetitions"].get<std::size_t>(); }
        if (j.contains("generations")) { g.generations = j["generations"].get<std::size_t>(); }
        if (j.contains("base_seed")) { g.base_seed = j["base_seed"].get<std::uint64_t>(); }
        if (j.contains("weights")) { g.weights = knn::parse_weight_shape(j["weights"].get<std::string>()); }
        if (j.contains("ga")) {
            auto const& ga = j["ga"];
            detail::check_keys(ga, { "crossover_prob", "mutation_prob", "eta_crossover", "eta_mutation", "crossover_var_prob" }, "ga");
            g.ga.crossover_prob = ga.value("crossover_prob", g.ga.crossover_prob);
            g.ga.mutation_prob = ga.value("mutation_prob", g.ga.mutation_prob);
            g.ga.eta_crossover = ga.value("eta_crossover", g.ga.eta_crossover);
            g.ga.eta_mutation = ga.value("eta_mutation", g.ga.eta_mutation);
            g.ga.crossover_var_prob = ga.value("crossover_var_prob", g.ga.crossover_var_prob);
        }
        if (j.contains("metrics")) {
            auto const& m = j["metrics"];
            detail::check_keys(m, { "reference_point", "front_samples" }, "metrics");
            if (m.contains("reference_point")) {
                auto const ref = m["reference_point"].get<std::vector<double>>();
                require(ref.size() == 2, "metrics.reference_point must have two entries");
                g.reference_point = { ref[0], ref[1] };
            }
            g.front_samples = m.value("front_samples", g.front_samples);
        }
    } catch (json::exception const& e) {
        throw ContractViolation(std::string("grid config: ") + e.what());
    }
    g.validate();
    return g;
}

inline auto grid_to_json(ExperimentGrid const& g) -> json
{
    std::vector<std::string> names;
    for (auto p : g.problems) { names.push_back(problems::to_string(p)); }
    return { { "problems", names }, { "n_vars", g.n_vars }, { "sigmas", g.sigmas }, { "pop_sizes", g.pop_sizes }, { "ks", g.ks },
        { "max_dists", g.max_dists }, { "repetitions", g.repetitions }, { "generations", g.generations }, { "base_seed", g.base_seed },
        { "weights", knn::to_string(g.weights) },
        { "ga",
            { { "crossover_prob", g.ga.crossover_prob }, { "mutation_prob", g.ga.mutation_prob }, { "eta_crossover", g.ga.eta_crossover },
                { "eta_mutation", g.ga.eta_mutation }, { "crossover_var_prob", g.ga.crossover_var_prob } } },
        { "metrics", { { "reference_point", g.reference_point }, { "front_samples", g.front_samples } } } };
}

inline auto load_grid(std::filesystem::path const& file) -> ExperimentGrid
{
    std::ifstream in(file);
    require(in.good(), "cannot open config " + file.string());
    json j;
    try {
        j = json::parse(in);
    } catch (json::exception const& e) {
        throw ContractViolation("config " + file.string() + ": " + e.what());
    }
    return grid_from_json(j);
}

// -- grid execution -------------------------------------------------------------

struct GridOptions {
    std::size_t parallelism{ 1 };
    std::filesystem::path out_dir; // empty: keep results in memory only
    bool history_dumps{ false };   // write runs/<n>.json per run
    // Called on the worker thread before each run. An exception thrown here
    // is recorded as a failure of that run.
    std::function<void(RunConfig const&)> before_run;
    // Called (serialized) after each completed run.
    std::function<void(RunResult const&, std::size_t done, std::size_t total)> on_complete;
};

struct RunFailure {
    std::string fingerprint;
    std::string message;
};

struct GridOutcome {
    std::vector<RunResult> results; // grid order
    std::vector<RunFailure> failures;
    std::size_t resumed{};
    std::size_t executed{};
};

inline auto runs_file(std::filesystem::path const& dir) -> std::filesystem::path { return dir / "runs.csv"; }

namespace detail {
    // Loads what a previous (possibly interrupted) invocation persisted. A
    // torn trailing line is dropped and the file rewritten without it.
    inline auto resume_from(std::filesystem::path const& file) -> std::vector<RunResult>
    {
        std::vector<RunResult> kept;
        if (!std::filesystem::exists(file)) { return kept; }
        std::ifstream in(file);
        std::string line;
        if (!std::getline(in, line)) { return kept; }
        require(line == runs_csv_header(), file.string() + ": unexpected header");
        bool damaged = false;
        while (std::getline(in, line)) {
            if (line.empty()) { continue; }
            try {
                kept.push_back(parse_csv_row(line));
            } catch (ContractViolation const&) {
                damaged = true;
            }
        }
        in.close();
        if (damaged) {
            std::ofstream out(file, std::ios::trunc);
            out << to_csv(kept);
        }
        return kept;
    }
} // namespace detail

/// Runs every configuration of the grid with up to `parallelism` worker
/// threads. With an output directory, each finished run is appended to
/// runs.csv immediately and runs already present there are skipped.
inline auto run_grid(ExperimentGrid const& grid, GridOptions const& options = {}) -> GridOutcome
{
    require(options.parallelism >= 1, "run_grid: parallelism must be at least 1");
    auto const configs = expand_grid(grid);

    GridOutcome outcome;
    std::vector<std::optional<RunResult>> slots(configs.size());
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < configs.size(); ++i) { position.emplace(configs[i].fingerprint(), i); }

    std::ofstream sink;
    std::ofstream failure_sink;
    if (!options.out_dir.empty()) {
        std::filesystem::create_directories(options.out_dir);
        auto const file = runs_file(options.out_dir);
        for (auto& r : detail::resume_from(file)) {
            auto const it = position.find(r.fingerprint);
            if (it == position.end()) { continue; }
            require(r.seed == configs[it->second].seed,
                "run_grid: " + file.string() + " holds '" + r.fingerprint + "' with a different seed (another base_seed?)");
            if (!slots[it->second]) {
                slots[it->second] = std::move(r);
                ++outcome.resumed;
            }
        }
        bool const fresh = !std::filesystem::exists(file) || std::filesystem::file_size(file) == 0;
        sink.open(file, std::ios::app);
        require(sink.good(), "run_grid: cannot write " + file.string());
        if (fresh) { sink << runs_csv_header() << '\n' << std::flush; }
        failure_sink.open(options.out_dir / "failures.csv", std::ios::trunc);
        failure_sink << "fingerprint,message\n" << std::flush;
    }

    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        if (!slots[i]) { pending.push_back(i); }
    }

    std::mutex sink_mutex;
    std::atomic<std::size_t> next{ 0 };
    std::size_t done = outcome.resumed;
    auto const worker = [&] {
        while (true) {
            auto const job = next.fetch_add(1);
            if (job >= pending.size()) { return; }
            auto const idx = pending[job];
            auto const& rc = configs[idx];
            try {
                if (options.before_run) { options.before_run(rc); }
                auto run = execute_run(rc);
                std::string dump;
                if (options.history_dumps && !options.out_dir.empty()) { dump = run_document(run).dump(); }
                std::lock_guard lock(sink_mutex);
                if (!dump.empty()) {
                    auto const dump_dir = options.out_dir / "runs";
                    std::filesystem::create_directories(dump_dir);
                    std::ofstream file(dump_dir / (std::to_string(idx) + ".json"));
                    file << dump << '\n';
                    require(file.good(), "cannot write history dump for " + rc.fingerprint());
                }
                if (sink.is_open()) { sink << to_csv_row(run.summary) << '\n' << std::flush; }
                slots[idx] = std::move(run.summary);
                ++outcome.executed;
                ++done;
                if (options.on_complete) { options.on_complete(*slots[idx], done, configs.size()); }
            } catch (std::exception const& e) {
                std::lock_guard lock(sink_mutex);
                outcome.failures.push_back({ rc.fingerprint(), e.what() });
                if (failure_sink.is_open()) {
                    std::string msg = e.what();
                    std::ranges::replace(msg, ',', ';');
                    std::ranges::replace(msg, '\n', ' ');
                    failure_sink << rc.fingerprint() << ',' << msg << '\n' << std::flush;
                }
            }
        }
    };

    auto const threads = std::min(options.parallelism, std::max<std::size_t>(pending.size(), 1));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) { pool.emplace_back(worker); }
    }

    for (auto& s : slots) {
        if (s) { outcome.results.push_back(std::move(*s)); }
    }
    std::ranges::sort(outcome.failures, {}, &RunFailure::fingerprint);
    return outcome;
}

// -- reporting ------------------------------------------------------------------

struct VerdictTable {
    std::string label;          // "sigma=0.1" or "All"
    std::optional<double> sigma; // empty for the pooled table
    std::vector<stats::ComparisonVerdict> verdicts; // by (k, max_dist, metric)

    [[nodiscard]] auto find(std::size_t k, double max_dist, stats::Metric metric) const -> stats::ComparisonVerdict const&
    {
        for (auto const& v : verdicts) {
            if (v.k == k && v.max_dist == max_dist && v.metric == metric) { return v; }
        }
        throw ContractViolation("no verdict for knn(" + std::to_string(k) + ", " + io::format_double(max_dist) + ") in " + label);
    }
};

struct Report {
    double alpha{ 0.05 };
    std::vector<VerdictTable> tables;

    [[nodiscard]] auto table(std::string const& label) const -> VerdictTable const&
    {
        for (auto const& t : tables) {
            if (t.label == label) { return t; }
        }
        throw ContractViolation("no verdict table '" + label + "'");
    }

    friend auto operator==(Report const& a, Report const& b) -> bool
    {
        if (a.alpha != b.alpha || a.tables.size() != b.tables.size()) { return false; }
        for (std::size_t i = 0; i < a.tables.size(); ++i) {
            if (a.tables[i].label != b.tables[i].label || a.tables[i].verdicts != b.tables[i].verdicts) { return false; }
        }
        return true;
    }
};

inline constexpr std::array<stats::Metric, 3> reported_metrics{ stats::Metric::Hv, stats::Metric::Igd, stats::Metric::DeltaF };

inline auto sigma_label(double sigma) -> std::string { return "sigma=" + io::format_double(sigma); }

/// Verdict tables: one per noise level plus "All", which pools every cell
/// with sigma > 0. Each kNN run is paired with the baseline run of the same
/// cell and repetition.
///
/// Every cell must have a baseline run for every repetition, and every kNN
/// setting present anywhere must be complete in every cell; otherwise the
/// missing cells or fingerprints are reported as a contract violation.
inline auto report(std::span<RunResult const> results, double alpha = 0.05) -> Report
{
    require(alpha > 0.0 && alpha < 1.0, "report: alpha must lie in (0,1)");
    require(!results.empty(), "report: no results");

    using Setting = std::tuple<std::size_t, double, knn::WeightShape>;
    std::map<std::string, RunConfig> cells;                   // cell key -> representative config
    std::set<std::size_t> reps;
    std::set<Setting> settings;
    std::map<std::pair<std::string, std::size_t>, RunResult const*> baseline;
    std::map<std::tuple<Setting, std::string, std::size_t>, RunResult const*> knn_runs;

    for (auto const& r : results) {
        auto const cell = r.config.cell_key();
        cells.emplace(cell, r.config);
        reps.insert(r.config.repetition);
        if (r.config.is_baseline()) {
            baseline[{ cell, r.config.repetition }] = &r;
        } else {
            Setting const s{ r.config.knn->k, r.config.knn->max_dist, r.config.knn->weights };
            settings.insert(s);
            knn_runs[{ s, cell, r.config.repetition }] = &r;
        }
    }

    std::vector<std::string> missing_baseline;
    std::vector<std::string> missing_knn;
    for (auto const& [cell, rc] : cells) {
        for (auto rep : reps) {
            if (!baseline.contains({ cell, rep })) { missing_baseline.push_back(cell + " (rep " + std::to_string(rep) + ")"); }
            for (auto const& s : settings) {
                if (!knn_runs.contains({ s, cell, rep })) {
                    RunConfig probe = rc;
                    probe.knn = knn::KnnConfig{ std::get<0>(s), std::get<1>(s), std::get<2>(s) };
                    probe.repetition = rep;
                    missing_knn.push_back(probe.fingerprint());
                }
            }
        }
    }
    auto const joined = [](std::vector<std::string> const& v) {
        std::string out;
        for (auto const& s : v) { out += "\n  " + s; }
        return out;
    };
    require(missing_baseline.empty(), "report: missing baseline arm for cell(s):" + joined(missing_baseline));
    require(missing_knn.empty(), "report: missing kNN runs:" + joined(missing_knn));
    require(!settings.empty(), "report: no kNN runs to compare");

    std::set<double> sigmas;
    for (auto const& [cell, rc] : cells) { sigmas.insert(rc.sigma); }

    auto const build = [&](std::string label, std::optional<double> sigma, auto const& include) {
        VerdictTable table{ std::move(label), sigma, {} };
        for (auto const& s : settings) {
            std::vector<metrics::MetricReport> a;
            std::vector<metrics::MetricReport> b;
            for (auto const& [cell, rc] : cells) {
                if (!include(rc)) { continue; }
                for (auto rep : reps) {
                    a.push_back(knn_runs.at({ s, cell, rep })->metrics);
                    b.push_back(baseline.at({ cell, rep })->metrics);
                }
            }
            for (auto m : reported_metrics) {
                table.verdicts.push_back(stats::compare_setting(a, b, m, alpha, std::get<0>(s), std::get<1>(s)));
            }
        }
        return table;
    };

    Report rep;
    rep.alpha = alpha;
    for (double sigma : sigmas) {
        rep.tables.push_back(build(sigma_label(sigma), sigma, [sigma](RunConfig const& rc) { return rc.sigma == sigma; }));
    }
    if (std::ranges::any_of(sigmas, [](double s) { return s > 0.0; })) {
        rep.tables.push_back(build("All", std::nullopt, [](RunConfig const& rc) { return rc.sigma > 0.0; }));
    }
    return rep;
}

inline auto verdicts_csv(Report const& rep) -> std::string
{
    std::string out = "table,k,max_dist,metric,pairs,p_value,a12,verdict,insufficient_data\n";
    for (auto const& t : rep.tables) {
        for (auto const& v : t.verdicts) {
            out += io::join_csv({ t.label, std::to_string(v.k), io::format_double(v.max_dist), stats::to_string(v.metric),
                       std::to_string(v.pairs), io::format_double(v.p_value), io::format_double(v.a12), stats::to_string(v.verdict),
                       v.insufficient_data ? "1" : "0" })
                + "\n";
        }
    }
    return out;
}

/// Aligned text tables: rows knn(k, MD), columns HV / IGD / delta_f,
/// cells ✓ (better), ≡ (no significant difference), ✗ (worse).
inline auto verdicts_text(Report const& rep) -> std::string
{
    std::ostringstream out;
    out << "kNN-Avg vs baseline (Wilcoxon signed-rank, alpha = " << io::format_double(rep.alpha) << ", direction from A12)\n";
    for (auto const& t : rep.tables) {
        out << "\n[" << t.label << "]\n";
        out << "App.                 HV   IGD  Δf\n";
        for (std::size_t i = 0; i + 2 < t.verdicts.size(); i += 3) {
            auto const& v = t.verdicts[i];
            std::string name = "knn(" + std::to_string(v.k) + ", " + io::format_double(v.max_dist) + ")";
            name.resize(std::max<std::size_t>(name.size(), 20), ' ');
            out << name << " ";
            for (std::size_t j = 0; j < 3; ++j) { out << ' ' << stats::symbol(t.verdicts[i + j].verdict) << "   "; }
            out << "\n";
        }
    }
    out << "\n✓: kNN-Avg significantly better  ≡: no significant difference  ✗: baseline significantly better\n";
    return out.str();
}

/// Per-run metric triples grouped by (k, max_dist); the baseline is k = 1.
inline auto plot_data_csv(std::span<RunResult const> results) -> std::string
{
    std::vector<RunResult const*> rows;
    for (auto const& r : results) { rows.push_back(&r); }
    std::ranges::stable_sort(rows, [](RunResult const* a, RunResult const* b) {
        return std::tuple(a->config.k(), a->config.max_dist()) < std::tuple(b->config.k(), b->config.max_dist());
    });
    std::string out = "k,max_dist,problem,n_vars,sigma,pop_size,repetition,hv,igd,delta_f\n";
    for (auto const* r : rows) {
        auto const& c = r->config;
        out += io::join_csv({ std::to_string(c.k()), io::format_double(c.max_dist()), problems::to_string(c.problem), std::to_string(c.n_vars),
                   io::format_double(c.sigma), std::to_string(c.pop_size), std::to_string(c.repetition),
                   io::format_double(r->metrics.hv_mean_adjusted), io::format_double(r->metrics.igd_mean_adjusted),
                   io::format_double(r->metrics.delta_f) })
            + "\n";
    }
    return out;
}

inline void write_report(Report const& rep, std::span<RunResult const> results, std::filesystem::path const& dir)
{
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "verdicts.csv") << verdicts_csv(rep);
    std::ofstream(dir / "verdicts.txt") << verdicts_text(rep);
    std::ofstream(dir / "plot_data.csv") << plot_data_csv(results);
}

} // namespace knnavg::experiment

#endif
