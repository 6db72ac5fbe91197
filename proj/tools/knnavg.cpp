#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "knnavg/experiment.hpp"

namespace {

namespace ex = knnavg::experiment;
namespace fs = std::filesystem;

constexpr int exit_ok = 0;
constexpr int exit_contract = 1;
constexpr int exit_partial = 2;

struct GridOverrides {
    std::vector<std::string> problems;
    std::vector<std::size_t> n_vars;
    std::vector<double> sigmas;
    std::vector<std::size_t> pop_sizes;
    std::vector<std::size_t> ks;
    std::vector<double> max_dists;
    std::optional<std::size_t> repetitions;
    std::optional<std::size_t> generations;
    std::optional<std::uint64_t> base_seed;
    std::optional<std::string> weights;
    std::optional<double> crossover_prob;
    std::optional<double> mutation_prob;
    std::optional<double> eta_crossover;
    std::optional<double> eta_mutation;
    std::optional<double> crossover_var_prob;
    std::vector<double> reference_point;
    std::optional<std::size_t> front_samples;

    void apply(ex::ExperimentGrid& g) const
    {
        if (!problems.empty()) {
            g.problems.clear();
            for (auto const& p : problems) { g.problems.push_back(knnavg::problems::parse_variant(p)); }
        }
        if (!n_vars.empty()) { g.n_vars = n_vars; }
        if (!sigmas.empty()) { g.sigmas = sigmas; }
        if (!pop_sizes.empty()) { g.pop_sizes = pop_sizes; }
        if (!ks.empty()) { g.ks = ks; }
        if (!max_dists.empty()) { g.max_dists = max_dists; }
        if (repetitions) { g.repetitions = *repetitions; }
        if (generations) { g.generations = *generations; }
        if (base_seed) { g.base_seed = *base_seed; }
        if (weights) { g.weights = knnavg::knn::parse_weight_shape(*weights); }
        if (crossover_prob) { g.ga.crossover_prob = *crossover_prob; }
        if (mutation_prob) { g.ga.mutation_prob = *mutation_prob; }
        if (eta_crossover) { g.ga.eta_crossover = *eta_crossover; }
        if (eta_mutation) { g.ga.eta_mutation = *eta_mutation; }
        if (crossover_var_prob) { g.ga.crossover_var_prob = *crossover_var_prob; }
        if (!reference_point.empty()) {
            knnavg::require(reference_point.size() == 2, "--ref takes two values");
            g.reference_point = { reference_point[0], reference_point[1] };
        }
        if (front_samples) { g.front_samples = *front_samples; }
        g.validate();
    }

    void attach(CLI::App* cmd)
    {
        cmd->add_option("--problems", problems, "ZDT variants (zdt1 zdt2 zdt3)");
        cmd->add_option("--n-vars", n_vars, "Decision-space dimensions");
        cmd->add_option("--sigmas", sigmas, "Noise standard deviations");
        cmd->add_option("--pop-sizes", pop_sizes, "Population sizes");
        cmd->add_option("--ks", ks, "Neighbour counts");
        cmd->add_option("--max-dists", max_dists, "Maximum SED values");
        cmd->add_option("--reps", repetitions, "Repetitions per setting");
        cmd->add_option("--gens", generations, "Generations per run");
        cmd->add_option("--base-seed", base_seed, "Grid base seed");
        cmd->add_option("--weights", weights, "Neighbour weight shape (squared, linear, uniform)");
        cmd->add_option("--crossover-prob", crossover_prob);
        cmd->add_option("--mutation-prob", mutation_prob);
        cmd->add_option("--eta-crossover", eta_crossover);
        cmd->add_option("--eta-mutation", eta_mutation);
        cmd->add_option("--crossover-var-prob", crossover_var_prob);
        cmd->add_option("--ref", reference_point, "Hypervolume reference point (two values)")->expected(2);
        cmd->add_option("--front-samples", front_samples, "Size of the true-front sample used by IGD");
    }
};

void print_count(ex::ExperimentGrid const& grid, std::ostream& out)
{
    auto const c = ex::count_runs(grid);
    out << "grid: " << c.cells << " benchmark cells x " << grid.repetitions << " repetitions\n"
        << "      " << c.knn_runs << " kNN-Avg runs (" << grid.ks.size() << " k x " << grid.max_dists.size() << " max_dist)\n"
        << "    + " << c.baseline_runs << " baseline runs\n"
        << "    = " << c.total() << " runs\n";
}

auto cmd_run(fs::path const& config, GridOverrides const& overrides, std::size_t parallelism, fs::path const& out, bool history_dumps,
    bool dry_run, bool with_report, double alpha) -> int
{
    auto grid = config.empty() ? ex::ExperimentGrid{} : ex::load_grid(config);
    overrides.apply(grid);
    print_count(grid, std::cerr);
    if (dry_run) { return exit_ok; }

    ex::GridOptions opts;
    opts.parallelism = parallelism;
    opts.out_dir = out;
    opts.history_dumps = history_dumps;
    opts.on_complete = [](ex::RunResult const& r, std::size_t done, std::size_t total) {
        std::cerr << "[" << done << "/" << total << "] " << r.fingerprint << "  hv=" << r.metrics.hv_mean_adjusted
                  << " igd=" << r.metrics.igd_mean_adjusted << " df=" << r.metrics.delta_f << "\n";
    };

    fs::create_directories(out);
    std::ofstream(out / "grid.json") << ex::grid_to_json(grid).dump(2) << '\n';
    auto const outcome = ex::run_grid(grid, opts);
    std::cerr << "executed " << outcome.executed << ", resumed " << outcome.resumed << ", failed " << outcome.failures.size() << "\n";
    for (auto const& f : outcome.failures) { std::cerr << "FAILED " << f.fingerprint << ": " << f.message << "\n"; }

    if (with_report && outcome.failures.empty()) {
        auto const rep = ex::report(outcome.results, alpha);
        ex::write_report(rep, outcome.results, out);
        std::cout << ex::verdicts_text(rep);
    }
    return outcome.failures.empty() ? exit_ok : exit_partial;
}

auto cmd_single(ex::RunConfig rc, bool baseline, bool pretty) -> int
{
    if (baseline) { rc.knn.reset(); }
    auto const run = ex::execute_run(rc);
    auto const doc = ex::run_document(run);
    std::cout << (pretty ? doc.dump(2) : doc.dump()) << '\n';
    return exit_ok;
}

auto cmd_report(fs::path const& in, fs::path out, double alpha) -> int
{
    auto const results = ex::load_runs(ex::runs_file(in));
    auto const rep = ex::report(results, alpha);
    if (out.empty()) { out = in; }
    ex::write_report(rep, results, out);
    std::cout << ex::verdicts_text(rep);
    return exit_ok;
}

auto cmd_front(std::string const& problem, std::size_t count) -> int
{
    knnavg::problems::ZdtProblem const p(knnavg::problems::parse_variant(problem), 2);
    auto const front = p.true_front(count);
    std::cout << "f1,f2\n";
    for (auto const& pt : front.points) {
        std::cout << knnavg::io::format_double(pt[0]) << ',' << knnavg::io::format_double(pt[1]) << '\n';
    }
    return exit_ok;
}

auto cmd_history(fs::path const& in) -> int
{
    std::ifstream file(in);
    knnavg::require(file.good(), "cannot open " + in.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(file);
    } catch (nlohmann::json::exception const& e) {
        throw knnavg::ContractViolation(in.string() + ": " + e.what());
    }
    std::cout << ex::history_csv(doc);
    return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{ "kNN-averaged NSGA-II on noisy ZDT benchmarks" };
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Execute an experiment grid");
    fs::path config;
    std::size_t parallelism = 1;
    fs::path run_out = "results";
    bool history_dumps = false;
    bool dry_run = false;
    bool run_report = false;
    double run_alpha = 0.05;
    GridOverrides overrides;
    run->add_option("--config", config, "Grid definition (JSON)")->check(CLI::ExistingFile);
    run->add_option("--parallelism,-j", parallelism, "Concurrent runs")->check(CLI::PositiveNumber);
    run->add_option("--out", run_out, "Output directory");
    run->add_flag("--history-dumps", history_dumps, "Write a JSON document per run");
    run->add_flag("--dry-run", dry_run, "Print the run count and exit");
    run->add_flag("--report", run_report, "Write verdict tables after the grid completes");
    run->add_option("--alpha", run_alpha, "Significance level for --report");
    overrides.attach(run);

    // single
    auto* single = app.add_subcommand("single", "Execute one run and print it as JSON");
    ex::RunConfig rc;
    rc.knn = knnavg::knn::KnnConfig{};
    std::string problem = "zdt1";
    std::string weights = "squared";
    bool baseline = false;
    bool pretty = false;
    single->add_option("--problem", problem)->capture_default_str();
    single->add_option("--n-vars", rc.n_vars)->capture_default_str();
    single->add_option("--sigma", rc.sigma)->capture_default_str();
    single->add_option("--pop", rc.pop_size)->capture_default_str();
    single->add_option("--gens", rc.generations)->capture_default_str();
    single->add_option("--k", rc.knn->k)->capture_default_str();
    single->add_option("--max-dist", rc.knn->max_dist)->capture_default_str();
    single->add_option("--weights", weights)->capture_default_str();
    single->add_option("--seed", rc.seed)->required();
    single->add_option("--rep", rc.repetition, "Repetition index recorded in the fingerprint");
    single->add_option("--front-samples", rc.front_samples)->capture_default_str();
    single->add_flag("--baseline", baseline, "Plain noisy evaluation instead of kNN-Avg");
    single->add_flag("--pretty", pretty, "Indent the JSON output");

    // report
    auto* rep = app.add_subcommand("report", "Verdict tables from a grid directory");
    fs::path report_in;
    fs::path report_out;
    double alpha = 0.05;
    rep->add_option("--in", report_in, "Grid output directory")->required()->check(CLI::ExistingDirectory);
    rep->add_option("--out", report_out, "Where to write the tables (default: --in)");
    rep->add_option("--alpha", alpha)->capture_default_str();

    // front
    auto* front = app.add_subcommand("front", "True Pareto front sample as CSV");
    std::string front_problem = "zdt1";
    std::size_t count = 1000;
    front->add_option("--problem", front_problem)->capture_default_str();
    front->add_option("--count", count)->capture_default_str();

    // history
    auto* history = app.add_subcommand("history", "Evaluation history of a run document as CSV");
    fs::path history_in;
    history->add_option("--in", history_in, "Run JSON (from `single` or --history-dumps)")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const& e) {
        return app.exit(e) == 0 ? exit_ok : exit_contract;
    }

    try {
        if (*run) { return cmd_run(config, overrides, parallelism, run_out, history_dumps, dry_run, run_report, run_alpha); }
        if (*single) {
            rc.problem = knnavg::problems::parse_variant(problem);
            rc.knn->weights = knnavg::knn::parse_weight_shape(weights);
            return cmd_single(rc, baseline, pretty);
        }
        if (*rep) { return cmd_report(report_in, report_out, alpha); }
        if (*front) { return cmd_front(front_problem, count); }
        if (*history) { return cmd_history(history_in); }
    } catch (knnavg::ContractViolation const& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_contract;
    } catch (std::exception const& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_contract;
    }
    return exit_ok;
}
