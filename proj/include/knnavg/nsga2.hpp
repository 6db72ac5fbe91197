#ifndef KNNAVG_NSGA2_HPP
#define KNNAVG_NSGA2_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "knnavg/core.hpp"
#include "knnavg/knn_avg.hpp"
#include "knnavg/metrics.hpp"
#include "knnavg/problems.hpp"
#include "knnavg/rng.hpp"

namespace knnavg::nsga2 {

struct GaConfig {
    std::size_t pop_size{ 20 };
    std::size_t generations{ 100 };
    double crossover_prob{ 0.9 };
    double mutation_prob{ 1.0 };
    double eta_crossover{ 15.0 };
    double eta_mutation{ 20.0 };
    // Chance that an individual variable is recombined once a pair crosses over.
    double crossover_var_prob{ 0.5 };

    void validate() const
    {
        require(pop_size >= 2 && pop_size % 2 == 0, "GaConfig: pop_size must be a positive even number");
        require(generations >= 1, "GaConfig: generations must be positive");
        require(crossover_prob >= 0.0 && crossover_prob <= 1.0, "GaConfig: crossover_prob must lie in [0,1]");
        require(mutation_prob >= 0.0 && mutation_prob <= 1.0, "GaConfig: mutation_prob must lie in [0,1]");
        require(crossover_var_prob >= 0.0 && crossover_var_prob <= 1.0, "GaConfig: crossover_var_prob must lie in [0,1]");
        require(eta_crossover > 0.0 && eta_mutation > 0.0, "GaConfig: distribution indices must be positive");
    }
};

/// Objectives are the raw noisy sample.
struct PlainNoisy {
    friend auto operator==(PlainNoisy const&, PlainNoisy const&) -> bool = default;
};

/// Objectives are kNN-averaged over the evaluation history.
struct KnnAveraged {
    knn::KnnConfig config;
};

inline auto operator==(KnnAveraged const& a, KnnAveraged const& b) -> bool
{
    return a.config.k == b.config.k && a.config.max_dist == b.config.max_dist && a.config.weights == b.config.weights;
}

using Evaluator = std::variant<PlainNoisy, KnnAveraged>;

// -- ranking --------------------------------------------------------------

/// Deb's fast non-dominated sort. Indices are ascending within each front.
inline auto fast_non_dominated_sort(std::span<std::vector<double> const> objs) -> std::vector<std::vector<std::size_t>>
{
    auto const n = objs.size();
    std::vector<std::vector<std::size_t>> fronts;
    if (n == 0) { return fronts; }

    std::vector<std::vector<std::size_t>> dominated_by_me(n);
    std::vector<std::size_t> domination_count(n, 0);
    for (std::size_t p = 0; p < n; ++p) {
        require(objs[p].size() == objs.front().size(), "fast_non_dominated_sort: mixed objective dimensions");
        for (std::size_t q = p + 1; q < n; ++q) {
            if (dominates(objs[p], objs[q])) {
                dominated_by_me[p].push_back(q);
                ++domination_count[q];
            } else if (dominates(objs[q], objs[p])) {
                dominated_by_me[q].push_back(p);
                ++domination_count[p];
            }
        }
    }

    std::vector<std::size_t> current;
    for (std::size_t p = 0; p < n; ++p) {
        if (domination_count[p] == 0) { current.push_back(p); }
    }
    while (!current.empty()) {
        std::vector<std::size_t> next;
        for (auto p : current) {
            for (auto q : dominated_by_me[p]) {
                if (--domination_count[q] == 0) { next.push_back(q); }
            }
        }
        fronts.push_back(std::move(current));
        std::ranges::sort(next);
        current = std::move(next);
    }
    return fronts;
}

inline auto fast_non_dominated_sort(std::span<Solution const> pop) -> std::vector<std::vector<std::size_t>>
{
    return fast_non_dominated_sort(metrics::objectives_of(pop));
}

/// Crowding distance within one front. Extremes of every objective are
/// infinite; fronts of one or two members are entirely infinite.
inline auto crowding_distance(std::span<std::vector<double> const> front) -> std::vector<double>
{
    auto const n = front.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (n <= 2) { return std::vector<double>(n, inf); }

    std::vector<double> distance(n, 0.0);
    std::vector<std::size_t> order(n);
    auto const m = front.front().size();
    for (std::size_t obj = 0; obj < m; ++obj) {
        std::iota(order.begin(), order.end(), std::size_t{ 0 });
        std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return front[a][obj] < front[b][obj]; });
        double const lo = front[order.front()][obj];
        double const hi = front[order.back()][obj];
        distance[order.front()] = inf;
        distance[order.back()] = inf;
        if (!(hi > lo)) { continue; }
        for (std::size_t i = 1; i + 1 < n; ++i) {
            distance[order[i]] += (front[order[i + 1]][obj] - front[order[i - 1]][obj]) / (hi - lo);
        }
    }
    return distance;
}

inline auto crowding_distance(std::span<Solution const> front) -> std::vector<double>
{
    return crowding_distance(metrics::objectives_of(front));
}

// -- variation ------------------------------------------------------------

/// Simulated binary crossover (bounded form, Deb & Agrawal). With
/// probability 1 - `prob` the parents are returned unchanged; otherwise each
/// variable is recombined with probability `var_prob` and children are
/// clipped into the bounds.
inline auto sbx_crossover(std::span<double const> p1, std::span<double const> p2, double prob, double eta, ProblemSpec const& bounds,
    RngStream& rng, double var_prob = 0.5) -> std::pair<std::vector<double>, std::vector<double>>
{
    require(p1.size() == p2.size() && p1.size() == bounds.n_vars, "sbx_crossover: parent length mismatch");
    std::vector<double> c1(p1.begin(), p1.end());
    std::vector<double> c2(p2.begin(), p2.end());
    if (!(rng.uniform01() < prob)) { return { c1, c2 }; }

    for (std::size_t i = 0; i < p1.size(); ++i) {
        if (!(rng.uniform01() < var_prob)) { continue; }
        if (std::fabs(p1[i] - p2[i]) <= 1e-14) { continue; }

        double const lb = bounds.lower_bounds[i];
        double const ub = bounds.upper_bounds[i];
        double const y1 = std::min(p1[i], p2[i]);
        double const y2 = std::max(p1[i], p2[i]);
        double const u = rng.uniform01();

        auto const betaq = [&](double beta) {
            double const alpha = 2.0 - std::pow(beta, -(eta + 1.0));
            if (u <= 1.0 / alpha) { return std::pow(u * alpha, 1.0 / (eta + 1.0)); }
            return std::pow(1.0 / (2.0 - u * alpha), 1.0 / (eta + 1.0));
        };

        double v1 = 0.5 * ((y1 + y2) - betaq(1.0 + 2.0 * (y1 - lb) / (y2 - y1)) * (y2 - y1));
        double v2 = 0.5 * ((y1 + y2) + betaq(1.0 + 2.0 * (ub - y2) / (y2 - y1)) * (y2 - y1));
        v1 = std::clamp(v1, lb, ub);
        v2 = std::clamp(v2, lb, ub);

        if (rng.coin()) { std::swap(v1, v2); }
        c1[i] = v1;
        c2[i] = v2;
    }
    return { std::move(c1), std::move(c2) };
}

/// Polynomial mutation (bounded form). The offspring is mutated with
/// probability `prob`; each variable of a mutated offspring is perturbed with
/// probability 1 / n_vars.
inline auto polynomial_mutation(std::span<double const> x, double prob, double eta, ProblemSpec const& bounds, RngStream& rng)
    -> std::vector<double>
{
    require(x.size() == bounds.n_vars, "polynomial_mutation: length mismatch");
    std::vector<double> y(x.begin(), x.end());
    if (!(rng.uniform01() < prob)) { return y; }

    double const per_var = 1.0 / static_cast<double>(x.size());
    double const power = 1.0 / (eta + 1.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(rng.uniform01() < per_var)) { continue; }
        double const lb = bounds.lower_bounds[i];
        double const ub = bounds.upper_bounds[i];
        double const span = ub - lb;
        double const d1 = (y[i] - lb) / span;
        double const d2 = (ub - y[i]) / span;
        double const u = rng.uniform01();
        double deltaq = 0.0;
        if (u < 0.5) {
            double const val = 2.0 * u + (1.0 - 2.0 * u) * std::pow(1.0 - d1, eta + 1.0);
            deltaq = std::pow(val, power) - 1.0;
        } else {
            double const val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(1.0 - d2, eta + 1.0);
            deltaq = 1.0 - std::pow(val, power);
        }
        y[i] = std::clamp(y[i] + deltaq * span, lb, ub);
    }
    return y;
}

// -- the generational loop ------------------------------------------------

struct GenerationStats {
    std::size_t generation{};
    std::size_t front_size{};
    double hv{};
    std::optional<double> igd;
    double delta_f{};
    // The merged parent+offspring first front did not fit into the population.
    bool first_front_truncated{};

    friend auto operator==(GenerationStats const&, GenerationStats const&) -> bool = default;
};

struct RunOptions {
    metrics::Point2 reference_point{ metrics::default_reference_point };
    // Front sample for the per-generation IGD trace; no IGD when absent.
    std::optional<problems::ParetoFrontSample> front;
    bool trace{ true };
};

struct RunResult {
    std::vector<Solution> final_set;      // non-dominated members of the last population
    std::vector<Solution> final_population;
    knn::EvaluationHistory history;
    // Objectives handed to the optimizer for each history record.
    std::vector<std::vector<double>> history_objectives;
    std::vector<GenerationStats> trace;

    [[nodiscard]] auto evaluations() const -> std::size_t { return history.size(); }

    friend auto operator==(RunResult const&, RunResult const&) -> bool = default;
};

namespace detail {
    struct Ranked {
        std::vector<Solution> members;
        std::vector<std::size_t> rank;
        std::vector<double> crowding;
        bool first_front_truncated{};
    };

    // (mu + lambda) survival: whole fronts first, the last one cut by crowding.
    inline auto survive(std::vector<Solution> pool, std::size_t keep) -> Ranked
    {
        auto const objs = metrics::objectives_of(pool);
        auto const fronts = fast_non_dominated_sort(objs);

        Ranked out;
        for (std::size_t f = 0; f < fronts.size() && out.members.size() < keep; ++f) {
            std::vector<std::vector<double>> front_objs;
            front_objs.reserve(fronts[f].size());
            for (auto i : fronts[f]) { front_objs.push_back(objs[i]); }
            auto const crowd = crowding_distance(front_objs);

            std::vector<std::size_t> order(fronts[f].size());
            std::iota(order.begin(), order.end(), std::size_t{ 0 });
            auto const room = keep - out.members.size();
            if (order.size() > room) {
                std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return crowd[a] > crowd[b]; });
                order.resize(room);
                std::ranges::sort(order);
                if (f == 0) { out.first_front_truncated = true; }
            }
            for (auto j : order) {
                out.members.push_back(pool[fronts[f][j]]);
                out.rank.push_back(f);
                out.crowding.push_back(crowd[j]);
            }
        }
        return out;
    }

    inline auto tournament(Ranked const& pop, RngStream& rng) -> std::size_t
    {
        auto const a = static_cast<std::size_t>(rng.index(pop.members.size()));
        auto const b = static_cast<std::size_t>(rng.index(pop.members.size()));
        if (pop.rank[a] != pop.rank[b]) { return pop.rank[a] < pop.rank[b] ? a : b; }
        if (pop.crowding[a] != pop.crowding[b]) { return pop.crowding[a] > pop.crowding[b] ? a : b; }
        return rng.coin() ? a : b;
    }

    template <Problem P>
    auto generation_stats(std::size_t generation, Ranked const& pop, P const& problem, RunOptions const& opts) -> GenerationStats
    {
        auto const front = non_dominated_filter(pop.members);
        auto const adjusted = metrics::adjusted_set(front, problem);
        auto const adjusted_objs = metrics::objectives_of(adjusted);
        GenerationStats g;
        g.generation = generation;
        g.front_size = front.size();
        g.hv = metrics::hypervolume_2d(adjusted_objs, opts.reference_point);
        if (opts.front) { g.igd = metrics::igd(*opts.front, adjusted_objs); }
        g.delta_f = metrics::delta_f(front, adjusted);
        g.first_front_truncated = pop.first_front_truncated;
        return g;
    }
} // namespace detail

/// NSGA-II on a noisy problem.
///
/// Generation 0 samples `pop_size` uniform points; each of the following
/// `generations` iterations produces `pop_size` offspring (binary tournament,
/// SBX, polynomial mutation), samples each of them once, passes them through
/// the evaluator and keeps the best `pop_size` of parents + offspring.
/// Survivors keep the objectives they were given when evaluated.
template <Problem P>
auto run_optimization(P const& problem, problems::NoiseSpec const& noise, Evaluator const& evaluator, GaConfig const& cfg, RngStream& rng,
    RunOptions const& opts = {}) -> RunResult
{
    cfg.validate();
    if (auto const* knn_eval = std::get_if<KnnAveraged>(&evaluator)) { knn_eval->config.validate(); }
    require(noise.sigma >= 0.0, "run_optimization: sigma must be nonnegative");

    auto const& spec = problem.spec();
    RunResult result;

    auto const evaluate_batch = [&](std::vector<std::vector<double>> const& xs, std::size_t generation) {
        std::vector<Solution> sampled;
        sampled.reserve(xs.size());
        for (auto const& x : xs) { sampled.push_back(problems::evaluate_noisy(problem, noise, x, rng)); }
        result.history.append(sampled, generation);

        std::vector<Solution> evaluated;
        if (auto const* k = std::get_if<KnnAveraged>(&evaluator)) {
            evaluated = knn::knn_evaluate(sampled, result.history, k->config);
        } else {
            evaluated = std::move(sampled);
        }
        for (auto const& s : evaluated) { result.history_objectives.push_back(s.objectives); }
        return evaluated;
    };

    std::vector<std::vector<double>> xs(cfg.pop_size, std::vector<double>(spec.n_vars));
    for (auto& x : xs) {
        for (std::size_t i = 0; i < spec.n_vars; ++i) { x[i] = rng.uniform(spec.lower_bounds[i], spec.upper_bounds[i]); }
    }
    auto pop = detail::survive(evaluate_batch(xs, 0), cfg.pop_size);
    if (opts.trace) { result.trace.push_back(detail::generation_stats(0, pop, problem, opts)); }

    for (std::size_t gen = 1; gen <= cfg.generations; ++gen) {
        xs.clear();
        for (std::size_t i = 0; i < cfg.pop_size; i += 2) {
            auto const& a = pop.members[detail::tournament(pop, rng)].variables;
            auto const& b = pop.members[detail::tournament(pop, rng)].variables;
            auto [c1, c2] = sbx_crossover(a, b, cfg.crossover_prob, cfg.eta_crossover, spec, rng, cfg.crossover_var_prob);
            xs.push_back(polynomial_mutation(c1, cfg.mutation_prob, cfg.eta_mutation, spec, rng));
            xs.push_back(polynomial_mutation(c2, cfg.mutation_prob, cfg.eta_mutation, spec, rng));
        }
        auto offspring = evaluate_batch(xs, gen);

        auto pool = std::move(pop.members);
        pool.insert(pool.end(), std::make_move_iterator(offspring.begin()), std::make_move_iterator(offspring.end()));
        pop = detail::survive(std::move(pool), cfg.pop_size);
        if (opts.trace) { result.trace.push_back(detail::generation_stats(gen, pop, problem, opts)); }
    }

    result.final_set = non_dominated_filter(pop.members);
    result.final_population = std::move(pop.members);
    return result;
}

} // namespace knnavg::nsga2

#endif
