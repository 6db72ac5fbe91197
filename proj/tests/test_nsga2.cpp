#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "knnavg/nsga2.hpp"
#include "oracles.hpp"

using knnavg::ContractViolation;
using knnavg::ProblemSpec;
using knnavg::RngStream;
using knnavg::Solution;
using namespace knnavg::nsga2;
using knnavg::problems::NoiseSpec;
using knnavg::problems::ZdtProblem;
using knnavg::problems::ZdtVariant;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

std::vector<std::vector<double>> pts(std::initializer_list<std::vector<double>> xs) { return xs; }

ProblemSpec unit_box(std::size_t n) { return ProblemSpec("box", n, 2, std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)); }

GaConfig ga(std::size_t pop, std::size_t gens)
{
    GaConfig g;
    g.pop_size = pop;
    g.generations = gens;
    return g;
}

} // namespace

TEST(FastNonDominatedSort, Chain)
{
    auto const f = fast_non_dominated_sort(pts({ { 1, 1 }, { 2, 2 }, { 3, 3 } }));
    EXPECT_EQ(f, (std::vector<std::vector<std::size_t>>{ { 0 }, { 1 }, { 2 } }));
}

TEST(FastNonDominatedSort, IncomparablePair)
{
    auto const f = fast_non_dominated_sort(pts({ { 1, 2 }, { 2, 1 } }));
    EXPECT_EQ(f, (std::vector<std::vector<std::size_t>>{ { 0, 1 } }));
}

TEST(FastNonDominatedSort, EmptyInput) { EXPECT_TRUE(fast_non_dominated_sort(std::vector<std::vector<double>>{}).empty()); }

TEST(FastNonDominatedSortProperty, FirstFrontMatchesOracleAndFrontsArePartition)
{
    std::mt19937_64 gen(50);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> coarse(0, 5);
    for (int t = 0; t < 300; ++t) {
        std::vector<std::vector<double>> p(50, std::vector<double>(2));
        for (auto& q : p) {
            for (auto& x : q) { x = t % 3 == 0 ? coarse(gen) : u(gen); }
        }
        auto const fronts = fast_non_dominated_sort(p);
        EXPECT_EQ(fronts.front(), oracle::non_dominated(p));

        std::vector<int> rank(p.size(), -1);
        for (std::size_t f = 0; f < fronts.size(); ++f) {
            for (auto i : fronts[f]) {
                ASSERT_EQ(rank[i], -1);
                rank[i] = static_cast<int>(f);
            }
        }
        ASSERT_TRUE(std::ranges::none_of(rank, [](int r) { return r < 0; }));
        for (std::size_t a = 0; a < p.size(); ++a) {
            bool has_parent = rank[a] == 0;
            for (std::size_t b = 0; b < p.size(); ++b) {
                if (oracle::weakly_better_everywhere(p[b], p[a])) {
                    EXPECT_LT(rank[b], rank[a]);
                    has_parent = has_parent || rank[b] == rank[a] - 1;
                }
            }
            EXPECT_TRUE(has_parent);
        }
    }
}

TEST(CrowdingDistance, SmallFrontsAreInfinite)
{
    EXPECT_EQ(crowding_distance(pts({ { 0.3, 0.3 } })), std::vector<double>{ inf });
    EXPECT_EQ(crowding_distance(pts({ { 0, 1 }, { 1, 0 } })), (std::vector<double>{ inf, inf }));
}

TEST(CrowdingDistance, ThreePointCuboid)
{
    auto const d = crowding_distance(pts({ { 0, 1 }, { 0.5, 0.5 }, { 1, 0 } }));
    EXPECT_EQ(d[0], inf);
    EXPECT_EQ(d[2], inf);
    EXPECT_DOUBLE_EQ(d[1], 2.0);
}

TEST(CrowdingDistance, DegenerateObjectiveIsSkipped)
{
    auto const d = crowding_distance(pts({ { 0, 5 }, { 0.25, 5 }, { 1, 5 } }));
    EXPECT_DOUBLE_EQ(d[1], 1.0);
}

TEST(Sbx, ZeroProbabilityCopiesParents)
{
    RngStream r(1);
    std::vector<double> const a{ 0.1, 0.9 };
    std::vector<double> const b{ 0.7, 0.2 };
    for (int t = 0; t < 100; ++t) {
        auto const [c1, c2] = sbx_crossover(a, b, 0.0, 15.0, unit_box(2), r);
        EXPECT_EQ(c1, a);
        EXPECT_EQ(c2, b);
    }
}

TEST(Sbx, IdenticalParentsGiveIdenticalChildren)
{
    RngStream r(2);
    std::vector<double> const a{ 0.3, 0.6, 0.9 };
    for (int t = 0; t < 100; ++t) {
        auto const [c1, c2] = sbx_crossover(a, a, 1.0, 15.0, unit_box(3), r, 1.0);
        EXPECT_EQ(c1, a);
        EXPECT_EQ(c2, a);
    }
}

TEST(Sbx, SymmetricAboutParentMidpointAndBounded)
{
    for (double var_prob : { 0.5, 1.0 }) {
        RngStream r(3);
        std::vector<double> const a{ 0.2 };
        std::vector<double> const b{ 0.8 };
        double sum = 0.0;
        constexpr int n = 10000;
        int changed = 0;
        for (int t = 0; t < n; ++t) {
            auto const [c1, c2] = sbx_crossover(a, b, 0.9, 15.0, unit_box(1), r, var_prob);
            for (double c : { c1[0], c2[0] }) {
                ASSERT_GE(c, 0.0);
                ASSERT_LE(c, 1.0);
                sum += c;
            }
            changed += (c1 != a && c1 != b) ? 1 : 0;
        }
        EXPECT_NEAR(sum / (2.0 * n), 0.5, 0.02);
        EXPECT_NEAR(changed / static_cast<double>(n), 0.9 * var_prob, 0.02);
    }
}

TEST(Sbx, LengthMismatchThrows)
{
    RngStream r(4);
    EXPECT_THROW((void)sbx_crossover(std::vector<double>{ 0.1 }, std::vector<double>{ 0.1, 0.2 }, 1.0, 15.0, unit_box(1), r), ContractViolation);
}

TEST(PolynomialMutation, ZeroProbabilityLeavesInputUnchanged)
{
    RngStream r(5);
    std::vector<double> const x{ 0.25, 0.5 };
    for (int t = 0; t < 100; ++t) { EXPECT_EQ(polynomial_mutation(x, 0.0, 20.0, unit_box(2), r), x); }
}

TEST(PolynomialMutation, OutputWithinBounds)
{
    RngStream r(6);
    ProblemSpec const spec("s", 3, 2, { -1.0, 0.0, 5.0 }, { 1.0, 0.001, 6.0 });
    for (int t = 0; t < 10000; ++t) {
        std::vector<double> x{ r.uniform(-1, 1), r.uniform(0, 0.001), r.uniform(5, 6) };
        auto const y = polynomial_mutation(x, 1.0, 20.0, spec, r);
        ASSERT_TRUE(spec.contains(y));
    }
}

TEST(PolynomialMutation, SymmetricAtIntervalCentre)
{
    RngStream r(7);
    std::vector<double> const x{ 0.5 };
    double sum = 0.0;
    constexpr int n = 100000;
    int moved = 0;
    for (int t = 0; t < n; ++t) {
        double const y = polynomial_mutation(x, 1.0, 20.0, unit_box(1), r)[0];
        sum += y;
        moved += y != 0.5 ? 1 : 0;
    }
    EXPECT_NEAR(sum / n, 0.5, 0.01);
    EXPECT_GT(moved, n - 10);
}

TEST(PolynomialMutation, PerVariableRateIsOneOverN)
{
    RngStream r(8);
    std::vector<double> const x(10, 0.5);
    int moved = 0;
    constexpr int n = 20000;
    for (int t = 0; t < n; ++t) {
        auto const y = polynomial_mutation(x, 1.0, 20.0, unit_box(10), r);
        for (std::size_t i = 0; i < y.size(); ++i) { moved += y[i] != x[i] ? 1 : 0; }
    }
    EXPECT_NEAR(moved / static_cast<double>(n), 1.0, 0.05);
}

TEST(GaConfig, RejectsOddOrTinyPopulations)
{
    EXPECT_THROW(ga(11, 10).validate(), ContractViolation);
    EXPECT_THROW(ga(0, 10).validate(), ContractViolation);
    EXPECT_THROW(ga(10, 0).validate(), ContractViolation);
    auto g = ga(10, 10);
    g.crossover_prob = 1.5;
    EXPECT_THROW(g.validate(), ContractViolation);
}

TEST(RunOptimization, NoiseFreeZdt1ConvergesToFrontHypervolume)
{
    // Dominated area of f2 = 1 - sqrt(f1) inside [0,11]^2: 10 + 2/3 + 110.
    double const front_hv = 120.0 + 2.0 / 3.0;
    ZdtProblem const p(ZdtVariant::Zdt1, 2);
    for (std::uint64_t seed : { 1U, 2U, 3U }) {
        RngStream r(seed);
        auto const res = run_optimization(p, NoiseSpec{}, PlainNoisy{}, ga(20, 100), r);
        auto const hv = knnavg::metrics::hypervolume_2d(knnavg::metrics::objectives_of(res.final_set), { 11, 11 });
        EXPECT_GT(hv, 0.95 * front_hv);
        EXPECT_LE(hv, front_hv + 1e-9);
    }
}

TEST(RunOptimization, SameSeedSameResult)
{
    ZdtProblem const p(ZdtVariant::Zdt3, 4);
    for (Evaluator const& e : { Evaluator{ PlainNoisy{} }, Evaluator{ KnnAveraged{ { 10, 0.5 } } } }) {
        RngStream a(123);
        RngStream b(123);
        auto const ra = run_optimization(p, NoiseSpec{ 0.1, {} }, e, ga(10, 30), a);
        auto const rb = run_optimization(p, NoiseSpec{ 0.1, {} }, e, ga(10, 30), b);
        EXPECT_EQ(ra, rb);
        EXPECT_EQ(a, b);
    }
}

TEST(RunOptimization, KOneMatchesPlainEvaluation)
{
    ZdtProblem const p(ZdtVariant::Zdt1, 2);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        RngStream a(seed);
        RngStream b(seed);
        auto const plain = run_optimization(p, NoiseSpec{ 0.1, {} }, PlainNoisy{}, ga(10, 50), a);
        auto const k1 = run_optimization(p, NoiseSpec{ 0.1, {} }, KnnAveraged{ { 1, 0.25 } }, ga(10, 50), b);
        EXPECT_EQ(plain, k1);
    }
}

TEST(RunOptimization, BudgetBoundsAndRawSamples)
{
    ZdtProblem const p(ZdtVariant::Zdt2, 10);
    RngStream r(9);
    auto const cfg = ga(20, 25);
    auto const res = run_optimization(p, NoiseSpec{ 0.25, {} }, KnnAveraged{ { 25, 1.0 } }, cfg, r);
    ASSERT_EQ(res.evaluations(), cfg.pop_size * (cfg.generations + 1));
    ASSERT_EQ(res.history_objectives.size(), res.evaluations());
    for (std::size_t i = 0; i < res.history.size(); ++i) {
        EXPECT_TRUE(p.spec().contains(res.history[i].variables));
        EXPECT_EQ(res.history[i].generation, i / cfg.pop_size);
    }
    ASSERT_EQ(res.trace.size(), cfg.generations + 1);
    EXPECT_EQ(res.final_population.size(), cfg.pop_size);
    EXPECT_EQ(res.final_set, knnavg::non_dominated_filter(res.final_population));

    // survivors keep the objectives they were assigned when sampled
    for (auto const& s : res.final_population) {
        bool found = false;
        for (std::size_t i = 0; i < res.history.size() && !found; ++i) {
            found = res.history[i].variables == s.variables && res.history[i].raw_objectives == *s.raw_objectives
                && res.history_objectives[i] == s.objectives;
        }
        EXPECT_TRUE(found);
    }
}

TEST(RunOptimization, NoiseFreeElitismKeepsFirstFrontHypervolume)
{
    // Without noise, HV of the rank-1 set can only drop when crowding has to
    // truncate the merged first front; every other generation must not lose HV.
    ZdtProblem const p(ZdtVariant::Zdt1, 4);
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        RngStream r(seed);
        auto const res = run_optimization(p, NoiseSpec{}, PlainNoisy{}, ga(20, 100), r);
        for (std::size_t g = 1; g < res.trace.size(); ++g) {
            if (res.trace[g].first_front_truncated) { continue; }
            ++checked;
            EXPECT_GE(res.trace[g].hv, res.trace[g - 1].hv) << "seed " << seed << " generation " << g;
        }
    }
    EXPECT_GT(checked, 50U);
}

TEST(RunOptimization, TraceMatchesFinalMetrics)
{
    ZdtProblem const p(ZdtVariant::Zdt1, 2);
    RngStream r(10);
    RunOptions opts;
    opts.front = p.true_front(100);
    auto const res = run_optimization(p, NoiseSpec{ 0.1, {} }, KnnAveraged{ { 10, 0.25 } }, ga(10, 20), r, opts);
    auto const report = knnavg::metrics::evaluate_final_set(res.final_set, p, *opts.front);
    EXPECT_EQ(res.trace.back().hv, report.hv_mean_adjusted);
    EXPECT_EQ(*res.trace.back().igd, report.igd_mean_adjusted);
    EXPECT_EQ(res.trace.back().delta_f, report.delta_f);
    EXPECT_EQ(res.trace.back().front_size, res.final_set.size());
}
