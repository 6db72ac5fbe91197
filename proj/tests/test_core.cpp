#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "knnavg/core.hpp"
#include "knnavg/rng.hpp"
#include "oracles.hpp"

using knnavg::ContractViolation;
using knnavg::dominates;
using knnavg::non_dominated_filter;
using knnavg::RngStream;
using knnavg::Solution;

namespace {

Solution sol(std::vector<double> obj) { return Solution{ {}, std::move(obj), std::nullopt }; }

std::vector<double> v(std::initializer_list<double> xs) { return xs; }

std::vector<std::vector<double>> random_points(std::mt19937_64& gen, std::size_t n, std::size_t m, int grid = 0)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> g(0, grid);
    std::vector<std::vector<double>> pts(n, std::vector<double>(m));
    for (auto& p : pts) {
        for (auto& x : p) { x = grid > 0 ? g(gen) : u(gen); }
    }
    return pts;
}

} // namespace

TEST(Dominates, StrictImprovementInBoth) { EXPECT_TRUE(dominates(v({ 1, 1 }), v({ 2, 2 }))); }

TEST(Dominates, EqualVectorsDoNotDominate) { EXPECT_FALSE(dominates(v({ 1, 1 }), v({ 1, 1 }))); }

TEST(Dominates, IncomparablePair)
{
    EXPECT_FALSE(dominates(v({ 1, 3 }), v({ 3, 1 })));
    EXPECT_FALSE(dominates(v({ 3, 1 }), v({ 1, 3 })));
}

TEST(Dominates, WeakImprovementWithOneStrict) { EXPECT_TRUE(dominates(v({ 1, 2 }), v({ 1, 3 }))); }

TEST(Dominates, DimensionMismatchThrows)
{
    EXPECT_THROW((void)dominates(v({ 1, 2 }), v({ 1, 2, 3 })), ContractViolation);
    EXPECT_THROW((void)dominates(sol({ 1, 2 }), sol({ 1 })), ContractViolation);
}

TEST(DominatesProperty, IrreflexiveAsymmetricTransitive)
{
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 2000; ++trial) {
        // a coarse grid produces plenty of ties and dominance chains
        auto const pts = random_points(gen, 3, 3, 3);
        auto const &a = pts[0], &b = pts[1], &c = pts[2];
        EXPECT_FALSE(dominates(a, a));
        EXPECT_FALSE(dominates(a, b) && dominates(b, a));
        if (dominates(a, b) && dominates(b, c)) { EXPECT_TRUE(dominates(a, c)); }
        EXPECT_EQ(dominates(a, b), oracle::weakly_better_everywhere(a, b));
    }
}

TEST(NonDominatedFilter, Singleton)
{
    std::vector<Solution> s{ sol({ 1, 1 }) };
    EXPECT_EQ(non_dominated_filter(s), s);
}

TEST(NonDominatedFilter, DropsDominatedKeepsOrder)
{
    std::vector<Solution> s{ sol({ 1, 1 }), sol({ 2, 2 }), sol({ 0, 3 }) };
    std::vector<Solution> expected{ sol({ 1, 1 }), sol({ 0, 3 }) };
    EXPECT_EQ(non_dominated_filter(s), expected);
}

TEST(NonDominatedFilter, DuplicatesAreAllRetained)
{
    std::vector<Solution> s{ sol({ 1, 1 }), sol({ 1, 1 }) };
    EXPECT_EQ(non_dominated_filter(s).size(), 2U);
}

TEST(NonDominatedFilter, EmptyInputGivesEmptyOutput) { EXPECT_TRUE(non_dominated_filter({}).empty()); }

TEST(NonDominatedFilterProperty, MutuallyNonDominatingIdempotentAndMatchesOracle)
{
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 300; ++trial) {
        auto const pts = random_points(gen, 40, 2, trial % 2 == 0 ? 6 : 0);
        std::vector<Solution> set;
        for (auto const& p : pts) { set.push_back(sol(p)); }
        auto const front = non_dominated_filter(set);
        for (auto const& a : front) {
            for (auto const& b : front) { EXPECT_FALSE(dominates(a, b)); }
        }
        EXPECT_EQ(non_dominated_filter(front), front);

        auto const expected = oracle::non_dominated(pts);
        ASSERT_EQ(front.size(), expected.size());
        for (std::size_t i = 0; i < expected.size(); ++i) { EXPECT_EQ(front[i].objectives, pts[expected[i]]); }
    }
}

TEST(ProblemSpec, RejectsInvalidDeclarations)
{
    using knnavg::ProblemSpec;
    EXPECT_THROW(ProblemSpec("p", 0, 2, {}, {}), ContractViolation);
    EXPECT_THROW(ProblemSpec("p", 1, 1, { 0 }, { 1 }), ContractViolation);
    EXPECT_THROW(ProblemSpec("p", 1, 2, { 1 }, { 1 }), ContractViolation);
    EXPECT_THROW(ProblemSpec("p", 2, 2, { 0 }, { 1 }), ContractViolation);
    ProblemSpec const ok("p", 2, 2, { 0, -1 }, { 1, 1 });
    EXPECT_TRUE(ok.contains(v({ 0.5, -1 })));
    EXPECT_FALSE(ok.contains(v({ 1.5, 0 })));
    EXPECT_FALSE(ok.contains(v({ 0.5 })));
}

TEST(Rng, SeedingMatchesSplitMix64ReferenceOutput)
{
    // first SplitMix64 output for seed 0
    EXPECT_EQ(knnavg::mix64(0), 0xE220A8397B1DCDAFULL);
    EXPECT_EQ(knnavg::fnv1a64(""), 0xCBF29CE484222325ULL);
    EXPECT_EQ(knnavg::fnv1a64("a"), 0xAF63DC4C8601EC8CULL);
}

TEST(Rng, SameSeedSameSequence)
{
    RngStream a(12345);
    RngStream b(12345);
    std::vector<double> xa;
    std::vector<double> xb;
    for (int i = 0; i < 10000; ++i) {
        xa.push_back(a.uniform01());
        xb.push_back(b.uniform01());
    }
    EXPECT_EQ(xa, xb);
    EXPECT_EQ(a, b);
    EXPECT_NE(RngStream(1).next_u64(), RngStream(2).next_u64());
}

TEST(Rng, UniformAndNormalMoments)
{
    RngStream r(99);
    constexpr int n = 200000;
    double su = 0.0;
    double sn = 0.0;
    double sn2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double const u = r.uniform01();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        su += u;
        double const z = r.normal();
        ASSERT_TRUE(std::isfinite(z));
        sn += z;
        sn2 += z * z;
    }
    EXPECT_NEAR(su / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
    EXPECT_NEAR(sn / n, 0.0, 4.0 / std::sqrt(n));
    EXPECT_NEAR(sn2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(Rng, IndexAndCoinAreUnbiased)
{
    RngStream r(5);
    std::vector<int> counts(7, 0);
    int heads = 0;
    constexpr int n = 70000;
    for (int i = 0; i < n; ++i) {
        auto const k = r.index(7);
        ASSERT_LT(k, 7U);
        ++counts[k];
        heads += r.coin() ? 1 : 0;
    }
    for (int c : counts) { EXPECT_NEAR(c, n / 7.0, 5.0 * std::sqrt(n / 7.0)); }
    EXPECT_NEAR(heads, n / 2.0, 5.0 * std::sqrt(n / 4.0));
}

TEST(Rng, SplitIsDeterministicAndDistinct)
{
    RngStream const parent(42);
    auto a = parent.split(0);
    auto b = parent.split(0);
    auto c = parent.split(1);
    EXPECT_EQ(a.next_u64(), b.next_u64());
    EXPECT_NE(parent.split(0).next_u64(), c.next_u64());
    EXPECT_EQ(parent, RngStream(42));
}
