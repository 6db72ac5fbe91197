#ifndef KNNAVG_STATS_HPP
#define KNNAVG_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "knnavg/core.hpp"
#include "knnavg/metrics.hpp"

namespace knnavg::stats {

inline constexpr std::size_t min_nonzero_pairs = 5;
inline constexpr std::size_t max_exact_pairs = 25;

struct WilcoxonResult {
    double p_value{ 1.0 };
    double w_plus{};            // sum of ranks of positive differences
    std::size_t n_effective{};  // pairs left after dropping zero differences
    bool exact{};
    bool insufficient_data{};
};

/// Two-sided Wilcoxon signed-rank test on a - b.
///
/// Zero differences are dropped before ranking; tied |d| get average ranks.
/// Up to 25 remaining pairs the p-value comes from the exact permutation
/// distribution of W+ (computed on doubled ranks so ties stay integral);
/// above that, the normal approximation with tie correction and a 0.5
/// continuity correction is used. Fewer than 5 non-zero differences yield
/// `insufficient_data` with p = 1.
inline auto wilcoxon_signed_rank(std::span<double const> a, std::span<double const> b) -> WilcoxonResult
{
    require(a.size() == b.size(), "wilcoxon_signed_rank: samples are not paired (length mismatch)");

    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double const d = a[i] - b[i];
        if (d != 0.0) { diffs.push_back(d); }
    }
    WilcoxonResult result;
    result.n_effective = diffs.size();
    if (diffs.size() < min_nonzero_pairs) {
        result.insufficient_data = true;
        return result;
    }

    auto const n = diffs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{ 0 });
    std::ranges::sort(order, [&](std::size_t i, std::size_t j) { return std::fabs(diffs[i]) < std::fabs(diffs[j]); });

    // doubled ranks: 2 * average rank is always an integer
    std::vector<std::uint64_t> rank2(n);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::fabs(diffs[order[j + 1]]) == std::fabs(diffs[order[i]])) { ++j; }
        auto const r2 = static_cast<std::uint64_t>(i + 1 + j + 1); // 2 * (first + last) / 2
        for (std::size_t t = i; t <= j; ++t) { rank2[order[t]] = r2; }
        auto const t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }

    std::uint64_t w2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (diffs[i] > 0.0) { w2 += rank2[i]; }
    }
    result.w_plus = static_cast<double>(w2) / 2.0;

    if (n <= max_exact_pairs) {
        std::uint64_t total2 = 0;
        for (auto r : rank2) { total2 += r; }
        // counts[s] = number of sign assignments whose doubled W+ equals s
        std::vector<double> counts(total2 + 1, 0.0);
        counts[0] = 1.0;
        std::uint64_t reach = 0;
        for (auto r : rank2) {
            for (std::uint64_t s = reach + 1; s-- > 0;) {
                if (counts[s] != 0.0) { counts[s + r] += counts[s]; }
            }
            reach += r;
        }
        double const all = std::ldexp(1.0, static_cast<int>(n));
        double lower = 0.0;
        double upper = 0.0;
        for (std::uint64_t s = 0; s <= total2; ++s) {
            if (s <= w2) { lower += counts[s]; }
            if (s >= w2) { upper += counts[s]; }
        }
        result.exact = true;
        result.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
        return result;
    }

    auto const nd = static_cast<double>(n);
    double const mean = nd * (nd + 1.0) / 4.0;
    double const var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
    if (var <= 0.0) {
        result.p_value = 1.0;
        return result;
    }
    double const z = std::max(0.0, std::fabs(result.w_plus - mean) - 0.5) / std::sqrt(var);
    result.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    return result;
}

/// Vargha-Delaney A12: P(a > b) + 0.5 * P(a == b) over all cross pairs.
inline auto vargha_delaney_a12(std::span<double const> a, std::span<double const> b) -> double
{
    require(!a.empty() && !b.empty(), "vargha_delaney_a12: empty sample");
    double wins = 0.0;
    for (double x : a) {
        for (double y : b) {
            if (x > y) {
                wins += 1.0;
            } else if (x == y) {
                wins += 0.5;
            }
        }
    }
    return wins / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

enum class Metric { Hv, Igd, DeltaF };
enum class Verdict { Better, Equivalent, Worse };

inline auto to_string(Metric m) -> std::string
{
    switch (m) {
    case Metric::Hv: return "HV";
    case Metric::Igd: return "IGD";
    case Metric::DeltaF: return "delta_f";
    }
    return "?";
}

inline auto to_string(Verdict v) -> std::string
{
    switch (v) {
    case Verdict::Better: return "BETTER";
    case Verdict::Equivalent: return "EQUIVALENT";
    case Verdict::Worse: return "WORSE";
    }
    return "?";
}

inline auto parse_verdict(std::string_view text) -> Verdict
{
    if (text == "BETTER") { return Verdict::Better; }
    if (text == "EQUIVALENT") { return Verdict::Equivalent; }
    if (text == "WORSE") { return Verdict::Worse; }
    throw ContractViolation("unknown verdict '" + std::string(text) + "'");
}

inline auto symbol(Verdict v) -> std::string_view
{
    switch (v) {
    case Verdict::Better: return "✓";
    case Verdict::Equivalent: return "≡";
    case Verdict::Worse: return "✗";
    }
    return "?";
}

inline auto higher_is_better(Metric m) -> bool { return m == Metric::Hv; }

inline auto metric_value(metrics::MetricReport const& r, Metric m) -> double
{
    switch (m) {
    case Metric::Hv: return r.hv_mean_adjusted;
    case Metric::Igd: return r.igd_mean_adjusted;
    case Metric::DeltaF: return r.delta_f;
    }
    return 0.0;
}

struct ComparisonVerdict {
    Metric metric{};
    std::size_t k{};
    double max_dist{};
    double p_value{ 1.0 };
    double a12{ 0.5 };
    Verdict verdict{ Verdict::Equivalent };
    bool insufficient_data{};
    std::size_t pairs{};

    friend auto operator==(ComparisonVerdict const&, ComparisonVerdict const&) -> bool = default;
};

/// Three-way verdict of the kNN arm against the baseline on one metric.
/// Significance from the paired Wilcoxon test, direction from A12(knn, baseline)
/// read with the metric's orientation.
inline auto decide(Metric metric, double p_value, double a12, double alpha) -> Verdict
{
    if (!(p_value < alpha) || a12 == 0.5) { return Verdict::Equivalent; }
    bool const knn_higher = a12 > 0.5;
    return knn_higher == higher_is_better(metric) ? Verdict::Better : Verdict::Worse;
}

/// `knn_runs[i]` and `baseline_runs[i]` must come from the same seed.
inline auto compare_setting(std::span<metrics::MetricReport const> knn_runs, std::span<metrics::MetricReport const> baseline_runs,
    Metric metric, double alpha = 0.05, std::size_t k = 0, double max_dist = 0.0) -> ComparisonVerdict
{
    require(knn_runs.size() == baseline_runs.size(), "compare_setting: arms are not seed-paired (different run counts)");
    require(knn_runs.size() >= min_nonzero_pairs, "compare_setting: at least 5 paired runs are required");
    require(alpha > 0.0 && alpha < 1.0, "compare_setting: alpha must lie in (0,1)");

    std::vector<double> a;
    std::vector<double> b;
    for (auto const& r : knn_runs) { a.push_back(metric_value(r, metric)); }
    for (auto const& r : baseline_runs) { b.push_back(metric_value(r, metric)); }

    auto const w = wilcoxon_signed_rank(a, b);
    ComparisonVerdict v;
    v.metric = metric;
    v.k = k;
    v.max_dist = max_dist;
    v.p_value = w.p_value;
    v.a12 = vargha_delaney_a12(a, b);
    v.insufficient_data = w.insufficient_data;
    v.pairs = a.size();
    v.verdict = w.insufficient_data ? Verdict::Equivalent : decide(metric, v.p_value, v.a12, alpha);
    return v;
}

} // namespace knnavg::stats

#endif
