#ifndef KNNAVG_METRICS_HPP
#define KNNAVG_METRICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "knnavg/core.hpp"
#include "knnavg/problems.hpp"

namespace knnavg::metrics {

using Point2 = std::array<double, 2>;

inline constexpr Point2 default_reference_point{ 11.0, 11.0 };
inline constexpr std::size_t default_front_samples = 1000;

struct MetricReport {
    double hv_mean_adjusted{};
    double igd_mean_adjusted{};
    double delta_f{};
    Point2 reference_point{ default_reference_point };
    std::size_t front_sample_size{ default_front_samples };

    friend auto operator==(MetricReport const&, MetricReport const&) -> bool = default;
};

/// S~: the same solutions with their objectives replaced by the expected
/// (noise-free) values.
template <Problem P>
auto adjusted_set(std::span<Solution const> set, P const& problem) -> std::vector<Solution>
{
    std::vector<Solution> out;
    out.reserve(set.size());
    for (auto const& s : set) {
        Solution a = s;
        a.objectives = problems::mean_objectives(problem, s);
        out.push_back(std::move(a));
    }
    return out;
}

inline auto objectives_of(std::span<Solution const> set) -> std::vector<std::vector<double>>
{
    std::vector<std::vector<double>> out;
    out.reserve(set.size());
    for (auto const& s : set) { out.push_back(s.objectives); }
    return out;
}

/// Exact 2-D hypervolume by sort-and-sweep. Points not strictly better than
/// `ref` in both objectives contribute nothing.
inline auto hypervolume_2d(std::span<std::vector<double> const> points, Point2 ref) -> double
{
    std::vector<Point2> inside;
    inside.reserve(points.size());
    for (auto const& p : points) {
        require(p.size() == 2, "hypervolume_2d: points must be 2-D");
        if (p[0] < ref[0] && p[1] < ref[1]) { inside.push_back({ p[0], p[1] }); }
    }
    std::ranges::sort(inside);

    double area = 0.0;
    double floor = ref[1];
    for (auto const& p : inside) {
        if (p[1] < floor) {
            area += (ref[0] - p[0]) * (floor - p[1]);
            floor = p[1];
        }
    }
    return area;
}

/// Inverted generational distance: mean distance from each front point to
/// its closest member of `solutions`.
inline auto igd(problems::ParetoFrontSample const& front, std::span<std::vector<double> const> solutions) -> double
{
    require(!front.points.empty(), "igd: empty front sample");
    require(!solutions.empty(), "igd: empty solution set");
    double total = 0.0;
    for (auto const& p : front.points) {
        double best = std::numeric_limits<double>::infinity();
        for (auto const& s : solutions) {
            require(s.size() == p.size(), "igd: dimension mismatch");
            double d2 = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) { d2 += (p[i] - s[i]) * (p[i] - s[i]); }
            best = std::min(best, d2);
        }
        total += std::sqrt(best);
    }
    return total / static_cast<double>(front.points.size());
}

/// Mean Euclidean distance between reported and expected objectives,
/// paired by position.
inline auto delta_f(std::span<Solution const> reported, std::span<Solution const> adjusted) -> double
{
    require(reported.size() == adjusted.size(), "delta_f: sets differ in size");
    require(!reported.empty(), "delta_f: empty set");
    double total = 0.0;
    for (std::size_t i = 0; i < reported.size(); ++i) {
        auto const& a = reported[i].objectives;
        auto const& b = adjusted[i].objectives;
        require(a.size() == b.size(), "delta_f: dimension mismatch");
        double d2 = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) { d2 += (a[j] - b[j]) * (a[j] - b[j]); }
        total += std::sqrt(d2);
    }
    return total / static_cast<double>(reported.size());
}

/// HV and IGD of S~ plus delta_f(S, S~) for a final set S.
template <Problem P>
auto evaluate_final_set(std::span<Solution const> final_set, P const& problem, problems::ParetoFrontSample const& front,
    Point2 ref = default_reference_point) -> MetricReport
{
    auto const adjusted = adjusted_set(final_set, problem);
    auto const objs = objectives_of(adjusted);
    MetricReport r;
    r.hv_mean_adjusted = hypervolume_2d(objs, ref);
    r.igd_mean_adjusted = igd(front, objs);
    r.delta_f = delta_f(final_set, adjusted);
    r.reference_point = ref;
    r.front_sample_size = front.count();
    return r;
}

} // namespace knnavg::metrics

#endif
