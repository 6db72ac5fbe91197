#ifndef KNNAVG_PROBLEMS_HPP
#define KNNAVG_PROBLEMS_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "knnavg/core.hpp"
#include "knnavg/rng.hpp"

namespace knnavg {

/// Anything with declared bounds and a deterministic objective vector.
template <typename P>
concept Problem = requires(P const& p, std::span<double const> x) {
    { p.spec() } -> std::convertible_to<ProblemSpec const&>;
    { p.evaluate(x) } -> std::same_as<std::vector<double>>;
};

namespace problems {

enum class ZdtVariant { Zdt1, Zdt2, Zdt3 };

inline auto to_string(ZdtVariant v) -> std::string
{
    switch (v) {
    case ZdtVariant::Zdt1: return "zdt1";
    case ZdtVariant::Zdt2: return "zdt2";
    case ZdtVariant::Zdt3: return "zdt3";
    }
    return "zdt?";
}

inline auto parse_variant(std::string_view name) -> ZdtVariant
{
    std::string lower(name);
    std::ranges::transform(lower, lower.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "zdt1") { return ZdtVariant::Zdt1; }
    if (lower == "zdt2") { return ZdtVariant::Zdt2; }
    if (lower == "zdt3") { return ZdtVariant::Zdt3; }
    throw ContractViolation("unknown problem '" + std::string(name) + "' (expected zdt1, zdt2 or zdt3)");
}

struct ParetoFrontSample {
    std::vector<std::vector<double>> points;

    [[nodiscard]] auto count() const -> std::size_t { return points.size(); }
};

namespace detail {
    // f1 intervals of the ZDT3 front, computed once (see zdt3_segments()).
    struct Segment {
        double lo;
        double hi;
    };

    inline auto zdt3_curve(double f1) -> double
    {
        return 1.0 - std::sqrt(f1) - f1 * std::sin(10.0 * std::numbers::pi * f1);
    }

    inline auto zdt3_segments() -> std::vector<Segment> const&;
} // namespace detail

/// ZDT1/2/3 on [0,1]^n with the Zitzler-Deb-Thiele definitions:
///   g  = 1 + 9 * sum(x_2..x_n) / (n - 1)
///   f1 = x_1
///   f2 = g * h(f1, g)
class ZdtProblem {
public:
    ZdtProblem(ZdtVariant variant, std::size_t n_vars)
        : variant_(variant),
          spec_(to_string(variant), n_vars, 2, std::vector<double>(n_vars, 0.0), std::vector<double>(n_vars, 1.0))
    {
        require(n_vars >= 2, "ZdtProblem: n_vars must be at least 2");
    }

    [[nodiscard]] auto variant() const -> ZdtVariant { return variant_; }
    [[nodiscard]] auto spec() const -> ProblemSpec const& { return spec_; }
    [[nodiscard]] auto n_vars() const -> std::size_t { return spec_.n_vars; }

    /// Noise-free objectives (f1, f2).
    [[nodiscard]] auto evaluate(std::span<double const> x) const -> std::vector<double>
    {
        require(x.size() == spec_.n_vars, "evaluate_true: variable vector has wrong length");
        require(spec_.contains(x), "evaluate_true: variables outside [0,1]^n");

        double const f1 = x[0];
        double tail = 0.0;
        for (std::size_t i = 1; i < x.size(); ++i) { tail += x[i]; }
        double const g = 1.0 + 9.0 * tail / static_cast<double>(x.size() - 1);
        double const r = f1 / g;

        double h = 0.0;
        switch (variant_) {
        case ZdtVariant::Zdt1: h = 1.0 - std::sqrt(r); break;
        case ZdtVariant::Zdt2: h = 1.0 - r * r; break;
        case ZdtVariant::Zdt3: h = 1.0 - std::sqrt(r) - r * std::sin(10.0 * std::numbers::pi * f1); break;
        }
        return { f1, g * h };
    }

    /// Analytic front value f2(f1) (g = 1). For ZDT3 this is the full curve,
    /// including the dominated stretches between the front segments.
    [[nodiscard]] auto front_curve(double f1) const -> double
    {
        switch (variant_) {
        case ZdtVariant::Zdt1: return 1.0 - std::sqrt(f1);
        case ZdtVariant::Zdt2: return 1.0 - f1 * f1;
        case ZdtVariant::Zdt3: return detail::zdt3_curve(f1);
        }
        return 0.0;
    }

    /// `count` points evenly spaced in f1 over the valid front segments.
    [[nodiscard]] auto true_front(std::size_t count) const -> ParetoFrontSample
    {
        require(count >= 2, "true_front: count must be at least 2");
        std::vector<detail::Segment> segments;
        if (variant_ == ZdtVariant::Zdt3) {
            segments = detail::zdt3_segments();
        } else {
            segments.push_back({ 0.0, 1.0 });
        }

        double total = 0.0;
        for (auto const& s : segments) { total += s.hi - s.lo; }

        ParetoFrontSample sample;
        sample.points.reserve(count);
        std::size_t seg = 0;
        double consumed = 0.0; // length of segments before `seg`
        for (std::size_t j = 0; j < count; ++j) {
            double const t = (j + 1 == count) ? total : total * static_cast<double>(j) / static_cast<double>(count - 1);
            while (seg + 1 < segments.size() && t > consumed + (segments[seg].hi - segments[seg].lo)) {
                consumed += segments[seg].hi - segments[seg].lo;
                ++seg;
            }
            double const f1 = std::clamp(segments[seg].lo + (t - consumed), segments[seg].lo, segments[seg].hi);
            sample.points.push_back({ f1, front_curve(f1) });
        }
        return sample;
    }

private:
    ZdtVariant variant_;
    ProblemSpec spec_;
};

inline auto evaluate_true(ZdtProblem const& problem, std::span<double const> x) -> std::vector<double>
{
    return problem.evaluate(x);
}

inline auto true_front(ZdtProblem const& problem, std::size_t count) -> ParetoFrontSample
{
    return problem.true_front(count);
}

/// Zero-mean Gaussian noise added to each objective. An empty per-objective
/// vector means "use `sigma` for every objective".
struct NoiseSpec {
    double sigma{ 0.0 };
    std::vector<double> per_objective_sigma;

    [[nodiscard]] auto sigma_for(std::size_t objective) const -> double
    {
        return per_objective_sigma.empty() ? sigma : per_objective_sigma.at(objective);
    }
};

/// Noisy sample of f(x): raw_objectives = f(x) + N(0, sigma^2) per dimension,
/// objectives start out equal to raw_objectives. Consumes exactly m normals.
template <Problem P>
auto evaluate_noisy(P const& problem, NoiseSpec const& noise, std::span<double const> x, RngStream& rng) -> Solution
{
    require(noise.sigma >= 0.0, "NoiseSpec: sigma must be nonnegative");
    auto objectives = problem.evaluate(x);
    require(noise.per_objective_sigma.empty() || noise.per_objective_sigma.size() == objectives.size(),
        "NoiseSpec: per-objective sigma has wrong length");
    for (std::size_t i = 0; i < objectives.size(); ++i) {
        double const delta = rng.normal();
        double const s = noise.sigma_for(i);
        require(s >= 0.0, "NoiseSpec: sigma must be nonnegative");
        objectives[i] += s * delta;
    }
    Solution sol;
    sol.variables.assign(x.begin(), x.end());
    sol.objectives = objectives;
    sol.raw_objectives = std::move(objectives);
    return sol;
}

/// Expected objectives of `s` under additive zero-mean noise, i.e. f(x).
template <Problem P>
auto mean_objectives(P const& problem, Solution const& s) -> std::vector<double>
{
    return problem.evaluate(s.variables);
}

namespace detail {
    inline auto zdt3_segments() -> std::vector<Segment> const&
    {
        static std::vector<Segment> const segments = [] {
            // Dense sweep of the curve, filtered for dominance.
            constexpr std::size_t sweep = 10'001;
            std::vector<std::vector<double>> curve;
            curve.reserve(sweep);
            for (std::size_t i = 0; i < sweep; ++i) {
                double const f1 = static_cast<double>(i) / static_cast<double>(sweep - 1);
                curve.push_back({ f1, zdt3_curve(f1) });
            }
            auto const keep = non_dominated_indices(curve);

            std::vector<std::pair<std::size_t, std::size_t>> runs; // [first, last] sweep indices
            for (auto idx : keep) {
                if (!runs.empty() && runs.back().second + 1 == idx) {
                    runs.back().second = idx;
                } else {
                    runs.emplace_back(idx, idx);
                }
            }

            // Refine the sweep boundaries: each segment ends at a local minimum of
            // the curve, and the next one starts where the curve drops back below
            // that minimum.
            double const h = 1.0 / static_cast<double>(sweep - 1);
            std::vector<Segment> out;
            double previous_min = 0.0;
            for (std::size_t r = 0; r < runs.size(); ++r) {
                double lo = curve[runs[r].first][0];
                if (r > 0) {
                    double a = std::max(0.0, lo - h);
                    double b = lo;
                    for (int it = 0; it < 200; ++it) {
                        double const mid = 0.5 * (a + b);
                        if (zdt3_curve(mid) > previous_min) { a = mid; } else { b = mid; }
                    }
                    lo = b + 1e-9;
                }

                double hi = curve[runs[r].second][0];
                if (runs[r].second + 1 < sweep) {
                    // golden-section search for the local minimum around the sweep end
                    double a = std::max(lo, hi - h);
                    double b = std::min(1.0, hi + h);
                    double const phi = (std::sqrt(5.0) - 1.0) / 2.0;
                    for (int it = 0; it < 200; ++it) {
                        double const c = b - phi * (b - a);
                        double const d = a + phi * (b - a);
                        if (zdt3_curve(c) < zdt3_curve(d)) { b = d; } else { a = c; }
                    }
                    double const argmin = 0.5 * (a + b);
                    previous_min = zdt3_curve(argmin);
                    hi = argmin - 1e-7;
                } else {
                    previous_min = zdt3_curve(hi);
                }
                out.push_back({ lo, hi });
            }
            return out;
        }();
        return segments;
    }
} // namespace detail

} // namespace problems
} // namespace knnavg

#endif
