#ifndef KNNAVG_CORE_HPP
#define KNNAVG_CORE_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace knnavg {

/// Raised whenever a documented precondition is violated (wrong dimensions,
/// out-of-bounds variables, empty inputs where they are not allowed, ...).
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline void require(bool condition, std::string const& message)
{
    if (!condition) { throw ContractViolation(message); }
}

/// A point in decision space together with its objective values.
///
/// `objectives` holds what the optimizer sees (possibly kNN-averaged);
/// `raw_objectives` keeps the sample that was actually drawn, when there was one.
struct Solution {
    std::vector<double> variables;
    std::vector<double> objectives;
    std::optional<std::vector<double>> raw_objectives;

    friend auto operator==(Solution const&, Solution const&) -> bool = default;
};

struct ProblemSpec {
    std::string name;
    std::size_t n_vars{};
    std::size_t n_objs{};
    std::vector<double> lower_bounds;
    std::vector<double> upper_bounds;

    ProblemSpec() = default;
    ProblemSpec(std::string name, std::size_t n_vars, std::size_t n_objs, std::vector<double> lower, std::vector<double> upper)
        : name(std::move(name)), n_vars(n_vars), n_objs(n_objs), lower_bounds(std::move(lower)), upper_bounds(std::move(upper))
    {
        require(this->n_vars > 0, "ProblemSpec: n_vars must be positive");
        require(this->n_objs >= 2, "ProblemSpec: a multi-objective problem needs at least two objectives");
        require(lower_bounds.size() == this->n_vars && upper_bounds.size() == this->n_vars, "ProblemSpec: bounds length must equal n_vars");
        for (std::size_t i = 0; i < this->n_vars; ++i) {
            require(lower_bounds[i] < upper_bounds[i], "ProblemSpec: lower bound must be strictly below upper bound");
        }
    }

    [[nodiscard]] auto contains(std::span<double const> x) const -> bool
    {
        if (x.size() != n_vars) { return false; }
        for (std::size_t i = 0; i < n_vars; ++i) {
            if (!(x[i] >= lower_bounds[i] && x[i] <= upper_bounds[i])) { return false; }
        }
        return true;
    }
};

// Minimization throughout: a dominates b iff a <= b everywhere and a < b somewhere.
inline auto dominates(std::span<double const> a, std::span<double const> b) -> bool
{
    require(a.size() == b.size(), "dominates: objective vectors differ in dimension");
    bool strictly_better = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) { return false; }
        if (a[i] < b[i]) { strictly_better = true; }
    }
    return strictly_better;
}

inline auto dominates(Solution const& a, Solution const& b) -> bool
{
    return dominates(std::span<double const>(a.objectives), std::span<double const>(b.objectives));
}

/// Members of `set` not dominated by any other member, in input order.
/// Points with identical objective vectors are all kept.
inline auto non_dominated_filter(std::span<Solution const> set) -> std::vector<Solution>
{
    std::vector<Solution> survivors;
    for (std::size_t i = 0; i < set.size(); ++i) {
        require(set[i].objectives.size() == set.front().objectives.size(), "non_dominated_filter: mixed objective dimensions");
        bool dominated = false;
        for (std::size_t j = 0; j < set.size() && !dominated; ++j) {
            dominated = (j != i) && dominates(set[j], set[i]);
        }
        if (!dominated) { survivors.push_back(set[i]); }
    }
    return survivors;
}

// Index form, used where callers need to map survivors back to their sources.
inline auto non_dominated_indices(std::span<std::vector<double> const> points) -> std::vector<std::size_t>
{
    std::vector<std::size_t> survivors;
    for (std::size_t i = 0; i < points.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < points.size() && !dominated; ++j) {
            dominated = (j != i) && dominates(points[j], points[i]);
        }
        if (!dominated) { survivors.push_back(i); }
    }
    return survivors;
}

} // namespace knnavg

#endif
