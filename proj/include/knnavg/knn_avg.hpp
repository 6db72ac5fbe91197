#ifndef KNNAVG_KNN_AVG_HPP
#define KNNAVG_KNN_AVG_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "knnavg/core.hpp"

namespace knnavg::knn {

/// Variances below this are treated as zero: the dimension is skipped in SED.
inline constexpr double zero_variance_threshold = 1e-12;

/// Standardized Euclidean distance, sqrt(sum_i (a_i - b_i)^2 / var_i).
/// Dimensions whose variance is below `zero_variance_threshold` contribute 0.
inline auto sed(std::span<double const> a, std::span<double const> b, std::span<double const> variances) -> double
{
    require(a.size() == b.size() && a.size() == variances.size(), "sed: vectors differ in length");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        require(variances[i] >= 0.0, "sed: negative variance");
        if (variances[i] < zero_variance_threshold) { continue; }
        double const d = a[i] - b[i];
        sum += d * d / variances[i];
    }
    return std::sqrt(sum);
}

/// One sampled solution as stored in the history.
struct HistoryRecord {
    std::vector<double> variables;
    std::vector<double> raw_objectives;
    std::size_t generation{};

    friend auto operator==(HistoryRecord const&, HistoryRecord const&) -> bool = default;
};

/// Append-only store of every sampled solution of a run.
///
/// Keeps a running per-variable mean / sum of squared deviations (Welford),
/// so population variances are available in O(n) after each append.
class EvaluationHistory {
public:
    void append(Solution const& s, std::size_t generation = 0)
    {
        require(s.raw_objectives.has_value(), "EvaluationHistory: solution has no raw objectives");
        if (records_.empty()) {
            mean_.assign(s.variables.size(), 0.0);
            m2_.assign(s.variables.size(), 0.0);
        }
        require(s.variables.size() == mean_.size(), "EvaluationHistory: variable dimension changed");
        require(records_.empty() || s.raw_objectives->size() == records_.front().raw_objectives.size(),
            "EvaluationHistory: objective dimension changed");

        records_.push_back({ s.variables, *s.raw_objectives, generation });
        auto const n = static_cast<double>(records_.size());
        for (std::size_t i = 0; i < mean_.size(); ++i) {
            double const delta = s.variables[i] - mean_[i];
            mean_[i] += delta / n;
            m2_[i] += delta * (s.variables[i] - mean_[i]);
        }
    }

    void append(std::span<Solution const> batch, std::size_t generation = 0)
    {
        for (auto const& s : batch) { append(s, generation); }
    }

    [[nodiscard]] auto size() const -> std::size_t { return records_.size(); }
    [[nodiscard]] auto empty() const -> bool { return records_.empty(); }
    [[nodiscard]] auto records() const -> std::span<HistoryRecord const> { return records_; }
    [[nodiscard]] auto operator[](std::size_t i) const -> HistoryRecord const& { return records_[i]; }

    friend auto operator==(EvaluationHistory const&, EvaluationHistory const&) -> bool = default;

    /// Population variance of every variable dimension over all records.
    [[nodiscard]] auto variances() const -> std::vector<double>
    {
        require(!records_.empty(), "history_variances: empty history");
        std::vector<double> out(m2_.size());
        auto const n = static_cast<double>(records_.size());
        for (std::size_t i = 0; i < m2_.size(); ++i) { out[i] = std::max(0.0, m2_[i] / n); }
        return out;
    }

private:
    std::vector<HistoryRecord> records_;
    std::vector<double> mean_;
    std::vector<double> m2_;
};

inline auto history_variances(EvaluationHistory const& history) -> std::vector<double>
{
    return history.variances();
}

/// How a neighbour's distance turns into its averaging weight.
/// Only `Squared` (MD - sed^2) is used by the experiments.
enum class WeightShape { Squared, Linear, Uniform };

inline auto to_string(WeightShape w) -> std::string
{
    switch (w) {
    case WeightShape::Squared: return "squared";
    case WeightShape::Linear: return "linear";
    case WeightShape::Uniform: return "uniform";
    }
    return "?";
}

inline auto parse_weight_shape(std::string_view name) -> WeightShape
{
    if (name == "squared") { return WeightShape::Squared; }
    if (name == "linear") { return WeightShape::Linear; }
    if (name == "uniform") { return WeightShape::Uniform; }
    throw ContractViolation("unknown weight shape '" + std::string(name) + "'");
}

struct KnnConfig {
    std::size_t k{ 10 };
    double max_dist{ 0.25 };
    WeightShape weights{ WeightShape::Squared };

    void validate() const
    {
        require(k >= 1, "KnnConfig: k must be at least 1");
        require(max_dist > 0.0, "KnnConfig: max_dist must be positive");
    }

    /// Weight of a neighbour at SED `d`. Negative values are clamped to 0.
    [[nodiscard]] auto weight(double d) const -> double
    {
        switch (weights) {
        case WeightShape::Squared: return std::max(max_dist - d * d, 0.0);
        case WeightShape::Linear: return std::max(max_dist - d, 0.0);
        case WeightShape::Uniform: return 1.0;
        }
        return 0.0;
    }
};

/// Neighbour selected for one query: history index, its SED and its weight.
struct Neighbour {
    std::size_t index{};
    double distance{};
    double weight{};
};

/// The k nearest history records within `max_dist` of the query at history
/// position `self`. Ordered by (distance, query itself first, insertion index).
inline auto select_neighbours(EvaluationHistory const& history, std::size_t self, std::span<double const> variances, KnnConfig const& cfg)
    -> std::vector<Neighbour>
{
    auto const& query = history[self].variables;
    std::vector<Neighbour> candidates;
    candidates.reserve(history.size());
    for (std::size_t j = 0; j < history.size(); ++j) {
        double const d = sed(query, history[j].variables, variances);
        if (d <= cfg.max_dist) { candidates.push_back({ j, d, 0.0 }); }
    }
    auto const rank = [self](Neighbour const& a, Neighbour const& b) {
        if (a.distance != b.distance) { return a.distance < b.distance; }
        if ((a.index == self) != (b.index == self)) { return a.index == self; }
        return a.index < b.index;
    };
    auto const keep = std::min(cfg.k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(), rank);
    candidates.resize(keep);
    for (auto& c : candidates) { c.weight = cfg.weight(c.distance); }
    return candidates;
}

/// Replace each solution's objectives by the weighted mean of the raw
/// objectives of its k nearest history records (SED <= max_dist).
///
/// The population must already be the trailing records of `history`, in
/// order: a solution is always its own neighbour at distance 0. Variances are
/// taken once per call. Weights are normalized before summation, so a single
/// neighbour reproduces its raw objectives exactly. If every weight is zero,
/// the raw objectives are returned unchanged.
inline auto knn_evaluate(std::span<Solution const> population, EvaluationHistory const& history, KnnConfig const& cfg)
    -> std::vector<Solution>
{
    cfg.validate();
    if (population.empty()) { return {}; }
    require(history.size() >= population.size(), "knn_evaluate: population must be appended to the history first");

    auto const offset = history.size() - population.size();
    for (std::size_t i = 0; i < population.size(); ++i) {
        require(population[i].raw_objectives.has_value(), "knn_evaluate: solution has no raw objectives");
        require(history[offset + i].variables == population[i].variables
                && history[offset + i].raw_objectives == *population[i].raw_objectives,
            "knn_evaluate: population must be the most recent history records");
    }

    auto const variances = history.variances();
    std::vector<Solution> out;
    out.reserve(population.size());
    for (std::size_t i = 0; i < population.size(); ++i) {
        auto const& raw = *population[i].raw_objectives;
        auto const neighbours = select_neighbours(history, offset + i, variances, cfg);

        double total = 0.0;
        for (auto const& n : neighbours) { total += n.weight; }

        Solution s;
        s.variables = population[i].variables;
        s.raw_objectives = raw;
        if (total <= 0.0) {
            s.objectives = raw;
        } else {
            s.objectives.assign(raw.size(), 0.0);
            for (auto const& n : neighbours) {
                double const w = n.weight / total;
                auto const& values = history[n.index].raw_objectives;
                for (std::size_t d = 0; d < raw.size(); ++d) { s.objectives[d] += w * values[d]; }
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace knnavg::knn

#endif
