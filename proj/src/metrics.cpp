#include "mimoe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mimoe/errors.hpp"

namespace mimoe {

std::optional<double> roc_auc(std::span<const double> scores, std::span<const double> labels) {
    if (scores.size() != labels.size()) throw ShapeError("roc_auc: scores and labels differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Average 1-based rank of every tie group.
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
        i = j + 1;
    }
    double positives = 0.0, rank_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != 0.0) {
            positives += 1.0;
            rank_sum += rank[i];
        }
    }
    const double negatives = static_cast<double>(n) - positives;
    if (positives == 0.0 || negatives == 0.0) return std::nullopt;
    return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

Metrics compute_metrics(TaskKind kind, const Tensor& predictions, const Tensor& targets, const Tensor& mask) {
    if (predictions.rows != targets.rows || predictions.cols != targets.cols || mask.rows != targets.rows ||
        mask.cols != targets.cols) {
        throw ShapeError("metrics: shapes differ, " + predictions.shape_string() + " vs " + targets.shape_string());
    }
    Metrics m;
    m.kind = kind;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    double total_sq = 0.0, total_count = 0.0;
    double sum = 0.0;
    std::size_t usable = 0;
    for (std::size_t t = 0; t < targets.cols; ++t) {
        std::vector<double> s, y;
        for (std::size_t i = 0; i < targets.rows; ++i) {
            if (mask(i, t) == 0.0) continue;
            s.push_back(predictions(i, t));
            y.push_back(targets(i, t));
        }
        double value = nan;
        if (kind == TaskKind::regression) {
            if (!s.empty()) {
                double sq = 0.0;
                for (std::size_t i = 0; i < s.size(); ++i) sq += (s[i] - y[i]) * (s[i] - y[i]);
                total_sq += sq;
                total_count += static_cast<double>(s.size());
                value = std::sqrt(sq / static_cast<double>(s.size()));
            }
        } else if (auto auc = roc_auc(s, y)) {
            value = *auc;
        }
        if (std::isnan(value)) {
            m.warnings.push_back("task " + std::to_string(t) + " has no usable labels; excluded from the mean");
        } else {
            sum += value;
            ++usable;
        }
        m.per_task.push_back(value);
    }
    m.mean = usable > 0 ? sum / static_cast<double>(usable) : nan;
    m.mse = total_count > 0.0 ? total_sq / total_count : nan;
    return m;
}

}  // namespace mimoe
