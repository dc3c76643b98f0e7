#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mimoe/molecule_io.hpp"
#include "mimoe/tensor.hpp"

namespace mimoe {

// Area under the empirical ROC curve, tied scores counted as half
// (rank-averaged Mann-Whitney statistic). Empty unless both classes occur.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const double> labels);

struct Metrics {
    TaskKind kind = TaskKind::regression;
    // RMSE or ROC-AUC per task; NaN where the task has no usable labels.
    std::vector<double> per_task;
    // Mean over usable tasks: RMSE for regression, ROC-AUC for classification.
    double mean = 0.0;
    // Mean squared error over all present entries (regression only).
    double mse = 0.0;
    std::vector<std::string> warnings;

    bool higher_is_better() const noexcept { return kind == TaskKind::classification; }
};

// predictions, targets and mask are samples x tasks.
Metrics compute_metrics(TaskKind kind, const Tensor& predictions, const Tensor& targets, const Tensor& mask);

}  // namespace mimoe
