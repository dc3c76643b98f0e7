#include "mimoe/losses.hpp"

#include <cmath>
#include <string>

#include "mimoe/errors.hpp"

namespace mimoe {
namespace {

double dispersion(const std::vector<double>& s, double eps) {
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= static_cast<double>(s.size());
    double acc = 0.0;
    for (double v : s) acc += (v - mean) * (v - mean);
    return acc / (mean * mean + eps) / static_cast<double>(s.size());
}

std::vector<double> column_totals(std::span<const std::vector<double>> rows) {
    if (rows.empty()) throw ArgumentError("balance loss needs at least one routing row");
    std::vector<double> s(rows.front().size(), 0.0);
    for (const auto& r : rows) {
        if (r.size() != s.size()) throw ShapeError("balance loss: routing rows differ in width");
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += r[i];
    }
    return s;
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw LossError(std::string("non-finite ") + what + " loss");
}

}  // namespace

Var task_loss(Tape& tape, Var predictions, const Tensor& targets, const Tensor& mask, TaskKind kind) {
    return kind == TaskKind::regression ? tape.masked_mse(predictions, targets, mask)
                                        : tape.masked_bce_logits(predictions, targets, mask);
}

Var score_balance_loss(Tape& tape, Var alpha, double eps) {
    return tape.dispersion_ratio(tape.column_sums(alpha), eps);
}

Var load_balance_loss(Tape& tape, Var alpha, std::span<const std::vector<std::size_t>> selected, double eps,
                      bool use_indicator) {
    if (!use_indicator) return score_balance_loss(tape, alpha, eps);
    const Tensor& a = tape.value(alpha);
    if (selected.size() != a.rows) throw ShapeError("load balance: selection count differs from batch size");
    Tensor p(1, a.cols);
    for (const auto& sel : selected) {
        for (auto i : sel) p(0, i) += 1.0;
    }
    return tape.dispersion_ratio(tape.constant(std::move(p)), eps);
}

Var total_loss(Tape& tape, Var task, Var score, Var load, double lambda) {
    require_finite(tape.value(task).data.at(0), "task");
    require_finite(tape.value(score).data.at(0), "score-balance");
    require_finite(tape.value(load).data.at(0), "load-balance");
    const Var terms[] = {task, score, load};
    const double weights[] = {1.0, lambda, lambda};
    const Var total = tape.weighted_sum(terms, weights);
    require_finite(tape.value(total).data.at(0), "total");
    return total;
}

double score_balance_value(std::span<const std::vector<double>> alpha, double eps) {
    return dispersion(column_totals(alpha), eps);
}

double load_balance_value(std::span<const std::vector<double>> alpha,
                          std::span<const std::vector<std::size_t>> selected, double eps, bool use_indicator) {
    if (!use_indicator) return score_balance_value(alpha, eps);
    if (alpha.empty()) throw ArgumentError("balance loss needs at least one routing row");
    std::vector<double> p(alpha.front().size(), 0.0);
    for (const auto& sel : selected) {
        for (auto i : sel) p.at(i) += 1.0;
    }
    return dispersion(p, eps);
}

double total_loss_value(double task, double score, double load, double lambda) {
    require_finite(task, "task");
    require_finite(score, "score-balance");
    require_finite(load, "load-balance");
    return task + lambda * score + lambda * load;
}

}  // namespace mimoe
