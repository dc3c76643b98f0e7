#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mimoe/autodiff.hpp"
#include "mimoe/molecule_io.hpp"

namespace mimoe {

struct LossConfig {
    double lambda = 0.01;
    double epsilon = 1e-8;
    bool load_uses_indicator = false;
};

// Masked MSE (regression) or masked BCE on logits (classification), averaged
// over present (sample, task) entries. Throws LossError when nothing is present.
Var task_loss(Tape& tape, Var predictions, const Tensor& targets, const Tensor& mask, TaskKind kind);

// alpha is B x K. Dispersion of s = sum_b alpha_b around its mean.
Var score_balance_loss(Tape& tape, Var alpha, double eps);

// P(b, i) = alpha_i^(b) literally, or 1[i in selected(b)] with indicators,
// in which case the loss is a constant on the tape.
Var load_balance_loss(Tape& tape, Var alpha, std::span<const std::vector<std::size_t>> selected, double eps,
                      bool use_indicator);

// task + lambda * score + lambda * load. Throws LossError if any part is
// not finite.
Var total_loss(Tape& tape, Var task, Var score, Var load, double lambda);

// Plain-value versions on B x K routing rows.
double score_balance_value(std::span<const std::vector<double>> alpha, double eps);
double load_balance_value(std::span<const std::vector<double>> alpha,
                          std::span<const std::vector<std::size_t>> selected, double eps, bool use_indicator);
double total_loss_value(double task, double score, double load, double lambda);

}  // namespace mimoe
