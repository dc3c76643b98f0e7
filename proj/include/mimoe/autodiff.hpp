#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mimoe/tensor.hpp"

namespace mimoe {

// Named parameter tensors with matching gradient buffers.
class ParamStore {
public:
    explicit ParamStore(std::uint64_t seed = 0) : rng_(seed) {}

    // Glorot-uniform in +-sqrt(6 / (rows + cols)).
    std::size_t add_glorot(const std::string& name, std::size_t rows, std::size_t cols);
    std::size_t add_zeros(const std::string& name, std::size_t rows, std::size_t cols);
    std::size_t add(const std::string& name, Tensor value);

    std::size_t count() const noexcept { return values_.size(); }
    std::size_t parameter_count() const;
    const std::string& name(std::size_t id) const { return names_.at(id); }
    std::optional<std::size_t> find(const std::string& name) const;
    std::size_t id(const std::string& name) const;

    Tensor& value(std::size_t id) { return values_.at(id); }
    const Tensor& value(std::size_t id) const { return values_.at(id); }
    Tensor& grad(std::size_t id) { return grads_.at(id); }
    const Tensor& grad(std::size_t id) const { return grads_.at(id); }

    void zero_grad();
    Rng& rng() { return rng_; }

    friend bool operator==(const ParamStore& a, const ParamStore& b) {
        return a.names_ == b.names_ && a.values_ == b.values_;
    }

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
    std::vector<Tensor> grads_;
    Rng rng_;
};

struct Var {
    std::uint32_t id = UINT32_MAX;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so reverse
// insertion order is a valid reverse topological order. A tape can be
// differentiated once; record a new tape for the next step.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    // Gradients flow into params.grad(id) on backward().
    Var param(ParamStore& params, std::size_t id);

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    // x (r x i) * w (i x o)
    Var matmul(Var x, Var w);
    // x * w + b, with b a 1 x o row broadcast over rows.
    Var linear(Var x, Var w, Var b);
    Var add(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double s);
    Var tanh(Var a);
    // ln(0.5 e^x + 0.5)
    Var shifted_softplus(Var a);
    Var gather_rows(Var a, std::vector<std::uint32_t> index);
    // out has `rows` rows; out[index[e]] += a[e], rows visited in ascending e.
    Var scatter_add_rows(Var a, std::vector<std::uint32_t> index, std::size_t rows);
    // Row-wise softmax over entries with keep != 0; others are exactly 0 and
    // receive no gradient. Throws RoutingError if a row keeps nothing.
    Var masked_softmax_rows(Var logits, std::vector<std::uint8_t> keep);
    // 1 x cols
    Var column_sums(Var a);
    // (1/K) sum_i (s_i - mean)^2 / (mean^2 + eps) for a 1 x K row s.
    Var dispersion_ratio(Var s, double eps);
    // Mean squared error over entries with mask != 0.
    Var masked_mse(Var pred, const Tensor& target, const Tensor& mask);
    // Mean binary cross-entropy on logits over entries with mask != 0.
    Var masked_bce_logits(Var logits, const Tensor& target, const Tensor& mask);
    // out[b] = sum over k ascending of alpha[b, k] * experts[k][rows[k][b]],
    // skipping k where rows[k][b] < 0. Every experts[k] has the same width.
    Var mixture(Var alpha, std::span<const Var> experts, std::vector<std::vector<std::int32_t>> rows);
    // sum_i weights[i] * terms[i] for 1 x 1 terms.
    Var weighted_sum(std::span<const Var> terms, std::span<const double> weights);

    // loss must be 1 x 1. Throws if called twice.
    void backward(Var loss);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&, std::uint32_t self)> backward;
    };

    Var push(Tensor value, std::function<void(Tape&, std::uint32_t)> backward);
    Node& node(Var v) { return nodes_.at(v.id); }

    std::vector<Node> nodes_;
    bool differentiated_ = false;
};

// Stable softmax over finite entries; -inf entries map to exactly 0.
// Throws RoutingError if every entry is -inf.
std::vector<double> softmax(std::span<const double> z);

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t coordinates = 0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

// Fourth-order central differences (steps +-h, +-2h) on every coordinate of
// every parameter against the tape gradient.
// relative error = |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8).
GradCheckReport grad_check(const std::function<Var(Tape&)>& loss_fn, ParamStore& params, double h);

}  // namespace mimoe
