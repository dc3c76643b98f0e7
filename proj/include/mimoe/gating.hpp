#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mimoe/autodiff.hpp"
#include "mimoe/config.hpp"
#include "mimoe/descriptors.hpp"

namespace mimoe {

// Two-layer MLP f_topo: flattened T x 5 trajectory -> tanh hidden -> K logits.
struct GateParams {
    std::size_t radius_count = 0;  // T
    std::size_t hidden = 0;
    std::size_t experts = 0;       // K
    std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;

    std::size_t input_width() const noexcept { return radius_count * kDescriptorCount; }
};

// Throws ConfigError for GateType::transformer (declared, not implemented).
GateParams add_gate_params(ParamStore& params, std::size_t radius_count, std::size_t hidden, std::size_t experts,
                           GateType type = GateType::mlp);

// Stacks trajectories row-wise into a B x 5T matrix (each row row-major X_topo).
Tensor flatten_trajectories(std::span<const TopoTrajectory* const> trajs);

// B x K raw logits. Throws ShapeError when the input width is not 5T.
Var encode_trajectories(Tape& tape, ParamStore& params, const GateParams& gate, Var flattened);
std::vector<double> encode_trajectory(ParamStore& params, const GateParams& gate, const TopoTrajectory& traj);

// Indices of the k largest entries, ties to the smaller index, ascending.
std::vector<std::size_t> topk_indices(std::span<const double> logits, std::size_t k);

// Keeps the top-k entries and replaces the rest with -inf.
// Throws ArgumentError unless 1 <= k <= K.
std::vector<double> topk_mask(std::span<const double> logits, std::size_t k);

struct RoutingWeights {
    std::vector<double> alpha;           // length K, on the simplex
    std::vector<std::size_t> selected;   // ascending expert indices with alpha > 0 allowed
};

// Softmax over the finite entries of an already masked logit vector.
RoutingWeights routing_weights(std::span<const double> masked);

// Tape version: per-row top-k then masked softmax. Gradient reaches only the
// selected logits; selection is constant within the step.
struct RoutedBatch {
    Var alpha;                                      // B x K
    std::vector<std::vector<std::size_t>> selected;  // per row
};
RoutedBatch route_batch(Tape& tape, Var logits, std::size_t k);

}  // namespace mimoe
