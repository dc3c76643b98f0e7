#include "mimoe/gating.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mimoe/errors.hpp"

namespace mimoe {

GateParams add_gate_params(ParamStore& params, std::size_t radius_count, std::size_t hidden, std::size_t experts,
                           GateType type) {
    if (type == GateType::transformer) {
        throw ConfigError("gate_type 'transformer' is not implemented; use 'mlp'");
    }
    GateParams g;
    g.radius_count = radius_count;
    g.hidden = hidden;
    g.experts = experts;
    g.w1 = params.add_glorot("gate.w1", g.input_width(), hidden);
    g.b1 = params.add_zeros("gate.b1", 1, hidden);
    g.w2 = params.add_glorot("gate.w2", hidden, experts);
    g.b2 = params.add_zeros("gate.b2", 1, experts);
    return g;
}

Tensor flatten_trajectories(std::span<const TopoTrajectory* const> trajs) {
    const std::size_t width = trajs.empty() ? 0 : trajs.front()->values.size();
    Tensor x(trajs.size(), width);
    for (std::size_t b = 0; b < trajs.size(); ++b) {
        if (trajs[b]->values.size() != width) throw ShapeError("trajectories in a batch differ in length");
        std::copy(trajs[b]->values.begin(), trajs[b]->values.end(), x.row(b).begin());
    }
    return x;
}

Var encode_trajectories(Tape& tape, ParamStore& params, const GateParams& gate, Var flattened) {
    const Tensor& x = tape.value(flattened);
    if (x.cols != gate.input_width()) {
        throw ShapeError("gate expects " + std::to_string(gate.radius_count) + " radii (" +
                         std::to_string(gate.input_width()) + " inputs), got " + std::to_string(x.cols));
    }
    const Var hidden = tape.tanh(tape.linear(flattened, tape.param(params, gate.w1), tape.param(params, gate.b1)));
    return tape.linear(hidden, tape.param(params, gate.w2), tape.param(params, gate.b2));
}

std::vector<double> encode_trajectory(ParamStore& params, const GateParams& gate, const TopoTrajectory& traj) {
    Tape tape;
    const TopoTrajectory* one[] = {&traj};
    const Var logits = encode_trajectories(tape, params, gate, tape.constant(flatten_trajectories(one)));
    return tape.value(logits).data;
}

std::vector<std::size_t> topk_indices(std::span<const double> logits, std::size_t k) {
    if (k < 1 || k > logits.size()) {
        throw ArgumentError("top-k: k = " + std::to_string(k) + " outside [1, " + std::to_string(logits.size()) + "]");
    }
    for (double v : logits) {
        if (std::isnan(v)) throw RoutingError("top-k: NaN logit");
    }
    std::vector<std::size_t> order(logits.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

std::vector<double> topk_mask(std::span<const double> logits, std::size_t k) {
    const auto keep = topk_indices(logits, k);
    std::vector<double> out(logits.size(), -std::numeric_limits<double>::infinity());
    for (auto i : keep) out[i] = logits[i];
    return out;
}

RoutingWeights routing_weights(std::span<const double> masked) {
    RoutingWeights w;
    w.alpha = softmax(masked);
    for (std::size_t i = 0; i < masked.size(); ++i) {
        if (!(std::isinf(masked[i]) && masked[i] < 0)) w.selected.push_back(i);
    }
    return w;
}

RoutedBatch route_batch(Tape& tape, Var logits, std::size_t k) {
    const Tensor& z = tape.value(logits);
    RoutedBatch out;
    std::vector<std::uint8_t> keep(z.size(), 0);
    out.selected.reserve(z.rows);
    for (std::size_t b = 0; b < z.rows; ++b) {
        auto sel = topk_indices(z.row(b), k);
        for (auto i : sel) keep[b * z.cols + i] = 1;
        out.selected.push_back(std::move(sel));
    }
    out.alpha = tape.masked_softmax_rows(logits, std::move(keep));
    return out;
}

}  // namespace mimoe
