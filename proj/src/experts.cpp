#include "mimoe/experts.hpp"

#include <cmath>

#include "mimoe/errors.hpp"
#include "mimoe/kernels.hpp"

namespace mimoe {

std::vector<double> expand_edge_features(double distance, double c_max, std::size_t n_rbf) {
    if (!(distance > 0.0) || !std::isfinite(distance)) {
        throw ArgumentError("edge distance must be positive, got " + std::to_string(distance));
    }
    if (!(c_max > 0.0) || n_rbf < 2) throw ArgumentError("radial basis needs c_max > 0 and n_rbf >= 2");
    const double gamma = (static_cast<double>(n_rbf) / c_max) * (static_cast<double>(n_rbf) / c_max);
    const double spacing = c_max / static_cast<double>(n_rbf - 1);
    std::vector<double> out(n_rbf);
    for (std::size_t m = 0; m < n_rbf; ++m) {
        const double diff = distance - static_cast<double>(m) * spacing;
        out[m] = std::exp(-gamma * diff * diff);
    }
    return out;
}

ExpertParams add_expert_params(ParamStore& params, const std::string& prefix, const ExpertConfig& cfg) {
    const std::size_t d = cfg.hidden;
    ExpertParams ep;
    ep.embedding = params.add_glorot(prefix + ".embedding", kMaxAtomicNumber, d);
    for (std::size_t l = 0; l < cfg.depth; ++l) {
        const std::string p = prefix + ".layer" + std::to_string(l);
        ExpertParams::Layer layer{};
        layer.filter_w = params.add_glorot(p + ".filter.w", cfg.n_rbf, d);
        layer.filter_b = params.add_zeros(p + ".filter.b", 1, d);
        layer.msg_w = params.add_glorot(p + ".msg.w", d, d);
        layer.msg_b = params.add_zeros(p + ".msg.b", 1, d);
        layer.upd1_w = params.add_glorot(p + ".upd1.w", d, d);
        layer.upd1_b = params.add_zeros(p + ".upd1.b", 1, d);
        layer.upd2_w = params.add_glorot(p + ".upd2.w", d, d);
        layer.upd2_b = params.add_zeros(p + ".upd2.b", 1, d);
        ep.layers.push_back(layer);
    }
    ep.readout_w = params.add_glorot(prefix + ".readout.w", d, d);
    ep.readout_b = params.add_zeros(prefix + ".readout.b", 1, d);
    return ep;
}

void ExpertBatch::add(const PointCloud& cloud, const DistanceMatrix& dm, const InteractionGraph& g,
                      const ExpertConfig& cfg) {
    if (g.n != cloud.size() || dm.size() != cloud.size()) {
        throw ShapeError("expert graph has " + std::to_string(g.n) + " atoms but the cloud has " +
                         std::to_string(cloud.size()));
    }
    const auto offset = static_cast<std::uint32_t>(nodes());
    const auto mol = static_cast<std::uint32_t>(molecules);
    const double weight = cfg.pooling == Pooling::mean ? 1.0 / static_cast<double>(cloud.size()) : 1.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        atom_type.push_back(static_cast<std::uint32_t>(cloud.atom_numbers[i] - 1));
        node_molecule.push_back(mol);
        node_weight.push_back(weight);
    }
    for (const auto& [i, j] : g.edges) {
        const auto features = expand_edge_features(dm(i, j), cfg.rbf_max, cfg.n_rbf);
        src.push_back(offset + j);
        dst.push_back(offset + i);
        rbf.insert(rbf.end(), features.begin(), features.end());
        src.push_back(offset + i);
        dst.push_back(offset + j);
        rbf.insert(rbf.end(), features.begin(), features.end());
    }
    ++molecules;
}

Var expert_forward(Tape& tape, ParamStore& params, const ExpertParams& ep, const ExpertConfig& cfg,
                   const ExpertBatch& batch) {
    const std::size_t d = cfg.hidden;
    const std::size_t n_nodes = batch.nodes();
    const std::size_t n_edges = batch.edges();

    Var h = tape.gather_rows(tape.param(params, ep.embedding), batch.atom_type);
    Var edge_features;
    if (n_edges > 0) {
        Tensor rbf(n_edges, cfg.n_rbf);
        rbf.data = batch.rbf;
        edge_features = tape.constant(std::move(rbf));
    }

    for (const auto& layer : ep.layers) {
        if (n_edges > 0) {
            const Var filter = tape.shifted_softplus(
                tape.linear(edge_features, tape.param(params, layer.filter_w), tape.param(params, layer.filter_b)));
            const Var neighbor = tape.gather_rows(h, batch.src);
            const Var msg = tape.shifted_softplus(tape.linear(tape.mul(neighbor, filter), tape.param(params, layer.msg_w),
                                                              tape.param(params, layer.msg_b)));
            const Var agg = tape.scatter_add_rows(msg, batch.dst, n_nodes);
            const Var u1 = tape.shifted_softplus(
                tape.linear(agg, tape.param(params, layer.upd1_w), tape.param(params, layer.upd1_b)));
            const Var u2 = tape.linear(u1, tape.param(params, layer.upd2_w), tape.param(params, layer.upd2_b));
            h = tape.add(h, u2);
        } else {
            // No messages anywhere: m_i = 0 for every node.
            const Var agg = tape.constant(Tensor(n_nodes, d));
            const Var u1 = tape.shifted_softplus(
                tape.linear(agg, tape.param(params, layer.upd1_w), tape.param(params, layer.upd1_b)));
            const Var u2 = tape.linear(u1, tape.param(params, layer.upd2_w), tape.param(params, layer.upd2_b));
            h = tape.add(h, u2);
        }
    }

    if (cfg.pooling == Pooling::mean) {
        Tensor w(n_nodes, d);
        for (std::size_t i = 0; i < n_nodes; ++i) std::fill(w.row(i).begin(), w.row(i).end(), batch.node_weight[i]);
        h = tape.mul(h, tape.constant(std::move(w)));
    }
    const Var pooled = tape.scatter_add_rows(h, batch.node_molecule, batch.molecules);
    return tape.linear(pooled, tape.param(params, ep.readout_w), tape.param(params, ep.readout_b));
}

std::vector<double> expert_embedding(const InteractionGraph& g, const PointCloud& cloud, ParamStore& params,
                                     const ExpertParams& ep, const ExpertConfig& cfg) {
    if (g.n != cloud.size()) {
        throw ShapeError("expert graph has " + std::to_string(g.n) + " atoms but the cloud has " +
                         std::to_string(cloud.size()));
    }
    ExpertBatch batch;
    batch.add(cloud, pairwise_distances(cloud), g, cfg);
    Tape tape;
    return tape.value(expert_forward(tape, params, ep, cfg, batch)).data;
}

std::vector<double> moe_aggregate(std::span<const std::vector<double>> embeddings, const RoutingWeights& weights) {
    if (embeddings.size() != weights.alpha.size()) {
        throw ShapeError("moe_aggregate: " + std::to_string(embeddings.size()) + " embeddings for " +
                         std::to_string(weights.alpha.size()) + " weights");
    }
    std::vector<double> h;
    for (std::size_t k = 0; k < embeddings.size(); ++k) {
        if (weights.alpha[k] == 0.0) continue;
        if (h.empty()) {
            h.assign(embeddings[k].size(), 0.0);
        } else if (embeddings[k].size() != h.size()) {
            throw ShapeError("moe_aggregate: embedding widths differ");
        }
        kernels::axpy(weights.alpha[k], embeddings[k], h);
    }
    return h;
}

HeadParams add_head_params(ParamStore& params, std::size_t hidden, std::size_t outputs) {
    HeadParams head;
    head.w = params.add_glorot("head.w", hidden, outputs);
    head.b = params.add_zeros("head.b", 1, outputs);
    head.outputs = outputs;
    return head;
}

Var predict(Tape& tape, ParamStore& params, const HeadParams& head, Var embeddings) {
    return tape.linear(embeddings, tape.param(params, head.w), tape.param(params, head.b));
}

}  // namespace mimoe
