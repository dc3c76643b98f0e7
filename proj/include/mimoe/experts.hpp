#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mimoe/autodiff.hpp"
#include "mimoe/config.hpp"
#include "mimoe/filtration.hpp"
#include "mimoe/gating.hpp"

namespace mimoe {

struct ExpertConfig {
    std::size_t hidden = 32;
    std::size_t depth = 3;
    std::size_t n_rbf = 16;
    double rbf_max = 4.0;  // largest expert cutoff c_K
    Pooling pooling = Pooling::sum;
};

// Gaussian radial basis exp(-gamma (d - mu_m)^2), mu_m uniform on [0, c_K],
// gamma = (n_rbf / c_K)^2. Throws ArgumentError for d <= 0.
std::vector<double> expand_edge_features(double distance, double c_max, std::size_t n_rbf);

// Continuous-filter message passing block parameters, per layer:
//   filter  F   = ssp(rbf W_f + b_f)
//   message m_ij = ssp((h_j * F_ij) W_m + b_m)
//   update  h_i += ssp(m_i W_u1 + b_u1) W_u2 + b_u2,  m_i = sum_j m_ij
struct ExpertParams {
    struct Layer {
        std::size_t filter_w, filter_b, msg_w, msg_b, upd1_w, upd1_b, upd2_w, upd2_b;
    };
    std::size_t embedding = 0;  // kMaxAtomicNumber x hidden
    std::vector<Layer> layers;
    std::size_t readout_w = 0, readout_b = 0;
};

ExpertParams add_expert_params(ParamStore& params, const std::string& prefix, const ExpertConfig& cfg);

// Disjoint union of several molecules' graphs for one expert. Directed
// edges are listed per molecule, in the order of each undirected edge
// (i, j): first j -> i, then i -> j. Every per-molecule quantity depends only
// on that molecule's rows, so results do not depend on batch composition.
struct ExpertBatch {
    std::vector<std::uint32_t> atom_type;  // Z - 1
    std::vector<std::uint32_t> node_molecule;
    std::vector<double> node_weight;       // 1 or 1/n for mean pooling
    std::vector<std::uint32_t> src, dst;
    std::vector<double> rbf;               // edges x n_rbf, row-major
    std::size_t molecules = 0;

    // g must be built from cloud's distances (dm).
    void add(const PointCloud& cloud, const DistanceMatrix& dm, const InteractionGraph& g, const ExpertConfig& cfg);
    std::size_t nodes() const noexcept { return atom_type.size(); }
    std::size_t edges() const noexcept { return src.size(); }
};

// molecules x hidden graph embeddings.
Var expert_forward(Tape& tape, ParamStore& params, const ExpertParams& ep, const ExpertConfig& cfg,
                   const ExpertBatch& batch);

// Single molecule convenience wrapper. Throws ShapeError if g.n != cloud size.
std::vector<double> expert_embedding(const InteractionGraph& g, const PointCloud& cloud, ParamStore& params,
                                     const ExpertParams& ep, const ExpertConfig& cfg);

// h = sum_k alpha_k h_k over experts with alpha_k != 0, in ascending k.
// Embeddings of unselected experts are never read and may be empty.
std::vector<double> moe_aggregate(std::span<const std::vector<double>> embeddings, const RoutingWeights& weights);

struct HeadParams {
    std::size_t w = 0, b = 0;
    std::size_t outputs = 0;
};

HeadParams add_head_params(ParamStore& params, std::size_t hidden, std::size_t outputs);

// Linear head; raw values for regression, logits for classification.
Var predict(Tape& tape, ParamStore& params, const HeadParams& head, Var embeddings);

}  // namespace mimoe
