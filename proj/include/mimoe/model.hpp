#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mimoe/autodiff.hpp"
#include "mimoe/config.hpp"
#include "mimoe/descriptors.hpp"
#include "mimoe/experts.hpp"
#include "mimoe/gating.hpp"

namespace mimoe {

// The seven forward steps, in execution order.
enum class ForwardStep {
    build_graphs,
    trajectory,
    gate_logits,
    topk_softmax,
    expert_embeddings,
    aggregate,
    head,
};

std::string_view to_string(ForwardStep step);

using TraceSink = std::function<void(std::string_view molecule_id, ForwardStep step)>;

struct MoEModel {
    TrainConfig cfg;
    FiltrationSchedule schedule;
    std::size_t task_count = 1;
    ParamStore params;
    GateParams gate;
    ExpertConfig expert_cfg;
    std::vector<ExpertParams> experts;
    HeadParams head;
    // Regression outputs are produced in standardized units and mapped back
    // with y = mean + scale * out.
    std::vector<double> target_mean;
    std::vector<double> target_scale;
};

// Parameters initialized from cfg.seed. Throws ConfigError on invalid cfg.
MoEModel make_model(const TrainConfig& cfg, std::size_t task_count);

// Everything about a molecule that does not depend on parameters.
struct PreparedMolecule {
    PointCloud cloud;
    DistanceMatrix distances;
    std::vector<InteractionGraph> expert_graphs;
    TopoTrajectory trajectory;
};

// Steps 1 and 2. The trajectory comes from the cache when one is given.
PreparedMolecule prepare_molecule(const PointCloud& cloud, const TrainConfig& cfg, const FiltrationSchedule& sched,
                                  TrajectoryCache* cache = nullptr, const TraceSink& trace = {});

struct ForwardResult {
    Var logits;     // B x K gate logits
    Var alpha;      // B x K routing weights
    std::vector<std::vector<std::size_t>> selected;
    Var embedding;  // B x d aggregated embedding
    Var output;     // B x tasks, model units
};

// Steps 3 to 7 for a batch. Only experts selected by at least one molecule
// are evaluated, and each only on the molecules that selected it.
ForwardResult forward_batch(Tape& tape, MoEModel& model, std::span<const PreparedMolecule* const> batch,
                            const TraceSink& trace = {});

// Runs every expert on every molecule and mixes with the same weights.
// Matches forward_batch bitwise; used to check lazy execution.
ForwardResult forward_batch_all_experts(Tape& tape, MoEModel& model, std::span<const PreparedMolecule* const> batch);

// Converts model outputs to prediction units: regression values in target
// units, classification logits unchanged.
std::vector<double> to_prediction_units(const MoEModel& model, std::span<const double> output_row);

struct Prediction {
    std::vector<double> values;  // per task
    RoutingWeights routing;
};

// The full forward pass for one cloud.
Prediction forward_pass(const PointCloud& cloud, MoEModel& model, TrajectoryCache* cache = nullptr,
                        const TraceSink& trace = {});

// Predictions for many prepared molecules, rows in input order.
std::vector<Prediction> predict_batch(MoEModel& model, std::span<const PreparedMolecule* const> molecules);
std::vector<Prediction> predict_batch(MoEModel& model, std::span<const PreparedMolecule> molecules);

}  // namespace mimoe
