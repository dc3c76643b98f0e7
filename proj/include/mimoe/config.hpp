#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mimoe/filtration.hpp"
#include "mimoe/molecule_io.hpp"

namespace mimoe {

enum class RoutingMode { sparse, dense, one_expert };
enum class GateType { mlp, transformer };
enum class Pooling { sum, mean };

std::string_view to_string(RoutingMode mode);
std::string_view to_string(GateType type);
std::string_view to_string(Pooling pooling);

// Every tunable of the pipeline. Defaults are the shipped configs/default.json.
struct TrainConfig {
    // filtration
    std::vector<double> cutoffs{2.0, 2.5, 3.0, 3.5, 4.0};
    double window_w = 1.0;
    double step_dr = 0.25;
    std::size_t max_neighbors = 0;

    // routing
    RoutingMode routing_mode = RoutingMode::sparse;
    std::size_t top_k = 2;
    GateType gate_type = GateType::mlp;
    std::size_t gate_hidden = 64;

    // experts
    std::size_t hidden_width = 32;
    std::size_t expert_depth = 3;
    std::size_t n_rbf = 16;
    Pooling pooling = Pooling::sum;

    // objective
    double lambda_balance = 0.01;
    double epsilon = 1e-8;
    bool load_uses_indicator = false;
    TaskKind task_kind = TaskKind::regression;
    bool standardize_targets = true;

    // optimization
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::size_t max_epochs = 120;
    std::size_t early_stop_patience = 30;
    double warmup_fraction = 0.05;
    std::uint64_t seed = 0;
    std::array<double, 3> split{0.8, 0.1, 0.1};

    std::string cache_dir;  // empty: in-memory trajectory cache only

    // Cutoffs actually used: the first cutoff alone in one_expert mode.
    std::vector<double> effective_cutoffs() const;
    std::size_t expert_count() const { return effective_cutoffs().size(); }
    // k after applying the routing mode (dense: K, one_expert: 1).
    std::size_t effective_top_k() const;
    FiltrationSchedule schedule() const;

    // Throws ConfigError on out-of-range values.
    void validate() const;
};

// Parses JSON (// comments allowed). Unknown keys are errors; missing keys
// keep their defaults. The result is validated.
TrainConfig config_from_json(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const TrainConfig& cfg);

}  // namespace mimoe
