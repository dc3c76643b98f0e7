#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mimoe/config.hpp"
#include "mimoe/metrics.hpp"
#include "mimoe/model.hpp"

namespace mimoe {

struct Split {
    std::vector<std::size_t> train, valid, test;
};

// Seeded Fisher-Yates shuffle of 0..n-1, then consecutive blocks. Validation
// and test sizes are round(fraction * n); training takes the remainder.
Split split_indices(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed);

struct EpochLog {
    std::size_t epoch = 0;
    double lr = 0.0;
    double task = 0.0, score = 0.0, load = 0.0, total = 0.0;
    double val_metric = 0.0;
};

inline constexpr std::string_view kEpochLogHeader = "epoch,lr,task,score,load,total,val_metric";
std::string to_csv(const EpochLog& log);

struct Checkpoint {
    MoEModel model;
    double best_metric = 0.0;
    std::size_t epoch = 0;
};

// Layout (little endian):
//   "MIMOECK1", u32 version
//   u64 config length, config JSON
//   u64 task count, u64 schedule hash, f64 best metric, u64 epoch
//   f64[task count] target mean, f64[task count] target scale
//   u64 parameter count, then per parameter:
//     u32 name length, name, u64 rows, u64 cols, f64[rows * cols] row-major
std::string checkpoint_bytes(const Checkpoint& ckpt);
Checkpoint checkpoint_from_bytes(std::string_view bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::vector<PreparedMolecule> prepare_dataset(const Dataset& data, const TrainConfig& cfg,
                                              TrajectoryCache* cache = nullptr);

struct TrainOptions {
    TrajectoryCache* cache = nullptr;
    // Prepared molecules for exactly this dataset and configuration; computed
    // when null.
    const std::vector<PreparedMolecule>* prepared = nullptr;
    std::ostream* log = nullptr;  // per-epoch CSV, header first
};

struct TrainResult {
    Checkpoint checkpoint;  // best validation epoch
    std::vector<EpochLog> history;
    Split split;
};

// Throws DataError for an empty dataset or a task mismatch, NumericError
// when a loss or gradient stops being finite.
TrainResult train(const TrainConfig& cfg, const Dataset& data, const TrainOptions& opts = {});

// Metrics in target units on the given sample indices.
Metrics evaluate(MoEModel& model, const Dataset& data, std::span<const std::size_t> indices,
                 const std::vector<PreparedMolecule>* prepared = nullptr);
Metrics evaluate(MoEModel& model, const Dataset& data);

}  // namespace mimoe
