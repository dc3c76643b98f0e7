#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "mimoe/filtration.hpp"
#include "mimoe/persistence.hpp"

namespace mimoe {

// Randic index divided by n/2; 0 for edgeless graphs.
double randic_normalized(const InteractionGraph& g);

// Raw Wiener index: sum of shortest-path distances over connected pairs u < v.
double wiener_raw(const InteractionGraph& g);

// (W - n(n-1)/2) / ((n^3 - n)/6 - n(n-1)/2), clamped to [0, 1]; 0 when n <= 2.
double wiener_normalized(const InteractionGraph& g);

// Mean of 1/d(u,v) over ordered pairs u != v; disconnected pairs add 0.
double global_efficiency(const InteractionGraph& g);

inline constexpr std::size_t kDescriptorCount = 5;
inline constexpr std::array<const char*, kDescriptorCount> kDescriptorNames = {
    "randic", "wiener", "efficiency", "betti0", "betti1"};

// T x 5 matrix, one row per dense radius, columns (R, W, E, beta0, beta1).
struct TopoTrajectory {
    std::vector<double> radii;
    std::vector<double> values;  // row-major

    std::size_t rows() const noexcept { return radii.size(); }
    double operator()(std::size_t t, std::size_t c) const { return values[t * kDescriptorCount + c]; }
    friend bool operator==(const TopoTrajectory&, const TopoTrajectory&) = default;
};

TopoTrajectory build_trajectory(const DistanceMatrix& dm, const FiltrationSchedule& sched);
TopoTrajectory build_trajectory(const PointCloud& cloud, const FiltrationSchedule& sched);

// "r,randic,wiener,efficiency,betti0,betti1" followed by one line per radius.
std::string trajectory_csv(const TopoTrajectory& traj);

// Molecule id reduced to a portable file name component.
std::string file_stem(const std::string& id);

// Hash of the atomic numbers and exact coordinate bits of a cloud.
std::uint64_t cloud_fingerprint(const PointCloud& cloud);

// Trajectories keyed by (molecule id, schedule hash). Backed by an in-memory
// map and, when a directory is given, by one binary sidecar file per key.
// Files are written to a temporary name and renamed into place, so
// concurrent readers never observe a partial record. A stored record whose
// cloud fingerprint differs from the requested cloud is ignored.
class TrajectoryCache {
public:
    TrajectoryCache() = default;
    explicit TrajectoryCache(std::filesystem::path dir);

    TopoTrajectory get_or_compute(const PointCloud& cloud, const FiltrationSchedule& sched);
    std::optional<TopoTrajectory> lookup(const PointCloud& cloud, const FiltrationSchedule& sched);

    std::size_t hits() const noexcept { return hits_; }
    std::size_t misses() const noexcept { return misses_; }
    std::filesystem::path file_for(const std::string& id, std::uint64_t schedule_hash) const;

private:
    using Key = std::pair<std::string, std::uint64_t>;
    struct Entry {
        std::uint64_t fingerprint;
        TopoTrajectory traj;
    };

    std::optional<Entry> read_file(const std::filesystem::path& path, std::uint64_t schedule_hash) const;
    void write_file(const std::filesystem::path& path, std::uint64_t schedule_hash, const Entry& e) const;

    std::optional<std::filesystem::path> dir_;
    mutable std::shared_mutex mutex_;
    std::map<Key, Entry> memory_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

}  // namespace mimoe
