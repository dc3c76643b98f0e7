#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mimoe/molecule_io.hpp"

namespace mimoe {

// Symmetric n x n matrix of Euclidean distances (A), zero diagonal, row-major.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    explicit DistanceMatrix(std::size_t n) : n_(n), d_(n * n, 0.0) {}

    std::size_t size() const noexcept { return n_; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return d_[i * n_ + j]; }
    double& operator()(std::size_t i, std::size_t j) noexcept { return d_[i * n_ + j]; }
    std::span<const double> row(std::size_t i) const { return {d_.data() + i * n_, n_}; }

private:
    std::size_t n_ = 0;
    std::vector<double> d_;
};

using EdgeList = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

// Undirected, self-loop free; edges sorted lexicographically with i < j.
struct InteractionGraph {
    std::size_t n = 0;
    double radius = 0.0;
    EdgeList edges;

    std::vector<std::vector<std::uint32_t>> adjacency() const;
    std::vector<std::size_t> degrees() const;
};

// Expert cutoffs c_1 < ... < c_K and the dense routing radii
// r_t = (c_1 - w/2) + (t - 1) * step, t = 1..T, with
// T = floor((w + c_K - c_1) / step) + 1. Every cutoff lies on the lattice.
struct FiltrationSchedule {
    std::vector<double> expert_cutoffs;
    std::vector<double> dense_radii;
    double window_w = 0.0;
    double step_dr = 0.0;

    std::size_t expert_count() const noexcept { return expert_cutoffs.size(); }
    std::size_t radius_count() const noexcept { return dense_radii.size(); }
    // Position of expert cutoff k within dense_radii.
    std::size_t cutoff_position(std::size_t k) const;
    // FNV-1a over the exact bit patterns of all fields.
    std::uint64_t hash() const;
};

DistanceMatrix pairwise_distances(const PointCloud& cloud);

// Edge (i, j) iff d(i, j) <= r (inclusive). Throws ArgumentError for r <= 0.
InteractionGraph build_cutoff_graph(const DistanceMatrix& dm, double r);

// Keeps, for every atom, its m nearest neighbours inside the graph (ties to the
// smaller index), then symmetrizes by union. m == 0 returns the graph unchanged.
InteractionGraph cap_neighbors(const InteractionGraph& g, const DistanceMatrix& dm, std::size_t m);

// Throws ScheduleError if cutoffs are not strictly increasing or not on the
// dense lattice within 1e-9, or if w / step are not positive.
FiltrationSchedule build_schedule(std::span<const double> cutoffs, double window_w, double step_dr);

struct Filtration {
    std::vector<InteractionGraph> expert_graphs;  // one per cutoff, optionally neighbour-capped
    std::vector<InteractionGraph> dense_graphs;   // one per dense radius, never capped
};

Filtration build_filtration(const DistanceMatrix& dm, const FiltrationSchedule& sched,
                            std::size_t max_neighbors = 0);
Filtration build_filtration(const PointCloud& cloud, const FiltrationSchedule& sched,
                            std::size_t max_neighbors = 0);

}  // namespace mimoe
