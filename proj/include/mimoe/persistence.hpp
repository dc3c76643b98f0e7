#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "mimoe/filtration.hpp"

namespace mimoe {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct PersistencePair {
    double birth = 0.0;
    double death = kInfinity;  // +inf for essential classes

    bool essential() const noexcept { return death == kInfinity; }
    friend bool operator==(const PersistencePair&, const PersistencePair&) = default;
};

// Pairs are sorted by (birth, death); zero-persistence pairs never appear.
struct PersistenceDiagram {
    int dim = 0;
    std::vector<PersistencePair> pairs;

    bool empty() const noexcept { return pairs.empty(); }
    // Number of features with birth <= r < death.
    std::size_t alive_at(double r) const;
};

struct PersistenceDiagrams {
    PersistenceDiagram h0;
    PersistenceDiagram h1;
};

// Persistent homology in dimensions 0 and 1 of the flag (clique) complex of
// the distance filtration, truncated at max_radius. Filtration values are
// the exact pairwise distances; a triangle enters at its longest edge.
// Classes still alive at max_radius are reported with death = +inf.
PersistenceDiagrams persistence_diagrams(const DistanceMatrix& dm, double max_radius);

// Truncates at the last dense radius of the schedule.
PersistenceDiagrams persistence_diagrams(const DistanceMatrix& dm, const FiltrationSchedule& sched);

using FeatureWeight = std::function<double(double birth, double death)>;

// phi == 1
double unit_weight(double birth, double death);

// sum_i psi_i * [b_i <= r < d_i] with psi = phi / sum|phi|. Empty diagrams
// (or an all-zero phi) give 0. Essential features count in the normalizer.
double betti_curve_value(const PersistenceDiagram& diagram, double r,
                         const FeatureWeight& phi = unit_weight);

}  // namespace mimoe
