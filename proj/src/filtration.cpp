#include "mimoe/filtration.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "mimoe/errors.hpp"
#include "mimoe/kernels.hpp"

namespace mimoe {
namespace {

constexpr double kLatticeTolerance = 1e-9;

void fnv_mix(std::uint64_t& h, std::uint64_t value) {
    for (int b = 0; b < 8; ++b) {
        h ^= (value >> (8 * b)) & 0xffu;
        h *= 0x100000001b3ull;
    }
}

}  // namespace

std::vector<std::vector<std::uint32_t>> InteractionGraph::adjacency() const {
    std::vector<std::vector<std::uint32_t>> adj(n);
    for (const auto& [i, j] : edges) {
        adj[i].push_back(j);
        adj[j].push_back(i);
    }
    for (auto& nb : adj) std::sort(nb.begin(), nb.end());
    return adj;
}

std::vector<std::size_t> InteractionGraph::degrees() const {
    std::vector<std::size_t> deg(n, 0);
    for (const auto& [i, j] : edges) {
        ++deg[i];
        ++deg[j];
    }
    return deg;
}

std::size_t FiltrationSchedule::cutoff_position(std::size_t k) const {
    const double c = expert_cutoffs.at(k);
    const auto it = std::find(dense_radii.begin(), dense_radii.end(), c);
    if (it == dense_radii.end()) throw ScheduleError("cutoff not among dense radii");
    return static_cast<std::size_t>(it - dense_radii.begin());
}

std::uint64_t FiltrationSchedule::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    fnv_mix(h, expert_cutoffs.size());
    for (double c : expert_cutoffs) fnv_mix(h, std::bit_cast<std::uint64_t>(c));
    fnv_mix(h, dense_radii.size());
    for (double r : dense_radii) fnv_mix(h, std::bit_cast<std::uint64_t>(r));
    fnv_mix(h, std::bit_cast<std::uint64_t>(window_w));
    fnv_mix(h, std::bit_cast<std::uint64_t>(step_dr));
    return h;
}

DistanceMatrix pairwise_distances(const PointCloud& cloud) {
    const std::size_t n = cloud.size();
    std::vector<double> xs(n), ys(n), zs(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = cloud.coords[i][0];
        ys[i] = cloud.coords[i][1];
        zs[i] = cloud.coords[i][2];
    }
    DistanceMatrix dm(n);
    std::vector<double> row(n);
    const auto& k = kernels::active();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t rest = n - i - 1;
        k.distance_row(xs[i], ys[i], zs[i], xs.data() + i + 1, ys.data() + i + 1, zs.data() + i + 1,
                       row.data(), rest);
        for (std::size_t off = 0; off < rest; ++off) {
            dm(i, i + 1 + off) = row[off];
            dm(i + 1 + off, i) = row[off];
        }
    }
    return dm;
}

InteractionGraph build_cutoff_graph(const DistanceMatrix& dm, double r) {
    if (!(r > 0.0) || !std::isfinite(r)) {
        throw ArgumentError("cutoff radius must be positive and finite, got " + std::to_string(r));
    }
    InteractionGraph g;
    g.n = dm.size();
    g.radius = r;
    for (std::size_t i = 0; i < g.n; ++i) {
        for (std::size_t j = i + 1; j < g.n; ++j) {
            if (dm(i, j) <= r) g.edges.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
        }
    }
    return g;
}

InteractionGraph cap_neighbors(const InteractionGraph& g, const DistanceMatrix& dm, std::size_t m) {
    if (m == 0) return g;
    const auto adj = g.adjacency();
    std::vector<std::vector<std::uint8_t>> keep(g.n, std::vector<std::uint8_t>(g.n, 0));
    for (std::size_t i = 0; i < g.n; ++i) {
        auto nb = adj[i];
        std::stable_sort(nb.begin(), nb.end(), [&](std::uint32_t a, std::uint32_t b) {
            const double da = dm(i, a);
            const double db = dm(i, b);
            return da < db || (da == db && a < b);
        });
        if (nb.size() > m) nb.resize(m);
        for (auto j : nb) {
            keep[std::min<std::size_t>(i, j)][std::max<std::size_t>(i, j)] = 1;
        }
    }
    InteractionGraph out;
    out.n = g.n;
    out.radius = g.radius;
    for (const auto& e : g.edges) {
        if (keep[e.first][e.second]) out.edges.push_back(e);
    }
    return out;
}

FiltrationSchedule build_schedule(std::span<const double> cutoffs, double window_w, double step_dr) {
    if (cutoffs.empty()) throw ScheduleError("at least one expert cutoff is required");
    if (!(window_w > 0.0) || !std::isfinite(window_w)) throw ScheduleError("window w must be positive");
    if (!(step_dr > 0.0) || !std::isfinite(step_dr)) throw ScheduleError("step dr must be positive");
    for (std::size_t k = 0; k < cutoffs.size(); ++k) {
        if (!std::isfinite(cutoffs[k]) || cutoffs[k] <= 0.0) throw ScheduleError("cutoffs must be positive");
        if (k > 0 && !(cutoffs[k] > cutoffs[k - 1])) {
            throw ScheduleError("cutoffs must be strictly increasing");
        }
    }

    FiltrationSchedule s;
    s.expert_cutoffs.assign(cutoffs.begin(), cutoffs.end());
    s.window_w = window_w;
    s.step_dr = step_dr;

    const double c1 = cutoffs.front();
    const double cK = cutoffs.back();
    const double r1 = c1 - window_w / 2.0;
    if (!(r1 > 0.0)) throw ScheduleError("first dense radius c_1 - w/2 must be positive");
    // The small slack absorbs representation error in the quotient (e.g. 3.0/0.1).
    const auto T = static_cast<std::size_t>(std::floor((window_w + (cK - c1)) / step_dr + kLatticeTolerance)) + 1;

    s.dense_radii.resize(T);
    for (std::size_t t = 0; t < T; ++t) s.dense_radii[t] = r1 + static_cast<double>(t) * step_dr;

    for (double c : cutoffs) {
        const double m = std::round((c - r1) / step_dr);
        const double on_lattice = r1 + m * step_dr;
        if (m < 0 || m >= static_cast<double>(T) || std::abs(on_lattice - c) > kLatticeTolerance) {
            throw ScheduleError("cutoff " + std::to_string(c) + " is not on the dense radius lattice (step " +
                                std::to_string(step_dr) + ")");
        }
        // Snap so the cutoff is literally a member of the dense radii.
        s.dense_radii[static_cast<std::size_t>(m)] = c;
    }
    return s;
}

Filtration build_filtration(const DistanceMatrix& dm, const FiltrationSchedule& sched, std::size_t max_neighbors) {
    Filtration f;
    f.expert_graphs.reserve(sched.expert_count());
    for (double c : sched.expert_cutoffs) {
        f.expert_graphs.push_back(cap_neighbors(build_cutoff_graph(dm, c), dm, max_neighbors));
    }
    f.dense_graphs.reserve(sched.radius_count());
    for (double r : sched.dense_radii) f.dense_graphs.push_back(build_cutoff_graph(dm, r));
    return f;
}

Filtration build_filtration(const PointCloud& cloud, const FiltrationSchedule& sched, std::size_t max_neighbors) {
    return build_filtration(pairwise_distances(cloud), sched, max_neighbors);
}

}  // namespace mimoe
