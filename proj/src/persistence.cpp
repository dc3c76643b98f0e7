#include "mimoe/persistence.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <numeric>
#include <tuple>

namespace mimoe {
namespace {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }

    std::size_t find(std::size_t x) {
        std::size_t root = x;
        while (parent_[root] != root) root = parent_[root];
        while (parent_[x] != root) {
            const std::size_t next = parent_[x];
            parent_[x] = root;
            x = next;
        }
        return root;
    }

    // Returns false if a and b were already connected.
    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
        return true;
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<std::uint8_t> rank_;
};

struct FilteredEdge {
    double value;
    std::uint32_t i, j;
};

struct FilteredTriangle {
    double value;
    std::uint32_t max_edge;  // youngest boundary edge, in filtration order
    std::uint32_t e0, e1, e2;  // boundary edges, ascending filtration order
};

// Symmetric difference of two ascending index lists.
void xor_into(std::vector<std::uint32_t>& acc, const std::vector<std::uint32_t>& other,
              std::vector<std::uint32_t>& scratch) {
    scratch.clear();
    std::set_symmetric_difference(acc.begin(), acc.end(), other.begin(), other.end(),
                                  std::back_inserter(scratch));
    acc.swap(scratch);
}

void finish(PersistenceDiagram& d) {
    std::erase_if(d.pairs, [](const PersistencePair& p) { return !(p.death > p.birth); });
    std::sort(d.pairs.begin(), d.pairs.end(), [](const PersistencePair& a, const PersistencePair& b) {
        return std::tie(a.birth, a.death) < std::tie(b.birth, b.death);
    });
}

}  // namespace

std::size_t PersistenceDiagram::alive_at(double r) const {
    return static_cast<std::size_t>(
        std::count_if(pairs.begin(), pairs.end(), [r](const PersistencePair& p) { return p.birth <= r && r < p.death; }));
}

PersistenceDiagrams persistence_diagrams(const DistanceMatrix& dm, double max_radius) {
    const std::size_t n = dm.size();
    PersistenceDiagrams out;
    out.h0.dim = 0;
    out.h1.dim = 1;

    std::vector<FilteredEdge> edges;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (dm(i, j) <= max_radius) {
                edges.push_back({dm(i, j), static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
            }
        }
    }
    std::sort(edges.begin(), edges.end(), [](const FilteredEdge& a, const FilteredEdge& b) {
        return std::tie(a.value, a.i, a.j) < std::tie(b.value, b.i, b.j);
    });

    // Edge lookup by endpoints, and dimension 0 by single-linkage merging.
    // All vertices are born at 0, so the elder rule only decides which root
    // survives, never the recorded pair.
    constexpr std::uint32_t kNone = UINT32_MAX;
    std::vector<std::uint32_t> edge_index(n * n, kNone);
    std::vector<std::uint8_t> positive(edges.size(), 0);
    UnionFind uf(n);
    std::size_t merges = 0;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto& edge = edges[e];
        edge_index[edge.i * n + edge.j] = static_cast<std::uint32_t>(e);
        if (uf.unite(edge.i, edge.j)) {
            out.h0.pairs.push_back({0.0, edge.value});
            ++merges;
        } else {
            positive[e] = 1;
        }
    }
    for (std::size_t c = 0; c < n - merges; ++c) out.h0.pairs.push_back({0.0, kInfinity});

    // Triangles of the clique complex below max_radius.
    std::vector<FilteredTriangle> triangles;
    for (std::uint32_t a = 0; a < n; ++a) {
        for (std::uint32_t b = a + 1; b < n; ++b) {
            const std::uint32_t ab = edge_index[a * n + b];
            if (ab == kNone) continue;
            for (std::uint32_t c = b + 1; c < n; ++c) {
                const std::uint32_t ac = edge_index[a * n + c];
                const std::uint32_t bc = edge_index[b * n + c];
                if (ac == kNone || bc == kNone) continue;
                std::array<std::uint32_t, 3> bd{ab, ac, bc};
                std::sort(bd.begin(), bd.end());
                triangles.push_back({edges[bd[2]].value, bd[2], bd[0], bd[1], bd[2]});
            }
        }
    }
    std::sort(triangles.begin(), triangles.end(), [](const FilteredTriangle& x, const FilteredTriangle& y) {
        return std::tie(x.value, x.max_edge, x.e1, x.e0) < std::tie(y.value, y.max_edge, y.e1, y.e0);
    });

    // Column reduction of the edge-triangle boundary matrix over Z/2.
    std::vector<std::vector<std::uint32_t>> reduced(triangles.size());
    std::vector<std::uint32_t> pivot_owner(edges.size(), kNone);
    std::vector<std::uint8_t> paired(edges.size(), 0);
    std::vector<std::uint32_t> scratch;
    for (std::size_t t = 0; t < triangles.size(); ++t) {
        auto& col = reduced[t];
        col = {triangles[t].e0, triangles[t].e1, triangles[t].e2};
        while (!col.empty()) {
            const std::uint32_t pivot = col.back();
            const std::uint32_t owner = pivot_owner[pivot];
            if (owner == kNone) break;
            xor_into(col, reduced[owner], scratch);
        }
        if (col.empty()) continue;
        const std::uint32_t pivot = col.back();
        pivot_owner[pivot] = static_cast<std::uint32_t>(t);
        paired[pivot] = 1;
        out.h1.pairs.push_back({edges[pivot].value, triangles[t].value});
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
        if (positive[e] && !paired[e]) out.h1.pairs.push_back({edges[e].value, kInfinity});
    }

    finish(out.h0);
    finish(out.h1);
    return out;
}

PersistenceDiagrams persistence_diagrams(const DistanceMatrix& dm, const FiltrationSchedule& sched) {
    const double max_radius = sched.dense_radii.empty() ? 0.0 : sched.dense_radii.back();
    return persistence_diagrams(dm, max_radius);
}

double unit_weight(double, double) { return 1.0; }

double betti_curve_value(const PersistenceDiagram& diagram, double r, const FeatureWeight& phi) {
    double norm = 0.0;
    for (const auto& p : diagram.pairs) norm += std::abs(phi(p.birth, p.death));
    if (norm == 0.0) return 0.0;
    double acc = 0.0;
    for (const auto& p : diagram.pairs) {
        if (p.birth <= r && r < p.death) acc += phi(p.birth, p.death);
    }
    return acc / norm;
}

}  // namespace mimoe
