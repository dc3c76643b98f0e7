#pragma once

// Small synthetic datasets shared by the model-level tests.

#include <random>
#include <string>

#include "mimoe/molecule_io.hpp"
#include "oracles.hpp"

namespace fixture {

// n random clouds of `atoms` atoms mixing H, C, N, O.
// Regression target: number of pairs with distance in (lo, hi].
inline mimoe::Dataset pair_count_dataset(std::size_t n, std::size_t atoms, double box, std::uint64_t seed,
                                         double lo = 3.0, double hi = 4.0) {
    std::mt19937_64 gen(seed);
    const int types[] = {1, 6, 7, 8};
    mimoe::Dataset d;
    d.task_kind = mimoe::TaskKind::regression;
    d.task_count = 1;
    for (std::size_t s = 0; s < n; ++s) {
        auto c = oracle::random_cloud(gen, atoms, box, 0.8);
        for (auto& z : c.atom_numbers) z = types[gen() % 4];
        c.id = "mol" + std::to_string(s);
        double count = 0;
        for (std::size_t i = 0; i < c.size(); ++i)
            for (std::size_t j = i + 1; j < c.size(); ++j) {
                const double r = oracle::dist(c.coords[i], c.coords[j]);
                count += (r > lo && r <= hi) ? 1.0 : 0.0;
            }
        d.samples.push_back({std::move(c), {count}, {1}});
    }
    return d;
}

// Binary labels: 1 when the pair count is above its median.
inline mimoe::Dataset pair_count_classification(std::size_t n, std::size_t atoms, double box, std::uint64_t seed) {
    auto d = pair_count_dataset(n, atoms, box, seed);
    std::vector<double> v;
    for (const auto& s : d.samples) v.push_back(s.targets[0]);
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
    const double median = v[v.size() / 2];
    d.task_kind = mimoe::TaskKind::classification;
    for (auto& s : d.samples) s.targets[0] = s.targets[0] > median ? 1.0 : 0.0;
    return d;
}

}  // namespace fixture
