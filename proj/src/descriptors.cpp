#include "mimoe/descriptors.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <thread>

#include "mimoe/errors.hpp"

namespace mimoe {
namespace {

constexpr std::size_t kUnreachable = static_cast<std::size_t>(-1);

// BFS hop distances from every source; dist[s * n + v].
std::vector<std::size_t> all_pairs_hops(const InteractionGraph& g) {
    const std::size_t n = g.n;
    const auto adj = g.adjacency();
    std::vector<std::size_t> dist(n * n, kUnreachable);
    std::vector<std::uint32_t> queue(n);
    for (std::size_t s = 0; s < n; ++s) {
        std::size_t* row = dist.data() + s * n;
        row[s] = 0;
        std::size_t head = 0, tail = 0;
        queue[tail++] = static_cast<std::uint32_t>(s);
        while (head < tail) {
            const auto u = queue[head++];
            for (auto v : adj[u]) {
                if (row[v] == kUnreachable) {
                    row[v] = row[u] + 1;
                    queue[tail++] = v;
                }
            }
        }
    }
    return dist;
}

struct PathIndices {
    double wiener = 0.0;
    double efficiency = 0.0;
};

PathIndices path_indices(const InteractionGraph& g) {
    const std::size_t n = g.n;
    PathIndices out;
    if (n < 2) return out;
    const auto dist = all_pairs_hops(g);
    double inv_sum = 0.0;
    std::size_t w = 0;
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v = u + 1; v < n; ++v) {
            const std::size_t d = dist[u * n + v];
            if (d == kUnreachable) continue;
            w += d;
            inv_sum += 1.0 / static_cast<double>(d);
        }
    }
    out.wiener = static_cast<double>(w);
    // Each unordered pair counts twice in the ordered-pair sum.
    out.efficiency = 2.0 * inv_sum / (static_cast<double>(n) * static_cast<double>(n - 1));
    return out;
}

double wiener_normalize(double w, std::size_t n) {
    const double nd = static_cast<double>(n);
    const double w_min = nd * (nd - 1.0) / 2.0;
    const double w_max = (nd * nd * nd - nd) / 6.0;
    const double denom = w_max - w_min;
    if (n <= 2 || denom <= 0.0) return 0.0;
    return std::clamp((w - w_min) / denom, 0.0, 1.0);
}

void fnv_mix(std::uint64_t& h, std::uint64_t value) {
    for (int b = 0; b < 8; ++b) {
        h ^= (value >> (8 * b)) & 0xffu;
        h *= 0x100000001b3ull;
    }
}

constexpr char kMagic[8] = {'M', 'I', 'M', 'O', 'E', 'T', 'J', '1'};

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool get(std::istream& in, T& v) {
    return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof(T)));
}


}  // namespace

std::string file_stem(const std::string& id) {
    std::string out;
    for (char c : id) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
        out += ok ? c : '_';
    }
    if (out.empty() || out[0] == '.') out.insert(out.begin(), '_');
    return out.substr(0, 120);
}

double randic_normalized(const InteractionGraph& g) {
    if (g.n == 0 || g.edges.empty()) return 0.0;
    const auto deg = g.degrees();
    double r = 0.0;
    for (const auto& [u, v] : g.edges) {
        r += 1.0 / std::sqrt(static_cast<double>(deg[u]) * static_cast<double>(deg[v]));
    }
    return std::min(1.0, r / (static_cast<double>(g.n) / 2.0));
}

double wiener_raw(const InteractionGraph& g) { return path_indices(g).wiener; }

double wiener_normalized(const InteractionGraph& g) { return wiener_normalize(path_indices(g).wiener, g.n); }

double global_efficiency(const InteractionGraph& g) { return path_indices(g).efficiency; }

TopoTrajectory build_trajectory(const DistanceMatrix& dm, const FiltrationSchedule& sched) {
    const auto diagrams = persistence_diagrams(dm, sched);
    TopoTrajectory traj;
    traj.radii = sched.dense_radii;
    traj.values.reserve(sched.radius_count() * kDescriptorCount);
    for (double r : sched.dense_radii) {
        const auto g = build_cutoff_graph(dm, r);
        const auto paths = path_indices(g);
        traj.values.push_back(randic_normalized(g));
        traj.values.push_back(wiener_normalize(paths.wiener, g.n));
        traj.values.push_back(paths.efficiency);
        traj.values.push_back(betti_curve_value(diagrams.h0, r));
        traj.values.push_back(betti_curve_value(diagrams.h1, r));
    }
    return traj;
}

TopoTrajectory build_trajectory(const PointCloud& cloud, const FiltrationSchedule& sched) {
    return build_trajectory(pairwise_distances(cloud), sched);
}

std::string trajectory_csv(const TopoTrajectory& traj) {
    std::ostringstream out;
    out << "r";
    for (const char* name : kDescriptorNames) out << ',' << name;
    out << '\n' << std::setprecision(17);
    for (std::size_t t = 0; t < traj.rows(); ++t) {
        out << traj.radii[t];
        for (std::size_t c = 0; c < kDescriptorCount; ++c) out << ',' << traj(t, c);
        out << '\n';
    }
    return out.str();
}

std::uint64_t cloud_fingerprint(const PointCloud& cloud) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    fnv_mix(h, cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        fnv_mix(h, static_cast<std::uint64_t>(cloud.atom_numbers[i]));
        for (double c : cloud.coords[i]) fnv_mix(h, std::bit_cast<std::uint64_t>(c));
    }
    return h;
}

TrajectoryCache::TrajectoryCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(*dir_);
}

std::filesystem::path TrajectoryCache::file_for(const std::string& id, std::uint64_t schedule_hash) const {
    std::ostringstream name;
    name << file_stem(id) << '-' << std::hex << std::setw(16) << std::setfill('0') << schedule_hash << ".topo";
    return dir_ ? *dir_ / name.str() : std::filesystem::path(name.str());
}

std::optional<TopoTrajectory> TrajectoryCache::lookup(const PointCloud& cloud, const FiltrationSchedule& sched) {
    const std::uint64_t sh = sched.hash();
    const std::uint64_t fp = cloud_fingerprint(cloud);
    const Key key{cloud.id, sh};
    {
        std::shared_lock lock(mutex_);
        if (auto it = memory_.find(key); it != memory_.end() && it->second.fingerprint == fp) {
            return it->second.traj;
        }
    }
    if (!dir_) return std::nullopt;
    auto entry = read_file(file_for(cloud.id, sh), sh);
    if (!entry || entry->fingerprint != fp) return std::nullopt;
    std::unique_lock lock(mutex_);
    memory_.insert_or_assign(key, *entry);
    return entry->traj;
}

TopoTrajectory TrajectoryCache::get_or_compute(const PointCloud& cloud, const FiltrationSchedule& sched) {
    if (auto hit = lookup(cloud, sched)) {
        std::unique_lock lock(mutex_);
        ++hits_;
        return *hit;
    }
    Entry e{cloud_fingerprint(cloud), build_trajectory(cloud, sched)};
    const std::uint64_t sh = sched.hash();
    if (dir_) write_file(file_for(cloud.id, sh), sh, e);
    std::unique_lock lock(mutex_);
    ++misses_;
    memory_.insert_or_assign(Key{cloud.id, sh}, e);
    return e.traj;
}

std::optional<TrajectoryCache::Entry> TrajectoryCache::read_file(const std::filesystem::path& path,
                                                                 std::uint64_t schedule_hash) const {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) return std::nullopt;
    std::uint64_t sh = 0, fp = 0;
    std::uint32_t rows = 0;
    if (!get(in, sh) || !get(in, fp) || !get(in, rows) || sh != schedule_hash) return std::nullopt;
    Entry e{fp, {}};
    e.traj.radii.resize(rows);
    e.traj.values.resize(static_cast<std::size_t>(rows) * kDescriptorCount);
    for (auto& r : e.traj.radii) {
        if (!get(in, r)) return std::nullopt;
    }
    for (auto& v : e.traj.values) {
        if (!get(in, v)) return std::nullopt;
    }
    return e;
}

void TrajectoryCache::write_file(const std::filesystem::path& path, std::uint64_t schedule_hash,
                                 const Entry& e) const {
    auto tmp = path;
    tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write cache file '" + tmp.string() + "'");
        out.write(kMagic, 8);
        put(out, schedule_hash);
        put(out, e.fingerprint);
        put(out, static_cast<std::uint32_t>(e.traj.rows()));
        for (double r : e.traj.radii) put(out, r);
        for (double v : e.traj.values) put(out, v);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace mimoe
