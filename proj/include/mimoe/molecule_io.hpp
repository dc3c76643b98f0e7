#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mimoe {

using Vec3 = std::array<double, 3>;

// One molecule: atomic numbers plus Cartesian coordinates in Angstrom.
// Whatever atoms appear in the input (explicit hydrogens or not) form the
// full vertex set.
struct PointCloud {
    std::string id;
    std::vector<int> atom_numbers;
    std::vector<Vec3> coords;

    std::size_t size() const noexcept { return coords.size(); }
};

// Throws DataError unless: n >= 1, matching lengths, finite coordinates,
// known atomic numbers, and all pairwise distances > 1e-6 A.
void validate(const PointCloud& cloud);

enum class TaskKind { regression, classification };

std::string_view to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view text);

struct LabeledSample {
    PointCloud cloud;
    std::vector<double> targets;  // masked entries hold 0.0
    std::vector<std::uint8_t> mask;  // 1 = label present
};

struct Dataset {
    TaskKind task_kind = TaskKind::regression;
    std::size_t task_count = 0;
    std::vector<LabeledSample> samples;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
};

// Built-in element table, H (1) through Rn (86).
inline constexpr int kMaxAtomicNumber = 86;
std::optional<int> atomic_number(std::string_view symbol);
std::string_view element_symbol(int z);

// Standard XYZ: count line, comment line (used as id), then "symbol x y z".
PointCloud parse_xyz(std::string_view text);

// JSON lines. An optional header record {"task_kind": ..., "task_count": ...}
// may precede the samples; each sample line is
// {"id": str, "atoms": [{"symbol"|"Z", "x", "y", "z"}...], "targets": [...], "mask": [...]}.
Dataset parse_dataset_text(std::string_view text);
Dataset parse_dataset(const std::filesystem::path& path);

// Inverse of parse_dataset_text (header record first, 17 significant digits).
std::string serialize_dataset(const Dataset& dataset);

}  // namespace mimoe
