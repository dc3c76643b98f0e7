#include "mimoe/molecule_io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mimoe/errors.hpp"

namespace mimoe {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, kMaxAtomicNumber> kSymbols = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",
    "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh",
    "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re",
    "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn"};

constexpr double kMinSeparation = 1e-6;

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            if (start < text.size()) lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    for (auto& line : lines) {
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    }
    return lines;
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        const std::size_t b = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i > b) out.push_back(s.substr(b, i - b));
    }
    return out;
}

bool parse_double(std::string_view s, double& out) {
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

// Validation shared by both parsers; reports through `fail` so each caller
// can attach its own line numbers.
template <typename Fail>
void check_cloud(const PointCloud& cloud, Fail&& fail) {
    const std::size_t n = cloud.coords.size();
    if (n == 0) fail(0, "point cloud has no atoms");
    if (cloud.atom_numbers.size() != n) fail(0, "atom_numbers and coords differ in length");
    for (std::size_t i = 0; i < n; ++i) {
        const int z = cloud.atom_numbers[i];
        if (z < 1 || z > kMaxAtomicNumber) fail(i, "atomic number " + std::to_string(z) + " out of range");
        for (double c : cloud.coords[i]) {
            if (!std::isfinite(c)) fail(i, "non-finite coordinate");
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = cloud.coords[i][0] - cloud.coords[j][0];
            const double dy = cloud.coords[i][1] - cloud.coords[j][1];
            const double dz = cloud.coords[i][2] - cloud.coords[j][2];
            if (std::sqrt(dx * dx + dy * dy + dz * dz) <= kMinSeparation) {
                fail(j, "duplicate coordinates for atoms " + std::to_string(i) + " and " +
                            std::to_string(j));
            }
        }
    }
}

double json_number(const json& j, const char* key, std::size_t line) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number()) {
        throw ParseError(line, std::string("missing numeric field \"") + key + "\"");
    }
    const double v = it->get<double>();
    if (!std::isfinite(v)) throw ParseError(line, std::string("non-finite \"") + key + "\"");
    return v;
}

LabeledSample parse_sample(const json& rec, std::size_t line) {
    LabeledSample sample;
    auto& cloud = sample.cloud;
    if (auto it = rec.find("id"); it != rec.end()) {
        cloud.id = it->is_string() ? it->get<std::string>() : it->dump();
    } else {
        cloud.id = "line" + std::to_string(line);
    }
    const auto& atoms = rec.at("atoms");
    if (!atoms.is_array()) throw ParseError(line, "\"atoms\" must be an array");
    for (const auto& atom : atoms) {
        if (!atom.is_object()) throw ParseError(line, "atom entries must be objects");
        int z = 0;
        if (auto s = atom.find("symbol"); s != atom.end()) {
            if (!s->is_string()) throw ParseError(line, "\"symbol\" must be a string");
            const auto found = atomic_number(s->get<std::string>());
            if (!found) throw ParseError(line, "unknown element symbol '" + s->get<std::string>() + "'");
            z = *found;
        } else if (auto zn = atom.find("Z"); zn != atom.end() && zn->is_number_integer()) {
            z = zn->get<int>();
        } else {
            throw ParseError(line, "atom needs \"symbol\" or integer \"Z\"");
        }
        cloud.atom_numbers.push_back(z);
        cloud.coords.push_back({json_number(atom, "x", line), json_number(atom, "y", line),
                                json_number(atom, "z", line)});
    }
    check_cloud(cloud, [&](std::size_t, const std::string& what) { throw ParseError(line, what); });

    const auto targets_it = rec.find("targets");
    if (targets_it == rec.end() || !targets_it->is_array()) {
        throw ParseError(line, "missing \"targets\" array");
    }
    for (const auto& t : *targets_it) {
        if (t.is_null()) {
            sample.targets.push_back(0.0);
            sample.mask.push_back(0);
        } else if (t.is_number()) {
            const double v = t.get<double>();
            if (!std::isfinite(v)) throw ParseError(line, "non-finite target");
            sample.targets.push_back(v);
            sample.mask.push_back(1);
        } else {
            throw ParseError(line, "targets must be numbers or null");
        }
    }
    if (auto m = rec.find("mask"); m != rec.end()) {
        if (!m->is_array() || m->size() != sample.targets.size()) {
            throw ParseError(line, "\"mask\" must match \"targets\" in length");
        }
        for (std::size_t i = 0; i < m->size(); ++i) {
            const auto& v = (*m)[i];
            bool present = false;
            if (v.is_boolean()) {
                present = v.get<bool>();
            } else if (v.is_number_integer()) {
                present = v.get<int>() != 0;
            } else {
                throw ParseError(line, "mask entries must be booleans or 0/1");
            }
            if (present && !sample.mask[i]) throw ParseError(line, "mask marks a null target as present");
            if (!present) {
                sample.mask[i] = 0;
                sample.targets[i] = 0.0;
            }
        }
    }
    return sample;
}

}  // namespace

std::optional<int> atomic_number(std::string_view symbol) {
    symbol = trim(symbol);
    if (symbol.empty() || symbol.size() > 2) return std::nullopt;
    std::string canon(symbol);
    canon[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(canon[0])));
    for (std::size_t i = 1; i < canon.size(); ++i) {
        canon[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(canon[i])));
    }
    for (std::size_t i = 0; i < kSymbols.size(); ++i) {
        if (kSymbols[i] == canon) return static_cast<int>(i) + 1;
    }
    return std::nullopt;
}

std::string_view element_symbol(int z) {
    if (z < 1 || z > kMaxAtomicNumber) return "?";
    return kSymbols[static_cast<std::size_t>(z - 1)];
}

std::string_view to_string(TaskKind kind) {
    return kind == TaskKind::regression ? "regression" : "classification";
}

TaskKind task_kind_from_string(std::string_view text) {
    if (text == "regression") return TaskKind::regression;
    if (text == "classification" || text == "binary-classification") return TaskKind::classification;
    throw DataError("unknown task kind '" + std::string(text) + "'");
}

void validate(const PointCloud& cloud) {
    check_cloud(cloud, [&](std::size_t atom, const std::string& what) {
        throw DataError("molecule '" + cloud.id + "', atom " + std::to_string(atom) + ": " + what);
    });
}

PointCloud parse_xyz(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty()) throw ParseError(1, "empty XYZ input");

    std::size_t count = 0;
    {
        const auto head = trim(lines[0]);
        auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), count);
        if (ec != std::errc() || ptr != head.data() + head.size()) {
            throw ParseError(1, "expected atom count, got '" + std::string(head) + "'");
        }
    }
    PointCloud cloud;
    cloud.id = lines.size() > 1 ? std::string(trim(lines[1])) : std::string();

    std::size_t line_no = 2;
    for (std::size_t li = 2; li < lines.size(); ++li) {
        line_no = li + 1;
        const auto fields = split_ws(lines[li]);
        if (fields.empty()) continue;
        if (cloud.size() == count) {
            throw ParseError(line_no, "more atom lines than the declared count " + std::to_string(count));
        }
        if (fields.size() < 4) throw ParseError(line_no, "expected 'symbol x y z'");
        const auto z = atomic_number(fields[0]);
        if (!z) throw ParseError(line_no, "unknown element symbol '" + std::string(fields[0]) + "'");
        Vec3 r{};
        for (int k = 0; k < 3; ++k) {
            if (!parse_double(fields[static_cast<std::size_t>(k) + 1], r[static_cast<std::size_t>(k)]) ||
                !std::isfinite(r[static_cast<std::size_t>(k)])) {
                throw ParseError(line_no, "non-finite or malformed coordinate '" +
                                              std::string(fields[static_cast<std::size_t>(k) + 1]) + "'");
            }
        }
        cloud.atom_numbers.push_back(*z);
        cloud.coords.push_back(r);
        // Duplicate check against earlier atoms names the offending line.
        for (std::size_t j = 0; j + 1 < cloud.size(); ++j) {
            const double dx = cloud.coords[j][0] - r[0];
            const double dy = cloud.coords[j][1] - r[1];
            const double dz = cloud.coords[j][2] - r[2];
            if (std::sqrt(dx * dx + dy * dy + dz * dz) <= kMinSeparation) {
                throw ParseError(line_no, "duplicate coordinates (same position as atom " +
                                              std::to_string(j) + ")");
            }
        }
    }
    if (cloud.size() != count) {
        throw ParseError(line_no, "declared " + std::to_string(count) + " atoms but found " +
                                      std::to_string(cloud.size()));
    }
    if (count == 0) throw ParseError(1, "atom count must be at least 1");
    return cloud;
}

Dataset parse_dataset_text(std::string_view text) {
    const auto lines = split_lines(text);
    Dataset ds;
    bool have_header = false;

    for (std::size_t li = 0; li < lines.size(); ++li) {
        const std::size_t line_no = li + 1;
        const auto body = trim(lines[li]);
        if (body.empty()) continue;
        json rec;
        try {
            rec = json::parse(body);
        } catch (const json::parse_error& e) {
            throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
        }
        if (!rec.is_object()) throw ParseError(line_no, "record must be a JSON object");

        if (!rec.contains("atoms")) {
            if (have_header || !ds.samples.empty()) {
                throw ParseError(line_no, "header record must be the first record");
            }
            have_header = true;
            if (auto k = rec.find("task_kind"); k != rec.end()) {
                if (!k->is_string()) throw ParseError(line_no, "task_kind must be a string");
                try {
                    ds.task_kind = task_kind_from_string(k->get<std::string>());
                } catch (const DataError& e) {
                    throw ParseError(line_no, e.what());
                }
            }
            if (auto c = rec.find("task_count"); c != rec.end()) {
                if (!c->is_number_unsigned() || c->get<std::size_t>() == 0) {
                    throw ParseError(line_no, "task_count must be a positive integer");
                }
                ds.task_count = c->get<std::size_t>();
            }
            continue;
        }

        LabeledSample sample;
        try {
            sample = parse_sample(rec, line_no);
        } catch (const json::exception& e) {
            throw ParseError(line_no, e.what());
        }
        if (ds.task_count == 0) ds.task_count = sample.targets.size();
        if (sample.targets.size() != ds.task_count) {
            throw DataError("line " + std::to_string(line_no) + ": sample has " +
                            std::to_string(sample.targets.size()) + " targets but the dataset declares " +
                            std::to_string(ds.task_count));
        }
        if (ds.task_count == 0) throw ParseError(line_no, "sample has no targets");
        ds.samples.push_back(std::move(sample));
    }

    if (ds.task_count == 0) {
        throw DataError("empty dataset without a header record declaring task_count");
    }
    for (std::size_t s = 0; s < ds.samples.size(); ++s) {
        const auto& sample = ds.samples[s];
        for (std::size_t t = 0; t < ds.task_count; ++t) {
            if (ds.task_kind == TaskKind::regression && !sample.mask[t]) {
                throw DataError("sample '" + sample.cloud.id + "': regression datasets need every target");
            }
            if (ds.task_kind == TaskKind::classification && sample.mask[t] &&
                sample.targets[t] != 0.0 && sample.targets[t] != 1.0) {
                throw DataError("sample '" + sample.cloud.id + "': classification labels must be 0 or 1");
            }
        }
    }
    return ds;
}

Dataset parse_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_dataset_text(buf.str());
    } catch (const ParseError& e) {
        throw ParseError(e.line(), path.string() + ": " + e.what());
    }
}

std::string serialize_dataset(const Dataset& dataset) {
    std::string out;
    json header = {{"task_kind", std::string(to_string(dataset.task_kind))},
                   {"task_count", dataset.task_count}};
    out += header.dump();
    out += '\n';
    for (const auto& s : dataset.samples) {
        json atoms = json::array();
        for (std::size_t i = 0; i < s.cloud.size(); ++i) {
            atoms.push_back({{"symbol", std::string(element_symbol(s.cloud.atom_numbers[i]))},
                             {"x", s.cloud.coords[i][0]},
                             {"y", s.cloud.coords[i][1]},
                             {"z", s.cloud.coords[i][2]}});
        }
        json targets = json::array();
        json mask = json::array();
        for (std::size_t t = 0; t < s.targets.size(); ++t) {
            targets.push_back(s.mask[t] ? json(s.targets[t]) : json(nullptr));
            mask.push_back(static_cast<int>(s.mask[t]));
        }
        json rec = {{"id", s.cloud.id}, {"atoms", atoms}, {"targets", targets}, {"mask", mask}};
        out += rec.dump();
        out += '\n';
    }
    return out;
}

}  // namespace mimoe
