#include "mimoe/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mimoe/errors.hpp"

namespace mimoe {
namespace {

using nlohmann::json;

template <typename Enum>
Enum parse_enum(const json& j, const char* key, std::initializer_list<std::pair<const char*, Enum>> options) {
    if (!j.is_string()) throw ConfigError(std::string(key) + " must be a string");
    const auto text = j.get<std::string>();
    for (const auto& [name, value] : options) {
        if (text == name) return value;
    }
    throw ConfigError("unknown value '" + text + "' for " + key);
}

std::size_t get_count(const json& j, const char* key) {
    if (!j.is_number_integer() || j.get<long long>() < 0) {
        throw ConfigError(std::string(key) + " must be a non-negative integer");
    }
    return j.get<std::size_t>();
}

double get_real(const json& j, const char* key) {
    if (!j.is_number()) throw ConfigError(std::string(key) + " must be a number");
    return j.get<double>();
}

}  // namespace

std::string_view to_string(RoutingMode mode) {
    switch (mode) {
        case RoutingMode::sparse: return "sparse";
        case RoutingMode::dense: return "dense";
        case RoutingMode::one_expert: return "one_expert";
    }
    return "?";
}

std::string_view to_string(GateType type) { return type == GateType::mlp ? "mlp" : "transformer"; }

std::string_view to_string(Pooling pooling) { return pooling == Pooling::sum ? "sum" : "mean"; }

std::vector<double> TrainConfig::effective_cutoffs() const {
    if (routing_mode == RoutingMode::one_expert && !cutoffs.empty()) return {cutoffs.front()};
    return cutoffs;
}

std::size_t TrainConfig::effective_top_k() const {
    switch (routing_mode) {
        case RoutingMode::dense: return expert_count();
        case RoutingMode::one_expert: return 1;
        case RoutingMode::sparse: return top_k;
    }
    return top_k;
}

FiltrationSchedule TrainConfig::schedule() const {
    const auto c = effective_cutoffs();
    return build_schedule(c, window_w, step_dr);
}

void TrainConfig::validate() const {
    if (cutoffs.empty()) throw ConfigError("cutoffs must not be empty");
    if (routing_mode == RoutingMode::sparse && (top_k < 1 || top_k > cutoffs.size())) {
        throw ConfigError("top_k must lie in [1, K] with K = " + std::to_string(cutoffs.size()));
    }
    if (gate_hidden < 1) throw ConfigError("gate_hidden must be positive");
    if (hidden_width < 1) throw ConfigError("hidden_width must be positive");
    if (expert_depth < 1) throw ConfigError("expert_depth must be positive");
    if (n_rbf < 2) throw ConfigError("n_rbf must be at least 2");
    if (!(lambda_balance >= 0.0) || !std::isfinite(lambda_balance)) throw ConfigError("lambda_balance must be >= 0");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
    if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) throw ConfigError("warmup_fraction must be in [0, 1]");
    double total = 0.0;
    for (double f : split) {
        if (!(f >= 0.0)) throw ConfigError("split fractions must be non-negative");
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
    if (split[0] <= 0.0) throw ConfigError("training fraction must be positive");
    try {
        (void)schedule();
    } catch (const ScheduleError& e) {
        throw ConfigError(std::string("invalid schedule: ") + e.what());
    }
}

TrainConfig config_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");

    TrainConfig c;
    for (const auto& [key, v] : j.items()) {
        const char* k = key.c_str();
        if (key == "cutoffs") {
            if (!v.is_array()) throw ConfigError("cutoffs must be an array");
            c.cutoffs.clear();
            for (const auto& x : v) c.cutoffs.push_back(get_real(x, k));
        } else if (key == "window_w") {
            c.window_w = get_real(v, k);
        } else if (key == "step_dr") {
            c.step_dr = get_real(v, k);
        } else if (key == "max_neighbors") {
            c.max_neighbors = get_count(v, k);
        } else if (key == "routing_mode") {
            c.routing_mode = parse_enum<RoutingMode>(
                v, k, {{"sparse", RoutingMode::sparse}, {"dense", RoutingMode::dense}, {"one_expert", RoutingMode::one_expert}});
        } else if (key == "top_k") {
            c.top_k = get_count(v, k);
        } else if (key == "gate_type") {
            c.gate_type = parse_enum<GateType>(v, k, {{"mlp", GateType::mlp}, {"transformer", GateType::transformer}});
        } else if (key == "gate_hidden") {
            c.gate_hidden = get_count(v, k);
        } else if (key == "hidden_width") {
            c.hidden_width = get_count(v, k);
        } else if (key == "expert_depth") {
            c.expert_depth = get_count(v, k);
        } else if (key == "n_rbf") {
            c.n_rbf = get_count(v, k);
        } else if (key == "pooling") {
            c.pooling = parse_enum<Pooling>(v, k, {{"sum", Pooling::sum}, {"mean", Pooling::mean}});
        } else if (key == "lambda_balance") {
            c.lambda_balance = get_real(v, k);
        } else if (key == "epsilon") {
            c.epsilon = get_real(v, k);
        } else if (key == "load_uses_indicator") {
            if (!v.is_boolean()) throw ConfigError("load_uses_indicator must be a boolean");
            c.load_uses_indicator = v.get<bool>();
        } else if (key == "task_kind") {
            c.task_kind = parse_enum<TaskKind>(
                v, k, {{"regression", TaskKind::regression}, {"classification", TaskKind::classification}});
        } else if (key == "standardize_targets") {
            if (!v.is_boolean()) throw ConfigError("standardize_targets must be a boolean");
            c.standardize_targets = v.get<bool>();
        } else if (key == "batch_size") {
            c.batch_size = get_count(v, k);
        } else if (key == "learning_rate") {
            c.learning_rate = get_real(v, k);
        } else if (key == "max_epochs") {
            c.max_epochs = get_count(v, k);
        } else if (key == "early_stop_patience") {
            c.early_stop_patience = get_count(v, k);
        } else if (key == "warmup_fraction") {
            c.warmup_fraction = get_real(v, k);
        } else if (key == "seed") {
            if (!v.is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
            c.seed = v.get<std::uint64_t>();
        } else if (key == "split") {
            if (!v.is_array() || v.size() != 3) throw ConfigError("split must be [train, valid, test]");
            for (std::size_t i = 0; i < 3; ++i) c.split[i] = get_real(v[i], k);
        } else if (key == "cache_dir") {
            if (!v.is_string()) throw ConfigError("cache_dir must be a string");
            c.cache_dir = v.get<std::string>();
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    c.validate();
    return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json(buf.str());
}

std::string config_to_json(const TrainConfig& c) {
    json j;
    j["cutoffs"] = c.cutoffs;
    j["window_w"] = c.window_w;
    j["step_dr"] = c.step_dr;
    j["max_neighbors"] = c.max_neighbors;
    j["routing_mode"] = std::string(to_string(c.routing_mode));
    j["top_k"] = c.top_k;
    j["gate_type"] = std::string(to_string(c.gate_type));
    j["gate_hidden"] = c.gate_hidden;
    j["hidden_width"] = c.hidden_width;
    j["expert_depth"] = c.expert_depth;
    j["n_rbf"] = c.n_rbf;
    j["pooling"] = std::string(to_string(c.pooling));
    j["lambda_balance"] = c.lambda_balance;
    j["epsilon"] = c.epsilon;
    j["load_uses_indicator"] = c.load_uses_indicator;
    j["task_kind"] = std::string(to_string(c.task_kind));
    j["standardize_targets"] = c.standardize_targets;
    j["batch_size"] = c.batch_size;
    j["learning_rate"] = c.learning_rate;
    j["max_epochs"] = c.max_epochs;
    j["early_stop_patience"] = c.early_stop_patience;
    j["warmup_fraction"] = c.warmup_fraction;
    j["seed"] = c.seed;
    j["split"] = c.split;
    j["cache_dir"] = c.cache_dir;
    return j.dump(2);
}

}  // namespace mimoe
