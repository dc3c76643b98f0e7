#include "mimoe/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mimoe/errors.hpp"
#include "mimoe/trainer.hpp"

namespace mimoe {
namespace {

struct Flags {
    std::string config, dataset, checkpoint, out;
    std::optional<std::uint64_t> seed;
};

void add_flags(CLI::App* sub, Flags& f, bool need_dataset, bool need_checkpoint, bool need_out) {
    sub->add_option("--config", f.config, "JSON config file (defaults when omitted)");
    auto* ds = sub->add_option("--dataset", f.dataset, "JSON-lines dataset");
    if (need_dataset) ds->required();
    auto* ck = sub->add_option("--checkpoint", f.checkpoint, "checkpoint file");
    if (need_checkpoint) ck->required();
    auto* out = sub->add_option("--out", f.out, "output path");
    if (need_out) out->required();
    sub->add_option("--seed", f.seed, "overrides the config seed");
}

TrainConfig config_for(const Flags& f) {
    TrainConfig cfg = f.config.empty() ? TrainConfig{} : load_config(f.config);
    if (f.seed) cfg.seed = *f.seed;
    cfg.validate();
    return cfg;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream o(path);
    if (!o) throw DataError("cannot write '" + path.string() + "'");
    return o;
}

void print_metrics(std::ostream& out, const Metrics& m) {
    const char* name = m.kind == TaskKind::regression ? "rmse" : "roc_auc";
    out.precision(10);
    for (std::size_t t = 0; t < m.per_task.size(); ++t) out << name << '[' << t << "]=" << m.per_task[t] << '\n';
    out << name << "_mean=" << m.mean << '\n';
}

int cmd_train(const Flags& f, std::ostream& out, std::ostream& err) {
    const TrainConfig cfg = config_for(f);
    const Dataset data = parse_dataset(f.dataset);
    std::optional<TrajectoryCache> cache;
    if (!cfg.cache_dir.empty()) cache.emplace(cfg.cache_dir);
    TrainOptions opts;
    opts.cache = cache ? &*cache : nullptr;
    opts.log = &out;
    const auto prepared = prepare_dataset(data, cfg, opts.cache);
    opts.prepared = &prepared;
    auto result = train(cfg, data, opts);
    save_checkpoint(result.checkpoint, f.out);
    err << "best epoch " << result.checkpoint.epoch << ", validation metric " << result.checkpoint.best_metric << '\n';
    if (!result.split.test.empty()) {
        const auto m = evaluate(result.checkpoint.model, data, result.split.test, &prepared);
        err << "test metric " << m.mean << '\n';
    }
    return kExitOk;
}

int cmd_evaluate(const Flags& f, std::ostream& out, std::ostream& err) {
    auto ck = load_checkpoint(f.checkpoint);
    const Dataset data = parse_dataset(f.dataset);
    const auto m = evaluate(ck.model, data);
    for (const auto& w : m.warnings) err << "warning: " << w << '\n';
    if (f.out.empty()) {
        print_metrics(out, m);
    } else {
        auto o = open_out(f.out);
        print_metrics(o, m);
    }
    return kExitOk;
}

int cmd_featurize(const Flags& f, std::ostream& out, std::ostream&) {
    const TrainConfig cfg = config_for(f);
    const auto sched = cfg.schedule();
    const Dataset data = parse_dataset(f.dataset);
    const std::filesystem::path dir = f.out;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create '" + dir.string() + "': " + ec.message());
    std::optional<TrajectoryCache> cache;
    if (!cfg.cache_dir.empty()) cache.emplace(cfg.cache_dir);
    std::set<std::string> used;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& cloud = data.samples[i].cloud;
        const auto traj = cache ? cache->get_or_compute(cloud, sched) : build_trajectory(cloud, sched);
        std::string stem = file_stem(cloud.id);
        if (!used.insert(stem).second) {
            stem += "-" + std::to_string(i);
            used.insert(stem);
        }
        auto o = open_out(dir / (stem + ".csv"));
        o << trajectory_csv(traj);
    }
    out << "wrote " << data.size() << " trajectories to " << dir.string() << '\n';
    return kExitOk;
}

int cmd_route(const Flags& f, std::ostream& out, std::ostream&) {
    auto ck = load_checkpoint(f.checkpoint);
    const Dataset data = parse_dataset(f.dataset);
    std::vector<PreparedMolecule> prepared;
    prepared.reserve(data.size());
    for (const auto& s : data.samples) prepared.push_back(prepare_molecule(s.cloud, ck.model.cfg, ck.model.schedule));
    const auto preds = predict_batch(ck.model, prepared);

    std::ostringstream csv;
    csv.precision(17);
    csv << "id";
    for (std::size_t k = 0; k < ck.model.experts.size(); ++k) csv << ",alpha_" << k + 1;
    csv << ",selected\n";
    for (std::size_t i = 0; i < preds.size(); ++i) {
        csv << data.samples[i].cloud.id;
        for (double a : preds[i].routing.alpha) csv << ',' << a;
        csv << ',';
        for (std::size_t s = 0; s < preds[i].routing.selected.size(); ++s) {
            csv << (s ? ";" : "") << preds[i].routing.selected[s] + 1;
        }
        csv << '\n';
    }
    if (f.out.empty()) {
        out << csv.str();
    } else {
        auto o = open_out(f.out);
        o << csv.str();
    }
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Topology-routed mixture of message-passing experts for molecular property prediction", "mimoe"};
    app.require_subcommand(1, 1);
    Flags train_f, eval_f, feat_f, route_f;
    auto* train_cmd = app.add_subcommand("train", "train a model and write the best checkpoint");
    add_flags(train_cmd, train_f, true, false, true);
    auto* eval_cmd = app.add_subcommand("evaluate", "report RMSE or ROC-AUC of a checkpoint on a dataset");
    add_flags(eval_cmd, eval_f, true, true, false);
    auto* feat_cmd = app.add_subcommand("featurize", "write one topological trajectory CSV per molecule");
    add_flags(feat_cmd, feat_f, true, false, true);
    auto* route_cmd = app.add_subcommand("route", "write per-molecule routing weights as CSV");
    add_flags(route_cmd, route_f, true, true, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_f, out, err);
        if (eval_cmd->parsed()) return cmd_evaluate(eval_f, out, err);
        if (feat_cmd->parsed()) return cmd_featurize(feat_f, out, err);
        return cmd_route(route_f, out, err);
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumeric;
    }
}

}  // namespace mimoe
