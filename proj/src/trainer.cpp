#include "mimoe/trainer.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mimoe/errors.hpp"
#include "mimoe/losses.hpp"
#include "mimoe/optimizer.hpp"

namespace mimoe {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint layout assumes a little-endian host");

constexpr char kMagic[8] = {'M', 'I', 'M', 'O', 'E', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        T v;
        std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
        return v;
    }
    std::string_view take(std::size_t n) {
        if (n > bytes_.size() - pos_) throw DataError("checkpoint is truncated");
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

struct Batch {
    std::vector<const PreparedMolecule*> molecules;
    Tensor targets, mask;
};

Batch make_batch(const MoEModel& model, const Dataset& data, const std::vector<PreparedMolecule>& prepared,
                 std::span<const std::size_t> idx) {
    Batch b;
    const std::size_t tasks = data.task_count;
    b.targets = Tensor(idx.size(), tasks);
    b.mask = Tensor(idx.size(), tasks);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto& s = data.samples[idx[r]];
        b.molecules.push_back(&prepared[idx[r]]);
        for (std::size_t t = 0; t < tasks; ++t) {
            if (!s.mask[t]) continue;
            b.mask(r, t) = 1.0;
            b.targets(r, t) = model.cfg.task_kind == TaskKind::regression
                                  ? (s.targets[t] - model.target_mean[t]) / model.target_scale[t]
                                  : s.targets[t];
        }
    }
    return b;
}

bool improves(double candidate, double best, bool higher_is_better) {
    if (std::isnan(candidate)) return false;
    if (std::isnan(best)) return true;
    return higher_is_better ? candidate > best : candidate < best;
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(10);
    s << v;
    return s.str();
}

}  // namespace

Split split_indices(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
    const auto n_valid = static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n)));
    const auto n_test = static_cast<std::size_t>(std::llround(fractions[2] * static_cast<double>(n)));
    if (n_valid + n_test >= n && n > 0) throw DataError("dataset too small for the requested split");
    const std::size_t n_train = n - n_valid - n_test;
    Split s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.valid.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                   order.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), order.end());
    return s;
}

std::string to_csv(const EpochLog& log) {
    std::ostringstream s;
    s.precision(10);
    s << log.epoch << ',' << log.lr << ',' << log.task << ',' << log.score << ',' << log.load << ',' << log.total
      << ',' << log.val_metric;
    return s.str();
}

std::string checkpoint_bytes(const Checkpoint& ckpt) {
    const MoEModel& m = ckpt.model;
    std::string out(kMagic, sizeof(kMagic));
    put(out, kVersion);
    const std::string cfg = config_to_json(m.cfg);
    put<std::uint64_t>(out, cfg.size());
    out += cfg;
    put<std::uint64_t>(out, m.task_count);
    put<std::uint64_t>(out, m.schedule.hash());
    put(out, ckpt.best_metric);
    put<std::uint64_t>(out, ckpt.epoch);
    for (double v : m.target_mean) put(out, v);
    for (double v : m.target_scale) put(out, v);
    put<std::uint64_t>(out, m.params.count());
    for (std::size_t i = 0; i < m.params.count(); ++i) {
        const auto& name = m.params.name(i);
        const Tensor& t = m.params.value(i);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put<std::uint64_t>(out, t.rows);
        put<std::uint64_t>(out, t.cols);
        for (double v : t.data) put(out, v);
    }
    return out;
}

Checkpoint checkpoint_from_bytes(std::string_view bytes) {
    Reader r(bytes);
    if (r.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) throw DataError("not a checkpoint file");
    if (const auto v = r.get<std::uint32_t>(); v != kVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(v));
    }
    const auto cfg_len = r.get<std::uint64_t>();
    TrainConfig cfg;
    try {
        cfg = config_from_json(r.take(cfg_len));
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint holds an invalid config: ") + e.what());
    }
    const auto tasks = r.get<std::uint64_t>();
    const auto hash = r.get<std::uint64_t>();
    Checkpoint ck{make_model(cfg, tasks), 0.0, 0};
    if (hash != ck.model.schedule.hash()) throw DataError("checkpoint schedule hash does not match its config");
    ck.best_metric = r.get<double>();
    ck.epoch = r.get<std::uint64_t>();
    for (auto& v : ck.model.target_mean) v = r.get<double>();
    for (auto& v : ck.model.target_scale) v = r.get<double>();
    const auto count = r.get<std::uint64_t>();
    if (count != ck.model.params.count()) throw DataError("checkpoint parameter count does not match its config");
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto len = r.get<std::uint32_t>();
        const std::string name(r.take(len));
        const auto rows = r.get<std::uint64_t>();
        const auto cols = r.get<std::uint64_t>();
        const auto id = ck.model.params.find(name);
        if (!id) throw DataError("checkpoint has unknown parameter '" + name + "'");
        Tensor& t = ck.model.params.value(*id);
        if (t.rows != rows || t.cols != cols) throw DataError("checkpoint parameter '" + name + "' has the wrong shape");
        for (auto& v : t.data) v = r.get<double>();
    }
    if (!r.done()) throw DataError("checkpoint has trailing bytes");
    return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const std::string bytes = checkpoint_bytes(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return checkpoint_from_bytes(buf.str());
}

std::vector<PreparedMolecule> prepare_dataset(const Dataset& data, const TrainConfig& cfg, TrajectoryCache* cache) {
    const auto sched = cfg.schedule();
    std::vector<PreparedMolecule> out;
    out.reserve(data.size());
    for (const auto& s : data.samples) out.push_back(prepare_molecule(s.cloud, cfg, sched, cache));
    return out;
}

Metrics evaluate(MoEModel& model, const Dataset& data, std::span<const std::size_t> indices,
                 const std::vector<PreparedMolecule>* prepared) {
    if (data.task_kind != model.cfg.task_kind) {
        throw DataError("dataset task kind '" + std::string(to_string(data.task_kind)) + "' does not match the model's '" +
                        std::string(to_string(model.cfg.task_kind)) + "'");
    }
    if (data.task_count != model.task_count) throw DataError("dataset task count does not match the model");
    std::vector<PreparedMolecule> own;
    if (!prepared) {
        own.reserve(data.size());
        for (const auto& s : data.samples) own.push_back(prepare_molecule(s.cloud, model.cfg, model.schedule));
        prepared = &own;
    }
    std::vector<const PreparedMolecule*> subset;
    subset.reserve(indices.size());
    for (auto i : indices) subset.push_back(&prepared->at(i));
    const auto preds = predict_batch(model, subset);
    Tensor p(indices.size(), data.task_count), y(indices.size(), data.task_count), mask(indices.size(), data.task_count);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const auto& s = data.samples[indices[r]];
        for (std::size_t t = 0; t < data.task_count; ++t) {
            p(r, t) = preds[r].values[t];
            y(r, t) = s.targets[t];
            mask(r, t) = s.mask[t] ? 1.0 : 0.0;
        }
    }
    return compute_metrics(data.task_kind, p, y, mask);
}

Metrics evaluate(MoEModel& model, const Dataset& data) {
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return evaluate(model, data, all);
}

TrainResult train(const TrainConfig& cfg, const Dataset& data, const TrainOptions& opts) {
    cfg.validate();
    if (data.empty()) throw DataError("training dataset is empty");
    if (data.task_kind != cfg.task_kind) {
        throw DataError("dataset task kind '" + std::string(to_string(data.task_kind)) + "' does not match config '" +
                        std::string(to_string(cfg.task_kind)) + "'");
    }

    std::vector<PreparedMolecule> own;
    if (!opts.prepared) own = prepare_dataset(data, cfg, opts.cache);
    const auto& prepared = opts.prepared ? *opts.prepared : own;
    if (prepared.size() != data.size()) throw ArgumentError("prepared molecules do not match the dataset");

    TrainResult result;
    result.split = split_indices(data.size(), cfg.split, cfg.seed);
    const auto& train_idx = result.split.train;
    const auto& monitor_idx = result.split.valid.empty() ? result.split.train : result.split.valid;

    MoEModel model = make_model(cfg, data.task_count);
    if (cfg.task_kind == TaskKind::regression && cfg.standardize_targets) {
        for (std::size_t t = 0; t < data.task_count; ++t) {
            double n = 0.0, mean = 0.0;
            for (auto i : train_idx) {
                if (!data.samples[i].mask[t]) continue;
                n += 1.0;
                mean += data.samples[i].targets[t];
            }
            if (n == 0.0) continue;
            mean /= n;
            double var = 0.0;
            for (auto i : train_idx) {
                if (!data.samples[i].mask[t]) continue;
                const double d = data.samples[i].targets[t] - mean;
                var += d * d;
            }
            const double sd = std::sqrt(var / n);
            model.target_mean[t] = mean;
            model.target_scale[t] = sd > 1e-12 ? sd : 1.0;
        }
    }

    const bool higher = cfg.task_kind == TaskKind::classification;
    Checkpoint best{model, evaluate(model, data, monitor_idx, &prepared).mean, 0};
    std::size_t best_epoch = 0;

    const std::size_t batches_per_epoch = (train_idx.size() + cfg.batch_size - 1) / cfg.batch_size;
    const auto lr_schedule =
        CosineSchedule::with_warmup_fraction(cfg.learning_rate, cfg.max_epochs * batches_per_epoch, cfg.warmup_fraction);
    Adam adam(model.params);
    Rng batch_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    const LossConfig loss_cfg{cfg.lambda_balance, cfg.epsilon, cfg.load_uses_indicator};

    if (opts.log) *opts.log << kEpochLogHeader << '\n';
    std::vector<std::size_t> order = train_idx;
    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        batch_rng.shuffle(order);
        EpochLog log;
        log.epoch = epoch;
        double batches = 0.0;
        for (std::size_t start = 0, bi = 0; start < order.size(); start += cfg.batch_size, ++bi) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const Batch batch =
                make_batch(model, data, prepared, std::span<const std::size_t>(order).subspan(start, end - start));
            Tape tape;
            const auto fwd = forward_batch(tape, model, batch.molecules);
            const Var task = task_loss(tape, fwd.output, batch.targets, batch.mask, cfg.task_kind);
            const Var score = score_balance_loss(tape, fwd.alpha, loss_cfg.epsilon);
            const Var load = load_balance_loss(tape, fwd.alpha, fwd.selected, loss_cfg.epsilon, loss_cfg.load_uses_indicator);
            const double tv = tape.value(task).data[0], sv = tape.value(score).data[0], lv = tape.value(load).data[0];
            Var total;
            try {
                total = total_loss(tape, task, score, load, loss_cfg.lambda);
            } catch (const LossError& e) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(bi) + ": " + e.what() + " (task " + fmt(tv) + ", score " + fmt(sv) +
                                   ", load " + fmt(lv) + ")");
            }
            model.params.zero_grad();
            tape.backward(total);
            for (std::size_t p = 0; p < model.params.count(); ++p) {
                for (double g : model.params.grad(p).data) {
                    if (!std::isfinite(g)) {
                        throw NumericError("non-finite gradient in '" + model.params.name(p) + "' at epoch " +
                                           std::to_string(epoch) + ", batch " + std::to_string(bi));
                    }
                }
            }
            const double lr = lr_schedule.at(step++);
            adam.step(model.params, lr);
            for (std::size_t p = 0; p < model.params.count(); ++p) {
                for (double v : model.params.value(p).data) {
                    if (!std::isfinite(v)) {
                        throw NumericError("parameter '" + model.params.name(p) + "' became non-finite at epoch " +
                                           std::to_string(epoch) + ", batch " + std::to_string(bi));
                    }
                }
            }
            log.lr = lr;
            log.task += tv;
            log.score += sv;
            log.load += lv;
            log.total += tape.value(total).data[0];
            batches += 1.0;
        }
        log.task /= batches;
        log.score /= batches;
        log.load /= batches;
        log.total /= batches;
        log.val_metric = evaluate(model, data, monitor_idx, &prepared).mean;
        result.history.push_back(log);
        if (opts.log) *opts.log << to_csv(log) << '\n' << std::flush;

        if (improves(log.val_metric, best.best_metric, higher)) {
            best = Checkpoint{model, log.val_metric, epoch};
            best_epoch = epoch;
        } else if (epoch - best_epoch >= cfg.early_stop_patience) {
            break;
        }
    }
    result.checkpoint = std::move(best);
    return result;
}

}  // namespace mimoe
