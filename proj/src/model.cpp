#include "mimoe/model.hpp"

#include <algorithm>

#include "mimoe/errors.hpp"

namespace mimoe {
namespace {

void emit(const TraceSink& trace, std::span<const PreparedMolecule* const> batch, ForwardStep step) {
    if (!trace) return;
    for (const auto* m : batch) trace(m->cloud.id, step);
}

ForwardResult run(Tape& tape, MoEModel& model, std::span<const PreparedMolecule* const> batch, const TraceSink& trace,
                  bool all_experts) {
    if (batch.empty()) throw ArgumentError("forward: empty batch");
    const std::size_t K = model.experts.size();
    const std::size_t B = batch.size();
    ForwardResult out;

    std::vector<const TopoTrajectory*> trajs;
    trajs.reserve(B);
    for (const auto* m : batch) {
        if (m->expert_graphs.size() != K) throw ShapeError("prepared molecule has the wrong number of expert graphs");
        trajs.push_back(&m->trajectory);
    }
    out.logits = encode_trajectories(tape, model.params, model.gate, tape.constant(flatten_trajectories(trajs)));
    emit(trace, batch, ForwardStep::gate_logits);

    auto routed = route_batch(tape, out.logits, model.cfg.effective_top_k());
    out.alpha = routed.alpha;
    out.selected = std::move(routed.selected);
    emit(trace, batch, ForwardStep::topk_softmax);

    std::vector<Var> expert_out(K);
    std::vector<std::vector<std::int32_t>> rows(K, std::vector<std::int32_t>(B, -1));
    for (std::size_t k = 0; k < K; ++k) {
        ExpertBatch eb;
        for (std::size_t b = 0; b < B; ++b) {
            const auto& sel = out.selected[b];
            const bool chosen = all_experts || std::find(sel.begin(), sel.end(), k) != sel.end();
            if (!chosen) continue;
            rows[k][b] = static_cast<std::int32_t>(eb.molecules);
            eb.add(batch[b]->cloud, batch[b]->distances, batch[b]->expert_graphs[k], model.expert_cfg);
        }
        expert_out[k] = eb.molecules == 0 ? tape.constant(Tensor(0, model.expert_cfg.hidden))
                                          : expert_forward(tape, model.params, model.experts[k], model.expert_cfg, eb);
    }
    emit(trace, batch, ForwardStep::expert_embeddings);

    out.embedding = tape.mixture(out.alpha, expert_out, std::move(rows));
    emit(trace, batch, ForwardStep::aggregate);

    out.output = predict(tape, model.params, model.head, out.embedding);
    emit(trace, batch, ForwardStep::head);
    return out;
}

}  // namespace

std::string_view to_string(ForwardStep step) {
    switch (step) {
        case ForwardStep::build_graphs: return "build_graphs";
        case ForwardStep::trajectory: return "trajectory";
        case ForwardStep::gate_logits: return "gate_logits";
        case ForwardStep::topk_softmax: return "topk_softmax";
        case ForwardStep::expert_embeddings: return "expert_embeddings";
        case ForwardStep::aggregate: return "aggregate";
        case ForwardStep::head: return "head";
    }
    return "?";
}

MoEModel make_model(const TrainConfig& cfg, std::size_t task_count) {
    cfg.validate();
    if (task_count < 1) throw ArgumentError("model needs at least one task");
    MoEModel m;
    m.cfg = cfg;
    m.schedule = cfg.schedule();
    m.task_count = task_count;
    m.params = ParamStore(cfg.seed);
    m.expert_cfg.hidden = cfg.hidden_width;
    m.expert_cfg.depth = cfg.expert_depth;
    m.expert_cfg.n_rbf = cfg.n_rbf;
    m.expert_cfg.rbf_max = m.schedule.expert_cutoffs.back();
    m.expert_cfg.pooling = cfg.pooling;

    const std::size_t K = m.schedule.expert_count();
    m.gate = add_gate_params(m.params, m.schedule.radius_count(), cfg.gate_hidden, K, cfg.gate_type);
    for (std::size_t k = 0; k < K; ++k) {
        m.experts.push_back(add_expert_params(m.params, "expert" + std::to_string(k), m.expert_cfg));
    }
    m.head = add_head_params(m.params, cfg.hidden_width, task_count);
    m.target_mean.assign(task_count, 0.0);
    m.target_scale.assign(task_count, 1.0);
    return m;
}

PreparedMolecule prepare_molecule(const PointCloud& cloud, const TrainConfig& cfg, const FiltrationSchedule& sched,
                                  TrajectoryCache* cache, const TraceSink& trace) {
    validate(cloud);
    PreparedMolecule p;
    p.cloud = cloud;
    p.distances = pairwise_distances(cloud);
    for (double c : sched.expert_cutoffs) {
        p.expert_graphs.push_back(cap_neighbors(build_cutoff_graph(p.distances, c), p.distances, cfg.max_neighbors));
    }
    if (trace) trace(cloud.id, ForwardStep::build_graphs);
    p.trajectory = cache ? cache->get_or_compute(cloud, sched) : build_trajectory(p.distances, sched);
    if (trace) trace(cloud.id, ForwardStep::trajectory);
    return p;
}

ForwardResult forward_batch(Tape& tape, MoEModel& model, std::span<const PreparedMolecule* const> batch,
                            const TraceSink& trace) {
    return run(tape, model, batch, trace, false);
}

ForwardResult forward_batch_all_experts(Tape& tape, MoEModel& model, std::span<const PreparedMolecule* const> batch) {
    return run(tape, model, batch, {}, true);
}

std::vector<double> to_prediction_units(const MoEModel& model, std::span<const double> output_row) {
    if (output_row.size() != model.task_count) throw ShapeError("prediction width differs from task count");
    std::vector<double> y(output_row.begin(), output_row.end());
    if (model.cfg.task_kind == TaskKind::regression) {
        for (std::size_t t = 0; t < y.size(); ++t) y[t] = model.target_mean[t] + model.target_scale[t] * y[t];
    }
    return y;
}

Prediction forward_pass(const PointCloud& cloud, MoEModel& model, TrajectoryCache* cache, const TraceSink& trace) {
    const PreparedMolecule p = prepare_molecule(cloud, model.cfg, model.schedule, cache, trace);
    const PreparedMolecule* one[] = {&p};
    Tape tape;
    const auto r = forward_batch(tape, model, one, trace);
    Prediction pred;
    pred.values = to_prediction_units(model, tape.value(r.output).row(0));
    const auto a = tape.value(r.alpha).row(0);
    pred.routing.alpha.assign(a.begin(), a.end());
    pred.routing.selected = r.selected[0];
    return pred;
}

std::vector<Prediction> predict_batch(MoEModel& model, std::span<const PreparedMolecule* const> molecules) {
    std::vector<Prediction> out;
    out.reserve(molecules.size());
    const std::size_t chunk = std::max<std::size_t>(model.cfg.batch_size, 1);
    for (std::size_t start = 0; start < molecules.size(); start += chunk) {
        const auto batch = molecules.subspan(start, std::min(chunk, molecules.size() - start));
        Tape tape;
        const auto r = forward_batch(tape, model, batch);
        const Tensor& y = tape.value(r.output);
        const Tensor& a = tape.value(r.alpha);
        for (std::size_t b = 0; b < batch.size(); ++b) {
            Prediction p;
            p.values = to_prediction_units(model, y.row(b));
            p.routing.alpha.assign(a.row(b).begin(), a.row(b).end());
            p.routing.selected = r.selected[b];
            out.push_back(std::move(p));
        }
    }
    return out;
}

std::vector<Prediction> predict_batch(MoEModel& model, std::span<const PreparedMolecule> molecules) {
    std::vector<const PreparedMolecule*> ptrs;
    ptrs.reserve(molecules.size());
    for (const auto& m : molecules) ptrs.push_back(&m);
    return predict_batch(model, ptrs);
}

}  // namespace mimoe
