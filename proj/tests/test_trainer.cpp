#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "mimoe/errors.hpp"
#include "mimoe/metrics.hpp"
#include "mimoe/model.hpp"
#include "mimoe/trainer.hpp"

using namespace mimoe;

namespace {

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.hidden_width = 8;
    cfg.gate_hidden = 8;
    cfg.expert_depth = 2;
    cfg.batch_size = 8;
    cfg.max_epochs = 3;
    cfg.learning_rate = 3e-3;
    cfg.seed = 11;
    return cfg;
}

const Dataset& small_data() {
    static const Dataset d = fixture::pair_count_dataset(40, 8, 5.0, 3);
    return d;
}

}  // namespace

TEST(Split, DeterministicDisjointCovering) {
    const auto a = split_indices(100, {0.8, 0.1, 0.1}, 5);
    const auto b = split_indices(100, {0.8, 0.1, 0.1}, 5);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.valid, b.valid);
    EXPECT_EQ(a.test, b.test);
    EXPECT_EQ(a.train.size(), 80u);
    EXPECT_EQ(a.valid.size(), 10u);
    EXPECT_EQ(a.test.size(), 10u);
    std::set<std::size_t> all(a.train.begin(), a.train.end());
    all.insert(a.valid.begin(), a.valid.end());
    all.insert(a.test.begin(), a.test.end());
    EXPECT_EQ(all.size(), 100u);
    EXPECT_NE(split_indices(100, {0.8, 0.1, 0.1}, 6).train, a.train);
}

TEST(Metrics, AucExample) {
    const std::vector<double> s = {0.1, 0.4, 0.35, 0.8}, y = {0, 0, 1, 1};
    EXPECT_DOUBLE_EQ(*roc_auc(s, y), 0.75);
    EXPECT_DOUBLE_EQ(oracle::auc_pairs(s, y), 0.75);
}

TEST(Metrics, AucMatchesPairOracleWithTies) {
    std::mt19937_64 gen(17);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + gen() % 30;
        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(gen() % 7);
            y[i] = static_cast<double>(gen() % 2);
        }
        const auto auc = roc_auc(s, y);
        const bool both = std::count(y.begin(), y.end(), 1.0) > 0 && std::count(y.begin(), y.end(), 0.0) > 0;
        ASSERT_EQ(auc.has_value(), both);
        if (both) {
            EXPECT_NEAR(*auc, oracle::auc_pairs(s, y), 1e-12);
        }
    }
}

TEST(Metrics, PerfectAndConstantPredictors) {
    Tensor y(4, 1), mask(4, 1, 1.0);
    y.data = {0, 1, 0, 1};
    const auto perfect_cls = compute_metrics(TaskKind::classification, y, y, mask);
    EXPECT_EQ(perfect_cls.mean, 1.0);
    const auto constant = compute_metrics(TaskKind::classification, Tensor(4, 1, 0.3), y, mask);
    EXPECT_EQ(constant.mean, 0.5);
    Tensor r(3, 1, 0.0);
    r.data = {1.5, -2.0, 4.0};
    const auto perfect_reg = compute_metrics(TaskKind::regression, r, r, Tensor(3, 1, 1.0));
    EXPECT_EQ(perfect_reg.mean, 0.0);
    EXPECT_EQ(perfect_reg.mse, 0.0);
}

TEST(Metrics, RmseAndUnusableTask) {
    Tensor p(2, 2), y(2, 2), m(2, 2);
    p.data = {1, 0, 3, 0};
    y.data = {0, 0, 0, 0};
    m.data = {1, 0, 1, 0};
    const auto met = compute_metrics(TaskKind::regression, p, y, m);
    EXPECT_NEAR(met.per_task[0], std::sqrt(5.0), 1e-15);
    EXPECT_TRUE(std::isnan(met.per_task[1]));
    EXPECT_NEAR(met.mean, std::sqrt(5.0), 1e-15);
    EXPECT_FALSE(met.warnings.empty());
}

TEST(Forward, TraceFollowsStepOrder) {
    auto cfg = small_config();
    auto model = make_model(cfg, 1);
    std::vector<std::pair<std::string, ForwardStep>> seen;
    const auto& cloud = small_data().samples[0].cloud;
    forward_pass(cloud, model, nullptr, [&](std::string_view id, ForwardStep s) { seen.emplace_back(id, s); });
    const std::vector<ForwardStep> expect = {ForwardStep::build_graphs,      ForwardStep::trajectory,
                                             ForwardStep::gate_logits,       ForwardStep::topk_softmax,
                                             ForwardStep::expert_embeddings, ForwardStep::aggregate,
                                             ForwardStep::head};
    ASSERT_EQ(seen.size(), expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) {
        EXPECT_EQ(seen[i].first, cloud.id);
        EXPECT_EQ(seen[i].second, expect[i]) << to_string(seen[i].second);
    }
}

TEST(Forward, CachedEqualsUncached) {
    auto cfg = small_config();
    auto model = make_model(cfg, 1);
    TrajectoryCache cache;
    for (const auto& s : small_data().samples) {
        const auto plain = forward_pass(s.cloud, model);
        cache.get_or_compute(s.cloud, model.schedule);
        const auto cached = forward_pass(s.cloud, model, &cache);
        EXPECT_EQ(plain.values, cached.values);
        EXPECT_EQ(plain.routing.alpha, cached.routing.alpha);
    }
    EXPECT_EQ(cache.hits(), small_data().size());
}

TEST(Forward, LazyExpertsMatchEveryExpert) {
    auto cfg = small_config();
    auto model = make_model(cfg, 1);
    const auto prepared = prepare_dataset(small_data(), cfg);
    std::vector<const PreparedMolecule*> ptrs;
    for (const auto& p : prepared) ptrs.push_back(&p);
    Tape a, b;
    const auto lazy = forward_batch(a, model, ptrs);
    const auto full = forward_batch_all_experts(b, model, ptrs);
    EXPECT_EQ(a.value(lazy.output), b.value(full.output));
    EXPECT_EQ(a.value(lazy.alpha), b.value(full.alpha));
}

TEST(Forward, BatchCompositionIndependent) {
    auto cfg = small_config();
    auto model = make_model(cfg, 1);
    const auto prepared = prepare_dataset(small_data(), cfg);
    const auto together = predict_batch(model, std::span<const PreparedMolecule>(prepared));
    for (std::size_t i = 0; i < prepared.size(); i += 7) {
        const PreparedMolecule* one[] = {&prepared[i]};
        EXPECT_EQ(predict_batch(model, one)[0].values, together[i].values);
    }
}

TEST(Forward, DenseEqualsSparseWithAllExperts) {
    auto sparse = small_config();
    sparse.top_k = 5;
    auto dense = sparse;
    dense.routing_mode = RoutingMode::dense;
    dense.top_k = 2;
    auto ms = make_model(sparse, 1);
    auto md = make_model(dense, 1);
    for (const auto& s : small_data().samples) {
        const auto a = forward_pass(s.cloud, ms), b = forward_pass(s.cloud, md);
        EXPECT_EQ(a.values, b.values);
        EXPECT_EQ(a.routing.alpha, b.routing.alpha);
    }
}

TEST(Forward, OneExpertIsTheSingleExpertPipeline) {
    auto cfg = small_config();
    cfg.routing_mode = RoutingMode::one_expert;
    auto model = make_model(cfg, 1);
    ASSERT_EQ(model.experts.size(), 1u);
    for (const auto& s : small_data().samples) {
        const auto pred = forward_pass(s.cloud, model);
        EXPECT_EQ(pred.routing.alpha, std::vector<double>{1.0});
        const auto g = build_cutoff_graph(pairwise_distances(s.cloud), cfg.cutoffs.front());
        const auto h = expert_embedding(g, s.cloud, model.params, model.experts[0], model.expert_cfg);
        Tape t;
        const Var out = predict(t, model.params, model.head, t.constant(Tensor::row_vector(h)));
        const auto units = to_prediction_units(model, t.value(out).row(0));
        EXPECT_NEAR(pred.values[0], units[0], 1e-12);
    }
}

TEST(Forward, PredictionsInvariantToRigidMotionAndPermutation) {
    auto cfg = small_config();
    auto model = make_model(cfg, 1);
    std::mt19937_64 gen(29);
    for (std::size_t i = 0; i < 5; ++i) {
        const auto& c = small_data().samples[i].cloud;
        const auto base = forward_pass(c, model);
        for (int m = 0; m < 5; ++m) {
            const auto moved = forward_pass(oracle::random_motion(c, gen), model);
            EXPECT_NEAR(moved.values[0], base.values[0], 1e-9);
        }
        const auto perm = forward_pass(oracle::permute(c, oracle::random_permutation(c.size(), gen)), model);
        EXPECT_NEAR(perm.values[0], base.values[0], 1e-12);
    }
}

TEST(Train, ZeroEpochsReturnsInitialModel) {
    auto cfg = small_config();
    cfg.max_epochs = 0;
    const auto r = train(cfg, small_data());
    EXPECT_TRUE(r.history.empty());
    EXPECT_EQ(r.checkpoint.epoch, 0u);
    auto fresh = make_model(cfg, 1);
    auto model = r.checkpoint.model;
    for (std::size_t p = 0; p < fresh.params.count(); ++p) EXPECT_EQ(model.params.value(p), fresh.params.value(p));
    EXPECT_NEAR(evaluate(model, small_data(), r.split.valid).mean, r.checkpoint.best_metric, 1e-12);
}

TEST(Train, LogFormat) {
    auto cfg = small_config();
    std::ostringstream log;
    TrainOptions opts;
    opts.log = &log;
    const auto r = train(cfg, small_data(), opts);
    std::istringstream in(log.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, kEpochLogHeader);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 6);
        ++rows;
    }
    EXPECT_EQ(rows, r.history.size());
    for (const auto& h : r.history) {
        EXPECT_NEAR(h.total, h.task + 0.01 * (h.score + h.load), 1e-9);
        EXPECT_GT(h.lr, 0.0);
    }
}

TEST(Train, CheckpointRoundTrip) {
    auto cfg = small_config();
    const auto r = train(cfg, small_data());
    const std::string bytes = checkpoint_bytes(r.checkpoint);
    auto back = checkpoint_from_bytes(bytes);
    EXPECT_EQ(checkpoint_bytes(back), bytes);
    EXPECT_EQ(back.epoch, r.checkpoint.epoch);
    EXPECT_NEAR(evaluate(back.model, small_data(), r.split.valid).mean, r.checkpoint.best_metric, 1e-9);

    const auto path = std::filesystem::temp_directory_path() / ("mimoe_ck_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + ".bin");
    save_checkpoint(r.checkpoint, path);
    EXPECT_EQ(checkpoint_bytes(load_checkpoint(path)), bytes);
    std::filesystem::remove(path);
}

TEST(Train, CorruptCheckpointsAreDataErrors) {
    auto cfg = small_config();
    cfg.max_epochs = 0;
    const std::string bytes = checkpoint_bytes(train(cfg, small_data()).checkpoint);
    std::string bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(checkpoint_from_bytes(bad), DataError);
    EXPECT_THROW(checkpoint_from_bytes(bytes.substr(0, bytes.size() - 3)), DataError);
    EXPECT_THROW(checkpoint_from_bytes(bytes + "x"), DataError);
    EXPECT_THROW(load_checkpoint("/nonexistent/ck.bin"), DataError);
}

TEST(Train, FixedSeedIsBitwiseReproducible) {
    auto cfg = small_config();
    const auto a = train(cfg, small_data()), b = train(cfg, small_data());
    EXPECT_EQ(checkpoint_bytes(a.checkpoint), checkpoint_bytes(b.checkpoint));
    cfg.seed = 12;
    EXPECT_NE(checkpoint_bytes(train(cfg, small_data()).checkpoint), checkpoint_bytes(a.checkpoint));
}

TEST(Train, DenseAndSparseAllExpertsTrainIdentically) {
    auto sparse = small_config();
    sparse.top_k = 5;
    auto dense = sparse;
    dense.routing_mode = RoutingMode::dense;
    const auto a = train(sparse, small_data()), b = train(dense, small_data());
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t e = 0; e < a.history.size(); ++e) {
        EXPECT_EQ(a.history[e].total, b.history[e].total);
        EXPECT_EQ(a.history[e].val_metric, b.history[e].val_metric);
    }
    for (std::size_t p = 0; p < a.checkpoint.model.params.count(); ++p)
        EXPECT_EQ(a.checkpoint.model.params.value(p), b.checkpoint.model.params.value(p));
}

TEST(Train, OneExpertModeTrainsAndEvaluates) {
    auto cfg = small_config();
    cfg.routing_mode = RoutingMode::one_expert;
    auto r = train(cfg, small_data());
    EXPECT_TRUE(std::isfinite(evaluate(r.checkpoint.model, small_data()).mean));
}

TEST(Train, SingleExpertLinearTargetConverges) {
    // Target linear in the atom counts per element.
    Dataset d = fixture::pair_count_dataset(120, 8, 5.0, 41);
    for (auto& s : d.samples) {
        double y = 0;
        for (int z : s.cloud.atom_numbers) y += z == 1 ? 0.5 : z == 6 ? 1.0 : z == 7 ? -1.0 : 2.0;
        s.targets[0] = y;
    }
    std::vector<double> first, tenth;
    std::vector<std::size_t> rises;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto cfg = small_config();
        cfg.routing_mode = RoutingMode::one_expert;
        cfg.lambda_balance = 0.0;
        cfg.max_epochs = 10;
        cfg.early_stop_patience = 10;
        cfg.warmup_fraction = 0.0;
        cfg.seed = seed;
        const auto r = train(cfg, d);
        ASSERT_EQ(r.history.size(), 10u);
        first.push_back(r.history.front().val_metric);
        tenth.push_back(r.history.back().val_metric);
        std::size_t up = 0;
        for (std::size_t e = 1; e < 10; ++e) up += r.history[e].val_metric > r.history[e - 1].val_metric;
        rises.push_back(up);
    }
    std::sort(first.begin(), first.end());
    std::sort(tenth.begin(), tenth.end());
    std::sort(rises.begin(), rises.end());
    EXPECT_LT(tenth[2], first[2]);
    EXPECT_LE(rises[2], 2u);
}

TEST(Train, ClassificationRun) {
    const auto d = fixture::pair_count_classification(60, 8, 5.0, 5);
    auto cfg = small_config();
    cfg.task_kind = TaskKind::classification;
    auto r = train(cfg, d);
    const auto m = evaluate(r.checkpoint.model, d);
    EXPECT_EQ(m.kind, TaskKind::classification);
    EXPECT_GE(m.mean, 0.0);
    EXPECT_LE(m.mean, 1.0);
}

TEST(Train, DivergenceIsNumericError) {
    auto cfg = small_config();
    cfg.learning_rate = 1e300;
    cfg.warmup_fraction = 0.0;
    cfg.max_epochs = 5;
    try {
        train(cfg, small_data());
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("batch"), std::string::npos) << e.what();
    }
}

TEST(Train, TaskKindMismatch) {
    auto cfg = small_config();
    cfg.task_kind = TaskKind::classification;
    EXPECT_THROW(train(cfg, small_data()), DataError);
    auto model = make_model(cfg, 1);
    EXPECT_THROW(evaluate(model, small_data()), DataError);
    Dataset empty;
    EXPECT_THROW(train(small_config(), empty), DataError);
}
