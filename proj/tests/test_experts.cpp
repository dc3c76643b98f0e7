#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mimoe/errors.hpp"
#include "mimoe/experts.hpp"
#include "oracles.hpp"

using namespace mimoe;

namespace {

double ssp(double x) { return std::log(0.5 * std::exp(x) + 0.5); }

ExpertConfig small_config() {
    ExpertConfig c;
    c.hidden = 8;
    c.depth = 3;
    c.n_rbf = 16;
    c.rbf_max = 4.0;
    return c;
}

// Zero biases are replaced by small non-zero values so every term matters.
void randomize_biases(ParamStore& ps, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (std::size_t p = 0; p < ps.count(); ++p)
        if (ps.name(p).ends_with(".b"))
            for (auto& v : ps.value(p).data) v = u(gen);
}

}  // namespace

TEST(EdgeFeatures, PeakAndSymmetry) {
    const double spacing = 4.0 / 15.0;
    const auto at_center = expand_edge_features(5 * spacing, 4.0, 16);
    EXPECT_NEAR(at_center[5], 1.0, 1e-15);
    const auto plus = expand_edge_features(5 * spacing + 0.1, 4.0, 16);
    const auto minus = expand_edge_features(5 * spacing - 0.1, 4.0, 16);
    EXPECT_NEAR(plus[5], minus[5], 1e-15);
    for (double v : expand_edge_features(2.7, 4.0, 16)) {
        EXPECT_GT(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(EdgeFeatures, DirectFormula) {
    const auto f = expand_edge_features(3.0, 4.0, 16);
    ASSERT_EQ(f.size(), 16u);
    for (int m = 0; m < 16; ++m) {
        const double mu = 4.0 * m / 15.0;
        EXPECT_NEAR(f[m], std::exp(-16.0 * (3.0 - mu) * (3.0 - mu)), 1e-15);
    }
    // Frozen values of the nearest centres.
    EXPECT_NEAR(f[11], 0.9313584021113516, 1e-15);
    EXPECT_NEAR(f[12], 0.527292424043048, 1e-15);
}

TEST(EdgeFeatures, RejectsNonPositiveDistance) {
    EXPECT_THROW(expand_edge_features(0.0, 4.0, 16), ArgumentError);
    EXPECT_THROW(expand_edge_features(-1.0, 4.0, 16), ArgumentError);
}

TEST(Expert, EdgelessReadoutIsSumOfEmbeddings) {
    ParamStore ps(1);
    const auto cfg = small_config();
    const auto ep = add_expert_params(ps, "e", cfg);
    const auto c = oracle::cloud_from({{0, 0, 0}, {5, 0, 0}, {0, 5, 0}});
    auto cloud = c;
    cloud.atom_numbers = {1, 6, 8};
    const auto g = build_cutoff_graph(pairwise_distances(cloud), 2.0);
    ASSERT_TRUE(g.edges.empty());
    const auto h = expert_embedding(g, cloud, ps, ep, cfg);
    Tensor pooled(1, cfg.hidden);
    for (int z : cloud.atom_numbers)
        for (std::size_t j = 0; j < cfg.hidden; ++j) pooled(0, j) += ps.value(ep.embedding)(z - 1, j);
    const Tensor ref = oracle::matmul(pooled, ps.value(ep.readout_w));
    for (std::size_t j = 0; j < cfg.hidden; ++j) EXPECT_NEAR(h[j], ref(0, j), 1e-12);
}

TEST(Expert, TwoAtomUnrolled) {
    ExpertConfig cfg;
    cfg.hidden = 2;
    cfg.depth = 1;
    cfg.n_rbf = 2;
    cfg.rbf_max = 2.0;
    ParamStore ps;
    const auto ep = add_expert_params(ps, "e", cfg);
    for (std::size_t p = 0; p < ps.count(); ++p) {
        auto& v = ps.value(p).data;
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.05 * static_cast<double>((i * 7 + p * 3) % 11) - 0.25;
    }
    auto cloud = oracle::cloud_from({{0, 0, 0}, {0, 0, 1.3}});
    cloud.atom_numbers = {6, 8};
    const auto g = build_cutoff_graph(pairwise_distances(cloud), 2.0);
    const auto out = expert_embedding(g, cloud, ps, ep, cfg);

    const auto& L = ep.layers[0];
    auto P = [&](std::size_t id, std::size_t r, std::size_t c) { return ps.value(id)(r, c); };
    double h[2][2];
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) h[i][j] = P(ep.embedding, cloud.atom_numbers[i] - 1, j);
    const double e[2] = {std::exp(-1.0 * 1.3 * 1.3), std::exp(-1.0 * (1.3 - 2.0) * (1.3 - 2.0))};
    double F[2];
    for (int c = 0; c < 2; ++c) F[c] = ssp(e[0] * P(L.filter_w, 0, c) + e[1] * P(L.filter_w, 1, c) + P(L.filter_b, 0, c));
    double h1[2][2];
    for (int i = 0; i < 2; ++i) {
        const int j = 1 - i;
        double m[2];
        for (int c = 0; c < 2; ++c)
            m[c] = ssp(h[j][0] * F[0] * P(L.msg_w, 0, c) + h[j][1] * F[1] * P(L.msg_w, 1, c) + P(L.msg_b, 0, c));
        double u1[2];
        for (int c = 0; c < 2; ++c) u1[c] = ssp(m[0] * P(L.upd1_w, 0, c) + m[1] * P(L.upd1_w, 1, c) + P(L.upd1_b, 0, c));
        for (int c = 0; c < 2; ++c)
            h1[i][c] = h[i][c] + u1[0] * P(L.upd2_w, 0, c) + u1[1] * P(L.upd2_w, 1, c) + P(L.upd2_b, 0, c);
    }
    for (int c = 0; c < 2; ++c) {
        const double pooled0 = h1[0][0] + h1[1][0], pooled1 = h1[0][1] + h1[1][1];
        const double ref = pooled0 * P(ep.readout_w, 0, c) + pooled1 * P(ep.readout_w, 1, c) + P(ep.readout_b, 0, c);
        EXPECT_NEAR(out[c], ref, 1e-12);
    }
}

TEST(Expert, AtomCountMismatch) {
    ParamStore ps;
    const auto cfg = small_config();
    const auto ep = add_expert_params(ps, "e", cfg);
    const auto c3 = oracle::cloud_from({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}});
    const auto g2 = build_cutoff_graph(pairwise_distances(oracle::cloud_from({{0, 0, 0}, {1, 0, 0}})), 2.0);
    EXPECT_THROW(expert_embedding(g2, c3, ps, ep, cfg), ShapeError);
}

TEST(Expert, PermutationAndRigidMotionInvariance) {
    ParamStore ps(2);
    const auto cfg = small_config();
    const auto ep = add_expert_params(ps, "e", cfg);
    randomize_biases(ps, 3);
    std::mt19937_64 gen(13);
    for (int trial = 0; trial < 5; ++trial) {
        auto c = oracle::random_cloud(gen, 9, 5.0, 0.5);
        for (std::size_t i = 0; i < c.size(); ++i) c.atom_numbers[i] = 1 + static_cast<int>(i % 3) * 5;
        const auto embed = [&](const PointCloud& x) {
            return expert_embedding(build_cutoff_graph(pairwise_distances(x), 3.0), x, ps, ep, cfg);
        };
        const auto base = embed(c);
        for (double v : base) EXPECT_TRUE(std::isfinite(v));
        const auto perm = embed(oracle::permute(c, oracle::random_permutation(c.size(), gen)));
        for (std::size_t j = 0; j < base.size(); ++j) EXPECT_NEAR(perm[j], base[j], 1e-12);
        for (int m = 0; m < 20; ++m) {
            const auto moved = embed(oracle::random_motion(c, gen));
            for (std::size_t j = 0; j < base.size(); ++j) EXPECT_NEAR(moved[j], base[j], 1e-9);
        }
    }
}

TEST(Expert, SmallerCutoffSeesSubsetOfEdges) {
    std::mt19937_64 gen(19);
    for (int trial = 0; trial < 20; ++trial) {
        const auto c = oracle::random_cloud(gen, 10, 5.0);
        const auto dm = pairwise_distances(c);
        for (double r : {2.0, 2.5, 3.0, 3.5}) {
            const auto a = build_cutoff_graph(dm, r), b = build_cutoff_graph(dm, r + 0.5);
            EXPECT_TRUE(std::includes(b.edges.begin(), b.edges.end(), a.edges.begin(), a.edges.end()));
        }
    }
}

TEST(Expert, BatchCompositionDoesNotChangeResults) {
    ParamStore ps(5);
    const auto cfg = small_config();
    const auto ep = add_expert_params(ps, "e", cfg);
    randomize_biases(ps, 6);
    std::mt19937_64 gen(23);
    std::vector<PointCloud> clouds;
    for (int i = 0; i < 4; ++i) clouds.push_back(oracle::random_cloud(gen, 5 + i, 4.0));
    ExpertBatch all;
    std::vector<std::vector<double>> singles;
    for (const auto& c : clouds) {
        const auto dm = pairwise_distances(c);
        const auto g = build_cutoff_graph(dm, 3.0);
        all.add(c, dm, g, cfg);
        singles.push_back(expert_embedding(g, c, ps, ep, cfg));
    }
    Tape tape;
    const Tensor& batched = tape.value(expert_forward(tape, ps, ep, cfg, all));
    ASSERT_EQ(batched.rows, 4u);
    for (std::size_t b = 0; b < 4; ++b) {
        const auto row = batched.row(b);
        EXPECT_TRUE(std::equal(row.begin(), row.end(), singles[b].begin()));
    }
}

TEST(Expert, SharedShapesAcrossExperts) {
    ParamStore ps;
    const auto cfg = small_config();
    const auto a = add_expert_params(ps, "a", cfg);
    const auto b = add_expert_params(ps, "b", cfg);
    EXPECT_EQ(ps.value(a.embedding).rows, static_cast<std::size_t>(kMaxAtomicNumber));
    for (std::size_t l = 0; l < cfg.depth; ++l) {
        EXPECT_EQ(ps.value(a.layers[l].msg_w).shape_string(), ps.value(b.layers[l].msg_w).shape_string());
        EXPECT_EQ(ps.value(a.layers[l].filter_w).shape_string(), ps.value(b.layers[l].filter_w).shape_string());
    }
    EXPECT_FALSE(ps.value(a.layers[0].msg_w) == ps.value(b.layers[0].msg_w));
}

TEST(Aggregate, Examples) {
    std::vector<std::vector<double>> basis(5, std::vector<double>(5, 0.0));
    for (std::size_t k = 0; k < 5; ++k) basis[k][k] = 1.0;
    RoutingWeights one{{0, 0, 1, 0, 0}, {2}};
    EXPECT_EQ(moe_aggregate(basis, one), basis[2]);

    RoutingWeights uniform{{0.2, 0.2, 0.2, 0.2, 0.2}, {0, 1, 2, 3, 4}};
    std::vector<std::vector<double>> emb = {{1, 2}, {3, 4}, {5, 6}, {7, 8}, {9, 10}};
    const auto mean = moe_aggregate(emb, uniform);
    EXPECT_NEAR(mean[0], 5.0, 1e-12);
    EXPECT_NEAR(mean[1], 6.0, 1e-12);

    RoutingWeights two{{0, 0, 0, 0.26894142136999512, 0.73105857863000488}, {3, 4}};
    std::vector<std::vector<double>> lazy = basis;
    lazy[0].clear();
    lazy[1].clear();
    lazy[2].clear();
    const auto h = moe_aggregate(lazy, two);
    EXPECT_EQ(h, (std::vector<double>{0, 0, 0, 0.26894142136999512, 0.73105857863000488}));
}

TEST(Aggregate, WidthMismatch) {
    std::vector<std::vector<double>> emb = {{1, 2}, {3}};
    RoutingWeights w{{0.5, 0.5}, {0, 1}};
    EXPECT_THROW(moe_aggregate(emb, w), ShapeError);
}

TEST(Head, Examples) {
    ParamStore ps(9);
    const auto head = add_head_params(ps, 4, 2);
    const Tensor h = Tensor::row_vector({0.5, -1.0, 2.0, 0.25});
    {
        ParamStore zero = ps;
        std::fill(zero.value(head.w).data.begin(), zero.value(head.w).data.end(), 0.0);
        Tape tape;
        EXPECT_EQ(tape.value(predict(tape, zero, head, tape.constant(h))).data, (std::vector<double>{0, 0}));
    }
    {
        ParamStore first;
        const auto h1 = add_head_params(first, 4, 1);
        std::fill(first.value(h1.w).data.begin(), first.value(h1.w).data.end(), 0.0);
        first.value(h1.w)(0, 0) = 1.0;
        Tape tape;
        EXPECT_EQ(tape.value(predict(tape, first, h1, tape.constant(h))).data[0], 0.5);
    }
    Tape tape;
    const auto y = tape.value(predict(tape, ps, head, tape.constant(h)));
    const Tensor ref = oracle::matmul(h, ps.value(head.w));
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(y(0, j), ref(0, j), 1e-12);
    Tape bad;
    EXPECT_THROW(predict(bad, ps, head, bad.constant(Tensor::row_vector({1, 2, 3}))), ShapeError);
}
