#include "fd_helpers.hpp"

#include "pxgl/data.hpp"

#include <gtest/gtest.h>

using namespace pxgl;

namespace {

GcnStack identity_stack(std::size_t dim, std::size_t layers, Activation act) {
    GcnStack s;
    s.activation = act;
    for (std::size_t l = 0; l < layers; ++l) s.layer_weights.push_back(Matrix::Identity(dim, dim));
    return s;
}

bool close_rel(double a, double b, double rel) {
    return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-5});
}

}  // namespace

TEST(GcnForward, SingleNodePassesFeaturesThrough) {
    Graph g(1, std::vector<Edge>{}, (Matrix(1, 3) << 0.5, 2.0, 0.0).finished());
    const Vector pooled = gcn_forward(g, identity_stack(3, 2, Activation::Relu)).pooled;
    EXPECT_EQ(pooled, (Vector(3) << 0.5, 2.0, 0.0).finished());
}

TEST(GcnForward, EdgeAveragesFeatures) {
    Graph g(2, std::vector<Edge>{{0, 1}}, (Matrix(2, 1) << 1, 0).finished());
    EXPECT_NEAR(gcn_forward(g, identity_stack(1, 1, Activation::Identity)).pooled(0), 0.5, 1e-15);
}

TEST(GcnForward, ZeroFeaturesGiveZero) {
    std::mt19937_64 rng(70);
    Graph g = oracle::random_graph(rng, 6, 0.5).with_features(Matrix::Zero(6, 3));
    GcnStack s;
    s.layer_weights = {Matrix::Random(3, 4), Matrix::Random(4, 2)};
    EXPECT_EQ(gcn_forward(g, s).pooled, Vector::Zero(2));
}

TEST(GcnForward, DimensionMismatchThrows) {
    Graph g(2, std::vector<Edge>{{0, 1}}, Matrix::Ones(2, 2));
    EXPECT_THROW(gcn_forward(g, identity_stack(3, 1, Activation::Relu)), InputError);
}

TEST(PatternRepresentation, Examples) {
    std::mt19937_64 rng(71);
    ModelConfig cfg;
    cfg.input_dim = 2;
    cfg.hidden_dim = cfg.out_dim = 3;
    auto model = make_model(cfg, 1);
    const GcnStack& cyc = model.stacks[index_of(PatternKind::Cycle)];

    PatternSampleSet empty{0, PatternKind::Cycle, {}, {}, 5};
    EXPECT_EQ(pattern_representation(empty, cyc), Vector::Zero(3));

    Graph g = oracle::random_graph(rng, 8, 0.6, 0, 2);
    auto set = sample_pattern_set(g, PatternKind::Cycle, 4, 3);
    ASSERT_GE(set.size(), 2u);
    Vector mean = Vector::Zero(3);
    for (const auto& s : set.samples) mean += gcn_forward(s, cyc).pooled;
    EXPECT_TRUE(pattern_representation(set, cyc).isApprox(mean / static_cast<double>(set.size()), 1e-14));

    PatternSampleSet one{0, PatternKind::Cycle, {set.samples[0]}, {set.wl_hashes[0]}, 1};
    EXPECT_EQ(pattern_representation(one, cyc), gcn_forward(set.samples[0], cyc).pooled);
    EXPECT_THROW(pattern_representation(one, model.stacks[0]), InputError);
}

TEST(EnsembleRepresentation, Examples) {
    const Vector v = (Vector(2) << 1.5, -2).finished();
    std::vector<Vector> single = {v};
    EXPECT_EQ(ensemble_representation(single, Vector::Zero(1)), v);
    std::vector<Vector> same(4, v);
    EXPECT_TRUE(ensemble_representation(same, (Vector(4) << 3, -1, 0.2, 7).finished()).isApprox(v, 1e-15));
    std::vector<Vector> z = {v, Vector::Constant(2, 9.0), Vector::Constant(2, -4.0)};
    const Vector g = ensemble_representation(z, (Vector(3) << 30, -30, -30).finished());
    EXPECT_LE((g - v).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(CeLoss, Examples) {
    Classifier c;
    c.layers.push_back({Matrix::Zero(3, 4), Vector::Zero(3)});
    EXPECT_DOUBLE_EQ(ce_loss(Vector::Ones(4), 1, c).loss, std::log(3.0));
    c.layers[0].bias = (Vector(3) << 0, 30, 0).finished();
    EXPECT_LT(ce_loss(Vector::Ones(4), 1, c).loss, 1e-9);
    EXPECT_THROW(ce_loss(Vector::Ones(4), 3, c), InputError);
}

TEST(CeLoss, GradientWrtEncodingMatchesFiniteDifferences) {
    auto f = fd::make_fixture(72);
    std::mt19937_64 rng(72);
    Vector g(4);
    for (auto& x : g) x = std::normal_distribution<double>(0, 1)(rng);
    const auto r = ce_loss(g, 2, f.model.classifier);
    for (Eigen::Index i = 0; i < 4; ++i) {
        Vector gp = g, gm = g;
        gp(i) += 1e-5;
        gm(i) -= 1e-5;
        const double num = (ce_loss(gp, 2, f.model.classifier).loss - ce_loss(gm, 2, f.model.classifier).loss) / 2e-5;
        EXPECT_TRUE(close_rel(r.d_g(i), num, 1e-4));
    }
}

TEST(GaussianKl, Examples) {
    std::vector<Vector> same(2, Vector::Constant(3, 0.7));
    EXPECT_EQ(gaussian_kl_loss(same, 1.0).loss, 0.0);
    std::mt19937_64 rng(73);
    std::normal_distribution<double> nd(0, 1);
    for (int t = 0; t < 20; ++t) {
        std::vector<Vector> g(5, Vector(3));
        for (auto& v : g)
            for (auto& x : v) x = nd(rng);
        EXPECT_GE(gaussian_kl_loss(g, 1.0).loss, 0.0);
        EXPECT_LT(gaussian_kl_loss(g, 1e12).loss, 1e-9);
    }
    EXPECT_THROW(gaussian_kl_loss(std::vector<Vector>(1, Vector::Ones(2)), 1.0), InputError);
}

TEST(GaussianKl, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(74);
    std::normal_distribution<double> nd(0, 1);
    std::vector<Vector> g(4, Vector(3));
    for (auto& v : g)
        for (auto& x : v) x = nd(rng);
    const double gamma = median_heuristic_gamma(g);
    const auto r = gaussian_kl_loss(g, gamma);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (Eigen::Index d = 0; d < 3; ++d) {
            auto gp = g, gm = g;
            gp[i](d) += 1e-5;
            gm[i](d) -= 1e-5;
            const double num = (gaussian_kl_loss(gp, gamma).loss - gaussian_kl_loss(gm, gamma).loss) / 2e-5;
            EXPECT_TRUE(close_rel(r.d_g[i](d), num, 1e-4)) << r.d_g[i](d) << " vs " << num;
        }
}

TEST(Backward, EveryParameterMatchesFiniteDifferences) {
    for (auto obj : {Objective::Supervised, Objective::Unsupervised}) {
        for (auto act : {Activation::Relu, Activation::Identity}) {
            for (std::uint64_t seed : {75u, 76u, 77u}) {
                auto f = fd::make_fixture(seed, act);
                const auto rep = fd::check_model_gradient(f.model, f.batch, obj);
                EXPECT_LE(rep.max_rel, 1e-4) << to_string(obj) << " worst " << rep.worst;
                EXPECT_EQ(rep.groups, 7u * 2u + 1u + 2u * 2u);
            }
        }
    }
}

TEST(Backward, LogitGradientVanishesWhenChannelsAgree) {
    auto f = fd::make_fixture(78);
    for (auto& s : f.model.stacks) s.layer_weights = f.model.stacks[0].layer_weights;
    // every channel gets the same single whole-graph sample
    std::vector<GraphSamples> same;
    std::mt19937_64 rng(78);
    for (std::size_t i = 0; i < 4; ++i) {
        Graph g = oracle::random_graph(rng, 5, 0.5, i, 3);
        GraphSamples gs;
        for (const auto& s : f.model.stacks) gs.push_back(sample_set_from_node_ids(g, s.kind, 1, {{0, 1, 2, 3, 4}}));
        same.push_back(std::move(gs));
    }
    Batch b;
    for (auto& s : same) b.samples.push_back(&s);
    b.labels = {0, 1, 2, 0};
    const auto r = backward(f.model, b, Objective::Supervised);
    EXPECT_LE(r.grad.logits.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Backward, NonFiniteGradientNamesParameter) {
    auto f = fd::make_fixture(79);
    f.model.stacks[index_of(PatternKind::Star)].layer_weights[1](0, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
        backward(f.model, f.batch, Objective::Supervised);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("non-finite gradient at stacks["), std::string::npos) << e.what();
    }
}

TEST(Encoding, DecompositionAndSimplex) {
    auto f = fd::make_fixture(80);
    for (const auto& s : f.samples) {
        const auto e = encode(f.model, s);
        const Vector lambda = f.model.lambda();
        EXPECT_NEAR(lambda.sum(), 1.0, 1e-12);
        Vector sum = Vector::Zero(e.g.size());
        for (std::size_t m = 0; m < e.z.size(); ++m) sum += lambda(static_cast<Eigen::Index>(m)) * e.z[m];
        EXPECT_LE((sum - e.g).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Encoding, PermutationInvariantPerChannel) {
    auto f = fd::make_fixture(81);
    std::mt19937_64 rng(81);
    for (const auto& gs : f.samples) {
        for (std::size_t m = 0; m < gs.size(); ++m) {
            if (gs[m].empty()) continue;
            PatternSampleSet shuffled = gs[m];
            for (auto& s : shuffled.samples) {
                const auto perm = oracle::random_perm(rng, s.size());
                s.graph = oracle::relabel(s.graph, perm);
            }
            const Vector a = pattern_representation(gs[m], f.model.stacks[m]);
            const Vector b = pattern_representation(shuffled, f.model.stacks[m]);
            EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-10);
        }
    }
}

TEST(Train, ZeroStepLeavesLossBitIdentical) {
    auto f = fd::make_fixture(82);
    std::vector<int> labels = {0, 1, 2, 0};
    std::vector<std::size_t> idx = {0, 1, 2, 3};
    TrainConfig tc;
    tc.step = 0.0;
    tc.epochs = 3;
    tc.seed = 5;
    const auto r = train(f.samples, labels, idx, f.model.config, tc);
    EXPECT_EQ(r.history.epoch_loss[0], r.history.epoch_loss[1]);
    EXPECT_EQ(r.history.epoch_loss[1], r.history.epoch_loss[2]);
}

TEST(Train, DeterministicPerSeed) {
    auto f = fd::make_fixture(83);
    std::vector<int> labels = {0, 1, 2, 0};
    std::vector<std::size_t> idx = {0, 1, 2, 3};
    TrainConfig tc;
    tc.epochs = 5;
    tc.batch_size = 2;
    tc.seed = 9;
    tc.threads = 3;
    const auto a = train(f.samples, labels, idx, f.model.config, tc);
    tc.threads = 1;
    const auto b = train(f.samples, labels, idx, f.model.config, tc);
    EXPECT_EQ(a.model.logits, b.model.logits);
    EXPECT_EQ(a.history.epoch_loss, b.history.epoch_loss);
    for (const auto& l : a.history.lambda) {
        EXPECT_NEAR(l.sum(), 1.0, 1e-12);
        EXPECT_GT(l.minCoeff(), 0.0);
    }
}

TEST(Train, AlternateFreezesOtherGroup) {
    auto f = fd::make_fixture(84);
    std::vector<int> labels = {0, 1, 2, 0};
    std::vector<std::size_t> idx = {0, 1, 2, 3};
    TrainConfig tc;
    tc.epochs = 1;
    tc.alternate = true;
    const auto r = train(f.samples, labels, idx, f.model.config, tc);
    EXPECT_EQ(r.model.logits, Vector::Zero(7));  // epoch 0 updates encoders and classifier only
    const auto init = make_model(f.model.config, derive_seed(tc.seed, "gnn.model"));
    EXPECT_NE(r.model.stacks[0].layer_weights[0], init.stacks[0].layer_weights[0]);
}

TEST(Train, EmptyDatasetThrows) {
    std::vector<GraphSamples> none;
    ModelConfig cfg;
    cfg.input_dim = 1;
    EXPECT_THROW(train(none, {}, {}, cfg, {}), InputError);
}

TEST(Train, MutagLossDecreasesOverFirstFiveEpochs) {
    const Dataset ds = load_tudataset(PXGL_DATA_DIR "/MUTAG", "MUTAG");
    const auto labels = ds.labels();
    const auto samples = sample_dataset(ds.graphs, kAllPatternKinds, 10, 0, 500, 4);
    std::vector<std::size_t> idx(ds.graphs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    ModelConfig cfg;
    cfg.input_dim = ds.feature_dim;
    cfg.num_classes = ds.num_classes;
    TrainConfig tc;
    tc.epochs = 10;
    tc.threads = 4;
    const auto r = train(samples, labels, idx, cfg, tc);
    for (std::size_t e = 1; e < 5; ++e) EXPECT_LT(r.history.epoch_loss[e], r.history.epoch_loss[e - 1]);
}

TEST(Explain, UniformKeepsOrdinalOrder) {
    ModelConfig cfg;
    cfg.input_dim = 1;
    auto m = make_model(cfg, 0);
    const auto rows = explain(m);
    for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].kind, kAllPatternKinds[i]);
}

TEST(Explain, SaturatedLogitRanksFirst) {
    ModelConfig cfg;
    cfg.input_dim = 1;
    auto m = make_model(cfg, 0);
    m.logits = Vector::Constant(7, -30.0);
    m.logits(index_of(PatternKind::Graphlet)) = 30.0;
    const auto rows = explain(m);
    EXPECT_EQ(rows[0].kind, PatternKind::Graphlet);
    EXPECT_NEAR(rows[0].weight, 1.0, 1e-12);
}
