#include "fd_helpers.hpp"

#include "pxgl/eval.hpp"

#include <gtest/gtest.h>

using namespace pxgl;

namespace {

// Best matched fraction over every injective relabelling of pred clusters.
double acc_brute(const std::vector<int>& pred, const std::vector<int>& truth) {
    const int k = std::max(*std::max_element(pred.begin(), pred.end()), *std::max_element(truth.begin(), truth.end())) + 1;
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    double best = 0.0;
    do {
        std::size_t hit = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) hit += perm[static_cast<std::size_t>(pred[i])] == truth[i];
        best = std::max(best, static_cast<double>(hit) / static_cast<double>(pred.size()));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

std::vector<int> random_partition(std::mt19937_64& rng, std::size_t n, int k) {
    std::vector<int> out(n);
    for (auto& x : out) x = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
    return out;
}

}  // namespace

TEST(Kmeans, SeparatedBlobs) {
    Matrix p(4, 2);
    p << 0, 0, 0.1, 0, 10, 10, 10, 10.1;
    const auto r = kmeans(p, 2, 1);
    EXPECT_EQ(r.assignments[0], r.assignments[1]);
    EXPECT_EQ(r.assignments[2], r.assignments[3]);
    EXPECT_NE(r.assignments[0], r.assignments[2]);
    EXPECT_FALSE(r.degenerate);
}

TEST(Kmeans, SingleClusterAndSingletons) {
    std::mt19937_64 rng(110);
    Matrix p = Matrix::Random(9, 3);
    const auto one = kmeans(p, 1, 2);
    for (int a : one.assignments) EXPECT_EQ(a, 0);
    EXPECT_TRUE(one.centroids.row(0).isApprox(p.colwise().mean(), 1e-12));
    EXPECT_NEAR(kmeans(p, 9, 3).inertia, 0.0, 1e-20);
}

TEST(Kmeans, LloydInertiaNonIncreasingAndDeterministic) {
    std::mt19937_64 rng(111);
    for (int t = 0; t < 10; ++t) {
        Matrix p = Matrix::Random(40, 2);
        const auto r = kmeans(p, 3, t);
        for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
            EXPECT_LE(r.inertia_history[i], r.inertia_history[i - 1] + 1e-12);
        for (int a : r.assignments) EXPECT_LT(a, 3);
        EXPECT_EQ(kmeans(p, 3, t, 10, 3).assignments, r.assignments);
    }
}

TEST(Kmeans, DuplicatePointsFlagged) {
    Matrix p = Matrix::Ones(5, 2);
    p.row(4) << 3, 3;
    const auto r = kmeans(p, 3, 0);
    EXPECT_TRUE(r.degenerate);
    EXPECT_THROW(kmeans(p, 6, 0), InputError);
}

TEST(ClusteringAccuracy, Examples) {
    const std::vector<int> t = {0, 1, 0, 1};
    EXPECT_EQ(clustering_accuracy(t, t), 1.0);
    EXPECT_EQ(clustering_accuracy(std::vector<int>{1, 0, 1, 0}, t), 1.0);
    EXPECT_EQ(clustering_accuracy(std::vector<int>{0, 0, 1, 1}, t), 0.5);
    EXPECT_THROW(clustering_accuracy(std::vector<int>{0}, t), InputError);
}

TEST(ClusteringAccuracy, MatchesBruteForceAndIsPermutationInvariant) {
    std::mt19937_64 rng(112);
    for (int trial = 0; trial < 300; ++trial) {
        const int k = 1 + static_cast<int>(rng() % 5);
        const std::size_t n = 1 + rng() % 30;
        auto pred = random_partition(rng, n, k), truth = random_partition(rng, n, k);
        const double acc = clustering_accuracy(pred, truth);
        EXPECT_NEAR(acc, acc_brute(pred, truth), 1e-15);
        std::vector<int> perm(static_cast<std::size_t>(k));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (auto& x : pred) x = perm[static_cast<std::size_t>(x)];
        EXPECT_EQ(clustering_accuracy(pred, truth), acc);
    }
}

TEST(Nmi, Examples) {
    const std::vector<int> t = {0, 1, 0, 1};
    EXPECT_NEAR(nmi(t, t), 1.0, 1e-15);
    EXPECT_EQ(nmi(std::vector<int>{0, 0, 0, 0}, t), 0.0);
    EXPECT_NEAR(nmi(std::vector<int>{0, 0, 1, 1}, t), 0.0, 1e-15);
    EXPECT_THROW(nmi(std::vector<int>{0}, t), InputError);
}

TEST(Nmi, SymmetricAndBounded) {
    std::mt19937_64 rng(113);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng() % 40;
        auto a = random_partition(rng, n, 1 + static_cast<int>(rng() % 5));
        auto b = random_partition(rng, n, 1 + static_cast<int>(rng() % 5));
        const double x = nmi(a, b);
        EXPECT_NEAR(x, nmi(b, a), 1e-12);
        EXPECT_GE(x, 0.0);
        EXPECT_LE(x, 1.0);
    }
}

TEST(ClassificationAccuracy, ZeroClassifierPredictsClassZero) {
    auto f = fd::make_fixture(114, Activation::Relu, 2);
    for (auto& l : f.model.classifier.layers) {
        l.weight.setZero();
        l.bias.setZero();
    }
    const std::vector<int> labels = {0, 1, 0, 1};
    const std::vector<std::size_t> idx = {0, 1, 2, 3};
    EXPECT_EQ(classification_accuracy(f.model, f.samples, labels, idx), 0.5);
}

TEST(ClassificationAccuracy, MemorisedToySetScoresOne) {
    auto f = fd::make_fixture(115, Activation::Relu, 2);
    const std::vector<int> labels = {0, 1, 1, 0};
    const std::vector<std::size_t> idx = {0, 1, 2, 3};
    ModelConfig mc = f.model.config;
    mc.hidden_dim = mc.out_dim = mc.classifier_hidden = 16;
    TrainConfig tc;
    tc.epochs = 3000;
    tc.step = 0.05;
    const auto r = train(f.samples, labels, idx, mc, tc);
    ASSERT_LT(r.history.epoch_loss.back(), 1e-4);
    EXPECT_EQ(classification_accuracy(r.model, f.samples, labels, idx), 1.0);
}
