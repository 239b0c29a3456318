#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "orca/forest.hpp"
#include "orca/metrics.hpp"
#include "orca/scaler.hpp"

using namespace orca;

namespace {

struct Dataset {
    Eigen::MatrixXd x;
    std::vector<std::uint8_t> y;
};

Dataset noise(std::size_t n, int d, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    std::bernoulli_distribution coin(0.5);
    Dataset s{Eigen::MatrixXd(static_cast<Eigen::Index>(n), d), std::vector<std::uint8_t>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) s.x(static_cast<Eigen::Index>(i), j) = nd(gen);
        s.y[i] = coin(gen) ? 1 : 0;
    }
    return s;
}

Dataset separable(std::size_t n, std::uint64_t seed, double margin) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Dataset s{Eigen::MatrixXd(static_cast<Eigen::Index>(n), 1), std::vector<std::uint8_t>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        double v;
        do v = u(gen);
        while (std::abs(v - 0.5) < margin);
        s.x(static_cast<Eigen::Index>(i), 0) = v;
        s.y[i] = v > 0.5;
    }
    return s;
}

}  // namespace

TEST(Scaler, SymmetricColumnIsUnchanged) {
    Eigen::MatrixXd x(3, 2);
    x << -1, 5, 0, 5, 1, 5;
    const auto s = fit_scaler(x);
    EXPECT_EQ(s.median(0), 0.0);
    EXPECT_EQ(s.iqr(0), 1.0);
    EXPECT_EQ(s.iqr(1), kIqrFloor);
    const auto z = apply_scaler(s, x);
    EXPECT_EQ(z.col(0), x.col(0));
    EXPECT_TRUE((z.col(1).array() == 0.0).all());
}

TEST(Scaler, ScaledTrainingHasMedianZeroIqrOne) {
    const auto d = noise(1001, 4, 3);
    Eigen::MatrixXd x = d.x;
    x.col(1) = x.col(1).array().exp() * 7.0 + 3.0;
    const auto z = apply_scaler(fit_scaler(x), x);
    const auto s2 = fit_scaler(z);
    for (int j = 0; j < 4; ++j) {
        EXPECT_NEAR(s2.median(j), 0.0, 1e-12);
        EXPECT_NEAR(s2.iqr(j), 1.0, 1e-12);
    }
}

TEST(Scaler, Errors) {
    EXPECT_THROW(fit_scaler(Eigen::MatrixXd::Zero(1, 3)), DataError);
    const auto s = fit_scaler(Eigen::MatrixXd::Random(10, 3));
    EXPECT_THROW(apply_scaler(s, Eigen::MatrixXd::Zero(2, 4)), DataError);
    const std::vector<double> row = {1.0, std::numeric_limits<double>::quiet_NaN(), 2.0};
    EXPECT_EQ(apply_scaler(s, std::span<const double>(row))[1], 0.0);
}

TEST(Gini, PureAndBalanced) {
    EXPECT_EQ(weighted_gini(3.0, 0.0), 0.0);
    EXPECT_EQ(weighted_gini(0.0, 2.0), 0.0);
    EXPECT_DOUBLE_EQ(weighted_gini(1.5, 1.5), 0.5);
}

TEST(Forest, BalancedWeights) {
    const std::vector<std::uint8_t> y = {0, 0, 0, 1};
    const std::vector<std::uint32_t> c = {1, 2, 1, 2};
    const auto w = balanced_weights(y, c);
    EXPECT_DOUBLE_EQ(w[0], 6.0 / 8.0);
    EXPECT_DOUBLE_EQ(w[1], 6.0 / 4.0);
}

TEST(Forest, HandTracedStump) {
    // x = 1..10, negatives at 1,2,3,4,6. Weighted Gini cost per cut after k rows:
    // k=3: 7*(20/49)=2.86, k=4: 6*(10/36)=1.67, k=5: 3.2, k=6: 6*(10/36)=1.67 (tie, later).
    // Best cut is after x=4, threshold 4.5; the right leaf holds 1 negative and 5 positives.
    Eigen::MatrixXd x(10, 1);
    for (int i = 0; i < 10; ++i) x(i, 0) = i + 1;
    const std::vector<std::uint8_t> y = {0, 0, 0, 0, 1, 0, 1, 1, 1, 1};
    ForestParams p;
    p.n_trees = 1;
    p.max_depth = 1;
    p.min_samples_leaf = 1;
    p.min_samples_split = 2;
    p.bootstrap = false;
    const auto m = fit_forest(x, y, 7, p);
    ASSERT_EQ(m.trees[0].nodes.size(), 3u);
    EXPECT_EQ(m.trees[0].nodes[0].feature, 0);
    EXPECT_EQ(m.trees[0].nodes[0].threshold, 4.5);
    EXPECT_EQ(m.trees[0].depth(), 1);
    const std::vector<double> a = {4.5}, b = {4.6};
    EXPECT_EQ(m.predict_proba(a), 0.0);
    EXPECT_DOUBLE_EQ(m.predict_proba(b), 5.0 / 6.0);
}

TEST(Forest, RootLeafReturnsClassBalance) {
    const auto d = noise(200, 3, 4);
    ForestParams p;
    p.n_trees = 5;
    p.max_depth = 0;
    p.bootstrap = false;
    p.balanced_subsample = false;
    const auto m = fit_forest(d.x, d.y, 1, p);
    double pos = 0;
    for (auto v : d.y) pos += v;
    const std::vector<double> row = {0.0, 0.0, 0.0};
    EXPECT_DOUBLE_EQ(m.predict_proba(row), pos / 200.0);
}

TEST(Forest, DuplicatedRowsGiveTheSameTree) {
    const auto d = noise(300, 5, 9);
    ForestParams p;
    p.min_samples_leaf = 1;
    p.min_samples_split = 2;
    p.max_depth = 5;
    const std::vector<std::uint32_t> ones(300, 1), twos(300, 2);
    SplitMix64 r1(5), r2(5), r3(5);
    const auto a = build_tree(d.x, d.y, ones, p, r1);
    const auto b = build_tree(d.x, d.y, twos, p, r2);
    Eigen::MatrixXd xx(600, 5);
    xx << d.x, d.x;
    std::vector<std::uint8_t> yy = d.y;
    yy.insert(yy.end(), d.y.begin(), d.y.end());
    const std::vector<std::uint32_t> ones600(600, 1);
    const auto c = build_tree(xx, yy, ones600, p, r3);
    ASSERT_EQ(a.nodes.size(), b.nodes.size());
    ASSERT_EQ(a.nodes.size(), c.nodes.size());
    for (std::size_t k = 0; k < a.nodes.size(); ++k) {
        EXPECT_EQ(a.nodes[k].feature, b.nodes[k].feature);
        EXPECT_EQ(a.nodes[k].threshold, b.nodes[k].threshold);
        EXPECT_DOUBLE_EQ(a.nodes[k].prob, b.nodes[k].prob);
        EXPECT_EQ(a.nodes[k].feature, c.nodes[k].feature);
        EXPECT_EQ(a.nodes[k].threshold, c.nodes[k].threshold);
        EXPECT_NEAR(a.nodes[k].prob, c.nodes[k].prob, 1e-12);
    }
}

TEST(Forest, TreeRespectsLimits) {
    const auto d = noise(2000, 6, 10);
    ForestParams p;
    p.n_trees = 10;
    const auto m = fit_forest(d.x, d.y, 3, p);
    for (const auto& t : m.trees) {
        EXPECT_LE(t.depth(), 6);
        for (const auto& n : t.nodes) {
            if (n.is_leaf()) {
                EXPECT_GE(n.samples, 30);
            } else {
                EXPECT_GE(n.samples, 60);
            }
            EXPECT_GE(n.prob, 0.0);
            EXPECT_LE(n.prob, 1.0);
        }
    }
}

TEST(Forest, SeparableDataIsRankedPerfectly) {
    const auto train = separable(1000, 1, 0.0);
    const auto test = separable(500, 2, 0.05);
    const auto m = fit_forest(train.x, train.y, 42);
    EXPECT_EQ(auc_roc(m.predict_proba(test.x), test.y), 1.0);
}

TEST(Forest, NoiseGivesChanceAuc) {
    ForestParams p;
    p.n_trees = 60;
    double mean = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto train = noise(5000, 8, 100 + seed);
        const auto test = noise(2000, 8, 900 + seed);
        const double auc = auc_roc(fit_forest(train.x, train.y, seed, p).predict_proba(test.x), test.y);
        EXPECT_GE(auc, 0.45) << seed;
        EXPECT_LE(auc, 0.55) << seed;
        mean += auc / 20;
    }
    EXPECT_NEAR(mean, 0.5, 0.02);
}

TEST(Forest, DeterministicAcrossThreadCounts) {
    const auto d = noise(800, 6, 12);
    ForestParams p;
    p.n_trees = 40;
    const auto a = fit_forest(d.x, d.y, 5, p, 1);
    const auto b = fit_forest(d.x, d.y, 5, p, 4);
    const auto c = fit_forest(d.x, d.y, 6, p, 1);
    EXPECT_EQ(a.predict_proba(d.x), b.predict_proba(d.x));
    EXPECT_NE(a.predict_proba(d.x), c.predict_proba(d.x));
    EXPECT_NE(tree_seed(0, 1), tree_seed(1, 0));
}

TEST(Forest, JsonRoundTrip) {
    const auto d = noise(500, 4, 13);
    ForestParams p;
    p.n_trees = 15;
    const auto m = fit_forest(d.x, d.y, 8, p, 1, "orca-fm1-abc");
    const auto back = forest_from_json(nlohmann::json::parse(to_json(m).dump()));
    EXPECT_EQ(back.manifest_version, "orca-fm1-abc");
    EXPECT_EQ(back.n_features, 4);
    EXPECT_EQ(back.predict_proba(d.x), m.predict_proba(d.x));
    EXPECT_THROW(forest_from_json(nlohmann::json{{"format", "other"}}), DataError);
}

TEST(Forest, Errors) {
    const auto d = noise(100, 3, 14);
    ForestParams p;
    p.n_trees = 3;
    const auto m = fit_forest(d.x, d.y, 1, p);
    const std::vector<double> wrong = {1.0, 2.0};
    EXPECT_THROW(m.predict_proba(std::span<const double>(wrong)), DataError);
    EXPECT_THROW(m.predict_proba(Eigen::MatrixXd::Zero(2, 5)), DataError);
    const std::vector<std::uint8_t> ones(100, 1);
    EXPECT_THROW(fit_forest(d.x, ones, 1, p), DataError);
}
