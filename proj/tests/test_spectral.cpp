#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "orca/spectral.hpp"
#include "test_util.hpp"

using namespace orca;

namespace {

Spectrum spectrum_with_vector(const Eigen::VectorXd& v1) {
    Spectrum s;
    s.first_eigenvector = v1;
    s.eigenvalues = Eigen::VectorXd::Ones(v1.size());
    return s;
}

struct BruteGraph {
    double density, clustering, isolated, max_degree;
};

BruteGraph brute_graph(const Eigen::MatrixXd& c, double tau) {
    const auto n = c.rows();
    auto edge = [&](Eigen::Index i, Eigen::Index j) { return i != j && std::abs(c(i, j)) > tau; };
    double edges = 0, triangles = 0, triples = 0, isolated = 0, max_degree = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double d = 0;
        for (Eigen::Index j = 0; j < n; ++j) d += edge(i, j);
        isolated += d == 0;
        max_degree = std::max(max_degree, d);
        triples += d * (d - 1) / 2;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            edges += edge(i, j);
            for (Eigen::Index k = j + 1; k < n; ++k) triangles += edge(i, j) && edge(j, k) && edge(i, k);
        }
    }
    const double pairs = static_cast<double>(n * (n - 1)) / 2.0;
    return {edges / pairs, triples > 0 ? 3 * triangles / triples : 0.0, isolated, max_degree};
}

}  // namespace

TEST(Jacobi, MatchesEigenSolverAndReconstructs) {
    SplitMix64 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(23));
        const Eigen::MatrixXd c = fixture::random_correlation(n, rng);
        const auto j = jacobi_eigen(c);
        ASSERT_TRUE(j.converged);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
        const Eigen::VectorXd ref = es.eigenvalues().reverse();
        EXPECT_LT((j.values - ref).cwiseAbs().maxCoeff(), 1e-10);
        for (Eigen::Index k = 1; k < n; ++k) EXPECT_GE(j.values(k - 1), j.values(k));
        const Eigen::MatrixXd rec = j.vectors * j.values.asDiagonal() * j.vectors.transpose();
        EXPECT_LT((rec - c).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_LT((j.vectors.transpose() * j.vectors - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Jacobi, RandomPsd5x5Reconstruction) {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd b(5, 5);
    for (Eigen::Index i = 0; i < 25; ++i) b.data()[i] = nd(gen);
    const Eigen::MatrixXd a = b * b.transpose();
    const auto s = eigendecompose(a);
    const Eigen::MatrixXd rec = s.vectors * s.raw_eigenvalues.asDiagonal() * s.vectors.transpose();
    EXPECT_LT((rec - a).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Jacobi, NonConvergenceIsReported) {
    SplitMix64 rng(1);
    const auto c = fixture::random_correlation(10, rng);
    EXPECT_FALSE(jacobi_eigen(c, {1e-12, 1}).converged);
}

TEST(Eigendecompose, Identity) {
    const auto s = eigendecompose(Eigen::MatrixXd::Identity(24, 24));
    EXPECT_LT((s.eigenvalues.array() - 1.0).abs().maxCoeff(), 1e-15);
    EXPECT_NEAR(s.first_eigenvector.norm(), 1.0, 1e-15);
    Eigen::Index arg = 0;
    s.first_eigenvector.cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(s.first_eigenvector(arg), 0.0);

    const auto f = eigen_features(s, 60);
    EXPECT_NEAR(f.at("ar1"), 1.0 / 24, 1e-15);
    EXPECT_NEAR(f.at("ar3"), 3.0 / 24, 1e-15);
    EXPECT_NEAR(f.at("entropy"), std::log(24.0), 1e-12);
    EXPECT_NEAR(f.at("eff_rank"), 24.0, 1e-10);
    EXPECT_NEAR(f.at("spectral_gap"), 1.0, 1e-15);
    EXPECT_NEAR(f.at("condition_number"), 1.0, 1e-15);
    EXPECT_NEAR(f.at("eig_std"), 0.0, 1e-15);
    // Closed form 1 - (1 + sqrt(24/60))^2, evaluated by hand: -1.66491...
    EXPECT_NEAR(f.at("mp_excess"), -1.6649111, 1e-7);
}

TEST(Eigendecompose, AllOnes) {
    const auto s = eigendecompose(Eigen::MatrixXd::Ones(24, 24));
    EXPECT_NEAR(s.eigenvalues(0), 24.0, 1e-12);
    EXPECT_LT(s.eigenvalues.tail(23).maxCoeff(), 1e-12);
    EXPECT_GE(s.eigenvalues.minCoeff(), 0.0);
    EXPECT_LT((s.first_eigenvector.array() - 1.0 / std::sqrt(24.0)).abs().maxCoeff(), 1e-12);

    const auto f = eigen_features(s, 60);
    EXPECT_NEAR(f.at("ar1"), 1.0, 1e-12);
    EXPECT_NEAR(f.at("entropy"), 0.0, 1e-12);
    EXPECT_NEAR(f.at("eff_rank"), 1.0, 1e-12);
    EXPECT_EQ(f.at("condition_number"), kRatioCap);
    EXPECT_TRUE(f.is_flagged("condition_number"));
    EXPECT_EQ(f.at("spectral_gap"), kRatioCap);

    const auto v = eigenvector_features(s);
    EXPECT_NEAR(v.at("loading_hhi"), 1.0 / 24, 1e-12);
    EXPECT_NEAR(v.at("loading_entropy"), std::log(24.0), 1e-12);
    EXPECT_NEAR(v.at("loading_dispersion"), 0.0, 1e-12);
}

TEST(EigenvectorFeatures, OneHotAndBounds) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(24);
    e(7) = 1.0;
    const auto f = eigenvector_features(spectrum_with_vector(e));
    EXPECT_EQ(f.at("loading_hhi"), 1.0);
    EXPECT_EQ(f.at("loading_entropy"), 0.0);
    EXPECT_EQ(f.at("loading_max"), 1.0);

    std::mt19937_64 gen(3);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 1000; ++trial) {
        Eigen::VectorXd v(24);
        for (auto& x : v) x = nd(gen);
        v.normalize();
        const auto g = eigenvector_features(spectrum_with_vector(v));
        EXPECT_GE(g.at("loading_hhi"), 1.0 / 24 - 1e-15);
        EXPECT_LE(g.at("loading_hhi"), 1.0);
        EXPECT_GE(g.at("loading_entropy"), 0.0);
        EXPECT_LE(g.at("loading_entropy"), std::log(24.0) + 1e-12);
    }
}

TEST(Topology, CompleteAndEmptyGraphs) {
    for (double tau : kTopologyThresholds) {
        const auto full = threshold_graph(Eigen::MatrixXd::Ones(24, 24), tau);
        EXPECT_EQ(full.edge_density, 1.0);
        EXPECT_EQ(full.clustering, 1.0);
        EXPECT_EQ(full.centralisation, 0.0);
        EXPECT_EQ(full.isolated, 0.0);
        EXPECT_EQ(full.mean_degree, 23.0);

        const auto empty = threshold_graph(Eigen::MatrixXd::Identity(24, 24), tau);
        EXPECT_EQ(empty.edge_density, 0.0);
        EXPECT_EQ(empty.clustering, 0.0);
        EXPECT_EQ(empty.isolated, 24.0);
    }
}

TEST(Topology, StarGraphCentralisationIsOne) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Identity(6, 6);
    for (Eigen::Index j = 1; j < 6; ++j) c(0, j) = c(j, 0) = 0.9;
    const auto g = threshold_graph(c, 0.5);
    EXPECT_DOUBLE_EQ(g.centralisation, 1.0);
    EXPECT_EQ(g.clustering, 0.0);
    EXPECT_EQ(g.max_degree, 5.0);
}

TEST(Topology, ClusteringMatchesTriangleEnumeration) {
    SplitMix64 rng(17);
    for (int trial = 0; trial < 300; ++trial) {
        const auto c = fixture::random_correlation(8, rng);
        for (double tau : {0.3, 0.5, 0.7}) {
            const auto g = threshold_graph(c, tau);
            const auto b = brute_graph(c, tau);
            EXPECT_DOUBLE_EQ(g.clustering, b.clustering);
            EXPECT_DOUBLE_EQ(g.edge_density, b.density);
            EXPECT_EQ(g.isolated, b.isolated);
            EXPECT_EQ(g.max_degree, b.max_degree);
        }
    }
}

TEST(Aggregate, KnownMatrix) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Identity(3, 3);
    c(0, 1) = c(1, 0) = 0.8;
    c(0, 2) = c(2, 0) = -0.6;
    c(1, 2) = c(2, 1) = 0.1;
    const auto f = aggregate_features(c);
    EXPECT_NEAR(f.at("abs_corr_mean"), 0.5, 1e-15);
    EXPECT_NEAR(f.at("abs_corr_median"), 0.6, 1e-15);
    EXPECT_EQ(f.at("abs_corr_max"), 0.8);
    EXPECT_NEAR(f.at("frac_abs_corr_gt_050"), 2.0 / 3, 1e-15);
    EXPECT_NEAR(f.at("frac_abs_corr_gt_070"), 1.0 / 3, 1e-15);
}

TEST(StaticFeatures, FamilyCountsAndDeterminism) {
    SplitMix64 rng(4);
    CorrelationSnapshot snap;
    snap.matrix = fixture::random_correlation(24, rng);
    snap.effective_t = 60;
    const auto a = static_spectral_features(snap);
    const auto b = static_spectral_features(snap);
    EXPECT_EQ(a.size(), 45u);
    EXPECT_EQ(a.names, b.names);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(eigen_features(eigendecompose(snap), 60).size(), 13u);
    EXPECT_EQ(eigenvector_features(eigendecompose(snap)).size(), 4u);
    EXPECT_EQ(topology_features(snap.matrix).size(), 21u);
    EXPECT_EQ(aggregate_features(snap.matrix).size(), 7u);
}

TEST(StaticFeatures, IdentitySnapshotsAtFloorValues) {
    CorrelationSnapshot snap;
    snap.matrix = Eigen::MatrixXd::Identity(24, 24);
    snap.effective_t = 60;
    const auto f = static_spectral_features(snap);
    EXPECT_NEAR(f.at("ar1"), 1.0 / 24, 1e-15);
    EXPECT_EQ(f.at("clustering_t30"), 0.0);
    EXPECT_EQ(f.at("edge_density_t50"), 0.0);
    EXPECT_EQ(f.at("abs_corr_mean"), 0.0);
}

namespace {

DynamicsState series_state(const std::vector<double>& q) {
    DynamicsState st;
    std::vector<double> row(key_quantities().size());
    for (double v : q) {
        std::fill(row.begin(), row.end(), v);
        st.append(row);
    }
    return st;
}

}  // namespace

TEST(Dynamics, ConstantSeries) {
    const auto st = series_state(std::vector<double>(300, 2.5));
    const auto f = dynamics_features(st, 299);
    EXPECT_EQ(f.size(), 88u);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const auto& n = f.names[i];
        if (n.find("_pct_") != std::string::npos)
            EXPECT_EQ(f.values[i], 1.0) << n;
        else
            EXPECT_EQ(f.values[i], 0.0) << n;
        EXPECT_EQ(f.flagged[i], 0) << n;
    }
}

TEST(Dynamics, LinearRamp) {
    std::vector<double> q(300);
    for (std::size_t t = 0; t < q.size(); ++t) q[t] = static_cast<double>(t);
    const auto f = dynamics_features(series_state(q), 280);
    EXPECT_EQ(f.at("lambda_1_accel"), 0.0);
    EXPECT_EQ(f.at("lambda_1_diff_5d"), 5.0);
    EXPECT_EQ(f.at("lambda_1_diff_10d"), 10.0);
    EXPECT_EQ(f.at("lambda_1_diff_20d"), 20.0);
    EXPECT_NEAR(f.at("ar1_roc_5d"), 280.0 / 275.0 - 1.0, 1e-15);
    EXPECT_EQ(f.at("ar1_pct_252d"), 1.0);
}

TEST(Dynamics, PercentileRankOracle) {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u;
    std::vector<double> q(600);
    for (auto& v : q) v = u(gen);
    const auto st = series_state(q);
    for (std::size_t t = 251; t < 600; t += 13) {
        double count = 0;
        for (std::size_t k = t + 1 - 252; k <= t; ++k) count += q[k] <= q[t];
        EXPECT_EQ(dynamics_features(st, t).at("entropy_pct_252d"), count / 252.0);
    }
    // The max and min of a trailing window.
    std::vector<double> w(252);
    for (std::size_t k = 0; k < 252; ++k) w[k] = static_cast<double>((k * 97) % 252);
    auto with_last = [&](double last) {
        auto v = w;
        v.back() = last;
        return dynamics_features(series_state(v), 251).at("eff_rank_pct_252d");
    };
    EXPECT_EQ(with_last(1000.0), 1.0);
    EXPECT_EQ(with_last(-1000.0), 1.0 / 252);
}

TEST(Dynamics, WarmupFlagsAndZeroDivisor) {
    std::vector<double> q(30, 1.0);
    q[0] = 0.0;
    const auto st = series_state(q);
    const auto early = dynamics_features(st, 3);
    EXPECT_TRUE(early.is_flagged("ar1_roc_5d"));
    EXPECT_TRUE(early.is_flagged("ar1_pct_252d"));
    EXPECT_FALSE(early.is_flagged("ar1_accel"));
    const auto f = dynamics_features(st, 5);
    EXPECT_EQ(f.at("ar1_roc_5d"), 0.0);
    EXPECT_TRUE(f.is_flagged("ar1_roc_5d"));
    EXPECT_EQ(f.at("ar1_diff_5d"), 1.0);
}

TEST(Dynamics, CausalInTime) {
    std::mt19937_64 gen(2);
    std::normal_distribution<double> nd;
    std::vector<double> q(400);
    for (auto& v : q) v = nd(gen);
    const auto full = dynamics_features(series_state(q), 300);
    q.resize(301);
    const auto truncated = dynamics_features(series_state(q), 300);
    EXPECT_EQ(full.values, truncated.values);
}
