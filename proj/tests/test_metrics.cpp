#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "orca/metrics.hpp"

using namespace orca;

namespace {

struct Instance {
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
};

// Scores on a coarse grid so ties are common.
Instance random_instance(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<int> grid(0, 40);
    std::bernoulli_distribution coin(0.3);
    Instance in;
    do {
        in.scores.clear();
        in.labels.clear();
        for (std::size_t i = 0; i < n; ++i) {
            const bool y = coin(gen);
            in.labels.push_back(y);
            in.scores.push_back((grid(gen) + (y ? 8 : 0)) / 48.0);
        }
    } while (std::count(in.labels.begin(), in.labels.end(), 1) == 0);
    return in;
}

double pairwise_auc(const Instance& in) {
    double u2 = 0, p = 0, n = 0;
    for (std::size_t i = 0; i < in.scores.size(); ++i) {
        if (!in.labels[i]) continue;
        p += 1;
        for (std::size_t j = 0; j < in.scores.size(); ++j) {
            if (in.labels[j]) continue;
            u2 += in.scores[i] > in.scores[j] ? 2 : in.scores[i] == in.scores[j] ? 1 : 0;
        }
    }
    for (auto l : in.labels) n += !l;
    return (u2 / 2) / (p * n);
}

struct Counts {
    double tp = 0, fp = 0, fn = 0;
};

Counts at_threshold(const Instance& in, double thr) {
    Counts c;
    for (std::size_t i = 0; i < in.scores.size(); ++i) {
        const bool pred = in.scores[i] >= thr;
        if (pred && in.labels[i]) c.tp += 1;
        if (pred && !in.labels[i]) c.fp += 1;
        if (!pred && in.labels[i]) c.fn += 1;
    }
    return c;
}

double sweep_ap(const Instance& in) {
    std::set<double, std::greater<>> thresholds(in.scores.begin(), in.scores.end());
    double ap = 0, prev_recall = 0;
    for (double thr : thresholds) {
        const auto c = at_threshold(in, thr);
        const double recall = c.tp / (c.tp + c.fn);
        ap += (recall - prev_recall) * c.tp / (c.tp + c.fp);
        prev_recall = recall;
    }
    return ap;
}

BestF1 sweep_f1(const Instance& in) {
    std::set<double> thresholds(in.scores.begin(), in.scores.end());
    BestF1 best;
    best.f1 = -1;
    // Ascending sweep with strict ">" keeps the lowest threshold among ties.
    for (double thr : thresholds) {
        const auto c = at_threshold(in, thr);
        const double f1 = 2 * c.tp / (2 * c.tp + c.fp + c.fn);
        if (f1 > best.f1) {
            best.f1 = f1;
            best.raw_threshold = thr;
            best.precision = c.tp / (c.tp + c.fp);
            best.recall = c.tp / (c.tp + c.fn);
        }
    }
    best.threshold = std::min(std::max(best.raw_threshold, 0.05), 0.95);
    return best;
}

}  // namespace

TEST(Auc, TrivialCases) {
    const std::vector<std::uint8_t> y = {0, 0, 1, 1};
    EXPECT_EQ(auc_roc(std::vector<double>{0.1, 0.2, 0.3, 0.4}, y), 1.0);
    EXPECT_EQ(auc_roc(std::vector<double>{0.4, 0.3, 0.2, 0.1}, y), 0.0);
    EXPECT_EQ(auc_roc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, y), 0.5);
}

TEST(Auc, MatchesPairwiseOracle) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto in = random_instance(200, seed);
        EXPECT_EQ(auc_roc(in.scores, in.labels), pairwise_auc(in)) << seed;
    }
}

TEST(AveragePrecision, TrivialCases) {
    const std::vector<std::uint8_t> y = {0, 1, 0, 1, 0};
    EXPECT_EQ(average_precision(std::vector<double>{0.1, 0.9, 0.2, 0.8, 0.3}, y), 1.0);
    EXPECT_DOUBLE_EQ(average_precision(std::vector<double>(5, 0.4), y), 0.4);
}

TEST(AveragePrecision, MatchesThresholdSweep) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto in = random_instance(100, 1000 + seed);
        EXPECT_NEAR(average_precision(in.scores, in.labels), sweep_ap(in), 1e-12) << seed;
    }
}

TEST(BestF1, SeparableAndClipped) {
    const std::vector<std::uint8_t> y = {0, 0, 1, 1};
    const auto a = best_f1(std::vector<double>{0.3, 0.2, 0.7, 0.8}, y);
    EXPECT_EQ(a.f1, 1.0);
    EXPECT_GT(a.threshold, 0.05);
    EXPECT_LT(a.threshold, 0.95);
    const auto b = best_f1(std::vector<double>{0.98, 0.98, 0.99, 0.99}, y);
    EXPECT_EQ(b.f1, 1.0);
    EXPECT_EQ(b.threshold, 0.95);
    EXPECT_EQ(b.raw_threshold, 0.99);
    EXPECT_EQ(b.precision, 1.0);
    const auto c = best_f1(std::vector<double>{0.001, 0.002, 0.01, 0.02}, y);
    EXPECT_EQ(c.threshold, 0.05);
    EXPECT_EQ(c.f1, 1.0);
}

TEST(BestF1, MatchesExhaustiveSweep) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto in = random_instance(150, 5000 + seed);
        const auto got = best_f1(in.scores, in.labels);
        const auto ref = sweep_f1(in);
        EXPECT_EQ(got.f1, ref.f1) << seed;
        EXPECT_EQ(got.raw_threshold, ref.raw_threshold) << seed;
        EXPECT_EQ(got.threshold, ref.threshold) << seed;
        EXPECT_EQ(got.precision, ref.precision) << seed;
        EXPECT_EQ(got.recall, ref.recall) << seed;
    }
}

TEST(Metrics, MonotoneTransformInvariance) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto in = random_instance(120, 7000 + seed);
        const double auc = auc_roc(in.scores, in.labels);
        const double ap = average_precision(in.scores, in.labels);
        const double f1 = best_f1(in.scores, in.labels).f1;
        for (auto& s : in.scores) s = std::exp(3.0 * s) - 7.0;
        EXPECT_EQ(auc_roc(in.scores, in.labels), auc);
        EXPECT_EQ(average_precision(in.scores, in.labels), ap);
        EXPECT_EQ(best_f1(in.scores, in.labels).f1, f1);
    }
}

TEST(Metrics, SingleClassIsUndefined) {
    const std::vector<double> s = {0.1, 0.2, 0.3};
    const std::vector<std::uint8_t> zeros = {0, 0, 0}, ones = {1, 1, 1};
    EXPECT_THROW(auc_roc(s, zeros), UndefinedMetric);
    EXPECT_THROW(average_precision(s, ones), UndefinedMetric);
    EXPECT_THROW(best_f1(s, zeros), UndefinedMetric);
    const std::vector<std::uint8_t> short_labels = {0, 1};
    EXPECT_THROW(auc_roc(s, short_labels), DataError);
}

TEST(Bcd, GeometricMean) {
    EXPECT_NEAR(bcd_auc(0.772, 0.711), 0.741, 0.0005);
    EXPECT_NEAR(bcd_auc(0.736, 0.608), 0.669, 0.0005);
    EXPECT_NEAR(bcd_auc(0.620, 0.666), 0.643, 0.0005);
    EXPECT_EQ(bcd_auc(0.5, 0.5), 0.5);
    EXPECT_THROW(bcd_auc(-0.1, 0.5), UndefinedMetric);
}
