#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "orca/synthetic.hpp"
#include "orca/walk_forward.hpp"

using namespace orca;

namespace {

// Hand-built feature matrix over a synthetic panel: one traditional noise
// column and two spectral columns, one of which carries the spike state.
struct Fixture {
    SyntheticPanel syn;
    FeatureMatrix features;
    TargetSet targets;
    std::vector<FoldSpec> folds;
};

const Fixture& fixture() {
    static const Fixture fx = [] {
        Fixture f;
        f.syn = generate_synthetic({.symbols = {"SPY", "QQQ", "GLD", "IEF"}, .days = 1800, .seed = 4});
        const auto panel = PricePanel::from_prices(f.syn.table.dates, f.syn.table.symbols, f.syn.table.prices);
        f.targets = make_targets(panel, "SPY");
        const std::size_t first = 100, end = panel.size() - 10;
        std::mt19937_64 gen(1);
        std::normal_distribution<double> nd;
        f.features.values.resize(static_cast<Eigen::Index>(end - first), 3);
        for (std::size_t t = first; t < end; ++t) {
            const auto k = static_cast<Eigen::Index>(t - first);
            f.features.dates.push_back(panel.dates()[t]);
            f.features.rows.push_back(t);
            f.features.values(k, 0) = nd(gen);
            f.features.values(k, 1) = f.syn.in_spike[t] + 0.3 * nd(gen);
            f.features.values(k, 2) = nd(gen);
        }
        f.features.manifest.entries = {{"noise", FeatureFamily::Traditional, "index"},
                                       {"roll60.spike", FeatureFamily::Eigen, "roll60"},
                                       {"roll60.other", FeatureFamily::Topology, "roll60"}};
        f.features.manifest.seal();
        FoldOptions o;
        o.train_days = 600;
        o.test_days = 200;
        o.n_folds = 4;
        f.folds = make_folds(first, end - 1, o).folds;
        return f;
    }();
    return fx;
}

WalkForwardOptions quick() {
    WalkForwardOptions o;
    o.forest.n_trees = 40;
    return o;
}

}  // namespace

TEST(WalkForward, AuditsAreClean) {
    const auto& fx = fixture();
    ASSERT_EQ(fx.folds.size(), 4u);
    const auto r = run_walk_forward(fx.features, fx.targets, fx.folds, FeatureSubset::Combined, quick());
    ASSERT_EQ(r.audits.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k) {
        const auto& a = r.audits[k];
        EXPECT_TRUE(a.clean());
        EXPECT_EQ(a.train_rows_read, 600u);
        EXPECT_EQ(a.max_train_row, fx.folds[k].train_end);
        EXPECT_EQ(a.max_train_label_row, fx.folds[k].train_end + 10);
        EXPECT_LT(a.max_train_label_row, fx.folds[k].test_start);
    }
    ASSERT_EQ(r.crash.size(), 800u);
    EXPECT_EQ(r.crash.rows.front(), fx.folds.front().test_start);
    EXPECT_EQ(r.crash.rows.back(), fx.folds.back().test_end);
    for (std::size_t i = 0; i < r.crash.size(); ++i) EXPECT_EQ(r.crash.label[i], fx.targets.crash[r.crash.rows[i]]);
}

TEST(WalkForward, SignalColumnCarriesCrashSkill) {
    const auto& fx = fixture();
    const auto all = run_ablations(fx.features, fx.targets, fx.folds, quick());
    ASSERT_EQ(all.size(), 3u);
    EXPECT_EQ(all[0].n_features, 1u);
    EXPECT_EQ(all[1].n_features, 2u);
    EXPECT_EQ(all[2].n_features, 3u);
    ASSERT_TRUE(all[1].metrics.crash.defined);
    EXPECT_GT(all[1].metrics.crash.auc_roc, all[0].metrics.crash.auc_roc + 0.1);
    EXPECT_GT(all[1].metrics.crash.auc_roc, 0.7);
    // Same rows, dates and labels across ablations; only the probabilities move.
    EXPECT_EQ(all[0].crash.rows, all[2].crash.rows);
    EXPECT_EQ(all[0].crash.label, all[2].crash.label);
    EXPECT_EQ(all[0].rally.label, all[1].rally.label);
}

TEST(WalkForward, PooledAndPerFoldMetrics) {
    const auto& fx = fixture();
    const auto r = run_walk_forward(fx.features, fx.targets, fx.folds, FeatureSubset::Spectral, quick());
    EXPECT_DOUBLE_EQ(r.metrics.bcd_auc, std::sqrt(r.metrics.rally.auc_roc * r.metrics.crash.auc_roc));
    EXPECT_EQ(r.metrics.folds.size(), 4u);
    double sum = 0;
    int n = 0;
    for (const auto& f : r.metrics.folds)
        if (f.crash.defined) {
            sum += f.crash.auc_roc;
            ++n;
        }
    EXPECT_EQ(static_cast<std::size_t>(n) + r.metrics.excluded_crash.size(), 4u);
    if (n > 0) {
        EXPECT_DOUBLE_EQ(r.metrics.mean_fold_auc_crash, sum / n);
    }
}

TEST(WalkForward, DeterministicForSeed) {
    const auto& fx = fixture();
    auto o = quick();
    const auto a = run_walk_forward(fx.features, fx.targets, fx.folds, FeatureSubset::Combined, o);
    o.jobs = 3;
    const auto b = run_walk_forward(fx.features, fx.targets, fx.folds, FeatureSubset::Combined, o);
    EXPECT_EQ(a.crash.prob, b.crash.prob);
    EXPECT_EQ(a.rally.prob, b.rally.prob);
    o.seed = 43;
    const auto c = run_walk_forward(fx.features, fx.targets, fx.folds, FeatureSubset::Combined, o);
    EXPECT_NE(a.crash.prob, c.crash.prob);
    EXPECT_NE(fold_seed(42, 0, Task::Crash), fold_seed(42, 1, Task::Rally));
    EXPECT_NE(fold_seed(42, 0, Task::Crash), fold_seed(42, 0, Task::Rally));
}

TEST(WalkForward, LeakyFoldsAreRejected) {
    const auto& fx = fixture();
    auto folds = fx.folds;
    folds[2].train_end = folds[2].test_start - 5;
    EXPECT_THROW(run_walk_forward(fx.features, fx.targets, folds, FeatureSubset::Combined, quick()), LeakageError);

    // The guarded accessor enforces the same rule on its own.
    detail::GuardedRows guard(fx.features, fx.targets, folds[2]);
    Eigen::MatrixXd x;
    std::vector<std::uint8_t> r, c;
    EXPECT_THROW(guard.train(x, r, c), LeakageError);
}

TEST(WalkForward, SingleClassTrainingNamesTheFold) {
    const auto& fx = fixture();
    auto targets = fx.targets;
    for (std::size_t t = fx.folds[0].train_start; t <= fx.folds[0].train_end; ++t) targets.crash[t] = 0;
    try {
        run_walk_forward(fx.features, targets, fx.folds, FeatureSubset::Combined, quick());
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("fold 0 (crash)"), std::string::npos) << e.what();
    }
}

TEST(WalkForward, PredictionsCsvRoundTrip) {
    const auto& fx = fixture();
    const auto r = run_walk_forward(fx.features, fx.targets, fx.folds, FeatureSubset::Traditional, quick());
    std::stringstream ss;
    write_predictions_csv(ss, {&r.rally, &r.crash}, {"stamp"});
    const auto back = read_predictions_csv(ss);
    EXPECT_EQ(back.crash.prob, r.crash.prob);
    EXPECT_EQ(back.rally.label, r.rally.label);
    EXPECT_EQ(back.crash.fold, r.crash.fold);
    EXPECT_EQ(back.rally.dates, r.rally.dates);
    std::istringstream bad("date,task\n");
    EXPECT_THROW(read_predictions_csv(bad), DataError);
}
