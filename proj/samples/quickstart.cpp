// Builds a synthetic panel, computes features, runs the three ablations on
// eight walk-forward folds and backtests the combined signal.
//
//   ./quickstart [generator_seed]

#include <cstdlib>
#include <iostream>

#include "orca/orca.hpp"

int main(int argc, char** argv) {
    orca::SyntheticOptions so;
    if (argc > 1) so.seed = std::strtoull(argv[1], nullptr, 10);
    const auto panel = orca::synthetic_panel(so);

    const auto targets = orca::make_targets(panel, "SPY");
    const auto fm = orca::build_features(panel, {}, panel.size() - static_cast<std::size_t>(targets.horizon));
    std::cout << fm.size() << " feature rows, " << fm.values.cols() << " columns, manifest " << fm.manifest.version << "\n";

    const auto layout = orca::make_folds(fm.rows.front(), fm.rows.back());
    for (const auto& r : orca::run_ablations(fm, targets, layout.folds))
        std::cout << orca::subset_name(r.subset) << ": rally AUC " << r.metrics.rally.auc_roc << ", crash AUC "
                  << r.metrics.crash.auc_roc << ", BCD " << r.metrics.bcd_auc << "\n";

    const auto combined = orca::run_walk_forward(fm, targets, layout.folds, orca::FeatureSubset::Combined);
    const auto ranks = orca::make_signal_ranks(combined.rally.dates, combined.rally.prob, combined.crash.prob);
    const auto mkt = orca::market_returns(panel, ranks.dates, "SPY");
    const auto ens = orca::ensemble_wfo(ranks, mkt);
    const auto bench = orca::buy_and_hold(mkt);
    const auto bench_r = bench.net_returns();
    const auto b = orca::performance_stats(std::span<const double>(bench_r).subspan(ens.split_index));
    std::cout << "out-of-sample from " << ens.ledger.rows[ens.split_index].date << ": Sharpe "
              << ens.out_of_sample.sharpe << " (buy-and-hold " << b.sharpe << "), MaxDD " << ens.out_of_sample.max_drawdown
              << " (buy-and-hold " << b.max_drawdown << ")\n";
}
