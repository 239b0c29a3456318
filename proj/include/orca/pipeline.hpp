#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "orca/config.hpp"
#include "orca/errors.hpp"
#include "orca/features.hpp"
#include "orca/hash.hpp"
#include "orca/labeling.hpp"
#include "orca/market_data.hpp"
#include "orca/strategy.hpp"
#include "orca/walk_forward.hpp"

// Subcommand bodies. Each reads its inputs from the configured output
// directory, writes its artifacts there, and stamps every artifact with the
// config hash and seed. Nothing time-dependent is written, so equal configs
// give byte-identical artifacts.

namespace orca::pipeline {

namespace fs = std::filesystem;

struct Context {
    RunConfig config;
    fs::path config_dir = ".";  // relative data paths resolve against this
    std::ostream* log = &std::cerr;

    fs::path out_dir() const {
        fs::path p(config.output_dir);
        return p.is_absolute() ? p : config_dir / p;
    }
    fs::path data_path() const {
        if (config.data_path.empty()) throw ConfigError("config.data_path is not set");
        fs::path p(config.data_path);
        return p.is_absolute() ? p : config_dir / p;
    }
    std::string stamp() const { return "orca config_hash=" + config.hash() + " seed=" + std::to_string(config.seed); }
};

inline std::string file_hash(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return hex64(fnv1a64(ss.str()));
}

inline void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

inline std::string read_text(const fs::path& path, const std::string& hint = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("missing " + path.string() + (hint.empty() ? "" : " (" + hint + ")"));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline PricePanel load_configured_panel(const Context& ctx) {
    const auto path = ctx.data_path();
    try {
        return load_panel(path.string(), ctx.config.universe, ctx.config.cleaning);
    } catch (const Error& e) {
        if (dynamic_cast<const ConfigError*>(&e)) throw ConfigError(path.string() + ": " + e.what());
        throw;
    }
}

inline fs::path features_path(const Context& ctx, FeatureSubset s) {
    return ctx.out_dir() / (std::string("features_") + subset_name(s) + ".csv");
}
inline fs::path manifest_path(const Context& ctx, FeatureSubset s) {
    return ctx.out_dir() / (std::string("features_") + subset_name(s) + ".manifest.csv");
}
inline fs::path predictions_path(const Context& ctx, FeatureSubset s) {
    return ctx.out_dir() / (std::string("predictions_") + subset_name(s) + ".csv");
}

// Inputs that determine the feature matrix; a cache key over them decides
// whether `features` can skip recomputation.
inline std::string features_key(const Context& ctx, FeatureSubset subset) {
    const auto& c = ctx.config;
    nlohmann::json j = {{"data", file_hash(ctx.data_path())},
                        {"universe", c.universe},
                        {"index_symbol", c.index_symbol},
                        {"cleaning", c.to_json()["cleaning"]},
                        {"correlation", c.to_json()["correlation"]},
                        {"horizon", c.targets.horizon},
                        {"subset", subset_name(subset)}};
    return hex64(fnv1a64(j.dump()));
}

struct FeaturesOutcome {
    bool cache_hit = false;
    std::size_t rows = 0;
    std::size_t columns = 0;
    fs::path path;
};

/// Feature rows cover panel rows [warm-up, T - horizon): every row written
/// has a label.
inline FeaturesOutcome cmd_features(const Context& ctx) {
    const auto subset = ctx.config.subset;
    FeaturesOutcome out;
    out.path = features_path(ctx, subset);
    const std::string key = features_key(ctx, subset);
    const std::string key_line = "# features_key=" + key;
    {
        std::ifstream existing(out.path);
        std::string line;
        bool hit = false, stamped = false;
        while (existing && std::getline(existing, line) && !line.empty() && line[0] == '#') {
            hit = hit || line == key_line;
            stamped = stamped || line == "# " + ctx.stamp();
        }
        if (hit && stamped && fs::exists(manifest_path(ctx, subset))) {
            out.cache_hit = true;
            *ctx.log << "features: cache hit " << out.path.string() << '\n';
            return out;
        }
    }
    const PricePanel panel = load_configured_panel(ctx);
    const auto h = static_cast<std::size_t>(ctx.config.targets.horizon);
    if (panel.size() <= h) throw InsufficientHistory("panel shorter than the label horizon");
    const FeatureMatrix full = build_features(panel, ctx.config.feature_options(), panel.size() - h);
    const FeatureMatrix fm = subset == FeatureSubset::Combined ? full : full.select(subset);

    std::ostringstream csv;
    write_features_csv(csv, fm, {ctx.stamp(), key_line.substr(2), "manifest=" + fm.manifest.version});
    std::ostringstream man;
    man << "# " << ctx.stamp() << '\n';
    fm.manifest.write(man);
    write_text(out.path, csv.str());
    write_text(manifest_path(ctx, subset), man.str());
    out.rows = fm.size();
    out.columns = static_cast<std::size_t>(fm.values.cols());
    std::size_t flagged = 0;
    for (auto f : fm.flagged_per_column) flagged += f;
    *ctx.log << "features: " << out.rows << " rows x " << out.columns << " columns (" << flagged
             << " flagged cells) -> " << out.path.string() << '\n';
    return out;
}

inline FeatureMatrix load_features(const Context& ctx, FeatureSubset subset) {
    const std::string hint = "run `features` first";
    std::istringstream man(read_text(manifest_path(ctx, subset), hint));
    const FeatureManifest manifest = FeatureManifest::read(man);
    std::istringstream csv(read_text(features_path(ctx, subset), hint));
    return read_features_csv(csv, manifest);
}

inline nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json task_json(const TaskMetrics& m) {
    return {{"defined", m.defined},
            {"auc_roc", num(m.auc_roc)},
            {"average_precision", num(m.average_precision)},
            {"best_f1",
             {{"threshold", m.best_f1.threshold},
              {"raw_threshold", m.best_f1.raw_threshold},
              {"precision", m.best_f1.precision},
              {"recall", m.best_f1.recall},
              {"f1", m.best_f1.f1}}},
            {"n", m.n},
            {"positives", m.positives}};
}

struct EvaluateOutcome {
    std::vector<WalkForwardResult> ablations;
    FoldLayout layout;
    nlohmann::json metrics;
};

inline EvaluateOutcome cmd_evaluate(const Context& ctx) {
    const FeatureMatrix fm = load_features(ctx, FeatureSubset::Combined);
    const PricePanel panel = load_configured_panel(ctx);
    if (fm.rows.empty() || fm.rows.back() >= panel.size() || panel.dates()[fm.rows.back()] != fm.dates.back())
        throw DataError("features do not match the configured panel; rerun `features`");
    const TargetSet targets = make_targets(panel, ctx.config.index_symbol, ctx.config.targets);
    for (const auto& w : targets.base_rate_warnings()) *ctx.log << "warning: " << w << '\n';

    EvaluateOutcome out;
    out.layout = make_folds(fm.rows.front(), fm.rows.back(), ctx.config.folds);
    for (const auto& w : out.layout.warnings) *ctx.log << "warning: " << w << '\n';
    WalkForwardOptions wf;
    wf.forest = ctx.config.forest;
    wf.seed = ctx.config.seed;
    wf.jobs = ctx.config.jobs;
    out.ablations = run_ablations(fm, targets, out.layout.folds, wf);

    nlohmann::json j;
    j["config_hash"] = ctx.config.hash();
    j["seed"] = ctx.config.seed;
    j["manifest_version"] = fm.manifest.version;
    j["fold_warnings"] = out.layout.warnings;
    j["base_rates"] = {{"rally", targets.base_rate(targets.rally)}, {"crash", targets.base_rate(targets.crash)}};
    for (const auto& f : out.layout.folds)
        j["folds"].push_back({{"id", f.id},
                              {"train_start", panel.dates()[f.train_start]},
                              {"train_end", panel.dates()[f.train_end]},
                              {"test_start", panel.dates()[f.test_start]},
                              {"test_end", panel.dates()[f.test_end]},
                              {"train_rows", f.train_size()},
                              {"test_rows", f.test_size()}});
    j["fold_count"] = out.layout.folds.size();
    for (const auto& r : out.ablations) {
        bool clean = true;
        for (const auto& a : r.audits) clean = clean && a.clean();
        nlohmann::json a;
        a["subset"] = subset_name(r.subset);
        a["n_features"] = r.n_features;
        a["rally"] = task_json(r.metrics.rally);
        a["crash"] = task_json(r.metrics.crash);
        a["bcd_auc"] = num(r.metrics.bcd_auc);
        a["mean_fold_auc_rally"] = num(r.metrics.mean_fold_auc_rally);
        a["mean_fold_auc_crash"] = num(r.metrics.mean_fold_auc_crash);
        a["excluded_folds_rally"] = r.metrics.excluded_rally;
        a["excluded_folds_crash"] = r.metrics.excluded_crash;
        a["leakage_audit_clean"] = clean;
        for (const auto& f : r.metrics.folds)
            a["per_fold"].push_back({{"fold", f.fold}, {"rally", task_json(f.rally)}, {"crash", task_json(f.crash)}});
        j["ablations"].push_back(a);

        std::ostringstream csv;
        write_predictions_csv(csv, {&r.rally, &r.crash}, {ctx.stamp(), std::string("subset=") + subset_name(r.subset)});
        write_text(predictions_path(ctx, r.subset), csv.str());
        *ctx.log << "evaluate: " << subset_name(r.subset) << " rally AUC " << r.metrics.rally.auc_roc << " crash AUC "
                 << r.metrics.crash.auc_roc << " BCD " << r.metrics.bcd_auc << '\n';
    }
    out.metrics = j;
    write_text(ctx.out_dir() / "metrics.json", j.dump(2) + "\n");
    return out;
}

inline nlohmann::json perf_json(const PerformanceStats& s) {
    return {{"sharpe", num(s.sharpe)},
            {"cagr", num(s.cagr)},
            {"max_drawdown", num(s.max_drawdown)},
            {"calmar", std::isinf(s.calmar) ? nlohmann::json("+inf") : num(s.calmar)},
            {"days", s.days}};
}

inline nlohmann::json params_json(const ExposureParams& p) {
    return {{"rally_entry", p.rally_entry}, {"rally_exit", p.rally_exit},       {"crash_exit", p.crash_exit},
            {"crash_caution", p.crash_caution}, {"base", p.base},             {"max_leverage", p.max_leverage},
            {"hold_days", p.hold_days},     {"bounce", p.bounce}};
}

struct BacktestOutcome {
    EnsembleResult ensemble;
    BacktestLedger benchmark;
    nlohmann::json report;
};

inline BacktestOutcome cmd_backtest(const Context& ctx) {
    const auto subset = ctx.config.subset;
    std::istringstream pin(read_text(predictions_path(ctx, subset), "run `evaluate` first"));
    const PredictionPair preds = read_predictions_csv(pin);
    const PricePanel panel = load_configured_panel(ctx);
    const SignalRanks ranks = make_signal_ranks(preds.rally.dates, preds.rally.prob, preds.crash.prob, ctx.config.rank_window);
    if (ranks.size() == 0) throw InsufficientHistory("fewer predictions than the rank window");
    const MarketReturns mkt = market_returns(panel, ranks.dates, ctx.config.index_symbol);

    BacktestOutcome out;
    EnsembleOptions eo = ctx.config.ensemble;
    eo.jobs = ctx.config.jobs;
    out.ensemble = ensemble_wfo(ranks, mkt, ctx.config.grid.enumerate(ctx.config.exposure), eo);
    out.benchmark = buy_and_hold(mkt);
    const auto& e = out.ensemble;
    for (const auto& w : e.warnings) *ctx.log << "warning: " << w << '\n';

    const auto bench = out.benchmark.net_returns();
    const std::span<const double> b(bench);
    auto stats_or_null = [&](std::span<const double> r) {
        try {
            return perf_json(performance_stats(r, eo.costs.risk_free_annual));
        } catch (const UndefinedMetric&) {
            return nlohmann::json(nullptr);
        }
    };

    nlohmann::json j;
    j["config_hash"] = ctx.config.hash();
    j["seed"] = ctx.config.seed;
    j["subset"] = subset_name(subset);
    j["combos_evaluated"] = e.combos_evaluated;
    j["signal_days"] = e.ledger.size();
    j["oos_start"] = e.ledger.rows[e.split_index].date;
    j["in_sample_end"] = e.ledger.rows[e.split_index - 1].date;
    j["warnings"] = e.warnings;
    for (const auto& t : e.top)
        j["top"].push_back({{"grid_index", t.index}, {"in_sample_sharpe", num(t.in_sample_sharpe)}, {"params", params_json(t.params)}});
    j["strategy"] = {{"in_sample", perf_json(e.in_sample)}, {"out_of_sample", perf_json(e.out_of_sample)}, {"full", perf_json(e.full)}};
    j["benchmark"] = {{"in_sample", stats_or_null(b.first(e.split_index))},
                      {"out_of_sample", stats_or_null(b.subspan(e.split_index))},
                      {"full", stats_or_null(b)}};
    j["diagnostics"] = {{"annualised_return_rally_rank_ge_0_90", num(conditional_annual_return(ranks, mkt, 0.90))}};
    for (const auto& r : e.ledger.rows) j["regimes"].push_back({r.date, regime_name(r.regime), r.exposure});
    out.report = j;

    std::ostringstream led, bl;
    write_ledger_csv(led, e.ledger, {ctx.stamp(), "ensemble ledger; out-of-sample from " + e.ledger.rows[e.split_index].date});
    write_ledger_csv(bl, out.benchmark, {ctx.stamp(), "buy-and-hold " + ctx.config.index_symbol});
    write_text(ctx.out_dir() / "ledger.csv", led.str());
    write_text(ctx.out_dir() / "benchmark_ledger.csv", bl.str());
    write_text(ctx.out_dir() / "strategy.json", j.dump(2) + "\n");
    *ctx.log << "backtest: " << e.combos_evaluated << " combinations, OOS from " << e.ledger.rows[e.split_index].date
             << ", OOS Sharpe " << e.out_of_sample.sharpe << '\n';
    return out;
}

namespace detail {

inline std::string fmt(const nlohmann::json& v, int digits = 3, bool pct = false) {
    if (v.is_string()) return v.get<std::string>();
    if (!v.is_number()) return "n/a";
    std::ostringstream s;
    s << std::fixed << std::setprecision(pct ? digits - 2 : digits) << (pct ? 100.0 * v.get<double>() : v.get<double>());
    if (pct) s << '%';
    return s.str();
}

inline const nlohmann::json* find_path(const nlohmann::json& j, const std::vector<std::string>& path) {
    const nlohmann::json* cur = &j;
    for (const auto& k : path) {
        if (!cur->is_object() || !cur->contains(k)) return nullptr;
        cur = &(*cur)[k];
    }
    return cur;
}

}  // namespace detail

/// Markdown report: classification table, ablation deltas, backtest table,
/// and divergence notes against `reference_results` when present.
inline std::string cmd_report(const Context& ctx) {
    const auto metrics = nlohmann::json::parse(read_text(ctx.out_dir() / "metrics.json", "run `evaluate` first"));
    const auto strategy = nlohmann::json::parse(read_text(ctx.out_dir() / "strategy.json", "run `backtest` first"));
    const auto& ref = ctx.config.reference_results;
    using detail::fmt;

    std::ostringstream md;
    md << "<!-- " << ctx.stamp() << " -->\n";
    md << "# ORCA run report\n\n";
    md << "Manifest `" << metrics.value("manifest_version", "") << "`, " << metrics.value("fold_count", 0)
       << " walk-forward folds, seed " << ctx.config.seed << ".\n\n";
    if (!metrics["fold_warnings"].empty())
        for (const auto& w : metrics["fold_warnings"]) md << "> warning: " << w.get<std::string>() << "\n";

    md << "## Out-of-sample classification (pooled over folds)\n\n";
    md << "| Features | AUC rally | AUC crash | BCD-AUC | AP rally | AP crash | mean fold AUC rally | mean fold AUC crash |\n";
    md << "|---|---|---|---|---|---|---|---|\n";
    nlohmann::json by_subset;
    for (const auto& a : metrics["ablations"]) {
        by_subset[a["subset"].get<std::string>()] = a;
        md << "| " << a["subset"].get<std::string>() << " (" << a["n_features"] << ") | " << fmt(a["rally"]["auc_roc"]) << " | "
           << fmt(a["crash"]["auc_roc"]) << " | " << fmt(a["bcd_auc"]) << " | " << fmt(a["rally"]["average_precision"])
           << " | " << fmt(a["crash"]["average_precision"]) << " | " << fmt(a["mean_fold_auc_rally"]) << " | "
           << fmt(a["mean_fold_auc_crash"]) << " |\n";
    }
    md << "\n";
    for (const auto& a : metrics["ablations"]) {
        if (!a["excluded_folds_crash"].empty() || !a["excluded_folds_rally"].empty())
            md << "- " << a["subset"].get<std::string>() << ": folds excluded from per-fold means (single-class test labels): rally "
               << a["excluded_folds_rally"].dump() << ", crash " << a["excluded_folds_crash"].dump() << "\n";
    }

    md << "\n## Ablation deltas (relative to traditional only)\n\n";
    md << "| Features | d AUC rally | d AUC crash | d BCD |\n|---|---|---|---|\n";
    if (by_subset.contains("traditional")) {
        const auto& t = by_subset["traditional"];
        auto d = [](const nlohmann::json& x, const nlohmann::json& y) {
            return (x.is_number() && y.is_number()) ? nlohmann::json(x.get<double>() - y.get<double>()) : nlohmann::json(nullptr);
        };
        for (const char* s : {"spectral", "combined"}) {
            if (!by_subset.contains(s)) continue;
            const auto& a = by_subset[s];
            md << "| " << s << " | " << fmt(d(a["rally"]["auc_roc"], t["rally"]["auc_roc"])) << " | "
               << fmt(d(a["crash"]["auc_roc"], t["crash"]["auc_roc"])) << " | " << fmt(d(a["bcd_auc"], t["bcd_auc"])) << " |\n";
        }
    }

    md << "\n## Backtest (out-of-sample segment from " << strategy["oos_start"].get<std::string>() << ")\n\n";
    md << "| Strategy | Sharpe | CAGR | MaxDD | Calmar |\n|---|---|---|---|---|\n";
    auto row = [&](const char* name, const nlohmann::json& s) {
        if (s.is_null()) {
            md << "| " << name << " | n/a | n/a | n/a | n/a |\n";
            return;
        }
        md << "| " << name << " | " << fmt(s["sharpe"], 2) << " | " << fmt(s["cagr"], 3, true) << " | "
           << fmt(s["max_drawdown"], 3, true) << " | " << fmt(s["calmar"], 2) << " |\n";
    };
    row("Ensemble RORO", strategy["strategy"]["out_of_sample"]);
    row("Buy-and-hold", strategy["benchmark"]["out_of_sample"]);
    md << "\n" << strategy["combos_evaluated"] << " grid combinations ranked on the in-sample segment; top "
       << strategy["top"].size() << " averaged.\n";
    md << "Annualised next-day return when the rally rank is at or above 0.90: "
       << fmt(strategy["diagnostics"]["annualised_return_rally_rank_ge_0_90"], 3, true) << ".\n";

    md << "\n## Divergence from reference values\n\n";
    if (!ref.is_object() || ref.empty()) {
        md << "No reference values configured.\n";
    } else {
        md << "| Quantity | This run | Reference | Difference |\n|---|---|---|---|\n";
        auto compare = [&](const std::string& label, const nlohmann::json* mine, const nlohmann::json* theirs) {
            if (!theirs) return;
            const bool both = mine && mine->is_number() && theirs->is_number();
            md << "| " << label << " | " << (mine ? fmt(*mine) : "n/a") << " | " << fmt(*theirs) << " | "
               << (both ? fmt(nlohmann::json(mine->get<double>() - theirs->get<double>())) : "n/a") << " |\n";
        };
        for (const char* s : {"traditional", "spectral", "combined"}) {
            const nlohmann::json* mine = by_subset.contains(s) ? &by_subset[s] : nullptr;
            compare(std::string(s) + " AUC rally", mine ? detail::find_path(*mine, {"rally", "auc_roc"}) : nullptr,
                    detail::find_path(ref, {s, "auc_rally"}));
            compare(std::string(s) + " AUC crash", mine ? detail::find_path(*mine, {"crash", "auc_roc"}) : nullptr,
                    detail::find_path(ref, {s, "auc_crash"}));
            compare(std::string(s) + " BCD-AUC", mine ? detail::find_path(*mine, {"bcd_auc"}) : nullptr,
                    detail::find_path(ref, {s, "bcd_auc"}));
        }
        const auto& oos = strategy["strategy"]["out_of_sample"];
        for (const char* k : {"sharpe", "cagr", "max_drawdown", "calmar"})
            compare(std::string("strategy ") + k, oos.is_object() ? detail::find_path(oos, {k}) : nullptr,
                    detail::find_path(ref, {"strategy", k}));
        md << "\nReference values come from a different data vendor, universe history and feature manifest, "
              "so no tolerance is claimed; differences are reported for inspection only.\n";
    }
    const std::string text = md.str();
    write_text(ctx.out_dir() / "report.md", text);
    *ctx.log << "report: " << (ctx.out_dir() / "report.md").string() << '\n';
    return text;
}

}  // namespace orca::pipeline
