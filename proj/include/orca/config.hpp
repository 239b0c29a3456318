#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "orca/errors.hpp"
#include "orca/features.hpp"
#include "orca/forest.hpp"
#include "orca/hash.hpp"
#include "orca/labeling.hpp"
#include "orca/market_data.hpp"
#include "orca/strategy.hpp"
#include "orca/synthetic.hpp"

namespace orca {

/// Everything a run depends on. Serialises to and from one JSON document;
/// unknown keys are rejected so typos fail loudly.
struct RunConfig {
    std::string data_path;
    std::vector<std::string> universe = default_universe();
    std::string index_symbol = "SPY";
    std::string output_dir = "orca_out";
    std::uint64_t seed = 42;
    unsigned jobs = 1;
    FeatureSubset subset = FeatureSubset::Combined;
    CleaningOptions cleaning{};
    EwmOptions ewm{};
    TargetOptions targets{};
    FoldOptions folds{};
    ForestParams forest{};
    int rank_window = kRankWindow;
    ExposureParams exposure{};
    GridSpec grid{};
    EnsembleOptions ensemble{};
    SyntheticOptions synthetic{};
    nlohmann::json reference_results = nlohmann::json::object();

    FeatureOptions feature_options() const {
        FeatureOptions f;
        f.index_symbol = index_symbol;
        f.ewm = ewm;
        f.jobs = jobs;
        return f;
    }

    /// Hash of the canonical JSON form (keys sorted, fixed formatting).
    std::string hash() const;
    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::string& path);
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

}  // namespace detail

inline nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["data_path"] = data_path;
    j["universe"] = universe;
    j["index_symbol"] = index_symbol;
    j["output_dir"] = output_dir;
    j["seed"] = seed;
    j["jobs"] = jobs;
    j["subset"] = subset_name(subset);
    j["cleaning"] = {{"max_fill_days", cleaning.max_fill_days}, {"min_usable_rows", cleaning.min_usable_rows}};
    j["correlation"] = {{"ewm_half_life", ewm.half_life}, {"ewm_warmup", ewm.warmup},
                        {"ewm_max_lookback", ewm.max_lookback}, {"ewm_effective_t", ewm.effective_t}};
    j["targets"] = {{"horizon", targets.horizon}, {"rally_threshold", targets.rally_threshold},
                    {"crash_threshold", targets.crash_threshold}};
    j["folds"] = {{"train_days", folds.train_days}, {"gap_days", folds.gap_days}, {"test_days", folds.test_days},
                  {"n_folds", folds.n_folds},       {"expanding", folds.expanding}, {"strict", folds.strict}};
    j["forest"] = {{"n_trees", forest.n_trees},
                   {"max_depth", forest.max_depth},
                   {"min_samples_leaf", forest.min_samples_leaf},
                   {"min_samples_split", forest.min_samples_split},
                   {"max_features", forest.max_features}};
    j["strategy"] = {
        {"rank_window", rank_window},
        {"in_sample_fraction", ensemble.in_sample_fraction},
        {"top_k", ensemble.top_k},
        {"transaction_bps", ensemble.costs.transaction_bps},
        {"leverage_annual", ensemble.costs.leverage_annual},
        {"risk_free_annual", ensemble.costs.risk_free_annual},
        {"exposure",
         {{"rally_entry", exposure.rally_entry},
          {"rally_exit", exposure.rally_exit},
          {"rally_elevated", exposure.rally_elevated},
          {"crash_exit", exposure.crash_exit},
          {"crash_caution", exposure.crash_caution},
          {"max_leverage", exposure.max_leverage},
          {"elevated", exposure.elevated},
          {"base", exposure.base},
          {"caution_high", exposure.caution_high},
          {"caution_low", exposure.caution_low},
          {"hold_days", exposure.hold_days},
          {"bounce", exposure.bounce}}},
        {"grid",
         {{"rally_entry", grid.rally_entry},
          {"rally_exit", grid.rally_exit},
          {"crash_exit", grid.crash_exit},
          {"crash_caution", grid.crash_caution},
          {"base", grid.base},
          {"max_leverage", grid.max_leverage},
          {"hold_days", grid.hold_days},
          {"bounce", grid.bounce}}}};
    j["synthetic"] = {{"days", synthetic.days},
                      {"daily_vol", synthetic.daily_vol},
                      {"drift", synthetic.drift},
                      {"base_corr", synthetic.base_corr},
                      {"spike_corr", synthetic.spike_corr},
                      {"event_spacing", synthetic.event_spacing},
                      {"lead_min", synthetic.lead_min},
                      {"lead_max", synthetic.lead_max},
                      {"crash_days", synthetic.crash_days},
                      {"crash_return", synthetic.crash_return},
                      {"burn_in", synthetic.burn_in},
                      {"start_date", synthetic.start_date}};
    j["reference_results"] = reference_results;
    return j;
}

inline RunConfig RunConfig::from_json(const nlohmann::json& j) {
    using detail::read_opt;
    detail::reject_unknown(j,
                           {"data_path", "universe", "index_symbol", "output_dir", "seed", "jobs", "subset", "cleaning",
                            "correlation", "targets", "folds", "forest", "strategy", "synthetic", "reference_results"},
                           "config");
    RunConfig c;
    read_opt(j, "data_path", c.data_path, "config");
    read_opt(j, "universe", c.universe, "config");
    read_opt(j, "index_symbol", c.index_symbol, "config");
    read_opt(j, "output_dir", c.output_dir, "config");
    read_opt(j, "seed", c.seed, "config");
    read_opt(j, "jobs", c.jobs, "config");
    if (j.contains("subset")) {
        try {
            c.subset = parse_subset(j.at("subset").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("config.subset: ") + e.what());
        }
    }
    if (j.contains("cleaning")) {
        const auto& s = j["cleaning"];
        detail::reject_unknown(s, {"max_fill_days", "min_usable_rows"}, "cleaning");
        read_opt(s, "max_fill_days", c.cleaning.max_fill_days, "cleaning");
        read_opt(s, "min_usable_rows", c.cleaning.min_usable_rows, "cleaning");
    }
    if (j.contains("correlation")) {
        const auto& s = j["correlation"];
        detail::reject_unknown(s, {"ewm_half_life", "ewm_warmup", "ewm_max_lookback", "ewm_effective_t"}, "correlation");
        read_opt(s, "ewm_half_life", c.ewm.half_life, "correlation");
        read_opt(s, "ewm_warmup", c.ewm.warmup, "correlation");
        read_opt(s, "ewm_max_lookback", c.ewm.max_lookback, "correlation");
        read_opt(s, "ewm_effective_t", c.ewm.effective_t, "correlation");
    }
    if (j.contains("targets")) {
        const auto& s = j["targets"];
        detail::reject_unknown(s, {"horizon", "rally_threshold", "crash_threshold"}, "targets");
        read_opt(s, "horizon", c.targets.horizon, "targets");
        read_opt(s, "rally_threshold", c.targets.rally_threshold, "targets");
        read_opt(s, "crash_threshold", c.targets.crash_threshold, "targets");
    }
    if (j.contains("folds")) {
        const auto& s = j["folds"];
        detail::reject_unknown(s, {"train_days", "gap_days", "test_days", "n_folds", "expanding", "strict"}, "folds");
        read_opt(s, "train_days", c.folds.train_days, "folds");
        read_opt(s, "gap_days", c.folds.gap_days, "folds");
        read_opt(s, "test_days", c.folds.test_days, "folds");
        read_opt(s, "n_folds", c.folds.n_folds, "folds");
        read_opt(s, "expanding", c.folds.expanding, "folds");
        read_opt(s, "strict", c.folds.strict, "folds");
    }
    if (j.contains("forest")) {
        const auto& s = j["forest"];
        detail::reject_unknown(s, {"n_trees", "max_depth", "min_samples_leaf", "min_samples_split", "max_features"}, "forest");
        read_opt(s, "n_trees", c.forest.n_trees, "forest");
        read_opt(s, "max_depth", c.forest.max_depth, "forest");
        read_opt(s, "min_samples_leaf", c.forest.min_samples_leaf, "forest");
        read_opt(s, "min_samples_split", c.forest.min_samples_split, "forest");
        read_opt(s, "max_features", c.forest.max_features, "forest");
    }
    if (j.contains("strategy")) {
        const auto& s = j["strategy"];
        detail::reject_unknown(s,
                               {"rank_window", "in_sample_fraction", "top_k", "transaction_bps", "leverage_annual",
                                "risk_free_annual", "exposure", "grid"},
                               "strategy");
        read_opt(s, "rank_window", c.rank_window, "strategy");
        read_opt(s, "in_sample_fraction", c.ensemble.in_sample_fraction, "strategy");
        read_opt(s, "top_k", c.ensemble.top_k, "strategy");
        read_opt(s, "transaction_bps", c.ensemble.costs.transaction_bps, "strategy");
        read_opt(s, "leverage_annual", c.ensemble.costs.leverage_annual, "strategy");
        read_opt(s, "risk_free_annual", c.ensemble.costs.risk_free_annual, "strategy");
        if (s.contains("exposure")) {
            const auto& e = s["exposure"];
            detail::reject_unknown(e,
                                   {"rally_entry", "rally_exit", "rally_elevated", "crash_exit", "crash_caution",
                                    "max_leverage", "elevated", "base", "caution_high", "caution_low", "hold_days", "bounce"},
                                   "strategy.exposure");
            auto& x = c.exposure;
            read_opt(e, "rally_entry", x.rally_entry, "exposure");
            read_opt(e, "rally_exit", x.rally_exit, "exposure");
            read_opt(e, "rally_elevated", x.rally_elevated, "exposure");
            read_opt(e, "crash_exit", x.crash_exit, "exposure");
            read_opt(e, "crash_caution", x.crash_caution, "exposure");
            read_opt(e, "max_leverage", x.max_leverage, "exposure");
            read_opt(e, "elevated", x.elevated, "exposure");
            read_opt(e, "base", x.base, "exposure");
            read_opt(e, "caution_high", x.caution_high, "exposure");
            read_opt(e, "caution_low", x.caution_low, "exposure");
            read_opt(e, "hold_days", x.hold_days, "exposure");
            read_opt(e, "bounce", x.bounce, "exposure");
        }
        if (s.contains("grid")) {
            const auto& g = s["grid"];
            detail::reject_unknown(g,
                                   {"rally_entry", "rally_exit", "crash_exit", "crash_caution", "base", "max_leverage",
                                    "hold_days", "bounce"},
                                   "strategy.grid");
            read_opt(g, "rally_entry", c.grid.rally_entry, "grid");
            read_opt(g, "rally_exit", c.grid.rally_exit, "grid");
            read_opt(g, "crash_exit", c.grid.crash_exit, "grid");
            read_opt(g, "crash_caution", c.grid.crash_caution, "grid");
            read_opt(g, "base", c.grid.base, "grid");
            read_opt(g, "max_leverage", c.grid.max_leverage, "grid");
            read_opt(g, "hold_days", c.grid.hold_days, "grid");
            read_opt(g, "bounce", c.grid.bounce, "grid");
        }
    }
    if (j.contains("synthetic")) {
        const auto& s = j["synthetic"];
        detail::reject_unknown(s,
                               {"days", "daily_vol", "drift", "base_corr", "spike_corr", "event_spacing", "lead_min",
                                "lead_max", "crash_days", "crash_return", "burn_in", "start_date"},
                               "synthetic");
        auto& x = c.synthetic;
        read_opt(s, "days", x.days, "synthetic");
        read_opt(s, "daily_vol", x.daily_vol, "synthetic");
        read_opt(s, "drift", x.drift, "synthetic");
        read_opt(s, "base_corr", x.base_corr, "synthetic");
        read_opt(s, "spike_corr", x.spike_corr, "synthetic");
        read_opt(s, "event_spacing", x.event_spacing, "synthetic");
        read_opt(s, "lead_min", x.lead_min, "synthetic");
        read_opt(s, "lead_max", x.lead_max, "synthetic");
        read_opt(s, "crash_days", x.crash_days, "synthetic");
        read_opt(s, "crash_return", x.crash_return, "synthetic");
        read_opt(s, "burn_in", x.burn_in, "synthetic");
        read_opt(s, "start_date", x.start_date, "synthetic");
    }
    if (j.contains("reference_results")) c.reference_results = j["reference_results"];

    if (c.universe.empty()) throw ConfigError("config.universe is empty");
    if (std::find(c.universe.begin(), c.universe.end(), c.index_symbol) == c.universe.end())
        throw ConfigError("index symbol " + c.index_symbol + " not in universe");
    if (c.targets.horizon <= 0) throw ConfigError("targets.horizon must be positive");
    if (c.forest.n_trees <= 0 || c.forest.max_depth <= 0 || c.forest.min_samples_leaf <= 0)
        throw ConfigError("forest parameters must be positive");
    if (c.rank_window <= 1) throw ConfigError("strategy.rank_window must exceed 1");
    if (!(c.ensemble.in_sample_fraction > 0 && c.ensemble.in_sample_fraction < 1))
        throw ConfigError("strategy.in_sample_fraction must lie in (0, 1)");
    if (c.ensemble.top_k == 0) throw ConfigError("strategy.top_k must be positive");
    c.exposure.validate();
    return c;
}

inline std::string RunConfig::hash() const { return hex64(fnv1a64(to_json().dump())); }

inline RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    try {
        return from_json(j);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

}  // namespace orca
