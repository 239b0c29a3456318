// orca_cli: features | evaluate | backtest | report | synth
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "orca/config.hpp"
#include "orca/pipeline.hpp"
#include "orca/synthetic.hpp"

namespace {

struct Overrides {
    std::string config_path;
    std::uint64_t seed = 0;
    unsigned jobs = 0;
    std::string universe;
    std::string subset;
    bool strict = false;
    bool expanding = false;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

orca::pipeline::Context make_context(const Overrides& o, const CLI::App& app) {
    orca::pipeline::Context ctx;
    if (o.config_path.empty()) throw orca::ConfigError("--config is required");
    ctx.config = orca::RunConfig::load(o.config_path);
    ctx.config_dir = std::filesystem::path(o.config_path).parent_path();
    if (ctx.config_dir.empty()) ctx.config_dir = ".";
    if (app.count("--seed")) ctx.config.seed = o.seed;
    if (app.count("--jobs")) ctx.config.jobs = o.jobs;
    if (!o.universe.empty()) {
        ctx.config.universe = split_list(o.universe);
        if (std::find(ctx.config.universe.begin(), ctx.config.universe.end(), ctx.config.index_symbol) ==
            ctx.config.universe.end())
            throw orca::ConfigError("--universe must include the index symbol " + ctx.config.index_symbol);
    }
    if (!o.subset.empty()) ctx.config.subset = orca::parse_subset(o.subset);
    if (o.strict) ctx.config.folds.strict = true;
    if (o.expanding) ctx.config.folds.expanding = true;
    return ctx;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ORCA: spectral correlation features, walk-forward forests and a risk-on/risk-off backtest"};
    app.require_subcommand(1);
    app.fallthrough();
    Overrides o;
    app.add_option("-c,--config", o.config_path, "JSON run configuration");
    app.add_option("--seed", o.seed, "override the learner seed");
    app.add_option("--jobs", o.jobs, "cap on worker threads (0 = all cores)");
    app.add_option("--universe", o.universe, "comma-separated symbols replacing config.universe");
    app.add_option("--subset", o.subset, "feature subset: traditional, spectral or combined");
    app.add_flag("--strict", o.strict, "fail when the history supports fewer folds than requested");
    app.add_flag("--expanding", o.expanding, "expanding instead of rolling training windows");

    auto* features = app.add_subcommand("features", "compute the feature matrix and manifest (cached)");
    auto* evaluate = app.add_subcommand("evaluate", "walk-forward evaluation with ablations; writes predictions and metrics.json");
    auto* backtest = app.add_subcommand("backtest", "ensemble grid search and backtest; writes ledgers and strategy.json");
    auto* report = app.add_subcommand("report", "render report.md from metrics.json and strategy.json");
    auto* synth = app.add_subcommand("synth", "write a synthetic regime price panel as CSV");
    std::string synth_out;
    std::size_t synth_days = 0;
    std::uint64_t synth_seed = 1;
    synth->add_option("-o,--output", synth_out, "output CSV path")->required();
    synth->add_option("--days", synth_days, "number of trading days (default from config or 3000)");
    synth->add_option("--generator-seed", synth_seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(orca::ExitCode::ConfigError);
    }

    try {
        if (synth->parsed()) {
            orca::SyntheticOptions so;
            if (!o.config_path.empty()) so = orca::RunConfig::load(o.config_path).synthetic;
            if (synth_days) so.days = synth_days;
            so.seed = synth_seed;
            if (!o.universe.empty()) so.symbols = split_list(o.universe);
            const auto s = orca::generate_synthetic(so);
            std::ostringstream csv;
            orca::write_price_csv(csv, s.table, {"orca synthetic generator_seed=" + std::to_string(so.seed) +
                                                 " events=" + std::to_string(s.events.size())});
            orca::pipeline::write_text(std::filesystem::absolute(synth_out), csv.str());
            std::cerr << "synth: " << so.days << " days, " << s.events.size() << " spike/crash events -> " << synth_out << '\n';
            return 0;
        }
        const auto ctx = make_context(o, app);
        if (features->parsed()) orca::pipeline::cmd_features(ctx);
        if (evaluate->parsed()) orca::pipeline::cmd_evaluate(ctx);
        if (backtest->parsed()) orca::pipeline::cmd_backtest(ctx);
        if (report->parsed()) orca::pipeline::cmd_report(ctx);
    } catch (const orca::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(orca::ExitCode::DataError);
    }
    return 0;
}
