#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "orca/errors.hpp"
#include "orca/market_data.hpp"
#include "orca/rng.hpp"

namespace orca {

// Synthetic regime generator.
//
// Daily returns follow
//
//   r[i,t] = mu + sigma * (a * m[t] + b[t] * u[i] * f[t] + c[t] * e[i,t])
//
// with m, f, e independent standard normals and a^2 = base_corr. In calm
// periods b = 0 and c^2 = 1 - base_corr, so every pair correlates at
// base_corr. During a spike regime b^2 = spike_corr - base_corr and
// c^2 = 1 - spike_corr: same-sign pairs correlate at spike_corr and
// opposite-sign pairs at 2 * base_corr - spike_corr. Each asset's variance is
// sigma^2 throughout, and the loadings u = +1/-1 alternate, so the index
// volatility and the mean cross-sectional dispersion stay flat and only the
// correlation structure moves.
//
// Each event is a spike that begins `lead` days (uniform in
// [lead_min, lead_max]) before a crash. For `crash_days` days the factor f has
// a mean chosen so the index (column 0, loading +1) drifts by
// `crash_return` per day; the spike persists through the crash. Events recur
// every `event_spacing` days with +-spacing/6 jitter after a quiet burn-in.
struct SyntheticOptions {
    std::vector<std::string> symbols = default_universe();
    std::size_t days = 3000;
    double daily_vol = 0.01;
    double drift = 0.0003;
    double base_corr = 0.1;
    double spike_corr = 0.9;
    int event_spacing = 150;
    int lead_min = 5;
    int lead_max = 10;
    int crash_days = 5;
    double crash_return = -0.02;
    int burn_in = 300;
    std::uint64_t seed = 1;
    std::string start_date = "2009-01-02";

    void validate() const {
        if (symbols.size() < 2) throw ConfigError("synthetic panel needs at least two assets");
        if (!(base_corr >= 0 && base_corr < spike_corr && spike_corr < 1)) throw ConfigError("need 0 <= base < spike < 1");
        if (lead_min < 1 || lead_max < lead_min) throw ConfigError("bad lead range");
        if (event_spacing <= lead_max + crash_days) throw ConfigError("events would overlap");
        if (!is_iso_date(start_date)) throw ConfigError("bad synthetic start date");
    }
};

struct SyntheticEvent {
    std::size_t spike_start = 0;
    std::size_t crash_start = 0;
    std::size_t crash_end = 0;  // exclusive
};

struct SyntheticPanel {
    RawPriceTable table;
    std::vector<SyntheticEvent> events;
    std::vector<std::uint8_t> in_spike;  // per row
};

/// Consecutive weekdays from `start` (no holiday calendar).
inline std::vector<Date> weekday_dates(const std::string& start, std::size_t count) {
    using namespace std::chrono;
    int y = 0;
    unsigned m = 0, d = 0;
    if (std::sscanf(start.c_str(), "%d-%u-%u", &y, &m, &d) != 3) throw ConfigError("bad date " + start);
    sys_days day{year{y} / month{m} / std::chrono::day{d}};
    std::vector<Date> out;
    out.reserve(count);
    while (out.size() < count) {
        const weekday wd{day};
        if (wd != Saturday && wd != Sunday) {
            const year_month_day ymd{day};
            char buf[16];
            std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                          static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
            out.emplace_back(buf);
        }
        day += days{1};
    }
    return out;
}

inline SyntheticPanel generate_synthetic(const SyntheticOptions& opts = {}) {
    opts.validate();
    SplitMix64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&] { return normal(rng); };

    SyntheticPanel out;
    const std::size_t n = opts.symbols.size();
    const std::size_t T = opts.days;
    out.in_spike.assign(T, 0);
    std::vector<double> crash_mean(T, 0.0);

    const int jitter = opts.event_spacing / 6;
    long next = opts.burn_in + opts.event_spacing;
    while (true) {
        const long cs = next + static_cast<long>(rng.below(static_cast<std::uint64_t>(2 * jitter + 1))) - jitter;
        const long lead = opts.lead_min + static_cast<long>(rng.below(static_cast<std::uint64_t>(opts.lead_max - opts.lead_min + 1)));
        const long ce = cs + opts.crash_days;
        if (ce >= static_cast<long>(T)) break;
        SyntheticEvent ev{static_cast<std::size_t>(cs - lead), static_cast<std::size_t>(cs), static_cast<std::size_t>(ce)};
        for (std::size_t t = ev.spike_start; t < ev.crash_end; ++t) out.in_spike[t] = 1;
        for (std::size_t t = ev.crash_start; t < ev.crash_end; ++t) crash_mean[t] = 1.0;
        out.events.push_back(ev);
        next += opts.event_spacing;
    }

    const double sigma = opts.daily_vol;
    const double a = std::sqrt(opts.base_corr);
    const double b_spike = std::sqrt(opts.spike_corr - opts.base_corr);
    const double c_calm = std::sqrt(1.0 - opts.base_corr);
    const double c_spike = std::sqrt(1.0 - opts.spike_corr);
    const double f_crash = (opts.crash_return - opts.drift) / (sigma * b_spike);

    out.table.symbols = opts.symbols;
    out.table.dates = weekday_dates(opts.start_date, T);
    out.table.prices.resize(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(n));
    std::vector<double> level(n, 100.0);
    for (std::size_t t = 0; t < T; ++t) {
        if (t > 0) {
            const double m = draw();
            const double f = draw() + (crash_mean[t] > 0 ? f_crash : 0.0);
            const bool spike = out.in_spike[t] != 0;
            const double b = spike ? b_spike : 0.0;
            const double c = spike ? c_spike : c_calm;
            for (std::size_t i = 0; i < n; ++i) {
                const double u = (i % 2 == 0) ? 1.0 : -1.0;
                const double r = opts.drift + sigma * (a * m + b * u * f + c * draw());
                level[i] *= 1.0 + std::max(r, -0.5);
            }
        }
        for (std::size_t i = 0; i < n; ++i)
            out.table.prices(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = level[i];
    }
    return out;
}

inline PricePanel synthetic_panel(const SyntheticOptions& opts = {}) {
    const auto s = generate_synthetic(opts);
    return PricePanel::from_prices(s.table.dates, s.table.symbols, s.table.prices);
}

inline void write_price_csv(std::ostream& out, const RawPriceTable& table, const std::vector<std::string>& header_comments = {}) {
    for (const auto& c : header_comments) out << "# " << c << '\n';
    out << "date";
    for (const auto& s : table.symbols) out << ',' << s;
    out << '\n' << std::setprecision(17);
    for (std::size_t t = 0; t < table.dates.size(); ++t) {
        out << table.dates[t];
        for (Eigen::Index j = 0; j < table.prices.cols(); ++j) out << ',' << table.prices(static_cast<Eigen::Index>(t), j);
        out << '\n';
    }
}

}  // namespace orca
