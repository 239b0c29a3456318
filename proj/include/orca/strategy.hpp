#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "orca/errors.hpp"
#include "orca/market_data.hpp"
#include "orca/parallel.hpp"
#include "orca/stats.hpp"

namespace orca {

// ---------------------------------------------------------------------------
// Percentile ranks

inline constexpr int kRankWindow = 126;

/// Trailing percentile rank: (# window values <= current) / window. The
/// output has series.size() - window + 1 entries; entry k belongs to
/// series[k + window - 1].
inline std::vector<double> percentile_ranks(std::span<const double> series, int window = kRankWindow) {
    if (window <= 0) throw ConfigError("rank window must be positive");
    const auto w = static_cast<std::size_t>(window);
    std::vector<double> out;
    if (series.size() < w) return out;
    out.reserve(series.size() - w + 1);
    for (std::size_t t = w - 1; t < series.size(); ++t)
        out.push_back(stats::percentile_rank(series.subspan(t + 1 - w, w), series[t]));
    return out;
}

struct SignalRanks {
    std::vector<Date> dates;
    std::vector<double> rally;
    std::vector<double> crash;
    int window = kRankWindow;

    std::size_t size() const noexcept { return dates.size(); }
};

/// Ranks both probability series; the first window-1 dates are warm-up.
inline SignalRanks make_signal_ranks(const std::vector<Date>& dates, std::span<const double> p_rally,
                                     std::span<const double> p_crash, int window = kRankWindow) {
    if (dates.size() != p_rally.size() || dates.size() != p_crash.size())
        throw DataError("signal ranks: series lengths differ");
    SignalRanks s;
    s.window = window;
    s.rally = percentile_ranks(p_rally, window);
    s.crash = percentile_ranks(p_crash, window);
    if (!s.rally.empty()) s.dates.assign(dates.begin() + (window - 1), dates.end());
    return s;
}

// ---------------------------------------------------------------------------
// Exposure map

enum class Regime { Normal, Rally, Caution, Euphoria, Crisis };

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::Normal: return "Normal";
        case Regime::Rally: return "Rally";
        case Regime::Caution: return "Caution";
        case Regime::Euphoria: return "Euphoria";
        case Regime::Crisis: return "Crisis";
    }
    return "?";
}

struct ExposureParams {
    double rally_entry = 0.78;    // lower edge of the sweet spot
    double rally_exit = 0.90;     // euphoria exit
    double rally_elevated = 0.60; // 1.2x cell when crash risk is low
    double crash_exit = 0.60;
    double crash_caution = 0.40;
    double max_leverage = 1.5;
    double elevated = 1.2;
    double base = 1.0;
    double caution_high = 0.7;
    double caution_low = 0.3;
    int hold_days = 8;
    double bounce = 1.0;  // scalar on the defensive sleeve

    void validate() const {
        for (double v : {rally_entry, rally_exit, rally_elevated, crash_exit, crash_caution})
            if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("exposure thresholds must lie in [0, 1]");
        for (double v : {max_leverage, elevated, base, caution_high, caution_low})
            if (!(v >= 0.0 && v <= 1.5)) throw ConfigError("exposures must lie in [0, 1.5]");
        if (!(rally_entry < rally_exit)) throw ConfigError("rally entry must be below rally exit");
        if (!(crash_caution < crash_exit)) throw ConfigError("crash caution must be below crash exit");
        if (hold_days < 1) throw ConfigError("hold must be at least one day");
        if (bounce < 0) throw ConfigError("bounce scalar must be nonnegative");
    }
};

struct ExposureDecision {
    double exposure = 1.0;
    Regime regime = Regime::Normal;
};

/// Exits first (euphoria wins when both fire), then the sweet spot, then the
/// intermediate cells. Every cell is capped at max_leverage.
inline ExposureDecision exposure_map(double rr, double rc, const ExposureParams& p = {}) {
    if (rr >= p.rally_exit) return {0.0, Regime::Euphoria};
    if (rc >= p.crash_exit) return {0.0, Regime::Crisis};
    if (rr >= p.rally_entry && rc < p.crash_caution) return {p.max_leverage, Regime::Rally};
    double w;
    if (rc < p.crash_caution)
        w = rr >= p.rally_elevated ? p.elevated : p.base;
    else
        w = rr < p.rally_entry ? p.caution_high : p.caution_low;
    w = std::min(w, p.max_leverage);
    return {w, w <= 0.7 ? Regime::Caution : Regime::Normal};
}

// ---------------------------------------------------------------------------
// Positions

/// Held equity and defensive weights per signal date.
struct PositionSeries {
    std::vector<Date> dates;
    std::vector<double> equity;
    std::vector<double> defensive;
    std::vector<Regime> regime;

    std::size_t size() const noexcept { return dates.size(); }
};

/// Applies the hold timer: a new target is adopted only once `hold_days`
/// days have passed since the last change, except that a move to zero
/// applies at once.
inline PositionSeries positions(const SignalRanks& ranks, const ExposureParams& p = {}) {
    PositionSeries out;
    out.dates = ranks.dates;
    const std::size_t n = ranks.size();
    out.equity.resize(n);
    out.defensive.resize(n);
    out.regime.resize(n);
    double held = 0.0;
    Regime held_regime = Regime::Normal;
    std::size_t last_change = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const auto d = exposure_map(ranks.rally[t], ranks.crash[t], p);
        if (t == 0) {
            held = d.exposure;
            held_regime = d.regime;
            last_change = 0;
        } else if (d.exposure == 0.0 && held != 0.0) {
            held = 0.0;
            held_regime = d.regime;
            last_change = t;
        } else if (t - last_change >= static_cast<std::size_t>(p.hold_days) && d.exposure != held) {
            held = d.exposure;
            held_regime = d.regime;
            last_change = t;
        } else if (held == 0.0 && d.exposure == 0.0) {
            held_regime = d.regime;
        }
        out.equity[t] = held;
        out.defensive[t] = p.bounce * std::max(0.0, 1.0 - held);
        out.regime[t] = held_regime;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ledger

struct CostModel {
    double transaction_bps = 5.0;        // per unit of |change in w|
    double leverage_annual = 0.005;      // on exposure above 1x
    double risk_free_annual = 0.04;
};

/// Next-day returns for each signal date: row t earns the close-to-close
/// return from date t to the following panel date.
struct MarketReturns {
    std::vector<Date> dates;
    std::vector<double> equity;
    std::vector<double> defensive;  // 0.5 GLD + 0.3 IEF + 0.2 UUP

    std::size_t size() const noexcept { return dates.size(); }
};

struct DefensiveSleeve {
    std::vector<std::pair<std::string, double>> weights = {{"GLD", 0.5}, {"IEF", 0.3}, {"UUP", 0.2}};
};

inline MarketReturns market_returns(const PricePanel& panel, const std::vector<Date>& dates, const std::string& equity_symbol,
                                    const DefensiveSleeve& sleeve = {}) {
    if (!panel.has_symbol(equity_symbol)) throw DataError("equity asset missing from panel: " + equity_symbol);
    for (const auto& [sym, w] : sleeve.weights)
        if (!panel.has_symbol(sym)) throw DataError("defensive asset missing from panel: " + sym);
    MarketReturns out;
    const auto ecol = static_cast<Eigen::Index>(panel.column(equity_symbol));
    for (const auto& d : dates) {
        const std::size_t row = panel.index_of(d);
        if (row + 1 >= panel.size()) break;  // no next-day return
        const auto next = static_cast<Eigen::Index>(row + 1);
        double def = 0.0;
        for (const auto& [sym, w] : sleeve.weights) def += w * panel.returns()(next, static_cast<Eigen::Index>(panel.column(sym)));
        out.dates.push_back(d);
        out.equity.push_back(panel.returns()(next, ecol));
        out.defensive.push_back(def);
    }
    return out;
}

struct LedgerRow {
    Date date;
    double exposure = 0.0;
    double defensive_weight = 0.0;
    Regime regime = Regime::Normal;
    double equity_return = 0.0;
    double defensive_return = 0.0;
    double transaction_cost = 0.0;
    double leverage_cost = 0.0;
    double net_return = 0.0;
    double wealth = 1.0;
};

struct BacktestLedger {
    std::vector<LedgerRow> rows;

    std::size_t size() const noexcept { return rows.size(); }
    std::vector<double> net_returns() const {
        std::vector<double> r;
        r.reserve(rows.size());
        for (const auto& x : rows) r.push_back(x.net_return);
        return r;
    }
    std::vector<double> exposures() const {
        std::vector<double> r;
        r.reserve(rows.size());
        for (const auto& x : rows) r.push_back(x.exposure);
        return r;
    }
    double final_wealth() const noexcept { return rows.empty() ? 1.0 : rows.back().wealth; }

    bool operator==(const BacktestLedger& o) const {
        if (rows.size() != o.rows.size()) return false;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& a = rows[i];
            const auto& b = o.rows[i];
            if (a.date != b.date || a.exposure != b.exposure || a.defensive_weight != b.defensive_weight ||
                a.regime != b.regime || a.equity_return != b.equity_return || a.defensive_return != b.defensive_return ||
                a.transaction_cost != b.transaction_cost || a.leverage_cost != b.leverage_cost ||
                a.net_return != b.net_return || a.wealth != b.wealth)
                return false;
        }
        return true;
    }
};

/// Row t holds w_t through the next close:
///   net_t = w_t r_eq + d_t r_def - bps |w_t - w_{t-1}| - (lev / 252) max(0, w_t - 1)
/// where d_t is the defensive weight. The opening position carries no cost.
/// Rows run over [begin, end) of the position series.
inline BacktestLedger simulate(const PositionSeries& pos, const MarketReturns& mkt, const CostModel& costs = {},
                               std::size_t begin = 0, std::size_t end = std::numeric_limits<std::size_t>::max()) {
    end = std::min({end, pos.size(), mkt.size()});
    BacktestLedger ledger;
    if (begin >= end) return ledger;
    ledger.rows.reserve(end - begin);
    const double tc = costs.transaction_bps * 1e-4;
    const double lc = costs.leverage_annual / 252.0;
    double wealth = 1.0;
    for (std::size_t t = begin; t < end; ++t) {
        if (pos.dates[t] != mkt.dates[t]) throw DataError("positions and returns misaligned at " + pos.dates[t]);
        LedgerRow r;
        r.date = pos.dates[t];
        r.exposure = pos.equity[t];
        r.defensive_weight = pos.defensive[t];
        r.regime = pos.regime[t];
        r.equity_return = mkt.equity[t];
        r.defensive_return = mkt.defensive[t];
        r.transaction_cost = t == begin ? 0.0 : tc * std::abs(pos.equity[t] - pos.equity[t - 1]);
        r.leverage_cost = lc * std::max(0.0, pos.equity[t] - 1.0);
        r.net_return = r.exposure * r.equity_return + r.defensive_weight * r.defensive_return - r.transaction_cost -
                       r.leverage_cost;
        wealth *= 1.0 + r.net_return;
        r.wealth = wealth;
        ledger.rows.push_back(r);
    }
    return ledger;
}

inline BacktestLedger backtest(const SignalRanks& ranks, const MarketReturns& mkt, const ExposureParams& p = {},
                               const CostModel& costs = {}) {
    p.validate();
    return simulate(positions(ranks, p), mkt, costs);
}

/// Equity compounding with no costs.
inline BacktestLedger buy_and_hold(const MarketReturns& mkt) {
    PositionSeries pos;
    pos.dates = mkt.dates;
    pos.equity.assign(mkt.size(), 1.0);
    pos.defensive.assign(mkt.size(), 0.0);
    pos.regime.assign(mkt.size(), Regime::Normal);
    return simulate(pos, mkt, {0.0, 0.0, 0.04});
}

// ---------------------------------------------------------------------------
// Performance

struct PerformanceStats {
    double sharpe = 0.0;
    double cagr = 0.0;
    double max_drawdown = 0.0;  // <= 0
    double calmar = 0.0;        // +inf when there is no drawdown
    std::size_t days = 0;
};

inline double calmar_ratio(double cagr, double max_drawdown) {
    if (max_drawdown == 0.0) return std::numeric_limits<double>::infinity();
    return cagr / std::abs(max_drawdown);
}

inline double sharpe_ratio(std::span<const double> daily, double risk_free_annual = 0.04) {
    if (daily.size() < 2) throw UndefinedMetric("sharpe: fewer than two returns");
    std::vector<double> excess(daily.size());
    for (std::size_t i = 0; i < daily.size(); ++i) excess[i] = daily[i] - risk_free_annual / 252.0;
    const double m = stats::mean(excess);
    const double sd = stats::stddev(daily, 1);
    if (m == 0.0) return 0.0;
    if (!(sd > 1e-14)) throw UndefinedMetric("sharpe: zero volatility");
    return m / sd * std::sqrt(252.0);
}

inline PerformanceStats performance_stats(std::span<const double> daily, double risk_free_annual = 0.04) {
    if (daily.empty()) throw UndefinedMetric("performance: empty ledger");
    PerformanceStats s;
    s.days = daily.size();
    s.sharpe = sharpe_ratio(daily, risk_free_annual);
    double wealth = 1.0, peak = 1.0, mdd = 0.0;
    for (double r : daily) {
        wealth *= 1.0 + r;
        peak = std::max(peak, wealth);
        mdd = std::min(mdd, wealth / peak - 1.0);
    }
    s.cagr = std::pow(wealth, 252.0 / static_cast<double>(daily.size())) - 1.0;
    s.max_drawdown = mdd;
    s.calmar = calmar_ratio(s.cagr, mdd);
    return s;
}

inline PerformanceStats performance_stats(const BacktestLedger& ledger, double risk_free_annual = 0.04) {
    const auto r = ledger.net_returns();
    return performance_stats(r, risk_free_annual);
}

// ---------------------------------------------------------------------------
// Ensemble walk-forward optimisation

struct GridSpec {
    std::vector<double> rally_entry = {0.70, 0.725, 0.75, 0.775, 0.80, 0.825, 0.85};
    std::vector<double> rally_exit = {0.85, 0.87, 0.89, 0.91, 0.93, 0.95};
    std::vector<double> crash_exit = {0.50, 0.54, 0.58, 0.62, 0.66, 0.70};
    std::vector<double> crash_caution = {0.30, 0.34, 0.38, 0.42, 0.46, 0.50};
    std::vector<double> base = {0.8, 1.0, 1.2};
    std::vector<double> max_leverage = {1.2, 1.5};
    std::vector<int> hold_days = {5, 8, 13};
    std::vector<double> bounce = {0.8, 1.0};

    /// Feasible combinations (entry < exit, caution < exit) in lattice order.
    std::vector<ExposureParams> enumerate(const ExposureParams& templ = {}) const {
        std::vector<ExposureParams> out;
        for (double re : rally_entry)
            for (double rx : rally_exit)
                for (double cx : crash_exit)
                    for (double cc : crash_caution)
                        for (double b : base)
                            for (double ml : max_leverage)
                                for (int h : hold_days)
                                    for (double bo : bounce) {
                                        if (!(re < rx) || !(cc < cx)) continue;
                                        ExposureParams p = templ;
                                        p.rally_entry = re;
                                        p.rally_exit = rx;
                                        p.crash_exit = cx;
                                        p.crash_caution = cc;
                                        p.base = b;
                                        p.max_leverage = ml;
                                        p.hold_days = h;
                                        p.bounce = bo;
                                        out.push_back(p);
                                    }
        return out;
    }
};

struct EnsembleOptions {
    double in_sample_fraction = 0.55;
    std::size_t top_k = 20;
    unsigned jobs = 1;
    CostModel costs{};
};

/// Element-wise mean of member series, written as min + mean(x - min) and
/// clamped to the member envelope so identical members reproduce exactly.
inline std::vector<double> envelope_mean(const std::vector<const std::vector<double>*>& members) {
    if (members.empty()) return {};
    const std::size_t n = members.front()->size();
    std::vector<double> out(n);
    const auto k = static_cast<double>(members.size());
    for (std::size_t t = 0; t < n; ++t) {
        double lo = (*members[0])[t], hi = lo;
        for (const auto* m : members) {
            lo = std::min(lo, (*m)[t]);
            hi = std::max(hi, (*m)[t]);
        }
        double acc = 0.0;
        for (const auto* m : members) acc += (*m)[t] - lo;
        out[t] = std::clamp(lo + acc / k, lo, hi);
    }
    return out;
}

/// Regime of an averaged position: the members' common regime if they agree,
/// otherwise the exposure band.
inline Regime band_regime(double w, Regime top_member, double max_leverage) {
    if (w == 0.0) return top_member == Regime::Euphoria ? Regime::Euphoria : Regime::Crisis;
    if (w >= max_leverage) return Regime::Rally;
    if (w <= 0.7) return Regime::Caution;
    return Regime::Normal;
}

inline PositionSeries average_positions(const std::vector<PositionSeries>& members, double max_leverage = 1.5) {
    PositionSeries out;
    if (members.empty()) return out;
    out.dates = members.front().dates;
    std::vector<const std::vector<double>*> eq, def;
    for (const auto& m : members) {
        if (m.dates != out.dates) throw DataError("ensemble members cover different dates");
        eq.push_back(&m.equity);
        def.push_back(&m.defensive);
    }
    out.equity = envelope_mean(eq);
    out.defensive = envelope_mean(def);
    out.regime.resize(out.size());
    for (std::size_t t = 0; t < out.size(); ++t) {
        const Regime first = members.front().regime[t];
        bool agree = true;
        for (const auto& m : members) agree = agree && m.regime[t] == first;
        out.regime[t] = agree ? first : band_regime(out.equity[t], first, max_leverage);
    }
    return out;
}

struct RankedCombo {
    std::size_t index = 0;  // position in the enumerated grid
    ExposureParams params;
    double in_sample_sharpe = 0.0;
};

struct EnsembleResult {
    std::vector<RankedCombo> top;
    std::size_t combos_evaluated = 0;
    std::size_t split_index = 0;  // first out-of-sample row
    PositionSeries positions;
    BacktestLedger ledger;  // full history
    PerformanceStats in_sample;
    PerformanceStats out_of_sample;
    PerformanceStats full;
    std::vector<std::string> warnings;
};

/// Ranks every combination by Sharpe over the first `in_sample_fraction` of
/// the signal history, averages the top-k position series, and backtests the
/// average over the full history. The remainder is the out-of-sample segment.
inline EnsembleResult ensemble_wfo(const SignalRanks& ranks, const MarketReturns& mkt, const std::vector<ExposureParams>& combos,
                                   const EnsembleOptions& opts = {}) {
    if (combos.empty()) throw ConfigError("ensemble grid is empty");
    const std::size_t n = std::min(ranks.size(), mkt.size());
    if (n < 4) throw InsufficientHistory("ensemble needs more signal history");
    EnsembleResult res;
    res.split_index = static_cast<std::size_t>(std::floor(opts.in_sample_fraction * static_cast<double>(n)));
    if (res.split_index < 2 || res.split_index + 2 > n) throw ConfigError("in-sample fraction leaves an empty segment");
    res.combos_evaluated = combos.size();

    std::vector<double> sharpe(combos.size());
    parallel_for(combos.size(), opts.jobs, [&](std::size_t i) {
        const auto pos = positions(ranks, combos[i]);
        const auto ledger = simulate(pos, mkt, opts.costs, 0, res.split_index);
        try {
            sharpe[i] = sharpe_ratio(ledger.net_returns(), opts.costs.risk_free_annual);
        } catch (const UndefinedMetric&) {
            sharpe[i] = -std::numeric_limits<double>::infinity();
        }
    });
    std::vector<std::size_t> order(combos.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sharpe[a] > sharpe[b]; });
    std::size_t k = opts.top_k;
    if (combos.size() < k) {
        res.warnings.push_back("only " + std::to_string(combos.size()) + " feasible combinations; averaging all");
        k = combos.size();
    }
    std::vector<PositionSeries> members;
    double max_lev = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        res.top.push_back({order[i], combos[order[i]], sharpe[order[i]]});
        members.push_back(positions(ranks, combos[order[i]]));
        max_lev = std::max(max_lev, combos[order[i]].max_leverage);
    }
    res.positions = average_positions(members, max_lev);
    res.ledger = simulate(res.positions, mkt, opts.costs, 0, n);
    const auto net = res.ledger.net_returns();
    const std::span<const double> all(net);
    auto safe_stats = [&](std::span<const double> r, const char* what) {
        try {
            return performance_stats(r, opts.costs.risk_free_annual);
        } catch (const UndefinedMetric& e) {
            res.warnings.push_back(std::string(what) + ": " + e.what());
            return PerformanceStats{};
        }
    };
    res.in_sample = safe_stats(all.first(res.split_index), "in-sample");
    res.out_of_sample = safe_stats(all.subspan(res.split_index), "out-of-sample");
    res.full = safe_stats(all, "full");
    return res;
}

inline EnsembleResult ensemble_wfo(const SignalRanks& ranks, const MarketReturns& mkt, const GridSpec& grid = {},
                                   const EnsembleOptions& opts = {}) {
    return ensemble_wfo(ranks, mkt, grid.enumerate(), opts);
}

/// Annualised mean next-day equity return on dates whose rally rank is at or
/// above `threshold`. NaN when no date qualifies.
inline double conditional_annual_return(const SignalRanks& ranks, const MarketReturns& mkt, double threshold = 0.90) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < std::min(ranks.size(), mkt.size()); ++t)
        if (ranks.rally[t] >= threshold) {
            sum += mkt.equity[t];
            ++count;
        }
    return count ? sum / static_cast<double>(count) * 252.0 : std::numeric_limits<double>::quiet_NaN();
}

inline void write_ledger_csv(std::ostream& out, const BacktestLedger& ledger, const std::vector<std::string>& header_comments = {}) {
    for (const auto& c : header_comments) out << "# " << c << '\n';
    out << "date,exposure,defensive_weight,regime,equity_return,defensive_return,transaction_cost,leverage_cost,net_return,wealth\n";
    out << std::setprecision(17);
    for (const auto& r : ledger.rows)
        out << r.date << ',' << r.exposure << ',' << r.defensive_weight << ',' << regime_name(r.regime) << ','
            << r.equity_return << ',' << r.defensive_return << ',' << r.transaction_cost << ',' << r.leverage_cost << ','
            << r.net_return << ',' << r.wealth << '\n';
}

}  // namespace orca
