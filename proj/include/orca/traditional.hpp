#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "orca/errors.hpp"
#include "orca/market_data.hpp"
#include "orca/spectral.hpp"
#include "orca/stats.hpp"

namespace orca {

struct IndicatorConfig {
    std::vector<int> return_horizons = {1, 5, 10, 20, 60};
    std::vector<int> vol_windows = {5, 10, 20, 60};
    std::vector<std::pair<int, int>> vol_ratios = {{5, 20}, {10, 60}};
    double garch_alpha = 0.1;
    double garch_beta = 0.85;
    int semidev_window = 20;
    std::vector<int> max_loss_windows = {5, 20};
    std::vector<int> sma_lengths = {10, 20, 50};
    int rsi_period = 14;
    std::vector<int> drawdown_windows = {20, 60};
    std::vector<int> moment_windows = {20, 60};
    int vov_inner = 5;   // rolling volatility window
    int vov_outer = 20;  // std of that volatility

    // Earliest row with every indicator defined.
    std::size_t min_history() const {
        int need = 1;
        for (int h : return_horizons) need = std::max(need, h);
        for (int w : vol_windows) need = std::max(need, w);
        for (int w : max_loss_windows) need = std::max(need, w);
        for (int w : sma_lengths) need = std::max(need, w - 1);
        for (int w : drawdown_windows) need = std::max(need, w - 1);
        for (int w : moment_windows) need = std::max(need, w);
        need = std::max({need, semidev_window, rsi_period, vov_inner + vov_outer - 1});
        return static_cast<std::size_t>(need);
    }

    void validate() const {
        auto positive = [](const std::vector<int>& v) {
            return std::all_of(v.begin(), v.end(), [](int x) { return x > 0; });
        };
        if (!positive(return_horizons) || !positive(vol_windows) || !positive(max_loss_windows) ||
            !positive(sma_lengths) || !positive(drawdown_windows) || !positive(moment_windows) ||
            semidev_window <= 0 || rsi_period <= 0 || vov_inner <= 1 || vov_outer <= 1)
            throw ConfigError("indicator windows must be positive integers");
        if (garch_alpha < 0 || garch_beta < 0 || garch_alpha + garch_beta >= 1)
            throw ConfigError("GARCH needs alpha, beta >= 0 and alpha + beta < 1");
    }
};

inline constexpr double kTradingDays = 252.0;

/// GARCH(1,1) variance forecasts h[t] for the return after row t:
///   h[t] = omega_t + alpha * r[t]^2 + beta * h[t-1],  omega_t = (1 - alpha - beta) * s2[t]
/// where s2[t] is the expanding sample variance of r[1..t]. Seeded at h[1] = r[1]^2.
/// Entry 0 is unused (no return).
inline std::vector<double> garch_variance(std::span<const double> returns, double alpha, double beta) {
    std::vector<double> h(returns.size(), 0.0);
    if (returns.size() < 2) return h;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t t = 1; t < returns.size(); ++t) {
        const double r = returns[t];
        sum += r;
        sumsq += r * r;
        const double n = static_cast<double>(t);
        if (t == 1) {
            h[t] = r * r;
            continue;
        }
        const double s2 = std::max(0.0, (sumsq - sum * sum / n) / (n - 1));
        h[t] = (1.0 - alpha - beta) * s2 + alpha * r * r + beta * h[t - 1];
    }
    return h;
}

/// Wilder-smoothed RSI over closes. Defined from row `period`; flat stretches
/// with no gains and no losses read 50.
inline std::vector<double> wilder_rsi(std::span<const double> closes, int period) {
    std::vector<double> rsi(closes.size(), 50.0);
    const auto p = static_cast<std::size_t>(period);
    if (closes.size() <= p) return rsi;
    double gain = 0.0, loss = 0.0;
    for (std::size_t t = 1; t <= p; ++t) {
        const double d = closes[t] - closes[t - 1];
        gain += std::max(d, 0.0);
        loss += std::max(-d, 0.0);
    }
    gain /= period;
    loss /= period;
    auto value = [](double g, double l) {
        if (g <= 0.0 && l <= 0.0) return 50.0;
        if (l <= 0.0) return 100.0;
        return 100.0 - 100.0 / (1.0 + g / l);
    };
    rsi[p] = value(gain, loss);
    for (std::size_t t = p + 1; t < closes.size(); ++t) {
        const double d = closes[t] - closes[t - 1];
        gain = (gain * (period - 1) + std::max(d, 0.0)) / period;
        loss = (loss * (period - 1) + std::max(-d, 0.0)) / period;
        rsi[t] = value(gain, loss);
    }
    return rsi;
}

/// Sequential state for the index series (GARCH and RSI recursions), built
/// once per run. Everything else is computed per date from the panel.
class IndicatorTape {
public:
    IndicatorTape(const PricePanel& panel, const std::string& index_symbol, IndicatorConfig cfg = {})
        : panel_(&panel), column_(panel.column(index_symbol)), cfg_(std::move(cfg)) {
        cfg_.validate();
        const auto col = static_cast<Eigen::Index>(column_);
        closes_.resize(panel.size());
        returns_.resize(panel.size());
        for (std::size_t t = 0; t < panel.size(); ++t) {
            closes_[t] = panel.prices()(static_cast<Eigen::Index>(t), col);
            returns_[t] = panel.returns()(static_cast<Eigen::Index>(t), col);
        }
        garch_ = garch_variance(returns_, cfg_.garch_alpha, cfg_.garch_beta);
        rsi_ = wilder_rsi(closes_, cfg_.rsi_period);
    }

    const IndicatorConfig& config() const noexcept { return cfg_; }
    const std::vector<double>& garch() const noexcept { return garch_; }
    const std::vector<double>& rsi() const noexcept { return rsi_; }

    /// Traditional indicator row at panel row `t`, using rows <= t only.
    NamedValues row(std::size_t t) const {
        if (t >= closes_.size() || t < cfg_.min_history())
            throw WindowUnavailable("traditional features need " + std::to_string(cfg_.min_history() + 1) +
                                    " rows of history");
        const double ann = std::sqrt(kTradingDays);
        auto trailing = [&](std::size_t len, std::size_t end) {
            return std::span<const double>(returns_.data() + (end + 1 - len), len);
        };
        auto vol = [&](int w, std::size_t end) { return stats::stddev(trailing(static_cast<std::size_t>(w), end), 1) * ann; };

        NamedValues out;
        for (int h : cfg_.return_horizons)
            out.add("ret_" + std::to_string(h) + "d", closes_[t] / closes_[t - static_cast<std::size_t>(h)] - 1.0);
        for (int w : cfg_.vol_windows) out.add("vol_" + std::to_string(w) + "d", vol(w, t));
        for (auto [a, b] : cfg_.vol_ratios) {
            const double va = vol(a, t), vb = vol(b, t);
            out.add("vol_ratio_" + std::to_string(a) + "_" + std::to_string(b), vb > 0 ? va / vb : 0.0, !(vb > 0));
        }
        out.add("garch_vol", std::sqrt(garch_[t] * kTradingDays));

        {
            std::vector<double> neg;
            for (double r : trailing(static_cast<std::size_t>(cfg_.semidev_window), t))
                if (r < 0) neg.push_back(r);
            out.add("semidev_" + std::to_string(cfg_.semidev_window) + "d", stats::stddev(neg, 1) * ann);
        }
        for (int w : cfg_.max_loss_windows) {
            const auto win = trailing(static_cast<std::size_t>(w), t);
            const double worst = *std::min_element(win.begin(), win.end());
            out.add("max_loss_" + std::to_string(w) + "d", std::max(0.0, -worst));
        }
        for (int w : cfg_.sma_lengths) {
            std::span<const double> px(closes_.data() + (t + 1 - static_cast<std::size_t>(w)), static_cast<std::size_t>(w));
            out.add("price_to_sma_" + std::to_string(w), closes_[t] / stats::mean(px));
        }
        out.add("rsi_" + std::to_string(cfg_.rsi_period), rsi_[t]);
        for (int w : cfg_.drawdown_windows) {
            std::span<const double> px(closes_.data() + (t + 1 - static_cast<std::size_t>(w)), static_cast<std::size_t>(w));
            out.add("drawdown_" + std::to_string(w) + "d", closes_[t] / *std::max_element(px.begin(), px.end()) - 1.0);
        }
        for (int w : cfg_.moment_windows)
            out.add("skew_" + std::to_string(w) + "d", stats::moments(trailing(static_cast<std::size_t>(w), t)).skew);
        for (int w : cfg_.moment_windows)
            out.add("kurt_" + std::to_string(w) + "d", stats::moments(trailing(static_cast<std::size_t>(w), t)).kurtosis);
        {
            std::vector<double> inner;
            for (int k = cfg_.vov_outer - 1; k >= 0; --k) inner.push_back(vol(cfg_.vov_inner, t - static_cast<std::size_t>(k)));
            out.add("vol_of_vol_" + std::to_string(cfg_.vov_outer) + "d", stats::stddev(inner, 1));
        }
        {
            const auto r = panel_->returns().row(static_cast<Eigen::Index>(t));
            std::vector<double> cross(static_cast<std::size_t>(r.size()));
            for (Eigen::Index i = 0; i < r.size(); ++i) cross[static_cast<std::size_t>(i)] = r(i);
            out.add("dispersion", stats::stddev(cross, 1));
        }
        return out;
    }

private:
    const PricePanel* panel_;
    std::size_t column_;
    IndicatorConfig cfg_;
    std::vector<double> closes_;
    std::vector<double> returns_;
    std::vector<double> garch_;
    std::vector<double> rsi_;
};

inline NamedValues traditional_row(const PricePanel& panel, const std::string& index_symbol, std::size_t t,
                                   const IndicatorConfig& cfg = {}) {
    return IndicatorTape(panel, index_symbol, cfg).row(t);
}

}  // namespace orca
