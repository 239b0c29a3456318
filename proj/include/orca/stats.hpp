#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace orca::stats {

inline double mean(std::span<const double> x) {
    if (x.empty()) return 0.0;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Standard deviation with `ddof` degrees of freedom removed (0 = population, 1 = sample).
inline double stddev(std::span<const double> x, int ddof = 1) {
    const auto n = static_cast<double>(x.size());
    if (n - ddof <= 0) return 0.0;
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / (n - ddof));
}

struct Moments {
    double mean = 0.0;
    double std = 0.0;       // population
    double skew = 0.0;      // population moment ratio
    double kurtosis = 0.0;  // excess
};

// Population moment ratios; skew and kurtosis are 0 when the variance vanishes.
inline Moments moments(std::span<const double> x) {
    Moments out;
    if (x.empty()) return out;
    const auto n = static_cast<double>(x.size());
    out.mean = mean(x);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - out.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    out.std = std::sqrt(m2);
    if (m2 > 1e-300) {
        out.skew = m3 / std::pow(m2, 1.5);
        out.kurtosis = m4 / (m2 * m2) - 3.0;
    }
    return out;
}

// Linearly interpolated quantile of an already sorted range (numpy's default rule).
inline double sorted_quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    return sorted_quantile(values, q);
}

inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

// (# of values <= current) / window.size(); `window` must contain `current`.
inline double percentile_rank(std::span<const double> window, double current) {
    if (window.empty()) return 0.0;
    std::size_t count = 0;
    for (double v : window) count += (v <= current) ? 1 : 0;
    return static_cast<double>(count) / static_cast<double>(window.size());
}

}  // namespace orca::stats
