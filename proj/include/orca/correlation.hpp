#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "orca/errors.hpp"
#include "orca/market_data.hpp"

namespace orca {

enum class Estimator { Roll60, Roll120, Ewm30 };

inline const char* estimator_name(Estimator e) {
    switch (e) {
        case Estimator::Roll60: return "roll60";
        case Estimator::Roll120: return "roll120";
        case Estimator::Ewm30: return "ewm30";
    }
    return "?";
}

inline const std::vector<Estimator>& all_estimators() {
    static const std::vector<Estimator> e = {Estimator::Roll60, Estimator::Roll120, Estimator::Ewm30};
    return e;
}

/// One n x n correlation estimate. `effective_t` is the sample length fed to
/// the Marchenko-Pastur edge. `degenerate[i]` marks assets with zero variance
/// in the window; their off-diagonal entries are 0.
struct CorrelationSnapshot {
    Eigen::MatrixXd matrix;
    Estimator estimator = Estimator::Roll60;
    Date as_of;
    int effective_t = 0;
    std::vector<bool> degenerate;

    Eigen::Index size() const noexcept { return matrix.rows(); }
    bool has_degenerate() const {
        for (bool d : degenerate)
            if (d) return true;
        return false;
    }
};

namespace detail {

constexpr double kZeroVariance = 1e-20;

// Turns a covariance into a correlation, then symmetrises, pins the diagonal
// to one and clips to [-1, 1].
inline void finalize_correlation(const Eigen::MatrixXd& cov, CorrelationSnapshot& snap) {
    const Eigen::Index n = cov.rows();
    snap.degenerate.assign(static_cast<std::size_t>(n), false);
    Eigen::VectorXd sd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = cov(i, i);
        snap.degenerate[static_cast<std::size_t>(i)] = !(v > kZeroVariance);
        sd(i) = std::sqrt(std::max(v, 0.0));
    }
    Eigen::MatrixXd c(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (snap.degenerate[static_cast<std::size_t>(i)] || snap.degenerate[static_cast<std::size_t>(j)])
                c(i, j) = 0.0;
            else
                c(i, j) = cov(i, j) / (sd(i) * sd(j));
        }
    }
    snap.matrix = 0.5 * (c + c.transpose());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) snap.matrix(i, j) = std::clamp(snap.matrix(i, j), -1.0, 1.0);
        snap.matrix(i, i) = 1.0;
    }
}

}  // namespace detail

/// Pearson correlation of a T x n block, demeaned with the block's own means.
template <typename Derived>
Eigen::MatrixXd pearson_covariance(const Eigen::MatrixBase<Derived>& block) {
    const Eigen::RowVectorXd mu = block.colwise().mean();
    const Eigen::MatrixXd centered = block.rowwise() - mu;
    return (centered.transpose() * centered) / static_cast<double>(block.rows());
}

inline CorrelationSnapshot rolling_correlation(const PricePanel& panel, std::size_t end_index,
                                               std::size_t length) {
    const auto block = window(panel, end_index, length);
    CorrelationSnapshot snap;
    snap.estimator = length == 120 ? Estimator::Roll120 : Estimator::Roll60;
    snap.as_of = panel.dates()[end_index];
    snap.effective_t = static_cast<int>(length);
    detail::finalize_correlation(pearson_covariance(block), snap);
    return snap;
}

struct EwmOptions {
    double half_life = 30.0;
    std::size_t warmup = 60;       // minimum return rows before the first estimate
    std::size_t max_lookback = 0;  // 0 = use the whole history
    int effective_t = 60;          // 2 x half-life, used for the MP edge
};

/// Decay per observation for a given half-life: weight halves every `half_life` rows.
inline double ewm_decay(double half_life) { return std::pow(2.0, -1.0 / half_life); }

/// Weights for a window of `length` rows, oldest first, most recent weight 1.
inline Eigen::VectorXd ewm_weights(std::size_t length, double half_life) {
    Eigen::VectorXd w(static_cast<Eigen::Index>(length));
    const double decay = ewm_decay(half_life);
    double cur = 1.0;
    for (Eigen::Index k = static_cast<Eigen::Index>(length) - 1; k >= 0; --k) {
        w(k) = cur;
        cur *= decay;
    }
    return w;
}

/// Exponentially weighted correlation: weighted means and weighted second
/// moments of the demeaned returns, normalised by the marginal deviations.
inline CorrelationSnapshot ewm_correlation(const PricePanel& panel, std::size_t end_index,
                                           const EwmOptions& opts = {}) {
    if (end_index >= panel.size() || end_index < opts.warmup)
        throw WindowUnavailable("EWM warm-up of " + std::to_string(opts.warmup) + " rows unavailable at row " +
                                std::to_string(end_index));
    std::size_t length = end_index;  // rows 1..end_index
    if (opts.max_lookback > 0) length = std::min(length, opts.max_lookback);
    const auto block = window(panel, end_index, length);
    const Eigen::VectorXd w = ewm_weights(length, opts.half_life);
    const double wsum = w.sum();
    const Eigen::RowVectorXd mu = (w.transpose() * block) / wsum;
    const Eigen::MatrixXd centered = block.rowwise() - mu;
    const Eigen::MatrixXd cov = (centered.transpose() * w.asDiagonal() * centered) / wsum;

    CorrelationSnapshot snap;
    snap.estimator = Estimator::Ewm30;
    snap.as_of = panel.dates()[end_index];
    snap.effective_t = opts.effective_t;
    detail::finalize_correlation(cov, snap);
    return snap;
}

/// Earliest row at which every estimator is available.
inline std::size_t correlation_warmup(const EwmOptions& ewm = {}) {
    return std::max<std::size_t>(120, ewm.warmup);
}

inline CorrelationSnapshot estimate(const PricePanel& panel, std::size_t end_index, Estimator e,
                                    const EwmOptions& ewm = {}) {
    switch (e) {
        case Estimator::Roll60: return rolling_correlation(panel, end_index, 60);
        case Estimator::Roll120: return rolling_correlation(panel, end_index, 120);
        case Estimator::Ewm30: return ewm_correlation(panel, end_index, ewm);
    }
    throw ConfigError("unknown estimator");
}

}  // namespace orca
