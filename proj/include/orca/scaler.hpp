#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

#include "orca/errors.hpp"
#include "orca/stats.hpp"

namespace orca {

/// Per-feature median and inter-quartile range, fitted on training rows only.
struct ScalerState {
    Eigen::VectorXd median;
    Eigen::VectorXd iqr;
};

inline constexpr double kIqrFloor = 1e-12;

inline ScalerState fit_scaler(const Eigen::MatrixXd& train) {
    if (train.rows() < 2) throw DataError("robust scaler needs at least two training rows");
    ScalerState s;
    s.median.resize(train.cols());
    s.iqr.resize(train.cols());
    std::vector<double> col;
    for (Eigen::Index j = 0; j < train.cols(); ++j) {
        col.clear();
        for (Eigen::Index i = 0; i < train.rows(); ++i)
            if (std::isfinite(train(i, j))) col.push_back(train(i, j));
        std::sort(col.begin(), col.end());
        if (col.empty()) {
            s.median(j) = 0.0;
            s.iqr(j) = 1.0;
            continue;
        }
        s.median(j) = stats::sorted_quantile(col, 0.5);
        s.iqr(j) = std::max(stats::sorted_quantile(col, 0.75) - stats::sorted_quantile(col, 0.25), kIqrFloor);
    }
    return s;
}

/// (x - median) / IQR; non-finite inputs or outputs become 0.
inline Eigen::MatrixXd apply_scaler(const ScalerState& s, const Eigen::MatrixXd& x) {
    if (x.cols() != s.median.size()) throw DataError("scaler width mismatch");
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double v = (x(i, j) - s.median(j)) / s.iqr(j);
            out(i, j) = std::isfinite(v) ? v : 0.0;
        }
    }
    return out;
}

inline std::vector<double> apply_scaler(const ScalerState& s, std::span<const double> row) {
    if (row.size() != static_cast<std::size_t>(s.median.size())) throw DataError("scaler width mismatch");
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const double v = (row[j] - s.median(jj)) / s.iqr(jj);
        out[j] = std::isfinite(v) ? v : 0.0;
    }
    return out;
}

}  // namespace orca
