#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "orca/correlation.hpp"
#include "orca/errors.hpp"
#include "orca/jacobi.hpp"
#include "orca/stats.hpp"

namespace orca {

/// Ordered (name, value) pairs produced by one feature family.
struct NamedValues {
    std::vector<std::string> names;
    std::vector<double> values;
    std::vector<std::uint8_t> flagged;  // 1 where the value is a fallback (warm-up, zero divisor)

    void add(std::string name, double value, bool flag = false) {
        names.push_back(std::move(name));
        values.push_back(value);
        flagged.push_back(flag ? 1 : 0);
    }
    void append(const NamedValues& other, const std::string& prefix = {}) {
        for (std::size_t i = 0; i < other.names.size(); ++i)
            add(prefix + other.names[i], other.values[i], other.flagged[i] != 0);
    }
    std::size_t size() const noexcept { return values.size(); }
    double at(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return values[i];
        throw std::out_of_range("no feature named " + name);
    }
    bool is_flagged(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return flagged[i] != 0;
        throw std::out_of_range("no feature named " + name);
    }
};

/// Eigenvalues floored at zero, sorted descending, with the sign-fixed
/// dominant eigenvector. `vectors` keeps the full basis for reconstruction.
struct Spectrum {
    Eigen::VectorXd eigenvalues;
    Eigen::VectorXd first_eigenvector;
    Eigen::VectorXd raw_eigenvalues;
    Eigen::MatrixXd vectors;
};

inline constexpr double kRatioCap = 1e6;
inline constexpr double kRatioFloor = 1e-12;
inline constexpr std::array<double, 3> kTopologyThresholds = {0.3, 0.5, 0.7};

inline Spectrum eigendecompose(const Eigen::MatrixXd& matrix, const std::string& as_of = {}) {
    const auto eig = jacobi_eigen(matrix);
    if (!eig.converged)
        throw NumericalError("Jacobi eigensolver did not converge" + (as_of.empty() ? "" : " at " + as_of));
    Spectrum s;
    s.raw_eigenvalues = eig.values;
    s.eigenvalues = eig.values.cwiseMax(0.0);
    s.vectors = eig.vectors;
    s.first_eigenvector = eig.vectors.col(0);
    Eigen::Index arg = 0;
    s.first_eigenvector.cwiseAbs().maxCoeff(&arg);
    if (s.first_eigenvector(arg) < 0) s.first_eigenvector = -s.first_eigenvector;
    s.first_eigenvector.normalize();
    return s;
}

inline Spectrum eigendecompose(const CorrelationSnapshot& snapshot) {
    return eigendecompose(snapshot.matrix, snapshot.as_of);
}

inline double capped_ratio(double num, double den) { return den < kRatioFloor ? kRatioCap : std::min(num / den, kRatioCap); }

/// Absorption ratios, entropy, effective rank, gap, condition number,
/// Marchenko-Pastur excess and spectral moments.
inline NamedValues eigen_features(const Spectrum& s, int effective_t) {
    const auto& lam = s.eigenvalues;
    const Eigen::Index n = lam.size();
    if (n < 2) throw NumericalError("eigen features need at least two assets");
    const double total = lam.sum();
    if (!(total > 0)) throw NumericalError("eigenvalue sum is not positive");

    auto absorption = [&](Eigen::Index k) { return lam.head(std::min(k, n)).sum() / total; };
    double entropy = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double p = lam(i) / total;
        if (p > 0) entropy -= p * std::log(p);
    }
    const double mp_edge = std::pow(1.0 + std::sqrt(static_cast<double>(n) / effective_t), 2);
    std::vector<double> values(lam.data(), lam.data() + n);
    const auto m = stats::moments(values);

    NamedValues out;
    out.add("lambda_1", lam(0));
    out.add("lambda_1_share", lam(0) / static_cast<double>(n));
    out.add("ar1", absorption(1));
    out.add("ar3", absorption(3));
    out.add("ar5", absorption(5));
    out.add("entropy", entropy);
    out.add("eff_rank", std::exp(entropy));
    out.add("spectral_gap", capped_ratio(lam(0), lam(1)), lam(1) < kRatioFloor);
    out.add("condition_number", capped_ratio(lam(0), lam(n - 1)), lam(n - 1) < kRatioFloor);
    out.add("mp_excess", lam(0) - mp_edge);
    out.add("eig_std", m.std);
    out.add("eig_skew", m.skew);
    out.add("eig_kurt", m.kurtosis);
    return out;
}

/// Concentration of the normalised absolute loadings of the dominant eigenvector.
inline NamedValues eigenvector_features(const Spectrum& s) {
    const Eigen::VectorXd a = s.first_eigenvector.cwiseAbs();
    const double total = a.sum();
    if (!(total > 0)) throw NumericalError("dominant eigenvector is zero");
    std::vector<double> load(static_cast<std::size_t>(a.size()));
    for (Eigen::Index i = 0; i < a.size(); ++i) load[static_cast<std::size_t>(i)] = a(i) / total;

    double hhi = 0.0, entropy = 0.0;
    for (double v : load) {
        hhi += v * v;
        if (v > 0) entropy -= v * std::log(v);
    }
    std::vector<double> sorted = load;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const std::size_t q = sorted.size() / 4;
    double dispersion = 0.0;
    if (q > 0) {
        double top = 0.0, bottom = 0.0;
        for (std::size_t i = 0; i < q; ++i) {
            top += sorted[i];
            bottom += sorted[sorted.size() - 1 - i];
        }
        dispersion = (top - bottom) / static_cast<double>(q);
    }
    NamedValues out;
    out.add("loading_hhi", hhi);
    out.add("loading_entropy", entropy);
    out.add("loading_max", sorted.front());
    out.add("loading_dispersion", dispersion);
    return out;
}

inline std::string threshold_tag(double tau) {
    const int pct = static_cast<int>(std::lround(tau * 100));
    return "t" + std::string(pct < 10 ? "0" : "") + std::to_string(pct);
}

/// Degree and clustering statistics of the graph |C_ij| > tau (no self loops).
struct GraphStats {
    double edge_density = 0.0;
    double mean_degree = 0.0;
    double degree_std = 0.0;
    double max_degree = 0.0;
    double isolated = 0.0;
    double centralisation = 0.0;
    double clustering = 0.0;
};

inline GraphStats threshold_graph(const Eigen::MatrixXd& c, double tau) {
    const Eigen::Index n = c.rows();
    Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j && std::abs(c(i, j)) > tau) adj(i, j) = 1.0;

    const Eigen::VectorXd degree = adj.rowwise().sum();
    GraphStats g;
    const double nd = static_cast<double>(n);
    g.edge_density = n > 1 ? degree.sum() / (nd * (nd - 1)) : 0.0;  // 2|E| / (n(n-1))
    g.mean_degree = degree.mean();
    g.degree_std = std::sqrt((degree.array() - g.mean_degree).square().mean());
    g.max_degree = degree.maxCoeff();
    g.isolated = static_cast<double>((degree.array() == 0.0).count());
    g.centralisation = n > 2 ? (g.max_degree - degree.array()).sum() / ((nd - 1) * (nd - 2)) : 0.0;

    // (A^2)_jk counts common neighbours of j and k; summing it over edges j<k
    // counts every triangle once per corner.
    const Eigen::MatrixXd paths = adj * adj;
    double closed = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = j + 1; k < n; ++k)
            if (adj(j, k) != 0.0) closed += paths(j, k);
    double triples = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) triples += degree(i) * (degree(i) - 1) / 2.0;
    g.clustering = triples > 0 ? closed / triples : 0.0;
    return g;
}

inline NamedValues topology_features(const Eigen::MatrixXd& c) {
    NamedValues out;
    for (double tau : kTopologyThresholds) {
        const auto g = threshold_graph(c, tau);
        const auto tag = threshold_tag(tau);
        out.add("edge_density_" + tag, g.edge_density);
        out.add("mean_degree_" + tag, g.mean_degree);
        out.add("degree_std_" + tag, g.degree_std);
        out.add("max_degree_" + tag, g.max_degree);
        out.add("isolated_" + tag, g.isolated);
        out.add("centralisation_" + tag, g.centralisation);
        out.add("clustering_" + tag, g.clustering);
    }
    return out;
}

/// Distribution of the off-diagonal absolute correlations.
inline NamedValues aggregate_features(const Eigen::MatrixXd& c) {
    const Eigen::Index n = c.rows();
    std::vector<double> offdiag;
    offdiag.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) offdiag.push_back(std::abs(c(i, j)));
    NamedValues out;
    if (offdiag.empty()) {
        for (const char* name : {"abs_corr_mean", "abs_corr_median", "abs_corr_max", "abs_corr_std",
                                 "abs_corr_skew", "frac_abs_corr_gt_050", "frac_abs_corr_gt_070"})
            out.add(name, 0.0, true);
        return out;
    }
    const auto m = stats::moments(offdiag);
    double above50 = 0, above70 = 0;
    for (double v : offdiag) {
        above50 += v > 0.5;
        above70 += v > 0.7;
    }
    const double count = static_cast<double>(offdiag.size());
    out.add("abs_corr_mean", m.mean);
    out.add("abs_corr_median", stats::median(offdiag));
    out.add("abs_corr_max", *std::max_element(offdiag.begin(), offdiag.end()));
    out.add("abs_corr_std", m.std);
    out.add("abs_corr_skew", m.skew);
    out.add("frac_abs_corr_gt_050", above50 / count);
    out.add("frac_abs_corr_gt_070", above70 / count);
    return out;
}

inline NamedValues topology_features(const CorrelationSnapshot& s) { return topology_features(s.matrix); }

/// All per-estimator static features of one snapshot, in manifest order.
inline NamedValues static_spectral_features(const CorrelationSnapshot& snap) {
    const auto spectrum = eigendecompose(snap);
    NamedValues out;
    out.append(eigen_features(spectrum, snap.effective_t));
    out.append(eigenvector_features(spectrum));
    out.append(topology_features(snap.matrix));
    out.append(aggregate_features(snap.matrix));
    return out;
}

// ---------------------------------------------------------------------------
// Temporal dynamics of the key spectral quantities.

inline const std::vector<std::string>& key_quantities() {
    static const std::vector<std::string> q = {"lambda_1", "lambda_1_share", "ar1", "entropy",
                                               "eff_rank", "abs_corr_mean", "edge_density_t50", "clustering_t50"};
    return q;
}

struct DynamicsOptions {
    std::vector<int> horizons = {5, 10, 20};
    int rank_window = 252;
    double z_std_floor = 1e-12;
};

/// Append-only per-quantity histories, one value per evaluation date.
class DynamicsState {
public:
    DynamicsState() : buffers_(key_quantities().size()) {}

    void append(const NamedValues& static_row) {
        for (std::size_t q = 0; q < key_quantities().size(); ++q)
            buffers_[q].push_back(static_row.at(key_quantities()[q]));
    }
    void append(std::span<const double> values) {
        if (values.size() != buffers_.size()) throw std::invalid_argument("dynamics append: wrong width");
        for (std::size_t q = 0; q < buffers_.size(); ++q) buffers_[q].push_back(values[q]);
    }
    std::size_t length() const noexcept { return buffers_.empty() ? 0 : buffers_.front().size(); }
    const std::vector<double>& history(std::size_t q) const { return buffers_.at(q); }

private:
    std::vector<std::vector<double>> buffers_;
};

/// Rate of change, difference and z-score per horizon, acceleration and a
/// trailing percentile rank for each key quantity, using values up to
/// position `t` only. Missing history yields 0 with the flag set.
inline NamedValues dynamics_features(const DynamicsState& state, std::size_t t, const DynamicsOptions& opts = {}) {
    if (t >= state.length()) throw std::out_of_range("dynamics position beyond history");
    NamedValues out;
    const auto& names = key_quantities();
    for (std::size_t q = 0; q < names.size(); ++q) {
        const auto& h = state.history(q);
        const double cur = h[t];
        for (int horizon : opts.horizons) {
            const auto hz = static_cast<std::size_t>(horizon);
            const std::string suffix = "_" + std::to_string(horizon) + "d";
            if (t < hz) {
                out.add(names[q] + "_roc" + suffix, 0.0, true);
                out.add(names[q] + "_diff" + suffix, 0.0, true);
            } else {
                const double past = h[t - hz];
                if (past == 0.0)
                    out.add(names[q] + "_roc" + suffix, 0.0, true);
                else
                    out.add(names[q] + "_roc" + suffix, cur / past - 1.0);
                out.add(names[q] + "_diff" + suffix, cur - past);
            }
            const std::size_t zw = 2 * hz;
            if (t + 1 < zw) {
                out.add(names[q] + "_z" + suffix, 0.0, true);
            } else {
                std::span<const double> win(h.data() + (t + 1 - zw), zw);
                const double mu = stats::mean(win);
                const double sd = stats::stddev(win, 0);
                out.add(names[q] + "_z" + suffix, sd <= opts.z_std_floor ? 0.0 : (cur - mu) / sd);
            }
        }
        if (t < 2)
            out.add(names[q] + "_accel", 0.0, true);
        else
            out.add(names[q] + "_accel", (cur - h[t - 1]) - (h[t - 1] - h[t - 2]));
        const auto rw = static_cast<std::size_t>(opts.rank_window);
        if (t + 1 < rw)
            out.add(names[q] + "_pct_" + std::to_string(opts.rank_window) + "d", 0.0, true);
        else
            out.add(names[q] + "_pct_" + std::to_string(opts.rank_window) + "d",
                    stats::percentile_rank(std::span<const double>(h.data() + (t + 1 - rw), rw), cur));
    }
    return out;
}

}  // namespace orca
