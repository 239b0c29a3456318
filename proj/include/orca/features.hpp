#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "orca/correlation.hpp"
#include "orca/errors.hpp"
#include "orca/hash.hpp"
#include "orca/market_data.hpp"
#include "orca/parallel.hpp"
#include "orca/spectral.hpp"
#include "orca/traditional.hpp"

namespace orca {

enum class FeatureFamily { Eigen, Eigenvector, Topology, Aggregate, Dynamics, Traditional };

inline const char* family_name(FeatureFamily f) {
    switch (f) {
        case FeatureFamily::Eigen: return "eigen";
        case FeatureFamily::Eigenvector: return "eigenvector";
        case FeatureFamily::Topology: return "topology";
        case FeatureFamily::Aggregate: return "aggregate";
        case FeatureFamily::Dynamics: return "dynamics";
        case FeatureFamily::Traditional: return "traditional";
    }
    return "?";
}

inline FeatureFamily parse_family(const std::string& s) {
    for (auto f : {FeatureFamily::Eigen, FeatureFamily::Eigenvector, FeatureFamily::Topology,
                   FeatureFamily::Aggregate, FeatureFamily::Dynamics, FeatureFamily::Traditional})
        if (s == family_name(f)) return f;
    throw DataError("unknown feature family '" + s + "'");
}

enum class FeatureSubset { Traditional, Spectral, Combined };

inline const char* subset_name(FeatureSubset s) {
    switch (s) {
        case FeatureSubset::Traditional: return "traditional";
        case FeatureSubset::Spectral: return "spectral";
        case FeatureSubset::Combined: return "combined";
    }
    return "?";
}

inline FeatureSubset parse_subset(const std::string& s) {
    if (s == "traditional") return FeatureSubset::Traditional;
    if (s == "spectral") return FeatureSubset::Spectral;
    if (s == "combined") return FeatureSubset::Combined;
    throw ConfigError("unknown feature subset '" + s + "' (traditional|spectral|combined)");
}

inline bool in_subset(FeatureFamily f, FeatureSubset s) {
    if (s == FeatureSubset::Combined) return true;
    return (f == FeatureFamily::Traditional) == (s == FeatureSubset::Traditional);
}

struct FeatureInfo {
    std::string name;
    FeatureFamily family = FeatureFamily::Eigen;
    std::string estimator;  // "roll60", "roll120", "ewm30", or "index" for traditional

    bool operator==(const FeatureInfo&) const = default;
};

/// Ordered feature identities; the version string fingerprints the list.
struct FeatureManifest {
    std::vector<FeatureInfo> entries;
    std::string version;

    std::size_t size() const noexcept { return entries.size(); }

    void seal() {
        std::string blob;
        for (const auto& e : entries) blob += e.name + '\t' + family_name(e.family) + '\t' + e.estimator + '\n';
        version = "orca-fm1-" + hex64(fnv1a64(blob)).substr(0, 12);
    }

    std::vector<std::size_t> columns(FeatureSubset subset) const {
        std::vector<std::size_t> cols;
        for (std::size_t i = 0; i < entries.size(); ++i)
            if (in_subset(entries[i].family, subset)) cols.push_back(i);
        return cols;
    }

    std::size_t count(FeatureFamily f) const {
        std::size_t c = 0;
        for (const auto& e : entries) c += e.family == f;
        return c;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& e : entries) out.push_back(e.name);
        return out;
    }

    void write(std::ostream& out) const {
        out << "# manifest_version=" << version << "\n# features=" << entries.size() << "\nname\tfamily\testimator\n";
        for (const auto& e : entries) out << e.name << '\t' << family_name(e.family) << '\t' << e.estimator << '\n';
    }

    static FeatureManifest read(std::istream& in) {
        FeatureManifest m;
        std::string line, expected_version;
        while (std::getline(in, line)) {
            if (line.rfind("# manifest_version=", 0) == 0) {
                expected_version = line.substr(19);
                continue;
            }
            if (line.empty() || line[0] == '#' || line == "name\tfamily\testimator") continue;
            std::istringstream ls(line);
            FeatureInfo e;
            std::string fam;
            if (!std::getline(ls, e.name, '\t') || !std::getline(ls, fam, '\t') || !std::getline(ls, e.estimator))
                throw DataError("malformed manifest line: " + line);
            e.family = parse_family(fam);
            m.entries.push_back(std::move(e));
        }
        m.seal();
        if (!expected_version.empty() && expected_version != m.version)
            throw DataError("manifest version mismatch: file says " + expected_version + ", content hashes to " + m.version);
        return m;
    }
};

/// One assembled feature vector.
struct FeatureRow {
    Date as_of;
    NamedValues values;
    std::string manifest_version;
};

/// Date-indexed feature rows. `rows[k]` is the panel row of `dates[k]`.
struct FeatureMatrix {
    std::vector<Date> dates;
    std::vector<std::size_t> rows;
    Eigen::MatrixXd values;  // dates x features
    std::vector<std::uint32_t> flagged_per_column;
    FeatureManifest manifest;

    std::size_t size() const noexcept { return dates.size(); }

    // Position of panel row `row`, or npos.
    std::size_t position_of_row(std::size_t row) const {
        if (rows.empty() || row < rows.front() || row > rows.back()) return npos;
        const std::size_t k = row - rows.front();
        return (k < rows.size() && rows[k] == row) ? k : npos;
    }

    FeatureMatrix select(FeatureSubset subset) const {
        FeatureMatrix out;
        out.dates = dates;
        out.rows = rows;
        const auto cols = manifest.columns(subset);
        out.values.resize(values.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) {
            out.values.col(static_cast<Eigen::Index>(j)) = values.col(static_cast<Eigen::Index>(cols[j]));
            out.manifest.entries.push_back(manifest.entries[cols[j]]);
            if (!flagged_per_column.empty()) out.flagged_per_column.push_back(flagged_per_column[cols[j]]);
        }
        out.manifest.seal();
        return out;
    }

    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
};

struct FeatureOptions {
    std::string index_symbol = "SPY";
    EwmOptions ewm{};
    IndicatorConfig indicators{};
    DynamicsOptions dynamics{};
    Estimator dynamics_estimator = Estimator::Roll60;
    unsigned jobs = 1;
};

/// First panel row with every static feature defined.
inline std::size_t feature_warmup(const FeatureOptions& opts) {
    return std::max(correlation_warmup(opts.ewm), opts.indicators.min_history());
}

inline std::size_t estimator_slot(Estimator e) {
    switch (e) {
        case Estimator::Roll60: return 0;
        case Estimator::Roll120: return 1;
        case Estimator::Ewm30: return 2;
    }
    return 0;
}

inline std::vector<double> key_quantity_values(const NamedValues& static_row) {
    std::vector<double> v;
    for (const auto& q : key_quantities()) v.push_back(static_row.at(q));
    return v;
}

inline FeatureFamily family_of_static(const std::string& name) {
    static const std::vector<std::string> eigen = {"lambda_1", "lambda_1_share", "ar1", "ar3", "ar5", "entropy",
                                                   "eff_rank", "spectral_gap", "condition_number", "mp_excess",
                                                   "eig_std", "eig_skew", "eig_kurt"};
    if (std::find(eigen.begin(), eigen.end(), name) != eigen.end()) return FeatureFamily::Eigen;
    if (name.rfind("loading_", 0) == 0) return FeatureFamily::Eigenvector;
    if (name.rfind("abs_corr_", 0) == 0 || name.rfind("frac_abs_corr_", 0) == 0) return FeatureFamily::Aggregate;
    return FeatureFamily::Topology;
}

/// Concatenates the per-estimator static families (in estimator order) and
/// the dynamics block. Appends the dynamics estimator's key quantities to
/// `state` and computes dynamics at the new tail.
inline FeatureRow assemble_spectral_row(const std::array<CorrelationSnapshot, 3>& snapshots, DynamicsState& state,
                                        const FeatureOptions& opts = {}) {
    const Date& as_of = snapshots[0].as_of;
    for (const auto& s : snapshots)
        if (s.as_of != as_of) throw DataError("snapshots disagree on as-of date");
    FeatureRow row;
    row.as_of = as_of;
    NamedValues dyn_source;
    for (const auto& snap : snapshots) {
        auto statics = static_spectral_features(snap);
        if (snap.estimator == opts.dynamics_estimator) dyn_source = statics;
        row.values.append(statics, std::string(estimator_name(snap.estimator)) + ".");
    }
    if (dyn_source.size() == 0) throw ConfigError("dynamics estimator not among the snapshots");
    state.append(dyn_source);
    row.values.append(dynamics_features(state, state.length() - 1, opts.dynamics),
                      std::string(estimator_name(opts.dynamics_estimator)) + ".");
    return row;
}

/// Builds features for panel rows [warm-up, end_row). Static features are
/// computed in parallel; the dynamics pass is sequential in date order.
inline FeatureMatrix build_features(const PricePanel& panel, const FeatureOptions& opts = {},
                                    std::size_t end_row = std::numeric_limits<std::size_t>::max()) {
    end_row = std::min(end_row, panel.size());
    const std::size_t first = feature_warmup(opts);
    if (end_row <= first) throw InsufficientHistory("panel too short for feature warm-up");
    const std::size_t count = end_row - first;
    const auto& estimators = all_estimators();

    std::vector<std::array<NamedValues, 3>> statics(count);
    std::vector<NamedValues> traditional(count);
    const IndicatorTape tape(panel, opts.index_symbol, opts.indicators);
    parallel_for(count, opts.jobs, [&](std::size_t k) {
        const std::size_t t = first + k;
        for (Estimator e : estimators)
            statics[k][estimator_slot(e)] = static_spectral_features(estimate(panel, t, e, opts.ewm));
        traditional[k] = tape.row(t);
    });

    FeatureMatrix fm;
    DynamicsState state;
    std::vector<std::string> reference_names;
    for (std::size_t k = 0; k < count; ++k) {
        NamedValues row;
        std::vector<FeatureInfo> infos;
        for (Estimator e : estimators) {
            const auto& s = statics[k][estimator_slot(e)];
            row.append(s, std::string(estimator_name(e)) + ".");
            if (k == 0)
                for (const auto& n : s.names) infos.push_back({std::string(estimator_name(e)) + "." + n, family_of_static(n), estimator_name(e)});
        }
        state.append(key_quantity_values(statics[k][estimator_slot(opts.dynamics_estimator)]));
        const auto dyn = dynamics_features(state, k, opts.dynamics);
        const std::string dprefix = std::string(estimator_name(opts.dynamics_estimator)) + ".";
        row.append(dyn, dprefix);
        row.append(traditional[k]);
        if (k == 0) {
            for (const auto& n : dyn.names) infos.push_back({dprefix + n, FeatureFamily::Dynamics, estimator_name(opts.dynamics_estimator)});
            for (const auto& n : traditional[k].names) infos.push_back({n, FeatureFamily::Traditional, "index"});
            fm.manifest.entries = std::move(infos);
            fm.manifest.seal();
            reference_names = row.names;
            fm.values.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(row.size()));
            fm.flagged_per_column.assign(row.size(), 0);
        } else if (row.names != reference_names) {
            throw DataError("feature manifest drift at " + panel.dates()[first + k]);
        }
        for (std::size_t j = 0; j < row.size(); ++j) {
            double v = row.values[j];
            if (!std::isfinite(v)) {
                v = 0.0;
                ++fm.flagged_per_column[j];
            }
            fm.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = v;
            fm.flagged_per_column[j] += row.flagged[j];
        }
        fm.dates.push_back(panel.dates()[first + k]);
        fm.rows.push_back(first + k);
    }
    return fm;
}

// ---------------------------------------------------------------------------
// CSV persistence. Values are written with 17 significant digits so a
// round trip is exact.

inline void write_features_csv(std::ostream& out, const FeatureMatrix& fm, const std::vector<std::string>& header_comments = {}) {
    for (const auto& c : header_comments) out << "# " << c << '\n';
    out << "# manifest_version=" << fm.manifest.version << '\n';
    out << "date,row";
    for (const auto& e : fm.manifest.entries) out << ',' << e.name;
    out << '\n';
    out << std::setprecision(17);
    for (std::size_t k = 0; k < fm.size(); ++k) {
        out << fm.dates[k] << ',' << fm.rows[k];
        for (Eigen::Index j = 0; j < fm.values.cols(); ++j) out << ',' << fm.values(static_cast<Eigen::Index>(k), j);
        out << '\n';
    }
}

/// Reads a feature CSV written by write_features_csv; `manifest` supplies the
/// column identities and must match the header.
inline FeatureMatrix read_features_csv(std::istream& in, const FeatureManifest& manifest) {
    FeatureMatrix fm;
    fm.manifest = manifest;
    std::string line;
    std::vector<std::vector<double>> rows;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto cells = detail::split_csv_line(line);
        if (!header_seen) {
            header_seen = true;
            if (cells.size() != manifest.size() + 2) throw DataError("feature CSV header does not match manifest width");
            for (std::size_t j = 0; j < manifest.size(); ++j)
                if (cells[j + 2] != manifest.entries[j].name)
                    throw DataError("feature CSV column " + cells[j + 2] + " does not match manifest " + manifest.entries[j].name);
            continue;
        }
        if (cells.size() != manifest.size() + 2) throw DataError("feature CSV row width mismatch");
        fm.dates.push_back(cells[0]);
        fm.rows.push_back(static_cast<std::size_t>(std::stoull(cells[1])));
        std::vector<double> v(manifest.size());
        for (std::size_t j = 0; j < v.size(); ++j) v[j] = std::strtod(cells[j + 2].c_str(), nullptr);
        rows.push_back(std::move(v));
    }
    fm.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(manifest.size()));
    for (std::size_t k = 0; k < rows.size(); ++k)
        for (std::size_t j = 0; j < manifest.size(); ++j)
            fm.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = rows[k][j];
    fm.flagged_per_column.assign(manifest.size(), 0);
    return fm;
}

}  // namespace orca
