#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "orca/errors.hpp"
#include "orca/features.hpp"
#include "orca/forest.hpp"
#include "orca/labeling.hpp"
#include "orca/metrics.hpp"
#include "orca/scaler.hpp"

namespace orca {

enum class Task { Rally, Crash };

inline const char* task_name(Task t) { return t == Task::Rally ? "rally" : "crash"; }

/// Out-of-sample probabilities for one task, in date order.
struct PredictionSet {
    Task task = Task::Rally;
    std::vector<Date> dates;
    std::vector<std::size_t> rows;
    std::vector<int> fold;
    std::vector<double> prob;
    std::vector<std::uint8_t> label;

    std::size_t size() const noexcept { return dates.size(); }
};

struct TaskMetrics {
    bool defined = false;  // false when the labels hold a single class
    double auc_roc = std::numeric_limits<double>::quiet_NaN();
    double average_precision = std::numeric_limits<double>::quiet_NaN();
    BestF1 best_f1{};
    std::size_t n = 0;
    std::size_t positives = 0;
};

struct FoldMetrics {
    int fold = 0;
    TaskMetrics rally;
    TaskMetrics crash;
};

struct MetricReport {
    TaskMetrics rally;  // pooled over every test window
    TaskMetrics crash;
    double bcd_auc = std::numeric_limits<double>::quiet_NaN();
    std::vector<FoldMetrics> folds;
    std::vector<int> excluded_rally;  // folds whose test labels hold one class
    std::vector<int> excluded_crash;
    double mean_fold_auc_rally = std::numeric_limits<double>::quiet_NaN();
    double mean_fold_auc_crash = std::numeric_limits<double>::quiet_NaN();
};

inline TaskMetrics score_task(std::span<const double> prob, std::span<const std::uint8_t> label) {
    TaskMetrics m;
    m.n = prob.size();
    for (auto l : label) m.positives += l;
    if (m.positives == 0 || m.positives == m.n) return m;
    m.defined = true;
    m.auc_roc = auc_roc(prob, label);
    m.average_precision = average_precision(prob, label);
    m.best_f1 = best_f1(prob, label);
    return m;
}

/// What a fold's fit actually touched, recorded by the guarded row accessor.
struct AccessAudit {
    int fold = 0;
    std::size_t train_rows_read = 0;
    std::size_t max_train_row = 0;
    std::size_t max_train_label_row = 0;  // last row any training label looks at
    std::size_t test_start = 0;

    bool clean() const noexcept { return max_train_label_row < test_start; }
};

namespace detail {

// Gathers training rows for a fold, refusing any row whose label window
// reaches the test range.
class GuardedRows {
public:
    GuardedRows(const FeatureMatrix& fm, const TargetSet& targets, const FoldSpec& fold)
        : fm_(fm), targets_(targets), fold_(fold) {
        audit_.fold = fold.id;
        audit_.test_start = fold.test_start;
    }

    std::size_t position(std::size_t row) const {
        const auto k = fm_.position_of_row(row);
        if (k == FeatureMatrix::npos)
            throw DataError("fold " + std::to_string(fold_.id) + ": no features for row " + std::to_string(row));
        return k;
    }

    void train(Eigen::MatrixXd& x, std::vector<std::uint8_t>& rally, std::vector<std::uint8_t>& crash) {
        const auto n = fold_.train_size();
        x.resize(static_cast<Eigen::Index>(n), fm_.values.cols());
        rally.resize(n);
        crash.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t row = fold_.train_start + i;
            const std::size_t label_end = row + static_cast<std::size_t>(targets_.horizon);
            if (label_end >= fold_.test_start || !targets_.has_label(row))
                throw LeakageError("fold " + std::to_string(fold_.id) + ": training row " + std::to_string(row) +
                                   " has a label window reaching row " + std::to_string(label_end));
            x.row(static_cast<Eigen::Index>(i)) = fm_.values.row(static_cast<Eigen::Index>(position(row)));
            rally[i] = targets_.rally[row];
            crash[i] = targets_.crash[row];
            ++audit_.train_rows_read;
            audit_.max_train_row = std::max(audit_.max_train_row, row);
            audit_.max_train_label_row = std::max(audit_.max_train_label_row, label_end);
        }
    }

    // Test features only; labels are attached after prediction.
    Eigen::MatrixXd test() const {
        const auto n = fold_.test_size();
        Eigen::MatrixXd x(static_cast<Eigen::Index>(n), fm_.values.cols());
        for (std::size_t i = 0; i < n; ++i)
            x.row(static_cast<Eigen::Index>(i)) = fm_.values.row(static_cast<Eigen::Index>(position(fold_.test_start + i)));
        return x;
    }

    const AccessAudit& audit() const noexcept { return audit_; }

private:
    const FeatureMatrix& fm_;
    const TargetSet& targets_;
    const FoldSpec& fold_;
    AccessAudit audit_;
};

}  // namespace detail

struct WalkForwardOptions {
    ForestParams forest{};
    std::uint64_t seed = 42;
    unsigned jobs = 1;
};

struct WalkForwardResult {
    FeatureSubset subset = FeatureSubset::Combined;
    std::size_t n_features = 0;
    PredictionSet rally;
    PredictionSet crash;
    MetricReport metrics;
    std::vector<AccessAudit> audits;
};

/// Forest seed for (fold, task); independent of the feature subset so
/// ablations differ only in the columns consumed.
inline std::uint64_t fold_seed(std::uint64_t seed, int fold, Task task) {
    SplitMix64 g(seed ^ (0xA24BAED4963EE407ULL * static_cast<std::uint64_t>(2 * fold + (task == Task::Crash ? 1 : 0) + 1)));
    return g();
}

inline MetricReport score_predictions(const PredictionSet& rally, const PredictionSet& crash,
                                      const std::vector<FoldSpec>& folds) {
    MetricReport r;
    r.rally = score_task(rally.prob, rally.label);
    r.crash = score_task(crash.prob, crash.label);
    if (r.rally.defined && r.crash.defined) r.bcd_auc = bcd_auc(r.rally.auc_roc, r.crash.auc_roc);
    double sum_r = 0, sum_c = 0;
    int n_r = 0, n_c = 0;
    for (const auto& f : folds) {
        FoldMetrics fmx;
        fmx.fold = f.id;
        std::vector<double> pr, pc;
        std::vector<std::uint8_t> lr, lc;
        for (std::size_t i = 0; i < rally.size(); ++i)
            if (rally.fold[i] == f.id) {
                pr.push_back(rally.prob[i]);
                lr.push_back(rally.label[i]);
            }
        for (std::size_t i = 0; i < crash.size(); ++i)
            if (crash.fold[i] == f.id) {
                pc.push_back(crash.prob[i]);
                lc.push_back(crash.label[i]);
            }
        fmx.rally = score_task(pr, lr);
        fmx.crash = score_task(pc, lc);
        if (fmx.rally.defined) {
            sum_r += fmx.rally.auc_roc;
            ++n_r;
        } else {
            r.excluded_rally.push_back(f.id);
        }
        if (fmx.crash.defined) {
            sum_c += fmx.crash.auc_roc;
            ++n_c;
        } else {
            r.excluded_crash.push_back(f.id);
        }
        r.folds.push_back(fmx);
    }
    if (n_r) r.mean_fold_auc_rally = sum_r / n_r;
    if (n_c) r.mean_fold_auc_crash = sum_c / n_c;
    return r;
}

/// Per fold: fit the scaler and both forests on training rows, predict the
/// test window. Predictions are pooled in date order and scored.
inline WalkForwardResult run_walk_forward(const FeatureMatrix& features, const TargetSet& targets,
                                          const std::vector<FoldSpec>& folds, FeatureSubset subset,
                                          const WalkForwardOptions& opts = {}) {
    assert_no_leakage(folds, targets.horizon);
    const FeatureMatrix fm = features.select(subset);
    if (fm.values.cols() == 0) throw ConfigError(std::string("feature subset '") + subset_name(subset) + "' is empty");
    WalkForwardResult out;
    out.subset = subset;
    out.n_features = static_cast<std::size_t>(fm.values.cols());
    out.rally.task = Task::Rally;
    out.crash.task = Task::Crash;
    for (const auto& f : folds) {
        detail::GuardedRows guard(fm, targets, f);
        Eigen::MatrixXd x_train;
        std::vector<std::uint8_t> y_rally, y_crash;
        guard.train(x_train, y_rally, y_crash);
        const ScalerState scaler = fit_scaler(x_train);
        const Eigen::MatrixXd xs_train = apply_scaler(scaler, x_train);
        const Eigen::MatrixXd xs_test = apply_scaler(scaler, guard.test());
        out.audits.push_back(guard.audit());

        auto fit = [&](Task task, const std::vector<std::uint8_t>& y) {
            try {
                return fit_forest(xs_train, y, fold_seed(opts.seed, f.id, task), opts.forest, opts.jobs, fm.manifest.version);
            } catch (const DataError& e) {
                throw DataError("fold " + std::to_string(f.id) + " (" + task_name(task) + "): " + e.what());
            }
        };
        const ForestModel rally_model = fit(Task::Rally, y_rally);
        const ForestModel crash_model = fit(Task::Crash, y_crash);
        const auto pr = rally_model.predict_proba(xs_test);
        const auto pc = crash_model.predict_proba(xs_test);
        for (std::size_t i = 0; i < f.test_size(); ++i) {
            const std::size_t row = f.test_start + i;
            if (!targets.has_label(row))
                throw DataError("fold " + std::to_string(f.id) + ": test row " + std::to_string(row) + " has no label");
            for (auto* ps : {&out.rally, &out.crash}) {
                ps->dates.push_back(targets.dates[row]);
                ps->rows.push_back(row);
                ps->fold.push_back(f.id);
            }
            out.rally.prob.push_back(pr[i]);
            out.rally.label.push_back(targets.rally[row]);
            out.crash.prob.push_back(pc[i]);
            out.crash.label.push_back(targets.crash[row]);
        }
    }
    out.metrics = score_predictions(out.rally, out.crash, folds);
    return out;
}

/// The three ablation rows on identical folds and seeds.
inline std::vector<WalkForwardResult> run_ablations(const FeatureMatrix& features, const TargetSet& targets,
                                                    const std::vector<FoldSpec>& folds, const WalkForwardOptions& opts = {}) {
    std::vector<WalkForwardResult> out;
    for (auto s : {FeatureSubset::Traditional, FeatureSubset::Spectral, FeatureSubset::Combined})
        out.push_back(run_walk_forward(features, targets, folds, s, opts));
    return out;
}

// ---------------------------------------------------------------------------
// Predictions CSV: date,task,fold,probability,label

inline void write_predictions_csv(std::ostream& out, const std::vector<const PredictionSet*>& sets,
                                  const std::vector<std::string>& header_comments = {}) {
    for (const auto& c : header_comments) out << "# " << c << '\n';
    out << "date,task,fold,probability,label\n";
    out << std::setprecision(17);
    for (const auto* ps : sets)
        for (std::size_t i = 0; i < ps->size(); ++i)
            out << ps->dates[i] << ',' << task_name(ps->task) << ',' << ps->fold[i] << ',' << ps->prob[i] << ','
                << static_cast<int>(ps->label[i]) << '\n';
}

struct PredictionPair {
    PredictionSet rally;
    PredictionSet crash;
};

inline PredictionPair read_predictions_csv(std::istream& in) {
    PredictionPair out;
    out.rally.task = Task::Rally;
    out.crash.task = Task::Crash;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "date,task,fold,probability,label") throw DataError("predictions: unexpected header '" + line + "'");
            header = true;
            continue;
        }
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 5) throw DataError("predictions: malformed line '" + line + "'");
        PredictionSet& ps = cells[1] == "rally" ? out.rally : cells[1] == "crash" ? out.crash
                                                                                  : throw DataError("predictions: unknown task '" + cells[1] + "'");
        try {
            ps.dates.push_back(cells[0]);
            ps.fold.push_back(std::stoi(cells[2]));
            ps.prob.push_back(std::stod(cells[3]));
            ps.label.push_back(static_cast<std::uint8_t>(std::stoi(cells[4])));
        } catch (const std::logic_error&) {
            throw DataError("predictions: unparseable line '" + line + "'");
        }
    }
    if (out.rally.dates != out.crash.dates) throw DataError("predictions: rally and crash dates differ");
    return out;
}

}  // namespace orca
