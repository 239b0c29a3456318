#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "orca/errors.hpp"
#include "orca/market_data.hpp"

namespace orca {

struct TargetOptions {
    int horizon = 10;
    double rally_threshold = 0.03;   // endpoint return must exceed this
    double crash_threshold = -0.07;  // minimum intra-window return must fall below this
};

/// Rally and crash labels per panel row. Rows whose forward window runs past
/// the end of the panel carry no label.
struct TargetSet {
    std::vector<Date> dates;
    std::vector<std::uint8_t> rally;
    std::vector<std::uint8_t> crash;
    int horizon = 10;

    std::size_t size() const noexcept { return dates.size(); }
    bool has_label(std::size_t t) const noexcept { return t + static_cast<std::size_t>(horizon) < dates.size(); }
    std::size_t labeled_count() const noexcept {
        return dates.size() > static_cast<std::size_t>(horizon) ? dates.size() - static_cast<std::size_t>(horizon) : 0;
    }

    double base_rate(const std::vector<std::uint8_t>& labels) const {
        const auto n = labeled_count();
        if (n == 0) return 0.0;
        std::size_t pos = 0;
        for (std::size_t t = 0; t < n; ++t) pos += labels[t];
        return static_cast<double>(pos) / static_cast<double>(n);
    }

    // Sanity warnings when base rates fall outside plausible bounds for real data.
    std::vector<std::string> base_rate_warnings() const {
        std::vector<std::string> w;
        const double r = base_rate(rally), c = base_rate(crash);
        if (r < 0.01 || r > 0.25) w.push_back("rally base rate " + std::to_string(r) + " outside [0.01, 0.25]");
        if (c < 0.001 || c > 0.05) w.push_back("crash base rate " + std::to_string(c) + " outside [0.001, 0.05]");
        return w;
    }
};

inline TargetSet make_targets(std::span<const double> closes, std::vector<Date> dates, const TargetOptions& opts = {}) {
    TargetSet out;
    out.horizon = opts.horizon;
    out.dates = std::move(dates);
    out.rally.assign(closes.size(), 0);
    out.crash.assign(closes.size(), 0);
    const auto h = static_cast<std::size_t>(opts.horizon);
    for (std::size_t t = 0; t + h < closes.size(); ++t) {
        const double entry = closes[t];
        double worst = closes[t + 1];
        for (std::size_t k = 2; k <= h; ++k) worst = std::min(worst, closes[t + k]);
        out.rally[t] = (closes[t + h] / entry - 1.0 > opts.rally_threshold) ? 1 : 0;
        out.crash[t] = (worst / entry - 1.0 < opts.crash_threshold) ? 1 : 0;
    }
    return out;
}

inline TargetSet make_targets(const PricePanel& panel, const std::string& index_symbol, const TargetOptions& opts = {}) {
    const auto col = static_cast<Eigen::Index>(panel.column(index_symbol));
    std::vector<double> closes(panel.size());
    for (std::size_t t = 0; t < panel.size(); ++t) closes[t] = panel.prices()(static_cast<Eigen::Index>(t), col);
    return make_targets(closes, panel.dates(), opts);
}

// ---------------------------------------------------------------------------
// Walk-forward folds. All bounds are inclusive panel row indices, so index
// arithmetic is trading-day arithmetic.

struct FoldSpec {
    int id = 0;
    std::size_t train_start = 0;
    std::size_t train_end = 0;
    std::size_t test_start = 0;
    std::size_t test_end = 0;
    int gap = 10;

    std::size_t train_size() const noexcept { return train_end - train_start + 1; }
    std::size_t test_size() const noexcept { return test_end - test_start + 1; }
};

struct FoldOptions {
    int train_days = 756;  // 3 x 252
    int gap_days = 10;
    int test_days = 126;   // 6 months
    int n_folds = 8;
    bool expanding = false;  // grow the training window back to `first` instead of rolling
    bool strict = false;     // fewer folds than requested is fatal
};

struct FoldLayout {
    std::vector<FoldSpec> folds;
    std::vector<std::string> warnings;
};

/// Lays out sequential folds over rows [first, last] so the final test window
/// ends at `last`, test windows tile consecutively, and each training window
/// ends `gap_days` rows before its test window begins.
inline FoldLayout make_folds(std::size_t first, std::size_t last, const FoldOptions& opts = {}) {
    if (opts.train_days <= 0 || opts.test_days <= 0 || opts.gap_days < 0 || opts.n_folds <= 0)
        throw ConfigError("fold sizes must be positive");
    FoldLayout out;
    const std::size_t span = last >= first ? last - first + 1 : 0;
    const auto train = static_cast<std::size_t>(opts.train_days);
    const auto gap = static_cast<std::size_t>(opts.gap_days);
    const auto test = static_cast<std::size_t>(opts.test_days);
    std::size_t possible = span > train + gap ? (span - train - gap) / test : 0;
    std::size_t count = std::min<std::size_t>(possible, static_cast<std::size_t>(opts.n_folds));
    if (count < static_cast<std::size_t>(opts.n_folds)) {
        const std::string msg = "history supports only " + std::to_string(count) + " of " +
                                std::to_string(opts.n_folds) + " requested folds";
        if (opts.strict || count == 0) throw InsufficientHistory(msg);
        out.warnings.push_back(msg);
    }
    const std::size_t eval_start = last + 1 - count * test;
    for (std::size_t k = 0; k < count; ++k) {
        FoldSpec f;
        f.id = static_cast<int>(k);
        f.gap = opts.gap_days;
        f.test_start = eval_start + k * test;
        f.test_end = f.test_start + test - 1;
        f.train_end = f.test_start - gap - 1;
        f.train_start = opts.expanding ? first : f.train_end + 1 - train;
        out.folds.push_back(f);
    }
    return out;
}

/// Throws LeakageError if any training label's forward window reaches the
/// test range, i.e. unless train_end + horizon < test_start.
inline void assert_no_leakage(const FoldSpec& f, int horizon) {
    if (f.train_end + static_cast<std::size_t>(horizon) >= f.test_start)
        throw LeakageError("fold " + std::to_string(f.id) + ": training labels through row " +
                           std::to_string(f.train_end + static_cast<std::size_t>(horizon)) +
                           " overlap test range starting at row " + std::to_string(f.test_start));
    if (f.train_start > f.train_end || f.test_start > f.test_end)
        throw LeakageError("fold " + std::to_string(f.id) + ": empty range");
}

inline void assert_no_leakage(const std::vector<FoldSpec>& folds, int horizon) {
    for (std::size_t k = 0; k < folds.size(); ++k) {
        assert_no_leakage(folds[k], horizon);
        if (k > 0 && folds[k].test_start != folds[k - 1].test_end + 1)
            throw LeakageError("fold " + std::to_string(folds[k].id) + ": test windows not consecutive");
    }
}

}  // namespace orca
