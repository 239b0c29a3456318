#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "orca/errors.hpp"

namespace orca {

/// ISO-8601 calendar date ("YYYY-MM-DD"); lexicographic order is chronological.
using Date = std::string;

inline bool is_iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
        if (s[i] < '0' || s[i] > '9') return false;
    const int month = std::stoi(s.substr(5, 2));
    const int day = std::stoi(s.substr(8, 2));
    return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

/// The default 24-instrument universe: broad equity, sectors, international,
/// fixed income, commodities and the dollar.
inline const std::vector<std::string>& default_universe() {
    static const std::vector<std::string> symbols = {
        "SPY", "QQQ", "IWM", "XLF", "XLE", "XLK", "XLV", "XLU", "XLP", "XLY", "XLI", "XLB",
        "XLRE", "EFA", "EEM", "VGK", "EWJ", "TLT", "IEF", "LQD", "HYG", "GLD", "USO", "UUP"};
    return symbols;
}

/// Wide price table as read from disk. Missing cells are NaN.
struct RawPriceTable {
    std::vector<Date> dates;
    std::vector<std::string> symbols;
    Eigen::MatrixXd prices;  // dates x symbols
};

struct CleaningOptions {
    int max_fill_days = 5;      // longest run of missing trading days that is forward-filled
    int min_usable_rows = 756;  // three trading years
};

/// Aligned date x asset panel of adjusted closes and simple daily returns.
///
/// `returns(t, i) = prices(t, i) / prices(t - 1, i) - 1` for t >= 1. Row 0 has
/// no prior close and is stored as zero; windows never include it.
/// Immutable after construction, so it can be shared read-only across workers.
class PricePanel {
public:
    PricePanel() = default;

    static PricePanel from_prices(std::vector<Date> dates, std::vector<std::string> symbols,
                                  Eigen::MatrixXd prices) {
        if (dates.size() != static_cast<std::size_t>(prices.rows()) ||
            symbols.size() != static_cast<std::size_t>(prices.cols()))
            throw DataError("price matrix shape does not match dates/symbols");
        for (std::size_t t = 1; t < dates.size(); ++t)
            if (!(dates[t - 1] < dates[t]))
                throw DataError("dates not strictly increasing at " + dates[t]);
        std::unordered_set<std::string> seen;
        for (const auto& s : symbols)
            if (!seen.insert(s).second) throw DataError("duplicate symbol " + s);
        if (!prices.allFinite() || (prices.size() > 0 && prices.minCoeff() <= 0.0))
            throw DataError("prices must be finite and positive after cleaning");

        PricePanel panel;
        panel.dates_ = std::move(dates);
        panel.symbols_ = std::move(symbols);
        panel.prices_ = std::move(prices);
        const auto rows = panel.prices_.rows();
        panel.returns_ = Eigen::MatrixXd::Zero(rows, panel.prices_.cols());
        for (Eigen::Index t = 1; t < rows; ++t)
            panel.returns_.row(t) =
                (panel.prices_.row(t).array() / panel.prices_.row(t - 1).array() - 1.0).matrix();
        for (std::size_t i = 0; i < panel.symbols_.size(); ++i)
            panel.column_of_[panel.symbols_[i]] = i;
        return panel;
    }

    const std::vector<Date>& dates() const noexcept { return dates_; }
    const std::vector<std::string>& symbols() const noexcept { return symbols_; }
    const Eigen::MatrixXd& prices() const noexcept { return prices_; }
    const Eigen::MatrixXd& returns() const noexcept { return returns_; }

    std::size_t size() const noexcept { return dates_.size(); }
    std::size_t asset_count() const noexcept { return symbols_.size(); }
    // Rows that carry a genuine return (every row but the first).
    std::size_t history_length() const noexcept { return dates_.empty() ? 0 : dates_.size() - 1; }

    std::size_t column(const std::string& symbol) const {
        auto it = column_of_.find(symbol);
        if (it == column_of_.end()) throw ConfigError("symbol not in panel: " + symbol);
        return it->second;
    }
    bool has_symbol(const std::string& symbol) const { return column_of_.count(symbol) > 0; }

    std::size_t index_of(const Date& date) const {
        auto it = std::lower_bound(dates_.begin(), dates_.end(), date);
        if (it == dates_.end() || *it != date) throw DataError("date not in panel: " + date);
        return static_cast<std::size_t>(it - dates_.begin());
    }

    // Same panel restricted to rows [begin, end).
    PricePanel slice(std::size_t begin, std::size_t end) const {
        end = std::min(end, size());
        std::vector<Date> d(dates_.begin() + static_cast<std::ptrdiff_t>(begin),
                            dates_.begin() + static_cast<std::ptrdiff_t>(end));
        return from_prices(std::move(d), symbols_,
                           prices_.middleRows(static_cast<Eigen::Index>(begin),
                                              static_cast<Eigen::Index>(end - begin)));
    }

private:
    std::vector<Date> dates_;
    std::vector<std::string> symbols_;
    Eigen::MatrixXd prices_;
    Eigen::MatrixXd returns_;
    std::unordered_map<std::string, std::size_t> column_of_;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline double parse_price_cell(const std::string& cell) {
    if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null")
        return std::numeric_limits<double>::quiet_NaN();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &used);
    } catch (const std::exception&) {
        throw DataError("unparseable price cell '" + cell + "'");
    }
    if (used != cell.size()) throw DataError("unparseable price cell '" + cell + "'");
    if (!std::isfinite(v) || v <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return v;
}

}  // namespace detail

/// Reads a wide CSV: header `date,SYM1,...,SYMn`, one ISO-8601 date per row.
inline RawPriceTable read_price_csv(std::istream& in, const std::string& source = "<stream>") {
    RawPriceTable table;
    std::string line;
    while (std::getline(in, line) && (line.empty() || line[0] == '#')) {
    }
    if (line.empty()) throw DataError(source + ": empty price file");
    auto header = detail::split_csv_line(line);
    if (header.size() < 2) throw DataError(source + ": header needs date plus at least one symbol");
    table.symbols.assign(header.begin() + 1, header.end());

    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r" || line[0] == '#') continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError(source + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        if (!is_iso_date(cells[0]))
            throw DataError(source + ":" + std::to_string(line_no) + ": bad date '" + cells[0] + "'");
        table.dates.push_back(cells[0]);
        std::vector<double> values(table.symbols.size());
        for (std::size_t j = 0; j < values.size(); ++j)
            values[j] = detail::parse_price_cell(cells[j + 1]);
        rows.push_back(std::move(values));
    }
    for (std::size_t t = 1; t < table.dates.size(); ++t)
        if (!(table.dates[t - 1] < table.dates[t]))
            throw DataError(source + ": dates not strictly increasing at " + table.dates[t]);

    table.prices.resize(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(table.symbols.size()));
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (std::size_t j = 0; j < table.symbols.size(); ++j)
            table.prices(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = rows[t][j];
    return table;
}

/// Selects `universe`, forward-fills per-asset gaps of up to `max_fill_days`
/// trading days, drops any date still missing a value, and builds returns.
inline PricePanel clean_panel(const RawPriceTable& raw, const std::vector<std::string>& universe,
                              const CleaningOptions& opts = {}) {
    std::vector<Eigen::Index> cols;
    for (const auto& sym : universe) {
        auto it = std::find(raw.symbols.begin(), raw.symbols.end(), sym);
        if (it == raw.symbols.end()) throw ConfigError("universe symbol missing from price table: " + sym);
        cols.push_back(static_cast<Eigen::Index>(it - raw.symbols.begin()));
    }
    const Eigen::Index rows = raw.prices.rows();
    Eigen::MatrixXd filled(rows, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        double last = std::numeric_limits<double>::quiet_NaN();
        int run = 0;
        for (Eigen::Index t = 0; t < rows; ++t) {
            const double v = raw.prices(t, cols[j]);
            if (std::isfinite(v)) {
                last = v;
                run = 0;
                filled(t, jj) = v;
            } else {
                ++run;
                filled(t, jj) = (run <= opts.max_fill_days) ? last : std::numeric_limits<double>::quiet_NaN();
            }
        }
    }
    std::vector<Date> dates;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index t = 0; t < rows; ++t) {
        if (filled.row(t).allFinite()) {
            keep.push_back(t);
            dates.push_back(raw.dates[static_cast<std::size_t>(t)]);
        }
    }
    if (static_cast<int>(keep.size()) < opts.min_usable_rows)
        throw InsufficientHistory("only " + std::to_string(keep.size()) + " usable rows after cleaning; need " +
                                  std::to_string(opts.min_usable_rows));
    Eigen::MatrixXd prices(static_cast<Eigen::Index>(keep.size()), filled.cols());
    for (std::size_t k = 0; k < keep.size(); ++k) prices.row(static_cast<Eigen::Index>(k)) = filled.row(keep[k]);
    return PricePanel::from_prices(std::move(dates), universe, std::move(prices));
}

inline PricePanel load_panel(const std::string& path, const std::vector<std::string>& universe,
                             const CleaningOptions& opts = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open price file: " + path);
    return clean_panel(read_price_csv(in, path), universe, opts);
}

/// Trailing `length` return rows ending at row `end_index` inclusive.
inline Eigen::Block<const Eigen::MatrixXd> window(const PricePanel& panel, std::size_t end_index,
                                                  std::size_t length) {
    if (length == 0 || end_index >= panel.size() || end_index < length)
        throw WindowUnavailable("window of " + std::to_string(length) + " rows unavailable at row " +
                                std::to_string(end_index));
    const auto start = static_cast<Eigen::Index>(end_index + 1 - length);
    return panel.returns().middleRows(start, static_cast<Eigen::Index>(length));
}

inline Eigen::Block<const Eigen::MatrixXd> window(const PricePanel& panel, const Date& end_date,
                                                  std::size_t length) {
    return window(panel, panel.index_of(end_date), length);
}

}  // namespace orca
