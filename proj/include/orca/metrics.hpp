#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "orca/errors.hpp"

namespace orca {

namespace detail {

inline void check_binary(std::span<const double> scores, std::span<const std::uint8_t> labels, const char* what) {
    if (scores.size() != labels.size()) throw DataError(std::string(what) + ": scores and labels differ in length");
    std::size_t pos = 0;
    for (auto l : labels) pos += (l != 0);
    if (pos == 0 || pos == labels.size()) throw UndefinedMetric(std::string(what) + ": labels contain a single class");
}

// Indices sorted by descending score; equal scores keep input order.
inline std::vector<std::size_t> descending_order(std::span<const double> scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

}  // namespace detail

/// Mann-Whitney AUC with average ranks for ties (a tied pair counts 1/2).
inline double auc_roc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    detail::check_binary(scores, labels, "auc_roc");
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0, n_pos = 0.0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (labels[idx[k]]) {
                rank_sum += avg_rank;
                n_pos += 1.0;
            }
        i = j;
    }
    const double n_neg = static_cast<double>(scores.size()) - n_pos;
    return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

/// Step-function average precision: sum over distinct descending thresholds
/// of (R_k - R_{k-1}) * P_k.
inline double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    detail::check_binary(scores, labels, "average_precision");
    const auto idx = detail::descending_order(scores);
    double total_pos = 0.0;
    for (auto l : labels) total_pos += (l != 0);
    double tp = 0.0, fp = 0.0, prev_recall = 0.0, ap = 0.0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            (labels[idx[j]] ? tp : fp) += 1.0;
            ++j;
        }
        const double recall = tp / total_pos;
        ap += (recall - prev_recall) * (tp / (tp + fp));
        prev_recall = recall;
        i = j;
    }
    return ap;
}

struct BestF1 {
    double threshold = 0.5;      // reported decision threshold, clipped to [lo, hi]
    double raw_threshold = 0.5;  // score at which F1 peaks
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline constexpr double kThresholdLo = 0.05;
inline constexpr double kThresholdHi = 0.95;

/// Maximises F1 over the rule `score >= thr` for every distinct score. Ties go
/// to the lower threshold. Precision, recall and F1 are those at the optimum;
/// the reported threshold is that optimum clipped to [0.05, 0.95].
inline BestF1 best_f1(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    detail::check_binary(scores, labels, "best_f1");
    const auto idx = detail::descending_order(scores);
    double total_pos = 0.0;
    for (auto l : labels) total_pos += (l != 0);
    BestF1 best;
    best.f1 = -1.0;
    double tp = 0.0, fp = 0.0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            (labels[idx[j]] ? tp : fp) += 1.0;
            ++j;
        }
        const double fn = total_pos - tp;
        const double f1 = 2.0 * tp / (2.0 * tp + fp + fn);
        // Sweeping downward, so ">=" prefers the lower threshold on ties.
        if (f1 >= best.f1) {
            best.f1 = f1;
            best.raw_threshold = scores[idx[i]];
            best.precision = tp / (tp + fp);
            best.recall = tp / total_pos;
        }
        i = j;
    }
    best.threshold = std::clamp(best.raw_threshold, kThresholdLo, kThresholdHi);
    return best;
}

/// Geometric mean of the rally and crash AUCs.
inline double bcd_auc(double auc_rally, double auc_crash) {
    if (auc_rally < 0 || auc_crash < 0) throw UndefinedMetric("bcd_auc: negative AUC");
    return std::sqrt(auc_rally * auc_crash);
}

}  // namespace orca
