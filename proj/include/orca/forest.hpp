#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "orca/errors.hpp"
#include "orca/parallel.hpp"
#include "orca/rng.hpp"

namespace orca {

struct ForestParams {
    int n_trees = 200;
    int max_depth = 6;
    int min_samples_leaf = 30;
    int min_samples_split = 60;
    int max_features = 0;  // 0 = ceil(sqrt(d))
    bool bootstrap = true;
    bool balanced_subsample = true;

    int features_per_split(int d) const {
        if (max_features > 0) return std::min(max_features, d);
        return std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d)))));
    }
};

/// Node of a binary CART tree. Leaves have feature == -1. `prob` is the
/// class-weighted positive frequency of the training samples reaching the node.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double prob = 0.0;
    int samples = 0;
    int depth = 0;

    bool is_leaf() const noexcept { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    const TreeNode& leaf_for(std::span<const double> row) const {
        int i = 0;
        while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
            const auto& n = nodes[static_cast<std::size_t>(i)];
            i = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)];
    }
    double predict(std::span<const double> row) const { return leaf_for(row).prob; }
    int depth() const {
        int d = 0;
        for (const auto& n : nodes) d = std::max(d, n.depth);
        return d;
    }
};

/// Weighted Gini impurity 1 - sum p_c^2 of a two-class node.
inline double weighted_gini(double w_neg, double w_pos) {
    const double w = w_neg + w_pos;
    if (w <= 0) return 0.0;
    const double p = w_pos / w, q = w_neg / w;
    return 1.0 - p * p - q * q;
}

namespace detail {

struct Sample {
    std::uint32_t row;
    std::uint32_t count;  // bootstrap multiplicity
};

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& x, std::span<const std::uint8_t> y, const ForestParams& p,
                std::array<double, 2> class_weight, SplitMix64& rng)
        : x_(x), y_(y), p_(p), cw_(class_weight), rng_(rng), d_(static_cast<int>(x.cols())),
          mtry_(p.features_per_split(static_cast<int>(x.cols()))) {
        feature_pool_.resize(static_cast<std::size_t>(d_));
        std::iota(feature_pool_.begin(), feature_pool_.end(), 0);
    }

    DecisionTree build(std::vector<Sample> samples) {
        DecisionTree tree;
        grow(tree, std::move(samples), 0);
        return tree;
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double criterion = 0.0;
    };

    int grow(DecisionTree& tree, std::vector<Sample> samples, int depth) {
        double w[2] = {0.0, 0.0};
        int raw = 0;
        for (const auto& s : samples) {
            w[y_[s.row]] += s.count * cw_[y_[s.row]];
            raw += static_cast<int>(s.count);
        }
        const int id = static_cast<int>(tree.nodes.size());
        TreeNode node;
        node.prob = (w[0] + w[1]) > 0 ? w[1] / (w[0] + w[1]) : 0.0;
        node.samples = raw;
        node.depth = depth;
        tree.nodes.push_back(node);

        const bool pure = w[0] <= 0.0 || w[1] <= 0.0;
        if (pure || depth >= p_.max_depth || raw < p_.min_samples_split || raw < 2 * p_.min_samples_leaf)
            return id;
        const Split best = find_split(samples);
        if (best.feature < 0) return id;

        std::vector<Sample> left, right;
        for (const auto& s : samples)
            (x_(s.row, best.feature) <= best.threshold ? left : right).push_back(s);
        samples.clear();
        samples.shrink_to_fit();
        const int l = grow(tree, std::move(left), depth + 1);
        const int r = grow(tree, std::move(right), depth + 1);
        auto& n = tree.nodes[static_cast<std::size_t>(id)];
        n.feature = best.feature;
        n.threshold = best.threshold;
        n.left = l;
        n.right = r;
        return id;
    }

    // Partial Fisher-Yates draw of mtry features, visited in ascending index
    // order so ties resolve to the lowest feature, then the lowest threshold.
    std::vector<int> draw_features() {
        for (int i = 0; i < mtry_; ++i) {
            const auto j = static_cast<std::size_t>(i) + rng_.below(static_cast<std::uint64_t>(d_ - i));
            std::swap(feature_pool_[static_cast<std::size_t>(i)], feature_pool_[j]);
        }
        std::vector<int> f(feature_pool_.begin(), feature_pool_.begin() + mtry_);
        std::sort(f.begin(), f.end());
        return f;
    }

    Split find_split(const std::vector<Sample>& samples) {
        Split best;
        double best_crit = std::numeric_limits<double>::infinity();
        std::vector<std::pair<double, std::uint32_t>> order(samples.size());
        double total_w[2] = {0.0, 0.0};
        int total_raw = 0;
        for (const auto& s : samples) {
            total_w[y_[s.row]] += s.count * cw_[y_[s.row]];
            total_raw += static_cast<int>(s.count);
        }
        for (int f : draw_features()) {
            for (std::size_t i = 0; i < samples.size(); ++i) order[i] = {x_(samples[i].row, f), static_cast<std::uint32_t>(i)};
            std::sort(order.begin(), order.end());
            double lw[2] = {0.0, 0.0};
            int lraw = 0;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                const auto& s = samples[order[i].second];
                lw[y_[s.row]] += s.count * cw_[y_[s.row]];
                lraw += static_cast<int>(s.count);
                const double v = order[i].first, next = order[i + 1].first;
                if (!(v < next)) continue;
                const int rraw = total_raw - lraw;
                if (lraw < p_.min_samples_leaf || rraw < p_.min_samples_leaf) continue;
                const double rw0 = total_w[0] - lw[0], rw1 = total_w[1] - lw[1];
                const double crit = (lw[0] + lw[1]) * weighted_gini(lw[0], lw[1]) + (rw0 + rw1) * weighted_gini(rw0, rw1);
                if (crit < best_crit - 1e-12 * std::abs(best_crit == std::numeric_limits<double>::infinity() ? 0.0 : best_crit)) {
                    best_crit = crit;
                    best.feature = f;
                    double mid = 0.5 * (v + next);
                    if (!(mid < next)) mid = v;
                    best.threshold = mid;
                    best.criterion = crit;
                }
            }
        }
        return best;
    }

    const Eigen::MatrixXd& x_;
    std::span<const std::uint8_t> y_;
    const ForestParams& p_;
    std::array<double, 2> cw_;
    SplitMix64& rng_;
    int d_;
    int mtry_;
    std::vector<int> feature_pool_;
};

}  // namespace detail

/// Class weights N / (2 * n_c) computed on the given multiplicities.
inline std::array<double, 2> balanced_weights(std::span<const std::uint8_t> y, std::span<const std::uint32_t> counts) {
    double n[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < y.size(); ++i) n[y[i]] += counts[i];
    const double total = n[0] + n[1];
    return {n[0] > 0 ? total / (2.0 * n[0]) : 0.0, n[1] > 0 ? total / (2.0 * n[1]) : 0.0};
}

/// Grows one tree on rows with the given multiplicities (0 = out of bag).
inline DecisionTree build_tree(const Eigen::MatrixXd& x, std::span<const std::uint8_t> y,
                               std::span<const std::uint32_t> counts, const ForestParams& params, SplitMix64& rng) {
    std::vector<detail::Sample> samples;
    for (std::size_t i = 0; i < counts.size(); ++i)
        if (counts[i] > 0) samples.push_back({static_cast<std::uint32_t>(i), counts[i]});
    const auto cw = params.balanced_subsample ? balanced_weights(y, counts) : std::array<double, 2>{1.0, 1.0};
    detail::TreeBuilder builder(x, y, params, cw, rng);
    return builder.build(std::move(samples));
}

/// Bootstrap multiplicities: n draws with replacement from n rows.
inline std::vector<std::uint32_t> bootstrap_counts(std::size_t n, SplitMix64& rng) {
    std::vector<std::uint32_t> counts(n, 0);
    for (std::size_t k = 0; k < n; ++k) ++counts[rng.below(n)];
    return counts;
}

inline std::uint64_t tree_seed(std::uint64_t seed, std::size_t tree_index) {
    SplitMix64 base(seed);
    return base() ^ static_cast<std::uint64_t>(tree_index);
}

struct ForestModel {
    ForestParams params;
    std::uint64_t seed = 0;
    int n_features = 0;
    std::string manifest_version;
    std::vector<DecisionTree> trees;

    double predict_proba(std::span<const double> row) const {
        if (row.size() != static_cast<std::size_t>(n_features))
            throw DataError("forest expects " + std::to_string(n_features) + " features, got " + std::to_string(row.size()));
        double s = 0.0;
        for (const auto& t : trees) s += t.predict(row);
        return trees.empty() ? 0.0 : s / static_cast<double>(trees.size());
    }

    std::vector<double> predict_proba(const Eigen::MatrixXd& x) const {
        if (x.cols() != n_features)
            throw DataError("forest expects " + std::to_string(n_features) + " features, got " + std::to_string(x.cols()));
        std::vector<double> out(static_cast<std::size_t>(x.rows()));
        std::vector<double> row(static_cast<std::size_t>(x.cols()));
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
            out[static_cast<std::size_t>(i)] = predict_proba(row);
        }
        return out;
    }
};

/// Trains a random forest of CART trees with per-bootstrap balanced class
/// weights. Deterministic for a given seed regardless of `jobs`.
inline ForestModel fit_forest(const Eigen::MatrixXd& x, std::span<const std::uint8_t> y, std::uint64_t seed,
                              const ForestParams& params = {}, unsigned jobs = 1, std::string manifest_version = {}) {
    if (static_cast<std::size_t>(x.rows()) != y.size()) throw DataError("forest: rows and labels differ in length");
    std::size_t pos = 0;
    for (auto v : y) {
        if (v > 1) throw DataError("forest: labels must be 0/1");
        pos += v;
    }
    if (pos == 0 || pos == y.size()) throw DataError("forest: training labels contain a single class");

    ForestModel model;
    model.params = params;
    model.seed = seed;
    model.n_features = static_cast<int>(x.cols());
    model.manifest_version = std::move(manifest_version);
    model.trees.resize(static_cast<std::size_t>(params.n_trees));
    parallel_for(model.trees.size(), jobs, [&](std::size_t k) {
        SplitMix64 rng(tree_seed(seed, k));
        std::vector<std::uint32_t> counts =
            params.bootstrap ? bootstrap_counts(y.size(), rng) : std::vector<std::uint32_t>(y.size(), 1);
        model.trees[k] = build_tree(x, y, counts, params, rng);
    });
    return model;
}

// ---------------------------------------------------------------------------
// Structured-text (JSON) persistence.

inline nlohmann::json to_json(const ForestModel& m) {
    nlohmann::json j;
    j["format"] = "orca-forest-1";
    j["seed"] = m.seed;
    j["n_features"] = m.n_features;
    j["manifest_version"] = m.manifest_version;
    j["params"] = {{"n_trees", m.params.n_trees},
                   {"max_depth", m.params.max_depth},
                   {"min_samples_leaf", m.params.min_samples_leaf},
                   {"min_samples_split", m.params.min_samples_split},
                   {"max_features", m.params.max_features},
                   {"bootstrap", m.params.bootstrap},
                   {"balanced_subsample", m.params.balanced_subsample}};
    auto& trees = j["trees"] = nlohmann::json::array();
    for (const auto& t : m.trees) {
        nlohmann::json jt;
        for (const auto& n : t.nodes) {
            jt["feature"].push_back(n.feature);
            jt["threshold"].push_back(n.threshold);
            jt["left"].push_back(n.left);
            jt["right"].push_back(n.right);
            jt["prob"].push_back(n.prob);
            jt["samples"].push_back(n.samples);
            jt["depth"].push_back(n.depth);
        }
        trees.push_back(std::move(jt));
    }
    return j;
}

inline ForestModel forest_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "orca-forest-1") throw DataError("not an orca-forest-1 document");
    ForestModel m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.n_features = j.at("n_features").get<int>();
    m.manifest_version = j.at("manifest_version").get<std::string>();
    const auto& p = j.at("params");
    m.params.n_trees = p.at("n_trees");
    m.params.max_depth = p.at("max_depth");
    m.params.min_samples_leaf = p.at("min_samples_leaf");
    m.params.min_samples_split = p.at("min_samples_split");
    m.params.max_features = p.at("max_features");
    m.params.bootstrap = p.at("bootstrap");
    m.params.balanced_subsample = p.at("balanced_subsample");
    for (const auto& jt : j.at("trees")) {
        DecisionTree t;
        const auto count = jt.at("feature").size();
        for (std::size_t i = 0; i < count; ++i) {
            TreeNode n;
            n.feature = jt["feature"][i];
            n.threshold = jt["threshold"][i];
            n.left = jt["left"][i];
            n.right = jt["right"][i];
            n.prob = jt["prob"][i];
            n.samples = jt["samples"][i];
            n.depth = jt["depth"][i];
            t.nodes.push_back(n);
        }
        m.trees.push_back(std::move(t));
    }
    return m;
}

}  // namespace orca
