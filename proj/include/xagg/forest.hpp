#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "xagg/common.hpp"
#include "xagg/prediction.hpp"

namespace xagg {

/// Binary-class Gini decision-tree node. A node is a leaf iff it has no children.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;  // x[feature] <= threshold goes left
    double impurity = 0.0;
    int left = -1;
    int right = -1;
    std::array<double, 2> counts{0, 0};

    bool is_leaf() const noexcept { return left < 0; }
    int leaf_class() const noexcept { return counts[1] > counts[0] ? 1 : 0; }
};

inline double gini(double n0, double n1) {
    const double n = n0 + n1;
    if (n <= 0) return 0.0;
    const double p0 = n0 / n, p1 = n1 / n;
    return 1.0 - p0 * p0 - p1 * p1;
}

struct PathStep {
    std::size_t feature;
    double impurity;
};

struct DecisionPath {
    std::vector<PathStep> steps;  // internal nodes, root first
    int leaf_class = 0;
};

struct TreeParams {
    std::size_t max_depth = 12;
    std::size_t min_samples_split = 2;
    /// Features examined per split; 0 means ceil(sqrt(m)).
    std::size_t max_features = 0;
};

class DecisionTree {
public:
    DecisionTree() = default;
    DecisionTree(std::vector<TreeNode> nodes, std::size_t features) : nodes_(std::move(nodes)), features_(features) {}

    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    std::size_t features() const noexcept { return features_; }

    std::size_t leaf_of(ConstRow x) const {
        require_dim(x.size(), features_, "tree query");
        std::size_t i = 0;
        while (!nodes_[i].is_leaf())
            i = static_cast<std::size_t>(x[nodes_[i].feature] <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right);
        return i;
    }

    int predict(ConstRow x) const { return nodes_[leaf_of(x)].leaf_class(); }

    DecisionPath decision_path(ConstRow x) const {
        require_dim(x.size(), features_, "tree query");
        DecisionPath path;
        std::size_t i = 0;
        while (!nodes_[i].is_leaf()) {
            const auto& n = nodes_[i];
            path.steps.push_back({static_cast<std::size_t>(n.feature), n.impurity});
            i = static_cast<std::size_t>(x[n.feature] <= n.threshold ? n.left : n.right);
        }
        path.leaf_class = nodes_[i].leaf_class();
        return path;
    }

    std::size_t depth() const { return depth_from(0); }

    /// Grows a tree on the given sample indices (with repetition, e.g. a bootstrap).
    static DecisionTree fit(const Matrix& x, const std::vector<int>& y, std::vector<std::size_t> sample,
                            const TreeParams& params, Rng& rng) {
        DecisionTree t;
        t.features_ = x.cols();
        const std::size_t m = x.cols();
        const std::size_t mtry =
            params.max_features ? std::min(params.max_features, m)
                                : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(m))));
        t.grow(x, y, sample, 0, sample.size(), 0, params, mtry, rng);
        return t;
    }

private:
    std::size_t depth_from(std::size_t i) const {
        if (nodes_[i].is_leaf()) return 0;
        return 1 + std::max(depth_from(static_cast<std::size_t>(nodes_[i].left)),
                            depth_from(static_cast<std::size_t>(nodes_[i].right)));
    }

    int grow(const Matrix& x, const std::vector<int>& y, std::vector<std::size_t>& idx, std::size_t begin,
             std::size_t end, std::size_t depth, const TreeParams& params, std::size_t mtry, Rng& rng) {
        TreeNode node;
        for (std::size_t i = begin; i < end; ++i) node.counts[y[idx[i]]] += 1.0;
        node.impurity = gini(node.counts[0], node.counts[1]);
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(node);

        const std::size_t n = end - begin;
        if (node.impurity <= 0.0 || depth >= params.max_depth || n < params.min_samples_split) return id;

        // Visit features in random order until mtry non-constant ones have been scored.
        std::vector<std::size_t> order(x.cols());
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle(order, rng);

        double best_score = node.impurity * static_cast<double>(n);
        int best_feature = -1;
        double best_threshold = 0.0;
        std::size_t scored = 0;
        std::vector<std::pair<double, int>> vals(n);
        for (std::size_t f : order) {
            if (scored >= mtry) break;
            for (std::size_t i = 0; i < n; ++i) vals[i] = {x(idx[begin + i], f), y[idx[begin + i]]};
            std::sort(vals.begin(), vals.end());
            if (vals.front().first == vals.back().first) continue;
            ++scored;
            double l0 = 0, l1 = 0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                (vals[i].second ? l1 : l0) += 1.0;
                if (vals[i].first == vals[i + 1].first) continue;
                const double nl = static_cast<double>(i + 1), nr = static_cast<double>(n - i - 1);
                const double score = nl * gini(l0, l1) + nr * gini(node.counts[0] - l0, node.counts[1] - l1);
                if (score < best_score - 1e-12) {
                    best_score = score;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (vals[i].first + vals[i + 1].first);
                    if (best_threshold >= vals[i + 1].first) best_threshold = vals[i].first;
                }
            }
        }
        if (best_feature < 0) return id;

        auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                  idx.begin() + static_cast<std::ptrdiff_t>(end),
                                  [&](std::size_t r) { return x(r, best_feature) <= best_threshold; });
        const auto split_at = static_cast<std::size_t>(mid - idx.begin());
        nodes_[id].feature = best_feature;
        nodes_[id].threshold = best_threshold;
        const int l = grow(x, y, idx, begin, split_at, depth + 1, params, mtry, rng);
        const int r = grow(x, y, idx, split_at, end, depth + 1, params, mtry, rng);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    std::vector<TreeNode> nodes_;
    std::size_t features_ = 0;
};

struct ForestParams {
    std::size_t trees = 25;
    TreeParams tree;
};

/// Random forest of bootstrapped Gini trees; probabilities are tree-vote fractions.
class ForestModel {
public:
    ForestModel() = default;
    ForestModel(std::vector<DecisionTree> trees, std::vector<std::uint64_t> seeds, ForestParams params)
        : trees_(std::move(trees)), seeds_(std::move(seeds)), params_(params) {
        if (trees_.empty()) throw InputError("forest needs at least one tree");
        if (seeds_.size() != trees_.size()) seeds_.resize(trees_.size(), 0);
    }

    static ForestModel fit(const Matrix& x, const std::vector<int>& y, ForestParams params, std::uint64_t seed,
                           unsigned threads = 1) {
        if (params.trees < 1) throw InputError("forest: B must be >= 1");
        if (x.rows() == 0 || x.rows() != y.size()) throw InputError("forest: empty or inconsistent training data");
        std::vector<DecisionTree> trees(params.trees);
        std::vector<std::uint64_t> seeds(params.trees);
        for (std::size_t b = 0; b < params.trees; ++b) seeds[b] = mix_seed(seed, b);
        parallel_for(params.trees, threads, [&](std::size_t b) {
            Rng rng(seeds[b]);
            std::vector<std::size_t> sample(x.rows());
            for (auto& s : sample) s = uniform_index(rng, x.rows());
            trees[b] = DecisionTree::fit(x, y, std::move(sample), params.tree, rng);
        });
        return ForestModel(std::move(trees), std::move(seeds), params);
    }

    std::size_t size() const noexcept { return trees_.size(); }
    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
    const std::vector<std::uint64_t>& seeds() const noexcept { return seeds_; }
    const ForestParams& params() const noexcept { return params_; }
    std::size_t features() const noexcept { return trees_.front().features(); }

    /// Vote fractions; ties (even B) go to class 0.
    Prediction predict(ConstRow x) const {
        std::size_t ones = 0;
        for (const auto& t : trees_) ones += static_cast<std::size_t>(t.predict(x));
        const std::size_t zeros = trees_.size() - ones;
        const double b = static_cast<double>(trees_.size());
        Prediction p;
        p.proba = {static_cast<double>(zeros) / b, static_cast<double>(ones) / b};
        p.label = ones > zeros ? 1 : 0;
        return p;
    }

private:
    std::vector<DecisionTree> trees_;
    std::vector<std::uint64_t> seeds_;
    ForestParams params_;
};

}  // namespace xagg
