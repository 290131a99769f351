#pragma once

// Brute-force reference computations used by the tests. None of these call into the
// library's own algorithms beyond plain data access.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "xagg/explainers.hpp"
#include "xagg/forest.hpp"
#include "xagg/mlp.hpp"

namespace oracle {

using xagg::Matrix;
using xagg::Vector;

/// Spearman for tie-free inputs: 1 - 6 sum d^2 / (n (n^2 - 1)).
inline double spearman_no_ties(const Vector& a, const Vector& b) {
    const std::size_t n = a.size();
    auto rank = [n](const Vector& v) {
        Vector r(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t below = 0;
            for (std::size_t j = 0; j < n; ++j) below += v[j] < v[i];
            r[i] = static_cast<double>(below + 1);
        }
        return r;
    };
    const Vector ra = rank(a), rb = rank(b);
    double d2 = 0;
    for (std::size_t i = 0; i < n; ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
    const double nn = static_cast<double>(n);
    return 1.0 - 6.0 * d2 / (nn * (nn * nn - 1.0));
}

/// Pearson correlation of mid-ranks computed by counting.
inline double spearman_counting(const Vector& a, const Vector& b) {
    const std::size_t n = a.size();
    auto rank = [n](const Vector& v) {
        Vector r(n);
        for (std::size_t i = 0; i < n; ++i) {
            double below = 0, equal = 0;
            for (std::size_t j = 0; j < n; ++j) {
                below += v[j] < v[i];
                equal += v[j] == v[i];
            }
            r[i] = below + (equal + 1.0) / 2.0;
        }
        return r;
    };
    const Vector ra = rank(a), rb = rank(b);
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0 || sbb == 0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

/// P(agree score > disagree score) + 0.5 P(equal), over all pairs.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<bool>& agree) {
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!agree[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (agree[j]) continue;
            pairs += 1;
            if (scores[i] > scores[j]) wins += 1;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

/// One root-to-leaf path: conditions (feature, threshold, go_left), impurities, leaf class.
struct EnumeratedPath {
    std::vector<std::size_t> features;
    std::vector<double> thresholds;
    std::vector<bool> left;
    std::vector<double> impurities;
    int leaf_class = 0;
};

inline void enumerate(const std::vector<xagg::TreeNode>& nodes, std::size_t i, EnumeratedPath cur,
                      std::vector<EnumeratedPath>& out) {
    const auto& n = nodes[i];
    if (n.left < 0) {
        cur.leaf_class = n.counts[1] > n.counts[0] ? 1 : 0;
        out.push_back(cur);
        return;
    }
    for (bool go_left : {true, false}) {
        EnumeratedPath next = cur;
        next.features.push_back(static_cast<std::size_t>(n.feature));
        next.thresholds.push_back(n.threshold);
        next.left.push_back(go_left);
        next.impurities.push_back(n.impurity);
        enumerate(nodes, static_cast<std::size_t>(go_left ? n.left : n.right), next, out);
    }
}

/// Forest explanation from every enumerated path: exactly one path per tree admits x.
inline Vector rf_explanation_raw(const xagg::ForestModel& forest, const Vector& x, double eps = 0.01) {
    const std::size_t m = x.size();
    std::vector<EnumeratedPath> admitted;
    for (const auto& tree : forest.trees()) {
        std::vector<EnumeratedPath> paths;
        enumerate(tree.nodes(), 0, {}, paths);
        int matched = 0;
        for (const auto& p : paths) {
            bool ok = true;
            for (std::size_t s = 0; s < p.features.size(); ++s) {
                const bool goes_left = x[p.features[s]] <= p.thresholds[s];
                ok = ok && goes_left == p.left[s];
            }
            if (!ok) continue;
            ++matched;
            admitted.push_back(p);
        }
        if (matched != 1) throw std::logic_error("oracle: x matched " + std::to_string(matched) + " paths");
    }
    std::size_t ones = 0;
    for (const auto& p : admitted) ones += p.leaf_class == 1;
    const std::size_t zeros = admitted.size() - ones;
    const double b = static_cast<double>(admitted.size());
    const int c = ones > zeros ? 1 : 0;
    const double p_c = static_cast<double>(c == 1 ? ones : zeros) / b;
    const double p_o = static_cast<double>(c == 1 ? zeros : ones) / b;
    Vector e_c(m, 0.0), e_o(m, 0.0);
    // impurities summed step by step in tree order, so the result is bit-exact
    for (const auto& p : admitted)
        for (std::size_t s = 0; s < p.features.size(); ++s)
            (p.leaf_class == c ? e_c : e_o)[p.features[s]] += p.impurities[s];
    Vector e(m);
    for (std::size_t j = 0; j < m; ++j) e[j] = (p_o + eps) * e_c[j] - p_c * e_o[j];
    return e;
}

/// Random tree of depth <= max_depth over m features, with Gini impurities from random counts.
inline xagg::DecisionTree random_tree(std::mt19937_64& rng, std::size_t m, std::size_t max_depth) {
    std::vector<xagg::TreeNode> nodes;
    std::uniform_real_distribution<double> thr(-1.0, 1.0);
    std::uniform_int_distribution<int> cnt(0, 9);
    std::uniform_int_distribution<std::size_t> feat(0, m - 1);
    std::bernoulli_distribution split(0.75);
    auto build = [&](auto&& self, std::size_t depth) -> int {
        const int id = static_cast<int>(nodes.size());
        nodes.emplace_back();
        const double n0 = cnt(rng), n1 = cnt(rng) + (depth % 2);
        nodes[id].counts = {n0, n1};
        const double n = n0 + n1;
        nodes[id].impurity = n > 0 ? 1.0 - (n0 / n) * (n0 / n) - (n1 / n) * (n1 / n) : 0.0;
        if (depth < max_depth && split(rng)) {
            nodes[id].feature = static_cast<int>(feat(rng));
            nodes[id].threshold = thr(rng);
            const int l = self(self, depth + 1);
            const int r = self(self, depth + 1);
            nodes[id].left = l;
            nodes[id].right = r;
        }
        return id;
    };
    build(build, 0);
    return xagg::DecisionTree(std::move(nodes), m);
}

/// Central finite-difference gradient of the mean loss.
inline Vector numeric_gradient(xagg::MlpModel model, const Matrix& x, const std::vector<int>& y,
                               const std::vector<std::size_t>& rows, double h = 1e-6) {
    Vector p = model.parameters();
    Vector g(p.size()), dummy;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p[i];
        p[i] = keep + h;
        model.set_parameters(p);
        const double up = model.loss_and_gradient(x, y, rows, dummy);
        p[i] = keep - h;
        model.set_parameters(p);
        const double down = model.loss_and_gradient(x, y, rows, dummy);
        p[i] = keep;
        g[i] = (up - down) / (2 * h);
    }
    return g;
}

/// Logit of one output unit computed directly from the weights.
inline double logit(const xagg::MlpModel& model, const Vector& x, int unit) {
    Vector h = x;
    const auto& layers = model.layers();
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const auto& l = layers[li];
        Vector z(l.bias);
        for (std::size_t o = 0; o < z.size(); ++o)
            for (std::size_t c = 0; c < h.size(); ++c) z[o] += l.weights(o, c) * h[c];
        if (l.activation == xagg::Activation::relu)
            for (auto& v : z) v = std::max(0.0, v);
        h = z;
    }
    return h[static_cast<std::size_t>(unit)];
}

/// k-NN label by full sort of (distance, label, row) triples and a direct vote count.
inline int knn_label(const Matrix& train, const std::vector<int>& y, const Vector& x, std::size_t k) {
    struct Item {
        double d;
        int label;
        Vector row;
    };
    std::vector<Item> items;
    for (std::size_t i = 0; i < train.rows(); ++i) {
        double s = 0;
        for (std::size_t j = 0; j < x.size(); ++j) s += (x[j] - train(i, j)) * (x[j] - train(i, j));
        auto r = train.row(i);
        items.push_back({std::sqrt(s), y[i], Vector(r.begin(), r.end())});
    }
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        if (a.d != b.d) return a.d < b.d;
        if (a.label != b.label) return a.label < b.label;
        return a.row < b.row;
    });
    double votes[2] = {0, 0}, dist[2] = {0, 0};
    for (std::size_t i = 0; i < k; ++i) {
        votes[items[i].label] += 1;
        dist[items[i].label] += items[i].d;
    }
    if (votes[0] != votes[1]) return votes[1] > votes[0] ? 1 : 0;
    return dist[1] / votes[1] < dist[0] / votes[0] ? 1 : 0;
}

}  // namespace oracle
