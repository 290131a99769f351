#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "xagg/common.hpp"
#include "xagg/forest.hpp"
#include "xagg/knn.hpp"
#include "xagg/mlp.hpp"

namespace xagg {

/// Signed per-feature importance for one prediction. Positive coefficients push toward
/// `target_class`. Non-degenerate attributions have unit L2 norm.
struct Attribution {
    Vector values;
    int target_class = 0;
    double magnitude = 0.0;  // L2 norm before normalization
    bool zero = false;       // degenerate: no signal, values are all zero
    std::string model;
    long long point = -1;
};

inline constexpr double kNormFloor = 1e-12;

/// v / ||v||, or the zero vector with the flag set when ||v|| <= 1e-12.
inline Attribution l2_normalize(Vector v) {
    Attribution a;
    double s = 0.0;
    for (double x : v) s += x * x;
    a.magnitude = std::sqrt(s);
    if (a.magnitude > kNormFloor) {
        for (auto& x : v) x /= a.magnitude;
    } else {
        std::fill(v.begin(), v.end(), 0.0);
        a.zero = true;
    }
    a.values = std::move(v);
    return a;
}

// ---------------------------------------------------------------------------
// k-NN: contrast of mean per-feature distances to the nearest members of each class.

/// Mean absolute per-coordinate difference between x and the given training rows.
inline Vector average_feature_distance(const KnnModel& model, ConstRow x,
                                       const std::vector<KnnModel::Neighbour>& set) {
    Vector d(x.size(), 0.0);
    if (set.empty()) return d;
    for (const auto& n : set) {
        auto r = model.train().row(n.index);
        for (std::size_t j = 0; j < d.size(); ++j) d[j] += std::abs(x[j] - r[j]);
    }
    for (auto& v : d) v /= static_cast<double>(set.size());
    return d;
}

/// Attribution toward class c: D(other class) - D(c), normalized.
inline Attribution explain_knn_toward(const KnnModel& model, ConstRow x, std::size_t k_e, int c) {
    const auto same = model.class_neighbours(x, k_e, c);
    const auto other = model.class_neighbours(x, k_e, 1 - c);
    const Vector d_c = average_feature_distance(model, x, same);
    const Vector d_other = average_feature_distance(model, x, other);
    Vector e(x.size());
    for (std::size_t j = 0; j < e.size(); ++j) e[j] = d_other[j] - d_c[j];
    Attribution a = l2_normalize(std::move(e));
    a.target_class = c;
    a.model = "knn";
    return a;
}

inline Attribution explain_knn(const KnnModel& model, ConstRow x, std::size_t k_e) {
    if (model.class_size(0) == 0 || model.class_size(1) == 0)
        throw InputError("explain_knn: both classes need at least one training point");
    return explain_knn_toward(model, x, k_e, model.predict(x).label);
}

// ---------------------------------------------------------------------------
// Random forest: node impurities along each tree's decision path, split by whether the
// tree agrees with the forest, weighted by the opposite class probability.

inline constexpr double kForestEpsilon = 0.01;

inline Attribution explain_rf(const ForestModel& forest, ConstRow x, double epsilon = kForestEpsilon) {
    const Prediction p = forest.predict(x);
    const int c = p.label;
    Vector e_c(x.size(), 0.0), e_other(x.size(), 0.0);
    for (const auto& tree : forest.trees()) {
        const auto path = tree.decision_path(x);
        Vector& acc = path.leaf_class == c ? e_c : e_other;
        for (const auto& step : path.steps) acc[step.feature] += step.impurity;
    }
    Vector e(x.size());
    for (std::size_t j = 0; j < e.size(); ++j)
        e[j] = (p.p_other() + epsilon) * e_c[j] - p.p_predicted() * e_other[j];
    Attribution a = l2_normalize(std::move(e));
    a.target_class = c;
    a.model = "rf";
    return a;
}

// ---------------------------------------------------------------------------
// DeepLIFT, rescale rule.

/// Reference input and its forward activations.
struct DeepLiftReference {
    Vector input;
    ForwardTrace trace;

    static DeepLiftReference of(const MlpModel& model, Vector input) {
        DeepLiftReference r;
        r.trace = model.forward(input);
        r.input = std::move(input);
        return r;
    }

    /// Column means of the training matrix.
    static DeepLiftReference mean_of(const MlpModel& model, const Matrix& train) {
        Vector mean(train.cols(), 0.0);
        for (std::size_t i = 0; i < train.rows(); ++i)
            for (std::size_t j = 0; j < train.cols(); ++j) mean[j] += train(i, j);
        for (auto& v : mean) v /= static_cast<double>(std::max<std::size_t>(1, train.rows()));
        return of(model, std::move(mean));
    }
};

inline constexpr double kRescaleFallback = 1e-7;

/// Per-feature contributions to logit[unit](x) - logit[unit](ref), before normalization.
/// Their sum equals that difference (completeness).
inline Vector deeplift_contributions(const MlpModel& model, ConstRow x, const DeepLiftReference& ref, int unit) {
    require_dim(ref.input.size(), model.features(), "deeplift reference");
    const auto t = model.forward(x);
    const auto& layers = model.layers();
    // Multipliers of the explained unit with respect to the last layer's pre-activations.
    Vector mult(layers.back().outputs(), 0.0);
    mult[static_cast<std::size_t>(unit)] = 1.0;
    for (std::size_t li = layers.size(); li-- > 0;) {
        const auto& layer = layers[li];
        // mult is taken w.r.t. this layer's post-activations, except for the output layer whose
        // explained unit is read pre-activation. Rescale rule: slope = delta_post / delta_pre.
        if (li + 1 < layers.size() && layer.activation == Activation::relu) {
            for (std::size_t o = 0; o < mult.size(); ++o) {
                const double dz = t.pre[li][o] - ref.trace.pre[li][o];
                const double dh = t.post[li][o] - ref.trace.post[li][o];
                const double slope = std::abs(dz) < kRescaleFallback ? (t.pre[li][o] > 0.0 ? 1.0 : 0.0) : dh / dz;
                mult[o] *= slope;
            }
        }
        Vector prev(layer.inputs(), 0.0);
        for (std::size_t o = 0; o < layer.outputs(); ++o) {
            auto w = layer.weights.row(o);
            for (std::size_t c = 0; c < prev.size(); ++c) prev[c] += w[c] * mult[o];
        }
        mult = std::move(prev);
    }
    Vector contrib(x.size());
    for (std::size_t j = 0; j < contrib.size(); ++j) contrib[j] = mult[j] * (x[j] - ref.input[j]);
    return contrib;
}

/// Explains the predicted class's logit.
inline Attribution explain_deeplift(const MlpModel& model, ConstRow x, const DeepLiftReference& ref) {
    const int c = model.predict(x).label;
    Attribution a = l2_normalize(deeplift_contributions(model, x, ref, c));
    a.target_class = c;
    a.model = "nn";
    return a;
}

}  // namespace xagg
