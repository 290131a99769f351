#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "xagg/common.hpp"
#include "xagg/explainers.hpp"

namespace xagg {

/// One attribution per model with that model's predicted label at the same point.
struct AttributionBundle {
    std::vector<Attribution> attributions;
    std::vector<int> labels;

    /// Majority label; requires an odd number of binary labels.
    int majority() const {
        if (labels.size() % 2 == 0) throw InputError("bundle: majority needs an odd number of models");
        std::size_t ones = 0;
        for (int l : labels) ones += l == 1;
        return 2 * ones > labels.size() ? 1 : 0;
    }
};

struct AlignedBundle {
    std::vector<Attribution> attributions;
    std::vector<int> labels;
    std::vector<std::size_t> flipped;  // positions negated
    int majority = 0;
};

/// Negates the attribution of every model dissenting from the majority label, so all
/// members refer to the same output class.
inline AlignedBundle align_signs(const AttributionBundle& bundle) {
    if (bundle.attributions.size() != bundle.labels.size())
        throw InputError("bundle: one label per attribution required");
    AlignedBundle out;
    out.majority = bundle.majority();
    out.attributions = bundle.attributions;
    out.labels = bundle.labels;
    for (std::size_t l = 0; l < out.attributions.size(); ++l) {
        if (bundle.labels[l] == out.majority) continue;
        for (auto& v : out.attributions[l].values) v = -v;
        out.attributions[l].target_class = 1 - out.attributions[l].target_class;
        out.flipped.push_back(l);
    }
    return out;
}

struct AggregatedAttribution {
    Vector values;
    std::vector<std::string> models;
    std::vector<std::string> flipped;
    int target_class = 0;
};

/// Feature-wise arithmetic mean over all L members (zero-flagged members count as zeros).
/// The result is not re-normalized.
inline AggregatedAttribution aggregate(const AlignedBundle& aligned) {
    if (aligned.attributions.empty()) throw InputError("aggregate: empty bundle");
    const std::size_t m = aligned.attributions.front().values.size();
    AggregatedAttribution agg;
    agg.values.assign(m, 0.0);
    agg.target_class = aligned.majority;
    for (const auto& a : aligned.attributions) {
        require_dim(a.values.size(), m, "aggregate");
        for (std::size_t j = 0; j < m; ++j) agg.values[j] += a.values[j];
        agg.models.push_back(a.model);
    }
    const double L = static_cast<double>(aligned.attributions.size());
    for (auto& v : agg.values) v /= L;
    for (auto l : aligned.flipped) agg.flipped.push_back(aligned.attributions[l].model);
    return agg;
}

/// Features where every member coefficient is below delta in magnitude.
inline std::vector<std::size_t> uncertain_features(const AttributionBundle& bundle, double delta = 0.05) {
    std::vector<std::size_t> out;
    if (bundle.attributions.empty()) return out;
    const std::size_t m = bundle.attributions.front().values.size();
    for (std::size_t j = 0; j < m; ++j) {
        bool all_small = true;
        for (const auto& a : bundle.attributions) all_small = all_small && std::abs(a.values[j]) < delta;
        if (all_small) out.push_back(j);
    }
    return out;
}

}  // namespace xagg
