#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "xagg/common.hpp"
#include "xagg/neighbourhood.hpp"

namespace xagg {

/// Average (fractional) ranks, 1-based.
inline Vector average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    Vector ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

struct RankCorrelation {
    double rho = 0.0;
    bool constant_input = false;  // rho forced to 0
};

/// Spearman's rho as the Pearson correlation of average ranks.
inline RankCorrelation spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InputError("spearman: length mismatch");
    if (a.size() < 2) throw InputError("spearman: need at least two values");
    const Vector ra = average_ranks(a), rb = average_ranks(b);
    const double mean = 0.5 * (static_cast<double>(a.size()) + 1.0);  // mean of ranks is fixed
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = ra[i] - mean, db = rb[i] - mean;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return {0.0, true};
    return {std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0), false};
}

inline double spearman_rho(std::span<const double> a, std::span<const double> b) { return spearman(a, b).rho; }

/// Mean rank correlation between the origin explanation and each survivor's explanation.
/// Empty neighbourhoods have no score.
inline std::optional<double> robustness_score(std::span<const double> origin_explanation, const Matrix& survivors,
                                              const std::function<Vector(ConstRow)>& explain) {
    if (survivors.rows() == 0) return std::nullopt;
    double total = 0.0;
    for (std::size_t i = 0; i < survivors.rows(); ++i) {
        const Vector e = explain(survivors.row(i));
        total += spearman_rho(origin_explanation, e);
    }
    return total / static_cast<double>(survivors.rows());
}

// ---------------------------------------------------------------------------
// Concordance

enum class Concordance { agree = 0, knn_disagrees = 1, rf_disagrees = 2, nn_disagrees = 3 };

inline constexpr std::array<Concordance, 4> all_groups{Concordance::agree, Concordance::knn_disagrees,
                                                      Concordance::rf_disagrees, Concordance::nn_disagrees};

inline const char* to_string(Concordance g) {
    switch (g) {
        case Concordance::agree: return "agree";
        case Concordance::knn_disagrees: return "knn";
        case Concordance::rf_disagrees: return "rf";
        case Concordance::nn_disagrees: return "nn";
    }
    return "?";
}

inline Concordance concordance_from_string(const std::string& s) {
    for (auto g : all_groups)
        if (s == to_string(g)) return g;
    throw InputError("unknown concordance group '" + s + "'");
}

/// Labels in model order (knn, rf, nn). Agree when all match, otherwise the unique dissenter.
inline Concordance concordance_of(const std::array<int, 3>& labels) {
    if (labels[0] == labels[1] && labels[1] == labels[2]) return Concordance::agree;
    if (labels[1] == labels[2]) return Concordance::knn_disagrees;
    if (labels[0] == labels[2]) return Concordance::rf_disagrees;
    return Concordance::nn_disagrees;
}

struct ConcordancePartition {
    std::vector<Concordance> groups;
    std::array<std::size_t, 4> counts{0, 0, 0, 0};
};

inline ConcordancePartition concordance_partition(const std::vector<std::array<int, 3>>& labels) {
    ConcordancePartition p;
    for (const auto& l : labels) {
        const auto g = concordance_of(l);
        p.groups.push_back(g);
        ++p.counts[static_cast<std::size_t>(g)];
    }
    return p;
}

/// Mean retention per concordance group (index 0..3) plus the whole set ("test").
/// Empty groups are reported as nullopt.
struct RetentionRow {
    std::size_t count = 0;
    std::optional<double> mean;
};

struct RetentionReport {
    RetentionRow test;
    std::array<RetentionRow, 4> groups;
};

inline RetentionReport retention_report(const std::vector<double>& retention, const ConcordancePartition& partition) {
    if (retention.size() != partition.groups.size())
        throw InputError("retention_report: one retention value per point required");
    RetentionReport r;
    std::array<double, 4> sums{0, 0, 0, 0};
    double total = 0.0;
    for (std::size_t i = 0; i < retention.size(); ++i) {
        const auto g = static_cast<std::size_t>(partition.groups[i]);
        sums[g] += retention[i];
        ++r.groups[g].count;
        total += retention[i];
    }
    r.test.count = retention.size();
    if (!retention.empty()) r.test.mean = total / static_cast<double>(retention.size());
    for (std::size_t g = 0; g < 4; ++g)
        if (r.groups[g].count) r.groups[g].mean = sums[g] / static_cast<double>(r.groups[g].count);
    return r;
}

}  // namespace xagg
