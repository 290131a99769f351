#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "xagg/common.hpp"

namespace xagg {

/// A point is robust at threshold r_th when its score is >= r_th. TPR is measured over
/// agreeing points, FPR over disagreeing ones. A rate over an empty group is missing.
struct Rates {
    std::optional<double> tpr;
    std::optional<double> fpr;
};

inline Rates tpr_fpr_at(const std::vector<double>& scores, const std::vector<bool>& agree, double r_th) {
    if (scores.size() != agree.size()) throw InputError("tpr_fpr_at: one agree flag per score required");
    std::size_t n_agree = 0, n_dis = 0, tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool robust = scores[i] >= r_th;
        if (agree[i]) {
            ++n_agree;
            tp += robust;
        } else {
            ++n_dis;
            fp += robust;
        }
    }
    Rates r;
    if (n_agree) r.tpr = static_cast<double>(tp) / static_cast<double>(n_agree);
    if (n_dis) r.fpr = static_cast<double>(fp) / static_cast<double>(n_dis);
    return r;
}

struct RocPoint {
    double threshold;
    double fpr;  // NaN when undefined
    double tpr;  // NaN when undefined
};

struct ValidationCurve {
    std::string explainer;
    std::vector<RocPoint> points;  // ascending threshold
    std::optional<double> auc;
    std::size_t agree = 0;
    std::size_t disagree = 0;
};

/// Sweeps r_th over -1, every distinct score, and one value just above the maximum.
/// Consecutive points with identical rates are merged, keeping the lowest threshold.
inline ValidationCurve roc_curve(const std::vector<double>& scores, const std::vector<bool>& agree,
                                 std::string explainer = "") {
    ValidationCurve curve;
    curve.explainer = std::move(explainer);
    for (bool a : agree) (a ? curve.agree : curve.disagree) += 1;

    std::vector<double> thresholds{-1.0};
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (double s : sorted)
        if (s > -1.0) thresholds.push_back(s);
    const double top = sorted.empty() ? -1.0 : std::max(sorted.back(), -1.0);
    thresholds.push_back(std::nextafter(top, std::numeric_limits<double>::infinity()));

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (double t : thresholds) {
        const auto r = tpr_fpr_at(scores, agree, t);
        RocPoint p{t, r.fpr.value_or(nan), r.tpr.value_or(nan)};
        if (!curve.points.empty()) {
            const auto& q = curve.points.back();
            const bool same_f = (std::isnan(p.fpr) && std::isnan(q.fpr)) || p.fpr == q.fpr;
            const bool same_t = (std::isnan(p.tpr) && std::isnan(q.tpr)) || p.tpr == q.tpr;
            if (same_f && same_t) continue;
        }
        curve.points.push_back(p);
    }
    if (curve.agree && curve.disagree) {
        std::vector<RocPoint> by_fpr = curve.points;
        std::sort(by_fpr.begin(), by_fpr.end(), [](const RocPoint& a, const RocPoint& b) {
            return a.fpr != b.fpr ? a.fpr < b.fpr : a.tpr < b.tpr;
        });
        double area = 0.0;
        for (std::size_t i = 1; i < by_fpr.size(); ++i)
            area += (by_fpr[i].fpr - by_fpr[i - 1].fpr) * 0.5 * (by_fpr[i].tpr + by_fpr[i - 1].tpr);
        curve.auc = area;
    }
    return curve;
}

/// Trapezoidal area of a curve; missing when either group was empty.
inline std::optional<double> auc(const ValidationCurve& curve) { return curve.auc; }

}  // namespace xagg
