#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "xagg/csv.hpp"
#include "xagg/robustness.hpp"
#include "xagg/validation.hpp"

namespace xagg {

/// Explainer columns in report order.
inline constexpr std::array<const char*, 4> explainer_names{"knn", "rf", "nn", "agg"};

struct AccuracyRow {
    std::string dataset;
    std::size_t numeric = 0, categorical = 0;
    std::size_t train = 0, valid = 0, test = 0;
    std::array<double, 3> accuracy{0, 0, 0};  // knn, rf, nn
};

/// Per-dataset numbers behind the summary tables.
struct DatasetSummary {
    std::string dataset;
    std::optional<AccuracyRow> accuracy;
    std::array<std::optional<double>, 4> robustness;  // mean score per explainer
    std::optional<RetentionReport> retention;         // joint-mode neighbourhoods
    std::array<std::optional<double>, 4> single_retention;  // knn, rf, nn, joint means
    std::array<std::optional<double>, 4> auc;
};

namespace detail {

inline std::string pct(std::optional<double> v) { return v ? csv::format_fixed(100.0 * *v, 2) : "N/A"; }

template <std::size_t N>
std::string best_of(const std::array<std::optional<double>, N>& values, std::size_t count = N) {
    std::optional<double> best;
    for (std::size_t i = 0; i < count; ++i)
        if (values[i] && (!best || *values[i] > *best)) best = values[i];
    std::string out;
    if (!best) return out;
    for (std::size_t i = 0; i < count; ++i) {
        if (values[i] && *values[i] == *best) {
            if (!out.empty()) out += ';';
            out += explainer_names[i];
        }
    }
    return out;
}

}  // namespace detail

inline std::string accuracy_table(const std::vector<DatasetSummary>& rows) {
    csv::Writer w;
    w.row({"dataset", "num", "cat", "train", "valid", "test", "knn", "rf", "nn", "best"});
    for (const auto& s : rows) {
        if (!s.accuracy) continue;
        const auto& a = *s.accuracy;
        std::array<std::optional<double>, 3> acc{a.accuracy[0], a.accuracy[1], a.accuracy[2]};
        w.row({s.dataset, std::to_string(a.numeric), std::to_string(a.categorical), std::to_string(a.train),
               std::to_string(a.valid), std::to_string(a.test), detail::pct(acc[0]), detail::pct(acc[1]),
               detail::pct(acc[2]), detail::best_of(acc)});
    }
    return w.str();
}

/// Mean robustness per explainer, in percent.
inline std::string robustness_table(const std::vector<DatasetSummary>& rows) {
    csv::Writer w;
    w.row({"dataset", "knn", "rf", "nn", "agg", "best"});
    for (const auto& s : rows)
        w.row({s.dataset, detail::pct(s.robustness[0]), detail::pct(s.robustness[1]), detail::pct(s.robustness[2]),
               detail::pct(s.robustness[3]), detail::best_of(s.robustness)});
    return w.str();
}

/// Observation counts and mean joint-mode retention (percent) per concordance group.
inline std::string retention_table(const std::vector<DatasetSummary>& rows) {
    csv::Writer w;
    w.row({"dataset", "test_obs", "test_pct", "agree_obs", "agree_pct", "knn_obs", "knn_pct", "rf_obs", "rf_pct",
           "nn_obs", "nn_pct", "best"});
    for (const auto& s : rows) {
        if (!s.retention) {
            w.row({s.dataset, "N/A", "N/A", "N/A", "N/A", "N/A", "N/A", "N/A", "N/A", "N/A", "N/A", ""});
            continue;
        }
        const auto& r = *s.retention;
        csv::Record rec{s.dataset, std::to_string(r.test.count), detail::pct(r.test.mean)};
        std::optional<double> best;
        for (const auto& g : r.groups) {
            rec.push_back(std::to_string(g.count));
            rec.push_back(detail::pct(g.mean));
            if (g.mean && (!best || *g.mean > *best)) best = g.mean;
        }
        std::string best_name;
        for (std::size_t g = 0; g < 4; ++g) {
            if (best && r.groups[g].mean && *r.groups[g].mean == *best) {
                if (!best_name.empty()) best_name += ';';
                best_name += to_string(all_groups[g]);
            }
        }
        rec.push_back(best_name);
        w.row(rec);
    }
    return w.str();
}

/// Mean single-model retention per model and joint retention, in percent.
inline std::string retention_by_model_table(const std::vector<DatasetSummary>& rows) {
    csv::Writer w;
    w.row({"dataset", "knn", "rf", "nn", "joint"});
    for (const auto& s : rows)
        w.row({s.dataset, detail::pct(s.single_retention[0]), detail::pct(s.single_retention[1]),
               detail::pct(s.single_retention[2]), detail::pct(s.single_retention[3])});
    return w.str();
}

inline std::string auc_table(const std::vector<DatasetSummary>& rows) {
    csv::Writer w;
    w.row({"dataset", "knn", "rf", "nn", "agg", "best"});
    auto f = [](std::optional<double> v) { return v ? csv::format_fixed(*v, 4) : std::string("N/A"); };
    for (const auto& s : rows)
        w.row({s.dataset, f(s.auc[0]), f(s.auc[1]), f(s.auc[2]), f(s.auc[3]), detail::best_of(s.auc)});
    return w.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    out << text;
}

/// Writes tables/{accuracy,robustness,retention,retention_by_model,auc}.csv.
inline void emit_tables(const std::filesystem::path& out_dir, const std::vector<DatasetSummary>& rows) {
    const auto dir = out_dir / "tables";
    write_text(dir / "accuracy.csv", accuracy_table(rows));
    write_text(dir / "robustness.csv", robustness_table(rows));
    write_text(dir / "retention.csv", retention_table(rows));
    write_text(dir / "retention_by_model.csv", retention_by_model_table(rows));
    write_text(dir / "auc.csv", auc_table(rows));
}

// ---------------------------------------------------------------------------
// Plot data and SVG

inline constexpr std::size_t kHistogramBins = 20;

/// Counts over 20 equal bins on [-1, 1]; the top edge falls in the last bin.
inline std::vector<std::size_t> histogram(const std::vector<double>& scores, std::size_t bins = kHistogramBins) {
    std::vector<std::size_t> counts(bins, 0);
    for (double s : scores) {
        const double t = (std::clamp(s, -1.0, 1.0) + 1.0) / 2.0 * static_cast<double>(bins);
        counts[std::min(bins - 1, static_cast<std::size_t>(t))] += 1;
    }
    return counts;
}

/// One attribution comparison: per feature, the three model coefficients and the aggregation.
struct AttributionComparison {
    long long point = -1;
    std::vector<std::string> feature_names;
    std::array<Vector, 4> values;  // knn, rf, nn, agg (knn/rf/nn already sign-aligned)
};

namespace svg {

inline std::string num(double v) { return csv::format_fixed(v, 2); }

class Canvas {
public:
    Canvas(double w, double h) : w_(w), h_(h) {}
    void line(double x1, double y1, double x2, double y2, const std::string& style) {
        body_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
              << "\" style=\"" << style << "\"/>\n";
    }
    void rect(double x, double y, double w, double h, const std::string& fill) {
        body_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
              << "\" fill=\"" << fill << "\" fill-opacity=\"0.5\"/>\n";
    }
    void circle(double x, double y, double r, const std::string& fill) {
        body_ << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"" << num(r) << "\" fill=\"" << fill
              << "\"/>\n";
    }
    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
        body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) body_ << (i ? " " : "") << num(pts[i].first) << ',' << num(pts[i].second);
        body_ << "\"/>\n";
    }
    void text(double x, double y, const std::string& s, const std::string& anchor = "middle") {
        body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"11\" text-anchor=\"" << anchor
              << "\">" << s << "</text>\n";
    }
    std::string str() const {
        std::ostringstream out;
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w_) << "\" height=\"" << num(h_)
            << "\" viewBox=\"0 0 " << num(w_) << ' ' << num(h_) << "\">\n"
            << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
            << body_.str() << "</svg>\n";
        return out.str();
    }

private:
    double w_, h_;
    std::ostringstream body_;
};

inline constexpr std::array<const char*, 4> colours{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"};

}  // namespace svg

inline std::string attribution_comparison_csv(const AttributionComparison& c) {
    csv::Writer w;
    w.row({"feature", "name", "knn", "rf", "nn", "agg"});
    for (std::size_t j = 0; j < c.feature_names.size(); ++j)
        w.row({std::to_string(j + 1), c.feature_names[j], csv::format_double(c.values[0][j]),
               csv::format_double(c.values[1][j]), csv::format_double(c.values[2][j]),
               csv::format_double(c.values[3][j])});
    return w.str();
}

/// Per feature: the observed range of the three model values as a vertical line, the model
/// values as dots, and the aggregation as a larger red dot labelled with its value.
inline std::string attribution_comparison_svg(const AttributionComparison& c) {
    const std::size_t m = c.feature_names.size();
    const double left = 50, top = 20, plot_h = 300, step = 40;
    const double width = left + step * static_cast<double>(m + 1), height = top + plot_h + 40;
    svg::Canvas cv(width, height);
    auto y_of = [&](double v) { return top + (1.0 - std::clamp(v, -1.0, 1.0)) / 2.0 * plot_h; };
    cv.line(left, y_of(0), width - 10, y_of(0), "stroke:#999;stroke-dasharray:4");
    cv.text(left - 8, y_of(1) + 4, "1", "end");
    cv.text(left - 8, y_of(-1) + 4, "-1", "end");
    for (std::size_t j = 0; j < m; ++j) {
        const double x = left + step * static_cast<double>(j + 1);
        double lo = c.values[0][j], hi = lo;
        for (int l = 1; l < 3; ++l) {
            lo = std::min(lo, c.values[l][j]);
            hi = std::max(hi, c.values[l][j]);
        }
        cv.line(x, y_of(hi), x, y_of(lo), "stroke:black;stroke-width:1");
        for (int l = 0; l < 3; ++l) cv.circle(x, y_of(c.values[l][j]), 4, svg::colours[l]);
        cv.circle(x, y_of(c.values[3][j]), 5, svg::colours[3]);
        cv.text(x, top + plot_h + 15, std::to_string(j + 1));
        cv.text(x, top + plot_h + 30, "(" + csv::format_fixed(c.values[3][j], 2) + ")");
    }
    return cv.str();
}

/// Histogram rows: explainer, bin_lo, bin_hi, count.
inline std::string histogram_csv(const std::array<std::vector<double>, 4>& scores) {
    csv::Writer w;
    w.row({"explainer", "bin_lo", "bin_hi", "count"});
    for (std::size_t e = 0; e < 4; ++e) {
        const auto h = histogram(scores[e]);
        for (std::size_t b = 0; b < h.size(); ++b) {
            const double lo = -1.0 + 2.0 * static_cast<double>(b) / static_cast<double>(h.size());
            const double hi = -1.0 + 2.0 * static_cast<double>(b + 1) / static_cast<double>(h.size());
            w.row({explainer_names[e], csv::format_double(lo), csv::format_double(hi), std::to_string(h[b])});
        }
    }
    return w.str();
}

inline std::string histogram_svg(const std::array<std::vector<double>, 4>& scores) {
    const double panel_w = 220, panel_h = 160, pad = 30;
    svg::Canvas cv(pad + 4 * (panel_w + pad), panel_h + 2 * pad);
    for (std::size_t e = 0; e < 4; ++e) {
        const auto h = histogram(scores[e]);
        const double x0 = pad + static_cast<double>(e) * (panel_w + pad);
        const std::size_t peak = std::max<std::size_t>(1, *std::max_element(h.begin(), h.end()));
        const double bw = panel_w / static_cast<double>(h.size());
        for (std::size_t b = 0; b < h.size(); ++b) {
            const double bh = panel_h * static_cast<double>(h[b]) / static_cast<double>(peak);
            if (h[b]) cv.rect(x0 + bw * static_cast<double>(b), pad + panel_h - bh, bw, bh, svg::colours[e]);
        }
        cv.line(x0, pad + panel_h, x0 + panel_w, pad + panel_h, "stroke:black");
        cv.text(x0 + panel_w / 2, pad - 8, explainer_names[e]);
        cv.text(x0, pad + panel_h + 14, "-1");
        cv.text(x0 + panel_w, pad + panel_h + 14, "1");
    }
    return cv.str();
}

/// ROC points: explainer, r_th, FPR, TPR.
inline std::string roc_csv(const std::vector<ValidationCurve>& curves) {
    csv::Writer w;
    w.row({"explainer", "r_th", "fpr", "tpr"});
    for (const auto& c : curves)
        for (const auto& p : c.points)
            w.row({c.explainer, csv::format_double(p.threshold), csv::format_double(p.fpr), csv::format_double(p.tpr)});
    return w.str();
}

inline std::string roc_svg(const std::vector<ValidationCurve>& curves) {
    const double pad = 40, size = 300;
    svg::Canvas cv(size + 2 * pad + 80, size + 2 * pad);
    auto px = [&](double f) { return pad + f * size; };
    auto py = [&](double t) { return pad + (1.0 - t) * size; };
    cv.line(px(0), py(0), px(1), py(0), "stroke:black");
    cv.line(px(0), py(0), px(0), py(1), "stroke:black");
    cv.line(px(0), py(0), px(1), py(1), "stroke:gray;stroke-dasharray:3");
    cv.text(px(0.5), py(0) + 28, "FPR");
    cv.text(px(0) - 24, py(0.5), "TPR");
    for (std::size_t i = 0; i < curves.size(); ++i) {
        std::vector<std::pair<double, double>> pts;
        auto sorted = curves[i].points;
        std::sort(sorted.begin(), sorted.end(), [](const RocPoint& a, const RocPoint& b) {
            return a.fpr != b.fpr ? a.fpr < b.fpr : a.tpr < b.tpr;
        });
        for (const auto& p : sorted)
            if (!std::isnan(p.fpr) && !std::isnan(p.tpr)) pts.push_back({px(p.fpr), py(p.tpr)});
        const std::string colour = svg::colours[i % svg::colours.size()];
        if (pts.size() >= 2) cv.polyline(pts, colour);
        cv.text(px(1) + 12, pad + 14.0 * static_cast<double>(i + 1), curves[i].explainer, "start");
        cv.line(px(1) + 2, pad + 14.0 * static_cast<double>(i + 1) - 4, px(1) + 10,
                pad + 14.0 * static_cast<double>(i + 1) - 4, "stroke:" + colour + ";stroke-width:2");
    }
    return cv.str();
}

/// Writes plots/{attribution_<id>,robustness_hist,roc}.{csv,svg}.
inline void emit_plots(const std::filesystem::path& out_dir, const std::optional<AttributionComparison>& example,
                       const std::array<std::vector<double>, 4>& scores, const std::vector<ValidationCurve>& curves) {
    const auto dir = out_dir / "plots";
    if (example) {
        const std::string stem = "attribution_" + std::to_string(example->point);
        write_text(dir / (stem + ".csv"), attribution_comparison_csv(*example));
        write_text(dir / (stem + ".svg"), attribution_comparison_svg(*example));
    }
    write_text(dir / "robustness_hist.csv", histogram_csv(scores));
    write_text(dir / "robustness_hist.svg", histogram_svg(scores));
    write_text(dir / "roc.csv", roc_csv(curves));
    write_text(dir / "roc.svg", roc_svg(curves));
}

}  // namespace xagg
