#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xagg/aggregation.hpp"
#include "xagg/config.hpp"
#include "xagg/csv.hpp"
#include "xagg/data_pipeline.hpp"
#include "xagg/explainers.hpp"
#include "xagg/models.hpp"
#include "xagg/neighbourhood.hpp"
#include "xagg/reporting.hpp"
#include "xagg/robustness.hpp"
#include "xagg/validation.hpp"

namespace xagg {

inline constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Manifest: the only output carrying timestamps.

inline std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

inline void update_manifest(const fs::path& out, const ExperimentConfig& cfg, const std::string& stage,
                            const nlohmann::json& extra = nlohmann::json::object()) {
    const auto path = out / "manifest.json";
    nlohmann::json m = nlohmann::json::object();
    if (fs::exists(path)) {
        try {
            std::ifstream(path) >> m;
        } catch (const nlohmann::json::exception&) {
            m = nlohmann::json::object();
        }
    }
    m["dataset"] = cfg.name;
    m["software_version"] = kVersion;
    m["config"] = cfg.source;
    m["seed"] = cfg.seed;
    m["derived_seeds"] = {{"split", cfg.split_seed()},     {"forest", cfg.forest_seed()},
                          {"mlp", cfg.mlp_seed()},         {"medoids", cfg.medoid_seed()},
                          {"perturb", cfg.perturb_seed()}};
    m["hyperparameters"] = {{"k", cfg.knn_k},
                            {"k_e", cfg.explain_k()},
                            {"B", cfg.forest.trees},
                            {"max_depth", cfg.forest.tree.max_depth},
                            {"mlp_hidden", cfg.mlp.hidden},
                            {"mlp_epochs", cfg.mlp.epochs},
                            {"mlp_learning_rate", cfg.mlp.learning_rate},
                            {"corr_threshold", cfg.corr_threshold},
                            {"n", cfg.theta.candidates},
                            {"theta_start", {{"k_m", cfg.theta.k_m}, {"alpha", cfg.theta.alpha}, {"alpha_cat", cfg.theta.alpha_cat}}},
                            {"retention_target", cfg.retention_target},
                            {"deeplift_reference", cfg.deeplift_reference}};
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    m["stages"][stage] = {{"finished_utc", utc_now()}};
    fs::create_directories(out);
    std::ofstream(path, std::ios::binary) << m.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// prepare / train

inline Dataset cmd_prepare(const ExperimentConfig& cfg, const fs::path& out) {
    const RawTable table = load_csv(cfg.dataset_path, cfg.schema);
    Dataset ds = prepare_dataset(table, cfg.split, cfg.split_seed(), cfg.corr_threshold);
    save_dataset(ds, out / "prepared");
    update_manifest(out, cfg, "prepare", {{"rows_loaded", table.rows()}, {"rows_dropped", table.dropped_rows}});
    return ds;
}

inline std::size_t count_categorical_sources(const Dataset& ds) { return ds.layout().groups.size(); }

inline AccuracyRow cmd_train(const ExperimentConfig& cfg, const fs::path& out, unsigned threads = 1) {
    const Dataset ds = load_dataset(out / "prepared");
    const Matrix xtr = ds.rows_of(ds.splits.train);
    const auto ytr = ds.labels_of(ds.splits.train);
    ModelSet models;
    models.knn = KnnModel(xtr, ytr, cfg.knn_k);
    models.rf = ForestModel::fit(xtr, ytr, cfg.forest, cfg.forest_seed(), threads);
    models.nn = MlpModel::fit(xtr, ytr, cfg.mlp, cfg.mlp_seed());
    save_models(models, out / "models");

    AccuracyRow row;
    row.dataset = cfg.name;
    row.numeric = ds.layout().numeric.size();
    row.categorical = count_categorical_sources(ds);
    row.train = ds.splits.train.size();
    row.valid = ds.splits.valid.size();
    row.test = ds.splits.test.size();
    row.accuracy = {accuracy(models.knn, xtr, ytr), accuracy(models.rf, xtr, ytr), accuracy(models.nn, xtr, ytr)};
    nlohmann::json metrics = {{"train_accuracy", {{"knn", row.accuracy[0]}, {"rf", row.accuracy[1]}, {"nn", row.accuracy[2]}}},
                              {"numeric", row.numeric}, {"categorical", row.categorical},
                              {"train", row.train}, {"valid", row.valid}, {"test", row.test}};
    std::ofstream(out / "models" / "metrics.json", std::ios::binary) << metrics.dump(2) << '\n';
    DatasetSummary s;
    s.dataset = cfg.name;
    s.accuracy = row;
    write_text(out / "tables" / "accuracy.csv", accuracy_table({s}));
    update_manifest(out, cfg, "train");
    return row;
}

// ---------------------------------------------------------------------------
// Explanation of a point by all three models, and the aggregation.

class Explainer {
public:
    Explainer(const ModelSet& models, std::size_t k_e, DeepLiftReference ref)
        : models_(models), k_e_(k_e), ref_(std::move(ref)) {}

    Attribution explain(ModelId id, ConstRow x) const {
        switch (id) {
            case ModelId::knn: return explain_knn(models_.knn, x, k_e_);
            case ModelId::rf: return explain_rf(models_.rf, x);
            case ModelId::nn: return explain_deeplift(models_.nn, x, ref_);
        }
        return {};
    }

    std::array<Attribution, 3> explain_all(ConstRow x) const {
        return {explain(ModelId::knn, x), explain(ModelId::rf, x), explain(ModelId::nn, x)};
    }

    /// Aggregation aligned on this point's own majority label.
    static AggregatedAttribution aggregate_at(const std::array<Attribution, 3>& a, const std::array<int, 3>& labels,
                                              AlignedBundle* aligned_out = nullptr) {
        AttributionBundle b{{a.begin(), a.end()}, {labels.begin(), labels.end()}};
        AlignedBundle aligned = align_signs(b);
        auto agg = aggregate(aligned);
        if (aligned_out) *aligned_out = std::move(aligned);
        return agg;
    }

    const ModelSet& models() const { return models_; }

private:
    const ModelSet& models_;
    std::size_t k_e_;
    DeepLiftReference ref_;
};

inline DeepLiftReference make_reference(const ExperimentConfig& cfg, const Dataset& ds, const MlpModel& nn) {
    if (cfg.deeplift_reference == "zeros") return DeepLiftReference::of(nn, Vector(ds.features(), 0.0));
    return DeepLiftReference::mean_of(nn, ds.rows_of(ds.splits.train));
}

inline std::vector<LabelFn> label_functions(const ModelSet& models) {
    return {[&](ConstRow x) { return models.knn.predict(x).label; },
            [&](ConstRow x) { return models.rf.predict(x).label; },
            [&](ConstRow x) { return models.nn.predict(x).label; }};
}

inline std::vector<std::string> feature_names(const Dataset& ds) {
    std::vector<std::string> names;
    for (const auto& c : ds.columns) names.push_back(c.name());
    return names;
}

// ---------------------------------------------------------------------------
// Stage file formats

struct PointAttributions {
    long long point = -1;
    std::array<int, 3> labels{0, 0, 0};
    std::array<Vector, 4> values;  // knn, rf, nn, agg (raw model outputs; agg aligned)
    std::array<bool, 4> zero{false, false, false, false};
};

inline void write_attributions(const fs::path& path, const std::vector<std::string>& names,
                               const std::vector<PointAttributions>& points) {
    csv::Writer w;
    csv::Record header{"point_id", "model", "zero_flag"};
    header.insert(header.end(), names.begin(), names.end());
    w.row(header);
    for (const auto& p : points) {
        for (std::size_t e = 0; e < 4; ++e) {
            csv::Record rec{std::to_string(p.point), explainer_names[e], p.zero[e] ? "1" : "0"};
            for (double v : p.values[e]) rec.push_back(csv::format_double(v));
            w.row(rec);
        }
    }
    w.save(path);
}

inline std::map<long long, PointAttributions> read_attributions(const fs::path& path) {
    const auto t = csv::Table::load(path);
    std::map<long long, PointAttributions> out;
    const std::size_t first = 3;
    for (const auto& r : t.rows()) {
        const long long id = std::stoll(r.at(0));
        auto& p = out[id];
        p.point = id;
        std::size_t e = 0;
        while (e < 4 && r.at(1) != explainer_names[e]) ++e;
        if (e == 4) throw InputError("attributions.csv: unknown model '" + r.at(1) + "'");
        p.zero[e] = r.at(2) == "1";
        p.values[e].clear();
        for (std::size_t c = first; c < r.size(); ++c) p.values[e].push_back(csv::require_double(r[c], "attributions.csv"));
    }
    return out;
}

inline std::map<long long, std::array<int, 3>> read_predictions(const fs::path& path) {
    const auto t = csv::Table::load(path);
    std::map<long long, std::array<int, 3>> out;
    const auto ck = t.column("knn"), cr = t.column("rf"), cn = t.column("nn"), cid = t.column("point_id");
    for (const auto& r : t.rows()) out[std::stoll(r[cid])] = {std::stoi(r[ck]), std::stoi(r[cr]), std::stoi(r[cn])};
    return out;
}

// ---------------------------------------------------------------------------
// explain

inline void stage_explain(const ExperimentConfig& cfg, const fs::path& out, unsigned threads) {
    const Dataset ds = load_dataset(out / "prepared");
    const ModelSet models = load_models(out / "models", ds);
    const Explainer ex(models, cfg.explain_k(), make_reference(cfg, ds, models.nn));
    const auto& test = ds.splits.test;

    std::vector<PointAttributions> points(test.size());
    std::vector<AlignedBundle> aligned(test.size());
    std::vector<AggregatedAttribution> aggs(test.size());
    parallel_for(test.size(), threads, [&](std::size_t i) {
        const auto x = ds.x.row(test[i]);
        auto& p = points[i];
        p.point = static_cast<long long>(test[i]);
        p.labels = models.labels(x);
        const auto a = ex.explain_all(x);
        aggs[i] = Explainer::aggregate_at(a, p.labels, &aligned[i]);
        for (std::size_t l = 0; l < 3; ++l) {
            p.values[l] = a[l].values;
            p.zero[l] = a[l].zero;
        }
        p.values[3] = aggs[i].values;
    });

    const auto dir = out / "points";
    write_attributions(dir / "attributions.csv", feature_names(ds), points);

    csv::Writer pred;
    pred.row({"point_id", "true_label", "knn", "rf", "nn", "group"});
    nlohmann::json detail = nlohmann::json::array();
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& p = points[i];
        pred.row({std::to_string(p.point), std::to_string(ds.y[test[i]]), std::to_string(p.labels[0]),
                  std::to_string(p.labels[1]), std::to_string(p.labels[2]), to_string(concordance_of(p.labels))});
        const auto uncertain =
            uncertain_features(AttributionBundle{aligned[i].attributions, aligned[i].labels}, cfg.delta);
        detail.push_back({{"point_id", p.point},
                          {"labels", p.labels},
                          {"majority", aligned[i].majority},
                          {"flipped", aggs[i].flipped},
                          {"uncertain_features", uncertain}});
    }
    pred.save(dir / "predictions.csv");
    write_text(dir / "aggregation_detail.json", detail.dump(2) + "\n");
    update_manifest(out, cfg, "explain");
}

// ---------------------------------------------------------------------------
// perturb

inline std::size_t default_clusters(std::size_t valid_size) {
    return std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(valid_size)))));
}

inline void stage_perturb(const ExperimentConfig& cfg, const fs::path& out, unsigned threads) {
    const Dataset ds = load_dataset(out / "prepared");
    const ModelSet models = load_models(out / "models", ds);
    const auto layout = ds.layout();
    const Matrix valid = ds.rows_of(ds.splits.valid);
    const std::size_t clusters = cfg.clusters ? cfg.clusters : default_clusters(valid.rows());
    const MedoidIndex index = kmedoids_fit(valid, std::min(clusters, valid.rows()), cfg.medoid_seed(), cfg.theta.k_m);
    const auto fns = label_functions(models);
    const auto& test = ds.splits.test;

    PerturbTheta theta = cfg.theta;
    theta.seed = cfg.perturb_seed();
    std::vector<double> tuned_retention;
    bool reached = true;
    if (cfg.tune) {
        std::vector<long long> ids(test.begin(), test.end());
        auto r = tune_theta(ds.rows_of(test), index, layout, fns, cfg.retention_target, theta, threads, &ids);
        theta = r.theta;
        tuned_retention = r.mean_retention;
        reached = r.reached;
    }

    std::vector<CandidateDraw> draws(test.size());
    parallel_for(test.size(), threads, [&](std::size_t i) {
        draws[i] = draw_candidates(ds.x.row(test[i]), static_cast<long long>(test[i]), index, layout, theta, fns);
    });

    csv::Writer w;
    csv::Record header{"origin_id", "candidate_id", "keep_knn", "keep_rf", "keep_nn", "keep_joint"};
    const auto names = feature_names(ds);
    header.insert(header.end(), names.begin(), names.end());
    w.row(header);
    for (const auto& d : draws) {
        for (std::size_t c = 0; c < d.candidates.rows(); ++c) {
            csv::Record rec{std::to_string(d.origin), std::to_string(c)};
            for (int l = 0; l < 3; ++l) rec.push_back(keeps(d, c, FilterMode::single(l)) ? "1" : "0");
            rec.push_back(keeps(d, c, FilterMode::joint()) ? "1" : "0");
            for (double v : d.candidates.row(c)) rec.push_back(csv::format_double(v));
            w.row(rec);
        }
    }
    w.save(out / "points" / "neighbourhoods.csv");

    nlohmann::json th = {{"k_m", theta.k_m},
                         {"alpha", theta.alpha},
                         {"alpha_cat", theta.alpha_cat},
                         {"candidates", theta.candidates},
                         {"seed", theta.seed},
                         {"clusters", index.size()},
                         {"tuned", cfg.tune},
                         {"target_reached", reached},
                         {"tuning_retention", tuned_retention}};
    write_text(out / "points" / "theta.json", th.dump(2) + "\n");
    update_manifest(out, cfg, "perturb", {{"theta", th}});
}

// ---------------------------------------------------------------------------
// robustness

struct PointRobustness {
    long long point = -1;
    Concordance group = Concordance::agree;
    std::array<std::optional<double>, 4> score;
    std::array<std::size_t, 4> size{0, 0, 0, 0};
    std::array<double, 4> retention{0, 0, 0, 0};  // knn, rf, nn single modes; joint
};

struct StoredNeighbourhood {
    Matrix candidates;
    std::vector<std::array<bool, 4>> keep;  // knn, rf, nn, joint
};

inline std::map<long long, StoredNeighbourhood> read_neighbourhoods(const fs::path& path, std::size_t m) {
    const auto t = csv::Table::load(path);
    std::map<long long, StoredNeighbourhood> out;
    for (const auto& r : t.rows()) {
        if (r.size() != 6 + m) throw InputError("neighbourhoods.csv: unexpected width");
        auto& nb = out[std::stoll(r[0])];
        if (nb.candidates.cols() == 0) nb.candidates = Matrix(0, m);
        Vector v(m);
        for (std::size_t j = 0; j < m; ++j) v[j] = csv::require_double(r[6 + j], "neighbourhoods.csv");
        nb.candidates.append_row(v);
        nb.keep.push_back({r[2] == "1", r[3] == "1", r[4] == "1", r[5] == "1"});
    }
    return out;
}

inline void write_point_robustness(const fs::path& path, const std::vector<PointRobustness>& rows) {
    csv::Writer w;
    csv::Record header{"point_id", "group"};
    for (auto e : explainer_names) {
        header.push_back(std::string(e) + "_score");
        header.push_back(std::string(e) + "_size");
        header.push_back(std::string(e) + "_retention");
    }
    w.row(header);
    for (const auto& p : rows) {
        csv::Record rec{std::to_string(p.point), to_string(p.group)};
        for (std::size_t e = 0; e < 4; ++e) {
            rec.push_back(p.score[e] ? csv::format_double(*p.score[e]) : "");
            rec.push_back(std::to_string(p.size[e]));
            rec.push_back(csv::format_double(p.retention[e]));
        }
        w.row(rec);
    }
    w.save(path);
}

inline std::vector<PointRobustness> read_point_robustness(const fs::path& path) {
    const auto t = csv::Table::load(path);
    std::vector<PointRobustness> out;
    for (const auto& r : t.rows()) {
        PointRobustness p;
        p.point = std::stoll(r.at(0));
        p.group = concordance_from_string(r.at(1));
        for (std::size_t e = 0; e < 4; ++e) {
            const auto& s = r.at(2 + 3 * e);
            if (!s.empty()) p.score[e] = csv::require_double(s, "robustness.csv");
            p.size[e] = std::stoul(r.at(3 + 3 * e));
            p.retention[e] = csv::require_double(r.at(4 + 3 * e), "robustness.csv");
        }
        out.push_back(p);
    }
    return out;
}

inline void stage_robustness(const ExperimentConfig& cfg, const fs::path& out, unsigned threads) {
    const Dataset ds = load_dataset(out / "prepared");
    const ModelSet models = load_models(out / "models", ds);
    const Explainer ex(models, cfg.explain_k(), make_reference(cfg, ds, models.nn));
    const auto attributions = read_attributions(out / "points" / "attributions.csv");
    const auto predictions = read_predictions(out / "points" / "predictions.csv");
    const auto neighbourhoods = read_neighbourhoods(out / "points" / "neighbourhoods.csv", ds.features());
    const auto& test = ds.splits.test;

    std::vector<PointRobustness> rows(test.size());
    parallel_for(test.size(), threads, [&](std::size_t i) {
        const auto id = static_cast<long long>(test[i]);
        const auto& origin = attributions.at(id);
        const auto& labels = predictions.at(id);
        const auto& nb = neighbourhoods.at(id);
        auto& row = rows[i];
        row.point = id;
        row.group = concordance_of(labels);
        std::array<double, 4> sum{0, 0, 0, 0};
        for (std::size_t c = 0; c < nb.candidates.rows(); ++c) {
            const auto& keep = nb.keep[c];
            if (!(keep[0] || keep[1] || keep[2] || keep[3])) continue;
            const auto xt = nb.candidates.row(c);
            std::array<std::optional<Attribution>, 3> a;
            for (std::size_t l = 0; l < 3; ++l)
                if (keep[l] || keep[3]) a[l] = ex.explain(all_models[l], xt);
            for (std::size_t l = 0; l < 3; ++l) {
                if (!keep[l]) continue;
                sum[l] += spearman_rho(origin.values[l], a[l]->values);
                ++row.size[l];
            }
            if (keep[3]) {
                // each side aligned on its own majority; the joint filter keeps every label equal
                const auto agg = Explainer::aggregate_at({*a[0], *a[1], *a[2]}, models.labels(xt));
                sum[3] += spearman_rho(origin.values[3], agg.values);
                ++row.size[3];
            }
        }
        const double n = static_cast<double>(nb.candidates.rows());
        for (std::size_t e = 0; e < 4; ++e) {
            row.retention[e] = n > 0 ? static_cast<double>(row.size[e]) / n : 0.0;
            if (row.size[e]) row.score[e] = sum[e] / static_cast<double>(row.size[e]);
        }
    });
    for (const auto& r : rows)
        if (!r.score[3]) warn("point " + std::to_string(r.point) + ": empty joint neighbourhood, robustness missing");
    write_point_robustness(out / "points" / "robustness.csv", rows);
    update_manifest(out, cfg, "robustness");
}

// ---------------------------------------------------------------------------
// validate / report

/// One ROC curve per explainer; points without a score are excluded.
inline std::vector<ValidationCurve> validation_curves(const std::vector<PointRobustness>& rows,
                                                      std::array<std::size_t, 4>* excluded = nullptr) {
    std::vector<ValidationCurve> curves;
    for (std::size_t e = 0; e < 4; ++e) {
        std::vector<double> scores;
        std::vector<bool> agree;
        std::size_t missing = 0;
        for (const auto& r : rows) {
            if (!r.score[e]) {
                ++missing;
                continue;
            }
            scores.push_back(*r.score[e]);
            agree.push_back(r.group == Concordance::agree);
        }
        if (excluded) (*excluded)[e] = missing;
        curves.push_back(roc_curve(scores, agree, explainer_names[e]));
    }
    return curves;
}

inline std::string diagnostics_csv(const std::array<std::size_t, 4>& excluded, const std::vector<ValidationCurve>& curves) {
    csv::Writer w;
    w.row({"explainer", "excluded_points", "agree_points", "disagree_points"});
    for (std::size_t e = 0; e < 4; ++e)
        w.row({explainer_names[e], std::to_string(excluded[e]), std::to_string(curves[e].agree),
               std::to_string(curves[e].disagree)});
    return w.str();
}

inline void stage_validate(const ExperimentConfig& cfg, const fs::path& out) {
    const auto rows = read_point_robustness(out / "points" / "robustness.csv");
    std::array<std::size_t, 4> excluded{};
    const auto curves = validation_curves(rows, &excluded);
    DatasetSummary s;
    s.dataset = cfg.name;
    for (std::size_t e = 0; e < 4; ++e) s.auc[e] = curves[e].auc;
    write_text(out / "plots" / "roc.csv", roc_csv(curves));
    write_text(out / "tables" / "auc.csv", auc_table({s}));
    write_text(out / "tables" / "diagnostics.csv", diagnostics_csv(excluded, curves));
    update_manifest(out, cfg, "validate");
}

/// Rebuilds the per-dataset summary from the persisted point files.
inline DatasetSummary summarize_run(const std::string& name, const fs::path& out) {
    DatasetSummary s;
    s.dataset = name;
    const auto metrics_path = out / "models" / "metrics.json";
    if (fs::exists(metrics_path)) {
        nlohmann::json j;
        std::ifstream(metrics_path) >> j;
        AccuracyRow a;
        a.dataset = name;
        a.numeric = j.at("numeric");
        a.categorical = j.at("categorical");
        a.train = j.at("train");
        a.valid = j.at("valid");
        a.test = j.at("test");
        a.accuracy = {j["train_accuracy"].at("knn"), j["train_accuracy"].at("rf"), j["train_accuracy"].at("nn")};
        s.accuracy = a;
    }
    const auto rob_path = out / "points" / "robustness.csv";
    if (!fs::exists(rob_path)) return s;
    const auto rows = read_point_robustness(rob_path);
    for (std::size_t e = 0; e < 4; ++e) {
        double sum = 0;
        std::size_t n = 0;
        for (const auto& r : rows)
            if (r.score[e]) {
                sum += *r.score[e];
                ++n;
            }
        if (n) s.robustness[e] = sum / static_cast<double>(n);
        double ret = 0;
        for (const auto& r : rows) ret += r.retention[e];
        if (!rows.empty()) s.single_retention[e] = ret / static_cast<double>(rows.size());
    }
    ConcordancePartition part;
    std::vector<double> joint;
    for (const auto& r : rows) {
        part.groups.push_back(r.group);
        ++part.counts[static_cast<std::size_t>(r.group)];
        joint.push_back(r.retention[3]);
    }
    s.retention = retention_report(joint, part);
    const auto curves = validation_curves(rows);
    for (std::size_t e = 0; e < 4; ++e) s.auc[e] = curves[e].auc;
    return s;
}

inline void stage_report(const ExperimentConfig& cfg, const fs::path& out) {
    const auto summary = summarize_run(cfg.name, out);
    emit_tables(out, {summary});

    const auto rows = read_point_robustness(out / "points" / "robustness.csv");
    std::array<std::size_t, 4> excluded{};
    const auto curves = validation_curves(rows, &excluded);
    write_text(out / "tables" / "diagnostics.csv", diagnostics_csv(excluded, curves));
    std::array<std::vector<double>, 4> scores;
    for (const auto& r : rows)
        for (std::size_t e = 0; e < 4; ++e)
            if (r.score[e]) scores[e].push_back(*r.score[e]);

    std::optional<AttributionComparison> example;
    const auto attributions = read_attributions(out / "points" / "attributions.csv");
    const auto predictions = read_predictions(out / "points" / "predictions.csv");
    if (!rows.empty()) {
        const auto id = rows.front().point;
        const auto& a = attributions.at(id);
        const auto& labels = predictions.at(id);
        const int majority = (labels[0] + labels[1] + labels[2]) >= 2 ? 1 : 0;
        AttributionComparison c;
        c.point = id;
        c.feature_names = csv::Table::load(out / "points" / "attributions.csv").header();
        c.feature_names.erase(c.feature_names.begin(), c.feature_names.begin() + 3);
        for (std::size_t l = 0; l < 3; ++l) {
            c.values[l] = a.values[l];
            if (labels[l] != majority)
                for (auto& v : c.values[l]) v = -v;
        }
        c.values[3] = a.values[3];
        example = c;
    }
    emit_plots(out, example, scores, curves);
    update_manifest(out, cfg, "report");
}

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& run_stages() {
    static const std::vector<std::string> s{"explain", "perturb", "robustness", "validate", "report"};
    return s;
}

/// Runs the named stage, or every stage in order for "all".
inline void cmd_run(const ExperimentConfig& cfg, const fs::path& out, const std::string& stage = "all",
                    unsigned threads = 1) {
    if (!fs::exists(out / "models" / "forest.json")) throw InputError("no trained models in " + out.string());
    auto run_one = [&](const std::string& s) {
        if (s == "explain") stage_explain(cfg, out, threads);
        else if (s == "perturb") stage_perturb(cfg, out, threads);
        else if (s == "robustness") stage_robustness(cfg, out, threads);
        else if (s == "validate") stage_validate(cfg, out);
        else if (s == "report") stage_report(cfg, out);
        else throw InputError("unknown stage '" + s + "'");
    };
    if (stage == "all") {
        for (const auto& s : run_stages()) run_one(s);
    } else {
        run_one(stage);
    }
}

}  // namespace xagg
