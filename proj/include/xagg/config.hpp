#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "xagg/data_pipeline.hpp"
#include "xagg/forest.hpp"
#include "xagg/mlp.hpp"
#include "xagg/neighbourhood.hpp"

namespace xagg {

/// Everything needed to reproduce one experiment. Relative paths resolve against the
/// directory holding the config file.
///
/// JSON layout (all blocks except "name" and "dataset" optional):
///
///     {
///       "name": "cancer",
///       "dataset": {"path": "...csv", "positive_label": "M", "corr_threshold": 0.9,
///                   "positive_threshold": 6, "delimiter": ";",
///                   "columns": [{"name": "x", "kind": "numeric|categorical|ignored", "target": false}]},
///       "split":   {"train": 397, "valid": 121, "test": 50},
///       "models":  {"knn": {"k": 5}, "forest": {"trees": 25, "max_depth": 12, "min_samples_split": 2},
///                   "mlp": {"hidden": [30], "epochs": 100, "learning_rate": 0.001, "batch_size": 32,
///                           "weight_decay": 0.0}},
///       "explainers": {"k_e": 5, "deeplift_reference": "train_mean|zeros", "delta": 0.05},
///       "neighbourhood": {"k_m": 5, "alpha": 0.05, "alpha_cat": 0.05, "candidates": 100,
///                         "clusters": 0, "retention_target": 0.95, "tune": true},
///       "seed": 42,
///       "output": "../runs/cancer"
///     }
struct ExperimentConfig {
    std::string name;
    std::filesystem::path dataset_path;
    Schema schema;
    double corr_threshold = 0.9;
    SplitSizes split;

    std::size_t knn_k = 5;
    ForestParams forest;
    MlpParams mlp;

    std::optional<std::size_t> k_e;  // defaults to knn_k
    std::string deeplift_reference = "train_mean";
    double delta = 0.05;

    PerturbTheta theta;
    std::size_t clusters = 0;  // 0: ceil(sqrt(validation size))
    double retention_target = 0.95;
    bool tune = true;

    std::uint64_t seed = 42;
    std::filesystem::path output = "runs/experiment";

    nlohmann::json source;  // config as written, echoed into the manifest

    std::size_t explain_k() const { return k_e.value_or(knn_k); }

    std::uint64_t split_seed() const { return mix_seed(seed, 1); }
    std::uint64_t forest_seed() const { return mix_seed(seed, 2); }
    std::uint64_t mlp_seed() const { return mix_seed(seed, 3); }
    std::uint64_t medoid_seed() const { return mix_seed(seed, 4); }
    std::uint64_t perturb_seed() const { return mix_seed(seed, 5); }
};

inline ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    ExperimentConfig c;
    c.source = j;
    try {
        c.name = j.at("name").get<std::string>();
        const auto& d = j.at("dataset");
        std::filesystem::path p = d.at("path").get<std::string>();
        c.dataset_path = p.is_absolute() ? p : base_dir / p;
        for (const auto& col : d.at("columns")) {
            ColumnSpec s;
            s.name = col.at("name").get<std::string>();
            s.kind = column_kind_from_string(col.value("kind", std::string("numeric")));
            s.target = col.value("target", false);
            c.schema.columns.push_back(s);
        }
        if (d.contains("positive_label")) c.schema.positive_label = d["positive_label"].get<std::string>();
        if (d.contains("missing")) c.schema.missing_tokens = d["missing"].get<std::vector<std::string>>();
        if (d.contains("positive_threshold")) c.schema.positive_threshold = d["positive_threshold"].get<double>();
        if (d.contains("delimiter")) {
            const auto delim = d["delimiter"].get<std::string>();
            if (delim.size() != 1) throw InputError("config: delimiter must be one character");
            c.schema.delimiter = delim[0];
        }
        c.corr_threshold = d.value("corr_threshold", 0.9);

        const auto& s = j.at("split");
        c.split = {s.at("train").get<std::size_t>(), s.at("valid").get<std::size_t>(), s.at("test").get<std::size_t>()};

        if (j.contains("models")) {
            const auto& m = j["models"];
            if (m.contains("knn")) c.knn_k = m["knn"].value("k", c.knn_k);
            if (m.contains("forest")) {
                const auto& f = m["forest"];
                c.forest.trees = f.value("trees", c.forest.trees);
                c.forest.tree.max_depth = f.value("max_depth", c.forest.tree.max_depth);
                c.forest.tree.min_samples_split = f.value("min_samples_split", c.forest.tree.min_samples_split);
                c.forest.tree.max_features = f.value("max_features", c.forest.tree.max_features);
            }
            if (m.contains("mlp")) {
                const auto& n = m["mlp"];
                c.mlp.hidden = n.value("hidden", c.mlp.hidden);
                c.mlp.epochs = n.value("epochs", c.mlp.epochs);
                c.mlp.learning_rate = n.value("learning_rate", c.mlp.learning_rate);
                c.mlp.batch_size = n.value("batch_size", c.mlp.batch_size);
                c.mlp.weight_decay = n.value("weight_decay", c.mlp.weight_decay);
            }
        }
        if (j.contains("explainers")) {
            const auto& e = j["explainers"];
            if (e.contains("k_e") && !e["k_e"].is_null()) c.k_e = e["k_e"].get<std::size_t>();
            c.deeplift_reference = e.value("deeplift_reference", c.deeplift_reference);
            c.delta = e.value("delta", c.delta);
        }
        if (j.contains("neighbourhood")) {
            const auto& n = j["neighbourhood"];
            c.theta.k_m = n.value("k_m", c.theta.k_m);
            c.theta.alpha = n.value("alpha", c.theta.alpha);
            c.theta.alpha_cat = n.value("alpha_cat", c.theta.alpha_cat);
            c.theta.candidates = n.value("candidates", c.theta.candidates);
            c.clusters = n.value("clusters", c.clusters);
            c.retention_target = n.value("retention_target", c.retention_target);
            c.tune = n.value("tune", c.tune);
        }
        c.seed = j.value("seed", c.seed);
        if (j.contains("output")) {
            std::filesystem::path o = j["output"].get<std::string>();
            c.output = o.is_absolute() ? o : base_dir / o;
        } else {
            c.output = base_dir / "runs" / c.name;
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("config: ") + e.what());
    }

    if (c.knn_k < 1) throw InputError("config: knn.k must be >= 1");
    if (c.forest.trees < 1) throw InputError("config: forest.trees must be >= 1");
    if (c.deeplift_reference != "train_mean" && c.deeplift_reference != "zeros")
        throw InputError("config: deeplift_reference must be 'train_mean' or 'zeros'");
    c.theta.validate();
    if (!(c.retention_target > 0.0 && c.retention_target < 1.0))
        throw InputError("config: retention_target must lie in (0, 1)");
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw InputError("config not found: " + path.string());
    std::ifstream in(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("config: " + std::string(e.what()));
    }
    return parse_config(j, std::filesystem::absolute(path).parent_path());
}

/// Worker count: XAGG_THREADS when set, else the hardware concurrency.
inline unsigned worker_threads() {
    if (const char* env = std::getenv("XAGG_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace xagg
