#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xagg/data_pipeline.hpp"
#include "xagg/forest.hpp"
#include "xagg/knn.hpp"
#include "xagg/mlp.hpp"
#include "xagg/prediction.hpp"

namespace xagg {

/// Model families in the fixed order used for concordance groups and reports.
enum class ModelId { knn = 0, rf = 1, nn = 2 };

inline constexpr std::array<ModelId, 3> all_models{ModelId::knn, ModelId::rf, ModelId::nn};

inline const char* to_string(ModelId id) {
    switch (id) {
        case ModelId::knn: return "knn";
        case ModelId::rf: return "rf";
        case ModelId::nn: return "nn";
    }
    return "?";
}

inline Prediction model_predict(const KnnModel& m, ConstRow x) { return m.predict(x); }
inline Prediction model_predict(const ForestModel& m, ConstRow x) { return m.predict(x); }
inline Prediction model_predict(const MlpModel& m, ConstRow x) { return m.predict(x); }

/// The three fitted models of one experiment.
struct ModelSet {
    KnnModel knn;
    ForestModel rf;
    MlpModel nn;

    Prediction predict(ModelId id, ConstRow x) const {
        switch (id) {
            case ModelId::knn: return knn.predict(x);
            case ModelId::rf: return rf.predict(x);
            case ModelId::nn: return nn.predict(x);
        }
        return {};
    }

    std::array<int, 3> labels(ConstRow x) const {
        return {knn.predict(x).label, rf.predict(x).label, nn.predict(x).label};
    }
};

template <typename Model>
double accuracy(const Model& model, const Matrix& x, const std::vector<int>& y) {
    if (x.rows() == 0) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) hits += model_predict(model, x.row(i)).label == y[i];
    return static_cast<double>(hits) / static_cast<double>(x.rows());
}

// ---------------------------------------------------------------------------
// JSON persistence

inline nlohmann::json knn_to_json(const KnnModel& m, const std::string& split_name = "train") {
    // Training rows are referenced through the prepared dataset's split, not copied.
    return {{"kind", "knn"}, {"k", m.k()}, {"train_split", split_name}};
}

inline KnnModel knn_from_json(const nlohmann::json& j, const Dataset& ds) {
    const std::string split = j.value("train_split", "train");
    const std::vector<std::size_t>* idx = split == "train"   ? &ds.splits.train
                                          : split == "valid" ? &ds.splits.valid
                                                             : nullptr;
    if (!idx) throw InputError("knn: unknown split reference '" + split + "'");
    return KnnModel(ds.rows_of(*idx), ds.labels_of(*idx), j.at("k").get<std::size_t>());
}

inline nlohmann::json forest_to_json(const ForestModel& f) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : f.trees()) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : t.nodes())
            nodes.push_back({n.feature, n.threshold, n.impurity, n.left, n.right, n.counts[0], n.counts[1]});
        trees.push_back(std::move(nodes));
    }
    return {{"kind", "forest"},
            {"features", f.features()},
            {"trees", std::move(trees)},
            {"seeds", f.seeds()},
            {"max_depth", f.params().tree.max_depth},
            {"min_samples_split", f.params().tree.min_samples_split},
            {"max_features", f.params().tree.max_features}};
}

inline ForestModel forest_from_json(const nlohmann::json& j) {
    const std::size_t m = j.at("features").get<std::size_t>();
    std::vector<DecisionTree> trees;
    for (const auto& tj : j.at("trees")) {
        std::vector<TreeNode> nodes;
        for (const auto& a : tj) {
            TreeNode n;
            n.feature = a.at(0).get<int>();
            n.threshold = a.at(1).get<double>();
            n.impurity = a.at(2).get<double>();
            n.left = a.at(3).get<int>();
            n.right = a.at(4).get<int>();
            n.counts = {a.at(5).get<double>(), a.at(6).get<double>()};
            nodes.push_back(n);
        }
        trees.emplace_back(std::move(nodes), m);
    }
    ForestParams p;
    p.trees = trees.size();
    p.tree.max_depth = j.value("max_depth", std::size_t{12});
    p.tree.min_samples_split = j.value("min_samples_split", std::size_t{2});
    p.tree.max_features = j.value("max_features", std::size_t{0});
    return ForestModel(std::move(trees), j.at("seeds").get<std::vector<std::uint64_t>>(), p);
}

inline nlohmann::json mlp_to_json(const MlpModel& m) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : m.layers()) {
        nlohmann::json w = nlohmann::json::array();
        for (std::size_t r = 0; r < l.weights.rows(); ++r) {
            auto row = l.weights.row(r);
            w.push_back(std::vector<double>(row.begin(), row.end()));
        }
        layers.push_back({{"weights", std::move(w)}, {"bias", l.bias}, {"activation", to_string(l.activation)}});
    }
    return {{"kind", "mlp"}, {"seed", m.seed()}, {"layers", std::move(layers)}};
}

inline MlpModel mlp_from_json(const nlohmann::json& j) {
    std::vector<DenseLayer> layers;
    for (const auto& lj : j.at("layers")) {
        const auto rows = lj.at("weights").get<std::vector<std::vector<double>>>();
        DenseLayer l;
        l.weights = Matrix(rows.size(), rows.empty() ? 0 : rows.front().size());
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < rows[r].size(); ++c) l.weights(r, c) = rows[r][c];
        l.bias = lj.at("bias").get<Vector>();
        l.activation = activation_from_string(lj.at("activation"));
        layers.push_back(std::move(l));
    }
    return MlpModel(std::move(layers), j.value("seed", std::uint64_t{0}));
}

inline void save_models(const ModelSet& models, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "knn.json", std::ios::binary) << knn_to_json(models.knn).dump() << '\n';
    std::ofstream(dir / "forest.json", std::ios::binary) << forest_to_json(models.rf).dump() << '\n';
    std::ofstream(dir / "mlp.json", std::ios::binary) << mlp_to_json(models.nn).dump() << '\n';
}

inline ModelSet load_models(const std::filesystem::path& dir, const Dataset& ds) {
    auto read = [&](const char* name) {
        const auto p = dir / name;
        if (!std::filesystem::exists(p)) throw InputError("trained model not found: " + p.string());
        nlohmann::json j;
        std::ifstream(p) >> j;
        return j;
    };
    ModelSet m;
    m.knn = knn_from_json(read("knn.json"), ds);
    m.rf = forest_from_json(read("forest.json"));
    m.nn = mlp_from_json(read("mlp.json"));
    return m;
}

}  // namespace xagg
