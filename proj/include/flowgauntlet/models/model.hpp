#pragma once

#include <fstream>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "flowgauntlet/metrics.hpp"
#include "flowgauntlet/models/decision_tree.hpp"
#include "flowgauntlet/models/mlp.hpp"
#include "flowgauntlet/models/random_forest.hpp"

namespace fg {

enum class ModelKind { DecisionTree, RandomForest, Mlp };

inline const char* model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::DecisionTree: return "decision_tree";
        case ModelKind::RandomForest: return "random_forest";
        case ModelKind::Mlp: return "mlp";
    }
    return "decision_tree";
}

inline ModelKind model_kind_from_name(const std::string& s) {
    if (s == "decision_tree" || s == "dt") return ModelKind::DecisionTree;
    if (s == "random_forest" || s == "rf") return ModelKind::RandomForest;
    if (s == "mlp") return ModelKind::Mlp;
    throw ConfigError("unknown model kind '" + s + "'");
}

using Model = std::variant<DecisionTree, RandomForest, Mlp>;

inline ModelKind kind_of(const Model& m) {
    if (std::holds_alternative<DecisionTree>(m)) return ModelKind::DecisionTree;
    if (std::holds_alternative<RandomForest>(m)) return ModelKind::RandomForest;
    return ModelKind::Mlp;
}

inline std::vector<double> predict_proba(const Model& m, const Dataset& ds) {
    return std::visit([&](const auto& model) { return model.predict_proba(ds); }, m);
}

inline Eigen::VectorXd predict_proba(const Model& m, const Eigen::MatrixXd& x) {
    return std::visit([&](const auto& model) -> Eigen::VectorXd { return model.predict_proba(x); }, m);
}

inline std::vector<int> predict_labels(const Model& m, const Dataset& ds) {
    return labels_from_probabilities(predict_proba(m, ds));
}

// The attacks need analytic gradients, which only the MLP provides.
inline const Mlp& as_mlp(const Model& m) {
    if (!std::holds_alternative<Mlp>(m)) {
        throw WrongModelKindError("expected an mlp model, got " + std::string(model_kind_name(kind_of(m))));
    }
    return std::get<Mlp>(m);
}

inline nlohmann::json model_to_json(const Model& m) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["kind"] = model_kind_name(kind_of(m));
    j["model"] = std::visit([](const auto& model) { return model.to_json(); }, m);
    return j;
}

inline Model model_from_json(const nlohmann::json& j) {
    if (!j.contains("format_version") || j.at("format_version").get<int>() != 1) {
        throw DataError("unsupported model file format version");
    }
    const ModelKind kind = model_kind_from_name(j.at("kind").get<std::string>());
    switch (kind) {
        case ModelKind::DecisionTree: return DecisionTree::from_json(j.at("model"));
        case ModelKind::RandomForest: return RandomForest::from_json(j.at("model"));
        case ModelKind::Mlp: return Mlp::from_json(j.at("model"));
    }
    throw DataError("unreachable model kind");
}

inline void save_model(const Model& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << model_to_json(m).dump(2) << "\n";
    if (!out) throw IoError("failed writing '" + path + "'");
}

inline Model load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("cannot parse model file '" + path + "': " + e.what());
    }
    return model_from_json(j);
}

}  // namespace fg
