#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowgauntlet/models/decision_tree.hpp"

namespace fg {

struct RfParams {
    int n_estimators = 100;
    bool bootstrap = true;
    std::uint64_t seed = 0;
    DtParams tree = [] {
        DtParams p;
        p.max_features = MaxFeatures::sqrt();
        return p;
    }();
};

// Bagged ensemble of decision trees; the predicted probability is the mean of
// the member probabilities.  Tree i trains with seed (forest seed + i), so a
// one-tree forest without bootstrapping is bit-identical to a standalone tree
// trained with the same seed.
class RandomForest {
public:
    RandomForest() = default;

    static RandomForest train(const Dataset& ds, const RfParams& params, std::vector<int> feature_indices = {},
                              int jobs = 1) {
        if (ds.empty()) throw EmptyInputError("cannot train a random forest on an empty dataset");
        if (params.n_estimators < 1) throw ConfigError("n_estimators must be >= 1");
        RandomForest forest;
        forest.trees_.resize(static_cast<std::size_t>(params.n_estimators));
        // Each tree's randomness derives only from its own seed, so building
        // trees concurrently changes nothing about the result.
        parallel_for(static_cast<std::size_t>(params.n_estimators), jobs, [&](std::size_t i) {
            const std::uint64_t tree_seed = params.seed + static_cast<std::uint64_t>(i);
            if (params.bootstrap) {
                Rng boot(derive_seed(tree_seed, 0x0b007));
                Dataset sample;
                sample.scale = ds.scale;
                sample.records.reserve(ds.size());
                for (std::size_t k = 0; k < ds.size(); ++k) {
                    sample.records.push_back(ds.records[static_cast<std::size_t>(boot.below(ds.size()))]);
                }
                forest.trees_[i] = DecisionTree::train(sample, params.tree, tree_seed, feature_indices);
            } else {
                forest.trees_[i] = DecisionTree::train(ds, params.tree, tree_seed, feature_indices);
            }
        });
        return forest;
    }

    std::vector<double> predict_proba(const Dataset& ds) const {
        if (trees_.empty()) throw Error("random forest has not been trained");
        std::vector<double> out(ds.size(), 0.0);
        for (const auto& t : trees_) {
            const auto p = t.predict_proba(ds);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[i];
        }
        for (auto& v : out) v /= static_cast<double>(trees_.size());
        return out;
    }

    Eigen::VectorXd predict_proba(const Eigen::MatrixXd& x) const {
        if (trees_.empty()) throw Error("random forest has not been trained");
        Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
        for (const auto& t : trees_) out += t.predict_proba(x);
        return out / static_cast<double>(trees_.size());
    }

    const std::vector<DecisionTree>& trees() const { return trees_; }

    nlohmann::json to_json() const {
        nlohmann::json jtrees = nlohmann::json::array();
        for (const auto& t : trees_) jtrees.push_back(t.to_json());
        return {{"trees", jtrees}};
    }

    static RandomForest from_json(const nlohmann::json& j) {
        RandomForest f;
        for (const auto& jt : j.at("trees")) f.trees_.push_back(DecisionTree::from_json(jt));
        if (f.trees_.empty()) throw DataError("model file contains an empty forest");
        return f;
    }

private:
    std::vector<DecisionTree> trees_;
};

}  // namespace fg
