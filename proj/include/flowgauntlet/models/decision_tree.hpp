#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowgauntlet/core.hpp"
#include "flowgauntlet/flowdata.hpp"
#include "flowgauntlet/rng.hpp"

namespace fg {

enum class Criterion { Gini, Entropy };
enum class Splitter { Best, Random };

// How many candidate features each split considers.  "auto" in configs is an
// alias for Sqrt.
struct MaxFeatures {
    enum class Kind { All, Sqrt, Log2, Fixed };
    Kind kind = Kind::All;
    int fixed = 0;

    static MaxFeatures all() { return {Kind::All, 0}; }
    static MaxFeatures sqrt() { return {Kind::Sqrt, 0}; }
    static MaxFeatures log2() { return {Kind::Log2, 0}; }
    static MaxFeatures fixed_count(int k) { return {Kind::Fixed, k}; }

    int count_for(int available) const {
        int m = available;
        switch (kind) {
            case Kind::All: m = available; break;
            case Kind::Sqrt: m = static_cast<int>(std::sqrt(static_cast<double>(available))); break;
            case Kind::Log2: m = static_cast<int>(std::log2(static_cast<double>(available))); break;
            case Kind::Fixed: m = fixed; break;
        }
        return std::clamp(m, 1, available);
    }
};

struct DtParams {
    Criterion criterion = Criterion::Gini;
    Splitter splitter = Splitter::Best;
    std::optional<int> max_depth;            // nullopt = unlimited
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    double min_weight_fraction_leaf = 0.0;   // fraction of training rows per leaf
    MaxFeatures max_features = MaxFeatures::all();
    std::optional<int> max_leaf_nodes;       // nullopt = unlimited (depth-first growth)
    double min_impurity_decrease = 0.0;
    double ccp_alpha = 0.0;
};

// Internal nodes route on feature <= threshold (left) / > threshold (right);
// leaves carry the malware fraction of their training rows.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int n_samples = 0;
    int n_malware = 0;
    double impurity = 0.0;

    bool is_leaf() const { return left < 0; }
    double p_malware() const { return n_samples > 0 ? static_cast<double>(n_malware) / n_samples : 0.0; }
};

class DecisionTree {
public:
    DecisionTree() = default;

    static DecisionTree train(const Dataset& ds, const DtParams& params, std::uint64_t seed,
                              std::vector<int> feature_indices = {});

    double predict_one(const FlowRecord& rec) const {
        return predict_row([&rec](int f) { return rec[f]; });
    }

    std::vector<double> predict_proba(const Dataset& ds) const {
        if (ds.empty()) throw EmptyInputError("cannot predict on an empty dataset");
        if (ds.scale != trained_scale_) throw ScaleMismatchError("dataset scale differs from training scale");
        std::vector<double> out(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) out[i] = predict_one(ds.records[i]);
        return out;
    }

    Eigen::VectorXd predict_proba(const Eigen::MatrixXd& x) const {
        if (x.cols() != kNumFeatures) throw FeatureMismatchError("predict expects 9 feature columns");
        Eigen::VectorXd out(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            out(i) = predict_row([&](int f) { return x(i, f); });
        }
        return out;
    }

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    const std::vector<int>& features() const { return features_; }
    const DtParams& params() const { return params_; }
    Scale trained_scale() const { return trained_scale_; }

    int n_leaves() const {
        int n = 0;
        for (const auto& node : nodes_) {
            if (node.is_leaf()) ++n;
        }
        return n;
    }

    int depth() const { return nodes_.empty() ? 0 : depth_below(0); }

    nlohmann::json to_json() const;
    static DecisionTree from_json(const nlohmann::json& j);

private:
    template <typename GetFeature>
    double predict_row(GetFeature get) const {
        if (nodes_.empty()) throw Error("decision tree has not been trained");
        int at = 0;
        while (!nodes_[static_cast<std::size_t>(at)].is_leaf()) {
            const TreeNode& node = nodes_[static_cast<std::size_t>(at)];
            at = get(node.feature) <= node.threshold ? node.left : node.right;
        }
        return nodes_[static_cast<std::size_t>(at)].p_malware();
    }

    int depth_below(int at) const {
        const TreeNode& node = nodes_[static_cast<std::size_t>(at)];
        if (node.is_leaf()) return 0;
        return 1 + std::max(depth_below(node.left), depth_below(node.right));
    }

    std::vector<TreeNode> nodes_;
    std::vector<int> features_;
    DtParams params_;
    Scale trained_scale_ = Scale::Original;

    friend class TreeBuilder;
};

// ---------------------------------------------------------------------------
// Growth.  Depth-first by default; best-first (largest impurity decrease
// expanded first) when max_leaf_nodes caps the tree.  Both paths share the
// same split search.
// ---------------------------------------------------------------------------

class TreeBuilder {
public:
    TreeBuilder(const Dataset& ds, const DtParams& params, std::uint64_t seed, std::vector<int> features)
        : ds_(ds), params_(params), rng_(seed), features_(std::move(features)) {}

    DecisionTree build() {
        const std::size_t n = ds_.size();
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;

        DecisionTree tree;
        tree.params_ = params_;
        tree.features_ = features_;
        tree.trained_scale_ = ds_.scale;
        auto& nodes = tree.nodes_;
        nodes.push_back(make_node(all));

        if (params_.max_leaf_nodes.has_value()) {
            grow_best_first(nodes, std::move(all));
        } else {
            grow_depth_first(nodes, 0, std::move(all), 0);
        }
        if (params_.ccp_alpha > 0.0) prune(nodes);
        compact(nodes);
        return tree;
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double decrease = -1.0;  // impurity decrease weighted by node share
        std::vector<std::size_t> left, right;
    };

    TreeNode make_node(const std::vector<std::size_t>& idx) const {
        TreeNode node;
        node.n_samples = static_cast<int>(idx.size());
        for (std::size_t i : idx) node.n_malware += ds_.records[i].label;
        node.impurity = impurity(node.n_malware, node.n_samples - node.n_malware);
        return node;
    }

    double impurity(int pos, int neg) const {
        const int n = pos + neg;
        if (n == 0) return 0.0;
        const double p = static_cast<double>(pos) / n;
        const double q = static_cast<double>(neg) / n;
        if (params_.criterion == Criterion::Gini) return 1.0 - p * p - q * q;
        double h = 0.0;
        if (p > 0.0) h -= p * std::log2(p);
        if (q > 0.0) h -= q * std::log2(q);
        return h;
    }

    bool can_split(const TreeNode& node, int depth) const {
        if (node.impurity <= 0.0) return false;
        if (node.n_samples < params_.min_samples_split) return false;
        if (params_.max_depth.has_value() && depth >= *params_.max_depth) return false;
        return true;
    }

    bool leaf_big_enough(std::size_t count) const {
        if (count < static_cast<std::size_t>(params_.min_samples_leaf)) return false;
        const double min_weight = params_.min_weight_fraction_leaf * static_cast<double>(ds_.size());
        return static_cast<double>(count) >= min_weight;
    }

    // Candidate features for one split: a uniform subset of this tree's
    // feature pool, iterated in ascending column order for determinism.
    std::vector<int> sample_features() {
        const int k = static_cast<int>(features_.size());
        const int m = params_.max_features.count_for(k);
        if (m >= k) return features_;
        auto picks = rng_.sample_without_replacement(static_cast<std::size_t>(k), static_cast<std::size_t>(m));
        std::vector<int> out;
        out.reserve(picks.size());
        for (std::size_t p : picks) out.push_back(features_[p]);
        std::sort(out.begin(), out.end());
        return out;
    }

    std::optional<Split> find_split(const std::vector<std::size_t>& idx, const TreeNode& node) {
        const auto candidates = sample_features();
        Split best;
        const double node_share = static_cast<double>(node.n_samples) / static_cast<double>(ds_.size());

        for (int f : candidates) {
            if (params_.splitter == Splitter::Best) {
                search_best_thresholds(idx, node, f, node_share, best);
            } else {
                search_random_threshold(idx, node, f, node_share, best);
            }
        }
        if (best.feature < 0) return std::nullopt;
        if (best.decrease < params_.min_impurity_decrease) return std::nullopt;
        // Materialize the partition for the winning (feature, threshold).
        for (std::size_t i : idx) {
            (ds_.records[i][best.feature] <= best.threshold ? best.left : best.right).push_back(i);
        }
        return best;
    }

    // Best splitter: thresholds are midpoints between consecutive distinct
    // sorted values; prefix scans give child counts in one pass.
    void search_best_thresholds(const std::vector<std::size_t>& idx, const TreeNode& node, int f,
                                double node_share, Split& best) const {
        std::vector<std::pair<double, int>> vals;
        vals.reserve(idx.size());
        for (std::size_t i : idx) vals.emplace_back(ds_.records[i][f], ds_.records[i].label);
        std::sort(vals.begin(), vals.end());

        int left_pos = 0;
        int left_n = 0;
        const int total_pos = node.n_malware;
        const int total_n = node.n_samples;
        for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
            left_n += 1;
            left_pos += vals[i].second;
            if (vals[i].first == vals[i + 1].first) continue;
            const double thr = vals[i].first + (vals[i + 1].first - vals[i].first) / 2.0;
            consider(node, f, thr, left_pos, left_n, total_pos, total_n, node_share, best);
        }
    }

    // Random splitter: one uniform threshold in the node's value range per
    // candidate feature.
    void search_random_threshold(const std::vector<std::size_t>& idx, const TreeNode& node, int f,
                                 double node_share, Split& best) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t i : idx) {
            lo = std::min(lo, ds_.records[i][f]);
            hi = std::max(hi, ds_.records[i][f]);
        }
        if (!(hi > lo)) return;
        const double thr = rng_.uniform(lo, hi);
        int left_pos = 0;
        int left_n = 0;
        for (std::size_t i : idx) {
            if (ds_.records[i][f] <= thr) {
                ++left_n;
                left_pos += ds_.records[i].label;
            }
        }
        consider(node, f, thr, left_pos, left_n, node.n_malware, node.n_samples, node_share, best);
    }

    void consider(const TreeNode& node, int f, double thr, int left_pos, int left_n, int total_pos,
                  int total_n, double node_share, Split& best) const {
        const int right_n = total_n - left_n;
        if (left_n == 0 || right_n == 0) return;
        if (!leaf_big_enough(static_cast<std::size_t>(left_n)) || !leaf_big_enough(static_cast<std::size_t>(right_n))) return;
        const int right_pos = total_pos - left_pos;
        const double imp_left = impurity(left_pos, left_n - left_pos);
        const double imp_right = impurity(right_pos, right_n - right_pos);
        const double child =
            (static_cast<double>(left_n) * imp_left + static_cast<double>(right_n) * imp_right) / total_n;
        double decrease = node_share * (node.impurity - child);
        // A gain of exactly zero is a legal split (e.g. parity data); absorb
        // the rounding drift that would otherwise make it slightly negative.
        if (decrease < 0.0 && decrease > -1e-12) decrease = 0.0;
        if (decrease > best.decrease) {
            best.feature = f;
            best.threshold = thr;
            best.decrease = decrease;
            best.left.clear();
            best.right.clear();
        }
    }

    void grow_depth_first(std::vector<TreeNode>& nodes, int at, std::vector<std::size_t> idx, int depth) {
        if (!can_split(nodes[static_cast<std::size_t>(at)], depth)) return;
        auto split = find_split(idx, nodes[static_cast<std::size_t>(at)]);
        if (!split.has_value()) return;
        idx.clear();
        idx.shrink_to_fit();

        const int left_id = static_cast<int>(nodes.size());
        nodes.push_back(make_node(split->left));
        const int right_id = static_cast<int>(nodes.size());
        nodes.push_back(make_node(split->right));
        nodes[static_cast<std::size_t>(at)].feature = split->feature;
        nodes[static_cast<std::size_t>(at)].threshold = split->threshold;
        nodes[static_cast<std::size_t>(at)].left = left_id;
        nodes[static_cast<std::size_t>(at)].right = right_id;

        grow_depth_first(nodes, left_id, std::move(split->left), depth + 1);
        grow_depth_first(nodes, right_id, std::move(split->right), depth + 1);
    }

    void grow_best_first(std::vector<TreeNode>& nodes, std::vector<std::size_t> root_idx) {
        struct Pending {
            int node_id;
            int depth;
            long long seq;
            double decrease;
            std::shared_ptr<Split> split;
        };
        auto worse = [](const Pending& a, const Pending& b) {
            if (a.decrease != b.decrease) return a.decrease < b.decrease;
            return a.seq > b.seq;  // earlier-queued candidate wins ties
        };
        std::priority_queue<Pending, std::vector<Pending>, decltype(worse)> frontier(worse);
        long long seq = 0;

        auto enqueue = [&](int node_id, int depth, std::vector<std::size_t> idx) {
            if (!can_split(nodes[static_cast<std::size_t>(node_id)], depth)) return;
            auto split = find_split(idx, nodes[static_cast<std::size_t>(node_id)]);
            if (!split.has_value()) return;
            frontier.push(Pending{node_id, depth, seq++, split->decrease,
                                  std::make_shared<Split>(std::move(*split))});
        };

        int leaves = 1;
        enqueue(0, 0, std::move(root_idx));
        while (!frontier.empty() && leaves < *params_.max_leaf_nodes) {
            Pending top = frontier.top();
            frontier.pop();
            const int left_id = static_cast<int>(nodes.size());
            nodes.push_back(make_node(top.split->left));
            const int right_id = static_cast<int>(nodes.size());
            nodes.push_back(make_node(top.split->right));
            auto& node = nodes[static_cast<std::size_t>(top.node_id)];
            node.feature = top.split->feature;
            node.threshold = top.split->threshold;
            node.left = left_id;
            node.right = right_id;
            ++leaves;
            if (leaves >= *params_.max_leaf_nodes) break;
            enqueue(left_id, top.depth + 1, std::move(top.split->left));
            enqueue(right_id, top.depth + 1, std::move(top.split->right));
        }
    }

    // Minimal cost-complexity pruning: repeatedly collapse the weakest link
    // (smallest effective alpha) while it does not exceed ccp_alpha.
    void prune(std::vector<TreeNode>& nodes) const {
        const double total = static_cast<double>(ds_.size());
        for (;;) {
            double best_alpha = std::numeric_limits<double>::infinity();
            int best_node = -1;
            // Subtree leaf count + risk, computed bottom-up on demand.
            std::vector<int> leaves(nodes.size(), 0);
            std::vector<double> risk(nodes.size(), 0.0);
            collect(nodes, 0, total, leaves, risk);
            for (std::size_t t = 0; t < nodes.size(); ++t) {
                if (nodes[t].is_leaf() || leaves[t] <= 1) continue;
                const double own = (static_cast<double>(nodes[t].n_samples) / total) * nodes[t].impurity;
                const double alpha_eff = (own - risk[t]) / static_cast<double>(leaves[t] - 1);
                if (alpha_eff < best_alpha) {
                    best_alpha = alpha_eff;
                    best_node = static_cast<int>(t);
                }
            }
            if (best_node < 0 || best_alpha > params_.ccp_alpha) break;
            nodes[static_cast<std::size_t>(best_node)].left = -1;
            nodes[static_cast<std::size_t>(best_node)].right = -1;
            nodes[static_cast<std::size_t>(best_node)].feature = -1;
        }
    }

    void collect(const std::vector<TreeNode>& nodes, int at, double total, std::vector<int>& leaves,
                 std::vector<double>& risk) const {
        const TreeNode& node = nodes[static_cast<std::size_t>(at)];
        if (node.is_leaf()) {
            leaves[static_cast<std::size_t>(at)] = 1;
            risk[static_cast<std::size_t>(at)] = (static_cast<double>(node.n_samples) / total) * node.impurity;
            return;
        }
        collect(nodes, node.left, total, leaves, risk);
        collect(nodes, node.right, total, leaves, risk);
        leaves[static_cast<std::size_t>(at)] =
            leaves[static_cast<std::size_t>(node.left)] + leaves[static_cast<std::size_t>(node.right)];
        risk[static_cast<std::size_t>(at)] =
            risk[static_cast<std::size_t>(node.left)] + risk[static_cast<std::size_t>(node.right)];
    }

    // Drop nodes orphaned by pruning and renumber depth-first.
    static void compact(std::vector<TreeNode>& nodes) {
        std::vector<TreeNode> out;
        out.reserve(nodes.size());
        struct Todo {
            int old_id;
            int new_parent;
            bool is_left;
        };
        std::vector<Todo> work;
        work.push_back({0, -1, false});
        while (!work.empty()) {
            Todo t = work.back();
            work.pop_back();
            const int new_id = static_cast<int>(out.size());
            out.push_back(nodes[static_cast<std::size_t>(t.old_id)]);
            if (t.new_parent >= 0) {
                auto& parent = out[static_cast<std::size_t>(t.new_parent)];
                (t.is_left ? parent.left : parent.right) = new_id;
            }
            const TreeNode& old_node = nodes[static_cast<std::size_t>(t.old_id)];
            if (!old_node.is_leaf()) {
                // Right pushed first so left is emitted first (preorder).
                work.push_back({old_node.right, new_id, false});
                work.push_back({old_node.left, new_id, true});
            }
        }
        nodes = std::move(out);
    }

    const Dataset& ds_;
    DtParams params_;
    Rng rng_;
    std::vector<int> features_;
};

inline DecisionTree DecisionTree::train(const Dataset& ds, const DtParams& params, std::uint64_t seed,
                                        std::vector<int> feature_indices) {
    if (ds.empty()) throw EmptyInputError("cannot train a decision tree on an empty dataset");
    if (params.min_samples_split < 2) throw ConfigError("min_samples_split must be >= 2");
    if (params.min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
    if (params.min_weight_fraction_leaf < 0.0 || params.min_weight_fraction_leaf > 0.5) {
        throw ConfigError("min_weight_fraction_leaf must be in [0, 0.5]");
    }
    if (params.max_depth.has_value() && *params.max_depth < 1) throw ConfigError("max_depth must be >= 1");
    if (params.max_leaf_nodes.has_value() && *params.max_leaf_nodes < 2) {
        throw ConfigError("max_leaf_nodes must be >= 2");
    }
    if (params.min_impurity_decrease < 0.0) throw ConfigError("min_impurity_decrease must be >= 0");
    if (params.ccp_alpha < 0.0) throw ConfigError("ccp_alpha must be >= 0");
    if (feature_indices.empty()) {
        feature_indices.resize(kNumFeatures);
        for (int j = 0; j < kNumFeatures; ++j) feature_indices[static_cast<std::size_t>(j)] = j;
    } else {
        std::sort(feature_indices.begin(), feature_indices.end());
        feature_indices.erase(std::unique(feature_indices.begin(), feature_indices.end()), feature_indices.end());
        for (int f : feature_indices) {
            if (f < 0 || f >= kNumFeatures) throw UnknownFeatureError("feature index out of range: " + std::to_string(f));
        }
    }
    TreeBuilder builder(ds, params, seed, std::move(feature_indices));
    return builder.build();
}

// ---------------------------------------------------------------------------
// JSON form (used inside model files).
// ---------------------------------------------------------------------------

inline nlohmann::json DecisionTree::to_json() const {
    nlohmann::json jnodes = nlohmann::json::array();
    for (const auto& n : nodes_) {
        jnodes.push_back({{"feature", n.feature},
                          {"threshold", n.threshold},
                          {"left", n.left},
                          {"right", n.right},
                          {"n_samples", n.n_samples},
                          {"n_malware", n.n_malware},
                          {"impurity", n.impurity}});
    }
    return {{"nodes", jnodes},
            {"features", features_},
            {"trained_scale", trained_scale_ == Scale::Standardized ? "standardized" : "original"},
            {"criterion", params_.criterion == Criterion::Gini ? "gini" : "entropy"}};
}

inline DecisionTree DecisionTree::from_json(const nlohmann::json& j) {
    DecisionTree t;
    for (const auto& jn : j.at("nodes")) {
        TreeNode n;
        n.feature = jn.at("feature").get<int>();
        n.threshold = jn.at("threshold").get<double>();
        n.left = jn.at("left").get<int>();
        n.right = jn.at("right").get<int>();
        n.n_samples = jn.at("n_samples").get<int>();
        n.n_malware = jn.at("n_malware").get<int>();
        n.impurity = jn.at("impurity").get<double>();
        t.nodes_.push_back(n);
    }
    t.features_ = j.at("features").get<std::vector<int>>();
    t.trained_scale_ = j.at("trained_scale").get<std::string>() == "standardized" ? Scale::Standardized : Scale::Original;
    t.params_.criterion = j.at("criterion").get<std::string>() == "entropy" ? Criterion::Entropy : Criterion::Gini;
    if (t.nodes_.empty()) throw DataError("model file contains an empty tree");
    return t;
}

}  // namespace fg
