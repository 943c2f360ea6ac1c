#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowgauntlet/core.hpp"
#include "flowgauntlet/flowdata.hpp"
#include "flowgauntlet/rng.hpp"

namespace fg {

enum class Activation { Relu, Sigmoid, Tanh };
enum class OptimizerKind { Adam, Sgd, Rmsprop };
enum class LossKind { BinaryCrossentropy, Hinge };

struct MlpParams {
    int hidden_layers = 2;
    int nodes_per_layer = 16;
    Activation activation = Activation::Relu;
    OptimizerKind optimizer = OptimizerKind::Adam;
    LossKind loss = LossKind::BinaryCrossentropy;
    double learning_rate = 1e-3;
    int epochs = 50;
    int batch_size = 120;
    std::uint64_t seed = 0;
};

namespace detail {

inline Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation act) {
    switch (act) {
        case Activation::Relu:
            return z.cwiseMax(0.0);
        case Activation::Sigmoid:
            return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
        case Activation::Tanh:
            return z.array().tanh().matrix();
    }
    return z;
}

// Derivative expressed through the activation value (valid for all three:
// relu' = [a > 0], sigmoid' = a(1-a), tanh' = 1-a^2).
inline Eigen::MatrixXd activate_grad(const Eigen::MatrixXd& a, Activation act) {
    switch (act) {
        case Activation::Relu:
            return a.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
        case Activation::Sigmoid:
            return a.unaryExpr([](double v) { return v * (1.0 - v); });
        case Activation::Tanh:
            return a.unaryExpr([](double v) { return 1.0 - v * v; });
    }
    return a;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Shared first-order optimizer state for one parameter block.
struct OptState {
    Eigen::MatrixXd m, v;
    void init(Eigen::Index rows, Eigen::Index cols) {
        m = Eigen::MatrixXd::Zero(rows, cols);
        v = Eigen::MatrixXd::Zero(rows, cols);
    }
};

inline void apply_update(Eigen::MatrixXd& w, const Eigen::MatrixXd& grad, OptState& st,
                         OptimizerKind kind, double lr, long t) {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8, kRho = 0.9;
    switch (kind) {
        case OptimizerKind::Sgd:
            w -= lr * grad;
            break;
        case OptimizerKind::Adam: {
            st.m = kBeta1 * st.m + (1.0 - kBeta1) * grad;
            st.v = kBeta2 * st.v.array().matrix() + (1.0 - kBeta2) * grad.array().square().matrix();
            const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
            const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
            w -= (lr * (st.m / bc1).array() / ((st.v / bc2).array().sqrt() + kEps)).matrix();
            break;
        }
        case OptimizerKind::Rmsprop:
            st.v = kRho * st.v + (1.0 - kRho) * grad.array().square().matrix();
            w -= (lr * grad.array() / (st.v.array().sqrt() + kEps)).matrix();
            break;
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fully connected binary classifier: `hidden_layers` hidden layers of
// `nodes_per_layer` units with a shared activation, then a single linear
// output unit whose sigmoid is the malware probability.  Inputs are the
// standardized schema columns listed in features().  Beyond prediction it
// exposes analytic input gradients, which the evasion attacks consume.
// ---------------------------------------------------------------------------

class Mlp {
public:
    // Gradient objectives exposed for attack code.
    enum class GradObjective {
        RawLogit,  // d z / d x, the pre-sigmoid output
        CwF,       // d (2p - 1) / d x, the benign-vs-malware margin
    };

    Mlp() = default;

    // Glorot-uniform initialized net, no training.  train() starts from
    // exactly this state, so epochs=0 reproduces it.
    static Mlp initialize(const MlpParams& params, std::vector<int> feature_indices = {}) {
        validate(params);
        Mlp net;
        net.params_ = params;
        net.features_ = normalize_features(std::move(feature_indices));
        const int d_in = static_cast<int>(net.features_.size());

        std::vector<int> sizes;
        sizes.push_back(d_in);
        for (int l = 0; l < params.hidden_layers; ++l) sizes.push_back(params.nodes_per_layer);
        sizes.push_back(1);

        Rng rng(derive_seed(params.seed, 0x1417));
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            const int fan_in = sizes[l];
            const int fan_out = sizes[l + 1];
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            Eigen::MatrixXd w(fan_out, fan_in);
            for (Eigen::Index r = 0; r < w.rows(); ++r) {
                for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
            }
            net.weights_.push_back(std::move(w));
            net.biases_.push_back(Eigen::VectorXd::Zero(fan_out));
        }
        return net;
    }

    static Mlp train(const Dataset& ds, const MlpParams& params, std::vector<int> feature_indices = {}) {
        if (ds.empty()) throw EmptyInputError("cannot train an mlp on an empty dataset");
        if (ds.scale != Scale::Standardized) {
            throw NonStandardizedInputError("mlp training requires standardized features");
        }
        Mlp net = initialize(params, std::move(feature_indices));
        net.fit(ds);
        return net;
    }

    std::vector<double> predict_proba(const Dataset& ds) const {
        if (ds.empty()) throw EmptyInputError("cannot predict on an empty dataset");
        if (ds.scale != Scale::Standardized) {
            throw NonStandardizedInputError("mlp prediction requires standardized features");
        }
        const Eigen::VectorXd p = predict_proba(to_matrix(ds));
        return std::vector<double>(p.data(), p.data() + p.size());
    }

    Eigen::VectorXd predict_proba(const Eigen::MatrixXd& x) const {
        return raw_logits(x).unaryExpr([](double z) { return detail::sigmoid(z); });
    }

    Eigen::VectorXd raw_logits(const Eigen::MatrixXd& x) const {
        auto acts = forward(restrict_columns(x));
        return acts.back().col(0);
    }

    double logit_one(const Eigen::VectorXd& x9) const {
        Eigen::MatrixXd row(1, kNumFeatures);
        row.row(0) = x9.transpose();
        return raw_logits(row)(0);
    }

    // d(objective)/dx for one 9-wide input; columns outside features() get 0.
    Eigen::VectorXd input_gradient(const Eigen::VectorXd& x9, GradObjective objective) const {
        Eigen::MatrixXd row(1, kNumFeatures);
        row.row(0) = x9.transpose();
        const auto acts = forward(restrict_columns(row));
        Eigen::MatrixXd delta(1, 1);
        if (objective == GradObjective::RawLogit) {
            delta(0, 0) = 1.0;
        } else {
            const double p = detail::sigmoid(acts.back()(0, 0));
            delta(0, 0) = 2.0 * p * (1.0 - p);
        }
        return scatter(backward_to_input(acts, delta)).row(0).transpose();
    }

    // Batch d(Z_other - Z_target)/dx for the crafting loop.  target_class 0
    // gives d(2p-1)/dx, target_class 1 its negation.
    Eigen::MatrixXd margin_input_gradient(const Eigen::MatrixXd& x, int target_class) const {
        const auto acts = forward(restrict_columns(x));
        Eigen::MatrixXd delta(x.rows(), 1);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double p = detail::sigmoid(acts.back()(i, 0));
            const double d = 2.0 * p * (1.0 - p);
            delta(i, 0) = target_class == 0 ? d : -d;
        }
        return scatter(backward_to_input(acts, delta));
    }

    // Batch dp/dx (used by the generator objective).
    Eigen::MatrixXd proba_input_gradient(const Eigen::MatrixXd& x) const {
        const auto acts = forward(restrict_columns(x));
        Eigen::MatrixXd delta(x.rows(), 1);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double p = detail::sigmoid(acts.back()(i, 0));
            delta(i, 0) = p * (1.0 - p);
        }
        return scatter(backward_to_input(acts, delta));
    }

    // d(loss)/dx for one example; exists so tests can check the whole chain
    // against finite differences.
    Eigen::VectorXd loss_input_gradient(const Eigen::VectorXd& x9, int label) const {
        Eigen::MatrixXd row(1, kNumFeatures);
        row.row(0) = x9.transpose();
        const auto acts = forward(restrict_columns(row));
        const double z = acts.back()(0, 0);
        Eigen::MatrixXd delta(1, 1);
        if (params_.loss == LossKind::BinaryCrossentropy) {
            delta(0, 0) = detail::sigmoid(z) - static_cast<double>(label);
        } else {
            const double y = label == 1 ? 1.0 : -1.0;
            delta(0, 0) = (1.0 - y * z) > 0.0 ? -y : 0.0;
        }
        return scatter(backward_to_input(acts, delta)).row(0).transpose();
    }

    double loss_value(const Eigen::VectorXd& x9, int label) const {
        Eigen::MatrixXd row(1, kNumFeatures);
        row.row(0) = x9.transpose();
        const double z = raw_logits(row)(0);
        if (params_.loss == LossKind::BinaryCrossentropy) {
            const double p = detail::sigmoid(z);
            const double eps = 1e-12;
            return label == 1 ? -std::log(p + eps) : -std::log(1.0 - p + eps);
        }
        const double y = label == 1 ? 1.0 : -1.0;
        return std::max(0.0, 1.0 - y * z);
    }

    const std::vector<int>& features() const { return features_; }
    const MlpParams& params() const { return params_; }
    const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }

    nlohmann::json to_json() const;
    static Mlp from_json(const nlohmann::json& j);

private:
    static void validate(const MlpParams& p) {
        if (p.hidden_layers < 1) throw ConfigError("hidden_layers must be >= 1");
        if (p.nodes_per_layer < 1) throw ConfigError("nodes_per_layer must be >= 1");
        if (p.learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
        if (p.epochs < 0) throw ConfigError("epochs must be >= 0");
        if (p.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    }

    static std::vector<int> normalize_features(std::vector<int> idx) {
        if (idx.empty()) {
            idx.resize(kNumFeatures);
            for (int j = 0; j < kNumFeatures; ++j) idx[static_cast<std::size_t>(j)] = j;
            return idx;
        }
        std::sort(idx.begin(), idx.end());
        idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
        for (int f : idx) {
            if (f < 0 || f >= kNumFeatures) throw UnknownFeatureError("feature index out of range: " + std::to_string(f));
        }
        return idx;
    }

    Eigen::MatrixXd restrict_columns(const Eigen::MatrixXd& x) const {
        if (x.cols() != kNumFeatures) throw FeatureMismatchError("mlp expects 9 feature columns");
        Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(features_.size()));
        for (std::size_t j = 0; j < features_.size(); ++j) {
            out.col(static_cast<Eigen::Index>(j)) = x.col(features_[j]);
        }
        return out;
    }

    // Scatter a gradient over the restricted columns back to 9-wide rows.
    Eigen::MatrixXd scatter(const Eigen::MatrixXd& g_restricted) const {
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(g_restricted.rows(), kNumFeatures);
        for (std::size_t j = 0; j < features_.size(); ++j) {
            out.col(features_[j]) = g_restricted.col(static_cast<Eigen::Index>(j));
        }
        return out;
    }

    // acts[0] = restricted input, acts[l] = hidden activation l, acts.back()
    // = raw output logits (no sigmoid).
    std::vector<Eigen::MatrixXd> forward(const Eigen::MatrixXd& xr) const {
        if (weights_.empty()) throw Error("mlp has not been initialized");
        std::vector<Eigen::MatrixXd> acts;
        acts.reserve(weights_.size() + 1);
        acts.push_back(xr);
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            Eigen::MatrixXd z = acts.back() * weights_[l].transpose();
            z.rowwise() += biases_[l].transpose();
            if (l + 1 < weights_.size()) {
                acts.push_back(detail::activate(z, params_.activation));
            } else {
                acts.push_back(std::move(z));
            }
        }
        return acts;
    }

    // Propagate d(obj)/d(logit) back to the restricted input columns.
    Eigen::MatrixXd backward_to_input(const std::vector<Eigen::MatrixXd>& acts, Eigen::MatrixXd delta) const {
        for (std::size_t l = weights_.size(); l-- > 0;) {
            Eigen::MatrixXd prev = delta * weights_[l];
            if (l > 0) prev = prev.cwiseProduct(detail::activate_grad(acts[l], params_.activation));
            delta = std::move(prev);
        }
        return delta;
    }

    void fit(const Dataset& ds) {
        const Eigen::MatrixXd x = to_matrix(ds);
        const std::vector<int> y = ds.labels();
        const std::size_t n = ds.size();

        std::vector<detail::OptState> wstate(weights_.size()), bstate(weights_.size());
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            wstate[l].init(weights_[l].rows(), weights_[l].cols());
            bstate[l].init(biases_[l].size(), 1);
        }
        long step = 0;

        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng shuffle_rng(derive_seed(params_.seed, 0x5bff1e));

        for (int epoch = 0; epoch < params_.epochs; ++epoch) {
            shuffle_rng.shuffle(order);
            for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(params_.batch_size)) {
                const std::size_t count = std::min(static_cast<std::size_t>(params_.batch_size), n - start);
                Eigen::MatrixXd xb(static_cast<Eigen::Index>(count), kNumFeatures);
                Eigen::VectorXd yb(static_cast<Eigen::Index>(count));
                for (std::size_t i = 0; i < count; ++i) {
                    xb.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(order[start + i]));
                    yb(static_cast<Eigen::Index>(i)) = static_cast<double>(y[order[start + i]]);
                }
                step += 1;
                sgd_step(xb, yb, wstate, bstate, step);
            }
        }
    }

    void sgd_step(const Eigen::MatrixXd& xb, const Eigen::VectorXd& yb,
                  std::vector<detail::OptState>& wstate, std::vector<detail::OptState>& bstate, long step) {
        const auto acts = forward(restrict_columns(xb));
        const Eigen::Index bsz = xb.rows();
        Eigen::MatrixXd delta(bsz, 1);
        const auto& zout = acts.back();
        if (params_.loss == LossKind::BinaryCrossentropy) {
            for (Eigen::Index i = 0; i < bsz; ++i) delta(i, 0) = detail::sigmoid(zout(i, 0)) - yb(i);
        } else {
            for (Eigen::Index i = 0; i < bsz; ++i) {
                const double ysign = yb(i) > 0.5 ? 1.0 : -1.0;
                delta(i, 0) = (1.0 - ysign * zout(i, 0)) > 0.0 ? -ysign : 0.0;
            }
        }
        delta /= static_cast<double>(bsz);

        for (std::size_t l = weights_.size(); l-- > 0;) {
            const Eigen::MatrixXd grad_w = delta.transpose() * acts[l];
            const Eigen::VectorXd grad_b = delta.colwise().sum().transpose();
            Eigen::MatrixXd prev;
            if (l > 0) {
                prev = (delta * weights_[l]).cwiseProduct(detail::activate_grad(acts[l], params_.activation));
            }
            detail::apply_update(weights_[l], grad_w, wstate[l], params_.optimizer, params_.learning_rate, step);
            Eigen::MatrixXd bmat = biases_[l];
            detail::apply_update(bmat, grad_b, bstate[l], params_.optimizer, params_.learning_rate, step);
            biases_[l] = bmat.col(0);
            if (l > 0) delta = std::move(prev);
        }
    }

    std::vector<Eigen::MatrixXd> weights_;
    std::vector<Eigen::VectorXd> biases_;
    MlpParams params_;
    std::vector<int> features_;
};

// ---------------------------------------------------------------------------
// JSON form.
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return Eigen::MatrixXd(0, 0);
    const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Tanh: return "tanh";
    }
    return "relu";
}

inline Activation activation_from_name(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "tanh") return Activation::Tanh;
    throw ConfigError("unknown activation '" + s + "'");
}

}  // namespace detail

inline nlohmann::json Mlp::to_json() const {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        nlohmann::json bias = nlohmann::json::array();
        for (Eigen::Index i = 0; i < biases_[l].size(); ++i) bias.push_back(biases_[l](i));
        layers.push_back({{"weights", detail::matrix_to_json(weights_[l])}, {"bias", std::move(bias)}});
    }
    return {{"layers", layers},
            {"activation", detail::activation_name(params_.activation)},
            {"features", features_}};
}

inline Mlp Mlp::from_json(const nlohmann::json& j) {
    Mlp net;
    net.params_.activation = detail::activation_from_name(j.at("activation").get<std::string>());
    net.features_ = j.at("features").get<std::vector<int>>();
    for (const auto& layer : j.at("layers")) {
        net.weights_.push_back(detail::matrix_from_json(layer.at("weights")));
        const auto& bias = layer.at("bias");
        Eigen::VectorXd b(static_cast<Eigen::Index>(bias.size()));
        for (std::size_t i = 0; i < bias.size(); ++i) b(static_cast<Eigen::Index>(i)) = bias.at(i).get<double>();
        net.biases_.push_back(std::move(b));
    }
    if (net.weights_.empty()) throw DataError("model file contains an empty mlp");
    net.params_.hidden_layers = static_cast<int>(net.weights_.size()) - 1;
    net.params_.nodes_per_layer = net.params_.hidden_layers > 0 ? static_cast<int>(net.weights_.front().rows()) : 0;
    return net;
}

}  // namespace fg
