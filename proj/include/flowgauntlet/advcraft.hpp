#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "flowgauntlet/core.hpp"
#include "flowgauntlet/flowdata.hpp"
#include "flowgauntlet/models/model.hpp"
#include "flowgauntlet/rng.hpp"

namespace fg {

// ---------------------------------------------------------------------------
// Feature mask: binary 9-vector selecting which columns an attack may touch.
// ---------------------------------------------------------------------------

struct FeatureMask {
    std::array<double, kNumFeatures> values{};

    static FeatureMask none() { return {}; }

    static FeatureMask single(int feature) {
        if (feature < 0 || feature >= kNumFeatures) {
            throw UnknownFeatureError("feature index out of range: " + std::to_string(feature));
        }
        FeatureMask m;
        m.values[static_cast<std::size_t>(feature)] = 1.0;
        return m;
    }

    static FeatureMask single(const std::string& name) { return single(feature_index(name)); }

    bool active(int feature) const { return values[static_cast<std::size_t>(feature)] != 0.0; }

    bool any() const {
        for (double v : values) {
            if (v != 0.0) return true;
        }
        return false;
    }

    void validate() const {
        for (double v : values) {
            if (v != 0.0 && v != 1.0) throw ConfigError("feature mask entries must be 0 or 1");
        }
    }
};

struct CwConfig {
    double c = 0.01;            // distance / misclassification trade-off
    double kappa = 0.0;         // confidence margin floor
    double learning_rate = 1e-4;
    int iterations = 2000;
    double noise_magnitude = 0.1;
    double clip_min = 0.0;      // bounds of the attacked feature, in the units
    double clip_max = 0.0;      // of whatever space the attack runs in
    int batch_size = 10000;

    void validate() const {
        if (c <= 0.0) throw ConfigError("cw c must be > 0");
        if (kappa < 0.0) throw ConfigError("cw kappa must be >= 0");
        if (learning_rate <= 0.0) throw ConfigError("cw learning_rate must be > 0");
        if (iterations < 0) throw ConfigError("cw iterations must be >= 0");
        if (noise_magnitude < 0.0) throw ConfigError("cw noise_magnitude must be >= 0");
        if (clip_min > clip_max) throw ConfigError("cw clip_min must be <= clip_max");
        if (batch_size < 1) throw ConfigError("cw batch_size must be >= 1");
    }
};

struct GanConfig {
    int latent_dim = 100;
    int gen_hidden = 128;
    int disc_hidden = 128;
    int disc_iters_per_gen = 1;
    int epochs = 50;
    int batch_size = 64;
    double learning_rate = 1e-4;
    double weight_clamp = 0.01;
    double clip_min = 0.0;  // attacked-feature bounds, same space as inputs
    double clip_max = 0.0;

    void validate() const {
        if (latent_dim < 1) throw ConfigError("gan latent_dim must be >= 1");
        if (gen_hidden < 1 || disc_hidden < 1) throw ConfigError("gan hidden sizes must be >= 1");
        if (disc_iters_per_gen < 1) throw ConfigError("gan disc_iters_per_gen must be >= 1");
        if (epochs < 1) throw ConfigError("gan epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("gan batch_size must be >= 1");
        if (learning_rate <= 0.0) throw ConfigError("gan learning_rate must be > 0");
        if (weight_clamp <= 0.0) throw ConfigError("gan weight_clamp must be > 0");
        if (clip_min > clip_max) throw ConfigError("gan clip_min must be <= clip_max");
    }
};

// One crafted batch at one checkpoint, with the numbers the campaign reports.
struct AdversarialBatch {
    Eigen::MatrixXd originals;  // standardized
    Eigen::MatrixXd perturbed;  // standardized, repaired
    std::string attacked_feature;
    int checkpoint = 0;
    double mean_l2_original_scale = 0.0;
    double surrogate_misclassification_rate = 0.0;
};

// ---------------------------------------------------------------------------
// Relative noise (attack seeding): u ~ U[-1, 1] per element, scaled by the
// element's own magnitude, zero outside the mask.
// ---------------------------------------------------------------------------

inline Eigen::MatrixXd generate_relative_noise(const Eigen::MatrixXd& x, const FeatureMask& mask,
                                               double magnitude, std::uint64_t seed) {
    if (x.cols() != kNumFeatures) throw FeatureMismatchError("noise generation expects 9 feature columns");
    if (magnitude < 0.0) throw ConfigError("noise magnitude must be >= 0");
    mask.validate();
    Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(x.rows(), x.cols());
    Rng rng(seed);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (int j = 0; j < kNumFeatures; ++j) {
            if (!mask.active(j)) continue;
            const double u = rng.uniform(-1.0, 1.0);
            noise(i, j) = u * x(i, j) * magnitude;
        }
    }
    return noise;
}

// ---------------------------------------------------------------------------
// Carlini-Wagner pieces.
// ---------------------------------------------------------------------------

// ||x' - x||^2 + c * max(Z_other - Z_target, -kappa).  The margin stays
// positive until the model assigns the target class more mass than the other,
// and is floored at -kappa afterwards.
inline double cw_loss(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime, const Model& model,
                      int target_class, double c, double kappa) {
    const Mlp& mlp = as_mlp(model);
    const double dist = (x_prime - x).squaredNorm();
    Eigen::MatrixXd row(1, kNumFeatures);
    row.row(0) = x_prime.transpose();
    const double p = mlp.predict_proba(row)(0);
    const double z_target = target_class == 0 ? 1.0 - p : p;
    const double z_other = 1.0 - z_target;
    return dist + c * std::max(z_other - z_target, -kappa);
}

// Iterative attack: seed with relative noise, then plain gradient descent on
// the C&W loss with the gradient masked to the allowed columns; the masked
// columns are clipped to [cfg.clip_min, cfg.clip_max] (same units as x) after
// every step.  Unmasked columns are bit-identical to x on return.
inline Eigen::MatrixXd generate_cw_adversary(const Model& model, const Eigen::MatrixXd& x, int target_class,
                                             const FeatureMask& mask, const CwConfig& cfg, std::uint64_t seed,
                                             const std::vector<int>* checkpoints = nullptr,
                                             std::vector<Eigen::MatrixXd>* snapshots = nullptr) {
    const Mlp& mlp = as_mlp(model);
    cfg.validate();
    mask.validate();
    if (x.cols() != kNumFeatures) throw FeatureMismatchError("attack expects 9 feature columns");
    if (!mask.any()) {
        if (checkpoints != nullptr && snapshots != nullptr) {
            snapshots->assign(checkpoints->size(), x);
        }
        return x;
    }

    auto clip_masked = [&](Eigen::MatrixXd& m) {
        for (int j = 0; j < kNumFeatures; ++j) {
            if (!mask.active(j)) continue;
            m.col(j) = m.col(j).cwiseMax(cfg.clip_min).cwiseMin(cfg.clip_max);
        }
    };

    Eigen::MatrixXd x_prime = x + generate_relative_noise(x, mask, cfg.noise_magnitude, seed);
    clip_masked(x_prime);

    int total_iters = cfg.iterations;
    if (checkpoints != nullptr && !checkpoints->empty()) {
        total_iters = *std::max_element(checkpoints->begin(), checkpoints->end());
    }

    for (int iter = 1; iter <= total_iters; ++iter) {
        // Margin term contributes gradient only while max(margin, -kappa)
        // sits on the margin branch.
        const Eigen::VectorXd p = mlp.predict_proba(x_prime);
        Eigen::MatrixXd margin_grad = mlp.margin_input_gradient(x_prime, target_class);
        for (Eigen::Index i = 0; i < x_prime.rows(); ++i) {
            const double margin = target_class == 0 ? 2.0 * p(i) - 1.0 : 1.0 - 2.0 * p(i);
            if (margin <= -cfg.kappa) margin_grad.row(i).setZero();
        }
        Eigen::MatrixXd grad = 2.0 * (x_prime - x) + cfg.c * margin_grad;
        for (int j = 0; j < kNumFeatures; ++j) {
            if (!mask.active(j)) grad.col(j).setZero();
        }
        x_prime -= cfg.learning_rate * grad;
        clip_masked(x_prime);
        if (checkpoints != nullptr && snapshots != nullptr) {
            for (std::size_t k = 0; k < checkpoints->size(); ++k) {
                if ((*checkpoints)[k] == iter) snapshots->push_back(x_prime);
            }
        }
    }
    return x_prime;
}

inline std::vector<Eigen::MatrixXd> generate_cw_adversary_checkpoints(
    const Model& model, const Eigen::MatrixXd& x, int target_class, const FeatureMask& mask,
    const CwConfig& cfg, const std::vector<int>& checkpoints, std::uint64_t seed) {
    if (checkpoints.empty()) throw ConfigError("checkpoint list is empty");
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        if (checkpoints[i] < 1 || (i > 0 && checkpoints[i] <= checkpoints[i - 1])) {
            throw ConfigError("checkpoints must be strictly increasing positive iteration counts");
        }
    }
    std::vector<Eigen::MatrixXd> snapshots;
    snapshots.reserve(checkpoints.size());
    generate_cw_adversary(model, x, target_class, mask, cfg, seed, &checkpoints, &snapshots);
    return snapshots;
}

// ---------------------------------------------------------------------------
// Semantic dependency repair: after perturbing one feature (original scale),
// recompute the features tied to it so the flow stays internally consistent.
// ---------------------------------------------------------------------------

inline Eigen::VectorXd adjust_dependencies(Eigen::VectorXd sample, const std::string& perturbed_feature,
                                           double initial_ttl = 255.0, double epsilon = 1e-9) {
    if (sample.size() != kNumFeatures) throw FeatureMismatchError("adjust_dependencies expects 9 features");
    const int f = feature_index(perturbed_feature);
    auto at = [&](Feature feat) -> double& { return sample(static_cast<int>(feat)); };
    switch (static_cast<Feature>(f)) {
        case Feature::SrcWin:
            break;  // no dependents
        case Feature::SHops:
            at(Feature::STtl) = initial_ttl - at(Feature::SHops);
            break;
        case Feature::STtl:
        case Feature::DTtl:
            at(Feature::SHops) = initial_ttl - at(Feature::STtl);
            break;
        case Feature::SrcBytes:
        case Feature::DstBytes:
            at(Feature::TotBytes) = at(Feature::SrcBytes) + at(Feature::DstBytes);
            at(Feature::Dur) = at(Feature::TotBytes) / (at(Feature::Rate) + epsilon);
            break;
        case Feature::TotBytes:
            // The published relationship reassigns both byte columns, which is
            // jointly inconsistent; hold SrcBytes and give DstBytes the rest.
            at(Feature::DstBytes) = std::max(at(Feature::TotBytes) - at(Feature::SrcBytes), 0.0);
            at(Feature::Dur) = at(Feature::TotBytes) / (at(Feature::Rate) + epsilon);
            break;
        case Feature::Dur:
            at(Feature::Rate) = at(Feature::TotBytes) / (at(Feature::Dur) + epsilon);
            break;
        case Feature::Rate:
            at(Feature::Dur) = at(Feature::TotBytes) / (at(Feature::Rate) + epsilon);
            break;
    }
    return sample;
}

// Shared pipeline tail: take standardized adversarials whose attacked column
// was modified, return them inverse-transformed, clipped to original-scale
// bounds, dependency-repaired, and re-standardized.
inline Eigen::MatrixXd repair_and_rescale(const Scaler& scaler, const Eigen::MatrixXd& adv_std,
                                          const std::string& feature, double feat_min, double feat_max,
                                          double initial_ttl, double epsilon) {
    const int f = feature_index(feature);
    Eigen::MatrixXd original = inverse_transform_matrix(scaler, adv_std);
    original.col(f) = original.col(f).cwiseMax(feat_min).cwiseMin(feat_max);
    for (Eigen::Index i = 0; i < original.rows(); ++i) {
        original.row(i) = adjust_dependencies(original.row(i).transpose(), feature, initial_ttl, epsilon)
                              .transpose();
    }
    return transform_matrix(scaler, original);
}

// Full per-batch C&W pipeline (standardized in, standardized out): attack the
// named feature, then inverse-transform / clip / repair / re-transform.
inline Eigen::MatrixXd cw_batch(const Model& model, const Scaler& scaler, const Eigen::MatrixXd& samples,
                                int target_class, const std::string& feature, const CwConfig& cfg,
                                std::uint64_t seed, double initial_ttl = 255.0, double epsilon = 1e-9,
                                const std::vector<int>* checkpoints = nullptr,
                                std::vector<Eigen::MatrixXd>* snapshots = nullptr) {
    cfg.validate();
    if (samples.rows() > cfg.batch_size) {
        throw ConfigError("batch of " + std::to_string(samples.rows()) + " rows exceeds batch_size " +
                          std::to_string(cfg.batch_size));
    }
    const int f = feature_index(feature);
    const FeatureMask mask = FeatureMask::single(f);
    CwConfig std_cfg = cfg;
    std_cfg.clip_min = scaler.transform_value(f, cfg.clip_min);
    std_cfg.clip_max = scaler.transform_value(f, cfg.clip_max);

    auto tail = [&](const Eigen::MatrixXd& adv) {
        return repair_and_rescale(scaler, adv, feature, cfg.clip_min, cfg.clip_max, initial_ttl, epsilon);
    };

    if (checkpoints != nullptr && snapshots != nullptr) {
        std::vector<Eigen::MatrixXd> raw;
        generate_cw_adversary(model, samples, target_class, mask, std_cfg, seed, checkpoints, &raw);
        snapshots->clear();
        snapshots->reserve(raw.size());
        for (const auto& adv : raw) snapshots->push_back(tail(adv));
        return snapshots->empty() ? samples : snapshots->back();
    }
    return tail(generate_cw_adversary(model, samples, target_class, mask, std_cfg, seed));
}

inline std::vector<Eigen::MatrixXd> cw_batch_checkpoints(const Model& model, const Scaler& scaler,
                                                         const Eigen::MatrixXd& samples, int target_class,
                                                         const std::string& feature, const CwConfig& cfg,
                                                         const std::vector<int>& checkpoints,
                                                         std::uint64_t seed, double initial_ttl = 255.0,
                                                         double epsilon = 1e-9) {
    if (checkpoints.empty()) throw ConfigError("checkpoint list is empty");
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        if (checkpoints[i] < 1 || (i > 0 && checkpoints[i] <= checkpoints[i - 1])) {
            throw ConfigError("checkpoints must be strictly increasing positive iteration counts");
        }
    }
    std::vector<Eigen::MatrixXd> out;
    cw_batch(model, scaler, samples, target_class, feature, cfg, seed, initial_ttl, epsilon, &checkpoints,
             &out);
    return out;
}

// ---------------------------------------------------------------------------
// WGAN evasion.  The generator proposes values for the masked feature; the
// critic scores realness against benign flows; the substitute classifier
// supplies the evasion pressure.
// ---------------------------------------------------------------------------

struct Generator {
    Eigen::MatrixXd w1;  // gen_hidden x latent_dim
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;  // 9 x gen_hidden
    Eigen::VectorXd b2;
    Eigen::VectorXd out_scale;   // per-column affine rescale of the tanh output
    Eigen::VectorXd out_offset;
    int latent_dim = 0;

    // Returns (hidden, tanh, output); callers that train need the stages.
    void forward_full(const Eigen::MatrixXd& z, Eigen::MatrixXd& hidden, Eigen::MatrixXd& tanh_out,
                      Eigen::MatrixXd& output) const {
        hidden = (z * w1.transpose()).rowwise() + b1.transpose();
        hidden = hidden.cwiseMax(0.0);
        tanh_out = ((hidden * w2.transpose()).rowwise() + b2.transpose()).array().tanh().matrix();
        output = tanh_out;
        for (int j = 0; j < kNumFeatures; ++j) {
            output.col(j) = tanh_out.col(j) * out_scale(j) + Eigen::VectorXd::Constant(tanh_out.rows(), out_offset(j));
        }
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& z) const {
        Eigen::MatrixXd h, t, o;
        forward_full(z, h, t, o);
        return o;
    }
};

struct Discriminator {
    Eigen::MatrixXd w1;  // disc_hidden x 9
    Eigen::VectorXd b1;
    Eigen::VectorXd w2;  // disc_hidden
    double b2 = 0.0;

    Eigen::VectorXd score(const Eigen::MatrixXd& x) const {
        Eigen::MatrixXd h = ((x * w1.transpose()).rowwise() + b1.transpose()).cwiseMax(0.0);
        return ((h * w2).array() + b2).matrix();
    }

    // d score / d x for each row.
    Eigen::MatrixXd input_gradient(const Eigen::MatrixXd& x) const {
        Eigen::MatrixXd pre = (x * w1.transpose()).rowwise() + b1.transpose();
        Eigen::MatrixXd gate = pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
        // delta_h = gate .* w2 broadcast; dscore/dx = delta_h * w1
        for (Eigen::Index i = 0; i < gate.rows(); ++i) {
            gate.row(i) = gate.row(i).cwiseProduct(w2.transpose());
        }
        return gate * w1;
    }
};

struct GanPair {
    Generator generator;
    Discriminator discriminator;
    std::vector<double> substitute_score_per_epoch;  // mean C(x_adv), logged per epoch
};

namespace detail {

inline Eigen::MatrixXd glorot_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-limit, limit);
    }
    return m;
}

inline Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
    }
    return m;
}

// Composite adversarial batch: base rows everywhere except masked columns,
// which take the (clipped) generator output.
inline Eigen::MatrixXd composite_adversarial(const Eigen::MatrixXd& base, const Eigen::MatrixXd& gen_out,
                                             const FeatureMask& mask, double clip_lo, double clip_hi) {
    Eigen::MatrixXd out = base;
    for (int j = 0; j < kNumFeatures; ++j) {
        if (!mask.active(j)) continue;
        out.col(j) = gen_out.col(j).cwiseMax(clip_lo).cwiseMin(clip_hi);
    }
    return out;
}

}  // namespace detail

// Train the evasion WGAN.  All matrices share the space of benign_real
// (standardized in the pipeline); cfg clip bounds are in that same space.
inline GanPair train_evasion_gan(const Eigen::MatrixXd& benign_real, const Eigen::MatrixXd& malware_base,
                                 const Model& substitute, const FeatureMask& mask, const GanConfig& cfg,
                                 std::uint64_t seed,
                                 const std::vector<int>* epoch_checkpoints = nullptr,
                                 std::vector<Generator>* generator_snapshots = nullptr) {
    const Mlp& sub = as_mlp(substitute);
    cfg.validate();
    mask.validate();
    if (benign_real.rows() == 0 || malware_base.rows() == 0) {
        throw EmptyInputError("gan training needs non-empty benign and malware matrices");
    }
    if (benign_real.cols() != kNumFeatures || malware_base.cols() != kNumFeatures) {
        throw FeatureMismatchError("gan training expects 9 feature columns");
    }

    GanPair gan;
    Rng init_rng(derive_seed(seed, 1));
    gan.generator.latent_dim = cfg.latent_dim;
    gan.generator.w1 = detail::glorot_matrix(cfg.gen_hidden, cfg.latent_dim, init_rng);
    gan.generator.b1 = Eigen::VectorXd::Zero(cfg.gen_hidden);
    gan.generator.w2 = detail::glorot_matrix(kNumFeatures, cfg.gen_hidden, init_rng);
    gan.generator.b2 = Eigen::VectorXd::Zero(kNumFeatures);
    gan.discriminator.w1 = detail::glorot_matrix(cfg.disc_hidden, kNumFeatures, init_rng);
    gan.discriminator.b1 = Eigen::VectorXd::Zero(cfg.disc_hidden);
    gan.discriminator.w2 = detail::glorot_matrix(cfg.disc_hidden, 1, init_rng).col(0);
    gan.discriminator.b2 = 0.0;

    // Output rescale: tanh in [-1,1] mapped onto the observed data range.
    {
        Eigen::MatrixXd all(benign_real.rows() + malware_base.rows(), kNumFeatures);
        all << benign_real, malware_base;
        gan.generator.out_scale = Eigen::VectorXd(kNumFeatures);
        gan.generator.out_offset = Eigen::VectorXd(kNumFeatures);
        for (int j = 0; j < kNumFeatures; ++j) {
            const double lo = all.col(j).minCoeff();
            const double hi = all.col(j).maxCoeff();
            gan.generator.out_scale(j) = (hi - lo) / 2.0;
            gan.generator.out_offset(j) = (hi + lo) / 2.0;
        }
    }

    detail::OptState g_w1, g_b1, g_w2, g_b2, d_w1, d_b1, d_w2, d_b2;
    g_w1.init(gan.generator.w1.rows(), gan.generator.w1.cols());
    g_b1.init(gan.generator.b1.size(), 1);
    g_w2.init(gan.generator.w2.rows(), gan.generator.w2.cols());
    g_b2.init(gan.generator.b2.size(), 1);
    d_w1.init(gan.discriminator.w1.rows(), gan.discriminator.w1.cols());
    d_b1.init(gan.discriminator.b1.size(), 1);
    d_w2.init(gan.discriminator.w2.size(), 1);
    d_b2.init(1, 1);
    long g_step = 0, d_step = 0;

    Rng train_rng(derive_seed(seed, 2));
    const std::size_t n_real = static_cast<std::size_t>(benign_real.rows());
    const std::size_t n_base = static_cast<std::size_t>(malware_base.rows());
    std::vector<std::size_t> real_order(n_real), base_order(n_base);
    for (std::size_t i = 0; i < n_real; ++i) real_order[i] = i;
    for (std::size_t i = 0; i < n_base; ++i) base_order[i] = i;

    // Backprop helper for the critic: accumulate parameter gradients given
    // d(loss)/d(score) per row.
    auto disc_grads = [&](const Eigen::MatrixXd& x, const Eigen::VectorXd& dscore, Eigen::MatrixXd& gw1,
                          Eigen::VectorXd& gb1, Eigen::VectorXd& gw2, double& gb2) {
        const Eigen::MatrixXd pre = (x * gan.discriminator.w1.transpose()).rowwise() +
                                    gan.discriminator.b1.transpose();
        const Eigen::MatrixXd h = pre.cwiseMax(0.0);
        gw2 += h.transpose() * dscore;
        gb2 += dscore.sum();
        Eigen::MatrixXd delta_h = dscore * gan.discriminator.w2.transpose();
        delta_h = delta_h.cwiseProduct(pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
        gw1 += delta_h.transpose() * x;
        gb1 += delta_h.colwise().sum().transpose();
    };

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        train_rng.shuffle(real_order);
        train_rng.shuffle(base_order);
        double epoch_score_sum = 0.0;
        long epoch_score_count = 0;

        const std::size_t batches = (n_real + static_cast<std::size_t>(cfg.batch_size) - 1) /
                                    static_cast<std::size_t>(cfg.batch_size);
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t start = b * static_cast<std::size_t>(cfg.batch_size);
            const std::size_t count = std::min(static_cast<std::size_t>(cfg.batch_size), n_real - start);
            Eigen::MatrixXd x_real(static_cast<Eigen::Index>(count), kNumFeatures);
            Eigen::MatrixXd base(static_cast<Eigen::Index>(count), kNumFeatures);
            for (std::size_t i = 0; i < count; ++i) {
                x_real.row(static_cast<Eigen::Index>(i)) =
                    benign_real.row(static_cast<Eigen::Index>(real_order[start + i]));
                base.row(static_cast<Eigen::Index>(i)) =
                    malware_base.row(static_cast<Eigen::Index>(base_order[(start + i) % n_base]));
            }
            const double inv_b = 1.0 / static_cast<double>(count);

            // --- critic steps ---
            for (int k = 0; k < cfg.disc_iters_per_gen; ++k) {
                const Eigen::MatrixXd z =
                    detail::normal_matrix(static_cast<Eigen::Index>(count), cfg.latent_dim, train_rng);
                const Eigen::MatrixXd x_fake = detail::composite_adversarial(
                    base, gan.generator.forward(z), mask, cfg.clip_min, cfg.clip_max);

                Eigen::MatrixXd gw1 = Eigen::MatrixXd::Zero(gan.discriminator.w1.rows(),
                                                            gan.discriminator.w1.cols());
                Eigen::VectorXd gb1 = Eigen::VectorXd::Zero(gan.discriminator.b1.size());
                Eigen::VectorXd gw2 = Eigen::VectorXd::Zero(gan.discriminator.w2.size());
                double gb2 = 0.0;
                // L_D = mean D(fake) - mean D(real)
                disc_grads(x_fake, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(count), inv_b), gw1,
                           gb1, gw2, gb2);
                disc_grads(x_real, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(count), -inv_b), gw1,
                           gb1, gw2, gb2);

                d_step += 1;
                detail::apply_update(gan.discriminator.w1, gw1, d_w1, OptimizerKind::Adam,
                                     cfg.learning_rate, d_step);
                Eigen::MatrixXd b1m = gan.discriminator.b1;
                detail::apply_update(b1m, gb1, d_b1, OptimizerKind::Adam, cfg.learning_rate, d_step);
                gan.discriminator.b1 = b1m.col(0);
                Eigen::MatrixXd w2m = gan.discriminator.w2;
                detail::apply_update(w2m, gw2, d_w2, OptimizerKind::Adam, cfg.learning_rate, d_step);
                gan.discriminator.w2 = w2m.col(0);
                Eigen::MatrixXd b2m(1, 1);
                b2m(0, 0) = gan.discriminator.b2;
                Eigen::MatrixXd gb2m(1, 1);
                gb2m(0, 0) = gb2;
                detail::apply_update(b2m, gb2m, d_b2, OptimizerKind::Adam, cfg.learning_rate, d_step);
                gan.discriminator.b2 = b2m(0, 0);

                // WGAN weight constraint.
                const double clamp = cfg.weight_clamp;
                auto clamp_mat = [clamp](Eigen::MatrixXd& m) {
                    m = m.cwiseMax(-clamp).cwiseMin(clamp);
                };
                clamp_mat(gan.discriminator.w1);
                Eigen::MatrixXd bb = gan.discriminator.b1;
                clamp_mat(bb);
                gan.discriminator.b1 = bb.col(0);
                Eigen::MatrixXd ww = gan.discriminator.w2;
                clamp_mat(ww);
                gan.discriminator.w2 = ww.col(0);
                gan.discriminator.b2 = std::clamp(gan.discriminator.b2, -clamp, clamp);
            }

            // --- generator step ---
            {
                const Eigen::MatrixXd z =
                    detail::normal_matrix(static_cast<Eigen::Index>(count), cfg.latent_dim, train_rng);
                Eigen::MatrixXd hidden, tanh_out, gen_out;
                gan.generator.forward_full(z, hidden, tanh_out, gen_out);
                const Eigen::MatrixXd x_adv =
                    detail::composite_adversarial(base, gen_out, mask, cfg.clip_min, cfg.clip_max);

                // L_G = -mean D(x_adv) + mean C(x_adv)
                const Eigen::MatrixXd d_disc = gan.discriminator.input_gradient(x_adv);
                const Eigen::MatrixXd d_sub = sub.proba_input_gradient(x_adv);
                Eigen::MatrixXd dx = (d_sub - d_disc) * inv_b;

                const Eigen::VectorXd sub_scores = sub.predict_proba(x_adv);
                epoch_score_sum += sub_scores.sum();
                epoch_score_count += sub_scores.size();

                // Gradient reaches the generator only through masked columns
                // that were not flattened by the clip.
                Eigen::MatrixXd d_gen_out = Eigen::MatrixXd::Zero(dx.rows(), kNumFeatures);
                for (int j = 0; j < kNumFeatures; ++j) {
                    if (!mask.active(j)) continue;
                    for (Eigen::Index i = 0; i < dx.rows(); ++i) {
                        const double v = gen_out(i, j);
                        if (v > cfg.clip_min && v < cfg.clip_max) d_gen_out(i, j) = dx(i, j);
                    }
                }
                // Through the affine rescale and tanh.
                Eigen::MatrixXd d_tanh = d_gen_out;
                for (int j = 0; j < kNumFeatures; ++j) d_tanh.col(j) *= gan.generator.out_scale(j);
                d_tanh = d_tanh.cwiseProduct(
                    tanh_out.unaryExpr([](double t) { return 1.0 - t * t; }));

                const Eigen::MatrixXd gw2 = d_tanh.transpose() * hidden;
                const Eigen::VectorXd gb2v = d_tanh.colwise().sum().transpose();
                Eigen::MatrixXd delta_h = (d_tanh * gan.generator.w2)
                                              .cwiseProduct(hidden.unaryExpr(
                                                  [](double v) { return v > 0.0 ? 1.0 : 0.0; }));
                const Eigen::MatrixXd gw1 = delta_h.transpose() * z;
                const Eigen::VectorXd gb1v = delta_h.colwise().sum().transpose();

                g_step += 1;
                detail::apply_update(gan.generator.w1, gw1, g_w1, OptimizerKind::Adam, cfg.learning_rate,
                                     g_step);
                detail::apply_update(gan.generator.w2, gw2, g_w2, OptimizerKind::Adam, cfg.learning_rate,
                                     g_step);
                Eigen::MatrixXd b1m = gan.generator.b1;
                detail::apply_update(b1m, gb1v, g_b1, OptimizerKind::Adam, cfg.learning_rate, g_step);
                gan.generator.b1 = b1m.col(0);
                Eigen::MatrixXd b2m = gan.generator.b2;
                detail::apply_update(b2m, gb2v, g_b2, OptimizerKind::Adam, cfg.learning_rate, g_step);
                gan.generator.b2 = b2m.col(0);
            }
        }
        gan.substitute_score_per_epoch.push_back(
            epoch_score_count > 0 ? epoch_score_sum / static_cast<double>(epoch_score_count) : 0.0);
        if (epoch_checkpoints != nullptr && generator_snapshots != nullptr) {
            for (int ck : *epoch_checkpoints) {
                if (ck == epoch) generator_snapshots->push_back(gan.generator);
            }
        }
    }
    return gan;
}

// Draw fresh latent samples, composite onto the malware base rows, and run
// the same original-scale clip / repair / re-standardize tail as cw_batch.
inline Eigen::MatrixXd gan_generate_adversaries(const Generator& generator,
                                                const Eigen::MatrixXd& malware_base, const FeatureMask& mask,
                                                const Scaler& scaler, const std::string& feature,
                                                double feat_min, double feat_max, std::uint64_t seed,
                                                double initial_ttl = 255.0, double epsilon = 1e-9) {
    mask.validate();
    if (!mask.any()) return malware_base;
    if (malware_base.cols() != kNumFeatures) {
        throw FeatureMismatchError("gan generation expects 9 feature columns");
    }
    const int f = feature_index(feature);
    Rng rng(seed);
    const Eigen::MatrixXd z = detail::normal_matrix(malware_base.rows(), generator.latent_dim, rng);
    const double lo = scaler.transform_value(f, feat_min);
    const double hi = scaler.transform_value(f, feat_max);
    const Eigen::MatrixXd x_adv =
        detail::composite_adversarial(malware_base, generator.forward(z), mask, lo, hi);
    return repair_and_rescale(scaler, x_adv, feature, feat_min, feat_max, initial_ttl, epsilon);
}

// ---------------------------------------------------------------------------
// Batch statistics + persistence.
// ---------------------------------------------------------------------------

inline AdversarialBatch make_adversarial_batch(const Eigen::MatrixXd& originals_std,
                                               const Eigen::MatrixXd& perturbed_std,
                                               const std::string& feature, int checkpoint,
                                               const Scaler& scaler, const Model& surrogate) {
    if (originals_std.rows() != perturbed_std.rows()) {
        throw LengthMismatchError("originals and perturbed row counts differ");
    }
    AdversarialBatch batch;
    batch.originals = originals_std;
    batch.perturbed = perturbed_std;
    batch.attacked_feature = feature;
    batch.checkpoint = checkpoint;
    if (originals_std.rows() > 0) {
        const Eigen::MatrixXd o = inverse_transform_matrix(scaler, originals_std);
        const Eigen::MatrixXd p = inverse_transform_matrix(scaler, perturbed_std);
        double l2 = 0.0;
        for (Eigen::Index i = 0; i < o.rows(); ++i) l2 += (o.row(i) - p.row(i)).norm();
        batch.mean_l2_original_scale = l2 / static_cast<double>(o.rows());
        const Eigen::VectorXd probs = predict_proba(surrogate, perturbed_std);
        Eigen::Index benign = 0;
        for (Eigen::Index i = 0; i < probs.size(); ++i) {
            if (!(probs(i) > 0.5)) ++benign;
        }
        batch.surrogate_misclassification_rate =
            static_cast<double>(benign) / static_cast<double>(probs.size());
    }
    return batch;
}

// Adversarial flows on disk: canonical flow columns (original scale, Label 1)
// plus checkpoint / attacked_feature / origin.
inline void save_adversarial_csv(const AdversarialBatch& batch, const Scaler& scaler,
                                 const std::string& origin, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (int j = 0; j < kNumFeatures; ++j) out << feature_name(j) << ",";
    out << "Label,checkpoint,attacked_feature,origin\n";
    const Eigen::MatrixXd original = inverse_transform_matrix(scaler, batch.perturbed);
    for (Eigen::Index i = 0; i < original.rows(); ++i) {
        for (int j = 0; j < kNumFeatures; ++j) out << format_double(original(i, j)) << ",";
        out << "1," << batch.checkpoint << "," << batch.attacked_feature << "," << origin << "\n";
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

// Reads the feature columns of an adversarial CSV back as an original-scale
// dataset (all rows labeled malware); the bookkeeping columns are ignored.
inline Dataset load_adversarial_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string header_line;
    if (!std::getline(in, header_line)) throw EmptyFileError("'" + path + "' is empty");
    const auto header = detail::split_csv_line(header_line);
    std::array<int, kNumFeatures> feature_col{};
    feature_col.fill(-1);
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string name = detail::trim(header[c]);
        for (int j = 0; j < kNumFeatures; ++j) {
            if (name == kFeatureNames[static_cast<std::size_t>(j)]) feature_col[static_cast<std::size_t>(j)] = static_cast<int>(c);
        }
    }
    for (int j = 0; j < kNumFeatures; ++j) {
        if (feature_col[static_cast<std::size_t>(j)] < 0) {
            throw MissingColumnError(kFeatureNames[static_cast<std::size_t>(j)]);
        }
    }
    Dataset ds;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) {
            ++row;
            continue;
        }
        const auto cells = detail::split_csv_line(line);
        FlowRecord rec;
        rec.label = 1;
        for (int j = 0; j < kNumFeatures; ++j) {
            bool ok = false;
            const double v = parse_double(cells.at(static_cast<std::size_t>(feature_col[static_cast<std::size_t>(j)])), ok);
            if (!ok || !std::isfinite(v)) {
                throw NonNumericCellError(row, kFeatureNames[static_cast<std::size_t>(j)]);
            }
            rec[j] = v;
        }
        ds.records.push_back(rec);
        ++row;
    }
    if (ds.records.empty()) throw EmptyFileError("'" + path + "' has a header but no data rows");
    return ds;
}

}  // namespace fg
