#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "flowgauntlet/core.hpp"
#include "flowgauntlet/flowdata.hpp"
#include "flowgauntlet/hyperopt.hpp"
#include "flowgauntlet/models/model.hpp"
#include "flowgauntlet/pipeline.hpp"

namespace fg {

// ---------------------------------------------------------------------------
// Run configuration: one JSON document with sections data / features / model
// / tuner / attack / conformal / report plus a global seed.  Unknown keys are
// rejected by name; every relative path is resolved against the directory of
// the config file.
// ---------------------------------------------------------------------------

namespace detail {

inline void check_keys(const nlohmann::json& obj, const std::string& where,
                       std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError("config section '" + where + "' must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* k) { return it.key() == k; }) == allowed.end()) {
            throw ConfigError("unknown config key '" + where + "." + it.key() + "'");
        }
    }
}

inline constexpr std::initializer_list<const char*> kClusterKeys = {
    "src_win_mean", "src_win_sd",   "s_hops_mean",  "s_hops_sd", "src_bytes_mean",
    "src_bytes_sd", "dst_bytes_mean", "dst_bytes_sd", "dur_mean",  "dur_sd",
};

inline constexpr std::initializer_list<const char*> kTreeKeys = {
    "criterion",    "splitter",         "max_depth",          "min_samples_split",
    "min_samples_leaf", "min_weight_fraction_leaf", "max_features", "max_leaf_nodes",
    "min_impurity_decrease", "ccp_alpha",
};

inline void validate_cluster(const nlohmann::json& obj, const std::string& where) {
    check_keys(obj, where, kClusterKeys);
}

}  // namespace detail

struct RunConfig {
    nlohmann::json raw = nlohmann::json::object();
    std::filesystem::path base_dir = std::filesystem::current_path();
    std::string config_hash = hex64(fnv1a(""));
    std::uint64_t seed = 42;
    bool loaded = false;

    bool has(const std::string& name) const { return raw.contains(name); }

    const nlohmann::json& section(const std::string& name) const {
        if (!raw.contains(name)) {
            throw ConfigError("config section '" + name + "' is required for this command");
        }
        return raw.at(name);
    }

    nlohmann::json section_or_empty(const std::string& name) const {
        return raw.contains(name) ? raw.at(name) : nlohmann::json::object();
    }

    std::string resolve(const std::string& path) const {
        std::filesystem::path p(path);
        if (p.is_absolute()) return p.string();
        return (base_dir / p).lexically_normal().string();
    }
};

inline void validate_run_config(const nlohmann::json& cfg) {
    detail::check_keys(cfg, "config",
                       {"data", "features", "model", "tuner", "attack", "conformal", "report", "seed"});
    if (cfg.contains("seed") && !cfg.at("seed").is_number_unsigned() && !cfg.at("seed").is_number_integer()) {
        throw ConfigError("config key 'config.seed' must be an integer");
    }
    if (cfg.contains("data")) {
        const auto& d = cfg.at("data");
        detail::check_keys(d, "data",
                           {"csv", "dir", "train_fraction", "test_fraction", "validation_fraction",
                            "calibration_fraction", "synthetic"});
        if (d.contains("synthetic")) {
            const auto& s = d.at("synthetic");
            detail::check_keys(s, "data.synthetic",
                               {"n_benign", "n_malware", "seed", "initial_ttl", "benign", "malware"});
            if (s.contains("benign")) detail::validate_cluster(s.at("benign"), "data.synthetic.benign");
            if (s.contains("malware")) detail::validate_cluster(s.at("malware"), "data.synthetic.malware");
        }
    }
    if (cfg.contains("features")) {
        detail::check_keys(cfg.at("features"), "features", {"bins", "threshold", "sweep_thresholds"});
    }
    if (cfg.contains("model")) {
        const auto& m = cfg.at("model");
        detail::check_keys(m, "model", {"kind", "seed", "path", "features", "dt", "rf", "mlp"});
        if (m.contains("dt")) detail::check_keys(m.at("dt"), "model.dt", detail::kTreeKeys);
        if (m.contains("rf")) {
            std::vector<const char*> keys{"n_estimators", "bootstrap"};
            keys.insert(keys.end(), detail::kTreeKeys.begin(), detail::kTreeKeys.end());
            if (!m.at("rf").is_object()) throw ConfigError("config section 'model.rf' must be an object");
            for (auto it = m.at("rf").begin(); it != m.at("rf").end(); ++it) {
                if (std::find_if(keys.begin(), keys.end(), [&](const char* k) {
                        return it.key() == k;
                    }) == keys.end()) {
                    throw ConfigError("unknown config key 'model.rf." + it.key() + "'");
                }
            }
        }
        if (m.contains("mlp")) {
            detail::check_keys(m.at("mlp"), "model.mlp",
                               {"hidden_layers", "nodes_per_layer", "activation", "optimizer", "loss",
                                "learning_rate", "epochs", "batch_size"});
        }
    }
    if (cfg.contains("tuner")) {
        detail::check_keys(cfg.at("tuner"), "tuner",
                           {"budget", "population", "generations", "tournament", "mutation_prob",
                            "particles", "iterations", "inertia", "c1", "c2", "seed", "space"});
    }
    if (cfg.contains("attack")) {
        const auto& a = cfg.at("attack");
        detail::check_keys(a, "attack",
                           {"kind", "features", "checkpoints", "surrogate", "targets", "source",
                            "max_samples", "transfer_on_surrogate_success_only", "target_class",
                            "initial_ttl", "epsilon", "cw", "gan", "adversarial_csvs"});
        if (a.contains("cw")) {
            detail::check_keys(a.at("cw"), "attack.cw",
                               {"c", "kappa", "learning_rate", "iterations", "noise_magnitude",
                                "batch_size"});
        }
        if (a.contains("gan")) {
            detail::check_keys(a.at("gan"), "attack.gan",
                               {"latent_dim", "gen_hidden", "disc_hidden", "disc_iters_per_gen", "epochs",
                                "batch_size", "learning_rate", "weight_clamp"});
        }
        if (a.contains("targets")) {
            if (!a.at("targets").is_array()) throw ConfigError("config key 'attack.targets' must be an array");
            std::size_t i = 0;
            for (const auto& t : a.at("targets")) {
                detail::check_keys(t, "attack.targets[" + std::to_string(i) + "]", {"name", "path"});
                ++i;
            }
        }
    }
    if (cfg.contains("conformal")) {
        detail::check_keys(cfg.at("conformal"), "conformal",
                           {"alpha", "alpha_lo", "alpha_hi", "n_points", "model", "q_hat", "calibration",
                            "source"});
    }
    if (cfg.contains("report")) {
        detail::check_keys(cfg.at("report"), "report", {"campaign_csv", "dir"});
    }
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    RunConfig cfg;
    try {
        cfg.raw = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + std::string(e.what()));
    }
    validate_run_config(cfg.raw);
    cfg.base_dir = std::filesystem::absolute(std::filesystem::path(path)).parent_path();
    cfg.config_hash = hex64(fnv1a(text));
    if (cfg.raw.contains("seed")) cfg.seed = cfg.raw.at("seed").get<std::uint64_t>();
    cfg.loaded = true;
    return cfg;
}

// ---------------------------------------------------------------------------
// Section -> typed parameter builders.
// ---------------------------------------------------------------------------

namespace detail {

// Reuses the hyperparameter machinery: a JSON object becomes a one-candidate
// space, which funnels every key through the shared parsers and rejects
// unknown names with the section-aware error message.
inline void json_to_candidate(const nlohmann::json& obj, HyperparamSpace& space, Candidate& cand) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        ParamDomain d;
        d.name = it.key();
        d.values.push_back(param_value_from_json(it.value()));
        space.domains.push_back(std::move(d));
        cand.values.push_back(param_value_from_json(it.value()));
    }
}

template <typename T>
inline T number_or(const nlohmann::json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    return v.get<T>();
}

}  // namespace detail

inline DtParams dt_params_from_json(const nlohmann::json& obj) {
    HyperparamSpace space;
    Candidate cand;
    detail::json_to_candidate(obj, space, cand);
    if (space.domains.empty()) return DtParams{};
    return dt_params_from_candidate(space, cand);
}

inline RfParams rf_params_from_json(const nlohmann::json& obj) {
    HyperparamSpace space;
    Candidate cand;
    detail::json_to_candidate(obj, space, cand);
    if (space.domains.empty()) return RfParams{};
    return rf_params_from_candidate(space, cand);
}

inline MlpParams mlp_params_from_json(const nlohmann::json& obj) {
    HyperparamSpace space;
    Candidate cand;
    detail::json_to_candidate(obj, space, cand);
    if (space.domains.empty()) return MlpParams{};
    return mlp_params_from_candidate(space, cand);
}

// tuner.space: {"name": [v1, v2, ...], ...}
inline HyperparamSpace space_from_json(const nlohmann::json& obj) {
    HyperparamSpace space;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!it.value().is_array() || it.value().empty()) {
            throw ConfigError("config key 'tuner.space." + it.key() + "' must be a non-empty array");
        }
        ParamDomain d;
        d.name = it.key();
        for (const auto& v : it.value()) d.values.push_back(param_value_from_json(v));
        space.domains.push_back(std::move(d));
    }
    space.validate();
    return space;
}

inline SyntheticSpec synthetic_from_config(const RunConfig& cfg) {
    SyntheticSpec spec;
    spec.seed = cfg.seed;
    const nlohmann::json data = cfg.section_or_empty("data");
    if (!data.contains("synthetic")) return spec;
    const auto& s = data.at("synthetic");
    if (s.contains("n_benign")) spec.n_benign = s.at("n_benign").get<std::size_t>();
    if (s.contains("n_malware")) spec.n_malware = s.at("n_malware").get<std::size_t>();
    if (s.contains("seed")) spec.seed = s.at("seed").get<std::uint64_t>();
    spec.initial_ttl = detail::number_or(s, "initial_ttl", spec.initial_ttl);
    auto fill = [&](const nlohmann::json& c, ClassCluster& out) {
        out.src_win_mean = detail::number_or(c, "src_win_mean", out.src_win_mean);
        out.src_win_sd = detail::number_or(c, "src_win_sd", out.src_win_sd);
        out.s_hops_mean = detail::number_or(c, "s_hops_mean", out.s_hops_mean);
        out.s_hops_sd = detail::number_or(c, "s_hops_sd", out.s_hops_sd);
        out.src_bytes_mean = detail::number_or(c, "src_bytes_mean", out.src_bytes_mean);
        out.src_bytes_sd = detail::number_or(c, "src_bytes_sd", out.src_bytes_sd);
        out.dst_bytes_mean = detail::number_or(c, "dst_bytes_mean", out.dst_bytes_mean);
        out.dst_bytes_sd = detail::number_or(c, "dst_bytes_sd", out.dst_bytes_sd);
        out.dur_mean = detail::number_or(c, "dur_mean", out.dur_mean);
        out.dur_sd = detail::number_or(c, "dur_sd", out.dur_sd);
    };
    if (s.contains("benign")) fill(s.at("benign"), spec.benign);
    if (s.contains("malware")) fill(s.at("malware"), spec.malware);
    return spec;
}

inline SplitSpec split_spec_from_config(const RunConfig& cfg) {
    SplitSpec spec;
    spec.seed = cfg.seed;
    const nlohmann::json data = cfg.section_or_empty("data");
    spec.train_fraction = detail::number_or(data, "train_fraction", spec.train_fraction);
    spec.test_fraction = detail::number_or(data, "test_fraction", spec.test_fraction);
    spec.validation_fraction_of_train =
        detail::number_or(data, "validation_fraction", spec.validation_fraction_of_train);
    spec.calibration_fraction_of_train =
        detail::number_or(data, "calibration_fraction", spec.calibration_fraction_of_train);
    return spec;
}

// model.features: array of feature names -> schema indices.
inline std::vector<int> feature_indices_from_config(const RunConfig& cfg) {
    const nlohmann::json m = cfg.section_or_empty("model");
    std::vector<int> out;
    if (!m.contains("features")) return out;
    if (!m.at("features").is_array()) throw ConfigError("config key 'model.features' must be an array");
    for (const auto& f : m.at("features")) out.push_back(feature_index(f.get<std::string>()));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

inline ModelKind model_kind_from_config(const RunConfig& cfg) {
    const nlohmann::json& m = cfg.section("model");
    if (!m.contains("kind")) throw ConfigError("config key 'model.kind' is required");
    return model_kind_from_name(m.at("kind").get<std::string>());
}

inline std::uint64_t model_seed_from_config(const RunConfig& cfg) {
    const nlohmann::json m = cfg.section_or_empty("model");
    return m.contains("seed") ? m.at("seed").get<std::uint64_t>() : cfg.seed;
}

inline CwConfig cw_config_from_json(const nlohmann::json& obj) {
    CwConfig c;
    c.c = detail::number_or(obj, "c", c.c);
    c.kappa = detail::number_or(obj, "kappa", c.kappa);
    c.learning_rate = detail::number_or(obj, "learning_rate", c.learning_rate);
    c.iterations = detail::number_or(obj, "iterations", c.iterations);
    c.noise_magnitude = detail::number_or(obj, "noise_magnitude", c.noise_magnitude);
    c.batch_size = detail::number_or(obj, "batch_size", c.batch_size);
    return c;
}

inline GanConfig gan_config_from_json(const nlohmann::json& obj) {
    GanConfig g;
    g.latent_dim = detail::number_or(obj, "latent_dim", g.latent_dim);
    g.gen_hidden = detail::number_or(obj, "gen_hidden", g.gen_hidden);
    g.disc_hidden = detail::number_or(obj, "disc_hidden", g.disc_hidden);
    g.disc_iters_per_gen = detail::number_or(obj, "disc_iters_per_gen", g.disc_iters_per_gen);
    g.epochs = detail::number_or(obj, "epochs", g.epochs);
    g.batch_size = detail::number_or(obj, "batch_size", g.batch_size);
    g.learning_rate = detail::number_or(obj, "learning_rate", g.learning_rate);
    g.weight_clamp = detail::number_or(obj, "weight_clamp", g.weight_clamp);
    return g;
}

// attack section -> campaign config (clip bounds are filled per feature at
// run time from the training data).
inline CampaignConfig campaign_config_from_config(const RunConfig& cfg, AttackKind kind) {
    const nlohmann::json& a = cfg.section("attack");
    CampaignConfig c;
    c.kind = kind;
    c.seed = cfg.seed;
    if (a.contains("features")) {
        for (const auto& f : a.at("features")) c.features.push_back(f.get<std::string>());
    } else {
        c.features.assign(kFeatureNames.begin(), kFeatureNames.end());
    }
    if (a.contains("checkpoints")) {
        for (const auto& v : a.at("checkpoints")) c.checkpoints.push_back(v.get<int>());
    } else if (kind == AttackKind::Cw) {
        c.checkpoints = {5, 100, 750, 1000, 2000};
    } else {
        c.checkpoints = {5, 10, 25, 50};
    }
    if (a.contains("cw")) c.cw = cw_config_from_json(a.at("cw"));
    if (a.contains("gan")) c.gan = gan_config_from_json(a.at("gan"));
    c.target_class = detail::number_or(a, "target_class", c.target_class);
    if (a.contains("transfer_on_surrogate_success_only")) {
        c.transfer_on_surrogate_success_only = a.at("transfer_on_surrogate_success_only").get<bool>();
    }
    c.max_samples = detail::number_or<std::size_t>(a, "max_samples", c.max_samples);
    c.initial_ttl = detail::number_or(a, "initial_ttl", c.initial_ttl);
    c.epsilon = detail::number_or(a, "epsilon", c.epsilon);
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Manifest: accompanies every produced artifact set.  No timestamps — reruns
// must be byte-identical.
// ---------------------------------------------------------------------------

inline std::string write_manifest(const std::string& out_dir, const std::string& command,
                                  const RunConfig& cfg, const std::vector<std::string>& outputs,
                                  const nlohmann::json& extras = nlohmann::json::object()) {
    nlohmann::json manifest;
    manifest["tool"] = "flowgauntlet";
    manifest["version"] = kVersion;
    manifest["command"] = command;
    manifest["config_hash"] = cfg.config_hash;
    manifest["seed"] = cfg.seed;
    std::vector<std::string> names;
    for (const auto& p : outputs) names.push_back(std::filesystem::path(p).filename().string());
    std::sort(names.begin(), names.end());
    manifest["outputs"] = names;
    for (auto it = extras.begin(); it != extras.end(); ++it) manifest[it.key()] = it.value();
    std::filesystem::create_directories(out_dir);
    const std::string path = (std::filesystem::path(out_dir) / "manifest.json").string();
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("failed writing '" + path + "'");
    return path;
}

inline nlohmann::json metrics_to_json(const Metrics& m) {
    return {{"tp", m.tp},           {"fp", m.fp},
            {"tn", m.tn},           {"fn", m.fn},
            {"accuracy", m.accuracy}, {"precision", m.precision},
            {"recall", m.recall},   {"f1", m.f1}};
}

}  // namespace fg
