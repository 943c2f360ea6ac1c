#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowgauntlet/core.hpp"
#include "flowgauntlet/metrics.hpp"
#include "flowgauntlet/models/model.hpp"
#include "flowgauntlet/rng.hpp"

namespace fg {

// ---------------------------------------------------------------------------
// Discrete search space: each hyperparameter has a finite ordered domain.
// std::monostate encodes "none" (JSON null).
// ---------------------------------------------------------------------------

using ParamValue = std::variant<std::monostate, bool, std::int64_t, double, std::string>;

inline nlohmann::json param_value_to_json(const ParamValue& v) {
    return std::visit(
        [](const auto& x) -> nlohmann::json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
                return nullptr;
            } else {
                return x;
            }
        },
        v);
}

inline ParamValue param_value_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::monostate{};
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number_float()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    throw ConfigError("unsupported hyperparameter value: " + j.dump());
}

struct ParamDomain {
    std::string name;
    std::vector<ParamValue> values;
};

struct HyperparamSpace {
    std::vector<ParamDomain> domains;

    std::size_t n_hp() const { return domains.size(); }

    void validate() const {
        if (domains.empty()) throw ConfigError("hyperparameter space has no domains");
        for (const auto& d : domains) {
            if (d.values.empty()) throw ConfigError("hyperparameter domain '" + d.name + "' is empty");
        }
    }

    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < domains.size(); ++i) {
            if (domains[i].name == name) return static_cast<int>(i);
        }
        return -1;
    }
};

struct FitnessValue {
    double f1 = 0.0;
    double accuracy = 0.0;
};

// GA and random search compare (f1, accuracy) lexicographically; PSO uses the
// even-weighted sum.  Both rules are strict: equal fitness is no improvement,
// so the earlier-evaluated candidate keeps its spot.
enum class FitnessRule { Lexicographic, WeightedSum };

inline bool fitness_better(const FitnessValue& a, const FitnessValue& b, FitnessRule rule) {
    if (rule == FitnessRule::Lexicographic) {
        if (a.f1 != b.f1) return a.f1 > b.f1;
        return a.accuracy > b.accuracy;
    }
    return 0.5 * a.f1 + 0.5 * a.accuracy > 0.5 * b.f1 + 0.5 * b.accuracy;
}

struct Candidate {
    std::vector<ParamValue> values;
    std::optional<FitnessValue> fitness;
};

using FitnessFn = std::function<FitnessValue(const Candidate&)>;

struct TraceRow {
    int iteration = 0;
    int candidate_id = 0;
    double f1 = 0.0;
    double accuracy = 0.0;
    bool is_best = false;  // set when this evaluation established a new global best
};

struct SearchResult {
    Candidate best;
    std::vector<TraceRow> trace;
};

inline void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "iteration,candidate_id,f1,accuracy,is_best\n";
    for (const auto& r : trace) {
        out << r.iteration << "," << r.candidate_id << "," << format_double(r.f1) << ","
            << format_double(r.accuracy) << "," << (r.is_best ? 1 : 0) << "\n";
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

namespace detail {

inline Candidate random_candidate(const HyperparamSpace& space, Rng& rng) {
    Candidate c;
    c.values.reserve(space.n_hp());
    for (const auto& d : space.domains) {
        c.values.push_back(d.values[static_cast<std::size_t>(rng.below(d.values.size()))]);
    }
    return c;
}

struct BestTracker {
    Candidate best;
    bool has_best = false;
    FitnessRule rule;

    explicit BestTracker(FitnessRule r) : rule(r) {}

    // Returns true when `cand` strictly improves the global best.
    bool offer(const Candidate& cand) {
        if (!has_best || fitness_better(*cand.fitness, *best.fitness, rule)) {
            best = cand;
            has_best = true;
            return true;
        }
        return false;
    }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Random search: budget i.i.d. uniform samples, best by the fitness rule.
// ---------------------------------------------------------------------------

inline SearchResult random_search(const HyperparamSpace& space, int budget, const FitnessFn& fitness_fn,
                                  std::uint64_t seed, FitnessRule rule = FitnessRule::Lexicographic) {
    space.validate();
    if (budget < 1) throw ConfigError("random search budget must be >= 1");
    Rng rng(seed);
    detail::BestTracker tracker(rule);
    SearchResult result;
    for (int i = 0; i < budget; ++i) {
        Candidate c = detail::random_candidate(space, rng);
        c.fitness = fitness_fn(c);
        const bool improved = tracker.offer(c);
        result.trace.push_back({i, i, c.fitness->f1, c.fitness->accuracy, improved});
    }
    result.best = tracker.best;
    return result;
}

// ---------------------------------------------------------------------------
// Genetic algorithm: tournament selection, uniform crossover, single-gene
// mutation, elitism of one.
// ---------------------------------------------------------------------------

// argmax fitness among the sampled indices; earlier draw wins ties.
inline std::size_t tournament_pick(const std::vector<Candidate>& population,
                                   const std::vector<std::size_t>& sample, FitnessRule rule) {
    if (sample.empty()) throw EmptyInputError("tournament sample is empty");
    std::size_t winner = sample[0];
    for (std::size_t i = 1; i < sample.size(); ++i) {
        if (fitness_better(*population[sample[i]].fitness, *population[winner].fitness, rule)) {
            winner = sample[i];
        }
    }
    return winner;
}

inline SearchResult ga_optimize(const HyperparamSpace& space, int population, int generations, int tournament,
                                double mutation_prob, const FitnessFn& fitness_fn, std::uint64_t seed,
                                FitnessRule rule = FitnessRule::Lexicographic) {
    space.validate();
    if (population < 2) throw ConfigError("ga population must be >= 2");
    if (generations < 1) throw ConfigError("ga generations must be >= 1");
    if (tournament < 1) throw ConfigError("ga tournament size must be >= 1");
    if (mutation_prob < 0.0 || mutation_prob > 1.0) throw ConfigError("ga mutation_prob must be in [0,1]");

    Rng rng(seed);
    detail::BestTracker tracker(rule);
    SearchResult result;
    std::vector<Candidate> pop;
    pop.reserve(static_cast<std::size_t>(population));

    for (int gen = 0; gen < generations; ++gen) {
        if (gen == 0) {
            for (int i = 0; i < population; ++i) pop.push_back(detail::random_candidate(space, rng));
        } else {
            std::vector<Candidate> next;
            next.reserve(static_cast<std::size_t>(population));
            // Elite: best of the current population, earliest index on ties.
            std::size_t elite = 0;
            for (std::size_t i = 1; i < pop.size(); ++i) {
                if (fitness_better(*pop[i].fitness, *pop[elite].fitness, rule)) elite = i;
            }
            next.push_back(pop[elite]);
            while (next.size() < static_cast<std::size_t>(population)) {
                auto draw_parent = [&]() -> const Candidate& {
                    std::vector<std::size_t> sample;
                    sample.reserve(static_cast<std::size_t>(tournament));
                    for (int t = 0; t < tournament; ++t) {
                        sample.push_back(static_cast<std::size_t>(rng.below(pop.size())));
                    }
                    return pop[tournament_pick(pop, sample, rule)];
                };
                const Candidate& pa = draw_parent();
                const Candidate& pb = draw_parent();
                Candidate child;
                child.values.reserve(space.n_hp());
                for (std::size_t g = 0; g < space.n_hp(); ++g) {
                    child.values.push_back(rng.uniform() < 0.5 ? pa.values[g] : pb.values[g]);
                }
                if (rng.uniform() < mutation_prob) {
                    const std::size_t gene = static_cast<std::size_t>(rng.below(space.n_hp()));
                    const auto& domain = space.domains[gene].values;
                    child.values[gene] = domain[static_cast<std::size_t>(rng.below(domain.size()))];
                }
                next.push_back(std::move(child));
            }
            pop = std::move(next);
        }
        for (std::size_t i = 0; i < pop.size(); ++i) {
            if (!pop[i].fitness.has_value()) pop[i].fitness = fitness_fn(pop[i]);
            const bool improved = tracker.offer(pop[i]);
            result.trace.push_back(
                {gen, static_cast<int>(i), pop[i].fitness->f1, pop[i].fitness->accuracy, improved});
        }
    }
    result.best = tracker.best;
    return result;
}

// ---------------------------------------------------------------------------
// Particle swarm over index space.  Positions are real vectors; they are
// clamped into [0, |domain|-1] after each additive update and rounded to the
// nearest index only when a candidate is materialized for evaluation.
// ---------------------------------------------------------------------------

inline double pso_velocity_update(double v, double x, double p_best, double g_best, double w, double c1,
                                  double c2, double r1, double r2) {
    return w * v + c1 * r1 * (p_best - x) + c2 * r2 * (g_best - x);
}

inline SearchResult pso_optimize(const HyperparamSpace& space, int particles, int iterations, double w,
                                 double c1, double c2, const FitnessFn& fitness_fn, std::uint64_t seed,
                                 FitnessRule rule = FitnessRule::WeightedSum) {
    space.validate();
    if (particles < 1) throw ConfigError("pso particle count must be >= 1");
    if (iterations < 1) throw ConfigError("pso iteration count must be >= 1");

    const std::size_t dims = space.n_hp();
    Rng rng(seed);
    detail::BestTracker tracker(rule);
    SearchResult result;

    struct Particle {
        std::vector<double> position;
        std::vector<double> velocity;
        std::vector<double> best_position;
        FitnessValue best_fitness;
    };

    auto materialize = [&](const std::vector<double>& position) {
        Candidate c;
        c.values.reserve(dims);
        for (std::size_t d = 0; d < dims; ++d) {
            const auto& domain = space.domains[d].values;
            long idx = std::lround(position[d]);
            idx = std::clamp<long>(idx, 0, static_cast<long>(domain.size()) - 1);
            c.values.push_back(domain[static_cast<std::size_t>(idx)]);
        }
        return c;
    };

    std::vector<Particle> swarm(static_cast<std::size_t>(particles));
    std::vector<double> g_best_position;
    FitnessValue g_best_fitness;
    bool has_g_best = false;

    for (int iter = 0; iter < iterations; ++iter) {
        for (std::size_t p = 0; p < swarm.size(); ++p) {
            Particle& part = swarm[p];
            if (iter == 0) {
                part.position.resize(dims);
                part.velocity.assign(dims, 0.0);
                for (std::size_t d = 0; d < dims; ++d) {
                    part.position[d] = static_cast<double>(rng.below(space.domains[d].values.size()));
                }
            } else {
                for (std::size_t d = 0; d < dims; ++d) {
                    const double r1 = rng.uniform();
                    const double r2 = rng.uniform();
                    part.velocity[d] = pso_velocity_update(part.velocity[d], part.position[d],
                                                           part.best_position[d], g_best_position[d], w, c1,
                                                           c2, r1, r2);
                    const double hi = static_cast<double>(space.domains[d].values.size()) - 1.0;
                    part.position[d] = std::clamp(part.position[d] + part.velocity[d], 0.0, hi);
                }
            }
            Candidate c = materialize(part.position);
            c.fitness = fitness_fn(c);
            if (iter == 0 || fitness_better(*c.fitness, part.best_fitness, rule)) {
                part.best_position = part.position;
                part.best_fitness = *c.fitness;
            }
            if (!has_g_best || fitness_better(*c.fitness, g_best_fitness, rule)) {
                g_best_position = part.position;
                g_best_fitness = *c.fitness;
                has_g_best = true;
            }
            const bool improved = tracker.offer(c);
            result.trace.push_back({iter, static_cast<int>(p), c.fitness->f1, c.fitness->accuracy, improved});
        }
    }
    result.best = tracker.best;
    return result;
}

// ---------------------------------------------------------------------------
// Classifier fitness: build params from a named candidate, train on `train`,
// score on `validation`.  Any training failure is logged and scored (0, 0).
// ---------------------------------------------------------------------------

namespace detail {

inline std::int64_t as_int(const ParamValue& v, const std::string& name) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
    if (const auto* d = std::get_if<double>(&v)) return static_cast<std::int64_t>(*d);
    throw ConfigError("hyperparameter '" + name + "' must be an integer");
}

inline double as_double(const ParamValue& v, const std::string& name) {
    if (const auto* d = std::get_if<double>(&v)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    throw ConfigError("hyperparameter '" + name + "' must be a number");
}

inline std::string as_string(const ParamValue& v, const std::string& name) {
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    throw ConfigError("hyperparameter '" + name + "' must be a string");
}

inline bool as_bool(const ParamValue& v, const std::string& name) {
    if (const auto* b = std::get_if<bool>(&v)) return *b;
    throw ConfigError("hyperparameter '" + name + "' must be a boolean");
}

inline bool is_none(const ParamValue& v) { return std::holds_alternative<std::monostate>(v); }

inline MaxFeatures max_features_from(const ParamValue& v) {
    if (is_none(v)) return MaxFeatures::all();
    if (const auto* s = std::get_if<std::string>(&v)) {
        if (*s == "all" || *s == "none") return MaxFeatures::all();
        if (*s == "auto" || *s == "sqrt") return MaxFeatures::sqrt();
        if (*s == "log2") return MaxFeatures::log2();
        throw ConfigError("unknown max_features value '" + *s + "'");
    }
    return MaxFeatures::fixed_count(static_cast<int>(as_int(v, "max_features")));
}

// Applies one named value to a DtParams; returns false if the name is not a
// tree parameter.
inline bool apply_tree_param(DtParams& p, const std::string& name, const ParamValue& v) {
    if (name == "criterion") {
        const std::string s = as_string(v, name);
        if (s == "gini") p.criterion = Criterion::Gini;
        else if (s == "entropy") p.criterion = Criterion::Entropy;
        else throw ConfigError("unknown criterion '" + s + "'");
    } else if (name == "splitter") {
        const std::string s = as_string(v, name);
        if (s == "best") p.splitter = Splitter::Best;
        else if (s == "random") p.splitter = Splitter::Random;
        else throw ConfigError("unknown splitter '" + s + "'");
    } else if (name == "max_depth") {
        p.max_depth = is_none(v) ? std::nullopt : std::optional<int>(static_cast<int>(as_int(v, name)));
    } else if (name == "min_samples_split") {
        p.min_samples_split = static_cast<int>(as_int(v, name));
    } else if (name == "min_samples_leaf") {
        p.min_samples_leaf = static_cast<int>(as_int(v, name));
    } else if (name == "min_weight_fraction_leaf") {
        p.min_weight_fraction_leaf = as_double(v, name);
    } else if (name == "max_features") {
        p.max_features = max_features_from(v);
    } else if (name == "max_leaf_nodes") {
        p.max_leaf_nodes = is_none(v) ? std::nullopt : std::optional<int>(static_cast<int>(as_int(v, name)));
    } else if (name == "min_impurity_decrease") {
        p.min_impurity_decrease = as_double(v, name);
    } else if (name == "ccp_alpha") {
        p.ccp_alpha = as_double(v, name);
    } else {
        return false;
    }
    return true;
}

}  // namespace detail

inline DtParams dt_params_from_candidate(const HyperparamSpace& space, const Candidate& cand) {
    DtParams p;
    for (std::size_t i = 0; i < space.n_hp(); ++i) {
        if (!detail::apply_tree_param(p, space.domains[i].name, cand.values[i])) {
            throw ConfigError("unknown decision-tree hyperparameter '" + space.domains[i].name + "'");
        }
    }
    return p;
}

inline RfParams rf_params_from_candidate(const HyperparamSpace& space, const Candidate& cand) {
    RfParams p;
    for (std::size_t i = 0; i < space.n_hp(); ++i) {
        const std::string& name = space.domains[i].name;
        const ParamValue& v = cand.values[i];
        if (name == "n_estimators") {
            p.n_estimators = static_cast<int>(detail::as_int(v, name));
        } else if (name == "bootstrap") {
            p.bootstrap = detail::as_bool(v, name);
        } else if (!detail::apply_tree_param(p.tree, name, v)) {
            throw ConfigError("unknown random-forest hyperparameter '" + name + "'");
        }
    }
    return p;
}

inline MlpParams mlp_params_from_candidate(const HyperparamSpace& space, const Candidate& cand) {
    MlpParams p;
    for (std::size_t i = 0; i < space.n_hp(); ++i) {
        const std::string& name = space.domains[i].name;
        const ParamValue& v = cand.values[i];
        if (name == "hidden_layers") {
            p.hidden_layers = static_cast<int>(detail::as_int(v, name));
        } else if (name == "nodes_per_layer") {
            p.nodes_per_layer = static_cast<int>(detail::as_int(v, name));
        } else if (name == "activation") {
            p.activation = detail::activation_from_name(detail::as_string(v, name));
        } else if (name == "optimizer") {
            const std::string s = detail::as_string(v, name);
            if (s == "adam") p.optimizer = OptimizerKind::Adam;
            else if (s == "sgd") p.optimizer = OptimizerKind::Sgd;
            else if (s == "rmsprop") p.optimizer = OptimizerKind::Rmsprop;
            else throw ConfigError("unknown optimizer '" + s + "'");
        } else if (name == "loss") {
            const std::string s = detail::as_string(v, name);
            if (s == "binary_crossentropy") p.loss = LossKind::BinaryCrossentropy;
            else if (s == "hinge") p.loss = LossKind::Hinge;
            else throw ConfigError("unknown loss '" + s + "'");
        } else if (name == "learning_rate") {
            p.learning_rate = detail::as_double(v, name);
        } else if (name == "epochs") {
            p.epochs = static_cast<int>(detail::as_int(v, name));
        } else if (name == "batch_size") {
            p.batch_size = static_cast<int>(detail::as_int(v, name));
        } else {
            throw ConfigError("unknown mlp hyperparameter '" + name + "'");
        }
    }
    return p;
}

inline void validate_space_names(const HyperparamSpace& space, ModelKind kind) {
    Candidate probe;
    for (const auto& d : space.domains) probe.values.push_back(d.values.front());
    switch (kind) {
        case ModelKind::DecisionTree: dt_params_from_candidate(space, probe); break;
        case ModelKind::RandomForest: rf_params_from_candidate(space, probe); break;
        case ModelKind::Mlp: mlp_params_from_candidate(space, probe); break;
    }
}

inline Model train_from_candidate(const HyperparamSpace& space, const Candidate& cand, ModelKind kind,
                                  const Dataset& train, std::uint64_t model_seed,
                                  std::vector<int> feature_indices = {}, int jobs = 1) {
    switch (kind) {
        case ModelKind::DecisionTree:
            return DecisionTree::train(train, dt_params_from_candidate(space, cand), model_seed,
                                       std::move(feature_indices));
        case ModelKind::RandomForest: {
            RfParams p = rf_params_from_candidate(space, cand);
            p.seed = model_seed;
            return RandomForest::train(train, p, std::move(feature_indices), jobs);
        }
        case ModelKind::Mlp: {
            MlpParams p = mlp_params_from_candidate(space, cand);
            p.seed = model_seed;
            return Mlp::train(train, p, std::move(feature_indices));
        }
    }
    throw ConfigError("unreachable model kind");
}

inline FitnessValue fitness_classifier(const HyperparamSpace& space, const Candidate& cand,
                                       const Dataset& train, const Dataset& validation, ModelKind kind,
                                       std::uint64_t model_seed = 0,
                                       const std::vector<int>& feature_indices = {}, int jobs = 1) {
    try {
        const Model model =
            train_from_candidate(space, cand, kind, train, model_seed, feature_indices, jobs);
        const Metrics m = compute_metrics(predict_labels(model, validation), validation.labels());
        return {m.f1, m.accuracy};
    } catch (const std::exception& e) {
        log_warn(std::string("candidate scored (0,0): ") + e.what());
        return {0.0, 0.0};
    }
}

// ---------------------------------------------------------------------------
// Default spaces, mirroring the published tuning grids.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<ParamValue> int_range(std::int64_t lo, std::int64_t hi, std::int64_t step) {
    std::vector<ParamValue> out;
    for (std::int64_t v = lo; v <= hi; v += step) out.emplace_back(v);
    return out;
}

inline std::vector<ParamValue> double_range(double lo, double hi, double step) {
    std::vector<ParamValue> out;
    for (double v = lo; v <= hi + 1e-12; v += step) out.emplace_back(v);
    return out;
}

inline std::vector<ParamValue> with_none(std::vector<ParamValue> values) {
    std::vector<ParamValue> out;
    out.emplace_back(std::monostate{});
    for (auto& v : values) out.push_back(std::move(v));
    return out;
}

}  // namespace detail

inline HyperparamSpace default_dt_space() {
    HyperparamSpace s;
    s.domains.push_back({"criterion", {std::string("gini"), std::string("entropy")}});
    s.domains.push_back({"splitter", {std::string("best"), std::string("random")}});
    s.domains.push_back({"max_depth", detail::with_none(detail::int_range(3, 48, 3))});
    s.domains.push_back({"min_samples_split", detail::int_range(2, 20, 1)});
    s.domains.push_back({"min_samples_leaf", detail::int_range(1, 20, 1)});
    s.domains.push_back({"min_weight_fraction_leaf", detail::double_range(0.0, 0.5, 0.05)});
    s.domains.push_back(
        {"max_features", {std::monostate{}, std::string("auto"), std::string("sqrt"), std::string("log2")}});
    s.domains.push_back({"max_leaf_nodes", detail::with_none(detail::int_range(10, 100, 10))});
    s.domains.push_back({"min_impurity_decrease", detail::double_range(0.0, 0.5, 0.05)});
    s.domains.push_back({"ccp_alpha", detail::double_range(0.0, 0.05, 0.01)});
    return s;
}

inline HyperparamSpace default_rf_space() {
    HyperparamSpace s;
    s.domains.push_back({"n_estimators", detail::int_range(1, 191, 10)});
    s.domains.push_back({"criterion", {std::string("gini"), std::string("entropy")}});
    s.domains.push_back({"max_depth", detail::with_none(detail::int_range(3, 48, 3))});
    s.domains.push_back({"min_samples_split", detail::int_range(2, 20, 1)});
    s.domains.push_back({"min_samples_leaf", detail::int_range(1, 20, 1)});
    s.domains.push_back({"min_weight_fraction_leaf", detail::double_range(0.0, 0.5, 0.05)});
    {
        std::vector<ParamValue> mf = {std::monostate{}, std::string("sqrt"), std::string("log2")};
        for (std::int64_t k = 2; k <= 9; ++k) mf.emplace_back(k);
        s.domains.push_back({"max_features", std::move(mf)});
    }
    s.domains.push_back({"max_leaf_nodes", detail::with_none(detail::int_range(10, 100, 10))});
    s.domains.push_back({"min_impurity_decrease", detail::double_range(0.0, 1.0, 0.1)});
    s.domains.push_back({"bootstrap", {true, false}});
    s.domains.push_back({"ccp_alpha", detail::double_range(0.0, 0.05, 0.01)});
    return s;
}

inline HyperparamSpace default_mlp_space() {
    HyperparamSpace s;
    s.domains.push_back({"hidden_layers", detail::int_range(1, 5, 1)});
    s.domains.push_back({"nodes_per_layer", detail::int_range(5, 50, 5)});
    s.domains.push_back({"activation", {std::string("relu"), std::string("sigmoid"), std::string("tanh")}});
    s.domains.push_back({"optimizer", {std::string("adam"), std::string("sgd"), std::string("rmsprop")}});
    s.domains.push_back({"loss", {std::string("binary_crossentropy"), std::string("hinge")}});
    return s;
}

inline HyperparamSpace default_space(ModelKind kind) {
    switch (kind) {
        case ModelKind::DecisionTree: return default_dt_space();
        case ModelKind::RandomForest: return default_rf_space();
        case ModelKind::Mlp: return default_mlp_space();
    }
    throw ConfigError("unreachable model kind");
}

inline nlohmann::json candidate_to_json(const HyperparamSpace& space, const Candidate& cand) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < space.n_hp(); ++i) {
        j[space.domains[i].name] = param_value_to_json(cand.values[i]);
    }
    if (cand.fitness.has_value()) {
        j["_fitness"] = {{"f1", cand.fitness->f1}, {"accuracy", cand.fitness->accuracy}};
    }
    return j;
}

}  // namespace fg
