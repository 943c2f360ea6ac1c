#include <catch2/catch_amalgamated.hpp>

#include <flowgauntlet/hyperopt.hpp>
#include <flowgauntlet/rng.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <variant>
#include <vector>

using namespace fg;

namespace {

// 1-D space over the integers 0..15 whose fitness is v/15: a monotone
// landscape with a unique exhaustive optimum at v=15.
HyperparamSpace monotone_space() {
    HyperparamSpace s;
    ParamDomain d;
    d.name = "v";
    for (std::int64_t v = 0; v < 16; ++v) d.values.emplace_back(v);
    s.domains.push_back(std::move(d));
    return s;
}

FitnessValue monotone_fitness(const Candidate& cand) {
    const auto v = std::get<std::int64_t>(cand.values[0]);
    FitnessValue f;
    f.f1 = static_cast<double>(v) / 15.0;
    f.accuracy = f.f1;
    return f;
}

// Two-feature space whose fitness rewards a specific pair, to exercise
// crossover and tournament pressure.
HyperparamSpace pair_space() {
    HyperparamSpace s;
    ParamDomain a;
    a.name = "a";
    ParamDomain b;
    b.name = "b";
    for (std::int64_t v = 0; v < 8; ++v) {
        a.values.emplace_back(v);
        b.values.emplace_back(v);
    }
    s.domains.push_back(std::move(a));
    s.domains.push_back(std::move(b));
    return s;
}

double best_so_far_is_monotone(const std::vector<TraceRow>& trace, FitnessRule rule) {
    double best = -1.0;
    double best_acc = -1.0;
    for (const auto& row : trace) {
        const double score =
            rule == FitnessRule::WeightedSum ? 0.5 * row.f1 + 0.5 * row.accuracy : row.f1;
        if (row.is_best) {
            if (rule == FitnessRule::WeightedSum) {
                REQUIRE(score > (best < 0.0 ? -1.0 : 0.5 * best + 0.5 * best_acc));
            } else {
                const bool better = row.f1 > best || (row.f1 == best && row.accuracy > best_acc);
                REQUIRE(better);
            }
            best = row.f1;
            best_acc = row.accuracy;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("fitness comparison rules are strict") {
    const FitnessValue lo{0.5, 0.5};
    const FitnessValue hi{0.6, 0.4};
    REQUIRE(fitness_better(hi, lo, FitnessRule::Lexicographic));
    REQUIRE_FALSE(fitness_better(lo, lo, FitnessRule::Lexicographic));
    REQUIRE_FALSE(fitness_better(lo, lo, FitnessRule::WeightedSum));
    // Lexicographic: f1 dominates, accuracy breaks ties.
    const FitnessValue tie_hi{0.5, 0.9};
    REQUIRE(fitness_better(tie_hi, lo, FitnessRule::Lexicographic));
    // Weighted sum: the mean of the two metrics decides.
    const FitnessValue sum_hi{0.4, 0.8};
    REQUIRE(fitness_better(sum_hi, lo, FitnessRule::WeightedSum));
}

TEST_CASE("tournament pick returns the fittest sampled index, first on ties") {
    std::vector<Candidate> pop(4);
    pop[0].fitness = FitnessValue{0.2, 0.2};
    pop[1].fitness = FitnessValue{0.9, 0.9};
    pop[2].fitness = FitnessValue{0.9, 0.9};
    pop[3].fitness = FitnessValue{0.4, 0.4};
    REQUIRE(tournament_pick(pop, {0, 3}, FitnessRule::Lexicographic) == 3);
    REQUIRE(tournament_pick(pop, {1, 2}, FitnessRule::Lexicographic) == 1);  // tie: earlier draw
    REQUIRE(tournament_pick(pop, {2, 1}, FitnessRule::Lexicographic) == 2);
    REQUIRE(tournament_pick(pop, {0}, FitnessRule::Lexicographic) == 0);
    REQUIRE_THROWS_AS(tournament_pick(pop, {}, FitnessRule::Lexicographic), EmptyInputError);
}

TEST_CASE("pso velocity update matches the textbook formula") {
    // v' = w*v + c1*r1*(p_best - x) + c2*r2*(g_best - x) with injected r1, r2.
    const double v = pso_velocity_update(2.0, 1.0, 3.0, 5.0, 0.9, 1.5, 2.0, 0.5, 0.25);
    // 0.9*2 + 1.5*0.5*(3-1) + 2*0.25*(5-1) = 1.8 + 1.5 + 2.0 = 5.3
    REQUIRE(v == Catch::Approx(5.3).margin(1e-12));
    // Zero randomness leaves only inertia.
    REQUIRE(pso_velocity_update(4.0, 0.0, 9.0, 9.0, 0.5, 1.5, 2.0, 0.0, 0.0) == Catch::Approx(2.0));
}

TEST_CASE("random search evaluates exactly the budget and tracks the best") {
    const HyperparamSpace space = monotone_space();
    const SearchResult r = random_search(space, 40, monotone_fitness, 11);
    REQUIRE(r.trace.size() == 40);
    REQUIRE(r.best.fitness.has_value());
    const double best = best_so_far_is_monotone(r.trace, FitnessRule::Lexicographic);
    REQUIRE(r.best.fitness->f1 == Catch::Approx(best));
    // 40 draws over 16 values: finding the optimum is overwhelmingly likely.
    REQUIRE(std::get<std::int64_t>(r.best.values[0]) == 15);

    REQUIRE_THROWS_AS(random_search(space, 0, monotone_fitness, 1), ConfigError);
    REQUIRE_THROWS_AS(random_search(HyperparamSpace{}, 5, monotone_fitness, 1), ConfigError);
}

TEST_CASE("GA recovers the exhaustive optimum on every seed") {
    const HyperparamSpace space = monotone_space();
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const SearchResult r = ga_optimize(space, 20, 30, 3, 0.2, monotone_fitness, seed);
        best_so_far_is_monotone(r.trace, FitnessRule::Lexicographic);
        REQUIRE(std::get<std::int64_t>(r.best.values[0]) == 15);
        REQUIRE(r.trace.size() == 20 * 30);
    }
}

TEST_CASE("PSO recovers the exhaustive optimum on every seed") {
    const HyperparamSpace space = monotone_space();
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const SearchResult r = pso_optimize(space, 20, 30, 0.9, 1.5, 2.0, monotone_fitness, seed);
        best_so_far_is_monotone(r.trace, FitnessRule::WeightedSum);
        REQUIRE(std::get<std::int64_t>(r.best.values[0]) == 15);
        REQUIRE(r.trace.size() == 20 * 30);
    }
}

TEST_CASE("GA improves a two-dimensional landscape beyond its first generation") {
    const HyperparamSpace space = pair_space();
    const auto fitness = [](const Candidate& c) {
        const auto a = std::get<std::int64_t>(c.values[0]);
        const auto b = std::get<std::int64_t>(c.values[1]);
        FitnessValue f;
        f.f1 = 1.0 - (std::abs(static_cast<double>(a) - 5.0) + std::abs(static_cast<double>(b) - 2.0)) / 14.0;
        f.accuracy = f.f1;
        return f;
    };
    const SearchResult r = ga_optimize(space, 16, 25, 3, 0.3, fitness, 3);
    REQUIRE(std::get<std::int64_t>(r.best.values[0]) == 5);
    REQUIRE(std::get<std::int64_t>(r.best.values[1]) == 2);
}

TEST_CASE("searches are deterministic in their seed") {
    const HyperparamSpace space = pair_space();
    const auto fitness = [](const Candidate& c) {
        const auto a = std::get<std::int64_t>(c.values[0]);
        FitnessValue f;
        f.f1 = static_cast<double>(a) / 7.0;
        f.accuracy = 0.5;
        return f;
    };
    for (int which = 0; which < 3; ++which) {
        auto run = [&](std::uint64_t seed) {
            switch (which) {
                case 0: return random_search(space, 10, fitness, seed);
                case 1: return ga_optimize(space, 8, 5, 3, 0.2, fitness, seed);
                default: return pso_optimize(space, 8, 5, 0.9, 1.5, 2.0, fitness, seed);
            }
        };
        const SearchResult a = run(42);
        const SearchResult b = run(42);
        REQUIRE(a.trace.size() == b.trace.size());
        for (std::size_t i = 0; i < a.trace.size(); ++i) {
            REQUIRE(a.trace[i].f1 == b.trace[i].f1);
            REQUIRE(a.trace[i].is_best == b.trace[i].is_best);
        }
    }
}

TEST_CASE("search argument validation") {
    const HyperparamSpace space = monotone_space();
    REQUIRE_THROWS_AS(ga_optimize(space, 1, 5, 3, 0.2, monotone_fitness, 0), ConfigError);
    REQUIRE_THROWS_AS(ga_optimize(space, 4, 0, 3, 0.2, monotone_fitness, 0), ConfigError);
    REQUIRE_THROWS_AS(ga_optimize(space, 4, 5, 0, 0.2, monotone_fitness, 0), ConfigError);
    REQUIRE_THROWS_AS(ga_optimize(space, 4, 5, 3, 1.5, monotone_fitness, 0), ConfigError);
    REQUIRE_THROWS_AS(pso_optimize(space, 0, 5, 0.9, 1.5, 2.0, monotone_fitness, 0), ConfigError);
    REQUIRE_THROWS_AS(pso_optimize(space, 4, 0, 0.9, 1.5, 2.0, monotone_fitness, 0), ConfigError);
}

TEST_CASE("default spaces are valid and train real models from candidates") {
    Dataset train;
    train.scale = Scale::Standardized;
    Rng rng(8);
    for (int i = 0; i < 120; ++i) {
        FlowRecord r;
        r.label = static_cast<int>(rng.below(2));
        for (int j = 0; j < kNumFeatures; ++j) r[j] = rng.normal();
        r[4] += r.label * 3.0;
        train.records.push_back(r);
    }
    Dataset val = train;

    for (const auto kind : {ModelKind::DecisionTree, ModelKind::RandomForest, ModelKind::Mlp}) {
        const HyperparamSpace space = default_space(kind);
        REQUIRE_NOTHROW(space.validate());
        REQUIRE_NOTHROW(validate_space_names(space, kind));
        Rng pick(42);
        Candidate cand;
        for (const auto& d : space.domains) {
            cand.values.push_back(d.values[static_cast<std::size_t>(pick.below(d.values.size()))]);
        }
        // Cap costs for the heavy kinds so this stays fast.
        const int n_est_idx = space.index_of("n_estimators");
        if (n_est_idx >= 0) cand.values[static_cast<std::size_t>(n_est_idx)] = std::int64_t{5};
        const FitnessValue f = fitness_classifier(space, cand, train, val, kind, 0);
        REQUIRE(f.f1 >= 0.0);
        REQUIRE(f.f1 <= 1.0);
        const Model m = train_from_candidate(space, cand, kind, train, 0);
        REQUIRE(kind_of(m) == kind);
    }
}

TEST_CASE("fitness_classifier maps training failures to zero fitness") {
    HyperparamSpace space;
    space.domains.push_back({"hidden_layers", {std::int64_t{0}}});  // invalid: must be >= 1
    Candidate cand;
    cand.values.emplace_back(std::int64_t{0});
    Dataset train;
    train.scale = Scale::Standardized;
    for (int i = 0; i < 10; ++i) {
        FlowRecord r;
        r.label = i % 2;
        r[0] = static_cast<double>(i);
        train.records.push_back(r);
    }
    const FitnessValue f = fitness_classifier(space, cand, train, train, ModelKind::Mlp, 0);
    REQUIRE(f.f1 == 0.0);
    REQUIRE(f.accuracy == 0.0);
}

TEST_CASE("trace CSV round-trips the is_best flags") {
    const HyperparamSpace space = monotone_space();
    const SearchResult r = random_search(space, 12, monotone_fitness, 2);
    const auto path = std::string("/tmp/fg_trace_test.csv");
    write_trace_csv(r.trace, path);
    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    REQUIRE(line == "iteration,candidate_id,f1,accuracy,is_best");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty()) ++rows;
    }
    REQUIRE(rows == r.trace.size());
    std::remove(path.c_str());
}

TEST_CASE("candidate JSON encodes every value type") {
    HyperparamSpace space;
    space.domains.push_back({"none", {std::monostate{}}});
    space.domains.push_back({"flag", {true}});
    space.domains.push_back({"count", {std::int64_t{7}}});
    space.domains.push_back({"rate", {0.25}});
    space.domains.push_back({"mode", {std::string("best")}});
    Candidate cand;
    for (const auto& d : space.domains) cand.values.push_back(d.values[0]);
    const nlohmann::json j = candidate_to_json(space, cand);
    REQUIRE(j.at("none").is_null());
    REQUIRE(j.at("flag").get<bool>() == true);
    REQUIRE(j.at("count").get<std::int64_t>() == 7);
    REQUIRE(j.at("rate").get<double>() == 0.25);
    REQUIRE(j.at("mode").get<std::string>() == "best");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        REQUIRE(param_value_from_json(j.at(key)).index() ==
                cand.values[static_cast<std::size_t>(space.index_of(key))].index());
    }
}
