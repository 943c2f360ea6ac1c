#include <catch2/catch_amalgamated.hpp>

#include <flowgauntlet/config.hpp>

#include <filesystem>
#include <fstream>
#include <string>

using namespace fg;
using nlohmann::json;

namespace {

std::string write_temp_config(const std::string& name, const json& body) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << body.dump(2);
    out.close();
    return path.string();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config loading validates structure and records a content hash") {
    const json body = {{"seed", 7}, {"data", {{"train_fraction", 0.8}, {"test_fraction", 0.2}}}};
    const std::string path = write_temp_config("fg_cfg_ok.json", body);
    const RunConfig cfg = load_run_config(path);
    REQUIRE(cfg.loaded);
    REQUIRE(cfg.seed == 7);
    REQUIRE(cfg.has("data"));
    REQUIRE_FALSE(cfg.has("model"));
    REQUIRE(cfg.config_hash.size() == 16);

    // Identical bytes hash identically; different bytes differ.
    const std::string path2 = write_temp_config("fg_cfg_ok2.json", body);
    REQUIRE(load_run_config(path2).config_hash == cfg.config_hash);
    const std::string path3 = write_temp_config("fg_cfg_ok3.json", json{{"seed", 8}});
    REQUIRE(load_run_config(path3).config_hash != cfg.config_hash);

    std::filesystem::remove(path);
    std::filesystem::remove(path2);
    std::filesystem::remove(path3);
}

TEST_CASE("unknown keys are named by their full path") {
    SECTION("top level") {
        REQUIRE_THROWS_WITH(validate_run_config(json{{"bogus", 1}}),
                            Catch::Matchers::ContainsSubstring("unknown config key 'config.bogus'"));
    }
    SECTION("nested in data") {
        REQUIRE_THROWS_WITH(validate_run_config(json{{"data", {{"csvv", "x"}}}}),
                            Catch::Matchers::ContainsSubstring("unknown config key 'data.csvv'"));
    }
    SECTION("nested in model.dt") {
        REQUIRE_THROWS_WITH(
            validate_run_config(json{{"model", {{"dt", {{"depth", 3}}}}}}),
            Catch::Matchers::ContainsSubstring("unknown config key 'model.dt.depth'"));
    }
    SECTION("nested in attack.cw") {
        REQUIRE_THROWS_WITH(
            validate_run_config(json{{"attack", {{"cw", {{"lr", 0.1}}}}}}),
            Catch::Matchers::ContainsSubstring("unknown config key 'attack.cw.lr'"));
    }
    SECTION("synthetic cluster") {
        REQUIRE_THROWS_WITH(
            validate_run_config(
                json{{"data", {{"synthetic", {{"benign", {{"mean", 1.0}}}}}}}}),
            Catch::Matchers::ContainsSubstring("unknown config key 'data.synthetic.benign.mean'"));
    }
    SECTION("attack target entries") {
        REQUIRE_THROWS_WITH(
            validate_run_config(json{{"attack", {{"targets", json::array({{{"nam", "x"}}})}}}}),
            Catch::Matchers::ContainsSubstring("unknown config key 'attack.targets[0].nam'"));
    }
}

TEST_CASE("missing sections raise the command-oriented error") {
    RunConfig cfg;
    REQUIRE_THROWS_WITH(cfg.section("tuner"),
                        Catch::Matchers::ContainsSubstring(
                            "config section 'tuner' is required for this command"));
    REQUIRE(cfg.section_or_empty("tuner").is_object());
    REQUIRE(cfg.section_or_empty("tuner").empty());
}

TEST_CASE("relative paths resolve against the config directory") {
    RunConfig cfg;
    cfg.base_dir = "/somewhere/deep";
    REQUIRE(cfg.resolve("data.csv") == "/somewhere/deep/data.csv");
    REQUIRE(cfg.resolve("/abs/data.csv") == "/abs/data.csv");
    REQUIRE(cfg.resolve("../up.csv") == "/somewhere/up.csv");
}

TEST_CASE("model parameter builders honor defaults and overrides") {
    SECTION("empty objects mean defaults") {
        const DtParams dt = dt_params_from_json(json::object());
        REQUIRE(dt.criterion == Criterion::Gini);
        REQUIRE_FALSE(dt.max_depth.has_value());
        const RfParams rf = rf_params_from_json(json::object());
        REQUIRE(rf.n_estimators == 100);
        REQUIRE(rf.bootstrap);
        const MlpParams mlp = mlp_params_from_json(json::object());
        REQUIRE(mlp.hidden_layers == 2);
        REQUIRE(mlp.epochs == 50);
        REQUIRE(mlp.batch_size == 120);
    }
    SECTION("overrides land in the right fields") {
        const DtParams dt =
            dt_params_from_json(json{{"criterion", "entropy"}, {"max_depth", 5}});
        REQUIRE(dt.criterion == Criterion::Entropy);
        REQUIRE(dt.max_depth == 5);
        const RfParams rf = rf_params_from_json(json{{"n_estimators", 3}, {"max_depth", 2}});
        REQUIRE(rf.n_estimators == 3);
        REQUIRE(rf.tree.max_depth == 2);
        const MlpParams mlp =
            mlp_params_from_json(json{{"activation", "tanh"}, {"learning_rate", 0.01}});
        REQUIRE(mlp.activation == Activation::Tanh);
        REQUIRE(mlp.learning_rate == 0.01);
    }
}

TEST_CASE("hyperparameter spaces come straight from JSON") {
    const json obj = {{"max_depth", json::array({2, 4, 8})},
                      {"criterion", json::array({"gini", "entropy"})}};
    const HyperparamSpace space = space_from_json(obj);
    REQUIRE(space.domains.size() == 2);
    const std::size_t depth_at = space.index_of("max_depth");
    REQUIRE(space.domains[depth_at].values.size() == 3);
    REQUIRE(space.n_hp() == 2);
    REQUIRE_THROWS_AS(space_from_json(json{{"max_depth", 3}}), ConfigError);
}

TEST_CASE("synthetic spec maps cluster fields from config") {
    RunConfig cfg;
    cfg.seed = 99;
    cfg.raw = {{"data",
                {{"synthetic",
                  {{"n_benign", 10},
                   {"n_malware", 20},
                   {"benign", {{"dur_mean", 4.5}, {"src_bytes_sd", 123.0}}}}}}}};
    const SyntheticSpec spec = synthetic_from_config(cfg);
    REQUIRE(spec.n_benign == 10);
    REQUIRE(spec.n_malware == 20);
    REQUIRE(spec.seed == 99);  // falls back to the run seed
    REQUIRE(spec.benign.dur_mean == 4.5);
    REQUIRE(spec.benign.src_bytes_sd == 123.0);
    REQUIRE(spec.malware.dur_mean == 1.0);  // untouched default
}

TEST_CASE("split spec maps the fraction keys onto the train share") {
    RunConfig cfg;
    cfg.seed = 5;
    cfg.raw = {{"data",
                {{"train_fraction", 0.6},
                 {"test_fraction", 0.4},
                 {"validation_fraction", 0.2},
                 {"calibration_fraction", 0.25}}}};
    const SplitSpec spec = split_spec_from_config(cfg);
    REQUIRE(spec.train_fraction == 0.6);
    REQUIRE(spec.test_fraction == 0.4);
    REQUIRE(spec.validation_fraction_of_train == 0.2);
    REQUIRE(spec.calibration_fraction_of_train == 0.25);
    REQUIRE(spec.seed == 5);
}

TEST_CASE("feature indices from config are sorted and deduplicated") {
    RunConfig cfg;
    cfg.raw = {{"model", {{"features", json::array({"Dur", "SrcWin", "Dur"})}}}};
    const std::vector<int> idx = feature_indices_from_config(cfg);
    REQUIRE(idx == std::vector<int>{feature_index("SrcWin"), feature_index("Dur")});
    cfg.raw = {{"model", {{"features", "Dur"}}}};
    REQUIRE_THROWS_AS(feature_indices_from_config(cfg), ConfigError);
    cfg.raw = json::object();
    REQUIRE(feature_indices_from_config(cfg).empty());
}

TEST_CASE("model kind and seed resolution") {
    RunConfig cfg;
    cfg.seed = 42;
    cfg.raw = {{"model", {{"kind", "rf"}}}};
    REQUIRE(model_kind_from_config(cfg) == ModelKind::RandomForest);
    REQUIRE(model_seed_from_config(cfg) == 42);
    cfg.raw = {{"model", {{"kind", "mlp"}, {"seed", 9}}}};
    REQUIRE(model_kind_from_config(cfg) == ModelKind::Mlp);
    REQUIRE(model_seed_from_config(cfg) == 9);
    cfg.raw = {{"model", json::object()}};
    REQUIRE_THROWS_AS(model_kind_from_config(cfg), ConfigError);
    cfg.raw = json::object();
    REQUIRE_THROWS_AS(model_kind_from_config(cfg), ConfigError);
}

TEST_CASE("campaign config defaults depend on the attack kind") {
    RunConfig cfg;
    cfg.seed = 3;
    cfg.raw = {{"attack", json::object()}};
    const CampaignConfig cw = campaign_config_from_config(cfg, AttackKind::Cw);
    REQUIRE(cw.features.size() == static_cast<std::size_t>(kNumFeatures));
    REQUIRE(cw.checkpoints == std::vector<int>{5, 100, 750, 1000, 2000});
    REQUIRE(cw.seed == 3);
    const CampaignConfig gan = campaign_config_from_config(cfg, AttackKind::Gan);
    REQUIRE(gan.checkpoints == std::vector<int>{5, 10, 25, 50});

    cfg.raw = {{"attack",
                {{"features", json::array({"Dur"})},
                 {"checkpoints", json::array({2, 9})},
                 {"max_samples", 123},
                 {"transfer_on_surrogate_success_only", false},
                 {"cw", {{"c", 7.5}, {"iterations", 11}}}}}};
    const CampaignConfig custom = campaign_config_from_config(cfg, AttackKind::Cw);
    REQUIRE(custom.features == std::vector<std::string>{"Dur"});
    REQUIRE(custom.checkpoints == std::vector<int>{2, 9});
    REQUIRE(custom.max_samples == 123);
    REQUIRE_FALSE(custom.transfer_on_surrogate_success_only);
    REQUIRE(custom.cw.c == 7.5);
    REQUIRE(custom.cw.iterations == 11);
}

TEST_CASE("manifests are byte-stable with sorted outputs and no timestamps") {
    RunConfig cfg;
    cfg.seed = 4;
    cfg.config_hash = "abcdef0123456789";
    const std::string dir =
        (std::filesystem::temp_directory_path() / "fg_manifest_test").string();
    std::filesystem::remove_all(dir);

    const std::string path = write_manifest(dir, "train", cfg,
                                            {"/x/zeta.csv", "/x/alpha.csv"},
                                            json{{"note", 1}});
    const std::string first = read_file(path);
    const json parsed = json::parse(first);
    REQUIRE(parsed.at("tool") == "flowgauntlet");
    REQUIRE(parsed.at("version") == kVersion);
    REQUIRE(parsed.at("command") == "train");
    REQUIRE(parsed.at("config_hash") == "abcdef0123456789");
    REQUIRE(parsed.at("seed") == 4);
    REQUIRE(parsed.at("outputs") == json::array({"alpha.csv", "zeta.csv"}));
    REQUIRE(parsed.at("note") == 1);
    REQUIRE_FALSE(parsed.contains("timestamp"));

    const std::string again = write_manifest(dir, "train", cfg,
                                             {"/x/zeta.csv", "/x/alpha.csv"},
                                             json{{"note", 1}});
    REQUIRE(read_file(again) == first);
    std::filesystem::remove_all(dir);
}

TEST_CASE("metrics serialize all eight fields") {
    Metrics m;
    m.tp = 3;
    m.fp = 1;
    m.tn = 5;
    m.fn = 2;
    m.accuracy = 8.0 / 11.0;
    m.precision = 0.75;
    m.recall = 0.6;
    m.f1 = 2.0 * 0.75 * 0.6 / 1.35;
    const json j = metrics_to_json(m);
    REQUIRE(j.at("tp") == 3);
    REQUIRE(j.at("fp") == 1);
    REQUIRE(j.at("tn") == 5);
    REQUIRE(j.at("fn") == 2);
    REQUIRE(j.at("precision") == 0.75);
    REQUIRE(j.at("recall") == 0.6);
}

TEST_CASE("config file errors are ConfigError with the offending path") {
    REQUIRE_THROWS_AS(load_run_config("/nonexistent/cfg.json"), ConfigError);
    const auto path = std::filesystem::temp_directory_path() / "fg_cfg_bad.json";
    std::ofstream(path) << "{ not json";
    REQUIRE_THROWS_WITH(load_run_config(path.string()),
                        Catch::Matchers::ContainsSubstring("not valid JSON"));
    std::filesystem::remove(path);
}
