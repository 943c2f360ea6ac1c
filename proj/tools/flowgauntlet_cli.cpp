// flowgauntlet batch CLI.
//
// Every subcommand reads an optional JSON config, derives its inputs from a
// prepared data directory, writes its artifacts plus a manifest.json into the
// output directory, and prints the produced artifact paths (one per line) to
// stdout.  Diagnostics go to stderr.  Exit codes: 0 success, 1 configuration
// or usage error, 2 data error, 3 anything else.

#include <CLI11.hpp>

#include <flowgauntlet/flowgauntlet.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Shared per-invocation context.
// ---------------------------------------------------------------------------

struct Ctx {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 0;
    fg::RunConfig cfg;

    void add_common(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run configuration");
        cmd->add_option("--out", out_dir, "output directory (default: out)");
        cmd->add_option("--seed", seed, "override the run seed")->each([this](const std::string&) {
            seed_set = true;
        });
        cmd->add_option("--jobs", jobs, "worker threads (default: hardware concurrency)");
    }

    void finalize() {
        if (!config_path.empty()) {
            cfg = fg::load_run_config(config_path);
        }
        if (seed_set) cfg.seed = seed;
        if (jobs <= 0) {
            const unsigned hc = std::thread::hardware_concurrency();
            jobs = hc == 0 ? 1 : static_cast<int>(hc);
        }
    }

    std::string out_path(const std::string& name) const {
        return (fs::path(out_dir) / name).string();
    }

    // Where prepared splits live: data.dir when configured, else the output
    // directory (so `prepare --out D` then `train --out D` compose).
    std::string data_dir() const {
        const json& d = cfg.section_or_empty("data");
        if (d.contains("dir")) return cfg.resolve(d.at("dir").get<std::string>());
        return out_dir;
    }
};

void ensure_out_dir(const Ctx& ctx) { fs::create_directories(ctx.out_dir); }

void emit_paths(const std::vector<std::string>& paths) {
    for (const auto& p : paths) std::cout << p << "\n";
}

void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw fg::IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
    if (!out) throw fg::IoError("failed writing '" + path + "'");
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw fg::IoError("cannot open '" + path + "' for reading");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw fg::DataError("'" + path + "' is not valid JSON: " + std::string(e.what()));
    }
    return j;
}

// ---------------------------------------------------------------------------
// Prepared-split IO.
// ---------------------------------------------------------------------------

struct Prepared {
    fg::Dataset train;        // original scale, as written by `prepare`
    fg::Dataset validation;   // may be empty
    fg::Dataset calibration;  // may be empty
    fg::Dataset test;
    fg::Scaler scaler;
};

Prepared load_prepared(const std::string& dir) {
    Prepared p;
    const auto at = [&](const char* name) { return (fs::path(dir) / name).string(); };
    if (!fs::exists(at("train.csv")) || !fs::exists(at("test.csv"))) {
        throw fg::DataError("prepared data not found in '" + dir +
                            "' (expected train.csv and test.csv; run `flowgauntlet prepare` first)");
    }
    p.train = fg::load_flow_csv(at("train.csv"));
    p.test = fg::load_flow_csv(at("test.csv"));
    if (fs::exists(at("validation.csv"))) p.validation = fg::load_flow_csv(at("validation.csv"));
    if (fs::exists(at("calibration.csv"))) p.calibration = fg::load_flow_csv(at("calibration.csv"));
    if (!fs::exists(at("scaler.json"))) {
        throw fg::DataError("scaler.json not found in '" + dir + "'");
    }
    p.scaler = fg::load_scaler(at("scaler.json"));
    return p;
}

fg::Dataset require_validation(const Prepared& p) {
    if (p.validation.empty()) {
        throw fg::DataError("this command needs a non-empty validation split "
                            "(set data.validation_fraction > 0 and re-run prepare)");
    }
    return p.validation;
}

// Feature subset: model.features from the config wins; otherwise a
// selected_features.json produced by `select-features` in the data directory.
std::vector<int> resolve_feature_indices(const Ctx& ctx) {
    const json& m = ctx.cfg.section_or_empty("model");
    if (m.contains("features")) return fg::feature_indices_from_config(ctx.cfg);
    const std::string path = (fs::path(ctx.data_dir()) / "selected_features.json").string();
    if (fs::exists(path)) {
        const json j = read_json_file(path);
        if (!j.contains("selected") || !j.at("selected").is_array()) {
            throw fg::DataError("'" + path + "' has no 'selected' array");
        }
        std::vector<std::string> names;
        for (const auto& v : j.at("selected")) names.push_back(v.get<std::string>());
        return fg::feature_indices_of(names);
    }
    return {};  // all features
}

std::string resolve_surrogate_path(const Ctx& ctx) {
    const json& a = ctx.cfg.section_or_empty("attack");
    if (a.contains("surrogate")) return ctx.cfg.resolve(a.at("surrogate").get<std::string>());
    const json& m = ctx.cfg.section_or_empty("model");
    if (m.contains("path")) return ctx.cfg.resolve(m.at("path").get<std::string>());
    return (fs::path(ctx.data_dir()) / "model.json").string();
}

// ---------------------------------------------------------------------------
// synth: generate a labelled synthetic flow CSV.
// ---------------------------------------------------------------------------

int cmd_synth(Ctx& ctx) {
    ctx.finalize();
    fg::SyntheticSpec spec = fg::synthetic_from_config(ctx.cfg);
    if (ctx.seed_set) spec.seed = ctx.seed;
    const fg::Dataset ds = fg::generate_synthetic_flows(spec);

    std::string csv_path;
    std::string manifest_dir;
    if (ctx.out_dir.size() > 4 && ctx.out_dir.substr(ctx.out_dir.size() - 4) == ".csv") {
        csv_path = ctx.out_dir;
        manifest_dir = fs::path(ctx.out_dir).parent_path().string();
        if (manifest_dir.empty()) manifest_dir = ".";
        fs::create_directories(manifest_dir);
    } else {
        ensure_out_dir(ctx);
        csv_path = ctx.out_path("flows.csv");
        manifest_dir = ctx.out_dir;
    }
    fg::save_flow_csv(ds, csv_path);
    json extras;
    extras["rows"] = ds.size();
    extras["benign"] = ds.count_label(0);
    extras["malware"] = ds.count_label(1);
    const std::string manifest = fg::write_manifest(manifest_dir, "synth", ctx.cfg, {csv_path}, extras);
    emit_paths({csv_path, manifest});
    return 0;
}

// ---------------------------------------------------------------------------
// prepare: load (or synthesize), split, fit the scaler, persist the splits.
// ---------------------------------------------------------------------------

int cmd_prepare(Ctx& ctx) {
    ctx.finalize();
    const json& d = ctx.cfg.section_or_empty("data");

    fg::Dataset full;
    if (d.contains("csv")) {
        full = fg::load_flow_csv(ctx.cfg.resolve(d.at("csv").get<std::string>()));
    } else if (d.contains("synthetic")) {
        fg::SyntheticSpec spec = fg::synthetic_from_config(ctx.cfg);
        if (ctx.seed_set) spec.seed = ctx.seed;
        full = fg::generate_synthetic_flows(spec);
    } else {
        throw fg::ConfigError("config section 'data' needs either 'csv' or 'synthetic'");
    }

    fg::SplitSpec split_spec = fg::split_spec_from_config(ctx.cfg);
    if (ctx.seed_set) split_spec.seed = ctx.seed;
    const fg::SplitResult splits = fg::split(full, split_spec);
    const fg::Scaler scaler = fg::fit_scaler(splits.train);

    ensure_out_dir(ctx);
    std::vector<std::string> outputs;
    const auto save = [&](const fg::Dataset& ds, const char* name) {
        const std::string path = ctx.out_path(name);
        fg::save_flow_csv(ds, path);
        outputs.push_back(path);
    };
    save(splits.train, "train.csv");
    if (!splits.validation.empty()) save(splits.validation, "validation.csv");
    if (!splits.calibration.empty()) save(splits.calibration, "calibration.csv");
    save(splits.test, "test.csv");
    const std::string scaler_path = ctx.out_path("scaler.json");
    fg::save_scaler(scaler, scaler_path);
    outputs.push_back(scaler_path);

    json extras;
    extras["rows"] = full.size();
    extras["train_rows"] = splits.train.size();
    extras["validation_rows"] = splits.validation.size();
    extras["calibration_rows"] = splits.calibration.size();
    extras["test_rows"] = splits.test.size();
    outputs.push_back(fg::write_manifest(ctx.out_dir, "prepare", ctx.cfg, outputs, extras));
    emit_paths(outputs);
    return 0;
}

// ---------------------------------------------------------------------------
// select-features: information-gain report + threshold selection (+ optional
// threshold sweep against a random-forest probe).
// ---------------------------------------------------------------------------

int cmd_select_features(Ctx& ctx) {
    ctx.finalize();
    const Prepared p = load_prepared(ctx.data_dir());
    const json& f = ctx.cfg.section_or_empty("features");
    const int bins = fg::detail::number_or(f, "bins", 10);
    const double threshold = fg::detail::number_or(f, "threshold", 0.0);

    const fg::IgReport report = fg::compute_ig_report(p.train, bins);
    const std::vector<std::string> selected = fg::select_by_threshold(report, threshold);

    ensure_out_dir(ctx);
    std::vector<std::string> outputs;
    const std::string report_path = ctx.out_path("ig_report.csv");
    fg::write_ig_report_csv(report, report_path);
    outputs.push_back(report_path);

    json sel;
    sel["threshold"] = threshold;
    sel["bins"] = bins;
    sel["selected"] = selected;
    const std::string sel_path = ctx.out_path("selected_features.json");
    write_json_file(sel, sel_path);
    outputs.push_back(sel_path);

    if (f.contains("sweep_thresholds")) {
        std::vector<double> thresholds;
        for (const auto& v : f.at("sweep_thresholds")) thresholds.push_back(v.get<double>());
        const fg::RfParams rf = fg::rf_params_from_json(ctx.cfg.section_or_empty("model").contains("rf")
                                                            ? ctx.cfg.section("model").at("rf")
                                                            : json::object());
        const auto rows = fg::threshold_sweep(p.train, require_validation(p), thresholds, rf, bins);
        const std::string sweep_path = ctx.out_path("threshold_sweep.csv");
        fg::write_threshold_sweep_csv(rows, sweep_path);
        outputs.push_back(sweep_path);
    }

    json extras;
    extras["selected"] = selected;
    outputs.push_back(fg::write_manifest(ctx.out_dir, "select-features", ctx.cfg, outputs, extras));
    emit_paths(outputs);
    return 0;
}

// ---------------------------------------------------------------------------
// train: fit the configured model on the standardized train split.
// ---------------------------------------------------------------------------

int cmd_train(Ctx& ctx) {
    ctx.finalize();
    const Prepared p = load_prepared(ctx.data_dir());
    const fg::ModelKind kind = fg::model_kind_from_config(ctx.cfg);
    const std::vector<int> features = resolve_feature_indices(ctx);
    const std::uint64_t model_seed = ctx.seed_set ? ctx.seed : fg::model_seed_from_config(ctx.cfg);

    const fg::Dataset train_std = fg::transform(p.scaler, p.train);
    const fg::Dataset test_std = fg::transform(p.scaler, p.test);

    const json& m = ctx.cfg.section_or_empty("model");
    fg::Model model;
    switch (kind) {
        case fg::ModelKind::DecisionTree: {
            const fg::DtParams params = fg::dt_params_from_json(m.contains("dt") ? m.at("dt") : json::object());
            model = fg::DecisionTree::train(train_std, params, model_seed, features);
            break;
        }
        case fg::ModelKind::RandomForest: {
            fg::RfParams params = fg::rf_params_from_json(m.contains("rf") ? m.at("rf") : json::object());
            params.seed = model_seed;
            model = fg::RandomForest::train(train_std, params, features, ctx.jobs);
            break;
        }
        case fg::ModelKind::Mlp: {
            fg::MlpParams params = fg::mlp_params_from_json(m.contains("mlp") ? m.at("mlp") : json::object());
            params.seed = model_seed;
            model = fg::Mlp::train(train_std, params, features);
            break;
        }
    }

    ensure_out_dir(ctx);
    const std::string model_path = ctx.out_path("model.json");
    fg::save_model(model, model_path);
    const fg::Metrics test_metrics = fg::compute_metrics(fg::predict_labels(model, test_std), test_std.labels());
    json metrics;
    metrics["test"] = fg::metrics_to_json(test_metrics);
    const std::string metrics_path = ctx.out_path("metrics.json");
    write_json_file(metrics, metrics_path);

    json extras;
    extras["model_kind"] = fg::model_kind_name(kind);
    extras["test_f1"] = test_metrics.f1;
    const std::string manifest =
        fg::write_manifest(ctx.out_dir, "train", ctx.cfg, {model_path, metrics_path}, extras);
    emit_paths({model_path, metrics_path, manifest});
    return 0;
}

// ---------------------------------------------------------------------------
// tune rs|ga|pso: hyperparameter search on train/validation, then refit the
// best candidate on the train split.
// ---------------------------------------------------------------------------

int cmd_tune(Ctx& ctx, const std::string& strategy) {
    ctx.finalize();
    const json& t = ctx.cfg.section("tuner");  // throws a ConfigError naming 'tuner' when absent
    const Prepared p = load_prepared(ctx.data_dir());
    const fg::ModelKind kind = fg::model_kind_from_config(ctx.cfg);
    const std::vector<int> features = resolve_feature_indices(ctx);
    const std::uint64_t model_seed = fg::model_seed_from_config(ctx.cfg);
    const std::uint64_t search_seed =
        t.contains("seed") ? t.at("seed").get<std::uint64_t>() : ctx.cfg.seed;

    const fg::Dataset train_std = fg::transform(p.scaler, p.train);
    const fg::Dataset val_std = fg::transform(p.scaler, require_validation(p));
    const fg::Dataset test_std = fg::transform(p.scaler, p.test);

    const fg::HyperparamSpace space =
        t.contains("space") ? fg::space_from_json(t.at("space")) : fg::default_space(kind);
    fg::validate_space_names(space, kind);

    const auto fitness = [&](const fg::Candidate& cand) {
        return fg::fitness_classifier(space, cand, train_std, val_std, kind, model_seed, features,
                                      ctx.jobs);
    };

    fg::SearchResult result;
    if (strategy == "rs") {
        const int budget = fg::detail::number_or(t, "budget", 20);
        result = fg::random_search(space, budget, fitness, search_seed);
    } else if (strategy == "ga") {
        const int population = fg::detail::number_or(t, "population", 20);
        const int generations = fg::detail::number_or(t, "generations", 10);
        const int tournament = fg::detail::number_or(t, "tournament", 5);
        const double mutation = fg::detail::number_or(t, "mutation_prob", 0.2);
        result = fg::ga_optimize(space, population, generations, tournament, mutation, fitness,
                                 search_seed);
    } else {
        const int particles = fg::detail::number_or(t, "particles", 20);
        const int iterations = fg::detail::number_or(t, "iterations", 15);
        const double w = fg::detail::number_or(t, "inertia", 0.9);
        const double c1 = fg::detail::number_or(t, "c1", 1.5);
        const double c2 = fg::detail::number_or(t, "c2", 2.0);
        result = fg::pso_optimize(space, particles, iterations, w, c1, c2, fitness, search_seed);
    }

    const fg::Model model =
        fg::train_from_candidate(space, result.best, kind, train_std, model_seed, features, ctx.jobs);
    const fg::Metrics test_metrics = fg::compute_metrics(fg::predict_labels(model, test_std), test_std.labels());

    ensure_out_dir(ctx);
    std::vector<std::string> outputs;
    json best;
    best["strategy"] = strategy;
    best["model_kind"] = fg::model_kind_name(kind);
    best["params"] = json::object();
    for (std::size_t i = 0; i < space.domains.size(); ++i) {
        best["params"][space.domains[i].name] = fg::param_value_to_json(result.best.values[i]);
    }
    if (result.best.fitness) {
        best["validation_f1"] = result.best.fitness->f1;
        best["validation_accuracy"] = result.best.fitness->accuracy;
    }
    best["test_f1"] = test_metrics.f1;
    const std::string best_path = ctx.out_path("best_params.json");
    write_json_file(best, best_path);
    outputs.push_back(best_path);

    const std::string trace_path = ctx.out_path("trace.csv");
    fg::write_trace_csv(result.trace, trace_path);
    outputs.push_back(trace_path);

    const std::string model_path = ctx.out_path("model.json");
    fg::save_model(model, model_path);
    outputs.push_back(model_path);

    json metrics;
    metrics["test"] = fg::metrics_to_json(test_metrics);
    const std::string metrics_path = ctx.out_path("metrics.json");
    write_json_file(metrics, metrics_path);
    outputs.push_back(metrics_path);

    json extras;
    extras["strategy"] = strategy;
    extras["evaluations"] = result.trace.size();
    outputs.push_back(fg::write_manifest(ctx.out_dir, "tune-" + strategy, ctx.cfg, outputs, extras));
    emit_paths(outputs);
    return 0;
}

// ---------------------------------------------------------------------------
// attack cw|gan and campaign: craft per-feature adversarial flows against a
// surrogate; campaign additionally evaluates transfer targets and renders the
// report (campaign.csv + one SVG per feature).
// ---------------------------------------------------------------------------

fg::Dataset load_attack_source(const Ctx& ctx, const Prepared& p) {
    const json& a = ctx.cfg.section_or_empty("attack");
    if (a.contains("source")) {
        return fg::load_flow_csv(ctx.cfg.resolve(a.at("source").get<std::string>()));
    }
    return p.test;
}

std::vector<fg::TargetModel> load_targets(const Ctx& ctx) {
    std::vector<fg::TargetModel> targets;
    const json& a = ctx.cfg.section_or_empty("attack");
    if (!a.contains("targets")) return targets;
    for (const auto& t : a.at("targets")) {
        fg::TargetModel tm;
        tm.name = t.at("name").get<std::string>();
        tm.model = fg::load_model(ctx.cfg.resolve(t.at("path").get<std::string>()));
        targets.push_back(std::move(tm));
    }
    return targets;
}

int run_campaign(Ctx& ctx, fg::AttackKind kind, bool with_report) {
    ctx.finalize();
    const Prepared p = load_prepared(ctx.data_dir());
    const fg::Model surrogate = fg::load_model(resolve_surrogate_path(ctx));
    const std::vector<fg::TargetModel> targets = with_report ? load_targets(ctx) : std::vector<fg::TargetModel>{};

    fg::CampaignConfig cfg = fg::campaign_config_from_config(ctx.cfg, kind);
    if (ctx.seed_set) cfg.seed = ctx.seed;

    const fg::Dataset source_std = fg::transform(p.scaler, load_attack_source(ctx, p));
    const fg::CampaignReport report =
        fg::run_attack_campaign(cfg, source_std, p.train, p.scaler, surrogate, targets);

    ensure_out_dir(ctx);
    std::vector<std::string> outputs;
    if (with_report) {
        const auto emitted = fg::emit_report(report, ctx.out_dir);
        outputs.insert(outputs.end(), emitted.begin(), emitted.end());
    }

    // One CSV of crafted flows per successful (feature, checkpoint) cell.
    for (const auto& cell : report.cells) {
        if (cell.failed || cell.n_samples == 0) continue;
        const fg::AdversarialBatch batch = fg::make_adversarial_batch(
            report.originals, cell.perturbed, cell.feature, cell.checkpoint, p.scaler, surrogate);
        const std::string path = ctx.out_path("adversarial_" + cell.feature + "_" +
                                              std::to_string(cell.checkpoint) + ".csv");
        fg::save_adversarial_csv(batch, p.scaler, fg::attack_kind_name(kind), path);
        outputs.push_back(path);
    }

    json extras;
    extras["attack_kind"] = fg::attack_kind_name(kind);
    extras["base_samples"] = report.originals.rows();
    const std::string command = with_report ? "campaign" : std::string("attack-") + fg::attack_kind_name(kind);
    outputs.push_back(fg::write_manifest(ctx.out_dir, command, ctx.cfg, outputs, extras));
    emit_paths(outputs);
    return 0;
}

fg::AttackKind attack_kind_from_ctx(const Ctx& ctx) {
    const json& a = ctx.cfg.section_or_empty("attack");
    if (!a.contains("kind")) return fg::AttackKind::Cw;
    return fg::attack_kind_from_name(a.at("kind").get<std::string>());
}

// ---------------------------------------------------------------------------
// retrain: augment the train split with crafted flows, re-tune, re-fit, and
// measure clean-test plus adversarial metrics.
// ---------------------------------------------------------------------------

int cmd_retrain(Ctx& ctx) {
    ctx.finalize();
    const Prepared p = load_prepared(ctx.data_dir());
    const fg::ModelKind kind = fg::model_kind_from_config(ctx.cfg);
    const json& a = ctx.cfg.section("attack");
    if (!a.contains("adversarial_csvs")) {
        throw fg::ConfigError("config key 'attack.adversarial_csvs' is required for retrain");
    }

    std::vector<Eigen::MatrixXd> parts;
    for (const auto& v : a.at("adversarial_csvs")) {
        const fg::Dataset adv = fg::load_adversarial_csv(ctx.cfg.resolve(v.get<std::string>()));
        parts.push_back(fg::to_matrix(fg::transform(p.scaler, adv)));
    }
    const Eigen::MatrixXd adversarial_std = fg::detail::vstack(parts);

    const fg::Dataset train_std = fg::transform(p.scaler, p.train);
    const fg::Dataset val_std = fg::transform(p.scaler, require_validation(p));
    const fg::Dataset test_std = fg::transform(p.scaler, p.test);

    const json& t = ctx.cfg.section_or_empty("tuner");
    fg::RetrainSettings settings;
    if (t.contains("space")) settings.space = fg::space_from_json(t.at("space"));
    settings.population = fg::detail::number_or(t, "population", settings.population);
    settings.generations = fg::detail::number_or(t, "generations", settings.generations);
    settings.tournament = fg::detail::number_or(t, "tournament", settings.tournament);
    settings.mutation_prob = fg::detail::number_or(t, "mutation_prob", settings.mutation_prob);
    settings.ga_seed = t.contains("seed") ? t.at("seed").get<std::uint64_t>() : ctx.cfg.seed;
    settings.model_seed = fg::model_seed_from_config(ctx.cfg);

    const fg::RetrainResult result =
        fg::adversarial_retrain(train_std, val_std, test_std, adversarial_std, kind, settings);

    ensure_out_dir(ctx);
    std::vector<std::string> outputs;
    const std::string model_path = ctx.out_path("model.json");
    fg::save_model(result.model, model_path);
    outputs.push_back(model_path);

    json metrics;
    metrics["clean_test"] = fg::metrics_to_json(result.clean_test);
    metrics["adversarial"] = fg::metrics_to_json(result.adversarial);
    const std::string metrics_path = ctx.out_path("metrics.json");
    write_json_file(metrics, metrics_path);
    outputs.push_back(metrics_path);

    const std::string trace_path = ctx.out_path("trace.csv");
    fg::write_trace_csv(result.trace, trace_path);
    outputs.push_back(trace_path);

    json extras;
    extras["adversarial_rows"] = adversarial_std.rows();
    extras["clean_test_f1"] = result.clean_test.f1;
    extras["adversarial_recall"] = result.adversarial.recall;
    outputs.push_back(fg::write_manifest(ctx.out_dir, "retrain", ctx.cfg, outputs, extras));
    emit_paths(outputs);
    return 0;
}

// ---------------------------------------------------------------------------
// conformal calibrate|sweep|apply.
// ---------------------------------------------------------------------------

fg::Model load_conformal_model(const Ctx& ctx) {
    const json& c = ctx.cfg.section_or_empty("conformal");
    if (c.contains("model")) return fg::load_model(ctx.cfg.resolve(c.at("model").get<std::string>()));
    return fg::load_model((fs::path(ctx.data_dir()) / "model.json").string());
}

std::vector<double> probs_of(const fg::Model& model, const fg::Dataset& std_ds) {
    const Eigen::VectorXd p = fg::predict_proba(model, fg::to_matrix(std_ds));
    return std::vector<double>(p.data(), p.data() + p.size());
}

fg::Dataset require_calibration(const Prepared& p) {
    if (p.calibration.empty()) {
        throw fg::DataError("this command needs a non-empty calibration split "
                            "(set data.calibration_fraction > 0 and re-run prepare)");
    }
    return p.calibration;
}

int cmd_conformal_calibrate(Ctx& ctx) {
    ctx.finalize();
    const Prepared p = load_prepared(ctx.data_dir());
    const fg::Model model = load_conformal_model(ctx);
    const json& c = ctx.cfg.section_or_empty("conformal");
    const double alpha = fg::detail::number_or(c, "alpha", 0.1);

    const fg::Dataset calib_std = fg::transform(p.scaler, require_calibration(p));
    const fg::ConformalCalibration cal =
        fg::calibrate_conformal(probs_of(model, calib_std), calib_std.labels(), alpha);

    ensure_out_dir(ctx);
    json j;
    j["alpha"] = cal.alpha;
    j["q_hat"] = cal.q_hat;
    j["n_calibration"] = cal.scores.size();
    const std::string cal_path = ctx.out_path("calibration.json");
    write_json_file(j, cal_path);

    json extras;
    extras["alpha"] = cal.alpha;
    extras["q_hat"] = cal.q_hat;
    const std::string manifest = fg::write_manifest(ctx.out_dir, "conformal-calibrate", ctx.cfg,
                                                    {cal_path}, extras);
    emit_paths({cal_path, manifest});
    return 0;
}

int cmd_conformal_sweep(Ctx& ctx) {
    ctx.finalize();
    const Prepared p = load_prepared(ctx.data_dir());
    const fg::Model model = load_conformal_model(ctx);
    const json& c = ctx.cfg.section_or_empty("conformal");
    const double alpha_lo = fg::detail::number_or(c, "alpha_lo", 0.01);
    const double alpha_hi = fg::detail::number_or(c, "alpha_hi", 0.5);
    const int n_points = fg::detail::number_or(c, "n_points", 50);

    const fg::Dataset calib_std = fg::transform(p.scaler, require_calibration(p));
    const fg::Dataset test_std = fg::transform(p.scaler, p.test);
    const std::vector<double> eval_probs = probs_of(model, test_std);
    std::vector<int> eval_preds(eval_probs.size());
    for (std::size_t i = 0; i < eval_probs.size(); ++i) eval_preds[i] = eval_probs[i] > 0.5 ? 1 : 0;

    const fg::AlphaSweepResult result =
        fg::alpha_sweep(probs_of(model, calib_std), calib_std.labels(), eval_probs, eval_preds,
                        test_std.labels(), alpha_lo, alpha_hi, n_points);

    ensure_out_dir(ctx);
    const std::string sweep_path = ctx.out_path("alpha_sweep.csv");
    fg::write_alpha_sweep_csv(result.rows, sweep_path);

    const fg::AlphaSweepRow& best_row = result.rows.at(result.best_index);
    json best;
    best["alpha"] = best_row.alpha;
    best["q_hat"] = best_row.q_hat;
    best["ca_pct"] = best_row.ca_pct;
    best["cr_pct"] = best_row.cr_pct;
    best["harmonic_mean"] = best_row.harmonic_mean;
    const std::string best_path = ctx.out_path("best_alpha.json");
    write_json_file(best, best_path);

    json extras;
    extras["best_alpha"] = best_row.alpha;
    extras["best_harmonic"] = best_row.harmonic_mean;
    const std::string manifest = fg::write_manifest(ctx.out_dir, "conformal-sweep", ctx.cfg,
                                                    {sweep_path, best_path}, extras);
    emit_paths({sweep_path, best_path, manifest});
    return 0;
}

int cmd_conformal_apply(Ctx& ctx) {
    ctx.finalize();
    const Prepared p = load_prepared(ctx.data_dir());
    const fg::Model model = load_conformal_model(ctx);
    const json& c = ctx.cfg.section_or_empty("conformal");

    double q_hat = 0.0;
    if (c.contains("q_hat")) {
        q_hat = c.at("q_hat").get<double>();
    } else {
        const std::string cal_path = c.contains("calibration")
                                         ? ctx.cfg.resolve(c.at("calibration").get<std::string>())
                                         : ctx.out_path("calibration.json");
        const json cal = read_json_file(cal_path);
        if (!cal.contains("q_hat")) throw fg::DataError("'" + cal_path + "' has no 'q_hat'");
        q_hat = cal.at("q_hat").get<double>();
    }

    fg::Dataset source = p.test;
    if (c.contains("source")) {
        source = fg::load_flow_csv(ctx.cfg.resolve(c.at("source").get<std::string>()));
    }
    const fg::Dataset source_std = fg::transform(p.scaler, source);
    const auto verdicts = fg::conformal_verdicts(probs_of(model, source_std), q_hat);

    ensure_out_dir(ctx);
    const std::string verdict_path = ctx.out_path("verdicts.csv");
    fg::write_verdict_csv(verdicts, verdict_path);

    std::size_t accepted = 0;
    for (const auto& v : verdicts) {
        if (fg::is_accept(v.verdict)) ++accepted;
    }
    json extras;
    extras["q_hat"] = q_hat;
    extras["rows"] = verdicts.size();
    extras["accepted"] = accepted;
    const std::string manifest =
        fg::write_manifest(ctx.out_dir, "conformal-apply", ctx.cfg, {verdict_path}, extras);
    emit_paths({verdict_path, manifest});
    return 0;
}

// ---------------------------------------------------------------------------
// report: re-render the per-feature SVGs from an existing campaign.csv.
// ---------------------------------------------------------------------------

int cmd_report(Ctx& ctx) {
    ctx.finalize();
    const json& r = ctx.cfg.section_or_empty("report");
    const std::string csv_path = r.contains("campaign_csv")
                                     ? ctx.cfg.resolve(r.at("campaign_csv").get<std::string>())
                                     : ctx.out_path("campaign.csv");
    const fg::CampaignReport report = fg::load_campaign_csv(csv_path);

    ensure_out_dir(ctx);
    std::vector<std::string> outputs;
    std::vector<std::string> seen;
    for (const auto& cell : report.cells) {
        if (std::find(seen.begin(), seen.end(), cell.feature) != seen.end()) continue;
        seen.push_back(cell.feature);
        const std::string svg = fg::render_feature_svg(report, cell.feature);
        const std::string path = ctx.out_path("attack_" + cell.feature + ".svg");
        std::ofstream out(path);
        if (!out) throw fg::IoError("cannot open '" + path + "' for writing");
        out << svg;
        outputs.push_back(path);
    }

    json extras;
    extras["campaign_csv"] = fs::path(csv_path).filename().string();
    outputs.push_back(fg::write_manifest(ctx.out_dir, "report", ctx.cfg, outputs, extras));
    emit_paths(outputs);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flowgauntlet: botnet-detection robustness pipeline"};
    app.require_subcommand(1);

    Ctx ctx;
    int rc = 0;
    const auto bind = [&](CLI::App* cmd, auto handler) {
        ctx.add_common(cmd);
        cmd->callback([&ctx, handler, &rc]() { rc = handler(ctx); });
    };

    bind(app.add_subcommand("synth", "generate a labelled synthetic flow CSV"), cmd_synth);
    bind(app.add_subcommand("prepare", "split a flow CSV and fit the feature scaler"), cmd_prepare);
    bind(app.add_subcommand("select-features", "rank features by information gain"),
         cmd_select_features);
    bind(app.add_subcommand("train", "train the configured classifier"), cmd_train);

    CLI::App* tune = app.add_subcommand("tune", "hyperparameter search");
    tune->require_subcommand(1);
    bind(tune->add_subcommand("rs", "random search"),
         [](Ctx& c) { return cmd_tune(c, "rs"); });
    bind(tune->add_subcommand("ga", "genetic algorithm"),
         [](Ctx& c) { return cmd_tune(c, "ga"); });
    bind(tune->add_subcommand("pso", "particle swarm optimisation"),
         [](Ctx& c) { return cmd_tune(c, "pso"); });

    CLI::App* attack = app.add_subcommand("attack", "craft adversarial flows against a surrogate");
    attack->require_subcommand(1);
    bind(attack->add_subcommand("cw", "gradient-descent attack with confidence margin"),
         [](Ctx& c) { return run_campaign(c, fg::AttackKind::Cw, /*with_report=*/false); });
    bind(attack->add_subcommand("gan", "generative attack trained against the surrogate"),
         [](Ctx& c) { return run_campaign(c, fg::AttackKind::Gan, /*with_report=*/false); });

    bind(app.add_subcommand("retrain", "adversarially retrain on crafted flows"), cmd_retrain);

    CLI::App* conformal = app.add_subcommand("conformal", "accept/reject gate calibration");
    conformal->require_subcommand(1);
    bind(conformal->add_subcommand("calibrate", "compute the score threshold for a miscoverage level"),
         cmd_conformal_calibrate);
    bind(conformal->add_subcommand("sweep", "scan miscoverage levels and report the best gate"),
         cmd_conformal_sweep);
    bind(conformal->add_subcommand("apply", "emit per-flow accept/reject verdicts"),
         cmd_conformal_apply);

    bind(app.add_subcommand("campaign", "full attack campaign with transfer report and plots"),
         [](Ctx& c) { return run_campaign(c, attack_kind_from_ctx(c), /*with_report=*/true); });
    bind(app.add_subcommand("report", "re-render plots from an existing campaign.csv"), cmd_report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const fg::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const fg::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return rc;
}
