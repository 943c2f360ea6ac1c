#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "flowgauntlet/advcraft.hpp"
#include "flowgauntlet/core.hpp"
#include "flowgauntlet/flowdata.hpp"
#include "flowgauntlet/hyperopt.hpp"
#include "flowgauntlet/metrics.hpp"
#include "flowgauntlet/models/model.hpp"
#include "flowgauntlet/rng.hpp"

namespace fg {

// ---------------------------------------------------------------------------
// Synthetic flow generation: two Gaussian clusters over the free columns
// (SrcWin, sHops, SrcBytes, DstBytes, Dur), with the tied columns (sTtl,
// dTtl, TotBytes, Rate) derived so every record satisfies the semantic
// identities by construction.
// ---------------------------------------------------------------------------

struct ClassCluster {
    double src_win_mean = 0.0, src_win_sd = 1.0;
    double s_hops_mean = 0.0, s_hops_sd = 1.0;
    double src_bytes_mean = 0.0, src_bytes_sd = 1.0;
    double dst_bytes_mean = 0.0, dst_bytes_sd = 1.0;
    double dur_mean = 1.0, dur_sd = 0.1;
};

struct SyntheticSpec {
    std::size_t n_benign = 4000;
    std::size_t n_malware = 4000;
    ClassCluster benign{8192.0, 2048.0, 12.0, 3.0, 800.0, 300.0, 1200.0, 400.0, 8.0, 2.0};
    ClassCluster malware{4096.0, 2048.0, 18.0, 3.0, 5000.0, 600.0, 600.0, 400.0, 1.0, 0.5};
    double initial_ttl = 255.0;
    std::uint64_t seed = 42;
};

inline Dataset generate_synthetic_flows(const SyntheticSpec& spec) {
    if (spec.n_benign < 1 || spec.n_malware < 1) throw ConfigError("synthetic counts must be >= 1");
    Dataset ds;
    ds.scale = Scale::Original;
    ds.records.reserve(spec.n_benign + spec.n_malware);
    Rng value_rng(derive_seed(spec.seed, 0));
    auto emit = [&](const ClassCluster& c, int label, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            FlowRecord r;
            r.label = label;
            const double src_win = std::max(0.0, c.src_win_mean + c.src_win_sd * value_rng.normal());
            const double s_hops =
                std::clamp(c.s_hops_mean + c.s_hops_sd * value_rng.normal(), 0.0, spec.initial_ttl - 1.0);
            const double src_bytes = std::max(0.0, c.src_bytes_mean + c.src_bytes_sd * value_rng.normal());
            const double dst_bytes = std::max(0.0, c.dst_bytes_mean + c.dst_bytes_sd * value_rng.normal());
            const double dur = std::max(0.01, c.dur_mean + c.dur_sd * value_rng.normal());
            r[static_cast<int>(Feature::SrcWin)] = src_win;
            r[static_cast<int>(Feature::SHops)] = s_hops;
            r[static_cast<int>(Feature::STtl)] = spec.initial_ttl - s_hops;
            r[static_cast<int>(Feature::DTtl)] = spec.initial_ttl - s_hops;
            r[static_cast<int>(Feature::SrcBytes)] = src_bytes;
            r[static_cast<int>(Feature::DstBytes)] = dst_bytes;
            r[static_cast<int>(Feature::Dur)] = dur;
            r[static_cast<int>(Feature::TotBytes)] = src_bytes + dst_bytes;
            r[static_cast<int>(Feature::Rate)] = (src_bytes + dst_bytes) / dur;
            ds.records.push_back(r);
        }
    };
    emit(spec.benign, 0, spec.n_benign);
    emit(spec.malware, 1, spec.n_malware);
    Rng order_rng(derive_seed(spec.seed, 1));
    order_rng.shuffle(ds.records);
    return ds;
}

// ---------------------------------------------------------------------------
// Attack campaign: per attacked feature, craft adversarial batches at each
// checkpoint from the malware flows the surrogate actually detects, then
// measure distortion and evasion on the surrogate and every target model.
// ---------------------------------------------------------------------------

enum class AttackKind { Cw, Gan };

inline const char* attack_kind_name(AttackKind k) { return k == AttackKind::Cw ? "cw" : "gan"; }

inline AttackKind attack_kind_from_name(const std::string& name) {
    if (name == "cw") return AttackKind::Cw;
    if (name == "gan") return AttackKind::Gan;
    throw ConfigError("unknown attack kind '" + name + "' (expected cw or gan)");
}

struct TargetModel {
    std::string name;
    Model model;
};

struct CampaignConfig {
    std::vector<std::string> features;
    std::vector<int> checkpoints;  // C&W: iteration counts; GAN: generator epochs
    AttackKind kind = AttackKind::Cw;
    CwConfig cw;                   // clip bounds are filled per feature from train ranges
    GanConfig gan;
    int target_class = 0;          // craft toward "benign"
    bool transfer_on_surrogate_success_only = true;
    std::size_t max_samples = 0;   // 0 = every detected malware flow
    double initial_ttl = 255.0;
    double epsilon = 1e-9;
    std::uint64_t seed = 42;

    void validate() const {
        if (features.empty()) throw ConfigError("campaign needs at least one feature");
        if (checkpoints.empty()) throw ConfigError("campaign needs at least one checkpoint");
        for (std::size_t i = 0; i < checkpoints.size(); ++i) {
            if (checkpoints[i] < 1 || (i > 0 && checkpoints[i] <= checkpoints[i - 1])) {
                throw ConfigError("checkpoints must be strictly increasing positive counts");
            }
        }
        for (const auto& f : features) feature_index(f);  // throws UnknownFeature
    }
};

struct CampaignCell {
    std::string feature;
    int checkpoint = 0;
    double mean_l2 = 0.0;                 // original scale
    double surrogate_misclass = 0.0;      // fraction of crafted flows scored benign
    std::vector<double> target_misclass;  // parallel to CampaignReport::target_names
    std::size_t n_samples = 0;
    bool failed = false;
    std::string error;
    Eigen::MatrixXd perturbed;  // standardized, dependency-repaired
};

struct CampaignReport {
    std::vector<std::string> target_names;
    std::vector<CampaignCell> cells;  // feature-major, checkpoint-minor
    Eigen::MatrixXd originals;        // standardized attack base (shared by all cells)
    bool surrogate_success_only = true;
    AttackKind kind = AttackKind::Cw;
};

// Malware flows the surrogate classifies as malware, as a standardized
// matrix; `cap` (0 = unlimited) keeps campaigns affordable.
inline Eigen::MatrixXd surrogate_detected_malware(const Dataset& std_ds, const Model& surrogate,
                                                  std::size_t cap = 0) {
    if (std_ds.scale != Scale::Standardized) {
        throw ScaleMismatchError("attack base must be standardized");
    }
    const Dataset malware = std_ds.filter_label(1);
    if (malware.empty()) return Eigen::MatrixXd(0, kNumFeatures);
    const Eigen::MatrixXd x = to_matrix(malware);
    const Eigen::VectorXd p = predict_proba(surrogate, x);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p(i) > 0.5) keep.push_back(i);
        if (cap > 0 && keep.size() == cap) break;
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(keep.size()), kNumFeatures);
    for (std::size_t i = 0; i < keep.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(keep[i]);
    return out;
}

namespace detail {

// Fraction of rows the model scores as benign (p <= 0.5), restricted to
// `subset` when given.
inline double misclass_rate(const Model& model, const Eigen::MatrixXd& x,
                            const std::vector<Eigen::Index>* subset) {
    if (x.rows() == 0) return 0.0;
    const Eigen::VectorXd p = predict_proba(model, x);
    std::size_t total = 0, benign = 0;
    if (subset != nullptr) {
        for (Eigen::Index i : *subset) {
            ++total;
            if (!(p(i) > 0.5)) ++benign;
        }
    } else {
        total = static_cast<std::size_t>(p.size());
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            if (!(p(i) > 0.5)) ++benign;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(benign) / static_cast<double>(total);
}

inline Eigen::MatrixXd vstack(const std::vector<Eigen::MatrixXd>& parts) {
    Eigen::Index rows = 0;
    for (const auto& m : parts) rows += m.rows();
    Eigen::MatrixXd out(rows, kNumFeatures);
    Eigen::Index at = 0;
    for (const auto& m : parts) {
        out.middleRows(at, m.rows()) = m;
        at += m.rows();
    }
    return out;
}

}  // namespace detail

// Per-feature crafting for one campaign: returns one standardized matrix per
// checkpoint.  C&W snapshots one gradient-descent trajectory; the GAN is
// trained once to the last checkpoint with generator snapshots in between.
inline std::vector<Eigen::MatrixXd> craft_feature_series(const CampaignConfig& cfg,
                                                         const std::string& feature,
                                                         const Eigen::MatrixXd& base_std,
                                                         const Eigen::MatrixXd& benign_std,
                                                         const Scaler& scaler, const Model& surrogate,
                                                         double feat_min, double feat_max,
                                                         std::uint64_t feature_seed) {
    if (cfg.kind == AttackKind::Cw) {
        CwConfig cw = cfg.cw;
        cw.clip_min = feat_min;
        cw.clip_max = feat_max;
        const Eigen::Index chunk = std::max<Eigen::Index>(1, cw.batch_size);
        std::vector<std::vector<Eigen::MatrixXd>> per_checkpoint(cfg.checkpoints.size());
        Eigen::Index start = 0;
        std::uint64_t chunk_index = 0;
        while (start < base_std.rows()) {
            const Eigen::Index count = std::min(chunk, base_std.rows() - start);
            const Eigen::MatrixXd part = base_std.middleRows(start, count);
            const auto snaps = cw_batch_checkpoints(surrogate, scaler, part, cfg.target_class, feature, cw,
                                                    cfg.checkpoints, derive_seed(feature_seed, chunk_index),
                                                    cfg.initial_ttl, cfg.epsilon);
            for (std::size_t k = 0; k < snaps.size(); ++k) per_checkpoint[k].push_back(snaps[k]);
            start += count;
            ++chunk_index;
        }
        std::vector<Eigen::MatrixXd> out;
        out.reserve(per_checkpoint.size());
        for (auto& parts : per_checkpoint) out.push_back(detail::vstack(parts));
        return out;
    }

    GanConfig gan = cfg.gan;
    gan.epochs = cfg.checkpoints.back();
    gan.clip_min = scaler.transform_value(feature_index(feature), feat_min);
    gan.clip_max = scaler.transform_value(feature_index(feature), feat_max);
    const FeatureMask mask = FeatureMask::single(feature);
    std::vector<Generator> snapshots;
    train_evasion_gan(benign_std, base_std, surrogate, mask, gan, derive_seed(feature_seed, 0x6a11),
                      &cfg.checkpoints, &snapshots);
    std::vector<Eigen::MatrixXd> out;
    out.reserve(snapshots.size());
    for (std::size_t k = 0; k < snapshots.size(); ++k) {
        out.push_back(gan_generate_adversaries(snapshots[k], base_std, mask, scaler, feature, feat_min,
                                               feat_max, derive_seed(feature_seed, 0x9e00 + k),
                                               cfg.initial_ttl, cfg.epsilon));
    }
    return out;
}

// Runs the full campaign.  `attack_source_std` supplies the malware flows to
// perturb (and the benign flows the GAN critic sees); `train_original`
// supplies the per-feature valid ranges used as clip bounds.  A failing
// feature marks its cells failed without aborting the rest.
inline CampaignReport run_attack_campaign(const CampaignConfig& cfg, const Dataset& attack_source_std,
                                          const Dataset& train_original, const Scaler& scaler,
                                          const Model& surrogate, const std::vector<TargetModel>& targets) {
    cfg.validate();
    if (train_original.scale != Scale::Original) {
        throw ScaleMismatchError("train bounds must come from original-scale data");
    }
    CampaignReport report;
    report.kind = cfg.kind;
    report.surrogate_success_only = cfg.transfer_on_surrogate_success_only;
    for (const auto& t : targets) report.target_names.push_back(t.name);

    report.originals = surrogate_detected_malware(attack_source_std, surrogate, cfg.max_samples);
    const Dataset benign_ds = attack_source_std.filter_label(0);
    const Eigen::MatrixXd benign_std =
        benign_ds.empty() ? Eigen::MatrixXd(0, kNumFeatures) : to_matrix(benign_ds);

    for (std::size_t fi = 0; fi < cfg.features.size(); ++fi) {
        const std::string& feature = cfg.features[fi];
        const int col = feature_index(feature);
        std::vector<Eigen::MatrixXd> series;
        std::string error;
        if (report.originals.rows() == 0) {
            error = "no surrogate-detected malware to attack";
        } else {
            const auto bounds = train_original.column(col);
            const double feat_min = *std::min_element(bounds.begin(), bounds.end());
            const double feat_max = *std::max_element(bounds.begin(), bounds.end());
            try {
                series = craft_feature_series(cfg, feature, report.originals, benign_std, scaler, surrogate,
                                              feat_min, feat_max,
                                              derive_seed(cfg.seed, static_cast<std::uint64_t>(fi) + 1));
            } catch (const std::exception& e) {
                error = e.what();
                series.clear();
            }
        }
        for (std::size_t ci = 0; ci < cfg.checkpoints.size(); ++ci) {
            CampaignCell cell;
            cell.feature = feature;
            cell.checkpoint = cfg.checkpoints[ci];
            cell.target_misclass.assign(targets.size(), 0.0);
            if (!error.empty() || ci >= series.size()) {
                cell.failed = true;
                cell.error = error.empty() ? "no crafted batch for checkpoint" : error;
                log_warn("campaign cell " + feature + "@" + std::to_string(cell.checkpoint) +
                         " failed: " + cell.error);
            } else {
                cell.perturbed = series[ci];
                const AdversarialBatch batch = make_adversarial_batch(
                    report.originals, cell.perturbed, feature, cell.checkpoint, scaler, surrogate);
                cell.mean_l2 = batch.mean_l2_original_scale;
                cell.surrogate_misclass = batch.surrogate_misclassification_rate;
                cell.n_samples = static_cast<std::size_t>(cell.perturbed.rows());
                std::vector<Eigen::Index> success;
                const std::vector<Eigen::Index>* subset = nullptr;
                if (cfg.transfer_on_surrogate_success_only) {
                    const Eigen::VectorXd p = predict_proba(surrogate, cell.perturbed);
                    for (Eigen::Index i = 0; i < p.size(); ++i) {
                        if (!(p(i) > 0.5)) success.push_back(i);
                    }
                    subset = &success;
                }
                for (std::size_t t = 0; t < targets.size(); ++t) {
                    cell.target_misclass[t] =
                        detail::misclass_rate(targets[t].model, cell.perturbed, subset);
                }
            }
            report.cells.push_back(std::move(cell));
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Adversarial retraining: augment the training split with crafted flows
// (labeled malware), let the GA re-pick hyperparameters, train the final
// model on the augmented split, and report clean-test and adversarial
// metrics.
// ---------------------------------------------------------------------------

struct RetrainSettings {
    HyperparamSpace space;  // empty -> default space for the model kind
    int population = 10;
    int generations = 5;
    int tournament = 3;
    double mutation_prob = 0.2;
    std::uint64_t ga_seed = 7;
    std::uint64_t model_seed = 0;
};

struct RetrainResult {
    Model model;
    Candidate best;
    Metrics clean_test;
    Metrics adversarial;
    std::vector<TraceRow> trace;
};

inline Dataset augment_with_adversarial(const Dataset& train_std, const Eigen::MatrixXd& adversarial_std) {
    if (train_std.scale != Scale::Standardized) {
        throw ScaleMismatchError("adversarial augmentation expects the standardized training split");
    }
    if (adversarial_std.rows() > 0 && adversarial_std.cols() != kNumFeatures) {
        throw FeatureMismatchError("adversarial matrix must have 9 columns");
    }
    Dataset augmented = train_std;
    for (Eigen::Index i = 0; i < adversarial_std.rows(); ++i) {
        FlowRecord r;
        r.label = 1;
        for (int j = 0; j < kNumFeatures; ++j) r[j] = adversarial_std(i, j);
        augmented.records.push_back(r);
    }
    return augmented;
}

inline RetrainResult adversarial_retrain(const Dataset& train_std, const Dataset& val_std,
                                         const Dataset& test_std, const Eigen::MatrixXd& adversarial_std,
                                         ModelKind kind, const RetrainSettings& settings) {
    const Dataset augmented = augment_with_adversarial(train_std, adversarial_std);
    HyperparamSpace space = settings.space.domains.empty() ? default_space(kind) : settings.space;
    validate_space_names(space, kind);
    auto fitness = [&](const Candidate& cand) {
        return fitness_classifier(space, cand, augmented, val_std, kind, settings.model_seed);
    };
    const SearchResult search =
        ga_optimize(space, settings.population, settings.generations, settings.tournament,
                    settings.mutation_prob, fitness, settings.ga_seed);
    RetrainResult result;
    result.best = search.best;
    result.trace = search.trace;
    result.model = train_from_candidate(space, search.best, kind, augmented, settings.model_seed);

    const std::vector<int> test_preds = predict_labels(result.model, test_std);
    result.clean_test = compute_metrics(test_preds, test_std.labels());
    if (adversarial_std.rows() > 0) {
        const Eigen::VectorXd p = predict_proba(result.model, adversarial_std);
        std::vector<int> adv_preds(static_cast<std::size_t>(p.size()));
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            adv_preds[static_cast<std::size_t>(i)] = p(i) > 0.5 ? 1 : 0;
        }
        const std::vector<int> adv_labels(adv_preds.size(), 1);
        result.adversarial = compute_metrics(adv_preds, adv_labels);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Report emission: campaign.csv plus one SVG per attacked feature charting
// mean L2 and surrogate misclassification against the checkpoints.
// ---------------------------------------------------------------------------

inline void write_campaign_csv(const CampaignReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "feature,checkpoint,mean_l2,surrogate_misclass,target_model,target_misclass,n\n";
    for (const auto& cell : report.cells) {
        auto emit_row = [&](const std::string& target, double rate) {
            out << cell.feature << "," << cell.checkpoint << "," << format_double(cell.mean_l2) << ","
                << format_double(cell.surrogate_misclass) << "," << target << "," << format_double(rate)
                << "," << cell.n_samples << "\n";
        };
        if (report.target_names.empty()) {
            emit_row("surrogate", cell.surrogate_misclass);
        } else {
            for (std::size_t t = 0; t < report.target_names.size(); ++t) {
                emit_row(report.target_names[t], cell.target_misclass[t]);
            }
        }
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

// Rebuild a report (metrics only, no crafted flows) from a campaign CSV, so
// plots can be re-rendered without re-running the attacks.
inline CampaignReport load_campaign_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in, line)) throw EmptyFileError("'" + path + "' is empty");
    {
        const auto header = detail::split_csv_line(line);
        const std::vector<std::string> expected{"feature",      "checkpoint",      "mean_l2",
                                                "surrogate_misclass", "target_model", "target_misclass",
                                                "n"};
        if (std::vector<std::string>(header.begin(), header.end()) != expected) {
            throw DataError("'" + path + "' is not a campaign CSV (unexpected header)");
        }
    }
    CampaignReport report;
    bool targets_known = false;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 7) {
            throw DataError("'" + path + "' line " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " columns, expected 7");
        }
        bool ok = true;
        const int checkpoint = static_cast<int>(parse_double(cells[1], ok));
        const double mean_l2 = parse_double(cells[2], ok);
        const double surrogate_misclass = parse_double(cells[3], ok);
        const double target_misclass = parse_double(cells[5], ok);
        const double n_samples = parse_double(cells[6], ok);
        if (!ok) {
            throw DataError("'" + path + "' line " + std::to_string(line_no) +
                            " has a non-numeric cell");
        }
        const bool new_cell = report.cells.empty() || report.cells.back().feature != cells[0] ||
                              report.cells.back().checkpoint != checkpoint;
        if (new_cell) {
            if (!report.cells.empty()) targets_known = true;
            CampaignCell cell;
            cell.feature = cells[0];
            cell.checkpoint = checkpoint;
            cell.mean_l2 = mean_l2;
            cell.surrogate_misclass = surrogate_misclass;
            cell.n_samples = static_cast<std::size_t>(n_samples);
            report.cells.push_back(std::move(cell));
        }
        if (cells[4] == "surrogate" && report.target_names.empty()) {
            continue;  // self-transfer row of a target-free campaign
        }
        if (!targets_known) report.target_names.push_back(cells[4]);
        report.cells.back().target_misclass.push_back(target_misclass);
    }
    if (report.cells.empty()) throw EmptyInputError("'" + path + "' has no campaign rows");
    for (const auto& cell : report.cells) {
        if (cell.target_misclass.size() != report.target_names.size()) {
            throw DataError("'" + path + "' has inconsistent target rows for feature '" +
                            cell.feature + "'");
        }
    }
    return report;
}

namespace detail {

inline std::string svg_polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                                double x_lo, double x_hi, double y_lo, double y_hi,
                                const std::string& color) {
    // Plot area: x in [60, 560], y in [40, 280] (y grows downward).
    std::ostringstream pts;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double fx = x_hi > x_lo ? (xs[i] - x_lo) / (x_hi - x_lo) : 0.5;
        const double fy = y_hi > y_lo ? (ys[i] - y_lo) / (y_hi - y_lo) : 0.5;
        const double px = 60.0 + fx * 500.0;
        const double py = 280.0 - fy * 240.0;
        if (i > 0) pts << " ";
        pts << format_double(px) << "," << format_double(py);
    }
    return "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\" points=\"" + pts.str() +
           "\"/>\n";
}

}  // namespace detail

// One twin-series line chart: mean L2 (left-scale, blue) and surrogate
// misclassification rate (unit scale, red) against checkpoint count.
inline std::string render_feature_svg(const CampaignReport& report, const std::string& feature) {
    std::vector<double> xs, l2s, mis;
    for (const auto& cell : report.cells) {
        if (cell.feature != feature || cell.failed) continue;
        xs.push_back(static_cast<double>(cell.checkpoint));
        l2s.push_back(cell.mean_l2);
        mis.push_back(cell.surrogate_misclass);
    }
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"620\" height=\"330\" "
           "viewBox=\"0 0 620 330\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"620\" height=\"330\" fill=\"white\"/>\n";
    svg << "<text x=\"310\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
        << feature << ": distortion and evasion by checkpoint</text>\n";
    svg << "<line x1=\"60\" y1=\"280\" x2=\"560\" y2=\"280\" stroke=\"black\"/>\n";
    svg << "<line x1=\"60\" y1=\"40\" x2=\"60\" y2=\"280\" stroke=\"black\"/>\n";
    if (!xs.empty()) {
        const double x_lo = xs.front(), x_hi = xs.back();
        const double l2_hi = std::max(1e-12, *std::max_element(l2s.begin(), l2s.end()));
        svg << detail::svg_polyline(xs, l2s, x_lo, x_hi, 0.0, l2_hi, "#1f77b4");
        svg << detail::svg_polyline(xs, mis, x_lo, x_hi, 0.0, 1.0, "#d62728");
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double fx = x_hi > x_lo ? (xs[i] - x_lo) / (x_hi - x_lo) : 0.5;
            svg << "<text x=\"" << format_double(60.0 + fx * 500.0)
                << "\" y=\"298\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
                << static_cast<long long>(xs[i]) << "</text>\n";
        }
        svg << "<text x=\"20\" y=\"36\" font-family=\"sans-serif\" font-size=\"11\">"
            << format_double(l2_hi) << "</text>\n";
    }
    svg << "<rect x=\"70\" y=\"310\" width=\"12\" height=\"4\" fill=\"#1f77b4\"/>\n";
    svg << "<text x=\"88\" y=\"316\" font-family=\"sans-serif\" font-size=\"11\">mean L2 (original "
           "scale)</text>\n";
    svg << "<rect x=\"300\" y=\"310\" width=\"12\" height=\"4\" fill=\"#d62728\"/>\n";
    svg << "<text x=\"318\" y=\"316\" font-family=\"sans-serif\" font-size=\"11\">surrogate "
           "misclassification rate</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

// Writes campaign.csv and attack_<feature>.svg files into `dir`; refuses an
// empty report before touching the filesystem.
inline std::vector<std::string> emit_report(const CampaignReport& report, const std::string& dir) {
    if (report.cells.empty()) throw EmptyInputError("campaign report has no cells to emit");
    std::filesystem::create_directories(dir);
    std::vector<std::string> written;
    const std::string csv_path = (std::filesystem::path(dir) / "campaign.csv").string();
    write_campaign_csv(report, csv_path);
    written.push_back(csv_path);
    std::vector<std::string> features;
    for (const auto& cell : report.cells) {
        if (std::find(features.begin(), features.end(), cell.feature) == features.end()) {
            features.push_back(cell.feature);
        }
    }
    for (const auto& feature : features) {
        const std::string svg_path =
            (std::filesystem::path(dir) / ("attack_" + feature + ".svg")).string();
        std::ofstream out(svg_path);
        if (!out) throw IoError("cannot open '" + svg_path + "' for writing");
        out << render_feature_svg(report, feature);
        if (!out) throw IoError("failed writing '" + svg_path + "'");
        written.push_back(svg_path);
    }
    return written;
}

}  // namespace fg
