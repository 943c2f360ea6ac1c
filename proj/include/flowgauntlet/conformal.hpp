#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "flowgauntlet/core.hpp"
#include "flowgauntlet/rng.hpp"

namespace fg {

// ---------------------------------------------------------------------------
// Split-conformal machinery for a binary classifier that outputs P(malware).
// ---------------------------------------------------------------------------

// Nonconformity score of a labeled example: one minus the probability the
// model assigned to the true class.
inline std::vector<double> conformal_scores(const std::vector<double>& probs_malware,
                                            const std::vector<int>& labels) {
    if (probs_malware.size() != labels.size()) {
        throw LengthMismatchError("probabilities and labels differ in length");
    }
    std::vector<double> scores(probs_malware.size());
    for (std::size_t i = 0; i < probs_malware.size(); ++i) {
        const double p = probs_malware[i];
        if (!(p >= 0.0 && p <= 1.0)) throw DataError("probability outside [0,1]");
        scores[i] = labels[i] == 1 ? 1.0 - p : p;
    }
    return scores;
}

// q_hat: the ceil((n+1)(1-alpha))-th smallest calibration score, with the
// rank clipped into [1, n] so the threshold is total for small n or extreme
// alpha.
inline double quantile_threshold(std::vector<double> scores, double alpha) {
    if (scores.empty()) throw EmptyScoresError("quantile of an empty score set");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
    const std::size_t n = scores.size();
    double raw = std::ceil(static_cast<double>(n + 1) * (1.0 - alpha));
    std::size_t rank = raw < 1.0 ? 1 : static_cast<std::size_t>(raw);
    rank = std::min(rank, n);
    std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(rank - 1), scores.end());
    return scores[rank - 1];
}

struct ConformalCalibration {
    std::vector<double> scores;
    double alpha = 0.0;
    double q_hat = 0.0;
};

inline ConformalCalibration calibrate_conformal(const std::vector<double>& probs_malware,
                                                const std::vector<int>& labels, double alpha) {
    ConformalCalibration cal;
    cal.scores = conformal_scores(probs_malware, labels);
    cal.alpha = alpha;
    cal.q_hat = quantile_threshold(cal.scores, alpha);
    return cal;
}

enum class SetKind { Empty, Benign, Malware, Both };
enum class VerdictKind { AcceptBenign, AcceptMalware, Reject };

inline const char* set_name(SetKind k) {
    switch (k) {
        case SetKind::Empty: return "empty";
        case SetKind::Benign: return "benign";
        case SetKind::Malware: return "malware";
        case SetKind::Both: return "both";
    }
    return "empty";
}

// A label enters the set when the model gives it at least 1 - q_hat mass.
inline SetKind prediction_set(double p_malware, double q_hat) {
    if (!(p_malware >= 0.0 && p_malware <= 1.0)) throw DataError("probability outside [0,1]");
    if (!(q_hat >= 0.0 && q_hat <= 1.0)) throw DataError("q_hat outside [0,1]");
    const bool malware_in = p_malware >= 1.0 - q_hat;
    const bool benign_in = (1.0 - p_malware) >= 1.0 - q_hat;
    if (malware_in && benign_in) return SetKind::Both;
    if (malware_in) return SetKind::Malware;
    if (benign_in) return SetKind::Benign;
    return SetKind::Empty;
}

// Singleton sets are accepted with their label; Empty and Both are rejected.
inline VerdictKind verdict_of(SetKind set) {
    switch (set) {
        case SetKind::Benign: return VerdictKind::AcceptBenign;
        case SetKind::Malware: return VerdictKind::AcceptMalware;
        case SetKind::Empty:
        case SetKind::Both: return VerdictKind::Reject;
    }
    return VerdictKind::Reject;
}

inline bool is_accept(VerdictKind v) { return v != VerdictKind::Reject; }

// ---------------------------------------------------------------------------
// Alpha sweep: scan equally spaced alphas, score each by the harmonic mean of
// the correct-accept and correct-reject rates on an evaluation split.
// ---------------------------------------------------------------------------

struct AlphaSweepRow {
    double alpha = 0.0;
    double q_hat = 0.0;
    double ca_pct = 0.0;       // accepted-and-correct / total-correct * 100
    double cr_pct = 0.0;       // rejected-and-incorrect / total-incorrect * 100
    double harmonic_mean = 0.0;
};

struct AlphaSweepResult {
    std::vector<AlphaSweepRow> rows;
    std::size_t best_index = 0;
    double best_alpha = 0.0;
    double best_q_hat = 0.0;
};

// CA/CR percentages for one threshold.  Empty pools (no correct predictions,
// or no incorrect ones) define the corresponding rate as 100 so the sweep
// stays total on degenerate evaluation sets.
inline AlphaSweepRow evaluate_threshold(double alpha, double q_hat, const std::vector<double>& eval_probs,
                                        const std::vector<int>& eval_preds,
                                        const std::vector<int>& eval_labels) {
    if (eval_probs.size() != eval_preds.size() || eval_probs.size() != eval_labels.size()) {
        throw LengthMismatchError("evaluation probs/preds/labels differ in length");
    }
    std::size_t total_correct = 0, total_incorrect = 0, accepted_correct = 0, rejected_incorrect = 0;
    for (std::size_t i = 0; i < eval_probs.size(); ++i) {
        const bool correct = eval_preds[i] == eval_labels[i];
        const bool accepted = is_accept(verdict_of(prediction_set(eval_probs[i], q_hat)));
        if (correct) {
            ++total_correct;
            if (accepted) ++accepted_correct;
        } else {
            ++total_incorrect;
            if (!accepted) ++rejected_incorrect;
        }
    }
    AlphaSweepRow row;
    row.alpha = alpha;
    row.q_hat = q_hat;
    row.ca_pct = total_correct == 0
                     ? 100.0
                     : 100.0 * static_cast<double>(accepted_correct) / static_cast<double>(total_correct);
    row.cr_pct = total_incorrect == 0 ? 100.0
                                      : 100.0 * static_cast<double>(rejected_incorrect) /
                                            static_cast<double>(total_incorrect);
    const double denom = row.ca_pct + row.cr_pct;
    row.harmonic_mean = denom > 0.0 ? 2.0 * row.ca_pct * row.cr_pct / denom : 0.0;
    return row;
}

inline AlphaSweepResult alpha_sweep(const std::vector<double>& calib_probs,
                                    const std::vector<int>& calib_labels,
                                    const std::vector<double>& eval_probs,
                                    const std::vector<int>& eval_preds,
                                    const std::vector<int>& eval_labels, double alpha_lo, double alpha_hi,
                                    int n_points) {
    if (n_points < 2) throw ConfigError("alpha sweep needs at least 2 points");
    if (!(alpha_lo > 0.0 && alpha_hi < 1.0 && alpha_lo < alpha_hi)) {
        throw ConfigError("alpha sweep bounds must satisfy 0 < lo < hi < 1");
    }
    const std::vector<double> scores = conformal_scores(calib_probs, calib_labels);
    AlphaSweepResult result;
    result.rows.reserve(static_cast<std::size_t>(n_points));
    const double step = (alpha_hi - alpha_lo) / static_cast<double>(n_points - 1);
    for (int i = 0; i < n_points; ++i) {
        const double alpha = i + 1 == n_points ? alpha_hi : alpha_lo + step * static_cast<double>(i);
        const double q_hat = quantile_threshold(scores, alpha);
        result.rows.push_back(evaluate_threshold(alpha, q_hat, eval_probs, eval_preds, eval_labels));
    }
    // Ascending alpha grid + strict comparison == ties go to the smaller alpha.
    for (std::size_t i = 1; i < result.rows.size(); ++i) {
        if (result.rows[i].harmonic_mean > result.rows[result.best_index].harmonic_mean) {
            result.best_index = i;
        }
    }
    result.best_alpha = result.rows[result.best_index].alpha;
    result.best_q_hat = result.rows[result.best_index].q_hat;
    return result;
}

// ---------------------------------------------------------------------------
// Coverage: over repeated exchangeable calibration/test re-splits, the
// fraction of test points whose true label lands in the prediction set.
// ---------------------------------------------------------------------------

inline double coverage_check(const std::vector<double>& probs_malware, const std::vector<int>& labels,
                             std::size_t n_calib, double alpha, int trials, std::uint64_t seed) {
    if (probs_malware.size() != labels.size()) {
        throw LengthMismatchError("probabilities and labels differ in length");
    }
    if (trials < 1) throw ConfigError("coverage_check needs at least one trial");
    const std::size_t n = probs_malware.size();
    if (n_calib < 1 || n_calib >= n) throw ConfigError("n_calib must leave a non-empty test part");
    std::vector<std::size_t> order(n);
    double total = 0.0;
    for (int t = 0; t < trials; ++t) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
        rng.shuffle(order);
        std::vector<double> calib_probs(n_calib);
        std::vector<int> calib_labels(n_calib);
        for (std::size_t i = 0; i < n_calib; ++i) {
            calib_probs[i] = probs_malware[order[i]];
            calib_labels[i] = labels[order[i]];
        }
        const double q_hat = quantile_threshold(conformal_scores(calib_probs, calib_labels), alpha);
        std::size_t covered = 0;
        const std::size_t n_test = n - n_calib;
        for (std::size_t i = n_calib; i < n; ++i) {
            const SetKind set = prediction_set(probs_malware[order[i]], q_hat);
            const bool in_set = labels[order[i]] == 1
                                    ? (set == SetKind::Malware || set == SetKind::Both)
                                    : (set == SetKind::Benign || set == SetKind::Both);
            if (in_set) ++covered;
        }
        total += static_cast<double>(covered) / static_cast<double>(n_test);
    }
    return total / static_cast<double>(trials);
}

// ---------------------------------------------------------------------------
// Persistence.
// ---------------------------------------------------------------------------

inline void write_alpha_sweep_csv(const std::vector<AlphaSweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "alpha,q_hat,ca_pct,cr_pct,harmonic_mean\n";
    for (const auto& r : rows) {
        out << format_double(r.alpha) << "," << format_double(r.q_hat) << "," << format_double(r.ca_pct)
            << "," << format_double(r.cr_pct) << "," << format_double(r.harmonic_mean) << "\n";
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

struct VerdictRow {
    std::size_t row_id = 0;
    double prob_malware = 0.0;
    int pred = 0;
    VerdictKind verdict = VerdictKind::Reject;
    SetKind set = SetKind::Empty;
};

inline std::vector<VerdictRow> conformal_verdicts(const std::vector<double>& probs_malware, double q_hat) {
    std::vector<VerdictRow> rows;
    rows.reserve(probs_malware.size());
    for (std::size_t i = 0; i < probs_malware.size(); ++i) {
        VerdictRow row;
        row.row_id = i;
        row.prob_malware = probs_malware[i];
        row.pred = probs_malware[i] > 0.5 ? 1 : 0;
        row.set = prediction_set(probs_malware[i], q_hat);
        row.verdict = verdict_of(row.set);
        rows.push_back(row);
    }
    return rows;
}

inline void write_verdict_csv(const std::vector<VerdictRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "row_id,prob_malware,pred,verdict,set\n";
    for (const auto& r : rows) {
        out << r.row_id << "," << format_double(r.prob_malware) << "," << r.pred << ","
            << (is_accept(r.verdict) ? "accept" : "reject") << "," << set_name(r.set) << "\n";
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace fg
