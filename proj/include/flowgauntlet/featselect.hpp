#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "flowgauntlet/core.hpp"
#include "flowgauntlet/flowdata.hpp"

namespace fg {

// Shannon entropy of a label sequence, in bits.  Empty input is an error;
// 0 * log(0) is treated as 0.
inline double entropy(const std::vector<int>& labels) {
    if (labels.empty()) throw EmptyInputError("entropy of an empty label sequence is undefined");
    std::map<int, std::size_t> counts;
    for (int v : labels) ++counts[v];
    const double n = static_cast<double>(labels.size());
    double h = 0.0;
    for (const auto& [value, count] : counts) {
        (void)value;
        const double p = static_cast<double>(count) / n;
        if (p > 0.0) h -= p * std::log2(p);
    }
    return h;
}

// Equal-width binning of a continuous column: bin b spans
// [min + b*w, min + (b+1)*w) with w = (max-min)/bins; the maximum falls in
// the last bin.  A constant column puts everything in bin 0.
inline std::vector<int> equal_width_bins(const std::vector<double>& values, int bins) {
    if (values.empty()) throw EmptyInputError("cannot bin an empty column");
    if (bins < 1) throw ConfigError("bin count must be >= 1");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::vector<int> out(values.size(), 0);
    if (hi <= lo) return out;
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i < values.size(); ++i) {
        int b = static_cast<int>((values[i] - lo) / width);
        if (b < 0) b = 0;
        if (b >= bins) b = bins - 1;
        out[i] = b;
    }
    return out;
}

// Information gain of a binned feature with respect to the labels:
// IG = H(labels) - sum_b (|D_b| / |D|) * H(labels in D_b).
inline double information_gain(const std::vector<double>& values, const std::vector<int>& labels, int bins) {
    if (values.size() != labels.size()) {
        throw LengthMismatchError("values (" + std::to_string(values.size()) + ") and labels (" +
                                  std::to_string(labels.size()) + ") differ");
    }
    const std::vector<int> assignment = equal_width_bins(values, bins);
    const double total = static_cast<double>(labels.size());
    double h = entropy(labels);
    std::map<int, std::vector<int>> by_bin;
    for (std::size_t i = 0; i < labels.size(); ++i) by_bin[assignment[i]].push_back(labels[i]);
    for (const auto& [bin, bin_labels] : by_bin) {
        (void)bin;
        h -= (static_cast<double>(bin_labels.size()) / total) * entropy(bin_labels);
    }
    // Guard against -0.0 / tiny negative drift on uninformative columns.
    return h < 0.0 ? 0.0 : h;
}

// ---------------------------------------------------------------------------
// Per-feature report.  Scores live in schema column order; accessors go by
// name.  bin_count is recorded so reports from different runs are comparable.
// ---------------------------------------------------------------------------

struct IgReport {
    std::array<double, kNumFeatures> gain{};
    int bin_count = 10;

    double gain_of(const std::string& name) const { return gain[static_cast<std::size_t>(feature_index(name))]; }
};

inline IgReport compute_ig_report(const Dataset& ds, int bins = 10) {
    if (ds.empty()) throw EmptyInputError("cannot compute information gain on an empty dataset");
    IgReport report;
    report.bin_count = bins;
    const std::vector<int> labels = ds.labels();
    for (int j = 0; j < kNumFeatures; ++j) {
        report.gain[static_cast<std::size_t>(j)] = information_gain(ds.column(j), labels, bins);
    }
    return report;
}

// Element-wise mean of several reports (e.g. across scenario datasets).
inline IgReport average_ig_reports(const std::vector<IgReport>& reports) {
    if (reports.empty()) throw EmptyInputError("cannot average zero reports");
    IgReport out;
    out.bin_count = reports.front().bin_count;
    for (const auto& r : reports) {
        if (r.bin_count != out.bin_count) throw ConfigError("cannot average reports with different bin counts");
        for (int j = 0; j < kNumFeatures; ++j) out.gain[static_cast<std::size_t>(j)] += r.gain[static_cast<std::size_t>(j)];
    }
    for (int j = 0; j < kNumFeatures; ++j) {
        out.gain[static_cast<std::size_t>(j)] /= static_cast<double>(reports.size());
    }
    return out;
}

// Features whose gain is strictly above the threshold, ordered by descending
// gain; equal gains fall back to schema column order.
inline std::vector<std::string> select_by_threshold(const IgReport& report, double threshold) {
    std::vector<int> idx;
    for (int j = 0; j < kNumFeatures; ++j) {
        if (report.gain[static_cast<std::size_t>(j)] > threshold) idx.push_back(j);
    }
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return report.gain[static_cast<std::size_t>(a)] > report.gain[static_cast<std::size_t>(b)];
    });
    std::vector<std::string> out;
    out.reserve(idx.size());
    for (int j : idx) out.emplace_back(feature_name(j));
    return out;
}

inline std::vector<int> feature_indices_of(const std::vector<std::string>& names) {
    std::vector<int> out;
    out.reserve(names.size());
    for (const auto& n : names) out.push_back(feature_index(n));
    return out;
}

inline void write_ig_report_csv(const IgReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "feature,information_gain\n";
    for (int j = 0; j < kNumFeatures; ++j) {
        out << feature_name(j) << "," << format_double(report.gain[static_cast<std::size_t>(j)]) << "\n";
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace fg

#include "flowgauntlet/metrics.hpp"
#include "flowgauntlet/models/random_forest.hpp"

namespace fg {

// ---------------------------------------------------------------------------
// Threshold sweep: for each candidate gain threshold, keep the features that
// clear it, train a forest on them, and score F1 on the validation split.
// An empty surviving set yields F1 = 0 for that row rather than an error.
// ---------------------------------------------------------------------------

struct ThresholdSweepRow {
    double threshold = 0.0;
    double f1 = 0.0;
    std::vector<std::string> features;
};

inline std::vector<ThresholdSweepRow> threshold_sweep(const Dataset& train, const Dataset& validation,
                                             const std::vector<double>& thresholds, const RfParams& rf_params,
                                             int bins = 10) {
    if (thresholds.empty()) throw EmptyInputError("threshold sweep needs at least one threshold");
    if (validation.empty()) throw EmptyInputError("threshold sweep needs a non-empty validation set");
    const IgReport report = compute_ig_report(train, bins);
    std::vector<ThresholdSweepRow> rows;
    rows.reserve(thresholds.size());
    for (double thr : thresholds) {
        ThresholdSweepRow row;
        row.threshold = thr;
        row.features = select_by_threshold(report, thr);
        if (!row.features.empty()) {
            const RandomForest rf = RandomForest::train(train, rf_params, feature_indices_of(row.features));
            const Metrics m = compute_metrics(labels_from_probabilities(rf.predict_proba(validation)),
                                              validation.labels());
            row.f1 = m.f1;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_threshold_sweep_csv(const std::vector<ThresholdSweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "threshold,f1,features\n";
    for (const auto& r : rows) {
        out << format_double(r.threshold) << "," << format_double(r.f1) << ",";
        for (std::size_t i = 0; i < r.features.size(); ++i) {
            if (i > 0) out << ";";
            out << r.features[i];
        }
        out << "\n";
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace fg
