#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "flowgauntlet/core.hpp"
#include "flowgauntlet/rng.hpp"

namespace fg {

// ---------------------------------------------------------------------------
// Schema.  Nine numeric flow features in fixed order, plus a binary label
// (0 = benign, 1 = malware).  All matrices and masks use this column order.
// ---------------------------------------------------------------------------

inline constexpr int kNumFeatures = 9;

inline constexpr std::array<const char*, kNumFeatures> kFeatureNames = {
    "SrcWin", "sHops", "sTtl", "dTtl", "SrcBytes", "DstBytes", "Dur", "TotBytes", "Rate",
};

enum class Feature : int {
    SrcWin = 0,
    SHops = 1,
    STtl = 2,
    DTtl = 3,
    SrcBytes = 4,
    DstBytes = 5,
    Dur = 6,
    TotBytes = 7,
    Rate = 8,
};

inline int feature_index(const std::string& name) {
    for (int i = 0; i < kNumFeatures; ++i) {
        if (name == kFeatureNames[static_cast<std::size_t>(i)]) return i;
    }
    throw UnknownFeatureError("unknown feature '" + name + "'");
}

inline const char* feature_name(int index) {
    if (index < 0 || index >= kNumFeatures) {
        throw UnknownFeatureError("feature index out of range: " + std::to_string(index));
    }
    return kFeatureNames[static_cast<std::size_t>(index)];
}

// Whether feature values are in raw units or standardized (zero mean / unit
// variance under some Scaler).  Carried on Dataset so consumers can refuse
// input in the wrong space.
enum class Scale { Original, Standardized };

struct FlowRecord {
    std::array<double, kNumFeatures> features{};
    int label = 0;

    double& operator[](int i) { return features[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return features[static_cast<std::size_t>(i)]; }
    double& operator[](Feature f) { return features[static_cast<std::size_t>(f)]; }
    double operator[](Feature f) const { return features[static_cast<std::size_t>(f)]; }
};

struct Dataset {
    std::vector<FlowRecord> records;
    Scale scale = Scale::Original;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }

    std::vector<double> column(int feature) const {
        std::vector<double> out(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) out[i] = records[i][feature];
        return out;
    }

    std::vector<int> labels() const {
        std::vector<int> out(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) out[i] = records[i].label;
        return out;
    }

    std::size_t count_label(int label) const {
        std::size_t n = 0;
        for (const auto& r : records) {
            if (r.label == label) ++n;
        }
        return n;
    }

    Dataset filter_label(int label) const {
        Dataset out;
        out.scale = scale;
        for (const auto& r : records) {
            if (r.label == label) out.records.push_back(r);
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Eigen interop.  Rows are records, columns follow kFeatureNames.
// ---------------------------------------------------------------------------

inline Eigen::MatrixXd to_matrix(const Dataset& ds) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(ds.size()), kNumFeatures);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (int j = 0; j < kNumFeatures; ++j) m(static_cast<Eigen::Index>(i), j) = ds.records[i][j];
    }
    return m;
}

inline Dataset from_matrix(const Eigen::MatrixXd& m, const std::vector<int>& labels, Scale scale) {
    if (m.cols() != kNumFeatures) {
        throw FeatureMismatchError("expected " + std::to_string(kNumFeatures) + " columns, got " +
                                   std::to_string(m.cols()));
    }
    if (static_cast<std::size_t>(m.rows()) != labels.size()) {
        throw LengthMismatchError("matrix rows (" + std::to_string(m.rows()) +
                                  ") and labels (" + std::to_string(labels.size()) + ") differ");
    }
    Dataset ds;
    ds.scale = scale;
    ds.records.resize(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        auto& r = ds.records[static_cast<std::size_t>(i)];
        for (int j = 0; j < kNumFeatures; ++j) r[j] = m(i, j);
        r.label = labels[static_cast<std::size_t>(i)];
    }
    return ds;
}

// ---------------------------------------------------------------------------
// CSV I/O.  Canonical header: the nine feature names then Label.  Readers
// accept any column order (columns are matched by name, extras rejected);
// writers always emit the canonical order.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    out.push_back(cell);
    return out;
}

inline std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t')) --b;
    return s.substr(a, b - a);
}

}  // namespace detail

inline Dataset load_flow_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string header_line;
    if (!std::getline(in, header_line)) throw EmptyFileError("'" + path + "' is empty");

    const auto header = detail::split_csv_line(header_line);
    std::array<int, kNumFeatures> feature_col{};
    feature_col.fill(-1);
    int label_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string name = detail::trim(header[c]);
        if (name == "Label") {
            label_col = static_cast<int>(c);
            continue;
        }
        bool known = false;
        for (int j = 0; j < kNumFeatures; ++j) {
            if (name == kFeatureNames[static_cast<std::size_t>(j)]) {
                feature_col[static_cast<std::size_t>(j)] = static_cast<int>(c);
                known = true;
                break;
            }
        }
        if (!known) throw DataError("unexpected column '" + name + "' in '" + path + "'");
    }
    for (int j = 0; j < kNumFeatures; ++j) {
        if (feature_col[static_cast<std::size_t>(j)] < 0) {
            throw MissingColumnError(kFeatureNames[static_cast<std::size_t>(j)]);
        }
    }
    if (label_col < 0) throw MissingColumnError("Label");

    Dataset ds;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) {
            ++row;
            continue;
        }
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError("row " + std::to_string(row) + " of '" + path + "' has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(header.size()));
        }
        FlowRecord rec;
        for (int j = 0; j < kNumFeatures; ++j) {
            bool ok = false;
            const double v = parse_double(cells[static_cast<std::size_t>(feature_col[static_cast<std::size_t>(j)])], ok);
            if (!ok || !std::isfinite(v)) {
                throw NonNumericCellError(row, kFeatureNames[static_cast<std::size_t>(j)]);
            }
            rec[j] = v;
        }
        bool ok = false;
        const double lv = parse_double(cells[static_cast<std::size_t>(label_col)], ok);
        if (!ok || (lv != 0.0 && lv != 1.0)) throw NonNumericCellError(row, "Label");
        rec.label = static_cast<int>(lv);
        ds.records.push_back(rec);
        ++row;
    }
    if (ds.records.empty()) throw EmptyFileError("'" + path + "' has a header but no data rows");
    return ds;
}

inline void save_flow_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (int j = 0; j < kNumFeatures; ++j) {
        out << kFeatureNames[static_cast<std::size_t>(j)] << ",";
    }
    out << "Label\n";
    for (const auto& r : ds.records) {
        for (int j = 0; j < kNumFeatures; ++j) out << format_double(r[j]) << ",";
        out << r.label << "\n";
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Partitioning.  A seeded Fisher-Yates permutation is cut into contiguous
// [train | validation | calibration | test] slices.  Sizes use floor; the
// remainder stays in train.  Validation and calibration are carved out of the
// train share, mirroring the usual "hold out from training data" protocol.
// ---------------------------------------------------------------------------

struct SplitSpec {
    double train_fraction = 0.7;
    double test_fraction = 0.3;
    double validation_fraction_of_train = 0.05;
    double calibration_fraction_of_train = 0.10;
    std::uint64_t seed = 42;
};

struct SplitResult {
    Dataset train;
    Dataset validation;
    Dataset calibration;
    Dataset test;
};

inline SplitResult split(const Dataset& ds, const SplitSpec& spec) {
    if (spec.train_fraction <= 0.0 || spec.test_fraction <= 0.0 ||
        std::abs(spec.train_fraction + spec.test_fraction - 1.0) > 1e-9) {
        throw ConfigError("train_fraction and test_fraction must be positive and sum to 1");
    }
    if (spec.validation_fraction_of_train < 0.0 || spec.calibration_fraction_of_train < 0.0 ||
        spec.validation_fraction_of_train + spec.calibration_fraction_of_train >= 1.0) {
        throw ConfigError("validation and calibration fractions must be non-negative and leave a non-empty train residual");
    }
    const std::size_t n = ds.size();
    if (n < 2) throw TooFewRecordsError("need at least 2 records to split, got " + std::to_string(n));

    const std::size_t n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.test_fraction));
    const std::size_t n_train_share = n - n_test;
    const std::size_t n_val =
        static_cast<std::size_t>(std::floor(static_cast<double>(n_train_share) * spec.validation_fraction_of_train));
    const std::size_t n_calib =
        static_cast<std::size_t>(std::floor(static_cast<double>(n_train_share) * spec.calibration_fraction_of_train));
    const std::size_t n_train = n_train_share - n_val - n_calib;

    if (n_test == 0) throw EmptyPartitionError("test partition is empty");
    if (n_train == 0) throw EmptyPartitionError("train partition is empty");
    if (spec.validation_fraction_of_train > 0.0 && n_val == 0) {
        throw EmptyPartitionError("validation partition is empty");
    }
    if (spec.calibration_fraction_of_train > 0.0 && n_calib == 0) {
        throw EmptyPartitionError("calibration partition is empty");
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(spec.seed);
    rng.shuffle(order);

    SplitResult out;
    out.train.scale = out.validation.scale = out.calibration.scale = out.test.scale = ds.scale;
    std::size_t pos = 0;
    auto take = [&](Dataset& part, std::size_t count) {
        part.records.reserve(count);
        for (std::size_t i = 0; i < count; ++i) part.records.push_back(ds.records[order[pos++]]);
    };
    take(out.train, n_train);
    take(out.validation, n_val);
    take(out.calibration, n_calib);
    take(out.test, n_test);
    return out;
}

// ---------------------------------------------------------------------------
// Standard scaler: per-feature zero mean, unit variance (population std).
// Columns with vanishing spread keep their mean but divide by 1 so transforms
// stay finite and invertible.
// ---------------------------------------------------------------------------

struct Scaler {
    std::array<double, kNumFeatures> means{};
    std::array<double, kNumFeatures> stddevs{};

    double transform_value(int feature, double v) const {
        return (v - means[static_cast<std::size_t>(feature)]) / stddevs[static_cast<std::size_t>(feature)];
    }
    double inverse_value(int feature, double v) const {
        return v * stddevs[static_cast<std::size_t>(feature)] + means[static_cast<std::size_t>(feature)];
    }
};

inline Scaler fit_scaler(const Dataset& ds) {
    if (ds.empty()) throw EmptyInputError("cannot fit a scaler on an empty dataset");
    if (ds.scale != Scale::Original) throw ScaleMismatchError("scaler must be fit on original-scale data");
    const double n = static_cast<double>(ds.size());
    Scaler s;
    for (int j = 0; j < kNumFeatures; ++j) {
        double mean = 0.0;
        for (const auto& r : ds.records) mean += r[j];
        mean /= n;
        double var = 0.0;
        for (const auto& r : ds.records) {
            const double d = r[j] - mean;
            var += d * d;
        }
        var /= n;
        double sd = std::sqrt(var);
        if (sd < 1e-12) sd = 1.0;
        s.means[static_cast<std::size_t>(j)] = mean;
        s.stddevs[static_cast<std::size_t>(j)] = sd;
    }
    return s;
}

inline Dataset transform(const Scaler& s, const Dataset& ds) {
    if (ds.scale != Scale::Original) throw ScaleMismatchError("transform expects original-scale data");
    Dataset out = ds;
    out.scale = Scale::Standardized;
    for (auto& r : out.records) {
        for (int j = 0; j < kNumFeatures; ++j) r[j] = s.transform_value(j, r[j]);
    }
    return out;
}

inline Dataset inverse_transform(const Scaler& s, const Dataset& ds) {
    if (ds.scale != Scale::Standardized) throw ScaleMismatchError("inverse_transform expects standardized data");
    Dataset out = ds;
    out.scale = Scale::Original;
    for (auto& r : out.records) {
        for (int j = 0; j < kNumFeatures; ++j) r[j] = s.inverse_value(j, r[j]);
    }
    return out;
}

// Matrix variants carry no scale tag; callers own the bookkeeping.
inline Eigen::MatrixXd transform_matrix(const Scaler& s, Eigen::MatrixXd m) {
    if (m.cols() != kNumFeatures) throw FeatureMismatchError("transform_matrix expects 9 columns");
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < kNumFeatures; ++j) m(i, j) = s.transform_value(j, m(i, j));
    }
    return m;
}

inline Eigen::MatrixXd inverse_transform_matrix(const Scaler& s, Eigen::MatrixXd m) {
    if (m.cols() != kNumFeatures) throw FeatureMismatchError("inverse_transform_matrix expects 9 columns");
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < kNumFeatures; ++j) m(i, j) = s.inverse_value(j, m(i, j));
    }
    return m;
}

inline void save_scaler(const Scaler& s, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["means"] = s.means;
    j["stddevs"] = s.stddevs;
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed writing '" + path + "'");
}

inline Scaler load_scaler(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("scaler file '" + path + "' is not valid JSON: " + std::string(e.what()));
    }
    Scaler s;
    try {
        const auto means = j.at("means").get<std::vector<double>>();
        const auto stddevs = j.at("stddevs").get<std::vector<double>>();
        if (means.size() != kNumFeatures || stddevs.size() != kNumFeatures) {
            throw DataError("scaler file '" + path + "' must carry 9 means and 9 stddevs");
        }
        std::copy(means.begin(), means.end(), s.means.begin());
        std::copy(stddevs.begin(), stddevs.end(), s.stddevs.begin());
    } catch (const nlohmann::json::exception& e) {
        throw DataError("scaler file '" + path + "' is malformed: " + std::string(e.what()));
    }
    for (double sd : s.stddevs) {
        if (!(sd > 0.0)) throw DataError("scaler file '" + path + "' has non-positive stddev");
    }
    return s;
}

}  // namespace fg
