#include <catch2/catch_amalgamated.hpp>

#include <flowgauntlet/flowdata.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

using namespace fg;

namespace {

Dataset tiny_dataset(std::size_t n, Scale scale = Scale::Original) {
    Dataset ds;
    ds.scale = scale;
    for (std::size_t i = 0; i < n; ++i) {
        FlowRecord r;
        for (int j = 0; j < kNumFeatures; ++j) {
            r[j] = static_cast<double>(i) + 0.1 * static_cast<double>(j);
        }
        r.label = static_cast<int>(i % 2);
        ds.records.push_back(r);
    }
    return ds;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("feature names round-trip through index lookup") {
    REQUIRE(kNumFeatures == 9);
    for (int j = 0; j < kNumFeatures; ++j) {
        REQUIRE(feature_index(feature_name(j)) == j);
    }
    REQUIRE_THROWS_AS(feature_index("NoSuchFeature"), UnknownFeatureError);
    REQUIRE(feature_index("SrcWin") == 0);
    REQUIRE(feature_index("Rate") == 8);
}

TEST_CASE("split produces the documented partition sizes") {
    const Dataset ds = tiny_dataset(1000);
    SplitSpec spec;  // 0.7/0.3, validation 5% of train share, calibration 10%
    const SplitResult parts = split(ds, spec);
    // 1000 flows: test=floor(300), train share 700 -> val 35, calib 70, train 595.
    REQUIRE(parts.test.size() == 300);
    REQUIRE(parts.validation.size() == 35);
    REQUIRE(parts.calibration.size() == 70);
    REQUIRE(parts.train.size() == 595);
}

TEST_CASE("split is a disjoint exhaustive shuffle, stable under the seed") {
    const Dataset ds = tiny_dataset(200);
    SplitSpec spec;
    spec.seed = 17;
    const SplitResult a = split(ds, spec);
    const SplitResult b = split(ds, spec);

    // Deterministic: same seed, same partitions.
    REQUIRE(a.train.size() == b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        REQUIRE(a.train.records[i][0] == b.train.records[i][0]);
    }

    // Disjoint and exhaustive: feature 0 is unique per record by construction.
    std::multiset<double> seen;
    for (const auto* part : {&a.train, &a.validation, &a.calibration, &a.test}) {
        for (const auto& r : part->records) seen.insert(r[0]);
    }
    REQUIRE(seen.size() == 200);
    std::multiset<double> expect;
    for (const auto& r : ds.records) expect.insert(r[0]);
    REQUIRE(seen == expect);

    spec.seed = 18;
    const SplitResult c = split(ds, spec);
    bool same_order = a.train.size() == c.train.size();
    if (same_order) {
        same_order = std::equal(a.train.records.begin(), a.train.records.end(), c.train.records.begin(),
                                [](const FlowRecord& x, const FlowRecord& y) { return x[0] == y[0]; });
    }
    REQUIRE_FALSE(same_order);
}

TEST_CASE("split rejects inconsistent fractions") {
    const Dataset ds = tiny_dataset(10);
    SplitSpec bad;
    bad.train_fraction = 0.5;
    bad.test_fraction = 0.6;
    REQUIRE_THROWS_AS(split(ds, bad), ConfigError);

    SplitSpec eats_train;
    eats_train.validation_fraction_of_train = 0.6;
    eats_train.calibration_fraction_of_train = 0.4;
    REQUIRE_THROWS_AS(split(ds, eats_train), ConfigError);

    REQUIRE_THROWS_AS(split(tiny_dataset(1), SplitSpec{}), TooFewRecordsError);
}

TEST_CASE("scaler standardizes to zero mean unit variance") {
    // Feature values {1,3}: mean 2, population std 1 -> transforms to {-1,+1}.
    Dataset ds;
    ds.scale = Scale::Original;
    FlowRecord a;
    FlowRecord b;
    for (int j = 0; j < kNumFeatures; ++j) {
        a[j] = 1.0;
        b[j] = 3.0;
    }
    ds.records = {a, b};
    const Scaler s = fit_scaler(ds);
    for (int j = 0; j < kNumFeatures; ++j) {
        REQUIRE(s.means[static_cast<std::size_t>(j)] == Catch::Approx(2.0));
        REQUIRE(s.stddevs[static_cast<std::size_t>(j)] == Catch::Approx(1.0));
        REQUIRE(s.transform_value(j, 1.0) == Catch::Approx(-1.0));
        REQUIRE(s.transform_value(j, 3.0) == Catch::Approx(1.0));
    }

    const Dataset std_ds = transform(s, ds);
    REQUIRE(std_ds.scale == Scale::Standardized);
    const Dataset back = inverse_transform(s, std_ds);
    REQUIRE(back.scale == Scale::Original);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (int j = 0; j < kNumFeatures; ++j) {
            REQUIRE(back.records[i][j] == Catch::Approx(ds.records[i][j]).margin(1e-12));
        }
    }
}

TEST_CASE("constant columns standardize to zero instead of dividing by zero") {
    Dataset ds = tiny_dataset(5);
    for (auto& r : ds.records) r[2] = 42.0;
    const Scaler s = fit_scaler(ds);
    REQUIRE(s.stddevs[2] == 1.0);
    REQUIRE(s.transform_value(2, 42.0) == 0.0);
}

TEST_CASE("scaler guards against wrong-scale input") {
    const Dataset std_ds = tiny_dataset(5, Scale::Standardized);
    REQUIRE_THROWS_AS(fit_scaler(std_ds), ScaleMismatchError);
    const Dataset orig = tiny_dataset(5);
    const Scaler s = fit_scaler(orig);
    REQUIRE_THROWS_AS(transform(s, std_ds), ScaleMismatchError);
    REQUIRE_THROWS_AS(inverse_transform(s, orig), ScaleMismatchError);
    REQUIRE_THROWS_AS(fit_scaler(Dataset{}), EmptyInputError);
}

TEST_CASE("flow CSV round-trips exactly") {
    const Dataset ds = tiny_dataset(20);
    const std::string path = temp_path("fg_roundtrip.csv");
    save_flow_csv(ds, path);
    const Dataset back = load_flow_csv(path);
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        REQUIRE(back.records[i].label == ds.records[i].label);
        for (int j = 0; j < kNumFeatures; ++j) {
            REQUIRE(back.records[i][j] == ds.records[i][j]);
        }
    }
    std::remove(path.c_str());
}

TEST_CASE("flow CSV loader accepts shuffled columns and rejects malformed input") {
    const std::string path = temp_path("fg_csv_cases.csv");

    SECTION("shuffled column order is matched by name") {
        std::ofstream out(path);
        out << "Label,Rate,TotBytes,Dur,DstBytes,SrcBytes,dTtl,sTtl,sHops,SrcWin\n";
        out << "1,9,8,7,6,5,4,3,2,1\n";
        out.close();
        const Dataset ds = load_flow_csv(path);
        REQUIRE(ds.size() == 1);
        REQUIRE(ds.records[0].label == 1);
        REQUIRE(ds.records[0][Feature::SrcWin] == 1.0);
        REQUIRE(ds.records[0][Feature::Rate] == 9.0);
        REQUIRE(ds.records[0][Feature::Dur] == 7.0);
    }

    SECTION("missing feature column") {
        std::ofstream out(path);
        out << "SrcWin,sHops,sTtl,dTtl,SrcBytes,DstBytes,Dur,TotBytes,Label\n";
        out << "1,2,3,4,5,6,7,8,0\n";
        out.close();
        REQUIRE_THROWS_AS(load_flow_csv(path), MissingColumnError);
    }

    SECTION("missing label column") {
        std::ofstream out(path);
        out << "SrcWin,sHops,sTtl,dTtl,SrcBytes,DstBytes,Dur,TotBytes,Rate\n";
        out << "1,2,3,4,5,6,7,8,9\n";
        out.close();
        REQUIRE_THROWS_AS(load_flow_csv(path), MissingColumnError);
    }

    SECTION("non-numeric cell") {
        std::ofstream out(path);
        out << "SrcWin,sHops,sTtl,dTtl,SrcBytes,DstBytes,Dur,TotBytes,Rate,Label\n";
        out << "1,2,3,4,banana,6,7,8,9,0\n";
        out.close();
        REQUIRE_THROWS_AS(load_flow_csv(path), NonNumericCellError);
    }

    SECTION("non-binary label") {
        std::ofstream out(path);
        out << "SrcWin,sHops,sTtl,dTtl,SrcBytes,DstBytes,Dur,TotBytes,Rate,Label\n";
        out << "1,2,3,4,5,6,7,8,9,2\n";
        out.close();
        REQUIRE_THROWS_AS(load_flow_csv(path), NonNumericCellError);
    }

    SECTION("unexpected extra column") {
        std::ofstream out(path);
        out << "SrcWin,sHops,sTtl,dTtl,SrcBytes,DstBytes,Dur,TotBytes,Rate,Label,Oops\n";
        out << "1,2,3,4,5,6,7,8,9,0,1\n";
        out.close();
        REQUIRE_THROWS_AS(load_flow_csv(path), DataError);
    }

    SECTION("empty file") {
        std::ofstream out(path);
        out.close();
        REQUIRE_THROWS_AS(load_flow_csv(path), EmptyFileError);
    }

    SECTION("header only") {
        std::ofstream out(path);
        out << "SrcWin,sHops,sTtl,dTtl,SrcBytes,DstBytes,Dur,TotBytes,Rate,Label\n";
        out.close();
        REQUIRE_THROWS_AS(load_flow_csv(path), EmptyFileError);
    }

    SECTION("missing file") {
        REQUIRE_THROWS_AS(load_flow_csv(temp_path("fg_definitely_absent.csv")), IoError);
    }

    std::remove(path.c_str());
}

TEST_CASE("scaler JSON round-trips and rejects malformed files") {
    const Dataset ds = tiny_dataset(10);
    const Scaler s = fit_scaler(ds);
    const std::string path = temp_path("fg_scaler.json");
    save_scaler(s, path);
    const Scaler back = load_scaler(path);
    for (int j = 0; j < kNumFeatures; ++j) {
        REQUIRE(back.means[static_cast<std::size_t>(j)] == s.means[static_cast<std::size_t>(j)]);
        REQUIRE(back.stddevs[static_cast<std::size_t>(j)] == s.stddevs[static_cast<std::size_t>(j)]);
    }

    std::ofstream out(path);
    out << "{\"means\": [1, 2]}";
    out.close();
    REQUIRE_THROWS_AS(load_scaler(path), DataError);
    std::remove(path.c_str());
}

TEST_CASE("matrix conversion preserves order and validates shape") {
    const Dataset ds = tiny_dataset(6);
    const Eigen::MatrixXd m = to_matrix(ds);
    REQUIRE(m.rows() == 6);
    REQUIRE(m.cols() == kNumFeatures);
    REQUIRE(m(3, 2) == ds.records[3][2]);

    const Dataset back = from_matrix(m, ds.labels(), ds.scale);
    REQUIRE(back.size() == ds.size());
    REQUIRE(back.records[5][8] == ds.records[5][8]);

    REQUIRE_THROWS_AS(from_matrix(Eigen::MatrixXd::Zero(2, 3), std::vector<int>{0, 1}, Scale::Original),
                      FeatureMismatchError);
    REQUIRE_THROWS_AS(from_matrix(Eigen::MatrixXd::Zero(2, kNumFeatures), std::vector<int>{0}, Scale::Original),
                      LengthMismatchError);
}
