#include <catch2/catch_amalgamated.hpp>

#include <flowgauntlet/conformal.hpp>
#include <flowgauntlet/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace fg;

namespace {

// Independent quantile oracle: full sort, then direct rank arithmetic.
double quantile_oracle(std::vector<double> scores, double alpha) {
    std::sort(scores.begin(), scores.end());
    const double n = static_cast<double>(scores.size());
    double rank = std::ceil((n + 1.0) * (1.0 - alpha));
    rank = std::max(rank, 1.0);
    rank = std::min(rank, n);
    return scores[static_cast<std::size_t>(rank) - 1];
}

}  // namespace

TEST_CASE("nonconformity scores flip with the true label") {
    const std::vector<double> probs{0.9, 0.2, 0.5};
    const std::vector<int> labels{1, 0, 1};
    const std::vector<double> s = conformal_scores(probs, labels);
    REQUIRE(s[0] == Catch::Approx(0.1));
    REQUIRE(s[1] == Catch::Approx(0.2));
    REQUIRE(s[2] == Catch::Approx(0.5));
    REQUIRE_THROWS_AS(conformal_scores({0.5}, {1, 0}), LengthMismatchError);
    REQUIRE_THROWS_AS(conformal_scores({1.5}, {1}), DataError);
}

TEST_CASE("quantile threshold hand values") {
    const std::vector<double> s{0.1, 0.2, 0.3, 0.4};
    REQUIRE(quantile_threshold(s, 0.5) == 0.3);    // rank ceil(5*0.5)=3
    REQUIRE(quantile_threshold(s, 0.001) == 0.4);  // rank clipped to n
    REQUIRE(quantile_threshold(s, 0.999) == 0.1);  // rank clipped to 1
    REQUIRE(quantile_threshold({0.7}, 0.25) == 0.7);
    REQUIRE_THROWS_AS(quantile_threshold({}, 0.1), EmptyScoresError);
    REQUIRE_THROWS_AS(quantile_threshold(s, 0.0), ConfigError);
    REQUIRE_THROWS_AS(quantile_threshold(s, 1.0), ConfigError);
}

TEST_CASE("quantile threshold matches the sort-based oracle on random inputs") {
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.below(1000);
        std::vector<double> scores(n);
        for (auto& v : scores) v = rng.uniform();
        const double alpha = rng.uniform(0.001, 0.999);
        REQUIRE(quantile_threshold(scores, alpha) == quantile_oracle(scores, alpha));
    }
}

TEST_CASE("prediction sets follow the mass rule") {
    // q_hat = 0.08 -> a label needs at least 0.92 predicted mass.
    REQUIRE(prediction_set(0.95, 0.08) == SetKind::Malware);
    REQUIRE(prediction_set(0.40, 0.08) == SetKind::Empty);
    REQUIRE(prediction_set(0.03, 0.08) == SetKind::Benign);
    // Generous q_hat admits both labels.
    REQUIRE(prediction_set(0.5, 0.6) == SetKind::Both);
    // Boundary: inclusion is >=.
    REQUIRE(prediction_set(0.92, 0.08) == SetKind::Malware);
    REQUIRE_THROWS_AS(prediction_set(1.2, 0.08), DataError);
    REQUIRE_THROWS_AS(prediction_set(0.5, 1.2), DataError);
}

TEST_CASE("verdicts accept singletons and reject the rest") {
    REQUIRE(verdict_of(SetKind::Benign) == VerdictKind::AcceptBenign);
    REQUIRE(verdict_of(SetKind::Malware) == VerdictKind::AcceptMalware);
    REQUIRE(verdict_of(SetKind::Empty) == VerdictKind::Reject);
    REQUIRE(verdict_of(SetKind::Both) == VerdictKind::Reject);
    REQUIRE(is_accept(VerdictKind::AcceptBenign));
    REQUIRE_FALSE(is_accept(VerdictKind::Reject));
}

TEST_CASE("calibration wires scores, alpha, and threshold together") {
    const std::vector<double> probs{0.9, 0.8, 0.3, 0.1};
    const std::vector<int> labels{1, 1, 0, 0};
    const ConformalCalibration cal = calibrate_conformal(probs, labels, 0.5);
    REQUIRE(cal.alpha == 0.5);
    const std::vector<double> expect{1.0 - 0.9, 1.0 - 0.8, 0.3, 0.1};
    REQUIRE(cal.scores == expect);
    REQUIRE(cal.q_hat == quantile_oracle(cal.scores, 0.5));
}

TEST_CASE("threshold evaluation computes CA and CR percentages") {
    const std::vector<double> probs{0.99, 0.90, 0.10, 0.45};
    const std::vector<int> preds{1, 1, 0, 0};
    const std::vector<int> labels{1, 0, 0, 1};
    // q_hat = 0.15: 0.99 -> {malware}, 0.90 -> {malware}, 0.10 -> {benign},
    // 0.45 -> empty.  Correct predictions: rows 0 and 2 (both accepted).
    // Incorrect: rows 1 (accepted) and 3 (rejected).
    const AlphaSweepRow row = evaluate_threshold(0.2, 0.15, probs, preds, labels);
    REQUIRE(row.alpha == 0.2);
    REQUIRE(row.q_hat == 0.15);
    REQUIRE(row.ca_pct == Catch::Approx(100.0));
    REQUIRE(row.cr_pct == Catch::Approx(50.0));
    REQUIRE(row.harmonic_mean == Catch::Approx(2.0 * 100.0 * 50.0 / 150.0));

    SECTION("empty pools default to 100") {
        const AlphaSweepRow all_correct =
            evaluate_threshold(0.2, 0.15, {0.99, 0.01}, {1, 0}, {1, 0});
        REQUIRE(all_correct.cr_pct == 100.0);
        const AlphaSweepRow all_wrong = evaluate_threshold(0.2, 0.15, {0.99, 0.01}, {1, 0}, {0, 1});
        REQUIRE(all_wrong.ca_pct == 100.0);
    }

    SECTION("zero-zero harmonic mean is zero") {
        // The correct row is rejected (empty set) and the incorrect row is
        // confidently accepted, so both rates are zero.
        const AlphaSweepRow r = evaluate_threshold(0.2, 0.05, {0.6, 0.99}, {1, 1}, {1, 0});
        REQUIRE(r.ca_pct == 0.0);
        REQUIRE(r.cr_pct == 0.0);
        REQUIRE(r.harmonic_mean == 0.0);
    }

    REQUIRE_THROWS_AS(evaluate_threshold(0.2, 0.1, {0.5}, {1, 0}, {1}), LengthMismatchError);
}

TEST_CASE("alpha sweep spans the grid and breaks ties toward smaller alpha") {
    Rng rng(9);
    std::vector<double> calib_probs;
    std::vector<int> calib_labels;
    for (int i = 0; i < 200; ++i) {
        const double p = rng.uniform();
        calib_probs.push_back(p);
        calib_labels.push_back(rng.uniform() < p ? 1 : 0);
    }
    // Degenerate eval pool: every prediction correct and extremely confident,
    // so every alpha scores the same and the tie must fall to the first row.
    const std::vector<double> eval_probs{0.999, 0.001, 0.998, 0.002};
    const std::vector<int> eval_preds{1, 0, 1, 0};
    const std::vector<int> eval_labels{1, 0, 1, 0};
    const AlphaSweepResult result =
        alpha_sweep(calib_probs, calib_labels, eval_probs, eval_preds, eval_labels, 0.05, 0.4, 8);
    REQUIRE(result.rows.size() == 8);
    REQUIRE(result.rows.front().alpha == 0.05);
    REQUIRE(result.rows.back().alpha == 0.4);  // exact endpoint, not lo + 7*step
    for (std::size_t i = 1; i < result.rows.size(); ++i) {
        REQUIRE(result.rows[i].alpha > result.rows[i - 1].alpha);
    }
    const double h0 = result.rows.front().harmonic_mean;
    for (const auto& r : result.rows) REQUIRE(r.harmonic_mean == Catch::Approx(h0));
    REQUIRE(result.best_index == 0);
    REQUIRE(result.best_alpha == 0.05);
    REQUIRE(result.best_q_hat == result.rows.front().q_hat);

    REQUIRE_THROWS_AS(alpha_sweep(calib_probs, calib_labels, eval_probs, eval_preds, eval_labels,
                                  0.05, 0.4, 1),
                      ConfigError);
    REQUIRE_THROWS_AS(alpha_sweep(calib_probs, calib_labels, eval_probs, eval_preds, eval_labels,
                                  0.4, 0.05, 8),
                      ConfigError);
}

TEST_CASE("coverage lands near its nominal level on calibrated probabilities") {
    Rng rng(31);
    std::vector<double> probs;
    std::vector<int> labels;
    for (int i = 0; i < 2000; ++i) {
        const double p = rng.uniform();
        probs.push_back(p);
        labels.push_back(rng.uniform() < p ? 1 : 0);
    }
    const double cov = coverage_check(probs, labels, 500, 0.1, 10, 77);
    REQUIRE(cov >= 0.86);
    REQUIRE(cov <= 0.96);
    REQUIRE_THROWS_AS(coverage_check(probs, labels, 2000, 0.1, 10, 77), ConfigError);
    REQUIRE_THROWS_AS(coverage_check(probs, labels, 500, 0.1, 0, 77), ConfigError);
}

TEST_CASE("verdict rows serialize with names and stable formatting") {
    const std::vector<double> probs{0.95, 0.40, 0.03};
    const std::vector<VerdictRow> rows = conformal_verdicts(probs, 0.08);
    REQUIRE(rows.size() == 3);
    REQUIRE(rows[0].verdict == VerdictKind::AcceptMalware);
    REQUIRE(rows[1].verdict == VerdictKind::Reject);
    REQUIRE(rows[2].verdict == VerdictKind::AcceptBenign);
    REQUIRE(rows[1].pred == 0);  // 0.40 is below the plain 0.5 threshold

    const std::string path = (std::filesystem::temp_directory_path() / "fg_verdicts.csv").string();
    write_verdict_csv(rows, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "row_id,prob_malware,pred,verdict,set");
    std::getline(in, line);
    REQUIRE(line == "0,0.95,1,accept,malware");
    std::getline(in, line);
    REQUIRE(line == "1,0.4,0,reject,empty");
    std::getline(in, line);
    REQUIRE(line == "2,0.03,0,accept,benign");
    in.close();
    std::remove(path.c_str());
}

TEST_CASE("alpha sweep rows serialize with a fixed header") {
    std::vector<AlphaSweepRow> rows(2);
    rows[0] = {0.1, 0.2, 90.0, 80.0, 84.70588235294117};
    rows[1] = {0.2, 0.1, 95.0, 70.0, 80.60606060606061};
    const std::string path = (std::filesystem::temp_directory_path() / "fg_sweep.csv").string();
    write_alpha_sweep_csv(rows, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "alpha,q_hat,ca_pct,cr_pct,harmonic_mean");
    std::getline(in, line);
    REQUIRE(line.rfind("0.1,0.2,90,80,", 0) == 0);
    in.close();
    std::remove(path.c_str());
}
