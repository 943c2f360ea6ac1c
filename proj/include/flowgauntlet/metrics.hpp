#pragma once

#include <string>
#include <vector>

#include "flowgauntlet/core.hpp"

namespace fg {

// Binary confusion counts and derived scores.  Malware (label 1) is the
// positive class.  Ratios with a zero denominator are reported as 0.
struct Metrics {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline Metrics compute_metrics(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size()) {
        throw LengthMismatchError("predicted (" + std::to_string(predicted.size()) + ") and truth (" +
                                  std::to_string(truth.size()) + ") differ");
    }
    if (predicted.empty()) throw EmptyInputError("cannot compute metrics on empty input");
    Metrics m;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool pred_pos = predicted[i] == 1;
        const bool true_pos = truth[i] == 1;
        if (pred_pos && true_pos) ++m.tp;
        else if (pred_pos && !true_pos) ++m.fp;
        else if (!pred_pos && !true_pos) ++m.tn;
        else ++m.fn;
    }
    const double n = static_cast<double>(predicted.size());
    m.accuracy = static_cast<double>(m.tp + m.tn) / n;
    m.precision = (m.tp + m.fp) > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
    m.recall = (m.tp + m.fn) > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

// Probability -> label at the fixed 0.5 decision threshold (0.5 itself is benign).
inline std::vector<int> labels_from_probabilities(const std::vector<double>& p_malware) {
    std::vector<int> out(p_malware.size());
    for (std::size_t i = 0; i < p_malware.size(); ++i) out[i] = p_malware[i] > 0.5 ? 1 : 0;
    return out;
}

}  // namespace fg
