#pragma once

#include "chartsight/common.hpp"
#include "chartsight/linkage.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace chartsight {

// ---------------------------------------------------------------------------
// Stratified split

struct SplitResult {
    std::vector<LabeledTrack> train;
    std::vector<LabeledTrack> validation;
    /// Positions in dataset.rows() of the validation rows, ascending.
    std::vector<std::size_t> validation_indices;
    std::size_t validation_positives = 0;
    std::size_t validation_negatives = 0;
};

/// round-half-up(count * ratio), computed so that exact halves are not lost to
/// binary rounding (e.g. 10 * 0.25 -> 3).
std::size_t round_half_up_share(std::size_t count, double ratio);

/// Per class, round-half-up(class_size * ratio) rows are drawn uniformly
/// without replacement into validation. Rows keep dataset order within each
/// partition.
SplitResult stratified_split(const LabeledDataset &dataset, double ratio, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Metrics

struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + tn + fp + fn; }
    friend bool operator==(const ConfusionMatrix &, const ConfusionMatrix &) = default;
};

/// Class 1 (charting) is the positive class.
ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
    // set when the metric's denominator was zero and 0 was reported instead
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
};

struct ClassificationReport {
    /// Index 0 = non-charting, 1 = charting.
    std::array<ClassMetrics, 2> classes;
    double accuracy = 0.0;
    std::size_t total_support = 0;
    ConfusionMatrix confusion;

    nlohmann::json to_json() const;
    /// Aligned text table: one row per class, then accuracy, macro and weighted averages.
    std::string to_text(const std::string &title = {}) const;
};

ClassificationReport metrics(const ConfusionMatrix &cm);

/// Row 0 = true non-charting [tn, fp] / negatives, row 1 = true charting [fn, tp] / positives.
std::array<std::array<double, 2>, 2> normalized_confusion(const ConfusionMatrix &cm);

} // namespace chartsight
