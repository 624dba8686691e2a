#pragma once

#include "chartsight/linkage.hpp"
#include "chartsight/matrix.hpp"
#include "chartsight/models.hpp"
#include "chartsight/trees.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace chartsight {

// ---------------------------------------------------------------------------
// Kernel density estimation

struct KdeCurve {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0.0;
    std::size_t sample_count = 0;
};

/// 1.06 * sd * n^(-1/5) with the sample (n-1) standard deviation.
double silverman_bandwidth(std::span<const double> samples);

/// Gaussian-kernel density on `grid`. Without an explicit bandwidth at least
/// two samples with non-zero spread are required.
KdeCurve kde(std::span<const double> samples, std::optional<double> bandwidth, std::span<const double> grid);

/// Evenly spaced grid from min - 4h to max + 4h.
std::vector<double> kde_grid(std::span<const double> samples, double bandwidth, std::size_t points = 512);

std::vector<double> linspace(double lo, double hi, std::size_t points);
double trapezoid(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// TreeSHAP

struct ShapValues {
    std::vector<double> values;
    double base_value = 0.0;
};

/// Path-dependent TreeSHAP: Shapley values of the tree output where absent
/// features are integrated out by following both children weighted by cover.
ShapValues tree_shap(const Tree &tree, std::span<const double> x);
/// Explains the mean leaf fraction (probability) of the forest.
ShapValues tree_shap(const ForestModel &model, std::span<const double> x);
/// Explains the log-odds score; base_value includes the prior.
ShapValues tree_shap(const BoostedModel &model, std::span<const double> x);

enum class ShapOutput { probability, log_odds };

struct ShapSummary {
    FeatureMatrix feature_values;
    FeatureMatrix shap;
    double base_value = 0.0;
    ShapOutput output = ShapOutput::probability;
    std::vector<double> mean_abs;
    /// Feature indices by decreasing mean |shap|; ties keep index order.
    std::vector<std::size_t> ranking;
};

/// Throws for models without trees.
ShapSummary shap_summary(const ModelParameters &model, const FeatureMatrix &data, unsigned threads = 0);

// ---------------------------------------------------------------------------
// Partial dependence

struct PdpCurve {
    std::size_t feature_index = 0;
    std::vector<double> grid;
    std::vector<double> mean_prediction;
};

PdpCurve pdp(const ModelParameters &model, const FeatureMatrix &data, std::size_t feature_index,
             std::span<const double> grid, unsigned threads = 0);

/// Linear-interpolated quantile, q in [0,1].
double quantile(std::vector<double> values, double q);

/// `points` values evenly spaced between the 1st and 99th percentile of the
/// column; falls back to the distinct values when that range is degenerate.
std::vector<double> pdp_grid(const FeatureMatrix &data, std::size_t feature_index, std::size_t points = 50);

// ---------------------------------------------------------------------------
// Release-month inclusion shares

struct MonthShare {
    std::size_t released = 0;
    std::size_t charted = 0;
    std::optional<double> share; // nullopt when nothing was released
};

struct MonthlyInclusion {
    std::array<MonthShare, 12> months{};
    std::size_t excluded_month_imputed = 0;

    const MonthShare &month(int m) const { return months.at(static_cast<std::size_t>(m - 1)); }
};

/// Tracks whose month was imputed from a year-only date are excluded.
MonthlyInclusion monthly_inclusion(std::span<const LabeledTrack> labeled);

} // namespace chartsight
