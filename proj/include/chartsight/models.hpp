#pragma once

#include "chartsight/features.hpp"
#include "chartsight/matrix.hpp"
#include "chartsight/trees.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace chartsight {

double sigmoid(double z);

// ---------------------------------------------------------------------------
// Logistic regression

struct LogisticConfig {
    double learning_rate = 0.1;
    int max_iters = 5000;
    double tolerance = 1e-6;
    double l2_penalty = 1e-4;

    void validate() const;
    nlohmann::json to_json() const;
    static LogisticConfig from_json(const nlohmann::json &doc);
};

struct LinearModel {
    std::vector<double> weights;
    double intercept = 0.0;
};

struct LogisticFit {
    LinearModel model;
    double final_loss = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Mean log-loss plus (l2_penalty / 2) * (|w|^2 + intercept^2).
double logistic_objective(const LinearModel &model, const FeatureMatrix &x, std::span<const int> y,
                          double l2_penalty);
/// Gradient of logistic_objective; the intercept component is stored in `intercept`.
LinearModel logistic_gradient(const LinearModel &model, const FeatureMatrix &x, std::span<const int> y,
                              double l2_penalty);

/// Full-batch gradient descent from zero weights. Stops when the gradient
/// infinity-norm falls below the tolerance or after max_iters steps.
LogisticFit train_logistic(const FeatureMatrix &x, std::span<const int> y, const LogisticConfig &config = {});

double predict_logistic(const LinearModel &model, std::span<const double> x);

// ---------------------------------------------------------------------------
// Random forest

struct ForestConfig {
    int n_trees = 200;
    TreeConfig tree{std::nullopt, 2, FeatureSubsample::sqrt, Criterion::gini, 0};
    std::uint64_t seed = 0;
    /// Worker threads; 0 picks hardware concurrency. Output does not depend on it.
    unsigned threads = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static ForestConfig from_json(const nlohmann::json &doc);
};

struct ForestModel {
    std::vector<Tree> trees;
    TreeConfig config;
    std::uint64_t seed = 0;
    std::size_t n_features = 0;
};

/// Each tree is grown on its own bootstrap sample with rng stream = tree index.
ForestModel train_forest(const FeatureMatrix &x, std::span<const int> y, const ForestConfig &config = {});

struct ForestPrediction {
    int label = 0;
    double probability = 0.0;
};

/// Majority of hard votes (leaf fraction >= 0.5 votes 1; ties go to 0) and the
/// mean leaf fraction.
ForestPrediction predict_forest(const ForestModel &model, std::span<const double> x);

// ---------------------------------------------------------------------------
// Gradient boosting

struct GbmConfig {
    int rounds = 300;
    double learning_rate = 0.1;
    int max_depth = 3;
    int min_samples_split = 10;

    void validate() const;
    nlohmann::json to_json() const;
    static GbmConfig from_json(const nlohmann::json &doc);
};

struct BoostedStage {
    Tree tree;
    double weight = 1.0;
};

struct BoostedModel {
    double base_score = 0.0; // log-odds prior
    std::vector<BoostedStage> stages;
    double learning_rate = 0.1;
    std::size_t n_features = 0;
    /// Training log-loss after each stage; entry 0 is the prior alone.
    std::vector<double> stage_loss;
};

inline constexpr double kMaxBaseScore = 10.0;

/// Log-loss boosting: each stage fits a squared-error tree to y - p and is
/// added with weight learning_rate.
BoostedModel train_gbm(const FeatureMatrix &x, std::span<const int> y, const GbmConfig &config = {},
                       std::string *warning = nullptr);

/// base_score + sum of weight * tree output.
double gbm_score(const BoostedModel &model, std::span<const double> x);
double predict_gbm(const BoostedModel &model, std::span<const double> x);

double log_loss(std::span<const double> probabilities, std::span<const int> labels);

int classify(double probability, double threshold = 0.5);

// ---------------------------------------------------------------------------
// Model files

enum class ModelKind { logistic, forest, boosted };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

using ModelParameters = std::variant<LinearModel, ForestModel, BoostedModel>;

/// A trained classifier plus everything needed to featurize its input.
struct ModelFile {
    static constexpr int kFormatVersion = 1;

    ModelParameters model;
    StandardizationParams standardization;
    FeatureOptions feature_options;
    nlohmann::json config;

    ModelKind kind() const;
    std::size_t n_features() const;

    nlohmann::json to_json() const;
    static ModelFile from_json(const nlohmann::json &doc);
    void save(const std::filesystem::path &path) const;
    static ModelFile load(const std::filesystem::path &path);
};

/// P(charted | x) for any model kind.
double predict_probability(const ModelParameters &model, std::span<const double> x);
/// Class decision: forest uses its vote, the others threshold the probability.
int predict_label(const ModelParameters &model, std::span<const double> x, double threshold = 0.5);

} // namespace chartsight
