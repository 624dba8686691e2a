#include "chartsight/models.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace chartsight {

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

// log(1 + exp(z)) without overflow
double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double dot(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += a[i] * b[i];
    }
    return sum;
}

void check_training_inputs(const FeatureMatrix &x, std::span<const int> y) {
    if (x.rows() == 0) {
        throw std::invalid_argument("training set is empty");
    }
    if (x.rows() != y.size()) {
        throw DimensionError(x.rows(), y.size());
    }
    for (int label : y) {
        if (label != 0 && label != 1) {
            throw std::invalid_argument("labels must be 0 or 1");
        }
    }
}

} // namespace

// ---------------------------------------------------------------------------

void LogisticConfig::validate() const {
    if (!(learning_rate > 0.0)) {
        throw ConfigError("logistic learning_rate must be positive");
    }
    if (max_iters < 0) {
        throw ConfigError("logistic max_iters must be non-negative");
    }
    if (!(tolerance >= 0.0)) {
        throw ConfigError("logistic tolerance must be non-negative");
    }
    if (!(l2_penalty >= 0.0)) {
        throw ConfigError("logistic l2_penalty must be non-negative");
    }
}

nlohmann::json LogisticConfig::to_json() const {
    return {{"learning_rate", learning_rate},
            {"max_iters", max_iters},
            {"tolerance", tolerance},
            {"l2_penalty", l2_penalty}};
}

LogisticConfig LogisticConfig::from_json(const nlohmann::json &doc) {
    LogisticConfig c;
    c.learning_rate = doc.value("learning_rate", c.learning_rate);
    c.max_iters = doc.value("max_iters", c.max_iters);
    c.tolerance = doc.value("tolerance", c.tolerance);
    c.l2_penalty = doc.value("l2_penalty", c.l2_penalty);
    c.validate();
    return c;
}

double logistic_objective(const LinearModel &model, const FeatureMatrix &x, std::span<const int> y,
                          double l2_penalty) {
    double loss = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double z = dot(model.weights, x.row(i)) + model.intercept;
        loss += softplus(z) - static_cast<double>(y[i]) * z;
    }
    loss /= static_cast<double>(x.rows());
    double norm = model.intercept * model.intercept;
    for (double w : model.weights) {
        norm += w * w;
    }
    return loss + 0.5 * l2_penalty * norm;
}

LinearModel logistic_gradient(const LinearModel &model, const FeatureMatrix &x, std::span<const int> y,
                              double l2_penalty) {
    LinearModel grad{std::vector<double>(x.cols(), 0.0), 0.0};
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto row = x.row(i);
        const double residual = sigmoid(dot(model.weights, row) + model.intercept) - static_cast<double>(y[i]);
        for (std::size_t j = 0; j < row.size(); ++j) {
            grad.weights[j] += residual * row[j];
        }
        grad.intercept += residual;
    }
    const double inv_n = 1.0 / static_cast<double>(x.rows());
    for (std::size_t j = 0; j < grad.weights.size(); ++j) {
        grad.weights[j] = grad.weights[j] * inv_n + l2_penalty * model.weights[j];
    }
    grad.intercept = grad.intercept * inv_n + l2_penalty * model.intercept;
    return grad;
}

LogisticFit train_logistic(const FeatureMatrix &x, std::span<const int> y, const LogisticConfig &config) {
    config.validate();
    check_training_inputs(x, y);

    LogisticFit fit;
    fit.model.weights.assign(x.cols(), 0.0);
    for (int iter = 0; iter < config.max_iters; ++iter) {
        const LinearModel grad = logistic_gradient(fit.model, x, y, config.l2_penalty);
        double norm = std::fabs(grad.intercept);
        for (double g : grad.weights) {
            norm = std::max(norm, std::fabs(g));
        }
        if (!std::isfinite(norm)) {
            throw Error("logistic regression diverged (non-finite gradient); use a smaller learning_rate");
        }
        if (norm < config.tolerance) {
            fit.converged = true;
            break;
        }
        for (std::size_t j = 0; j < grad.weights.size(); ++j) {
            fit.model.weights[j] -= config.learning_rate * grad.weights[j];
        }
        fit.model.intercept -= config.learning_rate * grad.intercept;
        fit.iterations = iter + 1;
    }
    fit.final_loss = logistic_objective(fit.model, x, y, config.l2_penalty);
    if (!std::isfinite(fit.final_loss)) {
        throw Error("logistic regression diverged (non-finite loss); use a smaller learning_rate");
    }
    return fit;
}

double predict_logistic(const LinearModel &model, std::span<const double> x) {
    if (x.size() != model.weights.size()) {
        throw DimensionError(model.weights.size(), x.size());
    }
    return sigmoid(dot(model.weights, x) + model.intercept);
}

// ---------------------------------------------------------------------------

void ForestConfig::validate() const {
    if (n_trees < 1) {
        throw ConfigError("forest n_trees must be at least 1");
    }
    tree.validate();
    if (tree.criterion != Criterion::gini) {
        throw ConfigError("forest trees use the gini criterion");
    }
}

nlohmann::json ForestConfig::to_json() const {
    return {{"n_trees", n_trees}, {"tree", tree.to_json()}, {"seed", seed}};
}

ForestConfig ForestConfig::from_json(const nlohmann::json &doc) {
    ForestConfig c;
    c.n_trees = doc.value("n_trees", c.n_trees);
    if (doc.contains("tree")) {
        // keys absent from the document keep the forest defaults, not the plain-tree ones
        nlohmann::json merged = c.tree.to_json();
        merged.update(doc.at("tree"));
        c.tree = TreeConfig::from_json(merged);
    }
    c.seed = doc.value("seed", c.seed);
    c.validate();
    return c;
}

ForestModel train_forest(const FeatureMatrix &x, std::span<const int> y, const ForestConfig &config) {
    config.validate();
    check_training_inputs(x, y);

    std::vector<double> targets(y.begin(), y.end());
    ForestModel model;
    model.config = config.tree;
    model.config.rng_seed = config.seed;
    model.seed = config.seed;
    model.n_features = x.cols();
    model.trees.resize(static_cast<std::size_t>(config.n_trees));

    const std::size_t n = x.rows();
    auto grow_one = [&](std::size_t t) {
        Rng rng = Rng::stream(config.seed, t);
        std::vector<std::size_t> sample(n);
        for (auto &s : sample) {
            s = static_cast<std::size_t>(rng.below(n));
        }
        model.trees[t] = grow_tree(x, targets, sample, model.config, rng);
    };

    parallel_for(model.trees.size(), config.threads, grow_one);
    return model;
}

ForestPrediction predict_forest(const ForestModel &model, std::span<const double> x) {
    if (x.size() != model.n_features) {
        throw DimensionError(model.n_features, x.size());
    }
    std::size_t votes = 0;
    double sum = 0.0;
    for (const Tree &tree : model.trees) {
        const double p = tree.predict(x);
        sum += p;
        votes += p >= 0.5 ? 1 : 0;
    }
    ForestPrediction out;
    out.probability = sum / static_cast<double>(model.trees.size());
    out.label = 2 * votes > model.trees.size() ? 1 : 0;
    return out;
}

// ---------------------------------------------------------------------------

void GbmConfig::validate() const {
    if (rounds < 0) {
        throw ConfigError("gbm rounds must be non-negative");
    }
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
        throw ConfigError("gbm learning_rate must lie in (0,1]");
    }
    if (max_depth < 0) {
        throw ConfigError("gbm max_depth must be non-negative");
    }
    if (min_samples_split < 2) {
        throw ConfigError("gbm min_samples_split must be at least 2");
    }
}

nlohmann::json GbmConfig::to_json() const {
    return {{"rounds", rounds},
            {"learning_rate", learning_rate},
            {"max_depth", max_depth},
            {"min_samples_split", min_samples_split}};
}

GbmConfig GbmConfig::from_json(const nlohmann::json &doc) {
    GbmConfig c;
    c.rounds = doc.value("rounds", c.rounds);
    c.learning_rate = doc.value("learning_rate", c.learning_rate);
    c.max_depth = doc.value("max_depth", c.max_depth);
    c.min_samples_split = doc.value("min_samples_split", c.min_samples_split);
    c.validate();
    return c;
}

double log_loss(std::span<const double> probabilities, std::span<const int> labels) {
    if (probabilities.size() != labels.size() || probabilities.empty()) {
        throw std::invalid_argument("log_loss: size mismatch or empty input");
    }
    constexpr double kFloor = 1e-15;
    double sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double p = std::clamp(probabilities[i], kFloor, 1.0 - kFloor);
        sum -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
    }
    return sum / static_cast<double>(labels.size());
}

namespace {

// log-loss evaluated on raw scores to stay exact for saturated probabilities
double score_log_loss(std::span<const double> scores, std::span<const int> labels) {
    double sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        sum += softplus(scores[i]) - static_cast<double>(labels[i]) * scores[i];
    }
    return sum / static_cast<double>(labels.size());
}

} // namespace

BoostedModel train_gbm(const FeatureMatrix &x, std::span<const int> y, const GbmConfig &config,
                       std::string *warning) {
    config.validate();
    check_training_inputs(x, y);

    const std::size_t n = x.rows();
    const double positives = static_cast<double>(std::count(y.begin(), y.end(), 1));
    const double rate = positives / static_cast<double>(n);

    BoostedModel model;
    model.learning_rate = config.learning_rate;
    model.n_features = x.cols();
    if (rate <= 0.0 || rate >= 1.0) {
        model.base_score = rate <= 0.0 ? -kMaxBaseScore : kMaxBaseScore;
        if (warning != nullptr) {
            *warning = "all training labels belong to one class; base score clamped to " +
                       format_double(model.base_score) + " log-odds";
        }
    } else {
        model.base_score = std::clamp(std::log(rate / (1.0 - rate)), -kMaxBaseScore, kMaxBaseScore);
    }

    std::vector<double> scores(n, model.base_score);
    std::vector<double> residuals(n);
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        rows[i] = i;
    }
    model.stage_loss.push_back(score_log_loss(scores, y));

    TreeConfig tree_config;
    tree_config.max_depth = config.max_depth;
    tree_config.min_samples_split = config.min_samples_split;
    tree_config.feature_subsample = FeatureSubsample::all;
    tree_config.criterion = Criterion::squared_error;

    Rng unused(0); // no randomness without feature subsampling
    for (int m = 0; m < config.rounds; ++m) {
        for (std::size_t i = 0; i < n; ++i) {
            residuals[i] = static_cast<double>(y[i]) - sigmoid(scores[i]);
        }
        Tree tree = grow_tree(x, residuals, rows, tree_config, unused);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] += config.learning_rate * tree.predict(x.row(i));
        }
        model.stages.push_back({std::move(tree), config.learning_rate});
        model.stage_loss.push_back(score_log_loss(scores, y));
    }
    return model;
}

double gbm_score(const BoostedModel &model, std::span<const double> x) {
    if (x.size() != model.n_features) {
        throw DimensionError(model.n_features, x.size());
    }
    double score = model.base_score;
    for (const auto &stage : model.stages) {
        score += stage.weight * stage.tree.predict(x);
    }
    return score;
}

double predict_gbm(const BoostedModel &model, std::span<const double> x) {
    return sigmoid(gbm_score(model, x));
}

int classify(double probability, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw std::invalid_argument("classify: threshold outside [0,1]");
    }
    return probability >= threshold ? 1 : 0;
}

// ---------------------------------------------------------------------------

std::string_view model_kind_name(ModelKind kind) {
    switch (kind) {
    case ModelKind::logistic: return "logreg";
    case ModelKind::forest: return "forest";
    case ModelKind::boosted: return "gbm";
    }
    return "logreg";
}

ModelKind parse_model_kind(std::string_view name) {
    if (name == "logreg") {
        return ModelKind::logistic;
    }
    if (name == "forest") {
        return ModelKind::forest;
    }
    if (name == "gbm") {
        return ModelKind::boosted;
    }
    throw ConfigError("unknown model '" + std::string(name) + "' (expected logreg, forest or gbm)");
}

ModelKind ModelFile::kind() const {
    return static_cast<ModelKind>(model.index());
}

std::size_t ModelFile::n_features() const {
    return std::visit(
        [](const auto &m) -> std::size_t {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LinearModel>) {
                return m.weights.size();
            } else {
                return m.n_features;
            }
        },
        model);
}

nlohmann::json ModelFile::to_json() const {
    nlohmann::json doc;
    doc["format_version"] = kFormatVersion;
    doc["model_type"] = std::string(model_kind_name(kind()));
    doc["config"] = config.is_null() ? nlohmann::json::object() : config;
    doc["standardization"] = standardization.to_json();
    doc["feature_options"] = {{"include_loudness", feature_options.include_loudness}};
    doc["feature_names"] = std::vector<std::string>(kFeatureNames.begin(), kFeatureNames.end());

    nlohmann::json params;
    if (const auto *lin = std::get_if<LinearModel>(&model)) {
        params = {{"weights", lin->weights}, {"intercept", lin->intercept}};
    } else if (const auto *forest = std::get_if<ForestModel>(&model)) {
        nlohmann::json trees = nlohmann::json::array();
        for (const auto &t : forest->trees) {
            trees.push_back(t.to_json());
        }
        params = {{"seed", forest->seed},
                  {"n_features", forest->n_features},
                  {"tree_config", forest->config.to_json()},
                  {"trees", std::move(trees)}};
    } else {
        const auto &gbm = std::get<BoostedModel>(model);
        nlohmann::json stages = nlohmann::json::array();
        for (const auto &s : gbm.stages) {
            stages.push_back({{"weight", s.weight}, {"tree", s.tree.to_json()}});
        }
        params = {{"base_score", gbm.base_score},
                  {"learning_rate", gbm.learning_rate},
                  {"n_features", gbm.n_features},
                  {"rounds", gbm.stages.size()},
                  {"stage_loss", gbm.stage_loss},
                  {"stages", std::move(stages)}};
    }
    doc["parameters"] = std::move(params);
    return doc;
}

ModelFile ModelFile::from_json(const nlohmann::json &doc) {
    if (doc.value("format_version", 0) != kFormatVersion) {
        throw SchemaError("unsupported model format version");
    }
    ModelFile file;
    file.config = doc.value("config", nlohmann::json::object());
    file.standardization = StandardizationParams::from_json(doc.at("standardization"));
    if (doc.contains("feature_options")) {
        file.feature_options.include_loudness = doc.at("feature_options").value("include_loudness", true);
    }
    const auto &params = doc.at("parameters");
    switch (parse_model_kind(doc.at("model_type").get<std::string>())) {
    case ModelKind::logistic: {
        LinearModel lin;
        lin.weights = params.at("weights").get<std::vector<double>>();
        lin.intercept = params.at("intercept").get<double>();
        file.model = std::move(lin);
        break;
    }
    case ModelKind::forest: {
        ForestModel forest;
        forest.seed = params.at("seed").get<std::uint64_t>();
        forest.n_features = params.at("n_features").get<std::size_t>();
        forest.config = TreeConfig::from_json(params.at("tree_config"));
        for (const auto &t : params.at("trees")) {
            forest.trees.push_back(Tree::from_json(t));
            if (forest.trees.back().n_features() != forest.n_features) {
                throw SchemaError("forest tree dimensionality differs from the model");
            }
        }
        if (forest.trees.empty()) {
            throw SchemaError("forest model has no trees");
        }
        file.model = std::move(forest);
        break;
    }
    case ModelKind::boosted: {
        BoostedModel gbm;
        gbm.base_score = params.at("base_score").get<double>();
        gbm.learning_rate = params.at("learning_rate").get<double>();
        gbm.n_features = params.at("n_features").get<std::size_t>();
        gbm.stage_loss = params.value("stage_loss", std::vector<double>{});
        for (const auto &s : params.at("stages")) {
            gbm.stages.push_back({Tree::from_json(s.at("tree")), s.at("weight").get<double>()});
        }
        file.model = std::move(gbm);
        break;
    }
    }
    return file;
}

void ModelFile::save(const std::filesystem::path &path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << to_json().dump(1) << '\n';
}

ModelFile ModelFile::load(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MissingArtifactError(path.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception &e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    return from_json(doc);
}

double predict_probability(const ModelParameters &model, std::span<const double> x) {
    if (const auto *lin = std::get_if<LinearModel>(&model)) {
        return predict_logistic(*lin, x);
    }
    if (const auto *forest = std::get_if<ForestModel>(&model)) {
        return predict_forest(*forest, x).probability;
    }
    return predict_gbm(std::get<BoostedModel>(model), x);
}

int predict_label(const ModelParameters &model, std::span<const double> x, double threshold) {
    if (const auto *forest = std::get_if<ForestModel>(&model)) {
        return predict_forest(*forest, x).label;
    }
    return classify(predict_probability(model, x), threshold);
}

} // namespace chartsight
