#include "chartsight/trees.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace chartsight {

void TreeConfig::validate() const {
    if (min_samples_split < 2) {
        throw ConfigError("min_samples_split must be at least 2");
    }
    if (max_depth && *max_depth < 0) {
        throw ConfigError("max_depth must be non-negative");
    }
}

nlohmann::json TreeConfig::to_json() const {
    nlohmann::json doc;
    doc["max_depth"] = max_depth ? nlohmann::json(*max_depth) : nlohmann::json(nullptr);
    doc["min_samples_split"] = min_samples_split;
    doc["feature_subsample"] = feature_subsample == FeatureSubsample::sqrt ? "sqrt" : "all";
    doc["criterion"] = criterion == Criterion::gini ? "gini" : "squared_error";
    doc["rng_seed"] = rng_seed;
    return doc;
}

TreeConfig TreeConfig::from_json(const nlohmann::json &doc) {
    TreeConfig config;
    if (doc.contains("max_depth") && !doc.at("max_depth").is_null()) {
        config.max_depth = doc.at("max_depth").get<int>();
    }
    config.min_samples_split = doc.value("min_samples_split", 2);
    const std::string subsample = doc.value("feature_subsample", "all");
    if (subsample != "all" && subsample != "sqrt") {
        throw ConfigError("feature_subsample must be 'all' or 'sqrt'");
    }
    config.feature_subsample = subsample == "sqrt" ? FeatureSubsample::sqrt : FeatureSubsample::all;
    const std::string criterion = doc.value("criterion", "gini");
    if (criterion != "gini" && criterion != "squared_error") {
        throw ConfigError("criterion must be 'gini' or 'squared_error'");
    }
    config.criterion = criterion == "gini" ? Criterion::gini : Criterion::squared_error;
    config.rng_seed = doc.value("rng_seed", std::uint64_t{0});
    config.validate();
    return config;
}

Tree::Tree(std::vector<TreeNode> nodes, std::size_t n_features) : nodes_(std::move(nodes)), n_features_(n_features) {
    validate();
}

Tree Tree::leaf(double value, double cover, std::size_t n_features) {
    TreeNode node;
    node.value = value;
    node.cover = cover;
    return Tree({node}, n_features);
}

std::size_t Tree::depth() const {
    std::size_t deepest = 0;
    std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        const auto [index, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        const TreeNode &n = nodes_[static_cast<std::size_t>(index)];
        if (!n.is_leaf()) {
            stack.emplace_back(n.left, d + 1);
            stack.emplace_back(n.right, d + 1);
        }
    }
    return deepest;
}

std::size_t Tree::leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode &n) { return n.is_leaf(); }));
}

double Tree::predict(std::span<const double> x) const {
    if (x.size() != n_features_) {
        throw DimensionError(n_features_, x.size());
    }
    const TreeNode *n = &nodes_.front();
    while (!n->is_leaf()) {
        n = &nodes_[static_cast<std::size_t>(x[static_cast<std::size_t>(n->feature)] <= n->threshold ? n->left
                                                                                                       : n->right)];
    }
    return n->value;
}

void Tree::validate() const {
    if (nodes_.empty()) {
        throw Error("tree has no nodes");
    }
    const auto count = static_cast<int>(nodes_.size());
    for (const TreeNode &n : nodes_) {
        if (n.is_leaf()) {
            continue;
        }
        if (static_cast<std::size_t>(n.feature) >= n_features_) {
            throw Error("tree node splits on feature " + std::to_string(n.feature) + " outside dimensionality");
        }
        if (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count) {
            throw Error("tree internal node lacks a valid child");
        }
        const double children = nodes_[static_cast<std::size_t>(n.left)].cover +
                                nodes_[static_cast<std::size_t>(n.right)].cover;
        if (std::fabs(children - n.cover) > 1e-9 * std::max(1.0, n.cover)) {
            throw Error("tree cover mismatch: children do not sum to parent");
        }
    }
}

nlohmann::json Tree::to_json() const {
    nlohmann::json nodes = nlohmann::json::array();
    for (const TreeNode &n : nodes_) {
        if (n.is_leaf()) {
            nodes.push_back({{"value", n.value}, {"cover", n.cover}});
        } else {
            nodes.push_back({{"feature", n.feature},
                             {"threshold", n.threshold},
                             {"cover", n.cover},
                             {"left", n.left},
                             {"right", n.right}});
        }
    }
    return {{"format_version", kFormatVersion}, {"n_features", n_features_}, {"nodes", std::move(nodes)}};
}

Tree Tree::from_json(const nlohmann::json &doc) {
    if (doc.value("format_version", 0) != kFormatVersion) {
        throw SchemaError("unsupported tree format version");
    }
    std::vector<TreeNode> nodes;
    for (const auto &item : doc.at("nodes")) {
        TreeNode n;
        if (!item.contains("cover")) {
            throw SchemaError("tree node lacks cover statistics");
        }
        n.cover = item.at("cover").get<double>();
        if (item.contains("feature")) {
            n.feature = item.at("feature").get<int>();
            n.threshold = item.at("threshold").get<double>();
            n.left = item.at("left").get<int>();
            n.right = item.at("right").get<int>();
        } else {
            n.value = item.at("value").get<double>();
        }
        nodes.push_back(n);
    }
    return Tree(std::move(nodes), doc.at("n_features").get<std::size_t>());
}

double gini(std::span<const int> labels) {
    if (labels.empty()) {
        throw std::invalid_argument("gini: empty label list");
    }
    const auto ones = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    const double p1 = ones / static_cast<double>(labels.size());
    const double p0 = 1.0 - p1;
    return 1.0 - p0 * p0 - p1 * p1;
}

namespace {

struct ValueTarget {
    double value;
    double target;
};

// Weighted child impurity for a candidate partition, scaled by the node size.
double children_cost(Criterion criterion, double left_n, double left_sum, double right_n, double right_sum) {
    if (criterion == Criterion::gini) {
        // n_c * gini_c = 2 * ones * (n_c - ones) / n_c for binary targets
        return 2.0 * left_sum * (left_n - left_sum) / left_n + 2.0 * right_sum * (right_n - right_sum) / right_n;
    }
    // sum of squares is constant across partitions, so only -S^2/n terms differ
    return -(left_sum * left_sum / left_n + right_sum * right_sum / right_n);
}

double parent_cost(Criterion criterion, double n, double sum) {
    if (criterion == Criterion::gini) {
        return 2.0 * sum * (n - sum) / n;
    }
    return -(sum * sum / n);
}

std::optional<SplitCandidate> best_split_impl(const FeatureMatrix &x, std::span<const double> targets,
                                              std::span<const std::size_t> rows,
                                              std::span<const std::size_t> features, Criterion criterion,
                                              std::vector<ValueTarget> &buffer) {
    const std::size_t n = rows.size();
    if (n < 2) {
        return std::nullopt;
    }
    double total = 0.0;
    for (std::size_t r : rows) {
        total += targets[r];
    }
    const double dn = static_cast<double>(n);
    const double parent = parent_cost(criterion, dn, total);

    std::optional<SplitCandidate> best;
    buffer.resize(n);
    for (std::size_t f : features) {
        for (std::size_t i = 0; i < n; ++i) {
            buffer[i] = {x(rows[i], f), targets[rows[i]]};
        }
        std::sort(buffer.begin(), buffer.end(),
                  [](const ValueTarget &a, const ValueTarget &b) { return a.value < b.value; });
        if (buffer.front().value == buffer.back().value) {
            continue;
        }
        double left_sum = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            left_sum += buffer[i].target;
            if (buffer[i].value == buffer[i + 1].value) {
                continue;
            }
            const double left_n = static_cast<double>(i + 1);
            const double right_n = dn - left_n;
            const double decrease =
                (parent - children_cost(criterion, left_n, left_sum, right_n, total - left_sum)) / dn;
            if (decrease <= kSplitTolerance) {
                continue;
            }
            if (!best || decrease > best->impurity_decrease + kSplitTolerance) {
                double threshold = 0.5 * (buffer[i].value + buffer[i + 1].value);
                if (!(threshold < buffer[i + 1].value)) {
                    threshold = buffer[i].value;
                }
                best = SplitCandidate{f, threshold, decrease};
            }
        }
    }
    return best;
}

class TreeBuilder {
  public:
    TreeBuilder(const FeatureMatrix &x, std::span<const double> targets, const TreeConfig &config, Rng &rng)
        : x_(x), targets_(targets), config_(config), rng_(rng), all_features_(x.cols()) {
        std::iota(all_features_.begin(), all_features_.end(), std::size_t{0});
        if (config.feature_subsample == FeatureSubsample::sqrt) {
            draw_count_ = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x.cols()))));
        } else {
            draw_count_ = x.cols();
        }
    }

    Tree build(std::vector<std::size_t> rows) {
        rows_ = std::move(rows);
        grow(0, rows_.size(), 0);
        return Tree(std::move(nodes_), x_.cols());
    }

  private:
    int grow(std::size_t begin, std::size_t end, int depth) {
        const auto index = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        const std::size_t count = end - begin;
        double sum = 0.0;
        bool pure = true;
        const double first = targets_[rows_[begin]];
        for (std::size_t i = begin; i < end; ++i) {
            const double t = targets_[rows_[i]];
            sum += t;
            pure = pure && t == first;
        }
        nodes_[static_cast<std::size_t>(index)].cover = static_cast<double>(count);
        nodes_[static_cast<std::size_t>(index)].value = sum / static_cast<double>(count);

        const bool depth_reached = config_.max_depth && depth >= *config_.max_depth;
        if (pure || depth_reached || count < static_cast<std::size_t>(config_.min_samples_split)) {
            return index;
        }

        const std::span<const std::size_t> node_rows(rows_.data() + begin, count);
        std::optional<SplitCandidate> split;
        if (draw_count_ >= all_features_.size()) {
            split = best_split_impl(x_, targets_, node_rows, all_features_, config_.criterion, buffer_);
        } else {
            std::vector<std::size_t> order = all_features_;
            rng_.shuffle(std::span<std::size_t>(order));
            std::vector<std::size_t> drawn(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(draw_count_));
            std::sort(drawn.begin(), drawn.end());
            split = best_split_impl(x_, targets_, node_rows, drawn, config_.criterion, buffer_);
            if (!split) {
                // every drawn feature was constant or useless here; fall back to the rest
                std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(draw_count_), order.end());
                std::sort(rest.begin(), rest.end());
                split = best_split_impl(x_, targets_, node_rows, rest, config_.criterion, buffer_);
            }
        }
        if (!split) {
            return index;
        }

        const auto mid = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                               rows_.begin() + static_cast<std::ptrdiff_t>(end),
                                               [&](std::size_t r) { return x_(r, split->feature) <= split->threshold; });
        const auto middle = static_cast<std::size_t>(mid - rows_.begin());
        nodes_[static_cast<std::size_t>(index)].feature = static_cast<int>(split->feature);
        nodes_[static_cast<std::size_t>(index)].threshold = split->threshold;
        const int left = grow(begin, middle, depth + 1);
        const int right = grow(middle, end, depth + 1);
        nodes_[static_cast<std::size_t>(index)].left = left;
        nodes_[static_cast<std::size_t>(index)].right = right;
        return index;
    }

    const FeatureMatrix &x_;
    std::span<const double> targets_;
    const TreeConfig &config_;
    Rng &rng_;
    std::vector<std::size_t> all_features_;
    std::size_t draw_count_ = 0;
    std::vector<std::size_t> rows_;
    std::vector<TreeNode> nodes_;
    std::vector<ValueTarget> buffer_;
};

} // namespace

std::optional<SplitCandidate> best_split(const FeatureMatrix &x, std::span<const double> targets,
                                         std::span<const std::size_t> rows,
                                         std::span<const std::size_t> candidate_features, Criterion criterion) {
    std::vector<std::size_t> features(candidate_features.begin(), candidate_features.end());
    std::sort(features.begin(), features.end());
    features.erase(std::unique(features.begin(), features.end()), features.end());
    for (std::size_t f : features) {
        if (f >= x.cols()) {
            throw DimensionError(x.cols(), f + 1);
        }
    }
    std::vector<ValueTarget> buffer;
    return best_split_impl(x, targets, rows, features, criterion, buffer);
}

Tree grow_tree(const FeatureMatrix &x, std::span<const double> targets, std::span<const std::size_t> rows,
               const TreeConfig &config, Rng &rng) {
    config.validate();
    if (rows.empty()) {
        throw std::invalid_argument("grow_tree: no rows");
    }
    if (targets.size() != x.rows()) {
        throw DimensionError(x.rows(), targets.size());
    }
    TreeBuilder builder(x, targets, config, rng);
    return builder.build(std::vector<std::size_t>(rows.begin(), rows.end()));
}

double predict_tree(const Tree &tree, std::span<const double> x) {
    return tree.predict(x);
}

} // namespace chartsight
