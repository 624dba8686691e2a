#pragma once

#include "chartsight/common.hpp"
#include "chartsight/matrix.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace chartsight {

enum class Criterion { gini, squared_error };
enum class FeatureSubsample { all, sqrt };

struct TreeConfig {
    std::optional<int> max_depth; // nullopt grows until nodes are pure or too small
    int min_samples_split = 2;
    FeatureSubsample feature_subsample = FeatureSubsample::all;
    Criterion criterion = Criterion::gini;
    std::uint64_t rng_seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static TreeConfig from_json(const nlohmann::json &doc);
};

/// Internal nodes route x[feature] <= threshold to `left`. Leaves have
/// feature == -1. `cover` is the number of training rows (with bootstrap
/// multiplicity) that reached the node.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    double cover = 0.0;

    bool is_leaf() const { return feature < 0; }
};

class Tree {
  public:
    static constexpr int kFormatVersion = 1;

    Tree() = default;
    Tree(std::vector<TreeNode> nodes, std::size_t n_features);

    static Tree leaf(double value, double cover, std::size_t n_features);

    const std::vector<TreeNode> &nodes() const { return nodes_; }
    const TreeNode &node(std::size_t i) const { return nodes_[i]; }
    std::size_t n_features() const { return n_features_; }
    std::size_t depth() const;
    std::size_t leaf_count() const;

    /// Throws DimensionError when x has the wrong length.
    double predict(std::span<const double> x) const;

    /// Structural checks: child indices, both children present, covers add up.
    void validate() const;

    nlohmann::json to_json() const;
    static Tree from_json(const nlohmann::json &doc);

  private:
    std::vector<TreeNode> nodes_;
    std::size_t n_features_ = 0;
};

/// 1 - p0^2 - p1^2 over the class shares of a binary label list.
double gini(std::span<const int> labels);

struct SplitCandidate {
    std::size_t feature = 0;
    double threshold = 0.0;
    double impurity_decrease = 0.0;
};

/// Splits whose weighted impurity decrease does not exceed this are ignored;
/// it is also the tolerance under which two candidates count as tied.
inline constexpr double kSplitTolerance = 1e-12;

/// Best (feature, midpoint threshold) over the candidate features for the
/// given rows. Ties go to the lowest feature index, then the lowest
/// threshold. nullopt when no split decreases impurity.
std::optional<SplitCandidate> best_split(const FeatureMatrix &x, std::span<const double> targets,
                                         std::span<const std::size_t> rows,
                                         std::span<const std::size_t> candidate_features, Criterion criterion);

/// CART growth over `rows` (indices into x; repeats allowed). Leaves store
/// the mean target, i.e. the class-1 fraction under gini.
Tree grow_tree(const FeatureMatrix &x, std::span<const double> targets, std::span<const std::size_t> rows,
               const TreeConfig &config, Rng &rng);

double predict_tree(const Tree &tree, std::span<const double> x);

} // namespace chartsight
