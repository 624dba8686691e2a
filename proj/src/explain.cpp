#include "chartsight/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace chartsight {

// ---------------------------------------------------------------------------
// KDE

double silverman_bandwidth(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n < 2) {
        throw std::invalid_argument("silverman_bandwidth: at least two samples required");
    }
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
    double squares = 0.0;
    for (double s : samples) {
        squares += (s - mean) * (s - mean);
    }
    const double sd = std::sqrt(squares / static_cast<double>(n - 1));
    if (!(sd > 0.0)) {
        throw std::invalid_argument("silverman_bandwidth: samples have zero variance; pass an explicit bandwidth");
    }
    return 1.06 * sd * std::pow(static_cast<double>(n), -0.2);
}

KdeCurve kde(std::span<const double> samples, std::optional<double> bandwidth, std::span<const double> grid) {
    if (samples.empty()) {
        throw std::invalid_argument("kde: no samples");
    }
    if (bandwidth && !(*bandwidth > 0.0)) {
        throw std::invalid_argument("kde: bandwidth must be positive");
    }
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) {
            throw std::invalid_argument("kde: grid must be strictly increasing");
        }
    }
    KdeCurve curve;
    curve.bandwidth = bandwidth ? *bandwidth : silverman_bandwidth(samples);
    curve.sample_count = samples.size();
    curve.grid.assign(grid.begin(), grid.end());
    curve.density.resize(grid.size());

    const double h = curve.bandwidth;
    const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double sum = 0.0;
        for (double s : samples) {
            const double u = (grid[g] - s) / h;
            sum += std::exp(-0.5 * u * u);
        }
        curve.density[g] = norm * sum;
    }
    return curve;
}

std::vector<double> linspace(double lo, double hi, std::size_t points) {
    if (points == 0) {
        return {};
    }
    if (points == 1) {
        return {lo};
    }
    std::vector<double> out(points);
    const double step = (hi - lo) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) {
        out[i] = lo + step * static_cast<double>(i);
    }
    out.back() = hi;
    return out;
}

std::vector<double> kde_grid(std::span<const double> samples, double bandwidth, std::size_t points) {
    if (samples.empty()) {
        throw std::invalid_argument("kde_grid: no samples");
    }
    const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
    return linspace(*lo - 4.0 * bandwidth, *hi + 4.0 * bandwidth, points);
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("trapezoid: size mismatch");
    }
    double area = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        area += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
    }
    return area;
}

// ---------------------------------------------------------------------------
// TreeSHAP
//
// The recursion keeps, for the current root-to-node path, the unique features
// split on so far together with the fraction of "feature absent" paths
// (zero_fraction, cover ratio) and "feature present" paths (one_fraction, 1 if
// x follows this branch). pweight holds the permutation weights of subsets of
// each size; extend/unwind add or remove one feature from that polynomial.

namespace {

struct PathElement {
    int feature = -1;
    double zero_fraction = 0.0;
    double one_fraction = 0.0;
    double pweight = 0.0;
};

void extend_path(PathElement *path, int depth, double zero_fraction, double one_fraction, int feature) {
    path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
    for (int i = depth - 1; i >= 0; --i) {
        path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) / static_cast<double>(depth + 1);
        path[i].pweight = zero_fraction * path[i].pweight * (depth - i) / static_cast<double>(depth + 1);
    }
}

void unwind_path(PathElement *path, int depth, int index) {
    const double one_fraction = path[index].one_fraction;
    const double zero_fraction = path[index].zero_fraction;
    double next_one_portion = path[depth].pweight;
    for (int i = depth - 1; i >= 0; --i) {
        if (one_fraction != 0.0) {
            const double tmp = path[i].pweight;
            path[i].pweight = next_one_portion * (depth + 1) / ((i + 1) * one_fraction);
            next_one_portion = tmp - path[i].pweight * zero_fraction * (depth - i) / static_cast<double>(depth + 1);
        } else {
            path[i].pweight = path[i].pweight * (depth + 1) / (zero_fraction * (depth - i));
        }
    }
    for (int i = index; i < depth; ++i) {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

// Total permutation weight of the path with element `index` removed.
double unwound_path_sum(const PathElement *path, int depth, int index) {
    const double one_fraction = path[index].one_fraction;
    const double zero_fraction = path[index].zero_fraction;
    double next_one_portion = path[depth].pweight;
    double total = 0.0;
    for (int i = depth - 1; i >= 0; --i) {
        if (one_fraction != 0.0) {
            const double tmp = next_one_portion * (depth + 1) / ((i + 1) * one_fraction);
            total += tmp;
            next_one_portion = path[i].pweight - tmp * zero_fraction * (depth - i) / static_cast<double>(depth + 1);
        } else if (zero_fraction != 0.0) {
            total += path[i].pweight / zero_fraction / ((depth - i) / static_cast<double>(depth + 1));
        }
    }
    return total;
}

class TreeShapRecursion {
  public:
    TreeShapRecursion(const Tree &tree, std::span<const double> x, std::span<double> phi, double scale)
        : tree_(tree), x_(x), phi_(phi), scale_(scale) {
        const auto d = static_cast<std::size_t>(tree.depth());
        paths_.resize((d + 2) * (d + 3) / 2);
    }

    void run() { recurse(0, 0, paths_.data(), 1.0, 1.0, -1); }

  private:
    void recurse(int node_index, int depth, PathElement *parent_path, double parent_zero, double parent_one,
                 int parent_feature) {
        PathElement *path = parent_path + depth + 1;
        std::copy(parent_path, parent_path + depth + 1, path);
        extend_path(path, depth, parent_zero, parent_one, parent_feature);

        const TreeNode &node = tree_.node(static_cast<std::size_t>(node_index));
        if (node.is_leaf()) {
            for (int i = 1; i <= depth; ++i) {
                const double w = unwound_path_sum(path, depth, i);
                const PathElement &el = path[i];
                phi_[static_cast<std::size_t>(el.feature)] +=
                    w * (el.one_fraction - el.zero_fraction) * node.value * scale_;
            }
            return;
        }

        const bool go_left = x_[static_cast<std::size_t>(node.feature)] <= node.threshold;
        const int hot = go_left ? node.left : node.right;
        const int cold = go_left ? node.right : node.left;
        const double hot_zero = tree_.node(static_cast<std::size_t>(hot)).cover / node.cover;
        const double cold_zero = tree_.node(static_cast<std::size_t>(cold)).cover / node.cover;
        double incoming_zero = 1.0;
        double incoming_one = 1.0;

        // a feature seen earlier on the path is merged rather than repeated
        int index = 0;
        for (; index <= depth; ++index) {
            if (path[index].feature == node.feature) {
                break;
            }
        }
        if (index != depth + 1) {
            incoming_zero = path[index].zero_fraction;
            incoming_one = path[index].one_fraction;
            unwind_path(path, depth, index);
            --depth;
        }
        recurse(hot, depth + 1, path, hot_zero * incoming_zero, incoming_one, node.feature);
        recurse(cold, depth + 1, path, cold_zero * incoming_zero, 0.0, node.feature);
    }

    const Tree &tree_;
    std::span<const double> x_;
    std::span<double> phi_;
    double scale_;
    std::vector<PathElement> paths_;
};

double expected_value(const Tree &tree) {
    const double root_cover = tree.node(0).cover;
    double sum = 0.0;
    for (const TreeNode &n : tree.nodes()) {
        if (n.is_leaf()) {
            sum += n.value * n.cover;
        }
    }
    return sum / root_cover;
}

void require_cover(const Tree &tree) {
    for (const TreeNode &n : tree.nodes()) {
        if (!(n.cover > 0.0)) {
            throw Error("tree_shap: tree lacks cover statistics");
        }
    }
}

void accumulate_tree(const Tree &tree, std::span<const double> x, std::span<double> phi, double scale) {
    if (x.size() != tree.n_features()) {
        throw DimensionError(tree.n_features(), x.size());
    }
    require_cover(tree);
    TreeShapRecursion recursion(tree, x, phi, scale);
    recursion.run();
}

} // namespace

ShapValues tree_shap(const Tree &tree, std::span<const double> x) {
    ShapValues out;
    out.values.assign(tree.n_features(), 0.0);
    accumulate_tree(tree, x, out.values, 1.0);
    out.base_value = expected_value(tree);
    return out;
}

ShapValues tree_shap(const ForestModel &model, std::span<const double> x) {
    if (x.size() != model.n_features) {
        throw DimensionError(model.n_features, x.size());
    }
    ShapValues out;
    out.values.assign(model.n_features, 0.0);
    const double scale = 1.0 / static_cast<double>(model.trees.size());
    for (const Tree &tree : model.trees) {
        accumulate_tree(tree, x, out.values, scale);
        out.base_value += expected_value(tree) * scale;
    }
    return out;
}

ShapValues tree_shap(const BoostedModel &model, std::span<const double> x) {
    if (x.size() != model.n_features) {
        throw DimensionError(model.n_features, x.size());
    }
    ShapValues out;
    out.values.assign(model.n_features, 0.0);
    out.base_value = model.base_score;
    for (const auto &stage : model.stages) {
        accumulate_tree(stage.tree, x, out.values, stage.weight);
        out.base_value += stage.weight * expected_value(stage.tree);
    }
    return out;
}

ShapSummary shap_summary(const ModelParameters &model, const FeatureMatrix &data, unsigned threads) {
    if (std::holds_alternative<LinearModel>(model)) {
        throw ConfigError("shap_summary requires a tree model (forest or gbm)");
    }
    const std::size_t rows = data.rows();
    const std::size_t cols = data.cols();
    ShapSummary summary;
    summary.feature_values = data;
    summary.shap = FeatureMatrix(rows, cols);
    summary.output = std::holds_alternative<ForestModel>(model) ? ShapOutput::probability : ShapOutput::log_odds;

    std::vector<double> bases(rows, 0.0);
    parallel_for(rows, threads, [&](std::size_t i) {
        const ShapValues v = std::holds_alternative<ForestModel>(model)
                                 ? tree_shap(std::get<ForestModel>(model), data.row(i))
                                 : tree_shap(std::get<BoostedModel>(model), data.row(i));
        std::copy(v.values.begin(), v.values.end(), summary.shap.row(i).begin());
        bases[i] = v.base_value;
    });
    if (rows > 0) {
        summary.base_value = bases.front();
    } else if (const auto *forest = std::get_if<ForestModel>(&model)) {
        summary.base_value = tree_shap(*forest, std::vector<double>(cols, 0.0)).base_value;
    } else {
        summary.base_value = tree_shap(std::get<BoostedModel>(model), std::vector<double>(cols, 0.0)).base_value;
    }

    summary.mean_abs.assign(cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            summary.mean_abs[j] += std::fabs(summary.shap(i, j));
        }
    }
    if (rows > 0) {
        for (double &m : summary.mean_abs) {
            m /= static_cast<double>(rows);
        }
    }
    summary.ranking.resize(cols);
    std::iota(summary.ranking.begin(), summary.ranking.end(), std::size_t{0});
    std::stable_sort(summary.ranking.begin(), summary.ranking.end(),
                     [&](std::size_t a, std::size_t b) { return summary.mean_abs[a] > summary.mean_abs[b]; });
    return summary;
}

// ---------------------------------------------------------------------------
// PDP

PdpCurve pdp(const ModelParameters &model, const FeatureMatrix &data, std::size_t feature_index,
             std::span<const double> grid, unsigned threads) {
    if (grid.empty()) {
        throw std::invalid_argument("pdp: empty grid");
    }
    if (data.rows() == 0) {
        throw std::invalid_argument("pdp: empty dataset");
    }
    if (feature_index >= data.cols()) {
        throw DimensionError(data.cols(), feature_index + 1);
    }
    PdpCurve curve;
    curve.feature_index = feature_index;
    curve.grid.assign(grid.begin(), grid.end());
    curve.mean_prediction.assign(grid.size(), 0.0);
    parallel_for(grid.size(), threads, [&](std::size_t g) {
        std::vector<double> row(data.cols());
        double sum = 0.0;
        for (std::size_t i = 0; i < data.rows(); ++i) {
            const auto source = data.row(i);
            std::copy(source.begin(), source.end(), row.begin());
            row[feature_index] = grid[g];
            sum += predict_probability(model, row);
        }
        curve.mean_prediction[g] = sum / static_cast<double>(data.rows());
    });
    return curve;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        throw std::invalid_argument("quantile: no values");
    }
    std::sort(values.begin(), values.end());
    const double position = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
    const auto lower = static_cast<std::size_t>(std::floor(position));
    const std::size_t upper = std::min(lower + 1, values.size() - 1);
    const double frac = position - static_cast<double>(lower);
    return values[lower] + frac * (values[upper] - values[lower]);
}

std::vector<double> pdp_grid(const FeatureMatrix &data, std::size_t feature_index, std::size_t points) {
    std::vector<double> column = data.column(feature_index);
    const double lo = quantile(column, 0.01);
    const double hi = quantile(column, 0.99);
    if (hi > lo) {
        return linspace(lo, hi, points);
    }
    std::sort(column.begin(), column.end());
    column.erase(std::unique(column.begin(), column.end()), column.end());
    if (column.size() > points) {
        column.resize(points);
    }
    return column;
}

// ---------------------------------------------------------------------------

MonthlyInclusion monthly_inclusion(std::span<const LabeledTrack> labeled) {
    MonthlyInclusion out;
    for (const auto &row : labeled) {
        if (row.track.release_date.month_imputed()) {
            ++out.excluded_month_imputed;
            continue;
        }
        auto &slot = out.months.at(static_cast<std::size_t>(row.track.release_date.month - 1));
        ++slot.released;
        slot.charted += row.charted ? 1 : 0;
    }
    for (auto &slot : out.months) {
        if (slot.released > 0) {
            slot.share = static_cast<double>(slot.charted) / static_cast<double>(slot.released);
        }
    }
    return out;
}

} // namespace chartsight
