// Acceptance runner: one PASS/FAIL line per criterion. argv[1] is the CLI binary.
#include "chartsight/evaluate.hpp"
#include "chartsight/explain.hpp"
#include "chartsight/features.hpp"
#include "chartsight/linkage.hpp"
#include "chartsight/models.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <numbers>
#include <sstream>

using namespace chartsight;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string &what) {
        if (!ok) {
            if (pass) detail = what;
            pass = false;
        }
    }
};

std::string slurp(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string shell_quote(const fs::path &p) { return "'" + p.string() + "'"; }

std::vector<std::size_t> iota_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

fs::path g_cli;

// -- criteria ---------------------------------------------------------------

Outcome property_suite() {
    Outcome o;
    for (int v = 0; v < 12; ++v) {
        const auto [c, s] = encode_cyclic(v, 12);
        o.require(std::fabs(c * c + s * s - 1.0) <= 1e-12, "cyclic norm");
    }
    for (Genre g : kGenres) {
        const auto e = encode_genre(g);
        o.require(std::accumulate(e.begin(), e.end(), 0.0) == 1.0, "genre one-hot sum");
    }
    Rng rng(1);
    std::vector<TrackRecord> train;
    for (int i = 0; i < 5000; ++i) {
        auto t = test_support::track(std::to_string(i));
        t.popularity = std::round(rng.uniform(0, 100));
        t.duration_ms = std::round(rng.normal(210000, 50000));
        train.push_back(t);
    }
    const auto params = fit_standardizer(train);
    double mp = 0, md = 0;
    for (const auto &t : train) {
        const auto x = assemble(t, params);
        mp += x[feature::popularity_z];
        md += x[feature::duration_z];
    }
    mp /= 5000.0;
    md /= 5000.0;
    double vp = 0, vd = 0;
    for (const auto &t : train) {
        const auto x = assemble(t, params);
        vp += (x[feature::popularity_z] - mp) * (x[feature::popularity_z] - mp);
        vd += (x[feature::duration_z] - md) * (x[feature::duration_z] - md);
    }
    o.require(std::fabs(mp) <= 1e-9 && std::fabs(md) <= 1e-9, "z-score mean");
    o.require(std::fabs(vp / 5000.0 - 1) <= 1e-9 && std::fabs(vd / 5000.0 - 1) <= 1e-9, "z-score variance");

    static const std::vector<std::string> pieces = {"a", "Z", "é", "Ñ", "ß", " ", "\t", "-", "–", "(", ")", "[",
                                                    "]", ",", "'", "!", "7", "İ", "ﬁ", "Å", "remix", "Radio Edit",
                                                    "(Live Version)", " - ", "x́", "ά", "Ω", "²"};
    const TextNormalizer normalizer;
    Rng fuzz(2);
    for (int i = 0; i < 10000; ++i) {
        std::string s;
        for (std::size_t k = 0, len = 1 + fuzz.below(12); k < len; ++k) s += pieces[fuzz.below(pieces.size())];
        const std::string once = normalizer(s);
        o.require(normalizer(once) == once, "normalize idempotence on \"" + s + "\"");
    }
    return o;
}

Outcome optimization_checks(const fs::path &demo_dir) {
    Outcome o;
    Rng rng(3);
    FeatureMatrix x(6);
    std::vector<int> y;
    for (int i = 0; i < 200; ++i) {
        std::vector<double> row(6);
        for (auto &v : row) v = rng.normal();
        x.push_row(row);
        y.push_back(row[0] + rng.normal() > 0 ? 1 : 0);
    }
    for (int trial = 0; trial < 10; ++trial) {
        LinearModel m;
        for (int j = 0; j < 6; ++j) m.weights.push_back(rng.normal());
        m.intercept = rng.normal();
        const LinearModel g = logistic_gradient(m, x, y, 1e-4);
        const auto numeric = oracle::numeric_logistic_gradient(m, x, y, 1e-4);
        for (std::size_t j = 0; j <= 6; ++j) {
            const double analytic = j < 6 ? g.weights[j] : g.intercept;
            o.require(std::fabs(analytic - numeric[j]) / std::max(1.0, std::fabs(numeric[j])) <= 1e-5,
                      "gradient component " + std::to_string(j));
        }
    }

    const ModelFile gbm = ModelFile::load(demo_dir / "model_gbm.json");
    const auto &boosted = std::get<BoostedModel>(gbm.model);
    o.require(boosted.stages.size() == 300, "demo GBM does not have 300 stages");
    for (std::size_t m = 1; m < boosted.stage_loss.size(); ++m) {
        o.require(boosted.stage_loss[m] <= boosted.stage_loss[m - 1] + 1e-12,
                  "training loss rose at stage " + std::to_string(m));
    }
    return o;
}

Outcome oracle_equivalence(const fs::path &demo_dir) {
    Outcome o;
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(49);
        const std::size_t d = 1 + rng.below(4);
        FeatureMatrix x(d);
        std::vector<double> y;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> row(d);
            for (auto &v : row) v = static_cast<double>(rng.below(8));
            x.push_row(row);
            y.push_back(static_cast<double>(rng.below(2)));
        }
        std::vector<std::size_t> features(d);
        std::iota(features.begin(), features.end(), std::size_t{0});
        const auto got = best_split(x, y, iota_rows(n), features, Criterion::gini);
        const auto want = oracle::exhaustive_split(x, y, Criterion::gini);
        const bool same = got.has_value() == want.has_value() &&
                          (!got || (got->feature == want->feature && got->threshold == want->threshold &&
                                    std::fabs(got->impurity_decrease - want->impurity_decrease) <= 1e-12));
        o.require(same, "best_split case " + std::to_string(trial));
    }

    FeatureMatrix x(8);
    std::vector<int> y;
    for (int i = 0; i < 300; ++i) {
        std::vector<double> row(8);
        for (auto &v : row) v = std::round(rng.uniform(0, 4));
        x.push_row(row);
        y.push_back(row[0] - row[1] + rng.normal() > 0 ? 1 : 0);
    }
    ForestConfig fc;
    fc.n_trees = 5;
    fc.tree.max_depth = 6;
    const ForestModel forest = train_forest(x, y, fc);
    std::vector<const Tree *> trees;
    for (const auto &t : forest.trees) trees.push_back(&t);
    const std::vector<double> weights(trees.size(), 1.0 / static_cast<double>(trees.size()));
    for (std::size_t i = 0; i < 20; ++i) {
        const auto row = x.row(i);
        const std::vector<double> xi(row.begin(), row.end());
        const ShapValues got = tree_shap(forest, xi);
        const auto want = oracle::brute_force_shap(trees, weights, xi);
        for (std::size_t j = 0; j < 8; ++j) {
            o.require(std::fabs(got.values[j] - want[j]) <= 1e-9, "forest shap vs brute force");
        }
        o.require(std::fabs(got.base_value - want[8]) <= 1e-9, "forest shap base value");
    }

    // local accuracy on the demo models
    const LabeledMatrix validation = read_features(demo_dir / "validation_features.csv");
    for (const char *name : {"forest", "gbm"}) {
        const ModelFile file = ModelFile::load(demo_dir / (std::string("model_") + name + ".json"));
        for (std::size_t i = 0; i < 100 && i < validation.size(); ++i) {
            const auto row = validation.features.row(i);
            const ShapValues s = std::holds_alternative<ForestModel>(file.model)
                                     ? tree_shap(std::get<ForestModel>(file.model), row)
                                     : tree_shap(std::get<BoostedModel>(file.model), row);
            double total = std::accumulate(s.values.begin(), s.values.end(), s.base_value);
            if (std::holds_alternative<BoostedModel>(file.model)) total = sigmoid(total);
            o.require(std::fabs(total - predict_probability(file.model, row)) <= 1e-9,
                      std::string("local accuracy, ") + name);
        }
    }
    return o;
}

Outcome kde_checks() {
    Outcome o;
    Rng rng(5);
    std::vector<double> samples;
    for (int i = 0; i < 1000; ++i) samples.push_back(rng.bernoulli(0.3) ? rng.normal(-2, 0.5) : rng.normal(3, 1.5));
    const double h = silverman_bandwidth(samples);
    const auto grid = kde_grid(samples, h, 4096);
    const KdeCurve curve = kde(samples, std::nullopt, grid);
    o.require(std::fabs(trapezoid(curve.grid, curve.density) - 1.0) <= 1e-3, "integral");
    const std::vector<double> at = {0.0};
    o.require(std::fabs(kde(at, 1.0, at).density[0] - 1.0 / std::sqrt(2.0 * std::numbers::pi)) <= 1e-9,
              "single kernel");
    return o;
}

Outcome metric_identities() {
    Outcome o;
    Rng rng(6);
    std::vector<int> pred, label;
    for (int i = 0; i < 1000; ++i) {
        pred.push_back(static_cast<int>(rng.below(2)));
        label.push_back(i < 500 ? 1 : 0);
    }
    const ConfusionMatrix cm = confusion(pred, label);
    const ConfusionMatrix naive = oracle::count_confusion(pred, label);
    o.require(cm == naive, "confusion counts");
    const ClassificationReport r = metrics(cm);
    const double tp = static_cast<double>(naive.tp), fp = static_cast<double>(naive.fp);
    const double fn = static_cast<double>(naive.fn), tn = static_cast<double>(naive.tn);
    const double precision = tp / (tp + fp), recall = tp / (tp + fn);
    o.require(r.accuracy == (tp + tn) / 1000.0, "accuracy");
    o.require(r.classes[1].precision == precision, "precision");
    o.require(r.classes[1].recall == recall, "recall");
    o.require(r.classes[1].f1 == 2 * precision * recall / (precision + recall), "f1");
    const auto norm = normalized_confusion(cm);
    for (const auto &row : norm) o.require(std::fabs(row[0] + row[1] - 1.0) <= 1e-12, "normalized row sum");
    const double micro = (r.classes[0].recall * static_cast<double>(r.classes[0].support) +
                          r.classes[1].recall * static_cast<double>(r.classes[1].support)) /
                         static_cast<double>(r.total_support);
    o.require(std::fabs(micro - r.accuracy) <= 1e-12, "micro recall");
    return o;
}

Outcome end_to_end(const fs::path &demo_dir, double seconds, int status) {
    Outcome o;
    o.require(status == 0, "demo exited with status " + std::to_string(status));
    if (status != 0) return o;
    const json dataset = json::parse(slurp(demo_dir / "dataset.json"));
    std::ostringstream detail;
    o.require(dataset.at("dataset_size").get<std::size_t>() == 7180, "dataset size " + dataset.at("dataset_size").dump());
    for (const char *name : {"logreg", "forest", "gbm"}) {
        const double acc = json::parse(slurp(demo_dir / (std::string("report_") + name + ".json"))).at("accuracy");
        detail << name << " " << acc << ", ";
        o.require(acc >= 0.85, std::string(name) + " accuracy " + std::to_string(acc));
    }
    for (const char *name : {"forest", "gbm"}) {
        const json shap = json::parse(slurp(demo_dir / (std::string("shap_") + name + ".json")));
        const std::string top = shap.at("ranking").at(0).at("feature");
        detail << name << " top " << top << ", ";
        o.require(top == "popularity_z", std::string(name) + " SHAP ranks " + top + " first");
    }
    detail << seconds << " s";
    o.require(seconds < 60.0, "runtime " + std::to_string(seconds) + " s");
    if (o.pass) o.detail = detail.str();
    return o;
}

Outcome determinism(const fs::path &a, const fs::path &b, int status) {
    Outcome o;
    o.require(status == 0, "second demo run failed");
    std::size_t compared = 0;
    for (const auto &entry : fs::directory_iterator(a)) {
        const std::string name = entry.path().filename().string();
        const bool relevant = name.rfind("report", 0) == 0 || name.rfind("model_", 0) == 0;
        if (!entry.is_regular_file() || !relevant) continue;
        ++compared;
        o.require(fs::exists(b / name) && slurp(entry.path()) == slurp(b / name), name + " differs");
    }
    o.require(compared >= 8, "expected report and model files were missing");
    if (o.pass) o.detail = std::to_string(compared) + " files identical";
    return o;
}

/// Runs on the user's catalog and archive; nullopt when they are not provided.
std::optional<Outcome> soft_reproduction(const fs::path &work) {
    const char *catalog = std::getenv("CHARTSIGHT_CATALOG");
    const char *archive = std::getenv("CHARTSIGHT_ARCHIVE");
    if (catalog == nullptr || archive == nullptr) return std::nullopt;
    const char *columns = std::getenv("CHARTSIGHT_CATALOG_COLUMNS");
    json config = {{"catalog", fs::absolute(catalog).string()},
                   {"archive", fs::absolute(archive).string()},
                   {"catalog_columns", columns != nullptr ? columns : "spotify_export"},
                   {"out", (work / "out").string()}};
    const fs::path config_path = work / "config.json";
    std::ofstream(config_path) << config.dump(2);
    Outcome o;
    for (const char *step : {"ingest", "link", "split", "featurize", "train", "evaluate", "explain months"}) {
        const std::string cmd = shell_quote(g_cli) + " --config " + shell_quote(config_path) + " " + step + " > " +
                                shell_quote(work / "soft.log") + " 2>&1";
        if (std::system(cmd.c_str()) != 0) {
            o.require(false, std::string("step ") + step + " failed; see " + (work / "soft.log").string());
            return o;
        }
    }
    const fs::path out = work / "out";
    std::ostringstream detail;
    const std::pair<const char *, double> targets[] = {{"logreg", 0.900}, {"forest", 0.904}, {"gbm", 0.903}};
    for (const auto &[name, target] : targets) {
        const json r = json::parse(slurp(out / (std::string("report_") + name + ".json")));
        const double acc = r.at("accuracy");
        detail << name << " " << acc << ", ";
        o.require(std::fabs(acc - target) <= 0.03, std::string(name) + " accuracy " + std::to_string(acc));
        if (std::string(name) != "gbm") {
            const double recall = r.at("classes").at("charting").at("recall");
            o.require(recall >= 0.95, std::string(name) + " charting recall " + std::to_string(recall));
        }
    }
    const json months = json::parse(slurp(out / "monthly_inclusion.json")).at("months");
    const json jan = months.at(0).at("share"), dec = months.at(11).at("share");
    if (jan.is_null() || dec.is_null()) {
        o.require(false, "January or December has no releases");
        return o;
    }
    const double j = jan, d = dec;
    detail << "january " << j << ", december " << d;
    o.require(j > d, "January share not above December");
    o.require(std::fabs(j - 0.63) <= 0.08, "January share " + std::to_string(j));
    o.require(std::fabs(d - 0.33) <= 0.08, "December share " + std::to_string(d));
    if (o.pass) o.detail = detail.str();
    return o;
}

} // namespace

int main(int argc, char **argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <path to chartsight binary>\n";
        return 1;
    }
    g_cli = fs::absolute(argv[1]);
    test_support::TempDir work("acceptance");
    const fs::path run_a = work.path() / "a", run_b = work.path() / "b";

    auto run_demo = [&](const fs::path &out) {
        const std::string cmd = shell_quote(g_cli) + " demo --seed 7 --out " + shell_quote(out) + " > " +
                                shell_quote(out.string() + ".log") + " 2>&1";
        return std::system(cmd.c_str());
    };
    const auto t0 = std::chrono::steady_clock::now();
    const int status_a = run_demo(run_a);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const int status_b = run_demo(run_b);

    bool all_pass = true;
    auto report = [&](const std::string &name, const std::function<Outcome()> &check) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception &e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        all_pass = all_pass && o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << (o.detail.empty() ? "" : " (" + o.detail + ")")
                  << std::endl;
    };

    report("property suite", property_suite);
    report("optimization checks", [&] { return optimization_checks(run_a); });
    report("oracle equivalence", [&] { return oracle_equivalence(run_a); });
    report("kde", kde_checks);
    report("metric identities", metric_identities);
    report("end-to-end demo", [&] { return end_to_end(run_a, seconds, status_a); });
    report("determinism", [&] { return determinism(run_a, run_b, status_b); });

    // non-blocking: needs the public catalog and a chart archive
    try {
        const auto soft = soft_reproduction(work.path());
        if (!soft) {
            std::cout << "SKIP soft reproduction (set CHARTSIGHT_CATALOG and CHARTSIGHT_ARCHIVE)" << std::endl;
        } else {
            std::cout << (soft->pass ? "PASS " : "FAIL ") << "soft reproduction (" << soft->detail << ")"
                      << std::endl;
        }
    } catch (const std::exception &e) {
        std::cout << "FAIL soft reproduction (exception: " << e.what() << ")" << std::endl;
    }
    return all_pass ? 0 : 1;
}
