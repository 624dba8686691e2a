// chartsight: predict Hot 100 inclusion from catalog metadata.
//
//   chartsight demo --seed 7 --out demo_out
//   chartsight ingest --config run.json
//   chartsight train --model forest --config run.json
//   chartsight explain shap --config run.json

#include "chartsight/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace chartsight;

int main(int argc, char **argv) {
    CLI::App app{"chartsight: chart-inclusion modelling pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> model;
    std::optional<double> bandwidth;
    std::optional<double> threshold;
    std::optional<std::string> catalog;
    std::optional<std::string> archive;
    std::optional<std::size_t> explain_rows;
    std::optional<unsigned> threads;
    bool force = false;

    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--seed", seed, "master seed for sampling, splitting and forests");
    app.add_option("--out", out, "output directory");
    app.add_option("--model", model, "logreg, forest, gbm or all");
    app.add_option("--bandwidth", bandwidth, "KDE bandwidth (default: Silverman's rule)");
    app.add_option("--threshold", threshold, "decision threshold on P(charting) for logreg and gbm");
    app.add_option("--catalog", catalog, "catalog CSV");
    app.add_option("--archive", archive, "chart archive CSV");
    app.add_option("--explain-rows", explain_rows, "row sample size for SHAP and PDP");
    app.add_option("--threads", threads, "worker threads (0 = all cores)");
    app.add_flag("--force", force, "rerun stages even when their outputs are up to date");

    app.add_subcommand("ingest", "validate the catalog and chart archive into canonical CSVs");
    app.add_subcommand("link", "label catalog tracks against the archive and build the balanced dataset");
    app.add_subcommand("split", "stratified train/validation split");
    app.add_subcommand("featurize", "fit the standardizer and write feature matrices");
    app.add_subcommand("train", "train the selected model(s)");
    app.add_subcommand("evaluate", "classification reports on the validation split");
    auto *explain = app.add_subcommand("explain", "kde, shap, pdp, months or all");
    std::string analysis = "all";
    explain->add_option("analysis", analysis, "kde, shap, pdp, months or all")
        ->check(CLI::IsMember({"kde", "shap", "pdp", "months", "all"}));
    app.add_subcommand("report", "aggregate the evaluation and explanation outputs");
    app.add_subcommand("demo", "synthetic corpus through the full pipeline");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        RunConfig config = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
        if (seed) config.seed = *seed;
        if (out) config.out = *out;
        if (model) config.model = *model;
        if (bandwidth) config.bandwidth = *bandwidth;
        if (threshold) config.threshold = *threshold;
        if (catalog) config.catalog = *catalog;
        if (archive) config.archive = *archive;
        if (explain_rows) config.explain_rows = *explain_rows;
        if (threads) config.threads = *threads;
        config.force = force;

        Pipeline pipeline(config, std::cerr);
        const std::string command = app.get_subcommands().front()->get_name();
        if (command == "ingest") {
            pipeline.ingest();
        } else if (command == "link") {
            pipeline.link();
        } else if (command == "split") {
            pipeline.split();
        } else if (command == "featurize") {
            pipeline.featurize();
        } else if (command == "train") {
            pipeline.train();
        } else if (command == "evaluate") {
            pipeline.evaluate();
        } else if (command == "explain") {
            pipeline.explain(analysis);
        } else if (command == "report") {
            pipeline.report();
        } else if (command == "demo") {
            pipeline.demo();
        }
    } catch (const std::exception &e) {
        std::cerr << "chartsight: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 0;
}
