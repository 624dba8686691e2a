#pragma once

#include "chartsight/features.hpp"
#include "chartsight/ingest.hpp"
#include "chartsight/models.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace chartsight {

struct RunConfig {
    std::filesystem::path catalog;
    std::filesystem::path archive;
    /// Preset name ("default", "spotify_export") or {field: header} overrides.
    nlohmann::json catalog_columns = "default";
    nlohmann::json archive_columns = nlohmann::json::object();
    bool clamp_descriptors = false;
    std::optional<std::filesystem::path> descriptor_phrases;

    std::uint64_t seed = 42;
    double split_ratio = 0.2;
    /// logreg, forest, gbm or all.
    std::string model = "all";
    LogisticConfig logreg;
    ForestConfig forest;
    GbmConfig gbm;
    FeatureOptions features;
    double threshold = 0.5;

    std::optional<double> bandwidth;
    /// Rows the SHAP and PDP analyses run on: dataset, train or validation.
    std::string explain_data = "dataset";
    /// Uniform row sample for SHAP/PDP; nullopt uses every row (200 in demo runs).
    std::optional<std::size_t> explain_rows;
    std::vector<std::string> kde_features = {"popularity", "duration_ms", "instrumentalness", "speechiness",
                                             "valence",    "loudness",    "acousticness",     "danceability",
                                             "energy"};
    std::vector<std::string> pdp_features = {"popularity_z", "duration_z", "instrumentalness", "speechiness",
                                             "valence"};

    std::size_t synthetic_catalog_size = 30000;
    std::size_t synthetic_charting = 3590;

    std::filesystem::path out = "out";
    unsigned threads = 0;
    bool force = false;

    void validate() const;
    nlohmann::json to_json() const;
    /// Unknown keys are rejected. Relative paths resolve against `base_dir`.
    static RunConfig from_json(const nlohmann::json &doc, const std::filesystem::path &base_dir = {});
    static RunConfig load(const std::filesystem::path &path);
};

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path &path);
std::string sha256_hex(std::string_view data);

/// Each stage reads and writes files under config.out and records
/// manifests/<stage>.json. A stage whose manifest matches the current config
/// and input hashes, and whose outputs are intact, is skipped unless force is set.
class Pipeline {
  public:
    Pipeline(RunConfig config, std::ostream &log);

    void ingest();
    void link();
    void split();
    void featurize();
    void train();
    void evaluate();
    /// what: kde, shap, pdp, months or all.
    void explain(const std::string &what);
    void report();
    /// Synthetic corpus followed by every stage above.
    void demo();

    const RunConfig &config() const { return config_; }

  private:
    struct Stage;
    bool begin(Stage &stage);
    void finish(const Stage &stage, const nlohmann::json &notes = nlohmann::json::object());

    std::filesystem::path artifact(const std::string &name) const { return config_.out / name; }
    std::vector<ModelKind> selected_models(bool existing_only) const;
    std::uint64_t stage_seed(std::string_view stage) const;
    /// Row sample size for SHAP and PDP; 0 means every row.
    std::size_t explain_cap() const;
    void explain_kde();
    void explain_shap();
    void explain_pdp();
    void explain_months();

    RunConfig config_;
    std::ostream &log_;
    bool demo_mode_ = false;
};

/// 1 for configuration problems, 2 for missing upstream artifacts, 1 otherwise.
int exit_code_for(const std::exception &error);

} // namespace chartsight
