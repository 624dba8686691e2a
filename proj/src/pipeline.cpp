#include "chartsight/pipeline.hpp"

#include "chartsight/csv.hpp"
#include "chartsight/evaluate.hpp"
#include "chartsight/explain.hpp"
#include "chartsight/linkage.hpp"
#include "chartsight/synthetic.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace chartsight {

namespace {

constexpr std::size_t kDemoExplainRows = 200;

const std::set<std::string> kTrackFields = {"popularity", "duration_ms", "acousticness", "danceability",
                                            "energy",     "instrumentalness", "liveness", "speechiness",
                                            "valence",    "loudness",    "tempo"};

double track_field(const TrackRecord &t, const std::string &name) {
    if (name == "popularity") return t.popularity;
    if (name == "duration_ms") return t.duration_ms;
    if (name == "acousticness") return t.acousticness;
    if (name == "danceability") return t.danceability;
    if (name == "energy") return t.energy;
    if (name == "instrumentalness") return t.instrumentalness;
    if (name == "liveness") return t.liveness;
    if (name == "speechiness") return t.speechiness;
    if (name == "valence") return t.valence;
    if (name == "loudness") return t.loudness;
    if (name == "tempo") return t.tempo;
    throw ConfigError("unknown track field '" + name + "'");
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string read_text(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot read " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text(const fs::path &path, std::string_view text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw Error("cannot write " + path.string());
    }
}

template <typename Writer> void write_with(const fs::path &path, Writer &&writer) {
    std::ostringstream buffer;
    writer(buffer);
    write_text(path, buffer.str());
}

void write_json(const fs::path &path, const json &doc) { write_text(path, doc.dump(2) + "\n"); }

json read_json(const fs::path &path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error &e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

ColumnMapping catalog_mapping(const json &doc) {
    if (doc.is_string()) {
        const auto name = doc.get<std::string>();
        if (name == "default") {
            return ColumnMapping::catalog_default();
        }
        if (name == "spotify_export") {
            return ColumnMapping::catalog_spotify_export();
        }
        throw ConfigError("unknown catalog column preset '" + name + "'");
    }
    ColumnMapping mapping = ColumnMapping::catalog_default();
    for (const auto &[field, header] : doc.items()) {
        mapping.set(field, header.get<std::string>());
    }
    return mapping;
}

ColumnMapping archive_mapping(const json &doc) {
    ColumnMapping mapping = ColumnMapping::archive_default();
    for (const auto &[field, header] : doc.items()) {
        mapping.set(field, header.get<std::string>());
    }
    return mapping;
}

std::vector<LabeledTrack> load_labeled(const fs::path &path) { return read_labeled(path); }

LabeledDataset dataset_from_rows(const std::vector<LabeledTrack> &rows, std::uint64_t seed) {
    LabeledDataset dataset;
    dataset.seed = seed;
    for (const auto &row : rows) {
        (row.charted ? dataset.positives : dataset.negatives).push_back(row.track);
    }
    return dataset;
}

std::string model_file_name(ModelKind kind) { return "model_" + std::string(model_kind_name(kind)) + ".json"; }

std::string shorten(const fs::path &path, const fs::path &root) {
    const auto rel = path.lexically_relative(root);
    if (!rel.empty() && *rel.begin() != "..") {
        return rel.generic_string();
    }
    return path.generic_string();
}

} // namespace

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::validate() const {
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
        throw ConfigError("split_ratio must be in (0,1)");
    }
    if (model != "all") {
        parse_model_kind(model);
    }
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw ConfigError("threshold must be in [0,1]");
    }
    if (bandwidth && !(*bandwidth > 0.0)) {
        throw ConfigError("bandwidth must be positive");
    }
    if (explain_data != "dataset" && explain_data != "train" && explain_data != "validation") {
        throw ConfigError("explain_data must be dataset, train or validation");
    }
    if (explain_rows && *explain_rows == 0) {
        throw ConfigError("explain_rows must be positive");
    }
    for (const auto &name : kde_features) {
        if (!kTrackFields.count(name)) {
            throw ConfigError("kde_features: unknown track field '" + name + "'");
        }
    }
    for (const auto &name : pdp_features) {
        if (!feature_index(name)) {
            throw ConfigError("pdp_features: unknown feature '" + name + "'");
        }
    }
    if (synthetic_charting == 0 || synthetic_charting * 2 > synthetic_catalog_size) {
        throw ConfigError("synthetic corpus needs 0 < charting <= catalog_size / 2");
    }
    logreg.validate();
    forest.validate();
    gbm.validate();
    catalog_mapping(catalog_columns);
}

json RunConfig::to_json() const {
    json doc = {
        {"catalog", catalog.generic_string()},
        {"archive", archive.generic_string()},
        {"catalog_columns", catalog_columns},
        {"archive_columns", archive_columns},
        {"clamp_descriptors", clamp_descriptors},
        {"descriptor_phrases", descriptor_phrases ? json(descriptor_phrases->generic_string()) : json(nullptr)},
        {"seed", seed},
        {"split_ratio", split_ratio},
        {"model", model},
        {"logreg", logreg.to_json()},
        {"forest", forest.to_json()},
        {"gbm", gbm.to_json()},
        {"features", {{"include_loudness", features.include_loudness}}},
        {"threshold", threshold},
        {"bandwidth", bandwidth ? json(*bandwidth) : json(nullptr)},
        {"explain_data", explain_data},
        {"explain_rows", explain_rows ? json(*explain_rows) : json(nullptr)},
        {"kde_features", kde_features},
        {"pdp_features", pdp_features},
        {"synthetic", {{"catalog_size", synthetic_catalog_size}, {"charting", synthetic_charting}}},
        {"out", out.generic_string()},
        {"threads", threads},
    };
    doc["forest"].erase("seed"); // derived from the run seed
    return doc;
}

RunConfig RunConfig::from_json(const json &doc, const fs::path &base_dir) {
    static const std::set<std::string> kKeys = {
        "catalog",      "archive",      "catalog_columns", "archive_columns", "clamp_descriptors",
        "descriptor_phrases", "seed",   "split_ratio",     "model",           "logreg",
        "forest",       "gbm",          "features",        "threshold",       "bandwidth",
        "explain_data", "explain_rows", "kde_features",    "pdp_features",    "synthetic",
        "out",          "threads"};
    if (!doc.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    for (const auto &[key, _] : doc.items()) {
        if (!kKeys.count(key)) {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    auto resolve = [&](const std::string &p) {
        const fs::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };

    RunConfig c;
    try {
        if (doc.contains("catalog")) c.catalog = resolve(doc.at("catalog").get<std::string>());
        if (doc.contains("archive")) c.archive = resolve(doc.at("archive").get<std::string>());
        if (doc.contains("catalog_columns")) c.catalog_columns = doc.at("catalog_columns");
        if (doc.contains("archive_columns")) c.archive_columns = doc.at("archive_columns");
        c.clamp_descriptors = doc.value("clamp_descriptors", c.clamp_descriptors);
        if (doc.contains("descriptor_phrases") && !doc.at("descriptor_phrases").is_null()) {
            c.descriptor_phrases = resolve(doc.at("descriptor_phrases").get<std::string>());
        }
        c.seed = doc.value("seed", c.seed);
        c.split_ratio = doc.value("split_ratio", c.split_ratio);
        c.model = doc.value("model", c.model);
        if (doc.contains("logreg")) c.logreg = LogisticConfig::from_json(doc.at("logreg"));
        if (doc.contains("forest")) c.forest = ForestConfig::from_json(doc.at("forest"));
        if (doc.contains("gbm")) c.gbm = GbmConfig::from_json(doc.at("gbm"));
        if (doc.contains("features")) {
            c.features.include_loudness = doc.at("features").value("include_loudness", true);
        }
        c.threshold = doc.value("threshold", c.threshold);
        if (doc.contains("bandwidth") && !doc.at("bandwidth").is_null()) {
            c.bandwidth = doc.at("bandwidth").get<double>();
        }
        c.explain_data = doc.value("explain_data", c.explain_data);
        if (doc.contains("explain_rows") && !doc.at("explain_rows").is_null()) {
            c.explain_rows = doc.at("explain_rows").get<std::size_t>();
        }
        if (doc.contains("kde_features")) c.kde_features = doc.at("kde_features").get<std::vector<std::string>>();
        if (doc.contains("pdp_features")) c.pdp_features = doc.at("pdp_features").get<std::vector<std::string>>();
        if (doc.contains("synthetic")) {
            c.synthetic_catalog_size = doc.at("synthetic").value("catalog_size", c.synthetic_catalog_size);
            c.synthetic_charting = doc.at("synthetic").value("charting", c.synthetic_charting);
        }
        if (doc.contains("out")) c.out = resolve(doc.at("out").get<std::string>());
        c.threads = doc.value("threads", c.threads);
    } catch (const json::exception &e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig RunConfig::load(const fs::path &path) {
    if (!fs::exists(path)) {
        throw ConfigError("config file not found: " + path.string());
    }
    json doc;
    try {
        doc = json::parse(read_text(path));
    } catch (const json::parse_error &e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return from_json(doc, path.parent_path());
}

// ---------------------------------------------------------------------------
// Hashing

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    std::ostringstream hex;
    for (unsigned int i = 0; i < length; ++i) {
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return hex.str();
}

std::string sha256_file(const fs::path &path) { return sha256_hex(read_text(path)); }

// ---------------------------------------------------------------------------
// Stage bookkeeping

struct Pipeline::Stage {
    Stage(std::string name_, json config_, std::vector<fs::path> inputs_, std::vector<fs::path> outputs_)
        : name(std::move(name_)), config(std::move(config_)), inputs(std::move(inputs_)),
          outputs(std::move(outputs_)) {}

    std::string name;
    json config;
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;
    std::string started_at;
    json input_hashes = json::array();
};

Pipeline::Pipeline(RunConfig config, std::ostream &log) : config_(std::move(config)), log_(log) {
    config_.validate();
}

std::uint64_t Pipeline::stage_seed(std::string_view stage) const {
    // FNV-1a of the stage name mixed into the run seed
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : stage) {
        h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
    }
    return splitmix64(config_.seed ^ h);
}

bool Pipeline::begin(Stage &stage) {
    for (const auto &input : stage.inputs) {
        if (!fs::exists(input)) {
            throw MissingArtifactError(shorten(input, config_.out));
        }
    }
    for (const auto &input : stage.inputs) {
        stage.input_hashes.push_back({{"path", shorten(input, config_.out)}, {"sha256", sha256_file(input)}});
    }
    const std::string config_hash = sha256_hex(stage.config.dump());
    const fs::path manifest = config_.out / "manifests" / (stage.name + ".json");
    if (!config_.force && fs::exists(manifest)) {
        const json previous = read_json(manifest);
        bool fresh = previous.value("config_hash", "") == config_hash && previous.value("inputs", json()) ==
                                                                                stage.input_hashes;
        if (fresh) {
            const json outputs = previous.value("outputs", json::array());
            std::set<std::pair<std::string, std::string>> recorded;
            for (const auto &o : outputs) {
                recorded.insert({o.at("path").get<std::string>(), o.at("sha256").get<std::string>()});
            }
            for (const auto &output : stage.outputs) {
                if (!fs::exists(output) ||
                    !recorded.count({shorten(output, config_.out), sha256_file(output)})) {
                    fresh = false;
                    break;
                }
            }
        }
        if (fresh) {
            log_ << "[" << stage.name << "] up to date, skipping (use --force to rerun)\n";
            return false;
        }
    }
    fs::create_directories(config_.out / "manifests");
    stage.started_at = utc_now();
    log_ << "[" << stage.name << "] running\n";
    return true;
}

void Pipeline::finish(const Stage &stage, const json &notes) {
    json outputs = json::array();
    for (const auto &output : stage.outputs) {
        outputs.push_back({{"path", shorten(output, config_.out)}, {"sha256", sha256_file(output)}});
    }
    const json manifest = {
        {"command", stage.name},
        {"config_hash", sha256_hex(stage.config.dump())},
        {"config", stage.config},
        {"seed", config_.seed},
        {"inputs", stage.input_hashes},
        {"outputs", outputs},
        {"started_at", stage.started_at},
        {"finished_at", utc_now()},
        {"notes", notes},
    };
    write_json(config_.out / "manifests" / (stage.name + ".json"), manifest);
}

std::vector<ModelKind> Pipeline::selected_models(bool existing_only) const {
    std::vector<ModelKind> kinds;
    if (config_.model == "all") {
        kinds = {ModelKind::logistic, ModelKind::forest, ModelKind::boosted};
    } else {
        kinds = {parse_model_kind(config_.model)};
    }
    if (existing_only && config_.model == "all") {
        std::vector<ModelKind> present;
        for (ModelKind k : kinds) {
            if (fs::exists(artifact(model_file_name(k)))) {
                present.push_back(k);
            }
        }
        if (present.empty()) {
            throw MissingArtifactError("model_*.json (run train first)");
        }
        return present;
    }
    return kinds;
}

// ---------------------------------------------------------------------------
// Stages

void Pipeline::ingest() {
    if (config_.catalog.empty() || config_.archive.empty()) {
        throw ConfigError("ingest needs both catalog and archive paths");
    }
    for (const auto &p : {config_.catalog, config_.archive}) {
        if (!fs::exists(p)) {
            throw ConfigError("input file not found: " + p.string());
        }
    }
    Stage stage{"ingest",
                {{"catalog_columns", config_.catalog_columns},
                 {"archive_columns", config_.archive_columns},
                 {"clamp_descriptors", config_.clamp_descriptors}},
                {config_.catalog, config_.archive},
                {artifact("catalog.csv"), artifact("archive.csv"), artifact("rejections.jsonl")}};
    if (!begin(stage)) {
        return;
    }
    IngestOptions options;
    options.clamp = config_.clamp_descriptors;
    const auto catalog = parse_catalog(config_.catalog, catalog_mapping(config_.catalog_columns), options);
    const auto archive = parse_chart_archive(config_.archive, archive_mapping(config_.archive_columns));

    write_with(artifact("catalog.csv"), [&](std::ostream &out) { write_catalog(out, catalog.records); });
    write_with(artifact("archive.csv"), [&](std::ostream &out) { write_chart_archive(out, archive.records); });
    write_with(artifact("rejections.jsonl"), [&](std::ostream &out) {
        for (const auto &r : catalog.rejections) {
            out << json{{"source", "catalog"}, {"row", r.row}, {"field", r.field}, {"reason", r.reason}}.dump()
                << "\n";
        }
        for (const auto &r : archive.rejections) {
            out << json{{"source", "archive"}, {"row", r.row}, {"field", r.field}, {"reason", r.reason}}.dump()
                << "\n";
        }
    });
    log_ << "[ingest] catalog " << catalog.records.size() << "/" << catalog.total_rows << " rows accepted, archive "
         << archive.records.size() << "/" << archive.total_rows << "\n";
    finish(stage, {{"catalog_rows", catalog.total_rows},
                   {"catalog_accepted", catalog.records.size()},
                   {"archive_rows", archive.total_rows},
                   {"archive_accepted", archive.records.size()}});
}

void Pipeline::link() {
    Stage stage{"link",
                {{"seed", config_.seed}},
                {artifact("catalog.csv"), artifact("archive.csv")},
                {artifact("labeled_all.csv"), artifact("dataset.csv"), artifact("dataset.json")}};
    if (config_.descriptor_phrases) {
        stage.inputs.push_back(*config_.descriptor_phrases);
    }
    if (!begin(stage)) {
        return;
    }
    const TextNormalizer normalizer = config_.descriptor_phrases
                                          ? TextNormalizer(load_descriptor_phrases(*config_.descriptor_phrases))
                                          : TextNormalizer();
    const auto catalog = parse_catalog(artifact("catalog.csv"), ColumnMapping::catalog_default());
    const auto archive = parse_chart_archive(artifact("archive.csv"));
    if (!catalog.rejections.empty() || !archive.rejections.empty()) {
        throw SchemaError("canonical catalog/archive failed to re-parse; rerun ingest with --force");
    }

    std::size_t duplicates = 0;
    const auto unique = deduplicate_by_track_id(
        [&] {
            std::vector<LabeledTrack> rows;
            rows.reserve(catalog.records.size());
            for (const auto &t : catalog.records) {
                rows.push_back({t, false});
            }
            return rows;
        }(),
        &duplicates);
    std::vector<TrackRecord> tracks;
    tracks.reserve(unique.size());
    for (const auto &row : unique) {
        tracks.push_back(row.track);
    }
    const LabelingResult labeled = label_tracks(tracks, archive.records, normalizer);
    const LabeledDataset dataset = balance(labeled.tracks, stage_seed("balance"));

    write_with(artifact("labeled_all.csv"), [&](std::ostream &out) { write_labeled(out, labeled.tracks); });
    write_with(artifact("dataset.csv"), [&](std::ostream &out) { write_labeled(out, dataset.rows()); });
    const json summary = {
        {"catalog_tracks", catalog.records.size()},
        {"duplicate_track_ids_dropped", duplicates},
        {"unkeyable_catalog", labeled.unkeyable_catalog.size()},
        {"unkeyable_archive", labeled.unkeyable_archive},
        {"labeled_tracks", labeled.tracks.size()},
        {"charting", labeled.positives},
        {"dataset_positives", dataset.positives.size()},
        {"dataset_negatives", dataset.negatives.size()},
        {"dataset_size", dataset.size()},
        {"balance_seed", dataset.seed},
    };
    write_json(artifact("dataset.json"), summary);
    log_ << "[link] " << labeled.positives << " of " << labeled.tracks.size() << " tracks charted; dataset "
         << dataset.size() << " rows\n";
    finish(stage, summary);
}

void Pipeline::split() {
    Stage stage{"split",
                {{"seed", config_.seed}, {"split_ratio", config_.split_ratio}},
                {artifact("dataset.csv")},
                {artifact("train.csv"), artifact("validation.csv"), artifact("split.json")}};
    if (!begin(stage)) {
        return;
    }
    const LabeledDataset dataset = dataset_from_rows(load_labeled(artifact("dataset.csv")), config_.seed);
    const SplitResult result = stratified_split(dataset, config_.split_ratio, stage_seed("split"));
    write_with(artifact("train.csv"), [&](std::ostream &out) { write_labeled(out, result.train); });
    write_with(artifact("validation.csv"), [&](std::ostream &out) { write_labeled(out, result.validation); });
    const double unrounded = static_cast<double>(dataset.size()) * config_.split_ratio;
    const json summary = {
        {"ratio", config_.split_ratio},
        {"rounding", "per-class round-half-up of class_size * ratio"},
        {"dataset_size", dataset.size()},
        {"train_size", result.train.size()},
        {"validation_size", result.validation.size()},
        {"validation_positives", result.validation_positives},
        {"validation_negatives", result.validation_negatives},
        {"unrounded_validation_size", unrounded},
        {"split_seed", stage_seed("split")},
    };
    write_json(artifact("split.json"), summary);
    log_ << "[split] train " << result.train.size() << ", validation " << result.validation.size() << " ("
         << result.validation_positives << " + " << result.validation_negatives << ")\n";
    finish(stage, summary);
}

void Pipeline::featurize() {
    Stage stage{"featurize",
                {{"include_loudness", config_.features.include_loudness}},
                {artifact("train.csv"), artifact("validation.csv")},
                {artifact("standardizer.json"), artifact("train_features.csv"), artifact("validation_features.csv")}};
    if (!begin(stage)) {
        return;
    }
    const auto train = load_labeled(artifact("train.csv"));
    const auto validation = load_labeled(artifact("validation.csv"));
    std::vector<TrackRecord> train_tracks;
    train_tracks.reserve(train.size());
    for (const auto &row : train) {
        train_tracks.push_back(row.track);
    }
    const StandardizationParams params = fit_standardizer(train_tracks);
    write_json(artifact("standardizer.json"), params.to_json());
    write_with(artifact("train_features.csv"),
               [&](std::ostream &out) { write_features(out, chartsight::featurize(train, params, config_.features)); });
    write_with(artifact("validation_features.csv"),
               [&](std::ostream &out) { write_features(out, chartsight::featurize(validation, params, config_.features)); });
    finish(stage, params.to_json());
}

void Pipeline::train() {
    for (ModelKind kind : selected_models(false)) {
        const std::string name(model_kind_name(kind));
        json model_config;
        switch (kind) {
        case ModelKind::logistic:
            model_config = config_.logreg.to_json();
            break;
        case ModelKind::forest: {
            ForestConfig fc = config_.forest;
            fc.seed = stage_seed("forest");
            model_config = fc.to_json();
            break;
        }
        case ModelKind::boosted:
            model_config = config_.gbm.to_json();
            break;
        }
        Stage stage{"train_" + name,
                    {{"model", name},
                     {"config", model_config},
                     {"include_loudness", config_.features.include_loudness}},
                    {artifact("train_features.csv"), artifact("standardizer.json")},
                    {artifact(model_file_name(kind))}};
        if (!begin(stage)) {
            continue;
        }
        const LabeledMatrix data = read_features(artifact("train_features.csv"));
        ModelFile file;
        file.standardization = StandardizationParams::from_json(read_json(artifact("standardizer.json")));
        file.feature_options = config_.features;
        file.config = model_config;
        json notes = json::object();
        const auto start = std::chrono::steady_clock::now();
        switch (kind) {
        case ModelKind::logistic: {
            const LogisticFit fit = train_logistic(data.features, data.labels, config_.logreg);
            if (!fit.converged) {
                log_ << "[train_logreg] warning: stopped after " << fit.iterations
                     << " iterations without reaching the gradient tolerance\n";
            }
            notes = {{"iterations", fit.iterations}, {"converged", fit.converged}, {"final_loss", fit.final_loss}};
            file.model = fit.model;
            break;
        }
        case ModelKind::forest: {
            ForestConfig fc = config_.forest;
            fc.seed = stage_seed("forest");
            fc.threads = config_.threads;
            file.model = train_forest(data.features, data.labels, fc);
            break;
        }
        case ModelKind::boosted: {
            std::string warning;
            BoostedModel model = train_gbm(data.features, data.labels, config_.gbm, &warning);
            if (!warning.empty()) {
                log_ << "[train_gbm] warning: " << warning << "\n";
                notes["warning"] = warning;
            }
            notes["final_training_loss"] = model.stage_loss.back();
            file.model = std::move(model);
            break;
        }
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log_ << "[train_" << name << "] trained in " << std::fixed << std::setprecision(2) << seconds << " s\n"
             << std::defaultfloat;
        file.save(artifact(model_file_name(kind)));
        finish(stage, notes);
    }
}

void Pipeline::evaluate() {
    for (ModelKind kind : selected_models(true)) {
        const std::string name(model_kind_name(kind));
        Stage stage{"evaluate_" + name,
                    {{"model", name}, {"threshold", config_.threshold}},
                    {artifact("validation_features.csv"), artifact(model_file_name(kind))},
                    {artifact("report_" + name + ".json"), artifact("report_" + name + ".txt"),
                     artifact("confusion_" + name + ".csv")}};
        if (!begin(stage)) {
            continue;
        }
        if (kind == ModelKind::forest && config_.threshold != 0.5) {
            log_ << "[evaluate_forest] note: the forest predicts by majority vote; --threshold is ignored\n";
        }
        const LabeledMatrix data = read_features(artifact("validation_features.csv"));
        const ModelFile file = ModelFile::load(artifact(model_file_name(kind)));
        if (file.n_features() != data.features.cols()) {
            throw DimensionError(file.n_features(), data.features.cols());
        }
        std::vector<int> predictions(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            predictions[i] = predict_label(file.model, data.features.row(i), config_.threshold);
        }
        const ClassificationReport report = metrics(confusion(predictions, data.labels));
        const std::string titles[] = {"Logistic Regression", "Random Forest", "Gradient Boosting"};
        const std::string title = titles[static_cast<int>(kind)];

        json doc = report.to_json();
        doc["model"] = name;
        doc["threshold"] = kind == ModelKind::forest ? json("majority vote") : json(config_.threshold);
        write_json(artifact("report_" + name + ".json"), doc);
        write_text(artifact("report_" + name + ".txt"), report.to_text("Classification report: " + title));
        write_with(artifact("confusion_" + name + ".csv"), [&](std::ostream &out) {
            const auto norm = normalized_confusion(report.confusion);
            csv::write_row(out, {"true_class", "pred_non_charting", "pred_charting"});
            csv::write_row(out, {"non_charting", format_double(norm[0][0]), format_double(norm[0][1])});
            csv::write_row(out, {"charting", format_double(norm[1][0]), format_double(norm[1][1])});
        });
        log_ << "[evaluate_" << name << "] accuracy " << std::fixed << std::setprecision(4) << report.accuracy
             << std::defaultfloat << "\n";
        finish(stage, {{"accuracy", report.accuracy}});
    }
}

void Pipeline::explain(const std::string &what) {
    if (what == "kde") {
        explain_kde();
    } else if (what == "shap") {
        explain_shap();
    } else if (what == "pdp") {
        explain_pdp();
    } else if (what == "months") {
        explain_months();
    } else if (what == "all") {
        explain_kde();
        explain_months();
        explain_shap();
        explain_pdp();
    } else {
        throw ConfigError("explain expects kde, shap, pdp, months or all; got '" + what + "'");
    }
}

void Pipeline::explain_kde() {
    Stage stage{"explain_kde",
                {{"features", config_.kde_features},
                 {"bandwidth", config_.bandwidth ? json(*config_.bandwidth) : json("silverman")}},
                {artifact("dataset.csv")},
                {}};
    for (const auto &f : config_.kde_features) {
        stage.outputs.push_back(artifact("kde_" + f + "_charting.csv"));
        stage.outputs.push_back(artifact("kde_" + f + "_non_charting.csv"));
    }
    if (!begin(stage)) {
        return;
    }
    const auto rows = load_labeled(artifact("dataset.csv"));
    json bandwidths = json::object();
    for (const auto &f : config_.kde_features) {
        for (bool charted : {true, false}) {
            std::vector<double> samples;
            for (const auto &row : rows) {
                if (row.charted == charted) {
                    samples.push_back(track_field(row.track, f));
                }
            }
            const double h = config_.bandwidth ? *config_.bandwidth : silverman_bandwidth(samples);
            const auto grid = kde_grid(samples, h);
            const KdeCurve curve = kde(samples, h, grid);
            const std::string cls = charted ? "charting" : "non_charting";
            bandwidths[f][cls] = h;
            write_with(artifact("kde_" + f + "_" + cls + ".csv"), [&](std::ostream &out) {
                csv::write_row(out, {"grid", "density"});
                for (std::size_t i = 0; i < curve.grid.size(); ++i) {
                    csv::write_row(out, {format_double(curve.grid[i]), format_double(curve.density[i])});
                }
            });
        }
    }
    finish(stage, {{"bandwidths", bandwidths}});
}

void Pipeline::explain_months() {
    Stage stage{"explain_months",
                json::object(),
                {artifact("dataset.csv")},
                {artifact("monthly_inclusion.csv"), artifact("monthly_inclusion.json")}};
    if (!begin(stage)) {
        return;
    }
    const auto rows = load_labeled(artifact("dataset.csv"));
    const MonthlyInclusion inclusion = monthly_inclusion(rows);
    json months = json::array();
    write_with(artifact("monthly_inclusion.csv"), [&](std::ostream &out) {
        csv::write_row(out, {"month", "released", "charted", "share"});
        for (int m = 1; m <= 12; ++m) {
            const MonthShare &s = inclusion.month(m);
            csv::write_row(out, {std::to_string(m), std::to_string(s.released), std::to_string(s.charted),
                                 s.share ? format_double(*s.share) : ""});
            months.push_back({{"month", m},
                              {"released", s.released},
                              {"charted", s.charted},
                              {"share", s.share ? json(*s.share) : json(nullptr)}});
        }
    });
    const json doc = {{"months", months}, {"excluded_month_imputed", inclusion.excluded_month_imputed}};
    write_json(artifact("monthly_inclusion.json"), doc);
    finish(stage, {{"excluded_month_imputed", inclusion.excluded_month_imputed}});
}

namespace {

std::string explain_source(const std::string &explain_data) {
    if (explain_data == "train") return "train.csv";
    if (explain_data == "validation") return "validation.csv";
    return "dataset.csv";
}

} // namespace

std::size_t Pipeline::explain_cap() const {
    if (config_.explain_rows) {
        return *config_.explain_rows;
    }
    return demo_mode_ ? kDemoExplainRows : 0;
}

void Pipeline::explain_shap() {
    std::vector<ModelKind> kinds;
    for (ModelKind k : selected_models(true)) {
        if (k != ModelKind::logistic) {
            kinds.push_back(k);
        } else if (config_.model != "all") {
            throw ConfigError("SHAP needs a tree model; use --model forest or --model gbm");
        }
    }
    if (kinds.empty()) {
        throw MissingArtifactError("model_forest.json or model_gbm.json (SHAP needs a tree model)");
    }
    const std::size_t cap = explain_cap();
    for (ModelKind kind : kinds) {
        const std::string name(model_kind_name(kind));
        const std::string source = explain_source(config_.explain_data);
        Stage stage{"explain_shap_" + name,
                    {{"model", name},
                     {"data", config_.explain_data},
                     {"rows", cap > 0 ? json(cap) : json("all")},
                     {"seed", config_.seed}},
                    {artifact(source), artifact(model_file_name(kind))},
                    {artifact("shap_values_" + name + ".csv"), artifact("shap_importance_" + name + ".csv"),
                     artifact("shap_" + name + ".json")}};
        if (!begin(stage)) {
            continue;
        }
        const ModelFile file = ModelFile::load(artifact(model_file_name(kind)));
        auto rows = load_labeled(artifact(source));
        std::vector<std::size_t> index(rows.size());
        std::iota(index.begin(), index.end(), std::size_t{0});
        if (cap > 0 && cap < rows.size()) {
            Rng rng(stage_seed("explain"));
            index = rng.sample_without_replacement(rows.size(), cap);
            std::sort(index.begin(), index.end());
        }
        std::vector<LabeledTrack> subset;
        subset.reserve(index.size());
        for (std::size_t i : index) {
            subset.push_back(rows[i]);
        }
        const LabeledMatrix data = chartsight::featurize(subset, file.standardization, file.feature_options);
        const ShapSummary summary = shap_summary(file.model, data.features, config_.threads);

        write_with(artifact("shap_values_" + name + ".csv"), [&](std::ostream &out) {
            csv::write_row(out, {"row", "feature", "value", "shap"});
            for (std::size_t i = 0; i < data.features.rows(); ++i) {
                for (std::size_t j = 0; j < kFeatureCount; ++j) {
                    csv::write_row(out, {std::to_string(index[i]), std::string(kFeatureNames[j]),
                                         format_double(summary.feature_values(i, j)),
                                         format_double(summary.shap(i, j))});
                }
            }
        });
        json ranking = json::array();
        write_with(artifact("shap_importance_" + name + ".csv"), [&](std::ostream &out) {
            csv::write_row(out, {"rank", "feature", "mean_abs_shap"});
            for (std::size_t r = 0; r < summary.ranking.size(); ++r) {
                const std::size_t j = summary.ranking[r];
                csv::write_row(out, {std::to_string(r + 1), std::string(kFeatureNames[j]),
                                     format_double(summary.mean_abs[j])});
                ranking.push_back({{"feature", kFeatureNames[j]}, {"mean_abs_shap", summary.mean_abs[j]}});
            }
        });
        const json doc = {
            {"model", name},
            {"output", summary.output == ShapOutput::probability ? "probability" : "log_odds"},
            {"base_value", summary.base_value},
            {"rows", data.size()},
            {"data", config_.explain_data},
            {"ranking", ranking},
        };
        write_json(artifact("shap_" + name + ".json"), doc);
        log_ << "[explain_shap_" << name << "] top feature " << kFeatureNames[summary.ranking.front()] << " over "
             << data.size() << " rows\n";
        finish(stage, {{"model_file", model_file_name(kind)}, {"rows", data.size()}});
    }
}

void Pipeline::explain_pdp() {
    const std::size_t cap = explain_cap();
    for (ModelKind kind : selected_models(true)) {
        const std::string name(model_kind_name(kind));
        const std::string source = explain_source(config_.explain_data);
        Stage stage{"explain_pdp_" + name,
                    {{"model", name},
                     {"data", config_.explain_data},
                     {"rows", cap > 0 ? json(cap) : json("all")},
                     {"features", config_.pdp_features},
                     {"seed", config_.seed}},
                    {artifact(source), artifact(model_file_name(kind))},
                    {}};
        for (const auto &f : config_.pdp_features) {
            stage.outputs.push_back(artifact("pdp_" + name + "_" + f + ".csv"));
        }
        if (!begin(stage)) {
            continue;
        }
        const ModelFile file = ModelFile::load(artifact(model_file_name(kind)));
        auto rows = load_labeled(artifact(source));
        if (cap > 0 && cap < rows.size()) {
            Rng rng(stage_seed("explain"));
            auto index = rng.sample_without_replacement(rows.size(), cap);
            std::sort(index.begin(), index.end());
            std::vector<LabeledTrack> subset;
            for (std::size_t i : index) {
                subset.push_back(rows[i]);
            }
            rows = std::move(subset);
        }
        const LabeledMatrix data = chartsight::featurize(rows, file.standardization, file.feature_options);
        for (const auto &f : config_.pdp_features) {
            const std::size_t j = *feature_index(f);
            const auto grid = pdp_grid(data.features, j);
            const PdpCurve curve = pdp(file.model, data.features, j, grid, config_.threads);
            write_with(artifact("pdp_" + name + "_" + f + ".csv"), [&](std::ostream &out) {
                csv::write_row(out, {"grid", "mean_prediction"});
                for (std::size_t g = 0; g < curve.grid.size(); ++g) {
                    csv::write_row(out, {format_double(curve.grid[g]), format_double(curve.mean_prediction[g])});
                }
            });
        }
        finish(stage, {{"model_file", model_file_name(kind)}, {"rows", data.size()}});
    }
}

void Pipeline::report() {
    std::vector<ModelKind> kinds;
    for (ModelKind k : {ModelKind::logistic, ModelKind::forest, ModelKind::boosted}) {
        if (fs::exists(artifact("report_" + std::string(model_kind_name(k)) + ".json"))) {
            kinds.push_back(k);
        }
    }
    if (kinds.empty()) {
        throw MissingArtifactError("report_*.json (run evaluate first)");
    }
    Stage stage{"report", json::object(), {}, {artifact("report.txt"), artifact("report.json")}};
    for (ModelKind k : kinds) {
        const std::string name(model_kind_name(k));
        stage.inputs.push_back(artifact("report_" + name + ".json"));
        stage.inputs.push_back(artifact("report_" + name + ".txt"));
        if (fs::exists(artifact("shap_" + name + ".json"))) {
            stage.inputs.push_back(artifact("shap_" + name + ".json"));
        }
    }
    for (const char *extra : {"split.json", "dataset.json", "monthly_inclusion.json"}) {
        if (fs::exists(artifact(extra))) {
            stage.inputs.push_back(artifact(extra));
        }
    }
    if (!begin(stage)) {
        return;
    }

    std::ostringstream text;
    json doc = {{"models", json::object()}};
    char line[160];
    text << "chartsight report\n=================\n\n";
    if (fs::exists(artifact("dataset.json"))) {
        const json d = read_json(artifact("dataset.json"));
        text << "dataset: " << d.value("dataset_size", 0) << " rows (" << d.value("dataset_positives", 0)
             << " charting, " << d.value("dataset_negatives", 0) << " non-charting) from "
             << d.value("labeled_tracks", 0) << " labeled catalog tracks\n";
        doc["dataset"] = d;
    }
    if (fs::exists(artifact("split.json"))) {
        const json s = read_json(artifact("split.json"));
        text << "split: " << s.value("train_size", 0) << " train / " << s.value("validation_size", 0)
             << " validation (" << s.value("validation_positives", 0) << " + "
             << s.value("validation_negatives", 0) << ", " << s.value("rounding", "") << ")\n";
        doc["split"] = s;
    }
    text << "\n";
    std::snprintf(line, sizeof line, "%-10s %9s %10s %10s %10s %10s\n", "model", "accuracy", "precision",
                  "recall", "f1", "tpr/fpr");
    text << line;
    for (ModelKind k : kinds) {
        const std::string name(model_kind_name(k));
        const json r = read_json(artifact("report_" + name + ".json"));
        const json &c = r.at("classes").at("charting");
        std::string rates = "-";
        if (!r.at("normalized_confusion").is_null()) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.2f/%.2f", r["normalized_confusion"][1][1].get<double>(),
                          r["normalized_confusion"][0][1].get<double>());
            rates = buf;
        }
        std::snprintf(line, sizeof line, "%-10s %9.3f %10.3f %10.3f %10.3f %10s\n", name.c_str(),
                      r.at("accuracy").get<double>(), c.at("precision").get<double>(),
                      c.at("recall").get<double>(), c.at("f1").get<double>(), rates.c_str());
        text << line;
        doc["models"][name] = r;
    }
    text << "(precision/recall/f1 for the charting class; tpr/fpr from the normalized confusion matrix)\n";
    for (ModelKind k : kinds) {
        const std::string name(model_kind_name(k));
        text << "\n" << read_text(artifact("report_" + name + ".txt"));
    }
    for (ModelKind k : kinds) {
        const std::string name(model_kind_name(k));
        if (!fs::exists(artifact("shap_" + name + ".json"))) {
            continue;
        }
        const json s = read_json(artifact("shap_" + name + ".json"));
        text << "\nSHAP importance, " << name << " (" << s.at("output").get<std::string>() << ", "
             << s.at("rows").get<std::size_t>() << " rows):\n";
        const auto &ranking = s.at("ranking");
        for (std::size_t r = 0; r < std::min<std::size_t>(5, ranking.size()); ++r) {
            std::snprintf(line, sizeof line, "  %zu. %-18s %.4f\n", r + 1,
                          ranking[r].at("feature").get<std::string>().c_str(),
                          ranking[r].at("mean_abs_shap").get<double>());
            text << line;
        }
        doc["models"][name]["shap"] = s;
    }
    if (fs::exists(artifact("monthly_inclusion.json"))) {
        const json m = read_json(artifact("monthly_inclusion.json"));
        text << "\nCharting share by release month (" << m.at("excluded_month_imputed").get<std::size_t>()
             << " year-only dates excluded):\n";
        static const char *kMonthNames[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                            "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
        for (const auto &month : m.at("months")) {
            const int idx = month.at("month").get<int>();
            if (month.at("share").is_null()) {
                std::snprintf(line, sizeof line, "  %s  %6zu released   share undefined\n", kMonthNames[idx - 1],
                              month.at("released").get<std::size_t>());
            } else {
                std::snprintf(line, sizeof line, "  %s  %6zu released  %6zu charted  share %.3f\n",
                              kMonthNames[idx - 1], month.at("released").get<std::size_t>(),
                              month.at("charted").get<std::size_t>(), month.at("share").get<double>());
            }
            text << line;
        }
        doc["monthly_inclusion"] = m;
    }
    write_text(artifact("report.txt"), text.str());
    write_json(artifact("report.json"), doc);
    log_ << "[report] wrote " << artifact("report.txt").string() << "\n";
    finish(stage);
}

void Pipeline::demo() {
    demo_mode_ = true;
    const fs::path catalog = artifact("input/catalog.csv");
    const fs::path archive = artifact("input/archive.csv");
    Stage stage{"generate",
                {{"seed", config_.seed},
                 {"catalog_size", config_.synthetic_catalog_size},
                 {"charting", config_.synthetic_charting}},
                {},
                {catalog, archive}};
    if (begin(stage)) {
        SyntheticOptions options;
        options.catalog_size = config_.synthetic_catalog_size;
        options.charting = config_.synthetic_charting;
        const SyntheticCorpus corpus = generate_synthetic_corpus(stage_seed("synthetic"), options);
        write_with(catalog, [&](std::ostream &out) { write_catalog(out, corpus.catalog); });
        write_with(archive, [&](std::ostream &out) { write_chart_archive(out, corpus.archive); });
        finish(stage, {{"catalog_rows", corpus.catalog.size()}, {"archive_rows", corpus.archive.size()}});
    }
    config_.catalog = catalog;
    config_.archive = archive;
    config_.catalog_columns = "default";
    config_.archive_columns = json::object();
    ingest();
    link();
    split();
    featurize();
    train();
    evaluate();
    explain("all");
    report();
}

int exit_code_for(const std::exception &error) {
    if (dynamic_cast<const MissingArtifactError *>(&error) != nullptr) {
        return 2;
    }
    return 1;
}

} // namespace chartsight
