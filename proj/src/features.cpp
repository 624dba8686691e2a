#include "chartsight/features.hpp"

#include "chartsight/csv.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace chartsight {

const std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "popularity_z", "duration_z", "instrumentalness", "speechiness", "valence",
    "loudness",     "acousticness", "mode",           "key_cos",     "key_sin",
    "month_cos",    "month_sin",  "is_january",       "is_december", "genre_pop",
    "genre_rap",    "genre_rock", "genre_latin",      "genre_edm",   "genre_rnb"};

std::optional<std::size_t> feature_index(std::string_view name) {
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        if (kFeatureNames[i] == name) {
            return i;
        }
    }
    if (name == "popularity") {
        return feature::popularity_z;
    }
    if (name == "duration" || name == "duration_ms") {
        return feature::duration_z;
    }
    return std::nullopt;
}

std::pair<double, double> encode_cyclic(int value, int period) {
    if (period <= 0) {
        throw std::invalid_argument("encode_cyclic: period must be positive");
    }
    if (value < 0) {
        throw std::invalid_argument("encode_cyclic: value must be non-negative");
    }
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(value) / static_cast<double>(period);
    return {std::cos(angle), std::sin(angle)};
}

std::pair<int, int> encode_boundary_months(int month) {
    if (month < 1 || month > 12) {
        throw std::invalid_argument("encode_boundary_months: month " + std::to_string(month) + " outside 1..12");
    }
    return {month == 1 ? 1 : 0, month == 12 ? 1 : 0};
}

std::array<double, 6> encode_genre(Genre genre) {
    std::array<double, 6> out{};
    const auto slot = static_cast<std::size_t>(genre);
    if (slot >= out.size()) {
        throw std::invalid_argument("encode_genre: unknown genre");
    }
    out[slot] = 1.0;
    return out;
}

nlohmann::json StandardizationParams::to_json() const {
    return {{"mu_pop", mu_pop}, {"sigma_pop", sigma_pop}, {"mu_dur", mu_dur}, {"sigma_dur", sigma_dur}};
}

StandardizationParams StandardizationParams::from_json(const nlohmann::json &doc) {
    StandardizationParams p;
    p.mu_pop = doc.at("mu_pop").get<double>();
    p.sigma_pop = doc.at("sigma_pop").get<double>();
    p.mu_dur = doc.at("mu_dur").get<double>();
    p.sigma_dur = doc.at("sigma_dur").get<double>();
    if (!(p.sigma_pop > 0.0) || !(p.sigma_dur > 0.0)) {
        throw SchemaError("standardization params must have positive sigmas");
    }
    return p;
}

namespace {

std::pair<double, double> mean_and_population_sd(std::span<const TrackRecord> rows, double TrackRecord::*field) {
    double sum = 0.0;
    for (const auto &r : rows) {
        sum += r.*field;
    }
    const double mean = sum / static_cast<double>(rows.size());
    double squares = 0.0;
    for (const auto &r : rows) {
        const double d = r.*field - mean;
        squares += d * d;
    }
    return {mean, std::sqrt(squares / static_cast<double>(rows.size()))};
}

} // namespace

StandardizationParams fit_standardizer(std::span<const TrackRecord> train) {
    if (train.empty()) {
        throw std::invalid_argument("fit_standardizer: empty training split");
    }
    StandardizationParams params;
    std::tie(params.mu_pop, params.sigma_pop) = mean_and_population_sd(train, &TrackRecord::popularity);
    std::tie(params.mu_dur, params.sigma_dur) = mean_and_population_sd(train, &TrackRecord::duration_ms);
    if (!(params.sigma_pop > 0.0)) {
        throw std::invalid_argument("fit_standardizer: zero variance in popularity");
    }
    if (!(params.sigma_dur > 0.0)) {
        throw std::invalid_argument("fit_standardizer: zero variance in duration");
    }
    return params;
}

FeatureVector assemble(const TrackRecord &track, const StandardizationParams &params, const FeatureOptions &options) {
    FeatureVector x{};
    x[feature::popularity_z] = (track.popularity - params.mu_pop) / params.sigma_pop;
    x[feature::duration_z] = (track.duration_ms - params.mu_dur) / params.sigma_dur;
    x[feature::instrumentalness] = track.instrumentalness;
    x[feature::speechiness] = track.speechiness;
    x[feature::valence] = track.valence;
    x[feature::loudness] = options.include_loudness ? track.loudness : 0.0;
    x[feature::acousticness] = track.acousticness;
    x[feature::mode] = static_cast<double>(track.mode);
    std::tie(x[feature::key_cos], x[feature::key_sin]) = encode_cyclic(track.key, 12);
    const int month = track.release_date.month;
    std::tie(x[feature::month_cos], x[feature::month_sin]) = encode_cyclic(month, 12);
    const auto [jan, dec] = encode_boundary_months(month);
    x[feature::january] = jan;
    x[feature::december] = dec;
    const auto genre = encode_genre(track.genre);
    std::copy(genre.begin(), genre.end(), x.begin() + feature::genre_first);
    return x;
}

LabeledMatrix featurize(std::span<const LabeledTrack> rows, const StandardizationParams &params,
                        const FeatureOptions &options) {
    LabeledMatrix out{FeatureMatrix(kFeatureCount), {}};
    out.features.reserve_rows(rows.size());
    out.labels.reserve(rows.size());
    for (const auto &row : rows) {
        const FeatureVector x = assemble(row.track, params, options);
        out.features.push_row(x);
        out.labels.push_back(row.charted ? 1 : 0);
    }
    return out;
}

void write_features(std::ostream &out, const LabeledMatrix &data) {
    std::vector<std::string> fields(kFeatureNames.begin(), kFeatureNames.end());
    fields.emplace_back("label");
    csv::write_row(out, fields);
    for (std::size_t i = 0; i < data.size(); ++i) {
        fields.clear();
        for (double v : data.features.row(i)) {
            fields.push_back(format_double(v));
        }
        fields.push_back(std::to_string(data.labels[i]));
        csv::write_row(out, fields);
    }
}

LabeledMatrix read_features(const std::filesystem::path &path) {
    if (!std::filesystem::exists(path)) {
        throw MissingArtifactError(path.string());
    }
    const csv::Table table = csv::read_file(path);
    if (table.header.size() != kFeatureCount + 1 || table.header.back() != "label") {
        throw SchemaError(path.string() + ": expected 20 feature columns followed by 'label'");
    }
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
        if (table.header[j] != kFeatureNames[j]) {
            throw SchemaError(path.string() + ": column " + std::to_string(j) + " is '" + table.header[j] +
                              "', expected '" + std::string(kFeatureNames[j]) + "'");
        }
    }
    LabeledMatrix out{FeatureMatrix(kFeatureCount), {}};
    out.features.reserve_rows(table.rows.size());
    FeatureVector x{};
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto &row = table.rows[i];
        if (row.size() != kFeatureCount + 1) {
            throw SchemaError(path.string() + ": ragged row " + std::to_string(i + 1));
        }
        for (std::size_t j = 0; j < kFeatureCount; ++j) {
            if (!parse_double(row[j], x[j])) {
                throw SchemaError(path.string() + ": non-numeric value at row " + std::to_string(i + 1));
            }
        }
        long long label = 0;
        if (!parse_int(row.back(), label) || (label != 0 && label != 1)) {
            throw SchemaError(path.string() + ": label must be 0 or 1 at row " + std::to_string(i + 1));
        }
        out.features.push_row(x);
        out.labels.push_back(static_cast<int>(label));
    }
    return out;
}

} // namespace chartsight
