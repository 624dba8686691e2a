#pragma once

#include "chartsight/ingest.hpp"
#include "chartsight/linkage.hpp"
#include "chartsight/matrix.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <filesystem>
#include <span>
#include <string_view>
#include <utility>

namespace chartsight {

inline constexpr std::size_t kFeatureCount = 20;

/// Model input in fixed order: standardized popularity and duration, raw
/// descriptors, cyclic key and month, boundary-month flags, one-hot genre.
using FeatureVector = std::array<double, kFeatureCount>;

namespace feature {
enum Index : std::size_t {
    popularity_z = 0,
    duration_z,
    instrumentalness,
    speechiness,
    valence,
    loudness,
    acousticness,
    mode,
    key_cos,
    key_sin,
    month_cos,
    month_sin,
    january,
    december,
    genre_first,
};
} // namespace feature

extern const std::array<std::string_view, kFeatureCount> kFeatureNames;

/// Index of a feature by column name, or by the catalog field it is built from
/// ("popularity" -> popularity_z).
std::optional<std::size_t> feature_index(std::string_view name);

/// (cos, sin) of 2*pi*value/period.
std::pair<double, double> encode_cyclic(int value, int period);

/// (is_january, is_december) for a calendar month 1..12.
std::pair<int, int> encode_boundary_months(int month);

std::array<double, 6> encode_genre(Genre genre);

struct StandardizationParams {
    double mu_pop = 0.0;
    double sigma_pop = 1.0;
    double mu_dur = 0.0;
    double sigma_dur = 1.0;

    nlohmann::json to_json() const;
    static StandardizationParams from_json(const nlohmann::json &doc);
    friend bool operator==(const StandardizationParams &, const StandardizationParams &) = default;
};

/// Mean and population standard deviation of popularity and duration.
StandardizationParams fit_standardizer(std::span<const TrackRecord> train);

struct FeatureOptions {
    /// When false the loudness column is emitted as a constant 0 so the
    /// layout stays fixed while the feature carries no information.
    bool include_loudness = true;
};

FeatureVector assemble(const TrackRecord &track, const StandardizationParams &params,
                       const FeatureOptions &options = {});

LabeledMatrix featurize(std::span<const LabeledTrack> rows, const StandardizationParams &params,
                        const FeatureOptions &options = {});

/// 20 named columns followed by `label`.
void write_features(std::ostream &out, const LabeledMatrix &data);
LabeledMatrix read_features(const std::filesystem::path &path);

} // namespace chartsight
