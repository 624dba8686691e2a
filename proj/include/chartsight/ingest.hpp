#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chartsight {

enum class Genre { pop, rap, rock, latin, edm, rnb };

inline constexpr std::array<Genre, 6> kGenres = {Genre::pop,   Genre::rap, Genre::rock,
                                                 Genre::latin, Genre::edm, Genre::rnb};

std::string_view to_string(Genre genre);
/// Accepts the canonical names plus the "r&b" spelling used by public exports.
std::optional<Genre> parse_genre(std::string_view text);

enum class DatePrecision { day, month, year };

/// Calendar date that remembers how much of it was present in the source.
/// Year-only values are stored as January 1 and month-precision values as
/// the first of the month.
struct CalendarDate {
    int year = 1970;
    int month = 1;
    int day = 1;
    DatePrecision precision = DatePrecision::day;

    bool month_imputed() const { return precision == DatePrecision::year; }
    std::string to_string() const;
    friend bool operator==(const CalendarDate &, const CalendarDate &) = default;
};

bool is_valid_date(int year, int month, int day);
/// ISO-8601 "YYYY-MM-DD", "YYYY-MM" or "YYYY". Optional time suffix after 'T' is ignored.
std::optional<CalendarDate> parse_date(std::string_view text);

struct TrackRecord {
    std::string track_id;
    std::string title;
    std::string artist;
    CalendarDate release_date;
    Genre genre = Genre::pop;
    double acousticness = 0.0;
    double danceability = 0.0;
    double energy = 0.0;
    double instrumentalness = 0.0;
    double liveness = 0.0;
    double speechiness = 0.0;
    double valence = 0.0;
    double loudness = 0.0;   // dBFS
    double popularity = 0.0; // 0..100
    double tempo = 120.0;    // BPM
    int mode = 0;
    int key = 0;
    double duration_ms = 0.0;

    friend bool operator==(const TrackRecord &, const TrackRecord &) = default;
};

inline constexpr double kMaxDurationMs = 6.0e5;
inline constexpr int kMinReleaseYear = 1985;

struct ChartEntry {
    CalendarDate chart_date;
    int rank = 1;
    std::string title;
    std::string artist;

    friend bool operator==(const ChartEntry &, const ChartEntry &) = default;
};

struct Violation {
    std::string field;
    std::string reason;
};

/// Empty iff every TrackRecord invariant holds.
std::vector<Violation> validate_record(const TrackRecord &record);

struct Rejection {
    std::size_t row = 0; // 1-based data row, header excluded
    std::string field;
    std::string reason;
};

template <typename Record> struct ParseResult {
    std::vector<Record> records;
    std::vector<Rejection> rejections;
    /// 0-based data row of each accepted record.
    std::vector<std::size_t> source_rows;
    std::size_t total_rows = 0;
};

/// Maps canonical field names onto the header names of a particular export.
class ColumnMapping {
  public:
    ColumnMapping() = default;
    explicit ColumnMapping(std::map<std::string, std::string> columns) : columns_(std::move(columns)) {}

    /// Catalog fields under their canonical names.
    static ColumnMapping catalog_default();
    /// Header names of the public 30k-song playlist export.
    static ColumnMapping catalog_spotify_export();
    static ColumnMapping archive_default();
    /// JSON object {canonical_field: header_name}; missing keys keep defaults.
    static ColumnMapping load(const std::filesystem::path &path, const ColumnMapping &defaults);

    std::string header_for(const std::string &field) const;
    void set(std::string field, std::string header) { columns_[std::move(field)] = std::move(header); }
    const std::map<std::string, std::string> &columns() const { return columns_; }

  private:
    std::map<std::string, std::string> columns_;
};

extern const std::array<std::string_view, 18> kCatalogFields;
extern const std::array<std::string_view, 4> kArchiveFields;

struct IngestOptions {
    /// Clamp bounded continuous descriptors into range instead of rejecting.
    bool clamp = false;
};

namespace csv {
struct Table;
}

ParseResult<TrackRecord> parse_catalog(const csv::Table &table, const ColumnMapping &schema,
                                       const IngestOptions &options = {});
ParseResult<TrackRecord> parse_catalog_text(std::string_view csv_text, const ColumnMapping &schema,
                                       const IngestOptions &options = {});
ParseResult<TrackRecord> parse_catalog(const std::filesystem::path &path, const ColumnMapping &schema,
                                       const IngestOptions &options = {});

ParseResult<ChartEntry> parse_chart_archive_text(std::string_view csv_text,
                                            const ColumnMapping &schema = ColumnMapping::archive_default());
ParseResult<ChartEntry> parse_chart_archive(const std::filesystem::path &path,
                                            const ColumnMapping &schema = ColumnMapping::archive_default());

/// Canonical catalog CSV; parse_catalog with the default mapping reads it back exactly.
void write_catalog(std::ostream &out, const std::vector<TrackRecord> &records);
std::vector<std::string> catalog_row(const TrackRecord &record);
void write_chart_archive(std::ostream &out, const std::vector<ChartEntry> &entries);
/// One JSON object per line: {"row":..,"field":..,"reason":..}.
void write_rejections(std::ostream &out, const std::vector<Rejection> &rejections);

} // namespace chartsight
