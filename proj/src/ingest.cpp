#include "chartsight/ingest.hpp"

#include "chartsight/common.hpp"
#include "chartsight/csv.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace chartsight {

const std::array<std::string_view, 18> kCatalogFields = {
    "track_id",     "title",       "artist",      "release_date", "genre",    "acousticness",
    "danceability", "energy",      "instrumentalness", "liveness", "speechiness", "valence",
    "loudness",     "popularity",  "tempo",       "mode",         "key",      "duration_ms"};

const std::array<std::string_view, 4> kArchiveFields = {"date", "rank", "title", "artist"};

std::string_view to_string(Genre genre) {
    switch (genre) {
    case Genre::pop: return "pop";
    case Genre::rap: return "rap";
    case Genre::rock: return "rock";
    case Genre::latin: return "latin";
    case Genre::edm: return "edm";
    case Genre::rnb: return "rnb";
    }
    return "pop";
}

std::optional<Genre> parse_genre(std::string_view text) {
    const std::string name = to_lower_ascii(trim(text));
    for (Genre g : kGenres) {
        if (name == to_string(g)) {
            return g;
        }
    }
    if (name == "r&b" || name == "r-n-b" || name == "r and b") {
        return Genre::rnb;
    }
    return std::nullopt;
}

bool is_valid_date(int year, int month, int day) {
    if (month < 1 || month > 12 || day < 1) {
        return false;
    }
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int limit = kDays[month - 1];
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    if (month == 2 && leap) {
        limit = 29;
    }
    return day <= limit;
}

std::string CalendarDate::to_string() const {
    char buffer[32];
    switch (precision) {
    case DatePrecision::year:
        std::snprintf(buffer, sizeof(buffer), "%04d", year);
        break;
    case DatePrecision::month:
        std::snprintf(buffer, sizeof(buffer), "%04d-%02d", year, month);
        break;
    case DatePrecision::day:
        std::snprintf(buffer, sizeof(buffer), "%04d-%02d-%02d", year, month, day);
        break;
    }
    return buffer;
}

namespace {

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

int to_int(std::string_view s) {
    int value = 0;
    for (char c : s) {
        value = value * 10 + (c - '0');
    }
    return value;
}

} // namespace

std::optional<CalendarDate> parse_date(std::string_view text) {
    std::string s = trim(text);
    if (const auto t = s.find('T'); t != std::string::npos) {
        s.resize(t);
    }
    CalendarDate date;
    if (s.size() == 4 && all_digits(s)) {
        date.year = to_int(s);
        date.precision = DatePrecision::year;
        return date;
    }
    if (s.size() == 7 && s[4] == '-' && all_digits(std::string_view(s).substr(0, 4)) &&
        all_digits(std::string_view(s).substr(5, 2))) {
        date.year = to_int(std::string_view(s).substr(0, 4));
        date.month = to_int(std::string_view(s).substr(5, 2));
        date.precision = DatePrecision::month;
        if (!is_valid_date(date.year, date.month, 1)) {
            return std::nullopt;
        }
        return date;
    }
    if (s.size() == 10 && s[4] == '-' && s[7] == '-' && all_digits(std::string_view(s).substr(0, 4)) &&
        all_digits(std::string_view(s).substr(5, 2)) && all_digits(std::string_view(s).substr(8, 2))) {
        date.year = to_int(std::string_view(s).substr(0, 4));
        date.month = to_int(std::string_view(s).substr(5, 2));
        date.day = to_int(std::string_view(s).substr(8, 2));
        if (!is_valid_date(date.year, date.month, date.day)) {
            return std::nullopt;
        }
        return date;
    }
    return std::nullopt;
}

std::vector<Violation> validate_record(const TrackRecord &r) {
    std::vector<Violation> out;
    auto unit = [&](std::string_view name, double v) {
        if (!(v >= 0.0 && v <= 1.0)) {
            out.push_back({std::string(name), std::string(name) + " out of [0,1]"});
        }
    };
    unit("acousticness", r.acousticness);
    unit("danceability", r.danceability);
    unit("energy", r.energy);
    unit("instrumentalness", r.instrumentalness);
    unit("liveness", r.liveness);
    unit("speechiness", r.speechiness);
    unit("valence", r.valence);
    if (!(r.loudness >= -60.0 && r.loudness <= 0.0)) {
        out.push_back({"loudness", "loudness out of [-60,0]"});
    }
    if (!(r.popularity >= 0.0 && r.popularity <= 100.0)) {
        out.push_back({"popularity", "popularity out of [0,100]"});
    }
    if (!(r.tempo > 0.0) || !std::isfinite(r.tempo)) {
        out.push_back({"tempo", "tempo not positive"});
    }
    if (r.mode != 0 && r.mode != 1) {
        out.push_back({"mode", "mode out of {0,1}"});
    }
    if (r.key < 0 || r.key > 11) {
        out.push_back({"key", "key out of {0..11}"});
    }
    if (!(r.duration_ms > 0.0)) {
        out.push_back({"duration_ms", "duration not positive"});
    } else if (!(r.duration_ms < kMaxDurationMs)) {
        out.push_back({"duration_ms", "duration exceeds 6e5 ms"});
    }
    const CalendarDate &d = r.release_date;
    if (!is_valid_date(d.year, d.month, d.day)) {
        out.push_back({"release_date", "release_date not a calendar date"});
    } else if (d.year < kMinReleaseYear) {
        out.push_back({"release_date", "release_date before 1985"});
    }
    return out;
}

ColumnMapping ColumnMapping::catalog_default() {
    std::map<std::string, std::string> columns;
    for (auto field : kCatalogFields) {
        columns.emplace(std::string(field), std::string(field));
    }
    return ColumnMapping(std::move(columns));
}

ColumnMapping ColumnMapping::catalog_spotify_export() {
    ColumnMapping mapping = catalog_default();
    mapping.set("title", "track_name");
    mapping.set("artist", "track_artist");
    mapping.set("release_date", "track_album_release_date");
    mapping.set("genre", "playlist_genre");
    mapping.set("popularity", "track_popularity");
    return mapping;
}

ColumnMapping ColumnMapping::archive_default() {
    std::map<std::string, std::string> columns;
    for (auto field : kArchiveFields) {
        columns.emplace(std::string(field), std::string(field));
    }
    return ColumnMapping(std::move(columns));
}

ColumnMapping ColumnMapping::load(const std::filesystem::path &path, const ColumnMapping &defaults) {
    std::ifstream in(path);
    if (!in) {
        throw SchemaError("cannot open schema file " + path.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception &e) {
        throw SchemaError("schema file " + path.string() + ": " + e.what());
    }
    if (!doc.is_object()) {
        throw SchemaError("schema file must hold a JSON object of field -> column name");
    }
    ColumnMapping mapping = defaults;
    for (const auto &[field, header] : doc.items()) {
        if (!defaults.columns_.contains(field)) {
            throw SchemaError("schema file names unknown field '" + field + "'");
        }
        mapping.set(field, header.get<std::string>());
    }
    return mapping;
}

std::string ColumnMapping::header_for(const std::string &field) const {
    const auto it = columns_.find(field);
    return it == columns_.end() ? field : it->second;
}

namespace {

template <std::size_t N>
std::array<std::size_t, N> resolve_columns(const csv::Table &table, const ColumnMapping &schema,
                                           const std::array<std::string_view, N> &fields) {
    std::array<std::size_t, N> index{};
    std::vector<std::string> missing;
    for (std::size_t i = 0; i < N; ++i) {
        const std::string header = schema.header_for(std::string(fields[i]));
        const auto column = table.column(header);
        if (!column) {
            missing.push_back(std::string(fields[i]) + " (column '" + header + "')");
        } else {
            index[i] = *column;
        }
    }
    if (!missing.empty()) {
        std::string message = "missing required column(s):";
        for (const auto &m : missing) {
            message += " " + m;
        }
        throw SchemaError(message);
    }
    return index;
}

struct RowError {
    std::string field;
    std::string reason;
};

double clamp_if(bool clamp, double value, double lo, double hi) {
    return clamp ? std::clamp(value, lo, hi) : value;
}

std::optional<RowError> parse_track_row(const std::vector<std::string> &row,
                                        const std::array<std::size_t, 18> &col, const IngestOptions &options,
                                        TrackRecord &out) {
    auto cell = [&](std::size_t field) -> const std::string & { return row[col[field]]; };
    auto number = [&](std::size_t field, double &value) -> std::optional<RowError> {
        if (!parse_double(cell(field), value)) {
            const std::string name(kCatalogFields[field]);
            return RowError{name, name + " is not a number: '" + cell(field) + "'"};
        }
        return std::nullopt;
    };
    auto integer = [&](std::size_t field, int &value) -> std::optional<RowError> {
        long long parsed = 0;
        if (!parse_int(cell(field), parsed) || parsed < -1000000 || parsed > 1000000) {
            const std::string name(kCatalogFields[field]);
            return RowError{name, name + " is not an integer: '" + cell(field) + "'"};
        }
        value = static_cast<int>(parsed);
        return std::nullopt;
    };

    out.track_id = trim(cell(0));
    if (out.track_id.empty()) {
        return RowError{"track_id", "track_id is empty"};
    }
    out.title = cell(1);
    out.artist = cell(2);
    const auto date = parse_date(cell(3));
    if (!date) {
        return RowError{"release_date", "release_date is not an ISO-8601 date: '" + cell(3) + "'"};
    }
    out.release_date = *date;
    const auto genre = parse_genre(cell(4));
    if (!genre) {
        return RowError{"genre", "genre not in {pop,rap,rock,latin,edm,rnb}: '" + cell(4) + "'"};
    }
    out.genre = *genre;

    double *unit_fields[] = {&out.acousticness, &out.danceability, &out.energy, &out.instrumentalness,
                             &out.liveness,     &out.speechiness,  &out.valence};
    for (std::size_t i = 0; i < 7; ++i) {
        if (auto err = number(5 + i, *unit_fields[i])) {
            return err;
        }
        *unit_fields[i] = clamp_if(options.clamp, *unit_fields[i], 0.0, 1.0);
    }
    if (auto err = number(12, out.loudness)) {
        return err;
    }
    out.loudness = clamp_if(options.clamp, out.loudness, -60.0, 0.0);
    if (auto err = number(13, out.popularity)) {
        return err;
    }
    out.popularity = clamp_if(options.clamp, out.popularity, 0.0, 100.0);
    if (auto err = number(14, out.tempo)) {
        return err;
    }
    if (auto err = integer(15, out.mode)) {
        return err;
    }
    if (auto err = integer(16, out.key)) {
        return err;
    }
    if (auto err = number(17, out.duration_ms)) {
        return err;
    }

    const auto violations = validate_record(out);
    if (!violations.empty()) {
        return RowError{violations.front().field, violations.front().reason};
    }
    return std::nullopt;
}

std::string read_text(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw SchemaError("cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

} // namespace

ParseResult<TrackRecord> parse_catalog_text(std::string_view csv_text, const ColumnMapping &schema,
                                       const IngestOptions &options) {
    return parse_catalog(csv::parse(csv_text), schema, options);
}

ParseResult<TrackRecord> parse_catalog(const csv::Table &table, const ColumnMapping &schema,
                                       const IngestOptions &options) {
    const auto columns = resolve_columns(table, schema, kCatalogFields);

    ParseResult<TrackRecord> result;
    result.total_rows = table.rows.size();
    result.records.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto &row = table.rows[i];
        if (row.size() != table.header.size()) {
            result.rejections.push_back({i + 1, "*",
                                         "expected " + std::to_string(table.header.size()) + " fields, found " +
                                             std::to_string(row.size())});
            continue;
        }
        TrackRecord record;
        if (auto err = parse_track_row(row, columns, options, record)) {
            result.rejections.push_back({i + 1, std::move(err->field), std::move(err->reason)});
            continue;
        }
        result.records.push_back(std::move(record));
        result.source_rows.push_back(i);
    }
    return result;
}

ParseResult<TrackRecord> parse_catalog(const std::filesystem::path &path, const ColumnMapping &schema,
                                       const IngestOptions &options) {
    return parse_catalog_text(read_text(path), schema, options);
}

ParseResult<ChartEntry> parse_chart_archive_text(std::string_view csv_text, const ColumnMapping &schema) {
    const csv::Table table = csv::parse(csv_text);
    const auto col = resolve_columns(table, schema, kArchiveFields);

    ParseResult<ChartEntry> result;
    result.total_rows = table.rows.size();
    result.records.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto &row = table.rows[i];
        if (row.size() != table.header.size()) {
            result.rejections.push_back({i + 1, "*",
                                         "expected " + std::to_string(table.header.size()) + " fields, found " +
                                             std::to_string(row.size())});
            continue;
        }
        ChartEntry entry;
        const auto date = parse_date(row[col[0]]);
        if (!date || date->precision != DatePrecision::day) {
            result.rejections.push_back({i + 1, "date", "malformed chart date: '" + row[col[0]] + "'"});
            continue;
        }
        entry.chart_date = *date;
        long long rank = 0;
        if (!parse_int(row[col[1]], rank)) {
            result.rejections.push_back({i + 1, "rank", "rank is not an integer: '" + row[col[1]] + "'"});
            continue;
        }
        if (rank < 1 || rank > 100) {
            result.rejections.push_back({i + 1, "rank", "rank out of [1,100]"});
            continue;
        }
        entry.rank = static_cast<int>(rank);
        entry.title = row[col[2]];
        entry.artist = row[col[3]];
        result.records.push_back(std::move(entry));
        result.source_rows.push_back(i);
    }
    return result;
}

ParseResult<ChartEntry> parse_chart_archive(const std::filesystem::path &path, const ColumnMapping &schema) {
    return parse_chart_archive_text(read_text(path), schema);
}

std::vector<std::string> catalog_row(const TrackRecord &r) {
    return {r.track_id,
            r.title,
            r.artist,
            r.release_date.to_string(),
            std::string(to_string(r.genre)),
            format_double(r.acousticness),
            format_double(r.danceability),
            format_double(r.energy),
            format_double(r.instrumentalness),
            format_double(r.liveness),
            format_double(r.speechiness),
            format_double(r.valence),
            format_double(r.loudness),
            format_double(r.popularity),
            format_double(r.tempo),
            std::to_string(r.mode),
            std::to_string(r.key),
            format_double(r.duration_ms)};
}

void write_catalog(std::ostream &out, const std::vector<TrackRecord> &records) {
    csv::write_row(out, std::vector<std::string>(kCatalogFields.begin(), kCatalogFields.end()));
    for (const auto &r : records) {
        csv::write_row(out, catalog_row(r));
    }
}

void write_chart_archive(std::ostream &out, const std::vector<ChartEntry> &entries) {
    csv::write_row(out, std::vector<std::string>(kArchiveFields.begin(), kArchiveFields.end()));
    for (const auto &e : entries) {
        csv::write_row(out, {e.chart_date.to_string(), std::to_string(e.rank), e.title, e.artist});
    }
}

void write_rejections(std::ostream &out, const std::vector<Rejection> &rejections) {
    for (const auto &r : rejections) {
        nlohmann::json line = {{"row", r.row}, {"field", r.field}, {"reason", r.reason}};
        out << line.dump() << '\n';
    }
}

} // namespace chartsight
