#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chartsight::csv {

/// One parsed comma-separated document. Fields are unquoted; rows keep
/// whatever width they had in the source so callers can reject ragged rows.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column(std::string_view name) const;
};

/// RFC-4180 style parsing: quoted fields may contain commas, doubled quotes
/// and line breaks. A leading UTF-8 byte-order mark is ignored.
Table parse(std::string_view text);
Table read_file(const std::filesystem::path &path);

std::string escape_field(std::string_view field);
void write_row(std::ostream &out, const std::vector<std::string> &fields);

} // namespace chartsight::csv
