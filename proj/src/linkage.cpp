#include "chartsight/linkage.hpp"

#include "chartsight/common.hpp"
#include "chartsight/csv.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/locid.h>

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace chartsight {

std::vector<std::string> default_descriptor_phrases() {
    return {"remix", "remastered", "acoustic version", "live version", "explicit version", "radio edit"};
}

namespace {

std::string collapse_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return out;
}

std::vector<std::string> canonical_phrases(std::vector<std::string> phrases) {
    for (auto &p : phrases) {
        p = collapse_whitespace(to_lower_ascii(p));
    }
    std::erase_if(phrases, [](const std::string &p) { return p.empty(); });
    return phrases;
}

// Lowercase + canonical decomposition with combining marks dropped. Unicode
// whitespace becomes ' ' and dash punctuation becomes '-'; everything else
// is kept so that descriptor groups can still be recognised.
std::string fold(std::string_view raw) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2 *nfd = icu::Normalizer2::getNFDInstance(status);
    if (U_FAILURE(status)) {
        throw Error("ICU NFD normalizer unavailable");
    }
    icu::UnicodeString text =
        icu::UnicodeString::fromUTF8(icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
    text.toLower(icu::Locale::getRoot());
    const icu::UnicodeString decomposed = nfd->normalize(text, status);
    if (U_FAILURE(status)) {
        throw Error("ICU normalization failed");
    }

    icu::UnicodeString kept;
    for (int32_t i = 0; i < decomposed.length();) {
        const UChar32 c = decomposed.char32At(i);
        i += U16_LENGTH(c);
        const auto category = u_charType(c);
        if (category == U_NON_SPACING_MARK || category == U_ENCLOSING_MARK ||
            category == U_COMBINING_SPACING_MARK) {
            continue;
        }
        if (u_isUWhiteSpace(c)) {
            kept.append(static_cast<UChar>(' '));
        } else if (category == U_DASH_PUNCTUATION) {
            kept.append(static_cast<UChar>('-'));
        } else {
            kept.append(c);
        }
    }
    std::string out;
    kept.toUTF8String(out);
    return collapse_whitespace(out);
}

bool is_phrase(const std::vector<std::string> &phrases, std::string_view candidate) {
    const std::string normalized = collapse_whitespace(candidate);
    return std::find(phrases.begin(), phrases.end(), normalized) != phrases.end();
}

void strip_descriptors(std::string &s, const std::vector<std::string> &phrases) {
    static constexpr std::pair<char, char> kGroups[] = {{'(', ')'}, {'[', ']'}};
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto &[open, close] : kGroups) {
            std::size_t from = 0;
            while (true) {
                const std::size_t open_pos = s.find(open, from);
                if (open_pos == std::string::npos) {
                    break;
                }
                const std::size_t close_pos = s.find(close, open_pos + 1);
                if (close_pos == std::string::npos) {
                    break;
                }
                if (is_phrase(phrases, std::string_view(s).substr(open_pos + 1, close_pos - open_pos - 1))) {
                    s.erase(open_pos, close_pos - open_pos + 1);
                    changed = true;
                } else {
                    from = open_pos + 1;
                }
            }
        }
        for (std::size_t dash = s.rfind('-'); dash != std::string::npos;
             dash = dash == 0 ? std::string::npos : s.rfind('-', dash - 1)) {
            if (is_phrase(phrases, std::string_view(s).substr(dash + 1))) {
                s.erase(dash);
                changed = true;
                break;
            }
        }
    }
}

std::string keep_alphanumeric(std::string_view folded) {
    icu::UnicodeString text =
        icu::UnicodeString::fromUTF8(icu::StringPiece(folded.data(), static_cast<int32_t>(folded.size())));
    icu::UnicodeString kept;
    for (int32_t i = 0; i < text.length();) {
        const UChar32 c = text.char32At(i);
        i += U16_LENGTH(c);
        if (c == ' ' || u_isalnum(c)) {
            kept.append(c);
        }
    }
    std::string out;
    kept.toUTF8String(out);
    return collapse_whitespace(out);
}

} // namespace

std::vector<std::string> load_descriptor_phrases(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open descriptor phrase file " + path.string());
    }
    std::vector<std::string> phrases;
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (!t.empty() && t.front() != '#') {
            phrases.push_back(t);
        }
    }
    return phrases;
}

TextNormalizer::TextNormalizer() : phrases_(canonical_phrases(default_descriptor_phrases())) {}

TextNormalizer::TextNormalizer(std::vector<std::string> phrases) : phrases_(canonical_phrases(std::move(phrases))) {}

std::string TextNormalizer::operator()(std::string_view raw) const {
    std::string folded = fold(raw);
    strip_descriptors(folded, phrases_);
    return keep_alphanumeric(folded);
}

std::string normalize_text(std::string_view raw) {
    static const TextNormalizer normalizer;
    return normalizer(raw);
}

std::size_t MatchKeyHash::operator()(const MatchKey &key) const noexcept {
    const std::size_t a = std::hash<std::string>{}(key.title);
    const std::size_t b = std::hash<std::string>{}(key.artist);
    return a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
}

std::optional<MatchKey> make_key(std::string_view title, std::string_view artist, const TextNormalizer &normalizer) {
    MatchKey key{normalizer(title), normalizer(artist)};
    if (key.title.empty() && key.artist.empty()) {
        return std::nullopt;
    }
    return key;
}

LabelingResult label_tracks(const std::vector<TrackRecord> &catalog, const std::vector<ChartEntry> &archive,
                            const TextNormalizer &normalizer) {
    LabelingResult result;
    std::unordered_set<MatchKey, MatchKeyHash> charted_keys;
    charted_keys.reserve(archive.size());
    for (const auto &entry : archive) {
        if (auto key = make_key(entry.title, entry.artist, normalizer)) {
            charted_keys.insert(std::move(*key));
        } else {
            ++result.unkeyable_archive;
        }
    }

    result.tracks.reserve(catalog.size());
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        const auto key = make_key(catalog[i].title, catalog[i].artist, normalizer);
        if (!key) {
            result.unkeyable_catalog.push_back(i);
            continue;
        }
        const bool charted = charted_keys.contains(*key);
        result.positives += charted ? 1 : 0;
        result.tracks.push_back({catalog[i], charted});
    }
    return result;
}

std::vector<LabeledTrack> deduplicate_by_track_id(const std::vector<LabeledTrack> &tracks, std::size_t *dropped) {
    std::unordered_set<std::string> seen;
    std::vector<LabeledTrack> out;
    out.reserve(tracks.size());
    for (const auto &t : tracks) {
        if (seen.insert(t.track.track_id).second) {
            out.push_back(t);
        }
    }
    if (dropped != nullptr) {
        *dropped = tracks.size() - out.size();
    }
    return out;
}

std::vector<LabeledTrack> LabeledDataset::rows() const {
    std::vector<LabeledTrack> out;
    out.reserve(size());
    for (const auto &t : positives) {
        out.push_back({t, true});
    }
    for (const auto &t : negatives) {
        out.push_back({t, false});
    }
    return out;
}

LabeledDataset balance(const std::vector<LabeledTrack> &labeled, std::uint64_t seed) {
    std::unordered_set<std::string> ids;
    LabeledDataset dataset;
    dataset.seed = seed;
    std::vector<const TrackRecord *> negatives;
    for (const auto &row : labeled) {
        if (!ids.insert(row.track.track_id).second) {
            throw Error("balance: track_id '" + row.track.track_id + "' appears more than once");
        }
        if (row.charted) {
            dataset.positives.push_back(row.track);
        } else {
            negatives.push_back(&row.track);
        }
    }
    if (negatives.size() < dataset.positives.size()) {
        throw Error("balance: " + std::to_string(negatives.size()) + " negatives cannot match " +
                    std::to_string(dataset.positives.size()) +
                    " positives; undersample the positive class instead");
    }
    Rng rng(seed);
    auto picked = rng.sample_without_replacement(negatives.size(), dataset.positives.size());
    std::sort(picked.begin(), picked.end());
    dataset.negatives.reserve(picked.size());
    for (std::size_t index : picked) {
        dataset.negatives.push_back(*negatives[index]);
    }
    return dataset;
}

void write_labeled(std::ostream &out, const std::vector<LabeledTrack> &rows) {
    std::vector<std::string> header(kCatalogFields.begin(), kCatalogFields.end());
    header.emplace_back("charted");
    csv::write_row(out, header);
    for (const auto &row : rows) {
        auto fields = catalog_row(row.track);
        fields.emplace_back(row.charted ? "true" : "false");
        csv::write_row(out, fields);
    }
}

ParseResult<LabeledTrack> parse_labeled_text(std::string_view csv_text) {
    const csv::Table table = csv::parse(csv_text);
    const auto charted_column = table.column("charted");
    if (!charted_column) {
        throw SchemaError("labeled dataset lacks the 'charted' column");
    }
    auto tracks = parse_catalog(table, ColumnMapping::catalog_default());

    ParseResult<LabeledTrack> result;
    result.total_rows = tracks.total_rows;
    result.rejections = std::move(tracks.rejections);
    for (std::size_t i = 0; i < tracks.records.size(); ++i) {
        const std::size_t source = tracks.source_rows[i];
        const std::string flag = to_lower_ascii(trim(table.rows[source][*charted_column]));
        if (flag != "true" && flag != "false" && flag != "1" && flag != "0") {
            result.rejections.push_back({source + 1, "charted", "charted is not a boolean: '" + flag + "'"});
            continue;
        }
        result.records.push_back({std::move(tracks.records[i]), flag == "true" || flag == "1"});
        result.source_rows.push_back(source);
    }
    return result;
}

std::vector<LabeledTrack> read_labeled(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MissingArtifactError(path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    auto parsed = parse_labeled_text(buffer.str());
    if (!parsed.rejections.empty()) {
        const auto &r = parsed.rejections.front();
        throw SchemaError(path.string() + " row " + std::to_string(r.row) + ": " + r.reason);
    }
    return std::move(parsed.records);
}

} // namespace chartsight
