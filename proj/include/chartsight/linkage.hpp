#pragma once

#include "chartsight/ingest.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chartsight {

/// Release descriptors removed before matching when they appear as a
/// parenthesized, bracketed or dash-suffixed group.
std::vector<std::string> default_descriptor_phrases();

/// One phrase per line; blank lines and '#' comments ignored.
std::vector<std::string> load_descriptor_phrases(const std::filesystem::path &path);

/// Lowercases, strips accents (canonical decomposition minus combining
/// marks), removes descriptor groups, deletes every character that is not a
/// letter, digit or whitespace, and collapses whitespace. Idempotent.
class TextNormalizer {
  public:
    TextNormalizer();
    explicit TextNormalizer(std::vector<std::string> phrases);

    std::string operator()(std::string_view raw) const;
    const std::vector<std::string> &phrases() const { return phrases_; }

  private:
    std::vector<std::string> phrases_;
};

/// Normalization with the default descriptor list.
std::string normalize_text(std::string_view raw);

struct MatchKey {
    std::string title;
    std::string artist;

    friend bool operator==(const MatchKey &, const MatchKey &) = default;
};

struct MatchKeyHash {
    std::size_t operator()(const MatchKey &key) const noexcept;
};

/// nullopt when title and artist both normalize to the empty string.
std::optional<MatchKey> make_key(std::string_view title, std::string_view artist,
                                 const TextNormalizer &normalizer = TextNormalizer());

struct LabeledTrack {
    TrackRecord track;
    bool charted = false;

    friend bool operator==(const LabeledTrack &, const LabeledTrack &) = default;
};

struct LabelingResult {
    std::vector<LabeledTrack> tracks;
    std::size_t positives = 0;
    /// Catalog positions excluded because their key was empty.
    std::vector<std::size_t> unkeyable_catalog;
    std::size_t unkeyable_archive = 0;
};

/// A track is charted iff its key equals the key of any archive entry.
LabelingResult label_tracks(const std::vector<TrackRecord> &catalog, const std::vector<ChartEntry> &archive,
                            const TextNormalizer &normalizer = TextNormalizer());

/// Keeps the first occurrence of every track_id.
std::vector<LabeledTrack> deduplicate_by_track_id(const std::vector<LabeledTrack> &tracks,
                                                  std::size_t *dropped = nullptr);

struct LabeledDataset {
    std::vector<TrackRecord> positives;
    std::vector<TrackRecord> negatives;
    std::uint64_t seed = 0;

    std::size_t size() const { return positives.size() + negatives.size(); }
    /// Positives first, then negatives, each in source order.
    std::vector<LabeledTrack> rows() const;
};

/// All positives plus an equally sized uniform sample of negatives.
LabeledDataset balance(const std::vector<LabeledTrack> &labeled, std::uint64_t seed);

/// Catalog columns followed by `charted` (true/false).
void write_labeled(std::ostream &out, const std::vector<LabeledTrack> &rows);
ParseResult<LabeledTrack> parse_labeled_text(std::string_view csv_text);
std::vector<LabeledTrack> read_labeled(const std::filesystem::path &path);

} // namespace chartsight
