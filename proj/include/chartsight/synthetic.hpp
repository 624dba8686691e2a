#pragma once

#include "chartsight/ingest.hpp"

#include <cstdint>
#include <vector>

namespace chartsight {

struct SyntheticOptions {
    std::size_t catalog_size = 30000;
    std::size_t charting = 3590;
    /// Share of catalog rows whose release date carries only the year.
    double year_only_share = 0.02;
};

struct SyntheticCorpus {
    std::vector<TrackRecord> catalog;
    std::vector<ChartEntry> archive;
};

/// Catalog plus chart archive with a known answer: exactly `charting` catalog
/// tracks appear in the archive, under spellings that differ from the catalog
/// (case, accents, edit/remaster suffixes) but normalize to the same key.
/// Popularity separates the classes most strongly; instrumentalness,
/// speechiness, duration, valence and release month carry weaker signal.
SyntheticCorpus generate_synthetic_corpus(std::uint64_t seed, const SyntheticOptions &options = {});

} // namespace chartsight
