#pragma once

#include "chartsight/ingest.hpp"
#include "chartsight/linkage.hpp"

#include <unistd.h>

#include <filesystem>
#include <string>

namespace test_support {

inline chartsight::TrackRecord track(std::string id, std::string title = "Song", std::string artist = "Artist") {
    chartsight::TrackRecord t;
    t.track_id = std::move(id);
    t.title = std::move(title);
    t.artist = std::move(artist);
    t.release_date = {2015, 6, 12, chartsight::DatePrecision::day};
    t.genre = chartsight::Genre::pop;
    t.acousticness = 0.1;
    t.danceability = 0.7;
    t.energy = 0.8;
    t.instrumentalness = 0.0;
    t.liveness = 0.1;
    t.speechiness = 0.05;
    t.valence = 0.6;
    t.loudness = -5.0;
    t.popularity = 60.0;
    t.tempo = 120.0;
    t.mode = 1;
    t.key = 5;
    t.duration_ms = 200000.0;
    return t;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string &tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("chartsight_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    const std::filesystem::path &path() const { return path_; }

  private:
    static int &counter() {
        static int n = 0;
        return n;
    }
    std::filesystem::path path_;
};

} // namespace test_support
