#include "chartsight/common.hpp"
#include "chartsight/csv.hpp"
#include "chartsight/ingest.hpp"
#include "support.hpp"

#include <doctest.h>

#include <set>
#include <sstream>

using namespace chartsight;

TEST_CASE("rng is reproducible and bounded") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next() == b.next());
    }
    Rng r(9);
    for (int i = 0; i < 10000; ++i) {
        const auto v = r.below(7);
        CHECK(v < 7);
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    const auto sample = Rng(5).sample_without_replacement(50, 20);
    CHECK(std::set<std::size_t>(sample.begin(), sample.end()).size() == 20);
    CHECK(Rng::stream(1, 0).next() != Rng::stream(1, 1).next());
}

TEST_CASE("parallel_for visits each index once and rethrows") {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::count(hits.begin(), hits.end(), 1) == 1000);
    CHECK_THROWS_AS(parallel_for(10, 2,
                                 [](std::size_t i) {
                                     if (i == 3) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
}

TEST_CASE("number formatting round-trips") {
    for (double v : {0.1, -5.25, 1e-300, 123456789.125, 0.0}) {
        double back = 0;
        REQUIRE(parse_double(format_double(v), back));
        CHECK(back == v);
    }
    double d = 0;
    CHECK_FALSE(parse_double("1.5x", d));
    CHECK_FALSE(parse_double("nan", d));
    long long k = 0;
    CHECK(parse_int("5.0", k));
    CHECK(k == 5);
    CHECK_FALSE(parse_int("5.5", k));
}

TEST_CASE("csv parser handles quotes, embedded newlines and BOM") {
    const auto table = csv::parse("\xEF\xBB\xBF" "a,b,c\n1,\"x, y\",\"he said \"\"hi\"\"\"\n\n2,\"multi\nline\",3\r\n");
    REQUIRE(table.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0][1] == "x, y");
    CHECK(table.rows[0][2] == "he said \"hi\"");
    CHECK(table.rows[1][1] == "multi\nline");
    CHECK(table.rows[1][2] == "3");
    CHECK_THROWS_AS(csv::parse("a,b\n1,\"open\n"), SchemaError);

    std::ostringstream out;
    csv::write_row(out, {"plain", "with,comma", "with\"quote"});
    const auto back = csv::parse("h1,h2,h3\n" + out.str());
    CHECK(back.rows[0] == std::vector<std::string>{"plain", "with,comma", "with\"quote"});
}

TEST_CASE("dates: ISO day, month and year-only forms") {
    auto d = parse_date("2001-03-10");
    REQUIRE(d);
    CHECK(d->year == 2001);
    CHECK(d->month == 3);
    CHECK(d->day == 10);
    CHECK_FALSE(d->month_imputed());

    auto y = parse_date("1999");
    REQUIRE(y);
    CHECK(y->month == 1);
    CHECK(y->day == 1);
    CHECK(y->month_imputed());
    CHECK(y->to_string() == "1999");

    CHECK(parse_date("2004-07")->precision == DatePrecision::month);
    CHECK(parse_date("2010-05-06T00:00:00")->day == 6);
    CHECK_FALSE(parse_date("2001-02-29"));
    CHECK(parse_date("2000-02-29"));
    CHECK_FALSE(parse_date("2001-13-01"));
    CHECK_FALSE(parse_date("yesterday"));
}

TEST_CASE("validate_record names the violated invariant") {
    auto t = test_support::track("a");
    t.loudness = -30.0;
    CHECK(validate_record(t).empty());

    auto long_track = test_support::track("b");
    long_track.duration_ms = 7e5;
    auto v = validate_record(long_track);
    REQUIRE(v.size() == 1);
    CHECK(v[0].reason == "duration exceeds 6e5 ms");

    auto bright = test_support::track("c");
    bright.valence = 1.5;
    v = validate_record(bright);
    REQUIRE(v.size() == 1);
    CHECK(v[0].reason == "valence out of [0,1]");

    auto odd_key = test_support::track("d");
    odd_key.key = 12;
    CHECK(validate_record(odd_key).at(0).reason == "key out of {0..11}");

    auto old = test_support::track("e");
    old.release_date = {1984, 5, 1, DatePrecision::day};
    CHECK_FALSE(validate_record(old).empty());
}

namespace {

std::string catalog_csv(const std::vector<TrackRecord> &records) {
    std::ostringstream out;
    write_catalog(out, records);
    return out.str();
}

} // namespace

TEST_CASE("parse_catalog accepts valid rows and logs rejections") {
    auto good = test_support::track("id1", "Hello, \"World\"", "Artist");
    auto bad_key = test_support::track("id2");
    bad_key.key = 12;
    const std::string text = catalog_csv({good, bad_key}) +
                             "id3,T,A,2010-01-01,pop,0.1,0.2,0.3,0.4,0.5,0.6,0.7,-5,50,abc,1,3,200000\n" +
                             "id4,T,A,2010-01-01,pop,0.1\n";
    const auto result = parse_catalog_text(text, ColumnMapping::catalog_default());
    REQUIRE(result.records.size() == 1);
    CHECK(result.records[0] == good);
    CHECK(result.total_rows == 4);
    CHECK(result.records.size() + result.rejections.size() == result.total_rows);
    REQUIRE(result.rejections.size() == 3);
    CHECK(result.rejections[0].row == 2);
    CHECK(result.rejections[0].reason == "key out of {0..11}");
    CHECK(result.rejections[1].field == "tempo");
}

TEST_CASE("catalog round trip reproduces records exactly") {
    std::vector<TrackRecord> records;
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        auto t = test_support::track("t" + std::to_string(i), "Títle " + std::to_string(i), "Ärtist, \"X\"");
        t.valence = rng.uniform();
        t.loudness = -rng.uniform(0, 60);
        t.tempo = rng.uniform(60, 200);
        t.release_date = i % 5 == 0 ? CalendarDate{2000 + i % 20, 1, 1, DatePrecision::year}
                                    : CalendarDate{2000 + i % 20, 1 + i % 12, 1 + i % 28, DatePrecision::day};
        records.push_back(t);
    }
    const auto back = parse_catalog_text(catalog_csv(records), ColumnMapping::catalog_default());
    CHECK(back.rejections.empty());
    CHECK(back.records == records);
}

TEST_CASE("missing required column is a schema error") {
    CHECK_THROWS_AS(parse_catalog_text("track_id,title\nx,y\n", ColumnMapping::catalog_default()), SchemaError);
    CHECK_THROWS_AS(parse_chart_archive_text("date,rank,title\n2001-01-01,1,x\n"), SchemaError);
}

TEST_CASE("column mapping renames headers") {
    const std::string text =
        "track_id,track_name,track_artist,track_album_release_date,playlist_genre,acousticness,danceability,"
        "energy,instrumentalness,liveness,speechiness,valence,loudness,track_popularity,tempo,mode,key,"
        "duration_ms\n"
        "x1,Song,Artist,2019-06,r&b,0.1,0.5,0.5,0,0.1,0.05,0.5,-6,70,100,1,2,180000\n";
    const auto result = parse_catalog_text(text, ColumnMapping::catalog_spotify_export());
    REQUIRE(result.records.size() == 1);
    CHECK(result.records[0].genre == Genre::rnb);
    CHECK(result.records[0].title == "Song");
}

TEST_CASE("clamp option pulls descriptors into range") {
    auto t = test_support::track("c1");
    t.valence = 1.2;
    t.popularity = 101;
    const std::string text = catalog_csv({t});
    CHECK(parse_catalog_text(text, ColumnMapping::catalog_default()).records.empty());
    IngestOptions options;
    options.clamp = true;
    const auto clamped = parse_catalog_text(text, ColumnMapping::catalog_default(), options);
    REQUIRE(clamped.records.size() == 1);
    CHECK(clamped.records[0].valence == 1.0);
    CHECK(clamped.records[0].popularity == 100.0);
}

TEST_CASE("chart archive: valid rows, rank and date rejections, duplicates kept") {
    const auto result = parse_chart_archive_text("date,rank,title,artist\n"
                                                 "2001-03-10,1,Song,Artist\n"
                                                 "2001-03-17,1,Song,Artist\n"
                                                 "2001-03-24,101,Song,Artist\n"
                                                 "2001-3x,5,Song,Artist\n");
    REQUIRE(result.records.size() == 2);
    CHECK(result.records[0].chart_date == CalendarDate{2001, 3, 10, DatePrecision::day});
    CHECK(result.records[0].rank == 1);
    REQUIRE(result.rejections.size() == 2);
    CHECK(result.rejections[0].row == 3);
    CHECK(result.rejections[1].row == 4);
}

TEST_CASE("rejection log is one JSON object per line") {
    std::ostringstream out;
    write_rejections(out, {{3, "key", "key out of {0..11}"}});
    CHECK(out.str() == "{\"field\":\"key\",\"reason\":\"key out of {0..11}\",\"row\":3}\n");
}
