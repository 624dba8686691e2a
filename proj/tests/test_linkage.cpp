#include "chartsight/common.hpp"
#include "chartsight/linkage.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

using namespace chartsight;

TEST_CASE("normalize_text reference cases") {
    CHECK(normalize_text(" Héllo, World (Radio Edit) ") == "hello world");
    CHECK(normalize_text("Song Name - Remastered") == "song name");
    CHECK(normalize_text("abc") == "abc");
    CHECK(normalize_text("Don't Stop [LIVE VERSION]") == "dont stop");
    CHECK(normalize_text("Señorita – Acoustic Version") == "senorita");
    CHECK(normalize_text("Beyoncé\tKnowles") == "beyonce knowles");
    CHECK(normalize_text("(Remix)").empty());
    // descriptors only go when they are the whole group
    CHECK(normalize_text("Remix Me (Remix Edition)") == "remix me remix edition");
    CHECK(normalize_text("P!nk") == "pnk");
    CHECK(normalize_text("Mambo No. 5") == "mambo no 5");
}

TEST_CASE("normalize_text is idempotent over a fuzz corpus") {
    static const std::vector<std::string> pieces = {
        "a",  "Z",  "é",  "Ñ",  "ß", "ø",  "ü",     " ",      "\t",     "  ", "-",         "–",
        "—",  "(",  ")",  "[",  "]", ",",  "'",     "!",      "7",      "۳",  "漢",        "ı",
        "İ",  "ǅ",  "ﬁ", "Å",  "😀", " ", " ", "remix", "Remastered", "radio edit", "(Live Version)",
        " - ", "x́", "ά", "ᾲ", "Ω", "ﬀ", "Ⅻ", "²", "٣", "ǈ"};
    Rng rng(2024);
    const TextNormalizer normalizer;
    for (int i = 0; i < 10000; ++i) {
        std::string s;
        const auto len = 1 + rng.below(12);
        for (std::size_t k = 0; k < len; ++k) {
            s += pieces[rng.below(pieces.size())];
        }
        const std::string once = normalizer(s);
        const std::string twice = normalizer(once);
        REQUIRE_MESSAGE(once == twice, "input: " << s);
        // only lowercase letters, digits and single inner spaces
        CHECK(once.find("  ") == std::string::npos);
        if (!once.empty()) {
            CHECK(once.front() != ' ');
            CHECK(once.back() != ' ');
        }
        for (unsigned char c : once) {
            if (c < 0x80) {
                CHECK((std::islower(c) || std::isdigit(c) || c == ' '));
            }
        }
    }
}

TEST_CASE("make_key") {
    auto key = make_key("Hello (Remix)", "ADELE");
    REQUIRE(key);
    CHECK(key->title == "hello");
    CHECK(key->artist == "adele");
    CHECK(make_key("A", "B") == MatchKey{"a", "b"});
    CHECK_FALSE(make_key("(Remix)", ""));
    CHECK(make_key("", "Solo"));
}

TEST_CASE("custom descriptor phrases from file") {
    test_support::TempDir dir("phrases");
    const auto path = dir.path() / "phrases.txt";
    std::ofstream(path) << "# extra\nsped up\n\nremix\n";
    const auto phrases = load_descriptor_phrases(path);
    CHECK(phrases == std::vector<std::string>{"sped up", "remix"});
    const TextNormalizer normalizer(phrases);
    CHECK(normalizer("Song (Sped Up)") == "song");
    CHECK(normalizer("Song (Radio Edit)") == "song radio edit");
}

TEST_CASE("label_tracks on a hand-built golden corpus") {
    using test_support::track;
    const std::vector<TrackRecord> catalog = {
        track("1", "Hello", "Adele"),
        track("2", "Señorita", "Shawn Mendes & Camila Cabello"),
        track("3", "Bad Guy", "Billie Eilish"),
        track("4", "Old Town Road - Remix", "Lil Nas X"),
        track("5", "Obscure Demo", "Nobody"),
        track("6", "Hello", "Lionel Richie"),
        track("7", "(Remix)", ""),
        track("8", "Blinding Lights", "The Weeknd"),
    };
    const std::vector<ChartEntry> archive = {
        {{2015, 11, 14, DatePrecision::day}, 1, "HELLO", "adele"},
        {{2019, 7, 6, DatePrecision::day}, 3, "Senorita", "Shawn Mendes & Camila Cabello"},
        {{2019, 8, 17, DatePrecision::day}, 1, "Bad Guy (Radio Edit)", "Billie Eilish"},
        {{2019, 4, 13, DatePrecision::day}, 1, "Old Town Road", "Lil Nas X"},
        // multi-artist credit differs from the catalog string: no match by design
        {{2020, 3, 7, DatePrecision::day}, 1, "Blinding Lights", "The Weeknd feat. Someone"},
        {{2020, 3, 7, DatePrecision::day}, 50, "", ""},
    };
    const LabelingResult result = label_tracks(catalog, archive);
    std::vector<bool> labels;
    for (const auto &row : result.tracks) {
        labels.push_back(row.charted);
    }
    CHECK(labels == std::vector<bool>{true, true, true, true, false, false, false});
    CHECK(result.positives == 4);
    CHECK(result.unkeyable_catalog == std::vector<std::size_t>{6});
    CHECK(result.unkeyable_archive == 1);
}

TEST_CASE("adding archive rows never unlabels a track") {
    Rng rng(11);
    std::vector<TrackRecord> catalog;
    std::vector<ChartEntry> archive;
    for (int i = 0; i < 200; ++i) {
        catalog.push_back(test_support::track(std::to_string(i), "Song " + std::to_string(rng.below(60)),
                                              "Artist " + std::to_string(rng.below(10))));
    }
    std::vector<bool> previous(catalog.size(), false);
    for (int step = 0; step < 30; ++step) {
        archive.push_back({{2000, 1, 1, DatePrecision::day}, 1, "SONG " + std::to_string(rng.below(60)),
                           "artist " + std::to_string(rng.below(10))});
        const auto result = label_tracks(catalog, archive);
        for (std::size_t i = 0; i < catalog.size(); ++i) {
            if (previous[i]) {
                CHECK(result.tracks[i].charted);
            }
            previous[i] = result.tracks[i].charted;
        }
    }
}

namespace {

std::vector<LabeledTrack> labeled_pool(int positives, int negatives) {
    std::vector<LabeledTrack> rows;
    for (int i = 0; i < positives + negatives; ++i) {
        rows.push_back({test_support::track("id" + std::to_string(i)), i < positives});
    }
    return rows;
}

} // namespace

TEST_CASE("balance keeps all positives and samples equal negatives") {
    const auto pool = labeled_pool(3590, 26410);
    const LabeledDataset a = balance(pool, 99);
    CHECK(a.positives.size() == 3590);
    CHECK(a.negatives.size() == 3590);
    std::set<std::string> ids;
    for (const auto &t : a.negatives) {
        ids.insert(t.track_id);
    }
    CHECK(ids.size() == 3590);
    const LabeledDataset b = balance(pool, 99);
    CHECK(a.negatives == b.negatives);
    const LabeledDataset c = balance(pool, 100);
    CHECK_FALSE(a.negatives == c.negatives);

    const LabeledDataset tiny = balance(labeled_pool(2, 2), 1);
    CHECK(tiny.size() == 4);
    CHECK(tiny.negatives[0].track_id == "id2");
    CHECK(tiny.negatives[1].track_id == "id3");
}

TEST_CASE("balance rejects too few negatives and duplicate ids") {
    CHECK_THROWS_WITH_AS(balance(labeled_pool(5, 3), 1), doctest::Contains("undersample"), Error);
    auto pool = labeled_pool(2, 3);
    pool[4].track.track_id = "id0";
    CHECK_THROWS(balance(pool, 1));
}

TEST_CASE("deduplicate_by_track_id keeps the first occurrence") {
    auto pool = labeled_pool(1, 3);
    pool[3].track.track_id = "id1";
    std::size_t dropped = 0;
    const auto unique = deduplicate_by_track_id(pool, &dropped);
    CHECK(unique.size() == 3);
    CHECK(dropped == 1);
}

TEST_CASE("labeled CSV round trip") {
    const auto pool = labeled_pool(3, 4);
    std::ostringstream out;
    write_labeled(out, pool);
    const auto back = parse_labeled_text(out.str());
    CHECK(back.rejections.empty());
    CHECK(back.records == pool);
    CHECK_THROWS_AS(read_labeled("/nonexistent/labeled.csv"), MissingArtifactError);
}
