#include "chartsight/features.hpp"
#include "chartsight/linkage.hpp"
#include "support.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace chartsight;

TEST_CASE("cyclic encoding reference angles") {
    auto [c0, s0] = encode_cyclic(0, 12);
    CHECK(c0 == 1.0);
    CHECK(s0 == 0.0);
    auto [c3, s3] = encode_cyclic(3, 12);
    CHECK(std::fabs(c3) <= 1e-12);
    CHECK(std::fabs(s3 - 1.0) <= 1e-12);
    auto [c6, s6] = encode_cyclic(6, 12);
    CHECK(std::fabs(c6 + 1.0) <= 1e-12);
    CHECK(std::fabs(s6) <= 1e-12);
    CHECK_THROWS(encode_cyclic(1, 0));
    CHECK_THROWS(encode_cyclic(-1, 12));
}

TEST_CASE("cyclic encoding has unit norm and period 12") {
    for (int v = 0; v <= 12; ++v) {
        const auto [c, s] = encode_cyclic(v, 12);
        CHECK(std::fabs(c * c + s * s - 1.0) <= 1e-12);
        const auto [c2, s2] = encode_cyclic(v + 12, 12);
        CHECK(std::fabs(c - c2) <= 1e-12);
        CHECK(std::fabs(s - s2) <= 1e-12);
    }
}

TEST_CASE("boundary months") {
    CHECK(encode_boundary_months(1) == std::pair{1, 0});
    CHECK(encode_boundary_months(12) == std::pair{0, 1});
    for (int m = 2; m <= 11; ++m) {
        CHECK(encode_boundary_months(m) == std::pair{0, 0});
    }
    CHECK_THROWS(encode_boundary_months(0));
    CHECK_THROWS(encode_boundary_months(13));
}

TEST_CASE("genre one-hot follows the fixed order") {
    CHECK(encode_genre(Genre::pop) == std::array<double, 6>{1, 0, 0, 0, 0, 0});
    CHECK(encode_genre(Genre::rnb) == std::array<double, 6>{0, 0, 0, 0, 0, 1});
    for (std::size_t g = 0; g < kGenres.size(); ++g) {
        const auto v = encode_genre(kGenres[g]);
        double sum = 0.0;
        for (double x : v) {
            CHECK((x == 0.0 || x == 1.0));
            sum += x;
        }
        CHECK(sum == 1.0);
        CHECK(v[g] == 1.0);
    }
}

TEST_CASE("fit_standardizer uses the population standard deviation") {
    std::vector<TrackRecord> train;
    for (int d : {1, 2, 3}) {
        auto t = test_support::track(std::to_string(d));
        t.duration_ms = d;
        t.popularity = 10.0 * d;
        train.push_back(t);
    }
    const auto p = fit_standardizer(train);
    CHECK(p.mu_dur == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(std::fabs(p.sigma_dur - std::sqrt(2.0 / 3.0)) <= 1e-15);
    CHECK(p.mu_pop == doctest::Approx(20.0));

    std::vector<TrackRecord> flat(3, test_support::track("x"));
    CHECK_THROWS_WITH(fit_standardizer(flat), doctest::Contains("zero variance"));
    CHECK_THROWS(fit_standardizer(std::vector<TrackRecord>{}));

    const auto back = StandardizationParams::from_json(p.to_json());
    CHECK(back == p);
}

TEST_CASE("assemble reference vector") {
    auto t = test_support::track("r");
    t.key = 0;
    t.release_date = {2010, 1, 15, DatePrecision::day};
    t.genre = Genre::pop;
    t.instrumentalness = 0.25;
    t.speechiness = 0.125;
    t.valence = 0.75;
    t.loudness = -7.5;
    t.acousticness = 0.375;
    t.mode = 1;
    StandardizationParams p{t.popularity, 3.0, t.duration_ms, 1000.0};
    const FeatureVector x = assemble(t, p);
    const double pi = std::numbers::pi;
    const std::array<double, 20> expected = {0, 0, 0.25, 0.125, 0.75, -7.5, 0.375, 1, 1, 0,
                                             std::cos(pi / 6), std::sin(pi / 6), 1, 0, 1, 0, 0, 0, 0, 0};
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        CHECK_MESSAGE(std::fabs(x[i] - expected[i]) <= 1e-12, kFeatureNames[i]);
    }

    auto minor = t;
    minor.mode = 0;
    const FeatureVector y = assemble(minor, p);
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        if (i == feature::mode) {
            CHECK(x[i] != y[i]);
        } else {
            CHECK(x[i] == y[i]);
        }
    }

    FeatureOptions no_loudness;
    no_loudness.include_loudness = false;
    CHECK(assemble(t, p, no_loudness)[feature::loudness] == 0.0);
}

TEST_CASE("feature names and lookup") {
    CHECK(kFeatureNames.size() == 20);
    CHECK(feature_index("popularity_z") == std::size_t{0});
    CHECK(feature_index("popularity") == std::size_t{0});
    CHECK(feature_index("genre_rnb") == std::size_t{19});
    CHECK_FALSE(feature_index("tempo"));
}

TEST_CASE("train-fitted z-scores have mean 0 and variance 1 on the training split") {
    Rng rng(8);
    std::vector<LabeledTrack> train, validation;
    for (int i = 0; i < 2000; ++i) {
        auto t = test_support::track(std::to_string(i));
        t.popularity = std::round(rng.uniform(0, 100));
        t.duration_ms = std::round(rng.normal(220000, 40000));
        t.key = static_cast<int>(rng.below(12));
        t.release_date.month = 1 + static_cast<int>(rng.below(12));
        t.genre = kGenres[rng.below(6)];
        (i < 1600 ? train : validation).push_back({t, i % 2 == 0});
    }
    std::vector<TrackRecord> tracks;
    for (const auto &r : train) {
        tracks.push_back(r.track);
    }
    const auto params = fit_standardizer(tracks);
    const LabeledMatrix m = featurize(train, params);
    for (std::size_t j : {std::size_t{feature::popularity_z}, std::size_t{feature::duration_z}}) {
        const auto col = m.features.column(j);
        double mean = 0.0;
        for (double v : col) mean += v;
        mean /= static_cast<double>(col.size());
        double var = 0.0;
        for (double v : col) var += (v - mean) * (v - mean);
        var /= static_cast<double>(col.size());
        CHECK(std::fabs(mean) <= 1e-9);
        CHECK(std::fabs(var - 1.0) <= 1e-9);
    }
    // every row satisfies the vector invariants
    const LabeledMatrix v = featurize(validation, params);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto x = v.features.row(i);
        CHECK(std::fabs(x[feature::key_cos] * x[feature::key_cos] + x[feature::key_sin] * x[feature::key_sin] - 1) <=
              1e-12);
        CHECK(std::fabs(x[feature::month_cos] * x[feature::month_cos] +
                        x[feature::month_sin] * x[feature::month_sin] - 1) <= 1e-12);
        CHECK(x[feature::january] + x[feature::december] <= 1.0);
        double genre_sum = 0.0;
        for (std::size_t g = feature::genre_first; g < kFeatureCount; ++g) genre_sum += x[g];
        CHECK(genre_sum == 1.0);
    }
    CHECK(v.labels.size() == validation.size());
}

TEST_CASE("feature CSV round trip") {
    std::vector<LabeledTrack> rows = {{test_support::track("a"), true}, {test_support::track("b"), false}};
    rows[1].track.popularity = 20;
    rows[1].track.duration_ms = 123457;
    std::vector<TrackRecord> tracks = {rows[0].track, rows[1].track};
    const LabeledMatrix m = featurize(rows, fit_standardizer(tracks));
    test_support::TempDir dir("features");
    {
        std::ofstream out(dir.path() / "f.csv");
        write_features(out, m);
    }
    const LabeledMatrix back = read_features(dir.path() / "f.csv");
    CHECK(back.labels == m.labels);
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < kFeatureCount; ++j) {
            CHECK(back.features(i, j) == m.features(i, j));
        }
    }
}
