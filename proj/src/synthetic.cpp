#include "chartsight/synthetic.hpp"

#include "chartsight/common.hpp"
#include "chartsight/linkage.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <unordered_set>

namespace chartsight {

namespace {

struct Word {
    std::string_view display;
    std::string_view plain; // same word without diacritics
};

constexpr std::array<Word, 48> kTitleWords = {{
    {"Midnight", "Midnight"}, {"Golden", "Golden"},   {"Electric", "Electric"}, {"Summer", "Summer"},
    {"Broken", "Broken"},     {"Velvet", "Velvet"},   {"Neon", "Neon"},         {"Paper", "Paper"},
    {"Fire", "Fire"},         {"Ocean", "Ocean"},     {"Silver", "Silver"},     {"Wild", "Wild"},
    {"Heart", "Heart"},       {"Highway", "Highway"}, {"Dreams", "Dreams"},     {"Shadow", "Shadow"},
    {"Lights", "Lights"},     {"Thunder", "Thunder"}, {"Sugar", "Sugar"},       {"Rain", "Rain"},
    {"Gravity", "Gravity"},   {"Echo", "Echo"},       {"Crystal", "Crystal"},   {"Runaway", "Runaway"},
    {"Satellite", "Satellite"}, {"Honey", "Honey"},   {"Ghost", "Ghost"},       {"Paradise", "Paradise"},
    {"Diamond", "Diamond"},   {"Stereo", "Stereo"},   {"Rebel", "Rebel"},       {"Cherry", "Cherry"},
    {"Motion", "Motion"},     {"Secret", "Secret"},   {"Horizon", "Horizon"},   {"Magnetic", "Magnetic"},
    {"Lonely", "Lonely"},     {"Fever", "Fever"},     {"Sunset", "Sunset"},     {"Static", "Static"},
    {"Café", "Cafe"},         {"Corazón", "Corazon"}, {"Mañana", "Manana"},     {"Niña", "Nina"},
    {"Déjà", "Deja"},         {"Noël", "Noel"},       {"Canción", "Cancion"},   {"Señorita", "Senorita"},
}};

constexpr std::array<Word, 32> kFirstNames = {{
    {"Ava", "Ava"},       {"Leo", "Leo"},       {"Maya", "Maya"},   {"Jonah", "Jonah"},
    {"Nia", "Nia"},       {"Theo", "Theo"},     {"Iris", "Iris"},   {"Marcus", "Marcus"},
    {"Lena", "Lena"},     {"Omar", "Omar"},     {"Ruby", "Ruby"},   {"Felix", "Felix"},
    {"Zara", "Zara"},     {"Caleb", "Caleb"},   {"Skye", "Skye"},   {"Dante", "Dante"},
    {"June", "June"},     {"Elias", "Elias"},   {"Nova", "Nova"},   {"Kai", "Kai"},
    {"Lila", "Lila"},     {"Rafael", "Rafael"}, {"Tess", "Tess"},   {"Milo", "Milo"},
    {"José", "Jose"},     {"Zoë", "Zoe"},       {"Renée", "Renee"}, {"Inés", "Ines"},
    {"Björn", "Bjorn"},   {"Chloé", "Chloe"},   {"André", "Andre"}, {"Lúcia", "Lucia"},
}};

constexpr std::array<std::string_view, 24> kLastNames = {
    "Rivers", "Stone",  "Vega",   "Knight", "Hale",   "Moreno", "Park",   "Quinn",
    "Blake",  "Cruz",   "Frost",  "Reyes",  "Monroe", "Lane",   "Wolfe",  "Santos",
    "Ellis",  "Cole",   "Jordan", "Price",  "Sky",    "Nash",   "Banks",  "Ortiz",
};

// descriptors appended on the archive side only
constexpr std::array<std::string_view, 4> kArchiveSuffixes = {" (Radio Edit)", " - Remastered", " [Remix]",
                                                              " (Explicit Version)"};

std::string upper_ascii(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>(c >= 'a' && c <= 'z' ? c - 'a' + 'A' : c);
    });
    return out;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// days since 1970-01-01 for a proleptic Gregorian date, and back
long long days_from_civil(int y, int m, int d) {
    y -= m <= 2 ? 1 : 0;
    const long long era = (y >= 0 ? y : y - 399) / 400;
    const long long yoe = y - era * 400;
    const long long doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const long long doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

CalendarDate civil_from_days(long long z) {
    z += 719468;
    const long long era = (z >= 0 ? z : z - 146096) / 146097;
    const long long doe = z - era * 146097;
    const long long yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long long doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const long long mp = (5 * doy + 2) / 153;
    CalendarDate date;
    date.day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    date.month = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
    date.year = static_cast<int>(yoe + era * 400 + (date.month <= 2 ? 1 : 0));
    date.precision = DatePrecision::day;
    return date;
}

std::size_t draw_weighted(Rng &rng, std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
        total += w;
    }
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (u < weights[i]) {
            return i;
        }
        u -= weights[i];
    }
    return weights.size() - 1;
}

std::string draw_track_id(Rng &rng) {
    static constexpr std::string_view kAlphabet = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";
    std::string id(22, '0');
    for (char &c : id) {
        c = kAlphabet[rng.below(kAlphabet.size())];
    }
    return id;
}

struct Naming {
    std::size_t title_a, title_b, first, last;
};

std::string title_of(const Naming &n, bool plain) {
    const Word &a = kTitleWords[n.title_a];
    const Word &b = kTitleWords[n.title_b];
    return std::string(plain ? a.plain : a.display) + " " + std::string(plain ? b.plain : b.display);
}

std::string artist_of(const Naming &n, bool plain) {
    const Word &f = kFirstNames[n.first];
    return std::string(plain ? f.plain : f.display) + " " + std::string(kLastNames[n.last]);
}

void draw_audio(Rng &rng, bool charted, TrackRecord &t) {
    if (charted) {
        t.popularity = std::round(std::clamp(rng.normal(70.0, 8.0), 0.0, 100.0));
        t.instrumentalness = clamp01(std::fabs(rng.normal(0.0, 0.03)));
        t.speechiness = std::clamp(std::fabs(rng.normal(0.10, 0.08)), 0.02, 0.6);
        t.valence = clamp01(rng.normal(0.55, 0.20));
        t.loudness = std::clamp(rng.normal(-6.0, 2.0), -60.0, 0.0);
        t.acousticness = 0.6 * std::pow(rng.uniform(), 2.0);
        t.duration_ms = std::round(std::clamp(rng.normal(215000.0, 35000.0), 90000.0, 400000.0));
    } else {
        // obscure releases, mid-catalog tracks, and popular near-misses
        const double tier = rng.uniform();
        const double pop = tier < 0.25 ? rng.normal(10.0, 8.0) : tier < 0.8 ? rng.normal(42.0, 11.0)
                                                                            : rng.normal(66.0, 10.0);
        t.popularity = std::round(std::clamp(pop, 0.0, 100.0));
        t.instrumentalness =
            rng.bernoulli(0.3) ? rng.uniform(0.2, 0.95) : clamp01(std::fabs(rng.normal(0.0, 0.05)));
        t.speechiness = std::clamp(std::fabs(rng.normal(0.08, 0.07)), 0.02, 0.9);
        t.valence = clamp01(rng.normal(0.48, 0.24));
        t.loudness = std::clamp(rng.normal(-8.0, 3.5), -60.0, 0.0);
        t.acousticness = std::pow(rng.uniform(), 1.5);
        t.duration_ms = std::round(std::clamp(rng.normal(235000.0, 60000.0), 60000.0, 590000.0));
    }
    t.danceability = clamp01(rng.normal(0.65, 0.15));
    t.energy = clamp01(rng.normal(0.65, 0.18));
    t.liveness = clamp01(std::fabs(rng.normal(0.18, 0.12)));
    t.tempo = std::max(60.0, rng.normal(120.0, 25.0));
    t.mode = rng.bernoulli(0.56) ? 1 : 0;
    t.key = static_cast<int>(rng.below(12));
}

} // namespace

SyntheticCorpus generate_synthetic_corpus(std::uint64_t seed, const SyntheticOptions &options) {
    if (options.charting > options.catalog_size) {
        throw ConfigError("synthetic corpus: more charting tracks than catalog rows");
    }
    Rng rng(seed);
    std::vector<bool> charted(options.catalog_size, false);
    for (std::size_t i : rng.sample_without_replacement(options.catalog_size, options.charting)) {
        charted[i] = true;
    }

    // charting tracks favour January releases and avoid December ones
    static constexpr std::array<double, 12> kChartMonthWeights = {1.6, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0.5};
    static constexpr std::array<double, 12> kUniformMonths = {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
    static constexpr std::array<double, 6> kChartGenreWeights = {0.25, 0.22, 0.10, 0.15, 0.10, 0.18};
    static constexpr std::array<double, 6> kUniformGenres = {1, 1, 1, 1, 1, 1};

    SyntheticCorpus corpus;
    corpus.catalog.reserve(options.catalog_size);
    std::unordered_set<std::string> keys;
    std::unordered_set<std::string> ids;
    for (std::size_t i = 0; i < options.catalog_size; ++i) {
        const bool positive = charted[i];
        TrackRecord t;
        do {
            t.track_id = draw_track_id(rng);
        } while (!ids.insert(t.track_id).second);

        Naming naming{};
        for (;;) {
            naming = {rng.below(kTitleWords.size()), rng.below(kTitleWords.size()), rng.below(kFirstNames.size()),
                      rng.below(kLastNames.size())};
            // a trailing part number widens the title space well beyond the catalog size
            const std::string part = rng.bernoulli(0.5) ? "" : " " + std::to_string(2 + rng.below(98));
            t.title = title_of(naming, false) + part;
            t.artist = artist_of(naming, false);
            const auto key = make_key(t.title, t.artist);
            if (key && keys.insert(key->title + '\x1f' + key->artist).second) {
                break;
            }
        }

        t.genre = kGenres[draw_weighted(rng, positive ? std::span<const double>(kChartGenreWeights)
                                                      : std::span<const double>(kUniformGenres))];
        draw_audio(rng, positive, t);

        const int year = 1990 + static_cast<int>(rng.below(30));
        const int month = 1 + static_cast<int>(draw_weighted(
                                  rng, positive ? std::span<const double>(kChartMonthWeights)
                                                : std::span<const double>(kUniformMonths)));
        const int day = 1 + static_cast<int>(rng.below(28));
        if (rng.bernoulli(options.year_only_share)) {
            t.release_date = {year, 1, 1, DatePrecision::year};
        } else {
            t.release_date = {year, month, day, DatePrecision::day};
        }

        if (positive) {
            const std::size_t weeks = 1 + rng.below(6);
            const long long start = days_from_civil(t.release_date.year, t.release_date.month,
                                                    t.release_date.day) +
                                    7 * static_cast<long long>(rng.below(8));
            const auto variant = rng.below(6);
            ChartEntry entry;
            entry.artist = artist_of(naming, variant == 4);
            entry.title = t.title;
            switch (variant) {
            case 1:
                entry.title = upper_ascii(entry.title);
                break;
            case 2:
                entry.title += kArchiveSuffixes[rng.below(kArchiveSuffixes.size())];
                break;
            case 3:
                entry.artist = upper_ascii(entry.artist);
                break;
            case 4:
                entry.title = title_of(naming, true) + t.title.substr(title_of(naming, false).size());
                break;
            default:
                break;
            }
            for (std::size_t w = 0; w < weeks; ++w) {
                entry.chart_date = civil_from_days(start + 7 * static_cast<long long>(w));
                entry.rank = 1 + static_cast<int>(rng.below(100));
                corpus.archive.push_back(entry);
            }
        }
        corpus.catalog.push_back(std::move(t));
    }
    std::stable_sort(corpus.archive.begin(), corpus.archive.end(), [](const ChartEntry &a, const ChartEntry &b) {
        return days_from_civil(a.chart_date.year, a.chart_date.month, a.chart_date.day) <
               days_from_civil(b.chart_date.year, b.chart_date.month, b.chart_date.day);
    });
    return corpus;
}

} // namespace chartsight
