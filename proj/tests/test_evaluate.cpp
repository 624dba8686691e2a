#include "chartsight/evaluate.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <set>

using namespace chartsight;

namespace {

LabeledDataset dataset(std::size_t positives, std::size_t negatives) {
    LabeledDataset d;
    for (std::size_t i = 0; i < positives; ++i) d.positives.push_back(test_support::track("p" + std::to_string(i)));
    for (std::size_t i = 0; i < negatives; ++i) d.negatives.push_back(test_support::track("n" + std::to_string(i)));
    return d;
}

} // namespace

TEST_CASE("round_half_up_share on exact halves") {
    CHECK(round_half_up_share(10, 0.25) == 3);
    CHECK(round_half_up_share(3590, 0.2) == 718);
    CHECK(round_half_up_share(10, 0.2) == 2);
    CHECK(round_half_up_share(5, 0.5) == 3);
    CHECK(round_half_up_share(7, 0.2) == 1);
}

TEST_CASE("stratified split sizes") {
    const SplitResult big = stratified_split(dataset(3590, 3590), 0.2, 42);
    CHECK(big.validation.size() == 1436);
    CHECK(big.validation_positives == 718);
    CHECK(big.validation_negatives == 718);
    CHECK(big.train.size() == 5744);

    const SplitResult small = stratified_split(dataset(10, 10), 0.2, 1);
    CHECK(small.validation_positives == 2);
    CHECK(small.validation_negatives == 2);

    CHECK_THROWS_AS(stratified_split(dataset(10, 10), 0.0, 1), ConfigError);
    CHECK_THROWS_AS(stratified_split(dataset(10, 10), 1.0, 1), ConfigError);
    CHECK_THROWS_AS(stratified_split(dataset(1, 1), 0.2, 1), ConfigError);
    CHECK_THROWS_AS(stratified_split(dataset(0, 5), 0.2, 1), ConfigError);
}

TEST_CASE("stratified split is a deterministic partition") {
    const LabeledDataset d = dataset(137, 137);
    const SplitResult a = stratified_split(d, 0.2, 7);
    const SplitResult b = stratified_split(d, 0.2, 7);
    CHECK(a.validation_indices == b.validation_indices);
    CHECK(a.validation == b.validation);
    const SplitResult c = stratified_split(d, 0.2, 8);
    CHECK(a.validation_indices != c.validation_indices);

    std::multiset<std::string> ids;
    std::size_t val_pos = 0;
    for (const auto &r : a.train) ids.insert(r.track.track_id);
    for (const auto &r : a.validation) {
        ids.insert(r.track.track_id);
        val_pos += r.charted;
    }
    CHECK(ids.size() == d.size());
    CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == d.size());
    CHECK(val_pos == a.validation_positives);
    CHECK(a.validation_positives == round_half_up_share(137, 0.2));
    const auto rows = d.rows();
    for (std::size_t k = 0; k < a.validation_indices.size(); ++k) {
        CHECK(rows[a.validation_indices[k]] == a.validation[k]);
        if (k > 0) CHECK(a.validation_indices[k - 1] < a.validation_indices[k]);
    }
}

TEST_CASE("confusion agrees with a naive count") {
    Rng rng(3);
    std::vector<int> pred, label;
    for (int i = 0; i < 1000; ++i) {
        pred.push_back(static_cast<int>(rng.below(2)));
        label.push_back(static_cast<int>(rng.below(2)));
    }
    const ConfusionMatrix cm = confusion(pred, label);
    CHECK(cm == oracle::count_confusion(pred, label));
    CHECK(cm.total() == 1000);

    const ClassificationReport r = metrics(cm);
    CHECK(r.accuracy == doctest::Approx(static_cast<double>(cm.tp + cm.tn) / 1000.0).epsilon(1e-15));
    // micro-averaged recall over both classes equals accuracy
    const double micro = (r.classes[1].recall * static_cast<double>(r.classes[1].support) +
                          r.classes[0].recall * static_cast<double>(r.classes[0].support)) /
                         1000.0;
    CHECK(std::fabs(micro - r.accuracy) <= 1e-12);

    const auto norm = normalized_confusion(cm);
    CHECK(std::fabs(norm[0][0] + norm[0][1] - 1.0) <= 1e-12);
    CHECK(std::fabs(norm[1][0] + norm[1][1] - 1.0) <= 1e-12);

    CHECK_THROWS(confusion(std::vector<int>{1}, std::vector<int>{1, 0}));
    CHECK_THROWS(confusion(std::vector<int>{}, std::vector<int>{}));
    CHECK_THROWS(confusion(std::vector<int>{2}, std::vector<int>{1}));
}

TEST_CASE("metrics reference example") {
    const ConfusionMatrix cm{9, 10, 1, 0};
    const ClassificationReport r = metrics(cm);
    CHECK(r.classes[1].precision == doctest::Approx(0.9));
    CHECK(r.classes[1].recall == 1.0);
    CHECK(r.classes[1].f1 == doctest::Approx(18.0 / 19.0));
    CHECK(r.classes[1].support == 9);
    CHECK(r.classes[0].precision == 1.0);
    CHECK(r.classes[0].recall == doctest::Approx(10.0 / 11.0));
    CHECK(r.classes[0].support == 11);
    CHECK(r.accuracy == doctest::Approx(0.95));
    CHECK(r.total_support == 20);
    const auto text = r.to_text("demo");
    CHECK(text.find("accuracy") != std::string::npos);
    CHECK(text.find("0.950") != std::string::npos);
}

TEST_CASE("swapping the positive class swaps the per-class rows") {
    const ConfusionMatrix cm{4, 7, 2, 3};
    const ConfusionMatrix swapped{7, 4, 3, 2};
    const auto a = metrics(cm);
    const auto b = metrics(swapped);
    CHECK(a.classes[0].precision == b.classes[1].precision);
    CHECK(a.classes[0].recall == b.classes[1].recall);
    CHECK(a.classes[1].f1 == b.classes[0].f1);
    CHECK(a.accuracy == b.accuracy);
}

TEST_CASE("zero denominators are flagged, not NaN") {
    // no positive predictions at all
    const ClassificationReport r = metrics(ConfusionMatrix{0, 5, 0, 3});
    CHECK(r.classes[1].precision == 0.0);
    CHECK(r.classes[1].precision_undefined);
    CHECK(r.classes[1].f1 == 0.0);
    CHECK_FALSE(r.classes[1].recall_undefined);
    const auto doc = r.to_json();
    CHECK(doc.dump().find("nan") == std::string::npos);

    // only negatives in the labels
    const ClassificationReport only_neg = metrics(ConfusionMatrix{0, 4, 1, 0});
    CHECK(only_neg.classes[1].recall_undefined);
    CHECK(only_neg.to_json().at("normalized_confusion").is_null());
    CHECK_THROWS(normalized_confusion(ConfusionMatrix{0, 4, 1, 0}));
}
