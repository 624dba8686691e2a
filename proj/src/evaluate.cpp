#include "chartsight/evaluate.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace chartsight {

std::size_t round_half_up_share(std::size_t count, double ratio) {
    const double exact = static_cast<double>(count) * ratio;
    // a relative nudge absorbs representation error in ratio (0.2, 0.1, ...)
    const double nudged = exact + 0.5 + 1e-9 * std::max(1.0, exact);
    return static_cast<std::size_t>(std::floor(nudged));
}

SplitResult stratified_split(const LabeledDataset &dataset, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw ConfigError("split ratio must be in (0,1), got " + format_double(ratio));
    }
    if (dataset.positives.empty() || dataset.negatives.empty()) {
        throw ConfigError("stratified split needs both classes to be non-empty");
    }
    const std::size_t n_pos = dataset.positives.size();
    const std::size_t n_neg = dataset.negatives.size();
    const std::size_t val_pos = round_half_up_share(n_pos, ratio);
    const std::size_t val_neg = round_half_up_share(n_neg, ratio);
    if (val_pos == 0 || val_neg == 0) {
        throw ConfigError("split ratio " + format_double(ratio) + " leaves a class with no validation rows");
    }
    if (val_pos >= n_pos || val_neg >= n_neg) {
        throw ConfigError("split ratio " + format_double(ratio) + " leaves a class with no training rows");
    }

    Rng rng(seed);
    std::vector<bool> in_validation(n_pos + n_neg, false);
    for (std::size_t i : rng.sample_without_replacement(n_pos, val_pos)) {
        in_validation[i] = true;
    }
    for (std::size_t i : rng.sample_without_replacement(n_neg, val_neg)) {
        in_validation[n_pos + i] = true;
    }

    SplitResult out;
    const std::vector<LabeledTrack> rows = dataset.rows();
    out.train.reserve(rows.size() - val_pos - val_neg);
    out.validation.reserve(val_pos + val_neg);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (in_validation[i]) {
            out.validation.push_back(rows[i]);
            out.validation_indices.push_back(i);
        } else {
            out.train.push_back(rows[i]);
        }
    }
    out.validation_positives = val_pos;
    out.validation_negatives = val_neg;
    return out;
}

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size()) {
        throw std::invalid_argument("confusion: " + std::to_string(predictions.size()) + " predictions for " +
                                    std::to_string(labels.size()) + " labels");
    }
    if (labels.empty()) {
        throw std::invalid_argument("confusion: no rows");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int p = predictions[i];
        const int y = labels[i];
        if ((p != 0 && p != 1) || (y != 0 && y != 1)) {
            throw std::invalid_argument("confusion: values must be 0 or 1");
        }
        if (y == 1) {
            (p == 1 ? cm.tp : cm.fn) += 1;
        } else {
            (p == 1 ? cm.fp : cm.tn) += 1;
        }
    }
    return cm;
}

namespace {

ClassMetrics class_metrics(std::size_t tp, std::size_t fp, std::size_t fn) {
    ClassMetrics m;
    m.support = tp + fn;
    if (tp + fp == 0) {
        m.precision_undefined = true;
    } else {
        m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    if (tp + fn == 0) {
        m.recall_undefined = true;
    } else {
        m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    if (m.precision + m.recall == 0.0) {
        m.f1_undefined = true;
    } else {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    return m;
}

nlohmann::json class_json(const ClassMetrics &m) {
    nlohmann::json doc = {
        {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
    nlohmann::json flags = nlohmann::json::array();
    if (m.precision_undefined) {
        flags.push_back("precision");
    }
    if (m.recall_undefined) {
        flags.push_back("recall");
    }
    if (m.f1_undefined) {
        flags.push_back("f1");
    }
    doc["zero_division"] = flags;
    return doc;
}

} // namespace

ClassificationReport metrics(const ConfusionMatrix &cm) {
    if (cm.total() == 0) {
        throw std::invalid_argument("metrics: empty confusion matrix");
    }
    ClassificationReport report;
    report.confusion = cm;
    report.total_support = cm.total();
    report.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    report.classes[1] = class_metrics(cm.tp, cm.fp, cm.fn);
    // the same formulas with class 0 taken as positive
    report.classes[0] = class_metrics(cm.tn, cm.fn, cm.fp);
    return report;
}

std::array<std::array<double, 2>, 2> normalized_confusion(const ConfusionMatrix &cm) {
    const std::size_t negatives = cm.tn + cm.fp;
    const std::size_t positives = cm.fn + cm.tp;
    if (negatives == 0 || positives == 0) {
        throw std::invalid_argument("normalized_confusion: a true class has no rows");
    }
    const auto neg = static_cast<double>(negatives);
    const auto pos = static_cast<double>(positives);
    return {{{static_cast<double>(cm.tn) / neg, static_cast<double>(cm.fp) / neg},
             {static_cast<double>(cm.fn) / pos, static_cast<double>(cm.tp) / pos}}};
}

nlohmann::json ClassificationReport::to_json() const {
    nlohmann::json doc = {
        {"classes", {{"non_charting", class_json(classes[0])}, {"charting", class_json(classes[1])}}},
        {"accuracy", accuracy},
        {"total_support", total_support},
        {"confusion", {{"tp", confusion.tp}, {"tn", confusion.tn}, {"fp", confusion.fp}, {"fn", confusion.fn}}},
    };
    if (classes[0].support > 0 && classes[1].support > 0) {
        const auto norm = normalized_confusion(confusion);
        doc["normalized_confusion"] = {{norm[0][0], norm[0][1]}, {norm[1][0], norm[1][1]}};
    } else {
        doc["normalized_confusion"] = nullptr;
    }
    return doc;
}

std::string ClassificationReport::to_text(const std::string &title) const {
    std::string out;
    char line[128];
    if (!title.empty()) {
        out += title + "\n\n";
    }
    std::snprintf(line, sizeof line, "%14s %10s %10s %10s %10s\n\n", "", "precision", "recall", "f1-score",
                  "support");
    out += line;
    const char *names[2] = {"non-charting", "charting"};
    for (int c = 0; c < 2; ++c) {
        const auto &m = classes[static_cast<std::size_t>(c)];
        std::snprintf(line, sizeof line, "%14s %10.3f %10.3f %10.3f %10zu\n", names[c], m.precision, m.recall,
                      m.f1, m.support);
        out += line;
    }
    out += "\n";
    std::snprintf(line, sizeof line, "%14s %10s %10s %10.3f %10zu\n", "accuracy", "", "", accuracy, total_support);
    out += line;

    const auto total = static_cast<double>(total_support);
    const double w0 = static_cast<double>(classes[0].support) / total;
    const double w1 = static_cast<double>(classes[1].support) / total;
    std::snprintf(line, sizeof line, "%14s %10.3f %10.3f %10.3f %10zu\n", "macro avg",
                  (classes[0].precision + classes[1].precision) / 2, (classes[0].recall + classes[1].recall) / 2,
                  (classes[0].f1 + classes[1].f1) / 2, total_support);
    out += line;
    std::snprintf(line, sizeof line, "%14s %10.3f %10.3f %10.3f %10zu\n", "weighted avg",
                  w0 * classes[0].precision + w1 * classes[1].precision,
                  w0 * classes[0].recall + w1 * classes[1].recall, w0 * classes[0].f1 + w1 * classes[1].f1,
                  total_support);
    out += line;
    return out;
}

} // namespace chartsight
