#include "tai/eval.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "tai/error.hpp"

namespace tai {

std::optional<double> average_precision(std::span<const double> scores, std::span<const int> truths) {
    if (scores.size() != truths.size())
        throw Error(ErrorCode::length_mismatch, "average_precision: scores and truths differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (truths[order[rank]] > 0) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
        }
    }
    if (hits == 0) return std::nullopt;
    return sum / static_cast<double>(hits);
}

nlohmann::json EvalReport::to_json(bool per_label) const {
    nlohmann::json j;
    j["map"] = map;
    j["labels_evaluated"] = labels_evaluated;
    j["samples"] = samples;
    j["positives"] = positives;
    if (per_label) {
        nlohmann::json aps = nlohmann::json::array();
        for (const auto& ap : per_label_ap) aps.push_back(ap ? nlohmann::json(*ap) : nlohmann::json(nullptr));
        j["per_label_ap"] = aps;
    }
    j["config"] = config.is_null() ? nlohmann::json::object() : config;
    return j;
}

EvalReport mean_ap(const ScoreFile& scores, const EmbeddingStore& truth) {
    validate_scores(scores);
    if (scores.size() != truth.size())
        throw Error(ErrorCode::id_mismatch, "mean_ap: " + std::to_string(scores.size()) + " score records vs " +
                                                std::to_string(truth.size()) + " truth records");
    const std::size_t n = truth.num_labels;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i].source_id != truth.records[i].source_id)
            throw Error(ErrorCode::id_mismatch, "mean_ap: record " + std::to_string(i) + " has id '" +
                                                    scores[i].source_id + "' in scores but '" +
                                                    truth.records[i].source_id + "' in truth");
        if (scores[i].scores.size() != n)
            throw Error(ErrorCode::vocab_mismatch, "mean_ap: score record '" + scores[i].source_id + "' has " +
                                                       std::to_string(scores[i].scores.size()) +
                                                       " labels, truth has " + std::to_string(n));
    }
    EvalReport report;
    report.samples = scores.size();
    report.per_label_ap.resize(n);
    report.positives.assign(n, 0);
    double total = 0.0;
    std::vector<double> col;
    std::vector<int> t;
    for (std::size_t j = 0; j < n; ++j) {
        col.clear();
        t.clear();
        for (std::size_t i = 0; i < scores.size(); ++i) {
            const auto mark = truth.records[i].annotation[j];
            if (mark < 0) continue;
            col.push_back(scores[i].scores[j]);
            t.push_back(mark > 0 ? 1 : 0);
            if (mark > 0) ++report.positives[j];
        }
        report.per_label_ap[j] = average_precision(col, t);
        if (report.per_label_ap[j]) {
            total += *report.per_label_ap[j];
            ++report.labels_evaluated;
        }
    }
    report.map = report.labels_evaluated ? total / static_cast<double>(report.labels_evaluated) : 0.0;
    return report;
}

namespace {

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double scale(double v) const { return hi > lo ? (v - lo) / (hi - lo) : 0.5; }
};

std::vector<Range> ranges(const ScoreFile& f, std::size_t n, EnsembleScaling scaling) {
    std::vector<Range> out(scaling == EnsembleScaling::per_label ? n : 1);
    for (const auto& rec : f)
        for (std::size_t j = 0; j < n; ++j) out[scaling == EnsembleScaling::per_label ? j : 0].add(rec.scores[j]);
    return out;
}

}  // namespace

ScoreFile ensemble_scores(const ScoreFile& a, const ScoreFile& b, EnsembleScaling scaling) {
    validate_scores(a);
    validate_scores(b);
    if (a.size() != b.size())
        throw Error(ErrorCode::id_mismatch, "ensemble: score files hold different record counts");
    if (a.empty()) return {};
    const std::size_t n = a.front().scores.size();
    if (b.front().scores.size() != n) throw Error(ErrorCode::length_mismatch, "ensemble: label counts differ");
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].source_id != b[i].source_id)
            throw Error(ErrorCode::id_mismatch, "ensemble: record " + std::to_string(i) + " ids differ ('" +
                                                    a[i].source_id + "' vs '" + b[i].source_id + "')");
    const auto ra = ranges(a, n, scaling);
    const auto rb = ranges(b, n, scaling);
    ScoreFile out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i].source_id = a[i].source_id;
        out[i].scores.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t c = scaling == EnsembleScaling::per_label ? j : 0;
            out[i].scores[j] = 0.5 * (ra[c].scale(a[i].scores[j]) + rb[c].scale(b[i].scores[j]));
        }
    }
    return out;
}

}  // namespace tai
