#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tai/dataio.hpp"

namespace tai {

/// Average precision of one label's ranking.
///
/// Samples are sorted by descending score, ties broken by ascending sample
/// index. AP is the mean, over positive samples, of the precision at each
/// positive's rank. Returns nullopt when there are no positives.
std::optional<double> average_precision(std::span<const double> scores, std::span<const int> truths);

struct EvalReport {
    std::vector<std::optional<double>> per_label_ap;
    std::vector<std::size_t> positives;
    double map = 0.0;
    std::size_t labels_evaluated = 0;
    std::size_t samples = 0;
    nlohmann::json config;

    nlohmann::json to_json(bool per_label) const;
};

// Truth comes from the store's annotations; samples marked -1 for a label are
// left out of that label's ranking.
EvalReport mean_ap(const ScoreFile& scores, const EmbeddingStore& truth);

enum class EnsembleScaling { per_label, per_file };

// Min-max scales each file to [0, 1] (per label column or over the whole file;
// a constant range maps to 0.5) and averages the two element-wise.
ScoreFile ensemble_scores(const ScoreFile& a, const ScoreFile& b,
                          EnsembleScaling scaling = EnsembleScaling::per_label);

}  // namespace tai
