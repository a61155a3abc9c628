#include "tai/experiment.hpp"

#include <cstdio>
#include <numeric>

#include "tai/error.hpp"
#include "tai/eval.hpp"
#include "tai/perturb.hpp"

namespace tai {

EmbeddingStore select_shots(RandomSource& rng, const EmbeddingStore& images, std::size_t shots) {
    images.validate();
    std::vector<std::size_t> order(images.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);

    std::vector<bool> keep(images.size(), false);
    std::vector<std::size_t> taken(images.num_labels, 0);
    for (std::size_t idx : order) {
        const auto& a = images.records[idx].annotation;
        for (std::size_t j = 0; j < a.size(); ++j) {
            if (a[j] > 0 && taken[j] < shots) {
                ++taken[j];
                keep[idx] = true;
            }
        }
    }
    EmbeddingStore out = images;
    out.records.clear();
    for (std::size_t i = 0; i < images.size(); ++i)
        if (keep[i]) out.records.push_back(images.records[i]);
    return out;
}

EmbeddingStore mask_store(RandomSource& rng, const EmbeddingStore& images, double known_rate) {
    if (!(known_rate >= 0.0 && known_rate <= 1.0))
        throw Error(ErrorCode::invalid_config, "known rate must lie in [0, 1]");
    EmbeddingStore out = images;
    for (auto& r : out.records) r.annotation = mask_annotation(rng, r.annotation, known_rate);
    return out;
}

std::vector<SweepRow> sweep_radius(const EmbeddingStore& texts, const EmbeddingStore& images,
                                   const LabelVocab& vocab, const TrainConfig& base, std::span<const double> radii) {
    if (radii.empty()) throw Error(ErrorCode::invalid_config, "sweep needs at least one radius");
    std::vector<SweepRow> rows;
    for (double r : radii) {
        TrainConfig cfg = base;
        cfg.mode = TrainMode::zsl;
        cfg.perturb.text_radius = r;
        const auto result = train(texts, nullptr, vocab, cfg);
        SweepRow row;
        row.radius = r;
        row.image_map = mean_ap(predict(result.checkpoint, images), images).map;
        row.text_map = mean_ap(predict(result.checkpoint, texts), texts).map;
        row.initial_loss = result.log.epoch_losses.front();
        row.final_loss = result.log.epoch_losses.back();
        row.seconds = result.log.wall_time_seconds;
        rows.push_back(row);
    }
    return rows;
}

std::string format_sweep_csv(std::span<const SweepRow> rows) {
    std::string out = "radius,image_map,text_map,initial_loss,final_loss,seconds\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.3f\n", r.radius, r.image_map, r.text_map,
                      r.initial_loss, r.final_loss, r.seconds);
        out += buf;
    }
    return out;
}

}  // namespace tai
