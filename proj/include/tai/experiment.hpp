#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tai/adapter.hpp"
#include "tai/dataio.hpp"
#include "tai/numkit.hpp"

namespace tai {

// Few-shot subset: shuffle the store once, then for each label keep the first
// `shots` images that contain it. The union is returned in original order.
EmbeddingStore select_shots(RandomSource& rng, const EmbeddingStore& images, std::size_t shots);

// Replaces every annotation with mask_annotation(rng, a, known_rate).
EmbeddingStore mask_store(RandomSource& rng, const EmbeddingStore& images, double known_rate);

struct SweepRow {
    double radius = 0.0;
    double image_map = 0.0;
    double text_map = 0.0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double seconds = 0.0;
};

// Trains one zsl adapter per radius (all other settings from `base`) and
// scores it on both stores.
std::vector<SweepRow> sweep_radius(const EmbeddingStore& texts, const EmbeddingStore& images,
                                   const LabelVocab& vocab, const TrainConfig& base, std::span<const double> radii);

std::string format_sweep_csv(std::span<const SweepRow> rows);

}  // namespace tai
