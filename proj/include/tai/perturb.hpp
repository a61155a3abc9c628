#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "tai/dataio.hpp"
#include "tai/numkit.hpp"

namespace tai {

struct PerturbConfig {
    double text_radius = 25.0;
    double image_radius = 1.0;
    double shift_radius = 10.0;
    SamplingScheme scheme = SamplingScheme::surface;
    SamplingScheme image_scheme = SamplingScheme::surface;

    void validate() const;
};

// Noise of radius text_radius added to a text embedding.
DenseVector perturb_text(RandomSource& rng, const DenseVector& t, const PerturbConfig& config);

// Noise of radius image_radius added to a few-shot image embedding. Warns when
// the image radius exceeds the text radius.
DenseVector perturb_image(RandomSource& rng, const DenseVector& v, const PerturbConfig& config);

// t + eps with |eps| = radius (surface) or |eps| <= radius (interior), in place.
void add_noise(RandomSource& rng, std::span<double> v, double radius, SamplingScheme scheme);

/// Visual label centroids, text combination centroids and the per-combination
/// offsets that move text embeddings toward the image clusters.
///
/// Combinations are keyed by their exact multi-hot annotation. A label appears
/// in `visual` only when at least one image is known-positive for it.
struct CentroidTable {
    std::size_t dim = 0;
    std::size_t num_labels = 0;
    std::map<std::size_t, DenseVector> visual;
    std::map<Annotation, DenseVector> text;
    std::map<Annotation, std::size_t> text_counts;
    std::map<Annotation, DenseVector> offsets;

    friend bool operator==(const CentroidTable&, const CentroidTable&) = default;
};

std::map<std::size_t, DenseVector> estimate_visual_centroids(std::span<const EmbeddingRecord> images);

struct TextCentroids {
    std::map<Annotation, DenseVector> centroids;
    std::map<Annotation, std::size_t> counts;
};

TextCentroids text_combination_centroids(std::span<const EmbeddingRecord> texts);

// Mean of the available visual centroids of the combination's positive labels,
// or nullopt when none is available.
std::optional<DenseVector> visual_combination_centroid(const std::map<std::size_t, DenseVector>& visual,
                                                       const Annotation& combination);

std::map<Annotation, DenseVector> compute_offsets(const std::map<std::size_t, DenseVector>& visual,
                                                  const std::map<Annotation, DenseVector>& text);

CentroidTable build_centroid_table(std::span<const EmbeddingRecord> texts,
                                   std::span<const EmbeddingRecord> images);

// t + o for the combination; zero offset when the combination is not in the map.
DenseVector shift_text(const DenseVector& t, const Annotation& combination,
                       const std::map<Annotation, DenseVector>& offsets);

/// `centroids.bin`, little-endian:
///   char[4] "TAIC", u32 version (1), u32 d, u32 N, u64 vocab hash,
///   u32 visual count, u32 combination count,
///   visual entries: u32 label id, f64[d] centroid
///   combination entries: u8[ceil(N/8)] bitmask (bit j%8 of byte j/8 is label j),
///     u64 text count, f64[d] text centroid, f64[d] offset
std::vector<std::uint8_t> serialize_centroids(const CentroidTable& table, std::uint64_t vocab_hash);
CentroidTable deserialize_centroids(std::span<const std::uint8_t> bytes, std::uint64_t expected_vocab_hash);
void write_centroids(const std::filesystem::path& path, const CentroidTable& table, const LabelVocab& vocab);
CentroidTable read_centroids(const std::filesystem::path& path, const LabelVocab& vocab);

// Hides each known label of a full annotation independently with probability
// 1 - known_rate, marking it -1.
Annotation mask_annotation(RandomSource& rng, const Annotation& full, double known_rate);

}  // namespace tai
