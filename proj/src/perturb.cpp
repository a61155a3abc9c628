#include "tai/perturb.hpp"

#include <cmath>
#include <string>

#include "tai/diagnostics.hpp"
#include "tai/error.hpp"
#include "tai/internal/bytes.hpp"

namespace tai {

void PerturbConfig::validate() const {
    for (double r : {text_radius, image_radius, shift_radius})
        if (!(r >= 0.0) || !std::isfinite(r))
            throw Error(ErrorCode::invalid_config, "perturbation radii must be finite and >= 0");
}

void add_noise(RandomSource& rng, std::span<double> v, double radius, SamplingScheme scheme) {
    if (radius == 0.0) return;
    const DenseVector eps = sample_noise(rng, v.size(), radius, scheme);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += eps[i];
}

DenseVector perturb_text(RandomSource& rng, const DenseVector& t, const PerturbConfig& config) {
    config.validate();
    DenseVector out = t;
    add_noise(rng, out.span(), config.text_radius, config.scheme);
    return out;
}

DenseVector perturb_image(RandomSource& rng, const DenseVector& v, const PerturbConfig& config) {
    config.validate();
    if (config.image_radius > config.text_radius)
        warn("image radius " + std::to_string(config.image_radius) + " exceeds text radius " +
             std::to_string(config.text_radius) + "; image noise is expected to be much smaller");
    DenseVector out = v;
    add_noise(rng, out.span(), config.image_radius, config.image_scheme);
    return out;
}

std::map<std::size_t, DenseVector> estimate_visual_centroids(std::span<const EmbeddingRecord> images) {
    if (images.empty()) throw Error(ErrorCode::empty_input, "visual centroids need at least one image");
    const std::size_t dim = images.front().vector.size();
    const std::size_t num_labels = images.front().annotation.size();
    std::vector<DenseVector> sums(num_labels, DenseVector(dim));
    std::vector<std::size_t> counts(num_labels, 0);
    for (const auto& img : images) {
        if (img.vector.size() != dim || img.annotation.size() != num_labels)
            throw Error(ErrorCode::dimension_mismatch, "visual centroids: inconsistent image records");
        for (std::size_t j = 0; j < num_labels; ++j) {
            if (img.annotation[j] <= 0) continue;
            auto& s = sums[j];
            for (std::size_t i = 0; i < dim; ++i) s[i] += static_cast<double>(img.vector[i]);
            ++counts[j];
        }
    }
    std::map<std::size_t, DenseVector> out;
    for (std::size_t j = 0; j < num_labels; ++j) {
        if (counts[j] == 0) continue;
        out.emplace(j, (1.0 / static_cast<double>(counts[j])) * sums[j]);
    }
    return out;
}

TextCentroids text_combination_centroids(std::span<const EmbeddingRecord> texts) {
    if (texts.empty()) throw Error(ErrorCode::empty_input, "text centroids need at least one text");
    const std::size_t dim = texts.front().vector.size();
    TextCentroids out;
    for (const auto& t : texts) {
        if (t.vector.size() != dim) throw Error(ErrorCode::dimension_mismatch, "text centroids: inconsistent dims");
        auto [it, inserted] = out.centroids.try_emplace(t.annotation, dim);
        auto& s = it->second;
        for (std::size_t i = 0; i < dim; ++i) s[i] += static_cast<double>(t.vector[i]);
        ++out.counts[t.annotation];
    }
    for (auto& [key, sum] : out.centroids) {
        const double inv = 1.0 / static_cast<double>(out.counts[key]);
        for (auto& x : sum) x *= inv;
    }
    return out;
}

std::optional<DenseVector> visual_combination_centroid(const std::map<std::size_t, DenseVector>& visual,
                                                       const Annotation& combination) {
    std::optional<DenseVector> sum;
    std::size_t available = 0;
    for (std::size_t j = 0; j < combination.size(); ++j) {
        if (combination[j] <= 0) continue;
        auto it = visual.find(j);
        if (it == visual.end()) continue;
        if (!sum) sum.emplace(it->second.size());
        axpy(1.0, it->second.span(), sum->span());
        ++available;
    }
    if (!sum) return std::nullopt;
    const double inv = 1.0 / static_cast<double>(available);
    for (auto& x : *sum) x *= inv;
    return sum;
}

std::map<Annotation, DenseVector> compute_offsets(const std::map<std::size_t, DenseVector>& visual,
                                                  const std::map<Annotation, DenseVector>& text) {
    std::map<Annotation, DenseVector> out;
    for (const auto& [combination, centroid] : text) {
        const auto target = visual_combination_centroid(visual, combination);
        if (!target) {
            out.emplace(combination, DenseVector(centroid.size()));
            continue;
        }
        if (target->size() != centroid.size())
            throw Error(ErrorCode::dimension_mismatch, "offsets: visual and text centroid dims differ");
        out.emplace(combination, *target - centroid);
    }
    return out;
}

CentroidTable build_centroid_table(std::span<const EmbeddingRecord> texts, std::span<const EmbeddingRecord> images) {
    CentroidTable table;
    auto text = text_combination_centroids(texts);
    table.dim = texts.front().vector.size();
    table.num_labels = texts.front().annotation.size();
    table.visual = estimate_visual_centroids(images);
    if (images.front().vector.size() != table.dim || images.front().annotation.size() != table.num_labels)
        throw Error(ErrorCode::dimension_mismatch, "centroids: text and image stores disagree on d or N");
    table.text = std::move(text.centroids);
    table.text_counts = std::move(text.counts);
    table.offsets = compute_offsets(table.visual, table.text);
    return table;
}

DenseVector shift_text(const DenseVector& t, const Annotation& combination,
                       const std::map<Annotation, DenseVector>& offsets) {
    auto it = offsets.find(combination);
    if (it == offsets.end()) return t;
    return t + it->second;
}

namespace {

constexpr std::uint32_t kCentroidVersion = 1;

std::vector<std::uint8_t> pack_bits(const Annotation& a) {
    std::vector<std::uint8_t> bits((a.size() + 7) / 8, 0);
    for (std::size_t j = 0; j < a.size(); ++j)
        if (a[j] > 0) bits[j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
    return bits;
}

}  // namespace

std::vector<std::uint8_t> serialize_centroids(const CentroidTable& table, std::uint64_t vocab_hash) {
    detail::ByteWriter w;
    w.magic("TAIC");
    w.u32(kCentroidVersion);
    w.u32(static_cast<std::uint32_t>(table.dim));
    w.u32(static_cast<std::uint32_t>(table.num_labels));
    w.u64(vocab_hash);
    w.u32(static_cast<std::uint32_t>(table.visual.size()));
    w.u32(static_cast<std::uint32_t>(table.text.size()));
    for (const auto& [label, c] : table.visual) {
        w.u32(static_cast<std::uint32_t>(label));
        for (double v : c) w.f64(v);
    }
    for (const auto& [combination, c] : table.text) {
        if (!is_multi_hot(combination) || combination.size() != table.num_labels)
            throw Error(ErrorCode::invalid_config, "centroids: combination keys must be multi-hot of length N");
        for (auto b : pack_bits(combination)) w.u8(b);
        w.u64(table.text_counts.at(combination));
        for (double v : c) w.f64(v);
        for (double v : table.offsets.at(combination)) w.f64(v);
    }
    return w.take();
}

CentroidTable deserialize_centroids(std::span<const std::uint8_t> bytes, std::uint64_t expected_vocab_hash) {
    detail::ByteReader r(bytes, "centroid table");
    if (!r.magic("TAIC")) throw Error(ErrorCode::bad_magic, "centroid table: bad magic");
    if (r.u32() != kCentroidVersion) throw Error(ErrorCode::bad_version, "centroid table: unsupported version");
    CentroidTable table;
    table.dim = r.u32();
    table.num_labels = r.u32();
    if (r.u64() != expected_vocab_hash) throw Error(ErrorCode::vocab_mismatch, "centroid table: vocab hash mismatch");
    const auto visual_count = r.u32();
    const auto combo_count = r.u32();
    const std::size_t mask_bytes = (table.num_labels + 7) / 8;
    const std::uint64_t expected = static_cast<std::uint64_t>(visual_count) * (4 + 8 * table.dim) +
                                   static_cast<std::uint64_t>(combo_count) * (mask_bytes + 8 + 16 * table.dim);
    if (r.remaining() < expected) throw Error(ErrorCode::truncated_payload, "centroid table: truncated payload");
    if (r.remaining() > expected) throw Error(ErrorCode::corrupt_payload, "centroid table: trailing bytes");
    for (std::uint32_t k = 0; k < visual_count; ++k) {
        const auto label = r.u32();
        if (label >= table.num_labels) throw Error(ErrorCode::corrupt_payload, "centroid table: label id out of range");
        DenseVector c(table.dim);
        for (auto& v : c) v = r.f64();
        table.visual.emplace(label, std::move(c));
    }
    for (std::uint32_t k = 0; k < combo_count; ++k) {
        Annotation combination(table.num_labels, 0);
        for (std::size_t b = 0; b < mask_bytes; ++b) {
            const auto byte = r.u8();
            for (std::size_t bit = 0; bit < 8; ++bit) {
                const std::size_t j = 8 * b + bit;
                if ((byte >> bit) & 1u) {
                    if (j >= table.num_labels) throw Error(ErrorCode::corrupt_payload, "centroid table: stray mask bit");
                    combination[j] = 1;
                }
            }
        }
        table.text_counts[combination] = r.u64();
        DenseVector c(table.dim), o(table.dim);
        for (auto& v : c) v = r.f64();
        for (auto& v : o) v = r.f64();
        table.text.emplace(combination, std::move(c));
        table.offsets.emplace(combination, std::move(o));
    }
    return table;
}

void write_centroids(const std::filesystem::path& path, const CentroidTable& table, const LabelVocab& vocab) {
    write_file_bytes(path, serialize_centroids(table, vocab.hash()));
}

CentroidTable read_centroids(const std::filesystem::path& path, const LabelVocab& vocab) {
    return deserialize_centroids(read_file_bytes(path), vocab.hash());
}

Annotation mask_annotation(RandomSource& rng, const Annotation& full, double known_rate) {
    if (!(known_rate >= 0.0 && known_rate <= 1.0))
        throw Error(ErrorCode::invalid_config, "known rate must be in [0, 1]");
    Annotation out = full;
    for (auto& a : out) {
        const bool reveal = rng.bernoulli(known_rate);
        if (!reveal) a = -1;
    }
    return out;
}

}  // namespace tai
