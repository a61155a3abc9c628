#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tai/adapter_params.hpp"
#include "tai/numkit.hpp"

namespace tai {

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text, std::uint64_t hash = 0xcbf29ce484222325ULL);
std::string hash_hex(std::uint64_t hash);
std::uint64_t parse_hash_hex(std::string_view hex);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::uint64_t file_digest(const std::filesystem::path& path);

// Candidate label set. The index of a name is its label id everywhere.
class LabelVocab {
public:
    LabelVocab() = default;
    explicit LabelVocab(std::vector<std::string> names);

    std::size_t size() const noexcept { return names_.size(); }
    const std::string& name(std::size_t id) const { return names_.at(id); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    std::optional<std::size_t> find(std::string_view name) const;

    // FNV-1a over the compact JSON array of names.
    std::uint64_t hash() const noexcept { return hash_; }

    static LabelVocab load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

private:
    std::vector<std::string> names_;
    std::uint64_t hash_ = 0;
};

// Per-label marks. Full annotations use {0, 1}; partial ones add -1 for unknown.
using Annotation = std::vector<std::int8_t>;

bool is_multi_hot(const Annotation& a) noexcept;
bool is_partial(const Annotation& a) noexcept;
Annotation multi_hot_from_indices(std::span<const std::size_t> indices, std::size_t num_labels);
std::vector<std::size_t> positive_indices(const Annotation& a);

enum class Modality : std::uint8_t { text = 0, image = 1 };

std::string_view modality_name(Modality m);

struct EmbeddingRecord {
    std::string source_id;
    Annotation annotation;
    std::vector<float> vector;

    DenseVector as_dense() const;

    friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

/// In-memory image of a `.taie` file.
///
/// Layout, all little-endian:
///   0  char[4]  magic "TAIE"
///   4  u32      format version (1)
///   8  u32      d
///   12 u32      N
///   16 u64      record count
///   24 u8       modality (0 text, 1 image)
///   25 u8[7]    reserved, zero
///   32 u64      vocab hash
///   40 records: i8[N] annotation, then f32[d] vector
///
/// Records carry no id on disk; a loaded record's source_id is its decimal
/// position in the file.
struct EmbeddingStore {
    std::uint32_t dim = 0;
    std::uint32_t num_labels = 0;
    Modality modality = Modality::text;
    std::uint64_t vocab_hash = 0;
    std::vector<EmbeddingRecord> records;

    std::size_t size() const noexcept { return records.size(); }
    void validate() const;

    friend bool operator==(const EmbeddingStore&, const EmbeddingStore&) = default;
};

inline constexpr std::uint32_t kStoreVersion = 1;
inline constexpr std::size_t kStoreHeaderBytes = 40;

EmbeddingStore make_store(Modality modality, const LabelVocab& vocab, std::uint32_t dim,
                          std::vector<EmbeddingRecord> records);

std::vector<std::uint8_t> serialize_store(const EmbeddingStore& store);
EmbeddingStore deserialize_store(std::span<const std::uint8_t> bytes, std::uint64_t expected_vocab_hash);

void write_store(const std::filesystem::path& path, const EmbeddingStore& store);
EmbeddingStore read_store(const std::filesystem::path& path, const LabelVocab& vocab);

// Labeled training text. Stored one JSON object per line:
// {"id": ..., "text": ..., "labels": [ids], "vocab": "<hash hex>"}
struct LabeledText {
    std::string id;
    std::string text;
    std::vector<std::size_t> labels;

    friend bool operator==(const LabeledText&, const LabeledText&) = default;
};

void write_texts(const std::filesystem::path& path, std::span<const LabeledText> texts,
                 const LabelVocab& vocab);
std::vector<LabeledText> read_texts(const std::filesystem::path& path, const LabelVocab& vocab);

struct ScoreRecord {
    std::string source_id;
    std::vector<double> scores;

    friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

using ScoreFile = std::vector<ScoreRecord>;

void validate_scores(const ScoreFile& scores);
std::string format_scores(const ScoreFile& scores);
ScoreFile parse_scores(std::string_view text);
void write_scores(const std::filesystem::path& path, const ScoreFile& scores);
ScoreFile read_scores(const std::filesystem::path& path);

/// `.adpt` adapter checkpoint.
///
/// Header, little-endian:
///   char[4] "ADPT", u32 version (1), u32 d, u32 N, u32 hidden count H,
///   u32[H] hidden sizes, f64 dropout, u32 flags (bit 0: activated output layer),
///   u64 vocab hash, u64 training seed, u64 parameter count
/// Payload: for each layer in order, weights (out x in, row-major) then bias,
/// all f32.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const AdapterCheckpoint& checkpoint);

struct CheckpointLoadOptions {
    std::optional<std::uint64_t> expected_vocab_hash;
    bool force = false;
};

struct CheckpointLoadResult {
    AdapterCheckpoint checkpoint;
    bool vocab_mismatch_forced = false;
};

CheckpointLoadResult deserialize_checkpoint(std::span<const std::uint8_t> bytes,
                                            const CheckpointLoadOptions& options = {});

void save_checkpoint(const std::filesystem::path& path, const AdapterCheckpoint& checkpoint);
CheckpointLoadResult load_checkpoint(const std::filesystem::path& path,
                                     const CheckpointLoadOptions& options = {});

struct SynthConfig {
    std::size_t num_labels = 20;
    std::size_t dim = 256;
    std::size_t num_texts = 2000;
    std::size_t num_images = 1000;
    double gap_norm = 5.0;
    // Expected norm of the per-sample Gaussian noise (per-coordinate std is
    // cluster_noise / sqrt(dim)).
    double cluster_noise = 1.0;
    std::size_t max_labels_per_sample = 4;
    std::uint64_t seed = 0;
};

// Prototypes are scaled by this before averaging into a sample's base vector.
inline constexpr double kSynthBaseScale = 10.0;

struct SynthBenchmark {
    EmbeddingStore texts;
    EmbeddingStore images;
    std::vector<DenseVector> prototypes;
    DenseVector text_gap_direction;
    DenseVector image_gap_direction;
};

LabelVocab synth_vocab(std::size_t num_labels);
SynthBenchmark synth_benchmark(const SynthConfig& config);

}  // namespace tai
