#include "tai/dataio.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tai/error.hpp"
#include "tai/internal/text_files.hpp"
#include "tai/internal/bytes.hpp"

namespace tai {

using nlohmann::json;

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t hash) {
    for (std::uint8_t b : bytes) {
        hash ^= b;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::uint64_t fnv1a64(std::string_view text, std::uint64_t hash) {
    return fnv1a64(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                                 text.size()),
                   hash);
}

std::string hash_hex(std::uint64_t hash) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

std::uint64_t parse_hash_hex(std::string_view hex) {
    if (hex.size() != 16) throw Error(ErrorCode::parse_error, "hash must be 16 hex digits");
    std::uint64_t v = 0;
    for (char c : hex) {
        v <<= 4;
        if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
        else throw Error(ErrorCode::parse_error, "invalid hex digit in hash");
    }
    return v;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_failure, "cannot open '" + path.string() + "' for reading");
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_failure, "cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::io_failure, "write failed for '" + path.string() + "'");
}

std::uint64_t file_digest(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return fnv1a64(bytes);
}

std::string read_text_file(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    write_file_bytes(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                                         text.size()));
}

json parse_json_line(std::string_view line, std::size_t line_no, const std::string& what) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse_error,
                    what + " line " + std::to_string(line_no) + ": " + e.what());
    }
}

LabelVocab::LabelVocab(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw Error(ErrorCode::invalid_config, "label vocabulary must not be empty");
    std::set<std::string_view> seen;
    for (const auto& n : names_) {
        if (n.empty()) throw Error(ErrorCode::invalid_config, "label names must be nonempty");
        if (!seen.insert(n).second) throw Error(ErrorCode::invalid_config, "duplicate label name '" + n + "'");
    }
    hash_ = fnv1a64(json(names_).dump());
}

std::optional<std::size_t> LabelVocab::find(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return i;
    return std::nullopt;
}

LabelVocab LabelVocab::load(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse_error, "vocab '" + path.string() + "': " + e.what());
    }
    if (!j.is_array()) throw Error(ErrorCode::parse_error, "vocab must be a JSON array of strings");
    std::vector<std::string> names;
    for (const auto& item : j) {
        if (!item.is_string()) throw Error(ErrorCode::parse_error, "vocab entries must be strings");
        names.push_back(item.get<std::string>());
    }
    return LabelVocab(std::move(names));
}

void LabelVocab::save(const std::filesystem::path& path) const {
    write_text_file(path, json(names_).dump(2) + "\n");
}

bool is_multi_hot(const Annotation& a) noexcept {
    for (auto v : a)
        if (v != 0 && v != 1) return false;
    return true;
}

bool is_partial(const Annotation& a) noexcept {
    for (auto v : a)
        if (v != 0 && v != 1 && v != -1) return false;
    return true;
}

Annotation multi_hot_from_indices(std::span<const std::size_t> indices, std::size_t num_labels) {
    Annotation a(num_labels, 0);
    for (auto i : indices) {
        if (i >= num_labels)
            throw Error(ErrorCode::invalid_config, "label index " + std::to_string(i) + " out of range");
        a[i] = 1;
    }
    return a;
}

std::vector<std::size_t> positive_indices(const Annotation& a) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] > 0) out.push_back(i);
    return out;
}

std::string_view modality_name(Modality m) { return m == Modality::text ? "text" : "image"; }

DenseVector EmbeddingRecord::as_dense() const {
    DenseVector v(vector.size());
    for (std::size_t i = 0; i < vector.size(); ++i) v[i] = static_cast<double>(vector[i]);
    return v;
}

void EmbeddingStore::validate() const {
    if (dim == 0) throw Error(ErrorCode::invalid_dimension, "store dimension must be >= 1");
    if (num_labels == 0) throw Error(ErrorCode::invalid_config, "store label count must be >= 1");
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.vector.size() != dim)
            throw Error(ErrorCode::dimension_mismatch, "record " + std::to_string(i) + " has dimension " +
                                                           std::to_string(r.vector.size()) + ", store has " +
                                                           std::to_string(dim));
        if (r.annotation.size() != num_labels)
            throw Error(ErrorCode::length_mismatch, "record " + std::to_string(i) + " annotation length mismatch");
        if (!is_partial(r.annotation))
            throw Error(ErrorCode::corrupt_payload, "record " + std::to_string(i) + " has annotation outside {-1,0,1}");
        for (float v : r.vector)
            if (!std::isfinite(v))
                throw Error(ErrorCode::corrupt_payload, "record " + std::to_string(i) + " has a non-finite value");
    }
}

EmbeddingStore make_store(Modality modality, const LabelVocab& vocab, std::uint32_t dim,
                          std::vector<EmbeddingRecord> records) {
    EmbeddingStore store;
    store.dim = dim;
    store.num_labels = static_cast<std::uint32_t>(vocab.size());
    store.modality = modality;
    store.vocab_hash = vocab.hash();
    store.records = std::move(records);
    store.validate();
    return store;
}

std::vector<std::uint8_t> serialize_store(const EmbeddingStore& store) {
    store.validate();
    detail::ByteWriter w;
    w.reserve(kStoreHeaderBytes + store.size() * (store.num_labels + 4ull * store.dim));
    w.magic("TAIE");
    w.u32(kStoreVersion);
    w.u32(store.dim);
    w.u32(store.num_labels);
    w.u64(store.records.size());
    w.u8(static_cast<std::uint8_t>(store.modality));
    for (int i = 0; i < 7; ++i) w.u8(0);
    w.u64(store.vocab_hash);
    for (const auto& r : store.records) {
        for (auto a : r.annotation) w.i8(a);
        for (float v : r.vector) w.f32(v);
    }
    return w.take();
}

EmbeddingStore deserialize_store(std::span<const std::uint8_t> bytes, std::uint64_t expected_vocab_hash) {
    detail::ByteReader r(bytes, "embedding store");
    if (!r.magic("TAIE")) throw Error(ErrorCode::bad_magic, "embedding store: bad magic");
    const auto version = r.u32();
    if (version != kStoreVersion)
        throw Error(ErrorCode::bad_version, "embedding store: unsupported version " + std::to_string(version));
    EmbeddingStore store;
    store.dim = r.u32();
    store.num_labels = r.u32();
    const std::uint64_t count = r.u64();
    const std::uint8_t modality = r.u8();
    if (modality > 1) throw Error(ErrorCode::corrupt_payload, "embedding store: unknown modality tag");
    store.modality = static_cast<Modality>(modality);
    for (int i = 0; i < 7; ++i) r.u8();
    store.vocab_hash = r.u64();
    if (store.dim == 0) throw Error(ErrorCode::invalid_dimension, "embedding store: dimension is 0");
    if (store.num_labels == 0) throw Error(ErrorCode::corrupt_payload, "embedding store: label count is 0");
    if (store.vocab_hash != expected_vocab_hash)
        throw Error(ErrorCode::vocab_mismatch, "embedding store: vocab hash " + hash_hex(store.vocab_hash) +
                                                   " does not match vocab " + hash_hex(expected_vocab_hash));
    const std::uint64_t record_bytes = store.num_labels + 4ull * store.dim;
    const std::uint64_t payload = bytes.size() - kStoreHeaderBytes;
    const std::uint64_t available = payload / record_bytes;
    if (count > available)
        throw Error(ErrorCode::truncated_payload, "embedding store: header declares " + std::to_string(count) +
                                                      " records but payload holds " + std::to_string(available));
    if (payload != count * record_bytes)
        throw Error(ErrorCode::corrupt_payload, "embedding store: trailing bytes after last record");
    store.records.resize(count);
    for (std::uint64_t k = 0; k < count; ++k) {
        auto& rec = store.records[k];
        rec.source_id = std::to_string(k);
        rec.annotation.resize(store.num_labels);
        for (auto& a : rec.annotation) a = r.i8();
        rec.vector.resize(store.dim);
        for (auto& v : rec.vector) v = r.f32();
    }
    store.validate();
    return store;
}

void write_store(const std::filesystem::path& path, const EmbeddingStore& store) {
    write_file_bytes(path, serialize_store(store));
}

EmbeddingStore read_store(const std::filesystem::path& path, const LabelVocab& vocab) {
    auto store = deserialize_store(read_file_bytes(path), vocab.hash());
    if (store.num_labels != vocab.size())
        throw Error(ErrorCode::length_mismatch, "embedding store label count does not match vocab");
    return store;
}

void write_texts(const std::filesystem::path& path, std::span<const LabeledText> texts, const LabelVocab& vocab) {
    const std::string vocab_hex = hash_hex(vocab.hash());
    std::string out;
    for (const auto& t : texts) {
        for (auto l : t.labels)
            if (l >= vocab.size()) throw Error(ErrorCode::invalid_config, "text '" + t.id + "' has label out of range");
        json j = {{"id", t.id}, {"text", t.text}, {"labels", t.labels}, {"vocab", vocab_hex}};
        out += j.dump();
        out += '\n';
    }
    write_text_file(path, out);
}

std::vector<LabeledText> read_texts(const std::filesystem::path& path, const LabelVocab& vocab) {
    std::istringstream in(read_text_file(path));
    std::vector<LabeledText> texts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json j = parse_json_line(line, line_no, "texts");
        LabeledText t;
        try {
            t.id = j.at("id").get<std::string>();
            t.text = j.at("text").get<std::string>();
            t.labels = j.at("labels").get<std::vector<std::size_t>>();
            if (j.contains("vocab") && parse_hash_hex(j.at("vocab").get<std::string>()) != vocab.hash())
                throw Error(ErrorCode::vocab_mismatch, "texts line " + std::to_string(line_no) +
                                                           " was written against a different vocab");
        } catch (const json::exception& e) {
            throw Error(ErrorCode::parse_error, "texts line " + std::to_string(line_no) + ": " + e.what());
        }
        for (auto l : t.labels)
            if (l >= vocab.size())
                throw Error(ErrorCode::invalid_config, "texts line " + std::to_string(line_no) + ": label out of range");
        texts.push_back(std::move(t));
    }
    return texts;
}

void validate_scores(const ScoreFile& scores) {
    if (scores.empty()) return;
    const std::size_t n = scores.front().scores.size();
    for (const auto& rec : scores) {
        if (rec.scores.size() != n)
            throw Error(ErrorCode::length_mismatch, "score record '" + rec.source_id + "' has inconsistent length");
        for (double s : rec.scores)
            if (!std::isfinite(s))
                throw Error(ErrorCode::corrupt_payload, "score record '" + rec.source_id + "' has non-finite score");
    }
}

std::string format_scores(const ScoreFile& scores) {
    validate_scores(scores);
    std::string out;
    for (const auto& rec : scores) {
        json j = {{"id", rec.source_id}, {"scores", rec.scores}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

ScoreFile parse_scores(std::string_view text) {
    std::istringstream in{std::string(text)};
    ScoreFile scores;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json j = parse_json_line(line, line_no, "scores");
        ScoreRecord rec;
        try {
            rec.source_id = j.at("id").get<std::string>();
            rec.scores = j.at("scores").get<std::vector<double>>();
        } catch (const json::exception& e) {
            throw Error(ErrorCode::parse_error, "scores line " + std::to_string(line_no) + ": " + e.what());
        }
        scores.push_back(std::move(rec));
    }
    validate_scores(scores);
    return scores;
}

void write_scores(const std::filesystem::path& path, const ScoreFile& scores) {
    write_text_file(path, format_scores(scores));
}

ScoreFile read_scores(const std::filesystem::path& path) { return parse_scores(read_text_file(path)); }

std::vector<std::uint8_t> serialize_checkpoint(const AdapterCheckpoint& checkpoint) {
    const auto& params = checkpoint.params;
    const auto& shape = params.shape;
    shape.validate();
    if (params.layers.size() != shape.layer_count())
        throw Error(ErrorCode::dimension_mismatch, "checkpoint: layer count does not match shape");
    detail::ByteWriter w;
    w.magic("ADPT");
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(shape.input_dim));
    w.u32(static_cast<std::uint32_t>(shape.num_labels));
    w.u32(static_cast<std::uint32_t>(shape.hidden.size()));
    for (auto h : shape.hidden) w.u32(static_cast<std::uint32_t>(h));
    w.f64(shape.dropout);
    w.u32(shape.activate_output ? 1u : 0u);
    w.u64(checkpoint.vocab_hash);
    w.u64(checkpoint.seed);
    w.u64(shape.parameter_count());
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        const auto& layer = params.layers[k];
        if (layer.weight.rows() != shape.layer_output(k) || layer.weight.cols() != shape.layer_input(k) ||
            layer.bias.size() != shape.layer_output(k))
            throw Error(ErrorCode::dimension_mismatch, "checkpoint: layer " + std::to_string(k) + " shape mismatch");
        for (double v : layer.weight.flat()) w.f32(static_cast<float>(v));
        for (double v : layer.bias) w.f32(static_cast<float>(v));
    }
    return w.take();
}

CheckpointLoadResult deserialize_checkpoint(std::span<const std::uint8_t> bytes,
                                            const CheckpointLoadOptions& options) {
    detail::ByteReader r(bytes, "checkpoint");
    if (!r.magic("ADPT")) throw Error(ErrorCode::bad_magic, "checkpoint: bad magic");
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw Error(ErrorCode::bad_version, "checkpoint: unsupported version " + std::to_string(version));
    CheckpointLoadResult result;
    auto& ckpt = result.checkpoint;
    AdapterShape shape;
    shape.input_dim = r.u32();
    shape.num_labels = r.u32();
    const auto hidden_count = r.u32();
    if (hidden_count > 64) throw Error(ErrorCode::corrupt_payload, "checkpoint: implausible hidden layer count");
    for (std::uint32_t i = 0; i < hidden_count; ++i) shape.hidden.push_back(r.u32());
    shape.dropout = r.f64();
    const auto flags = r.u32();
    if (flags > 1) throw Error(ErrorCode::corrupt_payload, "checkpoint: unknown flag bits");
    shape.activate_output = (flags & 1u) != 0;
    ckpt.vocab_hash = r.u64();
    ckpt.seed = r.u64();
    const auto declared_params = r.u64();
    try {
        shape.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::corrupt_payload, std::string("checkpoint: invalid header: ") + e.what());
    }
    if (declared_params != shape.parameter_count())
        throw Error(ErrorCode::corrupt_payload, "checkpoint: declared parameter count " +
                                                    std::to_string(declared_params) + " does not match shape (" +
                                                    std::to_string(shape.parameter_count()) + ")");
    if (r.remaining() != 4 * declared_params)
        throw Error(ErrorCode::corrupt_payload, "checkpoint: payload holds " + std::to_string(r.remaining()) +
                                                    " bytes, expected " + std::to_string(4 * declared_params));
    if (options.expected_vocab_hash && *options.expected_vocab_hash != ckpt.vocab_hash) {
        if (!options.force)
            throw Error(ErrorCode::vocab_mismatch, "checkpoint: trained against vocab " + hash_hex(ckpt.vocab_hash) +
                                                       ", expected " + hash_hex(*options.expected_vocab_hash) +
                                                       " (use force to load anyway)");
        result.vocab_mismatch_forced = true;
    }
    ckpt.params = AdapterParams::zeros(shape);
    for (auto& layer : ckpt.params.layers) {
        for (auto& v : layer.weight.flat()) v = r.f32();
        for (auto& v : layer.bias) v = r.f32();
    }
    if (!ckpt.params.all_finite()) throw Error(ErrorCode::corrupt_payload, "checkpoint: non-finite parameter");
    return result;
}

void save_checkpoint(const std::filesystem::path& path, const AdapterCheckpoint& checkpoint) {
    write_file_bytes(path, serialize_checkpoint(checkpoint));
}

CheckpointLoadResult load_checkpoint(const std::filesystem::path& path, const CheckpointLoadOptions& options) {
    return deserialize_checkpoint(read_file_bytes(path), options);
}

LabelVocab synth_vocab(std::size_t num_labels) {
    std::vector<std::string> names;
    names.reserve(num_labels);
    for (std::size_t i = 0; i < num_labels; ++i) names.push_back("label" + std::to_string(i));
    return LabelVocab(std::move(names));
}

namespace {

DenseVector unit_gaussian(RandomSource& rng, std::size_t dim) {
    DenseVector v = gaussian_vector(rng, dim);
    const double n = norm2(v.span());
    for (auto& x : v) x /= n;
    return v;
}

std::vector<EmbeddingRecord> synth_records(RandomSource& rng, const SynthConfig& config,
                                           const std::vector<DenseVector>& prototypes,
                                           const DenseVector& gap_direction, std::size_t count) {
    const double noise_std = config.cluster_noise / std::sqrt(static_cast<double>(config.dim));
    std::vector<EmbeddingRecord> records;
    records.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const auto subset = sample_subset(rng, config.num_labels, 1, config.max_labels_per_sample);
        DenseVector v(config.dim);
        const double weight = kSynthBaseScale / static_cast<double>(subset.size());
        for (auto j : subset) axpy(weight, prototypes[j].span(), v.span());
        axpy(config.gap_norm, gap_direction.span(), v.span());
        for (auto& x : v) x += noise_std * rng.gaussian();
        EmbeddingRecord rec;
        rec.source_id = std::to_string(k);
        rec.annotation = multi_hot_from_indices(subset, config.num_labels);
        rec.vector.resize(config.dim);
        for (std::size_t i = 0; i < config.dim; ++i) rec.vector[i] = static_cast<float>(v[i]);
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace

SynthBenchmark synth_benchmark(const SynthConfig& config) {
    if (config.num_labels < 1 || config.dim < 1 || config.num_texts < 1 || config.num_images < 1)
        throw Error(ErrorCode::invalid_config, "synth: N, d, text count and image count must be >= 1");
    if (!(config.gap_norm >= 0.0) || !(config.cluster_noise >= 0.0))
        throw Error(ErrorCode::invalid_config, "synth: gap norm and cluster noise must be >= 0");
    if (config.max_labels_per_sample < 1 || config.max_labels_per_sample > config.num_labels)
        throw Error(ErrorCode::invalid_config, "synth: max labels per sample must be in [1, N]");

    const LabelVocab vocab = synth_vocab(config.num_labels);
    RandomSource root(config.seed);
    RandomSource proto_rng = root.derive(1);
    RandomSource text_rng = root.derive(2);
    RandomSource image_rng = root.derive(3);

    SynthBenchmark bench;
    for (std::size_t j = 0; j < config.num_labels; ++j) bench.prototypes.push_back(unit_gaussian(proto_rng, config.dim));
    bench.text_gap_direction = unit_gaussian(proto_rng, config.dim);
    bench.image_gap_direction = unit_gaussian(proto_rng, config.dim);

    const auto dim = static_cast<std::uint32_t>(config.dim);
    bench.texts = make_store(Modality::text, vocab, dim,
                             synth_records(text_rng, config, bench.prototypes, bench.text_gap_direction,
                                           config.num_texts));
    bench.images = make_store(Modality::image, vocab, dim,
                              synth_records(image_rng, config, bench.prototypes, bench.image_gap_direction,
                                            config.num_images));
    return bench;
}

}  // namespace tai
