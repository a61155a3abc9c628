#include "tai/adapter.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "tai/diagnostics.hpp"
#include "tai/error.hpp"

namespace tai {

namespace {

bool layer_activated(const AdapterShape& shape, std::size_t layer) {
    return layer + 1 < shape.layer_count() || shape.activate_output;
}

std::size_t dropout_site_count(const AdapterShape& shape) {
    return shape.hidden.size() + (shape.activate_output ? 1 : 0);
}

}  // namespace

AdapterParams init_params(const AdapterShape& shape, RandomSource& rng) {
    AdapterParams p = AdapterParams::zeros(shape);
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(shape.layer_input(k)));
        auto& layer = p.layers[k];
        for (auto& w : layer.weight.flat()) w = bound * (2.0 * rng.uniform01() - 1.0);
        for (auto& b : layer.bias) b = bound * (2.0 * rng.uniform01() - 1.0);
    }
    return p;
}

DropoutMasks sample_dropout_masks(RandomSource& rng, const AdapterShape& shape, std::size_t batch) {
    DropoutMasks out;
    const double keep_scale = 1.0 / (1.0 - shape.dropout);
    for (std::size_t k = 0; k < dropout_site_count(shape); ++k) {
        DenseMatrix m(batch, shape.layer_output(k));
        for (auto& v : m.flat()) v = rng.uniform01() < shape.dropout ? 0.0 : keep_scale;
        out.masks.push_back(std::move(m));
    }
    return out;
}

ForwardCache forward_batch(const AdapterParams& params, const DenseMatrix& inputs, const DropoutMasks* dropout) {
    const auto& shape = params.shape;
    if (inputs.cols() != shape.input_dim)
        throw Error(ErrorCode::dimension_mismatch, "forward: input has dimension " + std::to_string(inputs.cols()) +
                                                       ", adapter expects " + std::to_string(shape.input_dim));
    if (dropout && dropout->masks.size() != dropout_site_count(shape))
        throw Error(ErrorCode::dimension_mismatch, "forward: dropout mask count does not match the network");
    ForwardCache cache;
    cache.input = inputs;
    if (dropout) cache.dropout = *dropout;
    const DenseMatrix* prev = &cache.input;
    cache.pre.resize(params.layers.size());
    cache.post.resize(params.layers.size());
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        const auto& layer = params.layers[k];
        DenseMatrix& z = cache.pre[k];
        matmul_transposed(*prev, layer.weight, z);
        for (std::size_t i = 0; i < z.rows(); ++i) {
            auto row = z.row(i);
            for (std::size_t j = 0; j < row.size(); ++j) row[j] += layer.bias[j];
        }
        DenseMatrix& a = cache.post[k];
        a = z;
        if (layer_activated(shape, k)) {
            const DenseMatrix* mask = dropout ? &dropout->masks[k] : nullptr;
            if (mask && (mask->rows() != a.rows() || mask->cols() != a.cols()))
                throw Error(ErrorCode::dimension_mismatch, "forward: dropout mask shape mismatch");
            auto av = a.flat();
            for (std::size_t i = 0; i < av.size(); ++i) {
                double v = av[i] > 0.0 ? av[i] : 0.0;
                if (mask) v *= mask->flat()[i];
                av[i] = v;
            }
        }
        prev = &a;
    }
    return cache;
}

ForwardResult forward(const AdapterParams& params, const DenseVector& x, const DropoutMasks* dropout) {
    DenseMatrix input(1, x.size());
    std::copy(x.begin(), x.end(), input.row(0).begin());
    ForwardResult result;
    result.cache = forward_batch(params, input, dropout);
    const auto row = result.cache.logits().row(0);
    result.logits = DenseVector(std::vector<double>(row.begin(), row.end()));
    return result;
}

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

DenseVector sigmoid(const DenseVector& logits) {
    DenseVector p(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) p[i] = sigmoid(logits[i]);
    return p;
}

double bce_loss(std::span<const double> probs, const Annotation& truth) {
    if (probs.size() != truth.size())
        throw Error(ErrorCode::length_mismatch, "bce_loss: probabilities and labels differ in length");
    if (probs.empty()) throw Error(ErrorCode::length_mismatch, "bce_loss: empty label vector");
    double sum = 0.0;
    for (std::size_t j = 0; j < probs.size(); ++j) {
        const double p = std::clamp(probs[j], kProbabilityClip, 1.0 - kProbabilityClip);
        sum += truth[j] > 0 ? std::log(p) : std::log(1.0 - p);
    }
    return -sum / static_cast<double>(probs.size());
}

namespace {

void check_targets(const DenseMatrix& logits, const DenseMatrix& targets, const DenseMatrix* weights) {
    if (targets.rows() != logits.rows() || targets.cols() != logits.cols())
        throw Error(ErrorCode::length_mismatch, "targets shape does not match logits");
    if (weights && (weights->rows() != logits.rows() || weights->cols() != logits.cols()))
        throw Error(ErrorCode::length_mismatch, "loss weights shape does not match logits");
}

double row_weight_total(const DenseMatrix* weights, std::size_t i, std::size_t n) {
    if (!weights) return static_cast<double>(n);
    double total = 0.0;
    for (double w : weights->row(i)) total += w;
    return total;
}

}  // namespace

double batch_loss(const DenseMatrix& logits, const DenseMatrix& targets, const DenseMatrix* weights) {
    check_targets(logits, targets, weights);
    const std::size_t batch = logits.rows();
    const std::size_t n = logits.cols();
    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        const double denom = row_weight_total(weights, i, n);
        if (denom == 0.0) continue;
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double w = weights ? (*weights)(i, j) : 1.0;
            if (w == 0.0) continue;
            const double p = std::clamp(sigmoid(logits(i, j)), kProbabilityClip, 1.0 - kProbabilityClip);
            sum += w * (targets(i, j) > 0.5 ? std::log(p) : std::log(1.0 - p));
        }
        total += -sum / denom;
    }
    return total / static_cast<double>(batch);
}

Gradients backward(const AdapterParams& params, const ForwardCache& cache, const DenseMatrix& targets,
                   const DenseMatrix* weights, double loss_scale) {
    const auto& shape = params.shape;
    if (cache.pre.size() != params.layers.size() || cache.post.size() != params.layers.size() ||
        cache.input.cols() != shape.input_dim)
        throw Error(ErrorCode::dimension_mismatch, "backward: cache does not belong to this network");
    for (std::size_t k = 0; k < params.layers.size(); ++k)
        if (cache.pre[k].cols() != shape.layer_output(k) || cache.pre[k].rows() != cache.input.rows())
            throw Error(ErrorCode::dimension_mismatch, "backward: stale cache for layer " + std::to_string(k));
    const DenseMatrix& logits = cache.logits();
    check_targets(logits, targets, weights);

    const std::size_t batch = logits.rows();
    const std::size_t n = logits.cols();

    // Fused sigmoid + BCE: dL/dlogit = (p - y) / N per sample, averaged over the batch.
    DenseMatrix delta(batch, n);
    for (std::size_t i = 0; i < batch; ++i) {
        const double denom = row_weight_total(weights, i, n);
        if (denom == 0.0) continue;
        const double scale = loss_scale / (denom * static_cast<double>(batch));
        for (std::size_t j = 0; j < n; ++j) {
            const double w = weights ? (*weights)(i, j) : 1.0;
            delta(i, j) = w * scale * (sigmoid(logits(i, j)) - targets(i, j));
        }
    }

    Gradients grads(params.layers.size());
    for (std::size_t k = params.layers.size(); k-- > 0;) {
        if (layer_activated(shape, k)) {
            const auto z = cache.pre[k].flat();
            auto d = delta.flat();
            const double* mask = cache.dropout ? cache.dropout->masks[k].flat().data() : nullptr;
            for (std::size_t i = 0; i < d.size(); ++i) {
                if (z[i] <= 0.0) d[i] = 0.0;
                else if (mask) d[i] *= mask[i];
            }
        }
        const DenseMatrix& prev = k == 0 ? cache.input : cache.post[k - 1];
        auto& g = grads[k];
        matmul_at_b(delta, prev, g.weight);
        g.bias.assign(delta.cols(), 0.0);
        for (std::size_t i = 0; i < delta.rows(); ++i) axpy(1.0, delta.row(i), g.bias);
        if (k > 0) {
            DenseMatrix next;
            matmul(delta, params.layers[k].weight, next);
            delta = std::move(next);
        }
    }
    return grads;
}

OptimizerState OptimizerState::zeros_like(const AdapterParams& params) {
    OptimizerState s;
    const auto z = AdapterParams::zeros(params.shape);
    s.first_moment = z.layers;
    s.second_moment = z.layers;
    return s;
}

namespace {

void adamw_update(std::span<double> theta, std::span<const double> g, std::span<double> m, std::span<double> v,
                  double lr, double bc1, double bc2, const AdamWConfig& c) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        const double old = theta[i];
        theta[i] = old - lr * (m_hat / (std::sqrt(v_hat) + c.eps)) - lr * c.weight_decay * old;
    }
}

}  // namespace

void adamw_step(AdapterParams& params, const Gradients& grads, OptimizerState& state, double lr,
                const AdamWConfig& config) {
    if (grads.size() != params.layers.size() || state.first_moment.size() != params.layers.size() ||
        state.second_moment.size() != params.layers.size())
        throw Error(ErrorCode::dimension_mismatch, "adamw: gradient/state layer count mismatch");
    for (std::size_t k = 0; k < params.layers.size(); ++k)
        if (grads[k].weight.rows() != params.layers[k].weight.rows() ||
            grads[k].weight.cols() != params.layers[k].weight.cols() ||
            grads[k].bias.size() != params.layers[k].bias.size())
            throw Error(ErrorCode::dimension_mismatch, "adamw: gradient shape mismatch in layer " + std::to_string(k));
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        auto& layer = params.layers[k];
        adamw_update(layer.weight.flat(), grads[k].weight.flat(), state.first_moment[k].weight.flat(),
                     state.second_moment[k].weight.flat(), lr, bc1, bc2, config);
        adamw_update(layer.bias, grads[k].bias, state.first_moment[k].bias, state.second_moment[k].bias, lr, bc1,
                     bc2, config);
    }
}

namespace {

// Cosine interpolation from a (t = 0) to b (t = 1), exact at both ends.
double cosine_interp(double a, double b, double t) {
    if (t <= 0.0) return a;
    if (t >= 1.0) return b;
    return b + (a - b) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace

double onecycle_lr(std::size_t step, std::size_t total_steps, double max_lr) {
    if (total_steps == 0 || step >= total_steps)
        throw Error(ErrorCode::step_out_of_range,
                    "onecycle: step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + ")");
    const double initial = max_lr / kOneCycleInitialDiv;
    const double final_lr = max_lr / kOneCycleFinalDiv;
    // Warmup ends at 0.3 * total, compared in integers so that boundary is exact.
    const double warm_end = static_cast<double>(total_steps) * 3.0 / 10.0;
    const double s = static_cast<double>(step);
    if (step * 10 <= total_steps * 3) {
        return cosine_interp(initial, max_lr, warm_end > 0.0 ? s / warm_end : 1.0);
    }
    const double last = static_cast<double>(total_steps - 1);
    const double span = last - warm_end;
    return cosine_interp(max_lr, final_lr, span > 0.0 ? (s - warm_end) / span : 1.0);
}

TrainMode parse_mode(std::string_view name) {
    if (name == "zsl") return TrainMode::zsl;
    if (name == "fsl") return TrainMode::fsl;
    if (name == "pll") return TrainMode::pll;
    throw Error(ErrorCode::invalid_config, "unknown training mode '" + std::string(name) + "'");
}

std::string_view mode_name(TrainMode mode) {
    switch (mode) {
        case TrainMode::zsl: return "zsl";
        case TrainMode::fsl: return "fsl";
        case TrainMode::pll: return "pll";
    }
    return "zsl";
}

void TrainConfig::validate() const {
    if (epochs < 1) throw Error(ErrorCode::invalid_config, "epochs must be >= 1");
    if (batch_size < 1) throw Error(ErrorCode::invalid_config, "batch size must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::invalid_config, "dropout must be in [0, 1)");
    if (!(max_lr > 0.0) || !std::isfinite(max_lr)) throw Error(ErrorCode::invalid_config, "max lr must be > 0");
    for (auto h : hidden)
        if (h == 0) throw Error(ErrorCode::invalid_config, "hidden sizes must be >= 1");
    perturb.validate();
}

std::string format_training_log(const TrainingLog& log) {
    using nlohmann::json;
    std::string out;
    for (const auto& s : log.steps) {
        out += json{{"epoch", s.epoch}, {"step", s.step}, {"lr", s.lr}, {"loss", s.loss}}.dump();
        out += '\n';
    }
    json summary = {{"epochs", log.epochs},
                    {"wall_time", log.wall_time_seconds},
                    {"param_count", log.param_count},
                    {"seed", log.seed},
                    {"epoch_losses", log.epoch_losses}};
    out += json{{"summary", summary}}.dump();
    out += '\n';
    return out;
}

namespace {

struct TrainingSample {
    DenseVector base;
    std::vector<double> targets;
    std::vector<double> weights;
    double radius = 0.0;
    SamplingScheme scheme = SamplingScheme::surface;
};

bool record_less(const EmbeddingRecord& a, const EmbeddingRecord& b) {
    if (a.annotation != b.annotation) return a.annotation < b.annotation;
    return a.vector < b.vector;
}

// Training depends only on the multiset of records, not their file order.
std::vector<EmbeddingRecord> canonical_records(const std::vector<EmbeddingRecord>& records) {
    std::vector<EmbeddingRecord> sorted = records;
    std::stable_sort(sorted.begin(), sorted.end(), record_less);
    return sorted;
}

TrainingSample make_sample(DenseVector base, const Annotation& annotation, double radius, SamplingScheme scheme) {
    TrainingSample s;
    s.base = std::move(base);
    s.targets.resize(annotation.size());
    s.weights.resize(annotation.size());
    for (std::size_t j = 0; j < annotation.size(); ++j) {
        s.targets[j] = annotation[j] > 0 ? 1.0 : 0.0;
        s.weights[j] = annotation[j] < 0 ? 0.0 : 1.0;
    }
    s.radius = radius;
    s.scheme = scheme;
    return s;
}

void check_store(const EmbeddingStore& store, const LabelVocab& vocab, const char* what) {
    store.validate();
    if (store.vocab_hash != vocab.hash())
        throw Error(ErrorCode::vocab_mismatch, std::string(what) + " store was built against a different vocab");
    if (store.num_labels != vocab.size())
        throw Error(ErrorCode::length_mismatch, std::string(what) + " store label count does not match vocab");
}

}  // namespace

TrainResult train(const EmbeddingStore& texts, const EmbeddingStore* images, const LabelVocab& vocab,
                  const TrainConfig& config) {
    const auto started = std::chrono::steady_clock::now();
    config.validate();
    check_store(texts, vocab, "text");
    if (images) {
        check_store(*images, vocab, "image");
        if (images->dim != texts.dim)
            throw Error(ErrorCode::dimension_mismatch, "text and image stores differ in dimension");
    }
    if ((config.mode == TrainMode::fsl || config.mode == TrainMode::pll) && !images)
        throw Error(ErrorCode::mode_mismatch,
                    std::string("mode ") + std::string(mode_name(config.mode)) + " requires an image store");
    if (config.mode == TrainMode::fsl) {
        for (const auto& r : images->records)
            if (!is_multi_hot(r.annotation))
                throw Error(ErrorCode::mode_mismatch, "fsl images must carry full multi-hot annotations");
        if (config.perturb.image_radius > config.perturb.text_radius)
            warn("image radius exceeds text radius; image noise is expected to be much smaller");
    }
    for (const auto& r : texts.records)
        if (!is_multi_hot(r.annotation))
            throw Error(ErrorCode::mode_mismatch, "training texts must carry full multi-hot annotations");

    const auto text_records = canonical_records(texts.records);
    const auto image_records = images ? canonical_records(images->records) : std::vector<EmbeddingRecord>{};

    const PerturbConfig& pc = config.perturb;
    TrainResult result;
    std::vector<TrainingSample> samples;
    samples.reserve(text_records.size() + image_records.size());
    switch (config.mode) {
        case TrainMode::zsl:
            for (const auto& r : text_records) samples.push_back(make_sample(r.as_dense(), r.annotation, pc.text_radius, pc.scheme));
            break;
        case TrainMode::fsl:
            for (const auto& r : text_records) samples.push_back(make_sample(r.as_dense(), r.annotation, pc.text_radius, pc.scheme));
            for (const auto& r : image_records)
                samples.push_back(make_sample(r.as_dense(), r.annotation, pc.image_radius, pc.image_scheme));
            break;
        case TrainMode::pll: {
            if (text_records.empty()) throw Error(ErrorCode::empty_input, "pll training needs texts");
            if (image_records.empty()) throw Error(ErrorCode::empty_input, "pll training needs images");
            auto table = build_centroid_table(text_records, image_records);
            for (const auto& r : text_records)
                samples.push_back(make_sample(shift_text(r.as_dense(), r.annotation, table.offsets), r.annotation,
                                              pc.shift_radius, pc.scheme));
            if (config.pll_train_on_images)
                for (const auto& r : image_records)
                    samples.push_back(make_sample(r.as_dense(), r.annotation, pc.image_radius, pc.image_scheme));
            result.centroids = std::move(table);
            break;
        }
    }
    if (samples.empty()) throw Error(ErrorCode::empty_input, "training set is empty");

    AdapterShape shape;
    shape.input_dim = texts.dim;
    shape.hidden = config.hidden.empty() ? std::vector<std::size_t>{texts.dim, texts.dim} : config.hidden;
    shape.num_labels = vocab.size();
    shape.dropout = config.dropout;
    shape.activate_output = config.activate_output;

    const RandomSource root(config.seed);
    RandomSource init_rng = root.derive(11);
    RandomSource shuffle_rng = root.derive(12);
    RandomSource noise_rng = root.derive(13);
    RandomSource dropout_rng = root.derive(14);

    AdapterParams params = init_params(shape, init_rng);
    OptimizerState opt = OptimizerState::zeros_like(params);

    const std::size_t dim = shape.input_dim;
    const std::size_t n_labels = shape.num_labels;
    const std::size_t steps_per_epoch = (samples.size() + config.batch_size - 1) / config.batch_size;
    const std::size_t total_steps = steps_per_epoch * config.epochs;
    const bool any_masked = std::any_of(samples.begin(), samples.end(), [](const TrainingSample& s) {
        return std::any_of(s.weights.begin(), s.weights.end(), [](double w) { return w == 0.0; });
    });

    std::vector<std::size_t> order(samples.size());
    std::size_t global_step = 0;
    result.log.steps.reserve(total_steps);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t batch = std::min(config.batch_size, order.size() - begin);
            DenseMatrix x(batch, dim), y(batch, n_labels), w;
            if (any_masked) w = DenseMatrix(batch, n_labels);
            for (std::size_t i = 0; i < batch; ++i) {
                const auto& s = samples[order[begin + i]];
                auto row = x.row(i);
                std::copy(s.base.begin(), s.base.end(), row.begin());
                add_noise(noise_rng, row, s.radius, s.scheme);
                std::copy(s.targets.begin(), s.targets.end(), y.row(i).begin());
                if (any_masked) std::copy(s.weights.begin(), s.weights.end(), w.row(i).begin());
            }
            const double lr = onecycle_lr(global_step, total_steps, config.max_lr);
            std::optional<DropoutMasks> masks;
            if (shape.dropout > 0.0) masks = sample_dropout_masks(dropout_rng, shape, batch);
            const ForwardCache cache = forward_batch(params, x, masks ? &*masks : nullptr);
            const DenseMatrix* wp = any_masked ? &w : nullptr;
            const double loss = batch_loss(cache.logits(), y, wp);
            const Gradients grads = backward(params, cache, y, wp);
            adamw_step(params, grads, opt, lr, config.optimizer);
            result.log.steps.push_back({epoch, global_step, lr, loss});
            epoch_loss += loss * static_cast<double>(batch);
            ++global_step;
        }
        result.log.epoch_losses.push_back(epoch_loss / static_cast<double>(samples.size()));
    }
    if (!params.all_finite()) throw Error(ErrorCode::corrupt_payload, "training diverged to non-finite parameters");
    params.round_to_float();

    result.checkpoint.params = std::move(params);
    result.checkpoint.vocab_hash = vocab.hash();
    result.checkpoint.seed = config.seed;
    result.log.epochs = config.epochs;
    result.log.param_count = shape.parameter_count();
    result.log.seed = config.seed;
    result.log.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

ScoreFile predict(const AdapterCheckpoint& checkpoint, const EmbeddingStore& store) {
    const auto& shape = checkpoint.params.shape;
    store.validate();
    if (store.dim != shape.input_dim)
        throw Error(ErrorCode::dimension_mismatch, "predict: store dimension " + std::to_string(store.dim) +
                                                       " does not match adapter input " +
                                                       std::to_string(shape.input_dim));
    if (store.vocab_hash != checkpoint.vocab_hash || store.num_labels != shape.num_labels)
        throw Error(ErrorCode::vocab_mismatch, "predict: store and checkpoint were built against different vocabs");
    ScoreFile out;
    out.reserve(store.size());
    constexpr std::size_t kChunk = 256;
    for (std::size_t begin = 0; begin < store.size(); begin += kChunk) {
        const std::size_t count = std::min(kChunk, store.size() - begin);
        DenseMatrix x(count, store.dim);
        for (std::size_t i = 0; i < count; ++i) {
            const auto& v = store.records[begin + i].vector;
            auto row = x.row(i);
            for (std::size_t c = 0; c < v.size(); ++c) row[c] = static_cast<double>(v[c]);
        }
        const ForwardCache cache = forward_batch(checkpoint.params, x);
        for (std::size_t i = 0; i < count; ++i) {
            ScoreRecord rec;
            rec.source_id = store.records[begin + i].source_id;
            for (double z : cache.logits().row(i)) rec.scores.push_back(sigmoid(z));
            out.push_back(std::move(rec));
        }
    }
    return out;
}

}  // namespace tai
