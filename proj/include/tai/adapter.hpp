#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tai/adapter_params.hpp"
#include "tai/dataio.hpp"
#include "tai/numkit.hpp"
#include "tai/perturb.hpp"

namespace tai {

// PyTorch-style uniform init: every weight and bias in U(-1/sqrt(in), 1/sqrt(in)).
AdapterParams init_params(const AdapterShape& shape, RandomSource& rng);

// Dropout keep-masks per dropout site, already scaled by 1/(1 - rate).
struct DropoutMasks {
    std::vector<DenseMatrix> masks;
};

DropoutMasks sample_dropout_masks(RandomSource& rng, const AdapterShape& shape, std::size_t batch);

struct ForwardCache {
    DenseMatrix input;                   // batch x d
    std::vector<DenseMatrix> pre;        // per layer, before activation
    std::vector<DenseMatrix> post;       // per layer, after activation and dropout
    std::optional<DropoutMasks> dropout;

    const DenseMatrix& logits() const { return post.back(); }
};

// Rows of `inputs` are samples. Without masks, dropout is the identity.
ForwardCache forward_batch(const AdapterParams& params, const DenseMatrix& inputs,
                           const DropoutMasks* dropout = nullptr);

struct ForwardResult {
    DenseVector logits;
    ForwardCache cache;
};

ForwardResult forward(const AdapterParams& params, const DenseVector& x, const DropoutMasks* dropout = nullptr);

double sigmoid(double z) noexcept;
DenseVector sigmoid(const DenseVector& logits);

inline constexpr double kProbabilityClip = 1e-7;

// Mean binary cross-entropy over labels, probabilities clipped to [1e-7, 1 - 1e-7].
double bce_loss(std::span<const double> probs, const Annotation& truth);

// Batch objective: mean over samples of bce_loss. Entries of `targets` are in
// {0, 1}; a zero in `weights` removes that label from a sample's loss (used for
// unknown partial labels). Without weights every label counts.
double batch_loss(const DenseMatrix& logits, const DenseMatrix& targets, const DenseMatrix* weights = nullptr);

using Gradients = std::vector<AdapterLayer>;

// Exact gradients of batch_loss through the network. `cache` must come from
// forward_batch on the same params.
Gradients backward(const AdapterParams& params, const ForwardCache& cache, const DenseMatrix& targets,
                   const DenseMatrix* weights = nullptr, double loss_scale = 1.0);

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct OptimizerState {
    Gradients first_moment;
    Gradients second_moment;
    std::uint64_t step = 0;

    static OptimizerState zeros_like(const AdapterParams& params);
};

void adamw_step(AdapterParams& params, const Gradients& grads, OptimizerState& state, double lr,
                const AdamWConfig& config);

/// One-cycle learning rate: cosine warmup from max_lr/25 to max_lr over the
/// first 30% of steps, then cosine annealing to max_lr/1e4 at the last step.
double onecycle_lr(std::size_t step, std::size_t total_steps, double max_lr);

inline constexpr double kOneCycleWarmupFraction = 0.3;
inline constexpr double kOneCycleInitialDiv = 25.0;
inline constexpr double kOneCycleFinalDiv = 1e4;

enum class TrainMode { zsl, fsl, pll };

TrainMode parse_mode(std::string_view name);
std::string_view mode_name(TrainMode mode);

struct TrainConfig {
    std::size_t epochs = 60;
    std::size_t batch_size = 64;
    double max_lr = 1e-4;
    AdamWConfig optimizer;
    double dropout = 0.5;
    // Empty means [d, d].
    std::vector<std::size_t> hidden;
    bool activate_output = false;
    TrainMode mode = TrainMode::zsl;
    PerturbConfig perturb;
    std::uint64_t seed = 0;
    // pll only: also train on the partially labeled images, unknown labels masked out of the loss.
    bool pll_train_on_images = false;

    void validate() const;
};

struct StepLog {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double lr = 0.0;
    double loss = 0.0;
};

struct TrainingLog {
    std::vector<StepLog> steps;
    std::vector<double> epoch_losses;
    std::size_t epochs = 0;
    std::size_t param_count = 0;
    std::uint64_t seed = 0;
    double wall_time_seconds = 0.0;
};

std::string format_training_log(const TrainingLog& log);

struct TrainResult {
    AdapterCheckpoint checkpoint;
    TrainingLog log;
    std::optional<CentroidTable> centroids;
};

// `images` holds the few-shot set (fsl) or the partially labeled set (pll);
// zsl ignores it.
TrainResult train(const EmbeddingStore& texts, const EmbeddingStore* images, const LabelVocab& vocab,
                  const TrainConfig& config);

ScoreFile predict(const AdapterCheckpoint& checkpoint, const EmbeddingStore& store);

}  // namespace tai
