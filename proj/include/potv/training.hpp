// ============================================================================
// training.hpp -- deterministic toy MLP trainer producing training transcripts
//
// A transcript is the triple (hyperparameters, ordered data batches, weight
// checkpoints). Everything is regenerable from the 64-bit seed: the
// initialization, the synthetic data and the optimizer trajectory. Training
// is single-threaded with fixed-order accumulation, and weights are
// quantized to binary32 after every update, so replaying any segment from a
// checkpoint reproduces the next checkpoint bit for bit.
// ============================================================================
#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "potv/chip.hpp"
#include "potv/digest.hpp"
#include "potv/prng.hpp"

namespace potv::training {

enum class LossKind : std::uint8_t { mse = 0, cross_entropy = 1 };
enum class DataGen : std::uint8_t { tanh_teacher = 0, argmax_teacher = 1 };
enum class Optimizer : std::uint8_t { sgd = 0, sgd_momentum = 1 };

std::string to_string(LossKind k);
std::string to_string(DataGen g);
std::string to_string(Optimizer o);
LossKind loss_from_string(const std::string& s);
DataGen data_gen_from_string(const std::string& s);
Optimizer optimizer_from_string(const std::string& s);

/// Hyperparameters: everything needed to reproduce a run.
struct Hyperparams {
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> layer_sizes;  // input, hidden..., output widths
  double learning_rate = 0.05;
  std::uint64_t batch_size = 8;
  std::uint64_t total_steps = 0;
  std::uint64_t checkpoint_interval = 1;  // k, must divide total_steps
  LossKind loss = LossKind::mse;
  DataGen data_gen = DataGen::tanh_teacher;
  Optimizer optimizer = Optimizer::sgd;
  double momentum = 0.9;  // used by sgd_momentum only

  void validate() const;
  std::uint64_t param_count() const;      // weights + biases
  std::uint64_t input_dim() const { return layer_sizes.front(); }
  std::uint64_t output_dim() const { return layer_sizes.back(); }
  /// 6 * params * batch_size: the dense-training estimate used for compute
  /// accounting.
  double flops_per_step() const;

  bool operator==(const Hyperparams&) const = default;
};

/// One training batch, row-major float32.
struct Batch {
  std::uint64_t rows = 0;
  std::uint64_t input_dim = 0;
  std::uint64_t output_dim = 0;
  std::vector<float> inputs;   // rows * input_dim
  std::vector<float> targets;  // rows * output_dim

  bool operator==(const Batch&) const = default;
};

/// Full weight vector (plus optimizer state when the optimizer keeps any) at
/// one checkpointed step.
struct Checkpoint {
  std::uint64_t step = 0;
  std::vector<float> weights;
  std::vector<float> velocity;  // empty for plain SGD

  bool operator==(const Checkpoint&) const = default;
};

struct Transcript {
  Hyperparams meta;
  std::vector<Batch> data;          // one batch per step, in order
  std::vector<Checkpoint> checkpoints;  // steps 0, k, 2k, ..., total_steps
  std::vector<double> losses;       // recorded training loss per checkpoint

  std::uint64_t segment_count() const {
    return checkpoints.empty() ? 0 : checkpoints.size() - 1;
  }
  /// Shape/consistency check (counts, dims, k | total_steps). Throws
  /// std::invalid_argument on malformed transcripts.
  void validate_shape() const;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& msg, std::uint64_t step)
      : std::runtime_error(msg), step_(step) {}
  std::uint64_t step() const { return step_; }

 private:
  std::uint64_t step_;
};

/// Regenerates the seed-determined initialization (checkpoint 0).
std::vector<float> regenerate_init(const Hyperparams& meta);

/// Regenerates the full batch sequence from the seed.
std::vector<Batch> generate_data(const Hyperparams& meta);

/// Runs the training loop. noise_sigma > 0 adds zero-mean Gaussian noise of
/// that scale to every gradient component (a stand-in for hardware
/// nondeterminism; drawn from a seed-derived stream so runs stay
/// reproducible). Throws TrainingError if the loss leaves the finite range.
Transcript train(const Hyperparams& meta, double noise_sigma = 0.0);

/// Replays |batches| optimizer steps from a starting checkpoint,
/// deterministically and noise-free. Returns the resulting checkpoint
/// (step = start.step + batches.size()).
Checkpoint replay_segment(const Checkpoint& start, std::span<const Batch> batches,
                          const Hyperparams& meta);

/// Loss of a weight vector on one batch.
double batch_loss(std::span<const float> weights, const Hyperparams& meta, const Batch& batch);

/// Gradient of batch_loss with respect to the weights, in double precision.
/// Exposed so tests can cross-check it against finite differences.
std::vector<double> batch_gradient(std::span<const float> weights, const Hyperparams& meta,
                                   const Batch& batch);

/// Contiguous order-preserving split into count near-equal shards; earlier
/// shards take the remainder (length 10 into 3 -> 4,3,3). Concatenation
/// reproduces the input.
std::vector<chip::WeightShard> shard_weights(std::span<const float> weights,
                                             std::uint64_t count);

// ---------------------------------------------------------------------------
// Canonical encodings -- the hashing pre-images for commitments.
//
// meta:        "potv-meta-v1" | seed | layer count+sizes | lr | batch_size |
//              checkpoint_interval | loss | data_gen | optimizer | momentum
//              (total_steps is deliberately not part of the encoding: it is
//              carried by the batch/checkpoint counts, and a truthful
//              partial report of a run must hash to the same meta digest as
//              the full run.)
// batch:       "potv-batch-v1" | rows | input_dim | output_dim | inputs f32 |
//              targets f32
// checkpoint:  "potv-ckpt-v1" | weight count | weights f32 | velocity count |
//              velocity f32
// All integers 8-byte little-endian; floats IEEE-754 little-endian.
// ---------------------------------------------------------------------------
Digest meta_digest(const Hyperparams& meta);
Digest batch_digest(const Batch& batch);
Digest checkpoint_digest(const Checkpoint& ckpt);

// Transcript directory layout: manifest.json + batches.bin + checkpoints.bin
// (raw little-endian float32 arrays; shapes come from the manifest).
void save_transcript(const Transcript& t, const std::string& dir);
Transcript load_transcript(const std::string& dir);

}  // namespace potv::training
