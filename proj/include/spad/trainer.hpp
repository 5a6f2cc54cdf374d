#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "spad/checkpoint.hpp"
#include "spad/data.hpp"
#include "spad/model.hpp"
#include "spad/spl.hpp"
#include "spad/train_config.hpp"

namespace spad {

/// Per-epoch summary line of the training log.
struct EpochSummary {
  std::int64_t epoch = 0;  // 1-based count of completed epochs
  double mean_loss = 0.0;
  double mean_objective = 0.0;
  double learning_rate = 0.0;
  double wall_time_s = 0.0;
  std::int64_t steps = 0;

  nlohmann::json to_json() const;
};

struct TrainingLog {
  std::vector<BatchReport> steps;
  std::vector<EpochSummary> epochs;
};

/// Optional observers; called synchronously from the training loop.
struct FitHooks {
  std::function<void(const BatchReport&)> on_step;
  std::function<void(const EpochSummary&)> on_epoch;
  std::function<void(const Checkpoint&)> on_checkpoint;
};

struct FitResult {
  ConvAutoencoder<float> model;
  TrainingLog log;
  Checkpoint final_checkpoint;
};

/// Shuffled sample order for one epoch, a pure function of (seed, epoch, n).
std::vector<std::size_t> epoch_order(std::uint64_t seed, std::int64_t epoch, std::size_t n);

/// Consecutive batches of `batch_size`; a trailing batch with fewer than two
/// samples is dropped.
std::vector<std::vector<std::size_t>> partition_batches(const std::vector<std::size_t>& order,
                                                        std::int64_t batch_size);

std::int64_t batches_per_epoch(std::size_t n, std::int64_t batch_size);

/// Trains a freshly initialized autoencoder (init seed = config.seed).
/// Warm-up epochs use unit weights; afterwards each step runs forward losses,
/// the self-paced weight rule, the weighted gradient and one SGD update. The
/// learning rate of epoch e is lr * gamma^e. Throws DivergenceError naming the
/// step on a non-finite loss or gradient.
FitResult fit(const TrainingSet& data, const TrainConfig& config, const ArchitectureDescriptor& arch,
              const FitHooks& hooks = {});

/// Continues from a checkpoint as if never interrupted. The config must equal
/// the stored one except for `epochs`, which may grow. A checkpoint that
/// already covers every epoch returns its parameters unchanged.
FitResult resume(const Checkpoint& checkpoint, const TrainingSet& data, const TrainConfig& config,
                 const FitHooks& hooks = {});

}  // namespace spad
