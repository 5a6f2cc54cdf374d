#include "spad/trainer.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "spad/optimizer.hpp"

namespace spad {

namespace {

template <typename S>
concept ExposesLabel = requires(const S& s) { s.eval_label; } || requires(const S& s) { s.label; } ||
                       requires(const S& s) { s.label(); };

static_assert(!ExposesLabel<TrainingSample>, "trainer input must not carry evaluation labels");
static_assert(!ExposesLabel<UnlabeledRecord>, "trainer input must not carry evaluation labels");

struct RunState {
  ConvAutoencoder<float> model;
  ParamSet<float> momentum;
  SplState spl;
  std::int64_t epoch = 0;
  std::int64_t global_step = 0;
};

SplState initial_spl(const TrainConfig& c) {
  SplState s;
  s.m = c.m;
  s.r = c.r;
  s.running_statistics = c.running_statistics;
  s.running_momentum = c.running_momentum;
  s.warmup_active = c.warmup_epochs > 0;
  return s;
}

Checkpoint snapshot(const RunState& st, const TrainConfig& config) {
  Checkpoint ck;
  ck.epoch = st.epoch;
  ck.global_step = st.global_step;
  ck.architecture = st.model.architecture();
  ck.params = st.model.params();
  ck.momentum = st.momentum;
  ck.spl = st.spl;
  ck.config = config;
  ck.seed = config.seed;
  return ck;
}

FitResult run(RunState st, const TrainingSet& data, const TrainConfig& config, const FitHooks& hooks) {
  if (data.size() < 2) throw ConfigError("training set needs at least 2 samples, got " + std::to_string(data.size()));
  for (const auto& s : data.samples) {
    if (s.image.channels() != st.model.architecture().input_channels ||
        s.image.height() != st.model.architecture().input_side ||
        s.image.width() != st.model.architecture().input_side)
      throw ShapeError("training sample '" + s.id + "' has shape " + s.image.shape_string());
  }

  FitResult result{st.model, {}, {}};
  for (; st.epoch < config.epochs; ++st.epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = config.learning_rate_at(st.epoch);
    const bool warmup = st.epoch < config.warmup_epochs;
    st.spl.warmup_active = warmup;

    double loss_sum = 0.0, objective_sum = 0.0;
    std::int64_t loss_count = 0, steps = 0;
    const auto batches = partition_batches(epoch_order(config.seed, st.epoch, data.size()), config.batch_size);
    for (const auto& batch : batches) {
      std::vector<ImageTensor> images;
      images.reserve(batch.size());
      for (std::size_t idx : batch) images.push_back(data.samples[idx].image);

      BatchEvaluation<float> eval = evaluate_batch(st.model, std::span<const ImageTensor>(images));
      for (std::size_t i = 0; i < eval.losses.size(); ++i)
        if (!std::isfinite(eval.losses[i]))
          throw DivergenceError(st.global_step, "non-finite loss for sample '" + data.samples[batch[i]].id + "'");

      BatchReport report;
      if (config.spl_enabled) {
        auto [r, next] = spl_step(eval.losses, st.spl);
        report = std::move(r);
        st.spl = next;
      } else {
        report.losses = eval.losses;
        report.weights.assign(eval.losses.size(), 1.0);
        std::tie(report.mu, report.sigma) = batch_statistics(eval.losses);
        report.spl_step = st.spl.step;
      }
      report.global_step = st.global_step;
      report.epoch = st.epoch;
      report.objective = weighted_batch_objective(report.losses, report.weights);

      ParamSet<float> grads;
      try {
        grads = backpropagate(st.model, eval, report.weights);
      } catch (const NumericalError& e) {
        throw DivergenceError(st.global_step, e.what());
      }
      sgd_update(st.model.params(), grads, st.momentum, lr, config.momentum, config.weight_decay);
      if (!st.model.params().all_finite())
        throw DivergenceError(st.global_step, "non-finite parameters after update");

      for (double l : report.losses) loss_sum += l;
      loss_count += static_cast<std::int64_t>(report.losses.size());
      objective_sum += report.objective;
      ++steps;
      ++st.global_step;
      if (hooks.on_step) hooks.on_step(report);
      result.log.steps.push_back(std::move(report));
    }

    EpochSummary summary;
    summary.epoch = st.epoch + 1;
    summary.mean_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    summary.mean_objective = steps ? objective_sum / static_cast<double>(steps) : 0.0;
    summary.learning_rate = lr;
    summary.steps = steps;
    summary.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (hooks.on_epoch) hooks.on_epoch(summary);
    result.log.epochs.push_back(summary);

    RunState after = st;
    after.epoch = st.epoch + 1;
    if (hooks.on_checkpoint) hooks.on_checkpoint(snapshot(after, config));
  }
  result.model = st.model;
  result.final_checkpoint = snapshot(st, config);
  return result;
}

}  // namespace

nlohmann::json EpochSummary::to_json() const {
  return {{"type", "epoch"},         {"epoch", epoch}, {"mean_loss", mean_loss}, {"mean_objective", mean_objective},
          {"lr", learning_rate},     {"steps", steps}, {"wall_time_s", wall_time_s}};
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::int64_t epoch, std::size_t n) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::vector<std::vector<std::size_t>> partition_batches(const std::vector<std::size_t>& order,
                                                        std::int64_t batch_size) {
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  std::vector<std::vector<std::size_t>> batches;
  const auto b = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < order.size(); start += b) {
    const std::size_t end = std::min(order.size(), start + b);
    if (end - start < 2) break;
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

std::int64_t batches_per_epoch(std::size_t n, std::int64_t batch_size) {
  const auto b = static_cast<std::size_t>(batch_size);
  std::size_t full = n / b;
  if (n % b >= 2) ++full;
  return static_cast<std::int64_t>(full);
}

FitResult fit(const TrainingSet& data, const TrainConfig& config, const ArchitectureDescriptor& arch,
              const FitHooks& hooks) {
  config.validate();
  RunState st{ConvAutoencoder<float>::initialized(arch, config.seed), {}, initial_spl(config), 0, 0};
  st.momentum = st.model.params().zeros_like();
  return run(std::move(st), data, config, hooks);
}

FitResult resume(const Checkpoint& checkpoint, const TrainingSet& data, const TrainConfig& config,
                 const FitHooks& hooks) {
  if (checkpoint.schema_version != kCheckpointSchemaVersion)
    throw CheckpointError("checkpoint schema version " + std::to_string(checkpoint.schema_version) +
                          " is not supported");
  config.validate();
  TrainConfig stored = checkpoint.config;
  stored.epochs = config.epochs;
  if (!(stored == config)) {
    const auto a = checkpoint.config.to_json();
    const auto b = config.to_json();
    std::string fields;
    for (const auto& [key, value] : a.items())
      if (key != "epochs" && b.at(key) != value) fields += (fields.empty() ? "" : ", ") + key;
    throw ConfigError("resume config conflicts with checkpoint in: " + fields);
  }
  RunState st{checkpoint.model(), checkpoint.momentum, checkpoint.spl, checkpoint.epoch, checkpoint.global_step};
  if (st.epoch >= config.epochs) {
    FitResult done{st.model, {}, checkpoint};
    return done;
  }
  return run(std::move(st), data, config, hooks);
}

}  // namespace spad
