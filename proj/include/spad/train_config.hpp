#pragma once

#include <cstdint>

#include <json.hpp>

namespace spad {

/// Optimizer, schedule and self-paced settings for one training run.
/// Defaults are the face-scale settings (SGD, momentum 0.9, weight decay
/// 5e-4, lr 1e-5 decayed by 0.98 per epoch, batch 64, 25 epochs with 5
/// warm-up epochs, m = 4, r = 5e-3).
struct TrainConfig {
  double learning_rate = 1e-5;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double lr_gamma = 0.98;
  std::int64_t batch_size = 64;
  std::int64_t epochs = 25;
  std::int64_t warmup_epochs = 5;
  double m = 4.0;
  double r = 5e-3;
  std::uint64_t seed = 0;
  bool spl_enabled = true;
  bool running_statistics = false;
  double running_momentum = 0.9;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Learning rate used during epoch `epoch` (0-based): lr * gamma^epoch.
  double learning_rate_at(std::int64_t epoch) const;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

}  // namespace spad
