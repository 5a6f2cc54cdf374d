#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

namespace spad {

/// Bookkeeping for the self-paced weight schedule.
struct SplState {
  std::int64_t step = 0;  // post-warm-up mini-batches processed
  double m = 4.0;         // initial standard-deviation range
  double r = 5e-3;        // shrink rate of the range per step
  bool warmup_active = true;
  std::optional<double> last_lambda;

  // Optional running statistics (exponential moving average over batches)
  // used instead of the current batch's mean and deviation.
  bool running_statistics = false;
  double running_momentum = 0.9;
  std::optional<double> running_mu;
  std::optional<double> running_sigma;

  /// Throws ConfigError when m < 1, r <= 0 or the momentum is outside [0,1).
  void validate() const;

  nlohmann::json to_json() const;
  static SplState from_json(const nlohmann::json& j);

  friend bool operator==(const SplState&, const SplState&) = default;
};

/// What one mini-batch contributed to the schedule.
struct BatchReport {
  std::int64_t global_step = 0;  // every processed mini-batch, warm-up included
  std::int64_t epoch = 0;
  std::int64_t spl_step = 0;     // schedule step s at which lambda was computed
  std::vector<double> losses;
  std::vector<double> weights;
  double mu = 0.0;
  double sigma = 0.0;
  std::optional<double> lambda_used;  // absent during warm-up or with SPL off
  std::int64_t removed_count = 0;
  bool degenerate_sigma = false;  // sigma == 0 override applied
  double objective = 0.0;         // weighted batch objective actually minimized

  /// Ten equal-width bins over [0,1]; weight 1 falls in the last bin.
  std::array<std::int64_t, 10> weight_histogram() const;
  /// One training-log line.
  nlohmann::json to_json() const;
};

/// lambda = min(mu - max(m - r*s, 1)*sigma, mu - sigma). Not clamped at zero.
double compute_lambda(double mu, double sigma, std::int64_t s, double m, double r);

/// v = 0 when L <= lambda, otherwise clamp(1 - lambda/L, 0, 1). With lambda <= 0
/// every weight is 1, including zero losses. Throws NumericalError on a
/// non-finite or negative loss.
std::vector<double> compute_weights(std::span<const double> losses, double lambda);

/// Arithmetic mean and population standard deviation; at least two losses.
std::pair<double, double> batch_statistics(std::span<const double> losses);

/// One pass of the schedule. During warm-up every weight is 1 and the state
/// is left unchanged; otherwise lambda is computed at the current step, the
/// weights follow from it, and the step advances by one.
std::pair<BatchReport, SplState> spl_step(std::span<const double> losses, const SplState& state);

}  // namespace spad
