#include "spad/spl.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

#include "spad/errors.hpp"

namespace spad {

void SplState::validate() const {
  if (!(m >= 1.0)) throw ConfigError("spl: m must be >= 1, got " + std::to_string(m));
  if (!(r > 0.0)) throw ConfigError("spl: r must be > 0, got " + std::to_string(r));
  if (step < 0) throw ConfigError("spl: negative step counter");
  if (!(running_momentum >= 0.0 && running_momentum < 1.0))
    throw ConfigError("spl: running_momentum must be in [0,1)");
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

nlohmann::json SplState::to_json() const {
  return {{"step", step},
          {"m", m},
          {"r", r},
          {"warmup_active", warmup_active},
          {"last_lambda", optional_json(last_lambda)},
          {"running_statistics", running_statistics},
          {"running_momentum", running_momentum},
          {"running_mu", optional_json(running_mu)},
          {"running_sigma", optional_json(running_sigma)}};
}

SplState SplState::from_json(const nlohmann::json& j) {
  SplState s;
  s.step = j.at("step").get<std::int64_t>();
  s.m = j.at("m").get<double>();
  s.r = j.at("r").get<double>();
  s.warmup_active = j.at("warmup_active").get<bool>();
  s.last_lambda = optional_from(j, "last_lambda");
  s.running_statistics = j.at("running_statistics").get<bool>();
  s.running_momentum = j.at("running_momentum").get<double>();
  s.running_mu = optional_from(j, "running_mu");
  s.running_sigma = optional_from(j, "running_sigma");
  s.validate();
  return s;
}

std::array<std::int64_t, 10> BatchReport::weight_histogram() const {
  std::array<std::int64_t, 10> bins{};
  for (double w : weights) {
    const int b = std::clamp(static_cast<int>(std::floor(w * 10.0)), 0, 9);
    ++bins[b];
  }
  return bins;
}

nlohmann::json BatchReport::to_json() const {
  double mean_loss = 0.0;
  for (double l : losses) mean_loss += l;
  if (!losses.empty()) mean_loss /= static_cast<double>(losses.size());
  return {{"type", "step"},
          {"global_step", global_step},
          {"epoch", epoch},
          {"step", spl_step},
          {"batch_size", losses.size()},
          {"mean_loss", mean_loss},
          {"objective", objective},
          {"mu", mu},
          {"sigma", sigma},
          {"lambda", optional_json(lambda_used)},
          {"removed_count", removed_count},
          {"degenerate_sigma", degenerate_sigma},
          {"weight_histogram", weight_histogram()}};
}

double compute_lambda(double mu, double sigma, std::int64_t s, double m, double r) {
  const double coefficient = std::max(m - r * static_cast<double>(s), 1.0);
  return std::min(mu - coefficient * sigma, mu - sigma);
}

std::vector<double> compute_weights(std::span<const double> losses, double lambda) {
  std::vector<double> weights(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const double loss = losses[i];
    if (!std::isfinite(loss) || loss < 0.0)
      throw NumericalError("compute_weights: invalid loss " + std::to_string(loss) + " at index " +
                           std::to_string(i));
    if (lambda <= 0.0) {
      // Any nonnegative loss is above a nonpositive threshold, and the raw
      // value 1 - lambda/L is >= 1; zero losses are kept as well.
      weights[i] = 1.0;
    } else if (loss <= lambda) {
      weights[i] = 0.0;
    } else {
      weights[i] = std::clamp(1.0 - lambda / loss, 0.0, 1.0);
    }
  }
  return weights;
}

std::pair<double, double> batch_statistics(std::span<const double> losses) {
  if (losses.size() < 2)
    throw ConfigError("batch_statistics needs at least 2 losses, got " + std::to_string(losses.size()));
  // The summed mean of equal values can be off by an ulp, which would leave
  // a constant batch with a tiny nonzero deviation.
  if (std::all_of(losses.begin(), losses.end(), [&](double l) { return l == losses[0]; })) return {losses[0], 0.0};
  double mean = 0.0;
  for (double l : losses) mean += l;
  mean /= static_cast<double>(losses.size());
  double var = 0.0;
  for (double l : losses) var += (l - mean) * (l - mean);
  var /= static_cast<double>(losses.size());
  return {mean, std::sqrt(var)};
}

std::pair<BatchReport, SplState> spl_step(std::span<const double> losses, const SplState& state) {
  state.validate();
  BatchReport report;
  report.losses.assign(losses.begin(), losses.end());
  for (std::size_t i = 0; i < losses.size(); ++i)
    if (!std::isfinite(losses[i]) || losses[i] < 0.0)
      throw NumericalError("spl_step: invalid loss at index " + std::to_string(i));
  std::tie(report.mu, report.sigma) = batch_statistics(losses);
  report.spl_step = state.step;

  SplState next = state;
  if (state.warmup_active) {
    report.weights.assign(losses.size(), 1.0);
    return {report, next};
  }

  double mu = report.mu;
  double sigma = report.sigma;
  if (state.running_statistics) {
    const double a = state.running_momentum;
    next.running_mu = state.running_mu ? a * *state.running_mu + (1.0 - a) * report.mu : report.mu;
    next.running_sigma =
        state.running_sigma ? a * *state.running_sigma + (1.0 - a) * report.sigma : report.sigma;
    mu = *next.running_mu;
    sigma = *next.running_sigma;
  }

  const double lambda = compute_lambda(mu, sigma, state.step, state.m, state.r);
  report.lambda_used = lambda;
  if (report.sigma == 0.0) {
    // Constant-loss batch: there is nothing to rank, keep everything.
    std::cerr << "warning: zero loss deviation at SPL step " << state.step << ", keeping all samples\n";
    report.degenerate_sigma = true;
    report.weights.assign(losses.size(), 1.0);
  } else {
    report.weights = compute_weights(losses, lambda);
  }
  report.removed_count = std::count(report.weights.begin(), report.weights.end(), 0.0);
  next.last_lambda = lambda;
  next.step = state.step + 1;
  return {report, next};
}

}  // namespace spad
