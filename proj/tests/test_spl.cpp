#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "spad/errors.hpp"
#include "spad/spl.hpp"

namespace spad {
namespace {

TEST(Lambda, ScheduleSubstitutions) {
  EXPECT_EQ(compute_lambda(10, 2, 0, 4, 5e-3), 2.0);
  EXPECT_EQ(compute_lambda(10, 2, 600, 4, 5e-3), 8.0);
  EXPECT_EQ(compute_lambda(10, 2, 1000, 4, 5e-3), 8.0);
}

TEST(Lambda, NonDecreasingAndCappedAtMeanMinusSigma) {
  double prev = -1e300;
  for (std::int64_t s = 0; s <= 2000; ++s) {
    const double l = compute_lambda(3.5, 0.75, s, 4.0, 5e-3);
    EXPECT_GE(l, prev);
    EXPECT_LE(l, 3.5 - 0.75);
    prev = l;
  }
  EXPECT_EQ(prev, 3.5 - 0.75);
}

TEST(Lambda, MayBeNegative) { EXPECT_LT(compute_lambda(1.0, 1.0, 0, 4.0, 5e-3), 0.0); }

TEST(Weights, HandExamples) {
  EXPECT_EQ(compute_weights(std::vector<double>{1.0}, 0.5)[0], 0.5);
  EXPECT_EQ(compute_weights(std::vector<double>{0.4}, 0.5)[0], 0.0);
  EXPECT_EQ(compute_weights(std::vector<double>{0.5}, 0.5)[0], 0.0);
  EXPECT_EQ(compute_weights(std::vector<double>{1.0}, -0.2)[0], 1.0);
}

TEST(Weights, NonPositiveLambdaKeepsEverything) {
  const auto w = compute_weights(std::vector<double>{0.0, 0.1, 3.0}, 0.0);
  EXPECT_EQ(w, (std::vector<double>{1.0, 1.0, 1.0}));
  EXPECT_EQ(compute_weights(std::vector<double>{0.0}, -1.0)[0], 1.0);
}

TEST(Weights, InvalidLossesRaise) {
  EXPECT_THROW(compute_weights(std::vector<double>{std::nan("")}, 0.5), NumericalError);
  EXPECT_THROW(compute_weights(std::vector<double>{INFINITY}, 0.5), NumericalError);
  EXPECT_THROW(compute_weights(std::vector<double>{-1.0}, 0.5), NumericalError);
}

TEST(Weights, MonotoneInLossAndLambda) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int i = 0; i < 2000; ++i) {
    double la = u(rng), lb = u(rng), lambda = u(rng) - 1.0;
    if (la > lb) std::swap(la, lb);
    const auto w = compute_weights(std::vector<double>{la, lb}, lambda);
    EXPECT_LE(w[0], w[1]);
    double l1 = u(rng) - 1.0, l2 = u(rng) - 1.0;
    if (l1 > l2) std::swap(l1, l2);
    const double loss = u(rng);
    EXPECT_GE(compute_weights(std::vector<double>{loss}, l1)[0], compute_weights(std::vector<double>{loss}, l2)[0]);
  }
}

TEST(Weights, LimitBehaviour) {
  EXPECT_GT(compute_weights(std::vector<double>{1e12}, 1.0)[0], 1.0 - 1e-9);
  const double just_above = std::nextafter(1.0, 2.0);
  const double w = compute_weights(std::vector<double>{just_above}, 1.0)[0];
  EXPECT_GT(w, 0.0);
  EXPECT_LT(w, 1e-12);
}

TEST(Statistics, PopulationDeviation) {
  const auto [mu, sigma] = batch_statistics(std::vector<double>{2.0, 4.0});
  EXPECT_EQ(mu, 3.0);
  EXPECT_EQ(sigma, 1.0);
  const auto [mu2, sigma2] = batch_statistics(std::vector<double>{5.0, 5.0, 5.0});
  EXPECT_EQ(mu2, 5.0);
  EXPECT_EQ(sigma2, 0.0);
  EXPECT_THROW(batch_statistics(std::vector<double>{1.0}), ConfigError);
}

TEST(Statistics, MatchesTwoPassOracle) {
  std::mt19937_64 rng(9);
  std::gamma_distribution<double> g(2.0, 0.03);
  std::vector<double> losses(64);
  for (auto& l : losses) l = g(rng);
  long double sum = 0;
  for (double l : losses) sum += l;
  const long double mean = sum / losses.size();
  long double sq = 0;
  for (double l : losses) sq += (l - mean) * (l - mean);
  const auto [mu, sigma] = batch_statistics(losses);
  EXPECT_NEAR(mu, static_cast<double>(mean), 1e-9);
  EXPECT_NEAR(sigma, std::sqrt(static_cast<double>(sq / losses.size())), 1e-9);
}

SplState active(std::int64_t step = 0) {
  SplState s;
  s.warmup_active = false;
  s.step = step;
  return s;
}

TEST(Step, WarmupKeepsWeightsAndFreezesCounter) {
  SplState s;
  s.step = 0;
  s.warmup_active = true;
  const auto [report, next] = spl_step(std::vector<double>{0.1, 0.5, 0.9}, s);
  EXPECT_EQ(report.weights, (std::vector<double>{1, 1, 1}));
  EXPECT_FALSE(report.lambda_used.has_value());
  EXPECT_EQ(next.step, 0);
  EXPECT_EQ(report.removed_count, 0);
}

TEST(Step, SmallBatchExample) {
  const auto [report, next] = spl_step(std::vector<double>{2.0, 4.0}, active());
  EXPECT_EQ(report.mu, 3.0);
  EXPECT_EQ(report.sigma, 1.0);
  EXPECT_EQ(*report.lambda_used, -1.0);
  EXPECT_EQ(report.weights, (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(report.removed_count, 0);
  EXPECT_EQ(next.step, 1);
  EXPECT_EQ(*next.last_lambda, -1.0);
}

TEST(Step, RemovesExactlyTheLowestLosses) {
  // Past the schedule ramp lambda = mu - sigma; count by enumeration.
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> losses(32);
    for (auto& l : losses) l = u(rng);
    const auto [report, next] = spl_step(losses, active(10000));
    const auto [mu, sigma] = batch_statistics(losses);
    const double lambda = mu - sigma;
    ASSERT_EQ(*report.lambda_used, lambda);
    std::int64_t k = 0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
      if (losses[i] <= lambda) {
        ++k;
        EXPECT_EQ(report.weights[i], 0.0);
      } else {
        EXPECT_GT(report.weights[i], 0.0);
      }
    }
    EXPECT_EQ(report.removed_count, k);
  }
}

TEST(Step, ReportIsSelfConsistent) {
  std::mt19937_64 rng(5);
  std::lognormal_distribution<double> d(-3.0, 0.5);
  SplState s = active();
  for (int i = 0; i < 700; ++i) {
    std::vector<double> losses(16);
    for (auto& l : losses) l = d(rng);
    auto [report, next] = spl_step(losses, s);
    ASSERT_EQ(report.weights, compute_weights(report.losses, *report.lambda_used));
    ASSERT_EQ(report.spl_step, s.step);
    for (double w : report.weights) ASSERT_TRUE(w >= 0.0 && w <= 1.0);
    s = next;
  }
  EXPECT_EQ(s.step, 700);
}

TEST(Step, ConstantBatchIsKeptWithFlag) {
  const auto [report, next] = spl_step(std::vector<double>{0.2, 0.2, 0.2}, active(5));
  EXPECT_TRUE(report.degenerate_sigma);
  EXPECT_EQ(report.weights, (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(report.removed_count, 0);
  EXPECT_EQ(next.step, 6);
}

TEST(Step, RunningStatisticsBlendBatches) {
  SplState s = active();
  s.running_statistics = true;
  s.running_momentum = 0.5;
  auto [r1, s1] = spl_step(std::vector<double>{1.0, 3.0}, s);
  EXPECT_EQ(*s1.running_mu, 2.0);
  EXPECT_EQ(*s1.running_sigma, 1.0);
  auto [r2, s2] = spl_step(std::vector<double>{5.0, 7.0}, s1);
  EXPECT_EQ(*s2.running_mu, 0.5 * 2.0 + 0.5 * 6.0);
  EXPECT_EQ(*s2.running_sigma, 1.0);
  EXPECT_EQ(*r2.lambda_used, compute_lambda(4.0, 1.0, 1, s.m, s.r));
}

TEST(State, ValidationAndJson) {
  SplState s = active(42);
  s.last_lambda = 0.25;
  EXPECT_EQ(SplState::from_json(s.to_json()), s);
  s.m = 0.5;
  EXPECT_THROW(s.validate(), ConfigError);
  s.m = 4.0;
  s.r = 0.0;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Report, HistogramAndJson) {
  BatchReport r;
  r.losses = {1, 2, 3, 4};
  r.weights = {0.0, 0.05, 0.95, 1.0};
  const auto h = r.weight_histogram();
  EXPECT_EQ(h[0], 2);
  EXPECT_EQ(h[9], 2);
  const auto j = r.to_json();
  EXPECT_EQ(j.at("type"), "step");
  EXPECT_TRUE(j.at("lambda").is_null());
  EXPECT_EQ(j.at("weight_histogram").size(), 10u);
}

}  // namespace
}  // namespace spad
