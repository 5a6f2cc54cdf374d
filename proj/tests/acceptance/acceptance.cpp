// Acceptance gate: prints one PASS/FAIL line per criterion and exits nonzero
// if any fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "spad/cli.hpp"
#include "spad/data.hpp"
#include "spad/eval.hpp"
#include "spad/model.hpp"
#include "spad/run_config.hpp"
#include "spad/spl.hpp"
#include "spad/synth.hpp"
#include "spad/trainer.hpp"
#include "../test_util.hpp"

namespace spad {
namespace {

using testing::TempDir;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- 1

// Literal reading of the weight rule, except that L = lambda = 0 keeps weight 1.
double weight_oracle(double loss, double lambda) {
  if (lambda == 0.0 && loss == 0.0) return 1.0;
  if (loss <= lambda) return 0.0;
  return std::clamp(1.0 - lambda / loss, 0.0, 1.0);
}

Outcome weight_rule() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::uniform_int_distribution<int> kind(0, 5);
  std::vector<double> losses, lambdas;
  for (int i = 0; i < 10000; ++i) {
    const double loss = kind(rng) == 0 ? 0.0 : u(rng);
    double lambda = 0.0;
    switch (kind(rng)) {
      case 0: lambda = -u(rng); break;
      case 1: lambda = 0.0; break;
      case 2: lambda = loss; break;
      case 3: lambda = loss * 0.5 * u(rng); break;
      default: lambda = u(rng); break;
    }
    losses.push_back(loss);
    lambdas.push_back(lambda);
  }
  int mismatches = 0;
  std::set<std::string> cases;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const double got = compute_weights(std::span<const double>(&losses[i], 1), lambdas[i])[0];
    if (got != weight_oracle(losses[i], lambdas[i])) ++mismatches;
    cases.insert(lambdas[i] < 0 ? "neg" : lambdas[i] == 0 ? "zero" : losses[i] == lambdas[i] ? "equal"
                                                                    : losses[i] < lambdas[i] ? "below" : "above");
  }
  // Monotone: non-decreasing in L for fixed lambda, non-increasing in lambda for fixed L.
  int violations = 0;
  for (int t = 0; t < 200; ++t) {
    std::vector<double> grid(100);
    for (auto& v : grid) v = u(rng);
    std::sort(grid.begin(), grid.end());
    const double lambda = u(rng) - 0.5;
    const auto w = compute_weights(grid, lambda);
    for (std::size_t i = 1; i < w.size(); ++i) violations += w[i] < w[i - 1];
    const double loss = u(rng);
    double prev = 2.0;
    for (double lam : grid) {
      const double v = compute_weights(std::span<const double>(&loss, 1), lam - 0.5)[0];
      violations += v > prev;
      prev = v;
    }
  }
  return {mismatches == 0 && violations == 0 && cases.size() == 5,
          fmt("10000 pairs, %d mismatches, %d monotonicity violations, %zu/5 case kinds", mismatches, violations,
              cases.size())};
}

// ---------------------------------------------------------------- 2

Outcome lambda_schedule() {
  const double l0 = compute_lambda(10, 2, 0, 4, 5e-3);
  const double l600 = compute_lambda(10, 2, 600, 4, 5e-3);
  const double l1000 = compute_lambda(10, 2, 1000, 4, 5e-3);
  bool monotone = true;
  double prev = -1e300;
  for (std::int64_t s = 0; s <= 2000; ++s) {
    const double l = compute_lambda(10, 2, s, 4, 5e-3);
    monotone = monotone && l >= prev;
    prev = l;
  }
  return {l0 == 2.0 && l600 == 8.0 && l1000 == 8.0 && monotone,
          fmt("lambda(0)=%g lambda(600)=%g lambda(1000)=%g, monotone over 0..2000: %s", l0, l600, l1000,
              monotone ? "yes" : "no")};
}

// ---------------------------------------------------------------- 3

// Each score value occurs at most twice, so ties (within and across classes) are common but bounded.
ScoreSet random_tied_set(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(5, 500);
  const int nb = size(rng), na = size(rng);
  std::vector<double> values;
  std::bernoulli_distribution twice(0.4);
  std::normal_distribution<double> shift(0.0, 20.0);
  int next = static_cast<int>(shift(rng));
  while (static_cast<int>(values.size()) < na + nb) {
    next += 1 + static_cast<int>(rng() % 3);
    values.push_back(next / 8.0);
    if (twice(rng)) values.push_back(next / 8.0);
  }
  values.resize(na + nb);
  // Bona fides lean towards the upper values so sets are partly separable.
  std::vector<int> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> key(values.size());
  std::normal_distribution<double> noise(0.0, 1.0);
  const double sep = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
  for (std::size_t i = 0; i < key.size(); ++i) key[i] = sep * static_cast<double>(i) / key.size() + noise(rng);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return key[a] > key[b]; });
  ScoreSet s;
  for (int k = 0; k < na + nb; ++k)
    s.entries.push_back({"s" + std::to_string(k), values[idx[k]], k < nb ? EvalLabel::bona_fide : EvalLabel::attack});
  std::shuffle(s.entries.begin(), s.entries.end(), rng);
  return s;
}

struct Counts {
  std::int64_t accepted = 0;  // attacks with score >= t
  std::int64_t rejected = 0;  // bona fides with score < t
};

Counts count_at(const ScoreSet& s, double t) {
  Counts c;
  for (const auto& e : s.entries) {
    if (e.label == EvalLabel::attack && e.score >= t) ++c.accepted;
    if (e.label == EvalLabel::bona_fide && e.score < t) ++c.rejected;
  }
  return c;
}

Outcome eer_oracle() {
  std::mt19937_64 rng(303);
  int mismatches = 0, bound_violations = 0;
  const auto start = std::chrono::steady_clock::now();
  for (int t = 0; t < 1000; ++t) {
    const auto s = random_tied_set(rng);
    const std::int64_t na = s.count(EvalLabel::attack), nb = s.count(EvalLabel::bona_fide);
    std::vector<double> thresholds;
    for (const auto& e : s.entries) thresholds.push_back(e.score);
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    thresholds.push_back(std::numeric_limits<double>::infinity());
    Counts best;
    std::int64_t best_diff = -1, best_sum = 0;
    for (double th : thresholds) {
      const auto c = count_at(s, th);
      const std::int64_t diff = std::llabs(c.accepted * nb - c.rejected * na);
      const std::int64_t sum = c.accepted * nb + c.rejected * na;
      if (best_diff < 0 || diff < best_diff || (diff == best_diff && sum < best_sum)) {
        best = c;
        best_diff = diff;
        best_sum = sum;
      }
    }
    const auto got = compute_eer(s);
    const double apcer = static_cast<double>(best.accepted) / na;
    const double bpcer = static_cast<double>(best.rejected) / nb;
    const auto at = count_at(s, got.threshold);
    if (got.apcer != apcer || got.bpcer != bpcer || got.eer != (apcer + bpcer) / 2.0 ||
        at.accepted != best.accepted || at.rejected != best.rejected)
      ++mismatches;
    if (best_diff * std::min(na, nb) > na * nb) ++bound_violations;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {mismatches == 0 && bound_violations == 0 && secs < 30,
          fmt("1000 tied sets, %d mismatches, %d bound violations, %.1f s", mismatches, bound_violations, secs)};
}

// ---------------------------------------------------------------- 4

double pairwise_auc(const ScoreSet& s) {
  double wins = 0.0, pairs = 0.0;
  for (const auto& b : s.entries) {
    if (b.label != EvalLabel::bona_fide) continue;
    for (const auto& a : s.entries) {
      if (a.label != EvalLabel::attack) continue;
      wins += b.score > a.score ? 1.0 : b.score == a.score ? 0.5 : 0.0;
      pairs += 1.0;
    }
  }
  return wins / pairs;
}

Outcome auc_oracle() {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  const auto start = std::chrono::steady_clock::now();
  for (int t = 0; t < 100; ++t) {
    const auto s = random_tied_set(rng);
    worst = std::max(worst, std::abs(roc_auc(roc_points(s)) - pairwise_auc(s)));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst <= 1e-9 && secs < 30, fmt("100 sets, max |AUC - pairwise| = %.3g, %.1f s", worst, secs)};
}

// ---------------------------------------------------------------- 5

Outcome gradient_check() {
  const auto arch = ArchitectureDescriptor::with_widths(8, 1, {4, 6});
  const auto model = ConvAutoencoder<double>::initialized(arch, 55);
  const std::vector<Tensor3<double>> batch{testing::random_image<double>(1, 8, 11),
                                           testing::random_image<double>(1, 8, 12),
                                           testing::random_image<double>(1, 8, 13)};
  const std::vector<double> weights{1.0, 0.6, 0.25};
  auto objective = [&](const ConvAutoencoder<double>& m) {
    std::vector<double> losses;
    for (const auto& x : batch) losses.push_back(per_sample_mse(x, m.reconstruct(x)));
    return weighted_batch_objective(losses, weights);
  };
  const auto start = std::chrono::steady_clock::now();
  const auto g = gradient(model, std::span<const Tensor3<double>>(batch), weights);
  const double h = 1e-5;
  double worst = 0.0;
  std::size_t n = 0;
  auto probe = model;
  for (std::size_t a = 0; a < model.params().size(); ++a)
    for (std::size_t i = 0; i < model.params()[a].values.size(); ++i, ++n) {
      const double orig = probe.params()[a].values[i];
      probe.params()[a].values[i] = orig + h;
      const double up = objective(probe);
      probe.params()[a].values[i] = orig - h;
      const double down = objective(probe);
      probe.params()[a].values[i] = orig;
      const double fd = (up - down) / (2 * h);
      const double an = g.grads[a].values[i];
      worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-7}));
    }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst < 1e-4 && secs < 60,
          fmt("%zu parameters, max relative error %.3g (floor 1e-7), %.1f s", n, worst, secs)};
}

// ---------------------------------------------------------------- 6

Outcome baseline_equivalence() {
  TrainingSet data;
  for (int i = 0; i < 64; ++i)
    data.samples.push_back({"t" + std::to_string(i), testing::random_image<float>(3, 16, 600 + i)});
  TrainConfig config;
  config.learning_rate = 0.05;
  config.batch_size = 8;
  config.epochs = 3;
  config.warmup_epochs = 1;
  config.spl_enabled = false;
  config.seed = 17;
  const auto arch = testing::small_arch();
  const auto result = fit(data, config, arch);

  // Plain reconstruction training written out longhand.
  auto model = ConvAutoencoder<float>::initialized(arch, config.seed);
  auto buffers = model.params().zeros_like();
  std::vector<double> reference;
  for (std::int64_t e = 0; e < config.epochs; ++e) {
    const double lr = config.learning_rate * std::pow(config.lr_gamma, static_cast<double>(e));
    for (const auto& idx : partition_batches(epoch_order(config.seed, e, data.size()), config.batch_size)) {
      std::vector<Tensor3<float>> batch;
      for (std::size_t k : idx) batch.push_back(data.samples[k].image);
      const std::vector<double> ones(batch.size(), 1.0);
      const auto g = gradient(model, std::span<const Tensor3<float>>(batch), ones);
      reference.push_back(g.objective);
      auto& params = model.params();
      for (std::size_t a = 0; a < params.size(); ++a)
        for (std::size_t i = 0; i < params[a].values.size(); ++i) {
          const double p = params[a].values[i];
          const double step = g.grads[a].values[i] + config.weight_decay * p;
          const double buf = config.momentum * buffers[a].values[i] + step;
          buffers[a].values[i] = static_cast<float>(buf);
          params[a].values[i] = static_cast<float>(p - lr * buf);
        }
    }
  }
  double worst = 0.0;
  const bool same_count = reference.size() == result.log.steps.size();
  for (std::size_t i = 0; same_count && i < reference.size(); ++i)
    worst = std::max(worst, std::abs(reference[i] - result.log.steps[i].objective));
  return {same_count && worst <= 1e-6,
          fmt("%zu steps vs %zu reference steps, max objective difference %.3g", result.log.steps.size(),
              reference.size(), worst)};
}

// ---------------------------------------------------------------- 7

struct ArmResult {
  double eer = 0.0;
  double bonafide_mean = 0.0;
  double attack_mean = 0.0;
  double gap = 0.0;
};

RunConfig toy_config(const std::filesystem::path& dir, std::uint64_t seed) {
  RunConfig c;
  c.train_manifest = dir / "train.csv";
  c.contaminant_manifest = dir / "contaminant.csv";
  c.contamination_ratio = 35.0;
  c.input_side = 64;
  c.widths = {16, 32, 64, 64, 64, 32, 16};
  c.train.learning_rate = 0.05;
  c.train.batch_size = 16;
  c.train.epochs = 25;
  c.train.warmup_epochs = 5;
  c.train.m = 4.0;
  c.train.r = 0.01;
  c.train.seed = seed;
  return c;
}

ArmResult run_arm(const RunConfig& c, const TrainingSet& data, const Manifest& test, bool spl) {
  auto train = c.train;
  train.spl_enabled = spl;
  const auto result = fit(data, train, c.architecture());
  const auto scores = score(result.model, test).scores;
  const auto row = gap_row(scores, train.epochs);
  return {compute_eer(scores).eer, row.bonafide_mean, row.attack_mean, row.gap};
}

Outcome toy_morph() {
  // Seed 1 is the recorded run; 2 and 3 repeat the assertion.
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  int held = 0;
  std::string detail;
  const auto start = std::chrono::steady_clock::now();
  for (auto seed : seeds) {
    TempDir dir("acceptance_toy");
    SynthOptions o;
    o.n_bonafide = 500;
    o.n_attacks = 250;
    o.side = 64;
    o.seed = seed;
    o.out_dir = dir.path();
    const auto synth = synth_generate(o);
    const auto c = toy_config(dir.path(), seed);
    const auto prep = prepare_training(c);
    const auto with = run_arm(c, prep.data, synth.test, true);
    const auto without = run_arm(c, prep.data, synth.test, false);
    const bool a = with.attack_mean < with.bonafide_mean && without.attack_mean < without.bonafide_mean;
    const bool b = with.gap >= without.gap;
    const bool cc = with.eer <= without.eer + 0.02 && with.eer < 0.35;
    held += a && b && cc;
    detail += fmt("; seed %llu (n_train=%zu): SPL eer=%.4f gap=%.5f, no-SPL eer=%.4f gap=%.5f [a=%d b=%d c=%d]",
                  static_cast<unsigned long long>(seed), prep.data.size(), with.eer, with.gap, without.eer,
                  without.gap, a, b, cc);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {held >= 2 && secs <= 900, fmt("%d/3 seeds hold, %.0f s", held, secs) + detail};
}

// ---------------------------------------------------------------- 8

std::vector<nlohmann::json> log_without_wall_time(const std::filesystem::path& p) {
  std::vector<nlohmann::json> lines;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    j.erase("wall_time_s");
    lines.push_back(std::move(j));
  }
  return lines;
}

int quiet_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "spad");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

Outcome determinism() {
  TempDir dir("acceptance_det");
  const auto data = dir.path() / "data";
  if (quiet_cli({"synth", "--bonafide", "80", "--attacks", "40", "--side", "32", "--seed", "8", "--out",
                 data.string()}) != 0)
    return {false, "synth failed"};
  std::ofstream(dir / "run.toml") << "[data]\ntrain_manifest = \"data/train.csv\"\n"
                                     "contaminant_manifest = \"data/contaminant.csv\"\ncontamination_ratio = 14\n"
                                     "test_manifest = \"data/test.csv\"\ninput_side = 32\n"
                                     "[model]\nwidths = [8, 16, 16, 16, 16, 16, 8]\n"
                                     "[train]\nlearning_rate = 0.05\nbatch_size = 8\nepochs = 4\nwarmup_epochs = 1\n"
                                     "seed = 8\n[spl]\nr = 0.05\n";
  std::vector<std::vector<nlohmann::json>> logs;
  std::vector<ScoreSet> scores;
  for (const char* run : {"a", "b"}) {
    const auto out = (dir / run).string();
    if (quiet_cli({"--config", (dir / "run.toml").string(), "train", "--out", out}) != 0 ||
        quiet_cli({"--config", (dir / "run.toml").string(), "eval", "--out", out}) != 0)
      return {false, std::string("run ") + run + " failed"};
    logs.push_back(log_without_wall_time(dir / run / "train_log.jsonl"));
    scores.push_back(read_scores(dir / run / "scores.csv"));
  }
  const bool logs_equal = !logs[0].empty() && logs[0] == logs[1];
  bool ids_equal = scores[0].entries.size() == scores[1].entries.size() && !scores[0].entries.empty();
  double worst = 0.0;
  for (std::size_t i = 0; ids_equal && i < scores[0].entries.size(); ++i) {
    ids_equal = scores[0].entries[i].id == scores[1].entries[i].id;
    worst = std::max(worst, std::abs(scores[0].entries[i].score - scores[1].entries[i].score));
  }
  return {logs_equal && ids_equal && worst <= 1e-6,
          fmt("%zu log lines %s, %zu scores, max score difference %.3g", logs[0].size(),
              logs_equal ? "identical" : "differ", scores[0].entries.size(), worst)};
}

// ---------------------------------------------------------------- 9

template <typename T>
concept HasEvalLabel = requires(T t) { t.eval_label; };
template <typename T>
concept HasLabel = requires(T t) { t.label; };

template <typename T>
constexpr bool label_free = !HasEvalLabel<T> && !HasLabel<T>;

static_assert(label_free<UnlabeledRecord>);
static_assert(label_free<TrainingSample>);
static_assert(label_free<TrainingSet>);
static_assert(label_free<BatchReport>);
static_assert(HasEvalLabel<SampleRecord>);  // the probe itself works
static_assert(!std::is_invocable_v<decltype(&load_training_set), const Manifest&, int>);
static_assert(std::is_invocable_v<decltype(&load_training_set), const UnlabeledManifest&, int>);
static_assert(!std::is_convertible_v<Manifest, TrainingSet>);
static_assert(!std::is_convertible_v<Manifest, UnlabeledManifest>);

Outcome label_firewall() {
  // Labeled train and contaminant manifests on purpose: the pipeline must drop the labels before training.
  TempDir dir("acceptance_fw");
  SynthOptions o;
  o.n_bonafide = 40;
  o.n_attacks = 20;
  o.side = 16;
  o.out_dir = dir.path();
  const auto synth = synth_generate(o);
  auto labeled_train = synth.train;
  for (auto& r : labeled_train.records) r.eval_label = EvalLabel::bona_fide;
  auto labeled_cont = synth.contaminant;
  for (auto& r : labeled_cont.records) r.eval_label = EvalLabel::attack;
  save_manifest(labeled_train, dir / "train_l.csv");
  save_manifest(labeled_cont, dir / "cont_l.csv");

  RunConfig c;
  c.train_manifest = dir / "train_l.csv";
  c.contaminant_manifest = dir / "cont_l.csv";
  c.contamination_ratio = 4.0;
  c.input_side = 16;
  c.widths = {4, 8, 8, 8, 8, 8, 4};
  const auto prep = prepare_training(c);
  const bool counted = prep.labels_stripped == prep.unlabeled.records.size() && prep.n_contaminant > 0;
  bool aligned = prep.data.size() == prep.unlabeled.records.size();
  for (std::size_t i = 0; aligned && i < prep.data.size(); ++i)
    aligned = prep.data.samples[i].id == prep.unlabeled.records[i].id;

  // End to end: the manifest the training run records has no labels left.
  const auto out = dir / "run";
  const int code = quiet_cli({"train", "--train-manifest", (dir / "train_l.csv").string(), "--contaminant-manifest",
                              (dir / "cont_l.csv").string(), "--contamination-ratio", "4", "--input-side", "16",
                              "--widths", "4,8,8,8,8,8,4", "--epochs", "2", "--warmup-epochs", "1",
                              "--batch-size", "4", "--lr", "0.05", "--out", out.string()});
  std::size_t labeled_rows = 0, rows = 0;
  if (code == 0)
    for (const auto& r : load_manifest(out / "train_manifest.csv").records) {
      ++rows;
      labeled_rows += r.eval_label.has_value();
    }
  return {counted && aligned && code == 0 && rows > 0 && labeled_rows == 0,
          fmt("static checks ok; %zu labels stripped before training, %zu/%zu recorded rows labeled",
              prep.labels_stripped, labeled_rows, rows)};
}

}  // namespace
}  // namespace spad

int main(int argc, char** argv) {
  using namespace spad;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"SPL weight rule", weight_rule},
      {"lambda schedule", lambda_schedule},
      {"EER vs exhaustive sweep", eer_oracle},
      {"ROC AUC vs pairwise statistic", auc_oracle},
      {"gradient vs finite differences", gradient_check},
      {"baseline fit vs reference loop", baseline_equivalence},
      {"toy morph mechanism", toy_morph},
      {"determinism of train runs", determinism},
      {"label firewall", label_firewall},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[k].first << ": " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
