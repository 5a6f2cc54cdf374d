#include "spad/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "spad/checkpoint.hpp"
#include "spad/errors.hpp"
#include "spad/eval.hpp"
#include "spad/parallel.hpp"
#include "spad/plot.hpp"
#include "spad/synth.hpp"
#include "spad/trainer.hpp"

namespace spad {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flag values that override the config file when given.
struct Overrides {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;

  std::optional<int> bonafide, attacks, side;
  std::optional<double> test_fraction, alpha_min, alpha_max, alpha;
  bool smooth = false;

  std::optional<std::string> train_manifest, contaminant_manifest, contamination_ratio, test_manifest;
  std::optional<int> input_side;
  std::vector<int> widths;
  std::optional<std::int64_t> epochs, warmup_epochs, batch_size;
  std::optional<double> lr, lr_gamma, momentum, weight_decay, m, r;
  bool no_spl = false;
  bool running_statistics = false;
  std::optional<std::string> resume;

  std::optional<std::string> checkpoint, eval_epochs;
  bool plots = false;

  std::optional<std::string> report;
};

double parse_ratio_flag(const std::string& text) {
  if (text == "off" || text == "inf") return kNoContamination;
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("--contamination-ratio: expected a positive number or \"off\", got \"" + text + "\"");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config ? RunConfig::load(*o.config) : RunConfig{};
  if (o.seed) c.train.seed = *o.seed;
  c.synth.seed = c.train.seed;
  if (o.out) c.out_dir = *o.out;

  if (o.bonafide) c.synth.n_bonafide = *o.bonafide;
  if (o.attacks) c.synth.n_attacks = *o.attacks;
  if (o.side) c.synth.side = *o.side;
  if (o.test_fraction) c.synth.test_fraction = *o.test_fraction;
  if (o.alpha_min) c.synth.alpha_min = *o.alpha_min;
  if (o.alpha_max) c.synth.alpha_max = *o.alpha_max;
  if (o.alpha) c.synth.alpha_override = *o.alpha;
  if (o.smooth) c.synth.smooth_attacks = true;
  c.synth.out_dir = c.out_dir;

  if (o.train_manifest) c.train_manifest = fs::path(*o.train_manifest);
  if (o.contaminant_manifest) c.contaminant_manifest = fs::path(*o.contaminant_manifest);
  if (o.contamination_ratio) c.contamination_ratio = parse_ratio_flag(*o.contamination_ratio);
  if (o.test_manifest) c.test_manifest = fs::path(*o.test_manifest);
  if (o.input_side) c.input_side = *o.input_side;
  if (!o.widths.empty()) c.widths = o.widths;
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.warmup_epochs) c.train.warmup_epochs = *o.warmup_epochs;
  if (o.batch_size) c.train.batch_size = *o.batch_size;
  if (o.lr) c.train.learning_rate = *o.lr;
  if (o.lr_gamma) c.train.lr_gamma = *o.lr_gamma;
  if (o.momentum) c.train.momentum = *o.momentum;
  if (o.weight_decay) c.train.weight_decay = *o.weight_decay;
  if (o.m) c.train.m = *o.m;
  if (o.r) c.train.r = *o.r;
  if (o.no_spl) c.train.spl_enabled = false;
  if (o.running_statistics) c.train.running_statistics = true;

  if (o.checkpoint) c.eval_checkpoint = fs::path(*o.checkpoint);
  if (o.eval_epochs) c.eval_epochs = *o.eval_epochs;
  if (o.plots) c.eval_plots = true;
  c.validate_common();
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string epoch_file(std::int64_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%03lld.ckpt", static_cast<long long>(epoch));
  return buf;
}

std::vector<fs::path> list_checkpoints(const fs::path& dir) {
  std::vector<fs::path> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("epoch_") && name.ends_with(".ckpt")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

json config_json(const RunConfig& c) {
  auto opt_path = [](const std::optional<fs::path>& p) {
    return p ? json(fs::absolute(*p).lexically_normal().string()) : json(nullptr);
  };
  return {{"train_manifest", opt_path(c.train_manifest)},
          {"contaminant_manifest", opt_path(c.contaminant_manifest)},
          {"contamination_ratio", std::isinf(c.contamination_ratio) ? json("off") : json(c.contamination_ratio)},
          {"test_manifest", opt_path(c.test_manifest)},
          {"input_side", c.input_side},
          {"architecture", c.architecture().to_json()},
          {"train", c.train.to_json()},
          {"out_dir", fs::absolute(c.out_dir).lexically_normal().string()}};
}

// ---------------------------------------------------------------------------

int cmd_synth(const RunConfig& c, std::ostream& out) {
  const SynthResult r = synth_generate(c.synth);
  out << "wrote " << r.train.records.size() << " training, " << r.contaminant.records.size() << " contaminant and "
      << r.test.records.size() << " test samples to " << c.out_dir.string() << '\n';
  return kExitOk;
}

// Drops log lines the checkpoint does not cover, so a resumed run appends
// exactly what an uninterrupted run would have written.
void trim_log(const fs::path& log_path, const Checkpoint& ck) {
  std::ifstream in(log_path);
  if (!in) return;
  std::string kept, line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) continue;
    const bool keep = j.value("type", "") == "step" ? j.value("global_step", std::int64_t{0}) < ck.global_step
                                                    : j.value("epoch", std::int64_t{0}) <= ck.epoch;
    if (keep) kept += line + "\n";
  }
  in.close();
  write_text(log_path, kept);
}

int cmd_train(const RunConfig& c, const Overrides& o, std::ostream& out, std::ostream& err) {
  c.validate_for_train();
  std::optional<Checkpoint> start;
  if (o.resume) {
    start = load_checkpoint(*o.resume);
    if (!(start->architecture.to_json() == c.architecture().to_json()))
      throw ConfigError("--resume: checkpoint architecture differs from the configured model");
  }

  fs::create_directories(c.out_dir / "checkpoints");
  write_text(c.out_dir / "config.toml", c.to_toml());

  PreparedTraining prep = prepare_training(c);
  err << "training on " << prep.data.size() << " samples (" << prep.n_primary << " primary, " << prep.n_contaminant
      << " contaminant), " << worker_count() << " threads\n";

  Manifest stripped;
  for (const auto& r : prep.unlabeled.records) stripped.records.push_back({r.id, r.path, std::nullopt, r.source_tag});
  save_manifest(stripped, c.out_dir / "train_manifest.csv");

  json provenance{{"command", "train"},
                  {"seed", c.train.seed},
                  {"config", config_json(c)},
                  {"n_primary", prep.n_primary},
                  {"n_contaminant", prep.n_contaminant},
                  {"n_train", prep.data.size()},
                  {"labels_stripped", prep.labels_stripped},
                  {"resumed_from", o.resume ? json(fs::absolute(*o.resume).string()) : json(nullptr)}};
  write_json(c.out_dir / "provenance.json", provenance);

  const fs::path log_path = c.out_dir / "train_log.jsonl";
  if (start)
    trim_log(log_path, *start);
  else
    write_text(log_path, "");
  std::ofstream log(log_path, std::ios::app);
  if (!log) throw DataError("cannot write " + log_path.string());

  FitHooks hooks;
  hooks.on_step = [&](const BatchReport& r) { log << r.to_json().dump() << '\n'; };
  hooks.on_epoch = [&](const EpochSummary& s) {
    log << s.to_json().dump() << '\n';
    log.flush();
    err << "epoch " << s.epoch << "/" << c.train.epochs << "  loss " << s.mean_loss << "  objective "
        << s.mean_objective << "  lr " << s.learning_rate << "  " << s.wall_time_s << " s\n";
  };
  hooks.on_checkpoint = [&](const Checkpoint& ck) {
    save_checkpoint(ck, c.out_dir / "checkpoints" / epoch_file(ck.epoch));
  };

  const FitResult result =
      start ? resume(*start, prep.data, c.train, hooks) : fit(prep.data, c.train, c.architecture(), hooks);
  out << "trained " << result.final_checkpoint.epoch << " epochs, " << result.final_checkpoint.global_step
      << " steps; checkpoints in " << (c.out_dir / "checkpoints").string() << '\n';
  return kExitOk;
}

int cmd_eval(const RunConfig& c, std::ostream& out) {
  c.validate_for_eval();
  const Manifest test = load_manifest(*c.test_manifest);
  require_unique_ids(test);
  std::size_t n_bf = 0, n_at = 0, n_unlabeled = 0;
  for (const auto& r : test.records) {
    if (!r.eval_label)
      ++n_unlabeled;
    else
      (*r.eval_label == EvalLabel::attack ? n_at : n_bf) += 1;
  }
  if (n_unlabeled) throw ConfigError("data.test_manifest: " + std::to_string(n_unlabeled) + " records have no label");
  if (n_bf == 0 || n_at == 0)
    throw ConfigError("data.test_manifest: needs both bona fide and attack samples (got " + std::to_string(n_bf) +
                      " bona fide, " + std::to_string(n_at) + " attack)");

  std::vector<fs::path> checkpoints;
  if (c.eval_checkpoint) {
    checkpoints = c.eval_epochs == "all" ? list_checkpoints(c.eval_checkpoint->parent_path())
                                         : std::vector<fs::path>{*c.eval_checkpoint};
  } else {
    checkpoints = list_checkpoints(c.out_dir / "checkpoints");
    if (c.eval_epochs == "last" && !checkpoints.empty()) checkpoints = {checkpoints.back()};
  }
  if (checkpoints.empty()) throw ConfigError("eval.checkpoint: no checkpoints found under " + c.out_dir.string());

  std::vector<GapRow> gap;
  ScoreSet final_scores;
  for (const auto& path : checkpoints) {
    const Checkpoint ck = load_checkpoint(path);
    const ScoringResult scored = score(ck.model(), test);
    gap.push_back(gap_row(scored.scores, ck.epoch));
    final_scores = scored.scores;
  }
  const EvalReport report = build_report(final_scores, gap);

  write_scores(final_scores, c.out_dir / "scores.csv");
  write_json(c.out_dir / "eval_report.json", report.to_json());
  json checkpoint_list = json::array();
  for (const auto& p : checkpoints) checkpoint_list.push_back(fs::absolute(p).lexically_normal().string());
  write_json(c.out_dir / "eval_provenance.json",
             {{"command", "eval"},
              {"test_manifest", fs::absolute(*c.test_manifest).lexically_normal().string()},
              {"checkpoints", checkpoint_list},
              {"epochs", c.eval_epochs}});
  if (c.eval_plots) {
    plot_roc(report.roc, c.out_dir / "roc.png");
    plot_gap_curve(report.gap_curve, c.out_dir / "gap_curve.png");
  }
  out << "EER " << report.eer * 100.0 << "%  AUC " << report.auc << "  threshold " << report.eer_threshold << "  ("
      << report.n_bonafide << " bona fide, " << report.n_attack << " attack)\n";
  return kExitOk;
}

int cmd_report(const RunConfig& c, const Overrides& o, std::ostream& out) {
  const fs::path path = o.report ? fs::path(*o.report) : c.out_dir / "eval_report.json";
  std::ifstream in(path);
  if (!in) throw ConfigError("--report: cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  const EvalReport report = EvalReport::from_json(j);
  const fs::path dir = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  plot_roc(report.roc, dir / "roc.png");
  plot_gap_curve(report.gap_curve, dir / "gap_curve.png");

  out << "polarity: " << report.polarity << '\n';
  out << "samples:  " << report.n_bonafide << " bona fide, " << report.n_attack << " attack\n";
  out << "EER:      " << report.eer * 100.0 << "% at threshold " << report.eer_threshold << '\n';
  out << "AUC:      " << report.auc << '\n';
  for (const auto& p : report.bpcer_at_apcer)
    out << "BPCER @ APCER " << p.target * 100.0 << "%: " << p.value * 100.0 << "%\n";
  out << "epoch  bonafide_mse  attack_mse  gap\n";
  for (const auto& g : report.gap_curve)
    out << g.epoch << "  " << g.bonafide_mean << "  " << g.attack_mean << "  " << g.gap << '\n';
  out << "plots: " << (dir / "roc.png").string() << ", " << (dir / "gap_curve.png").string() << '\n';
  return kExitOk;
}

}  // namespace

PreparedTraining prepare_training(const RunConfig& config) {
  config.validate_for_train();
  PreparedTraining prep;
  Manifest mixed = load_manifest(*config.train_manifest);
  require_unique_ids(mixed);
  prep.n_primary = mixed.records.size();
  if (!std::isinf(config.contamination_ratio)) {
    const Manifest contaminant = load_manifest(*config.contaminant_manifest);
    mixed = mix_datasets(mixed, contaminant, config.contamination_ratio, config.train.seed);
    prep.n_contaminant = mixed.records.size() - prep.n_primary;
  }
  prep.labels_stripped = static_cast<std::size_t>(std::count_if(
      mixed.records.begin(), mixed.records.end(), [](const SampleRecord& r) { return r.eval_label.has_value(); }));
  prep.unlabeled = strip_labels(mixed);
  prep.data = load_training_set(prep.unlabeled, config.input_side);
  return prep;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-paced convolutional autoencoder toolkit for unsupervised morphing attack detection", "spad"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);  // later flags win
  app.require_subcommand(1, 1);
  Overrides o;
  // Global flags are accepted before or after the subcommand and show up in every --help.
  auto add_globals = [&o](CLI::App* a) {
    a->add_option("--config", o.config, "TOML run config");
    a->add_option("--seed", o.seed, "Seed for data synthesis, initialization and data order");
    a->add_option("--out", o.out, "Output directory for this experiment");
  };
  add_globals(&app);

  auto* synth = app.add_subcommand("synth", "Render the toy bona fide / blend-attack dataset");
  synth->add_option("--bonafide", o.bonafide, "Number of bona fide images");
  synth->add_option("--attacks", o.attacks, "Number of blend attacks");
  synth->add_option("--side", o.side, "Image side in pixels");
  synth->add_option("--test-fraction", o.test_fraction, "Share of samples held out for testing");
  synth->add_option("--alpha-min", o.alpha_min, "Smallest blend factor");
  synth->add_option("--alpha-max", o.alpha_max, "Largest blend factor");
  synth->add_option("--alpha", o.alpha, "Fixed blend factor for every attack");
  synth->add_flag("--smooth", o.smooth, "Smooth attacks after blending");

  auto* train = app.add_subcommand("train", "Train the autoencoder on unlabeled data");
  train->add_option("--train-manifest", o.train_manifest, "Primary training manifest (CSV)");
  train->add_option("--contaminant-manifest", o.contaminant_manifest, "Manifest to draw contamination from");
  train->add_option("--contamination-ratio", o.contamination_ratio,
                    "Primary:contaminant ratio, e.g. 35, or \"off\" (default)");
  train->add_option("--input-side", o.input_side, "Network input side in pixels");
  train->add_option("--widths", o.widths, "Encoder block widths, e.g. 32,64,128,256,256,128,64")->delimiter(',');
  train->add_option("--epochs", o.epochs, "Training epochs");
  train->add_option("--warmup-epochs", o.warmup_epochs, "Epochs with all sample weights 1");
  train->add_option("--batch-size", o.batch_size, "Mini-batch size");
  train->add_option("--lr", o.lr, "Initial learning rate");
  train->add_option("--lr-gamma", o.lr_gamma, "Per-epoch learning-rate decay");
  train->add_option("--momentum", o.momentum, "SGD momentum");
  train->add_option("--weight-decay", o.weight_decay, "L2 weight decay");
  train->add_option("--m", o.m, "Initial threshold coefficient");
  train->add_option("--r", o.r, "Coefficient decrease per self-paced step");
  train->add_flag("--no-spl", o.no_spl, "Baseline: keep every sample weight at 1");
  train->add_flag("--running-statistics", o.running_statistics, "Use running mean/std for the threshold");
  train->add_option("--resume", o.resume, "Continue from this checkpoint");

  auto* eval = app.add_subcommand("eval", "Score a labeled test manifest and compute metrics");
  eval->add_option("--test-manifest", o.test_manifest, "Labeled test manifest (CSV)");
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint to evaluate (default: latest under --out)");
  eval->add_option("--epochs", o.eval_epochs, "Gap curve over the \"last\" or \"all\" checkpoints")
      ->check(CLI::IsMember({"last", "all"}));
  eval->add_flag("--plots", o.plots, "Also write roc.png and gap_curve.png");

  auto* report = app.add_subcommand("report", "Render plots and a summary from eval_report.json");
  report->add_option("--report", o.report, "Report file (default: <out>/eval_report.json)");

  for (auto* sub : {synth, train, eval, report}) add_globals(sub);

  std::vector<std::string> reversed(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const RunConfig config = resolve(o);
    if (synth->parsed()) return cmd_synth(config, out);
    if (train->parsed()) return cmd_train(config, o, out, err);
    if (eval->parsed()) return cmd_eval(config, out);
    return cmd_report(config, o, out);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace spad
