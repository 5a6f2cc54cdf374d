#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spad/data.hpp"
#include "spad/model.hpp"
#include "spad/synth.hpp"
#include "spad/train_config.hpp"

namespace spad {

/// Everything one CLI invocation needs. File layout (TOML):
///
///   [data]   train_manifest, contaminant_manifest, contamination_ratio, test_manifest, input_side
///   [model]  widths, norm_groups, leaky_slope
///   [train]  learning_rate, momentum, weight_decay, lr_gamma, batch_size, epochs, warmup_epochs, seed
///   [spl]    enabled, m, r, running_statistics, running_momentum
///   [eval]   checkpoint, epochs ("last" or "all"), plots
///   [synth]  bonafide, attacks, side, test_fraction, alpha_min, alpha_max, alpha, smooth
///   [output] out_dir
///
/// contamination_ratio accepts a positive number or "off". Relative paths in
/// a file resolve against the file's directory.
struct RunConfig {
  std::optional<std::filesystem::path> train_manifest;
  std::optional<std::filesystem::path> contaminant_manifest;
  double contamination_ratio = kNoContamination;
  std::optional<std::filesystem::path> test_manifest;
  int input_side = 224;

  std::vector<int> widths;  // empty: the standard seven-block widths
  int norm_groups = 1;
  double leaky_slope = 0.2;

  TrainConfig train;

  std::optional<std::filesystem::path> eval_checkpoint;
  std::string eval_epochs = "last";
  bool eval_plots = false;

  SynthOptions synth;

  std::filesystem::path out_dir = "run";

  /// Throws ConfigError naming the offending key ("section.key").
  static RunConfig parse(const std::string& text, const std::filesystem::path& base_dir = {},
                         const std::string& source = "config");
  static RunConfig load(const std::filesystem::path& path);

  /// Round-trippable TOML snapshot with absolute paths.
  std::string to_toml() const;

  ArchitectureDescriptor architecture() const;

  /// Checks shared fields, then what the command needs (paths set and
  /// readable). Throws ConfigError naming the key.
  void validate_common() const;
  void validate_for_train() const;
  void validate_for_eval() const;
};

}  // namespace spad
