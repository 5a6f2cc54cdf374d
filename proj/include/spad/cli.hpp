#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "spad/data.hpp"
#include "spad/run_config.hpp"

namespace spad {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitDivergence = 2;
inline constexpr int kExitConfig = 3;

/// Training input assembled from a run config: primary manifest, optional
/// contamination, then label stripping. Only `unlabeled` and `data` reach
/// the trainer.
struct PreparedTraining {
  std::size_t n_primary = 0;
  std::size_t n_contaminant = 0;
  std::size_t labels_stripped = 0;  // records that carried a label before stripping
  UnlabeledManifest unlabeled;
  TrainingSet data;
};

PreparedTraining prepare_training(const RunConfig& config);

/// Entry point of the `spad` binary. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spad
