#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "spad/data.hpp"

namespace spad {

struct SynthOptions {
  int n_bonafide = 500;
  int n_attacks = 250;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  int side = 64;
  double test_fraction = 0.3;  // share of bona fides and attacks held out for testing
  double alpha_min = 0.3;
  double alpha_max = 0.7;
  std::optional<double> alpha_override;
  bool smooth_attacks = false;  // light 3x3 Gaussian after blending

  /// Throws ConfigError.
  void validate() const;
};

struct SynthAttack {
  std::string id;
  std::string source_a;
  std::string source_b;
  double alpha = 0.5;
};

/// Manifests written by synth_generate.
///   train:       training-split bona fides, unlabeled
///   contaminant: blends of training-split bona fides, unlabeled
///   test:        held-out bona fides and blends of held-out bona fides, labeled
struct SynthResult {
  Manifest train;
  Manifest contaminant;
  Manifest test;
  std::vector<SynthAttack> attacks;
};

/// Procedural bona fide: random palette, filled polygons, lines and striped
/// patches with hard edges.
Rgb8Image render_bonafide(std::mt19937_64& rng, int side);

/// Pixel-wise alpha * a + (1 - alpha) * b in floating point, on the 0..255 scale.
std::vector<double> blend(const Rgb8Image& a, const Rgb8Image& b, double alpha);

/// Rounds a blend back to bytes, optionally smoothing it first.
Rgb8Image quantize(const std::vector<double>& values, int height, int width, bool smooth);

/// Mean absolute forward-difference gradient magnitude over all channels.
double mean_gradient_magnitude(const Rgb8Image& image);

/// Renders the dataset into out_dir (images/, train.csv, contaminant.csv,
/// test.csv, provenance.json). A pure function of the options.
SynthResult synth_generate(const SynthOptions& options);

}  // namespace spad
