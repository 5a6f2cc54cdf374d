#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <map>

#include "spad/errors.hpp"
#include "spad/synth.hpp"
#include "test_util.hpp"

namespace spad {
namespace {

using testing::TempDir;

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Central-difference gradient magnitude on the interior, averaged over channels.
double gradient_oracle(const Rgb8Image& img) {
  double total = 0.0;
  int n = 0;
  for (int y = 1; y + 1 < img.height; ++y)
    for (int x = 1; x + 1 < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double gx = (img.at(y, x + 1, c) - img.at(y, x - 1, c)) / 2.0;
        const double gy = (img.at(y + 1, x, c) - img.at(y - 1, x, c)) / 2.0;
        total += std::hypot(gx, gy);
        ++n;
      }
  return total / n;
}

TEST(Synth, HalfBlendIsExactAverage) {
  TempDir dir;
  SynthOptions o;
  o.n_bonafide = 2;
  o.n_attacks = 1;
  o.alpha_override = 0.5;
  o.out_dir = dir.path();
  const auto r = synth_generate(o);
  ASSERT_EQ(r.attacks.size(), 1u);
  const auto a = decode_image(dir / ("images/" + r.attacks[0].source_a + ".png"));
  const auto b = decode_image(dir / ("images/" + r.attacks[0].source_b + ".png"));
  const auto blended = blend(a, b, 0.5);
  const auto attack = decode_image(dir / ("images/" + r.attacks[0].id + ".png"));
  for (std::size_t i = 0; i < blended.size(); ++i) {
    ASSERT_EQ(blended[i], (a.pixels[i] + b.pixels[i]) / 2.0);
    ASSERT_EQ(attack.pixels[i], static_cast<std::uint8_t>(std::floor(blended[i] + 0.5)));
  }
}

TEST(Synth, NeverPairsAnImageWithItself) {
  TempDir dir;
  SynthOptions o;
  o.n_bonafide = 3;
  o.n_attacks = 300;
  o.out_dir = dir.path();
  o.side = 16;
  for (const auto& a : synth_generate(o).attacks) {
    EXPECT_NE(a.source_a, a.source_b);
    EXPECT_GE(a.alpha, 0.3);
    EXPECT_LE(a.alpha, 0.7);
  }
}

TEST(Synth, BlendingAttenuatesEdges) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> alpha(0.3, 0.7);
  double attacks = 0.0, sources = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto a = render_bonafide(rng, 64);
    const auto b = render_bonafide(rng, 64);
    const double w = alpha(rng);
    const auto m = quantize(blend(a, b, w), 64, 64, false);
    attacks += gradient_oracle(m);
    sources += (gradient_oracle(a) + gradient_oracle(b)) / 2.0;
    // Triangle inequality per triple, up to rounding to bytes.
    EXPECT_LE(mean_gradient_magnitude(m), w * mean_gradient_magnitude(a) + (1 - w) * mean_gradient_magnitude(b) + 1.0);
  }
  EXPECT_LT(attacks, sources);
}

TEST(Synth, SplitsAndCounts) {
  TempDir dir;
  SynthOptions o;
  o.out_dir = dir.path();
  o.side = 16;
  const auto r = synth_generate(o);
  EXPECT_EQ(r.train.records.size(), 350u);
  EXPECT_EQ(r.contaminant.records.size(), 175u);
  EXPECT_EQ(r.test.records.size(), 150u + 75u);
  std::size_t images = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "images")) images += e.is_regular_file();
  EXPECT_EQ(images, 750u);
  for (const auto& rec : r.train.records) EXPECT_FALSE(rec.eval_label.has_value());
  for (const auto& rec : r.contaminant.records) EXPECT_FALSE(rec.eval_label.has_value());
  for (const auto& rec : r.test.records) EXPECT_TRUE(rec.eval_label.has_value());
  EXPECT_EQ(load_manifest(dir / "test.csv"), r.test);

  // Test attacks come from held-out bona fides, contaminants from training ones.
  std::map<std::string, bool> in_train;
  for (const auto& rec : r.train.records) in_train[rec.id] = true;
  for (std::size_t k = 0; k < r.attacks.size(); ++k) {
    const bool test = k >= 175;
    EXPECT_EQ(in_train.count(r.attacks[k].source_a) == 1, !test);
    EXPECT_EQ(in_train.count(r.attacks[k].source_b) == 1, !test);
  }
}

TEST(Synth, SameSeedSameBytes) {
  TempDir a, b;
  SynthOptions o;
  o.n_bonafide = 20;
  o.n_attacks = 10;
  o.seed = 7;
  o.out_dir = a.path();
  synth_generate(o);
  o.out_dir = b.path();
  synth_generate(o);
  for (const auto& e : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a.path());
    EXPECT_EQ(read_all(e.path()), read_all(b.path() / rel)) << rel;
  }
}

TEST(Synth, GuardsArguments) {
  TempDir dir;
  SynthOptions o;
  o.out_dir = dir.path();
  o.n_bonafide = 1;
  o.n_attacks = 1;
  EXPECT_THROW(synth_generate(o), ConfigError);
  o.n_bonafide = 10;
  o.alpha_min = 0.8;
  EXPECT_THROW(synth_generate(o), ConfigError);
}

}  // namespace
}  // namespace spad
