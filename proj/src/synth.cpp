#include "spad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

namespace spad {

namespace fs = std::filesystem;

void SynthOptions::validate() const {
  if (n_bonafide < 2) throw ConfigError("synth: at least 2 bona fide images are required");
  if (n_attacks < 0) throw ConfigError("synth: attack count must be >= 0");
  if (side < 8) throw ConfigError("synth: side must be >= 8");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("synth: test_fraction must be in [0,1)");
  if (!(alpha_min > 0.0 && alpha_min <= alpha_max && alpha_max < 1.0))
    throw ConfigError("synth: alpha range must satisfy 0 < min <= max < 1");
  if (alpha_override && !(*alpha_override > 0.0 && *alpha_override < 1.0))
    throw ConfigError("synth: alpha override must be in (0,1)");
  if (out_dir.empty()) throw ConfigError("synth: output directory is required");
}

namespace {

std::mt19937_64 item_rng(std::uint64_t seed, std::uint32_t stream, std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream, index};
  return std::mt19937_64(seq);
}

std::string numbered(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05d", prefix, i);
  return buf;
}

}  // namespace

Rgb8Image render_bonafide(std::mt19937_64& rng, int side) {
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto integer = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  std::vector<cv::Scalar> palette;
  for (int i = 0; i < 6; ++i) palette.emplace_back(integer(0, 255), integer(0, 255), integer(0, 255));
  auto color = [&] { return palette[static_cast<std::size_t>(integer(1, 5))]; };

  cv::Mat canvas(side, side, CV_8UC3, palette[0]);
  const double s = side;

  const int polygons = integer(3, 6);
  for (int p = 0; p < polygons; ++p) {
    const int vertices = integer(3, 6);
    const double cx = uniform(0, s), cy = uniform(0, s), radius = uniform(0.1 * s, 0.35 * s);
    std::vector<cv::Point> pts;
    for (int v = 0; v < vertices; ++v) {
      const double angle = 2.0 * M_PI * (v + uniform(-0.3, 0.3)) / vertices;
      const double rr = radius * uniform(0.5, 1.0);
      pts.emplace_back(static_cast<int>(cx + rr * std::cos(angle)), static_cast<int>(cy + rr * std::sin(angle)));
    }
    cv::fillPoly(canvas, std::vector<std::vector<cv::Point>>{pts}, color(), cv::LINE_8);
  }

  const int patches = integer(1, 2);
  for (int p = 0; p < patches; ++p) {
    const int w = integer(side / 6, side / 3), h = integer(side / 6, side / 3);
    const int x0 = integer(0, side - w), y0 = integer(0, side - h);
    const double period = uniform(2.0, 6.0), theta = uniform(0.0, M_PI);
    const double fx = std::cos(theta) * 2.0 * M_PI / period, fy = std::sin(theta) * 2.0 * M_PI / period;
    const cv::Scalar a = color(), b = color();
    for (int y = y0; y < y0 + h; ++y) {
      for (int x = x0; x < x0 + w; ++x) {
        const cv::Scalar& c = std::sin(fx * x + fy * y) > 0 ? a : b;
        canvas.at<cv::Vec3b>(y, x) = cv::Vec3b(static_cast<uchar>(c[0]), static_cast<uchar>(c[1]), static_cast<uchar>(c[2]));
      }
    }
  }

  const int lines = integer(2, 5);
  for (int l = 0; l < lines; ++l) {
    cv::Point a(integer(0, side - 1), integer(0, side - 1)), b(integer(0, side - 1), integer(0, side - 1));
    cv::line(canvas, a, b, color(), integer(1, 2), cv::LINE_8);
  }

  Rgb8Image out;
  out.height = side;
  out.width = side;
  out.pixels.assign(canvas.data, canvas.data + static_cast<std::size_t>(side) * side * 3);
  return out;
}

std::vector<double> blend(const Rgb8Image& a, const Rgb8Image& b, double alpha) {
  if (a.height != b.height || a.width != b.width) throw ShapeError("blend: image sizes differ");
  std::vector<double> out(a.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = alpha * static_cast<double>(a.pixels[i]) + (1.0 - alpha) * static_cast<double>(b.pixels[i]);
  return out;
}

Rgb8Image quantize(const std::vector<double>& values, int height, int width, bool smooth) {
  std::vector<double> v = values;
  if (smooth) {
    cv::Mat m(height, width, CV_64FC3, v.data());
    cv::Mat blurred;
    cv::GaussianBlur(m, blurred, cv::Size(3, 3), 0.6, 0.6, cv::BORDER_REFLECT_101);
    std::memcpy(v.data(), blurred.ptr<double>(), v.size() * sizeof(double));
  }
  Rgb8Image out;
  out.height = height;
  out.width = width;
  out.pixels.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::floor(v[i] + 0.5), 0.0, 255.0));
  return out;
}

double mean_gradient_magnitude(const Rgb8Image& image) {
  double acc = 0.0;
  std::size_t count = 0;
  for (int y = 0; y + 1 < image.height; ++y) {
    for (int x = 0; x + 1 < image.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double gx = static_cast<double>(image.at(y, x + 1, c)) - image.at(y, x, c);
        const double gy = static_cast<double>(image.at(y + 1, x, c)) - image.at(y, x, c);
        acc += std::sqrt(gx * gx + gy * gy);
        ++count;
      }
    }
  }
  return count ? acc / static_cast<double>(count) : 0.0;
}

SynthResult synth_generate(const SynthOptions& opt) {
  opt.validate();
  const fs::path image_dir = opt.out_dir / "images";
  std::error_code ec;
  fs::create_directories(image_dir, ec);
  if (ec) throw DataError("output directory not writable: " + opt.out_dir.string() + " (" + ec.message() + ")");
  {
    std::ofstream probe(opt.out_dir / ".write_probe");
    if (!probe) throw DataError("output directory not writable: " + opt.out_dir.string());
  }
  fs::remove(opt.out_dir / ".write_probe");

  const int n_test_bf = static_cast<int>(std::floor(opt.n_bonafide * opt.test_fraction));
  const int n_train_bf = opt.n_bonafide - n_test_bf;
  const int n_test_att = static_cast<int>(std::floor(opt.n_attacks * opt.test_fraction));

  SynthResult result;
  std::vector<Rgb8Image> bonafide;
  bonafide.reserve(opt.n_bonafide);
  for (int i = 0; i < opt.n_bonafide; ++i) {
    auto rng = item_rng(opt.seed, 1, static_cast<std::uint32_t>(i));
    bonafide.push_back(render_bonafide(rng, opt.side));
    const std::string id = numbered("bf", i);
    const fs::path file = image_dir / (id + ".png");
    write_png(bonafide.back(), file);
    const bool test = i >= n_train_bf;
    SampleRecord r{id, file, std::nullopt, "synth-bonafide"};
    if (test) {
      r.eval_label = EvalLabel::bona_fide;
      result.test.records.push_back(r);
    } else {
      result.train.records.push_back(r);
    }
  }

  for (int k = 0; k < opt.n_attacks; ++k) {
    const bool test = k >= opt.n_attacks - n_test_att;
    // Sources come from the same split as the attack when that split has two images.
    int lo = 0, hi = opt.n_bonafide;
    if (test && n_test_bf >= 2) lo = n_train_bf;
    if (!test && n_train_bf >= 2) hi = n_train_bf;
    auto rng = item_rng(opt.seed, 2, static_cast<std::uint32_t>(k));
    std::uniform_int_distribution<int> pick(lo, hi - 1);
    const int a = pick(rng);
    int b = pick(rng);
    while (b == a) b = pick(rng);
    const double alpha =
        opt.alpha_override ? *opt.alpha_override : std::uniform_real_distribution<double>(opt.alpha_min, opt.alpha_max)(rng);
    const Rgb8Image image = quantize(blend(bonafide[a], bonafide[b], alpha), opt.side, opt.side, opt.smooth_attacks);
    const std::string id = numbered("atk", k);
    const fs::path file = image_dir / (id + ".png");
    write_png(image, file);
    result.attacks.push_back({id, numbered("bf", a), numbered("bf", b), alpha});
    SampleRecord r{id, file, std::nullopt, "synth-morph"};
    if (test) {
      r.eval_label = EvalLabel::attack;
      result.test.records.push_back(r);
    } else {
      result.contaminant.records.push_back(r);
    }
  }

  save_manifest(result.train, opt.out_dir / "train.csv");
  save_manifest(result.contaminant, opt.out_dir / "contaminant.csv");
  save_manifest(result.test, opt.out_dir / "test.csv");

  nlohmann::json attacks = nlohmann::json::array();
  for (const auto& a : result.attacks)
    attacks.push_back({{"id", a.id}, {"source_a", a.source_a}, {"source_b", a.source_b}, {"alpha", a.alpha}});
  nlohmann::json provenance = {
      {"command", "synth"},
      {"seed", opt.seed},
      {"side", opt.side},
      {"counts",
       {{"bonafide", opt.n_bonafide},
        {"attacks", opt.n_attacks},
        {"train_bonafide", n_train_bf},
        {"test_bonafide", n_test_bf},
        {"contaminant_attacks", opt.n_attacks - n_test_att},
        {"test_attacks", n_test_att}}},
      {"test_fraction", opt.test_fraction},
      {"alpha_range", {opt.alpha_min, opt.alpha_max}},
      {"alpha_override", opt.alpha_override ? nlohmann::json(*opt.alpha_override) : nlohmann::json(nullptr)},
      {"smooth_attacks", opt.smooth_attacks},
      {"attacks_detail", attacks}};
  std::ofstream(opt.out_dir / "provenance.json") << provenance.dump(2) << '\n';
  return result;
}

}  // namespace spad
