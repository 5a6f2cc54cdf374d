#include "spad/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "spad/parallel.hpp"

namespace spad {

namespace fs = std::filesystem;

std::string to_string(EvalLabel label) { return label == EvalLabel::bona_fide ? "bonafide" : "attack"; }

std::optional<EvalLabel> parse_label(const std::string& text) {
  if (text.empty()) return std::nullopt;
  if (text == "bonafide") return EvalLabel::bona_fide;
  if (text == "attack") return EvalLabel::attack;
  throw DataError("invalid label '" + text + "'; allowed values are {bonafide, attack, \"\"}");
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t row) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell += ch;
    }
  }
  if (quoted) throw DataError("row " + std::to_string(row) + ": unterminated quoted field");
  cells.push_back(std::move(cell));
  return cells;
}

std::string csv_escape(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char ch : value) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

void require_unique_ids(const Manifest& manifest) {
  std::unordered_set<std::string> seen;
  for (const auto& r : manifest.records)
    if (!seen.insert(r.id).second) throw DataError("duplicate sample id '" + r.id + "'");
}

Manifest load_manifest(const fs::path& path, bool check_paths) {
  std::ifstream in(path);
  if (!in) throw DataError("manifest not found or unreadable: " + path.string());
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");

  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (line != "id,path,label,source")
    throw DataError(path.string() + ": header must be exactly 'id,path,label,source', got '" + line + "'");

  Manifest manifest;
  std::unordered_set<std::string> seen;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line, row);
    const std::string where = path.string() + " row " + std::to_string(row);
    if (cells.size() != 4)
      throw DataError(where + ": expected 4 columns, got " + std::to_string(cells.size()));
    SampleRecord r;
    r.id = cells[0];
    if (r.id.empty()) throw DataError(where + ": empty id");
    try {
      r.eval_label = parse_label(cells[2]);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    r.source_tag = cells[3];
    fs::path p(cells[1]);
    r.path = p.is_absolute() ? p : (base / p).lexically_normal();
    if (!seen.insert(r.id).second) throw DataError(where + ": duplicate sample id '" + r.id + "'");
    if (check_paths) {
      std::ifstream probe(r.path, std::ios::binary);
      if (!probe || !fs::is_regular_file(r.path))
        throw DataError(where + ": unreadable image path '" + r.path.string() + "'");
    }
    manifest.records.push_back(std::move(r));
  }
  return manifest;
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  const fs::path base = fs::absolute(path).parent_path();
  out << "id,path,label,source\n";
  for (const auto& r : manifest.records) {
    fs::path p = r.path;
    const fs::path abs = fs::absolute(p).lexically_normal();
    const fs::path rel = abs.lexically_relative(base);
    if (!rel.empty() && *rel.begin() != "..") p = rel;
    out << csv_escape(r.id) << ',' << csv_escape(p.generic_string()) << ','
        << (r.eval_label ? to_string(*r.eval_label) : std::string()) << ',' << csv_escape(r.source_tag) << '\n';
  }
}

UnlabeledManifest strip_labels(const Manifest& manifest) {
  UnlabeledManifest out;
  out.records.reserve(manifest.records.size());
  for (const auto& r : manifest.records) out.records.push_back({r.id, r.path, r.source_tag});
  return out;
}

// ---------------------------------------------------------------------------
// Images

Rgb8Image decode_image(const fs::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw DataError("cannot decode image " + path.string());
  if (raw.depth() != CV_8U)
    throw DataError("image " + path.string() + " is not 8-bit per channel (16-bit and float images are rejected)");
  cv::Mat rgb;
  switch (raw.channels()) {
    case 1: cv::cvtColor(raw, rgb, cv::COLOR_GRAY2RGB); break;
    case 3: cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB); break;
    case 4: cv::cvtColor(raw, rgb, cv::COLOR_BGRA2RGB); break;
    default: throw DataError("image " + path.string() + " has unsupported channel count");
  }
  Rgb8Image out;
  out.height = rgb.rows;
  out.width = rgb.cols;
  out.pixels.resize(static_cast<std::size_t>(rgb.rows) * rgb.cols * 3);
  for (int y = 0; y < rgb.rows; ++y) std::memcpy(&out.pixels[static_cast<std::size_t>(y) * rgb.cols * 3], rgb.ptr(y), rgb.cols * 3);
  return out;
}

void write_png(const Rgb8Image& image, const fs::path& path) {
  cv::Mat rgb(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), bgr)) throw DataError("cannot write image " + path.string());
}

Tensor3<float> resize_bilinear(const Tensor3<float>& image, int out_height, int out_width) {
  if (out_height <= 0 || out_width <= 0) throw ShapeError("resize target must be positive");
  const int in_h = image.height();
  const int in_w = image.width();
  Tensor3<float> out(image.channels(), out_height, out_width);
  const double sy = static_cast<double>(in_h) / out_height;
  const double sx = static_cast<double>(in_w) / out_width;
  for (int y = 0; y < out_height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(in_h - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(in_w - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double wx = fx - x0;
      for (int c = 0; c < image.channels(); ++c) {
        const double top = (1.0 - wx) * image(c, y0, x0) + wx * image(c, y0, x1);
        const double bottom = (1.0 - wx) * image(c, y1, x0) + wx * image(c, y1, x1);
        out(c, y, x) = static_cast<float>((1.0 - wy) * top + wy * bottom);
      }
    }
  }
  return out;
}

ImageTensor preprocess(const Rgb8Image& image, int side) {
  if (image.height <= 0 || image.width <= 0) throw DataError("empty image");
  ImageTensor t(3, image.height, image.width);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) t(c, y, x) = static_cast<float>(image.at(y, x, c)) / 255.0f;
  if (image.height == side && image.width == side) return t;
  return resize_bilinear(t, side, side);
}

ImageTensor preprocess_file(const fs::path& path, int side) { return preprocess(decode_image(path), side); }

// ---------------------------------------------------------------------------
// Mixing and loading

Manifest mix_datasets(const Manifest& primary, const Manifest& contaminant, double ratio, std::uint64_t seed) {
  if (std::isinf(ratio) && ratio > 0) return primary;
  if (!(ratio > 0.0) || std::isnan(ratio))
    throw ConfigError("contamination ratio must be positive, got " + std::to_string(ratio));
  const auto wanted = static_cast<std::size_t>(std::floor(static_cast<double>(primary.records.size()) / ratio));
  if (wanted > contaminant.records.size())
    throw DataError("contaminant manifest has " + std::to_string(contaminant.records.size()) +
                    " records but ratio " + std::to_string(ratio) + " needs " + std::to_string(wanted));

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> pick(contaminant.records.size());
  std::iota(pick.begin(), pick.end(), 0);
  std::shuffle(pick.begin(), pick.end(), rng);

  Manifest out;
  out.schema_version = primary.schema_version;
  out.records = primary.records;
  for (std::size_t i = 0; i < wanted; ++i) out.records.push_back(contaminant.records[pick[i]]);
  std::shuffle(out.records.begin(), out.records.end(), rng);
  require_unique_ids(out);
  return out;
}

TrainingSet load_training_set(const UnlabeledManifest& manifest, int side) {
  TrainingSet set;
  set.samples.resize(manifest.records.size());
  parallel_for(manifest.records.size(), [&](std::size_t i) {
    const auto& r = manifest.records[i];
    set.samples[i] = {r.id, preprocess_file(r.path, side)};
  });
  return set;
}

}  // namespace spad
