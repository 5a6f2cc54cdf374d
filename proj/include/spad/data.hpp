#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "spad/tensor.hpp"

namespace spad {

enum class EvalLabel { bona_fide, attack };

/// "bonafide" or "attack".
std::string to_string(EvalLabel label);
/// Parses a manifest label cell; empty means unlabeled. Throws DataError
/// listing the allowed values otherwise.
std::optional<EvalLabel> parse_label(const std::string& text);

/// One manifest row. The label is for evaluation only.
struct SampleRecord {
  std::string id;
  std::filesystem::path path;
  std::optional<EvalLabel> eval_label;
  std::string source_tag;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

inline constexpr int kManifestSchemaVersion = 1;

struct Manifest {
  int schema_version = kManifestSchemaVersion;
  std::vector<SampleRecord> records;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

/// Reads a CSV manifest with header exactly `id,path,label,source`. Relative
/// paths resolve against the manifest's directory. Throws DataError on a
/// missing file, bad header, bad label, duplicate id or (when check_paths)
/// an unreadable image path; row numbers count the header as row 1.
Manifest load_manifest(const std::filesystem::path& path, bool check_paths = true);

/// Writes a manifest; paths below the manifest's directory are stored relative.
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Throws DataError naming the first duplicated id.
void require_unique_ids(const Manifest& manifest);

/// Training-facing record; carries no label.
struct UnlabeledRecord {
  std::string id;
  std::filesystem::path path;
  std::string source_tag;
};

struct UnlabeledManifest {
  std::vector<UnlabeledRecord> records;
};

/// Drops every eval_label. The only way to turn a Manifest into trainer input.
UnlabeledManifest strip_labels(const Manifest& manifest);

/// Interleaved 8-bit RGB image.
struct Rgb8Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // row-major, RGB triplets

  std::uint8_t& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  friend bool operator==(const Rgb8Image&, const Rgb8Image&) = default;
};

/// Decodes PNG or JPEG to 8-bit RGB. Gray and alpha inputs are converted,
/// 16-bit inputs are rejected. Throws DataError.
Rgb8Image decode_image(const std::filesystem::path& path);

/// Lossless PNG encoding.
void write_png(const Rgb8Image& image, const std::filesystem::path& path);

/// Bilinear resampling with half-pixel centers and edge clamping.
Tensor3<float> resize_bilinear(const Tensor3<float>& image, int out_height, int out_width);

/// RGB bytes -> [0,1] tensor, resized to side x side when needed. An image
/// already at the target size is only scaled (value / 255).
ImageTensor preprocess(const Rgb8Image& image, int side);
ImageTensor preprocess_file(const std::filesystem::path& path, int side);

/// Sentinel ratio that turns contamination off.
inline constexpr double kNoContamination = std::numeric_limits<double>::infinity();

/// All primary records plus floor(|primary| / ratio) contaminant records
/// chosen with `seed`, shuffled with `seed`. A ratio of kNoContamination
/// returns the primary manifest unchanged. Throws ConfigError for ratio <= 0
/// and DataError when the contaminant pool is too small.
Manifest mix_datasets(const Manifest& primary, const Manifest& contaminant, double ratio, std::uint64_t seed);

/// Preprocessed, label-free trainer input.
struct TrainingSample {
  std::string id;
  ImageTensor image;
};

struct TrainingSet {
  std::vector<TrainingSample> samples;

  std::size_t size() const noexcept { return samples.size(); }
};

/// Decodes and preprocesses every record (in parallel, capped by SPAD_THREADS).
TrainingSet load_training_set(const UnlabeledManifest& manifest, int side);

}  // namespace spad
