#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "spad/data.hpp"
#include "spad/model.hpp"

namespace spad {

/// Scores are raw reconstruction MSE. Attacks reconstruct more easily, so a
/// higher score is more bona-fide-like and the decision rule is
/// "attack iff score < threshold"; ties at the threshold fall on the bona fide side.
inline constexpr const char* kPolarity = "attack iff mse < threshold (higher mse = more bona fide)";

struct ScoreEntry {
  std::string id;
  double score = 0.0;
  EvalLabel label = EvalLabel::bona_fide;

  friend bool operator==(const ScoreEntry&, const ScoreEntry&) = default;
};

struct ScoreSet {
  std::vector<ScoreEntry> entries;

  std::size_t count(EvalLabel label) const;
  /// Throws ConfigError unless both classes are present, and DataError on a
  /// non-finite score.
  void require_both_classes() const;

  friend bool operator==(const ScoreSet&, const ScoreSet&) = default;
};

struct ScoringResult {
  ScoreSet scores;
  std::size_t skipped = 0;  // unreadable samples, reported with a warning
};

/// score_i = per_sample_mse(x_i, reconstruct(x_i)) for every labeled record.
/// Unlabeled records are an error, as are duplicate ids.
ScoringResult score(const ConvAutoencoder<float>& model, const Manifest& manifest);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
  double apcer = 0.0;
  double bpcer = 0.0;
};

/// APCER = attacks with score >= t over all attacks; BPCER = bona fides with
/// score < t over all bona fides.
std::pair<double, double> apcer_bpcer_at(const ScoreSet& scores, double threshold);

/// Candidate thresholds: one below every score, midpoints of consecutive
/// distinct scores, one above every score; ascending.
std::vector<double> candidate_thresholds(const ScoreSet& scores);

/// Sweeps every candidate threshold; picks the smallest |APCER - BPCER|,
/// then the smallest APCER + BPCER, then the lowest threshold, and reports
/// eer = (APCER + BPCER) / 2 there.
EerResult compute_eer(const ScoreSet& scores);

struct RocPoint {
  double threshold = 0.0;
  double apcer = 0.0;
  double one_minus_bpcer = 0.0;
};

/// One point per candidate threshold, ascending, from (1,1) to (0,0).
std::vector<RocPoint> roc_points(const ScoreSet& scores);
/// Trapezoidal area under the (APCER, 1 - BPCER) curve.
double roc_auc(const std::vector<RocPoint>& points);

struct GapRow {
  std::int64_t epoch = 0;
  double bonafide_mean = 0.0;
  double attack_mean = 0.0;
  double gap = 0.0;  // bonafide_mean - attack_mean

  friend bool operator==(const GapRow&, const GapRow&) = default;
};

GapRow gap_row(const ScoreSet& scores, std::int64_t epoch);

/// Scores the manifest with each checkpoint, one row per checkpoint.
std::vector<GapRow> gap_curve(const std::vector<std::filesystem::path>& checkpoints, const Manifest& manifest);

struct OperatingPoint {
  double target = 0.0;     // fixed APCER (or BPCER)
  double value = 0.0;      // lowest BPCER (or APCER) reachable at that target
  double threshold = 0.0;
};

struct EvalReport {
  std::string polarity = kPolarity;
  std::size_t n_bonafide = 0;
  std::size_t n_attack = 0;
  double eer = 0.0;
  double eer_threshold = 0.0;
  double apcer_at_eer = 0.0;
  double bpcer_at_eer = 0.0;
  double auc = 0.0;
  std::vector<RocPoint> roc;
  std::vector<GapRow> gap_curve;
  std::vector<OperatingPoint> bpcer_at_apcer;
  std::vector<OperatingPoint> apcer_at_bpcer;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

/// Operating points are tabulated at 1%, 5%, 10% and 20%.
EvalReport build_report(const ScoreSet& scores, std::vector<GapRow> gap);

/// CSV `id,score,label`, scores printed with 17 significant digits.
void write_scores(const ScoreSet& scores, const std::filesystem::path& path);
ScoreSet read_scores(const std::filesystem::path& path);

}  // namespace spad
