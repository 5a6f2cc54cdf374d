#include "spad/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "spad/checkpoint.hpp"
#include "spad/parallel.hpp"

namespace spad {

std::size_t ScoreSet::count(EvalLabel label) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const ScoreEntry& e) { return e.label == label; }));
}

void ScoreSet::require_both_classes() const {
  for (const auto& e : entries)
    if (!std::isfinite(e.score)) throw DataError("non-finite score for sample '" + e.id + "'");
  if (count(EvalLabel::bona_fide) == 0 || count(EvalLabel::attack) == 0)
    throw ConfigError("metrics need both bona fide and attack samples (got " +
                      std::to_string(count(EvalLabel::bona_fide)) + " bona fide, " +
                      std::to_string(count(EvalLabel::attack)) + " attack)");
}

ScoringResult score(const ConvAutoencoder<float>& model, const Manifest& manifest) {
  require_unique_ids(manifest);
  for (const auto& r : manifest.records)
    if (!r.eval_label) throw DataError("sample '" + r.id + "' has no label; scoring needs a labeled manifest");

  const int side = model.architecture().input_side;
  const std::size_t n = manifest.records.size();
  std::vector<double> values(n, 0.0);
  std::vector<char> ok(n, 0);
  std::vector<std::string> errors(n);
  parallel_for(n, [&](std::size_t i) {
    try {
      const ImageTensor x = preprocess_file(manifest.records[i].path, side);
      values[i] = per_sample_mse(x, model.reconstruct(x));
      ok[i] = 1;
    } catch (const DataError& e) {
      errors[i] = e.what();
    }
  });

  ScoringResult result;
  for (std::size_t i = 0; i < n; ++i) {
    if (!ok[i]) {
      std::cerr << "warning: skipping '" << manifest.records[i].id << "': " << errors[i] << '\n';
      ++result.skipped;
      continue;
    }
    result.scores.entries.push_back({manifest.records[i].id, values[i], *manifest.records[i].eval_label});
  }
  if (result.skipped) std::cerr << "warning: " << result.skipped << " unreadable samples skipped\n";
  return result;
}

std::pair<double, double> apcer_bpcer_at(const ScoreSet& scores, double threshold) {
  scores.require_both_classes();
  std::size_t attacks_accepted = 0, bonafide_rejected = 0;
  for (const auto& e : scores.entries) {
    if (e.label == EvalLabel::attack && e.score >= threshold) ++attacks_accepted;
    if (e.label == EvalLabel::bona_fide && e.score < threshold) ++bonafide_rejected;
  }
  return {static_cast<double>(attacks_accepted) / static_cast<double>(scores.count(EvalLabel::attack)),
          static_cast<double>(bonafide_rejected) / static_cast<double>(scores.count(EvalLabel::bona_fide))};
}

namespace {

double midpoint(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid > lo ? mid : hi;
}

// Distinct scores ascending, each with its attack and bona fide multiplicity.
struct Level {
  double value;
  std::int64_t attacks;
  std::int64_t bonafide;
};

std::vector<Level> levels(const ScoreSet& scores) {
  std::vector<std::pair<double, EvalLabel>> sorted;
  sorted.reserve(scores.entries.size());
  for (const auto& e : scores.entries) sorted.emplace_back(e.score, e.label);
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Level> out;
  for (const auto& [v, label] : sorted) {
    if (out.empty() || out.back().value != v) out.push_back({v, 0, 0});
    (label == EvalLabel::attack ? out.back().attacks : out.back().bonafide) += 1;
  }
  return out;
}

std::vector<double> thresholds_for(const std::vector<Level>& lv) {
  std::vector<double> t;
  t.reserve(lv.size() + 1);
  t.push_back(std::nextafter(lv.front().value, -std::numeric_limits<double>::infinity()));
  for (std::size_t i = 0; i + 1 < lv.size(); ++i) t.push_back(midpoint(lv[i].value, lv[i + 1].value));
  t.push_back(std::nextafter(lv.back().value, std::numeric_limits<double>::infinity()));
  return t;
}

// Calls visit(threshold, attacks_accepted, bonafide_rejected) per candidate, ascending.
template <typename Visit>
void sweep(const ScoreSet& scores, Visit&& visit) {
  const auto lv = levels(scores);
  const auto t = thresholds_for(lv);
  std::int64_t attacks_accepted = static_cast<std::int64_t>(scores.count(EvalLabel::attack));
  std::int64_t bonafide_rejected = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (k > 0) {
      attacks_accepted -= lv[k - 1].attacks;
      bonafide_rejected += lv[k - 1].bonafide;
    }
    visit(t[k], attacks_accepted, bonafide_rejected);
  }
}

}  // namespace

std::vector<double> candidate_thresholds(const ScoreSet& scores) {
  scores.require_both_classes();
  return thresholds_for(levels(scores));
}

EerResult compute_eer(const ScoreSet& scores) {
  scores.require_both_classes();
  const auto n_a = static_cast<std::int64_t>(scores.count(EvalLabel::attack));
  const auto n_b = static_cast<std::int64_t>(scores.count(EvalLabel::bona_fide));
  // Compare on the common denominator n_a * n_b so ties are exact.
  std::int64_t best_diff = std::numeric_limits<std::int64_t>::max();
  std::int64_t best_sum = 0;
  EerResult best;
  sweep(scores, [&](double t, std::int64_t acc, std::int64_t rej) {
    const std::int64_t a = acc * n_b;
    const std::int64_t b = rej * n_a;
    const std::int64_t diff = std::llabs(a - b);
    const std::int64_t sum = a + b;
    if (diff < best_diff || (diff == best_diff && sum < best_sum)) {
      best_diff = diff;
      best_sum = sum;
      best.threshold = t;
      best.apcer = static_cast<double>(acc) / static_cast<double>(n_a);
      best.bpcer = static_cast<double>(rej) / static_cast<double>(n_b);
    }
  });
  best.eer = (best.apcer + best.bpcer) / 2.0;
  return best;
}

std::vector<RocPoint> roc_points(const ScoreSet& scores) {
  scores.require_both_classes();
  const double n_a = static_cast<double>(scores.count(EvalLabel::attack));
  const double n_b = static_cast<double>(scores.count(EvalLabel::bona_fide));
  std::vector<RocPoint> points;
  sweep(scores, [&](double t, std::int64_t acc, std::int64_t rej) {
    points.push_back({t, static_cast<double>(acc) / n_a, 1.0 - static_cast<double>(rej) / n_b});
  });
  return points;
}

double roc_auc(const std::vector<RocPoint>& points) {
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i)
    area += (points[i].apcer - points[i + 1].apcer) * (points[i].one_minus_bpcer + points[i + 1].one_minus_bpcer) / 2.0;
  return area;
}

GapRow gap_row(const ScoreSet& scores, std::int64_t epoch) {
  scores.require_both_classes();
  double bf = 0.0, at = 0.0;
  for (const auto& e : scores.entries) (e.label == EvalLabel::attack ? at : bf) += e.score;
  GapRow row;
  row.epoch = epoch;
  row.bonafide_mean = bf / static_cast<double>(scores.count(EvalLabel::bona_fide));
  row.attack_mean = at / static_cast<double>(scores.count(EvalLabel::attack));
  row.gap = row.bonafide_mean - row.attack_mean;
  return row;
}

std::vector<GapRow> gap_curve(const std::vector<std::filesystem::path>& checkpoints, const Manifest& manifest) {
  if (checkpoints.empty()) throw ConfigError("gap_curve needs at least one checkpoint");
  std::vector<GapRow> rows;
  for (const auto& path : checkpoints) {
    const Checkpoint ck = load_checkpoint(path);
    rows.push_back(gap_row(score(ck.model(), manifest).scores, ck.epoch));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Report

EvalReport build_report(const ScoreSet& scores, std::vector<GapRow> gap) {
  EvalReport r;
  r.n_bonafide = scores.count(EvalLabel::bona_fide);
  r.n_attack = scores.count(EvalLabel::attack);
  const EerResult eer = compute_eer(scores);
  r.eer = eer.eer;
  r.eer_threshold = eer.threshold;
  r.apcer_at_eer = eer.apcer;
  r.bpcer_at_eer = eer.bpcer;
  r.roc = roc_points(scores);
  r.auc = roc_auc(r.roc);
  r.gap_curve = std::move(gap);
  for (double target : {0.01, 0.05, 0.10, 0.20}) {
    OperatingPoint bp{target, 1.0, 0.0}, ap{target, 1.0, 0.0};
    bool bp_set = false, ap_set = false;
    for (const auto& p : r.roc) {
      const double bpcer = 1.0 - p.one_minus_bpcer;
      if (p.apcer <= target && (!bp_set || bpcer < bp.value)) {
        bp = {target, bpcer, p.threshold};
        bp_set = true;
      }
      if (bpcer <= target && (!ap_set || p.apcer < ap.value)) {
        ap = {target, p.apcer, p.threshold};
        ap_set = true;
      }
    }
    r.bpcer_at_apcer.push_back(bp);
    r.apcer_at_bpcer.push_back(ap);
  }
  return r;
}

nlohmann::json EvalReport::to_json() const {
  auto points = [](const std::vector<OperatingPoint>& ops) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& o : ops) a.push_back({{"target", o.target}, {"value", o.value}, {"threshold", o.threshold}});
    return a;
  };
  nlohmann::json roc_json = nlohmann::json::array();
  for (const auto& p : roc)
    roc_json.push_back({{"threshold", p.threshold}, {"apcer", p.apcer}, {"one_minus_bpcer", p.one_minus_bpcer}});
  nlohmann::json gap_json = nlohmann::json::array();
  for (const auto& g : gap_curve)
    gap_json.push_back(
        {{"epoch", g.epoch}, {"bonafide_mean", g.bonafide_mean}, {"attack_mean", g.attack_mean}, {"gap", g.gap}});
  return {{"polarity", polarity},
          {"n_bonafide", n_bonafide},
          {"n_attack", n_attack},
          {"eer", eer},
          {"eer_threshold", eer_threshold},
          {"apcer_at_eer", apcer_at_eer},
          {"bpcer_at_eer", bpcer_at_eer},
          {"auc", auc},
          {"roc", roc_json},
          {"gap_curve", gap_json},
          {"bpcer_at_apcer", points(bpcer_at_apcer)},
          {"apcer_at_bpcer", points(apcer_at_bpcer)}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.polarity = j.at("polarity").get<std::string>();
    r.n_bonafide = j.at("n_bonafide").get<std::size_t>();
    r.n_attack = j.at("n_attack").get<std::size_t>();
    r.eer = j.at("eer").get<double>();
    r.eer_threshold = j.at("eer_threshold").get<double>();
    r.apcer_at_eer = j.at("apcer_at_eer").get<double>();
    r.bpcer_at_eer = j.at("bpcer_at_eer").get<double>();
    r.auc = j.at("auc").get<double>();
    for (const auto& p : j.at("roc"))
      r.roc.push_back({p.at("threshold").get<double>(), p.at("apcer").get<double>(), p.at("one_minus_bpcer").get<double>()});
    for (const auto& g : j.at("gap_curve"))
      r.gap_curve.push_back({g.at("epoch").get<std::int64_t>(), g.at("bonafide_mean").get<double>(),
                             g.at("attack_mean").get<double>(), g.at("gap").get<double>()});
    auto read_points = [](const nlohmann::json& a) {
      std::vector<OperatingPoint> out;
      for (const auto& o : a) out.push_back({o.at("target").get<double>(), o.at("value").get<double>(), o.at("threshold").get<double>()});
      return out;
    };
    r.bpcer_at_apcer = read_points(j.at("bpcer_at_apcer"));
    r.apcer_at_bpcer = read_points(j.at("apcer_at_bpcer"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed eval report: ") + e.what());
  }
  return r;
}

void write_scores(const ScoreSet& scores, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write score file " + path.string());
  out << "id,score,label\n" << std::setprecision(17);
  for (const auto& e : scores.entries) out << e.id << ',' << e.score << ',' << to_string(e.label) << '\n';
}

ScoreSet read_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read score file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "id,score,label")
    throw DataError(path.string() + ": header must be exactly 'id,score,label'");
  ScoreSet set;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, value, label;
    if (!std::getline(ss, id, ',') || !std::getline(ss, value, ',') || !std::getline(ss, label))
      throw DataError(path.string() + " row " + std::to_string(row) + ": expected 3 columns");
    const auto parsed = parse_label(label);
    if (!parsed) throw DataError(path.string() + " row " + std::to_string(row) + ": missing label");
    set.entries.push_back({id, std::stod(value), *parsed});
  }
  return set;
}

}  // namespace spad
