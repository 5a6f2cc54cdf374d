#include "spad/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "spad/errors.hpp"

namespace spad {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 480;
constexpr int kLeft = 70, kRight = 20, kTop = 30, kBottom = 50;

struct Axes {
  double x0, x1, y0, y1;

  cv::Point map(double x, double y) const {
    const double fx = x1 > x0 ? (x - x0) / (x1 - x0) : 0.5;
    const double fy = y1 > y0 ? (y - y0) / (y1 - y0) : 0.5;
    return {kLeft + static_cast<int>(fx * (kWidth - kLeft - kRight)),
            kHeight - kBottom - static_cast<int>(fy * (kHeight - kTop - kBottom))};
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

cv::Mat canvas(const Axes& ax, const std::string& title, const std::string& xlabel, const std::string& ylabel) {
  cv::Mat img(kHeight, kWidth, CV_8UC3, cv::Scalar(255, 255, 255));
  const cv::Scalar black(0, 0, 0), grid(220, 220, 220);
  for (int i = 0; i <= 4; ++i) {
    const double fx = ax.x0 + (ax.x1 - ax.x0) * i / 4.0;
    const double fy = ax.y0 + (ax.y1 - ax.y0) * i / 4.0;
    cv::line(img, ax.map(fx, ax.y0), ax.map(fx, ax.y1), grid, 1);
    cv::line(img, ax.map(ax.x0, fy), ax.map(ax.x1, fy), grid, 1);
    cv::putText(img, fmt(fx), ax.map(fx, ax.y0) + cv::Point(-12, 18), cv::FONT_HERSHEY_SIMPLEX, 0.4, black, 1);
    cv::putText(img, fmt(fy), ax.map(ax.x0, fy) + cv::Point(-60, 4), cv::FONT_HERSHEY_SIMPLEX, 0.4, black, 1);
  }
  cv::rectangle(img, ax.map(ax.x0, ax.y1), ax.map(ax.x1, ax.y0), black, 1);
  int baseline = 0;
  const cv::Size title_size = cv::getTextSize(title, cv::FONT_HERSHEY_SIMPLEX, 0.55, 1, &baseline);
  cv::putText(img, title, {kWidth - kRight - title_size.width, 20}, cv::FONT_HERSHEY_SIMPLEX, 0.55, black, 1,
              cv::LINE_AA);
  cv::putText(img, xlabel, {kWidth / 2 - 30, kHeight - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.45, black, 1, cv::LINE_AA);
  cv::putText(img, ylabel, {4, kTop - 8}, cv::FONT_HERSHEY_SIMPLEX, 0.45, black, 1, cv::LINE_AA);
  return img;
}

void save(const cv::Mat& img, const std::filesystem::path& png) {
  if (png.has_parent_path()) std::filesystem::create_directories(png.parent_path());
  if (!cv::imwrite(png.string(), img)) throw DataError("cannot write plot " + png.string());
}

}  // namespace

void plot_roc(const std::vector<RocPoint>& roc, const std::filesystem::path& png) {
  if (roc.size() < 2) throw DataError("ROC plot needs at least 2 points");
  const Axes ax{0.0, 1.0, 0.0, 1.0};
  cv::Mat img = canvas(ax, "ROC", "APCER", "1 - BPCER");
  cv::line(img, ax.map(0, 0), ax.map(1, 1), cv::Scalar(160, 160, 160), 1, cv::LINE_AA);
  for (std::size_t i = 0; i + 1 < roc.size(); ++i)
    cv::line(img, ax.map(roc[i].apcer, roc[i].one_minus_bpcer), ax.map(roc[i + 1].apcer, roc[i + 1].one_minus_bpcer),
             cv::Scalar(180, 60, 0), 2, cv::LINE_AA);
  save(img, png);
}

void plot_gap_curve(const std::vector<GapRow>& rows, const std::filesystem::path& png) {
  if (rows.empty()) throw DataError("gap plot needs at least 1 row");
  double lo = rows.front().attack_mean, hi = lo;
  for (const auto& r : rows) {
    lo = std::min({lo, r.attack_mean, r.bonafide_mean});
    hi = std::max({hi, r.attack_mean, r.bonafide_mean});
  }
  const double pad = (hi - lo) * 0.1 + 1e-12;
  const Axes ax{static_cast<double>(rows.front().epoch), static_cast<double>(rows.back().epoch), lo - pad, hi + pad};
  cv::Mat img = canvas(ax, "reconstruction error (green: bona fide, red: attack)", "epoch", "MSE");
  const cv::Scalar green(40, 160, 40), red(40, 40, 220);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto e = static_cast<double>(rows[i].epoch);
    cv::circle(img, ax.map(e, rows[i].bonafide_mean), 3, green, cv::FILLED, cv::LINE_AA);
    cv::circle(img, ax.map(e, rows[i].attack_mean), 3, red, cv::FILLED, cv::LINE_AA);
    if (i + 1 < rows.size()) {
      const auto n = static_cast<double>(rows[i + 1].epoch);
      cv::line(img, ax.map(e, rows[i].bonafide_mean), ax.map(n, rows[i + 1].bonafide_mean), green, 2, cv::LINE_AA);
      cv::line(img, ax.map(e, rows[i].attack_mean), ax.map(n, rows[i + 1].attack_mean), red, 2, cv::LINE_AA);
    }
  }
  save(img, png);
}

}  // namespace spad
