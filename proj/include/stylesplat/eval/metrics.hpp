#pragma once

// Image similarity metrics (PSNR, SSIM, perceptual distance), the log-chroma
// color histogram with intensity weighting, and evaluation report output.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stylesplat/core/errors.hpp"
#include "stylesplat/core/tensor.hpp"
#include "stylesplat/losses/losses.hpp"

namespace stylesplat {

namespace detail_eval {

inline void check_pair(const Tensor& a, const Tensor& b, const char* who) {
  if (a.rank() != 3 || a.dim(0) != 3)
    throw std::invalid_argument(std::string(who) + ": need [3,H,W] images");
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(who) + ": image sizes differ");
}

}  // namespace detail_eval

inline double image_mse(const Tensor& a, const Tensor& b) {
  detail_eval::check_pair(a, b, "image_mse");
  const float* pa = a.data();
  const float* pb = b.data();
  double acc = 0;
  const size_t n = static_cast<size_t>(a.numel());
  for (size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pa[i]) - pb[i];
    acc += d * d;
  }
  return acc / static_cast<double>(n);
}

// 10*log10(1/MSE) for [0,1] images, capped at 100 dB for near-exact matches.
inline float psnr_of(const Tensor& a, const Tensor& b) {
  const double mse = image_mse(a, b);
  if (mse < 1e-10) return 100.0f;
  return static_cast<float>(10.0 * std::log10(1.0 / mse));
}

namespace detail_eval {

constexpr int kSsimWindow = 11;

inline const std::vector<double>& ssim_kernel() {
  static const std::vector<double> k = [] {
    std::vector<double> out(kSsimWindow);
    const double sigma = 1.5;
    double sum = 0;
    for (int i = 0; i < kSsimWindow; ++i) {
      const double d = i - (kSsimWindow - 1) / 2.0;
      out[i] = std::exp(-d * d / (2.0 * sigma * sigma));
      sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
  }();
  return k;
}

// Separable valid-mode Gaussian filter on one plane; output is
// (h-10) x (w-10).
inline std::vector<double> filter_valid(const std::vector<double>& img, int h, int w) {
  const auto& k = ssim_kernel();
  const int oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
  std::vector<double> rows(static_cast<size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0;
      for (int i = 0; i < kSsimWindow; ++i) acc += k[i] * img[static_cast<size_t>(y) * w + x + i];
      rows[static_cast<size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0;
      for (int i = 0; i < kSsimWindow; ++i) acc += k[i] * rows[static_cast<size_t>(y + i) * ow + x];
      out[static_cast<size_t>(y) * ow + x] = acc;
    }
  return out;
}

}  // namespace detail_eval

// Mean structural similarity over valid 11x11 Gaussian windows (sigma 1.5,
// K1 = 0.01, K2 = 0.03, dynamic range 1), averaged across channels.
inline float ssim_of(const Tensor& a, const Tensor& b) {
  detail_eval::check_pair(a, b, "ssim_of");
  const int h = a.dim(1), w = a.dim(2);
  if (h < detail_eval::kSsimWindow || w < detail_eval::kSsimWindow)
    throw std::invalid_argument("ssim_of: image smaller than the 11x11 window");
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const size_t hw = static_cast<size_t>(h) * w;
  double total = 0;
  for (int ch = 0; ch < 3; ++ch) {
    std::vector<double> x(hw), y(hw), xx(hw), yy(hw), xy(hw);
    const float* pa = a.data() + ch * hw;
    const float* pb = b.data() + ch * hw;
    for (size_t i = 0; i < hw; ++i) {
      x[i] = pa[i];
      y[i] = pb[i];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = detail_eval::filter_valid(x, h, w);
    const auto my = detail_eval::filter_valid(y, h, w);
    const auto mxx = detail_eval::filter_valid(xx, h, w);
    const auto myy = detail_eval::filter_valid(yy, h, w);
    const auto mxy = detail_eval::filter_valid(xy, h, w);
    double acc = 0;
    for (size_t i = 0; i < mx.size(); ++i) {
      const double vx = mxx[i] - mx[i] * mx[i];
      const double vy = myy[i] - my[i] * my[i];
      const double cov = mxy[i] - mx[i] * my[i];
      acc += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return static_cast<float>(total / 3.0);
}

struct NvsMetrics {
  float psnr = 0;
  float ssim = 0;
  float perceptual = 0;
};

inline NvsMetrics nvs_metrics(const Tensor& rendered, const Tensor& target,
                              const PerceptualBackbone& bb) {
  detail_eval::check_pair(rendered, target, "nvs_metrics");
  NvsMetrics out;
  out.psnr = psnr_of(rendered, target);
  out.ssim = ssim_of(rendered, target);
  NoGradGuard ng;
  out.perceptual = perceptual_distance(rendered, target, bb).item();
  return out;
}

// Intensity-weighted histogram over log-chroma coordinates
// u = log((R+eps)/(G+eps)), v = log((B+eps)/(G+eps)), binned over [-3,3]^2
// with outliers clamped to the edge bins. Mass normalizes to 1.
struct RgbUvHistogram {
  int bins = 64;
  float epsilon = 1e-4f;
  std::vector<double> mass;  // bins*bins, u-major

  double at(int ui, int vi) const { return mass[static_cast<size_t>(ui) * bins + vi]; }
};

inline RgbUvHistogram rgbuv_histogram(const Tensor& img, int bins = 64, float epsilon = 1e-4f) {
  if (img.rank() != 3 || img.dim(0) != 3)
    throw std::invalid_argument("rgbuv_histogram: need [3,H,W]");
  RgbUvHistogram h;
  h.bins = bins;
  h.epsilon = epsilon;
  h.mass.assign(static_cast<size_t>(bins) * bins, 0.0);
  const size_t hw = static_cast<size_t>(img.dim(1)) * img.dim(2);
  const float* r = img.data();
  const float* g = r + hw;
  const float* b = g + hw;
  auto bin_of = [bins](double coord) {
    int i = static_cast<int>(std::floor((coord + 3.0) / 6.0 * bins));
    return std::min(std::max(i, 0), bins - 1);
  };
  double total = 0;
  for (size_t i = 0; i < hw; ++i) {
    const double u = std::log((r[i] + epsilon) / (g[i] + epsilon));
    const double v = std::log((b[i] + epsilon) / (g[i] + epsilon));
    const double wgt = std::sqrt(static_cast<double>(r[i]) * r[i] +
                                 static_cast<double>(g[i]) * g[i] +
                                 static_cast<double>(b[i]) * b[i]);
    h.mass[static_cast<size_t>(bin_of(u)) * bins + bin_of(v)] += wgt;
    total += wgt;
  }
  if (total > 0) {
    for (double& m : h.mass) m /= total;
  } else {
    // all-black input: no intensity anywhere, put the unit mass where the
    // achromatic point (u = v = 0) falls
    h.mass[static_cast<size_t>(bin_of(0.0)) * bins + bin_of(0.0)] = 1.0;
  }
  return h;
}

// Hellinger distance, 0 for equal histograms and 1 for disjoint support.
inline double histogram_distance(const RgbUvHistogram& h1, const RgbUvHistogram& h2) {
  if (h1.bins != h2.bins) throw std::invalid_argument("histogram_distance: bin counts differ");
  double bc = 0;
  for (size_t i = 0; i < h1.mass.size(); ++i) bc += std::sqrt(h1.mass[i] * h2.mass[i]);
  return std::sqrt(std::max(0.0, 1.0 - bc));
}

// One evaluated (scene, style) combination.
struct MetricsRow {
  std::string scene_id;
  std::string style_id;
  float short_rmse = 0;
  float short_perceptual = 0;
  float long_rmse = 0;
  float long_perceptual = 0;
  float psnr = 0;
  float ssim = 0;
  float perceptual = 0;
  float hist_distance = 0;
};

inline void to_json(nlohmann::json& j, const MetricsRow& r) {
  j = {{"scene_id", r.scene_id},
       {"style_id", r.style_id},
       {"short_rmse", r.short_rmse},
       {"short_perceptual", r.short_perceptual},
       {"long_rmse", r.long_rmse},
       {"long_perceptual", r.long_perceptual},
       {"psnr", r.psnr},
       {"ssim", r.ssim},
       {"perceptual", r.perceptual},
       {"hist_distance", r.hist_distance}};
}

inline MetricsRow mean_row(const std::vector<MetricsRow>& rows) {
  MetricsRow m;
  m.scene_id = "mean";
  if (rows.empty()) return m;
  const float inv = 1.0f / static_cast<float>(rows.size());
  for (const auto& r : rows) {
    m.short_rmse += r.short_rmse * inv;
    m.short_perceptual += r.short_perceptual * inv;
    m.long_rmse += r.long_rmse * inv;
    m.long_perceptual += r.long_perceptual * inv;
    m.psnr += r.psnr * inv;
    m.ssim += r.ssim * inv;
    m.perceptual += r.perceptual * inv;
    m.hist_distance += r.hist_distance * inv;
  }
  return m;
}

inline void write_metrics_json(const std::filesystem::path& path,
                               const std::vector<MetricsRow>& rows) {
  nlohmann::json j;
  j["rows"] = rows;
  j["mean"] = mean_row(rows);
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write metrics report: " + path.string());
  f << j.dump(2) << "\n";
}

inline void write_metrics_csv(const std::filesystem::path& path,
                              const std::vector<MetricsRow>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write metrics csv: " + path.string());
  f << "scene_id,style_id,short_rmse,short_perceptual,long_rmse,long_perceptual,"
       "psnr,ssim,perceptual,hist_distance\n";
  auto line = [&f](const MetricsRow& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                  r.scene_id.c_str(), r.style_id.c_str(), r.short_rmse, r.short_perceptual,
                  r.long_rmse, r.long_perceptual, r.psnr, r.ssim, r.perceptual, r.hist_distance);
    f << buf;
  };
  for (const auto& r : rows) line(r);
  line(mean_row(rows));
}

}  // namespace stylesplat
