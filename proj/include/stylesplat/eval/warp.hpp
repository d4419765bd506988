#pragma once

// Forward warping with softmax splatting, and cross-view consistency metrics
// computed by warping rendered frames along exact flow fields.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "stylesplat/core/errors.hpp"
#include "stylesplat/core/tensor.hpp"
#include "stylesplat/data/record.hpp"
#include "stylesplat/eval/metrics.hpp"
#include "stylesplat/losses/losses.hpp"

namespace stylesplat {

struct WarpResult {
  Tensor image;                   // [3,H,W], zeros where uncovered
  std::vector<uint8_t> coverage;  // h*w, 1 where any source mass landed
};

// Forward-warps `frame` along `flow` with softmax splatting: each valid source
// pixel scatters bilinearly into the target grid, weighted by exp(Z) with
// importance Z = -depth when depth is given (nearer wins) and Z = 0 otherwise
// (collisions average).
inline WarpResult warp_forward(const Tensor& frame, const FlowField& flow,
                               const std::vector<float>* depth = nullptr) {
  if (frame.rank() != 3 || frame.dim(0) != 3)
    throw std::invalid_argument("warp_forward: need a [3,H,W] frame");
  const int h = frame.dim(1), w = frame.dim(2);
  if (flow.height != h || flow.width != w)
    throw std::invalid_argument("warp_forward: flow size does not match the frame");
  const size_t hw = static_cast<size_t>(h) * w;
  if (depth && depth->size() != hw)
    throw std::invalid_argument("warp_forward: depth size does not match the frame");

  std::vector<double> num(3 * hw, 0.0), den(hw, 0.0);
  const float* src = frame.data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!flow.is_valid(y, x)) continue;
      const size_t si = static_cast<size_t>(y) * w + x;
      const float* f = flow.at(y, x);
      // lattice coordinates: pixel (x, y) sits at (x, y), so the landing
      // point is simply source + flow
      const double tx = x + f[0], ty = y + f[1];
      const int x0 = static_cast<int>(std::floor(tx));
      const int y0 = static_cast<int>(std::floor(ty));
      const double fx = tx - x0, fy = ty - y0;
      const double imp = std::exp(depth ? -static_cast<double>((*depth)[si]) : 0.0);
      const double wts[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
      const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
      const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
      for (int k = 0; k < 4; ++k) {
        if (xs[k] < 0 || xs[k] >= w || ys[k] < 0 || ys[k] >= h) continue;
        if (wts[k] <= 0) continue;
        const size_t ti = static_cast<size_t>(ys[k]) * w + xs[k];
        const double m = imp * wts[k];
        den[ti] += m;
        for (int c = 0; c < 3; ++c) num[c * hw + ti] += m * src[c * hw + si];
      }
    }
  }

  WarpResult out;
  out.image = Tensor::zeros({3, h, w});
  out.coverage.assign(hw, 0);
  float* dst = out.image.data();
  for (size_t i = 0; i < hw; ++i) {
    if (den[i] > 1e-6) {
      out.coverage[i] = 1;
      for (int c = 0; c < 3; ++c) dst[c * hw + i] = static_cast<float>(num[c * hw + i] / den[i]);
    }
  }
  return out;
}

struct PairConsistency {
  double rmse = 0;
  double perceptual = 0;
  size_t covered = 0;
};

// Warps `src` toward `dst` and scores the overlap: RMSE over covered pixels,
// perceptual distance with uncovered pixels filled from `dst` so only the
// warped content contributes.
inline PairConsistency pair_consistency(const Tensor& src, const Tensor& dst,
                                        const FlowField& flow, const std::vector<float>* depth,
                                        const PerceptualBackbone& bb) {
  if (src.shape() != dst.shape())
    throw std::invalid_argument("pair_consistency: frame sizes differ");
  WarpResult wr = warp_forward(src, flow, depth);
  const int h = src.dim(1), w = src.dim(2);
  const size_t hw = static_cast<size_t>(h) * w;
  Tensor filled = Tensor::zeros({3, h, w});
  const float* pw = wr.image.data();
  const float* pd = dst.data();
  float* pf = filled.data();
  double acc = 0;
  size_t covered = 0;
  for (size_t i = 0; i < hw; ++i) {
    if (wr.coverage[i]) {
      ++covered;
      for (int c = 0; c < 3; ++c) {
        const double d = static_cast<double>(pw[c * hw + i]) - pd[c * hw + i];
        acc += d * d;
        pf[c * hw + i] = pw[c * hw + i];
      }
    } else {
      for (int c = 0; c < 3; ++c) pf[c * hw + i] = pd[c * hw + i];
    }
  }
  PairConsistency out;
  out.covered = covered;
  out.rmse = covered ? std::sqrt(acc / static_cast<double>(3 * covered)) : 0.0;
  NoGradGuard ng;
  out.perceptual = perceptual_distance(filled, dst, bb).item();
  return out;
}

struct ConsistencyReport {
  float short_rmse = 0;
  float short_perceptual = 0;
  float long_rmse = 0;
  float long_perceptual = 0;
  int short_pairs = 0;
  int long_pairs = 0;
};

constexpr int kLongRangeOffset = 7;

// Scores a rendered trajectory for cross-view consistency. short_flows[k]
// maps frame k to k+1, long_flows[k] maps frame k to k+kLongRangeOffset;
// depths (one per frame, optional) drive the splatting importance.
inline ConsistencyReport consistency_metrics(const std::vector<Tensor>& frames,
                                             const std::vector<FlowField>& short_flows,
                                             const std::vector<FlowField>& long_flows,
                                             const std::vector<std::vector<float>>& depths,
                                             const PerceptualBackbone& bb) {
  const size_t n = frames.size();
  if (n < static_cast<size_t>(kLongRangeOffset) + 1)
    throw UsageError("consistency needs at least " + std::to_string(kLongRangeOffset + 1) +
                     " frames, got " + std::to_string(n));
  if (short_flows.size() < n - 1)
    throw UsageError("consistency needs a short-range flow per frame pair");
  if (long_flows.size() < n - kLongRangeOffset)
    throw UsageError("consistency needs a long-range flow per frame pair");
  if (!depths.empty() && depths.size() < n)
    throw UsageError("consistency needs a depth map per frame when depths are given");

  ConsistencyReport rep;
  double srm = 0, spc = 0, lrm = 0, lpc = 0;
  for (size_t k = 0; k + 1 < n; ++k) {
    const auto* d = depths.empty() ? nullptr : &depths[k];
    const PairConsistency pc = pair_consistency(frames[k], frames[k + 1], short_flows[k], d, bb);
    srm += pc.rmse;
    spc += pc.perceptual;
    ++rep.short_pairs;
  }
  for (size_t k = 0; k + kLongRangeOffset < n; ++k) {
    const auto* d = depths.empty() ? nullptr : &depths[k];
    const PairConsistency pc =
        pair_consistency(frames[k], frames[k + kLongRangeOffset], long_flows[k], d, bb);
    lrm += pc.rmse;
    lpc += pc.perceptual;
    ++rep.long_pairs;
  }
  if (rep.short_pairs) {
    rep.short_rmse = static_cast<float>(srm / rep.short_pairs);
    rep.short_perceptual = static_cast<float>(spc / rep.short_pairs);
  }
  if (rep.long_pairs) {
    rep.long_rmse = static_cast<float>(lrm / rep.long_pairs);
    rep.long_perceptual = static_cast<float>(lpc / rep.long_pairs);
  }
  return rep;
}

}  // namespace stylesplat
