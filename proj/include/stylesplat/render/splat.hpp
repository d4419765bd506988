#pragma once

// Differentiable 3D Gaussian rasterization.
//
// Projection (EWA): with t = R mu + tr the camera-space center,
//   mean2d = (fx tx/tz + cx, fy ty/tz + cy)
//   cov2d  = J W Sigma W^T J^T + blur * I,  J the projection Jacobian at t
// Gaussians with tz <= near are culled. Compositing is front to back over a
// single global ordering by camera depth (ascending float32 z, ties broken by
// index):
//   alpha'_i = min(opacity_i * exp(-0.5 d^T cov2d^{-1} d), alpha_max)
//   C = sum_i c_i alpha'_i prod_{j<i} (1 - alpha'_j) + bg * prod_i (1 - alpha'_i)
// Contributions with alpha' < cutoff are dropped. The fast path additionally
// skips pixels outside a conservative bounding square (bbox_sigma standard
// deviations, chosen so everything outside is below the cutoff anyway) and
// stops once transmittance falls under term_threshold.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "stylesplat/core/image.hpp"
#include "stylesplat/data/camera.hpp"
#include "stylesplat/gaussians/gaussians.hpp"

namespace stylesplat {

struct RenderConfig {
  float near = 0.01f;
  float blur = 0.3f;               // isotropic screen-space floor, px^2
  float alpha_max = 1.0f - 1e-4f;
  float cutoff = 1.0f / 255.0f;
  float term_threshold = 1e-7f;
  float bbox_sigma = 3.5f;         // outside this square, alpha' < cutoff always
  Vec3 background = Vec3(0.5f, 0.5f, 0.5f);
};

struct RenderedImage {
  int height = 0;
  int width = 0;
  std::vector<float> color;  // h*w*3 interleaved
  std::vector<float> alpha;  // h*w accumulated opacity (1 - transmittance)

  Image to_image() const {
    Image im(height, width);
    im.rgb = color;
    return im;
  }
};

struct Splat2D {
  bool valid = false;
  float tx = 0, ty = 0, tz = 0;      // camera-space center
  float mx = 0, my = 0;              // screen mean
  float ca = 0, cb = 0, cc = 0;      // cov2d [[ca, cb], [cb, cc]]
  float ia = 0, ib = 0, ic = 0;      // cov2d inverse
  float color[3] = {0, 0, 0};
  float opacity = 0;
  float radius = 0;                  // bbox half-side in pixels
};

struct SplatGrad {
  float dmx = 0, dmy = 0;
  float dca = 0, dcb = 0, dcc = 0;  // gradient w.r.t. cov2d (symmetric, db counts both off-diagonals)
  float dcolor[3] = {0, 0, 0};
  float dopacity = 0;
};

inline void project_gaussians(const GaussianSet& g, const Camera& cam, const RenderConfig& cfg,
                              std::vector<Splat2D>& out) {
  const size_t m = g.size();
  out.assign(m, Splat2D{});
  for (size_t i = 0; i < m; ++i) {
    const Vec3 mu(g.means[i * 3], g.means[i * 3 + 1], g.means[i * 3 + 2]);
    const Vec3 t = cam.R * mu + cam.t;
    if (t.z() <= cfg.near) continue;
    Splat2D& s = out[i];
    s.tx = t.x();
    s.ty = t.y();
    s.tz = t.z();
    const float inv_z = 1.0f / t.z();
    s.mx = cam.fx * t.x() * inv_z + cam.cx;
    s.my = cam.fy * t.y() * inv_z + cam.cy;

    Eigen::Matrix<float, 2, 3> jac;
    jac << cam.fx * inv_z, 0, -cam.fx * t.x() * inv_z * inv_z,
        0, cam.fy * inv_z, -cam.fy * t.y() * inv_z * inv_z;
    const Eigen::Matrix<float, 2, 3> v = jac * cam.R;
    const float* q = g.rotations.data() + i * 4;
    const float* sc = g.scales.data() + i * 3;
    const Eigen::Matrix<float, 2, 3> w =
        v * rotation_from_quat(q[0], q[1], q[2], q[3]);
    const float s2x = sc[0] * sc[0], s2y = sc[1] * sc[1], s2z = sc[2] * sc[2];
    const float b00 = w(0, 0) * w(0, 0) * s2x + w(0, 1) * w(0, 1) * s2y + w(0, 2) * w(0, 2) * s2z;
    const float b01 = w(0, 0) * w(1, 0) * s2x + w(0, 1) * w(1, 1) * s2y + w(0, 2) * w(1, 2) * s2z;
    const float b11 = w(1, 0) * w(1, 0) * s2x + w(1, 1) * w(1, 1) * s2y + w(1, 2) * w(1, 2) * s2z;
    s.ca = b00 + cfg.blur;
    s.cb = b01;
    s.cc = b11 + cfg.blur;

    // det(B + blur I) = det(B) + blur tr(B) + blur^2, with det(B) expanded by
    // Cauchy-Binet into squared 2x2 minors. Every term is nonnegative, so the
    // determinant stays >= blur^2; the naive ca*cc - cb^2 cancels
    // catastrophically for needle-thin splats close to the camera and can
    // come out negative in float.
    const float m01 = w(0, 0) * w(1, 1) - w(0, 1) * w(1, 0);
    const float m02 = w(0, 0) * w(1, 2) - w(0, 2) * w(1, 0);
    const float m12 = w(0, 1) * w(1, 2) - w(0, 2) * w(1, 1);
    const float det_b = m01 * m01 * s2x * s2y + m02 * m02 * s2x * s2z + m12 * m12 * s2y * s2z;
    const float det = det_b + cfg.blur * (b00 + b11) + cfg.blur * cfg.blur;
    if (!(det > 0.0f))
      throw std::domain_error("projected covariance is not positive definite");
    const float inv_det = 1.0f / det;
    s.ia = s.cc * inv_det;
    s.ib = -s.cb * inv_det;
    s.ic = s.ca * inv_det;

    const float half_trace = 0.5f * (s.ca + s.cc);
    const float lam_max =
        half_trace + std::sqrt(std::max(0.0f, half_trace * half_trace - det));
    s.radius = cfg.bbox_sigma * std::sqrt(lam_max);
    s.opacity = g.opacities[i];
    s.color[0] = g.colors[i * 3];
    s.color[1] = g.colors[i * 3 + 1];
    s.color[2] = g.colors[i * 3 + 2];
    s.valid = true;
  }
}

// Global compositing order: ascending float32 depth, stable in input index.
inline std::vector<int> depth_order(const std::vector<Splat2D>& splats) {
  std::vector<int> order;
  order.reserve(splats.size());
  for (size_t i = 0; i < splats.size(); ++i)
    if (splats[i].valid) order.push_back(static_cast<int>(i));
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return splats[a].tz < splats[b].tz; });
  return order;
}

// Per-pixel record of what the forward pass composited, for the backward pass.
struct CompositeCache {
  std::vector<int32_t> count;                 // h*w
  std::vector<std::pair<int32_t, float>> items;  // (splat index, alpha') in order
};

inline RenderedImage composite(const std::vector<Splat2D>& splats, const std::vector<int>& order,
                               int height, int width, const RenderConfig& cfg,
                               CompositeCache* cache = nullptr) {
  RenderedImage out;
  out.height = height;
  out.width = width;
  out.color.assign(static_cast<size_t>(height) * width * 3, 0.0f);
  out.alpha.assign(static_cast<size_t>(height) * width, 0.0f);
  if (cache) {
    cache->count.assign(static_cast<size_t>(height) * width, 0);
    cache->items.clear();
    cache->items.reserve(static_cast<size_t>(height) * width * 8);
  }

  // Bin depth-ordered splats into tiles of the image so each pixel only scans
  // splats whose bounding square can reach it.
  constexpr int kTile = 16;
  const int tiles_x = (width + kTile - 1) / kTile;
  const int tiles_y = (height + kTile - 1) / kTile;
  std::vector<std::vector<int32_t>> tile_lists(static_cast<size_t>(tiles_x) * tiles_y);
  for (int oi : order) {
    const Splat2D& s = splats[oi];
    const int x0 = std::max(0, static_cast<int>(std::floor(s.mx - s.radius - 0.5f)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(s.mx + s.radius - 0.5f)));
    const int y0 = std::max(0, static_cast<int>(std::floor(s.my - s.radius - 0.5f)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(s.my + s.radius - 0.5f)));
    if (x0 > x1 || y0 > y1) continue;
    for (int ty = y0 / kTile; ty <= y1 / kTile; ++ty)
      for (int tx = x0 / kTile; tx <= x1 / kTile; ++tx)
        tile_lists[static_cast<size_t>(ty) * tiles_x + tx].push_back(oi);
  }

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const float px = x + 0.5f;
      const float py = y + 0.5f;
      const auto& list = tile_lists[static_cast<size_t>(y / kTile) * tiles_x + x / kTile];
      double t_acc = 1.0;
      double c0 = 0.0, c1 = 0.0, c2 = 0.0;
      int32_t n_items = 0;
      for (int32_t oi : list) {
        const Splat2D& s = splats[oi];
        const float dx = px - s.mx;
        const float dy = py - s.my;
        if (std::abs(dx) > s.radius || std::abs(dy) > s.radius) continue;
        const float md = s.ia * dx * dx + 2.0f * s.ib * dx * dy + s.ic * dy * dy;
        const float gauss = std::exp(-0.5f * md);
        const float a = std::min(s.opacity * gauss, cfg.alpha_max);
        if (a < cfg.cutoff) continue;
        const double w = a * t_acc;
        c0 += s.color[0] * w;
        c1 += s.color[1] * w;
        c2 += s.color[2] * w;
        t_acc *= 1.0 - a;
        if (cache) {
          cache->items.emplace_back(oi, a);
          ++n_items;
        }
        if (t_acc < cfg.term_threshold) break;
      }
      c0 += cfg.background.x() * t_acc;
      c1 += cfg.background.y() * t_acc;
      c2 += cfg.background.z() * t_acc;
      const size_t idx = static_cast<size_t>(y) * width + x;
      out.color[idx * 3 + 0] = static_cast<float>(c0);
      out.color[idx * 3 + 1] = static_cast<float>(c1);
      out.color[idx * 3 + 2] = static_cast<float>(c2);
      out.alpha[idx] = static_cast<float>(1.0 - t_acc);
      if (cache) cache->count[idx] = n_items;
    }
  }
  return out;
}

inline RenderedImage render(const GaussianSet& g, const Camera& cam,
                            const RenderConfig& cfg = {}, CompositeCache* cache = nullptr,
                            std::vector<Splat2D>* splats_out = nullptr) {
  std::vector<Splat2D> splats;
  project_gaussians(g, cam, cfg, splats);
  auto order = depth_order(splats);
  RenderedImage out = composite(splats, order, cam.height, cam.width, cfg, cache);
  if (splats_out) *splats_out = std::move(splats);
  return out;
}

// ---------------------------------------------------------------------------
// Backward

// dcolor/dalpha: gradients w.r.t. the rendered image (h*w*3 and h*w).
inline void composite_backward(const std::vector<Splat2D>& splats, const CompositeCache& cache,
                               int height, int width, const RenderConfig& cfg,
                               const float* dcolor, const float* dalpha,
                               std::vector<SplatGrad>& grads) {
  grads.assign(splats.size(), SplatGrad{});
  std::vector<double> t_prefix;
  size_t cursor = 0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const size_t idx = static_cast<size_t>(y) * width + x;
      const int32_t n = cache.count[idx];
      const auto* items = cache.items.data() + cursor;
      cursor += n;
      if (n == 0) continue;

      t_prefix.assign(n, 1.0);
      double t_acc = 1.0;
      for (int32_t i = 0; i < n; ++i) {
        t_prefix[i] = t_acc;
        t_acc *= 1.0 - items[i].second;
      }
      const double t_end = t_acc;

      const float px = x + 0.5f;
      const float py = y + 0.5f;
      const float* dc = dcolor + idx * 3;
      const float da_pix = dalpha[idx];
      // Suffix color mass behind the current contributor, including background.
      double w0 = cfg.background.x() * t_end;
      double w1 = cfg.background.y() * t_end;
      double w2 = cfg.background.z() * t_end;
      for (int32_t i = n - 1; i >= 0; --i) {
        const int32_t oi = items[i].first;
        const float a = items[i].second;
        const Splat2D& s = splats[oi];
        SplatGrad& gr = grads[oi];
        const double t_i = t_prefix[i];
        const double one_minus = 1.0 - a;

        const double wa = a * t_i;
        gr.dcolor[0] += static_cast<float>(dc[0] * wa);
        gr.dcolor[1] += static_cast<float>(dc[1] * wa);
        gr.dcolor[2] += static_cast<float>(dc[2] * wa);

        double dalpha_i = dc[0] * (s.color[0] * t_i - w0 / one_minus) +
                          dc[1] * (s.color[1] * t_i - w1 / one_minus) +
                          dc[2] * (s.color[2] * t_i - w2 / one_minus);
        dalpha_i += da_pix * (t_end / one_minus);

        w0 += s.color[0] * wa;
        w1 += s.color[1] * wa;
        w2 += s.color[2] * wa;

        // alpha' = min(opacity * gauss, alpha_max); past the clamp the
        // opacity and shape receive no gradient.
        if (a >= cfg.alpha_max) continue;
        const float dx_ = px - s.mx;
        const float dy_ = py - s.my;
        const float md = s.ia * dx_ * dx_ + 2.0f * s.ib * dx_ * dy_ + s.ic * dy_ * dy_;
        const float gauss = std::exp(-0.5f * md);

        gr.dopacity += static_cast<float>(dalpha_i * gauss);
        const double dmd = -0.5 * a * dalpha_i;
        // md = d^T A d with d = p - mean2d
        const float adx = s.ia * dx_ + s.ib * dy_;
        const float ady = s.ib * dx_ + s.ic * dy_;
        gr.dmx += static_cast<float>(-2.0 * dmd * adx);
        gr.dmy += static_cast<float>(-2.0 * dmd * ady);
        // dL/dA = dmd * d d^T, then dL/dSigma2d = -A (dL/dA) A
        const double ga = dmd * dx_ * dx_;
        const double gb = dmd * dx_ * dy_;  // one off-diagonal
        const double gc = dmd * dy_ * dy_;
        // -(A G A) for symmetric A, G (G with both off-diagonals = gb)
        const double aga = s.ia * ga + s.ib * gb, agb = s.ia * gb + s.ib * gc;
        const double agc = s.ib * ga + s.ic * gb, agd = s.ib * gb + s.ic * gc;
        gr.dca += static_cast<float>(-(aga * s.ia + agb * s.ib));
        gr.dcb += static_cast<float>(-(aga * s.ib + agb * s.ic) * 2.0);
        gr.dcc += static_cast<float>(-(agc * s.ib + agd * s.ic));
      }
    }
  }
}

// Pulls screen-space gradients back to 3D: means, rotations, scales,
// opacities, colors (each laid out as in GaussianSet).
inline void project_backward(const GaussianSet& g, const std::vector<Splat2D>& splats,
                             const std::vector<SplatGrad>& grads, const Camera& cam,
                             float* dmeans, float* drot, float* dscale, float* dopacity,
                             float* dcolor) {
  const size_t m = g.size();
  for (size_t i = 0; i < m; ++i) {
    if (!splats[i].valid) continue;
    const Splat2D& s = splats[i];
    const SplatGrad& gr = grads[i];

    dcolor[i * 3 + 0] += gr.dcolor[0];
    dcolor[i * 3 + 1] += gr.dcolor[1];
    dcolor[i * 3 + 2] += gr.dcolor[2];
    dopacity[i] += gr.dopacity;

    const float inv_z = 1.0f / s.tz;
    Vec3 dt(gr.dmx * cam.fx * inv_z, gr.dmy * cam.fy * inv_z,
            -gr.dmx * cam.fx * s.tx * inv_z * inv_z - gr.dmy * cam.fy * s.ty * inv_z * inv_z);

    // cov2d = V Sigma V^T + blur I with V = J R.
    Eigen::Matrix2f g2;
    g2 << gr.dca, 0.5f * gr.dcb, 0.5f * gr.dcb, gr.dcc;
    Eigen::Matrix<float, 2, 3> jac;
    jac << cam.fx * inv_z, 0, -cam.fx * s.tx * inv_z * inv_z,
        0, cam.fy * inv_z, -cam.fy * s.ty * inv_z * inv_z;
    const Eigen::Matrix<float, 2, 3> v = jac * cam.R;
    const Mat3 sigma = covariance_matrix(g.rotations.data() + i * 4, g.scales.data() + i * 3);

    const Mat3 dsigma = v.transpose() * g2 * v;
    const Eigen::Matrix<float, 2, 3> dv = 2.0f * g2 * v * sigma;
    const Eigen::Matrix<float, 2, 3> djac = dv * cam.R.transpose();

    // J's dependence on the camera-space center.
    const float iz2 = inv_z * inv_z;
    const float iz3 = iz2 * inv_z;
    dt.x() += djac(0, 2) * (-cam.fx * iz2);
    dt.y() += djac(1, 2) * (-cam.fy * iz2);
    dt.z() += djac(0, 0) * (-cam.fx * iz2) + djac(1, 1) * (-cam.fy * iz2) +
              djac(0, 2) * (2.0f * cam.fx * s.tx * iz3) + djac(1, 2) * (2.0f * cam.fy * s.ty * iz3);

    const Vec3 dmu = cam.R.transpose() * dt;
    dmeans[i * 3 + 0] += dmu.x();
    dmeans[i * 3 + 1] += dmu.y();
    dmeans[i * 3 + 2] += dmu.z();

    // Sigma = R diag(s^2) R^T
    const float* q = g.rotations.data() + i * 4;
    const float* sc = g.scales.data() + i * 3;
    const Mat3 rot = rotation_from_quat(q[0], q[1], q[2], q[3]);
    for (int k = 0; k < 3; ++k) {
      const Vec3 col = rot.col(k);
      const float d_s2 = col.dot(dsigma * col);
      dscale[i * 3 + k] += d_s2 * 2.0f * sc[k];
    }
    const Vec3 s2(sc[0] * sc[0], sc[1] * sc[1], sc[2] * sc[2]);
    const Mat3 drot_mat = 2.0f * dsigma * rot * s2.asDiagonal();

    const float w = q[0], xq = q[1], yq = q[2], zq = q[3];
    Mat3 dw, dx, dy, dz;
    dw << 0, -zq, yq, zq, 0, -xq, -yq, xq, 0;
    dx << 0, yq, zq, yq, -2 * xq, -w, zq, w, -2 * xq;
    dy << -2 * yq, xq, w, xq, 0, zq, -w, zq, -2 * yq;
    dz << -2 * zq, -w, xq, w, -2 * zq, yq, xq, yq, 0;
    drot[i * 4 + 0] += 2.0f * (drot_mat.cwiseProduct(dw)).sum();
    drot[i * 4 + 1] += 2.0f * (drot_mat.cwiseProduct(dx)).sum();
    drot[i * 4 + 2] += 2.0f * (drot_mat.cwiseProduct(dy)).sum();
    drot[i * 4 + 3] += 2.0f * (drot_mat.cwiseProduct(dz)).sum();
  }
}

// ---------------------------------------------------------------------------
// Oracle: per pixel, walks every Gaussian in exact depth order and composites
// in double precision. No bounding boxes, no early termination. Shares only
// the output definition with the fast path above, not its code.

inline RenderedImage render_brute_force(const GaussianSet& g, const Camera& cam,
                                        const RenderConfig& cfg = {}) {
  const size_t m = g.size();
  struct P {
    bool valid = false;
    double mx, my, ia, ib, ic;
    double color[3];
    double opacity;
    float sort_z;
  };
  std::vector<P> pr(m);
  Eigen::Matrix3d rd = cam.R.cast<double>();
  Eigen::Vector3d td = cam.t.cast<double>();
  for (size_t i = 0; i < m; ++i) {
    Eigen::Vector3d mu(g.means[i * 3], g.means[i * 3 + 1], g.means[i * 3 + 2]);
    Eigen::Vector3d t = rd * mu + td;
    if (t.z() <= cfg.near) continue;
    P& p = pr[i];
    p.sort_z = static_cast<float>(t.z());
    const double iz = 1.0 / t.z();
    p.mx = cam.fx * t.x() * iz + cam.cx;
    p.my = cam.fy * t.y() * iz + cam.cy;
    Eigen::Matrix<double, 2, 3> jac;
    jac << cam.fx * iz, 0, -cam.fx * t.x() * iz * iz, 0, cam.fy * iz, -cam.fy * t.y() * iz * iz;
    const float* q = g.rotations.data() + i * 4;
    Eigen::Matrix3d rot;
    {
      double w = q[0], x = q[1], y = q[2], z = q[3];
      rot << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
          2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
          2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    }
    Eigen::Vector3d s2(static_cast<double>(g.scales[i * 3]) * g.scales[i * 3],
                       static_cast<double>(g.scales[i * 3 + 1]) * g.scales[i * 3 + 1],
                       static_cast<double>(g.scales[i * 3 + 2]) * g.scales[i * 3 + 2]);
    Eigen::Matrix3d sigma = rot * s2.asDiagonal() * rot.transpose();
    Eigen::Matrix<double, 2, 3> v = jac * rd;
    Eigen::Matrix2d cov = v * sigma * v.transpose();
    cov(0, 0) += cfg.blur;
    cov(1, 1) += cfg.blur;
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
    if (!(det > 0.0)) throw std::domain_error("projected covariance is not positive definite");
    p.ia = cov(1, 1) / det;
    p.ib = -0.5 * (cov(0, 1) + cov(1, 0)) / det;
    p.ic = cov(0, 0) / det;
    p.opacity = g.opacities[i];
    p.color[0] = g.colors[i * 3];
    p.color[1] = g.colors[i * 3 + 1];
    p.color[2] = g.colors[i * 3 + 2];
    p.valid = true;
  }

  std::vector<int> order;
  for (size_t i = 0; i < m; ++i)
    if (pr[i].valid) order.push_back(static_cast<int>(i));
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return pr[a].sort_z < pr[b].sort_z; });

  RenderedImage out;
  out.height = cam.height;
  out.width = cam.width;
  out.color.assign(static_cast<size_t>(cam.height) * cam.width * 3, 0.0f);
  out.alpha.assign(static_cast<size_t>(cam.height) * cam.width, 0.0f);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      double t_acc = 1.0, c0 = 0, c1 = 0, c2 = 0;
      for (int oi : order) {
        const P& p = pr[oi];
        const double dx = px - p.mx, dy = py - p.my;
        const double md = p.ia * dx * dx + 2.0 * p.ib * dx * dy + p.ic * dy * dy;
        const double a = std::min(p.opacity * std::exp(-0.5 * md),
                                  static_cast<double>(cfg.alpha_max));
        if (a < cfg.cutoff) continue;
        c0 += p.color[0] * a * t_acc;
        c1 += p.color[1] * a * t_acc;
        c2 += p.color[2] * a * t_acc;
        t_acc *= 1.0 - a;
      }
      c0 += cfg.background.x() * t_acc;
      c1 += cfg.background.y() * t_acc;
      c2 += cfg.background.z() * t_acc;
      const size_t idx = static_cast<size_t>(y) * cam.width + x;
      out.color[idx * 3 + 0] = static_cast<float>(c0);
      out.color[idx * 3 + 1] = static_cast<float>(c1);
      out.color[idx * 3 + 2] = static_cast<float>(c2);
      out.alpha[idx] = static_cast<float>(1.0 - t_acc);
    }
  return out;
}

}  // namespace stylesplat
