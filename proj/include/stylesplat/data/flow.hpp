#pragma once

// Exact optical flow between two views of an analytic scene, derived by
// unprojecting view A's depth and reprojecting into view B. A pixel is valid
// when it lands inside B's frame and is not occluded there, judged by
// comparing its distance to B against B's stored depth at the nearest pixel
// (1% relative tolerance).

#include <cmath>

#include "stylesplat/data/record.hpp"

namespace stylesplat {

inline FlowField compute_gt_flow(const ViewSample& a, const ViewSample& b,
                                 float rel_depth_tol = 0.01f) {
  const Camera& ca = a.camera;
  const Camera& cb = b.camera;
  const int h = ca.height, w = ca.width;
  FlowField out;
  out.height = h;
  out.width = w;
  out.flow.assign(static_cast<size_t>(h) * w * 2, 0.0f);
  out.valid.assign(static_cast<size_t>(h) * w, 0);

  const Vec3 origin_a = ca.position();
  const Vec3 origin_b = cb.position();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t idx = static_cast<size_t>(y) * w + x;
      const float t = a.depth[idx];
      if (!(t > 0.0f) || t >= kBackgroundDepth) continue;
      const Vec3 point = origin_a + t * ca.pixel_ray(x, y);
      const Vec3 pc = cb.world_to_cam(point);
      if (pc.z() <= 1e-6f) continue;
      const Vec2 q = cb.project_cam(pc);
      out.flow[idx * 2 + 0] = q.x() - (x + 0.5f);
      out.flow[idx * 2 + 1] = q.y() - (y + 0.5f);
      if (q.x() < 0.0f || q.x() >= w || q.y() < 0.0f || q.y() >= h) continue;
      const int bx = std::min(static_cast<int>(q.x()), w - 1);
      const int by = std::min(static_cast<int>(q.y()), h - 1);
      const float stored = b.depth[static_cast<size_t>(by) * w + bx];
      if (stored >= kBackgroundDepth) continue;
      const float dist_b = (point - origin_b).norm();
      if (std::abs(dist_b - stored) > rel_depth_tol * stored) continue;
      out.valid[idx] = 1;
    }
  }
  return out;
}

inline float flow_valid_fraction(const FlowField& f) {
  if (f.valid.empty()) return 0.0f;
  size_t n = 0;
  for (uint8_t v : f.valid) n += v;
  return static_cast<float>(n) / f.valid.size();
}

}  // namespace stylesplat
