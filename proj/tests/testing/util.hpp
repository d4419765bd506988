#pragma once

// Shared helpers for the test binaries: finite-difference gradient checks and
// small synthetic inputs.

#include <cmath>
#include <functional>
#include <vector>

#include "stylesplat/core/rng.hpp"
#include "stylesplat/core/tensor.hpp"
#include "stylesplat/data/camera.hpp"
#include "stylesplat/gaussians/gaussians.hpp"

namespace stylesplat::testing {

struct FdReport {
  double max_rel = 0.0;
  int checked = 0;
  int worst_index = -1;
  double worst_analytic = 0.0;
  double worst_fd = 0.0;
};

// Central-difference check of `analytic` (gradient of a scalar w.r.t. `leaf`)
// against re-evaluations of `eval`, which must recompute the scalar from the
// leaf's current values. The whole pipeline runs in float32, so differences
// carry rounding noise of about eps*|f|/h; probes where both |fd| and
// |analytic| sit below `min_mag` are skipped as carrying no signal at that
// precision.
inline FdReport fd_check(Tensor& leaf, const std::vector<float>& analytic,
                         const std::function<double()>& eval, const std::vector<int>& indices,
                         float h, double min_mag = 1e-4) {
  FdReport rep;
  float* data = leaf.data();
  for (int idx : indices) {
    const float saved = data[idx];
    data[idx] = saved + h;
    const double f_plus = eval();
    data[idx] = saved - h;
    const double f_minus = eval();
    data[idx] = saved;
    const double fd = (f_plus - f_minus) / (2.0 * h);
    const double an = analytic[idx];
    if (std::abs(fd) < min_mag && std::abs(an) < min_mag) continue;
    const double rel = std::abs(an - fd) / std::max(std::abs(an), std::abs(fd));
    ++rep.checked;
    if (rel > rep.max_rel) {
      rep.max_rel = rel;
      rep.worst_index = idx;
      rep.worst_analytic = an;
      rep.worst_fd = fd;
    }
  }
  return rep;
}

inline std::vector<int> all_indices(const Tensor& t) {
  std::vector<int> idx(t.numel());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  return idx;
}

// A loose cloud of Gaussians in front of a default camera at the origin.
inline GaussianSet random_gaussians(Rng& rng, int count, float z_lo = 1.5f, float z_hi = 4.0f) {
  GaussianSet g;
  g.resize(count);
  for (int i = 0; i < count; ++i) {
    g.means[i * 3 + 0] = rng.uniform(-1.2f, 1.2f);
    g.means[i * 3 + 1] = rng.uniform(-1.2f, 1.2f);
    g.means[i * 3 + 2] = rng.uniform(z_lo, z_hi);
    g.opacities[i] = rng.uniform(0.15f, 0.9f);
    float q[4];
    float norm = 0;
    for (auto& v : q) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (int k = 0; k < 4; ++k) g.rotations[i * 4 + k] = q[k] / norm;
    for (int k = 0; k < 3; ++k) g.scales[i * 3 + k] = rng.uniform(0.02f, 0.25f);
    for (int k = 0; k < 3; ++k) g.colors[i * 3 + k] = rng.uniform(0.05f, 0.95f);
  }
  return g;
}

inline Camera default_camera(int size = 64) {
  Camera cam;
  cam.width = size;
  cam.height = size;
  cam.fx = cam.fy = static_cast<float>(size);
  cam.cx = cam.cy = size * 0.5f;
  return cam;
}

}  // namespace stylesplat::testing
