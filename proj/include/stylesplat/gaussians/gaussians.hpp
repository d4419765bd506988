#pragma once

// 3D Gaussian sets. Raw network outputs live on the tape as tensors; the
// plain array form is used by the oracle renderer and file io.
//
// Activation of raw predictions:
//   centers   (x, y, exp(z_raw) * z_scale), expressed in the first input
//             camera's frame
//   opacity   sigmoid
//   rotation  L2-normalized quaternion (w, x, y, z)
//   scale     s_min + softplus
//   color     sigmoid
//
// Covariance of one Gaussian: R(q) diag(s)^2 R(q)^T.

#include <cstdint>
#include <fstream>

#include "stylesplat/core/serialize.hpp"
#include "stylesplat/core/tensor.hpp"
#include "stylesplat/core/tensor_ops.hpp"
#include "stylesplat/data/camera.hpp"

namespace stylesplat {

struct GaussianSet {
  std::vector<float> means;      // M*3
  std::vector<float> opacities;  // M
  std::vector<float> rotations;  // M*4, unit (w,x,y,z)
  std::vector<float> scales;     // M*3, positive
  std::vector<float> colors;     // M*3, in [0,1]

  size_t size() const { return opacities.size(); }

  void resize(size_t m) {
    means.resize(m * 3);
    opacities.resize(m);
    rotations.resize(m * 4);
    scales.resize(m * 3);
    colors.resize(m * 3);
  }
};

// Tape-resident form; shapes [M,3], [M], [M,4], [M,3], [M,3].
struct GaussianTensors {
  Tensor means;
  Tensor opacities;
  Tensor rotations;
  Tensor scales;
  Tensor colors;

  int count() const { return means.dim(0); }

  GaussianSet detach() const {
    GaussianSet g;
    g.means = means.vec();
    g.opacities = opacities.vec();
    g.rotations = rotations.vec();
    g.scales = scales.vec();
    g.colors = colors.vec();
    return g;
  }
};

struct ActivationConfig {
  float z_scale = 1.0f;
  float s_min = 1e-4f;
};

// raw_centers [M,3], raw_attribs [M,8] = (quat 4, scale 3, opacity 1),
// raw_colors [M,3].
inline GaussianTensors activate_gaussians(const Tensor& raw_centers, const Tensor& raw_attribs,
                                          const Tensor& raw_colors,
                                          const ActivationConfig& cfg = {}) {
  if (raw_centers.rank() != 2 || raw_centers.dim(1) != 3)
    throw std::invalid_argument("activate_gaussians: centers must be [M,3]");
  if (raw_attribs.rank() != 2 || raw_attribs.dim(1) != 8)
    throw std::invalid_argument("activate_gaussians: attribs must be [M,8]");
  if (raw_colors.rank() != 2 || raw_colors.dim(1) != 3)
    throw std::invalid_argument("activate_gaussians: colors must be [M,3]");
  const int m = raw_centers.dim(0);
  if (raw_attribs.dim(0) != m || raw_colors.dim(0) != m)
    throw std::invalid_argument("activate_gaussians: row count mismatch");

  GaussianTensors g;
  Tensor xy = slice_cols(raw_centers, 0, 2);
  Tensor z = scale(exp_t(slice_cols(raw_centers, 2, 3)), cfg.z_scale);
  g.means = concat_cols({xy, z});
  g.rotations = normalize_rows(slice_cols(raw_attribs, 0, 4));
  g.scales = add_scalar(softplus(slice_cols(raw_attribs, 4, 7)), cfg.s_min);
  g.opacities = reshape(sigmoid(slice_cols(raw_attribs, 7, 8)), {m});
  g.colors = sigmoid(raw_colors);
  return g;
}

inline Mat3 rotation_from_quat(float w, float x, float y, float z) {
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

inline Mat3 covariance_matrix(const float* quat, const float* scl) {
  Mat3 r = rotation_from_quat(quat[0], quat[1], quat[2], quat[3]);
  Vec3 s2(scl[0] * scl[0], scl[1] * scl[1], scl[2] * scl[2]);
  return r * s2.asDiagonal() * r.transpose();
}

// ---------------------------------------------------------------------------
// Binary export: magic "SGS1", uint64 count, then 14 float32 per Gaussian in
// the order (mean xyz, opacity, rotation wxyz, scale xyz, color rgb).

inline void save_gaussians(const std::filesystem::path& path, const GaussianSet& g) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write gaussians: " + path.string());
  f.write("SGS1", 4);
  write_pod<uint64_t>(f, g.size());
  for (size_t i = 0; i < g.size(); ++i) {
    write_f32s(f, g.means.data() + i * 3, 3);
    write_f32s(f, g.opacities.data() + i, 1);
    write_f32s(f, g.rotations.data() + i * 4, 4);
    write_f32s(f, g.scales.data() + i * 3, 3);
    write_f32s(f, g.colors.data() + i * 3, 3);
  }
  if (!f) throw DataError("write failed: " + path.string());
}

inline GaussianSet load_gaussians(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open gaussians: " + path.string());
  char magic[4];
  read_bytes(f, magic, 4);
  if (std::string(magic, 4) != "SGS1")
    throw DataError("bad gaussian file magic: " + path.string());
  const uint64_t m = read_pod<uint64_t>(f);
  GaussianSet g;
  g.resize(m);
  for (uint64_t i = 0; i < m; ++i) {
    read_f32s(f, g.means.data() + i * 3, 3);
    read_f32s(f, g.opacities.data() + i, 1);
    read_f32s(f, g.rotations.data() + i * 4, 4);
    read_f32s(f, g.scales.data() + i * 3, 3);
    read_f32s(f, g.colors.data() + i * 3, 3);
  }
  return g;
}

}  // namespace stylesplat
