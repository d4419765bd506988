#pragma once

// Analytic scenes: spheres, axis-aligned boxes and finite rectangles with
// procedural solid textures and view-independent Lambertian shading, rendered
// by exact ray casting. This renderer shares no code with the Gaussian
// rasterizer so it can serve as independent supervision.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "stylesplat/core/image.hpp"
#include "stylesplat/core/rng.hpp"
#include "stylesplat/data/camera.hpp"

namespace stylesplat {

constexpr float kBackgroundDepth = 1.0e6f;
inline Vec3 background_color() { return Vec3(0.5f, 0.5f, 0.5f); }

// ---------------------------------------------------------------------------
// Solid procedural textures: color is a function of the 3D hit point, so the
// same surface point looks identical from every view.

struct Texture {
  enum class Kind { Solid, Checker, Stripes, Noise } kind = Kind::Solid;
  Vec3 color_a = Vec3(0.8f, 0.8f, 0.8f);
  Vec3 color_b = Vec3(0.2f, 0.2f, 0.2f);
  float scale = 1.0f;
  Vec3 dir = Vec3(1, 0, 0);  // stripe direction
  uint64_t seed = 0;         // noise lattice seed
};

namespace detail_tex {

inline float lattice(uint64_t seed, int x, int y, int z) {
  uint64_t h = seed;
  h = hash_combine(h, static_cast<uint64_t>(static_cast<int64_t>(x) + (1 << 20)));
  h = hash_combine(h, static_cast<uint64_t>(static_cast<int64_t>(y) + (1 << 20)));
  h = hash_combine(h, static_cast<uint64_t>(static_cast<int64_t>(z) + (1 << 20)));
  return static_cast<float>(h >> 40) * 0x1.0p-24f;
}

inline float smoothstep(float t) { return t * t * (3.0f - 2.0f * t); }

// Trilinearly interpolated value noise in [0,1].
inline float value_noise(uint64_t seed, const Vec3& p) {
  int x0 = static_cast<int>(std::floor(p.x())), y0 = static_cast<int>(std::floor(p.y())),
      z0 = static_cast<int>(std::floor(p.z()));
  float tx = smoothstep(p.x() - x0), ty = smoothstep(p.y() - y0), tz = smoothstep(p.z() - z0);
  float acc = 0.0f;
  for (int dz = 0; dz <= 1; ++dz)
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx) {
        float w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
        acc += w * lattice(seed, x0 + dx, y0 + dy, z0 + dz);
      }
  return acc;
}

}  // namespace detail_tex

inline Vec3 texture_color(const Texture& t, const Vec3& p) {
  switch (t.kind) {
    case Texture::Kind::Solid:
      return t.color_a;
    case Texture::Kind::Checker: {
      Vec3 q = p * t.scale;
      int s = static_cast<int>(std::floor(q.x())) + static_cast<int>(std::floor(q.y())) +
              static_cast<int>(std::floor(q.z()));
      return ((s & 1) == 0) ? t.color_a : t.color_b;
    }
    case Texture::Kind::Stripes: {
      float phase = t.dir.dot(p) * t.scale * 6.2831853f;
      float w = 0.5f + 0.5f * std::sin(phase);
      return t.color_a * w + t.color_b * (1.0f - w);
    }
    case Texture::Kind::Noise: {
      float w = detail_tex::value_noise(t.seed, p * t.scale);
      return t.color_a * w + t.color_b * (1.0f - w);
    }
  }
  return t.color_a;
}

// ---------------------------------------------------------------------------
// Primitives

struct Primitive {
  enum class Kind { Sphere, Box, Rect } kind = Kind::Sphere;
  Vec3 center = Vec3::Zero();
  float radius = 1.0f;              // sphere
  Vec3 half_extents = Vec3::Ones();  // box
  Vec3 normal = Vec3(0, 1, 0);      // rect
  Vec3 axis_u = Vec3(1, 0, 0);      // rect in-plane axes (unit, orthogonal)
  Vec3 axis_v = Vec3(0, 0, 1);
  Vec2 half_size = Vec2(1, 1);      // rect extent along axis_u/axis_v
  Texture tex;
};

struct Hit {
  float t = std::numeric_limits<float>::infinity();
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::Zero();
  int prim = -1;
};

// Nearest intersection of the unit ray o + t*d with a primitive, t > eps.
inline std::optional<Hit> intersect(const Primitive& pr, const Vec3& o, const Vec3& d,
                                    float eps = 1e-4f) {
  switch (pr.kind) {
    case Primitive::Kind::Sphere: {
      Vec3 oc = o - pr.center;
      float b = oc.dot(d);
      float c = oc.squaredNorm() - pr.radius * pr.radius;
      float disc = b * b - c;
      if (disc < 0.0f) return std::nullopt;
      float sq = std::sqrt(disc);
      float t = -b - sq;
      if (t <= eps) t = -b + sq;
      if (t <= eps) return std::nullopt;
      Hit h;
      h.t = t;
      h.point = o + t * d;
      h.normal = (h.point - pr.center).normalized();
      return h;
    }
    case Primitive::Kind::Box: {
      Vec3 lo = pr.center - pr.half_extents;
      Vec3 hi = pr.center + pr.half_extents;
      float tmin = -std::numeric_limits<float>::infinity();
      float tmax = std::numeric_limits<float>::infinity();
      int axis_min = -1;
      for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-12f) {
          if (o[a] < lo[a] || o[a] > hi[a]) return std::nullopt;
          continue;
        }
        float inv = 1.0f / d[a];
        float t0 = (lo[a] - o[a]) * inv;
        float t1 = (hi[a] - o[a]) * inv;
        if (t0 > t1) std::swap(t0, t1);
        if (t0 > tmin) {
          tmin = t0;
          axis_min = a;
        }
        tmax = std::min(tmax, t1);
        if (tmin > tmax) return std::nullopt;
      }
      float t = tmin;
      bool inside = tmin <= eps;
      if (inside) t = tmax;
      if (t <= eps) return std::nullopt;
      Hit h;
      h.t = t;
      h.point = o + t * d;
      if (inside) {
        // Exit face: pick the axis whose slab boundary we crossed.
        Vec3 rel = (h.point - pr.center).cwiseQuotient(pr.half_extents);
        int a;
        rel.cwiseAbs().maxCoeff(&a);
        h.normal = Vec3::Zero();
        h.normal[a] = rel[a] > 0 ? -1.0f : 1.0f;  // inward-facing
      } else {
        h.normal = Vec3::Zero();
        h.normal[axis_min] = d[axis_min] > 0 ? -1.0f : 1.0f;
      }
      return h;
    }
    case Primitive::Kind::Rect: {
      float denom = pr.normal.dot(d);
      if (std::abs(denom) < 1e-9f) return std::nullopt;
      float t = pr.normal.dot(pr.center - o) / denom;
      if (t <= eps) return std::nullopt;
      Vec3 p = o + t * d;
      Vec3 rel = p - pr.center;
      float u = rel.dot(pr.axis_u);
      float v = rel.dot(pr.axis_v);
      if (std::abs(u) > pr.half_size.x() || std::abs(v) > pr.half_size.y()) return std::nullopt;
      Hit h;
      h.t = t;
      h.point = p;
      h.normal = pr.normal;
      return h;
    }
  }
  return std::nullopt;
}

inline std::optional<Hit> intersect_scene(const std::vector<Primitive>& prims, const Vec3& o,
                                          const Vec3& d) {
  std::optional<Hit> best;
  for (size_t i = 0; i < prims.size(); ++i) {
    auto h = intersect(prims[i], o, d);
    if (h && (!best || h->t < best->t)) {
      h->prim = static_cast<int>(i);
      best = h;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Shading and rendering

// Fixed directional light plus ambient; depends only on the surface, never on
// the viewing direction, so multi-view colors are consistent.
inline Vec3 shade(const std::vector<Primitive>& prims, const Hit& h) {
  static const Vec3 light = Vec3(0.35f, 0.75f, -0.25f).normalized();
  const Primitive& pr = prims[h.prim];
  Vec3 albedo = texture_color(pr.tex, h.point);
  float lambert = std::abs(h.normal.dot(light));
  float k = 0.45f + 0.55f * lambert;
  return albedo * k;
}

struct GroundTruth {
  Image image;
  std::vector<float> depth;  // h*w, exact ray-surface distance, sentinel on miss
};

inline GroundTruth render_ground_truth(const std::vector<Primitive>& prims, const Camera& cam) {
  GroundTruth out;
  out.image = Image(cam.height, cam.width);
  out.depth.assign(static_cast<size_t>(cam.height) * cam.width, kBackgroundDepth);
  const Vec3 origin = cam.position();
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      Vec3 dir = cam.pixel_ray(x, y);
      auto h = intersect_scene(prims, origin, dir);
      Vec3 c = background_color();
      if (h) {
        c = shade(prims, *h);
        out.depth[static_cast<size_t>(y) * cam.width + x] = h->t;
      }
      float* p = out.image.px(y, x);
      p[0] = clamp01(c.x());
      p[1] = clamp01(c.y());
      p[2] = clamp01(c.z());
    }
  }
  return out;
}

}  // namespace stylesplat
