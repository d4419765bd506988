#pragma once

// Procedural corpus generation: room scenes with textured primitives, smooth
// orbital camera trajectories, exact depth and flow, and a corpus of abstract
// style images (palette noise, stripes, blobs, gradient washes).

#include <string>
#include <vector>

#include "stylesplat/core/rng.hpp"
#include "stylesplat/data/flow.hpp"
#include "stylesplat/data/record.hpp"

namespace stylesplat {

struct SceneGenConfig {
  int image_size = 64;
  int n_frames = 16;
  int min_objects = 5;   // free objects, on top of the 6 room walls
  int max_objects = 9;
  float focal = 1.0f;    // focal length as a multiple of image size
};

namespace detail_gen {

inline Vec3 random_color(Rng& rng) {
  return Vec3(rng.uniform(0.08f, 0.95f), rng.uniform(0.08f, 0.95f), rng.uniform(0.08f, 0.95f));
}

inline Texture random_texture(Rng& rng, float scale_lo, float scale_hi) {
  Texture t;
  const int k = rng.below(4);
  t.kind = k == 0   ? Texture::Kind::Solid
           : k == 1 ? Texture::Kind::Checker
           : k == 2 ? Texture::Kind::Stripes
                    : Texture::Kind::Noise;
  t.color_a = random_color(rng);
  t.color_b = random_color(rng);
  t.scale = rng.uniform(scale_lo, scale_hi);
  float az = rng.uniform(0.0f, 6.2831853f);
  float el = rng.uniform(-0.8f, 0.8f);
  t.dir = Vec3(std::cos(az) * std::cos(el), std::sin(el), std::sin(az) * std::cos(el));
  t.seed = rng.next_u64();
  return t;
}

inline Primitive wall(const Vec3& center, const Vec3& normal, const Vec3& u, const Vec3& v,
                      const Vec2& half, Rng& rng) {
  Primitive p;
  p.kind = Primitive::Kind::Rect;
  p.center = center;
  p.normal = normal;
  p.axis_u = u;
  p.axis_v = v;
  p.half_size = half;
  p.tex = random_texture(rng, 0.25f, 0.8f);
  // Keep walls lower-contrast than the objects in front of them.
  p.tex.color_b = p.tex.color_a * 0.55f + p.tex.color_b * 0.45f;
  return p;
}

}  // namespace detail_gen

// Inward-facing walls of a box room plus `n_objects` random primitives.
inline std::vector<Primitive> generate_room(Rng& rng, int n_objects) {
  using detail_gen::wall;
  const float rx = 3.0f, ry = 2.2f, rz = 3.0f;
  std::vector<Primitive> prims;
  prims.push_back(wall({0, -ry, 0}, {0, 1, 0}, {1, 0, 0}, {0, 0, 1}, {rx, rz}, rng));   // floor
  prims.push_back(wall({0, ry, 0}, {0, -1, 0}, {1, 0, 0}, {0, 0, 1}, {rx, rz}, rng));   // ceiling
  prims.push_back(wall({-rx, 0, 0}, {1, 0, 0}, {0, 0, 1}, {0, 1, 0}, {rz, ry}, rng));
  prims.push_back(wall({rx, 0, 0}, {-1, 0, 0}, {0, 0, 1}, {0, 1, 0}, {rz, ry}, rng));
  prims.push_back(wall({0, 0, -rz}, {0, 0, 1}, {1, 0, 0}, {0, 1, 0}, {rx, ry}, rng));
  prims.push_back(wall({0, 0, rz}, {0, 0, -1}, {1, 0, 0}, {0, 1, 0}, {rx, ry}, rng));

  for (int i = 0; i < n_objects; ++i) {
    Primitive p;
    const bool sphere = rng.below(2) == 0;
    p.kind = sphere ? Primitive::Kind::Sphere : Primitive::Kind::Box;
    p.center = Vec3(rng.uniform(-1.6f, 1.6f), rng.uniform(-1.5f, 1.0f), rng.uniform(-1.6f, 1.6f));
    if (sphere) {
      p.radius = rng.uniform(0.25f, 0.65f);
    } else {
      p.half_extents =
          Vec3(rng.uniform(0.2f, 0.55f), rng.uniform(0.2f, 0.55f), rng.uniform(0.2f, 0.55f));
    }
    p.tex = detail_gen::random_texture(rng, 0.8f, 2.2f);
    prims.push_back(p);
  }
  return prims;
}

// Smooth orbit inside the room: consecutive frames rotate well under 10
// degrees and keep most of the scene in view.
inline std::vector<Camera> generate_trajectory(Rng& rng, const SceneGenConfig& cfg) {
  const int n = cfg.n_frames;
  const float radius = rng.uniform(1.9f, 2.5f);
  const float base_az = rng.uniform(0.0f, 6.2831853f);
  const float span = rng.uniform(0.55f, 0.85f);  // radians over the whole trajectory
  const float height0 = rng.uniform(-0.5f, 0.5f);
  const float height_amp = rng.uniform(0.0f, 0.35f);
  const Vec3 target(rng.uniform(-0.25f, 0.25f), rng.uniform(-0.25f, 0.25f),
                    rng.uniform(-0.25f, 0.25f));

  std::vector<Camera> cams;
  cams.reserve(n);
  for (int i = 0; i < n; ++i) {
    const float s = n > 1 ? static_cast<float>(i) / (n - 1) : 0.0f;
    const float az = base_az + span * s;
    const float y = height0 + height_amp * std::sin(s * 6.2831853f);
    const Vec3 eye(radius * std::cos(az), y, radius * std::sin(az));
    Camera cam = look_at(eye, target);
    cam.width = cfg.image_size;
    cam.height = cfg.image_size;
    cam.fx = cam.fy = cfg.focal * cfg.image_size;
    cam.cx = cfg.image_size * 0.5f;
    cam.cy = cfg.image_size * 0.5f;
    cams.push_back(cam);
  }
  return cams;
}

inline SceneRecord generate_scene(uint64_t seed, const SceneGenConfig& cfg = {}) {
  Rng rng = Rng(seed).stream(0x5ce7e);
  SceneRecord rec;
  rec.id = "scene_" + std::to_string(seed);
  const int n_objects = cfg.min_objects + rng.below(cfg.max_objects - cfg.min_objects + 1);
  rec.primitives = generate_room(rng, n_objects);

  auto cams = generate_trajectory(rng, cfg);
  rec.views.resize(cams.size());
  for (size_t i = 0; i < cams.size(); ++i) {
    GroundTruth gt = render_ground_truth(rec.primitives, cams[i]);
    rec.views[i].camera = cams[i];
    rec.views[i].image = std::move(gt.image);
    rec.views[i].depth = std::move(gt.depth);
  }
  for (size_t i = 0; i + 1 < rec.views.size(); ++i)
    rec.views[i].flow_to_next = compute_gt_flow(rec.views[i], rec.views[i + 1]);
  return rec;
}

// ---------------------------------------------------------------------------
// Style images

namespace detail_gen {

inline Image style_palette_noise(Rng& rng, int size) {
  Image im(size, size);
  const int n_colors = 3 + rng.below(3);
  std::vector<Vec3> palette(n_colors);
  for (auto& c : palette) c = random_color(rng);
  const uint64_t seed = rng.next_u64();
  const float scale = rng.uniform(3.0f, 7.0f);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const Vec3 p(scale * x / size, scale * y / size, 0.5f);
      float v = detail_tex::value_noise(seed, p);
      float pos = clamp01(v) * (n_colors - 1);
      int i0 = std::min(static_cast<int>(pos), n_colors - 2);
      float f = pos - i0;
      Vec3 c = palette[i0] * (1 - f) + palette[i0 + 1] * f;
      float* px = im.px(y, x);
      px[0] = clamp01(c.x());
      px[1] = clamp01(c.y());
      px[2] = clamp01(c.z());
    }
  return im;
}

inline Image style_stripes(Rng& rng, int size) {
  Image im(size, size);
  const float angle = rng.uniform(0.0f, 3.14159265f);
  const float freq = rng.uniform(2.0f, 6.0f);
  const Vec3 a = random_color(rng), b = random_color(rng);
  const float cx = std::cos(angle), sy = std::sin(angle);
  const bool hard = rng.below(2) == 0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      float s = (cx * x + sy * y) / size * freq * 6.2831853f;
      float w = 0.5f + 0.5f * std::sin(s);
      if (hard) w = w > 0.5f ? 1.0f : 0.0f;
      Vec3 c = a * w + b * (1 - w);
      float* px = im.px(y, x);
      px[0] = clamp01(c.x());
      px[1] = clamp01(c.y());
      px[2] = clamp01(c.z());
    }
  return im;
}

inline Image style_blobs(Rng& rng, int size) {
  const Vec3 bg = random_color(rng);
  Image im(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      float* px = im.px(y, x);
      px[0] = bg.x();
      px[1] = bg.y();
      px[2] = bg.z();
    }
  const int n = 6 + rng.below(8);
  for (int i = 0; i < n; ++i) {
    const Vec3 c = random_color(rng);
    const float bx = rng.uniform(0.0f, static_cast<float>(size));
    const float by = rng.uniform(0.0f, static_cast<float>(size));
    const float r = rng.uniform(0.08f, 0.28f) * size;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        float d2 = ((x - bx) * (x - bx) + (y - by) * (y - by)) / (r * r);
        float w = std::exp(-0.5f * d2 * 4.0f);
        if (w < 0.02f) continue;
        float* px = im.px(y, x);
        px[0] = clamp01(px[0] * (1 - w) + c.x() * w);
        px[1] = clamp01(px[1] * (1 - w) + c.y() * w);
        px[2] = clamp01(px[2] * (1 - w) + c.z() * w);
      }
  }
  return im;
}

inline Image style_gradient(Rng& rng, int size) {
  Image im(size, size);
  Vec3 corners[4];
  for (auto& c : corners) c = random_color(rng);
  const uint64_t seed = rng.next_u64();
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      float u = static_cast<float>(x) / (size - 1);
      float v = static_cast<float>(y) / (size - 1);
      Vec3 c = corners[0] * (1 - u) * (1 - v) + corners[1] * u * (1 - v) +
               corners[2] * (1 - u) * v + corners[3] * u * v;
      float n = detail_tex::value_noise(seed, Vec3(6.0f * u, 6.0f * v, 0.0f)) - 0.5f;
      c += Vec3::Constant(0.08f * n);
      float* px = im.px(y, x);
      px[0] = clamp01(c.x());
      px[1] = clamp01(c.y());
      px[2] = clamp01(c.z());
    }
  return im;
}

}  // namespace detail_gen

inline std::vector<Image> generate_style_corpus(uint64_t seed, int count, int size) {
  std::vector<Image> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng rng = Rng(seed).stream(0x57a1e, static_cast<uint64_t>(i));
    switch (i % 4) {
      case 0: out.push_back(detail_gen::style_palette_noise(rng, size)); break;
      case 1: out.push_back(detail_gen::style_stripes(rng, size)); break;
      case 2: out.push_back(detail_gen::style_blobs(rng, size)); break;
      default: out.push_back(detail_gen::style_gradient(rng, size)); break;
    }
  }
  return out;
}

}  // namespace stylesplat
