#pragma once

// On-disk dataset layout:
//   root/manifest.json                 counts, image size, per-file crc32
//   root/scenes/<id>/primitives.json   analytic scene description
//   root/scenes/<id>/frame_<k>.png     8-bit RGB render
//   root/scenes/<id>/frame_<k>.cam     16 float32: R (row-major), t, fx fy cx cy
//   root/scenes/<id>/frame_<k>.depth   H*W float32
//   root/scenes/<id>/frame_<k>.flow    H*W*2 float32 then H*W uint8 validity
//                                      (absent on the last frame)
//   root/styles/style_<i>.png
// Loading verifies the manifest version and every checksum and raises
// distinct errors for a missing manifest, a version mismatch, and corrupt
// files.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stylesplat/core/serialize.hpp"
#include "stylesplat/data/record.hpp"

namespace stylesplat {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr int kDatasetVersion = 1;

struct Dataset {
  int image_size = 0;
  std::vector<SceneRecord> scenes;
  std::vector<Image> styles;
};

namespace detail_io {

inline std::string frame_stem(int k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%03d", k);
  return buf;
}

inline void write_camera(const fs::path& path, const Camera& cam) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write camera file: " + path.string());
  float vals[16];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) vals[r * 3 + c] = cam.R(r, c);
  for (int i = 0; i < 3; ++i) vals[9 + i] = cam.t[i];
  vals[12] = cam.fx;
  vals[13] = cam.fy;
  vals[14] = cam.cx;
  vals[15] = cam.cy;
  write_f32s(f, vals, 16);
}

inline Camera read_camera(const fs::path& path, int width, int height) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open camera file: " + path.string());
  float vals[16];
  read_f32s(f, vals, 16);
  Camera cam;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cam.R(r, c) = vals[r * 3 + c];
  for (int i = 0; i < 3; ++i) cam.t[i] = vals[9 + i];
  cam.fx = vals[12];
  cam.fy = vals[13];
  cam.cx = vals[14];
  cam.cy = vals[15];
  cam.width = width;
  cam.height = height;
  cam.validate();
  return cam;
}

inline json texture_to_json(const Texture& t) {
  return json{{"kind", static_cast<int>(t.kind)},
              {"color_a", {t.color_a.x(), t.color_a.y(), t.color_a.z()}},
              {"color_b", {t.color_b.x(), t.color_b.y(), t.color_b.z()}},
              {"scale", t.scale},
              {"dir", {t.dir.x(), t.dir.y(), t.dir.z()}},
              {"seed", t.seed}};
}

inline Texture texture_from_json(const json& j) {
  Texture t;
  t.kind = static_cast<Texture::Kind>(j.at("kind").get<int>());
  auto ca = j.at("color_a");
  t.color_a = Vec3(ca[0], ca[1], ca[2]);
  auto cb = j.at("color_b");
  t.color_b = Vec3(cb[0], cb[1], cb[2]);
  t.scale = j.at("scale");
  auto d = j.at("dir");
  t.dir = Vec3(d[0], d[1], d[2]);
  t.seed = j.at("seed");
  return t;
}

inline json primitive_to_json(const Primitive& p) {
  return json{{"kind", static_cast<int>(p.kind)},
              {"center", {p.center.x(), p.center.y(), p.center.z()}},
              {"radius", p.radius},
              {"half_extents", {p.half_extents.x(), p.half_extents.y(), p.half_extents.z()}},
              {"normal", {p.normal.x(), p.normal.y(), p.normal.z()}},
              {"axis_u", {p.axis_u.x(), p.axis_u.y(), p.axis_u.z()}},
              {"axis_v", {p.axis_v.x(), p.axis_v.y(), p.axis_v.z()}},
              {"half_size", {p.half_size.x(), p.half_size.y()}},
              {"texture", texture_to_json(p.tex)}};
}

inline Primitive primitive_from_json(const json& j) {
  auto vec3 = [](const json& a) { return Vec3(a[0], a[1], a[2]); };
  Primitive p;
  p.kind = static_cast<Primitive::Kind>(j.at("kind").get<int>());
  p.center = vec3(j.at("center"));
  p.radius = j.at("radius");
  p.half_extents = vec3(j.at("half_extents"));
  p.normal = vec3(j.at("normal"));
  p.axis_u = vec3(j.at("axis_u"));
  p.axis_v = vec3(j.at("axis_v"));
  auto hs = j.at("half_size");
  p.half_size = Vec2(hs[0], hs[1]);
  p.tex = texture_from_json(j.at("texture"));
  return p;
}

}  // namespace detail_io

inline void save_dataset(const Dataset& ds, const fs::path& root) {
  fs::create_directories(root / "scenes");
  fs::create_directories(root / "styles");
  json checksums = json::object();
  auto record_file = [&](const fs::path& p) {
    checksums[fs::relative(p, root).generic_string()] = crc32_of_file(p);
  };

  json scene_list = json::array();
  for (const SceneRecord& rec : ds.scenes) {
    const fs::path dir = root / "scenes" / rec.id;
    fs::create_directories(dir);

    json prims = json::array();
    for (const Primitive& p : rec.primitives) prims.push_back(detail_io::primitive_to_json(p));
    {
      std::ofstream f(dir / "primitives.json", std::ios::trunc);
      f << prims.dump(1) << "\n";
    }
    record_file(dir / "primitives.json");

    for (size_t k = 0; k < rec.views.size(); ++k) {
      const ViewSample& v = rec.views[k];
      const std::string stem = detail_io::frame_stem(static_cast<int>(k));
      save_png(dir / (stem + ".png"), v.image);
      detail_io::write_camera(dir / (stem + ".cam"), v.camera);
      write_file_bytes(dir / (stem + ".depth"), v.depth.data(), v.depth.size() * sizeof(float));
      if (!v.flow_to_next.empty()) {
        std::ofstream f(dir / (stem + ".flow"), std::ios::binary | std::ios::trunc);
        write_f32s(f, v.flow_to_next.flow.data(), v.flow_to_next.flow.size());
        write_bytes(f, v.flow_to_next.valid.data(), v.flow_to_next.valid.size());
      }
      record_file(dir / (stem + ".png"));
      record_file(dir / (stem + ".cam"));
      record_file(dir / (stem + ".depth"));
      if (!v.flow_to_next.empty()) record_file(dir / (stem + ".flow"));
    }
    scene_list.push_back({{"id", rec.id}, {"n_frames", rec.views.size()}});
  }

  json style_list = json::array();
  for (size_t i = 0; i < ds.styles.size(); ++i) {
    const std::string name = "style_" + std::to_string(i) + ".png";
    save_png(root / "styles" / name, ds.styles[i]);
    record_file(root / "styles" / name);
    style_list.push_back(name);
  }

  json manifest{{"version", kDatasetVersion},
                {"image_size", ds.image_size},
                {"n_scenes", ds.scenes.size()},
                {"n_styles", ds.styles.size()},
                {"scenes", scene_list},
                {"styles", style_list},
                {"checksums", checksums}};
  std::ofstream f(root / "manifest.json", std::ios::trunc);
  if (!f) throw DataError("cannot write manifest: " + (root / "manifest.json").string());
  f << manifest.dump(1) << "\n";
}

inline Dataset load_dataset(const fs::path& root) {
  const fs::path manifest_path = root / "manifest.json";
  if (!fs::exists(manifest_path))
    throw DataError("missing manifest: " + manifest_path.string());
  json manifest;
  {
    std::ifstream f(manifest_path);
    try {
      manifest = json::parse(f);
    } catch (const json::exception& e) {
      throw DataError("malformed manifest: " + std::string(e.what()));
    }
  }
  const int version = manifest.at("version");
  if (version != kDatasetVersion)
    throw DataError("dataset version mismatch: found " + std::to_string(version) + ", expected " +
                    std::to_string(kDatasetVersion));

  for (auto& [rel, crc] : manifest.at("checksums").items()) {
    const fs::path p = root / rel;
    if (!fs::exists(p)) throw DataError("missing dataset file: " + p.string());
    if (crc32_of_file(p) != crc.get<uint32_t>())
      throw DataError("checksum mismatch: " + rel);
  }

  Dataset ds;
  ds.image_size = manifest.at("image_size");
  for (const auto& entry : manifest.at("scenes")) {
    SceneRecord rec;
    rec.id = entry.at("id");
    const int n_frames = entry.at("n_frames");
    const fs::path dir = root / "scenes" / rec.id;

    {
      std::ifstream f(dir / "primitives.json");
      if (!f) throw DataError("missing dataset file: " + (dir / "primitives.json").string());
      json prims = json::parse(f);
      for (const auto& pj : prims) rec.primitives.push_back(detail_io::primitive_from_json(pj));
    }

    rec.views.resize(n_frames);
    for (int k = 0; k < n_frames; ++k) {
      const std::string stem = detail_io::frame_stem(k);
      ViewSample& v = rec.views[k];
      v.image = load_png(dir / (stem + ".png"));
      v.camera = detail_io::read_camera(dir / (stem + ".cam"), v.image.width, v.image.height);
      const auto depth_bytes = read_file_bytes(dir / (stem + ".depth"));
      const size_t n_px = static_cast<size_t>(v.image.width) * v.image.height;
      if (depth_bytes.size() != n_px * sizeof(float))
        throw DataError("corrupt depth file: " + (dir / (stem + ".depth")).string());
      v.depth.resize(n_px);
      std::memcpy(v.depth.data(), depth_bytes.data(), depth_bytes.size());
      if (k + 1 < n_frames) {
        std::ifstream f(dir / (stem + ".flow"), std::ios::binary);
        if (!f) throw DataError("missing dataset file: " + (dir / (stem + ".flow")).string());
        v.flow_to_next.height = v.image.height;
        v.flow_to_next.width = v.image.width;
        v.flow_to_next.flow.resize(n_px * 2);
        v.flow_to_next.valid.resize(n_px);
        read_f32s(f, v.flow_to_next.flow.data(), n_px * 2);
        read_bytes(f, v.flow_to_next.valid.data(), n_px);
      }
    }
    ds.scenes.push_back(std::move(rec));
  }

  for (const auto& name : manifest.at("styles"))
    ds.styles.push_back(load_png(root / "styles" / name.get<std::string>()));
  return ds;
}

}  // namespace stylesplat
