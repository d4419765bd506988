#pragma once

// Versioned binary checkpoint with a JSON sidecar manifest.
//
// Binary layout ("SSCK", little-endian):
//   magic | u32 version | u64 step | string phase | u32 param count
//   per parameter: name | u32 rank | i32 dims | f32 values
//   u8 has optimizer state | [u64 t | u32 entries | per: name | u64 n | m | v]
//   u32 crc32 of everything above
//
// The sidecar at <path>.json carries the config snapshot, step, phase, the
// train-scene ids and a loss summary; it is advisory, the binary is the
// source of truth for parameters.

#include <zlib.h>

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stylesplat/core/serialize.hpp"
#include "stylesplat/model/model.hpp"
#include "stylesplat/train/optimizer.hpp"

namespace stylesplat {

constexpr uint32_t kCheckpointVersion = 1;

inline void to_json(nlohmann::json& j, const ActivationConfig& c) {
  j = {{"z_scale", c.z_scale}, {"s_min", c.s_min}};
}

inline void from_json(const nlohmann::json& j, ActivationConfig& c) {
  j.at("z_scale").get_to(c.z_scale);
  j.at("s_min").get_to(c.s_min);
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"image_size", c.image_size}, {"patch_size", c.patch_size},
       {"width", c.width},           {"enc_depth", c.enc_depth},
       {"heads", c.heads},           {"mlp_ratio", c.mlp_ratio},
       {"dec_depth", c.dec_depth},   {"dec_taps", c.dec_taps},
       {"styl_depth", c.styl_depth}, {"styl_taps", c.styl_taps},
       {"head_channels", c.head_channels},
       {"activation", c.activation}, {"init_seed", c.init_seed}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("image_size").get_to(c.image_size);
  j.at("patch_size").get_to(c.patch_size);
  j.at("width").get_to(c.width);
  j.at("enc_depth").get_to(c.enc_depth);
  j.at("heads").get_to(c.heads);
  j.at("mlp_ratio").get_to(c.mlp_ratio);
  j.at("dec_depth").get_to(c.dec_depth);
  j.at("dec_taps").get_to(c.dec_taps);
  j.at("styl_depth").get_to(c.styl_depth);
  j.at("styl_taps").get_to(c.styl_taps);
  j.at("head_channels").get_to(c.head_channels);
  j.at("activation").get_to(c.activation);
  j.at("init_seed").get_to(c.init_seed);
}

struct CheckpointParam {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  uint32_t version = kCheckpointVersion;
  uint64_t step = 0;
  std::string phase;  // "nvs" or "stylize"
  std::vector<CheckpointParam> params;
  bool has_opt = false;
  OptState opt;
  nlohmann::json sidecar = nlohmann::json::object();
};

inline Checkpoint snapshot_model(const SceneStylizer& model, uint64_t step,
                                 const std::string& phase) {
  Checkpoint ck;
  ck.step = step;
  ck.phase = phase;
  for (const auto& np : model.params())
    ck.params.push_back({np.name, np.tensor.shape(), np.tensor.vec()});
  ck.sidecar["model"] = model.cfg;
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  std::ostringstream buf(std::ios::binary);
  buf.write("SSCK", 4);
  write_pod<uint32_t>(buf, ck.version);
  write_pod<uint64_t>(buf, ck.step);
  write_string(buf, ck.phase);
  write_pod<uint32_t>(buf, static_cast<uint32_t>(ck.params.size()));
  for (const auto& p : ck.params) {
    write_string(buf, p.name);
    write_pod<uint32_t>(buf, static_cast<uint32_t>(p.shape.size()));
    for (int d : p.shape) write_pod<int32_t>(buf, d);
    write_f32s(buf, p.values.data(), p.values.size());
  }
  write_pod<uint8_t>(buf, ck.has_opt ? 1 : 0);
  if (ck.has_opt) {
    write_pod<uint64_t>(buf, ck.opt.t);
    write_pod<uint32_t>(buf, static_cast<uint32_t>(ck.opt.entries.size()));
    for (const auto& e : ck.opt.entries) {
      write_string(buf, e.name);
      write_pod<uint64_t>(buf, e.m.size());
      write_f32s(buf, e.m.data(), e.m.size());
      write_f32s(buf, e.v.data(), e.v.size());
    }
  }
  std::string bytes = buf.str();
  const uint32_t crc = crc32_of(bytes.data(), bytes.size());
  bytes.append(reinterpret_cast<const char*>(&crc), sizeof(crc));
  write_file_bytes(path, bytes.data(), bytes.size());

  nlohmann::json side = ck.sidecar;
  side["format_version"] = ck.version;
  side["step"] = ck.step;
  side["phase"] = ck.phase;
  std::ofstream jf(path.string() + ".json", std::ios::trunc);
  if (!jf) throw CheckpointError("cannot write checkpoint sidecar: " + path.string() + ".json");
  jf << side.dump(2) << "\n";
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::vector<uint8_t> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const DataError& e) {
    throw CheckpointError(e.what());
  }
  if (bytes.size() < 12) throw CheckpointError("checkpoint too short: " + path.string());
  uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
  if (crc32_of(bytes.data(), bytes.size() - 4) != stored_crc)
    throw CheckpointError("checkpoint is corrupt (checksum mismatch): " + path.string());

  std::istringstream in(std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size() - 4),
                        std::ios::binary);
  char magic[4];
  read_bytes(in, magic, 4);
  if (std::string(magic, 4) != "SSCK")
    throw CheckpointError("not a checkpoint file: " + path.string());
  Checkpoint ck;
  ck.version = read_pod<uint32_t>(in);
  if (ck.version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(ck.version));
  ck.step = read_pod<uint64_t>(in);
  ck.phase = read_string(in);
  const uint32_t n_params = read_pod<uint32_t>(in);
  ck.params.resize(n_params);
  for (auto& p : ck.params) {
    p.name = read_string(in);
    const uint32_t rank = read_pod<uint32_t>(in);
    p.shape.resize(rank);
    int64_t numel = 1;
    for (auto& d : p.shape) {
      d = read_pod<int32_t>(in);
      numel *= d;
    }
    p.values.resize(static_cast<size_t>(numel));
    read_f32s(in, p.values.data(), p.values.size());
  }
  if (read_pod<uint8_t>(in) != 0) {
    ck.has_opt = true;
    ck.opt.t = read_pod<uint64_t>(in);
    const uint32_t n_entries = read_pod<uint32_t>(in);
    ck.opt.entries.resize(n_entries);
    for (auto& e : ck.opt.entries) {
      e.name = read_string(in);
      const uint64_t n = read_pod<uint64_t>(in);
      e.m.resize(n);
      e.v.resize(n);
      read_f32s(in, e.m.data(), e.m.size());
      read_f32s(in, e.v.data(), e.v.size());
    }
  }

  const std::filesystem::path side = path.string() + ".json";
  if (std::filesystem::exists(side)) {
    std::ifstream jf(side);
    ck.sidecar = nlohmann::json::parse(jf);
  }
  return ck;
}

// Copies checkpoint parameters into the model. The parameter sequences must
// agree exactly; the error names the first key where they diverge.
inline void apply_parameters(const Checkpoint& ck, SceneStylizer& model) {
  ParamList live = model.params();
  const size_t n = std::min(live.size(), ck.params.size());
  for (size_t i = 0; i < n; ++i) {
    if (live[i].name != ck.params[i].name)
      throw CheckpointError("checkpoint incompatible at key '" + ck.params[i].name +
                            "': model expects '" + live[i].name + "'");
    if (live[i].tensor.shape() != ck.params[i].shape)
      throw CheckpointError("checkpoint incompatible at key '" + live[i].name +
                            "': shape " + shape_str(ck.params[i].shape) + " does not match model " +
                            shape_str(live[i].tensor.shape()));
  }
  if (ck.params.size() < live.size())
    throw CheckpointError("checkpoint incompatible: missing key '" + live[n].name + "'");
  if (ck.params.size() > live.size())
    throw CheckpointError("checkpoint incompatible: unexpected key '" + ck.params[n].name + "'");
  for (size_t i = 0; i < live.size(); ++i) live[i].tensor.vec() = ck.params[i].values;
}

// Chained crc over (name, values) of the parameters selected by `pred`;
// a cheap fingerprint for freeze contracts.
template <typename Pred>
uint32_t params_crc(const SceneStylizer& model, Pred pred) {
  uLong crc = ::crc32(0L, nullptr, 0);
  for (const auto& np : model.params()) {
    if (!pred(np.name)) continue;
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(np.name.data()),
                  static_cast<uInt>(np.name.size()));
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(np.tensor.data()),
                  static_cast<uInt>(np.tensor.numel() * sizeof(float)));
  }
  return static_cast<uint32_t>(crc);
}

}  // namespace stylesplat
