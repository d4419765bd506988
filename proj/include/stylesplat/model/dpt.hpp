#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "stylesplat/model/layers.hpp"

namespace stylesplat {

// Channel concatenation for planar [C,H,W] maps.
inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
    throw std::invalid_argument("concat_channels: spatial shapes must match");
  const int h = a.dim(1), w = a.dim(2);
  Tensor flat = concat_rows({reshape(a, {a.dim(0), h * w}), reshape(b, {b.dim(0), h * w})});
  return reshape(flat, {a.dim(0) + b.dim(0), h, w});
}

// Dense regression head over transformer taps. Every tap arrives as an
// [L, d] token matrix on the same (grid_h x grid_w) grid; the head projects
// each tap to a feature map, then walks from the deepest tap to the
// shallowest, doubling resolution at each stage and fusing the next tap in,
// until it reaches grid * 2^(taps-1) resolution (the full image for
// patch size 2^(taps-1)).
struct DptHead {
  int grid_h = 0, grid_w = 0;
  std::vector<int> channels;  // one per stage, coarse to fine
  std::vector<LayerNormLayer> tap_ln;
  std::vector<LinearLayer> tap_proj;
  ConvLayer conv_in;
  std::vector<ConvLayer> fuse;
  ConvLayer conv_out;

  DptHead() = default;
  DptHead(Rng& rng, int dim, int grid, std::vector<int> stage_channels, int out_ch,
          float out_gain = 1.0f)
      : grid_h(grid), grid_w(grid), channels(std::move(stage_channels)) {
    const int stages = static_cast<int>(channels.size());
    tap_ln.reserve(stages);
    tap_proj.reserve(stages);
    for (int s = 0; s < stages; ++s) {
      tap_ln.emplace_back(dim);
      tap_proj.emplace_back(rng, dim, channels[s]);
    }
    conv_in = ConvLayer(rng, channels[0], channels[0], 3);
    for (int s = 1; s < stages; ++s)
      fuse.emplace_back(rng, channels[s - 1] + channels[s], channels[s], 3);
    conv_out = ConvLayer(rng, channels.back(), out_ch, 3, out_gain);
  }

  // taps are ordered shallow-to-deep as produced by the decoder; the deepest
  // tap seeds the coarsest stage.
  Tensor forward(const std::vector<Tensor>& taps) const {
    const int stages = static_cast<int>(channels.size());
    if (static_cast<int>(taps.size()) != stages)
      throw std::invalid_argument("dense head: tap count mismatch");
    auto tap_map = [&](int stage) {
      const Tensor& tokens = taps[stages - 1 - stage];
      Tensor proj = tap_proj[stage].forward(tap_ln[stage].forward(tokens));
      Tensor m = tokens_to_map(proj, grid_h, grid_w);
      for (int u = 0; u < stage; ++u) m = upsample_bilinear2x(m);
      return m;
    };
    Tensor f = relu(conv_in.forward(tap_map(0)));
    for (int s = 1; s < stages; ++s) {
      Tensor up = upsample_bilinear2x(f);
      f = relu(fuse[s - 1].forward(concat_channels(up, tap_map(s))));
    }
    return conv_out.forward(f);
  }

  void collect(const std::string& prefix, ParamList& out) const {
    for (size_t s = 0; s < tap_ln.size(); ++s) {
      const std::string tap = prefix + ".tap" + std::to_string(s);
      tap_ln[s].collect(tap + ".ln", out);
      tap_proj[s].collect(tap + ".proj", out);
    }
    conv_in.collect(prefix + ".conv_in", out);
    for (size_t s = 0; s < fuse.size(); ++s)
      fuse[s].collect(prefix + ".fuse" + std::to_string(s), out);
    conv_out.collect(prefix + ".conv_out", out);
  }
};

}  // namespace stylesplat
