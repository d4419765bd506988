#pragma once

// Puts the rasterizer on the tape as a single custom op with an analytic
// backward pass. Output is a [4,H,W] tensor: three color planes and the
// accumulated opacity plane.

#include "stylesplat/core/tensor.hpp"
#include "stylesplat/render/splat.hpp"

namespace stylesplat {

inline Tensor render_diff(const GaussianTensors& g, const Camera& cam,
                          const RenderConfig& cfg = {}) {
  GaussianSet set = g.detach();
  auto splats = std::make_shared<std::vector<Splat2D>>();
  auto cache = std::make_shared<CompositeCache>();
  RenderedImage im = render(set, cam, cfg, cache.get(), splats.get());

  const int h = cam.height, w = cam.width;
  const size_t hw = static_cast<size_t>(h) * w;
  std::vector<float> value(4 * hw);
  for (size_t i = 0; i < hw; ++i) {
    value[0 * hw + i] = im.color[i * 3 + 0];
    value[1 * hw + i] = im.color[i * 3 + 1];
    value[2 * hw + i] = im.color[i * 3 + 2];
    value[3 * hw + i] = im.alpha[i];
  }

  return make_op(
      {4, h, w}, std::move(value), {g.means, g.opacities, g.rotations, g.scales, g.colors},
      [set = std::move(set), splats, cache, cam, cfg, h, w, hw](detail::Node& self) {
        std::vector<float> dcolor(hw * 3);
        std::vector<float> dalpha(hw);
        for (size_t i = 0; i < hw; ++i) {
          dcolor[i * 3 + 0] = self.grad[0 * hw + i];
          dcolor[i * 3 + 1] = self.grad[1 * hw + i];
          dcolor[i * 3 + 2] = self.grad[2 * hw + i];
          dalpha[i] = self.grad[3 * hw + i];
        }
        std::vector<SplatGrad> grads;
        composite_backward(*splats, *cache, h, w, cfg, dcolor.data(), dalpha.data(), grads);

        const size_t m = set.size();
        std::vector<float> dmeans(m * 3, 0.0f), drot(m * 4, 0.0f), dscale(m * 3, 0.0f),
            dopac(m, 0.0f), dcol(m * 3, 0.0f);
        project_backward(set, *splats, grads, cam, dmeans.data(), drot.data(), dscale.data(),
                         dopac.data(), dcol.data());

        auto accumulate = [](std::shared_ptr<detail::Node>& p, const std::vector<float>& src) {
          if (!p->requires_grad) return;
          p->ensure_grad();
          for (size_t i = 0; i < src.size(); ++i) p->grad[i] += src[i];
        };
        accumulate(self.parents[0], dmeans);
        accumulate(self.parents[1], dopac);
        accumulate(self.parents[2], drot);
        accumulate(self.parents[3], dscale);
        accumulate(self.parents[4], dcol);
      });
}

// [3,H,W] color planes of a render output.
inline Tensor render_rgb(const Tensor& rgba) {
  const int h = rgba.dim(1), w = rgba.dim(2);
  return reshape(slice_rows(reshape(rgba, {4, h * w}), 0, 3), {3, h, w});
}

// [H,W] accumulated opacity plane.
inline Tensor render_alpha(const Tensor& rgba) {
  const int h = rgba.dim(1), w = rgba.dim(2);
  return reshape(slice_rows(reshape(rgba, {4, h * w}), 3, 4), {h, w});
}

}  // namespace stylesplat
