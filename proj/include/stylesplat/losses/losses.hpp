#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "stylesplat/core/rng.hpp"
#include "stylesplat/core/tensor.hpp"
#include "stylesplat/core/tensor_ops.hpp"
#include "stylesplat/model/layers.hpp"

namespace stylesplat {

// Fixed random-weight convolutional pyramid standing in for a pretrained
// perceptual network. Four stages at strides 1/2/4/8 with 16/32/64/128
// channels; weights are frozen at construction and never trained. The loss
// formulas only consume the stage interface, so a pretrained extractor could
// replace this without touching them. The stage nonlinearity is GELU: smooth
// everywhere, so loss gradients are verifiable against finite differences.
struct PerceptualBackbone {
  static constexpr int kStages = 4;
  std::array<ConvLayer, kStages> convs;

  explicit PerceptualBackbone(uint64_t seed = 0x9e1ce) {
    Rng rng(seed);
    const int ch[kStages + 1] = {3, 16, 32, 64, 128};
    for (int s = 0; s < kStages; ++s) {
      convs[s] = ConvLayer(rng, ch[s], ch[s + 1], 3);
      convs[s].w.set_requires_grad(false);
      convs[s].b.set_requires_grad(false);
    }
  }

  // img is [3,H,W] in [0,1]; centered before the first convolution.
  std::array<Tensor, kStages> stages(const Tensor& img) const {
    if (img.rank() != 3 || img.dim(0) != 3)
      throw std::invalid_argument("perceptual backbone: need [3,H,W]");
    std::array<Tensor, kStages> out;
    Tensor x = add_scalar(img, -0.5f);
    for (int s = 0; s < kStages; ++s) {
      if (s > 0) x = avg_pool2(out[s - 1]);
      out[s] = gelu(convs[s].forward(x));
    }
    return out;
  }
};

struct LossWeights {
  float lambda_style = 10.0f;
  float mse_weight = 1.0f;
  float perceptual_weight = 0.05f;
  float identity_weight = 1.0f;  // 0 disables the identity term (ablation)
};

struct FeatureStats {
  Tensor mean;  // [C]
  Tensor stddev;  // [C], sqrt(population variance + 1e-10)
};

inline FeatureStats feature_stats(const Tensor& fmap) {
  if (fmap.rank() != 3 || fmap.dim(1) * fmap.dim(2) == 0)
    throw std::invalid_argument("feature_stats: need nonempty [C,H,W]");
  FeatureStats s;
  s.mean = channel_mean(fmap);
  s.stddev = sqrt_t(add_scalar(channel_var(fmap), 1e-10f));
  return s;
}

// Squared distance between the per-channel statistics of two feature maps,
// divided by channel count so stages with different widths contribute
// comparably.
inline Tensor style_stat_distance(const Tensor& fa, const Tensor& fb) {
  FeatureStats a = feature_stats(fa);
  FeatureStats b = feature_stats(fb);
  Tensor term = add(sum_all(square(sub(a.mean, b.mean))), sum_all(square(sub(a.stddev, b.stddev))));
  return scale(term, 1.0f / static_cast<float>(fa.dim(0)));
}

inline Tensor style_loss(const std::vector<Tensor>& renders, const Tensor& style_image,
                         const PerceptualBackbone& bb) {
  if (renders.empty()) throw std::invalid_argument("style_loss: no rendered views");
  auto style_feats = bb.stages(style_image);
  Tensor acc = Tensor::scalar(0.0f);
  for (const Tensor& r : renders) {
    auto rf = bb.stages(r);
    for (int s = 0; s < PerceptualBackbone::kStages; ++s)
      acc = add(acc, style_stat_distance(rf[s], style_feats[s]));
  }
  return scale(acc, 1.0f / static_cast<float>(renders.size()));
}

inline Tensor content_loss(const std::vector<Tensor>& renders, const std::vector<Tensor>& targets,
                           const PerceptualBackbone& bb) {
  if (renders.size() != targets.size() || renders.empty())
    throw std::invalid_argument("content_loss: render/target count mismatch");
  Tensor acc = Tensor::scalar(0.0f);
  for (size_t i = 0; i < renders.size(); ++i) {
    auto rf = bb.stages(renders[i]);
    auto tf = bb.stages(targets[i]);
    acc = add(acc, add(mse(rf[2], tf[2]), mse(rf[3], tf[3])));
  }
  return scale(acc, 1.0f / static_cast<float>(renders.size()));
}

// Mean over stages of the squared distance between channel-normalized
// features (the LPIPS construction, with uniform channel weights).
inline Tensor perceptual_distance(const Tensor& a, const Tensor& b,
                                  const PerceptualBackbone& bb) {
  auto fa = bb.stages(a);
  auto fb = bb.stages(b);
  Tensor acc = Tensor::scalar(0.0f);
  for (int s = 0; s < PerceptualBackbone::kStages; ++s)
    acc = add(acc, mse(normalize_channels(fa[s]), normalize_channels(fb[s])));
  return scale(acc, 1.0f / static_cast<float>(PerceptualBackbone::kStages));
}

inline Tensor photometric_loss(const std::vector<Tensor>& renders,
                               const std::vector<Tensor>& targets, const PerceptualBackbone& bb,
                               const LossWeights& w = {}) {
  if (renders.size() != targets.size() || renders.empty())
    throw std::invalid_argument("photometric_loss: render/target count mismatch");
  Tensor acc = Tensor::scalar(0.0f);
  for (size_t i = 0; i < renders.size(); ++i) {
    Tensor term = add(scale(mse(renders[i], targets[i]), w.mse_weight),
                      scale(perceptual_distance(renders[i], targets[i], bb), w.perceptual_weight));
    acc = add(acc, term);
  }
  return scale(acc, 1.0f / static_cast<float>(renders.size()));
}

enum class LossPhase { kNvs, kStylize };

struct LossReport {
  float photometric = 0;
  float style = 0;
  float content = 0;
  float identity = 0;
  float total = 0;
  LossWeights weights;
};

struct LossTerms {
  Tensor total;  // scalar, differentiable
  LossReport report;
};

// Eq.-style two-phase total. NVS phase: photometric loss on content renders.
// Stylization phase: lambda * style + content on stylized renders, plus the
// identity term (photometric loss on content-as-style renders).
inline LossTerms total_loss(LossPhase phase, const std::vector<Tensor>& renders_stylized,
                            const std::vector<Tensor>& renders_identity,
                            const std::vector<Tensor>& targets, const Tensor* style_image,
                            const PerceptualBackbone& bb, const LossWeights& w = {}) {
  LossTerms out;
  out.report.weights = w;
  if (phase == LossPhase::kNvs) {
    if (renders_identity.empty()) throw std::invalid_argument("total_loss: nvs needs content renders");
    out.total = photometric_loss(renders_identity, targets, bb, w);
    out.report.photometric = out.total.item();
    out.report.total = out.report.photometric;
    return out;
  }
  if (renders_stylized.empty() || renders_identity.empty() || style_image == nullptr)
    throw std::invalid_argument("total_loss: stylize needs stylized renders, content renders, style");
  Tensor style_term = style_loss(renders_stylized, *style_image, bb);
  Tensor content_term = content_loss(renders_stylized, targets, bb);
  Tensor identity_term = photometric_loss(renders_identity, targets, bb, w);
  out.total = add(scale(style_term, w.lambda_style), content_term);
  if (w.identity_weight != 0.0f)
    out.total = add(out.total, scale(identity_term, w.identity_weight));
  out.report.style = style_term.item();
  out.report.content = content_term.item();
  out.report.identity = identity_term.item();
  out.report.total = out.total.item();
  return out;
}

}  // namespace stylesplat
