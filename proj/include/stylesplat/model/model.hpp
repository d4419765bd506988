#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stylesplat/core/rng.hpp"
#include "stylesplat/core/tensor.hpp"
#include "stylesplat/core/tensor_ops.hpp"
#include "stylesplat/gaussians/gaussians.hpp"
#include "stylesplat/model/dpt.hpp"
#include "stylesplat/model/layers.hpp"

namespace stylesplat {

struct ModelConfig {
  int image_size = 64;
  int patch_size = 8;
  int width = 192;
  int enc_depth = 6;
  int heads = 4;
  int mlp_ratio = 4;
  int dec_depth = 6;
  std::vector<int> dec_taps = {1, 3, 5, 6};  // 1-based decoder block indices
  int styl_depth = 4;
  std::vector<int> styl_taps = {1, 2, 3, 4};
  std::vector<int> head_channels = {64, 48, 32, 16};  // dense head, coarse to fine
  ActivationConfig activation;
  uint64_t init_seed = 0;

  int grid() const { return image_size / patch_size; }
  int tokens_per_view() const { return grid() * grid(); }
  int patch_dim() const { return 3 * patch_size * patch_size; }

  void validate() const {
    if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0)
      throw std::invalid_argument("model config: image size must be divisible by patch size");
    if (width % heads != 0) throw std::invalid_argument("model config: width not divisible by heads");
    auto check_taps = [](const std::vector<int>& taps, int depth, const char* which) {
      if (taps.empty()) throw std::invalid_argument(std::string("model config: no taps for ") + which);
      int prev = 0;
      for (int t : taps) {
        if (t <= prev || t > depth)
          throw std::invalid_argument(std::string("model config: bad tap list for ") + which);
        prev = t;
      }
    };
    check_taps(dec_taps, dec_depth, "structure decoder");
    check_taps(styl_taps, styl_depth, "stylization decoder");
    if (head_channels.size() != dec_taps.size() || head_channels.size() != styl_taps.size())
      throw std::invalid_argument("model config: head channel count must match tap count");
    if ((1 << (static_cast<int>(dec_taps.size()) - 1)) != patch_size)
      throw std::invalid_argument(
          "model config: dense head must reach full resolution (patch = 2^(taps-1))");
  }
};

constexpr int kMinViews = 2;
constexpr int kMaxViews = 8;

// Feed-forward scene stylizer: unposed content views plus one appearance
// image in, pixel-aligned Gaussians out. The structure path (content encoder,
// cross-view decoder, center/attribute heads) never sees the appearance
// image, so geometry is appearance-independent by construction.
struct SceneStylizer {
  ModelConfig cfg;

  LinearLayer patch_embed_content;
  LinearLayer patch_embed_style;
  Tensor pos_embed_content;
  Tensor pos_embed_style;
  std::vector<EncoderBlock> content_encoder;
  std::vector<EncoderBlock> style_encoder;
  LayerNormLayer content_norm;
  LayerNormLayer style_norm;

  Tensor view_embed_ref;
  Tensor view_embed_src;
  std::vector<DecoderBlock> structure_decoder;
  DptHead head_centers;
  DptHead head_attribs;
  LinearLayer pose_fc1;  // pooled view tokens -> hidden
  LinearLayer pose_fc2;  // hidden -> (quaternion delta wxyz, translation xyz)

  std::vector<DecoderBlock> stylization_decoder;
  DptHead head_color;

  Tensor ray_x, ray_y;  // [H*W,1] pixel-ray slopes at a nominal focal of one image width
  Tensor token_pool;    // [1,L] constant 1/L row, mean-pools a view's tokens

  explicit SceneStylizer(const ModelConfig& config) : cfg(config) {
    cfg.validate();
    Rng rng(cfg.init_seed);
    const int d = cfg.width;
    const int hidden = d * cfg.mlp_ratio;
    const int l = cfg.tokens_per_view();

    patch_embed_content = LinearLayer(rng, cfg.patch_dim(), d);
    patch_embed_style = LinearLayer(rng, cfg.patch_dim(), d);
    pos_embed_content = Tensor::param({l, d}, rng.trunc_normal_vec(static_cast<size_t>(l) * d, 0.02f));
    pos_embed_style = Tensor::param({l, d}, rng.trunc_normal_vec(static_cast<size_t>(l) * d, 0.02f));
    for (int i = 0; i < cfg.enc_depth; ++i) content_encoder.emplace_back(rng, d, cfg.heads, hidden);
    for (int i = 0; i < cfg.enc_depth; ++i) style_encoder.emplace_back(rng, d, cfg.heads, hidden);
    content_norm = LayerNormLayer(d);
    style_norm = LayerNormLayer(d);

    view_embed_ref = Tensor::param({d}, rng.trunc_normal_vec(d, 0.02f));
    view_embed_src = Tensor::param({d}, rng.trunc_normal_vec(d, 0.02f));
    for (int i = 0; i < cfg.dec_depth; ++i) structure_decoder.emplace_back(rng, d, cfg.heads, hidden);
    // Geometry heads start close to their output bias (near-zero final conv)
    // so the bias-seeded prior below survives initialization: depth
    // mid-frustum, rotations near identity, scales near one pixel's
    // footprint at that depth.
    head_centers = DptHead(rng, d, cfg.grid(), cfg.head_channels, 3, 0.01f);
    head_attribs = DptHead(rng, d, cfg.grid(), cfg.head_channels, 8, 0.01f);
    head_centers.conv_out.b.data()[2] = std::log(3.0f);
    float* ab = head_attribs.conv_out.b.data();
    ab[0] = 1.0f;
    ab[4] = ab[5] = ab[6] = -3.0f;

    // Per-view rigid transform head, near-identity at init for the same
    // reason: non-reference views start as a copy of the reference frustum
    // sheet and the pose moves the whole sheet at once, which is a far
    // shorter gradient path than per-pixel offsets.
    pose_fc1 = LinearLayer(rng, d, 64);
    pose_fc2 = LinearLayer(rng, 64, 7);
    for (int64_t i = 0; i < pose_fc2.w.numel(); ++i) pose_fc2.w.data()[i] *= 0.01f;

    for (int i = 0; i < cfg.styl_depth; ++i) stylization_decoder.emplace_back(rng, d, cfg.heads, hidden);
    head_color = DptHead(rng, d, cfg.grid(), cfg.head_channels, 3);

    const int w = cfg.image_size;
    std::vector<float> rx(static_cast<size_t>(w) * w), ry(rx.size());
    for (int y = 0; y < w; ++y)
      for (int x = 0; x < w; ++x) {
        rx[static_cast<size_t>(y) * w + x] = (x + 0.5f - 0.5f * w) / w;
        ry[static_cast<size_t>(y) * w + x] = (y + 0.5f - 0.5f * w) / w;
      }
    ray_x = Tensor::from({w * w, 1}, std::move(rx));
    ray_y = Tensor::from({w * w, 1}, std::move(ry));
    token_pool = Tensor::from({1, l}, std::vector<float>(l, 1.0f / static_cast<float>(l)));
  }

  // --- encoders ---

  Tensor embed_patches(const Tensor& image_chw, const LinearLayer& embed, const Tensor& pos) const {
    if (image_chw.rank() != 3 || image_chw.dim(0) != 3 || image_chw.dim(1) != cfg.image_size ||
        image_chw.dim(2) != cfg.image_size)
      throw std::invalid_argument("model: image has wrong shape");
    return add(embed.forward(patchify(image_chw, cfg.patch_size)), pos);
  }

  Tensor encode_content_view(const Tensor& image_chw) const {
    Tensor x = embed_patches(image_chw, patch_embed_content, pos_embed_content);
    for (const auto& block : content_encoder) x = block.forward(x);
    return content_norm.forward(x);
  }

  std::vector<Tensor> encode_content(const std::vector<Tensor>& views) const {
    const int n = static_cast<int>(views.size());
    if (n < kMinViews || n > kMaxViews)
      throw std::invalid_argument("model: view count must be in [2, 8]");
    std::vector<Tensor> out;
    out.reserve(views.size());
    for (const auto& v : views) out.push_back(encode_content_view(v));
    return out;
  }

  Tensor encode_style(const Tensor& image_chw) const {
    Tensor x = embed_patches(image_chw, patch_embed_style, pos_embed_style);
    for (const auto& block : style_encoder) x = block.forward(x);
    return style_norm.forward(x);
  }

  // --- structure branch ---

  // Lockstep cross-view decoding: each block advances every view once, with
  // queries from the view's own tokens and keys/values from the other views'
  // pre-block tokens. Returns, per view, the tapped block outputs
  // (shallow to deep).
  std::vector<std::vector<Tensor>> decode_structure(const std::vector<Tensor>& content_tokens) const {
    const int n = static_cast<int>(content_tokens.size());
    if (n < kMinViews) throw std::invalid_argument("model: structure decoding needs at least 2 views");
    std::vector<Tensor> cur(content_tokens.size());
    for (int i = 0; i < n; ++i)
      cur[i] = add_bias(content_tokens[i], i == 0 ? view_embed_ref : view_embed_src);

    std::vector<std::vector<Tensor>> taps(n);
    for (int b = 0; b < cfg.dec_depth; ++b) {
      std::vector<Tensor> next(n);
      for (int i = 0; i < n; ++i) {
        std::vector<Tensor> others;
        others.reserve(n - 1);
        for (int j = 0; j < n; ++j)
          if (j != i) others.push_back(cur[j]);
        Tensor kv = others.size() == 1 ? others[0] : concat_rows(others);
        next[i] = structure_decoder[b].forward(cur[i], kv);
      }
      cur = std::move(next);
      for (int t : cfg.dec_taps)
        if (t == b + 1)
          for (int i = 0; i < n; ++i) taps[i].push_back(cur[i]);
    }
    return taps;
  }

  // --- appearance branch ---

  // Concatenates all views' content tokens, then alternates global
  // self-attention and cross-attention into the style tokens. Returns the
  // tapped block outputs over the joint (N*L) token sequence.
  std::vector<Tensor> stylize_tokens(const std::vector<Tensor>& content_tokens,
                                     const Tensor& style_tokens) const {
    if (style_tokens.dim(1) != cfg.width)
      throw std::invalid_argument("model: style token width mismatch");
    Tensor x = content_tokens.size() == 1 ? content_tokens[0] : concat_rows(content_tokens);
    std::vector<Tensor> taps;
    for (int b = 0; b < cfg.styl_depth; ++b) {
      x = stylization_decoder[b].forward(x, style_tokens);
      for (int t : cfg.styl_taps)
        if (t == b + 1) taps.push_back(x);
    }
    return taps;
  }

  // --- heads ---

  // [C,H,W] map to per-pixel rows [H*W, C] in raster order.
  static Tensor map_to_rows(const Tensor& m) {
    return transpose(reshape(m, {m.dim(0), m.dim(1) * m.dim(2)}));
  }

  Tensor run_head_per_view(const DptHead& head,
                           const std::vector<std::vector<Tensor>>& view_taps) const {
    std::vector<Tensor> rows;
    rows.reserve(view_taps.size());
    for (const auto& taps : view_taps) rows.push_back(map_to_rows(head.forward(taps)));
    return rows.size() == 1 ? rows[0] : concat_rows(rows);
  }

  // Rigid transform of one non-reference view's pointmap into the reference
  // frame, regressed from that view's deepest decoder tap. Returned as the
  // [3,3] rotation and [3] translation of p' = p R^T + t.
  std::pair<Tensor, Tensor> view_pose(const std::vector<Tensor>& taps) const {
    Tensor pooled = matmul(token_pool, taps.back());
    Tensor q7 = pose_fc2.forward(gelu(pose_fc1.forward(pooled)));
    Tensor q = normalize_rows(
        concat_cols({add_scalar(slice_cols(q7, 0, 1), 1.0f), slice_cols(q7, 1, 4)}));
    Tensor w = slice_cols(q, 0, 1), x = slice_cols(q, 1, 2);
    Tensor y = slice_cols(q, 2, 3), z = slice_cols(q, 3, 4);
    auto two = [](const Tensor& a, const Tensor& b, const Tensor& c, const Tensor& d, float sg) {
      return scale(add(mul(a, b), scale(mul(c, d), sg)), 2.0f);
    };
    Tensor r0 = concat_cols({add_scalar(scale(add(square(y), square(z)), -2.0f), 1.0f),
                             two(x, y, w, z, -1.0f), two(x, z, w, y, 1.0f)});
    Tensor r1 = concat_cols({two(x, y, w, z, 1.0f),
                             add_scalar(scale(add(square(x), square(z)), -2.0f), 1.0f),
                             two(y, z, w, x, -1.0f)});
    Tensor r2 = concat_cols({two(x, z, w, y, -1.0f), two(y, z, w, x, 1.0f),
                             add_scalar(scale(add(square(x), square(y)), -2.0f), 1.0f)});
    return {concat_rows({r0, r1, r2}), reshape(slice_cols(q7, 4, 7), {3})};
  }

  // Raw centers with each pixel's head output treated as an offset around its
  // backprojected ray, scaled by the predicted depth. An untrained model
  // therefore already fills the visible frustum instead of collapsing onto
  // the optical axis. Non-reference views get the same anchoring followed by
  // their regressed rigid transform, so the network can align whole frustums
  // before refining pixels.
  Tensor anchored_centers(const std::vector<std::vector<Tensor>>& view_taps) const {
    std::vector<Tensor> views;
    views.reserve(view_taps.size());
    for (size_t k = 0; k < view_taps.size(); ++k) {
      Tensor rows = map_to_rows(head_centers.forward(view_taps[k]));
      Tensor hz = slice_cols(rows, 2, 3);
      Tensor depth = scale(exp_t(hz), cfg.activation.z_scale);
      Tensor px = mul(add(ray_x, slice_cols(rows, 0, 1)), depth);
      Tensor py = mul(add(ray_y, slice_cols(rows, 1, 2)), depth);
      if (k == 0) {
        views.push_back(concat_cols({px, py, hz}));
        continue;
      }
      auto [rot, trans] = view_pose(view_taps[k]);
      Tensor p = add_bias(matmul(concat_cols({px, py, depth}), transpose(rot)), trans);
      // Smooth one-sided clamp keeps the re-encoded depth positive without
      // disturbing points already in front of the camera.
      Tensor zt = slice_cols(p, 2, 3);
      Tensor zsafe = scale(add(zt, sqrt_t(add_scalar(square(zt), 0.04f))), 0.5f);
      views.push_back(concat_cols({slice_cols(p, 0, 1), slice_cols(p, 1, 2),
                                   log_t(scale(zsafe, 1.0f / cfg.activation.z_scale))}));
    }
    return views.size() == 1 ? views[0] : concat_rows(views);
  }

  struct RawOutputs {
    Tensor centers;  // [M, 3]
    Tensor attribs;  // [M, 8] quaternion, scale, opacity
    Tensor colors;   // [M, 3]
  };

  RawOutputs predict_raw(const std::vector<Tensor>& views, const Tensor& appearance_image) const {
    std::vector<Tensor> content = encode_content(views);
    auto struct_taps = decode_structure(content);
    RawOutputs raw;
    raw.centers = anchored_centers(struct_taps);
    raw.attribs = run_head_per_view(head_attribs, struct_taps);

    Tensor style_tokens = encode_style(appearance_image);
    raw.colors = predict_colors(content, style_tokens);
    return raw;
  }

  // Color prediction from already-encoded tokens; used directly for style
  // interpolation where blended tokens replace a single style's tokens.
  Tensor predict_colors(const std::vector<Tensor>& content_tokens, const Tensor& style_tokens) const {
    const int n = static_cast<int>(content_tokens.size());
    const int l = cfg.tokens_per_view();
    std::vector<Tensor> joint_taps = stylize_tokens(content_tokens, style_tokens);
    std::vector<std::vector<Tensor>> per_view(n);
    for (const Tensor& tap : joint_taps)
      for (int i = 0; i < n; ++i) per_view[i].push_back(slice_rows(tap, i * l, (i + 1) * l));
    return run_head_per_view(head_color, per_view);
  }

  GaussianTensors forward(const std::vector<Tensor>& views, const Tensor& appearance_image) const {
    RawOutputs raw = predict_raw(views, appearance_image);
    return activate_gaussians(raw.centers, raw.attribs, raw.colors, cfg.activation);
  }

  // --- parameters ---

  ParamList params() const {
    ParamList out;
    patch_embed_content.collect("patch_embed.content", out);
    patch_embed_style.collect("patch_embed.style", out);
    out.push_back({"pos_embed.content", pos_embed_content});
    out.push_back({"pos_embed.style", pos_embed_style});
    for (size_t i = 0; i < content_encoder.size(); ++i)
      content_encoder[i].collect("enc.content." + std::to_string(i), out);
    for (size_t i = 0; i < style_encoder.size(); ++i)
      style_encoder[i].collect("enc.style." + std::to_string(i), out);
    content_norm.collect("enc.content.norm", out);
    style_norm.collect("enc.style.norm", out);
    out.push_back({"view_embed.ref", view_embed_ref});
    out.push_back({"view_embed.src", view_embed_src});
    for (size_t i = 0; i < structure_decoder.size(); ++i)
      structure_decoder[i].collect("dec.struct." + std::to_string(i), out);
    head_centers.collect("head.centers", out);
    head_attribs.collect("head.attribs", out);
    for (size_t i = 0; i < stylization_decoder.size(); ++i)
      stylization_decoder[i].collect("dec.styl." + std::to_string(i), out);
    head_color.collect("head.color", out);
    return out;
  }

  // Parameters of the structure path, frozen during stylization fine-tuning.
  // The content encoder is part of it: the appearance branch reads its
  // tokens, but only the stylization decoder and color head adapt.
  static bool in_structure_path(const std::string& name) {
    for (const char* prefix : {"patch_embed.content", "pos_embed.content", "enc.content",
                               "view_embed", "dec.struct", "head.centers", "head.attribs"})
      if (name.rfind(prefix, 0) == 0) return true;
    return false;
  }

  static bool in_style_encoder(const std::string& name) {
    for (const char* prefix : {"patch_embed.style", "pos_embed.style", "enc.style"})
      if (name.rfind(prefix, 0) == 0) return true;
    return false;
  }
};

// Convex combination of style token grids, applied before the stylization
// decoder.
inline Tensor interpolate_styles(const std::vector<Tensor>& token_sets,
                                 const std::vector<float>& weights) {
  if (token_sets.empty() || token_sets.size() != weights.size())
    throw std::invalid_argument("style interpolation: need one weight per token set");
  double sum = 0;
  for (float w : weights) sum += w;
  if (std::abs(sum - 1.0) > 1e-6)
    throw std::invalid_argument("style interpolation: weights must sum to 1");
  for (const auto& t : token_sets)
    if (t.shape() != token_sets[0].shape())
      throw std::invalid_argument("style interpolation: token shapes must match");
  Tensor acc = scale(token_sets[0], weights[0]);
  for (size_t i = 1; i < token_sets.size(); ++i) acc = add(acc, scale(token_sets[i], weights[i]));
  return acc;
}

}  // namespace stylesplat
