#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stylesplat/core/rng.hpp"
#include "stylesplat/core/tensor.hpp"
#include "stylesplat/core/tensor_ops.hpp"

namespace stylesplat {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

using ParamList = std::vector<NamedParam>;

inline void add_param(ParamList& out, const std::string& prefix, const char* name,
                      const Tensor& t) {
  out.push_back({prefix + name, t});
}

// Affine map y = x W^T + b for row-major token matrices [rows, in].
// Xavier-scaled truncated-normal init keeps activation magnitudes stable
// across the reduced widths used here (a fixed 0.02 std would attenuate
// non-residual paths at small d).
struct LinearLayer {
  Tensor w;
  Tensor b;

  LinearLayer() = default;
  LinearLayer(Rng& rng, int in, int out)
      : w(Tensor::param({out, in},
                        rng.trunc_normal_vec(static_cast<size_t>(out) * in,
                                             std::sqrt(2.0f / static_cast<float>(in + out))))),
        b(Tensor::param({out}, std::vector<float>(out, 0.0f))) {}

  Tensor forward(const Tensor& x) const { return linear(x, w, b); }

  void collect(const std::string& prefix, ParamList& out) const {
    add_param(out, prefix, ".w", w);
    add_param(out, prefix, ".b", b);
  }
};

struct LayerNormLayer {
  Tensor gamma;
  Tensor beta;

  LayerNormLayer() = default;
  explicit LayerNormLayer(int dim)
      : gamma(Tensor::param({dim}, std::vector<float>(dim, 1.0f))),
        beta(Tensor::param({dim}, std::vector<float>(dim, 0.0f))) {}

  Tensor forward(const Tensor& x) const { return layer_norm(x, gamma, beta); }

  void collect(const std::string& prefix, ParamList& out) const {
    add_param(out, prefix, ".gamma", gamma);
    add_param(out, prefix, ".beta", beta);
  }
};

struct MlpLayer {
  LinearLayer fc1;
  LinearLayer fc2;

  MlpLayer() = default;
  MlpLayer(Rng& rng, int dim, int hidden) : fc1(rng, dim, hidden), fc2(rng, hidden, dim) {}

  Tensor forward(const Tensor& x) const { return fc2.forward(gelu(fc1.forward(x))); }

  void collect(const std::string& prefix, ParamList& out) const {
    fc1.collect(prefix + ".fc1", out);
    fc2.collect(prefix + ".fc2", out);
  }
};

namespace detail_attn {

// Scaled dot-product attention over pre-projected q/k/v token matrices,
// split into `heads` equal column groups.
inline Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v, int heads) {
  const int dim = q.dim(1);
  if (dim % heads != 0) throw std::invalid_argument("attention dim not divisible by heads");
  const int hd = dim / heads;
  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(hd));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * hd, (h + 1) * hd);
    Tensor kh = slice_cols(k, h * hd, (h + 1) * hd);
    Tensor vh = slice_cols(v, h * hd, (h + 1) * hd);
    Tensor logits = scale(matmul(qh, transpose(kh)), inv_sqrt);
    outs.push_back(matmul(softmax_rows(logits), vh));
  }
  return heads == 1 ? outs[0] : concat_cols(outs);
}

}  // namespace detail_attn

struct SelfAttention {
  int heads = 1;
  LinearLayer qkv;
  LinearLayer proj;

  SelfAttention() = default;
  SelfAttention(Rng& rng, int dim, int heads_)
      : heads(heads_), qkv(rng, dim, 3 * dim), proj(rng, dim, dim) {}

  Tensor forward(const Tensor& x) const {
    const int dim = x.dim(1);
    Tensor fused = qkv.forward(x);
    Tensor q = slice_cols(fused, 0, dim);
    Tensor k = slice_cols(fused, dim, 2 * dim);
    Tensor v = slice_cols(fused, 2 * dim, 3 * dim);
    return proj.forward(detail_attn::attend(q, k, v, heads));
  }

  void collect(const std::string& prefix, ParamList& out) const {
    qkv.collect(prefix + ".qkv", out);
    proj.collect(prefix + ".proj", out);
  }
};

// Queries come from one token set, keys/values from another.
struct CrossAttention {
  int heads = 1;
  LinearLayer q_lin;
  LinearLayer kv_lin;
  LinearLayer proj;

  CrossAttention() = default;
  CrossAttention(Rng& rng, int dim, int heads_)
      : heads(heads_), q_lin(rng, dim, dim), kv_lin(rng, dim, 2 * dim), proj(rng, dim, dim) {}

  Tensor forward(const Tensor& q_tokens, const Tensor& kv_tokens) const {
    const int dim = q_tokens.dim(1);
    Tensor q = q_lin.forward(q_tokens);
    Tensor kv = kv_lin.forward(kv_tokens);
    Tensor k = slice_cols(kv, 0, dim);
    Tensor v = slice_cols(kv, dim, 2 * dim);
    return proj.forward(detail_attn::attend(q, k, v, heads));
  }

  void collect(const std::string& prefix, ParamList& out) const {
    q_lin.collect(prefix + ".q", out);
    kv_lin.collect(prefix + ".kv", out);
    proj.collect(prefix + ".proj", out);
  }
};

// Pre-norm transformer encoder block.
struct EncoderBlock {
  LayerNormLayer ln1;
  SelfAttention attn;
  LayerNormLayer ln2;
  MlpLayer mlp;

  EncoderBlock() = default;
  EncoderBlock(Rng& rng, int dim, int heads, int mlp_hidden)
      : ln1(dim), attn(rng, dim, heads), ln2(dim), mlp(rng, dim, mlp_hidden) {}

  Tensor forward(const Tensor& x) const {
    Tensor y = add(x, attn.forward(ln1.forward(x)));
    return add(y, mlp.forward(ln2.forward(y)));
  }

  void collect(const std::string& prefix, ParamList& out) const {
    ln1.collect(prefix + ".ln1", out);
    attn.collect(prefix + ".attn", out);
    ln2.collect(prefix + ".ln2", out);
    mlp.collect(prefix + ".mlp", out);
  }
};

// Pre-norm decoder block: self-attention, then cross-attention into an
// external token set (normalized by its own LayerNorm), then MLP.
struct DecoderBlock {
  LayerNormLayer ln1;
  SelfAttention self_attn;
  LayerNormLayer ln2;
  LayerNormLayer norm_kv;
  CrossAttention cross_attn;
  LayerNormLayer ln3;
  MlpLayer mlp;

  DecoderBlock() = default;
  DecoderBlock(Rng& rng, int dim, int heads, int mlp_hidden)
      : ln1(dim),
        self_attn(rng, dim, heads),
        ln2(dim),
        norm_kv(dim),
        cross_attn(rng, dim, heads),
        ln3(dim),
        mlp(rng, dim, mlp_hidden) {}

  Tensor forward(const Tensor& x, const Tensor& kv) const {
    Tensor y = add(x, self_attn.forward(ln1.forward(x)));
    y = add(y, cross_attn.forward(ln2.forward(y), norm_kv.forward(kv)));
    return add(y, mlp.forward(ln3.forward(y)));
  }

  void collect(const std::string& prefix, ParamList& out) const {
    ln1.collect(prefix + ".ln1", out);
    self_attn.collect(prefix + ".self", out);
    ln2.collect(prefix + ".ln2", out);
    norm_kv.collect(prefix + ".norm_kv", out);
    cross_attn.collect(prefix + ".cross", out);
    ln3.collect(prefix + ".ln3", out);
    mlp.collect(prefix + ".mlp", out);
  }
};

// gain 2 suits ReLU-followed convolutions; pass 1 for linear outputs.
struct ConvLayer {
  Tensor w;
  Tensor b;

  ConvLayer() = default;
  ConvLayer(Rng& rng, int in_ch, int out_ch, int k, float gain = 2.0f)
      : w(Tensor::param(
            {out_ch, in_ch, k, k},
            rng.trunc_normal_vec(static_cast<size_t>(out_ch) * in_ch * k * k,
                                 std::sqrt(gain / static_cast<float>(in_ch * k * k))))),
        b(Tensor::param({out_ch}, std::vector<float>(out_ch, 0.0f))) {}

  Tensor forward(const Tensor& x) const { return conv2d(x, w, b); }

  void collect(const std::string& prefix, ParamList& out) const {
    add_param(out, prefix, ".w", w);
    add_param(out, prefix, ".b", b);
  }
};

}  // namespace stylesplat
