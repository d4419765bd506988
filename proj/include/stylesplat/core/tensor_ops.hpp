#pragma once

// Matrix and image operators for the tape: GEMM-backed matmul/linear,
// layer normalization, 2D convolution via im2col, pooling and bilinear
// resampling on [C,H,W] tensors, per-channel statistics.

#include <Eigen/Dense>

#include "stylesplat/core/tensor.hpp"

namespace stylesplat {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

inline ConstMatMap as_mat(const Tensor& t, int rows, int cols) {
  return ConstMatMap(t.data(), rows, cols);
}

// C = A @ B for [m,k] x [k,n].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul: bad shapes " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<float> v(static_cast<size_t>(m) * n);
  MatMap(v.data(), m, n).noalias() = as_mat(a, m, k) * as_mat(b, k, n);
  return make_op({m, n}, std::move(v), {a, b}, [a, b, m, k, n](detail::Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    ConstMatMap g(self.grad.data(), m, n);
    if (pa->requires_grad) {
      pa->ensure_grad();
      MatMap(pa->grad.data(), m, k).noalias() += g * as_mat(b, k, n).transpose();
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      MatMap(pb->grad.data(), k, n).noalias() += as_mat(a, m, k).transpose() * g;
    }
  });
}

// y = x @ w^T + b for x [R,in], w [out,in], b [out] (b optional).
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b = Tensor()) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1))
    throw std::invalid_argument("linear: bad shapes " + shape_str(x.shape()) + " with w " +
                                shape_str(w.shape()));
  const int rows = x.dim(0), in = x.dim(1), out = w.dim(0);
  std::vector<float> v(static_cast<size_t>(rows) * out);
  MatMap y(v.data(), rows, out);
  y.noalias() = as_mat(x, rows, in) * as_mat(w, out, in).transpose();
  if (b.defined()) {
    if (b.rank() != 1 || b.dim(0) != out) throw std::invalid_argument("linear: bad bias shape");
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(b.data(), out);
  }
  std::vector<Tensor> inputs{x, w};
  if (b.defined()) inputs.push_back(b);
  return make_op({rows, out}, std::move(v), std::move(inputs),
                 [x, w, rows, in, out, has_b = b.defined()](detail::Node& self) {
                   auto& px = self.parents[0];
                   auto& pw = self.parents[1];
                   ConstMatMap g(self.grad.data(), rows, out);
                   if (px->requires_grad) {
                     px->ensure_grad();
                     MatMap(px->grad.data(), rows, in).noalias() += g * as_mat(w, out, in);
                   }
                   if (pw->requires_grad) {
                     pw->ensure_grad();
                     MatMap(pw->grad.data(), out, in).noalias() +=
                         g.transpose() * as_mat(x, rows, in);
                   }
                   if (has_b && self.parents[2]->requires_grad) {
                     auto& pb = self.parents[2];
                     pb->ensure_grad();
                     // Sequential per-column sums keep reruns bit-exact
                     // regardless of how Eigen would vectorize the redux.
                     for (int c = 0; c < out; ++c) {
                       double acc = 0;
                       for (int r = 0; r < rows; ++r)
                         acc += self.grad[static_cast<size_t>(r) * out + c];
                       pb->grad[c] += static_cast<float>(acc);
                     }
                   }
                 });
}

// Pre-activation layer normalization over the last dimension of [R,C].
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         float eps = 1e-6f) {
  if (x.rank() != 2 || gamma.rank() != 1 || beta.rank() != 1 || gamma.dim(0) != x.dim(1) ||
      beta.dim(0) != x.dim(1))
    throw std::invalid_argument("layer_norm: bad shapes");
  const int rows = x.dim(0), cols = x.dim(1);
  std::vector<float> v(x.numel());
  std::vector<float> xhat(x.numel());
  std::vector<float> inv_std(rows);
  const float* px = x.data();
  const float* pg = gamma.data();
  const float* pb = beta.data();
  for (int r = 0; r < rows; ++r) {
    const float* row = px + static_cast<size_t>(r) * cols;
    double mean = 0.0;
    for (int c = 0; c < cols; ++c) mean += row[c];
    mean /= cols;
    double var = 0.0;
    for (int c = 0; c < cols; ++c) {
      double d = row[c] - mean;
      var += d * d;
    }
    var /= cols;
    inv_std[r] = static_cast<float>(1.0 / std::sqrt(var + eps));
    float* xh = xhat.data() + static_cast<size_t>(r) * cols;
    float* out = v.data() + static_cast<size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) {
      xh[c] = (row[c] - static_cast<float>(mean)) * inv_std[r];
      out[c] = xh[c] * pg[c] + pb[c];
    }
  }
  return make_op(x.shape(), std::move(v), {x, gamma, beta},
                 [gamma, rows, cols, xhat = std::move(xhat),
                  inv_std = std::move(inv_std)](detail::Node& self) {
                   auto& px = self.parents[0];
                   auto& pg = self.parents[1];
                   auto& pb = self.parents[2];
                   const float* g = self.grad.data();
                   const float* pgv = gamma.data();
                   if (pg->requires_grad) pg->ensure_grad();
                   if (pb->requires_grad) pb->ensure_grad();
                   if (px->requires_grad) px->ensure_grad();
                   for (int r = 0; r < rows; ++r) {
                     const float* gr = g + static_cast<size_t>(r) * cols;
                     const float* xh = xhat.data() + static_cast<size_t>(r) * cols;
                     if (pg->requires_grad)
                       for (int c = 0; c < cols; ++c) pg->grad[c] += gr[c] * xh[c];
                     if (pb->requires_grad)
                       for (int c = 0; c < cols; ++c) pb->grad[c] += gr[c];
                     if (px->requires_grad) {
                       double sum_dy = 0.0, sum_dy_xh = 0.0;
                       for (int c = 0; c < cols; ++c) {
                         float dy = gr[c] * pgv[c];
                         sum_dy += dy;
                         sum_dy_xh += static_cast<double>(dy) * xh[c];
                       }
                       const float m1 = static_cast<float>(sum_dy / cols);
                       const float m2 = static_cast<float>(sum_dy_xh / cols);
                       float* dst = px->grad.data() + static_cast<size_t>(r) * cols;
                       for (int c = 0; c < cols; ++c) {
                         float dy = gr[c] * pgv[c];
                         dst[c] += inv_std[r] * (dy - m1 - xh[c] * m2);
                       }
                     }
                   }
                 });
}

// ---------------------------------------------------------------------------
// Convolution on a single [Cin,H,W] image, square kernel, stride 1,
// zero padding k/2 (shape preserving). Weights [Cout,Cin,k,k], bias [Cout].

namespace detail_conv {

inline void im2col(const float* x, int cin, int h, int w, int k, float* col) {
  const int pad = k / 2;
  const int hw = h * w;
  // col is [cin*k*k, h*w]
  size_t row = 0;
  for (int c = 0; c < cin; ++c) {
    const float* plane = x + static_cast<size_t>(c) * hw;
    for (int dy = -pad; dy <= pad; ++dy) {
      for (int dx = -pad; dx <= pad; ++dx, ++row) {
        float* out = col + row * hw;
        for (int y = 0; y < h; ++y) {
          int sy = y + dy;
          if (sy < 0 || sy >= h) {
            std::fill(out + static_cast<size_t>(y) * w, out + static_cast<size_t>(y + 1) * w, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<size_t>(sy) * w;
          float* dst = out + static_cast<size_t>(y) * w;
          for (int xcol = 0; xcol < w; ++xcol) {
            int sx = xcol + dx;
            dst[xcol] = (sx >= 0 && sx < w) ? src[sx] : 0.0f;
          }
        }
      }
    }
  }
}

inline void col2im_add(const float* col, int cin, int h, int w, int k, float* dx) {
  const int pad = k / 2;
  const int hw = h * w;
  size_t row = 0;
  for (int c = 0; c < cin; ++c) {
    float* plane = dx + static_cast<size_t>(c) * hw;
    for (int dy = -pad; dy <= pad; ++dy) {
      for (int dx2 = -pad; dx2 <= pad; ++dx2, ++row) {
        const float* src = col + row * hw;
        for (int y = 0; y < h; ++y) {
          int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          float* dst = plane + static_cast<size_t>(sy) * w;
          const float* s = src + static_cast<size_t>(y) * w;
          for (int xcol = 0; xcol < w; ++xcol) {
            int sx = xcol + dx2;
            if (sx >= 0 && sx < w) dst[sx] += s[xcol];
          }
        }
      }
    }
  }
}

}  // namespace detail_conv

inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 3 || w.rank() != 4 || w.dim(1) != x.dim(0) || w.dim(2) != w.dim(3))
    throw std::invalid_argument("conv2d: bad shapes x " + shape_str(x.shape()) + " w " +
                                shape_str(w.shape()));
  const int cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int cout = w.dim(0), k = w.dim(2);
  if (k % 2 == 0) throw std::invalid_argument("conv2d: kernel must be odd");
  const int hw = h * wd;
  const int krows = cin * k * k;

  std::vector<float> col(static_cast<size_t>(krows) * hw);
  detail_conv::im2col(x.data(), cin, h, wd, k, col.data());

  std::vector<float> v(static_cast<size_t>(cout) * hw);
  MatMap y(v.data(), cout, hw);
  y.noalias() = as_mat(w, cout, krows) * ConstMatMap(col.data(), krows, hw);
  if (b.defined()) {
    if (b.rank() != 1 || b.dim(0) != cout) throw std::invalid_argument("conv2d: bad bias");
    for (int c = 0; c < cout; ++c) y.row(c).array() += b.data()[c];
  }
  std::vector<Tensor> inputs{x, w};
  if (b.defined()) inputs.push_back(b);
  return make_op({cout, h, wd}, std::move(v), std::move(inputs),
                 [x, w, cin, h, wd, cout, k, hw, krows, col = std::move(col),
                  has_b = b.defined()](detail::Node& self) {
                   auto& px = self.parents[0];
                   auto& pw = self.parents[1];
                   ConstMatMap g(self.grad.data(), cout, hw);
                   if (pw->requires_grad) {
                     pw->ensure_grad();
                     MatMap(pw->grad.data(), cout, krows).noalias() +=
                         g * ConstMatMap(col.data(), krows, hw).transpose();
                   }
                   if (has_b && self.parents[2]->requires_grad) {
                     auto& pb = self.parents[2];
                     pb->ensure_grad();
                     // Sequential sum: Eigen's vectorized redux reassociates
                     // depending on buffer alignment, which breaks bit-exact
                     // reruns.
                     for (int c = 0; c < cout; ++c) {
                       const float* row = self.grad.data() + static_cast<size_t>(c) * hw;
                       double acc = 0;
                       for (int i = 0; i < hw; ++i) acc += row[i];
                       pb->grad[c] += static_cast<float>(acc);
                     }
                   }
                   if (px->requires_grad) {
                     px->ensure_grad();
                     std::vector<float> dcol(static_cast<size_t>(krows) * hw);
                     MatMap(dcol.data(), krows, hw).noalias() =
                         as_mat(w, cout, krows).transpose() * g;
                     detail_conv::col2im_add(dcol.data(), cin, h, wd, k, px->grad.data());
                   }
                 });
}

// 2x2 average pooling, stride 2, on [C,H,W] with even H, W.
inline Tensor avg_pool2(const Tensor& x) {
  if (x.rank() != 3 || x.dim(1) % 2 || x.dim(2) % 2)
    throw std::invalid_argument("avg_pool2: need [C,2h,2w]");
  const int c = x.dim(0), h = x.dim(1) / 2, w = x.dim(2) / 2;
  const int sh = x.dim(1), sw = x.dim(2);
  std::vector<float> v(static_cast<size_t>(c) * h * w);
  const float* px = x.data();
  for (int ch = 0; ch < c; ++ch) {
    const float* plane = px + static_cast<size_t>(ch) * sh * sw;
    float* out = v.data() + static_cast<size_t>(ch) * h * w;
    for (int y = 0; y < h; ++y)
      for (int xcol = 0; xcol < w; ++xcol) {
        const float* p0 = plane + static_cast<size_t>(2 * y) * sw + 2 * xcol;
        out[static_cast<size_t>(y) * w + xcol] =
            0.25f * (p0[0] + p0[1] + p0[sw] + p0[sw + 1]);
      }
  }
  return make_op({c, h, w}, std::move(v), {x}, [c, h, w, sh, sw](detail::Node& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      float* plane = p->grad.data() + static_cast<size_t>(ch) * sh * sw;
      const float* g = self.grad.data() + static_cast<size_t>(ch) * h * w;
      for (int y = 0; y < h; ++y)
        for (int xcol = 0; xcol < w; ++xcol) {
          float gv = 0.25f * g[static_cast<size_t>(y) * w + xcol];
          float* p0 = plane + static_cast<size_t>(2 * y) * sw + 2 * xcol;
          p0[0] += gv;
          p0[1] += gv;
          p0[sw] += gv;
          p0[sw + 1] += gv;
        }
    }
  });
}

// Bilinear 2x upsampling on [C,H,W] (half-pixel alignment).
inline Tensor upsample_bilinear2x(const Tensor& x) {
  if (x.rank() != 3) throw std::invalid_argument("upsample_bilinear2x: need [C,H,W]");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int oh = 2 * h, ow = 2 * w;
  // Precompute the 1D sample taps: src = (dst + 0.5)/2 - 0.5, clamped.
  auto taps = [](int out_n, int in_n) {
    std::vector<std::tuple<int, int, float>> t(out_n);  // (i0, i1, frac)
    for (int i = 0; i < out_n; ++i) {
      float s = (i + 0.5f) * 0.5f - 0.5f;
      s = std::max(0.0f, std::min(s, static_cast<float>(in_n - 1)));
      int i0 = static_cast<int>(std::floor(s));
      int i1 = std::min(i0 + 1, in_n - 1);
      t[i] = {i0, i1, s - i0};
    }
    return t;
  };
  auto ty = taps(oh, h), tx = taps(ow, w);
  std::vector<float> v(static_cast<size_t>(c) * oh * ow);
  const float* px = x.data();
  for (int ch = 0; ch < c; ++ch) {
    const float* plane = px + static_cast<size_t>(ch) * h * w;
    float* out = v.data() + static_cast<size_t>(ch) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      auto [y0, y1, fy] = ty[y];
      for (int xcol = 0; xcol < ow; ++xcol) {
        auto [x0, x1, fx] = tx[xcol];
        float a = plane[static_cast<size_t>(y0) * w + x0];
        float b = plane[static_cast<size_t>(y0) * w + x1];
        float cc = plane[static_cast<size_t>(y1) * w + x0];
        float d = plane[static_cast<size_t>(y1) * w + x1];
        out[static_cast<size_t>(y) * ow + xcol] =
            (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * cc + fx * d);
      }
    }
  }
  return make_op({c, oh, ow}, std::move(v), {x},
                 [c, h, w, oh, ow, ty = std::move(ty), tx = std::move(tx)](detail::Node& self) {
                   auto& p = self.parents[0];
                   p->ensure_grad();
                   for (int ch = 0; ch < c; ++ch) {
                     float* plane = p->grad.data() + static_cast<size_t>(ch) * h * w;
                     const float* g = self.grad.data() + static_cast<size_t>(ch) * oh * ow;
                     for (int y = 0; y < oh; ++y) {
                       auto [y0, y1, fy] = ty[y];
                       for (int xcol = 0; xcol < ow; ++xcol) {
                         auto [x0, x1, fx] = tx[xcol];
                         float gv = g[static_cast<size_t>(y) * ow + xcol];
                         plane[static_cast<size_t>(y0) * w + x0] += gv * (1 - fy) * (1 - fx);
                         plane[static_cast<size_t>(y0) * w + x1] += gv * (1 - fy) * fx;
                         plane[static_cast<size_t>(y1) * w + x0] += gv * fy * (1 - fx);
                         plane[static_cast<size_t>(y1) * w + x1] += gv * fy * fx;
                       }
                     }
                   }
                 });
}

// ---------------------------------------------------------------------------
// Per-channel statistics over [C,H,W]

inline Tensor channel_mean(const Tensor& x) {
  if (x.rank() != 3) throw std::invalid_argument("channel_mean: need [C,H,W]");
  const int c = x.dim(0);
  const int hw = x.dim(1) * x.dim(2);
  std::vector<float> v(c);
  const float* px = x.data();
  for (int ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    const float* plane = px + static_cast<size_t>(ch) * hw;
    for (int i = 0; i < hw; ++i) acc += plane[i];
    v[ch] = static_cast<float>(acc / hw);
  }
  return make_op({c}, std::move(v), {x}, [c, hw](detail::Node& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      float g = self.grad[ch] / hw;
      float* plane = p->grad.data() + static_cast<size_t>(ch) * hw;
      for (int i = 0; i < hw; ++i) plane[i] += g;
    }
  });
}

// Population variance per channel (biased, divides by H*W).
inline Tensor channel_var(const Tensor& x) {
  if (x.rank() != 3) throw std::invalid_argument("channel_var: need [C,H,W]");
  const int c = x.dim(0);
  const int hw = x.dim(1) * x.dim(2);
  std::vector<float> v(c);
  std::vector<float> means(c);
  const float* px = x.data();
  for (int ch = 0; ch < c; ++ch) {
    const float* plane = px + static_cast<size_t>(ch) * hw;
    double acc = 0.0;
    for (int i = 0; i < hw; ++i) acc += plane[i];
    double mean = acc / hw;
    means[ch] = static_cast<float>(mean);
    double var = 0.0;
    for (int i = 0; i < hw; ++i) {
      double d = plane[i] - mean;
      var += d * d;
    }
    v[ch] = static_cast<float>(var / hw);
  }
  return make_op({c}, std::move(v), {x}, [x, c, hw, means = std::move(means)](detail::Node& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    const float* px = x.data();
    for (int ch = 0; ch < c; ++ch) {
      float g = self.grad[ch] * 2.0f / hw;
      const float* plane = px + static_cast<size_t>(ch) * hw;
      float* dst = p->grad.data() + static_cast<size_t>(ch) * hw;
      for (int i = 0; i < hw; ++i) dst[i] += g * (plane[i] - means[ch]);
    }
  });
}

// Unit-normalizes the channel vector at every spatial position of [C,H,W].
inline Tensor normalize_channels(const Tensor& x, float eps = 1e-8f) {
  if (x.rank() != 3) throw std::invalid_argument("normalize_channels: need [C,H,W]");
  const int c = x.dim(0);
  const int hw = x.dim(1) * x.dim(2);
  std::vector<float> v(x.numel());
  std::vector<float> inv_norm(hw);
  const float* px = x.data();
  for (int i = 0; i < hw; ++i) {
    double sq = 0.0;
    for (int ch = 0; ch < c; ++ch) {
      float val = px[static_cast<size_t>(ch) * hw + i];
      sq += static_cast<double>(val) * val;
    }
    inv_norm[i] = 1.0f / (static_cast<float>(std::sqrt(sq)) + eps);
    for (int ch = 0; ch < c; ++ch)
      v[static_cast<size_t>(ch) * hw + i] = px[static_cast<size_t>(ch) * hw + i] * inv_norm[i];
  }
  return make_op(x.shape(), std::move(v), {x},
                 [x, c, hw, eps, inv_norm = std::move(inv_norm)](detail::Node& self) {
                   auto& p = self.parents[0];
                   p->ensure_grad();
                   const float* px = x.data();
                   for (int i = 0; i < hw; ++i) {
                     const float in = inv_norm[i];
                     double dot = 0.0;
                     double sq = 0.0;
                     for (int ch = 0; ch < c; ++ch) {
                       size_t idx = static_cast<size_t>(ch) * hw + i;
                       dot += static_cast<double>(self.grad[idx]) * px[idx];
                       sq += static_cast<double>(px[idx]) * px[idx];
                     }
                     const float norm = static_cast<float>(std::sqrt(sq));
                     // d/dx of x_c/(norm+eps): I/(norm+eps) - x x^T/(norm (norm+eps)^2)
                     const float k =
                         norm > 0.0f ? static_cast<float>(dot) * in * in / norm : 0.0f;
                     for (int ch = 0; ch < c; ++ch) {
                       size_t idx = static_cast<size_t>(ch) * hw + i;
                       p->grad[idx] += in * self.grad[idx] - k * px[idx];
                     }
                   }
                 });
}

// Token/feature-map layout permutations

// [C, H, W] -> [(H/p)*(W/p), C*p*p]. Patches walk the image in raster order;
// within a patch the row is channel-major, then dy, then dx.
inline Tensor patchify(const Tensor& x, int p) {
  if (x.rank() != 3) throw std::invalid_argument("patchify: need [C,H,W]");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (p <= 0 || h % p != 0 || w % p != 0)
    throw std::invalid_argument("patchify: size not divisible by patch");
  const int gh = h / p, gw = w / p;
  const int cols = c * p * p;
  std::vector<float> v(static_cast<size_t>(gh) * gw * cols);
  const float* px = x.data();
  for (int py = 0; py < gh; ++py)
    for (int pxi = 0; pxi < gw; ++pxi) {
      float* row = v.data() + (static_cast<size_t>(py) * gw + pxi) * cols;
      for (int ch = 0; ch < c; ++ch)
        for (int dy = 0; dy < p; ++dy)
          for (int dx = 0; dx < p; ++dx)
            row[(ch * p + dy) * p + dx] =
                px[(static_cast<size_t>(ch) * h + py * p + dy) * w + pxi * p + dx];
    }
  return make_op({gh * gw, cols}, std::move(v), {x}, [c, h, w, p, gh, gw, cols](detail::Node& self) {
    auto& parent = self.parents[0];
    parent->ensure_grad();
    for (int py = 0; py < gh; ++py)
      for (int pxi = 0; pxi < gw; ++pxi) {
        const float* row = self.grad.data() + (static_cast<size_t>(py) * gw + pxi) * cols;
        for (int ch = 0; ch < c; ++ch)
          for (int dy = 0; dy < p; ++dy)
            for (int dx = 0; dx < p; ++dx)
              parent->grad[(static_cast<size_t>(ch) * h + py * p + dy) * w + pxi * p + dx] +=
                  row[(ch * p + dy) * p + dx];
      }
  });
}

// tokens [h*w, C] in raster order -> planar feature map [C, h, w]
inline Tensor tokens_to_map(const Tensor& tokens, int h, int w) {
  if (tokens.rank() != 2 || tokens.dim(0) != h * w)
    throw std::invalid_argument("tokens_to_map: token count must equal h*w");
  const int c = tokens.dim(1);
  std::vector<float> v(static_cast<size_t>(c) * h * w);
  const float* pt = tokens.data();
  for (int i = 0; i < h * w; ++i)
    for (int ch = 0; ch < c; ++ch)
      v[static_cast<size_t>(ch) * h * w + i] = pt[static_cast<size_t>(i) * c + ch];
  return make_op({c, h, w}, std::move(v), {tokens}, [c, h, w](detail::Node& self) {
    auto& parent = self.parents[0];
    parent->ensure_grad();
    for (int i = 0; i < h * w; ++i)
      for (int ch = 0; ch < c; ++ch)
        parent->grad[static_cast<size_t>(i) * c + ch] +=
            self.grad[static_cast<size_t>(ch) * h * w + i];
  });
}

}  // namespace stylesplat
