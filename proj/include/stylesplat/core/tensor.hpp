#pragma once

// Reverse-mode automatic differentiation over dense row-major float32 tensors.
// Every operator builds a tape node holding the forward value plus a closure
// that scatters the node's cotangent into its parents; Tensor::backward walks
// the tape once in reverse topological order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace stylesplat {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;
  bool requires_grad = false;
  bool is_leaf = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0f);
  }
};

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

// Disables tape construction for its scope; forward values still computed.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

  static Tensor from(Shape shape, std::vector<float> data) {
    if (static_cast<int64_t>(data.size()) != shape_numel(shape))
      throw std::invalid_argument("tensor data size does not match shape " + shape_str(shape));
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->is_leaf = true;
    return Tensor(std::move(n));
  }

  static Tensor zeros(Shape shape) {
    auto count = shape_numel(shape);
    return from(std::move(shape), std::vector<float>(count, 0.0f));
  }

  static Tensor full(Shape shape, float v) {
    auto count = shape_numel(shape);
    return from(std::move(shape), std::vector<float>(count, v));
  }

  static Tensor scalar(float v) { return from({1}, {v}); }

  // Leaf that accumulates gradient; the unit of optimization and checkpointing.
  static Tensor param(Shape shape, std::vector<float> data) {
    Tensor t = from(std::move(shape), std::move(data));
    t.node_->requires_grad = true;
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape.at(i); }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }

  float* data() { return node_->value.data(); }
  const float* data() const { return node_->value.data(); }
  std::vector<float>& vec() { return node_->value; }
  const std::vector<float>& vec() const { return node_->value; }

  float item() const {
    if (numel() != 1) throw std::logic_error("item() on non-scalar tensor");
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }

  void set_requires_grad(bool v) {
    if (!node_->is_leaf) throw std::logic_error("set_requires_grad on non-leaf tensor");
    node_->requires_grad = v;
  }

  const std::vector<float>& grad() const {
    const_cast<detail::Node*>(node_.get())->ensure_grad();
    return node_->grad;
  }
  std::vector<float>& grad_mut() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
  }

  std::shared_ptr<detail::Node> node() const { return node_; }

  // Reverse pass from a scalar root. Gradients accumulate into every
  // reachable tensor that requires grad (call zero_grad between steps).
  void backward() const {
    if (numel() != 1) throw std::logic_error("backward() requires a scalar root");
    if (!node_->requires_grad) return;

    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [nd, idx] = stack.back();
      if (idx < nd->parents.size()) {
        detail::Node* p = nd->parents[idx++].get();
        if (p->requires_grad && !seen.count(p)) {
          seen.insert(p);
          stack.emplace_back(p, 0);
        }
      } else {
        order.push_back(nd);
        stack.pop_back();
      }
    }

    node_->ensure_grad();
    node_->grad[0] = 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      detail::Node* nd = *it;
      if (nd->backward) nd->backward(*nd);
    }
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Builds a tape node. `backward` reads self.grad and accumulates into the
// grads of self.parents (which alias the passed inputs, in order).
inline Tensor make_op(Shape out_shape, std::vector<float> value,
                      std::vector<Tensor> inputs,
                      std::function<void(detail::Node&)> backward) {
  if (static_cast<int64_t>(value.size()) != shape_numel(out_shape))
    throw std::invalid_argument("make_op value size does not match shape");
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(out_shape);
  n->value = std::move(value);
  bool need = false;
  if (detail::grad_mode()) {
    for (const Tensor& t : inputs)
      if (t.defined() && t.requires_grad()) need = true;
  }
  if (need) {
    n->requires_grad = true;
    n->parents.reserve(inputs.size());
    for (const Tensor& t : inputs) n->parents.push_back(t.node());
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic

inline Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<float> v(a.numel());
  const float* pa = a.data();
  const float* pb = b.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] = pa[i] + pb[i];
  return make_op(a.shape(), std::move(v), {a, b}, [](detail::Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      p->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<float> v(a.numel());
  const float* pa = a.data();
  const float* pb = b.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] = pa[i] - pb[i];
  return make_op(a.shape(), std::move(v), {a, b}, [](detail::Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
    }
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<float> v(a.numel());
  const float* pa = a.data();
  const float* pb = b.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] = pa[i] * pb[i];
  return make_op(a.shape(), std::move(v), {a, b}, [a, b](detail::Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      pa->ensure_grad();
      const float* vb = b.data();
      for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * vb[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      const float* va = a.data();
      for (size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i] * va[i];
    }
  });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "div");
  std::vector<float> v(a.numel());
  const float* pa = a.data();
  const float* pb = b.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] = pa[i] / pb[i];
  return make_op(a.shape(), std::move(v), {a, b}, [a, b](detail::Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    const float* va = a.data();
    const float* vb = b.data();
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] / vb[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i)
        pb->grad[i] -= self.grad[i] * va[i] / (vb[i] * vb[i]);
    }
  });
}

inline Tensor scale(const Tensor& a, float s) {
  std::vector<float> v(a.numel());
  const float* pa = a.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] = pa[i] * s;
  return make_op(a.shape(), std::move(v), {a}, [s](detail::Node& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] * s;
  });
}

inline Tensor add_scalar(const Tensor& a, float s) {
  std::vector<float> v(a.numel());
  const float* pa = a.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] = pa[i] + s;
  return make_op(a.shape(), std::move(v), {a}, [](detail::Node& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
  });
}

inline Tensor neg(const Tensor& a) { return scale(a, -1.0f); }

// Broadcast add of a [C] row vector over a [R,C] matrix.
inline Tensor add_bias(const Tensor& x, const Tensor& b) {
  if (x.rank() != 2 || b.rank() != 1 || x.dim(1) != b.dim(0))
    throw std::invalid_argument("add_bias: expected [R,C] + [C]");
  const int rows = x.dim(0), cols = x.dim(1);
  std::vector<float> v(x.numel());
  const float* px = x.data();
  const float* pb = b.data();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) v[r * cols + c] = px[r * cols + c] + pb[c];
  return make_op(x.shape(), std::move(v), {x, b}, [rows, cols](detail::Node& self) {
    auto& px = self.parents[0];
    auto& pb = self.parents[1];
    if (px->requires_grad) {
      px->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) pb->grad[c] += self.grad[r * cols + c];
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities

inline Tensor relu(const Tensor& a) {
  std::vector<float> v(a.numel());
  const float* pa = a.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] = pa[i] > 0.0f ? pa[i] : 0.0f;
  return make_op(a.shape(), std::move(v), {a}, [a](detail::Node& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    const float* va = a.data();
    for (size_t i = 0; i < self.grad.size(); ++i)
      if (va[i] > 0.0f) p->grad[i] += self.grad[i];
  });
}

inline Tensor gelu(const Tensor& a) {
  constexpr float k = 0.7978845608028654f;  // sqrt(2/pi)
  std::vector<float> v(a.numel());
  const float* pa = a.data();
  for (size_t i = 0; i < v.size(); ++i) {
    float x = pa[i];
    float t = std::tanh(k * (x + 0.044715f * x * x * x));
    v[i] = 0.5f * x * (1.0f + t);
  }
  return make_op(a.shape(), std::move(v), {a}, [a](detail::Node& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    const float* va = a.data();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      float x = va[i];
      float u = k * (x + 0.044715f * x * x * x);
      float t = std::tanh(u);
      float du = k * (1.0f + 3.0f * 0.044715f * x * x);
      float d = 0.5f * (1.0f + t) + 0.5f * x * (1.0f - t * t) * du;
      p->grad[i] += self.grad[i] * d;
    }
  });
}

inline float sigmoid_scalar(float x) {
  if (x >= 0.0f) {
    float e = std::exp(-x);
    return 1.0f / (1.0f + e);
  }
  float e = std::exp(x);
  return e / (1.0f + e);
}

inline Tensor sigmoid(const Tensor& a) {
  std::vector<float> v(a.numel());
  const float* pa = a.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] = sigmoid_scalar(pa[i]);
  Tensor out = make_op(a.shape(), std::move(v), {a}, nullptr);
  if (out.requires_grad()) {
    auto node = out.node();
    node->backward = [out_vals = out.vec()](detail::Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) {
        float s = out_vals[i];
        p->grad[i] += self.grad[i] * s * (1.0f - s);
      }
    };
  }
  return out;
}

inline float softplus_scalar(float x) {
  if (x > 20.0f) return x;
  if (x < -20.0f) return std::exp(x);
  return std::log1p(std::exp(x));
}

inline Tensor softplus(const Tensor& a) {
  std::vector<float> v(a.numel());
  const float* pa = a.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] = softplus_scalar(pa[i]);
  return make_op(a.shape(), std::move(v), {a}, [a](detail::Node& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    const float* va = a.data();
    for (size_t i = 0; i < self.grad.size(); ++i)
      p->grad[i] += self.grad[i] * sigmoid_scalar(va[i]);
  });
}

inline Tensor exp_t(const Tensor& a) {
  std::vector<float> v(a.numel());
  const float* pa = a.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] = std::exp(pa[i]);
  Tensor out = make_op(a.shape(), std::move(v), {a}, nullptr);
  if (out.requires_grad()) {
    out.node()->backward = [out_vals = out.vec()](detail::Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] * out_vals[i];
    };
  }
  return out;
}

inline Tensor log_t(const Tensor& a) {
  std::vector<float> v(a.numel());
  const float* pa = a.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] = std::log(pa[i]);
  return make_op(a.shape(), std::move(v), {a}, [a](detail::Node& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    const float* va = a.data();
    for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] / va[i];
  });
}

inline Tensor sqrt_t(const Tensor& a) {
  std::vector<float> v(a.numel());
  const float* pa = a.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] = std::sqrt(pa[i]);
  Tensor out = make_op(a.shape(), std::move(v), {a}, nullptr);
  if (out.requires_grad()) {
    out.node()->backward = [out_vals = out.vec()](detail::Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i)
        p->grad[i] += self.grad[i] * 0.5f / out_vals[i];
    };
  }
  return out;
}

inline Tensor square(const Tensor& a) {
  std::vector<float> v(a.numel());
  const float* pa = a.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] = pa[i] * pa[i];
  return make_op(a.shape(), std::move(v), {a}, [a](detail::Node& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    const float* va = a.data();
    for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] * 2.0f * va[i];
  });
}

// ---------------------------------------------------------------------------
// Reductions

inline Tensor sum_all(const Tensor& a) {
  double acc = 0.0;
  const float* pa = a.data();
  for (int64_t i = 0; i < a.numel(); ++i) acc += pa[i];
  return make_op({1}, {static_cast<float>(acc)}, {a}, [](detail::Node& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    float g = self.grad[0];
    for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += g;
  });
}

inline Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0f / a.numel()); }

inline Tensor mse(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mse");
  double acc = 0.0;
  const float* pa = a.data();
  const float* pb = b.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) {
    double d = static_cast<double>(pa[i]) - pb[i];
    acc += d * d;
  }
  float inv_n = 1.0f / n;
  return make_op({1}, {static_cast<float>(acc / n)}, {a, b}, [a, b, inv_n](detail::Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    const float* va = a.data();
    const float* vb = b.data();
    float g = self.grad[0] * 2.0f * inv_n;
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += g * (va[i] - vb[i]);
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (size_t i = 0; i < pb->grad.size(); ++i) pb->grad[i] -= g * (va[i] - vb[i]);
    }
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation

inline Tensor reshape(const Tensor& a, Shape s) {
  if (shape_numel(s) != a.numel())
    throw std::invalid_argument("reshape: numel mismatch " + shape_str(a.shape()) + " -> " +
                                shape_str(s));
  return make_op(std::move(s), a.vec(), {a}, [](detail::Node& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
  });
}

inline Tensor slice_rows(const Tensor& a, int r0, int r1) {
  if (a.rank() != 2 || r0 < 0 || r1 > a.dim(0) || r0 >= r1)
    throw std::invalid_argument("slice_rows: bad range");
  const int cols = a.dim(1);
  std::vector<float> v(static_cast<size_t>(r1 - r0) * cols);
  std::copy(a.data() + static_cast<size_t>(r0) * cols, a.data() + static_cast<size_t>(r1) * cols,
            v.begin());
  return make_op({r1 - r0, cols}, std::move(v), {a}, [r0, cols](detail::Node& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    float* dst = p->grad.data() + static_cast<size_t>(r0) * cols;
    for (size_t i = 0; i < self.grad.size(); ++i) dst[i] += self.grad[i];
  });
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  const int cols = parts[0].dim(1);
  int rows = 0;
  for (const Tensor& t : parts) {
    if (t.rank() != 2 || t.dim(1) != cols) throw std::invalid_argument("concat_rows: col mismatch");
    rows += t.dim(0);
  }
  std::vector<float> v;
  v.reserve(static_cast<size_t>(rows) * cols);
  for (const Tensor& t : parts) v.insert(v.end(), t.vec().begin(), t.vec().end());
  return make_op({rows, cols}, std::move(v), parts, [](detail::Node& self) {
    size_t off = 0;
    for (auto& p : self.parents) {
      size_t n = p->value.size();
      if (p->requires_grad) {
        p->ensure_grad();
        for (size_t i = 0; i < n; ++i) p->grad[i] += self.grad[off + i];
      }
      off += n;
    }
  });
}

inline Tensor slice_cols(const Tensor& a, int c0, int c1) {
  if (a.rank() != 2 || c0 < 0 || c1 > a.dim(1) || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range");
  const int rows = a.dim(0), cols = a.dim(1), w = c1 - c0;
  std::vector<float> v(static_cast<size_t>(rows) * w);
  const float* pa = a.data();
  for (int r = 0; r < rows; ++r)
    std::copy(pa + static_cast<size_t>(r) * cols + c0, pa + static_cast<size_t>(r) * cols + c1,
              v.begin() + static_cast<size_t>(r) * w);
  return make_op({rows, w}, std::move(v), {a}, [rows, cols, c0, w](detail::Node& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    for (int r = 0; r < rows; ++r) {
      float* dst = p->grad.data() + static_cast<size_t>(r) * cols + c0;
      const float* src = self.grad.data() + static_cast<size_t>(r) * w;
      for (int c = 0; c < w; ++c) dst[c] += src[c];
    }
  });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  const int rows = parts[0].dim(0);
  int cols = 0;
  std::vector<int> widths;
  for (const Tensor& t : parts) {
    if (t.rank() != 2 || t.dim(0) != rows) throw std::invalid_argument("concat_cols: row mismatch");
    widths.push_back(t.dim(1));
    cols += t.dim(1);
  }
  std::vector<float> v(static_cast<size_t>(rows) * cols);
  int off = 0;
  for (size_t k = 0; k < parts.size(); ++k) {
    const float* src = parts[k].data();
    for (int r = 0; r < rows; ++r)
      std::copy(src + static_cast<size_t>(r) * widths[k], src + static_cast<size_t>(r + 1) * widths[k],
                v.begin() + static_cast<size_t>(r) * cols + off);
    off += widths[k];
  }
  return make_op({rows, cols}, std::move(v), parts, [rows, cols, widths](detail::Node& self) {
    int off = 0;
    for (size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = self.parents[k];
      if (p->requires_grad) {
        p->ensure_grad();
        for (int r = 0; r < rows; ++r) {
          const float* src = self.grad.data() + static_cast<size_t>(r) * cols + off;
          float* dst = p->grad.data() + static_cast<size_t>(r) * widths[k];
          for (int c = 0; c < widths[k]; ++c) dst[c] += src[c];
        }
      }
      off += widths[k];
    }
  });
}

inline Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw std::invalid_argument("transpose: rank-2 only");
  const int rows = a.dim(0), cols = a.dim(1);
  std::vector<float> v(a.numel());
  const float* pa = a.data();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) v[static_cast<size_t>(c) * rows + r] = pa[static_cast<size_t>(r) * cols + c];
  return make_op({cols, rows}, std::move(v), {a}, [rows, cols](detail::Node& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        p->grad[static_cast<size_t>(r) * cols + c] += self.grad[static_cast<size_t>(c) * rows + r];
  });
}

// ---------------------------------------------------------------------------
// Softmax over the last dimension of a [R,C] matrix

inline Tensor softmax_rows(const Tensor& a) {
  if (a.rank() != 2) throw std::invalid_argument("softmax_rows: rank-2 only");
  const int rows = a.dim(0), cols = a.dim(1);
  std::vector<float> v(a.numel());
  const float* pa = a.data();
  for (int r = 0; r < rows; ++r) {
    const float* row = pa + static_cast<size_t>(r) * cols;
    float* out = v.data() + static_cast<size_t>(r) * cols;
    float mx = row[0];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
    double denom = 0.0;
    for (int c = 0; c < cols; ++c) {
      out[c] = std::exp(row[c] - mx);
      denom += out[c];
    }
    float inv = static_cast<float>(1.0 / denom);
    for (int c = 0; c < cols; ++c) out[c] *= inv;
  }
  Tensor out = make_op(a.shape(), std::move(v), {a}, nullptr);
  if (out.requires_grad()) {
    out.node()->backward = [rows, cols, sm = out.vec()](detail::Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (int r = 0; r < rows; ++r) {
        const float* s = sm.data() + static_cast<size_t>(r) * cols;
        const float* g = self.grad.data() + static_cast<size_t>(r) * cols;
        float* dst = p->grad.data() + static_cast<size_t>(r) * cols;
        double dot = 0.0;
        for (int c = 0; c < cols; ++c) dot += static_cast<double>(g[c]) * s[c];
        for (int c = 0; c < cols; ++c) dst[c] += s[c] * (g[c] - static_cast<float>(dot));
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Row-wise L2 normalization (unit quaternions and feature vectors)

inline Tensor normalize_rows(const Tensor& a) {
  if (a.rank() != 2) throw std::invalid_argument("normalize_rows: rank-2 only");
  const int rows = a.dim(0), cols = a.dim(1);
  std::vector<float> v(a.numel());
  std::vector<float> inv_norm(rows);
  const float* pa = a.data();
  for (int r = 0; r < rows; ++r) {
    const float* row = pa + static_cast<size_t>(r) * cols;
    double sq = 0.0;
    for (int c = 0; c < cols; ++c) sq += static_cast<double>(row[c]) * row[c];
    if (sq == 0.0)
      throw std::domain_error("normalize_rows: zero-norm row " + std::to_string(r));
    inv_norm[r] = static_cast<float>(1.0 / std::sqrt(sq));
    for (int c = 0; c < cols; ++c) v[static_cast<size_t>(r) * cols + c] = row[c] * inv_norm[r];
  }
  return make_op(a.shape(), std::move(v), {a},
                 [a, rows, cols, inv_norm](detail::Node& self) {
                   auto& p = self.parents[0];
                   p->ensure_grad();
                   const float* va = a.data();
                   for (int r = 0; r < rows; ++r) {
                     const float* x = va + static_cast<size_t>(r) * cols;
                     const float* g = self.grad.data() + static_cast<size_t>(r) * cols;
                     float* dst = p->grad.data() + static_cast<size_t>(r) * cols;
                     const float in = inv_norm[r];
                     double dot = 0.0;
                     for (int c = 0; c < cols; ++c) dot += static_cast<double>(g[c]) * x[c];
                     const float k = static_cast<float>(dot) * in * in * in;
                     for (int c = 0; c < cols; ++c) dst[c] += in * g[c] - k * x[c];
                   }
                 });
}

}  // namespace stylesplat
