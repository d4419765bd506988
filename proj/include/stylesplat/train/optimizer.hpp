#pragma once

// Adaptive per-parameter optimizer with decoupled weight decay (AdamW),
// global-norm gradient clipping, and a linear-warmup cosine-decay schedule.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "stylesplat/core/errors.hpp"
#include "stylesplat/model/layers.hpp"

namespace stylesplat {

struct OptimConfig {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 0.01f;
  float grad_clip = 1.0f;  // global L2 norm; <= 0 disables clipping
};

struct ParamGroup {
  ParamList params;
  float lr = 0.0f;
};

// Multiplier on every group's learning rate at a given 0-based step.
inline float lr_scale(int step, int total_steps, int warmup_steps) {
  if (warmup_steps > 0 && step < warmup_steps)
    return static_cast<float>(step + 1) / static_cast<float>(warmup_steps);
  const int span = std::max(1, total_steps - warmup_steps);
  const float progress = static_cast<float>(step - warmup_steps) / static_cast<float>(span);
  return 0.5f * (1.0f + std::cos(3.14159265358979323846f * std::min(progress, 1.0f)));
}

struct OptStateEntry {
  std::string name;
  std::vector<float> m;
  std::vector<float> v;
};

struct OptState {
  uint64_t t = 0;
  std::vector<OptStateEntry> entries;
};

class AdamW {
 public:
  AdamW() = default;

  AdamW(std::vector<ParamGroup> groups, const OptimConfig& cfg = {})
      : groups_(std::move(groups)), cfg_(cfg) {
    slots_.resize(groups_.size());
    for (size_t g = 0; g < groups_.size(); ++g) {
      slots_[g].resize(groups_[g].params.size());
      for (size_t p = 0; p < groups_[g].params.size(); ++p) {
        auto& np = groups_[g].params[p];
        if (!np.tensor.requires_grad())
          throw std::logic_error("optimizer given frozen parameter: " + np.name);
        const size_t n = static_cast<size_t>(np.tensor.numel());
        slots_[g][p].m.assign(n, 0.0f);
        slots_[g][p].v.assign(n, 0.0f);
      }
    }
  }

  const std::vector<ParamGroup>& groups() const { return groups_; }
  uint64_t t() const { return t_; }

  void zero_grad() {
    for (auto& g : groups_)
      for (auto& p : g.params) p.tensor.zero_grad();
  }

  // Scales all gradients so their joint L2 norm is at most grad_clip.
  // Returns the pre-clip norm.
  double clip_gradients() {
    double sq = 0.0;
    for (auto& g : groups_)
      for (auto& p : g.params)
        for (float gi : p.tensor.grad()) sq += static_cast<double>(gi) * gi;
    const double norm = std::sqrt(sq);
    if (cfg_.grad_clip > 0 && norm > cfg_.grad_clip) {
      const float f = static_cast<float>(cfg_.grad_clip / norm);
      for (auto& g : groups_)
        for (auto& p : g.params)
          for (float& gi : p.tensor.grad_mut()) gi *= f;
    }
    return norm;
  }

  void step(float scale = 1.0f) {
    ++t_;
    const float bc1 = 1.0f - static_cast<float>(std::pow(cfg_.beta1, static_cast<double>(t_)));
    const float bc2 = 1.0f - static_cast<float>(std::pow(cfg_.beta2, static_cast<double>(t_)));
    for (size_t g = 0; g < groups_.size(); ++g) {
      const float lr = groups_[g].lr * scale;
      for (size_t p = 0; p < groups_[g].params.size(); ++p) {
        auto& np = groups_[g].params[p];
        float* w = np.tensor.data();
        const std::vector<float>& grad = np.tensor.grad();
        Slot& s = slots_[g][p];
        for (size_t i = 0; i < grad.size(); ++i) {
          s.m[i] = cfg_.beta1 * s.m[i] + (1.0f - cfg_.beta1) * grad[i];
          s.v[i] = cfg_.beta2 * s.v[i] + (1.0f - cfg_.beta2) * grad[i] * grad[i];
          const float mhat = s.m[i] / bc1;
          const float vhat = s.v[i] / bc2;
          w[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w[i]);
        }
      }
    }
  }

  OptState state() const {
    OptState out;
    out.t = t_;
    for (size_t g = 0; g < groups_.size(); ++g)
      for (size_t p = 0; p < groups_[g].params.size(); ++p)
        out.entries.push_back({groups_[g].params[p].name, slots_[g][p].m, slots_[g][p].v});
    return out;
  }

  // Binds saved moment estimates back onto the current groups by name.
  void load_state(const OptState& st) {
    t_ = st.t;
    for (size_t g = 0; g < groups_.size(); ++g) {
      for (size_t p = 0; p < groups_[g].params.size(); ++p) {
        auto& np = groups_[g].params[p];
        const OptStateEntry* found = nullptr;
        for (const auto& e : st.entries)
          if (e.name == np.name) {
            found = &e;
            break;
          }
        if (!found)
          throw CheckpointError("optimizer state has no entry for parameter: " + np.name);
        if (found->m.size() != static_cast<size_t>(np.tensor.numel()))
          throw CheckpointError("optimizer state size mismatch for parameter: " + np.name);
        slots_[g][p].m = found->m;
        slots_[g][p].v = found->v;
      }
    }
  }

 private:
  struct Slot {
    std::vector<float> m;
    std::vector<float> v;
  };

  std::vector<ParamGroup> groups_;
  std::vector<std::vector<Slot>> slots_;
  OptimConfig cfg_;
  uint64_t t_ = 0;
};

}  // namespace stylesplat
