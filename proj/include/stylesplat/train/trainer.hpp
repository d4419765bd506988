#pragma once

// Two-stage curriculum. Pretraining drives the whole model with a
// photometric loss on re-rendered views, with a random input frame feeding
// the appearance branch. Fine-tuning freezes the structure path and trains
// the appearance path against a style corpus, keeping an identity term so
// content inputs still reconstruct themselves.
//
// Every step is a pure function of (seed, global step index), so a run can
// be paused at any checkpoint and resumed bit-exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "stylesplat/core/image.hpp"
#include "stylesplat/core/rng.hpp"
#include "stylesplat/data/dataset_io.hpp"
#include "stylesplat/losses/losses.hpp"
#include "stylesplat/model/model.hpp"
#include "stylesplat/render/diff_render.hpp"
#include "stylesplat/train/checkpoint.hpp"
#include "stylesplat/train/optimizer.hpp"

namespace stylesplat {

struct TrainConfig {
  LossPhase phase = LossPhase::kNvs;
  int n_views = 2;
  int steps = 2000;       // horizon of this stage; also the schedule length
  int batch_size = 2;
  int holdout_scenes = 2;  // trailing scenes excluded from training
  // Held-out frames supervised per sample. Input reconstructions are nearly
  // depth-invariant for a pixel-aligned model, so novel targets carry the
  // geometry signal; extra targets reuse the same encoder pass and cost only
  // a render each.
  int target_views = 1;
  // Heads and decoders always run at lr_new. lr_backbone covers the encoders
  // and embeddings during pretraining; it matches lr_new by default because
  // everything here starts from random init, and is meant to be lowered when
  // warm-starting from an external geometry backbone.
  float lr_new = 2e-4f;
  float lr_backbone = 2e-4f;
  float lr_style_encoder = 2e-5f;
  int warmup_steps = 100;
  OptimConfig optim;
  LossWeights loss;
  uint64_t seed = 0;
  uint64_t start_step = 0;    // cumulative steps completed before this stage
  int checkpoint_every = 0;   // also snapshot to <out>.step<k> every k steps
  std::string out_checkpoint;
  std::string log_csv;
};

inline const char* phase_name(LossPhase p) {
  return p == LossPhase::kNvs ? "nvs" : "stylize";
}

inline LossPhase phase_from_name(const std::string& s) {
  if (s == "nvs") return LossPhase::kNvs;
  if (s == "stylize") return LossPhase::kStylize;
  throw UsageError("unknown training phase: " + s);
}

inline void to_json(nlohmann::json& j, const LossWeights& w) {
  j = {{"lambda_style", w.lambda_style},
       {"mse_weight", w.mse_weight},
       {"perceptual_weight", w.perceptual_weight},
       {"identity_weight", w.identity_weight}};
}

inline void from_json(const nlohmann::json& j, LossWeights& w) {
  w.lambda_style = j.value("lambda_style", w.lambda_style);
  w.mse_weight = j.value("mse_weight", w.mse_weight);
  w.perceptual_weight = j.value("perceptual_weight", w.perceptual_weight);
  w.identity_weight = j.value("identity_weight", w.identity_weight);
}

inline void to_json(nlohmann::json& j, const OptimConfig& c) {
  j = {{"beta1", c.beta1},
       {"beta2", c.beta2},
       {"eps", c.eps},
       {"weight_decay", c.weight_decay},
       {"grad_clip", c.grad_clip}};
}

inline void from_json(const nlohmann::json& j, OptimConfig& c) {
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"phase", phase_name(c.phase)},
       {"n_views", c.n_views},
       {"steps", c.steps},
       {"batch_size", c.batch_size},
       {"holdout_scenes", c.holdout_scenes},
       {"target_views", c.target_views},
       {"lr_new", c.lr_new},
       {"lr_backbone", c.lr_backbone},
       {"lr_style_encoder", c.lr_style_encoder},
       {"warmup_steps", c.warmup_steps},
       {"optim", c.optim},
       {"loss", c.loss},
       {"seed", c.seed},
       {"start_step", c.start_step},
       {"checkpoint_every", c.checkpoint_every},
       {"out_checkpoint", c.out_checkpoint},
       {"log_csv", c.log_csv}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.phase = phase_from_name(j.value("phase", std::string(phase_name(c.phase))));
  c.n_views = j.value("n_views", c.n_views);
  c.steps = j.value("steps", c.steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.holdout_scenes = j.value("holdout_scenes", c.holdout_scenes);
  c.target_views = j.value("target_views", c.target_views);
  c.lr_new = j.value("lr_new", c.lr_new);
  c.lr_backbone = j.value("lr_backbone", c.lr_backbone);
  c.lr_style_encoder = j.value("lr_style_encoder", c.lr_style_encoder);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  if (j.contains("optim")) j.at("optim").get_to(c.optim);
  if (j.contains("loss")) j.at("loss").get_to(c.loss);
  c.seed = j.value("seed", c.seed);
  c.start_step = j.value("start_step", c.start_step);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.out_checkpoint = j.value("out_checkpoint", c.out_checkpoint);
  c.log_csv = j.value("log_csv", c.log_csv);
}

inline int train_scene_count(const Dataset& data, const TrainConfig& cfg) {
  return static_cast<int>(data.scenes.size()) - cfg.holdout_scenes;
}

inline void validate_train_setup(const Dataset& data, const TrainConfig& cfg) {
  if (cfg.n_views < kMinViews || cfg.n_views > kMaxViews)
    throw UsageError("n_views must be in [2, 8]");
  if (cfg.steps <= 0 || cfg.batch_size <= 0)
    throw UsageError("steps and batch size must be positive");
  if (cfg.holdout_scenes < 0) throw UsageError("holdout scene count must be non-negative");
  if (cfg.target_views < 1) throw UsageError("target_views must be at least 1");
  const int train = train_scene_count(data, cfg);
  if (train < 1)
    throw DataError("dataset has " + std::to_string(data.scenes.size()) +
                    " scenes; holding out " + std::to_string(cfg.holdout_scenes) +
                    " leaves nothing to train on");
  for (int s = 0; s < train; ++s) {
    const auto& scene = data.scenes[s];
    if (static_cast<int>(scene.views.size()) < cfg.n_views + cfg.target_views)
      throw DataError("scene '" + scene.id + "' has " + std::to_string(scene.views.size()) +
                      " frames; " + std::to_string(cfg.n_views) +
                      "-view training needs at least " +
                      std::to_string(cfg.n_views + cfg.target_views));
  }
  if (cfg.phase == LossPhase::kStylize && data.styles.empty())
    throw DataError("stylization fine-tuning needs a non-empty style corpus");
}

// Heads and decoders have no pretrained counterpart; everything else can be
// warm-started, so the two sets may run at different rates.
inline bool in_fresh_path(const std::string& name) {
  return name.rfind("head.", 0) == 0 || name.rfind("dec.styl", 0) == 0;
}

inline std::vector<ParamGroup> nvs_param_groups(const SceneStylizer& model,
                                                const TrainConfig& cfg) {
  ParamGroup fresh{{}, cfg.lr_new};
  ParamGroup backbone{{}, cfg.lr_backbone};
  for (const auto& np : model.params())
    (in_fresh_path(np.name) ? fresh : backbone).params.push_back(np);
  return {fresh, backbone};
}

// Called after freezing: only appearance-path parameters remain trainable.
inline std::vector<ParamGroup> stylize_param_groups(const SceneStylizer& model,
                                                    const TrainConfig& cfg) {
  ParamGroup appearance{{}, cfg.lr_new};
  ParamGroup style_enc{{}, cfg.lr_style_encoder};
  for (const auto& np : model.params()) {
    if (!np.tensor.requires_grad()) continue;
    if (SceneStylizer::in_style_encoder(np.name)) {
      style_enc.params.push_back(np);
    } else {
      if (!in_fresh_path(np.name) || SceneStylizer::in_structure_path(np.name))
        throw std::logic_error("unexpected trainable parameter in stylize phase: " + np.name);
      appearance.params.push_back(np);
    }
  }
  return {appearance, style_enc};
}

struct StepSample {
  int scene = 0;
  std::vector<int> inputs;
  int target = 0;                  // first held-out supervision frame
  std::vector<int> extra_targets;  // further held-out frames when target_views > 1
  int appearance_slot = 0;  // index into `inputs` fed to the appearance branch
  int style = 0;
};

// Pure function of (seed rng, step, batch item); the resume contract depends
// on this never touching mutable state.
inline StepSample sample_step(const Rng& base, uint64_t step, int item, int train_scenes,
                              const std::vector<int>& frames_per_scene, int n_views,
                              int style_count, int n_targets = 1) {
  Rng r = base.stream(0x7374u, step).stream(static_cast<uint64_t>(item));
  StepSample s;
  s.scene = r.below(train_scenes);
  std::vector<int> idx = r.sample_distinct(frames_per_scene[s.scene], n_views + n_targets);
  s.inputs.assign(idx.begin(), idx.begin() + n_views);
  s.target = idx[n_views];
  s.extra_targets.assign(idx.begin() + n_views + 1, idx.end());
  s.appearance_slot = r.below(n_views);
  s.style = style_count > 0 ? r.below(style_count) : 0;
  return s;
}

struct TrainRun {
  Checkpoint checkpoint;
  std::vector<LossReport> history;  // one report per executed step
};

namespace detail_train {

// Drops the accumulated-opacity plane from a rendered [4,H,W] tensor.
inline Tensor rgb_of(const Tensor& render) {
  const int h = render.dim(1), w = render.dim(2);
  return reshape(slice_rows(reshape(render, {4, h * w}), 0, 3), {3, h, w});
}

inline LossReport mean_of_window(const std::vector<LossReport>& hist, size_t window) {
  LossReport out;
  if (hist.empty()) return out;
  const size_t n = std::min(window, hist.size());
  for (size_t i = hist.size() - n; i < hist.size(); ++i) {
    out.photometric += hist[i].photometric / n;
    out.style += hist[i].style / n;
    out.content += hist[i].content / n;
    out.identity += hist[i].identity / n;
    out.total += hist[i].total / n;
  }
  out.weights = hist.back().weights;
  return out;
}

class Loop {
 public:
  Loop(SceneStylizer& model, const PerceptualBackbone& bb, const Dataset& data, TrainConfig cfg,
       AdamW opt)
      : model_(model), bb_(bb), data_(data), cfg_(std::move(cfg)), opt_(std::move(opt)),
        base_(cfg_.seed) {
    const int train = train_scene_count(data, cfg_);
    for (int s = 0; s < train; ++s) {
      frames_.push_back(static_cast<int>(data.scenes[s].views.size()));
      std::vector<Tensor> imgs;
      imgs.reserve(data.scenes[s].views.size());
      for (const auto& v : data.scenes[s].views) imgs.push_back(image_to_tensor(v.image));
      images_.push_back(std::move(imgs));
    }
    for (const auto& st : data.styles) styles_.push_back(image_to_tensor(st));
  }

  TrainRun run(uint64_t begin_global) {
    const uint64_t end = cfg_.start_step + static_cast<uint64_t>(cfg_.steps);
    std::ofstream log;
    if (!cfg_.log_csv.empty()) {
      log.open(cfg_.log_csv, std::ios::app);
      if (!log) throw DataError("cannot open training log: " + cfg_.log_csv);
      if (log.tellp() == 0) log << "step,photometric,style,content,identity,total\n";
    }
    TrainRun run;
    for (uint64_t g = begin_global; g < end; ++g) {
      const int local = static_cast<int>(g - cfg_.start_step);
      LossReport r = step_once(g, local);
      run.history.push_back(r);
      if (log.is_open()) {
        char line[192];
        std::snprintf(line, sizeof(line), "%llu,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                      static_cast<unsigned long long>(g + 1), r.photometric, r.style, r.content,
                      r.identity, r.total);
        log << line << std::flush;
      }
      if (cfg_.checkpoint_every > 0 && (local + 1) % cfg_.checkpoint_every == 0 && g + 1 < end &&
          !cfg_.out_checkpoint.empty())
        save_checkpoint(make_checkpoint(g + 1, run.history),
                        cfg_.out_checkpoint + ".step" + std::to_string(g + 1));
    }
    run.checkpoint = make_checkpoint(end, run.history);
    if (!cfg_.out_checkpoint.empty()) save_checkpoint(run.checkpoint, cfg_.out_checkpoint);
    return run;
  }

 private:
  Checkpoint make_checkpoint(uint64_t step, const std::vector<LossReport>& hist) const {
    Checkpoint ck = snapshot_model(model_, step, phase_name(cfg_.phase));
    ck.has_opt = true;
    ck.opt = opt_.state();
    ck.sidecar["train"] = cfg_;
    nlohmann::json ids = nlohmann::json::array();
    for (int s = 0; s < train_scene_count(data_, cfg_); ++s) ids.push_back(data_.scenes[s].id);
    ck.sidecar["train_scenes"] = ids;
    const LossReport m = mean_of_window(hist, 100);
    ck.sidecar["metrics"] = {{"photometric", m.photometric},
                             {"style", m.style},
                             {"content", m.content},
                             {"identity", m.identity},
                             {"total", m.total}};
    return ck;
  }

  LossReport step_once(uint64_t global, int local) {
    opt_.zero_grad();
    LossReport mean;
    mean.weights = cfg_.loss;
    const float inv_b = 1.0f / static_cast<float>(cfg_.batch_size);
    for (int b = 0; b < cfg_.batch_size; ++b) {
      StepSample s = sample_step(base_, global, b, static_cast<int>(images_.size()), frames_,
                                 cfg_.n_views, static_cast<int>(styles_.size()),
                                 cfg_.target_views);
      const SceneRecord& scene = data_.scenes[s.scene];

      std::vector<Tensor> views;
      views.reserve(s.inputs.size());
      for (int v : s.inputs) views.push_back(images_[s.scene][v]);
      std::vector<Tensor> content = model_.encode_content(views);
      auto struct_taps = model_.decode_structure(content);
      Tensor raw_centers = model_.anchored_centers(struct_taps);
      Tensor raw_attribs = model_.run_head_per_view(model_.head_attribs, struct_taps);

      std::vector<int> sup = s.inputs;
      sup.push_back(s.target);
      sup.insert(sup.end(), s.extra_targets.begin(), s.extra_targets.end());
      std::vector<Tensor> targets;
      targets.reserve(sup.size());
      for (int v : sup) targets.push_back(images_[s.scene][v]);
      const Camera& ref = scene.views[s.inputs[0]].camera;
      auto render_views = [&](const GaussianTensors& g) {
        std::vector<Tensor> out;
        out.reserve(sup.size());
        for (int v : sup)
          out.push_back(rgb_of(render_diff(g, scene.views[v].camera.relative_to(ref))));
        return out;
      };

      const Tensor& appearance = images_[s.scene][s.inputs[s.appearance_slot]];
      Tensor colors_id = model_.predict_colors(content, model_.encode_style(appearance));
      GaussianTensors g_id =
          activate_gaussians(raw_centers, raw_attribs, colors_id, model_.cfg.activation);
      std::vector<Tensor> renders_id = render_views(g_id);

      LossTerms terms;
      if (cfg_.phase == LossPhase::kNvs) {
        terms = total_loss(LossPhase::kNvs, {}, renders_id, targets, nullptr, bb_, cfg_.loss);
      } else {
        const Tensor& style = styles_[s.style];
        Tensor colors_st = model_.predict_colors(content, model_.encode_style(style));
        GaussianTensors g_st =
            activate_gaussians(raw_centers, raw_attribs, colors_st, model_.cfg.activation);
        terms = total_loss(LossPhase::kStylize, render_views(g_st), renders_id, targets, &style,
                           bb_, cfg_.loss);
      }
      if (!std::isfinite(terms.report.total))
        throw std::runtime_error("training diverged at step " + std::to_string(global + 1));
      scale(terms.total, inv_b).backward();
      mean.photometric += terms.report.photometric * inv_b;
      mean.style += terms.report.style * inv_b;
      mean.content += terms.report.content * inv_b;
      mean.identity += terms.report.identity * inv_b;
      mean.total += terms.report.total * inv_b;
    }
    opt_.clip_gradients();
    opt_.step(lr_scale(local, cfg_.steps, cfg_.warmup_steps));
    return mean;
  }

  SceneStylizer& model_;
  const PerceptualBackbone& bb_;
  const Dataset& data_;
  TrainConfig cfg_;
  AdamW opt_;
  Rng base_;
  std::vector<int> frames_;
  std::vector<std::vector<Tensor>> images_;  // [scene][frame], train split only
  std::vector<Tensor> styles_;
};

inline uint64_t resume_begin(const TrainConfig& cfg, const Checkpoint* resume, AdamW& opt,
                             SceneStylizer& model) {
  if (!resume) return cfg.start_step;
  if (resume->phase != phase_name(cfg.phase))
    throw CheckpointError("resume checkpoint is from phase '" + resume->phase + "', expected '" +
                          phase_name(cfg.phase) + "'");
  if (resume->step < cfg.start_step ||
      resume->step > cfg.start_step + static_cast<uint64_t>(cfg.steps))
    throw CheckpointError("resume checkpoint step " + std::to_string(resume->step) +
                          " is outside this stage");
  if (!resume->has_opt)
    throw CheckpointError("resume checkpoint carries no optimizer state");
  apply_parameters(*resume, model);
  opt.load_state(resume->opt);
  return resume->step;
}

}  // namespace detail_train

// Stage 1: photometric-only training of the whole model. A random input
// frame feeds the appearance branch, so colors learn to copy content.
inline TrainRun pretrain_nvs(SceneStylizer& model, const PerceptualBackbone& bb,
                             const Dataset& data, TrainConfig cfg,
                             const Checkpoint* resume = nullptr) {
  cfg.phase = LossPhase::kNvs;
  validate_train_setup(data, cfg);
  for (auto& np : model.params()) np.tensor.set_requires_grad(true);
  AdamW opt(nvs_param_groups(model, cfg), cfg.optim);
  const uint64_t begin = detail_train::resume_begin(cfg, resume, opt, model);
  detail_train::Loop loop(model, bb, data, cfg, std::move(opt));
  return loop.run(begin);
}

// Stage 2: freezes the structure path (content encoder, cross-view decoder,
// center/attribute heads) and trains the appearance path on the style
// corpus. The identity term keeps content-as-style inputs reconstructing.
inline TrainRun finetune_style(SceneStylizer& model, const PerceptualBackbone& bb,
                               const Dataset& data, TrainConfig cfg, const Checkpoint& stage1,
                               const Checkpoint* resume = nullptr) {
  cfg.phase = LossPhase::kStylize;
  validate_train_setup(data, cfg);
  if (stage1.phase != "nvs")
    throw CheckpointError("stylization fine-tuning requires a pretraining checkpoint; got phase '" +
                          stage1.phase + "'");
  if (cfg.start_step == 0) cfg.start_step = stage1.step;
  if (!resume) apply_parameters(stage1, model);
  for (auto& np : model.params())
    np.tensor.set_requires_grad(!SceneStylizer::in_structure_path(np.name));
  AdamW opt(stylize_param_groups(model, cfg), cfg.optim);
  const uint64_t begin = detail_train::resume_begin(cfg, resume, opt, model);
  detail_train::Loop loop(model, bb, data, cfg, std::move(opt));
  return loop.run(begin);
}

struct ProgressiveResult {
  TrainRun nvs2;
  TrainRun nvs4;
  TrainRun style;
};

// 2-view pretraining, then 4-view pretraining continuing from it, then
// stylization fine-tuning. Step counters accumulate across stages and each
// stage writes its own checkpoint.
inline ProgressiveResult progressive_schedule(SceneStylizer& model, const PerceptualBackbone& bb,
                                              const Dataset& data, const TrainConfig& base,
                                              const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  ProgressiveResult out;

  TrainConfig c1 = base;
  c1.n_views = 2;
  c1.start_step = 0;
  c1.out_checkpoint = (out_dir / "nvs2.ckpt").string();
  if (c1.log_csv.empty()) c1.log_csv = (out_dir / "train_log.csv").string();
  out.nvs2 = pretrain_nvs(model, bb, data, c1);

  TrainConfig c2 = c1;
  c2.n_views = 4;
  c2.start_step = out.nvs2.checkpoint.step;
  c2.out_checkpoint = (out_dir / "nvs4.ckpt").string();
  out.nvs4 = pretrain_nvs(model, bb, data, c2);

  TrainConfig c3 = c2;
  c3.start_step = out.nvs4.checkpoint.step;
  c3.out_checkpoint = (out_dir / "stylize.ckpt").string();
  out.style = finetune_style(model, bb, data, c3, out.nvs4.checkpoint);
  return out;
}

}  // namespace stylesplat
