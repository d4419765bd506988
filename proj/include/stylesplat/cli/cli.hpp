#pragma once

// Command suite: dataset generation, the two-stage training curriculum,
// feed-forward stylization, style interpolation, and the metrics harness.
// Every command echoes its resolved configuration into the output directory
// so a run can be reproduced from the artifacts alone.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 incompatible
// checkpoint.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stylesplat/core/errors.hpp"
#include "stylesplat/core/image.hpp"
#include "stylesplat/data/dataset_io.hpp"
#include "stylesplat/data/generate.hpp"
#include "stylesplat/eval/metrics.hpp"
#include "stylesplat/eval/warp.hpp"
#include "stylesplat/render/splat.hpp"
#include "stylesplat/train/trainer.hpp"

namespace stylesplat {

// ---------------------------------------------------------------------------
// Run configuration file

struct RunConfig {
  std::string dataset;            // dataset root produced by `dataset`
  std::string out = "runs/run";   // run directory for checkpoints and logs
  ModelConfig model;              // network dimensions
  TrainConfig train;              // budgets, learning rates, loss weights
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"dataset", c.dataset}, {"out", c.out}, {"model", c.model}, {"train", c.train}};
}

namespace detail_cli {

inline nlohmann::json parse_config_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open config file: " + path.string());
  try {
    return nlohmann::json::parse(f, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config parse error in " + path.string() + ": " + e.what());
  }
}

inline void reject_unknown_keys(const nlohmann::json& user, const nlohmann::json& reference,
                                const std::string& prefix) {
  if (!user.is_object()) return;
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string where = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!reference.contains(it.key())) throw UsageError("unknown config key: " + where);
    if (it->is_object()) reject_unknown_keys(*it, reference.at(it.key()), where);
  }
}

}  // namespace detail_cli

// Loads a config file over the defaults. Keys absent from the file keep their
// defaults; keys that do not exist at all are rejected.
inline RunConfig load_run_config(const fs::path& path) {
  RunConfig cfg;
  nlohmann::json reference;
  to_json(reference, cfg);
  const nlohmann::json user = detail_cli::parse_config_file(path);
  detail_cli::reject_unknown_keys(user, reference, "");
  nlohmann::json merged = reference;
  merged.merge_patch(user);
  try {
    merged.at("dataset").get_to(cfg.dataset);
    merged.at("out").get_to(cfg.out);
    cfg.model = merged.at("model").get<ModelConfig>();
    cfg.train = merged.at("train").get<TrainConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config value error in " + path.string() + ": " + e.what());
  }
  return cfg;
}

inline void echo_config(const fs::path& out_dir, const nlohmann::json& resolved) {
  fs::create_directories(out_dir);
  const fs::path p = out_dir / "config.json";
  std::ofstream f(p, std::ios::trunc);
  if (!f) throw DataError("cannot write " + p.string());
  f << resolved.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Content and camera plumbing

struct ContentSet {
  std::vector<Image> images;
  std::vector<Camera> cameras;
};

// Reads the first `n_views` frame_*.png (with their .cam files) from a
// directory, e.g. one scene directory of a generated dataset.
inline ContentSet load_content_dir(const fs::path& dir, int n_views) {
  if (!fs::is_directory(dir)) throw DataError("content directory not found: " + dir.string());
  std::vector<fs::path> pngs;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("frame_", 0) == 0 && e.path().extension() == ".png") pngs.push_back(e.path());
  }
  std::sort(pngs.begin(), pngs.end());
  if (static_cast<int>(pngs.size()) < n_views)
    throw DataError(dir.string() + " holds " + std::to_string(pngs.size()) +
                    " content frames, need " + std::to_string(n_views));
  ContentSet cs;
  for (int i = 0; i < n_views; ++i) {
    Image im = load_png(pngs[i]);
    fs::path cam = pngs[i];
    cam.replace_extension(".cam");
    if (!fs::exists(cam)) throw DataError("missing camera file: " + cam.string());
    cs.cameras.push_back(detail_io::read_camera(cam, im.width, im.height));
    cs.images.push_back(std::move(im));
  }
  return cs;
}

inline nlohmann::json camera_to_json(const Camera& c) {
  std::vector<float> r(9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[i * 3 + j] = c.R(i, j);
  return {{"R", r},
          {"t", {c.t.x(), c.t.y(), c.t.z()}},
          {"fx", c.fx},
          {"fy", c.fy},
          {"cx", c.cx},
          {"cy", c.cy},
          {"width", c.width},
          {"height", c.height}};
}

inline Camera camera_from_json(const nlohmann::json& j) {
  Camera c;
  const auto r = j.at("R").get<std::vector<float>>();
  if (r.size() != 9) throw DataError("camera json: R must hold 9 values");
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) c.R(i, k) = r[i * 3 + k];
  const auto t = j.at("t").get<std::vector<float>>();
  if (t.size() != 3) throw DataError("camera json: t must hold 3 values");
  c.t = Vec3(t[0], t[1], t[2]);
  c.fx = j.at("fx");
  c.fy = j.at("fy");
  c.cx = j.at("cx");
  c.cy = j.at("cy");
  c.width = j.at("width");
  c.height = j.at("height");
  c.validate();
  return c;
}

inline std::vector<Camera> load_cameras_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open camera list: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("camera list parse error: " + std::string(e.what()));
  }
  std::vector<Camera> cams;
  for (const auto& cj : j) cams.push_back(camera_from_json(cj));
  if (cams.empty()) throw DataError("camera list is empty: " + path.string());
  return cams;
}

inline void save_cameras_json(const fs::path& path, const std::vector<Camera>& cams) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : cams) j.push_back(camera_to_json(c));
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

// Default novel targets: each input camera swung a few degrees further around
// the vertical axis, re-aimed at the point it was looking at.
inline std::vector<Camera> default_novel_cameras(const std::vector<Camera>& inputs,
                                                 float degrees = 5.0f) {
  const float a = degrees * 3.14159265f / 180.0f;
  Mat3 rot;
  rot << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  std::vector<Camera> out;
  out.reserve(inputs.size());
  for (const Camera& in : inputs) {
    const Vec3 eye = -(in.R.transpose() * in.t);
    const Vec3 fwd = in.R.row(2).transpose();
    const Vec3 target = eye + 2.5f * fwd;
    Camera c = look_at(rot * eye, target);
    c.fx = in.fx;
    c.fy = in.fy;
    c.cx = in.cx;
    c.cy = in.cy;
    c.width = in.width;
    c.height = in.height;
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared model plumbing

inline SceneStylizer model_from_checkpoint(const Checkpoint& ck) {
  if (!ck.sidecar.contains("model"))
    throw CheckpointError("checkpoint sidecar lacks the model description; cannot rebuild");
  ModelConfig mc = ck.sidecar.at("model").get<ModelConfig>();
  SceneStylizer model(mc);
  apply_parameters(ck, model);
  return model;
}

namespace detail_cli {

inline std::vector<Tensor> content_tensors(const SceneStylizer& model, const ContentSet& cs) {
  if (static_cast<int>(cs.images.size()) < kMinViews ||
      static_cast<int>(cs.images.size()) > kMaxViews)
    throw UsageError("content view count must be in [2, 8], got " +
                     std::to_string(cs.images.size()));
  std::vector<Tensor> out;
  for (const auto& im : cs.images) {
    if (im.width != model.cfg.image_size || im.height != model.cfg.image_size)
      throw UsageError("content image is " + std::to_string(im.width) + "x" +
                       std::to_string(im.height) + " but the model expects " +
                       std::to_string(model.cfg.image_size) + "x" +
                       std::to_string(model.cfg.image_size));
    out.push_back(image_to_tensor(im));
  }
  return out;
}

inline Tensor style_tensor(const SceneStylizer& model, const fs::path& path) {
  const Image im = load_png(path);
  if (im.width != model.cfg.image_size || im.height != model.cfg.image_size)
    throw UsageError("style image is " + std::to_string(im.width) + "x" +
                     std::to_string(im.height) + " but the model expects " +
                     std::to_string(model.cfg.image_size) + "x" +
                     std::to_string(model.cfg.image_size));
  return image_to_tensor(im);
}

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double stop() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

// Structure forward pass shared by every appearance variation of one content
// set: encoded tokens plus the raw center/attribute predictions.
struct StructurePrediction {
  std::vector<Tensor> tokens;
  Tensor centers;
  Tensor attribs;
};

inline StructurePrediction predict_structure(const SceneStylizer& model,
                                             const std::vector<Tensor>& views) {
  StructurePrediction sp;
  sp.tokens = model.encode_content(views);
  auto taps = model.decode_structure(sp.tokens);
  sp.centers = model.anchored_centers(taps);
  sp.attribs = model.run_head_per_view(model.head_attribs, taps);
  return sp;
}

inline GaussianSet gaussians_for_tokens(const SceneStylizer& model, const StructurePrediction& sp,
                                        const Tensor& style_tokens) {
  Tensor colors = model.predict_colors(sp.tokens, style_tokens);
  return activate_gaussians(sp.centers, sp.attribs, colors, model.cfg.activation).detach();
}

inline Image render_view(const GaussianSet& g, const Camera& target, const Camera& ref) {
  return render(g, target.relative_to(ref)).to_image();
}

inline std::string view_name(const char* stem, int i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03d.png", stem, i);
  return buf;
}

}  // namespace detail_cli

// ---------------------------------------------------------------------------
// dataset

struct DatasetOptions {
  uint64_t seed = 0;
  int n_scenes = 8;
  int n_styles = 8;
  int image_size = 64;
  int n_frames = 16;
  std::string out;
};

inline int cmd_dataset(const DatasetOptions& opt) {
  if (opt.n_scenes < 1) throw UsageError("need at least one scene");
  if (opt.n_styles < 1) throw UsageError("need at least one style image");
  if (opt.image_size < 16) throw UsageError("image size must be at least 16");
  if (opt.n_frames < 2) throw UsageError("need at least two frames per scene");
  if (opt.out.empty()) throw UsageError("dataset needs --out");

  SceneGenConfig gen;
  gen.image_size = opt.image_size;
  gen.n_frames = opt.n_frames;

  Dataset ds;
  ds.image_size = opt.image_size;
  for (int i = 0; i < opt.n_scenes; ++i) {
    ds.scenes.push_back(generate_scene(opt.seed * 1000 + i, gen));
    const SceneRecord& s = ds.scenes.back();
    std::printf("%s: %zu frames, %zu primitives\n", s.id.c_str(), s.views.size(),
                s.primitives.size());
  }
  ds.styles = generate_style_corpus(opt.seed, opt.n_styles, opt.image_size);
  save_dataset(ds, opt.out);

  echo_config(opt.out, {{"command", "dataset"},
                        {"seed", opt.seed},
                        {"n_scenes", opt.n_scenes},
                        {"n_styles", opt.n_styles},
                        {"image_size", opt.image_size},
                        {"n_frames", opt.n_frames},
                        {"out", opt.out}});
  std::printf("dataset written to %s (%d scenes, %d styles)\n", opt.out.c_str(), opt.n_scenes,
              opt.n_styles);
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  std::string config;
  std::string stage = "all";  // nvs2 | nvs4 | stylize | all
  bool resume = false;
  std::string dataset_override;
  std::string out_override;
  int views_override = 0;
  int64_t seed_override = -1;
};

namespace detail_cli {

// Picks the furthest-along checkpoint for a stage: the final file or any
// periodic .step<k> snapshot.
inline std::optional<Checkpoint> find_resume(const fs::path& dir, const std::string& stage) {
  std::vector<fs::path> candidates;
  const std::string base = stage + ".ckpt";
  if (fs::exists(dir / base)) candidates.push_back(dir / base);
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (name.rfind(base + ".step", 0) == 0 && e.path().extension() != ".json")
        candidates.push_back(e.path());
    }
  std::optional<Checkpoint> best;
  for (const auto& p : candidates) {
    Checkpoint ck = load_checkpoint(p);
    if (!best || ck.step > best->step) best = std::move(ck);
  }
  return best;
}

inline Checkpoint require_stage_checkpoint(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path))
    throw CheckpointError("missing prerequisite checkpoint " + path.string() + "; run " + hint +
                          " first");
  return load_checkpoint(path);
}

}  // namespace detail_cli

inline int cmd_train(const TrainOptions& opt) {
  RunConfig rc = opt.config.empty() ? RunConfig{} : load_run_config(opt.config);
  if (!opt.dataset_override.empty()) rc.dataset = opt.dataset_override;
  if (!opt.out_override.empty()) rc.out = opt.out_override;
  if (opt.views_override > 0) rc.train.n_views = opt.views_override;
  if (opt.seed_override >= 0) rc.train.seed = static_cast<uint64_t>(opt.seed_override);
  if (rc.dataset.empty()) throw UsageError("train needs a dataset (config key \"dataset\" or --data)");

  const std::set<std::string> stages = {"nvs2", "nvs4", "stylize", "all"};
  if (!stages.count(opt.stage))
    throw UsageError("unknown stage '" + opt.stage + "' (expected nvs2, nvs4, stylize, or all)");
  if (opt.resume && opt.stage == "all")
    throw UsageError("--resume applies to a single stage; rerun the interrupted one");

  const Dataset data = load_dataset(rc.dataset);
  if (data.image_size != rc.model.image_size)
    throw DataError("dataset images are " + std::to_string(data.image_size) +
                    "px but the model expects " + std::to_string(rc.model.image_size) + "px");

  SceneStylizer model(rc.model);
  PerceptualBackbone bb;
  const fs::path out = rc.out;
  nlohmann::json resolved;
  to_json(resolved, rc);
  resolved["stage"] = opt.stage;
  echo_config(out, resolved);

  if (opt.stage == "all") {
    ProgressiveResult res = progressive_schedule(model, bb, data, rc.train, out);
    std::printf("curriculum complete: nvs2 @ %llu, nvs4 @ %llu, stylize @ %llu steps\n",
                static_cast<unsigned long long>(res.nvs2.checkpoint.step),
                static_cast<unsigned long long>(res.nvs4.checkpoint.step),
                static_cast<unsigned long long>(res.style.checkpoint.step));
    return 0;
  }

  TrainConfig cfg = rc.train;
  cfg.out_checkpoint = (out / (opt.stage + ".ckpt")).string();
  if (cfg.log_csv.empty()) cfg.log_csv = (out / "train_log.csv").string();

  std::optional<Checkpoint> stage1;
  if (opt.stage == "nvs2") {
    cfg.n_views = 2;
    cfg.start_step = 0;
  } else if (opt.stage == "nvs4") {
    Checkpoint prev = detail_cli::require_stage_checkpoint(out / "nvs2.ckpt", "--stage nvs2");
    cfg.n_views = 4;
    cfg.start_step = prev.step;
    if (!opt.resume) apply_parameters(prev, model);
  } else {  // stylize
    stage1 = detail_cli::require_stage_checkpoint(out / "nvs4.ckpt", "--stage nvs4");
    cfg.start_step = stage1->step;
  }

  std::optional<Checkpoint> resume;
  if (opt.resume) {
    resume = detail_cli::find_resume(out, opt.stage);
    if (!resume) throw UsageError("no checkpoint to resume from in " + out.string());
    if (resume->step >= cfg.start_step + static_cast<uint64_t>(cfg.steps)) {
      std::printf("stage %s already complete at step %llu\n", opt.stage.c_str(),
                  static_cast<unsigned long long>(resume->step));
      return 0;
    }
    std::printf("resuming %s from step %llu\n", opt.stage.c_str(),
                static_cast<unsigned long long>(resume->step));
  }

  TrainRun run;
  if (opt.stage == "stylize")
    run = finetune_style(model, bb, data, cfg, *stage1, resume ? &*resume : nullptr);
  else
    run = pretrain_nvs(model, bb, data, cfg, resume ? &*resume : nullptr);

  std::printf("stage %s complete at step %llu; checkpoint %s\n", opt.stage.c_str(),
              static_cast<unsigned long long>(run.checkpoint.step), cfg.out_checkpoint.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// stylize

struct StylizeOptions {
  std::string checkpoint;
  std::string content;
  std::string style;
  std::string cameras;  // optional camera list json
  int views = 4;
  std::string out;
};

inline int cmd_stylize(const StylizeOptions& opt) {
  if (opt.views < kMinViews || opt.views > kMaxViews)
    throw UsageError("--views must be in [2, 8]");
  if (opt.out.empty()) throw UsageError("stylize needs --out");
  const Checkpoint ck = load_checkpoint(opt.checkpoint);
  const SceneStylizer model = model_from_checkpoint(ck);
  const ContentSet cs = load_content_dir(opt.content, opt.views);
  const std::vector<Tensor> views = detail_cli::content_tensors(model, cs);
  const Tensor style = detail_cli::style_tensor(model, opt.style);

  NoGradGuard ng;
  detail_cli::Stopwatch clock;
  const auto sp = detail_cli::predict_structure(model, views);
  const Tensor style_tokens = model.encode_style(style);
  const GaussianSet g = detail_cli::gaussians_for_tokens(model, sp, style_tokens);
  const double forward_s = clock.stop();

  const std::vector<Camera> targets =
      opt.cameras.empty() ? default_novel_cameras(cs.cameras) : load_cameras_json(opt.cameras);

  const fs::path out = opt.out;
  fs::create_directories(out);
  for (size_t i = 0; i < targets.size(); ++i)
    save_png(out / detail_cli::view_name("view", static_cast<int>(i)),
             detail_cli::render_view(g, targets[i], cs.cameras[0]));
  save_gaussians(out / "gaussians.sgs1", g);
  save_cameras_json(out / "cameras.json", targets);
  echo_config(out, {{"command", "stylize"},
                    {"checkpoint", opt.checkpoint},
                    {"content", opt.content},
                    {"style", opt.style},
                    {"cameras", opt.cameras},
                    {"views", opt.views},
                    {"out", opt.out}});
  std::printf("forward %.3f s (io excluded); %zu gaussians; %zu views written to %s\n", forward_s,
              g.size(), targets.size(), opt.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// interpolate

struct InterpolateOptions {
  std::string checkpoint;
  std::string content;
  std::string style_a;
  std::string style_b;
  std::string cameras;
  int views = 4;
  int steps = 5;
  std::string out;
};

inline int cmd_interpolate(const InterpolateOptions& opt) {
  if (opt.views < kMinViews || opt.views > kMaxViews)
    throw UsageError("--views must be in [2, 8]");
  if (opt.steps < 2) throw UsageError("interpolation needs at least 2 steps");
  if (opt.out.empty()) throw UsageError("interpolate needs --out");
  const Checkpoint ck = load_checkpoint(opt.checkpoint);
  const SceneStylizer model = model_from_checkpoint(ck);
  const ContentSet cs = load_content_dir(opt.content, opt.views);
  const std::vector<Tensor> views = detail_cli::content_tensors(model, cs);
  const Tensor style_a = detail_cli::style_tensor(model, opt.style_a);
  const Tensor style_b = detail_cli::style_tensor(model, opt.style_b);

  NoGradGuard ng;
  const auto sp = detail_cli::predict_structure(model, views);
  const Tensor tokens_a = model.encode_style(style_a);
  const Tensor tokens_b = model.encode_style(style_b);
  const Camera target = (opt.cameras.empty() ? default_novel_cameras(cs.cameras)
                                             : load_cameras_json(opt.cameras))
                            .front();

  const fs::path out = opt.out;
  fs::create_directories(out);
  for (int i = 0; i < opt.steps; ++i) {
    const float t = static_cast<float>(i) / (opt.steps - 1);
    const Tensor blended = interpolate_styles({tokens_a, tokens_b}, {1.0f - t, t});
    const GaussianSet g = detail_cli::gaussians_for_tokens(model, sp, blended);
    save_png(out / detail_cli::view_name("frame", i),
             detail_cli::render_view(g, target, cs.cameras[0]));
  }
  echo_config(out, {{"command", "interpolate"},
                    {"checkpoint", opt.checkpoint},
                    {"content", opt.content},
                    {"style_a", opt.style_a},
                    {"style_b", opt.style_b},
                    {"cameras", opt.cameras},
                    {"views", opt.views},
                    {"steps", opt.steps},
                    {"out", opt.out}});
  std::printf("%d interpolation frames written to %s\n", opt.steps, opt.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  std::string checkpoint;
  std::string data;
  std::string out;
  int views = 0;  // 0: use the checkpoint's training view count
  bool allow_train_split = false;
};

inline int cmd_eval(const EvalOptions& opt) {
  if (opt.out.empty()) throw UsageError("eval needs --out");
  const Checkpoint ck = load_checkpoint(opt.checkpoint);
  const SceneStylizer model = model_from_checkpoint(ck);
  const Dataset data = load_dataset(opt.data);
  if (data.image_size != model.cfg.image_size)
    throw DataError("dataset images are " + std::to_string(data.image_size) +
                    "px but the model expects " + std::to_string(model.cfg.image_size) + "px");
  if (data.styles.empty()) throw DataError("dataset has no style images");

  int n_views = opt.views;
  if (n_views == 0 && ck.sidecar.contains("train"))
    n_views = ck.sidecar.at("train").value("n_views", 0);
  if (n_views == 0) n_views = 4;
  if (n_views < kMinViews || n_views > kMaxViews) throw UsageError("--views must be in [2, 8]");

  std::set<std::string> train_ids;
  if (ck.sidecar.contains("train_scenes"))
    for (const auto& id : ck.sidecar.at("train_scenes")) train_ids.insert(id.get<std::string>());

  std::vector<const SceneRecord*> eval_scenes;
  for (const auto& s : data.scenes)
    if (opt.allow_train_split || !train_ids.count(s.id)) eval_scenes.push_back(&s);
  if (eval_scenes.empty())
    throw DataError(
        "every dataset scene is in the checkpoint's training split; pass --allow-train-split to "
        "evaluate on them anyway");

  PerceptualBackbone bb;
  std::vector<Tensor> style_tensors;
  for (const auto& im : data.styles) style_tensors.push_back(image_to_tensor(im));

  NoGradGuard ng;
  std::vector<MetricsRow> rows;
  for (const SceneRecord* scene : eval_scenes) {
    const int n_frames = static_cast<int>(scene->views.size());
    if (n_frames < n_views + 1)
      throw DataError("scene " + scene->id + " has " + std::to_string(n_frames) +
                      " frames, need " + std::to_string(n_views + 1));
    if (n_frames < kLongRangeOffset + 1)
      throw DataError("scene " + scene->id + " has " + std::to_string(n_frames) +
                      " frames; consistency needs " + std::to_string(kLongRangeOffset + 1));

    std::vector<Tensor> views;
    for (int i = 0; i < n_views; ++i) views.push_back(image_to_tensor(scene->views[i].image));
    const Camera& ref = scene->views[0].camera;
    const auto sp = detail_cli::predict_structure(model, views);

    // photoreal novel-view check on the first held-out frame
    const GaussianSet gc =
        detail_cli::gaussians_for_tokens(model, sp, model.encode_style(views[0]));
    const ViewSample& target = scene->views[n_views];
    const Tensor rendered =
        image_to_tensor(detail_cli::render_view(gc, target.camera, ref));
    const NvsMetrics nvs = nvs_metrics(rendered, image_to_tensor(target.image), bb);

    std::vector<FlowField> shorts, longs;
    std::vector<std::vector<float>> depths;
    for (int k = 0; k + 1 < n_frames; ++k) shorts.push_back(scene->views[k].flow_to_next);
    for (int k = 0; k + kLongRangeOffset < n_frames; ++k)
      longs.push_back(compute_gt_flow(scene->views[k], scene->views[k + kLongRangeOffset]));
    for (const auto& v : scene->views) depths.push_back(v.depth);

    for (size_t si = 0; si < style_tensors.size(); ++si) {
      const GaussianSet gs =
          detail_cli::gaussians_for_tokens(model, sp, model.encode_style(style_tensors[si]));
      std::vector<Tensor> frames;
      double hist_acc = 0;
      const RgbUvHistogram style_hist = rgbuv_histogram(style_tensors[si]);
      for (int k = 0; k < n_frames; ++k) {
        frames.push_back(
            image_to_tensor(detail_cli::render_view(gs, scene->views[k].camera, ref)));
        hist_acc += histogram_distance(rgbuv_histogram(frames.back()), style_hist);
      }
      const ConsistencyReport cons = consistency_metrics(frames, shorts, longs, depths, bb);

      MetricsRow row;
      row.scene_id = scene->id;
      row.style_id = "style_" + std::to_string(si);
      row.short_rmse = cons.short_rmse;
      row.short_perceptual = cons.short_perceptual;
      row.long_rmse = cons.long_rmse;
      row.long_perceptual = cons.long_perceptual;
      row.psnr = nvs.psnr;
      row.ssim = nvs.ssim;
      row.perceptual = nvs.perceptual;
      row.hist_distance = static_cast<float>(hist_acc / n_frames);
      rows.push_back(row);
    }
    std::printf("%s: psnr %.2f dB, ssim %.3f\n", scene->id.c_str(), nvs.psnr, nvs.ssim);
  }

  const fs::path out = opt.out;
  fs::create_directories(out);
  write_metrics_json(out / "metrics.json", rows);
  write_metrics_csv(out / "metrics.csv", rows);
  echo_config(out, {{"command", "eval"},
                    {"checkpoint", opt.checkpoint},
                    {"data", opt.data},
                    {"views", n_views},
                    {"allow_train_split", opt.allow_train_split},
                    {"out", opt.out}});
  const MetricsRow mean = mean_row(rows);
  std::printf("mean over %zu rows: psnr %.2f, ssim %.3f, short_rmse %.4f, long_rmse %.4f, "
              "hist %.4f\n",
              rows.size(), mean.psnr, mean.ssim, mean.short_rmse, mean.long_rmse,
              mean.hist_distance);
  return 0;
}

// ---------------------------------------------------------------------------
// entry point

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"feed-forward stylized 3D gaussian prediction from sparse views"};
  app.require_subcommand(1);

  DatasetOptions d;
  auto* cd = app.add_subcommand("dataset", "generate a synthetic scene and style corpus");
  cd->add_option("--seed", d.seed, "corpus seed");
  cd->add_option("--scenes", d.n_scenes, "number of scenes")->capture_default_str();
  cd->add_option("--styles", d.n_styles, "number of style images")->capture_default_str();
  cd->add_option("--size", d.image_size, "image resolution")->capture_default_str();
  cd->add_option("--frames", d.n_frames, "frames per trajectory")->capture_default_str();
  cd->add_option("--out", d.out, "output directory")->required();

  TrainOptions t;
  auto* ct = app.add_subcommand("train", "run a training stage or the full curriculum");
  ct->add_option("--config", t.config, "run config file (json, // comments allowed)");
  ct->add_option("--stage", t.stage, "nvs2 | nvs4 | stylize | all")->capture_default_str();
  ct->add_flag("--resume", t.resume, "continue the stage from its latest checkpoint");
  ct->add_option("--data", t.dataset_override, "dataset directory (overrides config)");
  ct->add_option("--out", t.out_override, "run directory (overrides config)");
  ct->add_option("--views", t.views_override, "input view count (overrides config)");
  ct->add_option("--seed", t.seed_override, "training seed (overrides config)");

  StylizeOptions s;
  auto* cs = app.add_subcommand("stylize", "predict stylized gaussians and render novel views");
  cs->add_option("--checkpoint", s.checkpoint, "trained checkpoint")->required();
  cs->add_option("--content", s.content, "directory of frame_*.png content views")->required();
  cs->add_option("--style", s.style, "style image (png)")->required();
  cs->add_option("--cameras", s.cameras, "target camera list json (default: orbital perturbation)");
  cs->add_option("--views", s.views, "content views to use")->capture_default_str();
  cs->add_option("--out", s.out, "output directory")->required();

  InterpolateOptions ip;
  auto* ci = app.add_subcommand("interpolate", "blend two styles across a render sequence");
  ci->add_option("--checkpoint", ip.checkpoint, "trained checkpoint")->required();
  ci->add_option("--content", ip.content, "directory of frame_*.png content views")->required();
  ci->add_option("--style-a", ip.style_a, "first style image")->required();
  ci->add_option("--style-b", ip.style_b, "second style image")->required();
  ci->add_option("--cameras", ip.cameras, "target camera list json");
  ci->add_option("--views", ip.views, "content views to use")->capture_default_str();
  ci->add_option("--steps", ip.steps, "interpolation steps (>= 2)")->capture_default_str();
  ci->add_option("--out", ip.out, "output directory")->required();

  EvalOptions e;
  auto* ce = app.add_subcommand("eval", "score a checkpoint on held-out scenes");
  ce->add_option("--checkpoint", e.checkpoint, "trained checkpoint")->required();
  ce->add_option("--data", e.data, "dataset directory")->required();
  ce->add_option("--views", e.views, "input view count (default: checkpoint's)");
  ce->add_flag("--allow-train-split", e.allow_train_split,
               "permit evaluation on the training scenes");
  ce->add_option("--out", e.out, "output directory")->required();

  try {
    app.parse(argc, argv);
    if (cd->parsed()) return cmd_dataset(d);
    if (ct->parsed()) return cmd_train(t);
    if (cs->parsed()) return cmd_stylize(s);
    if (ci->parsed()) return cmd_interpolate(ip);
    if (ce->parsed()) return cmd_eval(e);
    return 1;
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h);
  } catch (const CLI::ParseError& pe) {
    app.exit(pe);
    return 1;
  } catch (const UsageError& ue) {
    std::fprintf(stderr, "error: %s\n", ue.what());
    return 1;
  } catch (const CheckpointError& che) {
    std::fprintf(stderr, "checkpoint error: %s\n", che.what());
    return 3;
  } catch (const DataError& de) {
    std::fprintf(stderr, "data error: %s\n", de.what());
    return 2;
  } catch (const std::invalid_argument& ia) {
    std::fprintf(stderr, "error: %s\n", ia.what());
    return 1;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 2;
  }
}

inline int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("stylesplat");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace stylesplat
