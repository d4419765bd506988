#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "stylesplat/core/image.hpp"
#include "stylesplat/core/rng.hpp"
#include "stylesplat/data/flow.hpp"
#include "stylesplat/data/generate.hpp"
#include "stylesplat/eval/metrics.hpp"
#include "stylesplat/eval/warp.hpp"

using namespace stylesplat;

namespace {

Tensor random_image(uint64_t seed, int h, int w) {
  Rng r(seed);
  return Tensor::from({3, h, w}, r.uniform_vec(static_cast<size_t>(3) * h * w, 0.0f, 1.0f));
}

FlowField uniform_flow(int h, int w, float dx, float dy) {
  FlowField f;
  f.height = h;
  f.width = w;
  f.flow.resize(static_cast<size_t>(h) * w * 2);
  f.valid.assign(static_cast<size_t>(h) * w, 1);
  for (size_t i = 0; i < f.valid.size(); ++i) {
    f.flow[2 * i] = dx;
    f.flow[2 * i + 1] = dy;
  }
  return f;
}

}  // namespace

TEST(Warp, ZeroFlowIsIdentityOnValidPixels) {
  const int h = 6, w = 7;
  Tensor frame = random_image(11, h, w);
  FlowField flow = uniform_flow(h, w, 0, 0);
  flow.valid[3] = 0;
  flow.valid[10] = 0;

  WarpResult wr = warp_forward(frame, flow);
  const size_t hw = static_cast<size_t>(h) * w;
  for (size_t i = 0; i < hw; ++i) {
    if (i == 3 || i == 10) {
      EXPECT_EQ(wr.coverage[i], 0);
      for (int c = 0; c < 3; ++c) EXPECT_EQ(wr.image.data()[c * hw + i], 0.0f);
    } else {
      EXPECT_EQ(wr.coverage[i], 1);
      for (int c = 0; c < 3; ++c)
        EXPECT_EQ(wr.image.data()[c * hw + i], frame.data()[c * hw + i]);
    }
  }
}

TEST(Warp, IntegerTranslationShiftsExactly) {
  const int h = 5, w = 8, shift = 3;
  Tensor frame = random_image(12, h, w);
  WarpResult wr = warp_forward(frame, uniform_flow(h, w, shift, 0));

  const size_t hw = static_cast<size_t>(h) * w;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t ti = static_cast<size_t>(y) * w + x;
      if (x < shift) {
        EXPECT_EQ(wr.coverage[ti], 0) << "expected an uncovered strip at x=" << x;
      } else {
        EXPECT_EQ(wr.coverage[ti], 1);
        const size_t si = static_cast<size_t>(y) * w + (x - shift);
        for (int c = 0; c < 3; ++c)
          EXPECT_EQ(wr.image.data()[c * hw + ti], frame.data()[c * hw + si]);
      }
    }
  }
}

TEST(Warp, CollisionsBlendBySoftmaxImportance) {
  const int h = 4, w = 4;
  std::vector<float> px(3 * 16, 0.0f);
  const float c1[3] = {0.9f, 0.1f, 0.3f}, c2[3] = {0.2f, 0.8f, 0.6f};
  for (int c = 0; c < 3; ++c) {
    px[c * 16 + 0] = c1[c];    // source (0,0)
    px[c * 16 + 15] = c2[c];   // source (3,3)
  }
  Tensor frame = Tensor::from({3, h, w}, px);

  FlowField flow = uniform_flow(h, w, 0, 0);
  flow.valid.assign(16, 0);
  flow.valid[0] = flow.valid[15] = 1;
  flow.flow[0] = 1;  // (0,0) -> (1,1)
  flow.flow[1] = 1;
  flow.flow[2 * 15] = -2;  // (3,3) -> (1,1)
  flow.flow[2 * 15 + 1] = -2;

  // uniform importance: plain average
  WarpResult wu = warp_forward(frame, flow);
  const size_t ti = 1 * w + 1;
  EXPECT_EQ(std::accumulate(wu.coverage.begin(), wu.coverage.end(), 0), 1);
  for (int c = 0; c < 3; ++c)
    EXPECT_NEAR(wu.image.data()[c * 16 + ti], 0.5f * (c1[c] + c2[c]), 1e-6f);

  // depth importance: nearer source dominates with weight e^(-d)
  std::vector<float> depth(16, 0.0f);
  depth[0] = 1.0f;
  depth[15] = 3.0f;
  WarpResult wd = warp_forward(frame, flow, &depth);
  const double w1 = std::exp(-1.0), w2 = std::exp(-3.0);
  for (int c = 0; c < 3; ++c) {
    const double expect = (w1 * c1[c] + w2 * c2[c]) / (w1 + w2);
    EXPECT_NEAR(wd.image.data()[c * 16 + ti], expect, 1e-6);
  }
}

TEST(Warp, RejectsMismatchedSizes) {
  Tensor frame = random_image(13, 6, 6);
  EXPECT_THROW(warp_forward(frame, uniform_flow(6, 7, 0, 0)), std::invalid_argument);
  std::vector<float> depth(10, 1.0f);
  EXPECT_THROW(warp_forward(frame, uniform_flow(6, 6, 0, 0), &depth), std::invalid_argument);
  EXPECT_THROW(warp_forward(Tensor::zeros({1, 6, 6}), uniform_flow(6, 6, 0, 0)),
               std::invalid_argument);
}

TEST(Consistency, IdenticalFramesWithZeroFlowScoreZero) {
  const int h = 16, w = 16, n = 9;
  PerceptualBackbone bb;
  Tensor img = random_image(14, h, w);
  std::vector<Tensor> frames(n, img);
  std::vector<FlowField> shorts(n - 1, uniform_flow(h, w, 0, 0));
  std::vector<FlowField> longs(n - kLongRangeOffset, uniform_flow(h, w, 0, 0));

  ConsistencyReport rep = consistency_metrics(frames, shorts, longs, {}, bb);
  EXPECT_EQ(rep.short_pairs, n - 1);
  EXPECT_EQ(rep.long_pairs, n - kLongRangeOffset);
  EXPECT_EQ(rep.short_rmse, 0.0f);
  EXPECT_EQ(rep.long_rmse, 0.0f);
  EXPECT_NEAR(rep.short_perceptual, 0.0f, 1e-7f);
  EXPECT_NEAR(rep.long_perceptual, 0.0f, 1e-7f);
}

TEST(Consistency, RejectsSequencesShorterThanTheLongOffset) {
  PerceptualBackbone bb;
  std::vector<Tensor> frames(7, random_image(15, 16, 16));
  std::vector<FlowField> shorts(6, uniform_flow(16, 16, 0, 0));
  EXPECT_THROW(consistency_metrics(frames, shorts, {}, {}, bb), UsageError);
}

TEST(Consistency, RmseMatchesManualRecompute) {
  const int h = 16, w = 16;
  PerceptualBackbone bb;
  Tensor src = random_image(16, h, w);
  Tensor dst = random_image(17, h, w);
  Rng r(18);
  FlowField flow = uniform_flow(h, w, 0, 0);
  for (size_t i = 0; i < flow.valid.size(); ++i) {
    flow.flow[2 * i] = r.uniform() * 2.0f - 1.0f;
    flow.flow[2 * i + 1] = r.uniform() * 2.0f - 1.0f;
    flow.valid[i] = r.uniform() < 0.8f ? 1 : 0;
  }

  PairConsistency pc = pair_consistency(src, dst, flow, nullptr, bb);

  WarpResult wr = warp_forward(src, flow);
  const size_t hw = static_cast<size_t>(h) * w;
  double acc = 0;
  size_t covered = 0;
  for (size_t i = 0; i < hw; ++i) {
    if (!wr.coverage[i]) continue;
    ++covered;
    for (int c = 0; c < 3; ++c) {
      const double d = static_cast<double>(wr.image.data()[c * hw + i]) - dst.data()[c * hw + i];
      acc += d * d;
    }
  }
  ASSERT_GT(covered, 0u);
  EXPECT_NEAR(pc.rmse, std::sqrt(acc / static_cast<double>(3 * covered)), 1e-12);
  EXPECT_EQ(pc.covered, covered);
}

TEST(Consistency, LongRangeOffsetIsExactlySeven) {
  // frame k is a constant image with value 0.1 + 0.05k; under zero flow the
  // pairwise RMSE is just the value gap, so the long-range average pins the
  // frame offset: 0.35 for offset 7 (0.30 would mean 6, 0.40 would mean 8)
  const int h = 16, w = 16, n = 9;
  PerceptualBackbone bb;
  std::vector<Tensor> frames;
  for (int k = 0; k < n; ++k) frames.push_back(Tensor::full({3, h, w}, 0.1f + 0.05f * k));
  std::vector<FlowField> shorts(n - 1, uniform_flow(h, w, 0, 0));
  std::vector<FlowField> longs(n - kLongRangeOffset, uniform_flow(h, w, 0, 0));

  ConsistencyReport rep = consistency_metrics(frames, shorts, longs, {}, bb);
  EXPECT_NEAR(rep.short_rmse, 0.05f, 1e-6f);
  EXPECT_NEAR(rep.long_rmse, 0.35f, 1e-6f);
}

TEST(Consistency, GroundTruthSequenceIsSelfConsistent) {
  SceneGenConfig cfg;
  cfg.image_size = 32;
  cfg.n_frames = 9;
  cfg.min_objects = 3;
  cfg.max_objects = 4;
  SceneRecord scene = generate_scene(77, cfg);
  const int n = static_cast<int>(scene.views.size());
  ASSERT_EQ(n, 9);

  std::vector<Tensor> frames;
  std::vector<std::vector<float>> depths;
  for (const auto& v : scene.views) {
    frames.push_back(image_to_tensor(v.image));
    depths.push_back(v.depth);
  }
  std::vector<FlowField> shorts, longs;
  for (int k = 0; k + 1 < n; ++k) shorts.push_back(compute_gt_flow(scene.views[k], scene.views[k + 1]));
  for (int k = 0; k + kLongRangeOffset < n; ++k)
    longs.push_back(compute_gt_flow(scene.views[k], scene.views[k + kLongRangeOffset]));

  PerceptualBackbone bb;
  ConsistencyReport rep = consistency_metrics(frames, shorts, longs, depths, bb);
  EXPECT_EQ(rep.short_pairs, n - 1);
  EXPECT_EQ(rep.long_pairs, n - kLongRangeOffset);
  // view-independent shading means warped ground truth matches the target up
  // to splat interpolation blur
  EXPECT_LT(rep.short_rmse, 0.1f);
  EXPECT_LT(rep.long_rmse, 0.12f);
  EXPECT_GT(rep.short_rmse, 0.0f);
}

TEST(NvsMetrics, PsnrClosedForms) {
  Tensor a = random_image(19, 16, 16);
  EXPECT_EQ(psnr_of(a, a), 100.0f);

  std::vector<float> base(3 * 16 * 16, 0.4f), offs(3 * 16 * 16, 0.5f);
  Tensor x = Tensor::from({3, 16, 16}, base);
  Tensor y = Tensor::from({3, 16, 16}, offs);
  EXPECT_NEAR(psnr_of(x, y), 20.0f, 1e-4f);
  EXPECT_EQ(psnr_of(x, y), psnr_of(y, x));
}

TEST(NvsMetrics, SsimIsOneForIdenticalImages) {
  Tensor a = random_image(20, 16, 16);
  EXPECT_NEAR(ssim_of(a, a), 1.0f, 1e-6f);
  Tensor blurred = Tensor::from(a.shape(), a.vec());
  float* p = blurred.data();
  for (size_t i = 1; i < blurred.vec().size(); ++i) p[i] = 0.5f * (p[i] + p[i - 1]);
  const float s = ssim_of(a, blurred);
  EXPECT_LT(s, 1.0f);
  EXPECT_GT(s, 0.0f);
}

namespace {

// Independent naive SSIM: explicit 2D Gaussian window, one pass per window
// position, no separability or incremental tricks.
double ssim_reference(const Tensor& a, const Tensor& b) {
  const int h = a.dim(1), w = a.dim(2), win = 11;
  std::vector<double> k2(win * win);
  double ksum = 0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      const double di = i - 5.0, dj = j - 5.0;
      k2[i * win + j] = std::exp(-(di * di + dj * dj) / (2.0 * 1.5 * 1.5));
      ksum += k2[i * win + j];
    }
  for (double& v : k2) v /= ksum;

  const double c1 = 1e-4, c2 = 9e-4;
  const size_t hw = static_cast<size_t>(h) * w;
  double total = 0;
  for (int ch = 0; ch < 3; ++ch) {
    const float* pa = a.data() + ch * hw;
    const float* pb = b.data() + ch * hw;
    double acc = 0;
    int cnt = 0;
    for (int y0 = 0; y0 + win <= h; ++y0)
      for (int x0 = 0; x0 + win <= w; ++x0) {
        double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
        for (int i = 0; i < win; ++i)
          for (int j = 0; j < win; ++j) {
            const double wt = k2[i * win + j];
            const double x = pa[(y0 + i) * w + x0 + j];
            const double y = pb[(y0 + i) * w + x0 + j];
            mx += wt * x;
            my += wt * y;
            mxx += wt * x * x;
            myy += wt * y * y;
            mxy += wt * x * y;
          }
        const double vx = mxx - mx * mx, vy = myy - my * my, cov = mxy - mx * my;
        acc += ((2 * mx * my + c1) * (2 * cov + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++cnt;
      }
    total += acc / cnt;
  }
  return total / 3.0;
}

}  // namespace

TEST(NvsMetrics, SsimMatchesAnIndependentRecompute) {
  for (uint64_t seed = 30; seed < 35; ++seed) {
    Tensor a = random_image(seed, 24, 24);
    Tensor b = random_image(seed + 100, 24, 24);
    EXPECT_NEAR(ssim_of(a, b), ssim_reference(a, b), 1e-4) << "seed " << seed;
    EXPECT_NEAR(ssim_of(a, a), 1.0, 1e-6);
  }
}

TEST(NvsMetrics, BundleAgreesWithIndividualMetrics) {
  PerceptualBackbone bb;
  Tensor a = random_image(40, 16, 16);
  Tensor b = random_image(41, 16, 16);
  NvsMetrics m = nvs_metrics(a, b, bb);
  EXPECT_EQ(m.psnr, psnr_of(a, b));
  EXPECT_EQ(m.ssim, ssim_of(a, b));
  NoGradGuard ng;
  EXPECT_EQ(m.perceptual, perceptual_distance(a, b, PerceptualBackbone()).item());
  EXPECT_THROW(nvs_metrics(a, random_image(42, 16, 8), bb), std::invalid_argument);
  EXPECT_THROW(ssim_of(random_image(43, 8, 8), random_image(44, 8, 8)), std::invalid_argument);
}

TEST(Histogram, GrayImagePutsAllMassInTheCenterBin) {
  Tensor gray = Tensor::full({3, 8, 8}, 0.5f);
  RgbUvHistogram h = rgbuv_histogram(gray);
  EXPECT_EQ(h.bins, 64);
  // u = v = 0 exactly; bin index floor((0+3)/6*64) = 32
  EXPECT_DOUBLE_EQ(h.at(32, 32), 1.0);
  EXPECT_NEAR(std::accumulate(h.mass.begin(), h.mass.end(), 0.0), 1.0, 1e-9);
}

TEST(Histogram, RedAndBlueLandInDisjointBins) {
  std::vector<float> red(3 * 16, 0.0f), blue(3 * 16, 0.0f);
  for (int i = 0; i < 16; ++i) {
    red[i] = 1.0f;
    blue[2 * 16 + i] = 1.0f;
  }
  RgbUvHistogram hr = rgbuv_histogram(Tensor::from({3, 4, 4}, red));
  RgbUvHistogram hb = rgbuv_histogram(Tensor::from({3, 4, 4}, blue));

  // independent bin derivation from the log-chroma definition
  auto bin = [](double coord) {
    return std::min(std::max(static_cast<int>(std::floor((coord + 3.0) / 6.0 * 64)), 0), 63);
  };
  const double eps = 1e-4;
  const double hot = std::log((1.0 + eps) / eps);  // ~9.2, clamps to bin 63
  const double nil = 0.0;                          // log(eps/eps)
  EXPECT_DOUBLE_EQ(hr.at(bin(hot), bin(nil)), 1.0);
  EXPECT_DOUBLE_EQ(hb.at(bin(nil), bin(hot)), 1.0);
  EXPECT_EQ(bin(hot), 63);
  EXPECT_NE(bin(hot), bin(nil));
  EXPECT_DOUBLE_EQ(histogram_distance(hr, hb), 1.0);
}

TEST(Histogram, UnitMassAndSpatialPermutationInvariance) {
  const int h = 8, w = 8;
  Tensor img = random_image(50, h, w);
  RgbUvHistogram h1 = rgbuv_histogram(img);
  EXPECT_NEAR(std::accumulate(h1.mass.begin(), h1.mass.end(), 0.0), 1.0, 1e-9);

  // permute pixels, keeping channels together
  const size_t hw = static_cast<size_t>(h) * w;
  std::vector<size_t> perm(hw);
  std::iota(perm.begin(), perm.end(), size_t{0});
  Rng r(51);
  for (size_t i = hw - 1; i > 0; --i) std::swap(perm[i], perm[r.below(i + 1)]);
  std::vector<float> shuffled(3 * hw);
  for (size_t i = 0; i < hw; ++i)
    for (int c = 0; c < 3; ++c) shuffled[c * hw + perm[i]] = img.data()[c * hw + i];
  RgbUvHistogram h2 = rgbuv_histogram(Tensor::from({3, h, w}, shuffled));

  for (size_t i = 0; i < h1.mass.size(); ++i) EXPECT_NEAR(h1.mass[i], h2.mass[i], 1e-9);
}

TEST(Histogram, DistanceIsAMetricOnExamples) {
  RgbUvHistogram a = rgbuv_histogram(random_image(52, 8, 8));
  RgbUvHistogram b = rgbuv_histogram(random_image(53, 8, 8));
  EXPECT_NEAR(histogram_distance(a, a), 0.0, 1e-9);
  EXPECT_DOUBLE_EQ(histogram_distance(a, b), histogram_distance(b, a));
  EXPECT_GE(histogram_distance(a, b), 0.0);
  EXPECT_LE(histogram_distance(a, b), 1.0);
  RgbUvHistogram other = rgbuv_histogram(random_image(54, 8, 8), 32);
  EXPECT_THROW(histogram_distance(a, other), std::invalid_argument);
}

TEST(Report, JsonAndCsvCarryRowsPlusMean) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "stylesplat_eval_report";
  fs::create_directories(dir);

  std::vector<MetricsRow> rows(2);
  rows[0] = {"scene_a", "style_1", 0.1f, 0.2f, 0.3f, 0.4f, 25.0f, 0.9f, 0.05f, 0.3f};
  rows[1] = {"scene_b", "style_2", 0.3f, 0.4f, 0.5f, 0.6f, 35.0f, 0.7f, 0.15f, 0.5f};

  write_metrics_json(dir / "report.json", rows);
  std::ifstream jf(dir / "report.json");
  nlohmann::json j = nlohmann::json::parse(jf);
  ASSERT_EQ(j.at("rows").size(), 2u);
  EXPECT_EQ(j.at("rows")[0].at("scene_id"), "scene_a");
  EXPECT_EQ(j.at("rows")[1].at("style_id"), "style_2");
  EXPECT_NEAR(j.at("mean").at("psnr").get<float>(), 30.0f, 1e-6f);
  EXPECT_NEAR(j.at("mean").at("short_rmse").get<float>(), 0.2f, 1e-6f);

  write_metrics_csv(dir / "report.csv", rows);
  std::ifstream cf(dir / "report.csv");
  std::string line;
  std::getline(cf, line);
  EXPECT_EQ(line,
            "scene_id,style_id,short_rmse,short_perceptual,long_rmse,long_perceptual,"
            "psnr,ssim,perceptual,hist_distance");
  int data_lines = 0;
  std::string last;
  while (std::getline(cf, line)) {
    if (!line.empty()) {
      ++data_lines;
      last = line;
    }
  }
  EXPECT_EQ(data_lines, 3);
  EXPECT_EQ(last.substr(0, 5), "mean,");

  fs::remove_all(dir);
}
