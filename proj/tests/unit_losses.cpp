#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "stylesplat/data/generate.hpp"
#include "stylesplat/losses/losses.hpp"
#include "testing/util.hpp"

using namespace stylesplat;
using stylesplat::testing::all_indices;
using stylesplat::testing::fd_check;

namespace {

Tensor random_image(Rng& rng, int size) {
  std::vector<float> v(3 * size * size);
  for (auto& x : v) x = rng.uniform(0.0f, 1.0f);
  return Tensor::from({3, size, size}, std::move(v));
}

}  // namespace

TEST(Backbone, StageShapesFollowStrides) {
  NoGradGuard ng;
  PerceptualBackbone bb;
  Rng rng(200);
  auto feats = bb.stages(random_image(rng, 32));
  const int ch[4] = {16, 32, 64, 128};
  const int res[4] = {32, 16, 8, 4};
  for (int s = 0; s < 4; ++s) {
    EXPECT_EQ(feats[s].shape(), (Shape{ch[s], res[s], res[s]}));
    for (int64_t i = 0; i < feats[s].numel(); ++i) ASSERT_TRUE(std::isfinite(feats[s].data()[i]));
  }
}

TEST(Backbone, DeterministicAndFrozen) {
  NoGradGuard ng;
  PerceptualBackbone a, b;
  Rng rng(201);
  Tensor img = random_image(rng, 16);
  auto fa = a.stages(img);
  auto fb = b.stages(img);
  for (int s = 0; s < 4; ++s)
    for (int64_t i = 0; i < fa[s].numel(); ++i) ASSERT_EQ(fa[s].data()[i], fb[s].data()[i]);
  for (const auto& conv : a.convs) {
    EXPECT_FALSE(conv.w.requires_grad());
    EXPECT_FALSE(conv.b.requires_grad());
  }
}

TEST(Losses, FeatureStatsClosedForms) {
  NoGradGuard ng;
  Tensor constant = Tensor::from({1, 2, 2}, {0.7f, 0.7f, 0.7f, 0.7f});
  auto s1 = feature_stats(constant);
  EXPECT_NEAR(s1.mean.data()[0], 0.7, 1e-6);
  EXPECT_NEAR(s1.stddev.data()[0], std::sqrt(1e-10), 1e-6);

  Tensor pair = Tensor::from({1, 1, 2}, {0.0f, 2.0f});
  auto s2 = feature_stats(pair);
  EXPECT_NEAR(s2.mean.data()[0], 1.0, 1e-6);
  EXPECT_NEAR(s2.stddev.data()[0], 1.0, 1e-5);
}

TEST(Losses, StyleLossZeroAtFixpointAndSymmetric) {
  NoGradGuard ng;
  PerceptualBackbone bb;
  Rng rng(202);
  Tensor a = random_image(rng, 16);
  Tensor b = random_image(rng, 16);
  EXPECT_NEAR(style_loss({a}, a, bb).item(), 0.0, 1e-8);
  const float ab = style_loss({a}, b, bb).item();
  const float ba = style_loss({b}, a, bb).item();
  EXPECT_NEAR(ab, ba, 1e-6);
  EXPECT_GT(ab, 0.0f);
}

TEST(Losses, StyleLossSeparatesCorpusStyles) {
  NoGradGuard ng;
  PerceptualBackbone bb;
  auto styles = generate_style_corpus(7, 4, 16);
  Tensor s0 = image_to_tensor(styles[0]);
  Tensor s1 = image_to_tensor(styles[1]);
  EXPECT_GT(style_loss({s0}, s1, bb).item(), 1e-6f);
}

TEST(Losses, StyleLossDependsOnStatisticsOnly) {
  NoGradGuard ng;
  Rng rng(203);
  std::vector<float> v(8 * 4 * 4);
  for (auto& x : v) x = rng.normal();
  Tensor f = Tensor::from({8, 4, 4}, std::vector<float>(v));
  std::vector<int> perm(16);
  for (int i = 0; i < 16; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), std::mt19937(11));
  std::vector<float> vp(v.size());
  for (int c = 0; c < 8; ++c)
    for (int i = 0; i < 16; ++i) vp[c * 16 + i] = v[c * 16 + perm[i]];
  Tensor fp = Tensor::from({8, 4, 4}, std::move(vp));
  Tensor ref = Tensor::from({8, 4, 4}, rng.normal_vec(8 * 16, 1.0f));
  EXPECT_NEAR(style_stat_distance(f, ref).item(), style_stat_distance(fp, ref).item(), 1e-6);
}

TEST(Losses, ContentLossMatchesManualRecompute) {
  NoGradGuard ng;
  PerceptualBackbone bb;
  Rng rng(204);
  Tensor r = random_image(rng, 16);
  Tensor t = random_image(rng, 16);
  const float loss = content_loss({r}, {t}, bb).item();
  auto fr = bb.stages(r);
  auto ft = bb.stages(t);
  double manual = 0;
  for (int s : {2, 3}) {
    double acc = 0;
    for (int64_t i = 0; i < fr[s].numel(); ++i) {
      const double d = static_cast<double>(fr[s].data()[i]) - ft[s].data()[i];
      acc += d * d;
    }
    manual += acc / fr[s].numel();
  }
  EXPECT_NEAR(loss, manual, 1e-5);
}

TEST(Losses, PhotometricConstantOffsetDecomposes) {
  NoGradGuard ng;
  PerceptualBackbone bb;
  Rng rng(205);
  std::vector<float> v(3 * 16 * 16);
  for (auto& x : v) x = rng.uniform(0.2f, 0.7f);
  std::vector<float> v2(v);
  for (auto& x : v2) x += 0.1f;
  Tensor a = Tensor::from({3, 16, 16}, std::move(v));
  Tensor b = Tensor::from({3, 16, 16}, std::move(v2));
  const float photo = photometric_loss({a}, {b}, bb).item();
  const float perc = perceptual_distance(a, b, bb).item();
  EXPECT_NEAR(photo, 0.01f + 0.05f * perc, 1e-5);
  EXPECT_NEAR(photometric_loss({a}, {a}, bb).item(), 0.0, 1e-9);
}

TEST(Losses, TotalLossPhasesAndArithmetic) {
  NoGradGuard ng;
  PerceptualBackbone bb;
  Rng rng(206);
  std::vector<Tensor> stylized{random_image(rng, 16), random_image(rng, 16)};
  std::vector<Tensor> identity{random_image(rng, 16), random_image(rng, 16)};
  std::vector<Tensor> targets{random_image(rng, 16), random_image(rng, 16)};
  Tensor style = random_image(rng, 16);

  LossTerms nvs = total_loss(LossPhase::kNvs, {}, identity, targets, nullptr, bb);
  EXPECT_FLOAT_EQ(nvs.report.total, nvs.report.photometric);
  EXPECT_FLOAT_EQ(nvs.report.style, 0.0f);
  EXPECT_NEAR(nvs.report.photometric, photometric_loss(identity, targets, bb).item(), 1e-7);

  LossTerms st = total_loss(LossPhase::kStylize, stylized, identity, targets, &style, bb);
  EXPECT_NEAR(st.report.total, 10.0f * st.report.style + st.report.content + st.report.identity,
              1e-5);
  EXPECT_NEAR(st.report.style, style_loss(stylized, style, bb).item(), 1e-7);
  EXPECT_NEAR(st.report.content, content_loss(stylized, targets, bb).item(), 1e-7);
  EXPECT_NEAR(st.report.identity, photometric_loss(identity, targets, bb).item(), 1e-7);

  EXPECT_THROW(total_loss(LossPhase::kStylize, stylized, identity, targets, nullptr, bb),
               std::invalid_argument);
  EXPECT_THROW(total_loss(LossPhase::kNvs, {}, {}, {}, nullptr, bb), std::invalid_argument);
}

// "Perfect" here means the stylized renders equal the targets, the targets
// already carry the style's statistics, and the identity renders reproduce
// the targets; every term hits its fixpoint.
TEST(Losses, PerfectRendersGiveZeroStylizeTotal) {
  NoGradGuard ng;
  PerceptualBackbone bb;
  Rng rng(207);
  Tensor style = random_image(rng, 16);
  LossTerms st = total_loss(LossPhase::kStylize, {style}, {style}, {style}, &style, bb);
  EXPECT_NEAR(st.report.total, 0.0, 1e-6);
}

TEST(Losses, GradCheckAllLossesWrtPixels) {
  PerceptualBackbone bb;
  Rng rng(208);
  std::vector<float> v(3 * 8 * 8);
  for (auto& x : v) x = rng.uniform(0.2f, 0.8f);
  Tensor render = Tensor::param({3, 8, 8}, std::vector<float>(v));
  // Targets near the render keep every loss value small relative to its
  // pixel gradients, which keeps float32 FD noise inside the tolerance.
  std::vector<float> tv(v), sv(v);
  for (auto& x : tv) x += rng.normal(0.0f, 0.12f);
  for (auto& x : sv) x = 0.75f * x + 0.15f + rng.normal(0.0f, 0.1f);
  Tensor target = Tensor::from({3, 8, 8}, std::move(tv));
  Tensor style = Tensor::from({3, 8, 8}, std::move(sv));

  struct Case {
    const char* name;
    std::function<Tensor()> loss;
    float h;
    double floor;
  };
  // Content gradients live at 1e-5 scale after the deep pooled stages; the
  // path is smooth, so a larger step lifts them clear of float noise.
  std::vector<Case> cases{
      {"photometric", [&] { return photometric_loss({render}, {target}, bb); }, 1e-2f, 5e-4},
      {"style", [&] { return style_loss({render}, style, bb); }, 1e-2f, 1.5e-4},
      {"content", [&] { return content_loss({render}, {target}, bb); }, 3e-2f, 6e-6},
  };
  for (auto& c : cases) {
    render.zero_grad();
    c.loss().backward();
    auto forward = [&]() {
      NoGradGuard ng;
      return static_cast<double>(c.loss().item());
    };
    auto rep = fd_check(render, render.grad(), forward, all_indices(render), c.h, c.floor);
    EXPECT_GE(rep.checked, 5) << c.name;
    EXPECT_LT(rep.max_rel, 1e-3) << c.name << " worst idx " << rep.worst_index << " an "
                                 << rep.worst_analytic << " fd " << rep.worst_fd;
  }
}
