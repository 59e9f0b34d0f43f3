// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <gtest/gtest.h>

#include "json.hpp"
#include "nerfsr/evaluation.hpp"
#include "nerfsr/image.hpp"
#include "test_util.hpp"

namespace nerfsr {
namespace {

using testing::constant_image;
using testing::random_image;

Image add_noise(const Image& img, double amplitude, std::uint64_t seed) {
  Rng rng(seed);
  Image out = img;
  for (double& v : out.data) v += amplitude * (2.0 * uniform01(rng) - 1.0);
  return out;
}

TEST(Psnr, IdenticalImagesGiveInfinity) {
  const Image a = random_image(8, 8, 3, 1);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EXPECT_GT(psnr(a, a), 0.0);
}

TEST(Psnr, ClosedForms) {
  Image a = constant_image(10, 10, 0.0);
  Image b = constant_image(10, 10, 0.1);  // MSE 0.01
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-12);
  EXPECT_NEAR(psnr(constant_image(4, 4, 0.5), constant_image(4, 4, 0.0)), 6.0206, 1e-4);
  EXPECT_NEAR(psnr(constant_image(4, 4, 0.5), constant_image(4, 4, 0.0)), 10 * std::log10(4.0), 1e-12);
  EXPECT_NEAR(psnr(constant_image(4, 4, 127.5), constant_image(4, 4, 0.0), 255.0), 10 * std::log10(4.0), 1e-12);
}

TEST(Psnr, ShapeMismatchIsError) {
  EXPECT_THROW(psnr(constant_image(4, 4, 0), constant_image(4, 5, 0)), ShapeError);
}

TEST(Psnr, SymmetricAndDecreasingWithNoise) {
  const Image a = random_image(16, 16, 3, 2, 0.2, 0.8);
  double prev = std::numeric_limits<double>::infinity();
  for (double amp : {0.01, 0.03, 0.1, 0.2}) {
    const Image b = add_noise(a, amp, 3);
    EXPECT_DOUBLE_EQ(psnr(a, b), psnr(b, a));
    EXPECT_LT(psnr(a, b), prev);
    prev = psnr(a, b);
  }
}

/// Direct per-window evaluation, independent of the separable filter.
double reference_ssim(const Image& a, const Image& b) {
  const int win = 11;
  double g[11], total = 0.0;
  for (int i = 0; i < win; ++i) {
    g[i] = std::exp(-(i - 5.0) * (i - 5.0) / (2 * 1.5 * 1.5));
    total += g[i];
  }
  auto gray = [](const Image& im, int y, int x) { return (im(y, x, 0) + im(y, x, 1) + im(y, x, 2)) / 3.0; };
  const double c1 = 1e-4, c2 = 9e-4;
  double sum = 0.0;
  int count = 0;
  for (int y = 0; y + win <= a.height; ++y)
    for (int x = 0; x + win <= a.width; ++x) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double w = g[i] * g[j] / (total * total);
          const double u = gray(a, y + i, x + j), v = gray(b, y + i, x + j);
          mx += w * u;
          my += w * v;
        }
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double w = g[i] * g[j] / (total * total);
          const double u = gray(a, y + i, x + j) - mx, v = gray(b, y + i, x + j) - my;
          sxx += w * u * u;
          syy += w * v * v;
          sxy += w * u * v;
        }
      sum += (2 * mx * my + c1) * (2 * sxy + c2) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
      ++count;
    }
  return sum / count;
}

TEST(Ssim, MatchesDirectWindowEvaluation) {
  const Image a = random_image(20, 24, 3, 4);
  const Image b = add_noise(a, 0.2, 5);
  EXPECT_NEAR(ssim(a, b), reference_ssim(a, b), 1e-10);
}

TEST(Ssim, IdentityAndSymmetry) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Image a = random_image(16, 16, 3, 10 + s);
    const Image b = random_image(16, 16, 3, 20 + s);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(ssim(a, b), ssim(b, a));
    EXPECT_GE(ssim(a, b), -1.0);
    EXPECT_LE(ssim(a, b), 1.0);
  }
  const Image a = random_image(16, 16, 3, 30);
  Image neg = a;
  for (double& v : neg.data) v = 1.0 - v;
  EXPECT_GE(ssim(a, neg), -1.0);
  EXPECT_LT(ssim(a, neg), 0.0);
}

TEST(Ssim, ConstantImagesClosedForm) {
  const double c1 = 0.3, c2 = 0.7, C1 = 1e-4;
  EXPECT_NEAR(ssim(constant_image(16, 16, c1), constant_image(16, 16, c2)),
              (2 * c1 * c2 + C1) / (c1 * c1 + c2 * c2 + C1), 1e-9);
}

TEST(Ssim, TooSmallIsError) { EXPECT_THROW(ssim(constant_image(10, 20, 0), constant_image(10, 20, 0)), ShapeError); }

/// Tiny two-tap feature network stored in the archive format.
std::filesystem::path write_feature_net(const testing::TempDir& dir) {
  Archive a;
  a.kind = "perceptual";
  a.meta_json = R"({"layers": [{"type": "conv", "name": "c1"}, {"type": "relu"}, {"type": "tap"},
                    {"type": "pool"}, {"type": "conv", "name": "c2"}, {"type": "relu"}, {"type": "tap"}]})";
  Rng rng(7);
  auto rnd = [&](std::size_t n) {
    Buffer v(n);
    for (double& x : v) x = normal01(rng) * 0.3;
    return v;
  };
  a.add("c1.weight", {6, 3, 3, 3}, rnd(6 * 27));
  a.add("c1.bias", {6}, rnd(6));
  a.add("c2.weight", {8, 6, 3, 3}, rnd(8 * 54));
  a.add("c2.bias", {8}, rnd(8));
  Buffer lin(6, 0.5);
  a.add("lin0.weight", {6}, lin);
  const auto path = dir / "perceptual.ckpt";
  save_archive(path, a);
  return path;
}

TEST(Perceptual, MissingWeightsAreUnavailable) {
  const Image a = random_image(16, 16, 3, 8);
  const PerceptualResult r = perceptual_distance(a, a, "/nonexistent/weights.ckpt");
  EXPECT_FALSE(r.available);
  EXPECT_NE(r.status.find("unavailable"), std::string::npos);
}

TEST(Perceptual, ZeroForIdenticalAndMonotoneInNoise) {
  testing::TempDir dir;
  const auto path = write_feature_net(dir);
  const Image a = random_image(24, 24, 3, 9, 0.2, 0.8);
  const PerceptualResult same = perceptual_distance(a, a, path);
  ASSERT_TRUE(same.available);
  EXPECT_EQ(same.value, 0.0);
  double prev = 0.0;
  for (double amp : {0.02, 0.08, 0.3}) {
    const PerceptualResult r = perceptual_distance(a, add_noise(a, amp, 10), path);
    EXPECT_GE(r.value, 0.0);
    EXPECT_GT(r.value, prev);
    prev = r.value;
  }
}

struct TinyPipeline {
  RadianceField field;
  SRNetwork sr;
  Pipeline pipeline;

  explicit TinyPipeline(int ratio) {
    FieldConfig fc;
    fc.resolution = {32, 32, 32};
    field = RadianceField(fc, 1);
    SRConfig sc;
    sc.ratio = ratio;
    sc.n_blocks = 1;
    sc.n_channels = 8;
    sr = SRNetwork(sc, 2);
    pipeline.field = &field;
    pipeline.sr = &sr;
    pipeline.upscaler = Upscaler::Network;
    pipeline.ratio = ratio;
    pipeline.render.n_samples = 128;
    pipeline.render.weight_threshold = 0.0;
  }
};

std::vector<CameraModel> test_cameras(int size) {
  return {CameraModel::centered(size, size, size, look_at(Vec3(3, 2, 1), Vec3::Zero(), Vec3::UnitZ()))};
}

TEST(ProfileRender, SingleRepeatHasZeroSpreadAndAdditiveBytes) {
  TinyPipeline p(2);
  const auto cams = test_cameras(32);
  const ProfileResult r = profile_render(p.pipeline, cams, 1);
  EXPECT_EQ(r.std_seconds, 0.0);
  EXPECT_EQ(r.frames, 1);
  EXPECT_GT(r.mean_seconds, 0.0);
  EXPECT_EQ(r.field_bytes, p.field.size_bytes());
  EXPECT_EQ(r.sr_bytes, p.sr.size_bytes());
  EXPECT_EQ(r.total_bytes, r.field_bytes + r.sr_bytes);
}

TEST(ProfileRender, DoesNotTouchParameters) {
  TinyPipeline p(2);
  auto digest = [&] {
    std::uint64_t h = 0;
    for (const Param* q : std::as_const(p.field).parameters()) h = checksum(q->value, h ^ 0x9e37);
    for (const Param* q : std::as_const(p.sr).parameters()) h = checksum(q->value, h ^ 0x9e37);
    return h;
  };
  const std::uint64_t before = digest();
  profile_render(p.pipeline, test_cameras(16), 2);
  EXPECT_EQ(digest(), before);
}

TEST(ProfileRender, HigherRatioRendersFaster) {
  TinyPipeline x2(2), x4(4);
  const auto cams = test_cameras(64);
  const ProfileResult a = profile_render(x2.pipeline, cams, 3);
  const ProfileResult b = profile_render(x4.pipeline, cams, 3);
  EXPECT_LT(b.mean_seconds, a.mean_seconds);
}

MethodResult sample_result() {
  MethodResult r;
  r.scene = "toy";
  r.method = "ft-randpatch";
  r.views = {{"v0", 31.234567, 0.9, std::nullopt}, {"v1", 29.0, 0.8, std::nullopt}};
  r.render_seconds = 0.1234;
  r.train_seconds = 42.0;
  r.field_bytes = 1 << 20;
  r.sr_bytes = 1 << 19;
  r.config_fingerprint = 77;
  return r;
}

TEST(Report, EmptyTableHasHeaderOnly) {
  const EvalReport report = build_report({});
  const std::string table = report.table();
  EXPECT_NE(table.find("PSNR"), std::string::npos);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 2);  // header and rule
  EXPECT_TRUE(nlohmann::json::parse(report.json())["rows"].empty());
}

TEST(Report, SingleRowRoundsToTwoDecimals) {
  const EvalReport report = build_report({sample_result()});
  const std::string table = report.table();
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
  EXPECT_NE(table.find("30.12"), std::string::npos);  // (31.234567 + 29) / 2
  EXPECT_NE(table.find("1.500"), std::string::npos);  // total MB
  const auto j = nlohmann::json::parse(report.json());
  EXPECT_DOUBLE_EQ(j["rows"][0]["mean_psnr"].get<double>(), (31.234567 + 29.0) / 2);
  EXPECT_EQ(j["rows"][0]["bytes"]["total"].get<std::size_t>(), (1u << 20) + (1u << 19));
  EXPECT_EQ(j["averaging"], "per-view mean");
}

TEST(Report, InfinitePsnrIsCapped) {
  MethodResult r = sample_result();
  r.views = {{"v0", std::numeric_limits<double>::infinity(), 1.0, std::nullopt}};
  EXPECT_EQ(r.mean_psnr(), kPsnrCap);
  const auto j = nlohmann::json::parse(build_report({r}).json());
  EXPECT_EQ(j["rows"][0]["views"][0]["psnr"].get<double>(), kPsnrCap);
  EXPECT_TRUE(j["rows"][0]["views"][0]["psnr_infinite"].get<bool>());
  EXPECT_NE(build_report({r}).table().find("99.00"), std::string::npos);
}

TEST(Report, RegeneratedFromStoredRendersIsBitwiseEqual) {
  testing::TempDir dir;
  std::vector<Image> gt, renders;
  std::vector<std::string> names;
  for (int i = 0; i < 3; ++i) {
    gt.push_back(quantize8(random_image(16, 16, 3, 40 + i)));
    renders.push_back(add_noise(gt.back(), 0.05, 50 + i));
    names.push_back("view" + std::to_string(i));
    write_png(dir / (names.back() + ".png"), renders.back());
  }
  auto build = [&](const std::vector<Image>& imgs) {
    MethodResult r = sample_result();
    r.views = evaluate_views(imgs, gt, names);
    EvalReport report = build_report({r});
    report.include_timing = false;
    return report;
  };
  std::vector<Image> stored;
  for (const auto& n : names) stored.push_back(read_png(dir / (n + ".png")));
  const EvalReport first = build(stored);
  std::vector<Image> again;
  for (const auto& n : names) again.push_back(read_png(dir / (n + ".png")));
  const EvalReport second = build(again);
  EXPECT_EQ(first.json(), second.json());
  EXPECT_EQ(first.table(), second.table());
  EXPECT_EQ(first.table().find("Render(s)"), std::string::npos);
  EXPECT_EQ(first.json().find("render_seconds"), std::string::npos);
}

TEST(EvaluateViews, GroundTruthAgainstItself) {
  std::vector<Image> gt{random_image(16, 16, 3, 60), random_image(16, 16, 3, 61)};
  const std::vector<std::string> names{"a", "b"};
  MethodResult r;
  r.views = evaluate_views(gt, gt, names);
  EXPECT_EQ(r.mean_psnr(), 99.0);
  EXPECT_DOUBLE_EQ(r.mean_ssim(), 1.0);
  EXPECT_THROW(evaluate_views(std::span(gt).first(1), gt, names), ShapeError);
}

}  // namespace
}  // namespace nerfsr
