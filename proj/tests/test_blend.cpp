#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "dcp/blend.hpp"
#include "test_support.hpp"

namespace dcp {
namespace {

// Random union of rectangles kept at least `margin` pixels from the edge.
RegionMask random_region(int h, int w, int margin, std::mt19937_64& rng) {
  RegionMask m(h, w, 0);
  std::uniform_int_distribution<int> rows(margin, h - margin - 1), cols(margin, w - margin - 1);
  for (int k = 0; k < 4; ++k) {
    int r0 = rows(rng), r1 = rows(rng), c0 = cols(rng), c1 = cols(rng);
    if (r0 > r1) std::swap(r0, r1);
    if (c0 > c1) std::swap(c0, c1);
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) m.at(r, c) = 1;
  }
  return m;
}

// Gradient of the edge energy at each region pixel, computed pixel by pixel.
double residual_inf(const GuidanceField& g, const Image& f) {
  double worst = 0;
  for (int r = 0; r < f.height; ++r)
    for (int c = 0; c < f.width; ++c) {
      if (!g.region.at(r, c)) continue;
      for (int ch = 0; ch < f.channels; ++ch) {
        double s = 0;
        if (c + 1 < f.width) s += (f.at(r, c + 1, ch) - f.at(r, c, ch)) - g.gx.at(r, c, ch);
        if (c > 0) s += (f.at(r, c - 1, ch) - f.at(r, c, ch)) + g.gx.at(r, c - 1, ch);
        if (r + 1 < f.height) s += (f.at(r + 1, c, ch) - f.at(r, c, ch)) - g.gy.at(r, c, ch);
        if (r > 0) s += (f.at(r - 1, c, ch) - f.at(r, c, ch)) + g.gy.at(r - 1, c, ch);
        worst = std::max(worst, std::abs(s));
      }
    }
  return worst;
}

Image from_function(int n, const std::function<double(double, double)>& f) {
  Image img(n, n, 1);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) img.at(r, c) = f((c - n / 2.0) / 16.0, (r - n / 2.0) / 16.0);
  return img;
}

TEST(SolvePoisson, ZeroGuidanceConstantBoundary) {
  std::mt19937_64 rng(1);
  const RegionMask region = random_region(20, 20, 1, rng);
  GuidanceField g{region, Image(20, 20, 1, 0.0), Image(20, 20, 1, 0.0), Image(20, 20, 1, 0.37)};
  const Image out = solve_poisson(g);
  for (double v : out.values) EXPECT_NEAR(v, 0.37, 1e-9);
}

TEST(SolvePoisson, ExactGradientsReproduceImage) {
  std::mt19937_64 rng(2);
  const Image img = testing::random_image(24, 24, 3, 3);
  const RegionMask region = random_region(24, 24, 1, rng);
  Image boundary = img;
  for (int r = 0; r < 24; ++r)
    for (int c = 0; c < 24; ++c)
      if (region.at(r, c))
        for (int ch = 0; ch < 3; ++ch) boundary.at(r, c, ch) = 0.0;
  const Image out = solve_poisson(gradient_guidance(img, region, boundary));
  for (size_t k = 0; k < img.values.size(); ++k) EXPECT_NEAR(out.values[k], img.values[k], 1e-8);
}

TEST(SolvePoisson, ResidualOnRandomInstances) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.2);
  for (int trial = 0; trial < 100; ++trial) {
    const RegionMask region = random_region(32, 32, 1, rng);
    GuidanceField g{region, Image(32, 32, 1), Image(32, 32, 1), testing::random_image(32, 32, 1, rng())};
    for (double& v : g.gx.values) v = n(rng);
    for (double& v : g.gy.values) v = n(rng);
    const Image out = solve_poisson(g);
    EXPECT_LT(residual_inf(g, out), 1e-6) << "trial " << trial;
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c)
        if (!region.at(r, c)) {
          EXPECT_EQ(out.at(r, c), g.boundary.at(r, c));
        }
  }
}

TEST(SolvePoisson, ReproducesHarmonicFunctions) {
  const std::vector<std::function<double(double, double)>> fns = {
      [](double x, double y) { return x * x - y * y; },
      [](double x, double y) { return x * y; },
      [](double x, double y) { return x * x * x - 3 * x * y * y; },
  };
  for (const auto& f : fns) {
    const Image truth = from_function(64, f);
    RegionMask region(64, 64, 0);
    for (int r = 1; r < 63; ++r)
      for (int c = 1; c < 63; ++c) region.at(r, c) = 1;
    Image boundary = truth;
    for (int r = 1; r < 63; ++r)
      for (int c = 1; c < 63; ++c) boundary.at(r, c) = 0.0;
    const Image out = solve_poisson({region, Image(64, 64, 1, 0.0), Image(64, 64, 1, 0.0), boundary});
    for (size_t k = 0; k < truth.values.size(); ++k) ASSERT_NEAR(out.values[k], truth.values[k], 1e-5);
  }
}

TEST(SolvePoisson, LinearInGuidanceAndBoundary) {
  std::mt19937_64 rng(4);
  const RegionMask region = random_region(16, 16, 1, rng);
  GuidanceField g{region, testing::random_image(16, 16, 1, 5), testing::random_image(16, 16, 1, 6),
                  testing::random_image(16, 16, 1, 7)};
  const Image base = solve_poisson(g);
  GuidanceField h = g;
  for (auto* img : {&h.gx, &h.gy, &h.boundary})
    for (double& v : img->values) v *= -2.5;
  const Image scaled = solve_poisson(h);
  for (size_t k = 0; k < base.values.size(); ++k) EXPECT_NEAR(scaled.values[k], -2.5 * base.values[k], 1e-8);
}

TEST(SolvePoisson, ShapeMismatch) {
  GuidanceField g{RegionMask(4, 4, 0), Image(4, 4, 1), Image(4, 5, 1), Image(4, 4, 1)};
  EXPECT_THROW(solve_poisson(g), Error);
}

RegionMask square_mask(int h, int w, int r0, int c0, int side) {
  RegionMask m(h, w, 0);
  for (int r = r0; r < r0 + side; ++r)
    for (int c = c0; c < c0 + side; ++c) m.at(r, c) = 1;
  return m;
}

TEST(MpbBlend, IdenticalImagesUnchanged) {
  const Image img = testing::random_image(40, 40, 3, 8);
  const Image out = mpb_blend(img, img, square_mask(40, 40, 12, 10, 14));
  for (size_t k = 0; k < img.values.size(); ++k) EXPECT_NEAR(out.values[k], img.values[k], 1e-8);
}

TEST(MpbBlend, ConstantStaysConstant) {
  const Image c(30, 30, 1, 0.6);
  const Image out = mpb_blend(c, c, square_mask(30, 30, 8, 8, 10));
  for (double v : out.values) EXPECT_NEAR(v, 0.6, 1e-9);
}

TEST(MpbBlend, MaskInteriorTakesSourceAndFarPixelsTakeTarget) {
  const Image target = testing::random_image(48, 48, 1, 9);
  const Image source = testing::periodic_texture(48, 48, 10);
  const RegionMask mask = square_mask(48, 48, 15, 15, 16);
  BlendParams p;
  const BlendResult res = mpb_blend_detailed(source, target, mask, p);
  for (int r = 0; r < 48; ++r)
    for (int c = 0; c < 48; ++c) {
      const double a = res.alpha.at(r, c);
      EXPECT_GE(a, 0.0);
      EXPECT_LE(a, 1.0);
      EXPECT_GE(res.image.at(r, c), 0.0);
      EXPECT_LE(res.image.at(r, c), 1.0);
      if (mask.at(r, c)) {
        EXPECT_DOUBLE_EQ(res.image.at(r, c), source.at(r, c));
      } else if (!res.support.at(r, c)) {
        EXPECT_EQ(res.image.at(r, c), target.at(r, c));
      }
    }
  // the support is the mask dilated by the ring width
  EXPECT_TRUE(res.support.at(15 - p.ring, 20));
  EXPECT_FALSE(res.support.at(15 - p.ring - 1, 20));
}

TEST(MpbBlend, IdempotentOnItsOwnOutput) {
  const Image target = testing::random_image(40, 40, 3, 11);
  const Image source = testing::random_image(40, 40, 3, 12);
  const RegionMask mask = square_mask(40, 40, 12, 12, 12);
  const Image once = mpb_blend(source, target, mask);
  const Image twice = mpb_blend(source, once, mask);
  for (size_t k = 0; k < once.values.size(); ++k) EXPECT_NEAR(twice.values[k], once.values[k], 1e-7);
}

TEST(MpbBlend, MaskTouchingBorderRejected) {
  const Image img(20, 20, 1, 0.5);
  try {
    mpb_blend(img, img, square_mask(20, 20, 0, 5, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MaskTouchesBorder);
  }
  EXPECT_THROW(mpb_blend(img, img, RegionMask(20, 20, 0)), Error);
  EXPECT_THROW(mpb_blend(img, Image(20, 21, 1, 0.5), square_mask(20, 20, 5, 5, 4)), Error);
}

TEST(MpbBlend, RingMayReachImageEdge) {
  const Image target = testing::random_image(20, 20, 1, 13);
  const Image source(20, 20, 1, 0.2);
  const Image out = mpb_blend(source, target, square_mask(20, 20, 2, 2, 5));
  for (int r = 2; r < 7; ++r)
    for (int c = 2; c < 7; ++c) EXPECT_DOUBLE_EQ(out.at(r, c), 0.2);
}

TEST(DistanceAlpha, RampsFromSupportEdge) {
  RegionMask s = square_mask(30, 30, 5, 5, 20);
  const AlphaMask a = distance_alpha(s, 5);
  EXPECT_DOUBLE_EQ(a.at(5, 15), 0.2);
  EXPECT_DOUBLE_EQ(a.at(7, 15), 0.6);
  EXPECT_DOUBLE_EQ(a.at(15, 15), 1.0);
  EXPECT_DOUBLE_EQ(a.at(2, 2), 0.0);
}

}  // namespace
}  // namespace dcp
