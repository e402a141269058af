#include <gtest/gtest.h>

#include <random>
#include <set>

#include "dcp/foreground.hpp"
#include "test_support.hpp"

namespace dcp {
namespace {

using Point = std::pair<int, int>;

std::set<Point> to_set(const ForegroundMask& m) {
  std::set<Point> s;
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c)
      if (m.at(r, c)) s.insert({r, c});
  return s;
}

std::set<Point> se_set(const StructuringElement& se) {
  std::set<Point> s;
  for (int y = 0; y < se.height; ++y)
    for (int x = 0; x < se.width; ++x)
      if (se.cells[static_cast<size_t>(y) * se.width + x]) s.insert({y - se.origin_row, x - se.origin_col});
  return s;
}

bool in_image(Point p, int h, int w) { return p.first >= 0 && p.second >= 0 && p.first < h && p.second < w; }

// Minkowski sum restricted to the image.
std::set<Point> set_dilate(const std::set<Point>& a, const std::set<Point>& b, int h, int w) {
  std::set<Point> out;
  for (const Point& p : a)
    for (const Point& q : b) {
      const Point z{p.first + q.first, p.second + q.second};
      if (in_image(z, h, w)) out.insert(z);
    }
  return out;
}

// Translates of b contained in a; points beyond the image are never in a.
std::set<Point> set_erode(const std::set<Point>& a, const std::set<Point>& b, int h, int w) {
  std::set<Point> out;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      bool all = true;
      for (const Point& q : b) all = all && a.count({r + q.first, c + q.second}) > 0;
      if (all) out.insert({r, c});
    }
  return out;
}

ForegroundMask random_mask(int h, int w, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution b(p);
  ForegroundMask m(h, w, 0);
  for (auto& v : m.values) v = b(rng) ? 1 : 0;
  return m;
}

std::vector<StructuringElement> test_elements() {
  std::vector<StructuringElement> ses = {StructuringElement::square(3), StructuringElement::square(5),
                                         StructuringElement::disk(5)};
  // asymmetric kernel with an off-center origin
  ses.emplace_back(2, 3, std::vector<std::uint8_t>{1, 1, 0, 0, 1, 1}, 0, 0);
  return ses;
}

TEST(StructuringElement, ShapesAndParse) {
  const auto disk = StructuringElement::disk(7);
  EXPECT_EQ(disk.offsets().size(), 29u);
  EXPECT_EQ(StructuringElement::parse("disk:7").cells, disk.cells);
  EXPECT_EQ(StructuringElement::parse("square:3").offsets().size(), 9u);
  EXPECT_EQ(StructuringElement::parse("square:5").spec, "square:5");
  EXPECT_THROW(StructuringElement::parse("square"), Error);
  EXPECT_THROW(StructuringElement::parse("hex:3"), Error);
  EXPECT_THROW(StructuringElement::parse("disk:4"), Error);
  EXPECT_THROW(StructuringElement::parse("disk:3x"), Error);
  EXPECT_THROW(StructuringElement(2, 2, {0, 0, 0, 0}, 0, 0), Error);
  EXPECT_THROW(StructuringElement(2, 2, {1, 0, 0, 0}, 2, 0), Error);
}

TEST(Morphology, MatchesSetDefinitionsOnRandomMasks) {
  std::mt19937_64 rng(2024);
  const auto ses = test_elements();
  for (int trial = 0; trial < 1000; ++trial) {
    const ForegroundMask m = random_mask(16, 16, trial % 3 == 0 ? 0.8 : 0.55, rng);
    const auto& se = ses[static_cast<size_t>(trial) % ses.size()];
    const auto a = to_set(m), b = se_set(se);
    const auto open = set_dilate(set_erode(a, b, 16, 16), b, 16, 16);
    const auto close = set_erode(set_dilate(a, b, 16, 16), b, 16, 16);
    ASSERT_EQ(to_set(morph_open(m, se)), open) << "trial " << trial;
    ASSERT_EQ(to_set(morph_close(m, se)), close) << "trial " << trial;
  }
}

TEST(Morphology, OrderingAndIdempotence) {
  std::mt19937_64 rng(5);
  for (const auto& se : test_elements())
    for (int trial = 0; trial < 50; ++trial) {
      ForegroundMask m = random_mask(16, 16, 0.6, rng);
      // closing is extensive only away from the border, where erosion sees outside pixels as 0
      for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c)
          if (r < 3 || c < 3 || r >= 13 || c >= 13) m.at(r, c) = 0;
      const auto in = to_set(m);
      const ForegroundMask o = morph_open(m, se), c = morph_close(m, se);
      for (const auto& p : to_set(o)) EXPECT_TRUE(in.count(p));
      for (const auto& p : in) EXPECT_TRUE(to_set(c).count(p));
      EXPECT_EQ(morph_open(o, se), o);
      EXPECT_EQ(morph_close(c, se), c);
    }
}

TEST(Morphology, WorkedExamples) {
  const auto se = StructuringElement::square(3);
  ForegroundMask dot(9, 9, 0);
  dot.at(4, 4) = 1;
  EXPECT_EQ(morph_open(dot, se).count(), 0u);

  ForegroundMask block(16, 16, 0);
  for (int r = 3; r < 13; ++r)
    for (int c = 3; c < 13; ++c) block.at(r, c) = 1;
  EXPECT_EQ(morph_open(block, se), block);

  ForegroundMask holed = block;
  holed.at(7, 7) = 0;
  EXPECT_EQ(morph_close(holed, se), block);
  EXPECT_EQ(morph_close(ForegroundMask(8, 8, 0), se).count(), 0u);
}

TEST(DifferenceMask, Examples) {
  const Image bg = testing::random_image(30, 30, 3, 1);
  EXPECT_EQ(difference_mask(bg, bg, 30).count(), 0u);

  Image bgc(30, 30, 1, 0.3), fr = bgc;
  for (int r = 5; r < 15; ++r)
    for (int c = 8; c < 18; ++c) fr.at(r, c) = 0.3 + 100.0 / 255.0;
  const ForegroundMask m = difference_mask(bgc, fr, 30);
  for (int r = 0; r < 30; ++r)
    for (int c = 0; c < 30; ++c) EXPECT_EQ(m.at(r, c), (r >= 5 && r < 15 && c >= 8 && c < 18) ? 1 : 0);

  Image tiny = bgc;
  tiny.at(0, 0) += 1e-4;
  EXPECT_EQ(difference_mask(bgc, tiny, 0).count(), 1u);
  EXPECT_THROW(difference_mask(bgc, Image(30, 31, 1), 30), Error);
  EXPECT_THROW(difference_mask(bgc, bgc, 300), Error);
}

TEST(DifferenceMask, CountNonIncreasingInTau) {
  const Image a = testing::random_image(20, 20, 3, 2), b = testing::random_image(20, 20, 3, 3);
  size_t prev = difference_mask(a, b, 0).count();
  for (double tau = 5; tau <= 255; tau += 5) {
    const size_t n = difference_mask(a, b, tau).count();
    EXPECT_LE(n, prev);
    prev = n;
  }
}

TEST(OtsuThreshold, SeparatesBimodalHistogram) {
  std::vector<double> v(100, 10.0);
  v.insert(v.end(), 50, 200.0);
  const double t = otsu_threshold(v);
  EXPECT_GE(t, 10.0);
  EXPECT_LT(t, 200.0);
}

TEST(DetectForeground, MovingSquare) {
  const Image bg = testing::periodic_texture(80, 100, 7, 3, 6, 4, 0.15);
  ForegroundConfig cfg;
  for (int t = 0; t < 5; ++t) {
    Image frame = bg;
    const int r0 = 20 + 3 * t, c0 = 10 + 12 * t;
    for (int r = r0; r < r0 + 20; ++r)
      for (int c = c0; c < c0 + 20; ++c)
        for (int ch = 0; ch < 3; ++ch) frame.at(r, c, ch) = (ch == 2 ? 0.2 : 0.95);
    for (bool otsu : {false, true}) {
      cfg.otsu = otsu;
      const ForegroundMask m = detect_foreground(bg, frame, cfg);
      int inter = 0, uni = 0;
      for (int r = 0; r < 80; ++r)
        for (int c = 0; c < 100; ++c) {
          const bool truth = r >= r0 && r < r0 + 20 && c >= c0 && c < c0 + 20;
          EXPECT_LE(m.at(r, c), 1);
          inter += truth && m.at(r, c);
          uni += truth || m.at(r, c);
        }
      EXPECT_GT(static_cast<double>(inter) / uni, 0.8) << "t=" << t << " otsu=" << otsu;
    }
  }
  EXPECT_EQ(detect_foreground(bg, bg, ForegroundConfig{}).count(), 0u);
}

}  // namespace
}  // namespace dcp
