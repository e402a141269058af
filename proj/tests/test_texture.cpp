#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "dcp/texture.hpp"
#include "test_support.hpp"

namespace dcp {
namespace {

FeatureMap random_map(int channels, int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FeatureMap fm{nn::Tensor(channels, rows, cols), 1};
  for (double& v : fm.data.v) v = u(rng);
  return fm;
}

// Brute force over every cell of the grid, spelled out per patch cell.
Location oracle_nearest(const FeatureMap& fm, const Region& hole, Location i, int w, int window, bool& found) {
  const int half = w / 2;
  double best = std::numeric_limits<double>::infinity();
  Location arg{-1, -1};
  for (int r = 0; r < fm.rows(); ++r)
    for (int c = 0; c < fm.cols(); ++c) {
      if (std::abs(r - i.row) > window || std::abs(c - i.col) > window) continue;
      bool ok = true;
      double d = 0;
      for (int dy = -half; dy <= half && ok; ++dy)
        for (int dx = -half; dx <= half && ok; ++dx) {
          const int y = r + dy, x = c + dx;
          if (y < 0 || x < 0 || y >= fm.rows() || x >= fm.cols() || hole.contains(y, x)) {
            ok = false;
            break;
          }
          for (int ch = 0; ch < fm.data.c; ++ch) {
            const double e = fm.data.at(ch, i.row + dy, i.col + dx) - fm.data.at(ch, y, x);
            d += e * e;
          }
        }
      if (ok && d < best) {
        best = d;
        arg = {r, c};
      }
    }
  found = arg.row >= 0;
  return arg;
}

double hole_age(const Image& a, const Image& b, const Region& hole) {
  const Image la = to_luma(a), lb = to_luma(b);
  double s = 0;
  for (int r = hole.row; r < hole.bottom(); ++r)
    for (int c = hole.col; c < hole.right(); ++c) s += std::abs(la.at(r, c) - lb.at(r, c));
  return 255.0 * s / static_cast<double>(hole.area());
}

Image box_blur(const Image& img, int radius) {
  Image out(img.height, img.width, img.channels);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < img.channels; ++ch) {
        double s = 0;
        int n = 0;
        for (int dy = -radius; dy <= radius; ++dy)
          for (int dx = -radius; dx <= radius; ++dx)
            if (r + dy >= 0 && c + dx >= 0 && r + dy < img.height && c + dx < img.width) {
              s += img.at(r + dy, c + dx, ch);
              ++n;
            }
        out.at(r, c, ch) = s / n;
      }
  return out;
}

TEST(BuildPyramid, HalvesPatchAndHole) {
  const Image patch = testing::random_image(64, 64, 3, 1);
  const PatchPyramid pyr = build_pyramid(patch, centered_hole(64), 3);
  ASSERT_EQ(pyr.levels.size(), 3u);
  EXPECT_EQ(pyr.levels[0].patch.height, 16);
  EXPECT_EQ(pyr.levels[1].patch.height, 32);
  EXPECT_EQ(pyr.levels[2].patch, patch);
  EXPECT_EQ(pyr.levels[0].hole, (Region{4, 4, 8, 8}));
  EXPECT_EQ(pyr.levels[1].hole, (Region{8, 8, 16, 16}));
  EXPECT_NEAR(pyr.levels[0].patch.at(0, 0, 0),
              (pyr.levels[1].patch.at(0, 0, 0) + pyr.levels[1].patch.at(0, 1, 0) + pyr.levels[1].patch.at(1, 0, 0) +
               pyr.levels[1].patch.at(1, 1, 0)) / 4,
              1e-12);
}

TEST(BuildPyramid, RejectsIndivisibleSide) {
  const Image patch(40, 40, 1, 0.5);
  try {
    build_pyramid(patch, centered_hole(40), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IndivisibleSize);
  }
  EXPECT_NO_THROW(build_pyramid(patch, centered_hole(40), 2));
}

TEST(ExtractFeatures, StrideAndShape) {
  FeatureStack stack = FeatureStack::seeded(1, 8);
  const Image img = testing::random_image(32, 32, 1, 2);
  EXPECT_EQ(extract_features(stack, img, 2).stride, 1);
  EXPECT_EQ(extract_features(stack, img, 2).rows(), 32);
  const FeatureMap f4 = extract_features(stack, img, 4);
  EXPECT_EQ(f4.stride, 2);
  EXPECT_EQ(f4.rows(), 16);
  EXPECT_EQ(f4.data.c, 8);
  const FeatureMap f5 = extract_features(stack, img, 5);
  EXPECT_EQ(f5.stride, 4);
  EXPECT_EQ(f5.cols(), 8);
}

TEST(ExtractFeatures, TooSmallForDepth) {
  FeatureStack stack = FeatureStack::seeded(1, 4);
  try {
    extract_features(stack, Image(8, 8, 1, 0.5), 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooSmall);
  }
  EXPECT_NO_THROW(extract_features(stack, Image(12, 12, 1, 0.5), 5));
}

TEST(ExtractFeatures, DeterministicAndFrozen) {
  FeatureStack a = FeatureStack::seeded(3, 8, 7), b = FeatureStack::seeded(3, 8, 7);
  const Image img = testing::random_image(16, 16, 3, 3);
  EXPECT_EQ(extract_features(a, img, 4).data.v, extract_features(b, img, 4).data.v);
  EXPECT_EQ(extract_features(a, img, 4).data.v, extract_features(a, img, 4).data.v);
  EXPECT_NE(FeatureStack::seeded(3, 8, 8).conv1.weight.value, a.conv1.weight.value);
}

TEST(ExtractFeatures, TranslationByStrideShiftsInteriorCells) {
  FeatureStack stack = FeatureStack::seeded(1, 6);
  const Image img = testing::random_image(48, 48, 1, 4);
  const Image moved = testing::cyclic_shift(img, 2, 2);
  const FeatureMap fa = extract_features(stack, img, 4), fb = extract_features(stack, moved, 4);
  for (int ch = 0; ch < fa.data.c; ++ch)
    for (int r = 4; r < 18; ++r)
      for (int c = 4; c < 18; ++c) EXPECT_NEAR(fb.data.at(ch, r + 1, c + 1), fa.data.at(ch, r, c), 1e-12);
}

TEST(FeatureHole, CellsInsideImageHole) {
  EXPECT_EQ(feature_hole({8, 8, 16, 16}, 2), (Region{4, 4, 8, 8}));
  EXPECT_EQ(feature_hole({3, 5, 6, 6}, 2), (Region{2, 3, 2, 2}));
}

TEST(NearestPatch, MatchesBruteForce) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const int rows = 10 + static_cast<int>(rng() % 6), cols = 10 + static_cast<int>(rng() % 6);
    const FeatureMap fm = random_map(3, rows, cols, rng());
    const int w = trial % 2 ? 3 : 1;
    const Region hole{3 + static_cast<int>(rng() % 2), 3 + static_cast<int>(rng() % 2), 3, 4};
    const int window = 2 + static_cast<int>(rng() % 6);
    for (const Location& q : hole_queries(fm, hole, w)) {
      bool found = false;
      const Location expect = oracle_nearest(fm, hole, q, w, window, found);
      if (!found) {
        EXPECT_THROW(nearest_patch(fm, hole, q, w, window), Error);
        continue;
      }
      const PatchMatch got = nearest_patch(fm, hole, q, w, window);
      EXPECT_EQ(got.location, expect);
      EXPECT_NEAR(got.distance, patch_distance(fm, q, expect, w), 1e-12);
    }
  }
}

TEST(NearestPatch, TiesGoToLowestRowMajorIndex) {
  FeatureMap fm{nn::Tensor(1, 9, 9), 1};
  const Region hole{3, 3, 3, 3};
  // every candidate patch is all zeros: all distances equal
  const PatchMatch m = nearest_patch(fm, hole, {4, 4}, 3, 8);
  EXPECT_EQ(m.location, (Location{1, 1}));
  const PatchMatch m1 = nearest_patch(fm, hole, {4, 4}, 1, 8);
  EXPECT_EQ(m1.location, (Location{0, 0}));
}

TEST(NearestPatch, NoCandidateInWindow) {
  const FeatureMap fm = random_map(2, 12, 12, 5);
  const Region hole{3, 3, 6, 6};
  try {
    nearest_patch(fm, hole, {6, 6}, 3, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoValidCandidate);
  }
  int window = 2;
  const auto assign = assign_nearest(fm, hole, 3, window);
  EXPECT_EQ(window, 4);
  EXPECT_EQ(assign.size(), 36u);
}

TEST(Energies, WorkedExamples) {
  Image a(2, 2, 1);
  a.values = {0, 1, 0, 1};
  EXPECT_DOUBLE_EQ(gradient_energy(a), 2.0);
  Image ramp(1, 3, 1);
  ramp.values = {0, 1, 2};
  EXPECT_DOUBLE_EQ(gradient_energy(ramp), 2.0);
  EXPECT_DOUBLE_EQ(gradient_energy(Image(5, 5, 3, 0.3)), 0.0);

  Image cur(4, 4, 1, 0.5), ref(4, 4, 1, 0.5);
  cur.at(1, 1) = 1.0;  // inside hole
  cur.at(0, 0) = 0.0;  // outside hole: ignored
  EXPECT_DOUBLE_EQ(context_energy(cur, ref, {1, 1, 2, 2}), 0.25 / 4);

  FeatureMap fm{nn::Tensor(1, 1, 4), 1};
  fm.data.v = {0, 1, 3, 0};
  const std::vector<Assignment> as = {{{0, 1}, {0, 0}}, {{0, 2}, {0, 3}}};
  EXPECT_DOUBLE_EQ(texture_energy(fm, 1, as), (1.0 + 9.0) / 2);
  EXPECT_DOUBLE_EQ(texture_energy(fm, 1, {}), 0.0);
}

TEST(TextureObjective, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    FeatureStack stack = FeatureStack::seeded(1, 6, seed);
    const Image x = testing::random_image(8, 8, 1, seed * 3);
    const Image ref = testing::random_image(8, 8, 1, seed * 3 + 1);
    const Region hole = centered_hole(8);
    TextureWeights w;
    w.gamma = 0.3;
    w.delta = 0.05;
    w.patch = 1;
    w.depth = 2;
    int window = 8;
    const auto assign = assign_nearest(extract_features(stack, x, w.depth), feature_hole(hole, 1), 1, window);
    Image g;
    texture_objective(x, hole, ref, w, stack, assign, &g);
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) {
        if (!hole.contains(r, c)) {
          EXPECT_EQ(g.at(r, c), 0.0);
          continue;
        }
        const double h = 1e-6;
        Image xp = x, xm = x;
        xp.at(r, c) += h;
        xm.at(r, c) -= h;
        const double fd = (texture_objective(xp, hole, ref, w, stack, assign) -
                           texture_objective(xm, hole, ref, w, stack, assign)) / (2 * h);
        EXPECT_LE(std::abs(fd - g.at(r, c)) / std::max({std::abs(fd), std::abs(g.at(r, c)), 1e-6}), 1e-4)
            << "seed " << seed << " at " << r << "," << c;
      }
  }
}

TEST(OptimizeScale, ContextOnlyReturnsReference) {
  FeatureStack stack = FeatureStack::seeded(3, 4);
  const Image init = testing::random_image(16, 16, 3, 8);
  const Image ref = testing::random_image(16, 16, 3, 9);
  TextureWeights w;
  w.gamma = 0;
  w.delta = 0;
  const Region hole = centered_hole(16);
  const ScaleResult res = optimize_scale(init, hole, ref, w, stack);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c)
      for (int ch = 0; ch < 3; ++ch)
        EXPECT_NEAR(res.image.at(r, c, ch), hole.contains(r, c) ? ref.at(r, c, ch) : init.at(r, c, ch), 1e-12);
}

TEST(OptimizeScale, ObjectiveNonIncreasingAcrossEpochs) {
  FeatureStack stack = FeatureStack::seeded(1, 16);
  const Image truth = testing::periodic_texture(32, 32, 21);
  const Region hole = centered_hole(32);
  Image init = truth;
  paste(init, crop(box_blur(truth, 3), hole), hole.row, hole.col);
  TextureWeights w;
  w.gamma = 0.05;
  w.iterations = 60;
  w.reassign_every = 10;
  const ScaleResult res = optimize_scale(init, hole, init, w, stack);
  ASSERT_GE(res.epoch_objective.size(), 2u);
  for (size_t k = 1; k < res.epoch_objective.size(); ++k)
    EXPECT_LE(res.epoch_objective[k], res.epoch_objective[k - 1] + 1e-12) << "epoch " << k;
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c)
      if (!hole.contains(r, c)) {
        EXPECT_EQ(res.image.at(r, c), init.at(r, c));
      }
}

TEST(Refine, ZeroWeightsKeepInitialization) {
  FeatureStack stack = FeatureStack::seeded(1, 4);
  const Image patch = testing::periodic_texture(32, 32, 3);
  TextureWeights w;
  w.gamma = 0;
  w.delta = 0;
  const RefineResult res = refine(patch, centered_hole(32), 2, w, stack);
  EXPECT_EQ(res.scales.size(), 2u);
  for (size_t k = 0; k < patch.values.size(); ++k) EXPECT_NEAR(res.image.values[k], patch.values[k], 1e-12);
}

TEST(Refine, ReducesHoleErrorOfBlurredFill) {
  FeatureStack stack = FeatureStack::seeded(1, 16);
  const Image truth = testing::periodic_texture(64, 64, 5, 1, 4, 10, 0.45);
  const Region hole = centered_hole(64);
  Image init = truth;
  paste(init, crop(box_blur(truth, 2), hole), hole.row, hole.col);
  TextureWeights w;
  w.gamma = 0.1;
  w.iterations = 60;
  w.reassign_every = 20;
  const RefineResult res = refine(init, hole, 2, w, stack);
  EXPECT_LT(hole_age(res.image, truth, hole), hole_age(init, truth, hole));
  for (const ScaleResult& s : res.scales)
    for (size_t k = 1; k < s.epoch_objective.size(); ++k) EXPECT_LE(s.epoch_objective[k], s.epoch_objective[k - 1]);
}

TEST(Refine, CoarseScaleWithoutCandidatesStillRuns) {
  FeatureStack stack = FeatureStack::seeded(1, 4);
  const Image patch = testing::periodic_texture(16, 16, 2);
  TextureWeights w;
  w.iterations = 5;
  const ScaleResult res = optimize_scale(patch, centered_hole(16), patch, w, stack);
  EXPECT_EQ(res.image.height, 16);
}

}  // namespace
}  // namespace dcp
