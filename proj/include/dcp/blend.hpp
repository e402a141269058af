#ifndef DCP_BLEND_HPP
#define DCP_BLEND_HPP

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <vector>

#include "dcp/error.hpp"
#include "dcp/image.hpp"

namespace dcp {

/// Guidance over a region: forward differences gx(r,c) = f(r,c+1) - f(r,c),
/// gy(r,c) = f(r+1,c) - f(r,c), and Dirichlet values taken from `boundary`
/// wherever a neighbor of the region lies outside it.
struct GuidanceField {
  RegionMask region;
  Image gx, gy;
  Image boundary;
};

/// Per-pixel blend weights in [0,1].
struct AlphaMask {
  int height = 0, width = 0;
  std::vector<double> values;

  double at(int r, int c) const { return values[static_cast<size_t>(r) * width + c]; }
};

inline void forward_differences(const Image& img, Image& gx, Image& gy) {
  gx = Image(img.height, img.width, img.channels, 0.0);
  gy = Image(img.height, img.width, img.channels, 0.0);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < img.channels; ++ch) {
        if (c + 1 < img.width) gx.at(r, c, ch) = img.at(r, c + 1, ch) - img.at(r, c, ch);
        if (r + 1 < img.height) gy.at(r, c, ch) = img.at(r + 1, c, ch) - img.at(r, c, ch);
      }
}

/// Guidance equal to the gradients of `img`.
inline GuidanceField gradient_guidance(const Image& img, const RegionMask& region, const Image& boundary) {
  GuidanceField g{region, {}, {}, boundary};
  forward_differences(img, g.gx, g.gy);
  return g;
}

/// Per pixel, the gradient pair of whichever image has the larger gradient magnitude.
inline GuidanceField mixed_guidance(const Image& a, const Image& b, const RegionMask& region, const Image& boundary) {
  require_same_shape(a, b, "mixed_guidance");
  Image ax, ay, bx, by;
  forward_differences(a, ax, ay);
  forward_differences(b, bx, by);
  for (int r = 0; r < a.height; ++r)
    for (int c = 0; c < a.width; ++c) {
      double ma = 0, mb = 0;
      for (int ch = 0; ch < a.channels; ++ch) {
        ma += ax.at(r, c, ch) * ax.at(r, c, ch) + ay.at(r, c, ch) * ay.at(r, c, ch);
        mb += bx.at(r, c, ch) * bx.at(r, c, ch) + by.at(r, c, ch) * by.at(r, c, ch);
      }
      if (mb > ma)
        for (int ch = 0; ch < a.channels; ++ch) {
          ax.at(r, c, ch) = bx.at(r, c, ch);
          ay.at(r, c, ch) = by.at(r, c, ch);
        }
    }
  return {region, std::move(ax), std::move(ay), boundary};
}

namespace blend_detail {

struct System {
  std::vector<int> index;                 // pixel -> unknown, -1 outside
  std::vector<std::pair<int, int>> cells;  // unknown -> (row, col)
  Eigen::SparseMatrix<double> A;
};

inline constexpr int kDr[4] = {0, 0, -1, 1};
inline constexpr int kDc[4] = {-1, 1, 0, 0};

inline System build_system(const RegionMask& region) {
  System s;
  s.index.assign(region.values.size(), -1);
  for (int r = 0; r < region.height; ++r)
    for (int c = 0; c < region.width; ++c)
      if (region.at(r, c)) {
        s.index[static_cast<size_t>(r) * region.width + c] = static_cast<int>(s.cells.size());
        s.cells.emplace_back(r, c);
      }
  std::vector<Eigen::Triplet<double>> trips;
  for (size_t k = 0; k < s.cells.size(); ++k) {
    const auto [r, c] = s.cells[k];
    int deg = 0;
    for (int n = 0; n < 4; ++n) {
      const int y = r + kDr[n], x = c + kDc[n];
      if (y < 0 || x < 0 || y >= region.height || x >= region.width) continue;  // Neumann at the image edge
      ++deg;
      const int j = s.index[static_cast<size_t>(y) * region.width + x];
      if (j >= 0) trips.emplace_back(static_cast<int>(k), j, -1.0);
    }
    trips.emplace_back(static_cast<int>(k), static_cast<int>(k), static_cast<double>(deg));
  }
  const auto n = static_cast<Eigen::Index>(s.cells.size());
  s.A.resize(n, n);
  s.A.setFromTriplets(trips.begin(), trips.end());
  return s;
}

/// Right-hand side for one channel: boundary values plus guidance divergence.
inline Eigen::VectorXd rhs(const System& s, const GuidanceField& g, int ch) {
  const RegionMask& m = g.region;
  Eigen::VectorXd b(static_cast<Eigen::Index>(s.cells.size()));
  for (size_t k = 0; k < s.cells.size(); ++k) {
    const auto [r, c] = s.cells[k];
    double v = 0;
    for (int n = 0; n < 4; ++n) {
      const int y = r + kDr[n], x = c + kDc[n];
      if (y < 0 || x < 0 || y >= m.height || x >= m.width) continue;
      // desired f(q) - f(p) along the edge p -> q
      double gpq = 0;
      if (n == 0) gpq = -g.gx.at(r, x, ch);
      if (n == 1) gpq = g.gx.at(r, c, ch);
      if (n == 2) gpq = -g.gy.at(y, c, ch);
      if (n == 3) gpq = g.gy.at(r, c, ch);
      v -= gpq;
      if (s.index[static_cast<size_t>(y) * m.width + x] < 0) v += g.boundary.at(y, x, ch);
    }
    b[static_cast<Eigen::Index>(k)] = v;
  }
  return b;
}

}  // namespace blend_detail

/// Minimizes sum over edges touching the region of (f(q) - f(p) - g_pq)^2 with
/// Dirichlet values outside the region; returns `boundary` with the region replaced.
inline Image solve_poisson(const GuidanceField& g) {
  const Image& bd = g.boundary;
  require(g.region.height == bd.height && g.region.width == bd.width && g.gx.same_shape(bd) && g.gy.same_shape(bd),
          ErrorCode::DimensionMismatch, "guidance field components differ in shape");
  Image out = bd;
  const blend_detail::System s = blend_detail::build_system(g.region);
  if (s.cells.empty()) return out;

  // every region component needs a Dirichlet neighbor, otherwise the system is singular
  std::vector<char> seen(s.cells.size(), 0);
  for (size_t start = 0; start < s.cells.size(); ++start) {
    if (seen[start]) continue;
    bool anchored = false;
    std::vector<size_t> stack{start};
    seen[start] = 1;
    while (!stack.empty()) {
      const auto [r, c] = s.cells[stack.back()];
      stack.pop_back();
      for (int n = 0; n < 4; ++n) {
        const int y = r + blend_detail::kDr[n], x = c + blend_detail::kDc[n];
        if (y < 0 || x < 0 || y >= bd.height || x >= bd.width) continue;
        const int j = s.index[static_cast<size_t>(y) * bd.width + x];
        if (j < 0) {
          anchored = true;
        } else if (!seen[static_cast<size_t>(j)]) {
          seen[static_cast<size_t>(j)] = 1;
          stack.push_back(static_cast<size_t>(j));
        }
      }
    }
    require(anchored, ErrorCode::InvalidArgument, "poisson region component has no boundary");
  }

  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  cg.setMaxIterations(static_cast<Eigen::Index>(10 * s.cells.size()));
  cg.setTolerance(1e-12);
  cg.compute(s.A);
  for (int ch = 0; ch < bd.channels; ++ch) {
    const Eigen::VectorXd b = blend_detail::rhs(s, g, ch);
    Eigen::VectorXd x = b / 4.0;
    if (b.norm() > 0) x = cg.solveWithGuess(b, x);
    else x.setZero();
    const double res = (s.A * x - b).lpNorm<Eigen::Infinity>();
    require(std::isfinite(res) && res < 1e-7, ErrorCode::SolverFailure,
            "poisson solve did not converge (residual " + std::to_string(res) + ")");
    for (size_t k = 0; k < s.cells.size(); ++k) {
      const auto [r, c] = s.cells[k];
      out.at(r, c, ch) = x[static_cast<Eigen::Index>(k)];
    }
  }
  return out;
}

inline RegionMask dilate_disk(const RegionMask& m, int radius) {
  RegionMask out = m;
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c) {
      if (!m.at(r, c)) continue;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
          if (dy * dy + dx * dx <= radius * radius && m.inside(r + dy, c + dx)) out.at(r + dy, c + dx) = 1;
    }
  return out;
}

/// alpha = min(1, d / radius), d the Euclidean distance to the nearest
/// in-image pixel outside `support`.
inline AlphaMask distance_alpha(const RegionMask& support, int radius) {
  require(radius >= 1, ErrorCode::InvalidArgument, "alpha radius must be positive");
  AlphaMask a{support.height, support.width, std::vector<double>(support.values.size(), 0.0)};
  for (int r = 0; r < support.height; ++r)
    for (int c = 0; c < support.width; ++c) {
      if (!support.at(r, c)) continue;
      double best = radius;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          const int y = r + dy, x = c + dx;
          if (!support.inside(y, x) || support.at(y, x)) continue;
          best = std::min(best, std::sqrt(static_cast<double>(dy * dy + dx * dx)));
        }
      a.values[static_cast<size_t>(r) * a.width + c] = std::min(1.0, best / radius);
    }
  return a;
}

struct BlendParams {
  int ring = 5;          // width of the transition band around the mask
  int alpha_radius = 5;  // distance over which alpha ramps from 0 to 1
  bool mixed_gradients = true;
};

struct BlendResult {
  Image image;
  Image source_composite;  // step 1
  Image target_composite;  // step 2
  AlphaMask alpha;
  RegionMask support;      // mask plus ring
};

/// Three-step blend of `source` into `target` over `mask`:
/// (1) Poisson over the mask guided by source (optionally mixed with target)
///     gradients, target on the boundary;
/// (2) source on the mask, Poisson over the surrounding ring guided by target
///     gradients, with the mask as inner and the target as outer boundary;
/// (3) alpha * step2 + (1 - alpha) * step1 on the support, target elsewhere.
inline BlendResult mpb_blend_detailed(const Image& source, const Image& target, const RegionMask& mask,
                                      const BlendParams& p = {}) {
  require_same_shape(source, target, "mpb_blend");
  require(mask.height == target.height && mask.width == target.width, ErrorCode::DimensionMismatch,
          "blend mask differs in size from the images");
  require(p.ring >= 1 && p.alpha_radius >= 1, ErrorCode::InvalidArgument, "ring and alpha radius must be positive");
  require(mask.count() > 0, ErrorCode::InvalidArgument, "blend mask is empty");
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c)
      if (mask.at(r, c) && (r == 0 || c == 0 || r == mask.height - 1 || c == mask.width - 1))
        fail(ErrorCode::MaskTouchesBorder, "blend mask touches the image border");

  BlendResult res;
  res.source_composite = solve_poisson(p.mixed_gradients ? mixed_guidance(source, target, mask, target)
                                                         : gradient_guidance(source, mask, target));

  res.support = dilate_disk(mask, p.ring);
  RegionMask ring = res.support;
  for (size_t k = 0; k < ring.values.size(); ++k)
    if (mask.values[k]) ring.values[k] = 0;
  Image inner = target;
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c)
      if (mask.at(r, c))
        for (int ch = 0; ch < target.channels; ++ch) inner.at(r, c, ch) = source.at(r, c, ch);
  res.target_composite = solve_poisson(gradient_guidance(target, ring, inner));

  res.alpha = distance_alpha(res.support, p.alpha_radius);
  res.image = target;
  for (int r = 0; r < target.height; ++r)
    for (int c = 0; c < target.width; ++c) {
      if (!res.support.at(r, c)) continue;
      const double a = res.alpha.at(r, c);
      for (int ch = 0; ch < target.channels; ++ch)
        res.image.at(r, c, ch) =
            std::clamp(a * res.target_composite.at(r, c, ch) + (1 - a) * res.source_composite.at(r, c, ch), 0.0, 1.0);
    }
  return res;
}

inline Image mpb_blend(const Image& source, const Image& target, const RegionMask& mask, const BlendParams& p = {}) {
  return mpb_blend_detailed(source, target, mask, p).image;
}

}  // namespace dcp

#endif  // DCP_BLEND_HPP
