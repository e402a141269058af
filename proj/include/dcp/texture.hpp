#ifndef DCP_TEXTURE_HPP
#define DCP_TEXTURE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "dcp/error.hpp"
#include "dcp/image.hpp"
#include "dcp/nn.hpp"

namespace dcp {

// ---------------------------------------------------------------------------
// Pyramid

struct PatchPyramid {
  struct Level {
    Image patch;
    Region hole;
  };
  std::vector<Level> levels;  // coarse -> fine
};

inline bool is_centered_half_hole(int side, const Region& hole) {
  return hole.height == side / 2 && hole.width == side / 2 && hole.row == side / 4 && hole.col == side / 4;
}

/// Area-averaged pyramid with a factor-2 step; the hole halves with the patch.
inline PatchPyramid build_pyramid(const Image& patch, const Region& hole, int levels) {
  require(levels >= 1, ErrorCode::InvalidArgument, "levels must be >= 1");
  require(patch.height == patch.width, ErrorCode::InvalidArgument, "pyramid needs a square patch");
  const int factor = 1 << (levels - 1);
  require(patch.height % (4 * factor) == 0, ErrorCode::IndivisibleSize,
          "patch side " + std::to_string(patch.height) + " not divisible by " + std::to_string(4 * factor) +
              " for " + std::to_string(levels) + " levels");
  require(is_centered_half_hole(patch.height, hole), ErrorCode::InvalidArgument,
          "hole must be centered with half the patch side");
  PatchPyramid pyr;
  pyr.levels.resize(static_cast<size_t>(levels));
  Image cur = patch;
  for (int l = levels - 1; l >= 0; --l) {
    pyr.levels[static_cast<size_t>(l)] = {cur, {cur.height / 4, cur.width / 4, cur.height / 2, cur.width / 2}};
    if (l > 0) cur = downsample2(cur);
  }
  return pyr;
}

// ---------------------------------------------------------------------------
// Frozen feature stack: conv-relu, conv-relu, pool, conv-relu, pool. Depth
// counts how many of those five stages are applied.

struct FeatureStack {
  nn::Conv2d conv1, conv2, conv3;
  int channels = 64;

  static constexpr int kMaxDepth = 5;

  static FeatureStack seeded(int in_channels, int channels = 64, std::uint64_t seed = 0x5eed) {
    FeatureStack s;
    s.channels = channels;
    std::mt19937_64 rng(seed);
    s.conv1 = nn::Conv2d(in_channels, channels, 3, 1, 1);
    s.conv2 = nn::Conv2d(channels, channels, 3, 1, 1);
    s.conv3 = nn::Conv2d(channels, channels, 3, 1, 1);
    for (auto* c : {&s.conv1, &s.conv2, &s.conv3}) {
      c->init(rng);
      std::fill(c->bias.value.begin(), c->bias.value.end(), 0.01);
    }
    return s;
  }

  int in_channels() const { return conv1.in_c; }
};

inline int feature_stride(int depth) { return depth >= 5 ? 4 : depth >= 3 ? 2 : 1; }

inline int receptive_field(int depth) {
  static constexpr int rf[] = {1, 3, 5, 6, 10, 12};
  return rf[std::clamp(depth, 0, 5)];
}

/// c x h x w feature grid and its spatial stride relative to the image.
struct FeatureMap {
  nn::Tensor data;
  int stride = 1;

  int rows() const { return data.h; }
  int cols() const { return data.w; }
};

struct FeatureTrace {
  std::vector<nn::Tensor> inputs;  // per stage input
  std::vector<nn::Tensor> pre;     // conv pre-activations (empty for pools)
  FeatureMap map;
};

inline FeatureTrace feature_trace(FeatureStack& stack, const Image& image, int depth) {
  require(depth >= 1 && depth <= FeatureStack::kMaxDepth, ErrorCode::InvalidArgument, "feature depth must be 1..5");
  require(image.channels == stack.in_channels(), ErrorCode::DimensionMismatch, "feature stack channel mismatch");
  require(std::min(image.height, image.width) >= receptive_field(depth), ErrorCode::TooSmall,
          "image smaller than the receptive field of depth " + std::to_string(depth));
  require(image.height % feature_stride(depth) == 0 && image.width % feature_stride(depth) == 0,
          ErrorCode::IndivisibleSize, "image dims not divisible by the feature stride");
  FeatureTrace t;
  nn::Tensor a = nn::from_image(image);
  nn::Conv2d* convs[] = {&stack.conv1, &stack.conv2, nullptr, &stack.conv3, nullptr};
  for (int s = 0; s < depth; ++s) {
    t.inputs.push_back(a);
    if (convs[s]) {
      t.pre.push_back(convs[s]->forward(a));
      a = nn::relu(t.pre.back());
    } else {
      t.pre.emplace_back();
      a = nn::avg_pool2(a);
    }
  }
  t.map = {std::move(a), feature_stride(depth)};
  return t;
}

/// Gradient w.r.t. the image given dL/d(features); stack weights stay frozen.
inline Image feature_backward(FeatureStack& stack, const FeatureTrace& t, nn::Tensor grad) {
  nn::Conv2d* convs[] = {&stack.conv1, &stack.conv2, nullptr, &stack.conv3, nullptr};
  for (size_t s = t.inputs.size(); s-- > 0;) {
    if (convs[s]) {
      grad = nn::relu_backward(t.pre[s], std::move(grad));
      grad = convs[s]->backward(t.inputs[s], grad, false);
    } else {
      grad = nn::avg_pool2_backward(t.inputs[s], grad);
    }
  }
  return nn::to_image(grad);
}

inline FeatureMap extract_features(FeatureStack& stack, const Image& image, int depth) {
  return feature_trace(stack, image, depth).map;
}

// ---------------------------------------------------------------------------
// Neural patches

struct Location {
  int row = 0;
  int col = 0;
  friend bool operator==(const Location&, const Location&) = default;
};

/// Feature cells whose pixel blocks lie inside the image hole.
inline Region feature_hole(const Region& hole, int stride) {
  const int r0 = (hole.row + stride - 1) / stride, c0 = (hole.col + stride - 1) / stride;
  const int r1 = hole.bottom() / stride, c1 = hole.right() / stride;
  return {r0, c0, std::max(0, r1 - r0), std::max(0, c1 - c0)};
}

/// Squared distance between the w x w patches centered at a and b.
inline double patch_distance(const FeatureMap& fm, Location a, Location b, int w) {
  const int half = w / 2;
  const nn::Tensor& t = fm.data;
  double s = 0;
  for (int ch = 0; ch < t.c; ++ch)
    for (int dy = -half; dy <= half; ++dy) {
      const double* pa = &t.v[(static_cast<size_t>(ch) * t.h + (a.row + dy)) * t.w + a.col - half];
      const double* pb = &t.v[(static_cast<size_t>(ch) * t.h + (b.row + dy)) * t.w + b.col - half];
      for (int dx = 0; dx < w; ++dx) {
        const double d = pa[dx] - pb[dx];
        s += d * d;
      }
    }
  return s;
}

inline bool patch_inside(const FeatureMap& fm, Location c, int w) {
  const int half = w / 2;
  return c.row - half >= 0 && c.col - half >= 0 && c.row + half < fm.rows() && c.col + half < fm.cols();
}

inline bool patch_overlaps(Location c, int w, const Region& hole) {
  const int half = w / 2;
  return c.row + half >= hole.row && c.row - half < hole.bottom() && c.col + half >= hole.col &&
         c.col - half < hole.right();
}

/// Query locations i in psi(H) whose patch lies fully inside the grid.
inline std::vector<Location> hole_queries(const FeatureMap& fm, const Region& hole_f, int w) {
  std::vector<Location> out;
  for (int r = hole_f.row; r < hole_f.bottom(); ++r)
    for (int c = hole_f.col; c < hole_f.right(); ++c)
      if (patch_inside(fm, {r, c}, w)) out.push_back({r, c});
  return out;
}

struct PatchMatch {
  Location location;
  double distance = 0;
};

/// Nearest patch to P_i among patches within `window` cells of i that lie in
/// the grid and do not touch psi(H); ties go to the lowest row-major index.
inline PatchMatch nearest_patch(const FeatureMap& fm, const Region& hole_f, Location i, int w, int window) {
  require(w >= 1 && w % 2 == 1, ErrorCode::InvalidArgument, "patch side must be odd");
  require(hole_f.contains(i.row, i.col) && patch_inside(fm, i, w), ErrorCode::InvalidArgument,
          "query must lie inside the hole with its patch in the grid");
  PatchMatch best{{-1, -1}, std::numeric_limits<double>::infinity()};
  const int r0 = std::max(0, i.row - window), r1 = std::min(fm.rows() - 1, i.row + window);
  const int c0 = std::max(0, i.col - window), c1 = std::min(fm.cols() - 1, i.col + window);
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) {
      const Location j{r, c};
      if (!patch_inside(fm, j, w) || patch_overlaps(j, w, hole_f)) continue;
      const double d = patch_distance(fm, i, j, w);
      if (d < best.distance) best = {j, d};
    }
  require(best.location.row >= 0, ErrorCode::NoValidCandidate,
          "no candidate patch within window " + std::to_string(window));
  return best;
}

struct Assignment {
  Location query;
  Location match;
};

/// nearest_patch for every query, widening the window (doubling) when exhausted.
inline std::vector<Assignment> assign_nearest(const FeatureMap& fm, const Region& hole_f, int w, int& window) {
  std::vector<Assignment> out;
  for (const Location& q : hole_queries(fm, hole_f, w)) {
    for (;;) {
      try {
        out.push_back({q, nearest_patch(fm, hole_f, q, w, window).location});
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoValidCandidate || window > fm.rows() + fm.cols()) throw;
        window *= 2;
      }
    }
  }
  return out;
}

/// (1/|psi(H)|) * sum_i ||P_i - P_np(i)||^2
inline double texture_energy(const FeatureMap& fm, int w, const std::vector<Assignment>& assignments) {
  if (assignments.empty()) return 0.0;
  double s = 0;
  for (const auto& a : assignments) s += patch_distance(fm, a.query, a.match, w);
  return s / static_cast<double>(assignments.size());
}

/// Mean squared difference over the hole (all channels).
inline double context_energy(const Image& current, const Image& reference, const Region& hole) {
  require_same_shape(current, reference, "context_energy");
  double s = 0;
  for (int r = hole.row; r < hole.bottom(); ++r)
    for (int c = hole.col; c < hole.right(); ++c)
      for (int ch = 0; ch < current.channels; ++ch) {
        const double d = current.at(r, c, ch) - reference.at(r, c, ch);
        s += d * d;
      }
  return s / static_cast<double>(hole.area() * current.channels);
}

/// Sum of squared forward differences in both directions.
inline double gradient_energy(const Image& img) {
  double s = 0;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < img.channels; ++ch) {
        if (c + 1 < img.width) {
          const double d = img.at(r, c + 1, ch) - img.at(r, c, ch);
          s += d * d;
        }
        if (r + 1 < img.height) {
          const double d = img.at(r + 1, c, ch) - img.at(r, c, ch);
          s += d * d;
        }
      }
  return s;
}

struct TextureWeights {
  double gamma = 1e-2;    // texture energy
  double delta = 1e-4;    // gradient energy
  int patch = 3;          // neural patch side w
  int iterations = 200;   // descent iterations per scale
  int reassign_every = 50;
  int window = 16;        // search radius in feature cells
  int depth = 4;          // feature stack depth
};

/// E_CE + gamma * E_T + delta * Pi for fixed assignments; when `grad` is given
/// it receives dE/dx restricted to the hole.
inline double texture_objective(const Image& x, const Region& hole, const Image& reference,
                                const TextureWeights& wts, FeatureStack& stack,
                                const std::vector<Assignment>& assignments, Image* grad = nullptr) {
  double e = context_energy(x, reference, hole);
  if (wts.delta != 0) e += wts.delta * gradient_energy(x);
  FeatureTrace trace;
  if (wts.gamma != 0) {
    trace = feature_trace(stack, x, wts.depth);
    e += wts.gamma * texture_energy(trace.map, wts.patch, assignments);
  }
  if (!grad) return e;

  Image g(x.height, x.width, x.channels, 0.0);
  const double n = static_cast<double>(hole.area() * x.channels);
  for (int r = hole.row; r < hole.bottom(); ++r)
    for (int c = hole.col; c < hole.right(); ++c)
      for (int ch = 0; ch < x.channels; ++ch) g.at(r, c, ch) = 2.0 * (x.at(r, c, ch) - reference.at(r, c, ch)) / n;
  if (wts.delta != 0) {
    for (int r = 0; r < x.height; ++r)
      for (int c = 0; c < x.width; ++c)
        for (int ch = 0; ch < x.channels; ++ch) {
          if (c + 1 < x.width) {
            const double d = 2.0 * wts.delta * (x.at(r, c + 1, ch) - x.at(r, c, ch));
            g.at(r, c + 1, ch) += d;
            g.at(r, c, ch) -= d;
          }
          if (r + 1 < x.height) {
            const double d = 2.0 * wts.delta * (x.at(r + 1, c, ch) - x.at(r, c, ch));
            g.at(r + 1, c, ch) += d;
            g.at(r, c, ch) -= d;
          }
        }
  }
  if (wts.gamma != 0 && !assignments.empty()) {
    const nn::Tensor& f = trace.map.data;
    nn::Tensor df(f.c, f.h, f.w);
    const double scale = 2.0 * wts.gamma / static_cast<double>(assignments.size());
    const int half = wts.patch / 2;
    for (const auto& a : assignments)
      for (int ch = 0; ch < f.c; ++ch)
        for (int dy = -half; dy <= half; ++dy)
          for (int dx = -half; dx <= half; ++dx) {
            const double d = scale * (f.at(ch, a.query.row + dy, a.query.col + dx) -
                                      f.at(ch, a.match.row + dy, a.match.col + dx));
            df.at(ch, a.query.row + dy, a.query.col + dx) += d;
            df.at(ch, a.match.row + dy, a.match.col + dx) -= d;
          }
    const Image gi = feature_backward(stack, trace, std::move(df));
    for (size_t k = 0; k < g.values.size(); ++k) g.values[k] += gi.values[k];
  }
  for (int r = 0; r < x.height; ++r)
    for (int c = 0; c < x.width; ++c)
      if (!hole.contains(r, c))
        for (int ch = 0; ch < x.channels; ++ch) g.at(r, c, ch) = 0.0;
  *grad = std::move(g);
  return e;
}

struct ScaleResult {
  Image image;
  std::vector<double> epoch_objective;  // objective after each reassignment, starting with the initial one
};

/// Projected gradient descent on the hole with backtracking; nearest patches
/// are reassigned every `reassign_every` iterations.
inline ScaleResult optimize_scale(const Image& init, const Region& hole, const Image& reference,
                                  const TextureWeights& wts, FeatureStack& stack) {
  require_same_shape(init, reference, "optimize_scale");
  require(wts.gamma >= 0 && wts.delta >= 0 && wts.patch >= 1 && wts.patch % 2 == 1 && wts.iterations >= 0 &&
              wts.reassign_every >= 1 && wts.window >= 1,
          ErrorCode::InvalidArgument, "invalid texture weights");
  ScaleResult res;
  Image x = init;
  int window = wts.window;
  std::vector<Assignment> assign;
  Region hole_f;
  bool textured = wts.gamma != 0;
  auto reassign = [&] {
    if (!textured) return;
    const FeatureMap fm = extract_features(stack, x, wts.depth);
    hole_f = feature_hole(hole, fm.stride);
    try {
      assign = assign_nearest(fm, hole_f, wts.patch, window);
    } catch (const Error& e) {
      // no patch of the grid avoids the hole: this scale gets no texture term
      if (e.code() != ErrorCode::NoValidCandidate) throw;
      textured = false;
      assign.clear();
    }
  };
  reassign();
  double e = texture_objective(x, hole, reference, wts, stack, assign);
  require(std::isfinite(e), ErrorCode::DivergedObjective, "non-finite initial objective");
  res.epoch_objective.push_back(e);

  double step = 0.5 * static_cast<double>(hole.area() * x.channels);  // exact minimizer of E_CE alone
  const double min_step = step * 1e-12;
  bool converged = false;
  int done = 0;
  while (done < wts.iterations && !converged) {
    const int epoch_end = std::min(wts.iterations, done + wts.reassign_every);
    for (; done < epoch_end; ++done) {
      Image g;
      texture_objective(x, hole, reference, wts, stack, assign, &g);
      if (std::all_of(g.values.begin(), g.values.end(), [](double v) { return v == 0.0; })) {
        converged = true;
        break;
      }
      bool accepted = false;
      while (step >= min_step) {
        Image trial = x;
        for (int r = hole.row; r < hole.bottom(); ++r)
          for (int c = hole.col; c < hole.right(); ++c)
            for (int ch = 0; ch < x.channels; ++ch)
              trial.at(r, c, ch) = std::clamp(x.at(r, c, ch) - step * g.at(r, c, ch), 0.0, 1.0);
        const double et = texture_objective(trial, hole, reference, wts, stack, assign);
        require(std::isfinite(et), ErrorCode::DivergedObjective, "objective became non-finite");
        if (et <= e) {
          x = std::move(trial);
          e = et;
          step *= 1.5;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        converged = true;
        break;
      }
    }
    reassign();
    e = texture_objective(x, hole, reference, wts, stack, assign);
    res.epoch_objective.push_back(e);
  }
  res.image = std::move(x);
  return res;
}

struct RefineResult {
  Image image;
  std::vector<ScaleResult> scales;  // coarse -> fine
};

/// Coarse-to-fine refinement of a CE-filled patch: each level starts from the
/// upsampled hole of the previous level and is anchored to the same level of
/// the filled patch.
inline RefineResult refine(const Image& filled, const Region& hole, int levels, const TextureWeights& wts,
                           FeatureStack& stack) {
  const PatchPyramid pyr = build_pyramid(filled, hole, levels);
  RefineResult out;
  Image prev;
  for (size_t l = 0; l < pyr.levels.size(); ++l) {
    const auto& lvl = pyr.levels[l];
    Image init = lvl.patch;
    if (l > 0) {
      const Image up = upsample2(prev);
      paste(init, crop(up, lvl.hole), lvl.hole.row, lvl.hole.col);
    }
    out.scales.push_back(optimize_scale(init, lvl.hole, lvl.patch, wts, stack));
    prev = out.scales.back().image;
  }
  out.image = prev;
  return out;
}

}  // namespace dcp

#endif  // DCP_TEXTURE_HPP
