#ifndef DCP_FLOW_HPP
#define DCP_FLOW_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dcp/error.hpp"
#include "dcp/image.hpp"

namespace dcp {

/// Dense displacement field in pixels/frame; u horizontal, v vertical.
struct FlowField {
  int height = 0;
  int width = 0;
  std::vector<double> u;
  std::vector<double> v;

  FlowField() = default;
  FlowField(int h, int w)
      : height(h), width(w), u(static_cast<size_t>(h) * w, 0.0), v(static_cast<size_t>(h) * w, 0.0) {}
};

/// Per-pixel nonnegative motion magnitude.
struct MagnitudeField {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  double at(int r, int c) const { return values[static_cast<size_t>(r) * width + c]; }
};

struct FlowSettings {
  int levels = 4;             // pyramid levels, coarsest has min side >= 8
  double smoothness = 15.0;   // regularization weight on the 0..255 intensity scale
  int iterations = 100;       // Jacobi sweeps per warp
  int warps = 3;              // re-linearizations per level
};

namespace flow_detail {

/// Scalar plane with clamped access.
struct Plane {
  int h = 0, w = 0;
  std::vector<double> d;
  Plane() = default;
  Plane(int h_, int w_, double fill = 0.0) : h(h_), w(w_), d(static_cast<size_t>(h_) * w_, fill) {}
  double& operator()(int r, int c) { return d[static_cast<size_t>(r) * w + c]; }
  double operator()(int r, int c) const { return d[static_cast<size_t>(r) * w + c]; }
  double clamped(int r, int c) const {
    return (*this)(std::clamp(r, 0, h - 1), std::clamp(c, 0, w - 1));
  }
  double bilinear(double y, double x) const {
    y = std::clamp(y, 0.0, h - 1.0);
    x = std::clamp(x, 0.0, w - 1.0);
    const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
    const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
    const double fy = y - y0, fx = x - x0;
    return (1 - fy) * ((1 - fx) * (*this)(y0, x0) + fx * (*this)(y0, x1)) +
           fy * ((1 - fx) * (*this)(y1, x0) + fx * (*this)(y1, x1));
  }
};

inline Plane blur(const Plane& p) {
  // separable [1 4 6 4 1]/16
  static constexpr double k[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
  Plane tmp(p.h, p.w), out(p.h, p.w);
  for (int r = 0; r < p.h; ++r)
    for (int c = 0; c < p.w; ++c) {
      double s = 0;
      for (int t = -2; t <= 2; ++t) s += k[t + 2] * p.clamped(r, c + t);
      tmp(r, c) = s;
    }
  for (int r = 0; r < p.h; ++r)
    for (int c = 0; c < p.w; ++c) {
      double s = 0;
      for (int t = -2; t <= 2; ++t) s += k[t + 2] * tmp.clamped(r + t, c);
      out(r, c) = s;
    }
  return out;
}

inline Plane half(const Plane& p) {
  const Plane b = blur(p);
  Plane out((p.h + 1) / 2, (p.w + 1) / 2);
  const double sy = static_cast<double>(p.h) / out.h, sx = static_cast<double>(p.w) / out.w;
  for (int r = 0; r < out.h; ++r)
    for (int c = 0; c < out.w; ++c) out(r, c) = b.bilinear((r + 0.5) * sy - 0.5, (c + 0.5) * sx - 0.5);
  return out;
}

inline Plane resize(const Plane& p, int h, int w, double scale) {
  Plane out(h, w);
  const double sy = static_cast<double>(p.h) / h, sx = static_cast<double>(p.w) / w;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) out(r, c) = scale * p.bilinear((r + 0.5) * sy - 0.5, (c + 0.5) * sx - 0.5);
  return out;
}

inline Plane to_plane(const Image& img) {
  const Image luma = to_luma(img);
  Plane p(luma.height, luma.width);
  for (size_t i = 0; i < p.d.size(); ++i) p.d[i] = luma.values[i] * 255.0;
  return p;
}

/// Horn–Schunck neighbourhood average (1/6 edge, 1/12 corner), Neumann border.
inline double hs_average(const Plane& p, int r, int c) {
  return (p.clamped(r - 1, c) + p.clamped(r + 1, c) + p.clamped(r, c - 1) + p.clamped(r, c + 1)) / 6.0 +
         (p.clamped(r - 1, c - 1) + p.clamped(r - 1, c + 1) + p.clamped(r + 1, c - 1) +
          p.clamped(r + 1, c + 1)) / 12.0;
}

inline void refine_level(const Plane& i1, const Plane& i2, Plane& u, Plane& v, const FlowSettings& s) {
  const double alpha2 = s.smoothness * s.smoothness;
  const int h = i1.h, w = i1.w;
  for (int warp = 0; warp < s.warps; ++warp) {
    Plane warped(h, w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) warped(r, c) = i2.bilinear(r + v(r, c), c + u(r, c));

    Plane ix(h, w), iy(h, w), it(h, w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        ix(r, c) = 0.25 * (i1.clamped(r, c + 1) - i1.clamped(r, c - 1) + warped.clamped(r, c + 1) -
                           warped.clamped(r, c - 1));
        iy(r, c) = 0.25 * (i1.clamped(r + 1, c) - i1.clamped(r - 1, c) + warped.clamped(r + 1, c) -
                           warped.clamped(r - 1, c));
        it(r, c) = warped(r, c) - i1(r, c);
        const double y = r + v(r, c), x = c + u(r, c);
        if (y < 0 || y > h - 1 || x < 0 || x > w - 1) ix(r, c) = iy(r, c) = it(r, c) = 0.0;
      }

    const Plane u0 = u, v0 = v;
    Plane un(h, w), vn(h, w);
    for (int iter = 0; iter < s.iterations; ++iter) {
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          const double ub = hs_average(u, r, c), vb = hs_average(v, r, c);
          const double gx = ix(r, c), gy = iy(r, c);
          const double resid = gx * (ub - u0(r, c)) + gy * (vb - v0(r, c)) + it(r, c);
          const double k = resid / (alpha2 + gx * gx + gy * gy);
          un(r, c) = ub - gx * k;
          vn(r, c) = vb - gy * k;
        }
      std::swap(u.d, un.d);
      std::swap(v.d, vn.d);
    }
  }
}

/// Median absolute brightness residual after warping; robust to occlusions and borders.
inline double warp_residual(const Plane& i1, const Plane& i2, const Plane& u, const Plane& v) {
  std::vector<double> d;
  d.reserve(i1.d.size());
  for (int r = 0; r < i1.h; ++r)
    for (int c = 0; c < i1.w; ++c) {
      const double y = r + v(r, c), x = c + u(r, c);
      if (y >= 0 && y <= i1.h - 1 && x >= 0 && x <= i1.w - 1) d.push_back(std::abs(i2.bilinear(y, x) - i1(r, c)));
    }
  if (d.empty()) return std::numeric_limits<double>::infinity();
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

}  // namespace flow_detail

/// Coarse-to-fine Horn–Schunck flow with warping, computed on luma scaled to 0..255.
inline FlowField estimate_flow(const Image& frame_a, const Image& frame_b, const FlowSettings& settings = {}) {
  using namespace flow_detail;
  require_same_size(frame_a, frame_b, "estimate_flow");
  require(settings.levels >= 1 && settings.iterations >= 0 && settings.warps >= 1 &&
              settings.smoothness > 0,
          ErrorCode::InvalidArgument, "invalid flow settings");

  std::vector<Plane> pyr_a{to_plane(frame_a)}, pyr_b{to_plane(frame_b)};
  while (static_cast<int>(pyr_a.size()) < settings.levels && std::min(pyr_a.back().h, pyr_a.back().w) >= 16) {
    pyr_a.push_back(half(pyr_a.back()));
    pyr_b.push_back(half(pyr_b.back()));
  }

  // Every pyramid depth is a candidate start; keep the result that best explains frame b.
  Plane best_u, best_v;
  double best_e = 0;
  for (int top = 0; top < static_cast<int>(pyr_a.size()); ++top) {
    Plane u(pyr_a[static_cast<size_t>(top)].h, pyr_a[static_cast<size_t>(top)].w), v = u;
    for (int lvl = top; lvl >= 0; --lvl) {
      const Plane& a = pyr_a[static_cast<size_t>(lvl)];
      if (u.h != a.h || u.w != a.w) {
        const double sy = static_cast<double>(a.h) / u.h, sx = static_cast<double>(a.w) / u.w;
        u = resize(u, a.h, a.w, sx);
        v = resize(v, a.h, a.w, sy);
      }
      refine_level(a, pyr_b[static_cast<size_t>(lvl)], u, v, settings);
    }
    const double e = warp_residual(pyr_a[0], pyr_b[0], u, v);
    if (top == 0 || e < best_e) {
      best_e = e;
      best_u = std::move(u);
      best_v = std::move(v);
    }
  }

  FlowField field(frame_a.height, frame_a.width);
  field.u = std::move(best_u.d);
  field.v = std::move(best_v.d);
  return field;
}

inline MagnitudeField flow_magnitude(const FlowField& field) {
  MagnitudeField mag{field.height, field.width, std::vector<double>(field.u.size())};
  for (size_t i = 0; i < field.u.size(); ++i) mag.values[i] = std::hypot(field.u[i], field.v[i]);
  return mag;
}

/// Magnitude rendered as grayscale, normalized by `max_magnitude` (debug output).
inline Image visualize_magnitude(const MagnitudeField& mag, double max_magnitude) {
  Image img(mag.height, mag.width, 1);
  const double scale = max_magnitude > 0 ? 1.0 / max_magnitude : 0.0;
  for (size_t i = 0; i < mag.values.size(); ++i) img.values[i] = std::min(1.0, mag.values[i] * scale);
  return img;
}

}  // namespace dcp

#endif  // DCP_FLOW_HPP
