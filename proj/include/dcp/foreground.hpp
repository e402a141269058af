#ifndef DCP_FOREGROUND_HPP
#define DCP_FOREGROUND_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dcp/error.hpp"
#include "dcp/image.hpp"

namespace dcp {

/// Binary kernel with an origin; offsets are (row - origin_row, col - origin_col).
struct StructuringElement {
  int height = 0, width = 0;
  int origin_row = 0, origin_col = 0;
  std::vector<std::uint8_t> cells;
  std::string spec;  // "square:3", "disk:7", "" for custom kernels

  StructuringElement() = default;
  StructuringElement(int h, int w, std::vector<std::uint8_t> grid, int orow, int ocol)
      : height(h), width(w), origin_row(orow), origin_col(ocol), cells(std::move(grid)) {
    require(h >= 1 && w >= 1 && cells.size() == static_cast<size_t>(h) * w, ErrorCode::InvalidArgument,
            "structuring element grid size mismatch");
    require(orow >= 0 && orow < h && ocol >= 0 && ocol < w, ErrorCode::InvalidArgument,
            "structuring element origin outside the kernel");
    require(std::any_of(cells.begin(), cells.end(), [](std::uint8_t v) { return v != 0; }),
            ErrorCode::InvalidArgument, "structuring element has no active cell");
  }

  static StructuringElement square(int side) {
    require(side >= 1 && side % 2 == 1, ErrorCode::InvalidArgument, "square SE side must be odd and positive");
    StructuringElement se(side, side, std::vector<std::uint8_t>(static_cast<size_t>(side) * side, 1), side / 2,
                          side / 2);
    se.spec = "square:" + std::to_string(side);
    return se;
  }

  static StructuringElement disk(int side) {
    require(side >= 1 && side % 2 == 1, ErrorCode::InvalidArgument, "disk SE side must be odd and positive");
    const int r = side / 2;
    std::vector<std::uint8_t> g(static_cast<size_t>(side) * side, 0);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        g[static_cast<size_t>(y) * side + x] = (y - r) * (y - r) + (x - r) * (x - r) <= r * r ? 1 : 0;
    StructuringElement se(side, side, std::move(g), r, r);
    se.spec = "disk:" + std::to_string(side);
    return se;
  }

  /// "square:N" or "disk:N".
  static StructuringElement parse(const std::string& text) {
    const auto colon = text.find(':');
    require(colon != std::string::npos, ErrorCode::InvalidArgument, "structuring element must look like shape:size");
    const std::string shape = text.substr(0, colon);
    int side = 0;
    try {
      size_t used = 0;
      side = std::stoi(text.substr(colon + 1), &used);
      require(used == text.size() - colon - 1, ErrorCode::InvalidArgument, "bad structuring element size");
    } catch (const std::logic_error&) {
      fail(ErrorCode::InvalidArgument, "bad structuring element size in '" + text + "'");
    }
    if (shape == "square") return square(side);
    if (shape == "disk") return disk(side);
    fail(ErrorCode::InvalidArgument, "unknown structuring element shape '" + shape + "'");
  }

  std::vector<std::pair<int, int>> offsets() const {
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        if (cells[static_cast<size_t>(y) * width + x]) out.emplace_back(y - origin_row, x - origin_col);
    return out;
  }
};

/// {z : z + b in mask for every offset b}; pixels beyond the image count as 0.
inline ForegroundMask erode(const ForegroundMask& m, const StructuringElement& se) {
  ForegroundMask out(m.height, m.width, 1);
  for (auto [dy, dx] : se.offsets())
    for (int r = 0; r < m.height; ++r)
      for (int c = 0; c < m.width; ++c) {
        if (!out.at(r, c)) continue;
        const int y = r + dy, x = c + dx;
        if (!m.inside(y, x) || !m.at(y, x)) out.at(r, c) = 0;
      }
  return out;
}

/// {a + b : a in mask, b an offset}, clipped to the image.
inline ForegroundMask dilate(const ForegroundMask& m, const StructuringElement& se) {
  ForegroundMask out(m.height, m.width, 0);
  for (auto [dy, dx] : se.offsets())
    for (int r = 0; r < m.height; ++r)
      for (int c = 0; c < m.width; ++c)
        if (m.at(r, c) && m.inside(r + dy, c + dx)) out.at(r + dy, c + dx) = 1;
  return out;
}

inline ForegroundMask morph_open(const ForegroundMask& m, const StructuringElement& se) {
  return dilate(erode(m, se), se);
}

inline ForegroundMask morph_close(const ForegroundMask& m, const StructuringElement& se) {
  return erode(dilate(m, se), se);
}

/// |luma(bg) - luma(frame)| in gray levels.
inline std::vector<double> luma_difference(const Image& background, const Image& frame) {
  require_same_size(background, frame, "difference_mask");
  const Image a = to_luma(background), b = to_luma(frame);
  std::vector<double> d(a.values.size());
  for (size_t i = 0; i < d.size(); ++i) d[i] = std::abs(a.values[i] - b.values[i]) * 255.0;
  return d;
}

inline ForegroundMask threshold_difference(const std::vector<double>& diff, int height, int width, double tau) {
  ForegroundMask m(height, width, 0);
  for (size_t i = 0; i < diff.size(); ++i) m.values[i] = diff[i] > tau ? 1 : 0;
  return m;
}

/// 1 where the luma difference exceeds tau gray levels.
inline ForegroundMask difference_mask(const Image& background, const Image& frame, double tau) {
  require(tau >= 0 && tau <= 255, ErrorCode::InvalidArgument, "tau must lie in [0,255]");
  return threshold_difference(luma_difference(background, frame), frame.height, frame.width, tau);
}

/// Otsu threshold on a 256-bin histogram of gray-level values; returns the
/// bin t such that values > t form the upper class.
inline double otsu_threshold(const std::vector<double>& values) {
  std::array<double, 256> hist{};
  for (double v : values) hist[static_cast<size_t>(std::clamp(std::lround(v), 0L, 255L))] += 1;
  const double total = static_cast<double>(values.size());
  double sum_all = 0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[static_cast<size_t>(i)];
  double w0 = 0, sum0 = 0, best = -1;
  int arg = 0;
  for (int t = 0; t < 255; ++t) {
    w0 += hist[static_cast<size_t>(t)];
    sum0 += t * hist[static_cast<size_t>(t)];
    const double w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      arg = t;
    }
  }
  return static_cast<double>(arg) + 0.5;
}

struct ForegroundConfig {
  double tau = 30.0;
  bool otsu = false;
  StructuringElement open_se = StructuringElement::square(3);
  StructuringElement close_se = StructuringElement::disk(7);
  int repeat = 1;  // number of open/close rounds
};

/// Threshold, then `repeat` rounds of opening followed by closing.
inline ForegroundMask detect_foreground(const Image& background, const Image& frame, const ForegroundConfig& cfg = {}) {
  require(cfg.repeat >= 0, ErrorCode::InvalidArgument, "repeat must be non-negative");
  const std::vector<double> diff = luma_difference(background, frame);
  double tau = cfg.tau;
  if (cfg.otsu) tau = otsu_threshold(diff);
  require(tau >= 0 && tau <= 255, ErrorCode::InvalidArgument, "tau must lie in [0,255]");
  ForegroundMask m = threshold_difference(diff, frame.height, frame.width, tau);
  for (int k = 0; k < cfg.repeat; ++k) m = morph_close(morph_open(m, cfg.open_se), cfg.close_se);
  return m;
}

}  // namespace dcp

#endif  // DCP_FOREGROUND_HPP
