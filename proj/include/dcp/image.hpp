#ifndef DCP_IMAGE_HPP
#define DCP_IMAGE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dcp/error.hpp"

namespace dcp {

/// Row-major interleaved image with real intensities in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> values;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c), values(static_cast<size_t>(h) * w * c, fill) {
    require(h >= 1 && w >= 1 && (c == 1 || c == 3), ErrorCode::InvalidArgument,
            "image dims must be positive with 1 or 3 channels");
  }

  bool empty() const { return values.empty(); }
  size_t pixel_count() const { return static_cast<size_t>(height) * width; }
  size_t index(int r, int c, int ch = 0) const {
    return (static_cast<size_t>(r) * width + c) * channels + ch;
  }
  double& at(int r, int c, int ch = 0) { return values[index(r, c, ch)]; }
  double at(int r, int c, int ch = 0) const { return values[index(r, c, ch)]; }

  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  bool same_size(const Image& o) const { return height == o.height && width == o.width; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Axis-aligned pixel rectangle (top-left inclusive).
struct Region {
  int row = 0;
  int col = 0;
  int height = 0;
  int width = 0;

  int bottom() const { return row + height; }
  int right() const { return col + width; }
  bool contains(int r, int c) const { return r >= row && r < bottom() && c >= col && c < right(); }
  long area() const { return static_cast<long>(height) * width; }

  friend bool operator==(const Region&, const Region&) = default;
};

/// Binary per-pixel grid; the tag fixes what a set cell means.
template <class Tag>
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> values;

  BinaryMask() = default;
  BinaryMask(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), values(static_cast<size_t>(h) * w, fill) {}

  std::uint8_t& at(int r, int c) { return values[static_cast<size_t>(r) * width + c]; }
  std::uint8_t at(int r, int c) const { return values[static_cast<size_t>(r) * width + c]; }
  bool inside(int r, int c) const { return r >= 0 && r < height && c >= 0 && c < width; }
  size_t count() const {
    return static_cast<size_t>(std::count(values.begin(), values.end(), std::uint8_t{1}));
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

struct MotionTag {};
struct ForegroundTag {};
struct RegionTag {};

/// Motion mask: 1 = static background, 0 = moving foreground.
using MotionMask = BinaryMask<MotionTag>;
/// Foreground mask: 1 = foreground.
using ForegroundMask = BinaryMask<ForegroundTag>;
/// Generic pixel-set membership (blend regions, ROIs).
using RegionMask = BinaryMask<RegionTag>;

/// Centered square hole with half the patch side.
inline Region centered_hole(int patch_size) { return {patch_size / 4, patch_size / 4, patch_size / 2, patch_size / 2}; }

inline void require_same_size(const Image& a, const Image& b, const char* what) {
  require(a.same_size(b), ErrorCode::DimensionMismatch,
          std::string(what) + ": " + std::to_string(a.height) + "x" + std::to_string(a.width) +
              " vs " + std::to_string(b.height) + "x" + std::to_string(b.width));
}

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
  require_same_size(a, b, what);
  require(a.channels == b.channels, ErrorCode::DimensionMismatch,
          std::string(what) + ": channel count differs");
}

/// Luma 0.299R + 0.587G + 0.114B; single-channel input is returned as is.
inline Image to_luma(const Image& img) {
  if (img.channels == 1) return img;
  Image out(img.height, img.width, 1);
  for (size_t p = 0; p < img.pixel_count(); ++p) {
    const double* px = &img.values[p * 3];
    out.values[p] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  }
  return out;
}

inline Image crop(const Image& img, const Region& r) {
  require(r.row >= 0 && r.col >= 0 && r.bottom() <= img.height && r.right() <= img.width,
          ErrorCode::InvalidArgument, "crop region outside image");
  Image out(r.height, r.width, img.channels);
  for (int y = 0; y < r.height; ++y) {
    const auto src = img.values.begin() + static_cast<long>(img.index(r.row + y, r.col));
    std::copy(src, src + static_cast<long>(r.width) * img.channels,
              out.values.begin() + static_cast<long>(out.index(y, 0)));
  }
  return out;
}

/// Copies `src` into `dst` with its top-left at (row, col).
inline void paste(Image& dst, const Image& src, int row, int col) {
  require(dst.channels == src.channels, ErrorCode::DimensionMismatch, "paste: channels differ");
  require(row >= 0 && col >= 0 && row + src.height <= dst.height && col + src.width <= dst.width,
          ErrorCode::InvalidArgument, "paste outside destination");
  for (int y = 0; y < src.height; ++y) {
    const auto s = src.values.begin() + static_cast<long>(src.index(y, 0));
    std::copy(s, s + static_cast<long>(src.width) * src.channels,
              dst.values.begin() + static_cast<long>(dst.index(row + y, col)));
  }
}

/// 2x downsampling by 2x2 area averaging; dims must be even.
inline Image downsample2(const Image& img) {
  require(img.height % 2 == 0 && img.width % 2 == 0, ErrorCode::IndivisibleSize,
          "downsample2 needs even dims");
  Image out(img.height / 2, img.width / 2, img.channels);
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c)
      for (int ch = 0; ch < img.channels; ++ch)
        out.at(r, c, ch) = 0.25 * (img.at(2 * r, 2 * c, ch) + img.at(2 * r, 2 * c + 1, ch) +
                                   img.at(2 * r + 1, 2 * c, ch) + img.at(2 * r + 1, 2 * c + 1, ch));
  return out;
}

/// Bilinear resampling to an arbitrary size (pixel-center aligned, edge clamped).
inline Image resize_bilinear(const Image& img, int height, int width) {
  Image out(height, width, img.channels);
  const double sy = static_cast<double>(img.height) / height;
  const double sx = static_cast<double>(img.width) / width;
  for (int r = 0; r < height; ++r) {
    const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int c = 0; c < width; ++c) {
      const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < img.channels; ++ch) {
        const double top = (1 - wx) * img.at(y0, x0, ch) + wx * img.at(y0, x1, ch);
        const double bot = (1 - wx) * img.at(y1, x0, ch) + wx * img.at(y1, x1, ch);
        out.at(r, c, ch) = (1 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

inline Image upsample2(const Image& img) { return resize_bilinear(img, img.height * 2, img.width * 2); }

inline void clamp01(Image& img) {
  for (double& v : img.values) v = std::clamp(v, 0.0, 1.0);
}

/// Quantizes to the 8-bit grid used at file boundaries.
inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace dcp

#endif  // DCP_IMAGE_HPP
