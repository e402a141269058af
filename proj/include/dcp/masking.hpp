#ifndef DCP_MASKING_HPP
#define DCP_MASKING_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "dcp/dataio.hpp"
#include "dcp/error.hpp"
#include "dcp/flow.hpp"
#include "dcp/image.hpp"

namespace dcp {

struct FlowThreshold {
  double t_h = 0.0;
  double k = 1.0;
  bool degenerate = false;  // mean motion below 1e-6: nothing is treated as moving
};

/// t_h = k * mean(magnitude).
inline FlowThreshold compute_threshold(const MagnitudeField& mag, double k = 1.0) {
  require(k > 0, ErrorCode::InvalidArgument, "threshold scale k must be positive");
  require(!mag.values.empty(), ErrorCode::InvalidArgument, "empty magnitude field");
  const double mean =
      std::accumulate(mag.values.begin(), mag.values.end(), 0.0) / static_cast<double>(mag.values.size());
  FlowThreshold th;
  th.k = k;
  th.t_h = k * mean;
  th.degenerate = mean < 1e-6;
  return th;
}

/// m = 1 (background) where magnitude < t_h, m = 0 (foreground) otherwise.
inline MotionMask build_motion_mask(const MagnitudeField& mag, const FlowThreshold& th) {
  MotionMask mask(mag.height, mag.width, 1);
  if (th.degenerate) return mask;
  for (size_t i = 0; i < mag.values.size(); ++i) mask.values[i] = mag.values[i] < th.t_h ? 1 : 0;
  return mask;
}

/// Sum over pixels and channels of |S_{t+1} - S_t| for every t in [0, n-2].
inline std::vector<double> forward_difference_sums(const FrameSequence& seq) {
  require(seq.size() >= 2, ErrorCode::MissingFrames, "need at least 2 frames");
  std::vector<double> sums(seq.size() - 1, 0.0);
  for (size_t t = 0; t + 1 < seq.size(); ++t) {
    const auto& a = seq.frames[t].values;
    const auto& b = seq.frames[t + 1].values;
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += std::abs(b[i] - a[i]);
    sums[t] = s;
  }
  return sums;
}

/// Candidate frames ordered by forward difference, ties by index.
inline std::vector<size_t> rank_background_frames(const FrameSequence& seq) {
  const std::vector<double> sums = forward_difference_sums(seq);
  std::vector<size_t> order(sums.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return sums[a] < sums[b]; });
  return order;
}

inline size_t select_background_frame(const FrameSequence& seq) { return rank_background_frames(seq).front(); }

/// An 8-connected foreground component of a motion mask.
struct Component {
  int id = 0;
  std::vector<std::pair<int, int>> pixels;  // (row, col)
  Region bbox;
  double centroid_row = 0;
  double centroid_col = 0;
};

/// Components of m = 0 pixels, in raster order of their first pixel; those
/// smaller than `min_pixels` are dropped.
inline std::vector<Component> foreground_components(const MotionMask& mask, int min_pixels = 9) {
  std::vector<int> label(mask.values.size(), -1);
  std::vector<Component> out;
  int next_id = 0;
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c) {
      const size_t idx = static_cast<size_t>(r) * mask.width + c;
      if (mask.values[idx] != 0 || label[idx] >= 0) continue;
      Component comp;
      comp.id = next_id;
      label[idx] = next_id;
      stack.assign(1, {r, c});
      while (!stack.empty()) {
        auto [y, x] = stack.back();
        stack.pop_back();
        comp.pixels.emplace_back(y, x);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = y + dy, nx = x + dx;
            if (!mask.inside(ny, nx)) continue;
            const size_t n = static_cast<size_t>(ny) * mask.width + nx;
            if (mask.values[n] != 0 || label[n] >= 0) continue;
            label[n] = next_id;
            stack.emplace_back(ny, nx);
          }
      }
      ++next_id;
      if (static_cast<int>(comp.pixels.size()) < min_pixels) continue;
      int r0 = mask.height, c0 = mask.width, r1 = -1, c1 = -1;
      double sr = 0, sc = 0;
      for (auto [y, x] : comp.pixels) {
        r0 = std::min(r0, y);
        r1 = std::max(r1, y);
        c0 = std::min(c0, x);
        c1 = std::max(c1, x);
        sr += y;
        sc += x;
      }
      comp.bbox = {r0, c0, r1 - r0 + 1, c1 - c0 + 1};
      comp.centroid_row = sr / static_cast<double>(comp.pixels.size());
      comp.centroid_col = sc / static_cast<double>(comp.pixels.size());
      out.push_back(std::move(comp));
    }
  return out;
}

/// A square patch whose centered half-side hole is to be predicted.
struct InpaintTask {
  Image patch;
  Region hole;              // patch coordinates
  RegionMask object_mask;   // 1 = keep, 0 = erased (exactly the hole)
  int origin_row = 0;       // patch top-left in frame coordinates
  int origin_col = 0;
  int frame_index = 0;
  std::optional<Component> component;  // absent for harvested training patches
  std::optional<Image> truth;          // known hole content C(x_b, H)

  int side() const { return patch.height; }

  /// x_m = x ⊙ m_o
  Image masked() const {
    Image xm = patch;
    for (int r = hole.row; r < hole.bottom(); ++r)
      for (int c = hole.col; c < hole.right(); ++c)
        for (int ch = 0; ch < xm.channels; ++ch) xm.at(r, c, ch) = 0.0;
    return xm;
  }
};

/// Builds a task for the patch at (row, col) with a centered hole.
inline InpaintTask make_task(const Image& frame, int row, int col, int patch_size, int frame_index) {
  require(patch_size % 4 == 0 && patch_size >= 4, ErrorCode::InvalidArgument, "patch_size must be divisible by 4");
  InpaintTask task;
  task.patch = crop(frame, {row, col, patch_size, patch_size});
  task.hole = centered_hole(patch_size);
  task.object_mask = RegionMask(patch_size, patch_size, 1);
  for (int r = task.hole.row; r < task.hole.bottom(); ++r)
    for (int c = task.hole.col; c < task.hole.right(); ++c) task.object_mask.at(r, c) = 0;
  task.origin_row = row;
  task.origin_col = col;
  task.frame_index = frame_index;
  return task;
}

/// One task per foreground component; the patch is centered on the component
/// centroid, shifted so the hole covers the bounding box, and kept inside the frame.
inline std::vector<InpaintTask> extract_inpaint_tasks(const Image& frame, const MotionMask& mask, int patch_size,
                                                      int frame_index = 0, int min_component = 9) {
  require(patch_size % 4 == 0 && patch_size >= 4, ErrorCode::InvalidArgument, "patch_size must be divisible by 4");
  require(mask.height == frame.height && mask.width == frame.width, ErrorCode::DimensionMismatch,
          "mask and frame differ in size");
  require(patch_size <= std::min(frame.height, frame.width), ErrorCode::TooSmall,
          "patch_size exceeds frame dims");
  const int hole = patch_size / 2;
  const int quarter = patch_size / 4;

  std::vector<InpaintTask> tasks;
  for (const Component& comp : foreground_components(mask, min_component)) {
    require(comp.bbox.height <= hole && comp.bbox.width <= hole, ErrorCode::OversizedObject,
            "component " + std::to_string(comp.id) + " bounding box " + std::to_string(comp.bbox.height) + "x" +
                std::to_string(comp.bbox.width) + " exceeds hole side " + std::to_string(hole));
    auto place = [&](double centroid, int lo, int hi, int limit) {
      int start = static_cast<int>(std::lround(centroid)) - patch_size / 2;
      start = std::clamp(start, hi - 3 * quarter, lo - quarter);  // hole covers [lo, hi)
      return std::clamp(start, 0, limit - patch_size);
    };
    const int row = place(comp.centroid_row, comp.bbox.row, comp.bbox.bottom(), frame.height);
    const int col = place(comp.centroid_col, comp.bbox.col, comp.bbox.right(), frame.width);
    const Region frame_hole{row + quarter, col + quarter, hole, hole};
    require(frame_hole.contains(comp.bbox.row, comp.bbox.col) &&
                frame_hole.contains(comp.bbox.bottom() - 1, comp.bbox.right() - 1),
            ErrorCode::OversizedObject,
            "component " + std::to_string(comp.id) + " lies too close to the frame border to be centered in a hole");
    InpaintTask task = make_task(frame, row, col, patch_size, frame_index);
    task.component = comp;
    tasks.push_back(std::move(task));
  }
  return tasks;
}

/// Patches on a `stride` grid whose motion mask is entirely background; the
/// hole truth is the patch's own center.
inline std::vector<InpaintTask> harvest_background_patches(const Image& frame, const MotionMask& mask,
                                                           int patch_size, int stride, int frame_index = 0) {
  require(stride >= 1, ErrorCode::InvalidArgument, "harvest stride must be positive");
  require(mask.height == frame.height && mask.width == frame.width, ErrorCode::DimensionMismatch,
          "mask and frame differ in size");
  std::vector<InpaintTask> out;
  if (patch_size > frame.height || patch_size > frame.width) return out;
  // prefix sums of foreground counts
  std::vector<int> integral(static_cast<size_t>(mask.height + 1) * (mask.width + 1), 0);
  auto I = [&](int r, int c) -> int& { return integral[static_cast<size_t>(r) * (mask.width + 1) + c]; };
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c) I(r + 1, c + 1) = I(r, c + 1) + I(r + 1, c) - I(r, c) + (mask.at(r, c) == 0);
  for (int r = 0; r + patch_size <= frame.height; r += stride)
    for (int c = 0; c + patch_size <= frame.width; c += stride) {
      const int fg = I(r + patch_size, c + patch_size) - I(r, c + patch_size) - I(r + patch_size, c) + I(r, c);
      if (fg != 0) continue;
      InpaintTask task = make_task(frame, r, c, patch_size, frame_index);
      task.truth = crop(task.patch, task.hole);
      out.push_back(std::move(task));
    }
  return out;
}

}  // namespace dcp

#endif  // DCP_MASKING_HPP
