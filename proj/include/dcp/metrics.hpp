#ifndef DCP_METRICS_HPP
#define DCP_METRICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dcp/error.hpp"
#include "dcp/image.hpp"

namespace dcp {

struct ConfusionCounts {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct SegScores {
  double re = 0, sp = 0, fnr = 0, pwc = 0, pre = 0, f = 0;
  bool degenerate = false;  // some ratio was 0/0 and reported as 0

  std::vector<double> values() const { return {re, sp, fnr, pwc, pre, f}; }
};

struct BackgroundScores {
  double age = 0, peps = 0, pceps = 0, psnr = 0, msssim = 0, cqm = 0;

  std::vector<double> values() const { return {age, peps, pceps, psnr, msssim, cqm}; }
};

inline const std::vector<std::string>& background_columns() {
  static const std::vector<std::string> c = {"AGE", "pEPs", "pCEPs", "PSNR", "MSSSIM", "CQM"};
  return c;
}

inline const std::vector<std::string>& segmentation_columns() {
  static const std::vector<std::string> c = {"Re", "Sp", "FNR", "PWC", "Pre", "F"};
  return c;
}

struct MetricSettings {
  double error_threshold = 20.0;  // gray levels, for pEPs / pCEPs
  double psnr_cap = 100.0;
  double cqm_luma_weight = 0.9449;
  double cqm_chroma_weight = 0.0551;
};

namespace metrics_detail {

using Plane = std::vector<double>;

inline double psnr(const Plane& a, const Plane& b, double cap) {
  double mse = 0;
  for (size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
  mse /= static_cast<double>(a.size());
  if (mse == 0) return cap;
  return std::min(cap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

inline Plane scaled(const Image& luma) {
  Plane p(luma.values.size());
  for (size_t i = 0; i < p.size(); ++i) p[i] = luma.values[i] * 255.0;
  return p;
}

inline std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<size_t>(size) * size);
  const double c = (size - 1) / 2.0;
  double sum = 0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double v = std::exp(-((y - c) * (y - c) + (x - c) * (x - c)) / (2 * sigma * sigma));
      w[static_cast<size_t>(y) * size + x] = v;
      sum += v;
    }
  for (double& v : w) v /= sum;
  return w;
}

/// Mean luminance term and mean contrast-structure term with a 'valid' window.
inline std::pair<double, double> ssim_terms(const Plane& x, const Plane& y, int h, int w, int win) {
  constexpr double c1 = (0.01 * 255) * (0.01 * 255), c2 = (0.03 * 255) * (0.03 * 255);
  const std::vector<double> g = gaussian_window(win, 1.5);
  double lsum = 0, cssum = 0;
  int n = 0;
  for (int r = 0; r + win <= h; ++r)
    for (int c = 0; c + win <= w; ++c) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int dy = 0; dy < win; ++dy)
        for (int dx = 0; dx < win; ++dx) {
          const double k = g[static_cast<size_t>(dy) * win + dx];
          const double a = x[static_cast<size_t>(r + dy) * w + c + dx], b = y[static_cast<size_t>(r + dy) * w + c + dx];
          mx += k * a;
          my += k * b;
          sxx += k * a * a;
          syy += k * b * b;
          sxy += k * a * b;
        }
      sxx -= mx * mx;
      syy -= my * my;
      sxy -= mx * my;
      lsum += (2 * mx * my + c1) / (mx * mx + my * my + c1);
      cssum += (2 * sxy + c2) / (sxx + syy + c2);
      ++n;
    }
  return {lsum / n, cssum / n};
}

inline Plane half(const Plane& p, int h, int w) {
  const int hh = h / 2, hw = w / 2;
  Plane out(static_cast<size_t>(hh) * hw);
  for (int r = 0; r < hh; ++r)
    for (int c = 0; c < hw; ++c)
      out[static_cast<size_t>(r) * hw + c] =
          (p[static_cast<size_t>(2 * r) * w + 2 * c] + p[static_cast<size_t>(2 * r) * w + 2 * c + 1] +
           p[static_cast<size_t>(2 * r + 1) * w + 2 * c] + p[static_cast<size_t>(2 * r + 1) * w + 2 * c + 1]) /
          4.0;
  return out;
}

}  // namespace metrics_detail

/// Multi-scale SSIM on 0..255 luma planes: up to 5 scales with an 11x11
/// Gaussian (sigma 1.5); scales whose side would drop below the window are
/// dropped and the remaining weights renormalized.
inline double ms_ssim(const Image& a, const Image& b) {
  require_same_size(a, b, "ms_ssim");
  static constexpr std::array<double, 5> kWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  int h = a.height, w = a.width;
  int win = 11;
  int scales = 1;
  if (std::min(h, w) < win) {
    win = std::min(h, w);
    if (win % 2 == 0) --win;
  } else {
    while (scales < 5 && std::min(h >> scales, w >> scales) >= win) ++scales;
  }
  double wsum = 0;
  for (int s = 0; s < scales; ++s) wsum += kWeights[static_cast<size_t>(s)];
  metrics_detail::Plane x = metrics_detail::scaled(to_luma(a)), y = metrics_detail::scaled(to_luma(b));
  double result = 1.0;
  for (int s = 0; s < scales; ++s) {
    const auto [l, cs] = metrics_detail::ssim_terms(x, y, h, w, win);
    const double wt = kWeights[static_cast<size_t>(s)] / wsum;
    result *= std::pow(std::max(0.0, cs), wt);
    if (s == scales - 1) result *= std::pow(std::max(0.0, l), wt);
    if (s + 1 < scales) {
      x = metrics_detail::half(x, h, w);
      y = metrics_detail::half(y, h, w);
      h /= 2;
      w /= 2;
    }
  }
  return std::clamp(result, 0.0, 1.0);
}

/// CQM from PSNR over a reversible-color-transform Y/U/V split: luma weight
/// times PSNR_Y plus chroma weight times mean(PSNR_U, PSNR_V). Grayscale
/// inputs report PSNR_Y.
inline double color_quality(const Image& a, const Image& b, const MetricSettings& s = {}) {
  require_same_shape(a, b, "color_quality");
  if (a.channels == 1)
    return metrics_detail::psnr(metrics_detail::scaled(a), metrics_detail::scaled(b), s.psnr_cap);
  const size_t n = a.pixel_count();
  metrics_detail::Plane ya(n), ua(n), va(n), yb(n), ub(n), vb(n);
  auto rct = [](const Image& img, size_t p, double& y, double& u, double& v) {
    const double r = img.values[p * 3] * 255, g = img.values[p * 3 + 1] * 255, bl = img.values[p * 3 + 2] * 255;
    y = (r + 2 * g + bl) / 4;
    u = r - g;
    v = bl - g;
  };
  for (size_t p = 0; p < n; ++p) {
    rct(a, p, ya[p], ua[p], va[p]);
    rct(b, p, yb[p], ub[p], vb[p]);
  }
  const double py = metrics_detail::psnr(ya, yb, s.psnr_cap);
  const double pu = metrics_detail::psnr(ua, ub, s.psnr_cap), pv = metrics_detail::psnr(va, vb, s.psnr_cap);
  return s.cqm_luma_weight * py + s.cqm_chroma_weight * (pu + pv) / 2;
}

inline BackgroundScores background_metrics(const Image& estimate, const Image& truth, const MetricSettings& s = {}) {
  require_same_shape(estimate, truth, "background_metrics");
  const Image le = to_luma(estimate), lt = to_luma(truth);
  const int h = truth.height, w = truth.width;
  std::vector<double> err(le.values.size());
  for (size_t i = 0; i < err.size(); ++i) err[i] = std::abs(le.values[i] - lt.values[i]) * 255.0;
  std::vector<std::uint8_t> ep(err.size());
  for (size_t i = 0; i < err.size(); ++i) ep[i] = err[i] > s.error_threshold ? 1 : 0;

  BackgroundScores out;
  double sum = 0;
  size_t n_ep = 0, n_cep = 0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const size_t i = static_cast<size_t>(r) * w + c;
      sum += err[i];
      if (!ep[i]) continue;
      ++n_ep;
      bool clustered = true;
      if (r > 0) clustered = clustered && ep[i - static_cast<size_t>(w)];
      if (r + 1 < h) clustered = clustered && ep[i + static_cast<size_t>(w)];
      if (c > 0) clustered = clustered && ep[i - 1];
      if (c + 1 < w) clustered = clustered && ep[i + 1];
      n_cep += clustered;
    }
  const double total = static_cast<double>(err.size());
  out.age = sum / total;
  out.peps = static_cast<double>(n_ep) / total;
  out.pceps = static_cast<double>(n_cep) / total;
  out.psnr = metrics_detail::psnr(metrics_detail::scaled(le), metrics_detail::scaled(lt), s.psnr_cap);
  out.msssim = ms_ssim(estimate, truth);
  out.cqm = color_quality(estimate, truth, s);
  return out;
}

/// Counts over `roi` (every pixel when null); positive = foreground.
template <class RoiMask = RegionMask>
ConfusionCounts confusion(const ForegroundMask& truth, const ForegroundMask& pred, const RoiMask* roi = nullptr) {
  require(truth.height == pred.height && truth.width == pred.width, ErrorCode::DimensionMismatch,
          "truth and predicted masks differ in size");
  require(!roi || (roi->height == truth.height && roi->width == truth.width), ErrorCode::DimensionMismatch,
          "roi differs in size from the masks");
  ConfusionCounts c;
  for (size_t i = 0; i < truth.values.size(); ++i) {
    if (roi && !roi->values[i]) continue;
    const bool t = truth.values[i] != 0, p = pred.values[i] != 0;
    if (t && p) ++c.tp;
    else if (!t && !p) ++c.tn;
    else if (p) ++c.fp;
    else ++c.fn;
  }
  return c;
}

inline SegScores segmentation_metrics(const ConfusionCounts& c) {
  require(c.total() > 0, ErrorCode::EmptyCounts, "confusion counts are all zero");
  SegScores s;
  auto ratio = [&](double num, double den) {
    if (den == 0) {
      s.degenerate = true;
      return 0.0;
    }
    return num / den;
  };
  const auto tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
  const auto fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  s.re = ratio(tp, tp + fn);
  s.sp = ratio(tn, tn + fp);
  s.fnr = ratio(fn, tp + fn);
  s.pwc = 100.0 * (fn + fp) / static_cast<double>(c.total());
  s.pre = ratio(tp, tp + fp);
  s.f = ratio(2 * s.pre * s.re, s.pre + s.re);
  return s;
}

/// Unweighted mean per field.
inline BackgroundScores mean_scores(const std::vector<BackgroundScores>& v) {
  BackgroundScores m;
  if (v.empty()) return m;
  for (const auto& s : v) {
    m.age += s.age;
    m.peps += s.peps;
    m.pceps += s.pceps;
    m.psnr += s.psnr;
    m.msssim += s.msssim;
    m.cqm += s.cqm;
  }
  const double n = static_cast<double>(v.size());
  m.age /= n;
  m.peps /= n;
  m.pceps /= n;
  m.psnr /= n;
  m.msssim /= n;
  m.cqm /= n;
  return m;
}

inline SegScores mean_scores(const std::vector<SegScores>& v) {
  SegScores m;
  if (v.empty()) return m;
  for (const auto& s : v) {
    m.re += s.re;
    m.sp += s.sp;
    m.fnr += s.fnr;
    m.pwc += s.pwc;
    m.pre += s.pre;
    m.f += s.f;
    m.degenerate = m.degenerate || s.degenerate;
  }
  const double n = static_cast<double>(v.size());
  m.re /= n;
  m.sp /= n;
  m.fnr /= n;
  m.pwc /= n;
  m.pre /= n;
  m.f /= n;
  return m;
}

}  // namespace dcp

#endif  // DCP_METRICS_HPP
