#ifndef DCP_SYNTHETIC_HPP
#define DCP_SYNTHETIC_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "dcp/dataio.hpp"
#include "dcp/image.hpp"

namespace dcp {

/// Known-truth scene: a textured static background and a square moving over it.
struct SyntheticScene {
  Image background;
  std::vector<Image> frames;
  std::vector<ForegroundMask> masks;  // square footprint per frame
};

struct SquareSceneSpec {
  int height = 120;
  int width = 160;
  int channels = 3;
  int frames = 60;
  int side = 20;
  double speed = 2.0;     // pixels per frame along each axis, bouncing off the borders
  int margin = 30;        // square stays this far from the border
  int texture_terms = 5;
  int texture_freq = 4;   // cycles across the frame
  double amplitude = 0.3;
  std::array<double, 3> color{0.95, 0.95, 0.15};
  std::uint64_t seed = 1;
};

/// Smooth multi-cosine texture around mid-gray.
inline Image cosine_texture(int height, int width, int channels, std::uint64_t seed, int terms, int max_freq,
                            double amplitude) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> freq(-max_freq, max_freq);
  std::uniform_real_distribution<double> phase(0.0, 2 * M_PI);
  Image img(height, width, channels);
  for (int ch = 0; ch < channels; ++ch) {
    std::vector<std::array<double, 3>> waves;
    while (static_cast<int>(waves.size()) < terms) {
      const int fx = freq(rng), fy = freq(rng);
      if (fx == 0 && fy == 0) continue;
      waves.push_back({static_cast<double>(fx), static_cast<double>(fy), phase(rng)});
    }
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c) {
        double s = 0;
        for (const auto& w : waves) s += std::cos(2 * M_PI * (w[0] * c / width + w[1] * r / height) + w[2]);
        img.at(r, c, ch) = 0.5 + amplitude * s / terms;
      }
  }
  return img;
}

/// Values are quantized to 8 bits so that a PNG round trip is lossless.
inline SyntheticScene make_square_scene(const SquareSceneSpec& s) {
  require(s.side >= 1 && s.height >= s.side + 2 * s.margin && s.width >= s.side + 2 * s.margin && s.frames >= 1,
          ErrorCode::InvalidArgument, "square scene does not fit the frame");
  SyntheticScene scene;
  scene.background = cosine_texture(s.height, s.width, s.channels, s.seed, s.texture_terms, s.texture_freq,
                                    s.amplitude);
  for (double& v : scene.background.values) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;

  const double lo_r = s.margin, hi_r = s.height - s.margin - s.side;
  const double lo_c = s.margin, hi_c = s.width - s.margin - s.side;
  auto bounce = [](double x, double lo, double hi) {
    const double span = hi - lo;
    if (span <= 0) return lo;
    double t = std::fmod(x - lo, 2 * span);
    if (t < 0) t += 2 * span;
    return lo + (t <= span ? t : 2 * span - t);
  };
  for (int t = 0; t < s.frames; ++t) {
    const int r0 = static_cast<int>(std::lround(bounce(lo_r + s.speed * 0.5 * t, lo_r, hi_r)));
    const int c0 = static_cast<int>(std::lround(bounce(lo_c + s.speed * t, lo_c, hi_c)));
    Image frame = scene.background;
    ForegroundMask mask(s.height, s.width, 0);
    for (int r = r0; r < r0 + s.side; ++r)
      for (int c = c0; c < c0 + s.side; ++c) {
        mask.at(r, c) = 1;
        for (int ch = 0; ch < s.channels; ++ch)
          frame.at(r, c, ch) = std::round(s.color[static_cast<size_t>(s.channels == 1 ? 0 : ch)] * 255.0) / 255.0;
      }
    scene.frames.push_back(std::move(frame));
    scene.masks.push_back(std::move(mask));
  }
  return scene;
}

/// Writes <dir>/input/in%06d.png (1-based) and <dir>/GT/ holding either the
/// background image or gt%06d.png masks.
inline void write_scene(const SyntheticScene& scene, const fs::path& dir, bool background_truth) {
  fs::create_directories(dir / "input");
  fs::create_directories(dir / "GT");
  const FilenamePattern in = FilenamePattern::parse("in%06d.png"), gt = FilenamePattern::parse("gt%06d.png");
  for (size_t t = 0; t < scene.frames.size(); ++t) {
    write_image(scene.frames[t], dir / "input" / in.format(static_cast<int>(t) + 1));
    if (!background_truth) write_mask(scene.masks[t], dir / "GT" / gt.format(static_cast<int>(t) + 1));
  }
  if (background_truth) write_image(scene.background, dir / "GT" / "background.png");
}

}  // namespace dcp

#endif  // DCP_SYNTHETIC_HPP
