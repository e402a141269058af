// Moving square over a textured background: estimate the background, segment
// every frame and score both against the known truth.
#include <chrono>
#include <cstdio>
#include <string>

#include "dcp/metrics.hpp"
#include "dcp/pipeline.hpp"
#include "dcp/synthetic.hpp"

int main(int argc, char** argv) {
  dcp::SquareSceneSpec spec;
  dcp::PipelineConfig cfg;
  if (argc > 1) cfg = dcp::load_config(argv[1]);
  if (argc > 2) spec.frames = std::stoi(argv[2]);
  const dcp::SyntheticScene scene = dcp::make_square_scene(spec);
  dcp::FrameSequence seq{"square", scene.frames, {}};
  for (int t = 0; t < spec.frames; ++t) seq.indices.push_back(t + 1);

  const auto t0 = std::chrono::steady_clock::now();
  const dcp::BackgroundModel model = dcp::estimate_background(seq, cfg);
  const auto t1 = std::chrono::steady_clock::now();
  const auto masks = dcp::segment_video(seq, model, cfg);

  const dcp::BackgroundScores bg = dcp::background_metrics(model.image, scene.background, cfg.metric);
  const dcp::BackgroundScores raw =
      dcp::background_metrics(seq.frames[model.selected], scene.background, cfg.metric);
  double f = 0;
  for (size_t t = 0; t < masks.size(); ++t) f += dcp::segmentation_metrics(dcp::confusion(scene.masks[t], masks[t])).f;
  f /= static_cast<double>(masks.size());

  std::printf("selected frame %d, %zu task(s), %zu training steps\n", model.frame_index, model.tasks,
              model.history.size());
  if (!model.history.empty()) std::printf("final reconstruction loss %.5f\n", model.history.back().reconstruction);
  std::printf("AGE selected frame %.4f -> estimate %.4f (PSNR %.2f)\n", raw.age, bg.age, bg.psnr);
  std::printf("mean F %.4f\n", f);
  std::printf("estimate took %.1f s\n", std::chrono::duration<double>(t1 - t0).count());
  return 0;
}
