// Command-line front end: estimate, segment, train, benchmark, metrics.
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dcp/pipeline.hpp"

namespace {

using namespace dcp;

struct Options {
  std::string config_file;
  fs::path out;  // empty: dcp_out, except for metrics which then only prints
  std::map<std::string, std::string> overrides;  // key -> raw value from flags
};

fs::path out_dir(const Options& o) { return o.out.empty() ? fs::path("dcp_out") : o.out; }

PipelineConfig resolve(const Options& o) {
  PipelineConfig cfg = o.config_file.empty() ? PipelineConfig{} : load_config(o.config_file);
  for (const auto& [key, value] : o.overrides) set_config_value(cfg, key, value);
  validate(cfg);
  return cfg;
}

void print_row(const ReportTable& t) {
  std::cout << to_csv(t);
}

int run_estimate(const Options& o, const fs::path& video, const std::string& command) {
  const PipelineConfig cfg = resolve(o);
  const FrameSequence seq = load_video(video, cfg);
  const BackgroundModel model = estimate_background(seq, cfg);
  fs::create_directories(out_dir(o));
  write_image(model.image, out_dir(o) / "background.png");
  nlohmann::json extra;
  extra["video"] = seq.name;
  extra["selected_frame"] = model.frame_index;
  extra["tasks"] = model.tasks;
  extra["training_steps"] = model.history.size();
  write_manifest(cfg, command, out_dir(o), extra);
  std::cout << "background " << (out_dir(o) / "background.png").string() << " (frame " << model.frame_index << ", "
            << model.tasks << " region(s) filled)\n";
  return 0;
}

int run_segment(const Options& o, const fs::path& video, const fs::path& background) {
  const PipelineConfig cfg = resolve(o);
  const FrameSequence seq = load_video(video, cfg);
  const Image bg = read_image(background);
  const auto masks = segment_video(seq, bg, cfg);
  write_masks(masks, seq.indices, out_dir(o) / "masks");
  write_manifest(cfg, "segment", out_dir(o), {{"video", seq.name}, {"frames", seq.size()}});
  std::cout << masks.size() << " mask(s) in " << (out_dir(o) / "masks").string() << "\n";
  return 0;
}

int run_train(const Options& o, const fs::path& video) {
  const PipelineConfig cfg = resolve(o);
  const FrameSequence seq = load_video(video, cfg);
  const auto masks = motion_masks(seq, cfg);
  TrainResult res = train_scene(seq, masks, cfg);
  fs::create_directories(out_dir(o));
  save_checkpoint(res.network, out_dir(o) / "model.ckpt");
  ReportTable hist;
  hist.columns = {"step", "L_rec", "L_adv", "L_joint", "L_D", "L_G"};
  for (size_t i = 0; i < res.history.size(); ++i) {
    const StepLosses& s = res.history[i];
    hist.rows.push_back({std::to_string(i), {s.reconstruction, s.adversarial, s.joint, s.discriminator, s.generator}});
  }
  write_report(hist, out_dir(o) / "history.csv");
  write_manifest(cfg, "train", out_dir(o), {{"video", seq.name}, {"training_steps", res.history.size()}});
  std::cout << "checkpoint " << (out_dir(o) / "model.ckpt").string() << " after " << res.history.size() << " step(s)";
  if (!res.history.empty()) std::printf(", final L_rec %.6f", res.history.back().reconstruction);
  std::cout << "\n";
  return 0;
}

int run_benchmark_cmd(const Options& o, const fs::path& root, const std::string& mode_text) {
  const PipelineConfig cfg = resolve(o);
  const BenchmarkMode mode = parse_mode(mode_text);
  const BenchmarkReport rep = run_benchmark(root, cfg, mode, out_dir(o));
  print_row(rep.table);
  for (const auto& [video, reason] : rep.failures) std::cerr << "skipped " << video << ": " << reason << "\n";
  return 0;
}

/// Two images: background scores. Two directories: fg%06d.png against gt%06d.png.
int run_metrics(const Options& o, const fs::path& est, const fs::path& gt) {
  const PipelineConfig cfg = resolve(o);
  ReportTable table;
  table.columns = {"video"};
  if (fs::is_directory(est)) {
    const GroundTruth truth = load_ground_truth(gt, GroundTruthKind::FrameMasks);
    const FilenamePattern fp = FilenamePattern::parse("fg%06d.png");
    ConfusionCounts total;
    for (const auto& [idx, mask] : truth.masks) {
      const fs::path p = est / fp.format(idx);
      if (fs::exists(p)) total += confusion(mask, read_mask(p));
    }
    require(total.total() > 0, ErrorCode::MissingGroundTruth, "no estimated mask matches a ground-truth index");
    const auto& cols = segmentation_columns();
    table.columns.insert(table.columns.end(), cols.begin(), cols.end());
    table.rows.push_back({est.filename().string(), segmentation_metrics(total).values()});
  } else {
    Image a = read_image(est);
    const GroundTruth truth = load_ground_truth(gt, GroundTruthKind::BackgroundImage);
    Image b = *truth.background;
    if (a.channels != b.channels) {
      a = to_luma(a);
      b = to_luma(b);
    }
    const auto& cols = background_columns();
    table.columns.insert(table.columns.end(), cols.begin(), cols.end());
    table.rows.push_back({est.filename().string(), background_metrics(a, b, cfg.metric).values()});
  }
  print_row(table);
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_report(table, o.out / "metrics.csv");
    write_json(report_json(table), o.out / "metrics.json");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Background estimation and foreground segmentation for video"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dcp::kVersion));
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_file, "key=value config file")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory");
    for (const auto& key : dcp::config_keys()) {
      const std::string name = key.name;
      sub->add_option_function<std::string>(
             "--" + dcp::config_flag(name), [&opt, name](const std::string& v) { opt.overrides[name] = v; },
             key.help + " [" + name + "]")
          ->type_name("VALUE");
    }
  };

  std::string video, background, root, mode, est, gt;

  CLI::App* estimate = app.add_subcommand("estimate", "estimate the background of a video");
  estimate->add_option("video_dir", video, "video directory (frames or an input/ subdirectory)")->required();
  add_common(estimate);

  CLI::App* segment = app.add_subcommand("segment", "foreground masks against a background image");
  segment->add_option("video_dir", video)->required();
  segment->add_option("--background", background, "background PNG")->required()->check(CLI::ExistingFile);
  add_common(segment);

  CLI::App* train = app.add_subcommand("train", "train the scene inpainting network and write a checkpoint");
  train->add_option("video_dir", video)->required();
  add_common(train);

  CLI::App* bench = app.add_subcommand("benchmark", "score every <category>/<video> under a dataset root");
  bench->add_option("root", root)->required();
  bench->add_option("--mode", mode, "background or segmentation")
      ->required()
      ->check(CLI::IsMember({"background", "segmentation"}));
  add_common(bench);

  CLI::App* metrics = app.add_subcommand("metrics", "score an estimate against ground truth");
  metrics->add_option("est", est, "background image or directory of fg%06d.png masks")->required();
  metrics->add_option("gt", gt, "background image or directory of gt%06d.png masks")->required();
  add_common(metrics);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*estimate) return run_estimate(opt, video, "estimate");
    if (*segment) return run_segment(opt, video, background);
    if (*train) return run_train(opt, video);
    if (*bench) return run_benchmark_cmd(opt, root, mode);
    if (*metrics) return run_metrics(opt, est, gt);
  } catch (const dcp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return dcp::is_numerical(e.code()) ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
