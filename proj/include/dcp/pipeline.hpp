#ifndef DCP_PIPELINE_HPP
#define DCP_PIPELINE_HPP

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcp/blend.hpp"
#include "dcp/dataio.hpp"
#include "dcp/error.hpp"
#include "dcp/flow.hpp"
#include "dcp/foreground.hpp"
#include "dcp/image.hpp"
#include "dcp/inpaint_net.hpp"
#include "dcp/masking.hpp"
#include "dcp/metrics.hpp"
#include "dcp/texture.hpp"
#include "dcp/version.hpp"

namespace dcp {

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::string input_pattern = "in%06d.jpg";

  FlowSettings flow;
  double mask_k = 1.0;
  int min_component = 9;

  int patch_size = 128;
  int harvest_stride = 16;
  int max_patches = 512;

  ArchDescriptor arch;  // input_side and channels follow patch_size and the video
  TrainConfig train;
  std::string checkpoint;  // start from this network instead of a fresh one

  TextureWeights texture;
  int texture_levels = 3;
  int feature_channels = 64;

  BlendParams blend;
  int blend_dilate = 2;

  ForegroundConfig fg;
  MetricSettings metric;
};

// ---------------------------------------------------------------------------
// key=value registry

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  require(ec == std::errc() && ptr == last, ErrorCode::InvalidArgument, "bad value '" + text + "' for " + key);
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true") return true;
  if (text == "0" || text == "false") return false;
  fail(ErrorCode::InvalidArgument, "bad boolean '" + text + "' for " + key);
}

inline std::vector<int> parse_ints(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  require(!out.empty(), ErrorCode::InvalidArgument, "empty list for " + key);
  return out;
}

inline std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string fmt(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

}  // namespace config_detail

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

inline const std::vector<ConfigKey>& config_keys() {
  using namespace config_detail;
  using C = PipelineConfig;
  auto num = [](std::string name, std::string help, auto member_ptr_fn) {
    using T = std::remove_reference_t<decltype(member_ptr_fn(std::declval<C&>()))>;
    return ConfigKey{
        name, std::move(help),
        [member_ptr_fn](const C& c) {
          const T& v = member_ptr_fn(const_cast<C&>(c));
          if constexpr (std::is_floating_point_v<T>) return fmt(v);
          else return std::to_string(v);
        },
        [member_ptr_fn, name](C& c, const std::string& s) { member_ptr_fn(c) = parse_number<T>(name, s); }};
  };
  auto flag = [](std::string name, std::string help, std::function<bool&(C&)> ref) {
    return ConfigKey{name, std::move(help), [ref](const C& c) { return std::string(ref(const_cast<C&>(c)) ? "1" : "0"); },
                     [ref, name](C& c, const std::string& s) { ref(c) = parse_bool(name, s); }};
  };
  auto ints = [](std::string name, std::string help, std::function<std::vector<int>&(C&)> ref) {
    return ConfigKey{name, std::move(help), [ref](const C& c) { return fmt(ref(const_cast<C&>(c))); },
                     [ref, name](C& c, const std::string& s) { ref(c) = parse_ints(name, s); }};
  };
  auto text = [](std::string name, std::string help, std::function<std::string&(C&)> ref) {
    return ConfigKey{name, std::move(help), [ref](const C& c) { return ref(const_cast<C&>(c)); },
                     [ref](C& c, const std::string& s) { ref(c) = s; }};
  };
  auto se = [](std::string name, std::string help, std::function<StructuringElement&(C&)> ref) {
    return ConfigKey{name, std::move(help), [ref](const C& c) { return ref(const_cast<C&>(c)).spec; },
                     [ref](C& c, const std::string& s) { ref(c) = StructuringElement::parse(s); }};
  };

  static const std::vector<ConfigKey> keys = {
      num("seed", "seed for training, sampling and the frozen feature stack", [](C& c) -> std::uint64_t& { return c.seed; }),
      text("input.pattern", "frame filename template", [](C& c) -> std::string& { return c.input_pattern; }),
      num("flow.levels", "optical flow pyramid levels", [](C& c) -> int& { return c.flow.levels; }),
      num("flow.smoothness", "flow smoothness weight", [](C& c) -> double& { return c.flow.smoothness; }),
      num("flow.iterations", "flow iterations per warp", [](C& c) -> int& { return c.flow.iterations; }),
      num("flow.warps", "flow warps per level", [](C& c) -> int& { return c.flow.warps; }),
      num("mask.k", "motion threshold scale on the mean flow magnitude", [](C& c) -> double& { return c.mask_k; }),
      num("mask.min_component", "smallest moving component in pixels", [](C& c) -> int& { return c.min_component; }),
      num("patch_size", "inpainting patch side (hole is half of it)", [](C& c) -> int& { return c.patch_size; }),
      num("harvest.stride", "grid stride for background training patches", [](C& c) -> int& { return c.harvest_stride; }),
      num("harvest.max_patches", "cap on training patches (seeded subsample)", [](C& c) -> int& { return c.max_patches; }),
      ints("arch.widths", "generator encoder widths", [](C& c) -> std::vector<int>& { return c.arch.encoder_widths; }),
      num("arch.latent", "latent channels", [](C& c) -> int& { return c.arch.latent_channels; }),
      ints("arch.disc_widths", "discriminator widths", [](C& c) -> std::vector<int>& { return c.arch.discriminator_widths; }),
      num("train.eta", "reconstruction weight in the joint loss", [](C& c) -> double& { return c.train.eta; }),
      num("train.epochs", "training epochs", [](C& c) -> int& { return c.train.epochs; }),
      num("train.batch", "mini-batch size", [](C& c) -> int& { return c.train.batch_size; }),
      num("train.lr_g", "generator learning rate", [](C& c) -> double& { return c.train.lr_generator; }),
      num("train.lr_d", "discriminator learning rate", [](C& c) -> double& { return c.train.lr_discriminator; }),
      num("train.beta1", "Adam beta1", [](C& c) -> double& { return c.train.beta1; }),
      text("train.checkpoint", "start from this checkpoint", [](C& c) -> std::string& { return c.checkpoint; }),
      num("texture.gamma", "texture energy weight", [](C& c) -> double& { return c.texture.gamma; }),
      num("texture.delta", "smoothness energy weight", [](C& c) -> double& { return c.texture.delta; }),
      num("texture.patch", "neural patch side", [](C& c) -> int& { return c.texture.patch; }),
      num("texture.levels", "refinement pyramid levels", [](C& c) -> int& { return c.texture_levels; }),
      num("texture.iterations", "descent iterations per level", [](C& c) -> int& { return c.texture.iterations; }),
      num("texture.reassign", "iterations between nearest-patch updates", [](C& c) -> int& { return c.texture.reassign_every; }),
      num("texture.window", "nearest-patch search radius in feature cells", [](C& c) -> int& { return c.texture.window; }),
      num("texture.depth", "feature stack depth", [](C& c) -> int& { return c.texture.depth; }),
      num("texture.channels", "feature stack width", [](C& c) -> int& { return c.feature_channels; }),
      num("blend.radius", "alpha ramp radius", [](C& c) -> int& { return c.blend.alpha_radius; }),
      num("blend.ring", "transition ring width", [](C& c) -> int& { return c.blend.ring; }),
      flag("blend.mixed", "mixed gradients in the first blend step", [](C& c) -> bool& { return c.blend.mixed_gradients; }),
      num("blend.dilate", "dilation of moving components before blending", [](C& c) -> int& { return c.blend_dilate; }),
      num("fg.tau", "foreground threshold in gray levels", [](C& c) -> double& { return c.fg.tau; }),
      flag("fg.otsu", "pick the threshold per frame with Otsu", [](C& c) -> bool& { return c.fg.otsu; }),
      se("fg.open_se", "opening element (square:N or disk:N)", [](C& c) -> StructuringElement& { return c.fg.open_se; }),
      se("fg.close_se", "closing element (square:N or disk:N)", [](C& c) -> StructuringElement& { return c.fg.close_se; }),
      num("fg.repeat", "open/close rounds", [](C& c) -> int& { return c.fg.repeat; }),
      num("metric.tau_e", "error threshold for pEPs/pCEPs", [](C& c) -> double& { return c.metric.error_threshold; }),
  };
  return keys;
}

inline const ConfigKey& config_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (k.name == name) return k;
  fail(ErrorCode::InvalidArgument, "unknown config key '" + name + "'");
}

inline void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  config_key(key).set(cfg, config_detail::trim(value));
}

/// Flag spelling of a key: "train.lr_g" -> "train-lr-g".
inline std::string config_flag(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '.', '-');
  std::replace(f.begin(), f.end(), '_', '-');
  return f;
}

/// Flat key=value text; '#' starts a comment.
inline void apply_config_text(PipelineConfig& cfg, const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::InvalidArgument,
            "config line " + std::to_string(lineno) + " is not key=value");
    set_config_value(cfg, config_detail::trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

inline PipelineConfig load_config(const fs::path& path, PipelineConfig base = {}) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::IoFailure, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(base, ss.str());
  return base;
}

/// Sorted key=value lines.
inline std::string canonical_config(const PipelineConfig& cfg) {
  std::map<std::string, std::string> kv;
  for (const auto& k : config_keys()) kv[k.name] = k.get(cfg);
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

/// FNV-1a 64 of the canonical text, as 16 hex digits.
inline std::string config_hash(const PipelineConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_config(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline void validate(const PipelineConfig& c) {
  auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::InvalidArgument, what); };
  check(c.flow.levels >= 1 && c.flow.iterations >= 1 && c.flow.warps >= 1 && c.flow.smoothness > 0,
        "flow settings out of range");
  check(c.mask_k > 0, "mask.k must be positive");
  check(c.min_component >= 1, "mask.min_component must be >= 1");
  check(c.patch_size >= 16 && c.patch_size % (4 << std::max(0, c.texture_levels - 1)) == 0,
        "patch_size must be >= 16 and divisible by 4 * 2^(texture.levels - 1)");
  check(c.harvest_stride >= 1 && c.max_patches >= 1, "harvest settings out of range");
  check(c.train.eta >= 0 && c.train.eta <= 1, "train.eta must lie in [0,1]");
  check(c.train.epochs >= 0 && c.train.batch_size >= 1, "train.epochs >= 0 and train.batch >= 1 required");
  check(c.train.lr_generator > 0 && c.train.lr_discriminator > 0, "learning rates must be positive");
  check(c.train.beta1 >= 0 && c.train.beta1 < 1, "train.beta1 must lie in [0,1)");
  check(c.texture.gamma >= 0 && c.texture.delta >= 0, "texture weights must be non-negative");
  check(c.texture.patch >= 1 && c.texture.patch % 2 == 1, "texture.patch must be odd");
  check(c.texture_levels >= 1 && c.texture.iterations >= 0 && c.texture.reassign_every >= 1 && c.texture.window >= 1,
        "texture settings out of range");
  check(c.texture.depth >= 1 && c.texture.depth <= FeatureStack::kMaxDepth, "texture.depth must be 1..5");
  check(c.feature_channels >= 1, "texture.channels must be positive");
  check(c.blend.alpha_radius >= 1 && c.blend.ring >= 1 && c.blend_dilate >= 0, "blend settings out of range");
  check(c.fg.tau >= 0 && c.fg.tau <= 255 && c.fg.repeat >= 0, "foreground settings out of range");
  check(c.metric.error_threshold >= 0, "metric.tau_e must be non-negative");
}

// ---------------------------------------------------------------------------
// Estimation

/// Tries the configured pattern, then the same pattern with .png/.jpg swapped.
inline FrameSequence load_video(const fs::path& dir, const PipelineConfig& cfg) {
  fs::path frames = dir;
  if (fs::is_directory(dir / "input")) frames = dir / "input";
  try {
    return load_sequence(frames, cfg.input_pattern);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::MissingFrames) throw;
    std::string alt = cfg.input_pattern;
    for (auto [from, to] : {std::pair<std::string, std::string>{".jpg", ".png"}, {".png", ".jpg"}})
      if (alt.size() > from.size() && alt.compare(alt.size() - from.size(), from.size(), from) == 0) {
        alt.replace(alt.size() - from.size(), from.size(), to);
        try {
          return load_sequence(frames, alt);
        } catch (const Error&) {
          throw e;
        }
      }
    throw;
  }
}

/// Motion mask per frame; the last frame is paired with its predecessor.
inline std::vector<MotionMask> motion_masks(const FrameSequence& seq, const PipelineConfig& cfg) {
  require(seq.size() >= 2, ErrorCode::MissingFrames, "need at least 2 frames");
  std::vector<MotionMask> masks;
  masks.reserve(seq.size());
  for (size_t t = 0; t < seq.size(); ++t) {
    const size_t other = t + 1 < seq.size() ? t + 1 : t - 1;
    const MagnitudeField mag = flow_magnitude(estimate_flow(seq.frames[t], seq.frames[other], cfg.flow));
    masks.push_back(build_motion_mask(mag, compute_threshold(mag, cfg.mask_k)));
  }
  return masks;
}

/// Background-only patches from every frame, subsampled to max_patches with the run seed.
inline std::vector<InpaintTask> harvest_training_set(const FrameSequence& seq, const std::vector<MotionMask>& masks,
                                                     const PipelineConfig& cfg) {
  std::vector<std::pair<size_t, Region>> spots;
  for (size_t t = 0; t < seq.size(); ++t)
    for (const InpaintTask& task :
         harvest_background_patches(Image(seq.frames[t].height, seq.frames[t].width, 1, 0.0), masks[t],
                                    cfg.patch_size, cfg.harvest_stride, static_cast<int>(t)))
      spots.push_back({t, {task.origin_row, task.origin_col, cfg.patch_size, cfg.patch_size}});
  if (spots.size() > static_cast<size_t>(cfg.max_patches)) {
    std::vector<size_t> idx(spots.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<size_t>(cfg.max_patches));
    std::sort(idx.begin(), idx.end());
    std::vector<std::pair<size_t, Region>> kept;
    for (size_t i : idx) kept.push_back(spots[i]);
    spots = std::move(kept);
  }
  std::vector<InpaintTask> out;
  out.reserve(spots.size());
  for (const auto& [t, r] : spots) {
    InpaintTask task = make_task(seq.frames[t], r.row, r.col, cfg.patch_size, seq.indices[t]);
    task.truth = crop(task.patch, task.hole);
    out.push_back(std::move(task));
  }
  return out;
}

inline ArchDescriptor resolved_arch(const PipelineConfig& cfg, int channels) {
  ArchDescriptor a = cfg.arch;
  a.input_side = cfg.patch_size;
  a.channels = channels;
  return a;
}

inline TrainConfig resolved_train(const PipelineConfig& cfg) {
  TrainConfig t = cfg.train;
  t.seed = cfg.seed;
  return t;
}

/// Scene-specific network: continues from the configured checkpoint (or a
/// fresh seeded one) for train.epochs over the harvested patches.
inline TrainResult train_scene(const FrameSequence& seq, const std::vector<MotionMask>& masks,
                               const PipelineConfig& cfg) {
  const ArchDescriptor arch = resolved_arch(cfg, seq.frames.front().channels);
  Network net;
  if (!cfg.checkpoint.empty()) {
    net = load_checkpoint(cfg.checkpoint);
    require(net.generator.arch == arch, ErrorCode::ArchMismatch,
            "checkpoint architecture does not match patch_size/arch settings");
  } else {
    net = init_network(arch, cfg.seed);
  }
  if (cfg.train.epochs == 0) {
    require(!cfg.checkpoint.empty(), ErrorCode::InvalidArgument, "train.epochs=0 needs train.checkpoint");
    return {std::move(net), {}};
  }
  const std::vector<InpaintTask> tasks = harvest_training_set(seq, masks, cfg);
  require(!tasks.empty(), ErrorCode::EmptyTrainingSet,
          "no background-only " + std::to_string(cfg.patch_size) + " px patch in " + seq.name);
  return train(std::move(net), tasks, resolved_train(cfg));
}

struct BackgroundModel {
  Image image;
  size_t selected = 0;       // position in the sequence
  int frame_index = 0;       // original frame number
  size_t tasks = 0;          // inpainted components
  std::string config_hash;
  std::vector<StepLosses> history;
  RegionMask changed;        // union of blend supports
};

/// Frame selection with fallback: frames in forward-difference order until one
/// yields valid inpainting tasks.
inline std::pair<size_t, std::vector<InpaintTask>> select_frame_tasks(const FrameSequence& seq,
                                                                      const std::vector<MotionMask>& masks,
                                                                      const PipelineConfig& cfg) {
  std::optional<Error> first;
  for (size_t t : rank_background_frames(seq)) {
    if (foreground_components(masks[t], cfg.min_component).empty()) return {t, {}};
    try {
      return {t, extract_inpaint_tasks(seq.frames[t], masks[t], cfg.patch_size, seq.indices[t], cfg.min_component)};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::OversizedObject) throw;
      if (!first) first = e;
    }
  }
  throw *first;
}

inline RegionMask blend_region(const InpaintTask& task, int height, int width, int dilate) {
  RegionMask m(height, width, 0);
  for (auto [r, c] : task.component->pixels) m.at(r, c) = 1;
  if (dilate > 0) m = dilate_disk(m, dilate);
  return m;
}

/// Fills one task into `image`: CE prediction, texture refinement, paste, blend.
inline RegionMask fill_task(Image& image, const InpaintTask& task, const Network& net, FeatureStack& stack,
                            const PipelineConfig& cfg) {
  const Image filled = inpaint_center(net.generator, task);
  const Image refined = refine(filled, task.hole, cfg.texture_levels, cfg.texture, stack).image;
  Image source = image;
  paste(source, refined, task.origin_row, task.origin_col);
  const RegionMask mask = blend_region(task, image.height, image.width, cfg.blend_dilate);
  try {
    BlendResult b = mpb_blend_detailed(source, image, mask, cfg.blend);
    image = std::move(b.image);
    return b.support;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::MaskTouchesBorder) throw;
    for (size_t i = 0; i < mask.values.size(); ++i)
      if (mask.values[i])
        for (int ch = 0; ch < image.channels; ++ch)
          image.values[i * static_cast<size_t>(image.channels) + static_cast<size_t>(ch)] =
              source.values[i * static_cast<size_t>(image.channels) + static_cast<size_t>(ch)];
    return mask;
  }
}

inline BackgroundModel estimate_background(const FrameSequence& seq, const PipelineConfig& cfg) {
  validate(cfg);
  const std::vector<MotionMask> masks = motion_masks(seq, cfg);
  auto [selected, tasks] = select_frame_tasks(seq, masks, cfg);

  BackgroundModel model;
  model.selected = selected;
  model.frame_index = seq.indices[selected];
  model.config_hash = config_hash(cfg);
  model.image = seq.frames[selected];
  model.changed = RegionMask(model.image.height, model.image.width, 0);
  model.tasks = tasks.size();
  if (tasks.empty()) return model;

  TrainResult trained = train_scene(seq, masks, cfg);
  model.history = std::move(trained.history);
  FeatureStack stack = FeatureStack::seeded(model.image.channels, cfg.feature_channels, cfg.seed);
  for (const InpaintTask& task : tasks) {
    const RegionMask support = fill_task(model.image, task, trained.network, stack, cfg);
    for (size_t i = 0; i < support.values.size(); ++i) model.changed.values[i] |= support.values[i];
  }
  return model;
}

inline std::vector<ForegroundMask> segment_video(const FrameSequence& seq, const Image& background,
                                                 const PipelineConfig& cfg) {
  require(!seq.frames.empty() && background.same_size(seq.frames.front()), ErrorCode::DimensionMismatch,
          "background differs in size from the frames");
  std::vector<ForegroundMask> out;
  out.reserve(seq.size());
  Image bg = background;
  if (bg.channels != seq.frames.front().channels) bg = to_luma(bg);
  for (const Image& frame : seq.frames)
    out.push_back(detect_foreground(bg, bg.channels == frame.channels ? frame : to_luma(frame), cfg.fg));
  return out;
}

inline std::vector<ForegroundMask> segment_video(const FrameSequence& seq, const BackgroundModel& model,
                                                 const PipelineConfig& cfg) {
  return segment_video(seq, model.image, cfg);
}

// ---------------------------------------------------------------------------
// Outputs

inline std::string mask_filename(int index) { return FilenamePattern::parse("fg%06d.png").format(index); }

inline void write_masks(const std::vector<ForegroundMask>& masks, const std::vector<int>& indices,
                        const fs::path& dir) {
  fs::create_directories(dir);
  for (size_t i = 0; i < masks.size(); ++i) write_mask(masks[i], dir / mask_filename(indices[i]));
}

inline nlohmann::json report_json(const ReportTable& table,
                                  const std::vector<std::pair<std::string, std::string>>& failures = {}) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::ordered_json r;
    nlohmann::json j;
    j[table.columns.front()] = row.label;
    for (size_t i = 0; i < row.values.size(); ++i)
      j[table.columns[i + 1]] = std::stod(format_fixed4(row.values[i]));
    rows.push_back(j);
  }
  nlohmann::json out;
  out["columns"] = table.columns;
  out["rows"] = rows;
  nlohmann::json f = nlohmann::json::array();
  for (const auto& [video, reason] : failures) f.push_back({{"video", video}, {"error", reason}});
  out["failures"] = f;
  return out;
}

inline void write_json(const nlohmann::json& j, const fs::path& path) { write_text(j.dump(2) + "\n", path); }

inline nlohmann::json manifest(const PipelineConfig& cfg, const std::string& command) {
  nlohmann::json m;
  m["tool"] = "dcp";
  m["version"] = kVersion;
  m["command"] = command;
  m["seed"] = cfg.seed;
  m["config_hash"] = config_hash(cfg);
  nlohmann::json c;
  for (const auto& k : config_keys()) c[k.name] = k.get(cfg);
  m["config"] = c;
  return m;
}

inline void write_manifest(const PipelineConfig& cfg, const std::string& command, const fs::path& dir,
                           const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json m = manifest(cfg, command);
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  write_json(m, dir / "manifest.json");
}

// ---------------------------------------------------------------------------
// Benchmark

enum class BenchmarkMode { Background, Segmentation };

inline BenchmarkMode parse_mode(const std::string& s) {
  if (s == "background") return BenchmarkMode::Background;
  if (s == "segmentation") return BenchmarkMode::Segmentation;
  fail(ErrorCode::InvalidArgument, "mode must be background or segmentation, got '" + s + "'");
}

inline std::string to_string(BenchmarkMode m) { return m == BenchmarkMode::Background ? "background" : "segmentation"; }

struct BenchmarkReport {
  ReportTable table;
  std::vector<std::pair<std::string, std::string>> failures;  // (category/video, reason)
};

inline std::vector<fs::path> sorted_subdirs(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

/// Per-video scores for <root>/<category>/<video>, then "<category>/mean" rows
/// and a final "mean" row (mean of the category means). Videos whose ground
/// truth is missing or unusable are listed as failures. Writes images, CSV,
/// JSON and a manifest under `out` when given.
inline BenchmarkReport run_benchmark(const fs::path& root, const PipelineConfig& cfg, BenchmarkMode mode,
                                     const std::optional<fs::path>& out = std::nullopt) {
  validate(cfg);
  std::error_code ec;
  require(fs::is_directory(root, ec), ErrorCode::MissingFrames, "dataset root not found: " + root.string());
  BenchmarkReport report;
  report.table.columns = {"video"};
  const auto& cols = mode == BenchmarkMode::Background ? background_columns() : segmentation_columns();
  report.table.columns.insert(report.table.columns.end(), cols.begin(), cols.end());

  std::vector<ReportTable::Row> category_means;
  for (const fs::path& cat : sorted_subdirs(root)) {
    std::vector<ReportTable::Row> rows;
    for (const fs::path& video : sorted_subdirs(cat)) {
      const std::string label = cat.filename().string() + "/" + video.filename().string();
      try {
        const GroundTruth gt = load_ground_truth(video / "GT", mode == BenchmarkMode::Background
                                                                 ? GroundTruthKind::BackgroundImage
                                                                 : GroundTruthKind::FrameMasks);
        const FrameSequence seq = load_video(video, cfg);
        const BackgroundModel model = estimate_background(seq, cfg);
        const fs::path vdir = out ? *out / cat.filename() / video.filename() : fs::path();
        if (out) {
          fs::create_directories(vdir);
          write_image(model.image, vdir / "background.png");
        }
        if (mode == BenchmarkMode::Background) {
          Image truth = *gt.background;
          require(truth.same_size(model.image), ErrorCode::DimensionMismatch,
                  "ground-truth background differs in size from the frames");
          Image est = model.image;
          if (truth.channels != est.channels) {
            truth = to_luma(truth);
            est = to_luma(est);
          }
          rows.push_back({label, background_metrics(est, truth, cfg.metric).values()});
        } else {
          const std::vector<ForegroundMask> masks = segment_video(seq, model, cfg);
          if (out) write_masks(masks, seq.indices, vdir / "masks");
          ConfusionCounts total;
          for (size_t i = 0; i < seq.size(); ++i) {
            auto it = gt.masks.find(seq.indices[i]);
            if (it != gt.masks.end()) total += confusion(it->second, masks[i]);
          }
          require(total.total() > 0, ErrorCode::MissingGroundTruth, "no ground-truth mask matches a frame index");
          rows.push_back({label, segmentation_metrics(total).values()});
        }
      } catch (const Error& e) {
        if (is_numerical(e.code())) throw;
        report.failures.push_back({label, e.what()});
      }
    }
    if (rows.empty()) continue;
    ReportTable::Row mean{cat.filename().string() + "/mean", std::vector<double>(cols.size(), 0.0)};
    for (const auto& r : rows)
      for (size_t i = 0; i < cols.size(); ++i) mean.values[i] += r.values[i] / static_cast<double>(rows.size());
    report.table.rows.insert(report.table.rows.end(), rows.begin(), rows.end());
    report.table.rows.push_back(mean);
    category_means.push_back(mean);
  }
  if (!category_means.empty()) {
    ReportTable::Row grand{"mean", std::vector<double>(cols.size(), 0.0)};
    for (const auto& r : category_means)
      for (size_t i = 0; i < cols.size(); ++i)
        grand.values[i] += r.values[i] / static_cast<double>(category_means.size());
    report.table.rows.push_back(grand);
  }
  if (out) {
    fs::create_directories(*out);
    write_report(report.table, *out / (to_string(mode) + ".csv"));
    write_json(report_json(report.table, report.failures), *out / (to_string(mode) + ".json"));
    write_manifest(cfg, "benchmark", *out, {{"mode", to_string(mode)}});
  }
  return report;
}

}  // namespace dcp

#endif  // DCP_PIPELINE_HPP
