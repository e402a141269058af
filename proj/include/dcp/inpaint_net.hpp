#ifndef DCP_INPAINT_NET_HPP
#define DCP_INPAINT_NET_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcp/error.hpp"
#include "dcp/image.hpp"
#include "dcp/masking.hpp"
#include "dcp/nn.hpp"

namespace dcp {

/// Encoder–decoder geometry. The encoder applies one stride-2 convolution per
/// entry of `encoder_widths` plus a final stride-2 convolution to
/// `latent_channels`; the decoder mirrors it with transposed convolutions back
/// to half the input side.
struct ArchDescriptor {
  int input_side = 128;
  int channels = 3;
  std::vector<int> encoder_widths{32, 64, 128, 256};
  int latent_channels = 64;
  int encoder_kernel = 4;  // stride 2, pad 1
  int decoder_kernel = 4;  // stride 2
  int decoder_pad = 1;
  std::vector<int> discriminator_widths{32, 64};

  int hole_side() const { return input_side / 2; }

  friend bool operator==(const ArchDescriptor&, const ArchDescriptor&) = default;
};

inline void to_json(nlohmann::json& j, const ArchDescriptor& a) {
  j = {{"input_side", a.input_side},         {"channels", a.channels},
       {"encoder_widths", a.encoder_widths}, {"latent_channels", a.latent_channels},
       {"encoder_kernel", a.encoder_kernel}, {"decoder_kernel", a.decoder_kernel},
       {"decoder_pad", a.decoder_pad},       {"discriminator_widths", a.discriminator_widths}};
}

inline void from_json(const nlohmann::json& j, ArchDescriptor& a) {
  j.at("input_side").get_to(a.input_side);
  j.at("channels").get_to(a.channels);
  j.at("encoder_widths").get_to(a.encoder_widths);
  j.at("latent_channels").get_to(a.latent_channels);
  j.at("encoder_kernel").get_to(a.encoder_kernel);
  j.at("decoder_kernel").get_to(a.decoder_kernel);
  j.at("decoder_pad").get_to(a.decoder_pad);
  j.at("discriminator_widths").get_to(a.discriminator_widths);
}

struct GeneratorParams {
  ArchDescriptor arch;
  std::vector<nn::Conv2d> encoder;  // last entry produces the latent code
  std::vector<nn::ConvTranspose2d> decoder;

  std::vector<nn::Param*> params() {
    std::vector<nn::Param*> out;
    for (auto& l : encoder) out.insert(out.end(), {&l.weight, &l.bias});
    for (auto& l : decoder) out.insert(out.end(), {&l.weight, &l.bias});
    return out;
  }
};

struct DiscriminatorParams {
  std::vector<nn::Conv2d> layers;  // last layer maps to one logit channel

  std::vector<nn::Param*> params() {
    std::vector<nn::Param*> out;
    for (auto& l : layers) out.insert(out.end(), {&l.weight, &l.bias});
    return out;
  }
};

struct Network {
  GeneratorParams generator;
  DiscriminatorParams discriminator;
  std::uint64_t seed = 0;
};

namespace inpaint_detail {

inline void arch_check(bool ok, const std::string& what) { require(ok, ErrorCode::ArchMismatch, what); }

}  // namespace inpaint_detail

/// Builds seeded weights and checks the generator maps input_side to input_side / 2.
inline Network init_network(const ArchDescriptor& arch, std::uint64_t seed) {
  using inpaint_detail::arch_check;
  arch_check(arch.input_side >= 4 && arch.input_side % 4 == 0, "input side must be divisible by 4");
  arch_check(arch.channels == 1 || arch.channels == 3, "channels must be 1 or 3");
  arch_check(!arch.encoder_widths.empty(), "encoder needs at least one layer");
  arch_check(arch.latent_channels >= 1, "latent channels must be positive");
  arch_check(arch.discriminator_widths.size() == 2, "discriminator takes exactly two widths");

  Network net;
  net.seed = seed;
  net.generator.arch = arch;
  std::mt19937_64 rng(seed);

  int side = arch.input_side;
  int in_c = arch.channels;
  std::vector<int> widths = arch.encoder_widths;
  widths.push_back(arch.latent_channels);
  for (int w : widths) {
    nn::Conv2d conv(in_c, w, arch.encoder_kernel, 2, (arch.encoder_kernel - 2) / 2);
    arch_check(conv.valid_for(side) && conv.out_size(side) >= 1,
               "encoder cannot downsample side " + std::to_string(side));
    side = conv.out_size(side);
    conv.init(rng);
    net.generator.encoder.push_back(std::move(conv));
    in_c = w;
  }

  // decoder channels: latent -> widths[n-1] -> ... -> widths[1] -> channels
  std::vector<int> dec_out(arch.encoder_widths.rbegin(), arch.encoder_widths.rend() - 1);
  dec_out.push_back(arch.channels);
  for (int w : dec_out) {
    nn::ConvTranspose2d up(in_c, w, arch.decoder_kernel, 2, arch.decoder_pad);
    side = up.out_size(side);
    arch_check(side >= 1, "decoder collapses to nothing");
    up.init(rng);
    net.generator.decoder.push_back(std::move(up));
    in_c = w;
  }
  arch_check(side == arch.hole_side(), "generator output side " + std::to_string(side) + " != hole side " +
                                           std::to_string(arch.hole_side()));

  const int hole = arch.hole_side();
  nn::Conv2d d0(arch.channels, arch.discriminator_widths[0], 4, 2, 1);
  nn::Conv2d d1(arch.discriminator_widths[0], arch.discriminator_widths[1], 4, 2, 1);
  nn::Conv2d d2(arch.discriminator_widths[1], 1, 3, 1, 1);
  arch_check(d0.valid_for(hole) && d1.valid_for(d0.out_size(hole)) && d1.out_size(d0.out_size(hole)) >= 1,
             "hole side " + std::to_string(hole) + " too small for the discriminator");
  for (auto* l : {&d0, &d1, &d2}) l->init(rng);
  net.discriminator.layers = {std::move(d0), std::move(d1), std::move(d2)};
  return net;
}

/// Activations kept for the backward pass.
struct GeneratorTrace {
  std::vector<nn::Tensor> inputs;  // input of every layer, encoder then decoder
  std::vector<nn::Tensor> pre;     // pre-activation of every layer
  nn::Tensor output;               // sigmoid output
};

inline GeneratorTrace generator_trace(const GeneratorParams& g, const nn::Tensor& x) {
  GeneratorTrace t;
  nn::Tensor a = x;
  for (const auto& l : g.encoder) {
    t.inputs.push_back(a);
    t.pre.push_back(l.forward(a));
    a = nn::leaky_relu(t.pre.back());
  }
  for (size_t i = 0; i < g.decoder.size(); ++i) {
    t.inputs.push_back(a);
    t.pre.push_back(g.decoder[i].forward(a));
    a = i + 1 == g.decoder.size() ? nn::sigmoid(t.pre.back()) : nn::leaky_relu(t.pre.back());
  }
  t.output = std::move(a);
  return t;
}

/// Accumulates generator gradients given dL/d(output).
inline void generator_backward(GeneratorParams& g, const GeneratorTrace& t, nn::Tensor d_out) {
  const size_t ne = g.encoder.size(), nd = g.decoder.size();
  nn::Tensor d = nn::sigmoid_backward(t.output, std::move(d_out));
  for (size_t i = nd; i-- > 0;) {
    if (i + 1 != nd) d = nn::leaky_relu_backward(t.pre[ne + i], std::move(d));
    d = g.decoder[i].backward(t.inputs[ne + i], d);
  }
  for (size_t i = ne; i-- > 0;) {
    d = nn::leaky_relu_backward(t.pre[i], std::move(d));
    d = g.encoder[i].backward(t.inputs[i], d, true);
  }
}

inline void require_generator_input(const GeneratorParams& g, const Image& x) {
  require(x.height == g.arch.input_side && x.width == g.arch.input_side && x.channels == g.arch.channels,
          ErrorCode::DimensionMismatch,
          "generator expects " + std::to_string(g.arch.input_side) + "x" + std::to_string(g.arch.input_side) + "x" +
              std::to_string(g.arch.channels) + ", got " + std::to_string(x.height) + "x" +
              std::to_string(x.width) + "x" + std::to_string(x.channels));
}

/// F(x_m): predicted hole content, values in [0,1].
inline Image generator_forward(const GeneratorParams& g, const Image& masked) {
  require_generator_input(g, masked);
  return nn::to_image(generator_trace(g, nn::from_image(masked)).output);
}

struct DiscriminatorTrace {
  std::vector<nn::Tensor> inputs;
  std::vector<nn::Tensor> pre;
  double prob = 0.5;
};

inline DiscriminatorTrace discriminator_trace(const DiscriminatorParams& d, const nn::Tensor& x) {
  DiscriminatorTrace t;
  nn::Tensor a = x;
  for (size_t i = 0; i < d.layers.size(); ++i) {
    t.inputs.push_back(a);
    t.pre.push_back(d.layers[i].forward(a));
    if (i + 1 < d.layers.size()) a = nn::leaky_relu(t.pre.back());
  }
  const nn::Tensor& logits = t.pre.back();
  const double mean = std::accumulate(logits.v.begin(), logits.v.end(), 0.0) / static_cast<double>(logits.size());
  t.prob = nn::sigmoid(mean);
  return t;
}

/// Backward from dL/d(prob); parameter gradients only when `accumulate`.
inline nn::Tensor discriminator_backward(DiscriminatorParams& d, const DiscriminatorTrace& t, double d_prob,
                                         bool accumulate) {
  const double d_mean = d_prob * t.prob * (1.0 - t.prob);
  const nn::Tensor& logits = t.pre.back();
  nn::Tensor g(logits.c, logits.h, logits.w, d_mean / static_cast<double>(logits.size()));
  for (size_t i = d.layers.size(); i-- > 0;) {
    if (i + 1 < d.layers.size()) g = nn::leaky_relu_backward(t.pre[i], std::move(g));
    g = d.layers[i].backward(t.inputs[i], g, accumulate);
  }
  return g;
}

inline double discriminator_forward(const DiscriminatorParams& d, const Image& hole) {
  return discriminator_trace(d, nn::from_image(hole)).prob;
}

constexpr double kProbClamp = 1e-7;

inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

/// Mean squared difference over all hole elements.
inline double reconstruction_loss(const Image& pred, const Image& truth) {
  require_same_shape(pred, truth, "reconstruction_loss");
  double s = 0;
  for (size_t i = 0; i < pred.values.size(); ++i) {
    const double d = pred.values[i] - truth.values[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.values.size());
}

/// log D(real) + log(1 - D(fake)) for one pair of discriminator outputs.
inline double adversarial_objective(double d_real, double d_fake) {
  return std::log(clamp_prob(d_real)) + std::log(1.0 - clamp_prob(d_fake));
}

/// Batch mean of log D(real) + log(1 - D(fake)).
inline double adversarial_loss(const DiscriminatorParams& d, const std::vector<Image>& real,
                               const std::vector<Image>& fake) {
  require(real.size() == fake.size() && !real.empty(), ErrorCode::DimensionMismatch,
          "adversarial_loss needs equally sized non-empty batches");
  double s = 0;
  for (size_t i = 0; i < real.size(); ++i)
    s += adversarial_objective(discriminator_forward(d, real[i]), discriminator_forward(d, fake[i]));
  return s / static_cast<double>(real.size());
}

inline double joint_loss(double l_rec, double l_adv, double eta) {
  require(eta >= 0.0 && eta <= 1.0, ErrorCode::InvalidArgument, "eta must lie in [0,1]");
  return eta * l_rec + (1.0 - eta) * l_adv;
}

struct TrainConfig {
  double eta = 0.999;
  int epochs = 3;
  int batch_size = 8;
  double lr_generator = 2e-4;
  double lr_discriminator = 2e-4;
  double beta1 = 0.5;
  std::uint64_t seed = 0;
};

/// A masked input x_m paired with its known hole content.
struct TrainingSample {
  Image masked;
  Image truth;
};

inline TrainingSample to_sample(const InpaintTask& task) {
  require(task.truth.has_value(), ErrorCode::EmptyTrainingSet, "task has no hole truth");
  return {task.masked(), *task.truth};
}

/// Generator objective  eta * L_rec + (1 - eta) * (-log D(F(x_m)))  averaged over
/// the batch; when `accumulate` is set its gradient is added to g's params.
inline double generator_objective(GeneratorParams& g, DiscriminatorParams& d,
                                  const std::vector<const TrainingSample*>& batch, double eta, bool accumulate,
                                  double* rec_out = nullptr) {
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double total = 0, rec_total = 0;
  for (const TrainingSample* s : batch) {
    const GeneratorTrace t = generator_trace(g, nn::from_image(s->masked));
    const nn::Tensor truth = nn::from_image(s->truth);
    require(truth.same_shape(t.output), ErrorCode::DimensionMismatch, "hole truth differs from generator output");
    const double n = static_cast<double>(truth.size());
    double rec = 0;
    nn::Tensor d_out(t.output.c, t.output.h, t.output.w);
    for (size_t i = 0; i < truth.size(); ++i) {
      const double diff = t.output.v[i] - truth.v[i];
      rec += diff * diff;
      d_out.v[i] = eta * 2.0 * diff / n * inv_b;
    }
    rec /= n;
    rec_total += rec;
    double adv = 0;
    if (eta < 1.0) {
      const DiscriminatorTrace dt = discriminator_trace(d, t.output);
      const double p = clamp_prob(dt.prob);
      adv = -std::log(p);
      if (accumulate && dt.prob == p) {
        const nn::Tensor g_adv = discriminator_backward(d, dt, -(1.0 - eta) / p * inv_b, false);
        for (size_t i = 0; i < d_out.size(); ++i) d_out.v[i] += g_adv.v[i];
      }
    }
    total += eta * rec + (1.0 - eta) * adv;
    if (accumulate) generator_backward(g, t, std::move(d_out));
  }
  if (rec_out) *rec_out = rec_total * inv_b;
  return total * inv_b;
}

/// Discriminator loss  -mean[log D(real) + log(1 - D(fake))]; gradients into d when `accumulate`.
/// Returns the loss; `adv_out` receives log D(real) + log(1 - D(fake)), its negation.
inline double discriminator_objective(DiscriminatorParams& d, const std::vector<Image>& real,
                                      const std::vector<Image>& fake, bool accumulate, double* adv_out = nullptr) {
  const double inv_b = 1.0 / static_cast<double>(real.size());
  double adv = 0;
  for (size_t i = 0; i < real.size(); ++i) {
    const DiscriminatorTrace tr = discriminator_trace(d, nn::from_image(real[i]));
    const DiscriminatorTrace tf = discriminator_trace(d, nn::from_image(fake[i]));
    adv += adversarial_objective(tr.prob, tf.prob);
    if (!accumulate) continue;
    if (tr.prob == clamp_prob(tr.prob)) discriminator_backward(d, tr, -inv_b / tr.prob, true);
    if (tf.prob == clamp_prob(tf.prob)) discriminator_backward(d, tf, inv_b / (1.0 - tf.prob), true);
  }
  adv *= inv_b;
  if (adv_out) *adv_out = adv;
  return -adv;
}

struct StepLosses {
  double reconstruction = 0;  // mean squared hole error, batch mean
  double adversarial = 0;     // log D(real) + log(1 - D(fake)), batch mean
  double joint = 0;           // eta * reconstruction + (1 - eta) * adversarial
  double discriminator = 0;   // loss minimized by D
  double generator = 0;       // loss minimized by F (non-saturating adversarial term)

  friend bool operator==(const StepLosses&, const StepLosses&) = default;
};

struct TrainResult {
  Network network;
  std::vector<StepLosses> history;
};

/// Alternating discriminator / generator updates over shuffled mini-batches,
/// continuing from `net`.
inline TrainResult train(Network net, const std::vector<InpaintTask>& tasks, const TrainConfig& cfg) {
  require(!tasks.empty(), ErrorCode::EmptyTrainingSet, "no training tasks");
  require(cfg.epochs >= 1 && cfg.batch_size >= 1, ErrorCode::InvalidArgument, "epochs and batch size must be >= 1");
  require(cfg.eta >= 0 && cfg.eta <= 1, ErrorCode::InvalidArgument, "eta must lie in [0,1]");

  std::vector<TrainingSample> samples;
  samples.reserve(tasks.size());
  for (const auto& t : tasks) {
    samples.push_back(to_sample(t));
    require_generator_input(net.generator, samples.back().masked);
  }

  GeneratorParams& g = net.generator;
  DiscriminatorParams& d = net.discriminator;
  const auto gp = g.params();
  const auto dp = d.params();
  nn::Adam opt_g(cfg.lr_generator, cfg.beta1), opt_d(cfg.lr_discriminator, cfg.beta1);
  std::mt19937_64 rng(cfg.seed);

  TrainResult result;
  std::vector<size_t> order(samples.size());
  std::iota(order.begin(), order.end(), size_t{0});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<const TrainingSample*> batch;
      std::vector<Image> real, fake;
      for (size_t i = start; i < end; ++i) {
        const TrainingSample& s = samples[order[i]];
        batch.push_back(&s);
        real.push_back(s.truth);
        fake.push_back(generator_forward(g, s.masked));
      }

      StepLosses step;
      nn::zero_grads(dp);
      step.discriminator = discriminator_objective(d, real, fake, true, &step.adversarial);
      opt_d.step(dp);

      nn::zero_grads(gp);
      step.generator = generator_objective(g, d, batch, cfg.eta, true, &step.reconstruction);
      opt_g.step(gp);

      step.joint = joint_loss(step.reconstruction, step.adversarial, cfg.eta);
      require(std::isfinite(step.joint) && std::isfinite(step.generator) && std::isfinite(step.discriminator),
              ErrorCode::DivergedLoss, "non-finite loss at step " + std::to_string(result.history.size()));
      result.history.push_back(step);
    }
  }
  result.network = std::move(net);
  return result;
}

inline TrainResult train(const std::vector<InpaintTask>& tasks, const TrainConfig& cfg, const ArchDescriptor& arch) {
  return train(init_network(arch, cfg.seed), tasks, cfg);
}

/// The full patch with its hole replaced by F(x_m).
inline Image inpaint_center(const GeneratorParams& g, const InpaintTask& task) {
  require(task.side() == g.arch.input_side && task.hole.height == g.arch.hole_side() &&
              task.hole.width == g.arch.hole_side(),
          ErrorCode::DimensionMismatch, "task geometry does not match the network");
  const Image fill = generator_forward(g, task.masked());
  Image out = task.patch;
  paste(out, fill, task.hole.row, task.hole.col);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: "dcp-ckpt-v1\n", one line of JSON describing the tensors, then
// the raw little-endian doubles in that order.

inline constexpr const char* kCheckpointMagic = "dcp-ckpt-v1";

inline void save_checkpoint(Network& net, const std::filesystem::path& path) {
  nlohmann::json header;
  header["arch"] = net.generator.arch;
  header["seed"] = net.seed;
  nlohmann::json tensors = nlohmann::json::array();
  std::vector<nn::Param*> all = net.generator.params();
  const auto dparams = net.discriminator.params();
  all.insert(all.end(), dparams.begin(), dparams.end());
  for (size_t i = 0; i < all.size(); ++i) {
    const bool gen = i < net.generator.params().size();
    tensors.push_back({{"name", std::string(gen ? "generator." : "discriminator.") + std::to_string(i)},
                       {"size", all[i]->value.size()}});
  }
  header["tensors"] = tensors;

  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::IoFailure, "cannot open " + path.string());
  out << kCheckpointMagic << '\n' << header.dump() << '\n';
  for (const nn::Param* p : all)
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  require(static_cast<bool>(out), ErrorCode::IoFailure, "write failed: " + path.string());
}

inline Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::IoFailure, "cannot open " + path.string());
  std::string magic, line;
  std::getline(in, magic);
  require(magic == kCheckpointMagic, ErrorCode::DecodeFailure, "not a dcp checkpoint: " + path.string());
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::DecodeFailure, std::string("bad checkpoint header: ") + e.what());
  }
  Network net = init_network(header.at("arch").get<ArchDescriptor>(), header.at("seed").get<std::uint64_t>());
  std::vector<nn::Param*> all = net.generator.params();
  const auto dparams = net.discriminator.params();
  all.insert(all.end(), dparams.begin(), dparams.end());
  const auto& tensors = header.at("tensors");
  require(tensors.size() == all.size(), ErrorCode::DecodeFailure, "checkpoint tensor count mismatch");
  for (size_t i = 0; i < all.size(); ++i) {
    require(tensors[i].at("size").get<size_t>() == all[i]->value.size(), ErrorCode::DecodeFailure,
            "checkpoint tensor size mismatch");
    in.read(reinterpret_cast<char*>(all[i]->value.data()),
            static_cast<std::streamsize>(all[i]->value.size() * sizeof(double)));
  }
  require(static_cast<bool>(in), ErrorCode::DecodeFailure, "truncated checkpoint: " + path.string());
  return net;
}

}  // namespace dcp

#endif  // DCP_INPAINT_NET_HPP
