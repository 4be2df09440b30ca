#pragma once

#include <cstdint>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include "mustan/archive.hpp"
#include "mustan/clip.hpp"
#include "mustan/config.hpp"
#include "mustan/nnblocks.hpp"

namespace mustan {

// Probability map plus its thresholded mask (p >= threshold).
struct MaskPrediction {
  Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> probabilities;
  Mask mask;
};

template <typename Scalar>
class SegmentationModel {
 public:
  explicit SegmentationModel(ModelConfig cfg) : cfg_(std::move(cfg)) {}
  virtual ~SegmentationModel() = default;

  // window: N x 3T x H x W, frames ordered oldest..current.
  // Returns N x 1 x H x W foreground probabilities.
  virtual Var<Scalar> forward(const Var<Scalar>& window, Phase phase) const = 0;
  virtual void collect(ParameterList<Scalar>& out) const = 0;

  ParameterList<Scalar> parameters() const {
    ParameterList<Scalar> out;
    collect(out);
    return out;
  }

  const ModelConfig& config() const { return cfg_; }

 protected:
  void check_window(const Var<Scalar>& window) const {
    const Shape s = window->value.shape();
    if (s.c != 3 * cfg_.T)
      throw ShapeError(to_string(cfg_.arch) + " with T=" + std::to_string(cfg_.T) + " expects " +
                       std::to_string(3 * cfg_.T) + " window channels, got " + s.str());
  }

  Var<Scalar> current_frame(const Var<Scalar>& window) const {
    return cfg_.T == 1 ? window : ops::slice_channels(window, 3 * (cfg_.T - 1), 3);
  }

  ModelConfig cfg_;
};

namespace detail {

inline std::string pretrained_path(const ModelConfig& cfg) {
  if (!cfg.pretrained_path.empty()) return cfg.pretrained_path;
  if (const char* env = std::getenv("MUSTAN_RESNET18_WEIGHTS")) return env;
  throw ConfigError(
      "pretrained=true needs pretrained_path or MUSTAN_RESNET18_WEIGHTS "
      "(convert torchvision weights with tools/export_resnet18.py)");
}

}  // namespace detail

// Copies ImageNet ResNet18 tensors into an RGB, width-1 encoder wherever the
// torchvision name and shape agree (stem, stage-4/5 blocks that keep stock
// widths); everything else keeps its random init. Returns the number of
// tensors copied.
template <typename Scalar>
int load_pretrained_encoder(const Encoder<Scalar>& encoder, const std::string& path,
                            const std::string& prefix) {
  const BlockConfig& bc = encoder.config();
  if (bc.in_channels != 3 || bc.width_factor != 1.0) return 0;
  const Archive archive = read_archive(path);
  ParameterList<Scalar> params;
  encoder.collect(params, prefix);
  int copied = 0;
  for (auto& p : params) {
    const NamedArray* src = archive.find(p.name.substr(prefix.size() + 1));
    if (!src || src->shape.size() != p.var->value.size()) continue;
    if (src->shape != p.var->value.shape()) continue;
    p.var->value.array() = src->values.template cast<Scalar>();
    ++copied;
  }
  return copied;
}

// Two encoders (CNet on the stacked window, FNet on the current frame), FRMs
// at all five scales, RLIMs gated by the running decoder feature.
template <typename Scalar>
class Mustan1 final : public SegmentationModel<Scalar> {
 public:
  Mustan1(const ModelConfig& cfg, Rng& rng) : SegmentationModel<Scalar>(cfg) {
    if (cfg.arch != Arch::mustan1) throw ConfigError("build_mustan1 called with arch " + to_string(cfg.arch));
    cfg.validate();
    cnet_ = Encoder<Scalar>(BlockConfig{cfg.width_factor, 3 * cfg.T, cfg.T, false}, rng);
    fnet_ = Encoder<Scalar>(BlockConfig{cfg.width_factor, 3, cfg.T, cfg.pretrained}, rng);
    const auto& c = fnet_.channels();
    for (int i = 0; i < 5; ++i) frms_[i] = Frm<Scalar>(c[i], rng);
    for (int i = 0; i < 4; ++i) rlims_[i] = Rlim<Scalar>(c[i + 1], c[i], rng);
    decoder_ = Decoder<Scalar>(c, rng);
    if (cfg.pretrained) {
      const auto path = detail::pretrained_path(cfg);
      load_pretrained_encoder(fnet_, path, "fnet");
      if (cfg.T == 1) load_pretrained_encoder(cnet_, path, "cnet");
    }
  }

  Var<Scalar> forward(const Var<Scalar>& window, Phase phase) const override {
    this->check_window(window);
    const auto context = cnet_(window, phase);
    const auto frame = fnet_(this->current_frame(window), phase);
    std::array<Var<Scalar>, 5> refined;
    for (int i = 0; i < 5; ++i) refined[i] = frms_[i](context[i], frame[i], phase).out;
    Var<Scalar> running = refined[4];
    for (int level = 3; level >= 0; --level) {
      const auto skip = rlims_[level](running, refined[level], phase).out;
      running = decoder_.block(level, running, skip);
    }
    return decoder_.head(running);
  }

  void collect(ParameterList<Scalar>& out) const override {
    cnet_.collect(out, "cnet");
    fnet_.collect(out, "fnet");
    for (int i = 0; i < 5; ++i) frms_[i].collect(out, "frm" + std::to_string(i + 1));
    for (int i = 0; i < 4; ++i) rlims_[i].collect(out, "rlim" + std::to_string(i + 1));
    decoder_.collect(out, "decoder");
  }

 private:
  Encoder<Scalar> cnet_;
  Encoder<Scalar> fnet_;
  std::array<Frm<Scalar>, 5> frms_;
  std::array<Rlim<Scalar>, 4> rlims_;
  Decoder<Scalar> decoder_;
};

// T per-frame encoders (one shared set of weights by default), a fusion
// block per scale, RLIMs gated by the current frame's next-coarser feature.
template <typename Scalar>
class Mustan2 final : public SegmentationModel<Scalar> {
 public:
  Mustan2(const ModelConfig& cfg, Rng& rng) : SegmentationModel<Scalar>(cfg) {
    if (cfg.arch != Arch::mustan2) throw ConfigError("build_mustan2 called with arch " + to_string(cfg.arch));
    cfg.validate();
    const int encoders = cfg.share_mustan2_encoders ? 1 : cfg.T;
    for (int t = 0; t < encoders; ++t)
      encoders_.emplace_back(BlockConfig{cfg.width_factor, 3, cfg.T, cfg.pretrained}, rng);
    const auto& c = encoders_.front().channels();
    for (int i = 0; i < 5; ++i) fusion_[i] = FusionBlock<Scalar>(cfg.T, c[i], rng);
    for (int i = 0; i < 4; ++i) rlims_[i] = Rlim<Scalar>(c[i + 1], c[i], rng);
    decoder_ = Decoder<Scalar>(c, rng);
    if (cfg.pretrained) {
      const auto path = detail::pretrained_path(cfg);
      for (std::size_t t = 0; t < encoders_.size(); ++t)
        load_pretrained_encoder(encoders_[t], path, encoder_name(t));
    }
  }

  Var<Scalar> forward(const Var<Scalar>& window, Phase phase) const override {
    this->check_window(window);
    const int T = this->cfg_.T;
    const int N = window->value.n();
    std::vector<Var<Scalar>> frames;
    for (int t = 0; t < T; ++t) frames.push_back(T == 1 ? window : ops::slice_channels(window, 3 * t, 3));

    // per_frame[t][i]: level-i features of window frame t
    std::vector<FeaturePyramid<Scalar>> per_frame(T);
    if (encoders_.size() == 1 && T > 1) {
      const auto joint = encoders_.front()(ops::concat_batch(frames), phase);
      for (int t = 0; t < T; ++t)
        for (int i = 0; i < 5; ++i) per_frame[t][i] = ops::slice_batch(joint[i], t * N, N);
    } else {
      for (int t = 0; t < T; ++t) per_frame[t] = encoders_[encoders_.size() == 1 ? 0 : t](frames[t], phase);
    }

    std::array<Var<Scalar>, 5> fused;
    for (int i = 0; i < 5; ++i) {
      std::vector<Var<Scalar>> level;
      for (int t = 0; t < T; ++t) level.push_back(per_frame[t][i]);
      fused[i] = fusion_[i](level, phase);
    }
    const auto& current = per_frame[T - 1];
    Var<Scalar> running = fused[4];
    for (int level = 3; level >= 0; --level) {
      const auto skip = rlims_[level](current[level + 1], fused[level], phase).out;
      running = decoder_.block(level, running, skip);
    }
    return decoder_.head(running);
  }

  void collect(ParameterList<Scalar>& out) const override {
    for (std::size_t t = 0; t < encoders_.size(); ++t) encoders_[t].collect(out, encoder_name(t));
    for (int i = 0; i < 5; ++i) fusion_[i].collect(out, "fb" + std::to_string(i + 1));
    for (int i = 0; i < 4; ++i) rlims_[i].collect(out, "rlim" + std::to_string(i + 1));
    decoder_.collect(out, "decoder");
  }

 private:
  std::string encoder_name(std::size_t t) const {
    return encoders_.size() == 1 ? std::string("encoder") : "encoder" + std::to_string(t + 1);
  }

  std::vector<Encoder<Scalar>> encoders_;
  std::array<FusionBlock<Scalar>, 5> fusion_;
  std::array<Rlim<Scalar>, 4> rlims_;
  Decoder<Scalar> decoder_;
};

// Plain encoder-decoder on the current frame with raw encoder skips.
template <typename Scalar>
class UnetBaseline final : public SegmentationModel<Scalar> {
 public:
  UnetBaseline(const ModelConfig& cfg, Rng& rng) : SegmentationModel<Scalar>(cfg) {
    if (cfg.arch != Arch::unet_baseline)
      throw ConfigError("build_unet_baseline called with arch " + to_string(cfg.arch));
    cfg.validate();
    encoder_ = Encoder<Scalar>(BlockConfig{cfg.width_factor, 3, 1, cfg.pretrained}, rng);
    decoder_ = Decoder<Scalar>(encoder_.channels(), rng);
    if (cfg.pretrained) load_pretrained_encoder(encoder_, detail::pretrained_path(cfg), "encoder");
  }

  Var<Scalar> forward(const Var<Scalar>& window, Phase phase) const override {
    this->check_window(window);
    const auto p = encoder_(this->current_frame(window), phase);
    return decoder_(p[4], {p[0], p[1], p[2], p[3]});
  }

  void collect(ParameterList<Scalar>& out) const override {
    encoder_.collect(out, "encoder");
    decoder_.collect(out, "decoder");
  }

 private:
  Encoder<Scalar> encoder_;
  Decoder<Scalar> decoder_;
};

template <typename Scalar = float>
std::unique_ptr<SegmentationModel<Scalar>> build_mustan1(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return std::make_unique<Mustan1<Scalar>>(cfg, rng);
}

template <typename Scalar = float>
std::unique_ptr<SegmentationModel<Scalar>> build_mustan2(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return std::make_unique<Mustan2<Scalar>>(cfg, rng);
}

template <typename Scalar = float>
std::unique_ptr<SegmentationModel<Scalar>> build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  switch (cfg.arch) {
    case Arch::mustan1:
      return std::make_unique<Mustan1<Scalar>>(cfg, rng);
    case Arch::mustan2:
      return std::make_unique<Mustan2<Scalar>>(cfg, rng);
    case Arch::unet_baseline:
      return std::make_unique<UnetBaseline<Scalar>>(cfg, rng);
  }
  throw ConfigError("unknown architecture");
}

template <typename Scalar>
std::int64_t count_parameters(const SegmentationModel<Scalar>& model) {
  std::int64_t total = 0;
  for (const auto& p : model.parameters())
    if (p.trainable) total += static_cast<std::int64_t>(p.var->value.size());
  return total;
}

// Eval-mode inference on a batch; returns N x 1 x H x W probabilities.
template <typename Scalar>
Tensor<Scalar> infer(const SegmentationModel<Scalar>& model, const Tensor<Scalar>& window) {
  NoGradGuard no_grad;
  return model.forward(constant(window), Phase::eval)->value;
}

inline Mask binarize(const Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& p,
                     double threshold) {
  return (p >= static_cast<float>(threshold)).template cast<std::uint8_t>();
}

template <typename Scalar>
MaskPrediction predict_mask(const SegmentationModel<Scalar>& model, const ClipSample& clip) {
  if (clip.window() != model.config().T)
    throw ConfigError("clip window has " + std::to_string(clip.window()) + " frames, model expects T=" +
                      std::to_string(model.config().T));
  const auto batch = stack_clips<Scalar>({&clip});
  const Tensor<Scalar> p = infer(model, batch.window);
  MaskPrediction out;
  out.probabilities =
      Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          p.plane_data(0, 0), p.h(), p.w())
          .template cast<float>();
  out.mask = binarize(out.probabilities, model.config().threshold);
  return out;
}

}  // namespace mustan
