#pragma once

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mustan/ops.hpp"

namespace mustan {

enum class Phase { train, eval };

// A named tensor owned by a block. Trainable entries are optimizer targets;
// the rest are buffers (batch-norm running statistics) that still belong in
// checkpoints.
template <typename Scalar>
struct NamedTensor {
  std::string name;
  Var<Scalar> var;
  bool trainable = true;
};

template <typename Scalar>
using ParameterList = std::vector<NamedTensor<Scalar>>;

using Rng = std::mt19937_64;

inline constexpr std::array<int, 5> kBaseChannels{64, 128, 256, 512, 1024};

// w * {64, 128, 256, 512, 1024}; every entry must be a positive integer.
inline std::array<int, 5> channel_schedule(double width_factor) {
  std::array<int, 5> out{};
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double c = width_factor * kBaseChannels[i];
    const double rounded = std::round(c);
    if (!(width_factor > 0) || rounded < 1 || std::abs(c - rounded) > 1e-9)
      throw ConfigError("width factor " + std::to_string(width_factor) +
                        " gives non-integral channel count " + std::to_string(c));
    out[i] = static_cast<int>(rounded);
  }
  return out;
}

struct BlockConfig {
  double width_factor = 1.0;
  int in_channels = 3;
  int T = 3;
  bool use_pretrained_stem = false;
};

template <typename Scalar>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in, int out, int kernel, int stride, int pad, bool with_bias, Rng& rng)
      : stride_(stride), pad_(pad) {
    Tensor<Scalar> w(Shape{out, in, kernel, kernel});
    // He-normal over fan-in; keeps activations O(1) through ReLU stacks.
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / (in * kernel * kernel)));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(normal(rng));
    weight = leaf(std::move(w));
    if (with_bias) bias = leaf(Tensor<Scalar>(Shape{out, 1, 1, 1}));
  }

  Var<Scalar> operator()(const Var<Scalar>& x) const {
    return ops::conv2d(x, weight, bias, stride_, pad_);
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight, true});
    if (bias) out.push_back({prefix + ".bias", bias, true});
  }

  int out_channels() const { return weight->value.n(); }
  int in_channels() const { return weight->value.c(); }

  Var<Scalar> weight;
  Var<Scalar> bias;

 private:
  int stride_ = 1;
  int pad_ = 0;
};

template <typename Scalar>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels)
      : gamma(leaf(Tensor<Scalar>(Shape{channels, 1, 1, 1}, Scalar(1)))),
        beta(leaf(Tensor<Scalar>(Shape{channels, 1, 1, 1}))),
        running_mean(constant(Tensor<Scalar>(Shape{channels, 1, 1, 1}))),
        running_var(constant(Tensor<Scalar>(Shape{channels, 1, 1, 1}, Scalar(1)))) {}

  Var<Scalar> operator()(const Var<Scalar>& x, Phase phase) const {
    return ops::batch_norm(x, gamma, beta, running_mean->value, running_var->value,
                           phase == Phase::train, kMomentum, kEps);
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", gamma, true});
    out.push_back({prefix + ".bias", beta, true});
    out.push_back({prefix + ".running_mean", running_mean, false});
    out.push_back({prefix + ".running_var", running_var, false});
  }

  static constexpr double kMomentum = 0.1;
  static constexpr double kEps = 1e-5;

  Var<Scalar> gamma;
  Var<Scalar> beta;
  Var<Scalar> running_mean;
  Var<Scalar> running_var;
};

// Two 3x3 convolutions with an identity or 1x1-projection shortcut.
template <typename Scalar>
class BasicBlock {
 public:
  BasicBlock() = default;
  BasicBlock(int in, int out, int stride, Rng& rng)
      : conv1_(in, out, 3, stride, 1, false, rng),
        bn1_(out),
        conv2_(out, out, 3, 1, 1, false, rng),
        bn2_(out),
        project_(in != out || stride != 1) {
    if (project_) {
      down_conv_ = Conv2d<Scalar>(in, out, 1, stride, 0, false, rng);
      down_bn_ = BatchNorm2d<Scalar>(out);
    }
  }

  Var<Scalar> operator()(const Var<Scalar>& x, Phase phase) const {
    auto y = ops::relu(bn1_(conv1_(x), phase));
    y = bn2_(conv2_(y), phase);
    auto shortcut = project_ ? down_bn_(down_conv_(x), phase) : x;
    return ops::relu(ops::add(y, shortcut));
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    conv1_.collect(out, prefix + ".conv1");
    bn1_.collect(out, prefix + ".bn1");
    conv2_.collect(out, prefix + ".conv2");
    bn2_.collect(out, prefix + ".bn2");
    if (project_) {
      down_conv_.collect(out, prefix + ".downsample.0");
      down_bn_.collect(out, prefix + ".downsample.1");
    }
  }

 private:
  Conv2d<Scalar> conv1_;
  BatchNorm2d<Scalar> bn1_;
  Conv2d<Scalar> conv2_;
  BatchNorm2d<Scalar> bn2_;
  bool project_ = false;
  Conv2d<Scalar> down_conv_;
  BatchNorm2d<Scalar> down_bn_;
};

template <typename Scalar>
using FeaturePyramid = std::array<Var<Scalar>, 5>;

// ResNet18-style five-stage encoder:
//   stage1  7x7/2 conv + BN + ReLU                     -> c1 @ 1/2
//   stage2  3x3/2 max-pool + 2 basic blocks             -> c2 @ 1/4
//   stage3  2 basic blocks, first strided               -> c3 @ 1/8
//   stage4  2 basic blocks, first strided               -> c4 @ 1/16
//   stage5  2 basic blocks at c4 width, first strided,
//           then 1x1 expansion + BN + ReLU              -> c5 @ 1/32
template <typename Scalar>
class Encoder {
 public:
  Encoder() = default;
  Encoder(const BlockConfig& cfg, Rng& rng) : cfg_(cfg), channels_(channel_schedule(cfg.width_factor)) {
    if (cfg.in_channels < 1) throw ConfigError("encoder needs at least one input channel");
    const auto& c = channels_;
    stem_conv_ = Conv2d<Scalar>(cfg.in_channels, c[0], 7, 2, 3, false, rng);
    stem_bn_ = BatchNorm2d<Scalar>(c[0]);
    stages_[0] = {BasicBlock<Scalar>(c[0], c[1], 1, rng), BasicBlock<Scalar>(c[1], c[1], 1, rng)};
    stages_[1] = {BasicBlock<Scalar>(c[1], c[2], 2, rng), BasicBlock<Scalar>(c[2], c[2], 1, rng)};
    stages_[2] = {BasicBlock<Scalar>(c[2], c[3], 2, rng), BasicBlock<Scalar>(c[3], c[3], 1, rng)};
    stages_[3] = {BasicBlock<Scalar>(c[3], c[3], 2, rng), BasicBlock<Scalar>(c[3], c[3], 1, rng)};
    expand_conv_ = Conv2d<Scalar>(c[3], c[4], 1, 1, 0, false, rng);
    expand_bn_ = BatchNorm2d<Scalar>(c[4]);
  }

  FeaturePyramid<Scalar> operator()(const Var<Scalar>& x, Phase phase) const {
    const Shape s = x->value.shape();
    if (s.c != cfg_.in_channels)
      throw ShapeError("encoder expects " + std::to_string(cfg_.in_channels) +
                       " input channels, got " + s.str());
    if (s.h % 32 != 0 || s.w % 32 != 0)
      throw ShapeError("encoder input " + s.str() + " is not divisible by 32");
    FeaturePyramid<Scalar> out;
    out[0] = ops::relu(stem_bn_(stem_conv_(x), phase));
    auto y = ops::max_pool2d(out[0], 3, 2, 1);
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      for (const auto& block : stages_[i]) y = block(y, phase);
      out[i + 1] = y;
    }
    out[4] = ops::relu(expand_bn_(expand_conv_(out[4]), phase));
    return out;
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    stem_conv_.collect(out, prefix + ".conv1");
    stem_bn_.collect(out, prefix + ".bn1");
    for (std::size_t i = 0; i < stages_.size(); ++i)
      for (std::size_t b = 0; b < stages_[i].size(); ++b)
        stages_[i][b].collect(out, prefix + ".layer" + std::to_string(i + 1) + "." + std::to_string(b));
    expand_conv_.collect(out, prefix + ".expand.0");
    expand_bn_.collect(out, prefix + ".expand.1");
  }

  const std::array<int, 5>& channels() const { return channels_; }
  const BlockConfig& config() const { return cfg_; }

 private:
  BlockConfig cfg_;
  std::array<int, 5> channels_{};
  Conv2d<Scalar> stem_conv_;
  BatchNorm2d<Scalar> stem_bn_;
  std::array<std::array<BasicBlock<Scalar>, 2>, 4> stages_;
  Conv2d<Scalar> expand_conv_;
  BatchNorm2d<Scalar> expand_bn_;
};

template <typename Scalar>
struct GatedOutput {
  Var<Scalar> out;
  Var<Scalar> attention;  // N x 1 x h x w, values in (0, 1)
};

// Additive attention gate shared by FRM and RLIM:
//   a = sigmoid(psi(relu(BN(Wg * guide) + BN(Wx * x)))),  out = a * x
// Internal width equals the channel count of the modulated stream x.
template <typename Scalar>
class AttentionGate {
 public:
  AttentionGate() = default;
  AttentionGate(int guide_channels, int channels, Rng& rng)
      : guide_conv_(guide_channels, channels, 1, 1, 0, false, rng),
        guide_bn_(channels),
        x_conv_(channels, channels, 1, 1, 0, false, rng),
        x_bn_(channels),
        psi_(channels, 1, 1, 1, 0, true, rng) {}

  GatedOutput<Scalar> operator()(const Var<Scalar>& guide, const Var<Scalar>& x, Phase phase) const {
    auto g = guide_bn_(guide_conv_(guide), phase);
    auto s = x_bn_(x_conv_(x), phase);
    auto a = ops::sigmoid(psi_(ops::relu(ops::add(g, s))));
    return {ops::gate(a, x), a};
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    guide_conv_.collect(out, prefix + ".guide_conv");
    guide_bn_.collect(out, prefix + ".guide_bn");
    x_conv_.collect(out, prefix + ".x_conv");
    x_bn_.collect(out, prefix + ".x_bn");
    psi_.collect(out, prefix + ".psi");
  }

  Conv2d<Scalar>& psi() { return psi_; }

 private:
  Conv2d<Scalar> guide_conv_;
  BatchNorm2d<Scalar> guide_bn_;
  Conv2d<Scalar> x_conv_;
  BatchNorm2d<Scalar> x_bn_;
  Conv2d<Scalar> psi_;
};

// Feature Refinement Module: temporal-context features gate the
// current-frame features at one pyramid scale.
template <typename Scalar>
class Frm {
 public:
  Frm() = default;
  Frm(int channels, Rng& rng) : gate_(channels, channels, rng) {}

  GatedOutput<Scalar> operator()(const Var<Scalar>& context_feat, const Var<Scalar>& frame_feat,
                                 Phase phase) const {
    if (context_feat->value.shape() != frame_feat->value.shape())
      throw ShapeError("frm: context " + context_feat->value.shape().str() + " vs frame " +
                       frame_feat->value.shape().str());
    return gate_(context_feat, frame_feat, phase);
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const { gate_.collect(out, prefix); }
  AttentionGate<Scalar>& gate() { return gate_; }

 private:
  AttentionGate<Scalar> gate_;
};

// Refine Localization Information Module: a half-resolution embedding
// (upsampled x2) gates a full-resolution embedding.
template <typename Scalar>
class Rlim {
 public:
  Rlim() = default;
  Rlim(int low_channels, int high_channels, Rng& rng) : gate_(low_channels, high_channels, rng) {}

  GatedOutput<Scalar> operator()(const Var<Scalar>& lre, const Var<Scalar>& hre, Phase phase) const {
    const Shape l = lre->value.shape();
    const Shape h = hre->value.shape();
    if (l.n != h.n || 2 * l.h != h.h || 2 * l.w != h.w)
      throw ShapeError("rlim: low-resolution " + l.str() + " is not half of " + h.str());
    return gate_(ops::upsample2x(lre), hre, phase);
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const { gate_.collect(out, prefix); }
  AttentionGate<Scalar>& gate() { return gate_; }

 private:
  AttentionGate<Scalar> gate_;
};

// Channel concatenation of T per-frame maps, 1x1 projection back to the
// single-frame width, BN, ReLU.
template <typename Scalar>
class FusionBlock {
 public:
  FusionBlock() = default;
  FusionBlock(int T, int channels, Rng& rng)
      : T_(T), conv_(T * channels, channels, 1, 1, 0, false, rng), bn_(channels) {}

  Var<Scalar> operator()(const std::vector<Var<Scalar>>& feats, Phase phase) const {
    if (static_cast<int>(feats.size()) != T_)
      throw ShapeError("fusion block expects " + std::to_string(T_) + " maps, got " +
                       std::to_string(feats.size()));
    for (const auto& f : feats)
      if (f->value.shape() != feats.front()->value.shape())
        throw ShapeError("fusion block: heterogeneous shapes " + f->value.shape().str() + " vs " +
                         feats.front()->value.shape().str());
    auto stacked = feats.size() == 1 ? feats.front() : ops::concat_channels(feats);
    return ops::relu(bn_(conv_(stacked), phase));
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    conv_.collect(out, prefix + ".conv");
    bn_.collect(out, prefix + ".bn");
  }

 private:
  int T_ = 1;
  Conv2d<Scalar> conv_;
  BatchNorm2d<Scalar> bn_;
};

// Four upsample/concat/3x3-conv+ReLU blocks from stride 32 to stride 2, then
// a bilinear x2 to full resolution, 1x1 conv to one channel, and sigmoid.
template <typename Scalar>
class Decoder {
 public:
  Decoder() = default;
  Decoder(const std::array<int, 5>& channels, Rng& rng) : channels_(channels) {
    for (int level = 0; level < 4; ++level)
      blocks_[level] = Conv2d<Scalar>(channels[level + 1] + channels[level], channels[level], 3, 1, 1,
                                      true, rng);
    head_ = Conv2d<Scalar>(channels[0], 1, 1, 1, 0, true, rng);
  }

  // One decoder block for pyramid level `level` (0-based, 3..0).
  Var<Scalar> block(int level, const Var<Scalar>& running, const Var<Scalar>& skip) const {
    const Shape r = running->value.shape();
    const Shape s = skip->value.shape();
    if (s.c != channels_[level] || r.c != channels_[level + 1] || s.h != 2 * r.h || s.w != 2 * r.w ||
        s.n != r.n)
      throw ShapeError("decoder level " + std::to_string(level + 1) + ": skip " + s.str() +
                       " does not match running feature " + r.str());
    auto up = ops::upsample2x(running);
    return ops::relu(blocks_[level](ops::concat_channels(std::vector<Var<Scalar>>{up, skip})));
  }

  Var<Scalar> head(const Var<Scalar>& level1) const {
    return ops::sigmoid(head_(ops::upsample2x(level1)));
  }

  // skips[i] belongs to pyramid level i+1 (i = 0..3).
  Var<Scalar> operator()(const Var<Scalar>& bottleneck, const std::array<Var<Scalar>, 4>& skips) const {
    auto running = bottleneck;
    for (int level = 3; level >= 0; --level) running = block(level, running, skips[level]);
    return head(running);
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    for (int level = 0; level < 4; ++level)
      blocks_[level].collect(out, prefix + ".block" + std::to_string(level + 1));
    head_.collect(out, prefix + ".head");
  }

  Conv2d<Scalar>& head_conv() { return head_; }

 private:
  std::array<int, 5> channels_{};
  std::array<Conv2d<Scalar>, 4> blocks_;
  Conv2d<Scalar> head_;
};

}  // namespace mustan
