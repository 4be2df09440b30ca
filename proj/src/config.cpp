#include "mustan/config.hpp"

#include <cmath>
#include <fstream>

#include "mustan/error.hpp"
#include "mustan/nnblocks.hpp"

namespace mustan {

std::string to_string(Arch arch) {
  switch (arch) {
    case Arch::mustan1:
      return "mustan1";
    case Arch::mustan2:
      return "mustan2";
    case Arch::unet_baseline:
      return "unet_baseline";
  }
  return "unknown";
}

Arch parse_arch(const std::string& name) {
  if (name == "mustan1") return Arch::mustan1;
  if (name == "mustan2") return Arch::mustan2;
  if (name == "unet_baseline" || name == "unet") return Arch::unet_baseline;
  throw ConfigError("unknown architecture '" + name + "'");
}

void ModelConfig::validate() const {
  if (T < 1) throw ConfigError("window length T must be >= 1, got " + std::to_string(T));
  if (arch == Arch::unet_baseline && T != 1)
    throw ConfigError("unet_baseline consumes a single frame; T must be 1");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ConfigError("threshold must lie in (0, 1), got " + std::to_string(threshold));
  channel_schedule(width_factor);
}

void LossConfig::validate() const {
  if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("loss theta must lie in [0, 1]");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ConfigError("tversky alpha/beta must be >= 0");
  if (!(epsilon > 0.0)) throw ConfigError("loss epsilon must be > 0");
}

void TrainConfig::validate() const {
  if (!(lr0 > 0)) throw ConfigError("lr0 must be positive");
  if (step_size < 1) throw ConfigError("step_size must be >= 1");
  if (!(gamma > 0)) throw ConfigError("gamma must be positive");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(split_ratio > 0.0 && split_ratio <= 1.0)) throw ConfigError("split_ratio must lie in (0, 1]");
  if (frame_stride < 1) throw ConfigError("frame_stride must be >= 1");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
  // TODO: no augmentation pipeline exists yet; the flag is reserved.
  if (augment) throw ConfigError("augment is not supported");
  if (resolution.height <= 0 || resolution.width <= 0 || resolution.height % 32 != 0 ||
      resolution.width % 32 != 0)
    throw ConfigError("resolution " + std::to_string(resolution.height) + "x" +
                      std::to_string(resolution.width) + " must be positive and divisible by 32");
  loss.validate();
  model.validate();
}

void to_json(nlohmann::json& j, const ModelConfig& cfg) {
  j = nlohmann::json{{"arch", to_string(cfg.arch)},
                     {"T", cfg.T},
                     {"width_factor", cfg.width_factor},
                     {"share_mustan2_encoders", cfg.share_mustan2_encoders},
                     {"pretrained", cfg.pretrained},
                     {"pretrained_path", cfg.pretrained_path},
                     {"threshold", cfg.threshold}};
}

void from_json(const nlohmann::json& j, ModelConfig& cfg) {
  ModelConfig d;
  cfg.arch = parse_arch(j.value("arch", to_string(d.arch)));
  cfg.T = j.value("T", d.T);
  cfg.width_factor = j.value("width_factor", d.width_factor);
  cfg.share_mustan2_encoders = j.value("share_mustan2_encoders", d.share_mustan2_encoders);
  cfg.pretrained = j.value("pretrained", d.pretrained);
  cfg.pretrained_path = j.value("pretrained_path", d.pretrained_path);
  cfg.threshold = j.value("threshold", d.threshold);
}

void to_json(nlohmann::json& j, const LossConfig& cfg) {
  j = nlohmann::json{
      {"theta", cfg.theta}, {"alpha", cfg.alpha}, {"beta", cfg.beta}, {"epsilon", cfg.epsilon}};
}

void from_json(const nlohmann::json& j, LossConfig& cfg) {
  LossConfig d;
  cfg.theta = j.value("theta", d.theta);
  cfg.alpha = j.value("alpha", d.alpha);
  cfg.beta = j.value("beta", d.beta);
  cfg.epsilon = j.value("epsilon", d.epsilon);
}

void to_json(nlohmann::json& j, const Resolution& r) { j = nlohmann::json::array({r.height, r.width}); }

void from_json(const nlohmann::json& j, Resolution& r) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("resolution must be [height, width]");
  r.height = j[0].get<int>();
  r.width = j[1].get<int>();
}

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
  j = nlohmann::json{{"lr0", cfg.lr0},
                     {"step_size", cfg.step_size},
                     {"gamma", cfg.gamma},
                     {"epochs", cfg.epochs},
                     {"batch_size", cfg.batch_size},
                     {"seed", cfg.seed},
                     {"split_ratio", cfg.split_ratio},
                     {"split_per_video", cfg.split_per_video},
                     {"frame_stride", cfg.frame_stride},
                     {"max_steps", cfg.max_steps},
                     {"checkpoint_every", cfg.checkpoint_every},
                     {"augment", cfg.augment},
                     {"loss", cfg.loss},
                     {"model", cfg.model},
                     {"resolution", cfg.resolution}};
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
  TrainConfig d;
  cfg.lr0 = j.value("lr0", d.lr0);
  cfg.step_size = j.value("step_size", d.step_size);
  cfg.gamma = j.value("gamma", d.gamma);
  cfg.epochs = j.value("epochs", d.epochs);
  cfg.batch_size = j.value("batch_size", d.batch_size);
  cfg.seed = j.value("seed", d.seed);
  cfg.split_ratio = j.value("split_ratio", d.split_ratio);
  cfg.split_per_video = j.value("split_per_video", d.split_per_video);
  cfg.frame_stride = j.value("frame_stride", d.frame_stride);
  cfg.max_steps = j.value("max_steps", d.max_steps);
  cfg.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
  cfg.augment = j.value("augment", d.augment);
  cfg.loss = j.contains("loss") ? j.at("loss").get<LossConfig>() : d.loss;
  cfg.model = j.contains("model") ? j.at("model").get<ModelConfig>() : d.model;
  cfg.resolution = j.contains("resolution") ? j.at("resolution").get<Resolution>() : d.resolution;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path);
  try {
    return nlohmann::json::parse(in).get<TrainConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config " + path + ": " + e.what());
  }
}

void save_train_config(const TrainConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write config file " + path);
  out << nlohmann::json(cfg).dump(2) << "\n";
  if (!out) throw DataError("failed writing config file " + path);
}

}  // namespace mustan
