#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

namespace mustan {

enum class Arch { mustan1, mustan2, unet_baseline };

std::string to_string(Arch arch);
Arch parse_arch(const std::string& name);

struct ModelConfig {
  Arch arch = Arch::mustan2;
  int T = 3;
  double width_factor = 1.0;
  bool share_mustan2_encoders = true;
  bool pretrained = false;
  // Named-array file holding ImageNet ResNet18 weights (see tools/).
  std::string pretrained_path;
  double threshold = 0.5;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LossConfig {
  double theta = 0.5;
  double alpha = 0.5;
  double beta = 0.5;
  double epsilon = 1e-6;

  void validate() const;
  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

struct Resolution {
  int height = 320;
  int width = 480;

  friend bool operator==(const Resolution&, const Resolution&) = default;
};

struct TrainConfig {
  double lr0 = 1e-4;
  int step_size = 20;
  double gamma = 0.1;
  int epochs = 40;
  int batch_size = 8;
  std::uint64_t seed = 0;
  // 1.0 trains on every clip and skips validation.
  double split_ratio = 0.9;
  bool split_per_video = false;
  int frame_stride = 1;
  // Stops after this many optimizer steps when > 0.
  int max_steps = 0;
  // Epoch checkpoints are written every this many epochs and after the last.
  int checkpoint_every = 1;
  bool augment = false;
  LossConfig loss;
  ModelConfig model;
  Resolution resolution;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& cfg);
void from_json(const nlohmann::json& j, ModelConfig& cfg);
void to_json(nlohmann::json& j, const LossConfig& cfg);
void from_json(const nlohmann::json& j, LossConfig& cfg);
void to_json(nlohmann::json& j, const Resolution& r);
void from_json(const nlohmann::json& j, Resolution& r);
void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

TrainConfig load_train_config(const std::string& path);
void save_train_config(const TrainConfig& cfg, const std::string& path);

}  // namespace mustan
