#pragma once

#include <memory>
#include <string>
#include <type_traits>

#include "mustan/archive.hpp"
#include "mustan/models.hpp"

namespace mustan {

inline constexpr int kCheckpointSchemaVersion = 1;

// The architecture-defining subset of ModelConfig.
inline bool same_architecture(const ModelConfig& a, const ModelConfig& b) {
  return a.arch == b.arch && a.T == b.T && a.width_factor == b.width_factor &&
         (a.arch != Arch::mustan2 || a.share_mustan2_encoders == b.share_mustan2_encoders);
}

template <typename Scalar>
void save_checkpoint(const SegmentationModel<Scalar>& model, const std::string& path,
                     const nlohmann::json& extra = nlohmann::json::object()) {
  std::vector<NamedArray> arrays;
  for (const auto& p : model.parameters())
    arrays.push_back({p.name, p.var->value.shape(), p.var->value.array().template cast<double>()});
  const nlohmann::json header{{"format", "mustan-checkpoint"},
                              {"schema_version", kCheckpointSchemaVersion},
                              {"model", model.config()},
                              {"extra", extra}};
  write_archive(path, header, arrays,
                std::is_same_v<Scalar, double> ? ArchiveDtype::float64 : ArchiveDtype::float32);
}

inline ModelConfig checkpoint_model_config(const Archive& archive, const std::string& path) {
  if (archive.header.value("format", "") != "mustan-checkpoint")
    throw CheckpointError(path + ": not a model checkpoint");
  if (archive.header.value("schema_version", 0) != kCheckpointSchemaVersion)
    throw CheckpointError(path + ": unsupported checkpoint schema version");
  try {
    return archive.header.at("model").get<ModelConfig>();
  } catch (const std::exception& e) {
    throw CheckpointError(path + ": bad model header: " + e.what());
  }
}

// Validates everything before touching the model, so a failed load leaves
// the weights unchanged.
template <typename Scalar>
void load_checkpoint_into(SegmentationModel<Scalar>& model, const std::string& path) {
  const Archive archive = read_archive(path);
  const ModelConfig stored = checkpoint_model_config(archive, path);
  if (!same_architecture(stored, model.config()))
    throw CheckpointError(path + ": checkpoint holds " + nlohmann::json(stored).dump() + " but the model is " +
                          nlohmann::json(model.config()).dump());
  const auto params = model.parameters();
  if (params.size() != archive.arrays.size())
    throw CheckpointError(path + ": " + std::to_string(archive.arrays.size()) + " arrays for " +
                          std::to_string(params.size()) + " model tensors");
  for (const auto& p : params) {
    const NamedArray* a = archive.find(p.name);
    if (!a) throw CheckpointError(path + ": missing array '" + p.name + "'");
    if (a->shape != p.var->value.shape())
      throw CheckpointError(path + ": array '" + p.name + "' has shape " + a->shape.str() + ", model expects " +
                            p.var->value.shape().str());
  }
  for (const auto& p : params) p.var->value.array() = archive.find(p.name)->values.template cast<Scalar>();
}

template <typename Scalar = float>
std::unique_ptr<SegmentationModel<Scalar>> load_checkpoint(const std::string& path) {
  const Archive archive = read_archive(path);
  ModelConfig cfg = checkpoint_model_config(archive, path);
  cfg.pretrained = false;
  auto model = build_model<Scalar>(cfg, 0);
  load_checkpoint_into(*model, path);
  return model;
}

}  // namespace mustan
