#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mustan/config.hpp"
#include "mustan/dataio.hpp"
#include "mustan/metrics.hpp"
#include "mustan/models.hpp"

namespace mustan {

// Step decay: lr0 * gamma^floor(epoch / step_size).
double lr_at_epoch(const TrainConfig& cfg, int epoch);

// Adam with bias correction; moments are kept per trainable tensor.
template <typename Scalar>
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  explicit Adam(const ParameterList<Scalar>& params) {
    for (const auto& p : params) {
      if (!p.trainable) continue;
      slots_.push_back({p.var, Tensor<Scalar>(p.var->value.shape()).array(),
                        Tensor<Scalar>(p.var->value.shape()).array()});
    }
  }

  void step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    for (auto& s : slots_) {
      if (!s.param->has_grad()) continue;
      const auto& g = s.param->grad.array();
      s.m = Scalar(kBeta1) * s.m + Scalar(1 - kBeta1) * g;
      s.v = Scalar(kBeta2) * s.v + Scalar(1 - kBeta2) * g.square();
      s.param->value.array() -=
          Scalar(lr) * (s.m / Scalar(c1)) / ((s.v / Scalar(c2)).sqrt() + Scalar(kEps));
    }
  }

  void zero_grad() {
    for (auto& s : slots_) s.param->zero_grad();
  }

  long steps() const { return t_; }

 private:
  struct Slot {
    Var<Scalar> param;
    typename Tensor<Scalar>::Array m;
    typename Tensor<Scalar>::Array v;
  };
  std::vector<Slot> slots_;
  long t_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  long step = 0;  // optimizer steps completed so far
  double lr = 0;
  double loss = 0;  // mean training loss over the epoch's batches
  std::optional<double> val_f1;
};

std::string epoch_record_json(const EpochRecord& r);

struct TrainResult {
  std::string last_checkpoint;
  std::string best_checkpoint;
  std::string log_path;
  std::vector<EpochRecord> log;
  std::vector<ClipRef> train_clips;
  std::vector<ClipRef> val_clips;
  std::int64_t parameter_count = 0;
};

// Writes <out_dir>/log.jsonl and <out_dir>/checkpoints/{epoch_%03d,best}.ckpt.
TrainResult train(const TrainConfig& cfg, const DatasetManifest& manifest, const std::string& out_dir);

MetricsReport evaluate(const SegmentationModel<float>& model, const DatasetManifest& manifest, Resolution resolution,
                       int frame_stride = 1, const std::string& label = "",
                       OverallMode mode = OverallMode::category_mean);

// Scores a fixed clip list (used for validation).
MetricsReport evaluate_clips(const SegmentationModel<float>& model, const DatasetManifest& manifest,
                             const std::vector<ClipRef>& clips, Resolution resolution, int batch_size = 8,
                             OverallMode mode = OverallMode::category_mean);

}  // namespace mustan
