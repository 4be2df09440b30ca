#include "mustan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "mustan/checkpoint.hpp"
#include "mustan/objective.hpp"

namespace fs = std::filesystem;

namespace mustan {

namespace {

// Memoizes decoded clips up to a byte budget; beyond it clips are re-read.
class ClipStore {
 public:
  ClipStore(const DatasetManifest& manifest, Resolution resolution, std::size_t budget_bytes)
      : manifest_(manifest), resolution_(resolution), budget_(budget_bytes) {}

  const ClipSample& get(const ClipRef& ref) {
    const auto key = std::make_pair(ref.video_id, ref.current_index);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    ClipSample sample = load_clip(manifest_, ref, resolution_);
    const std::size_t bytes = bytes_of(sample);
    if (used_ + bytes <= budget_) {
      used_ += bytes;
      return cache_.emplace(key, std::move(sample)).first->second;
    }
    scratch_.push_back(std::move(sample));
    return scratch_.back();
  }

  void release_scratch() { scratch_.clear(); }

 private:
  static std::size_t bytes_of(const ClipSample& s) {
    std::size_t b = static_cast<std::size_t>(s.target.size()) * 2;
    for (const auto& f : s.frames) b += static_cast<std::size_t>(f.size()) * sizeof(float);
    return b;
  }

  const DatasetManifest& manifest_;
  Resolution resolution_;
  std::size_t budget_;
  std::size_t used_ = 0;
  std::map<std::pair<std::string, int>, ClipSample> cache_;
  std::deque<ClipSample> scratch_;  // stable references until released
};

constexpr std::size_t kClipCacheBytes = std::size_t{1} << 30;

std::string clip_name(const ClipRef& c) { return c.video_id + "#" + std::to_string(c.current_index); }

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

MetricsReport score_batches(const SegmentationModel<float>& model, ClipStore& store, const std::vector<ClipRef>& clips,
                            const DatasetManifest& manifest, int batch_size, OverallMode mode) {
  std::vector<FrameCounts> frames;
  for (std::size_t begin = 0; begin < clips.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(clips.size(), begin + static_cast<std::size_t>(batch_size));
    std::vector<const ClipSample*> batch;
    for (std::size_t i = begin; i < end; ++i) batch.push_back(&store.get(clips[i]));
    if (batch.front()->window() != model.config().T)
      throw ConfigError("clip window length " + std::to_string(batch.front()->window()) +
                        " does not match model T=" + std::to_string(model.config().T));
    const auto stacked = stack_clips<float>(batch);
    const TensorF p = infer(model, stacked.window);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const ClipSample& clip = *batch[i];
      const int n = static_cast<int>(i);
      Eigen::Map<const Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> prob(
          p.plane_data(n, 0), p.h(), p.w());
      const Mask pred = binarize(prob, model.config().threshold);
      const VideoEntry& v = manifest.video(clip.meta.video_id);
      frames.push_back({v.video_id, v.category, confusion_counts(pred, clip.target, clip.ignore)});
    }
    store.release_scratch();
  }
  return aggregate_report(frames, mode);
}

}  // namespace

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  if (epoch < 0) epoch = 0;
  return cfg.lr0 * std::pow(cfg.gamma, epoch / cfg.step_size);
}

std::string epoch_record_json(const EpochRecord& r) {
  // Hand-formatted so recorded values keep 9 significant digits.
  std::ostringstream out;
  out << "{\"epoch\": " << r.epoch << ", \"step\": " << r.step << ", \"lr\": " << format_double(r.lr)
      << ", \"loss\": " << format_double(r.loss)
      << ", \"val_f1\": " << (r.val_f1 ? format_double(*r.val_f1) : std::string("null")) << "}";
  return out.str();
}

MetricsReport evaluate_clips(const SegmentationModel<float>& model, const DatasetManifest& manifest,
                             const std::vector<ClipRef>& clips, Resolution resolution, int batch_size,
                             OverallMode mode) {
  ClipStore store(manifest, resolution, 0);
  return score_batches(model, store, clips, manifest, batch_size, mode);
}

MetricsReport evaluate(const SegmentationModel<float>& model, const DatasetManifest& manifest, Resolution resolution,
                       int frame_stride, const std::string& label, OverallMode mode) {
  const auto clips = build_clip_index(manifest, model.config().T, frame_stride);
  if (clips.empty()) throw DataError("evaluate: dataset at " + manifest.root_path + " has no annotated clips");
  auto report = evaluate_clips(model, manifest, clips, resolution, 8, mode);
  report.label = label;
  return report;
}

TrainResult train(const TrainConfig& cfg, const DatasetManifest& manifest, const std::string& out_dir) {
  cfg.validate();
  if (manifest.videos.empty()) throw DataError("train: empty manifest");

  TrainResult result;
  const fs::path root(out_dir);
  fs::create_directories(root / "checkpoints");
  result.log_path = (root / "log.jsonl").string();
  std::ofstream log(result.log_path, std::ios::trunc);
  if (!log) throw TrainingAborted("cannot open training log " + result.log_path);

  auto model = build_model<float>(cfg.model, cfg.seed);
  result.parameter_count = count_parameters(*model);

  const auto clips = build_clip_index(manifest, cfg.model.T, cfg.frame_stride);
  if (clips.empty()) throw DataError("train: no annotated clips in " + manifest.root_path);
  if (cfg.split_ratio < 1.0) {
    const auto split = cfg.split_per_video ? split_train_val_per_video(clips, cfg.split_ratio, cfg.seed)
                                           : split_train_val(clips, cfg.split_ratio, cfg.seed);
    result.train_clips = split.train;
    result.val_clips = split.val;
  } else {
    result.train_clips = clips;
  }
  if (result.train_clips.empty()) throw DataError("train: split left no training clips");

  std::set<std::pair<std::string, int>> val_members;
  for (const auto& c : result.val_clips) val_members.emplace(c.video_id, c.current_index);

  ClipStore store(manifest, cfg.resolution, kClipCacheBytes);
  const ParameterList<float> params = model->parameters();
  Adam<float> adam(params);
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5DEECE66Dull);
  std::vector<std::size_t> order(result.train_clips.size());
  double best_f1 = -1.0;
  long step = 0;
  bool done = false;

  for (int epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    const double lr = lr_at_epoch(cfg, epoch);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0;
    int batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const ClipSample*> batch;
      std::vector<std::string> ids;
      for (std::size_t i = begin; i < end; ++i) {
        const ClipRef& ref = result.train_clips[order[i]];
        if (val_members.count({ref.video_id, ref.current_index}))
          throw TrainingAborted("validation clip " + clip_name(ref) + " scheduled for training");
        batch.push_back(&store.get(ref));
        ids.push_back(clip_name(ref));
      }
      const auto stacked = stack_clips<float>(batch);
      auto prob = model->forward(constant(stacked.window), Phase::train);
      const auto loss = combined_loss(prob->value, stacked.target, stacked.ignore, cfg.loss);
      if (!std::isfinite(loss.value) || !loss.grad.array().isFinite().all()) {
        std::string joined;
        for (const auto& id : ids) joined += (joined.empty() ? "" : ", ") + id;
        throw TrainingAborted("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                              ", lr " + format_double(lr) + "; batch [" + joined + "]");
      }
      backward(prob, loss.grad);
      adam.step(lr);
      adam.zero_grad();
      store.release_scratch();
      loss_sum += loss.value;
      ++batches;
      ++step;
      if (cfg.max_steps > 0 && step >= cfg.max_steps) {
        done = true;
        break;
      }
    }

    EpochRecord record{epoch, step, lr, loss_sum / std::max(1, batches), std::nullopt};
    if (!result.val_clips.empty()) {
      ClipStore val_store(manifest, cfg.resolution, 0);
      record.val_f1 = score_batches(*model, val_store, result.val_clips, manifest, cfg.batch_size,
                                    OverallMode::category_mean)
                          .overall.f1;
    }
    log << epoch_record_json(record) << "\n" << std::flush;
    if (!log) throw TrainingAborted("failed writing " + result.log_path);
    result.log.push_back(record);

    const nlohmann::json extra{{"epoch", epoch}, {"step", step}, {"train_config", cfg}};
    const bool final_epoch = done || epoch + 1 == cfg.epochs;
    try {
      if (final_epoch || (epoch + 1) % cfg.checkpoint_every == 0) {
        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", epoch);
        result.last_checkpoint = (root / "checkpoints" / name).string();
        save_checkpoint(*model, result.last_checkpoint, extra);
      }
      // Without a validation split the most recent epoch stands in as "best".
      const double score = record.val_f1.value_or(static_cast<double>(epoch));
      if (score > best_f1) {
        best_f1 = score;
        result.best_checkpoint = (root / "checkpoints" / "best.ckpt").string();
        save_checkpoint(*model, result.best_checkpoint, extra);
      }
    } catch (const CheckpointError& e) {
      throw TrainingAborted(std::string("checkpoint write failed: ") + e.what());
    }
  }
  return result;
}

}  // namespace mustan
