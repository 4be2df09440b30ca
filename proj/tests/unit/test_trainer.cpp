#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "mustan/checkpoint.hpp"
#include "mustan/toygen.hpp"
#include "mustan/trainer.hpp"
#include "support/fixtures.hpp"

using namespace mustan;
namespace fs = std::filesystem;

namespace {

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

DatasetManifest toyset(const std::string& name, int videos, int frames) {
  const fs::path root = mustan::testing::fresh_dir(name);
  toygen::RandomSceneOptions opt;
  opt.height = 64;
  opt.width = 64;
  opt.num_frames = frames;
  opt.backgrounds = {toygen::Background::flat_color, toygen::Background::checker};
  std::vector<toygen::SceneSpec> specs;
  for (int i = 0; i < videos; ++i) specs.push_back(toygen::random_scene(100 + i, opt));
  toygen::write_toyset(specs, (root / "data").string());
  return scan_simple((root / "data").string());
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.model.arch = Arch::mustan2;
  cfg.model.T = 2;
  cfg.model.width_factor = 0.125;
  cfg.resolution = {64, 64};
  cfg.epochs = 2;
  cfg.batch_size = 2;
  cfg.seed = 3;
  cfg.split_ratio = 0.75;
  return cfg;
}

}  // namespace

TEST_CASE("step schedule") {
  TrainConfig cfg;
  CHECK(lr_at_epoch(cfg, 0) == 1e-4);
  CHECK(lr_at_epoch(cfg, 19) == 1e-4);
  CHECK(lr_at_epoch(cfg, 20) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(lr_at_epoch(cfg, 39) == doctest::Approx(1e-5).epsilon(1e-12));
  cfg.step_size = 3;
  cfg.gamma = 0.5;
  CHECK(lr_at_epoch(cfg, 7) == doctest::Approx(2.5e-5).epsilon(1e-12));
}

TEST_CASE("adam matches a scalar reference") {
  auto p = leaf(Tensor<double>(Shape{1, 1, 1, 2}));
  p->value.data()[0] = 1.0;
  p->value.data()[1] = -2.0;
  ParameterList<double> params{{"p", p, true}};
  Adam<double> adam(params);
  double x[2] = {1.0, -2.0}, m[2] = {0, 0}, v[2] = {0, 0};
  const double grads[3][2] = {{0.5, -1.0}, {0.1, 2.0}, {-0.3, 0.0}};
  for (int t = 1; t <= 3; ++t) {
    p->grad = Tensor<double>(Shape{1, 1, 1, 2});
    for (int i = 0; i < 2; ++i) p->grad.data()[i] = grads[t - 1][i];
    adam.step(0.01);
    for (int i = 0; i < 2; ++i) {
      const double g = grads[t - 1][i];
      m[i] = 0.9 * m[i] + 0.1 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
      x[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
      CHECK(p->value.data()[i] == doctest::Approx(x[i]).epsilon(1e-13));
    }
  }
  CHECK(adam.steps() == 3);
}

TEST_CASE("training writes logs and checkpoints deterministically") {
  const auto data = toyset("trainer-det", 2, 6);
  const TrainConfig cfg = tiny_config();
  const fs::path a = mustan::testing::fresh_dir("trainer-run-a");
  const fs::path b = mustan::testing::fresh_dir("trainer-run-b");
  const auto ra = train(cfg, data, a.string());
  const auto rb = train(cfg, data, b.string());

  REQUIRE(ra.log.size() == 2);
  CHECK(ra.train_clips.size() == 9);
  CHECK(ra.val_clips.size() == 3);
  std::set<std::pair<std::string, int>> train_ids;
  for (const auto& c : ra.train_clips) train_ids.insert({c.video_id, c.current_index});
  for (const auto& c : ra.val_clips) CHECK(train_ids.count({c.video_id, c.current_index}) == 0);

  CHECK(ra.log[0].step == 5);
  CHECK(ra.log[1].step == 10);
  CHECK(ra.log[1].val_f1.has_value());
  CHECK(ra.log[0].lr == 1e-4);
  CHECK(read_all(ra.log_path) == read_all(rb.log_path));
  CHECK(read_all(ra.log_path).find("\"val_f1\"") != std::string::npos);
  CHECK(fs::exists(a / "checkpoints" / "epoch_000.ckpt"));
  CHECK(fs::exists(a / "checkpoints" / "epoch_001.ckpt"));
  CHECK(fs::exists(ra.best_checkpoint));
  CHECK(ra.last_checkpoint == (a / "checkpoints" / "epoch_001.ckpt").string());

  // The reloaded checkpoint scores identically on the validation clips.
  auto model = load_checkpoint(ra.last_checkpoint);
  const auto r1 = evaluate_clips(*model, data, ra.val_clips, cfg.resolution);
  auto again = load_checkpoint(rb.last_checkpoint);
  const auto r2 = evaluate_clips(*again, data, ra.val_clips, cfg.resolution);
  CHECK(r1.overall.f1 == r2.overall.f1);
  CHECK(r1.overall.f1 == doctest::Approx(*ra.log[1].val_f1).epsilon(1e-12));
}

TEST_CASE("max_steps stops early and a full split skips validation") {
  const auto data = toyset("trainer-steps", 1, 8);
  TrainConfig cfg = tiny_config();
  cfg.split_ratio = 1.0;
  cfg.max_steps = 6;
  cfg.epochs = 5;
  cfg.checkpoint_every = 3;
  const fs::path out = mustan::testing::fresh_dir("trainer-steps-run");
  const auto r = train(cfg, data, out.string());
  REQUIRE(r.log.size() == 2);
  CHECK(r.log.back().step == 6);
  // Only the epoch where training stopped is checkpointed.
  CHECK_FALSE(fs::exists(out / "checkpoints" / "epoch_000.ckpt"));
  CHECK(r.last_checkpoint == (out / "checkpoints" / "epoch_001.ckpt").string());
  CHECK(r.val_clips.empty());
  CHECK_FALSE(r.log.back().val_f1.has_value());
  CHECK(fs::exists(r.best_checkpoint));
}

TEST_CASE("diverging training aborts with context") {
  const auto data = toyset("trainer-nan", 1, 8);
  TrainConfig cfg = tiny_config();
  cfg.lr0 = 1e30;
  cfg.epochs = 3;
  const fs::path out = mustan::testing::fresh_dir("trainer-nan-run");
  CHECK_THROWS_WITH_AS(train(cfg, data, out.string()), doctest::Contains("non-finite"), TrainingAborted);
}

TEST_CASE("evaluate covers every annotated clip") {
  const auto data = toyset("trainer-eval", 2, 4);
  ModelConfig mc;
  mc.arch = Arch::unet_baseline;
  mc.T = 1;
  mc.width_factor = 0.125;
  auto model = build_model(mc, 1);
  const auto r = evaluate(*model, data, {32, 32}, 1, "toy");
  CHECK(r.label == "toy");
  CHECK(r.per_video.size() == 2);
  std::uint64_t pixels = 0;
  for (const auto& [id, c] : r.counts) pixels += c.tp + c.fp + c.fn + c.tn;
  CHECK(pixels == 2u * 4 * 32 * 32);
  CHECK_THROWS_AS(evaluate(*model, DatasetManifest{}, {32, 32}), DataError);
}
