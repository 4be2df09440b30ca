#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "mustan/cli.hpp"
#include "mustan/image_io.hpp"
#include "support/fixtures.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "mustan");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = mustan::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

json read_json(const fs::path& p) { return json::parse(read_all(p)); }

int count_files(const fs::path& dir) {
  int n = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++n;
  return n;
}

// One toyset and one trained run shared by the evaluate/predict/report cases.
struct Workspace {
  fs::path root = mustan::testing::fresh_dir("cli");
  fs::path data = root / "toy";
  fs::path runs = root / "runs";

  Workspace() {
    REQUIRE(run({"--seed", "4", "generate", "--videos", "2", "--frames", "30", "--size", "64x96", "-o",
                 data.string(), "--backgrounds", "flat_color,checker"})
                .code == 0);
  }

  Outcome train(const std::string& id, std::vector<std::string> extra = {}) const {
    std::vector<std::string> args{"--runs-dir", runs.string(), "--seed", "1",      "train",         "--data",
                                  data.string(), "--run-id", id,          "--width", "0.125",          "--epochs",
                                  "1",           "--max-steps", "2",      "--batch-size", "2",          "--size",
                                  "64x96"};
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  }

  // The default mustan2 run the evaluate/predict/report cases build on.
  fs::path first() {
    if (!fs::exists(runs / "first")) {
      const auto r = train("first");
      REQUIRE_MESSAGE(r.code == 0, r.err);
      CHECK(r.out.find("run first") != std::string::npos);
    }
    return runs;
  }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("generate writes a scan-ready toyset deterministically") {
  const fs::path root = mustan::testing::fresh_dir("cli-generate");
  const auto a = run({"--seed", "9", "generate", "--videos", "2", "--frames", "5", "--size", "32x64", "-o",
                      (root / "a").string(), "--lighting", "night", "--jitter", "1"});
  REQUIRE(a.code == 0);
  CHECK(a.out.find("manifest.json") != std::string::npos);
  CHECK(count_files(root / "a" / "video_001" / "masks") == 5);
  const auto b = run({"--seed", "9", "generate", "--videos", "2", "--frames", "5", "--size", "32x64", "-o",
                      (root / "b").string(), "--lighting", "night", "--jitter", "1"});
  REQUIRE(b.code == 0);
  CHECK(read_all(root / "a" / "video_001" / "frames" / "000003.png") ==
        read_all(root / "b" / "video_001" / "frames" / "000003.png"));
  const json manifest = read_json(root / "a" / "manifest.json");
  CHECK(manifest["videos"][0]["spec"]["lighting"] == "night");

  // Refuses to clobber without --overwrite; bad sizes are a usage error.
  CHECK(run({"generate", "-o", (root / "a").string()}).code == 1);
  CHECK(run({"generate", "-o", (root / "a").string(), "--overwrite"}).code == 0);
  CHECK(run({"generate", "-o", (root / "c").string(), "--size", "30x64"}).code == 2);
}

TEST_CASE("train records the run with the reference defaults") {
  auto& ws = workspace();
  const fs::path dir = ws.first() / "first";
  const json cfg = read_json(dir / "config.json");
  CHECK(cfg["lr0"] == 1e-4);
  CHECK(cfg["step_size"] == 20);
  CHECK(cfg["gamma"] == 0.1);
  CHECK(cfg["batch_size"] == 2);
  CHECK(cfg["model"]["T"] == 3);
  CHECK(cfg["seed"] == 1);
  const json rec = read_json(dir / "run.json");
  CHECK(rec["status"] == "completed");
  CHECK(rec["arch"] == "mustan2");
  CHECK(fs::exists(dir / rec["best_checkpoint"].get<std::string>()));
  std::istringstream log(read_all(dir / "log.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    CHECK(json::parse(line)["step"] == 2);
    ++lines;
  }
  CHECK(lines == 1);

  // An explicit run id is never reused.
  const auto again = ws.train("first");
  CHECK(again.code == 1);
  CHECK(again.err.find("already exists") != std::string::npos);

  CHECK(ws.train("bad", {"--arch", "resnet"}).code == 2);
  CHECK(ws.train("bad", {"--split", "1.5"}).code == 2);
  CHECK(run({"train"}).code == 2);
  CHECK_FALSE(fs::exists(ws.runs / "bad"));
}

TEST_CASE("a single-frame window and the baseline train") {
  auto& ws = workspace();
  const auto m1 = ws.train("m1-t1", {"--arch", "mustan1", "--T", "1"});
  REQUIRE_MESSAGE(m1.code == 0, m1.err);
  CHECK(read_json(ws.runs / "m1-t1" / "config.json")["model"]["T"] == 1);
  const auto unet = ws.train("unet", {"--arch", "unet"});
  REQUIRE_MESSAGE(unet.code == 0, unet.err);
  CHECK(read_json(ws.runs / "unet" / "run.json")["arch"] == "unet_baseline");
}

TEST_CASE("evaluate prints a category table and appends to the run") {
  auto& ws = workspace();
  ws.first();
  const fs::path ckpt = ws.runs / "first" / "checkpoints" / "best.ckpt";
  const auto r = run({"evaluate", "--checkpoint", ckpt.string(), "--data", ws.data.string(), "--ood"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("Avg.") != std::string::npos);
  CHECK(r.out.find("flat_color") != std::string::npos);
  CHECK(r.out.find("checker") != std::string::npos);
  CHECK(fs::exists(ws.runs / "first" / "report-ood.csv"));
  const json rec = read_json(ws.runs / "first" / "run.json");
  REQUIRE(rec["reports"].size() >= 1);
  CHECK(rec["reports"].back()["label"] == "ood");

  const auto missing = run({"evaluate", "--checkpoint", (ws.root / "nope.ckpt").string(), "--data", ws.data.string()});
  CHECK(missing.code == 2);
}

TEST_CASE("predict writes 16-bit probabilities and consistent masks") {
  auto& ws = workspace();
  ws.first();
  const fs::path ckpt = ws.runs / "first" / "checkpoints" / "best.ckpt";
  const fs::path out = ws.root / "pred";
  const auto r = run({"predict", "--checkpoint", ckpt.string(), "--video", (ws.data / "video_000").string(), "-o",
                      out.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(count_files(out / "probabilities") == 30);
  CHECK(count_files(out / "masks") == 30);
  for (int i : {1, 15, 30}) {
    char name[16];
    std::snprintf(name, sizeof(name), "%06d.png", i);
    const mustan::Mask mask = mustan::read_gray8((out / "masks" / name).string());
    const mustan::Gray16 prob = mustan::read_gray16((out / "probabilities" / name).string());
    CHECK(mask.rows() == 64);
    CHECK(mask.cols() == 96);
    CHECK(((mask == 0) || (mask == 255)).all());
    const mustan::Mask rethresholded =
        ((prob.cast<double>() / 65535.0) >= 0.5).cast<std::uint8_t>() * std::uint8_t(255);
    CHECK((rethresholded == mask).all());
  }
}

TEST_CASE("report compares runs and skips broken ones") {
  auto& ws = workspace();
  ws.first();
  if (!fs::exists(ws.runs / "second")) REQUIRE(ws.train("second", {"--arch", "mustan1"}).code == 0);
  fs::create_directories(ws.runs / "zz-broken");
  std::ofstream(ws.runs / "zz-broken" / "run.json") << "{not json";
  const auto r = run({"--runs-dir", ws.runs.string(), "report", "--csv", (ws.root / "report.csv").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("first") != std::string::npos);
  CHECK(r.out.find("second") != std::string::npos);
  CHECK(r.out.find("mustan1") != std::string::npos);
  CHECK(r.err.find("zz-broken") != std::string::npos);
  CHECK(fs::exists(ws.root / "report.csv"));

  const fs::path empty = mustan::testing::fresh_dir("cli-empty-runs");
  const auto none = run({"--runs-dir", empty.string(), "report"});
  CHECK(none.code == 1);
  CHECK(none.err.find("no runs found") != std::string::npos);
}
