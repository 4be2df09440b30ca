#include "mustan/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mustan/checkpoint.hpp"
#include "mustan/dataio.hpp"
#include "mustan/image_io.hpp"
#include "mustan/toygen.hpp"
#include "mustan/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mustan {

namespace {

json scores_json(const Scores& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"specificity", s.specificity}, {"f1", s.f1}};
}

Scores scores_from(const json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("specificity").get<double>(),
          j.at("f1").get<double>()};
}

json counts_json(const ConfusionCounts& c) { return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}}; }

ConfusionCounts counts_from(const json& j) {
  return {j.at("tp").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(), j.at("fn").get<std::uint64_t>(),
          j.at("tn").get<std::uint64_t>()};
}

std::string now_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  const fs::path tmp = path.string() + ".partial";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump(2) << "\n";
    if (!out) throw Error("cannot write " + path.string());
  }
  fs::rename(tmp, path);
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

Resolution parse_size(const std::string& text) {
  Resolution r;
  char x = 0;
  std::istringstream in(text);
  if (!(in >> r.height >> x >> r.width) || (x != 'x' && x != 'X') || !in.eof() || r.height <= 0 || r.width <= 0)
    throw CLI::ValidationError("--size", "expected HxW, got '" + text + "'");
  if (r.height % 32 != 0 || r.width % 32 != 0)
    throw CLI::ValidationError("--size", "height and width must be multiples of 32, got '" + text + "'");
  return r;
}

const auto kSizeCheck = CLI::Validator(
    [](std::string& s) {
      try {
        parse_size(s);
      } catch (const CLI::ValidationError& e) {
        return std::string(e.what());
      }
      return std::string();
    },
    "HxW");

bool looks_like_cdnet(const fs::path& root) {
  if (!fs::is_directory(root)) return false;
  for (const auto& category : fs::directory_iterator(root)) {
    if (!category.is_directory()) continue;
    for (const auto& video : fs::directory_iterator(category.path()))
      if (video.is_directory() && fs::is_directory(video.path() / "input")) return true;
  }
  return false;
}

DatasetManifest scan_dataset(const std::string& root, const std::string& layout, std::ostream& err) {
  if (!fs::is_directory(root)) throw DataError("dataset directory " + root + " does not exist");
  const bool cdnet = layout == "cdnet" || (layout == "auto" && looks_like_cdnet(root));
  DatasetManifest m = cdnet ? scan_cdnet(root) : scan_simple(root);
  for (const auto& w : m.warnings) err << "warning: " << w << "\n";
  return m;
}

std::string format_fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string format_millions(std::int64_t n) { return format_fixed(static_cast<double>(n) / 1e6, 2) + "M"; }

// ---- generate ------------------------------------------------------------

struct GenerateArgs {
  int videos = 4;
  int frames = 30;
  std::string size = "64x96";
  std::string out;
  std::vector<std::string> backgrounds{"flat_color"};
  std::string lighting = "day";
  int jitter = 0;
  int min_sprites = 1;
  int max_sprites = 3;
  std::string spec_file;
  bool overwrite = false;
};

int cmd_generate(const GenerateArgs& a, std::uint64_t seed, std::ostream& out) {
  std::vector<toygen::SceneSpec> specs;
  if (!a.spec_file.empty()) {
    const json j = read_json_file(a.spec_file);
    const json& list = j.is_object() ? j.at("videos") : j;
    for (const auto& entry : list) specs.push_back((entry.contains("spec") ? entry.at("spec") : entry).get<toygen::SceneSpec>());
  } else {
    const Resolution size = parse_size(a.size);
    toygen::RandomSceneOptions opt;
    opt.height = size.height;
    opt.width = size.width;
    opt.num_frames = a.frames;
    opt.min_sprites = a.min_sprites;
    opt.max_sprites = a.max_sprites;
    opt.lighting = toygen::parse_lighting(a.lighting);
    opt.camera_jitter = a.jitter;
    std::vector<toygen::Background> backgrounds;
    for (const auto& b : a.backgrounds) backgrounds.push_back(toygen::parse_background(b));
    // Backgrounds are assigned round-robin so every requested one appears.
    for (int i = 0; i < a.videos; ++i) {
      opt.backgrounds = {backgrounds[static_cast<std::size_t>(i) % backgrounds.size()]};
      specs.push_back(toygen::random_scene(seed * 1000003ull + static_cast<std::uint64_t>(i), opt));
    }
  }
  out << toygen::write_toyset(specs, a.out, a.overwrite) << "\n";
  return 0;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string arch = "mustan2";
  std::string data;
  std::string layout = "auto";
  std::string run_id;
  std::string frame_list;
  std::string size;
  double width = 1.0;
  int epochs = 40;
  int T = 3;
  int batch_size = 8;
  double lr = 1e-4;
  int max_steps = 0;
  double split = 0.9;
  int frame_stride = 1;
  bool no_share = false;
  std::string pretrained;
};

std::string unique_run_id(const fs::path& runs, const std::string& base) {
  if (!fs::exists(runs / base)) return base;
  for (int k = 2;; ++k) {
    const std::string id = base + "-" + std::to_string(k);
    if (!fs::exists(runs / id)) return id;
  }
}

int cmd_train(const TrainArgs& a, const CLI::App& sub, const CLI::App& app, std::uint64_t seed,
              const std::string& config_path, const fs::path& runs, std::ostream& out, std::ostream& err) {
  TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_train_config(config_path);
  const auto given = [&](const char* flag) { return sub.count(flag) > 0; };
  if (given("--arch")) cfg.model.arch = parse_arch(a.arch);
  if (given("--width")) cfg.model.width_factor = a.width;
  if (given("--epochs")) cfg.epochs = a.epochs;
  if (given("--T")) {
    cfg.model.T = a.T;
  } else if (given("--arch") && cfg.model.arch == Arch::unet_baseline) {
    cfg.model.T = 1;
  }
  if (given("--batch-size")) cfg.batch_size = a.batch_size;
  if (given("--lr")) cfg.lr0 = a.lr;
  if (given("--max-steps")) cfg.max_steps = a.max_steps;
  if (given("--split")) cfg.split_ratio = a.split;
  if (given("--frame-stride")) cfg.frame_stride = a.frame_stride;
  if (given("--size")) cfg.resolution = parse_size(a.size);
  if (given("--no-share")) cfg.model.share_mustan2_encoders = false;
  if (given("--pretrained")) {
    cfg.model.pretrained = true;
    cfg.model.pretrained_path = a.pretrained;
  }
  if (app.count("--seed")) cfg.seed = seed;
  cfg.validate();

  DatasetManifest manifest = scan_dataset(a.data, a.layout, err);
  if (!a.frame_list.empty()) restrict_to_frame_list(manifest, a.frame_list);

  fs::create_directories(runs);
  std::string run_id = a.run_id;
  if (run_id.empty()) {
    run_id = unique_run_id(runs, to_string(cfg.model.arch) + "-s" + std::to_string(cfg.seed));
  } else if (fs::exists(runs / run_id)) {
    err << "error: run '" << run_id << "' already exists in " << runs.string() << "; runs are never overwritten\n";
    return 1;
  }
  const fs::path run_dir = runs / run_id;
  fs::create_directories(run_dir);
  save_train_config(cfg, (run_dir / "config.json").string());

  json record{{"run_id", run_id},
              {"arch", to_string(cfg.model.arch)},
              {"data", fs::absolute(a.data).lexically_normal().string()},
              {"layout", manifest.layout_kind == LayoutKind::cdnet ? "cdnet" : "simple"},
              {"config", "config.json"},
              {"status", "running"},
              {"started_at", now_utc()},
              {"reports", json::array()}};
  if (!a.frame_list.empty()) record["frame_list"] = fs::absolute(a.frame_list).string();
  write_json_file(run_dir / "run.json", record);

  try {
    const TrainResult result = train(cfg, manifest, run_dir.string());
    record["status"] = "completed";
    record["parameter_count"] = result.parameter_count;
    record["train_clips"] = result.train_clips.size();
    record["val_clips"] = result.val_clips.size();
    record["last_checkpoint"] = fs::relative(result.last_checkpoint, run_dir).string();
    record["best_checkpoint"] = fs::relative(result.best_checkpoint, run_dir).string();
    record["finished_at"] = now_utc();
    write_json_file(run_dir / "run.json", record);
    const auto& last = result.log.back();
    out << "run " << run_id << ": " << result.log.size() << " epochs, " << last.step << " steps, final loss "
        << last.loss << "\n"
        << (run_dir / "checkpoints").string() << "\n";
    return 0;
  } catch (const Error& e) {
    record["status"] = "aborted";
    record["error"] = e.what();
    record["finished_at"] = now_utc();
    write_json_file(run_dir / "run.json", record);
    throw;
  }
}

// ---- evaluate ------------------------------------------------------------

struct EvaluateArgs {
  std::string checkpoint;
  std::string data;
  std::string layout = "auto";
  std::string label;
  std::string out_dir;
  std::string size;
  std::string frame_list;
  bool ood = false;
  bool video_mean = false;
  int frame_stride = 1;
};

Resolution checkpoint_resolution(const Archive& archive) {
  const json& extra = archive.header.value("extra", json::object());
  if (extra.contains("train_config")) return extra.at("train_config").get<TrainConfig>().resolution;
  return Resolution{};
}

// A checkpoint at <run>/checkpoints/x.ckpt belongs to <run> when run.json exists.
std::optional<fs::path> owning_run(const fs::path& checkpoint) {
  const fs::path run = fs::absolute(checkpoint).parent_path().parent_path();
  if (fs::exists(run / "run.json")) return run;
  return std::nullopt;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  const Archive archive = read_archive(a.checkpoint);
  const Resolution res = a.size.empty() ? checkpoint_resolution(archive) : parse_size(a.size);
  auto model = load_checkpoint<float>(a.checkpoint);
  DatasetManifest manifest = scan_dataset(a.data, a.layout, err);
  if (!a.frame_list.empty()) restrict_to_frame_list(manifest, a.frame_list);

  const std::string label = !a.label.empty() ? a.label : (a.ood ? "ood" : "in-domain");
  const MetricsReport report = evaluate(*model, manifest, res, a.frame_stride, label,
                                        a.video_mean ? OverallMode::video_mean : OverallMode::category_mean);

  const auto run = owning_run(a.checkpoint);
  const fs::path dir = !a.out_dir.empty() ? fs::path(a.out_dir) : (run ? *run : fs::path(a.checkpoint).parent_path());
  fs::create_directories(dir);
  const std::string table = render_report_table(report);
  write_text_file(dir / ("report-" + label + ".csv"), report_csv(report));
  write_text_file(dir / ("report-" + label + ".txt"), table);
  out << table;

  if (run) {
    json record = read_json_file(*run / "run.json");
    json entry = report_to_json(report);
    entry["checkpoint"] = fs::absolute(a.checkpoint).lexically_normal().string();
    entry["data"] = fs::absolute(a.data).lexically_normal().string();
    entry["evaluated_at"] = now_utc();
    record["reports"].push_back(entry);
    write_json_file(*run / "run.json", record);
  }
  return 0;
}

// ---- predict -------------------------------------------------------------

struct PredictArgs {
  std::string checkpoint;
  std::string video;
  std::string out_dir;
  std::string size;
};

std::vector<fs::path> list_frames(const fs::path& video) {
  fs::path dir = video;
  if (fs::is_directory(video / "frames")) dir = video / "frames";
  else if (fs::is_directory(video / "input")) dir = video / "input";
  std::vector<fs::path> frames;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp") frames.push_back(e.path());
  }
  std::sort(frames.begin(), frames.end());
  if (frames.empty()) throw DataError("no frames found under " + dir.string());
  return frames;
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const Archive archive = read_archive(a.checkpoint);
  const Resolution res = a.size.empty() ? checkpoint_resolution(archive) : parse_size(a.size);
  auto model = load_checkpoint<float>(a.checkpoint);
  const int T = model->config().T;
  const double threshold = model->config().threshold;

  const auto paths = list_frames(a.video);
  std::vector<TensorF> frames;
  frames.reserve(paths.size());
  for (const auto& p : paths) frames.push_back(rgb_to_tensor(read_rgb(p.string()), res.height, res.width));

  const fs::path prob_dir = fs::path(a.out_dir) / "probabilities";
  const fs::path mask_dir = fs::path(a.out_dir) / "masks";
  fs::create_directories(prob_dir);
  fs::create_directories(mask_dir);

  constexpr int kBatch = 4;
  const int count = static_cast<int>(frames.size());
  for (int begin = 0; begin < count; begin += kBatch) {
    const int n = std::min(kBatch, count - begin);
    TensorF window(Shape{n, 3 * T, res.height, res.width});
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < T; ++t) {
        const int idx = std::max(0, begin + i - (T - 1 - t));
        window.sample(i).middleRows(3 * t, 3) = frames[idx].sample(0);
      }
    const TensorF p = infer(*model, window);
    for (int i = 0; i < n; ++i) {
      Eigen::Map<const Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> prob(
          p.plane_data(i, 0), res.height, res.width);
      const Gray16 q = (prob.cast<double>() * 65535.0).round().cast<std::uint16_t>();
      // Thresholding the stored 16-bit value keeps the two files consistent.
      const Mask mask = ((q.cast<double>() / 65535.0) >= threshold).cast<std::uint8_t>() * std::uint8_t(255);
      char name[32];
      std::snprintf(name, sizeof(name), "%06d.png", begin + i + 1);
      write_gray16_png((prob_dir / name).string(), q);
      write_gray8_png((mask_dir / name).string(), mask);
    }
  }
  out << count << " frames -> " << a.out_dir << "\n";
  return 0;
}

// ---- report --------------------------------------------------------------

struct ReportArgs {
  std::string label;
  std::string csv;
};

int cmd_report(const ReportArgs& a, const fs::path& runs, std::ostream& out, std::ostream& err) {
  struct Row {
    std::string run_id, arch, label;
    std::optional<Scores> scores;
    std::int64_t params = 0;
  };
  std::vector<Row> rows;
  if (fs::is_directory(runs)) {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(runs))
      if (e.is_directory()) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
      try {
        const json r = read_json_file(dir / "run.json");
        Row row{r.at("run_id").get<std::string>(), r.at("arch").get<std::string>(), "", std::nullopt,
                r.at("parameter_count").get<std::int64_t>()};
        const auto& reports = r.at("reports");
        for (auto it = reports.rbegin(); it != reports.rend(); ++it) {
          const std::string label = it->at("label").get<std::string>();
          if (!a.label.empty() && label != a.label) continue;
          row.label = label;
          row.scores = scores_from(it->at("overall"));
          break;
        }
        rows.push_back(row);
      } catch (const std::exception& e) {
        err << "warning: skipping " << dir.string() << ": " << e.what() << "\n";
      }
    }
  }
  if (rows.empty()) {
    err << "error: no runs found in " << runs.string() << "\n";
    return 1;
  }

  std::size_t w = 3;
  for (const auto& r : rows) w = std::max(w, r.run_id.size());
  std::ostringstream table;
  table << std::left << std::setw(static_cast<int>(w)) << "Run" << " | " << std::setw(13) << "Arch" << " | "
        << std::setw(10) << "Report" << " |     F1 |     Pr |     Re |     Sp | Params\n";
  for (const auto& r : rows) {
    table << std::left << std::setw(static_cast<int>(w)) << r.run_id << " | " << std::setw(13) << r.arch << " | "
          << std::setw(10) << (r.label.empty() ? "-" : r.label) << " | ";
    if (r.scores) {
      for (double v : {r.scores->f1, r.scores->precision, r.scores->recall, r.scores->specificity})
        table << format_fixed(v, 4) << " | ";
    } else {
      table << "     - |      - |      - |      - | ";
    }
    table << format_millions(r.params) << "\n";
  }
  out << table.str();

  if (!a.csv.empty()) {
    std::ostringstream csv;
    csv << "run_id,arch,label,f1,precision,recall,specificity,parameters\n";
    for (const auto& r : rows) {
      csv << r.run_id << "," << r.arch << "," << r.label;
      if (r.scores)
        csv << "," << r.scores->f1 << "," << r.scores->precision << "," << r.scores->recall << ","
            << r.scores->specificity;
      else
        csv << ",,,,";
      csv << "," << r.params << "\n";
    }
    write_text_file(a.csv, csv.str());
  }
  return 0;
}

}  // namespace

json report_to_json(const MetricsReport& report) {
  json videos = json::object();
  for (const auto& [id, s] : report.per_video) {
    json v = scores_json(s);
    v["category"] = report.video_category.at(id);
    v["counts"] = counts_json(report.counts.at(id));
    videos[id] = v;
  }
  json categories = json::object();
  for (const auto& [name, s] : report.per_category) categories[name] = scores_json(s);
  return {{"label", report.label},
          {"mode", report.mode == OverallMode::video_mean ? "video_mean" : "category_mean"},
          {"overall", scores_json(report.overall)},
          {"per_category", categories},
          {"per_video", videos}};
}

MetricsReport report_from_json(const json& j) {
  MetricsReport r;
  r.label = j.at("label").get<std::string>();
  r.mode = j.at("mode").get<std::string>() == "video_mean" ? OverallMode::video_mean : OverallMode::category_mean;
  r.overall = scores_from(j.at("overall"));
  for (const auto& [name, s] : j.at("per_category").items()) r.per_category[name] = scores_from(s);
  for (const auto& [id, v] : j.at("per_video").items()) {
    r.per_video[id] = scores_from(v);
    r.video_category[id] = v.at("category").get<std::string>();
    r.counts[id] = counts_from(v.at("counts"));
  }
  return r;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Video foreground segmentation: toy data, training, evaluation", "mustan"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  std::string config_path;
  std::string runs_dir = "runs";
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--config", config_path, "Training config JSON")->check(CLI::ExistingFile);
  app.add_option("--runs-dir", runs_dir, "Directory holding run records");

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a procedural toy dataset");
  generate->add_option("--videos", gen.videos, "Number of videos")->check(CLI::PositiveNumber);
  generate->add_option("--frames", gen.frames, "Frames per video")->check(CLI::PositiveNumber);
  generate->add_option("--size", gen.size, "Frame size HxW")->check(kSizeCheck);
  generate->add_option("-o,--out", gen.out, "Output directory")->required();
  generate->add_option("--backgrounds", gen.backgrounds, "Backgrounds, assigned round-robin")
      ->delimiter(',')
      ->check(CLI::IsMember({"flat_color", "gradient", "checker", "noise_flicker"}));
  generate->add_option("--lighting", gen.lighting, "day or night")->check(CLI::IsMember({"day", "night"}));
  generate->add_option("--jitter", gen.jitter, "Max camera shift per frame (pixels)")->check(CLI::NonNegativeNumber);
  generate->add_option("--min-sprites", gen.min_sprites)->check(CLI::NonNegativeNumber);
  generate->add_option("--max-sprites", gen.max_sprites)->check(CLI::NonNegativeNumber);
  generate->add_option("--spec", gen.spec_file, "JSON list of scene specs")->check(CLI::ExistingFile);
  generate->add_flag("--overwrite", gen.overwrite, "Replace an existing toyset");

  TrainArgs tr;
  auto* trainc = app.add_subcommand("train", "Train a model and record the run");
  trainc->add_option("--arch", tr.arch)->check(CLI::IsMember({"mustan1", "mustan2", "unet", "unet_baseline"}));
  trainc->add_option("--data", tr.data, "Dataset root")->required()->check(CLI::ExistingDirectory);
  trainc->add_option("--layout", tr.layout)->check(CLI::IsMember({"auto", "cdnet", "simple"}));
  trainc->add_option("--run-id", tr.run_id);
  trainc->add_option("--frame-list", tr.frame_list, "Restrict annotations to listed frames")
      ->check(CLI::ExistingFile);
  trainc->add_option("--width", tr.width, "Channel width factor")->check(CLI::PositiveNumber);
  trainc->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber);
  trainc->add_option("--T", tr.T, "Temporal window length")->check(CLI::PositiveNumber);
  trainc->add_option("--batch-size", tr.batch_size)->check(CLI::PositiveNumber);
  trainc->add_option("--lr", tr.lr, "Initial learning rate")->check(CLI::PositiveNumber);
  trainc->add_option("--max-steps", tr.max_steps)->check(CLI::NonNegativeNumber);
  trainc->add_option("--split", tr.split, "Training fraction; 1 disables validation")->check(CLI::Range(0.0, 1.0));
  trainc->add_option("--frame-stride", tr.frame_stride)->check(CLI::PositiveNumber);
  trainc->add_option("--size", tr.size, "Training resolution HxW")->check(kSizeCheck);
  trainc->add_flag("--no-share", tr.no_share, "Separate encoder per frame (mustan2)");
  trainc->add_option("--pretrained", tr.pretrained, "ResNet18 weight archive")->check(CLI::ExistingFile);

  EvaluateArgs ev;
  auto* evaluatec = app.add_subcommand("evaluate", "Score a checkpoint on a dataset");
  evaluatec->add_option("--checkpoint", ev.checkpoint)->required()->check(CLI::ExistingFile);
  evaluatec->add_option("--data", ev.data, "Dataset root")->required()->check(CLI::ExistingDirectory);
  evaluatec->add_option("--layout", ev.layout)->check(CLI::IsMember({"auto", "cdnet", "simple"}));
  evaluatec->add_option("--label", ev.label, "Report label");
  evaluatec->add_flag("--ood", ev.ood, "Label the report out-of-domain");
  evaluatec->add_option("--out", ev.out_dir, "Directory for report files");
  evaluatec->add_option("--size", ev.size, "Evaluation resolution HxW")->check(kSizeCheck);
  evaluatec->add_option("--frame-list", ev.frame_list)->check(CLI::ExistingFile);
  evaluatec->add_option("--frame-stride", ev.frame_stride)->check(CLI::PositiveNumber);
  evaluatec->add_flag("--video-mean", ev.video_mean, "Average videos instead of categories");

  PredictArgs pr;
  auto* predictc = app.add_subcommand("predict", "Write probability maps and masks for a video");
  predictc->add_option("--checkpoint", pr.checkpoint)->required()->check(CLI::ExistingFile);
  predictc->add_option("--video", pr.video, "Video directory")->required()->check(CLI::ExistingDirectory);
  predictc->add_option("-o,--out", pr.out_dir)->required();
  predictc->add_option("--size", pr.size, "Inference resolution HxW")->check(kSizeCheck);

  ReportArgs rp;
  auto* reportc = app.add_subcommand("report", "Compare recorded runs");
  reportc->add_option("--label", rp.label, "Use the latest report with this label");
  reportc->add_option("--csv", rp.csv, "Also write the table as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*generate) return cmd_generate(gen, seed, out);
    if (*trainc) return cmd_train(tr, *trainc, app, seed, config_path, runs_dir, out, err);
    if (*evaluatec) return cmd_evaluate(ev, out, err);
    if (*predictc) return cmd_predict(pr, out);
    if (*reportc) return cmd_report(rp, runs_dir, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace mustan
