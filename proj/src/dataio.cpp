#include "mustan/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "mustan/error.hpp"
#include "mustan/image_io.hpp"

namespace fs = std::filesystem;

namespace mustan {

namespace {

bool is_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::vector<fs::path> sorted_images(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_image(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<fs::path> sorted_subdirs(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// "in000123.jpg" -> 123
int frame_number(const fs::path& p, const std::string& prefix) {
  const std::string stem = p.stem().string();
  if (stem.rfind(prefix, 0) != 0) return -1;
  try {
    std::size_t used = 0;
    const int n = std::stoi(stem.substr(prefix.size()), &used);
    return used == stem.size() - prefix.size() ? n : -1;
  } catch (const std::exception&) {
    return -1;
  }
}

std::optional<fs::path> find_roi_image(const fs::path& video_dir) {
  for (const char* name : {"ROI.bmp", "ROI.png", "ROI.jpg"}) {
    const fs::path p = video_dir / name;
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

void require_annotated(DatasetManifest& m) {
  std::vector<VideoEntry> kept;
  for (auto& v : m.videos) {
    const bool any = std::any_of(v.annotation_paths.begin(), v.annotation_paths.end(),
                                 [](const std::string& s) { return !s.empty(); });
    if (any)
      kept.push_back(std::move(v));
    else
      m.warnings.push_back("video " + v.video_id + " has no annotated frames; skipped");
  }
  m.videos = std::move(kept);
}

}  // namespace

const VideoEntry& DatasetManifest::video(const std::string& video_id) const {
  for (const auto& v : videos)
    if (v.video_id == video_id) return v;
  throw DataError("video '" + video_id + "' not in manifest rooted at " + root_path);
}

DatasetManifest scan_cdnet(const std::string& root) {
  DatasetManifest m;
  m.layout_kind = LayoutKind::cdnet;
  m.root_path = root;
  if (!fs::is_directory(root)) throw DataError("dataset root " + root + " is not a directory");
  for (const auto& category_dir : sorted_subdirs(root)) {
    for (const auto& video_dir : sorted_subdirs(category_dir)) {
      VideoEntry v;
      v.category = category_dir.filename().string();
      v.video_id = v.category + "/" + video_dir.filename().string();
      const fs::path input = video_dir / "input";
      const fs::path gt = video_dir / "groundtruth";
      if (!fs::is_directory(input))
        throw DataError("malformed CDnet layout: video " + v.video_id + " has no input directory");
      const auto frames = sorted_images(input);
      for (std::size_t i = 0; i < frames.size(); ++i) {
        const int number = frame_number(frames[i], "in");
        if (number != static_cast<int>(i) + 1)
          throw DataError("malformed CDnet layout: video " + v.video_id + " frame " +
                          frames[i].filename().string() + " breaks the in%06d numbering");
        v.frame_paths.push_back(frames[i].string());
        char name[32];
        std::snprintf(name, sizeof(name), "gt%06d.png", number);
        const fs::path label = gt / name;
        v.annotation_paths.push_back(fs::exists(label) ? label.string() : std::string());
      }

      const fs::path roi_txt = video_dir / "temporalROI.txt";
      if (fs::exists(roi_txt)) {
        std::ifstream in(roi_txt);
        TemporalRoi roi;
        if (!(in >> roi.first >> roi.last) || roi.first < 1 || roi.last < roi.first ||
            roi.last > v.num_frames())
          throw DataError("video " + v.video_id + ": invalid temporalROI.txt");
        v.temporal_roi = roi;
      }

      if (const auto roi_path = find_roi_image(video_dir)) {
        try {
          v.roi_mask = read_gray8(roi_path->string());
        } catch (const DataError& e) {
          m.warnings.push_back("video " + v.video_id + ": ROI image unreadable (" + e.what() + "); ignoring it");
        }
      }
      m.videos.push_back(std::move(v));
    }
  }
  require_annotated(m);
  return m;
}

DatasetManifest scan_simple(const std::string& root) {
  DatasetManifest m;
  m.layout_kind = LayoutKind::simple;
  m.root_path = root;
  if (!fs::is_directory(root)) throw DataError("dataset root " + root + " is not a directory");
  for (const auto& video_dir : sorted_subdirs(root)) {
    const fs::path frames_dir = video_dir / "frames";
    const fs::path masks_dir = video_dir / "masks";
    if (!fs::is_directory(frames_dir)) continue;
    VideoEntry v;
    v.video_id = video_dir.filename().string();
    v.category = v.video_id;
    if (std::ifstream cat(video_dir / "category.txt"); cat) {
      std::string line;
      if (std::getline(cat, line) && !line.empty()) v.category = line;
    }
    const auto frames = sorted_images(frames_dir);
    const auto masks = fs::is_directory(masks_dir) ? sorted_images(masks_dir) : std::vector<fs::path>{};
    if (frames.size() != masks.size())
      throw DataError("alignment error: video " + v.video_id + " has " + std::to_string(frames.size()) +
                      " frames but " + std::to_string(masks.size()) + " masks");
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (frames[i].stem() != masks[i].stem())
        throw DataError("alignment error: video " + v.video_id + " pairs frame " + frames[i].filename().string() +
                        " with mask " + masks[i].filename().string());
      v.frame_paths.push_back(frames[i].string());
      v.annotation_paths.push_back(masks[i].string());
    }
    m.videos.push_back(std::move(v));
  }
  require_annotated(m);
  return m;
}

DecodedLabel decode_cdnet_label(const Mask& label) {
  DecodedLabel out{Mask::Zero(label.rows(), label.cols()), Mask::Zero(label.rows(), label.cols())};
  for (Eigen::Index i = 0; i < label.size(); ++i) {
    switch (label.data()[i]) {
      case 255:
        out.target.data()[i] = 1;
        break;
      case 0:
      case 50:
        break;
      case 85:
      case 170:
        out.ignore.data()[i] = 1;
        break;
      default:
        throw DecodeError("CDnet label value " + std::to_string(label.data()[i]) + " at pixel " +
                          std::to_string(i) + " is not one of {0, 50, 85, 170, 255}");
    }
  }
  return out;
}

std::vector<ClipRef> build_clip_index(const DatasetManifest& manifest, int T, int frame_stride) {
  if (T < 1) throw ConfigError("build_clip_index: T must be >= 1");
  if (frame_stride < 1) throw ConfigError("build_clip_index: frame_stride must be >= 1");
  std::vector<ClipRef> clips;
  for (const auto& v : manifest.videos) {
    const int first = v.temporal_roi ? v.temporal_roi->first : 1;
    const int last = v.temporal_roi ? v.temporal_roi->last : v.num_frames();
    for (int current = first; current <= last; ++current) {
      if (!v.annotated(current)) continue;
      ClipRef clip{v.video_id, current, {}};
      for (int k = T - 1; k >= 0; --k) clip.window_indices.push_back(std::max(1, current - k * frame_stride));
      clips.push_back(std::move(clip));
    }
  }
  return clips;
}

ClipSample load_clip(const DatasetManifest& manifest, const ClipRef& clip, Resolution out_hw) {
  if (out_hw.height <= 0 || out_hw.width <= 0 || out_hw.height % 32 != 0 || out_hw.width % 32 != 0)
    throw ShapeError("load_clip: output size " + std::to_string(out_hw.height) + "x" +
                     std::to_string(out_hw.width) + " is not divisible by 32");
  const VideoEntry& v = manifest.video(clip.video_id);
  auto check_index = [&](int i) {
    if (i < 1 || i > v.num_frames())
      throw DataError("clip index " + std::to_string(i) + " outside video " + v.video_id);
  };
  check_index(clip.current_index);
  if (!v.annotated(clip.current_index))
    throw DataError("frame " + std::to_string(clip.current_index) + " of " + v.video_id + " has no annotation");

  ClipSample sample;
  sample.meta = clip;
  for (int i : clip.window_indices) {
    check_index(i);
    sample.frames.push_back(rgb_to_tensor(read_rgb(v.frame_paths[i - 1]), out_hw.height, out_hw.width));
  }

  const Mask label = read_gray8(v.annotation_paths[clip.current_index - 1]);
  DecodedLabel decoded;
  if (manifest.layout_kind == LayoutKind::cdnet) {
    decoded = decode_cdnet_label(label);
  } else {
    decoded.target = (label >= 128).cast<std::uint8_t>();
    decoded.ignore = Mask::Zero(label.rows(), label.cols());
  }
  if (v.roi_mask) {
    if (v.roi_mask->rows() != label.rows() || v.roi_mask->cols() != label.cols())
      throw DataError("video " + v.video_id + ": ROI size does not match ground truth size");
    decoded.ignore = (decoded.ignore != 0 || *v.roi_mask == 0).cast<std::uint8_t>();
  }
  sample.target = resize_nearest(decoded.target, out_hw.height, out_hw.width);
  sample.ignore = resize_nearest(decoded.ignore, out_hw.height, out_hw.width);
  return sample;
}

namespace {

ClipSplit split_range(std::vector<ClipRef> clips, double ratio, std::mt19937_64& rng) {
  std::shuffle(clips.begin(), clips.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(clips.size())));
  ClipSplit out;
  out.train.assign(clips.begin(), clips.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.val.assign(clips.begin() + static_cast<std::ptrdiff_t>(n_train), clips.end());
  return out;
}

void check_ratio(double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1), got " + std::to_string(ratio));
}

}  // namespace

ClipSplit split_train_val(const std::vector<ClipRef>& clips, double ratio, std::uint64_t seed) {
  check_ratio(ratio);
  std::mt19937_64 rng(seed);
  return split_range(clips, ratio, rng);
}

ClipSplit split_train_val_per_video(const std::vector<ClipRef>& clips, double ratio, std::uint64_t seed) {
  check_ratio(ratio);
  std::mt19937_64 rng(seed);
  std::vector<std::string> order;
  std::map<std::string, std::vector<ClipRef>> groups;
  for (const auto& c : clips) {
    if (!groups.count(c.video_id)) order.push_back(c.video_id);
    groups[c.video_id].push_back(c);
  }
  ClipSplit out;
  for (const auto& id : order) {
    auto part = split_range(groups[id], ratio, rng);
    out.train.insert(out.train.end(), part.train.begin(), part.train.end());
    out.val.insert(out.val.end(), part.val.begin(), part.val.end());
  }
  return out;
}

void restrict_to_frame_list(DatasetManifest& manifest, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open frame list " + path);
  std::map<std::string, std::set<int>> keep;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string video;
    int frame = 0;
    if (!(fields >> video)) continue;
    if (!(fields >> frame)) throw DataError(path + ":" + std::to_string(line_no) + ": expected '<video_id> <frame>'");
    keep[video].insert(frame);
  }
  for (auto& v : manifest.videos) {
    const auto it = keep.find(v.video_id);
    for (int f = 1; f <= v.num_frames(); ++f)
      if (it == keep.end() || !it->second.count(f)) v.annotation_paths[f - 1].clear();
    v.temporal_roi.reset();
  }
  require_annotated(manifest);
}

nlohmann::json manifest_to_json(const DatasetManifest& manifest) {
  nlohmann::json videos = nlohmann::json::array();
  for (const auto& v : manifest.videos) {
    nlohmann::json annotations = nlohmann::json::array();
    for (const auto& a : v.annotation_paths) annotations.push_back(a.empty() ? nlohmann::json(nullptr) : nlohmann::json(a));
    nlohmann::json entry{{"video_id", v.video_id},
                         {"category", v.category},
                         {"frame_paths", v.frame_paths},
                         {"annotation_paths", annotations},
                         {"has_roi_mask", v.roi_mask.has_value()}};
    entry["temporal_roi"] =
        v.temporal_roi ? nlohmann::json::array({v.temporal_roi->first, v.temporal_roi->last}) : nlohmann::json(nullptr);
    videos.push_back(std::move(entry));
  }
  return {{"layout_kind", manifest.layout_kind == LayoutKind::cdnet ? "cdnet" : "simple"},
          {"root_path", manifest.root_path},
          {"videos", videos}};
}

}  // namespace mustan
