#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mustan/clip.hpp"
#include "mustan/config.hpp"

namespace mustan {

enum class LayoutKind { cdnet, simple };

struct TemporalRoi {
  int first = 1;
  int last = 1;  // inclusive, 1-based
  friend bool operator==(const TemporalRoi&, const TemporalRoi&) = default;
};

struct VideoEntry {
  std::string video_id;
  std::string category;
  std::vector<std::string> frame_paths;
  // Aligned with frame_paths; empty string = frame not annotated.
  std::vector<std::string> annotation_paths;
  std::optional<Mask> roi_mask;  // nonzero = inside the region of interest
  std::optional<TemporalRoi> temporal_roi;

  int num_frames() const { return static_cast<int>(frame_paths.size()); }
  bool annotated(int frame) const { return !annotation_paths[frame - 1].empty(); }
};

struct DatasetManifest {
  std::vector<VideoEntry> videos;
  LayoutKind layout_kind = LayoutKind::simple;
  std::string root_path;
  std::vector<std::string> warnings;

  const VideoEntry& video(const std::string& video_id) const;
};

// <root>/<category>/<video>/{input/in%06d.jpg, groundtruth/gt%06d.png,
// temporalROI.txt, ROI.*}. Video ids are "<category>/<video>".
DatasetManifest scan_cdnet(const std::string& root);

// <root>/<video>/{frames,masks}/%06d.png; an optional category.txt
// overrides the default category (the video directory name).
DatasetManifest scan_simple(const std::string& root);

struct DecodedLabel {
  Mask target;
  Mask ignore;
};

// 255 -> foreground; 0, 50 -> background; 85, 170 -> ignored.
DecodedLabel decode_cdnet_label(const Mask& label);

// One clip per annotated frame inside the temporal ROI. Window indices
// before frame 1 are clamped to frame 1.
std::vector<ClipRef> build_clip_index(const DatasetManifest& manifest, int T, int frame_stride = 1);

ClipSample load_clip(const DatasetManifest& manifest, const ClipRef& clip, Resolution out_hw);

struct ClipSplit {
  std::vector<ClipRef> train;
  std::vector<ClipRef> val;
};

// Seeded shuffle then |train| = round(ratio * N).
ClipSplit split_train_val(const std::vector<ClipRef>& clips, double ratio, std::uint64_t seed);
// Same rule applied within each video (videos in first-appearance order).
ClipSplit split_train_val_per_video(const std::vector<ClipRef>& clips, double ratio, std::uint64_t seed);

// Keeps annotations only for the frames listed in `path`: one
// "<video_id> <frame>" pair per line, '#' starts a comment.
void restrict_to_frame_list(DatasetManifest& manifest, const std::string& path);

nlohmann::json manifest_to_json(const DatasetManifest& manifest);

}  // namespace mustan
