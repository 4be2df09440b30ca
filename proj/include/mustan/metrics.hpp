#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mustan/tensor.hpp"

namespace mustan {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct Scores {
  double precision = 0;
  double recall = 0;
  double specificity = 0;
  double f1 = 0;
};

// Tallies pixels whose ignore value is 0. pred/target are binary.
ConfusionCounts confusion_counts(const Mask& pred, const Mask& target, const Mask& ignore);

// Pr = tp/(tp+fp), Re = tp/(tp+fn), Sp = tn/(tn+fp), F1 = 2 Pr Re/(Pr+Re).
// A ratio with a zero denominator is 1 when its error count is 0, else 0;
// F1 is 0 when Pr + Re = 0.
Scores metrics_from_counts(const ConfusionCounts& c);

struct FrameCounts {
  std::string video_id;
  std::string category;
  ConfusionCounts counts;
};

enum class OverallMode { category_mean, video_mean };

struct MetricsReport {
  std::map<std::string, Scores> per_video;
  std::map<std::string, Scores> per_category;
  std::map<std::string, ConfusionCounts> counts;
  std::map<std::string, std::string> video_category;
  Scores overall;
  OverallMode mode = OverallMode::category_mean;
  std::string label;  // e.g. "in-domain" or "ood"
};

// Sums counts per video, scores each video, averages videos within a
// category, then averages categories (or videos, per `mode`).
MetricsReport aggregate_report(const std::vector<FrameCounts>& per_frame,
                               OverallMode mode = OverallMode::category_mean);

// CSV: header "level,name,category,precision,recall,specificity,f1,tp,fp,fn,tn";
// one row per video, per category, and an "overall" row.
std::string report_csv(const MetricsReport& report);

// Per-category F1 table with an "Avg." row, plus the four averaged metrics.
std::string render_report_table(const MetricsReport& report);

}  // namespace mustan
