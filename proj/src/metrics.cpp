#include "mustan/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "mustan/error.hpp"

namespace mustan {

namespace {

double safe_ratio(std::uint64_t hits, std::uint64_t misses) {
  const std::uint64_t den = hits + misses;
  if (den == 0) return misses == 0 ? 1.0 : 0.0;
  return static_cast<double>(hits) / static_cast<double>(den);
}

Scores mean_of(const std::vector<Scores>& items) {
  Scores m;
  if (items.empty()) return m;
  for (const auto& s : items) {
    m.precision += s.precision;
    m.recall += s.recall;
    m.specificity += s.specificity;
    m.f1 += s.f1;
  }
  const double n = static_cast<double>(items.size());
  m.precision /= n;
  m.recall /= n;
  m.specificity /= n;
  m.f1 /= n;
  return m;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

ConfusionCounts confusion_counts(const Mask& pred, const Mask& target, const Mask& ignore) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() || pred.rows() != ignore.rows() ||
      pred.cols() != ignore.cols())
    throw ShapeError("confusion_counts: mask shapes disagree");
  ConfusionCounts c;
  const Eigen::Index n = pred.size();
  const std::uint8_t* p = pred.data();
  const std::uint8_t* t = target.data();
  const std::uint8_t* ig = ignore.data();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (ig[i]) continue;
    const bool fg_pred = p[i] != 0;
    const bool fg_true = t[i] != 0;
    if (fg_pred && fg_true)
      ++c.tp;
    else if (fg_pred)
      ++c.fp;
    else if (fg_true)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

Scores metrics_from_counts(const ConfusionCounts& c) {
  Scores s;
  s.precision = safe_ratio(c.tp, c.fp);
  s.recall = safe_ratio(c.tp, c.fn);
  s.specificity = safe_ratio(c.tn, c.fp);
  const double sum = s.precision + s.recall;
  s.f1 = sum > 0 ? 2.0 * s.precision * s.recall / sum : 0.0;
  return s;
}

MetricsReport aggregate_report(const std::vector<FrameCounts>& per_frame, OverallMode mode) {
  if (per_frame.empty()) throw Error("aggregate_report: no frames to aggregate");
  MetricsReport report;
  report.mode = mode;
  for (const auto& f : per_frame) {
    report.counts[f.video_id] += f.counts;
    auto [it, inserted] = report.video_category.emplace(f.video_id, f.category);
    if (!inserted && it->second != f.category)
      throw Error("video " + f.video_id + " listed under categories " + it->second + " and " + f.category);
  }
  std::map<std::string, std::vector<Scores>> by_category;
  std::vector<Scores> all_videos;
  for (const auto& [video, counts] : report.counts) {
    const Scores s = metrics_from_counts(counts);
    report.per_video[video] = s;
    by_category[report.video_category[video]].push_back(s);
    all_videos.push_back(s);
  }
  std::vector<Scores> categories;
  for (const auto& [category, scores] : by_category) {
    report.per_category[category] = mean_of(scores);
    categories.push_back(report.per_category[category]);
  }
  report.overall = mode == OverallMode::category_mean ? mean_of(categories) : mean_of(all_videos);
  return report;
}

std::string report_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "level,name,category,precision,recall,specificity,f1,tp,fp,fn,tn\n";
  auto row = [&](const std::string& level, const std::string& name, const std::string& category,
                 const Scores& s, const ConfusionCounts* c) {
    out << level << ',' << csv_field(name) << ',' << csv_field(category) << ',' << fmt4(s.precision) << ','
        << fmt4(s.recall) << ',' << fmt4(s.specificity) << ',' << fmt4(s.f1);
    if (c)
      out << ',' << c->tp << ',' << c->fp << ',' << c->fn << ',' << c->tn;
    else
      out << ",,,,";
    out << '\n';
  };
  for (const auto& [video, s] : report.per_video)
    row("video", video, report.video_category.at(video), s, &report.counts.at(video));
  for (const auto& [category, s] : report.per_category) row("category", category, category, s, nullptr);
  row("overall", report.label.empty() ? "overall" : report.label, "", report.overall, nullptr);
  return out.str();
}

std::string render_report_table(const MetricsReport& report) {
  std::size_t width = 8;
  for (const auto& [category, s] : report.per_category) width = std::max(width, category.size());
  auto pad = [&](const std::string& s) { return s + std::string(width - std::min(width, s.size()), ' '); };

  std::ostringstream out;
  if (!report.label.empty()) out << "[" << report.label << "]\n";
  out << pad("Category") << " | F1\n" << std::string(width, '-') << "-+-------\n";
  for (const auto& [category, s] : report.per_category) out << pad(category) << " | " << fmt4(s.f1) << '\n';
  out << pad("Avg.") << " | " << fmt4(report.overall.f1) << "\n\n";
  out << "Pr " << fmt4(report.overall.precision) << "  Re " << fmt4(report.overall.recall) << "  Sp "
      << fmt4(report.overall.specificity) << "  F1 " << fmt4(report.overall.f1) << "  ("
      << (report.mode == OverallMode::category_mean ? "mean over categories" : "mean over videos") << ")\n";
  return out.str();
}

}  // namespace mustan
