#include "milthrow/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "milthrow/errors.hpp"

namespace milthrow {

namespace {

void format_double(std::ofstream& out, double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", v);
  out << buffer;
}

}  // namespace

SegmentScores predict_video(const ModelParams& params, const VideoRecord& record, const Manifest& manifest,
                            std::size_t n_segments) {
  SegmentScores mean;
  mean.video_id = record.video_id;
  mean.scores.assign(n_segments, 0.0);
  for (const auto& rel : record.feature_paths) {
    const auto clips = load_clip_features(resolve_feature_path(manifest, rel), params.input_dim());
    const auto scores = score_bag(params, pool_segments(clips, n_segments, record.label));
    for (std::size_t i = 0; i < n_segments; ++i) mean.scores[i] += scores.scores[i];
  }
  const double inv = 1.0 / static_cast<double>(record.feature_paths.size());
  for (double& s : mean.scores) s *= inv;
  return mean;
}

Vector expand_scores_to_frames(const SegmentScores& scores, std::size_t n_frames) {
  if (n_frames == 0) throw ValidationError("expand_scores_to_frames: n_frames must be >= 1");
  const std::size_t n = scores.scores.size();
  Vector frames(n_frames, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [start, end] = segment_frame_range(i, n_frames, n);
    for (std::size_t f = start; f < end; ++f) frames[f] = scores.scores[i];
  }
  return frames;
}

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw ValidationError("roc_auc: length mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (auto l : labels) n_pos += l ? 1 : 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ValidationError("roc_auc: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks over tie groups; AUC = (sum of positive ranks - P(P+1)/2) / PN.
  double sum_pos_ranks = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) sum_pos_ranks += midrank;
    i = j;
  }
  const double p = static_cast<double>(n_pos);
  return (sum_pos_ranks - p * (p + 1.0) / 2.0) / (p * static_cast<double>(n_neg));
}

std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw ValidationError("roc_points: length mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (auto l : labels) n_pos += l ? 1 : 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ValidationError("roc_points: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<RocPoint> points;
  points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < n) {
    const double threshold = scores[order[i]];
    std::size_t j = i;
    while (j < n && scores[order[j]] == threshold) {
      if (labels[order[j]]) ++tp;
      else ++fp;
      ++j;
    }
    points.push_back({threshold, static_cast<double>(tp) / static_cast<double>(n_pos),
                      static_cast<double>(fp) / static_cast<double>(n_neg)});
    i = j;
  }
  points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});
  return points;
}

double auc_from_roc(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i)
    area += (points[i + 1].fpr - points[i].fpr) * (points[i + 1].tpr + points[i].tpr) * 0.5;
  return area;
}

EvalReport evaluate(const ModelParams& params, const Manifest& manifest, const EvalOptions& options) {
  if (options.n_segments == 0) throw ValidationError("evaluate: n_segments must be >= 1");

  std::vector<const VideoRecord*> test_records;
  for (const auto& record : manifest.records)
    if (record.split == Split::test) test_records.push_back(&record);
  if (test_records.empty()) throw ValidationError("evaluate: test split is empty");

  EvalReport report;
  report.videos.resize(test_records.size());
  report.n_videos = test_records.size();

  const auto score_video = [&](std::size_t idx) {
    const VideoRecord& record = *test_records[idx];
    VideoSeries series;
    series.video_id = record.video_id;
    series.frame_scores = expand_scores_to_frames(
        predict_video(params, record, manifest, options.n_segments), record.n_frames);
    series.labels = frame_labels(record);
    report.videos[idx] = std::move(series);
  };

  const std::size_t jobs = std::max<std::size_t>(1, options.jobs);
  if (jobs == 1) {
    for (std::size_t idx = 0; idx < test_records.size(); ++idx) score_video(idx);
  } else {
    std::vector<std::thread> workers;
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    for (std::size_t w = 0; w < std::min(jobs, test_records.size()); ++w) {
      workers.emplace_back([&] {
        while (true) {
          const std::size_t idx = next.fetch_add(1);
          if (idx >= test_records.size()) return;
          try {
            score_video(idx);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            return;
          }
        }
      });
    }
    for (auto& worker : workers) worker.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  // Concatenate in manifest order for a single corpus-level curve.
  Vector all_scores;
  std::vector<std::uint8_t> all_labels;
  for (const auto& series : report.videos) {
    all_scores.insert(all_scores.end(), series.frame_scores.begin(), series.frame_scores.end());
    all_labels.insert(all_labels.end(), series.labels.begin(), series.labels.end());
  }
  report.n_frames = all_scores.size();
  report.auc = roc_auc(all_scores, all_labels);
  report.roc = roc_points(all_scores, all_labels);
  return report;
}

double false_alarm_rate(const ModelParams& params, const Manifest& manifest, double threshold,
                        std::size_t n_segments) {
  std::size_t total = 0, alarms = 0;
  for (const auto& record : manifest.records) {
    if (record.split != Split::test || record.label != Label::normal) continue;
    const auto scores = predict_video(params, record, manifest, n_segments);
    for (double s : scores.scores) {
      ++total;
      if (s > threshold) ++alarms;
    }
  }
  if (total == 0) throw ValidationError("false_alarm_rate: no normal test videos");
  return 100.0 * static_cast<double>(alarms) / static_cast<double>(total);
}

void export_series(const EvalReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  for (const auto& series : report.videos) {
    std::ofstream out(out_dir / (series.video_id + ".csv"));
    if (!out) throw RuntimeFailure("cannot write series for " + series.video_id);
    out << "frame,score,label\n";
    for (std::size_t f = 0; f < series.frame_scores.size(); ++f) {
      out << f << ',';
      format_double(out, series.frame_scores[f]);
      out << ',' << static_cast<int>(series.labels[f]) << '\n';
    }
    if (!out) throw RuntimeFailure("failed writing series for " + series.video_id);
  }

  std::ofstream roc(out_dir / "roc.csv");
  if (!roc) throw RuntimeFailure("cannot write roc.csv");
  roc << "fpr,tpr,threshold\n";
  for (const auto& point : report.roc) {
    format_double(roc, point.fpr);
    roc << ',';
    format_double(roc, point.tpr);
    roc << ',';
    format_double(roc, point.threshold);
    roc << '\n';
  }
  if (!roc) throw RuntimeFailure("failed writing roc.csv");
}

void write_report_json(const EvalReport& report, double far_percent, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write report " + path.string());
  char buffer[64];
  out << "{\n";
  std::snprintf(buffer, sizeof buffer, "%.17g", report.auc);
  out << "  \"auc\": " << buffer << ",\n";
  if (std::isfinite(far_percent)) {
    std::snprintf(buffer, sizeof buffer, "%.17g", far_percent);
    out << "  \"far_percent\": " << buffer << ",\n";
  } else {
    out << "  \"far_percent\": null,\n";
  }
  out << "  \"n_videos\": " << report.n_videos << ",\n";
  out << "  \"n_frames\": " << report.n_frames << "\n";
  out << "}\n";
  if (!out) throw RuntimeFailure("failed writing report " + path.string());
}

}  // namespace milthrow
