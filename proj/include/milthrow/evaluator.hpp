#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "milthrow/corpus.hpp"
#include "milthrow/scorer.hpp"

namespace milthrow {

struct RocPoint {
  double threshold = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

struct VideoSeries {
  std::string video_id;
  Vector frame_scores;
  std::vector<std::uint8_t> labels;
};

struct EvalReport {
  double auc = 0.0;
  std::vector<RocPoint> roc;
  std::vector<VideoSeries> videos;  // manifest order
  std::size_t n_videos = 0;
  std::size_t n_frames = 0;
};

struct EvalOptions {
  std::size_t n_segments = 32;
  std::size_t jobs = 1;
};

// Scores every feature variant of the record and returns the element-wise
// mean across variants (test-time augmentation).
SegmentScores predict_video(const ModelParams& params, const VideoRecord& record, const Manifest& manifest,
                            std::size_t n_segments = 32);

// Frame f receives the score of the segment whose frame range contains f.
Vector expand_scores_to_frames(const SegmentScores& scores, std::size_t n_frames);

// Mann-Whitney statistic with 0.5 credit per tied pair, computed via
// midranks. Agrees with trapezoidal integration of roc_points.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Threshold sweep over the distinct score values (predict positive when
// score >= threshold), bracketed by the (0,0) and (1,1) endpoints.
std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const std::uint8_t> labels);

double auc_from_roc(std::span<const RocPoint> points);

// Frame scores and labels of all test videos concatenated in manifest order,
// one corpus-level AUC.
EvalReport evaluate(const ModelParams& params, const Manifest& manifest, const EvalOptions& options = {});

// Percentage of normal test-video segments scoring strictly above the
// threshold, over TTA-aggregated scores.
double false_alarm_rate(const ModelParams& params, const Manifest& manifest, double threshold = 0.5,
                        std::size_t n_segments = 32);

// Writes per-video `frame,score,label` CSVs and `roc.csv` (fpr,tpr,threshold)
// into out_dir. Deterministic formatting: re-export is byte-identical.
void export_series(const EvalReport& report, const std::filesystem::path& out_dir);

// Report summary JSON with keys auc, far_percent, n_videos, n_frames.
void write_report_json(const EvalReport& report, double far_percent, const std::filesystem::path& path);

}  // namespace milthrow
