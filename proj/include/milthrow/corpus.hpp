#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "milthrow/la.hpp"

namespace milthrow {

enum class Label { normal, anomalous };
enum class Split { train, test };

const char* to_string(Label label);
const char* to_string(Split split);

// Per-clip features as produced by an upstream extractor: one row per
// consecutive 16-frame clip, all rows `dim` wide.
struct ClipFeatureMatrix {
  std::string video_id;
  std::size_t dim = 0;
  std::vector<Vector> clips;

  std::size_t n_clips() const { return clips.size(); }
};

// A video reduced to its n temporal segments: the MIL bag.
struct FeatureBag {
  std::string video_id;
  Label label = Label::normal;
  std::vector<Vector> segments;

  std::size_t n_segments() const { return segments.size(); }
};

// Half-open frame interval [start, end), 0-based.
using FrameInterval = std::pair<std::size_t, std::size_t>;

struct VideoRecord {
  std::string video_id;
  Split split = Split::train;
  Label label = Label::normal;
  std::size_t n_frames = 0;
  std::vector<FrameInterval> intervals;
  std::vector<std::string> feature_paths;  // relative to the manifest; [0] is primary, rest are TTA variants
};

struct Manifest {
  std::vector<VideoRecord> records;
  std::size_t dim = 0;
  std::filesystem::path base_dir;  // directory the feature paths resolve against
};

// Manifest CSV: header `video_id,split,label,n_frames,intervals,feature_paths`,
// `intervals` as `;`-separated `start-end` pairs, `feature_paths` as
// `;`-separated relative paths. Every referenced feature file is checked to
// exist and its declared dim must agree across the corpus.
Manifest load_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

// Feature CSV: first line `video_id,dim,n_clips`, then n_clips rows of `dim`
// comma-separated decimal floats, row k = clip k.
ClipFeatureMatrix load_clip_features(const std::filesystem::path& path, std::size_t expected_dim);
void write_clip_features(const ClipFeatureMatrix& clips, const std::filesystem::path& path);

std::filesystem::path resolve_feature_path(const Manifest& manifest, const std::string& relative);

// Column-wise concatenation: clip k of the result is clip k of every input
// joined in argument order. Inputs must agree on video_id and clip count.
ClipFeatureMatrix concat_features(const std::vector<ClipFeatureMatrix>& parts);

// Segment i is the mean of clips [floor(i*n_clips/n), floor((i+1)*n_clips/n));
// when that range is empty (fewer clips than segments) it falls back to clip
// floor(i*n_clips/n).
FeatureBag pool_segments(const ClipFeatureMatrix& clips, std::size_t n, Label label = Label::normal);

// Frame range of segment i as half-open [floor(i*n_frames/n),
// floor((i+1)*n_frames/n)). The ranges tile [0, n_frames) exactly.
FrameInterval segment_frame_range(std::size_t segment_index, std::size_t n_frames, std::size_t n);

// 1 for frames inside any annotated interval, 0 elsewhere.
std::vector<std::uint8_t> frame_labels(const VideoRecord& record);

}  // namespace milthrow
