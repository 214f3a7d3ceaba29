#include "milthrow/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "milthrow/errors.hpp"

namespace milthrow {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

[[noreturn]] void fail_at(const std::filesystem::path& path, std::size_t line_no, const std::string& what) {
  throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + what);
}

std::size_t parse_size(const std::string& text, const std::filesystem::path& path, std::size_t line_no,
                       const char* field) {
  if (text.empty()) fail_at(path, line_no, std::string("empty ") + field);
  char* end = nullptr;
  const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
  if (end != text.c_str() + text.size()) fail_at(path, line_no, std::string("bad ") + field + " '" + text + "'");
  return static_cast<std::size_t>(v);
}

// Reads only `video_id,dim,n_clips` from a feature file.
struct FeatureHeader {
  std::string video_id;
  std::size_t dim = 0;
  std::size_t n_clips = 0;
};

FeatureHeader read_feature_header(std::istream& in, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line)) fail_at(path, 1, "empty feature file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto fields = split(line, ',');
  if (fields.size() != 3) fail_at(path, 1, "feature header must be 'video_id,dim,n_clips'");
  FeatureHeader header;
  header.video_id = fields[0];
  header.dim = parse_size(fields[1], path, 1, "dim");
  header.n_clips = parse_size(fields[2], path, 1, "n_clips");
  if (header.dim == 0) fail_at(path, 1, "dim must be positive");
  if (header.n_clips == 0) fail_at(path, 1, "n_clips must be positive");
  return header;
}

void validate_record(const VideoRecord& record, const std::filesystem::path& path, std::size_t line_no) {
  if (record.video_id.empty()) fail_at(path, line_no, "empty video_id");
  if (record.n_frames == 0) fail_at(path, line_no, "n_frames must be positive");
  if (record.feature_paths.empty()) fail_at(path, line_no, "feature_paths must be non-empty");
  if (record.label == Label::normal && !record.intervals.empty())
    fail_at(path, line_no, "normal video must have empty intervals");
  if (record.label == Label::anomalous && record.split == Split::test &&
      (record.intervals.empty() || record.intervals.size() > 10))
    fail_at(path, line_no, "anomalous test video must have 1-10 intervals");
  std::size_t previous_end = 0;
  for (const auto& [start, end] : record.intervals) {
    if (start >= end) fail_at(path, line_no, "interval start >= end");
    if (end > record.n_frames) fail_at(path, line_no, "interval end exceeds n_frames");
    if (start < previous_end) fail_at(path, line_no, "intervals must be sorted and non-overlapping");
    previous_end = end;
  }
}

}  // namespace

const char* to_string(Label label) { return label == Label::normal ? "normal" : "anomalous"; }
const char* to_string(Split split) { return split == Split::train ? "train" : "test"; }

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());

  Manifest manifest;
  manifest.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

  std::string line;
  if (!std::getline(in, line)) fail_at(path, 1, "empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "video_id,split,label,n_frames,intervals,feature_paths")
    fail_at(path, 1, "unexpected header '" + line + "'");

  std::unordered_set<std::string> seen_ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 6) fail_at(path, line_no, "expected 6 fields");

    VideoRecord record;
    record.video_id = fields[0];
    if (fields[1] == "train")
      record.split = Split::train;
    else if (fields[1] == "test")
      record.split = Split::test;
    else
      fail_at(path, line_no, "bad split '" + fields[1] + "'");
    if (fields[2] == "normal")
      record.label = Label::normal;
    else if (fields[2] == "anomalous")
      record.label = Label::anomalous;
    else
      fail_at(path, line_no, "bad label '" + fields[2] + "'");
    record.n_frames = parse_size(fields[3], path, line_no, "n_frames");

    if (!fields[4].empty()) {
      for (const auto& pair_text : split(fields[4], ';')) {
        const std::size_t dash = pair_text.find('-');
        if (dash == std::string::npos) fail_at(path, line_no, "interval must be 'start-end'");
        const std::size_t start = parse_size(pair_text.substr(0, dash), path, line_no, "interval start");
        const std::size_t end = parse_size(pair_text.substr(dash + 1), path, line_no, "interval end");
        record.intervals.emplace_back(start, end);
      }
    }
    for (const auto& feature_path : split(fields[5], ';')) {
      if (!feature_path.empty()) record.feature_paths.push_back(feature_path);
    }

    validate_record(record, path, line_no);
    if (!seen_ids.insert(record.video_id).second)
      fail_at(path, line_no, "duplicate video_id '" + record.video_id + "'");
    manifest.records.push_back(std::move(record));
  }
  if (manifest.records.empty()) fail_at(path, line_no, "manifest has no records");

  // Existence-check every referenced feature file and pick up the corpus dim
  // from the file headers, which must all agree.
  for (const auto& record : manifest.records) {
    for (const auto& rel : record.feature_paths) {
      const auto feature_path = resolve_feature_path(manifest, rel);
      std::ifstream feature_in(feature_path);
      if (!feature_in) throw ValidationError("missing feature file " + feature_path.string() +
                                             " (referenced by " + record.video_id + ")");
      const auto header = read_feature_header(feature_in, feature_path);
      if (manifest.dim == 0)
        manifest.dim = header.dim;
      else if (manifest.dim != header.dim)
        throw ValidationError("feature dim mismatch: " + feature_path.string() + " declares " +
                              std::to_string(header.dim) + ", corpus uses " + std::to_string(manifest.dim));
    }
  }
  return manifest;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write manifest " + path.string());
  out << "video_id,split,label,n_frames,intervals,feature_paths\n";
  for (const auto& record : manifest.records) {
    out << record.video_id << ',' << to_string(record.split) << ',' << to_string(record.label) << ','
        << record.n_frames << ',';
    for (std::size_t i = 0; i < record.intervals.size(); ++i) {
      if (i) out << ';';
      out << record.intervals[i].first << '-' << record.intervals[i].second;
    }
    out << ',';
    for (std::size_t i = 0; i < record.feature_paths.size(); ++i) {
      if (i) out << ';';
      out << record.feature_paths[i];
    }
    out << '\n';
  }
  if (!out) throw RuntimeFailure("failed writing manifest " + path.string());
}

ClipFeatureMatrix load_clip_features(const std::filesystem::path& path, std::size_t expected_dim) {
  std::ifstream in(path);
  if (!in) throw RuntimeFailure("cannot open feature file " + path.string());
  const auto header = read_feature_header(in, path);
  if (header.dim != expected_dim)
    throw ValidationError(path.string() + ": dimension mismatch, file has " + std::to_string(header.dim) +
                          ", expected " + std::to_string(expected_dim));

  ClipFeatureMatrix matrix;
  matrix.video_id = header.video_id;
  matrix.dim = header.dim;
  matrix.clips.reserve(header.n_clips);

  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Vector clip(header.dim);
    const char* cursor = line.c_str();
    for (std::size_t d = 0; d < header.dim; ++d) {
      char* end = nullptr;
      clip[d] = std::strtod(cursor, &end);
      if (end == cursor) fail_at(path, line_no, "bad float at column " + std::to_string(d));
      if (!std::isfinite(clip[d])) fail_at(path, line_no, "non-finite value at column " + std::to_string(d));
      cursor = end;
      if (d + 1 < header.dim) {
        if (*cursor != ',') fail_at(path, line_no, "expected " + std::to_string(header.dim) + " values");
        ++cursor;
      }
    }
    if (*cursor != '\0') fail_at(path, line_no, "trailing data after " + std::to_string(header.dim) + " values");
    matrix.clips.push_back(std::move(clip));
  }
  if (matrix.clips.size() != header.n_clips)
    throw ValidationError(path.string() + ": header declares " + std::to_string(header.n_clips) +
                          " clips, file has " + std::to_string(matrix.clips.size()));
  return matrix;
}

void write_clip_features(const ClipFeatureMatrix& clips, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write feature file " + path.string());
  out << clips.video_id << ',' << clips.dim << ',' << clips.n_clips() << '\n';
  char buffer[32];
  for (const auto& clip : clips.clips) {
    for (std::size_t d = 0; d < clip.size(); ++d) {
      // %.17g round-trips doubles exactly, keeping reloads bit-identical.
      std::snprintf(buffer, sizeof buffer, "%.17g", clip[d]);
      if (d) out << ',';
      out << buffer;
    }
    out << '\n';
  }
  if (!out) throw RuntimeFailure("failed writing feature file " + path.string());
}

std::filesystem::path resolve_feature_path(const Manifest& manifest, const std::string& relative) {
  const std::filesystem::path p(relative);
  return p.is_absolute() ? p : manifest.base_dir / p;
}

ClipFeatureMatrix concat_features(const std::vector<ClipFeatureMatrix>& parts) {
  if (parts.empty()) throw ValidationError("concat_features: no inputs");
  const auto& first = parts.front();
  ClipFeatureMatrix out;
  out.video_id = first.video_id;
  out.dim = 0;
  for (const auto& part : parts) {
    if (part.video_id != first.video_id)
      throw ValidationError("concat_features: video_id mismatch '" + part.video_id + "' vs '" +
                            first.video_id + "'");
    if (part.n_clips() != first.n_clips())
      throw ValidationError("concat_features: n_clips mismatch for " + first.video_id);
    out.dim += part.dim;
  }
  out.clips.resize(first.n_clips());
  for (std::size_t k = 0; k < first.n_clips(); ++k) {
    out.clips[k].reserve(out.dim);
    for (const auto& part : parts)
      out.clips[k].insert(out.clips[k].end(), part.clips[k].begin(), part.clips[k].end());
  }
  return out;
}

FeatureBag pool_segments(const ClipFeatureMatrix& clips, std::size_t n, Label label) {
  if (n == 0) throw ValidationError("pool_segments: n must be >= 1");
  if (clips.n_clips() == 0) throw ValidationError("pool_segments: no clips");

  const std::size_t n_clips = clips.n_clips();
  FeatureBag bag;
  bag.video_id = clips.video_id;
  bag.label = label;
  bag.segments.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t begin = i * n_clips / n;
    const std::size_t end = (i + 1) * n_clips / n;
    if (begin == end) {
      bag.segments[i] = clips.clips[begin];
      continue;
    }
    Vector mean(clips.dim, 0.0);
    for (std::size_t k = begin; k < end; ++k) {
      const auto& clip = clips.clips[k];
      for (std::size_t d = 0; d < clips.dim; ++d) mean[d] += clip[d];
    }
    const double scale = 1.0 / static_cast<double>(end - begin);
    for (double& v : mean) v *= scale;
    bag.segments[i] = std::move(mean);
  }
  return bag;
}

FrameInterval segment_frame_range(std::size_t segment_index, std::size_t n_frames, std::size_t n) {
  if (n == 0 || segment_index >= n)
    throw ValidationError("segment_frame_range: index " + std::to_string(segment_index) + " out of range for n=" +
                          std::to_string(n));
  if (n_frames == 0) throw ValidationError("segment_frame_range: n_frames must be >= 1");
  return {segment_index * n_frames / n, (segment_index + 1) * n_frames / n};
}

std::vector<std::uint8_t> frame_labels(const VideoRecord& record) {
  std::vector<std::uint8_t> labels(record.n_frames, 0);
  for (const auto& [start, end] : record.intervals)
    std::fill(labels.begin() + static_cast<std::ptrdiff_t>(start), labels.begin() + static_cast<std::ptrdiff_t>(end),
              std::uint8_t{1});
  return labels;
}

}  // namespace milthrow
