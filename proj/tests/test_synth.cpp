#include <doctest.h>

#include <cmath>

#include "milthrow/errors.hpp"
#include "milthrow/synth.hpp"
#include "test_support.hpp"

using namespace milthrow;
using milthrow::test::TempDir;
using milthrow::test::read_bytes;

TEST_CASE("generated corpora reload cleanly with exact class balance") {
  TempDir dir("synth_roundtrip");
  SynthSpec spec;
  spec.dim = 5;
  spec.n_videos_normal = 10;
  spec.n_videos_anom = 10;
  spec.n_segments = 16;
  spec.anomalous_segments_per_video = 3;
  spec.seed = 21;

  const Manifest manifest = load_manifest(generate(spec, dir.path()));
  CHECK(manifest.dim == 5);
  CHECK(manifest.records.size() == 20);

  std::size_t counts[2][2] = {};
  for (const auto& r : manifest.records) ++counts[r.split == Split::test][r.label == Label::anomalous];
  CHECK(counts[0][0] == 7);  // 70/30 per class
  CHECK(counts[1][0] == 3);
  CHECK(counts[0][1] == 7);
  CHECK(counts[1][1] == 3);

  for (const auto& r : manifest.records) {
    CHECK(r.n_frames == 16 * spec.n_segments);
    const auto clips = load_clip_features(resolve_feature_path(manifest, r.feature_paths[0]), 5);
    CHECK(clips.n_clips() == spec.n_segments);
    if (r.label == Label::anomalous && r.split == Split::test) {
      CHECK(r.intervals.size() == spec.anomalous_segments_per_video);
      for (const auto& [start, end] : r.intervals) CHECK((end - start) % 16 == 0);
    } else {
      CHECK(r.intervals.empty());
    }
  }
}

TEST_CASE("generation is byte-identical for a fixed seed") {
  TempDir a("synth_det_a"), b("synth_det_b");
  SynthSpec spec;
  spec.dim = 4;
  spec.n_videos_normal = 4;
  spec.n_videos_anom = 4;
  spec.n_segments = 8;
  spec.anomalous_segments_per_video = 2;
  spec.seed = 5;
  generate(spec, a.path());
  generate(spec, b.path());
  CHECK(read_bytes(a / "manifest.csv") == read_bytes(b / "manifest.csv"));
  CHECK(read_bytes(a / "features/anom_0003.csv") == read_bytes(b / "features/anom_0003.csv"));

  spec.seed = 6;
  TempDir c("synth_det_c");
  generate(spec, c.path());
  CHECK(read_bytes(a / "features/anom_0003.csv") != read_bytes(c / "features/anom_0003.csv"));
}

TEST_CASE("contaminated normal videos stay labeled normal") {
  TempDir dir("synth_contaminated");
  SynthSpec spec;
  spec.dim = 4;
  spec.n_videos_normal = 4;
  spec.n_videos_anom = 4;
  spec.n_segments = 10;
  spec.normal_contamination = 0.2;
  spec.seed = 9;
  const Manifest manifest = load_manifest(generate(spec, dir.path()));
  for (const auto& r : manifest.records)
    if (r.label == Label::normal) CHECK(r.intervals.empty());
}

TEST_CASE("invalid specs are rejected") {
  TempDir dir("synth_invalid");
  SynthSpec spec;

  SUBCASE("zero videos") {
    spec.n_videos_normal = 0;
    CHECK_THROWS_AS(generate(spec, dir.path()), ValidationError);
  }
  SUBCASE("too many runs") {
    spec.anomalous_segments_per_video = 11;
    CHECK_THROWS_AS(generate(spec, dir.path()), ValidationError);
  }
  SUBCASE("more runs than segments") {
    spec.n_segments = 2;
    spec.anomalous_segments_per_video = 3;
    CHECK_THROWS_AS(generate(spec, dir.path()), ValidationError);
  }
  SUBCASE("negative separation") {
    spec.separation = -1.0;
    CHECK_THROWS_AS(generate(spec, dir.path()), ValidationError);
  }
}

TEST_CASE("oracle_auc hand examples") {
  CHECK(oracle_auc(Vector{0.9, 0.4, 0.1, 0.6}, std::vector<std::uint8_t>{1, 1, 0, 0}) == 0.75);
  CHECK(oracle_auc(Vector{0.9, 0.8, 0.1}, std::vector<std::uint8_t>{1, 1, 0}) == 1.0);
  CHECK(oracle_auc(Vector{0.3, 0.3, 0.3}, std::vector<std::uint8_t>{1, 0, 0}) == 0.5);
  CHECK_THROWS_AS(oracle_auc(Vector{0.3}, std::vector<std::uint8_t>{1}), ValidationError);
}

TEST_CASE("oracle_grad differentiates simple closures") {
  const auto square_sum = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  const auto grad = oracle_grad(square_sum, Vector{3.0}, 1e-4);
  CHECK(grad[0] == doctest::Approx(6.0).epsilon(1e-7));

  const auto constant = [](std::span<const double>) { return 42.0; };
  for (double g : oracle_grad(constant, Vector{1.0, -2.0, 0.5}, 1e-4)) CHECK(g == 0.0);
}

TEST_CASE("gradient_check finds smooth configurations and small errors") {
  GradCheckConfig cfg;
  cfg.dim = 5;
  cfg.n_configs = 4;
  cfg.seed = 2;
  const auto report = gradient_check(cfg);
  CHECK(report.n_configs == 4);
  CHECK(report.max_rel_err < 1e-4);
}
