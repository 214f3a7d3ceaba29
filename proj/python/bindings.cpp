#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "milthrow/checkpoint.hpp"
#include "milthrow/corpus.hpp"
#include "milthrow/errors.hpp"
#include "milthrow/evaluator.hpp"
#include "milthrow/objective.hpp"
#include "milthrow/optim.hpp"
#include "milthrow/scorer.hpp"
#include "milthrow/synth.hpp"
#include "milthrow/trainer.hpp"

namespace py = pybind11;
using namespace milthrow;

PYBIND11_MODULE(_core, m) {
  m.doc() = "MIL video anomaly detection on precomputed clip features";
  m.attr("__version__") = "0.1.0";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<RuntimeFailure>(m, "RuntimeFailure", PyExc_RuntimeError);

  py::enum_<Label>(m, "Label").value("normal", Label::normal).value("anomalous", Label::anomalous);
  py::enum_<Split>(m, "Split").value("train", Split::train).value("test", Split::test);
  py::enum_<LossVariant>(m, "LossVariant")
      .value("original", LossVariant::original)
      .value("mean_normal", LossVariant::mean_normal);
  py::enum_<OptimizerKind>(m, "OptimizerKind")
      .value("adam", OptimizerKind::adam)
      .value("adadelta", OptimizerKind::adadelta);

  py::class_<ClipFeatureMatrix>(m, "ClipFeatureMatrix")
      .def(py::init<>())
      .def_readwrite("video_id", &ClipFeatureMatrix::video_id)
      .def_readwrite("dim", &ClipFeatureMatrix::dim)
      .def_readwrite("clips", &ClipFeatureMatrix::clips)
      .def_property_readonly("n_clips", &ClipFeatureMatrix::n_clips);

  py::class_<FeatureBag>(m, "FeatureBag")
      .def(py::init<>())
      .def_readwrite("video_id", &FeatureBag::video_id)
      .def_readwrite("label", &FeatureBag::label)
      .def_readwrite("segments", &FeatureBag::segments)
      .def_property_readonly("n_segments", &FeatureBag::n_segments);

  py::class_<VideoRecord>(m, "VideoRecord")
      .def(py::init<>())
      .def_readwrite("video_id", &VideoRecord::video_id)
      .def_readwrite("split", &VideoRecord::split)
      .def_readwrite("label", &VideoRecord::label)
      .def_readwrite("n_frames", &VideoRecord::n_frames)
      .def_readwrite("intervals", &VideoRecord::intervals)
      .def_readwrite("feature_paths", &VideoRecord::feature_paths);

  py::class_<Manifest>(m, "Manifest")
      .def_readonly("records", &Manifest::records)
      .def_readonly("dim", &Manifest::dim)
      .def_readonly("base_dir", &Manifest::base_dir);

  py::class_<ModelParams>(m, "ModelParams")
      .def_readonly("layer_dims", &ModelParams::layer_dims)
      .def_property_readonly("input_dim", &ModelParams::input_dim);

  py::class_<SegmentScores>(m, "SegmentScores")
      .def_readonly("video_id", &SegmentScores::video_id)
      .def_readonly("scores", &SegmentScores::scores);

  py::class_<LossConfig>(m, "LossConfig")
      .def(py::init<>())
      .def_readwrite("variant", &LossConfig::variant)
      .def_readwrite("lambda1", &LossConfig::lambda1)
      .def_readwrite("lambda2", &LossConfig::lambda2)
      .def_readwrite("lambda3", &LossConfig::lambda3);

  py::class_<RankLossResult>(m, "RankLossResult")
      .def_readonly("value", &RankLossResult::value)
      .def_readonly("d_anom", &RankLossResult::d_anom)
      .def_readonly("d_norm", &RankLossResult::d_norm);

  py::class_<TermResult>(m, "TermResult")
      .def_readonly("value", &TermResult::value)
      .def_readonly("d", &TermResult::d);

  py::class_<PairLossResult>(m, "PairLossResult")
      .def_readonly("total", &PairLossResult::total)
      .def_readonly("rank_term", &PairLossResult::rank_term)
      .def_readonly("smooth_term", &PairLossResult::smooth_term)
      .def_readonly("sparse_term", &PairLossResult::sparse_term)
      .def_readonly("weightnorm_term", &PairLossResult::weightnorm_term)
      .def_readonly("d_scores_anom", &PairLossResult::d_scores_anom)
      .def_readonly("d_scores_norm", &PairLossResult::d_scores_norm);

  py::class_<OptimizerHyper>(m, "OptimizerHyper")
      .def(py::init<>())
      .def_readwrite("learning_rate", &OptimizerHyper::learning_rate)
      .def_readwrite("beta1", &OptimizerHyper::beta1)
      .def_readwrite("beta2", &OptimizerHyper::beta2)
      .def_readwrite("rho", &OptimizerHyper::rho)
      .def_readwrite("epsilon", &OptimizerHyper::epsilon);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("n_segments", &TrainConfig::n_segments)
      .def_readwrite("iterations", &TrainConfig::iterations)
      .def_readwrite("pairs_per_step", &TrainConfig::pairs_per_step)
      .def_readwrite("optimizer", &TrainConfig::optimizer)
      .def_readwrite("hyper", &TrainConfig::hyper)
      .def_readwrite("loss", &TrainConfig::loss)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("dropout_rate", &TrainConfig::dropout_rate)
      .def_readwrite("checkpoint_every", &TrainConfig::checkpoint_every)
      .def_readwrite("hidden_dims", &TrainConfig::hidden_dims)
      .def_readwrite("out_dir", &TrainConfig::out_dir);

  py::class_<TrainRecord>(m, "TrainRecord")
      .def_readonly("iteration", &TrainRecord::iteration)
      .def_readonly("total", &TrainRecord::total)
      .def_readonly("rank", &TrainRecord::rank)
      .def_readonly("smooth", &TrainRecord::smooth)
      .def_readonly("sparse", &TrainRecord::sparse)
      .def_readonly("weightnorm", &TrainRecord::weightnorm)
      .def_readonly("elapsed_ms", &TrainRecord::elapsed_ms);

  py::class_<TrainLog>(m, "TrainLog")
      .def_readonly("records", &TrainLog::records)
      .def_readonly("warnings", &TrainLog::warnings);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("params", &TrainResult::params)
      .def_readonly("log", &TrainResult::log);

  py::class_<RocPoint>(m, "RocPoint")
      .def_readonly("threshold", &RocPoint::threshold)
      .def_readonly("tpr", &RocPoint::tpr)
      .def_readonly("fpr", &RocPoint::fpr);

  py::class_<VideoSeries>(m, "VideoSeries")
      .def_readonly("video_id", &VideoSeries::video_id)
      .def_readonly("frame_scores", &VideoSeries::frame_scores)
      .def_readonly("labels", &VideoSeries::labels);

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("auc", &EvalReport::auc)
      .def_readonly("roc", &EvalReport::roc)
      .def_readonly("videos", &EvalReport::videos)
      .def_readonly("n_videos", &EvalReport::n_videos)
      .def_readonly("n_frames", &EvalReport::n_frames);

  py::class_<EvalOptions>(m, "EvalOptions")
      .def(py::init<>())
      .def_readwrite("n_segments", &EvalOptions::n_segments)
      .def_readwrite("jobs", &EvalOptions::jobs);

  py::class_<SynthSpec>(m, "SynthSpec")
      .def(py::init<>())
      .def_readwrite("dim", &SynthSpec::dim)
      .def_readwrite("n_videos_normal", &SynthSpec::n_videos_normal)
      .def_readwrite("n_videos_anom", &SynthSpec::n_videos_anom)
      .def_readwrite("n_segments", &SynthSpec::n_segments)
      .def_readwrite("anomalous_segments_per_video", &SynthSpec::anomalous_segments_per_video)
      .def_readwrite("separation", &SynthSpec::separation)
      .def_readwrite("noise_sigma", &SynthSpec::noise_sigma)
      .def_readwrite("normal_contamination", &SynthSpec::normal_contamination)
      .def_readwrite("seed", &SynthSpec::seed);

  py::class_<GradCheckConfig>(m, "GradCheckConfig")
      .def(py::init<>())
      .def_readwrite("dim", &GradCheckConfig::dim)
      .def_readwrite("hidden_dims", &GradCheckConfig::hidden_dims)
      .def_readwrite("n_segments", &GradCheckConfig::n_segments)
      .def_readwrite("n_configs", &GradCheckConfig::n_configs)
      .def_readwrite("seed", &GradCheckConfig::seed)
      .def_readwrite("h", &GradCheckConfig::h)
      .def_readwrite("loss", &GradCheckConfig::loss);

  py::class_<GradCheckReport>(m, "GradCheckReport")
      .def_readonly("max_rel_err", &GradCheckReport::max_rel_err)
      .def_readonly("n_configs", &GradCheckReport::n_configs);

  // corpus
  m.def("load_manifest", &load_manifest, py::arg("path"));
  m.def("load_clip_features", &load_clip_features, py::arg("path"), py::arg("expected_dim"));
  m.def("write_clip_features", &write_clip_features, py::arg("clips"), py::arg("path"));
  m.def("concat_features", &concat_features, py::arg("parts"));
  m.def("pool_segments", &pool_segments, py::arg("clips"), py::arg("n"), py::arg("label") = Label::normal);
  m.def("segment_frame_range", &segment_frame_range, py::arg("segment_index"), py::arg("n_frames"), py::arg("n"));
  m.def(
      "frame_labels",
      [](const VideoRecord& record) {
        std::vector<int> labels;
        for (auto v : frame_labels(record)) labels.push_back(v);
        return labels;
      },
      py::arg("record"));

  // scorer
  m.def("init_params", &init_params, py::arg("dim"), py::arg("seed"),
        py::arg("hidden_dims") = kDefaultHiddenDims);
  m.def(
      "forward_score", [](const ModelParams& params, const Vector& x) { return forward(params, x).score(); },
      py::arg("params"), py::arg("x"), "Inference-mode anomaly score of one feature vector");
  m.def("score_bag", &score_bag, py::arg("params"), py::arg("bag"));
  m.def("save_checkpoint", &save_checkpoint, py::arg("params"), py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  // objective
  m.def(
      "rank_loss",
      [](const Vector& anom, const Vector& norm, LossVariant variant) { return rank_loss(anom, norm, variant); },
      py::arg("scores_anom"), py::arg("scores_norm"), py::arg("variant") = LossVariant::original);
  m.def(
      "smoothness_term", [](const Vector& s) { return smoothness_term(s); }, py::arg("scores_anom"));
  m.def(
      "sparsity_term", [](const Vector& s) { return sparsity_term(s); }, py::arg("scores_anom"));
  m.def("weight_norm_value", &weight_norm_value, py::arg("params"));
  m.def(
      "pair_objective",
      [](const Vector& anom, const Vector& norm, const ModelParams& params, const LossConfig& cfg) {
        return pair_objective(anom, norm, params, cfg);
      },
      py::arg("scores_anom"), py::arg("scores_norm"), py::arg("params"), py::arg("cfg") = LossConfig{});

  // trainer
  m.def("train", &train, py::arg("manifest"), py::arg("config"));
  m.def("resume", &resume, py::arg("checkpoint"), py::arg("manifest"), py::arg("config"));

  // evaluator
  m.def("predict_video", &predict_video, py::arg("params"), py::arg("record"), py::arg("manifest"),
        py::arg("n_segments") = 32);
  m.def("expand_scores_to_frames", &expand_scores_to_frames, py::arg("scores"), py::arg("n_frames"));
  m.def(
      "roc_auc",
      [](const Vector& scores, const std::vector<std::uint8_t>& labels) { return roc_auc(scores, labels); },
      py::arg("scores"), py::arg("labels"));
  m.def("evaluate", &evaluate, py::arg("params"), py::arg("manifest"), py::arg("options") = EvalOptions{});
  m.def("false_alarm_rate", &false_alarm_rate, py::arg("params"), py::arg("manifest"),
        py::arg("threshold") = 0.5, py::arg("n_segments") = 32);
  m.def("export_series", &export_series, py::arg("report"), py::arg("out_dir"));

  // synth
  m.def("generate", &generate, py::arg("spec"), py::arg("out_dir"));
  m.def(
      "oracle_auc",
      [](const Vector& scores, const std::vector<std::uint8_t>& labels) { return oracle_auc(scores, labels); },
      py::arg("scores"), py::arg("labels"));
  m.def("gradient_check", &gradient_check, py::arg("config") = GradCheckConfig{});
}
