"""Smoke tests for the extension module against small known-answer cases."""

import math

import pytest

import milthrow as mt


def test_version():
    assert mt.__version__ == "0.1.0"


def test_pool_segments_even_division():
    clips = mt.ClipFeatureMatrix()
    clips.video_id = "v"
    clips.dim = 2
    clips.clips = [[float(k), float(2 * k)] for k in range(8)]
    bag = mt.pool_segments(clips, 4)
    assert bag.n_segments == 4
    # segment i averages clips 2i and 2i+1
    assert bag.segments[1] == pytest.approx([2.5, 5.0])


def test_segment_frame_range():
    assert mt.segment_frame_range(3, 320, 32) == (30, 40)
    assert mt.segment_frame_range(0, 10, 32) == (0, 0)


def test_rank_loss_variants():
    orig = mt.rank_loss([0.5, 0.5], [0.5, 0.5], mt.LossVariant.original)
    assert orig.value == pytest.approx(1.0)
    mean = mt.rank_loss([0.1, 0.9], [0.2, 0.4], mt.LossVariant.mean_normal)
    assert mean.value == pytest.approx(0.4)
    assert list(mean.d_norm) == pytest.approx([0.5, 0.5])


def test_roc_auc_against_oracle():
    scores = [0.9, 0.4, 0.1, 0.6]
    labels = [1, 1, 0, 0]
    assert mt.roc_auc(scores, labels) == 0.75
    assert mt.roc_auc(scores, labels) == mt.oracle_auc(scores, labels)


def test_invalid_input_raises_value_error():
    with pytest.raises(ValueError):
        mt.roc_auc([0.1, 0.2], [1, 1])


def test_init_params_deterministic():
    a = mt.init_params(16, 5, [8, 4])
    b = mt.init_params(16, 5, [8, 4])
    assert a.layer_dims == [16, 8, 4, 1]
    assert a.input_dim == 16
    x = [0.1] * 16
    assert mt.forward_score(a, x) == mt.forward_score(b, x)


def test_synth_train_eval_checkpoint(tmp_path):
    spec = mt.SynthSpec()
    spec.dim = 6
    spec.n_videos_normal = 5
    spec.n_videos_anom = 5
    spec.n_segments = 8
    spec.anomalous_segments_per_video = 2
    spec.separation = 2.5
    spec.seed = 11
    manifest_path = mt.generate(spec, tmp_path / "corpus")
    manifest = mt.load_manifest(manifest_path)
    assert manifest.dim == 6
    assert len(manifest.records) == 10

    cfg = mt.TrainConfig()
    cfg.iterations = 80
    cfg.n_segments = 8
    cfg.hidden_dims = [8, 4]
    cfg.seed = 2
    cfg.out_dir = tmp_path / "run"
    result = mt.train(manifest, cfg)
    assert len(result.log.records) == 80
    assert all(math.isfinite(r.total) for r in result.log.records)

    options = mt.EvalOptions()
    options.n_segments = 8
    report = mt.evaluate(result.params, manifest, options)
    assert 0.0 <= report.auc <= 1.0
    assert report.n_videos == 4
    far = mt.false_alarm_rate(result.params, manifest, 0.5, 8)
    assert 0.0 <= far <= 100.0

    reloaded = mt.load_checkpoint(tmp_path / "run" / "final.ckpt")
    bag = mt.pool_segments(
        mt.load_clip_features(tmp_path / "corpus" / manifest.records[0].feature_paths[0], 6), 8
    )
    assert mt.score_bag(reloaded, bag).scores == mt.score_bag(result.params, bag).scores
