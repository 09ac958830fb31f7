import numpy as np
import pytest
import torch

from hybridslomo.data import perturb, synthesize_hybrid
from hybridslomo.errors import ContractViolationError, JobError
from hybridslomo.models import FeatureHandle
from hybridslomo.pipeline import (ABLATION_ORDER, InferenceSession,
                                  PSNR_CAP_DB, PerceptualDistance,
                                  ReconstructionJob, ablate_appearance_inputs,
                                  fuse_baseline, interpolate_frame,
                                  interpolate_video, metric_lpips, metric_psnr,
                                  metric_ssim, run_sweep, SWEEP_GRIDS)
from hybridslomo.training import (STAGE_APPEARANCE, STAGE_FLOW, TrainConfig,
                                  train_appearance_stage, train_flow_stage)

from clipgen import make_canvas, make_translation_clip, make_translation_frames, \
    make_zoom_bounce_clip

WIDTHS = (8, 16, 32)


@pytest.fixture(scope="module")
def tiny_samples():
    out = []
    for i in (0, 1):
        rng = np.random.default_rng(100 + i)
        clip = make_zoom_bounce_clip(i, h=32, w=32)
        out.append(perturb(synthesize_hybrid(clip, rng), rng))
    return out


@pytest.fixture(scope="module")
def session(tiny_samples):
    """A cheap (barely trained) full checkpoint: contract tests only need
    consistent shapes, not quality."""
    flow_cfg = TrainConfig(stage=STAGE_FLOW, epochs=2, batch_size=2, seed=5,
                           level_widths=WIDTHS, early_stop=False)
    flow_ckpt = train_flow_stage(tiny_samples, flow_cfg)
    app_cfg = TrainConfig(stage=STAGE_APPEARANCE, epochs=2, batch_size=2, seed=6,
                          level_widths=WIDTHS, early_stop=False)
    app_ckpt = train_appearance_stage(tiny_samples, app_cfg, flow_ckpt)
    return InferenceSession.from_checkpoint(app_ckpt)


@pytest.fixture(scope="module")
def distance():
    return PerceptualDistance(FeatureHandle(seed=21))


class TestMetrics:
    def test_identical_frames(self, distance):
        rng = np.random.default_rng(0)
        frame = make_canvas(rng, 24, 24)
        assert metric_psnr(frame, frame) == PSNR_CAP_DB
        assert metric_ssim(frame, frame) == pytest.approx(1.0)
        assert metric_lpips(frame, frame, distance) == 0.0

    def test_psnr_analytic_case(self):
        a = np.zeros((16, 16, 3), dtype=np.float32)
        b = np.full((16, 16, 3), 0.5, dtype=np.float32)
        assert metric_psnr(a, b) == pytest.approx(20 * np.log10(2.0), abs=1e-6)

    def test_ssim_symmetric(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            a = make_canvas(rng, 24, 24)
            b = make_canvas(rng, 24, 24)
            assert metric_ssim(a, b) == pytest.approx(metric_ssim(b, a), abs=1e-12)

    def test_lpips_orders_degradations(self, distance):
        rng = np.random.default_rng(2)
        frame = make_canvas(rng, 32, 32)
        noise = rng.normal(0.0, 1.0, size=frame.shape).astype(np.float32)
        small = np.clip(frame + 0.02 * noise, 0, 1)
        large = np.clip(frame + 0.2 * noise, 0, 1)
        assert distance(frame, large) > distance(frame, small)

    def test_shape_mismatch_rejected(self, distance):
        a = np.zeros((8, 8, 3), dtype=np.float32)
        b = np.zeros((8, 9, 3), dtype=np.float32)
        with pytest.raises(ContractViolationError):
            metric_psnr(a, b)
        with pytest.raises(ContractViolationError):
            metric_ssim(a, b)
        with pytest.raises(ContractViolationError):
            distance(a, b)


class TestInterpolateFrame:
    def test_keyframe_passthrough_left(self, tiny_samples, session):
        sample = tiny_samples[0]
        out = interpolate_frame(sample.left, sample.right, list(sample.aux), 0,
                                session)
        np.testing.assert_array_equal(out.data, sample.left)

    def test_keyframe_passthrough_right(self, tiny_samples, session):
        sample = tiny_samples[0]
        out = interpolate_frame(sample.left, sample.right, list(sample.aux), 8,
                                session)
        np.testing.assert_array_equal(out.data, sample.right)

    def test_output_resolution_is_main_resolution(self, tiny_samples, session):
        sample = tiny_samples[0]
        out = interpolate_frame(sample.left, sample.right, list(sample.aux), 4,
                                session)
        assert out.data.shape == sample.left.shape
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0

    def test_invalid_target_index_rejected(self, tiny_samples, session):
        sample = tiny_samples[0]
        with pytest.raises(ContractViolationError):
            interpolate_frame(sample.left, sample.right, list(sample.aux), 9,
                              session)

    def test_fuse_baseline_matches_flow_only_session(self, tiny_samples, session):
        sample = tiny_samples[0]
        fused = fuse_baseline(sample.left, sample.right, list(sample.aux), 4,
                              session)
        assert fused.data.shape == sample.left.shape


class TestInterpolateVideo:
    def _job(self, n_keyframes, ratio, h=32, w=32, output_fps=None):
        n_aux = (n_keyframes - 1) * ratio + 1
        frames = make_translation_frames(3, n_aux, h, w, velocity=(1, 0))
        aux = [f.reshape(h // 4, 4, w // 4, 4, 3).mean(axis=(1, 3)).astype(np.float32)
               for f in frames]
        main = [frames[i * ratio] for i in range(n_keyframes)]
        return ReconstructionJob(main_frames=tuple(main), aux_frames=tuple(aux),
                                 main_fps=30.0, aux_fps=30.0 * ratio,
                                 output_fps=output_fps)

    def test_three_keyframes_ratio_eight_yield_seventeen(self, session):
        job = self._job(3, 8)
        frames = interpolate_video(job, session)
        assert len(frames) == 17

    def test_keyframes_pass_through_bit_exact(self, session):
        job = self._job(3, 4)
        frames = interpolate_video(job, session)
        np.testing.assert_array_equal(frames[0].data, job.main_frames[0])
        np.testing.assert_array_equal(frames[4].data, job.main_frames[1])
        np.testing.assert_array_equal(frames[8].data, job.main_frames[2])

    def test_ratio_one_returns_main_video(self, session):
        job = self._job(4, 1)
        frames = interpolate_video(job, session)
        assert len(frames) == 4
        for out, src in zip(frames, job.main_frames):
            np.testing.assert_array_equal(out.data, src)

    def test_output_fps_divisor(self, session):
        job = self._job(2, 8, output_fps=120.0)  # step 2 -> 4 outputs + end
        frames = interpolate_video(job, session)
        assert len(frames) == 5

    def test_short_aux_stream_rejected(self, session):
        job = self._job(3, 4)
        bad = ReconstructionJob(main_frames=job.main_frames,
                                aux_frames=job.aux_frames[:-2],
                                main_fps=30.0, aux_fps=120.0)
        with pytest.raises(JobError):
            interpolate_video(bad, session)

    def test_non_integer_ratio_rejected(self):
        with pytest.raises(JobError):
            ReconstructionJob(main_frames=(np.zeros((8, 8, 3)),) * 2,
                              aux_frames=(np.zeros((2, 2, 3)),) * 9,
                              main_fps=30.0, aux_fps=100.0)

    def test_output_fps_above_aux_rejected(self):
        with pytest.raises(JobError):
            ReconstructionJob(main_frames=(np.zeros((8, 8, 3)),) * 2,
                              aux_frames=(np.zeros((2, 2, 3)),) * 9,
                              main_fps=30.0, aux_fps=240.0, output_fps=480.0)


class TestSweeps:
    def test_default_grids_match_published_tables(self):
        assert SWEEP_GRIDS["gamma"] == (0.65, 0.85, 0.95, 1.00, 1.25, 1.75)
        assert SWEEP_GRIDS["hue"] == (0.00, 0.02, 0.05, 0.15, 0.30, 0.50)
        assert SWEEP_GRIDS["noise"] == (0, 5, 15, 35, 75)
        assert SWEEP_GRIDS["desync"] == (0, 1, 2, 3)

    def test_zero_point_reproduces_baseline(self, tiny_samples, session, distance):
        report = run_sweep("gamma", tiny_samples, session, grid=(1.00, 1.25),
                           distance=distance)
        baseline = interpolate_frame(tiny_samples[0].left, tiny_samples[0].right,
                                     list(tiny_samples[0].aux), 4, session)
        zero_rows = [r for r in report.per_frame if r["value"] == 1.00
                     and r["sample_id"] == tiny_samples[0].sample_id]
        assert zero_rows[0]["psnr"] == metric_psnr(baseline, tiny_samples[0].targets[3])

    def test_rows_in_grid_order_and_aggregates_are_means(self, tiny_samples,
                                                         session, distance):
        report = run_sweep("desync", tiny_samples, session, grid=(0, 2),
                           distance=distance)
        assert [row["value"] for row in report.rows] == [0, 2]
        for row in report.rows:
            members = [r["psnr"] for r in report.per_frame
                       if r["value"] == row["value"]]
            assert row["psnr"] == pytest.approx(np.mean(members), abs=1e-9)

    def test_report_reproducible(self, tiny_samples, session, distance):
        a = run_sweep("noise", tiny_samples, session, grid=(0, 15), seed=4,
                      distance=distance)
        b = run_sweep("noise", tiny_samples, session, grid=(0, 15), seed=4,
                      distance=distance)
        for row_a, row_b in zip(a.rows, b.rows):
            assert row_a["psnr"] == row_b["psnr"]
            assert row_a["ssim"] == row_b["ssim"]

    def test_unknown_kind_rejected(self, tiny_samples, session):
        with pytest.raises(ContractViolationError):
            run_sweep("saturation", tiny_samples, session)

    def test_csv_header_names_metric_variant(self, tiny_samples, session,
                                             distance, tmp_path):
        report = run_sweep("gamma", tiny_samples, session, grid=(1.00,),
                           distance=distance)
        path = report.to_csv(tmp_path / "report.csv")
        header = path.read_text().splitlines()[0]
        assert "psnr" in header and "ssim" in header
        assert f"lpips[{distance.variant}]" in header


class TestAblation:
    def test_rows_in_component_order(self, tiny_samples, session, distance):
        report = ablate_appearance_inputs(
            tiny_samples, {"base": None, "visibility": None, "context": session},
            distance=distance)
        assert [row["value"] for row in report.rows] == list(ABLATION_ORDER)
        assert [row["status"] for row in report.rows] == ["missing", "missing", "ok"]

    def test_identical_checkpoints_identical_rows(self, tiny_samples, session,
                                                  distance):
        report = ablate_appearance_inputs(
            tiny_samples, {"base": session, "visibility": session,
                           "context": session}, distance=distance)
        ok_rows = [row for row in report.rows if row["status"] == "ok"]
        assert len(ok_rows) == 3
        assert ok_rows[0]["psnr"] == ok_rows[1]["psnr"] == ok_rows[2]["psnr"]
