import numpy as np
import pytest

from mcma import (Frame, ModelSpec, PipelineConfig, Prototype, SceneObject,
                  SceneSpec, StageDelays, benchmark_report, generate,
                  model_spec_from_scene, run_parallel, run_sequential)
from mcma.model import decode, encode
from mcma.pipeline import PipelineError, StageTiming, timings_csv


def moving_scene(frames=20, width=128, height=96, seed=2, velocity=(3, 1)):
    return SceneSpec(width=width, height=height, num_classes=2, frames=frames,
                     seed=seed,
                     objects=[SceneObject("disk", 1, (200, 60, 60),
                                          (width // 3, height // 2),
                                          velocity=velocity, radius=14)])


def tiny_model():
    return ModelSpec(num_classes=2, feature_stride=4,
                     prototypes=[Prototype(0, (90, 90, 90)),
                                 Prototype(1, (0, 0, 0))])


def tiny_frames(n=6):
    return [Frame(np.full((16, 16, 3), 90, np.uint8), index=i)
            for i in range(n)]


class TestRunSequential:
    def test_single_frame_is_baseline(self):
        spec = moving_scene(frames=1)
        seq = generate(spec)
        mspec = model_spec_from_scene(spec)
        cfg = PipelineConfig(alpha=0.1, num_classes=2)
        masks, timings = run_sequential([seq[0][0]], cfg, mspec)
        baseline = decode(encode(seq[0][0], mspec), mspec)
        assert len(masks) == 1 and len(timings) == 1
        assert np.array_equal(masks[0].labels, baseline.labels)

    def test_alpha_one_matches_baseline(self):
        spec = moving_scene(frames=8)
        seq = generate(spec)
        frames = [s[0] for s in seq]
        mspec = model_spec_from_scene(spec)
        cfg = PipelineConfig(alpha=1.0, flow_scale=0.5, num_classes=2)
        masks, _ = run_sequential(frames, cfg, mspec)
        for frame, mask in zip(frames, masks):
            baseline = decode(encode(frame, mspec), mspec)
            assert np.array_equal(mask.labels, baseline.labels)

    def test_cardinality_100_frames(self):
        spec = SceneSpec(width=64, height=48, num_classes=2, frames=100,
                         seed=0, objects=[SceneObject(
                             "disk", 1, (200, 60, 60), (20, 24),
                             velocity=(1, 0), radius=8)])
        seq = generate(spec)
        cfg = PipelineConfig(alpha=0.2, num_classes=2, mode="ema")
        masks, timings = run_sequential([s[0] for s in seq], cfg,
                                        model_spec_from_scene(spec))
        assert len(masks) == 100 and len(timings) == 100

    def test_dimension_change_fails_with_index(self):
        frames = tiny_frames(3)
        frames[2] = Frame(np.zeros((24, 24, 3), np.uint8), index=2)
        cfg = PipelineConfig(alpha=0.5, num_classes=2)
        with pytest.raises(PipelineError) as err:
            run_sequential(frames, cfg, tiny_model())
        assert err.value.frame_index == 2

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            run_sequential([], PipelineConfig(num_classes=2), tiny_model())


class TestRunParallel:
    def test_bit_identical_to_sequential(self):
        spec = moving_scene(frames=50, seed=7)
        seq = generate(spec)
        frames = [s[0] for s in seq]
        mspec = model_spec_from_scene(spec)
        cfg = PipelineConfig(alpha=0.15, lam=2.0, flow_scale=0.5,
                             num_classes=2)
        seq_masks, _ = run_sequential(frames, cfg, mspec)
        par_masks, _ = run_parallel(frames, cfg, mspec)
        for a, b in zip(seq_masks, par_masks):
            assert np.array_equal(a.labels, b.labels)

    def test_masks_in_input_order(self):
        spec = moving_scene(frames=10)
        seq = generate(spec)
        mspec = model_spec_from_scene(spec)
        cfg = PipelineConfig(alpha=1.0, num_classes=2, mode="baseline")
        masks, _ = run_parallel([s[0] for s in seq], cfg, mspec)
        for (frame, _, _), mask in zip(seq, masks):
            baseline = decode(encode(frame, mspec), mspec)
            assert np.array_equal(mask.labels, baseline.labels)

    def test_injected_delay_scheduling(self):
        # flow and encode each sleep 10 ms: the parallel schedule overlaps
        # them, the sequential one pays for both
        delays = StageDelays(flow=0.010, encode=0.010)
        cfg = PipelineConfig(alpha=0.5, num_classes=2, mode="ema")
        _, seq_t = run_sequential(tiny_frames(), cfg, tiny_model(),
                                  delays=delays)
        _, par_t = run_parallel(tiny_frames(), cfg, tiny_model(),
                                delays=delays)
        seq_ms = np.mean([t.total_us for t in seq_t[1:]]) / 1000
        par_ms = np.mean([t.total_us for t in par_t[1:]]) / 1000
        assert seq_ms > 20.0
        assert par_ms < 14.0

    def test_timing_invariants(self):
        cfg = PipelineConfig(alpha=0.5, flow_scale=1.0, num_classes=2)
        spec = moving_scene(frames=6, width=64, height=48)
        seq = generate(spec)
        mspec = model_spec_from_scene(spec)
        tol = 500.0  # us of measurement slack
        _, seq_t = run_sequential([s[0] for s in seq], cfg, mspec)
        for t in seq_t[1:]:
            stages = t.flow_us + t.encode_us + t.warp_us + t.fuse_us + t.decode_us
            assert t.total_us >= stages - tol
        _, par_t = run_parallel([s[0] for s in seq], cfg, mspec)
        for t in par_t[1:]:
            bound = max(t.flow_us, t.encode_us) + t.warp_us + t.fuse_us + t.decode_us
            assert t.total_us >= bound - tol

    def test_stage_failure_reports_frame(self, tmp_path):
        mspec = ModelSpec(kind="feature-files", num_classes=2,
                          feature_dir=str(tmp_path))
        cfg = PipelineConfig(alpha=0.5, num_classes=2, mode="baseline")
        with pytest.raises(PipelineError) as err:
            run_parallel(tiny_frames(2), cfg, mspec)
        assert err.value.frame_index == 0


class TestBenchmarkReport:
    @staticmethod
    def rows(totals, **stage_us):
        out = []
        for i, total in enumerate(totals):
            kw = dict(flow_us=0.0, encode_us=0.0, warp_us=0.0, fuse_us=0.0,
                      decode_us=0.0)
            kw.update(stage_us)
            out.append(StageTiming(i, total_us=total, executor="sequential",
                                   flow_scale=1.0, **kw))
        return out

    def test_constant_totals(self):
        report = benchmark_report(self.rows([1000.0] * 5))
        lines = report.strip().splitlines()
        assert lines[0] == "stage,mean_us,std_us,mode,flow_scale"
        total_line = [l for l in lines if l.startswith("total,")][0]
        assert total_line.split(",")[1:3] == ["1000.000", "0.000"]
        assert lines[-1] == "achievable_hz,1000.000"

    def test_sample_std(self):
        report = benchmark_report(self.rows([900.0, 1100.0]))
        total_line = [l for l in report.splitlines()
                      if l.startswith("total,")][0]
        assert float(total_line.split(",")[2]) == pytest.approx(141.4, abs=0.1)

    def test_insufficient_samples(self):
        with pytest.raises(ValueError):
            benchmark_report(self.rows([1000.0]))

    def test_timings_csv_rows(self):
        csv = timings_csv(self.rows([10.0, 20.0]))
        assert len(csv.strip().splitlines()) == 3
