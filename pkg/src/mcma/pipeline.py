"""Sequence orchestration: sequential and parallel executors plus timing.

The parallel executor reproduces the two-way split of the inference loop:
optical flow and the encoder forward pass of the same step run concurrently,
everything downstream of the fused state stays strictly ordered. Both
executors share the exact same math, so their masks are bit-identical.
"""

from __future__ import annotations

import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .core import FeatureMap, FlowField, Frame, PipelineConfig, SegmentationMask
from .flow import FlowParams, downscale_frame, estimate_flow, resize_flow
from .fusion import TemporalState, ema_fuse
from .model import ModelSpec, decode, encode
from .warping import WarpConfig, warp_features

STAGES = ("flow", "encode", "warp", "fuse", "decode")


@dataclass
class StageDelays:
    """Test hook: extra sleep (seconds) charged inside each stage's timer."""
    flow: float = 0.0
    encode: float = 0.0
    warp: float = 0.0
    fuse: float = 0.0
    decode: float = 0.0


@dataclass
class StageTiming:
    frame_index: int
    flow_us: float
    encode_us: float
    warp_us: float
    fuse_us: float
    decode_us: float
    total_us: float
    executor: str
    flow_scale: float


class PipelineError(RuntimeError):
    def __init__(self, frame_index: int, cause: Exception):
        super().__init__(f"pipeline failed at frame {frame_index}: {cause}")
        self.frame_index = frame_index
        self.cause = cause


def _now_us() -> float:
    return time.perf_counter_ns() / 1000.0


class _Stepper:
    """Shared per-step stage functions; executors differ only in scheduling."""

    def __init__(self, cfg: PipelineConfig, model_spec: ModelSpec,
                 flow_params: Optional[FlowParams],
                 delays: Optional[StageDelays]):
        self.cfg = cfg
        self.model_spec = model_spec
        self.flow_params = flow_params or FlowParams()
        self.delays = delays or StageDelays()
        self.warp_cfg = WarpConfig(cfg.lam)

    def flow(self, prev: Frame, curr: Frame) -> Optional[FlowField]:
        if self.delays.flow:
            time.sleep(self.delays.flow)
        if self.cfg.mode != "mcma":
            return None
        small_prev = downscale_frame(prev, self.cfg.flow_scale)
        small_curr = downscale_frame(curr, self.cfg.flow_scale)
        return estimate_flow(small_prev, small_curr, self.flow_params)

    def encode(self, frame: Frame) -> FeatureMap:
        if self.delays.encode:
            time.sleep(self.delays.encode)
        return encode(frame, self.model_spec)

    def warp(self, state: TemporalState, flow: Optional[FlowField],
             feats: FeatureMap) -> FeatureMap:
        if self.delays.warp:
            time.sleep(self.delays.warp)
        if self.cfg.mode != "mcma" or flow is None:
            return state.state_features
        flow = resize_flow(flow, feats.height, feats.width)
        return warp_features(state.state_features, flow, self.warp_cfg)

    def fuse(self, feats: FeatureMap, warped: FeatureMap) -> FeatureMap:
        if self.delays.fuse:
            time.sleep(self.delays.fuse)
        if self.cfg.mode == "baseline":
            return feats
        return ema_fuse(feats, warped, self.cfg.alpha)

    def decode(self, fused: FeatureMap) -> SegmentationMask:
        if self.delays.decode:
            time.sleep(self.delays.decode)
        return decode(fused, self.model_spec)


def _check_dims(frame: Frame, first: Frame, index: int) -> None:
    if (frame.height, frame.width) != (first.height, first.width):
        raise PipelineError(index, ValueError("frame dimensions changed"))


def run_sequential(frames: Sequence[Frame], cfg: PipelineConfig,
                   model_spec: ModelSpec,
                   flow_params: Optional[FlowParams] = None,
                   delays: Optional[StageDelays] = None):
    """Run the loop one stage after another; returns (masks, timings)."""
    frames = list(frames)
    if not frames:
        raise ValueError("need at least one frame")
    step = _Stepper(cfg, model_spec, flow_params, delays)
    masks: List[SegmentationMask] = []
    timings: List[StageTiming] = []
    state: Optional[TemporalState] = None

    for j, frame in enumerate(frames):
        try:
            _check_dims(frame, frames[0], j)
            t_start = _now_us()
            flow_us = warp_us = fuse_us = 0.0
            if state is None:
                t0 = _now_us()
                fused = step.encode(frame)
                encode_us = _now_us() - t0
            else:
                t0 = _now_us()
                flow = step.flow(state.prev_frame, frame)
                flow_us = _now_us() - t0
                t0 = _now_us()
                feats = step.encode(frame)
                encode_us = _now_us() - t0
                t0 = _now_us()
                warped = step.warp(state, flow, feats)
                warp_us = _now_us() - t0
                t0 = _now_us()
                fused = step.fuse(feats, warped)
                fuse_us = _now_us() - t0
            t0 = _now_us()
            mask = step.decode(fused)
            decode_us = _now_us() - t0
            total_us = _now_us() - t_start
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(j, exc) from exc
        state = TemporalState(fused, frame, j + 1)
        masks.append(mask)
        timings.append(StageTiming(j, flow_us, encode_us, warp_us, fuse_us,
                                   decode_us, total_us, "sequential",
                                   cfg.flow_scale))
    return masks, timings


def run_parallel(frames: Sequence[Frame], cfg: PipelineConfig,
                 model_spec: ModelSpec,
                 flow_params: Optional[FlowParams] = None,
                 delays: Optional[StageDelays] = None):
    """Same loop, but flow and encode of each step execute concurrently.
    Outputs are bit-identical to run_sequential."""
    frames = list(frames)
    if not frames:
        raise ValueError("need at least one frame")
    step = _Stepper(cfg, model_spec, flow_params, delays)
    masks: List[SegmentationMask] = []
    timings: List[StageTiming] = []
    state: Optional[TemporalState] = None

    def timed(fn, *args):
        t0 = _now_us()
        out = fn(*args)
        return out, _now_us() - t0

    with ThreadPoolExecutor(max_workers=2) as pool:
        for j, frame in enumerate(frames):
            try:
                _check_dims(frame, frames[0], j)
                t_start = _now_us()
                flow_us = warp_us = fuse_us = 0.0
                if state is None:
                    fused, encode_us = timed(step.encode, frame)
                else:
                    fut_flow = pool.submit(timed, step.flow,
                                           state.prev_frame, frame)
                    fut_enc = pool.submit(timed, step.encode, frame)
                    flow, flow_us = fut_flow.result()
                    feats, encode_us = fut_enc.result()
                    warped, warp_us = timed(step.warp, state, flow, feats)
                    fused, fuse_us = timed(step.fuse, feats, warped)
                mask, decode_us = timed(step.decode, fused)
                total_us = _now_us() - t_start
            except PipelineError:
                raise
            except Exception as exc:
                raise PipelineError(j, exc) from exc
            state = TemporalState(fused, frame, j + 1)
            masks.append(mask)
            timings.append(StageTiming(j, flow_us, encode_us, warp_us, fuse_us,
                                       decode_us, total_us, "parallel",
                                       cfg.flow_scale))
    return masks, timings


def run(frames, cfg: PipelineConfig, model_spec: ModelSpec,
        flow_params: Optional[FlowParams] = None,
        delays: Optional[StageDelays] = None):
    runner = run_parallel if cfg.executor == "parallel" else run_sequential
    return runner(frames, cfg, model_spec, flow_params, delays)


def benchmark_report(timings: Sequence[StageTiming]) -> str:
    """Per-stage mean/std CSV plus the achievable frame rate.

    Pass warm-started rows (typically timings[1:]); the first frame has no
    flow/warp/fuse stage and would skew the averages.
    """
    if len(timings) < 2:
        raise ValueError("need at least two timing rows")
    mode = timings[0].executor
    scale = timings[0].flow_scale
    buf = io.StringIO()
    buf.write("stage,mean_us,std_us,mode,flow_scale\n")
    for stage in STAGES + ("total",):
        vals = np.array([getattr(t, f"{stage}_us") for t in timings])
        buf.write(f"{stage},{vals.mean():.3f},{vals.std(ddof=1):.3f},"
                  f"{mode},{scale}\n")
    mean_total = float(np.mean([t.total_us for t in timings]))
    buf.write(f"achievable_hz,{1e6 / mean_total:.3f}\n")
    return buf.getvalue()


def alpha_sweep(frames: Sequence[Frame], gts, cfg: PipelineConfig,
                model_spec: ModelSpec,
                flow_params: Optional[FlowParams] = None,
                alphas: Optional[Sequence[float]] = None):
    """mIoU of plain EMA vs MCMA over a grid of smoothing factors.

    Encoder features and flow fields depend only on the frames, so they are
    computed once and the recursion is re-run per alpha. Returns rows of
    (alpha, method, miou) aggregated over the whole sequence.
    """
    from .evaluation import _confusion_counts, _iou_from_counts

    if alphas is None:
        alphas = [round(0.1 + 0.05 * k, 2) for k in range(17)]
    frames = list(frames)
    step = _Stepper(cfg, model_spec, flow_params, None)
    feats = [encode(f, model_spec) for f in frames]
    fh, fw = feats[0].height, feats[0].width
    flows = [None]
    for j in range(1, len(frames)):
        small_prev = downscale_frame(frames[j - 1], cfg.flow_scale)
        small_curr = downscale_frame(frames[j], cfg.flow_scale)
        fl = estimate_flow(small_prev, small_curr, step.flow_params)
        flows.append(resize_flow(fl, fh, fw))

    rows = []
    for alpha in alphas:
        for method in ("ema", "mcma"):
            state = feats[0]
            inter = None
            union = None
            for j, frame in enumerate(frames):
                if j == 0:
                    fused = feats[0]
                else:
                    prior = state
                    if method == "mcma":
                        prior = warp_features(state, flows[j], step.warp_cfg)
                    fused = ema_fuse(feats[j], prior, alpha)
                state = fused
                mask = decode(fused, model_spec)
                it, un = _confusion_counts(mask, gts[j],
                                           model_spec.num_classes)
                inter = it if inter is None else inter + it
                union = un if union is None else union + un
            rows.append((alpha, method, _iou_from_counts(inter, union)[0]))
    return rows


def timings_csv(timings: Sequence[StageTiming]) -> str:
    buf = io.StringIO()
    buf.write("frame,flow_us,encode_us,warp_us,fuse_us,decode_us,"
              "total_us,executor,flow_scale\n")
    for t in timings:
        buf.write(f"{t.frame_index},{t.flow_us:.1f},{t.encode_us:.1f},"
                  f"{t.warp_us:.1f},{t.fuse_us:.1f},{t.decode_us:.1f},"
                  f"{t.total_us:.1f},{t.executor},{t.flow_scale}\n")
    return buf.getvalue()
