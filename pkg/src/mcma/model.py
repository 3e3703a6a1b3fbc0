"""Encoder/decoder pair with a fixed fusion point.

Two implementations share one interface: an analytic, training-free
reference model (per-class color prototypes, every behaviour has a closed
form) and a feature-files model that replays externally exported "MCFE"
files so real networks can be plugged in offline.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import FeatureMap, Frame, SegmentationMask, read_features


@dataclass(frozen=True)
class Prototype:
    class_id: int
    color: tuple  # (r, g, b)
    bias: float = 0.0


@dataclass
class ModelSpec:
    kind: str = "reference"
    num_classes: int = 2
    feature_stride: int = 4
    prototypes: Sequence[Prototype] = field(default_factory=tuple)
    noise_std: float = 0.0
    noise_seed: int = 0
    feature_dir: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("reference", "feature-files"):
            raise ValueError("kind must be 'reference' or 'feature-files'")
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if self.feature_stride < 1:
            raise ValueError("feature_stride must be positive")
        if self.kind == "reference":
            if len(self.prototypes) != self.num_classes:
                raise ValueError("prototype count must equal num_classes")
            ids = sorted(p.class_id for p in self.prototypes)
            if ids != list(range(self.num_classes)):
                raise ValueError("prototypes must cover classes 0..L-1")
        elif self.feature_dir is None:
            raise ValueError("feature-files model needs feature_dir")


def feature_file_path(feature_dir: str, frame_index: int) -> str:
    return os.path.join(feature_dir, f"{frame_index:06d}.mcfe")


def _downscale_area(img: np.ndarray, stride: int) -> np.ndarray:
    h, w, c = img.shape
    if h % stride or w % stride:
        raise ValueError("frame dimensions must be divisible by feature_stride")
    return img.reshape(h // stride, stride, w // stride, stride, c).mean(axis=(1, 3))


def encode(frame: Frame, spec: ModelSpec) -> FeatureMap:
    """E(x): frame to (num_classes, H/stride, W/stride) features."""
    if spec.kind == "feature-files":
        path = feature_file_path(spec.feature_dir, frame.index)
        if not os.path.exists(path):
            raise FileNotFoundError(f"missing feature file {path}")
        return read_features(path)

    img = frame.data.astype(np.float64)
    if frame.channels == 1:
        img = np.repeat(img, 3, axis=2)
    small = _downscale_area(img, spec.feature_stride)

    by_class = sorted(spec.prototypes, key=lambda p: p.class_id)
    chans = np.empty((spec.num_classes,) + small.shape[:2], np.float64)
    for proto in by_class:
        color = np.asarray(proto.color, np.float64)
        dist = np.sum((small - color) ** 2, axis=2)
        chans[proto.class_id] = -dist / 255.0 ** 2 + proto.bias
    if spec.noise_std > 0.0:
        rng = np.random.default_rng([spec.noise_seed, frame.index])
        chans = chans + rng.normal(0.0, spec.noise_std, chans.shape)
    return FeatureMap(chans.astype(np.float32))


def _upsample_bilinear(data: np.ndarray, stride: int) -> np.ndarray:
    """Half-pixel-aligned bilinear upsample of (c, h, w) by an integer stride."""
    if stride == 1:
        return data
    c, h, w = data.shape

    def axis_coords(n_out, n_in):
        pos = np.clip((np.arange(n_out) + 0.5) / stride - 0.5, 0, n_in - 1)
        lo = np.floor(pos).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return (pos - lo).astype(data.dtype), lo, hi

    fy, y0, y1 = axis_coords(h * stride, h)
    fx, x0, x1 = axis_coords(w * stride, w)
    rows = data[:, y0, :] + fy[None, :, None] * (data[:, y1, :] - data[:, y0, :])
    return rows[:, :, x0] + fx[None, None, :] * (rows[:, :, x1] - rows[:, :, x0])


def decode(features: FeatureMap, spec: ModelSpec) -> SegmentationMask:
    """D(f): upsample per-class scores to full resolution, then argmax.
    Ties resolve to the lowest class index."""
    if features.channels != spec.num_classes:
        raise ValueError("feature channel count must equal num_classes")
    scores = _upsample_bilinear(features.data, spec.feature_stride)
    labels = np.argmax(scores, axis=0).astype(np.uint8)
    return SegmentationMask(labels)
