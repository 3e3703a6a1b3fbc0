"""Synthetic sequences with ground-truth masks and backward flow.

Rigid shapes glide over a flat background. Each surface carries its own
seeded jitter texture that translates with it, so optical flow stays
observable (constant-color regions would hit the aperture problem).
Optional single-frame label noise recolors background pixels toward a
foreground prototype to create baseline false-positive flicker.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .core import (FlowField, Frame, SegmentationMask, write_flow, write_frame,
                   write_mask)
from .model import ModelSpec, Prototype

MAX_SPEED = 8.0


@dataclass
class SceneObject:
    shape: str  # "rectangle" | "disk"
    class_id: int
    color: Tuple[int, int, int]
    position: Tuple[float, float]  # rectangle: top-left; disk: center
    velocity: Tuple[float, float] = (0.0, 0.0)
    size: Tuple[float, float] = (0.0, 0.0)  # rectangle only
    radius: float = 0.0  # disk only

    def __post_init__(self):
        if self.shape not in ("rectangle", "disk"):
            raise ValueError("shape must be rectangle or disk")
        if max(abs(self.velocity[0]), abs(self.velocity[1])) > MAX_SPEED:
            raise ValueError(f"object speed components must be <= {MAX_SPEED}")
        if self.shape == "rectangle" and min(self.size) <= 0:
            raise ValueError("rectangle needs a positive size")
        if self.shape == "disk" and self.radius <= 0:
            raise ValueError("disk needs a positive radius")


@dataclass
class SceneSpec:
    width: int = 320
    height: int = 256
    num_classes: int = 2
    objects: List[SceneObject] = field(default_factory=list)
    background_class: int = 0
    background_color: Tuple[int, int, int] = (40, 110, 40)
    texture_amplitude: float = 8.0
    label_noise_rate: float = 0.0
    noise_blob_radius: float = 3.0
    noise_class: Optional[int] = None
    frames: int = 10
    seed: int = 0
    # camera pan applied to everything, including the background texture
    global_velocity: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise ValueError("scene must be at least 2x2")
        if self.frames < 1:
            raise ValueError("need at least one frame")
        for obj in self.objects:
            if not 0 <= obj.class_id < self.num_classes:
                raise ValueError("object class out of range")
        if not 0 <= self.background_class < self.num_classes:
            raise ValueError("background class out of range")
        if not 0.0 <= self.label_noise_rate <= 1.0:
            raise ValueError("label_noise_rate must be in [0, 1]")
        gx, gy = self.global_velocity
        if max(abs(gx), abs(gy)) > MAX_SPEED:
            raise ValueError(f"global speed components must be <= {MAX_SPEED}")

    def default_noise_class(self) -> int:
        if self.noise_class is not None:
            return self.noise_class
        for obj in self.objects:
            if obj.class_id != self.background_class:
                return obj.class_id
        return (self.background_class + 1) % self.num_classes


def prototypes_from_scene(spec: SceneSpec) -> list:
    """Class prototypes (class color, zero bias) for the reference model."""
    colors = {spec.background_class: spec.background_color}
    for obj in spec.objects:
        colors.setdefault(obj.class_id, obj.color)
    protos = []
    for cls in range(spec.num_classes):
        # classes never rendered get an off-palette color
        color = colors.get(cls, ((255 - 23 * cls) % 256, (23 * cls) % 256, 128))
        protos.append(Prototype(cls, tuple(color)))
    return protos


def model_spec_from_scene(spec: SceneSpec, feature_stride: int = 4,
                          noise_std: float = 0.0, noise_seed: int = 0) -> ModelSpec:
    return ModelSpec(kind="reference", num_classes=spec.num_classes,
                     feature_stride=feature_stride,
                     prototypes=prototypes_from_scene(spec),
                     noise_std=noise_std, noise_seed=noise_seed)


def _footprint(obj: SceneObject, offset, xx, yy) -> np.ndarray:
    ox, oy = offset
    if obj.shape == "rectangle":
        x0 = obj.position[0] + ox
        y0 = obj.position[1] + oy
        return ((xx >= x0) & (xx < x0 + obj.size[0])
                & (yy >= y0) & (yy < y0 + obj.size[1]))
    cx = obj.position[0] + ox
    cy = obj.position[1] + oy
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= obj.radius ** 2


def _tile_lookup(tile: np.ndarray, ix: np.ndarray, iy: np.ndarray) -> np.ndarray:
    iy = np.clip(np.rint(iy).astype(np.intp), 0, tile.shape[0] - 1)
    ix = np.clip(np.rint(ix).astype(np.intp), 0, tile.shape[1] - 1)
    return tile[iy, ix]


def generate(spec: SceneSpec):
    """Render the sequence.

    Returns a list of (Frame, SegmentationMask, FlowField): per-frame image,
    topmost-object label map, and ground-truth backward flow (frame j maps
    each pixel to its source in frame j-1: constant -velocity inside a moving
    surface, zero on static background). Deterministic given the seed.
    """
    h, w = spec.height, spec.width
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    gdx, gdy = spec.global_velocity
    amp = spec.texture_amplitude

    span_x = int(np.ceil(abs(gdx) * spec.frames)) + 1
    span_y = int(np.ceil(abs(gdy) * spec.frames)) + 1
    rng_tex = np.random.default_rng([spec.seed, 0])
    bg_tile = rng_tex.uniform(-1.0, 1.0, (h + span_y, w + span_x, 3))
    anchor_x = span_x if gdx > 0 else 0
    anchor_y = span_y if gdy > 0 else 0

    obj_tiles = []
    for k, obj in enumerate(spec.objects):
        rng_obj = np.random.default_rng([spec.seed, 1 + k])
        if obj.shape == "rectangle":
            shape = (int(np.ceil(obj.size[1])) + 3, int(np.ceil(obj.size[0])) + 3)
        else:
            shape = (int(np.ceil(2 * obj.radius)) + 4,) * 2
        obj_tiles.append(rng_obj.uniform(-1.0, 1.0, shape + (3,)))

    noise_cls = spec.default_noise_class()
    noise_color = None
    if spec.label_noise_rate > 0.0:
        palette = {p.class_id: p.color for p in prototypes_from_scene(spec)}
        noise_color = np.asarray(palette[noise_cls], np.float64)

    panning = bool(gdx or gdy)
    out = []
    for j in range(spec.frames):
        gox, goy = gdx * j, gdy * j
        img = np.empty((h, w, 3), np.float64)
        img[:] = np.asarray(spec.background_color, np.float64)
        if amp > 0.0:
            img += amp * _tile_lookup(bg_tile, xx - gox + anchor_x,
                                      yy - goy + anchor_y)
        labels = np.full((h, w), spec.background_class, np.uint8)
        flow_u = np.full((h, w), -gdx if panning else 0.0)
        flow_v = np.full((h, w), -gdy if panning else 0.0)

        for obj, tile in zip(spec.objects, obj_tiles):
            ox = obj.position[0] + obj.velocity[0] * j + gox
            oy = obj.position[1] + obj.velocity[1] * j + goy
            # footprint at the object's frame-j position
            inside = _footprint(obj, (obj.velocity[0] * j + gox,
                                      obj.velocity[1] * j + goy), xx, yy)
            if not inside.any():
                continue
            if obj.shape == "rectangle":
                lx = xx - ox + 1
                ly = yy - oy + 1
            else:
                lx = xx - (ox - obj.radius) + 1
                ly = yy - (oy - obj.radius) + 1
            color = np.asarray(obj.color, np.float64)
            tex = amp * _tile_lookup(tile, lx, ly) if amp > 0.0 else 0.0
            pix = color + tex if amp > 0.0 else np.broadcast_to(color, img.shape)
            img[inside] = pix[inside]
            labels[inside] = obj.class_id
            flow_u[inside] = -(obj.velocity[0] + gdx)
            flow_v[inside] = -(obj.velocity[1] + gdy)

        if noise_color is not None:
            # noise events are small blobs so they survive the encoder's
            # area averaging; centers are thinned so the per-pixel swap
            # probability still matches label_noise_rate
            from scipy import ndimage
            r = int(round(spec.noise_blob_radius))
            dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
            disk = dy ** 2 + dx ** 2 <= r ** 2
            rng_noise = np.random.default_rng([spec.seed, 7001, j])
            centers = rng_noise.random((h, w)) < (spec.label_noise_rate
                                                  / disk.sum())
            hits = ndimage.binary_dilation(centers, structure=disk)
            hits &= labels == spec.background_class
            img[hits] = noise_color

        frame = Frame(np.rint(np.clip(img, 0, 255)).astype(np.uint8), index=j)
        mask = SegmentationMask(labels)
        flow = FlowField(flow_u.astype(np.float32), flow_v.astype(np.float32))
        out.append((frame, mask, flow))
    return out


def motion_profile(flows) -> list:
    """Per-frame mean ground-truth flow magnitude."""
    from .flow import mean_flow_magnitude
    return [mean_flow_magnitude(f) for f in flows]


def save_dataset(sequence, outdir, scene_text: Optional[str] = None) -> None:
    """Write frames/NNNNNN.ppm, masks/NNNNNN.pgm, flow/NNNNNN.mcfl."""
    for sub in ("frames", "masks", "flow"):
        os.makedirs(os.path.join(outdir, sub), exist_ok=True)
    for j, (frame, mask, flow) in enumerate(sequence):
        write_frame(frame, os.path.join(outdir, "frames", f"{j:06d}.ppm"))
        write_mask(mask, os.path.join(outdir, "masks", f"{j:06d}.pgm"))
        write_flow(flow, os.path.join(outdir, "flow", f"{j:06d}.mcfl"))
    if scene_text is not None:
        with open(os.path.join(outdir, "scene.cfg"), "w") as fh:
            fh.write(scene_text)
