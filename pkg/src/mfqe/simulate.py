"""Synthetic clip generation and block-DCT degradation.

Stands in for a real encoder at desk scale: clips with known global motion
are produced from seeded textures, and a per-frame quantization schedule
induces the same kind of periodic quality fluctuation that real codecs
show, with peak-quality frames at the schedule positions of minimum
quantization step.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.fft
from scipy.ndimage import gaussian_filter

from .errors import ArgumentError
from .video_io import ClipPair, LumaFrame, VideoClip, clip_from_arrays

BLOCK = 8
MAX_STEP_DISPLACEMENT = 8.0


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a deterministic synthetic clip.

    motion is either one (dx, dy) pair applied at every frame step or a
    per-step sequence; positive values move content rightward/downward.
    Sprites are rectangles with independent seeded velocities overlaid on
    the translated base texture.
    """

    width: int = 64
    height: int = 64
    frame_count: int = 30
    motion: tuple[float, float] | Sequence[tuple[float, float]] = (0.0, 0.0)
    texture_seed: int = 0
    sprite_count: int = 0

    def __post_init__(self):
        if self.width < 16 or self.height < 16:
            raise ArgumentError("frame dimensions must be at least 16x16")
        if self.frame_count < 5:
            raise ArgumentError("frame_count must be at least 5")
        steps = self.per_step_motion()
        for dx, dy in steps:
            if abs(dx) > MAX_STEP_DISPLACEMENT or abs(dy) > MAX_STEP_DISPLACEMENT:
                raise ArgumentError(
                    f"per-step displacement ({dx}, {dy}) exceeds "
                    f"{MAX_STEP_DISPLACEMENT} pixels"
                )
        if self.sprite_count < 0:
            raise ArgumentError("sprite_count must be nonnegative")

    def per_step_motion(self) -> tuple[tuple[float, float], ...]:
        m = self.motion
        if len(m) == 2 and np.isscalar(m[0]):
            return ((float(m[0]), float(m[1])),) * (self.frame_count - 1)
        steps = tuple((float(dx), float(dy)) for dx, dy in m)
        if len(steps) < self.frame_count - 1:
            raise ArgumentError(
                f"motion sequence has {len(steps)} steps, "
                f"need {self.frame_count - 1}"
            )
        return steps[: self.frame_count - 1]


@dataclass(frozen=True)
class QualitySchedule:
    """Per-frame quantization steps with the given period.

    profile holds one multiplier per position in the period; frame t is
    quantized with base_qstep * profile[t % period]. When profile is
    omitted a symmetric tent from 1.0 up to peak_qstep/base_qstep is built,
    and when peak_qstep is omitted it defaults to 2.6x the base (then the
    default period-4 profile is 1.0, 1.8, 2.6, 1.8).
    """

    period: int = 4
    base_qstep: float = 8.0
    peak_qstep: float | None = None
    profile: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.period < 2:
            raise ArgumentError("period must be at least 2")
        if self.base_qstep < 1.0:
            raise ArgumentError("base_qstep must be at least 1")
        if self.profile is None:
            peak = self.peak_qstep if self.peak_qstep is not None else 2.6 * self.base_qstep
            ratio = peak / self.base_qstep
            prof = []
            for k in range(self.period):
                u = k / self.period
                tri = 2.0 * u if u <= 0.5 else 2.0 * (1.0 - u)
                prof.append(1.0 + (ratio - 1.0) * tri)
            object.__setattr__(self, "profile", tuple(prof))
            object.__setattr__(self, "peak_qstep", float(peak))
        else:
            prof = tuple(float(p) for p in self.profile)
            if len(prof) != self.period:
                raise ArgumentError("profile length must equal period")
            if min(prof) <= 0:
                raise ArgumentError("profile multipliers must be positive")
            object.__setattr__(self, "profile", prof)
            object.__setattr__(self, "peak_qstep", self.base_qstep * max(prof))
        if not self.peak_qstep > self.base_qstep:
            raise ArgumentError("peak_qstep must exceed base_qstep")

    def qstep_for(self, frame_index: int) -> float:
        return self.base_qstep * self.profile[frame_index % self.period]


def _translate(image: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """Translate by (dx, dy) pixels, bilinear, edge-replicated borders."""
    h, w = image.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    src_x = np.clip(xs - dx, 0.0, w - 1.0)
    src_y = np.clip(ys - dy, 0.0, h - 1.0)
    x0 = np.floor(src_x).astype(np.intp)
    y0 = np.floor(src_y).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = src_x - x0
    fy = src_y - y0
    top = image[y0, x0] * (1.0 - fx) + image[y0, x1] * fx
    bot = image[y1, x0] * (1.0 - fx) + image[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def _base_texture(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Smoothed multi-octave noise normalized to a mid-range 8-bit image."""
    tex = np.zeros((height, width))
    for sigma, weight in ((1.5, 0.45), (4.0, 0.35), (8.0, 0.20)):
        layer = gaussian_filter(rng.standard_normal((height, width)), sigma, mode="reflect")
        std = layer.std()
        if std > 0:
            tex += weight * layer / std
    tex = 128.0 + 45.0 * tex / max(tex.std(), 1e-9)
    return np.clip(tex, 0.0, 255.0)


def synth_clip(spec: SynthSpec, frame_rate: Fraction = Fraction(30, 1)) -> VideoClip:
    """Render the clip described by spec. Deterministic given texture_seed."""
    rng = np.random.default_rng(spec.texture_seed)
    base = _base_texture(rng, spec.height, spec.width)

    sprites = []
    for _ in range(spec.sprite_count):
        sw = int(rng.integers(6, 14))
        sh = int(rng.integers(6, 14))
        sprites.append(
            {
                "x": float(rng.uniform(0, spec.width - sw)),
                "y": float(rng.uniform(0, spec.height - sh)),
                "vx": float(rng.uniform(-1.5, 1.5)),
                "vy": float(rng.uniform(-1.5, 1.5)),
                "w": sw,
                "h": sh,
                "value": float(rng.uniform(30, 225)),
            }
        )

    steps = spec.per_step_motion()
    frames = []
    cum_dx = cum_dy = 0.0
    for t in range(spec.frame_count):
        if t > 0:
            cum_dx += steps[t - 1][0]
            cum_dy += steps[t - 1][1]
        plane = base if t == 0 else _translate(base, cum_dx, cum_dy)
        plane = plane.copy()
        for s in sprites:
            # sprites wrap so they stay in frame over long clips
            sx = int(round(s["x"] + t * s["vx"])) % max(spec.width - s["w"], 1)
            sy = int(round(s["y"] + t * s["vy"])) % max(spec.height - s["h"], 1)
            plane[sy : sy + s["h"], sx : sx + s["w"]] = s["value"]
        frames.append(np.clip(np.rint(plane), 0, 255).astype(np.uint8))

    return clip_from_arrays(frames, frame_rate=frame_rate)


def _quantize_plane(plane: np.ndarray, qstep: float) -> np.ndarray:
    """8x8 orthonormal DCT-II, uniform scalar quantization, inverse, clamp."""
    h, w = plane.shape
    blocks = plane.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).transpose(0, 2, 1, 3)
    coeffs = scipy.fft.dctn(blocks, type=2, axes=(2, 3), norm="ortho")
    coeffs = np.rint(coeffs / qstep) * qstep
    rec = scipy.fft.idctn(coeffs, type=2, axes=(2, 3), norm="ortho")
    rec = rec.transpose(0, 2, 1, 3).reshape(h, w)
    return np.clip(np.rint(rec), 0, 255).astype(np.uint8)


def degrade_clip(raw: VideoClip, sched: QualitySchedule) -> ClipPair:
    """Produce the (raw, compressed) pair for a schedule of qsteps."""
    if len(raw) == 0:
        raise ArgumentError("cannot degrade an empty clip")
    if raw.width % BLOCK or raw.height % BLOCK:
        raise ArgumentError(
            f"dimensions {raw.width}x{raw.height} must be multiples of {BLOCK}"
        )
    degraded = []
    for t, frame in enumerate(raw.frames):
        plane = frame.pixels.astype(np.float64)
        degraded.append(_quantize_plane(plane, sched.qstep_for(t)))
    compressed = VideoClip(
        frames=tuple(LumaFrame(p) for p in degraded),
        chroma=raw.chroma,
        frame_rate=raw.frame_rate,
        colorspace=raw.colorspace,
    )
    return ClipPair(raw=raw, compressed=compressed)
