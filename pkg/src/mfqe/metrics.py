"""Per-frame PSNR curves and quality-fluctuation statistics.

A compressed sequence's quality oscillates frame to frame. The statistics
here quantify that: strict local maxima of the PSNR curve are peak-quality
frames (PQFs), strict local minima are valley-quality frames (VQFs), and
the curve's spread is summarized by its standard deviation, the mean
peak-valley difference (PVD) and the mean peak separation (PS).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .video_io import ClipPair, LumaFrame

# PSNR of a zero-MSE comparison; far above anything real compression yields.
PSNR_CAP_DB = 100.0


class FrameKind(enum.Enum):
    PQF = "pqf"
    VQF = "vqf"
    NEITHER = "neither"


@dataclass(frozen=True)
class QualityCurve:
    """Per-frame PSNR values in dB (capped, finite)."""

    psnr: np.ndarray  # float64, shape (frames,)

    def __post_init__(self):
        arr = np.asarray(self.psnr, dtype=np.float64)
        if arr.ndim != 1:
            raise ArgumentError("quality curve must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ArgumentError("quality curve contains non-finite values")
        object.__setattr__(self, "psnr", arr)

    def __len__(self) -> int:
        return len(self.psnr)


@dataclass(frozen=True)
class PeakValleyLabels:
    kinds: tuple[FrameKind, ...]

    @property
    def pqf_indices(self) -> tuple[int, ...]:
        return tuple(i for i, k in enumerate(self.kinds) if k is FrameKind.PQF)

    @property
    def vqf_indices(self) -> tuple[int, ...]:
        return tuple(i for i, k in enumerate(self.kinds) if k is FrameKind.VQF)

    def pqf_mask(self) -> np.ndarray:
        return np.array([k is FrameKind.PQF for k in self.kinds], dtype=bool)

    def __len__(self) -> int:
        return len(self.kinds)


@dataclass(frozen=True)
class CurveStats:
    std_db: float
    mean_pvd_db: float
    mean_ps_frames: float
    per_pqf_pvd: tuple[float, ...]
    per_gap_ps: tuple[int, ...]


def psnr(a: LumaFrame, b: LumaFrame) -> float:
    """PSNR in dB between two equal-sized 8-bit luma frames, capped at 100."""
    if a.pixels.shape != b.pixels.shape:
        raise ArgumentError(
            f"dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    diff = a.pixels.astype(np.float64) - b.pixels.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(255.0 ** 2 / mse))


def quality_curve(pair: ClipPair) -> QualityCurve:
    """PSNR of each compressed frame against its raw counterpart."""
    values = [psnr(r, c) for r, c in zip(pair.raw.frames, pair.compressed.frames)]
    return QualityCurve(np.array(values, dtype=np.float64))


def find_peaks_valleys(curve: QualityCurve) -> PeakValleyLabels:
    """Label strict local maxima as PQF and strict local minima as VQF.

    Ties (plateaus) and the endpoints are labelled neither.
    """
    v = curve.psnr
    if len(v) < 3:
        raise ArgumentError(f"need at least 3 frames, got {len(v)}")
    kinds = [FrameKind.NEITHER] * len(v)
    for t in range(1, len(v) - 1):
        if v[t] > v[t - 1] and v[t] > v[t + 1]:
            kinds[t] = FrameKind.PQF
        elif v[t] < v[t - 1] and v[t] < v[t + 1]:
            kinds[t] = FrameKind.VQF
    return PeakValleyLabels(tuple(kinds))


def curve_stats(curve: QualityCurve, labels: PeakValleyLabels) -> CurveStats:
    """Fluctuation statistics of a labelled curve.

    STD is the population standard deviation. Each PQF's PVD is taken
    against its nearest VQF by frame distance, ties broken toward the later
    VQF. PS values are index differences of consecutive PQFs. Empty
    sequences average to 0.
    """
    if len(curve) != len(labels):
        raise ArgumentError("labels were not derived from this curve")
    v = curve.psnr
    std = float(np.std(v))

    pqfs = labels.pqf_indices
    vqfs = labels.vqf_indices
    pvds: list[float] = []
    if vqfs:
        varr = np.array(vqfs)
        for p in pqfs:
            dist = np.abs(varr - p)
            best = np.min(dist)
            # ties toward the later VQF: take the last index at minimum distance
            nearest = varr[dist == best].max()
            pvds.append(float(v[p] - v[nearest]))
    ps = [int(b - a) for a, b in zip(pqfs, pqfs[1:])]

    return CurveStats(
        std_db=std,
        mean_pvd_db=float(np.mean(pvds)) if pvds else 0.0,
        mean_ps_frames=float(np.mean(ps)) if ps else 0.0,
        per_pqf_pvd=tuple(pvds),
        per_gap_ps=tuple(ps),
    )
