"""No-reference detection of peak-quality frames.

Couples the 180-dim context features with the RBF SVM and applies two
consistency rules to the raw per-frame labels: collapse runs of
adjacent positives to the single most probable frame, then break up
overlong gaps by promoting the most probable strictly-interior frame
of each gap. Sequence edges bound gaps like virtual positives so every
frame ends up within reach of a detected keyframe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .features import clip_context_matrix
from .metrics import find_peaks_valleys, quality_curve
from .svm import SvmModel, predict_probs
from .video_io import ClipPair, VideoClip

DEFAULT_MAX_GAP = 6
DEFAULT_PROB_THRESHOLD = 0.5


@dataclass(frozen=True)
class DetectorConfig:
    """Detection thresholds: gap bound D and probability cutoff."""

    d_max: int = DEFAULT_MAX_GAP
    prob_threshold: float = DEFAULT_PROB_THRESHOLD

    def __post_init__(self):
        if self.d_max < 2:
            raise ArgumentError(f"d_max must be >= 2, got {self.d_max}")
        if not 0.0 < self.prob_threshold < 1.0:
            raise ArgumentError(f"prob_threshold must be in (0,1), got {self.prob_threshold}")


@dataclass(frozen=True)
class DetectionResult:
    """Per-frame binary labels with their calibrated probabilities."""

    labels: tuple[int, ...]
    probs: tuple[float, ...]
    refined: bool

    def __post_init__(self):
        if len(self.labels) != len(self.probs):
            raise ArgumentError("labels and probs must have equal length")
        if any(l not in (0, 1) for l in self.labels):
            raise ArgumentError("labels must be 0 or 1")
        if any(not 0.0 < p < 1.0 for p in self.probs):
            raise ArgumentError("probs must lie in the open interval (0,1)")
        if self.refined:
            for a, b in zip(self.labels, self.labels[1:]):
                if a == 1 and b == 1:
                    raise ArgumentError("refined labels contain adjacent positives")

    @property
    def positive_indices(self) -> tuple[int, ...]:
        return tuple(i for i, l in enumerate(self.labels) if l == 1)


@dataclass(frozen=True)
class DetectionScores:
    precision: float
    recall: float
    f1: float


def build_training_set(pairs) -> tuple[np.ndarray, np.ndarray]:
    """Labeled detector rows from raw/compressed pairs.

    Features come from the compressed clip only; ground-truth positives
    are the strict local maxima of the true PSNR curve.
    """
    feature_blocks = []
    label_blocks = []
    for pair in pairs:
        if not isinstance(pair, ClipPair):
            raise ArgumentError(f"expected ClipPair, got {type(pair).__name__}")
        if len(pair.compressed.frames) < 3:
            raise ArgumentError("each training pair needs at least 3 frames")
        feature_blocks.append(clip_context_matrix(pair.compressed))
        marks = find_peaks_valleys(quality_curve(pair))
        label_blocks.append(marks.pqf_mask().astype(np.int64))
    if not feature_blocks:
        raise ArgumentError("no training pairs supplied")
    return np.vstack(feature_blocks), np.concatenate(label_blocks)


def refine_labels(labels, probs, cfg: DetectorConfig = DetectorConfig()) -> np.ndarray:
    """Enforce the no-adjacent-positives and bounded-gap constraints.

    Rule 1: each maximal run of consecutive 1s keeps only its highest
    probability position (earliest on ties). Rule 2: each maximal run
    of consecutive 0s longer than d_max, bounded by 1s or sequence
    edges, gets a 1 at its most probable strictly interior position;
    the resulting sub-runs are re-examined until every gap is within
    bound. Probabilities are never modified.
    """
    out = np.asarray(labels, dtype=np.int64).copy()
    p = np.asarray(probs, dtype=np.float64)
    if out.ndim != 1 or out.shape != p.shape:
        raise ArgumentError(f"labels shape {out.shape} and probs shape {p.shape} must match")
    if not np.isin(out, (0, 1)).all():
        raise ArgumentError("labels must be 0 or 1")
    n = len(out)
    if n == 0:
        return out

    # Rule 1: collapse runs of adjacent positives
    i = 0
    while i < n:
        if out[i] == 1:
            j = i
            while j + 1 < n and out[j + 1] == 1:
                j += 1
            if j > i:
                keep = i + int(np.argmax(p[i : j + 1]))
                out[i : j + 1] = 0
                out[keep] = 1
            i = j + 1
        else:
            i += 1

    # Rule 2: split overlong gaps, recursing into the halves
    ones = [-1] + [int(k) for k in np.flatnonzero(out == 1)] + [n]
    stack = list(zip(ones, ones[1:]))
    while stack:
        a, b = stack.pop()
        gap = b - a - 1
        if gap <= cfg.d_max:
            continue
        interior = p[a + 2 : b - 1]
        if interior.size == 0:
            continue
        k = a + 2 + int(np.argmax(interior))
        out[k] = 1
        stack.append((a, k))
        stack.append((k, b))
    return out


def detect(clip: VideoClip, model: SvmModel, cfg: DetectorConfig = DetectorConfig()) -> DetectionResult:
    """Classify every frame of a clip and return refined labels."""
    if len(clip.frames) < 3:
        raise ArgumentError("detection needs a clip of at least 3 frames")
    feats = clip_context_matrix(clip)
    probs = predict_probs(model, feats)
    raw = (probs >= cfg.prob_threshold).astype(np.int64)
    refined = refine_labels(raw, probs, cfg)
    return DetectionResult(
        labels=tuple(int(v) for v in refined),
        probs=tuple(float(v) for v in probs),
        refined=True,
    )


def evaluate(predicted, truth) -> DetectionScores:
    """Precision, recall, and F1 of per-frame binary labels."""
    if isinstance(predicted, DetectionResult):
        predicted = predicted.labels
    pred = np.asarray(predicted, dtype=np.int64)
    true = np.asarray(truth, dtype=np.int64)
    if pred.shape != true.shape:
        raise ArgumentError(f"label shapes differ: {pred.shape} vs {true.shape}")
    tp = int(np.sum((pred == 1) & (true == 1)))
    fp = int(np.sum((pred == 1) & (true == 0)))
    fn = int(np.sum((pred == 0) & (true == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return DetectionScores(precision, recall, f1)
