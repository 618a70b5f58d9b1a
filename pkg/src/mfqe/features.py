"""No-reference spatial quality features.

Each frame is summarized by 36 statistics of its locally normalized
luminance: at two scales, a generalized Gaussian fit of the normalized
coefficients plus asymmetric generalized Gaussian fits of the four
orientation-neighbor products. Stacking the vectors of the two previous,
current, and two following frames gives the 180-dim context descriptor
consumed by the keyframe detector.

Feature index layout (contractual), per scale block of 18:

    offset  value
    0       GGD shape alpha of MSCN coefficients
    1       GGD variance sigma^2 of MSCN coefficients
    2..5    AGGD (nu, eta, sigma_l^2, sigma_r^2) of horizontal products
    6..9    AGGD of vertical products
    10..13  AGGD of main-diagonal products
    14..17  AGGD of secondary-diagonal products

Scale 1 (full resolution) occupies indices 0..17, scale 2 (2x2 mean
pooled) indices 18..35.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.special import gamma as _gamma

from .errors import ArgumentError, DegenerateInputError
from .video_io import LumaFrame, VideoClip

NUM_FRAME_FEATURES = 36
CONTEXT_RADIUS = 2
NUM_CONTEXT_FEATURES = NUM_FRAME_FEATURES * (2 * CONTEXT_RADIUS + 1)

MSCN_WINDOW = 7
MSCN_SIGMA = 7.0 / 6.0
MSCN_C = 1.0

_MIN_FIT_SAMPLES = 100
_VAR_EPS = 1e-12

# shape-parameter lookup grids, precomputed once
_SHAPE_GRID = np.arange(0.2, 10.0 + 1e-9, 0.001)
_GGD_RATIO = (_gamma(1.0 / _SHAPE_GRID) * _gamma(3.0 / _SHAPE_GRID)) / (
    _gamma(2.0 / _SHAPE_GRID) ** 2
)
_AGGD_RATIO = (_gamma(2.0 / _SHAPE_GRID) ** 2) / (
    _gamma(1.0 / _SHAPE_GRID) * _gamma(3.0 / _SHAPE_GRID)
)

_ORIENTATION_NAMES = ("horizontal", "vertical", "diag_main", "diag_secondary")


def mscn_transform(frame: LumaFrame) -> np.ndarray:
    """Mean-subtracted contrast-normalized coefficients of a luma frame.

    Local mean and deviation use a normalized 7x7 Gaussian window
    (sigma 7/6) with edge replication at the borders; the stabilizer
    C = 1 applies on the 0..255 intensity scale.
    """
    img = frame.pixels.astype(np.float64)
    return _mscn_plane(img)


def _mscn_plane(img: np.ndarray) -> np.ndarray:
    mu = gaussian_filter(img, sigma=MSCN_SIGMA, mode="nearest", radius=MSCN_WINDOW // 2)
    mu_sq = mu * mu
    second = gaussian_filter(img * img, sigma=MSCN_SIGMA, mode="nearest", radius=MSCN_WINDOW // 2)
    sigma = np.sqrt(np.maximum(second - mu_sq, 0.0))
    return (img - mu) / (sigma + MSCN_C)


def fit_ggd(samples: np.ndarray) -> tuple[float, float]:
    """Moment-matching generalized Gaussian fit.

    Returns (alpha, sigma_sq) where alpha is the nearest entry of the
    [0.2, 10] step-0.001 grid solving
    Gamma(1/a)Gamma(3/a)/Gamma(2/a)^2 = E[x^2]/E[|x|]^2 and sigma_sq is
    the sample second moment.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < _MIN_FIT_SAMPLES:
        raise ArgumentError(f"GGD fit needs >= {_MIN_FIT_SAMPLES} samples, got {x.size}")
    if float(np.var(x)) < _VAR_EPS:
        raise DegenerateInputError("GGD fit on (near-)constant sample set")
    sigma_sq = float(np.mean(x * x))
    mean_abs = float(np.mean(np.abs(x)))
    rho = sigma_sq / (mean_abs * mean_abs)
    idx = int(np.argmin(np.abs(_GGD_RATIO - rho)))
    return float(_SHAPE_GRID[idx]), sigma_sq


def fit_aggd(samples: np.ndarray) -> tuple[float, float, float, float]:
    """Moment-matching asymmetric generalized Gaussian fit.

    Returns (nu, eta, sigma_l_sq, sigma_r_sq). The side variances come
    from the mean square of the negative and positive samples; nu is a
    grid lookup on the asymmetry-corrected moment ratio; the mean term
    is eta = (sigma_r - sigma_l) * Gamma(2/nu) / Gamma(1/nu).
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < _MIN_FIT_SAMPLES:
        raise ArgumentError(f"AGGD fit needs >= {_MIN_FIT_SAMPLES} samples, got {x.size}")
    neg = x[x < 0.0]
    pos = x[x > 0.0]
    if neg.size == 0 or pos.size == 0:
        raise DegenerateInputError("AGGD fit needs samples of both signs")
    sigma_l_sq = float(np.mean(neg * neg))
    sigma_r_sq = float(np.mean(pos * pos))
    sigma_l = np.sqrt(sigma_l_sq)
    sigma_r = np.sqrt(sigma_r_sq)
    gamma_hat = sigma_l / sigma_r
    r_hat = float(np.mean(np.abs(x))) ** 2 / float(np.mean(x * x))
    r_norm = r_hat * (gamma_hat**3 + 1.0) * (gamma_hat + 1.0) / (gamma_hat**2 + 1.0) ** 2
    idx = int(np.argmin((_AGGD_RATIO - r_norm) ** 2))
    nu = float(_SHAPE_GRID[idx])
    eta = (sigma_r - sigma_l) * float(_gamma(2.0 / nu) / _gamma(1.0 / nu))
    return nu, eta, sigma_l_sq, sigma_r_sq


def _orientation_products(m: np.ndarray) -> tuple[np.ndarray, ...]:
    return (
        m[:, :-1] * m[:, 1:],
        m[:-1, :] * m[1:, :],
        m[:-1, :-1] * m[1:, 1:],
        m[:-1, 1:] * m[1:, :-1],
    )


def _half_scale(img: np.ndarray) -> np.ndarray:
    # 2x2 mean pooling; odd trailing row/column dropped
    h, w = img.shape
    img = img[: h - h % 2, : w - w % 2]
    return img.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def frame_features36(frame: LumaFrame) -> np.ndarray:
    """36-dim spatial feature vector of one frame (see module docstring)."""
    h, w = frame.pixels.shape
    if h < 32 or w < 32:
        raise ArgumentError(f"feature extraction needs dimensions >= 32, got {w}x{h}")
    img = frame.pixels.astype(np.float64)
    feats = np.empty(NUM_FRAME_FEATURES, dtype=np.float64)
    pos = 0
    for scale in (1, 2):
        if scale == 2:
            img = _half_scale(img)
        coeffs = _mscn_plane(img)
        try:
            alpha, sigma_sq = fit_ggd(coeffs.ravel())
        except DegenerateInputError as exc:
            raise DegenerateInputError(
                f"scale {scale} MSCN fit degenerate (feature index {pos}): {exc}"
            ) from exc
        feats[pos], feats[pos + 1] = alpha, sigma_sq
        pos += 2
        for name, prod in zip(_ORIENTATION_NAMES, _orientation_products(coeffs)):
            try:
                feats[pos : pos + 4] = fit_aggd(prod.ravel())
            except DegenerateInputError as exc:
                raise DegenerateInputError(
                    f"scale {scale} {name} product fit degenerate "
                    f"(feature index {pos}): {exc}"
                ) from exc
            pos += 4
    return feats


def context_features180(clip: VideoClip, n: int) -> np.ndarray:
    """180-dim context vector: features of frames n-2..n+2, clamped.

    Out-of-range context indices replicate the boundary frame, so every
    frame of a nonempty clip has a full descriptor.
    """
    count = len(clip.frames)
    if not 0 <= n < count:
        raise ArgumentError(f"frame index {n} out of range for clip of {count} frames")
    cache: dict[int, np.ndarray] = {}
    blocks = []
    for offset in range(-CONTEXT_RADIUS, CONTEXT_RADIUS + 1):
        k = min(max(n + offset, 0), count - 1)
        if k not in cache:
            cache[k] = frame_features36(clip.frames[k])
        blocks.append(cache[k])
    return np.concatenate(blocks)


def clip_context_matrix(clip: VideoClip) -> np.ndarray:
    """Context descriptors for every frame, shape (N, 180).

    Equivalent to stacking context_features180 over all indices but
    computes each frame's 36-vector only once.
    """
    count = len(clip.frames)
    if count == 0:
        raise ArgumentError("empty clip has no feature matrix")
    per_frame = np.stack([frame_features36(f) for f in clip.frames])
    rows = np.empty((count, NUM_CONTEXT_FEATURES), dtype=np.float64)
    for n in range(count):
        for j, offset in enumerate(range(-CONTEXT_RADIUS, CONTEXT_RADIUS + 1)):
            k = min(max(n + offset, 0), count - 1)
            rows[n, j * NUM_FRAME_FEATURES : (j + 1) * NUM_FRAME_FEATURES] = per_frame[k]
    return rows
