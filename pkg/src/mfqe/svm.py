"""Soft-margin RBF SVM trained by sequential minimal optimization.

Desk-scale binary classifier with Platt-scaled probability outputs.
Training standardizes features, solves the dual problem with a
max-violating-pair working-set rule, then calibrates a sigmoid on
out-of-fold decision values. Models are immutable.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ShapeError

_TAU = 1e-12
_MAX_CACHED_ROWS = 4096
_PLATT_MAX_ITER = 100
_PLATT_MIN_STEP = 1e-10
_PLATT_GRAD_EPS = 1e-5


@dataclass(frozen=True)
class TrainConfig:
    """SMO and calibration settings.

    gamma None means 1 / (dims * variance of the standardized matrix).
    One pass is a budget of len(dataset) pair updates; training stops
    early once the largest KKT violation drops below kkt_tol.
    """

    c: float = 1.0
    gamma: float | None = None
    kkt_tol: float = 1e-3
    max_passes: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.c <= 0:
            raise ArgumentError(f"box constraint must be positive, got {self.c}")
        if self.gamma is not None and self.gamma <= 0:
            raise ArgumentError(f"gamma must be positive, got {self.gamma}")
        if self.kkt_tol <= 0:
            raise ArgumentError(f"kkt_tol must be positive, got {self.kkt_tol}")
        if self.max_passes < 1:
            raise ArgumentError(f"max_passes must be >= 1, got {self.max_passes}")


@dataclass(frozen=True)
class SvmModel:
    """Trained classifier: standardizer, support set, and calibration."""

    support_vectors: np.ndarray  # (n_sv, d), standardized
    dual_coefs: np.ndarray  # (n_sv,), alpha_i * y_i
    bias: float
    gamma: float
    platt_a: float
    platt_b: float
    mean: np.ndarray  # (d,)
    std: np.ndarray  # (d,), zero-variance dims stored as 1
    converged: bool
    objective_curve: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))

    @property
    def dims(self) -> int:
        return self.support_vectors.shape[1]


class _RowCache:
    """Bounded map from training index to its RBF kernel row."""

    def __init__(self, x: np.ndarray, gamma: float, capacity: int = _MAX_CACHED_ROWS):
        self._x = x
        self._sq = np.einsum("ij,ij->i", x, x)
        self._gamma = gamma
        self._cap = capacity
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()

    def row(self, i: int) -> np.ndarray:
        hit = self._rows.get(i)
        if hit is not None:
            self._rows.move_to_end(i)
            return hit
        d2 = self._sq + self._sq[i] - 2.0 * (self._x @ self._x[i])
        np.maximum(d2, 0.0, out=d2)
        row = np.exp(-self._gamma * d2)
        if len(self._rows) >= self._cap:
            self._rows.popitem(last=False)
        self._rows[i] = row
        return row


def _standardize_fit(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return mean, std


def _smo_solve(
    x: np.ndarray, y: np.ndarray, cfg: TrainConfig, gamma: float
) -> tuple[np.ndarray, float, bool, np.ndarray]:
    """Solve min 1/2 a'Qa - e'a s.t. y'a = 0, 0 <= a <= C.

    Returns (alpha, rho, converged, maximization objective trajectory).
    """
    n = x.shape[0]
    c = cfg.c
    cache = _RowCache(x, gamma)
    alpha = np.zeros(n)
    grad = np.full(n, -1.0)  # G = Q alpha - e
    pos = y > 0
    max_iter = cfg.max_passes * n
    trajectory = [0.0]
    converged = False

    for _ in range(max_iter):
        neg_yg = -y * grad
        up = (pos & (alpha < c)) | (~pos & (alpha > 0))
        low = (~pos & (alpha < c)) | (pos & (alpha > 0))
        if not up.any() or not low.any():
            converged = True
            break
        up_vals = np.where(up, neg_yg, -np.inf)
        low_vals = np.where(low, neg_yg, np.inf)
        i = int(np.argmax(up_vals))
        j = int(np.argmin(low_vals))
        if up_vals[i] - low_vals[j] <= cfg.kkt_tol:
            converged = True
            break

        ki = cache.row(i)
        kj = cache.row(j)
        quad = ki[i] + kj[j] - 2.0 * ki[j]
        if quad <= 0:
            quad = _TAU
        old_i, old_j = alpha[i], alpha[j]
        yi, yj = y[i], y[j]

        if yi != yj:
            delta = (-grad[i] - grad[j]) / quad
            diff = old_i - old_j
            ai, aj = old_i + delta, old_j + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            else:
                if ai < 0:
                    ai, aj = 0.0, -diff
            if diff > 0:
                if ai > c:
                    ai, aj = c, c - diff
            else:
                if aj > c:
                    aj, ai = c, c + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = old_i + old_j
            ai, aj = old_i - delta, old_j + delta
            if total > c:
                if ai > c:
                    ai, aj = c, total - c
            else:
                if aj < 0:
                    aj, ai = 0.0, total
            if total > c:
                if aj > c:
                    aj, ai = c, total - c
            else:
                if ai < 0:
                    ai, aj = 0.0, total

        alpha[i], alpha[j] = ai, aj
        di, dj = ai - old_i, aj - old_j
        grad += (yi * di * y) * ki + (yj * dj * y) * kj
        # maximization objective: sum(a) - 1/2 a'Qa = -1/2 sum a_t (G_t - 1)
        trajectory.append(float(-0.5 * np.dot(alpha, grad - 1.0)))

    # bias from KKT: average y*G over free vectors, else midpoint of bounds
    yg = y * grad
    free = (alpha > 0) & (alpha < c)
    if free.any():
        rho = float(yg[free].mean())
    else:
        upper = np.where((pos & (alpha <= 0)) | (~pos & (alpha >= c)), yg, np.inf)
        lower = np.where((pos & (alpha >= c)) | (~pos & (alpha <= 0)), yg, -np.inf)
        rho = float((upper.min() + lower.max()) / 2.0)
    return alpha, rho, converged, np.asarray(trajectory)


def _raw_decision(x_std: np.ndarray, sv: np.ndarray, coef: np.ndarray, gamma: float, bias: float) -> np.ndarray:
    d2 = (
        np.einsum("ij,ij->i", x_std, x_std)[:, None]
        + np.einsum("ij,ij->i", sv, sv)[None, :]
        - 2.0 * (x_std @ sv.T)
    )
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2) @ coef + bias


def _fit_platt(decisions: np.ndarray, labels01: np.ndarray) -> tuple[float, float]:
    """Damped-Newton sigmoid fit: p = 1 / (1 + exp(a*f + b)).

    Falls back to a prior-based slope if the fitted a is not negative,
    keeping predict_prob strictly increasing in the decision value.
    """
    f = np.asarray(decisions, dtype=np.float64)
    prior1 = int(np.sum(labels01 == 1))
    prior0 = int(np.sum(labels01 == 0))
    hi = (prior1 + 1.0) / (prior1 + 2.0)
    lo = 1.0 / (prior0 + 2.0)
    t = np.where(labels01 == 1, hi, lo)
    b0 = math.log((prior0 + 1.0) / (prior1 + 1.0))
    a, b = 0.0, b0

    def objective(av: float, bv: float) -> float:
        z = av * f + bv
        return float(np.sum(np.where(z >= 0, t * z + np.log1p(np.exp(-z)), (t - 1.0) * z + np.log1p(np.exp(z)))))

    fval = objective(a, b)
    for _ in range(_PLATT_MAX_ITER):
        z = a * f + b
        p = np.where(z >= 0, np.exp(-z) / (1.0 + np.exp(-z)), 1.0 / (1.0 + np.exp(z)))
        w = p * (1.0 - p)
        h11 = float(np.dot(f * f, w)) + _TAU
        h22 = float(np.sum(w)) + _TAU
        h21 = float(np.dot(f, w))
        d = t - p
        g1 = float(np.dot(f, d))
        g2 = float(np.sum(d))
        if abs(g1) < _PLATT_GRAD_EPS and abs(g2) < _PLATT_GRAD_EPS:
            break
        det = h11 * h22 - h21 * h21
        da = -(h22 * g1 - h21 * g2) / det
        db = -(h11 * g2 - h21 * g1) / det
        gd = g1 * da + g2 * db
        step = 1.0
        while step >= _PLATT_MIN_STEP:
            na, nb = a + step * da, b + step * db
            nf = objective(na, nb)
            if nf < fval + 1e-4 * step * gd:
                a, b, fval = na, nb, nf
                break
            step /= 2.0
        else:
            break
    if a >= 0.0:
        a, b = -1.0, b0
    return a, b


def _stratified_folds(y: np.ndarray, k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    fold = np.empty(len(y), dtype=np.int64)
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        fold[idx] = np.arange(len(idx)) % k
    return fold


def train(features: np.ndarray, labels: np.ndarray, cfg: TrainConfig = TrainConfig()) -> SvmModel:
    """Fit the classifier on rows of `features` with {0,1} `labels`."""
    x = np.asarray(features, dtype=np.float64)
    y01 = np.asarray(labels)
    if x.ndim != 2:
        raise ShapeError(f"features must be 2-D, got shape {x.shape}")
    if y01.shape != (x.shape[0],):
        raise ShapeError(f"labels shape {y01.shape} does not match {x.shape[0]} rows")
    if not np.isin(y01, (0, 1)).all():
        raise ArgumentError("labels must be 0 or 1")
    n_pos = int(np.sum(y01 == 1))
    n_neg = int(np.sum(y01 == 0))
    if n_pos < 2 or n_neg < 2:
        raise ArgumentError(f"need >= 2 samples per class, got {n_pos} positive / {n_neg} negative")

    mean, std = _standardize_fit(x)
    xs = (x - mean) / std
    gamma = cfg.gamma
    if gamma is None:
        overall_var = float(xs.var())
        gamma = 1.0 / (xs.shape[1] * overall_var) if overall_var > 1e-12 else 1.0 / xs.shape[1]

    y = np.where(y01 == 1, 1.0, -1.0)
    alpha, rho, converged, trajectory = _smo_solve(xs, y, cfg, gamma)
    bias = -rho

    keep = alpha > 1e-12
    if not (keep & (y > 0)).any() or not (keep & (y < 0)).any():
        # pathological fit: retain the full set so both classes contribute
        keep = np.ones(len(alpha), dtype=bool)
    sv = xs[keep]
    coef = (alpha * y)[keep]

    # out-of-fold decision values for calibration
    oof = np.empty(len(y01))
    folds = _stratified_folds(y01, 3, cfg.seed)
    usable = all(
        np.sum((folds != k) & (y01 == 1)) >= 2 and np.sum((folds != k) & (y01 == 0)) >= 2
        for k in range(3)
    )
    if usable:
        for k in range(3):
            tr = folds != k
            a_k, rho_k, _, _ = _smo_solve(xs[tr], y[tr], cfg, gamma)
            keep_k = a_k > 1e-12
            if not keep_k.any():
                keep_k = np.ones(len(a_k), dtype=bool)
            oof[~tr] = _raw_decision(
                xs[~tr], xs[tr][keep_k], (a_k * y[tr])[keep_k], gamma, -rho_k
            )
    else:
        oof = _raw_decision(xs, sv, coef, gamma, bias)
    platt_a, platt_b = _fit_platt(oof, y01)

    return SvmModel(
        support_vectors=sv,
        dual_coefs=coef,
        bias=bias,
        gamma=gamma,
        platt_a=platt_a,
        platt_b=platt_b,
        mean=mean,
        std=std,
        converged=converged,
        objective_curve=trajectory,
    )


def _check_input(model: SvmModel, x: np.ndarray) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != model.dims:
        raise ShapeError(f"expected {model.dims}-dim input, got shape {np.asarray(x).shape}")
    return arr


def decision_values(model: SvmModel, x: np.ndarray) -> np.ndarray:
    """Uncalibrated decision values for a batch of rows."""
    arr = _check_input(model, x)
    xs = (arr - model.mean) / model.std
    return _raw_decision(xs, model.support_vectors, model.dual_coefs, model.gamma, model.bias)


def decision_value(model: SvmModel, x: np.ndarray) -> float:
    """Uncalibrated decision value of a single feature vector."""
    if np.asarray(x).ndim != 1:
        raise ShapeError("decision_value expects a single feature vector")
    return float(decision_values(model, x)[0])


def predict_probs(model: SvmModel, x: np.ndarray) -> np.ndarray:
    """Calibrated probabilities of class 1 for a batch of rows."""
    z = model.platt_a * decision_values(model, x) + model.platt_b
    return np.where(z >= 0, np.exp(-z) / (1.0 + np.exp(-z)), 1.0 / (1.0 + np.exp(z)))


def predict_prob(model: SvmModel, x: np.ndarray) -> float:
    """Calibrated probability of class 1 for one feature vector."""
    if np.asarray(x).ndim != 1:
        raise ShapeError("predict_prob expects a single feature vector")
    return float(predict_probs(model, x)[0])
