"""Quality-enhancement subnetwork.

A nine-layer spatio-temporal CNN. Three parallel 9x9 stems encode the
two motion-compensated keyframes and the target frame; pairwise fusion
layers merge each keyframe stem with the target stem, and the merged
branches are squeezed through 3x3, 1x1, and 5x5 stages into a single
residual plane that is added back onto the target frame.

A single-frame variant reuses the same topology with the target frame
feeding all three stems, under an independently trained parameter set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .engine import Parameter, Tensor
from .errors import ArgumentError, ShapeError

_PRELU_INIT = 0.25
# The residual head starts small so a fresh network is a near-identity
# map; training then grows the correction instead of unlearning noise.
_RESIDUAL_INIT_SCALE = 0.1

# layer name, kernel size, base output channels (None = linear residual head)
_LAYERS = (
    ("conv1", 9, 128),
    ("conv2", 9, 128),
    ("conv3", 9, 128),
    ("conv4", 7, 64),
    ("conv5", 7, 64),
    ("conv6", 3, 64),
    ("conv7", 3, 64),
    ("conv8", 1, 32),
    ("conv9", 5, None),
)


@dataclass(frozen=True)
class QeConfig:
    """Channel reduction for toy runs and output clamping."""

    reduction: int = 1
    clamp_output: bool = False

    def __post_init__(self):
        if self.reduction < 1:
            raise ArgumentError(f"reduction must be >= 1, got {self.reduction}")

    def width(self, base: int) -> int:
        return max(1, base // self.reduction)


@dataclass(frozen=True)
class QeOutput:
    """Predicted residual plane and the enhanced frame."""

    residual: Tensor
    enhanced: Tensor


def _layer_channels(cfg: QeConfig) -> dict[str, tuple[int, int]]:
    """(in_ch, out_ch) per layer under the configured reduction."""
    w = {name: (1 if base is None else cfg.width(base)) for name, _k, base in _LAYERS}
    return {
        "conv1": (1, w["conv1"]),
        "conv2": (1, w["conv2"]),
        "conv3": (1, w["conv3"]),
        "conv4": (w["conv1"] + w["conv2"], w["conv4"]),
        "conv5": (w["conv2"] + w["conv3"], w["conv5"]),
        "conv6": (w["conv4"], w["conv6"]),
        "conv7": (w["conv5"], w["conv7"]),
        "conv8": (w["conv6"] + w["conv7"], w["conv8"]),
        "conv9": (w["conv8"], 1),
    }


def qe_params(cfg: QeConfig, rng: np.random.Generator, prefix: str = "qe.") -> dict[str, Parameter]:
    """He-initialized parameter set for one enhancement network."""
    channels = _layer_channels(cfg)
    params: dict[str, Parameter] = {}
    for name, k, base in _LAYERS:
        in_ch, out_ch = channels[name]
        scale = _RESIDUAL_INIT_SCALE if base is None else 1.0
        params[f"{prefix}{name}.w"] = Parameter(
            f"{prefix}{name}.w", engine.he_normal(rng, (out_ch, in_ch, k, k), in_ch * k * k, scale)
        )
        params[f"{prefix}{name}.b"] = Parameter(
            f"{prefix}{name}.b", np.zeros(out_ch, dtype=engine.DEFAULT_DTYPE)
        )
        if base is not None:
            params[f"{prefix}{name}.a"] = Parameter(
                f"{prefix}{name}.a", np.full(out_ch, _PRELU_INIT, dtype=engine.DEFAULT_DTYPE)
            )
    return params


def _conv_prelu(x: Tensor, params: dict[str, Parameter], prefix: str, name: str) -> Tensor:
    y = engine.conv2d(x, params[f"{prefix}{name}.w"], params[f"{prefix}{name}.b"])
    return engine.prelu(y, params[f"{prefix}{name}.a"])


def _clamp01(x: Tensor) -> Tensor:
    """Clamp to [0,1] with pass-through gradient strictly inside the box."""
    clipped = np.clip(x.data, 0.0, 1.0)
    inside = (x.data > 0.0) & (x.data < 1.0)

    def backward_fn(out):
        engine._accum(x, out.grad * inside)

    return engine._result(clipped, (x,), backward_fn)


def _check_frame(t: Tensor, label: str, ref_shape=None) -> None:
    if t.data.ndim != 4 or t.shape[1] != 1:
        raise ShapeError(f"{label} must be (batch,1,H,W), got {t.shape}")
    if ref_shape is not None and t.shape != ref_shape:
        raise ShapeError(f"{label} shape {t.shape} differs from target {ref_shape}")


def qe_forward(f_p1w: Tensor, f_np: Tensor, f_p2w: Tensor, params: dict[str, Parameter],
               cfg: QeConfig = QeConfig(), prefix: str = "qe.") -> QeOutput:
    """Predict a residual for f_np given its two warped keyframes."""
    _check_frame(f_np, "target frame")
    _check_frame(f_p1w, "warped preceding keyframe", f_np.shape)
    _check_frame(f_p2w, "warped following keyframe", f_np.shape)

    c1 = _conv_prelu(f_p1w, params, prefix, "conv1")
    c2 = _conv_prelu(f_np, params, prefix, "conv2")
    c3 = _conv_prelu(f_p2w, params, prefix, "conv3")
    c4 = _conv_prelu(engine.concat_channels(c1, c2), params, prefix, "conv4")
    c5 = _conv_prelu(engine.concat_channels(c2, c3), params, prefix, "conv5")
    c6 = _conv_prelu(c4, params, prefix, "conv6")
    c7 = _conv_prelu(c5, params, prefix, "conv7")
    c8 = _conv_prelu(engine.concat_channels(c6, c7), params, prefix, "conv8")
    residual = engine.conv2d(c8, params[f"{prefix}conv9.w"], params[f"{prefix}conv9.b"])
    enhanced = engine.add(f_np, residual)
    if cfg.clamp_output:
        enhanced = _clamp01(enhanced)
    return QeOutput(residual=residual, enhanced=enhanced)


def qe_single_frame(f: Tensor, params: dict[str, Parameter],
                    cfg: QeConfig = QeConfig(), prefix: str = "qe_sf.") -> QeOutput:
    """Enhance a frame without keyframe support: f feeds all three stems."""
    return qe_forward(f, f, f, params, cfg, prefix)
