"""Motion-compensation subnetwork.

Estimates a dense motion field between a target frame and a reference
keyframe in three residual stages: a coarse quarter-resolution pass, a
half-resolution refinement, and a full-resolution pixel-wise pass. Each
stage emits a tanh-bounded correction whose full-resolution magnitude
is capped at max_displacement/4, /2, and /1 respectively, so the
composed field never exceeds 1.75x max_displacement. The reference is
warped by the final field with differentiable bilinear sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .engine import Parameter, Tensor
from .errors import ArgumentError, ShapeError

_BASE_CHANNELS = 24
_FLOW_INIT_SCALE = 0.01
_PRELU_INIT = 0.25


@dataclass(frozen=True)
class McConfig:
    """Flow bound, channel reduction for toy runs, and loss shape."""

    max_displacement: float = 8.0
    reduction: int = 1
    strict_supervision: bool = False  # drop the 0.1-weighted coarse-stage terms

    def __post_init__(self):
        if self.max_displacement <= 0:
            raise ArgumentError(f"max_displacement must be positive, got {self.max_displacement}")
        if self.reduction < 1:
            raise ArgumentError(f"reduction must be >= 1, got {self.reduction}")

    @property
    def channels(self) -> int:
        return max(2, _BASE_CHANNELS // self.reduction)


@dataclass(frozen=True)
class MotionField:
    """Dense motion map in pixel units.

    flow has shape (batch, 2, H, W); channel 0 is the horizontal
    component, channel 1 the vertical. Each estimation stage is
    tanh-bounded, so the composed field never exceeds 1.75x the
    configured max_displacement.
    """

    flow: Tensor

    @property
    def shape(self) -> tuple[int, ...]:
        return self.flow.shape


@dataclass(frozen=True)
class McOutputs:
    """Per-stage motion fields (full resolution) and the warped reference."""

    m4: MotionField
    m2: MotionField
    m: MotionField
    warped_pqf: Tensor


# layer name, kernel, stride, prelu (False = tanh flow head)
_COARSE_LAYERS = (
    ("coarse1", 5, 2, True),
    ("coarse2", 3, 1, True),
    ("coarse3", 5, 2, True),
    ("coarse4", 3, 1, True),
    ("coarse_flow", 3, 1, False),
)
_FINE_LAYERS = (
    ("fine1", 5, 2, True),
    ("fine2", 3, 1, True),
    ("fine3", 3, 1, True),
    ("fine_flow", 3, 1, False),
)
_PIXEL_LAYERS = (
    ("px1", 3, 1, True),
    ("px2", 3, 1, True),
    ("px3", 3, 1, True),
    ("px4", 3, 1, True),
    ("px_flow", 3, 1, False),
)
_PATH_INPUT_CHANNELS = {"coarse": 2, "fine": 5, "pixel": 5}


def mc_params(cfg: McConfig, rng: np.random.Generator, prefix: str = "mc.") -> dict[str, Parameter]:
    """He-initialized parameter set; flow heads start near zero flow."""
    params: dict[str, Parameter] = {}

    def add_conv(name: str, in_ch: int, out_ch: int, k: int, flow_head: bool) -> None:
        fan_in = in_ch * k * k
        scale = _FLOW_INIT_SCALE if flow_head else 1.0
        params[f"{prefix}{name}.w"] = Parameter(
            f"{prefix}{name}.w", engine.he_normal(rng, (out_ch, in_ch, k, k), fan_in, scale)
        )
        params[f"{prefix}{name}.b"] = Parameter(
            f"{prefix}{name}.b", np.zeros(out_ch, dtype=engine.DEFAULT_DTYPE)
        )
        if not flow_head:
            params[f"{prefix}{name}.a"] = Parameter(
                f"{prefix}{name}.a", np.full(out_ch, _PRELU_INIT, dtype=engine.DEFAULT_DTYPE)
            )

    for path, layers in (("coarse", _COARSE_LAYERS), ("fine", _FINE_LAYERS), ("pixel", _PIXEL_LAYERS)):
        in_ch = _PATH_INPUT_CHANNELS[path]
        for name, k, _stride, has_prelu in layers:
            out_ch = cfg.channels if has_prelu else 2
            add_conv(name, in_ch, out_ch, k, flow_head=not has_prelu)
            in_ch = out_ch
    return params


def _run_path(x: Tensor, layers, params: dict[str, Parameter], prefix: str) -> Tensor:
    for name, _k, stride, has_prelu in layers:
        x = engine.conv2d(x, params[f"{prefix}{name}.w"], params[f"{prefix}{name}.b"],
                          stride=stride, padding="same")
        if has_prelu:
            x = engine.prelu(x, params[f"{prefix}{name}.a"])
        else:
            x = engine.tanh(x)
    return x


def _check_frame_pair(f_np: Tensor, f_p: Tensor) -> None:
    for t, label in ((f_np, "target frame"), (f_p, "reference frame")):
        if t.data.ndim != 4 or t.shape[1] != 1:
            raise ShapeError(f"{label} must be (batch,1,H,W), got {t.shape}")
        lo, hi = float(t.data.min()), float(t.data.max())
        if lo < -1e-3 or hi > 1.0 + 1e-3:
            raise ArgumentError(f"{label} values must be normalized to [0,1], got [{lo}, {hi}]")
    if f_np.shape != f_p.shape:
        raise ShapeError(f"frame shapes differ: {f_np.shape} vs {f_p.shape}")
    _, _, h, w = f_np.shape
    if h % 4 or w % 4:
        raise ShapeError(f"frame dims must be divisible by 4, got {h}x{w}")


def mc_forward(f_np: Tensor, f_p: Tensor, params: dict[str, Parameter],
               cfg: McConfig = McConfig(), prefix: str = "mc.") -> McOutputs:
    """Estimate motion from f_p to f_np and warp f_p by it."""
    _check_frame_pair(f_np, f_p)
    maxd = cfg.max_displacement

    coarse_in = engine.concat_channels(f_np, f_p)
    coarse_raw = _run_path(coarse_in, _COARSE_LAYERS, params, prefix)
    m4 = engine.upscale_flow(engine.scale(coarse_raw, maxd / 16.0), 4)
    w4 = engine.bilinear_sample(f_p, m4)

    fine_in = engine.concat_channels(f_np, f_p, m4, w4)
    fine_raw = _run_path(fine_in, _FINE_LAYERS, params, prefix)
    delta2 = engine.upscale_flow(engine.scale(fine_raw, maxd / 4.0), 2)
    m2 = engine.add(m4, delta2)
    w2 = engine.bilinear_sample(f_p, m2)

    pixel_in = engine.concat_channels(f_p, f_np, m2, w2)
    pixel_raw = _run_path(pixel_in, _PIXEL_LAYERS, params, prefix)
    delta_px = engine.scale(pixel_raw, maxd)
    m = engine.add(m2, delta_px)
    warped = engine.bilinear_sample(f_p, m)
    return McOutputs(m4=MotionField(m4), m2=MotionField(m2), m=MotionField(m),
                     warped_pqf=warped)


def mc_supervised_loss(f_np: Tensor, f_p: Tensor, raw_np: Tensor, raw_p: Tensor,
                       params: dict[str, Parameter], cfg: McConfig = McConfig(),
                       prefix: str = "mc.") -> tuple[Tensor, McOutputs]:
    """Warp-alignment loss on raw frames, fields estimated from compressed.

    Main term compares the raw reference warped by the final field
    against the raw target; unless strict_supervision is set, the
    coarse and half-resolution fields contribute 0.1-weighted copies of
    the same comparison to keep the early stages grounded.
    """
    if raw_np is None or raw_p is None:
        raise ArgumentError("supervised MC loss needs raw target and reference frames")
    if raw_np.shape != f_np.shape or raw_p.shape != f_p.shape:
        raise ShapeError("raw frame shapes must match compressed frame shapes")
    outputs = mc_forward(f_np, f_p, params, cfg, prefix)
    loss = engine.mse(engine.bilinear_sample(raw_p, outputs.m.flow), raw_np)
    if not cfg.strict_supervision:
        aux4 = engine.mse(engine.bilinear_sample(raw_p, outputs.m4.flow), raw_np)
        aux2 = engine.mse(engine.bilinear_sample(raw_p, outputs.m2.flow), raw_np)
        loss = engine.add(loss, engine.scale(engine.add(aux4, aux2), 0.1))
    return loss, outputs


def flow_bound(cfg: McConfig) -> float:
    """Magnitude cap of the composed field: max_displacement * 1.75."""
    return cfg.max_displacement * (1.0 + 0.5 + 0.25)
