"""Minimal reverse-mode tensor engine.

Exactly the layers the motion-compensation and quality-enhancement
networks need, on numpy: strided 2-D convolution, PReLU, tanh, channel
concatenation, bilinear warping, flow upscaling, elementwise add/scale,
MSE, and a bias-corrected Adam optimizer. Feature maps are NCHW.
Compute defaults to 32-bit; building the graph from 64-bit tensors
gives the high-precision verification mode used by the gradient
checker.

Graphs are recorded implicitly: every op attaches a closure that
accumulates into its inputs' gradients, and backward() replays them in
reverse topological order. A graph instance is single-owner; parameter
gradients persist across backward calls until explicitly zeroed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ShapeError

DEFAULT_DTYPE = np.float32


class Tensor:
    """Array node of a computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())


class Parameter(Tensor):
    """Named trainable leaf with a persistent gradient buffer."""

    __slots__ = ("name",)

    def __init__(self, name: str, data):
        super().__init__(np.asarray(data), requires_grad=True)
        if not name:
            raise ArgumentError("parameter name must be nonempty")
        self.name = name
        self.grad = np.zeros_like(self.data)


def tensor(data, dtype=DEFAULT_DTYPE, requires_grad: bool = False) -> Tensor:
    return Tensor(np.asarray(data, dtype=dtype), requires_grad=requires_grad)


def _result(data, parents, backward_fn) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _require_4d(t: Tensor, what: str) -> None:
    if t.data.ndim != 4:
        raise ShapeError(f"{what} must be 4-D NCHW, got shape {t.shape}")


def _same_pad(size: int, k: int, stride: int) -> tuple[int, int, int]:
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    lead = total // 2
    return out, lead, total - lead


def conv2d(x: Tensor, w: Parameter, b: Parameter | None, stride: int = 1, padding: str = "same") -> Tensor:
    """Strided cross-correlation with zero padding.

    "same" keeps ceil(dim/stride) spatial size, padding the extra cell
    on the bottom/right; "valid" applies no padding.
    """
    _require_4d(x, "conv input")
    if w.data.ndim != 4:
        raise ShapeError(f"conv weights must be 4-D, got shape {w.shape}")
    n, cin, h, wd = x.shape
    cout, wcin, kh, kw = w.shape
    if wcin != cin:
        raise ShapeError(f"weight expects {wcin} input channels, input has {cin}")
    if b is not None and b.data.shape != (cout,):
        raise ShapeError(f"bias shape {b.shape} does not match {cout} output channels")
    if stride < 1:
        raise ArgumentError(f"stride must be >= 1, got {stride}")
    if padding == "same":
        oh, pt, pb = _same_pad(h, kh, stride)
        ow, pl, pr = _same_pad(wd, kw, stride)
    elif padding == "valid":
        if h < kh or wd < kw:
            raise ShapeError(f"valid conv kernel {kh}x{kw} exceeds input {h}x{wd}")
        oh, ow = (h - kh) // stride + 1, (wd - kw) // stride + 1
        pt = pb = pl = pr = 0
    else:
        raise ArgumentError(f"padding must be 'same' or 'valid', got {padding!r}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride][:, :, :oh, :ow]  # view (n,cin,oh,ow,kh,kw)

    def make_col() -> np.ndarray:
        return np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5)).reshape(
            n * oh * ow, cin * kh * kw
        )

    w_flat = w.data.reshape(cout, -1)
    out_mat = make_col() @ w_flat.T
    out = out_mat.reshape(n, oh, ow, cout).transpose(0, 3, 1, 2)
    if b is not None:
        out = out + b.data[None, :, None, None]
    out = np.ascontiguousarray(out)

    def backward_fn(dout: np.ndarray) -> None:
        dout_mat = np.ascontiguousarray(dout.transpose(0, 2, 3, 1)).reshape(n * oh * ow, cout)
        if w.requires_grad:
            _accum(w, (dout_mat.T @ make_col()).reshape(w.data.shape))
        if b is not None and b.requires_grad:
            _accum(b, dout.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            dcol = (dout_mat @ w_flat).reshape(n, oh, ow, cin, kh, kw)
            dxp = np.zeros_like(xp)
            for u in range(kh):
                for v in range(kw):
                    dxp[:, :, u : u + (oh - 1) * stride + 1 : stride,
                        v : v + (ow - 1) * stride + 1 : stride] += dcol[:, :, :, :, u, v].transpose(0, 3, 1, 2)
            _accum(x, dxp[:, :, pt : pt + h, pl : pl + wd])

    parents = (x, w) if b is None else (x, w, b)
    return _result(out, parents, backward_fn)


def prelu(x: Tensor, slopes: Parameter) -> Tensor:
    """Parametric ReLU with one learnable slope per channel."""
    _require_4d(x, "prelu input")
    c = x.shape[1]
    if slopes.data.shape != (c,):
        raise ShapeError(f"slopes shape {slopes.shape} does not match {c} channels")
    positive = x.data > 0
    a = slopes.data[None, :, None, None]
    out = np.where(positive, x.data, a * x.data)

    def backward_fn(dout: np.ndarray) -> None:
        if x.requires_grad:
            _accum(x, np.where(positive, dout, a * dout))
        if slopes.requires_grad:
            _accum(slopes, np.where(positive, 0.0, x.data * dout).sum(axis=(0, 2, 3)))

    return _result(out, (x, slopes), backward_fn)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def backward_fn(dout: np.ndarray) -> None:
        _accum(x, (1.0 - out * out) * dout)

    return _result(out, (x,), backward_fn)


def concat_channels(*tensors: Tensor) -> Tensor:
    """Concatenate NCHW tensors along the channel axis."""
    if len(tensors) < 2:
        raise ArgumentError("concat_channels needs at least two tensors")
    for t in tensors:
        _require_4d(t, "concat input")
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.shape[0] != ref[0] or t.shape[2:] != ref[2:]:
            raise ShapeError(f"concat shapes incompatible: {ref} vs {t.shape}")
    out = np.concatenate([t.data for t in tensors], axis=1)
    widths = [t.shape[1] for t in tensors]
    edges = np.cumsum([0] + widths)

    def backward_fn(dout: np.ndarray) -> None:
        for t, lo, hi in zip(tensors, edges, edges[1:]):
            _accum(t, dout[:, lo:hi])

    return _result(out, tensors, backward_fn)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add shapes differ: {a.shape} vs {b.shape}")
    out = a.data + b.data

    def backward_fn(dout: np.ndarray) -> None:
        _accum(a, dout)
        _accum(b, dout)

    return _result(out, (a, b), backward_fn)


def scale(x: Tensor, factor: float) -> Tensor:
    out = x.data * x.data.dtype.type(factor)

    def backward_fn(dout: np.ndarray) -> None:
        _accum(x, dout * factor)

    return _result(out, (x,), backward_fn)


def bilinear_sample(x: Tensor, flow: Tensor) -> Tensor:
    """Backward warp: out(x,y) = input(x + M_x(x,y), y + M_y(x,y)).

    Flow channel 0 holds horizontal displacement, channel 1 vertical,
    in pixels; positive values read from the right/below. Source
    coordinates beyond the border clamp to it, and the flow gradient is
    zeroed where the clamp is active. Non-finite coordinates behave
    like far out-of-bounds reads, so a diverging flow still yields a
    finite warp that the training loop can flag.
    """
    _require_4d(x, "warp input")
    _require_4d(flow, "flow")
    n, c, h, w = x.shape
    if flow.shape != (n, 2, h, w):
        raise ShapeError(f"flow shape {flow.shape} does not match input {x.shape}")
    if h < 2 or w < 2:
        raise ShapeError("bilinear sampling needs spatial dims >= 2")

    gx = np.arange(w, dtype=x.data.dtype)[None, None, :]
    gy = np.arange(h, dtype=x.data.dtype)[None, :, None]
    sx = gx + flow.data[:, 0]
    sy = gy + flow.data[:, 1]
    sx = np.where(np.isnan(sx), -1.0, sx)
    sy = np.where(np.isnan(sy), -1.0, sy)
    in_x = (sx >= 0.0) & (sx <= w - 1.0)
    in_y = (sy >= 0.0) & (sy <= h - 1.0)
    cx = np.clip(sx, 0.0, w - 1.0)
    cy = np.clip(sy, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(cx).astype(np.int64), w - 2)
    y0 = np.minimum(np.floor(cy).astype(np.int64), h - 2)
    wx = (cx - x0)[:, None]
    wy = (cy - y0)[:, None]
    nn = np.arange(n)[:, None, None, None]
    cc = np.arange(c)[None, :, None, None]
    y0b, x0b = y0[:, None], x0[:, None]
    i00 = x.data[nn, cc, y0b, x0b]
    i01 = x.data[nn, cc, y0b, x0b + 1]
    i10 = x.data[nn, cc, y0b + 1, x0b]
    i11 = x.data[nn, cc, y0b + 1, x0b + 1]
    w00 = (1.0 - wy) * (1.0 - wx)
    w01 = (1.0 - wy) * wx
    w10 = wy * (1.0 - wx)
    w11 = wy * wx
    out = w00 * i00 + w01 * i01 + w10 * i10 + w11 * i11

    def backward_fn(dout: np.ndarray) -> None:
        if x.requires_grad:
            size = n * c * h * w
            grad_flat = np.zeros(size, dtype=np.float64)
            base = (np.broadcast_to(nn * c + cc, (n, c, h, w))).astype(np.int64)
            for wgt, yy, xx in (
                (w00, y0b, x0b),
                (w01, y0b, x0b + 1),
                (w10, y0b + 1, x0b),
                (w11, y0b + 1, x0b + 1),
            ):
                idx = (base * h + np.broadcast_to(yy, (n, c, h, w))) * w + np.broadcast_to(
                    xx, (n, c, h, w)
                )
                grad_flat += np.bincount(
                    idx.ravel(), weights=(wgt * dout).ravel().astype(np.float64), minlength=size
                )
            _accum(x, grad_flat.reshape(n, c, h, w).astype(x.data.dtype))
        if flow.requires_grad:
            dsx = (dout * ((1.0 - wy) * (i01 - i00) + wy * (i11 - i10))).sum(axis=1)
            dsy = (dout * ((1.0 - wx) * (i10 - i00) + wx * (i11 - i01))).sum(axis=1)
            dflow = np.stack([dsx * in_x, dsy * in_y], axis=1).astype(flow.data.dtype)
            _accum(flow, dflow)

    return _result(out, (x, flow), backward_fn)


def _interp_matrix(n_out: int, n_in: int, factor: int, dtype) -> np.ndarray:
    src = np.clip((np.arange(n_out) + 0.5) / factor - 0.5, 0.0, n_in - 1.0)
    i0 = np.minimum(np.floor(src).astype(np.int64), max(n_in - 2, 0))
    frac = src - i0
    m = np.zeros((n_out, n_in), dtype=dtype)
    rows = np.arange(n_out)
    np.add.at(m, (rows, i0), 1.0 - frac)
    np.add.at(m, (rows, np.minimum(i0 + 1, n_in - 1)), frac)
    return m


def upscale_flow(flow: Tensor, factor: int) -> Tensor:
    """Bilinear spatial upsampling of a flow map, values scaled by factor."""
    _require_4d(flow, "flow")
    if factor not in (2, 4):
        raise ArgumentError(f"upscale factor must be 2 or 4, got {factor}")
    n, c, h, w = flow.shape
    ry = _interp_matrix(h * factor, h, factor, flow.data.dtype)
    rx = _interp_matrix(w * factor, w, factor, flow.data.dtype)
    out = factor * (ry @ flow.data @ rx.T)

    def backward_fn(dout: np.ndarray) -> None:
        _accum(flow, factor * (ry.T @ dout @ rx))

    return _result(out, (flow,), backward_fn)


def mse(a: Tensor, b: Tensor) -> Tensor:
    """Mean squared error, accumulated in 64-bit; scalar output."""
    if a.shape != b.shape:
        raise ShapeError(f"mse shapes differ: {a.shape} vs {b.shape}")
    diff = a.data.astype(np.float64) - b.data.astype(np.float64)
    out = np.float64(np.mean(diff * diff))

    def backward_fn(dout: np.ndarray) -> None:
        g = (2.0 / diff.size) * diff * dout
        _accum(a, g.astype(a.data.dtype))
        _accum(b, (-g).astype(b.data.dtype))

    return _result(out, (a, b), backward_fn)


def backward(loss: Tensor) -> None:
    """Reverse-mode sweep from a scalar loss.

    Intermediate gradients are rebuilt per call; Parameter gradients
    accumulate until zero_grads.
    """
    if loss.data.size != 1:
        raise ArgumentError(f"backward needs a scalar loss, got shape {loss.shape}")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    for node in topo:
        if not isinstance(node, Parameter):
            node.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grads(params) -> None:
    for p in params:
        p.grad = np.zeros_like(p.data)


@dataclass
class AdamState:
    """Optimizer state; build with for_params before stepping."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params, lr: float = 1e-4, beta1: float = 0.9,
                   beta2: float = 0.999, epsilon: float = 1e-8) -> "AdamState":
        state = cls(lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon)
        for p in params:
            if p.name in state.m:
                raise ArgumentError(f"duplicate parameter name {p.name!r}")
            state.m[p.name] = np.zeros_like(p.data)
            state.v[p.name] = np.zeros_like(p.data)
        return state


def adam_step(params, state: AdamState) -> None:
    """One bias-corrected Adam update; gradients are left in place."""
    for p in params:
        if p.name not in state.m:
            raise ArgumentError(f"Adam state not initialized for parameter {p.name!r}")
    state.t += 1
    correct1 = 1.0 - state.beta1**state.t
    correct2 = 1.0 - state.beta2**state.t
    for p in params:
        g = p.grad
        m = state.m[p.name]
        v = state.v[p.name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / correct1
        v_hat = v / correct2
        p.data -= (state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(p.data.dtype)


def he_normal(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int,
              init_scale: float = 1.0, dtype=DEFAULT_DTYPE) -> np.ndarray:
    """He-style normal init: std = init_scale * sqrt(2 / fan_in)."""
    if fan_in < 1:
        raise ArgumentError(f"fan_in must be >= 1, got {fan_in}")
    std = init_scale * math.sqrt(2.0 / fan_in)
    return (rng.standard_normal(shape) * std).astype(dtype)


def finite_difference_check(loss_fn, tensors, h: float = 1e-3,
                            max_coords: int = 8, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference grads.

    loss_fn rebuilds the forward graph from the given tensors (leaves
    with requires_grad set) and returns the scalar loss. The analytic
    pass runs in the tensors' native dtype; the numeric side evaluates
    with the leaf data upcast to 64-bit so finite differences are
    accumulated without 32-bit rounding noise. Up to max_coords
    coordinates per tensor are probed.
    """
    for t in tensors:
        if not t.requires_grad:
            raise ArgumentError("finite_difference_check needs requires_grad leaves")
        t.grad = np.zeros_like(t.data)
    loss = loss_fn()
    backward(loss)
    analytic = [t.grad.copy() for t in tensors]

    originals = [t.data for t in tensors]
    for t in tensors:
        t.data = t.data.astype(np.float64)
    rng = np.random.default_rng(seed)
    worst = 0.0
    try:
        for t, grad in zip(tensors, analytic):
            flat = t.data.reshape(-1)
            count = min(max_coords, flat.size)
            coords = rng.choice(flat.size, size=count, replace=False)
            for idx in coords:
                original = flat[idx]
                flat[idx] = original + h
                f_plus = float(loss_fn().data)
                flat[idx] = original - h
                f_minus = float(loss_fn().data)
                flat[idx] = original
                numeric = (f_plus - f_minus) / (2.0 * h)
                a = float(grad.reshape(-1)[idx])
                err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
                worst = max(worst, err)
    finally:
        for t, d in zip(tensors, originals):
            t.data = d
    return worst
