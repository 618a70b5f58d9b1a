"""Dataset assembly, joint training, clip enhancement, and evaluation.

Training samples pair each low-quality frame with its two reference
keyframes as co-located 64x64 patches, in compressed and raw form.
Joint training alternates emphasis between the alignment loss and the
enhancement loss on a windowed-convergence schedule. Enhancement routes
detected keyframes through the single-frame network and everything else
through motion compensation plus fusion, then reports per-class PSNR
gains and fluctuation statistics.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from . import detector as detector_mod
from . import engine, metrics
from .checkpoint import NEIGHBOR_MODES, CheckpointBundle
from .detector import DetectionResult, DetectorConfig
from .engine import Parameter, Tensor
from .errors import ArgumentError, TrainingDivergedError
from .mc_subnet import McConfig, mc_forward, mc_params, mc_supervised_loss
from .metrics import FrameKind
from .qe_subnet import QeConfig, qe_forward, qe_params, qe_single_frame
from .svm import SvmModel
from .video_io import ClipPair, LumaFrame, VideoClip

PATCH_SIZE = 64
DEFAULT_PATCH_STRIDE = 48


def _to_unit(frame: LumaFrame) -> np.ndarray:
    return frame.pixels.astype(np.float32) / 255.0


def _to_uint8(plane: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(plane, 0.0, 1.0) * 255.0).astype(np.uint8)


def _stack(planes) -> Tensor:
    return engine.tensor(np.stack(planes)[:, None])


@dataclass(frozen=True)
class TrainingSample:
    """Six co-located patches: compressed target and keyframes plus
    their raw counterparts."""

    f_np: np.ndarray
    f_p1: np.ndarray
    f_p2: np.ndarray
    f_r_np: np.ndarray
    f_r_p1: np.ndarray
    f_r_p2: np.ndarray

    def __post_init__(self):
        shapes = {p.shape for p in (self.f_np, self.f_p1, self.f_p2,
                                    self.f_r_np, self.f_r_p1, self.f_r_p2)}
        if shapes != {(PATCH_SIZE, PATCH_SIZE)}:
            raise ArgumentError(f"patches must all be {PATCH_SIZE}x{PATCH_SIZE}, got {shapes}")


@dataclass(frozen=True)
class LossWeights:
    a: float
    b: float

    def __post_init__(self):
        if self.a < 0 or self.b < 0 or self.a + self.b <= 0:
            raise ArgumentError(f"weights must be nonnegative and not both zero, got ({self.a}, {self.b})")


@dataclass(frozen=True)
class Schedule:
    """Two-phase joint schedule: alignment-heavy, then enhancement-heavy."""

    total_steps: int
    max_phase1_steps: int | None = None  # default: half of total_steps
    phase1: LossWeights = LossWeights(1.0, 0.01)
    phase2: LossWeights = LossWeights(0.01, 1.0)
    switch_window: int = 200
    switch_tol: float = 1e-3
    batch_size: int = 64
    lr: float = 1e-4

    def __post_init__(self):
        if self.total_steps < 1:
            raise ArgumentError(f"total_steps must be >= 1, got {self.total_steps}")
        if self.max_phase1_steps is not None and not 0 <= self.max_phase1_steps <= self.total_steps:
            raise ArgumentError("max_phase1_steps must lie in [0, total_steps]")
        if self.switch_window < 1 or self.batch_size < 1:
            raise ArgumentError("switch_window and batch_size must be positive")
        if self.switch_tol <= 0 or self.lr <= 0:
            raise ArgumentError("switch_tol and lr must be positive")

    @property
    def phase1_cap(self) -> int:
        return self.total_steps // 2 if self.max_phase1_steps is None else self.max_phase1_steps


@dataclass(frozen=True)
class BuildResult:
    """Assembled samples plus the count of clips dropped for having no
    detected keyframes."""

    samples: tuple[TrainingSample, ...]
    skipped_clips: int

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class TrainReport:
    l_mc: tuple[float, ...]
    l_qe: tuple[float, ...]
    total: tuple[float, ...]
    phase: tuple[int, ...]
    phase_switch_step: int | None

    def csv(self) -> str:
        lines = ["step,l_mc,l_qe,total,phase"]
        for i in range(len(self.total)):
            lines.append(f"{i},{self.l_mc[i]:.8g},{self.l_qe[i]:.8g},"
                         f"{self.total[i]:.8g},{self.phase[i]}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TrainResult:
    mc: dict[str, Parameter]
    qe: dict[str, Parameter]
    report: TrainReport


def _reference_indices(n: int, count: int, positives, mode: str) -> tuple[int, int]:
    """Keyframe pair for frame n, duplicating across missing boundaries."""
    if mode == "nearest_pqf":
        before = [p for p in positives if p < n]
        after = [p for p in positives if p > n]
        p1 = max(before) if before else None
        p2 = min(after) if after else None
    elif mode == "adjacent_frames":
        p1 = n - 1 if n - 1 >= 0 else None
        p2 = n + 1 if n + 1 < count else None
    else:
        raise ArgumentError(f"neighbor_mode must be one of {NEIGHBOR_MODES}, got {mode!r}")
    if p1 is None and p2 is None:
        raise ArgumentError(f"frame {n} has no reference frame available")
    if p1 is None:
        p1 = p2
    if p2 is None:
        p2 = p1
    return p1, p2


def _patch_origins(height: int, width: int, stride: int, rng: np.random.Generator):
    """Grid anchors jittered by seeded offsets, clipped to the frame."""
    ys = range(0, height - PATCH_SIZE + 1, stride)
    xs = range(0, width - PATCH_SIZE + 1, stride)
    for y0 in ys:
        for x0 in xs:
            dy, dx = rng.integers(0, stride, size=2)
            yield (min(y0 + int(dy), height - PATCH_SIZE),
                   min(x0 + int(dx), width - PATCH_SIZE))


def _check_build_inputs(pairs, detections) -> None:
    if len(pairs) != len(detections):
        raise ArgumentError(f"{len(pairs)} clips but {len(detections)} detection results")
    for pair, det in zip(pairs, detections):
        if len(det.labels) != len(pair):
            raise ArgumentError("detection labels not aligned with clip frames")


def _cut(plane: np.ndarray, y0: int, x0: int) -> np.ndarray:
    return plane[y0:y0 + PATCH_SIZE, x0:x0 + PATCH_SIZE]


def build_samples(pairs, detections, neighbor_mode: str = "nearest_pqf",
                  patch_stride: int = DEFAULT_PATCH_STRIDE, seed: int = 0) -> BuildResult:
    """Pair every non-keyframe with its two references and cut patches."""
    if patch_stride < 1:
        raise ArgumentError(f"patch_stride must be positive, got {patch_stride}")
    if neighbor_mode not in NEIGHBOR_MODES:
        raise ArgumentError(f"neighbor_mode must be one of {NEIGHBOR_MODES}, got {neighbor_mode!r}")
    _check_build_inputs(pairs, detections)
    rng = np.random.default_rng(seed)
    samples: list[TrainingSample] = []
    skipped = 0
    for pair, det in zip(pairs, detections):
        positives = det.positive_indices
        if not positives:
            skipped += 1
            continue
        if pair.raw.height < PATCH_SIZE or pair.raw.width < PATCH_SIZE:
            raise ArgumentError(
                f"frames {pair.raw.width}x{pair.raw.height} smaller than the "
                f"{PATCH_SIZE}x{PATCH_SIZE} patch size")
        comp = [_to_unit(f) for f in pair.compressed.frames]
        raw = [_to_unit(f) for f in pair.raw.frames]
        for n in range(len(pair)):
            if det.labels[n] == 1:
                continue
            p1, p2 = _reference_indices(n, len(pair), positives, neighbor_mode)
            for y0, x0 in _patch_origins(pair.raw.height, pair.raw.width, patch_stride, rng):
                samples.append(TrainingSample(
                    f_np=_cut(comp[n], y0, x0), f_p1=_cut(comp[p1], y0, x0),
                    f_p2=_cut(comp[p2], y0, x0), f_r_np=_cut(raw[n], y0, x0),
                    f_r_p1=_cut(raw[p1], y0, x0), f_r_p2=_cut(raw[p2], y0, x0)))
    return BuildResult(samples=tuple(samples), skipped_clips=skipped)


def build_pqf_samples(pairs, detections, patch_stride: int = DEFAULT_PATCH_STRIDE,
                      seed: int = 0) -> BuildResult:
    """Patches of detected keyframes, triplicated for single-frame training."""
    if patch_stride < 1:
        raise ArgumentError(f"patch_stride must be positive, got {patch_stride}")
    _check_build_inputs(pairs, detections)
    rng = np.random.default_rng(seed)
    samples: list[TrainingSample] = []
    skipped = 0
    for pair, det in zip(pairs, detections):
        positives = det.positive_indices
        if not positives:
            skipped += 1
            continue
        comp = {p: _to_unit(pair.compressed.frames[p]) for p in positives}
        raw = {p: _to_unit(pair.raw.frames[p]) for p in positives}
        for p in positives:
            for y0, x0 in _patch_origins(pair.raw.height, pair.raw.width, patch_stride, rng):
                c, r = _cut(comp[p], y0, x0), _cut(raw[p], y0, x0)
                samples.append(TrainingSample(f_np=c, f_p1=c, f_p2=c,
                                              f_r_np=r, f_r_p1=r, f_r_p2=r))
    return BuildResult(samples=tuple(samples), skipped_clips=skipped)


class _BatchStream:
    """Deterministic shuffled index stream, reshuffled per epoch."""

    def __init__(self, n: int, batch_size: int, rng: np.random.Generator):
        self.n = n
        self.batch = min(batch_size, n)
        self.rng = rng
        self.order = rng.permutation(n)
        self.pos = 0

    def next_batch(self) -> np.ndarray:
        out = []
        while len(out) < self.batch:
            if self.pos == self.n:
                self.order = self.rng.permutation(self.n)
                self.pos = 0
            take = min(self.batch - len(out), self.n - self.pos)
            out.extend(self.order[self.pos:self.pos + take])
            self.pos += take
        return np.asarray(out)


def _batch_tensors(samples, idx) -> tuple[Tensor, ...]:
    group = [samples[i] for i in idx]
    return (_stack([s.f_np for s in group]), _stack([s.f_p1 for s in group]),
            _stack([s.f_p2 for s in group]), _stack([s.f_r_np for s in group]),
            _stack([s.f_r_p1 for s in group]), _stack([s.f_r_p2 for s in group]))


def joint_losses(sample_batch: tuple[Tensor, ...], mc: dict[str, Parameter],
                 qe: dict[str, Parameter], mc_cfg: McConfig,
                 qe_cfg: QeConfig) -> tuple[Tensor, Tensor]:
    """(L_MC, L_QE) for one batch: both keyframes pass through the
    shared-weight alignment network against the target."""
    f_np, f_p1, f_p2, f_r_np, f_r_p1, f_r_p2 = sample_batch
    loss1, out1 = mc_supervised_loss(f_np, f_p1, f_r_np, f_r_p1, mc, mc_cfg)
    loss2, out2 = mc_supervised_loss(f_np, f_p2, f_r_np, f_r_p2, mc, mc_cfg)
    l_mc = engine.add(loss1, loss2)
    enhanced = qe_forward(out1.warped_pqf, f_np, out2.warped_pqf, qe, qe_cfg).enhanced
    l_qe = engine.mse(enhanced, f_r_np)
    return l_mc, l_qe


def _switch_due(l_mc_hist: list[float], step: int, schedule: Schedule) -> bool:
    if step >= schedule.phase1_cap:
        return True
    w = schedule.switch_window
    if step < 2 * w:
        return False
    prev = float(np.mean(l_mc_hist[step - 2 * w:step - w]))
    cur = float(np.mean(l_mc_hist[step - w:step]))
    return (prev - cur) < schedule.switch_tol * max(prev, 1e-12)


def train_mfcnn(samples, schedule: Schedule, mc_cfg: McConfig = McConfig(),
                qe_cfg: QeConfig = QeConfig(), seed: int = 0,
                init_mc: dict[str, Parameter] | None = None,
                init_qe: dict[str, Parameter] | None = None) -> TrainResult:
    """Two-phase joint training of the alignment and enhancement nets.

    Phase 1 weights the alignment loss heavily; once its windowed
    running mean stops improving (or the phase-1 step cap is reached)
    the weights flip to favor the enhancement loss. Both phases update
    all parameters. Raises TrainingDivergedError on non-finite loss.
    """
    samples = tuple(samples)
    if not samples:
        raise ArgumentError("need at least one training sample")
    if qe_cfg.clamp_output:
        raise ArgumentError("clamp_output must stay off during training")
    rng = np.random.default_rng(seed)
    mc = init_mc if init_mc is not None else mc_params(mc_cfg, rng)
    qe = init_qe if init_qe is not None else qe_params(qe_cfg, rng)
    everything = list(mc.values()) + list(qe.values())
    state = engine.AdamState.for_params(everything, lr=schedule.lr)
    stream = _BatchStream(len(samples), schedule.batch_size, rng)

    l_mc_hist: list[float] = []
    l_qe_hist: list[float] = []
    total_hist: list[float] = []
    phase_hist: list[int] = []
    phase = 1
    switch_step = None
    for step in range(schedule.total_steps):
        if phase == 1 and _switch_due(l_mc_hist, step, schedule):
            phase = 2
            switch_step = step
        weights = schedule.phase1 if phase == 1 else schedule.phase2
        batch = _batch_tensors(samples, stream.next_batch())
        engine.zero_grads(everything)
        l_mc, l_qe = joint_losses(batch, mc, qe, mc_cfg, qe_cfg)
        total = engine.add(engine.scale(l_mc, weights.a), engine.scale(l_qe, weights.b))
        total_val = float(total.data)
        l_mc_hist.append(float(l_mc.data))
        l_qe_hist.append(float(l_qe.data))
        total_hist.append(total_val)
        phase_hist.append(phase)
        if not math.isfinite(total_val):
            raise TrainingDivergedError(
                f"joint loss became non-finite at step {step}",
                step, total_hist[-10:])
        engine.backward(total)
        engine.adam_step(everything, state)

    report = TrainReport(l_mc=tuple(l_mc_hist), l_qe=tuple(l_qe_hist),
                         total=tuple(total_hist), phase=tuple(phase_hist),
                         phase_switch_step=switch_step)
    return TrainResult(mc=mc, qe=qe, report=report)


def train_single_frame(samples, steps: int, qe_cfg: QeConfig = QeConfig(),
                       seed: int = 0, lr: float = 1e-4, batch_size: int = 64,
                       init: dict[str, Parameter] | None = None
                       ) -> tuple[dict[str, Parameter], tuple[float, ...]]:
    """Train the keyframe enhancer on triplicated keyframe samples."""
    samples = tuple(samples)
    if not samples:
        raise ArgumentError("need at least one training sample")
    if steps < 0:
        raise ArgumentError(f"steps must be nonnegative, got {steps}")
    if qe_cfg.clamp_output:
        raise ArgumentError("clamp_output must stay off during training")
    rng = np.random.default_rng(seed)
    params = init if init is not None else qe_params(qe_cfg, rng, "qe_sf.")
    values = list(params.values())
    state = engine.AdamState.for_params(values, lr=lr)
    stream = _BatchStream(len(samples), batch_size, rng)
    losses: list[float] = []
    for step in range(steps):
        f_np, _, _, f_r_np, _, _ = _batch_tensors(samples, stream.next_batch())
        engine.zero_grads(values)
        loss = engine.mse(qe_single_frame(f_np, params, qe_cfg).enhanced, f_r_np)
        loss_val = float(loss.data)
        losses.append(loss_val)
        if not math.isfinite(loss_val):
            raise TrainingDivergedError(
                f"single-frame loss became non-finite at step {step}",
                step, losses[-10:])
        engine.backward(loss)
        engine.adam_step(values, state)
    return params, tuple(losses)


@dataclass(frozen=True)
class EnhanceResult:
    clip: VideoClip
    labels: tuple[str, ...]  # per frame: pqf_enhanced | nonpqf_enhanced
    detection: DetectionResult
    warning: str | None = None


def _chunks(seq, size):
    for i in range(0, len(seq), size):
        yield seq[i:i + size]


def enhance_clip(compressed: VideoClip, bundle: CheckpointBundle, model: SvmModel,
                 det_cfg: DetectorConfig = DetectorConfig(),
                 chunk_size: int = 4) -> EnhanceResult:
    """Detect keyframes and enhance every frame of the clip.

    Keyframes run through the single-frame network; the rest are fused
    with their two reference frames (chosen by the bundle's
    neighbor_mode) after motion compensation. Chroma passes through
    untouched. If detection finds no keyframes the whole clip falls
    back to the single-frame network and a warning is set.
    """
    if len(compressed) < 3:
        raise ArgumentError(f"need at least 3 frames, got {len(compressed)}")
    if compressed.height % 4 or compressed.width % 4:
        raise ArgumentError("frame dims must be divisible by 4 for motion compensation")
    detection = detector_mod.detect(compressed, model, det_cfg)
    positives = detection.positive_indices
    emit_cfg = dataclasses.replace(bundle.qe_cfg, clamp_output=True)
    planes = [_to_unit(f) for f in compressed.frames]
    out_planes: list[np.ndarray | None] = [None] * len(planes)

    warning = None
    if positives:
        single = list(positives)
        fused = [n for n in range(len(planes)) if n not in detection.positive_indices]
        labels = tuple("pqf_enhanced" if detection.labels[n] == 1 else "nonpqf_enhanced"
                       for n in range(len(planes)))
    else:
        single = list(range(len(planes)))
        fused = []
        labels = tuple("pqf_enhanced" for _ in planes)
        warning = "no keyframes detected; whole clip routed to the single-frame enhancer"

    for group in _chunks(single, chunk_size):
        batch = _stack([planes[n] for n in group])
        enhanced = qe_single_frame(batch, bundle.qe_sf, emit_cfg).enhanced.data
        for row, n in enumerate(group):
            out_planes[n] = enhanced[row, 0]

    for group in _chunks(fused, chunk_size):
        refs = [_reference_indices(n, len(planes), positives, bundle.neighbor_mode)
                for n in group]
        f_np = _stack([planes[n] for n in group])
        f_p1 = _stack([planes[p1] for p1, _ in refs])
        f_p2 = _stack([planes[p2] for _, p2 in refs])
        w1 = mc_forward(f_np, f_p1, bundle.mc, bundle.mc_cfg).warped_pqf
        w2 = mc_forward(f_np, f_p2, bundle.mc, bundle.mc_cfg).warped_pqf
        enhanced = qe_forward(w1, f_np, w2, bundle.qe, emit_cfg).enhanced.data
        for row, n in enumerate(group):
            out_planes[n] = enhanced[row, 0]

    frames = tuple(LumaFrame(_to_uint8(p)) for p in out_planes)
    clip = VideoClip(frames=frames, chroma=compressed.chroma,
                     frame_rate=compressed.frame_rate, colorspace=compressed.colorspace)
    return EnhanceResult(clip=clip, labels=labels, detection=detection, warning=warning)


@dataclass(frozen=True)
class EvalReport:
    """Per-frame PSNR curves and class-partitioned improvement."""

    psnr_in: tuple[float, ...]
    psnr_out: tuple[float, ...]
    pred_pqf: tuple[int, ...]
    true_pqf: tuple[int, ...]
    delta_overall: float
    delta_pqf: float
    delta_nonpqf: float
    delta_vqf: float
    std_before: float
    std_after: float
    pvd_before: float
    pvd_after: float

    def csv(self) -> str:
        lines = ["frame,psnr_in,psnr_out,is_pqf_pred,is_pqf_true"]
        for i in range(len(self.psnr_in)):
            lines.append(f"{i},{self.psnr_in[i]:.4f},{self.psnr_out[i]:.4f},"
                         f"{self.pred_pqf[i]},{self.true_pqf[i]}")
        return "\n".join(lines) + "\n"


def _class_mean(deltas: np.ndarray, mask: np.ndarray) -> float:
    return float(np.mean(deltas[mask])) if np.any(mask) else float("nan")


def evaluate_enhancement(raw: VideoClip, compressed: VideoClip, enhanced: VideoClip,
                         labels=None) -> EvalReport:
    """Compare enhancement against the compressed baseline.

    Frame classes come from the ground-truth raw/compressed curve; the
    optional labels are the enhancement provenance used to fill the
    predicted-keyframe column.
    """
    curve_in = metrics.quality_curve(ClipPair(raw=raw, compressed=compressed))
    curve_out = metrics.quality_curve(ClipPair(raw=raw, compressed=enhanced))
    marks = metrics.find_peaks_valleys(curve_in)
    stats_in = metrics.curve_stats(curve_in, marks)
    marks_out = metrics.find_peaks_valleys(curve_out)
    stats_out = metrics.curve_stats(curve_out, marks_out)

    deltas = curve_out.psnr - curve_in.psnr
    kinds = np.array(marks.kinds)
    pqf_mask = kinds == FrameKind.PQF
    vqf_mask = kinds == FrameKind.VQF
    if labels is not None:
        if len(labels) != len(curve_in):
            raise ArgumentError("provenance labels not aligned with clip")
        pred = tuple(1 if l == "pqf_enhanced" else 0 for l in labels)
    else:
        pred = tuple(int(m) for m in pqf_mask)
    return EvalReport(
        psnr_in=tuple(float(v) for v in curve_in.psnr),
        psnr_out=tuple(float(v) for v in curve_out.psnr),
        pred_pqf=pred,
        true_pqf=tuple(int(m) for m in pqf_mask),
        delta_overall=float(np.mean(deltas)),
        delta_pqf=_class_mean(deltas, pqf_mask),
        delta_nonpqf=_class_mean(deltas, ~pqf_mask),
        delta_vqf=_class_mean(deltas, vqf_mask),
        std_before=stats_in.std_db,
        std_after=stats_out.std_db,
        pvd_before=stats_in.mean_pvd_db,
        pvd_after=stats_out.mean_pvd_db,
    )
