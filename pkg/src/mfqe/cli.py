"""Command-line entry point.

Subcommands cover the whole pipeline: synthesizing and degrading test
clips, curve analysis, feature dumps, detector and enhancer training,
enhancement, evaluation, and a gradient self-check. Every flag mirrors
a namespaced config-file key ("key = value" lines, "#" comments); flags
override the file. Exit codes: 0 success, 1 usage error, 2 data or
format error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_mod
from . import detector as detector_mod
from . import engine, features, metrics, pipeline, simulate, svm
from . import video_io
from .detector import DetectorConfig
from .errors import (
    ArgumentError,
    DegenerateInputError,
    MfqeError,
    TrainingDivergedError,
)
from .mc_subnet import McConfig, mc_forward, mc_params
from .qe_subnet import QeConfig, qe_forward, qe_params
from .video_io import ClipPair, read_y4m, write_y4m


class UsageError(Exception):
    """Bad flags, bad config keys, or missing required arguments."""


def _parse_bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"expected a boolean, got {text!r}")


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in str(text).split(",") if tok.strip())
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _parse_pairs(text: str) -> tuple[tuple[str, str], ...]:
    pairs = []
    for item in str(text).split(";"):
        item = item.strip()
        if not item:
            continue
        raw, sep, cmp_path = item.partition(":")
        if not sep or not raw or not cmp_path:
            raise UsageError(f"expected RAW:COMPRESSED, got {item!r}")
        pairs.append((raw, cmp_path))
    if not pairs:
        raise UsageError("no clip pairs given")
    return tuple(pairs)


@dataclasses.dataclass(frozen=True)
class Opt:
    key: str  # namespaced config key
    flag: str
    type: object
    default: object = None
    help: str = ""
    required: bool = False
    repeatable: bool = False


_IO_OUT = Opt("io.out", "--out", str, required=True, help="output path")
_IO_RAW = Opt("io.raw", "--raw", str, required=True, help="raw (pristine) clip, Y4M")
_IO_CMP = Opt("io.cmp", "--cmp", str, required=True, help="compressed clip, Y4M")
_IO_CLIP = Opt("io.clip", "--clip", str, required=True, help="input clip, Y4M")
_IO_MODEL = Opt("io.model", "--model", str, help="detector model checkpoint")
_IO_MODEL_REQ = dataclasses.replace(_IO_MODEL, required=True)
_IO_CKPT = Opt("io.ckpt", "--ckpt", str, required=True, help="enhancer checkpoint")
_IO_PAIRS = Opt("io.pairs", "--pair", str, repeatable=True, required=True,
                help="RAW:COMPRESSED clip pair; repeatable (config: ';'-separated)")
_SEED = Opt("train.seed", "--seed", int, 0, help="seed for sampling and init")

_DETECTOR_OPTS = (
    Opt("detector.d_max", "--d-max", int, detector_mod.DEFAULT_MAX_GAP,
        help="largest allowed gap between consecutive keyframes"),
    Opt("detector.prob_threshold", "--prob-threshold", float, 0.5,
        help="probability cutoff for the initial labels"),
)

_SUBCOMMANDS: dict[str, tuple[Opt, ...]] = {
    "synth": (
        Opt("sim.width", "--width", int, 64, help="frame width"),
        Opt("sim.height", "--height", int, 64, help="frame height"),
        Opt("sim.frames", "--frames", int, 30, help="frame count (>= 5)"),
        Opt("sim.motion_x", "--motion-x", float, 0.0, help="per-step horizontal motion, px"),
        Opt("sim.motion_y", "--motion-y", float, 0.0, help="per-step vertical motion, px"),
        Opt("sim.texture_seed", "--texture-seed", int, 0, help="texture seed"),
        Opt("sim.sprites", "--sprites", int, 0, help="moving sprite count"),
        _IO_OUT,
    ),
    "degrade": (
        _IO_RAW,
        Opt("sim.period", "--period", int, 4, help="quality cycle length"),
        Opt("sim.base_qstep", "--base-qstep", float, 8.0, help="best-frame quantizer step"),
        Opt("sim.profile", "--profile", _parse_floats, (),
            help="per-position quantizer multipliers (default tent profile)"),
        _IO_OUT,
    ),
    "analyze": (_IO_RAW, _IO_CMP, _IO_OUT),
    "features": (_IO_CLIP, _IO_OUT),
    "train-detector": (
        _IO_PAIRS,
        Opt("svm.c", "--c", float, 1.0, help="soft-margin penalty"),
        Opt("svm.gamma", "--gamma", float, 0.0, help="RBF width; 0 = auto"),
        Opt("svm.kkt_tol", "--kkt-tol", float, 1e-3, help="stationarity tolerance"),
        Opt("svm.max_passes", "--max-passes", int, 200, help="optimization pass budget"),
        Opt("svm.seed", "--svm-seed", int, 0, help="calibration fold seed"),
        _IO_OUT,
    ),
    "detect": (_IO_CLIP, _IO_MODEL_REQ, *_DETECTOR_OPTS, _IO_OUT),
    "train-mfcnn": (
        _IO_PAIRS,
        _IO_MODEL_REQ,
        *_DETECTOR_OPTS,
        Opt("train.steps", "--steps", int, 2000, help="joint training steps"),
        Opt("train.batch_size", "--batch-size", int, 64, help="samples per step"),
        Opt("train.lr", "--lr", float, 1e-4, help="Adam learning rate"),
        Opt("train.phase1_a", "--phase1-a", float, 1.0, help="phase-1 alignment weight"),
        Opt("train.phase1_b", "--phase1-b", float, 0.01, help="phase-1 enhancement weight"),
        Opt("train.phase2_a", "--phase2-a", float, 0.01, help="phase-2 alignment weight"),
        Opt("train.phase2_b", "--phase2-b", float, 1.0, help="phase-2 enhancement weight"),
        Opt("train.switch_window", "--switch-window", int, 200,
            help="steps per convergence window"),
        Opt("train.switch_tol", "--switch-tol", float, 1e-3,
            help="relative improvement ending phase 1"),
        Opt("train.max_phase1_steps", "--max-phase1-steps", int, -1,
            help="phase-1 step cap; -1 = half of total"),
        Opt("train.sf_steps", "--sf-steps", int, -1,
            help="single-frame enhancer steps; -1 = half of --steps"),
        Opt("train.neighbor_mode", "--neighbor-mode", str, "nearest_pqf",
            help="reference choice: nearest_pqf | adjacent_frames"),
        Opt("train.patch_stride", "--patch-stride", int, pipeline.DEFAULT_PATCH_STRIDE,
            help="patch grid stride"),
        _SEED,
        Opt("mc.max_displacement", "--max-displacement", float, 8.0,
            help="motion search bound, px"),
        Opt("mc.reduction", "--mc-reduction", int, 1, help="alignment channel divisor"),
        Opt("mc.strict", "--mc-strict", _parse_bool, False,
            help="drop the auxiliary coarse-stage supervision"),
        Opt("qe.reduction", "--qe-reduction", int, 1, help="enhancement channel divisor"),
        Opt("io.report", "--report", str, "", help="loss-curve CSV path (default <out>.report.csv)"),
        _IO_OUT,
    ),
    "enhance": (
        _IO_CLIP,
        _IO_CKPT,
        _IO_MODEL,
        *_DETECTOR_OPTS,
        Opt("io.labels", "--labels", str, "", help="optional provenance CSV path"),
        _IO_OUT,
    ),
    "eval": (
        _IO_RAW,
        _IO_CMP,
        Opt("io.enhanced", "--enhanced", str, required=True, help="enhanced clip, Y4M"),
        Opt("io.labels", "--labels", str, "", help="provenance CSV from enhance"),
        _IO_OUT,
    ),
    "gradcheck": (),
}

_REGISTRY: dict[str, Opt] = {}
for _opts in _SUBCOMMANDS.values():
    for _o in _opts:
        _REGISTRY.setdefault(_o.key, _o)


def _read_config(path: str) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        key = key.strip()
        if key not in _REGISTRY:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = value.strip()
    return values


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2)
        raise UsageError(message)


def _build_parser(cmd: str, opts: tuple[Opt, ...]) -> _Parser:
    parser = _Parser(prog=f"mfqe {cmd}", description=f"{cmd} subcommand")
    parser.add_argument("--config", help="key = value config file; flags override it")
    for opt in opts:
        kwargs = {"help": f"{opt.help} (config key {opt.key}"
                          + (f", default {opt.default!r})" if not opt.required else ", required)"),
                  "default": None, "dest": opt.key}
        if opt.repeatable:
            kwargs["action"] = "append"
        parser.add_argument(opt.flag, **kwargs)
    return parser


def _convert(opt: Opt, raw):
    try:
        return opt.type(raw)
    except UsageError:
        raise
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad value for {opt.flag} / {opt.key}: {raw!r}") from exc


def _resolve(cmd: str, argv) -> dict[str, object]:
    opts = _SUBCOMMANDS[cmd]
    parsed = vars(_build_parser(cmd, opts).parse_args(argv))
    config = _read_config(parsed["config"]) if parsed.get("config") else {}
    resolved: dict[str, object] = {}
    for opt in opts:
        flag_value = parsed.get(opt.key)
        if flag_value is not None:
            if opt.repeatable:
                resolved[opt.key] = _parse_pairs(";".join(flag_value))
            else:
                resolved[opt.key] = _convert(opt, flag_value)
        elif opt.key in config:
            if opt.repeatable:
                resolved[opt.key] = _parse_pairs(config[opt.key])
            else:
                resolved[opt.key] = _convert(opt, config[opt.key])
        elif opt.required:
            raise UsageError(f"missing required argument {opt.flag} (config key {opt.key})")
        else:
            resolved[opt.key] = opt.default
    return resolved


def _svg_line_plot(series, title: str, y_label: str) -> str:
    """Minimal SVG: axes, one polyline per series, text legend."""
    width, height, pad = 640, 360, 48
    values = np.concatenate([np.asarray(v, dtype=np.float64) for _, v in series])
    lo, hi = float(values.min()), float(values.max())
    span = (hi - lo) or 1.0
    lo -= 0.05 * span
    hi += 0.05 * span
    palette = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}">',
        f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="#444"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="#444"/>',
        f'<text x="6" y="{pad}" font-size="11">{hi:.2f}</text>',
        f'<text x="6" y="{height - pad}" font-size="11">{lo:.2f}</text>',
        f'<text x="10" y="{height / 2:.0f}" font-size="11" transform="rotate(-90 10 {height / 2:.0f})">{y_label}</text>',
    ]
    for idx, (name, vals) in enumerate(series):
        vals = np.asarray(vals, dtype=np.float64)
        n = len(vals)
        xs = pad + (np.arange(n) / max(n - 1, 1)) * (width - 2 * pad)
        ys = height - pad - (vals - lo) / (hi - lo) * (height - 2 * pad)
        points = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
        color = palette[idx % len(palette)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>')
        parts.append(f'<text x="{width - pad - 120}" y="{pad + 16 * idx}" font-size="12" '
                     f'fill="{color}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _write_text(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def _read_clip(path: str):
    with open(path, "rb") as stream:
        return read_y4m(stream)


def _write_clip(path: str, clip) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as stream:
        write_y4m(clip, stream)


def _cmd_synth(o) -> int:
    spec = simulate.SynthSpec(
        width=o["sim.width"], height=o["sim.height"], frame_count=o["sim.frames"],
        motion=(o["sim.motion_x"], o["sim.motion_y"]),
        texture_seed=o["sim.texture_seed"], sprite_count=o["sim.sprites"])
    clip = simulate.synth_clip(spec, frame_rate=Fraction(30, 1))
    _write_clip(o["io.out"], clip)
    print(f"wrote {len(clip)} frames {clip.width}x{clip.height} to {o['io.out']}")
    return 0


def _cmd_degrade(o) -> int:
    raw = _read_clip(o["io.raw"])
    sched = simulate.QualitySchedule(
        period=o["sim.period"], base_qstep=o["sim.base_qstep"],
        profile=o["sim.profile"] or None)
    pair = simulate.degrade_clip(raw, sched)
    _write_clip(o["io.out"], pair.compressed)
    print(f"degraded {len(raw)} frames with period {sched.period} "
          f"(qsteps {', '.join(f'{q:.1f}' for q in sched.profile)} x {sched.base_qstep:.1f})")
    return 0


def _curve_csv(curve_in, curve_out, pred, true) -> str:
    lines = ["frame,psnr_in,psnr_out,is_pqf_pred,is_pqf_true"]
    for i, (a, b, p, t) in enumerate(zip(curve_in, curve_out, pred, true)):
        lines.append(f"{i},{a:.4f},{b:.4f},{p},{t}")
    return "\n".join(lines) + "\n"


def _cmd_analyze(o) -> int:
    pair = ClipPair(raw=_read_clip(o["io.raw"]), compressed=_read_clip(o["io.cmp"]))
    curve = metrics.quality_curve(pair)
    marks = metrics.find_peaks_valleys(curve)
    stats = metrics.curve_stats(curve, marks)
    out_dir = Path(o["io.out"])
    truth = [int(k) for k in marks.pqf_mask()]
    _write_text(out_dir / "curve.csv", _curve_csv(curve.psnr, curve.psnr, truth, truth))
    _write_text(out_dir / "curve.svg",
                _svg_line_plot([("psnr", curve.psnr)], "PSNR per frame", "dB"))
    print(f"frames={len(curve)} pqfs={len(marks.pqf_indices)} vqfs={len(marks.vqf_indices)}")
    print(f"std={stats.std_db:.4f} dB  mean_pvd={stats.mean_pvd_db:.4f} dB  "
          f"mean_ps={stats.mean_ps_frames:.2f} frames")
    return 0


def _cmd_features(o) -> int:
    clip = _read_clip(o["io.clip"])
    matrix = features.clip_context_matrix(clip)
    header = "frame," + ",".join(f"f{i:03d}" for i in range(matrix.shape[1]))
    lines = [header]
    for t, row in enumerate(matrix):
        lines.append(f"{t}," + ",".join(f"{v:.6g}" for v in row))
    _write_text(o["io.out"], "\n".join(lines) + "\n")
    print(f"wrote {matrix.shape[0]}x{matrix.shape[1]} feature matrix to {o['io.out']}")
    return 0


def _load_pairs(specs) -> list[ClipPair]:
    return [ClipPair(raw=_read_clip(raw), compressed=_read_clip(cmp_path))
            for raw, cmp_path in specs]


def _cmd_train_detector(o) -> int:
    pairs = _load_pairs(o["io.pairs"])
    x, y = detector_mod.build_training_set(pairs)
    cfg = svm.TrainConfig(
        c=o["svm.c"], gamma=o["svm.gamma"] or None, kkt_tol=o["svm.kkt_tol"],
        max_passes=o["svm.max_passes"], seed=o["svm.seed"])
    model = svm.train(x, y, cfg)
    ckpt_mod.save_svm(o["io.out"], model)
    status = "converged" if model.converged else "NOT converged (pass budget hit)"
    print(f"trained on {x.shape[0]} frames: {model.support_vectors.shape[0]} support "
          f"vectors, {status}")
    return 0


def _detector_config(o) -> DetectorConfig:
    return DetectorConfig(d_max=o["detector.d_max"], prob_threshold=o["detector.prob_threshold"])


def _cmd_detect(o) -> int:
    model = ckpt_mod.load_svm(o["io.model"])
    clip = _read_clip(o["io.clip"])
    result = detector_mod.detect(clip, model, _detector_config(o))
    lines = ["frame,is_pqf_pred,prob"]
    for i, (label, prob) in enumerate(zip(result.labels, result.probs)):
        lines.append(f"{i},{label},{prob:.6f}")
    _write_text(o["io.out"], "\n".join(lines) + "\n")
    print(f"detected {sum(result.labels)} keyframes in {len(result.labels)} frames")
    return 0


def _cmd_train_mfcnn(o) -> int:
    pairs = _load_pairs(o["io.pairs"])
    model = ckpt_mod.load_svm(o["io.model"])
    det_cfg = _detector_config(o)
    detections = [detector_mod.detect(p.compressed, model, det_cfg) for p in pairs]

    build = pipeline.build_samples(pairs, detections, o["train.neighbor_mode"],
                                   o["train.patch_stride"], o["train.seed"])
    pqf_build = pipeline.build_pqf_samples(pairs, detections, o["train.patch_stride"],
                                           o["train.seed"])
    if build.skipped_clips:
        print(f"warning: skipped {build.skipped_clips} clips with no detected keyframes")
    schedule = pipeline.Schedule(
        total_steps=o["train.steps"],
        max_phase1_steps=None if o["train.max_phase1_steps"] < 0 else o["train.max_phase1_steps"],
        phase1=pipeline.LossWeights(o["train.phase1_a"], o["train.phase1_b"]),
        phase2=pipeline.LossWeights(o["train.phase2_a"], o["train.phase2_b"]),
        switch_window=o["train.switch_window"], switch_tol=o["train.switch_tol"],
        batch_size=o["train.batch_size"], lr=o["train.lr"])
    mc_cfg = McConfig(max_displacement=o["mc.max_displacement"],
                      reduction=o["mc.reduction"], strict_supervision=o["mc.strict"])
    qe_cfg = QeConfig(reduction=o["qe.reduction"])

    result = pipeline.train_mfcnn(build.samples, schedule, mc_cfg, qe_cfg, o["train.seed"])
    sf_steps = o["train.sf_steps"] if o["train.sf_steps"] >= 0 else o["train.steps"] // 2
    sf_params, _sf_losses = pipeline.train_single_frame(
        pqf_build.samples, sf_steps, qe_cfg, o["train.seed"],
        lr=schedule.lr, batch_size=schedule.batch_size)

    bundle = ckpt_mod.CheckpointBundle(
        mc=result.mc, qe=result.qe, qe_sf=sf_params, mc_cfg=mc_cfg, qe_cfg=qe_cfg,
        neighbor_mode=o["train.neighbor_mode"], svm=model)
    ckpt_mod.save_bundle(o["io.out"], bundle)
    report_path = o["io.report"] or f"{o['io.out']}.report.csv"
    _write_text(report_path, result.report.csv())
    switch = result.report.phase_switch_step
    print(f"trained {schedule.total_steps} joint steps on {len(build.samples)} samples "
          f"(phase switch at {'n/a' if switch is None else switch}), "
          f"{sf_steps} single-frame steps on {len(pqf_build.samples)} keyframe samples")
    print(f"final l_mc={result.report.l_mc[-1]:.6g} l_qe={result.report.l_qe[-1]:.6g}")
    return 0


def _cmd_enhance(o) -> int:
    clip = _read_clip(o["io.clip"])
    bundle = ckpt_mod.load_bundle(o["io.ckpt"])
    if o["io.model"]:
        model = ckpt_mod.load_svm(o["io.model"])
    elif bundle.svm is not None:
        model = bundle.svm
    else:
        raise UsageError("checkpoint embeds no detector model; pass --model")
    result = pipeline.enhance_clip(clip, bundle, model, _detector_config(o))
    _write_clip(o["io.out"], result.clip)
    if o["io.labels"]:
        lines = ["frame,provenance,is_pqf_pred"]
        for i, label in enumerate(result.labels):
            lines.append(f"{i},{label},{result.detection.labels[i]}")
        _write_text(o["io.labels"], "\n".join(lines) + "\n")
    if result.warning:
        print(f"warning: {result.warning}")
    print(f"enhanced {len(result.clip)} frames "
          f"({sum(1 for l in result.labels if l == 'pqf_enhanced')} keyframe route)")
    return 0


def _read_provenance(path: str) -> tuple[str, ...]:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not lines or not lines[0].startswith("frame,provenance"):
        raise ArgumentError(f"{path} is not a provenance CSV")
    return tuple(line.split(",")[1] for line in lines[1:])


def _cmd_eval(o) -> int:
    raw = _read_clip(o["io.raw"])
    cmp_clip = _read_clip(o["io.cmp"])
    enhanced = _read_clip(o["io.enhanced"])
    labels = _read_provenance(o["io.labels"]) if o["io.labels"] else None
    report = pipeline.evaluate_enhancement(raw, cmp_clip, enhanced, labels)
    out_dir = Path(o["io.out"])
    _write_text(out_dir / "eval.csv", report.csv())
    _write_text(out_dir / "eval.svg", _svg_line_plot(
        [("compressed", report.psnr_in), ("enhanced", report.psnr_out)],
        "PSNR per frame", "dB"))
    print(f"delta_overall={report.delta_overall:.4f} dB  delta_pqf={report.delta_pqf:.4f}  "
          f"delta_nonpqf={report.delta_nonpqf:.4f}  delta_vqf={report.delta_vqf:.4f}")
    print(f"std {report.std_before:.4f} -> {report.std_after:.4f} dB  "
          f"pvd {report.pvd_before:.4f} -> {report.pvd_after:.4f} dB")
    return 0


def _gradcheck_cases():
    rng = np.random.default_rng(7)

    def conv_case():
        x = engine.tensor(rng.standard_normal((1, 2, 6, 6)), requires_grad=True)
        w = engine.Parameter("w", engine.he_normal(rng, (3, 2, 3, 3), 18))
        b = engine.Parameter("b", np.zeros(3, dtype=np.float32))
        target = engine.tensor(rng.standard_normal((1, 3, 3, 3)))
        return lambda: engine.mse(engine.conv2d(x, w, b, stride=2), target), [x, w, b]

    def prelu_case():
        data = (rng.uniform(0.2, 1.0, (1, 2, 4, 4)) * rng.choice([-1.0, 1.0], (1, 2, 4, 4)))
        x = engine.tensor(data, requires_grad=True)
        a = engine.Parameter("a", np.full(2, 0.25, dtype=np.float32))
        return lambda: engine.mse(engine.prelu(x, a), engine.tensor(np.zeros((1, 2, 4, 4)))), [x, a]

    def tanh_case():
        x = engine.tensor(rng.standard_normal((1, 1, 4, 4)), requires_grad=True)
        return lambda: engine.mse(engine.tanh(x), engine.tensor(np.zeros((1, 1, 4, 4)))), [x]

    def concat_case():
        x = engine.tensor(rng.standard_normal((1, 2, 3, 3)), requires_grad=True)
        y = engine.tensor(rng.standard_normal((1, 1, 3, 3)), requires_grad=True)
        t = engine.tensor(np.zeros((1, 3, 3, 3)))
        return lambda: engine.mse(engine.concat_channels(x, y), t), [x, y]

    def add_scale_case():
        x = engine.tensor(rng.standard_normal((1, 1, 3, 3)), requires_grad=True)
        y = engine.tensor(rng.standard_normal((1, 1, 3, 3)), requires_grad=True)
        t = engine.tensor(np.zeros((1, 1, 3, 3)))
        return lambda: engine.mse(engine.add(engine.scale(x, 1.7), y), t), [x, y]

    def bilinear_case():
        x = engine.tensor(rng.standard_normal((1, 1, 5, 5)), requires_grad=True)
        flow = engine.tensor(rng.uniform(0.25, 0.45, (1, 2, 5, 5)), requires_grad=True)
        t = engine.tensor(np.zeros((1, 1, 5, 5)))
        return lambda: engine.mse(engine.bilinear_sample(x, flow), t), [x, flow]

    def upscale_case():
        flow = engine.tensor(rng.standard_normal((1, 2, 3, 3)), requires_grad=True)
        t = engine.tensor(np.zeros((1, 2, 6, 6)))
        return lambda: engine.mse(engine.upscale_flow(flow, 2), t), [flow]

    def mse_case():
        x = engine.tensor(rng.standard_normal((1, 1, 4, 4)), requires_grad=True)
        t = engine.tensor(rng.standard_normal((1, 1, 4, 4)))
        return lambda: engine.mse(x, t), [x]

    def composed_case():
        # Positive flow-head biases plus a small search bound keep every
        # sampling coordinate mid-cell, away from bilinear lattice kinks
        # that finite differences cannot measure.
        mc_cfg = McConfig(max_displacement=0.6, reduction=12)
        qe_cfg = QeConfig(reduction=32)
        local = np.random.default_rng(13)
        mcp = mc_params(mc_cfg, local)
        qep = qe_params(qe_cfg, local)
        for key, p in mcp.items():
            if key.endswith("_flow.w"):
                p.data = p.data * 10.0
            if key.endswith("_flow.b"):
                p.data = np.array([1.2, 0.9], dtype=np.float32)

        def pattern(phase, shift=(0.0, 0.0)):
            yy, xx = np.meshgrid(np.arange(8.0), np.arange(8.0), indexing="ij")
            u = (xx + shift[0]) / 24.0 + phase
            v = (yy + shift[1]) / 30.0
            plane = (0.5 + 0.22 * np.sin(2 * np.pi * u)
                     + 0.18 * np.cos(2 * np.pi * (v + 0.3 * u))).clip(0, 1)
            return engine.tensor(plane[None, None])

        f_np = pattern(0.1)
        f_p1 = pattern(0.1, (0.6, 0.3))
        f_p2 = pattern(0.1, (-0.4, 0.35))
        raw = pattern(0.13)
        for t in (f_np, f_p1, f_p2):
            t.requires_grad = True

        def loss_fn():
            w1 = mc_forward(f_np, f_p1, mcp, mc_cfg).warped_pqf
            w2 = mc_forward(f_np, f_p2, mcp, mc_cfg).warped_pqf
            enhanced = qe_forward(w1, f_np, w2, qep, qe_cfg).enhanced
            return engine.mse(enhanced, raw)

        return loss_fn, [f_np, f_p1, mcp["mc.coarse1.w"], mcp["mc.px_flow.w"],
                         qep["qe.conv1.w"], qep["qe.conv9.w"]]

    return (("conv2d", conv_case), ("prelu", prelu_case), ("tanh", tanh_case),
            ("concat_channels", concat_case), ("add/scale", add_scale_case),
            ("bilinear_sample", bilinear_case), ("upscale_flow", upscale_case),
            ("mse", mse_case), ("mc+qe composed", composed_case))


def _cmd_gradcheck(_o) -> int:
    worst_overall = 0.0
    for name, build in _gradcheck_cases():
        loss_fn, probes = build()
        err = engine.finite_difference_check(loss_fn, probes, max_coords=4)
        worst_overall = max(worst_overall, err)
        print(f"{name:18s} max relative error {err:.3e}")
    if worst_overall >= 1e-3:
        print(f"FAILED: worst error {worst_overall:.3e} >= 1e-3", file=sys.stderr)
        return 3
    print(f"all gradients within tolerance (worst {worst_overall:.3e})")
    return 0


_HANDLERS = {
    "synth": _cmd_synth,
    "degrade": _cmd_degrade,
    "analyze": _cmd_analyze,
    "features": _cmd_features,
    "train-detector": _cmd_train_detector,
    "detect": _cmd_detect,
    "train-mfcnn": _cmd_train_mfcnn,
    "enhance": _cmd_enhance,
    "eval": _cmd_eval,
    "gradcheck": _cmd_gradcheck,
}


def run(argv) -> int:
    argv = list(argv)
    if not argv or argv[0] in ("-h", "--help"):
        names = " | ".join(_HANDLERS)
        print(f"usage: mfqe <subcommand> [flags]\nsubcommands: {names}\n"
              f"run 'mfqe <subcommand> --help' for flags and config keys")
        return 0 if argv else 1
    cmd = argv[0]
    if cmd not in _HANDLERS:
        print(f"unknown subcommand {cmd!r}; expected one of: {', '.join(_HANDLERS)}",
              file=sys.stderr)
        return 1
    try:
        try:
            options = _resolve(cmd, argv[1:])
            return _HANDLERS[cmd](options)
        except SystemExit as exc:  # argparse --help
            return 0 if exc.code in (0, None) else 1
    except UsageError as exc:
        print(f"mfqe {cmd}: usage error: {exc}", file=sys.stderr)
        return 1
    except (TrainingDivergedError, DegenerateInputError) as exc:
        print(f"mfqe {cmd}: numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    except MfqeError as exc:
        print(f"mfqe {cmd}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"mfqe {cmd}: i/o error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
