"""Binary checkpoint container and model bundle persistence.

Layout: magic "MFQE", format version (u32), entry count (u32), then per
entry a u16 name length, the UTF-8 name, a u8 dtype code (0 = float32),
a u8 rank, one u32 per dimension, and the raw little-endian payload.
Entries are written in sorted name order so identical contents produce
identical files.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Mapping

import numpy as np

from . import mc_subnet, qe_subnet
from .engine import Parameter
from .errors import ArgumentError, CheckpointFormatError
from .mc_subnet import McConfig
from .qe_subnet import QeConfig
from .svm import SvmModel

MAGIC = b"MFQE"
VERSION = 1
_DTYPE_F32 = 0

NEIGHBOR_MODES = ("nearest_pqf", "adjacent_frames")


def write_container(sink: BinaryIO, arrays: Mapping[str, np.ndarray]) -> None:
    """Serialize named arrays; everything is stored as float32."""
    if not arrays:
        raise ArgumentError("refusing to write an empty checkpoint")
    sink.write(MAGIC)
    sink.write(struct.pack("<II", VERSION, len(arrays)))
    for name in sorted(arrays):
        data = np.ascontiguousarray(arrays[name], dtype="<f4")
        raw = name.encode("utf-8")
        if not raw or len(raw) > 0xFFFF:
            raise ArgumentError(f"bad entry name {name!r}")
        if data.ndim > 0xFF:
            raise ArgumentError(f"entry {name!r} rank {data.ndim} too large")
        sink.write(struct.pack("<H", len(raw)))
        sink.write(raw)
        sink.write(struct.pack("<BB", _DTYPE_F32, data.ndim))
        for dim in data.shape:
            sink.write(struct.pack("<I", dim))
        sink.write(data.tobytes())


def _read_exact(stream: BinaryIO, n: int, what: str) -> bytes:
    chunk = stream.read(n)
    if len(chunk) != n:
        raise CheckpointFormatError(f"truncated checkpoint while reading {what}")
    return chunk


def read_container(source: BinaryIO) -> dict[str, np.ndarray]:
    """Parse a container written by write_container."""
    if _read_exact(source, 4, "magic") != MAGIC:
        raise CheckpointFormatError("bad magic bytes; not a checkpoint file")
    version, count = struct.unpack("<II", _read_exact(source, 8, "header"))
    if version != VERSION:
        raise CheckpointFormatError(f"unsupported format version {version}")
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", _read_exact(source, 2, "name length"))
        name = _read_exact(source, name_len, "name").decode("utf-8")
        code, rank = struct.unpack("<BB", _read_exact(source, 2, "entry header"))
        if code != _DTYPE_F32:
            raise CheckpointFormatError(f"entry {name!r} has unknown dtype code {code}")
        dims = struct.unpack(f"<{rank}I", _read_exact(source, 4 * rank, "dims")) if rank else ()
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        payload = _read_exact(source, 4 * size, f"payload of {name!r}")
        if name in arrays:
            raise CheckpointFormatError(f"duplicate entry {name!r}")
        arrays[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
    if source.read(1):
        raise CheckpointFormatError("trailing bytes after final entry")
    return arrays


def save_arrays(path, arrays: Mapping[str, np.ndarray]) -> None:
    with open(path, "wb") as sink:
        write_container(sink, arrays)


def load_arrays(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as source:
        return read_container(source)


@dataclass(frozen=True)
class CheckpointBundle:
    """Everything a full enhancement run needs: the three parameter
    sets, their architecture configs, the sample-pairing mode, and
    optionally the PQF detector trained alongside."""

    mc: dict[str, Parameter]
    qe: dict[str, Parameter]
    qe_sf: dict[str, Parameter]
    mc_cfg: McConfig
    qe_cfg: QeConfig
    neighbor_mode: str = "nearest_pqf"
    svm: SvmModel | None = None


def _svm_arrays(model: SvmModel, prefix: str = "svm.") -> dict[str, np.ndarray]:
    return {
        f"{prefix}support_vectors": model.support_vectors,
        f"{prefix}dual_coefs": model.dual_coefs,
        f"{prefix}scalars": np.array(
            [model.bias, model.gamma, model.platt_a, model.platt_b, float(model.converged)]
        ),
        f"{prefix}mean": model.mean,
        f"{prefix}std": model.std,
    }


def _svm_from_arrays(arrays: Mapping[str, np.ndarray], prefix: str = "svm.") -> SvmModel:
    try:
        scalars = arrays[f"{prefix}scalars"].astype(np.float64)
        if scalars.shape != (5,):
            raise CheckpointFormatError(
                f"classifier scalar block has shape {scalars.shape}")
        model = SvmModel(
            support_vectors=arrays[f"{prefix}support_vectors"].astype(np.float64),
            dual_coefs=arrays[f"{prefix}dual_coefs"].astype(np.float64),
            bias=float(scalars[0]),
            gamma=float(scalars[1]),
            platt_a=float(scalars[2]),
            platt_b=float(scalars[3]),
            mean=arrays[f"{prefix}mean"].astype(np.float64),
            std=arrays[f"{prefix}std"].astype(np.float64),
            converged=bool(scalars[4]),
        )
    except KeyError as exc:
        raise CheckpointFormatError(f"classifier entry missing: {exc}") from exc
    return model


def save_svm(path, model: SvmModel) -> None:
    save_arrays(path, _svm_arrays(model))


def load_svm(path) -> SvmModel:
    return _svm_from_arrays(load_arrays(path))


def _config_arrays(bundle: CheckpointBundle) -> dict[str, np.ndarray]:
    return {
        "cfg.mc.max_displacement": np.array([bundle.mc_cfg.max_displacement]),
        "cfg.mc.reduction": np.array([bundle.mc_cfg.reduction]),
        "cfg.mc.strict_supervision": np.array([float(bundle.mc_cfg.strict_supervision)]),
        "cfg.qe.reduction": np.array([bundle.qe_cfg.reduction]),
        "cfg.neighbor_mode": np.array([float(NEIGHBOR_MODES.index(bundle.neighbor_mode))]),
    }


def save_bundle(path, bundle: CheckpointBundle) -> None:
    arrays: dict[str, np.ndarray] = {}
    for group in (bundle.mc, bundle.qe, bundle.qe_sf):
        for name, param in group.items():
            arrays[name] = param.data
    arrays.update(_config_arrays(bundle))
    if bundle.svm is not None:
        arrays.update(_svm_arrays(bundle.svm))
    save_arrays(path, arrays)


def _scalar(arrays: Mapping[str, np.ndarray], key: str) -> float:
    try:
        value = arrays[key]
    except KeyError:
        raise CheckpointFormatError(f"config entry {key!r} missing") from None
    if value.size != 1:
        raise CheckpointFormatError(f"config entry {key!r} is not a scalar")
    return float(value.reshape(()))


def _collect_params(arrays: Mapping[str, np.ndarray], expected: dict[str, Parameter],
                    group: str) -> dict[str, Parameter]:
    params: dict[str, Parameter] = {}
    for name, template in expected.items():
        if name not in arrays:
            raise CheckpointFormatError(f"parameter {name!r} missing from checkpoint")
        data = arrays[name]
        if data.shape != template.shape:
            raise CheckpointFormatError(
                f"parameter {name!r} has shape {data.shape}, expected {template.shape}"
            )
        params[name] = Parameter(name, data.astype(np.float32))
    stray = [k for k in arrays if k.startswith(group) and k not in expected]
    if stray:
        raise CheckpointFormatError(f"unexpected entries {stray} for group {group!r}")
    return params


def load_bundle(path) -> CheckpointBundle:
    arrays = load_arrays(path)
    mc_cfg = McConfig(
        max_displacement=_scalar(arrays, "cfg.mc.max_displacement"),
        reduction=int(_scalar(arrays, "cfg.mc.reduction")),
        strict_supervision=bool(_scalar(arrays, "cfg.mc.strict_supervision")),
    )
    qe_cfg = QeConfig(reduction=int(_scalar(arrays, "cfg.qe.reduction")))
    mode_idx = int(_scalar(arrays, "cfg.neighbor_mode"))
    if not 0 <= mode_idx < len(NEIGHBOR_MODES):
        raise CheckpointFormatError(f"bad neighbor_mode code {mode_idx}")

    rng = np.random.default_rng(0)  # shapes only; data is replaced
    expected_mc = mc_subnet.mc_params(mc_cfg, rng)
    expected_qe = qe_subnet.qe_params(qe_cfg, rng, "qe.")
    expected_sf = qe_subnet.qe_params(qe_cfg, rng, "qe_sf.")
    svm = _svm_from_arrays(arrays) if "svm.scalars" in arrays else None
    return CheckpointBundle(
        mc=_collect_params(arrays, expected_mc, "mc."),
        qe=_collect_params(arrays, expected_qe, "qe."),
        qe_sf=_collect_params(arrays, expected_sf, "qe_sf."),
        mc_cfg=mc_cfg,
        qe_cfg=qe_cfg,
        neighbor_mode=NEIGHBOR_MODES[mode_idx],
        svm=svm,
    )
