"""Raw video I/O: Y4M (YUV4MPEG2) container and headerless planar YUV420.

Only the luma plane is ever processed by this package. Chroma planes are
carried through as opaque per-frame byte payloads and re-emitted untouched,
so a read/write cycle is lossless for both planes.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .errors import ArgumentError, TruncationError, VideoFormatError

Y4M_SIGNATURE = b"YUV4MPEG2"
FRAME_MARKER = b"FRAME"

# 4:2:0 colorspace tokens treated identically (chroma siting is irrelevant
# because chroma is opaque here).
ACCEPTED_COLORSPACES = ("C420", "C420jpeg", "C420mpeg2", "C420paldv")

MIN_FRAME_DIM = 16


@dataclass(frozen=True)
class LumaFrame:
    """Single 8-bit luma raster, row-major, at least 16x16."""

    pixels: np.ndarray  # uint8, shape (height, width)

    def __post_init__(self):
        p = self.pixels
        if not isinstance(p, np.ndarray) or p.ndim != 2 or p.dtype != np.uint8:
            raise ArgumentError("LumaFrame.pixels must be a 2-D uint8 array")
        if p.shape[0] < MIN_FRAME_DIM or p.shape[1] < MIN_FRAME_DIM:
            raise ArgumentError(
                f"frame dimensions {p.shape[1]}x{p.shape[0]} below the "
                f"{MIN_FRAME_DIM}x{MIN_FRAME_DIM} minimum"
            )
        p.setflags(write=False)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class VideoClip:
    """Ordered luma frames plus retained (never processed) chroma payloads."""

    frames: tuple[LumaFrame, ...]
    chroma: tuple[bytes, ...] | None = None
    frame_rate: Fraction = Fraction(25, 1)
    colorspace: str = "C420jpeg"

    def __post_init__(self):
        dims = {(f.width, f.height) for f in self.frames}
        if len(dims) > 1:
            raise ArgumentError(f"frames disagree on dimensions: {sorted(dims)}")
        if self.chroma is not None and len(self.chroma) != len(self.frames):
            raise ArgumentError("chroma payload count does not match frame count")
        if self.frame_rate <= 0:
            raise ArgumentError("frame rate must be positive")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    def luma_array(self) -> np.ndarray:
        """All luma planes stacked as a (frames, height, width) uint8 array."""
        return np.stack([f.pixels for f in self.frames])


@dataclass(frozen=True)
class ClipPair:
    """Aligned raw/compressed clips of identical geometry."""

    raw: VideoClip
    compressed: VideoClip

    def __post_init__(self):
        if len(self.raw) != len(self.compressed):
            raise ArgumentError(
                f"frame counts differ: raw {len(self.raw)} vs "
                f"compressed {len(self.compressed)}"
            )
        if len(self.raw) and (
            self.raw.width != self.compressed.width
            or self.raw.height != self.compressed.height
        ):
            raise ArgumentError("raw and compressed dimensions differ")

    def __len__(self) -> int:
        return len(self.raw)


def clip_from_arrays(
    planes: Iterable[np.ndarray],
    frame_rate: Fraction = Fraction(25, 1),
    chroma: Sequence[bytes] | None = None,
) -> VideoClip:
    """Build a clip from uint8 (h, w) luma arrays."""
    frames = tuple(LumaFrame(np.ascontiguousarray(p, dtype=np.uint8)) for p in planes)
    return VideoClip(
        frames=frames,
        chroma=tuple(chroma) if chroma is not None else None,
        frame_rate=frame_rate,
    )


def _as_stream(source) -> BinaryIO:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return io.BytesIO(bytes(source))
    return source


def _read_line(stream: BinaryIO, what: str) -> bytes:
    """Read bytes up to (not including) the next newline."""
    out = bytearray()
    while True:
        b = stream.read(1)
        if not b:
            raise VideoFormatError(f"stream ended inside {what}")
        if b == b"\n":
            return bytes(out)
        out += b
        if len(out) > 4096:
            raise VideoFormatError(f"{what} exceeds 4096 bytes without newline")


def _parse_ratio(token: bytes, name: str) -> Fraction:
    body = token[1:].decode("ascii", "replace")
    num, sep, den = body.partition(":")
    if not sep or not num.isdigit() or not den.isdigit() or int(den) == 0:
        raise VideoFormatError(f"malformed {name} token {token.decode('ascii', 'replace')!r}")
    return Fraction(int(num), int(den))


def read_y4m(source) -> VideoClip:
    """Parse a Y4M byte stream (or bytes) into a VideoClip.

    Luma goes into LumaFrames; the U+V payload of each frame is retained
    verbatim. Interlacing tokens other than Ip are accepted and ignored.
    """
    stream = _as_stream(source)
    header = _read_line(stream, "Y4M header")
    tokens = header.split(b" ")
    if tokens[0] != Y4M_SIGNATURE:
        raise VideoFormatError("missing YUV4MPEG2 signature")

    width = height = None
    rate = Fraction(25, 1)
    colorspace = "C420"
    for tok in tokens[1:]:
        if not tok:
            continue
        key = tok[:1]
        if key == b"W":
            if not tok[1:].isdigit():
                raise VideoFormatError(f"malformed W token {tok!r}")
            width = int(tok[1:])
        elif key == b"H":
            if not tok[1:].isdigit():
                raise VideoFormatError(f"malformed H token {tok!r}")
            height = int(tok[1:])
        elif key == b"F":
            rate = _parse_ratio(tok, "frame-rate")
        elif key == b"C":
            name = tok.decode("ascii", "replace")
            if name not in ACCEPTED_COLORSPACES:
                raise VideoFormatError(f"unsupported colorspace token {name!r}")
            colorspace = name
        elif key in (b"I", b"A", b"X"):
            pass  # interlacing/aspect/comments: accepted, not interpreted
        else:
            pass  # unknown extension tokens are not treated as malformed

    if width is None or height is None:
        raise VideoFormatError("header lacks W or H token")
    if width % 2 or height % 2:
        raise VideoFormatError(f"odd dimensions {width}x{height} invalid for 4:2:0")

    luma_size = width * height
    chroma_size = (width // 2) * (height // 2) * 2

    frames: list[LumaFrame] = []
    chroma: list[bytes] = []
    index = 0
    while True:
        marker = stream.read(len(FRAME_MARKER))
        if not marker:
            break
        if marker != FRAME_MARKER:
            raise VideoFormatError(
                f"expected FRAME marker at frame {index}, got {marker!r}"
            )
        _read_line(stream, f"FRAME parameters of frame {index}")
        payload = stream.read(luma_size + chroma_size)
        if len(payload) != luma_size + chroma_size:
            raise TruncationError(
                f"frame {index} payload truncated "
                f"({len(payload)} of {luma_size + chroma_size} bytes)",
                frame_index=index,
            )
        plane = np.frombuffer(payload[:luma_size], dtype=np.uint8).reshape(height, width)
        frames.append(LumaFrame(plane.copy()))
        chroma.append(payload[luma_size:])
        index += 1

    return VideoClip(
        frames=tuple(frames),
        chroma=tuple(chroma),
        frame_rate=rate,
        colorspace=colorspace,
    )


def write_y4m(clip: VideoClip, sink: BinaryIO) -> None:
    """Serialize a clip as Y4M. Output is deterministic for identical input.

    Missing chroma payloads are synthesized as neutral (all samples 128).
    """
    if len(clip) == 0:
        raise ArgumentError("cannot write an empty clip")
    header = (
        f"YUV4MPEG2 W{clip.width} H{clip.height} "
        f"F{clip.frame_rate.numerator}:{clip.frame_rate.denominator} "
        f"Ip A1:1 {clip.colorspace}\n"
    ).encode("ascii")
    neutral = bytes([128]) * ((clip.width // 2) * (clip.height // 2) * 2)

    written = 0
    try:
        sink.write(header)
        written += len(header)
        for i, frame in enumerate(clip.frames):
            sink.write(b"FRAME\n")
            sink.write(frame.pixels.tobytes())
            chroma = clip.chroma[i] if clip.chroma is not None else neutral
            sink.write(chroma)
            written += 6 + frame.pixels.size + len(chroma)
    except OSError as exc:
        raise VideoFormatError(f"sink failed after {written} bytes: {exc}") from exc


def y4m_bytes(clip: VideoClip) -> bytes:
    buf = io.BytesIO()
    write_y4m(clip, buf)
    return buf.getvalue()


def read_raw_yuv420(source, width: int, height: int) -> VideoClip:
    """Parse headerless planar I420 data with out-of-band dimensions."""
    if width % 2 or height % 2:
        raise ArgumentError(f"dimensions {width}x{height} must be even for 4:2:0")
    stream = _as_stream(source)
    data = stream.read()
    frame_size = width * height * 3 // 2
    if len(data) % frame_size:
        raise TruncationError(
            f"stream length {len(data)} is not a multiple of the "
            f"{frame_size}-byte frame size",
            frame_index=len(data) // frame_size,
        )
    luma_size = width * height
    frames = []
    chroma = []
    for off in range(0, len(data), frame_size):
        plane = np.frombuffer(data[off : off + luma_size], dtype=np.uint8)
        frames.append(LumaFrame(plane.reshape(height, width).copy()))
        chroma.append(data[off + luma_size : off + frame_size])
    return VideoClip(frames=tuple(frames), chroma=tuple(chroma))
