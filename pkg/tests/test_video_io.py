import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfqe.errors import ArgumentError, TruncationError, VideoFormatError
from mfqe.video_io import (
    ClipPair,
    LumaFrame,
    VideoClip,
    clip_from_arrays,
    read_raw_yuv420,
    read_y4m,
    write_y4m,
    y4m_bytes,
)


def make_frame_bytes(w, h, fill):
    luma = bytes([fill]) * (w * h)
    chroma = bytes([fill ^ 0x55]) * ((w // 2) * (h // 2) * 2)
    return luma + chroma


def test_read_y4m_header_echo():
    payload = b"".join(
        b"FRAME\n" + make_frame_bytes(16, 16, i) for i in range(2)
    )
    data = b"YUV4MPEG2 W16 H16 F30:1 Ip A1:1 C420jpeg\n" + payload
    clip = read_y4m(data)
    assert len(clip) == 2
    assert clip.width == 16 and clip.height == 16
    assert clip.frame_rate == Fraction(30, 1)
    assert clip.colorspace == "C420jpeg"
    assert clip.frames[0].pixels[0, 0] == 0
    assert clip.frames[1].pixels[0, 0] == 1


def test_read_y4m_defaults_rate_and_colorspace():
    data = b"YUV4MPEG2 W16 H16\n" + b"FRAME\n" + make_frame_bytes(16, 16, 7)
    clip = read_y4m(data)
    assert clip.frame_rate == Fraction(25, 1)
    assert clip.colorspace == "C420"


def test_read_y4m_truncated_second_frame():
    f0 = b"FRAME\n" + make_frame_bytes(16, 16, 3)
    f1 = b"FRAME\n" + make_frame_bytes(16, 16, 4)[:-1]
    with pytest.raises(TruncationError) as exc:
        read_y4m(b"YUV4MPEG2 W16 H16 F30:1\n" + f0 + f1)
    assert exc.value.frame_index == 1


@pytest.mark.parametrize(
    "header",
    [
        b"YUV4MPEG2 W16 H16 C444\n",
        b"YUV4MPEG2 H16\n",
        b"YUV4MPEG2 W16\n",
        b"YUV4MPEG2 Wx H16\n",
        b"YUV4MPEG2 W16 H16 F30\n",
        b"YUV4MPEG2 W15 H16\n",
        b"NOTY4M W16 H16\n",
    ],
)
def test_read_y4m_malformed_headers(header):
    with pytest.raises(VideoFormatError):
        read_y4m(header + b"FRAME\n" + make_frame_bytes(16, 16, 0))


def test_write_y4m_header_and_neutral_chroma():
    clip = clip_from_arrays(
        [np.full((16, 16), 9, dtype=np.uint8)], frame_rate=Fraction(30, 1)
    )
    data = y4m_bytes(clip)
    assert data.startswith(b"YUV4MPEG2 W16 H16 F30:1")
    parsed = read_y4m(data)
    assert parsed.chroma[0] == bytes([128]) * 128


def test_write_y4m_deterministic():
    rng = np.random.default_rng(1)
    clip = clip_from_arrays(rng.integers(0, 256, (3, 16, 16), dtype=np.uint8))
    assert y4m_bytes(clip) == y4m_bytes(clip)


def test_write_empty_clip_rejected():
    with pytest.raises(ArgumentError):
        y4m_bytes(VideoClip(frames=()))


@st.composite
def clips(draw):
    w = draw(st.sampled_from([16, 18, 24]))
    h = draw(st.sampled_from([16, 20]))
    n = draw(st.integers(min_value=1, max_value=3))
    rng = np.random.default_rng(draw(st.integers(0, 2**31)))
    frames = rng.integers(0, 256, (n, h, w), dtype=np.uint8)
    chroma = tuple(
        rng.integers(0, 256, (w // 2) * (h // 2) * 2, dtype=np.uint8).tobytes()
        for _ in range(n)
    )
    num = draw(st.integers(1, 120))
    den = draw(st.integers(1, 4))
    return clip_from_arrays(frames, Fraction(num, den), chroma)


@given(clips())
@settings(max_examples=40, deadline=None)
def test_y4m_round_trip_is_lossless(clip):
    data = y4m_bytes(clip)
    back = read_y4m(data)
    assert len(back) == len(clip)
    assert back.frame_rate == clip.frame_rate
    for a, b in zip(clip.frames, back.frames):
        assert np.array_equal(a.pixels, b.pixels)
    assert back.chroma == clip.chroma
    # second serialization is byte-exact
    assert y4m_bytes(back) == data


@given(st.binary(max_size=600))
@settings(max_examples=150, deadline=None)
def test_y4m_parser_never_raises_unexpectedly(data):
    try:
        read_y4m(data)
    except VideoFormatError:
        pass


def test_read_raw_yuv420_frames():
    data = make_frame_bytes(16, 16, 1) + make_frame_bytes(16, 16, 2)
    clip = read_raw_yuv420(data, 16, 16)
    assert len(clip) == 2
    assert clip.frames[1].pixels[5, 5] == 2


def test_read_raw_yuv420_bad_length():
    with pytest.raises(TruncationError):
        read_raw_yuv420(b"\x00" * 100, 16, 16)


def test_read_raw_yuv420_odd_dims():
    with pytest.raises(ArgumentError):
        read_raw_yuv420(b"", 15, 16)


def test_read_raw_yuv420_empty_stream():
    clip = read_raw_yuv420(b"", 16, 16)
    assert len(clip) == 0


def test_luma_frame_validation():
    with pytest.raises(ArgumentError):
        LumaFrame(np.zeros((8, 16), dtype=np.uint8))
    with pytest.raises(ArgumentError):
        LumaFrame(np.zeros((16, 16), dtype=np.float32))


def test_clip_pair_validation():
    a = clip_from_arrays(np.zeros((2, 16, 16), dtype=np.uint8))
    b = clip_from_arrays(np.zeros((3, 16, 16), dtype=np.uint8))
    with pytest.raises(ArgumentError):
        ClipPair(raw=a, compressed=b)
