import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfqe.errors import ArgumentError
from mfqe.metrics import (
    FrameKind,
    QualityCurve,
    curve_stats,
    find_peaks_valleys,
    psnr,
    quality_curve,
)
from mfqe.video_io import ClipPair, LumaFrame, clip_from_arrays


def frame_of(value):
    return LumaFrame(np.full((16, 16), value, dtype=np.uint8))


def test_psnr_identical_frames_capped():
    assert psnr(frame_of(50), frame_of(50)) == 100.0


def test_psnr_unit_difference():
    assert psnr(frame_of(100), frame_of(101)) == pytest.approx(48.1308, abs=1e-3)


def test_psnr_maximal_difference():
    assert psnr(frame_of(0), frame_of(255)) == pytest.approx(0.0, abs=1e-12)


def test_psnr_symmetry():
    rng = np.random.default_rng(0)
    a = LumaFrame(rng.integers(0, 256, (16, 16), dtype=np.uint8))
    b = LumaFrame(rng.integers(0, 256, (16, 16), dtype=np.uint8))
    assert psnr(a, b) == psnr(b, a)


def test_psnr_dimension_mismatch():
    a = LumaFrame(np.zeros((16, 16), dtype=np.uint8))
    b = LumaFrame(np.zeros((16, 32), dtype=np.uint8))
    with pytest.raises(ArgumentError):
        psnr(a, b)


def test_quality_curve_identity_pair():
    clip = clip_from_arrays(np.zeros((3, 16, 16), dtype=np.uint8))
    curve = quality_curve(ClipPair(raw=clip, compressed=clip))
    assert np.all(curve.psnr == 100.0)


def test_quality_curve_single_frame():
    clip = clip_from_arrays(np.zeros((1, 16, 16), dtype=np.uint8))
    curve = quality_curve(ClipPair(raw=clip, compressed=clip))
    assert len(curve) == 1


def test_find_peaks_valleys_example():
    labels = find_peaks_valleys(QualityCurve(np.array([30.0, 32, 31, 33, 30])))
    assert labels.pqf_indices == (1, 3)
    assert labels.vqf_indices == (2,)


def test_find_peaks_valleys_monotone():
    labels = find_peaks_valleys(QualityCurve(np.arange(5, dtype=float)))
    assert labels.pqf_indices == ()
    assert labels.vqf_indices == ()


def test_find_peaks_valleys_plateau():
    labels = find_peaks_valleys(QualityCurve(np.array([30.0, 31, 31, 30])))
    assert labels.pqf_indices == ()


def test_find_peaks_valleys_short_curve():
    with pytest.raises(ArgumentError):
        find_peaks_valleys(QualityCurve(np.array([30.0, 31])))


def test_curve_stats_hand_example():
    curve = QualityCurve(np.array([30.0, 32, 31, 33, 30]))
    stats = curve_stats(curve, find_peaks_valleys(curve))
    assert stats.std_db == pytest.approx(1.1662, abs=1e-3)
    assert stats.per_pqf_pvd == (1.0, 2.0)
    assert stats.mean_pvd_db == pytest.approx(1.5)
    assert stats.per_gap_ps == (2,)
    assert stats.mean_ps_frames == pytest.approx(2.0)


def test_curve_stats_constant_curve():
    curve = QualityCurve(np.full(6, 40.0))
    stats = curve_stats(curve, find_peaks_valleys(curve))
    assert stats.std_db == 0.0
    assert stats.mean_pvd_db == 0.0
    assert stats.mean_ps_frames == 0.0


def test_curve_stats_shift_invariance():
    base = np.array([30.0, 32, 31, 33, 30, 34, 29])
    c1 = QualityCurve(base)
    c2 = QualityCurve(base + 7.5)
    l1, l2 = find_peaks_valleys(c1), find_peaks_valleys(c2)
    assert l1 == l2
    s1, s2 = curve_stats(c1, l1), curve_stats(c2, l2)
    assert s1.std_db == pytest.approx(s2.std_db)
    assert s1.per_pqf_pvd == pytest.approx(s2.per_pqf_pvd)
    assert s1.per_gap_ps == s2.per_gap_ps


def test_pvd_tie_breaks_toward_later_vqf():
    # PQF at 2 sits exactly between VQFs at 1 and 3
    curve = QualityCurve(np.array([35.0, 30, 36, 31, 35]))
    labels = find_peaks_valleys(curve)
    assert labels.pqf_indices == (2,)
    assert labels.vqf_indices == (1, 3)
    stats = curve_stats(curve, labels)
    assert stats.per_pqf_pvd == (pytest.approx(5.0),)  # 36 - 31, later valley


@given(
    st.lists(st.floats(20.0, 60.0, allow_nan=False), min_size=3, max_size=40),
    st.floats(-5.0, 5.0),
    st.floats(0.1, 3.0),
)
@settings(max_examples=80, deadline=None)
def test_labels_invariant_under_monotone_transform(values, shift, scale):
    curve = QualityCurve(np.array(values))
    transformed = QualityCurve(np.array(values) * scale + shift)
    assert find_peaks_valleys(curve) == find_peaks_valleys(transformed)


@given(st.lists(st.floats(0.0, 100.0, allow_nan=False), min_size=3, max_size=50))
@settings(max_examples=80, deadline=None)
def test_no_adjacent_peaks_and_endpoints_neither(values):
    labels = find_peaks_valleys(QualityCurve(np.array(values)))
    assert labels.kinds[0] is FrameKind.NEITHER
    assert labels.kinds[-1] is FrameKind.NEITHER
    pqfs = labels.pqf_indices
    for a, b in zip(pqfs, pqfs[1:]):
        assert b - a >= 2
