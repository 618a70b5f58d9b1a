"""Checkpoint container, bundle persistence, sample building, joint
training, enhancement routing, and evaluation."""

import io
import struct

import numpy as np
import pytest

from mfqe import checkpoint as ck
from mfqe import engine, metrics, pipeline
from mfqe.detector import DetectionResult
from mfqe.errors import (
    ArgumentError,
    CheckpointFormatError,
    TrainingDivergedError,
)
from mfqe.mc_subnet import McConfig, mc_params
from mfqe.qe_subnet import QeConfig, qe_params
from mfqe.svm import SvmModel
from mfqe.video_io import ClipPair, VideoClip, clip_from_arrays


def unit_patch(seed, size=64):
    rng = np.random.default_rng(seed)
    return rng.random((size, size), dtype=np.float32)


def sample_from_seed(seed):
    planes = [unit_patch(seed * 10 + i) for i in range(6)]
    return pipeline.TrainingSample(*planes)


def toy_clip_pair(frames=10, h=64, w=64, seed=0, qstep=18.0):
    """Raw clip plus a noisy stand-in for its compressed version."""
    rng = np.random.default_rng(seed)
    base = rng.integers(30, 220, size=(h, w)).astype(np.float64)
    raws, comps = [], []
    for t in range(frames):
        plane = np.clip(base + 4.0 * np.sin(t / 3.0), 0, 255)
        noise = rng.normal(0.0, qstep * (1.0 + (t % 4)) / 8.0, size=plane.shape)
        raws.append(plane.astype(np.uint8))
        comps.append(np.clip(plane + noise, 0, 255).astype(np.uint8))
    return ClipPair(raw=clip_from_arrays(raws), compressed=clip_from_arrays(comps))


def detection_for(labels):
    probs = tuple(0.9 if l else 0.1 for l in labels)
    return DetectionResult(labels=tuple(labels), probs=probs, refined=True)


def period4_detection(n):
    return detection_for([1 if t % 4 == 0 else 0 for t in range(n)])


class TestContainer:
    def test_round_trip_values_and_dtypes(self):
        arrays = {
            "w": np.arange(24, dtype=np.float64).reshape(2, 3, 4),
            "b": np.array([-1.5, 2.25], dtype=np.float32),
            "s": np.float32(7.0),  # rank 0, stored as shape (1,)
        }
        buf = io.BytesIO()
        ck.write_container(buf, arrays)
        buf.seek(0)
        back = ck.read_container(buf)
        assert set(back) == set(arrays)
        for name in arrays:
            assert back[name].dtype == np.float32
            assert np.array_equal(
                back[name], np.atleast_1d(np.asarray(arrays[name], dtype=np.float32)))
        assert back["s"].shape == (1,)

    def test_insertion_order_does_not_change_bytes(self):
        a = {"x": np.ones(3), "y": np.zeros(2)}
        b = {"y": np.zeros(2), "x": np.ones(3)}
        buf_a, buf_b = io.BytesIO(), io.BytesIO()
        ck.write_container(buf_a, a)
        ck.write_container(buf_b, b)
        assert buf_a.getvalue() == buf_b.getvalue()

    def test_empty_rejected(self):
        with pytest.raises(ArgumentError):
            ck.write_container(io.BytesIO(), {})

    def _valid_bytes(self):
        buf = io.BytesIO()
        ck.write_container(buf, {"x": np.arange(4, dtype=np.float32)})
        return buf.getvalue()

    def test_bad_magic(self):
        blob = b"JUNK" + self._valid_bytes()[4:]
        with pytest.raises(CheckpointFormatError, match="magic"):
            ck.read_container(io.BytesIO(blob))

    def test_bad_version(self):
        blob = bytearray(self._valid_bytes())
        blob[4:8] = struct.pack("<I", 99)
        with pytest.raises(CheckpointFormatError, match="version"):
            ck.read_container(io.BytesIO(bytes(blob)))

    def test_truncation_at_every_boundary(self):
        blob = self._valid_bytes()
        for cut in (2, 6, 10, 13, len(blob) - 3):
            with pytest.raises(CheckpointFormatError, match="truncated"):
                ck.read_container(io.BytesIO(blob[:cut]))

    def test_trailing_bytes(self):
        with pytest.raises(CheckpointFormatError, match="trailing"):
            ck.read_container(io.BytesIO(self._valid_bytes() + b"\x00"))

    def test_unknown_dtype_code(self):
        blob = bytearray(self._valid_bytes())
        # entry header sits after magic(4) + version/count(8) + namelen(2) + name(1)
        blob[15] = 9
        with pytest.raises(CheckpointFormatError, match="dtype"):
            ck.read_container(io.BytesIO(bytes(blob)))

    def test_duplicate_entry(self):
        entry = struct.pack("<H", 1) + b"x" + struct.pack("<BB", 0, 1)
        entry += struct.pack("<I", 1) + struct.pack("<f", 3.0)
        blob = ck.MAGIC + struct.pack("<II", ck.VERSION, 2) + entry + entry
        with pytest.raises(CheckpointFormatError, match="duplicate"):
            ck.read_container(io.BytesIO(blob))


def toy_svm():
    # values chosen exactly representable in float32: the container
    # stores everything at that precision
    return SvmModel(
        support_vectors=np.array([[0.5, -1.0, 2.0], [1.5, 0.25, -0.75]]),
        dual_coefs=np.array([0.75, -0.75]),
        bias=0.125,
        gamma=0.5,
        platt_a=-1.5,
        platt_b=0.25,
        mean=np.array([0.125, 0.25, 0.5]),
        std=np.array([1.0, 2.0, 4.0]),
        converged=True,
    )


class TestSvmPersistence:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "det.ckpt"
        model = toy_svm()
        ck.save_svm(path, model)
        back = ck.load_svm(path)
        assert np.array_equal(back.support_vectors, model.support_vectors)
        assert np.array_equal(back.dual_coefs, model.dual_coefs)
        assert (back.bias, back.gamma) == (model.bias, model.gamma)
        assert (back.platt_a, back.platt_b) == (model.platt_a, model.platt_b)
        assert back.converged is True
        assert back.support_vectors.dtype == np.float64

    def test_missing_entry(self, tmp_path):
        path = tmp_path / "det.ckpt"
        arrays = ck._svm_arrays(toy_svm())
        del arrays["svm.mean"]
        ck.save_arrays(path, arrays)
        with pytest.raises(CheckpointFormatError, match="classifier"):
            ck.load_svm(path)

    def test_bad_scalar_block(self, tmp_path):
        path = tmp_path / "det.ckpt"
        arrays = ck._svm_arrays(toy_svm())
        arrays["svm.scalars"] = np.zeros(3)
        ck.save_arrays(path, arrays)
        with pytest.raises(CheckpointFormatError, match="scalar"):
            ck.load_svm(path)


def small_bundle(neighbor_mode="nearest_pqf", svm=None, seed=0):
    rng = np.random.default_rng(seed)
    mc_cfg = McConfig(max_displacement=3.0, reduction=8)
    qe_cfg = QeConfig(reduction=16)
    return ck.CheckpointBundle(
        mc=mc_params(mc_cfg, rng),
        qe=qe_params(qe_cfg, rng),
        qe_sf=qe_params(qe_cfg, rng, prefix="qe_sf."),
        mc_cfg=mc_cfg,
        qe_cfg=qe_cfg,
        neighbor_mode=neighbor_mode,
        svm=svm,
    )


class TestBundle:
    def test_round_trip_params_configs_mode(self, tmp_path):
        path = tmp_path / "m.ckpt"
        bundle = small_bundle(neighbor_mode="adjacent_frames", svm=toy_svm())
        ck.save_bundle(path, bundle)
        back = ck.load_bundle(path)
        assert back.mc_cfg == bundle.mc_cfg
        assert back.qe_cfg == bundle.qe_cfg
        assert back.neighbor_mode == "adjacent_frames"
        assert back.svm is not None
        assert np.array_equal(back.svm.dual_coefs, bundle.svm.dual_coefs)
        for group, loaded in (("mc", back.mc), ("qe", back.qe), ("qe_sf", back.qe_sf)):
            source = getattr(bundle, group)
            assert set(loaded) == set(source)
            for name in source:
                assert np.array_equal(loaded[name].data, source[name].data), name

    def test_save_is_deterministic(self, tmp_path):
        bundle = small_bundle()
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        ck.save_bundle(p1, bundle)
        ck.save_bundle(p2, bundle)
        assert p1.read_bytes() == p2.read_bytes()

    def test_svm_optional(self, tmp_path):
        path = tmp_path / "m.ckpt"
        ck.save_bundle(path, small_bundle(svm=None))
        assert ck.load_bundle(path).svm is None

    def _tampered(self, tmp_path, mutate):
        src = tmp_path / "src.ckpt"
        ck.save_bundle(src, small_bundle())
        arrays = ck.load_arrays(src)
        mutate(arrays)
        out = tmp_path / "bad.ckpt"
        ck.save_arrays(out, arrays)
        return out

    def test_missing_parameter(self, tmp_path):
        path = self._tampered(tmp_path, lambda a: a.pop("qe.conv9.w"))
        with pytest.raises(CheckpointFormatError, match="missing"):
            ck.load_bundle(path)

    def test_wrong_shape(self, tmp_path):
        path = self._tampered(
            tmp_path, lambda a: a.update({"mc.coarse1.b": np.zeros(99)}))
        with pytest.raises(CheckpointFormatError, match="shape"):
            ck.load_bundle(path)

    def test_stray_group_entry(self, tmp_path):
        path = self._tampered(
            tmp_path, lambda a: a.update({"mc.bogus.w": np.zeros(2)}))
        with pytest.raises(CheckpointFormatError, match="unexpected"):
            ck.load_bundle(path)

    def test_bad_neighbor_mode_code(self, tmp_path):
        path = self._tampered(
            tmp_path, lambda a: a.update({"cfg.neighbor_mode": np.array([7.0])}))
        with pytest.raises(CheckpointFormatError, match="neighbor_mode"):
            ck.load_bundle(path)

    def test_missing_config_entry(self, tmp_path):
        path = self._tampered(tmp_path, lambda a: a.pop("cfg.qe.reduction"))
        with pytest.raises(CheckpointFormatError, match="config"):
            ck.load_bundle(path)


class TestTrainingTypes:
    def test_training_sample_shape_checked(self):
        good = unit_patch(0)
        bad = unit_patch(1, size=32)
        with pytest.raises(ArgumentError, match="64"):
            pipeline.TrainingSample(good, good, good, good, good, bad)

    def test_loss_weights(self):
        pipeline.LossWeights(1.0, 0.0)
        pipeline.LossWeights(0.0, 1.0)
        with pytest.raises(ArgumentError):
            pipeline.LossWeights(-0.1, 1.0)
        with pytest.raises(ArgumentError):
            pipeline.LossWeights(0.0, 0.0)

    def test_schedule_validation(self):
        with pytest.raises(ArgumentError):
            pipeline.Schedule(total_steps=0)
        with pytest.raises(ArgumentError):
            pipeline.Schedule(total_steps=10, max_phase1_steps=11)
        with pytest.raises(ArgumentError):
            pipeline.Schedule(total_steps=10, batch_size=0)
        with pytest.raises(ArgumentError):
            pipeline.Schedule(total_steps=10, lr=0.0)

    def test_phase1_cap_defaults_to_half(self):
        assert pipeline.Schedule(total_steps=10).phase1_cap == 5
        assert pipeline.Schedule(total_steps=10, max_phase1_steps=2).phase1_cap == 2


class TestReferenceIndices:
    def test_nearest_pqf_interior(self):
        assert pipeline._reference_indices(6, 12, (0, 4, 8), "nearest_pqf") == (4, 8)
        assert pipeline._reference_indices(2, 12, (0, 4, 8), "nearest_pqf") == (0, 4)

    def test_nearest_pqf_boundary_duplicates(self):
        assert pipeline._reference_indices(1, 8, (3,), "nearest_pqf") == (3, 3)
        assert pipeline._reference_indices(5, 8, (3,), "nearest_pqf") == (3, 3)

    def test_adjacent_frames(self):
        assert pipeline._reference_indices(3, 10, (), "adjacent_frames") == (2, 4)
        assert pipeline._reference_indices(0, 10, (), "adjacent_frames") == (1, 1)
        assert pipeline._reference_indices(9, 10, (), "adjacent_frames") == (8, 8)

    def test_unknown_mode(self):
        with pytest.raises(ArgumentError, match="neighbor_mode"):
            pipeline._reference_indices(1, 4, (0,), "sideways")


class TestBuildSamples:
    def test_counts_and_patch_contents(self):
        pair = toy_clip_pair(frames=10)
        det = period4_detection(10)
        build = pipeline.build_samples([pair], [det], patch_stride=48, seed=3)
        # 64x64 frames give one origin per frame; 7 of 10 frames are non-keyframes
        assert len(build) == 7
        assert build.skipped_clips == 0
        sample = build.samples[0]
        comp0 = pair.compressed.frames[1].pixels.astype(np.float32) / 255.0
        assert np.array_equal(sample.f_np, comp0)

    def test_references_follow_mode(self):
        pair = toy_clip_pair(frames=10)
        det = period4_detection(10)
        near = pipeline.build_samples([pair], [det], "nearest_pqf", seed=0)
        adj = pipeline.build_samples([pair], [det], "adjacent_frames", seed=0)
        # frame 1: nearest keyframes are 0 and 4; adjacent references are 0 and 2
        raw1 = pair.raw.frames[2].pixels.astype(np.float32) / 255.0
        assert np.array_equal(adj.samples[0].f_r_p2, raw1)
        raw4 = pair.raw.frames[4].pixels.astype(np.float32) / 255.0
        assert np.array_equal(near.samples[0].f_r_p2, raw4)

    def test_deterministic_for_seed(self):
        pair = toy_clip_pair(frames=8, h=96, w=96)
        det = period4_detection(8)
        b1 = pipeline.build_samples([pair], [det], patch_stride=20, seed=11)
        b2 = pipeline.build_samples([pair], [det], patch_stride=20, seed=11)
        assert len(b1) == len(b2) > 6
        for s1, s2 in zip(b1.samples, b2.samples):
            assert np.array_equal(s1.f_np, s2.f_np)

    def test_zero_keyframe_clips_are_skipped(self):
        pair = toy_clip_pair(frames=6)
        empty = detection_for([0] * 6)
        det = period4_detection(6)
        build = pipeline.build_samples([pair, pair], [empty, det])
        assert build.skipped_clips == 1
        assert len(build) == 4

    def test_small_frames_rejected(self):
        rng = np.random.default_rng(0)
        planes = [rng.integers(0, 255, (32, 48)).astype(np.uint8) for _ in range(5)]
        clip = clip_from_arrays(planes)
        pair = ClipPair(raw=clip, compressed=clip)
        with pytest.raises(ArgumentError, match="smaller"):
            pipeline.build_samples([pair], [period4_detection(5)])

    def test_misaligned_inputs_rejected(self):
        pair = toy_clip_pair(frames=6)
        with pytest.raises(ArgumentError, match="detection"):
            pipeline.build_samples([pair], [])
        with pytest.raises(ArgumentError, match="aligned"):
            pipeline.build_samples([pair], [period4_detection(7)])

    def test_pqf_samples_are_triplicated(self):
        pair = toy_clip_pair(frames=10)
        build = pipeline.build_pqf_samples([pair], [period4_detection(10)])
        assert len(build) == 3  # keyframes 0, 4, 8
        for s in build.samples:
            assert np.array_equal(s.f_np, s.f_p1)
            assert np.array_equal(s.f_np, s.f_p2)
            assert np.array_equal(s.f_r_np, s.f_r_p1)


TOY_MC = McConfig(max_displacement=2.0, reduction=8)
TOY_QE = QeConfig(reduction=16)


def toy_samples(count=4):
    return tuple(sample_from_seed(s) for s in range(count))


class TestTrainMfcnn:
    def test_report_structure_and_phase_switch(self):
        sched = pipeline.Schedule(total_steps=6, batch_size=2, max_phase1_steps=3,
                                  switch_window=2)
        result = pipeline.train_mfcnn(toy_samples(), sched, TOY_MC, TOY_QE, seed=0)
        rep = result.report
        assert len(rep.total) == len(rep.l_mc) == len(rep.l_qe) == len(rep.phase) == 6
        assert rep.phase == (1, 1, 1, 2, 2, 2)
        assert rep.phase_switch_step == 3
        assert all(np.isfinite(rep.total))
        lines = rep.csv().splitlines()
        assert lines[0] == "step,l_mc,l_qe,total,phase"
        assert len(lines) == 7
        assert lines[1].startswith("0,")

    def test_deterministic_across_runs(self, tmp_path):
        sched = pipeline.Schedule(total_steps=4, batch_size=2)
        runs = []
        for _ in range(2):
            result = pipeline.train_mfcnn(toy_samples(), sched, TOY_MC, TOY_QE, seed=7)
            bundle = ck.CheckpointBundle(
                mc=result.mc, qe=result.qe,
                qe_sf=qe_params(TOY_QE, np.random.default_rng(1), "qe_sf."),
                mc_cfg=TOY_MC, qe_cfg=TOY_QE)
            path = tmp_path / f"run{len(runs)}.ckpt"
            ck.save_bundle(path, bundle)
            runs.append((result.report, path.read_bytes()))
        assert runs[0][0] == runs[1][0]
        assert runs[0][1] == runs[1][1]

    def test_pure_alignment_weights_reduce_to_mc_loss(self):
        weights = pipeline.LossWeights(1.0, 0.0)
        sched = pipeline.Schedule(total_steps=3, batch_size=2, phase1=weights,
                                  phase2=weights)
        result = pipeline.train_mfcnn(toy_samples(), sched, TOY_MC, TOY_QE, seed=2)
        assert result.report.total == result.report.l_mc

    def test_divergence_raises_with_history(self):
        # an inf in the final output bias keeps the warp finite but sends
        # the enhancement loss non-finite on the first step
        rng = np.random.default_rng(0)
        bad = qe_params(TOY_QE, rng)
        bad["qe.conv9.b"].data[0] = np.inf
        sched = pipeline.Schedule(total_steps=4, batch_size=2)
        with pytest.raises(TrainingDivergedError) as exc_info:
            pipeline.train_mfcnn(toy_samples(), sched, TOY_MC, TOY_QE, seed=0,
                                 init_qe=bad)
        err = exc_info.value
        assert err.step == 0
        assert len(err.recent_losses) == 1

    def test_input_validation(self):
        sched = pipeline.Schedule(total_steps=2)
        with pytest.raises(ArgumentError, match="sample"):
            pipeline.train_mfcnn([], sched, TOY_MC, TOY_QE)
        with pytest.raises(ArgumentError, match="clamp"):
            pipeline.train_mfcnn(toy_samples(1), sched, TOY_MC,
                                 QeConfig(reduction=16, clamp_output=True))

    def test_checkpoint_restores_losses_exactly(self, tmp_path):
        samples = toy_samples(2)
        sched = pipeline.Schedule(total_steps=3, batch_size=2)
        result = pipeline.train_mfcnn(samples, sched, TOY_MC, TOY_QE, seed=5)
        sf = qe_params(TOY_QE, np.random.default_rng(9), "qe_sf.")
        path = tmp_path / "m.ckpt"
        ck.save_bundle(path, ck.CheckpointBundle(
            mc=result.mc, qe=result.qe, qe_sf=sf, mc_cfg=TOY_MC, qe_cfg=TOY_QE))
        back = ck.load_bundle(path)

        batch = pipeline._batch_tensors(samples, np.array([0, 1]))
        l_mc_a, l_qe_a = pipeline.joint_losses(batch, result.mc, result.qe, TOY_MC, TOY_QE)
        l_mc_b, l_qe_b = pipeline.joint_losses(batch, back.mc, back.qe,
                                               back.mc_cfg, back.qe_cfg)
        assert float(l_mc_a.data) == float(l_mc_b.data)
        assert float(l_qe_a.data) == float(l_qe_b.data)


class TestTrainSingleFrame:
    def test_runs_and_reports_losses(self):
        params, losses = pipeline.train_single_frame(toy_samples(2), 3, TOY_QE,
                                                     seed=0, batch_size=2)
        assert len(losses) == 3
        assert all(np.isfinite(losses))
        assert all(name.startswith("qe_sf.") for name in params)

    def test_validation(self):
        with pytest.raises(ArgumentError):
            pipeline.train_single_frame([], 3, TOY_QE)
        with pytest.raises(ArgumentError):
            pipeline.train_single_frame(toy_samples(1), -1, TOY_QE)


def identity_bundle(neighbor_mode="nearest_pqf"):
    """Zeroed flow heads and output convs: enhancement is a no-op."""
    bundle = small_bundle(neighbor_mode=neighbor_mode)
    for key, param in bundle.mc.items():
        if ("_flow.w" in key) or ("_flow.b" in key):
            param.data = np.zeros_like(param.data)
    for group in (bundle.qe, bundle.qe_sf):
        for key, param in group.items():
            if "conv9" in key:
                param.data = np.zeros_like(param.data)
    return bundle


def patch_detect(monkeypatch, det):
    monkeypatch.setattr("mfqe.detector.detect", lambda clip, model, cfg: det)


class TestEnhanceClip:
    def test_identity_checkpoint_returns_input_exactly(self, monkeypatch):
        pair = toy_clip_pair(frames=8)
        det = period4_detection(8)
        patch_detect(monkeypatch, det)
        chroma = tuple(bytes([128 + t]) * (32 * 32 * 2) for t in range(8))
        clip = VideoClip(frames=pair.compressed.frames, chroma=chroma)
        result = pipeline.enhance_clip(clip, identity_bundle(), model=None)
        assert len(result.clip) == 8
        assert result.warning is None
        for before, after in zip(clip.frames, result.clip.frames):
            assert np.array_equal(before.pixels, after.pixels)
        assert result.clip.chroma == chroma
        assert result.clip.frame_rate == clip.frame_rate
        assert result.clip.colorspace == clip.colorspace
        expected = tuple("pqf_enhanced" if t % 4 == 0 else "nonpqf_enhanced"
                         for t in range(8))
        assert result.labels == expected

    def test_zero_detection_falls_back_to_single_frame(self, monkeypatch):
        pair = toy_clip_pair(frames=6)
        patch_detect(monkeypatch, detection_for([0] * 6))
        result = pipeline.enhance_clip(pair.compressed, identity_bundle(), model=None)
        assert result.warning is not None
        assert set(result.labels) == {"pqf_enhanced"}
        for before, after in zip(pair.compressed.frames, result.clip.frames):
            assert np.array_equal(before.pixels, after.pixels)

    def test_input_validation(self, monkeypatch):
        pair = toy_clip_pair(frames=2, h=64, w=64)
        patch_detect(monkeypatch, detection_for([0, 0]))
        with pytest.raises(ArgumentError, match="3 frames"):
            pipeline.enhance_clip(pair.compressed, identity_bundle(), model=None)
        rng = np.random.default_rng(0)
        odd = clip_from_arrays(
            [rng.integers(0, 255, (30, 30)).astype(np.uint8) for _ in range(5)])
        patch_detect(monkeypatch, detection_for([0] * 5))
        with pytest.raises(ArgumentError, match="divisible"):
            pipeline.enhance_clip(odd, identity_bundle(), model=None)

    def test_adjacent_mode_uses_neighbors(self, monkeypatch):
        # Non-keyframe output under an identity net does not depend on the
        # reference choice, so instead verify the routing splits by label.
        pair = toy_clip_pair(frames=8)
        patch_detect(monkeypatch, period4_detection(8))
        result = pipeline.enhance_clip(pair.compressed,
                                       identity_bundle("adjacent_frames"), model=None)
        assert result.labels[0] == "pqf_enhanced"
        assert result.labels[1] == "nonpqf_enhanced"


class TestEvaluateEnhancement:
    def test_identity_enhancement_scores_zero(self):
        pair = toy_clip_pair(frames=10)
        report = pipeline.evaluate_enhancement(pair.raw, pair.compressed,
                                               pair.compressed)
        assert report.delta_overall == 0.0
        assert report.delta_pqf == 0.0
        assert report.delta_nonpqf == 0.0
        assert report.std_after == report.std_before
        assert report.pvd_after == report.pvd_before
        assert report.pred_pqf == report.true_pqf
        lines = report.csv().splitlines()
        assert lines[0] == "frame,psnr_in,psnr_out,is_pqf_pred,is_pqf_true"
        assert len(lines) == 11

    def test_perfect_enhancement_hits_cap(self):
        pair = toy_clip_pair(frames=10)
        report = pipeline.evaluate_enhancement(pair.raw, pair.compressed, pair.raw)
        assert all(v == metrics.PSNR_CAP_DB for v in report.psnr_out)
        assert report.delta_overall > 0
        assert report.std_after == 0.0

    def test_provenance_labels_fill_pred_column(self):
        pair = toy_clip_pair(frames=6)
        labels = ("pqf_enhanced", "nonpqf_enhanced") * 3
        report = pipeline.evaluate_enhancement(pair.raw, pair.compressed,
                                               pair.compressed, labels)
        assert report.pred_pqf == (1, 0, 1, 0, 1, 0)
        with pytest.raises(ArgumentError, match="aligned"):
            pipeline.evaluate_enhancement(pair.raw, pair.compressed,
                                          pair.compressed, labels[:-1])
