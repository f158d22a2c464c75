import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from dymapia.imgcore import mask_apply, write_mask
from dymapia.preprocess import (
    CANONICAL_LEFT_EYE,
    CANONICAL_RIGHT_EYE,
    FrameSequence,
    Landmarks,
    SegmentationError,
    SegmentationSource,
    SequenceGapError,
    align,
    align_mask,
    center_crop_resize,
    load_annotations,
    load_sequence,
    normalize,
    preprocess_frame,
    segment_face,
)


def canonical(size):
    return Landmarks(
        (CANONICAL_LEFT_EYE[0] * size, CANONICAL_LEFT_EYE[1] * size),
        (CANONICAL_RIGHT_EYE[0] * size, CANONICAL_RIGHT_EYE[1] * size),
    )


def smooth_frame(size=64, seed=0):
    from scipy import ndimage

    rng = np.random.default_rng(seed)
    return ndimage.gaussian_filter(rng.random((size, size)), 2.0)


def write_pgm(path, value):
    Image.fromarray(np.full((16, 16), value, dtype=np.uint8), "L").save(path)


class TestLoadSequence:
    def test_ten_frames_in_order(self, tmp_path):
        for t in range(10):
            write_pgm(tmp_path / f"{t:03d}.pgm", 10 * t)
        seq = load_sequence(tmp_path)
        assert len(seq) == 10
        assert [round(f[0, 0] * 255) for f in seq.frames] == [10 * t for t in range(10)]

    def test_frames_subdir(self, tmp_path):
        (tmp_path / "frames").mkdir()
        for t in range(3):
            write_pgm(tmp_path / "frames" / f"{t:06d}.png", 0)
        assert len(load_sequence(tmp_path)) == 3

    def test_gap_reported(self, tmp_path):
        for t in (0, 1, 3):
            write_pgm(tmp_path / f"{t:06d}.png", 0)
        with pytest.raises(SequenceGapError) as err:
            load_sequence(tmp_path)
        assert err.value.missing == [2]

    def test_empty_dir(self, tmp_path):
        with pytest.raises(OSError):
            load_sequence(tmp_path)

    def test_mixed_shapes_rejected(self):
        with pytest.raises(ValueError):
            FrameSequence([np.zeros((16, 16)), np.zeros((16, 17))])


class TestSegmentation:
    def test_ellipse(self):
        m = segment_face(np.zeros((100, 100)), SegmentationSource())
        assert m[50, 50] == 1 and m[0, 0] == 0
        assert 0.3 < m.mean() < 0.5

    def test_external_all_ones(self, tmp_path):
        write_mask(tmp_path / "000000.png", np.ones((20, 20), np.uint8))
        m = segment_face(np.zeros((20, 20)), SegmentationSource("external-mask", str(tmp_path)))
        assert m.all()

    def test_external_missing(self, tmp_path):
        with pytest.raises(SegmentationError):
            segment_face(np.zeros((20, 20)), SegmentationSource("external-mask", str(tmp_path)), t=4)

    def test_bounding_box(self, tmp_path):
        p = tmp_path / "ann.json"
        p.write_text(json.dumps([{"t": 0, "box": [10, 10, 50, 50]}]))
        m = segment_face(np.zeros((100, 100)), SegmentationSource("bounding-box", str(p)))
        expected = np.zeros((100, 100), np.uint8)
        expected[10:60, 10:60] = 1
        np.testing.assert_array_equal(m, expected)
        assert load_annotations(p)[0]["box"] == [10, 10, 50, 50]

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            SegmentationSource("mask-rcnn")


class TestAlign:
    def test_canonical_is_identity(self):
        f = smooth_frame()
        np.testing.assert_allclose(align(f, canonical(64), 64), f, atol=1e-6)

    def test_rotation_is_undone(self):
        f = smooth_frame()
        lm = canonical(64)
        rot = np.rot90(f)
        # np.rot90 sends (x, y) to (y, W-1-x).
        lm_rot = Landmarks((lm.left_eye[1], 63 - lm.left_eye[0]), (lm.right_eye[1], 63 - lm.right_eye[0]))
        ref = align(f, lm, 64)
        assert np.mean(np.abs(align(rot, lm_rot, 64) - ref)) < 1e-3

    def test_no_landmarks_crops(self):
        f = np.random.default_rng(0).random((40, 60))
        np.testing.assert_array_equal(align(f, None, 32), center_crop_resize(f, 32))

    def test_degenerate_landmarks_fall_back(self):
        f = np.random.default_rng(0).random((40, 40))
        lm = Landmarks((10.0, 10.0), (10.5, 10.0))
        np.testing.assert_array_equal(align(f, lm, 32), center_crop_resize(f, 32))

    def test_realign_is_stable(self):
        f = smooth_frame(seed=2)
        lm = Landmarks((20.0, 28.0), (44.0, 24.0))
        once = align(f, lm, 64)
        twice = align(once, canonical(64), 64)
        assert np.mean(np.abs(twice - once)) < 1e-3

    def test_mask_stays_binary(self):
        m = np.zeros((64, 64), np.uint8)
        m[10:50, 20:40] = 1
        out = align_mask(m, Landmarks((20.0, 28.0), (44.0, 24.0)), 64)
        assert set(np.unique(out)) <= {0, 1}


class TestNormalize:
    def test_constant(self):
        np.testing.assert_array_equal(normalize(np.full((8, 8), 0.8)), 0.5)

    def test_two_values(self):
        f = np.full((4, 4), 0.2)
        f[:, 2:] = 0.8
        out = normalize(f)
        np.testing.assert_allclose(out[:, :2], 0.0)
        np.testing.assert_allclose(out[:, 2:], 1.0)

    def test_outside_region_zero(self):
        f = np.random.default_rng(0).random((10, 10))
        r = np.zeros((10, 10), np.uint8)
        r[2:8, 2:8] = 1
        out = normalize(f, r)
        assert not out[r == 0].any()

    @settings(max_examples=50)
    @given(arrays(np.float64, (12, 12), elements=st.floats(0, 1)))
    def test_range_and_idempotence(self, f):
        out = normalize(f)
        assert out.min() >= 0.0 and out.max() <= 1.0
        if f.std() > 1e-6:
            again = normalize(out)
            # Idempotent when no value needed clipping.
            z = (f - f.mean()) / f.std()
            if np.abs(z).max() <= 3.0:
                np.testing.assert_allclose(again, out, atol=1e-6)


class TestPreprocessFrame:
    def test_composition_order(self):
        f = smooth_frame(seed=5)
        lm = Landmarks((20.0, 28.0), (44.0, 24.0))
        src = SegmentationSource()
        pre = preprocess_frame(f, src, 0, lm, 64)
        face = segment_face(f, src)
        expected = normalize(align(mask_apply(f, face), lm, 64), align_mask(face, lm, 64))
        np.testing.assert_array_equal(pre.frame, expected)

    def test_empty_face_is_skippable(self, tmp_path):
        write_mask(tmp_path / "000000.png", np.zeros((20, 20), np.uint8))
        pre = preprocess_frame(np.ones((20, 20)), SegmentationSource("external-mask", str(tmp_path)))
        assert pre.skippable

    def test_small_frame_rejected(self):
        with pytest.raises(ValueError):
            preprocess_frame(np.zeros((8, 8)))
