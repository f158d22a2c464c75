import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from dymapia.imgcore import (
    ShapeError,
    as_frame,
    as_mask,
    closing,
    dilate,
    erode,
    mask_apply,
    mask_or,
    opening,
    overlay,
    read_image,
    read_mask,
    refine,
    resize_bilinear,
    to_luma,
    write_frame,
    write_mask,
)

masks = arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.integers(0, 1))


def brute_erode(m, side=3):
    r = side // 2
    p = np.pad(m, r)
    out = np.zeros_like(m)
    for y in range(m.shape[0]):
        for x in range(m.shape[1]):
            out[y, x] = p[y : y + side, x : x + side].min()
    return out


def brute_dilate(m, side=3):
    r = side // 2
    p = np.pad(m, r)
    out = np.zeros_like(m)
    for y in range(m.shape[0]):
        for x in range(m.shape[1]):
            out[y, x] = p[y : y + side, x : x + side].max()
    return out


class TestValidation:
    def test_frame_must_be_2d(self):
        with pytest.raises(ShapeError):
            as_frame(np.zeros((2, 2, 2)))

    def test_frame_rejects_nan(self):
        with pytest.raises(ValueError):
            as_frame(np.array([[0.0, np.nan]]))

    def test_min_side(self):
        with pytest.raises(ShapeError):
            as_frame(np.zeros((8, 20)), min_side=16)

    def test_mask_values(self):
        with pytest.raises(ValueError):
            as_mask(np.array([[0, 2]]))
        assert as_mask(np.array([[True, False]])).dtype == np.uint8


class TestMaskApply:
    def test_zero_mask_annihilates(self):
        f = np.random.default_rng(0).random((6, 7))
        assert not mask_apply(f, np.zeros((6, 7), np.uint8)).any()

    def test_one_mask_is_identity(self):
        f = np.random.default_rng(1).random((6, 7))
        np.testing.assert_array_equal(mask_apply(f, np.ones((6, 7), np.uint8)), f)

    def test_single_pixel(self):
        f = np.full((5, 5), 0.3)
        f[2, 3] = 0.7
        m = np.zeros((5, 5), np.uint8)
        m[2, 3] = 1
        out = mask_apply(f, m)
        assert out[2, 3] == 0.7
        out[2, 3] = 0
        assert not out.any()

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mask_apply(np.zeros((4, 4)), np.zeros((4, 5), np.uint8))


class TestMaskOr:
    def test_examples(self):
        z, o = np.zeros((3, 3), np.uint8), np.ones((3, 3), np.uint8)
        assert not mask_or([z, z]).any()
        assert mask_or([z, o]).all()
        a, b = z.copy(), z.copy()
        a[0, 0] = 1
        b[1, 1] = 1
        assert set(zip(*np.nonzero(mask_or([a, b])))) == {(0, 0), (1, 1)}

    def test_rejects_empty_and_mismatched(self):
        with pytest.raises(ValueError):
            mask_or([])
        with pytest.raises(ShapeError):
            mask_or([np.zeros((2, 2), np.uint8), np.zeros((3, 3), np.uint8)])

    @given(masks, st.data())
    def test_algebra(self, a, data):
        b = data.draw(arrays(np.uint8, a.shape, elements=st.integers(0, 1)))
        c = data.draw(arrays(np.uint8, a.shape, elements=st.integers(0, 1)))
        np.testing.assert_array_equal(mask_or([a]), a)
        np.testing.assert_array_equal(mask_or([a, a]), a)
        np.testing.assert_array_equal(mask_or([a, b]), mask_or([b, a]))
        np.testing.assert_array_equal(mask_or([mask_or([a, b]), c]), mask_or([a, mask_or([b, c])]))

    @given(masks, st.data())
    def test_support_of_masked_union(self, a, data):
        b = data.draw(arrays(np.uint8, a.shape, elements=st.integers(0, 1)))
        f = np.random.default_rng(a.size).random(a.shape) + 0.1
        union = mask_apply(f, mask_or([a, b])) != 0
        parts = (mask_apply(f, a) != 0) | (mask_apply(f, b) != 0)
        np.testing.assert_array_equal(union, parts)


class TestMorphology:
    def test_speck_removed(self):
        m = np.zeros((9, 9), np.uint8)
        m[4, 4] = 1
        assert not refine(m).any()

    def test_square_preserved(self):
        m = np.zeros((20, 20), np.uint8)
        m[5:15, 5:15] = 1
        np.testing.assert_array_equal(refine(m), m)
        np.testing.assert_array_equal(brute_dilate(brute_erode(m)), m)

    def test_zero_stays_zero(self):
        assert not refine(np.zeros((6, 6), np.uint8)).any()

    def test_border_erodes(self):
        e = erode(np.ones((4, 4), np.uint8))
        assert not e[0].any() and not e[:, -1].any()
        assert e[1:3, 1:3].all()

    @given(masks)
    def test_matches_brute_force(self, m):
        np.testing.assert_array_equal(erode(m), brute_erode(m))
        np.testing.assert_array_equal(dilate(m), brute_dilate(m))

    @given(masks, st.sampled_from([1, 3, 5]))
    def test_order_properties(self, m, side):
        e, d = erode(m, side), dilate(m, side)
        assert np.all(e <= m) and np.all(m <= d)
        o, c = opening(m, side), closing(m, side)
        assert np.all(o <= m) and np.all(c >= m)
        np.testing.assert_array_equal(opening(o, side), o)
        np.testing.assert_array_equal(closing(c, side), c)
        r = refine(m, side)
        assert r.dtype == np.uint8 and set(np.unique(r)) <= {0, 1}

    def test_closing_keeps_border_pixels(self):
        m = np.zeros((8, 8), np.uint8)
        m[0, :] = 1
        np.testing.assert_array_equal(closing(m), m)
        assert closing(np.ones((4, 4), np.uint8)).all()

    def test_even_side_rejected(self):
        with pytest.raises(ValueError):
            erode(np.zeros((4, 4), np.uint8), 2)


class TestIO:
    def test_luma_coefficients(self):
        rgb = np.array([[[255, 255, 255], [255, 0, 0]]], dtype=np.uint8)
        y = to_luma(rgb / 255.0)
        assert y[0, 0] == pytest.approx(1.0)
        assert y[0, 1] == pytest.approx(0.299)

    def test_rgb_file_to_luma(self, tmp_path):
        Image.fromarray(np.array([[[255, 0, 0]]], dtype=np.uint8), "RGB").save(tmp_path / "a.png")
        assert read_image(tmp_path / "a.png")[0, 0] == pytest.approx(0.299)

    def test_frame_round_trip(self, tmp_path):
        f = np.linspace(0, 1, 64).reshape(8, 8)
        write_frame(tmp_path / "f.png", f)
        np.testing.assert_allclose(read_image(tmp_path / "f.png"), f, atol=0.5 / 255 + 1e-12)

    def test_mask_round_trip(self, tmp_path):
        m = (np.arange(20).reshape(4, 5) % 3 == 0).astype(np.uint8)
        write_mask(tmp_path / "m.png", m)
        with Image.open(tmp_path / "m.png") as img:
            assert set(np.unique(np.asarray(img))) <= {0, 255}
        np.testing.assert_array_equal(read_mask(tmp_path / "m.png"), m)

    def test_unreadable(self, tmp_path):
        (tmp_path / "bad.png").write_bytes(b"nope")
        with pytest.raises(OSError):
            read_image(tmp_path / "bad.png")

    def test_overlay_paints_red(self):
        m = np.zeros((3, 3), np.uint8)
        m[1, 1] = 1
        rgb = overlay(np.zeros((3, 3)), m)
        assert rgb.shape == (3, 3, 3)
        assert rgb[1, 1, 0] > rgb[1, 1, 1]
        assert not rgb[0, 0].any()


class TestResize:
    def test_identity(self):
        f = np.random.default_rng(0).random((5, 6))
        np.testing.assert_array_equal(resize_bilinear(f, 5, 6), f)

    @settings(max_examples=25)
    @given(st.floats(0, 1), st.integers(2, 20), st.integers(2, 20))
    def test_constant_preserved(self, c, h, w):
        out = resize_bilinear(np.full((7, 9), c), h, w)
        assert out.shape == (h, w)
        np.testing.assert_allclose(out, c, atol=1e-12)
