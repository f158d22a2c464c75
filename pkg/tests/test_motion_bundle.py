import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import block_match
from scipy import ndimage

from dymapia.anomaly import (
    FIELDS,
    AnalyzerConfig,
    FlowField,
    MaskBundle,
    build_bundle,
    dense_flow,
    frame_bundle,
    temporal_mask,
)
from dymapia.anomaly.bundle import assemble
from dymapia.imgcore import refine
from dymapia.synth import Region, render_source, splice


def texture(seed=0, size=48, sigma=2.0):
    f = ndimage.gaussian_filter(np.random.default_rng(seed).random((size, size)), sigma)
    return (f - f.min()) / (f.max() - f.min())


class TestDenseFlow:
    def test_identical_frames_exactly_zero(self):
        f = texture()
        flow = dense_flow(f, f)
        assert not flow.u.any() and not flow.v.any()

    def test_one_pixel_shift(self):
        f0 = texture(1)
        f1 = np.roll(f0, 1, axis=1)
        for y, x in [(12, 12), (20, 28), (28, 16)]:
            assert block_match(f0, f1, y, x) == (1, 0)
        flow = dense_flow(f0, f1)
        inner = (slice(8, -8), slice(8, -8))
        assert 0.7 <= flow.u[inner].mean() <= 1.3
        assert np.abs(flow.v[inner]).mean() < 0.3

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10_000))
    def test_finite(self, seed):
        rng = np.random.default_rng(seed)
        flow = dense_flow(rng.random((16, 16)), rng.random((16, 16)), AnalyzerConfig(flow_iters=30))
        assert np.all(np.isfinite(flow.u)) and np.all(np.isfinite(flow.v))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            dense_flow(np.zeros((16, 16)), np.zeros((16, 17)))


class TestTemporalMask:
    def test_zero_and_constant_flow(self):
        assert not temporal_mask(FlowField.zeros((32, 32))).any()
        assert not temporal_mask(FlowField(np.ones((32, 32)), np.zeros((32, 32)))).any()

    def test_reversed_block(self):
        u = np.ones((32, 32))
        u[14:18, 14:18] = -1.0
        m = temporal_mask(FlowField(u, np.zeros_like(u))).astype(bool)
        gt = np.zeros_like(m)
        gt[14:18, 14:18] = True
        assert m[gt].mean() >= 0.5
        assert m.sum() <= 4 * gt.sum()

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from([-2.0, 0.5, 3.0]))
    def test_offset_invariance(self, seed, offset):
        rng = np.random.default_rng(seed)
        # Values on a 1/16 grid keep the offset arithmetic exact.
        u = rng.integers(-16, 17, (20, 20)) / 16.0
        v = rng.integers(-16, 17, (20, 20)) / 16.0
        base = temporal_mask(FlowField(u, v))
        shifted = temporal_mask(FlowField(u + offset, v - offset))
        np.testing.assert_array_equal(base, shifted)

    def test_non_finite_rejected(self):
        u = np.zeros((8, 8))
        u[0, 0] = np.nan
        with pytest.raises(ValueError):
            temporal_mask(FlowField(u, np.zeros_like(u)))


class TestBundle:
    def test_constant_sequence_is_empty(self):
        bundles = build_bundle([np.full((32, 32), 0.5)] * 3, AnalyzerConfig(flow_iters=10))
        assert len(bundles) == 3
        for b in bundles:
            for name in FIELDS:
                assert not getattr(b, name).any()

    def test_refined_is_refine_of_combined(self):
        seq = render_source(3, side=64, n_frames=3)
        for b in build_bundle(seq, AnalyzerConfig(flow_iters=20)):
            np.testing.assert_array_equal(b.refined, refine(b.combined))
            for m in b.modality_masks():
                assert np.all(b.combined >= m)

    def test_splice_recall_monotone(self):
        seq = render_source(1, side=128, n_frames=2)
        donor = render_source(2, side=128, n_frames=1).frames[0]
        region = Region(40, 40, 36, 36)
        fake, gt = splice(seq.frames[0], donor, region)
        b = frame_bundle(fake, AnalyzerConfig(), dense_flow(fake, seq.frames[1]))
        gt = gt.astype(bool)
        recalls = {name: b.masks()[name][gt].mean() for name in FIELDS}
        assert recalls["combined"] >= max(recalls[m] for m in ("freq", "tex", "edge", "temp"))

    def test_parallel_matches_serial(self):
        seq = render_source(4, side=48, n_frames=4)
        cfg = AnalyzerConfig(flow_iters=15)
        a = build_bundle(seq, cfg, jobs=1)
        b = build_bundle(seq, cfg, jobs=3)
        for x, y in zip(a, b):
            for name in FIELDS:
                np.testing.assert_array_equal(getattr(x, name), getattr(y, name))

    def test_analyzer_failure_is_reported(self):
        # A 20x20 frame has too few tiles for texture statistics.
        b = frame_bundle(np.random.default_rng(0).random((20, 20)))
        assert isinstance(b, MaskBundle)
        assert any("texture" in n for n in b.notes)

    def test_assemble_rejects_mixed_shapes(self):
        z = np.zeros((8, 8), np.uint8)
        with pytest.raises(ValueError):
            assemble(0, z, z, z, np.zeros((8, 9), np.uint8), AnalyzerConfig())
