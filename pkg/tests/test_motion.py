"""
Tests for block motion estimation, flow resampling and warping.
"""

import numpy as np
import pytest
from returns.result import Failure, Success

from omra_lab.frame_io import Frame
from omra_lab.motion import (
    FlowField,
    MotionConfig,
    downsample_frame,
    estimate_bidirectional,
    estimate_flow,
    integer_candidates,
    prediction_error,
    read_flow,
    resample_flow,
    warp,
    write_flow,
)
from omra_lab.types import Refinement
from tests.fixtures.sequence_generators import (
    noise_frame,
    textured_frame,
    translating_sequence,
)


class TestMotionConfig:
    """Test block-matching parameter validation."""

    def test_defaults(self):
        """Test the 8/8/half-pel defaults."""
        cfg = MotionConfig()
        assert (cfg.block_size, cfg.search_range) == (8, 8)
        assert cfg.refinement is Refinement.HALF_PEL

    @pytest.mark.parametrize("kwargs", [{"block_size": 6}, {"search_range": 0}])
    def test_invalid(self, kwargs):
        """Test that unsupported blocks and ranges raise."""
        with pytest.raises(ValueError):
            MotionConfig(**kwargs)


class TestFlowField:
    """Test the dense vector grid."""

    def test_shape_validation(self):
        """Test that vectors need a trailing (dx, dy) axis."""
        with pytest.raises(ValueError):
            FlowField(np.zeros((4, 4, 3)))

    def test_scale_validation(self):
        """Test that the scale must be a known factor."""
        with pytest.raises(ValueError):
            FlowField(np.zeros((4, 4, 2)), scale=3)

    def test_block_vectors_round_trip(self):
        """Test that per-block vectors survive densification."""
        blocks = np.arange(8, dtype=np.float64).reshape(2, 2, 2)
        flow = FlowField.from_block_vectors(blocks, 8, 16, 16, 1)
        assert (flow.grid_w, flow.grid_h) == (16, 16)
        assert np.array_equal(flow.block_vectors(8), blocks)
        assert np.array_equal(flow.vectors[7, 9], blocks[0, 1])

    def test_from_block_vectors_crops_partial_blocks(self):
        """Test that a grid smaller than the block cover is cropped."""
        flow = FlowField.from_block_vectors(np.ones((1, 1, 2)), 8, 4, 4, 8)
        assert flow.vectors.shape == (4, 4, 2)


class TestDownsample:
    """Test box downsampling."""

    def test_factor_one_is_identity(self):
        """Test that S=1 returns the frame itself."""
        frame = textured_frame()
        assert downsample_frame(frame, 1) is frame

    def test_rounds_half_away(self):
        """Test that a 2x2 average of 1, 2, 3, 4 becomes 3."""
        tile = np.array([[1, 2], [3, 4]], dtype=np.uint8)
        frame = Frame(np.tile(tile, (8, 8)))
        out = downsample_frame(frame, 2)
        assert out.shape == (8, 8)
        assert np.all(out.samples == 3)

    def test_factor_four_is_two_passes(self):
        """Test that S=4 equals two successive S=2 passes."""
        frame = noise_frame(32, 32, 1)
        twice = downsample_frame(downsample_frame(frame, 2), 2)
        assert downsample_frame(frame, 4) == twice

    def test_constant_frame_stays_constant(self):
        """Test that a flat frame stays flat at every factor."""
        frame = Frame.constant(32, 32, 77)
        for factor in (2, 4, 8):
            assert np.all(downsample_frame(frame, factor).samples == 77)

    @pytest.mark.parametrize("factor", [3, 16])
    def test_unknown_factor(self, factor):
        """Test that factors outside {1, 2, 4, 8} raise."""
        with pytest.raises(ValueError):
            downsample_frame(textured_frame(), factor)

    def test_indivisible_size(self):
        """Test that a 12x12 frame cannot be downsampled by 8."""
        with pytest.raises(ValueError, match="not divisible"):
            downsample_frame(Frame.constant(12, 12, 0), 8)


class TestResampleFlow:
    """Test flow grid rescaling."""

    def test_uniform_upsampling_scales_vectors(self):
        """Test that a uniform S=4 field becomes a 4x longer S=1 field."""
        flow = FlowField.uniform(8, 8, 1.5, -0.5, scale=4)
        full = resample_flow(flow, 1)
        assert (full.grid_w, full.grid_h, full.scale) == (32, 32, 1)
        assert np.allclose(full.vectors[..., 0], 6.0)
        assert np.allclose(full.vectors[..., 1], -2.0)

    def test_uniform_downsampling_scales_vectors(self):
        """Test that downsampling divides vectors by the ratio."""
        flow = FlowField.uniform(32, 32, 4.0, 2.0, scale=1)
        coarse = resample_flow(flow, 8)
        assert (coarse.grid_w, coarse.grid_h) == (4, 4)
        assert np.allclose(coarse.vectors, [0.5, 0.25])

    def test_same_scale_is_identity(self):
        """Test that resampling to the own scale is a no-op."""
        flow = FlowField.uniform(4, 4, 1.0, 1.0, scale=2)
        assert resample_flow(flow, 2) is flow


class TestEstimateFlow:
    """Test full-search block matching."""

    def test_candidate_order(self):
        """Test that candidates are ordered by L1 length, then dy, then dx."""
        candidates = integer_candidates(1)
        assert candidates[:5] == [(0, 0), (0, -1), (-1, 0), (1, 0), (0, 1)]
        assert len(integer_candidates(3)) == 49

    def test_identical_frames_give_zero_flow(self):
        """Test that ties resolve to the zero vector."""
        frame = textured_frame(32, 32, 2)
        flow = estimate_flow(frame, frame)
        assert np.all(flow.vectors == 0)

    def test_flat_frames_give_zero_flow(self):
        """Test that any-vector ties on flat content pick the zero vector."""
        frame = Frame.constant(32, 32, 100)
        assert np.all(estimate_flow(frame, frame).vectors == 0)

    @pytest.mark.parametrize("refinement", list(Refinement))
    def test_integer_translation_is_recovered(self, refinement):
        """Test that a 2-pixel shift is found on interior blocks."""
        ref = textured_frame(32, 32, 4)
        cur = Frame(np.roll(ref.samples, shift=2, axis=1))
        cfg = MotionConfig(8, 4, refinement)
        blocks = estimate_flow(cur, ref, cfg).block_vectors(8)
        assert np.all(blocks[:, 1:, 0] == -2)
        assert np.all(blocks[:, 1:, 1] == 0)

    def test_vectors_stay_within_range(self):
        """Test that estimated vectors never exceed the search range."""
        cfg = MotionConfig(8, 3, Refinement.HALF_PEL)
        flow = estimate_flow(noise_frame(32, 32, 5), noise_frame(32, 32, 6), cfg)
        assert np.abs(flow.vectors).max() <= 3

    def test_half_pel_vectors_are_on_half_grid(self):
        """Test that refined vectors are multiples of 0.5."""
        flow = estimate_flow(noise_frame(32, 32, 7), noise_frame(32, 32, 8))
        assert np.all((flow.vectors * 2) == np.round(flow.vectors * 2))

    def test_bidirectional_scale(self):
        """Test that both flows live on the downsampled grid."""
        frames = translating_sequence(32, 32, 3, vx=2.0)
        past, future = estimate_bidirectional(frames[1], frames[0], frames[2], 4)
        for flow in (past, future):
            assert (flow.grid_w, flow.grid_h, flow.scale) == (8, 8, 4)

    def test_dimension_mismatch(self):
        """Test that frames of different size cannot be matched."""
        with pytest.raises(ValueError):
            estimate_flow(textured_frame(32, 32), textured_frame(16, 16))


class TestWarp:
    """Test backward bilinear warping."""

    def test_zero_flow_is_identity(self):
        """Test that a zero field reproduces the reference."""
        ref = textured_frame()
        assert warp(ref, FlowField.uniform(32, 32, 0.0, 0.0)) == ref

    def test_integer_flow_samples_with_clamping(self):
        """Test that dx=1 reads one pixel to the right, clamping at the border."""
        ref = textured_frame()
        out = warp(ref, FlowField.uniform(32, 32, 1.0, 0.0))
        assert np.array_equal(out.samples[:, :-1], ref.samples[:, 1:])
        assert np.array_equal(out.samples[:, -1], ref.samples[:, -1])

    def test_half_pel_flow_averages(self):
        """Test that dx=0.5 between 10 and 20 gives 15."""
        plane = np.tile(np.array([10, 20], dtype=np.uint8), (16, 8))
        out = warp(Frame(plane), FlowField.uniform(16, 16, 0.5, 0.0))
        assert out.samples[0, 0] == 15

    def test_needs_full_resolution_flow(self):
        """Test that coarse flows must be resampled first."""
        with pytest.raises(ValueError):
            warp(textured_frame(), FlowField.uniform(16, 16, 0.0, 0.0, scale=2))


class TestPredictionError:
    """Test warped-quality scoring."""

    @pytest.mark.parametrize("factor", [1, 2, 4, 8])
    def test_static_content_predicts_perfectly(self, factor):
        """Test that a static texture scores zero at every factor."""
        frame = textured_frame(64, 64, 1)
        flows = estimate_bidirectional(frame, frame, frame, factor)
        assert prediction_error(frame, frame, frame, *flows, factor) == 0.0

    def test_scale_mismatch(self):
        """Test that flows of the wrong scale are rejected."""
        frame = textured_frame()
        flows = estimate_bidirectional(frame, frame, frame, 2)
        with pytest.raises(ValueError, match="scale"):
            prediction_error(frame, frame, frame, *flows, 4)

    def test_large_motion_favours_coarse_resolution(self):
        """Test that motion beyond the search range is caught at S=4, not S=1."""
        frames = translating_sequence(128, 128, 9, vx=4.0, vy=0.0, seed=11)
        x_t, past, future = frames[4], frames[0], frames[8]

        def error(factor):
            flows = estimate_bidirectional(x_t, past, future, factor)
            return prediction_error(x_t, past, future, *flows, factor)

        assert error(1) > 2 * error(4)


class TestFlowDump:
    """Test the binary flow dump."""

    def test_round_trip(self, temp_dir):
        """Test that half-pel vectors survive a dump."""
        blocks = np.array([[[0.5, -1.0], [2.0, 3.5]]])
        flow = FlowField.from_block_vectors(blocks, 4, 8, 4, 2)
        path = temp_dir / "flow.bin"
        assert isinstance(write_flow(flow, path), Success)
        assert read_flow(path).unwrap() == flow

    def test_truncated(self, temp_dir):
        """Test that a short payload is rejected."""
        path = temp_dir / "flow.bin"
        write_flow(FlowField.uniform(4, 4, 1.0, 1.0), path).unwrap()
        path.write_bytes(path.read_bytes()[:-4])
        result = read_flow(path)
        assert isinstance(result, Failure)
        assert "Truncated" in result.failure()

    def test_bad_header(self, temp_dir):
        """Test that an unknown scale is rejected."""
        path = temp_dir / "flow.bin"
        path.write_bytes(b"\x01\x00\x00\x00\x01\x00\x00\x00\x03\x00\x00\x00")
        assert "Malformed" in read_flow(path).failure()
