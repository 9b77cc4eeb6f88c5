"""
Tests for frames, sequence files and quality metrics.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from returns.result import Failure, Success

from omra_lab.frame_io import (
    PSNR_CAP_DB,
    Frame,
    SyntheticSpec,
    check_codable_dimensions,
    generate_synthetic,
    mse,
    psnr,
    read_sequence,
    read_synthetic_spec,
    round_half_away,
    sidecar_path,
    smooth_texture,
    to_samples,
    write_sequence,
)
from omra_lab.types import SequenceFormat
from tests.fixtures.sequence_generators import (
    textured_frame,
    translating_sequence,
    write_synthetic_spec,
)

planes = arrays(np.uint8, (4, 4))


class TestFrame:
    """Test the immutable luma raster."""

    def test_rejects_non_uint8_samples(self):
        """Test that float planes are rejected."""
        with pytest.raises(ValueError, match="uint8"):
            Frame(np.zeros((4, 4), dtype=np.float64))

    def test_rejects_non_planar_samples(self):
        """Test that 1-D and empty arrays are rejected."""
        with pytest.raises(ValueError):
            Frame(np.zeros(16, dtype=np.uint8))
        with pytest.raises(ValueError):
            Frame(np.zeros((0, 4), dtype=np.uint8))

    def test_samples_are_read_only(self):
        """Test that a frame cannot be modified in place."""
        frame = Frame.constant(16, 16, 7)
        with pytest.raises(ValueError):
            frame.samples[0, 0] = 1

    def test_dimensions(self):
        """Test width, height and shape."""
        frame = Frame.constant(48, 16, 0)
        assert (frame.width, frame.height, frame.shape) == (48, 16, (16, 48))

    def test_equality_compares_samples(self):
        """Test that equal planes make equal frames."""
        assert Frame.constant(16, 16, 3) == Frame.constant(16, 16, 3)
        assert Frame.constant(16, 16, 3) != Frame.constant(16, 16, 4)


class TestRounding:
    """Test rounding to samples."""

    def test_ties_round_away_from_zero(self):
        """Test that .5 ties move away from zero."""
        values = np.array([-1.5, -0.5, 0.5, 1.5, 2.4, 2.5])
        assert round_half_away(values).tolist() == [-2, -1, 1, 2, 2, 3]

    def test_to_samples_clips(self):
        """Test that out-of-range values are clipped to [0, 255]."""
        samples = to_samples(np.array([[-20.0, 127.5, 300.0]]))
        assert samples.dtype == np.uint8
        assert samples.tolist() == [[0, 128, 255]]


class TestQualityMetrics:
    """Test MSE and PSNR."""

    def test_psnr_of_identical_frames_is_capped(self):
        """Test that identical frames give the capped PSNR."""
        frame = textured_frame()
        assert mse(frame, frame) == 0.0
        assert psnr(frame, frame) == PSNR_CAP_DB

    def test_psnr_of_unit_error(self):
        """Test PSNR for an MSE of exactly one."""
        a, b = Frame.constant(16, 16, 10), Frame.constant(16, 16, 11)
        assert mse(a, b) == 1.0
        assert psnr(a, b) == pytest.approx(10 * math.log10(255.0**2))

    def test_dimension_mismatch_raises(self):
        """Test that frames of different size cannot be compared."""
        with pytest.raises(ValueError, match="Dimension mismatch"):
            mse(Frame.constant(16, 16, 0), Frame.constant(32, 16, 0))

    @given(planes, planes)
    @settings(max_examples=50)
    def test_mse_is_symmetric(self, a, b):
        """Test that MSE does not depend on argument order."""
        assert mse(Frame(a), Frame(b)) == mse(Frame(b), Frame(a))

    @given(planes)
    @settings(max_examples=25)
    def test_mse_with_self_is_zero(self, a):
        """Test that MSE of a frame with itself is zero."""
        assert mse(Frame(a), Frame(a)) == 0.0


class TestCodableDimensions:
    """Test the multiple-of-16 rule."""

    @pytest.mark.parametrize("size", [(16, 16), (64, 48), (1920, 1072)])
    def test_accepts_multiples_of_16(self, size):
        """Test that codable sizes pass."""
        check_codable_dimensions(*size)

    @pytest.mark.parametrize("size", [(8, 16), (1920, 1080), (17, 32)])
    def test_rejects_other_sizes(self, size):
        """Test that other sizes raise."""
        with pytest.raises(ValueError, match="multiples of 16"):
            check_codable_dimensions(*size)


class TestSyntheticContent:
    """Test the synthetic sequence generator."""

    def test_texture_is_seeded(self):
        """Test that the same seed gives the same texture."""
        assert np.array_equal(smooth_texture(32, 32, 5), smooth_texture(32, 32, 5))
        assert not np.array_equal(smooth_texture(32, 32, 5), smooth_texture(32, 32, 6))

    def test_texture_spans_full_range(self):
        """Test that the texture is stretched to [0, 255]."""
        texture = smooth_texture(32, 32, 1)
        assert texture.min() == 0 and texture.max() == 255

    def test_integer_translation_is_exact_roll(self):
        """Test that integer velocities shift the texture with wrap-around."""
        frames = translating_sequence(32, 32, 4, vx=2.0, vy=1.0, seed=9)
        base = frames[0].samples
        for t, frame in enumerate(frames):
            expected = np.roll(base, shift=(t, 2 * t), axis=(0, 1))
            assert np.array_equal(frame.samples, expected)

    def test_occluder_is_drawn_white(self):
        """Test that the occluder square is painted at the centre."""
        spec = SyntheticSpec(32, 32, 2, occluder=(8, (0.0, 0.0)))
        frame = generate_synthetic(spec)[0]
        assert np.all(frame.samples[12:20, 12:20] == 255)

    def test_velocity_limit(self):
        """Test that velocities above width/4 are rejected."""
        with pytest.raises(ValueError, match="Velocity"):
            SyntheticSpec(32, 32, 2, velocity=(9.0, 0.0))

    def test_read_synthetic_spec(self, temp_dir):
        """Test parsing of a key=value spec file."""
        path = write_synthetic_spec(temp_dir / "spec.txt", 64, 32, 7, 1.5, -2.0, 4)
        result = read_synthetic_spec(path)
        assert isinstance(result, Success)
        spec = result.unwrap()
        assert (spec.width, spec.height, spec.num_frames) == (64, 32, 7)
        assert spec.velocity == (1.5, -2.0)
        assert spec.texture_seed == 4

    def test_read_synthetic_spec_missing_key(self, temp_dir):
        """Test that a spec without dimensions fails."""
        path = temp_dir / "spec.txt"
        path.write_text("frames=3\n", encoding="utf-8")
        assert isinstance(read_synthetic_spec(path), Failure)

    def test_read_synthetic_spec_bad_velocity(self, temp_dir):
        """Test that a non-numeric velocity names the entry."""
        path = temp_dir / "spec.txt"
        path.write_text("width=32\nheight=32\nframes=3\nvx=fast\n", encoding="utf-8")
        assert "vx" in read_synthetic_spec(path).failure()

    def test_read_synthetic_spec_occluder(self, temp_dir):
        """Test the optional occluder entries."""
        path = temp_dir / "spec.txt"
        path.write_text(
            "width=32\nheight=32\nframes=3\noccluder_size=8\noccluder_vx=1.5\n",
            encoding="utf-8",
        )
        spec = read_synthetic_spec(path).unwrap()
        assert spec.occluder == (8, (1.5, 0.0))
        assert spec.velocity == (0.0, 0.0)
        assert spec.texture_seed == 0


class TestSequenceFiles:
    """Test raw-planar and Y4M reading and writing."""

    def test_raw_round_trip(self, temp_dir, small_sequence):
        """Test that raw-planar files round-trip bit-exactly."""
        path = temp_dir / "seq.yraw"
        assert isinstance(write_sequence(small_sequence, path), Success)
        assert sidecar_path(path).exists()
        assert read_sequence(path).unwrap() == small_sequence

    @pytest.mark.parametrize("mono", [False, True])
    def test_y4m_round_trip(self, temp_dir, small_sequence, mono):
        """Test that Y4M files round-trip the luma plane."""
        path = temp_dir / "seq.y4m"
        write_sequence(small_sequence, path, mono=mono).unwrap()
        assert read_sequence(path).unwrap() == small_sequence

    def test_format_can_be_forced(self, temp_dir, small_sequence):
        """Test writing Y4M under a non-.y4m name."""
        path = temp_dir / "seq.bin"
        write_sequence(small_sequence, path, SequenceFormat.Y4M).unwrap()
        assert path.read_bytes().startswith(b"YUV4MPEG2")
        assert read_sequence(path, SequenceFormat.Y4M).unwrap() == small_sequence

    def test_missing_file(self, temp_dir):
        """Test that a missing file is reported."""
        result = read_sequence(temp_dir / "absent.yraw")
        assert isinstance(result, Failure)
        assert "Could not find" in result.failure()

    def test_missing_sidecar(self, temp_dir):
        """Test that a raw file without its header is malformed."""
        path = temp_dir / "seq.yraw"
        path.write_bytes(bytes(16 * 16))
        result = read_sequence(path)
        assert isinstance(result, Failure)
        assert "Malformed header" in result.failure()

    def test_truncated_raw_payload(self, temp_dir, small_sequence):
        """Test that a short raw payload is rejected."""
        path = temp_dir / "seq.yraw"
        write_sequence(small_sequence, path).unwrap()
        path.write_bytes(path.read_bytes()[:-1])
        assert read_sequence(path).failure() == "Truncated payload"

    def test_truncated_y4m_payload(self, temp_dir, small_sequence):
        """Test that a cut Y4M frame is rejected."""
        path = temp_dir / "seq.y4m"
        write_sequence(small_sequence, path).unwrap()
        path.write_bytes(path.read_bytes()[:-10])
        assert read_sequence(path).failure() == "Truncated payload"

    def test_bad_y4m_magic(self, temp_dir):
        """Test that a non-Y4M stream is rejected."""
        path = temp_dir / "seq.y4m"
        path.write_bytes(b"NOTAVIDEO W16 H16\n")
        assert "Malformed header" in read_sequence(path).failure()

    def test_uncodable_size_needs_crop(self, temp_dir):
        """Test that 48x40 frames are rejected unless cropped to 48x32."""
        frames = [Frame.constant(48, 40, v) for v in (10, 20)]
        path = temp_dir / "odd.yraw"
        write_sequence(frames, path).unwrap()

        assert isinstance(read_sequence(path), Failure)
        cropped = read_sequence(path, crop=True).unwrap()
        assert [f.shape for f in cropped] == [(32, 48), (32, 48)]
        assert cropped[1].samples[0, 0] == 20

    def test_write_rejects_mixed_sizes(self, temp_dir):
        """Test that frames of different sizes cannot share a file."""
        frames = [Frame.constant(16, 16, 0), Frame.constant(32, 16, 0)]
        assert isinstance(write_sequence(frames, temp_dir / "x.yraw"), Failure)
