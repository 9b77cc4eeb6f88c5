"""
Deterministic sequence builders for testing omra-lab.

Every builder is seeded, so repeated calls produce identical frames.
"""

from pathlib import Path

import numpy as np

from omra_lab.frame_io import Frame, SyntheticSpec, generate_synthetic, smooth_texture


def textured_frame(width: int = 32, height: int = 32, seed: int = 0) -> Frame:
    """A smooth seeded texture."""
    return Frame(smooth_texture(width, height, seed))


def noise_frame(width: int = 32, height: int = 32, seed: int = 0) -> Frame:
    """Uniform white noise, the hardest content to predict."""
    rng = np.random.default_rng(seed)
    return Frame(rng.integers(0, 256, size=(height, width), dtype=np.uint8))


def translating_sequence(
    width: int = 32,
    height: int = 32,
    frames: int = 5,
    vx: float = 1.0,
    vy: float = 0.0,
    seed: int = 0,
) -> list[Frame]:
    """A globally translating texture with toroidal wrap."""
    return generate_synthetic(
        SyntheticSpec(width, height, frames, (vx, vy), texture_seed=seed)
    )


def static_sequence(
    width: int = 32, height: int = 32, frames: int = 5, seed: int = 0
) -> list[Frame]:
    return translating_sequence(width, height, frames, 0.0, 0.0, seed)


def constant_sequence(
    width: int = 32, height: int = 32, frames: int = 5, value: int = 128
) -> list[Frame]:
    return [Frame.constant(width, height, value) for _ in range(frames)]


def write_key_value_file(path: Path, **values) -> Path:
    """Write a ``key=value`` file, one entry per keyword argument."""
    lines = [f"{key}={value}" for key, value in values.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_synthetic_spec(
    path: Path,
    width: int = 32,
    height: int = 32,
    frames: int = 5,
    vx: float = 1.0,
    vy: float = 0.0,
    seed: int = 0,
) -> Path:
    return write_key_value_file(
        path, width=width, height=height, frames=frames, vx=vx, vy=vy, seed=seed
    )
