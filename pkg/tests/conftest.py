import numpy as np
import pytest

from maskedit import DenoiserConfig, SessionConfig
from maskedit.masks import Mask
from maskedit.rng import stream


def random_mask(rng: np.random.Generator, height: int, width: int) -> Mask:
    """Random rectangle mask; occasionally empty-adjacent edge cases avoided."""
    y0 = int(rng.integers(0, height))
    x0 = int(rng.integers(0, width))
    y1 = int(rng.integers(y0, height))
    x1 = int(rng.integers(x0, width))
    bits = np.zeros((height, width), dtype=bool)
    bits[y0 : y1 + 1, x0 : x1 + 1] = True
    return Mask(bits)


def random_stack(rng: np.random.Generator, height: int, width: int, n_layers: int):
    """Background plus n_layers object masks."""
    return [Mask.all_ones(height, width)] + [
        random_mask(rng, height, width) for _ in range(n_layers)
    ]


@pytest.fixture
def tiny_toy_config() -> SessionConfig:
    return SessionConfig(
        channels=4,
        latent_height=8,
        latent_width=8,
        decode_scale=4,
        backend="toy-dit",
        seed=11,
        denoiser=DenoiserConfig(num_blocks=2, d_model=32, num_heads=4, num_steps=6),
    )


@pytest.fixture
def tiny_procedural_config() -> SessionConfig:
    return SessionConfig(
        channels=4,
        latent_height=16,
        latent_width=16,
        decode_scale=4,
        backend="procedural",
        seed=11,
        denoiser=DenoiserConfig(num_steps=20),
    )


@pytest.fixture
def det_rng() -> np.random.Generator:
    return stream("tests", 2024)
