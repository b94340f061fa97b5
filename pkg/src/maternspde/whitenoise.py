"""Reproducible white-noise vectors ``b ~ N(0, M)``.

Random numbers come from Philox4x32-10 (Salmon et al., "Parallel random
numbers: as easy as 1, 2, 3", SC11) keyed by the 64-bit seed. The 128-bit
counter is ``(block, lane, sample_lo, sample_hi)``: the lane is the element
index for white noise, so each element's normals depend only on
``(seed, sample index, element index)`` and can be produced in any order.
Each block of four 32-bit words gives two uniforms with 53-bit resolution,
turned into two normals by the Box-Muller transform.

This generator layout is part of the public contract; changing it is a
major-version change. Bitwise reproducibility of the normals across
platforms is only promised within one build (it depends on libm).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError
from .fem import ElementFactorization

_SEED_MASK = (1 << 64) - 1
_VECTOR_LANE = 0xFFFFFFFF
_TWO_M53 = 2.0 ** -53


@dataclass(frozen=True)
class NoiseStream:
    seed: int
    index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) <= _SEED_MASK:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        if not 0 <= int(self.index) <= _SEED_MASK:
            raise ConfigurationError("sample index must be an unsigned 64-bit integer")

    def at(self, index: int) -> "NoiseStream":
        return NoiseStream(self.seed, index)


def _normals_from_words(words: np.ndarray) -> np.ndarray:
    """Box-Muller on blocks of four uint32 words; returns two normals per block."""
    w = words.astype(np.uint64)
    a = ((w[..., 0] << np.uint64(32)) | w[..., 1]) >> np.uint64(11)
    b = ((w[..., 2] << np.uint64(32)) | w[..., 3]) >> np.uint64(11)
    u1 = 1.0 - a.astype(np.float64) * _TWO_M53  # (0, 1]
    u2 = b.astype(np.float64) * _TWO_M53
    r = np.sqrt(-2.0 * np.log(u1))
    t = 2.0 * np.pi * u2
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)


def element_normals(stream: NoiseStream, num_elements: int, per_element: int) -> np.ndarray:
    """Standard normals of shape ``(num_elements, per_element)`` keyed by element index."""
    blocks = (per_element + 1) // 2
    words = kernels.philox_lanes(int(stream.seed), int(stream.index), num_elements, blocks, 0)
    z = _normals_from_words(words).reshape(num_elements, 2 * blocks)
    return z[:, :per_element]


def sample_standard_normal(stream: NoiseStream, count: int) -> np.ndarray:
    if count < 1:
        raise ConfigurationError("count must be >= 1")
    blocks = (count + 1) // 2
    words = kernels.philox_lanes(int(stream.seed), int(stream.index), 1, blocks, _VECTOR_LANE)
    return _normals_from_words(words).reshape(-1)[:count]


def sample_white_noise_vector(fact: ElementFactorization, stream: NoiseStream,
                              dirichlet_dofs=None, z=None) -> np.ndarray:
    """``b = H z`` with one independent normal per element-local dof.

    ``z`` overrides the random draw (shape ``(m, nv)``); it exists for tests
    of linearity. Constrained dofs are zeroed after the scatter.
    """
    m, nv, _ = fact.factors.shape
    if z is None:
        z = element_normals(stream, m, nv)
    b = fact.apply(z)
    if dirichlet_dofs is not None and len(dirichlet_dofs):
        b[np.asarray(dirichlet_dofs)] = 0.0
    return b
