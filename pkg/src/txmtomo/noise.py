"""Poisson photon-counting noise on ideal line integrals.

Counts are drawn in the pre-log domain: lambda = N0 * exp(-p) photons reach
the detector for an ideal log projection p, the observed count N is Poisson,
and the noisy projection is ln(N0 / max(N, 1)). The zero-count clamp keeps
the log finite under photon starvation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .projection import Sinogram

# Inversion sampling is exact but O(lambda); above this the rounded-normal
# approximation is indistinguishable at the tolerances used here.
_INVERSION_LAMBDA_MAX = 30.0


@dataclass(frozen=True)
class NoiseModel:
    """Photon count before attenuation plus the RNG seed."""

    photon_count: float
    seed: int

    def __post_init__(self):
        if self.photon_count < 1:
            raise ValueError("photon_count must be >= 1")


def _rng_for(seed: int, stream: int) -> np.random.Generator:
    # one independent, reproducible stream per (seed, slice index)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, stream))))


def sample_poisson(lam: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Seed-deterministic Poisson counts from uniform draws.

    Small means use CDF inversion (one uniform per sample, exact); large
    means use the normal approximation with continuity correction,
    N = max(0, floor(lambda + sqrt(lambda) * z + 0.5)). Both paths consume
    exactly one uniform per sample so results do not depend on how the
    array is split.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("Poisson mean must be nonnegative")
    u = rng.random(lam.shape)
    out = np.zeros(lam.shape, dtype=np.int64)

    small = lam < _INVERSION_LAMBDA_MAX
    if np.any(small):
        ls = lam[small]
        us = u[small]
        k = np.zeros(ls.shape, dtype=np.int64)
        pmf = np.exp(-ls)
        cdf = pmf.copy()
        active = us > cdf
        while np.any(active):
            k[active] += 1
            pmf[active] *= ls[active] / k[active]
            cdf[active] += pmf[active]
            active &= us > cdf
        out[small] = k

    large = ~small
    if np.any(large):
        z = ndtri(np.clip(u[large], 1e-16, 1.0 - 1e-16))
        n = np.floor(lam[large] + np.sqrt(lam[large]) * z + 0.5)
        out[large] = np.maximum(n, 0.0).astype(np.int64)
    return out


def apply_poisson(sino: Sinogram, model: NoiseModel, stream: int = 0) -> Sinogram:
    """Noisy log projections p_hat = ln(N0 / max(N, 1)), N ~ Poisson(N0 e^-p).

    stream selects an independent substream (e.g. the slice index) so
    different slices can be noised concurrently yet reproducibly.
    """
    p = sino.data
    if np.any(p < 0):
        raise ValueError("ideal sinogram must be nonnegative (attenuating object)")
    lam = model.photon_count * np.exp(-p)
    counts = sample_poisson(lam, _rng_for(model.seed, stream))
    p_hat = np.log(model.photon_count / np.maximum(counts, 1))
    return Sinogram(sino.angles.copy(), p_hat)
