"""Multiplicative n-bit noise on the communicated predecessor acceleration.

The receiver gets ``w * a`` with::

    w = (1 - 1/rho) + (1/rho) * sum_j z_j / 2**j,   z_j ~ Bernoulli(gamma_j)

so ``w`` lives in ``[1 - 1/rho, 1 + 1/rho)``. ``rho = inf`` is the
noiseless channel (``w == 1``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Bit expectations used for the 16-bit example channel (rho = 5).
EXAMPLE_GAMMAS = (
    0.8055, 0.5767, 0.1829, 0.2399, 0.8865, 0.0287, 0.4899, 0.1679,
    0.9787, 0.7127, 0.5005, 0.4711, 0.0596, 0.6820, 0.0424, 0.0714,
)


def snr_db_to_rho(snr_db: float) -> float:
    """Amplitude SNR factor ``rho = 10**(snr_db / 20)``; ``inf`` maps to ``inf``."""
    if not snr_db > 0:
        raise ValueError(f"SNR must be positive in dB (rho > 1), got {snr_db}")
    return math.inf if math.isinf(snr_db) else 10.0 ** (snr_db / 20.0)


def rho_to_snr_db(rho: float) -> float:
    return math.inf if math.isinf(rho) else 20.0 * math.log10(rho)


def inv(rho: float) -> float:
    """``1/rho`` with ``rho = inf`` mapping to exactly 0."""
    return 0.0 if math.isinf(rho) else 1.0 / rho


@dataclass(frozen=True)
class ChannelSpec:
    rho: float
    gammas: tuple = EXAMPLE_GAMMAS

    def __post_init__(self):
        if not self.rho > 1:
            raise ValueError(f"SNR factor rho must exceed 1, got {self.rho}")
        gammas = tuple(float(g) for g in self.gammas)
        if not gammas:
            raise ValueError("channel needs at least one bit")
        bad = [g for g in gammas if not 0.0 < g < 1.0]
        if bad:
            raise ValueError(f"bit expectations must lie strictly inside (0, 1), got {bad}")
        object.__setattr__(self, "gammas", gammas)

    @classmethod
    def from_snr_db(cls, snr_db: float, gammas=EXAMPLE_GAMMAS) -> "ChannelSpec":
        return cls(snr_db_to_rho(snr_db), gammas)

    @classmethod
    def noiseless(cls, n_bits: int = 1) -> "ChannelSpec":
        return cls(math.inf, (0.5,) * n_bits)

    @property
    def n_bits(self) -> int:
        return len(self.gammas)

    @property
    def snr_db(self) -> float:
        return rho_to_snr_db(self.rho)

    @property
    def is_noiseless(self) -> bool:
        return math.isinf(self.rho)

    @property
    def bit_weights(self) -> np.ndarray:
        return 2.0 ** -np.arange(self.n_bits)

    def bounds(self) -> tuple[float, float]:
        """Attainable ``(min, max)`` of ``w``: all bits 0 and all bits 1."""
        r = inv(self.rho)
        return 1.0 - r, 1.0 - r + r * (2.0 - 2.0 ** (1 - self.n_bits))

    def interval(self) -> tuple[float, float]:
        """Worst-case band ``[1 - 1/rho, 1 + 1/rho]`` used by the synthesis."""
        r = inv(self.rho)
        return 1.0 - r, 1.0 + r


def noise_factor_from_bits(spec: ChannelSpec, bits) -> np.ndarray | float:
    """Map a bit pattern (last axis of length ``n_bits``) to ``w``."""
    bits = np.asarray(bits, dtype=float)
    if bits.shape[-1] != spec.n_bits:
        raise ValueError(f"expected {spec.n_bits} bits, got {bits.shape[-1]}")
    r = inv(spec.rho)
    w = (1.0 - r) + r * (bits @ spec.bit_weights)
    return float(w) if np.ndim(w) == 0 else w


def sample_noise_factor(spec: ChannelSpec, rng: np.random.Generator, size=None, bits=None):
    """Draw ``w`` from independent Bernoulli bits.

    ``bits`` overrides the random draw with a fixed pattern; tests use it to hit
    the range endpoints without pushing any ``gamma_j`` onto 0 or 1.
    """
    if bits is not None:
        return noise_factor_from_bits(spec, bits)
    shape = (spec.n_bits,) if size is None else (*np.atleast_1d(size), spec.n_bits)
    z = rng.random(shape) < np.asarray(spec.gammas)
    return noise_factor_from_bits(spec, z)


def expected_noise_factor(spec: ChannelSpec) -> float:
    r = inv(spec.rho)
    return (1.0 - r) + r * float(np.dot(spec.gammas, spec.bit_weights))


def noise_factor_std(spec: ChannelSpec) -> float:
    g = np.asarray(spec.gammas)
    return inv(spec.rho) * math.sqrt(float(np.sum(g * (1 - g) * 4.0 ** -np.arange(spec.n_bits))))


def effective_gain(k_a: float, spec: ChannelSpec) -> tuple[float, tuple[float, float]]:
    """Return ``(k_a * E[w], I)`` where ``I`` bounds ``k_a * E[w]`` over all bit statistics."""
    if not k_a > 0:
        raise ValueError(f"k_a must be positive, got {k_a}")
    lo, hi = spec.interval()
    return k_a * expected_noise_factor(spec), (lo * k_a, hi * k_a)
