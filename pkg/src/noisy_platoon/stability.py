"""Spacing-error propagation transfer function and robust string-stability checks.

For the averaged closed loop, consecutive headway errors satisfy
``delta_i(s) = H(s) delta_{i-1}(s)`` with::

    H(s) = (ka_eff s^2 + k_v s + k_p) / (tau s^3 + s^2 + gamma s + k_p)
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .channel import ChannelSpec, effective_gain
from .core import GainSet
from .synthesis import internal_stability

# Sampled ||H||_inf is accepted as <= 1 up to this absolute slack.
HINF_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ErrorPropagationTF:
    ka_eff: float
    k_v: float
    k_p: float
    gamma: float
    tau: float

    def __post_init__(self):
        for name in ("ka_eff", "k_v", "k_p", "gamma", "tau"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive, got {val}")

    @property
    def num(self) -> np.ndarray:
        return np.array([self.ka_eff, self.k_v, self.k_p])

    @property
    def den(self) -> np.ndarray:
        return np.array([self.tau, 1.0, self.gamma, self.k_p])

    def __call__(self, s):
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def poles(self) -> np.ndarray:
        return np.roots(self.den)


def build_tf(gains: GainSet, ka_eff: float, tau: float) -> ErrorPropagationTF:
    return ErrorPropagationTF(ka_eff=ka_eff, k_v=gains.k_v, k_p=gains.k_p, gamma=gains.gamma, tau=tau)


def magnitude(tf: ErrorPropagationTF, omega):
    """``|H(j omega)|`` from the real/imaginary parts of numerator and denominator."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValueError("omega must be non-negative")
    w2 = w * w
    num2 = (tf.k_p - tf.ka_eff * w2) ** 2 + (tf.k_v * w) ** 2
    den2 = (tf.k_p - w2) ** 2 + w2 * (tf.gamma - tf.tau * w2) ** 2
    if np.any(den2 == 0):
        raise ArithmeticError("denominator vanishes on the imaginary axis; the loop is not internally stable")
    mag = np.sqrt(num2 / den2)
    return float(mag) if mag.ndim == 0 else mag


def hinf_norm(tf: ErrorPropagationTF, omega_min: float = 1e-3, omega_max: float = 1e3,
              n_grid: int = 2000, xtol: float = 1e-10) -> tuple[float, float]:
    """Peak of ``|H(j omega)|`` over ``[0, omega_max]`` and its location.

    A log grid locates the peak, golden-section search refines it. The DC
    value (exactly 1) is compared separately since the grid starts at
    ``omega_min``.
    """
    grid = np.geomspace(omega_min, omega_max, n_grid)
    mags = magnitude(tf, grid)
    k = int(np.argmax(mags))
    if k == n_grid - 1:
        warnings.warn(f"|H| peaks at the grid edge omega_max={omega_max}; extend the range", RuntimeWarning)
        peak, at = float(mags[k]), float(grid[k])
    elif k == 0:
        peak, at = float(mags[0]), float(grid[0])
    else:
        res = optimize.minimize_scalar(lambda lw: -magnitude(tf, math.exp(lw)),
                                       bracket=(math.log(grid[k - 1]), math.log(grid[k]), math.log(grid[k + 1])),
                                       method="golden", tol=xtol)
        peak, at = -float(res.fun), math.exp(float(res.x))
        if peak < mags[k]:
            peak, at = float(mags[k]), float(grid[k])
    dc = magnitude(tf, 0.0)
    if dc >= peak:
        return dc, 0.0
    return peak, at


def frequency_response(tf: ErrorPropagationTF, omega) -> np.ndarray:
    """Two-column ``(omega, |H|)`` table."""
    omega = np.asarray(omega, float)
    return np.column_stack([omega, magnitude(tf, omega)])


@dataclass(frozen=True)
class QuarticCheck:
    """Margins of the two coefficient conditions that make
    ``|D(jw)|^2 - |N(jw)|^2`` non-negative for every ``omega``, lag and gain.
    """

    margin_a: float  # (1 - ka_hi^2) / (2 tau0) - gamma
    margin_b: float  # gamma^2 - 2 k_p (1 - ka_lo) - k_v^2

    @property
    def passed(self) -> bool:
        return self.margin_a >= 0 and self.margin_b >= 0


def quartic_conditions(ka_interval: tuple[float, float], gamma: float, tau0: float,
                       k_p: float, k_v: float) -> QuarticCheck:
    ka_lo, ka_hi = ka_interval
    if min(ka_lo, gamma, tau0, k_p, k_v) <= 0 or ka_hi < ka_lo:
        raise ValueError("quartic conditions need positive inputs and an ordered gain interval")
    return QuarticCheck(margin_a=(1.0 - ka_hi**2) / (2.0 * tau0) - gamma,
                        margin_b=gamma**2 - 2.0 * k_p * (1.0 - ka_lo) - k_v**2)


def quartic_coefficients(ka_eff: float, tau: float, gamma: float, k_p: float, k_v: float) -> np.ndarray:
    """``|D(jw)|^2 - |N(jw)|^2`` as a polynomial in ``omega^2`` (highest first)."""
    return np.array([tau**2, 1.0 - ka_eff**2 - 2.0 * tau * gamma, gamma**2 - 2.0 * k_p - k_v**2 + 2.0 * ka_eff * k_p])


@dataclass(frozen=True)
class SampledNorm:
    tau: float
    ka_eff: float
    label: str  # which effective gain: "low", "high" or "mean"
    value: float
    omega: float


@dataclass(frozen=True)
class StabilityVerdict:
    internally_stable: bool
    analytic: QuarticCheck
    samples: tuple = field(repr=False)
    tolerance: float = HINF_TOLERANCE

    @property
    def worst(self) -> SampledNorm:
        return max(self.samples, key=lambda s: s.value)

    @property
    def hinf(self) -> float:
        return self.worst.value

    @property
    def sampled_pass(self) -> bool:
        return self.hinf <= 1.0 + self.tolerance

    @property
    def classification(self) -> str:
        if not self.internally_stable or not self.sampled_pass:
            return "unstable"
        return "certified" if self.analytic.passed else "uncertified"

    def by_label(self) -> dict:
        """Worst sampled norm for each effective-gain choice."""
        out = {}
        for s in self.samples:
            if s.label not in out or s.value > out[s.label].value:
                out[s.label] = s
        return out


def robust_verdict(k_a: float, channel: ChannelSpec, tau0: float, gains: GainSet,
                   n_tau: int = 10, tolerance: float = HINF_TOLERANCE) -> StabilityVerdict:
    """Classify a design as ``certified``, ``uncertified`` or ``unstable``.

    The analytic coefficient test covers every lag in ``(0, tau0]`` and every
    effective gain in the noise interval; the sampled norms cross-check it on
    a lag grid at both interval endpoints and at ``k_a * E[w]``.
    """
    if k_a != gains.k_a:
        gains = gains.replace(k_a=k_a)
    ka_mean, (ka_lo, ka_hi) = effective_gain(k_a, channel)
    analytic = quartic_conditions((ka_lo, ka_hi), gains.gamma, tau0, gains.k_p, gains.k_v)
    stable = internal_stability(tau0, gains.gamma, gains.k_p)
    samples = []
    if stable:
        taus = np.geomspace(tau0 / 10, tau0, n_tau + 1)[1:]
        for label, ka_eff in (("low", ka_lo), ("high", ka_hi), ("mean", ka_mean)):
            for tau in taus:
                value, omega = hinf_norm(build_tf(gains, ka_eff, float(tau)))
                samples.append(SampledNorm(float(tau), ka_eff, label, value, omega))
    else:
        samples.append(SampledNorm(tau0, ka_mean, "mean", math.inf, math.nan))
    return StabilityVerdict(internally_stable=stable, analytic=analytic, samples=tuple(samples), tolerance=tolerance)
