"""Closed-form robust gain and time-headway design.

All functions take the SNR factor ``rho`` (``math.inf`` for a clean channel)
and the actuator-lag bound ``tau0``. The worst case over the unknown bit
statistics is taken inside each formula, so the results hold for every
effective gain ``k_a * E[w]`` in ``[(1 - 1/rho) k_a, (1 + 1/rho) k_a]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import inv


def _check_rho(rho: float) -> None:
    if not rho > 1:
        raise ValueError(f"SNR factor rho must exceed 1, got {rho}")


def ka_upper_bound(rho: float) -> float:
    """Largest admissible acceleration gain (exclusive): ``1 / (1 + 1/rho)``."""
    _check_rho(rho)
    return 1.0 / (1.0 + inv(rho))


def _check_ka(k_a: float, rho: float) -> None:
    hi = ka_upper_bound(rho)
    if not 0 < k_a < hi:
        raise ValueError(f"k_a={k_a} outside the admissible range (0, {hi:.6g}) for rho={rho}")


def headway_lower_bound(k_a: float, rho: float, tau0: float) -> float:
    """Open lower bound on the time headway for a given ``k_a``."""
    _check_ka(k_a, rho)
    if not tau0 > 0:
        raise ValueError(f"tau0 must be positive, got {tau0}")
    r = inv(rho)
    return 2.0 * tau0 * (1.0 - (1.0 - r) * k_a) / (1.0 - (1.0 + r) ** 2 * k_a**2)


def optimal_ka_headway(rho: float, tau0: float) -> tuple[float, float]:
    """The ``k_a`` minimising :func:`headway_lower_bound` and the minimum itself.

    The derivative of the bound has the sign of ``-m n k^2 + 2 n k - m`` with
    ``m = 1 - 1/rho`` and ``n = (1 + 1/rho)^2``; its smaller root is the
    minimiser and simplifies to the expression below.
    """
    _check_rho(rho)
    if not tau0 > 0:
        raise ValueError(f"tau0 must be positive, got {tau0}")
    s = inv(math.sqrt(rho))
    r = inv(rho)
    k_star = (1.0 - s) / (1.0 + s) / (1.0 + r)
    h_star = tau0 * (1.0 + s) ** 2 / (1.0 + r)
    return k_star, h_star


def _derivative_roots(rho: float) -> tuple[float, float]:
    # roots of f(k) = -m n k^2 + 2 n k - m; used by tests as a second route to k_a*
    r = inv(rho)
    m, n = 1.0 - r, (1.0 + r) ** 2
    disc = math.sqrt(n * (n - m * m))
    return (n - disc) / (m * n), (n + disc) / (m * n)


@dataclass(frozen=True)
class GammaWindow:
    gamma: float
    lower: float
    upper: float

    @property
    def nonempty(self) -> bool:
        return self.lower <= self.upper

    @property
    def passed(self) -> bool:
        return self.lower <= self.gamma <= self.upper


def gamma_bounds(k_a: float, rho: float, tau0: float, k_p: float, k_v: float, h_w: float) -> GammaWindow:
    """Robust window for ``gamma = k_v + h_w k_p``.

    ``upper`` is worst-cased at the largest effective gain, ``lower`` at the
    smallest.
    """
    _check_ka(k_a, rho)
    if min(k_p, k_v, h_w, tau0) <= 0:
        raise ValueError("gains, headway and tau0 must be positive")
    r = inv(rho)
    upper = (1.0 - (1.0 + r) ** 2 * k_a**2) / (2.0 * tau0)
    lower = math.sqrt(2.0 * k_p * (1.0 - (1.0 - r) * k_a) + k_v**2)
    return GammaWindow(gamma=k_v + h_w * k_p, lower=lower, upper=upper)


def internal_stability(tau: float, gamma: float, k_p: float) -> bool:
    """Routh-Hurwitz test for ``tau s^3 + s^2 + gamma s + k_p``.

    With every coefficient positive the only remaining condition is
    ``gamma > tau k_p``.
    """
    if min(tau, gamma, k_p) <= 0:
        raise ValueError(f"tau, gamma and k_p must be positive, got {tau}, {gamma}, {k_p}")
    return gamma - tau * k_p > 0


def routh_array(coeffs) -> np.ndarray:
    """First column of the Routh array for a real polynomial (highest power first).

    Only the regular case is handled; a zero pivot raises.
    """
    c = np.asarray(coeffs, dtype=float)
    n = len(c)
    width = (n + 1) // 2
    rows = [np.zeros(width), np.zeros(width)]
    rows[0][: len(c[0::2])] = c[0::2]
    rows[1][: len(c[1::2])] = c[1::2]
    for _ in range(n - 2):
        above, pivot_row = rows[-2], rows[-1]
        if pivot_row[0] == 0:
            raise ZeroDivisionError("zero pivot in Routh array")
        new = np.zeros(width)
        new[:-1] = (pivot_row[0] * above[1:] - above[0] * pivot_row[1:]) / pivot_row[0]
        rows.append(new)
    return np.array([row[0] for row in rows])


@dataclass(frozen=True)
class FeasibleRegion:
    """``S = S1 & S2`` in the ``(k_p, k_v)`` plane.

    S1: ``k_v/a1 + k_p/b1 <= 1``  (gamma below its upper bound)
    S2: ``k_v/a2 + k_p/b2 >= 1``  (gamma above its lower bound)
    """

    a1: float
    b1: float
    a2: float
    b2: float
    h_w: float

    @property
    def nonempty(self) -> bool:
        return self.a1 > self.a2

    @property
    def ratio(self) -> float:
        return self.a1 / self.a2

    def in_s1(self, k_p, k_v):
        k_p, k_v = np.asarray(k_p, float), np.asarray(k_v, float)
        return (k_p > 0) & (k_v > 0) & (k_v / self.a1 + k_p / self.b1 <= 1.0)

    def in_s2(self, k_p, k_v):
        k_p, k_v = np.asarray(k_p, float), np.asarray(k_v, float)
        return (k_p > 0) & (k_v > 0) & (k_v / self.a2 + k_p / self.b2 >= 1.0)

    def contains(self, k_p, k_v):
        inside = self.in_s1(k_p, k_v) & self.in_s2(k_p, k_v)
        return bool(inside) if inside.ndim == 0 else inside

    def polygon(self, box=None) -> np.ndarray:
        """Vertices of ``S`` (closure) clipped to ``box = (kp_lo, kp_hi, kv_lo, kv_hi)``.

        Returns a ``(m, 2)`` array of ``(k_p, k_v)`` corners in order; empty
        when the region is.
        """
        if box is None:
            box = (0.0, self.b1, 0.0, self.a1)
        kp_lo, kp_hi, kv_lo, kv_hi = box
        kp_lo, kv_lo = max(kp_lo, 0.0), max(kv_lo, 0.0)
        if kp_lo > kp_hi or kv_lo > kv_hi:
            return np.empty((0, 2))
        poly = [(kp_lo, kv_lo), (kp_hi, kv_lo), (kp_hi, kv_hi), (kp_lo, kv_hi)]
        # half-planes as  c0 * k_p + c1 * k_v <= c2
        for c in ((1 / self.b1, 1 / self.a1, 1.0), (-1 / self.b2, -1 / self.a2, -1.0)):
            poly = _clip(poly, *c)
            if not poly:
                return np.empty((0, 2))
        return np.array(poly)

    def centroid(self) -> tuple[float, float]:
        if not self.nonempty:
            raise ValueError("feasible region is empty")
        p = self.polygon()
        x, y = p[:, 0], p[:, 1]
        xs, ys = np.roll(x, -1), np.roll(y, -1)
        cross = x * ys - xs * y
        area = cross.sum() / 2
        return float(((x + xs) * cross).sum() / (6 * area)), float(((y + ys) * cross).sum() / (6 * area))

    def grid(self, kp_values, kv_values) -> np.ndarray:
        """Membership table with columns ``kp, kv, in_S1, in_S2, in_S``."""
        kp, kv = np.meshgrid(np.asarray(kp_values, float), np.asarray(kv_values, float), indexing="ij")
        kp, kv = kp.ravel(), kv.ravel()
        s1, s2 = self.in_s1(kp, kv), self.in_s2(kp, kv)
        return np.column_stack([kp, kv, s1, s2, s1 & s2])


def _clip(poly, c0, c1, c2, eps=1e-15):
    out = []
    for i, p in enumerate(poly):
        q = poly[(i + 1) % len(poly)]
        fp = c0 * p[0] + c1 * p[1] - c2
        fq = c0 * q[0] + c1 * q[1] - c2
        if fp <= eps:
            out.append(p)
        if (fp < -eps and fq > eps) or (fp > eps and fq < -eps):
            s = fp / (fp - fq)
            out.append((p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])))
    return out


def feasible_region(k_a: float, rho: float, tau0: float, h_w: float) -> FeasibleRegion:
    _check_ka(k_a, rho)
    if not (tau0 > 0 and h_w > 0):
        raise ValueError("tau0 and h_w must be positive")
    r = inv(rho)
    a1 = (1.0 - (1.0 + r) ** 2 * k_a**2) / (2.0 * tau0)
    c = 1.0 - (1.0 - r) * k_a
    return FeasibleRegion(a1=a1, b1=a1 / h_w, a2=c / h_w, b2=2.0 * c / h_w**2, h_w=h_w)


@dataclass(frozen=True)
class SynthesisResult:
    rho: float
    tau0: float
    ka_max: float
    ka_opt: float
    hw_opt: float
    k_a: float | None = None
    hw_lb: float | None = None
    h_w: float | None = None
    region: FeasibleRegion | None = None

    def headway_status(self) -> str | None:
        """``certified``, ``marginal`` (on the open bound) or ``below`` for ``h_w``."""
        if self.h_w is None or self.hw_lb is None:
            return None
        if self.h_w > self.hw_lb:
            return "certified"
        return "marginal" if self.h_w == self.hw_lb else "below"


def synthesize(rho: float, tau0: float, k_a: float | None = None, h_w: float | None = None) -> SynthesisResult:
    ka_opt, hw_opt = optimal_ka_headway(rho, tau0)
    hw_lb = headway_lower_bound(k_a, rho, tau0) if k_a is not None else None
    region = feasible_region(k_a, rho, tau0, h_w) if k_a is not None and h_w is not None else None
    return SynthesisResult(rho=rho, tau0=tau0, ka_max=ka_upper_bound(rho), ka_opt=ka_opt, hw_opt=hw_opt,
                           k_a=k_a, hw_lb=hw_lb, h_w=h_w, region=region)


def suggest_gains(rho: float, tau0: float, k_a: float | None = None, h_w: float | None = None,
                  headway_margin: float = 0.01):
    """Pick a certified ``GainSet``: ``k_a`` defaults to the optimum, ``h_w`` to
    the bound inflated by ``headway_margin``, and ``(k_p, k_v)`` to the
    centroid of the feasible region.
    """
    from .core import GainSet

    if k_a is None:
        k_a = optimal_ka_headway(rho, tau0)[0]
    if h_w is None:
        h_w = headway_lower_bound(k_a, rho, tau0) * (1.0 + headway_margin)
    region = feasible_region(k_a, rho, tau0, h_w)
    if not region.nonempty:
        raise ValueError(f"no certified (k_p, k_v) for h_w={h_w}: need h_w > {headway_lower_bound(k_a, rho, tau0):.6g}")
    k_p, k_v = region.centroid()
    return GainSet(k_a=k_a, k_v=k_v, k_p=k_p, h_w=h_w)
