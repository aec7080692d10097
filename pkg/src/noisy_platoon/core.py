"""Domain types and kinematic bookkeeping for a predecessor-following platoon.

Vehicle 0 is the lead; vehicles 1..N follow. Positions decrease down the
string, so the spacing error of follower ``i`` is::

    e_i = x_i - x_{i-1} + d
    delta_i = e_i + h_w * v_i

and ``delta_i == 0`` is the constant-time-headway equilibrium.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Allowance on ||delta_i|| / ||delta_{i-1}|| <= 1 for sampled trajectories.
RATIO_TOLERANCE = 1e-6
# Upstream peaks below this are treated as "no signal" and get no ratio.
RATIO_FLOOR = 1e-12


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


@dataclass(frozen=True)
class VehicleState:
    x: float
    v: float
    a: float = 0.0

    def __post_init__(self):
        _require(all(math.isfinite(q) for q in (self.x, self.v, self.a)),
                 f"non-finite vehicle state {self}")


@dataclass(frozen=True)
class GainSet:
    """CTHP controller gains.

    ``k_a`` scales the communicated predecessor acceleration, ``k_v`` the
    relative velocity and ``k_p`` the headway spacing error ``delta_i``.
    """

    k_a: float
    k_v: float
    k_p: float
    h_w: float

    def __post_init__(self):
        for name in ("k_a", "k_v", "k_p", "h_w"):
            val = getattr(self, name)
            _require(math.isfinite(val) and val > 0, f"{name} must be positive, got {val}")

    @property
    def gamma(self) -> float:
        return self.k_v + self.h_w * self.k_p

    def replace(self, **changes) -> "GainSet":
        return GainSet(**{**self.as_dict(), **changes})

    def as_dict(self) -> dict:
        return {"k_a": self.k_a, "k_v": self.k_v, "k_p": self.k_p, "h_w": self.h_w}


@dataclass(frozen=True)
class PlatoonConfig:
    """Platoon geometry, actuator lag and integration settings.

    ``lead`` is a :class:`noisy_platoon.simulator.LeadProfile`; it is typed
    loosely here to keep this module free of simulator imports.
    """

    n_followers: int = 12
    tau: float = 0.5
    tau0: float = 0.5
    d: float = 5.0
    v0: float = 20.0
    lead: object = None
    dt: float = 0.01
    horizon: float = 150.0

    def __post_init__(self):
        _require(isinstance(self.n_followers, (int, np.integer)) and self.n_followers >= 1,
                 f"n_followers must be a positive integer, got {self.n_followers!r}")
        _require(0 < self.tau <= self.tau0, f"need 0 < tau <= tau0, got tau={self.tau}, tau0={self.tau0}")
        _require(self.d > 0, f"standstill spacing must be positive, got {self.d}")
        _require(self.v0 >= 0, f"cruise speed must be non-negative, got {self.v0}")
        _require(self.dt > 0 and self.horizon > 0, "dt and horizon must be positive")
        _require(self.dt < self.tau / 10,
                 f"dt={self.dt} does not resolve the actuator lag (need dt < tau/10 = {self.tau / 10})")
        if self.lead is None:
            from .simulator import LeadProfile

            object.__setattr__(self, "lead", LeadProfile.sine_burst())

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def time_grid(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def equilibrium_gap(self, h_w: float) -> float:
        return self.d + h_w * self.v0

    def replace(self, **changes) -> "PlatoonConfig":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return PlatoonConfig(**fields)


@dataclass(frozen=True)
class Trajectory:
    """Sampled platoon states.

    ``x``, ``v`` and ``a`` have shape ``(len(t), N + 1)`` with column 0 the
    lead vehicle. ``d`` and ``h_w`` are kept so the derived spacing series can
    be rebuilt from raw states.
    """

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    a: np.ndarray
    d: float
    h_w: float
    delta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        shapes = {np.shape(self.x), np.shape(self.v), np.shape(self.a)}
        if len(shapes) != 1:
            raise ValueError(f"state arrays disagree in shape: {shapes}")
        shape = shapes.pop()
        if len(shape) != 2 or shape[0] != t.shape[0]:
            raise ValueError(f"state arrays of shape {shape} do not match a time grid of {t.shape[0]} samples")
        if shape[1] < 1:
            raise ValueError("trajectory holds no vehicles")
        object.__setattr__(self, "delta", _delta(self.x, self.v, self.d, self.h_w))

    @property
    def n_followers(self) -> int:
        return self.x.shape[1] - 1

    @property
    def e(self) -> np.ndarray:
        return self.x[:, 1:] - self.x[:, :-1] + self.d

    @property
    def length(self) -> np.ndarray:
        return platoon_length(self)

    def state(self, k: int, i: int) -> VehicleState:
        return VehicleState(float(self.x[k, i]), float(self.v[k, i]), float(self.a[k, i]))


def _delta(x, v, d, h_w):
    return x[:, 1:] - x[:, :-1] + d + h_w * v[:, 1:]


def spacing_errors(traj: Trajectory, h_w: float | None = None) -> np.ndarray:
    """Headway spacing errors ``delta_i``, shape ``(len(t), N)``.

    Recomputed from the raw states; ``h_w`` defaults to the one the trajectory
    was produced with.
    """
    if traj.n_followers < 1:
        raise ValueError("spacing errors need at least two vehicles")
    return _delta(traj.x, traj.v, traj.d, traj.h_w if h_w is None else h_w)


def platoon_length(traj: Trajectory) -> np.ndarray:
    """Distance from the lead to the last follower, ``x_0 - x_N``."""
    return traj.x[:, 0] - traj.x[:, -1]


@dataclass(frozen=True)
class AmplificationReport:
    peaks: np.ndarray
    ratios: np.ndarray  # NaN where the upstream peak is below RATIO_FLOOR

    @property
    def max_ratio(self) -> float:
        finite = self.ratios[np.isfinite(self.ratios)]
        return float(finite.max()) if finite.size else math.nan

    def string_stable(self, tol: float = RATIO_TOLERANCE) -> bool:
        finite = self.ratios[np.isfinite(self.ratios)]
        return bool(finite.size) and bool(np.all(finite <= 1 + tol))


def amplification_ratios(delta: np.ndarray, floor: float = RATIO_FLOOR) -> AmplificationReport:
    """Sup-norm of each ``delta_i`` over the sampled horizon and the ratios
    ``||delta_i|| / ||delta_{i-1}||`` for consecutive followers.

    A pair whose upstream peak is below ``floor`` has no meaningful ratio and
    is marked NaN.
    """
    delta = np.asarray(delta, dtype=float)
    if delta.ndim != 2:
        raise ValueError(f"expected a (time, follower) array, got shape {delta.shape}")
    peaks = np.max(np.abs(delta), axis=0)
    upstream, downstream = peaks[:-1], peaks[1:]
    ratios = np.full(upstream.shape, np.nan)
    ok = upstream > floor
    ratios[ok] = downstream[ok] / upstream[ok]
    return AmplificationReport(peaks=peaks, ratios=ratios)
