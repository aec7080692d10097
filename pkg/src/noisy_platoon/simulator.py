"""Time-domain platoon simulation.

Each follower obeys::

    x' = v,  v' = a,  tau a' + a = k_a w a_{i-1} - k_v (v - v_{i-1}) - k_p delta_i

and the lead vehicle's acceleration is the prescribed input ``a_0(t)``.
Integration is fixed-step RK4; steps are split at the lead profile's
breakpoints so the kinks in ``a_0`` do not cost accuracy order. The noise
factor ``w`` is drawn once per link per step and held over the step.

Three modes are supported: ``stochastic`` (sampled ``w``), ``averaged``
(``w = E[w]``) and ``noiseless`` (``w = 1``).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .channel import ChannelSpec, expected_noise_factor, inv
from .core import GainSet, PlatoonConfig, Trajectory
from .synthesis import internal_stability

MODES = ("stochastic", "averaged", "noiseless")
DIVERGENCE_LIMIT = 1e9


class SimulationDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class LeadProfile:
    """Lead-vehicle acceleration input.

    kinds:
      ``sine``  ``amplitude * sin(frequency * (t - start))`` on ``start < t < end``
      ``constant``    ``amplitude`` on ``start <= t < end``
      ``table``       linear interpolation through ``table = ((t, a), ...)``, held at the ends
    """

    kind: str = "sine"
    amplitude: float = 0.5
    frequency: float = 0.1
    start: float = 10.0
    end: float = 10.0 + 20.0 * math.pi
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in ("sine", "constant", "table"):
            raise ValueError(f"unknown lead profile kind {self.kind!r}")
        if self.kind == "table":
            tab = tuple((float(t), float(a)) for t, a in self.table)
            if len(tab) < 2 or any(t1 <= t0 for (t0, _), (t1, _) in zip(tab, tab[1:])):
                raise ValueError("table profile needs at least two points with increasing times")
            object.__setattr__(self, "table", tab)
        else:
            if not self.end > self.start:
                raise ValueError(f"profile end ({self.end}) must come after start ({self.start})")
            if not math.isfinite(self.amplitude):
                raise ValueError("amplitude must be finite")

    @classmethod
    def sine_burst(cls, amplitude=0.5, frequency=0.1, start=10.0, periods=1.0):
        return cls("sine", amplitude, frequency, start, start + periods * 2 * math.pi / frequency)

    def __call__(self, t):
        if isinstance(t, (float, int)):
            return self._scalar(float(t))
        t = np.asarray(t, dtype=float)
        if self.kind == "table":
            ts, av = zip(*self.table)
            out = np.interp(t, ts, av)
        elif self.kind == "sine":
            on = (t > self.start) & (t < self.end)
            out = np.where(on, self.amplitude * np.sin(self.frequency * (t - self.start)), 0.0)
        else:
            on = (t >= self.start) & (t < self.end)
            out = np.where(on, self.amplitude, 0.0)
        return float(out) if out.ndim == 0 else out

    def _scalar(self, t: float) -> float:
        if self.kind == "table":
            return float(np.interp(t, *zip(*self.table)))
        if self.kind == "sine":
            return self.amplitude * math.sin(self.frequency * (t - self.start)) if self.start < t < self.end else 0.0
        return self.amplitude if self.start <= t < self.end else 0.0

    def breakpoints(self) -> tuple:
        if self.kind == "table":
            return tuple(t for t, _ in self.table)
        return (self.start, self.end)

    def as_dict(self) -> dict:
        if self.kind == "table":
            return {"kind": "table", "table": [list(p) for p in self.table]}
        return {"kind": self.kind, "amplitude": self.amplitude, "frequency": self.frequency,
                "start": self.start, "end": self.end}


def lead_acceleration(profile: LeadProfile, t):
    return profile(t)


# ---------------------------------------------------------------- noise streams

def link_rng(seed: int, link: int, run: int = 0) -> np.random.Generator:
    """Independent generator for follower ``link`` (1-based) of Monte-Carlo run ``run``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(run, link))))


def noise_series(channel: ChannelSpec, n_steps: int, seed: int, link: int, run: int = 0) -> np.ndarray:
    """Per-step noise factors of one link, shape ``(n_steps,)``."""
    if channel.is_noiseless:
        return np.ones(n_steps)
    rng = link_rng(seed, link, run)
    bits = rng.random((n_steps, channel.n_bits)) < np.asarray(channel.gammas)
    r = inv(channel.rho)
    return (1.0 - r) + r * (bits @ channel.bit_weights)


def _noise_block(channel, n_steps, n_links, seed, runs):
    """Noise for several runs, shape ``(n_steps, len(runs), n_links)``."""
    w = np.empty((n_steps, len(runs), n_links))
    for b, run in enumerate(runs):
        for i in range(n_links):
            w[:, b, i] = noise_series(channel, n_steps, seed, i + 1, run)
    return w


# ---------------------------------------------------------------- integration

def _cruise(cfg: PlatoonConfig, h_w: float):
    """Equilibrium positions at t = 0 and the common speed; the integrator
    works in deviations from ``x_i = base_i + v0 t, v_i = v0``."""
    gap = cfg.equilibrium_gap(h_w)
    return -gap * np.arange(cfg.n_followers + 1, dtype=float), float(cfg.v0)


def _equilibrium(cfg: PlatoonConfig, h_w: float, batch: int):
    base, v0 = _cruise(cfg, h_w)
    x = np.tile(base, (batch, 1))
    v = np.full(x.shape, v0)
    a = np.zeros(x.shape)
    a[:, 0] = cfg.lead(0.0)
    return x, v, a


def _chain_rhs(x, v, a, w, p):
    # x, v are deviations from the cruise equilibrium, so d and v0 drop out
    k_a, k_v, k_p, h_w, tau = p
    da = np.zeros_like(a)
    da[:, 1:] = (k_a * w * a[:, :-1] - k_v * (v[:, 1:] - v[:, :-1])
                 - k_p * (x[:, 1:] - x[:, :-1] + h_w * v[:, 1:]) - a[:, 1:]) / tau
    return v, a, da


def _rk4(x, v, a, t, h, w, p, lead):
    """One RK4 increment ``(dx, dv, da)``.

    The lead acceleration is algebraic: column 0 of ``a`` is overwritten with
    the input at every stage time and gets a zero increment.
    """
    half = t + 0.5 * h
    u_half, u_end = lead(half), lead(t + h)
    k1 = _chain_rhs(x, v, a, w, p)
    s = [x + 0.5 * h * k1[0], v + 0.5 * h * k1[1], a + 0.5 * h * k1[2]]
    s[2][:, 0] = u_half
    k2 = _chain_rhs(*s, w, p)
    s = [x + 0.5 * h * k2[0], v + 0.5 * h * k2[1], a + 0.5 * h * k2[2]]
    s[2][:, 0] = u_half
    k3 = _chain_rhs(*s, w, p)
    s = [x + h * k3[0], v + h * k3[1], a + h * k3[2]]
    s[2][:, 0] = u_end
    k4 = _chain_rhs(*s, w, p)
    return tuple(h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]) for j in range(3))


class _Compensated:
    """Kahan-summed state; keeps long fixed-step runs from drifting by roundoff."""

    def __init__(self, *arrays):
        self.value = list(arrays)
        self.carry = [np.zeros_like(q) for q in arrays]

    def add(self, increments):
        for j, inc in enumerate(increments):
            y = inc - self.carry[j]
            t = self.value[j] + y
            self.carry[j] = (t - self.value[j]) - y
            self.value[j] = t


def _substeps(t_grid, breakpoints):
    """Map step index -> interior breakpoints of that step."""
    out = {}
    dt = t_grid[1] - t_grid[0] if len(t_grid) > 1 else 0.0
    for b in breakpoints:
        k = int(math.floor(b / dt)) if dt else -1
        for kk in (k - 1, k, k + 1):
            if 0 <= kk < len(t_grid) - 1 and t_grid[kk] < b < t_grid[kk + 1]:
                out.setdefault(kk, []).append(b)
    return {k: sorted(set(v)) for k, v in out.items()}


def _step_with_breaks(step_fn, state, t0, t1, breaks):
    t = t0
    for b in breaks + [t1]:
        state = step_fn(state, t, b - t)
        t = b
    return state


def _edges(t0, t1, breaks):
    return zip([t0] + breaks, breaks + [t1])


def _integrate(cfg, gains, noise, batch, record):
    """Run the chain from equilibrium; ``noise(k)`` gives the ``(batch, N)``
    factors for step ``k`` and ``record(k, x, v, a)`` receives every sample
    as deviations from the cruise equilibrium (see :func:`_cruise`)."""
    p = (gains.k_a, gains.k_v, gains.k_p, gains.h_w, cfg.tau)
    t_grid = cfg.time_grid()
    splits = _substeps(t_grid, cfg.lead.breakpoints())
    n = cfg.n_followers + 1
    state = _Compensated(np.zeros((batch, n)), np.zeros((batch, n)), np.zeros((batch, n)))
    state.value[2][:, 0] = cfg.lead(0.0)
    record(0, *state.value)
    for k in range(len(t_grid) - 1):
        w = noise(k)
        t0, t1 = t_grid[k], t_grid[k + 1]
        for ta, tb in _edges(t0, t1, splits.get(k, [])):
            state.add(_rk4(*state.value, ta, tb - ta, w, p, cfg.lead))
            state.value[2][:, 0] = cfg.lead(tb)
        x, v, a = state.value
        if k % 256 == 0 or k == len(t_grid) - 2:
            peak = max(np.max(np.abs(x)) + abs(cfg.v0) * t1, np.max(np.abs(v)), np.max(np.abs(a)))
            if not peak < DIVERGENCE_LIMIT:
                raise SimulationDiverged(f"state magnitude {peak:.3g} at t={t1:.3f} s; "
                                         f"check internal stability (gamma={gains.gamma:.6g}, tau*k_p={cfg.tau * gains.k_p:.6g})")
        record(k + 1, x, v, a)


def _check_mode(mode, channel):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if mode != "noiseless" and channel is None:
        raise ValueError(f"{mode} mode needs a channel")


def _warn_unstable(cfg, gains):
    if not internal_stability(cfg.tau, gains.gamma, gains.k_p):
        warnings.warn(f"gains are not internally stable at tau={cfg.tau}: gamma={gains.gamma:.6g} "
                      f"<= tau*k_p={cfg.tau * gains.k_p:.6g}", RuntimeWarning)


def simulate(config: PlatoonConfig, gains: GainSet, channel: ChannelSpec | None = None,
             mode: str = "averaged", seed: int = 0, run: int = 0) -> Trajectory:
    """Integrate the platoon from its CTHP equilibrium at cruise speed ``v0``.

    In stochastic mode the draw for link ``i`` comes from
    ``link_rng(seed, i, run)``, so a result is reproducible from
    ``(config, gains, channel, seed, run)`` alone and matches run ``run`` of
    :func:`monte_carlo_mean` with the same master seed.
    """
    _check_mode(mode, channel)
    _warn_unstable(config, gains)
    n, steps = config.n_followers, config.n_steps
    if mode == "stochastic":
        w_all = _noise_block(channel, steps, n, seed, [run])
        noise = w_all.__getitem__
    else:
        w_const = np.full((1, n), 1.0 if mode == "noiseless" else expected_noise_factor(channel))
        noise = lambda k: w_const  # noqa: E731
    K = steps + 1
    X, V, A = np.empty((K, n + 1)), np.empty((K, n + 1)), np.empty((K, n + 1))

    def record(k, x, v, a):
        X[k], V[k], A[k] = x[0], v[0], a[0]

    _integrate(config, gains, noise, 1, record)
    t = config.time_grid()
    base, v0 = _cruise(config, gains.h_w)
    return Trajectory(t, X + base + v0 * t[:, None], V + v0, A, config.d, gains.h_w)


def communicated_signal_trace(traj: Trajectory, channel: ChannelSpec, link: int, seed: int, run: int = 0):
    """Noise and received acceleration on link ``link`` (predecessor ``link-1`` to follower ``link``).

    Returns ``(t, noise, received)`` over the step-start samples, with
    ``received = w * a_{link-1}`` and ``noise = (w - 1) * a_{link-1}``. The
    noise is regenerated from ``seed`` and must match the run that produced
    ``traj``.
    """
    if not 1 <= link <= traj.n_followers:
        raise IndexError(f"link must be in 1..{traj.n_followers}, got {link}")
    steps = len(traj.t) - 1
    w = noise_series(channel, steps, seed, link, run)
    a_pred = traj.a[:-1, link - 1]
    return traj.t[:-1], (w - 1.0) * a_pred, w * a_pred


# ---------------------------------------------------------------- matrix form

@dataclass(frozen=True)
class ClosedLoopSystem:
    """``X' = A X + B a_0(t) + c`` for ``X = [x_0, v_0, a_0, x_1, v_1, a_1, ...]``.

    The lead acceleration is an input, so the ``a_0`` row and column of ``A``
    are zero and ``B`` feeds ``a_0(t)`` into ``v_0'`` and follower 1's
    acceleration row.
    """

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray

    def follower_block(self, i: int) -> np.ndarray:
        return self.A[3 * i:3 * i + 3, 3 * i:3 * i + 3]


def build_averaged_system(config: PlatoonConfig, gains: GainSet, w_mean: float) -> ClosedLoopSystem:
    n = config.n_followers + 1
    tau = config.tau
    A = np.zeros((3 * n, 3 * n))
    B = np.zeros(3 * n)
    c = np.zeros(3 * n)
    A[0, 1] = 1.0
    B[1] = 1.0
    ka = gains.k_a * w_mean
    for i in range(1, n):
        r, q = 3 * i, 3 * (i - 1)
        A[r, r + 1] = 1.0
        A[r + 1, r + 2] = 1.0
        row = r + 2
        A[row, r] = -gains.k_p / tau
        A[row, r + 1] = -(gains.k_v + gains.h_w * gains.k_p) / tau
        A[row, r + 2] = -1.0 / tau
        A[row, q] = gains.k_p / tau
        A[row, q + 1] = gains.k_v / tau
        if i == 1:
            B[row] = ka / tau
        else:
            A[row, q + 2] = ka / tau
        c[row] = -gains.k_p * config.d / tau
    return ClosedLoopSystem(A, B, c)


def simulate_linear(system: ClosedLoopSystem, config: PlatoonConfig, h_w: float) -> Trajectory:
    """RK4 on the matrix form, from the same equilibrium as :func:`simulate`."""
    lead = config.lead
    x, v, a = _equilibrium(config, h_w, 1)
    X0 = np.column_stack([x[0], v[0], a[0]]).ravel()
    f = lambda X, t: system.A @ X + system.B * lead(t) + system.c  # noqa: E731

    def step(X, t, h):
        k1 = f(X, t)
        k2 = f(X + 0.5 * h * k1, t + 0.5 * h)
        k3 = f(X + 0.5 * h * k2, t + 0.5 * h)
        k4 = f(X + h * k3, t + h)
        return X + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    t_grid = config.time_grid()
    splits = _substeps(t_grid, lead.breakpoints())
    out = np.empty((len(t_grid), X0.size))
    out[0] = X0
    X = X0
    for k in range(len(t_grid) - 1):
        X = _step_with_breaks(step, X, t_grid[k], t_grid[k + 1], splits.get(k, []))
        out[k + 1] = X
    states = out.reshape(len(t_grid), -1, 3)
    acc = states[:, :, 2].copy()
    acc[:, 0] = lead(t_grid)
    return Trajectory(t_grid, states[:, :, 0].copy(), states[:, :, 1].copy(), acc, config.d, h_w)


# ---------------------------------------------------------------- Monte Carlo

class _Moments:
    """Chunk-mergeable mean and sum of squared deviations, shifted by a
    reference sample so identical runs average back exactly."""

    def __init__(self):
        self.n = 0
        self.ref = self.mean = self.m2 = None

    def add_chunk(self, data):  # data: (batch, ...)
        if self.ref is None:
            self.ref = data[0].copy()
        diff = data - self.ref
        nb = data.shape[0]
        mb = diff.mean(axis=0)
        m2b = ((diff - mb) ** 2).sum(axis=0)
        if self.n == 0:
            self.n, self.mean, self.m2 = nb, mb, m2b
            return
        n = self.n + nb
        delta = mb - self.mean
        self.mean = self.mean + delta * (nb / n)
        self.m2 = self.m2 + m2b + delta**2 * (self.n * nb / n)
        self.n = n

    def result(self):
        mean = self.ref + self.mean
        if self.n < 2:
            return mean, np.full_like(mean, np.nan)
        std = np.sqrt(self.m2 / (self.n - 1))
        return mean, 2.0 * std / math.sqrt(self.n)


@dataclass(frozen=True)
class MonteCarloResult:
    mean: Trajectory
    halfwidth: dict  # "x", "v", "a", "delta" -> arrays shaped like the mean series
    runs: int
    mean_delta: np.ndarray

    def agreement(self, reference: Trajectory) -> "Agreement":
        """Compare the sample-mean spacing errors against another trajectory."""
        err = np.abs(self.mean_delta - reference.delta)
        hw = self.halfwidth["delta"]
        inside = err <= hw
        return Agreement(coverage=float(inside.mean()), rms_error=float(np.sqrt(np.mean(err**2))),
                         max_error=float(err.max()))


@dataclass(frozen=True)
class Agreement:
    coverage: float
    rms_error: float
    max_error: float


def monte_carlo_mean(config: PlatoonConfig, gains: GainSet, channel: ChannelSpec, runs: int,
                     seed: int = 0, chunk: int = 25) -> MonteCarloResult:
    """Pointwise mean of ``runs`` stochastic simulations with 2-sigma half-widths.

    Runs are integrated ``chunk`` at a time as one vectorised batch. Run ``r``
    draws its noise from ``link_rng(seed, i, r)``; chunks are merged in run
    order, which fixes the floating-point reduction and makes the mean
    bit-reproducible.
    """
    if runs < 1:
        raise ValueError("need at least one run")
    _warn_unstable(config, gains)
    n, steps = config.n_followers, config.n_steps
    K = steps + 1
    stats = {key: _Moments() for key in ("x", "v", "a", "delta")}
    for first in range(0, runs, chunk):
        run_ids = list(range(first, min(first + chunk, runs)))
        b = len(run_ids)
        w_all = _noise_block(channel, steps, n, seed, run_ids)
        X, V, A = np.empty((b, K, n + 1)), np.empty((b, K, n + 1)), np.empty((b, K, n + 1))

        def record(k, x, v, a):
            X[:, k], V[:, k], A[:, k] = x, v, a

        _integrate(config, gains, w_all.__getitem__, b, record)
        D = X[:, :, 1:] - X[:, :, :-1] + gains.h_w * V[:, :, 1:]
        for key, data in (("x", X), ("v", V), ("a", A), ("delta", D)):
            stats[key].add_chunk(data)
    out = {key: s.result() for key, s in stats.items()}
    t = config.time_grid()
    base, v0 = _cruise(config, gains.h_w)
    mean = Trajectory(t, out["x"][0] + base + v0 * t[:, None], out["v"][0] + v0, out["a"][0], config.d, gains.h_w)
    # delta of the mean state equals the mean delta up to roundoff, and is exact when runs coincide
    return MonteCarloResult(mean=mean, halfwidth={k: v[1] for k, v in out.items()}, runs=runs,
                            mean_delta=mean.delta)
