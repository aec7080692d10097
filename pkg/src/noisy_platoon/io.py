"""Run configuration (YAML) and CSV exports."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .channel import ChannelSpec, snr_db_to_rho
from .core import GainSet, PlatoonConfig, Trajectory
from .simulator import MODES, LeadProfile

OUT_ENV = "NOISY_PLATOON_OUT"
SCENARIOS = ("stable_0p95", "unstable_0p65", "optimal_0p88")


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "out"))


@dataclass(frozen=True)
class RunConfig:
    platoon: PlatoonConfig
    channel: ChannelSpec
    gains: GainSet | None = None
    mode: str = "averaged"
    seed: int = 0
    runs: int = 500
    out_dir: str | None = None
    name: str = "run"
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")

    def resolved_gains(self) -> GainSet:
        if self.gains is not None:
            return self.gains
        from .synthesis import suggest_gains

        return suggest_gains(self.channel.rho, self.platoon.tau0)

    def output_dir(self) -> Path:
        return Path(self.out_dir) if self.out_dir else default_out_dir()

    def replace(self, **changes) -> "RunConfig":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return RunConfig(**fields)


def _float(doc, key, default=None):
    val = doc.get(key, default)
    if val is None:
        raise ValueError(f"missing required key {key!r}")
    return float(val)


def _lead_from_dict(doc) -> LeadProfile:
    if not doc:
        return LeadProfile.sine_burst()
    kind = doc.get("kind", "sine")
    if kind == "table":
        return LeadProfile("table", table=tuple(tuple(p) for p in doc["table"]))
    base = LeadProfile.sine_burst()
    return LeadProfile(kind, _float(doc, "amplitude", base.amplitude), _float(doc, "frequency", base.frequency),
                       _float(doc, "start", base.start), _float(doc, "end", base.end))


def run_config_from_dict(doc: dict) -> RunConfig:
    p = doc.get("platoon", {})
    platoon = PlatoonConfig(
        n_followers=int(p.get("followers", 12)),
        tau=_float(p, "tau", p.get("tau0", 0.5)),
        tau0=_float(p, "tau0", 0.5),
        d=_float(p, "standstill_gap", 5.0),
        v0=_float(p, "cruise_speed", 20.0),
        lead=_lead_from_dict(p.get("lead")),
        dt=_float(p, "dt", 0.01),
        horizon=_float(p, "horizon", 150.0),
    )
    c = doc.get("channel")
    if not c:
        raise ValueError("config needs a 'channel' section")
    if "rho" in c and "snr_db" in c:
        raise ValueError("give either channel.rho or channel.snr_db, not both")
    rho = float(c["rho"]) if "rho" in c else snr_db_to_rho(float(c["snr_db"]))
    gammas = c.get("gammas")
    bits = c.get("bits")
    if gammas is None:
        channel = ChannelSpec(rho) if bits is None else ChannelSpec(rho, (0.5,) * int(bits))
    else:
        if bits is not None and int(bits) != len(gammas):
            raise ValueError(f"channel.bits={bits} but {len(gammas)} gammas given")
        channel = ChannelSpec(rho, tuple(gammas))
    g = doc.get("gains")
    gains = None if not g else GainSet(_float(g, "k_a"), _float(g, "k_v"), _float(g, "k_p"), _float(g, "h_w"))
    out = doc.get("output", {}) or {}
    return RunConfig(platoon=platoon, channel=channel, gains=gains, mode=doc.get("mode", "averaged"),
                     seed=int(doc.get("seed", 0)), runs=int(doc.get("runs", 500)), out_dir=out.get("dir"),
                     name=str(doc.get("name", "run")))


def run_config_to_dict(cfg: RunConfig) -> dict:
    p = cfg.platoon
    doc = {
        "name": cfg.name,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "runs": cfg.runs,
        "platoon": {"followers": p.n_followers, "tau": p.tau, "tau0": p.tau0, "standstill_gap": p.d,
                    "cruise_speed": p.v0, "dt": p.dt, "horizon": p.horizon, "lead": p.lead.as_dict()},
        "channel": {"rho": cfg.channel.rho, "bits": cfg.channel.n_bits, "gammas": list(cfg.channel.gammas)},
    }
    if cfg.gains is not None:
        doc["gains"] = cfg.gains.as_dict()
    if cfg.out_dir:
        doc["output"] = {"dir": str(cfg.out_dir)}
    return doc


def load_run_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: expected a mapping at the top level")
    return run_config_from_dict(doc)


def dump_run_config(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        yaml.safe_dump(run_config_to_dict(cfg), fh, sort_keys=False)


def scenario(name: str) -> RunConfig:
    """One of the bundled example configurations (see ``SCENARIOS``)."""
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; choose from {SCENARIOS}")
    text = resources.files("noisy_platoon").joinpath("configs", f"{name}.yaml").read_text(encoding="utf-8")
    return run_config_from_dict(yaml.safe_load(text))


# ---------------------------------------------------------------- CSV

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x) if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def write_csv(path, header, rows, trailer=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
        if trailer:
            fh.write(trailer + "\n")
    return path


def trajectory_header(n_followers: int) -> list[str]:
    cols = ["t"]
    for i in range(n_followers + 1):
        cols += [f"x_{i}", f"v_{i}", f"a_{i}"]
    cols += [f"delta_{i}" for i in range(1, n_followers + 1)] + ["length"]
    return cols


def trajectory_table(traj: Trajectory) -> np.ndarray:
    states = np.stack([traj.x, traj.v, traj.a], axis=2).reshape(len(traj.t), -1)
    return np.column_stack([traj.t, states, traj.delta, traj.length])


def write_trajectory_csv(traj: Trajectory, path) -> Path:
    return write_csv(path, trajectory_header(traj.n_followers), trajectory_table(traj))


def read_trajectory_csv(path, d: float, h_w: float) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = (data.shape[1] - 3) // 4
    states = data[:, 1:1 + 3 * (n + 1)].reshape(len(data), n + 1, 3)
    return Trajectory(data[:, 0], states[:, :, 0], states[:, :, 1], states[:, :, 2], d, h_w)


def write_frequency_csv(table, path) -> Path:
    return write_csv(path, ["omega", "magnitude"], table)


def write_region_csv(region, kp_values, kv_values, path) -> Path:
    trailer = None if region.nonempty else "# empty: h_w does not exceed the headway lower bound"
    return write_csv(path, ["kp", "kv", "in_S1", "in_S2", "in_S"],
                     [(r[0], r[1], bool(r[2]), bool(r[3]), bool(r[4])) for r in region.grid(kp_values, kv_values)],
                     trailer=trailer)
