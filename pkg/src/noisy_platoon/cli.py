"""Command-line front end.

Exit status is 0 whenever an analysis completes, including designs found to
be unstable; 2 signals invalid input.
"""
from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .channel import ChannelSpec, expected_noise_factor, snr_db_to_rho
from .core import GainSet, amplification_ratios
from .simulator import monte_carlo_mean, simulate
from .stability import build_tf, frequency_response, robust_verdict
from .synthesis import feasible_region, synthesize


class UsageError(ValueError):
    pass


def _rho(args) -> float | None:
    if getattr(args, "rho", None) is not None and getattr(args, "snr_db", None) is not None:
        raise UsageError("give --rho or --snr-db, not both")
    if getattr(args, "snr_db", None) is not None:
        return snr_db_to_rho(args.snr_db)
    return getattr(args, "rho", None)


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError("missing " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _out(args) -> Path:
    return Path(args.out) if getattr(args, "out", None) else io.default_out_dir()


def _emit(args, payload: dict, lines: list[str]) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2, default=_jsonable))
    else:
        print("\n".join(lines))


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o))


# ---------------------------------------------------------------- synth / region

def cmd_synth(args) -> int:
    rho = _rho(args)
    if rho is None:
        raise UsageError("give --rho or --snr-db")
    res = synthesize(rho, args.tau0, args.ka, args.hw)
    payload = {"rho": rho, "tau0": args.tau0, "ka_max": res.ka_max, "ka_opt": res.ka_opt, "hw_opt": res.hw_opt}
    lines = [f"rho            = {rho:.6g}",
             f"k_a range      = (0, {res.ka_max:.4f})",
             f"k_a*           = {res.ka_opt:.4f}",
             f"h*_w,lb        = {res.hw_opt:.4f} s"]
    if res.hw_lb is not None:
        payload.update(ka=args.ka, hw_lb=res.hw_lb)
        lines.append(f"h_w,lb(k_a={args.ka:g}) = {res.hw_lb:.4f} s")
    if res.region is not None:
        reg = res.region
        payload.update(hw=args.hw, headway=res.headway_status(), a1=reg.a1, b1=reg.b1, a2=reg.a2, b2=reg.b2,
                       region_nonempty=reg.nonempty)
        lines.append(f"h_w = {args.hw:g} s: {res.headway_status()}; a1={reg.a1:.4f} b1={reg.b1:.4f} "
                     f"a2={reg.a2:.4f} b2={reg.b2:.4f}")
    _emit(args, payload, lines)
    return 0


def _axis(spec, default):
    if spec is None:
        return np.linspace(*default, 101)
    lo, hi, n = float(spec[0]), float(spec[1]), int(spec[2])
    if n < 1 or hi < lo:
        raise UsageError(f"bad grid range {spec}")
    return np.linspace(lo, hi, n)


def cmd_region(args) -> int:
    rho = _rho(args)
    _need(args, "ka", "hw")
    if rho is None:
        raise UsageError("give --rho or --snr-db")
    reg = feasible_region(args.ka, rho, args.tau0, args.hw)
    if reg.nonempty:
        # S is a thin sliver near the k_v axis; frame its bounding box
        poly = reg.polygon()
        lo, hi = poly.min(axis=0), poly.max(axis=0)
        pad = 0.25 * (hi - lo)
        kp_box, kv_box = (max(lo[0] - pad[0], 0.0), hi[0] + pad[0]), (max(lo[1] - pad[1], 0.0), hi[1] + pad[1])
    else:
        kp_box, kv_box = (0.0, 1.2 * max(reg.b1, reg.b2)), (0.0, 1.2 * max(reg.a1, reg.a2))
    kp = _axis(args.kp_range, kp_box)
    kv = _axis(args.kv_range, kv_box)
    path = Path(args.out) if args.out and args.out.endswith(".csv") else _out(args) / "region.csv"
    io.write_region_csv(reg, kp, kv, path)
    payload = {"a1": reg.a1, "b1": reg.b1, "a2": reg.a2, "b2": reg.b2, "nonempty": reg.nonempty, "csv": path}
    lines = [f"a1={reg.a1:.4f} b1={reg.b1:.4f} a2={reg.a2:.4f} b2={reg.b2:.4f}",
             f"region {'nonempty' if reg.nonempty else 'EMPTY'} (a1/a2 = {reg.ratio:.6f})"]
    if args.kp is not None and args.kv is not None:
        inside = reg.contains(args.kp, args.kv)
        payload["contains"] = inside
        lines.append(f"(k_p, k_v) = ({args.kp:g}, {args.kv:g}) {'in' if inside else 'not in'} S")
    if args.plot:
        from .plotting import plot_region

        pt = (args.kp, args.kv) if args.kp is not None and args.kv is not None else None
        payload["svg"] = plot_region(reg, path.with_suffix(".svg"), point=pt)
    lines.append(f"wrote {path}")
    _emit(args, payload, lines)
    return 0


# ---------------------------------------------------------------- config-driven commands

def _run_config(args) -> io.RunConfig:
    if args.config is None:
        cfg = io.scenario("stable_0p95").replace(gains=None, name="cli")
    elif args.config in io.SCENARIOS and not Path(args.config).exists():
        cfg = io.scenario(args.config)
    else:
        cfg = io.load_run_config(args.config)
    rho = _rho(args)
    if rho is not None:
        cfg = cfg.replace(channel=ChannelSpec(rho, cfg.channel.gammas))
    if args.tau0 is not None:
        cfg = cfg.replace(platoon=cfg.platoon.replace(tau0=args.tau0, tau=min(cfg.platoon.tau, args.tau0)))
    overrides = {k: v for k, v in (("k_a", args.ka), ("k_v", args.kv), ("k_p", args.kp), ("h_w", args.hw))
                 if v is not None}
    if overrides:
        if cfg.gains is None:
            if len(overrides) < 4:
                raise UsageError("config has no gains; give all of --ka --kv --kp --hw")
            cfg = cfg.replace(gains=GainSet(**overrides))
        else:
            cfg = cfg.replace(gains=cfg.gains.replace(**overrides))
    for name in ("seed", "mode", "runs"):
        if getattr(args, name, None) is not None:
            cfg = cfg.replace(**{name: getattr(args, name)})
    if getattr(args, "out", None):
        cfg = cfg.replace(out_dir=args.out)
    return cfg


def cmd_check(args) -> int:
    cfg = _run_config(args)
    gains = cfg.resolved_gains()
    tau0 = cfg.platoon.tau0
    verdict = robust_verdict(gains.k_a, cfg.channel, tau0, gains)
    ka_mean = gains.k_a * expected_noise_factor(cfg.channel)
    table = frequency_response(build_tf(gains, ka_mean, tau0), np.geomspace(1e-3, 1e1, 1000))
    out = cfg.output_dir()
    path = io.write_frequency_csv(table, out / f"{cfg.name}_freq.csv")
    per = {k: {"hinf": s.value, "omega": s.omega, "tau": s.tau, "ka_eff": s.ka_eff}
           for k, s in verdict.by_label().items()}
    payload = {"classification": verdict.classification, "internally_stable": verdict.internally_stable,
               "margin_a": verdict.analytic.margin_a, "margin_b": verdict.analytic.margin_b,
               "hinf": verdict.hinf, "per_gain": per, "gains": gains.as_dict(), "csv": path}
    lines = [f"gains: k_a={gains.k_a:.6g} k_v={gains.k_v:.6g} k_p={gains.k_p:.6g} h_w={gains.h_w:.6g} "
             f"(gamma={gains.gamma:.6g})",
             f"internal stability at tau0: {verdict.internally_stable}",
             f"analytic margins: A={verdict.analytic.margin_a:.6g} B={verdict.analytic.margin_b:.6g}"]
    lines += [f"  sampled sup |H| ({k} gain {s['ka_eff']:.4f}) = {s['hinf']:.8f} at omega={s['omega']:.4g}, "
              f"tau={s['tau']:.4g}" for k, s in per.items()]
    lines += [f"verdict: {verdict.classification}", f"wrote {path}"]
    if args.plot:
        from .plotting import plot_magnitude

        payload["svg"] = plot_magnitude(table, path.with_suffix(".svg"), title=cfg.name)
    _emit(args, payload, lines)
    return 0


def _summary(traj) -> dict:
    rep = amplification_ratios(traj.delta)
    return {"max_ratio": rep.max_ratio, "ratios": rep.ratios, "peaks": rep.peaks,
            "string_stable": rep.string_stable(1e-3), "max_abs_delta": float(np.max(np.abs(traj.delta))),
            "length_min": float(traj.length.min()), "length_max": float(traj.length.max()),
            "length_mean": float(traj.length.mean())}


def cmd_simulate(args) -> int:
    cfg = _run_config(args)
    gains = cfg.resolved_gains()
    traj = simulate(cfg.platoon, gains, cfg.channel, cfg.mode, cfg.seed)
    path = io.write_trajectory_csv(traj, cfg.output_dir() / f"{cfg.name}_{cfg.mode}.csv")
    summ = _summary(traj)
    summ["csv"] = path
    lines = [f"{cfg.name}: mode={cfg.mode} seed={cfg.seed} N={cfg.platoon.n_followers} h_w={gains.h_w:g}",
             "amplification ratios: " + " ".join(f"{r:.4f}" for r in summ["ratios"]),
             f"max ratio {summ['max_ratio']:.6f}; max |delta| {summ['max_abs_delta']:.4f} m",
             f"platoon length {summ['length_min']:.2f}..{summ['length_max']:.2f} m",
             f"wrote {path}"]
    if args.plot:
        from .plotting import plot_spacing_errors

        summ["svg"] = plot_spacing_errors(traj, path.with_suffix(".svg"), title=cfg.name)
    _emit(args, summ, lines)
    return 0


def cmd_montecarlo(args) -> int:
    cfg = _run_config(args)
    gains = cfg.resolved_gains()
    mc = monte_carlo_mean(cfg.platoon, gains, cfg.channel, cfg.runs, cfg.seed)
    avg = simulate(cfg.platoon, gains, cfg.channel, "averaged")
    agree = mc.agreement(avg)
    out = cfg.output_dir()
    path = io.write_trajectory_csv(mc.mean, out / f"{cfg.name}_mc_mean.csv")
    n = cfg.platoon.n_followers
    hw_path = io.write_csv(out / f"{cfg.name}_mc_halfwidth.csv", ["t"] + [f"delta_{i}" for i in range(1, n + 1)],
                           np.column_stack([mc.mean.t, mc.halfwidth["delta"]]))
    payload = {"runs": cfg.runs, "seed": cfg.seed, "coverage": agree.coverage, "rms_error": agree.rms_error,
               "max_error": agree.max_error, "csv": path, "halfwidth_csv": hw_path}
    (out / f"{cfg.name}_mc_report.json").write_text(json.dumps(payload, indent=2, default=_jsonable) + "\n",
                                                    encoding="utf-8")
    lines = [f"{cfg.runs} stochastic runs (seed {cfg.seed}) vs averaged dynamics:",
             f"  samples inside the 2-sigma band: {100 * agree.coverage:.2f}%",
             f"  rms |mean - averaged| = {agree.rms_error:.3e} m, max = {agree.max_error:.3e} m",
             f"wrote {path}"]
    _emit(args, payload, lines)
    return 0


def cmd_sweep(args) -> int:
    rhos = list(args.rho or []) + [snr_db_to_rho(s) for s in (args.snr_db or [])]
    if not rhos:
        raise UsageError("give at least one --rho or --snr-db value")
    rows = []
    for rho, tau0, ka, hw in itertools.product(rhos, args.tau0, args.ka or [None], args.hw or [None]):
        res = synthesize(rho, tau0, ka, hw)
        nonempty, verdict = math.nan, ""
        if res.region is not None:
            nonempty = res.region.nonempty
            if args.kp is not None and args.kv is not None:
                g = GainSet(ka, args.kv, args.kp, hw)
                verdict = robust_verdict(ka, ChannelSpec(rho), tau0, g).classification
        rows.append([rho, tau0, res.ka_max, res.ka_opt, res.hw_opt,
                     math.nan if ka is None else ka, math.nan if res.hw_lb is None else res.hw_lb,
                     math.nan if hw is None else hw, nonempty, verdict])
    header = ["rho", "tau0", "ka_max", "ka_opt", "hw_opt", "ka", "hw_lb", "hw", "region_nonempty", "verdict"]
    path = Path(args.out) if args.out and args.out.endswith(".csv") else _out(args) / "sweep.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(v if isinstance(v, str) else io._fmt(v) for v in r) + "\n")
    _emit(args, {"rows": len(rows), "csv": path}, [f"{len(rows)} rows -> {path}"])
    return 0


# ---------------------------------------------------------------- parser

def _add_channel(p, multi=False):
    kw = {"nargs": "+"} if multi else {}
    p.add_argument("--rho", type=float, help="SNR factor (> 1)", **kw)
    p.add_argument("--snr-db", type=float, help="SNR in dB (alternative to --rho)", **kw)


def _add_gains(p):
    for flag, help_ in (("--ka", "acceleration gain"), ("--kv", "velocity gain (1/s)"),
                        ("--kp", "spacing gain (1/s^2)"), ("--hw", "time headway (s)")):
        p.add_argument(flag, type=float, help=help_)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noisy-platoon", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="admissible k_a, headway bound and optimal pair")
    _add_channel(p)
    p.add_argument("--tau0", type=float, default=0.5)
    p.add_argument("--ka", type=float)
    p.add_argument("--hw", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("region", help="export the feasible (k_p, k_v) grid as CSV")
    _add_channel(p)
    p.add_argument("--tau0", type=float, default=0.5)
    _add_gains(p)
    p.add_argument("--kp-range", nargs=3, metavar=("LO", "HI", "N"))
    p.add_argument("--kv-range", nargs=3, metavar=("LO", "HI", "N"))
    p.set_defaults(func=cmd_region)

    for name, func, help_ in (("check", cmd_check, "robust string-stability verdict + |H| CSV"),
                              ("simulate", cmd_simulate, "time-domain run -> trajectory CSV"),
                              ("montecarlo", cmd_montecarlo, "stochastic ensemble mean vs averaged dynamics")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help=f"YAML run config or a bundled scenario {io.SCENARIOS}")
        _add_channel(p)
        p.add_argument("--tau0", type=float)
        _add_gains(p)
        p.add_argument("--seed", type=int)
        p.add_argument("--mode", choices=("stochastic", "averaged", "noiseless"))
        p.add_argument("--runs", type=int)
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="batch synthesis/verdicts over parameter lists")
    _add_channel(p, multi=True)
    p.add_argument("--tau0", type=float, nargs="+", default=[0.5])
    p.add_argument("--ka", type=float, nargs="+")
    p.add_argument("--hw", type=float, nargs="+")
    p.add_argument("--kp", type=float)
    p.add_argument("--kv", type=float)
    p.set_defaults(func=cmd_sweep)

    for p in sub.choices.values():
        p.add_argument("--out", help=f"output directory or .csv path (default ${io.OUT_ENV} or ./out)")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        p.add_argument("--plot", action="store_true", help="also render SVG (needs matplotlib)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
