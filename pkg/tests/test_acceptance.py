"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line
that is printed in the terminal summary."""
import math
import time

import numpy as np
import pytest

from noisy_platoon import (ChannelSpec, GainSet, LeadProfile, PlatoonConfig, amplification_ratios, build_tf,
                           expected_noise_factor, feasible_region, headway_lower_bound, hinf_norm, ka_upper_bound,
                           magnitude, monte_carlo_mean, optimal_ka_headway, quartic_conditions, robust_verdict,
                           sample_noise_factor, simulate)
from noisy_platoon.channel import noise_factor_std

from conftest import ACCEPTANCE, KA_OPT, OPTIMAL, STABLE, UNSTABLE

RHO, TAU0 = 5.0, 0.5
MC_SEED = 2023


def _record(label, checks):
    """``checks`` is a list of ``(description, ok)``; returns the failures."""
    bad = [d for d, ok in checks if not ok]
    status = "PASS" if not bad else "FAIL"
    ACCEPTANCE.append(f"{label}: {status}  " + "; ".join(d for d, _ in checks))
    return bad


def _clock(fn, repeat=1):
    t0 = time.perf_counter()
    for _ in range(repeat):
        out = fn()
    return out, (time.perf_counter() - t0) / repeat


def test_c1_closed_forms():
    checks = []
    kmax, t1 = _clock(lambda: ka_upper_bound(RHO), 1000)
    hlb, t2 = _clock(lambda: headway_lower_bound(0.5, RHO, TAU0), 1000)
    (kstar, hstar), t3 = _clock(lambda: optimal_ka_headway(RHO, TAU0), 1000)
    checks += [(f"k_a,max={kmax:.4f}", abs(kmax - 0.8333) <= 1e-4),
               (f"h_w,lb={hlb:.4f}", abs(hlb - 0.9375) <= 1e-4),
               (f"k_a*={kstar:.4f}", abs(kstar - 0.3183) <= 1e-4),
               (f"h*={hstar:.4f}", abs(hstar - 0.8727) <= 1e-4),
               (f"max time {1e3 * max(t1, t2, t3):.4f} ms", max(t1, t2, t3) < 1e-3)]
    for ka in (0.1, 0.5, 0.9):
        lim = headway_lower_bound(ka, math.inf, TAU0)
        far = headway_lower_bound(ka, 1e9, TAU0)
        checks.append((f"rho->inf h_w,lb({ka})", abs(lim - 2 * TAU0 / (1 + ka)) <= 1e-12
                       and abs(far - lim) <= 1e-4))
    k_inf, h_inf = optimal_ka_headway(1e9, TAU0)
    checks.append(("rho->inf k_a*->1, h*->tau0", abs(k_inf - 1) <= 1e-4 and abs(h_inf - TAU0) <= 1e-4
                   and optimal_ka_headway(math.inf, TAU0) == (1.0, TAU0)))
    assert not _record("C1 closed forms", checks)


def test_c2_region_membership():
    stable = feasible_region(0.5, RHO, TAU0, 0.95)
    optimal = feasible_region(KA_OPT, RHO, TAU0, 0.88)
    # sums kv/a + kp/b, frozen from exact rational arithmetic
    s1 = 0.63 / stable.a1 + 0.009 / stable.b1
    s2 = 0.63 / stable.a2 + 0.009 / stable.b2
    o1 = 0.85 / optimal.a1 + 0.003 / optimal.b1
    o2 = 0.85 / optimal.a2 + 0.003 / optimal.b2
    checks = [("(0.009,0.63) in S", stable.contains(0.009, 0.63)),
              ("(0.003,0.85) in S at k_a*", optimal.contains(0.003, 0.85)),
              (f"S1 sum {s1:.9f}", abs(s1 - 0.997734375) <= 1e-12),
              (f"S2 sum {s2:.8f}", abs(s2 - 1.00426875) <= 1e-12),
              (f"optimal S1 sum {o1:.6f}", abs(o1 - 0.9982883001006262) <= 1e-12),
              (f"optimal S2 sum {o2:.6f}", abs(o2 - 1.005105758239504) <= 1e-12)]
    assert not _record("C2 region membership", checks)


def test_c3_frequency_verdicts(channel):
    ka_mean = 0.5 * expected_noise_factor(channel)
    checks = []
    for gains, want in ((STABLE, "certified"), (UNSTABLE, "unstable")):
        def run():
            norm, _ = hinf_norm(build_tf(gains, ka_mean, TAU0))
            return norm, robust_verdict(gains.k_a, channel, TAU0, gains)
        (norm, verdict), dt = _clock(run)
        ok = norm <= 1 + 1e-6 if want == "certified" else norm > 1
        checks += [(f"h_w={gains.h_w} ||H||inf={norm:.6f}", ok),
                   (f"verdict {verdict.classification} (worst {verdict.hinf:.6f})",
                    verdict.classification == want),
                   (f"{dt:.3f} s", dt < 1.0)]
    assert not _record("C3 frequency verdicts", checks)


def test_c4_time_domain_dichotomy(platoon, channel):
    checks = []
    for name, gains, want_stable in (("h_w=0.95", STABLE, True), ("optimal", OPTIMAL, True),
                                     ("h_w=0.65", UNSTABLE, False)):
        traj, dt = _clock(lambda: simulate(platoon, gains, channel, "averaged"))
        rep = amplification_ratios(traj.delta)
        ok = rep.max_ratio <= 1 + 1e-3 if want_stable else rep.max_ratio > 1
        bounded = np.all(np.isfinite(traj.delta)) and np.max(np.abs(traj.delta)) < 10
        if want_stable:
            # a certified design must not amplify in the time domain either
            cert = robust_verdict(gains.k_a, channel, TAU0, gains).classification == "certified"
            ok = ok and cert
        checks += [(f"{name} max ratio {rep.max_ratio:.5f}", ok and bounded), (f"{dt:.2f} s", dt < 10)]
    assert not _record("C4 time-domain dichotomy", checks)


@pytest.mark.slow
def test_c5_averaging(platoon, channel, averaged_runs):
    avg = averaged_runs["stable"]
    mc, dt = _clock(lambda: monte_carlo_mean(platoon, STABLE, channel, 500, seed=MC_SEED))
    agree = mc.agreement(avg)
    err = {}
    for m in (100, 400):
        err[m] = monte_carlo_mean(platoon, STABLE, channel, m, seed=MC_SEED).agreement(avg).rms_error
    ratio = err[100] / err[400]
    checks = [(f"M=500 coverage {100 * agree.coverage:.2f}% (seed {MC_SEED})", agree.coverage >= 0.95),
              (f"rms error M=100/M=400 = {ratio:.3f}", 1.0 <= ratio <= 3.0),
              (f"M=500 in {dt:.1f} s", dt < 300)]
    assert not _record("C5 averaging validation", checks)


def test_c6_frequency_time_crosscheck(channel):
    omega = 0.1
    period = 2 * math.pi / omega
    n_periods = 15
    lead = LeadProfile("sine", 0.5, omega, 10.0, 10.0 + n_periods * period)
    cfg = PlatoonConfig(n_followers=2, lead=lead, dt=0.02, horizon=lead.end)
    ka_mean = STABLE.k_a * expected_noise_factor(channel)
    checks = []
    for gains in (STABLE, UNSTABLE):
        traj = simulate(cfg, gains, channel, "averaged")
        window = traj.t >= traj.t[-1] - 2 * period
        t = traj.t[window]
        basis = np.column_stack([np.sin(omega * t), np.cos(omega * t), np.ones_like(t)])
        amp = [np.hypot(*np.linalg.lstsq(basis, traj.delta[window, i], rcond=None)[0][:2]) for i in (0, 1)]
        measured = amp[1] / amp[0]
        predicted = magnitude(build_tf(gains, ka_mean, cfg.tau0), omega)
        rel = abs(measured / predicted - 1)
        checks.append((f"h_w={gains.h_w}: {measured:.6f} vs |H(j0.1)|={predicted:.6f} ({100 * rel:.2e}%)",
                       rel <= 0.05))
    assert not _record("C6 frequency/time cross-check", checks)


def _rk4_ratio():
    base = PlatoonConfig(dt=0.0025)
    noiseless = ChannelSpec.noiseless()
    ref = simulate(base, STABLE, noiseless, "noiseless")
    errs = []
    for dt in (0.04, 0.02):
        traj = simulate(base.replace(dt=dt), STABLE, noiseless, "noiseless")
        stride = round(dt / base.dt)
        errs.append(np.max(np.abs(traj.x - ref.x[::stride])))
    return errs[0] / errs[1], errs


def test_c7_property_suites(channel, averaged_runs):
    rng = np.random.default_rng(7)
    checks = []

    # noise samples: range and unbiasedness
    m = 200_000
    w = sample_noise_factor(channel, rng, size=m)
    lo, hi = channel.interval()
    z = abs(w.mean() - expected_noise_factor(channel)) / (noise_factor_std(channel) / math.sqrt(m))
    checks.append((f"noise range+mean (z={z:.2f})", w.min() >= lo and w.max() <= hi and z < 4))

    # h_w,lb unimodal with the closed-form minimizer, and region nonempty iff h_w > h_w,lb
    uni_ok = region_ok = True
    for _ in range(1000):
        rho, tau0 = 1 + 10 ** rng.uniform(-2, 3), rng.uniform(0.05, 2.0)
        k_star, h_star = optimal_ka_headway(rho, tau0)
        kmax = ka_upper_bound(rho)
        ks = np.concatenate([np.linspace(k_star * 1e-3, k_star, 8), np.linspace(k_star, kmax, 9)[1:-1]])
        h = np.array([headway_lower_bound(k, rho, tau0) for k in ks])
        left, right = h[:8], h[7:]
        uni_ok &= bool(np.all(np.diff(left) < 0) and np.all(np.diff(right) > 0) and h.min() >= h_star - 1e-12)
        ka = rng.uniform(0.001, 0.999) * kmax
        lb = headway_lower_bound(ka, rho, tau0)
        hw = lb * rng.choice([rng.uniform(0.5, 0.999), rng.uniform(1.001, 1.5)])
        region_ok &= feasible_region(ka, rho, tau0, hw).nonempty == (hw > lb)
    checks += [("h_w,lb unimodal, k_a* optimal (1e3 draws)", uni_ok),
               ("S nonempty <=> h_w > h_w,lb (1e3 draws)", region_ok)]

    # analytic certificate vs sampled norms over random lags and effective gains
    sound = True
    designs = 0
    while designs < 20:
        rho, tau0 = 1 + 10 ** rng.uniform(-0.5, 2), rng.uniform(0.1, 1.5)
        ka = rng.uniform(0.05, 0.95) * ka_upper_bound(rho)
        hw = headway_lower_bound(ka, rho, tau0) * rng.uniform(1.01, 1.6)
        kp, kv = feasible_region(ka, rho, tau0, hw).centroid()
        g = GainSet(ka, kv, kp, hw)
        band = ((1 - 1 / rho) * ka, (1 + 1 / rho) * ka)
        if not quartic_conditions(band, g.gamma, tau0, kp, kv).passed:
            continue
        designs += 1
        for tau in rng.uniform(1e-3, 1, 20) * tau0:
            for ka_eff in rng.uniform(*band, 10):
                sound &= hinf_norm(build_tf(g, ka_eff, tau), n_grid=400)[0] <= 1 + 1e-9
    checks.append(("certificate sound (20 designs x 200 samples)", sound))

    dc = all(magnitude(build_tf(GainSet(*rng.uniform(0.01, 2, 4)), rng.uniform(0.01, 1.5),
                                rng.uniform(0.01, 2)), 0.0) == 1.0 for _ in range(200))
    checks.append(("DC gain = 1", dc))

    ratio, errs = _rk4_ratio()
    checks.append((f"RK4 error ratio dt 0.04->0.02 = {ratio:.2f}", 12 <= ratio <= 20))

    short, wide = averaged_runs["optimal"].length, averaged_runs["stable"].length
    checks.append((f"length(0.88) < length(0.95) pointwise (min gap {np.min(wide - short):.2f} m)",
                   bool(np.all(short < wide))))
    assert not _record("C7 property suites", checks)
