import json

import numpy as np
import pytest

from noisy_platoon import ChannelSpec, simulate
from noisy_platoon import io
from noisy_platoon.cli import main
from noisy_platoon.simulator import LeadProfile

from conftest import KA_OPT, OPTIMAL, STABLE, UNSTABLE


@pytest.fixture
def short_config(tmp_path):
    """The stable scenario shrunk to 3 followers and 20 s."""
    cfg = io.scenario("stable_0p95")
    cfg = cfg.replace(platoon=cfg.platoon.replace(n_followers=3, horizon=20.0,
                                                  lead=LeadProfile.sine_burst(start=2.0)),
                      name="short", runs=4, out_dir=str(tmp_path / "out"))
    path = tmp_path / "short.yaml"
    io.dump_run_config(cfg, path)
    return path


# ---------------------------------------------------------------- io

@pytest.mark.parametrize("name, gains", [("stable_0p95", STABLE), ("unstable_0p65", UNSTABLE),
                                         ("optimal_0p88", OPTIMAL)])
def test_bundled_scenarios(name, gains):
    cfg = io.scenario(name)
    assert cfg.gains == gains
    assert cfg.channel == ChannelSpec(5.0)
    assert cfg.platoon.n_followers == 12 and cfg.platoon.dt == 0.01 and cfg.platoon.horizon == 150.0
    assert cfg.seed == 2023 and cfg.runs == 500


def test_optimal_scenario_uses_optimal_gain():
    assert io.scenario("optimal_0p88").gains.k_a == KA_OPT


def test_unknown_scenario():
    with pytest.raises(ValueError, match="unknown scenario"):
        io.scenario("fast")


def test_config_round_trip(tmp_path, short_config):
    cfg = io.load_run_config(short_config)
    again = tmp_path / "again.yaml"
    io.dump_run_config(cfg, again)
    cfg2 = io.load_run_config(again)
    assert cfg2 == cfg
    runs = []
    for c, tag in ((cfg, "a"), (cfg2, "b")):
        traj = simulate(c.platoon, c.resolved_gains(), c.channel, "stochastic", c.seed)
        runs.append(io.write_trajectory_csv(traj, tmp_path / f"{tag}.csv").read_bytes())
    assert runs[0] == runs[1]


def test_config_validation(tmp_path):
    base = io.run_config_to_dict(io.scenario("stable_0p95"))
    bad = dict(base, channel={"rho": 0.5})
    with pytest.raises(ValueError):
        io.run_config_from_dict(bad)
    with pytest.raises(ValueError, match="not both"):
        io.run_config_from_dict(dict(base, channel={"rho": 5, "snr_db": 14}))
    with pytest.raises(ValueError, match="channel"):
        io.run_config_from_dict({k: v for k, v in base.items() if k != "channel"})
    with pytest.raises(ValueError):
        io.run_config_from_dict(dict(base, mode="fancy"))
    with pytest.raises(ValueError):
        io.run_config_from_dict(dict(base, platoon=dict(base["platoon"], dt=0.1)))
    p = tmp_path / "list.yaml"
    p.write_text("- 1\n- 2\n")
    with pytest.raises(ValueError, match="mapping"):
        io.load_run_config(p)


def test_snr_db_config():
    base = io.run_config_to_dict(io.scenario("stable_0p95"))
    cfg = io.run_config_from_dict(dict(base, channel={"snr_db": 20.0, "bits": 4}))
    assert cfg.channel.rho == pytest.approx(10.0)
    assert cfg.channel.gammas == (0.5,) * 4


def test_missing_gains_are_synthesized():
    cfg = io.scenario("stable_0p95").replace(gains=None)
    g = cfg.resolved_gains()
    from noisy_platoon import feasible_region

    assert feasible_region(g.k_a, 5.0, 0.5, g.h_w).contains(g.k_p, g.k_v)


def test_trajectory_csv_layout(tmp_path, short_config):
    cfg = io.load_run_config(short_config)
    traj = simulate(cfg.platoon, cfg.gains, cfg.channel)
    path = io.write_trajectory_csv(traj, tmp_path / "t.csv")
    raw = path.read_bytes()
    assert b"\r" not in raw
    header = raw.split(b"\n", 1)[0].decode()
    assert header == "t,x_0,v_0,a_0,x_1,v_1,a_1,x_2,v_2,a_2,x_3,v_3,a_3,delta_1,delta_2,delta_3,length"
    back = io.read_trajectory_csv(path, cfg.platoon.d, cfg.gains.h_w)
    np.testing.assert_array_equal(back.x, traj.x)
    np.testing.assert_array_equal(back.delta, traj.delta)


def test_out_dir_env(monkeypatch, tmp_path):
    monkeypatch.setenv(io.OUT_ENV, str(tmp_path / "env"))
    assert io.default_out_dir() == tmp_path / "env"
    assert io.scenario("stable_0p95").output_dir() == tmp_path / "env"


# ---------------------------------------------------------------- cli

def test_synth_reference_values(capsys):
    assert main(["synth", "--rho", "5", "--tau0", "0.5", "--ka", "0.5", "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["ka_max"] == pytest.approx(0.8333, abs=1e-4)
    assert out["hw_lb"] == pytest.approx(0.9375, abs=1e-4)
    assert out["ka_opt"] == pytest.approx(0.3183, abs=1e-4)
    assert out["hw_opt"] == pytest.approx(0.8727, abs=1e-4)


def test_synth_text_and_snr(capsys):
    assert main(["synth", "--snr-db", "20", "--tau0", "0.5"]) == 0
    text = capsys.readouterr().out
    assert "rho            = 10" in text and "k_a*" in text


@pytest.mark.parametrize("argv", [["synth", "--rho", "0.9"], ["synth", "--rho", "1"], ["synth"],
                                  ["synth", "--rho", "5", "--snr-db", "10"],
                                  ["synth", "--rho", "5", "--ka", "0.9"],
                                  ["region", "--rho", "5", "--ka", "0.5"]])
def test_invalid_input_exit_code(argv, capsys):
    assert main(argv) == 2
    assert "error:" in capsys.readouterr().err


def test_region_marks_reference_point(tmp_path, capsys):
    out = tmp_path / "reg.csv"
    assert main(["region", "--rho", "5", "--tau0", "0.5", "--ka", "0.5", "--hw", "0.95",
                 "--kp", "0.009", "--kv", "0.63", "--kp-range", "0.009", "0.009", "1",
                 "--kv-range", "0.63", "0.63", "1", "--out", str(out), "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["contains"] is True
    lines = out.read_text().splitlines()
    assert lines == ["kp,kv,in_S1,in_S2,in_S", "0.009,0.63,1,1,1"]


def test_region_empty(tmp_path, capsys):
    out = tmp_path / "reg.csv"
    assert main(["region", "--rho", "5", "--ka", "0.5", "--hw", "0.5", "--out", str(out)]) == 0
    assert "EMPTY" in capsys.readouterr().out
    lines = out.read_text().splitlines()
    assert lines[-1].startswith("# empty")
    assert all(r.endswith(",0") for r in lines[1:-1])


def test_region_default_grid_and_env(tmp_path, monkeypatch):
    monkeypatch.setenv(io.OUT_ENV, str(tmp_path / "env"))
    assert main(["region", "--rho", "5", "--ka", "0.5", "--hw", "0.95", "--plot"]) == 0
    data = np.loadtxt(tmp_path / "env" / "region.csv", delimiter=",", skiprows=1)
    assert data.shape == (101 * 101, 5) and data[:, 4].any()
    assert (tmp_path / "env" / "region.svg").exists()


@pytest.mark.parametrize("name, verdict", [("stable_0p95", "certified"), ("unstable_0p65", "unstable"),
                                           ("optimal_0p88", "certified")])
def test_check_scenarios(name, verdict, tmp_path, capsys):
    assert main(["check", "--config", name, "--out", str(tmp_path), "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["classification"] == verdict
    freq = np.loadtxt(tmp_path / f"{name}_freq.csv", delimiter=",", skiprows=1)
    assert out["csv"] == str(tmp_path / f"{name}_freq.csv")
    assert freq.shape[1] == 2 and freq[0, 0] == 1e-3 and freq[0, 1] == pytest.approx(1.0, abs=1e-3)


def test_check_overrides(tmp_path, capsys):
    assert main(["check", "--config", "stable_0p95", "--hw", "0.65", "--out", str(tmp_path), "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["classification"] == "unstable"


def test_check_without_config_synthesizes(tmp_path, capsys):
    assert main(["check", "--rho", "5", "--out", str(tmp_path), "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["classification"] == "certified"


def test_simulate_command(short_config, tmp_path, capsys):
    assert main(["simulate", "--config", str(short_config), "--mode", "stochastic", "--seed", "7", "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    path = tmp_path / "out" / "short_stochastic.csv"
    assert out["csv"] == str(path) and path.exists()
    cfg = io.load_run_config(short_config)
    traj = simulate(cfg.platoon, cfg.gains, cfg.channel, "stochastic", seed=7)
    expected = tmp_path / "expected.csv"
    io.write_trajectory_csv(traj, expected)
    assert path.read_bytes() == expected.read_bytes()
    assert len(out["ratios"]) == 2


def test_montecarlo_command(short_config, tmp_path, capsys):
    assert main(["montecarlo", "--config", str(short_config), "--runs", "3"]) == 0
    assert "2-sigma band" in capsys.readouterr().out
    out = tmp_path / "out"
    report = json.loads((out / "short_mc_report.json").read_text())
    assert report["runs"] == 3 and 0.0 <= report["coverage"] <= 1.0
    assert (out / "short_mc_mean.csv").exists()
    hw = (out / "short_mc_halfwidth.csv").read_text().splitlines()[0]
    assert hw == "t,delta_1,delta_2,delta_3"


def test_sweep_command(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--rho", "5", "10", "--tau0", "0.5", "--ka", "0.5", "--hw", "0.65", "0.95",
                 "--kp", "0.009", "--kv", "0.63", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "rho,tau0,ka_max,ka_opt,hw_opt,ka,hw_lb,hw,region_nonempty,verdict"
    assert len(lines) == 5
    row = dict(zip(lines[0].split(","), lines[2].split(",")))
    assert float(row["hw_lb"]) == pytest.approx(0.9375) and row["verdict"] == "certified"
