import math
from pathlib import Path

import numpy as np
import pytest

from oscdfs import cli
from oscdfs.config import ConfigError, expand_axes, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = """
k1 = 1
k2 = 1
k3 = 1
omega1 = 1
omega2 = 1
alpha = 2.3562
phi = 0
mode = simulate
"""


def _read_csv(path):
    lines = Path(path).read_text().splitlines()
    comments = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    header = body[0].split(",")
    boolean = {"true": 1.0, "false": 0.0}
    data = np.array([[boolean[x] if x in boolean else float(x) for x in row.split(",")] for row in body[1:]])
    return comments, header, data


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_minimal_document():
    cfg = parse_config(MINIMAL)
    assert cfg.mode == "simulate"
    assert cfg.cutoff == 3
    assert cfg.initial == ("angles", 2.3562, 0.0)
    assert cfg.system.k3 == 1.0


def test_schwarz_violation_reported():
    with pytest.raises(ConfigError, match="Schwarz"):
        parse_config("system.k1 = 1\nsystem.k2 = 1\nsystem.k3 = 2\n")


def test_unknown_key_has_line_number():
    with pytest.raises(ConfigError, match="line 2: unknown key 'system.k4'"):
        parse_config("system.k1 = 1\nsystem.k4 = 2\n")


def test_bad_value_and_duplicates():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("system.k1 = fast\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("k1 = 1\nsystem.k1 = 2\n")
    with pytest.raises(ConfigError, match="exactly one initial-state form"):
        parse_config("initial.alpha = 1\ninitial.preset = wd\n")


def test_delta_k_axis_expansion():
    cfg = parse_config(
        "k1 = 1\nk2 = 4\n"
        "sweep.axis.name = delta_k\nsweep.axis.min = 1e-4\nsweep.axis.max = 1e-1\n"
        "sweep.axis.count = 16\nsweep.axis.scale = log\n"
    )
    points = expand_axes(cfg.system, cfg.initial, cfg.axes)
    assert len(points) == 16
    dks = np.geomspace(1e-4, 1e-1, 16)
    for (vals, params, _), dk in zip(points, dks):
        assert vals[0] == pytest.approx(dk)
        assert params.k3 == pytest.approx(2.0 - dk)


def test_two_axis_grid_order():
    cfg = parse_config(
        "sweep.axis.name = k1\nsweep.axis.min = 1\nsweep.axis.max = 2\nsweep.axis.count = 2\n"
        "sweep.axis2.name = alpha\nsweep.axis2.min = 0\nsweep.axis2.max = 1\nsweep.axis2.count = 3\n"
    )
    points = expand_axes(cfg.system, cfg.initial, cfg.axes)
    assert [p[0] for p in points][:3] == [(1.0, 0.0), (1.0, 0.5), (1.0, 1.0)]
    assert points[3][1].k1 == 2.0 and points[3][1].k3 == pytest.approx(math.sqrt(2.0))


def test_header_records_resolved_config():
    cfg = parse_config(MINIMAL)
    header = cfg.header()
    assert "system.k3=1" in header and "numerics.cutoff=3" in header
    assert "sweep.axis" not in header


def test_dfs_check_report(tmp_path, capsys):
    cfg = _write(tmp_path, "k1 = 1\nk2 = 1\nk3 = 1\nomega1 = 1\nomega2 = 1\n")
    assert cli.main(["dfs-check", "--config", cfg, "--out", str(tmp_path / "r")]) == 0
    out = capsys.readouterr().out
    assert "dfs_exists: true" in out
    r = f"{1 / math.sqrt(2):.12g}"
    assert f"psi_WD.amp_10: {r} 0" in out
    assert f"psi_WD.amp_01: -{r} 0" in out
    assert (tmp_path / "r_dfs.txt").read_text().startswith("# oscdfs dfs-check")
    comments, header, data = _read_csv(tmp_path / "r_report.csv")
    assert comments and "ratio" in header and data.shape == (1, len(header))


def test_analytic_and_simulate_agree(tmp_path):
    cfg = str(CONFIGS / "dfs_persistence.cfg")
    sim, ana = str(tmp_path / "sim"), str(tmp_path / "ana")
    assert cli.main(["simulate", "--config", cfg, "--out", sim]) == 0
    assert cli.main(["analytic", "--config", cfg, "--out", ana]) == 0
    _, hs, ds = _read_csv(sim + "_trajectory.csv")
    _, ha, da = _read_csv(ana + "_analytic.csv")
    assert np.array_equal(ds[:, 0], da[:, 0])
    assert np.max(np.abs(ds[:, hs.index("P")] - da[:, ha.index("P")])) <= 1e-6
    _, hasym, dasym = _read_csv(ana + "_asymptotics.csv")
    assert dasym[0, hasym.index("P_inf")] == pytest.approx(1.0)


def test_analytic_and_simulate_agree_off_dfs(tmp_path):
    cfg = _write(tmp_path, "k1 = 0.5\nk2 = 2\nk3 = 0.7\nomega1 = 1\nomega2 = 1.5\nalpha = 0.4\nphi = 1\n"
                           "numerics.cutoff = 1\nnumerics.t_max = 4\nnumerics.dt = 0.001\n")
    assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    assert cli.main(["analytic", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    _, hs, ds = _read_csv(tmp_path / "s_trajectory.csv")
    _, ha, da = _read_csv(tmp_path / "a_analytic.csv")
    assert np.max(np.abs(ds[:, hs.index("P")] - da[:, ha.index("P")])) <= 1e-6
    assert not (tmp_path / "a_asymptotics.csv").exists()


def test_reruns_are_byte_identical(tmp_path):
    cfg = str(CONFIGS / "dfs_persistence.cfg")
    outs = []
    for name in ("one", "two"):
        prefix = str(tmp_path / name)
        assert cli.main(["simulate", "--config", cfg, "--out", prefix, "--tmax", "2"]) == 0
        outs.append((tmp_path / f"{name}_trajectory.csv").read_bytes())
    # the prefix is part of the recorded config, so compare everything after it
    strip = [o.replace(b"one", b"X").replace(b"two", b"X") for o in outs]
    assert strip[0] == strip[1]
    assert b"\r" not in outs[0]


def test_sweep_recovers_predicted_slow_rate(tmp_path):
    cfg = str(CONFIGS / "delta_k_sweep.cfg")
    assert cli.main(["sweep", "--config", cfg, "--out", str(tmp_path / "sw")]) == 0
    comments, header, data = _read_csv(tmp_path / "sw_sweep.csv")
    assert header[0] == "delta_k"
    assert any("amplitude convention" in c for c in comments)
    fitted = data[:, header.index("fitted_rate_slow")]
    predicted = data[:, header.index("predicted_rate_slow")]
    assert np.all(np.abs(fitted - predicted) <= 0.1 * predicted)
    assert np.allclose(predicted, 2 * data[:, 0] * 1.0 / 2.0)


def test_sweep_parallel_matches_serial(tmp_path):
    text = (CONFIGS / "delta_k_sweep.cfg").read_text() + "numerics.engine = analytic\n"
    serial = _write(tmp_path, text, "serial.cfg")
    parallel = _write(tmp_path, text + "sweep.jobs = 2\n", "parallel.cfg")
    assert cli.main(["sweep", "--config", serial, "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["sweep", "--config", parallel, "--out", str(tmp_path / "b")]) == 0
    _, _, a = _read_csv(tmp_path / "a_sweep.csv")
    _, _, b = _read_csv(tmp_path / "b_sweep.csv")
    assert np.array_equal(a, b)


def test_kernel_mode(tmp_path):
    cfg = str(CONFIGS / "lorentzian_kernel.cfg")
    assert cli.main(["kernel", "--config", cfg, "--out", str(tmp_path / "k"), "--tmax", "1"]) == 0
    comments, header, data = _read_csv(tmp_path / "k_kernel.csv")
    assert comments[0].startswith("# oscdfs kernel")
    assert header == ["t", "Re_eta", "Im_eta", "abs_eta", "lambda", "delta", "epsilon",
                      "capN", "v", "Re_x", "Im_x", "z"]
    assert np.all(np.abs(data[:, 3] - np.exp(-0.5 * data[:, 0])) <= 0.02 * np.exp(-0.5 * data[:, 0]))


def test_markov_generator_with_temperature(tmp_path):
    cfg = _write(tmp_path, "nbar = 0.1\nnumerics.generator = markov\nnumerics.cutoff = 2\n"
                           "numerics.t_max = 1\nalpha = 0.3\n")
    assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "m")]) == 0
    _, header, data = _read_csv(tmp_path / "m_trajectory.csv")
    assert np.allclose(data[:, header.index("trace")], 1.0)


def test_exit_codes(tmp_path, capsys):
    bad = _write(tmp_path, "system.k1 = 1\nsystem.k3 = 5\n", "bad.cfg")
    assert cli.main(["simulate", "--config", bad]) == 2
    assert "Schwarz" in capsys.readouterr().err
    hot = _write(tmp_path, "nbar = 0.5\n", "hot.cfg")
    assert cli.main(["analytic", "--config", hot, "--out", str(tmp_path / "h")]) == 1
    assert "zero temperature" in capsys.readouterr().err
    clash = _write(tmp_path, "mode = kernel\n", "clash.cfg")
    assert cli.main(["simulate", "--config", clash]) == 2
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.cfg")]) == 1


def test_command_line_overrides(tmp_path):
    cfg = str(CONFIGS / "dfs_persistence.cfg")
    prefix = str(tmp_path / "o")
    assert cli.main(["simulate", "--config", cfg, "--out", prefix, "--tmax", "0.5", "--dt", "0.01",
                     "--cutoff", "1"]) == 0
    comments, header, data = _read_csv(prefix + "_trajectory.csv")
    assert data[-1, 0] == pytest.approx(0.5)
    assert "numerics.cutoff=1" in comments[1]
    assert len([h for h in header if h.startswith("pop_")]) == 4
