import hashlib
import json
import textwrap

import numpy as np
import pytest

from mml import cli, harness
from mml.config import ConfigError, load_config
from mml.curves import FidelityCurve, emit_curve, parse_curve


def write_config(tmp_path, body, name="scenario.toml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(body))
    return path


QUENCH_SMOKE = """
    [scenario]
    kind = "quench"
    id = "smoke"
    seed = 7
    output_dir = "{out}"

    [chain]
    mu0 = 0.0
    delta0 = 1.0

    [ensemble]
    mu_minus = 1.0
    mu_plus = 1.5
    nd = [3]

    [sweep]
    n = [4]

    [time_grid]
    stop = 2.0
    count = 9
"""


class TestConfig:
    def test_load_and_resolve(self, tmp_path):
        cfg = load_config(write_config(tmp_path, QUENCH_SMOKE.format(out=tmp_path)))
        assert cfg.kind == "quench"
        assert cfg.n_list == (4,) and cfg.nd_list == (3,)
        assert cfg.resolved()["time_grid"]["count"] == 9

    def test_unknown_key_rejected(self, tmp_path):
        bad = QUENCH_SMOKE.format(out=tmp_path) + "\n[ensemble2]\nx = 1\n"
        with pytest.raises(ConfigError, match="unknown sections"):
            load_config(write_config(tmp_path, bad))

    def test_missing_interval_rejected(self, tmp_path):
        body = QUENCH_SMOKE.format(out=tmp_path).replace("mu_minus = 1.0\n", "")
        with pytest.raises(ConfigError, match="mu_minus"):
            load_config(write_config(tmp_path, body))

    def test_bad_grid_rejected(self, tmp_path):
        body = QUENCH_SMOKE.format(out=tmp_path).replace("count = 9", "count = 1")
        with pytest.raises(ConfigError, match="two points"):
            load_config(write_config(tmp_path, body))


class TestCurveFiles:
    def test_roundtrip_identity(self, tmp_path):
        rng = np.random.default_rng(0)
        times = np.cumsum(rng.uniform(0.05, 0.3, 17))
        curve = FidelityCurve(
            times=times, n_sites=8, n_members=31, seed=3, scenario_id="rt",
            f_opt=1.0 - rng.uniform(0, 0.3, 17),
            f_upper=1.0 - rng.uniform(0, 0.2, 17))
        path = emit_curve(curve, tmp_path / "c.csv")
        assert parse_curve(path) == curve

    def test_absent_columns_stay_absent(self, tmp_path):
        curve = FidelityCurve(times=[0.0, 1.0], n_sites=4, n_members=2, seed=0,
                              scenario_id="x", f_gauss=[1.0, 0.9])
        back = parse_curve(emit_curve(curve, tmp_path / "c.csv"))
        assert back.f_opt is None and back.f_lower is None
        assert back == curve

    def test_range_validation(self):
        with pytest.raises(ValueError, match="admissible"):
            FidelityCurve(times=[0.0, 1.0], n_sites=4, n_members=2, seed=0,
                          scenario_id="x", f_opt=[1.0, 0.2])


class TestMemoryTime:
    def _curve(self, values, times=None):
        values = np.asarray(values, dtype=float)
        times = np.arange(values.size, dtype=float) if times is None else times
        return FidelityCurve(times=times, n_sites=8, n_members=3, seed=0,
                             scenario_id="m", f_opt=values)

    def test_constant_curve_beyond_horizon(self):
        mt = harness.memory_time(self._curve(np.ones(30)), 0.999)
        assert mt.beyond_horizon and mt.t0 is None
        assert mt.horizon == 29.0

    def test_linear_curve_analytic_root(self):
        times = np.linspace(0.0, 3.0, 301)
        curve = self._curve(1.0 - times / 100.0, times)
        mt = harness.memory_time(curve, 0.99)
        assert abs(mt.t0 - 1.0) <= 1e-6

    def test_monotone_in_threshold(self):
        times = np.linspace(0.0, 6.0, 400)
        vals = 1.0 - 0.02 * times + 0.004 * np.sin(9 * times)
        curve = self._curve(np.clip(vals, 0.6, 1.0), times)
        t_low = harness.memory_time(curve, 0.97).t0
        t_high = harness.memory_time(curve, 0.99).t0
        assert t_low >= t_high

    def test_degree_sensitivity_reported(self):
        times = np.linspace(0.0, 3.0, 200)
        curve = self._curve(1.0 - times / 50.0, times)
        mt = harness.memory_time(curve, 0.99)
        assert set(mt.sensitivity) >= {4, 5, 6}

    def test_requires_opt_column(self):
        curve = FidelityCurve(times=[0.0, 1.0], n_sites=4, n_members=2, seed=0,
                              scenario_id="x", f_gauss=[1.0, 0.9])
        with pytest.raises(ValueError, match="optimal-fidelity"):
            harness.memory_time(curve, 0.99)


class TestExtrapolation:
    def test_exact_linear_model(self):
        nds = [5, 11, 31, 101]
        vals = [(nd, 0.9 + 0.4 / nd) for nd in nds]
        res = harness.extrapolate_nd(vals, "gauss")
        assert abs(res.limit - 0.9) <= 1e-9
        assert res.mode == "1/Nd-linear"

    def test_constant_series(self):
        res = harness.extrapolate_nd([(3, 0.8), (9, 0.8), (27, 0.8)], "gauss")
        assert abs(res.limit - 0.8) <= 1e-12

    def test_empirical_mode(self):
        res = harness.extrapolate_nd([(3, 0.7), (9, 0.75), (27, 0.76)], "opt")
        assert res.limit == 0.76
        assert res.mode == "empirical-convergence"
        assert abs(res.diagnostic - 0.01) <= 1e-12

    def test_needs_three_points(self):
        with pytest.raises(ValueError, match="three"):
            harness.extrapolate_nd([(3, 0.7), (9, 0.75)], "gauss")


class TestScalingFit:
    def test_exact_exponential(self):
        rows = [(n, 2.0 * np.exp(0.3 * n)) for n in (8, 12, 16, 20, 24)]
        fit = harness.scaling_fit(rows)
        assert abs(fit.rate - 0.3) <= 1e-6
        assert abs(fit.prefactor - 2.0) <= 1e-6
        assert fit.r_squared >= 1.0 - 1e-12

    def test_constant_times(self):
        fit = harness.scaling_fit([(n, 5.0) for n in (8, 12, 16, 20)])
        assert abs(fit.rate) <= 1e-9

    def test_excludes_nonfinite_rows(self):
        rows = [(8, 1.0), (12, 2.0), (16, 4.0), (20, 8.0), (24, float("nan"))]
        fit = harness.scaling_fit(rows)
        assert fit.n_used == 4

    def test_too_few_rows(self):
        with pytest.raises(ValueError, match="four"):
            harness.scaling_fit([(8, 1.0), (12, 2.0), (16, float("nan")), (20, None)])


class TestRunScenario:
    def test_smoke_quench(self, tmp_path):
        cfg = load_config(write_config(tmp_path, QUENCH_SMOKE.format(out=tmp_path / "o")))
        paths, failures = harness.run_scenario(cfg)
        assert not failures
        curve = parse_curve(paths[0])
        assert curve.f_opt is not None and curve.f_gauss is not None
        assert abs(curve.f_opt[0] - 1.0) <= 1e-9
        meta = json.loads(paths[0].with_name(paths[0].stem + ".meta.json").read_text())
        assert meta["cell"] == {"N": 4, "N_d": 3}

    def test_deterministic_reruns(self, tmp_path):
        cfg = load_config(write_config(tmp_path, QUENCH_SMOKE.format(out=tmp_path / "a")))
        paths_a, _ = harness.run_scenario(cfg)
        paths_b, _ = harness.run_scenario(cfg, tmp_path / "b")
        ha = hashlib.sha256(paths_a[0].read_bytes()).hexdigest()
        hb = hashlib.sha256(paths_b[0].read_bytes()).hexdigest()
        assert ha == hb

    def test_lindblad_scenario(self, tmp_path):
        body = """
            [scenario]
            kind = "lindblad"
            id = "loss"
            output_dir = "{out}"

            [lindblad]
            loss_rate = 1.0

            [sweep]
            n = [3]

            [time_grid]
            stop = 1.5
            count = 7
        """.format(out=tmp_path / "o")
        cfg = load_config(write_config(tmp_path, body))
        paths, failures = harness.run_scenario(cfg)
        assert not failures
        curve = parse_curve(paths[0])
        assert np.all(curve.f_lower <= curve.f_upper + 1e-12)
        assert abs(curve.f_upper[0] - 1.0) <= 1e-9

    def test_thermal_scenario(self, tmp_path):
        body = """
            [scenario]
            kind = "thermal-quench"
            id = "warm"
            output_dir = "{out}"

            [ensemble]
            mu_minus = 1.0
            mu_plus = 1.5
            nd = [2]

            [thermal]
            beta = 1.0

            [sweep]
            n = [3]

            [time_grid]
            stop = 1.0
            count = 5
        """.format(out=tmp_path / "o")
        cfg = load_config(write_config(tmp_path, body))
        paths, failures = harness.run_scenario(cfg)
        assert not failures
        curve = parse_curve(paths[0])
        assert curve.f_upper is not None and curve.f_upper[0] == 1.0

    def test_failure_isolation(self, tmp_path, monkeypatch):
        import dataclasses

        cfg = load_config(write_config(tmp_path, QUENCH_SMOKE.format(out=tmp_path / "o")))
        cfg = dataclasses.replace(cfg, n_list=(4, 5))
        real = harness.run_cell

        def flaky(c, n, nd):
            if n == 4:
                raise RuntimeError("synthetic cell failure")
            return real(c, n, nd)

        monkeypatch.setattr(harness, "_cell_task",
                            lambda args: (flaky(*args), 0.0))
        paths, failures = harness.run_scenario(cfg)
        assert len(paths) == 1 and len(failures) == 1
        assert failures[0].n == 4


class TestCli:
    def test_run_and_memory_time(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, QUENCH_SMOKE.format(out=tmp_path / "o"))
        assert cli.main(["run", str(cfg_path)]) == 0
        out = capsys.readouterr().out.strip().splitlines()
        curve_path = out[-1]
        table = tmp_path / "table.csv"
        assert cli.main(["memory-time", curve_path, "--threshold", "0.999",
                         "--table", str(table)]) == 0
        assert table.read_text().startswith(harness.TABLE_HEADER)

    def test_config_error_exit_code(self, tmp_path):
        bad = write_config(tmp_path, "[scenario]\nkind = 'nope'\n")
        assert cli.main(["run", str(bad)]) == 2

    def test_scaling_roundtrip(self, tmp_path, capsys):
        table = tmp_path / "t.csv"
        lines = [harness.TABLE_HEADER]
        for n in (8, 12, 16, 20):
            lines.append(f"{n},0.999,{float(2.0 * np.exp(0.25 * n))!r},10.0,0,6,0.0")
        table.write_text("\n".join(lines) + "\n")
        assert cli.main(["scaling", str(table)]) == 0
        assert "rate c = 0.25" in capsys.readouterr().out

    def test_selftest_passes(self, capsys):
        assert cli.main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") >= 7 and "FAIL" not in out

    def test_plot_writes_figure(self, tmp_path):
        curve = FidelityCurve(times=np.linspace(0, 2, 9), n_sites=4, n_members=2,
                              seed=0, scenario_id="p",
                              f_opt=np.linspace(1.0, 0.9, 9))
        path = emit_curve(curve, tmp_path / "c.csv")
        fig = tmp_path / "fig.png"
        assert cli.main(["plot", str(path), "--out", str(fig)]) == 0
        assert fig.stat().st_size > 0

    def test_extrapolate_cli(self, tmp_path, capsys):
        times = np.linspace(0, 1, 5)
        for nd in (3, 9, 27):
            curve = FidelityCurve(times=times, n_sites=4, n_members=nd, seed=0,
                                  scenario_id="e", f_gauss=0.9 + 0.3 / nd * np.ones(5))
            emit_curve(curve, tmp_path / f"c{nd}.csv")
        out_file = tmp_path / "ex.csv"
        rc = cli.main(["extrapolate", *(str(tmp_path / f"c{nd}.csv") for nd in (3, 9, 27)),
                       "--out", str(out_file)])
        assert rc == 0
        body = out_file.read_text().splitlines()
        assert body[0] == "t,limit,mode,diagnostic"
        assert all(abs(float(line.split(",")[1]) - 0.9) < 1e-9 for line in body[1:])
