import json
import math

import numpy as np
import pytest

from trihybrid.channel import isotropic_em
from trihybrid.harness import (RESULT_HEADER, RunConfig, TrialResult, dbm_to_watts, export_pattern,
                               export_results, load_config, read_results, run_single, run_trial, summarize,
                               sweep, tradeoff_curve, trial_scenario, watts_to_dbm)
from trihybrid.cli import main
from trihybrid.harmonics import HarmonicBasis, basis_vector

FAST = dict(trials=2, modes=("oa-digital", "era-digital"), max_iterations=6)


def test_dbm_conversions():
    assert dbm_to_watts(-80) == pytest.approx(1e-11)
    assert dbm_to_watts(30) == pytest.approx(1.0)
    assert watts_to_dbm(dbm_to_watts(-17.5)) == pytest.approx(-17.5)


def test_defaults():
    cfg = RunConfig()
    assert (cfg.nx, cfg.ny, cfg.rf_chains, cfg.num_users, cfg.num_scatterers) == (4, 4, 2, 2, 2)
    assert cfg.basis().size == 25 and cfg.receive_antennas == 16
    assert cfg.noise_power == pytest.approx(1e-11)
    assert cfg.geometry().dx == pytest.approx(cfg.geometry().wavelength / 2)
    assert cfg.carrier_hz == 3e9 and cfg.trials == 100


@pytest.mark.parametrize("bad", [dict(power_dbm=()), dict(beta=()), dict(beta=(1.5,)), dict(modes=("x",)),
                                 dict(workers=0)])
def test_invalid_config(bad):
    with pytest.raises(ValueError):
        RunConfig(**bad)


def test_load_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"trials": 3, "power_dbm": [-30, -10]}))
    cfg = load_config(path)
    assert cfg.trials == 3 and cfg.power_dbm == (-30.0, -10.0)
    path.write_text(json.dumps({"trails": 3}))
    with pytest.raises(ValueError, match="trails"):
        load_config(path)
    with pytest.raises(OSError, match="missing"):
        load_config(tmp_path / "missing.json")


class TestTrials:
    def test_deterministic_serialization(self, tmp_path):
        cfg = RunConfig(**FAST, record_timing=False)
        a = export_results(run_trial(cfg, 1), tmp_path / "a.csv").read_bytes()
        b = export_results(run_trial(cfg, 1), tmp_path / "b.csv").read_bytes()
        assert a == b

    def test_modes_share_scenario(self):
        cfg = RunConfig(**FAST)
        assert trial_scenario(cfg, 4) == trial_scenario(cfg, 4)
        assert trial_scenario(cfg, 4) != trial_scenario(cfg, 5)
        single = run_single(cfg, 4)
        assert set(single.reports) == set(cfg.modes)

    def test_cells_and_order(self):
        cfg = RunConfig(trials=1, modes=("oa-digital",), power_dbm=(-30.0, -20.0), beta=(0.0, 1.0),
                        max_iterations=5)
        rows = run_trial(cfg, 0)
        assert [(r.power_dbm, r.beta) for r in rows] == [(-30, 0), (-30, 1), (-20, 0), (-20, 1)]
        assert all(math.isfinite(r.objective) and not r.error for r in rows)
        by_cell = {(r.power_dbm, r.beta): r for r in rows}
        # boundary priorities and power monotonicity on the paired scenario
        assert by_cell[(-20, 0)].sum_rate >= by_cell[(-20, 1)].sum_rate
        assert by_cell[(-20, 1)].scnr_db >= by_cell[(-20, 0)].scnr_db
        assert by_cell[(-20, 0)].objective > by_cell[(-30, 0)].objective

    def test_sweep_matches_run_trial_and_workers(self):
        cfg = RunConfig(**FAST, record_timing=False)
        serial = sweep(cfg)
        assert serial[:2] == run_trial(cfg, 0)
        assert sweep(cfg.replace(workers=2)) == serial
        assert [(r.trial, r.mode) for r in serial] == [(0, "oa-digital"), (0, "era-digital"),
                                                       (1, "oa-digital"), (1, "era-digital")]

    def test_summary_order_independent(self):
        cfg = RunConfig(**FAST, record_timing=False)
        rows = sweep(cfg)
        assert summarize(rows) == summarize(list(reversed(rows)))
        s = {x.mode: x for x in summarize(rows)}
        assert s["era-digital"].count == 2 and s["era-digital"].failures == 0
        curve = tradeoff_curve(rows, "oa-digital", -20.0)
        assert len(curve) == 1 and curve[0][0] == 0.5

    def test_failures_recorded(self):
        row = TrialResult(0, 1, "oa-digital", 0.5, -20, math.nan, math.nan, math.nan, 0, 0.0, False, "boom")
        summary = summarize([row])[0]
        assert summary.failures == 1 and math.isnan(summary.objective_mean)


class TestExport:
    def test_empty_is_header_only(self, tmp_path):
        path = export_results([], tmp_path / "r.csv")
        assert path.read_bytes() == (",".join(RESULT_HEADER) + "\n").encode()

    def test_round_trip(self, tmp_path):
        cfg = RunConfig(**FAST)
        rows = sweep(cfg)
        path = export_results(rows, tmp_path / "sub" / "r.csv")
        text = path.read_bytes()
        assert b"\r" not in text and len(text.splitlines()) == 5
        parsed = read_results(path)
        for row, back in zip(rows, parsed):
            assert back["objective"] == row.objective
            assert back["sum_rate_bps_hz"] == row.sum_rate
            assert back["scnr_db"] == row.scnr_db
            assert back["wall_ms"] == row.wall_ms
            assert back["mode"] == row.mode and back["trial"] == row.trial

    def test_unwritable_path(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError):
            export_results([], blocker / "r.csv")

    def test_isotropic_element_pattern(self, tmp_path):
        c = isotropic_em(1, 25)[0]
        path = export_pattern(c, tmp_path / "p.csv", n_theta=7, n_phi=12)
        lines = path.read_text().splitlines()
        assert lines[0] == "theta_deg,phi_deg,gain_db" and len(lines) == 1 + 7 * 12
        gains = np.array([float(x.split(",")[2]) for x in lines[1:]])
        np.testing.assert_allclose(gains, 10 * math.log10(1 / (4 * math.pi)), atol=1e-12)
        assert gains[0] == pytest.approx(-10.99, abs=5e-3)

    def test_array_pattern_rows(self, tmp_path):
        cfg = RunConfig(modes=("oa-hybrid",), max_iterations=3)
        bf = run_single(cfg).reports["oa-hybrid"].beamformer
        path = export_pattern(bf, tmp_path / "a.csv", n_theta=5, n_phi=8)
        lines = path.read_text().splitlines()
        assert lines[0] == "theta_deg,phi_deg,gain_db,stream"
        assert len(lines) == 1 + 5 * 8 * 2

    def test_single_user_peak_at_user(self, tmp_path):
        cfg = RunConfig(num_users=1, num_scatterers=0, beta=(0.0,), modes=("era-digital",))
        single = run_single(cfg, 3)
        user = single.scenario.users[0][0]
        c = single.reports["era-digital"].beamformer.em[0]
        n_theta, n_phi = 91, 180
        rows = export_pattern(c, tmp_path / "e.csv", n_theta, n_phi).read_text().splitlines()[1:]
        values = np.array([[float(v) for v in r.split(",")] for r in rows])
        theta_deg, phi_deg, _ = values[np.argmax(values[:, 2])]
        assert abs(theta_deg - math.degrees(user.theta)) <= 180 / (n_theta - 1) + 1e-9
        dphi = (phi_deg - math.degrees(user.phi) + 180) % 360 - 180
        assert abs(dphi) <= 360 / n_phi + 1e-9
        b = basis_vector(HarmonicBasis(4), user.theta, user.phi)
        assert abs(np.vdot(c, b)) ** 2 == pytest.approx(25 / (4 * math.pi), rel=1e-2)


class TestCli:
    def test_run(self, capsys):
        assert main(["run", "--modes", "oa-digital", "--power-dbm", "-10"]) == 0
        out = capsys.readouterr().out
        assert "oa-digital" in out and "-10 dBm" in out

    def test_sweep_flags_override_config(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"trials": 5, "modes": ["era-digital"], "max_iterations": 3}))
        out = tmp_path / "out"
        code = main(["sweep", "--config", str(cfg), "--trials", "1", "--modes", "oa-digital",
                     "--out", str(out), "--no-timing"])
        assert code == 0
        rows = read_results(out / "results.csv")
        assert len(rows) == 1 and rows[0]["mode"] == "oa-digital" and rows[0]["wall_ms"] == 0.0
        assert "trial 1/1" in capsys.readouterr().err

    def test_pattern(self, tmp_path):
        assert main(["pattern", "--modes", "oa-digital", "--out", str(tmp_path), "--n-theta", "4",
                     "--n-phi", "6"]) == 0
        assert (tmp_path / "pattern_oa-digital_element0.csv").exists()
        assert (tmp_path / "pattern_oa-digital_array.csv").exists()

    def test_errors_exit_nonzero(self, tmp_path, capsys):
        assert main(["run", "--beta", "1.5"]) != 0
        assert main(["sweep", "--config", str(tmp_path / "nope.json")]) != 0
        assert "error" in capsys.readouterr().err
        with pytest.raises(SystemExit):
            main(["sweep", "--power-dbm", "abc"])
