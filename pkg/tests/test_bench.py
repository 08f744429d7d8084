import csv
import json
import math

import numpy as np
import pytest

import lowrank_uq.bench.experiment as experiment
from lowrank_uq.bench.config import (
    ConfigError,
    ExperimentConfig,
    build_config,
    lambda_rule_db,
    parse_config_file,
    write_config_file,
)
from lowrank_uq.bench.experiment import (
    CSV_COLUMNS,
    aggregate,
    lookup,
    read_csv,
    run_experiment,
    run_replicate,
    run_replicates,
    write_csv,
    write_json,
)
from lowrank_uq.bench.figure import emit_figure_data
from lowrank_uq.bench.reference import PUBLISHED, desk_band, published_value
from lowrank_uq.bench.tables import TABLES, cell_configs, reproduce_table
from lowrank_uq.cli import main
from lowrank_uq.debias import normal_quantile
from lowrank_uq.sim import SimSpec

from oracles import two_pass_mean_std


def tiny(**kw) -> ExperimentConfig:
    base = ExperimentConfig(
        sim=SimSpec(20, 15, 2, tau=0.3), replicates=4, gibbs_iters=120, burn_in=40, seed=7
    )
    return base.replace(**kw)


class TestLambdaRule:
    def test_values(self):
        assert lambda_rule_db(100, 100, 1.0) == pytest.approx(250.0)
        assert lambda_rule_db(100, 100, 0.0) == 0.0
        assert lambda_rule_db(100, 1000, 1.0) == pytest.approx(790.569, abs=1e-3)
        assert lambda_rule_db(100, 1000, 1.0, "sqrt_np_obs", 0.2) == pytest.approx(2.5 * math.sqrt(800))

    def test_unknown(self):
        with pytest.raises(ConfigError):
            lambda_rule_db(10, 10, 1.0, "magic")


class TestConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(replicates=0)
        with pytest.raises(ConfigError):
            ExperimentConfig(estimators=("als", "svd"))
        with pytest.raises(ConfigError):
            ExperimentConfig(db_level=1.0)
        with pytest.raises(ConfigError):
            ExperimentConfig(gibbs_iters=100, burn_in=100)

    def test_fingerprint(self):
        a, b = tiny(), tiny()
        assert a.fingerprint() == b.fingerprint() and len(a.fingerprint()) == 16
        assert a.fingerprint() != tiny(seed=8).fingerprint()
        assert a.fingerprint() != tiny(tau=0.5).fingerprint()

    def test_replace_mixes_sim_keys(self):
        cfg = tiny(tau=0.5, replicates=2)
        assert cfg.sim.tau == 0.5 and cfg.replicates == 2 and cfg.sim.m == 20

    def test_file_round_trip(self, tmp_path):
        cfg = tiny(estimators=("db", "bayes"), temper_lambda=0.3, ips_correction=True)
        path = write_config_file(cfg, tmp_path / "c.ini")
        assert build_config(None, **parse_config_file(path)) == cfg

    def test_file_and_overrides(self, tmp_path):
        (tmp_path / "c.ini").write_text("[sim]\nm = 30\ntau = 0.5\n[run]\nreplicates = 3\nestimators = als, db\n")
        cfg = build_config(None, **{**parse_config_file(tmp_path / "c.ini"), "replicates": 5, "seed": None})
        assert (cfg.sim.m, cfg.sim.tau, cfg.replicates, cfg.estimators) == (30, 0.5, 5, ("als", "db"))

    def test_bad_file(self, tmp_path):
        (tmp_path / "c.ini").write_text("[x]\nbogus = 1\n")
        with pytest.raises(ConfigError):
            parse_config_file(tmp_path / "c.ini")
        (tmp_path / "d.ini").write_text("[x]\nreplicates = many\n")
        with pytest.raises(ConfigError):
            parse_config_file(tmp_path / "d.ini")
        with pytest.raises(ConfigError):
            parse_config_file(tmp_path / "missing.ini")


class TestExperiment:
    def test_deterministic(self):
        cfg = tiny()
        a, b = run_experiment(cfg), run_experiment(cfg)
        assert [r.as_csv() for r in a] == [r.as_csv() for r in b]

    def test_order_independent(self):
        cfg = tiny(estimators=("als", "db", "f_bayes"))
        fwd = aggregate(cfg, run_replicates(cfg, indices=[0, 1, 2, 3]))
        rev = aggregate(cfg, run_replicates(cfg, indices=[3, 1, 0, 2]))
        assert [r.as_csv() for r in fwd] == [r.as_csv() for r in rev]

    def test_parallel_matches_sequential(self):
        cfg = tiny(estimators=("als", "db"), replicates=3)
        assert [r.as_csv() for r in run_experiment(cfg, workers=2)] == [r.as_csv() for r in run_experiment(cfg)]

    def test_aggregation_matches_two_pass(self):
        cfg = tiny()
        reps = run_replicates(cfg)
        for row in aggregate(cfg, reps):
            vals = [r.metrics[row.estimator][row.metric] for r in reps]
            mean, std = two_pass_mean_std(vals)
            assert row.mean == pytest.approx(mean, rel=1e-12)
            assert row.std == pytest.approx(std, rel=1e-12, abs=1e-15)
            assert row.n_reps == 4 and row.n_failures == 0

    def test_metrics_present(self):
        rows = run_experiment(tiny())
        for est in ("als", "db", "f_bayes", "bayes"):
            for metric in ("MSE", "NMSE", "Pred"):
                assert lookup(rows, est, metric) is not None
        for est in ("db", "f_bayes", "bayes"):
            assert 0 <= lookup(rows, est, "coverage").mean <= 1
            assert lookup(rows, est, "CI_length").mean > 0
        assert lookup(rows, "als", "CI_length") is None
        no_iv = run_experiment(tiny(intervals=False, estimators=("db",)))
        assert lookup(no_iv, "db", "CI_length") is None

    def test_single_replicate_std_absent(self):
        rows = run_experiment(tiny(replicates=1, estimators=("db",)))
        row = lookup(rows, "db", "MSE")
        assert row.std is None and row.n_reps == 1
        assert row.as_csv()[CSV_COLUMNS.index("std")] == ""

    def test_noiseless_full_observation(self):
        cfg = tiny(sigma=0.0, tau=0.0, estimators=("db", "als"), replicates=2)
        rows = run_experiment(cfg)
        assert lookup(rows, "db", "MSE").mean < 1e-20
        assert lookup(rows, "db", "Pred") is None

    def test_fixed_truth(self):
        a = experiment.truth_for(tiny(fixed_truth=True), 0)
        b = experiment.truth_for(tiny(fixed_truth=True), 3)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(experiment.truth_for(tiny(), 0), experiment.truth_for(tiny(), 3))

    def test_failures_are_counted(self, monkeypatch):
        real = experiment.gibbs_run

        def flaky(obs, cfg, rng, *a, **kw):
            if rng.stream == 1:
                raise FloatingPointError("boom")
            return real(obs, cfg, rng, *a, **kw)

        monkeypatch.setattr(experiment, "gibbs_run", flaky)
        rows = run_experiment(tiny(estimators=("db", "f_bayes")))
        fb = lookup(rows, "f_bayes", "MSE")
        assert fb.n_failures == 1 and fb.n_reps == 3
        assert lookup(rows, "db", "MSE").n_failures == 0
        res = run_replicate(tiny(estimators=("f_bayes",)), 1)
        assert "boom" in res.failures["f_bayes"] and "f_bayes" not in res.metrics

    def test_all_failed_still_reported(self, monkeypatch):
        monkeypatch.setattr(experiment, "gibbs_run", lambda *a, **k: (_ for _ in ()).throw(RuntimeError("x")))
        row = lookup(run_experiment(tiny(estimators=("bayes",), replicates=2)), "bayes", "MSE")
        assert row.mean is None and row.n_failures == 2 and row.n_reps == 0

    def test_rule_base(self):
        rows = run_experiment(tiny(db_base="rule", lambda_rule="sqrt_np_obs", estimators=("db",)))
        assert np.isfinite(lookup(rows, "db", "MSE").mean)


class TestOutputs:
    def test_csv_schema(self, tmp_path):
        rows = run_experiment(tiny(estimators=("db",), replicates=2))
        path = write_csv(rows, tmp_path / "r.csv")
        with path.open() as fh:
            header = next(csv.reader(fh))
        assert tuple(header) == CSV_COLUMNS
        back = read_csv(path)
        assert [r.as_csv() for r in back] == [r.as_csv() for r in rows]

    def test_json(self, tmp_path):
        cfg = tiny(estimators=("db",), replicates=1)
        rows = run_experiment(cfg)
        payload = json.loads(write_json(rows, tmp_path / "r.json", cfg).read_text())
        assert payload["config"]["sim"]["m"] == 20
        assert payload["rows"][0]["std"] is None
        assert set(payload["rows"][0]) == set(CSV_COLUMNS)


class TestTables:
    def test_cells(self):
        cfgs = cell_configs("T3")
        assert len(cfgs) == 12
        assert all(c.fixed_truth and c.intervals and c.sim.m == 100 for c in cfgs)
        assert {c.sim.p for c in cfgs} == {100, 1000}
        assert all(c.sim.setting.value == "approx" for c in cell_configs("T2"))
        with pytest.raises(ValueError):
            cell_configs("T9")

    def test_reference_values(self):
        assert published_value("T1", 2, 100, 0.2, "als", "MSE") == (0.808, 0.012)
        assert published_value("T1", 2, 100, 0.2, "db", "MSE") == (0.051, 0.004)
        assert published_value("T3", 2, 100, 0.2, "db", "CI_length") == (0.811, 0.035)
        assert published_value("T3", 2, 100, 0.2, "f_bayes", "CI_length") == (1.028, 0.055)
        assert published_value("T2", 2, 100, 0.5, "db", "MSE") == (0.593, 0.018)
        assert published_value("T1", 5, 100, 0.8, "f_bayes", "MSE") == (1.083, 0.085)
        assert all(len(PUBLISHED[t]) == 12 for t in TABLES)

    def test_band(self):
        lo, hi = desk_band(0.051, 0.003)
        assert (lo, hi) == pytest.approx((0.051 - 3 * 0.003 * math.sqrt(2.5), 0.051 + 3 * 0.003 * math.sqrt(2.5)))
        lo, hi = desk_band(1.0, 0.001)
        assert (lo, hi) == pytest.approx((0.9, 1.1))

    def test_reproduce_small(self, tmp_path):
        base = ExperimentConfig(estimators=("als", "db"))
        rep = reproduce_table("T1", "desk", tmp_path, base, cells=[(2, 100, 0.2)], replicates=2)
        assert {p.name for p in rep.paths.values()} == {"T1_desk.csv", "T1_desk.json", "T1_desk.md"}
        md = rep.paths["md"].read_text()
        assert "0.808 (0.012)" in md and "| als |" in md
        assert len(read_csv(rep.paths["csv"])) == len(rep.rows)

    def test_large_bayes_smoke(self, tmp_path, monkeypatch):
        calls = []
        real = experiment.run_experiment

        def spy(cfg, workers=1):
            calls.append((cfg.estimators, cfg.replicates))
            return real(cfg.replace(sim=SimSpec(10, 12, cfg.sim.r, tau=cfg.sim.tau), gibbs_iters=60, burn_in=20), workers)

        import lowrank_uq.bench.tables as tables
        monkeypatch.setattr(tables, "run_experiment", spy)
        rep = reproduce_table("T1", "desk", tmp_path, cells=[(2, 1000, 0.5)], replicates=2)
        assert calls == [(("als", "db"), 2), (("f_bayes", "bayes"), 1)]
        assert rep.cells[0].smoke == ("f_bayes", "bayes")
        assert "(smoke)" in rep.paths["md"].read_text()


@pytest.mark.slow
class TestPublishedCells:
    def cfg(self, table, *estimators):
        return cell_configs(table, cells=[(2, 100, 0.2)])[0].replace(replicates=20, estimators=estimators)

    def test_t1_f_bayes_mse(self):
        row = lookup(run_experiment(self.cfg("T1", "f_bayes")), "f_bayes", "MSE")
        assert 0.04 <= row.mean <= 0.06

    def test_t2_als_mse(self):
        row = lookup(run_experiment(self.cfg("T2", "als")), "als", "MSE")
        assert 0.88 <= row.mean <= 0.95

    @pytest.mark.xfail(
        reason="leverages sum to r, so the mean length of the verbatim-variance interval is capped at "
        "2 z sqrt(r/m + r/p) = 0.784 and sits just below 0.74 here; see test_db_length_jensen_bound",
        strict=False,
    )
    def test_t3_db_ci_length(self):
        row = lookup(run_experiment(self.cfg("T3", "db")), "db", "CI_length")
        assert 0.74 <= row.mean <= 0.88

    def test_db_length_jensen_bound(self):
        rows = run_experiment(self.cfg("T3", "db"))
        cap = 2 * normal_quantile(0.05) * math.sqrt(2 / 100 + 2 / 100)
        assert lookup(rows, "db", "CI_length").mean <= cap + 1e-12

    def test_t3_db_ci_length_obs_rate(self):
        row = lookup(run_experiment(self.cfg("T3", "db").replace(variance_scaling="obs_rate")), "db", "CI_length")
        assert 0.74 <= row.mean <= 0.88


class TestFigure:
    def test_emit(self, tmp_path):
        cfg = tiny(sim=SimSpec(12, 10, 2, tau=0.3), burn_in=50, fixed_truth=True)
        res = emit_figure_data(cfg, [(0, 0), (5, 7)], tmp_path)
        assert len(res) == 2
        draws = np.loadtxt(res[0].draws_path, skiprows=1)
        assert draws.shape == (10_000,)
        assert res[0].draws_path.name == "draws_i1_j1.csv"
        for e in res:
            d = np.loadtxt(e.draws_path, skiprows=1)
            assert e.v > 0
            assert abs(d.mean() - e.posterior_mean) <= 3 * d.std(ddof=1) / math.sqrt(len(d))
        with (tmp_path / "gaussian_params.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == ["i", "j", "truth", "m_db", "v", "posterior_mean", "posterior_sd"]
        assert rows[1]["i"] == "6" and rows[1]["j"] == "8"

    def test_errors(self, tmp_path):
        cfg = tiny()
        with pytest.raises(ValueError):
            emit_figure_data(cfg, [(0, 0)], tmp_path, n_draws=500)
        with pytest.raises(IndexError):
            emit_figure_data(cfg, [(20, 0)], tmp_path)
        with pytest.raises(ValueError):
            emit_figure_data(cfg, [(0, 0)], tmp_path, estimator="db")


class TestCli:
    sim = ["--m", "20", "--p", "15", "--rank", "2", "--tau", "0.3"]

    def test_simulate_and_fit(self, tmp_path, capsys):
        assert main(["simulate", *self.sim, "--seed", "3", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "observations.csv").exists()
        for est in ("db", "als", "soft_impute"):
            out = tmp_path / est
            rc = main(["fit", "--obs", str(tmp_path / "observations.csv"), "--estimator", est, "--rank", "2",
                       "--truth", str(tmp_path / "truth.csv"), "--out", str(out), "--lambda", "1.0"])
            assert rc == 0
            summary = json.loads((out / "summary.json").read_text())
            assert summary["mse"] >= 0 and summary["estimator"] == est
        assert (tmp_path / "db" / "lower.csv").exists()

    def test_fit_bayes(self, tmp_path, tmp_path_factory):
        assert main(["simulate", *self.sim, "--out", str(tmp_path)]) == 0
        cfg = tmp_path / "c.ini"
        cfg.write_text("[gibbs]\ngibbs_iters = 80\nburn_in = 20\n")
        rc = main(["fit", "--config", str(cfg), "--obs", str(tmp_path / "observations.csv"),
                   "--estimator", "f_bayes", "--rank", "2", "--out", str(tmp_path / "fb")])
        assert rc == 0
        assert json.loads((tmp_path / "fb" / "summary.json").read_text())["level"] == pytest.approx(0.89)

    def test_experiment(self, tmp_path, capsys):
        rc = main(["experiment", *self.sim, "--replicates", "2", "--estimators", "als,db", "--out", str(tmp_path)])
        assert rc == 0
        assert len(list(tmp_path.glob("experiment_*.csv"))) == 1
        assert "db" in capsys.readouterr().out

    def test_config_errors(self, tmp_path, capsys):
        bad = tmp_path / "bad.ini"
        bad.write_text("[x]\nnot_a_key = 1\n")
        assert main(["experiment", "--config", str(bad)]) == 2
        assert main(["experiment", *self.sim, "--estimators", "als,nope"]) == 2
        assert main(["fit", "--obs", str(tmp_path / "missing.csv")]) == 2
        assert "error" in capsys.readouterr().err

    def test_partial_failure_exit(self, tmp_path, monkeypatch):
        real = experiment.gibbs_run

        def flaky(obs, cfg, rng, *a, **kw):
            if rng.stream == 0:
                raise FloatingPointError("boom")
            return real(obs, cfg, rng, *a, **kw)

        monkeypatch.setattr(experiment, "gibbs_run", flaky)
        cfg = tmp_path / "c.ini"
        cfg.write_text("[gibbs]\ngibbs_iters = 60\nburn_in = 20\n")
        rc = main(["experiment", "--config", str(cfg), *self.sim, "--replicates", "2",
                   "--estimators", "f_bayes", "--out", str(tmp_path)])
        assert rc == 3

    def test_figure_data(self, tmp_path):
        cfg = tmp_path / "c.ini"
        cfg.write_text("[gibbs]\nburn_in = 20\n")
        rc = main(["figure-data", "--config", str(cfg), "--m", "10", "--p", "8", "--rank", "2",
                   "--entries", "1,1", "2,3", "--out", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "draws_i2_j3.csv").exists()
        assert main(["figure-data", "--m", "10", "--p", "8", "--rank", "2", "--entries", "11,1",
                     "--out", str(tmp_path)]) == 2

    def test_reproduce_table_cli(self, tmp_path, capsys):
        rc = main(["reproduce-table", "T1", "--desk", "--replicates", "2", "--estimators", "als,db",
                   "--cells", "2,100,0.2", "--out", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "T1_desk.md").exists()
        assert "| db |" in capsys.readouterr().out
