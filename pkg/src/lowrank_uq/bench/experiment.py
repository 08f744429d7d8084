"""Replicated simulation runs and their aggregation into result rows."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..bayes import Flexible, FixedRank, GibbsConfig, credible_interval, gibbs_run, posterior_mean
from ..core import RngStream, complement_project, compute_errors
from ..debias import confidence_interval, debias_from_base, interval_stats
from ..freq import AlsConfig, als_fit
from ..sim import gen_truth, sample_observations
from .config import ExperimentConfig

logger = logging.getLogger(__name__)

# child tags of a replicate stream
TRUTH, OBS, ALS, F_BAYES, BAYES, DB_BASE = range(6)
# stream holding the shared truth when ``fixed_truth`` is set
FIXED_TRUTH_STREAM = 2**63 - 1

METRICS = ("MSE", "NMSE", "Pred", "CI_length", "coverage")
CSV_COLUMNS = (
    "fingerprint", "setting", "m", "p", "r", "tau",
    "estimator", "metric", "mean", "std", "n_reps", "n_failures",
)


@dataclass
class ResultRow:
    estimator: str
    metric: str
    mean: Optional[float]
    std: Optional[float]
    n_reps: int
    n_failures: int
    fingerprint: str
    setting: str
    m: int
    p: int
    r: int
    tau: float

    def as_csv(self) -> list:
        d = asdict(self)
        return ["" if d[c] is None else d[c] for c in CSV_COLUMNS]


@dataclass
class ReplicateResult:
    index: int
    metrics: dict[str, dict[str, float]]
    failures: dict[str, str]


def gibbs_config(cfg: ExperimentConfig, estimator: str) -> GibbsConfig:
    prior = FixedRank(cfg.sim.r) if estimator == "f_bayes" else Flexible(cfg.K, cfg.a, cfg.b)
    return GibbsConfig(
        prior,
        sigma2=max(cfg.sim.sigma, 1e-12) ** 2,
        temper_lambda=cfg.temper_lambda,
        n_iters=cfg.gibbs_iters,
        burn_in=cfg.burn_in,
        thin=cfg.thin,
        semantics=cfg.temper_semantics,
    )


def truth_for(cfg: ExperimentConfig, k: int) -> np.ndarray:
    stream = FIXED_TRUTH_STREAM if cfg.fixed_truth else k
    return gen_truth(cfg.sim, RngStream(cfg.seed, stream).child(TRUTH))


def _errors(est, truth, obs) -> dict[str, float]:
    e = compute_errors(est, truth, obs)
    out = {"MSE": e.mse, "NMSE": e.nmse}
    if e.pred is not None:
        out["Pred"] = e.pred
    return out


def run_replicate(cfg: ExperimentConfig, k: int) -> ReplicateResult:
    """Fit every requested estimator on replicate ``k`` (stream ``k``)."""
    s = cfg.sim
    stream = RngStream(cfg.seed, k)
    truth = truth_for(cfg, k)
    obs = sample_observations(truth, s.tau, s.sigma, stream.child(OBS))
    metrics: dict[str, dict[str, float]] = {}
    failures: dict[str, str] = {}

    base = None
    if "als" in cfg.estimators or "db" in cfg.estimators:
        try:
            als_cfg = AlsConfig(cfg.als_lambda, s.r, cfg.als_max_iters, cfg.als_tol, cfg.als_solver)
            base = als_fit(obs, als_cfg, stream.child(ALS)).estimate.matrix
        except Exception as exc:  # recorded, never silently dropped
            for name in ("als", "db"):
                if name in cfg.estimators:
                    failures[name] = f"{type(exc).__name__}: {exc}"

    if "als" in cfg.estimators and base is not None:
        # reported like a completion: observed entries keep their data
        completed = obs.to_dense() + complement_project(base, obs)
        metrics["als"] = _errors(completed, truth, obs)

    if "db" in cfg.estimators and "db" not in failures:
        try:
            lam = cfg.db_lambda
            m_hat = base
            if cfg.db_base == "rule":
                rule_cfg = AlsConfig(lam, s.r, cfg.als_max_iters, cfg.als_tol, cfg.als_solver)
                m_hat = als_fit(obs, rule_cfg, stream.child(DB_BASE)).estimate.matrix
            sigma2 = None if cfg.estimate_sigma2 else s.sigma**2
            res = debias_from_base(
                m_hat, obs, s.r, lam, sigma2, cfg.ips_correction, cfg.variance_scaling
            )
            metrics["db"] = _errors(res.m_db, truth, obs)
            if cfg.intervals:
                iv = confidence_interval(res.m_db, res.variance, 1 - cfg.db_level)
                metrics["db"]["CI_length"], metrics["db"]["coverage"] = interval_stats(iv, truth)
        except Exception as exc:
            failures["db"] = f"{type(exc).__name__}: {exc}"

    for name, tag in (("f_bayes", F_BAYES), ("bayes", BAYES)):
        if name not in cfg.estimators:
            continue
        try:
            samples = gibbs_run(obs, gibbs_config(cfg, name), stream.child(tag))
            metrics[name] = _errors(posterior_mean(samples).matrix, truth, obs)
            if cfg.intervals:
                iv = credible_interval(samples, cfg.bayes_level)
                metrics[name]["CI_length"], metrics[name]["coverage"] = interval_stats(iv, truth)
        except Exception as exc:
            failures[name] = f"{type(exc).__name__}: {exc}"

    for name, msg in failures.items():
        logger.warning("replicate %d, estimator %s failed: %s", k, name, msg)
    return ReplicateResult(k, metrics, failures)


def _run_one(args):
    return run_replicate(*args)


def run_replicates(cfg: ExperimentConfig, workers: int = 1, indices: Sequence[int] | None = None) -> list[ReplicateResult]:
    """Run replicates, optionally in a process pool, returned in index order."""
    indices = list(range(cfg.replicates)) if indices is None else list(indices)
    if workers <= 1 or len(indices) <= 1:
        results = [run_replicate(cfg, k) for k in indices]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, [(cfg, k) for k in indices]))
    return sorted(results, key=lambda r: r.index)


def aggregate(cfg: ExperimentConfig, results: Sequence[ReplicateResult]) -> list[ResultRow]:
    """Mean and sample standard deviation (ddof 1) per estimator and metric.

    With a single usable replicate the std is ``None``.
    """
    results = sorted(results, key=lambda r: r.index)
    fp = cfg.fingerprint()
    s = cfg.sim
    rows = []
    for est in cfg.estimators:
        n_fail = sum(est in r.failures for r in results)
        for metric in METRICS:
            vals = [r.metrics[est][metric] for r in results if est in r.metrics and metric in r.metrics[est]]
            if not vals and not (metric == "MSE" and n_fail):
                continue
            arr = np.asarray(vals, dtype=float)
            mean = float(arr.mean()) if len(arr) else None
            std = float(arr.std(ddof=1)) if len(arr) > 1 else None
            rows.append(ResultRow(est, metric, mean, std, len(arr), n_fail, fp, s.setting.value, s.m, s.p, s.r, s.tau))
    return rows


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> list[ResultRow]:
    """Run all replicates of ``cfg`` and aggregate them."""
    return aggregate(cfg, run_replicates(cfg, workers))


def lookup(rows: Sequence[ResultRow], estimator: str, metric: str) -> Optional[ResultRow]:
    for row in rows:
        if row.estimator == estimator and row.metric == metric:
            return row
    return None


def write_csv(rows: Sequence[ResultRow], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow(row.as_csv())
    return path


def read_csv(path: str | Path) -> list[ResultRow]:
    rows = []
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            def num(x, cast=float):
                return None if x == "" else cast(x)
            rows.append(ResultRow(
                rec["estimator"], rec["metric"], num(rec["mean"]), num(rec["std"]),
                int(rec["n_reps"]), int(rec["n_failures"]), rec["fingerprint"], rec["setting"],
                int(rec["m"]), int(rec["p"]), int(rec["r"]), float(rec["tau"]),
            ))
    return rows


def write_json(rows: Sequence[ResultRow], path: str | Path, config: ExperimentConfig | None = None) -> Path:
    path = Path(path)
    payload = {"rows": [{k: _finite(v) for k, v in asdict(r).items()} for r in rows]}
    if config is not None:
        payload["config"] = config.to_dict()
    path.write_text(json.dumps(payload, indent=2, allow_nan=False))
    return path


def _finite(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x
