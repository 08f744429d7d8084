"""Command line entry point: ``lowrank-uq {simulate,fit,reproduce-table,figure-data}``.

Exit codes: 0 success, 2 configuration error, 3 some replicates failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .bayes import FixedRank, Flexible, GibbsConfig, credible_interval, gibbs_run, posterior_mean
from .bench.config import (
    ESTIMATORS,
    LAMBDA_RULES,
    ConfigError,
    ExperimentConfig,
    build_config,
    lambda_rule_db,
    parse_config_file,
)
from .bench.experiment import OBS, TRUTH, run_experiment, write_csv, write_json
from .bench.figure import MIN_FIGURE_DRAWS, emit_figure_data
from .bench.tables import TABLES, reproduce_table
from .core import RngStream, compute_errors, complement_project
from .debias import confidence_interval, debias_from_base
from .freq import AlsConfig, SoftImputeConfig, als_fit, soft_impute_fit
from .sim import gen_truth, sample_observations

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--estimators", help=f"comma-separated subset of {','.join(ESTIMATORS)}")
    p.add_argument("--lambda-rule", choices=LAMBDA_RULES)
    p.add_argument("--ips-correction", action="store_true", default=None)
    p.add_argument("--temper-semantics", choices=("residual", "density"))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")


def _sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--m", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--rank", type=int, dest="r")
    p.add_argument("--setting", choices=("exact", "approx"))
    p.add_argument("--tau", type=float)
    p.add_argument("--sigma", type=float)


def _experiment_config(args, base: ExperimentConfig | None = None) -> ExperimentConfig:
    overrides = parse_config_file(args.config) if args.config else {}
    flags = {
        "seed": args.seed,
        "replicates": args.replicates,
        "lambda_rule": args.lambda_rule,
        "ips_correction": args.ips_correction,
        "temper_semantics": args.temper_semantics,
    }
    if args.estimators:
        flags["estimators"] = tuple(e.strip() for e in args.estimators.split(","))
    for key in ("m", "p", "r", "setting", "tau", "sigma"):
        if hasattr(args, key):
            flags[key] = getattr(args, key)
    overrides.update({k: v for k, v in flags.items() if v is not None})
    return build_config(base, **overrides)


def _parse_cells(text: str | None):
    if not text:
        return None
    cells = []
    for item in text.split(";"):
        r, p, tau = item.split(",")
        cells.append((int(r), int(p), float(tau)))
    return cells


def _parse_entries(items):
    out = []
    for item in items:
        i, j = item.split(",")
        out.append((int(i) - 1, int(j) - 1))
    return out


def cmd_simulate(args) -> int:
    cfg = _experiment_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stream = RngStream(cfg.seed, args.replicate)
    truth = gen_truth(cfg.sim, stream.child(TRUTH))
    obs = sample_observations(truth, cfg.sim.tau, cfg.sim.sigma, stream.child(OBS))
    io.write_matrix(truth, out / "truth.csv")
    io.write_observations(obs, out / "observations.csv")
    print(f"wrote {out / 'truth.csv'} and {out / 'observations.csv'} (n={obs.n})")
    return EXIT_OK


def cmd_fit(args) -> int:
    obs = io.read_observations(args.obs)
    cfg = _experiment_config(args)
    m, p = obs.shape
    r = args.r or cfg.sim.r
    sigma = args.sigma if args.sigma is not None else cfg.sim.sigma
    gen_stream = RngStream(cfg.seed, 0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    est = args.estimator
    summary: dict = {"estimator": est, "rank": r, "m": m, "p": p, "n": obs.n}
    iv = None
    if est == "soft_impute":
        lam = args.lam if args.lam is not None else 0.0
        M = soft_impute_fit(obs, SoftImputeConfig(lam)).estimate.matrix
    elif est in ("als", "db"):
        als_cfg = AlsConfig(cfg.als_lambda, r, cfg.als_max_iters, cfg.als_tol, cfg.als_solver)
        m_hat = als_fit(obs, als_cfg, gen_stream.child(2)).estimate.matrix
        if est == "als":
            M = obs.to_dense() + complement_project(m_hat, obs)
        else:
            lam = args.lam if args.lam is not None else lambda_rule_db(
                m, p, sigma, cfg.lambda_rule, 1 - obs.observed_fraction
            )
            res = debias_from_base(m_hat, obs, r, lam, sigma**2, cfg.ips_correction, cfg.variance_scaling)
            M = res.m_db
            iv = confidence_interval(M, res.variance, 1 - (args.level or cfg.db_level))
            summary["lambda"] = lam
    else:
        prior = FixedRank(r) if est == "f_bayes" else Flexible(cfg.K, cfg.a, cfg.b)
        gcfg = GibbsConfig(prior, sigma**2, cfg.temper_lambda, cfg.gibbs_iters, cfg.burn_in, cfg.thin, cfg.temper_semantics)
        samples = gibbs_run(obs, gcfg, gen_stream.child(3 if est == "f_bayes" else 4))
        M = posterior_mean(samples).matrix
        iv = credible_interval(samples, args.level or cfg.bayes_level)
    io.write_matrix(M, out / "estimate.csv")
    if iv is not None:
        io.write_matrix(iv.lower, out / "lower.csv")
        io.write_matrix(iv.upper, out / "upper.csv")
        summary["level"] = iv.level
        summary["mean_interval_length"] = float(np.mean(iv.length))
    if args.truth:
        truth = io.read_matrix(args.truth)
        e = compute_errors(M, truth, obs)
        summary.update(mse=e.mse, nmse=e.nmse, pred=e.pred)
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_reproduce(args) -> int:
    cfg = _experiment_config(args)
    scale = "desk" if args.desk else "full"
    report = reproduce_table(
        args.table,
        scale=scale,
        out_dir=args.out,
        base=cfg,
        cells=_parse_cells(args.cells),
        replicates=args.replicates,
        skip_large_bayes=not args.all_bayes,
        workers=args.workers,
    )
    print(report.paths["md"].read_text())
    return EXIT_PARTIAL if any(r.n_failures for r in report.rows) else EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _experiment_config(args)
    rows = run_experiment(cfg, args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(rows, out / f"experiment_{cfg.fingerprint()}.csv")
    write_json(rows, out / f"experiment_{cfg.fingerprint()}.json", cfg)
    for row in rows:
        mean = "n/a" if row.mean is None else f"{row.mean:.4f}"
        std = "" if row.std is None else f" ({row.std:.4f})"
        print(f"{row.estimator:8s} {row.metric:10s} {mean}{std}  failures={row.n_failures}")
    return EXIT_PARTIAL if any(r.n_failures for r in rows) else EXIT_OK


def cmd_figure(args) -> int:
    cfg = _experiment_config(args)
    if args.fixed_truth:
        cfg = cfg.replace(fixed_truth=True)
    entries = _parse_entries(args.entries)
    res = emit_figure_data(cfg, entries, args.out, n_draws=args.draws, estimator=args.estimator)
    for e in res:
        print(f"M[{e.i + 1},{e.j + 1}] truth={e.truth:.4f} db={e.m_db:.4f} v={e.v:.4g} "
              f"post.mean={e.posterior_mean:.4f} post.sd={e.posterior_sd:.4f} -> {e.draws_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lowrank-uq", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a truth matrix and noisy observations")
    _common(p)
    _sim_flags(p)
    p.add_argument("--replicate", type=int, default=0, help="replicate stream id")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit one estimator to an observation file")
    _common(p)
    _sim_flags(p)
    p.add_argument("--obs", required=True, help="observation CSV (m,p,n header, 1-based i,j,y rows)")
    p.add_argument("--estimator", choices=("als", "soft_impute", "db", "f_bayes", "bayes"), default="db")
    p.add_argument("--lambda", dest="lam", type=float, help="penalty for soft_impute / db variance")
    p.add_argument("--level", type=float, help="interval coverage level")
    p.add_argument("--truth", help="dense truth CSV; adds error metrics to the summary")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("reproduce-table", help="rerun one of the simulation tables")
    _common(p)
    p.add_argument("table", choices=sorted(TABLES))
    p.add_argument("--desk", action="store_true", help="20 replicates and Bayesian smoke runs for p=1000")
    p.add_argument("--all-bayes", action="store_true", help="at desk scale, fully replicate p=1000 Bayesian cells")
    p.add_argument("--cells", help="subset of cells as 'r,p,tau;r,p,tau'")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("experiment", help="run one replicated experiment")
    _common(p)
    _sim_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("figure-data", help="posterior draws vs de-biased Gaussian for chosen entries")
    _common(p)
    _sim_flags(p)
    p.add_argument("--entries", nargs="+", required=True, help="1-based entries as 'i,j'")
    p.add_argument("--draws", type=int, default=MIN_FIGURE_DRAWS)
    p.add_argument("--estimator", choices=("f_bayes", "bayes"), default="f_bayes")
    p.add_argument("--fixed-truth", action="store_true")
    p.set_defaults(func=cmd_figure)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, IndexError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
