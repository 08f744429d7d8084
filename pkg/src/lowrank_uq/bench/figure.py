"""Plot data comparing the de-biased Gaussian limit with long posterior chains."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..bayes import gibbs_run, posterior_mean
from ..core import RngStream
from ..debias import debias_from_base
from ..freq import AlsConfig, als_fit
from ..sim import sample_observations
from .config import ExperimentConfig
from .experiment import ALS, F_BAYES, BAYES, OBS, gibbs_config, truth_for

MIN_FIGURE_DRAWS = 10_000


@dataclass
class FigureEntry:
    i: int
    j: int
    truth: float
    m_db: float
    v: float
    posterior_mean: float
    posterior_sd: float
    draws_path: Path


def emit_figure_data(
    cfg: ExperimentConfig,
    entries: Sequence[tuple[int, int]],
    out_dir: str | Path,
    n_draws: int = MIN_FIGURE_DRAWS,
    estimator: str = "f_bayes",
    replicate: int = 0,
) -> list[FigureEntry]:
    """Write posterior draws and Gaussian parameters for selected entries.

    Produces ``draws_i<i>_j<j>.csv`` per entry (one retained draw per line)
    and ``gaussian_params.csv`` with columns ``i, j, truth, m_db, v,
    posterior_mean, posterior_sd``. Indices in files are 1-based; ``entries``
    are 0-based.
    """
    if n_draws < MIN_FIGURE_DRAWS:
        raise ValueError(f"figure data needs at least {MIN_FIGURE_DRAWS} retained draws")
    if estimator not in ("f_bayes", "bayes"):
        raise ValueError("estimator must be f_bayes or bayes")
    s = cfg.sim
    for i, j in entries:
        if not (0 <= i < s.m and 0 <= j < s.p):
            raise IndexError(f"entry ({i}, {j}) outside a {s.m}x{s.p} matrix")

    stream = RngStream(cfg.seed, replicate)
    truth = truth_for(cfg, replicate)
    obs = sample_observations(truth, s.tau, s.sigma, stream.child(OBS))
    als_cfg = AlsConfig(cfg.als_lambda, s.r, cfg.als_max_iters, cfg.als_tol, cfg.als_solver)
    m_hat = als_fit(obs, als_cfg, stream.child(ALS)).estimate.matrix
    db = debias_from_base(m_hat, obs, s.r, cfg.db_lambda, s.sigma**2, cfg.ips_correction, cfg.variance_scaling)

    gcfg = gibbs_config(cfg.replace(gibbs_iters=cfg.burn_in + n_draws, thin=1), estimator)
    samples = gibbs_run(obs, gcfg, stream.child(F_BAYES if estimator == "f_bayes" else BAYES))
    pm = posterior_mean(samples).matrix

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = []
    for i, j in entries:
        draws = samples.entry_draws(i, j)
        path = out / f"draws_i{i + 1}_j{j + 1}.csv"
        np.savetxt(path, draws, fmt="%.17g", header="value", comments="")
        result.append(FigureEntry(
            i, j, float(truth[i, j]), float(db.m_db[i, j]), float(db.variance[i, j]),
            float(pm[i, j]), float(draws.std(ddof=1)), path,
        ))
    with (out / "gaussian_params.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "truth", "m_db", "v", "posterior_mean", "posterior_sd"])
        for e in result:
            w.writerow([e.i + 1, e.j + 1, e.truth, e.m_db, e.v, e.posterior_mean, e.posterior_sd])
    return result
