"""Reproduction of the four simulation tables at full or desk scale."""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from ..sim import SimSpec
from .config import ExperimentConfig
from .experiment import ResultRow, run_experiment, write_csv, write_json
from .reference import desk_band, published_value

logger = logging.getLogger(__name__)

TABLES = {
    # setting, fixed truth, estimators, intervals
    "T1": ("exact", False, ("als", "db", "f_bayes", "bayes"), False),
    "T2": ("approx", False, ("als", "db", "f_bayes", "bayes"), False),
    "T3": ("exact", True, ("db", "f_bayes", "bayes"), True),
    "T4": ("approx", True, ("db", "f_bayes", "bayes"), True),
}
RANKS = (2, 5)
COLS = (100, 1000)
TAUS = (0.2, 0.5, 0.8)
SCALES = {"full": 50, "desk": 20}
BAYESIAN = ("f_bayes", "bayes")


@dataclass
class CellResult:
    r: int
    p: int
    tau: float
    rows: list[ResultRow]
    seconds: float
    smoke: tuple[str, ...] = ()


@dataclass
class TableReport:
    table_id: str
    scale: str
    cells: list[CellResult] = field(default_factory=list)
    paths: dict[str, Path] = field(default_factory=dict)

    @property
    def rows(self) -> list[ResultRow]:
        return [row for c in self.cells for row in c.rows]


def cell_configs(
    table_id: str, base: Optional[ExperimentConfig] = None, cells: Optional[Sequence[tuple[int, int, float]]] = None
) -> list[ExperimentConfig]:
    """Expand a table into one config per ``(r, p, tau)`` cell, m fixed at 100."""
    if table_id not in TABLES:
        raise ValueError(f"unknown table {table_id!r}; choose from {sorted(TABLES)}")
    setting, fixed, estimators, intervals = TABLES[table_id]
    base = base or ExperimentConfig()
    chosen = cells if cells is not None else list(itertools.product(RANKS, COLS, TAUS))
    wanted = tuple(e for e in estimators if e in base.estimators) or estimators
    out = []
    for r, p, tau in chosen:
        sim = SimSpec(100, p, r, setting, tau, base.sim.sigma)
        out.append(base.replace(sim=sim, fixed_truth=fixed, estimators=wanted, intervals=intervals))
    return out


def reproduce_table(
    table_id: str,
    scale: str = "desk",
    out_dir: str | Path = ".",
    base: Optional[ExperimentConfig] = None,
    cells: Optional[Sequence[tuple[int, int, float]]] = None,
    replicates: Optional[int] = None,
    skip_large_bayes: bool = True,
    workers: int = 1,
) -> TableReport:
    """Run every cell of a table and write ``<id>_<scale>.{csv,json,md}``.

    At desk scale with ``skip_large_bayes`` the Bayesian estimators of the
    p = 1000 cells get a single-replicate smoke run instead of the full
    replication.
    """
    if scale not in SCALES:
        raise ValueError(f"unknown scale {scale!r}")
    reps = replicates or SCALES[scale]
    report = TableReport(table_id, scale)
    for cfg in cell_configs(table_id, base, cells):
        cfg = cfg.replace(replicates=reps)
        s = cfg.sim
        t0 = time.perf_counter()
        smoke: tuple[str, ...] = ()
        if scale == "desk" and skip_large_bayes and s.p >= 1000:
            smoke = tuple(e for e in cfg.estimators if e in BAYESIAN)
        rest = tuple(e for e in cfg.estimators if e not in smoke)
        rows = run_experiment(cfg.replace(estimators=rest), workers) if rest else []
        if smoke:
            rows += run_experiment(cfg.replace(estimators=smoke, replicates=1), workers)
        dt = time.perf_counter() - t0
        logger.info("%s cell r=%d p=%d tau=%.1f done in %.1fs", table_id, s.r, s.p, s.tau, dt)
        report.cells.append(CellResult(s.r, s.p, s.tau, rows, dt, smoke))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{table_id}_{scale}"
    report.paths["csv"] = write_csv(report.rows, out / f"{stem}.csv")
    report.paths["json"] = write_json(report.rows, out / f"{stem}.json")
    md = out / f"{stem}.md"
    md.write_text(format_report(report, reps))
    report.paths["md"] = md
    return report


def _fmt(mean, std) -> str:
    if mean is None:
        return "n/a"
    return f"{mean:.3f} ({std:.3f})" if std is not None else f"{mean:.3f} (-)"


def format_report(report: TableReport, replicates: int) -> str:
    """Markdown table with published values and desk tolerance bands side by side."""
    setting = TABLES[report.table_id][0]
    lines = [
        f"# {report.table_id} ({setting} low-rank, {report.scale} scale, {replicates} replicates)",
        "",
        "| r | p | tau | estimator | metric | ours | published | band | in band | failures |",
        "|---|---|-----|-----------|--------|------|-------|------|---------|----------|",
    ]
    for cell in report.cells:
        for row in cell.rows:
            ref = published_value(report.table_id, cell.r, cell.p, cell.tau, row.estimator, row.metric)
            if ref is None:
                published, band, ok = "", "", ""
            else:
                lo, hi = desk_band(*ref, replicates=max(row.n_reps, 1))
                published = _fmt(*ref)
                band = f"[{lo:.3f}, {hi:.3f}]"
                ok = "" if row.mean is None else ("yes" if lo <= row.mean <= hi else "no")
            tag = " (smoke)" if row.estimator in cell.smoke else ""
            lines.append(
                f"| {cell.r} | {cell.p} | {cell.tau:.0%} | {row.estimator}{tag} | {row.metric} | "
                f"{_fmt(row.mean, row.std)} | {published} | {band} | {ok} | {row.n_failures} |"
            )
    lines.append("")
    return "\n".join(lines)
