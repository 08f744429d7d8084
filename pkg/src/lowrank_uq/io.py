"""CSV serialization of observation sets and dense matrices.

Observation files are triplets ``i,j,y`` with 1-based indices, preceded by a
single header line holding ``m,p,n``.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .core import ObservationSet


def write_observations(obs: ObservationSet, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([obs.rows, obs.cols, obs.n])
        for i, j, y in zip(obs.i.tolist(), obs.j.tolist(), obs.y.tolist()):
            w.writerow([i + 1, j + 1, repr(y)])
    return path


def read_observations(path: str | Path) -> ObservationSet:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            m, p, n = (int(x) for x in next(reader))
        except (StopIteration, ValueError) as exc:
            raise ValueError(f"{path}: first line must be 'm,p,n'") from exc
        rows = [r for r in reader if r]
    if len(rows) != n:
        raise ValueError(f"{path}: header announces {n} entries, found {len(rows)}")
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    return ObservationSet(m, p, arr[:, 0].astype(int) - 1, arr[:, 1].astype(int) - 1, arr[:, 2])


def write_matrix(M: np.ndarray, path: str | Path) -> Path:
    path = Path(path)
    np.savetxt(path, M, delimiter=",", fmt="%.17g")
    return path


def read_matrix(path: str | Path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=","))
