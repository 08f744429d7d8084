"""Shared data types, masked projections, error metrics and sampling primitives.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Index pairs are
0-based everywhere inside the package; only files and printed reports written
for people use 1-based indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np


class DimensionError(ValueError):
    """Raised when matrix shapes do not agree."""


@dataclass(frozen=True)
class RngStream:
    """Seeded, splittable random stream.

    Streams with equal ``(seed, stream, path)`` produce identical draws.
    Children created with :meth:`child` are statistically independent of the
    parent and of each other, so replicate ``k`` of an experiment can use
    ``RngStream(seed, k)`` regardless of execution order.
    """

    seed: int
    stream: int = 0
    path: tuple[int, ...] = ()

    def child(self, tag: int) -> "RngStream":
        return RngStream(self.seed, self.stream, self.path + (int(tag),))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=int(self.seed) % 2**64, spawn_key=(int(self.stream) % 2**64, *self.path)
        )
        return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng: RngStream | np.random.Generator) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return rng.generator()


@dataclass(frozen=True)
class ObservationSet:
    """Observed entries ``(i, j, y)`` of an ``rows x cols`` matrix."""

    rows: int
    cols: int
    i: np.ndarray
    j: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        i = np.asarray(self.i, dtype=np.intp).ravel()
        j = np.asarray(self.j, dtype=np.intp).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        object.__setattr__(self, "i", i)
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "y", y)
        if self.rows < 1 or self.cols < 1:
            raise DimensionError(f"invalid shape ({self.rows}, {self.cols})")
        if not (len(i) == len(j) == len(y)):
            raise ValueError("index and value arrays differ in length")
        n = len(i)
        if n < 1 or n > self.rows * self.cols:
            raise ValueError(f"number of observations {n} outside [1, {self.rows * self.cols}]")
        if i.min() < 0 or i.max() >= self.rows or j.min() < 0 or j.max() >= self.cols:
            raise IndexError("observation index out of range")
        flat = i * self.cols + j
        if len(np.unique(flat)) != n:
            raise ValueError("duplicate (i, j) pairs in observation set")
        if not np.all(np.isfinite(y)):
            raise ValueError("observed values must be finite")

    @classmethod
    def from_entries(cls, rows: int, cols: int, entries) -> "ObservationSet":
        entries = list(entries)
        if not entries:
            raise ValueError("number of observations 0 outside allowed range")
        i, j, y = zip(*entries)
        return cls(rows, cols, np.array(i), np.array(j), np.array(y, dtype=float))

    @classmethod
    def from_matrix(cls, values: np.ndarray, mask: np.ndarray) -> "ObservationSet":
        values = np.asarray(values, dtype=float)
        i, j = np.nonzero(mask)
        return cls(values.shape[0], values.shape[1], i, j, values[i, j])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def mask(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=bool)
        out[self.i, self.j] = True
        return out

    @property
    def observed_fraction(self) -> float:
        return self.n / (self.rows * self.cols)

    def to_dense(self) -> np.ndarray:
        """Observed values on Omega, zero elsewhere."""
        out = np.zeros(self.shape)
        out[self.i, self.j] = self.y
        return out

    def entries(self) -> list[tuple[int, int, float]]:
        return list(zip(self.i.tolist(), self.j.tolist(), self.y.tolist()))


@dataclass(frozen=True)
class FactorPair:
    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        if self.U.ndim != 2 or self.V.ndim != 2 or self.U.shape[1] != self.V.shape[1]:
            raise DimensionError(f"incompatible factors {self.U.shape} and {self.V.shape}")
        if self.U.shape[1] < 1:
            raise DimensionError("inner dimension must be at least 1")

    @property
    def k(self) -> int:
        return self.U.shape[1]

    def product(self) -> np.ndarray:
        return self.U @ self.V.T


@dataclass
class CompletionEstimate:
    """Dense point estimate with provenance."""

    matrix: np.ndarray
    method: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None


@dataclass(frozen=True)
class ErrorReport:
    mse: float
    nmse: float
    pred: Optional[float]


def _check_shape(M: np.ndarray, obs: ObservationSet) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.shape != obs.shape:
        raise DimensionError(f"matrix shape {M.shape} does not match observations {obs.shape}")
    return M


def mask_project(M: np.ndarray, obs: ObservationSet) -> np.ndarray:
    """Keep the entries of ``M`` on the observed set, zero the rest."""
    M = _check_shape(M, obs)
    out = np.zeros_like(M)
    out[obs.i, obs.j] = M[obs.i, obs.j]
    return out


def complement_project(M: np.ndarray, obs: ObservationSet) -> np.ndarray:
    """Keep the entries of ``M`` off the observed set."""
    M = _check_shape(M, obs)
    out = M.copy()
    out[obs.i, obs.j] = 0.0
    return out


def _svd(B: np.ndarray):
    B = np.asarray(B, dtype=float)
    if B.ndim != 2:
        raise DimensionError("expected a 2-d matrix")
    if not np.all(np.isfinite(B)):
        raise np.linalg.LinAlgError("SVD of a matrix with non-finite entries")
    return np.linalg.svd(B, full_matrices=False)


def truncated_svd(B: np.ndarray, r: int):
    """Leading ``r`` singular triplets ``(U, s, V)`` with ``V`` of shape (p, r).

    Ties at the cut (``s[r-1] == s[r]``) are resolved by LAPACK's order, so the
    result is not unique in that case.
    """
    m, p = np.shape(B)
    if not 1 <= r <= min(m, p):
        raise ValueError(f"rank {r} outside [1, {min(m, p)}]")
    U, s, Vt = _svd(B)
    return U[:, :r], s[:r], Vt[:r].T


def rank_r_project(B: np.ndarray, r: int) -> np.ndarray:
    """Best Frobenius approximation of ``B`` with rank at most ``r``."""
    U, s, V = truncated_svd(B, r)
    return (U * s) @ V.T


def svt(B: np.ndarray, t: float) -> np.ndarray:
    """Singular value soft-thresholding, the prox of ``t * nuclear norm``."""
    if t < 0:
        raise ValueError("threshold must be non-negative")
    B = np.asarray(B, dtype=float)
    if t == 0:
        return B.copy()
    U, s, Vt = _svd(B)
    s = np.maximum(s - t, 0.0)
    keep = s > 0
    return (U[:, keep] * s[keep]) @ Vt[keep]


def nuclear_norm(B: np.ndarray) -> float:
    return float(np.linalg.svd(B, compute_uv=False).sum())


def compute_errors(est: np.ndarray, truth: np.ndarray, obs: ObservationSet) -> ErrorReport:
    """MSE per entry, normalized MSE and prediction error on unobserved entries.

    ``pred`` is ``None`` when every entry is observed.
    """
    est = _check_shape(est, obs)
    truth = _check_shape(truth, obs)
    diff = est - truth
    sq = float(np.sum(diff**2))
    tnorm = float(np.sum(truth**2))
    if tnorm == 0:
        raise ValueError("NMSE undefined for an all-zero truth")
    mp = obs.rows * obs.cols
    n_missing = mp - obs.n
    pred = None
    if n_missing > 0:
        pred = float(np.sum(complement_project(diff, obs) ** 2)) / n_missing
    return ErrorReport(mse=sq / mp, nmse=sq / tnorm, pred=pred)


def _cholesky(precision: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(precision)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("precision matrix is not positive definite") from exc


def gaussian_rows(b: np.ndarray, precision: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """Batched draws ``x_i ~ N(P_i^{-1} b_i, P_i^{-1})``.

    ``b`` has shape (n, k) and ``precision`` shape (n, k, k). With
    ``P_i = L_i L_i^T`` the draw is ``L_i^{-T} (L_i^{-1} b_i + z_i)``.
    """
    L = _cholesky(precision)
    z = gen.standard_normal(b.shape)
    w = np.linalg.solve(L, b[..., None])[..., 0] + z
    return np.linalg.solve(np.swapaxes(L, -1, -2), w[..., None])[..., 0]


def gaussian_vector(mean: np.ndarray, precision: np.ndarray, rng: RngStream | np.random.Generator) -> np.ndarray:
    """One draw from ``N(mean, precision^{-1})``."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    precision = np.atleast_2d(np.asarray(precision, dtype=float))
    if precision.shape != (mean.size, mean.size):
        raise DimensionError("precision shape does not match mean")
    if not np.allclose(precision, precision.T):
        raise np.linalg.LinAlgError("precision matrix is not symmetric")
    L = _cholesky(precision)
    z = as_generator(rng).standard_normal(mean.size)
    return mean + np.linalg.solve(L.T, z)
