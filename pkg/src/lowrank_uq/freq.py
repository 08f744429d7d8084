"""Soft-impute and alternating least squares for penalized matrix completion."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    CompletionEstimate,
    FactorPair,
    ObservationSet,
    RngStream,
    as_generator,
    complement_project,
    svt,
)


ALS_SOLVERS = ("rowwise", "impute")


@dataclass(frozen=True)
class AlsConfig:
    """Penalized factorization settings.

    ``solver="rowwise"`` solves the ridge problem of every row exactly on its
    observed columns. ``solver="impute"`` fills unobserved entries with the
    current fit and regresses on the completed matrix (the scheme used by the
    softImpute package); both decrease the same objective.
    """

    lam: float
    rank: int
    max_iters: int = 200
    tol: float = 1e-6
    solver: str = "rowwise"

    def __post_init__(self):
        if self.solver not in ALS_SOLVERS:
            raise ValueError(f"unknown ALS solver {self.solver!r}")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class SoftImputeConfig:
    lam: float
    max_iters: int = 300
    tol: float = 1e-6

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


@dataclass
class AlsResult:
    factors: FactorPair
    estimate: CompletionEstimate
    objective: list[float]
    n_iters: int
    converged: bool


def als_objective(obs: ObservationSet, U: np.ndarray, V: np.ndarray, lam: float) -> float:
    resid = obs.y - np.einsum("nk,nk->n", U[obs.i], V[obs.j])
    return 0.5 * float(resid @ resid) + 0.5 * lam * float(np.sum(U**2) + np.sum(V**2))


def ridge_rows(Y: np.ndarray, mask: np.ndarray, other: np.ndarray, lam: float) -> np.ndarray:
    """Solve ``(O_i^T O_i + lam I) x_i = O_i^T y_i`` for every row ``i`` of ``Y``.

    ``O_i`` holds the rows of ``other`` at the observed columns of row ``i``.
    Rows without observations get the zero solution.
    """
    k = other.shape[1]
    w = mask.astype(float)
    gram = (w @ (other[:, :, None] * other[:, None, :]).reshape(-1, k * k)).reshape(-1, k, k)
    rhs = (Y * w) @ other
    if lam > 0:
        gram += lam * np.eye(k)
        return np.linalg.solve(gram, rhs[..., None])[..., 0]
    return (np.linalg.pinv(gram, hermitian=True) @ rhs[..., None])[..., 0]


def impute_ridge(Y: np.ndarray, mask: np.ndarray, fixed: np.ndarray, current: np.ndarray, lam: float) -> np.ndarray:
    """One majorize-minimize step: ridge-regress the completed matrix on ``fixed``.

    ``Y`` is (m, p), ``fixed`` is (p, k) and ``current`` (m, k) is the factor
    being replaced; unobserved entries are filled with ``current @ fixed.T``.
    """
    X = np.where(mask, Y, current @ fixed.T)
    k = fixed.shape[1]
    G = fixed.T @ fixed + lam * np.eye(k)
    rhs = X @ fixed
    if lam > 0:
        return np.linalg.solve(G, rhs.T).T
    return rhs @ np.linalg.pinv(G, hermitian=True)


def als_fit(
    obs: ObservationSet,
    cfg: AlsConfig,
    rng: RngStream | np.random.Generator,
    init: Optional[FactorPair] = None,
) -> AlsResult:
    """Alternating ridge regressions on the factors of ``U V^T``.

    The objective ``0.5 ||P(Y - U V^T)||^2 + lam/2 (||U||^2 + ||V||^2)`` is
    recorded after every half-sweep; iteration stops once the relative change
    over a full sweep falls below ``cfg.tol``.

    Without ``init``, the rowwise solver starts from i.i.d. ``N(0, 1/r)``
    factors; the impute solver starts from a random orthonormal ``U`` and
    ``V = 0`` and updates ``V`` first.
    """
    m, p = obs.shape
    r = cfg.rank
    if not 1 <= r <= min(m, p):
        raise ValueError(f"rank {r} outside [1, {min(m, p)}]")
    impute = cfg.solver == "impute"
    if init is None:
        gen = as_generator(rng)
        if impute:
            U = np.linalg.qr(gen.standard_normal((m, r)))[0]
            V = np.zeros((p, r))
        else:
            U = gen.standard_normal((m, r)) / np.sqrt(r)
            V = gen.standard_normal((p, r)) / np.sqrt(r)
    else:
        if init.U.shape != (m, r) or init.V.shape != (p, r):
            raise ValueError("warm-start factors have the wrong shape")
        U, V = init.U.copy(), init.V.copy()

    Y = obs.to_dense()
    mask = obs.mask
    trace = [als_objective(obs, U, V, cfg.lam)]
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        if impute:
            V = impute_ridge(Y.T, mask.T, U, V, cfg.lam)
            trace.append(als_objective(obs, U, V, cfg.lam))
            U = impute_ridge(Y, mask, V, U, cfg.lam)
        else:
            U = ridge_rows(Y, mask, V, cfg.lam)
            trace.append(als_objective(obs, U, V, cfg.lam))
            V = ridge_rows(Y.T, mask.T, U, cfg.lam)
        trace.append(als_objective(obs, U, V, cfg.lam))
        prev, cur = trace[-3], trace[-1]
        if abs(prev - cur) <= cfg.tol * max(abs(prev), np.finfo(float).tiny):
            converged = True
            break

    factors = FactorPair(U, V)
    est = CompletionEstimate(
        factors.product(),
        "als",
        {"lambda": cfg.lam, "rank": r, "max_iters": cfg.max_iters, "tol": cfg.tol, "solver": cfg.solver},
        getattr(rng, "seed", None),
    )
    return AlsResult(factors, est, trace, it, converged)


def soft_impute_objective(obs: ObservationSet, Z: np.ndarray, lam: float) -> float:
    resid = Z[obs.i, obs.j] - obs.y
    return 0.5 * float(resid @ resid) + lam * float(np.linalg.svd(Z, compute_uv=False).sum())


@dataclass
class SoftImputeResult:
    estimate: CompletionEstimate
    objective: list[float]
    n_iters: int
    converged: bool


def soft_impute_fit(obs: ObservationSet, cfg: SoftImputeConfig) -> SoftImputeResult:
    """Iterate ``Z <- svt(P(Y) + P_perp(Z), lam)`` from ``Z = 0``."""
    Y = obs.to_dense()
    Z = np.zeros(obs.shape)
    trace = [soft_impute_objective(obs, Z, cfg.lam)]
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        Z_new = svt(Y + complement_project(Z, obs), cfg.lam)
        trace.append(soft_impute_objective(obs, Z_new, cfg.lam))
        delta = np.linalg.norm(Z_new - Z)
        scale = np.linalg.norm(Z)
        Z = Z_new
        if delta == 0 or (scale > 0 and delta / scale < cfg.tol):
            converged = True
            break
    est = CompletionEstimate(Z, "soft_impute", {"lambda": cfg.lam, "max_iters": cfg.max_iters, "tol": cfg.tol})
    return SoftImputeResult(est, trace, it, converged)
