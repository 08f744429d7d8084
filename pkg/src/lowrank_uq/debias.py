"""De-biased low-rank estimator with entrywise Gaussian confidence intervals."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import norm

from .core import DimensionError, ObservationSet, RngStream, mask_project, rank_r_project, truncated_svd
from .freq import AlsConfig, als_fit

LEVERAGE_ATOL = 1e-14


class DegenerateLeverageWarning(RuntimeWarning):
    """Some entries have zero variance because their row and column leverages vanish."""


@dataclass(frozen=True)
class IntervalMatrix:
    lower: np.ndarray
    upper: np.ndarray
    level: float
    method: str

    def __post_init__(self):
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")
        if self.lower.shape != self.upper.shape:
            raise DimensionError("lower and upper bounds differ in shape")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def length(self) -> np.ndarray:
        return self.upper - self.lower


@dataclass
class DebiasResult:
    m_db: np.ndarray
    u_db: np.ndarray
    v_db: np.ndarray
    sigma2: float
    lam: float
    m_hat: np.ndarray
    variance: np.ndarray
    degenerate: np.ndarray = field(repr=False)


def debias(
    m_hat: np.ndarray, obs: ObservationSet, r: int, ips_correction: bool = False
) -> np.ndarray:
    """Rank-``r`` projection of ``m_hat`` with its observed entries replaced by ``Y``.

    With ``ips_correction`` the correction on the observed set is divided by
    the observed fraction ``n / (m p)``.
    """
    m_hat = np.asarray(m_hat, dtype=float)
    correction = mask_project(m_hat, obs)
    correction[obs.i, obs.j] -= obs.y
    if ips_correction:
        correction /= obs.observed_fraction
    return rank_r_project(m_hat - correction, r)


def leverages(U: np.ndarray, s: np.ndarray, V: np.ndarray, lam: float):
    """Row and column leverages of ``U (S + lam I)^{1/2}`` and ``V (S + lam I)^{1/2}``.

    Returns ``(row, col, u_db, v_db)``.
    """
    s = np.asarray(s, dtype=float)
    scale = s + lam
    if np.any(scale <= 0):
        raise np.linalg.LinAlgError("singular Gram matrix: some singular value plus lambda is not positive")
    root = np.sqrt(scale)
    u_db = U * root
    v_db = V * root

    def quad(F):
        G = F.T @ F
        try:
            X = np.linalg.solve(G, F.T)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("singular Gram matrix in leverage computation") from exc
        return np.einsum("ik,ki->i", F, X)

    return quad(u_db), quad(v_db), u_db, v_db


def entry_variance(U: np.ndarray, s: np.ndarray, V: np.ndarray, lam: float, sigma2: float) -> np.ndarray:
    """Entrywise variance ``sigma2 * (row leverage_i + column leverage_j)``.

    Entries whose row and column leverages both vanish get variance 0 and
    trigger a :class:`DegenerateLeverageWarning`.
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    row, col, _, _ = leverages(U, s, V, lam)
    row = np.where(np.abs(row) < LEVERAGE_ATOL, 0.0, row)
    col = np.where(np.abs(col) < LEVERAGE_ATOL, 0.0, col)
    v = sigma2 * (row[:, None] + col[None, :])
    if np.any(v == 0):
        warnings.warn(
            f"{int(np.sum(v == 0))} entries have zero leverage; their intervals have width 0",
            DegenerateLeverageWarning,
            stacklevel=2,
        )
    return v


def normal_quantile(alpha: float) -> float:
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return float(norm.ppf(1 - alpha / 2))


def confidence_interval(m_db: np.ndarray, v: np.ndarray, alpha: float = 0.05) -> IntervalMatrix:
    """Two-sided ``1 - alpha`` Gaussian intervals ``m_db +/- z sqrt(v)``."""
    if np.any(v < 0):
        raise ValueError("variances must be non-negative")
    half = normal_quantile(alpha) * np.sqrt(v)
    return IntervalMatrix(m_db - half, m_db + half, 1 - alpha, "debias-CI")


def interval_stats(iv: IntervalMatrix, truth: np.ndarray) -> tuple[float, float]:
    """Mean interval length and the fraction of entries whose interval covers ``truth``."""
    if truth.shape != iv.lower.shape:
        raise DimensionError("truth shape does not match intervals")
    length = float(np.mean(iv.upper - iv.lower))
    cover = float(np.mean((iv.lower <= truth) & (truth <= iv.upper)))
    return length, cover


def estimate_sigma2(m_fit: np.ndarray, obs: ObservationSet, r: int) -> float:
    """Residual variance on the observed set, corrected for ``r (m + p - r)`` fitted parameters."""
    resid = obs.y - m_fit[obs.i, obs.j]
    dof = max(obs.n - r * (obs.rows + obs.cols - r), 1)
    return float(resid @ resid) / dof


VARIANCE_SCALINGS = ("none", "obs_rate")


def debias_from_base(
    m_hat: np.ndarray,
    obs: ObservationSet,
    r: int,
    lam: float,
    sigma2: Optional[float] = 1.0,
    ips_correction: bool = False,
    variance_scaling: str = "none",
) -> DebiasResult:
    """De-bias a base estimate and compute entrywise variances.

    ``lam`` enters the variance through ``(S + lam I)^{1/2}``. With
    ``variance_scaling="obs_rate"`` the noise variance is divided by the
    observed fraction. ``sigma2=None`` uses the residual-variance estimate.
    """
    if variance_scaling not in VARIANCE_SCALINGS:
        raise ValueError(f"unknown variance scaling {variance_scaling!r}")
    m_db = debias(m_hat, obs, r, ips_correction=ips_correction)
    if sigma2 is None:
        sigma2 = estimate_sigma2(m_db, obs, r)
    U, s, V = truncated_svd(m_hat, r)
    noise = sigma2 / obs.observed_fraction if variance_scaling == "obs_rate" else sigma2
    row, col, u_db, v_db = leverages(U, s, V, lam)
    if noise == 0:
        # noiseless data: point intervals
        v = np.zeros(obs.shape)
        degenerate = np.zeros(obs.shape, dtype=bool)
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateLeverageWarning)
            v = entry_variance(U, s, V, lam, noise)
        degenerate = v == 0
    return DebiasResult(m_db, u_db, v_db, sigma2, lam, np.asarray(m_hat, dtype=float), v, degenerate)


def debias_fit(
    obs: ObservationSet,
    r: int,
    lam: float,
    rng: RngStream | np.random.Generator,
    sigma2: Optional[float] = 1.0,
    ips_correction: bool = False,
    variance_scaling: str = "none",
    als: Optional[AlsConfig] = None,
) -> DebiasResult:
    """ALS base fit followed by :func:`debias_from_base`.

    The base fit uses ``als`` when given, otherwise rowwise ALS penalized by
    ``lam``.
    """
    if als is None:
        als = AlsConfig(lam, r)
    base = als_fit(obs, als, rng)
    return debias_from_base(base.estimate.matrix, obs, r, lam, sigma2, ips_correction, variance_scaling)
