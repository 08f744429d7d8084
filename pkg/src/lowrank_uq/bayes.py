"""Gibbs samplers for tempered posteriors over low-rank factorizations.

Two priors are supported on ``M = U V^T``:

* ``FixedRank(r)``: columns of ``U`` and ``V`` are i.i.d. standard normal.
* ``Flexible(K, a, b)``: column ``k`` of both factors has variance ``gamma_k``
  with ``1 / gamma_k ~ Gamma(a, rate=b)``.

The likelihood is tempered. Under the default ``"residual"`` semantics the
target is ``exp(-lam ||P(Y - U V^T)||_F^2) * prior``; under ``"density"`` it is
the Gaussian likelihood raised to ``lam``, i.e. residual precision
``lam / sigma2``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .core import CompletionEstimate, FactorPair, ObservationSet, RngStream, as_generator, gaussian_rows
from .debias import IntervalMatrix

MIN_CREDIBLE_DRAWS = 20


class TemperSemantics(str, Enum):
    RESIDUAL = "residual"
    DENSITY = "density"


@dataclass(frozen=True)
class FixedRank:
    rank: int

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("fixed-rank prior needs rank >= 1")

    @property
    def k(self) -> int:
        return self.rank


@dataclass(frozen=True)
class Flexible:
    K: int = 10
    a: float = 1.0
    b: float = 0.01

    def __post_init__(self):
        if self.K < 1 or self.a <= 0 or self.b <= 0:
            raise ValueError("flexible prior needs K >= 1, a > 0, b > 0")

    @property
    def k(self) -> int:
        return self.K


Prior = Union[FixedRank, Flexible]


@dataclass(frozen=True)
class GibbsConfig:
    prior: Prior
    sigma2: float = 1.0
    temper_lambda: Optional[float] = None
    n_iters: int = 600
    burn_in: int = 100
    thin: int = 1
    semantics: TemperSemantics = TemperSemantics.RESIDUAL

    def __post_init__(self):
        if self.temper_lambda is None:
            object.__setattr__(self, "temper_lambda", 1.0 / (4.0 * self.sigma2))
        object.__setattr__(self, "semantics", TemperSemantics(self.semantics))
        if self.temper_lambda <= 0:
            raise ValueError("tempering parameter must be positive")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if not 0 <= self.burn_in < self.n_iters:
            raise ValueError("burn_in must lie in [0, n_iters)")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")

    @property
    def likelihood_precision(self) -> float:
        """Coefficient ``c`` in the conditional precision ``D + c * sum v v^T``."""
        if self.semantics is TemperSemantics.RESIDUAL:
            return 2.0 * self.temper_lambda
        return self.temper_lambda / self.sigma2

    @property
    def n_retained(self) -> int:
        return len(range(self.burn_in, self.n_iters, self.thin))


@dataclass
class PosteriorSamples:
    U: np.ndarray  # (T, m, k)
    V: np.ndarray  # (T, p, k)
    config: GibbsConfig
    gamma: Optional[np.ndarray] = None  # (T, K), flexible prior only
    residual_trace: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self) -> int:
        return self.U.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.U.shape[1], self.V.shape[1])

    def matrix(self, t: int) -> np.ndarray:
        return self.U[t] @ self.V[t].T

    def entry_draws(self, i: int, j: int) -> np.ndarray:
        return np.einsum("tk,tk->t", self.U[:, i, :], self.V[:, j, :])

    def row_block(self, start: int, stop: int) -> np.ndarray:
        """Draws of rows ``start:stop`` of ``M``, shape (T, stop - start, p)."""
        return np.einsum("tik,tjk->tij", self.U[:, start:stop, :], self.V)


def sample_factor_rows(
    Y: np.ndarray,
    mask: np.ndarray,
    other: np.ndarray,
    prior_precision: np.ndarray,
    coef: float,
    gen: np.random.Generator,
) -> np.ndarray:
    """Draw every row ``x_i`` of a factor from its Gaussian full conditional.

    Precision ``diag(prior_precision) + coef * sum_{j in Omega_i} o_j o_j^T``,
    mean ``precision^{-1} coef * sum_{j in Omega_i} Y_ij o_j``.
    """
    k = other.shape[1]
    w = mask.astype(float)
    gram = (w @ (other[:, :, None] * other[:, None, :]).reshape(-1, k * k)).reshape(-1, k, k)
    prec = coef * gram + np.diag(prior_precision)
    rhs = coef * ((Y * w) @ other)
    return gaussian_rows(rhs, prec, gen)


def sample_gamma(U: np.ndarray, V: np.ndarray, a: float, b: float, gen: np.random.Generator) -> np.ndarray:
    """Conjugate update ``1 / gamma_k ~ Gamma(a + (m + p) / 2, rate b + (|U_k|^2 + |V_k|^2) / 2)``."""
    shape = gamma_shape(a, U.shape[0], V.shape[0])
    rate = b + 0.5 * (np.sum(U**2, axis=0) + np.sum(V**2, axis=0))
    return 1.0 / gen.gamma(shape, 1.0 / rate)


def gamma_shape(a: float, m: int, p: int) -> float:
    return a + 0.5 * (m + p)


def gibbs_run(
    obs: ObservationSet,
    cfg: GibbsConfig,
    rng: RngStream | np.random.Generator,
    init: Optional[FactorPair] = None,
) -> PosteriorSamples:
    """Systematic-scan Gibbs chain: rows of ``U``, rows of ``V``, then ``gamma``.

    Initial factors are ``init`` when given, otherwise i.i.d. ``N(0, 1/k)``;
    ``gamma`` starts at ``b / a``.
    """
    m, p = obs.shape
    k = cfg.prior.k
    if not 1 <= k <= min(m, p):
        raise ValueError(f"inner dimension {k} outside [1, {min(m, p)}]")
    gen = as_generator(rng)
    flexible = isinstance(cfg.prior, Flexible)
    coef = cfg.likelihood_precision

    Y = obs.to_dense()
    mask = obs.mask
    if init is None:
        U = gen.standard_normal((m, k)) / np.sqrt(k)
        V = gen.standard_normal((p, k)) / np.sqrt(k)
    else:
        if init.U.shape != (m, k) or init.V.shape != (p, k):
            raise ValueError("initial factors have the wrong shape")
        U, V = init.U.copy(), init.V.copy()
    gamma = np.full(k, cfg.prior.b / cfg.prior.a) if flexible else np.ones(k)

    T = cfg.n_retained
    U_draws = np.empty((T, m, k))
    V_draws = np.empty((T, p, k))
    g_draws = np.empty((T, k)) if flexible else None
    resid = np.empty(cfg.n_iters)
    t = 0
    for it in range(cfg.n_iters):
        U = sample_factor_rows(Y, mask, V, 1.0 / gamma, coef, gen)
        V = sample_factor_rows(Y.T, mask.T, U, 1.0 / gamma, coef, gen)
        if flexible:
            gamma = sample_gamma(U, V, cfg.prior.a, cfg.prior.b, gen)
        r = obs.y - np.einsum("nk,nk->n", U[obs.i], V[obs.j])
        resid[it] = r @ r
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            U_draws[t] = U
            V_draws[t] = V
            if flexible:
                g_draws[t] = gamma
            t += 1
    return PosteriorSamples(U_draws, V_draws, cfg, g_draws, resid)


def posterior_mean(samples: PosteriorSamples) -> CompletionEstimate:
    if len(samples) == 0:
        raise ValueError("no posterior draws")
    mean = np.einsum("tik,tjk->ij", samples.U, samples.V) / len(samples)
    cfg = samples.config
    method = "bayes" if isinstance(cfg.prior, Flexible) else "f_bayes"
    return CompletionEstimate(mean, method, {"temper_lambda": cfg.temper_lambda, "n_draws": len(samples)})


def credible_interval(samples: PosteriorSamples, level: float = 0.89, block_rows: int = 10) -> IntervalMatrix:
    """Equal-tailed entrywise intervals from type-7 (linear) empirical quantiles.

    Draws are materialized ``block_rows`` rows at a time to bound memory.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if len(samples) < MIN_CREDIBLE_DRAWS:
        raise ValueError(f"need at least {MIN_CREDIBLE_DRAWS} draws, got {len(samples)}")
    m, p = samples.shape
    q = [(1 - level) / 2, 1 - (1 - level) / 2]
    lower = np.empty((m, p))
    upper = np.empty((m, p))
    for start in range(0, m, block_rows):
        stop = min(start + block_rows, m)
        lo, hi = np.quantile(samples.row_block(start, stop), q, axis=0, method="linear")
        lower[start:stop] = lo
        upper[start:stop] = hi
    return IntervalMatrix(lower, upper, level, "bayes-CrI")


def effective_sample_size(x: np.ndarray) -> float:
    """Autocorrelation ESS with Geyer's initial monotone sequence truncation.

    A constant chain has ESS 1.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 2:
        raise ValueError("need at least 2 draws")
    xc = x - x.mean()
    var = xc @ xc / n
    if var <= 1e-300 * max(1.0, float(np.max(np.abs(x))) ** 2):
        return 1.0
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    rho = acov / acov[0]
    # pair sums Gamma_t = rho_{2t} + rho_{2t+1}, kept while positive and non-increasing
    tau = -1.0
    prev = np.inf
    for t in range(0, n - 1, 2):
        pair = rho[t] + rho[t + 1]
        if pair <= 0:
            break
        pair = min(pair, prev)
        tau += 2 * pair
        prev = pair
    return float(n / max(tau, 1e-12))


@dataclass
class ChainDiagnostics:
    entries: list[tuple[int, int]]
    ess: np.ndarray
    residual_trace: np.ndarray

    @property
    def ess_min(self) -> float:
        return float(np.min(self.ess))

    @property
    def ess_median(self) -> float:
        return float(np.median(self.ess))


def chain_diagnostics(
    samples: PosteriorSamples, n_entries: int = 20, rng: RngStream | np.random.Generator | None = None
) -> ChainDiagnostics:
    """ESS for a random subsample of entries plus the residual-norm trace."""
    if len(samples) < 2:
        raise ValueError("need at least 2 draws")
    m, p = samples.shape
    gen = as_generator(rng if rng is not None else RngStream(0))
    n_entries = min(n_entries, m * p)
    flat = gen.choice(m * p, size=n_entries, replace=False)
    entries = [(int(f // p), int(f % p)) for f in flat]
    ess = np.array([effective_sample_size(samples.entry_draws(i, j)) for i, j in entries])
    return ChainDiagnostics(entries, ess, samples.residual_trace)


def dump_draws(samples: PosteriorSamples, entries: Sequence[tuple[int, int]], path: str | Path) -> Path:
    """Write retained draws of the given entries to CSV, one column per entry.

    Column headers use 1-based indices, ``M[i,j]``.
    """
    path = Path(path)
    cols = [samples.entry_draws(i, j) for i, j in entries]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"M[{i + 1},{j + 1}]" for i, j in entries])
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
    return path
