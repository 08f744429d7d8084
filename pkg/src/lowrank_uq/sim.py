"""Synthetic low-rank truths and uniformly sampled noisy observations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import ObservationSet, RngStream, as_generator


class Setting(str, Enum):
    EXACT = "exact"
    APPROX = "approx"


@dataclass(frozen=True)
class SimSpec:
    """Dimensions, rank and noise of one simulated problem.

    ``tau`` is the fraction of entries left unobserved.
    """

    m: int = 100
    p: int = 100
    r: int = 2
    setting: Setting = Setting.EXACT
    tau: float = 0.2
    sigma: float = 1.0
    perturb_rank: int = 50
    perturb_scale: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "setting", Setting(self.setting))
        if self.m < 1 or self.p < 1:
            raise ValueError("dimensions must be positive")
        if not 1 <= self.r <= min(self.m, self.p):
            raise ValueError("rank outside [1, min(m, p)]")
        if self.setting is Setting.APPROX and not 1 <= self.perturb_rank <= min(self.m, self.p):
            raise ValueError("perturbation rank outside [1, min(m, p)]")
        if not 0 <= self.tau < 1:
            raise ValueError("tau must lie in [0, 1)")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


def gen_truth(spec: SimSpec, rng: RngStream | np.random.Generator) -> np.ndarray:
    """``U V^T`` with standard normal factors, plus ``scale * A B^T`` in the approximate setting."""
    gen = as_generator(rng)
    U = gen.standard_normal((spec.m, spec.r))
    V = gen.standard_normal((spec.p, spec.r))
    M = U @ V.T
    if spec.setting is Setting.APPROX:
        A = gen.standard_normal((spec.m, spec.perturb_rank))
        B = gen.standard_normal((spec.p, spec.perturb_rank))
        M = M + spec.perturb_scale * (A @ B.T)
    return M


def n_observed(m: int, p: int, tau: float) -> int:
    return int(math.floor((1 - tau) * m * p + 0.5))


def sample_observations(
    truth: np.ndarray, tau: float, sigma: float, rng: RngStream | np.random.Generator
) -> ObservationSet:
    """Observe ``round((1 - tau) m p)`` entries chosen without replacement, with N(0, sigma^2) noise."""
    if not 0 <= tau < 1:
        raise ValueError("tau must lie in [0, 1)")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    m, p = truth.shape
    n = n_observed(m, p, tau)
    if n == 0:
        raise ValueError(f"tau={tau} leaves no observed entries in a {m}x{p} matrix")
    gen = as_generator(rng)
    flat = np.sort(gen.choice(m * p, size=n, replace=False))
    i, j = np.divmod(flat, p)
    y = truth[i, j] + sigma * gen.standard_normal(n)
    return ObservationSet(m, p, i, j, y)
