"""Low-rank matrix completion with entrywise uncertainty quantification.

Frequentist (soft-impute, ALS, de-biased) and tempered-Bayesian (Gibbs)
estimators, plus a harness that replays the simulation studies.
"""

from .bayes import (
    FixedRank,
    Flexible,
    GibbsConfig,
    PosteriorSamples,
    chain_diagnostics,
    credible_interval,
    gibbs_run,
    posterior_mean,
)
from .core import (
    CompletionEstimate,
    DimensionError,
    ErrorReport,
    FactorPair,
    ObservationSet,
    RngStream,
    complement_project,
    compute_errors,
    gaussian_vector,
    mask_project,
    rank_r_project,
    svt,
)
from .debias import IntervalMatrix, confidence_interval, debias, debias_fit, entry_variance, interval_stats
from .freq import AlsConfig, SoftImputeConfig, als_fit, soft_impute_fit
from .sim import SimSpec, gen_truth, sample_observations

__version__ = "0.1.0"
