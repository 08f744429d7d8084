"""Experiment configuration, penalty rules and the key=value config file format."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..sim import SimSpec

ESTIMATORS = ("als", "db", "f_bayes", "bayes")
LAMBDA_RULES = ("verbatim", "sqrt_np_obs")
DB_BASES = ("als", "rule")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def lambda_rule_db(m: int, p: int, sigma: float, rule: str = "verbatim", tau: float = 0.0) -> float:
    """Penalty for the de-biased estimator.

    ``verbatim``: ``2.5 sigma sqrt(m p)``.
    ``sqrt_np_obs``: ``2.5 sigma sqrt(max(m, p) (1 - tau))``.
    """
    if rule == "verbatim":
        return 2.5 * sigma * math.sqrt(m * p)
    if rule == "sqrt_np_obs":
        return 2.5 * sigma * math.sqrt(max(m, p) * (1 - tau))
    raise ConfigError(f"unknown lambda rule {rule!r}; choose from {LAMBDA_RULES}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines the numbers produced by :func:`run_experiment`.

    The de-biased estimator is built from a base ALS fit. With
    ``db_base="als"`` it reuses the fit reported as ``als`` (penalty
    ``als_lambda``, softImpute-style solver), and the rule penalty only enters
    the variance formula. With ``db_base="rule"`` the base fit is penalized by
    the rule penalty.
    """

    sim: SimSpec = field(default_factory=SimSpec)
    replicates: int = 50
    estimators: tuple[str, ...] = ESTIMATORS
    seed: int = 20210101
    fixed_truth: bool = False
    # frequentist
    lambda_rule: str = "verbatim"
    db_base: str = "als"
    als_lambda: float = 0.0
    als_solver: str = "impute"
    als_max_iters: int = 100
    als_tol: float = 1e-5
    ips_correction: bool = False
    variance_scaling: str = "none"
    estimate_sigma2: bool = False
    db_level: float = 0.95
    # bayesian
    gibbs_iters: int = 600
    burn_in: int = 100
    thin: int = 1
    temper_lambda: float | None = None
    temper_semantics: str = "residual"
    K: int = 10
    a: float = 1.0
    b: float = 0.01
    bayes_level: float = 0.89
    intervals: bool = True

    def __post_init__(self):
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown or not self.estimators:
            raise ConfigError(f"unknown estimators {sorted(unknown)}; choose from {ESTIMATORS}")
        if self.lambda_rule not in LAMBDA_RULES:
            raise ConfigError(f"unknown lambda rule {self.lambda_rule!r}")
        if self.db_base not in DB_BASES:
            raise ConfigError(f"unknown db base {self.db_base!r}")
        if self.temper_semantics not in ("residual", "density"):
            raise ConfigError(f"unknown temper semantics {self.temper_semantics!r}")
        if self.variance_scaling not in ("none", "obs_rate"):
            raise ConfigError(f"unknown variance scaling {self.variance_scaling!r}")
        for name in ("db_level", "bayes_level"):
            if not 0 < getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in (0, 1)")
        if not 0 <= self.burn_in < self.gibbs_iters:
            raise ConfigError("burn_in must lie in [0, gibbs_iters)")

    @property
    def db_lambda(self) -> float:
        s = self.sim
        return lambda_rule_db(s.m, s.p, s.sigma, self.lambda_rule, s.tau)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["sim"]["setting"] = self.sim.setting.value
        d["estimators"] = list(self.estimators)
        return d

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def replace(self, **changes) -> "ExperimentConfig":
        sim = changes.pop("sim", self.sim)
        sim_changes = {k: changes.pop(k) for k in list(changes) if k in _SIM_FIELDS}
        if sim_changes:
            sim = dataclasses.replace(sim, **sim_changes)
        return dataclasses.replace(self, sim=sim, **changes)


_SIM_FIELDS = {f.name for f in dataclasses.fields(SimSpec)}
_EXP_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)} | {
    f.name: f for f in dataclasses.fields(SimSpec)
}


def _coerce(name: str, raw: str) -> Any:
    if name == "estimators":
        return tuple(x.strip() for x in raw.split(",") if x.strip())
    if name == "setting":
        return raw.strip()
    default = getattr(ExperimentConfig(), name, None)
    if default is None and name in _SIM_FIELDS:
        default = getattr(SimSpec(), name)
    if name == "temper_lambda":
        return None if raw.strip().lower() in ("", "none", "default") else float(raw)
    if isinstance(default, bool):
        if raw.strip().lower() in ("1", "true", "yes", "on"):
            return True
        if raw.strip().lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw.strip()


def parse_config_file(path: str | Path) -> dict[str, Any]:
    """Read ``key = value`` pairs from any section of an INI-style file.

    Keys are :class:`ExperimentConfig` or :class:`~lowrank_uq.sim.SimSpec`
    field names; section names are free-form grouping.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keys are case-sensitive field names
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    out: dict[str, Any] = {}
    for section in parser.sections():
        for key, raw in parser[section].items():
            if key not in _EXP_FIELDS or key == "sim":
                raise ConfigError(f"unknown config key {key!r} in section [{section}]")
            try:
                out[key] = _coerce(key, raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return out


def build_config(base: ExperimentConfig | None = None, **overrides) -> ExperimentConfig:
    """Apply flat overrides (simulation and experiment keys mixed) to ``base``."""
    base = base or ExperimentConfig()
    overrides = {k: v for k, v in overrides.items() if v is not None}
    try:
        return base.replace(**overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def write_config_file(cfg: ExperimentConfig, path: str | Path) -> Path:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    d = cfg.to_dict()
    parser["sim"] = {k: str(v) for k, v in d.pop("sim").items()}
    d["estimators"] = ",".join(d["estimators"])
    parser["experiment"] = {k: str(v) for k, v in d.items()}
    path = Path(path)
    with path.open("w") as fh:
        parser.write(fh)
    return path
