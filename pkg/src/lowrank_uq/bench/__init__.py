"""Experiment orchestration: configs, replicated runs, table reproduction and figure data."""

from .config import ConfigError, ExperimentConfig, build_config, lambda_rule_db, parse_config_file
from .experiment import ResultRow, aggregate, run_experiment, run_replicate, write_csv, write_json
from .figure import emit_figure_data
from .tables import reproduce_table

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ResultRow",
    "aggregate",
    "build_config",
    "emit_figure_data",
    "lambda_rule_db",
    "parse_config_file",
    "reproduce_table",
    "run_experiment",
    "run_replicate",
    "write_csv",
    "write_json",
]
