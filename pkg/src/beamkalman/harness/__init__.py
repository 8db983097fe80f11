"""Experiment orchestration and CLI."""

from .config import ExperimentConfig, build_desk_scenario, build_paper_scenario, load_config
from .experiment import ResultRow, run_experiment, summarize
from .output import emit, parse_rows

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "build_desk_scenario",
    "build_paper_scenario",
    "emit",
    "load_config",
    "parse_rows",
    "run_experiment",
    "summarize",
]
