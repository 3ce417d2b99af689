"""Config-driven runs, sweeps, persistence, plotting and validation suites."""

from .config import RunConfig, config_fingerprint, load_config, parse_config
from .experiment import RunResult, run_experiment, sweep, write_outputs
from .persist import CSV_COLUMNS, csv_text, load_log, persist_log, read_csv
from .plot import render_plot
from .validation import list_checks, validate_suite

__all__ = [
    "CSV_COLUMNS",
    "RunConfig",
    "RunResult",
    "config_fingerprint",
    "csv_text",
    "list_checks",
    "load_config",
    "load_log",
    "parse_config",
    "persist_log",
    "read_csv",
    "render_plot",
    "run_experiment",
    "sweep",
    "validate_suite",
    "write_outputs",
]
