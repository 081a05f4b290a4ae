"""Experiment driver, report emission and the command-line entry point."""
from .config import load_config, parse_config, spec_from_mapping
from .experiments import (
    ExperimentSpec,
    ProbeResult,
    RateFit,
    SweepRecord,
    fit_rate,
    run_convergence,
    run_probe_battery,
)
from .report import emit_report

__all__ = ["ExperimentSpec", "ProbeResult", "RateFit", "SweepRecord", "emit_report", "fit_rate",
           "load_config", "parse_config", "run_convergence", "run_probe_battery", "spec_from_mapping"]
