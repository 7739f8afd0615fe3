"""Utilities Package - logging setup and report rendering."""

from .log_setup import configure_logging, get_logger
from .report_writer import ExperimentResult, RunReporter

__all__ = ["ExperimentResult", "RunReporter", "configure_logging", "get_logger"]
