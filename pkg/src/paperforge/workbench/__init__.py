"""Orchestration: project state machine, CLI, HTTP API, and metrics."""

from .config import Config, load_config
from .metrics import MetricsReport, compute_metrics, export_metrics, project_metrics
from .project import Project, ProjectState

__all__ = [
    "Config",
    "load_config",
    "MetricsReport",
    "compute_metrics",
    "export_metrics",
    "project_metrics",
    "Project",
    "ProjectState",
]
