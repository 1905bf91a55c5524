"""Scenario files, result files and the command-line interface."""

from .config import ScenarioConfig, load_scenario, parse_scenario, serialize_scenario
from .output import write_probe_csv, write_vtk_snapshot

__all__ = ["ScenarioConfig", "load_scenario", "parse_scenario", "serialize_scenario",
           "write_probe_csv", "write_vtk_snapshot"]
