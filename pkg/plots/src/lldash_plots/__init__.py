"""Batch figure rendering over simulator result files.

Consumes the simulator's documented outputs (runs.csv, aggregate.csv, profile
CSVs, per-run JSONL event logs) and renders static images; it never imports the
simulator itself.
"""

from .render import PlotSpec, SchemaError, box_stats, render

__all__ = ["PlotSpec", "SchemaError", "box_stats", "render"]
