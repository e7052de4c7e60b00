"""Rendering of convergence curves and per-agent distribution bars from
the liquidation trainer's comparison CSVs."""

from .render import (
    CONVERGENCE_COLUMNS,
    DISTRIBUTION_COLUMNS,
    FigureSpec,
    SchemaError,
    load_rows,
    render,
    smooth,
)

__version__ = "0.1.0"

__all__ = [
    "CONVERGENCE_COLUMNS",
    "DISTRIBUTION_COLUMNS",
    "FigureSpec",
    "SchemaError",
    "load_rows",
    "render",
    "smooth",
]
