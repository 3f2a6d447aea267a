"""lorwave-plots: deterministic batch figures from lorwave artifacts."""

from .render import FigureSpec, MissingColumn, SchemaMismatch, render

__all__ = ["FigureSpec", "MissingColumn", "SchemaMismatch", "render"]

__version__ = "0.1.0"
