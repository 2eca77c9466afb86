"""Figure rendering from coarsegauss experiment CSVs.

Figures never recompute statistics: every plotted number is read from a CSV
column produced by the coarsegauss CLI.
"""

from .render import FigureSpec, FigureError, render

__all__ = ["FigureSpec", "FigureError", "render"]
