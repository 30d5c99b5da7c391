"""Figure rendering for gpusched experiment CSVs."""

from .figures import FigureError, FigureSpec, PlotResult, plot

__version__ = "0.1.0"
