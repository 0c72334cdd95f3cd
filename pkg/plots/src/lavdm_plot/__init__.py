"""Figure rendering for landmark vector-diffusion experiment CSVs."""

from .figures import KINDS, FigureSpec, SchemaMismatch, load_table, render

__version__ = "0.1.0"
