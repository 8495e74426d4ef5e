"""Figure rendering for nichepop experiment CSV output."""

from .render import PlotKind, PlotSpec, SchemaError, build_figure, render

__version__ = "0.1.0"
