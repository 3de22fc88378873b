"""Render figures from scalenet experiment exports (trace/metrics/sweep files)."""

from .plots import PLOT_KINDS, PlotSpec, RenderError, render

__all__ = ["PLOT_KINDS", "PlotSpec", "RenderError", "render"]
