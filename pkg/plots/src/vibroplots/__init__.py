"""Figure rendering for vibro-w CSV outputs."""

__version__ = "0.1.0"

from .render import FigureSpec, RenderError, render, render_to_file  # noqa: F401
