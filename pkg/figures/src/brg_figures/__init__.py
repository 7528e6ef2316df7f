"""Figure regeneration for body-reservoir governance experiment outputs."""

__version__ = "0.1.0"

from .catalog import CATALOG, FIGURE_IDS, FigureSpec
from .render import FigureError, render_all, render_figure

__all__ = [
    "__version__",
    "CATALOG",
    "FIGURE_IDS",
    "FigureSpec",
    "FigureError",
    "render_all",
    "render_figure",
]
