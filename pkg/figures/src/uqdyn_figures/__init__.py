"""Figure rendering for uqdyn harness CSV artifacts."""

from .render import FIGURE_KINDS, render
from .schema import SchemaError

__version__ = "0.1.0"

__all__ = ["FIGURE_KINDS", "SchemaError", "render"]
