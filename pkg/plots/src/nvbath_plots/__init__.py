"""Figure rendering for nvbath CSV artifacts."""

from .csvdata import SchemaError, Table, read_table
from .render import Style, render_histogram, render_trace

__version__ = "0.1.0"

__all__ = ["SchemaError", "Style", "Table", "read_table",
           "render_histogram", "render_trace", "__version__"]
