"""Report figures for the solution-map experiments.

Three standalone scripts render the experiment outputs: the ratio-growth
trend, the particle separation against its bound, and the transported bump
supports. They are pure consumers of the documented records.csv /
summary.json / field file formats and never invoke solver code.
"""

from .io import FIELD_FORMAT_VERSION, load_field, read_records, read_summary
from .fit import loglog_slope

__all__ = [
    "read_records",
    "read_summary",
    "load_field",
    "loglog_slope",
    "FIELD_FORMAT_VERSION",
]

__version__ = "0.1.0"
