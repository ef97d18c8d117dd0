"""Batch report generation over simulator CSV output.

Consumes the documented summary.csv / max_eqv.csv schemas only; produces
one CI-bar image per metric, a recomputable ci.csv, an equivalence table,
and a single self-contained HTML report page.
"""

__version__ = "0.1.0"

from .core import (METRIC_COLUMNS, ReportError, ci_table, load_summary,
                   plot_metric, render_report, table_max_eqv)

__all__ = ["METRIC_COLUMNS", "ReportError", "ci_table", "load_summary",
           "plot_metric", "render_report", "table_max_eqv", "__version__"]
