"""Figure rendering for smarlab analysis CSVs.

The plotting layer re-computes nothing: every plotted series maps onto
columns of `mrd_curves.csv` or `expert_pref.csv` by name.
"""

from smarplots.figures import (
    CURVE_COLUMNS,
    PREF_COLUMNS,
    FigureSummary,
    PlotSpec,
    SchemaError,
    describe,
    render,
)

__all__ = [
    "CURVE_COLUMNS",
    "PREF_COLUMNS",
    "FigureSummary",
    "PlotSpec",
    "SchemaError",
    "describe",
    "render",
]
