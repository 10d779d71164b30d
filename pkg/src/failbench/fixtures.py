"""The two fictive result tables with "NA" cells used throughout the docs and tests.

(a) is a simulation study with four repetitions and true value 4; (b) is a
benchmark study of accuracies on four data sets.
"""

from __future__ import annotations

from .core import Kind, ResultTable, RunOutcome, build_table

METHODS = ("Method 1", "Method 2", "Method 3")
DATASETS = ("1", "2", "3", "4")
TABLE1A_TRUTH = 4.0

_NA = RunOutcome.fail(Kind.CALCULATION, "NA")

_A = {
    "Method 1": (3.89, 3.78, None, 3.75),
    "Method 2": (4.23, 4.13, 3.69, 4.24),
    "Method 3": (4.08, 4.11, 4.23, None),
}
_B = {
    "Method 1": (0.85, 0.9, None, 0.78),
    "Method 2": (0.88, 0.91, 0.80, 0.76),
    "Method 3": (0.87, 0.86, 0.82, None),
}


def _table(values, measure: str, direction: str) -> ResultTable:
    cells = [(m, d, _NA if v is None else v)
             for m, col in values.items() for d, v in zip(DATASETS, col)]
    return build_table(METHODS, DATASETS, cells, measure=measure, direction=direction)


def table1a() -> ResultTable:
    """Estimates per repetition; the true value is :data:`TABLE1A_TRUTH`."""
    return _table(_A, "estimate", "CloserToTarget")


def table1b() -> ResultTable:
    """Accuracy per benchmark data set."""
    return _table(_B, "accuracy", "HigherBetter")
