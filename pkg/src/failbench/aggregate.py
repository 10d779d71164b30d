"""Aggregation and failure-handling policies over a ResultTable.

Undefined aggregates are first-class: a method that fails anywhere has no
unconditional aggregate, and callers get ``defined=False`` instead of a number.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .core import (
    EmptyMethodList,
    FailbenchError,
    Kind,
    ResultTable,
    RunOutcome,
    joint_success_set,
)

Stat = Callable[[Sequence[float]], float]


class NoDonor(FailbenchError, ValueError):
    """An imputation policy has no source value for some failing cell."""


class UndefinedInput(FailbenchError, ValueError):
    pass


class EmptyInput(FailbenchError, ValueError):
    pass


class NonPositiveEstimate(FailbenchError, ValueError):
    pass


class AllUndefined(FailbenchError, ValueError):
    pass


def mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs)


class Direction(str, enum.Enum):
    HIGHER_BETTER = "HigherBetter"
    LOWER_ABS_BETTER = "LowerAbsBetter"
    LOWER_BETTER = "LowerBetter"
    CLOSER_TO_TARGET = "CloserToTarget"


@dataclass(frozen=True)
class MeasureSpec:
    """Measure name plus the ordering used for ranking.

    ``LowerBetter`` ranks signed values (the signed alternative to
    ``LowerAbsBetter``).
    """

    name: str
    direction: Direction = Direction.HIGHER_BETTER
    target: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "direction", Direction(self.direction))
        if self.direction is Direction.CLOSER_TO_TARGET:
            if self.target is None or not math.isfinite(self.target):
                raise ValueError("CloserToTarget needs a finite target")

    def loss(self, value: float) -> float:
        """Smaller is better."""
        d = self.direction
        if d is Direction.HIGHER_BETTER:
            return -value
        if d is Direction.LOWER_ABS_BETTER:
            return abs(value)
        if d is Direction.LOWER_BETTER:
            return value
        return abs(value - self.target)


class Basis(str, enum.Enum):
    UNCONDITIONAL = "Unconditional"
    DISCARD_SINGLE = "DiscardSingle"
    DISCARD_ALL = "DiscardAll"
    IMPUTED = "Imputed"


@dataclass(frozen=True)
class AggregateValue:
    value: float | None
    n_used: int
    basis: Basis
    policy: str = ""

    @property
    def defined(self) -> bool:
        return self.value is not None

    @property
    def label(self) -> str:
        return f"Imputed({self.policy})" if self.basis is Basis.IMPUTED else self.basis.value


def _summarize(values: Sequence[float], stat: Stat, basis: Basis,
               policy: str = "") -> AggregateValue:
    if not values:
        return AggregateValue(None, 0, basis, policy)
    return AggregateValue(float(stat(values)), len(values), basis, policy)


def aggregate_unconditional(table: ResultTable, method: str,
                            stat: Stat = mean) -> AggregateValue:
    col = table.column(method)
    if table.is_imputed:
        return _summarize([c.value for c in col], stat, Basis.IMPUTED, table.provenance)
    if any(not c.ok for c in col):
        return AggregateValue(None, 0, Basis.UNCONDITIONAL)
    return _summarize([c.value for c in col], stat, Basis.UNCONDITIONAL)


def aggregate_discard_single(table: ResultTable, method: str,
                             stat: Stat = mean) -> AggregateValue:
    return _summarize(table.values(method), stat, Basis.DISCARD_SINGLE)


def aggregate_discard_all(table: ResultTable, methods: Iterable[str],
                          stat: Stat = mean) -> dict[str, AggregateValue]:
    methods = list(methods)
    if not methods:
        raise EmptyMethodList("at least one method is required")
    joint = joint_success_set(table, methods)
    return {m: _summarize(table.values(m, joint), stat, Basis.DISCARD_ALL) for m in methods}


# -- imputation ------------------------------------------------------------

class ImputationVariant(str, enum.Enum):
    WORST_VALUE = "WorstValue"
    MEAN_OF_METHOD = "MeanOfMethodRemaining"
    CROSS_METHOD_MEAN = "CrossMethodMean"
    THRESHOLD_RULE = "ThresholdRule"


@dataclass(frozen=True)
class ImputationPolicy:
    variant: ImputationVariant
    worst: float | None = None
    threshold: float | None = None

    def __post_init__(self) -> None:
        v = ImputationVariant(self.variant)
        object.__setattr__(self, "variant", v)
        if v in (ImputationVariant.WORST_VALUE, ImputationVariant.THRESHOLD_RULE):
            if self.worst is None or not math.isfinite(self.worst):
                raise ValueError(f"{v.value} needs a finite worst value")
        if v is ImputationVariant.THRESHOLD_RULE:
            if self.threshold is None or not 0.0 <= self.threshold <= 1.0:
                raise ValueError("threshold must lie in [0, 1]")

    @classmethod
    def worst_value(cls, worst: float) -> ImputationPolicy:
        return cls(ImputationVariant.WORST_VALUE, worst=worst)

    @classmethod
    def mean_of_method(cls) -> ImputationPolicy:
        return cls(ImputationVariant.MEAN_OF_METHOD)

    @classmethod
    def cross_method_mean(cls) -> ImputationPolicy:
        return cls(ImputationVariant.CROSS_METHOD_MEAN)

    @classmethod
    def threshold_rule(cls, threshold: float, worst: float) -> ImputationPolicy:
        return cls(ImputationVariant.THRESHOLD_RULE, worst=worst, threshold=threshold)

    @property
    def name(self) -> str:
        v = self.variant
        if v is ImputationVariant.WORST_VALUE:
            return f"WorstValue({self.worst!r})"
        if v is ImputationVariant.THRESHOLD_RULE:
            return f"ThresholdRule({self.threshold!r},{self.worst!r})"
        return v.value


def impute(table: ResultTable, policy: ImputationPolicy) -> ResultTable:
    """Return a failure-free copy of ``table`` with failing cells filled in.

    Successful cells are carried over untouched. The returned table's
    ``provenance`` names the policy, which downstream reports treat as a
    permanent label.
    """
    v = policy.variant
    cells = dict(table.cells)
    for m in table.methods:
        col = table.column(m)
        failures = [d for d, c in zip(table.datasets, col) if not c.ok]
        if not failures:
            continue
        own = [c.value for c in col if c.ok]
        for d in failures:
            if v is ImputationVariant.WORST_VALUE:
                fill = policy.worst
            elif v is ImputationVariant.CROSS_METHOD_MEAN:
                donors = [table.cells[o, d].value for o in table.methods
                          if o != m and table.cells[o, d].ok]
                if not donors:
                    raise NoDonor(f"no successful method on dataset {d} to impute ({m}, {d})")
                fill = mean(donors)
            elif v is ImputationVariant.THRESHOLD_RULE and \
                    len(failures) / len(table.datasets) > policy.threshold:
                fill = policy.worst
            else:
                if not own:
                    raise NoDonor(f"method {m} has no successes to impute from")
                fill = mean(own)
            old = table.cells[m, d]
            cells[m, d] = RunOutcome(value=float(fill), elapsed=old.elapsed,
                                     note=f"imputed: {old.failure}", imputed=True)
    meta = dict(table.metadata)
    meta["imputation_policy"] = policy.name
    return ResultTable(table.methods, table.datasets, cells, table.measure,
                       table.direction, meta, policy.name)


# -- failure proportions, rankings, performance measures --------------------

@dataclass(frozen=True)
class FailureProportion:
    overall: float
    by_kind: Mapping[str, float]
    n_failed: int
    n_total: int


def failure_proportion(table: ResultTable, method: str) -> FailureProportion:
    col = table.column(method)
    n = len(col)
    counts = Counter(c.failure.kind.value for c in col if not c.ok)
    failed = sum(counts.values())
    by_kind = {k.value: counts.get(k.value, 0) / n for k in Kind}
    return FailureProportion(failed / n, by_kind, failed, n)


def rank_methods(values: Mapping[str, AggregateValue | float],
                 measure: MeasureSpec) -> dict[str, int]:
    """Competition ranks (1, 1, 3, ...), rank 1 best under ``measure``."""
    raw: dict[str, float] = {}
    for m, v in values.items():
        if isinstance(v, AggregateValue):
            if not v.defined:
                raise UndefinedInput(f"aggregate for {m} is undefined")
            v = v.value
        if v is None or not math.isfinite(v):
            raise UndefinedInput(f"value for {m} is undefined")
        raw[m] = measure.loss(float(v))
    ranks = {}
    for m in sorted(raw):
        ranks[m] = 1 + sum(1 for o in raw.values() if o < raw[m])
    return ranks


def bias(estimates: Sequence[float], truth: float) -> float:
    if len(estimates) == 0:
        raise EmptyInput("no estimates")
    return mean(estimates) - truth


def log_bias(estimates: Sequence[float], truth: float) -> float:
    if len(estimates) == 0:
        raise EmptyInput("no estimates")
    if truth <= 0 or any(e <= 0 for e in estimates):
        raise NonPositiveEstimate("log bias needs strictly positive estimates and truth")
    return math.fsum(math.log(e) for e in estimates) / len(estimates) - math.log(truth)


class CoverageHandling(str, enum.Enum):
    DISCARD_UNDEFINED = "DiscardUndefined"
    COUNT_AS_NON_COVER = "CountAsNonCover"


@dataclass(frozen=True)
class Verdict:
    defined: bool
    covers: bool = False


def empirical_coverage(verdicts: Sequence[Verdict | tuple[bool, bool]],
                       handling: CoverageHandling | str) -> float:
    handling = CoverageHandling(handling)
    if len(verdicts) == 0:
        raise EmptyInput("no verdicts")
    vs = [v if isinstance(v, Verdict) else Verdict(*v) for v in verdicts]
    covers = sum(1 for v in vs if v.defined and v.covers)
    if handling is CoverageHandling.COUNT_AS_NON_COVER:
        return covers / len(vs)
    defined = sum(1 for v in vs if v.defined)
    if defined == 0:
        raise AllUndefined("every verdict is undefined")
    return covers / defined


# -- report serialization --------------------------------------------------

REPORT_COLUMNS = ("method", "basis", "measure", "value_or_UNDEFINED", "n_used",
                  "failure_proportion")


@dataclass(frozen=True)
class AggregateRow:
    method: str
    basis: str
    measure: str
    value: float | None
    n_used: int
    failure_proportion: float


def aggregate_report(table: ResultTable, stat: Stat = mean) -> list[AggregateRow]:
    """Every basis for every method: unconditional, discard-single, discard-all."""
    rows = []
    joint = aggregate_discard_all(table, table.methods, stat)
    for m in table.methods:
        fp = failure_proportion(table, m).overall
        for agg in (aggregate_unconditional(table, m, stat),
                    aggregate_discard_single(table, m, stat), joint[m]):
            rows.append(AggregateRow(m, agg.label, table.measure, agg.value, agg.n_used, fp))
    return rows


def rows_to_csv(rows: Iterable[AggregateRow], provenance: str | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = REPORT_COLUMNS + (("provenance",) if provenance else ())
    w.writerow(cols)
    for r in rows:
        line = [r.method, r.basis, r.measure,
                "UNDEFINED" if r.value is None else repr(r.value),
                r.n_used, repr(r.failure_proportion)]
        if provenance:
            line.append(provenance)
        w.writerow(line)
    return buf.getvalue()


def rows_from_csv(text: str) -> list[AggregateRow]:
    out = []
    for r in csv.DictReader(io.StringIO(text)):
        v = r["value_or_UNDEFINED"]
        out.append(AggregateRow(r["method"], r["basis"], r["measure"],
                                None if v == "UNDEFINED" else float(v),
                                int(r["n_used"]), float(r["failure_proportion"])))
    return out


def rows_to_json(rows: Iterable[AggregateRow], provenance: str | None = None) -> str:
    doc = {"provenance": provenance, "rows": [
        {"method": r.method, "basis": r.basis, "measure": r.measure,
         "value": r.value, "defined": r.value is not None, "n_used": r.n_used,
         "failure_proportion": r.failure_proportion} for r in rows]}
    return json.dumps(doc, indent=1)


def rows_from_json(text: str) -> list[AggregateRow]:
    doc = json.loads(text)
    return [AggregateRow(r["method"], r["basis"], r["measure"], r["value"], r["n_used"],
                         r["failure_proportion"]) for r in doc["rows"]]
