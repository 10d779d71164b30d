"""Three-fold report, failure summaries and rank divergence."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import statistics
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from . import __version__
from .aggregate import (
    AggregateValue,
    Basis,
    FailureProportion,
    Stat,
    aggregate_discard_all,
    aggregate_discard_single,
    failure_proportion,
    mean,
)
from .core import FailbenchError, Kind, ResultTable, failure_set

CAVEAT = ("Aggregating performance despite method failure does not assess the "
          "unconditional performance of the methods.")
EMPTY_JOINT_NOTE = ("No dataset is free of failures across all methods; "
                    "discard-all aggregates are undefined.")


class ProvenanceError(FailbenchError, ValueError):
    """An imputed table was passed where a raw table is required."""


class DanglingAnnotation(FailbenchError, ValueError):
    pass


class MethodMismatch(FailbenchError, ValueError):
    pass


def config_digest(config: Mapping[str, Any]) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def stamp(master_seed: int | None, config: Mapping[str, Any] | None = None) -> dict[str, Any]:
    """Reproducibility stamp embedded in every emitted report."""
    return {"master_seed": master_seed, "config_digest": config_digest(config or {}),
            "harness_version": __version__}


# -- three-fold report -----------------------------------------------------

@dataclass
class ThreefoldReport:
    methods: list[str]
    measure: str
    discard_single: dict[str, AggregateValue]
    discard_all: dict[str, AggregateValue]
    failure_proportions: dict[str, FailureProportion]
    notes: list[str] = field(default_factory=list)
    footer: str = CAVEAT
    stamp: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        def agg(a: AggregateValue) -> dict[str, Any]:
            return {"value": a.value, "defined": a.defined, "n_used": a.n_used}

        return {
            "measure": self.measure,
            "methods": self.methods,
            "discard_single": {m: agg(self.discard_single[m]) for m in self.methods},
            "discard_all": {m: agg(self.discard_all[m]) for m in self.methods},
            "failure_proportions": {
                m: {"overall": fp.overall, "by_kind": dict(fp.by_kind),
                    "n_failed": fp.n_failed, "n_total": fp.n_total}
                for m, fp in self.failure_proportions.items()},
            "notes": self.notes,
            "footer": self.footer,
            "stamp": self.stamp,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> ThreefoldReport:
        def agg(d: Mapping[str, Any], basis: Basis) -> AggregateValue:
            return AggregateValue(d["value"], d["n_used"], basis)

        return cls(
            methods=list(doc["methods"]),
            measure=doc["measure"],
            discard_single={m: agg(v, Basis.DISCARD_SINGLE) for m, v in doc["discard_single"].items()},
            discard_all={m: agg(v, Basis.DISCARD_ALL) for m, v in doc["discard_all"].items()},
            failure_proportions={
                m: FailureProportion(v["overall"], dict(v["by_kind"]), v["n_failed"], v["n_total"])
                for m, v in doc["failure_proportions"].items()},
            notes=list(doc.get("notes", [])),
            footer=doc.get("footer", CAVEAT),
            stamp=dict(doc.get("stamp", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> ThreefoldReport:
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        """Rows per method and basis; failure kinds as ``FailureProportion:<kind>`` rows."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("method", "basis", "measure", "value_or_UNDEFINED", "n_used",
                    "failure_proportion"))
        for m in self.methods:
            fp = self.failure_proportions[m]
            for a in (self.discard_single[m], self.discard_all[m]):
                w.writerow((m, a.basis.value, self.measure,
                            "UNDEFINED" if a.value is None else repr(a.value),
                            a.n_used, repr(fp.overall)))
            for kind, frac in fp.by_kind.items():
                w.writerow((m, f"FailureProportion:{kind}", self.measure, repr(frac),
                            fp.n_total, repr(fp.overall)))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, *, footer: str = CAVEAT,
                 stamp: Mapping[str, Any] | None = None,
                 notes: Sequence[str] = ()) -> ThreefoldReport:
        methods: list[str] = []
        single, joint, kinds, overall, totals = {}, {}, {}, {}, {}
        measure = ""
        for r in csv.DictReader(io.StringIO(text)):
            m = r["method"]
            measure = r["measure"]
            if m not in methods:
                methods.append(m)
            v = r["value_or_UNDEFINED"]
            value = None if v == "UNDEFINED" else float(v)
            overall[m] = float(r["failure_proportion"])
            basis = r["basis"]
            if basis == Basis.DISCARD_SINGLE.value:
                single[m] = AggregateValue(value, int(r["n_used"]), Basis.DISCARD_SINGLE)
            elif basis == Basis.DISCARD_ALL.value:
                joint[m] = AggregateValue(value, int(r["n_used"]), Basis.DISCARD_ALL)
            else:
                kinds.setdefault(m, {})[basis.split(":", 1)[1]] = value
                totals[m] = int(r["n_used"])
        fps = {m: FailureProportion(overall[m], kinds[m],
                                    round(overall[m] * totals[m]), totals[m]) for m in methods}
        return cls(methods, measure, single, joint, fps, list(notes), footer, dict(stamp or {}))


def emit_threefold(table: ResultTable, stat: Stat = mean, *, master_seed: int | None = None,
                   config: Mapping[str, Any] | None = None) -> ThreefoldReport:
    """Discard-single, discard-all and failure proportions for every method."""
    if table.is_imputed:
        raise ProvenanceError(f"table was imputed with {table.provenance}; "
                              "the three-fold report takes raw tables only")
    methods = list(table.methods)
    single = {m: aggregate_discard_single(table, m, stat) for m in methods}
    joint = aggregate_discard_all(table, methods, stat)
    notes = []
    if methods and joint[methods[0]].n_used == 0:
        notes.append(EMPTY_JOINT_NOTE)
    seed = master_seed if master_seed is not None else table.metadata.get("master_seed")
    return ThreefoldReport(methods, table.measure, single, joint,
                           {m: failure_proportion(table, m) for m in methods}, notes,
                           CAVEAT, stamp(seed, config))


# -- failure summary -------------------------------------------------------

@dataclass(frozen=True)
class FailureAnnotation:
    method: str
    datasets: tuple[str, ...]
    narrative: str = ""
    auto_facts: tuple[str, ...] = ()


@dataclass
class MethodFailureSummary:
    method: str
    counts: dict[str, int]
    failed_datasets: list[str]
    elapsed: dict[str, float]
    details: dict[str, str]
    narratives: list[str]


@dataclass
class FailureSummary:
    methods: dict[str, MethodFailureSummary]
    challenging: list[str]
    threshold: float
    stamp: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "methods": {m: vars(s) for m, s in self.methods.items()},
            "challenging_datasets": self.challenging,
            "challenging_threshold": self.threshold,
            "stamp": self.stamp,
        }


def _elapsed_stats(xs: Sequence[float]) -> dict[str, float]:
    if not xs:
        return {}
    return {"min": min(xs), "median": statistics.median(xs), "max": max(xs),
            "mean": mean(xs), "total": sum(xs)}


def emit_failure_summary(table: ResultTable, annotations: Iterable[FailureAnnotation] = (),
                         *, challenging_threshold: float = 0.5,
                         master_seed: int | None = None,
                         config: Mapping[str, Any] | None = None) -> FailureSummary:
    """Per-method failure counts by kind, affected datasets, timings, narratives.

    A dataset is "challenging" when at least ``challenging_threshold`` of the
    methods fail on it.
    """
    annotations = list(annotations)
    failures = {m: failure_set(table, m) for m in table.methods}
    for a in annotations:
        if a.method not in failures:
            raise DanglingAnnotation(f"annotation for unknown method {a.method!r}")
        extra = set(a.datasets) - failures[a.method]
        if extra:
            raise DanglingAnnotation(
                f"annotation for {a.method} names datasets without failures: {sorted(extra)}")
    out = {}
    for m in table.methods:
        col = table.column(m)
        failed = [d for d, c in zip(table.datasets, col) if not c.ok]
        counts = Counter(c.failure.kind.value for c in col if not c.ok)
        out[m] = MethodFailureSummary(
            method=m,
            counts={k.value: counts.get(k.value, 0) for k in Kind},
            failed_datasets=failed,
            elapsed=_elapsed_stats([c.elapsed for c in col]),
            details={d: table.cells[m, d].failure.detail for d in failed},
            narratives=[a.narrative for a in annotations if a.method == m and a.narrative]
            + [f for a in annotations if a.method == m for f in a.auto_facts],
        )
    n_methods = len(table.methods)
    challenging = [d for d in table.datasets
                   if sum(1 for m in table.methods if d in failures[m]) >= challenging_threshold * n_methods
                   and any(d in failures[m] for m in table.methods)]
    seed = master_seed if master_seed is not None else table.metadata.get("master_seed")
    return FailureSummary(out, challenging, challenging_threshold, stamp(seed, config))


# -- rank divergence -------------------------------------------------------

@dataclass
class RankDivergence:
    label_a: str
    label_b: str
    rows: list[dict[str, Any]]
    max_shift: int
    max_shift_methods: list[str]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ("method", f"rank_{self.label_a}", f"rank_{self.label_b}", "shift",
                "abs_shift", "best_flip", "worst_flip", "max_shift")
        w.writerow(cols)
        for r in self.rows:
            w.writerow((r["method"], r["rank_a"], r["rank_b"], r["shift"], r["abs_shift"],
                        int(r["best_flip"]), int(r["worst_flip"]), int(r["is_max_shift"])))
        return buf.getvalue()


def emit_rank_divergence(ranks_a: Mapping[str, int], ranks_b: Mapping[str, int],
                         label_a: str = "a", label_b: str = "b") -> RankDivergence:
    if set(ranks_a) != set(ranks_b):
        raise MethodMismatch(f"rankings cover different methods: "
                             f"{sorted(set(ranks_a) ^ set(ranks_b))}")
    if not ranks_a:
        return RankDivergence(label_a, label_b, [], 0, [])
    worst_a, worst_b = max(ranks_a.values()), max(ranks_b.values())
    rows = []
    for m in sorted(ranks_a):
        ra, rb = ranks_a[m], ranks_b[m]
        rows.append({"method": m, "rank_a": ra, "rank_b": rb, "shift": rb - ra,
                     "abs_shift": abs(rb - ra),
                     "best_flip": (ra == 1) != (rb == 1),
                     "worst_flip": (ra == worst_a) != (rb == worst_b)})
    max_shift = max(r["abs_shift"] for r in rows)
    for r in rows:
        r["is_max_shift"] = max_shift > 0 and r["abs_shift"] == max_shift
    return RankDivergence(label_a, label_b, rows, max_shift,
                          [r["method"] for r in rows if r["is_max_shift"]])
