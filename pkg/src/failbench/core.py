"""Outcome and result-table data model.

A cell of a comparison study is either a finite number or a typed failure.
``ResultTable`` is the complete method x dataset grid of such cells; holes are
not representable, an absent result must be recorded as a failure.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence


class FailbenchError(Exception):
    """Base class for harness errors."""


class TableError(FailbenchError, ValueError):
    pass


class MissingCell(TableError):
    pass


class DuplicateCell(TableError):
    pass


class NonFiniteValue(TableError):
    pass


class UnknownMethod(FailbenchError, KeyError):
    pass


class EmptyMethodList(FailbenchError, ValueError):
    pass


class Kind(str, enum.Enum):
    CALCULATION = "Calculation"
    MEMORY = "Memory"
    RUNTIME = "Runtime"
    PIPELINE_EXHAUSTED = "PipelineExhausted"


@dataclass(frozen=True, slots=True)
class FailureKind:
    kind: Kind
    detail: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.kind, Kind):
            object.__setattr__(self, "kind", Kind(self.kind))
        if not self.detail and self.kind is not Kind.RUNTIME:
            raise ValueError(f"{self.kind.value} failure requires a detail message")

    def __str__(self) -> str:
        return f"{self.kind.value}: {self.detail}" if self.detail else self.kind.value


@dataclass(frozen=True, slots=True)
class RunOutcome:
    """A single method-on-dataset result.

    Exactly one of ``value`` and ``failure`` is set. ``note`` carries free-text
    annotations such as convergence warnings or pipeline provenance; it does not
    change success/failure status.
    """

    value: float | None = None
    failure: FailureKind | None = None
    elapsed: float = 0.0
    note: str = ""
    imputed: bool = False

    def __post_init__(self) -> None:
        if (self.value is None) == (self.failure is None):
            raise ValueError("exactly one of value/failure must be set")
        if self.value is not None and not math.isfinite(self.value):
            raise NonFiniteValue(f"non-finite value {self.value!r}; use RunOutcome.from_value")
        if self.elapsed < 0:
            raise ValueError("elapsed must be >= 0")

    @classmethod
    def from_value(cls, value: float, elapsed: float = 0.0, note: str = "") -> RunOutcome:
        """Wrap a raw numeric result, turning NaN/inf into a Calculation failure."""
        value = float(value)
        if not math.isfinite(value):
            return cls(failure=FailureKind(Kind.CALCULATION, f"non-finite result {value!r}"),
                       elapsed=elapsed, note=note)
        return cls(value=value, elapsed=elapsed, note=note)

    @classmethod
    def fail(cls, kind: Kind | str, detail: str = "", elapsed: float = 0.0,
             note: str = "") -> RunOutcome:
        return cls(failure=FailureKind(Kind(kind), detail), elapsed=elapsed, note=note)

    @property
    def ok(self) -> bool:
        return self.failure is None

    def with_elapsed(self, elapsed: float) -> RunOutcome:
        if elapsed < 0:
            raise ValueError("elapsed must be >= 0")
        # already validated; skip __post_init__ on this hot path
        out = object.__new__(RunOutcome)
        setattr_ = object.__setattr__
        setattr_(out, "value", self.value)
        setattr_(out, "failure", self.failure)
        setattr_(out, "elapsed", elapsed)
        setattr_(out, "note", self.note)
        setattr_(out, "imputed", self.imputed)
        return out


def _check_ids(ids: Sequence[str], what: str) -> tuple[str, ...]:
    ids = tuple(str(i) for i in ids)
    if any(not i for i in ids):
        raise TableError(f"empty {what} identifier")
    if len(set(ids)) != len(ids):
        raise TableError(f"duplicate {what} identifiers")
    return ids


@dataclass(frozen=True)
class ResultTable:
    methods: tuple[str, ...]
    datasets: tuple[str, ...]
    cells: Mapping[tuple[str, str], RunOutcome]
    measure: str = "value"
    direction: str = "HigherBetter"
    metadata: Mapping[str, Any] = field(default_factory=dict)
    provenance: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "methods", _check_ids(self.methods, "method"))
        object.__setattr__(self, "datasets", _check_ids(self.datasets, "dataset"))
        for m in self.methods:
            for d in self.datasets:
                if (m, d) not in self.cells:
                    raise MissingCell(f"no entry for ({m}, {d})")
        if len(self.cells) != len(self.methods) * len(self.datasets):
            raise TableError("cells contain pairs outside the method x dataset grid")
        object.__setattr__(self, "_method_set", frozenset(self.methods))

    def __getitem__(self, key: tuple[str, str]) -> RunOutcome:
        return self.cells[key]

    def column(self, method: str) -> list[RunOutcome]:
        self._require(method)
        return [self.cells[method, d] for d in self.datasets]

    def values(self, method: str, datasets: Iterable[str] | None = None) -> list[float]:
        """Successful values of ``method``, in table dataset order."""
        self._require(method)
        keep = None if datasets is None else set(datasets)
        out = []
        for d in self.datasets:
            if keep is not None and d not in keep:
                continue
            cell = self.cells[method, d]
            if cell.value is not None:
                out.append(cell.value)
        return out

    def _require(self, method: str) -> None:
        if method not in self._method_set:
            raise UnknownMethod(method)

    @property
    def is_imputed(self) -> bool:
        return self.provenance is not None


def build_table(methods: Sequence[str], datasets: Sequence[str],
                cell_entries: Iterable[tuple[str, str, RunOutcome | float | None]],
                *, measure: str = "value", direction: str = "HigherBetter",
                metadata: Mapping[str, Any] | None = None) -> ResultTable:
    """Materialize a validated table from ``(method, dataset, outcome)`` entries.

    Bare floats are accepted as successes. Non-finite floats are converted to
    Calculation failures; a non-finite value inside a RunOutcome is rejected.
    """
    methods = _check_ids(methods, "method")
    datasets = _check_ids(datasets, "dataset")
    mset, dset = set(methods), set(datasets)
    cells: dict[tuple[str, str], RunOutcome] = {}
    for m, d, entry in cell_entries:
        m, d = str(m), str(d)
        if m not in mset:
            raise UnknownMethod(m)
        if d not in dset:
            raise TableError(f"unknown dataset {d!r}")
        if (m, d) in cells:
            raise DuplicateCell(f"duplicate entry for ({m}, {d})")
        if isinstance(entry, RunOutcome):
            cells[m, d] = entry
        elif entry is None:
            raise MissingCell(f"entry for ({m}, {d}) is None; record a failure instead")
        else:
            cells[m, d] = RunOutcome.from_value(entry)
    return ResultTable(methods, datasets, cells, measure, direction, dict(metadata or {}))


def success_set(table: ResultTable, method: str) -> set[str]:
    return {d for d, c in zip(table.datasets, table.column(method)) if c.ok}


def failure_set(table: ResultTable, method: str) -> set[str]:
    return {d for d, c in zip(table.datasets, table.column(method)) if not c.ok}


def joint_success_set(table: ResultTable, methods: Iterable[str]) -> set[str]:
    methods = list(methods)
    if not methods:
        raise EmptyMethodList("at least one method is required")
    out = success_set(table, methods[0])
    for m in methods[1:]:
        out &= success_set(table, m)
    return out


# -- serialization ---------------------------------------------------------

def _cell_record(m: str, d: str, c: RunOutcome) -> dict[str, Any]:
    rec: dict[str, Any] = {"method": m, "dataset": d}
    if c.ok:
        rec["value"] = c.value
    else:
        rec["failure"] = {"kind": c.failure.kind.value, "detail": c.failure.detail}
    rec["elapsed_ms"] = c.elapsed * 1000.0
    if c.note:
        rec["note"] = c.note
    if c.imputed:
        rec["imputed"] = True
    return rec


def _cell_from_record(rec: Mapping[str, Any]) -> RunOutcome:
    elapsed = float(rec.get("elapsed_ms", 0.0)) / 1000.0
    note = rec.get("note", "")
    imputed = bool(rec.get("imputed", False))
    if "failure" in rec:
        f = rec["failure"]
        return RunOutcome(failure=FailureKind(Kind(f["kind"]), f.get("detail", "")),
                          elapsed=elapsed, note=note, imputed=imputed)
    return RunOutcome(value=float(rec["value"]), elapsed=elapsed, note=note, imputed=imputed)


def table_to_dict(table: ResultTable, *, timing: bool = True) -> dict[str, Any]:
    cells = []
    for m in table.methods:
        for d in table.datasets:
            rec = _cell_record(m, d, table.cells[m, d])
            if not timing:
                rec.pop("elapsed_ms")
            cells.append(rec)
    doc: dict[str, Any] = {
        "methods": list(table.methods),
        "datasets": list(table.datasets),
        "measure": {"name": table.measure, "direction": table.direction},
        "metadata": dict(table.metadata),
        "cells": cells,
    }
    if table.provenance is not None:
        doc["provenance"] = table.provenance
    return doc


def table_to_json(table: ResultTable, *, timing: bool = True) -> str:
    """Serialize to JSON. Python's float repr is the shortest round-trip form.

    ``timing=False`` drops wall-clock fields, giving a byte-stable document
    for determinism comparisons.
    """
    return json.dumps(table_to_dict(table, timing=timing), sort_keys=False)


def table_from_dict(doc: Mapping[str, Any]) -> ResultTable:
    measure = doc.get("measure", {})
    cells = {}
    for rec in doc["cells"]:
        key = (str(rec["method"]), str(rec["dataset"]))
        if key in cells:
            raise DuplicateCell(f"duplicate entry for {key}")
        cells[key] = _cell_from_record(rec)
    return ResultTable(tuple(doc["methods"]), tuple(doc["datasets"]), cells,
                       measure.get("name", "value"), measure.get("direction", "HigherBetter"),
                       dict(doc.get("metadata", {})), doc.get("provenance"))


def table_from_json(text: str) -> ResultTable:
    return table_from_dict(json.loads(text))


CSV_COLUMNS = ("method", "dataset", "value", "kind", "detail", "elapsed_ms", "note",
               "imputed", "provenance")


def table_to_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    prov = table.provenance or ""
    for m in table.methods:
        for d in table.datasets:
            c = table.cells[m, d]
            w.writerow([m, d, repr(c.value) if c.ok else "",
                        "" if c.ok else c.failure.kind.value,
                        "" if c.ok else c.failure.detail,
                        repr(c.elapsed * 1000.0), c.note, int(c.imputed), prov])
    return buf.getvalue()


def table_from_csv(text: str, *, measure: str = "value",
                   direction: str = "HigherBetter") -> ResultTable:
    rows = list(csv.DictReader(io.StringIO(text)))
    methods: list[str] = []
    datasets: list[str] = []
    cells = {}
    provenance = None
    for r in rows:
        m, d = r["method"], r["dataset"]
        if m not in methods:
            methods.append(m)
        if d not in datasets:
            datasets.append(d)
        if (m, d) in cells:
            raise DuplicateCell(f"duplicate entry for ({m}, {d})")
        elapsed = float(r["elapsed_ms"]) / 1000.0
        imputed = r.get("imputed", "0") == "1"
        if r["kind"]:
            cells[m, d] = RunOutcome(failure=FailureKind(Kind(r["kind"]), r["detail"]),
                                     elapsed=elapsed, note=r["note"], imputed=imputed)
        else:
            cells[m, d] = RunOutcome(value=float(r["value"]), elapsed=elapsed,
                                     note=r["note"], imputed=imputed)
        provenance = r.get("provenance") or provenance
    return ResultTable(tuple(methods), tuple(datasets), cells, measure, direction, {}, provenance)
