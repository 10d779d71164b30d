"""Deterministic execution of method x dataset grids.

Every cell gets its own seed derived from ``(master_seed, method index,
dataset index)`` with :func:`cell_seed`, so a cell's result never depends on
scheduling. Errors raised by a method are stored as failure cells; nothing
propagates out of :func:`run_grid` for method-level problems.
"""

from __future__ import annotations

import contextvars
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .core import FailbenchError, Kind, ResultTable, RunOutcome, _cell_record

MASK64 = (1 << 64) - 1
EXCLUDED_BY_DESIGN = "excluded by design"

Method = Callable[[Any, int], "RunOutcome | float"]


class ConfigError(FailbenchError, ValueError):
    pass


class EmptyDatasets(FailbenchError, ValueError):
    pass


class BudgetExceeded(Exception):
    """Raised by :func:`checkpoint` when the running cell is over budget."""


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def cell_seed(master_seed: int, method_index: int, dataset_index: int) -> int:
    """Stable 64-bit seed for one cell.

    splitmix64 chained over the three inputs:
    ``s = mix(mix(mix(master) ^ method) ^ dataset)``.
    """
    return _splitmix64(_method_prefix(master_seed, method_index) ^ (dataset_index & MASK64))


def _method_prefix(master_seed: int, method_index: int) -> int:
    return _splitmix64(_splitmix64(master_seed & MASK64) ^ (method_index & MASK64))


@dataclass(frozen=True)
class RuntimeSubset:
    fraction: float
    selection_seed: int

    def __post_init__(self) -> None:
        if not 0.0 < self.fraction <= 1.0:
            raise ConfigError("runtime subset fraction must lie in (0, 1]")


@dataclass(frozen=True)
class RunConfig:
    """Grid execution settings.

    ``backend`` picks the worker pool when ``workers > 1``: threads work with
    any callable, processes need picklable methods and datasets.
    """

    master_seed: int = 0
    budget: float | None = None
    workers: int = 1
    runtime_subset: Mapping[str, RuntimeSubset] = field(default_factory=dict)
    backend: str = "thread"
    chunk_size: int = 2048

    def __post_init__(self) -> None:
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError("workers must be a positive integer")
        if self.budget is not None and not self.budget > 0:
            raise ConfigError("budget must be positive")
        if self.backend not in ("thread", "process"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if not 0 <= self.master_seed <= MASK64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if self.chunk_size < 1:
            raise ConfigError("chunk_size must be >= 1")


# -- cooperative budgets ----------------------------------------------------

_deadline: contextvars.ContextVar[float | None] = contextvars.ContextVar(
    "failbench_deadline", default=None)


def checkpoint() -> None:
    """Abort the current cell if its budget is used up.

    Bundled long-running methods call this inside their loops; it is a no-op
    outside :func:`execute_cell` or when no budget is set.
    """
    deadline = _deadline.get()
    if deadline is not None and time.perf_counter() > deadline:
        raise BudgetExceeded


def execute_cell(method_fn: Method, dataset: Any, seed: int,
                 budget: float | None = None) -> RunOutcome:
    """Run one method on one dataset and never raise.

    Exceptions become Calculation failures (MemoryError becomes Memory),
    budget overruns become Runtime failures.
    """
    start = time.perf_counter()
    token = None if budget is None else _deadline.set(start + budget)
    try:
        raw = method_fn(dataset, seed)
    except BudgetExceeded:
        elapsed = time.perf_counter() - start
        return RunOutcome.fail(Kind.RUNTIME, "budget exceeded at checkpoint", elapsed)
    except MemoryError as exc:
        elapsed = time.perf_counter() - start
        return RunOutcome.fail(Kind.MEMORY, str(exc) or "MemoryError", elapsed)
    except Exception as exc:  # noqa: BLE001 - every method error is data
        elapsed = time.perf_counter() - start
        return RunOutcome.fail(Kind.CALCULATION, f"{type(exc).__name__}: {exc}", elapsed)
    finally:
        if token is not None:
            _deadline.reset(token)
    elapsed = time.perf_counter() - start
    if budget is not None and elapsed > budget:
        return RunOutcome.fail(Kind.RUNTIME, "budget exceeded at completion", elapsed)
    if isinstance(raw, RunOutcome):
        return raw.with_elapsed(elapsed)
    try:
        return RunOutcome.from_value(raw, elapsed)
    except (TypeError, ValueError) as exc:
        return RunOutcome.fail(Kind.CALCULATION, f"non-numeric result: {exc}", elapsed)


def select_runtime_subset(datasets: Sequence[str], fraction: float,
                          selection_seed: int) -> set[str]:
    """Uniform random subset of ``ceil(fraction * n)`` datasets.

    Depends only on the dataset list, the fraction and the seed, never on
    observed runtimes.
    """
    if not 0.0 < fraction <= 1.0:
        raise ConfigError("fraction must lie in (0, 1]")
    datasets = list(datasets)
    if not datasets:
        raise EmptyDatasets("no datasets to select from")
    k = math.ceil(fraction * len(datasets) - 1e-12)
    rng = np.random.default_rng(selection_seed)
    idx = rng.choice(len(datasets), size=k, replace=False)
    return {datasets[i] for i in idx}


def _normalize_datasets(datasets: Mapping[str, Any] | Sequence[Any]) -> tuple[list[str], list[Any]]:
    if isinstance(datasets, Mapping):
        ids = [str(k) for k in datasets]
        return ids, list(datasets.values())
    data = list(datasets)
    return [str(i + 1) for i in range(len(data))], data


def _run_chunk(methods: Sequence[tuple[int, str, Method]],
               items: Sequence[tuple[int, Any]], master_seed: int,
               budget: float | None, skip: Mapping[str, frozenset[int]]) -> list[list[RunOutcome]]:
    out = []
    for mi, name, fn in methods:
        excluded = skip.get(name, frozenset())
        prefix = _method_prefix(master_seed, mi)
        col = []
        for di, data in items:
            if di in excluded:
                col.append(RunOutcome.fail(Kind.RUNTIME, EXCLUDED_BY_DESIGN))
            else:
                col.append(execute_cell(fn, data, _splitmix64(prefix ^ di), budget))
        out.append(col)
    return out


def run_grid(methods: Mapping[str, Method], datasets: Mapping[str, Any] | Sequence[Any],
             config: RunConfig | None = None, *, measure: str = "value",
             direction: str = "HigherBetter", log_path: str | Path | None = None,
             metadata: Mapping[str, Any] | None = None) -> ResultTable:
    """Evaluate every method on every dataset.

    ``datasets`` is either an id -> data mapping or a sequence (ids become
    "1", "2", ...). Cell ``(m, d)`` depends only on the method, the dataset, its
    derived seed and the budget, so the worker count never changes the table.
    """
    config = config or RunConfig()
    if not methods:
        raise ConfigError("no methods given")
    ids, data = _normalize_datasets(datasets)
    if not ids:
        raise ConfigError("no datasets given")
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate dataset identifiers")
    names = [str(m) for m in methods]
    unknown = set(config.runtime_subset) - set(names)
    if unknown:
        raise ConfigError(f"runtime subset for unknown methods: {sorted(unknown)}")

    index = {d: i for i, d in enumerate(ids)}
    manifest = {}
    skip: dict[str, frozenset[int]] = {}
    for m, sub in config.runtime_subset.items():
        chosen = select_runtime_subset(ids, sub.fraction, sub.selection_seed)
        manifest[m] = {"fraction": sub.fraction, "selection_seed": sub.selection_seed,
                       "executed": [d for d in ids if d in chosen]}
        skip[m] = frozenset(index[d] for d in ids if d not in chosen)

    method_list = [(i, n, fn) for i, (n, fn) in enumerate(zip(names, methods.values()))]
    items = list(enumerate(data))
    chunks = [items[i:i + config.chunk_size] for i in range(0, len(items), config.chunk_size)]
    args = (config.master_seed, config.budget, skip)

    if config.workers == 1 or len(chunks) == 1:
        results = [_run_chunk(method_list, ch, *args) for ch in chunks]
    else:
        pool_cls = ProcessPoolExecutor if config.backend == "process" else ThreadPoolExecutor
        with pool_cls(max_workers=config.workers) as pool:
            futures = [pool.submit(_run_chunk, method_list, ch, *args) for ch in chunks]
            results = [f.result() for f in futures]

    cells: dict[tuple[str, str], RunOutcome] = {}
    for ch, res in zip(chunks, results):
        for (mi, name, _), col in zip(method_list, res):
            for (di, _), outcome in zip(ch, col):
                cells[name, ids[di]] = outcome

    meta = dict(metadata or {})
    meta["master_seed"] = config.master_seed
    if config.budget is not None:
        meta["budget_ms"] = config.budget * 1000.0
    if manifest:
        meta["runtime_subset"] = manifest
    table = ResultTable(tuple(names), tuple(ids), cells, measure, direction, meta)
    if log_path is not None:
        write_cell_log(table, log_path)
    return table


def write_cell_log(table: ResultTable, path: str | Path) -> None:
    """Newline-delimited JSON, one record per cell in (method, dataset) order."""
    with open(path, "w", encoding="utf-8") as fh:
        for m in table.methods:
            for d in table.datasets:
                fh.write(json.dumps(_cell_record(m, d, table.cells[m, d])))
                fh.write("\n")
