"""Fallback pipelines: use the first stage that produces an output."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

from .core import FailbenchError, Kind, RunOutcome


class PipelineError(FailbenchError, ValueError):
    pass


class SelfFallback(PipelineError):
    pass


class DuplicateStage(PipelineError):
    pass


Evaluator = Callable[[str, Any], RunOutcome]


@dataclass(frozen=True)
class Pipeline:
    stages: tuple[str, ...]

    def __post_init__(self) -> None:
        stages = tuple(self.stages)
        if not stages:
            raise PipelineError("a pipeline needs at least one stage")
        if len(set(stages)) != len(stages):
            raise DuplicateStage(f"duplicate stage in {'/'.join(stages)}")
        object.__setattr__(self, "stages", stages)

    @property
    def label(self) -> str:
        return "/".join(self.stages)

    @classmethod
    def parse(cls, label: str) -> Pipeline:
        return cls(tuple(label.split("/")))

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class PipelineOutcome:
    outcome: RunOutcome
    resolved_by: int | None
    attempts: tuple = field(default_factory=tuple)


def run_pipeline(pipeline: Pipeline, evaluator: Evaluator, dataset: Any) -> PipelineOutcome:
    """Evaluate stages in order and stop at the first success.

    Elapsed time is summed over every attempted stage. Exhaustion is returned as
    a PipelineExhausted failure listing each stage's failure. A single-stage
    pipeline is the method itself and returns its raw outcome, failure or not.
    """
    if len(pipeline.stages) == 1:
        out = evaluator(pipeline.stages[0], dataset)
        return PipelineOutcome(out, 0 if out.ok else None, () if out.ok else (out.failure,))
    attempts = []
    elapsed = 0.0
    for i, stage in enumerate(pipeline.stages):
        out = evaluator(stage, dataset)
        elapsed += out.elapsed
        if out.ok:
            if i == 0:
                return PipelineOutcome(out, 0, ())
            note = f"resolved by {stage} (stage {i + 1})"
            if out.note:
                note = f"{note}; {out.note}"
            return PipelineOutcome(RunOutcome(value=out.value, elapsed=elapsed, note=note),
                                   i, tuple(attempts))
        attempts.append(out.failure)
    detail = "; ".join(f"{s}: {f}" for s, f in zip(pipeline.stages, attempts))
    return PipelineOutcome(RunOutcome.fail(Kind.PIPELINE_EXHAUSTED, detail, elapsed),
                           None, tuple(attempts))


@dataclass(frozen=True)
class PipelineMethod:
    """Adapts a pipeline to the engine's ``method(dataset, seed)`` signature.

    The evaluator receives the dataset object; the seed is unused because the
    stages are deterministic given the dataset.
    """

    pipeline: Pipeline
    evaluator: Evaluator

    def __call__(self, dataset: Any, seed: int | None = None) -> RunOutcome:
        return run_pipeline(self.pipeline, self.evaluator, dataset).outcome


def expand_pipelines(base_methods: Sequence[str],
                     fallback_map: Mapping[str, Sequence[str]] | None = None,
                     max_fallbacks: int = 1, *, include_bare: bool = False) -> list[Pipeline]:
    """Enumerate every pipeline to evaluate, in declaration order.

    A base method without declared fallbacks is evaluated on its own. A base
    method with fallbacks yields one pipeline per fallback chain of length
    1..``max_fallbacks`` (chains follow the declared order, no repeats); its
    bare form is only included with ``include_bare=True``.
    """
    fallback_map = fallback_map or {}
    if max_fallbacks < 0:
        raise PipelineError("max_fallbacks must be >= 0")
    for base, fbs in fallback_map.items():
        if base in fbs:
            raise SelfFallback(f"{base} lists itself as a fallback")
        if len(set(fbs)) != len(fbs):
            raise DuplicateStage(f"duplicate fallback for {base}")
    out: list[Pipeline] = []
    for base in base_methods:
        fbs = list(fallback_map.get(base, ()))
        if not fbs or max_fallbacks == 0:
            out.append(Pipeline((base,)))
            continue
        if include_bare:
            out.append(Pipeline((base,)))
        for chain in _chains(fbs, max_fallbacks):
            out.append(Pipeline((base, *chain)))
    return out


def _chains(fallbacks: list[str], depth: int) -> list[tuple[str, ...]]:
    # ordered chains without repetition, shorter chains first
    result: list[tuple[str, ...]] = []
    frontier: list[tuple[str, ...]] = [()]
    for _ in range(depth):
        nxt = [c + (f,) for c in frontier for f in fallbacks if f not in c]
        result.extend(nxt)
        frontier = nxt
    return result
