"""Odds-ratio simulation study with sampling zeros.

Each scenario simulates ``n_rep`` exposure/outcome data sets of ``n_obs``
subjects, runs every base estimator and every fallback pipeline through the
engine, and compares log-scale bias under discard-single, discard-all and
pipeline handling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..aggregate import (
    AggregateValue,
    Direction,
    MeasureSpec,
    aggregate_discard_all,
    aggregate_discard_single,
    aggregate_unconditional,
    failure_proportion,
    log_bias,
    rank_methods,
)
from ..core import ResultTable
from ..engine import ConfigError, RunConfig, run_grid
from ..pipeline import Pipeline, PipelineMethod, expand_pipelines
from .estimators import (
    BASE_ESTIMATORS,
    ContingencyTable2x2,
    OrEstimator,
    OrMethod,
    has_sampling_zero,
    or_evaluator,
)

DEFAULT_P0 = 0.5
DEFAULT_REPS = 100_000
QUICK_REPS = 10_000

# fallbacks per base estimator, in declaration order
DEFAULT_FALLBACKS: dict[str, list[str]] = {
    "Manual": ["Haldane"],
    "Fisher": ["Haldane", "Small", "Woolf"],
    "Midp": ["Haldane", "Small", "Woolf"],
}


@dataclass(frozen=True)
class OrScenario:
    n_obs: int
    true_or: float
    p_x: float
    p0: float = DEFAULT_P0
    n_rep: int = DEFAULT_REPS

    def __post_init__(self) -> None:
        if self.n_obs < 1 or self.n_rep < 1:
            raise ConfigError("n_obs and n_rep must be positive")
        if not (self.true_or > 0 and math.isfinite(self.true_or)):
            raise ConfigError("true_or must be finite and > 0")
        if not 0.0 <= self.p_x <= 1.0 or not 0.0 < self.p0 < 1.0:
            raise ConfigError("p_x must lie in [0, 1] and p0 in (0, 1)")

    @property
    def p1(self) -> float:
        """P(Y=1 | X=1) implied by ``true_or`` and the baseline ``p0``."""
        w = self.true_or * self.p0 / (1.0 - self.p0)
        return w / (1.0 + w)

    @property
    def label(self) -> str:
        return f"OR={self.true_or:g},px={self.p_x:g}"


def default_scenarios(p0: float = DEFAULT_P0, n_rep: int = DEFAULT_REPS) -> list[OrScenario]:
    """The eight scenarios: OR in {2,3,4,5} x p_x in {0.25, 0.5}, n_obs = 50."""
    return [OrScenario(50, float(o), px, p0, n_rep) for px in (0.25, 0.5) for o in (2, 3, 4, 5)]


def simulate_2x2(scenario: OrScenario, rng: np.random.Generator) -> ContingencyTable2x2:
    return simulate_tables(scenario, 1, rng)[0]


def simulate_tables(scenario: OrScenario, n: int, rng: np.random.Generator,
                    block: int = 10_000) -> list[ContingencyTable2x2]:
    """Draw ``n`` tables subject by subject: X ~ Bern(p_x), Y | X ~ Bern(p_X)."""
    out: list[ContingencyTable2x2] = []
    p0, p1 = scenario.p0, scenario.p1
    for start in range(0, n, block):
        b = min(block, n - start)
        x = rng.random((b, scenario.n_obs)) < scenario.p_x
        y = rng.random((b, scenario.n_obs)) < np.where(x, p1, p0)
        n11 = np.count_nonzero(x & y, axis=1)
        n10 = np.count_nonzero(x & ~y, axis=1)
        n01 = np.count_nonzero(~x & y, axis=1)
        n00 = scenario.n_obs - n11 - n10 - n01
        out.extend(ContingencyTable2x2(int(a), int(b_), int(c), int(d))
                   for a, b_, c, d in zip(n11.tolist(), n10.tolist(), n01.tolist(), n00.tolist()))
    return out


def exact_zero_probability(scenario: OrScenario) -> float:
    """P(at least one empty cell) by inclusion-exclusion over the four cells."""
    px, p0, p1 = scenario.p_x, scenario.p0, scenario.p1
    q = [px * p1, px * (1 - p1), (1 - px) * p0, (1 - px) * (1 - p0)]
    total = 0.0
    for mask in range(1, 16):
        members = [q[i] for i in range(4) if mask >> i & 1]
        total += (-1) ** (len(members) + 1) * (1.0 - sum(members)) ** scenario.n_obs
    return total


@dataclass(frozen=True)
class OrStudyConfig:
    scenarios: Sequence[OrScenario] = field(default_factory=default_scenarios)
    fallback_map: Mapping[str, Sequence[str]] = field(default_factory=lambda: DEFAULT_FALLBACKS)
    max_fallbacks: int = 1
    seed: int = 20240101
    workers: int = 1
    backend: str = "thread"
    signed_ranks: bool = False

    def __post_init__(self) -> None:
        if not self.scenarios:
            raise ConfigError("no scenarios")
        known = {e.value for e in OrEstimator}
        for base, fbs in self.fallback_map.items():
            for m in (base, *fbs):
                if m not in known:
                    raise ConfigError(f"unknown estimator {m!r}")

    @property
    def measure(self) -> MeasureSpec:
        d = Direction.LOWER_BETTER if self.signed_ranks else Direction.LOWER_ABS_BETTER
        return MeasureSpec("log_bias", d)

    def pipelines(self) -> list[Pipeline]:
        return expand_pipelines([e.value for e in BASE_ESTIMATORS], self.fallback_map,
                                self.max_fallbacks)


@dataclass
class ScenarioResult:
    scenario: OrScenario
    table: ResultTable
    zero_proportion: float
    zero_se: float
    bias_single: dict[str, AggregateValue]
    bias_all: dict[str, AggregateValue]
    bias_pipelines: dict[str, AggregateValue]
    ranks_single: dict[str, int]
    ranks_all: dict[str, int]
    ranks_pipelines: dict[str, int]
    pipeline_failure: dict[str, float]

    @property
    def zero_count(self) -> int:
        return round(self.zero_proportion * self.scenario.n_rep)


@dataclass
class OrStudyResult:
    config: OrStudyConfig
    scenarios: list[ScenarioResult]
    pipelines: list[Pipeline]
    divergence: list[dict]


def scenario_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master_seed, index])


def _defined_ranks(values: Mapping[str, AggregateValue], measure: MeasureSpec) -> dict[str, int]:
    return rank_methods({m: v for m, v in values.items() if v.defined}, measure)


def simulate_scenario(scenario: OrScenario, index: int, seed: int) -> list[ContingencyTable2x2]:
    rng = np.random.default_rng(scenario_seed(seed, index))
    return simulate_tables(scenario, scenario.n_rep, rng)


def run_scenario_grid(scenario: OrScenario, tables: Sequence[ContingencyTable2x2],
                      config: OrStudyConfig, pipelines: Sequence[Pipeline]) -> ResultTable:
    """Evaluate every base estimator and every pipeline on the simulated tables."""
    methods: dict = {e.value: OrMethod(e) for e in BASE_ESTIMATORS}
    for p in pipelines:
        if p.label not in methods:
            methods[p.label] = PipelineMethod(p, or_evaluator)
    run_cfg = RunConfig(master_seed=config.seed, workers=config.workers, backend=config.backend)
    return run_grid(methods, tables, run_cfg, measure="odds_ratio", direction="LowerAbsBetter",
                    metadata={"scenario": scenario.label, "p0": scenario.p0,
                              "n_obs": scenario.n_obs, "true_or": scenario.true_or,
                              "p_x": scenario.p_x})


def analyse_scenario(scenario: OrScenario, table: ResultTable, tables_zero: int,
                     config: OrStudyConfig, pipelines: Sequence[Pipeline]) -> ScenarioResult:
    def stat(xs: Sequence[float]) -> float:
        return log_bias(xs, scenario.true_or)

    base = [e.value for e in BASE_ESTIMATORS]
    single = {m: aggregate_discard_single(table, m, stat) for m in base}
    joint = aggregate_discard_all(table, base, stat)
    piped = {p.label: aggregate_unconditional(table, p.label, stat) for p in pipelines}
    measure = config.measure
    p = tables_zero / scenario.n_rep
    return ScenarioResult(
        scenario=scenario,
        table=table,
        zero_proportion=p,
        zero_se=math.sqrt(p * (1 - p) / scenario.n_rep),
        bias_single=single,
        bias_all=joint,
        bias_pipelines=piped,
        ranks_single=_defined_ranks(single, measure),
        ranks_all=_defined_ranks(joint, measure),
        ranks_pipelines=_defined_ranks(piped, measure),
        pipeline_failure={p.label: failure_proportion(table, p.label).overall for p in pipelines},
    )


def run_or_study(config: OrStudyConfig | None = None) -> OrStudyResult:
    from ..report import emit_rank_divergence

    config = config or OrStudyConfig()
    pipelines = config.pipelines()
    results = []
    divergence = []
    for i, sc in enumerate(config.scenarios):
        tables = simulate_scenario(sc, i, config.seed)
        table = run_scenario_grid(sc, tables, config, pipelines)
        zeros = sum(1 for t in tables if has_sampling_zero(t))
        res = analyse_scenario(sc, table, zeros, config, pipelines)
        results.append(res)
        if set(res.ranks_single) == set(res.ranks_all) and res.ranks_single:
            div = emit_rank_divergence(res.ranks_single, res.ranks_all, "Single", "All")
            if div.max_shift > 0:
                divergence.append({"scenario": sc.label, "index": i + 1,
                                   "max_shift": div.max_shift, "rows": div.rows})
    return OrStudyResult(config, results, pipelines, divergence)
