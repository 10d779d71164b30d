"""Coverage of naive vs. corrected confidence intervals for generalization AUC.

The model is a Gini decision stump on one standard-normal predictor. When the
best split does not reduce impurity by at least ``min_impurity_decrease`` the
stump stays a constant predictor, its AUC is exactly 0.5, and if that happens
in every subsampling repetition the sample variance is exactly zero. The
legacy naive interval reports that as an error; the repaired one returns the
zero-width interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Sequence

import numpy as np
from scipy import stats

from .aggregate import (
    CoverageHandling,
    Verdict,
    aggregate_discard_all,
    aggregate_discard_single,
    aggregate_unconditional,
    empirical_coverage,
    failure_proportion,
)
from .core import FailbenchError, Kind, ResultTable, RunOutcome
from .engine import ConfigError, RunConfig, run_grid


class EmptyTrain(FailbenchError, ValueError):
    pass


class SingleClass(FailbenchError, ValueError):
    pass


class DegenerateFolds(FailbenchError, RuntimeError):
    pass


MAX_FOLD_RETRIES = 100
# calibrated so that N fails in roughly 30% of iterations at beta = 0.3, n = 500
DEFAULT_TAU = 0.05


@dataclass(frozen=True)
class CiSpec:
    k: int = 15
    split_ratio: float = 0.8
    level: float = 0.95
    c: float = 0.0

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ConfigError("k must be >= 2")
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError("split_ratio must lie in (0, 1)")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level must lie in (0, 1)")
        if not self.c >= 0.0:
            raise ConfigError("c must be >= 0")

    @property
    def corrected_c(self) -> float:
        """Test/train ratio of the inner split, 0.25 for a 4:1 split."""
        return (1.0 - self.split_ratio) / self.split_ratio


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not self.lower <= self.upper:
            raise ValueError("lower must not exceed upper")

    @property
    def zero_width(self) -> bool:
        return self.lower == self.upper

    @property
    def half_width(self) -> float:
        return 0.5 * (self.upper - self.lower)

    def covers(self, x: float) -> bool:
        return self.lower <= x <= self.upper


@dataclass(frozen=True)
class CiDgm:
    n_total: int = 500
    beta: float = 0.3
    d: int = 1

    def __post_init__(self) -> None:
        if self.n_total < 50:
            raise ConfigError("n_total must be >= 50")
        if not math.isfinite(self.beta):
            raise ConfigError("beta must be finite")
        if self.d != 1:
            raise ConfigError("only a single predictor is supported")


def generate_classif_data(dgm: CiDgm, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """``n`` rows of z ~ N(0, 1), y ~ Bernoulli(sigmoid(beta * z))."""
    if n < 2:
        raise ConfigError("n must be >= 2")
    z = rng.standard_normal(n)
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-dgm.beta * z))).astype(np.int8)
    return z, y


# -- model -------------------------------------------------------------------

@dataclass(frozen=True)
class Stump:
    """Depth-1 tree. ``threshold is None`` means a constant predictor."""

    threshold: float | None
    left_score: float
    right_score: float
    impurity_decrease: float = 0.0

    @property
    def is_constant(self) -> bool:
        return self.threshold is None

    def predict(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.threshold is None:
            return np.full(z.shape, self.left_score)
        return np.where(z <= self.threshold, self.left_score, self.right_score)


def _gini(p: np.ndarray | float) -> np.ndarray | float:
    return 2.0 * p * (1.0 - p)


def fit_stump(z: np.ndarray, y: np.ndarray, min_impurity_decrease: float = 0.0) -> Stump:
    """Exhaustive Gini split search on one predictor.

    Candidate thresholds are midpoints between consecutive distinct values.
    The split is kept only if its impurity decrease is positive and at least
    ``min_impurity_decrease``; otherwise the leaf prevalence is returned as a
    constant score.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(z)
    if n == 0:
        raise EmptyTrain("no training rows")
    prevalence = float(y.mean())
    constant = Stump(None, prevalence, prevalence)
    order = np.argsort(z, kind="stable")
    zs, ys = z[order], y[order]
    # split after position i (left = first i+1 rows) where the value changes
    cut = np.nonzero(np.diff(zs) > 0)[0]
    if len(cut) == 0:
        return constant
    pos_left = np.cumsum(ys)[cut]
    n_left = cut + 1.0
    n_right = n - n_left
    p_left = pos_left / n_left
    p_right = (ys.sum() - pos_left) / n_right
    child = (n_left * _gini(p_left) + n_right * _gini(p_right)) / n
    decrease = _gini(prevalence) - child
    best = int(np.argmax(decrease))
    if not decrease[best] > 0 or decrease[best] < min_impurity_decrease:
        return constant
    i = cut[best]
    return Stump(0.5 * (zs[i] + zs[i + 1]), float(p_left[best]), float(p_right[best]),
                 float(decrease[best]))


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUC: (concordant + ties/2) / (n_pos * n_neg)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both classes")
    ranks = stats.rankdata(scores)
    u = float(ranks[pos].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def subsample_auc_estimates(z: np.ndarray, y: np.ndarray, spec: CiSpec, rng: np.random.Generator,
                            min_impurity_decrease: float = 0.0) -> list[float]:
    """``spec.k`` random train/test splits; stump fit on train, AUC on test."""
    n = len(z)
    n_train = int(round(spec.split_ratio * n))
    if not 0 < n_train < n:
        raise DegenerateFolds("split leaves an empty train or test part")
    out = []
    for _ in range(spec.k):
        for _attempt in range(MAX_FOLD_RETRIES):
            perm = rng.permutation(n)
            tr, te = perm[:n_train], perm[n_train:]
            y_te = y[te]
            if 0 < y_te.sum() < len(te):
                break
        else:
            raise DegenerateFolds(f"no two-class test fold in {MAX_FOLD_RETRIES} draws")
        model = fit_stump(z[tr], y[tr], min_impurity_decrease)
        out.append(auc(model.predict(z[te]), y_te))
    return out


# -- interval ----------------------------------------------------------------

@lru_cache(maxsize=64)
def t_quantile(q: float, df: int) -> float:
    return float(stats.t.ppf(q, df))


def mean_and_variance(xs: Sequence[float]) -> tuple[float, float]:
    """Mean and sample variance, shifted by the first value.

    Identical inputs give a variance of exactly 0.0 and a mean equal to the
    common value.
    """
    x0 = float(xs[0])
    d = [float(x) - x0 for x in xs]
    k = len(d)
    md = math.fsum(d) / k
    var = math.fsum((v - md) ** 2 for v in d) / (k - 1)
    return x0 + md, var


def ci_interval(auc_estimates: Sequence[float], spec: CiSpec, *, legacy: bool = False) -> Interval:
    """t-interval with half-width ``t * sqrt((1/k + c) * S^2)``.

    With ``legacy=True`` a zero sample variance raises ZeroVarianceError,
    mirroring a t-test implementation; otherwise it yields ``[m, m]``.
    """
    k = len(auc_estimates)
    if k != spec.k:
        raise ValueError(f"expected {spec.k} estimates, got {k}")
    m, s2 = mean_and_variance(auc_estimates)
    if s2 == 0.0:
        if legacy:
            raise ZeroVarianceError("zero variance: data are essentially constant")
        return Interval(m, m)
    h = t_quantile((1.0 + spec.level) / 2.0, k - 1) * math.sqrt((1.0 / k + spec.c) * s2)
    return Interval(m - h, m + h)


class ZeroVarianceError(FailbenchError, ArithmeticError):
    pass


def ci_outcome(auc_estimates: Sequence[float], spec: CiSpec, *, legacy: bool = False) -> Interval | RunOutcome:
    """Like :func:`ci_interval` but returns the legacy error as a failure value."""
    try:
        return ci_interval(auc_estimates, spec, legacy=legacy)
    except ZeroVarianceError as exc:
        return RunOutcome.fail(Kind.CALCULATION, str(exc))


# -- study -------------------------------------------------------------------

HANDLINGS = ("discard_single", "discard_all", "count_as_noncover", "zero_width")
HANDLING_LABELS = {
    "discard_single": "discarded for N only",
    "discard_all": "discarded for N and C",
    "count_as_noncover": "set to not covering",
    "zero_width": "set to zero-width interval",
}


@dataclass(frozen=True)
class CiStudyConfig:
    dgm: CiDgm = field(default_factory=CiDgm)
    k: int = 15
    split_ratio: float = 0.8
    level: float = 0.95
    c: float | None = None
    min_impurity_decrease: float = DEFAULT_TAU
    n_iter: int = 1000
    test_fraction: float = 0.8
    seed: int = 20240101
    workers: int = 1

    def __post_init__(self) -> None:
        if self.n_iter < 1:
            raise ConfigError("n_iter must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if self.min_impurity_decrease < 0:
            raise ConfigError("min_impurity_decrease must be >= 0")

    @property
    def spec_n(self) -> CiSpec:
        return CiSpec(self.k, self.split_ratio, self.level, 0.0)

    @property
    def spec_c(self) -> CiSpec:
        base = CiSpec(self.k, self.split_ratio, self.level)
        return CiSpec(self.k, self.split_ratio, self.level,
                      base.corrected_c if self.c is None else self.c)


@dataclass(frozen=True)
class CiIterationRecord:
    index: int
    true_auc: float
    auc_estimates: tuple[float, ...]
    interval_n: Interval | RunOutcome
    interval_n_repaired: Interval
    interval_c: Interval

    @property
    def n_failed(self) -> bool:
        return isinstance(self.interval_n, RunOutcome)

    @property
    def covers_n(self) -> bool | None:
        return None if self.n_failed else self.interval_n.covers(self.true_auc)

    @property
    def covers_n_repaired(self) -> bool:
        return self.interval_n_repaired.covers(self.true_auc)

    @property
    def covers_c(self) -> bool:
        return self.interval_c.covers(self.true_auc)

    def to_dict(self) -> dict[str, Any]:
        def iv(x: Interval | RunOutcome) -> Any:
            if isinstance(x, RunOutcome):
                return {"failure": {"kind": x.failure.kind.value, "detail": x.failure.detail}}
            return {"lower": x.lower, "upper": x.upper, "zero_width": x.zero_width}

        return {"index": self.index, "true_auc": self.true_auc,
                "auc_estimates": list(self.auc_estimates),
                "interval_N": iv(self.interval_n), "interval_N_zero_width": iv(self.interval_n_repaired),
                "interval_C": iv(self.interval_c), "covers_N": self.covers_n,
                "covers_N_zero_width": self.covers_n_repaired, "covers_C": self.covers_c}


class CiIterationRunner:
    """Holds the fixed population and computes (and memoizes) iteration records.

    One population is drawn from the seed, like a single benchmark data set;
    each iteration re-splits it with its own seed stream.
    """

    def __init__(self, config: CiStudyConfig):
        self.config = config
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
        self.z, self.y = generate_classif_data(config.dgm, config.dgm.n_total, rng)
        self._cache: dict[int, CiIterationRecord] = {}

    def record(self, i: int) -> CiIterationRecord:
        rec = self._cache.get(i)
        if rec is None:
            rec = self._cache[i] = self._compute(i)
        return rec

    def _compute(self, i: int) -> CiIterationRecord:
        cfg = self.config
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1, i]))
        n = len(self.z)
        n_test = int(round(cfg.test_fraction * n))
        for _ in range(MAX_FOLD_RETRIES):
            perm = rng.permutation(n)
            te, tr = perm[:n_test], perm[n_test:]
            if 0 < self.y[te].sum() < n_test:
                break
        else:
            raise DegenerateFolds("no two-class test set")
        model = fit_stump(self.z[tr], self.y[tr], cfg.min_impurity_decrease)
        true_auc = auc(model.predict(self.z[te]), self.y[te])
        est = subsample_auc_estimates(self.z[tr], self.y[tr], cfg.spec_n, rng,
                                      cfg.min_impurity_decrease)
        return CiIterationRecord(i, true_auc, tuple(est),
                                 ci_outcome(est, cfg.spec_n, legacy=True),
                                 ci_interval(est, cfg.spec_n),
                                 ci_interval(est, cfg.spec_c))

    def coverage_n(self, i: int, seed: int | None = None) -> RunOutcome:
        rec = self.record(i)
        if rec.n_failed:
            return rec.interval_n
        return RunOutcome(value=float(rec.covers_n))

    def coverage_n_repaired(self, i: int, seed: int | None = None) -> RunOutcome:
        return RunOutcome(value=float(self.record(i).covers_n_repaired))

    def coverage_c(self, i: int, seed: int | None = None) -> RunOutcome:
        return RunOutcome(value=float(self.record(i).covers_c))


@dataclass
class CiStudyResult:
    config: CiStudyConfig
    records: list[CiIterationRecord]
    table: ResultTable
    coverage: dict[str, dict[str, float]]
    n_failure_proportion: float

    def table5_rows(self) -> list[tuple[str, ...]]:
        rows = [("method",) + HANDLINGS]
        for m in ("N", "C"):
            rows.append((m,) + tuple(repr(self.coverage[m][h]) for h in HANDLINGS))
        return rows


def run_ci_study(config: CiStudyConfig | None = None) -> CiStudyResult:
    """Coverage of N and C under all four handlings of N's failures.

    The engine table has one column per interval method and one row per
    iteration; a cell is 1.0 (covers), 0.0 (misses) or a failure.
    """
    config = config or CiStudyConfig()
    runner = CiIterationRunner(config)
    methods = {"N": runner.coverage_n, "C": runner.coverage_c,
               "N_zero_width": runner.coverage_n_repaired}
    iters = {str(i + 1): i for i in range(config.n_iter)}
    table = run_grid(methods, iters, RunConfig(master_seed=config.seed, workers=config.workers),
                     measure="coverage", direction="CloserToTarget",
                     metadata={"level": config.level, "c_N": 0.0, "c_C": config.spec_c.c,
                               "beta": config.dgm.beta, "n_total": config.dgm.n_total,
                               "min_impurity_decrease": config.min_impurity_decrease})
    records = [runner.record(i) for i in range(config.n_iter)]

    verdicts_n = [Verdict(c.ok, c.ok and c.value == 1.0) for c in table.column("N")]
    joint = aggregate_discard_all(table, ["N", "C"])
    single_n = aggregate_discard_single(table, "N")
    all_c = aggregate_unconditional(table, "C").value
    coverage = {
        "N": {
            "discard_single": single_n.value if single_n.defined else math.nan,
            "discard_all": joint["N"].value if joint["N"].defined else math.nan,
            "count_as_noncover": empirical_coverage(verdicts_n, CoverageHandling.COUNT_AS_NON_COVER),
            "zero_width": aggregate_unconditional(table, "N_zero_width").value,
        },
        "C": {
            "discard_single": all_c,
            "discard_all": joint["C"].value if joint["C"].defined else math.nan,
            "count_as_noncover": all_c,
            "zero_width": all_c,
        },
    }
    return CiStudyResult(config, records, table, coverage,
                         failure_proportion(table, "N").overall)
