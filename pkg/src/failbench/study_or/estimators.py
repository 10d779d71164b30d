"""2x2 tables and odds-ratio estimators.

Cells follow ``n<x><y>``: ``n10`` counts exposed subjects (X=1) without the
outcome (Y=0). Each estimator returns a :class:`RunOutcome`; a table the
estimator cannot handle gives a Calculation failure whose detail names the
reason.

Definitions
-----------
Manual   ``n11*n00 / (n10*n01)``; any zero cell makes it 0, inf or 0/0.
Haldane  Manual applied after adding 0.5 to every cell.
Woolf    point estimate of Woolf's interval, always on the Haldane-corrected
         table, so it is defined for every table.
Small    Jewell's small-sample estimate ``n11*n00 / ((n10+1)*(n01+1))``;
         a zero numerator gives 0, which has no log and is a failure.
Fisher   conditional MLE: the psi with ``E_psi[N11 | margins] = n11`` under
         Fisher's noncentral hypergeometric distribution.
Midp     median-unbiased: the psi with
         ``P_psi(N11 > n11) + P_psi(N11 = n11)/2 = 1/2``.

Fisher and Midp have no finite positive solution when ``n11`` sits at an end
of its conditional support, which is the case for every table with a
sampling zero.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from ..core import Kind, RunOutcome

LOG_PSI_LO = -10.0
LOG_PSI_HI = 10.0
ROOT_TOL = 1e-8
MAX_ITER = 200


@dataclass(frozen=True, slots=True)
class ContingencyTable2x2:
    n11: float
    n10: float
    n01: float
    n00: float

    def __post_init__(self) -> None:
        if min(self.n11, self.n10, self.n01, self.n00) < 0:
            raise ValueError("cell counts must be non-negative")

    @property
    def cells(self) -> tuple[float, float, float, float]:
        return (self.n11, self.n10, self.n01, self.n00)

    @property
    def total(self) -> float:
        return self.n11 + self.n10 + self.n01 + self.n00

    def transposed(self) -> ContingencyTable2x2:
        """Swap outcome labels Y=0 <-> Y=1, which inverts the odds ratio."""
        return ContingencyTable2x2(self.n10, self.n11, self.n00, self.n01)


def has_sampling_zero(table: ContingencyTable2x2) -> bool:
    return min(table.cells) == 0


def haldane_correct(table: ContingencyTable2x2) -> ContingencyTable2x2:
    """Add 0.5 to all four cells, zero or not."""
    return ContingencyTable2x2(table.n11 + 0.5, table.n10 + 0.5, table.n01 + 0.5, table.n00 + 0.5)


class OrEstimator(str, enum.Enum):
    MANUAL = "Manual"
    FISHER = "Fisher"
    MIDP = "Midp"
    SMALL = "Small"
    WOOLF = "Woolf"
    HALDANE = "Haldane"


BASE_ESTIMATORS = (OrEstimator.MANUAL, OrEstimator.FISHER, OrEstimator.MIDP,
                   OrEstimator.SMALL, OrEstimator.WOOLF)


# -- noncentral hypergeometric --------------------------------------------

@dataclass(frozen=True)
class ConditionalSupport:
    """Support and central log-weights of N11 given the table margins."""

    k: np.ndarray
    logw0: np.ndarray

    @property
    def lo(self) -> int:
        return int(self.k[0])

    @property
    def hi(self) -> int:
        return int(self.k[-1])

    def _weights(self, log_psi: float) -> np.ndarray:
        # normalize by the running max in log space; n=50 overflows otherwise
        lw = self.logw0 + self.k * log_psi
        return np.exp(lw - lw.max())

    def probs(self, log_psi: float) -> np.ndarray:
        w = self._weights(log_psi)
        return w / w.sum()

    def mean(self, log_psi: float) -> float:
        w = self._weights(log_psi)
        return float(w @ self.k) / float(w.sum())

    def midp_upper(self, log_psi: float, n11: int) -> float:
        """P(N11 > n11) + P(N11 = n11) / 2."""
        w = self._weights(log_psi)
        i = n11 - self.lo
        return (float(w[i + 1:].sum()) + 0.5 * float(w[i])) / float(w.sum())


def _log_comb(n: int, k: np.ndarray) -> np.ndarray:
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


@lru_cache(maxsize=4096)
def conditional_support(m1: int, m0: int, t: int) -> ConditionalSupport:
    """N11 given ``m1`` exposed, ``m0`` unexposed and ``t`` outcomes in total."""
    lo, hi = max(0, t - m0), min(m1, t)
    k = np.arange(lo, hi + 1, dtype=float)
    return ConditionalSupport(k, _log_comb(m1, k) + _log_comb(m0, t - k))


def support_for(table: ContingencyTable2x2) -> ConditionalSupport:
    n11, n10, n01, n00 = (int(c) for c in table.cells)
    return conditional_support(n11 + n10, n01 + n00, n11 + n01)


class RootNotFound(Exception):
    pass


def bisect_log_psi(residual, lo: float = LOG_PSI_LO, hi: float = LOG_PSI_HI,
                   tol: float = ROOT_TOL, max_iter: int = MAX_ITER) -> float:
    """Root of an increasing ``residual`` on ``[lo, hi]`` by bisection.

    Stops once ``|residual| < tol``; raises RootNotFound if the root is not
    bracketed or the iteration cap is hit first.
    """
    f_lo, f_hi = residual(lo), residual(hi)
    if abs(f_lo) < tol:
        return lo
    if abs(f_hi) < tol:
        return hi
    if f_lo > 0 or f_hi < 0:
        raise RootNotFound("root bracketing exhausted")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f = residual(mid)
        if abs(f) < tol:
            return mid
        if f < 0:
            lo = mid
        else:
            hi = mid
    raise RootNotFound("root bracketing exhausted")


def fisher_residual(table: ContingencyTable2x2, log_psi: float) -> float:
    return support_for(table).mean(log_psi) - table.n11


def midp_residual(table: ContingencyTable2x2, log_psi: float) -> float:
    return support_for(table).midp_upper(log_psi, int(table.n11)) - 0.5


def _conditional(table: ContingencyTable2x2, which: OrEstimator) -> RunOutcome:
    if any(c != int(c) for c in table.cells):
        return RunOutcome.fail(Kind.CALCULATION, "conditional estimators need integer counts")
    sup = support_for(table)
    n11 = int(table.n11)
    if n11 in (sup.lo, sup.hi):
        return RunOutcome.fail(
            Kind.CALCULATION,
            f"n11={n11} at boundary of conditional support [{sup.lo}, {sup.hi}]"
            + (" (sampling zero)" if has_sampling_zero(table) else ""))
    if which is OrEstimator.FISHER:
        def res(lp: float) -> float:
            return sup.mean(lp) - n11
    else:
        def res(lp: float) -> float:
            return sup.midp_upper(lp, n11) - 0.5
    try:
        log_psi = bisect_log_psi(res)
    except RootNotFound as exc:
        return RunOutcome.fail(Kind.CALCULATION, str(exc))
    return RunOutcome(value=math.exp(log_psi))


def _ratio(num: float, den: float, what: str) -> RunOutcome:
    if num == 0 and den == 0:
        return RunOutcome.fail(Kind.CALCULATION, f"{what}: 0/0 (sampling zeros)")
    if den == 0:
        return RunOutcome.fail(Kind.CALCULATION, f"{what}: estimate is inf (sampling zero)")
    if num == 0:
        return RunOutcome.fail(Kind.CALCULATION, f"{what}: estimate is 0 (sampling zero)")
    return RunOutcome(value=num / den)


@lru_cache(maxsize=65536)
def _estimate_cached(estimator: OrEstimator, cells: tuple[float, float, float, float]) -> RunOutcome:
    table = ContingencyTable2x2(*cells)
    n11, n10, n01, n00 = cells
    if estimator is OrEstimator.MANUAL:
        return _ratio(n11 * n00, n10 * n01, "Manual")
    if estimator in (OrEstimator.WOOLF, OrEstimator.HALDANE):
        c = haldane_correct(table)
        return _ratio(c.n11 * c.n00, c.n10 * c.n01, estimator.value)
    if estimator is OrEstimator.SMALL:
        return _ratio(n11 * n00, (n10 + 1) * (n01 + 1), "Small")
    return _conditional(table, estimator)


def estimate_or(estimator: OrEstimator | str, table: ContingencyTable2x2) -> RunOutcome:
    """Point estimate of the odds ratio, or a Calculation failure."""
    return _estimate_cached(OrEstimator(estimator), table.cells)


@dataclass(frozen=True)
class OrMethod:
    """Engine-compatible callable for one estimator (picklable)."""

    estimator: OrEstimator

    def __call__(self, table: ContingencyTable2x2, seed: int | None = None) -> RunOutcome:
        return _estimate_cached(self.estimator, table.cells)


_BY_NAME = {e.value: e for e in OrEstimator}


def or_evaluator(stage: str, table: ContingencyTable2x2) -> RunOutcome:
    """Pipeline evaluator: stage names are estimator names."""
    return _estimate_cached(_BY_NAME[stage], table.cells)
