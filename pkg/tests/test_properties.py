"""Randomized property suites, 1 000 cases per property."""

import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from failbench.aggregate import (
    CoverageHandling,
    ImputationPolicy,
    MeasureSpec,
    Verdict,
    aggregate_discard_all,
    aggregate_discard_single,
    aggregate_unconditional,
    empirical_coverage,
    failure_proportion,
    impute,
    log_bias,
    rank_methods,
)
from failbench.core import (
    Kind,
    RunOutcome,
    build_table,
    failure_set,
    joint_success_set,
    success_set,
    table_from_json,
    table_to_json,
)
from failbench.pipeline import Pipeline, run_pipeline
from failbench.report import ThreefoldReport, emit_rank_divergence, emit_threefold
from failbench.study_ci import CiSpec, auc, ci_interval
from failbench.study_or import ContingencyTable2x2, estimate_or

CASES = settings(max_examples=1000, deadline=None,
                 suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])

values = st.floats(-100, 100, allow_nan=False, allow_infinity=False)
failures = st.sampled_from([Kind.CALCULATION, Kind.MEMORY, Kind.RUNTIME]).map(
    lambda k: RunOutcome.fail(k, "boom"))


@st.composite
def tables(draw, min_methods=1, fail_rate=0.3):
    n_m = draw(st.integers(min_methods, 4))
    n_d = draw(st.integers(1, 6))
    methods = [f"m{i}" for i in range(n_m)]
    datasets = [str(i + 1) for i in range(n_d)]
    cells = []
    for m in methods:
        for d in datasets:
            fail = draw(st.floats(0, 1)) < fail_rate
            cells.append((m, d, draw(failures) if fail else draw(values)))
    return build_table(methods, datasets, cells)


class TestCoreProperties:
    @CASES
    @given(tables())
    def test_partition(self, t):
        for m in t.methods:
            s, f = success_set(t, m), failure_set(t, m)
            assert s | f == set(t.datasets) and not s & f

    @CASES
    @given(tables(min_methods=2))
    def test_joint_subset_and_monotone(self, t):
        prev = set(t.datasets)
        for k in range(1, len(t.methods) + 1):
            joint = joint_success_set(t, t.methods[:k])
            assert joint <= prev
            assert all(joint <= success_set(t, m) for m in t.methods[:k])
            prev = joint

    @CASES
    @given(tables())
    def test_json_round_trip(self, t):
        back = table_from_json(table_to_json(t))
        assert all(back.cells[k].value == c.value and back.cells[k].failure == c.failure
                   for k, c in t.cells.items())


class TestAggregateProperties:
    @CASES
    @given(tables(fail_rate=0.0))
    def test_zero_failure_bases_agree(self, t):
        for m in t.methods:
            u = aggregate_unconditional(t, m).value
            assert u == aggregate_discard_single(t, m).value
            assert u == aggregate_discard_all(t, [m])[m].value

    @CASES
    @given(tables())
    def test_discard_all_n_used(self, t):
        res = aggregate_discard_all(t, t.methods)
        n = len(joint_success_set(t, t.methods))
        assert {a.n_used for a in res.values()} == {n}

    @CASES
    @given(tables())
    def test_worst_value_never_increases_mean(self, t):
        imputed = impute(t, ImputationPolicy.worst_value(-100.0))
        for m in t.methods:
            before = aggregate_discard_single(t, m)
            after = aggregate_unconditional(imputed, m)
            if before.defined:
                assert after.value <= before.value + 1e-9

    @CASES
    @given(tables(min_methods=2), st.sampled_from(["worst", "own", "cross"]))
    def test_impute_keeps_successes_and_removes_failures(self, t, which):
        policy = {"worst": ImputationPolicy.worst_value(0.0),
                  "own": ImputationPolicy.mean_of_method(),
                  "cross": ImputationPolicy.cross_method_mean()}[which]
        try:
            out = impute(t, policy)
        except ValueError:
            return  # NoDonor: nothing to impute from
        for key, c in t.cells.items():
            if c.ok:
                assert out.cells[key].value == c.value and not out.cells[key].imputed
        assert all(failure_proportion(out, m).overall == 0 for m in t.methods)

    @CASES
    @given(st.dictionaries(st.text("abcdef", min_size=1, max_size=3),
                           st.integers(0, 5).map(float), min_size=1, max_size=6),
           st.floats(0.01, 100))
    def test_rank_structure(self, vals, scale):
        spec = MeasureSpec("acc")
        ranks = rank_methods(vals, spec)
        assert min(ranks.values()) == 1
        # competition ranks: rank = 1 + number strictly better
        for m, r in ranks.items():
            assert r == 1 + sum(1 for v in vals.values() if v > vals[m])
        assert rank_methods({m: v * scale for m, v in vals.items()}, spec) == ranks

    @CASES
    @given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=30))
    def test_coverage_ordering(self, pairs):
        vs = [Verdict(d, d and c) for d, c in pairs]
        if not any(v.defined for v in vs):
            return
        a = empirical_coverage(vs, CoverageHandling.COUNT_AS_NON_COVER)
        b = empirical_coverage(vs, CoverageHandling.DISCARD_UNDEFINED)
        assert a <= b
        if any(not v.defined for v in vs) and any(v.covers for v in vs):
            assert a < b

    @CASES
    @given(st.lists(st.floats(0.01, 100), min_size=1, max_size=20), st.floats(0.01, 100),
           st.floats(0.01, 100))
    def test_log_bias_scale_invariant(self, est, truth, c):
        a = log_bias(est, truth)
        b = log_bias([c * e for e in est], c * truth)
        assert math.isclose(a, b, abs_tol=1e-9)


def _evaluator(outcomes):
    def ev(stage, dataset):
        v = outcomes[stage]
        return RunOutcome.fail(Kind.CALCULATION, "no") if v is None else RunOutcome(value=v)
    return ev


stage_values = st.one_of(st.none(), values)


class TestPipelineProperties:
    @CASES
    @given(stage_values)
    def test_singleton_identity(self, v):
        ev = _evaluator({"a": v})
        assert run_pipeline(Pipeline(("a",)), ev, None).outcome == ev("a", None)

    @CASES
    @given(values, stage_values, stage_values)
    def test_prefix_determinism(self, first, v2, v3):
        ev = _evaluator({"a": first, "b": v2, "c": v3})
        assert run_pipeline(Pipeline(("a", "b", "c")), ev, None).outcome.value == first

    @CASES
    @given(st.lists(st.tuples(stage_values, values), min_size=1, max_size=8))
    def test_total_last_stage(self, rows):
        p = Pipeline(("a", "w"))
        cells = [("a/w", str(i), run_pipeline(p, _evaluator({"a": a, "w": w}), None).outcome)
                 for i, (a, w) in enumerate(rows)]
        t = build_table(["a/w"], [str(i) for i in range(len(rows))], cells)
        assert failure_proportion(t, "a/w").overall == 0
        assert aggregate_unconditional(t, "a/w").defined


counts = st.integers(1, 40)


class TestOrProperties:
    @CASES
    @given(counts, counts, counts, counts, st.sampled_from(["Manual", "Woolf"]))
    def test_transposition(self, a, b, c, d, est):
        t = ContingencyTable2x2(a, b, c, d)
        x, y = estimate_or(est, t).value, estimate_or(est, t.transposed()).value
        assert abs(x * y - 1.0) < 1e-9

    @CASES
    @given(counts, counts, counts, counts)
    def test_haldane_pipeline_on_zero_free(self, a, b, c, d):
        t = ContingencyTable2x2(a, b, c, d)
        out = run_pipeline(Pipeline(("Manual", "Haldane")),
                           lambda s, x: estimate_or(s, x), t).outcome
        assert out.value == estimate_or("Manual", t).value


estimates15 = st.lists(st.floats(0, 1, allow_nan=False), min_size=15, max_size=15)


class TestCiProperties:
    @CASES
    @given(st.lists(st.tuples(st.integers(-1000, 1000), st.integers(0, 1)), min_size=2, max_size=40),
           st.sampled_from(["exp", "cube", "affine"]))
    def test_auc_monotone_invariance(self, rows, fn):
        s = np.array([r[0] for r in rows], dtype=float)
        y = np.array([r[1] for r in rows])
        if y.min() == y.max():
            return
        f = {"exp": lambda x: np.exp(x / 1e3), "cube": lambda x: x ** 3,
             "affine": lambda x: 3 * x + 7}[fn]
        assert auc(f(s), y) == auc(s, y)

    @CASES
    @given(estimates15, st.floats(-5, 5), st.floats(0.1, 10), st.sampled_from([0.0, 0.25]))
    def test_equivariance(self, est, delta, scale, c):
        spec = CiSpec(c=c)
        base = ci_interval(est, spec)
        shifted = ci_interval([e + delta for e in est], spec)
        assert math.isclose(shifted.lower, base.lower + delta, abs_tol=1e-9)
        assert math.isclose(shifted.upper, base.upper + delta, abs_tol=1e-9)
        scaled = ci_interval([e * scale for e in est], spec)
        assert math.isclose(scaled.half_width, base.half_width * scale, rel_tol=1e-9,
                            abs_tol=1e-12)

    @CASES
    @given(estimates15)
    def test_legacy_agrees_and_c_contains_n(self, est):
        n = ci_interval(est, CiSpec(c=0.0))
        if n.zero_width:
            return
        assert ci_interval(est, CiSpec(c=0.0), legacy=True) == n
        c = ci_interval(est, CiSpec(c=0.25))
        assert c.lower < n.lower and n.upper < c.upper


class TestReportProperties:
    @CASES
    @given(tables())
    def test_threefold_round_trip(self, t):
        rep = emit_threefold(t, master_seed=1)
        assert ThreefoldReport.from_json(rep.to_json()).to_dict() == rep.to_dict()
        back = ThreefoldReport.from_csv(rep.to_csv(), stamp=rep.stamp, notes=rep.notes)
        assert back.to_dict() == rep.to_dict()

    @CASES
    @given(st.permutations(range(1, 6)), st.permutations(range(1, 6)))
    def test_divergence_symmetry(self, pa, pb):
        a = dict(zip("ABCDE", pa))
        b = dict(zip("ABCDE", pb))
        ab, ba = emit_rank_divergence(a, b), emit_rank_divergence(b, a)
        assert ab.max_shift == ba.max_shift
        for r1, r2 in zip(ab.rows, ba.rows):
            assert r1["shift"] == -r2["shift"] and r1["abs_shift"] == r2["abs_shift"]
