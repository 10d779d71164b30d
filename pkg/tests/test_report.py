import json

import pytest

from failbench import __version__
from failbench.aggregate import ImputationPolicy, impute
from failbench.core import Kind, RunOutcome, build_table
from failbench.fixtures import METHODS, table1b
from failbench.report import (
    CAVEAT,
    EMPTY_JOINT_NOTE,
    DanglingAnnotation,
    FailureAnnotation,
    MethodMismatch,
    ProvenanceError,
    ThreefoldReport,
    config_digest,
    emit_failure_summary,
    emit_rank_divergence,
    emit_threefold,
)

M1, M2, M3 = METHODS


class TestThreefold:
    def test_table1b(self):
        rep = emit_threefold(table1b(), master_seed=7, config={"a": 1})
        assert [rep.discard_single[m].value for m in METHODS] == pytest.approx(
            [0.8433333333333334, 0.8375, 0.85], abs=1e-12)
        assert [rep.discard_all[m].value for m in METHODS] == pytest.approx(
            [0.875, 0.895, 0.865], abs=1e-12)
        assert [rep.failure_proportions[m].overall for m in METHODS] == [0.25, 0.0, 0.25]
        assert rep.footer == CAVEAT
        assert rep.stamp == {"master_seed": 7, "config_digest": config_digest({"a": 1}),
                             "harness_version": __version__}

    def test_failure_free(self):
        t = build_table(["a", "b"], ["1", "2"], [("a", "1", 1.0), ("a", "2", 2.0),
                                                 ("b", "1", 3.0), ("b", "2", 4.0)])
        rep = emit_threefold(t)
        for m in ("a", "b"):
            assert rep.discard_single[m].value == rep.discard_all[m].value
            assert rep.failure_proportions[m].overall == 0.0

    def test_method_failing_everywhere(self):
        t = build_table(["a", "b"], ["1"], [("a", "1", RunOutcome.fail(Kind.RUNTIME)),
                                            ("b", "1", 1.0)])
        rep = emit_threefold(t)
        assert not rep.discard_single["a"].defined
        assert not rep.discard_all["b"].defined
        assert rep.notes == [EMPTY_JOINT_NOTE]
        assert rep.failure_proportions["a"].overall == 1.0

    def test_rejects_imputed(self):
        with pytest.raises(ProvenanceError):
            emit_threefold(impute(table1b(), ImputationPolicy.worst_value(0.0)))

    def test_round_trips(self):
        rep = emit_threefold(table1b(), master_seed=3)
        assert ThreefoldReport.from_json(rep.to_json()).to_dict() == rep.to_dict()
        back = ThreefoldReport.from_csv(rep.to_csv(), stamp=rep.stamp, notes=rep.notes)
        assert back.to_dict() == rep.to_dict()

    def test_csv_header(self):
        header = emit_threefold(table1b()).to_csv().splitlines()[0]
        assert header == "method,basis,measure,value_or_UNDEFINED,n_used,failure_proportion"


class TestFailureSummary:
    def test_table1b(self):
        s = emit_failure_summary(table1b())
        assert s.methods[M1].counts["Calculation"] == 1 and s.methods[M1].failed_datasets == ["3"]
        assert s.methods[M3].failed_datasets == ["4"]
        assert s.methods[M2].failed_datasets == []
        assert s.challenging == []

    def test_challenging(self):
        cells = [(m, d, RunOutcome.fail(Kind.CALCULATION, "x") if d == "7" else 1.0)
                 for m in "abc" for d in ("6", "7")]
        s = emit_failure_summary(build_table(list("abc"), ["6", "7"], cells))
        assert s.challenging == ["7"]

    def test_annotations(self):
        ann = FailureAnnotation(M1, ("3",), "separation in data set 3", ("n11=0",))
        s = emit_failure_summary(table1b(), [ann])
        assert s.methods[M1].narratives == ["separation in data set 3", "n11=0"]
        json.dumps(s.to_dict())

    def test_dangling(self):
        with pytest.raises(DanglingAnnotation):
            emit_failure_summary(table1b(), [FailureAnnotation(M2, ("1",))])
        with pytest.raises(DanglingAnnotation):
            emit_failure_summary(table1b(), [FailureAnnotation("nope", ())])


class TestRankDivergence:
    def test_identical(self):
        d = emit_rank_divergence({"a": 1, "b": 2}, {"a": 1, "b": 2})
        assert d.max_shift == 0 and all(r["abs_shift"] == 0 for r in d.rows)

    def test_mismatch(self):
        with pytest.raises(MethodMismatch):
            emit_rank_divergence({"A": 1, "B": 2}, {"A": 1, "C": 2})

    def test_three_step_shift(self):
        a = {"A": 1, "B": 2, "C": 3, "D": 4, "E": 5}
        b = {"A": 4, "B": 1, "C": 2, "D": 3, "E": 5}
        d = emit_rank_divergence(a, b, "Single", "All")
        assert d.max_shift == 3 and d.max_shift_methods == ["A"]
        row = next(r for r in d.rows if r["method"] == "A")
        assert row["best_flip"]
        assert "rank_Single,rank_All" in d.to_csv().splitlines()[0]

    def test_symmetry(self):
        a = {"A": 1, "B": 2, "C": 3}
        b = {"A": 3, "B": 1, "C": 2}
        ab, ba = emit_rank_divergence(a, b), emit_rank_divergence(b, a)
        for r1, r2 in zip(ab.rows, ba.rows):
            assert r1["shift"] == -r2["shift"] and r1["abs_shift"] == r2["abs_shift"]
