"""CSV and JSON outputs of the odds-ratio study."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Any, Mapping

from ..core import table_to_json
from .study import OrStudyResult


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(x: float | None) -> str:
    return "UNDEFINED" if x is None else repr(x)


def table_digest(result_table) -> str:
    """sha256 of the timing-free JSON of a result table."""
    return hashlib.sha256(table_to_json(result_table, timing=False).encode()).hexdigest()


def zero_proportion_csv(result: OrStudyResult) -> str:
    rows = [(s.scenario.n_obs, s.scenario.true_or, s.scenario.p_x, s.scenario.p0,
             s.scenario.n_rep, s.zero_count, repr(s.zero_proportion), repr(s.zero_se))
            for s in result.scenarios]
    return _csv(("n_obs", "true_or", "p_x", "p0", "n_rep", "n_with_zero", "proportion", "se"),
                rows)


def bias_csv(result: OrStudyResult) -> str:
    rows = []
    for s in result.scenarios:
        for basis, vals, ranks in (("Single", s.bias_single, s.ranks_single),
                                   ("All", s.bias_all, s.ranks_all),
                                   ("Pipeline", s.bias_pipelines, s.ranks_pipelines)):
            for m, v in vals.items():
                rows.append((s.scenario.label, basis, m, _num(v.value), v.n_used,
                             ranks.get(m, "")))
    return _csv(("scenario", "basis", "method", "log_bias", "n_used", "rank"), rows)


def pipeline_failure_csv(result: OrStudyResult) -> str:
    rows = [(s.scenario.label, m, repr(p)) for s in result.scenarios
            for m, p in s.pipeline_failure.items()]
    return _csv(("scenario", "pipeline", "failure_proportion"), rows)


def divergence_csv(result: OrStudyResult) -> str:
    rows = [(d["scenario"], r["method"], r["rank_a"], r["rank_b"], r["shift"], r["abs_shift"],
             int(r["best_flip"]), int(r["worst_flip"]), int(r["is_max_shift"]))
            for d in result.divergence for r in d["rows"]]
    return _csv(("scenario", "method", "rank_Single", "rank_All", "shift", "abs_shift",
                 "best_flip", "worst_flip", "max_shift"), rows)


def or_study_outputs(result: OrStudyResult, out: Path, stamp: Mapping[str, Any]) -> list[Path]:
    out = Path(out)
    files = {
        "zero_proportions.csv": zero_proportion_csv(result),
        "bias_ranks.csv": bias_csv(result),
        "pipeline_failures.csv": pipeline_failure_csv(result),
        "rank_divergence.csv": divergence_csv(result),
    }
    manifest = {
        "stamp": dict(stamp),
        "pipelines": [p.label for p in result.pipelines],
        "signed_ranks": result.config.signed_ranks,
        "scenarios": [{"label": s.scenario.label, "n_obs": s.scenario.n_obs,
                       "true_or": s.scenario.true_or, "p_x": s.scenario.p_x,
                       "p0": s.scenario.p0, "n_rep": s.scenario.n_rep,
                       "table_sha256": table_digest(s.table)} for s in result.scenarios],
        "max_rank_shift": max((d["max_shift"] for d in result.divergence), default=0),
    }
    files["manifest.json"] = json.dumps(manifest, indent=1)
    paths = []
    for name, text in files.items():
        p = out / name
        p.write_text(text, encoding="utf-8")
        paths.append(p)
    return paths
