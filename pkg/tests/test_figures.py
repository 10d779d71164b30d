import xml.etree.ElementTree as ET

from failbench.core import build_table
from failbench.figures import coverage_bars, failure_boxplot, rank_panels, short_label
from failbench.fixtures import table1b

SVG = "{http://www.w3.org/2000/svg}"


def _gids(path):
    root = ET.parse(path).getroot()
    assert root.tag == SVG + "svg" and root.get("version") == "1.1"
    return {el.get("id") for el in root.iter() if el.get("id")}


def test_rank_panels(tmp_path):
    labels = [f"S{i}" for i in range(8)]
    ranks = [{"Fisher": 1, "Woolf": 2}] * 8
    pipes = [{"Fisher/Haldane": 1, "Woolf": 2}] * 8
    a, b = rank_panels(labels, ranks, ranks, pipes, tmp_path)
    ids_a, ids_b = _gids(a), _gids(b)
    assert {f"panelA-scenario-{i}" for i in range(1, 9)} <= ids_a
    assert {f"panelB-scenario-{i}" for i in range(1, 9)} <= ids_b
    assert "Fis/+0.5" in b.read_text()


def test_coverage_bars(tmp_path):
    handlings = ["discard_single", "discard_all", "count_as_noncover", "zero_width"]
    cov = {"N": dict.fromkeys(handlings, 0.5), "C": dict.fromkeys(handlings, 0.9)}
    ids = _gids(coverage_bars(cov, handlings, {}, tmp_path / "c.svg"))
    assert sum(1 for i in ids if i.startswith("coverage-N-")) == 4
    assert sum(1 for i in ids if i.startswith("coverage-C-")) == 4


def test_boxplot_failures(tmp_path):
    ids = _gids(failure_boxplot(table1b(), tmp_path / "b.svg"))
    assert {"failures-Method 1", "failures-Method 3"} <= ids
    assert "failures-Method 2" not in ids


def test_boxplot_without_failures(tmp_path):
    t = build_table(["a"], ["1", "2"], [("a", "1", 1.0), ("a", "2", 2.0)])
    ids = _gids(failure_boxplot(t, tmp_path / "b.svg"))
    assert not any(i.startswith("failures-") for i in ids)


def test_reproducible(tmp_path):
    p1 = failure_boxplot(table1b(), tmp_path / "1.svg").read_bytes()
    p2 = failure_boxplot(table1b(), tmp_path / "2.svg").read_bytes()
    assert p1 == p2


def test_short_label():
    assert short_label("Midp/Small") == "Mid/Sma"
