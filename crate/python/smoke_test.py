"""Smoke test for the Python bindings.

Build and install first, for example:

    maturin develop -m crates/python/Cargo.toml --release
    python python/smoke_test.py
"""

import json
import math
import pathlib
import tempfile

import persona_miner_py as pm

ROOT = pathlib.Path(__file__).resolve().parent.parent


def check_clustering():
    rows = [[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0], [20.0, 0.0], [20.0, 1.0]]
    merges = pm.agglomerate(rows)
    assert len(merges) == len(rows) - 1
    assert merges[0][:2] == (0, 1) and math.isclose(merges[0][2], 1.0)
    labels = pm.cut(rows, 3)
    assert labels == [0, 0, 1, 1, 2, 2], labels
    k, scores = pm.select_k(rows, 2, 4)
    assert k == 3, scores
    assert math.isclose(pm.ch_index([[0.0], [1.0], [10.0], [11.0]], [0, 0, 1, 1]), 200.0)


def check_stats():
    r = pm.one_way_anova([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    assert math.isclose(r.f_statistic, 13.5)
    assert r.df_between == 1 and r.df_within == 4
    pairs = pm.tukey_hsd([[10.1, 9.8, 10.3], [10.2, 9.7, 10.1], [30.0, 29.5, 30.4]])
    assert {(a, b) for a, b, *_, rej in pairs if rej} == {(0, 2), (1, 2)}
    assert abs(pm.ptukey(3.877, 3, 10.0) - 0.95) < 1e-3
    p = pm.pca([[t, 2 * t, -t] for t in range(10)], 1)
    assert abs(p.explained_variance_ratio[0] - 1.0) < 1e-12


def check_sampling_and_metrics():
    slugs = [f"lab/r{i}" for i in range(20)]
    s = pm.subsample(slugs, 0.45, 7)
    assert len(s) == pm.sample_size(20, 0.45) == 9
    assert s == pm.subsample(slugs, 0.45, 7) == sorted(s)
    assert pm.compute_rc(1, 4) == 25.0
    assert pm.compute_mrc([60.0, 0, 0, 0, 0, 0]) == 10.0


def check_personas():
    table = pm.PersonaTable()
    assert len(table) == 7
    for name in table.names():
        hit, d = table.nearest(table.centroid(name))
        assert hit == name and d == 0.0
    assert table.label([100.0] * 6, 25.0)[0] == pm.UNMATCHED_PERSONA
    rows, labels = pm.simulate(50, 2.0, 0)
    hits = sum(table.nearest(r)[0] == l for r, l in zip(rows, labels))
    assert hits / len(rows) > 0.95


def check_classify():
    assert pm.classify_message("") == "Unclassified"
    assert pm.classify_message("Fix crash on empty input") == "CorrectiveEngineering"
    assert pm.classify_files([]) == "unknown"


def check_pipeline():
    with tempfile.TemporaryDirectory() as out:
        manifest = json.loads(pm.run_pipeline(ROOT / "fixtures" / "three_repos.toml", out, 0))
        assert manifest["status"] == "complete", manifest
        assert "personas.csv" in manifest["outputs"]


if __name__ == "__main__":
    for check in (check_clustering, check_stats, check_sampling_and_metrics, check_personas, check_classify, check_pipeline):
        check()
        print(f"ok  {check.__name__}")
