from __future__ import annotations

import csv

import jsonschema
import numpy as np
import pytest

from topocut.datagen import (DemonstrationTuple, EpisodeRecord, FlatTopology,
                             CutAction)
from topocut.config import GoalSpec
from topocut.reporting import dataset_report, evaluation_report, validate_report
from topocut.spectral import HUMAN_BASELINES, FragmentEvaluation


def _ev(distances, rewards, threshold=0.5, skipped=()):
    rewards = list(rewards)
    return FragmentEvaluation(list(distances), rewards, float(sum(rewards)),
                              sum(r >= threshold for r in rewards),
                              list(skipped))


def test_evaluation_report_fields_and_baseline():
    ev = _ev([0.1, 0.4], [0.9, 0.6])
    rep = evaluation_report(ev, threshold=0.5, task="slice",
                            cluster_ids=[0, 3], fragment_sizes=[120, 88])
    assert rep["R_total"] == pytest.approx(1.5)
    assert rep["N_C"] == 2
    assert rep["R_hat"] == pytest.approx(1.5 / HUMAN_BASELINES["slice"])
    assert rep["fragments"][1] == {
        "index": 1, "cluster_id": 3, "points": 88,
        "distance": 0.4, "reward": 0.6, "scored": True,
    }


def test_evaluation_report_unknown_task_has_no_normalization():
    rep = evaluation_report(_ev([0.2], [0.8]), threshold=0.5, task=None)
    assert rep["R_hat"] is None
    rep = evaluation_report(_ev([0.2], [0.8]), threshold=0.5, task="julienne")
    assert rep["R_hat"] is None


def test_evaluation_report_marks_skipped_fragments():
    rep = evaluation_report(_ev([0.1, np.inf], [0.9, 0.0], skipped=[1]),
                            threshold=0.5)
    scored = [f["scored"] for f in rep["fragments"]]
    assert scored == [True, False]


def test_validate_report_rejects_bad_shapes():
    good = evaluation_report(_ev([0.1], [0.9]), threshold=0.5)
    bad = dict(good)
    del bad["R_total"]
    with pytest.raises(jsonschema.ValidationError):
        validate_report(bad)
    bad = dict(good)
    bad["N_C"] = -1
    with pytest.raises(jsonschema.ValidationError):
        validate_report(bad)
    bad = dict(good)
    bad["extra"] = 1
    with pytest.raises(jsonschema.ValidationError):
        validate_report(bad)
    bad = dict(good)
    bad["fragments"] = [{"index": 0}]
    with pytest.raises(jsonschema.ValidationError):
        validate_report(bad)


def _fake_record(rewards, counts, seed=0) -> EpisodeRecord:
    """Episode shell with the fields the report reads; no sim behind it."""
    def topo(k, frame):
        pts = np.zeros((k * 4, 3))
        labels = np.repeat(np.arange(k), 4).astype(np.uint8)
        return FlatTopology(pts, labels, np.arange(k, dtype=np.int32), frame)

    goal = GoalSpec(kind="slice", thickness=0.05)
    topos = [topo(k, i) for i, k in enumerate(counts)]
    tuples = []
    for i, r in enumerate(rewards):
        action = CutAction(np.zeros(3), np.array([0, 0, 0, 1.0]),
                           np.zeros(topos[i].n, dtype=np.uint8))
        tuples.append(DemonstrationTuple(topos[i], action, topos[i + 1], goal, r))
    return EpisodeRecord(tuples, {"type": "box"}, None, "scripted", seed, goal,
                         [np.zeros((4, 3))], topos[0])


def test_dataset_report_writes_csv_and_figures(tmp_path):
    recs = [_fake_record([0.2, 0.5, 0.9], [1, 2, 3, 4]),
            _fake_record([0.1, 0.3], [1, 2, 3], seed=1)]
    written = dataset_report(recs, tmp_path)
    names = {p.split("/")[-1] for p in written}
    assert names == {"report.csv", "rewards.png", "fragments.png"}
    for p in written:
        assert (tmp_path / p.split("/")[-1]).stat().st_size > 0

    with open(tmp_path / "report.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["episode", "cut", "reward", "clusters", "incomplete"]
    assert len(rows) == 1 + 3 + 2
    # rewards stored with repr precision so the csv is exact
    assert float(rows[1][2]) == 0.2
    assert rows[3][:2] == ["0", "3"] and rows[3][3] == "4"


def test_dataset_report_empty_records(tmp_path):
    written = dataset_report([], tmp_path)
    assert len(written) == 3
    with open(tmp_path / "report.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 1
