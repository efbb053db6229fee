import logging

import numpy as np
import pandas as pd
import pytest

from src.analysis import (
    aggregate_runs, correlation_gap, correlation_table, flatness_curve, format_cell, results_table, write_curve,
    write_table,
)
from src.errors import InvalidInput
from src.numerics.rng import RngStream
from src.teacher_oracle import MlpTeacher, TeacherCache
from src.training.mlp import MlpModel


def _cache(logits):
    cache = TeacherCache(len(logits[0]))
    for i, row in enumerate(logits):
        cache.put(i, row)
    return cache


# --- correlation gap ---

def test_correlation_gap_of_a_model_with_itself(np_rng):
    model = MlpModel.initialize((4, 8, 5), RngStream(1))
    x = np_rng.normal(size=(30, 4))
    report = correlation_gap(model, model, np.arange(30), x, m=20, seed=3)
    assert report["metric"] == 0.0
    assert report["m"] == 20
    assert len(report["sample_ids"]) == 20
    assert report["sample_ids"] == sorted(report["sample_ids"])


def test_correlation_gap_hand_example():
    u = np.array([1.0, 2.0, 3.0, 4.0])
    teacher = _cache(np.stack([u, u, -u], axis=1))
    student = _cache(np.stack([u, -u, u], axis=1))
    report = correlation_gap(student, teacher, np.arange(4), np.zeros((4, 1)), m=4)
    assert report["metric"] == pytest.approx(8.0 / 9.0)
    np.testing.assert_allclose(report["teacher_corr"], [[1, 1, -1], [1, 1, -1], [-1, -1, 1]])


def test_correlation_gap_symmetry_and_bounds(np_rng):
    a = MlpModel.initialize((3, 6, 4), RngStream(1))
    b = MlpModel.initialize((3, 6, 4), RngStream(2))
    x = np_rng.normal(size=(25, 3))
    ab = correlation_gap(a, b, np.arange(25), x, m=25)
    ba = correlation_gap(b, a, np.arange(25), x, m=25)
    assert ab["metric"] == pytest.approx(ba["metric"])
    assert 0.0 <= ab["metric"] <= 2.0


def test_correlation_gap_with_teacher_sources(np_rng):
    model = MlpModel.initialize((3, 6, 4), RngStream(4))
    teacher = MlpTeacher(model)
    x = np_rng.normal(size=(10, 3))
    report = correlation_gap(model, teacher, np.arange(10), x, m=10)
    assert report["metric"] == pytest.approx(0.0, abs=1e-12)
    assert teacher.forward_calls == 10


def test_correlation_gap_sample_count():
    cache = _cache(np.eye(3))
    with pytest.raises(InvalidInput):
        correlation_gap(cache, cache, np.arange(3), np.zeros((3, 1)), m=1)
    with pytest.raises(InvalidInput):
        correlation_gap(cache, cache, np.arange(3), np.zeros((3, 1)), m=4)


def test_correlation_gap_draw_is_seeded(np_rng):
    model = MlpModel.initialize((3, 6, 4), RngStream(1))
    x = np_rng.normal(size=(40, 3))
    first = correlation_gap(model, model, np.arange(40), x, m=10, seed=5)
    again = correlation_gap(model, model, np.arange(40), x, m=10, seed=5)
    other = correlation_gap(model, model, np.arange(40), x, m=10, seed=6)
    assert first["sample_ids"] == again["sample_ids"]
    assert first["sample_ids"] != other["sample_ids"]


# --- flatness ---

def test_flatness_of_identical_rows_is_zero():
    cache = _cache([[1.0, 2.0, 3.0]] * 4)
    curve = flatness_curve(cache, np.arange(4), np.zeros((4, 1)), labels=[0, 0, 1, 1])
    assert curve["values"] == [0.0, 0.0, 0.0]
    assert curve["samples_per_class"] == {0: 2, 1: 2}


def test_flatness_of_rank_one_rows():
    v = np.array([1.0, -2.0, 0.5])
    rows = np.outer([0.0, 1.0, 3.0, -1.0], v) + 7.0
    curve = flatness_curve(_cache(rows), np.arange(4), np.zeros((4, 1)), per_class=False)
    np.testing.assert_allclose(curve["values"], [1.0, 0.0, 0.0], atol=1e-6)

    raw = flatness_curve(_cache(rows), np.arange(4), np.zeros((4, 1)), per_class=False, normalize=False)
    centered = rows - rows.mean(axis=0)
    assert raw["values"][0] == pytest.approx(np.linalg.norm(centered), rel=1e-6)


def test_flatness_curve_properties(np_rng):
    model = MlpModel.initialize((4, 10, 6), RngStream(3))
    x = np_rng.normal(size=(60, 4))
    labels = np.repeat(np.arange(3), 20)
    curve = flatness_curve(model, np.arange(60), x, labels=labels)
    values = np.array(curve["values"])
    assert len(values) == 6
    assert values[0] == pytest.approx(1.0)
    assert np.all(np.diff(values) <= 0)
    assert np.all(values >= 0)


def test_flatness_skips_singleton_classes(caplog):
    rows = [[0.0, 1.0], [1.0, 0.0], [5.0, 5.0]]
    with caplog.at_level(logging.WARNING):
        curve = flatness_curve(_cache(rows), np.arange(3), np.zeros((3, 1)), labels=[0, 0, 1])
    assert curve["samples_per_class"] == {0: 2}
    assert "skipped" in caplog.text
    with pytest.raises(InvalidInput):
        flatness_curve(_cache(rows), np.arange(3), np.zeros((3, 1)), labels=[0, 1, 2])
    with pytest.raises(InvalidInput):
        flatness_curve(_cache(rows), np.arange(3), np.zeros((3, 1)))


def test_write_curve(tmp_path):
    path = tmp_path / "curves" / "flat.txt"
    write_curve(str(path), [1.0, 0.25, 1 / 3])
    assert [float(v) for v in path.read_text().split()] == [1.0, 0.25, 1 / 3]


# --- aggregation ---

def test_aggregate_runs_example():
    runs = [{"method": "CKD", "n": 100, "test_acc": v} for v in (36.0, 37.0, 38.0)]
    runs.append({"method": "KD", "n": 100, "test_acc": 30.0})
    table = aggregate_runs(runs)
    ckd = table[table["method"] == "CKD"].iloc[0]
    assert ckd["mean"] == pytest.approx(37.0)
    assert ckd["std"] == pytest.approx(1.0)
    assert ckd["count"] == 3
    kd = table[table["method"] == "KD"].iloc[0]
    assert kd["std"] == 0.0
    assert list(table["method"]) == ["CKD", "KD"]


def test_aggregate_runs_errors():
    with pytest.raises(InvalidInput):
        aggregate_runs([])
    with pytest.raises(InvalidInput):
        aggregate_runs([{"method": "KD", "test_acc": 0.5}])


def test_format_cell():
    assert format_cell(0.3638, 0.0060) == "36.38_{0.60}"
    assert format_cell(0.5, 0.0) == "50.00_{0.00}"


def test_results_table_layout():
    aggregated = pd.DataFrame({
        "method": ["CE-only", "CKD", "CKD"],
        "n": [100, 100, 200],
        "mean": [0.30, 0.36, 0.40],
        "std": [0.01, 0.02, 0.0],
        "count": [3, 3, 1],
    })
    table = results_table(aggregated, row_order=["CE-only", "CKD"])
    assert list(table.index) == ["CE-only", "CKD"]
    assert list(table.columns) == ["n=100", "n=200"]
    assert table.loc["CKD", "n=100"] == "36.00_{2.00}"
    assert table.loc["CE-only", "n=200"] == "-"


def test_correlation_table_and_write(tmp_path):
    reports = {"KD": {"metric": 0.2, "m": 100}, "CKD": {"metric": 0.1, "m": 100}}
    table = correlation_table(reports)
    assert list(table["model"]) == ["KD", "CKD"]
    write_table(table, str(tmp_path / "corr.csv"), index=False)
    write_table(table, str(tmp_path / "corr.txt"), index=False)
    assert pd.read_csv(tmp_path / "corr.csv")["metric"].tolist() == [0.2, 0.1]
    assert "CKD" in (tmp_path / "corr.txt").read_text()
    with pytest.raises(InvalidInput):
        correlation_table({})
