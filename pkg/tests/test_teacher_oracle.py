import logging

import numpy as np
import pytest

from src.errors import BudgetExhausted, CacheCorrupt, HintUnavailable, InvalidInput, TeacherMismatch
from src.numerics.rng import RngStream
from src.teacher_oracle import BudgetLedger, LookupTableTeacher, MlpTeacher, TeacherCache, TeacherOracle
from src.training.mlp import MlpModel


def _table_teacher(num_ids=5, num_classes=3, hint_dim=0):
    logits = {i: np.arange(num_classes, dtype=float) + i for i in range(num_ids)}
    hints = {i: np.full(hint_dim, float(i)) for i in range(num_ids)} if hint_dim else None
    return LookupTableTeacher(logits, hints)


@pytest.fixture
def mlp_teacher():
    return MlpTeacher(MlpModel.initialize((4, 6, 3), RngStream(5)))


def test_budget_counts_distinct_samples():
    teacher = _table_teacher()
    oracle = TeacherOracle(teacher, budget=3)
    for sample_id in ("a", "b", "c", "a"):
        oracle.query({"a": 0, "b": 1, "c": 2}[sample_id], None)
    assert oracle.teacher_calls == 3
    assert teacher.forward_calls == 3
    assert [sid for sid, _ in oracle.ledger.call_log] == [0, 1, 2]


def test_budget_exhausted_on_new_sample():
    teacher = _table_teacher()
    oracle = TeacherOracle(teacher, budget=3)
    for i in range(3):
        oracle.query(i, None)
    with pytest.raises(BudgetExhausted):
        oracle.query(3, None)
    assert teacher.forward_calls == 3
    # cached samples stay free
    logits, _ = oracle.query(1, None)
    np.testing.assert_array_equal(logits, [1.0, 2.0, 3.0])


def test_ledger_rejects_nonpositive_budget():
    with pytest.raises(InvalidInput):
        BudgetLedger(limit=0)


def test_hint_request_on_black_box_oracle_makes_no_call():
    teacher = _table_teacher(hint_dim=2)
    oracle = TeacherOracle(teacher, budget=5, white_box=False)
    with pytest.raises(HintUnavailable):
        oracle.query(0, None, want_hint=True)
    assert teacher.forward_calls == 0
    assert oracle.teacher_calls == 0


def test_white_box_needs_a_hint_layer():
    with pytest.raises(InvalidInput):
        TeacherOracle(_table_teacher(hint_dim=0), budget=5, white_box=True)


def test_white_box_returns_hints(mlp_teacher):
    oracle = TeacherOracle(mlp_teacher, budget=2, white_box=True)
    x = np.array([[0.5, -1.0, 2.0, 0.1], [1.0, 1.0, 1.0, 1.0]])
    logits, hints = oracle.query_batch([10, 11], x, want_hint=True)
    cache = mlp_teacher.model.forward(x)
    np.testing.assert_allclose(logits, cache.logits)
    np.testing.assert_allclose(hints, cache.hint)
    assert hints.shape == (2, mlp_teacher.hint_dim)


def test_mlp_teacher_needs_features(mlp_teacher):
    oracle = TeacherOracle(mlp_teacher, budget=2)
    with pytest.raises(InvalidInput):
        oracle.query(0, None)


def test_warm_spends_once(mlp_teacher):
    oracle = TeacherOracle(mlp_teacher, budget=4)
    x = np.arange(16, dtype=float).reshape(4, 4) / 10.0
    assert oracle.warm([0, 1, 2, 3], x) == 4
    assert oracle.warm([0, 1, 2, 3], x) == 0
    assert mlp_teacher.forward_calls == 4


def test_cache_persist_round_trip(tmp_path, mlp_teacher):
    oracle = TeacherOracle(mlp_teacher, budget=3, white_box=True)
    x = np.linspace(-1, 1, 12).reshape(3, 4)
    oracle.query_batch([7, 3, 9], x, want_hint=True)
    path = str(tmp_path / "teacher.ftic")
    oracle.cache.persist(path)

    loaded = TeacherCache.load(path, num_classes=3, fingerprint=mlp_teacher.fingerprint())
    assert loaded.ids() == [3, 7, 9]
    assert loaded.hint_dim == mlp_teacher.hint_dim
    for sample_id in (3, 7, 9):
        np.testing.assert_array_equal(loaded.get(sample_id)[0], oracle.cache.get(sample_id)[0])
        np.testing.assert_array_equal(loaded.get(sample_id)[1], oracle.cache.get(sample_id)[1])

    reused = TeacherOracle(mlp_teacher, budget=3, white_box=True, cache=loaded)
    before = mlp_teacher.forward_calls
    reused.query(7, x[0])
    assert mlp_teacher.forward_calls == before
    assert reused.ledger.preloaded == 3


def test_preloaded_cache_counts_against_budget(tmp_path):
    teacher = _table_teacher(num_ids=6)
    oracle = TeacherOracle(teacher, budget=4)
    for i in range(4):
        oracle.query(i, None)
    path = str(tmp_path / "c.ftic")
    oracle.cache.persist(path)
    with pytest.raises(BudgetExhausted):
        TeacherOracle(teacher, budget=3, cache=TeacherCache.load(path))
    resumed = TeacherOracle(teacher, budget=4, cache=TeacherCache.load(path))
    with pytest.raises(BudgetExhausted):
        resumed.query(5, None)


def test_truncated_cache_is_corrupt(tmp_path):
    cache = TeacherCache(3)
    cache.put(0, [1.0, 2.0, 3.0])
    path = tmp_path / "c.ftic"
    cache.persist(str(path))
    blob = path.read_bytes()
    path.write_bytes(blob[:-10])
    with pytest.raises(CacheCorrupt):
        TeacherCache.load(str(path))


def test_flipped_byte_is_corrupt(tmp_path):
    cache = TeacherCache(3)
    cache.put(0, [1.0, 2.0, 3.0])
    path = tmp_path / "c.ftic"
    cache.persist(str(path))
    blob = bytearray(path.read_bytes())
    blob[20] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(CacheCorrupt):
        TeacherCache.load(str(path))


def test_class_count_mismatch_is_corrupt(tmp_path):
    cache = TeacherCache(3)
    cache.put(0, [1.0, 2.0, 3.0])
    path = str(tmp_path / "c.ftic")
    cache.persist(path)
    with pytest.raises(CacheCorrupt):
        TeacherCache.load(path, num_classes=4)
    with pytest.raises(CacheCorrupt):
        TeacherOracle(_table_teacher(num_classes=4), budget=5, cache=TeacherCache.load(path))


def test_fingerprint_mismatch(tmp_path, caplog):
    cache = TeacherCache(3, fingerprint="a" * 64)
    cache.put(0, [1.0, 2.0, 3.0])
    path = str(tmp_path / "c.ftic")
    cache.persist(path)
    with pytest.raises(TeacherMismatch):
        TeacherCache.load(path, fingerprint="b" * 64)
    with caplog.at_level(logging.WARNING):
        loaded = TeacherCache.load(path, fingerprint="b" * 64, allow_mismatch=True)
    assert len(loaded) == 1
    assert "override flag" in caplog.text


def test_oracle_rejects_cache_of_another_teacher(mlp_teacher):
    other = MlpTeacher(MlpModel.initialize((4, 6, 3), RngStream(6)))
    cache = TeacherCache(3, fingerprint=other.fingerprint())
    cache.put(0, [1.0, 2.0, 3.0])
    with pytest.raises(CacheCorrupt):
        TeacherOracle(mlp_teacher, budget=3, cache=cache)
    assert TeacherOracle(mlp_teacher, budget=3, cache=cache, allow_mismatch=True).teacher_calls == 1
    matching = TeacherCache(3, fingerprint=mlp_teacher.fingerprint())
    assert TeacherOracle(mlp_teacher, budget=3, cache=matching).teacher_calls == 0


def test_cache_rejects_dimension_drift():
    cache = TeacherCache(3, hint_dim=2)
    with pytest.raises(CacheCorrupt):
        cache.put(0, [1.0, 2.0])
    with pytest.raises(CacheCorrupt):
        cache.put(0, [1.0, 2.0, 3.0])
    with pytest.raises(CacheCorrupt):
        cache.put(0, [1.0, 2.0, 3.0], [1.0])
    with pytest.raises(InvalidInput):
        TeacherCache(3).hints_for([0])
    with pytest.raises(InvalidInput):
        TeacherCache(3).logits_for([0])
    with pytest.raises(InvalidInput):
        TeacherCache(3).persist("unused.ftic")


def test_lookup_table_csv_round_trip(tmp_path):
    teacher = _table_teacher(num_ids=4, num_classes=3, hint_dim=2)
    teacher._logits[2] = np.array([0.1, 1 / 3, -2e-300])
    path = str(tmp_path / "table.csv")
    teacher.to_csv(path)
    loaded = LookupTableTeacher.from_csv(path)
    assert loaded.num_classes == 3
    assert loaded.hint_dim == 2
    assert loaded.fingerprint() == teacher.fingerprint()
    logits, hint = loaded.infer(2, None)
    np.testing.assert_array_equal(logits, [0.1, 1 / 3, -2e-300])
    np.testing.assert_array_equal(hint, [2.0, 2.0])


def test_lookup_table_missing_id():
    with pytest.raises(InvalidInput):
        _table_teacher().infer(99, None)


def test_fingerprint_tracks_weights(mlp_teacher):
    other = MlpTeacher(mlp_teacher.model.copy())
    assert other.fingerprint() == mlp_teacher.fingerprint()
    other.model.params["b0"][0] += 1.0
    assert other.fingerprint() != mlp_teacher.fingerprint()
