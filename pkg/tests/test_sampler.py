import itertools

import pytest

from src.errors import InvalidInput, TooLarge
from src.numerics.rng import RngStream
from src.sampler.group_sampler import (
    AUDIT_DRAWS, ComparisonGroup, GroupBatcher, SamplerConfig, count_groups, enumerate_groups, sample_groups,
)


def _brute_force(ids, k):
    """Canonical keys of every ordered arrangement, split after ceil(k/2)."""
    size_a = (k + 1) // 2
    return {ComparisonGroup(p[:size_a], p[size_a:]).canonical() for p in itertools.permutations(ids, k)}


@pytest.mark.parametrize("n, k, expected", [(4, 2, 6), (5, 3, 30), (4, 4, 3), (1600, 2, 1_279_200), (3, 4, 0)])
def test_count_groups(n, k, expected):
    assert count_groups(n, k) == expected


def test_enumeration_small_example():
    groups = enumerate_groups([10, 11, 12, 13], 2)
    assert [(g.group_a, g.group_b) for g in groups] == [
        ((10,), (11,)), ((10,), (12,)), ((10,), (13,)), ((11,), (12,)), ((11,), (13,)), ((12,), (13,))]
    assert len(enumerate_groups(range(4), 2, oriented=True)) == 12


def test_enumeration_matches_brute_force():
    for n in range(2, 9):
        ids = list(range(100, 100 + n))
        for k in range(2, min(n, 6) + 1):
            groups = enumerate_groups(ids, k)
            keys = [g.canonical() for g in groups]
            assert len(keys) == len(set(keys)) == count_groups(n, k)
            assert set(keys) == _brute_force(ids, k)


def test_sample_groups_dense_regime_covers_everything():
    ids = list(range(6))
    cfg = SamplerConfig(k=3, cap=10_000, seed=4)
    groups = list(sample_groups(ids, cfg))
    assert len(groups) == count_groups(6, 3)
    assert {g.canonical() for g in groups} == _brute_force(ids, 3)


def test_sample_groups_rejection_regime_is_distinct():
    ids = list(range(8))
    groups = list(sample_groups(ids, SamplerConfig(k=2, cap=10, seed=1)))
    assert len(groups) == 10
    assert len({g.canonical() for g in groups}) == 10


def test_sample_groups_shape_and_membership():
    ids = list(range(50, 80))
    for k in (2, 3, 4, 6):
        for group in itertools.islice(sample_groups(ids, SamplerConfig(k=k, seed=k)), 200):
            assert len(group.group_a) == (k + 1) // 2
            assert len(group.group_b) == k // 2
            assert not set(group.group_a) & set(group.group_b)
            assert set(group.group_a) | set(group.group_b) <= set(ids)


def test_sample_groups_is_deterministic():
    ids = list(range(40))
    cfg = SamplerConfig(k=3, cap=500, seed=9)
    assert list(sample_groups(ids, cfg)) == list(sample_groups(ids, cfg))
    other = list(sample_groups(ids, SamplerConfig(k=3, cap=500, seed=10)))
    assert other != list(sample_groups(ids, cfg))


def test_capped_stream_length():
    groups = list(sample_groups(range(1600), SamplerConfig(k=2, cap=2000, seed=0)))
    assert len(groups) == 2000
    assert len({g.canonical() for g in groups}) == 2000


@pytest.mark.slow
def test_default_cap_on_large_budget():
    groups = sample_groups(range(1600), SamplerConfig(k=2, seed=0))
    assert sum(1 for _ in groups) == 100_000


def test_sampler_errors():
    with pytest.raises(TooLarge):
        enumerate_groups(range(200), 4)
    with pytest.raises(InvalidInput):
        enumerate_groups([1, 1, 2], 2)
    with pytest.raises(InvalidInput):
        list(sample_groups([1, 2], SamplerConfig(k=3)))
    with pytest.raises(InvalidInput):
        SamplerConfig(k=1)


def test_batcher_restarts_exhausted_streams():
    batcher = GroupBatcher(range(3), SamplerConfig(k=2, seed=2))
    batcher.start_epoch(0)
    batch = batcher.next_batch(7)
    assert len(batch) == 7
    assert {g.canonical() for g in batch} == _brute_force(range(3), 2)


def test_batcher_epochs_and_audit():
    first = GroupBatcher(range(20), SamplerConfig(k=3, seed=5))
    second = GroupBatcher(range(20), SamplerConfig(k=3, seed=5))
    first.start_epoch(0)
    second.start_epoch(0)
    assert first.next_batch(16) == second.next_batch(16)

    first.start_epoch(1)
    second.start_epoch(2)
    assert first.next_batch(16) != second.next_batch(16)

    for _ in range(10):
        first.next_batch(16)
    assert len(first.audit) == AUDIT_DRAWS


def test_batcher_fixed_groups_replay_every_epoch():
    batcher = GroupBatcher(range(20), SamplerConfig(k=2, seed=5), resample_each_epoch=False)
    batcher.start_epoch(0)
    head = batcher.next_batch(4)
    assert batcher.next_batch(4) != head
    for epoch in (1, 2):
        batcher.start_epoch(epoch)
        assert batcher.next_batch(4) == head

    resampled = GroupBatcher(range(20), SamplerConfig(k=2, seed=5))
    resampled.start_epoch(0)
    assert resampled.next_batch(4) == head
    resampled.start_epoch(1)
    assert resampled.next_batch(4) != head


def test_child_streams_differ_per_epoch():
    root = RngStream(3).child("groups")
    assert list(root.child(0, 0).permutation(10)) != list(root.child(1, 0).permutation(10))
