from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from topocut.metrics import (
    chamfer_distance,
    earth_mover_distance,
    hausdorff_distance,
    hungarian_match,
    topo_matching_loss,
)


def _brute_chamfer(a, b):
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    return d2.min(axis=1).mean() + d2.min(axis=0).mean()


def _brute_hausdorff(a, b):
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    return max(d.min(axis=1).max(), d.min(axis=0).max())


def _brute_emd(a, b):
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    best = math.inf
    for perm in itertools.permutations(range(len(b))):
        best = min(best, d[np.arange(len(a)), list(perm)].mean())
    return best


cloud = st.integers(2, 6).flatmap(
    lambda n: st.lists(
        st.lists(st.floats(-5, 5, allow_nan=False, width=32), min_size=3, max_size=3),
        min_size=n, max_size=n))


@settings(max_examples=60, deadline=None)
@given(cloud, cloud)
def test_chamfer_matches_brute_force(la, lb):
    a, b = np.array(la), np.array(lb)
    assert np.isclose(chamfer_distance(a, b), _brute_chamfer(a, b), atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(cloud, cloud)
def test_hausdorff_matches_brute_force(la, lb):
    a, b = np.array(la), np.array(lb)
    assert np.isclose(hausdorff_distance(a, b), _brute_hausdorff(a, b), atol=1e-12)


def test_emd_matches_factorial_enumeration(rng):
    for n in (2, 3, 4, 5, 6):
        a = rng.normal(size=(n, 3))
        b = rng.normal(size=(n, 3))
        assert np.isclose(earth_mover_distance(a, b), _brute_emd(a, b), atol=1e-12)


def test_distances_zero_iff_identical(rng):
    a = rng.normal(size=(10, 3))
    perm = rng.permutation(10)
    assert chamfer_distance(a, a[perm]) == 0.0
    assert hausdorff_distance(a, a[perm]) == 0.0
    assert earth_mover_distance(a, a[perm]) == 0.0
    b = a.copy()
    b[0] += 0.5
    assert chamfer_distance(a, b) > 0.0
    assert hausdorff_distance(a, b) > 0.0
    assert earth_mover_distance(a, b) > 0.0


def test_distances_symmetric(rng):
    a = rng.normal(size=(8, 3))
    b = rng.normal(size=(12, 3))
    assert np.isclose(chamfer_distance(a, b), chamfer_distance(b, a), atol=1e-12)
    assert np.isclose(hausdorff_distance(a, b), hausdorff_distance(b, a), atol=1e-12)


def test_emd_requires_equal_sizes(rng):
    with pytest.raises(ValueError):
        earth_mover_distance(rng.normal(size=(4, 3)), rng.normal(size=(5, 3)))


def test_emd_triangle_inequality(rng):
    for _ in range(20):
        a, b, c = (rng.normal(size=(5, 3)) for _ in range(3))
        ab = earth_mover_distance(a, b)
        bc = earth_mover_distance(b, c)
        ac = earth_mover_distance(a, c)
        assert ac <= ab + bc + 1e-12


def test_hungarian_matches_enumeration(rng):
    cost = rng.uniform(0, 10, (7, 7))
    assign, total = hungarian_match(cost)
    best = min(cost[np.arange(7), list(p)].sum()
               for p in itertools.permutations(range(7)))
    assert np.isclose(total, best, atol=1e-12)
    assert sorted(assign) == list(range(7))  # a permutation
    assert np.isclose(cost[np.arange(7), assign].sum(), total, atol=1e-12)


def test_hungarian_dominates_random_permutations(rng):
    cost = rng.uniform(0, 5, (9, 9))
    _, total = hungarian_match(cost)
    assert total <= cost.trace() + 1e-12
    for _ in range(100):
        p = rng.permutation(9)
        assert total <= cost[np.arange(9), p].sum() + 1e-12


def test_topo_loss_zero_under_label_permutation(rng):
    n, k = 30, 4
    gt = rng.integers(0, k, n)
    probs = np.zeros((n, k))
    perm = rng.permutation(k)
    probs[np.arange(n), perm[gt]] = 1.0  # confident but relabeled
    assert np.isclose(topo_matching_loss(gt, probs), 0.0, atol=1e-9)


def test_topo_loss_uniform_predictions_give_log_k():
    gt = np.array([0, 0, 1, 1])
    probs = np.full((4, 2), 0.5)
    assert np.isclose(topo_matching_loss(gt, probs), math.log(2.0), atol=1e-9)


def test_topo_loss_penalizes_wrong_confident_labels(rng):
    gt = np.array([0, 0, 0, 1, 1, 1])
    right = np.zeros((6, 2))
    right[np.arange(6), gt] = 1.0
    half_wrong = right.copy()
    half_wrong[0] = [0.0, 1.0]  # one confidently wrong point
    assert topo_matching_loss(gt, half_wrong) > topo_matching_loss(gt, right)
