"""Classical point-cloud similarity metrics and assignment utilities.

These are the comparison baselines for the descriptor reward and the
building blocks for label matching. Chamfer is squared by convention here;
Hausdorff and the transport distance are plain Euclidean.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from .config import RewardParams
from .spectral import farthest_point_sampling, reward_from_distance


def chamfer_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared nearest-neighbor distance, both directions."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("chamfer distance needs non-empty clouds")
    da = cKDTree(b).query(a, k=1)[0]
    db = cKDTree(a).query(b, k=1)[0]
    return float((da ** 2).mean() + (db ** 2).mean())


def hausdorff_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Largest nearest-neighbor distance in either direction."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("hausdorff distance needs non-empty clouds")
    da = cKDTree(b).query(a, k=1)[0]
    db = cKDTree(a).query(b, k=1)[0]
    return float(max(da.max(), db.max()))


def earth_mover_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Exact minimum-cost perfect matching, mean Euclidean length.

    Solved as an assignment problem, so clouds must be equal size; this is
    the exact optimum, not a Sinkhorn-style approximation.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[0] != b.shape[0]:
        raise ValueError("transport distance here requires equal-size clouds")
    if a.shape[0] == 0:
        raise ValueError("empty clouds")
    cost = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())


def hungarian_match(cost: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimum-cost assignment, canonicalized.

    Among all optimal assignments, returns the lexicographically smallest
    column sequence (row 0's column first, then row 1's, ...). Deterministic
    regardless of how the underlying solver breaks ties, at the price of one
    extra solve per row.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost must be a matrix")
    n_rows, n_cols = cost.shape
    if n_rows > n_cols:
        raise ValueError("more rows than columns; transpose or pad the cost")
    rows, cols = linear_sum_assignment(cost)
    best_total = float(cost[rows, cols].sum())
    big = np.abs(cost).max() * (n_rows + 1) + 1.0
    work = cost.copy()
    chosen = np.empty(n_rows, dtype=np.int64)
    taken = np.zeros(n_cols, dtype=bool)
    remaining_total = best_total
    for r in range(n_rows):
        found = False
        for c in np.flatnonzero(~taken):
            # force r -> c, check the rest still reaches the same optimum
            saved = work[r].copy()
            work[r] = big
            work[r, c] = cost[r, c]
            rr, cc = linear_sum_assignment(work)
            total = float(cost[rr, cc].sum())
            if total <= remaining_total + 1e-9 * max(1.0, abs(remaining_total)):
                chosen[r] = c
                taken[c] = True
                # freeze the choice for subsequent rows
                work[r] = big
                work[r, c] = cost[r, c] - 2 * big  # strongly prefer the fixed pair
                found = True
                break
            work[r] = saved
        if not found:
            raise RuntimeError("assignment canonicalization failed")
    return chosen, best_total


def binary_cross_entropy(target: np.ndarray, prob: np.ndarray) -> np.ndarray:
    p = np.clip(prob, 1e-12, 1.0 - 1e-12)
    t = np.asarray(target, dtype=np.float64)
    return -(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))


def topo_matching_loss(gt_labels: np.ndarray, probs: np.ndarray) -> float:
    """Permutation-invariant segmentation loss.

    Each ground-truth label is matched to the prediction channel minimizing
    the mean per-point binary cross entropy of its indicator; the loss is
    the matched total divided by the channel count, so a perfect one-hot
    prediction scores ~0 under any channel permutation.
    """
    gt_labels = np.asarray(gt_labels)
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    n, k = probs.shape
    if gt_labels.shape[0] != n:
        raise ValueError("labels and probabilities must align per point")
    classes = np.unique(gt_labels)
    if classes.size > k:
        raise ValueError("more ground-truth classes than prediction channels")
    cost = np.empty((classes.size, k))
    for i, cls in enumerate(classes):
        indicator = (gt_labels == cls).astype(np.float64)
        cost[i] = binary_cross_entropy(indicator[:, None], probs).mean(axis=0)
    assign, total = hungarian_match(cost)
    return float(total / k)


def center_cloud(points: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    return pts - pts.mean(axis=0)


_METRICS = {
    "chamfer": chamfer_distance,
    "hausdorff": hausdorff_distance,
    "emd": earth_mover_distance,
}


def baseline_fragment_scores(fragments: list, goal_clouds: list, params: RewardParams,
                             metric: str, num_point: int = 512):
    """Distance-metric counterpart of the descriptor reward.

    Fragments and goal are subsampled to a common size, centered (no
    rotation alignment; these metrics are pose-sensitive by nature), scored
    by the chosen metric, and pushed through the same reward mapping. Used
    to compare reward behavior, not as a training signal.
    """
    if metric not in _METRICS:
        raise ValueError(f"metric must be one of {sorted(_METRICS)}")
    fn = _METRICS[metric]
    rewards = []
    distances = []
    for frag in fragments:
        frag = np.atleast_2d(np.asarray(frag, dtype=np.float64))
        n_i = min(num_point, frag.shape[0], min(g.shape[0] for g in goal_clouds))
        if n_i < 1:
            distances.append(float("inf"))
            rewards.append(0.0)
            continue
        fsub = center_cloud(frag[farthest_point_sampling(frag, n_i)])
        best = float("inf")
        for g in goal_clouds:
            g = np.asarray(g, dtype=np.float64)
            gsub = center_cloud(g[farthest_point_sampling(g, n_i)])
            best = min(best, fn(fsub, gsub))
        distances.append(best)
        rewards.append(reward_from_distance(best, params))
    total = params.kappa * float(sum(rewards))
    return {"metric": metric, "distances": distances, "rewards": rewards, "total": total}
