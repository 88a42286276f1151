"""Particle-to-fragment assignment and persistent cluster identity."""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .field import SdfField
from .mesh import SurfaceMesh


def assign_clusters(points: np.ndarray, field: SdfField,
                    components: list[SurfaceMesh], tau: float) -> np.ndarray:
    """Label each point with the index of the enclosing surface component.

    The interior of each component is the connected set of negative lattice
    nodes it bounds; a point joins the component of its nearest interior
    node when that node lies within tau, else it gets -1. Points swept away
    by the blade sit in carved (positive) space and fall out naturally.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    labels = np.full(points.shape[0], -1, dtype=np.int64)
    if not components or points.shape[0] == 0:
        return labels
    neg = field.values < 0.0
    if not neg.any():
        return labels
    six = ndimage.generate_binary_structure(3, 1)
    regions, _ = ndimage.label(neg, structure=six)
    idx = np.argwhere(neg)
    node_pos = idx * field.cell + field.origin
    node_region = regions[idx[:, 0], idx[:, 1], idx[:, 2]]
    tree = cKDTree(node_pos)

    # attribute each component to the region its vertices wrap; a cavity mesh
    # can share the region of its enclosing surface, in which case the larger
    # component (earlier in the ordering) keeps it
    region_to_comp: dict[int, int] = {}
    vertex_reach = field.cell * np.sqrt(3.0) * 1.001
    for ci, comp in enumerate(components):
        d, j = tree.query(comp.vertices, k=1)
        near = d <= vertex_reach
        if not near.any():
            continue
        votes = np.bincount(node_region[j[near]])
        region = int(votes.argmax())
        if region not in region_to_comp:
            region_to_comp[region] = ci

    d, j = tree.query(points, k=1)
    within = d < tau
    regs = node_region[j]
    for region, ci in region_to_comp.items():
        labels[within & (regs == region)] = ci
    return labels


def persist_cluster_ids(prev_ids: np.ndarray, fresh_labels: np.ndarray,
                        max_clusters: int = 32) -> tuple[np.ndarray, dict]:
    """Carry cluster identity across a topology pass.

    Each new component inherits the previous id held by the majority of its
    points. When a split makes several components claim the same parent, the
    one with the most of the parent's points keeps it (ties break toward the
    earlier, larger component) and the rest get the smallest ids never used
    before. Raises RuntimeError("cluster budget exceeded") past max_clusters.

    Returns (per-point persistent ids, component index -> persistent id map).
    """
    prev_ids = np.asarray(prev_ids, dtype=np.int64)
    fresh_labels = np.asarray(fresh_labels, dtype=np.int64)
    if prev_ids.shape != fresh_labels.shape:
        raise ValueError("prev_ids and fresh_labels must align per point")
    comps = np.unique(fresh_labels[fresh_labels >= 0])
    # claims[c] = (parent id, vote count)
    claims = {}
    for c in comps:
        ids, counts = np.unique(prev_ids[(fresh_labels == c) & (prev_ids >= 0)],
                                return_counts=True)
        if ids.size:
            best = counts.max()
            claims[int(c)] = (int(ids[counts == best].min()), int(best))

    winners: dict[int, int] = {}   # parent id -> component that keeps it
    for c in sorted(claims):
        parent, votes = claims[c]
        if parent not in winners:
            winners[parent] = c
        else:
            prev_c = winners[parent]
            if votes > claims[prev_c][1]:
                winners[parent] = c

    used = set(int(i) for i in np.unique(prev_ids) if i >= 0)
    assigned: dict[int, int] = {c: p for p, c in winners.items()}
    taken = used | set(assigned.values())

    def next_free():
        i = 0
        while i in taken:
            i += 1
        taken.add(i)
        return i

    for c in sorted(int(c) for c in comps):
        if c not in assigned:
            assigned[c] = next_free()

    if assigned and max(assigned.values()) >= max_clusters:
        raise RuntimeError("cluster budget exceeded")

    out = np.full(prev_ids.shape, -1, dtype=np.int64)
    for c, pid in assigned.items():
        out[fresh_labels == c] = pid
    return out, assigned
