"""End-to-end topology pass: damage field -> surfaces -> persistent fragments."""

from __future__ import annotations

from dataclasses import dataclass, field as dfield

import numpy as np

from ..config import TopologyConfig
from ..spectral import farthest_point_sampling
from .clusters import assign_clusters, persist_cluster_ids
from .field import SdfField, carve_swept_volume, particle_sdf_field
from .mesh import SurfaceMesh, extract_mesh, mesh_components, smooth_mesh


@dataclass
class ClusterEntry:
    cluster_id: int
    points: np.ndarray        # downsampled representative cloud
    particle_count: int
    mesh: SurfaceMesh


@dataclass
class TopologyState:
    clusters: list
    assigned_fraction: float
    field: SdfField
    labels: np.ndarray        # persistent id per input point (-1 unassigned)
    warnings: list = dfield(default_factory=list)

    def cluster_ids(self) -> list:
        return [c.cluster_id for c in self.clusters]

    def cloud_of(self, cluster_id: int) -> np.ndarray:
        for c in self.clusters:
            if c.cluster_id == cluster_id:
                return c.points
        raise KeyError(f"no cluster with id {cluster_id}")


def discover_topology(positions: np.ndarray, alive: np.ndarray, prev_ids: np.ndarray,
                      r_p: float, base_cell: float, config: TopologyConfig,
                      swept=None, point_budget: int = 2048) -> TopologyState:
    """Rebuild fragment structure from the current particle state.

    positions/alive/prev_ids align per particle; alive excludes damaged
    material. base_cell is the solver's grid spacing (the reconstruction
    lattice scales it by config.field_cell_factor). swept is an optional
    (rotations, translations, half_extents) triple of blade poses to
    subtract before meshing. Fragment identity is inherited from prev_ids
    by the split-majority rule. Each fragment stores a farthest-point
    subsample of at most point_budget positions; rewards are computed from
    exactly these stored clouds so downstream scores can be reproduced from
    a saved state alone.
    """
    config.validate()
    positions = np.asarray(positions, dtype=np.float64)
    alive = np.asarray(alive, dtype=bool)
    prev_ids = np.asarray(prev_ids, dtype=np.int64)
    if not alive.any():
        return TopologyState([], 0.0,
                             SdfField(np.full((2, 2, 2), np.inf), np.zeros(3), 1.0),
                             np.full(positions.shape[0], -1, dtype=np.int64),
                             ["no intact material"])

    cell = config.field_cell_factor * base_cell
    fld = particle_sdf_field(positions[alive], r_p, cell, config.margin_cells)
    if swept is not None:
        rots, trans, halfs = swept
        carve_swept_volume(fld, rots, trans, halfs, pad=r_p + cell)

    mesh = extract_mesh(fld)
    mesh = smooth_mesh(mesh, config.smooth_alpha, config.smooth_iters)
    comps = mesh_components(mesh)

    tau = config.tau_factor * cell
    frag_labels_alive = assign_clusters(positions[alive], fld, comps, tau)
    fresh = np.full(positions.shape[0], -1, dtype=np.int64)
    fresh[alive] = frag_labels_alive
    ids, comp_to_pid = persist_cluster_ids(prev_ids, fresh, config.max_clusters)

    clusters = []
    for ci, comp in enumerate(comps):
        if ci not in comp_to_pid:
            continue
        pid = comp_to_pid[ci]
        sel = np.flatnonzero(ids == pid)
        if sel.size == 0:
            continue
        pts = positions[sel]
        if sel.size > point_budget:
            pts = pts[farthest_point_sampling(pts, point_budget)]
        clusters.append(ClusterEntry(pid, np.ascontiguousarray(pts), int(sel.size), comp))
    clusters.sort(key=lambda c: c.cluster_id)

    n_alive = int(alive.sum())
    assigned = float((ids[alive] >= 0).sum()) / n_alive if n_alive else 0.0
    warn = []
    if assigned < config.min_assign_fraction:
        warn.append(f"only {assigned:.1%} of intact particles assigned to fragments")
    return TopologyState(clusters, assigned, fld, ids, warn)
