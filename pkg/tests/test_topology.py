from __future__ import annotations

import numpy as np
import pytest

from topocut import TopologyConfig
from topocut.topology import (
    SdfField,
    assign_clusters,
    carve_swept_volume,
    discover_topology,
    export_obj,
    extract_mesh,
    mesh_components,
    particle_sdf_field,
    persist_cluster_ids,
    smooth_mesh,
)


def _lattice_box(lo, hi, spacing):
    ax = [np.arange(l, h + spacing / 2, spacing) for l, h in zip(lo, hi)]
    g = np.meshgrid(*ax, indexing="ij")
    return np.stack([a.ravel() for a in g], axis=1)


def _two_sphere_cloud(gap=0.3, r=0.08, spacing=0.015):
    box = _lattice_box((0.3 - r,) * 3, (0.3 + r,) * 3, spacing)
    a = box[np.linalg.norm(box - 0.3, axis=1) <= r]
    b = a.copy()
    b[:, 0] += gap
    return np.vstack([a, b])


def test_field_matches_brute_force_min_over_particles(rng):
    pts = rng.uniform(0.3, 0.5, (40, 3))
    r_p, cell = 0.03, 0.02
    field = particle_sdf_field(pts, r_p, cell)
    nodes = field.node_positions()
    brute = np.min(np.linalg.norm(nodes[:, None, :] - pts[None, :, :], axis=2),
                   axis=1) - r_p
    assert np.array_equal(field.values.ravel(), brute) or \
        np.allclose(field.values.ravel(), brute, atol=1e-12)


def test_field_lattice_snaps_to_cell_multiples(rng):
    pts = rng.uniform(0.31, 0.37, (20, 3))
    field = particle_sdf_field(pts, 0.02, 0.015)
    ratio = field.origin / field.cell
    assert np.allclose(ratio, np.round(ratio), atol=1e-9)
    shifted = particle_sdf_field(pts + 0.0004, 0.02, 0.015)
    # a sub-cell shift of the cloud cannot move the lattice
    assert np.allclose(shifted.origin, field.origin)


def test_field_rejects_empty_and_bad_params():
    with pytest.raises(ValueError):
        particle_sdf_field(np.zeros((0, 3)), 0.02, 0.02)
    with pytest.raises(ValueError):
        particle_sdf_field(np.zeros((3, 3)), -1.0, 0.02)


def test_carve_matches_brute_force_box_subtraction(rng):
    pts = rng.uniform(0.3, 0.6, (60, 3))
    r_p, cell = 0.03, 0.02
    field = particle_sdf_field(pts, r_p, cell)
    before = field.values.copy()

    theta = 0.4
    R = np.array([[np.cos(theta), -np.sin(theta), 0],
                  [np.sin(theta), np.cos(theta), 0],
                  [0, 0, 1.0]])
    rots = np.stack([np.eye(3), R])
    trans = np.array([[0.45, 0.45, 0.45], [0.5, 0.42, 0.48]])
    half = np.array([[0.1, 0.05, 0.01], [0.1, 0.05, 0.01]])
    carve_swept_volume(field, rots, trans, half, pad=r_p + cell)

    nodes = field.node_positions()
    swept = np.full(nodes.shape[0], np.inf)
    for R_s, t_s, h_s in zip(rots, trans, half):
        local = np.abs((nodes - t_s) @ R_s) - h_s
        outside = np.linalg.norm(np.maximum(local, 0), axis=1)
        inside = np.minimum(local.max(axis=1), 0)
        swept = np.minimum(swept, outside + inside)
    expect = np.maximum(before.ravel(), -swept)
    assert np.allclose(field.values.ravel(), expect, atol=1e-12)


def test_carve_with_no_poses_is_a_no_op(rng):
    pts = rng.uniform(0.3, 0.5, (30, 3))
    field = particle_sdf_field(pts, 0.03, 0.02)
    before = field.values.copy()
    n = carve_swept_volume(field, np.zeros((0, 3, 3)), np.zeros((0, 3)),
                           np.zeros((0, 3)), pad=0.05)
    assert n == 0
    assert np.array_equal(field.values, before)


def test_two_disjoint_spheres_make_two_components():
    pts = _two_sphere_cloud()
    field = particle_sdf_field(pts, 0.025, 0.02)
    mesh = extract_mesh(field)
    comps = mesh_components(mesh)
    assert len(comps) == 2
    assert sum(c.vertices.shape[0] for c in comps) == mesh.vertices.shape[0]


def test_plane_carve_splits_block_into_two():
    pts = _lattice_box((0.3, 0.3, 0.3), (0.7, 0.5, 0.5), 0.015)
    field = particle_sdf_field(pts, 0.03, 0.02)
    assert len(mesh_components(extract_mesh(field))) == 1
    rots = np.eye(3)[None]
    trans = np.array([[0.5, 0.4, 0.4]])
    half = np.array([[0.01, 0.4, 0.4]])  # wall across x
    carve_swept_volume(field, rots, trans, half, pad=0.05)
    assert len(mesh_components(extract_mesh(field))) == 2


def test_k_parallel_slices_make_k_plus_one_components():
    pts = _lattice_box((0.2, 0.3, 0.3), (0.8, 0.45, 0.45), 0.015)
    field = particle_sdf_field(pts, 0.03, 0.02)
    k = 3
    for i in range(k):
        x = 0.2 + 0.6 * (i + 1) / (k + 1)
        carve_swept_volume(field, np.eye(3)[None], np.array([[x, 0.38, 0.38]]),
                           np.array([[0.012, 0.4, 0.4]]), pad=0.05)
    comps = mesh_components(extract_mesh(field))
    assert len(comps) == k + 1


def test_smooth_mesh_contracts_but_keeps_topology():
    pts = _two_sphere_cloud()
    mesh = extract_mesh(particle_sdf_field(pts, 0.025, 0.02))
    sm = smooth_mesh(mesh, alpha=0.5, iters=10)
    assert sm.vertices.shape == mesh.vertices.shape
    assert np.array_equal(sm.faces, mesh.faces)
    assert len(mesh_components(sm)) == len(mesh_components(mesh))
    assert smooth_mesh(mesh, iters=0).vertices is not mesh.vertices
    assert np.array_equal(smooth_mesh(mesh, iters=0).vertices, mesh.vertices)


def test_export_obj_format(tmp_path, rng):
    pts = rng.uniform(0.3, 0.4, (30, 3))
    mesh = extract_mesh(particle_sdf_field(pts, 0.03, 0.02))
    path = tmp_path / "mesh.obj"
    export_obj(mesh, path)
    lines = path.read_text().strip().splitlines()
    v_lines = [l for l in lines if l.startswith("v ")]
    f_lines = [l for l in lines if l.startswith("f ")]
    assert len(v_lines) == mesh.vertices.shape[0]
    assert len(f_lines) == mesh.faces.shape[0]
    idx = np.array([[int(tok) for tok in l.split()[1:]] for l in f_lines])
    assert idx.min() >= 1 and idx.max() <= len(v_lines)  # 1-based, in range


# ---------------------------------------------------------------- clusters

def test_assign_clusters_covers_block():
    pts = _lattice_box((0.3, 0.3, 0.3), (0.6, 0.45, 0.45), 0.015)
    field = particle_sdf_field(pts, 0.03, 0.02)
    comps = mesh_components(extract_mesh(field))
    labels = assign_clusters(pts, field, comps, tau=0.03)
    frac = np.mean(labels >= 0)
    assert frac >= 0.95
    assert set(np.unique(labels[labels >= 0])) == {0}


def test_assign_clusters_separates_spheres():
    pts = _two_sphere_cloud()
    field = particle_sdf_field(pts, 0.025, 0.02)
    comps = mesh_components(extract_mesh(field))
    labels = assign_clusters(pts, field, comps, tau=0.03)
    n = len(pts) // 2
    left, right = labels[:n], labels[n:]
    assert np.all(left[left >= 0] == left[left >= 0][0])
    assert np.all(right[right >= 0] == right[right >= 0][0])
    assert left[left >= 0][0] != right[right >= 0][0]


def test_persist_ids_idempotent_when_unchanged():
    prev = np.array([4, 4, 4, 7, 7, 7], dtype=np.int32)
    fresh = np.array([1, 1, 1, 0, 0, 0], dtype=np.int32)
    ids, info = persist_cluster_ids(prev, fresh)
    assert np.array_equal(ids, prev)
    ids2, _ = persist_cluster_ids(ids, fresh)
    assert np.array_equal(ids2, ids)


def test_persist_ids_split_majority_keeps_id():
    prev = np.array([3, 3, 3, 3, 3], dtype=np.int32)
    fresh = np.array([0, 0, 0, 1, 1], dtype=np.int32)  # 3:2 split
    ids, info = persist_cluster_ids(prev, fresh)
    assert list(ids[:3]) == [3, 3, 3]       # majority inherits
    assert ids[3] == ids[4] and ids[3] != 3  # minority minted fresh
    assert ids[3] == 0  # smallest free id wins


def test_persist_ids_stable_under_particle_reordering(rng):
    prev = np.array([2] * 6 + [5] * 4, dtype=np.int32)
    fresh = np.array([0, 0, 0, 0, 1, 1, 2, 2, 2, 2], dtype=np.int32)
    ids, _ = persist_cluster_ids(prev, fresh)
    perm = rng.permutation(10)
    ids_p, _ = persist_cluster_ids(prev[perm], fresh[perm])
    assert np.array_equal(ids_p, ids[perm])


def test_persist_ids_unassigned_particles_stay_unassigned():
    prev = np.array([1, 1, 1, 1], dtype=np.int32)
    fresh = np.array([0, 0, -1, 0], dtype=np.int32)
    ids, _ = persist_cluster_ids(prev, fresh)
    assert ids[2] == -1
    assert np.all(ids[[0, 1, 3]] == 1)


def test_persist_ids_respects_max_pool():
    prev = np.arange(31, dtype=np.int32)
    fresh = np.arange(31, dtype=np.int32)
    ids, _ = persist_cluster_ids(prev, fresh, max_clusters=32)
    assert np.array_equal(ids, prev)
    # a split that would mint id 32 must fail loudly rather than wrap
    prev2 = np.zeros(4, dtype=np.int32)
    fresh2 = np.array([0, 0, 1, 1], dtype=np.int32)
    with pytest.raises(RuntimeError):
        persist_cluster_ids(np.concatenate([prev, prev2 + 31]),
                            np.concatenate([fresh, fresh2 + 31]),
                            max_clusters=32)


# ---------------------------------------------------------------- pipeline

def test_discover_topology_end_to_end():
    pts = _two_sphere_cloud()
    prev = np.full(len(pts), -1, dtype=np.int32)
    prev[:] = 0  # everything starts as one object
    state = discover_topology(pts, np.ones(len(pts), dtype=bool), prev,
                              r_p=0.025, base_cell=0.02, config=TopologyConfig())
    assert len(state.clusters) == 2
    assert state.assigned_fraction >= 0.95
    ids = sorted(c.cluster_id for c in state.clusters)
    assert ids[0] == 0  # majority keeps the original id
    for c in state.clusters:
        assert c.particle_count > 0
        assert c.points.shape[1] == 3


def test_discover_topology_with_swept_split():
    pts = _lattice_box((0.3, 0.3, 0.3), (0.7, 0.45, 0.45), 0.015)
    prev = np.zeros(len(pts), dtype=np.int32)
    swept = (np.eye(3)[None], np.array([[0.5, 0.38, 0.38]]),
             np.array([[0.008, 0.4, 0.4]]))
    state = discover_topology(pts, np.ones(len(pts), dtype=bool), prev,
                              r_p=0.028, base_cell=0.02, config=TopologyConfig(),
                              swept=swept)
    assert len(state.clusters) == 2
    sides = {int(np.sign(np.mean(c.points[:, 0] - 0.5))) for c in state.clusters}
    assert sides == {-1, 1}
