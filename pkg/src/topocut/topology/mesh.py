"""Surface extraction and mesh utilities for the reconstruction pipeline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc
from skimage.measure import marching_cubes

from .field import SdfField


@dataclass
class SurfaceMesh:
    vertices: np.ndarray  # (V, 3) world coordinates
    faces: np.ndarray     # (F, 3) int vertex indices

    @property
    def empty(self) -> bool:
        return self.faces.shape[0] == 0


def extract_mesh(field: SdfField) -> SurfaceMesh:
    """Zero-level surface of the field. A field with one sign yields an empty
    mesh rather than an error (the object may be fully carved away)."""
    vals = field.values
    if vals.min() >= 0.0 or vals.max() <= 0.0:
        return SurfaceMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    verts, faces, _, _ = marching_cubes(vals, level=0.0, method="lorensen")
    verts = verts * field.cell + field.origin
    return SurfaceMesh(np.ascontiguousarray(verts, dtype=np.float64),
                       np.ascontiguousarray(faces, dtype=np.int64))


def _vertex_adjacency(mesh: SurfaceMesh):
    f = mesh.faces
    edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=0)
    # symmetrize and dedupe
    edges = np.concatenate([edges, edges[:, ::-1]], axis=0)
    edges = np.unique(edges, axis=0)
    return edges


def smooth_mesh(mesh: SurfaceMesh, alpha: float = 0.5, iters: int = 10) -> SurfaceMesh:
    """Neighbor-averaging relaxation: v += alpha * (mean(neighbors) - v)."""
    if mesh.empty or iters == 0:
        return SurfaceMesh(mesh.vertices.copy(), mesh.faces.copy())
    edges = _vertex_adjacency(mesh)
    nv = mesh.vertices.shape[0]
    deg = np.bincount(edges[:, 0], minlength=nv).astype(np.float64)
    deg[deg == 0] = 1.0
    verts = mesh.vertices.copy()
    for _ in range(iters):
        acc = np.zeros_like(verts)
        np.add.at(acc, edges[:, 0], verts[edges[:, 1]])
        verts += alpha * (acc / deg[:, None] - verts)
    return SurfaceMesh(verts, mesh.faces.copy())


def mesh_components(mesh: SurfaceMesh) -> list[SurfaceMesh]:
    """Split into connected pieces, largest face count first.

    Vertices shared between faces define connectivity. Ties on face count
    break on the smallest original vertex index so the order is stable.
    """
    if mesh.empty:
        return []
    edges = _vertex_adjacency(mesh)
    nv = mesh.vertices.shape[0]
    graph = coo_matrix((np.ones(edges.shape[0]), (edges[:, 0], edges[:, 1])), shape=(nv, nv))
    n_comp, vlabel = _cc(graph, directed=False)
    flabel = vlabel[mesh.faces[:, 0]]
    out = []
    order = []
    for c in range(n_comp):
        fsel = flabel == c
        fcount = int(np.count_nonzero(fsel))
        if fcount == 0:
            continue  # isolated vertex, no faces
        vsel = np.flatnonzero(vlabel == c)
        order.append((-fcount, int(vsel.min()), len(out)))
        remap = np.full(nv, -1, dtype=np.int64)
        remap[vsel] = np.arange(vsel.size)
        out.append(SurfaceMesh(mesh.vertices[vsel].copy(), remap[mesh.faces[fsel]]))
    order.sort()
    return [out[i] for (_, _, i) in order]


def export_obj(mesh: SurfaceMesh, path) -> None:
    """Plain ASCII OBJ, 1-based face indices."""
    with open(path, "w") as f:
        for v in mesh.vertices:
            f.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for face in mesh.faces:
            f.write(f"f {face[0] + 1} {face[1] + 1} {face[2] + 1}\n")
