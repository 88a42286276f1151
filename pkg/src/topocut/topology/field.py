"""Signed-distance reconstruction of the intact material.

The field is sampled on a small lattice covering the undamaged particles
plus a margin. Values are exact sphere-union distances (min over particles
of |x - p| - r_p); the acceptance oracle recomputes them with a dense numpy
broadcast, and min is rounding-free, so the two agree bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass
class SdfField:
    values: np.ndarray   # (nx, ny, nz)
    origin: np.ndarray   # world position of node (0,0,0)
    cell: float

    def node_positions(self) -> np.ndarray:
        nx, ny, nz = self.values.shape
        ax = [self.origin[a] + np.arange(n) * self.cell for a, n in ((0, nx), (1, ny), (2, nz))]
        gx, gy, gz = np.meshgrid(*ax, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)


@njit(cache=True)
def _sphere_union_sdf(nodes_x, nodes_y, nodes_z, pts, r_p, out):
    n = out.shape[0]
    m = pts.shape[0]
    for i in range(n):
        best = np.inf
        xi = nodes_x[i]
        yi = nodes_y[i]
        zi = nodes_z[i]
        for p in range(m):
            dx = xi - pts[p, 0]
            dy = yi - pts[p, 1]
            dz = zi - pts[p, 2]
            d = math.sqrt((dx * dx + dy * dy) + (dz * dz)) - r_p
            if d < best:
                best = d
        out[i] = best


def particle_sdf_field(points: np.ndarray, r_p: float, cell: float,
                       margin_cells: int = 3) -> SdfField:
    """Sample the sphere-union SDF of a particle cloud on a snapped lattice.

    The lattice origin snaps to integer multiples of the cell so repeated
    reconstructions of a static cloud land on identical node positions.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.shape[0] == 0:
        raise ValueError("cannot reconstruct a field from zero particles")
    if r_p <= 0 or cell <= 0:
        raise ValueError("r_p and cell must be positive")
    lo = np.floor(points.min(axis=0) / cell).astype(np.int64) - margin_cells
    hi = np.ceil(points.max(axis=0) / cell).astype(np.int64) + margin_cells
    shape = (hi - lo + 1).astype(np.int64)
    origin = lo.astype(np.float64) * cell
    ax = [origin[a] + np.arange(shape[a]) * cell for a in range(3)]
    gx, gy, gz = np.meshgrid(*ax, indexing="ij")
    out = np.empty(gx.size)
    _sphere_union_sdf(gx.ravel(), gy.ravel(), gz.ravel(), points, r_p, out)
    return SdfField(out.reshape(tuple(shape)), origin, cell)


@njit(cache=True)
def _carve_kernel(values, origin0, origin1, origin2, cell,
                  lo0, lo1, lo2, hi0, hi1, hi2, rots, trans, half):
    n_pose = rots.shape[0]
    for i in range(lo0, hi0):
        x = origin0 + i * cell
        for j in range(lo1, hi1):
            y = origin1 + j * cell
            for k in range(lo2, hi2):
                z = origin2 + k * cell
                best = np.inf
                for s in range(n_pose):
                    px = x - trans[s, 0]
                    py = y - trans[s, 1]
                    pz = z - trans[s, 2]
                    lx = rots[s, 0, 0] * px + rots[s, 1, 0] * py + rots[s, 2, 0] * pz
                    ly = rots[s, 0, 1] * px + rots[s, 1, 1] * py + rots[s, 2, 1] * pz
                    lz = rots[s, 0, 2] * px + rots[s, 1, 2] * py + rots[s, 2, 2] * pz
                    qx = abs(lx) - half[s, 0]
                    qy = abs(ly) - half[s, 1]
                    qz = abs(lz) - half[s, 2]
                    ox = qx if qx > 0.0 else 0.0
                    oy = qy if qy > 0.0 else 0.0
                    oz = qz if qz > 0.0 else 0.0
                    inside = qx
                    if qy > inside:
                        inside = qy
                    if qz > inside:
                        inside = qz
                    if inside > 0.0:
                        inside = 0.0
                    d = math.sqrt(ox * ox + oy * oy + oz * oz) + inside
                    if d < best:
                        best = d
                neg = -best
                if neg > values[i, j, k]:
                    values[i, j, k] = neg


def carve_swept_volume(field: SdfField, rotations: np.ndarray, translations: np.ndarray,
                       half_extents: np.ndarray, pad: float) -> int:
    """Subtract the blade's swept volume: field <- max(field, -swept_sdf).

    Only nodes within `pad` of the swept axis-aligned hull can change: the
    field never drops below -r_p, so any node where the swept distance
    exceeds r_p keeps its value. Pass pad >= r_p + one cell. Returns the
    number of lattice nodes examined (the restriction keeps this small).
    """
    rotations = np.ascontiguousarray(rotations, dtype=np.float64)
    translations = np.ascontiguousarray(translations, dtype=np.float64)
    half_extents = np.ascontiguousarray(half_extents, dtype=np.float64)
    if rotations.shape[0] == 0:
        return 0
    # hull of every posed box via its corner points
    corners = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
                       dtype=np.float64)
    lo = np.full(3, np.inf)
    hi = np.full(3, -np.inf)
    for s in range(rotations.shape[0]):
        pts = (corners * half_extents[s]) @ rotations[s].T + translations[s]
        lo = np.minimum(lo, pts.min(axis=0))
        hi = np.maximum(hi, pts.max(axis=0))
    lo -= pad
    hi += pad
    shape = np.array(field.values.shape)
    idx_lo = np.clip(np.floor((lo - field.origin) / field.cell).astype(np.int64), 0, shape)
    idx_hi = np.clip(np.ceil((hi - field.origin) / field.cell).astype(np.int64) + 1, 0, shape)
    if np.any(idx_hi <= idx_lo):
        return 0
    _carve_kernel(field.values, field.origin[0], field.origin[1], field.origin[2],
                  field.cell, idx_lo[0], idx_lo[1], idx_lo[2],
                  idx_hi[0], idx_hi[1], idx_hi[2],
                  rotations, translations, half_extents)
    return int(np.prod(idx_hi - idx_lo))
