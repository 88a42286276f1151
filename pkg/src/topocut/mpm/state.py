"""State containers for the solver: particles, grid, knife, material table."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..config import MaterialParams, SimConfig
from ..geometry import RigidTransform, Shape


@dataclass
class MaterialTable:
    """Material parameters packed into arrays indexed by material id."""

    names: list
    mu: np.ndarray
    lam: np.ndarray
    rho: np.ndarray
    yield0: np.ndarray
    soften: np.ndarray
    eps_c: np.ndarray
    eps_s: np.ndarray
    m_exp: np.ndarray
    plastic: np.ndarray  # bool: return map enabled

    @classmethod
    def from_params(cls, materials: dict[str, MaterialParams]) -> "MaterialTable":
        names = list(materials.keys())
        get = lambda attr: np.array([getattr(materials[n], attr) for n in names], dtype=np.float64)
        return cls(
            names=names, mu=get("mu"), lam=get("lam"), rho=get("rho"),
            yield0=get("yield_stress0"), soften=get("soften_gamma"),
            eps_c=get("eps_c"), eps_s=get("eps_s"), m_exp=get("m_exp"),
            plastic=np.array([materials[n].yield_stress0 > 0 for n in names]),
        )

    def id_of(self, name: str) -> int:
        return self.names.index(name)


class ParticleSet:
    """Structure-of-arrays particle state.

    Particle order is fixed at spawn and never changes; downstream code keys
    persistent cluster identity and replay checks on that stability.
    """

    def __init__(self, x, material_id, materials: MaterialTable, spacing: float):
        n = x.shape[0]
        self.x = np.ascontiguousarray(x, dtype=np.float64)
        self.v = np.zeros((n, 3))
        self.C = np.zeros((n, 3, 3))
        self.F = np.tile(np.eye(3), (n, 1, 1))
        self.S = np.zeros((n, 3, 3))          # fused stress term for the transfer
        self.material_id = np.ascontiguousarray(material_id, dtype=np.int32)
        self.materials = materials
        self.spacing = float(spacing)
        self.V0 = np.full(n, spacing ** 3)
        self.m = self.V0 * materials.rho[self.material_id]
        self.J = np.ones(n)
        self.sigma_y = materials.yield0[self.material_id].copy()
        self.eps_p_acc = np.zeros(n)
        self.dgamma = np.zeros(n)             # plastic increment of the last substep
        self.damaged = np.zeros(n, dtype=np.uint8)
        self.det_failed = np.zeros(n, dtype=np.uint8)
        self.cluster_id = np.zeros(n, dtype=np.int32)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def particle_radius(self, factor: float = 1.1) -> float:
        return factor * self.spacing

    def total_mass(self) -> float:
        return float(self.m.sum())

    def total_momentum(self) -> np.ndarray:
        return (self.m[:, None] * self.v).sum(axis=0)

    def copy(self) -> "ParticleSet":
        out = ParticleSet.__new__(ParticleSet)
        for name, val in self.__dict__.items():
            out.__dict__[name] = val.copy() if isinstance(val, np.ndarray) else val
        return out


def spawn_from_shape(shape: Shape, materials: MaterialTable, config: SimConfig,
                     core: str = "core", skin: str = "skin",
                     spacing: float | None = None,
                     jitter: float = 0.0, rng: np.random.Generator | None = None) -> ParticleSet:
    """Fill a shape with a regular particle lattice.

    Lattice spacing defaults to the value matching config.particles_per_cell.
    The outermost band of thickness config.skin_thickness becomes the skin
    material when the table defines one; everything else is core. jitter is
    a fraction of the spacing applied uniformly per axis (needs rng).
    """
    if spacing is None:
        spacing = config.dx / config.particles_per_cell ** (1.0 / 3.0)
    lo, hi = shape.bounds()
    counts = np.maximum(np.ceil((hi - lo) / spacing).astype(int), 1)
    axes = [lo[a] + (np.arange(counts[a]) + 0.5) * spacing for a in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    if jitter > 0.0:
        if rng is None:
            raise ValueError("jitter requires an rng")
        pts = pts + rng.uniform(-0.5, 0.5, pts.shape) * jitter * spacing
    d = shape.sdf(pts)
    inside = d < 0.0
    pts = pts[inside]
    d = d[inside]
    if pts.shape[0] == 0:
        raise ValueError("shape produced no particles at this spacing")
    # particles may overlap the clamped boundary band (they rest on it) but
    # must stay where the quadratic stencil cannot index off the node arrays
    safe = 1.5 * config.dx
    lo_dom = np.asarray(config.domain_bounds[0]) + safe
    hi_dom = np.asarray(config.domain_bounds[1]) - safe
    if np.any(pts < lo_dom) or np.any(pts > hi_dom):
        raise ValueError("shape extends outside the stencil-safe domain region")
    mat = np.full(pts.shape[0], materials.id_of(core), dtype=np.int32)
    if skin in materials.names and config.skin_thickness > 0:
        mat[d > -config.skin_thickness] = materials.id_of(skin)
    return ParticleSet(pts, mat, materials, spacing)


@dataclass
class KnifeState:
    """Blade pose, commanded twist, and the slicing oscillation overlay.

    The blade is an oriented box: local x along the edge, y up the blade
    face, z across the thickness. Oscillation shifts the pose along local x;
    the corresponding velocity is folded into the contact so grid nodes feel
    the sawing motion.
    """

    pose: RigidTransform = field(default_factory=RigidTransform.identity)
    half_extents: np.ndarray = field(default_factory=lambda: np.array([0.2, 0.15, 0.01]))
    linear: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular: np.ndarray = field(default_factory=lambda: np.zeros(3))
    saw_enabled: bool = False
    saw_amplitude: float = 0.0
    saw_freq: float = 20.0
    phase_time: float = 0.0
    active: bool = True

    @classmethod
    def default_for(cls, config: SimConfig, pose: RigidTransform | None = None) -> "KnifeState":
        # blade thickness 1.2 cells so a node plane always sits inside it
        h = np.array([0.22, 0.16, 0.6 * config.dx])
        return cls(pose=pose or RigidTransform(np.eye(3), np.array([0.5, 0.9, 0.5])),
                   half_extents=h, saw_amplitude=0.5 * config.dx)

    def set_twist(self, linear, angular):
        self.linear = np.asarray(linear, dtype=np.float64).reshape(3).copy()
        self.angular = np.asarray(angular, dtype=np.float64).reshape(3).copy()

    def effective_pose_velocity(self):
        """Pose and point-velocity parameters seen by the contact this substep."""
        pose = self.pose
        v = self.linear
        if self.saw_enabled and self.saw_amplitude > 0.0:
            tangent = self.pose.rotation[:, 0]
            w = 2.0 * math.pi * self.saw_freq
            offset = self.saw_amplitude * math.sin(w * self.phase_time)
            pose = RigidTransform(self.pose.rotation, self.pose.translation + offset * tangent)
            v = self.linear + self.saw_amplitude * w * math.cos(w * self.phase_time) * tangent
        return pose, v, self.angular

    def advance(self, dt: float):
        self.pose = self.pose.integrate_twist(self.linear, self.angular, dt)
        self.phase_time += dt

    def speed(self) -> float:
        return float(np.linalg.norm(self.linear) + np.linalg.norm(self.angular))

    def copy(self) -> "KnifeState":
        return KnifeState(self.pose.copy(), self.half_extents.copy(),
                          self.linear.copy(), self.angular.copy(),
                          self.saw_enabled, self.saw_amplitude, self.saw_freq,
                          self.phase_time, self.active)


class GridState:
    """Background grid storage; node arrays cover (res+1)^3."""

    def __init__(self, config: SimConfig):
        n = config.grid_resolution + 1
        self.resolution = config.grid_resolution
        self.dx = config.dx
        self.m = np.zeros((n, n, n))
        self.mv = np.zeros((n, n, n, 3))
        # previously-touched node range, so clears stay proportional to the object
        self.dirty_lo = np.zeros(3, dtype=np.int64)
        self.dirty_hi = np.full(3, n, dtype=np.int64)
