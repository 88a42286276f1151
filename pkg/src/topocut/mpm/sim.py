"""Frame-level simulation driver built on the transfer kernels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import RunConfig, SimConfig
from ..geometry import shape_from_dict
from ..topology.damage import apply_damage_rules
from . import kernels
from .state import GridState, KnifeState, MaterialTable, ParticleSet, spawn_from_shape


@dataclass
class SubstepDiagnostics:
    """Worst-case transfer residuals seen so far, scale-aware.

    The momentum scale sums the transferred magnitudes (momentum plus the
    affine/stress matrices times a cell size) so the ratio stays meaningful
    when the object is nearly at rest.
    """

    max_mass_rel_err: float = 0.0
    max_momentum_rel_err: float = 0.0
    substeps: int = 0

    def update(self, mass_err: float, mom_err: float):
        self.max_mass_rel_err = max(self.max_mass_rel_err, mass_err)
        self.max_momentum_rel_err = max(self.max_momentum_rel_err, mom_err)
        self.substeps += 1


@dataclass
class SweptRecord:
    rotations: list = field(default_factory=list)
    translations: list = field(default_factory=list)
    half_extents: list = field(default_factory=list)

    def add(self, R, t, h):
        self.rotations.append(np.asarray(R, dtype=np.float64).copy())
        self.translations.append(np.asarray(t, dtype=np.float64).copy())
        self.half_extents.append(np.asarray(h, dtype=np.float64).copy())

    def __len__(self):
        return len(self.rotations)

    def as_arrays(self):
        if not self.rotations:
            return (np.zeros((0, 3, 3)), np.zeros((0, 3)), np.zeros((0, 3)))
        return (np.stack(self.rotations), np.stack(self.translations),
                np.stack(self.half_extents))

    def clear(self):
        self.rotations.clear()
        self.translations.clear()
        self.half_extents.clear()


class MPMSim:
    """Owns particle/grid/knife state and advances them substep by substep.

    Every kernel call is serial and order-fixed, so two sims built from the
    same config and initial state reproduce each other bit for bit.
    """

    def __init__(self, config: SimConfig, particles: ParticleSet,
                 knife: KnifeState | None = None, collect_diagnostics: bool = False):
        self.config = config.validate()
        self.particles = particles
        self.knife = knife if knife is not None else KnifeState.default_for(config)
        self.grid = GridState(config)
        self.time = 0.0
        self.substep_count = 0
        self.damaged_total = int(particles.damaged.sum())
        self.diagnostics = SubstepDiagnostics() if collect_diagnostics else None
        self.swept = SweptRecord()
        self.record_swept = True
        self._gravity = np.asarray(config.gravity, dtype=np.float64)

    @classmethod
    def from_run_config(cls, run: RunConfig, **kw) -> "MPMSim":
        table = MaterialTable.from_params(run.materials)
        shape = shape_from_dict(run.object_shape)
        particles = spawn_from_shape(shape, table, run.sim)
        return cls(run.sim, particles, KnifeState.default_for(run.sim), **kw)

    def _node_bbox(self):
        """Smallest node-index box covering every particle stencil."""
        res = self.config.grid_resolution
        dx = self.config.dx
        lo = np.floor(self.particles.x.min(axis=0) / dx - 0.5).astype(np.int64)
        hi = np.floor(self.particles.x.max(axis=0) / dx - 0.5).astype(np.int64) + 3
        lo = np.clip(lo, 0, res + 1)
        hi = np.clip(hi, 0, res + 1)
        return lo, hi

    def substep(self):
        cfg = self.config
        p = self.particles
        g = self.grid
        dt = cfg.dt
        dx = cfg.dx

        lo, hi = self._node_bbox()
        # stale data can only live where the previous substep wrote
        kernels.clear_grid(g.m, g.mv, g.dirty_lo[0], g.dirty_lo[1], g.dirty_lo[2],
                           g.dirty_hi[0], g.dirty_hi[1], g.dirty_hi[2])
        kernels.p2g(p.x, p.v, p.C, p.S, p.m, g.m, g.mv, dx)
        g.dirty_lo, g.dirty_hi = lo, hi

        if self.diagnostics is not None:
            region_m = g.m[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
            region_mv = g.mv[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
            total_m = p.m.sum()
            mass_err = abs(region_m.sum() - total_m) / total_m
            pg = region_mv.reshape(-1, 3).sum(axis=0)
            pp = (p.m[:, None] * p.v).sum(axis=0)
            scale = float((p.m * np.linalg.norm(p.v, axis=1)).sum())
            scale += float(np.abs(p.m[:, None, None] * p.C + p.S).sum()) * dx
            mom_err = float(np.linalg.norm(pg - pp)) / max(scale, 1e-300)
            self.diagnostics.update(float(mass_err), mom_err)

        knife = self.knife
        if knife is not None and knife.active:
            pose, v_lin, w_ang = knife.effective_pose_velocity()
            if self.record_swept:
                self.swept.add(pose.rotation, pose.translation, knife.half_extents)
            kernels.grid_update(
                g.m, g.mv, lo[0], lo[1], lo[2], hi[0], hi[1], hi[2], dt, dx,
                self._gravity[0], self._gravity[1], self._gravity[2],
                cfg.grid_resolution, cfg.boundary_cells, cfg.floor_friction,
                True, pose.rotation, pose.translation, knife.half_extents,
                v_lin, w_ang, cfg.knife_friction,
                cfg.knife_contact_mode == "sticky")
        else:
            dummy = np.zeros(3)
            kernels.grid_update(
                g.m, g.mv, lo[0], lo[1], lo[2], hi[0], hi[1], hi[2], dt, dx,
                self._gravity[0], self._gravity[1], self._gravity[2],
                cfg.grid_resolution, cfg.boundary_cells, cfg.floor_friction,
                False, np.eye(3), dummy, dummy, dummy, dummy, 0.0, False)

        kernels.g2p(p.x, p.v, p.C, g.mv, dt, dx, cfg.grid_resolution)
        kernels.f_update(p.F, p.C, p.S, p.V0, p.J, p.sigma_y, p.dgamma,
                         p.damaged, p.det_failed, p.material_id,
                         p.materials.mu, p.materials.lam, p.materials.plastic,
                         dt, dx)
        self.damaged_total += apply_damage_rules(p)

        if knife is not None:
            knife.advance(dt)
        self.time += dt
        self.substep_count += 1

    def step_frame(self, twist=None):
        """Run one control frame; twist is an optional (linear, angular) pair."""
        if twist is not None:
            self.knife.set_twist(*twist)
        for _ in range(self.config.substeps_per_frame):
            self.substep()

    def run_frames(self, n: int, twist=None):
        for _ in range(n):
            self.step_frame(twist)

    def damaged_count(self) -> int:
        return int(self.particles.damaged.sum())

    def max_particle_speed(self) -> float:
        return float(np.linalg.norm(self.particles.v, axis=1).max())

    def drain_swept_poses(self):
        """Hand the sampled blade poses since the last call to the carve step."""
        arrays = self.swept.as_arrays()
        self.swept.clear()
        return arrays

    def clone(self) -> "MPMSim":
        """Independent deep copy; stepping the copy never touches the original."""
        out = MPMSim(self.config, self.particles.copy(), self.knife.copy(),
                     collect_diagnostics=self.diagnostics is not None)
        out.time = self.time
        out.substep_count = self.substep_count
        out.damaged_total = self.damaged_total
        out.record_swept = self.record_swept
        for R, t, h in zip(self.swept.rotations, self.swept.translations,
                           self.swept.half_extents):
            out.swept.add(R, t, h)
        return out
