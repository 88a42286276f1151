"""Demonstration episode generation, replay relabeling, and the dataset store.

An episode is a sequence of cuts on one spawned object. Each cut yields a
(topology, action, next topology, reward) tuple; topologies keep only the
per-fragment representative clouds so every stored reward can be recomputed
from the record alone. All stored floats are quantized to f32 at capture
time, which is what makes the on-disk round trip and the reward audit
bit-exact rather than merely close.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .blob import BlobField, read_blob, write_blob
from .config import GoalSpec, MPPIConfig, RunConfig
from .diffusion import action_to_mask, plane_to_knife_pose
from .geometry import RigidTransform, shape_from_dict
from .metrics import chamfer_distance
from .mpm import KnifeState, MaterialTable, MPMSim, spawn_from_shape
from .planner import MPPIPlanner
from .spectral import evaluate_fragments, goal_fragment_cloud
from .topology import discover_topology

SCHEMA_VERSION = 1


class DatasetError(ValueError):
    pass


class SimFault(RuntimeError):
    """Simulation state became unusable mid-episode."""


def _f32(a) -> np.ndarray:
    """Round to f32-representable values, kept in f64 storage."""
    return np.asarray(a, dtype=np.float32).astype(np.float64)


# ---------------------------------------------------------------------------
# record types


@dataclass
class FlatTopology:
    """One topology snapshot flattened for storage.

    labels index into cluster_ids (contiguous 0..K-1); cluster_ids carries
    the persistent fragment ids in ascending order.
    """

    points: np.ndarray       # (N, 3) f32-representable
    labels: np.ndarray       # (N,) uint8
    cluster_ids: np.ndarray  # (K,) int32
    frame: int

    @classmethod
    def from_state(cls, state, frame: int) -> "FlatTopology":
        clouds = [c.points for c in state.clusters]
        ids = np.array([c.cluster_id for c in state.clusters], dtype=np.int32)
        if clouds:
            pts = _f32(np.concatenate(clouds, axis=0))
            labels = np.concatenate(
                [np.full(len(c), i, dtype=np.uint8) for i, c in enumerate(clouds)])
        else:
            pts = np.zeros((0, 3))
            labels = np.zeros(0, dtype=np.uint8)
        return cls(pts, labels, ids, int(frame))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def cluster_clouds(self) -> list:
        return [self.points[self.labels == i] for i in range(len(self.cluster_ids))]


@dataclass
class CutAction:
    """Knife placement for one cut plus the side-of-blade point labels."""

    position: np.ndarray   # (3,) f32-representable
    quat_xyzw: np.ndarray  # (4,) f32-representable
    mask: np.ndarray       # (N,) uint8 over the pre-cut topology points

    @property
    def pose(self) -> RigidTransform:
        return RigidTransform.from_quat(self.quat_xyzw, self.position)

    @classmethod
    def from_pose(cls, pose: RigidTransform, mask: np.ndarray) -> "CutAction":
        q = pose.quat_xyzw()
        nz = np.nonzero(q)[0]
        if nz.size and q[nz[-1]] < 0:  # fix the double-cover sign for storage
            q = -q
        return cls(_f32(pose.translation), _f32(q),
                   np.asarray(mask, dtype=np.uint8))


@dataclass
class DemonstrationTuple:
    topo_t: FlatTopology
    action: CutAction
    topo_next: FlatTopology
    goal: GoalSpec
    reward: float  # f32-representable


@dataclass
class EpisodeRecord:
    tuples: list
    object_spec: dict
    pose_randomization: dict | None
    source: str
    seed: int
    goal: GoalSpec
    goal_clouds: list          # f32-representable target clouds
    initial_topo: FlatTopology
    incomplete: bool = False
    warnings: list = field(default_factory=list)
    # resolved early-stop threshold; replay must apply the same rule
    termination_reward: float | None = None

    def topologies(self) -> list:
        return [self.initial_topo] + [t.topo_next for t in self.tuples]

    def cluster_counts(self) -> list:
        return [len(t.cluster_ids) for t in self.topologies()]


# ---------------------------------------------------------------------------
# goal sampling


def generate_goal(spec: GoalSpec, rng: np.random.Generator | None = None,
                  mode: str = "uniform", spacing: float = 1.0) -> np.ndarray:
    """Sample a target-fragment cloud for a parametric goal.

    uniform: spec.sample_count draws inside the dims box (needs rng).
    grid: round(dim/spacing) points per axis spanning the full extent, so
    the bounding box equals dims exactly.
    """
    spec.validate()
    if spec.dims is None:
        raise ValueError("goal dims required to sample a standalone cloud")
    dims = np.asarray(spec.dims, dtype=np.float64)
    if mode == "uniform":
        if rng is None:
            raise ValueError("uniform sampling needs an rng")
        return rng.uniform(-dims / 2.0, dims / 2.0, size=(spec.sample_count, 3))
    if mode == "grid":
        counts = np.maximum(np.round(dims / spacing).astype(int), 2)
        axes = [np.linspace(-dims[a] / 2.0, dims[a] / 2.0, counts[a]) for a in range(3)]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    raise ValueError(f"unknown sampling mode {mode!r}")


def resolve_goal_clouds(goal: GoalSpec, object_bounds, spacing: float) -> list:
    """Target clouds used for every reward in an episode, f32-quantized."""
    goal.validate()
    if goal.kind == "fragments":
        return [_f32(c) for c in goal.fragments]
    return [_f32(goal_fragment_cloud(goal, object_bounds, spacing))]


# ---------------------------------------------------------------------------
# pose randomization


@dataclass
class PoseRanges:
    x: tuple = (-0.4, 0.4)
    z: tuple = (-0.2, 0.2)
    yaw_deg: tuple = (-15.0, 15.0)
    scale: tuple = (0.8, 1.2)


def _scaled_shape(spec: dict, s: float) -> tuple[dict, np.ndarray]:
    """Scale a primitive about its center, keeping the bottom height."""
    out = dict(spec)
    c = np.asarray(spec["center"], dtype=np.float64).copy()
    kind = spec.get("type")
    if kind == "box":
        size = np.asarray(spec["size"], dtype=np.float64)
        bottom = c[1] - size[1] / 2.0
        c[1] = bottom + s * size[1] / 2.0
        out["size"] = (s * size).tolist()
    elif kind == "sphere":
        r = float(spec["radius"])
        c[1] = (c[1] - r) + s * r
        out["radius"] = s * r
    elif kind == "cylinder":
        h = float(spec["height"])
        c[1] = (c[1] - h / 2.0) + s * h / 2.0
        out["radius"] = s * float(spec["radius"])
        out["height"] = s * h
    else:
        raise ValueError(f"cannot scale shape type {kind!r}")
    out["center"] = c.tolist()
    return out, c


def randomize_pose(object_spec: dict, rng: np.random.Generator,
                   ranges: PoseRanges | None = None,
                   domain_bounds=((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)),
                   margin: float = 0.05,
                   max_attempts: int = 100) -> tuple[dict, dict]:
    """Draw translation/yaw/scale for the spawn pose; returns (spec, draws).

    Keeps redrawing while the posed bounds leave the domain interior; after
    max_attempts the draw ranges are declared incompatible with the domain.
    """
    ranges = ranges or PoseRanges()
    lo_d = np.asarray(domain_bounds[0], dtype=np.float64) + margin
    hi_d = np.asarray(domain_bounds[1], dtype=np.float64) - margin
    for _ in range(max_attempts):
        dxv = float(rng.uniform(*ranges.x))
        dzv = float(rng.uniform(*ranges.z))
        yaw = float(rng.uniform(*ranges.yaw_deg))
        s = float(rng.uniform(*ranges.scale))
        scaled, center = _scaled_shape(object_spec, s)
        half = math.radians(yaw) / 2.0
        quat = [0.0, math.sin(half), 0.0, math.cos(half)]
        rot = RigidTransform.from_quat(quat, np.zeros(3))
        # rotate about the scaled shape's center, then shift in the table plane
        t = center - rot.rotation @ center + np.array([dxv, 0.0, dzv])
        spec = {"type": "posed", "base": scaled, "quat": quat,
                "translation": t.tolist()}
        lo, hi = shape_from_dict(spec).bounds()
        if np.all(lo >= lo_d) and np.all(hi <= hi_d):
            draws = {"translation": [dxv, dzv], "yaw_deg": yaw, "scale": s}
            return spec, draws
    raise RuntimeError(f"no in-domain pose found after {max_attempts} attempts")


# ---------------------------------------------------------------------------
# cut execution


@dataclass
class CutScript:
    """Descend-and-hold motion primitive executing one planned cut."""

    speed: float = 0.25            # downward blade speed during the stroke
    stop_clearance: float | None = None  # blade bottom target above the support plane; None -> -0.5 dx
    hold_frames: int = 12          # motionless frames before the blade releases
    settle_frames: int = 10        # free relaxation after the blade deactivates
    max_frames: int = 600
    saw: bool = True
    stage_gap: float | None = None  # initial blade-bottom clearance over the object; None -> 1 dx

    def validate(self):
        if self.speed <= 0:
            raise ValueError("cut speed must be positive")
        if self.hold_frames < 10:
            raise ValueError("hold must last at least 10 frames")
        return self


def _blade_min_y_offset(rotation: np.ndarray, half_extents: np.ndarray) -> float:
    """Drop from blade center to its lowest corner."""
    return float(np.abs(rotation[1, :]) @ np.asarray(half_extents))


def stage_cut_pose(pose: RigidTransform, top_y: float, half_extents,
                   gap: float) -> RigidTransform:
    """Slide the pose up its blade face until the blade clears top_y + gap.

    Sliding along the face keeps the cut plane unchanged. Already-staged
    poses (at least half the gap of clearance) come back untouched, so a
    stored action pose re-executes identically.
    """
    face_up = pose.rotation[:, 1]
    if face_up[1] <= 1e-6:
        return pose
    drop = _blade_min_y_offset(pose.rotation, half_extents)
    min_y = pose.translation[1] - drop
    if min_y >= top_y + 0.5 * gap:
        return pose
    s = (top_y + gap + drop - pose.translation[1]) / face_up[1]
    return RigidTransform(pose.rotation, pose.translation + s * face_up)


def execute_cut(sim: MPMSim, pose: RigidTransform, script: CutScript) -> dict:
    """Run one cut stroke: place, descend, hold still, release, settle.

    The given pose must already be staged (blade clear of the object); use
    stage_cut_pose first when building actions from raw plane poses.
    """
    script.validate()
    cfg = sim.config
    knife = sim.knife
    knife.pose = pose.copy()
    knife.active = True
    knife.saw_enabled = script.saw
    knife.phase_time = 0.0

    floor_y = cfg.boundary_cells * cfg.dx
    clearance = -0.5 * cfg.dx if script.stop_clearance is None else script.stop_clearance
    drop = _blade_min_y_offset(pose.rotation, knife.half_extents)
    stop_y = floor_y + clearance + drop

    frames = 0
    damaged_before = sim.damaged_count()
    down = (np.array([0.0, -script.speed, 0.0]), np.zeros(3))
    while knife.pose.translation[1] > stop_y and frames < script.max_frames:
        sim.step_frame(down)
        frames += 1
        if not np.isfinite(sim.particles.x).all():
            raise SimFault(f"non-finite particle state during cut at frame {frames}")
    knife.saw_enabled = False
    zero = (np.zeros(3), np.zeros(3))
    for _ in range(script.hold_frames):
        sim.step_frame(zero)
        frames += 1
    if knife.speed() >= 1e-4:
        raise SimFault("blade failed to come to rest during hold")
    knife.active = False
    for _ in range(script.settle_frames):
        sim.step_frame(zero)
        frames += 1
    if not np.isfinite(sim.particles.x).all():
        raise SimFault("non-finite particle state after cut")
    return {"frames": frames,
            "new_damage": sim.damaged_count() - damaged_before}


# ---------------------------------------------------------------------------
# planning source


def _normal_schedule(kind: str, cut_index: int) -> np.ndarray:
    # vertical planes only; dice alternates the two horizontal axes too
    if kind == "slice":
        return np.array([1.0, 0.0, 0.0])
    axes = [np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])]
    return axes[cut_index % 2]


def _plane_split(flat: FlatTopology, normal: np.ndarray, offset: float,
                 min_points: int = 8) -> list:
    """Geometric preview of a cut: each cluster cloud halved by the plane."""
    frags = []
    for cloud in flat.cluster_clouds():
        side = cloud @ normal - offset >= 0.0
        for part in (cloud[side], cloud[~side]):
            if part.shape[0] >= min_points:
                frags.append(part)
    return frags


def plan_cut_mppi(flat: FlatTopology, goal_clouds: list, run: RunConfig,
                  rng: np.random.Generator, cut_index: int) -> RigidTransform:
    """Pick the next cut plane by MPPI over the plane offset.

    Candidate costs come from a geometric split of the current fragment
    clouds (no simulation in the loop), scored by the spectral reward; the
    chosen plane is then turned into a staged blade pose.
    """
    if flat.n == 0:
        raise SimFault("no intact material left to plan over")
    normal = _normal_schedule(run.goal.kind, cut_index)
    pts = flat.points
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    axis = int(np.argmax(np.abs(normal)))
    center = 0.5 * (lo[axis] + hi[axis])
    span = max(hi[axis] - lo[axis], 1e-6)

    def rollout(U: np.ndarray) -> float:
        off = center + float(U[0, 0])
        if not lo[axis] + 0.02 * span < off < hi[axis] - 0.02 * span:
            return np.inf
        frags = _plane_split(flat, normal, off)
        if len(frags) < 2:
            return np.inf
        ev = evaluate_fragments(frags, goal_clouds, run.spectral)
        return -ev.R_total

    cfg = replace(run.mppi, horizon=1)
    planner = MPPIPlanner(rollout, cfg, rng)
    planner.refine()
    off = center + float(planner.U[0, 0])
    off = float(np.clip(off, lo[axis] + 0.05 * span, hi[axis] - 0.05 * span))
    return plane_to_knife_pose(normal, -off, (lo, hi))


# ---------------------------------------------------------------------------
# episode running


def _discover(sim: MPMSim, run: RunConfig, swept, point_budget: int):
    p = sim.particles
    return discover_topology(p.x, p.damaged == 0, p.cluster_id,
                             p.particle_radius(run.topology.r_p_factor),
                             sim.config.dx, run.topology,
                             swept=swept, point_budget=point_budget)


def run_episode(object_spec: dict, goal: GoalSpec, source, max_cuts: int = 5,
                seed: int = 0, run: RunConfig | None = None,
                script: CutScript | None = None, point_budget: int = 512,
                termination_reward: float | None = None,
                goal_clouds: list | None = None,
                initial_settle_frames: int = 0,
                pose_randomization: dict | None = None) -> EpisodeRecord:
    """Spawn the object and run up to max_cuts plan/execute/score rounds.

    source is "mppi" or ("scripted", actions) where each action is a
    CutAction, a staged RigidTransform, or a (normal, offset) plane. The
    episode stops early once a cut's total reward reaches the termination
    threshold (default: the spectral success threshold). Simulation faults
    truncate the episode and flag the record incomplete.
    """
    run = (run or RunConfig()).validate()
    script = (script or CutScript()).validate()
    goal.validate()
    if isinstance(source, str):
        source_name, actions = source, None
    else:
        source_name, actions = source
    if source_name not in ("mppi", "scripted", "teleop"):
        raise ValueError(f"unknown episode source {source_name!r}")
    if source_name != "mppi" and actions is None:
        raise ValueError("scripted source needs an action list")
    rng = np.random.default_rng([seed, 1])
    if termination_reward is None:
        termination_reward = run.spectral.reward.resolved_success_threshold()

    table = MaterialTable.from_params(run.materials)
    shape = shape_from_dict(object_spec)
    particles = spawn_from_shape(shape, table, run.sim)
    sim = MPMSim(run.sim, particles, KnifeState.default_for(run.sim))
    sim.knife.active = False
    if initial_settle_frames:
        sim.run_frames(initial_settle_frames)
        sim.drain_swept_poses()

    if goal_clouds is None:
        goal_clouds = resolve_goal_clouds(goal, shape.bounds(), particles.spacing)

    # carve every cut made so far at each rebuild: fragments rarely drift
    # apart on their own, so dropping old sweeps would re-merge them
    swept_hist: list = []
    warnings: list = []
    incomplete = False
    topo = _discover(sim, run, None, point_budget)
    sim.particles.cluster_id[:] = topo.labels
    warnings.extend(topo.warnings)
    prev_flat = FlatTopology.from_state(topo, frame=0)
    initial = prev_flat
    tuples: list = []

    n_cuts = max_cuts if actions is None else min(max_cuts, len(actions))
    for cut in range(n_cuts):
        try:
            if actions is None:
                raw = plan_cut_mppi(prev_flat, goal_clouds, run, rng, cut)
            else:
                raw = actions[cut]
            if isinstance(raw, CutAction):
                quat, pos = raw.quat_xyzw, raw.position
            else:
                if isinstance(raw, tuple) and not isinstance(raw, RigidTransform):
                    normal, offset = raw
                    alive = sim.particles.x[sim.particles.damaged == 0]
                    raw = plane_to_knife_pose(normal, offset,
                                              (alive.min(axis=0), alive.max(axis=0)))
                top_y = float(sim.particles.x[sim.particles.damaged == 0, 1].max())
                staged = stage_cut_pose(raw, top_y, sim.knife.half_extents,
                                        gap=script.stage_gap or run.sim.dx)
                a = CutAction.from_pose(staged, np.zeros(0, dtype=np.uint8))
                quat, pos = a.quat_xyzw, a.position
            pose = RigidTransform.from_quat(quat, pos)
            mask = action_to_mask(prev_flat.points, pose)

            execute_cut(sim, pose, script)
            swept_hist.append(sim.drain_swept_poses())
            swept = tuple(np.concatenate([h[i] for h in swept_hist])
                          for i in range(3))
            topo = _discover(sim, run, swept, point_budget)
            sim.particles.cluster_id[:] = topo.labels
        except (SimFault, RuntimeError) as exc:
            warnings.append(f"cut {cut}: {exc}")
            incomplete = True
            break

        warnings.extend(topo.warnings)
        next_flat = FlatTopology.from_state(topo, frame=cut + 1)
        if len(next_flat.cluster_ids) < len(prev_flat.cluster_ids):
            warnings.append(f"cut {cut}: fragment count decreased (material loss)")
        ev = evaluate_fragments(next_flat.cluster_clouds(), goal_clouds, run.spectral)
        reward = float(np.float32(ev.R_total))
        action = CutAction(pos, quat, mask)
        tuples.append(DemonstrationTuple(prev_flat, action, next_flat, goal, reward))
        prev_flat = next_flat
        if reward >= termination_reward:
            break

    return EpisodeRecord(tuples, object_spec, pose_randomization, source_name,
                         seed, goal, goal_clouds, initial,
                         incomplete=incomplete, warnings=warnings,
                         termination_reward=termination_reward)


def replay(record: EpisodeRecord, run: RunConfig | None = None,
           script: CutScript | None = None, point_budget: int = 512,
           initial_settle_frames: int = 0) -> EpisodeRecord:
    """Re-execute a record's actions and recompute labels, masks, rewards.

    The replayed tuples replace the originals. Any step whose topology
    points differ from the recorded ones adds a warning with the per-step
    Chamfer gap.
    """
    actions = [t.action for t in record.tuples]
    out = run_episode(record.object_spec, record.goal, ("scripted", actions),
                      max_cuts=len(actions), seed=record.seed, run=run,
                      script=script, point_budget=point_budget,
                      termination_reward=record.termination_reward,
                      goal_clouds=record.goal_clouds,
                      initial_settle_frames=initial_settle_frames,
                      pose_randomization=record.pose_randomization)
    out.source = record.source
    for i, (a, b) in enumerate(zip(record.tuples, out.tuples)):
        pa, pb = a.topo_next.points, b.topo_next.points
        if pa.shape == pb.shape and np.array_equal(pa, pb):
            continue
        if pa.shape[0] and pb.shape[0]:
            gap = chamfer_distance(pa, pb)
            out.warnings.append(f"step {i}: replay diverged, chamfer {gap:.3e}")
        else:
            out.warnings.append(f"step {i}: replay diverged, fragment set changed")
    if len(out.tuples) != len(record.tuples):
        out.warnings.append(
            f"replay produced {len(out.tuples)} tuples, record has {len(record.tuples)}")
    return out


def seed_for_episode(root_seed: int, index: int) -> int:
    """Split a root seed: seed_i = root xor the low 64 bits of sha256(i)."""
    h = hashlib.sha256(int(index).to_bytes(8, "little")).digest()
    return (int(root_seed) ^ int.from_bytes(h[:8], "little")) & 0xFFFFFFFFFFFFFFFF


def generate_dataset(out_dir, base_object_spec: dict, goal: GoalSpec,
                     n_episodes: int, root_seed: int,
                     run: RunConfig | None = None, source="mppi",
                     script: CutScript | None = None, max_cuts: int = 5,
                     randomize: bool = True, ranges: PoseRanges | None = None,
                     point_budget: int = 512, domain_margin: float = 0.05) -> list:
    """Run independent episodes under split seeds and write them as a dataset."""
    run = (run or RunConfig()).validate()
    records = []
    for i in range(n_episodes):
        seed = seed_for_episode(root_seed, i)
        if randomize:
            pose_rng = np.random.default_rng([seed, 0])
            spec, draws = randomize_pose(base_object_spec, pose_rng, ranges,
                                         domain_bounds=run.sim.domain_bounds,
                                         margin=domain_margin)
        else:
            spec, draws = base_object_spec, None
        records.append(run_episode(spec, goal, source, max_cuts=max_cuts,
                                   seed=seed, run=run, script=script,
                                   point_budget=point_budget,
                                   pose_randomization=draws))
    write_dataset(records, out_dir, run)
    return records


# ---------------------------------------------------------------------------
# dataset store


def _goal_to_dict(goal: GoalSpec) -> dict:
    return {"kind": goal.kind, "thickness": goal.thickness,
            "sample_count": goal.sample_count,
            "dims": list(goal.dims) if goal.dims is not None else None}


def _goal_from_dict(d: dict, clouds: list) -> GoalSpec:
    dims = tuple(d["dims"]) if d.get("dims") is not None else None
    frags = clouds if d["kind"] == "fragments" else None
    return GoalSpec(kind=d["kind"], thickness=d["thickness"],
                    sample_count=d["sample_count"], fragments=frags, dims=dims)


def _episode_fields(rec: EpisodeRecord) -> list:
    topos = rec.topologies()
    counts = np.array([t.n for t in topos], dtype=np.int64)
    pts = (np.concatenate([t.points for t in topos], axis=0)
           if counts.sum() else np.zeros((0, 3)))
    labels = (np.concatenate([t.labels for t in topos])
              if counts.sum() else np.zeros(0, dtype=np.uint8))
    kcounts = np.array([len(t.cluster_ids) for t in topos], dtype=np.int64)
    kids = (np.concatenate([t.cluster_ids for t in topos])
            if kcounts.sum() else np.zeros(0, dtype=np.int32))
    T = len(rec.tuples)
    pos = np.stack([t.action.position for t in rec.tuples]) if T else np.zeros((0, 3))
    quat = np.stack([t.action.quat_xyzw for t in rec.tuples]) if T else np.zeros((0, 4))
    masks = (np.concatenate([t.action.mask for t in rec.tuples])
             if T else np.zeros(0, dtype=np.uint8))
    rewards = np.array([t.reward for t in rec.tuples], dtype=np.float64)
    gcounts = np.array([len(c) for c in rec.goal_clouds], dtype=np.int64)
    gpts = (np.concatenate(rec.goal_clouds, axis=0)
            if len(rec.goal_clouds) else np.zeros((0, 3)))
    return [
        BlobField("topo_point_counts", "i32", counts),
        BlobField("topo_frames", "i32",
                  np.array([t.frame for t in topos], dtype=np.int64)),
        BlobField("topo_points", "f32", pts),
        BlobField("topo_labels", "u8", labels),
        BlobField("topo_cluster_counts", "i32", kcounts),
        BlobField("topo_cluster_ids", "i32", kids),
        BlobField("action_pos", "f32", pos),
        BlobField("action_quat", "f32", quat),
        BlobField("action_masks", "bitmask", masks),
        BlobField("rewards", "f32", rewards),
        BlobField("goal_cloud_counts", "i32", gcounts),
        BlobField("goal_points", "f32", gpts),
    ]


def _episode_from_fields(fields: dict, meta: dict) -> EpisodeRecord:
    counts = fields["topo_point_counts"].astype(np.int64)
    frames = fields["topo_frames"]
    pts = fields["topo_points"].astype(np.float64).reshape(-1, 3)
    labels = fields["topo_labels"]
    kcounts = fields["topo_cluster_counts"].astype(np.int64)
    kids = fields["topo_cluster_ids"]
    offs = np.concatenate([[0], np.cumsum(counts)])
    koffs = np.concatenate([[0], np.cumsum(kcounts)])
    topos = [FlatTopology(pts[offs[i]:offs[i + 1]],
                          labels[offs[i]:offs[i + 1]].astype(np.uint8),
                          kids[koffs[i]:koffs[i + 1]].astype(np.int32),
                          int(frames[i]))
             for i in range(len(counts))]
    gcounts = fields["goal_cloud_counts"].astype(np.int64)
    gpts = fields["goal_points"].astype(np.float64).reshape(-1, 3)
    goffs = np.concatenate([[0], np.cumsum(gcounts)])
    goal_clouds = [gpts[goffs[i]:goffs[i + 1]] for i in range(len(gcounts))]
    goal = _goal_from_dict(meta["goal"], goal_clouds)

    T = len(fields["rewards"])
    pos = fields["action_pos"].astype(np.float64).reshape(-1, 3)
    quat = fields["action_quat"].astype(np.float64).reshape(-1, 4)
    masks = fields["action_masks"]
    moff = 0
    tuples = []
    for t in range(T):
        n_t = topos[t].n
        mask = masks[moff:moff + n_t].astype(np.uint8)
        moff += n_t
        action = CutAction(pos[t], quat[t], mask)
        tuples.append(DemonstrationTuple(topos[t], action, topos[t + 1], goal,
                                         float(fields["rewards"][t])))
    return EpisodeRecord(tuples, meta["object_spec"], meta["pose_randomization"],
                         meta["source"], meta["seed"], goal, goal_clouds,
                         topos[0], incomplete=meta["incomplete"],
                         warnings=list(meta.get("warnings", [])),
                         termination_reward=meta.get("termination_reward"))


def write_dataset(records: list, path, run: RunConfig | None = None) -> None:
    os.makedirs(path, exist_ok=True)
    episodes = []
    for i, rec in enumerate(records):
        name = f"episode_{i:05d}.tcut"
        fpath = os.path.join(path, name)
        write_blob(fpath, _episode_fields(rec))
        with open(fpath, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        episodes.append({
            "file": name, "sha256": digest, "seed": rec.seed,
            "source": rec.source, "goal": _goal_to_dict(rec.goal),
            "object_spec": rec.object_spec,
            "pose_randomization": rec.pose_randomization,
            "incomplete": rec.incomplete, "num_tuples": len(rec.tuples),
            "warnings": rec.warnings,
            "termination_reward": rec.termination_reward,
        })
    manifest = {"schema_version": SCHEMA_VERSION, "episodes": episodes}
    if run is not None:
        from .config import run_config_to_dict
        manifest["config"] = run_config_to_dict(run)
    with open(os.path.join(path, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)


def read_manifest(path) -> dict:
    mpath = os.path.join(path, "manifest.json")
    if not os.path.exists(mpath):
        raise DatasetError(f"no manifest.json under {path}")
    with open(mpath) as fh:
        manifest = json.load(fh)
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise DatasetError(
            f"dataset schema version {manifest.get('schema_version')} not supported")
    return manifest


def read_dataset(path) -> list:
    """Load every episode, verifying checksums; returns EpisodeRecord list."""
    manifest = read_manifest(path)
    records = []
    for meta in manifest["episodes"]:
        fpath = os.path.join(path, meta["file"])
        with open(fpath, "rb") as fh:
            raw = fh.read()
        digest = hashlib.sha256(raw).hexdigest()
        if digest != meta["sha256"]:
            raise DatasetError(f"checksum mismatch for {meta['file']}")
        import io
        _, fields = read_blob(io.BytesIO(raw))
        records.append(_episode_from_fields(fields, meta))
    return records


# ---------------------------------------------------------------------------
# audits


def records_equal(a: EpisodeRecord, b: EpisodeRecord) -> bool:
    """Bitwise comparison of everything a dataset stores."""
    if (a.seed != b.seed or a.source != b.source or a.incomplete != b.incomplete
            or a.termination_reward != b.termination_reward
            or len(a.tuples) != len(b.tuples)
            or _goal_to_dict(a.goal) != _goal_to_dict(b.goal)
            or len(a.goal_clouds) != len(b.goal_clouds)):
        return False
    if not all(np.array_equal(x, y) for x, y in zip(a.goal_clouds, b.goal_clouds)):
        return False

    def topo_eq(s: FlatTopology, t: FlatTopology) -> bool:
        return (s.frame == t.frame and np.array_equal(s.points, t.points)
                and np.array_equal(s.labels, t.labels)
                and np.array_equal(s.cluster_ids, t.cluster_ids))

    if not topo_eq(a.initial_topo, b.initial_topo):
        return False
    for ta, tb in zip(a.tuples, b.tuples):
        if ta.reward != tb.reward or not topo_eq(ta.topo_t, tb.topo_t) \
                or not topo_eq(ta.topo_next, tb.topo_next) \
                or not np.array_equal(ta.action.position, tb.action.position) \
                or not np.array_equal(ta.action.quat_xyzw, tb.action.quat_xyzw) \
                or not np.array_equal(ta.action.mask, tb.action.mask):
            return False
    return True


def audit_rewards(record: EpisodeRecord, run: RunConfig) -> list:
    """Recompute each tuple's reward from its stored topology.

    Returns one (stored, recomputed) pair per tuple; both are f32-quantized
    so equality is exact for a faithful record.
    """
    out = []
    for t in record.tuples:
        ev = evaluate_fragments(t.topo_next.cluster_clouds(), record.goal_clouds,
                                run.spectral)
        out.append((t.reward, float(np.float32(ev.R_total))))
    return out
