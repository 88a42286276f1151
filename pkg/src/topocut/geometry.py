"""Rigid transforms and primitive shapes used for spawning objects and the knife.

All shapes live in the unit simulation domain. SDF conventions: negative
inside, zero on the surface, exact Euclidean distance outside.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation


def _as_vec3(x) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64).reshape(3)
    return v.copy()


@dataclass
class RigidTransform:
    """Rotation (3x3) + translation, mapping local coordinates to world."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = _as_vec3(self.translation)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_quat(cls, quat_xyzw, translation) -> "RigidTransform":
        return cls(Rotation.from_quat(np.asarray(quat_xyzw, dtype=np.float64)).as_matrix(),
                   translation)

    def quat_xyzw(self) -> np.ndarray:
        return Rotation.from_matrix(self.rotation).as_quat()

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform points from local to world frame."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return pts @ self.rotation.T + self.translation

    def apply_inverse(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return (pts - self.translation) @ self.rotation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Composition that applies `other` first, then `self`."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def copy(self) -> "RigidTransform":
        return RigidTransform(self.rotation.copy(), self.translation.copy())

    def integrate_twist(self, linear, angular, dt: float) -> "RigidTransform":
        """Advance the pose by a body twist expressed in world coordinates.

        Rotation uses the exponential map so large angular rates stay on SO(3).
        """
        w = _as_vec3(angular) * dt
        rot = Rotation.from_rotvec(w).as_matrix() @ self.rotation
        return RigidTransform(rot, self.translation + _as_vec3(linear) * dt)


def oriented_box_sdf(points: np.ndarray, pose: RigidTransform, half_extents) -> np.ndarray:
    """Exact signed distance to an oriented box; negative inside."""
    h = _as_vec3(half_extents)
    local = pose.apply_inverse(points)
    q = np.abs(local) - h
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
    inside = np.minimum(np.max(q, axis=1), 0.0)
    return outside + inside


class Shape:
    """Base geometry spec: an SDF plus bounds, used for particle seeding."""

    def sdf(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def transformed(self, pose: RigidTransform) -> "PosedShape":
        return PosedShape(self, pose)


@dataclass
class BoxShape(Shape):
    center: np.ndarray
    size: np.ndarray  # full extents per axis

    def __post_init__(self):
        self.center = _as_vec3(self.center)
        self.size = _as_vec3(self.size)

    def sdf(self, points):
        return oriented_box_sdf(points, RigidTransform(np.eye(3), self.center), self.size / 2.0)

    def bounds(self):
        return self.center - self.size / 2.0, self.center + self.size / 2.0

    def to_dict(self):
        return {"type": "box", "center": self.center.tolist(), "size": self.size.tolist()}


@dataclass
class SphereShape(Shape):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = _as_vec3(self.center)
        self.radius = float(self.radius)

    def sdf(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.linalg.norm(pts - self.center, axis=1) - self.radius

    def bounds(self):
        r = np.full(3, self.radius)
        return self.center - r, self.center + r

    def to_dict(self):
        return {"type": "sphere", "center": self.center.tolist(), "radius": self.radius}


@dataclass
class CylinderShape(Shape):
    """Vertical (y-axis) cylinder, e.g. a cake body."""

    center: np.ndarray
    radius: float
    height: float

    def __post_init__(self):
        self.center = _as_vec3(self.center)
        self.radius = float(self.radius)
        self.height = float(self.height)

    def sdf(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64)) - self.center
        d_r = np.hypot(pts[:, 0], pts[:, 2]) - self.radius
        d_y = np.abs(pts[:, 1]) - self.height / 2.0
        q = np.stack([d_r, d_y], axis=1)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(np.max(q, axis=1), 0.0)
        return outside + inside

    def bounds(self):
        r = np.array([self.radius, self.height / 2.0, self.radius])
        return self.center - r, self.center + r

    def to_dict(self):
        return {"type": "cylinder", "center": self.center.tolist(),
                "radius": self.radius, "height": self.height}


@dataclass
class PosedShape(Shape):
    """A base shape under a rigid transform (spawn-pose randomization)."""

    base: Shape
    pose: RigidTransform

    def sdf(self, points):
        return self.base.sdf(self.pose.apply_inverse(points))

    def bounds(self):
        lo, hi = self.base.bounds()
        corners = np.array([[x, y, z] for x in (lo[0], hi[0])
                            for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
        world = self.pose.apply(corners)
        return world.min(axis=0), world.max(axis=0)

    def to_dict(self):
        return {"type": "posed", "base": self.base.to_dict(),
                "quat": self.pose.quat_xyzw().tolist(),
                "translation": self.pose.translation.tolist()}


def shape_from_dict(spec: dict) -> Shape:
    """Parse a geometry spec from its JSON form."""
    kind = spec.get("type")
    if kind == "box":
        return BoxShape(spec["center"], spec["size"])
    if kind == "sphere":
        return SphereShape(spec["center"], spec["radius"])
    if kind == "cylinder":
        return CylinderShape(spec["center"], spec["radius"], spec["height"])
    if kind == "posed":
        return PosedShape(shape_from_dict(spec["base"]),
                          RigidTransform.from_quat(spec["quat"], spec["translation"]))
    raise ValueError(f"unknown shape type: {kind!r}")
