"""Configuration dataclasses for simulation, topology, rewards, and planning.

Every group serializes to/from plain dicts so run configs can live in JSON.
Unknown keys are rejected early; silent typos in a config file cost hours.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

KNIFE_CONTACT_MODES = ("slip", "sticky")
REWARD_VARIANTS = ("inverse_scaling", "piecewise")
DISTANCE_MODES = ("literal", "gram_full")


@dataclass
class MaterialParams:
    """Constitutive and damage parameters for one material id.

    `yield_stress0 == 0` disables the plastic return map entirely (pure
    elastic, used for the brittle core). `soften_gamma` is the yield-stress
    decrement per unit accumulated plastic strain.
    """

    mu: float = 2083.33
    lam: float = 1388.89
    rho: float = 4.0
    yield_stress0: float = 0.0
    soften_gamma: float = 0.0
    eps_c: float = 2.5e-2   # compression fracture threshold on J
    eps_s: float = 1.0e-2   # stretch fracture threshold on J
    m_exp: float = 1.0

    def validate(self):
        if self.mu <= 0 or self.lam < 0:
            raise ValueError("elastic moduli must satisfy mu > 0, lam >= 0")
        if self.rho <= 0:
            raise ValueError("density must be positive")
        if self.yield_stress0 < 0 or self.soften_gamma < 0:
            raise ValueError("yield parameters must be non-negative")
        if not (0.0 < self.eps_c < 1.0) or self.eps_s <= 0.0:
            raise ValueError("fracture thresholds: 0 < eps_c < 1 and eps_s > 0")
        if self.m_exp <= 0:
            raise ValueError("m_exp must be positive")
        return self


def default_core_material() -> MaterialParams:
    return MaterialParams()


def default_skin_material() -> MaterialParams:
    # Ductile layer: plastic flow with gradual softening instead of J-threshold
    # fracture, so the thresholds are deliberately loose.
    return MaterialParams(rho=1.0, yield_stress0=200.0, soften_gamma=1000.0,
                          eps_c=0.3, eps_s=0.5)


@dataclass
class SimConfig:
    dt: float = 2e-4
    substeps_per_frame: int = 25
    gravity: tuple = (0.0, -9.8, 0.0)
    domain_bounds: tuple = ((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
    grid_resolution: int = 64
    floor_friction: float = 0.4
    knife_contact_mode: str = "slip"
    knife_friction: float = 0.0
    boundary_cells: int = 3          # grid layers clamped at the domain walls
    skin_thickness: float = 0.01
    particles_per_cell: float = 8.0  # seeding density target

    def validate(self):
        if self.dt <= 0 or self.substeps_per_frame < 1:
            raise ValueError("dt must be positive and substeps_per_frame >= 1")
        if self.grid_resolution < 8:
            raise ValueError("grid_resolution too small")
        if self.knife_contact_mode not in KNIFE_CONTACT_MODES:
            raise ValueError(f"knife_contact_mode must be one of {KNIFE_CONTACT_MODES}")
        if self.floor_friction < 0 or self.knife_friction < 0:
            raise ValueError("friction coefficients must be non-negative")
        lo, hi = np.asarray(self.domain_bounds[0]), np.asarray(self.domain_bounds[1])
        if not np.all(hi > lo):
            raise ValueError("domain_bounds must have positive extent")
        return self

    @property
    def dx(self) -> float:
        lo, hi = np.asarray(self.domain_bounds[0]), np.asarray(self.domain_bounds[1])
        return float((hi - lo).max()) / self.grid_resolution

    @property
    def frame_dt(self) -> float:
        return self.dt * self.substeps_per_frame


@dataclass
class TopologyConfig:
    """Parameters of the damage-to-mesh-to-cluster pipeline."""

    r_p_factor: float = 1.1        # particle radius = factor * mean spacing
    field_cell_factor: float = 1.0  # reconstruction cell = factor * sim dx
    tau_factor: float = 1.5        # cluster-assign cutoff = factor * field cell
    smooth_alpha: float = 0.5
    smooth_iters: int = 10
    margin_cells: int = 3
    max_clusters: int = 32
    min_assign_fraction: float = 0.95

    def validate(self):
        if not (0.0 < self.smooth_alpha <= 1.0):
            raise ValueError("smooth_alpha must lie in (0, 1]")
        if self.smooth_iters < 0 or self.margin_cells < 1:
            raise ValueError("smooth_iters >= 0 and margin_cells >= 1 required")
        if self.max_clusters < 1:
            raise ValueError("max_clusters must be >= 1")
        return self


@dataclass
class RewardParams:
    variant: str = "inverse_scaling"
    # inverse_scaling: R = kappa * max(0, C - gamma * d)
    kappa: float = 1.0
    C: float = 1.0
    gamma: float = 1.0
    # piecewise: R = R_max - gamma_pw * d for d <= tau, then slope -delta
    R_max: float = 1.0
    gamma_pw: float = 0.5
    delta: float = 2.0
    tau: float = 0.5
    success_threshold: float | None = None  # None -> 0.5 * kappa * C

    def validate(self):
        if self.variant not in REWARD_VARIANTS:
            raise ValueError(f"reward variant must be one of {REWARD_VARIANTS}")
        if self.kappa <= 0 or self.C <= 0 or self.gamma <= 0:
            raise ValueError("inverse_scaling parameters must be positive")
        if self.R_max <= 0 or self.gamma_pw <= 0 or self.tau <= 0:
            raise ValueError("piecewise parameters must be positive")
        if self.delta <= self.gamma_pw:
            raise ValueError("piecewise slopes must steepen: delta > gamma_pw")
        return self

    def resolved_success_threshold(self) -> float:
        if self.success_threshold is not None:
            return float(self.success_threshold)
        return 0.5 * self.kappa * self.C


@dataclass
class SpectralConfig:
    num_point: int = 512
    knn_k: int = 30
    k_eig: int = 32
    alpha_w: float = 1.0
    beta_w: float = 1.0
    distance_mode: str = "literal"
    reward: RewardParams = field(default_factory=RewardParams)

    def validate(self):
        if self.num_point < 4 or self.knn_k < 1 or self.k_eig < 1:
            raise ValueError("spectral sizes out of range")
        if self.k_eig > self.num_point:
            raise ValueError("k_eig cannot exceed num_point")
        if self.alpha_w < 0 or self.beta_w < 0:
            raise ValueError("spectral distance weights must be non-negative")
        if self.distance_mode not in DISTANCE_MODES:
            raise ValueError(f"distance_mode must be one of {DISTANCE_MODES}")
        self.reward.validate()
        return self


@dataclass
class MPPIConfig:
    horizon: int = 40
    samples: int = 64
    iterations: int = 8
    temperature: float = 0.1
    sigma_linear: float = 0.01
    sigma_angular: float = 0.02
    control_penalty: tuple = (1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    max_linear_speed: float = 1.0
    max_angular_speed: float = 4.0

    def validate(self):
        if self.horizon < 1 or self.samples < 1 or self.iterations < 1:
            raise ValueError("horizon, samples, iterations must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.sigma_linear <= 0 or self.sigma_angular <= 0:
            raise ValueError("noise scales must be positive")
        if len(self.control_penalty) != 6:
            raise ValueError("control_penalty needs 6 diagonal entries")
        return self

    def noise_sigma(self) -> np.ndarray:
        return np.array([self.sigma_linear] * 3 + [self.sigma_angular] * 3)


@dataclass
class GoalSpec:
    """Target fragment set: a named family plus its dimensions.

    kind "slice": slabs of `thickness` along the cut axis.
    kind "stick": square prisms of `thickness` cross-section.
    kind "dice":  cubes with edge `thickness`.
    "fragments" carries explicit point clouds instead (list of arrays).
    """

    kind: str = "slice"
    thickness: float = 0.1
    sample_count: int = 512
    fragments: list | None = None
    # explicit target extents; None derives them from the object bounds
    dims: tuple | None = None

    def validate(self):
        if self.kind not in ("slice", "stick", "dice", "fragments"):
            raise ValueError("goal kind must be slice, stick, dice, or fragments")
        if self.kind != "fragments" and self.thickness <= 0:
            raise ValueError("goal thickness must be positive")
        if self.kind == "fragments" and not self.fragments:
            raise ValueError("fragments goal requires at least one point cloud")
        if self.sample_count < 1:
            raise ValueError("sample_count must be positive")
        if self.dims is not None:
            d = np.sort(np.asarray(self.dims, dtype=np.float64))
            if d.shape != (3,) or d[0] <= 0:
                raise ValueError("dims must be three positive extents")
            thin = int(np.sum(d < 0.5 * d[2]))
            if self.kind == "slice" and thin != 1:
                raise ValueError("slice dims need exactly one thin axis")
            if self.kind == "stick" and thin != 2:
                raise ValueError("stick dims need two thin axes")
            if self.kind == "dice" and d[2] > 1.5 * d[0]:
                raise ValueError("dice dims must be near-cubic")
        return self


@dataclass
class DiffusionConfig:
    num_steps: int = 16
    beta_scale: float = 0.5  # beta_t = beta_scale * t / num_steps

    def beta(self, t: int) -> float:
        """Flip probability at step t (1-based). Always in (0, 0.5]."""
        if not 1 <= t <= self.num_steps:
            raise ValueError("diffusion step out of range")
        return self.beta_scale * t / self.num_steps

    def validate(self):
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        if not (0.0 < self.beta_scale <= 0.5):
            raise ValueError("beta_scale must lie in (0, 0.5]")
        return self


@dataclass
class RunConfig:
    """Top-level bundle used by the CLI and the teleop service."""

    sim: SimConfig = field(default_factory=SimConfig)
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    mppi: MPPIConfig = field(default_factory=MPPIConfig)
    goal: GoalSpec = field(default_factory=GoalSpec)
    materials: dict = field(default_factory=lambda: {
        "core": default_core_material(), "skin": default_skin_material()})
    object_shape: dict = field(default_factory=lambda: {
        "type": "box", "center": [0.5, 0.24, 0.5], "size": [0.4, 0.2, 0.3]})

    def validate(self):
        self.sim.validate()
        self.topology.validate()
        self.spectral.validate()
        self.mppi.validate()
        self.goal.validate()
        for m in self.materials.values():
            m.validate()
        return self


_GROUPS = {
    "sim": SimConfig, "topology": TopologyConfig, "spectral": SpectralConfig,
    "mppi": MPPIConfig, "goal": GoalSpec,
}


def _dataclass_from_dict(cls, data: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = dict(data)
    if cls is SpectralConfig and "reward" in kwargs:
        kwargs["reward"] = _dataclass_from_dict(RewardParams, kwargs["reward"])
    return cls(**kwargs)


def run_config_from_dict(data: dict) -> RunConfig:
    unknown = set(data) - (set(_GROUPS) | {"materials", "object_shape"})
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    kwargs = {}
    for key, cls in _GROUPS.items():
        if key in data:
            kwargs[key] = _dataclass_from_dict(cls, data[key])
    if "materials" in data:
        kwargs["materials"] = {name: _dataclass_from_dict(MaterialParams, m)
                               for name, m in data["materials"].items()}
    if "object_shape" in data:
        kwargs["object_shape"] = data["object_shape"]
    return RunConfig(**kwargs).validate()


def _jsonify(obj):
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def run_config_to_dict(cfg: RunConfig) -> dict:
    """JSON-ready dict: tuples and arrays become lists so that
    to_dict -> json -> from_dict -> to_dict is a fixed point."""
    return _jsonify(dataclasses.asdict(cfg))


def load_run_config(path) -> RunConfig:
    with open(path) as f:
        return run_config_from_dict(json.load(f))
