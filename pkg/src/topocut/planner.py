"""Sampling-based trajectory refinement over knife twists.

The optimizer is generic over a rollout cost; the simulator-backed rollout
lives here too but any callable mapping an action sequence to a scalar cost
works (the test surrogates exploit this). Costs are "lower is better";
rewards enter negated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import MPPIConfig, SpectralConfig, TopologyConfig
from .spectral import evaluate_fragments
from .topology import discover_topology


def sample_perturbations(config: MPPIConfig, rng: np.random.Generator) -> np.ndarray:
    """K x H x 6 Gaussian noise with the configured diagonal covariance."""
    sigma = config.noise_sigma()
    return rng.normal(size=(config.samples, config.horizon, 6)) * sigma


def control_cost(U: np.ndarray, penalty) -> float:
    """Sum over the horizon of a' diag(penalty) a."""
    p = np.asarray(penalty, dtype=np.float64).reshape(6)
    return float((np.asarray(U) ** 2 * p).sum())


def clamp_actions(U: np.ndarray, config: MPPIConfig) -> np.ndarray:
    out = np.array(U, dtype=np.float64, copy=True)
    out[..., :3] = np.clip(out[..., :3], -config.max_linear_speed, config.max_linear_speed)
    out[..., 3:] = np.clip(out[..., 3:], -config.max_angular_speed, config.max_angular_speed)
    return out


def mppi_update(U: np.ndarray, eps: np.ndarray, costs: np.ndarray, lam: float) -> np.ndarray:
    """Exponentially weighted average of perturbations added to the mean.

    Weights use max-subtraction (w_k = exp(-(J_k - min J)/lambda)), which
    makes the update exactly invariant to shifting all costs by a constant.
    Non-finite costs drop out before stabilization so one diverged rollout
    cannot poison the weights.
    """
    costs = np.asarray(costs, dtype=np.float64)
    finite = np.isfinite(costs)
    if not finite.any():
        raise RuntimeError("no viable sample")
    j = costs[finite]
    w = np.exp(-(j - j.min()) / lam)
    w = w / w.sum()
    delta = np.tensordot(w, eps[finite], axes=(0, 0))
    return np.asarray(U) + delta


@dataclass
class PlanLogs:
    mean_costs: list = field(default_factory=list)   # cost of the mean sequence per pass
    best_sample_costs: list = field(default_factory=list)
    tuples: list = field(default_factory=list)       # (state_tag, action, reward) records


class MPPIPlanner:
    """Receding-horizon driver: refine, emit the first action, shift."""

    def __init__(self, rollout_fn, config: MPPIConfig, rng: np.random.Generator,
                 U0: np.ndarray | None = None):
        self.rollout_fn = rollout_fn
        self.config = config.validate()
        self.rng = rng
        self.U = np.zeros((config.horizon, 6)) if U0 is None else \
            clamp_actions(np.asarray(U0, dtype=np.float64), config)
        if self.U.shape != (config.horizon, 6):
            raise ValueError("warm start must be horizon x 6")
        self.logs = PlanLogs()

    def refine(self, iterations: int | None = None):
        iters = self.config.iterations if iterations is None else iterations
        for _ in range(iters):
            eps = sample_perturbations(self.config, self.rng)
            costs = np.empty(self.config.samples)
            for k in range(self.config.samples):
                costs[k] = self.rollout_fn(clamp_actions(self.U + eps[k], self.config))
            self.U = clamp_actions(
                mppi_update(self.U, eps, costs, self.config.temperature), self.config)
            finite = costs[np.isfinite(costs)]
            self.logs.best_sample_costs.append(float(finite.min()) if finite.size else float("inf"))
            self.logs.mean_costs.append(float(self.rollout_fn(self.U)))
        return self.U

    def step(self) -> np.ndarray:
        """One planning cycle: refine, pop the first action, zero-pad the tail."""
        self.refine()
        action = self.U[0].copy()
        self.U = np.concatenate([self.U[1:], np.zeros((1, 6))], axis=0)
        return action


def make_sim_rollout(sim, goal_clouds: list, spectral_cfg: SpectralConfig,
                     topo_cfg: TopologyConfig, penalty=None):
    """Simulator-backed rollout cost for an action sequence.

    Clones the simulation, applies one twist per frame, rebuilds topology
    from the resulting damage and blade sweep, and scores the fragments:
    J = -R_total + control cost. Simulator failures surface as +inf so the
    sample simply loses all weight.
    """
    if penalty is None:
        penalty = np.ones(6)

    def rollout(U: np.ndarray) -> float:
        try:
            trial = sim.clone()
            for a in U:
                trial.step_frame((a[:3], a[3:]))
            p = trial.particles
            state = discover_topology(p.x, p.damaged == 0, p.cluster_id.astype(np.int64),
                                      p.particle_radius(), trial.config.dx, topo_cfg,
                                      swept=trial.drain_swept_poses())
            ev = evaluate_fragments([c.points for c in state.clusters], goal_clouds,
                                    spectral_cfg)
            return -ev.R_total + control_cost(U, penalty)
        except (RuntimeError, ValueError, FloatingPointError):
            return float("inf")

    return rollout
