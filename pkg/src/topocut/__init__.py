"""Deformable-object cutting toolkit.

Particle-grid elastoplastic simulation with blade-driven damage, implicit
fragment discovery with persistent ids, pose-invariant spectral rewards,
sampling-based cut planning, discrete-diffusion action labeling, and the
demonstration dataset pipeline on top of them.
"""

from .config import (DiffusionConfig, GoalSpec, MaterialParams, MPPIConfig,
                     RewardParams, RunConfig, SimConfig, SpectralConfig,
                     TopologyConfig, load_run_config, run_config_from_dict,
                     run_config_to_dict)
from .datagen import (CutAction, CutScript, DemonstrationTuple, EpisodeRecord,
                      FlatTopology, PoseRanges, execute_cut, generate_dataset,
                      generate_goal, randomize_pose, read_dataset, records_equal,
                      replay, run_episode, seed_for_episode, write_dataset)
from .diffusion import (action_to_mask, fit_cut_plane, forward_noise,
                        make_schedule, oracle_score_fn, plane_to_knife_pose,
                        reverse_step, sample_mask, true_score)
from .geometry import RigidTransform, shape_from_dict
from .metrics import (chamfer_distance, earth_mover_distance, hausdorff_distance,
                      hungarian_match, topo_matching_loss)
from .mpm import KnifeState, MaterialTable, MPMSim, ParticleSet, spawn_from_shape
from .planner import MPPIPlanner, make_sim_rollout, mppi_update
from .spectral import (evaluate_fragments, farthest_point_sampling,
                       normalize_reward, spectral_descriptor, spectral_distance)
from .topology import TopologyState, discover_topology

__version__ = "0.1.0"

__all__ = [
    "DiffusionConfig", "GoalSpec", "MaterialParams", "MPPIConfig",
    "RewardParams", "RunConfig", "SimConfig", "SpectralConfig", "TopologyConfig",
    "load_run_config", "run_config_from_dict", "run_config_to_dict",
    "CutAction", "CutScript", "DemonstrationTuple", "EpisodeRecord",
    "FlatTopology", "PoseRanges", "execute_cut", "generate_dataset",
    "generate_goal", "randomize_pose", "read_dataset", "records_equal",
    "replay", "run_episode", "seed_for_episode", "write_dataset",
    "action_to_mask", "fit_cut_plane", "forward_noise", "make_schedule",
    "oracle_score_fn", "plane_to_knife_pose", "reverse_step", "sample_mask",
    "true_score", "RigidTransform", "shape_from_dict", "chamfer_distance",
    "earth_mover_distance", "hausdorff_distance", "hungarian_match",
    "topo_matching_loss", "KnifeState", "MaterialTable", "MPMSim",
    "ParticleSet", "spawn_from_shape", "MPPIPlanner", "make_sim_rollout",
    "mppi_update", "evaluate_fragments", "farthest_point_sampling",
    "normalize_reward", "spectral_descriptor", "spectral_distance",
    "TopologyState", "discover_topology",
]
