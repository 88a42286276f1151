from .sim import MPMSim
from .state import GridState, KnifeState, MaterialTable, ParticleSet, spawn_from_shape

__all__ = ["MPMSim", "GridState", "KnifeState", "MaterialTable", "ParticleSet",
           "spawn_from_shape"]
