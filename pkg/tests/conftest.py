from __future__ import annotations

import numpy as np
import pytest

from topocut import MaterialParams, RunConfig, SimConfig
from topocut.config import default_core_material, default_skin_material
from topocut.mpm import MaterialTable, MPMSim, ParticleSet, spawn_from_shape
from topocut.geometry import shape_from_dict


def small_sim_config(**kw) -> SimConfig:
    """Coarse grid keeps unit tests fast; physics settings match defaults."""
    base = dict(grid_resolution=32, substeps_per_frame=25)
    base.update(kw)
    return SimConfig(**base)


def small_run_config(**sim_kw) -> RunConfig:
    run = RunConfig(sim=small_sim_config(**sim_kw))
    run.object_shape = {"type": "box", "center": [0.5, 0.16, 0.5],
                        "size": [0.3, 0.12, 0.24]}
    return run


def build_block_sim(center=(0.5, 0.16, 0.5), size=(0.3, 0.12, 0.24),
                    sim_cfg: SimConfig | None = None,
                    materials: dict | None = None, **sim_kw) -> MPMSim:
    cfg = sim_cfg if sim_cfg is not None else small_sim_config(**sim_kw)
    mats = materials or {"core": default_core_material(),
                         "skin": default_skin_material()}
    table = MaterialTable.from_params(mats)
    shape = shape_from_dict({"type": "box", "center": list(center),
                             "size": list(size)})
    particles = spawn_from_shape(shape, table, cfg)
    sim = MPMSim(cfg, particles, collect_diagnostics=True)
    sim.knife.active = False
    return sim


def single_material_particles(x, v=None, spacing=0.02,
                              params: MaterialParams | None = None) -> ParticleSet:
    table = MaterialTable.from_params({"core": params or default_core_material()})
    ps = ParticleSet(np.asarray(x, dtype=np.float64),
                     np.zeros(len(x), dtype=np.int32), table, spacing)
    if v is not None:
        ps.v[:] = np.asarray(v, dtype=np.float64)
    return ps


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


# Criterion verdicts recorded by the acceptance tests; replayed after the
# run so each pass/fail line is visible even with output capture on.
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
