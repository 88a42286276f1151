"""Per-substep damage bookkeeping.

A particle is damaged when its volume ratio leaves the material's allowed
band, when its deformation gradient collapses or inverts, or when plastic
softening drives the yield stress to zero. Damage is irreversible and a
damaged particle carries no stress from then on; it keeps advecting as
passive mass so the solver stays total-mass exact.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # solver state types; imported lazily to avoid a cycle
    from ..mpm.state import MaterialTable, ParticleSet


def volume_damage_bounds(table: "MaterialTable"):
    """Per-material J interval (lower, upper); outside it the particle fails."""
    lower = (1.0 - table.eps_c) ** table.m_exp
    upper = (1.0 + table.eps_s) ** table.m_exp
    return lower, upper


def apply_damage_rules(particles: "ParticleSet") -> int:
    """Update softening and damage flags after a substep; returns newly damaged count.

    Must run after the deformation update of the same substep: it consumes
    the fresh J, dgamma, and det_failed arrays and zeroes the stress of any
    particle that failed this substep so the next transfer never sees it.
    """
    table = particles.materials
    mat = particles.material_id

    plastic = table.plastic[mat] & (particles.dgamma > 0.0)
    if plastic.any():
        particles.eps_p_acc[plastic] += particles.dgamma[plastic]
        particles.sigma_y[plastic] -= table.soften[mat[plastic]] * particles.dgamma[plastic]

    lower, upper = volume_damage_bounds(table)
    fail = (particles.J <= lower[mat]) | (particles.J >= upper[mat])
    fail |= particles.det_failed != 0
    fail |= table.plastic[mat] & (particles.sigma_y <= 0.0)

    new = fail & (particles.damaged == 0)
    n_new = int(np.count_nonzero(new))
    if n_new:
        particles.damaged[new] = 1
        particles.S[new] = 0.0
    return n_new
