"""Reference (numpy) constitutive pieces shared by tests and offline tools.

The hot per-particle loop lives in kernels.f_update; the functions here are
the readable single-particle versions of the same math and must agree with
the kernel bit-for-bit on the same inputs modulo summation order.
"""

from __future__ import annotations

import numpy as np


def von_mises_return_map(F: np.ndarray, sigma_y: float, mu: float):
    """Project the log-strain deviator back to the yield surface.

    Returns (F_projected, delta_eps_p). delta_eps_p is the plastic multiplier,
    zero when the trial state is inside the yield surface. sigma_y == 0
    collapses the shape entirely: the result is the pure dilation
    J^(1/3) * U @ V.T with the same volume as the input.
    """
    if sigma_y < 0:
        raise ValueError("sigma_y must be non-negative")
    if mu <= 0:
        raise ValueError("mu must be positive")
    F = np.asarray(F, dtype=np.float64).reshape(3, 3)
    U, s, Vt = np.linalg.svd(F)
    # keep rotations proper; fold any reflection into the smallest singular value
    if np.linalg.det(U) < 0:
        U[:, 2] *= -1
        s[2] *= -1
    if np.linalg.det(Vt) < 0:
        Vt[2, :] *= -1
        s[2] *= -1
    if s[2] <= 0:
        raise ValueError("return map requires det(F) > 0; regularize first")
    eps = np.log(s)
    mean = eps.mean()
    dev = eps - mean
    dev_norm = float(np.linalg.norm(dev))
    yield_radius = sigma_y / (2.0 * mu)
    if dev_norm <= yield_radius:
        return F.copy(), 0.0
    delta = dev_norm - yield_radius
    eps_proj = eps - delta * dev / dev_norm
    F_new = (U * np.exp(eps_proj)) @ Vt
    return F_new, delta


def fixed_corotated_stress(F: np.ndarray, mu: float, lam: float) -> np.ndarray:
    """First Piola stress times F^T (the volume-scaled Cauchy stress).

    This is the matrix the transfer kernel multiplies by node offsets, up to
    the -dt * 4/dx^2 * V0 prefactor.
    """
    F = np.asarray(F, dtype=np.float64).reshape(3, 3)
    U, s, Vt = np.linalg.svd(F)
    if np.linalg.det(U) < 0:
        U[:, 2] *= -1
        s[2] *= -1
    if np.linalg.det(Vt) < 0:
        Vt[2, :] *= -1
        s[2] *= -1
    R = U @ Vt
    J = float(np.prod(s))
    return 2.0 * mu * (F - R) @ F.T + lam * (J - 1.0) * J * np.eye(3)


def hencky_strain(F: np.ndarray) -> np.ndarray:
    """Principal logarithmic strains, descending."""
    s = np.linalg.svd(np.asarray(F, dtype=np.float64).reshape(3, 3), compute_uv=False)
    return np.log(s)
