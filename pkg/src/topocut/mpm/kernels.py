"""Particle-grid transfer kernels for the material point solver.

Everything here is serial by design: loops run in a fixed order so repeated
runs produce bit-identical trajectories regardless of the thread environment.
Grid quantities use quadratic B-spline weights; transfers carry the affine
velocity field and a fused stress contribution per particle.

Scratch buffers are allocated once per kernel call and reused across the
particle loop; none of these functions are re-entrant.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

SIGMA_CLAMP = 1e-3  # singular-value floor used when recovering from inversion


@njit(cache=True)
def _jacobi_eig3(A, V):
    """Diagonalize a symmetric 3x3 in place; V accumulates the eigenbasis."""
    for i in range(3):
        for j in range(3):
            V[i, j] = 1.0 if i == j else 0.0
    for _ in range(16):
        off = A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2
        diag = A[0, 0] ** 2 + A[1, 1] ** 2 + A[2, 2] ** 2
        if off <= 1e-30 * (diag + 1e-300):
            break
        for p in range(2):
            for q in range(p + 1, 3):
                apq = A[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                sign = 1.0 if theta >= 0.0 else -1.0
                t = sign / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                app = A[p, p]
                aqq = A[q, q]
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(3):
                    if k != p and k != q:
                        akp = A[k, p]
                        akq = A[k, q]
                        A[k, p] = c * akp - s * akq
                        A[p, k] = A[k, p]
                        A[k, q] = s * akp + c * akq
                        A[q, k] = A[k, q]
                for k in range(3):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq


@njit(cache=True)
def _det3(F):
    return (F[0, 0] * (F[1, 1] * F[2, 2] - F[1, 2] * F[2, 1])
            - F[0, 1] * (F[1, 0] * F[2, 2] - F[1, 2] * F[2, 0])
            + F[0, 2] * (F[1, 0] * F[2, 1] - F[1, 1] * F[2, 0]))


@njit(cache=True)
def svd3(F, U, sig, V, scratch):
    """Rotation-safe SVD: U and V are proper rotations, sig[0] >= sig[1] >= |sig[2]|,
    and sig[2] carries the sign of det(F)."""
    for i in range(3):
        for j in range(3):
            s = 0.0
            for k in range(3):
                s += F[k, i] * F[k, j]
            scratch[i, j] = s
    _jacobi_eig3(scratch, V)
    ev = np.empty(3)
    ev[0] = scratch[0, 0]
    ev[1] = scratch[1, 1]
    ev[2] = scratch[2, 2]
    # descending sort of three values, stable on ties so identity maps to itself
    i0 = 0
    if ev[1] > ev[i0]:
        i0 = 1
    if ev[2] > ev[i0]:
        i0 = 2
    i1 = -1
    for k in range(3):
        if k != i0 and (i1 < 0 or ev[k] > ev[i1]):
            i1 = k
    i2 = 3 - i0 - i1
    tmp = np.empty((3, 3))
    cols = (i0, i1, i2)
    for c in range(3):
        src = cols[c]
        sig[c] = math.sqrt(max(ev[src], 0.0))
        for r in range(3):
            tmp[r, c] = V[r, src]
    for r in range(3):
        for c in range(3):
            V[r, c] = tmp[r, c]
    if _det3(V) < 0.0:
        for r in range(3):
            V[r, 2] = -V[r, 2]
    detF = _det3(F)
    tiny = 1e-12 * (sig[0] + 1e-300)
    # first two columns of U from the image of V; third via cross product so
    # U stays a proper rotation even when F is rank-deficient
    if sig[0] > tiny:
        inv = 1.0 / sig[0]
        for r in range(3):
            s = 0.0
            for k in range(3):
                s += F[r, k] * V[k, 0]
            U[r, 0] = s * inv
    else:
        for r in range(3):
            U[r, 0] = 1.0 if r == 0 else 0.0
    if sig[1] > tiny:
        inv = 1.0 / sig[1]
        for r in range(3):
            s = 0.0
            for k in range(3):
                s += F[r, k] * V[k, 1]
            U[r, 1] = s * inv
        d = U[0, 0] * U[0, 1] + U[1, 0] * U[1, 1] + U[2, 0] * U[2, 1]
        for r in range(3):
            U[r, 1] -= d * U[r, 0]
        n = math.sqrt(U[0, 1] ** 2 + U[1, 1] ** 2 + U[2, 1] ** 2)
        if n > 1e-300:
            for r in range(3):
                U[r, 1] /= n
    else:
        a = 0
        if abs(U[1, 0]) < abs(U[a, 0]):
            a = 1
        if abs(U[2, 0]) < abs(U[a, 0]):
            a = 2
        for r in range(3):
            U[r, 1] = (1.0 if r == a else 0.0) - U[a, 0] * U[r, 0]
        n = math.sqrt(U[0, 1] ** 2 + U[1, 1] ** 2 + U[2, 1] ** 2)
        for r in range(3):
            U[r, 1] /= n
    U[0, 2] = U[1, 0] * U[2, 1] - U[2, 0] * U[1, 1]
    U[1, 2] = U[2, 0] * U[0, 1] - U[0, 0] * U[2, 1]
    U[2, 2] = U[0, 0] * U[1, 1] - U[1, 0] * U[0, 1]
    if detF < 0.0:
        sig[2] = -sig[2]


@njit(cache=True)
def clear_grid(grid_m, grid_mv, lo0, lo1, lo2, hi0, hi1, hi2):
    """Zero the node region [lo, hi); full-grid clears are too slow per substep."""
    for i in range(lo0, hi0):
        for j in range(lo1, hi1):
            for k in range(lo2, hi2):
                grid_m[i, j, k] = 0.0
                grid_mv[i, j, k, 0] = 0.0
                grid_mv[i, j, k, 1] = 0.0
                grid_mv[i, j, k, 2] = 0.0


@njit(cache=True)
def p2g(x, v, C, S, m, grid_m, grid_mv, dx):
    """Scatter mass and momentum to the grid.

    The per-particle matrix m*C + S multiplies the node offset, carrying both
    the affine velocity field and the stress-driven force increment.
    """
    inv_dx = 1.0 / dx
    n = x.shape[0]
    for p in range(n):
        gx = x[p, 0] * inv_dx
        gy = x[p, 1] * inv_dx
        gz = x[p, 2] * inv_dx
        b0 = int(math.floor(gx - 0.5))
        b1 = int(math.floor(gy - 0.5))
        b2 = int(math.floor(gz - 0.5))
        fx = gx - b0
        fy = gy - b1
        fz = gz - b2
        wx0 = 0.5 * (1.5 - fx) ** 2
        wx1 = 0.75 - (fx - 1.0) ** 2
        wx2 = 0.5 * (fx - 0.5) ** 2
        wy0 = 0.5 * (1.5 - fy) ** 2
        wy1 = 0.75 - (fy - 1.0) ** 2
        wy2 = 0.5 * (fy - 0.5) ** 2
        wz0 = 0.5 * (1.5 - fz) ** 2
        wz1 = 0.75 - (fz - 1.0) ** 2
        wz2 = 0.5 * (fz - 0.5) ** 2
        mp = m[p]
        a00 = mp * C[p, 0, 0] + S[p, 0, 0]
        a01 = mp * C[p, 0, 1] + S[p, 0, 1]
        a02 = mp * C[p, 0, 2] + S[p, 0, 2]
        a10 = mp * C[p, 1, 0] + S[p, 1, 0]
        a11 = mp * C[p, 1, 1] + S[p, 1, 1]
        a12 = mp * C[p, 1, 2] + S[p, 1, 2]
        a20 = mp * C[p, 2, 0] + S[p, 2, 0]
        a21 = mp * C[p, 2, 1] + S[p, 2, 1]
        a22 = mp * C[p, 2, 2] + S[p, 2, 2]
        mv0 = mp * v[p, 0]
        mv1 = mp * v[p, 1]
        mv2 = mp * v[p, 2]
        for i in range(3):
            wi = wx0 if i == 0 else (wx1 if i == 1 else wx2)
            d0 = (i - fx) * dx
            for j in range(3):
                wj = wy0 if j == 0 else (wy1 if j == 1 else wy2)
                d1 = (j - fy) * dx
                wij = wi * wj
                for k in range(3):
                    wk = wz0 if k == 0 else (wz1 if k == 1 else wz2)
                    d2 = (k - fz) * dx
                    w = wij * wk
                    gi = b0 + i
                    gj = b1 + j
                    gk = b2 + k
                    grid_m[gi, gj, gk] += w * mp
                    grid_mv[gi, gj, gk, 0] += w * (mv0 + a00 * d0 + a01 * d1 + a02 * d2)
                    grid_mv[gi, gj, gk, 1] += w * (mv1 + a10 * d0 + a11 * d1 + a12 * d2)
                    grid_mv[gi, gj, gk, 2] += w * (mv2 + a20 * d0 + a21 * d1 + a22 * d2)


@njit(cache=True)
def grid_update(grid_m, grid_mv, lo0, lo1, lo2, hi0, hi1, hi2, dt, dx,
                g0, g1, g2, res, nb, floor_mu,
                knife_active, kR, kt, kh, kvlin, kwang, knife_mu, knife_sticky):
    """Convert momentum to velocity, apply gravity, wall and knife contact.

    Velocities are written back into grid_mv (storage reuse; G2P reads it as
    velocity). Walls: frictional no-penetration floor, slip on the other five
    faces. Knife: oriented-box collider moving with a rigid twist; slip mode
    removes the approaching normal component of the relative velocity, sticky
    mode pins the node to the blade motion.
    """
    for i in range(lo0, hi0):
        for j in range(lo1, hi1):
            for k in range(lo2, hi2):
                mass = grid_m[i, j, k]
                if mass <= 0.0:
                    continue
                inv_m = 1.0 / mass
                v0 = grid_mv[i, j, k, 0] * inv_m + dt * g0
                v1 = grid_mv[i, j, k, 1] * inv_m + dt * g1
                v2 = grid_mv[i, j, k, 2] * inv_m + dt * g2
                if knife_active:
                    # node position relative to blade frame
                    px = i * dx - kt[0]
                    py = j * dx - kt[1]
                    pz = k * dx - kt[2]
                    lx = kR[0, 0] * px + kR[1, 0] * py + kR[2, 0] * pz
                    ly = kR[0, 1] * px + kR[1, 1] * py + kR[2, 1] * pz
                    lz = kR[0, 2] * px + kR[1, 2] * py + kR[2, 2] * pz
                    qx = abs(lx) - kh[0]
                    qy = abs(ly) - kh[1]
                    qz = abs(lz) - kh[2]
                    if qx < 0.0 and qy < 0.0 and qz < 0.0:
                        # blade point velocity at the node
                        kv0 = kvlin[0] + kwang[1] * pz - kwang[2] * py
                        kv1 = kvlin[1] + kwang[2] * px - kwang[0] * pz
                        kv2 = kvlin[2] + kwang[0] * py - kwang[1] * px
                        if knife_sticky:
                            v0 = kv0
                            v1 = kv1
                            v2 = kv2
                        else:
                            r0 = v0 - kv0
                            r1 = v1 - kv1
                            r2 = v2 - kv2
                            # outward normal from the closest box face
                            axis = 0
                            best = qx
                            if qy > best:
                                best = qy
                                axis = 1
                            if qz > best:
                                axis = 2
                            if axis == 0:
                                sgn = 1.0 if lx >= 0.0 else -1.0
                                n0 = sgn * kR[0, 0]
                                n1 = sgn * kR[1, 0]
                                n2 = sgn * kR[2, 0]
                            elif axis == 1:
                                sgn = 1.0 if ly >= 0.0 else -1.0
                                n0 = sgn * kR[0, 1]
                                n1 = sgn * kR[1, 1]
                                n2 = sgn * kR[2, 1]
                            else:
                                sgn = 1.0 if lz >= 0.0 else -1.0
                                n0 = sgn * kR[0, 2]
                                n1 = sgn * kR[1, 2]
                                n2 = sgn * kR[2, 2]
                            vn = r0 * n0 + r1 * n1 + r2 * n2
                            if vn < 0.0:
                                r0 -= vn * n0
                                r1 -= vn * n1
                                r2 -= vn * n2
                                if knife_mu > 0.0:
                                    vt = math.sqrt(r0 * r0 + r1 * r1 + r2 * r2)
                                    if vt > 1e-300:
                                        scale = 1.0 + knife_mu * vn / vt  # vn < 0
                                        if scale < 0.0:
                                            scale = 0.0
                                        r0 *= scale
                                        r1 *= scale
                                        r2 *= scale
                            v0 = kv0 + r0
                            v1 = kv1 + r1
                            v2 = kv2 + r2
                if i < nb and v0 < 0.0:
                    v0 = 0.0
                if i > res - nb and v0 > 0.0:
                    v0 = 0.0
                if k < nb and v2 < 0.0:
                    v2 = 0.0
                if k > res - nb and v2 > 0.0:
                    v2 = 0.0
                if j > res - nb and v1 > 0.0:
                    v1 = 0.0
                if j < nb and v1 < 0.0:
                    vn = -v1
                    v1 = 0.0
                    vt = math.sqrt(v0 * v0 + v2 * v2)
                    if vt > 1e-300:
                        scale = 1.0 - floor_mu * vn / vt
                        if scale < 0.0:
                            scale = 0.0
                        v0 *= scale
                        v2 *= scale
                grid_mv[i, j, k, 0] = v0
                grid_mv[i, j, k, 1] = v1
                grid_mv[i, j, k, 2] = v2


@njit(cache=True)
def g2p(x, v, C, grid_v, dt, dx, res):
    """Gather velocities and affine field, then advect particles.

    Positions are clamped one cell short of the stencil-safe range so the
    next transfer can never index outside the node arrays.
    """
    inv_dx = 1.0 / dx
    xmin = 1.0 * dx
    xmax = (res - 1.0) * dx
    n = x.shape[0]
    for p in range(n):
        gx = x[p, 0] * inv_dx
        gy = x[p, 1] * inv_dx
        gz = x[p, 2] * inv_dx
        b0 = int(math.floor(gx - 0.5))
        b1 = int(math.floor(gy - 0.5))
        b2 = int(math.floor(gz - 0.5))
        fx = gx - b0
        fy = gy - b1
        fz = gz - b2
        wx0 = 0.5 * (1.5 - fx) ** 2
        wx1 = 0.75 - (fx - 1.0) ** 2
        wx2 = 0.5 * (fx - 0.5) ** 2
        wy0 = 0.5 * (1.5 - fy) ** 2
        wy1 = 0.75 - (fy - 1.0) ** 2
        wy2 = 0.5 * (fy - 0.5) ** 2
        wz0 = 0.5 * (1.5 - fz) ** 2
        wz1 = 0.75 - (fz - 1.0) ** 2
        wz2 = 0.5 * (fz - 0.5) ** 2
        nv0 = 0.0
        nv1 = 0.0
        nv2 = 0.0
        c00 = 0.0
        c01 = 0.0
        c02 = 0.0
        c10 = 0.0
        c11 = 0.0
        c12 = 0.0
        c20 = 0.0
        c21 = 0.0
        c22 = 0.0
        for i in range(3):
            wi = wx0 if i == 0 else (wx1 if i == 1 else wx2)
            d0 = (i - fx) * dx
            for j in range(3):
                wj = wy0 if j == 0 else (wy1 if j == 1 else wy2)
                d1 = (j - fy) * dx
                wij = wi * wj
                for k in range(3):
                    wk = wz0 if k == 0 else (wz1 if k == 1 else wz2)
                    d2 = (k - fz) * dx
                    w = wij * wk
                    gi = b0 + i
                    gj = b1 + j
                    gk = b2 + k
                    gv0 = grid_v[gi, gj, gk, 0]
                    gv1 = grid_v[gi, gj, gk, 1]
                    gv2 = grid_v[gi, gj, gk, 2]
                    nv0 += w * gv0
                    nv1 += w * gv1
                    nv2 += w * gv2
                    c00 += w * gv0 * d0
                    c01 += w * gv0 * d1
                    c02 += w * gv0 * d2
                    c10 += w * gv1 * d0
                    c11 += w * gv1 * d1
                    c12 += w * gv1 * d2
                    c20 += w * gv2 * d0
                    c21 += w * gv2 * d1
                    c22 += w * gv2 * d2
        v[p, 0] = nv0
        v[p, 1] = nv1
        v[p, 2] = nv2
        scale = 4.0 * inv_dx * inv_dx
        C[p, 0, 0] = scale * c00
        C[p, 0, 1] = scale * c01
        C[p, 0, 2] = scale * c02
        C[p, 1, 0] = scale * c10
        C[p, 1, 1] = scale * c11
        C[p, 1, 2] = scale * c12
        C[p, 2, 0] = scale * c20
        C[p, 2, 1] = scale * c21
        C[p, 2, 2] = scale * c22
        nx = x[p, 0] + dt * nv0
        ny = x[p, 1] + dt * nv1
        nz = x[p, 2] + dt * nv2
        x[p, 0] = min(max(nx, xmin), xmax)
        x[p, 1] = min(max(ny, xmin), xmax)
        x[p, 2] = min(max(nz, xmin), xmax)


@njit(cache=True)
def f_update(F, C, S, V0, J, sigma_y, dgamma, damaged, det_failed, mat_id,
             mu_arr, lam_arr, plastic_arr, dt, dx):
    """Advance deformation gradients, run the plastic return map, build stress.

    Per particle: F <- (I + dt*C) F, then a rotation-safe SVD. Inverted or
    collapsed configurations get singular values floored at SIGMA_CLAMP and
    are flagged in det_failed for the damage rules. Plastic materials project
    the log-strain deviator back to the yield surface; dgamma records the
    plastic increment for softening. S holds the fused stress term used by
    the next transfer; damaged particles carry zero stress.
    """
    n = F.shape[0]
    inv_dx2_4 = 4.0 / (dx * dx)
    Fn = np.empty((3, 3))
    U = np.empty((3, 3))
    V = np.empty((3, 3))
    scratch = np.empty((3, 3))
    sig = np.empty(3)
    eps = np.empty(3)
    for p in range(n):
        # F <- (I + dt C) F
        for r in range(3):
            c0 = dt * C[p, r, 0]
            c1 = dt * C[p, r, 1]
            c2 = dt * C[p, r, 2]
            if r == 0:
                c0 += 1.0
            elif r == 1:
                c1 += 1.0
            else:
                c2 += 1.0
            Fn[r, 0] = c0 * F[p, 0, 0] + c1 * F[p, 1, 0] + c2 * F[p, 2, 0]
            Fn[r, 1] = c0 * F[p, 0, 1] + c1 * F[p, 1, 1] + c2 * F[p, 2, 1]
            Fn[r, 2] = c0 * F[p, 0, 2] + c1 * F[p, 1, 2] + c2 * F[p, 2, 2]
        svd3(Fn, U, sig, V, scratch)
        dgamma[p] = 0.0
        failed = False
        if sig[2] <= 0.0:
            failed = True
        rebuilt = False
        for c in range(3):
            if sig[c] < SIGMA_CLAMP:
                sig[c] = SIGMA_CLAMP
                rebuilt = True
        eps[0] = math.log(sig[0])
        eps[1] = math.log(sig[1])
        eps[2] = math.log(sig[2])
        if plastic_arr[mat_id[p]] and sigma_y[p] > 0.0 and damaged[p] == 0 and not failed:
            mean = (eps[0] + eps[1] + eps[2]) / 3.0
            dv0 = eps[0] - mean
            dv1 = eps[1] - mean
            dv2 = eps[2] - mean
            dev_norm = math.sqrt(dv0 * dv0 + dv1 * dv1 + dv2 * dv2)
            excess = dev_norm - sigma_y[p] / (2.0 * mu_arr[mat_id[p]])
            if excess > 0.0:
                scale = (dev_norm - excess) / dev_norm
                eps[0] = mean + dv0 * scale
                eps[1] = mean + dv1 * scale
                eps[2] = mean + dv2 * scale
                sig[0] = math.exp(eps[0])
                sig[1] = math.exp(eps[1])
                sig[2] = math.exp(eps[2])
                dgamma[p] = excess
                rebuilt = True
        if rebuilt or failed:
            # F = U diag(sig) V^T
            for r in range(3):
                u0 = U[r, 0] * sig[0]
                u1 = U[r, 1] * sig[1]
                u2 = U[r, 2] * sig[2]
                Fn[r, 0] = u0 * V[0, 0] + u1 * V[0, 1] + u2 * V[0, 2]
                Fn[r, 1] = u0 * V[1, 0] + u1 * V[1, 1] + u2 * V[1, 2]
                Fn[r, 2] = u0 * V[2, 0] + u1 * V[2, 1] + u2 * V[2, 2]
        for r in range(3):
            F[p, r, 0] = Fn[r, 0]
            F[p, r, 1] = Fn[r, 1]
            F[p, r, 2] = Fn[r, 2]
        Jp = sig[0] * sig[1] * sig[2]
        J[p] = Jp
        det_failed[p] = 1 if failed else 0
        if damaged[p] != 0:
            for r in range(3):
                S[p, r, 0] = 0.0
                S[p, r, 1] = 0.0
                S[p, r, 2] = 0.0
            continue
        mu = mu_arr[mat_id[p]]
        lam = lam_arr[mat_id[p]]
        two_mu = 2.0 * mu
        lam_term = lam * (Jp - 1.0) * Jp
        coef = -dt * inv_dx2_4 * V0[p]
        for r in range(3):
            # (F - R) F^T with R = U V^T
            rr0 = U[r, 0] * V[0, 0] + U[r, 1] * V[0, 1] + U[r, 2] * V[0, 2]
            rr1 = U[r, 0] * V[1, 0] + U[r, 1] * V[1, 1] + U[r, 2] * V[1, 2]
            rr2 = U[r, 0] * V[2, 0] + U[r, 1] * V[2, 1] + U[r, 2] * V[2, 2]
            e0 = Fn[r, 0] - rr0
            e1 = Fn[r, 1] - rr1
            e2 = Fn[r, 2] - rr2
            for c in range(3):
                val = two_mu * (e0 * Fn[c, 0] + e1 * Fn[c, 1] + e2 * Fn[c, 2])
                if c == r:
                    val += lam_term
                S[p, r, c] = coef * val


@njit(cache=True)
def knife_sdf_points(points, kR, kt, kh, out):
    """Exact oriented-box signed distance for an array of points."""
    n = points.shape[0]
    for p in range(n):
        px = points[p, 0] - kt[0]
        py = points[p, 1] - kt[1]
        pz = points[p, 2] - kt[2]
        lx = kR[0, 0] * px + kR[1, 0] * py + kR[2, 0] * pz
        ly = kR[0, 1] * px + kR[1, 1] * py + kR[2, 1] * pz
        lz = kR[0, 2] * px + kR[1, 2] * py + kR[2, 2] * pz
        qx = abs(lx) - kh[0]
        qy = abs(ly) - kh[1]
        qz = abs(lz) - kh[2]
        ox = qx if qx > 0.0 else 0.0
        oy = qy if qy > 0.0 else 0.0
        oz = qz if qz > 0.0 else 0.0
        outside = math.sqrt(ox * ox + oy * oy + oz * oz)
        inside = qx
        if qy > inside:
            inside = qy
        if qz > inside:
            inside = qz
        if inside > 0.0:
            inside = 0.0
        out[p] = outside + inside
