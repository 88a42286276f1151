"""Discrete-diffusion action kernels over per-point cut masks.

An action is a boolean mask over a conditioning cloud (1 = the point is to
be cut). Forward noising is an independent bit-flip channel per step; the
score of the clean-data posterior has a closed form, so a perfect "oracle"
score function exists and the whole reverse chain is testable without any
learned model. A plane fit plus pose construction turns a sampled mask back
into an executable blade pose.
"""

from __future__ import annotations

import numpy as np

from .geometry import RigidTransform


def make_schedule(num_steps: int, beta_scale: float = 0.5) -> np.ndarray:
    """Linear flip-rate schedule beta_t = beta_scale * t / T, t = 1..T.

    beta_scale defaults to 0.5 so the last step is exactly the symmetric
    channel; rates above 0.5 would anti-correlate with the input.
    """
    if num_steps < 1:
        raise ValueError("schedule needs at least one step")
    betas = beta_scale * np.arange(1, num_steps + 1) / num_steps
    return validate_schedule(betas)


def validate_schedule(betas) -> np.ndarray:
    betas = np.asarray(betas, dtype=np.float64).ravel()
    if betas.size < 1:
        raise ValueError("schedule must be non-empty")
    if np.any(betas <= 0.0) or np.any(betas > 0.5):
        raise ValueError("every beta_t must lie in (0, 0.5]")
    return betas


def action_to_mask(points: np.ndarray, knife_pose: RigidTransform) -> np.ndarray:
    """Side of the blade mid-plane per point; 1 on (and toward) the normal side.

    The mid-plane passes through the blade center with the blade-face normal
    (local z). Points exactly on the plane count as cut.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    normal = knife_pose.rotation[:, 2]
    signed = (pts - knife_pose.translation) @ normal
    return (signed >= 0.0).astype(np.uint8)


def forward_step(mask: np.ndarray, beta: float, rng: np.random.Generator) -> np.ndarray:
    """One forward noising step: flip each bit independently with rate beta."""
    mask = np.asarray(mask, dtype=np.uint8)
    flips = rng.random(mask.shape) < beta
    return mask ^ flips.astype(np.uint8)


def forward_noise(mask: np.ndarray, t: int, betas, rng: np.random.Generator,
                  composed: bool = False) -> np.ndarray:
    """Noised mask after t steps, sequentially or via the closed-form marginal.

    The composed path draws once from p_flip(t) = (1 - prod(1 - 2 beta_s))/2;
    both paths have identical distributions (the channel is binary symmetric,
    so flip probabilities compose through correlations 1 - 2 beta).
    """
    betas = validate_schedule(betas)
    if not 1 <= t <= betas.size:
        raise ValueError("step index out of schedule range")
    if composed:
        p_flip = 0.5 * (1.0 - np.prod(1.0 - 2.0 * betas[:t]))
        return forward_step(mask, p_flip, rng)
    out = np.asarray(mask, dtype=np.uint8)
    for s in range(t):
        out = forward_step(out, betas[s], rng)
    return out


def true_score(noisy: np.ndarray, clean: np.ndarray, beta_t: float) -> np.ndarray:
    """Exact per-point score (delta(noisy == clean) - (1 - beta)) / (beta (1 - beta)).

    Matching bits score 1/(1-beta), mismatching ones -1/beta.
    """
    if not 0.0 < beta_t < 1.0:
        raise ValueError("beta_t must lie strictly between 0 and 1")
    match = (np.asarray(noisy) == np.asarray(clean)).astype(np.float64)
    return (match - (1.0 - beta_t)) / (beta_t * (1.0 - beta_t))


def dse_loss(score_pred: np.ndarray, noisy: np.ndarray, clean: np.ndarray,
             beta_t: float) -> float:
    """Mean squared error against the exact score."""
    target = true_score(noisy, clean, beta_t)
    pred = np.asarray(score_pred, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError("prediction and mask shapes differ")
    return float(((pred - target) ** 2).mean())


def oracle_score_fn(clean: np.ndarray, betas):
    """ScoreFunction built from a known clean mask (testing and datagen).

    Returns per-point 2-class scores: column 0 rates keeping the current
    bit, column 1 rates flipping it, each via the exact score of the bit
    value that class would produce.
    """
    clean = np.asarray(clean, dtype=np.uint8)
    betas = validate_schedule(betas)

    def fn(noisy, t, conditioning=None):
        noisy = np.asarray(noisy, dtype=np.uint8)
        beta = betas[t - 1]
        keep_bit = noisy
        flip_bit = noisy ^ 1
        s_keep = ((keep_bit == clean).astype(np.float64) - (1.0 - beta)) / (beta * (1.0 - beta))
        s_flip = ((flip_bit == clean).astype(np.float64) - (1.0 - beta)) / (beta * (1.0 - beta))
        return np.stack([s_keep, s_flip], axis=1)

    return fn


def reverse_step(noisy: np.ndarray, t: int, score: np.ndarray, betas,
                 rng: np.random.Generator) -> np.ndarray:
    """One denoising step: per point, sample keep-vs-flip from
    softmax([log(1-beta) , log(beta)] + score)."""
    betas = validate_schedule(betas)
    if not 1 <= t <= betas.size:
        raise ValueError("step index out of schedule range")
    noisy = np.asarray(noisy, dtype=np.uint8)
    score = np.asarray(score, dtype=np.float64)
    if score.shape != (noisy.size, 2):
        raise ValueError("score must be (n_points, 2): [keep, flip] per point")
    beta = betas[t - 1]
    logits = score + np.log([1.0 - beta, beta])
    logits -= logits.max(axis=1, keepdims=True)
    probs = np.exp(logits)
    p_flip = probs[:, 1] / probs.sum(axis=1)
    flips = rng.random(noisy.size) < p_flip
    return noisy ^ flips.astype(np.uint8)


def sample_mask(score_fn, n_points: int, betas, rng: np.random.Generator,
                conditioning=None) -> np.ndarray:
    """Full reverse chain from Bernoulli(0.5) noise down to a mask."""
    betas = validate_schedule(betas)
    mask = (rng.random(n_points) < 0.5).astype(np.uint8)
    for t in range(betas.size, 0, -1):
        score = score_fn(mask, t, conditioning)
        mask = reverse_step(mask, t, score, betas, rng)
    return mask


def fit_cut_plane(points: np.ndarray, mask: np.ndarray,
                  mode: str = "tls") -> tuple[np.ndarray, float]:
    """Plane recovered from a cut mask; returns (unit normal, offset d).

    The default total-least-squares mode fits the plane through the
    cut-labeled points (n.x + d = 0 on the plane, the normal's
    largest-magnitude component made positive). mode="margin" instead
    returns the maximum-margin separator between the cut and uncut sets.
    Fewer than three cut points, or a cut set without two independent
    in-plane directions, raises "degenerate cut set".
    """
    if mode == "margin":
        return fit_separating_plane(points, mask)
    if mode != "tls":
        raise ValueError(f"unknown plane fit mode {mode!r}")
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    sel = np.asarray(mask).astype(bool)
    cut = pts[sel]
    if cut.shape[0] < 3:
        raise ValueError("degenerate cut set")
    centroid = cut.mean(axis=0)
    centered = cut - centroid
    scatter = centered.T @ centered
    vals, vecs = np.linalg.eigh(scatter)
    # vals ascending; the plane needs two substantial in-plane directions
    if vals[1] <= 1e-12 * max(vals[2], 1e-300):
        raise ValueError("degenerate cut set")
    n = vecs[:, 0]
    if n[np.abs(n).argmax()] < 0:
        n = -n
    d = -float(n @ centroid)
    return n, d


def fit_separating_plane(points: np.ndarray, mask: np.ndarray,
                         tol: float = 1e-9,
                         max_iters: int = 20000) -> tuple[np.ndarray, float]:
    """Maximum-margin plane between the cut and uncut point sets.

    The margin-maximizing hyperplane of two separable sets bisects the
    shortest segment between their convex hulls; that closest pair is found
    by Frank-Wolfe with exact line search, which needs no QP solver.
    Overlapping hulls (no separator) raise ValueError.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    sel = np.asarray(mask).astype(bool)
    A, B = pts[sel], pts[~sel]
    if A.shape[0] < 1 or B.shape[0] < 1:
        raise ValueError("margin fit needs points on both sides")
    scale = max(float(np.abs(pts).max()), 1.0)
    u, v = A[0].copy(), B[0].copy()
    for _ in range(max_iters):
        w = u - v
        a_star = A[np.argmin(A @ w)]
        b_star = B[np.argmax(B @ w)]
        # duality gap of min ||u - v||^2 over the two hulls
        gap = w @ ((u - v) - (a_star - b_star))
        if gap <= tol * scale * scale:
            break
        d = (a_star - b_star) - (u - v)
        denom = d @ d
        if denom <= 0.0:
            break
        step = min(max(-(w @ d) / denom, 0.0), 1.0)
        u = u + step * (a_star - u)
        v = v + step * (b_star - v)
    w = u - v
    dist = np.linalg.norm(w)
    if dist <= 1e-7 * scale:
        raise ValueError("cut and uncut sets are not linearly separable")
    n = w / dist
    if n[np.abs(n).argmax()] < 0:
        n = -n
    # for a fixed normal the best offset is the midpoint of the extreme
    # projections, which also equalizes the two margins exactly
    lo = float(np.min(A @ n))
    hi = float(np.max(B @ n))
    if hi >= lo:
        raise ValueError("cut and uncut sets are not linearly separable")
    return n, -(lo + hi) / 2.0


def plane_to_knife_pose(normal: np.ndarray, offset: float,
                        object_bounds, clearance: float = 0.0) -> RigidTransform:
    """Blade pose whose mid-plane is the given plane, staged for a top-down cut.

    Blade axes: local x along the (horizontal) edge, local y up the face,
    local z along the plane normal. The center sits on the plane, slid up
    the in-plane vertical so it clears the top of object_bounds; for a
    horizontal plane there is no in-plane vertical and the center stays at
    the projection of the object center.
    """
    n = np.asarray(normal, dtype=np.float64).reshape(3)
    norm = np.linalg.norm(n)
    if abs(norm - 1.0) > 1e-6:
        raise ValueError("normal must be unit length")
    n = n / norm
    up = np.array([0.0, 1.0, 0.0])
    edge = np.cross(up, n)
    if np.linalg.norm(edge) < 1e-9:
        edge = np.array([1.0, 0.0, 0.0])
    else:
        edge = edge / np.linalg.norm(edge)
    face_up = np.cross(n, edge)
    R = np.stack([edge, face_up, n], axis=1)
    lo, hi = (np.asarray(b, dtype=np.float64) for b in object_bounds)
    center = (lo + hi) / 2.0
    on_plane = center - (n @ center + offset) * n
    if abs(face_up[1]) > 1e-9:
        s = (hi[1] + clearance - on_plane[1]) / face_up[1]
        on_plane = on_plane + s * face_up
    return RigidTransform(R, on_plane)
