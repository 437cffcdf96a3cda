"""Independent oracles shared by the unit and acceptance suites.

Everything here is deliberately dumb: grid scans, bisection, double loops,
finite differences.  None of it calls back into the code path it checks.
"""

import numpy as np


def scalar_prox_oracle(x: float, threshold: float) -> float:
    """Brute-force prox of threshold * |.| at a scalar x: dense grid scan of
    threshold*|p| + 0.5*(p - x)^2, then three zoom-in refinements."""

    def objective(p):
        return threshold * np.abs(p) + 0.5 * (p - x) ** 2

    lo, hi = x - 2 * threshold - 1.0, x + 2 * threshold + 1.0
    best = x
    for _ in range(4):
        grid = np.linspace(lo, hi, 2001)
        vals = objective(grid)
        best = grid[int(np.argmin(vals))]
        width = (hi - lo) / 2000
        lo, hi = best - 2 * width, best + 2 * width
    return float(best)


def l1_projection_bisection_oracle(x: np.ndarray, radius: float) -> np.ndarray:
    """Projection onto the l1 ball by bisecting the soft-threshold level t
    solving sum(max(|x| - t, 0)) = radius.  Independent of any sort."""
    x = np.asarray(x, dtype=float)
    mags = np.abs(x)
    if mags.sum() <= radius:
        return x.copy()
    lo, hi = 0.0, float(mags.max())
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.sum(np.maximum(mags - mid, 0.0)) > radius:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    return np.sign(x) * np.maximum(mags - t, 0.0)


def central_difference_gradient(value_fn, z: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar field, one coordinate at a time."""
    z = np.asarray(z, dtype=float)
    grad = np.zeros_like(z)
    it = np.nditer(z, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        zp = z.copy()
        zm = z.copy()
        zp[idx] += step
        zm[idx] -= step
        grad[idx] = (value_fn(zp) - value_fn(zm)) / (2 * step)
        it.iternext()
    return grad


def prox_objective(g_value, p, x, t):
    return g_value(p) + float(np.vdot(p - x, p - x)) / (2.0 * t)


def sample_l1_ball(rng, shape, radius):
    """Feasible point of the l1 ball: random signs, simplex magnitudes,
    interior scaling (no projection code involved)."""
    mags = rng.dirichlet(np.ones(int(np.prod(shape)))) * radius * rng.uniform(0, 1)
    signs = rng.choice([-1.0, 1.0], size=mags.shape)
    return (signs * mags).reshape(shape)


def sample_magnitude_ball(rng, field_shape, bound):
    """Feasible dual field: per-pixel directions with radii <= bound."""
    p = rng.standard_normal(field_shape)
    norms = np.sqrt(np.sum(p * p, axis=-1, keepdims=True))
    norms[norms == 0] = 1.0
    radii = rng.uniform(0, bound, size=norms.shape)
    return p / norms * radii


def make_psd(rng, p):
    """Nearest-by-construction PSD neighbor of a symmetric matrix p."""
    sym = 0.5 * (p + p.T)
    w, q = np.linalg.eigh(sym)
    return (q * np.maximum(w, 0.0)) @ q.T


def nuclear_norm(X):
    return float(np.sum(np.linalg.svd(np.asarray(X, dtype=float), compute_uv=False)))


def sparse_ls_kkt_violation(a, b, mu, x, support_tol=1e-8):
    """Max violation of the optimality conditions of
    min mu||x||_1 + 0.5||Ax-b||^2: the correlation bound off-support and the
    sign equation on-support."""
    r = a.T @ (a @ x - b)
    bound_violation = float(np.max(np.abs(r)) - mu)
    on_support = np.abs(x) > support_tol
    if np.any(on_support):
        sign_violation = float(
            np.max(np.abs(r[on_support] + mu * np.sign(x[on_support])))
        )
    else:
        sign_violation = 0.0
    return max(bound_violation, sign_violation)


def tv_1d_two_piece_oracle(signal, mu, grid=2001):
    """Exhaustive solve of 1-d TV denoising for a two-level signal [v,v,w,w]:
    brute-force the piecewise values (a, b) over a refined grid."""
    signal = np.asarray(signal, dtype=float)
    n = signal.size
    half = n // 2

    def objective(a, b):
        x = np.concatenate([np.full(half, a), np.full(n - half, b)])
        tv = float(np.sum(np.abs(np.diff(x))))
        return mu * tv + 0.5 * float(np.sum((x - signal) ** 2))

    lo_a, hi_a = signal.min() - 1, signal.max() + 1
    lo_b, hi_b = lo_a, hi_a
    best = (0.0, 0.0)
    for _ in range(3):
        aa = np.linspace(lo_a, hi_a, grid)
        bb = np.linspace(lo_b, hi_b, grid)
        vals = np.array([[objective(a, b) for b in bb] for a in aa[:: max(1, grid // 201)]])
        # coarse pass over a, fine over b, then zoom
        ia, ib = np.unravel_index(np.argmin(vals), vals.shape)
        a_best = aa[:: max(1, grid // 201)][ia]
        b_best = bb[ib]
        best = (a_best, b_best)
        wa = (hi_a - lo_a) / 100
        wb = (hi_b - lo_b) / grid * 4
        lo_a, hi_a = a_best - wa, a_best + wa
        lo_b, hi_b = b_best - wb, b_best + wb
    a, b = best
    return np.concatenate([np.full(half, a), np.full(n - half, b)])
