"""Proximal operators, projections, and smooth value/gradient pairs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

__all__ = [
    "ProxFn",
    "SmoothFn",
    "shrink",
    "project_l1_ball",
    "prox_linf",
    "shrink_nuclear",
    "prox_psd_nuclear",
    "logit_value",
    "logit_gradient",
    "project_box_magnitude",
    "l1_penalty",
    "l1_ball_constraint",
    "linf_penalty",
    "nuclear_penalty",
    "psd_nuclear_penalty",
    "magnitude_ball_constraint",
    "zero_penalty",
    "half_squared_loss",
    "squared_loss",
    "logistic_loss",
]


@dataclass(frozen=True)
class ProxFn:
    """A nonsmooth term g, carried as its proximal map and optional value.

    ``evaluate(x, t)`` returns ``argmin_p g(p) + ||p - x||^2 / (2 t)`` for
    t > 0, and x itself at t = 0.  ``value`` is only needed when the solver
    records objectives.
    """

    evaluate: Callable[[np.ndarray, float], np.ndarray]
    value: Optional[Callable[[np.ndarray], float]] = None


@dataclass(frozen=True)
class SmoothFn:
    """A differentiable term f, carried as a value/gradient pair."""

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]


def shrink(x, threshold: float) -> np.ndarray:
    """Soft-threshold: componentwise sign(x) * max(|x| - threshold, 0).

    Proximal map of ``threshold * ||.||_1`` at unit stepsize.
    """
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - threshold, 0.0)


def project_l1_ball(x, radius: float) -> np.ndarray:
    """Euclidean projection onto the l1 ball of the given radius.

    Interior points are returned unchanged; otherwise the shrink threshold
    is found by sorting the magnitudes (Duchi-style selection).
    """
    if radius <= 0:
        raise ValueError(f"radius must be > 0, got {radius}")
    x = np.asarray(x, dtype=float)
    mags = np.abs(x)
    if mags.sum() <= radius:
        return x.copy()
    u = np.sort(mags, axis=None)[::-1]
    cumsum = np.cumsum(u)
    counts = np.arange(1, u.size + 1)
    candidates = (cumsum - radius) / counts
    rho = np.nonzero(u - candidates > 0)[0][-1]
    theta = candidates[rho]
    return np.sign(x) * np.maximum(mags - theta, 0.0)


def prox_linf(x, weight: float) -> np.ndarray:
    """Proximal map of ``weight * ||.||_inf`` via Moreau decomposition.

    Equals ``x - project_l1_ball(x, weight)``; identity at weight 0.
    """
    if weight < 0:
        raise ValueError(f"weight must be >= 0, got {weight}")
    x = np.asarray(x, dtype=float)
    if weight == 0:
        return x.copy()
    return x - project_l1_ball(x, weight)


def shrink_nuclear(X, threshold: float) -> np.ndarray:
    """Singular value thresholding: U shrink(S, threshold) V^T of the SVD."""
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    X = np.asarray(X, dtype=float)
    if not np.isfinite(X).all():
        raise ValueError("non-finite entries in matrix input")
    u, s, vt = np.linalg.svd(X, full_matrices=False)
    s = np.maximum(s - threshold, 0.0)
    return (u * s) @ vt


def prox_psd_nuclear(X, threshold: float) -> np.ndarray:
    """Joint prox of ``threshold * ||.||_*`` and the PSD-cone indicator.

    Symmetrizes the input, then clamps the shifted eigenvalues at zero, so the
    output is PSD by construction.
    """
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    X = np.asarray(X, dtype=float)
    if not np.isfinite(X).all():
        raise ValueError("non-finite entries in matrix input")
    sym = 0.5 * (X + X.T)
    w, q = np.linalg.eigh(sym)
    w = np.maximum(w - threshold, 0.0)
    out = (q * w) @ q.T
    return 0.5 * (out + out.T)


def _check_binary(b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if not np.all((b == 0.0) | (b == 1.0)):
        raise ValueError("labels must be 0/1 valued")
    return b


def logit_value(z, b) -> float:
    """Logistic loss sum(log(e^{z_i} + 1) - b_i z_i) for 0/1 labels b.

    Uses the overflow-safe rewrite log(e^z + 1) = max(z, 0) + log1p(e^{-|z|}).
    """
    b = _check_binary(b)
    z = np.asarray(z, dtype=float)
    return float(np.sum(np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z))) - b * z))


def logit_gradient(z, b) -> np.ndarray:
    """Gradient of :func:`logit_value`: sigmoid(z) - b, computed stably."""
    b = _check_binary(b)
    z = np.asarray(z, dtype=float)
    return expit(z) - b


def project_box_magnitude(p, bound: float) -> np.ndarray:
    """Scale each trailing-axis vector of ``p`` to Euclidean norm <= bound.

    ``p`` has shape ``image-shape + (d,)``; the per-pixel d-vectors are
    radially projected, which leaves interior vectors untouched.
    """
    if bound < 0:
        raise ValueError(f"bound must be >= 0, got {bound}")
    p = np.asarray(p, dtype=float)
    norms = np.sqrt(np.sum(p * p, axis=-1, keepdims=True))
    denom = np.maximum(bound, norms)
    scale = np.divide(bound, denom, out=np.ones_like(denom), where=denom > 0)
    return p * scale


# ---------------------------------------------------------------------------
# Ready-made g terms


def l1_penalty(mu: float) -> ProxFn:
    """g(x) = mu * ||x||_1."""
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    return ProxFn(
        evaluate=lambda x, t: shrink(x, mu * t),
        value=lambda x: mu * float(np.sum(np.abs(x))),
    )


def l1_ball_constraint(radius: float) -> ProxFn:
    """Indicator of the l1 ball; the prox is the stepsize-independent projection."""
    if radius <= 0:
        raise ValueError(f"radius must be > 0, got {radius}")

    def value(x):
        return 0.0 if np.sum(np.abs(x)) <= radius * (1 + 1e-9) + 1e-12 else np.inf

    return ProxFn(evaluate=lambda x, t: project_l1_ball(x, radius), value=value)


def linf_penalty(mu: float) -> ProxFn:
    """g(x) = mu * ||x||_inf."""
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    return ProxFn(
        evaluate=lambda x, t: prox_linf(x, mu * t),
        value=lambda x: mu * float(np.max(np.abs(x))),
    )


def nuclear_penalty(mu: float) -> ProxFn:
    """g(X) = mu * ||X||_* (sum of singular values)."""
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    return ProxFn(
        evaluate=lambda X, t: shrink_nuclear(X, mu * t),
        value=lambda X: mu * float(np.sum(np.linalg.svd(X, compute_uv=False))),
    )


def psd_nuclear_penalty(mu: float) -> ProxFn:
    """g(X) = mu * ||X||_* plus the PSD-cone indicator (for symmetric X)."""
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")

    def value(X):
        w = np.linalg.eigvalsh(0.5 * (X + np.asarray(X).T))
        if w.min() < -1e-8 * max(1.0, abs(w.max())):
            return np.inf
        return mu * float(np.sum(np.maximum(w, 0.0)))

    return ProxFn(evaluate=lambda X, t: prox_psd_nuclear(X, mu * t), value=value)


def magnitude_ball_constraint(bound: float) -> ProxFn:
    """Indicator of the per-pixel magnitude ball used by the dual TV problem."""
    if bound < 0:
        raise ValueError(f"bound must be >= 0, got {bound}")

    def value(p):
        norms = np.sqrt(np.sum(np.asarray(p, dtype=float) ** 2, axis=-1))
        return 0.0 if norms.max(initial=0.0) <= bound * (1 + 1e-9) + 1e-12 else np.inf

    return ProxFn(evaluate=lambda p, t: project_box_magnitude(p, bound), value=value)


def zero_penalty() -> ProxFn:
    """g = 0; the prox is the identity."""
    return ProxFn(evaluate=lambda x, t: np.array(x, dtype=float, copy=True), value=lambda x: 0.0)


# ---------------------------------------------------------------------------
# Ready-made f terms


def half_squared_loss(b) -> SmoothFn:
    """f(z) = 0.5 * ||z - b||^2 with gradient z - b."""
    b = np.asarray(b, dtype=float)
    return SmoothFn(
        value=lambda z: 0.5 * float(np.sum((z - b) ** 2)),
        gradient=lambda z: z - b,
    )


def squared_loss(b) -> SmoothFn:
    """f(z) = ||z - b||^2 (no half) with gradient 2 (z - b)."""
    b = np.asarray(b, dtype=float)
    return SmoothFn(
        value=lambda z: float(np.sum((z - b) ** 2)),
        gradient=lambda z: 2.0 * (z - b),
    )


def logistic_loss(b) -> SmoothFn:
    """f(z) = sum(log(e^{z_i} + 1) - b_i z_i) for 0/1 labels b."""
    b = _check_binary(b)
    return SmoothFn(
        value=lambda z: logit_value(z, b),
        gradient=lambda z: logit_gradient(z, b),
    )
