"""Builders mapping specialized formulations onto engine problems."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import expit

from .engine import Problem
from .linop import LinearOperator, as_shape, from_matrix, gradient_operator, identity
from .prox import (
    SmoothFn,
    half_squared_loss,
    l1_ball_constraint,
    l1_penalty,
    linf_penalty,
    logistic_loss,
    magnitude_ball_constraint,
    nuclear_penalty,
    psd_nuclear_penalty,
    squared_loss,
)

__all__ = [
    "ObservationMask",
    "RankOneMeasurements",
    "TotalVariationDual",
    "sparse_least_squares",
    "lasso",
    "sparse_logistic",
    "logistic_matrix_completion",
    "phaselift",
    "democratic",
    "total_variation",
    "tv_primal_objective",
    "tv_dual_objective",
]


def _as_operator(A, At, in_shape, out_shape) -> LinearOperator:
    """Accept a LinearOperator, a dense matrix (+ optional adjoint matrix), or
    a callable pair, and return a shape-checked operator."""
    if isinstance(A, LinearOperator):
        return A
    if isinstance(A, np.ndarray) or (At is None and not callable(A)):
        return from_matrix(np.asarray(A, dtype=float), At)
    if callable(A):
        if not callable(At):
            raise ValueError("a callable A needs a callable At alongside it")
        return LinearOperator(A, At, in_shape, out_shape)
    raise ValueError(f"cannot interpret operator of type {type(A).__name__}")


def sparse_least_squares(A, At, b, mu: float, x0) -> Problem:
    """min mu ||x||_1 + 0.5 ||Ax - b||^2 (basis pursuit denoising)."""
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    b = np.asarray(b, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    op = _as_operator(A, At, x0.shape, b.shape)
    return Problem(op=op, smooth=half_squared_loss(b), prox=l1_penalty(mu), x0=x0)


def lasso(A, At, b, lam: float, x0) -> Problem:
    """min 0.5 ||Ax - b||^2 subject to ||x||_1 <= lam.

    The prox is the stepsize-independent l1-ball projection, so every iterate
    after the first is feasible even if x0 is not.
    """
    if lam <= 0:
        raise ValueError(f"lam must be > 0, got {lam}")
    b = np.asarray(b, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    op = _as_operator(A, At, x0.shape, b.shape)
    return Problem(op=op, smooth=half_squared_loss(b), prox=l1_ball_constraint(lam), x0=x0)


def sparse_logistic(A, At, b, mu: float, x0) -> Problem:
    """min mu ||x||_1 + sum(log(e^{(Ax)_i} + 1) - b_i (Ax)_i) for 0/1 labels."""
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    x0 = np.asarray(x0, dtype=float)
    b = np.asarray(b, dtype=float)
    op = _as_operator(A, At, x0.shape, b.shape)
    return Problem(op=op, smooth=logistic_loss(b), prox=l1_penalty(mu), x0=x0)


@dataclass(frozen=True, eq=False)
class ObservationMask:
    """Set of observed (row, col) positions of a matrix."""

    indices: np.ndarray  # (k, 2) integer array

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int)
        if idx.size == 0:
            idx = idx.reshape(0, 2)
        idx = np.atleast_2d(idx)
        if idx.ndim != 2 or idx.shape[1] != 2:
            raise ValueError(f"indices must be (k, 2) shaped, got {idx.shape}")
        if len({(int(i), int(j)) for i, j in idx}) != len(idx):
            raise ValueError("mask indices must be unique")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def full(cls, shape) -> "ObservationMask":
        m, n = as_shape(shape)
        rows, cols = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
        return cls(np.column_stack([rows.ravel(), cols.ravel()]))

    @classmethod
    def from_bool(cls, mask) -> "ObservationMask":
        mask = np.asarray(mask)
        return cls(np.argwhere(mask != 0))

    def bool_mask(self, shape) -> np.ndarray:
        m, n = as_shape(shape)
        out = np.zeros((m, n), dtype=bool)
        if self.indices.size:
            if (
                self.indices[:, 0].min(initial=0) < 0
                or self.indices[:, 1].min(initial=0) < 0
                or self.indices[:, 0].max(initial=0) >= m
                or self.indices[:, 1].max(initial=0) >= n
            ):
                raise ValueError(f"mask indices out of bounds for shape {(m, n)}")
            out[self.indices[:, 0], self.indices[:, 1]] = True
        return out


def logistic_matrix_completion(Y, mu: float, mask=None, X0=None) -> Problem:
    """min mu ||X||_* + elementwise logistic loss of X against 0/1 entries Y,
    summed over the observed positions only.

    ``mask`` may be an ObservationMask, a boolean matrix, or None for fully
    observed.  X0 defaults to the zero matrix.
    """
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ValueError(f"Y must be a matrix, got ndim={Y.ndim}")
    if mask is None:
        mask_bool = np.ones(Y.shape, dtype=bool)
    elif isinstance(mask, ObservationMask):
        mask_bool = mask.bool_mask(Y.shape)
    else:
        mask = np.asarray(mask)
        if mask.shape != Y.shape:
            raise ValueError(f"mask shape {mask.shape} does not match Y shape {Y.shape}")
        mask_bool = mask != 0
    if not np.all((Y[mask_bool] == 0.0) | (Y[mask_bool] == 1.0)):
        raise ValueError("observed entries of Y must be 0/1 valued")
    if X0 is None:
        X0 = np.zeros(Y.shape)
    X0 = np.asarray(X0, dtype=float)

    fmask = mask_bool.astype(float)

    def value(Z):
        terms = np.maximum(Z, 0.0) + np.log1p(np.exp(-np.abs(Z))) - Y * Z
        return float(np.sum(terms[mask_bool]))

    def gradient(Z):
        return (expit(Z) - Y) * fmask

    smooth = SmoothFn(value=value, gradient=gradient)
    return Problem(
        op=identity(Y.shape), smooth=smooth, prox=nuclear_penalty(mu), x0=X0
    )


@dataclass(frozen=True, eq=False)
class RankOneMeasurements:
    """Rank-one quadratic measurements: the i-th reading of a symmetric X is
    a_i^T X a_i, collected against measured values b."""

    vectors: np.ndarray  # (m, n)
    b: np.ndarray  # (m,)

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        if v.shape[0] < 1:
            raise ValueError("need at least one measurement vector")
        if b.shape[0] != v.shape[0]:
            raise ValueError(
                f"got {v.shape[0]} vectors but {b.shape[0]} measured values"
            )
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    @property
    def m(self) -> int:
        return self.vectors.shape[0]

    def operator(self) -> LinearOperator:
        """The measurement map X -> (a_i^T X a_i)_i with adjoint
        y -> sum_i y_i a_i a_i^T."""
        v = self.vectors
        n = self.n

        def forward(X):
            return np.einsum("mi,ij,mj->m", v, X, v)

        def adjoint(y):
            return np.einsum("m,mi,mj->ij", y, v, v)

        return LinearOperator(forward, adjoint, (n, n), (self.m,))


def phaselift(meas: RankOneMeasurements, mu: float, X0=None) -> Problem:
    """min mu ||X||_* + ||A(X) - b||^2 subject to X PSD.

    The data term carries no 1/2 factor, so its gradient is 2 (A(X) - b).
    The prox enforces the PSD cone, so all iterates stay feasible.
    """
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    n = meas.n
    if X0 is None:
        X0 = np.zeros((n, n))
    X0 = np.asarray(X0, dtype=float)
    if X0.shape != (n, n):
        raise ValueError(f"X0 shape {X0.shape} does not match measurement size {(n, n)}")
    if np.max(np.abs(X0 - X0.T), initial=0.0) > 1e-10:
        raise ValueError("X0 must be symmetric (asymmetry above 1e-10)")
    return Problem(
        op=meas.operator(),
        smooth=squared_loss(meas.b),
        prox=psd_nuclear_penalty(mu),
        x0=X0,
    )


def democratic(A, At, b, mu: float, x0) -> Problem:
    """min mu ||x||_inf + 0.5 ||Ax - b||^2 (low dynamic-range representation)."""
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    b = np.asarray(b, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    op = _as_operator(A, At, x0.shape, b.shape)
    return Problem(op=op, smooth=half_squared_loss(b), prox=linf_penalty(mu), x0=x0)


class TotalVariationDual(NamedTuple):
    problem: Problem
    recover: Callable[[np.ndarray], np.ndarray]


def _divergence_operator(shape) -> LinearOperator:
    """div = -(gradient adjoint), mapping fields of shape ``shape + (d,)`` to
    arrays of ``shape``; its adjoint is -gradient."""
    grad = gradient_operator(shape)
    return LinearOperator(
        lambda p: -grad.adjoint_apply(p),
        lambda x: -grad.apply(x),
        grad.out_shape,
        grad.in_shape,
    )


def total_variation(noisy, mu: float) -> TotalVariationDual:
    """Isotropic TV denoising min mu TV(x) + 0.5 ||x - noisy||^2, posed as its
    dual so the engine can solve it by projected gradient.

    The dual variable p is a gradient-shaped field constrained to per-pixel
    magnitude <= mu; the smooth part is 0.5 ||div p - noisy||^2 and the primal
    image is recovered as x = noisy - div p.  Works on arrays of any rank.
    """
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    noisy = np.asarray(noisy, dtype=float)
    div = _divergence_operator(noisy.shape)
    problem = Problem(
        op=div,
        smooth=half_squared_loss(noisy),
        prox=magnitude_ball_constraint(mu),
        x0=np.zeros(div.in_shape),
    )

    def recover(p):
        return noisy - div.apply(np.asarray(p, dtype=float))

    return TotalVariationDual(problem=problem, recover=recover)


def tv_primal_objective(x, noisy, mu: float) -> float:
    """mu * TV(x) + 0.5 ||x - noisy||^2 with isotropic per-pixel magnitudes."""
    x = np.asarray(x, dtype=float)
    noisy = np.asarray(noisy, dtype=float)
    g = gradient_operator(x.shape).apply(x)
    tv = float(np.sum(np.sqrt(np.sum(g * g, axis=-1))))
    return mu * tv + 0.5 * float(np.sum((x - noisy) ** 2))


def tv_dual_objective(p, noisy) -> float:
    """<noisy, div p> - 0.5 ||div p||^2; equals the primal value at optimality."""
    noisy = np.asarray(noisy, dtype=float)
    div_p = _divergence_operator(noisy.shape).apply(np.asarray(p, dtype=float))
    return float(np.vdot(noisy, div_p)) - 0.5 * float(np.vdot(div_p, div_p))
