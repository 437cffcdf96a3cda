"""Shape-checked, matrix-free linear operators with explicit adjoints."""

from __future__ import annotations

from pathlib import Path
from typing import Callable

import numpy as np

__all__ = [
    "LinearOperator",
    "as_shape",
    "identity",
    "from_matrix",
    "gradient_operator",
    "adjoint_consistency",
    "load_dense_matrix",
]

Shape = tuple  # tuple of positive int extents, rank >= 1


def as_shape(dims) -> Shape:
    """Normalize ``dims`` (an int or a sequence of ints) to a validated shape tuple."""
    if isinstance(dims, (int, np.integer)):
        dims = (dims,)
    shape = tuple(int(d) for d in dims)
    if len(shape) == 0:
        raise ValueError("shape needs at least one axis")
    if any(d < 1 for d in shape):
        raise ValueError(f"shape extents must all be >= 1, got {shape}")
    return shape


class LinearOperator:
    """A linear map held as a forward/adjoint callable pair plus its shapes.

    The two callables may map between arrays of any (possibly different)
    ranks; ``apply`` and ``adjoint_apply`` enforce the declared shapes on
    both input and output, so a wrongly wired handle fails loudly instead
    of silently broadcasting.
    """

    def __init__(
        self,
        forward: Callable[[np.ndarray], np.ndarray],
        adjoint: Callable[[np.ndarray], np.ndarray],
        in_shape,
        out_shape,
    ):
        self._forward = forward
        self._adjoint = adjoint
        self.in_shape = as_shape(in_shape)
        self.out_shape = as_shape(out_shape)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Forward image of ``x``; pure, ``x`` is never mutated."""
        x = np.asarray(x, dtype=float)
        if x.shape != self.in_shape:
            raise ValueError(
                f"operator input shape mismatch: expected {self.in_shape}, got {x.shape}"
            )
        out = np.asarray(self._forward(x), dtype=float)
        if out.shape != self.out_shape:
            raise ValueError(
                f"forward handle returned shape {out.shape}, declared {self.out_shape}"
            )
        return out

    def adjoint_apply(self, y: np.ndarray) -> np.ndarray:
        """Adjoint image of ``y`` (for a dense matrix, the transpose product)."""
        y = np.asarray(y, dtype=float)
        if y.shape != self.out_shape:
            raise ValueError(
                f"adjoint input shape mismatch: expected {self.out_shape}, got {y.shape}"
            )
        out = np.asarray(self._adjoint(y), dtype=float)
        if out.shape != self.in_shape:
            raise ValueError(
                f"adjoint handle returned shape {out.shape}, declared {self.in_shape}"
            )
        return out

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.apply(x)


def identity(shape) -> LinearOperator:
    """Identity operator on arrays of the given shape."""
    shape = as_shape(shape)
    return LinearOperator(lambda x: x.copy(), lambda y: y.copy(), shape, shape)


def from_matrix(matrix, adjoint_matrix=None) -> LinearOperator:
    """Dense m-by-n matrix as an operator between length-n and length-m vectors.

    ``adjoint_matrix`` defaults to ``matrix.T``.  Passing it explicitly mirrors
    interfaces where both directions are user-supplied handles; use
    :func:`adjoint_consistency` to guard against a mismatched pair.
    """
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got ndim={a.ndim}")
    at = a.T if adjoint_matrix is None else np.atleast_2d(np.asarray(adjoint_matrix, dtype=float))
    if at.shape != (a.shape[1], a.shape[0]):
        raise ValueError(
            f"adjoint matrix shape {at.shape} does not match transpose of {a.shape}"
        )
    m, n = a.shape
    return LinearOperator(lambda x: a @ x, lambda y: at @ y, (n,), (m,))


def gradient_operator(shape) -> LinearOperator:
    """Forward-difference gradient on arrays of ``shape`` (any rank d >= 1).

    Maps ``shape`` to ``shape + (d,)`` with one-sided zero (Neumann) boundary:
    along axis j, the difference is ``x[i + e_j] - x[i]`` in the interior and
    0 at the trailing index.  The adjoint is the negative discrete divergence,
    so constants map to zero fields.
    """
    shape = as_shape(shape)
    d = len(shape)
    out_shape = shape + (d,)

    def forward(x):
        g = np.zeros(out_shape)
        for j in range(d):
            lo = [slice(None)] * d
            hi = [slice(None)] * d
            lo[j] = slice(0, shape[j] - 1)
            hi[j] = slice(1, shape[j])
            g[tuple(lo) + (j,)] = x[tuple(hi)] - x[tuple(lo)]
        return g

    def adjoint(p):
        out = np.zeros(shape)
        for j in range(d):
            q = p[..., j].copy()
            last = [slice(None)] * d
            last[j] = slice(shape[j] - 1, shape[j])
            q[tuple(last)] = 0.0  # trailing row of the difference is structurally zero
            lo = [slice(None)] * d
            hi = [slice(None)] * d
            lo[j] = slice(0, shape[j] - 1)
            hi[j] = slice(1, shape[j])
            shifted = np.zeros(shape)
            shifted[tuple(hi)] = q[tuple(lo)]
            out += shifted - q
        return out

    return LinearOperator(forward, adjoint, shape, out_shape)


def adjoint_consistency(op: LinearOperator, trials: int = 100, seed: int = 0) -> float:
    """Max relative dot-product discrepancy |<Ax,y> - <x,A*y>| over seeded trials.

    A correctly paired adjoint lands near machine precision (<= 1e-10); a
    wrong handle shows up orders of magnitude larger.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    eps = np.finfo(float).eps
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal(op.in_shape)
        y = rng.standard_normal(op.out_shape)
        lhs = float(np.vdot(op.apply(x), y))
        rhs = float(np.vdot(x, op.adjoint_apply(y)))
        disc = abs(lhs - rhs) / (abs(lhs) + abs(rhs) + eps)
        worst = max(worst, disc)
    return worst


def load_dense_matrix(path) -> np.ndarray:
    """Load a dense matrix from a Matrix Market file or a header-free CSV.

    Matrix Market coordinate files come back densified; CSV is read row-major
    with comma separators and no header row.
    """
    path = Path(path)
    if path.suffix.lower() in (".mtx", ".mm", ".mtz"):
        from scipy.io import mmread

        m = mmread(path)
        if hasattr(m, "toarray"):
            m = m.toarray()
        return np.atleast_2d(np.asarray(m, dtype=float))
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float, ndmin=2))
