"""Forward-backward splitting driver: plain, adaptive, and accelerated modes."""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .linop import LinearOperator
from .prox import ProxFn, SmoothFn

__all__ = [
    "Problem",
    "Options",
    "Trace",
    "SolveResult",
    "ConfigurationError",
    "DivergenceError",
    "STOP_RULES",
    "TERMINATION_REASONS",
    "estimate_initial_stepsize",
    "fbs_step",
    "backtrack_step",
    "adaptive_stepsize",
    "accelerate_step",
    "compute_residual",
    "should_stop",
    "solve",
]

STOP_RULES = ("ratioResidual", "normalizedResidual", "hybridResidual")
TERMINATION_REASONS = ("tolerance_reached", "max_iters", "custom_stop", "stagnation")

# backtracking constants: nonmonotone window, halving factor 2, per-iteration cap
BACKTRACK_WINDOW = 10
MAX_HALVINGS = 20


class ConfigurationError(ValueError):
    """Invalid options detected before the first iteration."""


class DivergenceError(RuntimeError):
    """An iterate or gradient became non-finite."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


@dataclass
class Problem:
    """The pieces of min f(Ax) + g(x): operator, smooth term, prox, start point.

    ``smooth`` acts on arrays of ``op.out_shape``; ``prox`` and ``x0`` live in
    ``op.in_shape``.
    """

    op: LinearOperator
    smooth: SmoothFn
    prox: ProxFn
    x0: np.ndarray


@dataclass
class Options:
    """Solver knobs.  Defaults match the documented option set.

    ``adaptive`` and ``accelerate`` are mutually exclusive; ``restart`` only
    matters with ``accelerate``.  ``stop_now``, when given, overrides the
    built-in stopping rules entirely.
    """

    verbose: int = 0
    tol: float = 1e-3
    max_iters: int = 1000
    record_objective: bool = False
    record_iterates: bool = False
    adaptive: bool = True
    accelerate: bool = False
    restart: bool = True
    monitor: Optional[Callable[[np.ndarray], float]] = None
    backtrack: bool = True
    tau: Optional[float] = None
    lipschitz: Optional[float] = None
    stop_rule: str = "hybridResidual"
    stop_now: Optional[Callable] = None
    string_header: str = ""

    def validate(self) -> None:
        if self.tol <= 0:
            raise ConfigurationError(f"tol must be > 0, got {self.tol}")
        if self.max_iters < 1:
            raise ConfigurationError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tau is not None and self.tau <= 0:
            raise ConfigurationError(f"tau must be > 0 when supplied, got {self.tau}")
        if self.lipschitz is not None and self.lipschitz <= 0:
            raise ConfigurationError(
                f"lipschitz must be > 0 when supplied, got {self.lipschitz}"
            )
        if self.adaptive and self.accelerate:
            raise ConfigurationError(
                "adaptive and accelerate are mutually exclusive; disable one"
            )
        if self.stop_rule not in STOP_RULES:
            raise ConfigurationError(
                f"unknown stop_rule {self.stop_rule!r}; choose one of {STOP_RULES}"
            )
        if self.verbose not in (0, 1, 2):
            raise ConfigurationError(f"verbose must be 0, 1, or 2, got {self.verbose}")


@dataclass
class Trace:
    """Per-solve convergence record; list fields all have iteration_count entries."""

    solve_time: float = 0.0
    residuals: list = field(default_factory=list)
    stepsizes: list = field(default_factory=list)
    normalized_residuals: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    func_values: list = field(default_factory=list)
    backtracks: int = 0
    lipschitz_estimate: float = 0.0
    initial_stepsize: float = 0.0
    iteration_count: int = 0
    iterates: Optional[list] = None

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        pods = (
            "solve_time",
            "residuals",
            "stepsizes",
            "normalized_residuals",
            "objective",
            "func_values",
            "backtracks",
            "lipschitz_estimate",
            "initial_stepsize",
            "iteration_count",
        )
        if any(getattr(self, k) != getattr(other, k) for k in pods):
            return False
        if (self.iterates is None) != (other.iterates is None):
            return False
        if self.iterates is None:
            return True
        return len(self.iterates) == len(other.iterates) and all(
            np.array_equal(a, b) for a, b in zip(self.iterates, other.iterates)
        )


@dataclass
class SolveResult:
    solution: np.ndarray
    trace: Trace
    termination: str


def _composite_gradient(problem: Problem, z: np.ndarray) -> np.ndarray:
    return problem.op.adjoint_apply(problem.smooth.gradient(z))


def estimate_initial_stepsize(
    problem: Problem,
    seed: int = 0,
    tau: float | None = None,
    lipschitz: float | None = None,
) -> tuple[float, float]:
    """Pick the first stepsize tau0 and a Lipschitz estimate for grad f(Ax).

    A user-supplied ``tau`` always wins; otherwise tau0 = 0.2 / L with L either
    supplied or estimated from a seeded unit-norm random perturbation of x0 via
    the gradient secant, floored at 1e-6.
    """
    if tau is not None and lipschitz is not None:
        return float(tau), float(lipschitz)
    if lipschitz is not None:
        return 0.2 / float(lipschitz), float(lipschitz)

    x0 = np.asarray(problem.x0, dtype=float)
    g1 = _composite_gradient(problem, problem.op.apply(x0))
    if not np.isfinite(g1).all():
        raise ValueError("gradient is non-finite at the initial point")
    rng = np.random.default_rng(seed)
    delta = rng.standard_normal(x0.shape)
    delta /= np.linalg.norm(delta.ravel())
    x2 = x0 + delta
    g2 = _composite_gradient(problem, problem.op.apply(x2))
    if not np.isfinite(g2).all():
        raise ValueError("gradient is non-finite near the initial point")
    l_hat = float(np.linalg.norm((g1 - g2).ravel()) / np.linalg.norm((x0 - x2).ravel()))
    l_hat = max(l_hat, 1e-6)
    if tau is not None:
        return float(tau), l_hat
    return 0.2 / l_hat, l_hat


def fbs_step(x: np.ndarray, tau: float, problem: Problem) -> tuple[np.ndarray, np.ndarray]:
    """One forward-backward step: prox(x - tau * A^T grad f(Ax), tau).

    Returns the new point and the composite gradient at x.
    """
    if tau <= 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    grad = _composite_gradient(problem, problem.op.apply(x))
    x_next = problem.prox.evaluate(x - tau * grad, tau)
    if not np.isfinite(x_next).all():
        raise DivergenceError("forward-backward step produced non-finite values")
    return x_next, grad


class BacktrackResult(NamedTuple):
    x_next: np.ndarray
    tau: float
    backtracks: int
    accepted: bool
    grad: np.ndarray  # composite gradient at the step's base point
    z_next: np.ndarray  # A x_next, reusable by the caller
    f_next: float  # f(A x_next)


def backtrack_step(
    x: np.ndarray,
    tau: float,
    problem: Problem,
    f_reference: float,
    enabled: bool = True,
    grad: np.ndarray | None = None,
) -> BacktrackResult:
    """Forward-backward step with stepsize halving until sufficient decrease.

    Accepts once f(A x_next) <= f_reference + <grad, dx> + ||dx||^2 / (2 tau),
    where ``f_reference`` is the max of f(Ax_j) over the trailing nonmonotone
    window.  Gives up (``accepted=False``) after 20 halvings.  With ``enabled``
    off this is exactly one plain step.
    """
    if tau <= 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    if grad is None:
        grad = _composite_gradient(problem, problem.op.apply(x))
    halvings = 0
    while True:
        x_next = problem.prox.evaluate(x - tau * grad, tau)
        if not np.isfinite(x_next).all():
            raise DivergenceError("backtracking step produced non-finite values")
        z_next = problem.op.apply(x_next)
        f_next = float(problem.smooth.value(z_next))
        if not enabled:
            return BacktrackResult(x_next, tau, 0, True, grad, z_next, f_next)
        dx = x_next - x
        bound = f_reference + float(np.vdot(grad, dx)) + float(np.vdot(dx, dx)) / (2.0 * tau)
        # tiny slack so exact-arithmetic equality cases do not halve spuriously
        if np.isfinite(f_next) and f_next <= bound + 1e-12 * max(1.0, abs(f_reference)):
            return BacktrackResult(x_next, tau, halvings, True, grad, z_next, f_next)
        if halvings >= MAX_HALVINGS:
            return BacktrackResult(x_next, tau, halvings, False, grad, z_next, f_next)
        tau *= 0.5
        halvings += 1


def adaptive_stepsize(dx: np.ndarray, dg: np.ndarray, tau_prev: float) -> float:
    """Spectral secant stepsize from the last displacement/gradient pair.

    Blends the steepest-descent estimate <dx,dx>/<dx,dg> and the
    minimum-residual estimate <dx,dg>/<dg,dg>; falls back to ``tau_prev``
    whenever the curvature signal is unusable.
    """
    dxdg = float(np.vdot(dx, dg))
    if dxdg <= 0 or not np.isfinite(dxdg):
        return tau_prev
    dxdx = float(np.vdot(dx, dx))
    dgdg = float(np.vdot(dg, dg))
    if dgdg <= 0:
        return tau_prev
    tau_s = dxdx / dxdg
    tau_m = dxdg / dgdg
    tau = tau_m if tau_m / tau_s > 0.5 else tau_s - 0.5 * tau_m
    if not np.isfinite(tau) or tau <= 0:
        return tau_prev
    return tau


def accelerate_step(
    x_next: np.ndarray, x_prev: np.ndarray, theta: float
) -> tuple[np.ndarray, float]:
    """Momentum extrapolation with the standard theta recursion.

    theta' = (1 + sqrt(1 + 4 theta^2)) / 2 and
    y = x_next + ((theta - 1) / theta') (x_next - x_prev).
    """
    theta_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
    y_next = x_next + ((theta - 1.0) / theta_next) * (x_next - x_prev)
    return y_next, float(theta_next)


def compute_residual(
    x: np.ndarray,
    x_next: np.ndarray,
    tau: float,
    grad_at_x: np.ndarray,
    grad_at_x_next: np.ndarray,
    eps_n: float = 1e-8,
) -> tuple[float, float]:
    """Norm of a constructed subgradient at x_next, plus its normalized form.

    residual = ||(x - x_next)/tau + grad(x_next) - grad(x)||; the normalizer is
    max(||grad(x)||, ||(x - x_next)/tau - grad(x)||) + eps_n.
    """
    if tau <= 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    step = (x - x_next) / tau
    residual = float(np.linalg.norm((step + grad_at_x_next - grad_at_x).ravel()))
    scale = max(
        float(np.linalg.norm(grad_at_x.ravel())),
        float(np.linalg.norm((step - grad_at_x).ravel())),
    )
    return residual, residual / (scale + eps_n)


def should_stop(
    rule: str,
    residual: float,
    normalized: float,
    max_residual: float,
    tol: float,
    eps_r: float = 1e-8,
) -> bool:
    """Built-in stopping decision for one of the three residual rules."""
    if rule not in STOP_RULES:
        raise ConfigurationError(f"unknown stop_rule {rule!r}; choose one of {STOP_RULES}")
    ratio_stop = residual / (max_residual + eps_r) < tol
    normalized_stop = normalized < tol
    if rule == "ratioResidual":
        return ratio_stop
    if rule == "normalizedResidual":
        return normalized_stop
    return ratio_stop or normalized_stop


def _print_iteration(options, k, residual, normalized, tau):
    print(
        f"{options.string_header}iter {k:5d}: residual {residual:.6e}, "
        f"normalized {normalized:.6e}, stepsize {tau:.6e}"
    )


def _print_summary(options, termination, k, residual, elapsed):
    print(
        f"{options.string_header}done ({termination}) after {k} iterations: "
        f"residual {residual:.6e}, time {elapsed:.3f}s"
    )


def solve(problem: Problem, options: Options | None = None, seed: int = 0) -> SolveResult:
    """Run forward-backward splitting on ``problem`` until a stopping event.

    The mode comes from ``options``: plain (fixed initial stepsize), adaptive
    (spectral stepsize each iteration, the default), or accelerated (momentum
    with optional restart).  Backtracking guards every mode unless disabled.
    ``seed`` only feeds the stepsize-estimation probe, so identical inputs and
    seeds reproduce the trace exactly.

    Returns the final iterate, the filled trace, and a termination reason in
    {tolerance_reached, max_iters, custom_stop, stagnation}.
    """
    if options is None:
        options = Options()
    options.validate()

    x = np.array(problem.x0, dtype=float, copy=True)
    if x.shape != problem.op.in_shape:
        raise ValueError(
            f"x0 shape {x.shape} does not match operator input shape {problem.op.in_shape}"
        )
    if options.record_objective and problem.prox.value is None:
        raise ConfigurationError(
            "record_objective requires the prox term to provide a value map"
        )

    start = time.perf_counter()
    tau, l_hat = estimate_initial_stepsize(
        problem, seed=seed, tau=options.tau, lipschitz=options.lipschitz
    )
    tau0 = tau

    z = problem.op.apply(x)
    fx = float(problem.smooth.value(z))
    grad = _composite_gradient(problem, z)
    if not (np.isfinite(fx) and np.isfinite(grad).all()):
        raise ValueError("objective or gradient is non-finite at the initial point")

    window = deque([fx], maxlen=BACKTRACK_WINDOW)
    trace = Trace(lipschitz_estimate=l_hat, initial_stepsize=tau0)
    if options.record_iterates:
        trace.iterates = []

    accelerated = options.accelerate
    adaptive = options.adaptive
    base = x  # point the forward-backward step is taken from (y in accelerated mode)
    base_grad = grad
    theta = 1.0
    max_residual = 0.0
    prev_objective = fx + problem.prox.value(x) if options.record_objective else None
    termination = "max_iters"
    residual = np.inf

    for k in range(1, options.max_iters + 1):
        f_reference = max(window)
        try:
            bt = backtrack_step(
                base, tau, problem, f_reference,
                enabled=options.backtrack, grad=base_grad,
            )
        except DivergenceError as err:
            raise DivergenceError(f"iteration {k}: {err}", iteration=k) from None
        x_next, z_next, f_next = bt.x_next, bt.z_next, bt.f_next
        if not (np.isfinite(x_next).all() and np.isfinite(f_next)):
            raise DivergenceError(
                f"iteration {k}: iterate or objective became non-finite", iteration=k
            )
        trace.backtracks += bt.backtracks
        grad_next = _composite_gradient(problem, z_next)
        residual, normalized = compute_residual(base, x_next, bt.tau, bt.grad, grad_next)
        max_residual = max(max_residual, residual)

        trace.residuals.append(residual)
        trace.normalized_residuals.append(normalized)
        trace.stepsizes.append(bt.tau)
        trace.func_values.append(
            float(options.monitor(x_next)) if options.monitor is not None else 0.0
        )
        objective = None
        if options.record_objective:
            objective = f_next + float(problem.prox.value(x_next))
            trace.objective.append(objective)
        if options.record_iterates:
            trace.iterates.append(x_next.copy())
        if options.verbose >= 2:
            _print_iteration(options, k, residual, normalized, bt.tau)

        if options.stop_now is not None:
            if options.stop_now(x_next, k, residual, normalized, max_residual, options):
                termination = "custom_stop"
        elif should_stop(
            options.stop_rule, residual, normalized, max_residual, options.tol
        ):
            termination = "tolerance_reached"
        if termination == "max_iters" and not bt.accepted:
            termination = "stagnation"

        x_prev = x
        x = x_next
        window.append(f_next)
        trace.iteration_count = k

        if termination != "max_iters" or k == options.max_iters:
            break

        # prepare the next iteration
        if accelerated:
            if options.restart:
                aligned = float(np.vdot(base - x_next, x_next - x_prev)) > 0
                worse = (
                    options.record_objective
                    and objective is not None
                    and prev_objective is not None
                    and objective > prev_objective
                )
                if aligned or worse:
                    theta = 1.0
            base, theta = accelerate_step(x_next, x_prev, theta)
            z_base = problem.op.apply(base)
            base_grad = _composite_gradient(problem, z_base)
            tau = bt.tau
        else:
            if adaptive:
                tau = adaptive_stepsize(x_next - x_prev, grad_next - bt.grad, bt.tau)
            else:
                tau = bt.tau
            base = x
            base_grad = grad_next
        if options.record_objective:
            prev_objective = objective

    trace.solve_time = time.perf_counter() - start
    if options.verbose >= 1:
        _print_summary(options, termination, trace.iteration_count, residual, trace.solve_time)
    return SolveResult(solution=x, trace=trace, termination=termination)
