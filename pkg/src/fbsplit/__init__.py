"""Forward-backward splitting solver for composite objectives f(Ax) + g(x).

The engine iterates a gradient step on the smooth term with a proximal step
on the nonsmooth term, with adaptive or accelerated stepping, backtracking,
and residual-based stopping.  Specialized builders cover sparse regression,
lasso, logistic variants, matrix completion, phase retrieval, democratic
representations, and total-variation denoising.
"""

from .engine import (
    ConfigurationError,
    DivergenceError,
    Options,
    Problem,
    SolveResult,
    Trace,
    accelerate_step,
    adaptive_stepsize,
    backtrack_step,
    compute_residual,
    estimate_initial_stepsize,
    fbs_step,
    should_stop,
    solve,
)
from .linop import (
    LinearOperator,
    adjoint_consistency,
    as_shape,
    from_matrix,
    gradient_operator,
    identity,
    load_dense_matrix,
)
from .problems import (
    ObservationMask,
    RankOneMeasurements,
    democratic,
    lasso,
    logistic_matrix_completion,
    phaselift,
    sparse_least_squares,
    sparse_logistic,
    total_variation,
    tv_dual_objective,
    tv_primal_objective,
)
from .prox import (
    ProxFn,
    SmoothFn,
    half_squared_loss,
    l1_ball_constraint,
    l1_penalty,
    linf_penalty,
    logistic_loss,
    logit_gradient,
    logit_value,
    magnitude_ball_constraint,
    nuclear_penalty,
    project_box_magnitude,
    project_l1_ball,
    prox_linf,
    prox_psd_nuclear,
    psd_nuclear_penalty,
    shrink,
    shrink_nuclear,
    squared_loss,
    zero_penalty,
)
from .trace_io import RunRecord, file_digest, read_run, write_run

__version__ = "0.1.0"
