"""Command-line front end: generate or load an instance, solve it, record the run."""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import expit

from . import problems
from .engine import ConfigurationError, DivergenceError, Options, solve
from .linop import gradient_operator, load_dense_matrix
from .trace_io import RunRecord, file_digest, write_run

__all__ = ["CliConfig", "UsageError", "parse_cli", "generate", "run", "main", "main_entry"]

SUBCOMMANDS = ("sls", "lasso", "logistic", "matcomp", "phaselift", "democratic", "tv", "generic")

EXIT_OK = 0
EXIT_MAX_ITERS = 2
EXIT_STAGNATION = 3
EXIT_USAGE = 64

GENERIC_SMOOTH = ("half_squared", "squared", "logistic")
GENERIC_PROX = ("l1", "linf", "l1_ball", "none")


class UsageError(Exception):
    """Bad flags, missing files, or inconsistent inputs; maps to exit 64."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class CliConfig:
    """Parsed command line, one field per flag."""

    subcommand: str
    gen: Optional[str] = None
    noise: bool = False
    files: dict = field(default_factory=dict)
    mu: Optional[float] = None
    lam: Optional[float] = None
    smooth: Optional[str] = None
    prox: Optional[str] = None
    radius: Optional[float] = None
    tol: float = 1e-3
    max_iters: int = 1000
    adaptive: Optional[bool] = None
    accelerate: Optional[bool] = None
    restart: bool = True
    backtrack: bool = True
    tau: Optional[float] = None
    lipschitz: Optional[float] = None
    stop_rule: str = "hybridResidual"
    verbose: int = 0
    record_objective: bool = False
    record_iterates: bool = False
    header: str = ""
    out: str = "run.json"
    seed: int = 0


def build_parser() -> _Parser:
    parser = _Parser(prog="fbsplit", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")

    file_flags = {
        "sls": ("--matrix", "--rhs"),
        "lasso": ("--matrix", "--rhs"),
        "logistic": ("--matrix", "--rhs"),
        "democratic": ("--matrix", "--rhs"),
        "generic": ("--matrix", "--rhs"),
        "matcomp": ("--observations", "--mask"),
        "phaselift": ("--vectors", "--measurements"),
        "tv": ("--image",),
    }
    help_lines = {
        "sls": "l1-penalized least squares",
        "lasso": "least squares on an l1 ball",
        "logistic": "l1-penalized logistic regression",
        "matcomp": "nuclear-norm penalized logistic matrix completion",
        "phaselift": "PSD-constrained nuclear-norm phase retrieval",
        "democratic": "inf-norm penalized least squares",
        "tv": "total-variation denoising (dual solve)",
        "generic": "dense matrix with named smooth/prox terms",
    }

    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=help_lines[name])
        p.add_argument("--gen", metavar="DIMS", default=None,
                       help="generate a seeded instance with these dimensions, e.g. 20x50")
        p.add_argument("--noise", action="store_true",
                       help="add measurement noise to generated data")
        for flag in file_flags[name]:
            p.add_argument(flag, default=None, metavar="PATH")
        if name in ("sls", "logistic", "matcomp", "phaselift", "democratic", "tv"):
            p.add_argument("--mu", type=float, default=None,
                           help="regularization weight (instance-scaled default)")
        if name == "lasso":
            p.add_argument("--lam", type=float, default=None, help="l1-ball radius")
        if name == "generic":
            p.add_argument("--smooth", choices=GENERIC_SMOOTH, default="half_squared")
            p.add_argument("--prox", choices=GENERIC_PROX, default="l1")
            p.add_argument("--mu", type=float, default=None)
            p.add_argument("--radius", type=float, default=None)
        p.add_argument("--tol", type=float, default=1e-3)
        p.add_argument("--max-iters", type=int, default=1000)
        p.add_argument("--adaptive", dest="adaptive", action="store_true", default=None)
        p.add_argument("--no-adaptive", dest="adaptive", action="store_false")
        p.add_argument("--accelerate", dest="accelerate", action="store_true", default=None)
        p.add_argument("--no-accelerate", dest="accelerate", action="store_false")
        p.add_argument("--no-restart", dest="restart", action="store_false", default=True)
        p.add_argument("--no-backtrack", dest="backtrack", action="store_false", default=True)
        p.add_argument("--tau", type=float, default=None)
        p.add_argument("--lipschitz", type=float, default=None)
        p.add_argument("--stop-rule", default="hybridResidual",
                       choices=("ratioResidual", "normalizedResidual", "hybridResidual"))
        p.add_argument("--verbose", type=int, default=0, choices=(0, 1, 2))
        p.add_argument("--record-objective", action="store_true")
        p.add_argument("--record-iterates", action="store_true")
        p.add_argument("--header", default="")
        p.add_argument("--out", default="run.json", metavar="PATH")
        p.add_argument("--seed", type=int, default=0)
    return parser


def parse_cli(argv) -> CliConfig:
    args = build_parser().parse_args(argv)
    files = {}
    for key in ("matrix", "rhs", "observations", "mask", "vectors", "measurements", "image"):
        value = getattr(args, key, None)
        if value is not None:
            files[key] = value
    return CliConfig(
        subcommand=args.subcommand,
        gen=args.gen,
        noise=args.noise,
        files=files,
        mu=getattr(args, "mu", None),
        lam=getattr(args, "lam", None),
        smooth=getattr(args, "smooth", None),
        prox=getattr(args, "prox", None),
        radius=getattr(args, "radius", None),
        tol=args.tol,
        max_iters=args.max_iters,
        adaptive=args.adaptive,
        accelerate=args.accelerate,
        restart=args.restart,
        backtrack=args.backtrack,
        tau=args.tau,
        lipschitz=args.lipschitz,
        stop_rule=args.stop_rule,
        verbose=args.verbose,
        record_objective=args.record_objective,
        record_iterates=args.record_iterates,
        header=args.header,
        out=args.out,
        seed=args.seed,
    )


def _resolve_modes(config: CliConfig) -> tuple[bool, bool]:
    """Map the tri-state --adaptive/--accelerate flags onto engine options."""
    if config.adaptive and config.accelerate:
        raise UsageError("--adaptive and --accelerate are mutually exclusive")
    accelerate = bool(config.accelerate)
    if config.adaptive is None:
        adaptive = not accelerate  # adaptive is the default mode
    else:
        adaptive = config.adaptive
    return adaptive, accelerate


def _build_options(config: CliConfig) -> Options:
    adaptive, accelerate = _resolve_modes(config)
    return Options(
        verbose=config.verbose,
        tol=config.tol,
        max_iters=config.max_iters,
        record_objective=config.record_objective,
        record_iterates=config.record_iterates,
        adaptive=adaptive,
        accelerate=accelerate,
        restart=config.restart,
        backtrack=config.backtrack,
        tau=config.tau,
        lipschitz=config.lipschitz,
        stop_rule=config.stop_rule,
        string_header=config.header,
    )


def _parse_dims(dims: str) -> tuple[int, ...]:
    try:
        parsed = tuple(int(part) for part in dims.lower().split("x"))
    except ValueError:
        raise UsageError(f"cannot parse dimensions {dims!r}; expected e.g. 20x50") from None
    if not parsed or any(d < 1 for d in parsed):
        raise UsageError(f"dimensions must be positive, got {dims!r}")
    return parsed


def _save(path: Path, array: np.ndarray) -> str:
    np.savetxt(path, np.atleast_2d(array), delimiter=",", fmt="%.17g")
    return file_digest(path)


def _piecewise_constant(shape, rng) -> np.ndarray:
    """Blockwise-constant array: up to 4 seeded segments per axis."""
    levels = np.array([0.0, 1.0, 2.0, 4.0])
    segments = [np.array_split(np.arange(n), min(4, n)) for n in shape]
    out = np.zeros(shape)
    grid_shape = tuple(len(s) for s in segments)
    values = rng.choice(levels, size=grid_shape)
    for cell in np.ndindex(grid_shape):
        region = tuple(
            slice(segments[ax][cell[ax]][0], segments[ax][cell[ax]][-1] + 1)
            for ax in range(len(shape))
        )
        out[region] = values[cell]
    return out


def generate(subcommand: str, dims: str, seed: int, directory, stem: str, noise: bool = False):
    """Build a seeded synthetic instance and write its data files.

    Returns (data, paths, digests, params): the in-memory arrays, the file
    paths written (CSV, row-major), their SHA-256 digests, and the recipe
    parameters worth recording.
    """
    shape = _parse_dims(dims)
    rng = np.random.default_rng(seed)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    data: dict = {}
    paths: dict = {}
    params: dict = {"dims": dims, "noise": bool(noise)}

    def emit(name, array):
        paths[name] = directory / f"{stem}_{name}.csv"
        data[name] = array
        return _save(paths[name], array)

    digests: dict = {}
    if subcommand in ("sls", "lasso", "logistic", "democratic", "generic"):
        if len(shape) != 2:
            raise UsageError(f"{subcommand} expects MxN dimensions, got {dims!r}")
        m, n = shape
        a = rng.standard_normal((m, n))
        k = math.ceil(n / 10)
        support = rng.choice(n, size=k, replace=False)
        x_true = np.zeros(n)
        x_true[support] = rng.choice([-1.0, 1.0], size=k)
        z = a @ x_true
        if subcommand == "logistic":
            b = (rng.random(m) < expit(z)).astype(float)
        else:
            b = z.copy()
            if noise:
                b += rng.standard_normal(m) * (0.01 * np.linalg.norm(z) / math.sqrt(m))
        digests["matrix"] = emit("matrix", a)
        digests["rhs"] = emit("rhs", b)
        params["sparsity"] = int(k)
        params["x_true_l1"] = float(np.sum(np.abs(x_true)))
    elif subcommand == "matcomp":
        if len(shape) != 2:
            raise UsageError(f"matcomp expects MxN dimensions, got {dims!r}")
        m, n = shape
        u = rng.standard_normal(m)
        v = rng.standard_normal(n)
        y = (np.outer(u, v) > 0).astype(float)
        mask = (rng.random((m, n)) < 0.8).astype(float)
        digests["observations"] = emit("observations", y)
        digests["mask"] = emit("mask", mask)
        params["observe_fraction"] = 0.8
    elif subcommand == "phaselift":
        if len(shape) != 2:
            raise UsageError(f"phaselift expects NxM dimensions (signal x measurements), got {dims!r}")
        n, m = shape
        x_true = rng.standard_normal(n)
        vectors = rng.standard_normal((m, n))
        b = (vectors @ x_true) ** 2
        if noise:
            b += rng.standard_normal(m) * (0.01 * np.linalg.norm(b) / math.sqrt(m))
        digests["vectors"] = emit("vectors", vectors)
        digests["measurements"] = emit("measurements", b)
    elif subcommand == "tv":
        clean = _piecewise_constant(shape, rng)
        scale = float(np.ptp(clean)) or 1.0
        image = clean + 0.05 * scale * rng.standard_normal(shape)
        digests["image"] = emit("image", image)
        params["noise_sigma"] = 0.05 * scale
    else:
        raise UsageError(f"unknown subcommand {subcommand!r}")
    return data, paths, digests, params


def _load_vector(path) -> np.ndarray:
    return load_dense_matrix(path).ravel()


def _ingest(config: CliConfig):
    """Load or generate the instance data; returns (data, digests, params)."""
    has_files = bool(config.files)
    if config.gen is not None and has_files:
        raise UsageError("give either --gen or input files, not both")
    if config.gen is None and not has_files:
        raise UsageError("one of --gen or input files is required")
    if config.gen is not None:
        out = Path(config.out)
        data, _paths, digests, params = generate(
            config.subcommand, config.gen, config.seed, out.parent, out.stem,
            noise=config.noise,
        )
        params["generated"] = True
        return data, digests, params

    data, digests = {}, {}
    for name, path in config.files.items():
        path = Path(path)
        if not path.exists():
            raise UsageError(f"input file not found: {path}")
        loaded = load_dense_matrix(path)
        data[name] = loaded
        digests[name] = file_digest(path)
    return data, digests, {"generated": False}


def _default_mu(subcommand: str, data: dict) -> float:
    """Instance-scaled fallback weight: a tenth of the relevant dual norm of
    the smooth gradient at zero."""
    if subcommand in ("sls", "democratic", "generic"):
        a, b = data["matrix"], data["rhs"].ravel()
        return 0.1 * float(np.max(np.abs(a.T @ b)))
    if subcommand == "logistic":
        a, b = data["matrix"], data["rhs"].ravel()
        return 0.1 * float(np.max(np.abs(a.T @ (0.5 - b))))
    if subcommand == "matcomp":
        y = data["observations"]
        mask = data.get("mask")
        g0 = (0.5 - y) * (np.ones_like(y) if mask is None else (np.asarray(mask) != 0))
        return 0.1 * float(np.linalg.norm(g0, 2))
    if subcommand == "phaselift":
        vectors, b = data["vectors"], data["measurements"].ravel()
        g0 = np.einsum("m,mi,mj->ij", 2.0 * b, vectors, vectors)
        return 0.1 * float(np.linalg.norm(g0, 2))
    if subcommand == "tv":
        image = data["image"]
        g = gradient_operator(image.shape).apply(image)
        return 0.1 * float(np.max(np.sqrt(np.sum(g * g, axis=-1))))
    raise UsageError(f"no default regularization for {subcommand!r}")


def _build_problem(config: CliConfig, data: dict, params: dict):
    """Wire the ingested data into a Problem; returns (problem, recover, params)."""
    sub = config.subcommand
    recover = None
    if sub in ("sls", "lasso", "logistic", "democratic", "generic"):
        if "matrix" not in data or "rhs" not in data:
            raise UsageError(f"{sub} needs --matrix and --rhs (or --gen)")
        a = np.atleast_2d(data["matrix"])
        b = data["rhs"].ravel()
        if a.shape[0] != b.shape[0]:
            raise UsageError(f"matrix has {a.shape[0]} rows but rhs has {b.shape[0]} entries")
        x0 = np.zeros(a.shape[1])
        if sub == "lasso":
            lam = config.lam if config.lam is not None else params.get("x_true_l1")
            if lam is None:
                raise UsageError("lasso with file inputs requires --lam")
            params["lam"] = float(lam)
            problem = problems.lasso(a, None, b, float(lam), x0)
        elif sub == "generic":
            problem = _build_generic(config, a, b, x0, params)
        else:
            mu = config.mu if config.mu is not None else _default_mu(sub, data)
            params["mu"] = float(mu)
            builder = {
                "sls": problems.sparse_least_squares,
                "logistic": problems.sparse_logistic,
                "democratic": problems.democratic,
            }[sub]
            problem = builder(a, None, b, float(mu), x0)
    elif sub == "matcomp":
        if "observations" not in data:
            raise UsageError("matcomp needs --observations (or --gen)")
        y = np.atleast_2d(data["observations"])
        mask = data.get("mask")
        mu = config.mu if config.mu is not None else _default_mu(sub, data)
        params["mu"] = float(mu)
        problem = problems.logistic_matrix_completion(y, float(mu), mask=mask)
    elif sub == "phaselift":
        if "vectors" not in data or "measurements" not in data:
            raise UsageError("phaselift needs --vectors and --measurements (or --gen)")
        meas = problems.RankOneMeasurements(
            np.atleast_2d(data["vectors"]), data["measurements"].ravel()
        )
        mu = config.mu if config.mu is not None else _default_mu(sub, data)
        params["mu"] = float(mu)
        problem = problems.phaselift(meas, float(mu))
    elif sub == "tv":
        if "image" not in data:
            raise UsageError("tv needs --image (or --gen)")
        image = data["image"]
        if config.gen is not None and len(_parse_dims(config.gen)) == 1:
            image = image.ravel()
        mu = config.mu if config.mu is not None else _default_mu(sub, data)
        params["mu"] = float(mu)
        dual = problems.total_variation(image, float(mu))
        problem, recover = dual.problem, dual.recover
    else:
        raise UsageError(f"unknown subcommand {sub!r}")
    return problem, recover, params


def _build_generic(config: CliConfig, a, b, x0, params):
    from .engine import Problem
    from .linop import from_matrix
    from .prox import (
        half_squared_loss,
        l1_ball_constraint,
        l1_penalty,
        linf_penalty,
        logistic_loss,
        squared_loss,
        zero_penalty,
    )

    smooth_name = config.smooth or "half_squared"
    prox_name = config.prox or "l1"
    params["smooth"] = smooth_name
    params["prox"] = prox_name
    if smooth_name == "half_squared":
        smooth = half_squared_loss(b)
    elif smooth_name == "squared":
        smooth = squared_loss(b)
    else:
        try:
            smooth = logistic_loss(b)
        except ValueError as err:
            raise UsageError(str(err)) from None
    if prox_name == "none":
        g = zero_penalty()
    elif prox_name == "l1_ball":
        if config.radius is None:
            raise UsageError("--prox l1_ball requires --radius")
        params["radius"] = float(config.radius)
        g = l1_ball_constraint(config.radius)
    else:
        mu = config.mu if config.mu is not None else _default_mu("generic", {"matrix": a, "rhs": b})
        params["mu"] = float(mu)
        g = l1_penalty(mu) if prox_name == "l1" else linf_penalty(mu)
    return Problem(op=from_matrix(a), smooth=smooth, prox=g, x0=x0)


def run(config: CliConfig) -> int:
    """Execute one solve per the config and write its RunRecord; returns the exit code."""
    options = _build_options(config)
    try:
        options.validate()
    except ConfigurationError as err:
        raise UsageError(str(err)) from None
    data, digests, params = _ingest(config)
    try:
        problem, recover, params = _build_problem(config, data, params)
        result = solve(problem, options, seed=config.seed)
    except ConfigurationError as err:
        raise UsageError(str(err)) from None
    if recover is not None and config.verbose >= 1:
        denoised = recover(result.solution)
        print(f"{config.header}recovered image range "
              f"[{denoised.min():.6g}, {denoised.max():.6g}]")
    record = RunRecord(
        options=options,
        trace=result.trace,
        termination=result.termination,
        problem_descriptor={
            "builder": config.subcommand,
            "params": params,
            "data_digests": digests,
        },
        seed=config.seed,
    )
    write_run(record, config.out)
    if config.verbose >= 1:
        print(f"{config.header}run written to {config.out}")
    return {
        "tolerance_reached": EXIT_OK,
        "custom_stop": EXIT_OK,
        "max_iters": EXIT_MAX_ITERS,
        "stagnation": EXIT_STAGNATION,
    }[result.termination]


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        config = parse_cli(argv)
        return run(config)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as err:  # argparse --help
        return int(err.code or 0)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as err:
        print(f"diverged: {err}", file=sys.stderr)
        return EXIT_STAGNATION


def main_entry() -> None:
    raise SystemExit(main())
