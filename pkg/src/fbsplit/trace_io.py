"""Serialization of solve runs: a strict JSON document plus a sibling CSV."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine import Options, Trace, TERMINATION_REASONS

__all__ = ["RunRecord", "write_run", "read_run", "file_digest", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1

# plain-data option fields, in document order (callbacks are code, not data)
_OPTION_FIELDS = (
    "verbose",
    "tol",
    "max_iters",
    "record_objective",
    "record_iterates",
    "adaptive",
    "accelerate",
    "restart",
    "backtrack",
    "tau",
    "lipschitz",
    "stop_rule",
    "string_header",
)

_TRACE_FIELDS = (
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
    "iterates",
)

_DESCRIPTOR_FIELDS = ("builder", "params", "data_digests")

_TOP_FIELDS = ("schema_version", "seed", "termination", "problem", "options", "trace")


@dataclass
class RunRecord:
    """Reproducibility envelope for one solve: what ran, on what, and its trace."""

    options: Options
    trace: Trace
    termination: str
    problem_descriptor: dict
    seed: int


def file_digest(path) -> str:
    """SHA-256 hex digest of the exact bytes of a file."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _fmt_float(x: float) -> str:
    """17-significant-digit decimal that parses back to the same bits."""
    if not np.isfinite(x):
        raise ValueError(f"non-finite float {x!r} cannot be serialized")
    s = "%.17g" % float(x)
    if not any(c in s for c in ".e"):
        s += ".0"
    return s


def _render(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _fmt_float(float(value))
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, np.ndarray):
        return _render(value.tolist())
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_render(v) for v in value) + "]"
    if isinstance(value, dict):
        items = ", ".join(
            f"{json.dumps(str(k))}: {_render(v)}" for k, v in value.items()
        )
        return "{" + items + "}"
    raise ValueError(f"cannot serialize value of type {type(value).__name__}")


def _options_doc(options: Options) -> dict:
    return {name: getattr(options, name) for name in _OPTION_FIELDS}


def _trace_doc(trace: Trace) -> dict:
    doc = {name: getattr(trace, name) for name in _TRACE_FIELDS}
    if trace.iterates is not None:
        doc["iterates"] = [np.asarray(it).tolist() for it in trace.iterates]
    return doc


def _descriptor_doc(descriptor: dict) -> dict:
    unknown = set(descriptor) - set(_DESCRIPTOR_FIELDS)
    if unknown:
        raise ValueError(f"unknown problem_descriptor key {sorted(unknown)[0]!r}")
    return {
        "builder": str(descriptor.get("builder", "")),
        "params": {k: descriptor.get("params", {})[k] for k in sorted(descriptor.get("params", {}))},
        "data_digests": {
            k: str(descriptor.get("data_digests", {})[k])
            for k in sorted(descriptor.get("data_digests", {}))
        },
    }


def write_run(record: RunRecord, path) -> None:
    """Write ``record`` as a strict JSON document plus a sibling ``.csv``.

    Key order is fixed, floats carry 17 significant digits, and callbacks are
    refused since they cannot round-trip.  The CSV holds one row per iteration
    with columns iteration, residual, normalized_residual, stepsize,
    objective (only if recorded), func_value.
    """
    if record.options.monitor is not None or record.options.stop_now is not None:
        raise ValueError("options with monitor/stop_now callbacks cannot be serialized")
    if record.termination not in TERMINATION_REASONS:
        raise ValueError(f"unknown termination reason {record.termination!r}")
    doc = {
        "schema_version": SCHEMA_VERSION,
        "seed": int(record.seed),
        "termination": record.termination,
        "problem": _descriptor_doc(record.problem_descriptor),
        "options": _options_doc(record.options),
        "trace": _trace_doc(record.trace),
    }
    path = Path(path)
    try:
        path.write_text(_render(doc) + "\n")
        _write_csv(record.trace, path.with_suffix(".csv"))
    except OSError as err:
        raise OSError(f"writing run to {path}: {err}") from err


def _write_csv(trace: Trace, path: Path) -> None:
    with_objective = len(trace.objective) > 0
    columns = ["iteration", "residual", "normalized_residual", "stepsize"]
    if with_objective:
        columns.append("objective")
    columns.append("func_value")
    lines = [",".join(columns)]
    for i in range(trace.iteration_count):
        row = [
            str(i + 1),
            _fmt_float(trace.residuals[i]),
            _fmt_float(trace.normalized_residuals[i]),
            _fmt_float(trace.stepsizes[i]),
        ]
        if with_objective:
            row.append(_fmt_float(trace.objective[i]))
        row.append(_fmt_float(trace.func_values[i]))
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def _require_keys(doc: dict, expected, where: str) -> None:
    unknown = set(doc) - set(expected)
    if unknown:
        raise ValueError(f"unknown key {sorted(unknown)[0]!r} in {where}")
    missing = set(expected) - set(doc)
    if missing:
        raise ValueError(f"missing key {sorted(missing)[0]!r} in {where}")


def read_run(path) -> RunRecord:
    """Exact inverse of :func:`write_run` (the CSV is derived, not re-read)."""
    text = Path(path).read_text()
    doc = json.loads(text)  # malformed input raises with line/column context
    if not isinstance(doc, dict):
        raise ValueError("run document must be a JSON object")
    _require_keys(doc, _TOP_FIELDS, "run document")
    version = doc["schema_version"]
    if version != SCHEMA_VERSION:
        raise ValueError(
            f"incompatible schema_version {version!r}, expected {SCHEMA_VERSION}"
        )
    if doc["termination"] not in TERMINATION_REASONS:
        raise ValueError(f"unknown termination reason {doc['termination']!r}")

    _require_keys(doc["options"], _OPTION_FIELDS, "options")
    options = Options(**{k: doc["options"][k] for k in _OPTION_FIELDS})

    _require_keys(doc["trace"], _TRACE_FIELDS, "trace")
    tdoc = doc["trace"]
    iterates = tdoc["iterates"]
    if iterates is not None:
        iterates = [np.asarray(it, dtype=float) for it in iterates]
    trace = Trace(
        solve_time=float(tdoc["solve_time"]),
        residuals=[float(v) for v in tdoc["residuals"]],
        stepsizes=[float(v) for v in tdoc["stepsizes"]],
        normalized_residuals=[float(v) for v in tdoc["normalized_residuals"]],
        objective=[float(v) for v in tdoc["objective"]],
        func_values=[float(v) for v in tdoc["func_values"]],
        backtracks=int(tdoc["backtracks"]),
        lipschitz_estimate=float(tdoc["lipschitz_estimate"]),
        initial_stepsize=float(tdoc["initial_stepsize"]),
        iteration_count=int(tdoc["iteration_count"]),
        iterates=iterates,
    )

    _require_keys(doc["problem"], _DESCRIPTOR_FIELDS, "problem")
    descriptor = {
        "builder": doc["problem"]["builder"],
        "params": dict(doc["problem"]["params"]),
        "data_digests": dict(doc["problem"]["data_digests"]),
    }
    return RunRecord(
        options=options,
        trace=trace,
        termination=doc["termination"],
        problem_descriptor=descriptor,
        seed=int(doc["seed"]),
    )
