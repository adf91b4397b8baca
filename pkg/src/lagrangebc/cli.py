"""Command-line front end.

Every subcommand reads a JSON problem document (``--spec FILE``, ``-`` for
stdin), validates it against a schema, runs the computation and prints a
JSON report on stdout.  Arrays too large for the report go to CSV files in
``--out``.  Exit status: 0 success, 1 mathematical rejection, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .boundary import (
    BC_PRESET_PARAMS,
    BC_PRESETS,
    DEFAULT_QUAD_NODES,
    VERDICT_TOL,
    CalkinSystem,
    TestFunction,
    bc_preset,
    calkin_check,
    classify_bc,
)
from .connection import (
    KATO_TOL,
    RAY_TOL,
    Curve,
    Frame,
    canonical_field,
    lagrangian_frame_field,
    parallel_transport,
    scalar_scaled_field,
)
from .errors import InvalidArgument, LagrangeBCError, TooManyVectorsError
from .nonlinear import (
    CERT_TOL,
    LSA_TOL,
    NEWTON_TOL,
    NONLINEARITIES,
    ModelOperator,
    NonlinearBC,
    discrete_graphs,
    solve_bvp_lsa,
)
from .symplin import graph_defect

EXIT_OK, EXIT_REJECTED, EXIT_INPUT = 0, 1, 2
TOL_FLOOR = 1e-14

DEFAULT_TOLS = {
    "verdict": VERDICT_TOL,
    "lsa": LSA_TOL,
    "newton": NEWTON_TOL,
    "cert": CERT_TOL,
    "ray": RAY_TOL,
    "kato": KATO_TOL,
}

FORCINGS = {
    "zero": lambda t: np.zeros_like(t),
    "one": lambda t: np.ones_like(t),
    "pi2_sine": lambda t: np.pi**2 * np.sin(np.pi * t),
    "cos_cubic": lambda t: np.cos(t) + np.cos(t) ** 3,
}

NONLINEAR_BCS = {
    "separated": ("c0", "c1"),
    "coupled": (),
}

FIELDS = {
    "canonical": ("m",),
    "scalar-scaled": ("m", "terms"),
}

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}
_MAT = {"type": "array", "items": _VEC, "minItems": 1}

_BC_LINEAR = {
    "type": "object",
    "properties": {
        "preset": {"enum": sorted(BC_PRESETS)},
        "params": {"type": "object", "additionalProperties": _NUM},
        "theta": _MAT,
    },
    "oneOf": [{"required": ["preset"]}, {"required": ["theta"]}],
    "additionalProperties": False,
}

_FIELD = {
    "type": "object",
    "properties": {
        "name": {"enum": sorted(FIELDS)},
        "m": {"type": "integer", "minimum": 1},
        "terms": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "coeff": _NUM,
                    "exponents": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                },
                "required": ["coeff", "exponents"],
                "additionalProperties": False,
            },
        },
        "domain": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["name", "m"],
    "additionalProperties": False,
}

_FUNCTION = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["polynomial", "trig", "bump", "hermite"]},
        "coeffs": _VEC,
        "fn": {"enum": ["sin", "cos"]},
        "freq": _NUM,
        "a": _NUM,
        "b": _NUM,
        "power": {"type": "integer", "minimum": 2},
        "tilt": _NUM,
        "trace": {"type": "array", "items": _NUM, "minItems": 4, "maxItems": 4},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

SCHEMAS = {
    "classify": _BC_LINEAR,
    "transport": {
        "type": "object",
        "properties": {
            "field": _FIELD,
            "start": _VEC,
            "end": _VEC,
            "frame": _MAT,
            "steps": {"type": "integer", "minimum": 1},
        },
        "required": ["field", "start", "end", "steps"],
        "additionalProperties": False,
    },
    "frames": {
        "type": "object",
        "properties": {
            "field": _FIELD,
            "L_hat": _MAT,
            "f0": _MAT,
            "points": _MAT,
            "steps": {"type": "integer", "minimum": 1},
        },
        "required": ["field", "L_hat", "f0", "points"],
        "additionalProperties": False,
    },
    "bvp": {
        "type": "object",
        "properties": {
            "n": {"type": "integer", "minimum": 8, "maximum": 4096},
            "g": {"enum": sorted(NONLINEARITIES)},
            "bc": {
                "type": "object",
                "properties": {
                    "preset": {"enum": sorted(set(BC_PRESETS) | set(NONLINEAR_BCS))},
                    "params": {"type": "object", "additionalProperties": _NUM},
                    "theta": _MAT,
                },
                "oneOf": [{"required": ["preset"]}, {"required": ["theta"]}],
                "additionalProperties": False,
            },
            "f": {
                "type": "object",
                "properties": {"name": {"enum": sorted(FORCINGS)}, "samples": _VEC},
                "oneOf": [{"required": ["name"]}, {"required": ["samples"]}],
                "additionalProperties": False,
            },
        },
        "required": ["n", "g", "bc", "f"],
        "additionalProperties": False,
    },
    "defect": {
        "type": "object",
        "properties": {"n": {"type": "integer", "minimum": 8, "maximum": 1024}},
        "required": ["n"],
        "additionalProperties": False,
    },
    "calkin": {
        "type": "object",
        "properties": {
            "functions": {"type": "array", "items": _FUNCTION, "minItems": 1},
            "quad_nodes": {"type": "integer", "minimum": 2},
        },
        "required": ["functions"],
        "additionalProperties": False,
    },
}


def catalog():
    """Named presets with their parameter lists."""
    return {
        "boundary_conditions": {
            name: {"params": list(BC_PRESET_PARAMS.get(name, ()))} for name in sorted(BC_PRESETS)
        },
        "nonlinear_boundary_conditions": {name: {"params": list(p)} for name, p in NONLINEAR_BCS.items()},
        "nonlinearities": sorted(NONLINEARITIES),
        "form_fields": {name: {"params": list(p)} for name, p in FIELDS.items()},
        "forcings": sorted(FORCINGS),
    }


class InputError(Exception):
    pass


# --- serialisation -----------------------------------------------------------


def _fmt(x):
    return "%.17g" % x


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def dumps(obj):
    """JSON with sorted keys and every float written with 17 significant digits."""
    obj = _plain(obj)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _fmt(obj) if math.isfinite(obj) else json.dumps(str(obj))
    if isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, list):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {dumps(obj[k])}" for k in sorted(obj)) + "}"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    return str(path)


# --- payload helpers ---------------------------------------------------------


def _bc_matrix(spec):
    if "theta" in spec:
        if "params" in spec:
            raise InputError("'params' only applies to presets")
        return np.array(spec["theta"], dtype=float)
    try:
        return bc_preset(spec["preset"], **spec.get("params", {}))
    except InvalidArgument as exc:
        raise InputError(str(exc)) from None


def _field(spec):
    m = spec["m"]
    if spec["name"] == "canonical":
        if "terms" in spec:
            raise InputError("the canonical field takes no terms")
        return canonical_field(m, spec.get("domain"))
    if "terms" not in spec:
        raise InputError("scalar-scaled field needs 'terms'")
    terms = [(t["coeff"], t["exponents"]) for t in spec["terms"]]
    return scalar_scaled_field(m, terms, spec.get("domain"))


def _columns(rows, dim, what):
    a = np.array(rows, dtype=float)
    if a.ndim != 2 or a.shape[1] != dim:
        raise InputError(f"{what} must be a list of vectors of length {dim}")
    return a.T


def _function(spec):
    kind = spec["kind"]
    try:
        if kind == "polynomial":
            return TestFunction.polynomial(spec["coeffs"])
        if kind == "trig":
            return TestFunction.trig(spec["fn"], spec["freq"])
        if kind == "bump":
            return TestFunction.poly_bump(
                spec.get("a", 0.25), spec.get("b", 0.75), spec.get("power", 4), spec.get("tilt", 0.0)
            )
        return TestFunction.hermite(spec["trace"])
    except KeyError as exc:
        raise InputError(f"function of kind {kind!r} needs {exc.args[0]!r}") from None


def _nonlinear_bc(spec):
    name = spec.get("preset")
    if name in NONLINEAR_BCS:
        params = spec.get("params", {})
        if set(params) - set(NONLINEAR_BCS[name]):
            raise InputError(f"preset {name!r} takes parameters {list(NONLINEAR_BCS[name])}")
        if name == "coupled":
            return NonlinearBC.coupled()
        return NonlinearBC.separated(params.get("c0", 0.0), params.get("c1", 0.0))
    return NonlinearBC.linear(_bc_matrix(spec), name=name or "linear")


# --- commands ----------------------------------------------------------------


def cmd_classify(payload, tols, out):
    theta = _bc_matrix(payload)
    if theta.ndim != 2 or theta.shape[1] != 4:
        raise InputError(f"theta must have 4 columns, got shape {theta.shape}")
    res = classify_bc(theta, tol=tols["verdict"])
    report = {
        "verdict": res.verdict.value,
        "rank": res.rank,
        "kernel_dim": res.kernel_dim,
        "kernel_kind": res.kernel_kind.value,
        "residuals": {"pairing": res.pairing_residual, "isotropy": res.isotropy_residual},
    }
    return report, res.verdict.value == "self_adjoint"


def cmd_transport(payload, tols, out):
    field = _field(payload["field"])
    start = np.array(payload["start"], dtype=float)
    end = np.array(payload["end"], dtype=float)
    if start.shape != (field.dim,) or end.shape != (field.dim,):
        raise InputError(f"start and end must have {field.dim} components")
    vecs = np.eye(field.dim) if "frame" not in payload else _columns(payload["frame"], field.dim, "frame")
    frame, rep = parallel_transport(field, Curve.segment(start, end), Frame(start, vecs), payload["steps"])
    path = _write_csv(
        Path(out) / "transport_frame.csv",
        ["vector", "component", "value"],
        [(j, i, float(frame.vectors[i, j])) for j in range(frame.vectors.shape[1]) for i in range(field.dim)],
    )
    report = {
        "end_point": frame.point,
        "steps": rep.steps,
        "residuals": {"max_drift": rep.max_drift},
        "files": {"frame": path},
    }
    return report, True


def cmd_frames(payload, tols, out):
    field = _field(payload["field"])
    L = _columns(payload["L_hat"], field.dim, "L_hat")
    f0 = _columns(payload["f0"], field.dim, "f0")
    frames = lagrangian_frame_field(field, L, f0, payload["points"], payload.get("steps", 200), tols["ray"])
    rows = []
    for k, fr in enumerate(frames):
        for kind, mat in (("e", fr.e), ("f", fr.f)):
            for j in range(mat.shape[1]):
                for i in range(field.dim):
                    rows.append((k, kind, j, i, float(mat[i, j])))
    path = _write_csv(Path(out) / "frames.csv", ["point", "family", "vector", "component", "value"], rows)
    report = {
        "points": [fr.point for fr in frames],
        "residuals": {
            "tangency": max(fr.tangency_residual for fr in frames),
            "basis": max(fr.basis_residual for fr in frames),
            "drift": max(fr.drift for fr in frames),
        },
        "files": {"frames": path},
    }
    return report, report["residuals"]["basis"] <= 1e-8


def cmd_bvp(payload, tols, out):
    g, dg = NONLINEARITIES[payload["g"]]
    op = ModelOperator(payload["n"], g, dg)
    fs = payload["f"]
    if "samples" in fs:
        f = np.array(fs["samples"], dtype=float)
        if f.shape != (op.n,):
            raise InputError(f"forcing samples must have {op.n} values")
    else:
        f = FORCINGS[fs["name"]](op.t)
    bc = _nonlinear_bc(payload["bc"])
    sol = solve_bvp_lsa(
        op, bc, f, tol=tols["newton"], cert_tol=tols["cert"], lsa_tol=tols["lsa"]
    )
    c = sol.certificate
    path = _write_csv(Path(out) / "solution.csv", ["t", "u"], zip(map(float, sol.t), map(float, sol.u)))
    report = {
        "trace": sol.trace.as_array(),
        "iterations": c.iterations,
        "residual_history": list(c.residual_history),
        "certificate": {"converged": c.converged, "passed": c.passed, "note": c.note},
        "residuals": {
            "lsa_pairing": c.lsa_pairing_residual,
            "green": c.green_residual,
            "kernel_pairing": c.kernel_pairing,
        },
        "files": {"solution": path},
    }
    return report, c.passed


def cmd_defect(payload, tols, out):
    lo, hi = discrete_graphs(payload["n"])
    d = graph_defect(lo, hi)
    report = {
        "defect": d,
        "min_graph_dim": lo.dim,
        "max_graph_dim": hi.dim,
        "residuals": {"inclusion": lo.inclusion_residual(hi)},
    }
    return report, True


def cmd_calkin(payload, tols, out):
    funcs = [_function(s) for s in payload["functions"]]
    try:
        v = calkin_check(
            CalkinSystem(funcs), quad_nodes=payload.get("quad_nodes", DEFAULT_QUAD_NODES), tol=tols["verdict"]
        )
    except TooManyVectorsError as exc:
        raise InputError(str(exc)) from None
    report = {
        "passed": v.passed,
        "failed": list(v.failed),
        "traces": v.traces,
        "trace_rank": v.trace_rank,
        "theta": v.theta,
        "residuals": {"pairing": v.pairing_residual, "agreement": v.agreement_residual},
    }
    return report, v.passed


COMMANDS = {
    "classify": cmd_classify,
    "transport": cmd_transport,
    "frames": cmd_frames,
    "bvp": cmd_bvp,
    "defect": cmd_defect,
    "calkin": cmd_calkin,
}


def _parse_tols(items):
    tols = dict(DEFAULT_TOLS)
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep or name not in tols:
            raise InputError(f"--tol expects NAME=VALUE with NAME in {sorted(tols)}, got {item!r}")
        try:
            val = float(value)
        except ValueError:
            raise InputError(f"tolerance {name} is not a number: {value!r}") from None
        if not math.isfinite(val) or val < TOL_FLOOR:
            raise InputError(f"tolerance {name}={value} is below the floor {TOL_FLOOR:g}")
        tols[name] = val
    return tols


def _read(spec_arg):
    if spec_arg is None:
        raise InputError("--spec is required")
    return sys.stdin.buffer.read() if spec_arg == "-" else Path(spec_arg).read_bytes()


def _parse(raw):
    try:
        return json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f"malformed JSON: {exc}") from None


def _validate(command, payload):
    validator = jsonschema.Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(payload), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        pointer = "/" + "/".join(str(p) for p in err.absolute_path)
        raise InputError(f"{pointer}: {err.message}")


HELP = {
    "classify": "classify a linear boundary condition",
    "transport": "parallel transport of a frame along a segment",
    "frames": "Lagrangian frame field along rays",
    "bvp": "solve and certify a nonlinear boundary value problem",
    "defect": "defect of the discrete minimal and maximal graphs",
    "calkin": "check a Calkin system of test functions",
}


def build_parser():
    p = argparse.ArgumentParser(prog="lagrangebc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, help=HELP[name])
        s.add_argument("--spec", help="JSON problem file, '-' for stdin")
        s.add_argument("--out", default=".", help="directory for CSV output")
        s.add_argument("--tol", action="append", metavar="NAME=VALUE", help="override a tolerance")
    sub.add_parser("presets", help="list named presets")
    return p


def run(argv=None, stdout=None):
    """Run the CLI and return the exit code."""
    stdout = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    if args.command == "presets":
        print(dumps(catalog()), file=stdout)
        return EXIT_OK
    raw = b""
    tols = dict(DEFAULT_TOLS)
    try:
        tols = _parse_tols(args.tol)
        raw = _read(args.spec)
        payload = _parse(raw)
        _validate(args.command, payload)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report, ok = COMMANDS[args.command](payload, tols, out)
        code = EXIT_OK if ok else EXIT_REJECTED
    except (InputError, InvalidArgument, OSError) as exc:
        report, code = {"error": str(exc)}, EXIT_INPUT
    except LagrangeBCError as exc:
        report = {"error": str(exc), "error_type": type(exc).__name__}
        code = EXIT_REJECTED
    report["command"] = args.command
    report["status"] = {EXIT_OK: "pass", EXIT_REJECTED: "rejected", EXIT_INPUT: "input_error"}[code]
    report["provenance"] = {
        "version": __version__,
        "tolerances": tols,
        "input_sha256": hashlib.sha256(raw).hexdigest(),
    }
    print(dumps(report), file=stdout)
    if code == EXIT_INPUT:
        print(f"error: {report['error']}", file=sys.stderr)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
