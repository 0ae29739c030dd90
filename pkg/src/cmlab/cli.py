"""Command-line entry point ``cmlab``.

Subcommands: ``state``, ``spectrum``, ``simulate``, ``verify``, ``bracket``.
States and reports are JSON, time series and spectra are CSV.  Every run
writes a manifest (command line, configuration, seed, version, wall time and
SHA-256 hashes of the files it wrote) next to its primary output, or into
``$CMLAB_OUTPUT_DIR`` (default: the working directory) when the primary
output goes to stdout.

Exit codes: 0 success, 1 usage error, 2 verification failure, 3 numerical
failure.  Numerical failures print a JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import jsonschema
import numpy as np

from . import __version__
from .lax import ThresholdError, beta_dk, build_lax, resolve
from .spectral import (
    STATE_SCHEMA,
    DimensionError,
    Geometry,
    HardyState,
    constant_state,
    line_soliton,
    plane_wave,
    random_state,
    state_from_dict,
    state_to_dict,
    torus_soliton,
)
from .symplectic import DegeneracyError, Functional, gradient_report, j_map, poisson_bracket

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_NUMERIC = 0, 1, 2, 3

OUTPUT_ENV = "CMLAB_OUTPUT_DIR"

CSV_COLUMNS = ("t", "mass", "momentum", "hamiltonian", "beta", "e2", "e3", "equi", "tail",
               "lax_residual")

MANIFEST_SCHEMA: dict = {
    "type": "object",
    "required": ["command", "argv", "config", "seed", "version", "wall_time_s", "outputs"],
    "properties": {
        "command": {"type": "string"},
        "argv": {"type": "array", "items": {"type": "string"}},
        "config": {"type": "object"},
        "seed": {"type": ["integer", "null"]},
        "version": {"type": "string"},
        "wall_time_s": {"type": "number", "minimum": 0},
        "exit_code": {"type": "integer"},
        "outputs": {
            "type": "object",
            "additionalProperties": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        },
    },
}

RUN_SCHEMA: dict = {
    "type": "object",
    "required": ["spec", "monitors", "final_state", "warnings", "blowup"],
    "properties": {
        "spec": {"type": "object", "required": ["field", "geometry", "dt", "t_final"]},
        "monitors": {
            "type": "object",
            "required": ["t"],
            "additionalProperties": {"type": "array",
                                     "items": {"type": ["number", "null"]}},
        },
        "final_state": STATE_SCHEMA,
        "warnings": {"type": "array", "items": {"type": "string"}},
        "blowup": {"type": ["object", "null"]},
    },
}

VERIFY_SCHEMA: dict = {
    "type": "object",
    "required": ["seed", "n_modes", "passed", "suites"],
    "properties": {
        "passed": {"type": "boolean"},
        "suites": {
            "type": "array",
            "items": {"type": "object", "required": ["suite", "passed", "checks"]},
        },
    },
}

BRACKET_SCHEMA: dict = {
    "type": "object",
    "required": ["F", "G", "bracket", "method", "gradients"],
    "properties": {
        "bracket": {"type": "number"},
        "gradients": {
            "type": "array", "minItems": 2, "maxItems": 2,
            "items": {"type": "object", "required": ["functional", "discrepancy"]},
        },
    },
}

ERROR_SCHEMA: dict = {
    "type": "object",
    "required": ["error", "message"],
    "properties": {"error": {"type": "string"}, "message": {"type": "string"}},
}

SCHEMAS = {
    "state": STATE_SCHEMA,
    "manifest": MANIFEST_SCHEMA,
    "run": RUN_SCHEMA,
    "verify": VERIFY_SCHEMA,
    "bracket": BRACKET_SCHEMA,
    "error": ERROR_SCHEMA,
}


class UsageError(Exception):
    pass


class VerificationFailure(Exception):
    pass


def validate(kind: str, obj) -> None:
    """Validate an emitted document against its schema."""
    jsonschema.validate(obj, SCHEMAS[kind])


def validate_csv(text: str, columns: Sequence[str]) -> None:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != tuple(columns):
        raise ValueError(f"CSV header {rows[0] if rows else None} != {list(columns)}")
    for r in rows[1:]:
        if len(r) != len(columns):
            raise ValueError("ragged CSV row")
        for v in r:
            float(v)


# ------------------------------------------------------------ manifest

@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config: dict
    seed: int | None
    version: str = __version__
    wall_time_s: float = 0.0
    outputs: dict[str, str] = field(default_factory=dict)
    exit_code: int = 0
    platform: str = field(default_factory=lambda: f"{platform.python_implementation()} "
                          f"{platform.python_version()} numpy {np.__version__}")

    def record(self, path: Path) -> None:
        self.outputs[str(path)] = sha256_file(path)

    def to_dict(self) -> dict:
        return {
            "command": self.command, "argv": self.argv, "config": self.config,
            "seed": self.seed, "version": self.version,
            "wall_time_s": round(self.wall_time_s, 6), "exit_code": self.exit_code,
            "outputs": self.outputs, "platform": self.platform,
        }


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or ".")


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _write_json(path: Path, kind: str, obj, manifest: RunManifest) -> Path:
    validate(kind, obj)
    manifest.record(_write_text(path, _dump_json(obj)))
    return path


def _write_csv(path: Path | None, header: Sequence[str], rows, manifest: RunManifest) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    text = buf.getvalue()
    validate_csv(text, header)
    if path is not None:
        manifest.record(_write_text(path, text))
    return text


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _manifest_path(primary: Path | None, command: str) -> Path:
    if primary is None:
        return output_dir() / f"cmlab-{command}.manifest.json"
    return primary.with_name(primary.stem + ".manifest.json")


def _resolve_out(p: str | None) -> Path | None:
    return Path(p) if p else None


# ------------------------------------------------------------ parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit with code 1
        raise UsageError(f"{self.prog}: {message}")


def _sign(s: str) -> str:
    if s not in ("focusing", "defocusing"):
        raise argparse.ArgumentTypeError("sign must be focusing or defocusing")
    return s


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cmlab", description="Calogero-Moser derivative NLS laboratory.")
    p.add_argument("--version", action="version", version=f"cmlab {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("state", help="build a canonical state")
    s.add_argument("--preset", required=True,
                   choices=["soliton-torus", "soliton-line", "plane-wave", "random", "constant"])
    s.add_argument("--n", type=float, default=1, help="soliton index")
    s.add_argument("--c", type=complex, default=1.0, help="plane-wave amplitude")
    s.add_argument("--m", type=int, default=1, help="plane-wave frequency")
    s.add_argument("--value", type=complex, default=1.0, help="constant value")
    s.add_argument("--geometry", choices=["torus", "line"], default="torus")
    s.add_argument("--n-modes", type=int, default=128)
    s.add_argument("--half-length", type=float, default=40.0)
    s.add_argument("--representation", choices=["periodized", "sampled"], default="periodized")
    s.add_argument("--sign", type=_sign, default="focusing")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mass", type=float, default=1.0)
    s.add_argument("--decay", type=float, nargs=2, default=(1.5, 3.0), metavar=("A_MIN", "A_MAX"))
    s.add_argument("-o", "--output", help="state JSON (default: $CMLAB_OUTPUT_DIR/state.json)")

    s = sub.add_parser("spectrum", help="Lax eigenvalues and beta table")
    s.add_argument("-i", "--input", required=True)
    s.add_argument("--kappa", type=float, action="append", help="repeatable (default: 2 3 5 8)")
    s.add_argument("-o", "--output", help="beta table CSV (default: stdout)")
    s.add_argument("--eigenvalues", help="eigenvalue CSV (default: next to the table)")

    s = sub.add_parser("simulate", help="integrate a flow")
    s.add_argument("--flow", required=True, help="ccm | half-e2 | beta:K | en:N | hk:K")
    s.add_argument("--geometry", choices=["torus", "line"])
    s.add_argument("--sign", type=_sign)
    s.add_argument("--n-modes", type=int)
    s.add_argument("--half-length", type=float)
    s.add_argument("--dt", type=float, required=True)
    s.add_argument("--t-final", type=float, required=True)
    s.add_argument("--seed", type=int, default=0, help="random initial state when no -i")
    s.add_argument("--mass", type=float, default=1.0, help="mass of the random initial state")
    s.add_argument("--stride", type=int, default=10, help="monitor every STRIDE steps")
    s.add_argument("--lax-monitor", action="store_true")
    s.add_argument("--hk-split", choices=["full", "duhamel"], default="full")
    s.add_argument("-i", "--input")
    s.add_argument("-o", "--output", help="run JSON (default: $CMLAB_OUTPUT_DIR/run.json)")
    s.add_argument("--csv", nargs="?", const="", default=None,
                   help="monitor CSV (default path: next to the run JSON)")

    s = sub.add_parser("verify", help="run verification suites")
    s.add_argument("suite", choices=["all", "carleman", "bounds", "gradients", "commute",
                                     "degeneracy", "lipschitz"])
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--n-modes", type=int, default=64)
    s.add_argument("--trials", type=int)
    s.add_argument("--json", help="report path")

    s = sub.add_parser("bracket", help="Poisson bracket of two functionals")
    s.add_argument("F")
    s.add_argument("G")
    s.add_argument("-i", "--input", required=True)
    s.add_argument("--method", choices=["wirtinger", "gradient", "oracle"], default="wirtinger")
    s.add_argument("--json", help="report path (default: stdout)")
    return p


# ------------------------------------------------------------ commands

def _load_state(path: str) -> HardyState:
    try:
        d = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not JSON: {exc}") from None
    try:
        return state_from_dict(d)
    except (jsonschema.ValidationError, DimensionError, ValueError) as exc:
        raise UsageError(f"{path} is not a valid state: {getattr(exc, 'message', exc)}") from None


def _make_state(a) -> HardyState:
    if a.preset == "soliton-torus":
        if a.n < 1 or not float(a.n).is_integer():
            raise UsageError("torus solitons need a positive integer --n")
        return torus_soliton(int(a.n), a.n_modes, a.sign)
    if a.preset == "soliton-line":
        if a.n <= 0:
            raise UsageError("line solitons need --n > 0")
        return line_soliton(a.n, a.n_modes, a.half_length, a.representation, a.sign)
    if a.preset == "plane-wave":
        return plane_wave(a.c, a.m, a.n_modes, a.sign)
    g = Geometry.torus(a.n_modes) if a.geometry == "torus" else Geometry.line(a.n_modes, a.half_length)
    if a.preset == "constant":
        return constant_state(a.value, g, a.sign)
    rng = np.random.default_rng(a.seed)
    return random_state(g, rng, a.mass, a.sign, decay=tuple(a.decay))


def cmd_state(a, man: RunManifest) -> int:
    try:
        q = _make_state(a)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _resolve_out(a.output) or output_dir() / "state.json"
    _write_json(out, "state", state_to_dict(q), man)
    man.config.update(preset=a.preset, geometry=q.geometry.to_dict(), sign=q.sign)
    man.seed = a.seed if a.preset == "random" else None
    print(out)
    return EXIT_OK


def cmd_spectrum(a, man: RunManifest) -> int:
    q = _load_state(a.input)
    lax = build_lax(q)
    lam = lax.eigenvalues
    kappas = a.kappa or [2.0, 3.0, 5.0, 8.0]
    rows = []
    for k in kappas:
        if k < 1:
            raise UsageError("kappa must be at least 1")
        rows.append((k, resolve(q, k, lax).beta, beta_dk(q, k, lax)))
    out = _resolve_out(a.output)
    text = _write_csv(out, ("kappa", "beta", "dbeta_dk"), rows, man)
    ev_path = _resolve_out(a.eigenvalues)
    if ev_path is None:
        ev_path = (out.with_name(out.stem + ".eigenvalues.csv") if out
                   else output_dir() / "eigenvalues.csv")
    _write_csv(ev_path, ("index", "eigenvalue"), enumerate(lam), man)
    man.config.update(input=a.input, kappa=list(kappas))
    if out is None:
        sys.stdout.write(text)
    else:
        print(out)
    return EXIT_OK


def _sim_state(a) -> HardyState:
    if a.input:
        q = _load_state(a.input)
        g = q.geometry
        if a.geometry and a.geometry != g.kind:
            raise UsageError(f"--geometry {a.geometry} disagrees with the state ({g.kind})")
        if a.n_modes and a.n_modes != g.n_modes:
            raise UsageError(f"--n-modes {a.n_modes} disagrees with the state ({g.n_modes})")
        if a.half_length and g.kind == "line" and not math.isclose(a.half_length, g.half_length):
            raise UsageError("--half-length disagrees with the state")
        if a.sign and a.sign != q.sign:
            q = q.with_sign(a.sign)
        return q
    kind = a.geometry or "torus"
    n = a.n_modes or 64
    g = Geometry.torus(n) if kind == "torus" else Geometry.line(n, a.half_length or 3 * n / 8)
    return random_state(g, np.random.default_rng(a.seed), a.mass, a.sign or "focusing")


def cmd_simulate(a, man: RunManifest) -> int:
    from .flows import FlowSpec, evolve

    q0 = _sim_state(a)
    try:
        spec = FlowSpec.parse(a.flow, q0.geometry, sign=q0.sign, dt=a.dt, t_final=a.t_final,
                              monitor_stride=a.stride, lax_monitor=a.lax_monitor,
                              hk_split=a.hk_split)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    tr = evolve(spec, q0)
    cols = {"t": tr.times}
    cols.update(tr.monitors)
    monitors = {k: [None if not np.isfinite(x) else float(x) for x in v] for k, v in cols.items()}
    blow = None
    if tr.blowup is not None:
        blow = {"time": tr.blowup["time"], "step": tr.blowup["step"]}
    doc = {
        "spec": spec.to_dict(),
        "initial_state": state_to_dict(q0),
        "monitors": monitors,
        "final_state": state_to_dict(tr.final),
        "warnings": tr.warnings,
        "blowup": blow,
    }
    out = _resolve_out(a.output) or output_dir() / "run.json"
    _write_json(out, "run", doc, man)
    if a.csv is not None:
        cpath = Path(a.csv) if a.csv else out.with_suffix(".csv")
        rows = zip(*(cols[c] for c in CSV_COLUMNS))
        _write_csv(cpath, CSV_COLUMNS, rows, man)
    man.config.update(flow=spec.to_dict(), input=a.input, mass=None if a.input else a.mass)
    man.seed = None if a.input else a.seed
    for w in tr.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(out)
    if blow is not None:
        raise FloatingPointError(f"non-finite state at t = {blow['time']:g} (step {blow['step']})")
    return EXIT_OK


def cmd_verify(a, man: RunManifest) -> int:
    from .verify import SUITES, run_all

    if a.trials is not None and a.trials < 1:
        raise UsageError("--trials must be at least 1")
    suites = SUITES if a.suite == "all" else (a.suite,)
    report = run_all(a.seed, a.n_modes, a.trials, suites)
    man.seed = a.seed
    man.config.update(suite=a.suite, n_modes=a.n_modes, trials=a.trials)
    if a.json:
        _write_json(Path(a.json), "verify", report, man)
    else:
        validate("verify", report)
    for s in report["suites"]:
        status = "PASS" if s["passed"] else "FAIL"
        print(f"{status} {s['suite']} ({s['elapsed_s']:.2f} s)")
        if s["error"]:
            print(f"    error: {s['error']}")
        for c in s["checks"]:
            if not c["passed"]:
                print(f"    {c['name']}: {c['value']} (limit {c['relation']} {c['limit']})")
    if not report["passed"]:
        raise VerificationFailure("one or more checks failed")
    return EXIT_OK


def cmd_bracket(a, man: RunManifest) -> int:
    q = _load_state(a.input)
    try:
        F, G = Functional.parse(a.F), Functional.parse(a.G)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    J = j_map(q)
    val = poisson_bracket(F, G, q, a.method, J)
    doc = {
        "F": str(F), "G": str(G), "method": a.method, "bracket": val,
        "gradients": [gradient_report(F, q, J=J).to_dict(), gradient_report(G, q, J=J).to_dict()],
    }
    man.config.update(F=str(F), G=str(G), method=a.method, input=a.input)
    if a.json:
        _write_json(Path(a.json), "bracket", doc, man)
        print(a.json)
    else:
        validate("bracket", doc)
        sys.stdout.write(_dump_json(doc))
    return EXIT_OK


COMMANDS = {
    "state": cmd_state,
    "spectrum": cmd_spectrum,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "bracket": cmd_bracket,
}


def _primary(a) -> Path | None:
    for name in ("output", "json"):
        v = getattr(a, name, None)
        if v:
            return Path(v)
    if a.command == "state":
        return output_dir() / "state.json"
    if a.command == "simulate":
        return output_dir() / "run.json"
    return None


def _error_json(kind: str, exc: BaseException, **extra) -> dict:
    doc = {"error": kind, "message": str(exc), **extra}
    validate("error", doc)
    return doc


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    if a.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    man = RunManifest(a.command, argv, {}, getattr(a, "seed", None))
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        code = COMMANDS[a.command](a, man)
    except UsageError as exc:
        print(f"cmlab {a.command}: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    except VerificationFailure as exc:
        print(f"cmlab {a.command}: {exc}", file=sys.stderr)
        code = EXIT_VERIFY
    except ThresholdError as exc:
        print(_dump_json(_error_json("threshold", exc, mass=exc.mass)), file=sys.stderr, end="")
        code = EXIT_NUMERIC
    except DegeneracyError as exc:
        print(_dump_json(_error_json("degenerate", exc, sigma_min=exc.sigma_min)),
              file=sys.stderr, end="")
        code = EXIT_NUMERIC
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(_dump_json(_error_json("numerical", exc)), file=sys.stderr, end="")
        code = EXIT_NUMERIC
    man.wall_time_s = time.perf_counter() - t0
    man.exit_code = code
    if code != EXIT_USAGE:
        doc = man.to_dict()
        validate("manifest", doc)
        _write_text(_manifest_path(_primary(a), a.command), _dump_json(doc))
    return code


if __name__ == "__main__":
    raise SystemExit(main())
