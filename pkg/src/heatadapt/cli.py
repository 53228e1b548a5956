"""Command-line front end: run scenarios, emit CSV traces and JSON manifests.

Commands:
  simulate   run one scenario, write trace.csv (+ snapshots.csv) and manifest.json
  analyze    post-process an emitted trace.csv (PE verdict, convergence gaps)
  sweep      run simulate over a list of values of one parameter

Exit codes: 0 success, 2 CFL violation, 3 blow-up, 4 requested verdict
gate failed, 64 usage or other configuration error.

trace.csv carries the fixed header t,u0,u,zeta,w0,w1,wnorm,obs_err_norm,E,F,
one row per sample, decimal values with 17 significant digits, LF newlines;
that format round-trips float64 bit-exactly.  Config files are flat
``key = value`` lines whose keys equal the long flag names; explicit
flags override file values.  The environment variable HEATADAPT_OUT
supplies the default output directory.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    InsufficientDuration,
    UnresolvableMode,
    galerkin_error_system,
    limit_diagnostics,
    pe_check,
)
from .control import TruncationInsufficient
from .domain import (
    CflViolation,
    ConfigError,
    Grid,
    GridFunction,
    Params,
    ReferenceSignal,
    SimConfig,
    Trace,
    TRACE_COLUMNS,
    validate_config,
)
from .scenarios import (
    benchmark_initial_state,
    run_error_system,
    run_observer,
    run_open_loop,
    run_stabilization,
    run_tracking,
)

__all__ = ["RunManifest", "parse_args", "emit_trace", "read_trace_csv", "main", "UsageError"]

SCENARIOS = ("open-loop", "observer", "stabilize", "track", "error-system", "galerkin")

#: frozen per-scenario verdict tolerances, recorded in every manifest
ACCEPTANCE_TOLERANCES = {
    "stabilize": {
        "wnorm_final": 1e-2,
        "obs_err_norm_final": 1e-3,
        "zeta_settle_gap": 1e-4,
        "zeta_reciprocal_min_offset": 0.02,
    },
    "track": {
        "tracking_err_final": 0.03,
        "zeta_reciprocal_final": 0.005,
    },
}


class UsageError(Exception):
    """Bad command line or config file; maps to exit code 64."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we want 64
        raise UsageError(message)


@dataclass
class RunManifest:
    """Everything needed to reproduce and gate one run."""

    scenario: str
    params: dict
    config: dict
    reference: dict | None
    u0_signal: str | None
    init: str
    zeta0: float
    tool_version: str
    duration_s: float
    outputs: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(**d)

    def save(self, path: Path) -> None:
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: Path) -> "RunManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))


_SIM_FLAGS: dict[str, type] = {
    "scenario": str,
    "q": float,
    "b": float,
    "sign-b": int,
    "c0": float,
    "c1": float,
    "dx": float,
    "dt": float,
    "t-final": float,
    "ref": str,
    "zeta0": float,
    "init": str,
    "u0": str,
    "pe-tau": float,
    "pe-threshold": float,
    "modes": int,
    "servo-j": int,
    "sample-stride": int,
    "snapshot-stride": int,
    "out": str,
}

_SIM_DEFAULTS = {
    "scenario": "stabilize",
    "q": 2.0,
    "b": -10.0,
    "sign-b": None,
    "c0": 5.0,
    "c1": 5.0,
    "dx": 0.02,
    "dt": 1e-4,
    "t-final": 5.0,
    "ref": "zero",
    "zeta0": 0.0,
    "init": "paper",
    "u0": "zero",
    "pe-tau": None,
    "pe-threshold": 1e-3,
    "modes": 16,
    "servo-j": 12,
    "sample-stride": 100,
    "snapshot-stride": 0,
    "out": None,
}


def _add_sim_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--scenario", choices=SCENARIOS)
    sp.add_argument("--q", type=float, help="boundary convection gain (> 0)")
    sp.add_argument("--b", type=float, help="true control coefficient (nonzero)")
    sp.add_argument("--sign-b", type=int, choices=(-1, 1), dest="sign_b")
    sp.add_argument("--c0", type=float, help="controller gain (> 0)")
    sp.add_argument("--c1", type=float, help="observer injection gain (> 0)")
    sp.add_argument("--dx", type=float, help="grid spacing, must divide [0,1]")
    sp.add_argument("--dt", type=float, help="time step, needs dt <= dx^2/2")
    sp.add_argument("--t-final", type=float, dest="t_final")
    sp.add_argument("--ref", help="zero | const:R | sin:A,W")
    sp.add_argument("--zeta0", type=float, help="initial estimate (error scenarios: initial error)")
    sp.add_argument("--init", help="paper (q x - 1) | zero | file:PATH")
    sp.add_argument("--u0", help="zero | const:C | exp-decay (observer/error scenarios)")
    sp.add_argument("--pe-tau", type=float, dest="pe_tau")
    sp.add_argument("--pe-threshold", type=float, dest="pe_threshold")
    sp.add_argument("--modes", type=int, help="mode count for the galerkin scenario")
    sp.add_argument("--servo-j", type=int, dest="servo_j", help="servo series truncation")
    sp.add_argument("--sample-stride", type=int, dest="sample_stride")
    sp.add_argument("--snapshot-stride", type=int, dest="snapshot_stride")
    sp.add_argument("--out", help="output directory (default $HEATADAPT_OUT or ./runs)")
    sp.add_argument("--config", help="flat key = value file; flags override it")
    sp.add_argument(
        "--require-converged",
        action="store_true",
        dest="require_converged",
        help="exit 4 unless all tracked quantities converged",
    )


def _build_parser() -> _Parser:
    parser = _Parser(prog="heatadapt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"heatadapt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario and emit its trace")
    _add_sim_flags(sim)

    an = sub.add_parser("analyze", help="post-process an emitted trace.csv")
    an.add_argument("--trace", required=True, help="path to trace.csv")
    an.add_argument("--pe-tau", type=float, dest="pe_tau", default=1.0)
    an.add_argument("--pe-threshold", type=float, dest="pe_threshold", default=None)
    an.add_argument("--pe-windows", type=int, dest="pe_windows", default=5)
    an.add_argument("--settle-window", type=float, dest="settle_window", default=1.0)
    an.add_argument("--gap-tol", type=float, dest="gap_tol", default=1e-3)
    an.add_argument("--out", help="directory for analysis.json (default: stdout only)")
    an.add_argument("--require-converged", action="store_true", dest="require_converged")

    sw = sub.add_parser("sweep", help="run simulate over a list of parameter values")
    _add_sim_flags(sw)
    sw.add_argument("--param", required=True, choices=sorted(k for k, t in _SIM_FLAGS.items() if t is float))
    sw.add_argument("--values", required=True, help="comma-separated values of --param")
    sw.add_argument("--jobs", type=int, default=1, help="concurrent runs")
    return parser


def _read_config_file(path: str) -> dict:
    resolved = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _SIM_FLAGS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        caster = _SIM_FLAGS[key]
        try:
            resolved[key] = caster(value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return resolved


def _resolve_sim(args: argparse.Namespace) -> dict:
    """Layer defaults, config file and explicit flags into one dict."""
    resolved = dict(_SIM_DEFAULTS)
    if getattr(args, "config", None):
        resolved.update(_read_config_file(args.config))
    for key in _SIM_FLAGS:
        attr = key.replace("-", "_")
        val = getattr(args, attr, None)
        if val is not None:
            resolved[key] = val
    if resolved["out"] is None:
        resolved["out"] = os.environ.get("HEATADAPT_OUT", "runs")
    if resolved["pe-tau"] is None:
        resolved["pe-tau"] = min(1.0, resolved["t-final"])
    if resolved["scenario"] not in SCENARIOS:
        raise UsageError(f"unknown scenario {resolved['scenario']!r}")
    resolved["require-converged"] = bool(getattr(args, "require_converged", False))
    return resolved


def parse_args(argv: list[str]) -> tuple[str, dict]:
    """Parse argv into (command, fully resolved configuration dict)."""
    args = _build_parser().parse_args(argv)
    if args.command == "simulate":
        return "simulate", _resolve_sim(args)
    if args.command == "sweep":
        resolved = _resolve_sim(args)
        resolved["param"] = args.param
        try:
            resolved["values"] = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError as exc:
            raise UsageError(f"bad --values: {exc}") from exc
        if not resolved["values"]:
            raise UsageError("--values is empty")
        resolved["jobs"] = max(1, args.jobs)
        return "sweep", resolved
    return "analyze", vars(args)


def _parse_ref(spec: str) -> ReferenceSignal:
    if spec == "zero":
        return ReferenceSignal.zero()
    if spec.startswith("const:"):
        try:
            return ReferenceSignal.constant(float(spec[6:]))
        except ValueError as exc:
            raise UsageError(f"bad reference {spec!r}: {exc}") from exc
    if spec.startswith("sin:"):
        parts = spec[4:].split(",")
        if len(parts) != 2:
            raise UsageError(f"bad reference {spec!r}: expected sin:A,W")
        try:
            return ReferenceSignal.sinusoid(float(parts[0]), float(parts[1]))
        except ValueError as exc:
            raise UsageError(f"bad reference {spec!r}: {exc}") from exc
    raise UsageError(f"bad reference {spec!r}")


def _parse_u0(spec: str):
    if spec == "zero":
        return lambda t: 0.0
    if spec == "exp-decay":
        return lambda t: math.exp(-t)
    if spec.startswith("const:"):
        try:
            c = float(spec[6:])
        except ValueError as exc:
            raise UsageError(f"bad u0 {spec!r}: {exc}") from exc
        return lambda t: c
    raise UsageError(f"bad u0 {spec!r}")


def _parse_init(spec: str, grid: Grid, q: float) -> GridFunction:
    if spec == "paper":
        return benchmark_initial_state(grid, q)
    if spec == "zero":
        return GridFunction.zeros(grid)
    if spec.startswith("file:"):
        path = spec[5:]
        try:
            values = np.loadtxt(path, dtype=float).ravel()
        except OSError as exc:
            raise UsageError(f"cannot read init file {path!r}: {exc}") from exc
        if values.size != grid.n:
            raise UsageError(
                f"init file {path!r} has {values.size} values, grid needs {grid.n}"
            )
        return GridFunction(grid, values)
    raise UsageError(f"bad init {spec!r}")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def emit_trace(trace: Trace, manifest: RunManifest, out_dir) -> dict:
    """Write trace.csv, optional snapshots.csv and manifest.json; return paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / "trace.csv"
    lines = ["t," + ",".join(TRACE_COLUMNS)]
    for i in range(trace.times.size):
        row = [_fmt(trace.times[i])]
        row += [_fmt(trace.scalars[c][i]) for c in TRACE_COLUMNS]
        lines.append(",".join(row))
    trace_path.write_bytes(("\n".join(lines) + "\n").encode("ascii"))
    paths = {"trace_csv": str(trace_path)}

    if trace.snapshots:
        snap_path = out / "snapshots.csv"
        snap_lines = ["t,x,w,what"]
        for t, fields in trace.snapshots:
            w = fields["w"]
            what = fields.get("what")
            x = np.linspace(0.0, 1.0, w.size)
            for i in range(w.size):
                wh = _fmt(what[i]) if what is not None else ""
                snap_lines.append(f"{_fmt(t)},{_fmt(x[i])},{_fmt(w[i])},{wh}")
        snap_path.write_bytes(("\n".join(snap_lines) + "\n").encode("ascii"))
        paths["snapshots_csv"] = str(snap_path)

    manifest.outputs = dict(paths)
    manifest_path = out / "manifest.json"
    manifest.outputs["manifest_json"] = str(manifest_path)
    manifest.save(manifest_path)
    paths["manifest_json"] = str(manifest_path)
    return paths


def read_trace_csv(path) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Parse an emitted trace.csv back into (times, column arrays)."""
    text = Path(path).read_text()
    lines = [ln for ln in text.split("\n") if ln]
    header = lines[0].split(",")
    if header[0] != "t":
        raise ConfigError(f"{path}: unexpected header {lines[0]!r}")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    cols = {name: data[:, i] for i, name in enumerate(header)}
    return cols.pop("t"), cols


def _simulate(resolved: dict) -> int:
    q, b = resolved["q"], resolved["b"]
    params = Params(
        q=q, b=b, c0=resolved["c0"], c1=resolved["c1"],
        sign_b=resolved["sign-b"] if resolved["sign-b"] is not None else 0,
    )
    grid = Grid.from_dx(resolved["dx"])
    config = SimConfig(
        dt=resolved["dt"],
        t_final=resolved["t-final"],
        grid=grid,
        servo_truncation_J=resolved["servo-j"],
        pe_window_tau=resolved["pe-tau"],
        pe_threshold=resolved["pe-threshold"],
        sample_stride=resolved["sample-stride"],
        snapshot_stride=resolved["snapshot-stride"],
    )
    validate_config(params, config)

    scenario = resolved["scenario"]
    ref = _parse_ref(resolved["ref"])
    u0_signal = _parse_u0(resolved["u0"])
    w0 = _parse_init(resolved["init"], grid, q)
    zeta0 = resolved["zeta0"]
    zeros = GridFunction.zeros(grid)

    start = time.perf_counter()
    if scenario == "open-loop":
        trace = run_open_loop(params, config, w0)
    elif scenario == "observer":
        trace = run_observer(params, config, w0, zeros, zeta0, u0_signal)
    elif scenario == "stabilize":
        trace = run_stabilization(params, config, w0, zeros, zeta0)
    elif scenario == "track":
        trace = run_tracking(params, config, w0, zeros, zeta0, ref)
    elif scenario == "error-system":
        trace = run_error_system(params, config, w0, zeta0, u0_signal)
    else:  # galerkin
        trace = galerkin_error_system(
            N=resolved["modes"],
            p=params,
            u0_signal=u0_signal,
            wtilde0=w0,
            zetatilde0=zeta0,
            t_final=config.t_final,
            dt_ode=config.dt,
            sample_stride=config.sample_stride,
        )
    duration = time.perf_counter() - start

    verdicts: dict = {"blown_up": trace.blown_up, "blow_up_time": trace.blow_up_time}
    settle = min(1.0, config.t_final / 2.0)
    try:
        summary = limit_diagnostics(trace, settle_window=settle)
        verdicts["limits"] = summary.to_dict()
        all_converged = summary.all_converged
    except InsufficientDuration:
        verdicts["limits"] = None
        all_converged = not trace.blown_up
    try:
        pe = pe_check(
            trace.times, trace["u0"],
            tau=config.pe_window_tau, threshold=config.pe_threshold,
        )
        verdicts["pe_u0"] = pe.to_dict()
    except InsufficientDuration:
        verdicts["pe_u0"] = None
    if scenario == "track":
        verdicts["tracking_err_final"] = trace.terminal("tracking_err")
        try:
            pe_v = pe_check(
                trace.times, trace["vx1"],
                tau=config.pe_window_tau, threshold=config.pe_threshold,
            )
            verdicts["pe_vx1"] = pe_v.to_dict()
        except InsufficientDuration:
            verdicts["pe_vx1"] = None
        verdicts["reference_uniformly_bounded"] = ref.uniformly_bounded
    if scenario in ACCEPTANCE_TOLERANCES:
        verdicts["tolerances"] = ACCEPTANCE_TOLERANCES[scenario]

    manifest = RunManifest(
        scenario=scenario,
        params={"q": params.q, "b": params.b, "sign_b": params.sign_b,
                "c0": params.c0, "c1": params.c1},
        config={"dx": grid.dx, "n": grid.n, "dt": config.dt,
                "t_final": config.t_final,
                "servo_truncation_J": config.servo_truncation_J,
                "pe_window_tau": config.pe_window_tau,
                "pe_threshold": config.pe_threshold,
                "sample_stride": config.sample_stride,
                "snapshot_stride": config.snapshot_stride,
                "modes": resolved["modes"] if scenario == "galerkin" else None},
        reference=ref.describe() if scenario == "track" else None,
        u0_signal=resolved["u0"] if scenario in ("observer", "error-system", "galerkin") else None,
        init=resolved["init"],
        zeta0=zeta0,
        tool_version=__version__,
        duration_s=duration,
        verdicts=verdicts,
    )
    emit_trace(trace, manifest, resolved["out"])

    if trace.blown_up:
        return 3
    if resolved.get("require-converged") and not all_converged:
        return 4
    return 0


def _analyze(args: dict) -> int:
    times, cols = read_trace_csv(args["trace"])
    result: dict = {"trace": args["trace"], "samples": int(times.size),
                    "t_final": float(times[-1])}
    try:
        pe = pe_check(times, cols["u0"], tau=args["pe_tau"],
                      threshold=args["pe_threshold"], windows=args["pe_windows"])
        result["pe_u0"] = pe.to_dict()
    except InsufficientDuration as exc:
        result["pe_u0"] = {"error": str(exc)}
    trace = Trace(times=times, scalars={k: cols[k] for k in TRACE_COLUMNS})
    try:
        summary = limit_diagnostics(
            trace, settle_window=args["settle_window"], gap_tol=args["gap_tol"]
        )
        result["limits"] = summary.to_dict()
        all_converged = summary.all_converged
    except InsufficientDuration as exc:
        result["limits"] = {"error": str(exc)}
        all_converged = False
    result["terminal"] = {k: float(cols[k][-1]) for k in TRACE_COLUMNS}

    text = json.dumps(result, indent=2)
    if args.get("out"):
        out = Path(args["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "analysis.json").write_text(text + "\n")
    print(text)
    if args.get("require_converged") and not all_converged:
        return 4
    return 0


def _sweep(resolved: dict) -> int:
    param, values, jobs = resolved["param"], resolved["values"], resolved["jobs"]
    base_out = Path(resolved["out"])
    runs = []
    for v in values:
        sub = dict(resolved)
        sub[param] = v
        sub["out"] = str(base_out / f"{param}={v:g}")
        runs.append(sub)

    def one(sub: dict) -> tuple[str, int]:
        try:
            return sub["out"], _simulate(sub)
        except CflViolation:
            return sub["out"], 2
        except (ConfigError, UsageError, UnresolvableMode, TruncationInsufficient):
            return sub["out"], 64

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, runs))
    else:
        results = [one(sub) for sub in runs]
    base_out.mkdir(parents=True, exist_ok=True)
    index = {
        "param": param,
        "runs": [{"out": out, "value": v, "exit_code": code}
                 for (out, code), v in zip(results, values)],
    }
    (base_out / "sweep.json").write_text(json.dumps(index, indent=2) + "\n")
    return max((code for _, code in results), default=0)


def main(argv: list[str] | None = None) -> int:
    import sys

    try:
        command, resolved = parse_args(argv if argv is not None else sys.argv[1:])
        if command == "simulate":
            return _simulate(resolved)
        if command == "sweep":
            return _sweep(resolved)
        return _analyze(resolved)
    except UsageError as exc:
        print(f"heatadapt: {exc}", file=sys.stderr)
        return 64
    except CflViolation as exc:
        print(f"heatadapt: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, UnresolvableMode, TruncationInsufficient) as exc:
        print(f"heatadapt: {exc}", file=sys.stderr)
        return 64


if __name__ == "__main__":
    raise SystemExit(main())
