"""``tq`` command line.

    tq <command> --config FILE [--out DIR] [--seed N] [--format csv|json] [--timing]

Without ``--out`` the main artifact goes to stdout (for ``check`` that is the
report).  With ``--out`` artifacts and ``report.json`` are written to DIR and
the report is printed.  Exit codes: 0 all checks pass, 2 bad input, 3 numeric
guard, 4 failed check.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import time
from pathlib import Path

import numpy as np

from . import jsonfmt
from .checks import run_suites
from .classical import (
    ActionAngleChart,
    ClassicalState,
    ExtendedState,
    SystemDef,
    extended_energy_drift,
    extended_flow,
    first_integral_drift,
    frequency_correspondence,
    hamilton_flow,
)
from .config import COMMANDS, JobConfig, load_config
from .errors import CheckFailure, ParseError, PathDomainError, TQError, ValidationError
from .fourier import FourierPolynomial, TruncationWindow, WaveFunction
from .holonomy import (
    ParameterPath,
    PerturbationSpec,
    commutes_with_hamiltonian,
    holonomy_operator,
    holonomy_report,
)
from .spectra import HamiltonianSpec, evolve, quantize_hamiltonian, spectrum, spectrum_csv, spectrum_json
from .operators import Representation


def _check(name, value, tol):
    value = float(value)
    return {"name": name, "passed": bool(value <= tol), "value": value, "tolerance": tol}


def _setup(cfg: JobConfig):
    rep = Representation(cfg.lambda_, cfg.shifts)
    return rep, TruncationWindow(cfg.m, cfg.n_max)


def _spectrum(cfg, fmt, base):
    rep, w = _setup(cfg)
    H = HamiltonianSpec.from_expr(cfg.H, cfg.m)
    entries = spectrum(H, rep, w)
    diag = np.diag(quantize_hamiltonian(H, rep, w).matrix).real
    mismatch = np.max(np.abs(np.sort(diag) - np.array([e.energy for e in entries])))
    text = spectrum_csv(entries) if fmt == "csv" else spectrum_json(entries)
    return {"spectrum." + fmt: text}, [_check("spectrum.operator_consistency", mismatch, 0.0)], {
        "levels": len(entries)}, 0.0


def _evolve(cfg, fmt, base):
    rep, w = _setup(cfg)
    H = HamiltonianSpec.from_expr(cfg.H, cfg.m)
    psi0 = WaveFunction(FourierPolynomial(cfg.m, {tuple(t.n): complex(t.re, t.im) for t in cfg.psi0}),
                        rep.half_shift)
    outside = [n for n, _ in psi0.poly.items() if not w.contains(n)]
    if outside:
        raise ValidationError([f"psi0: index {list(outside[0])} lies outside the window n_max = {cfg.n_max}"])
    states = [(t, evolve(psi0, H, rep, t)) for t in cfg.times]
    unit = max((abs(s.norm() - psi0.norm()) for _, s in states), default=0.0)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"n_{k + 1}" for k in range(cfg.m)] + ["re", "im"])
        for t, s in states:
            for n, c in s.poly.items():
                writer.writerow([jsonfmt.format_float(t), *n, jsonfmt.format_float(c.real),
                                 jsonfmt.format_float(c.imag)])
        text = buf.getvalue()
    else:
        text = jsonfmt.dumps({"states": [{"t": t, "psi": s.to_dict()} for t, s in states]})
    return {"evolve." + fmt: text}, [_check("evolve.norm_preserved", unit, 1e-12)], {
        "norm": psi0.norm()}, 0.0


def _path(cfg, base) -> ParameterPath:
    try:
        if cfg.path.csv is not None:
            p = Path(cfg.path.csv)
            p = p if p.is_absolute() else base / p
            try:
                text = p.read_text()
            except OSError as exc:
                raise ParseError(f"cannot read path file {p}: {exc}") from exc
            return ParameterPath.from_csv(text)
        return ParameterPath(cfg.path.t, cfg.path.s)
    except PathDomainError as exc:
        raise ValidationError([f"path: {exc}"]) from exc


def _perturbation(cfg) -> PerturbationSpec:
    pc = cfg.perturbation
    entries = {}
    for e in pc.Lambda:
        key = (e.axis - 1, e.param - 1)
        if key in entries:
            raise ValidationError([f"perturbation.Lambda: duplicate entry for axis {e.axis}, param {e.param}"])
        entries[key] = e.expr
    return PerturbationSpec(cfg.m, [a - 1 for a in pc.controlled_axes], pc.num_params, entries)


def _holonomy(cfg, fmt, base):
    rep, w = _setup(cfg)
    spec = _perturbation(cfg)
    path = _path(cfg, base)
    checks = []
    if cfg.H is not None:
        H = HamiltonianSpec.from_expr(cfg.H, cfg.m)
        checks.append(_check("holonomy.commutes_with_H", commutes_with_hamiltonian(spec, H, rep, w, path), 1e-10))
    U = holonomy_operator(spec, rep, w, path, cfg.steps)
    report = holonomy_report(U)
    checks.append(_check("holonomy.unitarity", report["unitarity_error"], 1e-8))
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["row", "col", "re", "im"])
        for (i, j), z in np.ndenumerate(U.matrix):
            writer.writerow([i, j, jsonfmt.format_float(z.real), jsonfmt.format_float(z.imag)])
        text = buf.getvalue()
    else:
        text = jsonfmt.dumps(report)
    metrics = {"loop": path.is_loop(), "unitarity_error": report["unitarity_error"]}
    if "phases" in report:
        metrics["phases"] = report["phases"]
    return {"holonomy." + fmt: text}, checks, metrics, U.leakage


def _classical(cfg, fmt, base):
    c = cfg.classical
    sysdef = SystemDef(c.H, len(c.q0), first_integrals=c.first_integrals)
    duration = c.t_end - c.t0
    if c.extended:
        traj = extended_flow(sysdef, ExtendedState(c.t0, tuple(c.q0), tuple(c.p0), c.p00), c.t_end, c.dt)
        metrics = {"extended_energy_drift": extended_energy_drift(sysdef, traj)}
    else:
        traj = hamilton_flow(sysdef, ClassicalState(c.t0, tuple(c.q0), tuple(c.p0)), c.t_end, c.dt)
        metrics = {}
    metrics["first_integral_drift"] = first_integral_drift(sysdef, traj)
    metrics["steps"] = len(traj.t) - 1
    metrics["duration"] = duration
    finite = bool(np.all(np.isfinite(traj.q)) and np.all(np.isfinite(traj.p)))
    checks = [{"name": "classical.finite_trajectory", "passed": finite, "value": 1.0 if finite else 0.0,
               "tolerance": 1.0}]
    text = traj.to_csv() if fmt == "csv" else jsonfmt.dumps(traj.to_dict())
    return {"trajectory." + fmt: text}, checks, metrics, 0.0


def _action(cfg, fmt, base):
    a = cfg.action
    sysdef = SystemDef(a.H, 1)
    chart = ActionAngleChart(sysdef, a.t0, a.q_center)
    rows = [{"energy": E, "action": chart.action(E), "period": chart.period(E)} for E in a.energies]
    checks, metrics = [], {}
    if a.correspondence:
        m = cfg.m or 1
        rep = Representation(cfg.lambda_ if cfg.m else (0.0,), cfg.shifts if cfg.m else (False,))
        w = TruncationWindow(m, cfg.n_max if cfg.n_max is not None else 8)
        corr = frequency_correspondence(sysdef, rep, w, a.energies, a.max_degree, a.t0, a.q_center)
        checks.append(_check("action.frequency_vs_spacing", corr["max_discrepancy"], 1e-9))
        metrics["correspondence"] = corr
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["E", "I", "T"])
        for r in rows:
            writer.writerow([jsonfmt.format_float(r[k]) for k in ("energy", "action", "period")])
        text = buf.getvalue()
    else:
        text = jsonfmt.dumps({"levels": rows})
    return {"action." + fmt: text}, checks, metrics, 0.0


HANDLERS = {
    "spectrum": _spectrum,
    "evolve": _evolve,
    "holonomy": _holonomy,
    "classical-flow": _classical,
    "action": _action,
}


def run(cfg: JobConfig, command=None, seed=None, fmt=None, base=Path("."), timing=False):
    """Execute a job.  Returns (report dict, {filename: text})."""
    command = command or cfg.command
    if command is None:
        raise ValidationError(["command: not given on the command line or in the config"])
    if cfg.command is not None and cfg.command != command:
        raise ValidationError([f"command: config is for {cfg.command!r}, invoked as {command!r}"])
    if command != cfg.command:
        cfg = JobConfig.model_validate({**cfg.model_dump(by_alias=True, exclude_none=True), "command": command})
    seed = cfg.seed if seed is None else seed
    fmt = fmt or cfg.format
    start = time.perf_counter()
    report = {"command": command, "seed": seed, "format": fmt,
              "config": {**cfg.model_dump(by_alias=True, exclude_none=True), "seed": seed, "format": fmt}}
    if command == "check":
        suites = run_suites(seed, cfg.suites, timing=timing)
        checks = [c for s in suites for c in s["checks"]]
        report["suites"] = [{"suite": s["suite"], "passed": s["passed"]} for s in suites]
        artifacts, metrics, leak = {}, {}, 0.0
    else:
        artifacts, checks, metrics, leak = HANDLERS[command](cfg, fmt, base)
    report["leakage"] = {"total": float(leak)}
    report["metrics"] = metrics
    report["checks"] = checks
    report["passed"] = all(c["passed"] for c in checks)
    if timing:
        report["wall_time_s"] = time.perf_counter() - start
    return report, artifacts


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tq", description="Quantization on action-angle tori.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path)
    ap.add_argument("--out", type=Path)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--format", choices=("csv", "json"))
    ap.add_argument("--timing", action="store_true", help="include wall-clock fields in the report")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg = load_config(args.config)
            base = args.config.resolve().parent
        elif args.command == "check":
            cfg, base = JobConfig(command="check"), Path(".")
        else:
            raise ValidationError([f"--config is required for {args.command}"])
        report, artifacts = run(cfg, args.command, args.seed, args.format, base, args.timing)
    except TQError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code
    text = jsonfmt.dumps(report) + "\n"
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        for name, body in artifacts.items():
            (args.out / name).write_text(body)
        (args.out / "report.json").write_text(text)
        sys.stdout.write(text)
    elif artifacts:
        for body in artifacts.values():
            sys.stdout.write(body if body.endswith("\n") else body + "\n")
    else:
        sys.stdout.write(text)
    for c in report["checks"]:
        if not c["passed"]:
            print(f"FAILED {c['name']}: {c['value']!r} > {c['tolerance']!r}", file=sys.stderr)
    return 0 if report["passed"] else CheckFailure.exit_code


if __name__ == "__main__":
    sys.exit(main())
