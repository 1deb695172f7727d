"""Command-line front end: ``bianchi {simulate,certify,picard,riccati,sweep}``.

Run configurations are flat ``key = value`` files with ``#`` comments::

    a0 = 1
    a_dot0 = 0.5
    b0 = 1
    b_dot0 = 1
    phi0 = 0
    phi_dot0 = 0.3
    rho0 = solve          # close the Hamiltonian constraint
    lambda = 1
    method = adaptive
    t_end = 20

Exit codes: 0 ok/pass, 1 certificate fail, 2 usage/config error,
3 numerical failure. ``BIANCHI_LOG`` selects quiet, info or debug logging.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bounds, conserved, constraint, picard, reconstruct
from .core_types import (
    FIELDS, BianchiError, InitialData, RegimeViolation, Tolerances, Trajectory,
)
from .evolution import Method, SolverConfig, diagnostics, integrate

log = logging.getLogger("bianchi")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

TRAJECTORY_COLUMNS = ("t", "u", "v", "rho", "psi", "phi", "a", "b", "H",
                      "constraint_residual", "radiation_invariant", "scalar_invariant")
OPTIONAL_DIAGNOSTICS = ("W", "constraint_relative", "momentum_invariant")
SWEEP_KEYS = ("lambda", "rho0", "psi0", "v0")


class ConfigError(BianchiError):
    pass


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


_DATA_KEYS = ("a0", "a_dot0", "b0", "b_dot0", "phi0", "phi_dot0", "rho0", "lambda")
_SOLVER_KEYS = {
    "method": str, "initial_step": float, "min_step": float, "max_step": float,
    "t_end": float, "max_samples": int, "blowup_ceiling": float, "max_steps": int,
}
_TOL_KEYS = ("abs_tol", "rel_tol", "constraint_warn", "constraint_fail")
_OUTPUT_KEYS = ("csv", "report", "manifest", "physical_csv", "diagnostics")
_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _float(raw: dict, key: str, default=None) -> float:
    if key not in raw:
        if default is None:
            raise ConfigError(f"missing key {key!r}")
        return default
    try:
        return float(raw[key])
    except ValueError:
        raise ConfigError(f"{key}: not a number: {raw[key]!r}") from None


@dataclass
class RunConfig:
    data: InitialData
    solver: SolverConfig
    csv: str = "trajectory.csv"
    report: str = "report.txt"
    manifest: str = "manifest.json"
    physical_csv: str = "physical.csv"
    diagnostics: tuple[str, ...] = ()
    rho0_solved: bool = False
    sweep: dict[str, list[float]] = field(default_factory=dict)
    raw: dict[str, str] = field(default_factory=dict)

    @property
    def tolerances(self) -> Tolerances:
        return self.solver.tolerances


def _parse_range(key: str, text: str) -> list[float]:
    text = text.strip()
    if not text:
        raise ConfigError(f"{key}: empty range")
    try:
        if ":" in text:
            start, stop, num = text.split(":")
            n = int(num)
            if n < 1:
                raise ConfigError(f"{key}: empty range")
            return [float(x) for x in np.linspace(float(start), float(stop), n)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{key}: cannot parse range {text!r}") from None


def build_run_config(raw: dict[str, str]) -> RunConfig:
    known = set(_DATA_KEYS) | set(_SOLVER_KEYS) | set(_TOL_KEYS) | set(_OUTPUT_KEYS) | {"project_rho"}
    known |= {f"sweep.{k}" for k in SWEEP_KEYS}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")

    a0, a_dot0 = _float(raw, "a0"), _float(raw, "a_dot0")
    b0, b_dot0 = _float(raw, "b0"), _float(raw, "b_dot0")
    phi0, phi_dot0 = _float(raw, "phi0", 0.0), _float(raw, "phi_dot0")
    lam = _float(raw, "lambda", 0.0)
    solved = raw.get("rho0", "").strip().lower() == "solve"
    try:
        if solved:
            if a0 <= 0 or b0 <= 0:
                raise ConfigError("scale factors must be positive")
            rho0 = constraint.solve_initial_density(a_dot0 / a0, b_dot0 / b0, 0.5 * phi_dot0 ** 2, lam)
        else:
            rho0 = _float(raw, "rho0")
        data = InitialData(a0, a_dot0, b0, b_dot0, phi0, phi_dot0, rho0, lam)

        defaults = Tolerances()
        tol = Tolerances(*(_float(raw, k, getattr(defaults, k)) for k in _TOL_KEYS))
        kwargs = {}
        for key, kind in _SOLVER_KEYS.items():
            if key in raw:
                try:
                    kwargs[key] = kind(float(raw[key])) if kind is int else kind(raw[key])
                except ValueError:
                    raise ConfigError(f"{key}: bad value {raw[key]!r}") from None
        if "method" in kwargs and kwargs["method"] not in {m.value for m in Method}:
            raise ConfigError(f"method must be one of {[m.value for m in Method]}")
        project = raw.get("project_rho", "false").strip().lower()
        if project not in _BOOL:
            raise ConfigError(f"project_rho: expected true/false, got {raw['project_rho']!r}")
        solver = SolverConfig(tolerances=tol, project_rho=_BOOL[project], **kwargs)
    except ConfigError:
        raise
    except BianchiError as exc:
        raise ConfigError(str(exc)) from exc

    diag = tuple(s.strip() for s in raw.get("diagnostics", "").split(",") if s.strip())
    bad = [d for d in diag if d not in OPTIONAL_DIAGNOSTICS]
    if bad:
        raise ConfigError(f"unknown diagnostics {bad}; choose from {OPTIONAL_DIAGNOSTICS}")
    sweep = {k: _parse_range(f"sweep.{k}", raw[f"sweep.{k}"]) for k in SWEEP_KEYS if f"sweep.{k}" in raw}
    outputs = {k: raw[k] for k in ("csv", "report", "manifest", "physical_csv") if k in raw}
    return RunConfig(data, solver, diagnostics=diag, rho0_solved=solved, sweep=sweep, raw=dict(raw),
                     **outputs)


def load_config(path: str | os.PathLike) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return build_run_config(parse_config_text(text))


# --- CSV ------------------------------------------------------------------

def write_trajectory_csv(path: Path, traj: Trajectory, extra: tuple[str, ...] = ()) -> None:
    cols = TRAJECTORY_COLUMNS + tuple(extra)
    data = {"t": traj.times}
    data.update({name: traj.column(name) for name in FIELDS})
    data.update(traj.diagnostics)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i in range(len(traj)):
            w.writerow([fmt(data[c][i]) for c in cols])


def read_trajectory_csv(path: str | os.PathLike) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError(f"{path}: no samples")
    missing = [c for c in ("t",) + FIELDS if c not in rows[0]]
    if missing:
        raise ConfigError(f"{path}: missing columns {missing}")
    try:
        times = np.array([float(r["t"]) for r in rows])
        states = np.array([[float(r[c]) for c in FIELDS] for r in rows])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        return Trajectory(times, states, meta={"solver": "replay", "source": str(path)})
    except BianchiError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def write_physical_csv(path: Path, phys: reconstruct.PhysicalTrajectory) -> None:
    cols = ("t", "a", "b", "phi", "phi_dot", "rho") + reconstruct.RESIDUALS + ("endpoint_stencil",)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i in range(len(phys)):
            row = [phys.times[i], phys.a[i], phys.b[i], phys.phi[i], phys.phi_dot[i], phys.rho[i]]
            row += [phys.residuals[k][i] for k in reconstruct.RESIDUALS]
            w.writerow([fmt(x) for x in row] + [int(phys.endpoint[i])])


# --- commands ---------------------------------------------------------------

def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _max_abs(x: np.ndarray) -> float:
    x = x[np.isfinite(x)]
    return float(np.max(np.abs(x))) if len(x) else math.nan


def _simulate(cfg: RunConfig, out: Path) -> Trajectory:
    traj = integrate(cfg.data, cfg.solver)
    write_trajectory_csv(out / cfg.csv, traj, cfg.diagnostics)
    drifts = conserved.drift(traj)
    initial = constraint.classify(cfg.data, cfg.tolerances)
    rel = np.abs(traj.diagnostics["constraint_relative"])

    report = [
        "Bianchi I Einstein-scalar field run",
        f"  initial data: a0={fmt(cfg.data.a0)} a_dot0={fmt(cfg.data.a_dot0)} b0={fmt(cfg.data.b0)} "
        f"b_dot0={fmt(cfg.data.b_dot0)} phi0={fmt(cfg.data.phi0)} phi_dot0={fmt(cfg.data.phi_dot0)} "
        f"rho0={fmt(cfg.data.rho0)}{' (solved)' if cfg.rho0_solved else ''} lambda={fmt(cfg.data.lam)}",
        f"  initial constraint: {initial.status.value} (relative residual {initial.relative_residual:.3e})",
        f"  solver: {traj.meta['solver']}, steps {traj.meta['n_steps']}, rejected {traj.meta['n_rejected']}",
        f"  termination: {traj.termination} at t = {fmt(traj.times[-1])}",
        f"  max relative constraint residual: {rel.max():.3e}",
        f"  invariant drift: radiation {drifts[0]:.3e}, scalar {drifts[1]:.3e}, momentum {drifts[2]:.3e}",
    ]
    if cfg.physical_csv and len(traj) >= 5:
        phys = reconstruct.reconstruct(traj, cfg.data, cfg.tolerances)
        write_physical_csv(out / cfg.physical_csv, phys)
        report.append(f"  final metric: {reconstruct.line_element(phys.sample(len(phys) - 1))}")
        for k in reconstruct.RESIDUALS:
            report.append(f"  max |{k} residual| = {_max_abs(phys.residuals[k]):.3e}")
    (out / cfg.report).write_text("\n".join(report) + "\n")

    manifest = {
        "config": cfg.raw,
        "resolved_initial_data": {k: getattr(cfg.data, k) for k in
                                  ("a0", "a_dot0", "b0", "b_dot0", "phi0", "phi_dot0", "rho0", "lam")},
        "solver": traj.meta["config"],
        "statistics": {k: traj.meta[k] for k in ("n_steps", "n_rejected", "n_rhs")},
        "termination": traj.termination,
        "final_time": float(traj.times[-1]),
        "max_relative_constraint_residual": float(rel.max()),
        "invariant_drift": dict(zip(conserved.INVARIANTS, drifts)),
    }
    (out / cfg.manifest).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    log.info("wrote %s (%d samples)", out / cfg.csv, len(traj))
    return traj


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    traj = _simulate(cfg, _out_dir(args))
    return EXIT_OK if traj.completed else EXIT_NUMERIC


def _write_certificate(out: Path, cert: bounds.Certificate, stem: str = "certificate") -> None:
    (out / f"{stem}.txt").write_text(cert.to_text())
    (out / f"{stem}.kv").write_text(cert.to_keyvalue())


def _certify_one(data: InitialData, solver: SolverConfig):
    """Integrate and certify one data set; returns (status, certificate or None)."""
    try:
        traj = integrate(data, solver)
    except BianchiError as exc:
        return f"error: {exc}", None
    if not traj.completed:
        return traj.termination, None
    cert = bounds.certify(traj, data, solver.tolerances)
    return ("pass" if cert.passed else "fail"), cert


def _self_test(args, out: Path) -> int:
    solver = load_config(args.config).solver if args.config else SolverConfig(t_end=20.0, max_samples=401)
    rng = np.random.default_rng(args.seed)
    ensemble = constraint.regime_ensemble(args.self_test, rng)
    rows = _run_points([(i, d) for i, d in enumerate(ensemble)], solver, args.jobs)
    _write_summary(out / "self_test.csv", rows)
    statuses = [r["status"] for r in rows]
    log.info("self-test: %d/%d pass", statuses.count("pass"), len(statuses))
    if any(s not in ("pass", "fail") for s in statuses):
        return EXIT_NUMERIC
    return EXIT_OK if all(s == "pass" for s in statuses) else EXIT_FAIL


def cmd_certify(args) -> int:
    out = _out_dir(args)
    if args.self_test:
        return _self_test(args, out)
    if not args.config:
        raise ConfigError("certify needs --config (or --self-test N)")
    cfg = load_config(args.config)
    try:
        if args.replay:
            traj = read_trajectory_csv(args.replay)
            traj.diagnostics = diagnostics(traj, cfg.data)
        else:
            traj = _simulate(cfg, out)
            if not traj.completed:
                return EXIT_NUMERIC
        cert = bounds.certify(traj, cfg.data, cfg.tolerances)
    except RegimeViolation as exc:
        raise ConfigError(str(exc)) from exc
    _write_certificate(out, cert)
    print(cert.to_text(), end="")
    return EXIT_OK if cert.passed else EXIT_FAIL


def cmd_picard(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args)
    try:
        T = args.horizon if args.horizon is not None else picard.pick_horizon(cfg.data)
        grid, report = picard.run_scheme(cfg.data, T, n_max=args.n_max, grid_points=args.grid,
                                         abs_tol=cfg.tolerances.abs_tol, check_refinement=args.refine)
    except picard.DivergenceError as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    with open(out / "picard_beta.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("n", "beta_n", "bound_n"))
        for n, b, bd in zip(report.orders, report.betas, report.bounds):
            w.writerow((n, fmt(b), fmt(bd)))
    lines = [
        f"horizon = {fmt(T)}",
        f"grid_points = {args.grid}",
        f"iterations = {len(grid.values) - 1}",
        f"converged = {str(report.converged).lower()}",
        f"fitted_C2 = {fmt(report.fitted_C2)}",
        f"factorial_bound_ok = {str(report.factorial_bound_ok).lower()}",
    ]
    if report.refinement_ok is not None:
        lines.append(f"refinement_ok = {str(report.refinement_ok).lower()}")
        if not report.refinement_ok:
            log.warning("beta values moved by more than 1%% under grid doubling")
    if cfg.data.phi_dot0 > 0:
        lines.append(f"psi_lower_bound_ok = {str(picard.psi_lower_bound_check(grid, cfg.data)).lower()}")
    (out / "picard_summary.txt").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_riccati(args) -> int:
    out = _out_dir(args)
    if args.samples < 2 or not args.t_end > args.t0:
        raise ConfigError("need samples >= 2 and t_end > t0")
    p = bounds.RiccatiParams(args.K, args.alpha, args.y0, args.t0)
    times = np.linspace(args.t0, args.t_end, args.samples)
    try:
        closed = bounds.riccati_closed_form(p, times)
        numeric = bounds.riccati_numerical(p, times)
    except bounds.PoleError as exc:
        log.error("pole: %s", exc)
        (out / "riccati_summary.txt").write_text(f"pole = {fmt(p.pole_time)}\n")
        return EXIT_NUMERIC
    dev = np.abs(closed - numeric)
    with open(out / "riccati.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "closed_form", "numerical", "abs_deviation"))
        for row in zip(times, closed, numeric, dev):
            w.writerow([fmt(x) for x in row])
    rel = dev / np.maximum(np.abs(closed), np.finfo(float).tiny)
    summary = f"max_abs_deviation = {fmt(dev.max())}\nmax_rel_deviation = {fmt(rel.max())}\n"
    (out / "riccati_summary.txt").write_text(summary)
    print(summary, end="")
    return EXIT_OK


def _point_data(template: InitialData, lam: float, rho0: float, psi0: float, v0: float) -> InitialData:
    if v0 <= 0:
        raise RegimeViolation(f"v0 = {v0} is not positive")
    u0 = constraint.solve_initial_u(v0, rho0, psi0, lam)
    return InitialData(template.a0, u0 * template.a0, template.b0, v0 * template.b0,
                       template.phi0, math.sqrt(2.0 * psi0), rho0, lam)


def _point_worker(item):
    index, data, solver = item
    status, cert = _certify_one(data, solver)
    row = {"index": index, "status": status}
    if cert is not None:
        row.update({f"{c.name}_margin": c.margin for c in cert.conditions})
        row["min_margin"] = min(c.margin for c in cert.conditions)
    return row


def _run_points(points, solver: SolverConfig, jobs: int) -> list[dict]:
    """``points`` holds ``(index, data)``; data may be an exception marking a skipped point."""
    work = [(i, d, solver) for i, d in points if isinstance(d, InitialData)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(_point_worker, work))
    else:
        done = [_point_worker(w) for w in work]
    by_index = {r["index"]: r for r in done}
    rows = []
    for i, d in points:
        if i in by_index:
            row = by_index[i]
        else:
            status = "regime violation" if isinstance(d, RegimeViolation) else f"invalid: {d}"
            row = {"index": i, "status": status}
        if isinstance(d, InitialData):
            row.update({"lambda": d.lam, "rho0": d.rho0, "psi0": 0.5 * d.phi_dot0 ** 2,
                        "v0": d.b_dot0 / d.b0, "u0": d.a_dot0 / d.a0})
        rows.append(row)
    return sorted(rows, key=lambda r: r["index"])


def _write_summary(path: Path, rows: list[dict]) -> None:
    margin_cols = sorted({k for r in rows for k in r if k.endswith("_margin")})
    cols = ["index", "lambda", "rho0", "psi0", "v0", "u0", "status"] + margin_cols
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([fmt(r[c]) if isinstance(r.get(c), float) else r.get(c, "") for c in cols])


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if not cfg.sweep:
        raise ConfigError("sweep needs at least one of " + ", ".join(f"sweep.{k}" for k in SWEEP_KEYS))
    out = _out_dir(args)
    t = cfg.data
    base = {"lambda": [t.lam], "rho0": [t.rho0], "psi0": [0.5 * t.phi_dot0 ** 2], "v0": [t.b_dot0 / t.b0]}
    base.update(cfg.sweep)
    points = []
    for i, (lam, rho0, psi0, v0) in enumerate(itertools.product(*(base[k] for k in SWEEP_KEYS))):
        try:
            points.append((i, _point_data(t, lam, rho0, psi0, v0)))
        except BianchiError as exc:
            log.info("point %d skipped: %s", i, exc)
            points.append((i, exc))
    rows = _run_points(points, cfg.solver, args.jobs)
    coords = list(itertools.product(*(base[k] for k in SWEEP_KEYS)))
    for row in rows:
        row.update(zip(SWEEP_KEYS, coords[row["index"]]))
    _write_summary(out / "sweep.csv", rows)
    statuses = [r["status"] for r in rows]
    log.info("sweep: %d points, %d pass", len(rows), statuses.count("pass"))
    skipped = ("regime violation", "invalid")
    if any(s not in ("pass", "fail") and not s.startswith(skipped) for s in statuses):
        return EXIT_NUMERIC
    return EXIT_FAIL if "fail" in statuses else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value run configuration")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers for sweeps")
    common.add_argument("--seed", type=int, default=0, help="seed for random regime sampling")

    parser = argparse.ArgumentParser(prog="bianchi", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="integrate and write trajectory CSV")
    p.set_defaults(func=cmd_simulate, needs_config=True)

    p = sub.add_parser("certify", parents=[common], help="simulate and certify the global bounds")
    p.add_argument("--replay", help="certify a trajectory CSV instead of simulating")
    p.add_argument("--self-test", type=int, default=0, metavar="N",
                   help="certify N random data sets drawn from the global regime")
    p.set_defaults(func=cmd_certify, needs_config=False)

    p = sub.add_parser("picard", parents=[common], help="run successive approximations")
    p.add_argument("--horizon", type=float, help="interval length (default: automatic)")
    p.add_argument("--grid", type=int, default=512, help="grid points")
    p.add_argument("--n-max", type=int, default=60, help="maximum number of iterations")
    p.add_argument("--refine", action="store_true", help="repeat on a doubled grid and compare betas")
    p.set_defaults(func=cmd_picard, needs_config=True)

    p = sub.add_parser("riccati", parents=[common], help="tabulate the Riccati closed form")
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--y0", type=float, required=True)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--samples", type=int, default=1001)
    p.set_defaults(func=cmd_riccati, needs_config=False)

    p = sub.add_parser("sweep", parents=[common], help="certify over a parameter grid")
    p.set_defaults(func=cmd_sweep, needs_config=True)
    return parser


def _setup_logging() -> None:
    level = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    name = os.environ.get("BIANCHI_LOG", "info").strip().lower()
    logging.basicConfig(level=level.get(name, logging.INFO), format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.needs_config and not args.config:
        parser.error(f"{args.command} needs --config")
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except BianchiError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
