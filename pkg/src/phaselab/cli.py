"""Command-line front end: builds solutions, runs verifications, sweeps
parameters, and emits machine-readable reports and plot data.

Commands: construct, verify, energy, feasibility, mixing, machian-sweep,
evolve, perturb. One JSON config file per run (keys hbar, c_abs,
particles[{mass, velocity, omega}], variant); flags override config
fields. Reports are JSON, field and sweep data CSV; no binary formats.
Every pass/fail line carries the measured number and the threshold; the
exit code is 0 iff all checks pass (2 for config errors). Identical
config + seed produce byte-identical reports except for the timings
field, which is kept separate for that reason. The CLI computes nothing
itself: every number in a report traces to a module operation.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import sys
import time
from pathlib import Path

from phaselab import ansatz, dynamics, feasibility, fieldlab
from phaselab.model import (
    BlowupDetected,
    ConfigError,
    PhaselabError,
    UniverseConfig,
    validate,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2


def _config_hash(cfg: UniverseConfig) -> str:
    canon = json.dumps(cfg.to_dict(), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def _check(name: str, measured, threshold, passed: bool) -> dict:
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: measured={measured!r} "
          f"threshold={threshold!r}")
    return {"name": name, "measured": measured, "threshold": threshold,
            "passed": bool(passed)}


def _report(args, cfg: UniverseConfig, checks: list[dict],
            outputs: list[str], timings: dict, extra: dict | None = None) -> dict:
    rep = {
        "command": list(args.argv),
        "config_hash": _config_hash(cfg),
        "seed": getattr(args, "seed", 0),
        "checks": checks,
        "outputs": sorted(outputs),
        "timings": timings,
    }
    if extra:
        rep.update(extra)
    return rep


def _write_report(report: dict, out_dir: Path) -> Path:
    path = out_dir / "report.json"
    path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    return path


def _load_config(args) -> UniverseConfig:
    cfg = UniverseConfig.load(args.config)
    if getattr(args, "hbar", None) is not None:
        cfg = UniverseConfig(c_abs=cfg.c_abs, particles=cfg.particles,
                             hbar=args.hbar, variant=cfg.variant)
    if getattr(args, "cabs", None) is not None:
        cfg = UniverseConfig(c_abs=args.cabs, particles=cfg.particles,
                             hbar=cfg.hbar, variant=cfg.variant)
    if getattr(args, "variant", None):
        variant = {"cross": "cross-coupled", "weak": "weakly-separable"}[args.variant]
        cfg = UniverseConfig(c_abs=cfg.c_abs, particles=cfg.particles,
                             hbar=cfg.hbar, variant=variant)
    return cfg


def _build_solution(uni):
    """Dispatch construction on the roster: all free (single or many),
    pure oscillators, or a mixed roster through the k-reduction."""
    omegas = uni.omegas()
    if all(w == 0.0 for w in omegas):
        if uni.n == 1:
            p = uni.particles[0]
            return ansatz.build_free_soliton(p.mass, p.velocity, uni)
        if uni.variant == "weakly-separable":
            return ansatz.build_weak_product(uni)
        return ansatz.build_free_n_soliton(uni)
    if all(w > 0.0 for w in omegas):
        return ansatz.build_oscillator_solution(uni)
    result = feasibility.solve_k(uni.particles, uni)
    if not result.feasible:
        raise PhaselabError(
            f"roster admits no product solution: {result.certificate.rule} "
            f"({result.certificate.detail})")
    return ansatz.solution_from_feasibility(uni.particles, uni, result)


def cmd_construct(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args)
    uni = validate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sol = _build_solution(uni)
    sol_path = out / "solution.json"
    sol.save(sol_path)
    checks = []
    if hasattr(sol, "particles"):
        worst = max(abs(p.s2**2 * p.a**2 - 1.0) for p in sol.particles)
        checks.append(_check("width_curvature_relation", worst, 1e-12,
                             worst <= 1e-12))
    energy = ansatz.closed_form_energy(sol)
    report = _report(args, cfg, checks, [str(sol_path)],
                     {"wall_seconds": time.perf_counter() - t0},
                     extra={"solution": sol.to_dict(),
                            "energy": energy.to_dict()})
    _write_report(report, out)
    return EXIT_OK if all(c["passed"] for c in checks) else EXIT_CHECK_FAILED


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args)
    uni = validate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sol = _build_solution(uni)
    times = args.times
    grid = fieldlab.default_grid(sol, span_sigmas=args.grid_span,
                                 points=args.grid_points, times=times)
    if (hasattr(sol, "n") and sol.n > 3):
        rep = fieldlab.pde_residuals_cloud(sol, times=times, seed=args.seed)
    else:
        rep = fieldlab.pde_residuals(sol, grid, times=times)
    norm = fieldlab.norm_quadrature(sol, grid, times[0])
    checks = [
        _check("continuity_linf", rep.continuity_linf, 1e-10,
               rep.continuity_linf <= 1e-10),
        _check("energy_equation_linf", rep.energy_linf, 1e-10,
               rep.energy_linf <= 1e-10),
        _check("norm_quadrature", abs(norm - 1.0), 1e-9,
               abs(norm - 1.0) <= 1e-9),
    ]
    rep_path = out / "residual_report.json"
    rep_path.write_text(json.dumps(rep.to_dict(), sort_keys=True, indent=2)
                        + "\n")
    report = _report(args, cfg, checks, [str(rep_path)],
                     {"wall_seconds": time.perf_counter() - t0},
                     extra={"residuals": rep.to_dict()})
    _write_report(report, out)
    return EXIT_OK if all(c["passed"] for c in checks) else EXIT_CHECK_FAILED


def cmd_energy(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args)
    uni = validate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sol = _build_solution(uni)
    closed = ansatz.closed_form_energy(sol)
    grid = fieldlab.default_grid(sol, span_sigmas=args.grid_span,
                                 points=args.grid_points)
    quad = fieldlab.energy_quadrature(sol, grid, 0.0)
    rel = abs(quad.total - closed.total) / max(abs(closed.total), 1e-300)
    checks = [_check("quadrature_vs_closed_form_rel", rel, 1e-6, rel <= 1e-6)]
    payload = {"closed_form": closed.to_dict(), "quadrature": quad.to_dict()}
    path = out / "energy.json"
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    report = _report(args, cfg, checks, [str(path)],
                     {"wall_seconds": time.perf_counter() - t0},
                     extra=payload)
    _write_report(report, out)
    return EXIT_OK if all(c["passed"] for c in checks) else EXIT_CHECK_FAILED


def cmd_feasibility(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args)
    uni = validate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = feasibility.solve_k(uni.particles, uni)
    checks = []
    if result.feasible:
        checks.append(_check("back_substitution", result.back_substitution,
                             1e-10, result.back_substitution <= 1e-10))
    else:
        print(f"[INFO] infeasible: {result.certificate.rule} "
              f"({result.certificate.detail})")
    path = out / "feasibility.json"
    path.write_text(json.dumps(result.to_dict(), sort_keys=True, indent=2)
                    + "\n")
    report = _report(args, cfg, checks, [str(path)],
                     {"wall_seconds": time.perf_counter() - t0},
                     extra={"feasibility": result.to_dict()})
    _write_report(report, out)
    return EXIT_OK if all(c["passed"] for c in checks) else EXIT_CHECK_FAILED


def cmd_mixing(args) -> int:
    # a verdict is a successful adjudication regardless of which way it falls
    t0 = time.perf_counter()
    cfg = _load_config(args)
    uni = validate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    verdict = feasibility.adjudicate_mixing(uni)
    print(f"[VERDICT] {verdict.verdict}: {verdict.detail}")
    path = out / "mixing.json"
    path.write_text(json.dumps(verdict.to_dict(), sort_keys=True, indent=2)
                    + "\n")
    report = _report(args, cfg, [], [str(path)],
                     {"wall_seconds": time.perf_counter() - t0},
                     extra={"mixing": verdict.to_dict()})
    _write_report(report, out)
    return EXIT_OK


def _machian_row(task):
    n, m, c_abs, hbar = task
    from phaselab.model import ParticleSpec
    uni = validate(UniverseConfig(
        c_abs=c_abs, hbar=hbar,
        particles=tuple(ParticleSpec(mass=m) for _ in range(n))))
    s2, lph = ansatz.machian_width(n, m, uni)
    return n, s2, lph


def cmd_machian_sweep(args) -> int:
    t0 = time.perf_counter()
    ns = _parse_range(args.n)
    tasks = [(n, args.m, args.cabs, args.hbar if args.hbar else 1.0)
             for n in ns]
    if args.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(args.workers) as pool:
            rows = list(pool.map(_machian_row, tasks))
    else:
        rows = [_machian_row(t) for t in tasks]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "machian.csv"
    with open(path, "w") as f:
        f.write("n,s_squared,physical_size\n")
        for n, s2, lph in rows:
            f.write(f"{n},{s2!r},{lph!r}\n")
    cfg = UniverseConfig(
        c_abs=args.cabs, hbar=args.hbar if args.hbar else 1.0,
        particles=tuple(), variant="cross-coupled")
    report = {
        "command": list(args.argv),
        "config_hash": hashlib.sha256(
            json.dumps({"n": ns, "m": args.m, "cabs": args.cabs},
                       sort_keys=True).encode()).hexdigest(),
        "seed": args.seed,
        "checks": [],
        "outputs": [str(path)],
        "timings": {"wall_seconds": time.perf_counter() - t0},
        "rows": len(rows),
    }
    _write_report(report, out)
    return EXIT_OK


def cmd_evolve(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args)
    uni = validate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sol = _build_solution(uni)
    grid = fieldlab.default_grid(sol, span_sigmas=args.grid_span,
                                 points=args.grid_points,
                                 times=(0.0, args.horizon))
    dt = args.dt if args.dt else dynamics.stable_dt(grid, uni)
    steps = max(1, int(round(args.horizon / dt)))
    c_abs = 0.0 if args.linear else None
    if args.linear:
        # linear limit: zero-phase Gaussian initial state, exact
        # linear-Schrodinger spreading law as the reference
        p = sol.particles[0]
        x = grid.mesh()[0]
        state = dynamics.EvolutionState(
            density=dynamics.linear_gaussian_density(x, 0.0, p.s, p.m,
                                                     uni.hbar),
            phase=dynamics.linear_gaussian_phase(x, 0.0, p.s, p.m, uni.hbar),
            t=0.0, grid=grid, variant=sol.variant)
        boundary = dynamics.linear_gaussian_boundary(p.s, p.m, uni.hbar)
    else:
        state = dynamics.state_from_solution(sol, grid)
        boundary = dynamics.boundary_from_solution(sol)
    blowup = None
    try:
        traj = dynamics.evolve(state, uni, dt, steps, boundary=boundary,
                               record_every=max(1, steps // 20), c_abs=c_abs)
    except BlowupDetected as blow:
        blowup = blow.t
        traj = blow.trajectory
    outputs = [str(p) for p in traj.export_csv(out)]
    checks = []
    if blowup is None:
        norm_drift = max(abs(n - traj.norms[0]) for n in traj.norms)
        energy_drift = max(abs(e - traj.energies[0]) for e in traj.energies)
        checks.append(_check("norm_drift", norm_drift, 1e-8,
                             norm_drift <= 1e-8))
        static_v = all(p.velocity == 0.0 for p in uni.particles)
        if static_v and not args.linear:
            checks.append(_check("energy_drift", energy_drift, 1e-6,
                                 energy_drift <= 1e-6))
    else:
        print(f"[INFO] evolution aborted by blowup at t = {blowup} "
              "(short-wave instability of the coupled equations)")
        checks.append(_check("completed_horizon", blowup, args.horizon,
                             False))
    report = _report(args, cfg, checks, outputs,
                     {"wall_seconds": time.perf_counter() - t0},
                     extra={"dt": dt, "steps": steps, "blowup_time": blowup})
    _write_report(report, out)
    return EXIT_OK if all(c["passed"] for c in checks) else EXIT_CHECK_FAILED


def cmd_perturb(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args)
    uni = validate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sol = _build_solution(uni)
    grid = fieldlab.default_grid(sol, span_sigmas=args.grid_span,
                                 points=args.grid_points,
                                 times=(0.0, args.horizon))
    trace = dynamics.perturb_and_track(sol, uni, args.kind, args.relative,
                                       args.horizon, grid)
    path = out / "perturbation.csv"
    trace.export_csv(path)
    checks = []
    if trace.initial_mismatch_closed_form is not None:
        err = abs(trace.deviations[0] - trace.initial_mismatch_closed_form)
        checks.append(_check("initial_mismatch_vs_closed_form", err, 1e-9,
                             err <= 1e-9))
    report = _report(args, cfg, checks, [str(path)],
                     {"wall_seconds": time.perf_counter() - t0},
                     extra={"blowup_time": trace.blowup_time,
                            "records": len(trace.times)})
    _write_report(report, out)
    return EXIT_OK if all(c["passed"] for c in checks) else EXIT_CHECK_FAILED


def _parse_range(spec: str) -> list[int]:
    """Parse '1..64' (doubling), '1,2,4' or a single integer."""
    if ".." in spec:
        lo, hi = spec.split("..")
        lo, hi = int(lo), int(hi)
        out = []
        n = lo
        while n <= hi:
            out.append(n)
            n *= 2
        return out
    if "," in spec:
        return [int(tok) for tok in spec.split(",") if tok]
    return [int(spec)]


def _parse_times(spec: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in spec.split(",") if tok)


def _add_common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--variant", choices=("cross", "weak"),
                   help="override the Lagrangian variant")
    p.add_argument("--grid-points", type=int, default=1024)
    p.add_argument("--grid-span", type=float, default=6.0,
                   help="grid half-span in packet half-widths")
    p.add_argument("--times", type=_parse_times, default=(0.0, 1.0, 2.0))
    p.add_argument("--out", default="phaselab-out", help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hbar", type=float, default=None,
                   help="override hbar (unit experiments)")
    p.add_argument("--cabs", type=float, default=None,
                   help="override the coupling magnitude")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phaselab",
        description="verification laboratory for phase-coupled "
                    "nonlinear Schrodinger solitons")
    sub = parser.add_subparsers(dest="cmd", required=True)

    for name, fn in (("construct", cmd_construct), ("verify", cmd_verify),
                     ("energy", cmd_energy), ("feasibility", cmd_feasibility),
                     ("mixing", cmd_mixing)):
        p = sub.add_parser(name)
        _add_common(p)
        p.set_defaults(handler=fn)

    p = sub.add_parser("machian-sweep")
    p.add_argument("--n", required=True,
                   help="particle counts: '1..64' (doubling) or '1,2,4'")
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--cabs", type=float, default=0.125)
    p.add_argument("--hbar", type=float, default=None)
    p.add_argument("--out", default="phaselab-out")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_machian_sweep)

    p = sub.add_parser("evolve")
    _add_common(p)
    p.add_argument("--horizon", type=float, default=0.5)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--linear", action="store_true",
                   help="evolve with the coupling set to zero")
    p.set_defaults(handler=cmd_evolve)

    p = sub.add_parser("perturb")
    _add_common(p)
    p.add_argument("--kind", choices=("s", "a"), default="s")
    p.add_argument("--relative", type=float, default=0.05)
    p.add_argument("--horizon", type=float, default=0.5)
    p.set_defaults(handler=cmd_perturb)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    try:
        return args.handler(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except PhaselabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    raise SystemExit(main())
