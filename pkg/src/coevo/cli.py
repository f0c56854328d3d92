"""Command-line entry point: ``coevo {gen,certify,synthesize,simulate,sweep,table}``.

Exit codes: 0 success, 1 numerical failure, 2 usage or I/O problem.  Failures
print a JSON object ``{"error": ..., "message": ...}`` on stderr and, when the
output directory is known, write it to ``error.json``.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import certify as cert_mod
from .coevolve import Tolerances, contraction_estimate, equilibrium, run, verify_equilibrium
from .exceptions import (
    BadAlpha,
    CoevoError,
    DimensionGuard,
    InfeasibleTopology,
    ParseError,
    SynthesisFailed,
    TooLarge,
    ValidationError,
)
from .game import ControllerGain, build_pseudogradient, theta_hat_over_eta
from .scenario import Scenario, build_instance, load_gain, parse_scenario, preset, write_scenario

USAGE_ERRORS = (ParseError, ValidationError, DimensionGuard, OSError)


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)


def _tolerances(sc: Scenario) -> Tolerances:
    return Tolerances(state=sc.tolerances.state, gne=sc.tolerances.gne, max_steps=max(sc.horizon, 1))


def _guard_full(sc: Scenario, network) -> None:
    if sc.method == "full" and network.n > cert_mod.FULL_MAX_STATE:
        raise DimensionGuard(f"full method refused for n_F={network.n} "
                             f"(limit {cert_mod.FULL_MAX_STATE}); use --method reduced")


def _smallest_rate(check, rhos):
    """Smallest grid rate with a certificate, by bisection over a monotone grid."""
    lo, hi, found = 0, len(rhos), None
    while lo < hi:
        mid = (lo + hi) // 2
        c = check(float(rhos[mid]))
        if c.feasible:
            hi, found = mid, c
        else:
            lo = mid + 1
    # the last feasible probe is the first feasible grid point
    return found


def controller_gain(sc: Scenario) -> ControllerGain | None:
    kind = sc.controller["kind"]
    if kind == "omega":
        return ControllerGain.light_touch(sc.controller["omega"])
    if kind == "matrix":
        return load_gain(sc.controller["path"])
    return None


def reduced_params(game, network):
    return cert_mod.deltas(network, game.N, theta_hat_over_eta(game, network.A, network.B))


def synthesize(sc: Scenario, game, network):
    """Light-touch search; returns ``(omega, rho, certificate)``."""
    _guard_full(sc, network)
    if sc.method == "reduced":
        return cert_mod.synthesize_reduced(reduced_params(game, network), sc.eps, sc.step)
    c = theta_hat_over_eta(game, network.A, network.B)
    return cert_mod.synthesize_lighttouch(network.A, network.B, game.N, c, sc.eps, sc.step)


def certify_gain(sc: Scenario, game, network, gain: ControllerGain):
    """Best grid rate certified for a fixed gain, or None."""
    _guard_full(sc, network)
    rhos = cert_mod.rho_grid(sc.eps, sc.step)
    if sc.method == "reduced":
        if gain.kind != "LightTouch":
            raise ValidationError("the reduced method only handles light-touch gains")
        params = reduced_params(game, network)
        return _smallest_rate(lambda r: cert_mod.check_reduced(params, r, gain.omega), rhos)
    pg = build_pseudogradient(game, gain, network.A, network.B)
    BK = network.B @ gain.full(game.N, game.m)
    ratio = pg.theta_exact / pg.eta
    return _smallest_rate(lambda r: cert_mod.check_theorem1(network.A, BK, ratio, r), rhos[rhos < 1])


def resolve_controller(sc: Scenario, game, network):
    """``(gain, certificate)`` for the scenario's controller setting."""
    gain = controller_gain(sc)
    if gain is None:
        omega, _, cert = synthesize(sc, game, network)
        return ControllerGain.light_touch(omega), cert
    return gain, certify_gain(sc, game, network, gain)


# commands

def cmd_gen(sc: Scenario, out: str) -> dict:
    game, network, graph = build_instance(sc)
    write_scenario(sc, os.path.join(out, "scenario.json"))
    if graph is not None:
        graph.write_csv(os.path.join(out, "edges.csv"))
    _write_json(os.path.join(out, "instance.json"), {
        "game": game.to_dict(), "A": network.A.tolist(), "B": network.B.tolist(),
        "tau": network.tau, "alpha": None if network.alpha is None else network.alpha.tolist()})
    return {"n": game.n, "m": game.m, "N": game.N, "tau": network.tau}


def cmd_certify(sc: Scenario, out: str) -> dict:
    game, network, _ = build_instance(sc)
    gain = controller_gain(sc) or ControllerGain.light_touch(1.0)
    cert = certify_gain(sc, game, network, gain)
    if cert is None:
        raise SynthesisFailed("no grid rate below 1 could be certified for this gain")
    cert_mod.save_certificate(cert, os.path.join(out, "certificate.json"))
    return {"kind": cert.kind, "rho": cert.rho, "omega": cert.omega, "slack": cert.slack}


def cmd_synthesize(sc: Scenario, out: str) -> dict:
    game, network, _ = build_instance(sc)
    t0 = time.perf_counter()
    omega, rho, cert = synthesize(sc, game, network)
    elapsed = time.perf_counter() - t0
    cert_mod.save_certificate(cert, os.path.join(out, "certificate.json"))
    result = {"omega": omega, "rho": rho, "method": sc.method}
    _write_json(os.path.join(out, "synthesis.json"), dict(result, timing={"synthesis_s": elapsed}))
    return result


def simulate(sc: Scenario, out: str | None = None) -> dict:
    """Certificate, trajectory, equilibrium check and measured rate for one scenario."""
    timing = {}
    t0 = time.perf_counter()
    game, network, _ = build_instance(sc)
    gain, cert = resolve_controller(sc, game, network)
    timing["certificate_s"] = time.perf_counter() - t0
    tols = _tolerances(sc)

    t0 = time.perf_counter()
    x_star, y_star = equilibrium(game, network, gain, tols)
    x0 = np.clip(np.zeros(game.n), game.state_lo, game.state_hi)
    trace = run(game, network, gain, x0, sc.horizon, tols)
    timing["simulation_s"] = time.perf_counter() - t0
    report = verify_equilibrium(game, network, gain, x_star, y_star)
    try:
        rho_hat = contraction_estimate(trace, x_star, floor=sc.tolerances.floor())
    except CoevoError:
        rho_hat = None
    state_m, coupling_m = trace.min_margins()
    summary = {
        "scenario": sc.to_dict(),
        "omega": gain.omega if gain.kind == "LightTouch" else None,
        "rho": None if cert is None else cert.rho,
        "certificate_kind": None if cert is None else cert.kind,
        "rho_hat": rho_hat,
        "x_star": x_star.tolist(),
        "y_star": y_star.tolist(),
        "steady_state_residual": report["steady_state_residual"],
        "gne_residual": report["gne_residual"],
        "equilibrium_passed": report["passed"],
        "steps": len(trace.steps),
        "min_state_margin": state_m,
        "min_coupling_margin": coupling_m,
        "timing": timing,
    }
    if out is not None:
        trace.write_csv(os.path.join(out, "trace.csv"), x_star)
        if cert is not None:
            cert_mod.save_certificate(cert, os.path.join(out, "certificate.json"))
        _write_json(os.path.join(out, "summary.json"), summary)
    return summary


def cmd_simulate(sc: Scenario, out: str) -> dict:
    s = simulate(sc, out)
    return {k: s[k] for k in ("omega", "rho", "rho_hat", "steady_state_residual", "gne_residual")}


def cmd_sweep(sc: Scenario, out: str) -> dict:
    game, network, _ = build_instance(sc)
    _guard_full(sc, network)
    omegas = cert_mod.omega_grid(sc.eps, sc.step)[::-1]
    rhos = cert_mod.rho_grid(sc.eps, sc.step)
    if sc.method == "reduced":
        params = reduced_params(game, network)
        feasible = set(cert_mod.sweep_reduced(params, (omegas, rhos)))
    else:
        c = theta_hat_over_eta(game, network.A, network.B)
        feasible = set(cert_mod.sweep_lighttouch(network.A, network.B, game.N, c, (omegas, rhos)))
    with open(os.path.join(out, "sweep.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega", "rho", "feasible"])
        for r in rhos:
            for om in omegas:
                w.writerow([float(om), float(r), int((float(om), float(r)) in feasible)])
    return {"points": int(omegas.size * rhos.size), "feasible": len(feasible)}


def cmd_table(scenarios: list, method: str, out: str | None = None, vary: str = "n_F") -> list:
    """Mean synthesis time, omega and rho per instance size."""
    rows = []
    groups = {}
    for sc in scenarios:
        groups.setdefault((sc.n_F, sc.m, sc.N), []).append(sc)
    for (n_F, m, N), group in groups.items():
        if method == "full" and n_F > cert_mod.FULL_MAX_STATE:
            raise DimensionGuard(f"full method refused for n_F={n_F} (limit {cert_mod.FULL_MAX_STATE})")
        times, omegas, rhos = [], [], []
        for sc in group:
            sc = replace(sc, method=method)
            game, network, _ = build_instance(sc)
            t0 = time.perf_counter()
            omega, rho, _ = synthesize(sc, game, network)
            times.append(time.perf_counter() - t0)
            omegas.append(omega)
            rhos.append(rho)
        rows.append({"n_F": n_F, "m": m, "N": N, "method": method, "seeds": len(group),
                     "time_s": float(np.mean(times)), "omega": float(np.mean(omegas)),
                     "rho": float(np.mean(rhos))})
    if out is not None:
        with open(os.path.join(out, "table.csv"), "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return rows


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON file")
    common.add_argument("--preset", choices=("scalar", "paper"), help="built-in scenario")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--method", choices=("full", "reduced"), help="certificate family")
    common.add_argument("--out", help="output directory")
    common.add_argument("--eps", type=float, help="smallest grid value")
    common.add_argument("--step", type=float, help="grid step")
    p = argparse.ArgumentParser(prog="coevo", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("gen", parents=[common], help="write scenario, instance and edge list")
    sub.add_parser("certify", parents=[common], help="best certified rate for the configured gain")
    sub.add_parser("synthesize", parents=[common], help="light-touch gain search")
    sub.add_parser("simulate", parents=[common], help="run the co-evolution loop")
    sub.add_parser("sweep", parents=[common], help="feasibility map over (omega, rho)")
    t = sub.add_parser("table", parents=[common], help="size comparison table")
    t.add_argument("--sizes", default="50,100,200,1000", help="comma-separated sizes")
    t.add_argument("--vary", choices=("n_F", "m"), default="n_F", help="dimension to vary")
    t.add_argument("--repeats", type=int, default=10, help="seeds per size")
    return p


def _resolve(args) -> Scenario:
    if args.scenario:
        sc = parse_scenario(args.scenario)
    elif args.preset:
        sc = preset(args.preset, 0 if args.seed is None else args.seed)
    else:
        raise ValidationError("give --scenario or --preset")
    over = {}
    for name in ("seed", "method", "eps", "step", "out"):
        v = getattr(args, name)
        if v is not None:
            over[name] = v
    return replace(sc, **over) if over else sc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = None
    try:
        sc = _resolve(args)
        out = sc.out
        os.makedirs(out, exist_ok=True)
        if args.command == "table":
            if args.repeats < 1:
                raise ValidationError("--repeats must be positive")
            sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
            base = replace(sc, edge_budget=None)
            scen = [replace(base, seed=base.seed + r, **{args.vary: size})
                    for size in sizes for r in range(args.repeats)]
            result = cmd_table(scen, sc.method, out, args.vary)
        else:
            cmd = {"gen": cmd_gen, "certify": cmd_certify, "synthesize": cmd_synthesize,
                   "simulate": cmd_simulate, "sweep": cmd_sweep}[args.command]
            result = cmd(sc, out)
    except (CoevoError, ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        return _fail(exc, out, exit_code(exc))
    print(json.dumps(result, sort_keys=True, default=float))
    return 0


def exit_code(exc) -> int:
    """2 for bad input or refused sizes, 1 for numerical failures."""
    if isinstance(exc, USAGE_ERRORS + (TooLarge, InfeasibleTopology, BadAlpha)):
        return 2
    if isinstance(exc, (CoevoError, ArithmeticError, RuntimeError)):
        return 1
    return 2


def _fail(exc, out, code) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(err), file=sys.stderr)
    if out is not None and os.path.isdir(out):
        try:
            _write_json(os.path.join(out, "error.json"), err)
        except OSError:
            pass
    return code


if __name__ == "__main__":
    sys.exit(main())
