"""Two-timescale co-evolution loop and equilibrium checks."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    CoevoError,
    EmptySet,
    GneFailure,
    InsufficientData,
    MaxIterExceeded,
    NoConvergence,
    SetLikelyEmpty,
)
from .game import ControllerGain, QuadraticGame, build_pseudogradient, feasible_set
from .gne import GNE_MAX_ITER, GNE_TOL, gne_map, natural_residual


@dataclass
class Tolerances:
    state: float = 1e-9   # early stop on ||x_{k+1} - x_k||
    gne: float = GNE_TOL
    gne_max_iter: int = GNE_MAX_ITER
    max_steps: int = 10_000


@dataclass
class StepRecord:
    k: int
    x: np.ndarray
    y: np.ndarray
    gne_residual: float
    state_box_margin: float
    coupling_margin: float


@dataclass
class CoEvolutionTrace:
    steps: list = field(default_factory=list)
    final_state: np.ndarray | None = None
    converged: bool = False
    equilibrium_estimate: tuple | None = None

    def states(self) -> np.ndarray:
        return np.array([s.x for s in self.steps])

    def decisions(self) -> np.ndarray:
        return np.array([s.y for s in self.steps])

    def min_margins(self) -> tuple[float, float]:
        if not self.steps:
            return np.inf, np.inf
        return (min(s.state_box_margin for s in self.steps),
                min(s.coupling_margin for s in self.steps))

    def write_csv(self, path, x_star=None) -> None:
        """Columns k, ||x_k - x*||, gne_residual, min state margin, min coupling margin."""
        ref = self.final_state if x_star is None else np.asarray(x_star)
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["k", "state_error", "gne_residual", "state_margin", "coupling_margin"])
            for s in self.steps:
                out.writerow([s.k, repr(float(np.linalg.norm(s.x - ref))), repr(s.gne_residual),
                              repr(s.state_box_margin), repr(s.coupling_margin)])

    def write_states_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            X, Y = self.states(), self.decisions()
            out.writerow(["k"] + [f"x{i}" for i in range(X.shape[1])] + [f"y{i}" for i in range(Y.shape[1])])
            for s in self.steps:
                out.writerow([s.k] + [repr(float(v)) for v in np.concatenate([s.x, s.y])])


def state_margin(game: QuadraticGame, x) -> float:
    return float(min(np.min(x - game.state_lo), np.min(game.state_hi - x)))


def decision_margin(game: QuadraticGame, gain: ControllerGain, network, x, y) -> float:
    """Smallest slack of the decision box, coupling rows and state rows at ``x``."""
    S = feasible_set(game, gain, x, network.A, network.B)
    m = min(np.min(y - S.lo), np.min(S.hi - y))
    if S.normals.shape[0]:
        m = min(m, np.min(S.offsets - S.normals @ y))
    return float(m)


def run(game: QuadraticGame, network, gain: ControllerGain, x0, horizon: int,
        tols: Tolerances | None = None, y0=None) -> CoEvolutionTrace:
    """Alternate ``y_k = GNE(x_k)`` and ``x_{k+1} = A x_k + B K y_k``."""
    tols = tols or Tolerances()
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    x = np.asarray(x0, dtype=float).reshape(game.n)
    if state_margin(game, x) < -1e-12:
        raise ValueError("initial state lies outside the state box")
    pg = build_pseudogradient(game, gain, network.A, network.B)
    BK = network.B @ gain.full(game.N, game.m)
    trace = CoEvolutionTrace()
    y_prev = y0
    for k in range(horizon):
        try:
            sol = gne_map(game, network, gain, x, tols.gne, y0=y_prev, pg=pg, max_iter=tols.gne_max_iter)
        except (MaxIterExceeded, SetLikelyEmpty, EmptySet) as exc:
            raise GneFailure(f"equilibrium computation failed at step {k}: {exc}", step=k, trace=trace) from exc
        y = sol.y_star
        trace.steps.append(StepRecord(k, x.copy(), y.copy(), sol.residual, state_margin(game, x),
                                      decision_margin(game, gain, network, x, y)))
        x_next = network.A @ x + BK @ y
        y_prev = y
        if np.linalg.norm(x_next - x) <= tols.state:
            trace.final_state = x_next
            trace.converged = True
            return trace
        x = x_next
    trace.final_state = x
    return trace


def equilibrium(game: QuadraticGame, network, gain: ControllerGain, tols: Tolerances | None = None,
                x0=None, refinements: int = 2):
    """Run the loop to its stopping rule, then polish with ``x = (I - A)^{-1} B K y*(x)``."""
    tols = tols or Tolerances()
    if x0 is None:
        x0 = np.clip(np.zeros(game.n), game.state_lo, game.state_hi)
    trace = run(game, network, gain, x0, tols.max_steps, tols)
    if not trace.converged:
        raise NoConvergence(f"state increments still above {tols.state:g} after {tols.max_steps} steps")
    pg = build_pseudogradient(game, gain, network.A, network.B)
    BK = network.B @ gain.full(game.N, game.m)
    I_A = np.eye(game.n) - network.A
    x = trace.final_state
    y = trace.steps[-1].y
    for _ in range(refinements):
        y = gne_map(game, network, gain, x, tols.gne, y0=y, pg=pg, max_iter=tols.gne_max_iter).y_star
        x = np.linalg.solve(I_A, BK @ y)
    y = gne_map(game, network, gain, x, tols.gne, y0=y, pg=pg, max_iter=tols.gne_max_iter).y_star
    trace.equilibrium_estimate = (x, y)
    return x, y


def verify_equilibrium(game: QuadraticGame, network, gain: ControllerGain, x_star, y_star,
                       steady_tol: float = 1e-8, gne_tol: float = 1e-7) -> dict:
    """Steady-state and equilibrium residuals of a candidate pair, with constraint margins."""
    x = np.asarray(x_star, dtype=float).reshape(game.n)
    y = np.asarray(y_star, dtype=float).reshape(game.p)
    pg = build_pseudogradient(game, gain, network.A, network.B)
    BK = network.B @ gain.full(game.N, game.m)
    steady = float(np.linalg.norm(BK @ y - (np.eye(game.n) - network.A) @ x))
    try:
        S = feasible_set(game, gain, x, network.A, network.B)
        gne_res = natural_residual(pg.M, pg.offset(x), S, y)
        dec = decision_margin(game, gain, network, x, y)
    except CoevoError:
        gne_res, dec = np.inf, -np.inf
    st = state_margin(game, x)
    return {
        "steady_state_residual": steady,
        "gne_residual": gne_res,
        "state_margin": st,
        "decision_margin": dec,
        "passed": bool(steady <= steady_tol and gne_res <= gne_tol and st >= -1e-8 and dec >= -1e-8),
    }


def contraction_estimate(trace, x_star, floor: float = 1e-12, min_points: int = 5) -> float:
    """``exp`` of the least-squares slope of ``log ||x_k - x*||`` over the steps above ``floor``.

    ``trace`` may be a :class:`CoEvolutionTrace` or an array of states.
    """
    X = trace.states() if isinstance(trace, CoEvolutionTrace) else np.asarray(trace, dtype=float)
    X = X.reshape(len(X), -1)
    err = np.linalg.norm(X - np.asarray(x_star, dtype=float).reshape(1, -1), axis=1)
    k = np.nonzero(err > floor)[0]
    # keep the leading run above the floor
    if k.size:
        stop = np.argmax(np.diff(k) != 1) + 1 if np.any(np.diff(k) != 1) else k.size
        k = k[:stop]
    if k.size < min_points:
        raise InsufficientData(f"only {k.size} errors above {floor:g}")
    slope = np.polyfit(k.astype(float), np.log(err[k]), 1)[0]
    return float(np.exp(slope))
