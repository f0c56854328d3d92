"""Variational equilibrium of the affine game by extragradient iterations."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import linprog

from .exceptions import BoundViolated, MaxIterExceeded, SetLikelyEmpty
from .game import ControllerGain, PolyhedralSet, QuadraticGame, build_pseudogradient, feasible_set

PROJECTION_TOL = 1e-10
GNE_TOL = 1e-8
GNE_MAX_ITER = 10**6


def _disjoint_groups(normals: np.ndarray) -> list[np.ndarray]:
    """Greedy partition of half-space rows into groups with disjoint supports."""
    groups, used = [], []
    for r in range(normals.shape[0]):
        support = normals[r] != 0
        for g, mask in enumerate(used):
            if not np.any(mask & support):
                groups[g].append(r)
                used[g] = mask | support
                break
        else:
            groups.append([r])
            used.append(support.copy())
    return [np.array(g) for g in groups]


def _project_group(z, a, b, sq):
    # rows have disjoint supports so the individual projections commute
    excess = a @ z - b
    active = excess > 0
    if not np.any(active):
        return z
    return z - (excess[active] / sq[active]) @ a[active]


def project(S: PolyhedralSet, z, tol: float = PROJECTION_TOL, max_iter: int = 100_000) -> np.ndarray:
    """Euclidean projection onto ``S`` by Dykstra's cyclic algorithm."""
    z = np.asarray(z, dtype=float)
    q = np.clip(z, S.lo, S.hi)
    a, b = S.normals, S.offsets
    if not a.shape[0] or np.all(a @ q <= b):
        return q
    sq = np.einsum("ij,ij->i", a, a)
    if np.all(np.isinf(S.lo)) and np.all(np.isinf(S.hi)) and a.shape[0] == 1:
        return _project_group(z, a, b, sq)
    groups = _disjoint_groups(a)
    n_sets = 1 + len(groups)
    incr = np.zeros((n_sets, z.size))
    x = z.copy()
    history = []
    known_nonempty = False
    for _ in range(max_iter):
        start, incr_start = x.copy(), incr.copy()
        w = x + incr[0]
        x = np.clip(w, S.lo, S.hi)
        incr[0] = w - x
        for g, rows in enumerate(groups, start=1):
            w = x + incr[g]
            x = _project_group(w, a[rows], b[rows], sq[rows])
            incr[g] = w - x
        # x alone can sit still while the corrections drain, so both count
        change = float(np.linalg.norm(x - start) + np.linalg.norm(incr - incr_start))
        history.append(change)
        violation = S.violation(x)
        if change <= 0.01 * tol and violation <= tol:
            return x
        if not known_nonempty and violation > tol and (
                change <= 0.01 * tol or (len(history) > 100 and history[-1] > 0.999 * history[-101])):
            # on a nonempty set the corrections can drain at a constant pace
            # for many sweeps, so a stall only triggers an exact emptiness test
            if _is_empty(S):
                raise SetLikelyEmpty(f"projection stalls with violation {violation:.3e}")
            known_nonempty = True
    raise MaxIterExceeded(f"projection did not converge in {max_iter} sweeps")


def _is_empty(S: PolyhedralSet) -> bool:
    bounds = [(None if np.isinf(l) else l, None if np.isinf(h) else h) for l, h in zip(S.lo, S.hi)]
    res = linprog(np.zeros(S.dim), A_ub=S.normals, b_ub=S.offsets, bounds=bounds, method="highs")
    return res.status == 2


@dataclass
class GneSolution:
    y_star: np.ndarray
    residual: float
    iterations: int


def natural_residual(M, offset, S: PolyhedralSet, y, tol: float = PROJECTION_TOL) -> float:
    """``||y - P_S(y - F(y))||`` for ``F(y) = M y + offset``."""
    return float(np.linalg.norm(y - project(S, y - (M @ y + offset), tol)))


def solve_gne(pg, S: PolyhedralSet, x, tol: float = GNE_TOL, max_iter: int = GNE_MAX_ITER,
              y0=None, proj_tol: float = PROJECTION_TOL) -> GneSolution:
    """Extragradient with the fixed step ``1/(2 ell)``.

    The cheap residual ``||y - P(y - step F(y))||`` is a lower bound on the
    unit-step natural residual, so the exact residual is only computed once
    the cheap one is below ``tol``.
    """
    M = pg.M
    off = pg.offset(x)
    step = 1.0 / (2.0 * pg.ell)
    y = project(S, np.zeros(S.dim) if y0 is None else np.asarray(y0, dtype=float), proj_tol)
    for k in range(max_iter):
        y_bar = project(S, y - step * (M @ y + off), proj_tol)
        if np.linalg.norm(y - y_bar) <= tol:
            res = natural_residual(M, off, S, y, proj_tol)
            if res <= tol:
                return GneSolution(y, res, k)
        y = project(S, y - step * (M @ y_bar + off), proj_tol)
    raise MaxIterExceeded(f"extragradient did not reach residual {tol:g} in {max_iter} iterations")


def gne_map(game: QuadraticGame, network, gain: ControllerGain, x, tol: float = GNE_TOL,
            y0=None, pg=None, max_iter: int = GNE_MAX_ITER) -> GneSolution:
    """Equilibrium decisions at state ``x`` for the game driven by ``network``."""
    if pg is None:
        pg = build_pseudogradient(game, gain, network.A, network.B)
    S = feasible_set(game, gain, x, network.A, network.B, prune=True)
    return solve_gne(pg, S, x, tol, max_iter, y0=y0)


def lipschitz_check(game: QuadraticGame, network, gain: ControllerGain, x_samples,
                    tol: float = GNE_TOL, slack: float | None = None) -> float:
    """Largest ``||y*(x) - y*(x')|| / ((theta/eta) ||x - x'||)`` over all sample pairs.

    Raises :class:`BoundViolated` when a pair exceeds the bound by more than
    ``slack`` (default ``10 tol``).
    """
    xs = [np.asarray(x, dtype=float) for x in x_samples]
    if len(xs) < 2:
        raise ValueError("need at least two samples")
    slack = 10 * tol if slack is None else slack
    pg = build_pseudogradient(game, gain, network.A, network.B)
    const = pg.theta_exact / pg.eta
    ys, prev = [], None
    for x in xs:
        prev = gne_map(game, network, gain, x, tol, y0=prev, pg=pg).y_star
        ys.append(prev)
    worst = 0.0
    for i, j in combinations(range(len(xs)), 2):
        dx = float(np.linalg.norm(xs[i] - xs[j]))
        dy = float(np.linalg.norm(ys[i] - ys[j]))
        if dy > const * dx + slack:
            raise BoundViolated(f"pair ({i}, {j}): {dy:.3e} > {const * dx:.3e}", pair=(xs[i], xs[j]))
        if dx > 0 and const > 0:
            worst = max(worst, dy / (const * dx))
        elif dy > slack:
            worst = np.inf
    return worst
