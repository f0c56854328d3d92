"""Feasibility of small dense linear matrix inequalities.

An :class:`LmiSystem` describes the affine matrix function

    F(x) = F0 + x_1 A_1 + ... + x_v A_v

in scalar decision coordinates ``x`` (optionally boxed).  The system is
*feasible* when some admissible ``x`` gives ``lambda_max(F(x)) <= -margin``.
:func:`solve_feasibility` looks for such a point with a phase-I barrier
method; it never certifies infeasibility, it only reports the best slack it
reached.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .exceptions import (
    DimensionMismatch,
    NoFeasiblePoint,
    NonSymmetric,
    NumericalBreakdown,
    OutOfBounds,
)

SYMMETRY_TOL = 1e-12
DEFAULT_MARGIN = 1e-8
NEWTON_REG = 1e-12
BARRIER_DECREASE = 0.2
DIVERGENCE_LIMIT = 1e10
MAX_CENTERING_STEPS = 50
CENTERING_TOL = 1e-6


def _symmetric(M, name="matrix") -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {M.shape}")
    if M.size and np.max(np.abs(M - M.T)) > SYMMETRY_TOL:
        raise NonSymmetric(f"{name} is not symmetric (max asymmetry "
                           f"{np.max(np.abs(M - M.T)):.3e})")
    return M


def max_eigenvalue(M) -> float:
    """Largest eigenvalue of a symmetric matrix."""
    M = _symmetric(M)
    if M.size == 0:
        return -np.inf
    return float(sla.eigvalsh(M, subset_by_index=[M.shape[0] - 1, M.shape[0] - 1])[0])


def expand_matrix_variable(n: int) -> list[np.ndarray]:
    """Elementary symmetric basis E_ij (i <= j), row-major over the upper triangle."""
    if n < 1:
        raise ValueError("n must be >= 1")
    basis = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0
            basis.append(E)
    return basis


def symmetric_coordinates(X) -> np.ndarray:
    """Coordinates of a symmetric matrix in the :func:`expand_matrix_variable` basis."""
    X = _symmetric(X)
    iu = np.triu_indices(X.shape[0])
    return X[iu].copy()


def assemble_symmetric(coords, n: int) -> np.ndarray:
    """Inverse of :func:`symmetric_coordinates`."""
    coords = np.asarray(coords, dtype=float)
    if coords.shape != (n * (n + 1) // 2,):
        raise DimensionMismatch(f"expected {n * (n + 1) // 2} coordinates, got {coords.shape}")
    X = np.zeros((n, n))
    iu = np.triu_indices(n)
    X[iu] = coords
    X[(iu[1], iu[0])] = coords
    return X


def sym_images(U, V=None) -> np.ndarray:
    """Images of the elementary basis under ``X -> U^T X V + V^T X U``.

    With ``V`` omitted this is the congruence ``X -> U^T X U``.  Returns an
    array of shape ``(n(n+1)/2, k, k)`` ordered like :func:`expand_matrix_variable`.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    congruence = V is None
    V = U if congruence else np.atleast_2d(np.asarray(V, dtype=float))
    n, k = U.shape
    if V.shape != (n, k):
        raise DimensionMismatch("U and V must have the same shape")
    out = np.empty((n * (n + 1) // 2, k, k))
    pos = 0
    for a in range(n):
        # rows b >= a
        T = np.einsum("i,bj->bij", U[a], V[a:]) + np.einsum("bi,j->bij", U[a:], V[a])
        T = T + T.transpose(0, 2, 1)
        T[0] *= 0.5
        if congruence:
            T *= 0.5
        out[pos:pos + n - a] = T
        pos += n - a
    return out


@dataclass(frozen=True)
class LmiSystem:
    """``F(x) = constant + sum_i x_i basis[i]`` with ``lambda_max(F(x)) <= -margin`` required."""

    constant: np.ndarray
    basis: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    margin: float = DEFAULT_MARGIN
    labels: tuple = field(default=(), compare=False)

    def __post_init__(self):
        F0 = _symmetric(self.constant, "constant")
        basis = np.asarray(self.basis, dtype=float)
        if basis.ndim == 2 and F0.shape == (1, 1):
            basis = basis.reshape(-1, 1, 1)
        if basis.ndim != 3 or basis.shape[0] == 0:
            raise DimensionMismatch("basis must be a nonempty stack of matrices")
        if basis.shape[1:] != F0.shape:
            raise DimensionMismatch(f"basis matrices {basis.shape[1:]} do not match constant {F0.shape}")
        asym = np.max(np.abs(basis - basis.transpose(0, 2, 1)))
        if asym > SYMMETRY_TOL:
            raise NonSymmetric(f"basis matrix not symmetric (max asymmetry {asym:.3e})")
        v = basis.shape[0]
        lo = np.full(v, -np.inf) if self.lower is None else np.asarray(self.lower, dtype=float).copy()
        hi = np.full(v, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).copy()
        if lo.shape != (v,) or hi.shape != (v,):
            raise DimensionMismatch("bounds must have one entry per coordinate")
        if np.any(lo >= hi):
            raise ValueError("every coordinate interval must have lower < upper")
        if not self.margin > 0:
            raise ValueError("margin must be positive")
        F0 = F0.copy()
        basis = basis.copy()
        F0.flags.writeable = False
        basis.flags.writeable = False
        object.__setattr__(self, "constant", F0)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.constant.shape[0]

    @property
    def nvars(self) -> int:
        return self.basis.shape[0]

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.nvars,):
            raise DimensionMismatch(f"expected {self.nvars} coordinates, got shape {x.shape}")
        F = self.constant + np.tensordot(x, self.basis, axes=1)
        return 0.5 * (F + F.T)

    def scaled(self, factor: float) -> "LmiSystem":
        """Same system with every matrix and the margin multiplied by ``factor > 0``."""
        if not factor > 0:
            raise ValueError("factor must be positive")
        return LmiSystem(self.constant * factor, self.basis * factor, self.lower, self.upper,
                         self.margin * factor, self.labels)

    def to_dict(self) -> dict:
        return {
            "constant": self.constant.tolist(),
            "basis": self.basis.tolist(),
            "lower": [None if not np.isfinite(v) else float(v) for v in self.lower],
            "upper": [None if not np.isfinite(v) else float(v) for v in self.upper],
            "margin": self.margin,
            "labels": list(self.labels),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LmiSystem":
        lo = np.array([-np.inf if v is None else v for v in d["lower"]], dtype=float)
        hi = np.array([np.inf if v is None else v for v in d["upper"]], dtype=float)
        return cls(np.array(d["constant"], dtype=float), np.array(d["basis"], dtype=float),
                   lo, hi, float(d["margin"]), tuple(d.get("labels", ())))


def block_diag_system(blocks: Sequence[tuple[np.ndarray, np.ndarray]], nvars: int,
                      margin: float = DEFAULT_MARGIN, lower=None, upper=None,
                      labels=()) -> LmiSystem:
    """Stack several LMIs sharing the same coordinates into one block-diagonal system.

    Each block is ``(constant, basis)`` with ``basis`` of shape ``(nvars, s_b, s_b)``.
    """
    sizes = [np.atleast_2d(c).shape[0] for c, _ in blocks]
    s = sum(sizes)
    F0 = np.zeros((s, s))
    basis = np.zeros((nvars, s, s))
    pos = 0
    for (c, b), sb in zip(blocks, sizes):
        b = np.asarray(b, dtype=float).reshape(nvars, sb, sb)
        F0[pos:pos + sb, pos:pos + sb] = c
        basis[:, pos:pos + sb, pos:pos + sb] = 0.5 * (b + b.transpose(0, 2, 1))
        pos += sb
    return LmiSystem(0.5 * (F0 + F0.T), basis, lower, upper, margin, tuple(labels))


class Status(str, enum.Enum):
    FEASIBLE = "Feasible"
    NOT_FOUND = "NotFound"


@dataclass
class FeasibilityResult:
    status: Status
    point: np.ndarray | None
    slack: float
    iterations: int

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE


def check_feasible_point(sys: LmiSystem, x) -> tuple[bool, float]:
    """Evaluate ``F(x)`` independently of any solver: returns ``(feasible, lambda_max)``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.nvars,):
        raise DimensionMismatch(f"expected {sys.nvars} coordinates, got shape {x.shape}")
    if np.any(x < sys.lower) or np.any(x > sys.upper):
        raise OutOfBounds("point lies outside the coordinate bounds")
    slack = max_eigenvalue(sys.evaluate(x))
    return slack <= -sys.margin, slack


def _starting_point(lo, hi):
    x = np.zeros(lo.shape)
    both = np.isfinite(lo) & np.isfinite(hi)
    x[both] = 0.5 * (lo[both] + hi[both])
    only_lo = np.isfinite(lo) & ~np.isfinite(hi)
    only_hi = ~np.isfinite(lo) & np.isfinite(hi)
    x[only_lo] = np.maximum(lo[only_lo] + 1.0, 0.0)
    x[only_hi] = np.minimum(hi[only_hi] - 1.0, 0.0)
    return x


def solve_feasibility(sys: LmiSystem, tol: float = 1e-9, max_iter: int = 500) -> FeasibilityResult:
    """Phase-I search for ``x`` with ``lambda_max(F(x)) <= -margin``.

    Minimises ``t`` subject to ``F(x) < t I`` by damped Newton steps on
    ``w*t - logdet(t I - F(x)) - sum log(bound slacks)`` while the weight ``w``
    grows geometrically.  Returns as soon as the current point is feasible;
    otherwise stops once the barrier duality gap is below ``tol``, the lower
    bound on the optimal ``t`` rules out the margin, ``t`` stalls over a full
    stage, or ``max_iter`` Newton steps were taken.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    v, s = sys.nvars, sys.dim
    lo, hi = sys.lower, sys.upper
    has_lo, has_hi = np.isfinite(lo), np.isfinite(hi)
    nu = s + int(has_lo.sum() + has_hi.sum())  # barrier parameter

    G = np.empty((v + 1, s, s))
    G[:v] = -sys.basis
    G[v] = np.eye(s)

    x = _starting_point(lo, hi)
    F = sys.evaluate(x)
    lam = float(np.linalg.eigvalsh(F)[-1])
    best_slack, best_x = lam, x.copy()
    if lam <= -sys.margin:
        return FeasibilityResult(Status.FEASIBLE, x, lam, 0)
    z = np.append(x, lam + 1.0)

    def barrier_parts(z):
        x, t = z[:v], z[v]
        S = t * np.eye(s) - sys.constant - np.tensordot(x, sys.basis, axes=1)
        S = 0.5 * (S + S.T)
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            return None
        if np.any(x[has_lo] <= lo[has_lo]) or np.any(x[has_hi] >= hi[has_hi]):
            return None
        return L

    def phi(z, w, L):
        x = z[:v]
        val = w * z[v] - 2.0 * np.sum(np.log(np.diag(L)))
        val -= np.sum(np.log(x[has_lo] - lo[has_lo])) + np.sum(np.log(hi[has_hi] - x[has_hi]))
        return val

    w = nu / max(1.0, abs(z[v]))
    iterations = 0
    t_stage_start = z[v]
    L = barrier_parts(z)
    if L is None:
        raise NumericalBreakdown("initial point is not strictly inside the barrier domain")

    while iterations < max_iter:
        # centering for the current weight
        stage_start = iterations
        stalled = False
        while iterations < max_iter:
            if iterations - stage_start >= MAX_CENTERING_STEPS:
                stalled = True
                break
            Linv = sla.solve_triangular(L, np.eye(s), lower=True)
            Gt = Linv @ G @ Linv.T
            Gf = Gt.reshape(v + 1, -1)
            grad = -np.trace(Gt, axis1=1, axis2=2)
            grad[v] += w
            H = Gf @ Gf.T
            x = z[:v]
            dlo = np.zeros(v)
            dhi = np.zeros(v)
            dlo[has_lo] = x[has_lo] - lo[has_lo]
            dhi[has_hi] = hi[has_hi] - x[has_hi]
            grad[:v][has_lo] -= 1.0 / dlo[has_lo]
            grad[:v][has_hi] += 1.0 / dhi[has_hi]
            hdiag = np.zeros(v)
            hdiag[has_lo] += 1.0 / dlo[has_lo] ** 2
            hdiag[has_hi] += 1.0 / dhi[has_hi] ** 2
            H[np.arange(v), np.arange(v)] += hdiag
            # equilibrate, then regularise the unit-diagonal system
            d = 1.0 / np.sqrt(np.maximum(np.diag(H), np.finfo(float).tiny))
            Hs = H * np.outer(d, d)
            Hs[np.diag_indices(v + 1)] += NEWTON_REG
            try:
                cf = sla.cho_factor(Hs)
                dz = -d * sla.cho_solve(cf, d * grad)
            except (np.linalg.LinAlgError, sla.LinAlgError):
                raise NumericalBreakdown("Newton system is singular beyond regularisation")
            if not np.all(np.isfinite(dz)):
                raise NumericalBreakdown("Newton step is not finite")
            decrement = float(-grad @ dz)
            if decrement < CENTERING_TOL:
                break
            f0 = phi(z, w, L)
            step = 1.0
            while True:
                z_new = z + step * dz
                L_new = barrier_parts(z_new)
                if L_new is not None and phi(z_new, w, L_new) <= f0 - 0.25 * step * decrement:
                    break
                step *= 0.5
                if step < 1e-14:
                    L_new = None
                    break
            iterations += 1
            if L_new is None:
                stalled = True
                break
            z, L = z_new, L_new
            lam = float(np.linalg.eigvalsh(sys.evaluate(z[:v]))[-1])
            if lam < best_slack:
                best_slack, best_x = lam, z[:v].copy()
            if lam <= -sys.margin:
                return FeasibilityResult(Status.FEASIBLE, z[:v].copy(), lam, iterations)
            if decrement < 2 * CENTERING_TOL:
                break
            if np.max(np.abs(z)) > DIVERGENCE_LIMIT:
                # barrier unbounded below: nothing left to find along this path
                return FeasibilityResult(Status.NOT_FOUND, best_x, best_slack, iterations)
        if stalled:
            break
        gap = nu / w
        # at the (approximate) centre t - gap is a lower bound on the optimal t
        if z[v] - 1.1 * gap > -sys.margin:
            break
        if gap < tol:
            break
        if abs(z[v] - t_stage_start) < tol and iterations > 0 and gap < 1.0:
            break
        t_stage_start = z[v]
        w /= BARRIER_DECREASE
        L = barrier_parts(z)
    return FeasibilityResult(Status.NOT_FOUND, best_x, best_slack, iterations)


def bisect_scalar(predicate: Callable[[float], bool], lo: float, hi: float, precision: float,
                  sweep: int = 0) -> float:
    """Largest ``v`` in ``[lo, hi]`` with ``predicate(v)`` true, for a true-then-false predicate.

    With ``sweep > 0`` and ``predicate(lo)`` false, a uniform scan with ``sweep``
    points looks for a first true value before bisecting.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    if not precision > 0:
        raise ValueError("precision must be positive")
    if not predicate(lo):
        if sweep <= 0:
            raise NoFeasiblePoint("predicate is false at the lower end")
        grid = np.linspace(lo, hi, sweep + 1)[1:]
        for g in grid:
            if predicate(g):
                lo = g
                break
        else:
            raise NoFeasiblePoint("predicate is false over the whole sweep")
    if predicate(hi):
        return hi
    while hi - lo > precision:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            lo = mid
        else:
            hi = mid
    return lo
