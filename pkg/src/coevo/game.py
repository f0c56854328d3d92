"""Quadratic game with an external state, its pseudo-gradient and feasible set.

Agent ``i`` picks ``y_i`` in R^m and pays

    J_i = 1/2 ||A x + B K y - xbar_i||^2_{Q_i} + 1/2 ||y_i||^2_{R_i}

where ``y = col(y_1, ..., y_N)`` is stacked agent by agent.  Because the cost
is quadratic, the pseudo-gradient is affine: ``F(y, x) = M y + N_x x + c``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatch, EmptySet, NotStronglyMonotone

MONOTONE_TOL = 1e-12


def _as_matrix(M, shape, name):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape != shape:
        raise DimensionMismatch(f"{name} has shape {M.shape}, expected {shape}")
    return M


@dataclass
class QuadraticGame:
    """N agents with m decisions each, steering an n-dimensional state.

    ``y_lo``/``y_hi`` bound the stacked decision vector, ``C y <= d`` are the
    shared coupling rows and ``state_lo``/``state_hi`` the state box.
    """

    Q: list
    xbar: list
    R: list
    y_lo: np.ndarray
    y_hi: np.ndarray
    C: np.ndarray | None = None
    d: np.ndarray | None = None
    state_lo: np.ndarray | None = None
    state_hi: np.ndarray | None = None

    def __post_init__(self):
        N = len(self.Q)
        if N == 0 or len(self.R) != N or len(self.xbar) != N:
            raise DimensionMismatch("Q, R and xbar need one entry per agent")
        n = np.atleast_2d(self.Q[0]).shape[0]
        m = np.atleast_2d(self.R[0]).shape[0]
        self.Q = [_as_matrix(q, (n, n), "Q_i") for q in self.Q]
        self.R = [_as_matrix(r, (m, m), "R_i") for r in self.R]
        self.xbar = [np.asarray(v, dtype=float).ravel() for v in self.xbar]
        if any(v.shape != (n,) for v in self.xbar):
            raise DimensionMismatch(f"every target must have length {n}")
        for name, mats in (("Q", self.Q), ("R", self.R)):
            for i, W in enumerate(mats):
                if np.max(np.abs(W - W.T)) > 1e-12 or np.linalg.eigvalsh(W)[0] <= 0:
                    raise ValueError(f"{name}_{i} must be symmetric positive definite")
        p = N * m
        self.y_lo = np.broadcast_to(np.asarray(self.y_lo, dtype=float), (p,)).copy()
        self.y_hi = np.broadcast_to(np.asarray(self.y_hi, dtype=float), (p,)).copy()
        if np.any(self.y_lo > self.y_hi):
            raise EmptySet("decision box is empty")
        if self.C is None:
            self.C = np.zeros((0, p))
            self.d = np.zeros(0)
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float)).reshape(-1, p)
        self.d = np.asarray(self.d, dtype=float).reshape(self.C.shape[0])
        lo = -np.inf if self.state_lo is None else self.state_lo
        hi = np.inf if self.state_hi is None else self.state_hi
        self.state_lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy()
        self.state_hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy()

    @property
    def N(self) -> int:
        return len(self.Q)

    @property
    def m(self) -> int:
        return self.R[0].shape[0]

    @property
    def n(self) -> int:
        return self.Q[0].shape[0]

    @property
    def p(self) -> int:
        return self.N * self.m

    def to_dict(self) -> dict:
        def fin(v):
            return [None if not np.isfinite(t) else float(t) for t in v]
        return {
            "Q": [q.tolist() for q in self.Q], "xbar": [v.tolist() for v in self.xbar],
            "R": [r.tolist() for r in self.R], "y_lo": fin(self.y_lo), "y_hi": fin(self.y_hi),
            "C": self.C.tolist(), "d": self.d.tolist(),
            "state_lo": fin(self.state_lo), "state_hi": fin(self.state_hi),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuadraticGame":
        def unfin(v, fill):
            return np.array([fill if t is None else t for t in v], dtype=float)
        N = len(d["Q"])
        m = len(d["R"][0])
        return cls(d["Q"], d["xbar"], d["R"], unfin(d["y_lo"], -np.inf), unfin(d["y_hi"], np.inf),
                   np.array(d["C"], dtype=float).reshape(-1, N * m), d["d"],
                   unfin(d["state_lo"], -np.inf), unfin(d["state_hi"], np.inf))


@dataclass(frozen=True)
class ControllerGain:
    """Either a full gain ``K`` (m x mN) or the light-touch gain ``omega * [I_m ... I_m]``."""

    kind: str
    omega: float | None = None
    K: np.ndarray | None = None
    cap: float = np.inf

    @classmethod
    def light_touch(cls, omega: float) -> "ControllerGain":
        if not 0.0 <= omega <= 1.0:
            raise ValueError("omega must lie in [0, 1]")
        return cls("LightTouch", omega=float(omega))

    @classmethod
    def matrix(cls, K, cap: float = np.inf) -> "ControllerGain":
        K = np.atleast_2d(np.asarray(K, dtype=float))
        if np.any(K < 0):
            raise ValueError("gain entries must be nonnegative")
        return cls("Matrix", K=K, cap=cap)

    def full(self, N: int, m: int) -> np.ndarray:
        """The m x mN matrix acting on the stacked decisions."""
        if self.kind == "LightTouch":
            return self.omega * np.kron(np.ones((1, N)), np.eye(m))
        if self.K.shape != (m, N * m):
            raise DimensionMismatch(f"K has shape {self.K.shape}, expected {(m, N * m)}")
        blocks = self.blocks(N, m)
        if any(np.linalg.norm(Ki, 2) > self.cap for Ki in blocks):
            raise ValueError("a gain block exceeds the norm cap")
        return self.K

    def blocks(self, N: int, m: int) -> list[np.ndarray]:
        K = self.omega * np.kron(np.ones((1, N)), np.eye(m)) if self.kind == "LightTouch" else self.K
        return [K[:, i * m:(i + 1) * m] for i in range(N)]

    def to_dict(self) -> dict:
        if self.kind == "LightTouch":
            return {"kind": "LightTouch", "omega": self.omega}
        return {"kind": "Matrix", "K": self.K.tolist(),
                "cap": None if not np.isfinite(self.cap) else self.cap}


@dataclass
class PseudoGradient:
    M: np.ndarray
    N_x: np.ndarray
    c: np.ndarray
    eta: float
    ell: float
    theta_exact: float
    theta_bound: float
    theta_hat: float | None = None

    def __call__(self, y, x) -> np.ndarray:
        return self.M @ y + self.N_x @ x + self.c

    def offset(self, x) -> np.ndarray:
        """Constant part ``N_x x + c`` at a fixed state."""
        return self.N_x @ np.asarray(x, dtype=float) + self.c


def monotonicity_constants(M) -> tuple[float, float]:
    """Strong-monotonicity modulus and Lipschitz constant of ``y -> M y``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    eta = float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
    if eta <= MONOTONE_TOL:
        raise NotStronglyMonotone(f"smallest eigenvalue of the symmetric part is {eta:.3e}")
    return eta, float(np.linalg.norm(M, 2))


def stacked_weight_norm(game: QuadraticGame, A) -> float:
    """Spectral norm of ``col(Q_1 A, ..., Q_N A)``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    G = sum(q.T @ q for q in game.Q)
    return float(np.sqrt(max(np.linalg.eigvalsh(A.T @ G @ A)[-1], 0.0)))


def build_pseudogradient(game: QuadraticGame, gain: ControllerGain, A, B) -> PseudoGradient:
    N, m, n = game.N, game.m, game.n
    A = _as_matrix(A, (n, n), "A")
    B = _as_matrix(B, (n, m), "B")
    K = gain.full(N, m)
    BK = B @ K  # n x p
    blocks = gain.blocks(N, m)
    rows_M, rows_Nx, c = [], [], []
    for i in range(N):
        G_i = (B @ blocks[i]).T @ game.Q[i]  # K_i^T B^T Q_i
        rows_M.append(G_i @ BK)
        rows_Nx.append(G_i @ A)
        c.append(-G_i @ game.xbar[i])
    M = np.vstack(rows_M)
    for i in range(N):
        s = slice(i * m, (i + 1) * m)
        M[s, s] += game.R[i]
    N_x = np.vstack(rows_Nx)
    eta, ell = monotonicity_constants(M)
    qa = stacked_weight_norm(game, A)
    theta_bound = qa * max(np.linalg.norm(B @ Ki, 2) for Ki in blocks)
    theta_hat = qa * np.linalg.norm(B, 2) if gain.kind == "LightTouch" else None
    return PseudoGradient(M, N_x, np.concatenate(c), eta, ell,
                          float(np.linalg.norm(N_x, 2)), float(theta_bound), theta_hat)


def theta_hat_over_eta(game: QuadraticGame, A, B) -> float:
    """omega-free ratio used by the light-touch conditions.

    ``theta_hat = ||col(Q_i A)|| ||B||``; the modulus is the smaller of its
    values at omega = 0 and omega = 1, which bounds it on all of [0, 1]
    since the smallest eigenvalue of ``R + omega^2 S`` is concave in omega^2.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    eta = min(build_pseudogradient(game, ControllerGain.light_touch(w), A, B).eta for w in (0.0, 1.0))
    return stacked_weight_norm(game, A) * float(np.linalg.norm(B, 2)) / eta


@dataclass
class PolyhedralSet:
    """``{y : lo <= y <= hi, normals @ y <= offsets}``."""

    lo: np.ndarray
    hi: np.ndarray
    normals: np.ndarray = field(default=None)
    offsets: np.ndarray = field(default=None)

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float).ravel()
        self.hi = np.asarray(self.hi, dtype=float).ravel()
        p = self.lo.size
        if self.hi.shape != (p,):
            raise DimensionMismatch("box bounds differ in length")
        if np.any(self.lo > self.hi):
            raise EmptySet("box is empty")
        if self.normals is None:
            self.normals = np.zeros((0, p))
            self.offsets = np.zeros(0)
        self.normals = np.asarray(self.normals, dtype=float).reshape(-1, p)
        self.offsets = np.asarray(self.offsets, dtype=float).reshape(self.normals.shape[0])
        if self.normals.shape[0] and np.any(np.linalg.norm(self.normals, axis=1) == 0):
            raise ValueError("half-spaces need a nonzero normal")

    @property
    def dim(self) -> int:
        return self.lo.size

    def violation(self, y) -> float:
        """Largest constraint violation (0 inside the set)."""
        v = max(0.0, float(np.max(self.lo - y, initial=0.0)), float(np.max(y - self.hi, initial=0.0)))
        if self.normals.shape[0]:
            v = max(v, float(np.max(self.normals @ y - self.offsets)))
        return v

    def box_max(self) -> np.ndarray:
        """Max of each half-space's left-hand side over the box."""
        a = self.normals
        return np.where(a > 0, a * self.hi, a * self.lo).sum(axis=1)

    def pruned(self) -> "PolyhedralSet":
        """Drop half-spaces that hold everywhere on the box."""
        if not self.normals.shape[0]:
            return self
        with np.errstate(invalid="ignore"):
            keep = ~(self.box_max() <= self.offsets)
        return PolyhedralSet(self.lo, self.hi, self.normals[keep], self.offsets[keep])


def feasible_set(game: QuadraticGame, gain: ControllerGain, x, A, B, prune: bool = False) -> PolyhedralSet:
    """Decision box, coupling rows and the state box at ``A x + B K y`` as rows in y.

    State rows whose normal vanishes are dropped when they hold and raise
    :class:`EmptySet` otherwise.
    """
    n = game.n
    x = np.asarray(x, dtype=float).reshape(n)
    A = _as_matrix(A, (n, n), "A")
    B = _as_matrix(B, (n, game.m), "B")
    BK = B @ gain.full(game.N, game.m)
    Ax = A @ x
    normals = [game.C]
    offsets = [game.d]
    zero = np.linalg.norm(BK, axis=1) == 0
    for sign, bound in ((1.0, game.state_hi), (-1.0, game.state_lo)):
        fin = np.isfinite(bound)
        rhs = sign * (bound - Ax)
        bad = zero & fin & (rhs < -1e-12)
        if np.any(bad):
            raise EmptySet("state constraint violated independently of the decisions")
        rows = fin & ~zero
        normals.append(sign * BK[rows])
        offsets.append(rhs[rows])
    S = PolyhedralSet(game.y_lo, game.y_hi, np.vstack(normals), np.concatenate(offsets))
    return S.pruned() if prune else S
