"""Convergence certificates and light-touch gain synthesis.

Every condition is lowered to an :class:`~coevo.lmi.LmiSystem` in scalar
coordinates.  All conditions here are homogeneous in their unknowns, so the
uniform margin only fixes a scale and is equivalent to strict feasibility.

Coordinate layouts
------------------
* Lyapunov conditions: ``[X coordinates..., lam]``.
* Full-block multiplier condition: ``[X coordinates..., Pi coordinates..., lam]``
  with ``Pi = [[R, S], [S^T, T]]`` as one symmetric matrix.
* Scalar (reduced) condition: ``[chi, lam, r1, r2, t1, t2]``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import SynthesisFailed, TooLarge, UnstableA
from .lmi import (
    DEFAULT_MARGIN,
    LmiSystem,
    assemble_symmetric,
    block_diag_system,
    check_feasible_point,
    solve_feasibility,
    sym_images,
    symmetric_coordinates,
)

FULL_MAX_STATE = 50
# homogeneous conditions: a unit box on every coordinate only fixes the scale
COORD_BOUND = 1.0
MAX_VARIABLES = 1500
REDUCED_LABELS = ("chi", "lam", "r1", "r2", "t1", "t2")


@dataclass
class Certificate:
    kind: str  # Theorem1, LightTouch, Theorem3 or Reduced
    rho: float
    omega: float | None
    lam: float
    witness: dict
    slack: float
    feasible: bool
    system: LmiSystem = field(repr=False)
    point: np.ndarray = field(repr=False)

    def revalidate(self) -> tuple[bool, float]:
        """Re-evaluate the assembled matrix at the stored point."""
        return check_feasible_point(self.system, self.point)

    def to_dict(self) -> dict:
        wit = {k: (np.asarray(v).tolist() if isinstance(v, np.ndarray) else v)
               for k, v in self.witness.items()}
        return {"kind": self.kind, "rho": self.rho, "omega": self.omega, "lambda": self.lam,
                "witness": wit, "slack": self.slack, "feasible": self.feasible,
                "point": self.point.tolist(), "system": self.system.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        wit = {k: (np.array(v) if isinstance(v, list) else v) for k, v in d["witness"].items()}
        return cls(d["kind"], d["rho"], d["omega"], d["lambda"], wit, d["slack"], d["feasible"],
                   LmiSystem.from_dict(d["system"]), np.array(d["point"], dtype=float))


def save_certificate(cert: Certificate, path) -> None:
    with open(path, "w") as fh:
        json.dump(cert.to_dict(), fh, indent=1)


def load_certificate(path) -> Certificate:
    with open(path) as fh:
        return Certificate.from_dict(json.load(fh))


@dataclass(frozen=True)
class ReducedParams:
    delta1: float
    delta2: float
    alpha: float
    theta_over_eta: float

    def __post_init__(self):
        if min(self.delta1, self.delta2, self.theta_over_eta) < 0:
            raise ValueError("reduced parameters must be nonnegative")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")


def _spectral_radius(A) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(A)))) if A.size else 0.0


def _solve(sys: LmiSystem, tol: float, max_iter: int):
    res = solve_feasibility(sys, tol=tol, max_iter=max_iter)
    return res.feasible, res.point, res.slack


def _normalising_box(v, nonnegative):
    lower = np.full(v, -COORD_BOUND)
    lower[nonnegative] = 0.0
    return lower, np.full(v, COORD_BOUND)


def _x_block_images(n, pairs, congruences):
    """Images of the X basis under ``sum sign * U^T X U + sum (U^T X V + V^T X U)``."""
    out = None
    for sign, U in congruences:
        img = sign * sym_images(U)
        out = img if out is None else out + img
    for U, V in pairs:
        img = sym_images(U, V)
        out = img if out is None else out + img
    return out


def _lyapunov_system(n, s, x_images, lam_image, margin):
    """``x_images``/``lam_image`` for the main block plus ``-X <= -margin I``."""
    nx = n * (n + 1) // 2
    v = nx + 1
    basis_main = np.concatenate([x_images, lam_image[None]], axis=0)
    pos_images = np.concatenate([-sym_images(np.eye(n)), np.zeros((1, n, n))], axis=0)
    lower, upper = _normalising_box(v, [v - 1])
    labels = tuple(f"X{i}" for i in range(nx)) + ("lam",)
    return block_diag_system([(np.zeros((s, s)), basis_main), (np.zeros((n, n)), pos_images)],
                             v, margin=margin, lower=lower, upper=upper, labels=labels)


def _lyapunov_certificate(kind, sys, n, rho, omega, feasible, point, slack):
    nx = n * (n + 1) // 2
    X = assemble_symmetric(point[:nx], n)
    return Certificate(kind, float(rho), omega, float(point[-1]), {"X": X}, float(slack),
                       bool(feasible), sys, np.asarray(point, dtype=float))


def theorem1_system(A, BK, theta_over_eta, rho, margin=DEFAULT_MARGIN) -> LmiSystem:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    BK = np.asarray(BK, dtype=float).reshape(A.shape[0], -1)
    n, p = BK.shape
    s = n + p
    U = np.hstack([A, BK])
    P = np.hstack([np.eye(n), np.zeros((n, p))])
    x_img = _x_block_images(n, [], [(1.0, U), (-rho ** 2, P)])
    lam_img = np.diag(np.concatenate([np.full(n, theta_over_eta ** 2), -np.ones(p)]))
    return _lyapunov_system(n, s, x_img, lam_img, margin)


def _check_full_size(n):
    if n > FULL_MAX_STATE:
        raise TooLarge(f"state dimension {n} exceeds the full-condition guard ({FULL_MAX_STATE})")


def check_theorem1(A, BK, theta_over_eta, rho, margin=DEFAULT_MARGIN, tol=1e-9,
                   max_iter=500) -> Certificate:
    """Contraction certificate at rate ``rho`` for a fixed gain ``K`` (pass ``B @ K``)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if _spectral_radius(A) >= 1:
        raise UnstableA("A is not Schur")
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    _check_full_size(A.shape[0])
    sys = theorem1_system(A, BK, theta_over_eta, rho, margin)
    feasible, point, slack = _solve(sys, tol, max_iter)
    return _lyapunov_certificate("Theorem1", sys, A.shape[0], rho, None, feasible, point, slack)


def stacked_input(B, N) -> np.ndarray:
    """``[B ... B]``: the input matrix seen by the stacked decisions under light touch."""
    return np.kron(np.ones((1, N)), np.atleast_2d(np.asarray(B, dtype=float)))


def lighttouch_system(A, B, N, theta_hat_over_eta, rho, omega, margin=DEFAULT_MARGIN) -> LmiSystem:
    """Schur-complement form ``[[-rho^2 X + lam c w^2 I, 0, A^T X], [0, -lam I, w Bb^T X], [X A, w X Bb, -X]]``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Bb = stacked_input(np.asarray(B, dtype=float).reshape(A.shape[0], -1), N)
    n, p = Bb.shape
    s = 2 * n + p
    P1 = np.zeros((n, s)); P1[:, :n] = np.eye(n)
    P3 = np.zeros((n, s)); P3[:, n + p:] = np.eye(n)
    V = np.zeros((n, s)); V[:, :n] = A; V[:, n:n + p] = omega * Bb
    x_img = _x_block_images(n, [(P3, V)], [(-rho ** 2, P1), (-1.0, P3)])
    lam_img = np.diag(np.concatenate([np.full(n, theta_hat_over_eta ** 2 * omega ** 2),
                                      -np.ones(p), np.zeros(n)]))
    return _lyapunov_system(n, s, x_img, lam_img, margin)


def check_lighttouch(A, B, N, theta_hat_over_eta, rho, omega, margin=DEFAULT_MARGIN, tol=1e-9,
                     max_iter=500) -> Certificate:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    _check_full_size(A.shape[0])
    sys = lighttouch_system(A, B, N, theta_hat_over_eta, rho, omega, margin)
    feasible, point, slack = _solve(sys, tol, max_iter)
    return _lyapunov_certificate("LightTouch", sys, A.shape[0], rho, float(omega),
                                 feasible, point, slack)


# grids and the outer search

def rho_grid(eps, step) -> np.ndarray:
    k = int(np.ceil(round((1.0 - eps) / step, 9)))
    return np.round(np.minimum(eps + step * np.arange(k + 1), 1.0), 12)


def omega_grid(eps, step) -> np.ndarray:
    """1, 1 - step, ... down to ``eps`` (descending)."""
    k = int(np.ceil(round((1.0 - eps) / step, 9)))
    return np.round(np.maximum(1.0 - step * np.arange(k + 1), eps), 12)


def search_pair(check: Callable[[float, float], Certificate], eps: float = 0.01,
                step: float = 0.01, strategy: str = "bisect"):
    """Smallest grid rate, then largest grid omega, as the nested decreasing-omega loop does.

    ``strategy="verbatim"`` walks the loop literally.  ``"bisect"`` reaches the
    same pair with binary searches, relying on feasibility being monotone
    (decreasing in omega, increasing in rho).
    """
    if not eps > 0 or not 0 < step < 1:
        raise ValueError("need eps > 0 and step in (0, 1)")
    rhos, omegas = rho_grid(eps, step), omega_grid(eps, step)
    if strategy == "verbatim":
        for rho in rhos:
            for omega in omegas:
                cert = check(float(omega), float(rho))
                if cert.feasible:
                    return float(omega), float(rho), cert
        raise SynthesisFailed("no certificate even at the smallest omega and rho = 1")
    if strategy != "bisect":
        raise ValueError(f"unknown strategy {strategy!r}")

    def first_true(pred, n):
        # smallest index with pred true, n if none; pred false-then-true
        lo, hi = 0, n
        while lo < hi:
            mid = (lo + hi) // 2
            if pred(mid):
                hi = mid
            else:
                lo = mid + 1
        return lo

    cache = {}

    def feasible(omega, rho):
        key = (omega, rho)
        if key not in cache:
            cache[key] = check(omega, rho)
        return cache[key].feasible

    w_min = float(omegas[-1])
    k_rho = first_true(lambda k: feasible(w_min, float(rhos[k])), rhos.size)
    if k_rho == rhos.size:
        raise SynthesisFailed("no certificate even at the smallest omega and rho = 1")
    rho = float(rhos[k_rho])
    k_om = first_true(lambda k: feasible(float(omegas[k]), rho), omegas.size)
    omega = float(omegas[k_om])
    return omega, rho, cache[(omega, rho)]


def synthesize_lighttouch(A, B, N, theta_hat_over_eta, eps=0.01, step=0.01, strategy="bisect",
                          margin=DEFAULT_MARGIN):
    """Largest light-touch scaling with the best certified rate on the grid.

    Returns ``(omega, rho, certificate)``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if _spectral_radius(A) >= 1:
        raise UnstableA("A is not Schur")
    _check_full_size(A.shape[0])
    return search_pair(lambda w, r: check_lighttouch(A, B, N, theta_hat_over_eta, r, w, margin),
                       eps, step, strategy)


def sweep_lighttouch(A, B, N, theta_hat_over_eta, grid, margin=DEFAULT_MARGIN):
    """All ``(omega, rho)`` in ``grid = (omegas, rhos)`` with a certificate."""
    omegas, rhos = grid
    return [(float(w), float(r)) for r in rhos for w in omegas
            if check_lighttouch(A, B, N, theta_hat_over_eta, float(r), float(w), margin).feasible]


# full-block multiplier condition

def _uniform_alpha(network) -> float:
    a = np.asarray(network.alpha, dtype=float)
    if a.size == 0 or np.ptp(a) > 1e-12:
        raise ValueError("the multiplier conditions need one common susceptibility")
    return float(a[0])


def interconnection(network, N) -> np.ndarray:
    """``diag(-tau L_F, [B_pad ... B_pad])`` with the input matrix zero-padded to square."""
    n = network.n
    alpha = _uniform_alpha(network)
    B_pad = np.zeros((n, n))
    B_pad[:, :network.m] = network.B
    Bb = stacked_input(B_pad, N)
    Delta = np.zeros((2 * n, n * (N + 1)))
    Delta[:n, :n] = network.A - alpha * np.eye(n)
    Delta[n:, n:] = Bb
    return Delta


def theorem3_system(network, N, theta_hat_over_eta, rho, omega, margin=DEFAULT_MARGIN) -> LmiSystem:
    n = network.n
    alpha = _uniform_alpha(network)
    n1 = n * (N + 1)
    q = n1 + 2 * n  # size of the multiplier
    nx, npi = n * (n + 1) // 2, q * (q + 1) // 2
    v = nx + npi + 1
    if v > MAX_VARIABLES:
        raise TooLarge(f"{v} scalar unknowns exceed the guard ({MAX_VARIABLES})")
    Delta = interconnection(network, N)

    # multiplier positivity on the graph of Delta
    H = np.vstack([np.eye(n1), Delta])
    b17 = np.zeros((v, n1, n1))
    b17[nx:nx + npi] = -sym_images(H)

    # dissipation inequality over (x, gamma, u)
    s = n * (N + 3)
    I = np.eye(n)
    P1 = np.zeros((n, s)); P1[:, :n] = alpha * I; P1[:, n:2 * n] = I; P1[:, 2 * n:3 * n] = I
    P2 = np.zeros((n, s)); P2[:, :n] = rho * I
    Pzg = np.zeros((q, s))
    Pzg[:n, :n] = I
    Pzg[n:n1, 3 * n:] = omega * np.eye(n * N)
    Pzg[n1:, n:3 * n] = np.eye(2 * n)
    b18 = np.zeros((v, s, s))
    b18[:nx] = sym_images(P1) - sym_images(P2)
    b18[nx:nx + npi] = sym_images(Pzg)
    b18[-1] = np.diag(np.concatenate([np.full(n, theta_hat_over_eta ** 2 * omega ** 2),
                                      np.zeros(2 * n), -np.ones(n * N)]))

    bx = np.zeros((v, n, n))
    bx[:nx] = -sym_images(I)
    lower, upper = _normalising_box(v, [v - 1])
    labels = (tuple(f"X{i}" for i in range(nx)) + tuple(f"Pi{i}" for i in range(npi)) + ("lam",))
    return block_diag_system([(np.zeros((n1, n1)), b17), (np.zeros((s, s)), b18),
                              (np.zeros((n, n)), bx)], v, margin=margin, lower=lower, upper=upper,
                             labels=labels)


def check_theorem3(network, N, theta_hat_over_eta, rho, omega, margin=DEFAULT_MARGIN, tol=1e-9,
                   max_iter=500) -> Certificate:
    """Full multiplier certificate for the follower network under light touch."""
    if _spectral_radius(network.A) >= 1:
        raise UnstableA("A_F is not Schur")
    sys = theorem3_system(network, N, theta_hat_over_eta, rho, omega, margin)
    feasible, point, slack = _solve(sys, tol, max_iter)
    n = network.n
    q = n * (N + 1) + 2 * n
    nx = n * (n + 1) // 2
    X = assemble_symmetric(point[:nx], n)
    Pi = assemble_symmetric(point[nx:-1], q)
    return Certificate("Theorem3", float(rho), float(omega), float(point[-1]), {"X": X, "Pi": Pi},
                       float(slack), bool(feasible), sys, np.asarray(point, dtype=float))


# size-independent scalar conditions

def deltas(network, N, theta_hat_over_eta: float = 0.0) -> ReducedParams:
    """Largest singular values of the Laplacian term and of the stacked input."""
    alpha = _uniform_alpha(network)
    D = alpha * np.eye(network.n) - network.A
    if np.allclose(D, D.T, rtol=0, atol=1e-12):
        d1 = float(np.max(np.abs(np.linalg.eigvalsh(D))))
    else:
        d1 = float(np.linalg.norm(D, 2))
    d2 = float(np.sqrt(N) * np.linalg.norm(network.B, 2)) if network.B.size else 0.0
    return ReducedParams(d1, d2, alpha, float(theta_hat_over_eta))


def reduced_system(params: ReducedParams, rho, omega, gamma_block: str = "expanded",
                   margin=DEFAULT_MARGIN) -> LmiSystem:
    """Fixed-size system in ``(chi, lam, r1, r2, t1, t2)``.

    ``gamma_block="expanded"`` couples the two interconnection channels
    through ``chi 1 1^T``; ``"printed"`` uses ``chi I`` instead.
    """
    if gamma_block not in ("expanded", "printed"):
        raise ValueError("gamma_block must be 'expanded' or 'printed'")
    a, c = params.alpha, params.theta_over_eta ** 2
    main = np.zeros((6, 4, 4))
    chi = np.array([[a * a - rho * rho, a, a, 0.0],
                    [a, 1.0, 1.0, 0.0],
                    [a, 1.0, 1.0, 0.0],
                    [0.0, 0.0, 0.0, 0.0]])
    if gamma_block == "printed":
        chi[1, 2] = chi[2, 1] = 0.0
    main[0] = chi
    main[1] = np.diag([c * omega ** 2, 0.0, 0.0, -1.0])
    main[2] = np.diag([1.0, 0.0, 0.0, 0.0])
    main[3] = np.diag([0.0, 0.0, 0.0, omega ** 2])
    main[4] = np.diag([0.0, 1.0, 0.0, 0.0])
    main[5] = np.diag([0.0, 0.0, 1.0, 0.0])
    # -chi, -r1, -r2, -(r1 + t1 d1^2), -(r2 + t2 d2^2), each <= -margin
    side = np.zeros((6, 5, 5))
    side[0, 0, 0] = -1.0
    side[2, 1, 1] = -1.0
    side[3, 2, 2] = -1.0
    side[2, 3, 3] = -1.0
    side[4, 3, 3] = -params.delta1 ** 2
    side[3, 4, 4] = -1.0
    side[5, 4, 4] = -params.delta2 ** 2
    lower, upper = _normalising_box(6, [1])
    return block_diag_system([(np.zeros((4, 4)), main), (np.zeros((5, 5)), side)], 6,
                             margin=margin, lower=lower, upper=upper, labels=REDUCED_LABELS)


def check_reduced(params: ReducedParams, rho, omega, gamma_block="expanded",
                  margin=DEFAULT_MARGIN, tol=1e-9, max_iter=500) -> Certificate:
    if not 0 <= rho <= 1:
        raise ValueError("rho must lie in [0, 1]")
    if not 0 <= omega <= 1:
        raise ValueError("omega must lie in [0, 1]")
    sys = reduced_system(params, rho, omega, gamma_block, margin)
    feasible, point, slack = _solve(sys, tol, max_iter)
    witness = dict(zip(REDUCED_LABELS, map(float, point)))
    return Certificate("Reduced", float(rho), float(omega), witness["lam"], witness, float(slack),
                       bool(feasible), sys, np.asarray(point, dtype=float))


def synthesize_reduced(params: ReducedParams, eps=0.01, step=0.01, strategy="bisect",
                       gamma_block="expanded", margin=DEFAULT_MARGIN):
    """Same outer search as :func:`synthesize_lighttouch` on the scalar condition."""
    return search_pair(lambda w, r: check_reduced(params, r, w, gamma_block, margin),
                       eps, step, strategy)


def sweep_reduced(params: ReducedParams, grid, gamma_block="expanded", margin=DEFAULT_MARGIN):
    omegas, rhos = grid
    return [(float(w), float(r)) for r in rhos for w in omegas
            if check_reduced(params, float(r), float(w), gamma_block, margin).feasible]


def lift_reduced_witness(cert: Certificate, network, N, theta_hat_over_eta) -> np.ndarray:
    """Coordinates for the full multiplier system built from a scalar witness.

    ``X = chi I``, ``R = diag(r1 I, r2 I)``, ``T = diag(t1 I, t2 I)``, ``S = 0``.
    """
    w = cert.witness
    n = network.n
    n1 = n * (N + 1)
    X = w["chi"] * np.eye(n)
    Pi = np.diag(np.concatenate([np.full(n, w["r1"]), np.full(n * N, w["r2"]),
                                 np.full(n, w["t1"]), np.full(n, w["t2"])]))
    assert Pi.shape[0] == n1 + 2 * n
    return np.concatenate([symmetric_coordinates(X), symmetric_coordinates(Pi), [w["lam"]]])


def validate_regulation(A, B, K, theta_over_eta, rho, cap=np.inf, margin=DEFAULT_MARGIN) -> dict:
    """Check an externally chosen gain: sign pattern, per-agent norm cap and the rate certificate.

    ``theta_over_eta`` must correspond to the supplied ``K``.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    K = np.atleast_2d(np.asarray(K, dtype=float))
    m = B.shape[1]
    blocks = [K[:, i:i + m] for i in range(0, K.shape[1], m)]
    nonneg = bool(np.all(K >= 0))
    norms = [float(np.linalg.norm(Ki, 2)) for Ki in blocks]
    within_cap = all(v <= cap for v in norms)
    cert = check_theorem1(A, B @ K, theta_over_eta, rho, margin)
    return {"nonnegative": nonneg, "block_norms": norms, "within_cap": within_cap,
            "certificate": cert, "valid": nonneg and within_cap and cert.feasible}
