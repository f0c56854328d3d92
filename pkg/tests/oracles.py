"""Reference computations that share no code with the package."""
from itertools import combinations, product

import numpy as np


def grid_min_lambda_max(F0, basis, lo, hi, pitch):
    """Smallest lambda_max(F0 + sum x_i A_i) over a uniform grid on the box."""
    axes = [np.arange(l, h + 0.5 * pitch, pitch) for l, h in zip(lo, hi)]
    pts = np.array(list(product(*axes)))
    best, arg = np.inf, None
    for chunk in np.array_split(pts, max(1, len(pts) // 20000)):
        F = F0[None] + np.einsum("kv,vij->kij", chunk, basis)
        lam = np.linalg.eigvalsh(F)[:, -1]
        i = int(np.argmin(lam))
        if lam[i] < best:
            best, arg = float(lam[i]), chunk[i]
    return best, arg


def random_symmetric(rng, s, scale=1.0):
    G = rng.normal(size=(s, s)) * scale
    return 0.5 * (G + G.T)


def active_set_projection(z, A, b, tol=1e-10):
    """Projection of z onto {y : A y <= b} by enumerating active sets of size <= dim."""
    n = z.size
    rows = range(A.shape[0])
    best, best_d = None, np.inf
    for k in range(0, n + 1):
        for S in combinations(rows, k):
            S = list(S)
            if k:
                As, bs = A[S], b[S]
                G = As @ As.T
                if np.linalg.matrix_rank(G) < k:
                    continue
                mu = np.linalg.solve(G, As @ z - bs)
                if np.any(mu < -tol):
                    continue
                y = z - As.T @ mu
            else:
                y = z.copy()
            if np.all(A @ y <= b + 1e-9):
                d = np.linalg.norm(y - z)
                if d < best_d:
                    best, best_d = y, d
    return best


def box_rows(lo, hi):
    n = lo.size
    A = np.vstack([np.eye(n), -np.eye(n)])
    return A, np.concatenate([hi, -lo])


def reduced_zero_omega_boundary(alpha, delta1):
    """At omega = 0 the scalar conditions hold exactly when rho > alpha + delta1."""
    return alpha + delta1


def reduced_zero_omega_grid(alpha, delta1, rho, pitch=1e-3, s_max=50.0):
    """Grid over the single free ratio s left after eliminating the other scalars.

    With chi = 1 and t1 = -1 - s, feasibility needs
    (rho^2 - alpha^2 - (1 + s) delta1^2) s > alpha^2 for some s > 0.
    """
    s = np.arange(pitch, s_max, pitch)
    return bool(np.any((rho ** 2 - alpha ** 2 - (1 + s) * delta1 ** 2) * s > alpha ** 2))
