"""Small random instances shared by several test modules."""
import numpy as np

from coevo.game import QuadraticGame
from coevo.network import LtiNetwork, SocialGraph


def random_schur(rng, n, radius=0.8):
    A = rng.normal(size=(n, n))
    return radius * A / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-9)


def random_game(rng, n=3, m=2, N=2, box=None, state_box=None):
    def spd(k, lo, hi):
        G = rng.normal(size=(k, k))
        return G @ G.T / k + rng.uniform(lo, hi) * np.eye(k)
    Q = [spd(n, 0.1, 1.0) for _ in range(N)]
    R = [spd(m, 0.5, 2.0) for _ in range(N)]
    xbar = [rng.uniform(-1, 1, size=n) for _ in range(N)]
    lo, hi = (-1e6, 1e6) if box is None else box
    slo, shi = (None, None) if state_box is None else state_box
    return QuadraticGame(Q, xbar, R, lo, hi, state_lo=slo, state_hi=shi)


def random_network(rng, n=3, m=2):
    return LtiNetwork(random_schur(rng, n), rng.uniform(0, 1, size=(n, m)))


def random_connected_graph(rng, n_F=None, m=None):
    """Random spanning tree on the followers plus extra links and influencer edges."""
    n_F = int(rng.integers(2, 30)) if n_F is None else n_F
    m = int(rng.integers(0, 4)) if m is None else m
    edges = []
    order = rng.permutation(n_F)
    for k in range(1, n_F):
        edges.append((int(order[rng.integers(0, k)]), int(order[k]), float(rng.uniform(0.2, 3))))
    present = {frozenset(e[:2]) for e in edges}
    for _ in range(int(rng.integers(0, 2 * n_F))):
        u, v = rng.choice(n_F, size=2, replace=False)
        if frozenset((u, v)) not in present:
            present.add(frozenset((u, v)))
            edges.append((int(u), int(v), float(rng.uniform(0.2, 3))))
    for j in range(m):
        for f in rng.choice(n_F, size=int(rng.integers(1, n_F + 1)), replace=False):
            edges.append((n_F + j, int(f), float(rng.uniform(0.5, 12))))
    return SocialGraph(n_F, m, edges)
