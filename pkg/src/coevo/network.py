"""Follower/influencer graphs, their sampled opinion dynamics and random instances."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .exceptions import BadAlpha, Disconnected, InfeasibleTopology
from .game import QuadraticGame

# reach as a fraction of n_F and edge weight for each influencer type
INFLUENCER_TYPES = (
    ("small", 0.1, 1.2),
    ("regular", 0.2, 2.5),
    ("rising", 0.5, 7.5),
    ("macro", 1.0, 12.0),
)
FOLLOWER_WEIGHT = 1.0
MAX_RESAMPLES = 1000


@dataclass
class SocialGraph:
    """Undirected weighted graph; nodes ``0..n_F-1`` are followers, ``n_F..n_F+m-1`` influencers."""

    n_F: int
    m: int
    edges: list = field(default_factory=list)  # (tail, head, weight)

    def __post_init__(self):
        if self.n_F < 1 or self.m < 0:
            raise ValueError("need n_F >= 1 and m >= 0")
        total = self.n_F + self.m
        for u, v, w in self.edges:
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < total and 0 <= v < total):
                raise ValueError(f"edge ({u}, {v}) references an unknown node")
            if not w > 0:
                raise ValueError("edge weights must be positive")
            if u >= self.n_F and v >= self.n_F:
                raise ValueError("influencers are only linked to followers")

    def incidence(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(D_F, D_I, w)``: incidence rows of followers and influencers, edge weights."""
        E = len(self.edges)
        D = np.zeros((self.n_F + self.m, E))
        w = np.empty(E)
        for e, (u, v, wt) in enumerate(self.edges):
            D[u, e] = -1.0
            D[v, e] = 1.0
            w[e] = wt
        return D[:self.n_F], D[self.n_F:], w

    def follower_laplacian(self) -> np.ndarray:
        D_F, _, w = self.incidence()
        return (D_F * w) @ D_F.T

    def is_connected(self) -> bool:
        """Followers plus every influencer with at least one link form one component."""
        linked = set(range(self.n_F))
        for u, v, _ in self.edges:
            linked.update((u, v))
        nodes = sorted(linked)
        index = {k: i for i, k in enumerate(nodes)}
        if not self.edges:
            return len(nodes) == 1
        rows = [index[u] for u, _, _ in self.edges]
        cols = [index[v] for _, v, _ in self.edges]
        adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(nodes), len(nodes)))
        n_comp, _ = connected_components(adj, directed=False)
        return n_comp == 1

    def write_csv(self, path) -> None:
        """Edge list with columns src, dst, weight, kind (FF or IF)."""
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["src", "dst", "weight", "kind"])
            for u, v, w in self.edges:
                kind = "FF" if u < self.n_F and v < self.n_F else "IF"
                out.writerow([u, v, repr(float(w)), kind])


@dataclass
class LtiNetwork:
    """``x+ = A x + B u``; ``laplacian`` is the follower block when built from a graph."""

    A: np.ndarray
    B: np.ndarray
    tau: float = 0.0
    alpha: np.ndarray | None = None
    laplacian: np.ndarray | None = None

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.asarray(self.B, dtype=float).reshape(self.A.shape[0], -1)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


def _check_alpha(alpha, n_F) -> np.ndarray:
    a = np.broadcast_to(np.asarray(alpha, dtype=float), (n_F,)).copy()
    if np.any(a <= 0) or np.any(a > 1):
        raise BadAlpha("susceptibilities must lie in (0, 1]")
    return a


def build_lti(graph: SocialGraph, alpha, tau: float) -> LtiNetwork:
    """``A_F = diag(alpha) - tau D_F W D_F^T`` and ``B_F = -tau D_F W D_I^T``."""
    a = _check_alpha(alpha, graph.n_F)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if not graph.is_connected():
        raise Disconnected("graph is not connected")
    D_F, D_I, w = graph.incidence()
    L_F = (D_F * w) @ D_F.T
    B_F = -tau * (D_F * w) @ D_I.T
    A_F = np.diag(a) - tau * L_F
    return LtiNetwork(0.5 * (A_F + A_F.T), B_F.reshape(graph.n_F, graph.m), tau, a, L_F)


def max_stable_tau(graph: SocialGraph, alpha) -> float:
    """Upper end of the sampling-time interval keeping ``A_F`` Schur."""
    a = _check_alpha(alpha, graph.n_F)
    if not graph.is_connected():
        raise Disconnected("graph is not connected")
    lam = np.linalg.eigvalsh(graph.follower_laplacian())[-1]
    return float(np.min(1.0 + a) / lam) if lam > 0 else np.inf


class CaseStudy(NamedTuple):
    graph: SocialGraph
    game: QuadraticGame
    alpha: float
    tau_factor: float
    network: LtiNetwork


def influencer_type(j: int) -> tuple[str, float, float]:
    return INFLUENCER_TYPES[j % len(INFLUENCER_TYPES)]


def generate_case_study(seed: int, n_F: int, m: int, N: int, edge_budget: int | None = None,
                        alpha: float = 0.75, tau_factor: float = 0.99) -> CaseStudy:
    """Random advertising market: N firms, m influencers, n_F followers.

    ``edge_budget`` counts follower-follower links (default ``4 n_F``, capped at
    the complete graph).  The
    sampling time is ``tau_factor`` times the stability bound.
    """
    if not (n_F >= m >= 1 and N >= 1):
        raise ValueError("need n_F >= m >= 1 and N >= 1")
    if not 0 < tau_factor < 1:
        raise ValueError("tau_factor must lie in (0, 1)")
    max_edges = n_F * (n_F - 1) // 2
    budget = min(4 * n_F, max_edges) if edge_budget is None else int(edge_budget)
    if budget < n_F - 1 or budget > max_edges:
        raise InfeasibleTopology(f"{budget} follower links cannot connect {n_F} followers "
                                 f"(need between {n_F - 1} and {max_edges})")
    rng = np.random.default_rng(seed)

    # game data
    R = [rng.uniform(1, 2) * np.eye(m) for _ in range(N)]
    Q = [rng.uniform(0.001, 0.1) * np.eye(n_F) for _ in range(N)]
    power = rng.uniform(50, 500, size=N) * n_F
    price = rng.uniform(1.8, 2.25, size=N)
    share = rng.uniform(0.02, 0.08, size=N)
    income = rng.uniform(400, 2000, size=m)
    xbar = [(power[i] / n_F) * np.ones(n_F) for i in range(N)]
    cap = power * price * share

    # influencer links
    influencer_edges = []
    for j in range(m):
        _, frac, weight = influencer_type(j)
        reach = max(1, int(round(frac * n_F)))
        for f in np.sort(rng.choice(n_F, size=reach, replace=False)):
            influencer_edges.append((n_F + j, int(f), weight))

    iu, ju = np.triu_indices(n_F, k=1)
    for _ in range(MAX_RESAMPLES):
        pick = np.sort(rng.choice(iu.size, size=budget, replace=False))
        ff = [(int(iu[e]), int(ju[e]), FOLLOWER_WEIGHT) for e in pick]
        graph = SocialGraph(n_F, m, ff + influencer_edges)
        if graph.is_connected():
            break
    else:
        raise InfeasibleTopology(f"no connected graph after {MAX_RESAMPLES} samples")

    tau = tau_factor * max_stable_tau(graph, alpha)
    network = build_lti(graph, alpha, tau)
    C = np.kron(np.ones((1, N)), np.eye(m))  # sum_i y_i^j <= income_j
    game = QuadraticGame(Q, xbar, R, np.zeros(N * m), np.repeat(cap, m), C, income,
                         np.zeros(n_F), np.full(n_F, sum(v[0] for v in xbar)))
    return CaseStudy(graph, game, float(alpha), float(tau_factor), network)
