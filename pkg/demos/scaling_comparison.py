"""How long the light-touch search takes as the follower network grows.

The full conditions carry a matrix unknown per state, so their cost grows
quickly with the number of followers; the scalar conditions have six unknowns
whatever the size.  The full family is only run on small networks.
"""
import time

import numpy as np

from coevo.certify import FULL_MAX_STATE, synthesize_lighttouch, synthesize_reduced
from coevo.cli import reduced_params
from coevo.game import theta_hat_over_eta
from coevo.network import generate_case_study

SEEDS = range(3)


def timed(fn):
    t0 = time.perf_counter()
    omega, rho, _ = fn()
    return time.perf_counter() - t0, omega, rho


def main():
    print(f"{'n_F':>5} {'method':>8} {'time [s]':>9} {'omega':>6} {'rho':>5}")
    for n_F in (10, 20, 40, 100, 200, 1000):
        rows = {"reduced": [], "full": []}
        for seed in SEEDS:
            cs = generate_case_study(seed, n_F, 5, 10, edge_budget=min(4 * n_F, n_F * (n_F - 1) // 2),
                                     tau_factor=0.02)
            net = cs.network
            rows["reduced"].append(timed(lambda: synthesize_reduced(reduced_params(cs.game, net))))
            if n_F <= min(FULL_MAX_STATE, 20):
                c = theta_hat_over_eta(cs.game, net.A, net.B)
                rows["full"].append(timed(lambda: synthesize_lighttouch(net.A, net.B, 10, c)))
        for method, vals in rows.items():
            if vals:
                t, w, r = np.mean(vals, axis=0)
                print(f"{n_F:>5} {method:>8} {t:9.3f} {w:6.2f} {r:5.2f}")


if __name__ == "__main__":
    main()
