"""One agent steering a one-dimensional state.

The state follows x+ = 0.5 x + y and the agent wants A x + y close to 1 while
paying y^2 / 2.  Everything can be checked by hand: the equilibrium decision
is y*(x) = (1 - 0.5 x) / 2, so the closed loop is x+ = 0.25 x + 0.5 with fixed
point x* = 2/3 and contraction factor 0.25.
"""
import numpy as np

from coevo.certify import check_theorem1
from coevo.coevolve import Tolerances, contraction_estimate, equilibrium, run, verify_equilibrium
from coevo.game import ControllerGain, build_pseudogradient
from coevo.gne import gne_map
from coevo.scenario import scalar_instance


def main():
    game, net = scalar_instance()
    gain = ControllerGain.light_touch(1.0)

    pg = build_pseudogradient(game, gain, net.A, net.B)
    print("pseudo-gradient  F(y, x) = M y + N_x x + c")
    print(f"  M = {pg.M[0, 0]:.3f}, N_x = {pg.N_x[0, 0]:.3f}, c = {pg.c[0]:.3f}")
    print(f"  eta = {pg.eta:.3f}, ell = {pg.ell:.3f}, theta = {pg.theta_exact:.3f}")

    print("\nequilibrium decision as the state moves")
    for x in (0.0, 0.5, 1.0, 1.5):
        y = gne_map(game, net, gain, [x], tol=1e-12).y_star[0]
        print(f"  x = {x:.1f}: y* = {y:.6f}  (hand formula {(1 - 0.5 * x) / 2:.6f})")

    tols = Tolerances(state=1e-13, gne=1e-13)
    trace = run(game, net, gain, [0.0], 60, tols)
    x_star, y_star = equilibrium(game, net, gain, tols)
    print(f"\nloop stopped after {len(trace.steps)} steps at x = {trace.final_state[0]:.12f}")
    print(f"equilibrium x* = {x_star[0]:.12f}, y* = {y_star[0]:.12f}")
    report = verify_equilibrium(game, net, gain, x_star, y_star)
    print(f"steady-state residual {report['steady_state_residual']:.1e}, "
          f"equilibrium residual {report['gne_residual']:.1e}")
    print(f"measured contraction factor {contraction_estimate(trace, x_star, floor=1e-10):.4f}")

    ratio = pg.theta_exact / pg.eta
    BK = net.B @ gain.full(1, 1)
    print("\nrate certificates (smallest rate on a 0.01 grid with a certificate):")
    for rho in np.round(np.arange(0.70, 0.80, 0.01), 2):
        cert = check_theorem1(net.A, BK, ratio, rho)
        if cert.feasible:
            print(f"  rho = {rho:.2f}: X = {cert.witness['X'][0, 0]:.4f}, lambda = {cert.lam:.4f}")
            break
    print("  the certificate only uses the Lipschitz bound, so it is more conservative "
          "than the measured 0.25")


if __name__ == "__main__":
    main()
