"""Dressed-interface energy of a circular bilayer.

Wraps the flat freeway profile around a circle of radius R, evaluates the
full functionalized energy by radial quadrature, and compares it with the
two closed-form leading-order predictions: the gradient-weighted form and
the residual-expansion form the quadrature actually converges to.

Run from the repository root:

    python3 demos/dressed_interface_energy.py        (about one minute)
"""

from freewaylab import bvp, energy, singular
from freewaylab.model import make_pcb


def main():
    model = make_pcb()
    scan = singular.rho_scan(model, (1e-4, 0.9))
    sing = singular.assemble_singular_orbit(model, scan.roots[0].s,
                                            n_target=1600)
    orbit = bvp.solve_freeway(model, bvp.guess_from_singular(model, sing))

    d, R, ell = 2, 1.0, 0.2
    print(f"dressing: d = {d}, R = {R}, ell = {ell}")
    print(f"{'eps':>8} {'full energy':>14} {'grad-weighted':>14} "
          f"{'ratio':>9} {'corrected':>14} {'ratio':>9}")
    for eps in (0.02, 0.01, 0.005):
        dressed = energy.dress(model, orbit, d=d, R=R, eps=eps, ell=ell)
        full = energy.full_energy_radial(model, dressed)
        pred = energy.sharp_interface_prediction(model, orbit, d, R, eps)
        corr = energy.sharp_interface_prediction_corrected(model, orbit,
                                                           d, R, eps)
        print(f"{eps:8.3f} {full:14.6e} {pred:14.6e} {full / pred:9.5f} "
              f"{corr:14.6e} {full / corr:9.6f}")

    print("\nthe gradient-weighted ratio is flat in eps (a constant "
          "discrepancy:\nhalf prefactor and D^2 vs D^4 weighting); the "
          "corrected form matches\nto O(eps).")


if __name__ == "__main__":
    main()
