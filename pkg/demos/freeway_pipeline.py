"""Freeway pipeline walkthrough.

Scans the existence function for transverse roots, solves the zero-energy
(freeway) connecting orbit seeded by the slow-fast assembly, and runs the
pearling spectrum and coercivity diagnostics on the converged profile.

Run from the repository root:

    python3 demos/freeway_pipeline.py
"""

import numpy as np

from freewaylab import bvp, singular, spectral
from freewaylab.model import make_pcb


def main():
    model = make_pcb()
    print(f"model: delta = {model.delta}, mu = {model.mu}")

    # 1. existence function roots
    scan = singular.rho_scan(model, (1e-4, 0.9))
    print(f"\nexistence-function roots on (1e-4, 0.9): {len(scan.roots)}")
    for r in scan.roots:
        print(f"  s = {r.s:.9f}  rho' = {r.rho_prime:+.4f}  "
              f"take-off condition {'ok' if r.condition_ok else 'FAILS'}")

    # 2. singular assembly and the collocation solve
    root = scan.roots[0]
    sing = singular.assemble_singular_orbit(model, root.s, n_target=1600)
    print(f"\nassembled singular orbit: {len(sing.z)} nodes, "
          f"defect {singular.singular_residual(model, sing):.3e}")

    orbit = bvp.solve_freeway(model, bvp.guess_from_singular(model, sing))
    i0 = np.argmin(np.abs(orbit.grid))
    print("converged freeway orbit:")
    print(f"  residual        {orbit.residual_norm:.3e}")
    print(f"  u(0)            ({orbit.u_values[i0, 0]:.6f}, "
          f"{orbit.u_values[i0, 1]:.6f})")
    print(f"  amplitude gap   {abs(orbit.u_values[:, 0].max() - root.s):.3e}"
          f"  (shrinks like delta)")

    # 3. pearling spectrum of the linearization
    Ld = spectral.linearize(model, orbit)
    rep = spectral.pencil_spectrum(Ld)
    print("\npencil spectrum in the default window:")
    print(f"  verdict         {rep.verdict}")
    print(f"  kernel          dim {rep.kernel_dim}, "
          f"parities {rep.kernel_parities}")
    print(f"  positive real   {rep.positive_real}")

    # 4. coercivity margin over the transverse wavenumber
    out = spectral.coercivity_margin(Ld)
    print("\ncoercivity margin (translation mode deflated):")
    print(f"  margin          {out['margin']:.6f} at k = "
          f"{out['argmin_k']:.3f}")

    # 5. fast Sturm-Liouville cross-check
    vals, parities = spectral.fast_sl_spectrum(model, root.s)
    print("\nfast Sturm-Liouville eigenvalues (expect -3/4, 0, 5/4):")
    for v, p in zip(vals, parities):
        print(f"  {v:+.6f}  ({p})")


if __name__ == "__main__":
    main()
