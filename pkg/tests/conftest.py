"""Shared fixtures.

The expensive objects (converged orbits, linearizations, continuation
branches, the delta sweep) are built once per session and shared across
test modules; everything derived from them is deterministic.
"""

import numpy as np
import pytest

from freewaylab import bvp, normalform, singular, spectral
from freewaylab.model import make_pcb, make_scalar_sech2


@pytest.fixture(scope="session")
def model():
    return make_pcb()


@pytest.fixture(scope="session")
def scan(model):
    return singular.rho_scan(model, (1e-4, 0.9))


@pytest.fixture(scope="session")
def left_root(scan):
    return scan.roots[0]


@pytest.fixture(scope="session")
def right_root(scan):
    return scan.roots[1]


def _solve_freeway(model, s_star, n_target):
    sing = singular.assemble_singular_orbit(model, s_star,
                                            n_target=n_target)
    return bvp.solve_freeway(model, bvp.guess_from_singular(model, sing))


@pytest.fixture(scope="session")
def freeway_orbit(model, left_root):
    return _solve_freeway(model, left_root.s, 1600)


@pytest.fixture(scope="session")
def freeway_orbit_coarse(model, left_root):
    return _solve_freeway(model, left_root.s, 800)


@pytest.fixture(scope="session")
def Ldata(model, freeway_orbit):
    return spectral.linearize(model, freeway_orbit)


@pytest.fixture(scope="session")
def Ldata_coarse(model, freeway_orbit_coarse):
    return spectral.linearize(model, freeway_orbit_coarse)


@pytest.fixture(scope="session")
def pencil_report(Ldata):
    return spectral.pencil_spectrum(Ldata)


@pytest.fixture(scope="session")
def pencil_report_coarse(Ldata_coarse):
    return spectral.pencil_spectrum(Ldata_coarse)


@pytest.fixture(scope="session")
def coercivity(Ldata):
    return spectral.coercivity_margin(Ldata)


@pytest.fixture(scope="session")
def coercivity_coarse(Ldata_coarse):
    return spectral.coercivity_margin(Ldata_coarse)


@pytest.fixture(scope="session")
def branch(model, freeway_orbit):
    return bvp.continue_branch(model, freeway_orbit, mu_max=1.2)


@pytest.fixture(scope="session")
def sn(model):
    return normalform.pcb_saddle_node(model)


@pytest.fixture(scope="session")
def ladder(model, branch, sn):
    offsets = np.array([1, 2, 4, 8, 16]) * 1e-4
    return normalform.tollroad_ladder(model, branch.fold.orbit, sn, offsets)


@pytest.fixture(scope="session")
def quad_fit(ladder, sn, branch):
    samples = [(mu, F1) for mu, F1, _ in ladder]
    return normalform.verify_quadratic_law(samples, sn,
                                           mu_fold=branch.fold.mu_sn)


@pytest.fixture(scope="session")
def tollroad_orbit(ladder):
    return ladder[2][2]


@pytest.fixture(scope="session")
def scalar_model():
    return make_scalar_sech2()


@pytest.fixture(scope="session")
def scalar_orbit(scalar_model):
    z = np.linspace(-30.0, 30.0, 1501)
    u = (1.0 / np.cosh(0.5 * z) ** 2)[:, None]
    p = (-np.cosh(0.5 * z) ** -2 * np.tanh(0.5 * z))[:, None]
    zero = np.zeros_like(u)
    return bvp.ConnectionOrbit(grid=z, u_values=u, p_values=p,
                               v_values=zero, q_values=zero,
                               orbit_type="freeway", residual_norm=0.0,
                               phase_anchor=0.0, mu=0.0, delta=1.0)


@pytest.fixture(scope="session")
def scalar_report(scalar_model, scalar_orbit):
    Ld = spectral.linearize(scalar_model, scalar_orbit)
    return spectral.pencil_spectrum(Ld)


def _sweep_one(delta, n_target):
    model = make_pcb().with_delta(delta)
    scan = singular.rho_scan(model, (1e-4, 0.9))
    s_star = scan.roots[0].s
    orb = _solve_freeway(model, s_star, n_target)
    gap = abs(orb.u_values[:, 0].max() - s_star)
    branch = bvp.continue_branch(model, orb, mu_max=1.2)
    fold = branch.fold
    sn = normalform.pcb_saddle_node(model)
    dist = psi0_rel_dist(model, fold, sn)
    offsets = np.array([1, 2, 4, 8, 16]) * 1e-4
    lad = normalform.tollroad_ladder(model, fold.orbit, sn, offsets)
    fit = normalform.verify_quadratic_law(
        [(mu, F1) for mu, F1, _ in lad], sn, mu_fold=fold.mu_sn)
    return {"delta": delta, "gap": gap, "mu_fold": fold.mu_sn,
            "mu_sn": sn.mu_sn, "psi0_dist": float(dist), "fit": fit}


def psi0_rel_dist(model, fold, sn):
    """Weighted relative L2 distance of the leading kernel profile to the
    numeric fold null vector, on the fold orbit's grid."""
    z = fold.orbit.grid
    w = np.zeros(len(z))
    dz = np.diff(z)
    w[:-1] += 0.5 * dz
    w[1:] += 0.5 * dz
    lead = normalform.psi0_leading(model, sn.s_sn, z, mu=sn.mu_sn)
    return float(np.sqrt(np.sum(w[:, None] * (lead - fold.psi0) ** 2)
                         / np.sum(w[:, None] * fold.psi0 ** 2)))


@pytest.fixture(scope="session")
def delta_sweep(model, freeway_orbit, left_root, branch, sn, quad_fit):
    """Companion data at delta = 0.1 and 0.025; 0.05 from shared fixtures."""
    mid = {"delta": 0.05,
           "gap": abs(freeway_orbit.u_values[:, 0].max() - left_root.s),
           "mu_fold": branch.fold.mu_sn, "mu_sn": sn.mu_sn,
           "psi0_dist": psi0_rel_dist(model, branch.fold, sn),
           "fit": quad_fit}
    return {0.1: _sweep_one(0.1, 1600), 0.05: mid,
            0.025: _sweep_one(0.025, 2600)}
