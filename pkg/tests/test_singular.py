"""Slow-fast construction: fast core, jump, existence function, assembly."""

import numpy as np
import pytest

from freewaylab import singular
from freewaylab.errors import PreconditionError
from freewaylab.model import PcbParams, VectorFieldModel, make_pcb


# -- fast homoclinic ---------------------------------------------------------


def unit_coupling_model():
    """Parameters with f identically 1 (f0=1, f1=0)."""
    return make_pcb(PcbParams(f1=0.0))


def test_fast_core_peak_with_unit_coupling():
    m = unit_coupling_model()
    core = singular.fast_homoclinic(m, 0.3)
    assert np.isclose(core(0.0), 1.5, rtol=0, atol=1e-14)


def test_fast_core_decay(model):
    core = singular.fast_homoclinic(model, 0.2)
    assert abs(core(40.0)) < 1e-15
    assert abs(core(-40.0)) < 1e-15


def test_fast_core_even_monotone(model):
    core = singular.fast_homoclinic(model, 0.2)
    zeta = np.linspace(0.0, 30.0, 400)
    assert np.allclose(core(zeta), core(-zeta), atol=1e-15)
    vals = core(zeta)
    assert np.all(np.diff(vals) < 0)


def test_fast_core_l2_with_unit_coupling():
    # int u2h^2 = (9/4) int sech^4(zeta/2) dzeta = (9/4)(8/3) = 6
    m = unit_coupling_model()
    core = singular.fast_homoclinic(m, 0.0)
    zeta = np.linspace(-60.0, 60.0, 20001)
    val = np.trapezoid(core(zeta) ** 2, zeta)
    assert np.isclose(val, 6.0, rtol=0, atol=1e-8)
    sech4 = np.trapezoid(np.cosh(0.5 * zeta) ** -4, zeta)
    assert np.isclose(sech4, 8.0 / 3.0, atol=1e-10)


def test_fast_generic_solver_matches_closed_form(model):
    s = 0.25
    closed = singular.fast_homoclinic(model, s)
    generic = singular.solve_fast_generic(model, s,
                                          guess_amp=closed.amplitude)
    zeta = np.linspace(-10.0, 10.0, 201)
    assert np.max(np.abs(generic(zeta) - closed(zeta))) < 1e-4


# -- jump function -----------------------------------------------------------


def test_delta_p_closed_form_values(model):
    # T(s) = (1 + mu)(0.1 + 0.4 s); jump is -2 T
    assert np.isclose(singular.delta_p(model, 0.5), -0.6, atol=1e-15)
    s03 = (0.3 / model.params.t1) - model.params.t0 / model.params.t1
    assert np.isclose(singular.delta_p(model, s03), -0.6, atol=1e-14)


def test_delta_p_zero_takeoff():
    m = make_pcb(PcbParams(t0=0.0))
    assert singular.delta_p(m, 0.0) == 0.0


def test_delta_p_quadrature_matches_closed_form(model):
    for s in np.linspace(0.02, 0.8, 9):
        quad = singular.delta_p_quadrature(model, s)
        assert abs(quad - (-2.0 * model.take_off(s))) <= 1e-8


# -- existence function ------------------------------------------------------


def test_rho_exact_balance_is_zero(model):
    # wherever W(s) = T(s)^2 / 2 exactly, rho vanishes; manufacture the
    # balance by scaling the well
    s = 0.3
    T = model.take_off(s)
    cw = 0.5 * T * T / (make_pcb(PcbParams(c_w=1.0)).W(s))
    m = make_pcb(PcbParams(c_w=float(cw)))
    assert abs(singular.rho(m, s)) < 1e-15


def test_rho_two_paths_agree(model):
    for s in np.linspace(0.02, 0.85, 100):
        assert abs(singular.rho(model, s)
                   - singular.rho_generic(model, s)) <= 1e-10


def test_rho_scan_matches_bisection_oracle(model, scan):
    u0 = model.well_positive_zero()
    s = np.linspace(1e-4, u0, 10 ** 4)
    vals = np.array([singular.rho(model, x) for x in s])
    oracle = []
    for i in range(len(s) - 1):
        if vals[i] * vals[i + 1] < 0:
            lo, hi = s[i], s[i + 1]
            flo = vals[i]
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                fm = singular.rho(model, mid)
                if flo * fm <= 0:
                    hi = mid
                else:
                    lo, flo = mid, fm
            oracle.append(0.5 * (lo + hi))
    in_range = [r for r in scan.roots if r.s <= u0]
    assert len(oracle) == len(in_range)
    for root, ref in zip(in_range, oracle):
        assert abs(root.s - ref) <= 1e-10


def test_rho_root_residuals_and_transversality(model, scan):
    assert len(scan.roots) == 2
    assert scan.tangency_candidates == []
    for root in scan.roots:
        assert abs(singular.rho(model, root.s)) <= 1e-12
        assert root.transverse
    assert scan.roots[0].rho_prime > 0
    assert scan.roots[1].rho_prime < 0


def test_rho_scan_no_sign_change_empty():
    m = make_pcb()
    scan = singular.rho_scan(m, (0.45, 0.9), n_samples=100)
    # rho < 0 on the far side of the right root up to 0.9
    assert scan.roots == [] or all(0.45 <= r.s <= 0.9 for r in scan.roots)
    scan2 = singular.rho_scan(m, (0.6, 0.9), n_samples=50)
    assert scan2.roots == []


# -- take-off condition ------------------------------------------------------


def test_takeoff_condition_true_at_roots(model, scan):
    for root in scan.roots:
        assert singular.takeoff_condition(model, root.s)
        assert root.condition_ok


def test_takeoff_condition_false_for_zero_jump():
    # synthetic planar field with the same fast structure but T == 0:
    # the jump vanishes and the strict inequality fails
    m = make_pcb(PcbParams(t0=0.0))
    assert singular.delta_p(m, 0.0) == 0.0
    assert not singular.takeoff_condition(m, 0.0)


def test_slow_level_set_identity(model):
    u0 = model.well_positive_zero()
    for s in np.linspace(1e-3, u0 - 1e-6, 200):
        w = singular.slow_potential(model, s)
        omega = np.sqrt(2.0 * max(w, 0.0))
        assert abs(0.5 * omega ** 2 - w) <= 1e-14


# -- assembled singular orbit ------------------------------------------------


def test_assembly_tail_decay_and_peak(model, left_root):
    orb = singular.assemble_singular_orbit(model, left_root.s)
    assert abs(orb.slow_tail(orb.z[-1])) < 1e-10
    assert np.isclose(orb.u[:, 0].max(), left_root.s, atol=1e-12)
    i_max = np.argmax(orb.u[:, 0])
    assert abs(orb.z[i_max]) < np.sqrt(model.delta)


def test_assembly_symmetry(model, left_root):
    orb = singular.assemble_singular_orbit(model, left_root.s)
    assert np.allclose(orb.u, orb.u[::-1], atol=1e-9)


def test_assembly_rejects_failed_condition():
    m = make_pcb(PcbParams(t0=0.0))
    with pytest.raises(PreconditionError):
        singular.assemble_singular_orbit(m, 0.0)


def test_assembly_residual_shrinks_with_delta(model, left_root):
    res = {}
    for delta in (0.1, 0.05, 0.025):
        m = make_pcb().with_delta(delta)
        scan = singular.rho_scan(m, (1e-4, 0.9))
        orb = singular.assemble_singular_orbit(m, scan.roots[0].s)
        res[delta] = singular.singular_residual(m, orb)
    # dominated by the matching gap ~ sqrt(delta): halving at each
    # quartering of delta, with slack for the subdominant defects
    assert res[0.05] < res[0.1]
    assert res[0.025] < res[0.05]
    assert res[0.025] <= 0.65 * res[0.1]
