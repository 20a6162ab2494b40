"""Reduced and full energies, conserved quantity, interface dressing."""

import numpy as np
import pytest

from freewaylab import bvp, energy
from freewaylab.errors import (DomainError, NumericalError,
                               PreconditionError)


def _copy_orbit(orbit, **overrides):
    fields = dict(grid=orbit.grid, u_values=orbit.u_values,
                  p_values=orbit.p_values, v_values=orbit.v_values,
                  q_values=orbit.q_values, orbit_type=orbit.orbit_type,
                  residual_norm=orbit.residual_norm,
                  phase_anchor=orbit.phase_anchor, mu=orbit.mu,
                  delta=orbit.delta)
    fields.update(overrides)
    return bvp.ConnectionOrbit(**fields)


# -- reduced energy ----------------------------------------------------------


def test_freeway_energy_identically_zero(model, freeway_orbit):
    assert energy.reduced_energy(model, freeway_orbit) == 0.0


def test_tollroad_energy_positive_and_cross_checked(model, tollroad_orbit):
    m = model.with_mu(tollroad_orbit.mu)
    e = energy.reduced_energy(m, tollroad_orbit)
    assert e > 0.0
    e2 = energy.reduced_energy(m, tollroad_orbit, cross_check=True)
    assert e2 == e


def test_tollroad_energy_cross_check_detects_tampering(model,
                                                       tollroad_orbit):
    bad = _copy_orbit(tollroad_orbit,
                      v_values=tollroad_orbit.v_values + 1e-3)
    m = model.with_mu(tollroad_orbit.mu)
    with pytest.raises(NumericalError):
        energy.reduced_energy(m, bad, cross_check=True)


def test_tollroad_energy_translation_invariant(model, tollroad_orbit):
    m = model.with_mu(tollroad_orbit.mu)
    shifted = _copy_orbit(tollroad_orbit, grid=tollroad_orbit.grid + 0.7)
    a = energy.reduced_energy(m, tollroad_orbit)
    b = energy.reduced_energy(m, shifted)
    assert abs(a - b) <= 1e-12


def test_tollroad_energy_equals_half_v_norm(model, tollroad_orbit):
    m = model.with_mu(tollroad_orbit.mu)
    e = energy.reduced_energy(m, tollroad_orbit)
    direct = 0.5 * energy._spline_quad_sq(tollroad_orbit.grid,
                                          tollroad_orbit.v_values)
    assert abs(e - direct) <= 1e-10


# -- conserved quantity ------------------------------------------------------


def test_hamiltonian_freeway_exactly_zero(model, freeway_orbit):
    _, hmax = energy.hamiltonian_trace(model, freeway_orbit)
    assert hmax == 0.0


def test_hamiltonian_perturbation_scales_linearly(model, tollroad_orbit):
    m = model.with_mu(tollroad_orbit.mu)
    _, h0 = energy.hamiltonian_trace(m, tollroad_orbit)
    devs = {}
    for a in (1e-3, 1e-2):
        pert = _copy_orbit(tollroad_orbit,
                           v_values=tollroad_orbit.v_values
                           + a * np.exp(-tollroad_orbit.grid[:, None] ** 2))
        _, h = energy.hamiltonian_trace(m, pert)
        devs[a] = h - h0
    ratio = devs[1e-2] / devs[1e-3]
    assert 5.0 <= ratio <= 20.0


# -- cutoff ------------------------------------------------------------------


def test_smoothstep_range_and_monotone():
    t = np.linspace(-0.5, 1.5, 401)
    s = energy.smoothstep7(t)
    assert s[0] == 0.0 and s[-1] == 1.0
    assert np.all(np.diff(s) >= 0)
    # C^1 at the seams
    h = 1e-6
    for t0 in (0.0, 1.0):
        slope = (energy.smoothstep7(t0 + h) - energy.smoothstep7(t0 - h)) / (2 * h)
        assert abs(slope) <= 1e-4


def test_bump_support_and_symmetry():
    ell = 0.2
    y = np.linspace(-1.0, 1.0, 801)
    xi = energy.bump(y, ell)
    assert np.all(xi[np.abs(y) <= ell] == 1.0)
    assert np.all(xi[np.abs(y) >= 2 * ell] == 0.0)
    assert np.allclose(xi, xi[::-1], atol=1e-15)
    inside = (y >= ell) & (y <= 2 * ell)
    assert np.all(np.diff(xi[inside]) <= 0)


# -- dressed profile ---------------------------------------------------------


@pytest.fixture(scope="module")
def dressed(model, freeway_orbit):
    return energy.dress(model, freeway_orbit, d=2, R=1.0, eps=0.02,
                        ell=0.2)


def test_dress_far_field_rest_state(dressed):
    r = np.array([0.1, 0.3, 1.0 + 2 * 0.2, 1.0 + 0.9])
    u = dressed.u(r)
    assert np.max(np.abs(u - dressed.a0[None, :])) == 0.0


def test_dress_center_matches_orbit_peak(model, freeway_orbit, dressed):
    i0 = np.argmin(np.abs(freeway_orbit.grid))
    u_R = dressed.u(np.array([1.0]))[0]
    assert np.max(np.abs(u_R - freeway_orbit.u_values[i0])) <= 1e-8


def test_dress_scale_flag(model, freeway_orbit):
    big = energy.dress(model, freeway_orbit, d=2, R=1.0, eps=0.06, ell=0.2)
    assert big.scale_flag == "eps-not-below-delta"
    small = energy.dress(model, freeway_orbit, d=2, R=1.0, eps=0.02,
                         ell=0.2)
    assert small.scale_flag is None


def test_dress_rejects_bad_parameters(model, freeway_orbit):
    with pytest.raises(DomainError):
        energy.dress(model, freeway_orbit, d=4, R=1.0, eps=0.02, ell=0.2)
    with pytest.raises(PreconditionError):
        energy.dress(model, freeway_orbit, d=2, R=1.0, eps=0.2, ell=0.2)
    with pytest.raises(PreconditionError):
        energy.dress(model, freeway_orbit, d=2, R=1.0, eps=0.02, ell=0.3)


def test_dress_seam_tail_shrinks_with_eps(model, freeway_orbit):
    # at the outer seam the profile differs from the rest state by the
    # orbit tail at z = ell/eps, exponentially small in 1/eps
    gaps = {}
    for eps in (0.02, 0.01):
        dp = energy.dress(model, freeway_orbit, d=2, R=1.0, eps=eps,
                          ell=0.2)
        u = dp.u(np.array([1.0 + 1.5 * 0.2]))[0]
        gaps[eps] = np.max(np.abs(u - dp.a0))
    assert gaps[0.01] <= np.exp(-1.0) * gaps[0.02]


def test_cholesterol_mass_scaling(model, freeway_orbit, left_root):
    # the fast-component mass of the dressed profile is
    # eps |Gamma| delta int u2h dzeta with int u2h = 6 / f(s*)
    from scipy.integrate import quad
    d, R, eps = 2, 1.0, 0.02
    dp = energy.dress(model, freeway_orbit, d=d, R=R, eps=eps, ell=0.2)

    def integrand(r):
        return dp.u(np.array([r]))[0, 1] * 2.0 * np.pi * r

    mass, _ = quad(integrand, R - 0.4, R + 0.4, limit=200)
    predicted = eps * (2.0 * np.pi * R) * model.delta \
        * 6.0 / model.f(left_root.s)
    assert abs(mass - predicted) <= 0.05 * predicted


# -- full energy and sharp-interface prediction ------------------------------


def test_full_energy_rest_profile_zero(model, freeway_orbit):
    flat = _copy_orbit(freeway_orbit,
                       u_values=np.zeros_like(freeway_orbit.u_values),
                       p_values=np.zeros_like(freeway_orbit.p_values))
    dp = energy.dress(model, flat, d=2, R=1.0, eps=0.02, ell=0.2)
    assert energy.full_energy_radial(model, dp) <= 1e-14


def test_sharp_prediction_decays_with_radius(model, freeway_orbit):
    small = energy.sharp_interface_prediction(model, freeway_orbit, 2,
                                              1e6, 0.02)
    base = energy.sharp_interface_prediction(model, freeway_orbit, 2,
                                             1.0, 0.02)
    assert small <= 2e-6 * base


def test_sharp_prediction_cubic_in_eps(model, freeway_orbit):
    a = energy.sharp_interface_prediction(model, freeway_orbit, 2, 1.0,
                                          0.01)
    b = energy.sharp_interface_prediction(model, freeway_orbit, 2, 1.0,
                                          0.02)
    assert abs(b / a - 8.0) <= 1e-10


def test_full_energy_matches_corrected_prediction(model, freeway_orbit,
                                                  dressed):
    full = energy.full_energy_radial(model, dressed)
    corr = energy.sharp_interface_prediction_corrected(
        model, freeway_orbit, 2, 1.0, 0.02)
    assert abs(full / corr - 1.0) <= 0.01


def test_predictions_disagree_by_constant(model, freeway_orbit):
    # the gradient-weighted form overcounts the fast component; the two
    # predictions differ by a large eps-independent factor
    ratios = []
    for eps in (0.02, 0.01):
        a = energy.sharp_interface_prediction(model, freeway_orbit, 2,
                                              1.0, eps)
        b = energy.sharp_interface_prediction_corrected(
            model, freeway_orbit, 2, 1.0, eps)
        ratios.append(b / a)
    assert abs(ratios[0] - ratios[1]) <= 1e-12
    assert ratios[0] < 0.5
