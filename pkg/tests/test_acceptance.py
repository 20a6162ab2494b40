"""End-to-end acceptance checks for the library.

Each test prints a single pass/fail line with the measured quantities
before asserting, so the suite output doubles as a scorecard.  Three
checks encode published leading-order constants that the solved orbits
do not reproduce (the dressed-energy constant, the quadratic toll-road
coefficient, and the fold-parameter agreement at finite delta); they
are implemented faithfully and left red rather than weakened, with the
companion quantities that do match asserted alongside in their own
tests.
"""

import time

import numpy as np
import pytest

from freewaylab import bvp, energy, normalform, singular, spectral
from freewaylab.model import make_pcb


def _verdict(num, ok, detail):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    return line


def test_criterion_01_jump_closed_form(model):
    t0 = time.time()
    s_grid = np.linspace(0.01, 0.9, 100)
    errs = [abs(singular.delta_p_quadrature(model, s)
                - (-2.0 * model.take_off(s))) for s in s_grid]
    elapsed = time.time() - t0
    ok = max(errs) <= 1e-8 and elapsed < 10.0
    line = _verdict(1, ok, f"max jump error {max(errs):.2e} over 100 "
                           f"s-values in {elapsed:.2f} s")
    assert ok, line


def test_criterion_02_freeway_existence(model, scan, freeway_orbit,
                                        delta_sweep):
    resids = [freeway_orbit.residual_norm]
    # second transverse root
    sing = singular.assemble_singular_orbit(model, scan.roots[1].s,
                                            n_target=1600)
    orb2 = bvp.solve_freeway(model, bvp.guess_from_singular(model, sing))
    resids.append(orb2.residual_norm)
    gaps = [delta_sweep[d]["gap"] for d in (0.1, 0.05, 0.025)]
    shrinks = [gaps[0] / gaps[1], gaps[1] / gaps[2]]
    ok = max(resids) <= 1e-10 and min(shrinks) >= 1.5
    line = _verdict(2, ok,
                    f"residuals {max(resids):.1e}, amplitude gaps "
                    f"{gaps[0]:.3e}/{gaps[1]:.3e}/{gaps[2]:.3e}, "
                    f"shrink factors {shrinks[0]:.2f}/{shrinks[1]:.2f}")
    assert ok, line


def test_criterion_03_energy_dichotomy(model, freeway_orbit,
                                       tollroad_orbit):
    e_fw = energy.reduced_energy(model, freeway_orbit)
    m = model.with_mu(tollroad_orbit.mu)
    _, hmax = energy.hamiltonian_trace(m, tollroad_orbit)
    e_tr = energy.reduced_energy(m, tollroad_orbit, cross_check=True,
                                 check_tol=1e-10)
    ok = abs(e_fw) <= 1e-14 and hmax <= 1e-8 and e_tr > 0
    line = _verdict(3, ok, f"freeway energy {e_fw:.1e}, toll-road "
                           f"max|H| {hmax:.1e}, F1 {e_tr:.3e} "
                           f"cross-checked to 1e-10")
    assert ok, line


def test_criterion_04_fast_sl_spectrum(model, left_root):
    t0 = time.time()
    vals, parities = spectral.fast_sl_spectrum(model, left_root.s, N=2000)
    elapsed = time.time() - t0
    target = np.array([-0.75, 0.0, 1.25])
    err = float(np.max(np.abs(vals - target)))
    ok = err <= 1e-3 and elapsed < 30.0
    line = _verdict(4, ok, f"eigenvalues {vals[0]:.5f}/{vals[1]:.1e}/"
                           f"{vals[2]:.5f} vs -3/4, 0, 5/4; max error "
                           f"{err:.1e} in {elapsed:.2f} s")
    assert ok, line


def test_criterion_05_pearling_verdict(pencil_report, pencil_report_coarse,
                                       scalar_report):
    robust_ok = (pencil_report.verdict == "robust"
                 and pencil_report.kernel_dim == 1
                 and pencil_report.kernel_parities == ["odd"]
                 and not pencil_report.positive_real)
    scalar_ok = (scalar_report.verdict == "not-robust"
                 and len(scalar_report.positive_real) == 1
                 and abs(scalar_report.positive_real[0] - 1.25) <= 1e-3)
    stable = pencil_report_coarse.verdict == pencil_report.verdict
    ok = robust_ok and scalar_ok and stable
    line = _verdict(5, ok,
                    f"left root {pencil_report.verdict} (kernel "
                    f"{pencil_report.kernel_parities}), scalar fixture "
                    f"{scalar_report.verdict} with k = "
                    f"{scalar_report.positive_real[0]:.5f}, grid-doubled "
                    f"verdict {pencil_report_coarse.verdict}")
    assert ok, line


def test_criterion_06_coercivity_margin(coercivity, coercivity_coarse):
    a, b = coercivity["margin"], coercivity_coarse["margin"]
    change = abs(a - b) / max(a, b)
    ok = a > 0.0 and change <= 0.05
    line = _verdict(6, ok, f"margin {a:.5f} at k = "
                           f"{coercivity['argmin_k']:.3f}, grid-doubled "
                           f"margin {b:.5f}, change {100 * change:.2f}%")
    assert ok, line


def test_criterion_07_dressed_energy_law(model, freeway_orbit):
    eps_list = [0.02, 0.01, 0.005]
    ratios = []
    for eps in eps_list:
        dp = energy.dress(model, freeway_orbit, d=2, R=1.0, eps=eps,
                          ell=0.2)
        full = energy.full_energy_radial(model, dp)
        pred = energy.sharp_interface_prediction(model, freeway_orbit, 2,
                                                1.0, eps)
        ratios.append(full / pred)
    devs = [abs(r - 1.0) for r in ratios]
    orders = [np.log2(devs[i] / devs[i + 1]) for i in range(2)]
    ok = devs[-1] < devs[0] and min(orders) >= 1.0 and devs[-1] < 0.5
    line = _verdict(7, ok,
                    f"energy ratios {ratios[0]:.5f}/{ratios[1]:.5f}/"
                    f"{ratios[2]:.5f} vs 1, empirical orders "
                    f"{orders[0]:.2f}/{orders[1]:.2f}; the quadrature "
                    "instead matches the D^4-weighted half-prefactor "
                    "form (see sharp_interface_prediction_corrected)")
    assert ok, line


def test_criterion_07_companion_corrected_constant(model, freeway_orbit):
    # the form the radial quadrature does converge to, flat in eps
    ratios = []
    for eps in (0.02, 0.01):
        dp = energy.dress(model, freeway_orbit, d=2, R=1.0, eps=eps,
                          ell=0.2)
        full = energy.full_energy_radial(model, dp)
        corr = energy.sharp_interface_prediction_corrected(
            model, freeway_orbit, 2, 1.0, eps)
        ratios.append(full / corr)
    ok = all(abs(r - 1.0) <= 0.01 for r in ratios)
    line = _verdict("7c", ok, f"corrected-prediction ratios "
                              f"{ratios[0]:.6f}/{ratios[1]:.6f}")
    assert ok, line


def test_criterion_08_adjoint_explicit_solution(model, sn):
    res = normalform.adjoint_fast_residual(model, sn.s_sn, mu=sn.mu_sn)
    f = model.f(sn.s_sn)
    T = model.take_off(sn.s_sn, sn.mu_sn)
    scaled = sn.quad_norm_dag_sq * model.delta / (f * T) ** 2
    const_err = abs(scaled - normalform.FAST_CONST)
    ok = res <= 1e-10 and const_err <= 1e-8
    line = _verdict(8, ok, f"fast adjoint residual {res:.1e}, "
                           f"norm-squared constant error {const_err:.1e} "
                           f"vs 4/3 + 2 pi^2/45")
    assert ok, line


def test_criterion_09_quadratic_energy_law(quad_fit, delta_sweep):
    ratios = [delta_sweep[d]["fit"].ratio for d in (0.1, 0.05, 0.025)]
    devs = [abs(r - 1.0) for r in ratios]
    within = abs(quad_fit.ratio - 1.0) <= 0.30
    tightening = devs[0] > devs[1] > devs[2]
    ok = within and tightening
    line = _verdict(9, ok,
                    f"fitted/predicted ratios {ratios[0]:.4f}/"
                    f"{ratios[1]:.4f}/{ratios[2]:.4f} (need within 30% "
                    "and tightening); the solvability-projected "
                    "coefficient matches instead (see companion)")
    assert ok, line


def test_criterion_09_companion_solvability_coefficient(delta_sweep):
    # the Fredholm-solvability prediction the ladder energies do follow
    ratios = [delta_sweep[d]["fit"].ratio_solvability
              for d in (0.1, 0.05, 0.025)]
    devs = [abs(r - 1.0) for r in ratios]
    ok = devs[0] > devs[1] > devs[2] and devs[2] <= 0.30
    line = _verdict("9c", ok, f"solvability ratios {ratios[0]:.4f}/"
                              f"{ratios[1]:.4f}/{ratios[2]:.4f}, "
                              "tightening toward 1")
    assert ok, line


def test_criterion_10_fold_consistency(branch, sn, delta_sweep):
    gap = abs(branch.fold.mu_sn - sn.mu_sn)
    gaps = [abs(delta_sweep[d]["mu_fold"] - delta_sweep[d]["mu_sn"])
            for d in (0.1, 0.05, 0.025)]
    dists = [delta_sweep[d]["psi0_dist"] for d in (0.1, 0.05, 0.025)]
    dist_ok = all(dists[i] <= np.sqrt(d)
                  for i, d in enumerate((0.1, 0.05, 0.025))) \
        and dists[0] > dists[1] > dists[2]
    ok = gap <= 1e-4 and dist_ok
    line = _verdict(10, ok,
                    f"fold-parameter gap {gap:.4e} vs 1e-4 (O(delta) "
                    f"drift: {gaps[0]:.4f}/{gaps[1]:.4f}/{gaps[2]:.4f} "
                    f"over delta = 0.1/0.05/0.025); null-vector "
                    f"relative L2 {dists[0]:.3f}/{dists[1]:.3f}/"
                    f"{dists[2]:.3f} below sqrt(delta) and shrinking")
    assert ok, line


def test_criterion_10_companion_null_vector(delta_sweep):
    dists = [delta_sweep[d]["psi0_dist"] for d in (0.1, 0.05, 0.025)]
    ok = all(dists[i] <= np.sqrt(d)
             for i, d in enumerate((0.1, 0.05, 0.025))) \
        and dists[0] > dists[1] > dists[2]
    line = _verdict("10c", ok, f"null-vector relative L2 "
                               f"{dists[0]:.3f}/{dists[1]:.3f}/"
                               f"{dists[2]:.3f} vs sqrt(delta)")
    assert ok, line
