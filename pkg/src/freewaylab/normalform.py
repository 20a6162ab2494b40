"""Saddle-node quantities and the quadratic toll-road energy law.

At a fold of the freeway branch the linearization L acquires an even
kernel element psi0 next to the odd translational mode.  This module
locates the fold of the singular existence function rho(s; mu), builds
the leading-order kernel and adjoint-kernel profiles, evaluates the
inner products that enter the toll-road energy coefficient

    F1^0 = (2 f T dT/dmu / <psi0_dag, psi0>)^2 (4/3 + 2 pi^2/45),

and checks the quadratic law F1 = (1/delta)(mu - mu_sn)^2/2 * F1^0
against continued toll-road branches.

Two predictions for the quadratic coefficient are reported.  The form
above divides <d_mu F, psi0> by the pairing <psi0_dag, psi0>.  Fredholm
solvability of the O(mu) equation L Phi = d_mu F + Psi, with Psi in the
adjoint kernel, instead fixes the residual amplitude through the
orthogonal projection onto psi0_dag, giving the coefficient
<d_mu F, psi0_dag>^2 / (2 ||psi0_dag||^2).  Solved toll-road branches
follow the solvability form; both are exposed so the discrepancy is
measurable rather than hidden.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import (DegeneratePairingError, ExistenceError,
                     NoConvergenceError)
from .singular import SlowTail, fast_homoclinic

FAST_CONST = 4.0 / 3.0 + 2.0 * np.pi ** 2 / 45.0


# ---------------------------------------------------------------------------
# fold location


def _fd_derivative(func, x, h=1e-6):
    return (func(x - 2 * h) - 8 * func(x - h) + 8 * func(x + h)
            - func(x + 2 * h)) / (12 * h)


def locate_saddle_node(rho, s_init, mu_init, drho_ds=None, d2rho_ds2=None,
                       drho_dmu=None, tol=1e-12, max_iter=60):
    """Newton solve of (rho, d rho/ds) = (0, 0) in (s, mu).

    The family must satisfy the nondegeneracy sign condition
    rho'' * d rho/d mu < 0 at the tangency; a wrong sign or Newton
    failure raises ExistenceError.  Missing derivatives are replaced by
    high-order central differences.
    """
    if drho_ds is None:
        drho_ds = lambda s, mu: _fd_derivative(lambda x: rho(x, mu), s)
    if d2rho_ds2 is None:
        d2rho_ds2 = lambda s, mu: _fd_derivative(lambda x: drho_ds(x, mu), s)
    if drho_dmu is None:
        drho_dmu = lambda s, mu: _fd_derivative(lambda m: rho(s, m), mu)

    s, mu = float(s_init), float(mu_init)
    for _ in range(max_iter):
        g = np.array([rho(s, mu), drho_ds(s, mu)])
        if np.max(np.abs(g)) <= tol:
            break
        J = np.array([
            [drho_ds(s, mu), drho_dmu(s, mu)],
            [d2rho_ds2(s, mu),
             _fd_derivative(lambda m: drho_ds(s, m), mu)]])
        try:
            step = np.linalg.solve(J, -g)
        except np.linalg.LinAlgError:
            raise ExistenceError("singular Newton system at saddle-node solve")
        lam = 1.0
        for _ in range(20):
            s_t, mu_t = s + lam * step[0], mu + lam * step[1]
            g_t = np.array([rho(s_t, mu_t), drho_ds(s_t, mu_t)])
            if np.max(np.abs(g_t)) < np.max(np.abs(g)) \
                    or np.max(np.abs(g_t)) <= tol:
                s, mu = s_t, mu_t
                break
            lam *= 0.5
        else:
            raise ExistenceError("saddle-node Newton stalled")
    else:
        raise ExistenceError("saddle-node Newton did not converge")

    sign = d2rho_ds2(s, mu) * drho_dmu(s, mu)
    if not sign < 0.0:
        raise ExistenceError(
            f"nondegeneracy sign condition violated: rho'' * drho/dmu = "
            f"{sign:.3e} >= 0, not a saddle-node in this parameterization")
    return s, mu


# ---------------------------------------------------------------------------
# PCB saddle-node data


@dataclass
class SaddleNodeData:
    s_sn: float
    mu_sn: float
    s1: float
    inner_dF_psi0: float       # closed form
    inner_dag: float           # closed form
    norm_dag_sq: float         # closed form
    F1_coeff: float
    delta: float
    quad_inner_dF: float = None
    quad_inner_dag: float = None
    quad_norm_dag_sq: float = None
    psi0: np.ndarray = None        # leading profile on z_grid
    psi0_dag: np.ndarray = None
    z_grid: np.ndarray = None
    psi0_numeric: np.ndarray = None
    psi0_dag_numeric: np.ndarray = None


def _pcb_rho_derivatives(model):
    """Closed-form rho and its partial derivatives for the PCB family."""
    def rho(s, mu):
        return model.W(s) - 0.5 * model.take_off(s, mu) ** 2

    def drho_ds(s, mu):
        return model.Wp(s) - model.take_off(s, mu) * model.dT_ds(s, mu)

    def d2rho_ds2(s, mu):
        return model.Wpp(s) - model.dT_ds(s, mu) ** 2

    def drho_dmu(s, mu):
        return -model.take_off(s, mu) * model.dT_dmu(s, mu)

    return rho, drho_ds, d2rho_ds2, drho_dmu


def slow_action(model, s_sn):
    """int_0^{s_sn} sqrt(2 W(u)) du by adaptive quadrature."""
    val, _ = quad(lambda u: np.sqrt(max(2.0 * model.W(u), 0.0)), 0.0, s_sn,
                  epsabs=1e-14, epsrel=1e-12, limit=200)
    return val


def pcb_saddle_node(model, s_init=None, mu_init=0.5, with_profiles=True,
                    z_grid=None):
    """Locate the PCB fold and assemble all saddle-node quantities.

    The external parameterization has rho'' < 0 and d rho/d mu < 0 at
    the tangency (their product is positive), so the nondegeneracy
    condition is checked for the re-centered parameter nu = mu_sn - mu,
    which flips the mu-derivative sign.  The reported mu_sn is external.
    """
    rho, drho_ds, d2rho_ds2, drho_dmu = _pcb_rho_derivatives(model)
    if s_init is None:
        s_init = 0.5 * model.well_positive_zero()
    s_sn, mu_sn = locate_saddle_node(
        lambda s, nu: rho(s, mu_init + 1.0 - nu),
        s_init, 1.0,
        drho_ds=lambda s, nu: drho_ds(s, mu_init + 1.0 - nu),
        d2rho_ds2=lambda s, nu: d2rho_ds2(s, mu_init + 1.0 - nu),
        drho_dmu=lambda s, nu: -drho_dmu(s, mu_init + 1.0 - nu))
    mu_sn = mu_init + 1.0 - mu_sn

    T = model.take_off(s_sn, mu_sn)
    dT = model.dT_dmu(s_sn, mu_sn)
    Tp = model.dT_ds(s_sn, mu_sn)
    W = model.W(s_sn)
    f = model.f(s_sn)
    fp = model.fp(s_sn)
    delta = model.delta

    # shift coefficient, via rho derivatives and via take-off derivatives
    # shift coefficient in the re-centered (internal) orientation,
    # where d rho/d mu > 0 and rho'' < 0
    dmu_rho = -drho_dmu(s_sn, mu_sn)
    dss_rho = d2rho_ds2(s_sn, mu_sn)
    s1 = abs(np.sqrt(2.0) * dmu_rho / np.sqrt(-dss_rho * dmu_rho))

    action = slow_action(model, s_sn)
    inner_dag = action / W + 3.0 * (fp / f) * T
    if abs(inner_dag) <= 1e-10:
        raise DegeneratePairingError(
            "kernel and adjoint-kernel profiles are numerically orthogonal")
    inner_dF = -2.0 * dT
    norm_dag_sq = (f * T) ** 2 * FAST_CONST / delta
    F1_coeff = (2.0 * f * T * dT / inner_dag) ** 2 * FAST_CONST

    data = SaddleNodeData(s_sn=float(s_sn), mu_sn=float(mu_sn), s1=float(s1),
                          inner_dF_psi0=float(inner_dF),
                          inner_dag=float(inner_dag),
                          norm_dag_sq=float(norm_dag_sq),
                          F1_coeff=float(F1_coeff), delta=float(delta))

    if with_profiles:
        if z_grid is None:
            z_grid = np.linspace(-12.0, 12.0, 4001)
        data.z_grid = np.asarray(z_grid, dtype=float)
        data.psi0 = psi0_leading(model, s_sn, data.z_grid, mu=mu_sn)
        data.psi0_dag = psi0_adjoint_leading(model, s_sn, data.z_grid,
                                             mu=mu_sn)
        q = inner_products_quadrature(model, s_sn, mu_sn)
        data.quad_inner_dF = q["inner_dF_psi0"]
        data.quad_inner_dag = q["inner_dag"]
        data.quad_norm_dag_sq = q["norm_dag_sq"]
    return data


# ---------------------------------------------------------------------------
# leading-order kernel profiles


def psi0_leading(model, s_sn, z, mu=None):
    """Even kernel profile of L at the fold, to leading order.

    Fast region |z| < sqrt(delta): (1, -(f'/f) u_{2,h}(z/delta)); slow
    region: (u_hat'(|z|)/u_hat'(0), 0) with u_hat the slow tail from s_sn.
    """
    z = np.asarray(z, dtype=float)
    delta = model.delta
    core = fast_homoclinic(model, s_sn)
    tail = SlowTail(model, s_sn, max(20.0, float(np.max(np.abs(z)))))
    slope0 = tail.slope_at_zero()
    out = np.zeros((len(z), 2))
    az = np.abs(z)
    fastm = az < np.sqrt(delta)
    out[fastm, 0] = 1.0
    out[fastm, 1] = -(model.fp(s_sn) / model.f(s_sn)) * core(z[fastm] / delta)
    out[~fastm, 0] = tail.derivative(az[~fastm]) / slope0
    return out


def psi0_adjoint_leading(model, s_sn, z, mu=None):
    """Even adjoint-kernel profile of L at the fold, to leading order."""
    if mu is None:
        mu = model.mu
    z = np.asarray(z, dtype=float)
    delta = model.delta
    T = model.take_off(s_sn, mu)
    f = model.f(s_sn)
    tail = SlowTail(model, s_sn, max(20.0, float(np.max(np.abs(z)))))
    slope0 = tail.slope_at_zero()
    out = np.zeros((len(z), 2))
    az = np.abs(z)
    fastm = az < np.sqrt(delta)
    zeta = z[fastm] / delta
    out[fastm, 0] = 1.0
    out[fastm, 1] = -(1.0 / delta) * f * T * np.cosh(zeta / 2.0) ** -2 \
        * (1.0 - (zeta / 2.0) * np.tanh(zeta / 2.0))
    out[~fastm, 0] = tail.derivative(az[~fastm]) / slope0
    return out


def adjoint_fast_residual(model, s_sn, mu=None, n=4001, L_zeta=30.0):
    """Max residual of the explicit fast adjoint component.

    Checks that psi_hat(zeta) = -f T sech^2(zeta/2)(1 - (zeta/2)
    tanh(zeta/2)) solves [d_zeta^2 - 1 + 3 sech^2(zeta/2)] psi_hat =
    -f T sech^2(zeta/2) on a fine grid, using the analytic second
    derivative of the closed form.
    """
    from .spectral import diff_matrix

    if mu is None:
        mu = model.mu
    T = model.take_off(s_sn, mu)
    f = model.f(s_sn)
    zeta = np.linspace(-L_zeta, L_zeta, n)
    x = zeta / 2.0
    sech2 = np.cosh(x) ** -2
    g = 1.0 - x * np.tanh(x)
    psi = -f * T * sech2 * g
    d2psi = np.asarray(diff_matrix(zeta, 2, stencil=9) @ psi)
    lhs = d2psi - psi + 3.0 * sech2 * psi
    rhs = -f * T * sech2
    interior = slice(8, -8)
    return float(np.max(np.abs(lhs[interior] - rhs[interior])))


# ---------------------------------------------------------------------------
# inner products, quadrature path


def inner_products_quadrature(model, s_sn, mu, L_zeta=60.0, n_fast=12001,
                              L_z=20.0, n_slow=6001):
    """Direct quadratures of the leading-order inner products."""
    delta = model.delta
    f = model.f(s_sn)
    fp = model.fp(s_sn)
    T = model.take_off(s_sn, mu)
    dT = model.dT_dmu(s_sn, mu)
    core = fast_homoclinic(model, s_sn)
    tail = SlowTail(model, s_sn, L_z)
    slope0 = tail.slope_at_zero()

    zeta = np.linspace(-L_zeta, L_zeta, n_fast)
    u2h = core(zeta)
    x = zeta / 2.0
    g = np.cosh(x) ** -2 * (1.0 - x * np.tanh(x))

    # <d_mu F, psi0>: fast-core integral of the first component
    integ = -(1.0 / 3.0) * f ** 2 * dT * u2h ** 2   # already in zeta units
    inner_dF = np.trapezoid(integ, zeta)

    # ||psi0_dag||^2, fast part dominates at 1/delta
    norm_dag = (1.0 / delta) * (f * T) ** 2 * np.trapezoid(g ** 2, zeta)

    # <psi0_dag, psi0>: slow part + fast second-component part
    zs = np.linspace(0.0, L_z, n_slow)
    du = tail.derivative(zs)
    slow_part = 2.0 * np.trapezoid((du / slope0) ** 2, zs)
    fast_part = (fp / f) * f * T * np.trapezoid(u2h * g, zeta)
    inner_dag = slow_part + fast_part
    return {"inner_dF_psi0": float(inner_dF), "norm_dag_sq": float(norm_dag),
            "inner_dag": float(inner_dag)}


def tollroad_energy_coefficient(sn: SaddleNodeData):
    """F1^0 from the pairing-normalized formula; identity with closed form."""
    if abs(sn.inner_dag) <= 1e-10:
        raise DegeneratePairingError("vanishing kernel pairing")
    general = (sn.inner_dF_psi0 / sn.inner_dag) ** 2 * sn.norm_dag_sq \
        * sn.delta
    return general


def solvability_quadratic_coefficient(sn: SaddleNodeData):
    """Quadratic F1 coefficient from Fredholm solvability, leading order.

    Projecting the O(mu) equation onto the adjoint kernel direction gives
    the residual amplitude -mu <d_mu F, psi0_dag> / ||psi0_dag||^2, hence
    F1 = mu^2 <d_mu F, psi0_dag>^2 / (2 ||psi0_dag||^2).  To leading
    order the pairing with psi0_dag equals the pairing with psi0 (the
    slow components coincide and the fast contribution is O(delta)), so
    the closed form uses inner_dF_psi0.  Scales as delta, in contrast to
    the 1/delta growth of F1_coeff / (2 delta).
    """
    if sn.norm_dag_sq <= 0.0:
        raise DegeneratePairingError("vanishing adjoint-kernel norm")
    return sn.inner_dF_psi0 ** 2 / (2.0 * sn.norm_dag_sq)


def solvability_quadratic_coefficient_numeric(model, fold_orbit, psi0_dag):
    """Same coefficient from the numeric adjoint null vector at the fold.

    Uses trapezoid weights on the fold orbit grid and a central
    difference in mu for d_mu F along the orbit.
    """
    z = fold_orbit.grid
    w = np.zeros(len(z))
    dz = np.diff(z)
    w[:-1] += 0.5 * dz
    w[1:] += 0.5 * dz
    eps = 1e-6
    mu0 = fold_orbit.mu
    Fp = np.array([model.with_mu(mu0 + eps).F(u) for u in fold_orbit.u_values])
    Fm = np.array([model.with_mu(mu0 - eps).F(u) for u in fold_orbit.u_values])
    dmuF = (Fp - Fm) / (2.0 * eps)
    inner = float(np.sum(w[:, None] * dmuF * psi0_dag))
    norm_sq = float(np.sum(w[:, None] * psi0_dag ** 2))
    if norm_sq <= 0.0:
        raise DegeneratePairingError("vanishing adjoint-kernel norm")
    return inner ** 2 / (2.0 * norm_sq)


# ---------------------------------------------------------------------------
# quadratic law and toll-road seeding


@dataclass
class QuadraticFit:
    coefficient: float
    predicted: float
    ratio: float
    r_squared: float
    warning: bool
    predicted_solvability: float = None
    ratio_solvability: float = None
    samples: list = field(default_factory=list)


def verify_quadratic_law(samples, sn: SaddleNodeData, mu_fold=None):
    """Least-squares fit of F1 against (mu - mu_fold)^2.

    samples: iterable of (mu, F1) pairs from solved toll-road orbits.
    mu_fold defaults to sn.mu_sn; pass the continuation fold parameter
    when the samples come from a finite-delta ladder, since the fold
    drifts O(delta) from the singular-limit value.  Returns the fitted
    coefficient, its ratio to F1^0/(2 delta), and the R^2 of the
    quadratic model; R^2 < 0.99 sets a ladder-too-large warning.
    """
    if mu_fold is None:
        mu_fold = sn.mu_sn
    samples = [(float(mu), float(F1)) for mu, F1 in samples]
    x = np.array([(mu - mu_fold) ** 2 for mu, _ in samples])
    y = np.array([F1 for _, F1 in samples])
    coeff = float(x @ y / (x @ x))
    resid = y - coeff * x
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    predicted = sn.F1_coeff / (2.0 * sn.delta)
    pred_solv = solvability_quadratic_coefficient(sn)
    return QuadraticFit(coefficient=coeff, predicted=predicted,
                        ratio=coeff / predicted, r_squared=r2,
                        warning=r2 < 0.99,
                        predicted_solvability=pred_solv,
                        ratio_solvability=coeff / pred_solv,
                        samples=samples)


def tollroad_seed(model, fold_orbit, sn: SaddleNodeData, mu):
    """Initial toll-road guess at parameter mu from the fold orbit.

    The residual component is seeded with the leading normal-form term
    v = -(mu - mu_sn) <d_mu F, psi0> / ||psi0_dag||^2 psi0_dag using the
    numeric adjoint null vector when available.
    """
    from .bvp import ConnectionOrbit

    z = fold_orbit.grid
    if sn.psi0_dag_numeric is not None \
            and sn.psi0_dag_numeric.shape[0] == len(z):
        dag = sn.psi0_dag_numeric
    else:
        dag = psi0_adjoint_leading(model, sn.s_sn, z, mu=sn.mu_sn)
    w = np.zeros(len(z))
    dz = np.diff(z)
    w[:-1] += 0.5 * dz
    w[1:] += 0.5 * dz
    norm_sq = float(np.sum(w[:, None] * dag ** 2))
    mut = mu - fold_orbit.mu
    amp = -mut * sn.inner_dF_psi0 / norm_sq
    v = amp * dag
    q = np.gradient(v, z, axis=0)
    return ConnectionOrbit(grid=z, u_values=fold_orbit.u_values.copy(),
                           p_values=fold_orbit.p_values.copy(),
                           v_values=v, q_values=q, orbit_type="tollroad",
                           residual_norm=np.inf, phase_anchor=0.0,
                           mu=float(mu), delta=model.delta)


def tollroad_ladder(model, fold_orbit, sn: SaddleNodeData, offsets,
                    tol=1e-11):
    """Solve toll-road orbits at mu = fold mu + offset for each offset.

    Offsets are measured from the fold orbit's own parameter (the finite
    delta fold), not from the singular-limit mu_sn, since the quadratic
    energy law holds in the distance to the actual fold.
    """
    from .bvp import solve_tollroad
    from .energy import reduced_energy

    results = []
    for off in offsets:
        mu = fold_orbit.mu + off
        guess = tollroad_seed(model, fold_orbit, sn, mu)
        orbit = solve_tollroad(model, guess, tol=tol, mu=mu)
        energy = reduced_energy(model, orbit)
        results.append((mu, energy, orbit))
    return results
