"""Leading-order slow-fast construction of freeway homoclinics.

The slow field u1 drifts on the manifold {u2 = 0} under u1'' = W'(u1),
while the fast field u2 makes a sech^2 excursion in the stretched variable
zeta = z/delta.  The excursion kicks u1's derivative by the jump

    delta_p(s) = integral of F12(s, u_2h(zeta; s)) d zeta,

and a one-circuit homoclinic exists at roots of the existence function

    rho(s) = integral_0^s F11(u) du - delta_p(s)^2 / 8.

For the bilayer model these reduce to delta_p = -2 T(s) and
rho(s) = W(s) - T(s)^2 / 2.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import make_interp_spline

from .errors import ExistenceError, NumericalError, PreconditionError
from .model import PcbModel

ROOT_TOL = 1e-12


class FastHomoclinic:
    """The even fast excursion u_2h(zeta; s), homoclinic to u2 = 0.

    For the bilayer model this is (3/(2 f(s))) sech^2(zeta/2) in closed
    form; generic planar fields are solved by collocation (see
    solve_fast_generic).
    """

    def __init__(self, s, amplitude=None, spline=None):
        self.s = float(s)
        self.amplitude = amplitude
        self._spline = spline

    def __call__(self, zeta):
        zeta = np.asarray(zeta, dtype=float)
        if self.amplitude is not None:
            return self.amplitude / np.cosh(0.5 * zeta) ** 2
        out = np.where(np.abs(zeta) <= self._spline.t[-1],
                       self._spline(np.clip(np.abs(zeta), 0.0,
                                            self._spline.t[-1])), 0.0)
        return out

    def derivative(self, zeta):
        zeta = np.asarray(zeta, dtype=float)
        if self.amplitude is not None:
            c = np.cosh(0.5 * zeta)
            return -self.amplitude * np.tanh(0.5 * zeta) / c ** 2
        ds = self._spline.derivative()
        inside = np.abs(zeta) <= self._spline.t[-1]
        return np.where(inside, np.sign(zeta) *
                        ds(np.clip(np.abs(zeta), 0.0, self._spline.t[-1])), 0.0)


def fast_field(model, s, u2):
    """F2(s, u2) along the fast fiber over slow value s."""
    u2 = np.asarray(u2, dtype=float)
    out = np.empty_like(u2)
    for i, val in np.ndenumerate(u2):
        out[i] = model.F(np.array([s, float(val)]))[1]
    return out


def solve_fast_generic(model, s, L_zeta=30.0, n_nodes=1200, guess_amp=None,
                       tol=1e-12, max_iter=60):
    """Collocation solve of u2'' = F2(s, u2) with even symmetry.

    Half-line grid [0, L_zeta], Neumann at 0, Dirichlet at L_zeta.
    Used as the model-independent cross-check of the closed form.
    """
    zeta = np.linspace(0.0, L_zeta, n_nodes)
    h = zeta[1] - zeta[0]
    if guess_amp is None:
        guess_amp = 1.5
    u = guess_amp / np.cosh(0.5 * zeta) ** 2

    def residual(u):
        r = np.empty_like(u)
        # ghost-node Neumann at zeta = 0
        r[0] = (2.0 * u[1] - 2.0 * u[0]) / h ** 2 - fast_field(model, s, u[:1])[0]
        r[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h ** 2 \
            - fast_field(model, s, u[1:-1])
        r[-1] = u[-1]
        return r

    def jacobian(u):
        from scipy.sparse import lil_matrix
        n = len(u)
        J = lil_matrix((n, n))
        dg = np.empty(n)
        for i in range(n):
            dg[i] = model.dF(np.array([s, u[i]]))[1, 1]
        J[0, 0] = -2.0 / h ** 2 - dg[0]
        J[0, 1] = 2.0 / h ** 2
        for i in range(1, n - 1):
            J[i, i - 1] = 1.0 / h ** 2
            J[i, i] = -2.0 / h ** 2 - dg[i]
            J[i, i + 1] = 1.0 / h ** 2
        J[n - 1, n - 1] = 1.0
        return J.tocsc()

    from scipy.sparse.linalg import spsolve
    for _ in range(max_iter):
        r = residual(u)
        if np.max(np.abs(r)) < tol:
            break
        du = spsolve(jacobian(u), -r)
        # damped update; the trivial solution u == 0 is a spurious attractor
        lam = 1.0
        base = np.max(np.abs(r))
        for _ in range(30):
            trial = u + lam * du
            if np.max(np.abs(residual(trial))) < base:
                u = trial
                break
            lam *= 0.5
        else:
            u = u + du
    else:
        raise ExistenceError("fast homoclinic Newton did not converge")
    if np.max(np.abs(u)) < 1e-8:
        raise ExistenceError("fast solve collapsed to the trivial state")
    spline = make_interp_spline(zeta, u, k=5)
    return FastHomoclinic(s, spline=spline)


def fast_homoclinic(model, s):
    """Fast excursion over slow value s; closed form for the bilayer model."""
    if isinstance(model, PcbModel):
        fs = model.f(s)
        if fs <= 0:
            raise ExistenceError("coupling f(s) must be positive")
        return FastHomoclinic(s, amplitude=1.5 / fs)
    return solve_fast_generic(model, s)


def F12_fast(model, s, u2):
    """The O(1/delta) coupling F12(s, u2; 0) = delta * (F1(s,u2) - F1(s,0))."""
    u2 = np.atleast_1d(np.asarray(u2, dtype=float))
    base = model.F(np.array([float(s), 0.0]))[0]
    out = np.empty_like(u2)
    for i, val in enumerate(u2):
        out[i] = model.delta * (model.F(np.array([float(s), val]))[0] - base)
    return out


def delta_p(model, s):
    """Derivative jump of u1 across the fast excursion.

    Bilayer closed form -2 T(s); see delta_p_quadrature for the
    model-independent path.
    """
    if isinstance(model, PcbModel):
        return -2.0 * model.take_off(s)
    return delta_p_quadrature(model, s)


def delta_p_quadrature(model, s, L_zeta=45.0, n_nodes=4001):
    """Jump integral computed by composite quadrature of F12."""
    from scipy.integrate import simpson
    core = fast_homoclinic(model, s)
    zeta = np.linspace(-L_zeta, L_zeta, n_nodes)
    vals = F12_fast(model, s, core(zeta))
    out = simpson(vals, x=zeta)
    if not np.isfinite(out):
        raise NumericalError("jump quadrature diverged")
    return float(out)


def slow_potential(model, s):
    """V(s) = integral_0^s F11(u; 0) du; equals W(s) for the bilayer model."""
    if isinstance(model, PcbModel):
        return float(model.W(s))
    from scipy.integrate import quad

    def F11(u):
        return model.F(np.array([u, 0.0]))[0]

    val, _ = quad(F11, 0.0, s, epsabs=1e-13, epsrel=1e-13)
    return val


def rho(model, s):
    """Existence function rho(s); roots seed one-circuit homoclinics."""
    if isinstance(model, PcbModel):
        T = model.take_off(s)
        return model.W(s) - 0.5 * T * T
    return slow_potential(model, s) - delta_p(model, s) ** 2 / 8.0


def rho_generic(model, s):
    """rho via the defining integrals, independent of any closed form."""
    from scipy.integrate import quad

    if isinstance(model, PcbModel):
        def F11(u):
            return model.F(np.array([u, 0.0]))[0]
        V, _ = quad(F11, 0.0, s, epsabs=1e-13, epsrel=1e-13)
    else:
        V = slow_potential(model, s)
    return V - delta_p_quadrature(model, s) ** 2 / 8.0


def rho_prime(model, s, h=1e-6):
    if isinstance(model, PcbModel):
        T = model.take_off(s)
        return float(model.Wp(s) - T * model.dT_ds(s))
    return (rho(model, s + h) - rho(model, s - h)) / (2.0 * h)


def rho_second(model, s, h=1e-5):
    if isinstance(model, PcbModel):
        Tp = model.dT_ds(s)
        return float(model.Wpp(s) - Tp * Tp)
    return (rho(model, s + h) - 2.0 * rho(model, s) + rho(model, s - h)) / h ** 2


@dataclass
class RhoRoot:
    s: float
    rho_prime: float
    condition_ok: bool
    transverse: bool


@dataclass
class RhoScan:
    s: np.ndarray
    rho: np.ndarray
    rho_prime: np.ndarray
    roots: list = field(default_factory=list)
    tangency_candidates: list = field(default_factory=list)


def rho_scan(model, interval, n_samples=400):
    """Sample rho on an interval and refine every bracketed root.

    Roots are polished by bisection (bracket width 1e-8) followed by
    Newton to |rho| <= 1e-12.  Near-tangencies (|rho'| ~ 0) are reported
    separately as saddle-node candidates, not as transverse roots.
    """
    a, b = interval
    s = np.linspace(a, b, n_samples)
    vals = np.array([rho(model, x) for x in s])
    primes = np.array([rho_prime(model, x) for x in s])
    scan = RhoScan(s=s, rho=vals, rho_prime=primes)
    for i in range(n_samples - 1):
        if vals[i] == 0.0:
            root = s[i]
        elif vals[i] * vals[i + 1] < 0.0:
            lo, hi = s[i], s[i + 1]
            flo = vals[i]
            while hi - lo > 1e-8:
                mid = 0.5 * (lo + hi)
                fm = rho(model, mid)
                if flo * fm <= 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fm
            root = 0.5 * (lo + hi)
        else:
            continue
        for _ in range(60):
            r = rho(model, root)
            if abs(r) <= ROOT_TOL:
                break
            dp = rho_prime(model, root)
            if dp == 0.0:
                break
            root = root - r / dp
        rp = rho_prime(model, root)
        if abs(rp) <= 1e-8:
            scan.tangency_candidates.append(float(root))
            continue
        cond = takeoff_condition(model, root)
        scan.roots.append(RhoRoot(s=float(root), rho_prime=float(rp),
                                  condition_ok=bool(cond), transverse=True))
    return scan


def slow_departure_slope(model, s):
    """du1/dz at z=0+ on the decaying slow branch through (s, .)."""
    V = slow_potential(model, s)
    if V <= 0:
        raise PreconditionError("slow level set does not reach the origin")
    return -np.sqrt(2.0 * V)


def takeoff_condition(model, s_star):
    """Sign condition pairing the slow departure with the fast jump."""
    dp = delta_p(model, s_star)
    if dp == 0.0:
        return False
    return slow_departure_slope(model, s_star) * dp > 0.0


class SlowTail:
    """Decaying slow profile u_hat(z) with u_hat(0) = s, via the level set.

    On the homoclinic level of the slow plane, p = -sqrt(2 V(u)) on the
    decaying branch, so the tail solves u' = -sqrt(2 V(u)).
    """

    def __init__(self, model, s, L_z):
        self.model = model
        self.s = float(s)
        self.L_z = float(L_z)

        def rhs(z, u):
            V = max(slow_potential(model, u[0]), 0.0)
            return [-np.sqrt(2.0 * V)]

        sol = solve_ivp(rhs, (0.0, L_z), [self.s], method="RK45",
                        rtol=1e-12, atol=1e-14, dense_output=True)
        if not sol.success:
            raise NumericalError("slow tail integration failed")
        self._sol = sol

    def __call__(self, z):
        z = np.abs(np.asarray(z, dtype=float))
        z = np.clip(z, 0.0, self.L_z)
        return self._sol.sol(z)[0]

    def derivative(self, z):
        """du/dz for z >= 0 (the decaying branch)."""
        u = self(z)
        V = np.maximum(np.vectorize(lambda x: slow_potential(self.model, x))(u), 0.0)
        return -np.sqrt(2.0 * V)

    def slope_at_zero(self):
        return slow_departure_slope(self.model, self.s)


@dataclass
class SingularOrbit:
    s_star: float
    fast_core: FastHomoclinic
    slow_tail: SlowTail
    delta_p: float
    rho_prime: float
    condition_ok: bool
    z: np.ndarray = None
    u: np.ndarray = None
    p: np.ndarray = None


def default_grid(model, L_z, n_target=2000):
    """Symmetric piecewise-uniform grid, 4x denser in |z| <= 2 sqrt(delta)."""
    d = model.delta
    z_f = min(2.0 * np.sqrt(d), 0.45 * L_z)
    # solve for the coarse spacing that yields about n_target nodes
    h_c = 2.0 * ((L_z - z_f) + 4.0 * z_f) / max(n_target, 16)
    h_f = h_c / 4.0
    n_f = max(int(np.ceil(z_f / h_f)), 8)
    n_c = max(int(np.ceil((L_z - z_f) / h_c)), 8)
    right = np.concatenate([np.linspace(0.0, z_f, n_f + 1),
                            np.linspace(z_f, L_z, n_c + 1)[1:]])
    return np.concatenate([-right[::-1], right[1:]])


def assemble_singular_orbit(model, s_star, L_z=None, n_target=2000):
    """Concatenate slow tails and the fast core into a full profile.

    The emitted grid profile follows the leading-order structure: the fast
    pair (s*, u_2h(z/delta)) for |z| < sqrt(delta) and the slow pair
    (u_hat(|z|), 0) outside, with a linear blend of u1 over the one grid
    cell containing the matching point.
    """
    if not takeoff_condition(model, s_star):
        raise PreconditionError("root fails the take-off sign condition")
    d = model.delta
    if L_z is None:
        from .model import endpoint_decay_rate
        lam = endpoint_decay_rate(model, model.zeros[0])
        L_z = max(12.0, 27.7 / lam)
    core = fast_homoclinic(model, s_star)
    tail = SlowTail(model, s_star, L_z)
    dp = delta_p(model, s_star)
    rp = rho_prime(model, s_star)

    z = default_grid(model, L_z, n_target)
    zm = np.sqrt(d)
    az = np.abs(z)
    u = np.zeros((len(z), model.n))
    p = np.zeros_like(u)

    slow_u = tail(az)
    slow_p = -np.sign(z) * np.abs(tail.derivative(az))
    fast_u2 = core(z / d)
    fast_p2 = core.derivative(z / d) / d

    in_fast = az < zm
    u[:, 0] = np.where(in_fast, s_star, slow_u)
    u[:, 1] = np.where(az < 2.0 * zm, fast_u2, 0.0)
    p[:, 1] = np.where(az < 2.0 * zm, fast_p2, 0.0)
    # u1 derivative: slow branch outside, linear ramp across the core
    p_match = np.abs(tail.derivative(zm))
    p[:, 0] = np.where(in_fast, -p_match * z / zm, slow_p)

    # linear blend of u1 over the cell containing the matching point
    for sign in (-1.0, 1.0):
        side = np.where(np.sign(z) == sign)[0] if sign > 0 else \
            np.where(np.sign(z) == sign)[0]
        idx = np.where((az >= zm) & (np.sign(z) == sign))[0]
        if len(idx) == 0:
            continue
        j = idx[0] if sign > 0 else idx[-1]
        k = j - 1 if sign > 0 else j + 1
        if 0 <= k < len(z):
            w = (az[k] - 0.0) / max(az[j], 1e-300)
            u[k, 0] = (1.0 - w) * s_star + w * tail(az[j])

    return SingularOrbit(s_star=float(s_star), fast_core=core, slow_tail=tail,
                         delta_p=float(dp), rho_prime=float(rp),
                         condition_ok=True, z=z, u=u, p=p)


def singular_residual(model, orbit):
    """Defect of the assembled profile in the reduced slow/fast equations.

    Measures, in grid-max norm: the full freeway residual on the slow
    region, the fast-subsystem residual on the core, and the u1 matching
    gap at |z| = sqrt(delta).  Shrinks as delta does (the matching gap
    scales like sqrt(delta) times the slow slope).
    """
    d = model.delta
    zm = np.sqrt(d)
    z = orbit.z
    az = np.abs(z)
    res = 0.0
    # slow region: both components of D^2 u'' - F(u) with u = (u_hat, 0)
    slow = az >= 2.0 * zm
    for i in np.where(slow)[0]:
        u = np.array([orbit.slow_tail(az[i]), 0.0])
        upp = np.array([model.F(np.array([u[0], 0.0]))[0], 0.0])
        # u_hat'' = F1(u_hat, 0) on the level set by construction; measure
        # the defect through the level-set identity p^2/2 = V(u)
        V = slow_potential(model, u[0])
        pz = orbit.slow_tail.derivative(az[i])
        res = max(res, abs(0.5 * pz ** 2 - V))
    # fast region: delta^2 u2'' - F2(s*, u2) via the stretched variable
    fast = az < zm
    zeta = z[fast] / d
    u2 = orbit.fast_core(zeta)
    h = 1e-4
    u2pp = (orbit.fast_core(zeta + h) - 2.0 * u2 + orbit.fast_core(zeta - h)) / h ** 2
    F2 = np.array([model.F(np.array([orbit.s_star, val]))[1] for val in u2])
    res = max(res, float(np.max(np.abs(u2pp - F2))) if len(zeta) else 0.0)
    # matching gap of u1 across the seam
    gap = abs(orbit.s_star - orbit.slow_tail(zm))
    return max(res, gap)
