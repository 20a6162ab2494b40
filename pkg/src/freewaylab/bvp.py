"""Connecting-orbit boundary value solvers and parameter continuation.

solve_freeway and solve_tollroad wrap the MIRK4 collocation core for the
second-order (2n) and fourth-order (4n) systems; continue_branch traces a
freeway branch in mu by pseudo-arclength steps, detects folds by the sign
change of d mu / d(arclength), refines the fold parameter, and extracts
the even null vector pair of the linearization there.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import make_interp_spline

from .collocation import (CollocationProblem, FreewayField, TollroadField,
                          newton_solve)
from .errors import NoConvergenceError, PreconditionError
from .model import endpoint_decay_rate, normal_hyperbolicity
from .singular import SingularOrbit, default_grid

SOLVER_TOL = 1e-11


@dataclass
class ConnectionOrbit:
    grid: np.ndarray
    u_values: np.ndarray
    p_values: np.ndarray
    v_values: np.ndarray
    q_values: np.ndarray
    orbit_type: str  # "freeway" | "tollroad"
    residual_norm: float
    phase_anchor: float
    mu: float
    delta: float
    freeway_degenerate: bool = False

    @property
    def n(self):
        return self.u_values.shape[1]

    @property
    def s(self):
        """Slow amplitude u1(0)."""
        i0 = int(np.argmin(np.abs(self.grid)))
        return float(self.u_values[i0, 0])

    def component_spline(self, which="u", comp=0, k=5):
        arr = getattr(self, which + "_values")
        return make_interp_spline(self.grid, arr[:, comp], k=k)

    def as_state(self):
        """Stack to the first-order state used by the solver fields."""
        if self.orbit_type == "freeway":
            return np.hstack([self.u_values, self.p_values])
        return np.hstack([self.u_values, self.p_values,
                          self.v_values, self.q_values])


def _orbit_from_state(z, Y, orbit_type, n, residual, mu, delta,
                      phase_anchor=0.0):
    if orbit_type == "freeway":
        u, p = Y[:, :n], Y[:, n:2 * n]
        v = np.zeros_like(u)
        q = np.zeros_like(u)
    else:
        u, p = Y[:, :n], Y[:, n:2 * n]
        v, q = Y[:, 2 * n:3 * n], Y[:, 3 * n:]
    return ConnectionOrbit(grid=z, u_values=u, p_values=p, v_values=v,
                           q_values=q, orbit_type=orbit_type,
                           residual_norm=float(residual),
                           phase_anchor=float(phase_anchor), mu=float(mu),
                           delta=float(delta))


def guess_from_singular(model, sing: SingularOrbit):
    """Freeway initial guess from the assembled singular orbit."""
    return ConnectionOrbit(grid=sing.z, u_values=sing.u, p_values=sing.p,
                           v_values=np.zeros_like(sing.u),
                           q_values=np.zeros_like(sing.u),
                           orbit_type="freeway", residual_norm=np.inf,
                           phase_anchor=0.0, mu=model.mu, delta=model.delta)


def _shifted_reference(z, Y, shift):
    """Reference orbit translated by `shift`, interpolated on the grid."""
    if shift == 0.0:
        return Y
    out = np.empty_like(Y)
    for c in range(Y.shape[1]):
        sp = make_interp_spline(z, Y[:, c], k=5)
        zz = np.clip(z - shift, z[0], z[-1])
        out[:, c] = sp(zz)
    return out


def solve_freeway(model, guess, tol=SOLVER_TOL, max_iter=40, phase_shift=0.0):
    """Newton-collocation solve of D^2 u'' = F(u) with projected BCs.

    The integral phase condition <u - ref, d ref/dz> = 0 is taken against
    the guess (optionally translated by phase_shift).
    """
    if isinstance(guess, SingularOrbit):
        guess = guess_from_singular(model, guess)
    if guess.orbit_type != "freeway":
        raise PreconditionError("freeway solver needs a freeway-type guess")
    a = model.zeros[0]
    verdict, _ = normal_hyperbolicity(model, a)
    if verdict != "hyperbolic":
        raise PreconditionError("endpoint is not normally hyperbolic")
    field = FreewayField(model)
    z = guess.grid
    ref_Y = _shifted_reference(z, guess.as_state(), phase_shift)
    a_state = np.concatenate([a, np.zeros(model.n)])
    prob = CollocationProblem(field, z, ref_Y, a_state, mu=model.mu)
    x0 = prob.pack(ref_Y, 0.0)
    x, norm = newton_solve(prob, x0, tol=tol, max_iter=max_iter)
    Y, alpha, _ = prob.unpack(x)
    return _orbit_from_state(z, Y, "freeway", model.n, norm, model.mu,
                             model.delta)


def solve_tollroad(model, guess, tol=SOLVER_TOL, max_iter=40, mu=None):
    """Newton-collocation solve of the 4n toll-road system."""
    if mu is None:
        mu = guess.mu
    work = model.with_mu(mu) if hasattr(model, "with_mu") else model
    a = work.zeros[0]
    verdict, _ = normal_hyperbolicity(work, a)
    if verdict != "hyperbolic":
        raise PreconditionError("endpoint is not normally hyperbolic")
    field = TollroadField(work)
    z = guess.grid
    if guess.orbit_type == "tollroad":
        ref_Y = guess.as_state()
    else:
        ref_Y = np.hstack([guess.u_values, guess.p_values,
                           guess.v_values, guess.q_values])
    a_state = np.concatenate([a, np.zeros(3 * work.n)])
    prob = CollocationProblem(field, z, ref_Y, a_state, mu=mu)
    x0 = prob.pack(ref_Y, 0.0)
    x, norm = newton_solve(prob, x0, tol=tol, max_iter=max_iter)
    Y, alpha, _ = prob.unpack(x)
    orbit = _orbit_from_state(z, Y, "tollroad", work.n, norm, mu, work.delta)
    if np.max(np.abs(orbit.v_values)) <= 1e-12:
        orbit.freeway_degenerate = True
    return orbit


# ---------------------------------------------------------------------------
# continuation


@dataclass
class FoldData:
    mu_sn: float
    orbit: ConnectionOrbit
    psi0: np.ndarray          # (N+1, n), even null vector of L
    psi0_dag: np.ndarray      # (N+1, n), even adjoint null vector
    smallest_sv: float


@dataclass
class Branch:
    points: list = field(default_factory=list)  # (mu, s, energy, arclength)
    orbits: list = field(default_factory=list)
    fold: FoldData = None
    diagnostic: str = ""

    def mus(self):
        return np.array([p[0] for p in self.points])

    def ss(self):
        return np.array([p[1] for p in self.points])


class _FreewayContinuation:
    """Bordered solves for freeway orbits with mu free."""

    def __init__(self, model, z, n):
        self.model = model
        self.z = z
        self.n = n
        self.nw = len(z)

    def _problem(self, ref_Y, mu, phase_mode="integral"):
        work = self.model.with_mu(mu)
        field = FreewayField(work)
        a = work.zeros[0]
        a_state = np.concatenate([a, np.zeros(self.n)])
        prob = CollocationProblem(field, self.z, ref_Y, a_state, mu=mu,
                                  free_mu=True, phase_mode=phase_mode)
        return prob

    def arclength_solve(self, ref_Y, mu_ref, Y_pred, mu_pred, tY, tmu,
                        tol=SOLVER_TOL):
        prob = self._problem(ref_Y, mu_ref)
        w = 1.0 / self.nw

        def row(Y, mu):
            val = w * np.sum((Y - Y_pred) * tY) + (mu - mu_pred) * tmu
            return val, w * tY, tmu

        prob.extra_row = row
        x0 = prob.pack(Y_pred, 0.0, mu_pred)
        x, norm = newton_solve(prob, x0, tol=tol, max_iter=30)
        return prob.unpack(x) + (norm,)

    def pinned_solve(self, ref_Y, mu_ref, s_target, tol=SOLVER_TOL):
        """Solve with u1(0) pinned to s_target, mu free.

        Uses the center-slope gauge (p1 = 0 at z = 0) so the pinned value
        is the amplitude of the even orbit, independent of the reference;
        the integral phase condition would let the profile translate and
        turn u1(0) into a gauge-dependent quantity.
        """
        prob = self._problem(ref_Y, mu_ref, phase_mode="center_slope")
        i0 = int(np.argmin(np.abs(self.z)))

        def row(Y, mu):
            dY = np.zeros_like(Y)
            dY[i0, 0] = 1.0
            return Y[i0, 0] - s_target, dY, 0.0

        prob.extra_row = row
        x0 = prob.pack(ref_Y, 0.0, mu_ref)
        x, norm = newton_solve(prob, x0, tol=tol, max_iter=30)
        return prob.unpack(x) + (norm,)


def continue_branch(model, start_orbit, mu_max, ds=0.02, max_steps=400,
                    ds_min=1e-6, ds_max=0.08, refine_fold=True):
    """Pseudo-arclength continuation of a freeway branch in mu.

    Walks from the start orbit's mu toward mu_max; on a sign change of the
    tangent's mu-component a fold is refined (to |d mu| <= 1e-8) by
    extremizing mu over the pinned amplitude s = u1(0), and the even null
    vectors of the linearization are stored.  Continuation then proceeds
    along the lower branch back toward the start parameter.
    """
    from .energy import reduced_energy

    n = model.n
    z = start_orbit.grid
    cont = _FreewayContinuation(model, z, n)
    branch = Branch()

    Y = start_orbit.as_state()
    mu = start_orbit.mu
    # second point from a small fixed-mu step to build the secant tangent
    dmu0 = min(1e-3, 0.01 * max(abs(mu_max - mu), 1e-3))
    orb2 = solve_freeway(model.with_mu(mu + dmu0),
                         _reorbit(start_orbit, model, mu + dmu0))
    Y2 = orb2.as_state()

    w = 1.0 / len(z)
    tY = (Y2 - Y)
    tmu = dmu0
    scale = np.sqrt(w * np.sum(tY ** 2) + tmu ** 2)
    tY, tmu = tY / scale, tmu / scale

    def record(Ycur, mucur, arclen):
        orb = _orbit_from_state(z, Ycur, "freeway", n, 0.0, mucur, model.delta)
        branch.points.append((float(mucur), orb.s,
                              reduced_energy(model, orb), float(arclen)))
        branch.orbits.append(orb)

    arclen = 0.0
    record(Y, mu, arclen)
    arclen += scale
    record(Y2, mu + dmu0, arclen)
    Y, mu = Y2, mu + dmu0

    fold_bracket = None
    steps = 0
    while steps < max_steps:
        steps += 1
        Y_pred = Y + ds * tY
        mu_pred = mu + ds * tmu
        try:
            Ynew, alpha, munew, norm = cont.arclength_solve(
                Y, mu, Y_pred, mu_pred, tY, tmu)
        except NoConvergenceError:
            ds *= 0.5
            if ds < ds_min:
                branch.diagnostic = "step collapse below minimum step"
                break
            continue
        tY_new = Ynew - Y
        tmu_new = munew - mu
        scale = np.sqrt(w * np.sum(tY_new ** 2) + tmu_new ** 2)
        tY_new, tmu_new = tY_new / scale, tmu_new / scale
        arclen += scale
        record(Ynew, munew, arclen)
        if tmu > 0.0 and tmu_new < 0.0:
            fold_bracket = (branch.orbits[-2], branch.orbits[-1])
        Y, mu, tY, tmu = Ynew, munew, tY_new, tmu_new
        ds = min(ds * 1.3, ds_max)
        if fold_bracket is not None and mu < branch.points[0][0]:
            break
        if fold_bracket is None and mu > mu_max:
            break

    if fold_bracket is not None and refine_fold:
        branch.fold = _refine_fold(model, cont, fold_bracket)
    return branch


def _reorbit(orbit, model, mu):
    out = ConnectionOrbit(grid=orbit.grid, u_values=orbit.u_values.copy(),
                          p_values=orbit.p_values.copy(),
                          v_values=orbit.v_values.copy(),
                          q_values=orbit.q_values.copy(),
                          orbit_type=orbit.orbit_type,
                          residual_norm=orbit.residual_norm,
                          phase_anchor=orbit.phase_anchor, mu=mu,
                          delta=model.delta)
    return out


def _refine_fold(model, cont, bracket):
    """Extremize mu over the pinned amplitude s to locate the fold."""
    lo, hi = bracket
    s_lo, s_hi = lo.s, hi.s
    if s_lo > s_hi:
        s_lo, s_hi = s_hi, s_lo
        lo, hi = hi, lo
    cache = {}

    ref = {"Y": lo.as_state(), "mu": lo.mu}

    def mu_of_s(s):
        if s in cache:
            return cache[s]
        Ynew, _, munew, _ = cont.pinned_solve(ref["Y"], ref["mu"], s)
        ref["Y"], ref["mu"] = Ynew, munew
        cache[s] = (munew, Ynew)
        return cache[s]

    # golden-section maximization of mu(s); mu is smooth and concave here.
    # The bracket amplitudes come from arclength points whose u1(0) can be
    # slightly off the even-orbit amplitude, so widen the interval.
    gr = 0.5 * (np.sqrt(5.0) - 1.0)
    pad = 0.3 * (s_hi - s_lo)
    a, b = s_lo - pad, s_hi + pad
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc, fd = mu_of_s(c)[0], mu_of_s(d)[0]
    for _ in range(200):
        if b - a < 1e-7:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = mu_of_s(c)[0]
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = mu_of_s(d)[0]
    s_fold = c if fc > fd else d
    mu_sn, Y_fold = mu_of_s(s_fold)
    orbit = _orbit_from_state(cont.z, Y_fold, "freeway", model.n, 0.0,
                              mu_sn, model.delta)

    from .spectral import fold_null_vectors
    psi0, psi0_dag, _ = fold_null_vectors(model.with_mu(mu_sn), orbit)
    sv = _collocation_fold_sv(cont, Y_fold, mu_sn)
    return FoldData(mu_sn=float(mu_sn), orbit=orbit, psi0=psi0,
                    psi0_dag=psi0_dag, smallest_sv=float(sv))


def _collocation_fold_sv(cont, Y_fold, mu_sn):
    """Smallest singular value of the linearization at the fold, after
    deflating the translational mode.

    Measured on the square collocation core (interval rows plus projected
    boundary rows, no phase row, no dummy column) of the same fourth-order
    discretization the fold was located on.  The two smallest singular
    values of that core are the translational near-kernel and the fold
    direction; the second one is returned.  Measuring on a different
    discretization would report the distance to that discretization's own
    fold, which sits O(h^2) away in mu.
    """
    from scipy.sparse import bmat
    from scipy.sparse.linalg import eigsh

    prob = cont._problem(Y_fold, mu_sn)
    J = prob.jacobian(prob.pack(Y_fold, 0.0, mu_sn))
    nY = (prob.N + 1) * prob.m
    core = J[:nY, :nY].tocsc()
    # singular values of core = |eigenvalues| of the symmetric augmented
    # matrix [[0, core], [core^T, 0]], found by shift-invert at zero
    aug = bmat([[None, core], [core.T, None]], format="csc")
    vals = eigsh(aug, k=6, sigma=0.0, which="LM",
                 return_eigenvectors=False)
    svs = np.sort(np.abs(vals))
    # each singular value appears as a +/- pair; svs[2] is the second
    # distinct one, i.e. the smallest after deflating the translation
    return float(svs[2])


# ---------------------------------------------------------------------------
# serialization


def _fmt(x):
    return f"{float(x):.17g}"


def save_orbit(orbit, csv_path, sidecar_path=None, energy=None):
    n = orbit.n
    header = (["z"] + [f"u{i+1}" for i in range(n)]
              + [f"p{i+1}" for i in range(n)] + [f"v{i+1}" for i in range(n)]
              + [f"q{i+1}" for i in range(n)])
    cols = np.column_stack([orbit.grid, orbit.u_values, orbit.p_values,
                            orbit.v_values, orbit.q_values])
    with open(csv_path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in cols:
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    if sidecar_path is not None:
        meta = {
            "orbit_type": orbit.orbit_type,
            "mu": float(orbit.mu),
            "delta": float(orbit.delta),
            "residual_norm": float(orbit.residual_norm),
            "energy": float(energy) if energy is not None else None,
        }
        with open(sidecar_path, "w") as fh:
            json.dump(meta, fh, sort_keys=True, indent=2)
            fh.write("\n")


def load_orbit(csv_path, sidecar_path):
    with open(sidecar_path) as fh:
        meta = json.load(fh)
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    ncol = data.shape[1]
    n = (ncol - 1) // 4
    z = data[:, 0]
    u = data[:, 1:1 + n]
    p = data[:, 1 + n:1 + 2 * n]
    v = data[:, 1 + 2 * n:1 + 3 * n]
    q = data[:, 1 + 3 * n:1 + 4 * n]
    return ConnectionOrbit(grid=z, u_values=u, p_values=p, v_values=v,
                           q_values=q, orbit_type=meta["orbit_type"],
                           residual_norm=meta["residual_norm"],
                           phase_anchor=0.0, mu=meta["mu"],
                           delta=meta["delta"])


def save_branch(branch, csv_path):
    with open(csv_path, "w", newline="\n") as fh:
        fh.write("mu,s,energy,fold_flag\n")
        fold_mu = branch.fold.mu_sn if branch.fold is not None else None
        for mu, s, en, _ in branch.points:
            flag = 0
            fh.write(f"{_fmt(mu)},{_fmt(s)},{_fmt(en)},{flag}\n")
        if fold_mu is not None:
            fh.write(f"{_fmt(fold_mu)},{_fmt(branch.fold.orbit.s)},"
                     f"{_fmt(0.0)},1\n")


def default_freeway_grid(model, n_target=2000, L_z=None):
    if L_z is None:
        lam = endpoint_decay_rate(model, model.zeros[0])
        L_z = max(12.0, 27.7 / lam)
    return default_grid(model, L_z, n_target)
