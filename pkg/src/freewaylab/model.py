"""Multicomponent vector fields and the concrete two-component bilayer model.

A model bundles an n-component vector field F(u; mu, delta), its first and
second u-derivatives, its mu-derivatives, and the positive diagonal
diffusivity matrix D.  Everything downstream (singular construction, BVP
solvers, spectral checks, energy audits) consumes this interface.

The concrete instantiation is the phospholipid-cholesterol bilayer (PCB)
field

    F1(u) = W'(u1) - (1/(3 delta)) f(u1)^2 u2^2 T(u1; mu)
    F2(u) = u2 - f(u1) u2^2

with a double well W, a positive non-increasing coupling f, and a linear
take-off line T.  All derivatives are hand-coded; finite differences are
used only as test oracles.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, PreconditionError

#: eigenvalues with |Im| below this are treated as real when classifying
REAL_AXIS_TOL = 1e-10


@dataclass(frozen=True)
class PcbParams:
    """Parameters of the bilayer vector field.

    W'(u) = c_w * u (u - m)(u - 1), f(s) = f0 exp(-f1 s),
    T(s; mu) = (1 + mu)(t0 + t1 s).
    """

    m: float = 0.25
    c_w: float = 24.0
    f0: float = 1.0
    f1: float = 0.5
    t0: float = 0.1
    t1: float = 0.4
    delta: float = 0.05

    def __post_init__(self):
        if not (0.0 < self.m < 0.5):
            raise DomainError("m must lie in (0, 1/2) so that W(1) < 0")
        if self.c_w <= 0.0:
            raise DomainError("c_w must be positive")
        if self.f0 <= 0.0 or self.f1 < 0.0:
            raise DomainError("need f0 > 0 and f1 >= 0")
        if not (0.0 < self.delta < 1.0):
            raise DomainError("delta must lie in (0, 1)")


class VectorFieldModel:
    """Generic n-component vector field with analytic derivatives.

    Parameters
    ----------
    n : component count.
    d_entries : positive diagonal of D, length n.
    delta : scale-separation parameter in (0, 1).
    mu : bifurcation parameter.
    zeros : list of rest states a with F(a) = 0.
    F, dF, d2F : callables u -> (n,), (n, n), (n, n, n).
    dmuF, dmudF : callables u -> (n,), (n, n); default to zero.
    """

    def __init__(self, n, d_entries, delta, mu, zeros, F, dF, d2F,
                 dmuF=None, dmudF=None):
        self.n = int(n)
        self.d_entries = np.asarray(d_entries, dtype=float)
        if self.d_entries.shape != (self.n,) or np.any(self.d_entries <= 0):
            raise DomainError("d_entries must be a positive diagonal of length n")
        self.delta = float(delta)
        self.mu = float(mu)
        self.zeros = [np.asarray(a, dtype=float) for a in zeros]
        self._F = F
        self._dF = dF
        self._d2F = d2F
        self._dmuF = dmuF
        self._dmudF = dmudF

    # -- evaluators ---------------------------------------------------------

    def F(self, u):
        return self._F(np.asarray(u, dtype=float))

    def dF(self, u):
        return self._dF(np.asarray(u, dtype=float))

    def d2F(self, u):
        return self._d2F(np.asarray(u, dtype=float))

    def dmuF(self, u):
        if self._dmuF is None:
            return np.zeros(self.n)
        return self._dmuF(np.asarray(u, dtype=float))

    def dmudF(self, u):
        if self._dmudF is None:
            return np.zeros((self.n, self.n))
        return self._dmudF(np.asarray(u, dtype=float))

    # -- derived matrices ---------------------------------------------------

    @property
    def D2(self):
        """Diagonal of D^2."""
        return self.d_entries ** 2

    @property
    def D2_inv(self):
        """Diagonal of D^-2."""
        return self.d_entries ** -2

    def G(self, u):
        """D^-2 F(u), the field of the normalized second-order system."""
        return self.D2_inv * self.F(u)

    def dG(self, u):
        return self.D2_inv[:, None] * self.dF(u)

    # -- vectorized evaluation over node batches ---------------------------
    # Subclasses may override these with closed-form broadcasts; the
    # defaults loop over rows of U (shape (k, n)).

    def F_many(self, U):
        return np.array([self.F(u) for u in U])

    def dF_many(self, U):
        return np.array([self.dF(u) for u in U])

    def dmuF_many(self, U):
        return np.array([self.dmuF(u) for u in U])

    def dmudF_many(self, U):
        return np.array([self.dmudF(u) for u in U])

    def hess_contract_first_many(self, U, V):
        """A[i, j] = sum_k d2F_k/du_i du_j * v_k per node; shape (k, n, n)."""
        out = np.empty((len(U), self.n, self.n))
        for r, (u, v) in enumerate(zip(U, V)):
            H = self.d2F(u)
            out[r] = np.einsum("kij,k->ij", H, v)
        return out


class PcbModel(VectorFieldModel):
    """The bilayer field with scalar helpers used by the slow-fast analysis."""

    def __init__(self, params=None, mu=0.0):
        p = params if params is not None else PcbParams()
        self.params = p
        super().__init__(
            n=2,
            d_entries=[1.0, p.delta],
            delta=p.delta,
            mu=mu,
            zeros=[np.zeros(2)],
            F=self._eval_F,
            dF=self._eval_dF,
            d2F=self._eval_d2F,
            dmuF=self._eval_dmuF,
            dmudF=self._eval_dmudF,
        )

    def with_mu(self, mu):
        return PcbModel(self.params, mu=mu)

    def with_delta(self, delta):
        return PcbModel(replace(self.params, delta=delta), mu=self.mu)

    # -- scalar ingredients -------------------------------------------------

    def W(self, u):
        p = self.params
        u = np.asarray(u, dtype=float)
        return p.c_w * (u ** 4 / 4.0 - (1.0 + p.m) * u ** 3 / 3.0
                        + p.m * u ** 2 / 2.0)

    def Wp(self, u):
        p = self.params
        u = np.asarray(u, dtype=float)
        return p.c_w * u * (u - p.m) * (u - 1.0)

    def Wpp(self, u):
        p = self.params
        u = np.asarray(u, dtype=float)
        return p.c_w * (3.0 * u ** 2 - 2.0 * (1.0 + p.m) * u + p.m)

    def Wppp(self, u):
        p = self.params
        u = np.asarray(u, dtype=float)
        return p.c_w * (6.0 * u - 2.0 * (1.0 + p.m))

    def f(self, s):
        p = self.params
        return p.f0 * np.exp(-p.f1 * np.asarray(s, dtype=float))

    def fp(self, s):
        return -self.params.f1 * self.f(s)

    def fpp(self, s):
        return self.params.f1 ** 2 * self.f(s)

    def take_off(self, s, mu=None):
        """T(s; mu) = (1 + mu)(t0 + t1 s)."""
        p = self.params
        if mu is None:
            mu = self.mu
        return (1.0 + mu) * (p.t0 + p.t1 * np.asarray(s, dtype=float))

    def dT_ds(self, s, mu=None):
        if mu is None:
            mu = self.mu
        return (1.0 + mu) * self.params.t1 * np.ones_like(np.asarray(s, dtype=float))

    def dT_dmu(self, s, mu=None):
        p = self.params
        return p.t0 + p.t1 * np.asarray(s, dtype=float)

    def well_positive_zero(self):
        """The positive zero u0 of W in (m, 1), by bisection."""
        lo, hi = self.params.m, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.W(mid) > 0.0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    # -- vector field -------------------------------------------------------

    def _eval_F(self, u):
        u1, u2 = u
        d = self.delta
        f = self.f(u1)
        T = self.take_off(u1)
        F1 = self.Wp(u1) - (f * f * u2 * u2 * T) / (3.0 * d)
        F2 = u2 - f * u2 * u2
        return np.array([F1, F2])

    def _eval_dF(self, u):
        u1, u2 = u
        d = self.delta
        f, fp = self.f(u1), self.fp(u1)
        T, Tp = self.take_off(u1), self.dT_ds(u1)
        J = np.empty((2, 2))
        J[0, 0] = self.Wpp(u1) - (u2 * u2 / (3.0 * d)) * (2.0 * f * fp * T + f * f * Tp)
        J[0, 1] = -(2.0 * f * f * u2 * T) / (3.0 * d)
        J[1, 0] = -fp * u2 * u2
        J[1, 1] = 1.0 - 2.0 * f * u2
        return J

    def _eval_d2F(self, u):
        u1, u2 = u
        d = self.delta
        f, fp, fpp = self.f(u1), self.fp(u1), self.fpp(u1)
        T, Tp = self.take_off(u1), self.dT_ds(u1)
        H = np.zeros((2, 2, 2))
        # component 1; T'' = 0 for the linear take-off line
        H[0, 0, 0] = self.Wppp(u1) - (u2 * u2 / (3.0 * d)) * (
            2.0 * (fp * fp + f * fpp) * T + 4.0 * f * fp * Tp)
        H[0, 0, 1] = -(2.0 * u2 / (3.0 * d)) * (2.0 * f * fp * T + f * f * Tp)
        H[0, 1, 0] = H[0, 0, 1]
        H[0, 1, 1] = -(2.0 * f * f * T) / (3.0 * d)
        # component 2
        H[1, 0, 0] = -fpp * u2 * u2
        H[1, 0, 1] = -2.0 * fp * u2
        H[1, 1, 0] = H[1, 0, 1]
        H[1, 1, 1] = -2.0 * f
        return H

    def _eval_dmuF(self, u):
        u1, u2 = u
        f = self.f(u1)
        return np.array([-(f * f * u2 * u2 * self.dT_dmu(u1)) / (3.0 * self.delta),
                         0.0])

    def _eval_dmudF(self, u):
        u1, u2 = u
        d = self.delta
        f, fp = self.f(u1), self.fp(u1)
        Tmu = self.dT_dmu(u1)
        J = np.zeros((2, 2))
        J[0, 0] = -(u2 * u2 / (3.0 * d)) * (2.0 * f * fp * Tmu + f * f * self.params.t1)
        J[0, 1] = -(2.0 * f * f * u2 * Tmu) / (3.0 * d)
        return J

    # -- vectorized batches -------------------------------------------------

    def F_many(self, U):
        u1, u2 = U[:, 0], U[:, 1]
        d = self.delta
        f = self.f(u1)
        T = self.take_off(u1)
        out = np.empty_like(U)
        out[:, 0] = self.Wp(u1) - (f * f * u2 * u2 * T) / (3.0 * d)
        out[:, 1] = u2 - f * u2 * u2
        return out

    def dF_many(self, U):
        u1, u2 = U[:, 0], U[:, 1]
        d = self.delta
        f, fp = self.f(u1), self.fp(u1)
        T, Tp = self.take_off(u1), self.dT_ds(u1)
        J = np.empty((len(U), 2, 2))
        J[:, 0, 0] = self.Wpp(u1) - (u2 * u2 / (3.0 * d)) * (2.0 * f * fp * T + f * f * Tp)
        J[:, 0, 1] = -(2.0 * f * f * u2 * T) / (3.0 * d)
        J[:, 1, 0] = -fp * u2 * u2
        J[:, 1, 1] = 1.0 - 2.0 * f * u2
        return J

    def dmuF_many(self, U):
        u1, u2 = U[:, 0], U[:, 1]
        f = self.f(u1)
        out = np.zeros_like(U)
        out[:, 0] = -(f * f * u2 * u2 * self.dT_dmu(u1)) / (3.0 * self.delta)
        return out

    def dmudF_many(self, U):
        u1, u2 = U[:, 0], U[:, 1]
        d = self.delta
        f, fp = self.f(u1), self.fp(u1)
        Tmu = self.dT_dmu(u1)
        J = np.zeros((len(U), 2, 2))
        J[:, 0, 0] = -(u2 * u2 / (3.0 * d)) * (2.0 * f * fp * Tmu + f * f * self.params.t1)
        J[:, 0, 1] = -(2.0 * f * f * u2 * Tmu) / (3.0 * d)
        return J

    def hess_contract_first_many(self, U, V):
        u1, u2 = U[:, 0], U[:, 1]
        v1, v2 = V[:, 0], V[:, 1]
        d = self.delta
        f, fp, fpp = self.f(u1), self.fp(u1), self.fpp(u1)
        T, Tp = self.take_off(u1), self.dT_ds(u1)
        h100 = self.Wppp(u1) - (u2 * u2 / (3.0 * d)) * (
            2.0 * (fp * fp + f * fpp) * T + 4.0 * f * fp * Tp)
        h101 = -(2.0 * u2 / (3.0 * d)) * (2.0 * f * fp * T + f * f * Tp)
        h111 = -(2.0 * f * f * T) / (3.0 * d)
        h200 = -fpp * u2 * u2
        h201 = -2.0 * fp * u2
        h211 = -2.0 * f
        A = np.empty((len(U), 2, 2))
        A[:, 0, 0] = v1 * h100 + v2 * h200
        A[:, 0, 1] = v1 * h101 + v2 * h201
        A[:, 1, 0] = A[:, 0, 1]
        A[:, 1, 1] = v1 * h111 + v2 * h211
        return A


def make_pcb(params=None, mu=0.0):
    """Construct the bilayer model with the library defaults."""
    return PcbModel(params, mu=mu)


def make_scalar_sech2():
    """Scalar sanity fixture: D = 1, F(u) = u - 3u^2/2.

    The second-order system u'' = F(u) has the explicit homoclinic
    u(z) = sech^2(z/2), whose linearization is a solvable sech^2 potential.
    """
    def F(u):
        return np.array([u[0] - 1.5 * u[0] ** 2])

    def dF(u):
        return np.array([[1.0 - 3.0 * u[0]]])

    def d2F(u):
        return np.array([[[-3.0]]])

    return VectorFieldModel(n=1, d_entries=[1.0], delta=1.0, mu=0.0,
                            zeros=[np.zeros(1)], F=F, dF=dF, d2F=d2F)


def eval_field(model, u):
    """Evaluate F(u), rejecting non-finite input."""
    u = np.asarray(u, dtype=float)
    if u.shape != (model.n,):
        raise DomainError(f"expected a vector of length {model.n}")
    if not np.all(np.isfinite(u)):
        raise DomainError("non-finite input to eval_field")
    return model.F(u)


def normal_hyperbolicity(model, a, zero_tol=1e-10):
    """Classify a rest state of the second-order flow.

    Returns (verdict, eigenvalues) where verdict is "hyperbolic" iff no
    eigenvalue of D^-2 grad F(a) lies in (-inf, 0].  An eigenvalue counts
    as real when |Im| <= 1e-10.
    """
    a = np.asarray(a, dtype=float)
    if np.max(np.abs(model.F(a))) > zero_tol:
        raise PreconditionError("a is not a zero of F")
    A = model.dG(a)
    eigs = np.linalg.eigvals(A)
    bad = (np.abs(eigs.imag) <= REAL_AXIS_TOL) & (eigs.real <= 0.0)
    verdict = "degenerate" if np.any(bad) else "hyperbolic"
    return verdict, eigs


def endpoint_decay_rate(model, a):
    """Slowest spatial decay rate of the linearization at a hyperbolic zero.

    Eigenvalues lam of D^-2 grad F(a) give spatial rates +-sqrt(lam); the
    slowest is min over lam of Re sqrt(lam).
    """
    verdict, eigs = normal_hyperbolicity(model, a)
    if verdict != "hyperbolic":
        raise PreconditionError("endpoint is not normally hyperbolic")
    return float(np.min(np.real(np.sqrt(eigs.astype(complex)))))
