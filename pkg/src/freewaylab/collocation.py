"""Fourth-order collocation machinery for connecting-orbit boundary
value problems on a truncated line.

The scheme is the 3-stage Lobatto IIIA / MIRK4 discretization: per mesh
interval the unknown node values satisfy

    y_{i+1} - y_i = (h/6) (f_i + 4 f_mid + f_{i+1}),
    y_mid = (y_i + y_{i+1})/2 + (h/8) (f_i - f_{i+1}),

which is fourth-order accurate on smooth solutions.  Boundary conditions
project the endpoint deviations from the rest state onto the complements
of the unstable (left) and stable (right) invariant subspaces of the
endpoint linearization.  Translation invariance is fixed by an integral
phase condition against a reference orbit; to keep the Newton system
square, a dummy scalar multiple of the reference translation direction is
added to the field (it converges to zero).
"""

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import splu

from .errors import NoConvergenceError, PreconditionError


# ---------------------------------------------------------------------------
# first-order fields


class FreewayField:
    """y = (u, p), y' = (p, D^-2 F(u; mu)); dimension 2n."""

    def __init__(self, model):
        self.model = model
        self.n = model.n
        self.m = 2 * model.n

    def f(self, Y, mu):
        model = self.model.with_mu(mu) if hasattr(self.model, "with_mu") \
            and mu is not None else self.model
        n = self.n
        out = np.empty_like(Y)
        out[:, :n] = Y[:, n:]
        out[:, n:] = model.D2_inv * model.F_many(Y[:, :n])
        return out

    def jac(self, Y, mu):
        model = self.model.with_mu(mu) if hasattr(self.model, "with_mu") \
            and mu is not None else self.model
        n, m = self.n, self.m
        J = np.zeros((len(Y), m, m))
        J[:, :n, n:] = np.eye(n)
        J[:, n:, :n] = model.D2_inv[:, None] * model.dF_many(Y[:, :n])
        return J

    def fmu(self, Y, mu):
        model = self.model.with_mu(mu) if hasattr(self.model, "with_mu") \
            and mu is not None else self.model
        n = self.n
        out = np.zeros_like(Y)
        out[:, n:] = model.D2_inv * model.dmuF_many(Y[:, :n])
        return out

    def endpoint_matrix(self, a, mu):
        model = self.model.with_mu(mu) if hasattr(self.model, "with_mu") \
            and mu is not None else self.model
        n = self.n
        M = np.zeros((2 * n, 2 * n))
        M[:n, n:] = np.eye(n)
        M[n:, :n] = model.D2_inv[:, None] * model.dF(np.asarray(a)[:n])
        return M


class TollroadField:
    """y = (u, p, v, q); the 4n-dimensional first-order toll-road system.

    u' = p, D^2 u'' = F(u; mu) + v, v' = q, D^2 v'' = grad F(u; mu)^T v.
    """

    def __init__(self, model):
        self.model = model
        self.n = model.n
        self.m = 4 * model.n

    def _slices(self):
        n = self.n
        return slice(0, n), slice(n, 2 * n), slice(2 * n, 3 * n), slice(3 * n, 4 * n)

    def f(self, Y, mu):
        model = self.model.with_mu(mu) if hasattr(self.model, "with_mu") \
            and mu is not None else self.model
        su, sp, sv, sq = self._slices()
        U, V = Y[:, su], Y[:, sv]
        out = np.empty_like(Y)
        out[:, su] = Y[:, sp]
        out[:, sp] = model.D2_inv * (model.F_many(U) + V)
        out[:, sv] = Y[:, sq]
        dF = model.dF_many(U)
        out[:, sq] = model.D2_inv * np.einsum("kij,ki->kj", dF, V)
        return out

    def jac(self, Y, mu):
        model = self.model.with_mu(mu) if hasattr(self.model, "with_mu") \
            and mu is not None else self.model
        n, m = self.n, self.m
        su, sp, sv, sq = self._slices()
        U, V = Y[:, su], Y[:, sv]
        J = np.zeros((len(Y), m, m))
        J[:, su, sp] = np.eye(n)
        J[:, sp, su] = model.D2_inv[:, None] * model.dF_many(U)
        J[:, sp, sv] = np.diag(model.D2_inv)
        J[:, sv, sq] = np.eye(n)
        # d/du of D^-2 dF(u)^T v, then d/dv of the same row block
        A = model.hess_contract_first_many(U, V)
        # row j of q-block: D2_inv[j] * sum_k dF[k, j] v_k ; derivative wrt
        # u_l is D2_inv[j] * sum_k d2F[k, j, l] v_k = D2_inv[j] * A[j, l]
        J[:, sq, su] = model.D2_inv[:, None] * A
        dF = model.dF_many(U)
        J[:, sq, sv] = model.D2_inv[:, None] * np.swapaxes(dF, 1, 2)
        return J

    def fmu(self, Y, mu):
        model = self.model.with_mu(mu) if hasattr(self.model, "with_mu") \
            and mu is not None else self.model
        su, sp, sv, sq = self._slices()
        U, V = Y[:, su], Y[:, sv]
        out = np.zeros_like(Y)
        out[:, sp] = model.D2_inv * model.dmuF_many(U)
        dmudF = model.dmudF_many(U)
        out[:, sq] = model.D2_inv * np.einsum("kij,ki->kj", dmudF, V)
        return out

    def endpoint_matrix(self, a, mu):
        model = self.model.with_mu(mu) if hasattr(self.model, "with_mu") \
            and mu is not None else self.model
        n = self.n
        M = np.zeros((4 * n, 4 * n))
        dF = model.dF(np.asarray(a)[:n])
        M[:n, n:2 * n] = np.eye(n)
        M[n:2 * n, :n] = model.D2_inv[:, None] * dF
        M[n:2 * n, 2 * n:3 * n] = np.diag(model.D2_inv)
        M[2 * n:3 * n, 3 * n:] = np.eye(n)
        M[3 * n:, 2 * n:3 * n] = model.D2_inv[:, None] * dF.T
        return M


# ---------------------------------------------------------------------------
# invariant subspaces and boundary rows


def stable_basis(M):
    """Orthonormal basis of the stable (Re < 0) invariant subspace of M."""
    T, Z, sdim = scipy.linalg.schur(M, output="real", sort="lhp")
    if sdim == 0 or sdim == M.shape[0]:
        raise PreconditionError("endpoint linearization is not of saddle type")
    return Z[:, :sdim]


def unstable_basis(M):
    T, Z, sdim = scipy.linalg.schur(M, output="real", sort="rhp")
    if sdim == 0 or sdim == M.shape[0]:
        raise PreconditionError("endpoint linearization is not of saddle type")
    return Z[:, :sdim]


def complement_rows(B):
    """Rows spanning the orthogonal complement of the column span of B."""
    Q, _ = np.linalg.qr(B, mode="complete")
    return Q[:, B.shape[1]:].T


# ---------------------------------------------------------------------------
# the assembled nonlinear system


class CollocationProblem:
    """Discrete connecting-orbit problem on a fixed grid.

    Unknowns: node values Y (N+1, m), dummy scalar alpha, and optionally
    the parameter mu.  Equations: N*m interval conditions, m projected
    boundary conditions, one phase condition, and optionally one
    continuation (arclength or pinning) row.
    """

    def __init__(self, field, z, ref_Y, rest_state, mu, free_mu=False,
                 phase_mode="integral"):
        self.field = field
        self.z = np.asarray(z, dtype=float)
        self.h = np.diff(self.z)
        self.N = len(self.z) - 1
        self.m = field.m
        self.n = field.n
        self.mu = mu
        self.free_mu = free_mu
        # "integral": <u - ref, d ref/dz> = 0 relative to the reference;
        # "center_slope": p_1 = 0 at the node nearest z = 0, pinning the
        # symmetry point of an even orbit (gauge-free across solves).
        self.phase_mode = phase_mode
        self.i_center = int(np.argmin(np.abs(self.z)))
        self.a = np.asarray(rest_state, dtype=float)
        self.set_reference(ref_Y)
        self._bc_rows(mu)
        self.extra_row = None  # callable (Y, mu) -> (value, dY_row, dmu)

    def set_reference(self, ref_Y):
        """Fix the phase reference and the dummy direction from ref_Y."""
        self.ref_Y = np.array(ref_Y, dtype=float)
        # Dummy direction: the field along the reference, tapered by the
        # odd weight tanh(z).  The untapered field direction lies in the
        # range of the linearization (explicit bounded preimage z Y'),
        # so it cannot border the cokernel left by the reversible
        # structure; the odd taper breaks that parity.
        g_nodes = self.field.f(self.ref_Y, self.mu)
        ref_mid = 0.5 * (self.ref_Y[:-1] + self.ref_Y[1:]) \
            + (self.h / 8.0)[:, None] * (g_nodes[:-1] - g_nodes[1:])
        z_mid = 0.5 * (self.z[:-1] + self.z[1:])
        self.g_nodes = np.tanh(self.z)[:, None] * g_nodes
        self.g_mid = np.tanh(z_mid)[:, None] * self.field.f(ref_mid, self.mu)
        # trapezoid weights for the integral phase condition
        w = np.zeros(self.N + 1)
        w[:-1] += 0.5 * self.h
        w[1:] += 0.5 * self.h
        self.phase_w = w
        self.phase_du = g_nodes[:, :self.n]  # d/dz of reference u

    def _bc_rows(self, mu):
        M = self.field.endpoint_matrix(self.a, mu)
        self.rows_left = complement_rows(unstable_basis(M))
        self.rows_right = complement_rows(stable_basis(M))

    def n_unknowns(self):
        return (self.N + 1) * self.m + 1 + (1 if self.free_mu else 0)

    def pack(self, Y, alpha, mu=None):
        parts = [Y.ravel(), [alpha]]
        if self.free_mu:
            parts.append([mu])
        return np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts])

    def unpack(self, x):
        nY = (self.N + 1) * self.m
        Y = x[:nY].reshape(self.N + 1, self.m)
        alpha = x[nY]
        mu = x[nY + 1] if self.free_mu else self.mu
        return Y, alpha, mu

    # -- residual -----------------------------------------------------------

    def residual(self, x):
        Y, alpha, mu = self.unpack(x)
        h = self.h[:, None]
        F = self.field.f(Y, mu) + alpha * self.g_nodes
        Y_mid = 0.5 * (Y[:-1] + Y[1:]) + (h / 8.0) * (F[:-1] - F[1:])
        F_mid = self.field.f(Y_mid, mu) + alpha * self.g_mid
        Phi = Y[1:] - Y[:-1] - (h / 6.0) * (F[:-1] + 4.0 * F_mid + F[1:])
        bcl = self.rows_left @ (Y[0] - self.a)
        bcr = self.rows_right @ (Y[-1] - self.a)
        if self.phase_mode == "center_slope":
            phase = Y[self.i_center, self.n]
        else:
            phase = np.sum(self.phase_w[:, None]
                           * (Y[:, :self.n] - self.ref_Y[:, :self.n])
                           * self.phase_du)
        parts = [Phi.ravel(), bcl, bcr, [phase]]
        if self.extra_row is not None:
            val, _, _ = self.extra_row(Y, mu)
            parts.append([val])
        return np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts])

    # -- Jacobian -----------------------------------------------------------

    def jacobian(self, x):
        Y, alpha, mu = self.unpack(x)
        N, m = self.N, self.m
        h = self.h[:, None, None]
        hcol = self.h[:, None]

        F = self.field.f(Y, mu) + alpha * self.g_nodes
        J = self.field.jac(Y, mu)
        Y_mid = 0.5 * (Y[:-1] + Y[1:]) + (hcol / 8.0) * (F[:-1] - F[1:])
        Jm = self.field.jac(Y_mid, mu)

        eye = np.eye(m)
        dym_dyi = 0.5 * eye + (h / 8.0) * J[:-1]
        dym_dyj = 0.5 * eye - (h / 8.0) * J[1:]
        A = -eye - (h / 6.0) * (J[:-1] + 4.0 * np.matmul(Jm, dym_dyi))
        B = eye - (h / 6.0) * (J[1:] + 4.0 * np.matmul(Jm, dym_dyj))

        # dummy column
        gm_eff = self.g_mid + np.einsum(
            "kij,kj->ki", Jm, (hcol / 8.0) * (self.g_nodes[:-1] - self.g_nodes[1:]))
        dalpha = -(hcol / 6.0) * (self.g_nodes[:-1] + 4.0 * gm_eff
                                  + self.g_nodes[1:])

        rows, cols, vals = [], [], []

        # interval blocks
        blk_rows = (np.arange(N)[:, None, None] * m
                    + np.arange(m)[None, :, None])
        ci = (np.arange(N)[:, None, None] * m + np.arange(m)[None, None, :])
        cj = ci + m
        big_rows = np.broadcast_to(blk_rows, (N, m, m))
        rows.append(big_rows.ravel())
        cols.append(np.broadcast_to(ci, (N, m, m)).ravel())
        vals.append(A.ravel())
        rows.append(big_rows.ravel())
        cols.append(np.broadcast_to(cj, (N, m, m)).ravel())
        vals.append(B.ravel())

        nY = (N + 1) * m
        alpha_col = nY
        r_int = (np.arange(N)[:, None] * m + np.arange(m)[None, :]).ravel()
        rows.append(r_int)
        cols.append(np.full(N * m, alpha_col))
        vals.append(dalpha.ravel())

        if self.free_mu:
            fmu = self.field.fmu(Y, mu)
            fmu_mid = self.field.fmu(Y_mid, mu)
            dym_dmu = (hcol / 8.0) * (fmu[:-1] - fmu[1:])
            dFm_dmu = fmu_mid + np.einsum("kij,kj->ki", Jm, dym_dmu)
            dmu_col = -(hcol / 6.0) * (fmu[:-1] + 4.0 * dFm_dmu + fmu[1:])
            rows.append(r_int)
            cols.append(np.full(N * m, nY + 1))
            vals.append(dmu_col.ravel())

        # boundary rows
        r0 = N * m
        kl = self.rows_left.shape[0]
        rows.append(np.repeat(np.arange(r0, r0 + kl), m))
        cols.append(np.tile(np.arange(m), kl))
        vals.append(self.rows_left.ravel())
        r1 = r0 + kl
        kr = self.rows_right.shape[0]
        rows.append(np.repeat(np.arange(r1, r1 + kr), m))
        cols.append(np.tile(np.arange(N * m, (N + 1) * m), kr))
        vals.append(self.rows_right.ravel())

        # phase row
        rp = r1 + kr
        if self.phase_mode == "center_slope":
            rows.append([rp])
            cols.append([self.i_center * m + self.n])
            vals.append([1.0])
        else:
            pr_cols = (np.arange(N + 1)[:, None] * m
                       + np.arange(self.n)[None, :])
            pr_vals = self.phase_w[:, None] * self.phase_du
            rows.append(np.full((N + 1) * self.n, rp))
            cols.append(pr_cols.ravel())
            vals.append(pr_vals.ravel())

        if self.extra_row is not None:
            _, dY_row, dmu_val = self.extra_row(Y, mu)
            re = rp + 1
            idx = np.nonzero(dY_row.ravel())[0]
            rows.append(np.full(len(idx), re))
            cols.append(idx)
            vals.append(dY_row.ravel()[idx])
            if self.free_mu and dmu_val != 0.0:
                rows.append([re])
                cols.append([nY + 1])
                vals.append([dmu_val])

        n_eq = N * m + kl + kr + 1 + (1 if self.extra_row is not None else 0)
        Jmat = coo_matrix(
            (np.concatenate(vals),
             (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_eq, self.n_unknowns()))
        return Jmat.tocsc()


def newton_solve(problem, x0, tol=1e-11, max_iter=40, verbose=False):
    """Damped Newton iteration on the collocation system."""
    x = np.array(x0, dtype=float)
    res = problem.residual(x)
    norm = np.max(np.abs(res))
    for it in range(max_iter):
        if norm <= tol:
            return x, norm
        J = problem.jacobian(x)
        try:
            lu = splu(J)
        except RuntimeError as exc:
            raise NoConvergenceError(f"linear solve failed: {exc}", residual=norm)
        dx = lu.solve(-res)
        lam, accepted = 1.0, False
        for _ in range(25):
            trial = x + lam * dx
            r_trial = problem.residual(trial)
            n_trial = np.max(np.abs(r_trial))
            if n_trial < norm or n_trial <= tol:
                x, res, norm = trial, r_trial, n_trial
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            raise NoConvergenceError(
                f"Newton stalled at residual {norm:.3e}", residual=norm)
        if verbose:
            print(f"  newton iter {it}: residual {norm:.3e}")
    if norm <= tol:
        return x, norm
    raise NoConvergenceError(
        f"Newton did not reach tolerance, residual {norm:.3e}", residual=norm)
