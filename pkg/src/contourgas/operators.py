"""Nystrom matrices and explicit inverses of the two master operators
(the holomorphic one on the deformed arc and the real-valued one on the
parameter interval), with their normalizing functionals."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as _cheb
from scipy.linalg import lu_factor, lu_solve

from .contour import subtracted_chord_kernel
from .equilibrium import InterpolationData
from .numkit import make_grid, pairwise_sum

__all__ = [
    "ChebCollocation",
    "DiscretizedOperator",
    "real_master_operator",
    "complex_master_operator",
    "finite_hilbert_transform",
    "NearSingularError",
]

_PAIR_TOL = 1e-7  # switch difference quotients to derivative rows


class NearSingularError(RuntimeError):
    pass


class ChebCollocation:
    """First-kind Chebyshev collocation on [lo, hi]: nodal values determine
    a degree n-1 interpolant; provides evaluation and derivative matrices."""

    def __init__(self, lo, hi, n):
        self.lo, self.hi, self.n = float(lo), float(hi), int(n)
        k = np.arange(n)
        u = np.cos((2 * k + 1) * np.pi / (2 * n))[::-1]
        self.u = u
        self.x = (u + 1) / 2 * (hi - lo) + lo
        # values -> Chebyshev coefficients (discrete cosine formula)
        theta = (2 * k[::-1] + 1) * np.pi / (2 * n)
        j = k[:, None]
        self.to_coef = (2.0 / n) * np.cos(j * theta[None, :])
        self.to_coef[0] *= 0.5

    def _map(self, x):
        x = np.asarray(x)
        if not np.iscomplexobj(x):
            x = x.astype(float)
        return (2 * x - (self.lo + self.hi)) / (self.hi - self.lo)

    def eval_matrix(self, targets):
        V = _cheb.chebvander(self._map(targets), self.n - 1)
        return V @ self.to_coef

    def diff_matrix(self, targets=None):
        scale = 2.0 / (self.hi - self.lo)
        der = np.zeros((self.n - 1, self.n))
        for j in range(self.n):
            e = np.zeros(self.n)
            e[j] = 1.0
            der[:, j] = _cheb.chebder(e)
        M = (der @ self.to_coef) * scale
        t = self.x if targets is None else targets
        return _cheb.chebvander(self._map(t), self.n - 2) @ M

    def interpolate(self, values, targets):
        return self.eval_matrix(targets) @ values


@dataclass
class DiscretizedOperator:
    """Dense forward matrix, normalizing-functional row and factored
    inverse for one master operator on a collocation grid."""

    colloc: ChebCollocation
    forward: np.ndarray
    k_row: np.ndarray
    _solve: object = field(repr=False, default=None)

    @property
    def grid(self):
        return self.colloc.x

    def apply(self, values):
        return self.forward @ np.asarray(values)

    def k_functional(self, values):
        return self.k_row @ np.asarray(values)

    def inverse_apply(self, values):
        return self._solve(np.asarray(values))

    def dump(self, path):
        """Dense binary dump of the assembled matrices for debugging."""
        np.savez(path, grid=self.grid, forward=self.forward, k_row=self.k_row)


def _difference_quotient_rows(targets, nodes, E_targets, E_nodes, D_targets):
    """Matrix rows sending nodal values f to (f(x_r) - f(s_p))/(x_r - s_p)
    for each (target r, node p); near-coincident pairs fall back to the
    derivative row."""
    H = np.asarray(targets)[:, None] - np.asarray(nodes)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / H
    close = np.abs(H) < _PAIR_TOL
    inv[close] = 0.0
    rows = inv[:, :, None] * (E_targets[:, None, :] - E_nodes[None, :, :])
    if np.any(close):
        ii, pp = np.nonzero(close)
        rows[ii, pp, :] = D_targets[ii, :]
    return rows


def real_master_operator(data: InterpolationData, n=64, n_quad=None):
    """Discretization of the real master operator and its explicit inverse.

    The inverse composes the flat-interval closed-form inverse with the
    Fredholm resolvent of the compact curve-dependent correction; the
    normalizing functional is assembled along the same path."""
    pad = data.sol.pad
    nq = n_quad or data.n_quad
    colloc = ChebCollocation(-pad, 1 + pad, n)
    xs = colloc.x
    gc2 = make_grid("gauss_chebyshev_sqrt", nq, (0.0, 1.0))
    gc1 = make_grid("inverse_sqrt", nq, (0.0, 1.0))
    y, w2 = gc2.nodes, (8 / np.pi) * gc2.weights
    s, w1 = gc1.nodes, gc1.weights

    E_y = colloc.eval_matrix(y)
    E_s = colloc.eval_matrix(s)
    E_x = np.eye(n)
    D_x = colloc.diff_matrix()

    g, d1, d2, d3 = data._kernel_fns()

    # forward: diag(Re V_t' g_t') - integral of the deformed difference
    # quotient against the semicircle law
    W = np.real(data.vt_prime_pullback(xs))
    Kxy = subtracted_chord_kernel(g, d1, d2, d3, xs, y)
    Kyx = subtracted_chord_kernel(g, d1, d2, d3, y, xs)
    dq = _difference_quotient_rows(xs, y, E_x, E_y, D_x)
    forward = np.diag(W)
    forward += np.diag(pairwise_sum(np.real(Kxy) * w2[None, :], axis=-1))
    forward += np.einsum("q,iq,qj->ij", w2, np.real(Kyx).T, E_y)
    forward -= np.einsum("q,iqj->ij", w2, dq)

    # flat-interval master inverse rows at collocation points
    dq_s = _difference_quotient_rows(xs, s, E_x, E_s, D_x)
    Dinv_x = np.einsum("p,ipj->ij", w1, dq_s) / (8 * np.pi)

    # K_J functional (flat interval)
    kJ = (w1 @ E_s) / np.pi

    # correction kernel tau(x, y) = Re(subtracted chord kernel at (y, x))
    # times the semicircle density, and its K_J-projected version
    tau_x = np.real(subtracted_chord_kernel(g, d1, d2, d3, y, xs)).T   # (x rows, y cols)
    tau_s = np.real(subtracted_chord_kernel(g, d1, d2, d3, y, s)).T    # (s rows, y cols)
    kJ_tau = (w1 @ tau_s) / np.pi                                      # K_J[tau(., y_q)]
    tau_x_til = tau_x - kJ_tau[None, :]
    tau_s_til = tau_s - kJ_tau[None, :]

    T_x = np.einsum("iq,q,qj->ij", tau_x_til, w2, E_y)
    T_s = np.einsum("pq,q,qj->pj", tau_s_til, w2, E_y)

    # L = flat-inverse of the projected correction, as a dense matrix:
    # L[r] = (1/8pi) sum_p w1_p (T_s[p] - T_x[r]) / (s_p - x_r)
    X = xs[:, None] - s[None, :]
    if np.min(np.abs(X)) < _PAIR_TOL:
        raise NearSingularError("collocation and quadrature grids collide")
    invX = 1.0 / X
    L = -(invX * w1[None, :]) @ T_s / (8 * np.pi)
    L += (pairwise_sum(invX * w1[None, :], axis=-1))[:, None] * T_x / (8 * np.pi)

    A = np.eye(n) + L
    sign, logdet = np.linalg.slogdet(A)
    if not np.isfinite(logdet) or np.exp(logdet) < 1e-12:
        raise NearSingularError("resolvent determinant below tolerance")
    lu = lu_factor(A)

    def solve(gvals):
        gvals = np.asarray(gvals)
        h0 = Dinv_x @ gvals
        return lu_solve(lu, h0)

    # K_{gamma_t}[g] = K_J[g] - K_J[ tau(., y) f(y) dy ] with f the inverse
    inv_mat = lu_solve(lu, Dinv_x)
    tau_row = np.einsum("q,iq,qj->ij", w2, tau_x, E_y)     # int tau(x_i, y) f(y) dy
    tau_row_s = np.einsum("q,pq,qj->pj", w2, tau_s, E_y)   # at flat GC1 nodes
    k_row = kJ - (w1 @ (tau_row_s @ inv_mat)) / np.pi

    return DiscretizedOperator(colloc, forward, k_row, solve)


def complex_master_operator(data: InterpolationData, n=64, n_quad=None):
    """Discretization of the holomorphic master operator on the deformed
    arc, with the closed-form inverse built on the prefactor of the cut
    square root."""
    pad = data.sol.pad
    nq = n_quad or data.n_quad
    colloc = ChebCollocation(-pad, 1 + pad, n)
    xs = colloc.x
    gc2 = make_grid("gauss_chebyshev_sqrt", nq, (0.0, 1.0))
    gc1 = make_grid("inverse_sqrt", nq, (0.0, 1.0))
    y, w2 = gc2.nodes, (8 / np.pi) * gc2.weights
    s, w1 = gc1.nodes, gc1.weights

    E_y = colloc.eval_matrix(y)
    E_s = colloc.eval_matrix(s)
    E_x = np.eye(n)
    D_x = colloc.diff_matrix()

    zx = data.gt(xs)
    zy = data.gt(y)
    zs = data.gt(s)
    gpx = data.gtp(xs)
    gps = data.gtp(s)
    vpx = data.vt_prime_pullback(xs) / gpx

    # forward: V_t'(z) f(z) - int (f(z)-f(w))/(z-w) dmu(w)
    Hz = zx[:, None] - zy[None, :]
    close = np.abs(xs[:, None] - y[None, :]) < _PAIR_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        invH = 1.0 / Hz
    invH[close] = 0.0
    rows = invH[:, :, None] * (E_x[:, None, :].astype(complex) - E_y[None, :, :])
    if np.any(close):
        ii, qq = np.nonzero(close)
        rows[ii, qq, :] = (D_x[ii, :] / gpx[ii, None])
    forward = np.diag(vpx).astype(complex)
    forward -= np.einsum("q,iqj->ij", w2, rows)

    st_s = data.st(s)
    st_x = data.st(xs)
    scale = np.max(np.abs(st_s))
    if np.min(np.abs(st_x)) < 1e-12 * scale or np.min(np.abs(st_s)) < 1e-12 * scale:
        raise NearSingularError("cut-square-root prefactor vanishes on the grid")

    # inverse rows: subtracted Cauchy kernel against the inverse-sqrt grid
    Hz_s = zs[None, :] - zx[:, None]
    close_s = np.abs(s[None, :] - xs[:, None]) < _PAIR_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        invHs = 1.0 / Hz_s
    invHs[close_s] = 0.0
    rows_s = invHs[:, :, None] * (E_s[None, :, :] - E_x[:, None, :].astype(complex))
    if np.any(close_s):
        ii, pp = np.nonzero(close_s)
        rows_s[ii, pp, :] = (D_x[ii, :] / gpx[ii, None])
    pref = (w1 * gps**2 * st_s)[None, :, None]
    Dinv = np.einsum("ipj->ij", pref * rows_s) / (8 * np.pi * st_x[:, None])

    k_row = (w1 * gps**2 * st_s) @ E_s / (8 * np.pi)

    def solve(gvals):
        return Dinv @ np.asarray(gvals, dtype=complex)

    op = DiscretizedOperator(colloc, forward, k_row, solve)
    op.inverse_matrix = Dinv
    return op


def finite_hilbert_transform(phi, x, n=128):
    """PV integral of phi(y) sqrt(1-y^2)/(y-x) over [-1,1] by the
    subtracted form; the classical sqrt-weight moment supplies the
    principal value of the bare kernel."""
    gc2 = make_grid("gauss_chebyshev_sqrt", n, (-1.0, 1.0))
    y, w = gc2.nodes, gc2.weights
    x = np.atleast_1d(np.asarray(x, dtype=float))
    vals = phi(y)
    out = np.empty(x.shape)
    for i, xi in enumerate(x):
        dq = (vals - phi(xi)) / (y - xi)
        out[i] = pairwise_sum(w * dq) - np.pi * xi * phi(xi)
    return out
