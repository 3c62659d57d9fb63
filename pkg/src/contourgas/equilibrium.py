"""One-cut equilibrium data: endpoint solving, the cut square root and its
polynomial part, densities, interpolating potentials, effective potentials,
variational-condition checks, and the energy/entropy functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contour import (Curve, CurveFamily, affine_curve, semicircle_cdf,
                      semicircle_parametrization, subtracted_chord_kernel)
from .numkit import ComplexPolynomial, WeightedGrid, make_grid, pairwise_sum, track_arg

__all__ = [
    "OneCutSolution",
    "InterpolationData",
    "solve_one_cut",
    "interpolation_data",
    "NoSolutionError",
    "NotOneCutError",
    "PathError",
    "LN2",
]

LN2 = math.log(2.0)


class NoSolutionError(RuntimeError):
    pass


class NotOneCutError(RuntimeError):
    pass


class PathError(ValueError):
    pass


def _loop_coefficients(vprime, z1, z2, kmax, n_loop=512, rad_fac=3.0):
    """Laurent coefficients (in w = s - midpoint) of V'(s)/r(s) at infinity,
    r the square root of (s-z1)(s-z2) cut between the endpoints and ~ s.
    Returned for powers kmax .. -2."""
    mid = 0.5 * (z1 + z2)
    d = 0.5 * (z2 - z1)
    R = rad_fac * max(1.0, abs(d))
    th = 2 * np.pi * np.arange(n_loop) / n_loop
    w = R * np.exp(1j * th)
    s = mid + w
    u = w / d
    r = d * u * np.sqrt(1 - u**-2)
    q = vprime(s) / r
    return {k: np.mean(q * w ** (-float(k))) for k in range(kmax, -3, -1)}


def _endpoint_residual(vprime, z1, z2):
    c = _loop_coefficients(vprime, z1, z2, 0)
    return np.array([c[-1], c[-2] - 1.0])


def solve_one_cut(V: ComplexPolynomial, seeds=None, tol=1e-12, maxit=50,
                  pad=0.05, n_grid=64, homotopy_steps=8, validate=True):
    """Endpoints and polynomial part of the one-cut equilibrium data for a
    polynomial potential.

    The two endpoint conditions force V'(z) - sqrtR(z) = 1/z + O(1/z^2) at
    infinity (unit-mass Cauchy transform): the 1/z and 1/z^2 coefficients of
    V'/r must equal 0 and 1.  Newton iteration with half-step damping; the
    polynomial part of V'/r is read off the same loop integrals.
    """
    kappa = V.degree
    if kappa < 2:
        raise NoSolutionError("potential degree must be >= 2")
    vprime = V.deriv()

    if seeds is None:
        # homotopy from the quadratic z^2/2 toward V
        z = np.array([-math.sqrt(2), math.sqrt(2)], dtype=complex)
        for s in np.linspace(1.0 / homotopy_steps, 1.0, homotopy_steps):
            mix = ComplexPolynomial(
                np.polynomial.polynomial.polyadd(
                    np.asarray(V.coeffs, dtype=complex) * s,
                    np.array([0, 0, (1 - s) / 2], dtype=complex)))
            z = _newton_endpoints(mix.deriv(), z, tol, maxit)
    else:
        z = np.array([complex(seeds[0]), complex(seeds[1])])
        z = _newton_endpoints(vprime, z, tol, maxit)

    z1, z2 = z
    c = _loop_coefficients(vprime, z1, z2, kappa - 2)
    mid = 0.5 * (z1 + z2)
    S_w = ComplexPolynomial([c[k] for k in range(kappa - 1)])
    lead = S_w.coeffs[-1]
    # leading coefficient of the polynomial part is kappa * (leading of V);
    # monic exactly when V is normalized to z^kappa/kappa + ...
    expected = kappa * V.coeffs[-1]
    if abs(lead / expected - 1.0) > 1e-8:
        raise NotOneCutError(f"polynomial part has leading {lead}, expected {expected}")
    S = ComplexPolynomial(S_w.shift(-mid).coeffs)

    grid = make_grid("gauss_chebyshev_sqrt", n_grid, (0.0, 1.0))
    sol = OneCutSolution(V, z1, z2, S, grid, pad)
    if validate:
        sol.validate()
    return sol


def _newton_endpoints(vprime, z, tol, maxit):
    for _ in range(maxit):
        F = _endpoint_residual(vprime, z[0], z[1])
        if np.max(np.abs(F)) < tol:
            return z
        h = 1e-7
        J = np.zeros((2, 2), dtype=complex)
        for j in range(2):
            zp = z.copy()
            zp[j] += h
            J[:, j] = (_endpoint_residual(vprime, zp[0], zp[1]) - F) / h
        try:
            dz = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise NoSolutionError("singular endpoint Jacobian") from exc
        lam = 1.0
        base = np.max(np.abs(F))
        while lam > 2**-20:
            zn = z + lam * dz
            if np.max(np.abs(_endpoint_residual(vprime, zn[0], zn[1]))) < base:
                break
            lam *= 0.5
        z = z + lam * dz
    raise NoSolutionError("endpoint Newton did not converge from the seed")


def _log_abs_distance(point_fn, x0, nu_grid):
    """int ln|gamma(x0) - gamma(y)| dnu(y): smooth chord/parameter ratio by
    quadrature plus the closed-form logarithmic moment of the flat kernel."""
    y = nu_grid.nodes
    z0 = complex(point_fn(np.array([x0]))[0])
    g = point_fn(y)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.log(np.abs((z0 - g) / (x0 - y)))
    if np.any(~np.isfinite(lam)):
        raise ValueError("reference parameter coincides with a grid node")
    smooth = (8 / np.pi) * pairwise_sum(nu_grid.weights * lam)
    flat = 4 * x0 * (x0 - 1) + 0.5 - 2 * LN2
    return smooth + flat


def _arg_average(point_fn, x0, n=400):
    """Average of the two-sided boundary arguments of the log potential at
    gamma(x0), from one-sided branch-tracked argument integrals."""
    z0 = point_fn(x0)
    total = 0.0
    for (a, b, fwd) in ((0.0, x0, True), (x0, 1.0, False)):
        gl = make_grid("gauss_legendre", n, (a, b))
        ys = gl.nodes if fwd else gl.nodes[::-1]
        diff = (z0 - point_fn(ys)) if fwd else (point_fn(ys) - z0)
        tr = track_arg(diff)
        args = tr.args if fwd else tr.args[::-1]
        dens = (8 / np.pi) * np.sqrt(gl.nodes * (1 - gl.nodes))
        total += pairwise_sum(gl.weights * dens * args)
    return -total


def _log_deriv_tracked(deriv_fn, nu_grid, chord):
    """Branch-tracked log of the curve slope on the measure grid, anchored
    near the chord direction."""
    y = nu_grid.nodes
    gp = deriv_fn(y)
    tr = track_arg(gp)
    mid = len(y) // 2
    target = np.angle(chord)
    shift = 2 * np.pi * round((target - tr.args[mid]) / (2 * np.pi))
    return np.log(np.abs(gp)) + 1j * (tr.args + shift)


@dataclass
class OneCutSolution:
    """Endpoints, monic polynomial part S of the cut square root, and the
    support quadrature grid; the analytic parametrization is built lazily."""

    potential: ComplexPolynomial
    zeta1: complex
    zeta2: complex
    S: ComplexPolynomial
    support_grid: WeightedGrid
    pad: float = 0.05
    pad_outer: float = 0.10
    _curve: Curve = field(default=None, repr=False)
    _family: CurveFamily = field(default=None, repr=False)

    @property
    def midpoint(self):
        return 0.5 * (self.zeta1 + self.zeta2)

    @property
    def R(self):
        lin = ComplexPolynomial([self.zeta1 * self.zeta2,
                                 -(self.zeta1 + self.zeta2), 1.0])
        c = np.polynomial.polynomial.polymul(
            np.polynomial.polynomial.polymul(self.S.coeffs, self.S.coeffs), lin.coeffs)
        return ComplexPolynomial(c)

    @property
    def curve(self):
        # built on the outer pad so that phase cutoffs have room to decay
        if self._curve is None:
            if self.S.degree == 0:
                self._curve = affine_curve(self.zeta1, self.zeta2, self.pad_outer)
            else:
                self._curve = semicircle_parametrization(
                    self.S, self.zeta1, self.zeta2, pad=self.pad_outer)
        return self._curve

    @property
    def family(self):
        if self._family is None:
            self._family = CurveFamily(self.curve, self.zeta1, self.zeta2)
        return self._family

    # -- measure ---------------------------------------------------------

    def nu_integrate(self, values):
        """Integral against the pulled-back equilibrium measure (the [0,1]
        semicircle law) sampled at the support grid nodes."""
        return (8 / np.pi) * pairwise_sum(self.support_grid.weights * np.asarray(values))

    def density(self, z):
        """Complex density dmu/dz at a point on the support arc."""
        x = self.curve.invert(z)
        if abs(x.imag) > 1e-7 or x.real < -1e-9 or x.real > 1 + 1e-9:
            raise ValueError(f"{z} is not on the support arc")
        xr = min(max(x.real, 0.0), 1.0)
        return (8 / np.pi) * math.sqrt(xr * (1 - xr)) / self.curve.deriv1(xr)

    def mass_residual(self):
        """1/z-coefficient mismatch of V' - sqrtR (zero for unit mass)."""
        c = _loop_coefficients(self.potential.deriv(), self.zeta1, self.zeta2, 0)
        return abs(c[-2] - 1.0) + abs(c[-1])

    # -- cut square root -------------------------------------------------

    @property
    def _flat_grid(self):
        if not hasattr(self, "_flat_grid_cache") or self._flat_grid_cache is None:
            self._flat_grid_cache = make_grid("gauss_legendre", 160, (0.0, 1.0))
        return self._flat_grid_cache

    def r_cut(self, z):
        """Square root of (z-zeta1)(z-zeta2) cut along the support arc,
        behaving like z at infinity (exponential-of-integral form)."""
        z = np.asarray(z, dtype=complex)
        fg = self._flat_grid
        y, w = fg.nodes, fg.weights
        g = self.curve(y)
        gp = self.curve.deriv1(y)
        integ = (gp[None, :] / (2 * (g[None, :] - z.reshape(-1, 1)))) * w[None, :]
        val = (z.reshape(-1) - self.zeta1) * np.exp(pairwise_sum(integ, axis=-1))
        return val.reshape(z.shape) if z.shape else complex(val[0])

    def r_plus(self, x):
        """Boundary value of r_cut on the support, from the + side, at
        parameter x in (0,1)."""
        fg = self._flat_grid
        y, w = fg.nodes, fg.weights
        g = self.curve(y)
        gp = self.curve.deriv1(y)
        x = np.asarray(x, dtype=float)
        zx = self.curve(x)
        ker = gp[None, :] / (g[None, :] - zx.reshape(-1, 1)) - 1.0 / (y[None, :] - x.reshape(-1, 1))
        pv = pairwise_sum(ker * w[None, :], axis=-1) + np.log((1 - x.reshape(-1)) / x.reshape(-1))
        out = 1j * (zx.reshape(-1) - self.zeta1) * np.exp(0.5 * pv)
        return out.reshape(x.shape) if x.shape else complex(out[0])

    def sqrtR(self, z):
        """S(z) * r_cut(z): the branch fixed by ~ V'(z) at infinity."""
        return self.S(z) * self.r_cut(z)

    def cauchy_sqrt_branch(self, z):
        """Independent route to the same function: V'(z) + 2*pi*i*C[mu](z),
        with the Cauchy transform evaluated by support quadrature."""
        z = np.asarray(z, dtype=complex)
        y = self.support_grid.nodes
        g = self.curve(y)
        wnu = (8 / np.pi) * self.support_grid.weights
        cau = pairwise_sum(wnu[None, :] / (z.reshape(-1, 1) - g[None, :]), axis=-1)
        out = self.potential.deriv()(z.reshape(-1)) - cau
        return out.reshape(z.shape) if z.shape else complex(out[0])

    # -- effective potentials ---------------------------------------------

    def effective_on_curve(self, x):
        """(Phi_+, Phi_-) of the complex effective potential at gamma(x)."""
        x = float(x)
        if 0.0 <= x <= 1.0:
            v = 1j * np.pi * semicircle_cdf(x)
            return v, -v
        if x < 0:
            gl = make_grid("gauss_legendre", 64, (x, 0.0))
            real = 8 * gl.integrate(np.sqrt(gl.nodes * (gl.nodes - 1)))
            return complex(real), complex(real)
        gl = make_grid("gauss_legendre", 64, (1.0, x))
        real = 8 * gl.integrate(np.sqrt(gl.nodes * (gl.nodes - 1)))
        return real + 1j * np.pi, real - 1j * np.pi

    def _g_function(self, z):
        """Branch-tracked logarithmic potential -int ln(z - w) dmu(w) for z
        off the support arc."""
        y = self.support_grid.nodes
        g = self.curve(y)
        diff = complex(z) - g
        if np.min(np.abs(diff)) < 1e-11:
            raise PathError("logarithmic potential evaluated on the support")
        tr = track_arg(diff, base=float(np.angle(diff[0])))
        logs = np.log(np.abs(diff)) + 1j * tr.args
        return -self.nu_integrate(logs)

    def effective_potential(self, z):
        """Complex effective potential at z off the contour; the reference
        path from the first endpoint must not cross the arc."""
        z = complex(z)
        if self._segment_crosses_arc(z):
            raise PathError("integration path crosses the contour")
        C = self.equilibrium_constant()
        return self.potential(z) + self._g_function(z) - C

    def phi_eff(self, z):
        return self.effective_potential(z).real

    def _segment_crosses_arc(self, z, n=200):
        xs = np.linspace(-self.pad, 1 + self.pad, n)
        arc = self.curve(xs)
        a, b = complex(self.zeta1), complex(z)
        d = b - a
        if abs(d) < 1e-14:
            return False
        # parameter of each arc point along the segment and its offset
        tpar = ((arc - a) * np.conj(d)).real / abs(d) ** 2
        off = ((arc - a) * np.conj(1j * d)).real / abs(d)
        sgn = np.sign(off)
        crossing = np.where((sgn[:-1] * sgn[1:] < 0)
                            & (tpar[:-1] > 1e-3) & (tpar[:-1] < 1 - 1e-3))[0]
        return crossing.size > 0

    # -- constants, energy, entropy ---------------------------------------

    def _log_abs_distance_to(self, x0):
        return _log_abs_distance(self.curve, float(x0), self.support_grid)

    def electrostatic_potential(self, z):
        """U[mu](z) = -int ln|z-w| dmu(w); valid on and off the arc (on-arc
        points should be passed as parameters via u_on_curve)."""
        y = self.support_grid.nodes
        g = self.curve(y)
        return -self.nu_integrate(np.log(np.abs(complex(z) - g)))

    def u_on_curve(self, x0):
        return -self._log_abs_distance_to(float(x0))

    def equilibrium_constant(self):
        """Complex constant C with Phi_eff = V + g - C and Phi_eff(zeta1)=0;
        computed from the vanishing of (Phi_+ + Phi_-)/2 on the support."""
        x0 = 0.5
        z0 = self.curve(x0)
        re_part = -self._log_abs_distance_to(x0)
        im_part = self._arg_average(x0)
        return self.potential(z0) + re_part + 1j * im_part

    def _arg_average(self, x0, n=400):
        return _arg_average(self.curve, x0, n=n)

    def complex_energy(self):
        """Complexified energy: equilibrium constant plus the potential's
        equilibrium average."""
        y = self.support_grid.nodes
        vavg = self.nu_integrate(self.potential(self.curve(y)))
        return self.equilibrium_constant() + vavg

    def real_energy_direct(self):
        """Direct double-quadrature oracle for Re of the complex energy."""
        y = self.support_grid.nodes
        g = self.curve(y)
        dz = g[:, None] - g[None, :]
        dy = y[:, None] - y[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = np.log(np.abs(dz / dy))
        d1 = np.abs(self.curve.deriv1(y))
        np.fill_diagonal(lam, np.log(d1))
        wnu = (8 / np.pi) * self.support_grid.weights
        log_double = wnu @ lam @ wnu + (-0.25 - 2 * LN2)
        phi = self.potential(g).real
        return -log_double + 2 * self.nu_integrate(phi)

    def log_gamma_prime(self):
        """Branch-tracked log of gamma' on the support grid, anchored near
        the chord direction at the midpoint."""
        return _log_deriv_tracked(self.curve.deriv1, self.support_grid,
                                  self.zeta2 - self.zeta1)

    def entropy(self):
        """Ent = -int ln(dmu/dz) dmu; the flat semicircle part is closed form
        (Beta-function derivative), the curve part is smooth quadrature."""
        flat = 0.5 + math.log(2 / np.pi)
        return -flat + self.nu_integrate(self.log_gamma_prime())

    # -- variational checks ------------------------------------------------

    def frostman_check(self, off_points=None, n_on=24):
        """Equality on the support, inequality off it, and the residual of
        the complexified first-order condition at interior nodes."""
        C_re = self.equilibrium_constant().real
        xs = np.linspace(0.04, 0.96, n_on)
        on = np.array([self.u_on_curve(x) + self.potential(self.curve(x)).real - C_re
                       for x in xs])
        rep = {
            "on_support_max_abs": float(np.max(np.abs(on))),
            "equilibrium_constant": C_re,
        }
        if off_points is not None:
            off = np.array([self.electrostatic_potential(z)
                            + self.potential(complex(z)).real - C_re
                            for z in off_points])
            rep["off_support_min"] = float(np.min(off))
            rep["off_support_values"] = off
        rep["euler_lagrange_max_abs"] = float(np.max(np.abs(self.euler_lagrange_residual(xs))))
        return rep

    def euler_lagrange_residual(self, x):
        """V'(gamma(x)) minus the principal-value Cauchy transform of the
        measure: identically zero for the true equilibrium data."""
        from .contour import subtracted_chord_kernel
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = self.support_grid.nodes
        gpx = self.curve.deriv1(x)
        K = subtracted_chord_kernel(self.curve, self.curve.deriv1,
                                    self.curve.deriv2, self.curve.deriv3, x, y)
        ker = -K / gpx[:, None]
        wnu = (8 / np.pi) * self.support_grid.weights
        pv = pairwise_sum(ker * wnu[None, :], axis=-1) + 8 * (x - 0.5) / gpx
        return self.potential.deriv()(self.curve(x)) - pv

    def validate(self, tol_mass=1e-10, tol_decomp=1e-8):
        if self.mass_residual() > tol_mass:
            raise NotOneCutError("unit-mass condition violated")
        xs = np.linspace(-self.pad, 1 + self.pad, 101)
        svals = np.abs(self.S(self.curve(xs)))
        if self.S.degree > 0 and svals.min() < 1e-6 * max(1.0, svals.max()):
            raise NotOneCutError("extra zero of R on the arc")
        loop = make_grid("closed_loop_trapezoid", 128,
                         (self.midpoint, 1.5 * abs(self.zeta2 - self.zeta1)))
        z = loop.nodes
        resid = np.max(np.abs(self.sqrtR(z) - self.cauchy_sqrt_branch(z)))
        scale = np.max(np.abs(self.cauchy_sqrt_branch(z)))
        if resid > tol_decomp * scale:
            raise NotOneCutError(f"cut square root decomposition residual {resid:.2e}")
        return True

    def report(self):
        fr = self.frostman_check()
        return {
            "zeta1": [self.zeta1.real, self.zeta1.imag],
            "zeta2": [self.zeta2.real, self.zeta2.imag],
            "S_coeffs": [[c.real, c.imag] for c in self.S.coeffs],
            "mass_residual": float(self.mass_residual()),
            "frostman_on_support_max_abs": fr["on_support_max_abs"],
            "euler_lagrange_max_abs": fr["euler_lagrange_max_abs"],
            "complex_energy": [self.complex_energy().real, self.complex_energy().imag],
            "entropy": [self.entropy().real, self.entropy().imag],
        }


# -- interpolating family ---------------------------------------------------


@dataclass
class InterpolationData:
    """Frozen data of one member of the interpolating family: curve
    evaluators, the prefactor of the cut square root, and the interpolating
    potential."""

    sol: OneCutSolution
    t: float
    n_quad: int = 96

    def __post_init__(self):
        fam = self.sol.family
        self.family = fam
        self.gc2 = make_grid("gauss_chebyshev_sqrt", self.n_quad, (0.0, 1.0))
        self.gc1 = make_grid("inverse_sqrt", self.n_quad, (0.0, 1.0))
        pad = self.sol.pad
        n_c = 96
        u = np.cos(np.pi * np.arange(n_c + 1) / n_c)
        self._cheb_x = (u + 1) / 2 * (1 + 2 * pad) - pad
        self._st_series = None

    # curve shortcuts
    def gt(self, x):
        return self.family.point(self.t, x)

    def gtp(self, x):
        return self.family.deriv1(self.t, x)

    def gtpp(self, x):
        return self.family.deriv2(self.t, x)

    def gt_inverse(self, z, x0=None):
        base = self.sol.curve
        if self.t == 0.0:
            return (complex(z) - self.sol.zeta1) / (self.sol.zeta2 - self.sol.zeta1)
        # invert through the base curve
        q = self.family._denom(self.t)
        w = (complex(z) - self.sol.zeta1) * self.t * q / (self.sol.zeta2 - self.sol.zeta1) + self.sol.zeta1
        return base.invert(w, x0=x0) / self.t

    def gt_inverse_many(self, z, x0, tol=1e-12, maxit=40):
        """Vectorized Newton inversion of the flow member, seeded near the
        answers (used by the flow-derivative evaluators)."""
        z = np.asarray(z, dtype=complex)
        x = np.asarray(x0, dtype=complex).copy()
        for _ in range(maxit):
            f = self._point_complex(x) - z
            if np.max(np.abs(f)) < tol:
                return x
            x = x - f / self._deriv_complex(x)
        raise ValueError("vectorized curve inversion failed")

    # -- prefactor of the cut square root ---------------------------------

    def _q_ratio(self, x, t=None):
        """64 x(x-1) / (gt'^2 (gt-z1)(gt-z2)): the square of the prefactor,
        with endpoint cancellations done by stable ratios."""
        t = self.t if t is None else t
        x = np.asarray(x, dtype=float)
        z1, z2 = self.sol.zeta1, self.sol.zeta2
        g = self.family.point(t, x)
        gp = self.family.deriv1(t, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            A = x / (g - z1)
            B = (x - 1) / (g - z2)
        for arr, xe in ((A, 0.0), (B, 1.0)):
            bad = np.abs(x - xe) < 1e-9
            if np.any(bad):
                d1 = self.family.deriv1(t, np.full(np.sum(bad), xe))
                arr[bad] = 1.0 / d1
        return 64 * A * B / gp**2

    def st_grid(self, x, n_steps=9):
        """Prefactor values on an x-array, sign-fixed by continuation in the
        family parameter from the straight-segment limit."""
        x = np.asarray(x, dtype=float)
        dz = self.sol.zeta2 - self.sol.zeta1
        s_prev = np.full(x.shape, 8.0 / dz**2, dtype=complex)
        if self.t == 0.0:
            return s_prev
        for tk in np.linspace(0.0, self.t, n_steps + 1)[1:]:
            cand = np.sqrt(self._q_ratio(x, t=tk))
            flip = np.abs(cand - s_prev) > np.abs(cand + s_prev)
            cand = np.where(flip, -cand, cand)
            s_prev = cand
        return s_prev

    @property
    def st_series(self):
        if self._st_series is None:
            pad = self.sol.pad
            u = (2 * self._cheb_x - 1) / (1 + 2 * pad)
            vals = self.st_grid(self._cheb_x)
            self._st_series = np.polynomial.chebyshev.chebfit(u, vals, len(u) - 1)
        return self._st_series

    def st(self, x):
        """Prefactor along the curve at real parameter x (interpolated)."""
        pad = self.sol.pad
        u = (2 * np.asarray(x, dtype=float) - 1) / (1 + 2 * pad)
        return np.polynomial.chebyshev.chebval(u, self.st_series)

    def st_at(self, z):
        """Prefactor at a point z near the curve, sign by continuity from the
        nearest on-curve value."""
        x = self.gt_inverse(z)
        q = self._q_ratio_complex(x)
        cand = np.sqrt(q)
        ref = self.st(np.clip(x.real, -self.sol.pad, 1 + self.sol.pad))
        return cand if abs(cand - ref) <= abs(cand + ref) else -cand

    def _q_ratio_complex(self, x):
        z1, z2 = self.sol.zeta1, self.sol.zeta2
        g = self._point_complex(x)
        gp = self._deriv_complex(x)
        return 64 * x * (x - 1) / (gp**2 * (g - z1) * (g - z2))

    def _point_complex(self, x):
        fam = self.family
        if self.t == 0.0:
            return self.sol.zeta1 + x * (self.sol.zeta2 - self.sol.zeta1)
        base = self.sol.curve
        u = (2 * (self.t * x) - (base.lo + base.hi)) / (base.hi - base.lo)
        g = np.polynomial.chebyshev.chebval(u, base.coef_g)
        return (g - self.sol.zeta1) * (self.sol.zeta2 - self.sol.zeta1) / (self.t * fam._denom(self.t)) + self.sol.zeta1

    def _deriv_complex(self, x):
        fam = self.family
        if self.t == 0.0:
            return self.sol.zeta2 - self.sol.zeta1
        base = self.sol.curve
        u = (2 * (self.t * x) - (base.lo + base.hi)) / (base.hi - base.lo)
        d = np.polynomial.chebyshev.chebval(u, base.coef_d1)
        return d * (self.sol.zeta2 - self.sol.zeta1) / fam._denom(self.t)

    def rt(self, z):
        """Deformed R at z: prefactor squared times the endpoint factors."""
        st = self.st_at(z)
        return st**2 * (z - self.sol.zeta1) * (z - self.sol.zeta2)

    # -- interpolating potential -------------------------------------------

    def _kernel_fns(self):
        t = self.t
        fam = self.family
        return (lambda s: fam.point(t, s), lambda s: fam.deriv1(t, s),
                lambda s: fam.deriv2(t, s), lambda s: fam.deriv3(t, s))

    def vt_prime_pullback(self, x):
        """V_t'(gamma_t(x)) gamma_t'(x) by the subtracted-kernel formula;
        bounded uniformly in t."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = self.gc2.nodes
        w = (8 / np.pi) * self.gc2.weights
        ker = subtracted_chord_kernel(*self._kernel_fns(), x, y)
        return 8 * (x - 0.5) - pairwise_sum(ker * w[None, :], axis=-1)

    def vt_prime(self, z):
        """V_t' at a point z in the analytic strip around the curve, by the
        prefactor-difference integral (the subtraction removes the
        singularity; the remaining kernel is the equilibrium measure)."""
        z = complex(z)
        mid = self.sol.midpoint
        y = self.gc2.nodes
        w = (8 / np.pi) * self.gc2.weights
        sy = self.st(y)
        Sz = self.st_at(z)
        gy = self.gt(y)
        integ = pairwise_sum(w * (sy - Sz) / (sy * (gy - z)))
        return Sz * (z - mid) - integ

    def vt(self, z):
        """Interpolating potential; path integral of vt_prime from the
        endpoint midpoint along a straight segment."""
        z = complex(z)
        mid = self.sol.midpoint
        gl = make_grid("gauss_legendre", 48, (0.0, 1.0))
        pts = mid + gl.nodes * (z - mid)
        vals = np.array([self.vt_prime(p) for p in pts])
        return self.sol.potential(mid) + (z - mid) * pairwise_sum(gl.weights * vals)

    def vt_on_curve(self, x):
        """V_t(gamma_t(x)) by integration along the curve itself (stays
        inside the strip)."""
        x = float(x)
        gl = make_grid("gauss_legendre", 64, (0.5, x))
        vals = self.vt_prime_pullback(gl.nodes)
        mid_val = self.vt(self.gt(0.5))
        return mid_val + pairwise_sum(gl.weights * vals)

    @property
    def _vt_series(self):
        """Chebyshev antiderivative of the pulled-back potential slope:
        V_t(gamma_t(x)) as a fast series over the working interval."""
        if getattr(self, "_vt_series_cache", None) is None:
            pad = self.sol.pad
            n_c = 96
            u = np.cos(np.pi * np.arange(n_c + 1) / n_c)
            xs = (u + 1) / 2 * (1 + 2 * pad) - pad
            vals = self.vt_prime_pullback(xs)
            coef = np.polynomial.chebyshev.chebfit(u, vals, n_c)
            anti = np.polynomial.chebyshev.chebint(coef) * (1 + 2 * pad) / 2
            u_half = (2 * 0.5 - 1) / (1 + 2 * pad)
            base = np.polynomial.chebyshev.chebval(u_half, anti)
            shift = self.vt(self.gt(0.5)) - base
            anti[0] += shift
            self._vt_series_cache = anti
        return self._vt_series_cache

    def vt_gamma(self, x):
        """V_t(gamma_t(x)) from the cached antiderivative series."""
        pad = self.sol.pad
        u = (2 * np.asarray(x, dtype=float) - 1) / (1 + 2 * pad)
        return np.polynomial.chebyshev.chebval(u, self._vt_series)

    def complex_energy(self):
        """Complexified energy of the flow member: equilibrium constant of
        the deformed data plus the potential's equilibrium average."""
        grid = self.sol.support_grid
        point = lambda s: self.gt(s)
        x0 = 0.5
        C = (self.vt_gamma(x0)
             - _log_abs_distance(point, x0, grid)
             + 1j * _arg_average(point, x0))
        y = grid.nodes
        vavg = (8 / np.pi) * pairwise_sum(grid.weights * self.vt_gamma(y))
        return C + vavg

    def entropy(self):
        """- int ln(dmu_t/dz) dmu_t along the deformed arc."""
        flat = 0.5 + math.log(2 / np.pi)
        grid = self.sol.support_grid
        logs = _log_deriv_tracked(lambda s: self.gtp(s), grid,
                                  self.sol.zeta2 - self.sol.zeta1)
        return -flat + (8 / np.pi) * pairwise_sum(grid.weights * logs)


def interpolation_data(sol: OneCutSolution, t: float, n_quad=96):
    return InterpolationData(sol, float(t), n_quad)
