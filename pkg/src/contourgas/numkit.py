"""Foundation numerics: complex polynomials, weighted quadrature rules,
branch-tracked arguments and the planar-Fourier log-energy form."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ComplexPolynomial",
    "WeightedGrid",
    "BranchTrack",
    "make_grid",
    "track_arg",
    "log_energy_form",
    "log_energy_direct",
    "pairwise_sum",
    "InvalidPotentialError",
    "BranchError",
    "NetMassError",
]


class InvalidPotentialError(ValueError):
    pass


class BranchError(ValueError):
    pass


class NetMassError(ValueError):
    pass


def pairwise_sum(a, axis=-1):
    """Fixed-order pairwise summation. Deterministic regardless of BLAS
    threading, and more accurate than sequential summation."""
    a = np.asarray(a)
    n = a.shape[axis]
    if n == 0:
        return np.zeros(np.delete(a.shape, axis), dtype=a.dtype)
    a = np.moveaxis(a, axis, -1)
    while a.shape[-1] > 1:
        m = a.shape[-1]
        if m % 2:
            tail = a[..., -1:]
            a = a[..., :-1]
        else:
            tail = None
        a = a[..., 0::2] + a[..., 1::2]
        if tail is not None:
            a = np.concatenate([a, tail], axis=-1)
    return a[..., 0]


@dataclass(frozen=True)
class ComplexPolynomial:
    """Polynomial with complex coefficients, ascending by power."""

    coeffs: tuple

    def __init__(self, coeffs):
        c = [complex(v) for v in coeffs]
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        if len(c) == 0 or (len(c) > 1 and c[-1] == 0):
            raise InvalidPotentialError("leading coefficient must be nonzero")
        object.__setattr__(self, "coeffs", tuple(c))

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def __call__(self, z):
        """Horner evaluation; broadcasts over arrays."""
        z = np.asarray(z, dtype=complex)
        out = np.full(z.shape, self.coeffs[-1], dtype=complex)
        for c in self.coeffs[-2::-1]:
            out = out * z + c
        return out if out.shape else complex(out)

    def deriv(self, order=1):
        c = self.coeffs
        for _ in range(order):
            c = tuple((k + 1) * c[k + 1] for k in range(len(c) - 1)) or (0j,)
        return ComplexPolynomial(c)

    def shift(self, b):
        """Coefficients of p(z + b), by Horner on coefficient arrays."""
        n = len(self.coeffs)
        acc = np.zeros(n, dtype=complex)
        for c in self.coeffs[::-1]:
            prev = acc
            acc = np.zeros(n, dtype=complex)
            acc[1:] = prev[:-1]  # multiply by z
            acc += b * prev
            acc[0] += c
        return ComplexPolynomial(acc)

    def roots(self):
        """Companion-matrix eigenvalues with one Newton polish step."""
        if self.degree == 0:
            return np.array([], dtype=complex)
        r = np.roots(self.coeffs[::-1])
        dp = self.deriv()
        d = dp(r)
        ok = np.abs(d) > 1e-300
        r[ok] = r[ok] - self(r[ok]) / d[ok]
        return r


def poly_normalize(p: ComplexPolynomial):
    """Affine change z = a*w + b making the potential's leading term w^k / k
    and killing the subleading coefficient.

    Returns (normalized polynomial, (a, b), additive constant dropped).
    Composing back: p(a*w + b) = normalized(w) + const.
    """
    k = p.degree
    if k < 2:
        raise InvalidPotentialError("potential degree must be >= 2")
    ck = p.coeffs[-1]
    a = (1.0 / (k * ck)) ** (1.0 / k)  # principal root
    b = -p.coeffs[-2] / (k * ck)
    q = p.shift(b)  # p(z + b)
    scaled = tuple(c * a**j for j, c in enumerate(q.coeffs))
    const = scaled[0]
    out = list(scaled)
    out[0] = 0j
    return ComplexPolynomial(out), (complex(a), complex(b)), complex(const)


GRID_KINDS = ("gauss_legendre", "gauss_chebyshev_sqrt", "inverse_sqrt", "closed_loop_trapezoid")


@dataclass(frozen=True)
class WeightedGrid:
    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    def integrate(self, values):
        return pairwise_sum(self.weights * np.asarray(values))


def make_grid(kind, n, interval=(0.0, 1.0)):
    """Quadrature rules used throughout.

    gauss_legendre       weight 1 on [a, b]
    gauss_chebyshev_sqrt weight sqrt((x-a)(b-x)) scaled to [a, b] (2nd kind)
    inverse_sqrt         weight 1/sqrt((x-a)(b-x)) (1st kind)
    closed_loop_trapezoid uniform nodes on a circle; interval = (center, radius)
    """
    if n < 1:
        raise ValueError("node count must be >= 1")
    if kind == "gauss_legendre":
        a, b = interval
        x, w = np.polynomial.legendre.leggauss(n)
        nodes = (x + 1) * (b - a) / 2 + a
        weights = w * (b - a) / 2
        return WeightedGrid(nodes, weights, kind)
    if kind == "gauss_chebyshev_sqrt":
        a, b = interval
        k = np.arange(1, n + 1)
        u = np.cos(k * np.pi / (n + 1))[::-1]
        w = (np.pi / (n + 1)) * np.sin(k * np.pi / (n + 1)) ** 2
        h = (b - a) / 2
        # int_a^b f sqrt((x-a)(b-x)) dx = h^2 * int_-1^1 f((u+1)h+a) sqrt(1-u^2) du
        return WeightedGrid((u + 1) * h + a, w[::-1] * h * h, kind)
    if kind == "inverse_sqrt":
        a, b = interval
        k = np.arange(1, n + 1)
        u = np.cos((2 * k - 1) * np.pi / (2 * n))[::-1]
        # int_a^b f / sqrt((x-a)(b-x)) dx = int_-1^1 f((u+1)h+a)/sqrt(1-u^2) du
        return WeightedGrid((u + 1) * (b - a) / 2 + a, np.full(n, np.pi / n), kind)
    if kind == "closed_loop_trapezoid":
        center, radius = interval
        th = 2 * np.pi * np.arange(n) / n
        nodes = center + radius * np.exp(1j * th)
        # weights are dz increments: oint f dz ~ sum w f(node)
        weights = 1j * radius * np.exp(1j * th) * (2 * np.pi / n)
        return WeightedGrid(nodes, weights, kind)
    raise ValueError(f"unsupported grid kind: {kind}")


@dataclass(frozen=True)
class BranchTrack:
    samples: np.ndarray
    args: np.ndarray
    base_choice: float


def track_arg(values, base=None):
    """Continuous argument along an ordered sample sequence.

    args[0] equals `base` when given (must match the first sample's phase
    mod 2*pi), otherwise the principal argument of the first sample.
    """
    v = np.asarray(values, dtype=complex)
    if np.any(v == 0):
        raise BranchError("argument undefined at a zero sample")
    raw = np.angle(v)
    d = np.diff(raw)
    d = (d + np.pi) % (2 * np.pi) - np.pi
    if np.any(np.abs(d) >= np.pi - 1e-12):
        raise BranchError("phase step >= pi: sample resolution too coarse")
    if base is None:
        base = raw[0]
    args = base + np.concatenate([[0.0], np.cumsum(d)])
    return BranchTrack(v, args, float(base))


def _projected_fourier_sq(points, masses, widths, tangents, rho, cth, sth):
    """|sigma_hat(rho * omega)|^2 for one direction omega=(cth, sth).
    Boxes of given parameter widths are smeared with a sinc factor."""
    proj = cth * points.real + sth * points.imag
    phase = np.exp(-1j * np.outer(rho, proj))
    if widths is not None:
        tproj = cth * tangents.real + sth * tangents.imag
        arg = 0.5 * np.outer(rho, tproj * widths)
        smear = np.sinc(arg / np.pi)
        ft = (phase * smear) @ masses
    else:
        ft = phase @ masses
    return np.abs(ft) ** 2


def log_energy_form(masses, points, widths=None, tangents=None,
                    n_theta=32, n_rho=64, rho_max=400.0, log_decades=0.0,
                    mass_tol=1e-9):
    """Logarithmic energy of a zero-mass signed measure via its planar
    Fourier transform.

    The measure is a sum of point masses `masses[j]` at complex positions
    `points[j]` (optionally smeared into boxes of parameter width
    `widths[j]` along unit tangents `tangents[j]`).  Computes

        (1/2pi) * iint |sigma_hat(p,q)|^2 / (p^2+q^2) dp dq

    in polar coordinates with a per-direction radial scale, which keeps the
    truncation error uniform over directions.  Nonnegative by construction.
    """
    masses = np.asarray(masses, dtype=float)
    points = np.asarray(points, dtype=complex)
    if abs(pairwise_sum(masses)) > mass_tol * max(1.0, pairwise_sum(np.abs(masses))):
        raise NetMassError("signed measure must have zero net mass")
    if widths is not None:
        widths = np.asarray(widths, dtype=float)
        tangents = np.asarray(tangents, dtype=complex)

    tg = make_grid("gauss_legendre", n_theta, (0.0, np.pi))
    # radial panels in the scaled variable u = rho * ell_theta
    base = make_grid("gauss_legendre", n_rho, (0.0, 1.0))
    panels = [(0.0, 1.0), (1.0, 10.0), (10.0, 100.0), (100.0, rho_max)]
    u_nodes, u_weights = [], []
    for a, b in panels:
        u_nodes.append(base.nodes * (b - a) + a)
        u_weights.append(base.weights * (b - a))
    if log_decades > 0:
        # extra log-spaced panels for nearly atomic measures
        lo = np.log(rho_max)
        for k in range(int(np.ceil(log_decades))):
            a, b = lo + k * np.log(10.0), lo + (k + 1) * np.log(10.0)
            un = np.exp(base.nodes * (b - a) + a)
            u_nodes.append(un)
            u_weights.append(base.weights * (b - a) * un)
    u = np.concatenate(u_nodes)
    wu = np.concatenate(u_weights)

    total = 0.0
    for th, wth in zip(tg.nodes, tg.weights):
        cth, sth = np.cos(th), np.sin(th)
        proj = cth * points.real + sth * points.imag
        ell = proj.max() - proj.min()
        if ell < 1e-300:
            continue
        rho = u / ell
        f = _projected_fourier_sq(points, masses, widths, tangents, rho, cth, sth)
        # integrand |sigma_hat|^2 / rho, d rho = du / ell ; (1/rho) drho = du/u
        total += wth * pairwise_sum(wu * f / u)
    return total / np.pi


def log_energy_direct(masses, points, widths=None, tangents=None):
    """Double-sum oracle for the logarithmic energy of a discrete signed
    measure.  Box smearing contributes the exact box self-energy
    3/2 - ln(w |tangent|) per box."""
    masses = np.asarray(masses, dtype=float)
    points = np.asarray(points, dtype=complex)
    dz = points[:, None] - points[None, :]
    with np.errstate(divide="ignore"):
        lk = -np.log(np.abs(dz))
    if widths is None:
        np.fill_diagonal(lk, 0.0)
        if np.any(np.isinf(lk)):
            raise ValueError("coincident points with no smearing width")
    else:
        widths = np.asarray(widths, dtype=float)
        tangents = np.asarray(tangents, dtype=complex)
        np.fill_diagonal(lk, 1.5 - np.log(widths * np.abs(tangents)))
    return float(masses @ lk @ masses)
