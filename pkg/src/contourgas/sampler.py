"""Metropolis sampling of the curve-confined particle ensemble, empirical
measure diagnostics, and the Monte Carlo side of the phase-expectation
identity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as _cheb

from .contour import semicircle_cdf
from .equilibrium import InterpolationData
from .numkit import log_energy_direct, log_energy_form, make_grid, pairwise_sum

__all__ = [
    "ParticleChain",
    "make_chain",
    "sample_real_model",
    "regularize",
    "log_energy_distance",
    "concentration_scan",
    "edge_density_estimate",
    "phase_expectation_mc",
    "TuningError",
]


class TuningError(RuntimeError):
    pass


def _semicircle_quantiles(N):
    """1/N quantiles of the [0,1] semicircle law (bisection on the closed
    cdf)."""
    ps = (np.arange(N) + 0.5) / N
    lo = np.zeros(N)
    hi = np.ones(N)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        c = semicircle_cdf(mid)
        lo = np.where(c < ps, mid, lo)
        hi = np.where(c < ps, hi, mid)
    return 0.5 * (lo + hi)


@dataclass
class ParticleChain:
    positions: np.ndarray          # (n_chains, N)
    beta: float
    N: int
    domain: tuple
    log_dgamma_abs: object         # callable x -> ln|gamma'(x)|
    gamma: object                  # callable x -> complex point
    phi_tilde: object              # callable x -> Re V(gamma(x))
    rngs: list
    step_scale: float
    acceptance: float = 0.0
    master_seed: int = 0

    def clone_positions(self):
        return self.positions.copy()


def make_chain(data: InterpolationData, N, beta, n_chains=8, seed=12345,
               domain=None, step_scale=None):
    """Chains initialized at semicircle quantiles; per-chain RNG streams are
    spawned from the master seed (stream k = SeedSequence(seed).spawn[k])."""
    dom = domain or (-data.sol.pad, 1 + data.sol.pad)
    pad = data.sol.pad
    n_fit = 160
    u = np.cos(np.pi * np.arange(n_fit + 1) / n_fit)
    xs = (u + 1) / 2 * (dom[1] - dom[0]) + dom[0]
    scale = lambda x: (2 * np.asarray(x, dtype=float) - (dom[0] + dom[1])) / (dom[1] - dom[0])
    cg = _cheb.chebfit(u, data.gt(xs), n_fit)
    cld = _cheb.chebfit(u, np.log(np.abs(data.gtp(xs))), n_fit)
    vt_vals = np.real(data.vt_gamma(np.clip(xs, -pad, 1 + pad)))
    cphi = _cheb.chebfit(u, vt_vals, n_fit)

    gamma = lambda x: _cheb.chebval(scale(x), cg)
    log_dg = lambda x: _cheb.chebval(scale(x), cld)
    phi = lambda x: _cheb.chebval(scale(x), cphi)

    q = _semicircle_quantiles(N)
    pos = np.tile(q, (n_chains, 1))
    ss = np.random.SeedSequence(seed)
    rngs = [np.random.default_rng(s) for s in ss.spawn(n_chains)]
    # jitter initial positions chain by chain
    for c in range(n_chains):
        pos[c] += 0.5 / N * (rngs[c].random(N) - 0.5)
    pos = np.clip(pos, dom[0] + 1e-9, dom[1] - 1e-9)
    step = step_scale or 0.6 / N
    return ParticleChain(pos, float(beta), int(N), dom, log_dg, gamma, phi,
                         rngs, step, master_seed=seed)


def _reflect(x, lo, hi):
    """Fold into [lo, hi]: symmetric for arbitrarily large displacements."""
    L = hi - lo
    y = np.mod(x - lo, 2 * L)
    y = np.where(y > L, 2 * L - y, y)
    return lo + y


def sample_real_model(chain: ParticleChain, sweeps, burn_fraction=0.2,
                      tune=True, collect=True, target_rate=0.35):
    """Single-site Metropolis sweeps, vectorized across chains.

    Returns (snapshots, info): snapshots has shape (n_kept, n_chains, N)
    with one retained configuration per post-burn-in sweep (N moves per
    retained sample).  The proposal width is adapted toward the target
    acceptance during burn-in; a final rate outside [0.2, 0.6] raises."""
    C, N = chain.positions.shape
    beta, lo, hi = chain.beta, chain.domain[0], chain.domain[1]
    pos = chain.positions
    G = chain.gamma(pos)
    logdg = chain.log_dgamma_abs(pos)
    phi = chain.phi_tilde(pos)
    burn = int(burn_fraction * sweeps)
    sigma = chain.step_scale
    kept = []
    acc_block = 0
    tot_block = 0
    acc_total = 0
    tot_total = 0
    for sweep in range(sweeps + burn):
        noise = np.stack([r.standard_normal(N) for r in chain.rngs])
        unif = np.stack([r.random(N) for r in chain.rngs])
        # site i is untouched until its own turn, so all proposals and their
        # (curve, slope, potential) values can be batched per sweep
        props = _reflect(pos + sigma * noise, lo, hi)
        gP = chain.gamma(props)
        ldP = chain.log_dgamma_abs(props)
        phP = chain.phi_tilde(props)
        log_thresh = np.log(unif + 1e-300)
        for i in range(N):
            diff_new = np.abs(gP[:, i][:, None] - G)
            diff_old = np.abs(G[:, i][:, None] - G)
            diff_new[:, i] = 1.0
            diff_old[:, i] = 1.0
            with np.errstate(divide="ignore"):
                logr = beta * (np.sum(np.log(diff_new), axis=1)
                               - np.sum(np.log(diff_old), axis=1))
            logr += ldP[:, i] - logdg[:, i]
            logr += -N * beta * (phP[:, i] - phi[:, i])
            take = log_thresh[:, i] < logr
            if np.any(take):
                pos[take, i] = props[take, i]
                G[take, i] = gP[take, i]
                logdg[take, i] = ldP[take, i]
                phi[take, i] = phP[take, i]
            acc_block += int(np.sum(take))
            tot_block += C
        if sweep < burn:
            if tune and (sweep + 1) % 20 == 0:
                rate = acc_block / max(tot_block, 1)
                sigma *= float(np.exp(1.2 * (rate - target_rate)))
                sigma = min(max(sigma, 1e-5), 1.5 * (hi - lo))
                acc_block = tot_block = 0
        else:
            acc_total += acc_block
            tot_total += tot_block
            acc_block = tot_block = 0
            if collect:
                kept.append(pos.copy())
    rate = acc_total / max(tot_total, 1)
    band_warning = None
    if tune and not (0.2 <= rate <= 0.6):
        if rate > 0.6 and sigma >= 1.4 * (hi - lo):
            # tuner saturated at the width cap: a shallow one-particle
            # density accepts near-uniform proposals at this rate
            band_warning = f"acceptance saturated at {rate:.2f} with capped width"
        else:
            raise TuningError(f"acceptance {rate:.2f} outside [0.2, 0.6] after tuning")
    chain.positions = pos
    chain.acceptance = rate
    chain.step_scale = sigma
    snaps = np.array(kept) if collect else np.empty((0, C, N))
    info = {"acceptance": rate, "step_scale": sigma, "band_warning": band_warning,
            "gelman_rubin": _gelman_rubin(snaps) if collect and len(kept) > 4 else None}
    return snaps, info


def _gelman_rubin(snaps):
    """Potential scale reduction of the total-position statistic."""
    stat = snaps.sum(axis=2)            # (n_kept, n_chains)
    n, m = stat.shape
    means = stat.mean(axis=0)
    var_w = stat.var(axis=0, ddof=1).mean()
    var_b = n * means.var(ddof=1)
    if var_w <= 0:
        return np.inf
    return float(np.sqrt((1 - 1 / n) + var_b / (n * var_w) / 1.0))


def regularize(positions, N=None):
    """Spread sorted positions to minimum gap N^-3 and attach box widths
    N^-6; returns (regularized positions, widths, masses)."""
    x = np.sort(np.asarray(positions, dtype=float))
    N = N or len(x)
    gap = N**-3.0
    out = x.copy()
    for k in range(1, len(x)):
        out[k] = out[k - 1] + max(x[k] - x[k - 1], gap)
    widths = np.full(len(x), N**-6.0)
    masses = np.full(len(x), 1.0 / len(x))
    return out, widths, masses


def _measure_atoms(measure, n_smooth=256):
    """(params, masses, widths) from a measure spec: either the tuple
    itself, or the string 'semicircle'."""
    if measure == "semicircle":
        gc2 = make_grid("gauss_chebyshev_sqrt", n_smooth, (0.0, 1.0))
        return gc2.nodes, (8 / np.pi) * gc2.weights, None
    params, masses, widths = measure
    return np.asarray(params), np.asarray(masses), widths


def _spacing_widths(params):
    """Cell widths for the box representation of a smooth density sampled
    at quadrature nodes (keeps its transform from faking content beyond the
    atomization scale)."""
    return np.gradient(np.asarray(params, dtype=float))


def log_energy_distance(measure1, measure2, curve, n_theta=24, n_rho=48,
                        rho_max=400.0, log_decades=0.0, squared=False):
    """Logarithmic-energy distance of two unit-mass measures pushed forward
    to the curve, through the planar-Fourier quadratic form."""
    p1, m1, w1 = _measure_atoms(measure1)
    p2, m2, w2 = _measure_atoms(measure2)
    params = np.concatenate([p1, p2])
    masses = np.concatenate([m1, -m2])
    points = curve(params)
    tangents = curve.deriv1(params)
    if w1 is None and w2 is None and log_decades == 0:
        widths = None
        tangents = None
    else:
        # smooth components get their cell widths so the extended radial
        # range does not see spurious point-mass content
        widths = np.concatenate([
            w1 if w1 is not None else _spacing_widths(p1),
            w2 if w2 is not None else _spacing_widths(p2)])
    val = log_energy_form(masses, points, widths=widths, tangents=tangents,
                          n_theta=n_theta, n_rho=n_rho, rho_max=rho_max,
                          log_decades=log_decades)
    return val if squared else float(np.sqrt(max(val, 0.0)))


def log_energy_distance_direct(measure1, measure2, curve):
    """Double-sum oracle companion of log_energy_distance (squared form)."""
    p1, m1, w1 = _measure_atoms(measure1)
    p2, m2, w2 = _measure_atoms(measure2)
    params = np.concatenate([p1, p2])
    masses = np.concatenate([m1, -m2])
    points = curve(params)
    tangents = curve.deriv1(params)
    if w1 is None and w2 is None:
        return log_energy_direct(masses, points)
    widths = np.concatenate([
        w1 if w1 is not None else _spacing_widths(p1),
        w2 if w2 is not None else _spacing_widths(p2)])
    return log_energy_direct(masses, points, widths=widths, tangents=tangents)


def concentration_scan(data: InterpolationData, N_list, f=lambda x: x,
                       sweeps=400, n_chains=8, seed=777, snapshots_per_chain=6):
    """Empirical statistics of the centred empirical measure across N:
    mean |L_N(f) - nu(f)|, mean squared log-energy distance, and the fitted
    decay exponent of the latter."""
    gc2 = make_grid("gauss_chebyshev_sqrt", 256, (0.0, 1.0))
    nu_f = (8 / np.pi) * pairwise_sum(gc2.weights * f(gc2.nodes))
    rows = []
    for N in N_list:
        chain = make_chain(data, int(N), 2.0, n_chains=n_chains, seed=seed + N)
        snaps, info = sample_real_model(chain, sweeps)
        step = max(1, len(snaps) // snapshots_per_chain)
        picks = snaps[::step]
        stats, d2s = [], []
        log_dec = 6 * np.log10(N) + 1
        for snap in picks:
            for c in range(snap.shape[0]):
                xs = snap[c]
                stats.append(abs(np.mean(f(xs)) - nu_f))
                reg, widths, masses = regularize(xs, N)
                d2 = log_energy_distance(
                    (reg, masses, widths), "semicircle",
                    _CurveAdapter(data), log_decades=log_dec, squared=True)
                d2s.append(d2)
        rows.append({"N": int(N), "mean_abs_stat": float(np.mean(stats)),
                     "mean_D2": float(np.mean(d2s)),
                     "acceptance": info["acceptance"]})
    lx = np.log([r["N"] for r in rows])
    ly = np.log([r["mean_D2"] for r in rows])
    slope = np.polyfit(lx, ly, 1)[0]
    return rows, float(-slope)


class _CurveAdapter:
    """Callable/deriv1 pair over the family member (curve protocol used by
    the distance computations)."""

    def __init__(self, data):
        self.data = data

    def __call__(self, x):
        return self.data.gt(np.asarray(x, dtype=float))

    def deriv1(self, x):
        return self.data.gtp(np.asarray(x, dtype=float))


def edge_density_estimate(data: InterpolationData, N_list, sweeps=300,
                          n_chains=8, seed=999, window=0.05):
    """Histogram estimates of the one-point density near the left domain
    edge and in the bulk, per N.  An empty edge window is widened (with a
    warning flag) until it catches samples."""
    pad = data.sol.pad
    rows = []
    for N in N_list:
        chain = make_chain(data, int(N), 2.0, n_chains=n_chains, seed=seed + N)
        snaps, info = sample_real_model(chain, sweeps)
        xs = snaps.reshape(-1)
        total = xs.size / N  # number of configurations
        win = window
        widened = False
        while True:
            near_left = np.sum(xs < -pad + win)
            if near_left > 0 or -pad + win > 0.5:
                break
            win *= 2
            widened = True
        dens_left = max(near_left, 0.5) / total / win / N
        bulk = np.sum(np.abs(xs - 0.5) < 0.02) / total / 0.04 / N
        rows.append({"N": int(N), "edge_window": win, "widened": widened,
                     "log_density_left_edge": float(np.log(dens_left)),
                     "bulk_density_mid": float(bulk),
                     "acceptance": info["acceptance"]})
    return rows


# -- phase expectation --------------------------------------------------------


def _angle_surface(data: InterpolationData, n_c=96):
    """Chebyshev coefficients of the two phase kernels over the outer
    interval (no cutoff factors: the samples live where the cutoff is 1)."""
    outer = data.sol.curve.analytic_pad
    k = np.arange(n_c + 1)
    u = np.cos(np.pi * k / n_c)[::-1]
    xs = (u + 1) / 2 * (1 + 2 * outer) - outer
    # no-cutoff variant: reuse the kernel machinery on the chebyshev grid
    gx = data.gt(xs)
    gpx = data.gtp(xs)
    from .numkit import track_arg
    tr = track_arg(gpx)
    mid = len(xs) // 2
    p_raw = tr.args + (np.angle(gpx[mid]) - tr.args[mid])
    Q = (gx[:, None] - gx[None, :]) / (xs[:, None] - xs[None, :] + np.eye(len(xs)))
    np.fill_diagonal(Q, gpx)
    ang = np.unwrap(np.angle(Q), axis=1)
    ang += (p_raw - np.diag(ang))[:, None]
    ang = (ang + ang.T) / 2
    V = _cheb.chebvander(u, n_c)
    to_coef = np.linalg.solve(V, np.eye(n_c + 1))
    Ca = to_coef @ ang @ to_coef.T
    cp = to_coef @ p_raw
    return Ca, cp, outer


def phase_expectation_mc(data: InterpolationData, N, beta, sweeps=600,
                         n_chains=8, seed=424242, return_se=True):
    """Monte Carlo estimate of the oscillatory/real partition-function
    ratio: the sample average of the exponential of the quadratic phase
    statistic under the real model."""
    Ca, cp, outer = _angle_surface(data)
    scale = lambda x: (2 * np.asarray(x) - 1) / (1 + 2 * outer)

    gc2 = make_grid("gauss_chebyshev_sqrt", 192, (0.0, 1.0))
    wnu = (8 / np.pi) * gc2.weights
    Vy = _cheb.chebvander(scale(gc2.nodes), Ca.shape[0] - 1)
    vbar = wnu @ Vy
    abar_coef = Ca @ vbar           # 1D coefficients of int a(x,y) dnu(y)
    a_nu_nu = vbar @ Ca @ vbar
    p_nu = vbar @ cp

    chain = make_chain(data, int(N), beta, n_chains=n_chains, seed=seed)
    snaps, info = sample_real_model(chain, sweeps)
    vals = []
    for snap in snaps:
        for c in range(snap.shape[0]):
            xs = snap[c]
            Vx = _cheb.chebvander(scale(xs), Ca.shape[0] - 1)
            M = Vx @ Ca @ Vx.T
            a_LL = M.mean()
            a_Lnu = (Vx @ abar_coef).mean()
            quad = a_LL - 2 * a_Lnu + a_nu_nu
            lin = (Vx @ cp).mean() - p_nu
            g_in = 0.5j * beta * N * N * quad + 1j * N * (1 - beta / 2) * lin
            vals.append(np.exp(g_in))
    vals = np.asarray(vals)
    est = vals.mean()
    se = max(vals.real.std(), vals.imag.std()) / np.sqrt(len(vals))
    if se > 0.05:
        raise TuningError(f"phase-expectation standard error {se:.3f} > 0.05: "
                          "more sweeps needed")
    if not return_se:
        return est
    return est, se, info
