"""Convergence diagnostics for the Picard iteration.

Tracks, over an ensemble of noise draws, the two seminorm curves that
control the scheme for affine sigma(u) = a u + b at second moments:

    V_n(t) = sup_x E|u^n(t,x) - u^{n-1}(t,x)|^2
    W_n(t) = sup_x int_0^t int int G^2_{t-s}(x-y) |y-z|^{2H-2}
                 E|D_n(s,y) - D_n(s,z)|^2 dy dz ds,   D_n = u^n - u^{n-1}

and checks the closed-form recurrences they must satisfy,

    V_{n+1}(t) <= (V_n * J1)(t) + C_w W_n(t)
    W_{n+1}(t) <= (V_n * J2)(t) + (W_n * J1)(t)

with C_w = 2 a^2 C_H and pure-power kernels

    J1(tau) = 2 a^2 c_H int |FG_tau(xi)|^2 |xi|^(1-2H) dxi = c1 tau^e1
    J2(tau) = (4 pi a^2 c_H^2 / C_H) int_0^tau ||G_(tau-s)||_L2^2
              int |FG_s(xi)|^2 |xi|^(2-4H) dxi ds      = c2 tau^e2.

Statistics are accumulated on thinned lattices, so memory is independent
of the ensemble size.  Three nested spatial grids are involved: the sup
in both curves runs over the core window; the pair-energy density rho
needs support out to the kernel reach beyond the core; and the pair
partner z runs over the whole lattice window, with the remaining
|y - z|^{2H-2} mass beyond the window completed analytically under the
decorrelation m2(y) + m2(z) (exact for the wave kernel beyond lag 2t,
Gaussian-tail accurate for the heat kernel).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .constants import C_H, c_H
from .kernels import F_ab, c_alpha

__all__ = [
    "DiagnosticGrids",
    "make_diagnostic_grids",
    "VnWnCollector",
    "VnWnCurves",
    "IterateSecondMomentCollector",
    "PicardDiagnostics",
    "j_power_forms",
    "power_convolution",
    "vn_wn_diagnostics",
    "pathwise_x2_seminorm",
]


@dataclass(frozen=True)
class DiagnosticGrids:
    """Thinned lattices for seminorm accumulation.

    All three spatial index sets share one stride on the solver lattice,
    so pair gaps are exact multiples of dx_thin: z_idx spans the whole
    window, y_idx the kernel-reach neighbourhood of the core (rho support),
    and sup_rows marks the rows of y_idx lying inside the core.  t_idx are
    solver step indices; row j is time (j+1) * dt_thin.
    """

    t_idx: np.ndarray
    y_idx: np.ndarray
    z_idx: np.ndarray
    sup_rows: np.ndarray
    dt_thin: float
    dx_thin: float
    y: np.ndarray
    z: np.ndarray

    @property
    def t(self):
        return self.dt_thin * np.arange(1, self.t_idx.size + 1)


def _kernel_reach(geom):
    if geom.equation == "wave":
        return geom.T
    return 4.0 * math.sqrt(geom.T)


def make_diagnostic_grids(geom, n_t=32, n_x=128):
    stride_t = max(1, geom.n_steps // int(n_t))
    t_idx = np.arange(stride_t, geom.n_steps + 1, stride_t)

    x_grid = geom.x_grid
    core_cols = np.arange(geom.core.start, geom.core.stop)
    stride_x = max(1, core_cols.size // int(n_x))
    z_idx = np.arange(0, geom.n_fft, stride_x)
    reach = min(_kernel_reach(geom), geom.actual_pad)
    lim = x_grid[core_cols[-1]] + reach
    y_mask = np.abs(x_grid[z_idx]) <= lim + 1e-12
    y_idx = z_idx[y_mask]
    sup_rows = np.nonzero(np.abs(x_grid[y_idx]) <= x_grid[core_cols[-1]] + 1e-12)[0]
    return DiagnosticGrids(
        t_idx=t_idx,
        y_idx=y_idx,
        z_idx=z_idx,
        sup_rows=sup_rows,
        dt_thin=stride_t * geom.dt,
        dx_thin=stride_x * geom.dx,
        y=x_grid[y_idx],
        z=x_grid[z_idx],
    )


def _pair_weight_matrix(y, z, h, dx_thin):
    """|y_i - z_j|^(2h-2) dx quadrature weights with the singular
    coincidence cell zeroed (the pair energy vanishes there faster than
    the weight diverges)."""
    gap = np.abs(y[:, None] - z[None, :])
    with np.errstate(divide="ignore"):
        w = gap ** (2.0 * h - 2.0) * dx_thin
    w[gap < 0.5 * dx_thin] = 0.0
    return w


def _tail_weights(y, z, h):
    """Mass of |y - z'|^(2h-2) dz' beyond the lattice window, both sides."""
    s_left = np.maximum(y - (z[0] - 0.0), 1e-300)
    s_right = np.maximum((z[-1] + 0.0) - y, 1e-300)
    p = 2.0 * h - 1.0
    return (s_left**p + s_right**p) / (1.0 - 2.0 * h)


def _slab_kernel_matrices(equation, x_out, y_in, dt_thin, n_levels, dx_thin):
    """Cell-exact squared-kernel application matrices per time-lag level.

    Level l covers kernel lags tau in (l, l+1] * dt_thin; K[l][i, j] is
    the mass int_cell_j G^2_tau(x_i - u) du of cell j, so K[l] @ rho
    approximates [G^2_tau * rho](x_i) and dt_thin * K[l] @ rho is the
    slab's contribution to the energy time integral.  Cell masses are
    exact for both kernels (box overlap / erf difference), which keeps
    the heat kernel honest when tau is below the lattice scale; the lag
    node is the slab midpoint for the bounded wave kernel and, for the
    heat kernel, the point that integrates the tau^(-1/2) envelope
    exactly over the slab.
    """
    offs = x_out[:, None] - y_in[None, :]
    out = np.empty((n_levels, x_out.size, y_in.size))
    for lvl in range(n_levels):
        tau_lo = lvl * dt_thin
        tau_hi = (lvl + 1) * dt_thin
        if equation == "wave":
            tau = 0.5 * (tau_lo + tau_hi)
            lo = np.maximum(offs - 0.5 * dx_thin, -tau)
            hi = np.minimum(offs + 0.5 * dx_thin, tau)
            out[lvl] = 0.25 * np.clip(hi - lo, 0.0, None)
        else:
            tau = (dt_thin / (2.0 * (math.sqrt(tau_hi) - math.sqrt(tau_lo)))) ** 2
            rt = math.sqrt(tau)
            a = (offs - 0.5 * dx_thin) / rt
            b = (offs + 0.5 * dx_thin) / rt
            out[lvl] = (erf(b) - erf(a)) / (4.0 * math.sqrt(math.pi * tau))
    return out


def _energy_curves(rho, kmats, dt_thin, sup_rows):
    """sup over the core rows of sum_{m<=k} dt_thin * (K[k-m] @ rho[m])."""
    n_t = rho.shape[0]
    out = np.empty(n_t)
    for k in range(n_t):
        tot = np.zeros(sup_rows.size)
        for m in range(k + 1):
            tot += kmats[k - m][sup_rows] @ rho[m]
        out[k] = dt_thin * tot.max()
    return out


class VnWnCollector:
    """Streaming accumulator for the V_n / W_n curves over an ensemble.

    Feed successive differences via observe(n, diff, geom) in iteration
    order (n = 1..n_iters) for each realization; finalize() returns the
    curves with standard errors.  Holds second/fourth moments on the full
    core for V, and cross Gram matrices on the thinned y/z lattices for
    the pair energies behind W.
    """

    def __init__(self, geom, n_iters, n_t=32, n_x=128):
        self.geom = geom
        self.n_iters = int(n_iters)
        self.grids = make_diagnostic_grids(geom, n_t=n_t, n_x=n_x)
        g = self.grids
        core_n = geom.core.stop - geom.core.start
        self._sum2 = np.zeros((self.n_iters, g.t_idx.size, core_n))
        self._sum4 = np.zeros((self.n_iters, g.t_idx.size, core_n))
        self._gram = np.zeros((self.n_iters, g.t_idx.size, g.y_idx.size, g.z_idx.size))
        self._m2_y = np.zeros((self.n_iters, g.t_idx.size, g.y_idx.size))
        self._m2_z = np.zeros((self.n_iters, g.t_idx.size, g.z_idx.size))
        self._count = 0

    def observe(self, n, diff, geom):
        if not 1 <= n <= self.n_iters:
            return
        g = self.grids
        rows = diff[g.t_idx]
        core = rows[:, self.geom.core]
        sq = core * core
        self._sum2[n - 1] += sq
        self._sum4[n - 1] += sq * sq
        ys = rows[:, g.y_idx]
        zs = rows[:, g.z_idx]
        self._gram[n - 1] += np.einsum("ty,tz->tyz", ys, zs)
        self._m2_y[n - 1] += ys * ys
        self._m2_z[n - 1] += zs * zs
        if n == self.n_iters:
            self._count += 1

    def finalize(self):
        r = self._count
        if r < 2:
            raise ValueError("need at least 2 realizations to form curves")
        geom, g = self.geom, self.grids
        m2 = self._sum2 / r
        m4 = self._sum4 / r
        var_mean = np.clip(m4 - m2 * m2, 0.0, None) / r

        arg = m2.argmax(axis=2)
        n_i, n_t = arg.shape
        ii, tt = np.meshgrid(np.arange(n_i), np.arange(n_t), indexing="ij")
        v = m2[ii, tt, arg]
        se_v = np.sqrt(var_mean[ii, tt, arg])

        pair = (
            self._m2_y[:, :, :, None]
            + self._m2_z[:, :, None, :]
            - 2.0 * self._gram
        ) / r
        np.clip(pair, 0.0, None, out=pair)

        wmat = _pair_weight_matrix(g.y, g.z, geom.h, g.dx_thin)
        rho = np.einsum("ntyz,yz->nty", pair, wmat)
        # analytic completion of the pair integral beyond the window under
        # decorrelation: E|D(y) - D(z)|^2 -> m2(y) + mean_z m2(z)
        tails = _tail_weights(g.y, g.z, geom.h)
        rho += (self._m2_y / r + (self._m2_z / r).mean(axis=2, keepdims=True)) * tails

        kmats = _slab_kernel_matrices(geom.equation, g.y, g.y, g.dt_thin, n_t, g.dx_thin)
        w = np.empty((self.n_iters, n_t))
        for n in range(self.n_iters):
            w[n] = _energy_curves(rho[n], kmats, g.dt_thin, g.sup_rows)
        # Gaussian perfect-correlation proxy: an upper bound on the error
        # of any positively weighted sum of empirical second moments
        se_w = math.sqrt(2.0 / r) * w
        return VnWnCurves(
            t=g.t, v=v, w=w, se_v=se_v, se_w=se_w,
            n_realizations=r, geom=geom, grids=g,
        )


@dataclass(frozen=True)
class VnWnCurves:
    """Ensemble estimates of V_n(t), W_n(t) with standard errors.

    se_v is the empirical delta-method error at the argmax column; se_w is
    the Gaussian perfect-correlation proxy sqrt(2/R) * w, an upper bound
    rather than an estimate.
    """

    t: np.ndarray
    v: np.ndarray
    w: np.ndarray
    se_v: np.ndarray
    se_w: np.ndarray
    n_realizations: int
    geom: object
    grids: DiagnosticGrids


class IterateSecondMomentCollector:
    """Streaming sup-grid second moments of each Picard iterate.

    Reconstructs u^n = w + sum of observed differences on a thinned
    (time, core-column) grid per realization and accumulates E|u^n|^2.
    finalize() returns the per-iterate sup over the thin grid, index 0
    holding the deterministic sup |w|^2; a bounded scheme keeps
    consecutive entries from growing once the iteration settles.
    """

    def __init__(self, geom, w_values, n_iters, n_t=16, n_x=64):
        stride_t = max(1, geom.n_steps // int(n_t))
        self._t_idx = np.arange(0, geom.n_steps + 1, stride_t)
        core_cols = np.arange(geom.core.start, geom.core.stop)
        stride_x = max(1, core_cols.size // int(n_x))
        self._x_idx = core_cols[::stride_x]
        self.n_iters = int(n_iters)
        self._w = w_values[np.ix_(self._t_idx, self._x_idx)].copy()
        self._sums = np.zeros((self.n_iters, self._t_idx.size, self._x_idx.size))
        self._running = None
        self._count = 0

    def observe(self, n, diff, geom):
        if not 1 <= n <= self.n_iters:
            return
        if n == 1:
            self._running = self._w.copy()
        self._running = self._running + diff[np.ix_(self._t_idx, self._x_idx)]
        self._sums[n - 1] += self._running**2
        if n == self.n_iters:
            self._count += 1

    def finalize(self):
        if self._count < 1:
            raise ValueError("no realizations observed")
        sups = np.empty(self.n_iters + 1)
        sups[0] = float((self._w**2).max())
        for n in range(self.n_iters):
            sups[n + 1] = float((self._sums[n] / self._count).max())
        return sups


def j_power_forms(equation, h, a):
    """The recurrence kernels as pure powers: J_i(tau) = c_i tau^(e_i).

    J1 comes from the single-time spectral moment at weight |xi|^(1-2H);
    J2 from the nested lag integral, whose closed form is F(0, tau) times
    4 pi a^2 c_H^2 / C_H.  Also carries C_w = 2 a^2 C_H, the weight of
    W_n in the V recurrence.
    """
    ch = c_H(h)
    if equation == "wave":
        c1 = 2.0 * a * a * ch * 2.0 ** (2.0 * h) * c_alpha(2.0 * h)
        e1 = 2.0 * h
        e2 = 4.0 * h + 1.0
    elif equation == "heat":
        c1 = 2.0 * a * a * ch * math.gamma(1.0 - h)
        e1 = h - 1.0
        e2 = 2.0 * h - 1.0
    else:
        raise ValueError(f"equation must be 'wave' or 'heat', got {equation!r}")
    c2 = (4.0 * math.pi * a * a * ch * ch / C_H(h)) * F_ab(equation, 0.0, 1.0, h)
    c_w = 2.0 * a * a * C_H(h)
    return {"c1": c1, "e1": e1, "c2": c2, "e2": e2, "c_w": c_w}


def power_convolution(t_grid, values, c, e):
    """(f * J)(t) = int_0^t f(s) c (t-s)^e ds on the given grid.

    f is taken piecewise linear through (0, 0) and the nodes
    (t_grid[k], values[k]); each cell integrates in closed form, which
    handles the integrable singularity e in (-1, 0) exactly.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if e <= -1.0:
        raise ValueError(f"exponent must exceed -1, got {e!r}")
    nodes = np.concatenate([[0.0], t_grid])
    vals = np.concatenate([[0.0], values])
    out = np.empty(t_grid.size)
    for k, t in enumerate(t_grid):
        s_a = nodes[: k + 1]
        s_b = nodes[1 : k + 2]
        v_a = vals[: k + 1]
        v_b = vals[1 : k + 2]
        big = t - s_a
        small = t - s_b
        p1 = (big ** (e + 1.0) - small ** (e + 1.0)) / (e + 1.0)
        p2 = (big ** (e + 2.0) - small ** (e + 2.0)) / (e + 2.0)
        slope = (v_b - v_a) / (s_b - s_a)
        out[k] = float(np.sum(c * (v_b * p1 - slope * (p2 - small * p1))))
    return out


@dataclass(frozen=True)
class PicardDiagnostics:
    """Recurrence audit of the ensemble V/W curves.

    Violation flags compare each left side minus twice its standard error
    against the right side plus twice its propagated error, pointwise on
    the thin time grid, for each adjacent iteration pair.
    """

    t: np.ndarray
    v: np.ndarray
    w: np.ndarray
    se_v: np.ndarray
    se_w: np.ndarray
    rhs_v: np.ndarray
    rhs_w: np.ndarray
    se_rhs_v: np.ndarray
    se_rhs_w: np.ndarray
    violations_v: np.ndarray
    violations_w: np.ndarray
    violation_fraction: float
    m_sup: np.ndarray
    sqrt_m_partial_sums: np.ndarray
    j_forms: dict
    n_realizations: int


def vn_wn_diagnostics(curves, sigma):
    """Check the V/W recurrences on finalized ensemble curves.

    Needs curves for at least two iterations; returns the pointwise right
    sides, violation masks at two standard errors, and the summability
    sequence: partial sums of sup_t sqrt(V_n + W_n).
    """
    geom = curves.geom
    n_iters = curves.v.shape[0]
    if n_iters < 2:
        raise ValueError("recurrence check needs at least 2 iterations")
    jf = j_power_forms(geom.equation, geom.h, sigma.a)
    t = curves.t
    n_pairs = n_iters - 1
    rhs_v = np.empty((n_pairs, t.size))
    rhs_w = np.empty((n_pairs, t.size))
    se_rhs_v = np.empty((n_pairs, t.size))
    se_rhs_w = np.empty((n_pairs, t.size))
    for n in range(n_pairs):
        rhs_v[n] = (
            power_convolution(t, curves.v[n], jf["c1"], jf["e1"])
            + jf["c_w"] * curves.w[n]
        )
        se_rhs_v[n] = (
            power_convolution(t, curves.se_v[n], jf["c1"], jf["e1"])
            + jf["c_w"] * curves.se_w[n]
        )
        rhs_w[n] = power_convolution(t, curves.v[n], jf["c2"], jf["e2"]) + \
            power_convolution(t, curves.w[n], jf["c1"], jf["e1"])
        se_rhs_w[n] = power_convolution(t, curves.se_v[n], jf["c2"], jf["e2"]) + \
            power_convolution(t, curves.se_w[n], jf["c1"], jf["e1"])
    lhs_v = curves.v[1:]
    lhs_w = curves.w[1:]
    viol_v = lhs_v - 2.0 * curves.se_v[1:] > rhs_v + 2.0 * se_rhs_v
    viol_w = lhs_w - 2.0 * curves.se_w[1:] > rhs_w + 2.0 * se_rhs_w
    frac = float((viol_v.sum() + viol_w.sum()) / (viol_v.size + viol_w.size))
    m_sup = (curves.v + curves.w).max(axis=1)
    partial = np.cumsum(np.sqrt(m_sup))
    return PicardDiagnostics(
        t=t, v=curves.v, w=curves.w, se_v=curves.se_v, se_w=curves.se_w,
        rhs_v=rhs_v, rhs_w=rhs_w, se_rhs_v=se_rhs_v, se_rhs_w=se_rhs_w,
        violations_v=viol_v, violations_w=viol_w, violation_fraction=frac,
        m_sup=m_sup, sqrt_m_partial_sums=partial,
        j_forms=jf, n_realizations=curves.n_realizations,
    )


def pathwise_x2_seminorm(diff, geom, n_t=32, n_x=128):
    """Single-path kernel-weighted increment seminorm of a field difference.

    Same quadrature as the ensemble W curves but with the bare squared
    increments of this one path in place of expectations (tail completion
    included); returns the sup over the thin lattice of the square root of
    the accumulated energy.
    """
    g = make_diagnostic_grids(geom, n_t=n_t, n_x=n_x)
    rows_y = diff[g.t_idx][:, g.y_idx]
    rows_z = diff[g.t_idx][:, g.z_idx]
    pair = (rows_y[:, :, None] - rows_z[:, None, :]) ** 2
    wmat = _pair_weight_matrix(g.y, g.z, geom.h, g.dx_thin)
    rho = np.einsum("tyz,yz->ty", pair, wmat)
    tails = _tail_weights(g.y, g.z, geom.h)
    rho += (rows_y**2 + (rows_z**2).mean(axis=1, keepdims=True)) * tails
    kmats = _slab_kernel_matrices(geom.equation, g.y, g.y, g.dt_thin, g.t_idx.size, g.dx_thin)
    curve = _energy_curves(rho, kmats, g.dt_thin, g.sup_rows)
    return float(np.sqrt(curve.max()))
