"""Independent re-derivation of the small-r coefficients by power-series recursion.

Each unknown along the null cone (metric, null second fundamental forms,
normal connection) is a series in r whose coefficients are tangent tensor
fields on the unit sphere (Cartesian components).  Substituting the series
into the radial transport system and matching powers gives explicit
recursions; nothing here uses the closed forms of ``expansion``.

Notation: ``sigma = r^2 tau``, ``l sigma^-1 = -1/r + m`` and ``n = sum nu_k r^k``.
"""

from __future__ import annotations

import numbers

import numpy as np

from .curvature import WeylSphereFields
from .errors import MissingJetOrder, RecursionBreakdown
from .expansion import ExpansionTable, alpha_h_series, linearized_gauss_curvature

DEFAULT_ORDER = 6


class FieldSeries:
    """Truncated Laurent series ``sum_p c_p r^p`` with array coefficients.

    Coefficients are known for powers ``<= top``; everything above is
    unknown.  Arithmetic propagates the truncation.
    """

    def __init__(self, coeffs: dict, top: int, shape=None):
        coeffs = {int(p): np.asarray(c, dtype=float) for p, c in coeffs.items() if p <= top}
        if shape is None:
            if not coeffs:
                raise ValueError("shape is required for an empty series")
            shape = next(iter(coeffs.values())).shape
        self.shape = tuple(shape)
        self.coeffs = {p: np.broadcast_to(c, self.shape).copy() for p, c in coeffs.items()}
        self.top = int(top)

    @property
    def lead(self):
        """Lowest power with a nonzero coefficient (``top + 1`` if none is known)."""
        nz = [p for p, c in self.coeffs.items() if np.any(c != 0.0)]
        return min(nz) if nz else self.top + 1

    def __getitem__(self, p):
        if p > self.top:
            raise MissingJetOrder(f"coefficient r^{p} lies beyond the truncation r^{self.top}")
        c = self.coeffs.get(p)
        return np.zeros(self.shape) if c is None else c

    def powers(self):
        return sorted(self.coeffs)

    def __add__(self, other):
        if isinstance(other, numbers.Number):
            other = FieldSeries({0: np.full(self.shape, float(other))}, self.top)
        top = min(self.top, other.top)
        out = {p: self[p] for p in self.coeffs if p <= top}
        for p, c in other.coeffs.items():
            if p <= top:
                out[p] = out[p] + c if p in out else c.copy()
        return FieldSeries(out, top, self.shape)

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s):
        return FieldSeries({p: s * c for p, c in self.coeffs.items()}, self.top, self.shape)

    def shift(self, k):
        """Multiply by ``r^k``."""
        return FieldSeries({p + k: c for p, c in self.coeffs.items()}, self.top + k, self.shape)

    def deriv(self):
        return FieldSeries({p - 1: p * c for p, c in self.coeffs.items() if p != 0}, self.top - 1, self.shape)

    def map(self, fn):
        """Apply a linear map to every coefficient (e.g. a sphere derivative)."""
        out = {p: fn(c) for p, c in self.coeffs.items()}
        shape = fn(np.zeros(self.shape)).shape
        return FieldSeries(out, self.top, shape)

    def truncate(self, top):
        return FieldSeries(self.coeffs, min(top, self.top), self.shape)

    def __repr__(self):
        return f"FieldSeries(powers={self.powers()}, top={self.top}, shape={self.shape})"


def product(a: FieldSeries, b: FieldSeries, subscripts: str) -> FieldSeries:
    """Cauchy product with coefficientwise ``np.einsum(subscripts, ., .)``."""
    top = min(a.top + b.lead, b.top + a.lead)
    out = {}
    for pa, ca in a.coeffs.items():
        for pb, cb in b.coeffs.items():
            p = pa + pb
            if p <= top:
                term = np.einsum(subscripts, ca, cb)
                out[p] = out[p] + term if p in out else term
    shape = np.einsum(subscripts, np.zeros(a.shape), np.zeros(b.shape)).shape
    return FieldSeries(out, top, shape)


def matmul(a, b):
    return product(a, b, "nij,njk->nik")


def _tangent_inverse(m, normals):
    """Inverse of a tangential symmetric matrix field on the tangent planes."""
    if normals is None:
        try:
            return np.linalg.inv(m)
        except np.linalg.LinAlgError as exc:
            raise RecursionBreakdown("leading coefficient is singular") from exc
    nn = normals[:, :, None] * normals[:, None, :]
    full = m + nn
    det = np.abs(np.linalg.det(full))
    if np.min(det) < 1e-12:
        raise RecursionBreakdown(f"leading coefficient is singular (min |det| = {np.min(det):.2e})")
    return np.linalg.inv(full) - nn


def inverse(series: FieldSeries, normals=None) -> FieldSeries:
    """Inverse of a matrix series; with ``normals`` the inverse is taken on the tangent planes."""
    p0 = series.lead
    if p0 > series.top:
        raise RecursionBreakdown("cannot invert a series with no known nonzero coefficient")
    rel_top = series.top - p0
    b0 = _tangent_inverse(series[p0], normals)
    coeff = [b0]
    for k in range(1, rel_top + 1):
        acc = np.zeros_like(b0)
        for j in range(1, k + 1):
            acc = acc + np.einsum("nij,njk->nik", series[p0 + j], coeff[k - j])
        coeff.append(-np.einsum("nij,njk->nik", b0, acc))
    return FieldSeries({k - p0: c for k, c in enumerate(coeff)}, rel_top - p0, series.shape)


def reciprocal(series: FieldSeries) -> FieldSeries:
    """``1 / s`` for a scalar series with nowhere-vanishing leading coefficient."""
    p0 = series.lead
    c0 = series[p0]
    if np.min(np.abs(c0)) < 1e-14:
        raise RecursionBreakdown("leading scalar coefficient vanishes somewhere")
    rel_top = series.top - p0
    coeff = [1.0 / c0]
    for k in range(1, rel_top + 1):
        acc = sum(series[p0 + j] * coeff[k - j] for j in range(1, k + 1))
        coeff.append(-acc / c0)
    return FieldSeries({k - p0: c for k, c in enumerate(coeff)}, rel_top - p0, series.shape)


def trace(series: FieldSeries) -> FieldSeries:
    return series.map(lambda c: np.trace(c, axis1=-2, axis2=-1))


# -- metric quantities -------------------------------------------------------------


def inverse_metric_series(sigma: FieldSeries, grid) -> FieldSeries:
    """``sigma^{ab}`` as a series, inverted on the tangent planes."""
    return inverse(sigma, grid.points)


def christoffel_series(sigma: FieldSeries, grid) -> FieldSeries:
    """Difference ``gamma - gamma_round`` of the Christoffel symbols, indexed ``[n, c, a, b]``.

    The round connection itself is carried by ``grid.covariant_derivative``,
    so a metric ``r^2 sigma_round`` gives the zero series.
    """
    sinv = inverse_metric_series(sigma, grid)
    d = sigma.map(grid.covariant_derivative)  # d[n, j, k, l] = nabla_j sigma_kl
    k = d.map(lambda t: np.einsum("nadb->ndab", t) + np.einsum("nbad->ndab", t) - t)
    return product(sinv, k, "ncd,ndab->ncab").scale(0.5)


def connection_divergence(eta: FieldSeries, sigma: FieldSeries, grid) -> FieldSeries:
    """``sigma^{ab} (nabla_a eta_b)`` with the connection of ``sigma``."""
    sinv = inverse_metric_series(sigma, grid)
    return product(sinv, covariant_derivative(eta, sigma, grid), "nab,nab->n")


def covariant_derivative(eta: FieldSeries, sigma: FieldSeries, grid) -> FieldSeries:
    gam = christoffel_series(sigma, grid)
    return eta.map(grid.covariant_derivative) - product(gam, eta, "ncab,nc->nab")


# -- curvature sources ---------------------------------------------------------------


def _sources(fields: WeylSphereFields, mode: str, depth: int):
    """Curvature along the cone in coordinate components, as series in r."""
    n = fields.grid.size
    if mode == "vacuum":
        r_labl = {2: fields.riem_labl}
        s_lall = {1: fields.beta}
        scalar = {0: fields.ric_llb + fields.riem_llbllb}
        if depth >= 1:
            r_labl[3] = -fields.d_alpha
            s_lall[2] = fields.d_beta
            scalar[1] = fields.d_rho
        if depth >= 2:
            s_lall[3] = 0.5 * fields.d2_beta
            scalar[2] = 0.5 * fields.d2_rho
        ric_ll = FieldSeries({0: np.zeros(n)}, 10)  # vanishes identically in vacuum
    else:
        r_labl = {2: fields.riem_labl}
        s_lall = {1: fields.riem_lalbl}
        scalar = {0: fields.ric_llb + fields.riem_llbllb}
        ric_ll = FieldSeries({0: fields.ric_ll}, 0)
    return (
        FieldSeries(r_labl, 2 + depth),
        FieldSeries(s_lall, 1 + depth),
        FieldSeries(scalar, depth),
        FieldSeries({2: fields.riem_lablb}, 2),
        ric_ll,
    )


class TransportSolution:
    """All series produced by ``solve_transport``."""

    def __init__(self, **kw):
        self.__dict__.update(kw)


def solve_transport(fields: WeylSphereFields, mode: str | None = None, depth: int | None = None):
    """Solve the transport recursions to the orders the curvature data supports."""
    mode = mode or ("vacuum" if fields.vacuum else "matter")
    g = fields.grid
    p = g.proj
    if depth is None:
        depth = 0
        if mode == "vacuum":
            depth = 2 if fields.d2_beta is not None else (1 if fields.d_alpha is not None else 0)
    r_labl, s_lall, scalar_src, r_lablb, ric_ll = _sources(fields, mode, depth)

    # metric and l: sigma = r^2 tau, l sigma^-1 = -1/r + m
    tau = {0: p.copy(), 1: np.zeros_like(p)}
    tau_inv = {0: p.copy(), 1: np.zeros_like(p)}
    m = {}
    m_top = r_labl.top - 1

    def inv_coeff(k):
        acc = np.zeros_like(p)
        for j in range(1, k + 1):
            acc += tau[j] @ tau_inv[k - j]
        return -tau_inv[0] @ acc

    for k in range(1, m_top + 1):
        src = sum(r_labl[j] @ tau_inv[k + 1 - j] for j in r_labl.powers() if 0 <= k + 1 - j <= k - 1)
        quad = sum(m[i] @ m[k - 1 - i] for i in range(1, k - 1) if i in m and (k - 1 - i) in m)
        m[k] = (src + quad) / (k + 2.0)
        tau[k + 1] = -2.0 * sum(m[j] @ tau[k - j] for j in range(1, k + 1)) / (k + 1.0)
        tau_inv[k + 1] = inv_coeff(k + 1)
    tau_s = FieldSeries(tau, m_top + 1)
    sigma = tau_s.shift(2)
    m_s = FieldSeries({k: v for k, v in m.items()}, m_top, p.shape)

    # trace of l through Raychaudhuri, one order past the tensor
    tm = {}
    for k in range(1, min(m_top + 1, ric_ll.top + 1) + 1):
        sq = sum(np.trace(m[i] @ m[k - 1 - i], axis1=1, axis2=2)
                 for i in range(1, k - 1) if i in m and (k - 1 - i) in m)
        tm[k] = (ric_ll[k - 1] + sq) / (k + 2.0)
    trm = FieldSeries(tm, max(tm), (g.size,))
    trl = trm + FieldSeries({-1: np.full(g.size, -2.0)}, trm.top)

    # normal connection
    eta = {}
    eta_top = s_lall.top + 1
    for k in range(1, eta_top + 1):
        mix = sum(np.einsum("nab,nb->na", m[i], eta[k - 1 - i]) for i in m if (k - 1 - i) in eta)
        eta[k] = (s_lall[k - 1] + mix) / (k + 1.0)
    eta_s = FieldSeries(eta, eta_top, (g.size, 3))

    div_eta = connection_divergence(eta_s, sigma, g)
    grad_eta = covariant_derivative(eta_s, sigma, g)
    eta_eta = product(eta_s, eta_s, "na,nb->nab")

    # second fundamental form along the incoming normal
    nu = {1: 0.5 * p}
    nu_top = min(r_lablb.top + 1, grad_eta.top + 1, m_top + 1)
    for k in range(2, nu_top + 1):
        rhs = r_lablb[k - 1] + grad_eta[k - 1] - eta_eta[k - 1]
        rhs = rhs - sum(nu[i] @ np.swapaxes(m[k - 1 - i], 1, 2) for i in nu if (k - 1 - i) in m)
        nu[k] = rhs / (k - 1.0)
    nu_s = FieldSeries(nu, nu_top, p.shape)

    # tr n: r^-1 d/dr (r tr n) = rest
    sinv = inverse_metric_series(sigma, g)
    ell = matmul(FieldSeries({k: v for k, v in m.items()}, m_top, p.shape), tau_s).shift(2)  # l + sigma/r
    up = matmul(matmul(sinv, ell), sinv)
    q = product(up, nu_s - sigma.shift(-1).scale(0.5), "nab,nab->n")
    eta_sq = product(sinv, eta_eta, "nab,nab->n")
    scalar = scalar_src
    if mode == "vacuum" and depth >= 2:
        # the incoming normal turns by eta along the cone
        turn = FieldSeries({2: -np.einsum("na,na->n", eta[2], fields.beta)}, 2)
        scalar = scalar + turn
    rest = scalar + q + trm.shift(-1).scale(0.5) + div_eta - eta_sq
    t = {-1: np.ones(g.size)}
    for k in range(0, rest.top + 2):
        t[k] = rest[k - 1] / (k + 1.0)
    trn = FieldSeries(t, rest.top + 1, (g.size,))

    return TransportSolution(
        mode=mode, depth=depth, sigma=sigma, tau=tau_s, m=m_s, trl=trl, eta=eta_s, nu=nu_s,
        trn=trn, div_eta=div_eta, sigma_inv=sinv, gamma=christoffel_series(sigma, g),
    )


def run_transport(fields: WeylSphereFields, order: int = DEFAULT_ORDER, mode: str | None = None) -> ExpansionTable:
    """Expansion table from the transport recursion, truncated at ``r^order`` where the data allows."""
    sol = solve_transport(fields, mode)
    g = fields.grid

    def cut(s: FieldSeries, lo):
        return {p: s[p].copy() for p in range(lo, min(s.top, order) + 1)}

    t = ExpansionTable(sol.mode, fields.kappa, sigma4=sol.tau[2].copy())
    t.trl = cut(sol.trl, -1)
    t.trn = cut(sol.trn, -1)
    t.eta = {p: c for p, c in cut(sol.eta, 2).items()}
    t.div_eta = cut(sol.div_eta, 0)
    t.h = {p: t.trn[p] - 0.5 * t.trl[p] for p in (1, 2) if p in t.trn and p in t.trl}
    t.h_squared0 = 4.0 * t.trn[1] - 2.0 * t.trl[1]
    t.k = {1: linearized_gauss_curvature(g, t.sigma4)}
    t.h0 = {1: t.k[1] + fields.kappa**2}
    from .expansion import ALPHA_H_SIGN

    t.alpha_h = alpha_h_series(g, t, ALPHA_H_SIGN)
    if sol.mode == "matter":
        t.div_alpha_h0 = g.divergence(t.alpha_h[2])
    return t
