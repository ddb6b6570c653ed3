"""Closed-form small-r coefficients of the data on the spheres of the null cone.

Every coefficient is a field on the unit sphere in Cartesian components (see
``sphere``).  Series are stored as ``{power: field}`` dictionaries.  The
vacuum formulas assume the Weyl jet carries first and second derivatives;
the matter formulas only use the curvature at the point itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curvature import WeylSphereFields, electric_part
from .errors import ModeMismatch, SignCalibrationFailure

# orientation of alpha_H relative to eta; fixed by calibrate_alpha_h_sign
ALPHA_H_SIGN = -1


def norm2(t):
    """Pointwise squared norm of a tangent tensor field (round metric)."""
    t = np.asarray(t)
    return np.sum(t.reshape(t.shape[0], -1) ** 2, axis=1)


def alpha_dot_beta(alpha, beta):
    return np.einsum("nij,nj->ni", alpha, beta)


@dataclass
class ExpansionTable:
    """Series coefficients of the physical data.

    ``trl`` and ``trn`` hold the expansions of the traces of the null second
    fundamental forms, ``eta`` the normal connection, ``h`` and ``h0`` the
    mean-curvature norms of the surface and of its reference image, ``k`` the
    coefficients of ``2 sqrt(K)``, and ``alpha_h`` the connection one-form in
    mean curvature gauge.
    """

    mode: str
    kappa: float
    sigma4: np.ndarray
    trl: dict = field(default_factory=dict)
    trn: dict = field(default_factory=dict)
    eta: dict = field(default_factory=dict)
    div_eta: dict = field(default_factory=dict)
    h: dict = field(default_factory=dict)
    h0: dict = field(default_factory=dict)
    k: dict = field(default_factory=dict)
    alpha_h: dict = field(default_factory=dict)
    h_squared0: np.ndarray | None = None
    div_alpha_h0: np.ndarray | None = None
    a_ring3: np.ndarray | None = None
    trn3_alt: np.ndarray | None = None


def physical_expansion(fields: WeylSphereFields, mode: str | None = None) -> ExpansionTable:
    """Populate the closed-form coefficients for ``mode`` ('vacuum' or 'matter')."""
    mode = mode or ("vacuum" if fields.vacuum else "matter")
    if mode == "vacuum":
        if not fields.vacuum:
            raise ModeMismatch("vacuum expansion requested for a matter jet")
        return _vacuum_expansion(fields)
    if mode == "matter":
        return _matter_expansion(fields)
    raise ValueError(f"unknown mode {mode!r}")


def _vacuum_expansion(f: WeylSphereFields) -> ExpansionTable:
    g = f.grid
    k2 = f.kappa**2
    f.require("d_alpha", "d_beta", "d_rho", "d2_beta", "d2_rho")
    a2, b2 = norm2(f.alpha), norm2(f.beta)
    ab = alpha_dot_beta(f.alpha, f.beta)

    t = ExpansionTable("vacuum", f.kappa, sigma4=f.alpha / 3.0)
    zero = np.zeros(g.size)
    t.trl = {-1: -2.0 + zero, 1: zero.copy(), 2: zero.copy(), 3: a2 / 45.0}
    t.trn = {
        -1: 1.0 + zero,
        1: f.rho + k2,
        2: 2.0 / 3.0 * f.d_rho,
        3: 0.25 * f.d2_rho + a2 / 30.0 - 11.0 / 45.0 * b2,
    }
    # same combination with 3/8 on D^2 rho; kept only to report its deviation
    t.trn3_alt = 0.375 * f.d2_rho + a2 / 30.0 - 11.0 / 45.0 * b2
    t.eta = {2: f.beta / 3.0, 3: f.d_beta / 4.0, 4: f.d2_beta / 10.0 - ab / 45.0}
    t.div_eta = {0: f.rho.copy(), 1: f.d_rho.copy(), 2: 0.5 * f.d2_rho + (a2 - 8.0 * b2) / 15.0}

    t.h = {1: f.rho + k2, 2: t.trn[2].copy()}
    t.k = {1: 2.0 * f.rho, 2: 5.0 / 3.0 * f.d_rho}
    t.h0 = {1: t.k[1] + k2, 2: t.k[2].copy()}
    t.h_squared0 = 4.0 * (f.rho + k2)
    t.a_ring3 = traceless_second_ff(f)
    t.alpha_h = alpha_h_series(g, t, ALPHA_H_SIGN)
    return t


def _matter_expansion(f: WeylSphereFields) -> ExpansionTable:
    ricll, ricllb, rr = f.ric_ll, f.ric_llb, f.riem_llbllb
    t = ExpansionTable("matter", f.kappa, sigma4=-f.riem_labl / 3.0)
    t.trl = {-1: -2.0 + 0 * rr, 1: ricll / 3.0}
    t.trn = {-1: 1.0 + 0 * rr, 1: rr + 2.0 / 3.0 * ricllb + ricll / 6.0}
    t.h = {1: t.trn[1] - 0.5 * t.trl[1]}
    t.k = {1: linearized_gauss_curvature(f.grid, t.sigma4)}
    t.h0 = {1: t.k[1] + f.kappa**2}
    t.h_squared0 = 2.0 * rr + 4.0 / 3.0 * ricllb + ricll / 3.0
    t.div_alpha_h0 = f.grid.laplacian(0.5 * rr + ricll / 6.0 + ricllb / 3.0) - rr - ricllb / 3.0 - ricll / 6.0
    return t


def traceless_second_ff(f: WeylSphereFields):
    """Leading traceless second fundamental form of the reference image, Cartesian components."""
    g = f.grid
    e = electric_part(f.weyl)
    pep = np.einsum("nia,ab,njb->nij", g.proj, e, g.proj)
    return -0.5 * f.rho[:, None, None] * g.proj - pep


def _log_series(series, lead_power, lead_value, top):
    """Coefficients of ``log(series / (lead_value r^lead_power))`` up to ``r^top``.

    ``series`` is ``{power: field}`` with leading term ``lead_value r^lead_power``.
    """
    rel = {}
    for p, c in series.items():
        if p > lead_power:
            rel[p - lead_power] = c / lead_value
    out = {}
    # log(1 + u) with u = sum rel[k] r^k ; u starts at r^2 for every series here
    powers = {}  # u^m coefficients
    u = rel
    cur = {0: 1.0}
    for m in range(1, top + 1):
        nxt = {}
        for p1, c1 in cur.items():
            for p2, c2 in u.items():
                if p1 + p2 <= top:
                    nxt[p1 + p2] = nxt.get(p1 + p2, 0.0) + c1 * c2
        cur = nxt
        if not cur:
            break
        for p, c in cur.items():
            out[p] = out.get(p, 0.0) + ((-1.0) ** (m + 1) / m) * c
        powers[m] = cur
    return out


def alpha_h_series(grid, table: ExpansionTable, sign: int):
    """``sign * (eta + 1/2 grad log(-tr l / tr n))`` expanded through the available orders."""
    top = max(table.eta)
    log_l = _log_series(table.trl, -1, -2.0, top)
    log_n = _log_series(table.trn, -1, 1.0, top)
    out = {}
    for p in sorted(table.eta):
        scal = np.asarray(log_l.get(p, 0.0)) - np.asarray(log_n.get(p, 0.0))
        scal = np.broadcast_to(scal, (grid.size,)).copy() if np.ndim(scal) == 0 else scal
        out[p] = sign * (table.eta[p] + 0.5 * grid.gradient(scal))
    return out


def calibrate_alpha_h_sign(grid, eta2, trl1, trn1, target, tol=1e-9):
    """Return the orientation s in {+1, -1} whose ``div alpha_H^(2)`` matches ``target``."""
    base = eta2 + 0.5 * grid.gradient(-0.5 * trl1 - trn1)
    div = grid.divergence(base)
    scale = max(1.0, float(np.max(np.abs(target))))
    for s in (+1, -1):
        if float(np.max(np.abs(s * div - target))) <= tol * scale:
            return s
    raise SignCalibrationFailure(
        "neither orientation of alpha_H reproduces the reference divergence "
        f"(residuals {np.max(np.abs(div - target)):.3e}, {np.max(np.abs(-div - target)):.3e})"
    )


def linearized_gauss_curvature(grid, h):
    """First variation of the Gauss curvature of the unit sphere in direction ``h``."""
    tr = np.trace(h, axis1=1, axis2=2)
    return 0.5 * (grid.divergence(grid.divergence(h)) - grid.laplacian(tr) - tr)


def gauss_curvature(f: WeylSphereFields, table: ExpansionTable):
    """Coefficients of ``2 sqrt(K)`` and the integral bookkeeping of its r^3 coefficient.

    ``k1`` is computed from the r^4 metric coefficient.  In vacuum,
    ``int k3`` follows from Gauss-Bonnet with the area element fixed by
    ``tr l``, and ``int (k3 - 1/4 - h3)`` uses
    ``h3 = trn3 - |alpha|^2/90 - trn1^2/4``.
    """
    g = f.grid
    out = {"k1": linearized_gauss_curvature(g, table.sigma4)}
    if table.mode != "vacuum":
        return out
    a2 = norm2(f.alpha)
    k1 = out["k1"]
    # int (k3 + k1^2/4) = (1/180) int |alpha|^2
    int_k3 = g.integrate(a2) / 180.0 - g.integrate(k1**2) / 4.0
    h3 = table.trn[3] - a2 / 90.0 - table.trn[1] ** 2 / 4.0
    out["int_k3"] = float(int_k3)
    out["int_k3_quarter_h3"] = float(int_k3 - np.pi - g.integrate(h3))
    return out
