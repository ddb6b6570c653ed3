"""Killing fields of AdS, the observer test, boost-field expansions and observer minimization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import InfimumNotAttained, MalformedInput, NotTimelike


@dataclass(frozen=True)
class KillingField:
    """``(A, B, C, D)``: boost/time part ``A``, boosts ``B`` and ``C``, rotation ``D``."""

    a: float
    b: tuple = (0.0, 0.0, 0.0)
    c: tuple = (0.0, 0.0, 0.0)
    d: tuple = (0.0, 0.0, 0.0)
    kappa: float = 1.0

    def __post_init__(self):
        for name in ("b", "c", "d"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                raise MalformedInput(f"Killing field component {name} must be a finite 3-vector")
            object.__setattr__(self, name, tuple(float(t) for t in v))
        if not np.isfinite(self.a):
            raise MalformedInput("Killing field component A must be finite")
        object.__setattr__(self, "a", float(self.a))

    def arrays(self):
        return self.a, np.array(self.b), np.array(self.c), np.array(self.d)


@dataclass(frozen=True)
class ObserverCheck:
    valid: bool
    residuals: dict = field(default_factory=dict)


def is_observer(k: KillingField, tol: float = 1e-12) -> ObserverCheck:
    """The three conditions for a unit-normalized timelike hypersurface-orthogonal Killing field."""
    a, b, c, d = k.arrays()
    cross = a * d + np.cross(b, c)
    norm = a**2 + d @ d - b @ b - c @ c - k.kappa**2
    margin = a - max(np.linalg.norm(b), np.linalg.norm(c), np.linalg.norm(d))
    res = {
        "hypersurface-orthogonal": float(np.max(np.abs(cross))),
        "normalization": float(abs(norm)),
        "dominance": float(margin),
    }
    ok = res["hypersurface-orthogonal"] <= tol * max(1.0, a * a) and res["normalization"] <= tol * max(1.0, a * a) and margin > 0
    return ObserverCheck(bool(ok), res)


class Observer:
    """A Killing field that passes the observer test."""

    def __init__(self, killing: KillingField, tol: float = 1e-12):
        check = is_observer(killing, tol)
        if not check.valid:
            raise MalformedInput(f"not an observer Killing field: {check.residuals}")
        self.killing = killing
        self.check = check

    @classmethod
    def from_c(cls, c, kappa: float = 1.0):
        """The observer ``A = sqrt(kappa^2 + |C|^2)``, ``B = D = 0``."""
        c = np.asarray(c, dtype=float)
        return cls(KillingField(float(np.sqrt(kappa**2 + c @ c)), c=tuple(c), kappa=kappa))

    @classmethod
    def static(cls, kappa: float = 1.0):
        return cls(KillingField(kappa, kappa=kappa))

    @property
    def a(self):
        return self.killing.a

    @property
    def b(self):
        return np.array(self.killing.b)

    @property
    def c(self):
        return np.array(self.killing.c)

    @property
    def d(self):
        return np.array(self.killing.d)

    def __repr__(self):
        return f"Observer(A={self.a!r}, B={self.killing.b}, C={self.killing.c}, D={self.killing.d})"


# -- boost-field expansions ----------------------------------------------------------


@dataclass
class BoostFields:
    """Coefficients of ``V^2``, ``V^4 |grad tau|^2`` and ``(div V^2 grad tau)^2`` by power of r."""

    v2: dict
    v4_grad_tau2: dict
    div_sq: dict
    g1: np.ndarray
    g2: np.ndarray


def boost_fields(obs: Observer, emb, fields) -> BoostFields:
    """Series of the boost quantities on the small spheres for a leading-order embedding."""
    from .curvature import derived_fields

    g = fields.grid
    x = g.points
    a, b, c, d = obs.a, obs.b, obs.c, obs.d
    rot = np.cross(d, x)  # D_p eps_{pqi} X^q, indexed by i
    bx, cx = x @ b, x @ c
    m2 = a * a - c @ c
    v2 = {
        0: np.full(g.size, m2),
        1: 2.0 * (a * bx - rot @ c),
        2: bx**2 + cx**2 - np.sum(rot**2, axis=1) + m2,
    }
    der = derived_fields(fields)
    gy = g.gradient(emb.yi3)     # [n, a, j]
    gy0 = g.gradient(emb.y03)    # [n, a]
    grad_cx = g.proj @ c         # [n, a]
    g1 = (
        np.einsum("i,j,nij->n", c, c, der.r_ij)
        + 2.0 * np.einsum("na,naj,j->n", grad_cx, gy, c)
        + 2.0 * a * np.einsum("na,na->n", grad_cx, gy0)
    )
    lap_y = g.laplacian(emb.yi3)
    g2 = 4.0 * cx * ((der.s_j - lap_y) @ c) - 4.0 * a * cx * g.laplacian(emb.y03)
    perp = c @ c - cx**2
    v4 = {0: perp, 1: 2.0 * rot @ c, 2: perp + np.sum(rot**2, axis=1) + g1}
    div_sq = {-2: 4.0 * cx**2, 0: 4.0 * cx**2 + g2}
    return BoostFields(v2, v4, div_sq, g1, g2)


# -- minimization --------------------------------------------------------------------


@dataclass
class Certificate:
    gradient_norm: float
    hessian_min_eig: float
    grid_minimizer: np.ndarray
    grid_distance: float
    multistart_spread: float
    iterations: int
    value_at_static: float


@dataclass
class MinimizationResult:
    observer: Observer
    c: np.ndarray
    value: float
    certificate: Certificate | None = None


def _objective(u0, uvec, e2):
    """``90 E5`` on the hyperboloid ``A = sqrt(1 + |C|^2)`` with gradient and Hessian in C."""

    def f(c):
        a = np.sqrt(1.0 + c @ c)
        return u0 * a + uvec @ c + e2 / (2.0 * a)

    def grad(c):
        a = np.sqrt(1.0 + c @ c)
        return (u0 - e2 / (2.0 * a * a)) * c / a + uvec

    def hess(c):
        a = np.sqrt(1.0 + c @ c)
        da = c / a
        dda = (np.eye(3) - np.outer(da, da)) / a
        k = u0 - e2 / (2.0 * a * a)
        return k * dda + (e2 / a**3) * np.outer(da, da)

    return f, grad, hess


def _newton(f, grad, hess, c0, tol=1e-13, max_iter=200):
    c = np.array(c0, dtype=float)
    it = 0
    for it in range(1, max_iter + 1):
        gvec = grad(c)
        if np.linalg.norm(gvec) <= tol:
            break
        h = hess(c)
        try:
            step = -np.linalg.solve(h, gvec)
            if step @ gvec >= 0:
                step = -gvec
        except np.linalg.LinAlgError:
            step = -gvec
        t, f0 = 1.0, f(c)
        while f(c + t * step) > f0 + 1e-4 * t * (step @ gvec) and t > 1e-12:
            t *= 0.5
        c = c + t * step
    return c, it


def _grid_oracle(f, radius=10.0, n=21, levels=2):
    """Brute-force minimizer: coarse cube grid then two refinements around the best node."""
    center, half = np.zeros(3), radius
    for _ in range(levels + 1):
        axis = np.linspace(-half, half, n)
        pts = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3) + center
        vals = np.array([f(p) for p in pts])
        center = pts[int(np.argmin(vals))]
        half = 2.0 * half / (n - 1)
    res = optimize.minimize(f, center, method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 20000})
    return res.x


def minimize_vacuum(weyl, seeds: int = 8, rng=None, grid_oracle: bool = True) -> MinimizationResult:
    """Unique minimizer of the limiting O(r^5) energy over observers ``A = sqrt(1 + |C|^2)``."""
    from .energy import closed_form_e5, u_vector

    u, timelike = u_vector(weyl)
    if not timelike:
        raise InfimumNotAttained("U is not timelike; the limiting energy has no unique minimizer", u_vector=u)
    e2 = float(np.sum(np.asarray(weyl)[0, 1:, 0, 1:] ** 2))
    f, grad, hess = _objective(u[0], u[1:], e2)
    c, iters = _newton(f, grad, hess, np.zeros(3))
    rng = np.random.default_rng(0) if rng is None else rng
    spread = 0.0
    for _ in range(seeds):
        ci, _ = _newton(f, grad, hess, rng.normal(scale=2.0, size=3))
        spread = max(spread, float(np.linalg.norm(ci - c)))
    gmin = _grid_oracle(f) if grid_oracle else c
    cert = Certificate(
        gradient_norm=float(np.linalg.norm(grad(c))),
        hessian_min_eig=float(np.linalg.eigvalsh(hess(c)).min()),
        grid_minimizer=gmin,
        grid_distance=float(np.linalg.norm(gmin - c)),
        multistart_spread=spread,
        iterations=iters,
        value_at_static=closed_form_e5(weyl, Observer.static()),
    )
    obs = Observer.from_c(c)
    return MinimizationResult(obs, c, closed_form_e5(weyl, obs), cert)


def matter_flux(stress_energy):
    """``(T00, -T0i)``: components of the vector dual to ``T(e0, .)``."""
    t = np.asarray(stress_energy, dtype=float)[0].copy()
    t[1:] *= -1.0
    return t


def minimize_matter(stress_energy, tol: float = 1e-14) -> MinimizationResult:
    """Minimize ``E3 = (4 pi / 3)(A T00 - C_i T0i)`` over ``A = sqrt(1 + |C|^2)``."""
    t = matter_flux(stress_energy)
    t0, tv = t[0], t[1:]
    if not t0 > np.linalg.norm(tv) * (1.0 + 1e-12):
        raise NotTimelike(f"T(e0, .) dual vector is not future timelike: T00={t0}, |T0i|={np.linalg.norm(tv)}")
    scale = 4.0 * np.pi / 3.0

    def f(c):
        return scale * (t0 * np.sqrt(1.0 + c @ c) + tv @ c)

    def grad(c):
        return scale * (t0 * c / np.sqrt(1.0 + c @ c) + tv)

    def hess(c):
        a = np.sqrt(1.0 + c @ c)
        return scale * t0 * (np.eye(3) - np.outer(c, c) / a**2) / a

    c, _ = _newton(f, grad, hess, np.zeros(3), tol=tol)
    return MinimizationResult(Observer.from_c(c), c, float(f(c)))


def matter_minimum_closed_form(stress_energy):
    t = matter_flux(stress_energy)
    return 4.0 * np.pi / 3.0 * float(np.sqrt(t[0] ** 2 - t[1:] @ t[1:]))
