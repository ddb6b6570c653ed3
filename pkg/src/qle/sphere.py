"""Spectral calculus on the unit sphere.

Fields live on a Gauss-Legendre (colatitude) x equispaced (longitude) grid
and are stored as plain numpy arrays whose first axis runs over grid nodes.
Vector and tensor fields keep ambient Cartesian components, so a covector
field has shape ``(N, 3)`` and a 2-tensor field ``(N, 3, 3)``; tangency means
the contraction of every stored index with the position vector vanishes.

With ``l_max = L`` the default grid has ``L + 1`` colatitude nodes and
``2L + 3`` longitudes, which integrates every polynomial in the Cartesian
coordinates of degree ``<= 2L`` exactly.  All differentiation goes through
the real spherical-harmonic expansion and is exact for band-limited input.
"""

from __future__ import annotations

import numpy as np
from scipy.special import roots_legendre, sph_harm_y_all

from .errors import BandLimitError, KernelObstruction

LEVI_CIVITA = np.zeros((3, 3, 3))
LEVI_CIVITA[0, 1, 2] = LEVI_CIVITA[1, 2, 0] = LEVI_CIVITA[2, 0, 1] = 1.0
LEVI_CIVITA[0, 2, 1] = LEVI_CIVITA[2, 1, 0] = LEVI_CIVITA[1, 0, 2] = -1.0


def _real_harmonics(l_max, theta, phi):
    """Real orthonormal harmonics and their (theta, phi) derivatives.

    Column ``l*l + l + m`` holds degree ``l`` and order ``m``.
    """
    Y, dY = sph_harm_y_all(l_max, l_max, theta, phi, diff_n=1)
    nb = (l_max + 1) ** 2
    n = theta.size
    val = np.zeros((n, nb))
    dth = np.zeros((n, nb))
    dph = np.zeros((n, nb))
    root2 = np.sqrt(2.0)
    for l in range(l_max + 1):
        for m in range(-l, l + 1):
            k = l * l + l + m
            am = abs(m)
            y, yt, yp = Y[l, am], dY[l, am, :, 0], dY[l, am, :, 1]
            if m == 0:
                val[:, k], dth[:, k], dph[:, k] = y.real, yt.real, yp.real
            else:
                sign = root2 * (-1.0) ** am
                part = np.real if m > 0 else np.imag
                val[:, k] = sign * part(y)
                dth[:, k] = sign * part(yt)
                dph[:, k] = sign * part(yp)
    return val, dth, dph


class SphereGrid:
    """Quadrature grid, harmonic basis and covariant calculus on the round S^2."""

    def __init__(self, l_max: int = 15, n_theta: int | None = None, n_phi: int | None = None):
        if l_max < 2:
            raise ValueError("l_max must be at least 2")
        self.l_max = int(l_max)
        self.n_theta = int(n_theta) if n_theta is not None else self.l_max + 1
        self.n_phi = int(n_phi) if n_phi is not None else 2 * self.l_max + 3
        if self.n_theta < self.l_max + 1 or self.n_phi < 2 * self.l_max + 1:
            raise ValueError("grid too coarse for the requested band limit")

        x, wx = roots_legendre(self.n_theta)
        phi = 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi
        ct, ph = np.meshgrid(x, phi, indexing="ij")
        ct, ph = ct.ravel(), ph.ravel()
        st = np.sqrt(1.0 - ct**2)
        theta = np.arccos(ct)
        self.cos_theta, self.phi = ct, ph
        self.weights = np.repeat(wx, self.n_phi) * (2.0 * np.pi / self.n_phi)
        self.points = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=1)
        self.size = self.points.shape[0]

        self.e_theta = np.stack([ct * np.cos(ph), ct * np.sin(ph), -st], axis=1)
        self.e_phi = np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(ph)], axis=1)
        # tangential projector = round metric in Cartesian components
        self.proj = np.eye(3)[None] - self.points[:, :, None] * self.points[:, None, :]
        # area form, eps(e_theta, e_phi) = +1
        self.eps = np.einsum("ijk,ni->njk", LEVI_CIVITA, self.points)
        # d X^i / d u^a for u = (theta, phi)
        self.frame = np.stack([self.e_theta, st[:, None] * self.e_phi], axis=1)

        val, dth, dph = _real_harmonics(self.l_max, theta, ph)
        self.ylm = val
        self.grad_ylm = (
            self.e_theta[:, :, None] * dth[:, None, :]
            + self.e_phi[:, :, None] * (dph / st[:, None])[:, None, :]
        )
        self.degree = np.concatenate([np.full(2 * l + 1, l) for l in range(self.l_max + 1)])
        self.order = np.concatenate([np.arange(-l, l + 1) for l in range(self.l_max + 1)])
        self._wy = self.ylm * self.weights[:, None]

    # -- quadrature and transforms ------------------------------------------------

    def integrate(self, field):
        """Steradian-weighted integral; trailing axes are integrated componentwise."""
        return np.tensordot(self.weights, np.asarray(field, dtype=float), axes=(0, 0))

    def analyze(self, field, check: bool = True, rtol: float = 1e-10):
        """Real harmonic coefficients of every component, shape ``(n_basis, ...)``."""
        field = np.asarray(field, dtype=float)
        coeffs = np.tensordot(self._wy, field, axes=(0, 0))
        if check:
            back = np.tensordot(self.ylm, coeffs, axes=(1, 0))
            scale = max(1.0, float(np.max(np.abs(field), initial=0.0)))
            err = float(np.max(np.abs(back - field), initial=0.0))
            if err > rtol * scale:
                raise BandLimitError(
                    f"field not resolved at l_max={self.l_max} (round-trip error {err:.2e})"
                )
        return coeffs

    def synthesize(self, coeffs):
        return np.tensordot(self.ylm, np.asarray(coeffs, dtype=float), axes=(1, 0))

    def degree_power(self, field):
        """Sum of squared coefficients per degree, shape ``(l_max + 1,)``."""
        c = self.analyze(field)
        c2 = (c**2).reshape(c.shape[0], -1).sum(axis=1)
        return np.bincount(self.degree, weights=c2, minlength=self.l_max + 1)

    def band_limit(self, field, tol: float = 1e-10):
        """Highest degree carrying content above ``tol`` (relative), or -1 for zero."""
        power = np.sqrt(self.degree_power(field))
        scale = max(1.0, float(power.max()))
        hit = np.nonzero(power > tol * scale)[0]
        return int(hit[-1]) if hit.size else -1

    # -- differential operators ---------------------------------------------------

    def laplacian(self, field):
        c = self.analyze(field)
        lam = -(self.degree * (self.degree + 1.0))
        return self.synthesize(c * lam.reshape((-1,) + (1,) * (c.ndim - 1)))

    def gradient(self, field):
        """Tangential gradient of each component; derivative axis is axis 1."""
        c = self.analyze(field)
        return np.tensordot(self.grad_ylm, c, axes=(2, 0))

    def project(self, tensor):
        """Tangential projection of every Cartesian slot after the node axis."""
        t = np.asarray(tensor, dtype=float)
        for axis in range(1, t.ndim):
            t = np.moveaxis(np.einsum("nij,nj...->ni...", self.proj, np.moveaxis(t, axis, 1)), 1, axis)
        return t

    def covariant_derivative(self, tensor):
        """Levi-Civita derivative of a tangential field: ``out[n, j, k...] = nabla_j T_k...``."""
        g = self.gradient(tensor)
        for axis in range(2, g.ndim):
            g = np.moveaxis(np.einsum("nij,nj...->ni...", self.proj, np.moveaxis(g, axis, 1)), 1, axis)
        return g

    def divergence(self, tensor):
        """Contract the derivative with the first slot: ``nabla^a T_a...``."""
        d = self.covariant_derivative(tensor)
        return np.trace(d, axis1=1, axis2=2)

    def curl(self, covector):
        """``eps^{ab} nabla_a v_b`` for a tangential covector field."""
        d = self.covariant_derivative(covector)
        return np.einsum("njk,njk->n", self.eps, d)

    def hessian(self, field):
        return self.covariant_derivative(self.gradient(field))

    # -- fourth-order operator ----------------------------------------------------

    @staticmethod
    def _bilap_symbol(l):
        return 0.5 * (l - 1.0) * l * (l + 1.0) * (l + 2.0)

    def apply_bilaplacian(self, field):
        """Apply 1/2 L (L + 2) with L the round Laplacian."""
        c = self.analyze(field)
        return self.synthesize(c * self._bilap_symbol(self.degree))

    def solve_bilaplacian(self, rhs, tol: float = 1e-9):
        """Minimal-norm solution of ``1/2 L (L + 2) u = rhs``.

        Raises KernelObstruction when ``rhs`` has l = 0, 1 content above
        ``tol * max(1, |rhs|_inf)``.
        """
        rhs = np.asarray(rhs, dtype=float)
        c = self.analyze(rhs)
        kernel = self.degree <= 1
        kmax = float(np.max(np.abs(c[kernel]), initial=0.0))
        scale = max(1.0, float(np.max(np.abs(rhs), initial=0.0)))
        if kmax > tol * scale:
            raise KernelObstruction(
                f"right-hand side has l<=1 content {kmax:.3e}; the equation is not solvable",
                residual=kmax,
            )
        out = np.zeros_like(c)
        out[~kernel] = c[~kernel] / self._bilap_symbol(self.degree[~kernel])
        return self.synthesize(out)

    def kernel_part(self, field):
        """Component of a scalar field in degrees 0 and 1."""
        c = self.analyze(field)
        c[self.degree > 1] = 0.0
        return self.synthesize(c)


def sup_norm(field) -> float:
    return float(np.max(np.abs(field), initial=0.0))
