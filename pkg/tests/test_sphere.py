import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qle.errors import BandLimitError, KernelObstruction
from qle.sphere import SphereGrid, sup_norm


def _poly(points, coef, degree):
    x, y, z = points.T
    out = np.zeros(len(points))
    k = 0
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            out += coef[k] * x**i * y**j * z ** (degree - i - j)
            k += 1
    return out


def test_constant_integrates_to_area(grid):
    assert grid.integrate(np.ones(grid.size)) == pytest.approx(4 * np.pi, abs=1e-13)


def test_exact_moments(grid):
    x = grid.points[:, 0]
    assert grid.integrate(x**2) == pytest.approx(4 * np.pi / 3, abs=1e-13)
    assert grid.integrate(x**4) == pytest.approx(4 * np.pi / 5, abs=1e-13)


_COARSE = SphereGrid(10)
_FINE = SphereGrid(10, n_theta=4 * _COARSE.n_theta, n_phi=4 * _COARSE.n_phi)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_degree_ten_polynomial_matches_refined_quadrature(seed):
    rng = np.random.default_rng(seed)
    coef = rng.standard_normal(66)
    g, fine = _COARSE, _FINE
    a = g.integrate(_poly(g.points, coef, 10))
    b = fine.integrate(_poly(fine.points, coef, 10))
    assert abs(a - b) < 1e-12 * max(1.0, abs(b))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip(seed):
    g = _COARSE
    c = np.random.default_rng(seed).standard_normal(len(g.degree))
    f = g.synthesize(c)
    assert np.max(np.abs(g.analyze(f) - c)) < 1e-12


def test_unresolved_field_raises():
    g = SphereGrid(8)
    with pytest.raises(BandLimitError):
        g.analyze(np.exp(5 * g.points[:, 0]))


def test_laplacian_eigenvalues(grid):
    for l in range(6):
        f = grid.ylm[:, grid.degree == l][:, 0]
        assert sup_norm(grid.laplacian(f) + l * (l + 1) * f) < 1e-11


def test_gradient_against_finite_differences(grid, rng):
    c = rng.standard_normal(len(grid.degree)) * (grid.degree <= 6)
    grad = grid.gradient(grid.synthesize(c))
    # rotated patch: central differences along a great circle through each probe node
    rot = np.linalg.qr(rng.standard_normal((3, 3)))[0]
    for n in rng.choice(grid.size, 5, replace=False):
        p = grid.points[n]
        t = rot[0] - (rot[0] @ p) * p
        t /= np.linalg.norm(t)
        h = 1e-4
        q_plus = np.cos(h) * p + np.sin(h) * t
        q_minus = np.cos(h) * p - np.sin(h) * t
        val = _eval_field(grid, c, np.stack([q_plus, q_minus]))
        fd = (val[0] - val[1]) / (2 * h)
        assert abs(fd - grad[n] @ t) < 1e-6


def _eval_field(grid, coeffs, pts):
    from qle.sphere import _real_harmonics

    theta = np.arccos(np.clip(pts[:, 2], -1, 1))
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    val, _, _ = _real_harmonics(grid.l_max, theta, phi)
    return val @ coeffs


def test_bilaplacian_solve(grid, rng):
    c = rng.standard_normal(len(grid.degree)) * (grid.degree >= 2) * (grid.degree <= 8)
    u = grid.synthesize(c)
    rhs = grid.apply_bilaplacian(u)
    assert sup_norm(grid.solve_bilaplacian(rhs) - u) < 1e-11 * max(1.0, sup_norm(u))


def test_bilaplacian_kernel_obstruction(grid):
    with pytest.raises(KernelObstruction):
        grid.solve_bilaplacian(grid.points[:, 2])


def test_kernel_part(grid):
    f = 1.0 + grid.points[:, 0] + grid.points[:, 0] * grid.points[:, 1]
    assert sup_norm(grid.kernel_part(f) - 1.0 - grid.points[:, 0]) < 1e-13


def test_divergence_of_gradient_is_laplacian(grid, rng):
    c = rng.standard_normal(len(grid.degree)) * (grid.degree <= 7)
    f = grid.synthesize(c)
    assert sup_norm(grid.divergence(grid.gradient(f)) - grid.laplacian(f)) < 1e-10
