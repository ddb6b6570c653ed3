import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qle import curvature as cv
from qle.embedding import (embed, isometric_residual, optimal_embedding_residual, optimal_embedding_rhs,
                           solve_y03, solve_yi3)
from qle.errors import KernelObstruction, ModeMismatch
from qle.expansion import physical_expansion
from qle.observer import Observer
from qle.sphere import SphereGrid, sup_norm

_GRID = SphereGrid(15)


@pytest.fixture
def vac(grid, rng):
    f = cv.decompose(cv.random_vacuum_jet(rng), grid)
    return f, physical_expansion(f)


def test_zero_curvature_embedding_is_round(grid):
    jet = cv.CurvatureJet(weyl=np.zeros((4,) * 4), ricci=-3.0 * cv.METRIC,
                          d_weyl=np.zeros((4,) * 5), d2_weyl=np.zeros((4,) * 6))
    f = cv.decompose(jet, grid)
    e = embed(f, Observer.from_c([0.4, 0.1, -2.0]))
    assert sup_norm(e.yi3) == 0 and sup_norm(e.y03) == 0


def test_isometric_equation_vacuum(vac):
    f, _ = vac
    assert isometric_residual(f, solve_yi3(f)) < 1e-10


def test_isometric_equation_matter(grid, rng):
    f = cv.decompose(cv.random_matter_jet(rng), grid, order=0)
    assert isometric_residual(f, solve_yi3(f, "matter"), "matter") < 1e-10


def test_vacuum_formula_refused_for_matter(grid, rng):
    f = cv.decompose(cv.random_matter_jet(rng), grid, order=0)
    with pytest.raises(ModeMismatch):
        solve_y03(f, Observer.static())


def test_static_observer_time_function(vac):
    f, _ = vac
    assert sup_norm(solve_y03(f, Observer.static()) + f.rho / 3) < 1e-14


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_spectral_matches_closed_form(seed, c):
    f = cv.decompose(cv.random_vacuum_jet(np.random.default_rng(seed)), _GRID)
    table = physical_expansion(f)
    obs = Observer.from_c(c)
    closed = solve_y03(f, obs, "closed_form", table)
    assert sup_norm(solve_y03(f, obs, "spectral", table) - closed) < 1e-9
    assert optimal_embedding_residual(embed(f, obs, table=table), f, obs, table) < 1e-9


def test_perturbed_time_function_fails(vac):
    f, t = vac
    obs = Observer.from_c([0.5, -1.0, 0.2])
    e = embed(f, obs, table=t)
    e.y03 = e.y03 + 0.1 * f.rho
    # rho is an l = 2 field, so the perturbation is visible to the operator
    assert optimal_embedding_residual(e, f, obs, t) > 0.1 * sup_norm(f.rho)


def test_kernel_content_is_invisible(vac, grid):
    f, t = vac
    obs = Observer.from_c([1.0, 0.0, 2.0])
    e = embed(f, obs, table=t)
    base = optimal_embedding_residual(e, f, obs, t)
    e.y03 = e.y03 + 0.7 + grid.points @ np.array([0.3, -0.2, 1.1])
    assert base < 1e-9
    assert optimal_embedding_residual(e, f, obs, t) < 1e-9


def test_rhs_is_orthogonal_to_kernel(vac, grid):
    f, t = vac
    rhs = optimal_embedding_rhs(f, Observer.from_c([2.0, 1.0, -0.5]), t)
    assert sup_norm(grid.kernel_part(rhs)) < 1e-12


def test_band_content(vac, grid):
    f, _ = vac
    y = solve_y03(f, Observer.from_c([0.3, 0.3, 0.3]))
    c = grid.analyze(y)
    assert np.max(np.abs(c[grid.degree <= 1])) < 1e-12
    assert np.max(np.abs(c[grid.degree > 3])) < 1e-12


def test_kernel_obstruction_propagates(grid):
    with pytest.raises(KernelObstruction):
        grid.solve_bilaplacian(np.ones(grid.size))


def test_kernel_policy_metadata(vac):
    f, t = vac
    e = embed(f, Observer.static(), table=t)
    assert e.kernel_policy["policy"] == "minimal-norm"
    assert e.kernel_policy["removed_l01_norm"] < 1e-12
