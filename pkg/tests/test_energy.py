import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qle import curvature as cv
from qle.energy import (TERM_SIGNS, assemble_e5, closed_form_e5, matter_limit, physical_term_from_series,
                        reference_lhs_check, resolve_term_signs, sub_integrals, u_vector, vacuum_context,
                        vacuum_energy_component, vacuum_physical_term, vacuum_reference_term)
from qle.errors import MalformedInput, ModeMismatch
from qle.observer import Observer
from qle.sphere import SphereGrid

_GRID = SphereGrid(15)
PE_W0_SQ = 16 * np.pi / 5


def _zero_jet():
    return cv.CurvatureJet(weyl=np.zeros((4,) * 4), ricci=-3.0 * cv.METRIC,
                           d_weyl=np.zeros((4,) * 5), d2_weyl=np.zeros((4,) * 6))


def _dust(rho=1.0):
    t = np.zeros((4, 4))
    t[0, 0] = rho
    return cv.CurvatureJet(weyl=np.zeros((4,) * 4), stress_energy=t, vacuum=False)


def test_zero_weyl_terms_vanish(grid):
    ctx = vacuum_context(_zero_jet(), Observer.from_c([1.0, 2.0, -0.5]), grid)
    assert vacuum_energy_component(ctx) == pytest.approx(0.0, abs=1e-13)
    assert vacuum_reference_term(ctx) == pytest.approx(0.0, abs=1e-13)
    assert vacuum_physical_term(ctx) == pytest.approx(0.0, abs=1e-13)


def test_pure_electric_sub_integrals(grid):
    s = sub_integrals(vacuum_context(cv.pure_electric_jet(), Observer.static(), grid))
    assert s["int_w0_sq"] == pytest.approx(PE_W0_SQ, abs=1e-12)
    assert s["int_a_ring_sq"] == pytest.approx(3 * PE_W0_SQ, abs=1e-12)


def test_static_reference_term(grid):
    ctx = vacuum_context(cv.pure_electric_jet(), Observer.static(), grid)
    assert vacuum_reference_term(ctx) == pytest.approx(4 / 3 * PE_W0_SQ, abs=1e-12)


def test_pure_electric_limit(grid):
    rep = assemble_e5(cv.pure_electric_jet(), Observer.static(), grid)
    assert rep.closed_form_e5 == pytest.approx(0.1, abs=1e-12)
    assert rep.assembled_e5 == pytest.approx(0.1, abs=1e-12)


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**32 - 1), st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_grand_assembly(seed, c):
    jet = cv.random_vacuum_jet(np.random.default_rng(seed))
    rep = assemble_e5(jet, Observer.from_c(c), _GRID)
    assert rep.discrepancy < 1e-8 * max(1.0, abs(rep.closed_form_e5))


def test_term_signs_are_unique(grid, rng):
    assert resolve_term_signs(cv.random_vacuum_jet(rng), grid) == [TERM_SIGNS]


def test_physical_term_two_paths(grid, rng):
    # the series evaluates the integral itself; the assembly enters it with a minus sign
    jet = cv.random_vacuum_jet(rng)
    for c in ([0, 0, 0], [0.5, -1.0, 2.0]):
        ctx = vacuum_context(jet, Observer.from_c(c), grid)
        assert physical_term_from_series(ctx) == pytest.approx(-vacuum_physical_term(ctx), rel=1e-10, abs=1e-12)


def test_reference_lhs_check(grid, rng):
    jet = cv.random_vacuum_jet(rng)
    static = reference_lhs_check(vacuum_context(jet, Observer.static(), grid))
    assert static["residual"] < 1e-10 * max(1.0, abs(static["rhs"]))
    moving = reference_lhs_check(vacuum_context(jet, Observer.from_c([0.5, 1.0, -1.0]), grid))
    assert moving["standin_variation"] < 1e-9
    assert np.isfinite(moving["residual"])


def test_report_breakdown(grid, rng):
    rep = assemble_e5(cv.random_vacuum_jet(rng), Observer.from_c([0.2, 0.0, 0.1]), grid).as_dict()
    assert rep["term_signs"] == list(TERM_SIGNS)
    assert "reference_lhs_check" in rep["breakdown"]
    assert isinstance(rep["breakdown"]["int_pp"], list)


def test_matter_jet_refused(grid, rng):
    with pytest.raises(ModeMismatch):
        assemble_e5(cv.random_matter_jet(rng), Observer.static(), grid)


def test_kappa_normalization(grid):
    with pytest.raises(MalformedInput):
        assemble_e5(cv.pure_electric_jet(kappa=2.0), Observer.static(2.0), grid)


def test_dust_limit(grid):
    rep = matter_limit(_dust(), Observer.static(), grid)
    assert rep.e3 == pytest.approx(4 * np.pi / 3, abs=1e-12)
    assert np.max(np.abs(rep.p)) < 1e-12


def test_empty_matter_limit(grid):
    rep = matter_limit(_dust(0.0), Observer.from_c([1, 1, 1]), grid)
    assert abs(rep.e3) < 1e-12


def test_matter_dual_paths(grid, rng):
    for _ in range(5):
        rep = matter_limit(cv.random_matter_jet(rng), Observer.from_c(rng.normal(size=3)), grid)
        assert rep.breakdown["e_discrepancy"] < 1e-9
        assert rep.breakdown["p_discrepancy"] < 1e-9
        assert rep.e3 == pytest.approx(rep.breakdown["e3_stress_energy_form"], abs=1e-9)


def test_vacuum_jet_refused_by_matter_limit(grid):
    with pytest.raises(ModeMismatch):
        matter_limit(cv.pure_electric_jet(), Observer.static(), grid)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_closed_form_nonnegative(seed, c):
    w = cv.random_weyl(np.random.default_rng(seed))
    assert closed_form_e5(w, Observer.from_c(c)) >= 0


def test_u_vector_examples():
    u, timelike = u_vector(np.zeros((4,) * 4))
    assert np.all(u == 0) and not timelike
    u, timelike = u_vector(cv.pure_electric_jet().weyl)
    assert u == pytest.approx([6, 0, 0, 0], abs=1e-12) and timelike


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_u_vector_non_spacelike(seed):
    u, _ = u_vector(cv.random_weyl(np.random.default_rng(seed)))
    assert u[0] >= np.linalg.norm(u[1:]) - 1e-12


def test_matter_minimizer_matches_limit(grid, rng):
    from qle.observer import minimize_matter

    jet = cv.random_matter_jet(rng)
    res = minimize_matter(jet.stress_energy_tensor())
    assert matter_limit(jet, res.observer, grid).e3 == pytest.approx(res.value, abs=1e-9)
