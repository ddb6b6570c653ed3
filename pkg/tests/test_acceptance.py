"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import subprocess
import sys
import time

import numpy as np
import pytest

from qle import curvature as cv
from qle.cli import oracle_rows
from qle.embedding import embed, isometric_residual, optimal_embedding_residual, solve_y03
from qle.energy import assemble_e5, closed_form_e5, matter_limit, u_vector
from qle.errors import InfimumNotAttained
from qle.expansion import gauss_curvature, norm2, physical_expansion
from qle.observer import Observer, matter_minimum_closed_form, minimize_matter, minimize_vacuum
from qle.sphere import sup_norm

OBSERVERS = [(0.0, 0.0, 0.0), (0.3, -0.2, 0.5), (3.0, 0.0, 0.0), (1.0, 2.0, -2.0), (-1.5, 0.5, 1.0)]


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def _vacuum_jets(seed, n):
    rng = np.random.default_rng(seed)
    return [cv.random_vacuum_jet(rng) for _ in range(n)]


def test_1_identity_suite(grid, verdict):
    jets = _vacuum_jets(101, 50)
    t0 = time.perf_counter()
    worst = max(r.residual for jet in jets for r in cv.identity_suite(cv.decompose(jet, grid)))
    elapsed = time.perf_counter() - t0
    verdict(1, worst < 1e-10 and elapsed < 10, f"max residual {worst:.2e}, {elapsed:.1f} s")


_ORACLE_KEYS = {"trl": range(-1, 4), "trn": range(-1, 4), "eta": range(0, 5), "div_eta": range(0, 3)}


def _in_scope(name):
    key, _, p = name.partition("[")
    return key in _ORACLE_KEYS and p and int(p.rstrip("]")) in _ORACLE_KEYS[key]


def test_2_oracle_equivalence(grid, verdict):
    jets = _vacuum_jets(202, 20)
    t0 = time.perf_counter()
    worst, count = 0.0, 0
    for jet in jets:
        rows, _ = oracle_rows(cv.decompose(jet, grid))
        for r in rows:
            if _in_scope(r["name"]):
                worst, count = max(worst, r["residual"]), count + 1
    elapsed = time.perf_counter() - t0
    verdict(2, worst < 1e-8 and count >= 20 * 14 and elapsed < 60,
            f"max relative deviation {worst:.2e} over {count} coefficients, {elapsed:.1f} s")


def test_3_embedding(grid, verdict):
    worst = {"isometric": 0.0, "optimal": 0.0, "paths": 0.0}
    for jet in _vacuum_jets(303, 20):
        f = cv.decompose(jet, grid)
        table = physical_expansion(f)
        for c in OBSERVERS:
            obs = Observer.from_c(c)
            e = embed(f, obs, "closed_form", table)
            worst["isometric"] = max(worst["isometric"], isometric_residual(f, e.yi3))
            worst["optimal"] = max(worst["optimal"], optimal_embedding_residual(e, f, obs, table))
            worst["paths"] = max(worst["paths"], sup_norm(solve_y03(f, obs, "spectral", table) - e.y03))
    verdict(3, max(worst.values()) < 1e-9, ", ".join(f"{k} {v:.2e}" for k, v in worst.items()))


def test_4_lemma_integrals(grid, verdict):
    worst = 0.0
    rot = np.einsum("npi,nai->npa", np.cross(grid.points[:, None, :], np.eye(3)[None]), grid.proj)
    for jet in _vacuum_jets(404, 10):
        f = cv.decompose(jet, grid)
        t = physical_expansion(f)
        w0sq = grid.integrate(f.rho**2)
        a_ring = abs(grid.integrate(norm2(t.a_ring3)) - 3 * w0sq)
        rhs = -0.75 * w0sq - grid.integrate(norm2(f.alpha)) / 60 + 11 / 45 * grid.integrate(norm2(f.beta))
        gb = abs(gauss_curvature(f, t)["int_k3_quarter_h3"] - rhs)
        parity = np.max(np.abs(grid.integrate(f.rho[:, None] * grid.points)))
        orth = max(np.max(np.abs(grid.integrate(np.einsum("na,npa->np", t.alpha_h[p], rot)))) for p in (2, 3))
        worst = max(worst, a_ring, gb, parity, orth)
    verdict(4, worst < 1e-9, f"max integral residual {worst:.2e}")


def test_5_grand_assembly(grid, verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for jet in _vacuum_jets(505, 20):
        f = cv.decompose(jet, grid)
        table = physical_expansion(f)
        for c in OBSERVERS:
            rep = assemble_e5(jet, Observer.from_c(c), grid, table)
            worst = max(worst, rep.discrepancy / max(1.0, abs(rep.closed_form_e5)))
    elapsed = time.perf_counter() - t0
    pe = closed_form_e5(cv.pure_electric_jet().weyl, Observer.static())
    ok = worst < 1e-8 and abs(pe - 0.1) < 1e-12 and elapsed < 120
    verdict(5, ok, f"max relative discrepancy {worst:.2e}, pure electric {pe!r}, {elapsed:.1f} s")


def test_6_matter_limit(grid, verdict):
    rng = np.random.default_rng(606)
    dual, minimum = 0.0, 0.0
    for _ in range(20):
        jet = cv.random_matter_jet(rng)
        rep = matter_limit(jet, Observer.from_c(rng.normal(size=3)), grid)
        dual = max(dual, rep.breakdown["e_discrepancy"], rep.breakdown["p_discrepancy"])
        t = jet.stress_energy_tensor()
        minimum = max(minimum, abs(minimize_matter(t).value - matter_minimum_closed_form(t)))
    dust_t = np.zeros((4, 4))
    dust_t[0, 0] = 1.0
    dust = cv.CurvatureJet(weyl=np.zeros((4,) * 4), stress_energy=dust_t, vacuum=False)
    e3 = matter_limit(dust, Observer.static(), grid).e3
    ok = dual < 1e-9 and abs(e3 - 4 * np.pi / 3) < 1e-12 and minimum < 1e-8
    verdict(6, ok, f"dual path {dual:.2e}, dust E3 - 4pi/3 {e3 - 4 * np.pi / 3:.1e}, minimum {minimum:.2e}")


def test_7_optimizer(verdict):
    rng = np.random.default_rng(707)
    worst = {"gradient": 0.0, "multistart": 0.0, "grid": 0.0}
    min_eig, n = np.inf, 0
    while n < 20:
        w = cv.random_weyl(rng)
        if not u_vector(w)[1]:
            continue
        n += 1
        cert = minimize_vacuum(w, rng=np.random.default_rng(n)).certificate
        worst["gradient"] = max(worst["gradient"], cert.gradient_norm)
        worst["multistart"] = max(worst["multistart"], cert.multistart_spread)
        worst["grid"] = max(worst["grid"], cert.grid_distance)
        min_eig = min(min_eig, cert.hessian_min_eig)
    try:
        minimize_vacuum(np.zeros((4,) * 4))
        zero_ok = False
    except InfimumNotAttained:
        zero_ok = True
    ok = (worst["gradient"] < 1e-10 and min_eig > 0 and worst["multistart"] < 1e-8
          and worst["grid"] < 1e-6 and zero_ok)
    detail = ", ".join(f"{k} {v:.2e}" for k, v in worst.items())
    verdict(7, ok, f"{detail}, min Hessian eigenvalue {min_eig:.3f}, zero Weyl obstruction {zero_ok}")


_JOBS = [
    ("validate", "sample:random-vacuum", []),
    ("identities", "sample:random-vacuum", []),
    ("expand", "sample:random-vacuum", []),
    ("oracle", "sample:random-vacuum", []),
    ("embed", "sample:random-vacuum", ["--observer", "2,1,1,1"]),
    ("energy", "sample:random-vacuum", ["--observer", "2,1,1,1"]),
    ("optimize", "sample:random-vacuum", []),
    ("energy", "sample:random-matter", ["--observer", "2,1,1,1"]),
    ("optimize", "sample:random-matter", []),
]


def _suite_reports(seed):
    out = []
    for command, source, extra in _JOBS:
        proc = subprocess.run([sys.executable, "-m", "qle.cli", command, "--input", source, "--seed", str(seed),
                               *extra], capture_output=True, check=False)
        out.append(proc.stdout)
    return out


def test_8_determinism(verdict):
    first, second = _suite_reports(8), _suite_reports(8)
    same = sum(a == b and len(a) > 0 for a, b in zip(first, second))
    verdict(8, same == len(_JOBS), f"{same}/{len(_JOBS)} reports byte-identical across two runs")
