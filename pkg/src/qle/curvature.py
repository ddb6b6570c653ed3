"""Curvature data at a point and its null decomposition over the unit sphere.

Tensors at the point live in an orthonormal frame ``e_0, e_1, e_2, e_3`` of
signature (-,+,+,+), always with lowered indices.  The curvature convention
is the one in which

    R_{abcd} = W_{abcd} + k^2 (g_{ac} g_{bd} - g_{ad} g_{bc})

in vacuum with ``Ric_{ad} = g^{bc} R_{abcd} = -3 k^2 g_{ad}``.  Note the index
order in the null components: ``alpha_ab = W(e_a, L, e_b, L)`` while the
transport equations use ``R_{LabL} = -alpha_ab``.

Sphere fields are produced in ambient Cartesian components (see ``sphere``):
a tangent slot is filled with the projected coordinate vector
``E_i = (0, P_i)`` so that e.g. ``alpha[n, i, j] = W(E_i, L, E_j, L)``.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintViolation, MalformedInput, MissingJetOrder
from .sphere import LEVI_CIVITA, SphereGrid

METRIC = np.diag([-1.0, 1.0, 1.0, 1.0])
INV_METRIC = METRIC  # self-inverse in an orthonormal frame

_SYM_PAIRS = [(m, n) for m in range(4) for n in range(m, 4)]


# -- linear-algebra generators for the constrained tensor spaces ------------------


def _null_space(matrix, rtol=1e-10):
    _, s, vt = np.linalg.svd(matrix)
    rank = int(np.sum(s > rtol * s[0])) if s.size else 0
    return vt[rank:].T


def _weyl_constraints():
    """Rows acting on a flattened rank-4 array; kernel = algebraic Weyl tensors."""
    rows = []
    idx = lambda a, b, c, d: ((a * 4 + b) * 4 + c) * 4 + d  # noqa: E731
    for a, b, c, d in itertools.product(range(4), repeat=4):
        r = np.zeros(256)
        r[idx(a, b, c, d)] += 1
        r[idx(b, a, c, d)] += 1
        rows.append(r)
        r = np.zeros(256)
        r[idx(a, b, c, d)] += 1
        r[idx(a, b, d, c)] += 1
        rows.append(r)
        r = np.zeros(256)
        r[idx(a, b, c, d)] += 1
        r[idx(c, d, a, b)] -= 1
        rows.append(r)
        r = np.zeros(256)
        r[idx(a, b, c, d)] += 1
        r[idx(a, c, d, b)] += 1
        r[idx(a, d, b, c)] += 1
        rows.append(r)
    for a, d in itertools.product(range(4), repeat=2):
        r = np.zeros(256)
        for b in range(4):
            r[idx(a, b, b, d)] += INV_METRIC[b, b]
        rows.append(r)
    return np.array(rows)


@functools.lru_cache(maxsize=None)
def weyl_basis():
    """Orthonormal basis of the 10-dimensional space of Weyl tensors, shape (4,4,4,4,10)."""
    ns = _null_space(_weyl_constraints())
    return ns.reshape(4, 4, 4, 4, -1)


def _divergence(t):
    """``g^{mu a} T_{mu a ...}`` over the first two slots."""
    return np.einsum("m,mm...->...", np.diag(INV_METRIC), t)


def _second_bianchi(t):
    """Cyclic sum ``T_{m ab cd} + T_{c ab d m} + T_{d ab m c}`` of a derivative array."""
    return t + np.einsum("mabcd->cabdm", t) + np.einsum("mabcd->dabmc", t)


@functools.lru_cache(maxsize=None)
def d_weyl_basis():
    """Basis of first-derivative arrays compatible with the vacuum Bianchi identities.

    Each ``T[mu]`` is a Weyl tensor, ``g^{mu a} T_{mu a b c d} = 0`` and the
    differential Bianchi identity holds.  Shape (4,4,4,4,4,k).
    """
    wb = weyl_basis()
    nw = wb.shape[-1]
    cols = []
    for mu in range(4):
        for k in range(nw):
            t = np.zeros((4,) * 5)
            t[mu] = wb[..., k]
            cols.append(np.concatenate([_divergence(t).ravel(), _second_bianchi(t).ravel()]))
    ns = _null_space(np.array(cols).T)
    out = np.zeros((4,) * 5 + (ns.shape[1],))
    for j in range(ns.shape[1]):
        for mu in range(4):
            out[mu, ..., j] = wb @ ns[mu * nw:(mu + 1) * nw, j]
    return out


def _d2_columns():
    wb = weyl_basis()
    nw = wb.shape[-1]
    arrays = []
    for m, n in _SYM_PAIRS:
        for k in range(nw):
            s = np.zeros((4,) * 6)
            s[m, n] = wb[..., k]
            s[n, m] = wb[..., k]
            arrays.append(s)
    return arrays


@functools.lru_cache(maxsize=None)
def _d2_system():
    arrays = _d2_columns()
    mat = np.array([_d2_divergence(s).ravel() for s in arrays]).T
    return arrays, mat


def _d2_divergence(s):
    """``g^{mu a} S_{mu nu a b c d}``: contract the first derivative slot with the first Weyl slot."""
    return np.einsum("m,mnmbcd->nbcd", np.diag(INV_METRIC), s)


def riemann_from(weyl, ricci):
    """Full curvature tensor from its Weyl part and the Ricci tensor."""
    g = METRIC
    scal = float(np.einsum("ab,ab->", INV_METRIC, ricci))
    s = -0.5 * (ricci - scal / 6.0 * g)
    return (
        weyl
        + np.einsum("ac,bd->abcd", g, s)
        + np.einsum("bd,ac->abcd", g, s)
        - np.einsum("ad,bc->abcd", g, s)
        - np.einsum("bc,ad->abcd", g, s)
    )


def commutator(riemann, tensor):
    """``[nabla_mu, nabla_nu] T_{abcd}`` for a rank-4 covariant tensor, indexed (mu, nu, a, b, c, d)."""
    # with this curvature convention, [nabla_mu, nabla_nu] w_a = R^l_{a mu nu} w_l
    rup = np.einsum("lk,kamn->lamn", INV_METRIC, riemann)
    out = np.einsum("lamn,lbcd->mnabcd", rup, tensor)
    out += np.einsum("lbmn,alcd->mnabcd", rup, tensor)
    out += np.einsum("lcmn,abld->mnabcd", rup, tensor)
    out += np.einsum("ldmn,abcl->mnabcd", rup, tensor)
    return out


def d2_divergence_target(weyl, ricci, corrected):
    """Right side ``X_{nu bcd}`` imposed on ``g^{mu a} S_{mu nu a bcd}``.

    The symmetric second derivative satisfies
    ``g^{mu a} S_{mu nu a...} = 1/2 g^{mu a} [nabla_mu, nabla_nu] W_{a...}`` when the
    divergence of W vanishes identically; the uncorrected variant sets it to zero.
    """
    if not corrected:
        return np.zeros((4, 4, 4, 4))
    comm = commutator(riemann_from(weyl, ricci), weyl)
    return 0.5 * np.einsum("m,mnmbcd->nbcd", np.diag(INV_METRIC), comm)


# -- electric / magnetic parametrization -----------------------------------------


def from_electric_magnetic(electric, magnetic=None):
    """Weyl tensor with ``W_{0i0j} = E_ij`` and ``W_{0ijk} = eps_{jkm} B_{mi}``."""
    e = np.asarray(electric, dtype=float)
    b = np.zeros((3, 3)) if magnetic is None else np.asarray(magnetic, dtype=float)
    if e.shape != (3, 3) or b.shape != (3, 3):
        raise MalformedInput("electric and magnetic parts must be 3x3")
    d = np.eye(3)
    w = np.zeros((4, 4, 4, 4))
    w[0, 1:, 0, 1:] = e
    w[1:, 0, 1:, 0] = e
    w[0, 1:, 1:, 0] = -e
    w[1:, 0, 0, 1:] = -e
    w0ijk = np.einsum("jkm,mi->ijk", LEVI_CIVITA, b)
    w[0, 1:, 1:, 1:] = w0ijk
    w[1:, 0, 1:, 1:] = -w0ijk
    w[1:, 1:, 0, 1:] = np.einsum("ijk->jki", w0ijk)
    w[1:, 1:, 1:, 0] = -np.einsum("ijk->jki", w0ijk)
    w[1:, 1:, 1:, 1:] = (
        np.einsum("ik,jl->ijkl", d, e)
        + np.einsum("jl,ik->ijkl", d, e)
        - np.einsum("il,jk->ijkl", d, e)
        - np.einsum("jk,il->ijkl", d, e)
    )
    return w


def electric_part(weyl):
    return np.array(weyl)[0, 1:, 0, 1:].copy()


def magnetic_part(weyl):
    return 0.5 * np.einsum("jkm,ijk->mi", LEVI_CIVITA, np.array(weyl)[0, 1:, 1:, 1:])


# -- the jet --------------------------------------------------------------------


@dataclass(frozen=True)
class CurvatureJet:
    """Curvature at a point, optionally with its first and second covariant derivatives."""

    weyl: np.ndarray
    kappa: float = 1.0
    ricci: np.ndarray | None = None
    stress_energy: np.ndarray | None = None
    d_weyl: np.ndarray | None = None
    d2_weyl: np.ndarray | None = None
    vacuum: bool = True

    def __post_init__(self):
        shapes = {
            "weyl": (4, 4, 4, 4),
            "ricci": (4, 4),
            "stress_energy": (4, 4),
            "d_weyl": (4,) * 5,
            "d2_weyl": (4,) * 6,
        }
        for name, shape in shapes.items():
            val = getattr(self, name)
            if val is None:
                continue
            arr = np.array(val, dtype=float)
            if arr.shape != shape:
                raise MalformedInput(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise MalformedInput(f"{name} contains non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (np.isfinite(self.kappa) and self.kappa > 0):
            raise MalformedInput("kappa must be a positive number")
        object.__setattr__(self, "kappa", float(self.kappa))
        if not self.vacuum and self.ricci is None and self.stress_energy is None:
            raise MalformedInput("a matter jet needs ricci or stress_energy")

    @property
    def cosmological_constant(self):
        return -3.0 * self.kappa**2

    def ricci_tensor(self):
        """Ricci tensor: given, reconstructed from T via the Einstein equation, or vacuum."""
        if self.ricci is not None:
            return np.array(self.ricci)
        lam = self.cosmological_constant
        if self.vacuum or self.stress_energy is None:
            return lam * METRIC
        t = np.array(self.stress_energy)
        tr = float(np.einsum("ab,ab->", INV_METRIC, t))
        scal = 4.0 * lam - 8.0 * np.pi * tr
        return 8.0 * np.pi * t + (0.5 * scal - lam) * METRIC

    def stress_energy_tensor(self):
        if self.stress_energy is not None:
            return np.array(self.stress_energy)
        ric = self.ricci_tensor()
        scal = float(np.einsum("ab,ab->", INV_METRIC, ric))
        return (ric - 0.5 * scal * METRIC + self.cosmological_constant * METRIC) / (8.0 * np.pi)

    def riemann(self):
        return riemann_from(np.array(self.weyl), self.ricci_tensor())

    @property
    def depth(self):
        """Number of derivative orders available (0, 1 or 2)."""
        if self.d_weyl is None:
            return 0
        return 2 if self.d2_weyl is not None else 1


# -- random generators for test data ---------------------------------------------


def random_weyl(rng, scale=1.0):
    wb = weyl_basis()
    return scale * (wb @ rng.standard_normal(wb.shape[-1]))


def random_d_weyl(rng, scale=1.0):
    db = d_weyl_basis()
    return scale * (db @ rng.standard_normal(db.shape[-1]))


def random_d2_weyl(rng, weyl, ricci=None, scale=1.0, corrected=False):
    """Symmetric second-derivative array obeying the (optionally corrected) divergence condition."""
    ricci = -3.0 * METRIC if ricci is None else ricci
    arrays, mat = _d2_system()
    target = d2_divergence_target(weyl, ricci, corrected).ravel()
    coef, *_ = np.linalg.lstsq(mat, target, rcond=None)
    ns = _null_space(mat)
    coef = coef + scale * (ns @ rng.standard_normal(ns.shape[1]))
    return np.tensordot(coef, np.array(arrays), axes=(0, 0))


def random_vacuum_jet(rng, kappa=1.0, scale=1.0, depth=2, corrected=False):
    weyl = random_weyl(rng, scale)
    ricci = -3.0 * kappa**2 * METRIC
    d1 = random_d_weyl(rng, scale) if depth >= 1 else None
    d2 = random_d2_weyl(rng, weyl, ricci, scale, corrected) if depth >= 2 else None
    return CurvatureJet(weyl=weyl, kappa=kappa, ricci=ricci, d_weyl=d1, d2_weyl=d2, vacuum=True)


def random_matter_jet(rng, kappa=1.0, scale=1.0):
    """Matter jet with a stress-energy tensor whose energy flux is future timelike."""
    weyl = random_weyl(rng, scale)
    a = rng.standard_normal((4, 4))
    t = 0.3 * (a + a.T)
    flux = rng.standard_normal(3)
    flux *= rng.uniform(0.0, 0.9) / max(np.linalg.norm(flux), 1e-12)
    t[0, 0] = rng.uniform(0.5, 2.0)
    t[0, 1:] = t[1:, 0] = flux * t[0, 0]
    jet = CurvatureJet(weyl=weyl, kappa=kappa, stress_energy=t, vacuum=False)
    return CurvatureJet(weyl=weyl, kappa=kappa, stress_energy=t, ricci=jet.ricci_tensor(), vacuum=False)


def pure_electric_jet(mu=1.0, kappa=1.0):
    """Vacuum jet with ``E = diag(2mu, -mu, -mu)``, no magnetic part, vanishing derivatives."""
    weyl = from_electric_magnetic(np.diag([2.0 * mu, -mu, -mu]))
    return CurvatureJet(
        weyl=weyl,
        kappa=kappa,
        ricci=-3.0 * kappa**2 * METRIC,
        d_weyl=np.zeros((4,) * 5),
        d2_weyl=np.zeros((4,) * 6),
        vacuum=True,
    )


# -- validation -----------------------------------------------------------------


@dataclass
class ConstraintCheck:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self):
        return self.residual <= self.tolerance


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def as_dict(self):
        return {
            "passed": self.passed,
            "checks": [
                {"name": c.name, "residual": c.residual, "tolerance": c.tolerance, "passed": c.passed}
                for c in self.checks
            ],
        }


def _mx(a):
    return float(np.max(np.abs(a), initial=0.0))


def weyl_symmetry_residuals(w):
    return {
        "antisymmetry": max(_mx(w + np.swapaxes(w, -4, -3)), _mx(w + np.swapaxes(w, -2, -1))),
        "pair-symmetry": _mx(w - np.moveaxis(w, (-4, -3), (-2, -1))),
        "bianchi": _mx(
            w + np.moveaxis(w, (-3, -2, -1), (-2, -1, -3)) + np.moveaxis(w, (-3, -2, -1), (-1, -3, -2))
        ),
        "traceless": _mx(np.einsum("b,...abbd->...ad", np.diag(INV_METRIC), w)),
    }


def validate(jet: CurvatureJet, strict: bool = True, tol: float = 1e-12,
             diff_tol: float = 1e-10, corrected_d2: bool = False) -> ValidationReport:
    """Check algebraic and differential constraints; raise on the first violation if ``strict``."""
    report = ValidationReport()
    w = np.array(jet.weyl)
    scale = max(1.0, _mx(w))
    for key, val in weyl_symmetry_residuals(w).items():
        report.checks.append(ConstraintCheck(f"weyl-{key}", val, tol * scale))

    ric = jet.ricci_tensor()
    if jet.ricci is not None:
        report.checks.append(ConstraintCheck("ricci-symmetry", _mx(ric - ric.T), tol * max(1.0, _mx(ric))))
    if jet.vacuum:
        report.checks.append(
            ConstraintCheck("vacuum-ricci", _mx(ric - jet.cosmological_constant * METRIC), diff_tol)
        )
        if jet.stress_energy is not None:
            report.checks.append(ConstraintCheck("vacuum-stress-energy", _mx(jet.stress_energy), diff_tol))
    else:
        t = jet.stress_energy_tensor()
        scal = float(np.einsum("ab,ab->", INV_METRIC, ric))
        resid = ric - 0.5 * scal * METRIC + jet.cosmological_constant * METRIC - 8.0 * np.pi * t
        report.checks.append(ConstraintCheck("einstein-equation", _mx(resid), diff_tol * max(1.0, _mx(ric))))

    if jet.d_weyl is not None:
        d = np.array(jet.d_weyl)
        ds = max(1.0, _mx(d))
        sym = max(weyl_symmetry_residuals(d).values())
        report.checks.append(ConstraintCheck("d-weyl-symmetries", sym, tol * ds))
        if jet.vacuum:
            report.checks.append(ConstraintCheck("d-weyl-divergence", _mx(_divergence(d)), diff_tol * ds))
            report.checks.append(ConstraintCheck("d-weyl-bianchi", _mx(_second_bianchi(d)), diff_tol * ds))
    if jet.d2_weyl is not None:
        if jet.d_weyl is None:
            raise MalformedInput("d2_weyl given without d_weyl")
        s = np.array(jet.d2_weyl)
        ss = max(1.0, _mx(s))
        report.checks.append(ConstraintCheck("d2-weyl-derivative-symmetry", _mx(s - np.swapaxes(s, 0, 1)), tol * ss))
        report.checks.append(ConstraintCheck("d2-weyl-symmetries", max(weyl_symmetry_residuals(s).values()), tol * ss))
        if jet.vacuum:
            target = d2_divergence_target(w, ric, corrected_d2)
            report.checks.append(
                ConstraintCheck("d2-weyl-divergence", _mx(_d2_divergence(s) - target), diff_tol * max(ss, scale**2))
            )

    if strict and not report.passed:
        bad = report.failures()[0]
        raise ConstraintViolation(bad.name, bad.residual, report)
    return report


# -- null frame and decomposition -----------------------------------------------


@dataclass(frozen=True)
class NullFrame:
    """Per-node null pair and projected tangent coordinate vectors, as 4-vectors."""

    outgoing: np.ndarray  # L, shape (N, 4)
    incoming: np.ndarray  # Lbar, shape (N, 4)
    tangent: np.ndarray   # E_i = (0, P_i), shape (N, 3, 4)

    @classmethod
    def on(cls, grid: SphereGrid):
        n = grid.points
        ones = np.ones((grid.size, 1))
        out = np.hstack([ones, n])
        inc = 0.5 * np.hstack([ones, -n])
        tan = np.concatenate([np.zeros((grid.size, 3, 1)), grid.proj], axis=2)
        return cls(out, inc, tan)

    def inner_products(self):
        """Max deviations of the defining inner products from (0, 0, -1, 0, 0)."""
        g = METRIC
        ll = np.einsum("na,ab,nb->n", self.outgoing, g, self.outgoing)
        bb = np.einsum("na,ab,nb->n", self.incoming, g, self.incoming)
        lb = np.einsum("na,ab,nb->n", self.outgoing, g, self.incoming)
        lt = np.einsum("na,ab,nib->ni", self.outgoing, g, self.tangent)
        bt = np.einsum("na,ab,nib->ni", self.incoming, g, self.tangent)
        return {
            "L.L": _mx(ll), "Lb.Lb": _mx(bb), "L.Lb+1": _mx(lb + 1.0),
            "L.E": _mx(lt), "Lb.E": _mx(bt),
        }


def contract(tensor, slots):
    """Fill the trailing four slots of ``tensor`` with per-node vectors.

    Each entry of ``slots`` is either an (N, 4) array or a tangent set of
    shape (N, 3, 4), which contributes a free Cartesian index.  Leading
    (derivative) slots of ``tensor`` must already be contracted away.
    """
    letters = "abcd"
    free = "ijkl"
    ins, outs, ops = [], [], []
    fi = 0
    for s, v in zip(letters, slots):
        if v.ndim == 3:
            ins.append(f"n{free[fi]}{s}")
            outs.append(free[fi])
            fi += 1
        else:
            ins.append(f"n{s}")
        ops.append(v)
    sub = "abcd," + ",".join(ins) + "->n" + "".join(outs)
    return np.einsum(sub, tensor, *ops, optimize=True)


def _directional(deriv, vec, times):
    """Contract the leading derivative slots of a per-point array with per-node vectors."""
    out = np.einsum("m...,nm->n...", deriv, vec) if times >= 1 else deriv
    if times == 2:
        out = np.einsum("nm...,nm->n...", out, vec)
    return out


def _contract_nodal(nodal, slots):
    """Same as ``contract`` for a tensor that already varies per node (leading axis n)."""
    letters = "abcd"
    free = "ijkl"
    ins, outs = [], []
    fi = 0
    for s, v in zip(letters, slots):
        if v.ndim == 3:
            ins.append(f"n{free[fi]}{s}")
            outs.append(free[fi])
            fi += 1
        else:
            ins.append(f"n{s}")
    sub = "nabcd," + ",".join(ins) + "->n" + "".join(outs)
    return np.einsum(sub, nodal, *slots, optimize=True)


@dataclass
class WeylSphereFields:
    """Null components of the curvature at the point, viewed as fields on the unit sphere."""

    grid: SphereGrid
    weyl: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    rho: np.ndarray
    sigma: np.ndarray
    beta_bar: np.ndarray
    alpha_bar: np.ndarray
    d_alpha: np.ndarray | None = None
    d_beta: np.ndarray | None = None
    d_rho: np.ndarray | None = None
    d2_alpha: np.ndarray | None = None
    d2_beta: np.ndarray | None = None
    d2_rho: np.ndarray | None = None
    # full-curvature components, needed only off vacuum
    ric_ll: np.ndarray | None = None
    ric_llb: np.ndarray | None = None
    riem_llbllb: np.ndarray | None = None
    riem_labl: np.ndarray | None = None
    riem_lalbl: np.ndarray | None = None
    riem_lablb: np.ndarray | None = None
    vacuum: bool = True
    kappa: float = 1.0

    def require(self, *names):
        for name in names:
            if getattr(self, name) is None:
                raise MissingJetOrder(f"field '{name}' needs derivative data the jet does not carry")

    @property
    def w0(self):
        return self.rho

    @property
    def electric(self):
        return electric_part(self.weyl)


def decompose(jet: CurvatureJet, grid: SphereGrid, order: int | None = None) -> WeylSphereFields:
    """Null decomposition of the jet over ``grid``; D-fields up to ``order`` (default: jet depth)."""
    order = jet.depth if order is None else order
    if order > jet.depth:
        raise MissingJetOrder(f"requested derivative order {order} but the jet carries {jet.depth}")
    fr = NullFrame.on(grid)
    L, Lb, E = fr.outgoing, fr.incoming, fr.tangent
    w = np.array(jet.weyl)
    eps = grid.eps

    def parts(t, nodal):
        c = _contract_nodal if nodal else contract
        return (
            c(t, (E, L, E, L)),
            c(t, (E, L, Lb, L)),
            c(t, (Lb, L, Lb, L)),
        )

    alpha, beta, rho = parts(w, False)
    sigma = np.einsum("nij,nij->n", eps, contract(w, (E, E, Lb, L)))
    beta_bar = contract(w, (E, Lb, Lb, L))
    alpha_bar = contract(w, (E, Lb, E, Lb))
    out = WeylSphereFields(grid, w, alpha, beta, rho, sigma, beta_bar, alpha_bar,
                           vacuum=jet.vacuum, kappa=jet.kappa)
    if order >= 1:
        d1 = _directional(np.array(jet.d_weyl), L, 1)
        out.d_alpha, out.d_beta, out.d_rho = parts(d1, True)
    if order >= 2:
        d2 = _directional(np.array(jet.d2_weyl), L, 2)
        out.d2_alpha, out.d2_beta, out.d2_rho = parts(d2, True)
    ric = jet.ricci_tensor()
    riem = jet.riemann()
    out.ric_ll = np.einsum("na,ab,nb->n", L, ric, L)
    out.ric_llb = np.einsum("na,ab,nb->n", L, ric, Lb)
    out.riem_llbllb = contract(riem, (L, Lb, L, Lb))
    out.riem_labl = contract(riem, (L, E, E, L))
    out.riem_lalbl = contract(riem, (L, E, L, Lb))
    out.riem_lablb = contract(riem, (L, E, E, Lb))
    return out


# -- derived fields ---------------------------------------------------------------


@dataclass
class DerivedFields:
    w0: np.ndarray
    w_i: np.ndarray   # (N, 3)
    p_k: np.ndarray   # (N, 3)
    r_ij: np.ndarray  # (N, 3, 3)
    s_j: np.ndarray   # (N, 3)
    residuals: dict


def derived_fields(fields: WeylSphereFields) -> DerivedFields:
    """W0, W_i, P_k, R_ij, S_j by direct contraction and via the null components.

    ``residuals`` holds the max disagreement of the two evaluation paths.
    The contraction path is returned.
    """
    g = fields.grid
    x = g.points
    w = fields.weyl
    e = w[0, 1:, 0, 1:]
    w0ijk = w[0, 1:, 1:, 1:]
    grad_x = g.proj  # grad_x[n, a, i] = nabla_a X^i in Cartesian components

    w0 = np.einsum("ni,nj,ij->n", x, x, e)
    w_i = np.einsum("nj,nk,kij->ni", x, x, w0ijk)
    p_k = np.einsum("ik,ni->nk", e, x) / 15.0 - w0[:, None] * x / 6.0
    ex = np.einsum("ik,nk->ni", e, x)
    # projected contraction for R_ij: the tangential part of -alpha/3 in Cartesian slots
    sym = np.einsum("nm,ijm->nij", x, w0ijk) + np.einsum("nm,jim->nij", x, w0ijk)
    full = 2.0 * e[None] + fields.rho[:, None, None] * np.eye(3)[None] - sym
    r_ij = -g.project(full) / 3.0
    s_j = (-4.0 * ex + 4.0 * x * w0[:, None] + 4.0 * w_i) / 3.0

    bb = fields.beta - 2.0 * fields.beta_bar
    w_i_null = 0.5 * np.einsum("na,nai->ni", bb, grad_x)
    p_k_null = -np.einsum("na,nak->nk", fields.beta + 2.0 * fields.beta_bar, grad_x) / 30.0 - fields.rho[:, None] * x / 10.0
    r_ij_null = -fields.alpha / 3.0
    s_j_null = 4.0 / 3.0 * np.einsum("na,naj->nj", fields.beta, grad_x)
    res = {
        "w0": _mx(w0 - fields.rho),
        "w_i": _mx(w_i - w_i_null),
        "p_k": _mx(p_k - p_k_null),
        "r_ij": _mx(r_ij - r_ij_null),
        "s_j": _mx(s_j - s_j_null),
    }
    return DerivedFields(w0, w_i, p_k, r_ij, s_j, res)


# -- Bel-Robinson -----------------------------------------------------------------


def bel_robinson(weyl):
    """``Q_{mn ab} = W_{r m s a} W^r_n^s_b + W_{r m s b} W^r_n^s_a - 1/2 g_{mn} W_a^{rst} W_{b rst}``."""
    w = np.asarray(weyl, dtype=float)
    wu = np.einsum("rk,sl,kmln->rmsn", INV_METRIC, INV_METRIC, w)  # raise slots 1 and 3
    term = np.einsum("rmsa,rnsb->mnab", w, wu)
    wup = np.einsum("rk,sl,tm,bklm->brst", INV_METRIC, INV_METRIC, INV_METRIC, w)
    sq = np.einsum("arst,brst->ab", w, wup)
    return term + np.swapaxes(term, 2, 3) - 0.5 * np.einsum("mn,ab->mnab", METRIC, sq)


def bel_robinson_components(weyl):
    """Closed-form ``Q(e0,e0,e0,e0)`` and ``Q(e0,e0,e0,e_i)`` from frame components."""
    w = np.asarray(weyl, dtype=float)
    e = w[0, 1:, 0, 1:]
    m = w[0, 1:, 1:, 1:]
    q0 = 0.5 * np.sum(m**2) + np.sum(e**2)
    qi = 2.0 * np.einsum("mn,min->i", e, m)
    return q0, qi


# -- identity suite -----------------------------------------------------------------


@dataclass
class IdentityRow:
    name: str
    anchor: str
    residual: float
    tol: float

    @property
    def passed(self):
        return bool(self.residual <= self.tol)

    def as_dict(self):
        return {"name": self.name, "anchor": self.anchor, "residual": self.residual,
                "tol": self.tol, "passed": self.passed}


def _sym_beta(g, v, scale=1.0):
    """``(s_ca s_bd + s_cb s_ad + e_ca e_bd + e_cb e_ad) v^d``, indexed [n, c, a, b]."""
    p, e = g.proj, g.eps
    t = (np.einsum("nca,nbd,nd->ncab", p, p, v) + np.einsum("ncb,nad,nd->ncab", p, p, v)
         + np.einsum("nca,nbd,nd->ncab", e, e, v) + np.einsum("ncb,nad,nd->ncab", e, e, v))
    return scale * t


def identity_suite(fields: WeylSphereFields, tol: float = 1e-10, d_tol: float = 1e-8):
    """Pointwise sphere identities among the null Weyl components and their D-derivatives."""
    g = fields.grid
    p, e = g.proj, g.eps
    al, ab, be, bb, rho, sig = (fields.alpha, fields.alpha_bar, fields.beta, fields.beta_bar,
                                fields.rho, fields.sigma)
    cd = g.covariant_derivative
    d_al, d_ab, d_be, d_bb = cd(al), cd(ab), cd(be), cd(bb)
    rows = []

    def add(name, anchor, diff, t=tol):
        rows.append(IdentityRow(name, anchor, _mx(diff), t))

    ss = rho[:, None, None] * p
    add("grad alpha", "Weyl derivatives: nabla_c alpha_ab", d_al - _sym_beta(g, be))
    add("grad alpha_bar", "Weyl derivatives: nabla_c alpha_bar_ab", d_ab - _sym_beta(g, bb, 0.5))
    add("grad beta", "Weyl derivatives: nabla_a beta_b",
        d_be - (-0.75 * sig[:, None, None] * e + 1.5 * ss - 0.5 * al))
    add("grad beta_bar", "Weyl derivatives: nabla_a beta_bar_b",
        d_bb - (0.375 * sig[:, None, None] * e + 0.75 * ss - ab))
    add("grad rho", "Weyl derivatives: nabla_a rho = -beta_a - 2 beta_bar_a", g.gradient(rho) + be + 2.0 * bb)
    add("grad sigma", "Weyl derivatives: nabla_a sigma = 2 eps_ab (beta - 2 beta_bar)^b",
        g.gradient(sig) - 2.0 * np.einsum("nab,nb->na", e, be - 2.0 * bb))
    add("div alpha", "Weyl contractions: div alpha = 4 beta", np.einsum("naab->nb", d_al) - 4.0 * be)
    add("curl alpha", "Weyl contractions: eps^ca nabla_c alpha_ab = 4 eps_bd beta^d",
        np.einsum("nca,ncab->nb", e, d_al) - 4.0 * np.einsum("nbd,nd->nb", e, be))
    add("div alpha_bar", "Weyl contractions: div alpha_bar = 2 beta_bar", np.einsum("naab->nb", d_ab) - 2.0 * bb)
    add("curl alpha_bar", "Weyl contractions: eps^ca nabla_c alpha_bar_ab = 2 eps_bd beta_bar^d",
        np.einsum("nca,ncab->nb", e, d_ab) - 2.0 * np.einsum("nbd,nd->nb", e, bb))
    add("div beta", "Weyl contractions: div beta = 3 rho", np.einsum("naa->n", d_be) - 3.0 * rho)
    add("curl beta", "Weyl contractions: eps^ab nabla_a beta_b = -3/2 sigma",
        np.einsum("nab,nab->n", e, d_be) + 1.5 * sig)
    add("div beta_bar", "Weyl contractions: div beta_bar = 3/2 rho", np.einsum("naa->n", d_bb) - 1.5 * rho)
    add("curl beta_bar", "Weyl contractions: eps^ab nabla_a beta_bar_b = 3/4 sigma",
        np.einsum("nab,nab->n", e, d_bb) - 0.75 * sig)
    add("laplacian rho", "Weyl contractions: Laplacian rho = -6 rho", g.laplacian(rho) + 6.0 * rho)
    add("laplacian sigma", "Weyl contractions: Laplacian sigma = -6 sigma", g.laplacian(sig) + 6.0 * sig)
    der = derived_fields(fields)
    add("laplacian W_i", "W_i are -6 eigenfunctions", g.laplacian(der.w_i) + 6.0 * der.w_i)
    add("laplacian P_k", "P_k are -12 eigenfunctions", g.laplacian(der.p_k) + 12.0 * der.p_k)
    add("W0 = rho", "W0 = X^i X^j W_0i0j = rho", der.w0 - rho)
    for key in ("w_i", "p_k", "r_ij", "s_j"):
        rows.append(IdentityRow(f"{key} two paths", f"derived field {key}: contraction vs null components",
                                der.residuals[key], tol))
    if fields.vacuum:
        rel = 0.5 * ss + 0.25 * sig[:, None, None] * e
        add("W_LabLbar", "relations: W_LabLbar = 1/2 sigma_ab rho + 1/4 eps_ab sigma",
            fields.riem_lablb - fields.kappa**2 * p - rel)
    if fields.d_beta is not None:
        add("div D beta", "D-divergence: div D beta = 4 D rho",
            g.divergence(fields.d_beta) - 4.0 * fields.d_rho, d_tol)
        add("div D alpha", "D-divergence: div D alpha = 5 D beta",
            g.divergence(fields.d_alpha) - 5.0 * fields.d_beta, d_tol)
    if fields.d2_beta is not None:
        add("div D2 beta", "D-divergence: div D^2 beta = 5 D^2 rho",
            g.divergence(fields.d2_beta) - 5.0 * fields.d2_rho, d_tol)
        add("div D2 alpha", "D-divergence: div D^2 alpha = 6 D^2 beta",
            g.divergence(fields.d2_alpha) - 6.0 * fields.d2_beta, d_tol)
    return rows
