"""Command-line front end: ``qle validate|identities|expand|oracle|embed|energy|optimize``.

Exit codes: 0 pass, 1 numerical failure, 2 malformed input, 3 structural
obstruction (kernel content, non-timelike data).
"""

from __future__ import annotations

import json
import math
import os
import sys
from dataclasses import dataclass

import click
import numpy as np

from . import curvature as cv
from .embedding import embed, isometric_residual, optimal_embedding_residual, solve_y03
from .energy import assemble_e5, matter_limit, u_vector
from .errors import (InfimumNotAttained, KernelObstruction, MalformedInput, MissingJetOrder,
                     ModeMismatch, NotTimelike, QLEError)
from .expansion import gauss_curvature, norm2, physical_expansion
from .observer import KillingField, Observer, minimize_matter, minimize_vacuum
from .sphere import SphereGrid, sup_norm
from .transport import DEFAULT_ORDER, run_transport

SCHEMA_VERSION = "1.0"
DEFAULT_LMAX = 15

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_OBSTRUCTION = 0, 1, 2, 3


@dataclass
class JobConfig:
    command: str
    input: str
    l_max: int = DEFAULT_LMAX
    order: int = DEFAULT_ORDER
    tol: float = 1e-8
    seed: int = 0
    fmt: str = "json"
    out: str | None = None
    observer: str | None = None
    optimize: bool = False

    def check(self):
        if self.l_max < 8:
            raise MalformedInput("l_max must be at least 8")
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise MalformedInput("tolerance must be positive")
        if self.order < 1:
            raise MalformedInput("series order must be at least 1")


# -- input ---------------------------------------------------------------------------


def sample_jet(name: str, seed: int = 0) -> cv.CurvatureJet:
    """Built-in jets: zero, pure-electric, dust, random-vacuum, random-matter."""
    rng = np.random.default_rng(seed)
    if name == "zero":
        return cv.CurvatureJet(weyl=np.zeros((4,) * 4), ricci=-3.0 * cv.METRIC,
                               d_weyl=np.zeros((4,) * 5), d2_weyl=np.zeros((4,) * 6))
    if name == "pure-electric":
        return cv.pure_electric_jet()
    if name == "dust":
        t = np.zeros((4, 4))
        t[0, 0] = 1.0
        return cv.CurvatureJet(weyl=np.zeros((4,) * 4), stress_energy=t, vacuum=False)
    if name == "random-vacuum":
        return cv.random_vacuum_jet(rng)
    if name == "random-matter":
        return cv.random_matter_jet(rng)
    raise MalformedInput(f"unknown sample {name!r}")


def jet_from_dict(data: dict) -> cv.CurvatureJet:
    if not isinstance(data, dict):
        raise MalformedInput("jet file must hold a JSON object")
    mode = data.get("mode", "vacuum")
    if mode not in ("vacuum", "matter"):
        raise MalformedInput(f"mode must be 'vacuum' or 'matter', got {mode!r}")
    kappa = data.get("kappa", 1.0)
    if not isinstance(kappa, (int, float)):
        raise MalformedInput("kappa must be a number")

    def arr(key):
        val = data.get(key)
        if val is None:
            return None
        try:
            return np.array(val, dtype=float)
        except (TypeError, ValueError) as exc:
            raise MalformedInput(f"{key} is not a numeric array") from exc

    weyl = arr("weyl")
    if weyl is None:
        e, b = arr("electric"), arr("magnetic")
        if e is None:
            raise MalformedInput("need 'weyl' or 'electric' (with optional 'magnetic')")
        if e.shape != (3, 3) or (b is not None and b.shape != (3, 3)):
            raise MalformedInput("electric and magnetic parts must be 3x3")
        weyl = cv.from_electric_magnetic(e, b)
    ricci = arr("ricci")
    if ricci is None and mode == "vacuum":
        ricci = -3.0 * float(kappa) ** 2 * cv.METRIC
    return cv.CurvatureJet(weyl=weyl, kappa=float(kappa), ricci=ricci,
                           stress_energy=arr("stress_energy"), d_weyl=arr("d_weyl"),
                           d2_weyl=arr("d2_weyl"), vacuum=(mode == "vacuum"))


def load_jet(source: str, seed: int = 0) -> cv.CurvatureJet:
    """``sample:NAME`` selects a built-in jet; anything else is a JSON file path."""
    if source.startswith("sample:"):
        return sample_jet(source.split(":", 1)[1], seed)
    try:
        with open(source, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise MalformedInput(f"cannot read {source}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"{source} is not valid JSON: {exc}") from exc
    return jet_from_dict(data)


def jet_to_dict(jet: cv.CurvatureJet) -> dict:
    out = {"kappa": jet.kappa, "mode": "vacuum" if jet.vacuum else "matter", "weyl": jet.weyl.tolist()}
    for key in ("ricci", "stress_energy", "d_weyl", "d2_weyl"):
        val = getattr(jet, key)
        if val is not None:
            out[key] = np.asarray(val).tolist()
    return out


def parse_observer(text: str | None, kappa: float = 1.0) -> Observer:
    if text is None:
        return Observer.static(kappa)
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise MalformedInput(f"observer must be A,Cx,Cy,Cz: {text!r}") from exc
    if len(vals) != 4:
        raise MalformedInput(f"observer must be A,Cx,Cy,Cz: {text!r}")
    return Observer(KillingField(vals[0], c=tuple(vals[1:]), kappa=kappa), tol=1e-9)


# -- reports -------------------------------------------------------------------------


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def row(name, anchor, residual, tol, **extra):
    residual = float(residual)
    out = {"name": name, "anchor": anchor, "residual": residual, "tol": tol,
           "passed": bool(residual <= tol)}
    out.update(extra)
    return out


def render(report: dict, fmt: str) -> str:
    report = _clean(report)
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True)
    lines = [f"{report['command']}  schema {report['schema_version']}  passed={report['passed']}"]
    for r in report.get("rows", []):
        mark = "PASS" if r.get("passed") else "FAIL"
        res = r.get("residual")
        res = "-" if res is None else f"{res:.3e}"
        lines.append(f"  [{mark}] {r['name']:<28} {res:>11}  {r['anchor']}")
    for k in sorted(report):
        if k not in ("rows", "command", "schema_version", "passed"):
            lines.append(f"  {k}: {json.dumps(report[k], sort_keys=True)}")
    return "\n".join(lines)


# -- commands ------------------------------------------------------------------------


_CONSTRAINT_ANCHORS = {
    "weyl": "Weyl tensor algebraic symmetries",
    "ricci": "Ricci tensor symmetry",
    "vacuum": "vacuum: Ric = -3 kappa^2 g",
    "einstein": "Einstein equation with cosmological constant",
    "d": "vacuum Bianchi equations for the Weyl derivatives",
}


def cmd_validate(cfg: JobConfig, jet, grid):
    rep = cv.validate(jet, strict=False)
    rows = [row(c.name, _CONSTRAINT_ANCHORS.get(c.name.split("-")[0], c.name), c.residual, c.tolerance)
            for c in rep.checks]
    return {"rows": rows}, EXIT_OK if rep.passed else EXIT_FAIL


def cmd_identities(cfg: JobConfig, jet, grid):
    rows = [r.as_dict() for r in cv.identity_suite(cv.decompose(jet, grid))]
    ok = all(r["passed"] for r in rows)
    return {"rows": rows}, EXIT_OK if ok else EXIT_FAIL


_ANCHORS = {
    "trl": "data Lemma: (sigma^ab l_ab)^({p})",
    "trn": "data Lemma: (sigma^ab n_ab)^({p})",
    "eta": "normal connection expansion: eta^({p})",
    "div_eta": "divergence of the normal connection: (div eta)^({p})",
    "h": "mean curvature: h^({p})",
}


def _table_rows(table):
    rows = []
    for key, anchor in _ANCHORS.items():
        for p, c in sorted(getattr(table, key).items()):
            val = np.asarray(c)
            rows.append({"name": f"{key}[{p}]", "anchor": anchor.format(p=p),
                         "sup": sup_norm(val), "passed": True, "residual": None})
    return rows


def cmd_expand(cfg: JobConfig, jet, grid):
    f = cv.decompose(jet, grid)
    table = physical_expansion(f)
    rows = _table_rows(table)
    out = {"rows": rows, "mode": table.mode, "sigma4_sup": sup_norm(table.sigma4)}
    if table.mode == "vacuum":
        gc = gauss_curvature(f, table)
        out["int_k3"] = gc["int_k3"]
        out["int_k3_quarter_h3"] = gc["int_k3_quarter_h3"]
        out["int_a_ring3_sq"] = float(grid.integrate(norm2(table.a_ring3)))
        out["int_w0_sq"] = float(grid.integrate(f.rho**2))
    return out, EXIT_OK


def oracle_rows(f, order=DEFAULT_ORDER, tol=1e-8):
    """Coefficient-by-coefficient comparison of closed forms with the transport recursion."""
    closed = physical_expansion(f)
    mech = run_transport(f, order)
    rows = []

    def cmp(name, anchor, a, b):
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        dev = sup_norm(a - b) / max(1.0, sup_norm(a))
        rows.append(row(name, anchor, dev, tol, closed_sup=sup_norm(a), oracle_sup=sup_norm(b)))

    for key, anchor in _ANCHORS.items():
        for p, c in sorted(getattr(closed, key).items()):
            if p <= order and p in getattr(mech, key):
                cmp(f"{key}[{p}]", anchor.format(p=p), c, getattr(mech, key)[p])
    cmp("sigma4", "metric expansion: sigma^(4)", closed.sigma4, mech.sigma4)
    for p in sorted(closed.alpha_h):
        if p in mech.alpha_h:
            cmp(f"alpha_h[{p}]", f"connection one-form: alpha_H^({p})", closed.alpha_h[p], mech.alpha_h[p])
    notes = []
    if closed.mode == "matter":
        cmp("div_alpha_h[0]", "non-vacuum data: (div alpha_H)^(0)", closed.div_alpha_h0, mech.div_alpha_h0)
        notes.append({"name": "h_squared[0]", "anchor": "non-vacuum data: |H|^2 at O(1)",
                      "stated_minus_oracle": sup_norm(closed.h_squared0 - mech.h_squared0)})
    elif 3 in mech.trn:
        notes.append({"name": "trn[3] with 3/8 on D^2 rho", "anchor": "data Lemma: (sigma^ab n_ab)^(3)",
                      "stated_minus_oracle": sup_norm(closed.trn3_alt - mech.trn[3])})
    return rows, notes


def cmd_oracle(cfg: JobConfig, jet, grid):
    rows, notes = oracle_rows(cv.decompose(jet, grid), cfg.order, cfg.tol)
    ok = all(r["passed"] for r in rows)
    return {"rows": rows, "notes": notes}, EXIT_OK if ok else EXIT_FAIL


def cmd_embed(cfg: JobConfig, jet, grid):
    f = cv.decompose(jet, grid)
    obs = parse_observer(cfg.observer, jet.kappa)
    rows = []
    if jet.vacuum:
        table = physical_expansion(f)
        emb = embed(f, obs, "closed_form", table)
        spectral = solve_y03(f, obs, "spectral", table)
        rows.append(row("isometric", "linearized isometric embedding", isometric_residual(f, emb.yi3), 1e-9))
        rows.append(row("optimal", "leading optimal embedding equation",
                        optimal_embedding_residual(emb, f, obs, table), 1e-9))
        rows.append(row("y03 paths", "Y_0^(3): closed form vs spectral inversion", sup_norm(spectral - emb.y03), 1e-9))
        extra = {"kernel_policy": emb.kernel_policy}
    else:
        from .embedding import solve_yi3

        yi3 = solve_yi3(f, "matter")
        rows.append(row("isometric", "linearized isometric embedding", isometric_residual(f, yi3, "matter"), 1e-9))
        extra = {}
    ok = all(r["passed"] for r in rows)
    return {"rows": rows, "observer": _observer_dict(obs), **extra}, EXIT_OK if ok else EXIT_FAIL


def _observer_dict(obs):
    return {"A": obs.a, "B": list(obs.b), "C": list(obs.c), "D": list(obs.d)}


def cmd_energy(cfg: JobConfig, jet, grid):
    if cfg.optimize:
        res = _minimize(jet, cfg)
        obs = res.observer
    else:
        obs = parse_observer(cfg.observer, jet.kappa)
    if jet.vacuum:
        rep = assemble_e5(jet, obs, grid)
        rel = rep.discrepancy / max(1.0, abs(rep.closed_form_e5))
        rows = [row("E5 assembly", "vacuum limit: assembled vs Bel-Robinson closed form", rel, cfg.tol,
                    assembled=rep.assembled_e5, closed_form=rep.closed_form_e5)]
    else:
        rep = matter_limit(jet, obs, grid)
        b = rep.breakdown
        rows = [
            row("e dual path", "matter limit: e from sphere integrals vs T00", b["e_discrepancy"], 1e-9),
            row("p dual path", "matter limit: p^i from sphere integrals vs T0i", b["p_discrepancy"], 1e-9),
        ]
    ok = all(r["passed"] for r in rows)
    return {"rows": rows, "observer": _observer_dict(obs), "energy": rep.as_dict()}, EXIT_OK if ok else EXIT_FAIL


def _minimize(jet, cfg):
    if jet.vacuum:
        return minimize_vacuum(jet.weyl, rng=np.random.default_rng(cfg.seed))
    return minimize_matter(jet.stress_energy_tensor())


def cmd_optimize(cfg: JobConfig, jet, grid):
    res = _minimize(jet, cfg)
    out = {"observer": _observer_dict(res.observer), "minimum": res.value, "c": list(res.c)}
    rows = []
    if res.certificate is not None:
        c = res.certificate
        rows = [
            row("gradient", "minimizer: gradient norm", c.gradient_norm, 1e-10),
            row("hessian", "minimizer: Hessian positive definite", 0.0 if c.hessian_min_eig > 0 else 1.0, 0.5,
                min_eigenvalue=c.hessian_min_eig),
            row("multistart", "minimizer: multi-start spread", c.multistart_spread, 1e-8),
            row("grid oracle", "minimizer: brute-force grid distance", c.grid_distance, 1e-6),
        ]
        out["u_vector"] = list(u_vector(jet.weyl)[0])
        out["value_at_static"] = c.value_at_static
    ok = all(r["passed"] for r in rows)
    return {"rows": rows, **out}, EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "validate": cmd_validate,
    "identities": cmd_identities,
    "expand": cmd_expand,
    "oracle": cmd_oracle,
    "embed": cmd_embed,
    "energy": cmd_energy,
    "optimize": cmd_optimize,
}


def run(cfg: JobConfig):
    """Execute one job; returns ``(report, exit_code)``."""
    base = {"schema_version": SCHEMA_VERSION, "command": cfg.command, "input": cfg.input,
            "l_max": cfg.l_max, "seed": cfg.seed}
    try:
        cfg.check()
        jet = load_jet(cfg.input, cfg.seed)
        if cfg.command != "validate":
            rep = cv.validate(jet, strict=False)
            if not rep.passed:
                bad = rep.failures()[0]
                base.update({"passed": False, "error": "ConstraintViolation",
                             "message": f"{bad.name}: residual {bad.residual:.3e}"})
                return base, EXIT_FAIL
        grid = SphereGrid(cfg.l_max)
        body, code = COMMANDS[cfg.command](cfg, jet, grid)
    except (MalformedInput, MissingJetOrder, ModeMismatch) as exc:
        base.update({"passed": False, "error": type(exc).__name__, "message": str(exc)})
        return base, EXIT_INPUT
    except (KernelObstruction, NotTimelike, InfimumNotAttained) as exc:
        base.update({"passed": False, "error": type(exc).__name__, "message": str(exc)})
        payload = getattr(exc, "u_vector", None)
        if payload is not None:
            base["u_vector"] = list(np.asarray(payload))
        if getattr(exc, "residual", None) is not None:
            base["residual"] = exc.residual
        return base, EXIT_OBSTRUCTION
    except QLEError as exc:
        base.update({"passed": False, "error": type(exc).__name__, "message": str(exc)})
        return base, EXIT_FAIL
    base.update(body)
    base["passed"] = code == EXIT_OK
    return base, code


def _default_lmax():
    env = os.environ.get("QLE_LMAX")
    return int(env) if env else DEFAULT_LMAX


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.argument("command", type=click.Choice(sorted(COMMANDS)))
@click.option("--input", "input_", required=True, help="Jet JSON file or sample:NAME.")
@click.option("--lmax", type=int, default=None, help="Band limit (default QLE_LMAX or 15).")
@click.option("--order", type=int, default=DEFAULT_ORDER, show_default=True, help="Series truncation order.")
@click.option("--tol", type=float, default=1e-8, show_default=True)
@click.option("--observer", default=None, help="A,Cx,Cy,Cz")
@click.option("--optimize", is_flag=True, help="Use the minimizing observer.")
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="json", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write the report here.")
def main(command, input_, lmax, order, tol, observer, optimize, fmt, seed, out):
    """Small-sphere quasi-local energy checks on a curvature jet."""
    try:
        l_max = _default_lmax() if lmax is None else lmax
    except ValueError:
        click.echo("QLE_LMAX must be an integer", err=True)
        sys.exit(EXIT_INPUT)
    cfg = JobConfig(command, input_, l_max, order, tol, seed, fmt, out, observer, optimize)
    report, code = run(cfg)
    text = render(report, fmt)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)
    sys.exit(code)


if __name__ == "__main__":
    main()
