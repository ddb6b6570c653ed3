"""Leading-order isometric and optimal embedding of the small spheres into AdS.

The embedding is ``Y_i = r X^i + r^3 Y_i^(3) + ...`` and ``Y_0 = r^3 Y_0^(3) + ...``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curvature import WeylSphereFields, derived_fields
from .errors import ModeMismatch
from .expansion import ExpansionTable, physical_expansion
from .sphere import sup_norm


@dataclass
class EmbeddingJet:
    yi3: np.ndarray            # (N, 3): Y_i^(3) for i = 1, 2, 3
    y03: np.ndarray            # (N,)
    kernel_policy: dict = field(default_factory=dict)


def solve_yi3(fields: WeylSphereFields, mode: str | None = None):
    """``-1/3 beta^c grad_c X^i + 1/2 rho X^i - 1/12 Ric(L,L) X^i`` as an (N, 3) array."""
    mode = mode or ("vacuum" if fields.vacuum else "matter")
    x = fields.grid.points
    y = -fields.beta / 3.0 + 0.5 * fields.rho[:, None] * x
    if mode == "matter":
        y = y - fields.ric_ll[:, None] * x / 12.0
    elif not fields.vacuum:
        raise ModeMismatch("vacuum embedding requested for a matter jet")
    return y


def isometric_residual(fields: WeylSphereFields, yi3, mode: str | None = None):
    """Sup norm of the linearized isometric embedding equation at order r^4.

    Left side ``dX^i (x) dY_i + dY_i (x) dX^i``, right side
    ``alpha/3 - Ric(L,L) sigma_round / 6``.
    """
    mode = mode or ("vacuum" if fields.vacuum else "matter")
    g = fields.grid
    grad = g.gradient(yi3)  # grad[n, a, i] = nabla_a Y_i
    lhs = np.einsum("nia,nbi->nab", g.proj, grad)
    lhs = g.project(lhs + np.swapaxes(lhs, 1, 2))
    rhs = fields.alpha / 3.0
    if mode == "matter":
        rhs = rhs - fields.ric_ll[:, None, None] * g.proj / 6.0
    return sup_norm(lhs - rhs)


def f1_field(fields: WeylSphereFields, observer):
    """Leading coefficient of the boost-adjusted mean-curvature difference, ``W0 / A``."""
    return fields.rho / observer.a


def optimal_embedding_rhs(fields: WeylSphereFields, observer, table: ExpansionTable | None = None):
    """Right side of ``1/2 L(L+2) Y_0^(3) = div alpha_H^(2) + div(f1 grad(C.X)) + 1/2 L(f1 C.X)``."""
    g = fields.grid
    table = table or physical_expansion(fields)
    f1 = f1_field(fields, observer)
    cx = g.points @ np.asarray(observer.c, dtype=float)
    return (
        g.divergence(table.alpha_h[2])
        + g.divergence(f1[:, None] * g.gradient(cx))
        + 0.5 * g.laplacian(f1 * cx)
    )


def solve_y03(fields: WeylSphereFields, observer, path: str = "closed_form", table=None):
    """``Y_0^(3)`` for the given observer.

    ``closed_form`` returns ``-W0/3 + C.P / A``; ``spectral`` inverts the
    leading optimal embedding operator with the minimal-norm kernel policy.
    """
    if path == "closed_form":
        if not fields.vacuum:
            raise ModeMismatch("the closed-form Y_0^(3) is a vacuum formula")
        p = derived_fields(fields).p_k
        return -fields.rho / 3.0 + p @ np.asarray(observer.c, dtype=float) / observer.a
    if path == "spectral":
        rhs = optimal_embedding_rhs(fields, observer, table)
        return fields.grid.solve_bilaplacian(rhs)
    raise ValueError(f"unknown path {path!r}")


def embed(fields: WeylSphereFields, observer, path: str = "closed_form", table=None) -> EmbeddingJet:
    yi3 = solve_yi3(fields)
    y03 = solve_y03(fields, observer, path, table)
    kp = fields.grid.kernel_part(y03)
    return EmbeddingJet(yi3, y03, {"policy": "minimal-norm", "removed_l01_norm": float(sup_norm(kp))})


def optimal_embedding_residual(jet: EmbeddingJet, fields: WeylSphereFields, observer, table=None):
    """Sup norm of ``1/2 L(L+2) Y_0^(3) - rhs``."""
    rhs = optimal_embedding_rhs(fields, observer, table)
    return sup_norm(fields.grid.apply_bilaplacian(jet.y03) - rhs)
