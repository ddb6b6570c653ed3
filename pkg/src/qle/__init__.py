"""Small-sphere limits of quasi-local energy with anti-de Sitter reference."""

from .curvature import (CurvatureJet, WeylSphereFields, bel_robinson, decompose, derived_fields,
                        identity_suite, pure_electric_jet, random_matter_jet, random_vacuum_jet, validate)
from .embedding import EmbeddingJet, embed, solve_y03, solve_yi3
from .energy import assemble_e5, closed_form_e5, matter_limit, u_vector
from .expansion import ExpansionTable, physical_expansion
from .observer import KillingField, Observer, is_observer, minimize_matter, minimize_vacuum
from .sphere import SphereGrid
from .transport import FieldSeries, run_transport

__all__ = [
    "CurvatureJet", "WeylSphereFields", "bel_robinson", "decompose", "derived_fields", "identity_suite",
    "pure_electric_jet", "random_matter_jet", "random_vacuum_jet", "validate", "EmbeddingJet", "embed",
    "solve_y03", "solve_yi3", "assemble_e5", "closed_form_e5", "matter_limit", "u_vector",
    "ExpansionTable", "physical_expansion", "KillingField", "Observer", "is_observer",
    "minimize_matter", "minimize_vacuum", "SphereGrid", "FieldSeries", "run_transport",
]
__version__ = "0.1.0"
