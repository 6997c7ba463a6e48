"""Numerical laboratory for twisted cohomological equations on
square-tiled translation surfaces."""

from .origami import (
    Origami,
    SingularityData,
    build_origami,
    l_shaped,
    parse_surface_file,
    parse_surface_text,
    singularities,
    torus,
)
from .grid import Grid, GridSpec, assemble_Q, assemble_S, assemble_T, commutator_report, neighbor
from .spectral import EigenBasis, friedrichs_norm, lowest_eigenpairs, weighted_norm, weyl_ratio

__all__ = [
    "Origami",
    "SingularityData",
    "build_origami",
    "l_shaped",
    "parse_surface_file",
    "parse_surface_text",
    "singularities",
    "torus",
    "Grid",
    "GridSpec",
    "assemble_Q",
    "assemble_S",
    "assemble_T",
    "commutator_report",
    "neighbor",
    "EigenBasis",
    "friedrichs_norm",
    "lowest_eigenpairs",
    "weighted_norm",
    "weyl_ratio",
]

__version__ = "0.1.0"
