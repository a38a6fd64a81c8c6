"""Spectral difference semi-discretization on curvilinear quadrilaterals."""

from .equations import (EquationSet, advection, apply_boundary, euler, lee,
                        numerical_flux, physical_flux_and_source, rotational_advection)
from .mesh import QuadMesh, annulus_mesh, cartesian_mesh, disk_mesh
from .operator import SDOperator, build_sd_operator
from .residual import SDField, SDResidual, integrate_field, project, semidiscrete_residual, solution_points

__all__ = [
    "EquationSet", "advection", "rotational_advection", "lee", "euler",
    "apply_boundary", "numerical_flux", "physical_flux_and_source",
    "QuadMesh", "cartesian_mesh", "annulus_mesh", "disk_mesh",
    "SDOperator", "build_sd_operator",
    "SDField", "SDResidual", "semidiscrete_residual", "project", "solution_points",
    "integrate_field",
]
