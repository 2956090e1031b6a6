"""p-torsion problems on rotationally symmetric manifolds.

Exact radial torsion functions on geodesic balls, a finite-element solver
for star-shaped domains and a classifier for boundary data ``du/dnu = f(d)``.
"""

from .fem import SolverConfig, StarDomain, build_mesh, solve_torsion
from .geometry import ball_quantities, eta, make_profile
from .overdetermined import OverdeterminedData, classify, tangency_radii
from .quadrature import QuadratureError, QuadratureSpec
from .radial import solve_radial, solve_radial_custom_eta, v_nested_form

__all__ = [
    "OverdeterminedData",
    "QuadratureError",
    "QuadratureSpec",
    "SolverConfig",
    "StarDomain",
    "ball_quantities",
    "build_mesh",
    "classify",
    "eta",
    "make_profile",
    "solve_radial",
    "solve_radial_custom_eta",
    "solve_torsion",
    "tangency_radii",
    "v_nested_form",
]
__version__ = "0.1.0"
