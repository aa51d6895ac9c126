"""Numerical laboratory for threshold solutions of the focusing
intercritical nonlinear Schrodinger equation.

Modules: model (parameters/conserved quantities), grid (radial grid and
calculus), groundstate (solitary profile Q), linop (linearized spectrum),
profiles (recursive expansions and special-solution seeds), evolve (time
integration), modulation (orbit decomposition), diagnostics (virial and
classification), harness/cli (batch experiments).
"""

__version__ = "0.1.0"

from .model import derive_params, conserved, threshold_report
from .grid import RadialGrid, RadialField, make_grid
from .groundstate import solve_ground_state, verify_pohozaev, compute_cgn
from .linop import assemble, solve_eigenpair
from .profiles import build_profiles, special_seed
from .evolve import EvolutionConfig, evolve, step
from .modulation import decompose, delta
from .diagnostics import make_cutoff, virial_quantities, classify

__all__ = [
    "__version__",
    "derive_params", "conserved", "threshold_report",
    "RadialGrid", "RadialField", "make_grid",
    "solve_ground_state", "verify_pohozaev", "compute_cgn",
    "assemble", "solve_eigenpair",
    "build_profiles", "special_seed",
    "EvolutionConfig", "evolve", "step",
    "decompose", "delta",
    "make_cutoff", "virial_quantities", "classify",
]
