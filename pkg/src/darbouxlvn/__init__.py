"""Darboux-dressed solutions of the nonlinear Liouville-von Neumann equation.

Modules
-------
matrix_core  Hermitian/general eigen-decompositions, commutators, partial traces
darboux      projectors, the binary Darboux step and its identities
seed         spectral seeds and the shift condition ``[U(0)^2 - a U(0), H] = 0``
evolution    closed-form dressed solutions and their variants
oracle       right-hand sides, RK4 and residual reports
scenarios    builtin scenarios, scenario files and the run pipeline
cli          command line interface
"""

from .darboux import Projector, build_projector_general, build_projector_rank1, transform_potential
from .evolution import (
    EvolutionContext,
    TimeSeries,
    Variant,
    add_iteration,
    build_context,
    evaluate,
    evolve_series,
    f_a,
    u1_of_t,
    u_int,
)
from .oracle import RhsKind, residual_of_closed_form, rhs, rk4_integrate, subsystem_monitor
from .scenarios import ScenarioSpec, builtin_scenarios, get_builtin, load_scenario, run
from .seed import SeedSelection, make_seed

__version__ = "0.1.0"
