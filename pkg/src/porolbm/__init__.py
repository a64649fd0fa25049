"""Coupled lattice Boltzmann solver for linear poroelastic consolidation.

Two lattice Boltzmann solvers share one grid: a diffusion scheme for
the pore pressure and a pseudo-time relaxation scheme for quasi-static
linear elasticity.  Each flow step nests a full elastic relaxation, and
the two fields exchange the pressure gradient (as a body force) and the
dilatation rate (as a fluid source) with a tunable implicitness weight.

The public surface is small: build a problem (`manufactured_problem`,
`terzaghi_problem`, `loading2d_problem`), make its grid, and call
`solve`.  The `porolbm` console script wraps the same path for runs
and convergence sweeps.
"""

from .boundary import (
    BoundarySpec,
    DirichletDisplacement,
    DirichletPressure,
    NoFlow,
    Periodic,
    Traction,
)
from .coupling import (
    CouplingConfig,
    DivergenceError,
    SolveResult,
    initialize,
    solve,
    time_step,
)
from .elasticity import ElasticParams
from .flow import flow_relaxation_rate
from .lattice import Grid, Q8, Q9, stream
from .problems import (
    PhysicalParams,
    ProblemDefinition,
    loading2d_problem,
    manufactured_problem,
    terzaghi_problem,
    terzaghi_pressure,
    terzaghi_subsidence,
)

__version__ = "0.1.0"

__all__ = [
    "BoundarySpec",
    "CouplingConfig",
    "DirichletDisplacement",
    "DirichletPressure",
    "DivergenceError",
    "ElasticParams",
    "Grid",
    "NoFlow",
    "Periodic",
    "PhysicalParams",
    "ProblemDefinition",
    "Q8",
    "Q9",
    "SolveResult",
    "Traction",
    "flow_relaxation_rate",
    "initialize",
    "loading2d_problem",
    "manufactured_problem",
    "solve",
    "stream",
    "terzaghi_problem",
    "terzaghi_pressure",
    "terzaghi_subsidence",
    "time_step",
    "__version__",
]
