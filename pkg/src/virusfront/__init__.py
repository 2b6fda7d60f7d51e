"""Moving-front model of viral spread in a cell population.

The package couples three layers:

* :mod:`virusfront.model`        kinetics, thresholds and closed forms;
* :mod:`virusfront.bvp`          steady-state boundary-value solvers;
* :mod:`virusfront.equilibrium`  half-line equilibria and the bound chain;
* :mod:`virusfront.fbsim`        the front-fixing time integrator;
* :mod:`virusfront.behavior`     long-run regime classification;
* :mod:`virusfront.cli`          the ``virusfront`` command-line driver.
"""

from .behavior import ClassificationResult, Criterion, classify
from .bvp import (
    BvpSpec,
    Grid,
    Profile,
    boundary_flux,
    default_initial,
    monotone_bracket,
    residual,
    solve_alternating,
    solve_newton,
    solve_robust,
)
from .equilibrium import (
    EquilibriumChain,
    HalfLineSolution,
    build_chain,
    continue_to_halfline,
    solve_full_equilibrium,
)
from .errors import (
    ConfigError,
    ConsistencyError,
    ContinuationError,
    IterationError,
    ModelConsistencyError,
    PositivityError,
    SolverError,
    StepSizeError,
    ThresholdError,
)
from .fbsim import (
    DominanceReport,
    InitialData,
    OdeTrajectory,
    SimState,
    Snapshot,
    Trajectory,
    a_priori_caps,
    comparison_for,
    dominance_check,
    initial_state,
    ode_comparison,
    run,
    step,
)
from .model import (
    ModelParams,
    StateTriple,
    basic_reproduction_number,
    domain_length_condition,
    farfield_limits,
    homogeneous_fixed_point,
    persistence_condition,
    principal_eigenvalue,
    reaction,
    ubar1_closed_form,
    udbar1_farfield,
)

__version__ = "0.1.0"
