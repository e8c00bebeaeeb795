"""Parareal time-parallel ODE integration with numerical checks of its convergence bounds."""

__version__ = "0.1.0"

from .exceptions import (  # noqa: E402
    ConfigError,
    ContractionError,
    FixedPointError,
    IntegrationError,
    NonFiniteStateError,
    PararealError,
)
from .integrators import (  # noqa: E402
    BACKWARD_EULER,
    FORWARD_EULER,
    CoarseKind,
    CoarseMethod,
    backward_euler_step,
    coarse_propagate,
    euler_step,
    fine_propagate,
    rk4_increment,
    rk4_step,
    serial_fine_solve,
)
from .ode_model import Mesh, OdeProblem, builtin_problem, grid_sup_error, sup_norm  # noqa: E402
from .parareal import (  # noqa: E402
    PararealConfig,
    PararealRun,
    defect_sweep,
    parareal_init,
    parareal_iterate,
    parareal_run,
)
