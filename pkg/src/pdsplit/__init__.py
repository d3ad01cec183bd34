"""Inertial primal-dual splitting solvers on a randomized inertial KM engine."""
from . import data, distnet, experiment, kernels, km, linops, minibatch, primal_dual, prox
from .errors import PowerIterationError, ScheduleError, StepSizeError, ValidationError
from .experiment import ExperimentConfig, reference_solve, run_experiment
from .graph import AgentGraph, build_graph
from .km import InertialSchedule, make_schedule, run, validate_schedule
from .primal_dual import (
    CompositeProblem, StepSizes, build_diag_preconditioner, solve_pd, validate_step_sizes,
)

__version__ = "0.1.0"
