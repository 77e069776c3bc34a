"""Penalty adaptive linearization for bilevel programs with bilinear lower levels."""

from .lp_core import LpProblem, LpSolution, LpStatus, NumericalFailure, solve_closest, solve_lp
from .model import BilevelInstance, InstanceError, example_instance, materialize_X, validate, vec
from .oracle import Fixed, Free, NoFeasiblePoint, OracleResult, Range, parse_grid, run_oracle
from .palm import PalmConfig, PalmResult, PalmStatus, check_bilevel_feasibility, run_palm
from .reformulation import Iterate, MasterInfeasible

__all__ = [
    "BilevelInstance", "InstanceError", "example_instance", "materialize_X", "validate", "vec",
    "LpProblem", "LpSolution", "LpStatus", "NumericalFailure", "solve_closest", "solve_lp",
    "Iterate", "MasterInfeasible",
    "PalmConfig", "PalmResult", "PalmStatus", "check_bilevel_feasibility", "run_palm",
    "Fixed", "Free", "NoFeasiblePoint", "OracleResult", "Range", "parse_grid", "run_oracle",
]
