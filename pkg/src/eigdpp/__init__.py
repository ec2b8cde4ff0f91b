"""Eigenvalue-weighted dynamic programming principles, tug-of-war games and coupling checks."""
from ._backend import BACKEND, available as available_backends
from .coupling import (
    BarrierParams,
    CheckReport,
    CoupledState,
    DominativeBarrierParams,
    check_dominative_inequality,
    check_extremal_inequality,
    check_general_inequality,
    choose_constants,
    select_rule,
)
from .dpp_operator import (
    DominativeConfig,
    DppConfig,
    GridOperator,
    apply_dpp,
    apply_dpp_dominative,
    apply_dpp_extremal,
    apply_dpp_split,
)
from .eig_core import AlphaWeights, Spectrum, SymMatrix, eigenvalues_symmetric, lambda_j_minmax, weighted_eig_sum
from .errors import (
    DegenerateInput,
    DegenerateState,
    Diverged,
    EigDppError,
    InvalidInput,
    NonTerminating,
    OutOfDomain,
    PreconditionViolated,
)
from .frames import FrameFamily
from .game import Strategy, TrajectoryRecord, estimate_value, play_extremal, play_general
from .grid import BoundaryPayoff, GridFunction, Lattice
from .holder import HolderReport, holder_ratio, modulus_profile
from .solver import SolveReport, solve

__version__ = "0.1.0"
