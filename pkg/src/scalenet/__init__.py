"""Simulation and certification of disturbance scalability for delayed networks."""

from .certify import (
    Certificate,
    JacobianOracle,
    SampleDomain,
    ViolationReport,
    bound_envelope,
    certify,
    check_condition_i,
    check_condition_ii,
    check_condition_iii,
)
from .errors import (
    DivergenceError,
    EquilibriumError,
    HistoryUnderflowError,
    InvalidInputError,
    NoContractionError,
    ScalenetError,
    ScenarioError,
)
from .halanay import Envelope, HalanayParams, envelope, solve_rate
from .measures import (
    BlockMatrix,
    block_max_norm,
    block_measure_bound,
    block_norm_bound,
    mu2,
    mu_inf,
    norm2,
    sigma_max,
    sigma_min,
)
from .netmodel import (
    AgentSpec,
    CouplingSpec,
    DelaySpec,
    NetworkSystem,
    Trace,
    integrate,
    max_deviation,
    output_deviation,
    per_agent_deviation,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
