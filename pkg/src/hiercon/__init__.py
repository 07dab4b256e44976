"""Hierarchical pay-for-performance contracting: solvers and Monte Carlo checks.

The package solves the continuous-time principal -> manager -> agents
contracting chain with constant-rate contracts indexed on the reported net
benefit and, in the sophisticated regime, on its quadratic variation.  It
also covers managerial-ability reparameterizations, richer reporting
schemes, a three-level hierarchy, and an Euler Monte Carlo layer that
verifies the closed-form values pathwise.
"""

__version__ = "0.1.0"

from .model import (
    AdmissibilityError,
    AgentContract,
    ContractQV,
    DCSolution,
    FirmSpec,
    RateQV,
    WorkerParams,
    agent_best_effort,
    dc_solution,
    effective_risk,
    h_ib,
    identical_firm,
    is_admissible,
    manager_hamiltonian,
    z_ib,
)
from .optimize import (
    InfeasibleError,
    OptProblem,
    OptReport,
    foc_residual,
    maximize_1d,
    maximize_nd,
)
from .two_level import (
    SolveResult,
    build_contracts,
    principal_objective,
    solve_two_level,
    solve_two_level_free_gamma,
)
from .extensions import (
    AbilityParams,
    InnerSolution,
    OrgSpec,
    RatePC,
    TeamSpec,
    apply_ability,
    collapse_org,
    flatten_org,
    is_admissible_pc,
    pc_degenerate_rates,
    pc_objective,
    separate_reporting_values,
    solve_ability,
    solve_pc,
    solve_three_level,
    three_level_inner,
    three_level_objective,
    z_ipc,
)
from .mc import MCConfig, PathBundle, PaymentRates, realized_qv, simulate

__all__ = [
    "__version__",
    "AdmissibilityError",
    "AgentContract",
    "ContractQV",
    "DCSolution",
    "FirmSpec",
    "RateQV",
    "WorkerParams",
    "agent_best_effort",
    "dc_solution",
    "effective_risk",
    "h_ib",
    "identical_firm",
    "is_admissible",
    "manager_hamiltonian",
    "z_ib",
    "InfeasibleError",
    "OptProblem",
    "OptReport",
    "foc_residual",
    "maximize_1d",
    "maximize_nd",
    "SolveResult",
    "build_contracts",
    "principal_objective",
    "solve_two_level",
    "solve_two_level_free_gamma",
    "AbilityParams",
    "InnerSolution",
    "OrgSpec",
    "RatePC",
    "TeamSpec",
    "apply_ability",
    "collapse_org",
    "flatten_org",
    "is_admissible_pc",
    "pc_degenerate_rates",
    "pc_objective",
    "separate_reporting_values",
    "solve_ability",
    "solve_pc",
    "solve_three_level",
    "three_level_inner",
    "three_level_objective",
    "z_ipc",
    "MCConfig",
    "PathBundle",
    "PaymentRates",
    "realized_qv",
    "simulate",
]
