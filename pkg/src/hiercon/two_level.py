"""End-to-end solver for the two-level principal-manager-agents chain.

Three regimes:

* ``sophisticated`` -- the manager's contract is indexed on the net benefit
  and on its quadratic variation; the QV rate is eliminated analytically
  through its first-order condition gamma = -R0*z**3, leaving a 1-D search.
* ``linear`` -- the QV indexation is forced off (gamma = -R0*z**2), which is
  the optimal purely linear contract.
* ``direct`` -- no manager: the principal contracts every worker directly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import (
    AgentContract,
    ContractQV,
    FirmSpec,
    RateQV,
    dc_solution,
    effective_risk,
    h_ib_arrays,
    manager_hamiltonian,
    z_ib,
)
from .optimize import OptProblem, OptReport, maximize_1d, maximize_nd

REGIMES = ("sophisticated", "linear", "direct")

# search interval for the manager sensitivity; widened once on a boundary hit
Z_BOX = (1e-8, 1.5)
Z_BOX_WIDE = (1e-8, 3.0)


@dataclass(frozen=True)
class SolveResult:
    regime: str
    z_b: float
    gamma_b: float
    agent_rates: tuple[float, ...]
    manager_effort: float
    agent_efforts: tuple[float, ...]
    principal_value: float  # per unit time
    manager_contract: ContractQV | None
    agent_contracts: tuple[AgentContract, ...]
    diagnostics: OptReport | None
    extra: dict | None = None  # nested results for the model extensions

    @property
    def value_per_worker(self) -> float:
        n_workers = len(self.agent_rates) + 1
        return self.principal_value / n_workers


def _gamma_of(z, rule, R0: float):
    """QV rate implied by a gamma rule; ``rule`` is 'cubic', 'square' or a number."""
    if rule == "cubic":
        return -R0 * z**3
    if rule == "square":
        return -R0 * z**2
    return float(rule) * np.ones_like(z) if isinstance(z, np.ndarray) else float(rule)


def principal_objective(z: float, firm: FirmSpec, gamma_rule="cubic") -> float:
    """Per-unit-time principal value at manager sensitivity z under a gamma rule."""
    if z <= 0:
        raise ValueError(f"manager sensitivity must be positive, got {z}")
    mgr = firm.manager
    gamma = _gamma_of(z, gamma_rule, mgr.R)
    ks, rts, s2 = firm.agent_arrays()
    if len(ks) and np.any(rts * z - s2 * gamma <= 1e-12):
        bad = int(np.argmin(rts * z - s2 * gamma))
        # reuse the checked scalar path for a precise error
        z_ib(RateQV(z, gamma), firm.agents[bad])
    total = mgr.k * z - 0.5 * effective_risk(mgr) * z**2
    if len(ks):
        total += float(h_ib_arrays(z, gamma, ks, rts, s2, mgr.R).sum())
    return total


def _objective_batch(zs: np.ndarray, firm: FirmSpec, gamma_rule) -> np.ndarray:
    mgr = firm.manager
    gamma = _gamma_of(zs, gamma_rule, mgr.R)
    ks, rts, s2 = firm.agent_arrays()
    total = mgr.k * zs - 0.5 * effective_risk(mgr) * zs**2
    if len(ks):
        num = ks[:, None] * zs - s2[:, None] * gamma
        den = rts[:, None] * zs - s2[:, None] * gamma
        zstar = num / den
        h = (
            ks[:, None] * zstar
            - 0.5 * rts[:, None] * zstar**2
            - 0.5 * mgr.R * s2[:, None] * zs**2 * (1.0 - zstar) ** 2
        )
        total = total + h.sum(axis=0)
    return total


def _feasible_z(z: float, firm: FirmSpec, gamma_rule) -> bool:
    if z <= 0:
        return False
    gamma = _gamma_of(z, gamma_rule, firm.manager.R)
    ks, rts, s2 = firm.agent_arrays()
    return bool(np.all(rts * z - s2 * gamma > 1e-12)) if len(ks) else True


def _zeta_drift_and_vol(z_b: float, gamma_b: float, firm: FirmSpec) -> tuple[float, float]:
    """Net-benefit drift and squared volatility under everyone's best response."""
    mgr = firm.manager
    drift = mgr.k * z_b
    vol2 = mgr.sigma**2
    for a in firm.agents:
        zs = z_ib(RateQV(z_b, gamma_b), a)
        drift += a.k * zs - 0.5 * effective_risk(a) * zs**2
        vol2 += a.sigma**2 * (1.0 - zs) ** 2
    return drift, vol2


def _value_from_accounting(z_b: float, gamma_b: float, firm: FirmSpec) -> float:
    """Principal value re-derived from the payment-flow identity.

    Value = H^b + (1-z)*drift(zeta) - (gamma + R0 z^2)/2 * vol^2(zeta);
    this is what the Monte Carlo layer realizes in expectation and is an
    independent alternative to summing the per-agent closed forms.
    """
    rate = RateQV(z_b, gamma_b)
    hb = manager_hamiltonian(rate, firm)
    drift, vol2 = _zeta_drift_and_vol(z_b, gamma_b, firm)
    return hb + (1.0 - z_b) * drift - 0.5 * (gamma_b + firm.manager.R * z_b**2) * vol2


def solve_two_level(firm: FirmSpec, regime: str = "sophisticated") -> SolveResult:
    """Solve the Stackelberg chain in one regime and assemble the contracts."""
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}, expected one of {REGIMES}")

    if regime == "direct":
        dc = dc_solution(firm.workers)
        return SolveResult(
            regime=regime,
            z_b=dc.rates[0],
            gamma_b=0.0,
            agent_rates=tuple(dc.rates[1:]),
            manager_effort=dc.efforts[0],
            agent_efforts=tuple(dc.efforts[1:]),
            principal_value=dc.principal_value,
            manager_contract=None,
            agent_contracts=(),
            diagnostics=None,
        )

    rule = "cubic" if regime == "sophisticated" else "square"
    report = _solve_rate(firm, rule, Z_BOX)
    if report.boundary:
        report = _solve_rate(firm, rule, Z_BOX_WIDE)

    z_b = float(report.argmax[0])
    gamma_b = float(_gamma_of(z_b, rule, firm.manager.R))
    rate = RateQV(z_b, gamma_b)
    agent_rates = tuple(z_ib(rate, a) for a in firm.agents)
    value = report.value

    cross = _value_from_accounting(z_b, gamma_b, firm)
    if abs(cross - value) > 1e-9 * max(1.0, abs(value)):
        raise RuntimeError(
            f"internal inconsistency: closed-form value {value!r} vs "
            f"accounting identity {cross!r}"
        )

    result = SolveResult(
        regime=regime,
        z_b=z_b,
        gamma_b=gamma_b,
        agent_rates=agent_rates,
        manager_effort=firm.manager.k * z_b,
        agent_efforts=tuple(a.k * r for a, r in zip(firm.agents, agent_rates)),
        principal_value=value,
        manager_contract=None,
        agent_contracts=(),
        diagnostics=report,
    )
    contracts = build_contracts(result, firm)
    return replace(
        result,
        manager_contract=contracts["manager"],
        agent_contracts=tuple(contracts["agents"]),
    )


def solve_two_level_free_gamma(firm: FirmSpec) -> OptReport:
    """Unconstrained 2-D search over (z, gamma), as a cross-check.

    The production path eliminates gamma analytically; this maximizes the
    same objective without the substitution and must agree in value.
    """
    mgr = firm.manager

    def feasible(x) -> bool:
        z, gamma = x
        if z <= 0:
            return False
        ks, rts, s2 = firm.agent_arrays()
        return bool(np.all(rts * z - s2 * gamma > 1e-12)) if len(ks) else True

    g_hi = 2.0 * mgr.R * Z_BOX[1] ** 3
    problem = OptProblem(
        objective=lambda x: principal_objective(x[0], firm, x[1]),
        box=[Z_BOX, (-3.0 * g_hi, 0.5 * g_hi)],
        feasible=feasible,
        tol_x=1e-12,
        tol_f=1e-13,
    )
    return maximize_nd(problem)


def _solve_rate(firm: FirmSpec, rule: str, box: tuple[float, float]) -> OptReport:
    problem = OptProblem(
        objective=lambda z: principal_objective(z, firm, rule),
        box=[box],
        feasible=lambda z: _feasible_z(z, firm, rule),
        objective_batch=lambda zs: _objective_batch(zs, firm, rule),
    )
    return maximize_1d(problem)


def build_contracts(res: SolveResult, firm: FirmSpec) -> dict:
    """Explicit contract coefficients for the manager and each agent.

    The manager's QV coefficient is (gamma + R0 z^2)/2, which under the
    cubic rule reduces to R0 z^2 (1-z)/2.  Fixed transfers are zero because
    reservation utilities are the no-contract utility -1.
    """
    if res.regime == "direct":
        raise ValueError("direct contracting has no manager contract")
    mgr = firm.manager
    rate = RateQV(res.z_b, res.gamma_b)
    manager = ContractQV(
        xi0=0.0,
        z=res.z_b,
        gamma_eff=0.5 * (res.gamma_b + mgr.R * res.z_b**2),
        hamiltonian_rate=manager_hamiltonian(rate, firm),
    )
    agents = [
        AgentContract(
            xi0=0.0,
            z=zs,
            qv_coeff=0.5 * a.R * zs**2,
            hamiltonian_rate=0.5 * a.k * zs**2,
        )
        for a, zs in zip(firm.agents, res.agent_rates)
    ]
    return {"manager": manager, "agents": agents}
