"""Domain types and closed-form building blocks of the hierarchical contracting model.

Everything in this module is a pure function of immutable inputs: worker
parameters, firm composition, and constant payment rates.  No optimization,
no randomness.  The conventions used throughout the package:

* all values (principal value, Hamiltonian rates) are per unit time;
  horizon values are obtained by multiplying with the firm's ``T``;
* a worker's effective risk is ``R_tilde = k + R * sigma**2``;
* payment rates ``(z, gamma)`` index the manager's contract on the net
  benefit and on its quadratic variation respectively.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

# Admissibility expressions closer to zero than this are treated as boundary
# points and rejected, to keep the best-response ratios numerically stable.
ADMISSIBILITY_MARGIN = 1e-12


class AdmissibilityError(ValueError):
    """Raised when payment rates leave the admissible set of a firm."""

    def __init__(self, message: str, agent_index: int | None = None):
        super().__init__(message)
        self.agent_index = agent_index


@dataclass(frozen=True)
class WorkerParams:
    """One worker: effort productivity, CARA risk aversion, output volatility."""

    k: float
    R: float
    sigma: float

    def __post_init__(self):
        if not (self.k > 0 and self.R > 0 and self.sigma > 0):
            raise ValueError(
                f"worker parameters must be strictly positive, got "
                f"k={self.k}, R={self.R}, sigma={self.sigma}"
            )

    @property
    def effective_risk(self) -> float:
        return self.k + self.R * self.sigma**2


def effective_risk(w: WorkerParams) -> float:
    """k + R*sigma^2, the denominator of every optimal linear sensitivity."""
    return w.k + w.R * w.sigma**2


@dataclass(frozen=True)
class FirmSpec:
    """A two-level firm: one manager, n agents, and a contracting horizon.

    ``x0`` holds the initial output per worker (manager first) and is never
    None after construction; it defaults to all zeros.
    """

    manager: WorkerParams
    agents: tuple[WorkerParams, ...] = ()
    T: float = 1.0
    x0: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if self.T <= 0:
            raise ValueError(f"horizon T must be positive, got {self.T}")
        if self.x0 is None:
            object.__setattr__(self, "x0", (0.0,) * (len(self.agents) + 1))
        else:
            object.__setattr__(self, "x0", tuple(self.x0))
        if len(self.x0) != len(self.agents) + 1:
            raise ValueError(
                f"x0 must have one entry per worker "
                f"({len(self.agents) + 1}), got {len(self.x0)}"
            )

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def workers(self) -> tuple[WorkerParams, ...]:
        """Manager first, then the agents."""
        return (self.manager,) + self.agents

    def agent_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(k, R_tilde, sigma^2) vectors over agents, for vectorized formulas."""
        ks = np.array([a.k for a in self.agents])
        rts = np.array([effective_risk(a) for a in self.agents])
        s2 = np.array([a.sigma**2 for a in self.agents])
        return ks, rts, s2


def identical_firm(params: WorkerParams, total_workers: int, T: float = 1.0) -> FirmSpec:
    """Firm of ``total_workers`` identical workers: one manager + rest agents."""
    if total_workers < 1:
        raise ValueError("need at least one worker")
    return FirmSpec(manager=params, agents=(params,) * (total_workers - 1), T=T)


@dataclass(frozen=True)
class RateQV:
    """Payment rates on the net benefit (z) and its quadratic variation (gamma)."""

    z: float
    gamma: float


@dataclass(frozen=True)
class ContractQV:
    """Manager contract: xi0 + z*zeta_T + gamma_eff*<zeta>_T - hamiltonian_rate*T."""

    xi0: float
    z: float
    gamma_eff: float
    hamiltonian_rate: float


@dataclass(frozen=True)
class AgentContract:
    """Agent contract: xi0 + z*X_T + qv_coeff*<X>_T - hamiltonian_rate*T."""

    xi0: float
    z: float
    qv_coeff: float
    hamiltonian_rate: float


class DCSolution(NamedTuple):
    rates: list[float]
    efforts: list[float]
    principal_value: float


def dc_solution(workers: Sequence[WorkerParams]) -> DCSolution:
    """Direct contracting benchmark: every worker contracted by the principal.

    Per-worker rate k/R_tilde and effort k^2/R_tilde; the principal's
    per-unit-time value is half the sum of k^2/R_tilde over workers.
    """
    rates = [w.k / effective_risk(w) for w in workers]
    efforts = [w.k * r for w, r in zip(workers, rates)]
    value = 0.5 * sum(w.k**2 / effective_risk(w) for w in workers)
    return DCSolution(rates, efforts, value)


def agent_best_effort(z: float, w: WorkerParams) -> float:
    """Effort maximizing a*z - a^2/(2k): the agent best response k*z."""
    return w.k * z


def _admissibility_expr(z: float, gamma: float, agent: WorkerParams) -> float:
    return effective_risk(agent) * z - agent.sigma**2 * gamma


def is_admissible(rate: RateQV, firm: FirmSpec) -> bool:
    """True iff R_tilde*z - sigma^2*gamma > 0 strictly for every agent."""
    return all(
        _admissibility_expr(rate.z, rate.gamma, a) > ADMISSIBILITY_MARGIN
        for a in firm.agents
    )


def _require_admissible(rate: RateQV, agents: Sequence[WorkerParams]) -> None:
    for i, a in enumerate(agents):
        if _admissibility_expr(rate.z, rate.gamma, a) <= ADMISSIBILITY_MARGIN:
            raise AdmissibilityError(
                f"rates (z={rate.z}, gamma={rate.gamma}) are inadmissible for "
                f"agent {i}: R_tilde*z - sigma^2*gamma = "
                f"{_admissibility_expr(rate.z, rate.gamma, a)!r} <= 0",
                agent_index=i,
            )


def z_ib(rate: RateQV, agent: WorkerParams) -> float:
    """Manager's optimal pay-for-performance rate for one agent.

    (k*z - sigma^2*gamma) / (R_tilde*z - sigma^2*gamma); requires the
    denominator strictly positive (admissibility).
    """
    _require_admissible(rate, [agent])
    num = agent.k * rate.z - agent.sigma**2 * rate.gamma
    den = effective_risk(agent) * rate.z - agent.sigma**2 * rate.gamma
    return num / den


def h_ib(rate: RateQV, agent: WorkerParams, R0: float) -> float:
    """Per-agent contribution to the principal's objective.

    Evaluates the agent's incentive surplus at the manager's best-response
    rate, net of the risk-shifting penalty carried by a manager with risk
    aversion R0.
    """
    zs = z_ib(rate, agent)
    rt = effective_risk(agent)
    return (
        agent.k * zs
        - 0.5 * rt * zs**2
        - 0.5 * R0 * agent.sigma**2 * rate.z**2 * (1.0 - zs) ** 2
    )


def h_ib_arrays(
    z: float,
    gamma: float,
    ks: np.ndarray,
    rts: np.ndarray,
    s2: np.ndarray,
    R0: float,
) -> np.ndarray:
    """Vectorized h_ib over agent parameter arrays (no admissibility check)."""
    num = ks * z - s2 * gamma
    den = rts * z - s2 * gamma
    zs = num / den
    return ks * zs - 0.5 * rts * zs**2 - 0.5 * R0 * s2 * z**2 * (1.0 - zs) ** 2


def manager_hamiltonian(rate: RateQV, firm: FirmSpec) -> float:
    """The manager's Hamiltonian at constant rates (z, gamma).

    Own-effort supremum in closed form (k0*z^2/2), each agent's inner
    supremum at the best-response rate, plus the gamma-weighted own
    volatility term.
    """
    _require_admissible(rate, firm.agents)
    z, gamma = rate.z, rate.gamma
    mgr = firm.manager
    total = 0.5 * gamma * mgr.sigma**2 + 0.5 * mgr.k * z**2
    for a in firm.agents:
        zs = z_ib(rate, a)
        total += z * (a.k * zs - 0.5 * effective_risk(a) * zs**2)
        total += 0.5 * gamma * a.sigma**2 * (1.0 - zs) ** 2
    return total
