"""Model extensions: managerial ability, richer reporting, three-level hierarchy.

* ``apply_ability`` reparameterizes a firm for a manager who lowers his
  agents' effort costs at the expense of his own.
* profit-and-cost reporting indexes the manager's contract on the pair
  (total profit, total cost); with identical agents the optimum degenerates
  to the direct-contracting value.
* separate reporting of the manager's own output gives value sequences that
  approach (or attain) the direct-contracting benchmark.
* the three-level hierarchy nests a per-team maximization inside the
  top-level search over the top manager's rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    AdmissibilityError,
    FirmSpec,
    RateQV,
    WorkerParams,
    dc_solution,
    effective_risk,
    h_ib,
)
from .optimize import (
    InfeasibleError,
    OptProblem,
    latin_hypercube,
    maximize_1d,
    maximize_nd,
)
from .two_level import SolveResult, solve_two_level


# --------------------------------------------------------------------------
# managerial ability
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AbilityParams:
    """Manager skill: help coefficient m >= 0, self-penalty m_tilde in [0, 1)."""

    m: float
    m_tilde: float

    def __post_init__(self):
        if self.m < 0:
            raise ValueError(f"help coefficient m must be >= 0, got {self.m}")
        if not 0 <= self.m_tilde < 1:
            raise ValueError(f"self-penalty must lie in [0, 1), got {self.m_tilde}")


def apply_ability(firm: FirmSpec, ab: AbilityParams) -> FirmSpec:
    """Scale agent productivities by (1 + m/n) and the manager's by (1 - m_tilde)."""
    n = firm.n_agents
    if n == 0:
        raise ValueError("ability reparameterization needs at least one agent")
    agents = tuple(
        WorkerParams(k=a.k * (1.0 + ab.m / n), R=a.R, sigma=a.sigma)
        for a in firm.agents
    )
    manager = WorkerParams(
        k=firm.manager.k * (1.0 - ab.m_tilde), R=firm.manager.R, sigma=firm.manager.sigma
    )
    return FirmSpec(manager=manager, agents=agents, T=firm.T, x0=firm.x0)


# --------------------------------------------------------------------------
# profit-and-cost reporting
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RatePC:
    """Rates on the 2-D report (total profit, total cost): a 2-vector z and
    a symmetric 2x2 QV rate matrix gamma (g11 never enters the objective)."""

    z1: float
    z2: float
    g11: float = 0.0
    g12: float = 0.0
    g22: float = 0.0


def _pc_denominator(r: RatePC, agent: WorkerParams) -> float:
    return effective_risk(agent) * r.z2 + agent.sigma**2 * r.g22


def is_admissible_pc(r: RatePC, firm: FirmSpec) -> bool:
    """True iff every agent's inner problem is strictly concave.

    The best-response rate has denominator R_tilde*z2 + sigma^2*g22, which
    is also the curvature of the inner maximization; it must be strictly
    negative for the supremum to be attained.
    """
    return all(_pc_denominator(r, a) < -1e-12 for a in firm.agents)


def z_ipc(r: RatePC, agent: WorkerParams) -> float:
    """Manager's best-response rate for one agent under profit/cost reporting."""
    den = _pc_denominator(r, agent)
    if den >= -1e-12:
        raise AdmissibilityError(
            f"pc rates give a non-concave inner problem for this agent "
            f"(denominator {den!r} >= 0)"
        )
    return -(agent.k * r.z1 + agent.sigma**2 * r.g12) / den


def pc_objective(r: RatePC, firm: FirmSpec) -> float:
    """Per-unit-time principal value under profit-and-cost reporting."""
    mgr = firm.manager
    total = mgr.k * r.z1 - 0.5 * effective_risk(mgr) * r.z1**2
    for a in firm.agents:
        zs = z_ipc(r, a)
        total += (
            a.k * zs
            - 0.5 * effective_risk(a) * zs**2
            - 0.5 * mgr.R * a.sigma**2 * (r.z1 + r.z2 * zs) ** 2
        )
    return total


def pc_degenerate_rates(firm: FirmSpec, g22: float | None = None) -> RatePC:
    """The constructive rate family attaining the direct-contracting value
    for identical agents: z1 = k0/R_tilde0, z2 = -k0*R_tilde/(k*R_tilde0),
    g12 tied to g22, and g22 below the concavity bound."""
    if firm.n_agents == 0:
        raise ValueError("construction needs at least one agent")
    a0 = firm.agents[0]
    if any(a != a0 for a in firm.agents[1:]):
        raise ValueError("constructive rates require identical agents")
    mgr = firm.manager
    rt0, rt = effective_risk(mgr), effective_risk(a0)
    z1 = mgr.k / rt0
    z2 = -mgr.k * rt / (a0.k * rt0)
    bound = -mgr.k * rt**2 / (a0.k * a0.sigma**2 * rt0)
    if g22 is None:
        g22 = 2.0 * bound
    elif g22 >= bound:
        raise ValueError(f"g22 must lie below {bound}, got {g22}")
    g12 = mgr.k * a0.R / rt0 - (a0.k / rt) * g22
    return RatePC(z1=z1, z2=z2, g12=g12, g22=g22)


def solve_pc(firm: FirmSpec, multistarts: int = 12) -> SolveResult:
    """Numerically maximize the profit-and-cost objective over its 4 free rates.

    g11 is dropped from the decision vector (it never enters the objective).
    The optimum is typically a flat one-parameter family, so the result
    reports the value rather than a canonical argmax.
    """
    mgr = firm.manager
    if firm.n_agents == 0:
        dc = dc_solution([mgr])
        return SolveResult(
            regime="pc",
            z_b=dc.rates[0],
            gamma_b=0.0,
            agent_rates=(),
            manager_effort=dc.efforts[0],
            agent_efforts=(),
            principal_value=dc.principal_value,
            manager_contract=None,
            agent_contracts=(),
            diagnostics=None,
        )

    ks = np.array([a.k for a in firm.agents])
    rts = np.array([effective_risk(a) for a in firm.agents])
    s2 = np.array([a.sigma**2 for a in firm.agents])
    rt0 = effective_risk(mgr)
    rt_max = float(rts.max())
    s2_min = float(s2.min())
    g_scale = 4.0 * rt_max / s2_min

    def fast_objective(x: np.ndarray) -> float:
        z1, z2, g12, g22 = x
        den = rts * z2 + s2 * g22
        zs = -(ks * z1 + s2 * g12) / den
        agent_terms = ks * zs - 0.5 * rts * zs**2 - 0.5 * mgr.R * s2 * (z1 + z2 * zs) ** 2
        return mgr.k * z1 - 0.5 * rt0 * z1**2 + float(agent_terms.sum())

    def from_vec(x: np.ndarray) -> RatePC:
        return RatePC(z1=x[0], z2=x[1], g12=x[2], g22=x[3])

    def feasible(x: np.ndarray) -> bool:
        return x[0] > 0 and bool(np.all(rts * x[1] + s2 * x[3] < -1e-12))

    box = [
        (1e-8, 1.5),
        (-3.0, -0.05),
        (-g_scale, g_scale),
        (-3.0 * g_scale, -1e-6),
    ]
    starts = [s for s in latin_hypercube(box, 4 * multistarts) if feasible(s)]
    starts = starts[:multistarts] if len(starts) >= multistarts else starts
    problem = OptProblem(
        objective=fast_objective,
        box=[(1e-8, 1.5), (-6.0, -1e-3), (-8 * g_scale, 8 * g_scale), (-8 * g_scale, -1e-9)],
        feasible=feasible,
        tol_x=1e-9,
        tol_f=1e-11,
        max_evals=8000,
    )
    report = maximize_nd(problem, starts=starts)
    r = from_vec(report.argmax)
    agent_rates = tuple(z_ipc(r, a) for a in firm.agents)
    return SolveResult(
        regime="pc",
        z_b=r.z1,
        gamma_b=r.g22,
        agent_rates=agent_rates,
        manager_effort=mgr.k * r.z1,
        agent_efforts=tuple(a.k * zs for a, zs in zip(firm.agents, agent_rates)),
        principal_value=report.value,
        manager_contract=None,
        agent_contracts=(),
        diagnostics=report,
        extra={"rate_pc": r},
    )


# --------------------------------------------------------------------------
# separate reporting of the manager's own output
# --------------------------------------------------------------------------

def separate_reporting_values(
    firm: FirmSpec, variant: str, z1_seq: list[float]
) -> list[float]:
    """Principal values along a rate sequence when the manager's own output
    is reported separately.

    ``b0``: the manager's own block is held at its direct-contracting
    optimum while the agent block is evaluated at each z1; values increase
    toward the direct-contracting value as z1 decreases to zero (the limit
    is not attained).

    ``pc0``: with identical agents, the constructive rates attain the
    direct-contracting value exactly for every entry (each z1 is used as
    the magnitude of the cost-report sensitivity z2 = -z1).
    """
    if variant not in ("b0", "pc0"):
        raise ValueError(f"unknown variant {variant!r}")
    seq = [float(v) for v in z1_seq]
    if any(v <= 0 for v in seq):
        raise ValueError("rate sequence must stay strictly positive")

    mgr = firm.manager
    mgr_term = 0.5 * mgr.k**2 / effective_risk(mgr)

    if variant == "b0":
        out = []
        for z1 in seq:
            rate = RateQV(z1, 0.0)
            out.append(mgr_term + sum(h_ib(rate, a, mgr.R) for a in firm.agents))
        return out

    # pc0: constructive family from the identical-agent degeneracy
    a0 = firm.agents[0] if firm.agents else None
    if a0 is None or any(a != a0 for a in firm.agents[1:]):
        raise ValueError("pc0 variant requires identical agents")
    rt = effective_risk(a0)
    out = []
    for mag in seq:
        z2 = -mag
        g22 = -2.0 * rt / a0.sigma**2 * max(1.0, mag)
        z1 = -(a0.k / rt) * z2
        g12 = -(a0.k / rt) * (a0.R * z2 + g22)
        r = RatePC(z1=z1, z2=z2, g12=g12, g22=g22)
        zs = z_ipc(r, a0)
        per_agent = (
            a0.k * zs
            - 0.5 * rt * zs**2
            - 0.5 * mgr.R * a0.sigma**2 * (z1 + z2 * zs) ** 2
        )
        out.append(mgr_term + firm.n_agents * per_agent)
    return out


# --------------------------------------------------------------------------
# three-level hierarchy
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TeamSpec:
    manager: WorkerParams
    agents: tuple[WorkerParams, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))


@dataclass(frozen=True)
class OrgSpec:
    """Three tiers: a top manager above m team managers, each with agents."""

    top_manager: WorkerParams
    teams: tuple[TeamSpec, ...]
    T: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "teams", tuple(self.teams))
        if len(self.teams) < 1:
            raise ValueError("need at least one team")
        if self.T <= 0:
            raise ValueError(f"horizon T must be positive, got {self.T}")


@dataclass(frozen=True)
class InnerSolution:
    z_j_star: float
    gamma_j_star: float
    h0j_star: float
    vol_factor: float  # sigma_j^2 + sum_i sigma_ji^2 (1 - z_ji*)^2
    agent_rates: tuple[float, ...]


def _team_arrays(team: TeamSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ks = np.array([a.k for a in team.agents])
    rts = np.array([effective_risk(a) for a in team.agents])
    s2 = np.array([a.sigma**2 for a in team.agents])
    return ks, rts, s2


def three_level_inner(z: float, gamma: float, team: TeamSpec) -> InnerSolution:
    """Best response of one team manager inside the top manager's Hamiltonian.

    1-D search over the team sensitivity z_j, with the team QV rate
    eliminated by its first-order condition
    gamma_j = -R_j z_j^3 + (gamma/z) z_j (1 - z_j)^2.
    """
    if z <= 0:
        raise ValueError(f"top-level sensitivity must be positive, got {z}")
    mj = team.manager
    rtj = effective_risk(mj)
    ks, rts, s2 = _team_arrays(team)

    # one level up, the team manager plays the agent role: the top-level
    # rates must keep his block concave, otherwise the Hamiltonian term is
    # unbounded and (z, gamma) falls outside the admissible set
    if rtj * z - mj.sigma**2 * gamma <= 1e-12:
        raise InfeasibleError(
            f"top-level rates (z={z}, gamma={gamma}) leave the team manager's "
            f"response unbounded"
        )

    def gamma_j(zj):
        return -mj.R * zj**3 + (gamma / z) * zj * (1.0 - zj) ** 2

    def pieces(zj):
        """(objective, h0j, vol_factor, feasible mask) for array zj."""
        gj = gamma_j(zj)
        h0j = mj.k * zj - 0.5 * rtj * zj**2
        vol = np.full_like(zj, mj.sigma**2)
        ok = zj > 0
        if len(ks):
            den = rts[:, None] * zj - s2[:, None] * gj
            ok = ok & np.all(den > 1e-12, axis=0)
            den = np.where(den > 1e-12, den, 1.0)
            zji = (ks[:, None] * zj - s2[:, None] * gj) / den
            h0j = h0j + (
                ks[:, None] * zji
                - 0.5 * rts[:, None] * zji**2
                - 0.5 * mj.R * zj**2 * s2[:, None] * (1.0 - zji) ** 2
            ).sum(axis=0)
            vol = vol + (s2[:, None] * (1.0 - zji) ** 2).sum(axis=0)
        val = z * h0j + 0.5 * gamma * (1.0 - zj) ** 2 * vol
        return np.where(ok, val, -np.inf), h0j, vol, ok

    def batch(arr: np.ndarray) -> np.ndarray:
        vals = pieces(arr)[0]
        return np.where(np.isfinite(vals), vals, -1e18)

    problem = OptProblem(
        objective=lambda t: float(batch(np.asarray([t]))[0]),
        box=[(1e-8, 1.5)],
        objective_batch=batch,
    )
    try:
        report = maximize_1d(problem)
    except InfeasibleError as exc:
        raise InfeasibleError(
            f"no admissible team response at (z={z}, gamma={gamma})"
        ) from exc
    zj = float(report.argmax[0])

    gj = float(gamma_j(zj))
    _, h0j, vol, ok = pieces(np.array([zj]))
    if not ok[0]:
        raise InfeasibleError(
            f"refined team response inadmissible at (z={z}, gamma={gamma})"
        )
    rate = RateQV(zj, gj)
    if len(ks):
        den = rts * zj - s2 * gj
        agent_rates = tuple((ks * zj - s2 * gj) / den)
    else:
        agent_rates = ()
    return InnerSolution(
        z_j_star=zj,
        gamma_j_star=gj,
        h0j_star=float(h0j[0]),
        vol_factor=float(vol[0]),
        agent_rates=agent_rates,
    )


def three_level_objective(z: float, gamma: float, org: OrgSpec,
                          cache: dict | None = None) -> float:
    """Top-level principal objective; inner team problems solved per call."""
    top = org.top_manager
    total = top.k * z - 0.5 * effective_risk(top) * z**2
    for idx, team in enumerate(org.teams):
        inner = _inner_cached(z, gamma, team, idx, cache)
        total += inner.h0j_star - 0.5 * top.R * z**2 * (1.0 - inner.z_j_star) ** 2 * inner.vol_factor
    return total


def _inner_cached(z, gamma, team, idx, cache):
    if cache is None:
        return three_level_inner(z, gamma, team)
    key = (idx, float(f"{z:.12g}"), float(f"{gamma:.12g}"))
    hit = cache.get(key)
    if hit is None:
        hit = three_level_inner(z, gamma, team)
        cache[key] = hit
    return hit


def solve_three_level(org: OrgSpec) -> SolveResult:
    """Maximize over the top manager's rates (z, gamma), nesting team solves."""
    top = org.top_manager
    cache: dict = {}

    def objective(x: np.ndarray) -> float:
        return three_level_objective(float(x[0]), float(x[1]), org, cache)

    def feasible(x: np.ndarray) -> bool:
        if x[0] <= 0:
            return False
        try:
            for i, team in enumerate(org.teams):
                _inner_cached(float(x[0]), float(x[1]), team, i, cache)
        except InfeasibleError:
            return False
        return True

    g_hi = 2.0 * top.R * 1.5**3
    problem = OptProblem(
        objective=objective,
        box=[(1e-8, 1.5), (-3.0 * g_hi, 0.5 * g_hi)],
        feasible=feasible,
        tol_x=1e-11,
        tol_f=1e-12,
    )
    starts = list(latin_hypercube(problem.box, 8))
    # seed with the cubic-rule guess from the flat two-level analogue
    starts.append(np.array([0.9, -top.R * 0.9**3]))
    report = maximize_nd(problem, starts=starts)

    z, gamma = float(report.argmax[0]), float(report.argmax[1])
    inners = [three_level_inner(z, gamma, t) for t in org.teams]
    team_rows = [
        {
            "z_j": s.z_j_star,
            "gamma_j": s.gamma_j_star,
            "agent_rates": s.agent_rates,
            "h0j": s.h0j_star,
            "vol_factor": s.vol_factor,
        }
        for s in inners
    ]
    flat_agent_rates = tuple(r for s in inners for r in s.agent_rates)
    flat_agent_efforts = tuple(
        a.k * r
        for s, t in zip(inners, org.teams)
        for a, r in zip(t.agents, s.agent_rates)
    )
    return SolveResult(
        regime="three_level",
        z_b=z,
        gamma_b=gamma,
        agent_rates=flat_agent_rates,
        manager_effort=top.k * z,
        agent_efforts=flat_agent_efforts,
        principal_value=report.value,
        manager_contract=None,
        agent_contracts=(),
        diagnostics=report,
        extra={"teams": team_rows},
    )


def flatten_org(org: OrgSpec) -> FirmSpec:
    """Two-level firm with the top manager managing every team worker directly."""
    agents: list[WorkerParams] = []
    for t in org.teams:
        agents.append(t.manager)
        agents.extend(t.agents)
    return FirmSpec(manager=org.top_manager, agents=tuple(agents), T=org.T)


def collapse_org(org: OrgSpec) -> FirmSpec:
    """For teams without agents: the two-level firm whose agents are the
    team managers (the hierarchy collapses structurally)."""
    if any(t.agents for t in org.teams):
        raise ValueError("collapse requires every team to have zero agents")
    return FirmSpec(
        manager=org.top_manager,
        agents=tuple(t.manager for t in org.teams),
        T=org.T,
    )


def solve_ability(firm: FirmSpec, ab: AbilityParams, regime: str = "sophisticated") -> SolveResult:
    """Two-level solve on the ability-adjusted firm."""
    return solve_two_level(apply_ability(firm, ab), regime)
