"""Euler Monte Carlo of the output processes with pathwise contract accrual.

This is the verification layer: it simulates the controlled outputs under
given (not necessarily optimal) constant efforts and payment rates, accrues
every contract along each path, and estimates realized CARA utilities, the
principal's payoff and the net benefit's quadratic variation.

Discretization conventions (chosen so that the continuous-time identities
survive at attainable step counts; see the README for the bias analysis):

* worker outputs follow exact-in-distribution Gaussian Euler steps;
* the agent contracts accrue their quadratic-variation term at the analytic
  rate sigma^2 dt;
* the manager contract accrues its quadratic-variation term on realized
  squared increments of the net benefit, compensated by the (known,
  constant) model drift before squaring -- raw squared increments carry an
  O(drift^2 * dt) bias that dwarfs the volatility scale at the parameter
  magnitudes this model is used with.

Randomness comes from counter-based Philox streams with fixed-size path
blocks, so path i is reproducible and independent of the total path count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._kernels import accrue_block
from .model import (
    AdmissibilityError,
    FirmSpec,
    RateQV,
    agent_best_effort,
    is_admissible,
    manager_hamiltonian,
    z_ib,
)

# paths drawn per Philox substream; a deterministic function of the problem
# shape only (never of the total path count), so path i depends only on
# (seed, steps, workers, block, row).  Capped so one block of increments
# stays within ~128 MB whatever the worker count.
BLOCK_PATHS = 4096
BLOCK_BUDGET = 1 << 24  # float64 elements per block


def _block_rows(steps: int, n_workers: int) -> int:
    rows = min(BLOCK_PATHS, BLOCK_BUDGET // max(1, steps * n_workers))
    return max(64, rows - rows % 2)

# CARA exponent clamp; paths hitting it are flagged and excluded
EXP_CLAMP = 700.0


@dataclass(frozen=True)
class MCConfig:
    paths: int = 100_000
    steps: int = 2048
    seed: int = 0
    antithetic: bool = True

    def __post_init__(self):
        if self.paths < 1 or self.steps < 1:
            raise ValueError("paths and steps must be >= 1")
        if self.antithetic and self.paths % 2:
            raise ValueError("antithetic sampling needs an even path count")


@dataclass(frozen=True)
class PaymentRates:
    """Constant rates: the manager's (z, gamma) and one z per agent."""

    manager: RateQV
    agents: tuple[float, ...]


@dataclass
class PathBundle:
    """Per-path terminal quantities plus mean/SE summaries."""

    x_T: np.ndarray          # (paths, workers), manager first
    zeta_T: np.ndarray       # (paths,)
    qv: np.ndarray           # (paths,) realized QV of the net benefit
    xi_agents_T: np.ndarray  # (paths, n_agents)
    xi_b_T: np.ndarray       # (paths,)
    utilities: np.ndarray    # (paths, workers), manager first
    flagged: np.ndarray      # (paths,) bool, CARA exponent clamped
    payoff: np.ndarray       # (paths,) principal payoff zeta_T - xi_b_T
    summary: dict = field(default_factory=dict)

    @property
    def n_flagged(self) -> int:
        return int(self.flagged.sum())


def realized_qv(increments: np.ndarray) -> float:
    """Sum of squared increments along the last axis."""
    inc = np.asarray(increments, dtype=float)
    return float(np.sum(inc * inc))


def _mean_se(values: np.ndarray, antithetic: bool) -> tuple[float, float]:
    """Mean and standard error over independent sampling units.

    With antithetic sampling the independent unit is the mirrored pair, so
    consecutive values are averaged before computing the spread.
    """
    if antithetic:
        values = 0.5 * (values[0::2] + values[1::2])
    n = values.size
    m = float(values.mean())
    se = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
    return m, se


def simulate(
    firm: FirmSpec,
    rates: PaymentRates,
    efforts: str | tuple[float, Sequence[float]] = "best-response",
    cfg: MCConfig = MCConfig(),
) -> PathBundle:
    """Simulate output paths and accrue every contract.

    ``efforts`` is either ``"best-response"`` (manager k0*z, agent i
    k_i*z_i) or an explicit ``(manager_effort, per_agent_efforts)`` pair;
    efforts are constant over time.
    """
    n = firm.n_agents
    if len(rates.agents) != n:
        raise ValueError(f"expected {n} agent rates, got {len(rates.agents)}")
    mgr = firm.manager
    z, gamma = rates.manager.z, rates.manager.gamma

    null_contract = (
        z == 0.0 and gamma == 0.0 and all(r == 0.0 for r in rates.agents)
    )
    if null_contract:
        hb = 0.0
    else:
        if not is_admissible(rates.manager, firm):
            raise AdmissibilityError(
                f"manager rates (z={z}, gamma={gamma}) are outside the "
                f"admissible set of this firm"
            )
        hb = manager_hamiltonian(rates.manager, firm)

    if efforts == "best-response":
        alpha0 = agent_best_effort(z, mgr)
        a_agents = [agent_best_effort(zi, a) for zi, a in zip(rates.agents, firm.agents)]
    else:
        alpha0, agent_efforts = efforts
        a_agents = [float(v) for v in agent_efforts]
        if len(a_agents) != n:
            raise ValueError(f"expected {n} agent efforts, got {len(a_agents)}")

    T = firm.T
    dt = T / cfg.steps
    sqrt_dt = np.sqrt(dt)

    sigma = np.array([w.sigma for w in firm.workers])
    a_all = np.array([alpha0] + a_agents)
    z_agents = np.array(rates.agents)
    k_agents = np.array([a.k for a in firm.agents])
    R_agents = np.array([a.R for a in firm.agents])
    s2_agents = sigma[1:] ** 2

    # agent accrual constants (per unit time) and net-benefit drift
    h_agents = 0.5 * k_agents * z_agents**2
    xi_drift = -h_agents + z_agents * a_all[1:] + 0.5 * R_agents * z_agents**2 * s2_agents
    zeta_drift = alpha0 + float(np.sum(a_all[1:] - xi_drift))

    weights = np.concatenate(([1.0], 1.0 - z_agents)) if n else np.array([1.0])

    n_workers = n + 1
    x0 = np.asarray(firm.x0)
    zeta0 = float(x0.sum())  # agent contracts start at 0, outputs at x0
    paths = cfg.paths
    x_T = np.empty((paths, n_workers))
    zeta_inc = np.empty(paths)  # zeta_T - zeta_0, what the contract integrates
    qv = np.empty(paths)
    xi_agents_T = np.empty((paths, n))

    block = _block_rows(cfg.steps, n_workers)
    for start in range(0, paths, block):
        stop = min(start + block, paths)
        rows = stop - start
        dw = _draw_block(cfg, start // block, rows, n_workers) * sqrt_dt
        wsum, zeta_mart, block_qv = accrue_block(
            np.ascontiguousarray(dw), sigma, weights
        )
        sl = slice(start, stop)
        x_T[sl] = x0 + a_all * T + sigma * wsum.T
        if n:
            xi_agents_T[sl] = xi_drift * T + z_agents * sigma[1:] * wsum[1:].T
        zeta_inc[sl] = zeta_drift * T + zeta_mart
        qv[sl] = block_qv

    # the contract integrates increments of the report; the initial level
    # enters the principal's payoff but not the accrued compensation
    xi_b_T = -hb * T + z * zeta_inc + 0.5 * (gamma + mgr.R * z**2) * qv
    zeta_T = zeta0 + zeta_inc

    # realized CARA utilities, clamped with flagging
    utilities = np.empty((paths, n_workers))
    cost0 = 0.5 * alpha0**2 / mgr.k
    exps = -mgr.R * (xi_b_T - cost0 * T)
    flagged = np.abs(exps) > EXP_CLAMP
    utilities[:, 0] = -np.exp(np.clip(exps, -EXP_CLAMP, EXP_CLAMP))
    for i, agent in enumerate(firm.agents):
        cost_i = 0.5 * a_agents[i] ** 2 / agent.k
        e = -agent.R * (xi_agents_T[:, i] - cost_i * T)
        flagged |= np.abs(e) > EXP_CLAMP
        utilities[:, i + 1] = -np.exp(np.clip(e, -EXP_CLAMP, EXP_CLAMP))
    bad = ~np.isfinite(utilities).all(axis=1)
    flagged |= bad

    payoff = zeta_T - xi_b_T
    bundle = PathBundle(
        x_T=x_T,
        zeta_T=zeta_T,
        qv=qv,
        xi_agents_T=xi_agents_T,
        xi_b_T=xi_b_T,
        utilities=utilities,
        flagged=flagged,
        payoff=payoff,
    )
    bundle.summary = _summarize(bundle, cfg)
    return bundle


def _draw_block(cfg: MCConfig, block_index: int, rows: int, n_workers: int) -> np.ndarray:
    """Brownian standard normals for one block: shape (workers, rows, steps).

    Each (block, worker) pair owns a dedicated Philox substream.  With
    antithetic sampling, odd rows mirror the preceding even row.
    """
    out = np.empty((n_workers, rows, cfg.steps))
    for w in range(n_workers):
        bg = np.random.Philox(key=cfg.seed).jumped(block_index * n_workers + w)
        gen = np.random.Generator(bg)
        if cfg.antithetic:
            base = gen.standard_normal(((rows + 1) // 2, cfg.steps))
            out[w, 0::2, :] = base[: (rows + 1) // 2]
            out[w, 1::2, :] = -base[: rows // 2]
        else:
            out[w] = gen.standard_normal((rows, cfg.steps))
    return out


def _summarize(b: PathBundle, cfg: MCConfig) -> dict:
    keep = ~b.flagged
    anti = cfg.antithetic and bool(keep.all())
    empty = not keep.any()

    def stat(v: np.ndarray) -> dict:
        if empty:
            return {"mean": float("nan"), "se": float("nan")}
        m, se = _mean_se(v[keep] if not anti else v, anti)
        return {"mean": m, "se": se}

    util_cols = {
        "manager_utility": stat(b.utilities[:, 0]),
        "agent_utilities": [stat(b.utilities[:, i + 1])
                            for i in range(b.xi_agents_T.shape[1])],
    }
    return {
        **util_cols,
        "principal_payoff": stat(b.payoff),
        "qv": stat(b.qv),
        "zeta_T": stat(b.zeta_T),
        "n_flagged": b.n_flagged,
        "paths": cfg.paths,
    }
