"""Command-line front end: config ingestion, sweeps, machine-readable output.

Scenarios: two_level | dc | ability | pc | separate_reporting | three_level
| simulate, plus ``compare`` for per-row deltas between two runs.  Configs
are TOML files; command-line flags override file values.  Output is CSV
(12 significant digits) or JSON (full precision, ``meta`` + ``rows``).

Exit codes: 0 success, 2 malformed config, 3 infeasible instance,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .extensions import (
    AbilityParams,
    OrgSpec,
    TeamSpec,
    apply_ability,
    separate_reporting_values,
    solve_pc,
    solve_three_level,
)
from .model import (
    AdmissibilityError,
    FirmSpec,
    RateQV,
    WorkerParams,
    dc_solution,
    identical_firm,
    z_ib,
)
from .mc import MCConfig, PaymentRates, simulate
from .optimize import InfeasibleError
from .two_level import principal_objective, solve_two_level

SCENARIOS = (
    "two_level",
    "dc",
    "ability",
    "pc",
    "separate_reporting",
    "three_level",
    "simulate",
)

SWEEP_VARIABLES = ("workers_total", "m", "m_tilde", "z1", "teams")

SOLVER_COLUMNS = (
    "sweep_value",
    "regime",
    "z_b",
    "gamma_b",
    "mean_agent_rate",
    "manager_effort",
    "principal_value_per_worker",
    "gain_vs_linear",
    "gain_vs_direct",
)

SIM_COLUMNS = (
    "sweep_value",
    "z_b",
    "gamma_b",
    "mean_agent_rate",
    "principal_payoff_mean",
    "principal_payoff_se",
    "manager_utility_mean",
    "manager_utility_se",
    "agent_utility_mean",
    "agent_utility_se",
    "qv_mean",
    "qv_se",
    "n_flagged",
)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: str
    params: tuple[float, float, float] = (1000.0, 50.0, 1.0)
    workers_total: int = 2
    T: float = 1.0
    regime: str = "sophisticated"
    manager: tuple[float, float, float] | None = None
    agents: list[tuple[float, float, float]] | None = None
    m: float = 0.6
    m_tilde: float = 0.1
    variant: str = "b0"
    z1_seq: list[float] = field(default_factory=lambda: [1.0, 0.1, 0.01, 0.001])
    teams: int = 2
    agents_per_team: int = 2
    sweep: dict | None = None
    mc: dict = field(default_factory=dict)
    rates: dict | None = None
    out: str | None = None
    format: str = "csv"

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.workers_total < 1:
            raise ConfigError("workers_total must be >= 1")
        if self.sweep is not None:
            s = self.sweep
            missing = {"variable", "from", "to", "count"} - set(s)
            if missing:
                raise ConfigError(f"sweep is missing keys {sorted(missing)}")
            if s["variable"] not in SWEEP_VARIABLES:
                raise ConfigError(
                    f"unknown sweep variable {s['variable']!r}; "
                    f"expected one of {SWEEP_VARIABLES}"
                )
            if int(s["count"]) < 1 or not float(s["from"]) <= float(s["to"]):
                raise ConfigError("sweep bounds invalid")

    def firm(self, total: int | None = None) -> FirmSpec:
        if self.manager is not None or self.agents is not None:
            if self.manager is None or self.agents is None:
                raise ConfigError("explicit firms need both manager and agents")
            return FirmSpec(
                manager=WorkerParams(*self.manager),
                agents=tuple(WorkerParams(*a) for a in self.agents),
                T=self.T,
            )
        return identical_firm(WorkerParams(*self.params), total or self.workers_total, self.T)

    def org(self, teams: int | None = None) -> OrgSpec:
        w = WorkerParams(*self.params)
        team = TeamSpec(manager=w, agents=(w,) * self.agents_per_team)
        return OrgSpec(top_manager=w, teams=(team,) * (teams or self.teams), T=self.T)

    def mc_config(self) -> MCConfig:
        return MCConfig(
            paths=int(self.mc.get("paths", 100_000)),
            steps=int(self.mc.get("steps", 2048)),
            seed=int(self.mc.get("seed", 0)),
            antithetic=bool(self.mc.get("antithetic", True)),
        )


def load_config(path: str | None, overrides: dict) -> RunConfig:
    raw: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file does not parse: {exc}") from exc

    cfg = RunConfig(scenario=overrides.get("scenario") or raw.get("scenario", ""))
    workers = raw.get("workers", {})
    if "params" in workers:
        cfg.params = tuple(float(v) for v in workers["params"])
    if "total" in workers:
        cfg.workers_total = int(workers["total"])
    if "T" in workers:
        cfg.T = float(workers["T"])
    if "manager" in workers:
        cfg.manager = tuple(float(v) for v in workers["manager"])
    if "agents" in workers:
        cfg.agents = [tuple(float(v) for v in a) for a in workers["agents"]]
    cfg.regime = raw.get("regime", cfg.regime)
    ability = raw.get("ability", {})
    cfg.m = float(ability.get("m", cfg.m))
    cfg.m_tilde = float(ability.get("m_tilde", cfg.m_tilde))
    sep = raw.get("separate_reporting", {})
    cfg.variant = sep.get("variant", cfg.variant)
    if "z1_seq" in sep:
        cfg.z1_seq = [float(v) for v in sep["z1_seq"]]
    three = raw.get("three_level", {})
    cfg.teams = int(three.get("teams", cfg.teams))
    cfg.agents_per_team = int(three.get("agents_per_team", cfg.agents_per_team))
    cfg.sweep = raw.get("sweep")
    cfg.mc = dict(raw.get("mc", {}))
    cfg.rates = raw.get("rates")
    output = raw.get("output", {})
    cfg.out = output.get("path")
    cfg.format = output.get("format", cfg.format)

    for key, value in overrides.items():
        if value is None or key == "scenario":
            continue
        if key in ("paths", "steps", "seed"):
            cfg.mc[key] = value
        elif key == "sweep":
            cfg.sweep = value
        else:
            setattr(cfg, key, value)
    cfg.validate()
    return cfg


def _sweep_values(cfg: RunConfig) -> tuple[str, list[float]]:
    if cfg.sweep is None:
        defaults = {
            "two_level": ("workers_total", [float(cfg.workers_total)]),
            "dc": ("workers_total", [float(cfg.workers_total)]),
            "ability": ("workers_total", [float(cfg.workers_total)]),
            "pc": ("workers_total", [float(cfg.workers_total)]),
            "separate_reporting": ("z1", list(cfg.z1_seq)),
            "three_level": ("teams", [float(cfg.teams)]),
            "simulate": ("workers_total", [float(cfg.workers_total)]),
        }
        return defaults[cfg.scenario]
    s = cfg.sweep
    count = int(s["count"])
    lo, hi = float(s["from"]), float(s["to"])
    if count == 1:
        values = [lo]
    else:
        step = (hi - lo) / (count - 1)
        values = [lo + i * step for i in range(count)]
    return str(s["variable"]), values


def _gain(value: float, baseline: float) -> float:
    if baseline == 0:
        return math.nan
    return (value - baseline) / abs(baseline)


def _solver_row(cfg: RunConfig, variable: str, value: float) -> dict:
    total = cfg.workers_total
    if variable == "workers_total":
        total = int(round(value))

    if cfg.scenario == "two_level":
        firm = cfg.firm(total)
        if cfg.rates is not None:
            return _evaluated_row(cfg, firm, value)
        res = solve_two_level(firm, cfg.regime)
        v_lin = res.principal_value if cfg.regime == "linear" else \
            solve_two_level(firm, "linear").principal_value
        v_dc = dc_solution(firm.workers).principal_value
        return _row_from_result(value, res, len(firm.workers), v_lin, v_dc)

    if cfg.scenario == "dc":
        firm = cfg.firm(total)
        res = solve_two_level(firm, "direct")
        v_lin = solve_two_level(firm, "linear").principal_value if firm.n_agents else math.nan
        return _row_from_result(value, res, len(firm.workers), v_lin, res.principal_value)

    if cfg.scenario == "ability":
        m, m_tilde = cfg.m, cfg.m_tilde
        if variable == "m":
            m = value
        elif variable == "m_tilde":
            m_tilde = value
        firm = cfg.firm(total)
        adjusted = apply_ability(firm, AbilityParams(m, m_tilde))
        res = solve_two_level(adjusted, "sophisticated")
        v_lin = solve_two_level(adjusted, "linear").principal_value
        v_dc = dc_solution(firm.workers).principal_value  # unadjusted benchmark
        return _row_from_result(value, res, len(firm.workers), v_lin, v_dc)

    if cfg.scenario == "pc":
        firm = cfg.firm(total)
        res = solve_pc(firm)
        v_lin = solve_two_level(firm, "linear").principal_value if firm.n_agents else math.nan
        v_dc = dc_solution(firm.workers).principal_value
        return _row_from_result(value, res, len(firm.workers), v_lin, v_dc)

    if cfg.scenario == "separate_reporting":
        firm = cfg.firm(total)
        z1 = value if variable == "z1" else cfg.z1_seq[0]
        v = separate_reporting_values(firm, cfg.variant, [z1])[0]
        v_dc = dc_solution(firm.workers).principal_value
        n_workers = len(firm.workers)
        return {
            "sweep_value": value,
            "regime": f"separate_{cfg.variant}",
            "z_b": z1,
            "gamma_b": 0.0,
            "mean_agent_rate": math.nan,
            "manager_effort": firm.manager.k * firm.manager.k / (firm.manager.k + firm.manager.R * firm.manager.sigma**2),
            "principal_value_per_worker": v / n_workers,
            "gain_vs_linear": math.nan,
            "gain_vs_direct": _gain(v, v_dc),
        }

    if cfg.scenario == "three_level":
        teams = int(round(value)) if variable == "teams" else cfg.teams
        org = cfg.org(teams)
        res = solve_three_level(org)
        n_workers = 1 + sum(1 + len(t.agents) for t in org.teams)
        flat_workers = [org.top_manager] + [
            w for t in org.teams for w in (t.manager, *t.agents)
        ]
        v_dc = dc_solution(flat_workers).principal_value
        return _row_from_result(value, res, n_workers, math.nan, v_dc)

    raise ConfigError(f"scenario {cfg.scenario!r} has no solver rows")


def _row_from_result(sweep_value, res, n_workers, v_lin, v_dc) -> dict:
    rates = res.agent_rates
    return {
        "sweep_value": sweep_value,
        "regime": res.regime,
        "z_b": res.z_b,
        "gamma_b": res.gamma_b,
        "mean_agent_rate": (sum(rates) / len(rates)) if rates else math.nan,
        "manager_effort": res.manager_effort,
        "principal_value_per_worker": res.principal_value / n_workers,
        "gain_vs_linear": _gain(res.principal_value, v_lin) if isinstance(v_lin, float) and not math.isnan(v_lin) else math.nan,
        "gain_vs_direct": _gain(res.principal_value, v_dc),
    }


def _evaluated_row(cfg: RunConfig, firm: FirmSpec, sweep_value: float) -> dict:
    """Re-evaluate at explicit rates instead of solving (JSON round trips)."""
    r = cfg.rates
    z = float(r["z"])
    gamma = float(r["gamma"])
    value = principal_objective(z, firm, gamma)
    rate = RateQV(z, gamma)
    agent_rates = [z_ib(rate, a) for a in firm.agents]
    v_lin = solve_two_level(firm, "linear").principal_value if firm.n_agents else math.nan
    v_dc = dc_solution(firm.workers).principal_value
    return {
        "sweep_value": sweep_value,
        "regime": cfg.regime,
        "z_b": z,
        "gamma_b": gamma,
        "mean_agent_rate": (sum(agent_rates) / len(agent_rates)) if agent_rates else math.nan,
        "manager_effort": firm.manager.k * z,
        "principal_value_per_worker": value / len(firm.workers),
        "gain_vs_linear": _gain(value, v_lin) if not math.isnan(v_lin) else math.nan,
        "gain_vs_direct": _gain(value, v_dc),
    }


def _simulate_row(cfg: RunConfig, variable: str, value: float) -> dict:
    total = int(round(value)) if variable == "workers_total" else cfg.workers_total
    firm = cfg.firm(total)
    if cfg.rates is not None:
        z = float(cfg.rates["z"])
        gamma = float(cfg.rates["gamma"])
        agent_rates = [float(v) for v in cfg.rates.get("agents", [])]
        if not agent_rates:
            agent_rates = [z_ib(RateQV(z, gamma), a) for a in firm.agents]
    else:
        res = solve_two_level(firm, cfg.regime)
        z, gamma = res.z_b, res.gamma_b
        agent_rates = list(res.agent_rates)
    bundle = simulate(
        firm,
        PaymentRates(manager=RateQV(z, gamma), agents=tuple(agent_rates)),
        "best-response",
        cfg.mc_config(),
    )
    s = bundle.summary
    agent_means = [a["mean"] for a in s["agent_utilities"]]
    agent_ses = [a["se"] for a in s["agent_utilities"]]
    return {
        "sweep_value": value,
        "z_b": z,
        "gamma_b": gamma,
        "mean_agent_rate": (sum(agent_rates) / len(agent_rates)) if agent_rates else math.nan,
        "principal_payoff_mean": s["principal_payoff"]["mean"],
        "principal_payoff_se": s["principal_payoff"]["se"],
        "manager_utility_mean": s["manager_utility"]["mean"],
        "manager_utility_se": s["manager_utility"]["se"],
        "agent_utility_mean": (sum(agent_means) / len(agent_means)) if agent_means else math.nan,
        "agent_utility_se": (sum(agent_ses) / len(agent_ses)) if agent_ses else math.nan,
        "qv_mean": s["qv"]["mean"],
        "qv_se": s["qv"]["se"],
        "n_flagged": s["n_flagged"],
    }


def run(cfg: RunConfig, write: bool = True) -> tuple[int, list[dict]]:
    """Execute one scenario across its sweep; returns (exit_code, rows)."""
    variable, values = _sweep_values(cfg)
    builder = _simulate_row if cfg.scenario == "simulate" else _solver_row
    threads = _thread_count()
    try:
        if threads > 1 and len(values) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                rows = list(pool.map(lambda v: builder(cfg, variable, v), values))
        else:
            rows = [builder(cfg, variable, v) for v in values]
    except (AdmissibilityError, InfeasibleError) as exc:
        print(f"hiercon: infeasible instance: {exc}", file=sys.stderr)
        return 3, []
    if not write:
        return 0, rows
    columns = SIM_COLUMNS if cfg.scenario == "simulate" else SOLVER_COLUMNS
    try:
        _write_rows(cfg, columns, rows)
    except OSError as exc:
        print(f"hiercon: cannot write output: {exc}", file=sys.stderr)
        return 4, rows
    return 0, rows


def _thread_count() -> int:
    env = os.environ.get("HIERCON_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            return 1
    return os.cpu_count() or 1


def format_number(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, int):
        return str(x)
    return f"{x:.12g}"


def _write_rows(cfg: RunConfig, columns: tuple[str, ...], rows: list[dict]) -> None:
    if cfg.format == "csv":
        lines = [",".join(columns)]
        for row in rows:
            lines.append(",".join(format_number(row[c]) for c in columns))
        text = "\n".join(lines) + "\n"
    else:
        doc = {
            "meta": {
                "version": __version__,
                "scenario": cfg.scenario,
                "config": _echo_config(cfg),
            },
            "rows": [
                {k: (None if isinstance(v, float) and math.isnan(v) else v)
                 for k, v in row.items()}
                for row in rows
            ],
        }
        text = json.dumps(doc, indent=1) + "\n"
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _echo_config(cfg: RunConfig) -> dict:
    echo = dict(cfg.__dict__)
    echo.pop("out", None)
    return echo


def compare(cfg_a: RunConfig, cfg_b: RunConfig) -> tuple[int, list[dict]]:
    """Per-row deltas between two runs sharing a sweep."""
    var_a, values_a = _sweep_values(cfg_a)
    var_b, values_b = _sweep_values(cfg_b)
    if var_a != var_b or len(values_a) != len(values_b) or any(
        abs(a - b) > 1e-12 for a, b in zip(values_a, values_b)
    ):
        print("hiercon: compare requires matching sweeps", file=sys.stderr)
        return 2, []
    code_a, rows_a = run(cfg_a, write=False)
    code_b, rows_b = run(cfg_b, write=False)
    if code_a or code_b:
        return max(code_a, code_b), []
    numeric = [
        c for c in rows_a[0]
        if c not in ("sweep_value", "regime") and isinstance(rows_a[0][c], (int, float))
    ]
    deltas = []
    for ra, rb in zip(rows_a, rows_b):
        d = {"sweep_value": ra["sweep_value"]}
        for c in numeric:
            va, vb = ra.get(c, math.nan), rb.get(c, math.nan)
            d[f"delta_{c}"] = va - vb
            d[f"relgain_{c}"] = _gain(va, vb)
        deltas.append(d)
    return 0, deltas


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hiercon",
        description="Hierarchical pay-for-performance contract solver and simulator",
    )
    p.add_argument("scenario", choices=SCENARIOS + ("compare",))
    p.add_argument("configs", nargs="*", help="two config files (compare only)")
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--sweep", help="VAR:FROM:TO:COUNT")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--seed", type=int)
    p.add_argument("--paths", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--params", help="K,R,SIGMA for identical workers")
    p.add_argument("--workers-total", dest="workers_total", type=int)
    p.add_argument("--regime", choices=("sophisticated", "linear", "direct"))
    p.add_argument("--T", dest="T", type=float)
    p.add_argument("--m", type=float)
    p.add_argument("--m-tilde", dest="m_tilde", type=float)
    p.add_argument("--variant", choices=("b0", "pc0"))
    p.add_argument("--teams", type=int)
    p.add_argument("--agents-per-team", dest="agents_per_team", type=int)
    return p


def _parse_sweep_flag(text: str) -> dict:
    parts = text.split(":")
    if len(parts) != 4:
        raise ConfigError("--sweep expects VAR:FROM:TO:COUNT")
    return {
        "variable": parts[0],
        "from": float(parts[1]),
        "to": float(parts[2]),
        "count": int(parts[3]),
    }


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = {
            "scenario": args.scenario,
            "sweep": _parse_sweep_flag(args.sweep) if args.sweep else None,
            "out": args.out,
            "format": args.format,
            "seed": args.seed,
            "paths": args.paths,
            "steps": args.steps,
            "params": tuple(float(v) for v in args.params.split(",")) if args.params else None,
            "workers_total": args.workers_total,
            "regime": args.regime,
            "T": args.T,
            "m": args.m,
            "m_tilde": args.m_tilde,
            "variant": args.variant,
            "teams": args.teams,
            "agents_per_team": args.agents_per_team,
        }
        if args.scenario == "compare":
            if len(args.configs) != 2:
                raise ConfigError("compare needs exactly two config files")
            over = {k: v for k, v in overrides.items() if k not in ("scenario",)}
            cfg_a = load_config(args.configs[0], {**over, "scenario": None})
            cfg_b = load_config(args.configs[1], {**over, "scenario": None})
            code, deltas = compare(cfg_a, cfg_b)
            if code == 0 and deltas:
                cols = tuple(deltas[0].keys())
                out_cfg = cfg_a
                out_cfg.out = args.out
                _write_rows(out_cfg, cols, deltas)
            return code
        if args.configs:
            raise ConfigError("positional config files are only for compare")
        cfg = load_config(args.config, overrides)
        code, _ = run(cfg)
        return code
    except ConfigError as exc:
        print(f"hiercon: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"hiercon: invalid configuration: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
