"""Acceptance suite: one test per criterion, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  Criterion 3 carries two sub-checks that are analytically
unattainable at the pinned parameter point (see the README's known-issues
note and the value tables printed by the test); they are asserted as
specified and reported honestly.
"""

import time

import numpy as np
import pytest

from hiercon import (
    FirmSpec,
    AbilityParams,
    MCConfig,
    OptProblem,
    OrgSpec,
    PaymentRates,
    RateQV,
    TeamSpec,
    WorkerParams,
    apply_ability,
    dc_solution,
    identical_firm,
    maximize_1d,
    maximize_nd,
    pc_degenerate_rates,
    pc_objective,
    separate_reporting_values,
    simulate,
    solve_pc,
    solve_three_level,
    solve_two_level,
    three_level_inner,
    three_level_objective,
    z_ib,
)

BENCH = WorkerParams(1000.0, 50.0, 1.0)


def report(criterion: str, ok: bool, detail: str) -> bool:
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


def test_criterion_1_dc_benchmark():
    sol = dc_solution([BENCH, BENCH])
    rate_ok = abs(sol.rates[0] - 0.9523809524) <= 1e-9 * 0.9523809524
    value_ok = abs(sol.principal_value / 2 - 476.1904762) <= 1e-9 * 476.1904762
    ok = report(
        "1 dc-benchmark",
        rate_ok and value_ok,
        f"rate={sol.rates[0]:.12f}, value/worker={sol.principal_value / 2:.10f}",
    )
    assert ok


def test_criterion_2_foc_substitution_equivalence():
    from hiercon import solve_two_level_free_gamma

    worst = 0.0
    for n in (1, 5, 29):
        firm = identical_firm(BENCH, n + 1)
        v1 = solve_two_level(firm, "sophisticated").principal_value
        rep = solve_two_level_free_gamma(firm)
        worst = max(worst, abs(rep.value - v1) / abs(v1))
    ok = report(
        "2 foc-substitution", worst <= 1e-6, f"max rel value gap 1D vs 2D = {worst:.2e}"
    )
    assert ok


def test_criterion_3_benchmark_curves():
    t0 = time.time()
    dc_rate = BENCH.k / (BENCH.k + BENCH.R * BENCH.sigma**2)
    rows = {}
    for total in range(2, 31):
        firm = identical_firm(BENCH, total)
        rows[total] = {
            "soph": solve_two_level(firm, "sophisticated"),
            "lin": solve_two_level(firm, "linear"),
            "dc": dc_solution(firm.workers),
        }
    elapsed = time.time() - t0

    agent_pps_ok = all(
        dc_rate < r["soph"].agent_rates[0] < r["lin"].agent_rates[0]
        for r in rows.values()
    )
    report(
        "3a agent-pps",
        agent_pps_ok,
        "agent rates exceed the direct rate, sophisticated closer to it",
    )

    mgr_below_dc = all(
        r["soph"].z_b < dc_rate and r["lin"].z_b < dc_rate for r in rows.values()
    )
    report("3b manager-pps-below-direct", mgr_below_dc, "manager rates below direct rate")

    mgr_order_ok = all(r["soph"].z_b > r["lin"].z_b for r in rows.values())
    soph30, lin30 = rows[30]["soph"].z_b, rows[30]["lin"].z_b
    report(
        "3c manager-pps-ordering",
        mgr_order_ok,
        f"sophisticated above linear for all sizes "
        f"(at 30 workers: {soph30:.9f} vs {lin30:.9f})",
    )

    gain30 = (soph30 - lin30) / lin30
    gain_ok = abs(gain30 - 0.60) <= 0.10
    report("3d manager-pps-gain-30", gain_ok, f"relative gain at 30 workers = {gain30:.3e}")

    value_dom = all(
        r["soph"].principal_value >= r["lin"].principal_value - 1e-9
        for r in rows.values()
    )
    report("3e value-dominance", value_dom, "sophisticated value >= linear value")

    dip_ok = (
        rows[2]["soph"].principal_value / 2 > rows[3]["soph"].principal_value / 3
    )
    report(
        "3f per-worker-dip",
        dip_ok,
        f"value/worker at 2 workers {rows[2]['soph'].principal_value / 2:.6f} "
        f"> at 3 workers {rows[3]['soph'].principal_value / 3:.6f}",
    )

    time_ok = report("3g sweep-time", elapsed < 10.0, f"sweep took {elapsed:.1f}s")

    assert agent_pps_ok and mgr_below_dc and value_dom and dip_ok and time_ok
    assert mgr_order_ok and gain_ok, (
        "manager-PPS ordering/gain anchors are unattainable at "
        "(k, R, sigma) = (1000, 50, 1); see README known issues"
    )


def test_criterion_4_pc_reporting_degeneracy():
    t0 = time.time()
    worst_c = worst_s = 0.0
    for n in (1, 3, 10):
        firm = identical_firm(BENCH, n + 1)
        vdc = dc_solution(firm.workers).principal_value
        v_constructive = pc_objective(pc_degenerate_rates(firm), firm)
        worst_c = max(worst_c, abs(v_constructive - vdc) / vdc)
        v_solve = solve_pc(firm).principal_value
        worst_s = max(worst_s, abs(v_solve - vdc) / vdc)
    elapsed = time.time() - t0
    ok = report(
        "4 pc-degeneracy",
        worst_c <= 1e-6 and worst_s <= 1e-6 and elapsed < 5.0,
        f"constructive rel gap {worst_c:.2e}, solver rel gap {worst_s:.2e}, "
        f"{elapsed:.1f}s",
    )
    assert ok


def test_criterion_5_separate_reporting_convergence():
    firm = identical_firm(BENCH, 3)
    vdc = dc_solution(firm.workers).principal_value
    seq = [1.0, 1e-1, 1e-2, 1e-3, 1e-4]
    vals = separate_reporting_values(firm, "b0", seq)
    increasing = all(b > a for a, b in zip(vals, vals[1:]))
    gap = (vdc - vals[-1]) / vdc
    ok = report(
        "5 separate-reporting",
        increasing and 0 <= gap < 1e-4,
        f"strictly increasing, terminal rel gap {gap:.2e}",
    )
    assert ok


def test_criterion_6_ability_extension():
    t0 = time.time()
    ab = AbilityParams(0.6, 0.1)
    dc_per_worker = 0.5 * BENCH.k**2 / (BENCH.k + BENCH.R * BENCH.sigma**2)
    margins = []
    for total in (5, 10, 20, 30):
        firm = identical_firm(BENCH, total)
        res = solve_two_level(apply_ability(firm, ab), "sophisticated")
        margins.append(res.principal_value / total - dc_per_worker)
    elapsed = time.time() - t0
    ok = report(
        "6 ability-extension",
        all(m > 0 for m in margins) and elapsed < 2.0,
        f"per-worker margins over direct case: "
        f"{', '.join(f'{m:.3f}' for m in margins)}; {elapsed:.1f}s",
    )
    assert ok


def test_criterion_7_three_level_consistency():
    t0 = time.time()

    # gamma = 0 decouples the inner problem into the two-level solve
    team = TeamSpec(manager=BENCH, agents=(BENCH, BENCH))
    inner = three_level_inner(0.8, 0.0, team)
    two = solve_two_level(identical_firm(BENCH, 3), "sophisticated")
    rel_z = abs(inner.z_j_star - two.z_b) / two.z_b
    inner_ok = rel_z <= 1e-8

    org = OrgSpec(top_manager=BENCH, teams=(team, team))
    res = solve_three_level(org)
    scale = max(1.0, abs(res.principal_value))
    foc_ok = (
        res.diagnostics.foc_residual is not None
        and res.diagnostics.foc_residual <= 1e-4 * scale
    )

    # two-stage grid oracle over the top-level rates
    def outer(z, g):
        try:
            return three_level_objective(z, g, org)
        except Exception:
            return -np.inf

    zc, gc = res.z_b, res.gamma_b
    best = -np.inf
    for z in np.linspace(0.7, 1.1, 21):
        for g in np.linspace(-80.0, -5.0, 21):
            best = max(best, outer(z, g))
    dz, dg = 0.4 / 20, 75.0 / 20
    for _ in range(3):
        for z in np.linspace(zc - dz, zc + dz, 17):
            for g in np.linspace(gc - dg, gc + dg, 17):
                v = outer(z, g)
                if v > best:
                    best = v
        dz, dg = dz / 7, dg / 7
    oracle_gap = abs(res.principal_value - best)
    oracle_ok = oracle_gap <= 1e-4

    elapsed = time.time() - t0
    ok = report(
        "7 three-level",
        inner_ok and foc_ok and oracle_ok and elapsed < 30.0,
        f"gamma=0 rel z gap {rel_z:.2e}, foc {res.diagnostics.foc_residual:.2e}, "
        f"grid-oracle gap {oracle_gap:.2e}, {elapsed:.1f}s",
    )
    assert ok


def test_criterion_8_monte_carlo_verification():
    t0 = time.time()
    # horizon chosen so the CARA utility means are statistically estimable
    # (R^2 z^2 sigma^2 T = O(1)); all targets below scale with T
    firm = identical_firm(BENCH, 2, T=5e-4)
    res = solve_two_level(firm, "sophisticated")
    rates = PaymentRates(RateQV(res.z_b, res.gamma_b), res.agent_rates)
    cfg = MCConfig(paths=100_000, steps=2048, seed=0, antithetic=True)
    bundle = simulate(firm, rates, "best-response", cfg)
    s = bundle.summary

    checks = {}
    for label, stat, target in (
        ("agent-utility", s["agent_utilities"][0], -1.0),
        ("manager-utility", s["manager_utility"], -1.0),
        ("principal-payoff", s["principal_payoff"], firm.T * res.principal_value),
        (
            "realized-qv",
            s["qv"],
            firm.T * (BENCH.sigma**2 + BENCH.sigma**2 * (1 - res.agent_rates[0]) ** 2),
        ),
    ):
        dev = abs(stat["mean"] - target) / stat["se"]
        checks[label] = dev <= 3.0
        print(f"  mc {label}: mean {stat['mean']:.8g} vs {target:.8g} ({dev:.2f} se)")

    a_star = res.agent_efforts[0]
    base_stat = s["agent_utilities"][0]
    for mult in (0.0, 2.0):
        dev_bundle = simulate(firm, rates, (res.manager_effort, [mult * a_star]), cfg)
        d = dev_bundle.summary["agent_utilities"][0]
        sep = (base_stat["mean"] - d["mean"]) / np.hypot(base_stat["se"], d["se"])
        checks[f"deviation-{mult}"] = sep > 3.0
        print(f"  mc deviation {mult}x: separation {sep:.1f} se")

    checks["flagged"] = bundle.n_flagged == 0
    elapsed = time.time() - t0
    checks["time"] = elapsed < 60.0
    ok = report(
        "8 monte-carlo",
        all(checks.values()),
        f"{sum(checks.values())}/{len(checks)} checks, {elapsed:.1f}s "
        f"(T={firm.T}, paths={cfg.paths}, steps={cfg.steps}, seed={cfg.seed})",
    )
    assert ok, checks


def test_criterion_9_property_suites():
    t0 = time.time()

    # 50-instance dominance: sophisticated >= linear
    rng = np.random.default_rng(99)
    dominance_ok = True
    for _ in range(50):
        n = int(rng.integers(0, 31))
        workers = [
            WorkerParams(rng.uniform(10, 2000), rng.uniform(1, 100), rng.uniform(0.1, 3))
            for _ in range(n + 1)
        ]
        firm = FirmSpec(manager=workers[0], agents=tuple(workers[1:]))
        v_s = solve_two_level(firm, "sophisticated").principal_value
        v_l = solve_two_level(firm, "linear").principal_value
        dominance_ok &= v_s >= v_l - 1e-6

    # best-response rate stays inside (0, 1) for z > 0, gamma <= 0
    range_ok = True
    for _ in range(10_000):
        agent = WorkerParams(
            rng.uniform(10, 2000), rng.uniform(1, 100), rng.uniform(0.1, 3)
        )
        zs = z_ib(RateQV(rng.uniform(1e-3, 2.0), -rng.uniform(0.0, 200.0)), agent)
        range_ok &= 0.0 < zs < 1.0

    # optimizer agrees with dense grid oracles on random smooth problems
    oracle_ok = True
    for trial in range(10):
        dim = 1 if trial < 5 else 2
        centers = rng.uniform(-0.8, 0.8, size=(3, dim))
        widths = rng.uniform(0.05, 0.5, size=3)
        heights = rng.uniform(0.5, 2.0, size=3)

        def f(x):
            x = np.atleast_1d(x)
            return float(
                sum(
                    h * np.exp(-np.sum((x - c) ** 2) / w)
                    for h, c, w in zip(heights, centers, widths)
                )
            )

        if dim == 1:
            rep = maximize_1d(OptProblem(objective=f, box=[(-1, 1)]))
            dense = max(f(g) for g in np.arange(-1, 1, 1e-5))
        else:
            rep = maximize_nd(OptProblem(objective=f, box=[(-1, 1), (-1, 1)]))
            g1 = np.linspace(-1, 1, 161)
            coarse = [(f(np.array([a, b])), a, b) for a in g1 for b in g1]
            _, a0, b0 = max(coarse)
            step = g1[1] - g1[0]
            dense = max(
                f(np.array([a, b]))
                for a in np.linspace(a0 - step, a0 + step, 81)
                for b in np.linspace(b0 - step, b0 + step, 81)
            )
        tol = 1e-6 * max(1.0, abs(dense))
        oracle_ok &= (rep.value >= dense - tol) and (rep.value <= dense + tol)

    elapsed = time.time() - t0
    ok = report(
        "9 property-suites",
        dominance_ok and range_ok and oracle_ok and elapsed < 60.0,
        f"dominance={dominance_ok}, rate-range={range_ok}, "
        f"grid-oracle={oracle_ok}, {elapsed:.1f}s",
    )
    assert ok
