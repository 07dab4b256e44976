"""Monte Carlo layer: martingale identities, reproducibility, kernels."""

import numpy as np
import pytest

import hiercon._kernels as kernels
from hiercon import (
    AdmissibilityError,
    MCConfig,
    PaymentRates,
    RateQV,
    WorkerParams,
    identical_firm,
    realized_qv,
    simulate,
    solve_two_level,
)

BENCH = WorkerParams(1000.0, 50.0, 1.0)
# horizon chosen so that R^2 z^2 sigma^2 T = O(1): the CARA utility means
# are then statistically estimable (see README on the T=1 exponent scale)
T_MC = 5e-4


@pytest.fixture(scope="module")
def solved():
    firm = identical_firm(BENCH, 2, T=T_MC)
    res = solve_two_level(firm, "sophisticated")
    rates = PaymentRates(manager=RateQV(res.z_b, res.gamma_b), agents=res.agent_rates)
    return firm, res, rates


@pytest.fixture(scope="module")
def bundle(solved):
    firm, res, rates = solved
    cfg = MCConfig(paths=40_000, steps=512, seed=0, antithetic=True)
    return simulate(firm, rates, "best-response", cfg)


def test_null_contract_gives_reservation_utility():
    firm = identical_firm(BENCH, 2, T=1.0)
    rates = PaymentRates(manager=RateQV(0.0, 0.0), agents=(0.0,))
    cfg = MCConfig(paths=64, steps=16, seed=1, antithetic=False)
    b = simulate(firm, rates, (0.0, [0.0]), cfg)
    assert np.all(b.xi_agents_T == 0.0)
    assert np.all(b.xi_b_T == 0.0)
    assert np.all(b.utilities == -1.0)
    assert b.n_flagged == 0


def test_inadmissible_rates_rejected():
    firm = identical_firm(BENCH, 2, T=1.0)
    with pytest.raises(AdmissibilityError):
        simulate(firm, PaymentRates(RateQV(1.0, 2000.0), (0.5,)),
                 "best-response", MCConfig(paths=2, steps=2))


def test_agent_and_manager_utilities_near_reservation(solved, bundle):
    s = bundle.summary
    for stat in (s["manager_utility"], s["agent_utilities"][0]):
        assert abs(stat["mean"] - (-1.0)) <= 3.0 * stat["se"]
    assert bundle.n_flagged == 0


def test_principal_payoff_matches_closed_form(solved, bundle):
    firm, res, _ = solved
    target = firm.T * res.principal_value
    stat = bundle.summary["principal_payoff"]
    assert abs(stat["mean"] - target) <= 3.0 * stat["se"]


def test_realized_qv_matches_volatility(solved, bundle):
    firm, res, _ = solved
    z1 = res.agent_rates[0]
    target = firm.T * (BENCH.sigma**2 + BENCH.sigma**2 * (1 - z1) ** 2)
    stat = bundle.summary["qv"]
    assert abs(stat["mean"] - target) <= 3.0 * stat["se"]
    assert np.all(bundle.qv >= 0.0)


def test_incentive_compatibility_under_deviations(solved):
    firm, res, rates = solved
    cfg = MCConfig(paths=20_000, steps=256, seed=3, antithetic=True)
    base = simulate(firm, rates, "best-response", cfg)
    b_stat = base.summary["agent_utilities"][0]
    a_star = res.agent_efforts[0]
    for mult in (0.0, 0.5, 0.75, 1.25, 2.0):
        dev = simulate(firm, rates, (res.manager_effort, [mult * a_star]), cfg)
        d_stat = dev.summary["agent_utilities"][0]
        gap = b_stat["mean"] - d_stat["mean"]
        band = 3.0 * np.hypot(b_stat["se"], d_stat["se"])
        assert gap >= -band
        if mult in (0.0, 2.0):
            assert gap > band  # strictly worse, clear of the noise band


def test_bias_halving_dt(solved):
    # common-random-number refinement: one Brownian path discretized at two
    # resolutions isolates the O(dt) accrual bias from sampling noise
    firm, res, rates = solved
    T = firm.T
    z, gamma = rates.manager.z, rates.manager.gamma
    z1 = rates.agents[0]
    a1 = res.agent_efforts[0]
    rng = np.random.default_rng(5)
    paths, fine = 30_000, 512
    dwf = rng.standard_normal((2, paths, fine)) * np.sqrt(T / fine)

    from hiercon import manager_hamiltonian

    hb = manager_hamiltonian(rates.manager, firm)
    h1 = 0.5 * BENCH.k * z1**2
    cost1 = 0.5 * a1**2 / BENCH.k
    cost0 = 0.5 * res.manager_effort**2 / BENCH.k

    def utilities(dw):
        w0 = dw[0].sum(axis=1)
        w1 = dw[1].sum(axis=1)
        xi1 = (-h1 + z1 * a1 + 0.5 * BENCH.R * z1**2) * T + z1 * w1
        dz = dw[0] + (1 - z1) * dw[1]
        qv = (dz**2).sum(axis=1)
        drift = res.manager_effort + a1 * (1 - z1) + h1 - 0.5 * BENCH.R * z1**2
        zeta = drift * T + w0 + (1 - z1) * w1
        xib = -hb * T + z * zeta + 0.5 * (gamma + BENCH.R * z**2) * qv
        u1 = -np.exp(-BENCH.R * (xi1 - cost1 * T))
        u0 = -np.exp(-BENCH.R * (xib - cost0 * T))
        return u0, u1

    coarse = dwf[:, :, 0::2] + dwf[:, :, 1::2]
    for uf, uc in zip(utilities(dwf), utilities(coarse)):
        diff = uf - uc
        se_mean = uf.std(ddof=1) / np.sqrt(paths)
        assert abs(diff.mean()) <= 1.0 * se_mean


def test_reproducibility_bit_identical(solved):
    firm, _, rates = solved
    cfg = MCConfig(paths=4096, steps=128, seed=9, antithetic=True)
    a = simulate(firm, rates, "best-response", cfg)
    b = simulate(firm, rates, "best-response", cfg)
    assert a.summary == b.summary
    assert np.array_equal(a.zeta_T, b.zeta_T)
    assert np.array_equal(a.qv, b.qv)


def test_path_prefix_independent_of_path_count(solved):
    firm, _, rates = solved
    small = simulate(firm, rates, "best-response",
                     MCConfig(paths=2048, steps=64, seed=11, antithetic=False))
    large = simulate(firm, rates, "best-response",
                     MCConfig(paths=6144, steps=64, seed=11, antithetic=False))
    assert np.array_equal(small.zeta_T, large.zeta_T[:2048])
    assert np.array_equal(small.x_T, large.x_T[:2048])


def test_antithetic_preserves_mean_reduces_payoff_variance(solved):
    firm, _, rates = solved
    plain = simulate(firm, rates, "best-response",
                     MCConfig(paths=20_000, steps=128, seed=0, antithetic=False))
    anti = simulate(firm, rates, "best-response",
                    MCConfig(paths=20_000, steps=128, seed=0, antithetic=True))
    p, a = plain.summary["principal_payoff"], anti.summary["principal_payoff"]
    assert abs(p["mean"] - a["mean"]) <= 3.0 * np.hypot(p["se"], a["se"])
    # variance of the mean estimator: compare SEs at equal path count
    assert a["se"] < p["se"]
    pair_means = 0.5 * (anti.payoff[0::2] + anti.payoff[1::2])
    assert pair_means.var(ddof=1) < plain.payoff.var(ddof=1)


def test_standard_error_definition(solved):
    firm, _, rates = solved
    b = simulate(firm, rates, "best-response",
                 MCConfig(paths=2048, steps=64, seed=21, antithetic=False))
    stat = b.summary["principal_payoff"]
    assert stat["se"] == pytest.approx(
        b.payoff.std(ddof=1) / np.sqrt(b.payoff.size), rel=1e-12
    )


def test_realized_qv_operation():
    assert realized_qv(np.zeros(100)) == 0.0
    rng = np.random.default_rng(0)
    # pure diffusion, sigma = 1, T = 1: mean of sum of squared increments -> 1
    qvs = [realized_qv(rng.standard_normal(10_000) / 100.0) for _ in range(1000)]
    assert np.mean(qvs) == pytest.approx(1.0, rel=0.05)


def test_kernel_backends_agree(solved):
    firm, _, rates = solved
    rng = np.random.default_rng(17)
    dw = rng.standard_normal((2, 128, 64))
    sigma = np.array([1.0, 1.0])
    weights = np.array([1.0, 1.0 - rates.agents[0]])
    got = kernels.accrue_block(np.ascontiguousarray(dw), sigma, weights)
    want = kernels.accrue_block_numpy(dw, sigma, weights)
    for g, w in zip(got, want):
        assert np.allclose(g, w, rtol=1e-12, atol=1e-12)


def test_numpy_fallback_env_flag():
    import subprocess
    import sys

    code = (
        "import os; os.environ['HIERCON_DISABLE_NUMBA']='1';"
        "import hiercon._kernels as k; print(k.BACKEND)"
    )
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True)
    assert out.stdout.strip() == "numpy"


def test_overflow_paths_flagged():
    # long horizon makes the CARA exponent exceed the clamp on every path
    firm = identical_firm(BENCH, 2, T=1.0)
    res = solve_two_level(firm, "sophisticated")
    rates = PaymentRates(RateQV(res.z_b, res.gamma_b), res.agent_rates)
    b = simulate(firm, rates, "best-response",
                 MCConfig(paths=256, steps=64, seed=2, antithetic=False))
    assert b.n_flagged == 256
    assert np.isfinite(b.utilities).all()


def test_initial_outputs_shift_payoff_only():
    base = identical_firm(BENCH, 2, T=T_MC)
    shifted = identical_firm(BENCH, 2, T=T_MC)
    shifted = type(shifted)(manager=shifted.manager, agents=shifted.agents,
                            T=shifted.T, x0=(3.0, 2.0))
    res = solve_two_level(base, "sophisticated")
    rates = PaymentRates(RateQV(res.z_b, res.gamma_b), res.agent_rates)
    cfg = MCConfig(paths=1024, steps=32, seed=13, antithetic=False)
    a = simulate(base, rates, "best-response", cfg)
    b = simulate(shifted, rates, "best-response", cfg)
    assert np.allclose(b.zeta_T - a.zeta_T, 5.0)
    assert np.allclose(b.payoff - a.payoff, 5.0)
    assert np.array_equal(a.utilities, b.utilities)
    assert np.array_equal(a.xi_b_T, b.xi_b_T)


def test_manager_only_firm():
    firm = identical_firm(BENCH, 1, T=T_MC)
    res = solve_two_level(firm, "sophisticated")
    b = simulate(firm, PaymentRates(RateQV(res.z_b, res.gamma_b), ()),
                 "best-response", MCConfig(paths=20_000, steps=128, seed=7))
    stat = b.summary["manager_utility"]
    assert abs(stat["mean"] + 1.0) <= 3.0 * stat["se"]
    pay = b.summary["principal_payoff"]
    assert abs(pay["mean"] - firm.T * res.principal_value) <= 3.0 * pay["se"]


def test_efforts_validation(solved):
    firm, _, rates = solved
    with pytest.raises(ValueError):
        simulate(firm, rates, (0.0, [0.0, 0.0]), MCConfig(paths=2, steps=2))
    with pytest.raises(ValueError):
        simulate(firm, PaymentRates(rates.manager, ()), "best-response",
                 MCConfig(paths=2, steps=2))
