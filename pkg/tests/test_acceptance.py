"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  Later criteria reuse the simulation runs of earlier ones through a
module-level registry; running a criterion in isolation repopulates what it
needs.
"""

import math
import time

import numpy as np

from gridwelfare.config import load_config, validate_config
from gridwelfare.controller import (
    ControllerConfig,
    DeficitQueues,
    choose_price_indices,
    day_objective,
    drift_constants,
    queue_bound_value,
    simulate,
)
from gridwelfare.distributions import EmpiricalDistribution, discretized_standard_normal
from gridwelfare.market import MarketProcess, MarketState, long_run_weights
from gridwelfare.model import SystemModel
from gridwelfare.oracle import (
    OracleInstance,
    exhaustive_day_objective,
    optimal_stationary_welfare,
    relaxed_welfare,
)
from gridwelfare.procurement import (
    ProcurementInputs,
    expected_cost_optimal,
    minimum_expected_cost,
    value_of_renewable_location_scale,
)
from gridwelfare.users import PiecewiseLinearUtility, UserProfile

from helpers import simple_user, small_renewable, three_atom_noise, two_state_market


def report(criterion: str, ok: bool, detail: str = ""):
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    assert ok, f"{criterion}: {detail}"


# simulation runs shared between criteria (9 and 10 audit earlier runs)
_RUNS: dict[str, list] = {"queue": [], "welfare": [], "markov": []}


# ---------------------------------------------------------------- instances


def random_instance(rng: np.random.Generator):
    """A randomized valid config with strictly increasing utilities."""
    n_users = int(rng.integers(1, 4))
    t_slots = int(rng.integers(2, 4))
    profiles = []
    for i in range(n_users):
        l_max = float(rng.uniform(1.5, 3.5))
        l_min = float(rng.uniform(0.1, 0.4))
        noisy = bool(rng.random() < 0.5)
        d = float(rng.uniform(0.02, min(0.3, l_min))) if noisy else 0.0
        l_d_max = l_max - d
        l_av = float(rng.uniform(l_min + 0.05, min(l_d_max - d - 0.05, l_min + 1.5)))
        profiles.append(
            simple_user(
                name=f"u{i}",
                slopes=(float(rng.uniform(2.0, 6.0)), float(rng.uniform(0.3, 1.5))),
                kink=float(rng.uniform(0.3, 0.7)) * l_max,
                l_min=l_min,
                l_max=l_max,
                w_max=d,
                l_av=l_av,
                t_slots=t_slots,
                noise=three_atom_noise(d) if noisy else None,
            )
        )
    renewable = [
        EmpiricalDistribution.from_atoms(
            zip(np.sort(rng.uniform(0, 1.5, 4)) + np.arange(4) * 1e-6, [0.25] * 4)
        )
        for _ in range(t_slots)
    ]
    grid = np.linspace(0.0, float(rng.uniform(4.0, 8.0)), int(rng.integers(5, 12)))
    states = tuple(
        MarketState(rng.uniform(0.2, 4.0, t_slots), rng.uniform(0.2, 4.0, t_slots))
        for _ in range(int(rng.integers(1, 4)))
    )
    return SystemModel.build(profiles, renewable, grid), states


def welfare_instance():
    """T=2, N=2, M=2, 11-point grid, 3 noise atoms (criterion 5/7/8 scale)."""
    noise = three_atom_noise(0.1)
    u1 = simple_user("flex", (3.0, 1.0), 1.0, 0.2, 2.0, 0.1, 0.9, 2, noise)
    u2 = simple_user("firm", (4.0, 1.0), 1.2, 0.2, 2.0, 0.1, 1.1, 2, noise)
    return SystemModel.build([u1, u2], [small_renewable()] * 2, np.linspace(0.0, 5.0, 11))


def _gamma(model):
    from gridwelfare.config import gamma_from_plans

    return gamma_from_plans(model.plans)


def _eta_sweep(model, process, etas, days, seed, registry_key):
    lp = optimal_stationary_welfare(OracleInstance(model, process))
    assert lp.feasible
    runs = []
    gamma = _gamma(model)
    for i, eta in enumerate(etas):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        result = simulate(model, process, ControllerConfig(eta=eta, gamma=gamma), days, rng)
        runs.append((eta, result))
        _RUNS[registry_key].append((model, result))
    return lp, runs


# ---------------------------------------------------------------- criteria


def test_criterion_1_queue_bound_randomized_configs():
    started = time.perf_counter()
    rng = np.random.default_rng(20260808)
    worst_margin = math.inf
    for k in range(20):
        model, states = random_instance(rng)
        process = MarketProcess(states, "iid")
        eta = float(10 ** rng.uniform(0.0, 1.7))
        gamma = _gamma(model)
        result = simulate(
            model, process, ControllerConfig(eta=eta, gamma=gamma), 200, int(rng.integers(1 << 31))
        )
        # simulate() raises on any violation; also re-check the margin here
        worst_margin = min(worst_margin, result.queue_bound - result.max_total_queue)
        _RUNS["queue"].append((model, result))
    elapsed = time.perf_counter() - started
    report(
        "criterion 1 (queue bound, 20 configs x 200 days)",
        worst_margin >= -1e-9 and elapsed < 120,
        f"zero violations, worst margin {worst_margin:.3g}, {elapsed:.1f}s",
    )


def test_criterion_2_bound_arithmetic_756():
    # gamma=1, N=2, T=24, sum l_av = 12.5, eta=20, delta_max = 11.4
    shared_utility = [[0.0, 0.0], [6.0, 18.0], [12.0, 21.0]]
    config = load_config(
        {
            "t_slots": 24,
            "days": 1,
            "seed": 0,
            "eta": 20.0,
            "price_grid": {"low": 0.0, "high": 10.0, "points": 11},
            "users": [
                {
                    "name": "flexible",
                    "l_min": 3.0,
                    "l_max": 12.0,
                    "w_max": 0.0,
                    "l_av": 4.5,
                    "utility": shared_utility,
                },
                {
                    "name": "firm",
                    "l_min": 3.0,
                    "l_max": 12.0,
                    "w_max": 0.0,
                    "l_av": 8.0,
                    "utility": shared_utility,
                },
            ],
            "market": {
                "mode": "iid",
                "states": [{"beta": [2.0] * 24, "alpha_bar": [3.0] * 24}],
                "alpha_max": 11.4,
                "beta_max": 11.4,
            },
            "renewable": {"atoms_per_slot": [[[0.5, 1.0]]] * 24},
        }
    )
    validation = validate_config(config)
    ok = validation["ok"] and validation["gamma_computed"] == 1.0
    bound = validation["queue_bounds"]["20"]
    direct = queue_bound_value(
        [simple_user("a", l_max=12.0, l_min=1.0, l_av=4.5, kink=6.0),
         simple_user("b", l_max=12.0, l_min=1.0, l_av=8.0, kink=6.0)],
        1.0, 20.0, 11.4, 24,
    )
    report(
        "criterion 2 (bound arithmetic reproduces 756)",
        ok and bound == 756.0 and direct == 756.0,
        f"harness bound {bound!r}, direct {direct!r}",
    )


def test_criterion_3_procurement_oracle_equivalence():
    started = time.perf_counter()
    rng = np.random.default_rng(31415)
    for _ in range(100):
        n = int(rng.integers(3, 50))
        z = EmpiricalDistribution.from_atoms(
            zip(rng.uniform(0, 2.5, n), rng.dirichlet(np.ones(n)))
        )
        l_d = float(rng.uniform(0.1, 3.0))
        beta = float(rng.uniform(0.05, 3.0))
        alpha = float(rng.uniform(0.05, 3.0))
        inputs = ProcurementInputs(l_d, beta, alpha, z)
        b_star, exact = minimum_expected_cost(inputs)
        _, closed = expected_cost_optimal(inputs)
        step = 1e-3 * l_d
        bs = np.arange(0.0, max(l_d - z.min_value, 0.0) + 0.1 + step, step)
        costs = alpha * (np.maximum(l_d - bs[:, None] - z.values[None, :], 0.0) @ z.weights) + beta * bs
        grid_min = float(costs.min())
        minimizers = bs[costs <= grid_min + 1e-12]
        assert np.min(np.abs(minimizers - b_star)) <= step + 1e-12
        # exact optimum brackets the grid minimum within one Lipschitz step
        assert exact <= grid_min + 1e-9
        assert grid_min <= exact + max(beta, alpha) * step + 1e-9
        # closed form differs from the minimum only by the quantile-step correction
        correction = 0.0
        if b_star > 0 and beta > 0:
            theta = z.quantile(beta / alpha)
            correction = theta * (alpha * z.cdf(theta) - beta)
        assert abs(closed - grid_min) <= max(1e-9, abs(correction) + max(beta, alpha) * step + 1e-9)
    elapsed = time.perf_counter() - started
    report(
        "criterion 3 (procurement oracle equivalence, 100 instances)",
        elapsed < 30,
        f"all instances matched, {elapsed:.1f}s",
    )


def test_criterion_4_renewable_value_shape_and_derivatives():
    started = time.perf_counter()
    h = discretized_standard_normal(1000)
    beta, alpha = 1.0, 2.0
    by_mu = [value_of_renewable_location_scale(beta, alpha, h, mu, 1.0) for mu in np.linspace(0, 4, 20)]
    by_sigma = [value_of_renewable_location_scale(beta, alpha, h, 2.0, s) for s in np.linspace(0, 2, 20)]
    monotone = bool(np.all(np.diff(by_mu) >= -1e-12) and np.all(np.diff(by_sigma) <= 1e-12))

    l_d, mu, sigma, step = 2.0, 0.7, 1.3, 1e-4

    def cost(m, s):
        return alpha * float(np.maximum(l_d - m - s * h.values, 0.0) @ h.weights)

    threshold = (l_d - mu) / sigma
    fd_mu = (cost(mu + step, sigma) - cost(mu - step, sigma)) / (2 * step)
    fd_sigma = (cost(mu, sigma + step) - cost(mu, sigma - step)) / (2 * step)
    mu_formula = -alpha * h.cdf(threshold)
    sigma_formula = -alpha * h.partial_expectation(threshold)
    rel_mu = abs(fd_mu - mu_formula) / abs(mu_formula)
    rel_sigma = abs(fd_sigma - sigma_formula) / abs(sigma_formula)
    elapsed = time.perf_counter() - started
    report(
        "criterion 4 (renewable value: monotone in mean/spread, derivative formulas)",
        monotone and rel_mu < 1e-3 and rel_sigma < 1e-3 and elapsed < 10,
        f"rel errors {rel_mu:.2e}, {rel_sigma:.2e}, {elapsed:.1f}s",
    )


ETAS = [5.0, 10.0, 20.0, 40.0, 80.0]
WELFARE_DAYS = 5000


def test_criterion_5_welfare_bound_vs_lp():
    started = time.perf_counter()
    model = welfare_instance()
    process = two_state_market()
    lp, runs = _eta_sweep(model, process, ETAS, WELFARE_DAYS, 2024, "welfare")
    _, _, c1 = drift_constants(model.profiles, model.t_slots)
    gaps, sems = [], []
    ok_bound = True
    detail = []
    for eta, result in runs:
        sem = result.welfare_std / math.sqrt(WELFARE_DAYS)
        floor = lp.value - c1 * model.t_slots / eta - 3 * sem
        ok_bound &= result.average_welfare >= floor
        gaps.append(lp.value - result.average_welfare)
        sems.append(sem)
        detail.append(f"eta={eta:g}: W={result.average_welfare:.4f} floor={floor:.4f}")
    ok_monotone = all(
        gaps[i + 1] <= gaps[i] + 3 * math.hypot(sems[i], sems[i + 1]) for i in range(len(gaps) - 1)
    )
    elapsed = time.perf_counter() - started
    report(
        "criterion 5 (welfare bound vs LP, eta sweep)",
        ok_bound and ok_monotone and elapsed < 300,
        f"LP={lp.value:.4f}; " + "; ".join(detail) + f"; gap shrinks, {elapsed:.1f}s",
    )


def test_criterion_6_day_objective_sandwich():
    started = time.perf_counter()
    rng = np.random.default_rng(606)
    violations = 0
    upper_holds = 0
    for _ in range(20):
        noise = three_atom_noise(0.05)
        profiles = [
            simple_user(
                f"u{i}",
                (float(rng.uniform(2, 5)), float(rng.uniform(0.3, 1.5))),
                float(rng.uniform(0.4, 0.9)),
                0.2,
                2.0,
                0.05,
                float(rng.uniform(0.5, 1.2)),
                2,
                noise,
            )
            for i in range(int(rng.integers(1, 3)))
        ]
        model = SystemModel.build(profiles, [small_renewable()] * 2, np.linspace(0, 4, 5))
        market = MarketState(rng.uniform(0.3, 3, 2), rng.uniform(0.3, 3, 2))
        queues = DeficitQueues(rng.uniform(0, 5, len(profiles)))
        eta = float(rng.uniform(0.5, 30))
        phi_star, _ = exhaustive_day_objective(model, market, queues, eta)
        idx = choose_price_indices(model, queues, market, eta)
        phi_a = day_objective(model, idx, queues, market, eta)
        _, c0, _ = drift_constants(model.profiles, model.t_slots)
        if phi_a < phi_star - model.t_slots * c0 - 1e-9:
            violations += 1
        if phi_a <= phi_star + 1e-9:
            upper_holds += 1
    elapsed = time.perf_counter() - started
    report(
        "criterion 6 (decoupled pricing within T*C0 of the exact day optimum)",
        violations == 0 and elapsed < 60,
        f"0/20 lower-bound violations (upper side held {upper_holds}/20), {elapsed:.1f}s",
    )


def test_criterion_7_single_price_gap_and_per_user_mode():
    # LP side: PoSP >= 0 everywhere it is computed; exactly 0 for identical users
    model = welfare_instance()
    process = two_state_market()
    single = optimal_stationary_welfare(OracleInstance(model, process))
    relaxed, _ = relaxed_welfare(OracleInstance(model, process))
    posp_hetero = relaxed - single.value

    noise = three_atom_noise(0.1)
    clones = [
        simple_user("a", (3.0, 1.0), 1.0, 0.2, 2.0, 0.1, 0.9, 2, noise),
        simple_user("b", (3.0, 1.0), 1.0, 0.2, 2.0, 0.1, 0.9, 2, noise),
    ]
    model_same = SystemModel.build(clones, [small_renewable()] * 2, np.linspace(0, 5, 11))
    single_same = optimal_stationary_welfare(OracleInstance(model_same, process))
    relaxed_same, _ = relaxed_welfare(OracleInstance(model_same, process))
    posp_same = relaxed_same - single_same.value

    # directional WMA claim on a conflicting-target instance: per-user pricing
    # should improve welfare and shrink the deficit backlog
    a = UserProfile(
        "a",
        PiecewiseLinearUtility.from_breakpoints([[0, 0], [0.6, 3.0], [2, 4.4]], t_slots=2),
        np.full(2, 0.2), 2.0, 0.0, 1.2, (EmpiricalDistribution.degenerate(0.0),) * 2,
    )
    b = UserProfile(
        "b",
        PiecewiseLinearUtility.from_breakpoints([[0, 0], [1.0, 5.0], [2, 6.0]], t_slots=2),
        np.full(2, 0.2), 2.0, 0.0, 0.9, (EmpiricalDistribution.degenerate(0.0),) * 2,
    )
    hetero = SystemModel.build([a, b], [small_renewable()] * 2, np.linspace(0.0, 5.0, 11))
    proc = MarketProcess((MarketState(np.full(2, 1.8), np.full(2, 2.0)),), "iid")
    # conflicting targets make the common-price constraint strictly costly
    single_conf = optimal_stationary_welfare(OracleInstance(hetero, proc))
    relaxed_conf, _ = relaxed_welfare(OracleInstance(hetero, proc))
    posp_conflict = relaxed_conf - single_conf.value
    gamma = _gamma(hetero)
    by_mode = {}
    for mode in ("same", "per-user"):
        by_mode[mode] = simulate(
            hetero, proc, ControllerConfig(eta=20.0, gamma=gamma, pricing=mode), 4000, 11
        )
    welfare_gain = by_mode["per-user"].average_welfare - by_mode["same"].average_welfare
    queue_drop = by_mode["same"].avg_total_queue - by_mode["per-user"].avg_total_queue
    scale = 1e-9 * (1 + abs(single_same.value))
    report(
        "criterion 7 (single-price gap >= 0, zero for identical users; per-user mode helps)",
        posp_hetero >= -scale
        and abs(posp_same) <= scale
        and posp_conflict >= -scale
        and posp_conflict > 0.01
        and welfare_gain >= 0
        and queue_drop >= 0,
        f"PoSP hetero {posp_hetero:.4g}, identical {posp_same:.2g}, conflicting {posp_conflict:.4f}; "
        f"per-user welfare +{welfare_gain:.4f}, deficit -{queue_drop:.3f}",
    )


def test_criterion_8_markov_mode():
    started = time.perf_counter()
    # queue bound under Markov prices: randomized configs with 2-state chains
    rng = np.random.default_rng(808)
    for _ in range(8):
        model, states = random_instance(rng)
        p_stay = rng.uniform(0.3, 0.8, size=2)
        transition = np.array(
            [[p_stay[0], 1 - p_stay[0]], [1 - p_stay[1], p_stay[1]]]
        )
        process = MarketProcess(states[:1] * 2 if len(states) < 2 else states[:2], "markov", transition=transition)
        eta = float(10 ** rng.uniform(0.0, 1.5))
        result = simulate(
            model, process, ControllerConfig(eta=eta, gamma=_gamma(model)), 200, int(rng.integers(1 << 31))
        )
        _RUNS["markov"].append((model, result))

    # welfare sweep against the stationary-weighted LP
    model = welfare_instance()
    process = two_state_market(mode="markov")
    weights = long_run_weights(process)
    lp, runs = _eta_sweep(model, process, ETAS, WELFARE_DAYS, 88, "markov")
    gaps, sems = [], []
    for eta, result in runs:
        gaps.append(lp.value - result.average_welfare)
        sems.append(result.welfare_std / math.sqrt(WELFARE_DAYS))
    ok_monotone = all(
        gaps[i + 1] <= gaps[i] + 3 * math.hypot(sems[i], sems[i + 1]) for i in range(len(gaps) - 1)
    )
    elapsed = time.perf_counter() - started
    report(
        "criterion 8 (Markov prices: queue bound + shrinking welfare gap)",
        ok_monotone and elapsed < 300,
        f"stationary weights {np.round(weights, 4).tolist()}, gaps {[round(g, 4) for g in gaps]}, {elapsed:.1f}s",
    )


def test_criterion_9_drift_inequality_every_frame():
    if not any(_RUNS.values()):  # isolated invocation: populate a small sample
        test_criterion_1_queue_bound_randomized_configs()
    worst = math.inf
    frames = 0
    for key in ("queue", "welfare", "markov"):
        for _, result in _RUNS[key]:
            worst = min(worst, result.min_drift_slack)
            frames += len(result.records)
    report(
        "criterion 9 (pathwise drift inequality on every frame)",
        worst >= -1e-9 and frames > 0,
        f"{frames} frames audited, worst slack {worst:.3g}",
    )


def test_criterion_10_long_run_consumption_targets():
    if not _RUNS["welfare"]:
        test_criterion_5_welfare_bound_vs_lp()
    ok = True
    details = []
    for model, result in _RUNS["welfare"]:
        kt = len(result.records) * model.t_slots
        totals = sum(r.realized.sum(axis=1) for r in result.records)
        q_end = result.records[-1].queue_after[-1]
        for n, prof in enumerate(model.profiles):
            # telescoped identity, exact up to float round-off
            ok &= totals[n] / kt >= prof.l_av - q_end[n] / kt - 1e-9
            # the shortfall term vanishes at rate bound/(K*T)
            ok &= q_end[n] <= result.queue_bound + 1e-9
        details.append(f"max deficit term {float(np.max(q_end)) / kt:.2e}")
    report(
        "criterion 10 (long-run consumption targets met within O(1/K))",
        ok,
        "; ".join(details[:2]) + f" over {len(_RUNS['welfare'])} runs",
    )
