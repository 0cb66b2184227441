"""Release gate: one test per headline requirement.

Each test prints the measured quantities next to the bound it enforces,
so a failing run shows how far off the build is. Seeds are fixed; the
statistical bounds leave room for Monte Carlo noise at those seeds.

Tiers: everything here runs by default except the full confounder grid
(opt in with -m full_grid) and the real-data reproduction, which needs
BIDIV_HEART_CSV to point at the survey file.
"""

import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from bidiv import (
    BidivError,
    ColumnSchema,
    GAUSSIAN_IVS,
    RngStream,
    SIGNAL_TO_NOISE,
    SensitivityParams,
    StructuralParams,
    SweepPlan,
    UNIFORM_IVS,
    bootstrap,
    cli,
    delta_method_se,
    estimate_iv,
    estimate_naive,
    fit_probit,
    identify_baseline,
    load_csv,
    probit_coefs,
    simulate,
    solve_confounder_scale,
    solve_general,
    solve_w_direct,
    solve_z_direct,
    stacked_baseline_map,
    sweep,
)
from conftest import BENCH, XI_BENCH

GRID_17 = [round(-0.16 + 0.02 * i, 10) for i in range(17)]


def pair_gap(a, b):
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def test_criterion_1_solver_round_trip_on_random_feasible_draws():
    draw = np.random.default_rng(20260825)
    started = time.perf_counter()
    worst = 0.0
    for _ in range(500):
        beta_xy = draw.uniform(-0.9, 0.9)
        beta_yx = draw.uniform(-0.9, 0.9)
        gamma1 = draw.uniform(0.2, 3.0)
        gamma2 = draw.uniform(-1.0, 1.0) * math.sqrt(gamma1) * 0.999
        eta0 = draw.uniform(-0.2, 0.2)
        delta0 = draw.uniform(-0.2, 0.2)
        mu_xz = draw.uniform(0.45, 0.85)
        mu_yw = draw.uniform(0.45, 0.85)

        truth = StructuralParams(
            beta_xy=beta_xy,
            beta_yx=beta_yx,
            mu_xz=mu_xz,
            mu_yw=mu_yw,
            sigma=0.75,
            gamma1=gamma1,
            gamma2=gamma2,
            eta=eta0 * mu_xz,
            delta=delta0 * mu_yw,
            mu_xq=0.15,
            mu_yq=0.15,
        )
        solutions = solve_general(
            probit_coefs(truth),
            SensitivityParams(gamma1=gamma1, gamma2=gamma2, eta0=eta0, delta0=delta0),
        )
        err = min(pair_gap(cand, (beta_xy, beta_yx)) for cand in solutions.candidates)
        worst = max(worst, err)
    elapsed = time.perf_counter() - started

    print(f"criterion 1: worst recovery error {worst:.3e} over 500 draws in {elapsed:.1f}s")
    assert worst <= 1e-6, f"worst recovery error {worst:.3e} exceeds 1e-6"
    assert elapsed < 60.0, f"round-trip suite took {elapsed:.1f}s; expected seconds"


@pytest.fixture(scope="module")
def table1_runs():
    """200 Monte Carlo replications of both benchmark scenarios."""
    reps, n = 200, 10_000
    s1_iv, s1_naive, s2_iv = [], [], []
    for rep in range(reps):
        root = RngStream(101, rep)
        d1 = simulate(BENCH, GAUSSIAN_IVS, n, root.derive(0))
        est = estimate_iv(d1)
        s1_iv.append((est.beta_xy, est.beta_yx))
        naive = estimate_naive(d1)
        s1_naive.append((naive.beta_xy, naive.beta_yx))
        d2 = simulate(BENCH, UNIFORM_IVS, n, root.derive(1))
        est2 = estimate_iv(d2)
        s2_iv.append((est2.beta_xy, est2.beta_yx))
    return {
        "s1_iv": np.array(s1_iv),
        "s1_naive": np.array(s1_naive),
        "s2_iv": np.array(s2_iv),
    }


def test_criterion_2_monte_carlo_bias_and_sd_match_reference(table1_runs):
    truth = np.array([BENCH.beta_xy, BENCH.beta_yx])

    s1 = table1_runs["s1_iv"]
    bias = s1.mean(axis=0) - truth
    sd = s1.std(axis=0, ddof=1)
    s2_sd = table1_runs["s2_iv"].std(axis=0, ddof=1)
    print(
        f"criterion 2: scenario-1 bias ({bias[0]:+.5f}, {bias[1]:+.5f}), "
        f"sd ({sd[0]:.4f}, {sd[1]:.4f}); scenario-2 sd ({s2_sd[0]:.4f}, {s2_sd[1]:.4f})"
    )

    assert abs(bias[0]) <= 0.003, f"scenario-1 bias_xy {bias[0]:+.5f} exceeds 0.003"
    assert abs(bias[1]) <= 0.003, f"scenario-1 bias_yx {bias[1]:+.5f} exceeds 0.003"
    assert 0.7 * 0.0208 <= sd[0] <= 1.3 * 0.0208, f"scenario-1 sd_xy {sd[0]:.4f}"
    assert 0.7 * 0.0242 <= sd[1] <= 1.3 * 0.0242, f"scenario-1 sd_yx {sd[1]:.4f}"
    assert 0.7 * 0.0354 <= s2_sd[0] <= 1.3 * 0.0354, f"scenario-2 sd_xy {s2_sd[0]:.4f}"
    assert 0.7 * 0.0407 <= s2_sd[1] <= 1.3 * 0.0407, f"scenario-2 sd_yx {s2_sd[1]:.4f}"


def test_criterion_3_naive_estimator_reproduces_confounding_bias(table1_runs):
    truth = np.array([BENCH.beta_xy, BENCH.beta_yx])
    bias = table1_runs["s1_naive"].mean(axis=0) - truth
    print(f"criterion 3: naive bias ({bias[0]:+.4f}, {bias[1]:+.4f})")

    assert 0.8 * 0.546 <= bias[0] <= 1.2 * 0.546, f"naive bias_xy {bias[0]:+.4f}"
    assert 1.2 * -0.154 <= bias[1] <= 0.8 * -0.154, f"naive bias_yx {bias[1]:+.4f}"


FULL_GAMMA1 = [round(0.10 + 0.02 * i, 10) for i in range(46)]
FULL_GAMMA2 = [round(-0.60 + 0.02 * i, 10) for i in range(61)]


def feasible_gamma_cells():
    return [
        (g1, g2)
        for g1 in FULL_GAMMA1
        for g2 in FULL_GAMMA2
        if g1 >= g2 * g2 - 1e-12
    ]


def check_gamma_cell_rows(rows, worst):
    for row in rows:
        if row.note == "infeasible-structure":
            continue
        worst["bias"] = max(worst["bias"], abs(row.bias_xy), abs(row.bias_yx))
        worst["sd"] = max(worst["sd"], row.sd_xy, row.sd_yx)
        assert abs(row.bias_xy) <= 0.03 and abs(row.bias_yx) <= 0.03, (
            f"cell {row.axis_values}: bias ({row.bias_xy:+.4f}, {row.bias_yx:+.4f})"
        )
        assert row.sd_xy <= 0.06 and row.sd_yx <= 0.06, (
            f"cell {row.axis_values}: sd ({row.sd_xy:.4f}, {row.sd_yx:.4f})"
        )


def test_criterion_4_confounder_grid_bias_and_sd_bounds():
    cells = feasible_gamma_cells()
    picks = np.random.default_rng(404).choice(len(cells), size=25, replace=False)
    worst = {"bias": 0.0, "sd": 0.0}
    for i, cell_index in enumerate(picks):
        g1, g2 = cells[cell_index]
        plan = SweepPlan.over(SensitivityParams(), gamma1=[g1], gamma2=[g2])
        table = sweep(
            BENCH, plan, "confounder", replicates=50, rng=RngStream(40, i), n=10_000
        )
        check_gamma_cell_rows(table.rows, worst)
    print(
        f"criterion 4 (fast): 25 cells, worst |bias| {worst['bias']:.4f} (<=0.03), "
        f"worst sd {worst['sd']:.4f} (<=0.06)"
    )


@pytest.mark.full_grid
def test_criterion_4_confounder_grid_full():
    plan = SweepPlan.over(SensitivityParams(), gamma1=FULL_GAMMA1, gamma2=FULL_GAMMA2)
    table = sweep(
        BENCH, plan, "confounder", replicates=200, rng=RngStream(41), n=10_000
    )
    worst = {"bias": 0.0, "sd": 0.0}
    check_gamma_cell_rows(table.rows, worst)
    print(
        f"criterion 4 (full): {len(table.rows)} cells, worst |bias| {worst['bias']:.4f}, "
        f"worst sd {worst['sd']:.4f}"
    )


def test_criterion_5_reduction_identities():
    second = probit_coefs(
        StructuralParams(beta_xy=0.3, beta_yx=0.2, mu_xz=0.5, mu_yw=0.7, sigma=0.6)
    )
    third = probit_coefs(
        StructuralParams(beta_xy=-0.4, beta_yx=-0.1, mu_xz=0.8, mu_yw=0.5, sigma=1.1)
    )
    worst_reduction = 0.0
    worst_containment = 0.0
    for xi in (XI_BENCH, second, third):
        baseline = identify_baseline(xi)
        for solutions in (
            solve_confounder_scale(xi, 1.0, 0.0),
            solve_z_direct(xi, 0.0),
            solve_w_direct(xi, 0.0),
        ):
            gap = pair_gap(solutions.best(), baseline)
            worst_reduction = max(worst_reduction, gap)
            assert gap <= 1e-10, f"reduction gap {gap:.3e} exceeds 1e-10"

        anchored = solve_confounder_scale(xi, 1.0, 0.0).best()
        general = solve_general(xi, SensitivityParams())
        gap = min(pair_gap(cand, anchored) for cand in general.candidates)
        worst_containment = max(worst_containment, gap)
        assert gap <= 1e-8, f"general solver misses the anchored solution by {gap:.3e}"
    print(
        f"criterion 5: worst reduction gap {worst_reduction:.3e} (<=1e-10), "
        f"worst containment gap {worst_containment:.3e} (<=1e-8)"
    )


def check_leak_rows(case, rows):
    worst_ratio = 0.0
    for row in rows:
        successes = row.replicates - row.failures
        assert successes > 0, f"{case} cell {row.axis_values}: every replicate failed"
        for bias, sd in ((row.bias_xy, row.sd_xy), (row.bias_yx, row.sd_yx)):
            se = sd / math.sqrt(successes)
            worst_ratio = max(worst_ratio, abs(bias) / se)
            assert abs(bias) <= 3.0 * se, (
                f"{case} cell {row.axis_values}: bias {bias:+.4f} "
                f"exceeds 3 MC SEs ({3 * se:.4f})"
            )
    return worst_ratio


def test_criterion_6_leak_sweeps_track_truth():
    case1 = sweep(
        BENCH,
        SweepPlan.over(SensitivityParams(), eta0=GRID_17),
        "z-direct",
        replicates=100,
        rng=RngStream(161),
        n=10_000,
    )
    ratio1 = check_leak_rows("case 1", case1.rows)

    case2 = sweep(
        BENCH,
        SweepPlan.over(SensitivityParams(), delta0=GRID_17),
        "w-direct",
        replicates=100,
        rng=RngStream(162),
        n=10_000,
    )
    ratio2 = check_leak_rows("case 2", case2.rows)

    ratio3 = 0.0
    shared_base = SensitivityParams(
        gamma1=1.0, gamma2=1.0, eta_delta_mode=SIGNAL_TO_NOISE
    )
    for i, value in enumerate(GRID_17):
        table = sweep(
            BENCH,
            SweepPlan.over(shared_base, eta0=[value], delta0=[value]),
            "shared",
            replicates=100,
            rng=RngStream(163, i),
            n=10_000,
            branch="lt1",
        )
        ratio3 = max(ratio3, check_leak_rows("case 3", table.rows))

    print(
        "criterion 6: worst |bias|/SE by case "
        f"({ratio1:.2f}, {ratio2:.2f}, {ratio3:.2f}); bound 3"
    )


@pytest.mark.nightly
def test_criterion_7_interval_coverage_and_delta_accuracy():
    outer, B, n_cov = 200, 200, 5_000
    hits_xy = hits_yx = successes = 0
    for rep in range(outer):
        d = simulate(BENCH, GAUSSIAN_IVS, n_cov, RngStream(71, rep))
        try:
            boot = bootstrap(d, estimate_iv, B=B, level=0.95, rng=RngStream(72, rep))
        except BidivError:
            continue
        successes += 1
        hits_xy += boot.ci_xy[0] <= BENCH.beta_xy <= boot.ci_xy[1]
        hits_yx += boot.ci_yx[0] <= BENCH.beta_yx <= boot.ci_yx[1]
    assert successes >= 190, f"only {successes}/200 coverage replications completed"
    cov_xy = hits_xy / successes
    cov_yx = hits_yx / successes

    n_delta = 100_000
    points = []
    for rep in range(200):
        d = simulate(BENCH, GAUSSIAN_IVS, n_delta, RngStream(73, rep))
        est = estimate_iv(d)
        points.append((est.beta_xy, est.beta_yx))
    mc_sd = np.array(points).std(axis=0, ddof=1)

    ses = []
    for k in range(3):
        d = simulate(BENCH, GAUSSIAN_IVS, n_delta, RngStream(74, k))
        design = d.design_matrix()
        fit_x = fit_probit(d.x, design)
        fit_y = fit_probit(d.y, design)
        ses.append(delta_method_se(fit_x, fit_y, stacked_baseline_map(design.shape[1])))
    ratio = np.array(ses).mean(axis=0) / mc_sd

    print(
        f"criterion 7: coverage ({cov_xy:.3f}, {cov_yx:.3f}) over {successes} runs; "
        f"delta/MC sd ratio ({ratio[0]:.3f}, {ratio[1]:.3f})"
    )
    assert 0.90 <= cov_xy <= 0.99, f"coverage_xy {cov_xy:.3f} outside [0.90, 0.99]"
    assert 0.90 <= cov_yx <= 0.99, f"coverage_yx {cov_yx:.3f} outside [0.90, 0.99]"
    assert 0.85 <= ratio[0] <= 1.15, f"delta ratio_xy {ratio[0]:.3f} outside 15%"
    assert 0.85 <= ratio[1] <= 1.15, f"delta ratio_yx {ratio[1]:.3f} outside 15%"


def test_criterion_8_real_data_reproduction():
    source = os.environ.get("BIDIV_HEART_CSV")
    if not source:
        pytest.skip(
            "real-data reproduction skipped: set BIDIV_HEART_CSV to the "
            "heart-disease survey CSV to run it"
        )
    schema_path = os.environ.get("BIDIV_HEART_SCHEMA")
    if schema_path:
        schema = ColumnSchema.from_mapping(
            json.loads(Path(schema_path).read_text(encoding="utf-8"))
        )
    else:
        yes_no = {"Yes": 1, "No": 0}
        schema = ColumnSchema(
            x_column="HeartDisease",
            y_column="Diabetic",
            z_column="Stroke",
            w_column="BMI",
            binary_recodings={
                "HeartDisease": yes_no,
                "Stroke": yes_no,
                "Diabetic": {
                    "Yes": 1,
                    "No": 0,
                    "No, borderline diabetes": 0,
                    "Yes (during pregnancy)": 1,
                },
            },
            standardize_columns=("BMI",),
        )

    d = load_csv(source, schema)
    est = estimate_iv(d)
    boot = bootstrap(d, estimate_iv, B=200, rng=RngStream(0))
    print(
        f"criterion 8: estimates ({est.beta_xy:+.4f}, {est.beta_yx:+.4f}), "
        f"bootstrap sd ({boot.sd_xy:.4f}, {boot.sd_yx:.4f}) on n={d.n}"
    )
    assert abs(est.beta_xy - 0.3108) <= 0.01, f"beta_xy {est.beta_xy:+.4f}"
    assert abs(est.beta_yx - 0.1786) <= 0.01, f"beta_yx {est.beta_yx:+.4f}"
    assert 0.8 * 0.0262 <= boot.sd_xy <= 1.2 * 0.0262, f"sd_xy {boot.sd_xy:.4f}"
    assert 0.8 * 0.0154 <= boot.sd_yx <= 1.2 * 0.0154, f"sd_yx {boot.sd_yx:.4f}"


def test_criterion_9_manifest_reruns_are_byte_identical(tmp_path, monkeypatch):
    def run(argv):
        assert cli.main(argv) == 0

    def rerun_matches(first_dir, config_name, argv, artifacts):
        second_dir = first_dir.parent / (first_dir.name + "_rerun")
        second_dir.mkdir()
        run(argv + ["--config", str(first_dir / config_name), "--out", str(second_dir)])
        for artifact in artifacts:
            assert (first_dir / artifact).read_bytes() == (
                second_dir / artifact
            ).read_bytes(), f"{artifact} differs on re-run"

    monkeypatch.setenv("BIDIV_THREADS", "1")

    sim_dir = tmp_path / "sim"
    sim_dir.mkdir()
    run(
        ["simulate", "--n", "1500", "--seed", "13",
         "--out", str(sim_dir), "--name", "sim"]
    )
    rerun_matches(
        sim_dir, "sim.manifest.json",
        ["simulate", "--name", "sim"],
        ["sim.csv", "sim.manifest.json"],
    )
    sample = str(sim_dir / "sim.csv")

    sweep_dir = tmp_path / "sweep"
    sweep_dir.mkdir()
    run(
        ["sweep", "--solver", "z-direct", "--grid", "eta0=0:0.04:0.02",
         "--replicates", "4", "--n", "600", "--seed", "3",
         "--out", str(sweep_dir), "--name", "sw"]
    )
    monkeypatch.setenv("BIDIV_THREADS", "3")
    rerun_matches(
        sweep_dir, "sw.manifest.json",
        ["sweep", "--name", "sw"],
        ["sw.sweep.csv", "sw.manifest.json"],
    )

    est_dir = tmp_path / "est"
    est_dir.mkdir()
    run(
        ["estimate", "--input", sample, "--covariates", "q1",
         "--bootstrap", "25", "--seed", "5",
         "--out", str(est_dir), "--name", "est"]
    )
    monkeypatch.setenv("BIDIV_THREADS", "1")
    rerun_matches(
        est_dir, "est.report.json",
        ["estimate", "--name", "est"],
        ["est.report.json"],
    )

    boot_dir = tmp_path / "boot"
    boot_dir.mkdir()
    run(
        ["bootstrap", "--input", sample, "--covariates", "q1",
         "--bootstrap", "20", "--seed", "9",
         "--out", str(boot_dir), "--name", "bs"]
    )
    rerun_matches(
        boot_dir, "bs.bootstrap.json",
        ["bootstrap", "--name", "bs"],
        ["bs.bootstrap.json"],
    )
    print("criterion 9: all four commands re-ran byte-identically from their manifests")
