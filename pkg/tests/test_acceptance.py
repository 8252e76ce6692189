"""Acceptance gate: the behavioral guarantees the package ships under.

One test per guarantee; each prints a single [PASS]/[FAIL] line (visible
with -s, and implied by the pytest verdict).  The expensive sweeps run once
in module-scoped fixtures and feed several tests.
"""

import itertools
import math
import os
import time

import numpy as np
import pytest

from clsbandit.core import pseudo_regret, regret_decomposition
from clsbandit.environments import cluster_of_arm
from clsbandit.linalg import RidgeState
from clsbandit.oracles import brute_force_select, promotion_select, top_k_select
from clsbandit.policies import PolicySpec
from clsbandit.core import PromotionAssignment, TopK
from clsbandit.runner import (
    ExperimentConfig,
    build_env,
    check_potential_bounds,
    clustered_preset,
    run_cell,
    run_experiment,
    synthetic_promotion_preset,
    tune_and_summarize,
)

SEPARATION_KINDS = ("c2ucb", "pc2ucb", "rwts", "awts")


def report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


## ---------------------------------------------------------------------------
## Shared sweeps.


@pytest.fixture(scope="module")
def clustered_sweep():
    """Tuned 4-policy sweep on the orthogonal-cluster benchmark, 25 seeds."""
    cfg = clustered_preset(policies=SEPARATION_KINDS, trials=25, seed=0)
    start = time.monotonic()
    results = run_experiment(cfg, threads=4)
    summary = tune_and_summarize(cfg, results)
    elapsed = time.monotonic() - start
    return cfg, results, summary, elapsed


@pytest.fixture(scope="module")
def containment_runs():
    cfg = ExperimentConfig(
        environment="clustered",
        policies=("c2ucb",),
        trials=500,
        seed=11,
        delta=0.05,
        out_dir="unused",
        env_options={"d": 5, "n_arms": 40, "k": 3, "rounds": 50, "angle": 0.9},
    )
    spec = PolicySpec(kind="c2ucb", lam=1.0, delta=cfg.delta)
    start = time.monotonic()
    logs = []
    for trial in range(cfg.trials):
        env = build_env(cfg, trial)
        logs.append(run_cell(cfg, env, spec, 0, 0, trial))
    return logs, time.monotonic() - start


@pytest.fixture(scope="module")
def potential_runs():
    """10^3 randomized trajectories cycling lambda through 0.5, 1, k, 2k."""
    rng = np.random.default_rng(2024)
    start = time.monotonic()
    out = []
    for i in range(1000):
        d = int(rng.integers(3, 9))
        N = int(rng.integers(d - 1, 61))
        k = int(rng.integers(1, min(N, 12) + 1))
        T = int(rng.integers(5, 31))
        lam = [0.5, 1.0, float(k), 2.0 * float(k)][i % 4]
        kind = ("greedy", "c2ucb", "pc2ucb", "rwts", "awts")[i % 5]
        p2 = float(10.0 ** rng.uniform(-1, 1))
        cfg = ExperimentConfig(
            environment="clustered",
            policies=(kind,),
            trials=1,
            seed=i,
            out_dir="unused",
            env_options={
                "d": d,
                "n_arms": N,
                "k": k,
                "rounds": T,
                "angle": float(rng.uniform(0.0, math.pi / 2)),
            },
        )
        env = build_env(cfg, 0)
        spec = cfg.policy_spec(kind, lam, p2)
        log = run_cell(cfg, env, spec, 0, 0, 0)
        out.append((log, env.params(cfg.delta), lam))
    return out, time.monotonic() - start


@pytest.fixture(scope="module")
def promotion_sweep():
    cfg = synthetic_promotion_preset(trials=10, seed=3)
    start = time.monotonic()
    results = run_experiment(cfg, threads=4)
    summary = tune_and_summarize(cfg, results)
    return cfg, results, summary, time.monotonic() - start


## ---------------------------------------------------------------------------
## 1. Selection oracles agree with exhaustive search.


def test_oracle_exactness():
    rng = np.random.default_rng(7)
    start = time.monotonic()
    for _ in range(1000):
        N = int(rng.integers(1, 11))
        k = int(rng.integers(0, min(N, 4) + 1))
        scores = rng.standard_normal(N)
        if rng.random() < 0.5:
            scores = np.round(scores * 2) / 2  # force ties
        got = top_k_select(scores, k)
        ref = brute_force_select(scores, TopK(k))
        assert got.arm == ref.arm, (scores, k)
        assert abs(got.objective - ref.objective) <= 1e-12
    for _ in range(1000):
        U = int(rng.integers(1, 11))
        M = int(rng.integers(1, 4))
        k = int(rng.integers(1, min(U, 4) + 1))
        scores = rng.standard_normal(U * M)
        if rng.random() < 0.5:
            scores = np.round(scores * 2) / 2
        got = promotion_select(scores, U, M, k)
        ref = brute_force_select(scores, PromotionAssignment(U, M, k))
        assert got.arm == ref.arm, (scores, U, M, k)
        assert abs(got.objective - ref.objective) <= 1e-12
    elapsed = time.monotonic() - start
    report(
        "oracle exactness",
        elapsed < 10.0,
        f"2x1000 instances, zero mismatches, {elapsed:.1f}s (budget 10s)",
    )


## ---------------------------------------------------------------------------
## 2. Incremental factorization matches dense solves; posterior sampler
##    covariance matches the scaled inverse design matrix.


def test_linear_algebra_fidelity():
    rng = np.random.default_rng(99)
    start = time.monotonic()
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 21))
        n = int(rng.integers(1, 501))
        lam = float(10.0 ** rng.uniform(-2, 2))
        st = RidgeState(d, lam)
        V = lam * np.eye(d)
        b = np.zeros(d)
        X = rng.standard_normal((n, d))
        X /= np.maximum(1.0, np.linalg.norm(X, axis=1))[:, None]
        r = rng.standard_normal(n)
        for i in range(n):
            st.rank_one_update(X[i], float(r[i]))
        V += X.T @ X
        b += X.T @ r
        theta_ref = np.linalg.solve(V, b)
        err_t = np.linalg.norm(st.theta_hat() - theta_ref) / max(
            1.0, np.linalg.norm(theta_ref)
        )
        probes = rng.standard_normal((8, d))
        w_ref = np.sqrt(np.einsum("ij,jk,ik->i", probes, np.linalg.inv(V), probes))
        err_w = float(np.max(np.abs(st.widths(probes) - w_ref) / w_ref))
        worst = max(worst, err_t, err_w)
    assert worst <= 1e-9, worst
    # posterior sampler second moments
    st = RidgeState(3, 0.7)
    gen = np.random.default_rng(5)
    for _ in range(40):
        x = gen.standard_normal(3)
        x /= max(1.0, np.linalg.norm(x))
        st.rank_one_update(x, float(gen.standard_normal()))
    v = 1.3
    mean = st.theta_hat()
    draws = np.stack(
        [st.sample_posterior(mean, v, np.random.default_rng(10_000 + s)) for s in range(100_000)]
    )
    emp = np.cov(draws.T)
    target = v * v * np.linalg.inv(st.V)
    tol = 5e-2 * v * v * float(np.max(np.abs(np.linalg.inv(st.V))))
    cov_err = float(np.max(np.abs(emp - target)))
    assert cov_err <= tol, (cov_err, tol)
    elapsed = time.monotonic() - start
    report(
        "linear-algebra fidelity",
        elapsed < 60.0,
        f"worst relative error {worst:.2e} (tol 1e-09), "
        f"covariance error {cov_err:.2e} (tol {tol:.2e}), "
        f"{elapsed:.1f}s (budget 60s)",
    )


## ---------------------------------------------------------------------------
## 3. Elliptical potential bounds hold on every randomized trajectory.


def test_potential_bounds(potential_runs):
    runs, elapsed = potential_runs
    violations = 0
    for log, params, lam in runs:
        chk = check_potential_bounds(log, params, lam)
        if chk.violated:
            violations += 1
    report(
        "potential bounds",
        violations == 0 and elapsed < 60.0,
        f"{len(runs)} trajectories, {violations} violations, "
        f"{elapsed:.1f}s (budget 60s)",
    )


## ---------------------------------------------------------------------------
## 4. The theoretical confidence radius contains the estimator.


def test_confidence_containment(containment_runs):
    logs, elapsed = containment_runs
    held = sum(
        1
        for log in logs
        if all(rec.estimator_distance <= rec.confidence_radius for rec in log.records)
    )
    frac = held / len(logs)
    report(
        "confidence containment",
        frac >= 0.92 and elapsed < 120.0,
        f"all-round containment in {held}/{len(logs)} trajectories "
        f"({frac:.1%}, need >= 92%), {elapsed:.1f}s (budget 120s)",
    )


## ---------------------------------------------------------------------------
## 5. The three-part regret split telescopes to pseudo-regret everywhere.


def test_regret_decomposition_identity(
    clustered_sweep, containment_runs, potential_runs, promotion_sweep
):
    logs = []
    logs.extend(clustered_sweep[1].values())
    logs.extend(containment_runs[0])
    logs.extend(log for log, _, _ in potential_runs[0])
    logs.extend(promotion_sweep[1].values())
    worst = 0.0
    for log in logs:
        parts = regret_decomposition(log)
        total = pseudo_regret(log)
        err = abs(sum(parts) - total) / max(1.0, abs(total))
        worst = max(worst, err)
    report(
        "regret decomposition identity",
        worst <= 1e-9,
        f"{len(logs)} trajectories, worst relative error {worst:.2e} (tol 1e-09)",
    )


## ---------------------------------------------------------------------------
## 6. Arm-wise randomization beats its deterministic/round-wise counterpart
##    on the orthogonal-cluster benchmark.


def test_clustered_separation(clustered_sweep):
    cfg, results, summary, elapsed = clustered_sweep
    lines = []
    ok = elapsed < 600.0
    for randomized, baseline in (("pc2ucb", "c2ucb"), ("awts", "rwts")):
        diff = (
            summary.policies[randomized].per_trial_best
            - summary.policies[baseline].per_trial_best
        )
        n = diff.shape[0]
        se = float(diff.std(ddof=1) / math.sqrt(n))
        gap = float(diff.mean())
        ok = ok and gap > 2.0 * se
        lines.append(
            f"{randomized} - {baseline} = {gap:.1f} +- {se:.1f} (paired, n={n})"
        )
    report(
        "clustered separation",
        ok,
        "; ".join(lines) + f"; {elapsed:.1f}s (budget 600s)",
    )


## ---------------------------------------------------------------------------
## 7. The width-tie pathology: the deterministic policy stays inside one
##    cluster per round, the arm-wise sampler spreads immediately.


def test_single_cluster_pathology(clustered_sweep):
    cfg, results, summary, _ = clustered_sweep
    ccfg = build_env(cfg, 0).cfg
    labels = np.array([cluster_of_arm(ccfg, a) for a in range(ccfg.N)])
    best_c2 = summary.policies["c2ucb"].best_cell
    single = total = 0
    for trial in range(cfg.trials):
        for rec in results[("c2ucb", best_c2, trial)].records:
            total += 1
            if np.unique(labels[rec.arm.as_array()]).shape[0] == 1:
                single += 1
    single_frac = single / total
    best_aw = summary.policies["awts"].best_cell
    spread = 0
    for trial in range(cfg.trials):
        first = results[("awts", best_aw, trial)].records[0]
        if np.unique(labels[first.arm.as_array()]).shape[0] >= 3:
            spread += 1
    spread_frac = spread / cfg.trials
    report(
        "single-cluster pathology",
        single_frac >= 0.95 and spread_frac >= 0.95,
        f"c2ucb single-cluster rounds {single_frac:.1%} (need >= 95%); "
        f"awts >=3 clusters in round 1 for {spread_frac:.1%} of seeds (need >= 95%)",
    )


## ---------------------------------------------------------------------------
## 8. Per-arm optimism also orders the promotion benchmark.


def test_promotion_ordering(promotion_sweep):
    cfg, results, summary, elapsed = promotion_sweep
    pc = summary.policies["pc2ucb"].best_mean
    c2 = summary.policies["c2ucb"].best_mean
    report(
        "promotion ordering",
        pc >= c2,
        f"tuned mean cumulative reward pc2ucb {pc:.1f} >= c2ucb {c2:.1f} "
        f"over {cfg.trials} seeds; {elapsed:.1f}s",
    )


## ---------------------------------------------------------------------------
## 9. Same seed, same bytes.


def test_byte_determinism(tmp_path):
    def run(out):
        cfg = clustered_preset(
            trials=2,
            seed=17,
            lambda_grid=(1.0, 10.0),
            param2_grid=(1.0, 10.0),
            out_dir=str(out),
        )
        tune_and_summarize(cfg, run_experiment(cfg, threads=2))
        return cfg

    cfg = run(tmp_path / "a")
    run(tmp_path / "b")
    names = sorted(os.listdir(tmp_path / "a"))
    assert names == sorted(os.listdir(tmp_path / "b"))
    identical = all(
        (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
        for n in names
    )
    report(
        "byte determinism",
        identical,
        f"{len(names)} files byte-identical across two runs of the preset",
    )
