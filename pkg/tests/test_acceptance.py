"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line."""

import json
import math
import time
from pathlib import Path

import numpy as np

from plsopt.born import (
    DensityOperator,
    SpectralOperator,
    born_expectation,
    criterion46_via_born,
)
from plsopt.cli import ExperimentConfig, main
from plsopt.groups import (
    GroupElement,
    PiecewiseLinearMap,
    apply_K,
    orbit_invariant_nonzero_count,
    random_monotone_map,
    random_rotation,
)
from plsopt.model import FullParameter, aligned_eigenbasis, beta_of_eta, beta_of_theta, relevant_component_count
from plsopt.optimality import big_F, corollary2_check, tau, thm4_criterion, thm5_criterion
from plsopt.population import krylov_projection, run_population_pls, verify_krylov_equivalence
from plsopt.priors import GammaPrior
from plsopt.simulation import build_population, msep_experiment

from conftest import planted_population, random_phi, random_triple

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "thm7_dominance.json"


def test_1_exact_decomposition(acceptance_log):
    rng = np.random.default_rng(101)
    triples = [random_triple(rng, 10) for _ in range(1000)]
    start = time.perf_counter()
    worst, sign_errors = 0.0, 0
    for phi, theta, eta in triples:
        be = beta_of_eta(eta, aligned_eigenbasis(phi))
        t_eta, t_theta = tau(be, phi), tau(beta_of_theta(theta), phi)
        F = big_F(phi, theta, eta)
        worst = max(worst, abs(t_eta - t_theta - F) / max(1.0, abs(t_eta)))
        sign_errors += np.sign(F) != np.sign(t_eta - t_theta)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and sign_errors == 0 and elapsed < 5.0
    acceptance_log(
        1, ok, f"1000 instances, max rel. residual {worst:.2e} (tol 1e-10), sign mismatches {sign_errors}, {elapsed:.2f}s (< 5s)"
    )
    assert ok


def test_2_population_auto_stop(acceptance_log):
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    wrong_stop, worst_ratio, worst_err = 0, 0.0, 0.0
    for _ in range(500):
        p = int(rng.integers(2, 13))
        m = int(rng.integers(1, p))
        phi, *_ = planted_population(rng, p, m)
        state, beta, steps = run_population_pls(phi)
        wrong_stop += steps != m
        worst_ratio = max(worst_ratio, state.next_weight_norm / np.linalg.norm(state.weights[0]))
        worst_err = max(worst_err, float(np.linalg.norm(beta - phi.beta)))
    elapsed = time.perf_counter() - start
    ok = wrong_stop == 0 and worst_ratio <= 1e-8 and worst_err <= 1e-7 and elapsed < 10.0
    acceptance_log(
        2,
        ok,
        f"500 planted populations, wrong stops {wrong_stop}, max |w_m+1|/|w_1| {worst_ratio:.2e}, "
        f"max beta error {worst_err:.2e}, {elapsed:.2f}s (< 10s)",
    )
    assert ok


def projection_oracle(phi, a):
    """Independent Sigma-projection of beta onto the first a Krylov vectors (QR + Cholesky lstsq)."""
    S, s = phi.sigma_xx, phi.sigma_xy
    cols = [s / np.linalg.norm(s)]
    for _ in range(a - 1):
        v = S @ cols[-1]
        cols.append(v / np.linalg.norm(v))
    Q, _ = np.linalg.qr(np.column_stack(cols))
    L = np.linalg.cholesky(S)
    c, *_ = np.linalg.lstsq(L.T @ Q, L.T @ np.linalg.solve(S, s), rcond=None)
    return Q @ c


def test_3_krylov_equivalence(acceptance_log):
    rng = np.random.default_rng(303)
    false_count, worst = 0, 0.0
    for _ in range(200):
        phi = random_phi(rng, int(rng.integers(1, 9)))
        false_count += not verify_krylov_equivalence(phi)
        m = relevant_component_count(phi)
        _, beta_pls, _ = run_population_pls(phi, max_steps=m)
        oracle = projection_oracle(phi, m)
        worst = max(worst, float(np.linalg.norm(beta_pls - oracle) / max(1.0, np.linalg.norm(oracle))))
        worst = max(worst, float(np.linalg.norm(krylov_projection(phi, m) - oracle) / max(1.0, np.linalg.norm(oracle))))
    ok = false_count == 0 and worst <= 1e-7
    acceptance_log(3, ok, f"200 SPD instances, failures {false_count}, max oracle disagreement {worst:.2e} (tol 1e-7)")
    assert ok


def test_4_corollary2_soundness(acceptance_log):
    rng = np.random.default_rng(404)
    satisfied, violations = 0, 0
    for i in range(10_000):
        phi, theta, eta = random_triple(rng, 10, near_hm=bool(i % 2))
        rep = corollary2_check(phi, theta, eta)
        if rep.satisfied:
            satisfied += 1
            violations += not rep.details["F"] > 0
    ok = violations == 0 and satisfied > 0
    acceptance_log(4, ok, f"10000 instances, {satisfied} satisfy the quarter-variance condition, violations {violations}")
    assert ok


def random_design(rng):
    p = int(rng.integers(2, 11))
    m = int(rng.integers(1, p))
    lam = np.sort(rng.uniform(0.1, 10.0, p))[::-1]
    prior = GammaPrior.normal(rng.normal(0.0, 2.0, m), rng.uniform(0.2, 2.0, m))
    irr = rng.normal(0.0, 1.0, p - m) * 10.0 ** rng.uniform(-3, 0)
    return prior, lam, irr


def test_5_thm5_implies_thm4(acceptance_log):
    rng = np.random.default_rng(505)
    designs = []
    while len(designs) < 100:
        prior, lam, irr = random_design(rng)
        if thm5_criterion(prior, lam, irr).satisfied:
            designs.append((prior, lam, irr))
    violations = 0
    for prior, lam, irr in designs:
        for _ in range(50):
            zeta = rng.normal(0.0, 3.0, lam.shape[0])
            violations += not thm4_criterion(prior, lam, irr, zeta).satisfied
    worst_z = 0.0
    for k, (prior, lam, irr) in enumerate(designs[:20]):
        zeta = rng.normal(0.0, 3.0, lam.shape[0])
        exact = thm4_criterion(prior, lam, irr, zeta, mode="analytic")
        mc = thm4_criterion(prior, lam, irr, zeta, mode="monte_carlo", n_draws=100_000, seed=k)
        worst_z = max(worst_z, abs(mc.rhs - exact.rhs) / mc.stderr)
    ok = violations == 0 and worst_z <= 3.0
    acceptance_log(
        5, ok, f"100 designs x 50 rivals, thm4 violations {violations}; analytic vs 1e5-draw MC max |z| {worst_z:.2f} (<= 3, 20 designs)"
    )
    assert ok


def test_6_thm7_dominance(acceptance_log):
    raw = json.loads(CONFIG.read_text())
    config = ExperimentConfig.from_dict(raw, seed=1)
    phi, _ = build_population(config.design)
    start = time.perf_counter()
    results = msep_experiment(
        config.design, config.estimator_specs(phi), config.replicates, threads=1, criteria=config.criteria, phi=phi
    )
    elapsed = time.perf_counter() - start
    pls = next(r for r in results if r.estimator == "pls:2")
    rep = pls.criteria[0]
    thm7_ok = rep.satisfied and rep.margin > 3 * rep.stderr
    pls_hi = pls.msep_mean + 1.96 * pls.msep_stderr
    gaps = {
        r.estimator: (r.msep_mean - 1.96 * r.msep_stderr) - pls_hi for r in results if r is not pls
    }
    rivals_ok = all(g > 0 for g in gaps.values())
    worst = min(gaps, key=gaps.get)
    ok = thm7_ok and rivals_ok and elapsed < 120 and pls.n_replicates == 2000
    acceptance_log(
        6,
        ok,
        f"thm7 margin {rep.margin:.4f} = {rep.margin / rep.stderr:.1f} stderr (> 3); msep(pls:2) {pls.msep_mean:.4f}; "
        f"smallest 95% interval gap {gaps[worst]:+.4f} vs {worst}; {elapsed:.1f}s (< 120s)",
    )
    assert ok


def random_k(rng, p):
    return GroupElement(random_rotation(rng, p), tuple(random_monotone_map(rng) for _ in range(p)))


def test_7_orbit_invariance(acceptance_log):
    rng = np.random.default_rng(707)
    changed = 0
    for _ in range(500):
        p = int(rng.integers(2, 9))
        m = int(rng.integers(1, p))
        phi, *_ = planted_population(rng, p, m)
        before = orbit_invariant_nonzero_count(phi)
        changed += orbit_invariant_nonzero_count(apply_K(random_k(rng, p), phi)) != before
    phi = FullParameter(np.diag([3.0, 2.0, 1.0]), [3.0, 0.0, 0.0], 1.0)
    shift = PiecewiseLinearMap([0.0, 1.0], [1.0, 2.0])
    before = orbit_invariant_nonzero_count(phi)
    after = orbit_invariant_nonzero_count(apply_K(GroupElement(np.eye(3), (shift,) * 3), phi))
    ok = changed == 0 and after != before
    acceptance_log(7, ok, f"500 K-actions with g(0)=0, count changes {changed}; g(0)=1 counterexample count {before} -> {after}")
    assert ok


def random_unitary(rng, r):
    Z = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def test_8_born_identities(acceptance_log):
    rng = np.random.default_rng(808)
    xi = lambda v: v * v - 0.3 * v
    worst_mean = 0.0
    for r in range(1, 17):
        for _ in range(5):
            op = SpectralOperator(rng.standard_normal(r), random_unitary(rng, r))
            val = born_expectation(DensityOperator.uniform(r), op, xi)
            worst_mean = max(worst_mean, abs(val - math.fsum(xi(v) for v in op.eigenvalues) / r))
    worst_sum = 0.0
    for _ in range(50):
        r = int(rng.integers(2, 9))
        probs = rng.dirichlet(np.ones(r))
        U = random_unitary(rng, r)
        op = SpectralOperator(rng.standard_normal(r), random_unitary(rng, r))
        V = op.eigenvectors
        brute = sum(
            probs[i] * abs(np.vdot(U[:, i], V[:, k])) ** 2 * xi(op.eigenvalues[k]) for i in range(r) for k in range(r)
        )
        val = born_expectation(DensityOperator.from_probabilities(probs, U), op, xi)
        worst_sum = max(worst_sum, abs(val - brute))
    prior = GammaPrior.normal([0.0], [1.0])
    e64 = abs(criterion46_via_born(prior, [1.0], 1, 64) - 1.0)
    e128 = abs(criterion46_via_born(prior, [1.0], 1, 128) - 1.0)
    ok = worst_mean <= 1e-12 and worst_sum <= 1e-10 and e128 <= 0.5 * e64
    acceptance_log(
        8,
        ok,
        f"uniform-state mean error {worst_mean:.1e} (<= 1e-12), double-sum error {worst_sum:.1e} (<= 1e-10), "
        f"grid error 64: {e64:.3e}, 128: {e128:.3e} (ratio {e64 / e128:.2f} >= 2)",
    )
    assert ok


def test_9_determinism(acceptance_log, tmp_path, capsys):
    runs = {"a": "1", "b": "1", "c": "8"}
    for name, threads in runs.items():
        code = main(["simulate", str(CONFIG), "--seed", "42", "--threads", threads, "--output-dir", str(tmp_path / name)])
        assert code == 0
    capsys.readouterr()
    files = ("results.csv", "results.json")
    same_seed = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files)
    same_threads = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "c" / f).read_bytes() for f in files)
    ok = same_seed and same_threads
    acceptance_log(
        9, ok, f"simulate --seed 42: repeat run identical {same_seed}, --threads 1 vs 8 identical {same_threads}"
    )
    assert ok
