"""Acceptance criteria 1-7, each at its stated tolerance.

Every test prints one PASS/FAIL line; the lines are repeated in the
terminal summary by conftest.
"""
import time

import mpmath
import numpy as np

from conftest import ACCEPTANCE_LINES
from rqipcheck.concentration import (
    ConcentrationParams,
    combined_bound,
    hoeffding_term,
    tail_term,
    truncation_threshold,
)
from rqipcheck.experiments import StudyConfig, default_grid, run_concentration_study, run_study, study_vector
from rqipcheck.geometry import (
    alpha_power_sum,
    alpha_quasinorm,
    binomial_and_bound,
    build_net,
    covering_bound,
    quasi_triangle_constant,
    verify_net,
)
from rqipcheck.rqip import (
    ComplexityInputs,
    RqipConfig,
    generate_matrix,
    moment_stat,
    net_epsilon_for_delta,
    rqip_check,
    sample_complexity,
)
from rqipcheck.stable import StableLaw, stable_abs_moment_constant
from rqipcheck.streams import Stream

mp = mpmath.mpf


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_criterion_1_moment_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for alpha, p, gamma in ((0.5, 0.2, 1.0), (0.7, 0.3, 2.0)):
        law = StableLaw(alpha, gamma)
        C = stable_abs_moment_constant(alpha, p)
        for seed in range(3):
            m = generate_matrix(law, 10 ** 6, 5, f"accept1/{alpha}", seed)
            for pattern in ("e1", "sparse3"):
                x = study_vector(pattern, 5, seed)
                closed = C * (gamma * alpha_quasinorm(x, alpha)) ** p
                worst = max(worst, abs(moment_stat(m, x, p) / closed - 1))
    elapsed = time.perf_counter() - t0
    report(1, worst < 0.03 and elapsed < 30,
           f"max |empirical/closed - 1| = {worst:.4f} (< 0.03), runtime {elapsed:.1f}s (< 30s)")


def _mp_params(alpha, p, gamma, c0, cp):
    a, p, g, c0, cp = map(mp, (alpha, p, gamma, c0, cp))
    ctail = (1 - a) / (mpmath.gamma(2 - a) * mpmath.cos(mpmath.pi * a / 2))
    r = a / p
    return a, p, g, c0, cp, r, ctail * g ** a / (r - 1)


def test_criterion_2_formula_exactness():
    rng = np.random.default_rng(2026)
    worst = {}

    def check(name, got, want):
        want = float(want)
        rel = abs(got - want) / abs(want) if want != 0 else abs(got)
        worst[name] = max(worst.get(name, 0.0), rel)

    with mpmath.workdps(50):
        for _ in range(20):
            alpha = float(rng.uniform(0.05, 0.99))
            p = float(alpha * rng.uniform(0.05, 0.95))
            gamma = float(rng.uniform(0.2, 5.0))
            c0 = float(rng.uniform(0.02, 0.48))
            cp = float(rng.uniform(0.2, 5.0))
            eps = float(rng.uniform(0.05, 3.0))
            M = int(rng.integers(1, 10 ** 7))
            prm = ConcentrationParams(StableLaw(alpha, gamma), p, c0, cp)
            a, pp, g, c0m, cpm, r, K = _mp_params(alpha, p, gamma, c0, cp)
            T = (cpm / mp(eps)) ** (1 / (r - 1)) * mp(M) ** c0m
            check("truncation_threshold", truncation_threshold(prm, eps, M), T)
            # the Hoeffding term is checked where it is not clamped
            Th = float(rng.uniform(0.5, 50.0))
            Mh = int(rng.integers(1, 2000))
            h = 2 * mpmath.exp(-mp(Mh) * mp(eps) ** 2 / (8 * mp(Th) ** 2))
            check("hoeffding_term", hoeffding_term(eps, Mh, Th), h)
            Tt = float(rng.uniform(0.1, 100.0))
            check("tail_term", tail_term(prm, eps, Tt), 4 * K / mp(eps) * mp(Tt) ** (1 - r))
            hb = 2 * mpmath.exp(-mp(M) * mp(eps) ** 2 / (8 * T ** 2))
            tb = 4 * K / mp(eps) * T ** (1 - r)
            check("combined_bound", combined_bound(prm, eps, M).total, min(hb, 2) + tb)
            check("tail identity", tail_term(prm, eps, truncation_threshold(prm, eps, M)),
                  4 * K / cpm * mp(M) ** (-c0m * (r - 1)))

            N = int(rng.integers(1, 10 ** 5))
            k = int(rng.integers(1, min(N, 30) + 1))
            ce = float(rng.uniform(0.01, 0.99))
            C = mpmath.power(2, 1 / a - 1)
            cov = ((2 * C ** 2 + C) / mp(ce)) ** k * mpmath.binomial(N, k)
            check("covering_bound", covering_bound(alpha, ce, k, N).log10, mpmath.log10(cov))
            exact, upper = binomial_and_bound(N, k)
            check("binomial exact", float(exact), mpmath.binomial(N, k))
            check("binomial upper", upper, (mpmath.e * N / k) ** k)
            delta = float(rng.uniform(0.01, 0.99))
            check("net_epsilon_for_delta", net_epsilon_for_delta(delta, p), (mp(delta) / 3) ** (1 / pp))
            eta = float(rng.uniform(0.01, 0.99))
            ccon = float(rng.uniform(0.2, 5.0))
            inner = (2 * mp(ccon) / mp(eta) * (2 * C ** 2 + C) ** k * (3 / mp(delta)) ** (k / pp)
                     * (mpmath.e * N / k) ** k)
            res = sample_complexity(ComplexityInputs(N, k, delta, eta, alpha, p, c0, ccon))
            check("sample_complexity", res.log10_M, mpmath.log10(inner) / (c0m * (r - 1)))
    bad = {k: v for k, v in worst.items() if v > 1e-10}
    summary = ", ".join(f"{k} {v:.1e}" for k, v in sorted(worst.items()))
    report(2, not bad, f"worst relative error per formula over 20 points (<= 1e-10): {summary}")


def test_criterion_3_concentration_decay():
    t0 = time.perf_counter()
    grid = default_grid("concentration")
    cell = grid[0]
    assert (cell["alpha"], cell["p"], cell["eps_rel"], cell["trials"]) == (0.5, 0.25, 0.2, 2000)
    assert cell["Ms"] == [2 ** j for j in range(8, 15)]
    res = run_concentration_study(StudyConfig("concentration", 20260, grid, workers=1))
    elapsed = time.perf_counter() - t0
    fit = res.extras[0]["fit"]
    informative = [r for r in res.rows if r["bound_total"] <= 1]
    violations = [r["M"] for r in informative if r["p_hat"] > r["bound_total"]]
    ok = fit["slope"] < 0 and fit["r_squared"] > 0.5 and not violations and elapsed < 300
    report(3, ok, f"slope {fit['slope']:.3f} (< 0), r^2 {fit['r_squared']:.3f} (> 0.5), "
                  f"zero rows excluded {fit['excluded_rows']}, bound violations {violations} "
                  f"(bound <= 1 at {len(informative)} of {len(res.rows)} M values), "
                  f"runtime {elapsed:.1f}s (< 300s)")


def test_criterion_4_quasinorm_properties():
    n = 10 ** 5
    rng = np.random.default_rng(4)
    counts = {"homogeneity": 0, "power subadditivity": 0, "alpha-power subadditivity": 0, "quasi-triangle": 0}
    slack = 1 + 1e-12  # floating-point rounding only
    for alpha in (0.3, 0.5, 0.8):
        C = quasi_triangle_constant(alpha)
        # heavy-ish magnitudes with exact zeros mixed in
        X = rng.standard_cauchy((n, 6)) * (rng.random((n, 6)) < 0.7)
        Y = rng.standard_cauchy((n, 6)) * (rng.random((n, 6)) < 0.7)
        c = rng.standard_cauchy(n)
        a, b = rng.standard_cauchy(n), rng.standard_cauchy(n)
        pw = rng.uniform(0.01, 0.99, n)
        counts["power subadditivity"] += int(np.sum(np.abs(a + b) ** pw > (np.abs(a) ** pw + np.abs(b) ** pw) * slack))
        sx, sy = alpha_power_sum(X, alpha, axis=1), alpha_power_sum(Y, alpha, axis=1)
        counts["alpha-power subadditivity"] += int(np.sum(alpha_power_sum(X + Y, alpha, axis=1) > (sx + sy) * slack))
        for i in range(n):
            nx = alpha_quasinorm(X[i], alpha)
            if abs(alpha_quasinorm(c[i] * X[i], alpha) - abs(c[i]) * nx) > 1e-12 * abs(c[i]) * nx:
                counts["homogeneity"] += 1
            if alpha_quasinorm(X[i] + Y[i], alpha) > C * (nx + alpha_quasinorm(Y[i], alpha)) * slack:
                counts["quasi-triangle"] += 1
    report(4, not any(counts.values()),
           "violations over 10^5 instances at alpha in {0.3, 0.5, 0.8}: "
           + ", ".join(f"{k} {v}" for k, v in counts.items()))


def test_criterion_5_net_construction():
    t0 = time.perf_counter()
    net = build_net(0.5, 0.25, 2, 5, "unit_ball", 5000, Stream(5, "accept5"))
    try:
        net.check_invariants()
        separated = True
    except Exception:
        separated = False
    cov = verify_net(net, 10 ** 4, Stream(5, "accept5/verify"))
    elapsed = time.perf_counter() - t0
    bound = covering_bound(0.5, 0.25, 2, 5).value
    ok = separated and net.size <= 16000 and cov.coverage_rate == 1.0 and elapsed < 60
    report(5, ok, f"separated {separated}, size {net.size} (<= 16000, bound {bound:.0f}), "
                  f"coverage {cov.coverage_rate} over 10^4 points, runtime {elapsed:.1f}s (< 60s)")


def test_criterion_6_rqip_oracle_equivalence():
    law = StableLaw(0.5)
    agree, passes, worst = 0, 0, 0.0
    for seed in range(10):
        m = generate_matrix(law, 10 ** 5, 8, "accept6", seed)
        net = rqip_check(m, RqipConfig(1, 0.5, 0.2, "net"))
        brute = rqip_check(m, RqipConfig(1, 0.5, 0.2, "brute_force_k1"))
        gap = abs(net.max_deviation - brute.max_deviation)
        worst = max(worst, gap)
        agree += net.passed == brute.passed and gap <= 1e-9
        passes += net.passed
    report(6, agree == 10 and passes >= 9,
           f"agreement on {agree}/10 seeds (max gap {worst:.1e} <= 1e-9), passed on {passes}/10 (>= 9)")


def test_criterion_7_determinism():
    same = {}
    for study in ("moments", "concentration", "nets"):
        grid = default_grid(study)
        a = run_study(StudyConfig(study, 777, grid, workers=1)).to_csv()
        b = run_study(StudyConfig(study, 777, grid, workers=8)).to_csv()
        same[study] = a == b
    report(7, all(same.values()),
           "bit-identical CSV with workers 1 vs 8: " + ", ".join(f"{k} {v}" for k, v in same.items()))
