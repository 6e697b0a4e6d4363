import json
import math

import mpmath
import numpy as np
import pytest

from rqipcheck.errors import CapacityError, DomainError
from rqipcheck.geometry import SparseVector, alpha_quasinorm, net_constant
from rqipcheck.rqip import (
    ComplexityInputs,
    MeasurementMatrix,
    RqipConfig,
    RqipReport,
    default_strategy,
    generate_matrix,
    moment_stat,
    net_epsilon_for_delta,
    rqip_check,
    rqip_deviation,
    sample_complexity,
)
from rqipcheck.stable import StableLaw, stable_abs_moment_constant
from rqipcheck.streams import Stream

LAW = StableLaw(0.5)


def unit(N, j):
    e = np.zeros(N)
    e[j] = 1.0
    return e


def exact_fixture(M, N, p, law=LAW):
    # every column statistic equals C (gamma)^p exactly
    level = (stable_abs_moment_constant(law.alpha, p) * law.gamma ** p) ** (1.0 / p)
    return MeasurementMatrix(law, np.full((M, N), level), "fixture")


def test_generate_matrix_deterministic_and_scaled():
    a = generate_matrix(LAW, 50, 4, "m", 3)
    b = generate_matrix(LAW, 50, 4, "m", 3)
    assert np.array_equal(a.entries, b.entries) and a.rows == 50 and a.cols == 4
    two = generate_matrix(StableLaw(0.5, 2.0), 50, 4, "m", 3)
    assert np.array_equal(two.entries, 2.0 * a.entries)
    assert not np.array_equal(generate_matrix(LAW, 50, 4, "other", 3).entries, a.entries)


def test_generate_matrix_limits():
    with pytest.raises(DomainError):
        generate_matrix(LAW, 0, 4, "m")
    with pytest.raises(CapacityError):
        generate_matrix(LAW, 10 ** 6, 10 ** 4, "m")


def test_column_moment():
    m = generate_matrix(LAW, 10 ** 6, 1, "col", 1)
    assert moment_stat(m, [1.0], 0.2) == pytest.approx(stable_abs_moment_constant(0.5, 0.2), rel=0.02)


def test_moment_stat_examples():
    m = generate_matrix(LAW, 1000, 5, "stat", 2)
    assert moment_stat(m, np.zeros(5), 0.2) == 0.0
    assert moment_stat(m, unit(5, 3), 0.2) == pytest.approx(np.mean(np.abs(m.entries[:, 3]) ** 0.2), rel=1e-13)
    row = generate_matrix(LAW, 1, 5, "row", 2)
    x = np.array([0.0, 1.5, 0.0, -2.0, 0.0])
    assert moment_stat(row, x, 0.3) == pytest.approx(abs(row.entries[0] @ x) ** 0.3, rel=1e-13)
    with pytest.raises(DomainError):
        moment_stat(m, unit(5, 0), 0.5)
    with pytest.raises(DomainError):
        moment_stat(m, np.ones(4), 0.2)


def test_deviation_exact_fixture():
    m = exact_fixture(7, 3, 0.2)
    for j in range(3):
        assert rqip_deviation(m, unit(3, j), 0.2) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(DomainError):
        rqip_deviation(m, np.zeros(3), 0.2)


def test_deviation_homogeneous():
    m = generate_matrix(LAW, 2000, 6, "hom", 4)
    rng = np.random.default_rng(4)
    for _ in range(50):
        x = np.zeros(6)
        x[rng.choice(6, 2, replace=False)] = rng.normal(size=2)
        d = rqip_deviation(m, x, 0.2)
        for c in (-3.0, 1e-4, 7e5):
            assert rqip_deviation(m, c * x, 0.2) == pytest.approx(d, rel=1e-10, abs=1e-13)


def test_deviation_small_at_large_M():
    x = np.array([0.0, 0.3, 0.0, -1.2])
    x /= alpha_quasinorm(x, 0.5)
    hits = sum(rqip_deviation(generate_matrix(LAW, 10 ** 5, 4, f"s{s}", s), SparseVector(x, 2), 0.2) < 0.1
               for s in range(100))
    assert hits >= 95


def test_projection_stability():
    # <w_i, x> for unit-norm x has the moment of a standard variable
    for alpha, p in ((0.5, 0.2), (0.7, 0.3)):
        law = StableLaw(alpha)
        x = np.array([0.5, 0.0, -1.0, 2.0, 0.0])
        x /= alpha_quasinorm(x, alpha)
        m = generate_matrix(law, 10 ** 6, 5, "proj", 6)
        assert moment_stat(m, x, p) == pytest.approx(stable_abs_moment_constant(alpha, p), rel=0.03)


def test_config_validation():
    for args in ((0, 0.5, 0.2), (1, 1.0, 0.2), (1, 0.5, 1.0), (2, 0.5, 0.2, "brute_force_k1"),
                 (1, 0.5, 0.2, "exhaustive")):
        with pytest.raises(DomainError):
            RqipConfig(*args)
    assert default_strategy(1, 8) == "net" and default_strategy(3, 8) == "random_directions"
    assert default_strategy(2, 100) == "random_directions"


def test_k1_net_matches_brute_force():
    m = generate_matrix(LAW, 10 ** 4, 8, "k1", 5)
    net = rqip_check(m, RqipConfig(1, 0.5, 0.2, "net"))
    brute = rqip_check(m, RqipConfig(1, 0.5, 0.2, "brute_force_k1"))
    assert net.passed == brute.passed
    assert abs(net.max_deviation - brute.max_deviation) <= 1e-9
    assert net.vectors_tested == 16 and brute.vectors_tested == 8
    assert net.net_epsilon == pytest.approx((0.5 / 3) ** 5)
    assert net.witness.support == brute.witness.support


def test_fixture_passes_every_strategy():
    m = exact_fixture(5, 4, 0.2)
    for strategy in ("net", "brute_force_k1"):
        rep = rqip_check(m, RqipConfig(1, 0.1, 0.2, strategy))
        assert rep.passed and rep.max_deviation == pytest.approx(0.0, abs=1e-14)


def test_passes_across_seeds():
    for s in range(10):
        m = generate_matrix(LAW, 10 ** 5, 8, f"seed{s}", s)
        assert rqip_check(m, RqipConfig(1, 0.5, 0.2, "brute_force_k1")).passed


def test_random_directions_strategy():
    m = generate_matrix(LAW, 5000, 6, "dir", 8)
    rep = rqip_check(m, RqipConfig(2, 0.5, 0.2, "random_directions", direction_count=500), Stream(8, "d"))
    again = rqip_check(m, RqipConfig(2, 0.5, 0.2, "random_directions", direction_count=500), Stream(8, "d"))
    assert rep.vectors_tested == 500 and rep.max_deviation == again.max_deviation
    assert rqip_deviation(m, rep.witness, 0.2) == pytest.approx(rep.max_deviation, rel=1e-10)
    assert len(rep.witness.support) <= 2


def test_net_strategy_k2():
    m = generate_matrix(LAW, 2000, 3, "k2", 9)
    rep = rqip_check(m, RqipConfig(2, 0.9, 0.4, "net", net_budget=300))
    assert rep.vectors_tested > 3
    assert rqip_deviation(m, rep.witness, 0.4) == pytest.approx(rep.max_deviation, rel=1e-10)


def test_report_round_trip_and_consistency():
    m = generate_matrix(LAW, 1000, 4, "json", 1)
    rep = rqip_check(m, RqipConfig(1, 0.5, 0.2, "net"))
    back = RqipReport.from_json(rep.to_json())
    assert back.to_dict() == rep.to_dict()
    keys = {"passed", "max_deviation", "witness", "vectors_tested", "strategy", "delta", "k", "p",
            "alpha", "gamma", "M", "N", "seed_label"}
    assert keys <= set(rep.to_dict())
    bad = rep.to_dict()
    bad["passed"] = not bad["passed"]
    with pytest.raises(DomainError):
        RqipReport.from_json(json.dumps(bad))


def test_net_epsilon_for_delta():
    assert net_epsilon_for_delta(0.3, 0.5) == pytest.approx(0.01, rel=1e-14)
    for bad in (0.0, 1.0, 3.0):
        with pytest.raises(DomainError):
            net_epsilon_for_delta(bad, 0.5)
    ds = np.linspace(0.05, 0.95, 10)
    vals = [net_epsilon_for_delta(d, 0.3) for d in ds]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    ps = np.linspace(0.05, 0.95, 10)
    vals = [net_epsilon_for_delta(0.4, p) for p in ps]
    # base delta/3 < 1, so the smaller exponent 1/p at larger p gives a larger radius
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert all(v < (1 / 3) ** (1 / 0.3) for v in [net_epsilon_for_delta(d, 0.3) for d in ds])


def test_complexity_example():
    inputs = ComplexityInputs(4, 1, 0.5, 0.5, 0.5, 0.25)
    assert inputs.c_con == 0.25 and inputs.C_net == 10.0
    res = sample_complexity(inputs)
    inner = 207360 * math.e
    assert inner == pytest.approx(5.6366e5, rel=1e-4)
    assert res.log10_M == pytest.approx(4 * math.log10(inner), rel=1e-12)
    assert res.log10_M == pytest.approx(23.004, abs=5e-4)
    with mpmath.workdps(50):
        assert res.M == int(mpmath.ceil(mpmath.mpf(207360) ** 4 * mpmath.e ** 4))


def _mp_complexity(N, k, delta, eta, alpha, p, c0, C_con, exact):
    mp = mpmath.mpf
    with mpmath.workdps(50):
        c_con = mp(c0) * (mp(alpha) / mp(p) - 1)
        C = mpmath.power(2, 1 / mp(alpha) - 1)
        b = mpmath.binomial(N, k) if exact else (mpmath.e * N / k) ** k
        inner = 2 * mp(C_con) / mp(eta) * (2 * C ** 2 + C) ** k * (3 / mp(delta)) ** (k / mp(p)) * b
        return mpmath.log10(inner) / c_con, mpmath.power(inner, 1 / c_con)


def test_complexity_high_precision_grid():
    rng = np.random.default_rng(12)
    for _ in range(20):
        alpha = float(rng.uniform(0.1, 0.95))
        p = float(alpha * rng.uniform(0.05, 0.8))
        N = int(rng.integers(1, 10 ** 6))
        k = int(rng.integers(1, min(N, 40) + 1))
        args = (N, k, float(rng.uniform(0.05, 0.95)), float(rng.uniform(0.01, 0.99)), alpha, p,
                float(rng.uniform(0.05, 0.45)), float(rng.uniform(0.5, 5)))
        for mode, exact in (("eN_over_k", False), ("binomial_exact", True)):
            res = sample_complexity(ComplexityInputs(*args), mode)
            want_log, want = _mp_complexity(*args, exact)
            assert res.log10_M == pytest.approx(float(want_log), rel=1e-10)
            if res.M is not None:
                assert abs(res.M - int(mpmath.ceil(want))) <= 1


def test_complexity_modes_and_monotone():
    base = dict(N=50, k=3, delta=0.5, eta=0.2, alpha=0.6, p=0.2)
    lg = lambda **kw: sample_complexity(ComplexityInputs(**{**base, **kw})).log10_M
    for N in (3, 10, 100, 10 ** 5):
        for k in range(1, 4):
            ci = ComplexityInputs(N, k, 0.5, 0.2, 0.6, 0.2)
            assert sample_complexity(ci, "binomial_exact").log10_M <= sample_complexity(ci).log10_M + 1e-12
    assert [lg(N=n) for n in (10, 100, 1000)] == sorted(lg(N=n) for n in (10, 100, 1000))
    assert lg(delta=0.2) > lg(delta=0.5) > lg(delta=0.9)
    assert lg(eta=0.01) > lg(eta=0.2) > lg(eta=0.99)
    assert lg(k=1) < lg(k=2) < lg(k=3)
    huge = sample_complexity(ComplexityInputs(10 ** 6, 40, 0.1, 0.01, 0.5, 0.01))
    assert huge.M is None and math.isfinite(huge.log10_M)
    with pytest.raises(DomainError):
        sample_complexity(ComplexityInputs(4, 1, 0.5, 0.5, 0.5, 0.25), "stirling")
    with pytest.raises(DomainError):
        ComplexityInputs(4, 5, 0.5, 0.5, 0.5, 0.25)


def test_net_constant_in_complexity():
    assert ComplexityInputs(4, 1, 0.5, 0.5, 0.3, 0.1).C_net == net_constant(0.3)
