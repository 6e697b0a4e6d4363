"""Empirical checks of the restricted quasiconvexity isometry property (RQIP).

A matrix W with rows w_i has the (delta, k)-RQIP when every k-sparse x obeys

    (1 - delta) C (gamma ||x||_alpha)^p <= mean_i |<w_i, x>|^p <= (1 + delta) C (gamma ||x||_alpha)^p

with C = E|X|^p for a standard SaS variable.  ``rqip_deviation`` returns the
relative error of the middle term, so the property at x reads D(x) <= delta.
Exhaustive checking is impossible for k >= 2; the checker reports which
vectors it tried.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from typing import NamedTuple

import numpy as np

from .concentration import ConcentrationParams
from .errors import CapacityError, DomainError
from .geometry import (
    SparseVector,
    alpha_quasinorm,
    build_net,
    net_constant,
    sample_k_dim,
)
from .stable import StableLaw, _draw, abs_power, stable_abs_moment_constant
from .streams import Stream

MATRIX_CAP = 10 ** 9
STRATEGIES = ("net", "random_directions", "brute_force_k1")


@dataclass(frozen=True)
class MeasurementMatrix:
    law: StableLaw
    entries: np.ndarray = field(repr=False)
    seed_label: str
    master_seed: int = 0

    @property
    def rows(self) -> int:
        return int(self.entries.shape[0])

    @property
    def cols(self) -> int:
        return int(self.entries.shape[1])


def generate_matrix(law: StableLaw, M: int, N: int, seed_label: str, master_seed: int = 0) -> MeasurementMatrix:
    """Dense M x N matrix of i.i.d. SaS entries, filled row-major from one labelled stream."""
    if int(M) != M or int(N) != N or M < 1 or N < 1:
        raise DomainError(f"matrix shape must be positive integers, got {M} x {N}")
    if M * N > MATRIX_CAP:
        raise CapacityError(f"matrix of {M * N} entries exceeds the cap {MATRIX_CAP}")
    rng = Stream(master_seed, f"matrix/{seed_label}").generator()
    w = _draw(law, int(M) * int(N), rng).reshape(int(M), int(N))
    return MeasurementMatrix(law, w, seed_label, master_seed)


def _check_p(law: StableLaw, p: float):
    if not 0.0 < p < law.alpha:
        raise DomainError(f"p must satisfy p in (0, alpha); got p={p}, alpha={law.alpha}")


def _vec(x, N):
    e = x.entries if isinstance(x, SparseVector) else np.asarray(x, dtype=np.float64).reshape(-1)
    if e.size != N:
        raise DomainError(f"vector has dimension {e.size}, matrix has {N} columns")
    return e


def moment_stat(m: MeasurementMatrix, x, p: float) -> float:
    """(1/M) sum_i |<w_i, x>|^p, using only the columns in the support of x."""
    _check_p(m.law, p)
    e = _vec(x, m.cols)
    s = np.flatnonzero(e)
    if s.size == 0:
        return 0.0
    y = m.entries[:, s] @ e[s]
    return float(np.mean(abs_power(y, p)))


def rqip_deviation(m: MeasurementMatrix, x, p: float) -> float:
    """|moment_stat / (C (gamma ||x||_alpha)^p) - 1|."""
    e = _vec(x, m.cols)
    if not np.any(e):
        raise DomainError("the deviation is undefined for the zero vector")
    ref = stable_abs_moment_constant(m.law.alpha, p) * (m.law.gamma * alpha_quasinorm(e, m.law.alpha)) ** p
    return abs(moment_stat(m, e, p) / ref - 1.0)


def net_epsilon_for_delta(delta: float, p: float) -> float:
    """(delta/3)^(1/p): net radius whose p-th power uses a third of the deviation budget."""
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    return (delta / 3.0) ** (1.0 / p)


@dataclass(frozen=True)
class RqipConfig:
    k: int
    delta: float
    p: float
    strategy: str = "net"
    net_budget: int = 2000
    direction_count: int = 10_000
    max_net_points: int = 200_000

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise DomainError(f"k must be a positive integer, got {self.k}")
        if not 0.0 < self.delta < 1.0:
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0.0 < self.p < 1.0:
            raise DomainError(f"p must lie in (0, alpha) with alpha < 1, got {self.p}")
        if self.strategy not in STRATEGIES:
            raise DomainError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.strategy == "brute_force_k1" and self.k != 1:
            raise DomainError("brute_force_k1 is exact only for k = 1")
        if self.net_budget < 1 or self.direction_count < 1:
            raise DomainError("net_budget and direction_count must be positive")


def default_strategy(k: int, N: int) -> str:
    return "net" if k <= 2 and N <= 16 else "random_directions"


@dataclass
class RqipReport:
    max_deviation: float
    witness: SparseVector
    vectors_tested: int
    passed: bool
    config: RqipConfig
    moment_constant_used: float
    alpha: float
    gamma: float
    M: int
    N: int
    seed_label: str
    net_epsilon: float | None = None

    def __post_init__(self):
        if self.passed != (self.max_deviation <= self.config.delta):
            raise DomainError("report inconsistent: passed must equal max_deviation <= delta")

    def to_dict(self) -> dict:
        w = self.witness
        s = list(w.support)
        return {
            "passed": self.passed,
            "max_deviation": self.max_deviation,
            "witness": {"support": s, "values": [float(v) for v in w.entries[s]]},
            "vectors_tested": self.vectors_tested,
            "strategy": self.config.strategy,
            "delta": self.config.delta,
            "k": self.config.k,
            "p": self.config.p,
            "alpha": self.alpha,
            "gamma": self.gamma,
            "M": self.M,
            "N": self.N,
            "seed_label": self.seed_label,
            "net_epsilon": self.net_epsilon,
            "moment_constant_used": self.moment_constant_used,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "RqipReport":
        d = json.loads(text)
        cfg = RqipConfig(int(d["k"]), float(d["delta"]), float(d["p"]), d["strategy"])
        StableLaw(float(d["alpha"]), float(d["gamma"]))
        wit = SparseVector.from_support(int(d["N"]), d["witness"]["support"], d["witness"]["values"], cfg.k)
        return cls(float(d["max_deviation"]), wit, int(d["vectors_tested"]), bool(d["passed"]), cfg,
                   float(d["moment_constant_used"]), float(d["alpha"]), float(d["gamma"]),
                   int(d["M"]), int(d["N"]), d["seed_label"], d.get("net_epsilon"))


def _group_deviations(m: MeasurementMatrix, support, vals: np.ndarray, p: float, C: float,
                      block: int = 1 << 24) -> np.ndarray:
    """Deviations for the rows of ``vals`` (n, |support|), all sharing one support."""
    cols = m.entries[:, list(support)]
    norms_a = np.sum(np.abs(vals) ** m.law.alpha, axis=1) ** (1.0 / m.law.alpha)
    ref = C * (m.law.gamma * norms_a) ** p
    out = np.empty(vals.shape[0])
    step = max(1, block // m.rows)
    for s in range(0, vals.shape[0], step):
        y = cols @ vals[s:s + step].T
        out[s:s + step] = np.mean(abs_power(y, p), axis=0)
    return np.abs(out / ref - 1.0)


def rqip_check(m: MeasurementMatrix, cfg: RqipConfig, stream: Stream | None = None) -> RqipReport:
    """Evaluate D on a family of k-sparse test vectors and compare the maximum with delta.

    net: every point of a unit-sphere net of radius (delta/3)^(1/p);
    random_directions: ``direction_count`` random unit-norm k-sparse vectors;
    brute_force_k1: every basis vector, which is exhaustive when k = 1.
    Ties in the maximum go to the lowest test index.
    """
    _check_p(m.law, cfg.p)
    if cfg.k > m.cols:
        raise DomainError(f"k={cfg.k} exceeds the number of columns N={m.cols}")
    stream = stream if stream is not None else Stream(m.master_seed, f"rqip/{m.seed_label}")
    C = stable_abs_moment_constant(m.law.alpha, cfg.p)
    N, k = m.cols, cfg.k
    net_eps = None

    if cfg.strategy == "brute_force_k1":
        dev = np.abs(np.mean(abs_power(m.entries, cfg.p), axis=0) / (C * m.law.gamma ** cfg.p) - 1.0)
        groups = [((j,), np.ones((1, 1)), dev[j:j + 1]) for j in range(N)]
    elif cfg.strategy == "net":
        net_eps = net_epsilon_for_delta(cfg.delta, cfg.p)
        net = build_net(m.law.alpha, net_eps, k, N, "unit_sphere", cfg.net_budget, stream.child("net"),
                        max_points=cfg.max_net_points)
        groups = [(s, v, _group_deviations(m, s, v, cfg.p, C)) for s, v in net.groups.items()]
    else:
        rng = stream.child("directions").generator()
        vals = sample_k_dim(m.law.alpha, k, "unit_sphere", cfg.direction_count, rng)
        supports = [tuple(int(j) for j in np.sort(rng.choice(N, size=k, replace=False)))
                    for _ in range(cfg.direction_count)]
        by_support: dict = {}
        for i, s in enumerate(supports):
            by_support.setdefault(s, []).append(i)
        devs = np.empty(len(supports))
        for s, idx in by_support.items():
            devs[idx] = _group_deviations(m, s, vals[idx], cfg.p, C)
        groups = [(s, vals[i:i + 1], devs[i:i + 1]) for i, s in enumerate(supports)]

    tested = sum(g[1].shape[0] for g in groups)
    if tested == 0:
        raise DomainError("no test vectors were generated")
    best, where = -1.0, None
    for s, vals, dev in groups:
        j = int(np.argmax(dev))
        if dev[j] > best:
            best, where = float(dev[j]), (s, vals[j])
    witness = SparseVector.from_support(N, where[0], where[1], k)
    return RqipReport(best, witness, tested, best <= cfg.delta, cfg, C, m.law.alpha, m.law.gamma,
                      m.rows, N, m.seed_label, net_eps)


@dataclass(frozen=True)
class ComplexityInputs:
    N: int
    k: int
    delta: float
    eta: float
    alpha: float
    p: float
    c0: float = 0.25
    C_con: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or int(self.k) != self.k or not 1 <= self.k <= self.N:
            raise DomainError(f"need integers 1 <= k <= N, got N={self.N}, k={self.k}")
        for name in ("delta", "eta", "alpha"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise DomainError(f"{name} must lie in (0, 1), got {v}")
        if not 0.0 < self.p < self.alpha:
            raise DomainError(f"p must satisfy p in (0, alpha); got p={self.p}, alpha={self.alpha}")
        if not 0.0 < self.c0 < 0.5:
            raise DomainError(f"c0 must lie in (0, 1/2), got {self.c0}")
        if not self.C_con > 0.0:
            raise DomainError(f"C_con must be positive, got {self.C_con}")

    @classmethod
    def from_params(cls, params: ConcentrationParams, N: int, k: int, delta: float, eta: float):
        return cls(N, k, delta, eta, params.law.alpha, params.p, params.c0, params.C_con)

    @property
    def c_con(self) -> float:
        return self.c0 * (self.alpha / self.p - 1.0)

    @property
    def C_net(self) -> float:
        return net_constant(self.alpha)


class Complexity(NamedTuple):
    log10_M: float
    M: int | None


_U128 = 1 << 128


def sample_complexity(inputs: ComplexityInputs, mode: str = "eN_over_k") -> Complexity:
    """Rows sufficient for the (delta, k)-RQIP with probability 1 - eta.

    M >= (2 C_con / eta * C_net^k * (3/delta)^(k/p) * B)^(1/c_con), where B is
    binom(N, k) in ``binomial_exact`` mode or (eN/k)^k in ``eN_over_k`` mode.
    The integer ceiling is returned only when it fits in 128 bits.
    """
    if mode not in ("binomial_exact", "eN_over_k"):
        raise DomainError(f"mode must be binomial_exact or eN_over_k, got {mode!r}")
    x = inputs
    if mode == "binomial_exact":
        log_b = math.log10(math.comb(x.N, x.k))
    else:
        log_b = x.k * (math.log10(math.e) + math.log10(x.N / x.k))
    inner = (math.log10(2.0 * x.C_con / x.eta) + x.k * math.log10(x.C_net)
             + (x.k / x.p) * math.log10(3.0 / x.delta) + log_b)
    log10_M = inner / x.c_con
    if log10_M >= 128 * math.log10(2.0) + 1:
        return Complexity(log10_M, None)
    with localcontext() as ctx:
        ctx.prec = 60
        D = Decimal
        if mode == "binomial_exact":
            ln_b = D(math.comb(x.N, x.k)).ln()
        else:
            ln_b = D(x.k) * (1 + (D(x.N) / D(x.k)).ln())
        ln_inner = ((2 * D(x.C_con) / D(x.eta)).ln() + D(x.k) * D(x.C_net).ln()
                    + D(x.k) / D(x.p) * (3 / D(x.delta)).ln() + ln_b)
        value = (ln_inner / D(x.c_con)).exp()
        ceil = int(value.to_integral_value(rounding="ROUND_CEILING"))
    return Complexity(log10_M, ceil if ceil < _U128 else None)
