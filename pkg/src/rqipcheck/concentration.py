"""Truncation bounds for empirical fractional moments of SaS samples.

With Y = |X|^p the deviation of the sample mean of Y is split at a level T
into a bounded part (Hoeffding) and a tail part (Markov plus the power tail of
X).  Choosing T = (C'/eps)^(1/(alpha/p - 1)) * M^c0 turns the tail term into a
pure power of M with exponent c_con = c0 * (alpha/p - 1).

The functions here evaluate each displayed bound, and estimate the true
deviation probability by simulation for comparison.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError
from .stable import (
    StableLaw,
    _draw,
    abs_power,
    empirical_tail_product,
    stable_abs_moment_constant,
    stable_tail_constant,
)
from .streams import Stream


@dataclass(frozen=True)
class ConcentrationParams:
    law: StableLaw
    p: float
    c0: float = 0.25
    c_prime: float = 1.0
    tail_constant: float | None = None
    C_con: float = 1.0

    def __post_init__(self):
        p = float(self.p)
        if not 0.0 < p < self.law.alpha:
            raise DomainError(
                f"p must satisfy p in (0, alpha); got p={p}, alpha={self.law.alpha}"
            )
        if not 0.0 < self.c0 < 0.5:
            raise DomainError(f"c0 must lie in (0, 1/2), got {self.c0}")
        if not self.c_prime > 0.0:
            raise DomainError(f"C' must be positive, got {self.c_prime}")
        if not self.C_con > 0.0:
            raise DomainError(f"C_con must be positive, got {self.C_con}")
        tc = stable_tail_constant(self.law.alpha) if self.tail_constant is None else self.tail_constant
        if not tc > 0.0:
            raise DomainError(f"tail constant must be positive, got {tc}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "tail_constant", float(tc))

    @property
    def ratio(self) -> float:
        """alpha / p, always > 1."""
        return self.law.alpha / self.p

    @property
    def c_con(self) -> float:
        return self.c0 * (self.ratio - 1.0)

    @property
    def K(self) -> float:
        return self.tail_constant * self.law.gamma ** self.law.alpha / (self.ratio - 1.0)

    @property
    def mean(self) -> float:
        """E|X|^p = C_{alpha,p} * gamma^p."""
        return stable_abs_moment_constant(self.law.alpha, self.p) * self.law.gamma ** self.p


def _check_eps_M(epsilon, M):
    if not epsilon > 0.0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if int(M) != M or M < 1:
        raise DomainError(f"M must be a positive integer, got {M}")


def truncation_threshold(params: ConcentrationParams, epsilon: float, M: int) -> float:
    _check_eps_M(epsilon, M)
    return (params.c_prime / epsilon) ** (1.0 / (params.ratio - 1.0)) * float(M) ** params.c0


def hoeffding_term(epsilon: float, M: int, T: float) -> float:
    """2 exp(-M eps^2 / (8 T^2)), the bounded-part bound at half-deviation eps/2."""
    _check_eps_M(epsilon, M)
    if not T > 0.0:
        raise DomainError(f"T must be positive, got {T}")
    return min(2.0, max(0.0, 2.0 * math.exp(-float(M) * epsilon ** 2 / (8.0 * T * T))))


def tail_term(params: ConcentrationParams, epsilon: float, T: float) -> float:
    """(4K/eps) T^(1 - alpha/p); only meaningful once T is in the power-tail regime."""
    if not epsilon > 0.0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if not T > 0.0:
        raise DomainError(f"T must be positive, got {T}")
    return 4.0 * params.K / epsilon * T ** (1.0 - params.ratio)


class CombinedBound(NamedTuple):
    hoeffding: float
    tail: float
    total: float
    envelope: float
    T: float


def combined_bound(params: ConcentrationParams, epsilon: float, M: int) -> CombinedBound:
    T = truncation_threshold(params, epsilon, M)
    h = hoeffding_term(epsilon, M, T)
    t = tail_term(params, epsilon, T)
    return CombinedBound(h, t, h + t, params.C_con * float(M) ** (-params.c_con), T)


def envelope_crossover(params: ConcentrationParams, epsilon: float) -> float:
    """Smallest M beyond which total(M) * M^c_con is nonincreasing.

    The tail part contributes a constant to that product; the Hoeffding part
    2 exp(-a M^(1-2c0)) M^c_con peaks where a (1-2c0) M^(1-2c0) = c_con.
    """
    _check_eps_M(epsilon, 1)
    r1 = params.ratio - 1.0
    a = epsilon ** (2.0 + 2.0 / r1) / (8.0 * params.c_prime ** (2.0 / r1))
    q = 1.0 - 2.0 * params.c0
    return max(1.0, (params.c_con / (a * q)) ** (1.0 / q))


def fitted_envelope_constant(params: ConcentrationParams, epsilon: float, Ms: Sequence[int]) -> float:
    """max over the grid of total(M) * M^c_con: the smallest C_con valid on that grid."""
    return max(combined_bound(params, epsilon, M).total * float(M) ** params.c_con for M in Ms)


def _trial_exceeds(params, epsilon, M, stream: Stream) -> bool:
    y = abs_power(_draw(params.law, M, stream.generator()), params.p)
    return abs(float(np.mean(y)) - params.mean) > epsilon


def estimate_deviation_probability(
    params: ConcentrationParams,
    epsilon: float,
    M: int,
    trials: int,
    stream: Stream,
    workers: int = 1,
) -> tuple[float, float]:
    """Fraction of trials with |mean(|X|^p) - E|X|^p| > epsilon, and its binomial std error.

    Trial i draws from ``stream.child(i)`` so results do not depend on ``workers``.
    """
    if epsilon < 0.0:
        raise DomainError(f"epsilon must be nonnegative, got {epsilon}")
    if int(M) != M or M < 1 or int(trials) != trials or trials < 1:
        raise DomainError("M and trials must be positive integers")
    M, trials = int(M), int(trials)

    def run(idx):
        return sum(_trial_exceeds(params, epsilon, M, stream.child(i)) for i in idx)

    if workers <= 1:
        hits = run(range(trials))
    else:
        chunks = [range(s, min(s + 64, trials)) for s in range(0, trials, 64)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(run, chunks))
    p_hat = hits / trials
    return p_hat, math.sqrt(p_hat * (1.0 - p_hat) / trials)


def tail_regime_holds(
    params: ConcentrationParams,
    epsilon: float,
    M: int,
    stream: Stream,
    n: int = 200_000,
    tolerance: float = 0.25,
) -> bool:
    """Whether t^alpha P(|X| > t) is within ``tolerance`` of C_alpha gamma^alpha at t = T^(1/p)."""
    T = truncation_threshold(params, epsilon, M)
    t = T ** (1.0 / params.p)
    est = empirical_tail_product(_draw(params.law, n, stream.generator()), params.law.alpha, t)[0]
    target = params.tail_constant * params.law.gamma ** params.law.alpha
    return abs(est / target - 1.0) <= tolerance


@dataclass
class DeviationSeries:
    epsilon: float
    rows: list = field(default_factory=list)  # (M, p_hat, trials, std_err)

    def __post_init__(self):
        self.rows = [(int(M), float(ph), int(t), float(se)) for M, ph, t, se in self.rows]
        Ms = [r[0] for r in self.rows]
        if any(b <= a for a, b in zip(Ms, Ms[1:])):
            raise DomainError("deviation series rows must have strictly increasing M")
        if any(not 0.0 <= r[1] <= 1.0 for r in self.rows):
            raise DomainError("p_hat must lie in [0, 1]")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["M", "p_hat", "trials", "std_err"])
        for M, ph, t, se in self.rows:
            w.writerow([M, repr(ph), t, repr(se)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, epsilon: float) -> "DeviationSeries":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["M", "p_hat", "trials", "std_err"]:
            raise DomainError("deviation CSV header must be M,p_hat,trials,std_err")
        return cls(epsilon, [(int(r[0]), float(r[1]), int(r[2]), float(r[3])) for r in rows[1:]])


def deviation_series(
    params: ConcentrationParams,
    epsilon: float,
    Ms: Sequence[int],
    trials: int,
    stream: Stream,
    workers: int = 1,
) -> DeviationSeries:
    rows = []
    for M in sorted(Ms):
        ph, se = estimate_deviation_probability(params, epsilon, M, trials, stream.child(f"M{M}"), workers)
        rows.append((M, ph, trials, se))
    return DeviationSeries(epsilon, rows)


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    r_squared: float
    excluded_rows: int

    def to_json(self) -> str:
        return json.dumps(self._asdict())

    def _asdict(self):
        return {"slope": self.slope, "intercept": self.intercept,
                "r_squared": self.r_squared, "excluded_rows": self.excluded_rows}

    @classmethod
    def from_json(cls, text: str) -> "DecayFit":
        d = json.loads(text)
        fit = cls(float(d["slope"]), float(d["intercept"]), float(d["r_squared"]), int(d["excluded_rows"]))
        if not (fit.excluded_rows >= 0 and -1e-12 <= fit.r_squared <= 1.0 + 1e-12):
            raise DomainError("invalid decay fit record")
        return fit


def fit_decay_exponent(series: DeviationSeries, min_rows: int = 4) -> DecayFit:
    """Least-squares line through (log M, log p_hat); rows with p_hat = 0 are dropped."""
    usable = [(M, ph) for M, ph, _, _ in series.rows if ph > 0.0]
    excluded = len(series.rows) - len(usable)
    if len(usable) < min_rows:
        raise DomainError(
            f"need at least {min_rows} rows with p_hat > 0 to fit a decay exponent, got {len(usable)}"
        )
    x = np.log([u[0] for u in usable])
    y = np.log([u[1] for u in usable])
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_res = float(np.sum((y - (intercept + slope * x)) ** 2))
    ss_tot = float(np.sum((y - ym) ** 2))
    # a flat series is fit exactly by a zero slope
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    return DecayFit(slope, intercept, r2, excluded)


def default_workers() -> int:
    env = os.environ.get("RQIP_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1
