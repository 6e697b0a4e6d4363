"""Symmetric alpha-stable laws with 0 < alpha < 1.

Parameterization: a law SaS(gamma) has characteristic function
``exp(-gamma**alpha * |t|**alpha)``.  Under this convention a projection
``<w, x>`` of an i.i.d. SaS(gamma) vector is SaS(gamma * ||x||_alpha) with no
conversion factors.

Sampling uses the Chambers-Mallows-Stuck transform restricted to beta = 0.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import DomainError
from .streams import Stream

ALPHA_MIN = 0.05
ALPHA_MAX = 0.99

_LOG_BIG = 1e100
_LOG_SMALL = 1e-100


@dataclass(frozen=True)
class StableLaw:
    alpha: float
    gamma: float = 1.0

    def __post_init__(self):
        a, g = float(self.alpha), float(self.gamma)
        if not 0.0 < a < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {a}")
        if not ALPHA_MIN <= a <= ALPHA_MAX:
            raise DomainError(
                f"alpha={a} is outside the validated sampling range "
                f"[{ALPHA_MIN}, {ALPHA_MAX}]"
            )
        if not (g > 0.0 and math.isfinite(g)):
            raise DomainError(f"gamma must be a positive finite scale, got {g}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "gamma", g)


@dataclass(frozen=True)
class SampleBatch:
    law: StableLaw
    values: np.ndarray = field(repr=False)
    stream_label: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise DomainError("a sample batch holds a nonempty 1-d array")
        object.__setattr__(self, "values", values)

    @property
    def count(self) -> int:
        return int(self.values.size)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("value\n")
        for v in self.values:
            buf.write(repr(float(v)) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, law: StableLaw, stream_label: str = "") -> "SampleBatch":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["value"]:
            raise DomainError("sample CSV must start with the header 'value'")
        return cls(law, np.array([float(r[0]) for r in rows[1:]]), stream_label)


def cms_transform(alpha, u, w, gamma=1.0):
    """Map uniform angles ``u`` in (-pi/2, pi/2) and unit exponentials ``w`` to SaS(gamma)."""
    u = np.asarray(u, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    a = float(alpha)
    x = (np.sin(a * u) / np.cos(u) ** (1.0 / a)
         * (np.cos((1.0 - a) * u) / w) ** ((1.0 - a) / a))
    return gamma * x


def _draw(law: StableLaw, n: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.uniform(-0.5 * np.pi, 0.5 * np.pi, size=n)
    w = rng.standard_exponential(size=n)
    return cms_transform(law.alpha, u, w, law.gamma)


def draw_stable(law: StableLaw, n: int, stream: Stream) -> SampleBatch:
    """Draw ``n`` i.i.d. SaS variates; identical (seed, label, n) give identical bits."""
    if int(n) != n or n < 1:
        raise DomainError(f"sample size must be a positive integer, got {n}")
    return SampleBatch(law, _draw(law, int(n), stream.generator()), stream.label)


# Lanczos approximation, g = 7, nine terms.
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def _lanczos(x: float) -> float:
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * _lanczos(1.0 - x))
    x -= 1.0
    acc = _LANCZOS_COEF[0]
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        acc += c / (x + i)
    t = x + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (x + 0.5) * math.exp(-t) * acc


def gamma_fn(x: float) -> float:
    """Euler's gamma function for x > 0."""
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"gamma_fn is defined here for x > 0, got {x}")
    return _lanczos(x)


def stable_abs_moment_constant(alpha: float, p: float) -> float:
    """E|X|^p for a standard (gamma = 1) SaS variable, finite for 0 < p < alpha."""
    alpha, p = float(alpha), float(p)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if not 0.0 < p < alpha:
        raise DomainError(f"moment order must satisfy p in (0, alpha); got p={p}, alpha={alpha}")
    return (2.0 ** p * gamma_fn((1.0 + p) / 2.0) * gamma_fn(1.0 - p / alpha)
            / (gamma_fn(1.0 - p / 2.0) * gamma_fn(0.5)))


def stable_tail_constant(alpha: float) -> float:
    """Two-sided tail constant: t**alpha * P(|X| > t) -> C * gamma**alpha as t grows."""
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    return (1.0 - alpha) / (gamma_fn(2.0 - alpha) * math.cos(math.pi * alpha / 2.0))


def abs_power(x, p: float) -> np.ndarray:
    """|x|**p, switching to log space for magnitudes beyond 1e100 or below 1e-100."""
    a = np.abs(np.asarray(x, dtype=np.float64))
    out = a ** p
    extreme = ((a > _LOG_BIG) | (a < _LOG_SMALL)) & (a > 0) & np.isfinite(a)
    if np.any(extreme):
        out = np.where(extreme, np.exp(p * np.log(np.where(extreme, a, 1.0))), out)
    return out


def empirical_abs_moment(batch: SampleBatch, p: float) -> float:
    """Sample mean of |x_i|^p."""
    if not 0.0 < p < batch.law.alpha:
        raise DomainError(
            f"moment order must satisfy p in (0, alpha); got p={p}, alpha={batch.law.alpha}"
        )
    return float(np.mean(abs_power(batch.values, p)))


def empirical_tail_product(values: Iterable[float], alpha: float, t) -> np.ndarray:
    """t**alpha times the empirical P(|X| > t), for each threshold in ``t``."""
    a = np.sort(np.abs(np.asarray(values, dtype=np.float64)))
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    exceed = a.size - np.searchsorted(a, t, side="right")
    return t ** alpha * exceed / a.size
