"""Sparse vectors, the l_alpha quasi-norm and epsilon-nets of sparse l_alpha balls.

Distances between points are compared in alpha-power space: ||x - y||_alpha <= eps
is evaluated as sum |x_i - y_i|^alpha <= eps^alpha.
"""
from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .errors import CapacityError, DomainError
from .streams import Stream

TARGETS = ("unit_ball", "unit_sphere")
SUPPORT_CAP = 10 ** 6
SPHERE_TOL = 1e-9


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def _check_dims(dim, k):
    if int(dim) != dim or int(k) != k or dim < 1 or k < 1:
        raise DomainError(f"dimension and sparsity must be positive integers, got N={dim}, k={k}")
    if k > dim:
        raise DomainError(f"sparsity k={k} exceeds dimension N={dim}")


@dataclass(frozen=True)
class SparseVector:
    entries: np.ndarray = field(repr=False)
    nominal_sparsity: int

    def __post_init__(self):
        e = np.array(self.entries, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "entries", e)
        k = int(self.nominal_sparsity)
        if k < 1 or k > e.size:
            raise DomainError(f"nominal sparsity {k} must lie in [1, {e.size}]")
        if np.count_nonzero(e) > k:
            raise DomainError(f"vector has {np.count_nonzero(e)} nonzeros, more than k={k}")
        object.__setattr__(self, "nominal_sparsity", k)

    @classmethod
    def from_support(cls, dim, support, values, k=None) -> "SparseVector":
        e = np.zeros(int(dim))
        e[list(support)] = values
        return cls(e, len(support) if k is None else k)

    @property
    def dim(self) -> int:
        return int(self.entries.size)

    @property
    def support(self) -> tuple:
        return tuple(int(i) for i in np.flatnonzero(self.entries))

    def scaled(self, c: float) -> "SparseVector":
        return SparseVector(c * self.entries, self.nominal_sparsity)

    def to_dict(self) -> dict:
        s = self.support
        return {"dim": self.dim, "support": list(s), "values": [float(v) for v in self.entries[list(s)]]}


def _entries(x) -> np.ndarray:
    return x.entries if isinstance(x, SparseVector) else np.asarray(x, dtype=np.float64)


def alpha_power_sum(x, alpha: float, axis=-1):
    """sum_j |x_j|^alpha along ``axis``."""
    return np.sum(np.abs(_entries(x)) ** alpha, axis=axis)


def alpha_quasinorm(x, alpha: float) -> float:
    _check_alpha(alpha)
    a = np.abs(_entries(x))
    scale = float(a.max()) if a.size else 0.0
    if scale == 0.0:
        return 0.0
    return scale * float(np.sum((a / scale) ** alpha)) ** (1.0 / alpha)


def quasi_triangle_constant(alpha: float) -> float:
    _check_alpha(alpha)
    return 2.0 ** (1.0 / alpha - 1.0)


def net_constant(alpha: float) -> float:
    """C_net = 2 C^2 + C with C the quasi-triangle constant."""
    c = quasi_triangle_constant(alpha)
    return 2.0 * c * c + c


class CoveringBound(NamedTuple):
    log10: float
    value: float


def covering_bound(alpha: float, epsilon: float, k: int, dim: int) -> CoveringBound:
    """(C_net/eps)^k * binom(N, k), carried in log10 to survive large N and k."""
    _check_alpha(alpha)
    _check_dims(dim, k)
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    lg = k * math.log10(net_constant(alpha) / epsilon) + math.log10(math.comb(dim, k))
    return CoveringBound(lg, 10.0 ** lg if lg < 308 else math.inf)


def binomial_and_bound(dim: int, k: int) -> tuple[int, float]:
    _check_dims(dim, k)
    try:
        upper = (math.e * dim / k) ** k
    except OverflowError:
        upper = math.inf
    return math.comb(dim, k), upper


def enumerate_supports(dim: int, k: int, cap: int = SUPPORT_CAP) -> Iterator[tuple]:
    """All size-k subsets of range(dim) in lexicographic order (0-based indices)."""
    _check_dims(dim, k)
    count = math.comb(dim, k)
    if count > cap:
        raise CapacityError(f"C({dim},{k}) = {count} supports exceeds the enumeration cap {cap}")
    return itertools.combinations(range(dim), k)


def sample_k_dim(alpha: float, k: int, target: str, count: int, rng: np.random.Generator) -> np.ndarray:
    """Random points of the k-dimensional l_alpha unit ball (uniform) or sphere (cone measure).

    Coordinates with density proportional to exp(-|g|^alpha) have |g|^alpha ~ Gamma(1/alpha);
    g / ||g||_alpha is then cone-distributed and U^(1/k) supplies the uniform radius.
    """
    if target not in TARGETS:
        raise DomainError(f"target must be one of {TARGETS}, got {target!r}")
    mag = rng.gamma(1.0 / alpha, size=(count, k)) ** (1.0 / alpha)
    sign = np.where(rng.random((count, k)) < 0.5, -1.0, 1.0)
    g = sign * mag
    g /= (np.sum(mag ** alpha, axis=1) ** (1.0 / alpha))[:, None]
    if target == "unit_ball":
        g *= (rng.random(count) ** (1.0 / k))[:, None]
    return g


def sample_target(alpha, k, dim, target, count, rng):
    """Random k-sparse points of the N-dimensional target set, supports drawn uniformly.

    Returns the dense (count, dim) array and the list of support tuples.
    """
    _check_dims(dim, k)
    vals = sample_k_dim(alpha, k, target, count, rng)
    dense = np.zeros((count, dim))
    supports = []
    for i in range(count):
        s = np.sort(rng.choice(dim, size=k, replace=False))
        dense[i, s] = vals[i]
        supports.append(tuple(int(j) for j in s))
    return dense, supports


def _min_power_dist(X: np.ndarray, A: np.ndarray, alpha: float, block: int = 1 << 22) -> np.ndarray:
    """min over rows a of A of sum |x - a|^alpha, for each row x of X."""
    out = np.full(X.shape[0], np.inf)
    if A.shape[0] == 0 or X.shape[0] == 0:
        return out
    rows = max(1, block // max(1, A.shape[0] * X.shape[1]))
    for s in range(0, X.shape[0], rows):
        d = np.sum(np.abs(X[s:s + rows, None, :] - A[None, :, :]) ** alpha, axis=2)
        out[s:s + rows] = d.min(axis=1)
    return out


def _grid(alpha, k, target, max_points) -> np.ndarray:
    if target == "unit_ball":
        m = max(3, int(math.floor(max_points ** (1.0 / k))))
        m -= (m + 1) % 2  # odd so that 0 and the axis tips are grid nodes
        axis = np.linspace(-1.0, 1.0, m)
        pts = np.stack(np.meshgrid(*([axis] * k), indexing="ij"), axis=-1).reshape(-1, k)
        return pts[np.sum(np.abs(pts) ** alpha, axis=1) <= 1.0]
    # sphere: a lattice on the simplex of alpha-powers, then all sign patterns
    if k == 1:
        return np.array([[-1.0], [1.0]])
    r = 1
    while math.comb(r + k, k - 1) * 2 ** k <= max_points:
        r += 1
    comps = []
    for bars in itertools.combinations(range(r + k - 1), k - 1):
        edges = (-1,) + bars + (r + k - 1,)
        comps.append([edges[i + 1] - edges[i] - 1 for i in range(k)])
    mag = (np.array(comps, dtype=np.float64) / r) ** (1.0 / alpha)
    signs = np.array(list(itertools.product((1.0, -1.0), repeat=k)))
    pts = (mag[:, None, :] * signs[None, :, :]).reshape(-1, k)
    return np.unique(pts, axis=0)


@dataclass
class EpsilonNet:
    alpha: float
    epsilon: float
    k: int
    dim: int
    target: str = "unit_ball"
    groups: dict = field(default_factory=dict)  # support tuple -> (n, k) array

    @property
    def size(self) -> int:
        return int(sum(v.shape[0] for v in self.groups.values()))

    def points(self) -> Iterator[SparseVector]:
        for supp, vals in self.groups.items():
            for row in vals:
                yield SparseVector.from_support(self.dim, supp, row, self.k)

    def dense(self) -> np.ndarray:
        out = np.zeros((self.size, self.dim))
        i = 0
        for supp, vals in self.groups.items():
            out[i:i + vals.shape[0], list(supp)] = vals
            i += vals.shape[0]
        return out

    def check_invariants(self) -> None:
        _check_alpha(self.alpha)
        _check_dims(self.dim, self.k)
        if self.target not in TARGETS:
            raise DomainError(f"target must be one of {TARGETS}")
        if not 0.0 < self.epsilon <= 1.0:
            raise DomainError(f"net radius must lie in (0, 1], got {self.epsilon}")
        eps_a = self.epsilon ** self.alpha
        for supp, vals in self.groups.items():
            if len(supp) != self.k or vals.ndim != 2 or vals.shape[1] != self.k:
                raise DomainError(f"group {supp} is not {self.k}-sparse")
            if max(supp) >= self.dim or len(set(supp)) != len(supp):
                raise DomainError(f"group {supp} is not a valid support")
            s = np.sum(np.abs(vals) ** self.alpha, axis=1)
            if self.target == "unit_ball" and np.any(s > 1.0 + 1e-12):
                raise DomainError("net point lies outside the unit ball")
            if self.target == "unit_sphere" and np.any(np.abs(s ** (1.0 / self.alpha) - 1.0) > SPHERE_TOL):
                raise DomainError("net point lies off the unit sphere")
            for i in range(1, vals.shape[0]):
                d = np.sum(np.abs(vals[:i] - vals[i]) ** self.alpha, axis=1)
                if np.any(d < eps_a):
                    raise DomainError(f"net points in group {supp} are closer than epsilon")

    def to_json(self) -> str:
        pts = [{"support": list(s), "values": [float(v) for v in row]}
               for s, vals in self.groups.items() for row in vals]
        return json.dumps({"alpha": self.alpha, "epsilon": self.epsilon, "k": self.k,
                           "dim": self.dim, "target": self.target, "points": pts})

    @classmethod
    def from_json(cls, text: str) -> "EpsilonNet":
        d = json.loads(text)
        groups: dict = {}
        for pt in d["points"]:
            groups.setdefault(tuple(int(i) for i in pt["support"]), []).append(pt["values"])
        net = cls(float(d["alpha"]), float(d["epsilon"]), int(d["k"]), int(d["dim"]), d["target"],
                  {s: np.array(v, dtype=np.float64).reshape(-1, int(d["k"])) for s, v in groups.items()})
        net.check_invariants()
        return net


def _sweep(acc, pool, eps_a, alpha, max_points):
    """Greedily add every pool point still at distance >= eps from the set."""
    pool = pool[_min_power_dist(pool, acc, alpha) >= eps_a]
    added = []
    while pool.shape[0]:
        new = pool[0]
        added.append(new)
        if acc.shape[0] + len(added) > max_points:
            raise CapacityError(f"epsilon-net exceeds the cap of {max_points} points")
        pool = pool[np.sum(np.abs(pool - new) ** alpha, axis=1) >= eps_a]
    return np.vstack([acc, np.array(added)]) if added else acc


def _pack_support(alpha, epsilon, k, target, budget, rng, max_points, grid_points, batch=1024):
    eps_a = epsilon ** alpha
    acc = np.empty((0, k))
    misses = 0
    while misses < budget:
        cand = sample_k_dim(alpha, k, target, batch, rng)
        d = _min_power_dist(cand, acc, alpha)
        pos = 0
        while pos < batch:
            hits = np.flatnonzero(d[pos:] >= eps_a)
            if hits.size == 0:
                misses += batch - pos
                break
            j = pos + int(hits[0])
            misses += j - pos
            if misses >= budget:
                break
            acc = np.vstack([acc, cand[j]])
            if acc.shape[0] > max_points:
                raise CapacityError(f"epsilon-net exceeds the cap of {max_points} points")
            misses = 0
            rest = cand[j + 1:]
            d[j + 1:] = np.minimum(d[j + 1:], np.sum(np.abs(rest - cand[j]) ** alpha, axis=1))
            pos = j + 1
    if grid_points:
        # make the set maximal on a fine lattice, then on fresh random pools
        # until a whole pool is already covered
        acc = _sweep(acc, _grid(alpha, k, target, grid_points), eps_a, alpha, max_points)
        while True:
            before = acc.shape[0]
            acc = _sweep(acc, sample_k_dim(alpha, k, target, grid_points, rng), eps_a, alpha, max_points)
            if acc.shape[0] == before:
                break
    return acc


def build_net(
    alpha: float,
    epsilon: float,
    k: int,
    dim: int,
    target: str = "unit_ball",
    budget: int = 5000,
    stream: Stream | None = None,
    *,
    max_points: int = 200_000,
    support_cap: int = SUPPORT_CAP,
    grid_points: int = 1 << 18,
    workers: int = 1,
) -> EpsilonNet:
    """Greedy epsilon-separated packing of the sparse target set, one group per support.

    For each support, random candidates are accepted when they are at distance
    >= epsilon from every accepted point, until ``budget`` consecutive
    rejections.  Sweeps then add any still-uncovered node of a lattice of about
    ``grid_points`` nodes, followed by random pools of that size until one pool
    comes back fully covered.  ``grid_points=0`` keeps the plain greedy phase.
    Support i draws from ``stream.child("support", i)``.
    """
    _check_alpha(alpha)
    if not 0.0 < epsilon <= 1.0:
        raise DomainError(f"net radius must lie in (0, 1], got {epsilon}")
    if target not in TARGETS:
        raise DomainError(f"target must be one of {TARGETS}, got {target!r}")
    if int(budget) != budget or budget < 1:
        raise DomainError(f"budget must be a positive integer, got {budget}")
    stream = stream if stream is not None else Stream(0, "net")
    supports = list(enumerate_supports(dim, k, support_cap))

    def one(item):
        i, _ = item
        return _pack_support(alpha, epsilon, k, target, int(budget),
                             stream.child("support", i).generator(), max_points, grid_points)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            packed = list(pool.map(one, enumerate(supports)))
    else:
        packed = [one(item) for item in enumerate(supports)]
    total = sum(a.shape[0] for a in packed)
    if total > max_points:
        raise CapacityError(f"epsilon-net has {total} points, above the cap of {max_points}")
    return EpsilonNet(alpha, epsilon, int(k), int(dim), target, dict(zip(supports, packed)))


class NetCoverage(NamedTuple):
    coverage_rate: float
    worst_gap: float


def verify_net(net: EpsilonNet, trials: int, stream: Stream) -> NetCoverage:
    """Monte-Carlo coverage: fraction of random target points within epsilon of the net."""
    if int(trials) != trials or trials < 1:
        raise DomainError(f"trials must be a positive integer, got {trials}")
    X, _ = sample_target(net.alpha, net.k, net.dim, net.target, int(trials), stream.generator())
    P = net.dense()
    if P.shape[0] == 0:
        return NetCoverage(0.0, math.inf)
    d = _min_power_dist(X, P, net.alpha)
    covered = d <= net.epsilon ** net.alpha
    return NetCoverage(float(np.mean(covered)), float(d.max()) ** (1.0 / net.alpha))
