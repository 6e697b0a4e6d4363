"""Reproducible studies: moment identity, concentration decay, nets and RQIP.

Every cell draws from ``Stream(master_seed, "<study>/cell<i>")`` and trials
below it from child streams, so rerunning a config reproduces every numeric
column bit for bit whatever the worker count.  Each study writes one CSV and
one JSON manifest.
"""
from __future__ import annotations

import csv
import datetime
import io
import json
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .concentration import (
    ConcentrationParams,
    combined_bound,
    deviation_series,
    fit_decay_exponent,
    fitted_envelope_constant,
    tail_regime_holds,
)
from .errors import DomainError
from .geometry import SparseVector, alpha_quasinorm, build_net, covering_bound, verify_net
from .rqip import (
    ComplexityInputs,
    RqipConfig,
    generate_matrix,
    moment_stat,
    rqip_check,
    sample_complexity,
)
from .stable import StableLaw, stable_abs_moment_constant
from .streams import Stream
from .svg import loglog_plot

STUDIES = ("moments", "concentration", "nets", "rqip")

COLUMNS = {
    "moments": ["alpha", "p", "gamma", "M", "empirical", "closed_form", "rel_err"],
    "concentration": ["alpha", "p", "epsilon", "M", "p_hat", "std_err",
                      "bound_total", "bound_hoeffding", "bound_tail"],
    "nets_rqip": ["alpha", "k", "N", "epsilon", "net_size", "cover_bound", "coverage",
                  "max_deviation", "passed", "log10_M_required", "M_used"],
}
PROVENANCE = ["cell", "seed"]


def default_grid(study: str) -> list:
    if study == "moments":
        return [dict(alpha=0.5, p=0.2, gamma=1.0, M=10 ** 6, N=5, vector="e1"),
                dict(alpha=0.5, p=0.2, gamma=1.0, M=10 ** 6, N=5, vector="sparse3"),
                dict(alpha=0.7, p=0.3, gamma=2.0, M=10 ** 6, N=5, vector="e1"),
                dict(alpha=0.7, p=0.3, gamma=2.0, M=10 ** 6, N=5, vector="sparse3")]
    if study == "concentration":
        return [dict(alpha=0.5, p=0.25, gamma=1.0, eps_rel=0.2,
                     Ms=[2 ** j for j in range(8, 15)], trials=2000)]
    if study in ("nets", "rqip"):
        return [dict(alpha=0.5, k=1, N=8, epsilon=0.25, M=10 ** 5, p=0.2, delta=0.5),
                dict(alpha=0.5, k=2, N=5, epsilon=0.25, M=10 ** 4, p=0.2, delta=0.5)]
    raise DomainError(f"study must be one of {STUDIES}, got {study!r}")


def _moment_cell(c):
    law = StableLaw(c["alpha"], c.get("gamma", 1.0))
    if not 0.0 < c["p"] < law.alpha:
        raise DomainError(f"p must satisfy p in (0, alpha); got p={c['p']}, alpha={law.alpha}")
    N, M = int(c.get("N", 5)), int(c["M"])
    vec = c.get("vector", "e1")
    if vec != "e1" and not (vec.startswith("sparse") and 1 <= int(vec[6:]) <= N):
        raise DomainError(f"vector must be 'e1' or 'sparseK' with K <= N, got {vec!r}")
    if M < 1 or float(c.get("scale", 1.0)) == 0.0:
        raise DomainError("M must be positive and scale nonzero")
    return law


def _conc_cell(c):
    law = StableLaw(c["alpha"], c.get("gamma", 1.0))
    params = ConcentrationParams(law, c["p"], c.get("c0", 0.25), c.get("c_prime", 1.0))
    Ms = c.get("Ms")
    if not Ms or any(int(M) != M or M < 1 for M in Ms) or int(c.get("trials", 0)) < 1:
        raise DomainError("concentration cells need a non-empty M list and positive trials")
    eps = c["epsilon"] if "epsilon" in c else c["eps_rel"] * params.mean
    if not eps > 0:
        raise DomainError(f"epsilon must be positive, got {eps}")
    return params, float(eps)


def _net_cell(c):
    law = StableLaw(c["alpha"], c.get("gamma", 1.0))
    RqipConfig(int(c["k"]), c["delta"], c["p"])
    ComplexityInputs(int(c["N"]), int(c["k"]), c["delta"], c.get("eta", 0.5), law.alpha, c["p"])
    if not 0.0 < c["epsilon"] < 1.0:
        raise DomainError(f"net epsilon must lie in (0, 1), got {c['epsilon']}")
    if int(c["M"]) < 1:
        raise DomainError("M must be positive")
    return law


_VALIDATORS = {"moments": _moment_cell, "concentration": _conc_cell, "nets": _net_cell, "rqip": _net_cell}


@dataclass
class StudyConfig:
    study: str
    master_seed: int
    grid: list = field(default_factory=list)
    output_dir: str | None = None
    workers: int = 1
    only: list | None = None  # cell indices to run; rows keep their original index

    def __post_init__(self):
        if self.study not in STUDIES:
            raise DomainError(f"study must be one of {STUDIES}, got {self.study!r}")
        if not isinstance(self.master_seed, int) or not 0 <= self.master_seed < 2 ** 64:
            raise DomainError("master_seed must be a 64-bit unsigned integer")
        if not self.grid:
            raise DomainError("study grid must be non-empty")
        for i, cell in enumerate(self.grid):
            try:
                _VALIDATORS[self.study](cell)
            except (DomainError, KeyError, TypeError, ValueError) as err:
                raise DomainError(f"{self.study} cell {i} {cell}: {err}") from err
        if self.only is not None and not set(self.only) <= set(range(len(self.grid))):
            raise DomainError(f"only={self.only} names cells outside 0..{len(self.grid) - 1}")


@dataclass
class StudyResult:
    study: str
    columns: list
    rows: list
    stamp: dict
    cells: list
    extras: list = field(default_factory=list)
    plots: dict = field(default_factory=dict)

    @property
    def csv_name(self) -> str:
        return "nets_rqip.csv" if self.study in ("nets", "rqip") else f"{self.study}.csv"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in self.columns])
        return buf.getvalue()

    def manifest(self) -> dict:
        return {"study": self.study, "stamp": self.stamp, "csv": self.csv_name,
                "columns": self.columns, "cells": self.cells, "extras": self.extras,
                "plots": sorted(self.plots)}

    def write(self, output_dir) -> list:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / self.csv_name, out / f"{self.study}_manifest.json"]
        paths[0].write_text(self.to_csv())
        paths[1].write_text(json.dumps(self.manifest(), indent=2, default=_json_default))
        for name, svg in self.plots.items():
            (out / name).write_text(svg)
            paths.append(out / name)
        return paths


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _stamp(cfg: StudyConfig) -> dict:
    return {"version": __version__, "master_seed": cfg.master_seed,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "python": platform.python_version(), "numpy": np.__version__}


def study_vector(pattern: str, N: int, master_seed: int, scale: float = 1.0) -> SparseVector:
    """'e1' or a random 'sparseK' vector; depends on (seed, pattern, N) only, not on the cell."""
    if pattern == "e1":
        e = np.zeros(N)
        e[0] = 1.0
        return SparseVector(scale * e, 1)
    k = int(pattern[6:])
    rng = Stream(master_seed, f"vector/{pattern}/{N}").generator()
    supp = np.sort(rng.choice(N, size=k, replace=False))
    vals = rng.uniform(0.25, 1.0, size=k) * np.where(rng.random(k) < 0.5, -1.0, 1.0)
    return SparseVector.from_support(N, supp, scale * vals, k)


def _run_moment_cell(cfg, i, c):
    law = _moment_cell(c)
    p, N, M = float(c["p"]), int(c.get("N", 5)), int(c["M"])
    x = study_vector(c.get("vector", "e1"), N, cfg.master_seed, float(c.get("scale", 1.0)))
    m = generate_matrix(law, M, N, f"moments/cell{i}", cfg.master_seed)
    emp = moment_stat(m, x, p)
    closed = stable_abs_moment_constant(law.alpha, p) * (law.gamma * alpha_quasinorm(x, law.alpha)) ** p
    row = dict(alpha=law.alpha, p=p, gamma=law.gamma, M=M, empirical=emp, closed_form=closed,
               rel_err=abs(emp / closed - 1.0), cell=i, seed=cfg.master_seed)
    return [row], {"cell": i, "vector": x.to_dict()}


def _run_conc_cell(cfg, i, c):
    params, eps = _conc_cell(c)
    stream = Stream(cfg.master_seed, f"concentration/cell{i}")
    Ms = sorted(int(M) for M in c["Ms"])
    series = deviation_series(params, eps, Ms, int(c["trials"]), stream, cfg.workers)
    rows, violations = [], []
    for M, ph, trials, se in series.rows:
        b = combined_bound(params, eps, M)
        rows.append(dict(alpha=params.law.alpha, p=params.p, epsilon=eps, M=M, p_hat=ph, std_err=se,
                         bound_total=b.total, bound_hoeffding=b.hoeffding, bound_tail=b.tail,
                         cell=i, seed=cfg.master_seed))
        if b.total <= 1.0 and ph > b.total:
            violations.append(M)
    try:
        fit = fit_decay_exponent(series)._asdict()
    except DomainError as err:
        fit = {"error": str(err), "excluded_rows": sum(1 for r in series.rows if r[1] == 0.0)}
    regime = next((M for M in Ms if tail_regime_holds(params, eps, M, stream.child("tail", M))), None)
    extra = {"cell": i, "epsilon": eps, "fit": fit, "c_con": params.c_con,
             "theoretical_slope": -params.c_con,
             "C_con_fitted": fitted_envelope_constant(params, eps, Ms),
             "bound_violations": violations, "tail_regime_min_M": regime,
             "zero_rows": [r[0] for r in series.rows if r[1] == 0.0]}
    return rows, extra


def _run_net_cell(cfg, i, c):
    law = _net_cell(c)
    k, N, M, eps = int(c["k"]), int(c["N"]), int(c["M"]), float(c["epsilon"])
    p, delta = float(c["p"]), float(c["delta"])
    stream = Stream(cfg.master_seed, f"nets/cell{i}")
    net = build_net(law.alpha, eps, k, N, "unit_ball", int(c.get("budget", 5000)), stream.child("net"))
    cov = verify_net(net, int(c.get("verify_trials", 10 ** 4)), stream.child("verify"))
    m = generate_matrix(law, M, N, f"nets/cell{i}", cfg.master_seed)
    extra = {"cell": i, "worst_gap": cov.worst_gap}
    if k == 1:
        rep = rqip_check(m, RqipConfig(1, delta, p, "net"), stream.child("rqip"))
        brute = rqip_check(m, RqipConfig(1, delta, p, "brute_force_k1"), stream.child("rqip"))
        extra["brute_force_max_deviation"] = brute.max_deviation
        extra["oracle_agreement"] = (brute.passed == rep.passed
                                     and abs(brute.max_deviation - rep.max_deviation) <= 1e-9)
    else:
        rep = rqip_check(m, RqipConfig(k, delta, p, "random_directions",
                                       direction_count=int(c.get("directions", 2000))),
                         stream.child("rqip"))
    extra["strategy"] = rep.config.strategy
    extra["vectors_tested"] = rep.vectors_tested
    need = sample_complexity(ComplexityInputs(N, k, delta, float(c.get("eta", 0.5)), law.alpha, p,
                                              float(c.get("c0", 0.25)), float(c.get("C_con", 1.0))))
    row = dict(alpha=law.alpha, k=k, N=N, epsilon=eps, net_size=net.size,
               cover_bound=covering_bound(law.alpha, eps, k, N).value, coverage=cov.coverage_rate,
               max_deviation=rep.max_deviation, passed=rep.passed, log10_M_required=need.log10_M,
               M_used=M, cell=i, seed=cfg.master_seed)
    return [row], extra


def _concentration_plots(rows, extras) -> dict:
    plots = {}
    for ex in extras:
        cell_rows = [r for r in rows if r["cell"] == ex["cell"]]
        Ms = [r["M"] for r in cell_rows]
        env = [ex["C_con_fitted"] * M ** (-ex["c_con"]) for M in Ms]
        series = [("p_hat", Ms, [r["p_hat"] for r in cell_rows], False),
                  ("bound total", Ms, [r["bound_total"] for r in cell_rows], True),
                  ("C_con M^-c_con", Ms, env, True)]
        plots[f"concentration_cell{ex['cell']}.svg"] = loglog_plot(
            series, title=f"deviation probability, cell {ex['cell']}", ylabel="P(|mean - E| > eps)")
    return plots


_RUNNERS = {"moments": _run_moment_cell, "concentration": _run_conc_cell,
            "nets": _run_net_cell, "rqip": _run_net_cell}


def _run(cfg: StudyConfig) -> StudyResult:
    runner = _RUNNERS[cfg.study]

    def one(item):
        i, cell = item
        try:
            return runner(cfg, i, cell)
        except DomainError as err:
            raise DomainError(f"{cfg.study} cell {i} {cell}: {err}") from err

    items = [(i, c) for i, c in enumerate(cfg.grid) if cfg.only is None or i in cfg.only]
    if cfg.workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(one, items))
    else:
        results = [one(it) for it in items]
    rows = [r for rs, _ in results for r in rs]
    extras = [e for _, e in results]
    key = "nets_rqip" if cfg.study in ("nets", "rqip") else cfg.study
    res = StudyResult(cfg.study, COLUMNS[key] + PROVENANCE, rows, _stamp(cfg), list(cfg.grid), extras)
    if cfg.study == "concentration":
        res.plots = _concentration_plots(rows, extras)
    if cfg.output_dir:
        res.write(cfg.output_dir)
    return res


def run_moment_study(cfg: StudyConfig) -> StudyResult:
    if cfg.study != "moments":
        raise DomainError("run_moment_study needs a 'moments' config")
    return _run(cfg)


def run_concentration_study(cfg: StudyConfig) -> StudyResult:
    if cfg.study != "concentration":
        raise DomainError("run_concentration_study needs a 'concentration' config")
    return _run(cfg)


def run_net_and_rqip_study(cfg: StudyConfig) -> StudyResult:
    if cfg.study not in ("nets", "rqip"):
        raise DomainError("run_net_and_rqip_study needs a 'nets' or 'rqip' config")
    return _run(cfg)


def run_study(cfg: StudyConfig) -> StudyResult:
    return _run(cfg)
