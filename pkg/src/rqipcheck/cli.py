"""Command-line entry point: ``rqip <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 domain/validation error,
3 runtime or capacity error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .concentration import ConcentrationParams, combined_bound, default_workers
from .errors import CapacityError, DomainError
from .experiments import STUDIES, StudyConfig, default_grid, run_study
from .geometry import TARGETS, build_net, covering_bound, verify_net
from .rqip import (
    STRATEGIES,
    ComplexityInputs,
    RqipConfig,
    default_strategy,
    generate_matrix,
    rqip_check,
    sample_complexity,
)
from .stable import (
    ALPHA_MAX,
    ALPHA_MIN,
    StableLaw,
    draw_stable,
    empirical_abs_moment,
    stable_abs_moment_constant,
    stable_tail_constant,
)
from .streams import Stream

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_law(p, gamma=True):
    p.add_argument("--alpha", type=float, required=True,
                   help=f"stability index, alpha in [{ALPHA_MIN}, {ALPHA_MAX}] (subset of (0, 1))")
    if gamma:
        p.add_argument("--gamma", type=float, default=1.0, help="scale, gamma > 0 (default 1)")


def _add_out(p, default_format):
    p.add_argument("--out", help="output directory, created if absent")
    p.add_argument("--format", choices=("csv", "json"), default=default_format,
                   help=f"serialization of the written artifact (default {default_format})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rqip", description="RQIP verification toolkit for SaS random matrices")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("sample", help="draw SaS variates")
    _add_law(p)
    p.add_argument("--n", type=int, required=True, help="number of variates, n >= 1")
    p.add_argument("--seed", type=int, required=True, help="master seed, 64-bit unsigned")
    p.add_argument("--label", default="sample", help="stream label (default 'sample')")
    _add_out(p, "csv")

    p = sub.add_parser("moments", help="moment and tail constants, optionally with an empirical check")
    _add_law(p)
    p.add_argument("--p", type=float, required=True, help="moment order, p in (0, alpha)")
    p.add_argument("--n", type=int, default=0, help="if > 0, also estimate E|X|^p from n draws")
    p.add_argument("--seed", type=int, help="master seed, required when --n > 0")
    _add_out(p, "json")

    p = sub.add_parser("bounds", help="evaluate the truncation concentration bounds")
    _add_law(p)
    p.add_argument("--p", type=float, required=True, help="moment order, p in (0, alpha)")
    p.add_argument("--c0", type=float, default=0.25, help="truncation exponent, c0 in (0, 1/2) (default 0.25)")
    p.add_argument("--Cprime", type=float, default=1.0, help="threshold constant C' > 0 (default 1)")
    p.add_argument("--Ccon", type=float, default=1.0, help="envelope constant C_con > 0 (default 1)")
    p.add_argument("--eps", type=float, required=True, help="deviation level, eps > 0")
    p.add_argument("--M", type=int, required=True, help="sample size, M >= 1")
    p.add_argument("--show", choices=("T", "hoeffding", "tail", "total", "envelope", "all"),
                   default="all", help="which quantity to print (default all)")
    _add_out(p, "json")

    p = sub.add_parser("net", help="build and verify an epsilon-net of the sparse l_alpha ball or sphere")
    p.add_argument("--alpha", type=float, required=True, help="quasi-norm index, alpha in (0, 1)")
    p.add_argument("--eps", type=float, required=True, help="net radius, eps in (0, 1]")
    p.add_argument("--k", type=int, required=True, help="sparsity, 1 <= k <= N")
    p.add_argument("--N", type=int, required=True, help="ambient dimension, N >= 1")
    p.add_argument("--target", choices=TARGETS, default="unit_ball", help="set to cover (default unit_ball)")
    p.add_argument("--budget", type=int, default=5000, help="consecutive rejections per support (default 5000)")
    p.add_argument("--verify-trials", type=int, default=10 ** 4, help="coverage samples, >= 1 (default 10000)")
    p.add_argument("--seed", type=int, required=True, help="master seed, 64-bit unsigned")
    _add_out(p, "json")

    p = sub.add_parser("rqip-check", help="empirically check the (delta, k)-RQIP of a random matrix")
    _add_law(p)
    p.add_argument("--p", type=float, required=True, help="moment order, p in (0, alpha)")
    p.add_argument("--delta", type=float, required=True, help="deviation level, delta in (0, 1)")
    p.add_argument("--k", type=int, default=1, help="sparsity, 1 <= k <= N (default 1)")
    p.add_argument("--N", type=int, default=8, help="columns, N >= 1 (default 8)")
    p.add_argument("--M", type=int, default=10 ** 5, help="rows, M >= 1 (default 100000)")
    p.add_argument("--strategy", choices=STRATEGIES, help="test-vector family (default: by k and N)")
    p.add_argument("--net-budget", type=int, default=2000, help="net rejection budget, >= 1 (default 2000)")
    p.add_argument("--directions", type=int, default=10 ** 4, help="random directions, >= 1 (default 10000)")
    p.add_argument("--seed", type=int, required=True, help="master seed, 64-bit unsigned")
    p.add_argument("--label", default="cli", help="matrix seed label (default 'cli')")
    _add_out(p, "json")

    p = sub.add_parser("complexity", help="sufficient number of rows M for the RQIP")
    p.add_argument("--alpha", type=float, required=True, help="stability index, alpha in (0, 1)")
    p.add_argument("--p", type=float, required=True, help="moment order, p in (0, alpha)")
    p.add_argument("--delta", type=float, required=True, help="deviation level, delta in (0, 1)")
    p.add_argument("--eta", type=float, required=True, help="failure probability, eta in (0, 1)")
    p.add_argument("--N", type=int, required=True, help="dimension, N >= 1")
    p.add_argument("--k", type=int, required=True, help="sparsity, 1 <= k <= N")
    p.add_argument("--c0", type=float, default=0.25, help="c0 in (0, 1/2) (default 0.25)")
    p.add_argument("--Ccon", type=float, default=1.0, help="C_con > 0 (default 1)")
    p.add_argument("--mode", choices=("eN_over_k", "binomial_exact"), default="eN_over_k",
                   help="binomial factor: (eN/k)^k or exact C(N,k) (default eN_over_k)")
    _add_out(p, "json")

    p = sub.add_parser("study", help="run a reproducible study, writing CSV, JSON and SVG")
    p.add_argument("--name", choices=STUDIES, required=True, help="which study")
    p.add_argument("--seed", type=int, required=True, help="master seed, 64-bit unsigned")
    p.add_argument("--out", required=True, help="output directory, created if absent")
    p.add_argument("--grid", help="JSON file with a list of cells (default: the built-in grid)")
    p.add_argument("--workers", type=int, help="worker threads, >= 1 (default RQIP_THREADS or CPU count)")
    p.add_argument("--only", help="comma-separated cell indices to re-run (default: every cell)")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="studies always write CSV plus a JSON manifest; accepted for uniformity")
    return parser


def _fail(msg):
    raise DomainError(msg)


def _check_alpha_law(a):
    if not 0.0 < a < 1.0:
        _fail(f"alpha must satisfy α ∈ (0, 1), got {a}")
    if not ALPHA_MIN <= a <= ALPHA_MAX:
        _fail(f"alpha must lie in the validated sampling range [{ALPHA_MIN}, {ALPHA_MAX}], got {a}")


def _check_p(p, a):
    if not 0.0 < p < a:
        _fail(f"p must satisfy p ∈ (0, α) = (0, {a}), got {p}")


def _check_unit(name, symbol, v):
    if not 0.0 < v < 1.0:
        _fail(f"{name} must satisfy {symbol} ∈ (0,1), got {v}")


def _check_positive(name, v):
    if not v > 0:
        _fail(f"{name} must be positive, got {v}")


def _check_seed(s):
    if s is not None and not 0 <= s < 2 ** 64:
        _fail(f"seed must be a 64-bit unsigned integer, got {s}")


def _check_k(k, N):
    if not (N >= 1 and 1 <= k <= N):
        _fail(f"sparsity must satisfy 1 ≤ k ≤ N, got k={k}, N={N}")


def validate(args) -> None:
    """Check every flag against its domain before any computation starts."""
    c = args.command
    _check_seed(getattr(args, "seed", None))
    if c in ("sample", "moments", "bounds", "rqip-check"):
        _check_alpha_law(args.alpha)
        _check_positive("gamma", args.gamma)
    if c in ("moments", "bounds", "rqip-check", "complexity"):
        if c == "complexity" and not 0.0 < args.alpha < 1.0:
            _fail(f"alpha must satisfy α ∈ (0, 1), got {args.alpha}")
        _check_p(args.p, args.alpha)
    if c == "sample":
        _check_positive("n", args.n)
    if c == "moments" and args.n:
        _check_positive("n", args.n)
        if args.seed is None:
            raise UsageError("moments: --seed is required when --n > 0")
    if c == "bounds":
        if not 0.0 < args.c0 < 0.5:
            _fail(f"c0 must satisfy c0 ∈ (0, 1/2), got {args.c0}")
        _check_positive("C'", args.Cprime)
        _check_positive("C_con", args.Ccon)
        _check_positive("eps", args.eps)
        _check_positive("M", args.M)
    if c == "net":
        if not 0.0 < args.alpha < 1.0:
            _fail(f"alpha must satisfy α ∈ (0, 1), got {args.alpha}")
        if not 0.0 < args.eps <= 1.0:
            _fail(f"eps must satisfy ε ∈ (0, 1], got {args.eps}")
        _check_k(args.k, args.N)
        _check_positive("budget", args.budget)
        _check_positive("verify-trials", args.verify_trials)
    if c == "rqip-check":
        _check_unit("delta", "δ", args.delta)
        _check_k(args.k, args.N)
        _check_positive("M", args.M)
        _check_positive("net-budget", args.net_budget)
        _check_positive("directions", args.directions)
        if args.strategy == "brute_force_k1" and args.k != 1:
            _fail("brute_force_k1 requires k = 1")
    if c == "complexity":
        _check_unit("delta", "δ", args.delta)
        _check_unit("eta", "η", args.eta)
        _check_k(args.k, args.N)
        if not 0.0 < args.c0 < 0.5:
            _fail(f"c0 must satisfy c0 ∈ (0, 1/2), got {args.c0}")
        _check_positive("C_con", args.Ccon)
    if c == "study" and args.workers is not None:
        _check_positive("workers", args.workers)


def _serialize(records, fmt) -> str:
    if fmt == "json":
        return json.dumps(records if len(records) != 1 else records[0], indent=2) + "\n"
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(records[0]), lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def _write(args, name, text):
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{name}.{args.format}"
        path.write_text(text)
        print(f"wrote {path}")


def _cmd_sample(args):
    law = StableLaw(args.alpha, args.gamma)
    batch = draw_stable(law, args.n, Stream(args.seed, args.label))
    if args.format == "csv":
        text = batch.to_csv()
    else:
        text = json.dumps({"alpha": law.alpha, "gamma": law.gamma, "seed": args.seed,
                           "stream_label": batch.stream_label, "count": batch.count,
                           "values": [float(v) for v in batch.values]})
    if args.out:
        _write(args, "samples", text)
    else:
        sys.stdout.write(text)


def _cmd_moments(args):
    law = StableLaw(args.alpha, args.gamma)
    C = stable_abs_moment_constant(law.alpha, args.p)
    rec = {"alpha": law.alpha, "p": args.p, "gamma": law.gamma, "C_alpha_p": C,
           "moment": C * law.gamma ** args.p, "tail_constant": stable_tail_constant(law.alpha)}
    if args.n:
        batch = draw_stable(law, args.n, Stream(args.seed, "moments"))
        rec["empirical"] = empirical_abs_moment(batch, args.p)
        rec["n"] = args.n
    for k, v in rec.items():
        print(f"{k} = {v:.12g}" if isinstance(v, float) else f"{k} = {v}")
    _write(args, "moments", _serialize([rec], args.format))


def _cmd_bounds(args):
    params = ConcentrationParams(StableLaw(args.alpha, args.gamma), args.p, args.c0, args.Cprime,
                                 C_con=args.Ccon)
    b = combined_bound(params, args.eps, args.M)
    values = {"T": b.T, "hoeffding": b.hoeffding, "tail": b.tail, "total": b.total, "envelope": b.envelope}
    shown = values if args.show == "all" else {args.show: values[args.show]}
    for k, v in shown.items():
        print(f"{k} = {v:.12g}")
    rec = {"alpha": args.alpha, "p": args.p, "gamma": args.gamma, "c0": args.c0, "C_prime": args.Cprime,
           "C_con": args.Ccon, "epsilon": args.eps, "M": args.M, "c_con": params.c_con, "K": params.K,
           **values}
    _write(args, "bounds", _serialize([rec], args.format))


def _cmd_net(args):
    stream = Stream(args.seed, "cli/net")
    net = build_net(args.alpha, args.eps, args.k, args.N, args.target, args.budget, stream.child("build"))
    cov = verify_net(net, args.verify_trials, stream.child("verify"))
    print(f"net_size = {net.size}")
    if args.eps < 1.0:
        print(f"cover_bound = {covering_bound(args.alpha, args.eps, args.k, args.N).value:.12g}")
    print(f"coverage = {cov.coverage_rate:.12g}")
    print(f"worst_gap = {cov.worst_gap:.12g}")
    if args.format == "json":
        text = net.to_json()
    else:
        rows = [{"support": " ".join(map(str, s)), "values": " ".join(repr(float(v)) for v in row)}
                for s, vals in net.groups.items() for row in vals]
        text = _serialize(rows, "csv") if rows else "support,values\n"
    _write(args, "net", text)


def _cmd_rqip(args):
    law = StableLaw(args.alpha, args.gamma)
    strategy = args.strategy or default_strategy(args.k, args.N)
    cfg = RqipConfig(args.k, args.delta, args.p, strategy, args.net_budget, args.directions)
    m = generate_matrix(law, args.M, args.N, args.label, args.seed)
    rep = rqip_check(m, cfg)
    print(f"strategy = {strategy}")
    print(f"vectors_tested = {rep.vectors_tested}")
    print(f"max_deviation = {rep.max_deviation:.12g}")
    print(f"passed = {str(rep.passed).lower()}")
    d = rep.to_dict()
    if args.format == "csv":
        d = {k: (json.dumps(v) if isinstance(v, dict) else v) for k, v in d.items()}
        text = _serialize([d], "csv")
    else:
        text = rep.to_json()
    _write(args, "rqip_report", text)


def _cmd_complexity(args):
    inputs = ComplexityInputs(args.N, args.k, args.delta, args.eta, args.alpha, args.p, args.c0, args.Ccon)
    res = sample_complexity(inputs, args.mode)
    print(f"log10_M = {res.log10_M:.10g}")
    if res.M is not None:
        print(f"M = {res.M}")
    print(f"c_con = {inputs.c_con:.12g}")
    print(f"C_net = {inputs.C_net:.12g}")
    rec = {"N": args.N, "k": args.k, "delta": args.delta, "eta": args.eta, "alpha": args.alpha, "p": args.p,
           "c0": args.c0, "C_con": args.Ccon, "mode": args.mode, "log10_M": res.log10_M,
           "M": None if res.M is None else str(res.M)}
    _write(args, "complexity", _serialize([rec], args.format))


def _cmd_study(args):
    if args.grid:
        try:
            grid = json.loads(Path(args.grid).read_text())
        except json.JSONDecodeError as err:
            raise DomainError(f"grid file is not valid JSON: {err}") from None
        if not isinstance(grid, list):
            raise DomainError("grid file must hold a JSON list of cells")
    else:
        grid = default_grid(args.name)
    workers = args.workers or default_workers()
    try:
        only = None if args.only is None else [int(i) for i in args.only.split(",")]
    except ValueError:
        raise DomainError(f"--only takes comma-separated cell indices, got {args.only!r}") from None
    res = run_study(StudyConfig(args.name, args.seed, grid, args.out, workers, only))
    print(f"wrote {Path(args.out) / res.csv_name} ({len(res.rows)} rows)")
    for name in sorted(res.plots):
        print(f"wrote {Path(args.out) / name}")


_COMMANDS = {"sample": _cmd_sample, "moments": _cmd_moments, "bounds": _cmd_bounds, "net": _cmd_net,
             "rqip-check": _cmd_rqip, "complexity": _cmd_complexity, "study": _cmd_study}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        validate(args)
        _COMMANDS[args.command](args)
    except SystemExit as e:  # --help
        return int(e.code or 0)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except DomainError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except (CapacityError, OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
