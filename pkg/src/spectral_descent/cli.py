"""Command line front end.

Exit codes: 0 success, 2 partial (some run did not converge), 1 error,
64 bad flags or values, 66 unreadable or malformed input files.

Any subcommand accepts ``--config FILE`` with ``key=value`` lines naming
long flags (``gamma=5``, ``count=3``); flags on the command line win over the
file, which wins over built-in defaults.
"""
import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import functional as fn
from .gd import ConvergenceError, gd_b_metric, gd_deflated, gd_generalized, gd_standard
from .grid import domain as gdomain
from .grid.bench import bench_deflated
from .grid.export import export_field
from .grid.flow import FlowConfig, random_field, solve_eigenfunctions
from .grid.newton import compare_grid_rules, newton_grid
from .io import (
    MatrixFileError,
    RunManifest,
    file_digest,
    fmt,
    load_matrix_csv,
    write_rows,
)
from .newton import UpdateRule, compare_update_rules, newton_solve
from .oracle import RandomProblemSpec, generalized_eigh, random_pair
from .rng import substream

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL, EXIT_USAGE, EXIT_NOINPUT = 0, 1, 2, 64, 66


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _auto_or_float(text):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}") from None


def _workers():
    env = os.environ.get("SPECTRAL_DESCENT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"SPECTRAL_DESCENT_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def build_parser():
    p = _Parser(prog="spectral-descent", description="Eigenpairs by unconstrained descent.")
    p.add_argument("--config", help="key=value defaults file")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="eigenpairs of a matrix (pair) from CSV")
    s.add_argument("--config", help=argparse.SUPPRESS)
    s.add_argument("--matrix", required=True)
    s.add_argument("--b")
    s.add_argument("--method", choices=["gd", "gd-b", "newton", "rqi"], default="gd")
    s.add_argument("--gamma", type=_auto_or_float, default="auto")
    s.add_argument("--alpha", type=_auto_or_float, default="auto")
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-iter", type=int)
    s.add_argument("--force-alpha", action="store_true")
    s.add_argument("--exact-gamma", action="store_true",
                   help="with --gamma auto, shift by the oracle's smallest eigenvalue instead of a bound")
    s.add_argument("--out", default="out")

    s = sub.add_parser("laplacian", help="Laplacian eigenfunctions on a grid domain")
    s.add_argument("--config", help=argparse.SUPPRESS)
    s.add_argument("--domain", default="l-shape",
                   help="l-shape, square, full-square, annulus:RIN:ROUT or file:PATH")
    s.add_argument("--grid", type=int, default=81)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--method", choices=["flow", "newton"], default="flow")
    s.add_argument("--inner", choices=["minres", "direct"], default="minres",
                   help="linear solver inside each Newton step")
    s.add_argument("--gamma", type=float, default=50.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=float, default=1e-13)
    s.add_argument("--max-steps", type=int, default=5_000_000)
    s.add_argument("--out", default="out")

    s = sub.add_parser("compare", help="hit counts of the two Newton update rules")
    s.add_argument("--config", help=argparse.SUPPRESS)
    s.add_argument("--mode", choices=["matrix", "grid"], default="matrix")
    s.add_argument("--pairs", type=int, default=5)
    s.add_argument("--trials", type=int, default=200)
    s.add_argument("--n", type=int, default=10)
    s.add_argument("--grid", type=int, default=41)
    s.add_argument("--start", choices=["positive", "signed"], default="positive",
                   help="grid mode: uniform(0,1) or uniform(-1,1) starting fields")
    s.add_argument("--gamma", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="out")

    s = sub.add_parser("bench", help="time flow, Newton and Rayleigh Newton from warm starts")
    s.add_argument("--config", help=argparse.SUPPRESS)
    s.add_argument("--domain", default="l-shape")
    s.add_argument("--grid", type=int, default=41)
    s.add_argument("--count", type=int, default=15)
    s.add_argument("--epsilon", type=float, choices=[0.1, 0.01], default=0.01)
    s.add_argument("--inner", choices=["minres", "direct"], default="direct",
                   help="linear solver inside each Newton step")
    s.add_argument("--gamma", type=float, default=50.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="out")

    s = sub.add_parser("oracle", help="reference eigenvalues")
    s.add_argument("action", choices=["eigh"])
    s.add_argument("--config", help=argparse.SUPPRESS)
    s.add_argument("--matrix", required=True)
    s.add_argument("--b")
    return p


def _config_args(path, parser, command):
    """Translate a key=value file into flags placed before the user's flags."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(f"{path}: {e.strerror or e}") from None
    sub = parser._subparsers._group_actions[0].choices[command]
    flags = {a.dest: a for a in sub._actions}
    out = []
    for num, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if not sep or key not in flags or not flags[key].option_strings:
            raise UsageError(f"{path}:{num}: unknown setting {line!r}")
        opt = flags[key].option_strings[-1]
        if isinstance(flags[key], argparse._StoreTrueAction):
            if value.lower() in ("1", "true", "yes"):
                out.append(opt)
        else:
            out += [opt, value]
    return out


def parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        extra = _config_args(args.config, parser, args.command)
        user = [a for a in argv]
        i = user.index(args.command)
        args = parser.parse_args(user[: i + 1] + extra + user[i + 1:])
    return args


def _prepare_out(path):
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise InputError(f"cannot create output directory {out}: {e.strerror or e}") from None
    return out


def _load(path):
    try:
        return load_matrix_csv(path)
    except MatrixFileError as e:
        raise InputError(str(e)) from None


def _manifest(args, out, inputs=(), phases=None, status="complete"):
    config = {k: v for k, v in vars(args).items() if k not in ("config",) and v is not None}
    RunManifest(command=["spectral-descent"] + list(_ARGV), config=config,
                seed=getattr(args, "seed", 0) or 0,
                inputs={str(p): file_digest(p) for p in inputs},
                phases=phases or {}, status=status).write(out)


def _pair_rows(pairs):
    return [(j + 1, p.lam, p.residual, p.norm_law_gap) for j, p in enumerate(pairs)]


def cmd_solve(args):
    a = _load(args.matrix)
    b = _load(args.b) if args.b else None
    if b is not None and b.shape != a.shape:
        raise InputError("A and B differ in size")
    try:
        bspd = fn.as_spd(b)
    except fn.NotSPDError as e:
        raise InputError(f"{args.b}: {e}") from None
    if args.gamma != "auto":
        gamma = args.gamma
    elif args.exact_gamma:
        gamma = max(0.0, -generalized_eigh(a, b)[0][0]) + 1.0
    else:
        gamma = fn.choose_gamma(a, bspd)
    try:
        fn.Functional(a, bspd, gamma)
        cfg = fn.SolverConfig(gamma=gamma, alpha=None if args.alpha == "auto" else args.alpha,
                              max_iter=args.max_iter, seed=args.seed, force_alpha=args.force_alpha)
    except ValueError as e:
        raise UsageError(str(e)) from None
    n = a.shape[0]
    if not 1 <= args.count <= n:
        raise UsageError(f"--count must lie in [1, {n}]")
    if args.method in ("newton", "rqi") and args.count != 1:
        raise UsageError("Newton methods find one pair; use --count 1")
    out = _prepare_out(args.out)
    t0 = time.perf_counter()
    status = "complete"
    try:
        if args.count > 1:
            pairs, traces = gd_deflated(a, bspd, args.count, cfg)
        elif args.method == "gd":
            p, t = gd_standard(a, cfg) if bspd is None else gd_generalized(a, bspd, cfg)
            pairs, traces = [p], [t]
        elif args.method == "gd-b":
            p, t = gd_standard(a, cfg) if bspd is None else gd_b_metric(a, bspd, cfg)
            pairs, traces = [p], [t]
        else:
            rule = UpdateRule.NORM_BASED if args.method == "newton" else UpdateRule.RAYLEIGH
            p, t = newton_solve(a, bspd, cfg, rule=rule)
            pairs, traces = [p], [t]
    except ConvergenceError as e:
        print(f"warning: {e}", file=sys.stderr)
        pairs, status = e.partial, "partial"
        traces = [None] * len(pairs) + [e.trace]
    except ValueError as e:
        raise UsageError(str(e)) from None
    if any(t is not None and not t.converged for t in traces):
        status = "partial"
    write_rows(out / "eigenpairs.csv", ["index", "lambda", "residual", "norm_law_gap"], _pair_rows(pairs))
    write_rows(out / "vectors.csv", ["index"] + [f"x{i}" for i in range(n)],
               [[j + 1] + list(p.x) for j, p in enumerate(pairs)])
    for j, t in enumerate(traces):
        if t is not None:
            write_rows(out / f"trace_{j + 1}.csv", ["k", "f", "grad_norm", "norm_b", "lambda"], t.rows())
    inputs = [args.matrix] + ([args.b] if args.b else [])
    _manifest(args, out, inputs, {"solve": time.perf_counter() - t0}, status)
    for j, p in enumerate(pairs):
        print(f"{j + 1} {fmt(p.lam)}")
    return EXIT_OK if status == "complete" else EXIT_PARTIAL


def _domain(args):
    try:
        return gdomain.from_name(args.domain, args.grid)
    except gdomain.MaskFormatError as e:
        raise InputError(str(e)) from None
    except OSError as e:
        raise InputError(f"{args.domain}: {e.strerror or e}") from None
    except ValueError as e:
        raise UsageError(str(e)) from None


def cmd_laplacian(args):
    domain = _domain(args)
    try:
        cfg = FlowConfig(gamma=args.gamma, tol=args.tol, max_steps=args.max_steps, seed=args.seed,
                         inner=args.inner)
    except ValueError as e:
        raise UsageError(str(e)) from None
    if not 1 <= args.count <= domain.interior:
        raise UsageError(f"--count must lie in [1, {domain.interior}]")
    out = _prepare_out(args.out)
    t0 = time.perf_counter()
    status = "complete"
    if args.method == "flow":
        try:
            pairs, _ = solve_eigenfunctions(domain, args.count, cfg)
        except ConvergenceError as e:
            print(f"warning: {e}", file=sys.stderr)
            pairs, status = e.partial, "partial"
    else:
        pairs = []
        for j in range(args.count):
            u0 = random_field(domain, substream(cfg.seed, "laplacian", j, "u0"))
            pair, trace = newton_grid(domain, u0, cfg)
            if not trace.converged:
                status = "partial"
            pairs.append(pair)
        pairs.sort(key=lambda p: p.lam)
    write_rows(out / "eigenvalues.csv", ["index", "lambda", "residual", "norm_law_gap"], _pair_rows(pairs))
    for j, p in enumerate(pairs):
        export_field(p.field, out / f"field_{j + 1:02d}.pgm", "pgm", lam=p.lam, gamma=cfg.gamma)
        export_field(p.field, out / f"field_{j + 1:02d}.csv", "csv")
    inputs = [args.domain[5:]] if args.domain.startswith("file:") else []
    _manifest(args, out, inputs, {"laplacian": time.perf_counter() - t0}, status)
    for j, p in enumerate(pairs):
        print(f"{j + 1} {fmt(p.lam)}")
    return EXIT_OK if status == "complete" else EXIT_PARTIAL


STATS_HEADER = ["rule", "hits", "max_lambda", "mean_lambda", "failures"]


def _stats_rows(stats):
    return [(r, s.hits, s.max_lambda, s.mean_lambda, s.failures) for r, s in stats.rules.items()]


def matrix_problem(seed, index, n):
    """The index-th random SPD pair of a comparison run."""
    spec = RandomProblemSpec(n, int(substream(seed, "pair", index).integers(2**31)),
                             eig_range_a=(0.1, 10.0), eig_range_b=(1.0, 2.0), spd_a=True)
    return random_pair(spec)


def cmd_compare(args):
    if args.pairs < 1 or args.trials < 1 or args.n < 1:
        raise UsageError("--pairs, --trials and --n must be positive")
    out = _prepare_out(args.out)
    t0 = time.perf_counter()
    trial_rows, per_pair = [], []
    if args.mode == "matrix":
        workers = _workers()
        for i in range(args.pairs):
            a, b = matrix_problem(args.seed, i, args.n)
            # A is positive definite here, so any positive shift is admissible
            cfg = fn.SolverConfig(gamma=args.gamma or 1.0, seed=args.seed * 1000003 + i)
            per_pair.append(compare_update_rules(a, b, args.trials, cfg, workers=workers))
    else:
        domain = gdomain.l_shape(args.grid)
        try:
            cfg = FlowConfig(gamma=args.gamma or 50.0, seed=args.seed)
        except ValueError as e:
            raise UsageError(str(e)) from None
        per_pair.append(compare_grid_rules(domain, args.trials, cfg, start=args.start))
    totals = {}
    for i, stats in enumerate(per_pair):
        write_rows(out / f"pair_{i + 1}.csv", STATS_HEADER, _stats_rows(stats))
        for r in stats.records:
            trial_rows.append((i + 1, r.trial, r.rule, r.lam, r.terminal_reason, r.iterations, int(r.hit)))
        for rule, s in stats.rules.items():
            agg = totals.setdefault(rule, [0, [], 0])
            agg[0] += s.hits
            agg[1] += s.lambdas
            agg[2] += s.failures
    summary = [(rule, h, max(l) if l else float("nan"), float(np.mean(l)) if l else float("nan"), f)
               for rule, (h, l, f) in totals.items()]
    write_rows(out / "summary.csv", STATS_HEADER, summary)
    write_rows(out / "trials.csv", ["pair", "trial", "rule", "lambda", "terminal_reason", "iterations", "hit"],
               trial_rows)
    _manifest(args, out, (), {"compare": time.perf_counter() - t0})
    for row in summary:
        print(" ".join(fmt(v) for v in row))
    return EXIT_OK


def cmd_bench(args):
    domain = _domain(args)
    if args.count < 1:
        raise UsageError("--count must be positive")
    out = _prepare_out(args.out)
    t0 = time.perf_counter()
    try:
        cfg = FlowConfig(gamma=args.gamma, seed=args.seed, inner=args.inner)
    except ValueError as e:
        raise UsageError(str(e)) from None
    rows = bench_deflated(domain, args.count, args.epsilon, cfg)
    cum = np.cumsum([r.flow_seconds for r in rows])
    write_rows(out / "timing.csv",
               ["index", "lambda", "flow_seconds", "flow_cumulative", "newton_seconds", "rqi_seconds",
                "newton_lambda", "rqi_lambda"],
               [(r.index, r.lam, r.flow_seconds, c, r.newton_seconds, r.rqi_seconds, r.newton_lambda,
                 r.rqi_lambda) for r, c in zip(rows, cum)])
    _manifest(args, out, (), {"bench": time.perf_counter() - t0})
    return EXIT_OK


def cmd_oracle(args):
    a = _load(args.matrix)
    b = _load(args.b) if args.b else None
    try:
        w, _ = generalized_eigh(a, b)
    except ValueError as e:
        raise InputError(str(e)) from None
    print(" ".join(format(v, ".17g") for v in w))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "laplacian": cmd_laplacian, "compare": cmd_compare,
            "bench": cmd_bench, "oracle": cmd_oracle}
_ARGV = []


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    _ARGV[:] = argv
    try:
        args = parse(argv)
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"spectral-descent: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as e:
        print(f"spectral-descent: {e}", file=sys.stderr)
        return EXIT_NOINPUT
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    except Exception as e:  # noqa: BLE001 - report and exit non-zero
        print(f"spectral-descent: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
