"""Command-line interface: ``sparse-gica <command> [options]``.

Commands: ``gen``, ``recover``, ``check``, ``dist``, ``sweep``, ``bounds``.
Options may also come from a flat ``key = value`` config file given with
``--config`` (before the command); command-line flags override the file.

Exit codes: 0 success, 1 usage error, 2 recovery did not converge (or, for
``bounds --validate``, a validation failed).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import concentration as conc
from . import validate as val
from .harness import TrialConfig, cells_csv, run_sweep, trials_csv
from .matrix_io import dumps_matrix, format_number, read_matrix, write_matrix
from .metrics import dist
from .model import (CovarianceInput, derive_rng, empirical_covariance, population_covariance, sample_bg,
                    sample_data, sample_empirical_covariance)
from .recovery import ScipParams, recover
from .structure import structure_report

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # no prefix matching: "--c" must never be taken for "--config"
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}")


def read_config(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, dashes in keys become underscores."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format_number(float(v))
    return str(v)


def _print_kv(items: dict, out) -> None:
    for k, v in items.items():
        out.write(f"{k}={_fmt(v)}\n")


def _write_text(path, text: str, out) -> None:
    if path in (None, "-"):
        out.write(text)
    else:
        Path(path).write_text(text)


def _scip_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--c", type=float, default=0.01, help="selection threshold of the finite-sample procedure")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--eps", "--epsilon", dest="eps", type=float, default=None, help="ratio bin width")
    g.add_argument("--auto-epsilon", action="store_true", help="estimate the bin width from the input (default)")
    p.add_argument("--select-tol", type=float, default=None)
    p.add_argument("--verify-tol", type=float, default=None)
    p.add_argument("--max-iterations", "--max-iter", dest="max_iterations", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparse-gica", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="flat key = value file with option defaults")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="sample A ~ BG(r, s, theta) and its covariances")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--theta", type=float)
    g.add_argument("--alpha", type=float, help="theta = s ** -alpha")
    p.add_argument("--n", type=int, default=0, help="samples; 0 writes the population covariance only")
    p.add_argument("--noise", type=float, default=0.0, help="noise variance on every row")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--write-data", action="store_true", help="also write the r x n data matrix X")

    p = sub.add_parser("recover", help="recover A from a covariance file")
    p.add_argument("--sigma", required=True, help="covariance matrix file")
    p.add_argument("--kind", choices=["population", "empirical"], default="empirical")
    p.add_argument("--n", type=int, default=None, help="sample count behind an empirical covariance")
    _scip_options(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="recovered matrix file (default stdout)")
    p.add_argument("--log", default=None, help="per-iteration run log CSV")

    p = sub.add_parser("check", help="structural report for a mixing matrix")
    p.add_argument("--A", dest="A", required=True)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--h", type=float, default=None, help="OC slack (default: h_eps(A, eps))")
    p.add_argument("--out", default=None, help="per-column CSV (default: after the summary on stdout)")

    p = sub.add_parser("dist", help="permutation/sign invariant sup-norm distance")
    p.add_argument("--A-hat", dest="A_hat", required=True)
    p.add_argument("--A", dest="A", required=True)

    p = sub.add_parser("sweep", help="(alpha, beta) phase-diagram sweep")
    p.add_argument("--alpha-list", type=_float_list, required=True)
    p.add_argument("--beta-list", type=_float_list, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--threshold", type=float, default=0.1, help="success threshold on d")
    p.add_argument("--no-structure", action="store_true", help="skip the h_eps / OC evaluation")
    _scip_options(p)
    p.add_argument("--out", default="-", help="per-cell CSV")
    p.add_argument("--trials-out", default=None, help="per-trial CSV")

    p = sub.add_parser("bounds", help="evaluate a concentration bound or run the Monte Carlo validations")
    p.add_argument("--kind", choices=["okamoto", "binomial-range", "row-norm", "deviation",
                                      "theta-band", "epsilon", "plan"])
    p.add_argument("--validate", action="store_true")
    for name, typ in [("n", int), ("p", float), ("eps", float), ("delta", float), ("r", int),
                      ("s", int), ("theta", float), ("sigma_inf", float)]:
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ)
    p.add_argument("--C", dest="C", type=float, default=None)
    p.add_argument("--c", dest="c", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    command = next((tok for tok in rest if tok in COMMANDS), None)
    if known.config and command:
        values = read_config(known.config)
        sub = parser._subparsers._group_actions[0].choices[command]
        actions = {a.dest: a for a in sub._actions if a.dest != "help"}
        for key, text in values.items():
            if key not in actions:
                raise UsageError(f"{known.config}: unknown option {key!r} for {command}")
            action = actions[key]
            if isinstance(action, argparse._StoreTrueAction):
                value = text.lower() in ("1", "true", "yes", "on")
            else:
                try:
                    value = (action.type or str)(text)
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise UsageError(f"{known.config}: bad value for {key}: {exc}")
            sub.set_defaults(**{key: value})
            # a config value satisfies a required flag
            action.required = False
    return parser.parse_args(argv)


def _params(args) -> ScipParams:
    return ScipParams(c=args.c, eps=args.eps, select_tol=args.select_tol,
                      verify_tol=args.verify_tol, max_iterations=args.max_iterations)


def cmd_gen(args, out) -> int:
    if args.theta is None and args.alpha is None:
        raise UsageError("gen: give --theta or --alpha")
    theta = args.theta if args.theta is not None else args.s ** (-args.alpha)
    A = sample_bg(args.r, args.s, theta, derive_rng(args.seed, "A"))
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    write_matrix(d / "A.txt", A)
    write_matrix(d / "Sigma.txt", population_covariance(A, args.noise).matrix)
    files = ["A.txt", "Sigma.txt"]
    if args.n > 0:
        rng = derive_rng(args.seed, "data")
        if args.write_data:
            X = sample_data(A, args.noise, args.n, rng)
            S_bar = empirical_covariance(X)
            write_matrix(d / "X.txt", X)
            files.append("X.txt")
        else:
            S_bar = sample_empirical_covariance(A, args.noise, args.n, rng)
        write_matrix(d / "Sigma_bar.txt", S_bar.matrix)
        files.append("Sigma_bar.txt")
    _print_kv({"r": args.r, "s": args.s, "theta": theta, "n": args.n, "seed": args.seed,
               "files": ",".join(files)}, out)
    return EXIT_OK


def cmd_recover(args, out) -> int:
    S = CovarianceInput(read_matrix(args.sigma), kind=args.kind, n=args.n)
    result = recover(S, _params(args), derive_rng(args.seed, "alg"))
    A_hat = result.A_hat
    _write_text(args.out, dumps_matrix(A_hat), out)
    if args.log:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "i1", "i2", "accepted", "L_size", "reason"])
        for e in result.log:
            w.writerow([e.iteration, e.pair[0], e.pair[1], int(e.accepted), e.L_size, e.reason])
        Path(args.log).write_text(buf.getvalue())
    sys.stderr.write(f"columns={len(result.columns)} iterations={result.iterations} "
                     f"rejected={result.rejected_count} converged={_fmt(result.converged)} "
                     f"stop={result.stop_reason}\n")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_check(args, out) -> int:
    A = read_matrix(args.A)
    rep = structure_report(A, eps=args.eps, h=args.h)
    _print_kv(rep.summary(), out)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["j", "support_size", "m", "deep_count", "oc_margin"])
    for j in range(len(rep.m)):
        w.writerow([j, int(rep.support_sizes[j]), int(rep.m[j]), int(rep.deep_counts[j]),
                    format_number(float(rep.oc_margin[j]))])
    _write_text(args.out, buf.getvalue(), out)
    return EXIT_OK


def cmd_dist(args, out) -> int:
    m = dist(read_matrix(args.A_hat), read_matrix(args.A))
    out.write(f"d={format_number(m.value)}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["a_hat_column", "a_column", "sign", "cost"])
    for k, j in enumerate(m.permutation):
        w.writerow([k, int(j), int(m.signs[k]), format_number(float(m.costs[k, j]))])
    return EXIT_OK


def cmd_sweep(args, out) -> int:
    if args.trials < 1:
        raise UsageError("sweep: --trials must be positive")
    grid = [(a, b) for a in args.alpha_list for b in args.beta_list]
    if not grid:
        raise UsageError("sweep: empty grid")
    base = TrialConfig(s=args.s, r=args.r, alpha=grid[0][0], beta=grid[0][1], noise=args.noise,
                       c=args.c, eps=args.eps, select_tol=args.select_tol, verify_tol=args.verify_tol,
                       max_iterations=args.max_iterations, seed=args.seed,
                       success_threshold=args.threshold, structure=not args.no_structure)
    cells, records = run_sweep(grid, args.trials, base, workers=args.threads)
    _write_text(args.out, cells_csv(cells), out)
    if args.trials_out:
        Path(args.trials_out).write_text(trials_csv(records))
    return EXIT_OK


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"bounds --kind {args.kind} needs " + ", ".join("--" + n.replace("_", "-") for n in missing))
    return [getattr(args, n) for n in names]


def cmd_bounds(args, out) -> int:
    if args.validate:
        results = val.run_all(args.seed)
        out.write(val.results_csv(results))
        return EXIT_OK if all(r.passed for r in results) else EXIT_NOT_CONVERGED
    if args.kind is None:
        raise UsageError("bounds: give --kind or --validate")
    k = args.kind
    if k == "okamoto":
        n, p, eps = _need(args, "n", "p", "eps")
        lower, upper = conc.okamoto_tail(n, p, eps)
        res = {"lower_tail": lower, "upper_tail": upper}
    elif k == "binomial-range":
        n, p, delta = _need(args, "n", "p", "delta")
        lo, hi = conc.binomial_range(n, p, delta)
        res = {"low": lo, "high": hi}
    elif k == "row-norm":
        r, s, theta = _need(args, "r", "s", "theta")
        thr, prob = conc.row_norm_bound(r, s, theta)
        res = {"threshold": thr, "probability": prob, "probability_capped": min(prob, 1.0)}
    elif k == "deviation":
        sigma, r, delta, n = _need(args, "sigma_inf", "r", "delta", "n")
        res = {"deviation": conc.covariance_deviation(sigma, r, delta, n)}
    elif k == "theta-band":
        r, s, delta = _need(args, "r", "s", "delta")
        lo, hi = conc.theta_band(r, s, delta, C=args.C or 1.0, c=args.c)
        res = {"theta_low": lo, "theta_high": hi}
    elif k == "epsilon":
        r, s, theta, delta = _need(args, "r", "s", "theta", "delta")
        res = {"eps": conc.theoretical_epsilon(r, s, theta, delta, c=args.c)}
    else:
        sigma, eps, r, delta = _need(args, "sigma_inf", "eps", "r", "delta")
        res = {"n": conc.plan_sample_size(sigma, eps, r, delta, C=args.C or 36.0)}
    _print_kv(res, out)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "recover": cmd_recover, "check": cmd_check, "dist": cmd_dist,
            "sweep": cmd_sweep, "bounds": cmd_bounds}


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = _apply_config(parser, list(sys.argv[1:] if argv is None else argv))
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"sparse-gica: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
