"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 invalid data or configuration,
4 numerical failure. Structured output is JSON carrying
``"precistab_schema": 1``; floats use the shortest round-trip decimal form.
"""

import argparse
import json
import math
import os
import sys
import warnings

import numpy as np

from . import estimators, linalg, portfolio, precision, transport
from .exceptions import DataError, NoConvergence, ParseError, PrecistabError, ShapeMismatch
from .svg import scatter_svg

SCHEMA_VERSION = 1

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def read_csv(path):
    """Parse a numeric CSV file into an (N, n) array.

    Lines starting with ``#`` and blank lines are skipped; LF and CRLF
    endings are accepted; every row must have the same number of fields.
    """
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        cells = stripped.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ParseError(f"{path}: expected {width} fields, found {len(cells)}", lineno, len(cells))
        row = []
        for col, cell in enumerate(cells, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{path}: not a number: {cell.strip()!r}", lineno, col) from None
            if not math.isfinite(v):
                raise ParseError(f"{path}: non-finite value {cell.strip()!r}", lineno, col)
            row.append(v)
        rows.append(row)
    if not rows:
        from .exceptions import EmptyInput

        raise EmptyInput(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def matrix_json(A):
    A = np.asarray(A, dtype=float)
    return {"n": int(A.shape[0]), "data": [float(v) for v in A.ravel()]}


def matrix_from_json(obj):
    n = int(obj["n"])
    A = np.asarray(obj["data"], dtype=float)
    if A.size != n * n:
        raise ShapeMismatch(f"matrix field has {A.size} entries, expected {n * n}")
    from ._validation import as_symmetric

    return as_symmetric(A.reshape(n, n), "matrix")


def dumps(payload):
    """Canonical JSON text (sorted keys, shortest round-trip floats)."""
    payload = {"precistab_schema": SCHEMA_VERSION, **payload}
    return json.dumps(_clean(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def _emit(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


def _matrix_csv(A):
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in np.atleast_2d(A))


def cmd_estimate(args):
    X = read_csv(args.input)
    s = estimators.SampleSet(X)
    cov = estimators.sample_cov_centered(s) if args.centered else estimators.sample_cov_uncentered(s)
    values = linalg.eigvalsh(cov)
    if args.format == "csv":
        return _matrix_csv(cov)
    payload = {
        "command": "estimate",
        "centered": args.centered,
        "n_samples": s.n_samples,
        "mean": estimators.sample_mean(s),
        "covariance": matrix_json(cov),
        "eigenvalues": values,
        "spectral_gap": estimators.spectral_gap(values) if values.size >= 2 else None,
    }
    return dumps(payload)


def cmd_precision(args):
    X = read_csv(args.input)
    cov = estimators.sample_cov_centered(X) if args.centered else estimators.sample_cov_uncentered(X)
    problem = precision.PrecisionProblem(args.lam, cov)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = precision.solve(problem, tol=args.tol, max_iter=args.max_iter)
    if not rep.converged:
        raise NoConvergence(
            f"solver stopped after {rep.iterations} iterations with KKT residual {rep.kkt_residual:.3e}", rep
        )
    S = rep.s_star
    tau = args.tau if args.tau is not None else 1e-3 * float(np.max(np.abs(S)))
    if args.format == "csv":
        return _matrix_csv(S)
    payload = {
        "command": "precision",
        "lambda": args.lam,
        "covariance": matrix_json(cov),
        "precision": matrix_json(S),
        "objective": rep.objective,
        "kkt_residual": rep.kkt_residual,
        "iterations": rep.iterations,
        "converged": rep.converged,
        "tau": tau,
        "edges": sorted([list(e) for e in precision.edge_set(S, tau)]),
    }
    if args.eps is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sm = precision.solve_smoothed(problem, args.eps)
        payload["smoothed"] = {
            "eps": args.eps,
            "precision": matrix_json(sm.s_star),
            "objective": sm.objective,
            "gradient_norm": sm.kkt_residual,
            "converged": sm.converged,
            "gap_fro": linalg.norm_fro(sm.s_star - S),
        }
    return dumps(payload)


def _measure(X, kind, path):
    if kind == "scalar":
        if X.shape[1] != 1:
            raise ShapeMismatch(f"{path}: scalar atoms need one column, found {X.shape[1]}")
        return transport.EmpiricalMeasure.scalars(X[:, 0])
    if kind == "vector":
        return transport.EmpiricalMeasure.vectors(X)
    n = int(round(math.sqrt(X.shape[1])))
    if n * n != X.shape[1]:
        raise ShapeMismatch(f"{path}: matrix rows need n*n fields, found {X.shape[1]}")
    return transport.EmpiricalMeasure.matrices(X.reshape(-1, n, n))


def cmd_wasserstein(args):
    a = _measure(read_csv(args.a), args.kind, args.a)
    b = _measure(read_csv(args.b), args.kind, args.b)
    payload = {"command": "wasserstein", "kind": args.kind, "order": args.order, "atoms": len(a)}
    if args.order == 1:
        payload["w1"] = transport.w1_assignment(a, b)
        if args.kind == "scalar":
            payload["w1_sorted"] = transport.w1_sorted_1d(a, b)
    else:
        payload["lower"] = transport.fm_lower_dictionary(a, b, order=2)
        payload["upper"] = transport.fm2_upper(a, b)
    return dumps(payload)


def _parse_vector(text):
    try:
        return np.array([float(t) for t in text.split(",")], dtype=float)
    except ValueError:
        raise ParseError(f"--mu: expected comma-separated numbers, got {text!r}", 1, 1) from None


def cmd_portfolio(args):
    mu = _parse_vector(args.mu)
    sigma = read_csv(args.sigma)
    p = portfolio.PortfolioProblem(mu, sigma, args.z)
    sol = portfolio.solve_markowitz(p)
    payload = {
        "command": "portfolio",
        "z": p.z,
        "w": sol.w,
        "value": sol.value,
        "duals": {"lambda1": sol.lambda1, "lambda2": sol.lambda2, "s": sol.s},
        "active_set": list(sol.active_set),
    }
    try:
        lhs, bound = portfolio.dual_bound_check(p)
        payload["dual_bound"] = {"abs_lambda1": lhs, "bound": bound, "holds": bool(lhs <= bound + 1e-8)}
    except DataError as exc:
        payload["dual_bound"] = {"applicable": False, "reason": str(exc)}
    return dumps(payload)


PROXIES = ("d1_proxy", "dbar2", "w2_gaussian")


def cmd_experiment(args):
    from .lab.experiment import ExperimentConfig, run_stability_experiment

    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {args.config}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{args.config}: {exc.msg}", exc.lineno, exc.colno) from None
    if isinstance(raw, dict):
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.n_jobs is not None:
            raw["n_jobs"] = args.n_jobs
    config = ExperimentConfig.from_dict(raw)
    report = run_stability_experiment(config)
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    csv_text = report.to_csv()
    with open(os.path.join(out_dir, "report.csv"), "w", newline="\n") as fh:
        fh.write(csv_text)
    with open(os.path.join(out_dir, "report.json"), "w", newline="\n") as fh:
        fh.write(report.to_json() + "\n")
    series = {}
    coords = []
    for r in report.rows:
        if r["coordinate"] not in coords:
            coords.append(r["coordinate"])
    for c in coords:
        series[c] = (report.column(args.proxy, c), report.column("dK_hat", c))
    with open(os.path.join(out_dir, "plot.svg"), "w", newline="\n") as fh:
        fh.write(scatter_svg(series, args.proxy, "dK_hat", f"{config.statistic.kind.value} pushforward distance"))
    summary = {
        "command": "experiment",
        "out_dir": out_dir,
        "rows": len(report.rows),
        "all_pass": report.all_pass,
        "files": ["report.csv", "report.json", "plot.svg"],
    }
    if args.format == "csv":
        return csv_text
    return dumps(summary)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"not finite: {text!r}")
    return v


def _u64(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return v


def build_parser():
    parser = _Parser(prog="precistab", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--out", default=None, help="write output here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--seed", type=_u64, default=None, help="random seed (unused by deterministic commands)")

    p = sub.add_parser(
        "estimate",
        help="sample mean, covariance and spectrum",
        description="JSON fields: mean, covariance {n, data (row-major)}, eigenvalues (descending), spectral_gap.",
    )
    p.add_argument("input")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--centered", dest="centered", action="store_true", default=True)
    g.add_argument("--uncentered", dest="centered", action="store_false")
    common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser(
        "precision",
        help="sparse precision matrix",
        description="JSON fields: precision {n, data}, objective, kkt_residual, iterations, converged, tau, edges; "
        "with --eps also smoothed {precision, objective, gradient_norm, gap_fro}.",
    )
    p.add_argument("input")
    p.add_argument("--lambda", dest="lam", type=_positive_float, required=True, help="penalty weight (> 0)")
    p.add_argument("--tol", type=_positive_float, default=1e-7)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--eps", type=_positive_float, default=None, help="also solve the smoothed problem")
    p.add_argument("--tau", type=_positive_float, default=None, help="edge threshold (default 1e-3 max|S_ij|)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--centered", dest="centered", action="store_true", default=True)
    g.add_argument("--uncentered", dest="centered", action="store_false")
    common(p)
    p.set_defaults(func=cmd_precision)

    p = sub.add_parser(
        "wasserstein",
        help="transport distance between two samples",
        description="JSON fields: w1 (order 1; also w1_sorted for scalars) or lower/upper (order 2). "
        "Matrix atoms are rows of n*n entries.",
    )
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--kind", choices=("scalar", "vector", "matrix"), default="vector")
    p.add_argument("--order", type=int, choices=(1, 2), default=1)
    common(p)
    p.set_defaults(func=cmd_wasserstein)

    p = sub.add_parser(
        "portfolio",
        help="long-only minimum-variance portfolio",
        description="JSON fields: w, value, duals {lambda1, lambda2, s}, active_set, dual_bound.",
    )
    p.add_argument("--mu", required=True, help="comma-separated expected returns")
    p.add_argument("--sigma", required=True, help="CSV file with the covariance matrix")
    p.add_argument("--z", type=_positive_float, required=True, help="target return")
    common(p)
    p.set_defaults(func=cmd_portfolio)

    p = sub.add_parser(
        "experiment",
        help="perturbation sweep from a JSON config",
        description="Writes report.json, report.csv and plot.svg into --out-dir; prints a JSON summary.",
    )
    p.add_argument("config")
    p.add_argument("--out-dir", default="precistab-report")
    p.add_argument("--proxy", choices=PROXIES, default="d1_proxy", help="x axis of the plot")
    p.add_argument("--n-jobs", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = args.func(args)
    except PrecistabError as exc:
        sys.stderr.write(f"precistab: error: {exc}\n")
        return exc.exit_code
    _emit(text, getattr(args, "out", None))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
