"""Command-line interface: ``weakmoments {estimate,diagnose,reconstruct,simulate,scenarios}``.

Exit codes: 0 success, 1 usage error, 2 input error, 3 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .estimators import (
    BENCHMARK_METHODS,
    EstimatorConfig,
    IdentifiabilityError,
    WeightingScheme,
    estimate,
)
from .kernel import GaussianKernel
from .models import FAMILIES, StudentTLocationScale, make_model
from .quadrature import QuadratureError
from .reconstruction import (
    GridFunction,
    default_grid,
    empirical_g,
    forward_multiply,
    tikhonov_invert,
)
from .robustness import (
    diagnose,
    influence_profile,
    median_diagnostics,
    relative_efficiency,
)
from .simharness import (
    ScenarioError,
    builtin_scenarios,
    emit_report,
    get_builtin,
    load_scenario,
    run_scenario,
)
from .weakcore import MomentSet

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2, 3

DEFAULT_THETA = {"cauchy": "0", "t": "0,1", "t3": "0,1", "cauchy2": "0,0", "t3-2d": "0,0,1"}
DEFAULT_MOMENTS = {"cauchy": "1", "t": "1,2", "t3": "1,2", "cauchy2": "1:0,0:1", "t3-2d": "1:0,0:1,r2"}


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_data(path, dimension: int | None = None) -> np.ndarray:
    """One observation per row, comma or whitespace separated, ``#`` comments."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: no such file")
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([float(t) for t in line.replace(",", " ").split()])
        except ValueError:
            raise InputError(f"{path}:{lineno}: could not parse {line!r} as numbers") from None
        if rows and len(rows[-1]) != len(rows[0]):
            raise InputError(f"{path}:{lineno}: expected {len(rows[0])} columns, found {len(rows[-1])}")
    if not rows:
        raise InputError(f"{path}: no observations")
    x = np.array(rows)
    if dimension is not None and x.shape[1] != dimension:
        raise InputError(f"{path}: data have {x.shape[1]} columns, the model needs {dimension}")
    return x[:, 0] if x.shape[1] == 1 else x


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def _model(args):
    theta = _floats(args.theta or DEFAULT_THETA[args.family], "--theta")
    try:
        if args.family in ("t", "t3"):
            return StudentTLocationScale(theta[0], theta[1], args.nu)
        return make_model(args.family, theta)
    except (ValueError, IndexError) as exc:
        raise UsageError(f"--theta: {exc}") from None


def _moments(args) -> MomentSet:
    text = args.moments or args.j or DEFAULT_MOMENTS[args.family]
    try:
        return MomentSet.parse(text)
    except ValueError as exc:
        raise UsageError(f"--moments: {exc}") from None


def _emit_json(payload: dict, out):
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# subcommands


def cmd_estimate(args) -> int:
    family = _model(args)
    x = read_data(args.data, family.dimension)
    kernel = GaussianKernel(args.sigma, family.dimension)
    moments = None if args.method in BENCHMARK_METHODS or args.method == "cf" else _moments(args)
    start = tuple(_floats(args.start, "--start")) if args.start else None
    try:
        config = EstimatorConfig(
            args.method,
            family,
            kernel,
            moments,
            WeightingScheme(args.weighting, args.ridge),
            args.normalized,
            args.tuning,
            start=start,
            max_iter=args.max_iter,
            tol=args.tol,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = estimate(x, config)
    names = family.param_names
    print(f"method: {args.method}   family: {args.family}   n = {len(x)}")
    se = result.std_errors
    for i, name in enumerate(names):
        line = f"{name} = {result.theta[i]:.10g}"
        if se is not None:
            line += f"   (se {se[i]:.4g})"
        print(line)
    print(f"converged: {str(result.converged).lower()}   iterations: {result.iterations}")
    if result.message:
        print(f"note: {result.message}")
    if args.json or args.out:
        _emit_json(
            {
                "command": "estimate",
                "method": args.method,
                "family": args.family,
                "n": int(len(x)),
                "theta": dict(zip(names, map(float, result.theta))),
                "std_errors": None if se is None else dict(zip(names, map(float, se))),
                "converged": bool(result.converged),
                "iterations": int(result.iterations),
                "objective": float(result.objective),
                "start": None if result.start is None else [float(v) for v in result.start],
            },
            args.out,
        )
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


def cmd_diagnose(args) -> int:
    model = _model(args)
    kernel = GaussianKernel(args.sigma, model.dimension)
    if args.method == "median":
        md = median_diagnostics(model)
        print(f"median GES: {md.ges:.6g}")
        print(f"median asymptotic variance: {md.variance:.6g}")
        if args.json:
            _emit_json({"command": "diagnose", "method": "median", "ges": md.ges, "variance": md.variance}, None)
        return EXIT_OK
    moments = _moments(args)
    weighting = "optimal" if args.weighting == "optimal" else WeightingScheme(args.weighting, args.ridge)
    d = diagnose(model, kernel, moments, weighting, args.normalized)
    print(f"gross error sensitivity: {d.ges:.6g}   (attained at x = {np.array2string(d.argmax, precision=4)})")
    print("asymptotic variance V:")
    print(np.array2string(d.variance, precision=6))
    payload = {
        "command": "diagnose",
        "family": args.family,
        "theta": [float(t) for t in model.theta],
        "moments": str(moments),
        "ges": d.ges,
        "variance": d.variance.tolist(),
    }
    if model.dimension == 1 and model.n_params == 1:
        md = median_diagnostics(model)
        eff = relative_efficiency(float(d.variance[0, 0]), md.variance)
        print(f"efficiency relative to the median: {eff:.4g}")
        payload["efficiency_vs_median"] = eff
    if args.profile:
        if model.dimension != 1:
            raise UsageError("--profile is available for univariate models")
        half = args.radius * kernel.bandwidth
        grid = np.linspace(-half, half, args.grid)
        profile = influence_profile(model, kernel, moments, grid, weighting, args.normalized)
        profile.to_csv(args.profile)
        print(f"influence profile: {args.grid} rows -> {args.profile}")
    if args.json:
        _emit_json(payload, None)
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    kernel = GaussianKernel(args.sigma)
    truth = None
    if args.g:
        if not Path(args.g).exists():
            raise InputError(f"{args.g}: no such file")
        g = GridFunction.from_csv(args.g)
    elif args.data:
        x = read_data(args.data, 1)
        g = empirical_g(x, kernel, default_grid(kernel, args.points), args.smoothing)
    else:
        grid = default_grid(kernel, args.points)
        truth = GridFunction(grid, np.exp(-0.5 * grid**2) / np.sqrt(2 * np.pi))
        g = forward_multiply(truth, kernel)
    h = tikhonov_invert(g, kernel, args.lam)
    residual = (forward_multiply(h, kernel) - g).norm()
    print(f"lambda = {args.lam:g}   grid points = {len(g.grid)}")
    print(f"L2 residual |phi h - g| = {residual:.6g}")
    if truth is not None:
        print(f"L2 error against the synthetic density = {(h - truth).norm():.6g}")
    if args.out:
        h.to_csv(args.out)
        print(f"reconstruction -> {args.out}")
    return EXIT_OK


def _resolve_scenario(name: str):
    if Path(name).exists():
        return load_scenario(name)
    try:
        return get_builtin(name)
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from None


def cmd_simulate(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    if args.n:
        sizes = tuple(int(v) for v in _floats(args.n, "--n"))
        scenario = replace(scenario, sample_sizes=sizes)
    t0 = time.perf_counter()
    report = run_scenario(scenario, args.reps, args.seed, workers=args.workers)
    elapsed = time.perf_counter() - t0
    text = emit_report(report, args.format, args.out)
    if not args.out:
        sys.stdout.write(text)
    failures = {}
    for r in report.rows:
        failures[r.estimator] = failures.get(r.estimator, 0) + r.failures
    n_comp = max(1, len(report.components))
    summary = ", ".join(f"{k}: {v // n_comp}" for k, v in failures.items())
    print(f"{report.scenario}: {report.replications} replications in {elapsed:.1f} s; failures {summary}", file=sys.stderr)
    return EXIT_OK


def cmd_scenarios(args) -> int:
    for s in builtin_scenarios():
        ests = ", ".join(e.name for e in s.estimators)
        designs = "/".join(d.label for d in s.designs)
        print(f"{s.name:12s} {s.title}")
        print(f"{'':12s} designs: {designs}; n: {list(s.sample_sizes)}; estimators: {ests}")
    return EXIT_OK


# --------------------------------------------------------------------------


def _model_flags(p):
    p.add_argument("--family", choices=sorted(FAMILIES), default="cauchy")
    p.add_argument("--theta", help="comma-separated parameter vector")
    p.add_argument("--nu", type=_positive, default=3.0, help="degrees of freedom for --family t")
    p.add_argument("--sigma", type=_positive, default=3.0, help="kernel bandwidth")
    p.add_argument("--moments", help="moment set, e.g. '1,2' or '1:0,0:1,r2'")
    p.add_argument("--j", help="alias of --moments")
    p.add_argument("--weighting", choices=["identity", "twostep", "optimal"], default="identity")
    p.add_argument("--ridge", type=float, default=0.10)
    p.add_argument("--normalized", action="store_true", help="match m_j / m_0 instead of m_j")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="weakmoments", description="Kernel-weighted moment estimation for heavy-tailed models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate parameters from a data file")
    p.add_argument("data")
    _model_flags(p)
    p.add_argument("--method", default="wm", choices=["wm", "gmm", "cf", *BENCHMARK_METHODS])
    p.add_argument("--tuning", type=_positive, help="Huber k or Tukey c")
    p.add_argument("--start", help="explicit starting value")
    p.add_argument("--max-iter", type=_positive_int, default=100)
    p.add_argument("--tol", type=_positive, default=1e-10)
    p.add_argument("--json", action="store_true", help="also print a JSON record")
    p.add_argument("--out", help="write the JSON record here")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("diagnose", help="influence function, GES and asymptotic variance")
    _model_flags(p)
    p.add_argument("--method", choices=["wm", "median"], default="wm")
    p.add_argument("--grid", type=_positive_int, default=401, help="rows in the influence profile")
    p.add_argument("--radius", type=_positive, default=12.0, help="profile half-width in bandwidths")
    p.add_argument("--profile", "--out", dest="profile", help="CSV file for the influence profile")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("reconstruct", help="Tikhonov reconstruction of f from g = phi f")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--g", help="CSV of g on a grid (x, value)")
    src.add_argument("--data", help="univariate sample; g is estimated by kernel smoothing")
    p.add_argument("--lambda", dest="lam", type=_positive, required=True)
    p.add_argument("--sigma", type=_positive, default=3.0)
    p.add_argument("--points", type=_positive_int, default=4096)
    p.add_argument("--smoothing", type=_positive, default=0.05, help="bump width in bandwidths")
    p.add_argument("--out")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("simulate", help="run a Monte Carlo scenario")
    p.add_argument("scenario", help="built-in name or scenario file")
    p.add_argument("--reps", type=_positive_int)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", help="override sample sizes, comma-separated")
    p.add_argument("--format", choices=["csv", "markdown", "md", "json"], default="csv")
    p.add_argument("--out")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scenarios", help="list built-in scenarios")
    p.set_defaults(func=cmd_scenarios)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"weakmoments: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, ScenarioError, OSError) as exc:
        print(f"weakmoments: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except IdentifiabilityError as exc:
        print(f"weakmoments: identifiability error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (QuadratureError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"weakmoments: numerical error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except ValueError as exc:
        print(f"weakmoments: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
