"""Command-line surface: derive, simulate, density, fit, coverage, compare.

Exit codes: 0 success, 2 invalid model/order/arguments, 3 malformed CSV input,
4 non-finite likelihood at the starting parameters.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .engine import derive_ode_system
from .evalstats import coverage_study, integrated_error
from .likelihood import LikelihoodConfig, default_order, transition_density_fn
from .mcmc import default_proposal, run_chain, summarize
from .models import (
    CsvFormatError,
    TimeSeries,
    build,
    get_model,
    simulate_path,
    simulate_path_cir_exact,
    true_transition_density,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BAD_CSV = 3
EXIT_BAD_START = 4


def _floats(text):
    return np.array([float(p) for p in text.split(",")])


def _grid(text):
    lo, hi, count = text.split(":")
    return float(lo), float(hi), int(count)


def _sweep(text):
    name, rest = text.split("=")
    lo, hi, count = rest.split(":")
    return name, float(lo), float(hi), int(count)


# config-file keys and their converters (string values from key=value lines)
_CONFIG_TYPES = {
    "model": str,
    "theta": str,
    "theta0": str,
    "x0": str,
    "order": int,
    "n": int,
    "dt": float,
    "t0": float,
    "seed": int,
    "substeps": int,
    "chain_length": int,
    "burn_in": int,
    "level": float,
    "jobs": int,
    "replicates": int,
    "series_length": int,
    "step_sds": str,
    "chains": int,
    "grid": str,
    "out": str,
    "data": str,
    "chain_out": str,
    "domain": str,
    "vix_scale": float,
    "exact": lambda s: s.lower() in ("1", "true", "yes"),
}


def _load_config(path):
    values = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line is not key=value: {line!r}")
            key, _, val = line.partition("=")
            key = key.strip().replace("-", "_")
            if key not in _CONFIG_TYPES:
                raise ValueError(f"unknown config key {key!r}")
            values[key] = _CONFIG_TYPES[key](val.strip())
    return values


def _resolved_order(args, model):
    return args.order if args.order is not None else default_order(model.dim)


def cmd_derive(args):
    try:
        model = get_model(args.model)
        system = derive_ode_system(model, _resolved_order(args, model))
        theta = None
        if args.theta is not None:
            theta = build(args.model, _floats(args.theta)).validate(_floats(args.theta))
        lines = system.equations(theta)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for line in lines:
        print(line)
    return EXIT_OK


def cmd_simulate(args):
    try:
        theta = _floats(args.theta)
        model = build(args.model, theta)
        x0 = _floats(args.x0)
        if x0.shape != (model.dim,):
            raise ValueError(f"x0 must have {model.dim} component(s)")
        if args.n < 2 or args.dt <= 0:
            raise ValueError("need n >= 2 observations and dt > 0")
        times = args.t0 + np.arange(args.n) * args.dt
        if args.exact:
            if args.model != "cir":
                raise ValueError("--exact sampling is available for the cir model only")
            series = simulate_path_cir_exact(theta, x0, times, seed=args.seed)
        else:
            series = simulate_path(
                model, theta, x0, times, substeps=args.substeps, seed=args.seed
            )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    series.write_csv(args.out)
    print(f"wrote {len(series)} observations to {args.out}")
    return EXIT_OK


def cmd_density(args):
    try:
        theta = _floats(args.theta)
        model = build(args.model, theta)
        if model.dim != 1:
            raise ValueError("density grids are univariate; use a dim-1 model")
        lo, hi, count = _grid(args.grid)
        cfg = LikelihoodConfig(order=_resolved_order(args, model))
        f = transition_density_fn(model, theta, _floats(args.x0), args.dt, cfg)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    xs = np.linspace(lo, hi, count)
    rows = ["x,density"] + ["%.17g,%.17g" % (x, f(x)) for x in xs]
    text = "\n".join(rows) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _fit_one(payload):
    (model_name, theta0, data, order, chain_length, seed, step_sds) = payload
    model = get_model(model_name)
    series = TimeSeries(*data)
    proposal = default_proposal(model, theta0)
    if step_sds is not None:
        proposal.step_sds[:] = step_sds
    return run_chain(
        model,
        series,
        theta0,
        length=chain_length,
        seed=seed,
        proposal=proposal,
        lik_cfg=LikelihoodConfig(order=order),
    )


def cmd_fit(args):
    try:
        theta0 = _floats(args.theta0)
        model = build(args.model, theta0)
        order = _resolved_order(args, model)
        if args.burn_in >= args.chain_length:
            raise ValueError("burn-in must be smaller than the chain length")
        step_sds = None if args.step_sds is None else _floats(args.step_sds)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        series = TimeSeries.read_csv(args.data)
        if series.dim != model.dim:
            raise CsvFormatError(
                f"data has {series.dim} state column(s), model needs {model.dim}", line=1
            )
        if len(series) < 2:
            raise CsvFormatError("need at least two observations", line=2)
        if args.vix_scale != 1.0:
            if model.dim < 2:
                raise CsvFormatError("--vix-scale needs a bivariate model", line=1)
            scaled = series.values.copy()
            scaled[:, 1] *= args.vix_scale
            series = TimeSeries(series.times, scaled)
    except (OSError, CsvFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CSV

    payloads = [
        (
            args.model,
            theta0,
            (series.times, series.values),
            order,
            args.chain_length,
            args.seed + k,
            step_sds,
        )
        for k in range(args.chains)
    ]
    try:
        if args.chains > 1 and args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                chains = list(pool.map(_fit_one, payloads))
        else:
            chains = [_fit_one(p) for p in payloads]
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_START

    alpha = 1.0 - args.level
    for k, chain in enumerate(chains):
        out = args.chain_out if args.chains == 1 else _suffixed(args.chain_out, k)
        chain.write_csv(out)
        summary = summarize(chain, args.burn_in, alpha)
        if args.chains > 1:
            print(f"--- chain {k} (seed {args.seed + k}) -> {out}")
        else:
            print(f"chain written to {out}")
        print(summary.format())
    return EXIT_OK


def _suffixed(path, k):
    if "." in path.rsplit("/", 1)[-1]:
        stem, dot, ext = path.rpartition(".")
        return f"{stem}_{k}{dot}{ext}"
    return f"{path}_{k}"


def cmd_coverage(args):
    try:
        theta = _floats(args.theta)
        model = build(args.model, theta)
        x0 = _floats(args.x0)
        theta0 = None if args.theta0 is None else _floats(args.theta0)
        step_sds = None if args.step_sds is None else _floats(args.step_sds)
        if args.exact and args.model != "cir":
            raise ValueError("--exact sampling is available for the cir model only")
        report = coverage_study(
            model,
            theta,
            replicates=args.replicates,
            series_length=args.series_length,
            x0=x0,
            dt=args.dt,
            chain_length=args.chain_length,
            burn_in=args.burn_in,
            level=args.level,
            theta0=theta0,
            step_sds=step_sds,
            order=args.order,
            substeps=args.substeps,
            exact_cir=args.exact,
            seed=args.seed,
            jobs=args.jobs,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        report.write_csv(args.out)
    print(report.format_table())
    return EXIT_OK


def cmd_compare(args):
    try:
        theta = _floats(args.theta)
        model = build(args.model, theta)
        if args.model not in ("cir", "gbm"):
            raise ValueError("compare needs a model with an exact transition density (cir, gbm)")
        x0 = float(_floats(args.x0)[0])
        order = _resolved_order(args, model)
        sweeps = [_sweep(s) for s in (args.sweep or [])]
        for name, *_ in sweeps:
            if name not in model.param_names:
                raise ValueError(f"unknown sweep parameter {name!r}")
        dt_values = [float(v) for v in args.dt_sweep.split(",")] if args.dt_sweep else []
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    def ie_pair(th, dt):
        f_true = lambda x: true_transition_density(model, th, x0, x, dt)  # noqa: E731
        domain = _auto_domain(model, th, x0, dt) if args.domain is None else tuple(
            float(v) for v in args.domain.split(":")
        )
        f4 = transition_density_fn(model, th, [x0], dt, LikelihoodConfig(order=order))
        f2 = transition_density_fn(model, th, [x0], dt, LikelihoodConfig(order=2))
        ie4 = integrated_error(f_true, lambda x: f4(x), domain)
        ie2 = integrated_error(f_true, lambda x: f2(x), domain)
        return ie4, ie2

    rows = ["sweep,param,value,ie_saddle,ie_gaussian"]
    # self-test: the oracle against itself is exactly zero
    f_true = lambda x: true_transition_density(model, theta, x0, x, args.dt)  # noqa: E731
    domain = _auto_domain(model, theta, x0, args.dt) if args.domain is None else tuple(
        float(v) for v in args.domain.split(":")
    )
    rows.append("selftest,,%g,%.17g,%.17g" % (0.0, integrated_error(f_true, f_true, domain), 0.0))

    base = ie_pair(theta, args.dt)
    rows.append("base,,%g,%.17g,%.17g" % (args.dt, base[0], base[1]))
    for name, lo, hi, count in sweeps:
        pos = model.param_names.index(name)
        for value in np.linspace(lo, hi, count):
            th = theta.copy()
            th[pos] = value
            ie4, ie2 = ie_pair(th, args.dt)
            rows.append("param,%s,%.17g,%.17g,%.17g" % (name, value, ie4, ie2))
    for dt in dt_values:
        ie4, ie2 = ie_pair(theta, dt)
        rows.append("dt,,%.17g,%.17g,%.17g" % (dt, ie4, ie2))

    text = "\n".join(rows) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _auto_domain(model, theta, x0, dt):
    """Interval covering essentially all transition mass, from the order-2
    prediction: mean +/- 12 sd, clipped at zero for positive-state models."""
    f2 = transition_density_fn(model, theta, [x0], dt, LikelihoodConfig(order=2))
    mean = f2.cgf.mean[0]
    sd = math.sqrt(f2.cgf.cov[0, 0])
    lo = mean - 12 * sd
    if model.state_nonneg[0] or model.name in ("cir", "gbm"):
        lo = max(lo, 0.0)
    return lo, mean + 12 * sd


def make_parser():
    parser = argparse.ArgumentParser(
        prog="saddlefit",
        description="Diffusion parameter estimation via cumulant ODEs, "
        "saddlepoint transition densities, and Metropolis MCMC.",
    )
    parser.add_argument("--config", help="key=value defaults file; explicit flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("derive", help="print the cumulant ODE system")
    p.add_argument("--model", required=True)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--theta", default=None, help="numeric coefficients instead of symbols")
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("simulate", help="simulate a sample path to CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--theta", required=True)
    p.add_argument("--x0", required=True)
    p.add_argument("--n", type=int, required=True, help="number of observations")
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--substeps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exact", action="store_true", help="exact transition sampling (cir)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("density", help="transition density on a grid (CSV)")
    p.add_argument("--model", required=True)
    p.add_argument("--theta", required=True)
    p.add_argument("--x0", required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--grid", required=True, help="lo:hi:count")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("fit", help="run the Metropolis sampler on a CSV series")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--theta0", required=True)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--chain-length", type=int, default=20000)
    p.add_argument("--burn-in", type=int, default=10000)
    p.add_argument("--level", type=float, default=0.90)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step-sds", default=None, help="comma list; default 5%% of |theta0|")
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--vix-scale", type=float, default=1.0,
                   help="multiply the second state column on read (bivariate models)")
    p.add_argument("--chain-out", default="chain.csv")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("coverage", help="credibility-interval coverage study")
    p.add_argument("--model", required=True)
    p.add_argument("--theta", required=True, help="generating (true) parameters")
    p.add_argument("--theta0", default=None, help="chain start; default = truth")
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--series-length", type=int, default=40)
    p.add_argument("--x0", required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--substeps", type=int, default=10)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--chain-length", type=int, default=20000)
    p.add_argument("--burn-in", type=int, default=10000)
    p.add_argument("--level", type=float, default=0.90)
    p.add_argument("--step-sds", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("compare", help="integrated-error sweeps against the exact density")
    p.add_argument("--model", required=True)
    p.add_argument("--theta", required=True)
    p.add_argument("--x0", required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--sweep", action="append", help="param=lo:hi:count (repeatable)")
    p.add_argument("--dt-sweep", default=None, help="comma list of gaps")
    p.add_argument("--domain", default=None, help="lo:hi integration interval")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = make_parser()
    if "--config" in argv:
        path = argv[argv.index("--config") + 1]
        try:
            parser.set_defaults(**_load_config(path))
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    args = parser.parse_args(argv)
    return args.func(args)


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
