"""Accuracy and coverage instrumentation for the approximate likelihood.

Integrated error between densities, the relative-accuracy ratio of two
approximations against a common truth, and the simulate/fit/count coverage
harness for credibility intervals.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate as sci_integrate

from .likelihood import LikelihoodConfig
from .mcmc import default_proposal, run_chain, summarize
from .models import build, simulate_path, simulate_path_cir_exact


class QuadratureError(RuntimeError):
    pass


def integrated_error(f_true, f_hat, domain, tol=1e-8):
    """Integral of |f_true - f_hat| over an interval by adaptive quadrature."""
    a, b = domain
    val, abserr = sci_integrate.quad(
        lambda x: abs(f_true(x) - f_hat(x)), a, b, epsabs=tol, epsrel=1e-6, limit=500
    )
    if abserr > max(1e-6, 1e-3 * abs(val)):
        raise QuadratureError(
            f"integrated-error quadrature did not converge (value {val}, error {abserr})"
        )
    return val


def error_ratio(f_true, approx_a, approx_b, domain, tol=1e-8):
    """Ratio of integrated errors IE(A)/IE(B) against the same truth."""
    ie_a = integrated_error(f_true, approx_a, domain, tol)
    ie_b = integrated_error(f_true, approx_b, domain, tol)
    if ie_b == 0.0:
        raise ZeroDivisionError("reference approximation has zero integrated error")
    return ie_a / ie_b


@dataclass
class CoverageReport:
    param_names: tuple
    hits: np.ndarray  # per-parameter count of CIs containing the truth
    completed: int
    requested: int
    failures: list  # (replicate index, reason)
    level: float
    seed: int

    @property
    def coverage(self):
        if self.completed == 0:
            return np.full(len(self.param_names), np.nan)
        return self.hits / self.completed

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("parameter,hits,replicates,coverage\n")
            for name, h, c in zip(self.param_names, self.hits, self.coverage):
                fh.write(f"{name},{int(h)},{self.completed},{c:.6g}\n")

    def format_table(self):
        lines = [
            f"observed coverage of {100 * self.level:.0f}% credibility intervals "
            f"({self.completed}/{self.requested} replicates completed)"
        ]
        lines.append("Par.   coverage")
        for name, c in zip(self.param_names, self.coverage):
            lines.append(f"{name:<6} {c:.3f}")
        if self.failures:
            lines.append(f"failed replicates: {[i for i, _ in self.failures]}")
        return "\n".join(lines)


def read_coverage_csv(path):
    """Round-trip parser for the coverage CSV format."""
    from .models import CsvFormatError

    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "parameter,hits,replicates,coverage":
        raise CsvFormatError("expected coverage header", line=1)
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 4:
            raise CsvFormatError("wrong field count", line=lineno)
        rows.append((parts[0], int(parts[1]), int(parts[2]), float(parts[3])))
    return rows


def _run_replicate(args):
    (
        model_name,
        theta_true,
        theta0,
        series_length,
        x0,
        dt,
        substeps,
        exact_cir,
        chain_length,
        burn_in,
        alpha,
        step_sds,
        order,
        seed_sim,
        seed_chain,
    ) = args
    model = build(model_name, theta_true)
    times = np.arange(series_length) * dt
    if exact_cir:
        series = simulate_path_cir_exact(theta_true, x0, times, seed=seed_sim)
    else:
        series = simulate_path(model, theta_true, x0, times, substeps=substeps, seed=seed_sim)
    lik_cfg = LikelihoodConfig(order=order)
    theta0 = np.asarray(theta0, dtype=float)
    proposal = default_proposal(model, theta0)
    if step_sds is not None:
        proposal.step_sds[:] = step_sds
    chain = run_chain(
        model,
        series,
        theta0,
        length=chain_length,
        seed=seed_chain,
        proposal=proposal,
        lik_cfg=lik_cfg,
    )
    summary = summarize(chain, burn_in, alpha)
    return summary.contains(theta_true)


def coverage_study(
    model,
    theta_true,
    replicates,
    series_length,
    x0,
    dt,
    chain_length,
    burn_in,
    level=0.90,
    theta0=None,
    step_sds=None,
    order=None,
    substeps=10,
    exact_cir=False,
    seed=0,
    jobs=1,
):
    """Simulate `replicates` series, fit each, and count CI hits per parameter.

    Deterministic given the master seed (independent of ``jobs``). Replicates
    that fail (exploding simulation or chain setup) are recorded and excluded
    from the completed count rather than silently dropped.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    theta_true = np.atleast_1d(np.asarray(theta_true, dtype=float))
    model.validate(theta_true)
    theta0 = theta_true if theta0 is None else np.asarray(theta0, dtype=float)
    alpha = 1.0 - level

    seeds = np.random.SeedSequence(seed).generate_state(2 * replicates, dtype=np.uint64)
    tasks = [
        (
            model.name,
            tuple(theta_true),
            tuple(theta0),
            series_length,
            tuple(np.atleast_1d(x0)),
            dt,
            substeps,
            exact_cir,
            chain_length,
            burn_in,
            alpha,
            None if step_sds is None else tuple(step_sds),
            order,
            int(seeds[2 * r]),
            int(seeds[2 * r + 1]),
        )
        for r in range(replicates)
    ]

    hits = np.zeros(len(model.param_names))
    completed = 0
    failures = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_try_replicate, tasks))
    else:
        results = [_try_replicate(t) for t in tasks]
    for r, outcome in enumerate(results):
        ok, payload = outcome
        if ok:
            hits += payload
            completed += 1
        else:
            failures.append((r, payload))
    return CoverageReport(
        param_names=model.param_names,
        hits=hits,
        completed=completed,
        requested=replicates,
        failures=failures,
        level=level,
        seed=seed,
    )


def _try_replicate(task):
    try:
        return True, _run_replicate(task)
    except Exception as exc:  # noqa: BLE001 - replicate failures are data
        return False, f"{type(exc).__name__}: {exc}"
