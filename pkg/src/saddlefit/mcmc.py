"""Random-walk Metropolis over model parameters with the approximate likelihood.

Normal proposals per component; positivity-constrained components are
resampled until positive (the proposal is still treated as symmetric, i.e.
no q-ratio correction, which introduces a small bias near the boundary).
Priors default to improper uniform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .likelihood import LikelihoodConfig, loglik, make_system


@dataclass
class ProposalConfig:
    step_sds: np.ndarray
    positivity: tuple
    max_resample: int = 10_000

    def __post_init__(self):
        sds = np.atleast_1d(np.asarray(self.step_sds, dtype=float))
        if np.any(sds <= 0):
            raise ValueError("step_sds must be positive")
        object.__setattr__(self, "step_sds", sds)


def default_proposal(model, theta0, frac=0.05, floor=1e-4):
    """Step sds at ``frac`` of |theta0| per component with a small floor."""
    sds = np.maximum(frac * np.abs(np.asarray(theta0, dtype=float)), floor)
    return ProposalConfig(sds, model.param_positive)


def propose(theta_old, cfg, rng):
    """Componentwise normal jump; positive components redrawn until > 0."""
    theta_old = np.asarray(theta_old, dtype=float)
    out = np.empty_like(theta_old)
    for i in range(theta_old.shape[0]):
        positive = cfg.positivity[i]
        for _ in range(cfg.max_resample):
            v = theta_old[i] + cfg.step_sds[i] * rng.standard_normal()
            if not positive or v > 0:
                out[i] = v
                break
        else:
            raise RuntimeError(
                f"proposal for component {i} stayed non-positive after "
                f"{cfg.max_resample} draws; step size is degenerate"
            )
    return out


def accept_ratio(
    loglik_new,
    loglik_old,
    logprior_new=0.0,
    logprior_old=0.0,
    logq_fwd=0.0,
    logq_rev=0.0,
):
    """min(1, R) with R assembled in log space; -inf likelihood gives 0."""
    if loglik_new == -math.inf:
        return 0.0
    log_r = (loglik_new - loglik_old) + (logprior_new - logprior_old) + (logq_rev - logq_fwd)
    if log_r >= 0:
        return 1.0
    return math.exp(log_r)


@dataclass
class Chain:
    samples: np.ndarray  # (length, p)
    accepted: np.ndarray  # bool, accepted[0] is False by convention
    loglik_trace: np.ndarray
    seed: int
    param_names: tuple

    @property
    def acceptance_rate(self):
        if len(self.accepted) < 2:
            return 0.0
        return float(np.mean(self.accepted[1:]))

    def write_csv(self, path):
        header = "step," + ",".join(self.param_names) + ",loglik,accepted"
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for i in range(self.samples.shape[0]):
                fields = [str(i)]
                fields += ["%.17g" % v for v in self.samples[i]]
                fields.append("%.17g" % self.loglik_trace[i])
                fields.append("1" if self.accepted[i] else "0")
                fh.write(",".join(fields) + "\n")

    @classmethod
    def read_csv(cls, path):
        from .models import CsvFormatError

        with open(path) as fh:
            lines = fh.read().splitlines()
        if not lines or not lines[0].startswith("step,"):
            raise CsvFormatError("expected chain header 'step,...,loglik,accepted'", line=1)
        names = tuple(lines[0].split(",")[1:-2])
        samples, lls, acc = [], [], []
        for lineno, raw in enumerate(lines[1:], start=2):
            if not raw.strip():
                continue
            parts = raw.split(",")
            if len(parts) != len(names) + 3:
                raise CsvFormatError("wrong field count", line=lineno)
            samples.append([float(p) for p in parts[1:-2]])
            lls.append(float(parts[-2]))
            acc.append(parts[-1] == "1")
        return cls(
            samples=np.array(samples),
            accepted=np.array(acc, dtype=bool),
            loglik_trace=np.array(lls),
            seed=-1,
            param_names=names,
        )


def run_chain(
    model,
    series,
    theta0,
    length,
    seed=0,
    proposal=None,
    lik_cfg=None,
    log_prior=None,
    system=None,
):
    """Metropolis chain of ``length`` states starting (and counting) theta0.

    Deterministic under ``seed``. Raises if the likelihood at theta0 is not
    finite; downstream callers surface that as a distinct exit code.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    lik_cfg = lik_cfg or LikelihoodConfig()
    if proposal is None:
        proposal = default_proposal(model, theta0)
    if system is None:
        system = make_system(model, lik_cfg)
    rng = np.random.default_rng(seed)

    prior = log_prior if log_prior is not None else (lambda th: 0.0)

    p = theta0.shape[0]
    samples = np.empty((length, p))
    accepted = np.zeros(length, dtype=bool)
    lls = np.empty(length)

    ll_old = loglik(model, series, theta0, lik_cfg, system=system)
    if not np.isfinite(ll_old):
        raise ValueError(f"log-likelihood at theta0 is not finite ({ll_old})")
    lp_old = prior(theta0)
    samples[0] = theta0
    lls[0] = ll_old
    theta_old = theta0

    for i in range(1, length):
        theta_new = propose(theta_old, proposal, rng)
        lp_new = prior(theta_new)
        if lp_new == -math.inf:
            ll_new = -math.inf
        else:
            ll_new = loglik(model, series, theta_new, lik_cfg, system=system)
        ratio = accept_ratio(ll_new, ll_old, lp_new, lp_old)
        if rng.random() < ratio:
            theta_old = theta_new
            ll_old = ll_new
            lp_old = lp_new
            accepted[i] = True
        samples[i] = theta_old
        lls[i] = ll_old
    return Chain(samples, accepted, lls, seed, model.param_names)


@dataclass
class PosteriorSummary:
    param_names: tuple
    medians: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    alpha: float
    acceptance_rate: float
    n_post: int

    def contains(self, theta):
        theta = np.atleast_1d(theta)
        return (self.ci_lo <= theta) & (theta <= self.ci_hi)

    def format(self):
        level = 100 * (1 - self.alpha)
        lines = [f"parameter  median  {level:.0f}% CI"]
        for name, med, lo, hi in zip(self.param_names, self.medians, self.ci_lo, self.ci_hi):
            lines.append(f"{name:<10} {med:.6g}  ({lo:.6g}; {hi:.6g})")
        lines.append(f"acceptance rate: {self.acceptance_rate:.3f}")
        return "\n".join(lines)


def summarize(chain, burn_in, alpha=0.10):
    """Componentwise medians and (alpha/2, 1-alpha/2) empirical percentiles
    of the post-burn-in samples, interpolated at the (n+1)p order-statistic
    positions."""
    if burn_in < 0 or burn_in >= chain.samples.shape[0]:
        raise ValueError("burn-in leaves no post-burn-in samples")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    post = chain.samples[burn_in:]
    qs = np.array([50.0, 100.0 * alpha / 2.0, 100.0 * (1.0 - alpha / 2.0)])
    med, lo, hi = np.percentile(post, qs, axis=0, method="weibull")
    return PosteriorSummary(
        param_names=chain.param_names,
        medians=med,
        ci_lo=lo,
        ci_hi=hi,
        alpha=alpha,
        acceptance_rate=chain.acceptance_rate,
        n_post=post.shape[0],
    )
