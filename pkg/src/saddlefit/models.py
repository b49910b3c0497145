"""Model zoo, exact-transition oracles, time series I/O, and path simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .polynomial import Polynomial


@dataclass(frozen=True)
class DiffusionModel:
    """Polynomial diffusion model family.

    ``diffusion`` returns the matrix sigma^2 = sigma^T sigma (polynomial
    entries); ``noise`` returns the factor actually multiplying the Brownian
    increments in simulation, which may contain square roots.
    """

    name: str
    dim: int
    param_names: tuple
    param_positive: tuple
    state_nonneg: tuple
    _drift: Callable
    _diffusion: Callable
    _noise: Callable
    _extra_check: Callable = None

    def drift(self, theta):
        return self._drift(theta)

    def diffusion(self, theta):
        return self._diffusion(theta)

    def noise(self, theta, states):
        """Noise factor at each state: states (N, dim) -> (N, dim, dim)."""
        return self._noise(theta, np.asarray(states, dtype=float))

    def admissible(self, theta):
        theta = np.atleast_1d(theta)
        if theta.shape != (len(self.param_names),):
            return False
        if not np.isfinite(theta).all():
            return False
        for value, positive in zip(theta, self.param_positive):
            if positive and value <= 0:
                return False
        if self._extra_check is not None and not self._extra_check(theta):
            return False
        return True

    def validate(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (len(self.param_names),):
            raise ValueError(
                f"model '{self.name}' takes {len(self.param_names)} parameters "
                f"{self.param_names}, got {theta.shape[0]}"
            )
        if not self.admissible(theta):
            raise ValueError(f"parameter constraint violation for model '{self.name}': {theta}")
        return theta


def _cir():
    def drift(th):
        b, mu, sigma = th
        return [Polynomial(1, {(0,): b * mu, (1,): -b})]

    def diffusion(th):
        b, mu, sigma = th
        return [[Polynomial(1, {(1,): sigma**2})]]

    def noise(th, x):
        sigma = th[2]
        out = np.empty((x.shape[0], 1, 1))
        out[:, 0, 0] = sigma * np.sqrt(np.maximum(x[:, 0], 0.0))
        return out

    return DiffusionModel(
        "cir", 1, ("b", "mu", "sigma"), (True, True, True), (True,), drift, diffusion, noise
    )


def _gbm():
    def drift(th):
        mu, sigma = th
        return [Polynomial(1, {(1,): mu})]

    def diffusion(th):
        mu, sigma = th
        return [[Polynomial(1, {(2,): sigma**2})]]

    def noise(th, x):
        sigma = th[1]
        out = np.empty((x.shape[0], 1, 1))
        out[:, 0, 0] = sigma * x[:, 0]
        return out

    return DiffusionModel(
        "gbm", 1, ("mu", "sigma"), (False, True), (False,), drift, diffusion, noise
    )


def _bm():
    def drift(th):
        return [Polynomial.zero(1)]

    def diffusion(th):
        return [[Polynomial(1, {(0,): th[0]})]]

    def noise(th, x):
        out = np.empty((x.shape[0], 1, 1))
        out[:, 0, 0] = math.sqrt(th[0])
        return out

    return DiffusionModel("bm", 1, ("c",), (True,), (False,), drift, diffusion, noise)


def _ou():
    def drift(th):
        g, level, sigma = th
        return [Polynomial(1, {(0,): g * level, (1,): -g})]

    def diffusion(th):
        g, level, sigma = th
        return [[Polynomial(1, {(0,): sigma**2})]]

    def noise(th, x):
        out = np.empty((x.shape[0], 1, 1))
        out[:, 0, 0] = th[2]
        return out

    return DiffusionModel(
        "ou", 1, ("g", "phi_star", "sigma"), (True, False, True), (False,), drift, diffusion, noise
    )


def _bivar():
    # d x1 = (a x1 x2 - b x1^2) dt + c x2 dB1
    # d x2 = g (phi_star - x2) dt + sigma dB2
    def drift(th):
        a, b, c, g, phi_star, sigma = th
        return [
            Polynomial(2, {(1, 1): a, (2, 0): -b}),
            Polynomial(2, {(0, 0): g * phi_star, (0, 1): -g}),
        ]

    def diffusion(th):
        a, b, c, g, phi_star, sigma = th
        return [
            [Polynomial(2, {(0, 2): c**2}), Polynomial.zero(2)],
            [Polynomial.zero(2), Polynomial(2, {(0, 0): sigma**2})],
        ]

    def noise(th, x):
        c, sigma = th[2], th[5]
        out = np.zeros((x.shape[0], 2, 2))
        out[:, 0, 0] = c * x[:, 1]
        out[:, 1, 1] = sigma
        return out

    return DiffusionModel(
        "bivar",
        2,
        ("a", "b", "c", "g", "phi_star", "sigma"),
        (True, True, True, True, False, True),
        (False, False),
        drift,
        diffusion,
        noise,
    )


def _heston():
    # d S = r S dt + S sqrt((1-rho^2) V) dB1 + rho S sqrt(V) dB2
    # d V = delta (theta - V) dt + sigma sqrt(V) dB2
    def drift(th):
        r, delta, theta, rho, sigma = th
        return [
            Polynomial(2, {(1, 0): r}),
            Polynomial(2, {(0, 0): delta * theta, (0, 1): -delta}),
        ]

    def diffusion(th):
        r, delta, theta, rho, sigma = th
        return [
            [Polynomial(2, {(2, 1): 1}), Polynomial(2, {(1, 1): rho * sigma})],
            [Polynomial(2, {(1, 1): rho * sigma}), Polynomial(2, {(0, 1): sigma**2})],
        ]

    def noise(th, x):
        rho, sigma = th[3], th[4]
        s = x[:, 0]
        v = np.maximum(x[:, 1], 0.0)
        sqrt_v = np.sqrt(v)
        out = np.zeros((x.shape[0], 2, 2))
        out[:, 0, 0] = s * np.sqrt((1.0 - rho**2) * v)
        out[:, 0, 1] = rho * s * sqrt_v
        out[:, 1, 1] = sigma * sqrt_v
        return out

    def extra(th):
        return abs(th[3]) < 1.0

    return DiffusionModel(
        "heston",
        2,
        ("r", "delta", "theta", "rho", "sigma"),
        (False, True, True, False, True),
        (False, True),
        drift,
        diffusion,
        noise,
        extra,
    )


_REGISTRY = {m.name: m for m in (_cir(), _gbm(), _bm(), _ou(), _bivar(), _heston())}

MODEL_NAMES = tuple(sorted(_REGISTRY))


def get_model(name):
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown model '{name}'; available: {', '.join(MODEL_NAMES)}") from None


def build(name, theta):
    """Look up a model and validate theta against its constraints."""
    model = get_model(name)
    model.validate(theta)
    return model


def true_transition_logdensity(model, theta, x0, x1, dt):
    """Exact transition log density for models with a closed form (cir, gbm)."""
    name = model.name if isinstance(model, DiffusionModel) else model
    theta = np.atleast_1d(theta)
    x0 = float(np.atleast_1d(x0)[0])
    x1 = float(np.atleast_1d(x1)[0])
    if dt <= 0:
        raise ValueError("dt must be positive")
    if name == "cir":
        from scipy.special import ive

        b, mu, sigma = theta
        s2 = sigma**2
        if x1 <= 0:
            return -math.inf
        ebd = math.exp(-b * dt)
        c = 2.0 * b / (s2 * (1.0 - ebd))
        q = 2.0 * b * mu / s2 - 1.0
        u = c * x0 * ebd
        v = c * x1
        z = 2.0 * math.sqrt(u * v)
        # log I_q(z) = log(ive(q, z)) + z keeps the Bessel factor in range
        log_iq = math.log(ive(q, z)) + z
        return math.log(c) - u - v + 0.5 * q * (math.log(v) - math.log(u)) + log_iq
    if name == "gbm":
        mu, sigma = theta
        if x1 <= 0:
            return -math.inf
        log_mean = math.log(x0) + (mu - 0.5 * sigma**2) * dt
        log_sd = sigma * math.sqrt(dt)
        z = (math.log(x1) - log_mean) / log_sd
        return -math.log(x1 * log_sd) - 0.5 * _LOG_2PI_ - 0.5 * z * z
    raise ValueError(f"no closed-form transition density for model '{name}'")


_LOG_2PI_ = math.log(2.0 * math.pi)


def true_transition_density(model, theta, x0, x1, dt):
    logf = true_transition_logdensity(model, theta, x0, x1, dt)
    return math.exp(logf) if logf > -math.inf else 0.0


class CsvFormatError(ValueError):
    """Malformed time-series/chain CSV; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass
class TimeSeries:
    """Observation times t_1..t_N with m-dimensional state values."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or values.shape[0] != times.shape[0]:
            raise ValueError("times and values lengths differ")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.times.shape[0]

    @property
    def dim(self):
        return self.values.shape[1]

    def write_csv(self, path):
        header = "t," + ",".join(f"x{i + 1}" for i in range(self.dim))
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for t, row in zip(self.times, self.values):
                fh.write("%.17g," % t + ",".join("%.17g" % v for v in row) + "\n")

    @classmethod
    def read_csv(cls, path):
        with open(path) as fh:
            lines = fh.read().splitlines()
        if not lines:
            raise CsvFormatError("empty file", line=1)
        header = [h.strip() for h in lines[0].split(",")]
        if header[0] != "t" or len(header) < 2:
            raise CsvFormatError(f"expected header 't,x1[,x2,...]', got {lines[0]!r}", line=1)
        for i, name in enumerate(header[1:], start=1):
            if name != f"x{i}":
                raise CsvFormatError(f"expected column 'x{i}', got {name!r}", line=1)
        dim = len(header) - 1
        times, values = [], []
        for lineno, raw in enumerate(lines[1:], start=2):
            if not raw.strip():
                continue
            parts = raw.split(",")
            if len(parts) != dim + 1:
                raise CsvFormatError(
                    f"expected {dim + 1} fields, got {len(parts)}", line=lineno
                )
            try:
                nums = [float(p) for p in parts]
            except ValueError:
                raise CsvFormatError(f"non-numeric field in {raw!r}", line=lineno) from None
            times.append(nums[0])
            values.append(nums[1:])
        if not times:
            raise CsvFormatError("no data rows", line=2)
        times = np.array(times)
        if np.any(np.diff(times) <= 0):
            bad = int(np.nonzero(np.diff(times) <= 0)[0][0])
            raise CsvFormatError("times must be strictly increasing", line=bad + 3)
        return cls(times, np.array(values))


def _drift_evaluator(model, theta):
    polys = model.drift(theta)

    def mu(states):
        out = np.empty((states.shape[0], model.dim))
        for i, p in enumerate(polys):
            out[:, i] = p.eval_many(states)
        return out

    return mu


def _em_evolve(model, theta, states, dt, substeps, rng):
    """Euler-Maruyama over one observation gap, vectorized across samples.

    Positivity-flagged states are reflected at zero after every substep so
    square-root noise terms stay real.
    """
    mu = _drift_evaluator(model, theta)
    h = dt / substeps
    sqrt_h = math.sqrt(h)
    nonneg = [i for i, flag in enumerate(model.state_nonneg) if flag]
    x = np.array(states, dtype=float)
    for _ in range(substeps):
        sig = model.noise(theta, x)
        z = rng.standard_normal(x.shape)
        x = x + mu(x) * h + sqrt_h * np.einsum("nij,nj->ni", sig, z)
        for i in nonneg:
            x[:, i] = np.abs(x[:, i])
    return x


def simulate_path(model, theta, x0, times, substeps=10, seed=None, rng=None):
    """Euler-Maruyama sample path observed at ``times`` (first row is x0)."""
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    theta = model.validate(theta)
    if rng is None:
        rng = np.random.default_rng(seed)
    times = np.asarray(times, dtype=float)
    x = np.atleast_1d(np.asarray(x0, dtype=float))[None, :]
    rows = [x[0].copy()]
    for dt in np.diff(times):
        x = _em_evolve(model, theta, x, dt, substeps, rng)
        rows.append(x[0].copy())
    return TimeSeries(times, np.array(rows))


def simulate_transitions(model, theta, x0, dt, substeps, n_samples, seed=None):
    """n_samples independent one-step transitions x0 -> X_{dt}, vectorized."""
    theta = model.validate(theta)
    rng = np.random.default_rng(seed)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    states = np.tile(x0, (n_samples, 1))
    return _em_evolve(model, theta, states, dt, substeps, rng)


def simulate_path_cir_exact(theta, x0, times, seed=None):
    """Exact CIR path via noncentral chi-squared transition sampling."""
    b, mu, sigma = np.atleast_1d(np.asarray(theta, dtype=float))
    get_model("cir").validate([b, mu, sigma])
    rng = np.random.default_rng(seed)
    s2 = sigma**2
    df = 4.0 * b * mu / s2
    times = np.asarray(times, dtype=float)
    x = float(np.atleast_1d(x0)[0])
    rows = [x]
    for dt in np.diff(times):
        ebd = math.exp(-b * dt)
        c = 2.0 * b / (s2 * (1.0 - ebd))
        nc = 2.0 * c * x * ebd
        x = rng.noncentral_chisquare(df, nc) / (2.0 * c)
        rows.append(x)
    return TimeSeries(times, np.array(rows)[:, None])
