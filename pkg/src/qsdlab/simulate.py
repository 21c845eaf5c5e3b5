"""Monte Carlo ground truth for the absorbed drifted Brownian motion.

Paths use exact Gaussian increments, so the only discretization error is
absorption between steps; that is handled with the Brownian-bridge minimum
law: a step from x > 0 to x' > 0 secretly crossed 0 with probability
exp(-2 x x' / dt).

Randomness comes from a counter-based Philox generator keyed by
(seed, stream_id).  All particles evolve in one vectorized stream in a fixed
order, so results are bit-identical for any worker count: the thread knob
elsewhere in the package never touches the draw sequence.
"""

from dataclasses import dataclass

import numpy as np

from . import kernel
from .errors import ConditioningDegenerateError, ExtinctionError, ParameterDomainError

_Z99 = 2.5758293035489004  # standard normal 99.5% quantile (two-sided 99% CI)
_MIN_EXPECTED_SURVIVORS = 100.0
_RESAMPLING_BATCHES = 8


def default_dt(t):
    """Default step for horizon t."""
    return min(0.01, t / 1000.0)


@dataclass(frozen=True)
class SimConfig:
    """Simulation parameters; validated on construction."""

    dt: float
    horizon: float
    n_particles: int
    conditioning: str = "rejection"  # "rejection" | "resampling"
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterDomainError(f"dt must be positive, got {self.dt}")
        if not self.horizon > 0:
            raise ParameterDomainError(f"horizon must be positive, got {self.horizon}")
        if self.dt > self.horizon:
            raise ParameterDomainError(
                f"dt = {self.dt} exceeds horizon t = {self.horizon}"
            )
        if self.n_particles < 1:
            raise ParameterDomainError("n_particles must be >= 1")
        if self.conditioning not in ("rejection", "resampling"):
            raise ParameterDomainError(
                f"conditioning must be 'rejection' or 'resampling', got {self.conditioning!r}"
            )


@dataclass(frozen=True)
class EmpiricalSample:
    """Endpoints of surviving paths with the survival estimate they imply."""

    values: np.ndarray
    effective_size: float
    survival_estimate: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class SurvivalEstimate:
    value: float
    ci_low: float
    ci_high: float


def _rng(seed, stream_id):
    key = np.array([np.uint64(seed & (2**64 - 1)), np.uint64(stream_id & (2**64 - 1))])
    return np.random.Generator(np.random.Philox(key=key))


def bridge_absorption_probability(x, x_next, dt):
    """P(min of the bridge from x to x_next over dt hits 0), both endpoints > 0."""
    x = np.asarray(x, dtype=float)
    x_next = np.asarray(x_next, dtype=float)
    out = np.exp(-np.minimum(2.0 * x * x_next / dt, 745.0))
    return out if out.ndim else float(out)


def step_with_absorption(x, dt, alpha, rng):
    """One exact-increment step with bridge-corrected absorption.

    Returns (x_next, absorbed).  Vectorized over x; absorption is decided by
    one uniform draw per particle against the bridge-minimum probability.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    z = rng.standard_normal(x.shape)
    x_next = x - alpha * dt + np.sqrt(dt) * z
    u = rng.random(x.shape)
    absorbed = (x_next <= 0.0) | (u < bridge_absorption_probability(x, np.maximum(x_next, 0.0), dt))
    if scalar:
        return float(x_next[0]), bool(absorbed[0])
    return x_next, absorbed


def _steps(t, dt):
    n = max(int(np.ceil(t / dt - 1e-12)), 1)
    return n, t / n


def simulate_conditioned(mu, alpha, cfg):
    """EmpiricalSample of X_t conditioned on tau > t under the chosen scheme.

    Rejection: evolve n independent paths from mu, keep survivors' endpoints.
    Resampling: on absorption a particle relocates to the position of a
    uniformly chosen live particle; each relocation contributes a log-weight
    ln((N-1)/N), and exp(total log-weight) estimates the survival probability.
    """
    t = cfg.horizon
    n = cfg.n_particles
    rng = _rng(cfg.seed, cfg.stream_id)
    n_steps, dt = _steps(t, cfg.dt)

    if cfg.conditioning == "rejection":
        surv = kernel.survival(mu, t, alpha, rel_tol=1e-6).value
        if n * surv < _MIN_EXPECTED_SURVIVORS:
            raise ConditioningDegenerateError(
                f"expected survivors n*P = {n * surv:.3g} < {_MIN_EXPECTED_SURVIVORS:g}; "
                "use resampling conditioning instead"
            )
        x = np.asarray(mu.sample(n, rng), dtype=float)
        alive = x > 0.0
        for k in range(n_steps):
            z = rng.standard_normal(n)
            u = rng.random(n)
            x_next = x - alpha * dt + np.sqrt(dt) * z
            hit = (x_next <= 0.0) | (
                u < bridge_absorption_probability(x, np.maximum(x_next, 0.0), dt)
            )
            alive &= ~hit
            x = np.where(alive, x_next, x)
        k_surv = int(alive.sum())
        if k_surv == 0:
            raise ExtinctionError("all paths absorbed before the horizon", t_reached=t)
        p = k_surv / n
        half = _Z99 * np.sqrt(p * (1.0 - p) / n)
        return EmpiricalSample(
            values=x[alive],
            effective_size=float(k_surv),
            survival_estimate=p,
            ci_low=max(p - half, 0.0),
            ci_high=min(p + half, 1.0),
        )

    # resampling (Fleming-Viot style)
    x = np.asarray(mu.sample(n, rng), dtype=float)
    x = np.maximum(x, 1e-300)
    log_weight = 0.0
    lw_per_relocation = np.log((n - 1.0) / n) if n > 1 else -np.inf
    for k in range(n_steps):
        z = rng.standard_normal(n)
        u = rng.random(n)
        x_next = x - alpha * dt + np.sqrt(dt) * z
        hit = (x_next <= 0.0) | (
            u < bridge_absorption_probability(x, np.maximum(x_next, 0.0), dt)
        )
        x = x_next
        dead = np.nonzero(hit)[0]
        if dead.size == n:
            raise ExtinctionError(
                "every particle absorbed in the same step", t_reached=(k + 1) * dt
            )
        if dead.size:
            live = np.nonzero(~hit)[0]
            donors = live[rng.integers(0, live.size, dead.size)]
            x[dead] = x[donors]
            log_weight += dead.size * lw_per_relocation
    p = float(np.exp(log_weight))
    return EmpiricalSample(
        values=x,
        effective_size=float(n),
        survival_estimate=p,
        ci_low=p,  # single-run resampling carries no internal CI; see estimate_survival
        ci_high=p,
    )


def estimate_survival(mu, alpha, cfg):
    """P_mu(tau > t) with a 99% confidence interval.

    Rejection uses the binomial normal-approximation interval of a single
    run; resampling uses batch means over independent replicas on separate
    RNG streams.
    """
    if cfg.conditioning == "rejection":
        s = simulate_conditioned(mu, alpha, cfg)
        return SurvivalEstimate(s.survival_estimate, s.ci_low, s.ci_high)
    b = _RESAMPLING_BATCHES
    n_each = max(cfg.n_particles // b, 2)
    vals = []
    for r in range(b):
        sub = SimConfig(
            dt=cfg.dt,
            horizon=cfg.horizon,
            n_particles=n_each,
            conditioning="resampling",
            seed=cfg.seed,
            stream_id=cfg.stream_id + 1 + r,
        )
        vals.append(simulate_conditioned(mu, alpha, sub).survival_estimate)
    vals = np.asarray(vals)
    m = float(vals.mean())
    half = _Z99 * float(vals.std(ddof=1)) / np.sqrt(b)
    return SurvivalEstimate(m, max(m - half, 0.0), min(m + half, 1.0))
