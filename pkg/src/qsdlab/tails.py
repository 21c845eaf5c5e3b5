"""Tail analysis of initial measures.

Estimates the exponential rate rho and the smooth-variation index beta of
F = -ln tail, classifies the domain-of-attraction regime, and produces the
spatial scaling rule R(t, c) together with the predicted scaled limit law
for the heavy-tailed regimes.

Numeric limits are decided on geometric grids x = x0 * 2^j (j <= 40) with a
stabilization window of the last 8 points and slack 1e-3; families carrying
analytic tail metadata bypass the numeric path entirely.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    ClassificationRefusedError,
    IndeterminateRateError,
    NotSmoothlyVaryingError,
    ParameterDomainError,
    RegimeError,
)

_GRID_J = 41          # geometric probe grid x0 * 2^j, j = 0..40
_WINDOW = 8           # stabilization window size
_SLACK = 1e-3         # declared slack for "the numeric limit exists"


# ---------------------------------------------------------------------------
# scaling rules and limit laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingRule:
    """Spatial scaling a_t = evaluate(t, c), strictly increasing in c."""

    kind: str  # "linear" | "power" | "logpower"
    description: str
    _fn: Callable = field(repr=False)

    def evaluate(self, t, c):
        if not t > 0:
            raise ParameterDomainError(f"t must be positive, got {t}")
        if not c > 0:
            raise ParameterDomainError(f"c must be positive, got {c}")
        return float(self._fn(t, c))

    @classmethod
    def linear(cls):
        return cls(kind="linear", description="a_t = c*t", _fn=lambda t, c: c * t)

    @classmethod
    def power(cls, fprime, alpha):
        """a_t = c / F'(alpha*t) for a smoothly varying F with known derivative."""
        return cls(
            kind="power",
            description="a_t = c / F'(alpha*t)",
            _fn=lambda t, c: c / fprime(alpha * t),
        )

    @classmethod
    def logpower(cls):
        return cls(kind="logpower", description="a_t = t^c", _fn=lambda t, c: t**c)


@dataclass(frozen=True)
class LimitLaw:
    """Predicted limit of P(X_t > scale(t, c) | tau > t) as t -> infinity.

    Each law carries its own spatial normalization `scale`, because the three
    heavy-tail regimes state their limits at different normalizations:
    c*t^{1-beta} for the stretched-exponential tails, c*t for regularly
    varying tails, and t^c for the 1/ln x family.
    """

    family: str  # "Exponential" | "Lomax" | "ParetoLog" | "QSD"
    params: dict
    _tail: Callable = field(repr=False)
    _scale: Callable = field(repr=False)

    def tail_function(self, c):
        c = np.asarray(c, dtype=float)
        out = np.clip(self._tail(c), 0.0, 1.0)
        return out if out.ndim else float(out)

    def scale(self, t, c):
        return float(self._scale(t, c))


def exponential_law(rate, beta):
    """Limit e^{-rate*c} at the normalization a_t = c * t^{1-beta}."""
    return LimitLaw(
        family="Exponential",
        params={"rate": rate},
        _tail=lambda c: np.exp(-rate * np.asarray(c, dtype=float)),
        _scale=lambda t, c: c * t ** (1.0 - beta),
    )


def lomax_law(kappa, alpha):
    """Limit ((alpha+c)/alpha)^{-kappa} at the normalization a_t = c*t."""
    return LimitLaw(
        family="Lomax",
        params={"kappa": kappa, "scale": alpha},
        _tail=lambda c: ((alpha + np.asarray(c, dtype=float)) / alpha) ** (-kappa),
        _scale=lambda t, c: c * t,
    )


def paretolog_law():
    """Limit min(1, 1/c) at the normalization a_t = t^c; drift-independent."""
    return LimitLaw(
        family="ParetoLog",
        params={"shape": 1.0, "scale": 1.0},
        _tail=lambda c: np.minimum(1.0, 1.0 / np.maximum(np.asarray(c, dtype=float), 1e-300)),
        _scale=lambda t, c: t**c,
    )


def qsd_law(gamma, alpha):
    from .model import qsd_log_tail

    return LimitLaw(
        family="QSD",
        params={"gamma": gamma},
        _tail=lambda c: np.exp(qsd_log_tail(gamma, alpha, c)),
        _scale=lambda t, c: c,
    )


# ---------------------------------------------------------------------------
# rate and index estimation
# ---------------------------------------------------------------------------

def _geometric_grid(mu):
    x0 = max(1.0, float(getattr(mu, "support_lo", 0.0)) * 2.0)
    return x0 * 2.0 ** np.arange(_GRID_J)


def exp_rate(mu):
    """(liminf, limsup) of -ln mu([x, inf))/x, analytic when declared."""
    if mu.rho_liminf is not None and mu.rho_limsup is not None:
        return float(mu.rho_liminf), float(mu.rho_limsup)
    xs = _geometric_grid(mu)
    with np.errstate(over="ignore"):
        r = -np.asarray(mu.log_tail(xs), dtype=float) / xs
    w = r[-_WINDOW:]
    if np.all(np.isinf(w)):
        return np.inf, np.inf
    if not np.all(np.isfinite(w)):
        raise IndeterminateRateError(
            "tail rate estimate mixes finite and infinite values in the window",
            partial=float(np.nanmin(w)),
        )
    spread = float(w.max() - w.min())
    if spread <= _SLACK * max(1.0, float(w.max())):
        return float(w.min()), float(w.max())
    # a clean monotone blow-up is an infinite rate, not an indeterminate one
    if np.all(np.diff(r[np.isfinite(r)]) > 0) and w.max() > 100.0:
        return np.inf, np.inf
    raise IndeterminateRateError(
        f"tail rate did not stabilize (window spread {spread:g})",
        partial=float(np.median(w)),
        error=spread,
    )


def sv_index(mu):
    """Smooth-variation index beta of F = -ln tail, analytic when declared."""
    if mu.beta is not None:
        return float(mu.beta)
    xs = _geometric_grid(mu)
    F = -np.asarray(mu.log_tail(xs), dtype=float)
    finite = np.isfinite(F)
    if finite.sum() < _WINDOW or np.any(F[finite] <= 0) or np.any(np.diff(F[finite]) <= 0):
        raise NotSmoothlyVaryingError(
            "-ln tail is not positive and increasing beyond the probe cutoff"
        )
    lx = np.log(xs[finite][-_WINDOW:])
    lF = np.log(F[finite][-_WINDOW:])
    slope = float(np.polyfit(lx, lF, 1)[0])
    return max(slope, 0.0)


def _rv_kappa(mu):
    """Regular-variation index of the tail itself (meaningful when beta = 0)."""
    if mu.kappa is not None:
        return float(mu.kappa)
    xs = _geometric_grid(mu)
    lt = np.asarray(mu.log_tail(xs), dtype=float)
    lx = np.log(xs[-_WINDOW:])
    slope = float(np.polyfit(lx, lt[-_WINDOW:], 1)[0])
    return max(-slope, 0.0)


def _power_prefactor(mu, beta):
    """c0 with F(x) ~ c0 * x^beta, read off far out on the geometric grid."""
    x = float(_geometric_grid(mu)[-1])
    F = -float(mu.log_tail(x))
    return F / x**beta


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailProfile:
    """Classification output: rates, indices, regime, scaling and limit law."""

    rho_liminf: float
    rho_limsup: float
    beta: float
    kappa: float
    regime: str  # "AttractedTo" | "HeavyScaled" | "Unknown"
    gamma: float = None
    law: LimitLaw = None
    rule: ScalingRule = None

    def describe(self):
        if self.regime == "AttractedTo":
            return f"AttractedTo({self.gamma:g})"
        if self.regime == "HeavyScaled":
            return f"HeavyScaled({self.law.family})"
        return "Unknown"


def classify(mu, alpha):
    """Domain-of-attraction regime of mu for drift magnitude alpha.

    liminf rho >= alpha routes to the minimal QSD (gamma = 0), equality
    included; a true limit rho in (0, alpha) routes to gamma = alpha - rho;
    rho = 0 splits by the smooth-variation index beta of -ln tail.  For
    beta in [1/2, 1) no prediction is made.
    """
    if not alpha > 0:
        raise ParameterDomainError(f"alpha must be positive, got {alpha}")
    rho_inf, rho_sup = exp_rate(mu)
    if rho_inf >= alpha:
        return TailProfile(
            rho_liminf=rho_inf,
            rho_limsup=rho_sup,
            beta=float(mu.beta) if mu.beta is not None else np.nan,
            kappa=np.nan,
            regime="AttractedTo",
            gamma=0.0,
            law=qsd_law(0.0, alpha),
        )
    if rho_inf != rho_sup:
        raise ClassificationRefusedError(
            f"exponential rate has no limit (liminf {rho_inf:g} < alpha <= "
            f"limsup is possible); no attraction prediction"
        )
    rho = rho_inf
    if 0.0 < rho < alpha:
        gamma = alpha - rho
        return TailProfile(
            rho_liminf=rho,
            rho_limsup=rho,
            beta=float(mu.beta) if mu.beta is not None else np.nan,
            kappa=np.nan,
            regime="AttractedTo",
            gamma=gamma,
            law=qsd_law(gamma, alpha),
        )
    # rho = 0: heavy tails, classified by beta
    beta = sv_index(mu)
    if 0.0 < beta < 0.5:
        c0 = _power_prefactor(mu, beta)
        rate = beta * c0 * alpha ** (beta - 1.0)
        fprime = lambda x: beta * c0 * x ** (beta - 1.0)
        return TailProfile(
            rho_liminf=0.0,
            rho_limsup=0.0,
            beta=beta,
            kappa=np.nan,
            regime="HeavyScaled",
            law=exponential_law(rate, beta),
            rule=ScalingRule.power(fprime, alpha),
        )
    if beta == 0.0:
        if getattr(mu, "log_type", False):
            return TailProfile(
                rho_liminf=0.0,
                rho_limsup=0.0,
                beta=0.0,
                kappa=0.0,
                regime="HeavyScaled",
                law=paretolog_law(),
                rule=ScalingRule.logpower(),
            )
        kappa = _rv_kappa(mu)
        if kappa > 0.0:
            return TailProfile(
                rho_liminf=0.0,
                rho_limsup=0.0,
                beta=0.0,
                kappa=kappa,
                regime="HeavyScaled",
                law=lomax_law(kappa, alpha),
                rule=ScalingRule.linear(),
            )
        return TailProfile(
            rho_liminf=0.0, rho_limsup=0.0, beta=0.0, kappa=0.0, regime="Unknown"
        )
    # beta in [1/2, 1) (and any leftover beta >= 1 with rho = 0): no theorem applies
    return TailProfile(
        rho_liminf=0.0, rho_limsup=0.0, beta=beta, kappa=np.nan, regime="Unknown"
    )


def scaling_rule(mu, alpha):
    """The ScalingRule of the heavy-scaled regime; RegimeError otherwise."""
    profile = classify(mu, alpha)
    if profile.regime != "HeavyScaled":
        raise RegimeError(
            f"scaling rule only defined in the heavy-scaled regime, got {profile.describe()}"
        )
    return profile.rule


def limit_law(mu, alpha):
    """The LimitLaw of the heavy-scaled regime; RegimeError otherwise."""
    profile = classify(mu, alpha)
    if profile.regime != "HeavyScaled":
        raise RegimeError(
            f"limit law only defined in the heavy-scaled regime, got {profile.describe()}"
        )
    return profile.law


def joint_tail_prediction(mu, t, a, alpha):
    """Asymptotic prediction tail(alpha*t + a) for P_mu(X_t > a, tau > t).

    Pure evaluation; the approximation is asymptotically valid in the
    heavy-scaled regime for a well beyond sqrt(t).
    """
    if not (t > 0 and a > 0 and alpha > 0):
        raise ParameterDomainError("t, a, alpha must all be positive")
    return float(mu.tail(alpha * t + a))
