"""Domain model: the drifted-BM setup, the initial-measure catalog and the
one-parameter family of quasi-stationary densities.

The process is Brownian motion on [0, inf) with constant drift -alpha
(alpha > 0), absorbed at 0.  Initial measures are catalog entries exposing a
consistent (density, tail, log_tail) triple; log_tail is always computed
directly from the family's analytic form, never as log(tail), so it survives
underflow far out in the tail.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import log_ndtr, ndtr, ndtri

from .errors import ExtrapolationError, ParameterDomainError
from .numerics import log_sinh, sinhc

_LOG_HALF_PI = np.log(np.pi / 2.0)


# ---------------------------------------------------------------------------
# drift model and QSD family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DriftModel:
    """Drift magnitude alpha > 0; the process drift is -alpha."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ParameterDomainError(f"alpha must be positive, got {self.alpha}")


def _check_gamma(gamma, alpha):
    if not alpha > 0:
        raise ParameterDomainError(f"alpha must be positive, got {alpha}")
    if gamma < 0 or gamma >= alpha:
        raise ParameterDomainError(
            f"gamma must lie in [0, alpha), got gamma={gamma}, alpha={alpha}"
        )


def qsd_density(gamma, alpha, x):
    """Density of the quasi-stationary distribution with parameter gamma.

    gamma > 0: ((alpha^2-gamma^2)/gamma) e^(-alpha x) sinh(gamma x);
    gamma = 0: alpha^2 x e^(-alpha x).  The gamma -> 0 limit of the first
    branch equals the second pointwise, and the sinh/gamma ratio is evaluated
    through a series for tiny gamma*x so the singularity stays removable
    numerically.
    """
    _check_gamma(gamma, alpha)
    x = np.asarray(x, dtype=float)
    out = (alpha * alpha - gamma * gamma) * x * np.exp(-alpha * x) * sinhc(gamma * x)
    out = np.where(x < 0, 0.0, out)
    return out if out.ndim else float(out)


def qsd_log_density(gamma, alpha, x):
    _check_gamma(gamma, alpha)
    x = np.asarray(x, dtype=float)
    xp = np.maximum(x, 0.0)
    with np.errstate(divide="ignore"):
        lx = np.where(x > 0, np.log(np.where(x > 0, x, 1.0)), -np.inf)
    if gamma == 0.0:
        out = 2.0 * np.log(alpha) + lx - alpha * x
    else:
        out = (
            np.log((alpha * alpha - gamma * gamma) / gamma)
            - alpha * x
            + log_sinh(gamma * xp)
        )
    out = np.where(x > 0, out, -np.inf)
    return out if out.ndim else float(out)


def qsd_cdf(gamma, alpha, x):
    """Closed-form CDF of the QSD with parameter gamma."""
    _check_gamma(gamma, alpha)
    x = np.asarray(x, dtype=float)
    xp = np.maximum(x, 0.0)
    # tail = e^{-ax} (a sinh(gx) + g cosh(gx)) / g, evaluated through the
    # stable log form so large gamma*x cannot overflow sinh
    out = -np.expm1(qsd_log_tail(gamma, alpha, xp))
    out = np.where(x <= 0, 0.0, out)
    return out if out.ndim else float(out)


def qsd_log_tail(gamma, alpha, x):
    """log of 1 - qsd_cdf, computed directly (stable for large x)."""
    _check_gamma(gamma, alpha)
    x = np.asarray(x, dtype=float)
    xp = np.maximum(x, 0.0)
    if gamma == 0.0:
        out = np.log1p(alpha * xp) - alpha * xp
    else:
        # (a sinh + g cosh)/g = ((a+g) e^{gx} - (a-g) e^{-gx}) / (2g)
        ratio = (alpha - gamma) / (alpha + gamma)
        out = (
            -alpha * xp
            + gamma * xp
            + np.log((alpha + gamma) / (2.0 * gamma))
            + np.log1p(-ratio * np.exp(-2.0 * gamma * xp))
        )
    out = np.where(x <= 0, 0.0, out)
    return out if out.ndim else float(out)


def qsd_density_derivatives(gamma, alpha, x):
    """(pi, pi', pi'') of the QSD density, all analytic."""
    _check_gamma(gamma, alpha)
    x = np.asarray(x, dtype=float)
    e = np.exp(-alpha * x)
    if gamma == 0.0:
        a2 = alpha * alpha
        p = a2 * x * e
        dp = a2 * e * (1.0 - alpha * x)
        d2p = a2 * e * (a2 * x - 2.0 * alpha)
    else:
        c = (alpha * alpha - gamma * gamma) / gamma
        sh = np.sinh(gamma * x)
        ch = np.cosh(gamma * x)
        p = c * e * sh
        dp = c * e * (gamma * ch - alpha * sh)
        d2p = c * e * ((alpha * alpha + gamma * gamma) * sh - 2.0 * alpha * gamma * ch)
    return p, dp, d2p


def absorption_rate(gamma, alpha):
    """lambda_pi = (alpha^2 - gamma^2)/2, the exponential absorption rate."""
    _check_gamma(gamma, alpha)
    return 0.5 * (alpha * alpha - gamma * gamma)


@dataclass(frozen=True)
class QsdDensity:
    """Member pi_gamma of the QSD family for drift magnitude alpha."""

    gamma: float
    alpha: float

    def __post_init__(self):
        _check_gamma(self.gamma, self.alpha)

    @property
    def lambda_pi(self):
        return absorption_rate(self.gamma, self.alpha)

    def density(self, x):
        return qsd_density(self.gamma, self.alpha, x)

    def cdf(self, x):
        return qsd_cdf(self.gamma, self.alpha, x)

    def log_tail(self, x):
        return qsd_log_tail(self.gamma, self.alpha, x)


# ---------------------------------------------------------------------------
# initial-measure catalog
# ---------------------------------------------------------------------------

class InitialMeasure:
    """Catalog entry for an initial distribution mu on (0, inf).

    Subclasses provide density/log_density, tail/log_tail and ppf.  Tail
    metadata used by the classifier:

    rho_liminf / rho_limsup: liminf/limsup of -ln mu([x,inf))/x (may be inf);
    beta: index of smooth variation of F = -ln tail (None if unknown);
    kappa: regular-variation index of the tail when beta == 0;
    log_type: True for the slowly-varying ~1/ln x tail family.

    `atom` is the location of a point mass for the Dirac family (None
    otherwise); quadrature code branches on it.
    """

    name = "measure"
    atom = None
    support_lo = 0.0  # left edge of the density support (quadrature hint)
    rho_liminf = None
    rho_limsup = None
    beta = None
    kappa = None
    log_type = False

    def density(self, x):
        raise NotImplementedError

    def log_density(self, x):
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(self.density(x), 0.0))

    def tail(self, x):
        raise NotImplementedError

    def log_tail(self, x):
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(self.tail(x), 0.0))

    def ppf(self, u):
        raise NotImplementedError

    def sample(self, n, rng):
        return self.ppf(rng.random(n))

    def params(self):
        return {}

    def __repr__(self):
        p = ", ".join(f"{k}={v:g}" for k, v in self.params().items())
        return f"{self.name}({p})"


def measure_eval(mu, x):
    """(density, tail, log_tail) of mu at x >= 0."""
    if np.any(np.asarray(x) < 0):
        raise ParameterDomainError("x must be nonnegative")
    return mu.density(x), mu.tail(x), mu.log_tail(x)


class Dirac(InitialMeasure):
    name = "dirac"

    def __init__(self, x0):
        if not x0 > 0:
            raise ParameterDomainError("dirac atom must be positive")
        self.x0 = float(x0)
        self.atom = self.x0
        self.rho_liminf = np.inf
        self.rho_limsup = np.inf
        self.beta = np.inf

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        return out if out.ndim else 0.0

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x <= self.x0, 1.0, 0.0)
        return out if out.ndim else float(out)

    def log_tail(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x <= self.x0, 0.0, -np.inf)
        return out if out.ndim else float(out)

    def ppf(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.x0)

    def params(self):
        return {"x0": self.x0}


class Exponential(InitialMeasure):
    name = "exponential"

    def __init__(self, rate):
        if not rate > 0:
            raise ParameterDomainError("exponential rate must be positive")
        self.rate = float(rate)
        self.rho_liminf = self.rho_limsup = self.rate
        self.beta = 1.0

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 0, self.rate * np.exp(-self.rate * x), 0.0)
        return out if out.ndim else float(out)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 0, np.log(self.rate) - self.rate * x, -np.inf)
        return out if out.ndim else float(out)

    def tail(self, x):
        return np.exp(self.log_tail(x))

    def log_tail(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0, -self.rate * x, 0.0)
        return out if out.ndim else float(out)

    def ppf(self, u):
        return -np.log1p(-np.asarray(u, dtype=float)) / self.rate

    def params(self):
        return {"rate": self.rate}


class HalfNormal(InitialMeasure):
    name = "halfnormal"

    def __init__(self, sigma=1.0):
        if not sigma > 0:
            raise ParameterDomainError("halfnormal sigma must be positive")
        self.sigma = float(sigma)
        self.rho_liminf = self.rho_limsup = np.inf
        self.beta = 2.0

    def density(self, x):
        x = np.asarray(x, dtype=float)
        s = self.sigma
        out = np.where(
            x >= 0, np.sqrt(2.0 / np.pi) / s * np.exp(-x * x / (2 * s * s)), 0.0
        )
        return out if out.ndim else float(out)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        s = self.sigma
        out = np.where(
            x >= 0,
            0.5 * np.log(2.0 / np.pi) - np.log(s) - x * x / (2 * s * s),
            -np.inf,
        )
        return out if out.ndim else float(out)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0, 2.0 * ndtr(-x / self.sigma), 1.0)
        return out if out.ndim else float(out)

    def log_tail(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0, np.log(2.0) + log_ndtr(-x / self.sigma), 0.0)
        return out if out.ndim else float(out)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        return self.sigma * ndtri(0.5 * (1.0 + u))

    def params(self):
        return {"sigma": self.sigma}


class Weibull(InitialMeasure):
    name = "weibull"

    def __init__(self, scale=1.0, shape=1.0):
        if not (scale > 0 and shape > 0):
            raise ParameterDomainError("weibull scale and shape must be positive")
        self.scale = float(scale)
        self.shape = float(shape)
        k = self.shape
        if k > 1:
            self.rho_liminf = self.rho_limsup = np.inf
        elif k == 1:
            self.rho_liminf = self.rho_limsup = 1.0 / self.scale
        else:
            self.rho_liminf = self.rho_limsup = 0.0
        self.beta = k

    def density(self, x):
        x = np.asarray(x, dtype=float)
        lam, k = self.scale, self.shape
        z = np.maximum(x, 0.0) / lam
        out = np.where(x > 0, (k / lam) * z ** (k - 1.0) * np.exp(-(z**k)), 0.0)
        return out if out.ndim else float(out)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        lam, k = self.scale, self.shape
        with np.errstate(divide="ignore"):
            z = np.maximum(x, 0.0) / lam
            lz = np.where(z > 0, np.log(np.where(z > 0, z, 1.0)), -np.inf)
        out = np.where(x > 0, np.log(k / lam) + (k - 1.0) * lz - z**k, -np.inf)
        return out if out.ndim else float(out)

    def tail(self, x):
        return np.exp(self.log_tail(x))

    def log_tail(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0, -((np.maximum(x, 0.0) / self.scale) ** self.shape), 0.0)
        return out if out.ndim else float(out)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        return self.scale * (-np.log1p(-u)) ** (1.0 / self.shape)

    def params(self):
        return {"scale": self.scale, "shape": self.shape}


class Pareto(InitialMeasure):
    name = "pareto"

    def __init__(self, xm=1.0, kappa=1.0):
        if not (xm > 0 and kappa > 0):
            raise ParameterDomainError("pareto xm and kappa must be positive")
        self.xm = float(xm)
        self.kappa = float(kappa)
        self.support_lo = self.xm
        self.rho_liminf = self.rho_limsup = 0.0
        self.beta = 0.0

    def density(self, x):
        x = np.asarray(x, dtype=float)
        k, xm = self.kappa, self.xm
        out = np.where(x >= xm, k * xm**k * np.maximum(x, xm) ** (-k - 1.0), 0.0)
        return out if out.ndim else float(out)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        k, xm = self.kappa, self.xm
        with np.errstate(divide="ignore"):
            lx = np.log(np.maximum(x, xm))
        out = np.where(x >= xm, np.log(k) + k * np.log(xm) - (k + 1.0) * lx, -np.inf)
        return out if out.ndim else float(out)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > self.xm, (self.xm / np.maximum(x, self.xm)) ** self.kappa, 1.0)
        return out if out.ndim else float(out)

    def log_tail(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(
            x > self.xm, -self.kappa * np.log(np.maximum(x, self.xm) / self.xm), 0.0
        )
        return out if out.ndim else float(out)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        return self.xm * (1.0 - u) ** (-1.0 / self.kappa)

    def params(self):
        return {"xm": self.xm, "kappa": self.kappa}


class HalfCauchy(InitialMeasure):
    name = "halfcauchy"

    def __init__(self, scale=1.0):
        if not scale > 0:
            raise ParameterDomainError("halfcauchy scale must be positive")
        self.scale = float(scale)
        self.rho_liminf = self.rho_limsup = 0.0
        self.beta = 0.0
        self.kappa = 1.0

    def density(self, x):
        x = np.asarray(x, dtype=float)
        s = self.scale
        out = np.where(x >= 0, 2.0 / (np.pi * s * (1.0 + (x / s) ** 2)), 0.0)
        return out if out.ndim else float(out)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        # 1 - (2/pi) atan(x/s) == (2/pi) atan(s/x), the second form is exact
        # far out in the tail
        out = np.where(
            x > 0, (2.0 / np.pi) * np.arctan(self.scale / np.maximum(x, 1e-300)), 1.0
        )
        return out if out.ndim else float(out)

    def log_tail(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(
                x > 0,
                np.log(2.0 / np.pi)
                + np.log(np.arctan(self.scale / np.maximum(x, 1e-300))),
                0.0,
            )
        return out if out.ndim else float(out)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        return self.scale * np.tan(0.5 * np.pi * u)

    def params(self):
        return {"scale": self.scale}


class LogTail(InitialMeasure):
    """Super-heavy tail mu([x,inf)) = 1/ln x for x >= e, clamped to 1 below."""

    name = "logtail"

    def __init__(self):
        self.support_lo = np.e
        self.rho_liminf = self.rho_limsup = 0.0
        self.beta = 0.0
        self.kappa = 0.0
        self.log_type = True

    def density(self, x):
        x = np.asarray(x, dtype=float)
        xe = np.maximum(x, np.e)
        out = np.where(x > np.e, 1.0 / (xe * np.log(xe) ** 2), 0.0)
        return out if out.ndim else float(out)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > np.e, 1.0 / np.log(np.maximum(x, np.e)), 1.0)
        return out if out.ndim else float(out)

    def log_tail(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > np.e, -np.log(np.log(np.maximum(x, np.e))), 0.0)
        return out if out.ndim else float(out)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        # F(x) = 1 - 1/ln x  =>  x = exp(1/(1-u))
        return np.exp(1.0 / np.maximum(1.0 - u, 1e-300))

    def params(self):
        return {}


class QsdMeasure(InitialMeasure):
    """pi_gamma used as an initial measure."""

    name = "qsd"

    def __init__(self, gamma, alpha):
        self.qsd = QsdDensity(gamma, alpha)
        self.gamma = float(gamma)
        self.alpha = float(alpha)
        rho = alpha - gamma if gamma > 0 else alpha
        self.rho_liminf = self.rho_limsup = rho
        self.beta = 1.0
        self._ppf_grid = None

    def density(self, x):
        return self.qsd.density(x)

    def log_density(self, x):
        return qsd_log_density(self.gamma, self.alpha, x)

    def tail(self, x):
        return np.exp(self.log_tail(x))

    def log_tail(self, x):
        return self.qsd.log_tail(x)

    def ppf(self, u):
        if self._ppf_grid is None:
            hi = 80.0 / (self.alpha - self.gamma)
            xs = np.linspace(0.0, hi, 200001)
            self._ppf_grid = (self.qsd.cdf(xs), xs)
        cdf, xs = self._ppf_grid
        return np.interp(np.asarray(u, dtype=float), cdf, xs)

    def params(self):
        return {"gamma": self.gamma, "alpha": self.alpha}


class Tabulated(InitialMeasure):
    """Measure given by (x, tail) pairs with a declared tail extension.

    The log-tail is interpolated with a monotone piecewise cubic; beyond the
    grid an analytic exponential extension  tail(x) = tail(x_n) e^{-rate (x - x_n)}
    must be declared, otherwise evaluation there raises.  The final tabulated
    tail value must be strictly positive so the extension is well defined.
    """

    name = "tabulated"

    def __init__(self, xs, tails, extension_rate=None):
        xs = np.asarray(xs, dtype=float)
        tails = np.asarray(tails, dtype=float)
        if xs.ndim != 1 or xs.shape != tails.shape or len(xs) < 4:
            raise ParameterDomainError("tabulated grid needs >= 4 (x, tail) pairs")
        if np.any(np.diff(xs) <= 0):
            raise ParameterDomainError("tabulated x grid must be strictly increasing")
        if np.any(np.diff(tails) > 0):
            raise ParameterDomainError("tabulated tail must be nonincreasing")
        if not tails[-1] > 0:
            raise ParameterDomainError("final tabulated tail value must be positive")
        if xs[0] != 0.0 or tails[0] != 1.0:
            raise ParameterDomainError("tabulated grid must start at (0, 1)")
        self.xs = xs
        self.tails = tails
        self.extension_rate = None if extension_rate is None else float(extension_rate)
        if self.extension_rate is not None and not self.extension_rate > 0:
            raise ParameterDomainError("extension rate must be positive")
        self._interp = PchipInterpolator(xs, np.log(tails))
        self._dinterp = self._interp.derivative()
        if self.extension_rate is not None:
            self.rho_liminf = self.rho_limsup = self.extension_rate

    def _check_range(self, x):
        if self.extension_rate is None and np.any(np.asarray(x) > self.xs[-1]):
            raise ExtrapolationError(
                "x beyond tabulated grid and no analytic tail extension declared"
            )

    def log_tail(self, x):
        x = np.asarray(x, dtype=float)
        self._check_range(x)
        inside = self._interp(np.clip(x, 0.0, self.xs[-1]))
        if self.extension_rate is None:
            out = np.where(x <= 0, 0.0, inside)
        else:
            beyond = np.log(self.tails[-1]) - self.extension_rate * (x - self.xs[-1])
            out = np.where(x <= 0, 0.0, np.where(x <= self.xs[-1], inside, beyond))
        return out if out.ndim else float(out)

    def tail(self, x):
        return np.exp(self.log_tail(x))

    def density(self, x):
        # -d/dx tail = -tail * d/dx log tail
        x = np.asarray(x, dtype=float)
        self._check_range(x)
        inside = -self._dinterp(np.clip(x, 0.0, self.xs[-1]))
        rate = np.where(
            x <= self.xs[-1],
            inside,
            self.extension_rate if self.extension_rate is not None else np.nan,
        )
        out = np.maximum(rate, 0.0) * self.tail(x)
        out = np.where(x < 0, 0.0, out)
        return out if out.ndim else float(out)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        # invert the monotone log-tail interpolant on a fine grid
        grid = np.linspace(self.xs[0], self.xs[-1], 4096)
        lt = self._interp(grid)
        cdf = 1.0 - np.exp(lt)
        out = np.interp(u, cdf, grid)
        top = 1.0 - self.tails[-1]
        if np.any(u > top):
            if self.extension_rate is None:
                raise ExtrapolationError("quantile beyond grid without extension")
            over = u > top
            out = np.where(
                over,
                self.xs[-1] - np.log((1.0 - u) / self.tails[-1]) / self.extension_rate,
                out,
            )
        return out

    def params(self):
        return {"n": float(len(self.xs)), "extension_rate": self.extension_rate or np.nan}


# catalog used by the CLI and the classification golden test
FAMILIES = {
    "dirac": Dirac,
    "exponential": Exponential,
    "halfnormal": HalfNormal,
    "weibull": Weibull,
    "pareto": Pareto,
    "halfcauchy": HalfCauchy,
    "logtail": LogTail,
    "qsd": QsdMeasure,
    "tabulated": Tabulated,
}
