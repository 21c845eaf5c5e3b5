"""Exact absorbed-kernel machinery via numerically stable quadrature.

The absorbed transition density for drift -alpha is

    f(t,x,y) = exp(alpha x - alpha^2 t/2 - alpha y) (2 pi t)^{-1/2}
               (e^{-(x-y)^2/2t} - e^{-(x+y)^2/2t})

All evaluation happens in log space through the exact regrouping

    log f = -(x - y - alpha t)^2 / (2t) - log sqrt(2 pi t) + log(1 - e^{-2xy/t})

which removes the subtraction of the two Gaussians (expm1 handles the
bracket) and keeps the exponent's magnitude at the size of the *result*, so
huge x from heavy-tailed starts cannot poison the arithmetic.

Improper integrals are truncated where the log-integrand drops ~45 nats
below its running peak, then integrated with panelized Gauss-Legendre rules;
panel counts are doubled until successive values agree to the requested
relative tolerance, and the last relative change is reported as the error
estimate.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import log_ndtr, logsumexp, ndtr

from .errors import (
    AccuracyError,
    ConditioningDegenerateError,
    DegenerateMeasureError,
    ParameterDomainError,
)
from .model import InitialMeasure
from .numerics import (
    gauss_legendre,
    log1mexp,
    log_sinh,
    log_trapezoid_cumulative,
    panel_nodes,
    support_bracket,
)

SQRT_2PI = np.sqrt(2.0 * np.pi)

_SPAN_SD = 45.0  # half-width of inner y windows, in units of sqrt(t)
_DROP = 45.0     # nats below the peak at which improper domains are cut


@dataclass(frozen=True)
class ValueWithError:
    """A scalar quadrature result with its (relative-change) error estimate."""

    value: float
    error: float


# ---------------------------------------------------------------------------
# pointwise analytic pieces
# ---------------------------------------------------------------------------

def mills_tail(z):
    """L(z) = integral_z^inf e^{-w^2/2} dw, the Gaussian upper-tail mass."""
    z = np.asarray(z, dtype=float)
    out = SQRT_2PI * ndtr(-z)
    return out if out.ndim else float(out)


def log_defect_kernel(t, x, y, alpha):
    """log f(t, x, y); -inf on the boundary x = 0 or y = 0."""
    if not t > 0:
        raise ParameterDomainError(f"t must be positive, got {t}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y - alpha * t
    arg = -np.minimum(2.0 * x * y / t, 700.0)
    out = -d * d / (2.0 * t) - 0.5 * np.log(2.0 * np.pi * t) + log1mexp(arg)
    out = np.where((x > 0) & (y > 0), out, -np.inf)
    return out if out.ndim else float(out)


def defect_kernel(t, x, y, alpha):
    """Absorbed transition density f(t, x, y) >= 0."""
    out = np.exp(log_defect_kernel(t, x, y, alpha))
    return out if np.ndim(out) else float(out)


def log_first_passage_upper(x, t, alpha, a=0.0):
    """log P_x(X_t > a, tau > t) from the reflection principle.

    This closed form is the Dirac-start oracle:
    P_x(X_t > a, tau > t) = Phi((x - alpha t - a)/sqrt t)
                            - e^{2 alpha x} Phi(-(x + alpha t + a)/sqrt t).
    Evaluated as l1 + log(1 - e^{l2 - l1}) with stable log-Phi so neither
    term can overflow.
    """
    if not t > 0:
        raise ParameterDomainError(f"t must be positive, got {t}")
    x = np.asarray(x, dtype=float)
    st = np.sqrt(t)
    l1 = log_ndtr((x - alpha * t - a) / st)
    l2 = 2.0 * alpha * x + log_ndtr(-(x + alpha * t + a) / st)
    out = l1 + log1mexp(np.minimum(l2 - l1, -1e-300))
    out = np.where(x > 0, out, -np.inf)
    return out if out.ndim else float(out)


def first_passage_survival(x, t, alpha):
    """Closed-form P_x(tau > t) for a start at x > 0 (Dirac oracle)."""
    out = np.exp(log_first_passage_upper(x, t, alpha, 0.0))
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# discretization of the initial measure
# ---------------------------------------------------------------------------

def _measure_nodes(mu, t, alpha, a=0.0, n_panels=64, order=24):
    """(x_nodes, log_weights) discretizing integral h(x) dmu(x) for the
    absorbed-mass integrands at horizon t and threshold a.

    Node placement scores x by log density + log P_x(X_t > a, tau > t); the
    closed form is used for *meshing only*, values still come from the double
    quadrature.  Heavy tails get an extra log-x panel block so power-law mass
    far beyond alpha*t is captured without millions of nodes.
    """
    if mu.atom is not None:
        return np.array([mu.atom]), np.array([0.0])
    st = np.sqrt(t)
    x_hi0 = alpha * t + a + 60.0 * st + 10.0
    scan = np.linspace(1e-9, x_hi0, 4001)
    score = mu.log_density(scan) + log_first_passage_upper(scan, t, alpha, a)
    br = support_bracket(score, scan, drop=_DROP)
    blocks = []
    est = -np.inf
    if br is not None:
        # snap to the support edge so panels never straddle a density jump
        slo = getattr(mu, "support_lo", 0.0)
        lo, hi = max(br[0], 0.0, slo), br[1]
        est = logsumexp(score[np.isfinite(score)]) + np.log(scan[1] - scan[0])
        if slo <= 0.0 and lo < 0.25 * hi:
            # a log-x block absorbs any algebraic density singularity at 0;
            # the linear panels then start clear of the origin
            x_cut = min(1.0, 0.25 * hi)
            u_hi = np.log(x_cut)
            u = u_hi
            target = est - (_DROP + 15.0)
            while u > -700.0:
                xu = np.exp(u)
                su = mu.log_density(xu) + log_first_passage_upper(xu, t, alpha, a) + u
                if su < target:
                    break
                u -= 5.0
            if u < u_hi - 1e-12:
                u0, lw0 = panel_nodes(u, u_hi, n_panels, order)
                x0 = np.exp(u0)
                blocks.append((x0, lw0 + u0 + mu.log_density(x0)))
            lo = x_cut
        x1, lw1 = panel_nodes(lo, hi, n_panels, order)
        blocks.append((x1, lw1 + mu.log_density(x1)))
    # heavy-tail block: meaningful tail mass beyond the linear window
    lt_edge = float(mu.log_tail(x_hi0))
    if np.isfinite(lt_edge) and lt_edge > est - (_DROP + 10.0):
        u_lo = np.log(x_hi0)
        target = max(est, lt_edge) - (_DROP + 15.0)
        u_hi = u_lo + 5.0
        while float(mu.log_tail(np.exp(u_hi))) > target and u_hi < 400.0:
            u_hi += 5.0
        u2, lw2 = panel_nodes(u_lo, u_hi, n_panels, order)
        x2 = np.exp(u2)
        blocks.append((x2, lw2 + u2 + mu.log_density(x2)))
    if not blocks:
        raise DegenerateMeasureError("no measure mass located for quadrature")
    xs = np.concatenate([b[0] for b in blocks])
    lws = np.concatenate([b[1] for b in blocks])
    keep = np.isfinite(lws)
    return xs[keep], lws[keep]


def _log_inner_y(x, t, alpha, a=0.0, n_panels=32, order=16, span_sd=_SPAN_SD):
    """log integral_a^inf f(t, x, y) dy for each x, via per-x shifted windows.

    The y window is centered on the drifted image x - alpha t (width
    O(sqrt t)), parametrized by its offset so the quadratic exponent is
    formed without large-magnitude cancellation.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    st = np.sqrt(t)
    z = x - alpha * t
    aa = max(a, 0.0)
    s = span_sd * st
    # span and the offset z - ylo are formed from s directly: for huge z the
    # naive yhi - ylo would cancel to 0 and drop the node entirely
    interior = z - s >= aa
    ylo = np.where(interior, z - s, aa)
    span = np.where(interior, 2.0 * s, np.maximum(z - aa, 0.0) + s)
    zml = np.where(interior, s, z - aa)  # = z - ylo
    gl_x, gl_w = gauss_legendre(order)
    edges = np.linspace(0.0, 1.0, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = (mid[:, None] + half[:, None] * gl_x[None, :]).ravel()  # unit nodes
    lw_u = (np.log(half)[:, None] + np.log(gl_w)[None, :]).ravel()
    y = ylo[:, None] + span[:, None] * u[None, :]
    d = zml[:, None] - span[:, None] * u[None, :]  # = x - y - alpha t
    with np.errstate(over="ignore"):
        arg = -np.minimum(2.0 * x[:, None] * y / t, 700.0)
    lf = -d * d / (2.0 * t) - 0.5 * np.log(2.0 * np.pi * t) + log1mexp(arg)
    lf = np.where(y > 0, lf, -np.inf)
    return logsumexp(lf + lw_u[None, :] + np.log(span)[:, None], axis=1)


def _log_joint_once(mu, t, alpha, a, n_outer, n_inner, order=24):
    xs, lws = _measure_nodes(mu, t, alpha, a=a, n_panels=n_outer, order=order)
    li = _log_inner_y(xs, t, alpha, a=a, n_panels=n_inner)
    return float(logsumexp(lws + li))


def _refine(once, rel_tol, schedule=((32, 24), (64, 32), (128, 48), (256, 64), (512, 96))):
    prev = None
    rel = np.inf
    for n_outer, n_inner in schedule:
        cur = once(n_outer, n_inner)
        if prev is not None:
            if prev == -np.inf and cur == -np.inf:
                return cur, 0.0, True
            rel = abs(np.expm1(np.clip(prev - cur, -700.0, 700.0)))
            if rel < rel_tol:
                return cur, rel, True
        prev = cur
    return cur, rel, False


def log_joint_tail(mu, t, a, alpha, rel_tol=1e-9):
    """log P_mu(X_t > a, tau > t) by double quadrature of the master formula."""
    if not t > 0:
        raise ParameterDomainError(f"t must be positive, got {t}")
    logv, rel, ok = _refine(lambda no, ni: _log_joint_once(mu, t, alpha, a, no, ni), rel_tol)
    if not ok:
        raise AccuracyError(
            f"joint-tail quadrature did not reach rel_tol={rel_tol:g} (got {rel:g})",
            partial=float(np.exp(logv)),
            error=rel,
        )
    return logv, rel


def survival(mu, t, alpha, rel_tol=1e-9):
    """P_mu(tau > t) with an error bound, by adaptive double quadrature."""
    logv, rel = log_joint_tail(mu, t, 0.0, alpha, rel_tol=rel_tol)
    v = float(np.exp(logv))
    return ValueWithError(min(v, 1.0), rel * v)


def joint_tail(mu, t, a, alpha, rel_tol=1e-9):
    """P_mu(X_t > a, tau > t) with an error bound."""
    logv, rel = log_joint_tail(mu, t, a, alpha, rel_tol=rel_tol)
    v = float(np.exp(logv))
    return ValueWithError(v, rel * v)


def conditioned_exceedance(mu, t, a, alpha, rel_tol=1e-9):
    """P_mu(X_t > a | tau > t), formed as exp(log numerator - log denominator)."""
    ln, rn = log_joint_tail(mu, t, a, alpha, rel_tol=rel_tol)
    ld, rd = log_joint_tail(mu, t, 0.0, alpha, rel_tol=rel_tol)
    v = float(np.exp(ln - ld))
    return ValueWithError(min(v, 1.0), (rn + rd) * v)


def survival_via_h(mu, t, alpha, rel_tol=1e-9):
    """Same survival probability with the integration order flipped.

    Inner integral first: h-type integral over y of the sinh form, then x
    against e^{-x^2/2t} e^{alpha x} dmu(x).  The quadratic exponents are
    recombined per (x, y) pair exactly as in the direct order (the only
    stable grouping), but the window layout, panelization and rule order
    differ, making this a cross-order consistency check.
    """
    if not t > 0:
        raise ParameterDomainError(f"t must be positive, got {t}")

    def once(n_outer, n_inner):
        xs, lws = _measure_nodes(mu, t, alpha, a=0.0, n_panels=n_outer, order=32)
        st = np.sqrt(t)
        z = xs - alpha * t
        s = 40.0 * st
        interior = z - s >= 0.0
        ylo = np.where(interior, z - s, 0.0)
        span = np.where(interior, 2.0 * s, np.maximum(z, 0.0) + s)
        zml = np.where(interior, s, z)
        gl_x, gl_w = gauss_legendre(20)
        edges = np.linspace(0.0, 1.0, n_inner + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        u = (mid[:, None] + half[:, None] * gl_x[None, :]).ravel()
        lw_u = (np.log(half)[:, None] + np.log(gl_w)[None, :]).ravel()
        y = ylo[:, None] + span[:, None] * u[None, :]
        d = zml[:, None] - span[:, None] * u[None, :]
        # 2 sinh(xy/t) e^{-xy/t} = 1 - e^{-2xy/t}, folded into the exponent
        # 2 sinh(w) e^{-w} with w = xy/t, folded against the regrouped
        # quadratic exponent -d^2/2t (the only stable grouping)
        with np.errstate(over="ignore"):  # clamped on the next line
            w = np.minimum(xs[:, None] * y / t, 1e306)
        wc = np.minimum(w, 350.0)
        lf = -d * d / (2.0 * t) + log_sinh(wc) - wc + np.log(2.0)
        lf = np.where(y > 0, lf, -np.inf)
        li = logsumexp(lf + lw_u[None, :] + np.log(span)[:, None], axis=1)
        return float(logsumexp(lws + li) - 0.5 * np.log(2.0 * np.pi * t))

    logv, rel, ok = _refine(once, rel_tol)
    if not ok:
        raise AccuracyError(
            f"flipped-order survival did not reach rel_tol={rel_tol:g}",
            partial=float(np.exp(logv)),
            error=rel,
        )
    v = float(np.exp(logv))
    return ValueWithError(min(v, 1.0), rel * v)


# ---------------------------------------------------------------------------
# conditional law at time t
# ---------------------------------------------------------------------------

def _cumulative_quartic(vals, h):
    """Cumulative integral of grid values with O(h^4) local parabolic panels."""
    n = len(vals)
    inc = np.empty(n - 1)
    # interior intervals: average of the two parabolas through neighbours
    if n >= 4:
        inc[1:-1] = h / 24.0 * (
            -vals[:-3] + 13.0 * vals[1:-2] + 13.0 * vals[2:-1] - vals[3:]
        )
    inc[0] = h / 12.0 * (5.0 * vals[0] + 8.0 * vals[1] - vals[2])
    inc[-1] = h / 12.0 * (5.0 * vals[-1] + 8.0 * vals[-2] - vals[-3])
    out = np.empty(n)
    out[0] = 0.0
    np.cumsum(inc, out=out[1:])
    return out


@dataclass
class ConditionedEstimate:
    """Quadrature representation of Law(X_t | tau > t)."""

    t: float
    survival: float
    error_bound: float
    grid: np.ndarray
    density_vals: np.ndarray
    cdf_vals: np.ndarray
    _cdf_interp: Callable = field(repr=False, default=None)

    def density(self, y):
        y = np.asarray(y, dtype=float)
        out = np.interp(y, self.grid, self.density_vals, left=0.0, right=0.0)
        return out if out.ndim else float(out)

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        out = np.clip(self._cdf_interp(np.clip(y, self.grid[0], self.grid[-1])), 0.0, 1.0)
        out = np.where(y <= self.grid[0], 0.0, np.where(y >= self.grid[-1], 1.0, out))
        return out if out.ndim else float(out)


def conditional_law(mu, t, alpha, rel_tol=1e-9, resolution=64):
    """Law(X_t | tau > t) as a ConditionedEstimate.

    resolution sets the density grid pitch: h = min(sqrt t, 1/alpha)/resolution.
    The CDF is the cumulative integral of the same inner quadrature that
    defines the density, self-normalized by its total mass.
    """
    # the density and cdf are formed as exp(log joint - log survival), so
    # extreme t with survival far below the double floor still conditions
    logS, relS = log_joint_tail(mu, t, 0.0, alpha, rel_tol=rel_tol)
    xs, lws = _measure_nodes(mu, t, alpha, a=0.0, n_panels=256, order=24)

    # locate the y support from a coarse scan of the joint density; far
    # heavy-tail mass beyond the cap shows up in error_bound via |1 - total|
    st = np.sqrt(t)
    y_probe_hi = max(float(np.max(xs)) - alpha * t, 0.0) + _SPAN_SD * st + 80.0 / alpha
    y_probe_hi = min(y_probe_hi, alpha * t + _SPAN_SD * st + 400.0 / alpha)
    y_scan = np.linspace(1e-9, y_probe_hi, 2001)
    ld_scan = _log_joint_density(xs, lws, t, alpha, y_scan)
    br = support_bracket(ld_scan, y_scan, drop=_DROP)
    if br is None:
        raise ConditioningDegenerateError("conditional density has no representable mass")
    ymax = br[1]

    h = min(st, 1.0 / alpha) / resolution
    n = int(np.ceil(ymax / h)) + 1
    n = min(max(n, 1025), 400001)
    grid = np.linspace(0.0, ymax, n)
    h = grid[1] - grid[0]
    logd = np.empty(n)
    logd[0] = -np.inf
    # chunk so the (x-node, y) matrix temporaries stay within a few hundred MB
    chunk = max(256, int(2.0e7 / max(len(xs), 1)))
    for i0 in range(1, n, chunk):
        i1 = min(i0 + chunk, n)
        logd[i0:i1] = _log_joint_density(xs, lws, t, alpha, grid[i0:i1])
    dvals = np.exp(logd - logS)
    raw = _cumulative_quartic(dvals, h)
    total = raw[-1]
    if not total > 0:
        raise ConditioningDegenerateError("conditional mass underflowed")
    cdf_vals = np.clip(raw / total, 0.0, 1.0)
    cdf_vals = np.maximum.accumulate(cdf_vals)
    err = abs(1.0 - total) + relS
    interp = PchipInterpolator(grid, cdf_vals)
    return ConditionedEstimate(
        t=t,
        survival=float(np.exp(logS)),
        error_bound=float(err),
        grid=grid,
        density_vals=dvals / total,
        cdf_vals=cdf_vals,
        _cdf_interp=interp,
    )


def _log_joint_density(xs, lws, t, alpha, y):
    """log integral f(t, x, y) dmu(x) on the node set (xs, lws), vectorized in y."""
    y = np.asarray(y, dtype=float)
    z = xs - alpha * t
    d = z[:, None] - y[None, :]
    with np.errstate(over="ignore"):
        arg = -np.minimum(2.0 * xs[:, None] * y[None, :] / t, 700.0)
    lf = -d * d / (2.0 * t) - 0.5 * np.log(2.0 * np.pi * t) + log1mexp(arg)
    lf = np.where((y[None, :] > 0) & (xs[:, None] > 0), lf, -np.inf)
    return logsumexp(lf + lws[:, None], axis=0)


# ---------------------------------------------------------------------------
# the reweighted initial measure nu_t
# ---------------------------------------------------------------------------

@dataclass
class NuMeasure:
    """nu_t with cdf F(z) = C_t integral_[0, zt] e^{-x^2/2t} e^{alpha x} dmu(x)."""

    t: float
    log_normalizer: float
    _z_grid: np.ndarray = field(repr=False)
    _cdf_grid: np.ndarray = field(repr=False)

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        out = np.interp(z, self._z_grid, self._cdf_grid, left=0.0, right=1.0)
        return out if out.ndim else float(out)

    def median(self):
        return float(np.interp(0.5, self._cdf_grid, self._z_grid))


def nu_family(mu, t, alpha):
    """The reweighted measure nu_t; the normalizer is held in log space."""
    if not t > 0:
        raise ParameterDomainError(f"t must be positive, got {t}")
    if mu.atom is not None:
        z0 = mu.atom / t
        eps = max(z0 * 1e-12, 1e-300)
        zg = np.array([0.0, z0 - eps, z0, z0 + 1.0])
        lw = -mu.atom**2 / (2.0 * t) + alpha * mu.atom
        return NuMeasure(
            t=t, log_normalizer=-lw, _z_grid=zg, _cdf_grid=np.array([0.0, 0.0, 1.0, 1.0])
        )
    st = np.sqrt(t)
    x_hi = 2.0 * alpha * t + 60.0 * st + 10.0
    grid = np.linspace(1e-9, x_hi, 40001)
    lphi = -grid * grid / (2.0 * t) + alpha * grid + mu.log_density(grid)
    if not np.isfinite(lphi).any() or lphi.max() < -700.0:
        raise DegenerateMeasureError("all nu_t mass below the quadrature floor")
    cum = log_trapezoid_cumulative(lphi, grid)
    log_total = cum[-1]
    cdf = np.exp(cum - log_total)
    cdf[-1] = 1.0
    return NuMeasure(
        t=t, log_normalizer=-log_total, _z_grid=grid / t, _cdf_grid=np.maximum.accumulate(cdf)
    )


def nu_concentration(mu, t, alpha):
    """Median of nu_t: the location diagnostic for its point-mass limit."""
    return nu_family(mu, t, alpha).median()
