"""Log-space helpers and panelized Gauss-Legendre quadrature.

Everything that touches exponentials of potentially huge magnitude goes
through this module: integrands are handed around as *log* integrands and
integrals are accumulated with logsumexp, so overflow is impossible by
construction and cancellation is limited to explicit expm1/log1p sites.
"""

import numpy as np
from scipy.special import logsumexp

_LOG2 = np.log(2.0)

# log of the smallest useful double; anything this far below a running peak
# is discarded when truncating improper integrals
LOG_FLOOR = -745.0


def log1mexp(x):
    """log(1 - exp(x)) for x <= 0, elementwise, stable near both ends."""
    x = np.asarray(x, dtype=float)
    x = np.minimum(x, -1e-300)
    with np.errstate(divide="ignore"):
        out = np.where(
            x < -_LOG2,
            np.log1p(-np.exp(np.maximum(x, LOG_FLOOR))),
            np.log(np.maximum(-np.expm1(x), 1e-300)),
        )
    return out if out.ndim else float(out)


def log_sinh(z):
    """log(sinh(z)) for z >= 0, elementwise; -inf at z = 0."""
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore"):
        small = np.where(z > 0, np.log(np.where(z > 0, z, 1.0)) + z * z / 6.0, -np.inf)
        large = z - _LOG2 + np.log1p(-np.exp(-np.minimum(2.0 * z, 700.0)))
    out = np.where(z < 1e-4, small, large)
    return out if out.ndim else float(out)


def sinhc(z):
    """sinh(z)/z with the removable singularity filled in at z = 0."""
    z = np.asarray(z, dtype=float)
    # sinh overflows past ~710; callers only hit that where a decaying factor
    # has already underflowed, so the clamp cannot change a finite product
    safe = np.clip(np.where(z == 0.0, 1.0, z), -710.0, 710.0)
    out = np.where(np.abs(z) < 1e-4, 1.0 + z * z / 6.0, np.sinh(safe) / safe)
    return out if out.ndim else float(out)


_gl_cache = {}


def gauss_legendre(order):
    if order not in _gl_cache:
        x, w = np.polynomial.legendre.leggauss(order)
        _gl_cache[order] = (x, w)
    return _gl_cache[order]


def panel_nodes(a, b, n_panels, order=24):
    """Gauss-Legendre nodes/log-weights for [a, b] split into equal panels."""
    x, w = gauss_legendre(order)
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    logw = (np.log(half)[:, None] + np.log(w)[None, :]).ravel()
    return nodes, logw


def panel_log_integral(log_f, a, b, n_panels, order=24):
    """log of integral_a^b exp(log_f(x)) dx on a fixed panel grid."""
    nodes, logw = panel_nodes(a, b, n_panels, order)
    return float(logsumexp(log_f(nodes) + logw))


def refine_log_integral(log_f, a, b, rel_tol=1e-9, n0=8, order=24, max_panels=8192):
    """Panel-doubling quadrature of exp(log_f) over [a, b] in log space.

    Returns (log_value, rel_err).  rel_err is the relative change of the last
    doubling, used downstream as the quadrature error estimate.
    """
    if not b > a:
        return -np.inf, 0.0
    prev = panel_log_integral(log_f, a, b, n0, order)
    n = 2 * n0
    while n <= max_panels:
        cur = panel_log_integral(log_f, a, b, n, order)
        if prev == -np.inf and cur == -np.inf:
            return -np.inf, 0.0
        rel = abs(np.expm1(min(prev - cur, 700.0))) if cur > -np.inf else np.inf
        if rel < rel_tol:
            return cur, rel
        prev = cur
        n *= 2
    return prev, rel


def support_bracket(log_vals, grid, drop=45.0):
    """Smallest [lo, hi] of `grid` containing all points within `drop` nats of the peak."""
    finite = np.isfinite(log_vals)
    if not finite.any():
        return None
    peak = log_vals[finite].max()
    keep = log_vals >= peak - drop
    idx = np.nonzero(keep)[0]
    lo = grid[max(idx[0] - 1, 0)]
    hi = grid[min(idx[-1] + 1, len(grid) - 1)]
    return lo, hi


def log_trapezoid_cumulative(log_f_vals, x):
    """Cumulative trapezoid integral of exp(log_f_vals) over grid x, in log space.

    Returns an array c with c[i] = log integral_{x[0]}^{x[i]}; c[0] = -inf.
    """
    lf = np.asarray(log_f_vals, dtype=float)
    dx = np.diff(x)
    pair = np.logaddexp(lf[:-1], lf[1:]) + np.log(dx / 2.0)
    out = np.empty(len(x))
    out[0] = -np.inf
    out[1:] = np.logaddexp.accumulate(pair)
    return out
