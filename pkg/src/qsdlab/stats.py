"""Distances and bands for comparing empirical, quadrature and analytic laws."""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ParameterDomainError

_QUANTILE_GRID = 10_000


@dataclass(frozen=True)
class CdfView:
    """A CDF usable in distance computations.

    kind is "analytic", "quadrature" or "empirical".  Empirical views carry
    the sorted sample; continuous views may carry a ppf (used to build
    quantile probe grids) and native probe points (e.g. a quadrature grid).
    """

    kind: str
    _cdf: Callable = field(repr=False, default=None)
    sample: np.ndarray = field(repr=False, default=None)
    ppf: Callable = field(repr=False, default=None)
    probes: np.ndarray = field(repr=False, default=None)

    def evaluate(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "empirical":
            out = np.searchsorted(self.sample, y, side="right") / len(self.sample)
        else:
            out = np.clip(self._cdf(y), 0.0, 1.0)
        return out if np.ndim(out) else float(out)


def analytic_view(cdf, ppf=None):
    return CdfView(kind="analytic", _cdf=cdf, ppf=ppf)


def quadrature_view(estimate):
    """CdfView wrapping a kernel.ConditionedEstimate."""
    return CdfView(kind="quadrature", _cdf=estimate.cdf, probes=estimate.grid)


def empirical_view(values):
    values = np.sort(np.asarray(values, dtype=float))
    if values.size == 0:
        raise ParameterDomainError("empirical view needs a nonempty sample")
    return CdfView(kind="empirical", sample=values)


def qsd_view(gamma, alpha):
    """Analytic view of the quasi-stationary law pi_gamma, with its ppf."""
    from .model import QsdMeasure, qsd_cdf

    mu = QsdMeasure(gamma, alpha)
    return analytic_view(lambda y: qsd_cdf(gamma, alpha, y), ppf=mu.ppf)


def _probe_grid(view, other):
    pts = []
    if view.probes is not None:
        pts.append(view.probes)
    if view.ppf is not None:
        u = (np.arange(_QUANTILE_GRID) + 0.5) / _QUANTILE_GRID
        pts.append(np.asarray(view.ppf(u), dtype=float))
    return pts


def ks_distance(a, b):
    """sup |A - B| over a refinement grid.

    When exactly one side is empirical the one-sample form is exact: the sup
    against a continuous CDF is attained at the sample's jump points.  For
    two continuous views the sup is approximated on the union of both native
    probe grids and a 10^4-point quantile grid of each side that has a ppf.
    """
    if (a.kind == "empirical") != (b.kind == "empirical"):
        emp, cont = (a, b) if a.kind == "empirical" else (b, a)
        xs = emp.sample
        n = len(xs)
        g = np.asarray(cont.evaluate(xs), dtype=float)
        i = np.arange(1, n + 1)
        return float(max(np.max(np.abs(g - i / n)), np.max(np.abs(g - (i - 1) / n))))
    if a.kind == "empirical" and b.kind == "empirical":
        xs = np.union1d(a.sample, b.sample)
        da = np.abs(a.evaluate(xs) - b.evaluate(xs))
        # also compare just-left of each jump
        db = np.abs(
            np.searchsorted(a.sample, xs, side="left") / len(a.sample)
            - np.searchsorted(b.sample, xs, side="left") / len(b.sample)
        )
        return float(max(da.max(), db.max()))
    pts = _probe_grid(a, b) + _probe_grid(b, a)
    if not pts:
        raise ParameterDomainError(
            "two continuous views need probes or a ppf on at least one side"
        )
    xs = np.unique(np.concatenate(pts))
    return float(np.max(np.abs(a.evaluate(xs) - b.evaluate(xs))))


def dkw_band(n, confidence):
    """Dvoretzky-Kiefer-Wolfowitz band half-width at the given confidence."""
    if n < 1:
        raise ParameterDomainError("n must be >= 1")
    if not 0.0 < confidence < 1.0:
        raise ParameterDomainError("confidence must lie in (0, 1)")
    return float(np.sqrt(np.log(2.0 / (1.0 - confidence)) / (2.0 * n)))


def scaled_tail_curve(values, rule, t, c_grid):
    """[(c, fraction of values above rule.evaluate(t, c))] for each c."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ParameterDomainError("scaled tail curve needs a nonempty sample")
    out = []
    for c in c_grid:
        a = rule.evaluate(t, c)
        out.append((float(c), float(np.mean(values > a))))
    return out
