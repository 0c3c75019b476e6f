"""Removable / weak / strong classification of fields near a boundary point.

A positive solution near the singular point behaves in one of three ways:

* removable: bounded, ``max_phi u(r, .)`` does not blow up as ``r -> 0``;
* weak: ``u ~ k cos(phi) / r`` (the half-space kernel ``V_0``) with finite ``k``;
* strong: ``u ~ r^{-beta_q} omega(phi)``.

The classifier measures the log-log slope of ``r -> max_phi u`` over a
window, the strength ``k = limsup u / V_0`` band by band toward the inner
radius, and a boundary Harnack ratio. It returns a verdict only when exactly
one candidate matches; otherwise it raises :class:`Ambiguous`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from . import exponents
from ._validation import ProblemParams
from .exceptions import Ambiguous, DegenerateFit, DomainError
from .halfspace import SectorGrid, SolutionField, custom

PHI_CAP_K = 0.5 * math.pi - 0.1
PHI_CAP_HARNACK = 0.5 * math.pi - 0.05


@dataclass
class Classification:
    verdict: str
    slope_fit: float
    k_hat: float | None
    harnack_c: float
    window: tuple
    diagnostics: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        if self.verdict == "Weak":
            return f"Weak(k={self.k_hat:.6g})"
        return self.verdict

    def as_dict(self) -> dict:
        return {"verdict": self.verdict, "label": self.label, "slope_fit": self.slope_fit,
                "k_hat": self.k_hat, "harnack_c": self.harnack_c, "window": list(self.window),
                "diagnostics": self.diagnostics}


def _window_rows(fld: SolutionField, window):
    r_lo, r_hi = map(float, window)
    r = fld.grid.r
    if not (0 < r_lo < r_hi):
        raise DomainError("window must satisfy 0 < r_lo < r_hi")
    if r_hi / r_lo < 10 * (1 - 1e-9):
        raise DomainError("window must span at least one decade")
    if r_lo < r[0] * (1 - 1e-12) or r_hi > r[-1] * (1 + 1e-12):
        raise DomainError("window lies outside the field's radial range")
    rows = np.nonzero((r >= r_lo * (1 - 1e-12)) & (r <= r_hi * (1 + 1e-12)))[0]
    if len(rows) < 3:
        raise DomainError("window contains fewer than three radial nodes")
    return rows


def fit_exponent(fld: SolutionField, window) -> float:
    """Least-squares slope of ``ln max_phi u`` against ``ln r`` over the window nodes."""
    rows = _window_rows(fld, window)
    m = np.max(fld.u[rows], axis=1)
    if np.any(m <= 0):
        raise DegenerateFit("max_phi u <= 0 inside the fit window")
    return float(np.polyfit(np.log(fld.grid.r[rows]), np.log(m), 1)[0])


def estimate_k(fld: SolutionField, window, band_decades: float = 0.5) -> dict:
    """Strength ``u r / cos(phi)`` per band, innermost first.

    Each band spans ``band_decades`` of radius; its value is the maximum over
    its nodes with ``phi <= pi/2 - 0.1``. ``k_hat`` is the innermost band.
    The trend reports the relative change and the growth per decade between
    the two innermost bands.
    """
    rows = _window_rows(fld, window)
    r = fld.grid.r[rows]
    phi = fld.grid.phi
    cols = phi <= PHI_CAP_K + 1e-12
    ratio = fld.u[np.ix_(rows, np.nonzero(cols)[0])] * r[:, None] / np.cos(phi[cols])[None, :]
    if np.max(fld.u[rows]) <= 0:
        raise DegenerateFit("field is not positive in the window")
    lr = np.log10(r)
    edges = np.arange(lr[0], lr[-1] + 1e-9, band_decades)
    if len(edges) < 2:
        edges = np.array([lr[0], lr[-1]])
    if edges[-1] < lr[-1] - 1e-9:
        edges = np.append(edges, lr[-1])
    bands, centers = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (lr >= a - 1e-12) & (lr <= b + 1e-12)
        bands.append(float(np.max(ratio[sel])))
        centers.append(0.5 * (a + b))
    out = {"k_hat": bands[0], "bands": bands, "band_log10_centers": centers}
    if len(bands) >= 2:
        k0, k1 = bands[0], bands[1]
        out["last_change"] = abs(k0 - k1) / abs(k0) if k0 != 0 else math.inf
        dec = centers[1] - centers[0]
        out["growth_per_decade"] = (k0 / k1) ** (1.0 / dec) if k1 > 0 and k0 > 0 else math.nan
    else:
        out["last_change"] = math.nan
        out["growth_per_decade"] = math.nan
    return out


def harnack_check(fld: SolutionField, r_values) -> float:
    """Largest ratio ``max u/rho / min u/rho`` over the circles ``|x| = r``."""
    phi = fld.grid.phi
    cols = phi <= PHI_CAP_HARNACK + 1e-12
    worst = 1.0
    for r in r_values:
        col = fld.column_at(float(r))[cols]
        rho = float(r) * np.cos(phi[cols])
        g = col / rho
        if np.any(g <= 0) or not np.all(np.isfinite(g)):
            raise DegenerateFit("Harnack check needs strictly positive samples")
        worst = max(worst, float(g.max() / g.min()))
    return worst


@dataclass
class ClassifierThresholds:
    slope_band: float = 0.15
    removable_slope: float = -0.25
    weak_change: float = 0.05
    strong_growth: float = 1.5
    band_decades: float = 0.5


def classify(fld: SolutionField, params: ProblemParams, window=None,
             thresholds: ClassifierThresholds | None = None) -> Classification:
    """Verdict ``Removable``, ``Weak`` (with ``k_hat``) or ``Strong``.

    A zero field is reported as ``Removable`` without ``k_hat``.
    """
    th = thresholds or ClassifierThresholds()
    if window is None:
        # one decade, kept a decade away from the inner boundary when possible
        r = fld.grid.r
        window = (10 * r[0], 100 * r[0]) if r[-1] / r[0] >= 100 else (r[0], r[-1])
    window = (float(window[0]), float(window[1]))
    rows = _window_rows(fld, window)
    if np.all(fld.u[rows] == 0):
        return Classification("Removable", 0.0, None, 1.0, window, {"zero_field": True})
    if np.any(fld.u[rows][:, :-1] < 0):
        raise Ambiguous("signed field: only diagnostics are reported",
                        {"min": float(fld.u[rows].min()), "max": float(fld.u[rows].max())})
    beta = exponents.beta_q(params)
    slope = fit_exponent(fld, window)
    kinfo = estimate_k(fld, window, th.band_decades)
    radii = np.geomspace(window[0], window[1], 3)
    try:
        hc = harnack_check(fld, radii)
    except DegenerateFit:
        hc = math.inf
    m = np.max(fld.u[rows], axis=1)
    bounded = bool(np.all(np.isfinite(m)))
    growth = kinfo["growth_per_decade"]
    change = kinfo["last_change"]
    candidates = []
    if abs(slope + beta) <= th.slope_band and np.isfinite(growth) and growth >= th.strong_growth:
        candidates.append("Strong")
    if abs(slope + 1.0) <= th.slope_band and np.isfinite(change) and change <= th.weak_change:
        candidates.append("Weak")
    if slope >= th.removable_slope and bounded:
        candidates.append("Removable")
    diag = {"candidates": candidates, "beta_q": beta, "k_trend": kinfo, "bounded": bounded}
    if len(candidates) != 1:
        raise Ambiguous(f"{len(candidates)} verdicts match (slope={slope:.4g})", diag | {"slope_fit": slope})
    verdict = candidates[0]
    k_hat = kinfo["k_hat"] if verdict == "Weak" else None
    if verdict == "Weak" and not k_hat > 0:
        raise Ambiguous("weak candidate with nonpositive strength", diag)
    return Classification(verdict, slope, k_hat, hc, window, diag)


def synthetic_field(kind: str, params: ProblemParams, grid: SectorGrid, k: float = 1.0,
                    profile=None) -> SolutionField:
    """Fields with known behaviour: ``weak`` ``k cos/r``, ``strong`` ``r^{-beta} omega``,
    ``removable`` ``r cos``, ``zero``."""
    R, PHI = np.meshgrid(grid.r, grid.phi, indexing="ij")
    c = np.cos(PHI)
    c[:, -1] = 0.0
    if kind == "weak":
        u = k * c / R
    elif kind == "strong":
        if profile is None:
            raise DomainError("strong synthetic field needs a profile")
        u = R ** (-profile.beta) * profile.evaluate(PHI)
        u[:, -1] = 0.0
    elif kind == "removable":
        u = R * c
    elif kind == "zero":
        u = np.zeros_like(R)
    else:
        raise DomainError(f"unknown synthetic kind {kind!r}")
    return SolutionField(u=u, grid=grid, params=params, bc=custom(u[0], u[-1]))


def rescale_field(fld: SolutionField, r0: float, params: ProblemParams) -> SolutionField:
    """``T_{r0} u(x) = r0^{beta_q} u(r0 x)`` on the grid with radii divided by ``r0``.

    Under this map the weak solution of strength ``k`` becomes the one of
    strength ``r0^s k`` with ``s = (2N-1-q)/(q+1-N)``.
    """
    if not r0 > 0:
        raise DomainError("r0 must be positive")
    beta = exponents.beta_q(params)
    grid = fld.grid.scaled(1.0 / r0)
    u = r0**beta * fld.u
    return SolutionField(u=u, grid=grid, params=params, bc=custom(u[0], u[-1]),
                         iters=fld.iters, final_update_norm=fld.final_update_norm,
                         residual_norm=fld.residual_norm)


class BoundaryClassifier(BaseEstimator):
    """Estimator wrapper: thresholds are hyperparameters, ``predict`` classifies fields.

    ``fit`` is a no-op kept for API compatibility; the classifier is
    calibrated by its thresholds, not by data.
    """

    def __init__(self, N=2, q=2.0, window=None, slope_band=0.15, removable_slope=-0.25,
                 weak_change=0.05, strong_growth=1.5, band_decades=0.5):
        self.N = N
        self.q = q
        self.window = window
        self.slope_band = slope_band
        self.removable_slope = removable_slope
        self.weak_change = weak_change
        self.strong_growth = strong_growth
        self.band_decades = band_decades

    def fit(self, X=None, y=None):
        self.params_ = ProblemParams(N=self.N, q=self.q)
        self.thresholds_ = ClassifierThresholds(self.slope_band, self.removable_slope, self.weak_change,
                                                self.strong_growth, self.band_decades)
        return self

    def predict(self, fields):
        if not hasattr(self, "params_"):
            self.fit()
        return [classify(f, self.params_, self.window, self.thresholds_).verdict for f in fields]

    def classify(self, fld):
        if not hasattr(self, "params_"):
            self.fit()
        return classify(fld, self.params_, self.window, self.thresholds_)
