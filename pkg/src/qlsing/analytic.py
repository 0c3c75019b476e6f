"""Closed-form comparison functions for the half-space problem (p = N).

* ``k cos(phi) / r`` (the function ``k x_N / |x|^2``) is N-harmonic in the
  half-space and a supersolution of the absorbed equation.
* ``w = k (1 - r^alpha) r^{-1} cos(phi)`` is a local subsolution for small
  ``r`` when ``0 < alpha < min(2N-1-q, 1/(N-2))``.
* ``P_k(x) = -k (|x|^2 + x_N) / (2 |x|^2)`` is N-harmonic and positive in
  ``B* = {|x|^2 + x_N < 0}``.

Derivatives are written out by hand; there is no symbolic engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import ProblemParams, require_p_equals_N, require_subcritical_range
from .exceptions import DomainError

HALF_PI = 0.5 * math.pi


def _cos(phi):
    # exact zero on the boundary so products with cos vanish identically there
    c = np.cos(phi)
    return np.where(np.asarray(phi) == HALF_PI, 0.0, c)


def supersolution_weak(r, phi, k: float = 1.0):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("supersolution_weak needs r > 0")
    out = k * _cos(phi) / r
    return float(out) if out.ndim == 0 else out


def alpha_bound(params: ProblemParams) -> float:
    """``min(2N-1-q, 1/(N-2))`` with ``1/(N-2) = inf`` for ``N = 2``."""
    require_subcritical_range(params)
    N, q = params.N, params.q
    second = math.inf if N == 2 else 1.0 / (N - 2)
    return min(2 * N - 1 - q, second)


@dataclass(frozen=True)
class SubsolutionSpec:
    k: float
    alpha: float
    R: float = 1.0

    def __post_init__(self):
        if not self.k > 0:
            raise DomainError("subsolution needs k > 0")
        if not self.alpha > 0:
            raise DomainError("subsolution needs alpha > 0")
        if not 0 < self.R <= 1:
            raise DomainError("subsolution needs 0 < R <= 1")

    def check_admissible(self, params: ProblemParams) -> None:
        if not self.alpha < alpha_bound(params):
            raise DomainError(f"alpha={self.alpha} is not below alpha_bound={alpha_bound(params)}")

    @property
    def ell_R(self) -> float:
        """Boundary value scale ``k (1 - R^alpha) / R``."""
        return self.k * (1 - self.R**self.alpha) / self.R


@dataclass
class DerivativeStack:
    w: np.ndarray
    w_r: np.ndarray
    w_phi: np.ndarray
    w_rr: np.ndarray
    w_phiphi: np.ndarray
    w_rphi: np.ndarray
    P: np.ndarray
    P_r: np.ndarray
    P_phi: np.ndarray


def _check_domain(r, phi):
    r = np.asarray(r, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any(r <= 0) or np.any(r > 1):
        raise DomainError("subsolution is defined for 0 < r <= 1")
    if np.any(phi < 0) or np.any(phi > HALF_PI):
        raise DomainError("phi must lie in [0, pi/2]")
    return r, phi


def subsolution_w(spec: SubsolutionSpec, r, phi) -> DerivativeStack:
    r, phi = _check_domain(r, phi)
    k, a = spec.k, spec.alpha
    c, s = _cos(phi), np.sin(phi)
    ra = r**a
    w = k * (1 - ra) / r * c
    w_r = -k * r**-2 * (1 + (a - 1) * ra) * c
    w_rr = k * c * (2 * r**-3 - (a - 1) * (a - 2) * r ** (a - 3))
    w_phi = -k * (1 - ra) / r * s
    w_phiphi = -w
    w_rphi = k * r**-2 * (1 + (a - 1) * ra) * s
    P = w_r**2 + w_phi**2 / r**2
    P_r = 2 * w_r * w_rr + 2 * w_phi * w_rphi / r**2 - 2 * w_phi**2 / r**3
    P_phi = 2 * w_r * w_rphi + 2 * w_phi * w_phiphi / r**2
    return DerivativeStack(w, w_r, w_phi, w_rr, w_phiphi, w_rphi, P, P_r, P_phi)


def Lw_eval(spec: SubsolutionSpec, r, phi, params: ProblemParams, mode: str = "exact"):
    """``-div(|Dw|^{N-2} Dw) + A w^q`` for the subsolution ansatz.

    ``mode="exact"`` uses the closed-form derivative stack. ``mode="expansion"``
    returns the two leading terms as ``r -> 0``:
    ``A k^q r^{-q} cos^q`` and the N-Laplacian part
    ``k^{N-1} alpha (6 - 4N + alpha + (2+alpha)(N-2) cos^2) r^{alpha-2N+1} cos``.
    """
    require_p_equals_N(params)
    N, q, A = params.N, params.q, params.A
    r, phi = _check_domain(r, phi)
    k, a = spec.k, spec.alpha
    c = _cos(phi)
    if mode == "expansion":
        bracket = 6 - 4 * N + a + (2 + a) * (N - 2) * c**2
        out = k ** (N - 1) * a * bracket * r ** (a - 2 * N + 1) * c + A * k**q * r**-q * c**q
    elif mode == "exact":
        st = subsolution_w(spec, r, phi)
        m = 0.5 * (N - 2)
        # cot(phi) w_phi in closed form, regular at the axis
        cot_wphi = -k * (1 - r**a) / r * c
        lap = st.w_rr + (N - 1) / r * st.w_r + (st.w_phiphi + (N - 2) * cot_wphi) / r**2
        grad_dot = st.w_r * st.P_r + st.w_phi * st.P_phi / r**2
        if m == 0:
            div = lap
        else:
            # Dw = 0 only at r = 1, phi = pi/2, where the flux vanishes
            P = np.asarray(st.P)
            safe = np.where(P > 0, P, 1.0)
            div = np.where(P > 0, safe**m * lap + m * safe ** (m - 1) * grad_dot, 0.0)
        out = -div + A * np.maximum(st.w, 0.0) ** q
    else:
        raise DomainError(f"unknown Lw mode {mode!r}")
    return float(out) if np.ndim(out) == 0 else out


def find_R(spec: SubsolutionSpec, params: ProblemParams, n_r: int = 64, n_phi: int = 64,
           max_halvings: int = 60) -> dict:
    """Largest dyadic ``R <= 1`` with ``Lw <= 0`` on an ``n_r x n_phi`` sample.

    The sample covers ``r`` in ``[R/100, R]`` (geometric) and ``phi`` in
    ``[0, pi/2]``.
    """
    spec.check_admissible(params)
    phi = np.linspace(0.0, HALF_PI, n_phi)
    phi[-1] = HALF_PI
    for j in range(max_halvings + 1):
        R = 2.0**-j
        r = np.geomspace(R / 100, R, n_r)
        RR, PP = np.meshgrid(r, phi, indexing="ij")
        L = Lw_eval(spec, RR, PP, params)
        if np.all(L <= 0):
            return {"R": R, "halvings": j, "Lw_min": float(L.min()), "Lw_max": float(L.max()),
                    "n_samples": int(L.size)}
    raise DomainError("no dyadic R found with Lw <= 0")


def ball_kernel_Pk(x, k: float = 1.0, tol: float = 1e-12):
    """``-k (|x|^2 + x_N) / (2 |x|^2)`` on the closure of ``B*``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n2 = np.sum(x * x, axis=-1)
    if np.any(n2 == 0):
        raise DomainError("ball_kernel_Pk is singular at the origin")
    g = n2 + x[:, -1]
    if np.any(g > tol * np.maximum(1.0, n2)):
        raise DomainError("point outside the closure of B*")
    out = -k * g / (2 * n2)
    return float(out[0]) if out.size == 1 and np.ndim(out) == 1 and len(x) == 1 else out
