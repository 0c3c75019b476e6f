"""Axisymmetric spherical profile equations solved by shooting.

Two problems on the upper hemisphere, written in the colatitude ``phi``:

* the absorption profile (p = N)::

      -(s^{-1}) (s Q^m w')' - Lam Q^m w + |w|^{q-1} w = 0,
      Q = beta_q^2 w^2 + w'^2,  s = sin^{N-2} phi,  m = (N-2)/2,
      Lam = (N-1) beta_q^2

* the p-harmonic spectral problem, same operator with exponent ``m = (p-2)/2``,
  no absorption and ``lam = beta (beta (p-1) + p - N)``; here ``beta`` is
  the unknown.

Both use ``w'(0) = 0`` and ``w(pi/2) = 0``. Restricting to functions of
``phi`` alone is justified by uniqueness of the positive solution together
with the rotational invariance of the equation and of the hemisphere.

Dividing the expanded equation by ``Q^(m-1)`` gives the explicit form

    w'' (beta^2 w^2 + (p-1) w'^2)
        = -[2 m beta^2 w w'^2 + (N-2) cot(phi) w' Q + lam Q w - a |w|^{q-1} w Q^{1-m}]

which is nondegenerate unless ``w = w' = 0``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator

from . import exponents
from ._validation import (
    ProblemParams,
    check_array_finite,
    require_p_equals_N,
    require_subcritical_range,
)
from .exceptions import DomainError, NoBracket, NonConvergence

logger = logging.getLogger(__name__)

HALF_PI = 0.5 * math.pi

# integrator status codes
_RAN_POSITIVE = 0
_CROSSED = 1
_BLOWUP = 2


@dataclass(frozen=True)
class SphericalGrid:
    M: int

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 11:
            raise DomainError(f"spherical grid needs M >= 11 nodes, got {self.M}")

    @property
    def h(self) -> float:
        return HALF_PI / (self.M - 1)

    @property
    def phi(self) -> np.ndarray:
        phi = np.linspace(0.0, HALF_PI, self.M)
        phi[-1] = HALF_PI
        return phi


@dataclass
class ShootSettings:
    tol_boundary: float = 1e-8
    tol_param: float = 1e-14
    max_iter: int = 200
    ode_steps_per_node: int = 2
    reg_eps: float = 1e-12
    n_scan: int = 61

    def __post_init__(self):
        for name in ("tol_boundary", "tol_param", "max_iter", "ode_steps_per_node", "reg_eps", "n_scan"):
            if not getattr(self, name) > 0:
                raise DomainError(f"ShootSettings.{name} must be positive")
        if self.reg_eps > 1e-8:
            raise DomainError("reg_eps must not exceed 1e-8")


@dataclass
class Profile:
    """A hemisphere profile sampled on a :class:`SphericalGrid`.

    ``lam`` is the zeroth-order coefficient of the equation the profile
    solves, ``p`` its gradient exponent, ``q`` the absorption exponent
    (``None`` for the spectral problem).
    """

    beta: float
    omega: np.ndarray
    omega_prime: np.ndarray
    residual_norm: float
    lambda0: float
    lam: float
    N: int
    p: float
    q: float | None = None
    kind: str = "absorption"
    boundary_value: float = 0.0
    iterations: int = 0
    floor_hits: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return len(self.omega)

    @property
    def grid(self) -> SphericalGrid:
        return SphericalGrid(self.M)

    @property
    def phi(self) -> np.ndarray:
        return self.grid.phi

    def evaluate(self, phi) -> np.ndarray:
        """Profile value at arbitrary colatitudes in ``[0, pi/2]``.

        Integrates the ODE from the nearest grid node, so the result is
        accurate to the integrator's order rather than an interpolant's.
        """
        phi = np.asarray(phi, dtype=float)
        flat = np.clip(phi.ravel(), 0.0, HALF_PI)
        a = 0.0 if self.q is None else 1.0
        q = 1.0 if self.q is None else float(self.q)
        out = _sample(flat, self.omega, self.omega_prime, self.grid.h, self.beta, self.lam,
                      float(self.N), float(self.p), q, a)
        return out.reshape(phi.shape)


@njit(cache=True)
def _accel(phi, w, wp, beta, lam, N, p, q, a, reg2):
    """Second derivative of the profile; also reports whether the Q floor was used."""
    b2w2 = beta * beta * w * w
    Q = b2w2 + wp * wp
    floored = False
    if Q < reg2:
        Q = reg2
        floored = True
    m = 0.5 * (p - 2.0)
    denom = b2w2 + (p - 1.0) * wp * wp
    if denom < reg2:
        denom = reg2
        floored = True
    absorption = 0.0
    if a != 0.0:
        absorption = a * math.copysign(abs(w) ** q, w) * Q ** (1.0 - m)
    if phi == 0.0:
        # pole limit: cot(phi) w' -> w''(0)
        return (absorption - lam * Q * w) / ((N - 1.0) * Q), floored
    cot_term = 0.0
    if N != 2.0:
        cot_term = (N - 2.0) * wp * Q * math.cos(phi) / math.sin(phi)
    num = -(2.0 * m * beta * beta * w * wp * wp + cot_term + lam * Q * w - absorption)
    return num / denom, floored


@njit(cache=True)
def _rk4_step(phi, w, wp, dphi, beta, lam, N, p, q, a, reg2):
    k1w = wp
    k1p, f1 = _accel(phi, w, wp, beta, lam, N, p, q, a, reg2)
    hh = 0.5 * dphi
    k2w = wp + hh * k1p
    k2p, f2 = _accel(phi + hh, w + hh * k1w, wp + hh * k1p, beta, lam, N, p, q, a, reg2)
    k3w = wp + hh * k2p
    k3p, f3 = _accel(phi + hh, w + hh * k2w, wp + hh * k2p, beta, lam, N, p, q, a, reg2)
    k4w = wp + dphi * k3p
    k4p, f4 = _accel(phi + dphi, w + dphi * k3w, wp + dphi * k3p, beta, lam, N, p, q, a, reg2)
    w_new = w + dphi / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
    wp_new = wp + dphi / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    nfloor = int(f1) + int(f2) + int(f3) + int(f4)
    return w_new, wp_new, nfloor


@njit(cache=True)
def _shoot(w0, beta, lam, N, p, q, a, reg2, M, substeps, stop_early, out_w, out_wp):
    """Integrate from the pole to the equator on ``M`` uniform nodes.

    Starts at ``h/2`` from the second-order Taylor seed. Returns
    ``(status, index, floor_hits)``: status 0 when the trajectory stays
    positive on ``[0, pi/2)``, 1 when it reaches zero at node ``index``,
    2 on blow-up.
    """
    h = (0.5 * math.pi) / (M - 1)
    c2, _ = _accel(0.0, w0, 0.0, beta, lam, N, p, q, a, reg2)
    out_w[0] = w0
    out_wp[0] = 0.0
    phi = 0.5 * h
    w = w0 + 0.5 * c2 * phi * phi
    wp = c2 * phi
    floors = 0
    # half interval up to the first node
    dphi = 0.5 * h / substeps
    for _ in range(substeps):
        w, wp, nf = _rk4_step(phi, w, wp, dphi, beta, lam, N, p, q, a, reg2)
        floors += nf
        phi += dphi
    status = 0
    index = M - 1
    dphi = h / substeps
    for i in range(1, M):
        if i > 1:
            phi0 = (i - 1) * h
            for s in range(substeps):
                w, wp, nf = _rk4_step(phi0 + s * dphi, w, wp, dphi, beta, lam, N, p, q, a, reg2)
                floors += nf
        out_w[i] = w
        out_wp[i] = wp
        if not (abs(w) < 1e100 and abs(wp) < 1e100):
            status = 2
            index = i
            for j in range(i, M):
                out_w[j] = np.inf
                out_wp[j] = np.inf
            break
        if w <= 0.0 and status == 0:
            status = 1
            index = i
            if stop_early:
                for j in range(i + 1, M):
                    out_w[j] = np.nan
                    out_wp[j] = np.nan
                break
    return status, index, floors


@njit(cache=True)
def _sample(phis, nodes_w, nodes_wp, h, beta, lam, N, p, q, a):
    out = np.empty(phis.shape[0])
    M = nodes_w.shape[0]
    for n in range(phis.shape[0]):
        x = phis[n]
        i = int(round(x / h))
        if i > M - 1:
            i = M - 1
        x0 = i * h
        if i == M - 1:
            x0 = 0.5 * math.pi
        w = nodes_w[i]
        wp = nodes_wp[i]
        d = x - x0
        if d == 0.0:
            out[n] = w
            continue
        nsub = 8
        dphi = d / nsub
        phi = x0
        for _ in range(nsub):
            w, wp, _nf = _rk4_step(phi, w, wp, dphi, beta, lam, N, p, q, a, 0.0)
            phi += dphi
        out[n] = w
    return out


def _run(w0, beta, lam, N, p, q, a, grid, settings, stop_early):
    out_w = np.empty(grid.M)
    out_wp = np.empty(grid.M)
    status, index, floors = _shoot(
        float(w0), float(beta), float(lam), float(N), float(p), float(q), float(a),
        settings.reg_eps**2, grid.M, int(settings.ode_steps_per_node), stop_early, out_w, out_wp,
    )
    return status, index, floors, out_w, out_wp


def _is_positive(status, w):
    # blow-up counts as "stays positive": the datum was too large
    if status == _BLOWUP:
        return True
    return status == _RAN_POSITIVE and w[-1] > 0.0


def startup_expansion(lambda0: float, beta: float, params: ProblemParams | None = None,
                      *, lam: float | None = None, N: int | None = None, p: float | None = None) -> float:
    """Second derivative at the pole for the datum ``w(0) = lambda0``.

    With ``params`` this is the absorption profile,
    ``(lambda0**q (beta lambda0)**(2-N) - Lam lambda0) / (N - 1)``. Without
    it, pass ``lam``/``N`` (and ``p``) for the spectral problem, which gives
    ``-lam lambda0 / (N - 1)``.
    """
    if not lambda0 > 0:
        raise DomainError("lambda0 must be positive")
    if params is not None:
        N, q = params.N, params.q
        Lam = (N - 1) * beta**2
        return (lambda0**q * (beta * lambda0) ** (2 - N) - Lam * lambda0) / (N - 1)
    if lam is None or N is None:
        raise DomainError("spectral mode needs lam and N")
    return -lam * lambda0 / (N - 1)


def _residual_core(omega, beta, lam, N, p, q, a, h):
    """Centered second-order residual in flux form, pole row from the limit."""
    M = len(omega)
    m = 0.5 * (p - 2.0)
    phi = np.linspace(0.0, HALF_PI, M)
    half = phi[:-1] + 0.5 * h
    s_half = np.sin(half) ** (N - 2)
    s_node = np.sin(phi) ** (N - 2)
    w = omega
    dw = np.diff(w) / h
    wmid = 0.5 * (w[:-1] + w[1:])
    Qh = beta**2 * wmid**2 + dw**2
    flux = s_half * Qh**m * dw

    res = np.zeros(M)
    wi = w[1:-1]
    dwc = (w[2:] - w[:-2]) / (2 * h)
    Qi = beta**2 * wi**2 + dwc**2
    div = (flux[1:] - flux[:-1]) / (h * s_node[1:-1])
    absorb = a * np.sign(wi) * np.abs(wi) ** q if a else 0.0
    res[1:-1] = -div - lam * Qi**m * wi + absorb

    w0 = w[0]
    Q0 = beta**2 * w0**2
    w2 = 2.0 * (w[1] - w[0]) / h**2
    absorb0 = a * np.sign(w0) * abs(w0) ** q if a else 0.0
    res[0] = -(N - 1) * Q0**m * w2 - lam * Q0**m * w0 + absorb0
    return res


def profile_residual(profile: Profile, params: ProblemParams | None = None,
                     grid: SphericalGrid | None = None) -> np.ndarray:
    """Discrete residual of a profile; zero at the equator (Dirichlet node).

    For the absorption problem the coefficient is ``(N - 1) beta**2`` with
    ``beta = profile.beta``, exponent ``p = N`` and absorption ``|w|^{q-1} w``.
    """
    omega = check_array_finite(profile.omega, "profile.omega")
    grid = grid or SphericalGrid(len(omega))
    if len(omega) != grid.M:
        raise DomainError("profile does not match grid")
    if params is not None:
        require_p_equals_N(params)
        N, p, q, a = params.N, float(params.N), params.q, params.A
        lam = (N - 1) * profile.beta**2
    elif profile.kind == "spectral":
        N, p, q, a = profile.N, profile.p, 1.0, 0.0
        lam = profile.lam
    else:
        N, p, q, a = profile.N, float(profile.N), profile.q, 1.0
        lam = (N - 1) * profile.beta**2
    return _residual_core(omega, profile.beta, lam, N, p, q, a, grid.h)


def _bisect(classify, lo, hi, settings):
    """Shrink ``[lo, hi]`` keeping ``classify(lo) is False`` and ``classify(hi) is True``."""
    it = 0
    while hi - lo > settings.tol_param * abs(hi):
        if it >= settings.max_iter:
            raise NonConvergence("bisection hit max_iter", {"lo": lo, "hi": hi, "iterations": it})
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if classify(mid):
            hi = mid
        else:
            lo = mid
        it += 1
    return lo, hi, it


def solve_profile(params: ProblemParams, grid: SphericalGrid | None = None,
                  settings: ShootSettings | None = None) -> Profile:
    """Positive hemisphere profile of the absorption problem, by shooting on ``w(0)``."""
    require_p_equals_N(params)
    require_subcritical_range(params)
    grid = grid or SphericalGrid(2001)
    settings = settings or ShootSettings()
    N, q, A = params.N, params.q, params.A
    beta = exponents.beta_q(params)
    lam = (N - 1) * beta**2
    # A rescales the constant: A c^{q+1-N} = Lam beta^{N-2}
    c = exponents.const_solution(params) / A ** (1.0 / (q + 1 - N))

    def positive(w0):
        status, _, _, w, _ = _run(w0, beta, lam, N, N, q, A, grid, settings, True)
        return _is_positive(status, w)

    scan = c * np.geomspace(1e-3, 1e3, settings.n_scan)
    flags = [positive(v) for v in scan]
    bracket = None
    for i in range(len(scan) - 1):
        if not flags[i] and flags[i + 1]:
            bracket = (scan[i], scan[i + 1])
            break
    if bracket is None:
        raise NoBracket(f"no sign change of the shooting map on [{scan[0]:.3g}, {scan[-1]:.3g}]")
    lo, hi, it = _bisect(positive, *bracket, settings)

    status, _, floors, w, wp = _run(hi, beta, lam, N, N, q, A, grid, settings, False)
    end = w[-1]
    if not abs(end) <= settings.tol_boundary * max(1.0, hi):
        raise NonConvergence(f"boundary value {end:.3e} exceeds tolerance", {"lambda0": hi, "iterations": it})
    if floors:
        logger.warning("gradient floor active %d times in profile solve", floors)
    w = w.copy()
    w[-1] = 0.0
    prof = Profile(beta=beta, omega=w, omega_prime=wp.copy(), residual_norm=np.nan, lambda0=hi,
                   lam=lam, N=N, p=float(N), q=q, kind="absorption", boundary_value=end,
                   iterations=it, floor_hits=floors)
    res = _residual_core(w, beta, lam, N, float(N), q, A, grid.h)
    prof.residual_norm = float(np.max(np.abs(res[:-1])))
    return prof


def solve_spectral(p: float, N: int, grid: SphericalGrid | None = None,
                   settings: ShootSettings | None = None, scale: float = 1.0,
                   beta_range=(1e-3, 1e2)) -> tuple[float, Profile]:
    """Exponent and positive profile of the p-harmonic spectral problem.

    Shoots on ``beta`` with ``phi(0) = scale`` (the equation is homogeneous of
    degree ``p - 1``, so ``scale`` does not affect ``beta``).
    """
    if not p > 1:
        raise DomainError(f"p must exceed 1, got {p}")
    if int(N) != N or N < 2:
        raise DomainError(f"N must be an integer >= 2, got {N}")
    if not scale > 0:
        raise DomainError("scale must be positive")
    grid = grid or SphericalGrid(2001)
    settings = settings or ShootSettings()

    def too_small(beta):
        lam = exponents.spectral_lambda(beta, p, N)
        status, _, _, w, _ = _run(scale, beta, lam, N, p, 1.0, 0.0, grid, settings, True)
        return _is_positive(status, w)

    scan = np.geomspace(beta_range[0], beta_range[1], 8 * settings.n_scan)
    flags = [too_small(b) for b in scan]
    bracket = None
    for i in range(len(scan) - 1):
        if flags[i] and not flags[i + 1]:
            bracket = (scan[i], scan[i + 1])
            break
    if bracket is None:
        raise NoBracket("no sign change of the spectral shooting map")
    # _bisect keeps classify(hi) True, so classify "crossed"
    lo, hi, it = _bisect(lambda b: not too_small(b), *bracket, settings)
    beta = lo
    lam = exponents.spectral_lambda(beta, p, N)
    status, _, floors, w, wp = _run(scale, beta, lam, N, p, 1.0, 0.0, grid, settings, False)
    end = w[-1]
    if not abs(end) <= settings.tol_boundary * scale:
        raise NonConvergence(f"boundary value {end:.3e} exceeds tolerance", {"beta": beta, "iterations": it})
    if floors:
        logger.warning("gradient floor active %d times in spectral solve", floors)
    w = w.copy()
    w[-1] = 0.0
    prof = Profile(beta=beta, omega=w, omega_prime=wp.copy(), residual_norm=np.nan, lambda0=scale,
                   lam=lam, N=int(N), p=float(p), q=None, kind="spectral", boundary_value=end,
                   iterations=it, floor_hits=floors)
    res = _residual_core(w, beta, lam, N, p, 1.0, 0.0, grid.h)
    prof.residual_norm = float(np.max(np.abs(res[:-1])))
    return beta, prof


class ProfileSolver(BaseEstimator):
    """Estimator wrapper around :func:`solve_profile`.

    ``fit()`` computes ``profile_``; ``transform(phi)`` evaluates it.
    """

    def __init__(self, N=2, q=2.0, A=1.0, M=2001, tol_boundary=1e-8, tol_param=1e-14,
                 max_iter=200, ode_steps_per_node=2):
        self.N = N
        self.q = q
        self.A = A
        self.M = M
        self.tol_boundary = tol_boundary
        self.tol_param = tol_param
        self.max_iter = max_iter
        self.ode_steps_per_node = ode_steps_per_node

    def fit(self, X=None, y=None):
        params = ProblemParams(N=self.N, q=self.q, A=self.A)
        settings = ShootSettings(tol_boundary=self.tol_boundary, tol_param=self.tol_param,
                                 max_iter=self.max_iter, ode_steps_per_node=self.ode_steps_per_node)
        self.profile_ = solve_profile(params, SphericalGrid(self.M), settings)
        self.lambda0_ = self.profile_.lambda0
        self.residual_norm_ = self.profile_.residual_norm
        return self

    def transform(self, X):
        return self.profile_.evaluate(X)


class SpectralSolver(BaseEstimator):
    """Estimator wrapper around :func:`solve_spectral`."""

    def __init__(self, p=2.0, N=2, M=2001, scale=1.0, tol_boundary=1e-8, tol_param=1e-14,
                 max_iter=200, ode_steps_per_node=2):
        self.p = p
        self.N = N
        self.M = M
        self.scale = scale
        self.tol_boundary = tol_boundary
        self.tol_param = tol_param
        self.max_iter = max_iter
        self.ode_steps_per_node = ode_steps_per_node

    def fit(self, X=None, y=None):
        settings = ShootSettings(tol_boundary=self.tol_boundary, tol_param=self.tol_param,
                                 max_iter=self.max_iter, ode_steps_per_node=self.ode_steps_per_node)
        self.beta_, self.profile_ = solve_spectral(self.p, self.N, SphericalGrid(self.M), settings,
                                                   scale=self.scale)
        self.lam_ = self.profile_.lam
        return self

    def transform(self, X):
        return self.profile_.evaluate(X)
