"""Absorbed N-Laplacian on a truncated half-space sector.

The axisymmetric problem

    -div(|Du|^{N-2} Du) + A |u|^{q-1} u - B = 0,   u = 0 on dH \\ {0}

is written in ``t = ln r`` and the colatitude ``phi``. With
``G = (u_t^2 + u_phi^2)^{(N-2)/2}`` the operator becomes

    e^{-N t} [ -(G u_t)_t - sin^{2-N}(phi) (sin^{N-2}(phi) G u_phi)_phi ]
        + A |u|^{q-1} u - B.

Discretization: conservative flux differences with the diffusivity ``G`` at
half nodes, ghost reflection at the axis ``phi = 0`` and a finite-volume row
at the axis. The second-difference denominators are exponentially fitted
(``2 cosh(dt) - 2`` and ``2 - 2 cos(dphi)`` instead of ``dt^2`` and
``dphi^2``). Both are second-order consistent, and for ``N = 2`` they make
the weak-singularity supersolution ``k cos(phi) / r`` discretely harmonic, so
the discrete comparison principle bounds the computed solution by it to
rounding accuracy.

Nonlinear solves use damped Newton with a complex-step sparse Jacobian
(nine-colour stencil colouring), a lagged-diffusivity fallback and, for
``N > 2``, continuation in the gradient regularization.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate, sparse
from scipy.sparse.linalg import spsolve
from sklearn.base import BaseEstimator

from . import exponents
from ._validation import (
    ProblemParams,
    check_array_finite,
    is_infinite,
    require_p_equals_N,
)
from .exceptions import DomainError, IllPosed, NonConvergence

logger = logging.getLogger(__name__)

_CS_STEP = 1e-30


@dataclass(frozen=True)
class SectorGrid:
    eps: float
    R_out: float
    n_t: int
    n_phi: int

    def __post_init__(self):
        if not (0 < self.eps < self.R_out) or not math.isfinite(self.R_out):
            raise DomainError(f"need 0 < eps < R_out, got eps={self.eps}, R_out={self.R_out}")
        if self.n_t < 17 or self.n_phi < 17:
            raise DomainError("SectorGrid needs n_t, n_phi >= 17")
        object.__setattr__(self, "n_t", int(self.n_t))
        object.__setattr__(self, "n_phi", int(self.n_phi))

    @classmethod
    def with_spacing(cls, eps, R_out, dt, n_phi):
        """Grid whose t-spacing is at most ``dt``."""
        n_t = max(17, int(math.ceil(math.log(R_out / eps) / dt)) + 1)
        return cls(eps, R_out, n_t, n_phi)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(math.log(self.eps), math.log(self.R_out), self.n_t)

    @property
    def r(self) -> np.ndarray:
        return np.exp(self.t)

    @property
    def phi(self) -> np.ndarray:
        phi = np.linspace(0.0, 0.5 * math.pi, self.n_phi)
        phi[-1] = 0.5 * math.pi
        return phi

    @property
    def dt(self) -> float:
        return (math.log(self.R_out) - math.log(self.eps)) / (self.n_t - 1)

    @property
    def dphi(self) -> float:
        return 0.5 * math.pi / (self.n_phi - 1)

    def refined(self) -> "SectorGrid":
        return SectorGrid(self.eps, self.R_out, 2 * self.n_t - 1, 2 * self.n_phi - 1)

    def scaled(self, lam: float) -> "SectorGrid":
        """Same nodes in ``t`` shifted by ``ln lam`` (radii multiplied by ``lam``)."""
        return SectorGrid(self.eps * lam, self.R_out * lam, self.n_t, self.n_phi)


@dataclass(frozen=True)
class BoundarySpec:
    """Dirichlet data on the inner arc ``r = eps`` and the outer arc ``r = R_out``.

    Use :func:`weak_k` or :func:`custom`.
    """

    kind: str
    k: float = 0.0
    inner: np.ndarray | None = None
    outer: np.ndarray | None = None

    def values(self, grid: SectorGrid):
        phi = grid.phi
        if self.kind == "weak_k":
            inner = self.k * np.cos(phi) / grid.eps
            inner[-1] = 0.0
            return inner, np.zeros_like(phi)
        inner = np.asarray(self.inner, dtype=float)
        outer = np.zeros_like(phi) if self.outer is None else np.asarray(self.outer, dtype=float)
        if inner.shape != phi.shape or outer.shape != phi.shape:
            raise DomainError("custom boundary data must have n_phi values")
        return inner, outer


def weak_k(k: float) -> BoundarySpec:
    """Inner datum ``k cos(phi) / eps``, the trace of ``k x_N / |x|^2``."""
    if is_infinite(k):
        raise DomainError("k = INFINITE is realized only through strong_family")
    if not (k >= 0 and math.isfinite(k)):
        raise DomainError(f"k must be finite and nonnegative, got {k}")
    return BoundarySpec("weak_k", k=float(k))


def custom(inner, outer=None) -> BoundarySpec:
    inner = check_array_finite(inner, "inner boundary data")
    if outer is not None:
        outer = check_array_finite(outer, "outer boundary data")
    return BoundarySpec("custom", inner=inner, outer=outer)


@dataclass
class SolveSettings:
    tol_update: float = 1e-11
    max_newton: int = 100
    damping: float = 1.0
    reg_eps: float = 1e-8
    continuation_steps: int = 4

    def __post_init__(self):
        for name in ("tol_update", "max_newton", "damping", "reg_eps", "continuation_steps"):
            if not getattr(self, name) > 0:
                raise DomainError(f"SolveSettings.{name} must be positive")
        if self.damping > 1:
            raise DomainError("damping must lie in (0, 1]")


@dataclass
class SolutionField:
    u: np.ndarray
    grid: SectorGrid
    params: ProblemParams
    bc: BoundarySpec
    iters: int = 0
    final_update_norm: float = 0.0
    residual_norm: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def bc_kind(self) -> str:
        return self.bc.kind

    @property
    def k(self) -> float:
        return self.bc.k

    def mesh(self):
        """``(r, phi)`` arrays of shape ``(n_t, n_phi)``."""
        return np.meshgrid(self.grid.r, self.grid.phi, indexing="ij")

    def column_at(self, r: float) -> np.ndarray:
        """Values at radius ``r`` on every ``phi`` node (cubic in ``t``)."""
        t = math.log(r)
        tg = self.grid.t
        if not (tg[0] - 1e-12 <= t <= tg[-1] + 1e-12):
            raise DomainError(f"radius {r} outside the grid")
        spline = interpolate.make_interp_spline(tg, self.u, k=3, axis=0)
        return spline(np.clip(t, tg[0], tg[-1]))

    def max_at(self, r: float) -> float:
        return float(np.max(self.column_at(r)))

    def evaluate(self, r, phi) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        r, phi = np.broadcast_arrays(r, phi)
        spline = interpolate.RectBivariateSpline(self.grid.t, self.grid.phi, self.u, kx=3, ky=3, s=0)
        return spline(np.log(r).ravel(), phi.ravel(), grid=False).reshape(r.shape)


def _signed_power(u, q):
    """``|u|^{q-1} u``, written so it also works for complex-step arguments."""
    if np.iscomplexobj(u):
        pos = u.real >= 0
        out = np.empty_like(u)
        out[pos] = u[pos] ** q
        out[~pos] = -((-u[~pos]) ** q)
        return out
    return np.sign(u) * np.abs(u) ** q


class _Discretization:
    """Stencil constants for a grid and a dimension."""

    def __init__(self, grid: SectorGrid, N: int):
        self.grid = grid
        self.N = N
        self.m = 0.5 * (N - 2)
        self.dt = grid.dt
        self.dphi = grid.dphi
        self.dt_fit = 2.0 * math.cosh(self.dt) - 2.0
        self.dphi_fit = 2.0 - 2.0 * math.cos(self.dphi)
        phi = grid.phi
        half = phi[:-1] + 0.5 * self.dphi
        self.s_half = np.sin(half) ** (N - 2)
        self.s_node = np.sin(phi[:-1]) ** (N - 2)
        v0 = integrate.quad(lambda x: math.sin(x) ** (N - 2), 0.0, 0.5 * self.dphi)[0]
        self.pole_coef = (self.dphi**2 / self.dphi_fit) / (self.dphi * v0)
        t = grid.t[1:-1]
        self.weight = np.exp(N * t)[:, None]

    def diffusivities(self, U, reg2):
        """Half-node diffusivities ``G`` in ``t`` and ``phi`` directions."""
        if self.m == 0:
            return 1.0, 1.0
        E = np.concatenate([U[:, 1:2], U], axis=1)
        uphi_c = (E[:, 2:] - E[:, :-2]) / (2 * self.dphi)
        ut_h = (U[1:, :-1] - U[:-1, :-1]) / self.dt
        uphi_avg = 0.5 * (uphi_c[1:] + uphi_c[:-1])
        Gt = (ut_h**2 + uphi_avg**2 + reg2) ** self.m
        uphi_h = (U[1:-1, 1:] - U[1:-1, :-1]) / self.dphi
        ut_c = (U[2:, :] - U[:-2, :]) / (2 * self.dt)
        ut_avg = 0.5 * (ut_c[:, 1:] + ut_c[:, :-1])
        Gp = (uphi_h**2 + ut_avg**2 + reg2) ** self.m
        return Gt, Gp

    def neg_div(self, U, reg2, frozen=None):
        """``-(G u_t)_t - s^{-1}(s G u_phi)_phi`` on unknown nodes (no ``e^{-Nt}``)."""
        Gt, Gp = frozen if frozen is not None else self.diffusivities(U, reg2)
        Ft = Gt * (U[1:, :-1] - U[:-1, :-1])
        t_term = (Ft[1:] - Ft[:-1]) / self.dt_fit
        Fp = self.s_half * Gp * (U[1:-1, 1:] - U[1:-1, :-1])
        ang = np.empty_like(t_term)
        ang[:, 0] = self.pole_coef * Fp[:, 0]
        ang[:, 1:] = (Fp[:, 1:] - Fp[:, :-1]) / (self.s_node[1:] * self.dphi_fit)
        return -(t_term + ang)


class _Problem:
    """Scaled residual ``e^{Nt} * residual`` as a function of the unknown vector."""

    def __init__(self, params: ProblemParams, grid: SectorGrid, bc: BoundarySpec):
        self.params = params
        self.grid = grid
        self.disc = _Discretization(grid, params.N)
        inner, outer = bc.values(grid)
        self.inner = inner
        self.outer = outer
        self.shape = (grid.n_t - 2, grid.n_phi - 1)
        self.n = self.shape[0] * self.shape[1]
        ii, jj = np.indices(self.shape)
        self.ii = ii.ravel()
        self.jj = jj.ravel()
        self.color = (self.ii % 3) * 3 + (self.jj % 3)

    def full(self, x):
        U = np.zeros((self.grid.n_t, self.grid.n_phi), dtype=x.dtype)
        U[0] = self.inner
        U[-1] = self.outer
        U[1:-1, :-1] = x.reshape(self.shape)
        return U

    def F(self, x, reg2, frozen=None):
        U = self.full(x)
        p = self.params
        r = self.disc.neg_div(U, reg2, frozen)
        u = U[1:-1, :-1]
        r = r + self.disc.weight * (p.A * _signed_power(u, p.q) - p.B)
        return r.ravel()

    def jacobian(self, x, reg2, frozen=None):
        rows, cols, vals = [], [], []
        ni, nj = self.shape
        for c in range(9):
            mask = self.color == c
            if not mask.any():
                continue
            xc = x.astype(complex)
            xc[mask] += 1j * _CS_STEP
            dF = (self.F(xc, reg2, frozen).imag / _CS_STEP).reshape(self.shape)
            ci, cj = self.ii[mask], self.jj[mask]
            col = ci * nj + cj
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    ri, rj = ci + di, cj + dj
                    ok = (ri >= 0) & (ri < ni) & (rj >= 0) & (rj < nj)
                    rows.append(ri[ok] * nj + rj[ok])
                    cols.append(col[ok])
                    vals.append(dF[ri[ok], rj[ok]])
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        keep = vals != 0
        return sparse.csc_matrix((vals[keep], (rows[keep], cols[keep])), shape=(self.n, self.n))


def assemble_residual(field: SolutionField | np.ndarray, params: ProblemParams,
                      grid: SectorGrid, reg_eps: float = 0.0) -> np.ndarray:
    """Discrete residual on the unknown nodes, shape ``(n_t - 2, n_phi - 1)``.

    Rows are interior radii; columns run from the axis to the last node
    before the boundary ``phi = pi/2``.
    """
    require_p_equals_N(params)
    U = field.u if isinstance(field, SolutionField) else field
    U = check_array_finite(U, "field")
    if U.shape != (grid.n_t, grid.n_phi):
        raise DomainError("field does not conform to grid")
    disc = _Discretization(grid, params.N)
    r = disc.neg_div(U, reg_eps**2)
    u = U[1:-1, :-1]
    return r / disc.weight + params.A * _signed_power(u, params.q) - params.B


def _newton(prob: _Problem, x, reg2, settings, history, max_iter):
    """Damped Newton at fixed regularization. Returns ``(x, iters, update)``."""
    f = prob.F(x, reg2)
    fnorm = np.linalg.norm(f)
    update = np.inf
    for it in range(1, max_iter + 1):
        if fnorm == 0.0:
            return x, it - 1, 0.0
        J = prob.jacobian(x, reg2)
        dx = spsolve(J, -f)
        lam = settings.damping
        mode = "newton"
        while True:
            xn = x + lam * dx
            fn = prob.F(xn, reg2)
            fnn = np.linalg.norm(fn)
            if np.isfinite(fnn) and fnn <= (1 - 1e-4 * lam) * fnorm:
                break
            lam *= 0.5
            if lam < 1e-3:
                # lagged diffusivity step
                mode = "picard"
                frozen = prob.disc.diffusivities(prob.full(x), reg2)
                Jp = prob.jacobian(x, reg2, frozen)
                dx = spsolve(Jp, -f)
                lam = 1.0
                xn = x + dx
                fn = prob.F(xn, reg2)
                fnn = np.linalg.norm(fn)
                break
        step = xn - x
        scale = max(np.max(np.abs(xn)), 1e-300)
        update = np.max(np.abs(step)) / scale
        history.append({"iter": it, "damping": lam, "mode": mode, "residual": float(fnn),
                        "update": float(update)})
        x, f, fnorm = xn, fn, fnn
        if update <= settings.tol_update:
            return x, it, update
    raise NonConvergence("Newton iteration hit max_newton",
                         {"history": history, "last_damping": history[-1]["damping"] if history else None})


def solve_field(params: ProblemParams, grid: SectorGrid, bc: BoundarySpec | None = None,
                settings: SolveSettings | None = None, initial: np.ndarray | None = None) -> SolutionField:
    """Solve the sector problem with Dirichlet data ``bc`` (default ``weak_k(params.k)``)."""
    require_p_equals_N(params)
    if not params.q > params.N - 1:
        raise IllPosed(f"need q > N - 1, got q={params.q}, N={params.N}")
    if bc is None:
        bc = weak_k(params.finite_k())
    settings = settings or SolveSettings()
    prob = _Problem(params, grid, bc)
    if initial is None:
        if bc.kind == "weak_k":
            R, PHI = np.meshgrid(grid.r, grid.phi, indexing="ij")
            U0 = bc.k * np.cos(PHI) / R
            U0[:, -1] = 0.0
        else:
            U0 = np.zeros((grid.n_t, grid.n_phi))
        x = U0[1:-1, :-1].ravel().copy()
    else:
        x = np.asarray(initial, dtype=float)[1:-1, :-1].ravel().copy()

    history: list = []
    if params.N == 2:
        regs = [0.0]
    else:
        scale = max(np.max(np.abs(x)), np.max(np.abs(prob.inner)), 1.0)
        regs = list(np.geomspace(1e-2 * scale, settings.reg_eps, settings.continuation_steps))
    total = 0
    update = 0.0
    for reg in regs:
        x, it, update = _newton(prob, x, reg * reg, settings, history, settings.max_newton)
        total += it
    U = prob.full(x)
    res = assemble_residual(U, params, grid, reg_eps=regs[-1])
    return SolutionField(u=U, grid=grid, params=params, bc=bc, iters=total,
                         final_update_norm=float(update), residual_norm=float(np.max(np.abs(res))),
                         diagnostics={"history": history})


def supersolution_bound_violation(field: SolutionField) -> float:
    """``max(u - k cos(phi)/r)`` over all nodes (nonpositive up to rounding)."""
    R, PHI = field.mesh()
    return float(np.max(field.u - field.k * np.cos(PHI) / R))


@dataclass
class StrongFamilyReport:
    k_list: list
    probes: list
    s: np.ndarray  # shape (len(k_list), len(probes))
    omega0: float | None
    increasing: bool
    saturated: bool | None
    last_increment: float | None
    fields: list

    def as_dict(self) -> dict:
        return {"k_list": list(self.k_list), "probes": list(self.probes), "s": self.s.tolist(),
                "omega0": self.omega0, "increasing": self.increasing, "saturated": self.saturated,
                "last_increment": self.last_increment}


def strong_family(params: ProblemParams, grid: SectorGrid, k_list, settings: SolveSettings | None = None,
                  probes=(3e-3,), omega0: float | None = None) -> StrongFamilyReport:
    """Weak solutions for increasing ``k`` and the scaled maxima ``s_k(r) = r^{beta_q} max u_k(r, .)``.

    The strong solution is approached only as the limit of this family.
    """
    require_p_equals_N(params)
    if not (params.N - 1 < params.q < 2 * params.N - 1):
        raise DomainError("strong_family needs N-1 < q < 2N-1")
    k_list = [float(k) for k in k_list]
    if any(b <= a for a, b in zip(k_list, k_list[1:])):
        raise DomainError("k_list must be increasing")
    beta = exponents.beta_q(params)
    fields, s = [], []
    init = None
    for k in k_list:
        f = solve_field(params.with_(k=k), grid, weak_k(k), settings, initial=init)
        fields.append(f)
        s.append([r**beta * f.max_at(r) for r in probes])
    s = np.array(s)
    increasing = bool(np.all(np.diff(s, axis=0) > 0)) if len(k_list) > 1 else True
    saturated = last = None
    if len(k_list) > 1:
        last = float(np.max((s[-1] - s[-2]) / s[-1]))
        saturated = last <= 0.10
    return StrongFamilyReport(k_list, list(probes), s, omega0, increasing, saturated, last, fields)


@dataclass
class TrendReport:
    params: dict
    probes: dict
    values: list
    verdict: str
    fit_slopes: dict

    def as_dict(self) -> dict:
        return {"params": self.params, "probes": self.probes, "values": self.values,
                "verdict": self.verdict, "fit_slopes": self.fit_slopes}


def removability_experiment(params: ProblemParams, eps_list, probe_r: float = 0.1,
                            settings: SolveSettings | None = None, R_out: float = 1.0,
                            dt: float = 0.01, n_phi: int = 65, k: float | None = None) -> TrendReport:
    """Probe maxima ``m(eps) = max_phi u(probe_r, phi)`` over a shrinking inner radius.

    Verdicts: ``decreasing`` / ``not_decreasing`` for ``q > q_c``,
    ``stable`` / ``not_stable`` for ``q < q_c``, ``not_asserted`` at
    ``q = q_c`` or with a single radius.
    """
    require_p_equals_N(params)
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise DomainError("eps_list must be decreasing")
    if probe_r < 10 * max(eps_list):
        raise DomainError("probe_r must be at least 10 * max(eps_list)")
    k = params.finite_k() if k is None else float(k)
    values = []
    for eps in eps_list:
        grid = SectorGrid.with_spacing(eps, R_out, dt, n_phi)
        f = solve_field(params.with_(k=k), grid, weak_k(k), settings)
        values.append(f.max_at(probe_r))
    qc = params.q_c
    verdict = "not_asserted"
    ratios = [a / b for a, b in zip(values, values[1:])]
    if len(values) >= 2:
        if params.q > qc and len(values) >= 3:
            verdict = "decreasing" if all(x >= 1.2 for x in ratios[-2:]) else "not_decreasing"
        elif params.q < qc:
            change = abs(values[-1] - values[-2]) / abs(values[-1])
            verdict = "stable" if change <= 0.02 else "not_stable"
    slopes = {}
    if len(values) >= 2:
        le, lv = np.log(eps_list), np.log(np.maximum(values, 1e-300))
        slopes["all"] = float(np.polyfit(le, lv, 1)[0])
        slopes["last_pair"] = float((lv[-1] - lv[-2]) / (le[-1] - le[-2]))
    return TrendReport(
        params={"N": params.N, "q": params.q, "A": params.A, "k": k, "R_out": R_out, "dt": dt, "n_phi": n_phi},
        probes={"r": probe_r, "eps": eps_list},
        values=[float(v) for v in values],
        verdict=verdict,
        fit_slopes=slopes | {"ratios": [float(x) for x in ratios]},
    )


def bound_diagnostics(field: SolutionField, params: ProblemParams | None = None) -> dict:
    """Fitted constants of the universal a priori bounds.

    ``lambda_hat = max A |x|^N u^{q+1-N}`` and
    ``C_hat = max u (A |x|^{q+1})^{1/(q+1-N)} / rho`` with ``rho = r cos(phi)``;
    nodes on the boundary ``rho = 0`` are skipped.
    """
    params = params or field.params
    N, q, A = params.N, params.q, params.A
    R, PHI = field.mesh()
    u = np.maximum(field.u, 0.0)
    lam = A * R**N * u ** (q + 1 - N)
    rho = R * np.cos(PHI)
    mask = rho > 1e-14 * R
    C = np.zeros_like(u)
    C[mask] = u[mask] * (A * R[mask] ** (q + 1)) ** (1.0 / (q + 1 - N)) / rho[mask]
    il = np.unravel_index(np.argmax(lam), lam.shape)
    ic = np.unravel_index(np.argmax(C), C.shape)
    out = {
        "lambda_hat": float(lam[il]),
        "lambda_node": {"r": float(R[il]), "phi": float(PHI[il])},
        "C_hat": float(C[ic]),
        "C_node": {"r": float(R[ic]), "phi": float(PHI[ic])},
    }
    if not (math.isfinite(out["lambda_hat"]) and math.isfinite(out["C_hat"])):
        raise NonConvergence("bound constants are not finite", out)
    return out


class HalfspaceSolver(BaseEstimator):
    """Estimator wrapper around :func:`solve_field` for the weak-singularity problem.

    ``fit()`` computes ``field_``; ``predict(X)`` evaluates it at rows ``(r, phi)``.
    """

    def __init__(self, N=2, q=2.0, A=1.0, k=1.0, eps=1e-3, R_out=1.0, n_t=257, n_phi=129,
                 tol_update=1e-11, max_newton=100):
        self.N = N
        self.q = q
        self.A = A
        self.k = k
        self.eps = eps
        self.R_out = R_out
        self.n_t = n_t
        self.n_phi = n_phi
        self.tol_update = tol_update
        self.max_newton = max_newton

    def fit(self, X=None, y=None):
        params = ProblemParams(N=self.N, q=self.q, A=self.A, k=self.k)
        grid = SectorGrid(self.eps, self.R_out, self.n_t, self.n_phi)
        settings = SolveSettings(tol_update=self.tol_update, max_newton=self.max_newton)
        self.field_ = solve_field(params, grid, weak_k(self.k), settings)
        self.n_iter_ = self.field_.iters
        return self

    def predict(self, X):
        X = check_array_finite(X, "X")
        if X.ndim != 2 or X.shape[1] != 2:
            raise DomainError("X must have two columns (r, phi)")
        return self.field_.evaluate(X[:, 0], X[:, 1])
