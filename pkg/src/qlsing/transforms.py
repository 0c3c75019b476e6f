"""Inversions, boundary reflection and the reflected quasilinear operator.

Inversion ``I(x) = c + power (x - c) / |x - c|^2`` is conformal; in
dimension ``N`` it preserves N-harmonic functions and, with ``c = (0,...,-1)``,
maps the half-space ``{x_N > 0}`` onto ``B* = {|x|^2 + x_N < 0}``. A solution
of the absorbed equation becomes a solution of the same equation with the
weight ``|x - c|^{-2N}`` on the absorption term.

Reflection through a graph boundary ``x_N = h(x')`` (domain above the graph)
uses the nearest-point projection ``xi(x)``: ``psi(x) = 2 xi(x) - x``. The
odd extension ``v~ = -v o psi`` solves a divergence-form equation with

    A(x, eta) = |det Dpsi| |Dpsi eta|^{p-2} Dpsi^T Dpsi eta.

Jacobians ``Dpsi`` come from complex-step differentiation through the
projection Newton iteration.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _fd
from .exceptions import DomainError, EllipticityFailure, ProjectionFailure

_CS = 1e-30


@dataclass(frozen=True)
class InversionSpec:
    center: tuple
    power: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.power > 0:
            raise DomainError("inversion power must be positive")
        if len(self.center) < 2:
            raise DomainError("inversion needs dimension >= 2")

    @classmethod
    def half_space_to_ball(cls, N: int) -> "InversionSpec":
        """Unit-power inversion centred at ``(0,...,0,-1)``."""
        return cls(tuple([0.0] * (N - 1) + [-1.0]), 1.0)

    @property
    def N(self) -> int:
        return len(self.center)


def invert(spec: InversionSpec, x):
    x = np.asarray(x)
    c = np.asarray(spec.center)
    if x.shape[-1] != spec.N:
        raise DomainError("point dimension does not match the inversion")
    d = x - c
    n2 = np.sum(d * d, axis=-1, keepdims=True)
    if np.any(n2.real == 0):
        raise DomainError("inversion is singular at its center")
    return c + spec.power * d / n2


def _box_points(box, n_per_axis=4):
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    if lo.shape != hi.shape or np.any(hi <= lo):
        raise DomainError("box must be (lo, hi) with lo < hi")
    axes = [np.linspace(a, b, n_per_axis) for a, b in zip(lo, hi)]
    return np.array(list(itertools.product(*axes)))


def _check_box(spec, box, h):
    pts = _box_points(box, 2)
    lo, hi = pts.min(axis=0) - h, pts.max(axis=0) + h
    c = np.asarray(spec.center)
    if np.all((c >= lo) & (c <= hi)):
        raise DomainError("box must avoid the inversion center")


def conformal_residual(spec: InversionSpec, v, box, h_fd: float = 1e-2, p: float | None = None,
                       n_per_axis: int = 4) -> dict:
    """Discrete p-Laplacian residual of ``v o I`` at steps ``h`` and ``h/2``.

    ``p`` defaults to the dimension. ``v`` maps arrays of shape ``(n, N)``
    to ``(n,)``.
    """
    p = float(spec.N if p is None else p)
    _check_box(spec, box, h_fd)
    X = _box_points(box, n_per_axis)

    def f(Y):
        return v(invert(spec, Y))

    r1 = _fd.p_laplacian(f, X, h_fd, p)
    r2 = _fd.p_laplacian(f, X, 0.5 * h_fd, p)
    return {"h": h_fd, "residual_h": float(np.max(np.abs(r1))), "residual_h2": float(np.max(np.abs(r2))),
            "order": _fd.order_from_pair(r1, r2), "n_points": int(len(X))}


def field_residual(f, box, h_fd: float = 1e-2, p: float | None = None, n_per_axis: int = 4) -> dict:
    """Same report as :func:`conformal_residual` for a field without composition."""
    X = _box_points(box, n_per_axis)
    p = float(X.shape[1] if p is None else p)
    r1 = _fd.p_laplacian(f, X, h_fd, p)
    r2 = _fd.p_laplacian(f, X, 0.5 * h_fd, p)
    return {"h": h_fd, "residual_h": float(np.max(np.abs(r1))), "residual_h2": float(np.max(np.abs(r2))),
            "order": _fd.order_from_pair(r1, r2), "n_points": int(len(X))}


def weighted_equation_check(spec: InversionSpec, u, q: float, box, h_fd: float = 1e-2, A: float = 1.0,
                            weighted: bool = True, n_per_axis: int = 4) -> dict:
    """Residual of ``-Delta_N(u o I) + A w(x) (u o I)^q`` at steps ``h`` and ``h/2``.

    ``w(x) = |x - c|^{-2N}`` when ``weighted`` else 1 (a negative control).
    """
    N = spec.N
    _check_box(spec, box, h_fd)
    X = _box_points(box, n_per_axis)
    c = np.asarray(spec.center)

    def f(Y):
        return u(invert(spec, Y))

    fx = f(X)
    weight = np.sum((X - c) ** 2, axis=-1) ** (-N) if weighted else np.ones(len(X))
    absorb = A * weight * np.sign(fx) * np.abs(fx) ** q
    r1 = -_fd.p_laplacian(f, X, h_fd, N) + absorb
    r2 = -_fd.p_laplacian(f, X, 0.5 * h_fd, N) + absorb
    return {"h": h_fd, "weighted": weighted, "residual_h": float(np.max(np.abs(r1))),
            "residual_h2": float(np.max(np.abs(r2))), "order": _fd.order_from_pair(r1, r2),
            "scale": float(np.max(np.abs(absorb))), "n_points": int(len(X))}


def separable_sampler(profile):
    """``u(x) = |x|^{-beta} omega(phi)`` in the upper half-space from a hemisphere profile."""

    def u(Y):
        Y = np.asarray(Y, dtype=float)
        r = np.linalg.norm(Y, axis=-1)
        phi = np.arccos(np.clip(Y[..., -1] / r, -1.0, 1.0))
        if np.any(phi > 0.5 * math.pi + 1e-12):
            raise DomainError("separable sampler is defined on the upper half-space only")
        return r ** (-profile.beta) * profile.evaluate(phi)

    return u


# boundary charts


@dataclass(frozen=True)
class BoundaryChart:
    """Graph chart ``x_N = h(x')`` with ``h`` a polynomial of degree 2 to 4.

    ``terms`` maps exponent tuples (length ``N - 1``) to coefficients.
    """

    N: int
    terms: tuple = ()
    tube_width: float = 0.1
    patch: float = 0.5

    def __post_init__(self):
        if self.N < 2:
            raise DomainError("chart needs N >= 2")
        if not self.tube_width > 0:
            raise DomainError("tube_width must be positive")
        terms = tuple((tuple(int(e) for e in k), float(c)) for k, c in dict(self.terms).items())
        for exps, _ in terms:
            if len(exps) != self.N - 1 or any(e < 0 for e in exps):
                raise DomainError(f"bad exponent tuple {exps}")
            deg = sum(exps)
            if deg < 2 or deg > 4:
                raise DomainError("chart terms must have degree 2..4 (h(0) = 0, Dh(0) = 0)")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def flat(cls, N: int, tube_width: float = 0.1) -> "BoundaryChart":
        return cls(N, (), tube_width)

    @classmethod
    def parabolic(cls, N: int, curvature: float = 1.0, tube_width: float = 0.1) -> "BoundaryChart":
        """``h(x') = curvature |x'|^2 / 2``."""
        terms = {}
        for i in range(N - 1):
            e = [0] * (N - 1)
            e[i] = 2
            terms[tuple(e)] = 0.5 * curvature
        return cls(N, tuple(terms.items()), tube_width)

    @classmethod
    def from_string(cls, text: str, N: int, tube_width: float = 0.1) -> "BoundaryChart":
        """Parse ``"flat"`` or ``"e1,e2:c; ..."`` (exponents then coefficient)."""
        text = text.strip()
        if text == "flat":
            return cls.flat(N, tube_width)
        terms = {}
        for part in filter(None, (s.strip() for s in text.split(";"))):
            try:
                exps, coef = part.split(":")
                terms[tuple(int(e) for e in exps.split(","))] = float(coef)
            except ValueError:
                raise DomainError(f"cannot parse chart term {part!r}") from None
        return cls(N, tuple(terms.items()), tube_width)

    @property
    def is_flat(self) -> bool:
        return all(c == 0 for _, c in self.terms)

    def with_width(self, w: float) -> "BoundaryChart":
        return BoundaryChart(self.N, self.terms, w, self.patch)

    def rescaled(self, r: float) -> "BoundaryChart":
        """Chart of the dilated domain ``Omega / r``: ``h_r(x') = h(r x') / r``."""
        terms = tuple((e, c * r ** (sum(e) - 1)) for e, c in self.terms)
        return BoundaryChart(self.N, terms, self.tube_width, self.patch)

    def h(self, y):
        y = np.asarray(y)
        out = np.zeros(y.shape[:-1], dtype=y.dtype)
        for e, c in self.terms:
            out = out + c * np.prod(y ** np.array(e), axis=-1)
        return out

    def grad(self, y):
        y = np.asarray(y)
        out = np.zeros(y.shape, dtype=y.dtype)
        for e, c in self.terms:
            e = np.array(e)
            for i in range(len(e)):
                if e[i] == 0:
                    continue
                ei = e.copy()
                ei[i] -= 1
                out[..., i] = out[..., i] + c * e[i] * np.prod(y**ei, axis=-1)
        return out

    def hess(self, y):
        y = np.asarray(y)
        n = y.shape[-1]
        out = np.zeros(y.shape + (n,), dtype=y.dtype)
        for e, c in self.terms:
            e = np.array(e)
            for i in range(n):
                for j in range(n):
                    ee = e.copy()
                    coef = c * ee[i]
                    ee[i] -= 1
                    coef = coef * ee[j]
                    ee[j] -= 1
                    if coef == 0:
                        continue
                    out[..., i, j] = out[..., i, j] + coef * np.prod(y ** np.maximum(ee, 0), axis=-1)
        return out

    def normal(self, y):
        """Outward unit normal (pointing away from the domain, i.e. downward)."""
        g = self.grad(y)
        n = np.concatenate([g, -np.ones(g.shape[:-1] + (1,), dtype=g.dtype)], axis=-1)
        return n / np.sqrt(np.sum(n * n, axis=-1, keepdims=True))

    def boundary_point(self, y):
        y = np.asarray(y)
        return np.concatenate([y, self.h(y)[..., None]], axis=-1)


def _newton_steps(chart, x, y, n):
    for _ in range(n):
        xp, xn = x[:, :-1], x[:, -1]
        hv, g, H = chart.h(y), chart.grad(y), chart.hess(y)
        F = (y - xp) + (hv - xn)[:, None] * g
        J = np.eye(y.shape[1]) + g[:, :, None] * g[:, None, :] + (hv - xn)[:, None, None] * H
        y = y - np.linalg.solve(J, F[..., None])[..., 0]
    return y


def project(chart: BoundaryChart, x, tol: float = 1e-14, max_iter: int = 60):
    """Nearest boundary point ``xi(x)`` by damped Newton on the optimality condition.

    Works for complex-step perturbed inputs: the real problem is solved first
    and a few undamped complex Newton steps then carry the derivative.
    """
    x = np.atleast_2d(np.asarray(x))
    if x.shape[-1] != chart.N:
        raise DomainError("point dimension does not match the chart")
    if chart.is_flat:
        return chart.boundary_point(x[:, :-1])
    xr = x.real.astype(float)
    y = xr[:, :-1].copy()

    def gnorm(y):
        hv, g = chart.h(y), chart.grad(y)
        F = (y - xr[:, :-1]) + (hv - xr[:, -1])[:, None] * g
        return F, np.linalg.norm(F, axis=-1)

    F, nF = gnorm(y)
    for _ in range(max_iter):
        if np.all(nF <= tol * (1 + np.linalg.norm(xr, axis=-1))):
            break
        hv, g, H = chart.h(y), chart.grad(y), chart.hess(y)
        J = np.eye(y.shape[1]) + g[:, :, None] * g[:, None, :] + (hv - xr[:, -1])[:, None, None] * H
        step = np.linalg.solve(J, F[..., None])[..., 0]
        lam = np.ones(len(y))
        for _ in range(40):
            yn = y - lam[:, None] * step
            Fn, nFn = gnorm(yn)
            bad = nFn > (1 - 1e-4 * lam) * nF
            bad &= nF > tol
            if not bad.any():
                break
            lam = np.where(bad, 0.5 * lam, lam)
        y, F, nF = yn, Fn, nFn
    else:
        raise ProjectionFailure("nearest-point Newton did not converge")
    if not np.all(nF <= 1e-10 * (1 + np.linalg.norm(xr, axis=-1))):
        raise ProjectionFailure("nearest-point Newton stalled")
    if np.iscomplexobj(x):
        y = _newton_steps(chart, x, y.astype(complex), 3)
    return chart.boundary_point(y)


def signed_distance(chart: BoundaryChart, x):
    """Distance to the boundary, negative outside the domain (below the graph)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xi = project(chart, x)
    d = np.linalg.norm(x - xi, axis=-1)
    return np.where(x[:, -1] >= chart.h(x[:, :-1]), d, -d)


def reflect(chart: BoundaryChart, x, check_tube: bool = True):
    """``psi(x) = 2 xi(x) - x``: involutive, fixes the boundary, swaps the sides."""
    x = np.atleast_2d(np.asarray(x))
    xi = project(chart, x)
    if check_tube:
        d = np.linalg.norm((x - xi).real, axis=-1)
        if np.any(d > chart.tube_width * (1 + 1e-12)):
            raise DomainError("point outside the reflection tube")
    return 2 * xi - x


def reflect_jacobian(chart: BoundaryChart, x):
    """``Dpsi`` at each row of ``x``, shape ``(n, N, N)``, by complex step."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, N = x.shape
    J = np.empty((n, N, N))
    for j in range(N):
        xc = x.astype(complex)
        xc[:, j] += 1j * _CS
        J[:, :, j] = reflect(chart, xc).imag / _CS
    return J


def tube_samples(chart: BoundaryChart, n: int, side: str = "outer", seed: int = 0):
    """Random points ``xi + d nu`` with ``|d| <= tube_width`` over the chart patch."""
    rng = np.random.default_rng(seed)
    y = rng.uniform(-chart.patch, chart.patch, size=(n, chart.N - 1))
    d = rng.uniform(0.0, chart.tube_width, size=n)
    if side == "outer":
        s = d
    elif side == "inner":
        s = -d
    elif side == "both":
        s = d * rng.choice([-1.0, 1.0], size=n)
    else:
        raise DomainError(f"unknown side {side!r}")
    return chart.boundary_point(y) + s[:, None] * chart.normal(y)


def extend_odd(chart: BoundaryChart, v, tol: float = 1e-8, n_check: int = 64, seed: int = 0):
    """Odd extension ``v~(x) = v(x)`` in the domain and ``-v(psi(x))`` outside.

    ``v`` must vanish on the boundary (checked on ``n_check`` random boundary
    points of the chart patch).
    """
    rng = np.random.default_rng(seed)
    yb = rng.uniform(-chart.patch, chart.patch, size=(n_check, chart.N - 1))
    trace = np.abs(np.asarray(v(chart.boundary_point(yb))))
    if np.max(trace) > tol:
        raise DomainError(f"boundary trace {np.max(trace):.3e} exceeds tolerance {tol:g}")

    def vt(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inside = x[:, -1] >= chart.h(x[:, :-1])
        out = np.empty(len(x))
        if inside.any():
            out[inside] = v(x[inside])
        if (~inside).any():
            out[~inside] = -np.asarray(v(reflect(chart, x[~inside])))
        return out

    return vt


def extended_operator(chart: BoundaryChart, p: float, x, eta):
    """``A(x, eta) = |det J| |J eta|^{p-2} J^T J eta`` with ``J = Dpsi(x)``."""
    if not p > 1:
        raise DomainError("p must exceed 1")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    eta = np.broadcast_to(eta, x.shape)
    J = reflect_jacobian(chart, x)
    b = np.abs(np.linalg.det(J))
    Je = np.einsum("nij,nj->ni", J, eta)
    mod = np.sum(Je * Je, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        fac = np.where(mod > 0, mod ** (0.5 * (p - 2)), 0.0)
    out = (b * fac)[:, None] * np.einsum("nji,nj->ni", J, Je)
    return out


def _operator_derivative(J, eta, p):
    """``dA/deta`` and the coefficient ``b = |det J|``."""
    B = np.einsum("nki,nkj->nij", J, J)
    b = np.abs(np.linalg.det(J))
    Be = np.einsum("nij,nj->ni", B, eta)
    s = np.einsum("ni,ni->n", eta, Be)
    M = B + (p - 2) * Be[:, :, None] * Be[:, None, :] / s[:, None, None]
    return (b * s ** (0.5 * (p - 2)))[:, None, None] * M, b


@dataclass
class EllipticityReport:
    gamma: float
    Gamma: float
    b_min: float
    b_max: float
    tube_width: float
    halvings: int
    n_samples: int
    history: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"gamma": self.gamma, "Gamma": self.Gamma, "b_min": self.b_min, "b_max": self.b_max,
                "tube_width": self.tube_width, "halvings": self.halvings, "n_samples": self.n_samples}


def ellipticity_scan(chart: BoundaryChart, p: float, n_samples: int = 200, seed: int = 0,
                     max_halvings: int = 40) -> EllipticityReport:
    """Ellipticity constants of the extended operator on the outer tube.

    ``gamma`` is the smallest eigenvalue of ``dA/deta`` over ``|eta|^{p-2}``,
    ``Gamma`` the largest absolute row sum over ``|eta|^{p-2}``. The tube is
    halved until ``0 < gamma <= Gamma`` and ``gamma <= b <= Gamma`` on every
    sample.
    """
    if not p > 1:
        raise DomainError("p must exceed 1")
    rng = np.random.default_rng(seed)
    history = []
    w = chart.tube_width
    for halving in range(max_halvings + 1):
        ch = chart.with_width(w)
        X = tube_samples(ch, n_samples, "outer", seed)
        eta = rng.normal(size=X.shape)
        try:
            J = reflect_jacobian(ch, X)
        except ProjectionFailure:
            history.append({"tube_width": w, "ok": False, "reason": "projection"})
            w *= 0.5
            continue
        M, b = _operator_derivative(J, eta, p)
        scale = np.linalg.norm(eta, axis=-1) ** (p - 2)
        Msym = 0.5 * (M + np.swapaxes(M, 1, 2))
        lo = np.linalg.eigvalsh(Msym)[:, 0] / scale
        hi = np.max(np.sum(np.abs(M), axis=-1), axis=-1) / scale
        gamma, Gamma = float(lo.min()), float(hi.max())
        ok = 0 < gamma <= Gamma and gamma <= b.min() and b.max() <= Gamma
        history.append({"tube_width": w, "gamma": gamma, "Gamma": Gamma, "ok": bool(ok)})
        if ok:
            return EllipticityReport(gamma, Gamma, float(b.min()), float(b.max()), w, halving,
                                     n_samples, history)
        w *= 0.5
    raise EllipticityFailure("no admissible tube width found")
