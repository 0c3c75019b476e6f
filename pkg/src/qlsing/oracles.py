"""Independent reference discretizations used to confirm shooting results.

The Chebyshev collocation solver shares no code with the shooting
integrator: it discretizes the profile equation globally on Gauss-Lobatto
points and solves the resulting algebraic system with a Newton-type root
finder.
"""

from __future__ import annotations

import numpy as np
from scipy import optimize

from ._validation import ProblemParams, require_p_equals_N
from .exceptions import NonConvergence
from . import exponents


def cheb_diff(n: int, a: float, b: float):
    """Chebyshev points on ``[a, b]`` (ascending) and the differentiation matrix."""
    k = np.arange(n + 1)
    x = np.cos(np.pi * k / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** k
    X = np.tile(x, (n + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    # map [-1, 1] -> [a, b] and flip to ascending order
    scale = 2.0 / (b - a)
    pts = a + (b - a) * (1.0 - x) / 2.0
    return pts, -D * scale


def collocation_profile(params: ProblemParams, n: int = 64, guess=None, tol: float = 1e-13):
    """Absorption profile by Chebyshev collocation and Newton iteration.

    Returns ``(phi, omega)`` on the collocation points of ``[0, pi/2]``.
    Rows: ``w'(0) = 0``, interior equations, ``w(pi/2) = 0``.
    """
    require_p_equals_N(params)
    N, q = params.N, params.q
    beta = exponents.beta_q(params)
    lam = (N - 1) * beta**2
    m = 0.5 * (N - 2)
    phi, D = cheb_diff(n, 0.0, 0.5 * np.pi)
    D2 = D @ D
    inner = slice(1, n)
    cot = np.cos(phi[inner]) / np.sin(phi[inner])

    def F(w):
        wp = D @ w
        wpp = D2 @ w
        wi, wpi, wppi = w[inner], wp[inner], wpp[inner]
        Q = beta**2 * wi**2 + wpi**2
        eq = (wppi * (beta**2 * wi**2 + (N - 1) * wpi**2)
              + 2 * m * beta**2 * wi * wpi**2 + (N - 2) * cot * wpi * Q
              + lam * Q * wi - np.sign(wi) * np.abs(wi) ** q * Q ** (1 - m))
        return np.concatenate([[wp[0]], eq, [w[-1]]])

    if guess is None:
        guess = exponents.const_solution(params) * np.cos(phi)
    sol = optimize.root(F, np.asarray(guess, dtype=float), method="hybr", tol=tol)
    if not sol.success or np.max(np.abs(F(sol.x))) > 1e-8 * max(1.0, np.max(np.abs(sol.x))) ** (q + 1):
        raise NonConvergence(f"collocation Newton failed: {sol.message}")
    return phi, sol.x


def stack_fd_check(spec, r, phi, rel: float = 1e-6) -> dict:
    """Compare the closed-form subsolution stack with central differences of ``w``.

    First derivatives use step ``1e-5`` (relative in ``r``), second
    derivatives ``1e-4``; ``P_r`` and ``P_phi`` difference the closed-form ``P``.
    Returns the worst relative error per entry.
    """
    from .analytic import subsolution_w

    r = np.asarray(r, dtype=float)
    phi = np.asarray(phi, dtype=float)

    def w(rr, pp):
        k, a = spec.k, spec.alpha
        return k * (1 - rr**a) / rr * np.cos(pp)

    st = subsolution_w(spec, r, phi)
    h1r, h1p = 1e-5 * r, 1e-5
    h2r, h2p = 1e-4 * r, 1e-4
    fd = {
        "w_r": (w(r + h1r, phi) - w(r - h1r, phi)) / (2 * h1r),
        "w_phi": (w(r, phi + h1p) - w(r, phi - h1p)) / (2 * h1p),
        "w_rr": (w(r + h2r, phi) - 2 * w(r, phi) + w(r - h2r, phi)) / h2r**2,
        "w_phiphi": (w(r, phi + h2p) - 2 * w(r, phi) + w(r, phi - h2p)) / h2p**2,
        "w_rphi": (w(r + h2r, phi + h2p) - w(r + h2r, phi - h2p)
                   - w(r - h2r, phi + h2p) + w(r - h2r, phi - h2p)) / (4 * h2r * h2p),
    }
    Pp = subsolution_w(spec, r + h1r, phi).P
    Pm = subsolution_w(spec, r - h1r, phi).P
    fd["P_r"] = (Pp - Pm) / (2 * h1r)
    Pp = subsolution_w(spec, r, np.minimum(phi + h1p, 0.5 * np.pi)).P
    Pm = subsolution_w(spec, r, phi - h1p).P
    fd["P_phi"] = (Pp - Pm) / (np.minimum(phi + h1p, 0.5 * np.pi) - (phi - h1p))
    fd["P"] = fd["w_r"] ** 2 + fd["w_phi"] ** 2 / r**2
    out = {}
    for name, approx in fd.items():
        exact = np.asarray(getattr(st, name))
        err = np.abs(approx - exact) / np.maximum(np.abs(exact), 1e-300)
        out[name] = float(np.max(err))
    out["passed"] = all(v <= rel for v in out.values())
    return out
