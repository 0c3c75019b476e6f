"""Cartesian finite-difference p-Laplacian used as an independent oracle."""

from __future__ import annotations

import numpy as np


def _grad(f, Y, h):
    N = Y.shape[-1]
    g = np.empty(Y.shape)
    for j in range(N):
        e = np.zeros(N)
        e[j] = 0.5 * h
        g[..., j] = (f(Y + e) - f(Y - e)) / h
    return g


def p_laplacian(f, X, h, p):
    """``div(|Du|^{p-2} Du)`` at the rows of ``X`` by nested central differences.

    The flux is evaluated at half-step points with a centered gradient of
    step ``h``; the outer divergence differences those fluxes. Second order
    for smooth ``f``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N = X.shape[-1]
    out = np.zeros(X.shape[0])
    for i in range(N):
        e = np.zeros(N)
        e[i] = 0.5 * h
        fluxes = []
        for s in (1.0, -1.0):
            g = _grad(f, X + s * e, h)
            mod = np.sum(g * g, axis=-1)
            fluxes.append(mod ** (0.5 * (p - 2)) * g[:, i])
        out += (fluxes[0] - fluxes[1]) / h
    return out


def order_from_pair(res_h, res_h2) -> float:
    """Observed order from sup-norms at steps ``h`` and ``h/2``."""
    a, b = float(np.max(np.abs(res_h))), float(np.max(np.abs(res_h2)))
    if b == 0.0:
        return np.inf if a == 0.0 else -np.inf
    if a == 0.0:
        return -np.inf
    return float(np.log2(a / b))
