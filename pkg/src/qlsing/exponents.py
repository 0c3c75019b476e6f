"""Closed-form exponents, thresholds and constant spherical solutions.

Everything here is an exact formula evaluated in double precision; these
values anchor the tolerances used by the numerical modules.

Conventions (``p = N`` unless stated):

* similarity exponent ``beta_q = N / (q + 1 - N)``
* critical exponent ``q_c = 2N - 1``
* zeroth-order coefficient of the spherical profile equation
  ``Lambda = (N - 1) beta_q**2``
* for a general gradient exponent ``p`` the separable ansatz
  ``u = r**(-beta) omega`` gives the coefficient
  ``beta * (beta * (p - 1) + p - N)``, which with ``beta = p / (q + 1 - p)``
  equals ``beta * (q * beta - N)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from ._validation import ProblemParams
from .exceptions import DomainError


def beta_q(params: ProblemParams) -> float:
    N, q = params.N, params.q
    if not q > N - 1:
        raise DomainError(f"beta_q needs q > N-1 (N={N}, q={q})")
    return N / (q + 1.0 - N)


def critical_q(N: int) -> float:
    if N < 2:
        raise DomainError(f"N must be >= 2, got {N}")
    return 2.0 * N - 1.0


def lambda_sep(params: ProblemParams) -> float:
    return (params.N - 1) * beta_q(params) ** 2


def const_solution(params: ProblemParams) -> float:
    """Positive constant solving the spherical profile equation."""
    N, q = params.N, params.q
    b = beta_q(params)
    return ((N - 1) * b**N) ** (1.0 / (q + 1.0 - N))


def constant_residual(c: float, params: ProblemParams) -> float:
    """Residual of a constant ``c`` in the spherical equation (gradient term vanishes)."""
    N, q = params.N, params.q
    b = beta_q(params)
    return -lambda_sep(params) * b ** (N - 2) * c ** (N - 1) + abs(c) ** (q - 1) * c


def kv_root(p: float) -> float:
    """Positive root of ``3 b**2 + 2 (p-3)/(p-1) b - 1 = 0`` (planar p-harmonic exponent)."""
    if not p > 1:
        raise DomainError(f"p must exceed 1, got {p}")
    c = (p - 3.0) / (p - 1.0)
    return (-c + math.sqrt(c * c + 3.0)) / 3.0


def beta2_sign_changing(N: int) -> float:
    if N < 2:
        raise DomainError(f"N must be >= 2, got {N}")
    return (7 * N - 1 + math.sqrt(N * N + 12 * N + 12)) / (6.0 * (N - 1))


def scaling_exponent(params: ProblemParams) -> float:
    """Exponent ``s`` with ``T_r u_k = u_{r**s k}`` under ``T_r u(x) = r**beta_q u(r x)``."""
    N, q = params.N, params.q
    if not (N - 1 < q < 2 * N - 1):
        raise DomainError(f"scaling exponent needs N-1 < q < 2N-1 (N={N}, q={q})")
    return (2.0 * N - 1.0 - q) / (q + 1.0 - N)


def beta_pq(p: float, q: float) -> float:
    if not q > p - 1:
        raise DomainError(f"need q > p-1 (p={p}, q={q})")
    return p / (q + 1.0 - p)


def spectral_lambda(beta: float, p: float, N: int) -> float:
    """Zeroth-order coefficient produced by ``r**(-beta) omega`` for the p-Laplacian."""
    return beta * (beta * (p - 1.0) + p - N)


def lambda_pq(p: float, q: float, N: int) -> float:
    b = beta_pq(p, q)
    return b * (q * b - N)


@dataclass(frozen=True)
class ExponentTable:
    beta_q: float
    q_c: float
    lambda_sep: float
    const_solution: float
    scaling_exp: float | None
    beta_pq: float
    lambda_pq: float
    beta2: float
    kv_root: float
    note: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def exponent_table(params: ProblemParams) -> ExponentTable:
    N, q, p = params.N, params.q, params.p
    b = beta_q(params)
    qc = critical_q(N)
    if q < qc:
        s = scaling_exponent(params)
        note = "subcritical: weak and strong singularities exist"
    elif q == qc:
        s = None
        note = "q = q_c: critical"
    else:
        s = None
        note = "supercritical: isolated boundary singularities are removable"
    return ExponentTable(
        beta_q=b,
        q_c=qc,
        lambda_sep=lambda_sep(params),
        const_solution=const_solution(params),
        scaling_exp=s,
        beta_pq=beta_pq(p, q),
        lambda_pq=lambda_pq(p, q, N),
        beta2=beta2_sign_changing(N),
        kv_root=kv_root(p),
        note=note,
    )
