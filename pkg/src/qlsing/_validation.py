"""Problem parameters and input validation helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import DomainError


class _Infinite:
    """Marker for the strong singularity ``k = inf``.

    The strong solution is not a member of the weak family, so it gets its
    own object instead of ``float('inf')``.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITE"

    def __reduce__(self):
        return (_Infinite, ())


INFINITE = _Infinite()


def is_infinite(k) -> bool:
    return k is INFINITE


@dataclass(frozen=True)
class ProblemParams:
    """Dimension ``N``, exponents ``p``/``q``, coefficients ``A``/``B``, strength ``k``.

    ``p`` defaults to ``N``.
    """

    N: int
    q: float
    p: float | None = None
    A: float = 1.0
    B: float = 0.0
    k: float | _Infinite = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise DomainError(f"N must be an integer >= 2, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if self.p is None:
            object.__setattr__(self, "p", float(self.N))
        check_finite_scalar(self.q, "q")
        check_finite_scalar(self.p, "p")
        if self.p <= 1:
            raise DomainError(f"p must exceed 1, got {self.p}")
        if not self.A > 0:
            raise DomainError(f"A must be positive, got {self.A}")
        if not self.B >= 0:
            raise DomainError(f"B must be nonnegative, got {self.B}")
        if not is_infinite(self.k):
            check_finite_scalar(self.k, "k")
            if self.k < 0:
                raise DomainError(f"k must be nonnegative, got {self.k}")

    @property
    def q_c(self) -> float:
        return 2.0 * self.N - 1.0

    def with_(self, **changes) -> "ProblemParams":
        return replace(self, **changes)

    def finite_k(self) -> float:
        if is_infinite(self.k):
            raise DomainError("operation requires a finite singularity strength k")
        return float(self.k)


def check_finite_scalar(value, name: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value}")
    return value


def check_array_finite(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} contains non-finite values")
    return a


def require_p_equals_N(params: ProblemParams) -> None:
    if params.p != params.N:
        raise DomainError(f"operation is defined for p = N only (p={params.p}, N={params.N})")


def require_supercritical_absorption(params: ProblemParams) -> None:
    """q > p - 1 (needed for profile and PDE operations)."""
    if not params.q > params.p - 1:
        raise DomainError(f"need q > p - 1, got q={params.q}, p={params.p}")


def require_subcritical_range(params: ProblemParams) -> None:
    """N - 1 < q < 2N - 1 (weak and strong singularities exist)."""
    N, q = params.N, params.q
    if not (N - 1 < q < 2 * N - 1):
        raise DomainError(f"need N-1 < q < 2N-1, got N={N}, q={q}")
