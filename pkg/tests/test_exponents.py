import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qlsing import INFINITE, DomainError, ProblemParams
from qlsing import exponents as ex


def P(N, q, **kw):
    return ProblemParams(N=N, q=q, **kw)


@pytest.mark.parametrize("N,q,expected", [(3, 3.0, 3.0), (2, 3.0, 1.0), (2, 2.0, 2.0)])
def test_beta_q_values(N, q, expected):
    assert ex.beta_q(P(N, q)) == expected


def test_beta_q_rejects_low_q():
    with pytest.raises(DomainError):
        ex.beta_q(P(3, 2.0))


@pytest.mark.parametrize("N,expected", [(2, 3), (3, 5), (10, 19)])
def test_critical_q(N, expected):
    assert ex.critical_q(N) == expected


def test_beta_q_decreasing_and_one_at_critical():
    for N in (2, 3, 4, 5):
        qs = np.linspace(N - 1 + 1e-3, 2 * N - 1, 100)
        b = np.array([ex.beta_q(P(N, q)) for q in qs])
        assert np.all(np.diff(b) < 0)
        assert abs(ex.beta_q(P(N, 2 * N - 1.0)) - 1.0) <= 1e-12


def test_const_solution_values():
    assert ex.const_solution(P(2, 2.0)) == pytest.approx(4.0, abs=1e-12)
    # (N-1) beta^N = 2 * 27 for N = q = 3
    assert ex.const_solution(P(3, 3.0)) == pytest.approx(54.0, rel=1e-14)
    c = ex.const_solution(P(2, 2.5))
    assert c == pytest.approx((16.0 / 9.0) ** (2.0 / 3.0), rel=1e-14)
    assert c == pytest.approx(1.4675, abs=1e-4)


@given(N=st.integers(2, 6), frac=st.floats(0.3, 3.0))
@settings(max_examples=60, deadline=None)
def test_const_solution_has_zero_residual(N, frac):
    params = P(N, N - 1 + frac)
    c = ex.const_solution(params)
    assert abs(ex.constant_residual(c, params)) <= 1e-10 * c**params.q
    b = ex.beta_q(params)
    assert c ** (params.q + 1 - N) == pytest.approx(ex.lambda_sep(params) * b ** (N - 2), rel=1e-12)


def test_kv_root():
    assert abs(ex.kv_root(2.0) - 1.0) <= 1e-14
    assert ex.kv_root(3.0) == pytest.approx(1 / math.sqrt(3), abs=1e-15)
    assert ex.kv_root(1e12) == pytest.approx(1 / 3, abs=1e-9)
    with pytest.raises(DomainError):
        ex.kv_root(1.0)


def test_kv_root_solves_quadratic():
    for p in (1.2, 2.0, 3.0, 7.5):
        b = ex.kv_root(p)
        assert abs(3 * b**2 + 2 * (p - 3) / (p - 1) * b - 1) <= 1e-14 * max(1.0, 3 * b**2)


def test_beta2():
    assert ex.beta2_sign_changing(2) == pytest.approx((13 + math.sqrt(40)) / 6, rel=1e-15)
    assert ex.beta2_sign_changing(3) == pytest.approx((20 + math.sqrt(57)) / 12, rel=1e-15)
    assert all(ex.beta2_sign_changing(N) > 0 for N in range(2, 12))


def test_scaling_exponent():
    assert ex.scaling_exponent(P(2, 2.0)) == 1.0
    assert ex.scaling_exponent(P(3, 4.0)) == 0.5
    assert ex.scaling_exponent(P(2, 3.0 - 1e-9)) == pytest.approx(0.0, abs=1e-8)
    with pytest.raises(DomainError):
        ex.scaling_exponent(P(2, 3.0))


def test_lambda_pq_matches_lambda_sep_at_p_equal_N():
    rng = np.random.default_rng(1)
    for _ in range(50):
        N = int(rng.integers(2, 8))
        q = float(rng.uniform(N - 1 + 0.1, 2 * N + 2))
        lam = ex.lambda_sep(P(N, q))
        assert abs(ex.lambda_pq(N, q, N) - lam) <= 1e-12 * lam
    assert ex.lambda_pq(2, 2.0, 2) == pytest.approx(4.0)
    assert ex.lambda_pq(3, 3.0, 3) == pytest.approx(18.0)


def test_lambda_pq_is_the_separable_coefficient():
    # beta_{p,q} = 1 for p = 2, q = 3, so the coefficient beta (beta (p-1) + p - N) vanishes at N = 3
    assert ex.beta_pq(2, 3.0) == 1.0
    assert ex.lambda_pq(2, 3.0, 3) == 0.0
    for p, q, N in [(1.5, 2.0, 3), (3.0, 4.0, 2), (2.5, 5.0, 4)]:
        b = ex.beta_pq(p, q)
        assert ex.lambda_pq(p, q, N) == pytest.approx(ex.spectral_lambda(b, p, N), rel=1e-14)


def test_exponent_table_notes():
    assert "subcritical" in ex.exponent_table(P(2, 2.0)).note
    t = ex.exponent_table(P(2, 3.0))
    assert t.note == "q = q_c: critical" and t.scaling_exp is None
    assert "supercritical" in ex.exponent_table(P(2, 4.0)).note


def test_params_validation():
    with pytest.raises(DomainError):
        ProblemParams(N=1, q=2.0)
    with pytest.raises(DomainError):
        ProblemParams(N=2, q=2.0, A=0.0)
    with pytest.raises(DomainError):
        ProblemParams(N=2, q=2.0, B=-1.0)
    with pytest.raises(DomainError):
        ProblemParams(N=2, q=float("nan"))
    inf = ProblemParams(N=2, q=2.0, k=INFINITE)
    assert repr(inf.k) == "INFINITE"
    with pytest.raises(DomainError):
        inf.finite_k()
    assert ProblemParams(N=3, q=4.0).p == 3.0
