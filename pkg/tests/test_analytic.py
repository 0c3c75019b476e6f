import math

import numpy as np
import pytest

from qlsing import DomainError, ProblemParams
from qlsing._fd import p_laplacian
from qlsing.analytic import (
    Lw_eval,
    SubsolutionSpec,
    alpha_bound,
    ball_kernel_Pk,
    find_R,
    subsolution_w,
    supersolution_weak,
)
from qlsing.oracles import stack_fd_check
from qlsing.transforms import field_residual

RNG = np.random.default_rng(7)


def _upper_points(N, n=12):
    X = RNG.uniform(-0.5, 0.5, size=(n, N))
    X[:, -1] = RNG.uniform(0.1, 0.5, size=n)
    return X


@pytest.mark.parametrize("N", [2, 3, 4])
def test_kernel_is_N_harmonic(N):
    def v(X):
        return X[:, -1] / np.sum(X * X, axis=1)

    lo = [0.1] * (N - 1) + [0.2]
    hi = [0.4] * (N - 1) + [0.5]
    rep = field_residual(v, (lo, hi), h_fd=1e-2)
    assert abs(rep["order"] - 2) < 0.1
    assert rep["residual_h2"] < 0.3 * rep["residual_h"]


def test_supersolution_values():
    assert supersolution_weak(2.0, 0.0, k=3.0) == 1.5
    assert supersolution_weak(1.0, math.pi / 2) == 0.0
    with pytest.raises(DomainError):
        supersolution_weak(0.0, 0.0)


def test_alpha_bound():
    assert alpha_bound(ProblemParams(N=2, q=2.0)) == 1.0
    assert alpha_bound(ProblemParams(N=3, q=4.0)) == 1.0
    assert alpha_bound(ProblemParams(N=4, q=5.0)) == 0.5
    with pytest.raises(DomainError):
        SubsolutionSpec(1.0, 1.5).check_admissible(ProblemParams(N=2, q=2.0))


def test_spec_validation():
    for args in [(0.0, 0.5), (1.0, 0.0), (1.0, 0.5, 2.0)]:
        with pytest.raises(DomainError):
            SubsolutionSpec(*args)
    assert SubsolutionSpec(2.0, 0.5, 0.25).ell_R == pytest.approx(2.0 * 0.5 / 0.25)


def test_subsolution_vanishes_on_boundary_and_outer_arc():
    spec = SubsolutionSpec(1.5, 0.4)
    st = subsolution_w(spec, np.array([0.1, 0.5, 1.0]), np.array([math.pi / 2, math.pi / 2, 0.3]))
    assert np.all(st.w == 0)


def test_derivative_stack_against_differences():
    spec = SubsolutionSpec(1.3, 0.35)
    r = RNG.uniform(0.05, 0.9, 50)
    phi = RNG.uniform(0.05, 1.5, 50)
    rep = stack_fd_check(spec, r, phi)
    assert rep["passed"], rep


@pytest.mark.parametrize("N,q,alpha", [(2, 2.0, 0.5), (3, 4.0, 0.3), (4, 5.0, 0.2)])
def test_Lw_exact_matches_cartesian_oracle(N, q, alpha):
    params = ProblemParams(N=N, q=q)
    spec = SubsolutionSpec(1.0, alpha)

    def w(X):
        r = np.linalg.norm(X, axis=1)
        return spec.k * (1 - r**alpha) / r * X[:, -1] / r

    X = _upper_points(N, 8) * 0.8
    r = np.linalg.norm(X, axis=1)
    phi = np.arccos(X[:, -1] / r)
    exact = Lw_eval(spec, r, phi, params)
    oracle = -p_laplacian(w, X, 1e-4 * r.min(), float(N)) + w(X) ** q
    assert np.max(np.abs(exact - oracle) / np.abs(exact)) <= 1e-4


def test_Lw_nonpositive_near_origin():
    params = ProblemParams(N=3, q=4.0)
    spec = SubsolutionSpec(1.0, 0.3)
    R, PHI = np.meshgrid(np.geomspace(1e-4, 0.5, 40), np.linspace(0, math.pi / 2, 40), indexing="ij")
    assert np.all(Lw_eval(spec, R, PHI, params) <= 0)


def test_Lw_expansion_is_leading_order():
    params = ProblemParams(N=3, q=4.0)
    spec = SubsolutionSpec(1.0, 0.3)
    ratios = [Lw_eval(spec, r, 0.4, params) / Lw_eval(spec, r, 0.4, params, mode="expansion")
              for r in (1e-1, 1e-2, 1e-3, 1e-4)]
    gaps = np.abs(1 - np.array(ratios))
    assert np.all(np.diff(gaps) < 0)
    assert gaps[-1] < 0.06


def test_Lw_planar_expansion_is_exact_leading_term():
    params = ProblemParams(N=2, q=2.0)
    spec = SubsolutionSpec(1.0, 0.5)
    for r in (1e-3, 1e-5):
        a = Lw_eval(spec, r, 0.7, params)
        b = Lw_eval(spec, r, 0.7, params, mode="expansion")
        assert abs(a / b - 1) < 10 * r**0.5


def test_Lw_bad_mode():
    with pytest.raises(DomainError):
        Lw_eval(SubsolutionSpec(1.0, 0.5), 0.5, 0.1, ProblemParams(N=2, q=2.0), mode="other")


def test_find_R():
    params = ProblemParams(N=3, q=4.0)
    rep = find_R(SubsolutionSpec(1.0, 0.3), params)
    assert 0 < rep["R"] <= 1 and rep["Lw_max"] <= 0 and rep["n_samples"] == 64 * 64
    with pytest.raises(DomainError):
        find_R(SubsolutionSpec(1.0, 2.0), params)


@pytest.mark.parametrize("N", [2, 3])
def test_ball_kernel(N):
    # points in B* = {|x|^2 + x_N < 0}, a ball of radius 1/2 about (0, ..., -1/2)
    c = np.zeros(N)
    c[-1] = -0.5
    d = RNG.normal(size=(12, N))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    X = c + RNG.uniform(0.05, 0.4, size=(12, 1)) * d
    P = ball_kernel_Pk(X, k=2.0)
    assert np.all(P > 0)
    lo = [-0.1] * (N - 1) + [-0.6]
    hi = [0.1] * (N - 1) + [-0.4]
    rep = field_residual(lambda Y: ball_kernel_Pk(Y, k=2.0), (lo, hi), h_fd=1e-2)
    assert abs(rep["order"] - 2) < 0.1
    assert rep["residual_h2"] < 0.3 * rep["residual_h"]
    sphere = c + 0.5 * d
    assert np.max(np.abs(ball_kernel_Pk(sphere))) <= 1e-12
    with pytest.raises(DomainError):
        ball_kernel_Pk(np.ones(N))
