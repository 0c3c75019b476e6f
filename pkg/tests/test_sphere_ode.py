import math

import numpy as np
import pytest

from qlsing import DomainError, ProblemParams
from qlsing import exponents as ex
from qlsing.oracles import collocation_profile
from qlsing.sphere_ode import (
    Profile,
    ProfileSolver,
    ShootSettings,
    SpectralSolver,
    SphericalGrid,
    profile_residual,
    solve_profile,
    solve_spectral,
    startup_expansion,
)
from qlsing._fd import p_laplacian


def _const_profile(params, M=101):
    c = ex.const_solution(params)
    g = SphericalGrid(M)
    return Profile(beta=ex.beta_q(params), omega=np.full(M, c), omega_prime=np.zeros(M),
                   residual_norm=0.0, lambda0=c, lam=ex.lambda_sep(params), N=params.N,
                   p=float(params.N), q=params.q), g


def test_grid_invariants():
    g = SphericalGrid(11)
    assert g.phi[0] == 0 and g.phi[-1] == math.pi / 2
    assert np.all(np.diff(g.phi) > 0)
    with pytest.raises(DomainError):
        SphericalGrid(10)


@pytest.mark.parametrize("N,q", [(2, 2.0), (3, 3.0), (3, 4.0), (4, 5.5)])
def test_constant_profile_residual(N, q):
    params = ProblemParams(N=N, q=q)
    prof, g = _const_profile(params)
    res = profile_residual(prof, params, g)
    assert np.max(np.abs(res)) <= 1e-10 * prof.omega[0] ** q


def test_zero_profile_residual():
    params = ProblemParams(N=3, q=4.0)
    prof, g = _const_profile(params)
    prof.omega = np.zeros(g.M)
    assert np.all(profile_residual(prof, params, g) == 0)


def test_residual_rejects_bad_input():
    params = ProblemParams(N=2, q=2.0)
    prof, g = _const_profile(params)
    prof.omega[3] = np.nan
    with pytest.raises(DomainError):
        profile_residual(prof, params, g)


def test_cos_profile_residual_matches_cartesian_oracle():
    """For u = cos(phi)/r in 3-D the operator part vanishes, so the residual is cos^q."""
    params = ProblemParams(N=3, q=4.0)
    g = SphericalGrid(401)
    phi = g.phi
    prof = Profile(beta=1.0, omega=np.cos(phi), omega_prime=-np.sin(phi), residual_norm=0.0,
                   lambda0=1.0, lam=2.0, N=3, p=3.0, q=4.0)
    prof.omega[-1] = 0.0
    res = profile_residual(prof, params, g)

    def u(X):
        return X[:, 2] / np.sum(X * X, axis=1)

    pts = np.stack([np.sin(phi[:-1]), np.zeros(g.M - 1), np.cos(phi[:-1])], axis=1)
    # r^{beta (N-1) + N} = 1 on the unit sphere; add the absorption term
    oracle = -p_laplacian(u, pts, 1e-3, 3.0) + np.cos(phi[:-1]) ** 4
    assert res[0] == pytest.approx(1.0, abs=1e-4)
    assert np.max(np.abs(res[:-1] - oracle)) <= 1e-3


def test_startup_expansion():
    params = ProblemParams(N=2, q=2.0)
    assert startup_expansion(1.0, 2.0, params) == pytest.approx(-3.0)
    c = ex.const_solution(params)
    assert startup_expansion(c, 2.0, params) == pytest.approx(0.0, abs=1e-12)
    c3 = ex.const_solution(ProblemParams(N=3, q=4.0))
    assert startup_expansion(c3, 1.5, ProblemParams(N=3, q=4.0)) == pytest.approx(0.0, abs=1e-9 * c3)
    assert startup_expansion(1.0, 1.0, lam=ex.spectral_lambda(1.0, 3.0, 3), N=3) == pytest.approx(-1.0)
    with pytest.raises(DomainError):
        startup_expansion(0.0, 1.0, params)


def test_profile_n2q2(profile_n2q2):
    p = profile_n2q2
    assert p.omega[-1] == 0 and p.omega_prime[0] == 0
    assert np.all(p.omega[:-1] > 0)
    assert np.all(p.omega_prime[1:] < 0)
    assert abs(p.boundary_value) <= 1e-8
    assert p.floor_hits == 0


def test_profile_agrees_with_collocation(profile_n2q2):
    _, wc = collocation_profile(ProblemParams(N=2, q=2.0), 48)
    assert profile_n2q2.lambda0 == pytest.approx(wc[0], rel=5e-5)
    assert profile_n2q2.lambda0 == pytest.approx(3.408492521937, rel=1e-9)


def test_profile_n3q4(profile_n3q4):
    p = profile_n3q4
    assert np.all(p.omega[:-1] > 0) and np.all(np.diff(p.omega) < 0)
    _, wc = collocation_profile(ProblemParams(N=3, q=4.0), 48)
    assert p.lambda0 == pytest.approx(wc[0], rel=5e-5)


@pytest.mark.parametrize("N,q", [(2, 2.0), (3, 4.0)])
def test_profile_residual_second_order(N, q):
    params = ProblemParams(N=N, q=q)
    norms = [solve_profile(params, SphericalGrid(M)).residual_norm for M in (201, 401, 801, 1601)]
    ratios = [a / b for a, b in zip(norms, norms[1:])]
    assert all(3.5 <= r <= 4.5 for r in ratios), ratios


def test_profile_near_critical_structure():
    p = solve_profile(ProblemParams(N=2, q=2.9), SphericalGrid(1001))
    assert np.all(p.omega[:-1] > 0) and np.all(np.diff(p.omega) < 0)


def test_profile_domain():
    with pytest.raises(DomainError):
        solve_profile(ProblemParams(N=2, q=3.0))
    with pytest.raises(DomainError):
        solve_profile(ProblemParams(N=2, q=2.0, p=3.0))


def test_profile_evaluate_matches_nodes(profile_n2q2):
    p = profile_n2q2
    assert np.allclose(p.evaluate(p.phi), p.omega, atol=1e-12)
    mid = 0.5 * (p.phi[:-1] + p.phi[1:])
    lin = 0.5 * (p.omega[:-1] + p.omega[1:])
    assert np.max(np.abs(p.evaluate(mid) - lin)) < 1e-5


def test_spectral_cases():
    b, prof = solve_spectral(3.0, 3)
    assert abs(b - 1.0) <= 1e-4
    assert np.max(np.abs(prof.omega - np.cos(prof.phi))) <= 1e-4
    assert prof.lam == pytest.approx(2.0, abs=1e-3)
    b, prof = solve_spectral(2.0, 3)
    assert abs(b - 2.0) <= 1e-3
    b, _ = solve_spectral(3.0, 2)
    assert abs(b - ex.kv_root(3.0)) <= 1e-3


@pytest.mark.parametrize("p", [1.5, 2.5, 4.0])
def test_spectral_planar_matches_kv_root(p):
    b, _ = solve_spectral(p, 2)
    assert b == pytest.approx(ex.kv_root(p), abs=1e-6)


@pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
def test_spectral_homogeneity(c):
    settings = ShootSettings()
    b1, p1 = solve_spectral(3.0, 3, SphericalGrid(801), settings)
    bc, pc = solve_spectral(3.0, 3, SphericalGrid(801), settings, scale=c)
    assert abs(bc - b1) <= 4 * settings.tol_param * b1
    assert np.allclose(pc.omega, c * p1.omega, rtol=1e-9, atol=1e-9 * c)


def test_spectral_residual_second_order():
    norms = [solve_spectral(3.0, 2, SphericalGrid(M))[1].residual_norm for M in (201, 401, 801, 1601)]
    ratios = [a / b for a, b in zip(norms, norms[1:])]
    assert all(3.5 <= r <= 4.5 for r in ratios), ratios


def test_estimators():
    est = ProfileSolver(N=2, q=2.0, M=401).fit()
    assert est.get_params()["M"] == 401
    assert est.transform(np.array([0.0]))[0] == pytest.approx(est.lambda0_)
    sp = SpectralSolver(p=2.0, N=3, M=401).fit()
    assert sp.beta_ == pytest.approx(2.0, abs=1e-3)
