import math

import numpy as np
import pytest

from qlsing import DomainError, IllPosed, ProblemParams
from qlsing.halfspace import (
    HalfspaceSolver,
    SectorGrid,
    SolveSettings,
    assemble_residual,
    bound_diagnostics,
    custom,
    removability_experiment,
    solve_field,
    strong_family,
    supersolution_bound_violation,
    weak_k,
)

GRID = SectorGrid(1e-2, 1.0, 65, 33)


def _kernel(grid, k):
    R, PHI = np.meshgrid(grid.r, grid.phi, indexing="ij")
    U = k * np.cos(PHI) / R
    U[:, -1] = 0.0
    return U


def test_grid_validation():
    with pytest.raises(DomainError):
        SectorGrid(1.0, 0.5, 65, 33)
    with pytest.raises(DomainError):
        SectorGrid(0.1, 1.0, 16, 33)
    g = SectorGrid.with_spacing(1e-3, 1.0, 0.05, 17)
    assert g.dt <= 0.05 and g.r[0] == pytest.approx(1e-3) and g.r[-1] == pytest.approx(1.0)
    assert g.scaled(10.0).t == pytest.approx(g.t + math.log(10.0))


def test_kernel_is_discretely_harmonic_in_the_plane():
    params = ProblemParams(N=2, q=2.0, A=1.0)
    U = _kernel(GRID, 1.0)
    res = assemble_residual(U, params, GRID) - U[1:-1, :-1] ** 2
    assert np.max(np.abs(res)) <= 1e-9 * np.max(U) ** 2


def test_residual_of_constant_matches_absorption():
    params = ProblemParams(N=3, q=4.0, A=2.0, B=0.5)
    U = np.full((GRID.n_t, GRID.n_phi), 0.7)
    res = assemble_residual(U, params, GRID, reg_eps=1e-8)
    assert np.max(np.abs(res - (2.0 * 0.7**4 - 0.5))) <= 1e-10


def test_residual_shape_check():
    with pytest.raises(DomainError):
        assemble_residual(np.zeros((3, 3)), ProblemParams(N=2, q=2.0), GRID)


def test_zero_strength_gives_zero_field():
    f = solve_field(ProblemParams(N=2, q=2.0, k=0.0), GRID)
    assert np.all(f.u == 0)


def test_ill_posed_exponent():
    with pytest.raises(IllPosed):
        solve_field(ProblemParams(N=3, q=2.0, k=1.0), GRID)


def test_weak_k_rejects_bad_strength():
    with pytest.raises(DomainError):
        weak_k(-1.0)


@pytest.mark.parametrize("N,q", [(2, 2.0), (3, 4.0)])
def test_weak_solution_properties(N, q):
    params = ProblemParams(N=N, q=q)
    fields = [solve_field(params.with_(k=k), GRID) for k in (0.5, 1.0, 2.0)]
    for f in fields:
        assert f.residual_norm <= 1e-6 * max(1.0, np.max(f.u) ** q)
        assert np.all(f.u >= -1e-12)
        # the kernel is discretely harmonic only for N = 2; otherwise the bound holds to truncation error
        tol = 1e-10 if N == 2 else 1e-4
        assert supersolution_bound_violation(f) <= tol * np.max(f.u)
    # comparison: larger data give larger solutions
    for a, b in zip(fields, fields[1:]):
        assert np.all(b.u >= a.u - 1e-12)


def test_maximum_principle_without_absorption():
    params = ProblemParams(N=2, q=2.0, A=1e-300)
    inner = np.linspace(1.0, 0.0, GRID.n_phi)
    outer = 0.5 * inner
    f = solve_field(params, GRID, custom(inner, outer))
    assert f.u.max() <= inner.max() + 1e-10 and f.u.min() >= -1e-10


def test_grid_convergence_second_order():
    params = ProblemParams(N=2, q=2.0, k=1.0)
    g0 = SectorGrid(1e-2, 1.0, 33, 17)
    f0, f1, f2 = (solve_field(params, g) for g in (g0, g0.refined(), g0.refined().refined()))
    probe = 0.1
    v = [f.max_at(probe) for f in (f0, f1, f2)]
    ratio = abs(v[0] - v[1]) / abs(v[1] - v[2])
    assert 3.0 <= ratio <= 5.0, ratio


def test_field_accessors():
    f = solve_field(ProblemParams(N=2, q=2.0, k=1.0), GRID)
    assert np.allclose(f.column_at(GRID.r[10]), f.u[10], atol=1e-12)
    assert f.max_at(GRID.r[10]) == pytest.approx(np.max(f.u[10]))
    assert f.evaluate(np.array([GRID.r[5]]), np.array([0.0]))[0] == pytest.approx(f.u[5, 0], rel=1e-9)


def test_bound_diagnostics_finite():
    f = solve_field(ProblemParams(N=2, q=2.0, k=1.0), GRID)
    d = bound_diagnostics(f)
    assert 0 < d["lambda_hat"] < math.inf and 0 < d["C_hat"] < math.inf


def test_strong_family_single_entry():
    rep = strong_family(ProblemParams(N=2, q=2.0), GRID, [1.0], probes=(0.1,))
    assert rep.increasing and rep.saturated is None and rep.last_increment is None
    assert rep.s.shape == (1, 1)


def test_strong_family_monotone_and_bounded():
    params = ProblemParams(N=2, q=2.0)
    rep = strong_family(params, GRID, [1.0, 10.0, 100.0], probes=(0.05,))
    assert rep.increasing
    # scaled maxima are bounded by the constant solution's universal bound
    assert np.all(rep.s <= 4.0 * 1.05)
    with pytest.raises(DomainError):
        strong_family(params, GRID, [2.0, 1.0])


def test_large_strength_saturates():
    """Scaled maxima away from the inner arc grow ever more slowly as k increases."""
    params = ProblemParams(N=2, q=2.0)
    rep = strong_family(params, GRID, [1e2, 1e3, 1e4, 1e5], probes=(0.3,))
    inc = np.diff(rep.s[:, 0])
    assert np.all(inc > 0)
    assert np.all(inc[1:] < 0.5 * inc[:-1])


def test_removability_single_radius_not_asserted():
    rep = removability_experiment(ProblemParams(N=2, q=2.0, k=1.0), [1e-2], dt=0.1, n_phi=17)
    assert rep.verdict == "not_asserted" and len(rep.values) == 1


def test_removability_subcritical_stable():
    rep = removability_experiment(ProblemParams(N=2, q=2.0, k=1.0), [1e-2, 3e-3, 1e-3], dt=0.05, n_phi=17)
    assert rep.verdict == "stable"


def test_estimator():
    est = HalfspaceSolver(N=2, q=2.0, k=1.0, eps=1e-2, n_t=33, n_phi=17).fit()
    X = np.array([[0.5, 0.0], [0.5, math.pi / 2]])
    y = est.predict(X)
    assert y[0] > 0 and abs(y[1]) <= 1e-12
    with pytest.raises(DomainError):
        est.predict(np.zeros((2, 3)))


def test_settings_validation():
    with pytest.raises(DomainError):
        SolveSettings(damping=2.0)
