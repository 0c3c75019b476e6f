import numpy as np
import pytest

from qlsing import DomainError
from qlsing.transforms import (
    BoundaryChart,
    InversionSpec,
    conformal_residual,
    ellipticity_scan,
    extend_odd,
    extended_operator,
    field_residual,
    invert,
    project,
    reflect,
    reflect_jacobian,
    separable_sampler,
    signed_distance,
    tube_samples,
    weighted_equation_check,
)

BOX2 = ([-0.1, -0.7], [0.1, -0.5])


def _kernel(Y):
    return Y[:, -1] / np.sum(Y * Y, axis=1)


def test_inversion_is_involution_and_maps_half_space_to_ball():
    spec = InversionSpec.half_space_to_ball(3)
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 3))
    assert np.allclose(invert(spec, invert(spec, X)), X, atol=1e-10)
    Y = rng.normal(size=(50, 3))
    Y[:, -1] = np.abs(Y[:, -1]) + 0.01
    Z = invert(spec, Y)
    assert np.all(np.sum(Z * Z, axis=1) + Z[:, -1] < 0)
    with pytest.raises(DomainError):
        invert(spec, np.array([[0.0, 0.0, -1.0]]))
    with pytest.raises(DomainError):
        InversionSpec((0.0, 0.0), power=0.0)


def test_conformal_invariance_of_kernel():
    rep = conformal_residual(InversionSpec.half_space_to_ball(2), _kernel, BOX2)
    assert rep["residual_h2"] < rep["residual_h"]
    assert abs(rep["order"] - 2) < 0.1


def test_non_harmonic_control_has_no_convergence():
    rep = field_residual(lambda Y: np.sum(Y**3, axis=1), ([0.1, 0.1], [0.3, 0.3]))
    assert rep["residual_h2"] > 0.5 * rep["residual_h"]


def test_box_must_avoid_center():
    with pytest.raises(DomainError):
        conformal_residual(InversionSpec.half_space_to_ball(2), _kernel, ([-0.1, -1.1], [0.1, -0.9]))


def test_weighted_equation(profile_n2q2):
    spec = InversionSpec.half_space_to_ball(2)
    u = separable_sampler(profile_n2q2)
    w = weighted_equation_check(spec, u, 2.0, BOX2, h_fd=1e-3)
    plain = weighted_equation_check(spec, u, 2.0, BOX2, h_fd=1e-3, weighted=False)
    assert abs(w["order"] - 2) < 0.1
    assert w["residual_h2"] <= 1e-4 * w["scale"]
    assert plain["residual_h2"] > 0.1 * plain["scale"]


def test_separable_sampler_domain(profile_n2q2):
    u = separable_sampler(profile_n2q2)
    assert u(np.array([[0.0, 1.0]]))[0] == pytest.approx(profile_n2q2.lambda0)
    with pytest.raises(DomainError):
        u(np.array([[0.0, -1.0]]))


def test_chart_parsing_and_rescaling():
    ch = BoundaryChart.from_string("2,0:0.5; 0,2:0.5", 3)
    assert ch.h(np.array([1.0, 1.0])) == pytest.approx(1.0)
    assert BoundaryChart.from_string("flat", 3).is_flat
    with pytest.raises(DomainError):
        BoundaryChart.from_string("2,0", 3)
    r = ch.rescaled(0.01)
    assert r.h(np.array([1.0, 0.0])) == pytest.approx(0.005)


def test_projection_and_reflection():
    ch = BoundaryChart.parabolic(3, 1.0, 0.1)
    X = tube_samples(ch, 100, "both", seed=1)
    xi = project(ch, X)
    # nearest point lies on the boundary and the offset is normal
    assert np.allclose(xi[:, -1], ch.h(xi[:, :-1]), atol=1e-13)
    d = X - xi
    t = np.cross(d, ch.normal(xi[:, :-1]))
    assert np.max(np.linalg.norm(t, axis=1)) <= 1e-10
    P = reflect(ch, X)
    assert np.allclose(reflect(ch, P), X, atol=1e-10)
    B = ch.boundary_point(np.array([[0.1, -0.2]]))
    assert np.allclose(reflect(ch, B), B, atol=1e-13)
    sd = signed_distance(ch, X)
    assert np.all(np.sign(signed_distance(ch, P)) == -np.sign(sd))


def test_flat_reflection_and_jacobian():
    ch = BoundaryChart.flat(2)
    X = np.array([[0.3, 0.05], [-0.1, -0.02]])
    assert np.allclose(reflect(ch, X), X * [1, -1])
    assert np.allclose(reflect_jacobian(ch, X), np.diag([1.0, -1.0]))
    with pytest.raises(DomainError):
        reflect(ch, np.array([[0.0, 1.0]]))


def test_reflect_jacobian_against_differences():
    ch = BoundaryChart.parabolic(2, 2.0, 0.1)
    X = tube_samples(ch, 10, "outer", seed=3)
    J = reflect_jacobian(ch, X)
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (reflect(ch, X + e, check_tube=False) - reflect(ch, X - e, check_tube=False)) / (2 * h)
        assert np.allclose(J[:, :, j], fd, atol=1e-8)


def test_extend_odd():
    ch = BoundaryChart.parabolic(2, 1.0, 0.1)
    v = lambda X: X[:, -1] - ch.h(X[:, :-1])
    vt = extend_odd(ch, v)
    X = tube_samples(ch, 20, "inner", seed=2)
    assert np.allclose(vt(X), v(X))
    Y = reflect(ch, X)
    assert np.allclose(vt(Y), -v(X), atol=1e-12)
    with pytest.raises(DomainError):
        extend_odd(ch, lambda X: X[:, -1] + 1.0)


def test_extended_operator_flat_is_p_laplacian_flux():
    ch = BoundaryChart.flat(3)
    X = tube_samples(ch, 5, "outer")
    eta = np.array([0.3, -0.4, 1.2])
    A = extended_operator(ch, 3.0, X, eta)
    assert np.allclose(A, np.linalg.norm(eta) * eta)


@pytest.mark.parametrize("p", [1.5, 3.0, 4.0])
def test_ellipticity_flat(p):
    rep = ellipticity_scan(BoundaryChart.flat(3), p)
    assert rep.gamma == pytest.approx(min(1.0, p - 1.0), rel=1e-12)
    assert rep.b_min == rep.b_max == 1.0


def test_ellipticity_curved_and_flat_limit():
    ch = BoundaryChart.parabolic(3, 1.0, 0.1)
    rep = ellipticity_scan(ch, 3.0)
    assert 0 < rep.gamma <= rep.b_min <= rep.b_max <= rep.Gamma
    small = ellipticity_scan(ch.rescaled(1e-4), 3.0)
    assert small.gamma == pytest.approx(1.0, abs=1e-3)
