import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import crandn
from l1linf import jet_geometry as jg
from l1linf.charts import ChartTransition, PolynomialMap, transition_from_json, transition_to_json
from l1linf.errors import (
    BasePointMismatch,
    BundlePairMismatch,
    DerivativeUnavailable,
    DimensionMismatch,
    FiberPointMismatch,
    GradientUnavailable,
    SingularJacobian,
    WhitneyConstraintViolated,
    WrongBundleKind,
)
from l1linf.suites import random_transition

K = jg.BundleKind
seeds = st.integers(0, 2 ** 32 - 1)
dims = st.integers(1, 3)


def P(kind, *blocks):
    return jg.SecondOrderPoint(kind, *[np.atleast_1d(b) for b in blocks])


def square_map():
    return PolynomialMap([{(2,): 1.0}])


def assert_point_close(p, q, atol=1e-12):
    assert p.kind is q.kind
    for u, v in zip(p.as_tuple(), q.as_tuple()):
        np.testing.assert_allclose(u, v, atol=atol, rtol=0)


# ---------------------------------------------------------------------------
# charts

def test_polynomial_derivatives_match_finite_differences(rng):
    poly = PolynomialMap.random(rng, 2)
    z = 0.4 * crandn(rng, 2)
    fd = ChartTransition.from_callable(poly.value, z, h=1e-4)
    exact = ChartTransition.from_polynomial(poly, z)
    np.testing.assert_allclose(fd.J, exact.J, atol=1e-7)
    np.testing.assert_allclose(fd.hessian, exact.hessian, atol=1e-5)


def test_transition_inverse_data(rng):
    t = random_transition(rng, 3)
    assert t.inverse_residual < 1e-12
    np.testing.assert_allclose(t.J_dagger, np.linalg.inv(t.J).T)
    np.testing.assert_allclose(t.hessian, np.swapaxes(t.hessian, 1, 2))


def test_inverse_hessian_is_second_derivative_of_the_inverse_map():
    # w = z + z^2 has inverse z = (-1 + sqrt(1 + 4w)) / 2, z'' = -2 / (1 + 4w)^{3/2}
    t = ChartTransition.from_polynomial(PolynomialMap([{(1,): 1, (2,): 1}]), [0.3])
    w = 0.3 + 0.09
    assert t.inverse_hessian[0, 0, 0] == pytest.approx(-2 / (1 + 4 * w) ** 1.5)


def test_singular_jacobian_rejected():
    with pytest.raises(SingularJacobian):
        ChartTransition.from_polynomial(square_map(), [0.0])


def test_transition_json_round_trip(rng):
    poly = PolynomialMap.random(rng, 2)
    z = crandn(rng, 2) * 0.3
    poly2, t = transition_from_json(transition_to_json(poly, z))
    np.testing.assert_array_equal(t.J, ChartTransition.from_polynomial(poly, z).J)
    assert poly2.terms == poly.terms


# ---------------------------------------------------------------------------
# transport

def test_identity_transition_is_identity(rng):
    for kind in K:
        p = P(kind, *crandn(rng, 4, 2))
        assert_point_close(jg.transport(p, ChartTransition.identity(p.z)), p, atol=0)


def test_linear_transition_scales_every_block():
    t = ChartTransition.from_polynomial(PolynomialMap([{(1,): 2.0}]), [1.0])
    assert_point_close(jg.transport(P(K.TT, 1, 1, 1, 1), t), P(K.TT, 2, 2, 2, 2))


def test_square_map_example():
    t = ChartTransition.from_polynomial(square_map(), [1.0])
    assert_point_close(jg.transport(P(K.TT, 1, 1, 1, 0), t), P(K.TT, 1, 2, 2, 2))


def _image_velocity(t_fn, jac_fn, z, f, a, b, cotangent, h=1e-5):
    """Velocity of the image of the curve (z + s a, f + s b) under the chart change."""
    def image(s):
        zs, fs = z + s * a, f + s * b
        J = jac_fn(zs)
        fiber = np.linalg.solve(J.T, fs) if cotangent else J @ fs
        return t_fn(zs), fiber

    (w1, g1), (w0, g0) = image(h), image(-h)
    return (w1 - w0) / (2 * h), (g1 - g0) / (2 * h)


@pytest.mark.parametrize("kind", [K.TT, K.TTstar])
@given(seed=seeds, n=dims)
def test_transport_matches_image_of_curves(kind, seed, n):
    rng = np.random.default_rng(seed)
    poly = PolynomialMap.random(rng, n)
    z = 0.3 * crandn(rng, n)
    t = ChartTransition.from_polynomial(poly, z)
    f, a, b = crandn(rng, 3, n)
    out = jg.transport(P(kind, z, f, a, b), t)
    dw, dg = _image_velocity(poly.value, poly.jacobian, z, f, a, b, kind is K.TTstar)
    scale = max(1.0, np.max(np.abs(dg)))
    np.testing.assert_allclose(out.a, dw, atol=1e-6 * scale)
    np.testing.assert_allclose(out.b, dg, atol=1e-6 * scale)
    np.testing.assert_allclose(out.z, poly.value(z), atol=1e-14)


@given(seed=seeds, n=dims)
def test_transport_preserves_second_order_pairings(seed, n):
    rng = np.random.default_rng(seed)
    t = random_transition(rng, n)
    z = t.point
    for vec, cov in jg.DUAL_PAIRS:
        f = crandn(rng, n)
        V = P(vec, z, f, *crandn(rng, 2, n))
        Om = P(cov, z, f, *crandn(rng, 2, n))
        lhs = jg.pairing_second_order(jg.transport(V, t), jg.transport(Om, t))
        assert lhs == pytest.approx(jg.pairing_second_order(V, Om), rel=1e-9, abs=1e-9)


@given(seed=seeds, n=dims)
def test_transport_is_functorial(seed, n):
    """Transporting through w1 then w2 equals transporting through w2 o w1."""
    rng = np.random.default_rng(seed)
    p1 = PolynomialMap.random(rng, n, degree=2, scale=0.2)
    p2 = PolynomialMap.random(rng, n, degree=2, scale=0.2)
    z = 0.3 * crandn(rng, n)
    t1 = ChartTransition.from_polynomial(p1, z)
    w = p1.value(z)
    t2 = ChartTransition.from_polynomial(p2, w)
    J = t2.J @ t1.J
    H = np.einsum("iab,aj,bk->ijk", t2.hessian, t1.J, t1.J) + np.einsum("ia,ajk->ijk", t2.J, t1.hessian)
    t12 = ChartTransition(point=z, value=p2.value(w), jacobian=J, hessian=H)
    for kind in K:
        p = P(kind, z, *crandn(rng, 3, n))
        two_step = jg.transport(jg.transport(p, t1), t2)
        assert two_step.max_difference(jg.transport(p, t12)) < 1e-9 * max(1.0, np.max(np.abs(two_step.as_array())))


def test_transport_errors(rng):
    t = ChartTransition.identity([0.0, 0.0])
    with pytest.raises(DimensionMismatch):
        jg.transport(P(K.TT, 0, 1, 1, 1), t)
    with pytest.raises(BasePointMismatch):
        jg.transport(P(K.TT, [1, 0], [1, 0], [1, 0], [1, 0]), t)
    with pytest.raises(DimensionMismatch):
        jg.SecondOrderPoint(K.TT, [0, 0], [1], [1, 0], [0, 0])


# ---------------------------------------------------------------------------
# canonical maps

def test_coordinate_rules():
    assert_point_close(jg.flip(P(K.TT, 0, 1, 2, 3)), P(K.TT, 0, 2, 1, 3), atol=0)
    assert_point_close(jg.switch(P(K.TTstar, 0, 1, 2, 3)), P(K.TstarT, 0, 2, 3, 1), atol=0)
    assert_point_close(jg.dualize(P(K.TTstar, 0, 1, 2, 3)), P(K.TstarTstar, 0, 1, 3, -2), atol=0)


@given(seed=seeds, n=dims)
def test_maps_are_invertible(seed, n):
    rng = np.random.default_rng(seed)
    p = P(K.TT, *crandn(rng, 4, n))
    w = P(K.TTstar, *crandn(rng, 4, n))
    assert jg.flip(jg.flip(p)).max_difference(p) == 0.0
    assert jg.switch_inverse(jg.switch(w)).max_difference(w) == 0.0
    assert jg.dualize_inverse(jg.dualize(w)).max_difference(w) == 0.0


def test_projection_identities(rng):
    p = P(K.TT, *crandn(rng, 4, 2))
    np.testing.assert_array_equal(jg.horizontal_projection(jg.flip(p))[1], p.f)
    w = P(K.TTstar, *crandn(rng, 4, 2))
    s = jg.switch(w)
    np.testing.assert_array_equal(s.z, w.z)
    np.testing.assert_array_equal(s.f, w.a)
    np.testing.assert_array_equal(jg.vertical_projection(jg.dualize(w))[1], -w.a)


def test_wrong_kinds_rejected(rng):
    w = P(K.TTstar, *crandn(rng, 4, 1))
    with pytest.raises(WrongBundleKind):
        jg.flip(w)
    with pytest.raises(WrongBundleKind):
        jg.switch(P(K.TT, 0, 1, 2, 3))
    with pytest.raises(WrongBundleKind):
        jg.dualize(P(K.TstarT, 0, 1, 2, 3))
    with pytest.raises(WrongBundleKind):
        jg.dualize_inverse(w)


@pytest.mark.parametrize("kind_map", ["flip", "switch", "dualize"])
def test_square_map_equivariance(kind_map):
    fn, kind = {"flip": (jg.flip, K.TT), "switch": (jg.switch, K.TTstar), "dualize": (jg.dualize, K.TTstar)}[kind_map]
    t = ChartTransition.from_polynomial(square_map(), [1.0])
    p = P(kind, 1, 1, 1, 1) if kind_map != "flip" else P(kind, 1, 1, 2, 3)
    assert jg.transport(fn(p), t).max_difference(fn(jg.transport(p, t))) <= 1e-15


@pytest.mark.parametrize("which", ["flip", "switch", "dualize"])
@given(seed=seeds, n=dims)
def test_equivariance_property(which, seed, n):
    fn, kind = {"flip": (jg.flip, K.TT), "switch": (jg.switch, K.TTstar), "dualize": (jg.dualize, K.TTstar)}[which]
    rng = np.random.default_rng(seed)
    t = random_transition(rng, n)
    p = P(kind, t.point, *crandn(rng, 3, n))
    assert jg.transport(fn(p), t).max_difference(fn(jg.transport(p, t))) <= 1e-9


def test_points_are_immutable(rng):
    p = P(K.TT, *crandn(rng, 4, 2))
    with pytest.raises(ValueError):
        p.z[0] = 5
    src = crandn(rng, 2)
    q = jg.SecondOrderPoint(K.TT, src, src, src, src)
    src[0] = 99
    assert q.z[0] != 99


# ---------------------------------------------------------------------------
# pairings and the symplectic form

def test_pairing_base_examples(rng):
    assert jg.pairing_base(([0, 0], [1, 0]), ([0, 0], [0, 1])) == 0
    assert jg.pairing_base(([0, 0], [2, 3]), ([0, 0], [5, 7])) == 31
    eta, om, z = crandn(rng, 3, 3)
    a = complex(*rng.standard_normal(2))
    assert jg.pairing_base((z, a * eta), (z, om)) == pytest.approx(a * jg.pairing_base((z, eta), (z, om)))
    with pytest.raises(BasePointMismatch):
        jg.pairing_base(([0], [1]), ([1], [1]))


def test_pairing_second_order_examples():
    assert jg.pairing_second_order(P(K.TT, 0, 1, 1, 0), P(K.TstarT, 0, 1, 1, 0)) == 1
    with pytest.raises(BundlePairMismatch):
        jg.pairing_second_order(P(K.TT, 0, 1, 1, 0), P(K.TstarTstar, 0, 1, 1, 0))
    with pytest.raises(FiberPointMismatch):
        jg.pairing_second_order(P(K.TT, 0, 1, 1, 0), P(K.TstarT, 0, 2, 1, 0))


def test_symplectic_examples(rng):
    W = P(K.TTstar, *crandn(rng, 4, 2))
    assert jg.symplectic_form(W, W) == 0
    assert jg.symplectic_form(P(K.TTstar, 0, 0, 1, 0), P(K.TTstar, 0, 0, 0, 1)) == -0.5
    with pytest.raises(FiberPointMismatch):
        jg.symplectic_form(W, W.replace(f=W.f + 1))


@given(seed=seeds, n=dims)
def test_symplectic_antisymmetry_and_dual_relation(seed, n):
    rng = np.random.default_rng(seed)
    z, f = crandn(rng, 2, n)
    V = P(K.TTstar, z, f, *crandn(rng, 2, n))
    W = P(K.TTstar, z, f, *crandn(rng, 2, n))
    assert jg.symplectic_form(V, W) == pytest.approx(-jg.symplectic_form(W, V), abs=1e-14)
    assert jg.pairing_second_order(V, jg.dualize(W)) == pytest.approx(2 * jg.symplectic_form(W, V), abs=1e-13)


@given(seed=seeds)
def test_characterization_equations(seed):
    rng = np.random.default_rng(seed)
    n = 2
    z, eta, cov, vvert = crandn(rng, 4, n)
    V = P(K.TT, z, eta, *crandn(rng, 2, n))
    Om = P(K.TstarT, z, eta, *crandn(rng, 2, n))
    W = P(K.TTstar, z, cov, V.a, crandn(rng, n))
    r = jg.characterization_residuals(jg.pairing_second_order, (z, eta), cov, V, Om, vvert, W)
    assert max(r) < 1e-8


def test_perturbed_pairing_breaks_third_equation(rng):
    n = 2
    z, eta, cov, vvert = crandn(rng, 4, n)
    V = P(K.TT, z, eta, *crandn(rng, 2, n))
    Om = P(K.TstarT, z, eta, *crandn(rng, 2, n))
    W = P(K.TTstar, z, cov, V.a, crandn(rng, n))

    def perturbed(A, B):
        # a cross term a_1 B_2 vanishes on horizontal covectors and vertical vectors
        return jg.pairing_second_order(A, B) + 0.3 * A.a[0] * B.b[1]

    r = jg.characterization_residuals(perturbed, (z, eta), cov, V, Om, vvert, W)
    assert r[0] < 1e-12 and r[1] < 1e-12
    assert r[2] > 1e-3


# ---------------------------------------------------------------------------
# Hamiltonian fields

def test_constant_hamiltonian_has_zero_field():
    H = jg.ScalarFieldOnCotangent(lambda z, w: 3.0, lambda z, w: (np.zeros_like(z), np.zeros_like(w)))
    X = jg.hamiltonian_field(H, (np.array([1j]), np.array([2.0])))
    assert not np.any(X.a) and not np.any(X.b)


def test_hamiltonian_example_omega_z():
    H = jg.ScalarFieldOnCotangent(lambda z, w: w[0] * z[0], lambda z, w: (w, z))
    z, w = 0.7 - 0.2j, 1.5 + 0.5j
    assert_point_close(jg.hamiltonian_field(H, ([z], [w])), P(K.TTstar, z, w, -2 * z, 2 * w))
    Hfd = jg.ScalarFieldOnCotangent(lambda z, w: w[0] * z[0], gradient_mode=jg.GradientMode.finite_difference)
    assert_point_close(jg.hamiltonian_field(Hfd, ([z], [w])), P(K.TTstar, z, w, -2 * z, 2 * w), atol=1e-9)


@given(seed=seeds)
def test_hamiltonian_defining_identity(seed):
    rng = np.random.default_rng(seed)
    c = crandn(rng, 2)

    def value(z, w):
        return np.sum(c * z * z * w) + np.sum(np.abs(w) ** 2)

    def grad(z, w):
        return 2 * c * z * w, c * z * z + np.conj(w)

    H = jg.ScalarFieldOnCotangent(value, grad)
    z, w = crandn(rng, 2, 2)
    X = jg.hamiltonian_field(H, (z, w))
    V = P(K.TTstar, z, w, *crandn(rng, 2, 2))
    dH = H.d(z, w)
    assert abs(jg.symplectic_form(X, V) - (np.sum(dH.a * V.a) + np.sum(dH.b * V.b))) <= 1e-8


def test_fd_gradient_matches_analytic(rng):
    def value(z, w):
        return np.abs(w[0]) ** 2 * z[0].imag ** 2

    def grad(z, w):
        return np.array([-1j * abs(w[0]) ** 2 * z[0].imag]), np.array([np.conj(w[0]) * z[0].imag ** 2])

    H = jg.ScalarFieldOnCotangent(value, grad)
    Hfd = jg.ScalarFieldOnCotangent(value, gradient_mode=jg.GradientMode.finite_difference)
    z, w = np.array([0.3 + 1.2j]), np.array([0.5 - 0.4j])
    for u, v in zip(H.gradient(z, w), Hfd.gradient(z, w)):
        np.testing.assert_allclose(u, v, atol=1e-9)


def test_missing_gradient():
    with pytest.raises(GradientUnavailable):
        jg.hamiltonian_field(jg.ScalarFieldOnCotangent(lambda z, w: 0.0), ([0], [1]))


# ---------------------------------------------------------------------------
# Lie brackets

def _field(rng, n):
    return jg.VectorField10.from_polynomial(PolynomialMap.random(rng, n, degree=3, scale=0.5))


def test_bracket_examples():
    X = jg.VectorField10(lambda z: np.ones(1), lambda z: np.zeros((1, 1)))
    Y = jg.VectorField10(lambda z: z, lambda z: np.eye(1))
    assert jg.lie_bracket(X, Y, [1.0])[0] == 1
    assert jg.lie_bracket_via_flip(X, Y, [1.0])[0] == 1
    assert not np.any(jg.lie_bracket(Y, Y, [0.3]))


@given(seed=seeds, n=dims)
def test_bracket_two_routes_agree(seed, n):
    rng = np.random.default_rng(seed)
    X, Y = _field(rng, n), _field(rng, n)
    p = 0.5 * crandn(rng, n)
    np.testing.assert_allclose(jg.lie_bracket(X, Y, p), jg.lie_bracket_via_flip(X, Y, p), atol=1e-9)


@given(seed=seeds)
def test_jacobi_identity(seed):
    rng = np.random.default_rng(seed)
    X, Y, Z = (_field(rng, 2) for _ in range(3))
    p = 0.5 * crandn(rng, 2)
    total = (jg.lie_bracket(X, jg.bracket_field(Y, Z), p) + jg.lie_bracket(Y, jg.bracket_field(Z, X), p)
             + jg.lie_bracket(Z, jg.bracket_field(X, Y), p))
    assert np.max(np.abs(total)) <= 1e-9


def test_fd_derivative_mode_and_missing_derivative(rng):
    poly = PolynomialMap.random(rng, 2)
    Xfd = jg.VectorField10(poly.value, derivative_mode=jg.GradientMode.finite_difference)
    np.testing.assert_allclose(Xfd.jacobian([0.1, 0.2j]), poly.jacobian([0.1, 0.2j]), atol=1e-8)
    with pytest.raises(DerivativeUnavailable):
        jg.VectorField10(poly.value).jacobian([0, 0])


# ---------------------------------------------------------------------------
# derivative of the pairing

def test_pairing_derivative_constant_curves():
    c = jg.Curve.polynomial([[0.2]], [[1.0]])
    d = jg.Curve.polynomial([[0.2]], [[2.0]])
    assert jg.pairing_derivative_check(c, d) == 0


def test_pairing_derivative_hand_example():
    cv = jg.Curve.polynomial([[0.0], [1.0]], [[1.0], [1.0]])
    cw = jg.Curve.polynomial([[0.0], [1.0]], [[2.0], [3.0]])
    assert jg.pairing_derivative_check(cv, cw, h=1e-5) <= 1e-8
    V1, V2 = cv.tangent(K.TT), cw.tangent(K.TTstar)
    assert jg.pairing_second_order(jg.flip(V1), jg.switch(V2)) == pytest.approx(5)


@given(seed=seeds)
def test_pairing_derivative_random_curves(seed):
    rng = np.random.default_rng(seed)
    zc = crandn(rng, 4, 2)
    cv = jg.Curve.polynomial(zc, crandn(rng, 4, 2))
    cw = jg.Curve.polynomial(zc, crandn(rng, 4, 2))
    assert jg.pairing_derivative_check(cv, cw, h=1e-5) <= 1e-6
    ratio = jg.pairing_derivative_check(cv, cw, h=1e-3) / jg.pairing_derivative_check(cv, cw, h=5e-4)
    assert 3.5 <= ratio <= 4.5


def test_whitney_constraint():
    cv = jg.Curve.polynomial([[0.0], [1.0]], [[1.0], [1.0]])
    cw = jg.Curve.polynomial([[0.0], [2.0]], [[2.0], [3.0]])
    with pytest.raises(WhitneyConstraintViolated):
        jg.pairing_derivative_check(cv, cw)
