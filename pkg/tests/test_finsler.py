import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import crandn
from l1linf import finsler as fz
from l1linf.errors import NonUniqueSupport, OptimizerNoConvergence, XDerivativeUnavailable, ZeroVector

seeds = st.integers(0, 2 ** 32 - 1)
TAU = np.array([0.3 + 1.7j])


def brute_force_l1_dual(xi, rng, samples=1_000_000):
    """max Re(eta . xi) over sampled points of the l1 unit sphere.

    Moduli are Dirichlet(0.2) distributed (mass near the vertices) and phases uniform.
    """
    mod = rng.dirichlet(np.full(xi.size, 0.2), samples)
    eta = mod * np.exp(2j * np.pi * rng.uniform(size=(samples, xi.size)))
    return float(np.max(np.real(eta @ xi)))


# ---------------------------------------------------------------------------
# metrics

@pytest.mark.parametrize("make", [fz.l1_metric, fz.l2_metric, fz.linf_metric])
@given(seed=seeds, n=st.integers(1, 4))
def test_builtin_homogeneity_and_positivity(make, seed, n):
    rng = np.random.default_rng(seed)
    G = make(n)
    eta = crandn(rng, n)
    alpha = complex(*rng.standard_normal(2))
    assert G(None, alpha * eta) == pytest.approx(abs(alpha) * G(None, eta), rel=1e-10)
    assert G(None, eta) > 0


def test_metric_records_round_trip():
    for G in (fz.l1_metric(3), fz.linf_metric(2), fz.weighted_metric([1.0, 2.0], 1.5), fz.torus_l1_metric()):
        H = fz.metric_from_record(G.to_record())
        eta = np.array([1 + 2j] + [0.5] * (G.dim - 1))
        x = np.array([0.2 + 1.1j])
        assert H(x, eta) == G(x, eta)
    with pytest.raises(ValueError):
        fz.metric_from_record(fz.as_blackbox(fz.l1_metric(2)).to_record())


# ---------------------------------------------------------------------------
# dual metric

def test_l2_example():
    res = fz.dual_metric(fz.l2_metric(2), None, np.array([3, 4]))
    assert res.value == pytest.approx(5)
    np.testing.assert_allclose(res.maximizer, [0.6, 0.8])


def test_l1_example_against_brute_force(rng):
    xi = np.array([1, 2j, -3])
    G = fz.l1_metric(3)
    assert fz.dual_metric(G, None, xi).value == pytest.approx(3)
    # the sampled supremum approaches the closed form from below
    brute = brute_force_l1_dual(xi, rng)
    assert 2.99 < brute <= 3 + 1e-12


def test_torus_example():
    G = fz.torus_l1_metric()
    mu = np.array([1.5 - 0.5j])
    expected = abs(mu[0]) / (2 * TAU[0].imag)
    assert fz.dual_metric(G, TAU, mu).value == pytest.approx(expected, rel=1e-14)
    assert fz.dual_metric(fz.as_blackbox(G), TAU, mu, method="optimize").value == pytest.approx(expected, rel=1e-6)


@pytest.mark.parametrize("src,dst", [("l1", "linf"), ("linf", "l1"), ("l2", "l2")])
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_blackbox_dual_matches_closed_form(rng, src, dst, n):
    G = fz.as_blackbox(fz.BUILTINS[src](n))
    for _ in range(3):
        xi = crandn(rng, n)
        res = fz.dual_metric(G, None, xi, method="optimize")
        ref = fz.BUILTINS[dst](n)(None, xi)
        assert res.value == pytest.approx(ref, rel=1e-3)
        assert G(None, res.maximizer) == pytest.approx(1, abs=1e-8)
        assert np.real(res.maximizer @ xi) == pytest.approx(res.value, rel=1e-9)
        assert {"iterations", "multistart_count", "gap_estimate"} <= set(res.optimizer_report)


@given(seed=seeds)
@settings(max_examples=15)
def test_dual_is_homogeneous_and_convex(seed):
    rng = np.random.default_rng(seed)
    G = fz.as_blackbox(fz.l2_metric(2))
    xi1, xi2 = crandn(rng, 2, 2)
    alpha = complex(*rng.standard_normal(2))

    def F(v):
        return fz.dual_metric(G, None, v, method="optimize").value

    assert F(alpha * xi1) == pytest.approx(abs(alpha) * F(xi1), rel=1e-8)
    assert F(xi1 + xi2) <= F(xi1) + F(xi2) + 1e-8


def test_zero_vector_gives_zero():
    res = fz.dual_metric(fz.l1_metric(2), None, np.zeros(2))
    assert res.value == 0 and res.maximizer is None
    with pytest.raises(ZeroVector):
        fz.supporting_functional(fz.l1_metric(2), None, np.zeros(2))


def test_optimizer_reports_best_lower_bound():
    G = fz.as_blackbox(fz.l1_metric(3))
    with pytest.raises(OptimizerNoConvergence) as info:
        fz.dual_metric(G, None, np.array([1, 2j, -3]), method="optimize", gap_tol=1e-14)
    assert 0 < info.value.best_lower_bound <= 3 + 1e-9


def test_blackbox_seed_determinism():
    G = fz.as_blackbox(fz.linf_metric(3))
    xi = np.array([1 + 1j, -2, 0.5j])
    a = fz.dual_metric(G, None, xi, method="optimize", seed=7)
    b = fz.dual_metric(G, None, xi, method="optimize", seed=7)
    assert a.value == b.value


# ---------------------------------------------------------------------------
# supporting functional

def test_supporting_functional_examples():
    np.testing.assert_allclose(fz.supporting_functional(fz.l2_metric(2), None, np.array([1, 0])), [1, 0])
    eta = fz.supporting_functional(fz.torus_l1_metric(), np.array([1j]), np.array([1.0]))
    np.testing.assert_allclose(eta, [0.5])
    eta_bb = fz.supporting_functional(fz.as_blackbox(fz.torus_l1_metric()), np.array([1j]), np.array([1.0]),
                                      method="optimize")
    np.testing.assert_allclose(eta_bb, [0.5], atol=1e-6)


def test_l1_support_is_not_unique():
    with pytest.raises(NonUniqueSupport) as info:
        fz.supporting_functional(fz.l1_metric(2), None, np.array([1, 1]))
    w1, w2 = info.value.witnesses
    assert np.linalg.norm(w1 - w2) > 0.5
    with pytest.raises(NonUniqueSupport):
        fz.supporting_functional(fz.as_blackbox(fz.l1_metric(2)), None, np.array([1, 1]), method="optimize")


# ---------------------------------------------------------------------------
# directional derivative and Royden expansion

def test_directional_derivative_examples():
    G = fz.l2_metric(2)
    xi = np.array([1.0, 0])
    assert fz.directional_derivative_dual(G, None, xi, xi) == pytest.approx(1)
    assert fz.directional_derivative_dual(G, None, xi, np.array([0, 1.0])) == pytest.approx(0, abs=1e-15)


@given(seed=seeds)
def test_directional_derivative_against_finite_differences(seed):
    rng = np.random.default_rng(seed)
    G = fz.weighted_metric(rng.uniform(0.5, 2, 3), power=1.0)
    x = crandn(rng, 2)
    xi, h = crandn(rng, 2, 3)
    xi = xi / fz.dual_metric(G, x, xi).value
    step = 1e-5
    fd = (fz.dual_metric(G, x, xi + step * h).value - fz.dual_metric(G, x, xi - step * h).value) / (2 * step)
    assert abs(fz.directional_derivative_dual(G, x, xi, h) - fd) <= 1e-6


def test_royden_zero_displacement():
    assert fz.royden_expansion(fz.torus_l1_metric(), TAU, np.array([1.0]), 0, np.zeros(1)) == 0


def test_royden_torus_matches_closed_form_taylor_expansion():
    # F(tau, mu) = |mu| / (2 Im tau): dF = -|mu| Im(dtau) / (2 Im tau^2) + Re(conj(mu) dmu) / (2 |mu| Im tau)
    G = fz.torus_l1_metric()
    mu, dtau, dmu = 1 - 2j, 0.3 + 0.4j, -0.2 + 0.1j
    t = TAU[0].imag
    exact = -abs(mu) * dtau.imag / (2 * t * t) + (np.conj(mu) * dmu).real / (2 * abs(mu) * t)
    pred = fz.royden_expansion(G, TAU, np.array([mu]), dtau, np.array([dmu]))
    assert pred == pytest.approx(exact, rel=1e-12)


def test_royden_weighted_one_dimensional():
    # G = |x| |eta| on n = 1, F = |xi| / |x|
    G = fz.weighted_metric([1.0], power=1.0)
    x, xi, dx, dxi = np.array([0.6 + 0.8j]), np.array([2 - 1j]), 0.1 - 0.3j, np.array([0.2j])
    exact = (-abs(xi[0]) * (np.conj(x[0]) * dx).real / abs(x[0]) ** 3
             + (np.conj(xi[0]) * dxi[0]).real / (abs(xi[0]) * abs(x[0])))
    assert fz.royden_expansion(G, x, xi, dx, dxi) == pytest.approx(exact, rel=1e-12)


@pytest.mark.parametrize("G,x,n", [(fz.torus_l1_metric(), TAU, 1),
                                   (fz.weighted_metric([1.0, 3.0, 0.5], 1.5), np.array([0.4 + 0.9j, -0.3]), 3)])
def test_royden_residuals_decrease(rng, G, x, n):
    r = fz.royden_residuals(G, x, crandn(rng, n), crandn(rng, x.size), crandn(rng, n))
    assert r[0] > r[1] > r[2]


def test_royden_requires_x_derivative():
    with pytest.raises(XDerivativeUnavailable):
        fz.royden_expansion(fz.as_blackbox(fz.l2_metric(1)), None, np.ones(1), 1.0, np.ones(1))


# ---------------------------------------------------------------------------
# convexity and reflexivity

def test_convexity_probe_l2_strict(rng):
    rep = fz.convexity_probe(fz.l2_metric(3), None, rng=rng)
    assert rep.convexity_violations == 0 and rep.strict and rep.homogeneity_max_err < 1e-12


def test_convexity_probe_l1_has_flat_faces(rng):
    rep = fz.convexity_probe(fz.l1_metric(2), None, rng=rng)
    assert rep.convexity_violations == 0
    assert not rep.strict
    u, v = rep.strict_convexity_witnesses[0]
    assert fz.l1_metric(2)(None, 0.5 * (u + v)) == pytest.approx(1)


def test_convexity_probe_torus_strict(rng):
    rep = fz.convexity_probe(fz.torus_l1_metric(), TAU, rng=rng)
    assert rep.strict and rep.convexity_violations == 0


def test_convexity_probe_needs_two_samples():
    with pytest.raises(ValueError):
        fz.convexity_probe(fz.l2_metric(2), None, samples=1)


def test_dual_of_c1_metric_is_strictly_convex(rng):
    F = fz.dual_as_metric(fz.l2_metric(2), method="optimize")
    assert fz.convexity_probe(F, None, samples=20, rng=rng).strict


def test_reflexive_gaps(rng):
    pts = crandn(rng, 4, 2)
    assert fz.reflexive_duality_gap(fz.l2_metric(2), None, pts) <= 1e-6
    assert fz.reflexive_duality_gap(fz.l1_metric(2), None, pts, method="optimize") <= 1e-3
    q = crandn(rng, 4, 1)
    assert fz.reflexive_duality_gap(fz.torus_l1_metric(), TAU, q) <= 1e-12
