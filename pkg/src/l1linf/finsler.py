"""Convex complex-homogeneous Finsler metrics, their duals and Royden's criterion.

Gradients of real functions of a complex vector use the convention

    d G(x, eta)[h] = Re(g . h),   g = fiber_gradient(x, eta),

so that for a unit maximiser ``eta`` of the dual problem the derivative of the
dual metric is ``dF[h] = Re(eta . h)`` and ``eta`` itself is the gradient of F.
The ``x_derivative`` of a metric is the complex-linear part ``A`` of the
expansion ``G(x + dx, eta) = G + A(dx) + conj(A(dx)) + o(|dx|)``, returned as
a coefficient vector ``a`` with ``A(dx) = sum a_j dx_j``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    GradientUnavailable,
    NonUniqueSupport,
    OptimizerNoConvergence,
    XDerivativeUnavailable,
    ZeroVector,
)

DEFAULT_STARTS = 64
MAX_ITER = 200
REL_STEP_TOL = 1e-10
FD_STEP = 1e-7
STRICT_MARGIN = 1e-9
UNIQUENESS_TOL = 1e-3
ELLIPSOID_MAX_ITER = 6000
ELLIPSOID_TOL = 1e-9


class MetricKind(enum.Enum):
    builtin_l1 = "builtin_l1"
    builtin_l2 = "builtin_l2"
    builtin_linf = "builtin_linf"
    builtin_weighted = "builtin_weighted"
    torus_L1 = "torus_L1"
    torus_teich = "torus_teich"
    blackbox = "blackbox"


@dataclass(frozen=True)
class SupportResult:
    value: float
    maximizer: np.ndarray | None
    optimizer_report: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FinslerMetric:
    """A fiberwise norm G(x, eta) on C^dim.

    ``evaluate`` accepts a single fiber vector of shape (dim,).  When
    ``vectorized`` is set it must also accept a stack of shape (k, dim) and
    return k values; the optimiser batches its work through that path.
    ``closed_dual`` optionally returns ``(value, maximizer)`` of the dual
    problem in closed form.
    """

    evaluate: Callable
    dim: int
    kind: MetricKind = MetricKind.blackbox
    fiber_gradient: Callable | None = None
    x_derivative: Callable | None = None
    closed_dual: Callable | None = None
    dual_kind: Callable | None = None
    claims_convex: bool = True
    claims_strictly_convex: bool = False
    claims_C1_in_fiber: bool = False
    vectorized: bool = False
    params: dict = field(default_factory=dict)

    def __call__(self, x, eta) -> float:
        return float(self.evaluate(x, np.asarray(eta, dtype=complex)))

    def batch(self, x, etas: np.ndarray) -> np.ndarray:
        etas = np.asarray(etas, dtype=complex)
        if self.vectorized:
            return np.asarray(self.evaluate(x, etas), dtype=float)
        return np.array([self.evaluate(x, e) for e in etas], dtype=float)

    def gradient(self, x, eta) -> np.ndarray:
        if self.fiber_gradient is None:
            raise GradientUnavailable("metric has no analytic fiber gradient")
        return np.asarray(self.fiber_gradient(x, np.asarray(eta, dtype=complex)), dtype=complex)

    def to_record(self) -> dict:
        return {"kind": self.kind.value, "dim": self.dim, "params": _jsonable(self.params)}


def _jsonable(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if isinstance(v, np.ndarray):
            v = v.tolist()
        if isinstance(v, complex):
            v = [v.real, v.imag]
        out[k] = v
    return out


# ---------------------------------------------------------------------------
# builtin metrics

def _xnorm(x) -> float:
    return float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=complex))))


def _phase(v: np.ndarray) -> np.ndarray:
    mod = np.abs(v)
    return np.where(mod > 0, np.conj(v) / np.where(mod > 0, mod, 1.0), 0.0)


def l2_metric(dim: int) -> FinslerMetric:
    def dual(x, xi):
        r = np.linalg.norm(xi)
        return r, np.conj(xi) / r

    return FinslerMetric(
        evaluate=lambda x, eta: np.linalg.norm(eta, axis=-1),
        dim=dim, kind=MetricKind.builtin_l2,
        fiber_gradient=lambda x, eta: np.conj(eta) / np.linalg.norm(eta),
        x_derivative=lambda x, eta: np.zeros(np.size(x) if x is not None else 1, dtype=complex),
        closed_dual=dual, dual_kind=lambda: l2_metric(dim),
        claims_strictly_convex=True, claims_C1_in_fiber=True, vectorized=True)


def l1_metric(dim: int) -> FinslerMetric:
    def dual(x, xi):
        mod = np.abs(xi)
        k = int(np.argmax(mod))
        eta = np.zeros(dim, dtype=complex)
        eta[k] = np.conj(xi[k]) / mod[k]
        return float(mod[k]), eta

    return FinslerMetric(
        evaluate=lambda x, eta: np.sum(np.abs(eta), axis=-1),
        dim=dim, kind=MetricKind.builtin_l1,
        fiber_gradient=lambda x, eta: _phase(eta),
        x_derivative=lambda x, eta: np.zeros(np.size(x) if x is not None else 1, dtype=complex),
        closed_dual=dual, dual_kind=lambda: linf_metric(dim),
        claims_C1_in_fiber=False, vectorized=True)


def linf_metric(dim: int) -> FinslerMetric:
    def dual(x, xi):
        return float(np.sum(np.abs(xi))), _phase(xi).astype(complex)

    return FinslerMetric(
        evaluate=lambda x, eta: np.max(np.abs(eta), axis=-1),
        dim=dim, kind=MetricKind.builtin_linf,
        x_derivative=lambda x, eta: np.zeros(np.size(x) if x is not None else 1, dtype=complex),
        closed_dual=dual, dual_kind=lambda: l1_metric(dim),
        claims_C1_in_fiber=False, vectorized=True)


def weighted_metric(weights, power: float = 1.0) -> FinslerMetric:
    """G(x, eta) = |x|^p sqrt(sum w_k |eta_k|^2) with positive weights.

    The dual is |x|^{-p} sqrt(sum |xi_k|^2 / w_k).
    """
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    p = float(power)
    dim = w.size

    def evaluate(x, eta):
        return _xnorm(x) ** p * np.sqrt(np.sum(w * np.abs(eta) ** 2, axis=-1))

    def gradient(x, eta):
        s = np.sqrt(np.sum(w * np.abs(eta) ** 2))
        return _xnorm(x) ** p * w * np.conj(eta) / s

    def x_derivative(x, eta):
        x = np.atleast_1d(np.asarray(x, dtype=complex))
        r = _xnorm(x)
        s = np.sqrt(np.sum(w * np.abs(eta) ** 2))
        return 0.5 * p * r ** (p - 2) * np.conj(x) * s

    def dual(x, xi):
        r = _xnorm(x) ** p
        N = np.sqrt(np.sum(np.abs(xi) ** 2 / w))
        return float(N / r), np.conj(xi) / (w * r * N)

    return FinslerMetric(
        evaluate=evaluate, dim=dim, kind=MetricKind.builtin_weighted,
        fiber_gradient=gradient, x_derivative=x_derivative, closed_dual=dual,
        dual_kind=lambda: weighted_metric(1.0 / w, -p),
        claims_strictly_convex=True, claims_C1_in_fiber=True, vectorized=True,
        params={"weights": w, "power": p})


def _imtau(x) -> float:
    return float(np.imag(np.atleast_1d(np.asarray(x, dtype=complex))[0]))


def torus_l1_metric() -> FinslerMetric:
    """G(tau, q) = 2|q| Im(tau) on the one-dimensional fiber over the upper half plane."""

    def dual(x, xi):
        t = _imtau(x)
        mu = complex(np.atleast_1d(xi)[0])
        return abs(mu) / (2 * t), np.array([np.conj(mu) / (2 * abs(mu) * t)])

    return FinslerMetric(
        evaluate=lambda x, q: 2 * np.abs(np.asarray(q)[..., 0]) * _imtau(x),
        dim=1, kind=MetricKind.torus_L1,
        fiber_gradient=lambda x, q: 2 * _imtau(x) * _phase(np.asarray(q)),
        x_derivative=lambda x, q: np.array([-1j * abs(complex(np.atleast_1d(q)[0]))]),
        closed_dual=dual, dual_kind=torus_teich_metric,
        claims_strictly_convex=True, claims_C1_in_fiber=True, vectorized=True)


def torus_teich_metric() -> FinslerMetric:
    """G(tau, mu) = |mu| / (2 Im(tau)), the dual of :func:`torus_l1_metric`."""

    def dual(x, mu):
        t = _imtau(x)
        m = complex(np.atleast_1d(mu)[0])
        return 2 * abs(m) * t, np.array([2 * t * np.conj(m) / abs(m)])

    return FinslerMetric(
        evaluate=lambda x, mu: np.abs(np.asarray(mu)[..., 0]) / (2 * _imtau(x)),
        dim=1, kind=MetricKind.torus_teich,
        fiber_gradient=lambda x, mu: _phase(np.asarray(mu)) / (2 * _imtau(x)),
        x_derivative=lambda x, mu: np.array([1j * abs(complex(np.atleast_1d(mu)[0])) / (4 * _imtau(x) ** 2)]),
        closed_dual=dual, dual_kind=torus_l1_metric,
        claims_strictly_convex=True, claims_C1_in_fiber=True, vectorized=True)


BUILTINS = {
    "l1": l1_metric,
    "l2": l2_metric,
    "linf": linf_metric,
}


def metric_from_record(record: dict) -> FinslerMetric:
    """Rebuild a metric from ``{kind, dim, params}``."""
    kind = MetricKind(record["kind"])
    dim = int(record.get("dim", 1))
    params = record.get("params", {}) or {}
    if kind is MetricKind.builtin_l1:
        return l1_metric(dim)
    if kind is MetricKind.builtin_l2:
        return l2_metric(dim)
    if kind is MetricKind.builtin_linf:
        return linf_metric(dim)
    if kind is MetricKind.builtin_weighted:
        return weighted_metric(params.get("weights", [1.0] * dim), params.get("power", 1.0))
    if kind is MetricKind.torus_L1:
        return torus_l1_metric()
    if kind is MetricKind.torus_teich:
        return torus_teich_metric()
    raise ValueError("blackbox metrics cannot be rebuilt from a record")


def as_blackbox(G: FinslerMetric) -> FinslerMetric:
    """Same values, but with every analytic shortcut removed."""
    return FinslerMetric(evaluate=G.evaluate, dim=G.dim, kind=MetricKind.blackbox,
                         claims_convex=G.claims_convex,
                         claims_strictly_convex=G.claims_strictly_convex,
                         claims_C1_in_fiber=G.claims_C1_in_fiber,
                         vectorized=G.vectorized)


# ---------------------------------------------------------------------------
# dual metric

def _as_fiber(xi, dim: int) -> np.ndarray:
    xi = np.atleast_1d(np.asarray(xi, dtype=complex))
    if xi.shape != (dim,):
        raise ValueError(f"fiber vector has shape {xi.shape}, metric dimension is {dim}")
    return xi


def _start_points(dim: int, xi: np.ndarray, starts: int, seed: int) -> np.ndarray:
    children = np.random.SeedSequence(seed).spawn(starts)
    Z = np.empty((starts, dim), dtype=complex)
    Z[0] = np.conj(xi)
    for s in range(1, starts):
        rng = np.random.Generator(np.random.PCG64(children[s]))
        Z[s] = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return Z


def _ascent(G: FinslerMetric, x, xi: np.ndarray, Z: np.ndarray, max_iter: int, rel_step_tol: float):
    """Projected gradient ascent of Re(z . xi) / G(x, z) for a batch of starts."""
    S, n = Z.shape
    Z = Z / G.batch(x, Z)[:, None]
    vals = np.real(Z @ xi)
    step = np.full(S, 0.25)
    active = np.ones(S, dtype=bool)
    eye = np.eye(n)
    # real and imaginary unit perturbations, stacked: shape (4n, n)
    dirs = np.concatenate([eye, -eye, 1j * eye, -1j * eye]).astype(complex)
    iterations = 0
    for it in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        iterations = it + 1
        Za = Z[idx]
        scale = np.linalg.norm(Za, axis=1)
        if G.fiber_gradient is not None:
            g = np.array([G.gradient(x, z) for z in Za])
            grad = xi[None, :] - vals[idx, None] * g
        else:
            h = FD_STEP * scale
            pts = Za[:, None, :] + h[:, None, None] * dirs[None, :, :]
            num = np.real(pts @ xi)
            den = G.batch(x, pts.reshape(-1, n)).reshape(pts.shape[:2])
            f = num / den
            d_re = (f[:, :n] - f[:, n:2 * n]) / (2 * h[:, None])
            d_im = (f[:, 2 * n:3 * n] - f[:, 3 * n:]) / (2 * h[:, None])
            grad = d_re - 1j * d_im
        direction = np.conj(grad)
        norm = np.linalg.norm(direction, axis=1)
        norm = np.where(norm > 0, norm, 1.0)
        trial = Za + (step[idx] * scale / norm)[:, None] * direction
        trial = trial / G.batch(x, trial)[:, None]
        tv = np.real(trial @ xi)
        better = tv > vals[idx]
        acc = idx[better]
        Z[acc] = trial[better]
        vals[acc] = tv[better]
        step[acc] *= 1.5
        step[idx[~better]] *= 0.5
        active[idx] = step[idx] > rel_step_tol
    return Z, vals, iterations


def _cutting_plane_refine(G: FinslerMetric, x, xi: np.ndarray, z0: np.ndarray,
                          max_iter: int = ELLIPSOID_MAX_ITER, tol: float = ELLIPSOID_TOL):
    """Ellipsoid method for 1/F = min { G(x, z) : Re(z . xi) = 1 }.

    The constrained problem is convex, so cuts from (finite-difference)
    subgradients bracket its minimum: ``U`` is the best value seen and ``L``
    the best lower bound from the supporting hyperplanes.  Returns the unit
    maximiser, F = 1/U and the relative bracket width (1/L - 1/U) / F.
    """
    n = xi.size
    c = np.concatenate([xi.real, -xi.imag])
    r0 = c / np.dot(c, c)
    Q = np.linalg.svd(c[None, :])[2][1:].T
    d = Q.shape[1]

    def embed(u):
        r = r0 + u @ Q.T
        return r[..., :n] + 1j * r[..., n:]

    z0 = z0 / np.real(z0 @ xi)
    u = Q.T @ (np.concatenate([z0.real, z0.imag]) - r0)
    # euclidean radius of a ball surely containing the minimiser
    probe = np.random.default_rng(0).standard_normal((256, 2 * n)) @ np.eye(2 * n)
    probe = probe[:, :n] + 1j * probe[:, n:]
    probe /= np.linalg.norm(probe, axis=1)[:, None]
    lower_modulus = 0.5 * G.batch(x, probe).min()
    g0 = G(x, z0)
    R = 2 * (np.linalg.norm(z0) + g0 / lower_modulus)
    P = np.eye(d) * R**2
    E = np.eye(d)
    best_u, U, L = u.copy(), g0, -np.inf
    it = 0
    for it in range(1, max_iter + 1):
        h = FD_STEP * 1e-2 * np.linalg.norm(embed(u))
        vals = G.batch(x, embed(np.concatenate([u + h * E, u - h * E])))
        g = (vals[:d] - vals[d:]) / (2 * h)
        gc = G(x, embed(u))
        if gc < U:
            U, best_u = gc, u.copy()
        Pg = P @ g
        s = np.sqrt(max(float(g @ Pg), 0.0))
        L = max(L, gc - s)
        if s == 0 or U - L < tol * U:
            break
        gt = Pg / s
        u = u - gt / (d + 1)
        P = (d * d / (d * d - 1.0)) * (P - (2.0 / (d + 1)) * np.outer(gt, gt))
    gap = (U / L - 1.0) if L > 0 else float("inf")
    return embed(best_u) / U, 1.0 / U, gap, it


def dual_metric(G: FinslerMetric, x, xi, method: str = "auto", starts: int = DEFAULT_STARTS,
                seed: int = 0, max_iter: int = MAX_ITER, gap_tol: float = 1e-3) -> SupportResult:
    """F(x, xi) = sup { Re(eta . xi) : G(x, eta) = 1 }.

    ``method`` is ``"analytic"`` (closed form, error if absent), ``"optimize"``
    or ``"auto"`` (closed form when available).  The optimiser runs a batched
    multistart ascent; for metrics not claiming a C^1 fiber, or when the starts
    disagree, the best start is refined by a cutting-plane bracket whose
    relative width becomes the reported ``gap_estimate``.  ``xi = 0`` gives
    value 0 and no maximiser.
    """
    xi = _as_fiber(xi, G.dim)
    if not np.any(xi):
        return SupportResult(0.0, None, {"method": "zero"})
    if method not in ("auto", "analytic", "optimize"):
        raise ValueError(f"unknown method {method!r}")
    if method != "optimize" and G.closed_dual is not None:
        value, eta = G.closed_dual(x, xi)
        return SupportResult(float(value), np.asarray(eta, dtype=complex),
                             {"method": "analytic", "iterations": 0, "multistart_count": 0, "gap_estimate": 0.0})
    if method == "analytic":
        raise GradientUnavailable("no closed-form dual for this metric")
    Z, vals, iterations = _ascent(G, x, xi, _start_points(G.dim, xi, starts, seed), max_iter, REL_STEP_TOL)
    order = np.argsort(-vals)
    Z, vals = Z[order], vals[order]
    top = vals[: max(2, starts // 8)]
    spread = float((top[0] - top[-1]) / abs(top[0]))
    report = {"method": "optimize", "iterations": iterations, "multistart_count": starts,
              "gap_estimate": spread, "_points": Z, "_values": vals}
    eta, value = Z[0].copy(), float(vals[0])
    if G.dim > 1 and (not G.claims_C1_in_fiber or spread > gap_tol):
        eta_r, value_r, bracket, cuts = _cutting_plane_refine(G, x, xi, Z[0])
        report.update(refinement="cutting_plane", cuts=cuts, gap_estimate=bracket)
        if value_r > value:
            eta, value = eta_r, float(np.real(eta_r @ xi))
    if report["gap_estimate"] > gap_tol:
        raise OptimizerNoConvergence(
            f"optimizer gap estimate {report['gap_estimate']:.3e} exceeds {gap_tol:g}", best_lower_bound=value)
    return SupportResult(value, eta, report)


def supporting_functional(G: FinslerMetric, x, xi, tol: float = UNIQUENESS_TOL,
                          candidates: int = 4, **opts) -> np.ndarray:
    """The unit maximiser of the dual problem, checked for uniqueness.

    On the optimiser path the best ``candidates`` starts are each refined;
    maximisers that differ by more than ``tol`` at equal value raise
    :class:`NonUniqueSupport`.
    """
    xi = _as_fiber(xi, G.dim)
    if not np.any(xi):
        raise ZeroVector("the supporting functional of the zero vector is undefined")
    res = dual_metric(G, x, xi, **opts)
    if res.optimizer_report.get("method") == "analytic":
        _check_closed_form_uniqueness(G, xi)
        return res.maximizer
    if G.dim == 1:
        return res.maximizer
    pts = res.optimizer_report["_points"]
    found = [res.maximizer]
    for z in pts[1:candidates]:
        eta, value, _, _ = _cutting_plane_refine(G, x, xi, z)
        if abs(value - res.value) <= 1e-6 * res.value:
            found.append(eta)
    for eta in found[1:]:
        if np.linalg.norm(eta - found[0]) > tol:
            raise NonUniqueSupport("distinct maximisers attain the same value", witnesses=(found[0], eta))
    return res.maximizer


def _check_closed_form_uniqueness(G: FinslerMetric, xi: np.ndarray) -> None:
    mod = np.abs(xi)
    if G.kind is MetricKind.builtin_l1:
        top = np.flatnonzero(mod >= mod.max() * (1 - 1e-12))
        if top.size > 1:
            wit = []
            for k in top[:2]:
                e = np.zeros(G.dim, dtype=complex)
                e[k] = np.conj(xi[k]) / mod[k]
                wit.append(e)
            raise NonUniqueSupport("several coordinates attain the maximum modulus", witnesses=tuple(wit))
    if G.kind is MetricKind.builtin_linf and np.any(mod == 0):
        raise NonUniqueSupport("zero coordinates leave the maximiser free in those slots",
                               witnesses=(_phase(xi), _phase(xi) + (mod == 0)))


class _DualEvaluator:
    def __init__(self, G: FinslerMetric, opts: dict):
        self.G = G
        self.opts = opts

    def value(self, x, xi):
        return dual_metric(self.G, x, xi, **self.opts).value

    def gradient(self, x, xi):
        res = dual_metric(self.G, x, xi, **self.opts)
        if res.maximizer is None:
            raise GradientUnavailable("the dual metric is not differentiable at zero")
        return res.maximizer


def dual_as_metric(G: FinslerMetric, method: str = "auto", **opts) -> FinslerMetric:
    """F = dual(G) as a metric in its own right.

    With closed forms available the builtin dual is returned.  Otherwise F is
    evaluated by optimisation and its fiber gradient is the maximiser.
    """
    if method != "optimize" and G.dual_kind is not None:
        return G.dual_kind()
    ev = _DualEvaluator(G, dict(method=method, **opts))
    return FinslerMetric(evaluate=ev.value, dim=G.dim, kind=MetricKind.blackbox,
                         fiber_gradient=ev.gradient, claims_C1_in_fiber=G.claims_strictly_convex)


def directional_derivative_dual(G: FinslerMetric, x, xi, h, **opts) -> float:
    """d/dt F(x, xi + t h) at t = 0, equal to Re(eta_0 . h).

    F is positively homogeneous of degree one, so the maximiser (and hence this
    derivative) does not depend on the normalisation of ``xi``.
    """
    eta = supporting_functional(G, x, xi, **opts)
    return float(np.real(np.sum(eta * _as_fiber(h, G.dim))))


def royden_expansion(G: FinslerMetric, x, xi, dx, dxi, **opts) -> float:
    """First-order change of F: -F 2 Re(A_{x,eta}(dx)) + Re(eta(dxi))."""
    if G.x_derivative is None:
        raise XDerivativeUnavailable("metric has no x-derivative")
    xi = _as_fiber(xi, G.dim)
    dx = np.atleast_1d(np.asarray(dx, dtype=complex))
    dxi = _as_fiber(dxi, G.dim)
    if not np.any(dx) and not np.any(dxi):
        return 0.0
    res = dual_metric(G, x, xi, **opts)
    eta = res.maximizer
    a = np.atleast_1d(np.asarray(G.x_derivative(x, eta), dtype=complex))
    return float(-res.value * 2 * np.real(np.sum(a * dx)) + np.real(np.sum(eta * dxi)))


def royden_residuals(G: FinslerMetric, x, xi, dx, dxi, scales=(1e-2, 1e-3, 1e-4), **opts) -> list[float]:
    """|F(x + s dx, xi + s dxi) - F(x, xi) - prediction| / (|s dx| + |s dxi|) per scale."""
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    dx = np.atleast_1d(np.asarray(dx, dtype=complex))
    xi = _as_fiber(xi, G.dim)
    dxi = _as_fiber(dxi, G.dim)
    F0 = dual_metric(G, x, xi, **opts).value
    out = []
    for s in scales:
        F1 = dual_metric(G, x + s * dx, xi + s * dxi, **opts).value
        pred = royden_expansion(G, x, xi, s * dx, s * dxi, **opts)
        out.append(abs(F1 - F0 - pred) / (np.linalg.norm(s * dx) + np.linalg.norm(s * dxi)))
    return out


# ---------------------------------------------------------------------------
# probes

@dataclass
class ConvexityReport:
    homogeneity_max_err: float
    convexity_violations: int
    strict_convexity_witnesses: list
    modulus: dict

    @property
    def strict(self) -> bool:
        return not self.strict_convexity_witnesses


def _random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def convexity_probe(G: FinslerMetric, x, samples: int = 200, rng: np.random.Generator | None = None,
                    margin: float = STRICT_MARGIN, max_witnesses: int = 5) -> ConvexityReport:
    """Sampled checks of homogeneity, the triangle inequality and strict convexity.

    Besides random pairs the strictness test includes structured candidates
    (pairs of coordinate vectors and pairs sharing coordinate phases), which
    is where flat pieces of non-strictly convex unit spheres live.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(0) if rng is None else rng
    n = G.dim
    A = _random_complex(rng, (samples, n))
    B = _random_complex(rng, (samples, n))
    alpha = _random_complex(rng, samples)
    gA, gB = G.batch(x, A), G.batch(x, B)
    homog = np.abs(G.batch(x, alpha[:, None] * A) - np.abs(alpha) * gA) / (np.abs(alpha) * gA)
    violations = int(np.sum(G.batch(x, A + B) > (gA + gB) * (1 + 1e-12)))

    # candidate pairs for strictness
    U = [A / gA[:, None]]
    V = [B / gB[:, None]]
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, (samples, n)))
    U.append(phases * np.abs(A))
    V.append(phases * np.abs(B))
    eye = np.eye(n, dtype=complex)
    for i in range(n):
        for j in range(n):
            if i != j:
                U.append(eye[i][None, :])
                V.append(eye[j][None, :])
    U = np.concatenate(U)
    V = np.concatenate(V)
    U = U / G.batch(x, U)[:, None]
    V = V / G.batch(x, V)[:, None]
    dist = G.batch(x, U - V)
    keep = dist > 1e-6
    U, V, dist = U[keep], V[keep], dist[keep]
    mid = G.batch(x, 0.5 * (U + V))
    deficit = 1.0 - mid
    flat = np.flatnonzero(deficit <= margin)
    witnesses = [(U[k], V[k]) for k in flat[:max_witnesses]]
    modulus = {}
    for eps in (0.1, 0.5, 1.0):
        sel = dist >= eps
        modulus[eps] = float(np.min(deficit[sel])) if np.any(sel) else float("nan")
    return ConvexityReport(float(np.max(homog)), violations, witnesses, modulus)


def reflexive_duality_gap(G: FinslerMetric, x, grid, method: str = "auto", **opts) -> float:
    """max relative |G - G**| over the fiber points in ``grid``.

    ``method`` selects how the second dual is computed; the first dual always
    uses a closed form when one exists.
    """
    F = dual_as_metric(G)
    worst = 0.0
    for eta in np.atleast_2d(np.asarray(grid, dtype=complex)):
        g = G(x, eta)
        gss = dual_metric(F, x, eta, method=method, **opts).value
        worst = max(worst, abs(g - gss) / g)
    return worst
