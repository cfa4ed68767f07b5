"""The Teichmueller space of tori, realised as the upper half plane.

A point of the cotangent bundle is ``(tau, q)`` and a point of the tangent
bundle is ``(tau, mu)``; the L1 norm of a quadratic differential is
``n(tau, q) = 2 |q| Im(tau)`` and the Teichmueller metric is
``|mu| / (2 Im(tau))``.  Derivatives are stored as (1,0)-parts: a tuple
``(tau, fiber, a, b)`` stands for ``a dtau + b dfiber`` and the real
differential of a real function is ``2 Re`` of it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import _dd as dd
from . import jet_geometry as jg
from .errors import GridTouchesBoundary, NotInUpperHalfPlane, NotOnSphere, WrongFiberRole, ZeroDifferential

IM_TOLERANCE = 1e-12
ZERO_FIBER = 1e-12
SPHERE_TOLERANCE = 1e-9


class FiberRole(enum.Enum):
    tangent_mu = "tangent_mu"
    cotangent_q = "cotangent_q"


@dataclass(frozen=True)
class TorusFiberPoint:
    tau: complex
    fiber: complex
    fiber_role: FiberRole = FiberRole.cotangent_q

    def __post_init__(self):
        object.__setattr__(self, "tau", complex(self.tau))
        object.__setattr__(self, "fiber", complex(self.fiber))
        object.__setattr__(self, "fiber_role", FiberRole(self.fiber_role))
        if self.tau.imag <= IM_TOLERANCE:
            raise NotInUpperHalfPlane(f"Im(tau) = {self.tau.imag:g} is not positive")

    @classmethod
    def q(cls, tau, q) -> "TorusFiberPoint":
        return cls(tau, q, FiberRole.cotangent_q)

    @classmethod
    def mu(cls, tau, mu) -> "TorusFiberPoint":
        return cls(tau, mu, FiberRole.tangent_mu)


def _need(p: TorusFiberPoint, role: FiberRole) -> None:
    if p.fiber_role is not role:
        raise WrongFiberRole(f"expected a {role.value} point, got {p.fiber_role.value}")


def _nonzero(p: TorusFiberPoint) -> None:
    if abs(p.fiber) < ZERO_FIBER:
        raise ZeroDifferential("the norm is not differentiable on the zero section")


# The squared norms and the TB map are rational in (Re, Im) of their inputs.
# They are evaluated in double-double and rounded once, which keeps the two
# sides of the duality identity within two ulps of each other.

def _dd_abs2(c: np.ndarray):
    return dd.add(dd.two_prod(c.real, c.real), dd.two_prod(c.imag, c.imag))


def _dd_scaled_conj(c: np.ndarray, factor, divide: bool = False) -> np.ndarray:
    """conj(c) * factor (or conj(c) / factor), correctly rounded componentwise."""
    op = dd.div if divide else dd.mul
    re = dd.to_float(op(dd.from_float(c.real), factor))
    im = dd.to_float(op(dd.from_float(-c.imag), factor))
    return re + 1j * im


def tb_kernel(tau, q) -> np.ndarray:
    """4 conj(q) Im(tau)^2 for arrays."""
    t = np.imag(tau)
    return _dd_scaled_conj(np.asarray(q, dtype=complex), dd.scale(dd.two_prod(t, t), 4.0))


def tb_inverse_kernel(tau, mu) -> np.ndarray:
    """conj(mu) / (4 Im(tau)^2) for arrays."""
    t = np.imag(tau)
    return _dd_scaled_conj(np.asarray(mu, dtype=complex), dd.scale(dd.two_prod(t, t), 4.0), divide=True)


def d_n2_kernel(tau, q) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients (-4i|q|^2 Im tau, 4 conj(q) Im tau^2) of d n^2 for arrays."""
    q = np.asarray(q, dtype=complex)
    t = np.imag(tau)
    a = -4j * dd.to_float(dd.mul(_dd_abs2(q), dd.from_float(t)))
    # d/dq of 4|q|^2 t^2, kept separate from tb_kernel so duality checks compare two routes;
    # 2t is exact, so both round the same real number
    b = _dd_scaled_conj(q, dd.two_prod(2 * t, 2 * t))
    return a, b


def d_tau2_kernel(tau, mu) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients (-|mu|^2/(4i Im tau^3), conj(mu)/(4 Im tau^2)) of d tau^2 for arrays."""
    mu = np.asarray(mu, dtype=complex)
    t = np.imag(tau)
    t2 = dd.two_prod(t, t)
    t3 = dd.scale(dd.mul(t2, dd.from_float(t)), 4.0)
    a = 1j * dd.to_float(dd.div(_dd_abs2(mu), t3))
    return a, _dd_scaled_conj(mu, dd.scale(t2, 4.0), divide=True)


def _point(kind: jg.BundleKind, tau, fiber, a, b) -> jg.SecondOrderPoint:
    return jg.SecondOrderPoint(kind, [tau], [fiber], [a], [b])


# ---------------------------------------------------------------------------
# norms and the Teichmueller-Beltrami map

def l1_norm(p: TorusFiberPoint) -> float:
    _need(p, FiberRole.cotangent_q)
    return 2 * abs(p.fiber) * p.tau.imag


def teich_metric(p: TorusFiberPoint) -> float:
    _need(p, FiberRole.tangent_mu)
    return abs(p.fiber) / (2 * p.tau.imag)


def tb_map(p: TorusFiberPoint) -> TorusFiberPoint:
    """(tau, q) -> (tau, 4 conj(q) Im(tau)^2)."""
    _need(p, FiberRole.cotangent_q)
    return TorusFiberPoint.mu(p.tau, complex(tb_kernel(p.tau, np.array([p.fiber]))[0]))


def tb_inverse(p: TorusFiberPoint) -> TorusFiberPoint:
    """(tau, mu) -> (tau, conj(mu) / (4 Im(tau)^2))."""
    _need(p, FiberRole.tangent_mu)
    return TorusFiberPoint.q(p.tau, complex(tb_inverse_kernel(p.tau, np.array([p.fiber]))[0]))


def tb0_map(p: TorusFiberPoint) -> TorusFiberPoint:
    """The TB map divided by the L1 norm: (tau, 2 Im(tau) conj(q)/|q|)."""
    _need(p, FiberRole.cotangent_q)
    _nonzero(p)
    return TorusFiberPoint.mu(p.tau, 2 * p.tau.imag * np.conj(p.fiber) / abs(p.fiber))


# ---------------------------------------------------------------------------
# (1,0)-differentials

def d_n(p: TorusFiberPoint) -> jg.SecondOrderPoint:
    """-i|q| dtau + Im(tau) conj(q)/|q| dq."""
    _need(p, FiberRole.cotangent_q)
    _nonzero(p)
    q, t = p.fiber, p.tau.imag
    return _point(jg.BundleKind.TstarTstar, p.tau, q, -1j * abs(q), t * np.conj(q) / abs(q))


def d_tau(p: TorusFiberPoint) -> jg.SecondOrderPoint:
    """-|mu|/(4i Im(tau)^2) dtau + conj(mu)/(4|mu| Im(tau)) dmu."""
    _need(p, FiberRole.tangent_mu)
    _nonzero(p)
    mu, t = p.fiber, p.tau.imag
    return _point(jg.BundleKind.TstarT, p.tau, mu, -abs(mu) / (4j * t ** 2), np.conj(mu) / (4 * abs(mu) * t))


def d_n2(p: TorusFiberPoint) -> jg.SecondOrderPoint:
    """-4i|q|^2 Im(tau) dtau + 4 conj(q) Im(tau)^2 dq."""
    _need(p, FiberRole.cotangent_q)
    a, b = d_n2_kernel(p.tau, np.array([p.fiber]))
    return _point(jg.BundleKind.TstarTstar, p.tau, p.fiber, a[0], b[0])


def d_tau2(p: TorusFiberPoint) -> jg.SecondOrderPoint:
    """-|mu|^2/(4i Im(tau)^3) dtau + conj(mu)/(4 Im(tau)^2) dmu."""
    _need(p, FiberRole.tangent_mu)
    a, b = d_tau2_kernel(p.tau, np.array([p.fiber]))
    return _point(jg.BundleKind.TstarT, p.tau, p.fiber, a[0], b[0])


def real_differential(form: jg.SecondOrderPoint, dtau: complex, dfiber: complex) -> float:
    """2 Re(a dtau + b dfiber): the real derivative encoded by a (1,0)-form."""
    return float(2 * np.real(form.a[0] * dtau + form.b[0] * dfiber))


# ---------------------------------------------------------------------------
# duality checks

def infinitesimal_duality_gap(p: TorusFiberPoint) -> float:
    """max |switch(dualize^{-1}(-d n^2)) - d tau^2(TB(p))| componentwise."""
    _need(p, FiberRole.cotangent_q)
    _nonzero(p)
    dn2 = d_n2(p)
    minus = dn2.replace(a=-dn2.a, b=-dn2.b)
    lhs = jg.switch(jg.dualize_inverse(minus))
    rhs = d_tau2(tb_map(p))
    return lhs.max_difference(rhs)


def n_squared_field() -> jg.ScalarFieldOnCotangent:
    """n^2 = 4|q|^2 Im(tau)^2 as a function on the cotangent bundle, analytic gradient."""

    def value(z, omega):
        return 4 * abs(omega[0]) ** 2 * z[0].imag ** 2

    def gradient(z, omega):
        form = d_n2(TorusFiberPoint.q(z[0], omega[0]))
        return form.a, form.b

    return jg.ScalarFieldOnCotangent(value, gradient)


def hamiltonian_duality_check(p: TorusFiberPoint, field: jg.ScalarFieldOnCotangent | None = None) -> float:
    """|horizontal part of -X_{n^2}/2 - TB(p)| + |base mismatch|."""
    _need(p, FiberRole.cotangent_q)
    _nonzero(p)
    H = n_squared_field() if field is None else field
    X = jg.hamiltonian_field(H, (np.array([p.tau]), np.array([p.fiber])))
    half = X.replace(a=-0.5 * X.a, b=-0.5 * X.b)
    base, horizontal = jg.horizontal_projection(half)
    target = tb_map(p)
    return float(abs(horizontal[0] - target.fiber) + abs(base[0] - target.tau))


def _batch_arrays(tau, q) -> tuple[np.ndarray, np.ndarray]:
    tau = np.atleast_1d(np.asarray(tau, dtype=complex))
    q = np.atleast_1d(np.asarray(q, dtype=complex))
    if tau.shape != q.shape or tau.ndim != 1:
        raise ValueError("tau and q must be 1-d arrays of equal length")
    if np.any(tau.imag <= IM_TOLERANCE):
        raise NotInUpperHalfPlane("every tau must lie in the upper half plane")
    if np.any(np.abs(q) < ZERO_FIBER):
        raise ZeroDifferential("the norm is not differentiable on the zero section")
    return tau, q


def infinitesimal_duality_gaps(tau, q) -> np.ndarray:
    """Per-sample duality gaps for arrays of (tau, q).

    The samples are treated as one point of the product of N copies of the
    upper half plane, where the jet operations act coordinatewise.
    """
    tau, q = _batch_arrays(tau, q)
    a, b = d_n2_kernel(tau, q)
    minus = jg.SecondOrderPoint(jg.BundleKind.TstarTstar, tau, q, -a, -b)
    lhs = jg.switch(jg.dualize_inverse(minus))
    mu = tb_kernel(tau, q)
    ra, rb = d_tau2_kernel(tau, mu)
    rhs = jg.SecondOrderPoint(jg.BundleKind.TstarT, tau, mu, ra, rb)
    return np.max(np.abs(lhs.as_array() - rhs.as_array()), axis=0)


def n_squared_sum_field() -> jg.ScalarFieldOnCotangent:
    """sum_k n(tau_k, q_k)^2 on the cotangent bundle of the product manifold."""

    def value(z, omega):
        return float(np.sum(4 * np.abs(omega) ** 2 * np.imag(z) ** 2))

    return jg.ScalarFieldOnCotangent(value, lambda z, omega: d_n2_kernel(z, omega))


def hamiltonian_duality_checks(tau, q) -> np.ndarray:
    """Per-sample |horizontal part of -X/2 - TB| + |base mismatch| on the product manifold."""
    tau, q = _batch_arrays(tau, q)
    X = jg.hamiltonian_field(n_squared_sum_field(), (tau, q))
    half = X.replace(a=-0.5 * X.a, b=-0.5 * X.b)
    base, horizontal = jg.horizontal_projection(half)
    return np.abs(horizontal - tb_kernel(tau, q)) + np.abs(base - tau)


# ---------------------------------------------------------------------------
# Levi matrices

class LeviResult(NamedTuple):
    matrix: np.ndarray
    unscaled: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    formula_eigenvalues: np.ndarray
    signature: tuple


def hermitian_form(M: np.ndarray, v, w=None) -> complex:
    """sum_ij M_ij v_i conj(w_j)."""
    v = np.asarray(v, dtype=complex)
    w = v if w is None else np.asarray(w, dtype=complex)
    return complex(v @ M @ np.conj(w))


def levi_n(p: TorusFiberPoint) -> LeviResult:
    """Complex Hessian [d^2 n / dz_i dz̄_j] in the coordinates (tau, q).

    ``eigenvalues`` belong to the unscaled bracket [[0, -iq], [i conj(q), Im tau]]
    and are compared with (Im tau +- sqrt(Im tau^2 + 4|q|^2)) / 2; the full
    matrix is the bracket divided by 2|q| and has the same signature.
    """
    _need(p, FiberRole.cotangent_q)
    _nonzero(p)
    q, t = p.fiber, p.tau.imag
    unscaled = np.array([[0, -1j * q], [1j * np.conj(q), t]], dtype=complex)
    vals, vecs = np.linalg.eigh(unscaled)
    root = np.sqrt(t * t + 4 * abs(q) ** 2)
    formula = np.array([(t - root) / 2, (t + root) / 2])
    sig = tuple(int(np.sign(v)) for v in np.linalg.eigvalsh(unscaled / (2 * abs(q)))[::-1])
    return LeviResult(unscaled / (2 * abs(q)), unscaled, vals, vecs, formula, sig)


class LeviTauResult(NamedTuple):
    matrix: np.ndarray
    positive_definite: bool
    minors: tuple


def levi_tau(p: TorusFiberPoint) -> LeviTauResult:
    """Complex Hessian of the Teichmueller metric in (tau, mu)."""
    _need(p, FiberRole.tangent_mu)
    _nonzero(p)
    mu, t = p.fiber, p.tau.imag
    m = abs(mu)
    M = np.array([[m / (4 * t ** 3), 1j * mu / (8 * m * t ** 2)],
                  [-1j * np.conj(mu) / (8 * m * t ** 2), 1 / (8 * m * t)]], dtype=complex)
    minors = (float(M[0, 0].real), float(np.linalg.det(M).real))
    return LeviTauResult(M, minors[0] > 0 and minors[1] > 0, minors)


def complex_hessian_fd(fn: Callable, z, h: float = 1e-4) -> np.ndarray:
    """[d^2 fn / dz_i dz̄_j] of a real function of C^n by central differences.

    Uses d/dz = (d/dx - i d/dy)/2 and d/dz̄ = (d/dx + i d/dy)/2 applied to the
    real Hessian; truncation error O(h^2).
    """
    z = np.asarray(z, dtype=complex)
    n = z.size
    dirs = [np.eye(n)[k] * s for k in range(n) for s in (1.0, 1j)]  # x_1, y_1, x_2, y_2, ...
    R = np.zeros((2 * n, 2 * n))
    for a in range(2 * n):
        for b in range(2 * n):
            ea, eb = h * dirs[a], h * dirs[b]
            R[a, b] = (fn(z + ea + eb) - fn(z + ea - eb) - fn(z - ea + eb) + fn(z - ea - eb)) / (4 * h * h)
    L = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            xx, xy = R[2 * i, 2 * j], R[2 * i, 2 * j + 1]
            yx, yy = R[2 * i + 1, 2 * j], R[2 * i + 1, 2 * j + 1]
            L[i, j] = 0.25 * (xx + yy + 1j * (xy - yx))
    return L


# ---------------------------------------------------------------------------
# CR-linearity of the normalised TB map on horizontal directions

class CRCheck(NamedTuple):
    deviation: float
    linearity_defect: float
    derivative: np.ndarray


def _tb0_vector(z: np.ndarray) -> np.ndarray:
    p = tb0_map(TorusFiberPoint.q(z[0], z[1]))
    return np.array([p.tau, p.fiber])


def horizontal_cr_check(p: TorusFiberPoint, h: float = 1e-6) -> CRCheck:
    """Central-difference derivative of TB_0 along (Im tau, i q).

    Returns the deviation from (Im tau, -4i conj(q) Im tau^2) and the defect
    |D(i v) - i D(v)| measuring complex linearity on that direction.
    """
    _need(p, FiberRole.cotangent_q)
    if abs(l1_norm(p) - 1) > SPHERE_TOLERANCE:
        raise NotOnSphere(f"L1 norm {l1_norm(p):.12g} is not 1")
    t = p.tau.imag
    z = np.array([p.tau, p.fiber])
    v = np.array([t, 1j * p.fiber])

    def D(direction):
        return (_tb0_vector(z + h * direction) - _tb0_vector(z - h * direction)) / (2 * h)

    Dv = D(v)
    expected = np.array([t, -4j * np.conj(p.fiber) * t ** 2])
    return CRCheck(float(np.max(np.abs(Dv - expected))), float(np.max(np.abs(D(1j * v) - 1j * Dv))), Dv)


def unit_sphere_point(tau, phase: float) -> TorusFiberPoint:
    """The point (tau, q) with |q| = 1/(2 Im tau) and arg q = phase."""
    tau = complex(tau)
    return TorusFiberPoint.q(tau, np.exp(1j * phase) / (2 * tau.imag))


# ---------------------------------------------------------------------------
# curvature of the Teichmueller metric

def poincare_factor(tau):
    return 1.0 / (2.0 * np.imag(tau))


def curvature_check(x_range=(-1.0, 1.0), y_range=(0.5, 2.5), h: float = 0.01,
                    factor: Callable | None = None, target: float = -4.0) -> float:
    """max |K - target| over interior nodes, K = -Laplacian(log lambda) / lambda^2.

    ``factor`` is the conformal density lambda(tau) (default 1/(2 Im tau));
    the Laplacian is the 5-point stencil with spacing ``h``.
    """
    lam = poincare_factor if factor is None else factor
    if y_range[0] < 5 * h:
        raise GridTouchesBoundary(f"grid starts at Im tau = {y_range[0]:g}, closer than 5 spacings to the real axis")
    nx = int(round((x_range[1] - x_range[0]) / h)) + 1
    ny = int(round((y_range[1] - y_range[0]) / h)) + 1
    X, Y = np.meshgrid(x_range[0] + h * np.arange(nx), y_range[0] + h * np.arange(ny), indexing="ij")
    T = X + 1j * Y
    lam_vals = np.broadcast_to(np.asarray(lam(T), dtype=float), T.shape)
    L = np.log(lam_vals)
    lap = (L[2:, 1:-1] + L[:-2, 1:-1] + L[1:-1, 2:] + L[1:-1, :-2] - 4 * L[1:-1, 1:-1]) / h ** 2
    K = -lap / lam_vals[1:-1, 1:-1] ** 2
    return float(np.max(np.abs(K - target)))


# ---------------------------------------------------------------------------
# sampling

def random_arrays(rng: np.random.Generator, count: int, imtau=(0.1, 10.0), modulus=(1e-3, 10.0),
                  retau=(-5.0, 5.0)) -> tuple[np.ndarray, np.ndarray]:
    """Seeded (tau, q) arrays: log-uniform Im tau and |q|, uniform phases and Re tau."""
    it = np.exp(rng.uniform(np.log(imtau[0]), np.log(imtau[1]), count))
    rt = rng.uniform(retau[0], retau[1], count)
    mod = np.exp(rng.uniform(np.log(modulus[0]), np.log(modulus[1]), count))
    ph = rng.uniform(0, 2 * np.pi, count)
    return rt + 1j * it, mod * np.exp(1j * ph)


def random_points(rng: np.random.Generator, count: int, **ranges) -> list[TorusFiberPoint]:
    tau, q = random_arrays(rng, count, **ranges)
    return [TorusFiberPoint.q(t, v) for t, v in zip(tau, q)]


def scan_row(p: TorusFiberPoint) -> tuple:
    """(Re tau, Im tau, Re q, Im q, duality gap, lambda_+, lambda_-)."""
    lev = levi_n(p)
    return (p.tau.real, p.tau.imag, p.fiber.real, p.fiber.imag,
            infinitesimal_duality_gap(p), lev.formula_eigenvalues[1], lev.formula_eigenvalues[0])
