"""Second-order infinitesimal calculus in holomorphic coordinates.

Points of the four second-order bundles are stored as four coordinate blocks

    TT          (z, eta,   xi,     zeta)
    TstarT      (z, eta,   lambda, mu)
    TTstar      (z, omega, alpha,  beta)
    TstarTstar  (z, omega, nu,     tau)

in :class:`SecondOrderPoint` as ``(z, f, a, b)``.  The symplectic form on the
cotangent bundle uses the convention

    d omega_j ^ d z_j (X, Y) = 1/2 (d omega_j(X) dz_j(Y) - d omega_j(Y) dz_j(X)),

so that ``pairing(V, dualize(W)) == 2 * symplectic_form(W, V)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .charts import ChartTransition, _as_complex_vector
from .errors import (
    BasePointMismatch,
    BundlePairMismatch,
    DerivativeUnavailable,
    DimensionMismatch,
    FiberPointMismatch,
    GradientUnavailable,
    WhitneyConstraintViolated,
    WrongBundleKind,
)

FD_STEP = 1e-5
WHITNEY_RTOL = 1e-10
POINT_ATOL = 1e-12


class BundleKind(enum.Enum):
    TT = "TT"
    TstarT = "TstarT"
    TTstar = "TTstar"
    TstarTstar = "TstarTstar"


# legal (vector, covector) pairs for the second-order pairing
DUAL_PAIRS = {
    (BundleKind.TT, BundleKind.TstarT),
    (BundleKind.TTstar, BundleKind.TstarTstar),
}


@dataclass(frozen=True)
class SecondOrderPoint:
    kind: BundleKind
    z: np.ndarray
    f: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        kind = BundleKind(self.kind)
        blocks = [_as_complex_vector(v) for v in (self.z, self.f, self.a, self.b)]
        n = blocks[0].size
        if any(blk.size != n for blk in blocks):
            raise DimensionMismatch(f"coordinate blocks have sizes {[blk.size for blk in blocks]}")
        for blk in blocks:
            blk.setflags(write=False)
        object.__setattr__(self, "kind", kind)
        for name, blk in zip("zfab", blocks):
            object.__setattr__(self, name, blk)

    @classmethod
    def make(cls, kind, z, f, a, b) -> "SecondOrderPoint":
        return cls(BundleKind(kind), z, f, a, b)

    @property
    def dim(self) -> int:
        return self.z.size

    def as_tuple(self) -> tuple:
        return (self.z, self.f, self.a, self.b)

    def as_array(self) -> np.ndarray:
        """Blocks stacked as a (4, n) complex array."""
        return np.stack(self.as_tuple())

    def replace(self, **blocks) -> "SecondOrderPoint":
        data = dict(kind=self.kind, z=self.z, f=self.f, a=self.a, b=self.b)
        data.update(blocks)
        return SecondOrderPoint(**data)

    def max_difference(self, other: "SecondOrderPoint") -> float:
        if self.kind is not other.kind:
            raise WrongBundleKind(f"cannot compare {self.kind.value} with {other.kind.value}")
        return max(float(np.max(np.abs(u - v))) for u, v in zip(self.as_tuple(), other.as_tuple()))

    def __repr__(self):
        blocks = ", ".join(np.array2string(b, precision=6) for b in self.as_tuple())
        return f"SecondOrderPoint[{self.kind.value}]({blocks})"


def _require(p: SecondOrderPoint, kind: BundleKind) -> None:
    if p.kind is not kind:
        raise WrongBundleKind(f"expected a {kind.value} point, got {p.kind.value}")


def _same_point(u, v, atol=POINT_ATOL) -> bool:
    u = np.asarray(u)
    v = np.asarray(v)
    scale = max(1.0, float(np.max(np.abs(u), initial=0.0)), float(np.max(np.abs(v), initial=0.0)))
    return u.shape == v.shape and bool(np.all(np.abs(u - v) <= atol * scale))


# ---------------------------------------------------------------------------
# chart changes

def transport(p: SecondOrderPoint, t: ChartTransition) -> SecondOrderPoint:
    """Coordinates of ``p`` in the target chart of ``t``."""
    if p.dim != t.dim:
        raise DimensionMismatch(f"point has dimension {p.dim}, transition has {t.dim}")
    if not _same_point(p.z, t.point, atol=1e-10):
        raise BasePointMismatch("transition is evaluated at a different base point")
    J, Jd = t.J, t.J_dagger
    w = t.value
    z, f, a, b = p.as_tuple()
    if p.kind is BundleKind.TT:
        return SecondOrderPoint(p.kind, w, J @ f, J @ a, t.gamma(f) @ a + J @ b)
    if p.kind is BundleKind.TstarT:
        H = J @ f
        return SecondOrderPoint(p.kind, w, H, Jd @ a + t.gamma_prime(H) @ b, Jd @ b)
    if p.kind is BundleKind.TTstar:
        return SecondOrderPoint(p.kind, w, Jd @ f, J @ a, t.gamma_double_prime(f) @ a + Jd @ b)
    return SecondOrderPoint(p.kind, w, Jd @ f, Jd @ a - t.gamma_double_prime(f) @ b, J @ b)


# ---------------------------------------------------------------------------
# canonical maps

def flip(p: SecondOrderPoint) -> SecondOrderPoint:
    _require(p, BundleKind.TT)
    return SecondOrderPoint(BundleKind.TT, p.z, p.a, p.f, p.b)


def switch(p: SecondOrderPoint) -> SecondOrderPoint:
    """TT*M -> T*TM, (z, omega, alpha, beta) -> (z, alpha, beta, omega)."""
    _require(p, BundleKind.TTstar)
    return SecondOrderPoint(BundleKind.TstarT, p.z, p.a, p.b, p.f)


def switch_inverse(p: SecondOrderPoint) -> SecondOrderPoint:
    _require(p, BundleKind.TstarT)
    return SecondOrderPoint(BundleKind.TTstar, p.z, p.b, p.f, p.a)


def dualize(p: SecondOrderPoint) -> SecondOrderPoint:
    """TT*M -> T*T*M, (z, omega, alpha, beta) -> (z, omega, beta, -alpha)."""
    _require(p, BundleKind.TTstar)
    return SecondOrderPoint(BundleKind.TstarTstar, p.z, p.f, p.b, -p.a)


def dualize_inverse(p: SecondOrderPoint) -> SecondOrderPoint:
    """T*T*M -> TT*M, (z, omega, nu, tau) -> (z, omega, -tau, nu)."""
    _require(p, BundleKind.TstarTstar)
    return SecondOrderPoint(BundleKind.TTstar, p.z, p.f, -p.b, p.a)


def horizontal_projection(p: SecondOrderPoint) -> tuple[np.ndarray, np.ndarray]:
    """D Pi (TT) or D Pi^dagger (TTstar): the base point and the third block."""
    if p.kind not in (BundleKind.TT, BundleKind.TTstar):
        raise WrongBundleKind(f"horizontal projection is defined on TT and TTstar, not {p.kind.value}")
    return p.z, p.a


def vertical_projection(p: SecondOrderPoint) -> tuple[np.ndarray, np.ndarray]:
    """Vertical projection of T*TM or T*T*M: the base point and the fourth block."""
    if p.kind not in (BundleKind.TstarT, BundleKind.TstarTstar):
        raise WrongBundleKind(f"vertical projection is defined on TstarT and TstarTstar, not {p.kind.value}")
    return p.z, p.b


def vertical_inclusion(kind: BundleKind, z, fiber, v) -> SecondOrderPoint:
    """(z, v) -> (z, fiber, 0, v) in TT or TTstar."""
    kind = BundleKind(kind)
    if kind not in (BundleKind.TT, BundleKind.TTstar):
        raise WrongBundleKind("vertical inclusion lands in TT or TTstar")
    v = _as_complex_vector(v)
    return SecondOrderPoint(kind, z, fiber, np.zeros_like(v), v)


def horizontal_inclusion(kind: BundleKind, z, fiber, covector) -> SecondOrderPoint:
    """Pull-back of a base covector: (z, lam) -> (z, fiber, lam, 0) in TstarT or TstarTstar."""
    kind = BundleKind(kind)
    if kind not in (BundleKind.TstarT, BundleKind.TstarTstar):
        raise WrongBundleKind("horizontal inclusion lands in TstarT or TstarTstar")
    c = _as_complex_vector(covector)
    return SecondOrderPoint(kind, z, fiber, c, np.zeros_like(c))


def vertical_difference(p: SecondOrderPoint, q: SecondOrderPoint) -> np.ndarray:
    """Inverse vertical inclusion of ``p - q`` when the difference is vertical."""
    if p.kind is not q.kind:
        raise WrongBundleKind("points live in different bundles")
    if not (_same_point(p.z, q.z) and _same_point(p.f, q.f)):
        raise FiberPointMismatch("points do not share a fiber point")
    if not _same_point(p.a, q.a, atol=1e-9):
        raise ValueError("difference is not vertical: horizontal parts disagree")
    return p.b - q.b


# ---------------------------------------------------------------------------
# pairings and the symplectic form

def pairing_base(v, omega) -> complex:
    """P_M((z, eta), (z, omega)) = sum eta_j omega_j.

    Both arguments are ``(z, fiber)`` tuples.
    """
    z1, eta = (_as_complex_vector(x) for x in v)
    z2, om = (_as_complex_vector(x) for x in omega)
    if z1.size != z2.size or eta.size != om.size or eta.size != z1.size:
        raise DimensionMismatch("tangent and cotangent tuples have different dimensions")
    if not _same_point(z1, z2):
        raise BasePointMismatch("tangent vector and covector sit over different base points")
    return complex(np.sum(eta * om))


def pairing_second_order(V: SecondOrderPoint, Omega: SecondOrderPoint) -> complex:
    """sum_j (a_j A_j + b_j B_j) for a legal dual pair over the same fiber point."""
    if (V.kind, Omega.kind) not in DUAL_PAIRS:
        raise BundlePairMismatch(f"{V.kind.value} and {Omega.kind.value} are not dual bundles")
    if V.dim != Omega.dim:
        raise DimensionMismatch("points have different dimensions")
    if not (_same_point(V.z, Omega.z) and _same_point(V.f, Omega.f)):
        raise FiberPointMismatch("vector and covector sit over different fiber points")
    return complex(np.sum(V.a * Omega.a) + np.sum(V.b * Omega.b))


def symplectic_form(W1: SecondOrderPoint, W2: SecondOrderPoint) -> complex:
    """omega_M(W1, W2) = 1/2 sum_j (beta1_j alpha2_j - beta2_j alpha1_j)."""
    _require(W1, BundleKind.TTstar)
    _require(W2, BundleKind.TTstar)
    if not (_same_point(W1.z, W2.z) and _same_point(W1.f, W2.f)):
        raise FiberPointMismatch("tangent vectors sit over different covectors")
    return complex(0.5 * (np.sum(W1.b * W2.a) - np.sum(W2.b * W1.a)))


# ---------------------------------------------------------------------------
# Hamiltonian vector fields

class GradientMode(enum.Enum):
    analytic = "analytic"
    finite_difference = "finite_difference"


def wirtinger_gradient(fn: Callable, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """d fn / d x_j = 1/2 (d/dRe - i d/dIm) by central differences, step ``h``."""
    x = _as_complex_vector(x)
    grad = np.zeros(x.size, dtype=complex)
    for j in range(x.size):
        e = np.zeros(x.size, dtype=complex)
        e[j] = 1.0
        dre = (fn(x + h * e) - fn(x - h * e)) / (2 * h)
        dim = (fn(x + 1j * h * e) - fn(x - 1j * h * e)) / (2 * h)
        grad[j] = 0.5 * (dre - 1j * dim)
    return grad


@dataclass(frozen=True)
class ScalarFieldOnCotangent:
    """A C^1 function H(z, omega) on the cotangent bundle.

    ``holomorphic_gradient(z, omega)`` returns ``(dH/dz, dH/domega)`` (the
    (1,0)-part).  In finite-difference mode it is estimated with central
    Wirtinger differences of step ``fd_step``; truncation error O(fd_step^2).
    """

    evaluation: Callable
    holomorphic_gradient: Callable | None = None
    gradient_mode: GradientMode = GradientMode.analytic
    fd_step: float = FD_STEP

    def gradient(self, z, omega) -> tuple[np.ndarray, np.ndarray]:
        z = _as_complex_vector(z)
        omega = _as_complex_vector(omega)
        mode = GradientMode(self.gradient_mode)
        if mode is GradientMode.analytic:
            if self.holomorphic_gradient is None:
                raise GradientUnavailable("analytic gradient requested but none supplied")
            nu, tau = self.holomorphic_gradient(z, omega)
            return _as_complex_vector(nu), _as_complex_vector(tau)
        n = z.size

        def stacked(x):
            return self.evaluation(x[:n], x[n:])

        g = wirtinger_gradient(stacked, np.concatenate([z, omega]), self.fd_step)
        return g[:n], g[n:]

    def d(self, z, omega) -> SecondOrderPoint:
        """The (1,0)-differential as a point of T*T*M."""
        nu, tau = self.gradient(z, omega)
        return SecondOrderPoint(BundleKind.TstarTstar, z, omega, nu, tau)


def hamiltonian_field(H: ScalarFieldOnCotangent, at) -> SecondOrderPoint:
    """X_H = 2 dualize^{-1}(dH) at ``at = (z, omega)``."""
    z, omega = at
    dH = H.d(z, omega)
    X = dualize_inverse(dH)
    return X.replace(a=2 * X.a, b=2 * X.b)


# ---------------------------------------------------------------------------
# vector fields and Lie brackets

@dataclass(frozen=True)
class VectorField10:
    """A (1,0) vector field with coefficient map and derivative [dX_i/dz_j].

    ``hessian`` is optional ([d^2 X_i / dz_j dz_k]); it lets brackets of
    brackets keep an analytic derivative.
    """

    evaluation: Callable
    derivative: Callable | None = None
    derivative_mode: GradientMode = GradientMode.analytic
    hessian: Callable | None = None
    fd_step: float = FD_STEP

    def __call__(self, z) -> np.ndarray:
        return _as_complex_vector(self.evaluation(_as_complex_vector(z)))

    def jacobian(self, z) -> np.ndarray:
        z = _as_complex_vector(z)
        if GradientMode(self.derivative_mode) is GradientMode.analytic:
            if self.derivative is None:
                raise DerivativeUnavailable("analytic derivative requested but none supplied")
            return np.asarray(self.derivative(z), dtype=complex)
        h = self.fd_step
        cols = []
        for j in range(z.size):
            e = np.zeros(z.size, dtype=complex)
            e[j] = h
            cols.append((self(z + e) - self(z - e)) / (2 * h))
        return np.stack(cols, axis=1)

    @classmethod
    def from_polynomial(cls, poly) -> "VectorField10":
        return cls(evaluation=poly.value, derivative=poly.jacobian, hessian=poly.hessian)


def lie_bracket(X: VectorField10, Y: VectorField10, p) -> np.ndarray:
    """Coefficients of [X, Y] at ``p``: DY.X - DX.Y."""
    p = _as_complex_vector(p)
    return Y.jacobian(p) @ X(p) - X.jacobian(p) @ Y(p)


def lie_bracket_via_flip(X: VectorField10, Y: VectorField10, p) -> np.ndarray:
    """[X, Y] at ``p`` read off the flip of DY(X) minus DX(Y), through the vertical inclusion."""
    p = _as_complex_vector(p)
    Xp, Yp = X(p), Y(p)
    dY_of_X = SecondOrderPoint(BundleKind.TT, p, Yp, Xp, Y.jacobian(p) @ Xp)
    dX_of_Y = SecondOrderPoint(BundleKind.TT, p, Xp, Yp, X.jacobian(p) @ Yp)
    return vertical_difference(flip(dY_of_X), dX_of_Y)


def bracket_field(X: VectorField10, Y: VectorField10) -> VectorField10:
    """The field [X, Y]; its derivative is analytic when both inputs carry hessians."""

    def value(z):
        return lie_bracket(X, Y, z)

    if X.hessian is not None and Y.hessian is not None and \
            GradientMode(X.derivative_mode) is GradientMode.analytic and \
            GradientMode(Y.derivative_mode) is GradientMode.analytic:
        def deriv(z):
            z = _as_complex_vector(z)
            DX, DY = X.jacobian(z), Y.jacobian(z)
            HX, HY = np.asarray(X.hessian(z)), np.asarray(Y.hessian(z))
            return (np.einsum("jik,i->jk", HY, X(z)) + DY @ DX
                    - np.einsum("jik,i->jk", HX, Y(z)) - DX @ DY)

        return VectorField10(value, deriv)
    return VectorField10(value, None, GradientMode.finite_difference)


# ---------------------------------------------------------------------------
# derivative of the pairing along curves

@dataclass(frozen=True)
class Curve:
    """A curve t -> (z(t), fiber(t)) in TM or T*M with its velocity."""

    position: Callable
    velocity: Callable

    @classmethod
    def polynomial(cls, z_coeffs, fiber_coeffs) -> "Curve":
        """Coefficient arrays of shape (degree + 1, n); row k multiplies t**k."""
        zc = np.atleast_2d(np.asarray(z_coeffs, dtype=complex))
        fc = np.atleast_2d(np.asarray(fiber_coeffs, dtype=complex))

        def _val(c, t):
            return sum(c[k] * t**k for k in range(c.shape[0]))

        def _vel(c, t):
            return sum(k * c[k] * t ** (k - 1) for k in range(1, c.shape[0])) if c.shape[0] > 1 \
                else np.zeros(c.shape[1], dtype=complex)

        return cls(lambda t: (_val(zc, t), _val(fc, t)),
                   lambda t: (_vel(zc, t), _vel(fc, t)))

    def tangent(self, kind: BundleKind, t: float = 0.0) -> SecondOrderPoint:
        z, f = self.position(t)
        dz, df = self.velocity(t)
        return SecondOrderPoint(kind, z, f, dz, df)


def pairing_derivative_check(curve_v: Curve, curve_w: Curve, h: float = FD_STEP) -> float:
    """|central FD of P_M along the curves - P_TM(flip(V1), switch(V2))| at t = 0."""
    V1 = curve_v.tangent(BundleKind.TT)
    V2 = curve_w.tangent(BundleKind.TTstar)
    if not _same_point(V1.z, V2.z):
        raise WhitneyConstraintViolated("the curves do not start over the same base point")
    scale = max(1.0, float(np.max(np.abs(V1.a))), float(np.max(np.abs(V2.a))))
    if np.max(np.abs(V1.a - V2.a)) > WHITNEY_RTOL * scale:
        raise WhitneyConstraintViolated("base velocities of the two curves disagree")

    def P(t):
        z1, eta = curve_v.position(t)
        z2, om = curve_w.position(t)
        return pairing_base((z1, eta), (z2, om))

    fd = (P(h) - P(-h)) / (2 * h)
    predicted = pairing_second_order(flip(V1), switch(V2))
    return float(abs(fd - predicted))


def characterization_residuals(pairing: Callable, u_point, covector, V: SecondOrderPoint,
                               Omega: SecondOrderPoint, v_vertical, W: SecondOrderPoint,
                               h: float = FD_STEP) -> tuple[float, float, float]:
    """Residuals of the three identities that pin down the pairing on T_u TM.

    ``pairing`` is any candidate bilinear pairing of (TT, TstarT) points.
    ``V`` is a TT point over ``u = (z, eta)``, ``Omega`` a TstarT point over the
    same ``u``, ``covector`` a base covector at ``z``, ``v_vertical`` a base
    vector at ``z`` and ``W`` a TTstar point over ``(z, covector)`` with the same
    horizontal part as ``V``.  The third identity uses linear curves through
    ``u`` and ``(z, covector)`` in the directions of ``V`` and ``W``.
    """
    z, eta = (_as_complex_vector(x) for x in u_point)
    # (1) horizontally included covector
    lam = horizontal_inclusion(BundleKind.TstarT, z, eta, covector)
    r1 = abs(pairing(V, lam) - pairing_base((z, V.a), (z, covector)))
    # (2) vertically included vector
    vert = vertical_inclusion(BundleKind.TT, z, eta, v_vertical)
    r2 = abs(pairing(vert, Omega) - pairing_base((z, v_vertical), vertical_projection(Omega)))
    # (3) derivative of the base pairing along the Whitney sum
    curve_v = Curve(lambda t: (z + t * V.a, eta + t * V.b), lambda t: (V.a, V.b))
    curve_w = Curve(lambda t: (z + t * W.a, W.f + t * W.b), lambda t: (W.a, W.b))

    def P(t):
        return pairing_base(curve_v.position(t), curve_w.position(t))

    fd = (P(h) - P(-h)) / (2 * h)
    flipped = flip(V)
    switched = switch(W)
    r3 = abs(fd - pairing(flipped, switched))
    return float(r1), float(r2), float(r3)
