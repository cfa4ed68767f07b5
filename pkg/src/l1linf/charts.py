"""Holomorphic coordinate changes and the data needed to transport jets.

A :class:`ChartTransition` freezes a map ``w = w(z)`` at one point: its value,
Jacobian ``J[i, j] = dw_i/dz_j`` and second derivatives
``hessian[i, j, k] = d^2 w_i / dz_j dz_k``.  The inverse data
(``dz/dw`` and ``d^2 z / dw dw``) is derived from these unless supplied.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, SingularJacobian

DET_TOLERANCE = 1e-12
FD_STEP = 1e-6


def _as_complex_vector(values) -> np.ndarray:
    arr = np.array(values, dtype=complex, ndmin=1)
    if arr.ndim != 1:
        raise DimensionMismatch(f"expected a 1-d coordinate vector, got shape {arr.shape}")
    return arr


class PolynomialMap:
    """Polynomial map C^n -> C^m with analytic first and second derivatives.

    ``terms[i]`` maps exponent tuples (length n) to the complex coefficient of
    that monomial in component ``i``.
    """

    def __init__(self, terms: Sequence[Mapping[tuple, complex]], dim: int | None = None):
        self.terms = [
            {tuple(int(e) for e in exps): complex(c) for exps, c in comp.items()}
            for comp in terms
        ]
        if dim is None:
            dims = {len(k) for comp in self.terms for k in comp}
            if len(dims) != 1:
                raise DimensionMismatch("cannot infer the source dimension of the polynomial map")
            dim = dims.pop()
        self.dim = int(dim)
        for comp in self.terms:
            for exps in comp:
                if len(exps) != self.dim:
                    raise DimensionMismatch(f"exponent {exps} does not match dimension {self.dim}")
        # flat arrays for vectorised evaluation
        self._exps = []
        self._coefs = []
        for comp in self.terms:
            if comp:
                self._exps.append(np.array(list(comp.keys()), dtype=int))
                self._coefs.append(np.array(list(comp.values()), dtype=complex))
            else:
                self._exps.append(np.zeros((0, self.dim), dtype=int))
                self._coefs.append(np.zeros(0, dtype=complex))

    @property
    def codim(self) -> int:
        return len(self.terms)

    @property
    def degree(self) -> int:
        return max((sum(k) for comp in self.terms for k in comp), default=0)

    @staticmethod
    def _powers(z: np.ndarray, exps: np.ndarray) -> np.ndarray:
        # z**e with the convention 0**0 = 1 and negative powers returning 0
        safe = np.where(exps >= 0, exps, 0)
        out = np.power(z[None, :], safe)
        return np.where(exps >= 0, out, 0.0)

    def value(self, z) -> np.ndarray:
        z = _as_complex_vector(z)
        return np.array([
            np.sum(c * np.prod(self._powers(z, e), axis=1)) for e, c in zip(self._exps, self._coefs)
        ], dtype=complex)

    def jacobian(self, z) -> np.ndarray:
        z = _as_complex_vector(z)
        n = self.dim
        jac = np.zeros((self.codim, n), dtype=complex)
        for i, (e, c) in enumerate(zip(self._exps, self._coefs)):
            for j in range(n):
                d = e.copy()
                d[:, j] -= 1
                jac[i, j] = np.sum(c * e[:, j] * np.prod(self._powers(z, d), axis=1))
        return jac

    def hessian(self, z) -> np.ndarray:
        z = _as_complex_vector(z)
        n = self.dim
        hess = np.zeros((self.codim, n, n), dtype=complex)
        for i, (e, c) in enumerate(zip(self._exps, self._coefs)):
            for j in range(n):
                for k in range(j, n):
                    d = e.copy()
                    d[:, j] -= 1
                    factor = e[:, j].astype(complex)
                    factor = factor * d[:, k]
                    d[:, k] -= 1
                    val = np.sum(c * factor * np.prod(self._powers(z, d), axis=1))
                    hess[i, j, k] = val
                    hess[i, k, j] = val
        return hess

    def __call__(self, z) -> np.ndarray:
        return self.value(z)

    def to_record(self) -> list:
        return [
            [[list(exps), [c.real, c.imag]] for exps, c in comp.items()]
            for comp in self.terms
        ]

    @classmethod
    def from_record(cls, record, dim: int | None = None) -> "PolynomialMap":
        terms = [
            {tuple(exps): complex(re, im) for exps, (re, im) in comp}
            for comp in record
        ]
        return cls(terms, dim=dim)

    @classmethod
    def random(cls, rng: np.random.Generator, n: int, degree: int = 3,
               scale: float = 0.3, linear: np.ndarray | None = None) -> "PolynomialMap":
        """Random map ``w = A z + (higher terms)``; ``A`` defaults to a perturbed identity."""
        if linear is None:
            linear = np.eye(n) + 0.3 * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        terms = []
        for i in range(n):
            comp: dict[tuple, complex] = {}
            comp[(0,) * n] = complex(rng.standard_normal(), rng.standard_normal())
            for j in range(n):
                exps = [0] * n
                exps[j] = 1
                comp[tuple(exps)] = complex(linear[i, j])
            for deg in range(2, degree + 1):
                for exps in _monomials(n, deg):
                    comp[exps] = scale * complex(rng.standard_normal(), rng.standard_normal())
            terms.append(comp)
        return cls(terms, dim=n)


def _monomials(n: int, degree: int):
    if n == 1:
        yield (degree,)
        return
    for first in range(degree, -1, -1):
        for rest in _monomials(n - 1, degree - first):
            yield (first,) + rest


@dataclass(frozen=True)
class ChartTransition:
    """Transition data of ``w(z)`` at the point ``z``."""

    point: np.ndarray
    value: np.ndarray
    jacobian: np.ndarray
    hessian: np.ndarray
    inverse_jacobian: np.ndarray | None = None
    inverse_hessian: np.ndarray | None = None
    symmetry_tolerance: float = 1e-9
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        point = _as_complex_vector(self.point)
        n = point.size
        value = _as_complex_vector(self.value)
        jac = np.asarray(self.jacobian, dtype=complex)
        hess = np.asarray(self.hessian, dtype=complex)
        if value.size != n or jac.shape != (n, n) or hess.shape != (n, n, n):
            raise DimensionMismatch(
                f"inconsistent transition shapes: point {point.shape}, value {value.shape}, "
                f"jacobian {jac.shape}, hessian {hess.shape}")
        det = np.linalg.det(jac)
        if abs(det) < DET_TOLERANCE:
            raise SingularJacobian(f"|det J| = {abs(det):.3e} below {DET_TOLERANCE:g}")
        asym = np.max(np.abs(hess - np.swapaxes(hess, 1, 2)), initial=0.0)
        scale = max(1.0, np.max(np.abs(hess), initial=0.0))
        if asym > self.symmetry_tolerance * scale:
            raise ValueError(f"hessian is not symmetric in its last two indices (defect {asym:.3e})")
        inv = self.inverse_jacobian
        inv = np.linalg.inv(jac) if inv is None else np.asarray(inv, dtype=complex)
        if inv.shape != (n, n):
            raise DimensionMismatch("inverse jacobian has the wrong shape")
        inv_hess = self.inverse_hessian
        if inv_hess is None:
            # d^2 z_j / dw_i dw_l = -sum J^{-1}[j,m] H[m,a,b] J^{-1}[a,i] J^{-1}[b,l]
            inv_hess = -np.einsum("jm,mab,ai,bl->jil", inv, hess, inv, inv)
        else:
            inv_hess = np.asarray(inv_hess, dtype=complex)
            if inv_hess.shape != (n, n, n):
                raise DimensionMismatch("inverse hessian has the wrong shape")
        object.__setattr__(self, "point", point)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "jacobian", jac)
        object.__setattr__(self, "hessian", hess)
        object.__setattr__(self, "inverse_jacobian", inv)
        object.__setattr__(self, "inverse_hessian", inv_hess)

    @property
    def dim(self) -> int:
        return self.point.size

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.jacobian))

    @property
    def inverse_residual(self) -> float:
        """max |J J^{-1} - I|."""
        return float(np.max(np.abs(self.jacobian @ self.inverse_jacobian - np.eye(self.dim))))

    @property
    def J(self) -> np.ndarray:
        return self.jacobian

    @property
    def J_dagger(self) -> np.ndarray:
        """Matrix with (i, j) entry dz_j/dw_i, i.e. the inverse transpose of J."""
        return self.inverse_jacobian.T

    def gamma(self, eta) -> np.ndarray:
        """Gamma_ij(eta) = sum_k eta_k d^2 w_i / dz_j dz_k."""
        return np.einsum("ijk,k->ij", self.hessian, _as_complex_vector(eta))

    def gamma_prime(self, H) -> np.ndarray:
        """Gamma'_ij(H) = sum_l H_l d^2 z_j / dw_i dw_l."""
        return np.einsum("jil,l->ij", self.inverse_hessian, _as_complex_vector(H))

    def gamma_double_prime(self, omega) -> np.ndarray:
        """Gamma''_ij(omega) = sum_k omega_k d/dz_j (dz_k/dw_i)."""
        inv = self.inverse_jacobian
        # d/dz_j (J^{-1})[k, i] = -(J^{-1} (dJ/dz_j) J^{-1})[k, i]
        d_inv = -np.einsum("km,maj,ai->kij", inv, self.hessian, inv)
        return np.einsum("k,kij->ij", _as_complex_vector(omega), d_inv)

    @classmethod
    def from_polynomial(cls, poly: PolynomialMap, z) -> "ChartTransition":
        z = _as_complex_vector(z)
        if poly.dim != z.size or poly.codim != z.size:
            raise DimensionMismatch(f"polynomial map {poly.dim}->{poly.codim} evaluated at a point of size {z.size}")
        return cls(point=z, value=poly.value(z), jacobian=poly.jacobian(z), hessian=poly.hessian(z))

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray], z, h: float = FD_STEP) -> "ChartTransition":
        """Central finite differences of a holomorphic map; error O(h^2) in J, O(h^2) in the hessian."""
        z = _as_complex_vector(z)
        n = z.size
        eye = np.eye(n)

        def jac_at(p):
            cols = [(np.asarray(fn(p + h * eye[j]), dtype=complex) - np.asarray(fn(p - h * eye[j]), dtype=complex)) / (2 * h)
                    for j in range(n)]
            return np.stack(cols, axis=1)

        value = np.asarray(fn(z), dtype=complex)
        jac = jac_at(z)
        hess = np.zeros((n, n, n), dtype=complex)
        # second derivatives from differences of the value, exact symmetry by construction
        f0 = value
        for j in range(n):
            for k in range(j, n):
                if j == k:
                    d2 = (np.asarray(fn(z + h * eye[j]), dtype=complex) - 2 * f0
                          + np.asarray(fn(z - h * eye[j]), dtype=complex)) / h**2
                else:
                    d2 = (np.asarray(fn(z + h * eye[j] + h * eye[k]), dtype=complex)
                          - np.asarray(fn(z + h * eye[j] - h * eye[k]), dtype=complex)
                          - np.asarray(fn(z - h * eye[j] + h * eye[k]), dtype=complex)
                          + np.asarray(fn(z - h * eye[j] - h * eye[k]), dtype=complex)) / (4 * h**2)
                hess[:, j, k] = d2
                hess[:, k, j] = d2
        return cls(point=z, value=value, jacobian=jac, hessian=hess, symmetry_tolerance=1e-6)

    @classmethod
    def identity(cls, z) -> "ChartTransition":
        z = _as_complex_vector(z)
        n = z.size
        return cls(point=z, value=z.copy(), jacobian=np.eye(n, dtype=complex),
                   hessian=np.zeros((n, n, n), dtype=complex))


def transition_to_json(poly: PolynomialMap, z) -> str:
    z = _as_complex_vector(z)
    return json.dumps({
        "kind": "polynomial",
        "coefficients": poly.to_record(),
        "eval_point": [[v.real, v.imag] for v in z],
    })


def transition_from_json(text: str) -> tuple[PolynomialMap, ChartTransition]:
    record = json.loads(text)
    if record.get("kind") != "polynomial":
        raise ValueError(f"unsupported transition kind {record.get('kind')!r}")
    z = np.array([complex(re, im) for re, im in record["eval_point"]])
    poly = PolynomialMap.from_record(record["coefficients"], dim=z.size)
    return poly, ChartTransition.from_polynomial(poly, z)
