"""Quadratic differentials sampled on planar grids and flat tori.

Every integral uses the area element dxdy and the midpoint rule over cells
whose centres lie inside the domain.  On the torus with modulus ``tau`` the
fundamental domain is the parallelogram {s + t tau : 0 <= s, t < 1}; its cells
have area Im(tau) / (nx ny).  The torus coordinate ``q`` of the cotangent
trivialisation corresponds to the constant field ``-2i q``, which makes the
grid norm equal to 2|q| Im(tau).
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .errors import EmptyMask, GridMismatch, IdenticallyZero, NotNormalized

ZERO_RELATIVE = 1e-12
NORMALIZATION_TOL = 1e-9
MAGIC = b"L1GF"
FORMAT_VERSION = 1


class DomainKind(enum.IntEnum):
    rectangle = 0
    unit_disk = 1
    torus = 2


@dataclass(frozen=True)
class Domain:
    kind: DomainKind
    extents: tuple  # rectangle/disk: (x0, x1, y0, y1); torus: (Re tau, Im tau, 0, 0)

    @classmethod
    def rectangle(cls, x0=0.0, x1=1.0, y0=0.0, y1=1.0) -> "Domain":
        if not (x1 > x0 and y1 > y0):
            raise ValueError("rectangle extents must be increasing")
        return cls(DomainKind.rectangle, (float(x0), float(x1), float(y0), float(y1)))

    @classmethod
    def unit_disk(cls) -> "Domain":
        return cls(DomainKind.unit_disk, (-1.0, 1.0, -1.0, 1.0))

    @classmethod
    def torus(cls, tau) -> "Domain":
        tau = complex(tau)
        if tau.imag <= 0:
            raise ValueError("torus modulus must lie in the upper half plane")
        return cls(DomainKind.torus, (tau.real, tau.imag, 0.0, 0.0))

    @property
    def tau(self) -> complex:
        if self.kind is not DomainKind.torus:
            raise AttributeError("only torus domains carry a modulus")
        return complex(self.extents[0], self.extents[1])


def _grid_geometry(domain: Domain, nx: int, ny: int):
    """Cell centres, inside mask and cell area for a midpoint grid."""
    if nx < 1 or ny < 1:
        raise ValueError("grids need at least one cell per direction")
    if domain.kind is DomainKind.torus:
        s = (np.arange(nx) + 0.5) / nx
        t = (np.arange(ny) + 0.5) / ny
        S, T = np.meshgrid(s, t, indexing="ij")
        Z = S + T * domain.tau
        return Z, np.ones((nx, ny), dtype=bool), domain.tau.imag / (nx * ny), 1.0 / nx, 1.0 / ny
    x0, x1, y0, y1 = domain.extents
    hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
    X, Y = np.meshgrid(x0 + hx * (np.arange(nx) + 0.5), y0 + hy * (np.arange(ny) + 0.5), indexing="ij")
    Z = X + 1j * Y
    mask = np.abs(Z) < 1.0 if domain.kind is DomainKind.unit_disk else np.ones((nx, ny), dtype=bool)
    return Z, mask, hx * hy, hx, hy


@dataclass(frozen=True, eq=False)
class GridField:
    """Complex samples at cell centres of a uniform grid, indexed [ix, iy].

    ``spacing`` gives the cell widths in the grid parameters (for the torus
    these are the fractions 1/nx, 1/ny of the two periods).  Samples outside the mask
    are stored as zero and never enter a sum.  ``flags`` marks cells that an
    operation excluded (zeros of a differential).
    """

    domain: Domain
    nx: int
    ny: int
    samples: np.ndarray
    mask: np.ndarray
    flags: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        samples = np.array(self.samples, dtype=complex)
        mask = np.array(self.mask, dtype=bool)
        if samples.shape != (self.nx, self.ny) or mask.shape != (self.nx, self.ny):
            raise ValueError(f"samples {samples.shape} / mask {mask.shape} do not match ({self.nx}, {self.ny})")
        samples[~mask] = 0
        samples.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "mask", mask)

    def __eq__(self, other):
        if not isinstance(other, GridField):
            return NotImplemented
        return self.same_grid(other) and np.array_equal(self.samples, other.samples)

    __hash__ = None

    # construction -------------------------------------------------------
    @classmethod
    def from_function(cls, domain: Domain, nx: int, fn: Callable | complex, ny: int | None = None) -> "GridField":
        ny = nx if ny is None else ny
        Z, mask, *_ = _grid_geometry(domain, nx, ny)
        vals = fn(Z) if callable(fn) else np.full(Z.shape, complex(fn))
        vals = np.broadcast_to(np.asarray(vals, dtype=complex), Z.shape)
        return cls(domain, nx, ny, np.where(mask, vals, 0), mask)

    @classmethod
    def torus_coordinate(cls, tau, q, n: int) -> "GridField":
        """The constant field -2i q representing the torus coordinate q."""
        return cls.from_function(Domain.torus(tau), n, -2j * complex(q))

    def with_samples(self, samples, flags=None) -> "GridField":
        return GridField(self.domain, self.nx, self.ny, samples, self.mask, flags)

    # geometry -----------------------------------------------------------
    @property
    def centers(self) -> np.ndarray:
        return _grid_geometry(self.domain, self.nx, self.ny)[0]

    @property
    def cell_area(self) -> float:
        return _grid_geometry(self.domain, self.nx, self.ny)[2]

    @property
    def spacing(self) -> tuple[float, float]:
        return _grid_geometry(self.domain, self.nx, self.ny)[3:]

    def same_grid(self, other: "GridField") -> bool:
        return (self.domain == other.domain and self.nx == other.nx and self.ny == other.ny
                and np.array_equal(self.mask, other.mask))

    def integrate(self, values: np.ndarray | None = None) -> complex:
        """Midpoint rule over masked-in cells (numpy's pairwise summation)."""
        if not self.mask.any():
            raise EmptyMask("the grid mask selects no cells")
        vals = self.samples if values is None else np.asarray(values)
        return complex(np.sum(vals[self.mask]) * self.cell_area)

    def __add__(self, other: "GridField") -> "GridField":
        _check_same(self, other)
        return self.with_samples(self.samples + other.samples)

    def __sub__(self, other: "GridField") -> "GridField":
        _check_same(self, other)
        return self.with_samples(self.samples - other.samples)

    def scaled(self, c: complex) -> "GridField":
        return self.with_samples(c * self.samples)

    def conj(self) -> "GridField":
        return self.with_samples(np.conj(self.samples))

    # binary format --------------------------------------------------------
    _HEADER = struct.Struct("<4sIIII4d")

    def to_bytes(self) -> bytes:
        header = self._HEADER.pack(MAGIC, FORMAT_VERSION, int(self.domain.kind), self.nx, self.ny,
                                   *self.domain.extents)
        payload = np.ascontiguousarray(self.samples).view(np.float64).astype("<f8").tobytes()
        return header + payload + np.packbits(self.mask.ravel()).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "GridField":
        hs = cls._HEADER.size
        magic, version, tag, nx, ny, *ext = cls._HEADER.unpack_from(data, 0)
        if magic != MAGIC or version != FORMAT_VERSION:
            raise ValueError("not a grid field record")
        count = nx * ny
        payload = np.frombuffer(data, dtype="<f8", count=2 * count, offset=hs)
        samples = (payload[0::2] + 1j * payload[1::2]).reshape(nx, ny)
        bits = np.frombuffer(data, dtype=np.uint8, offset=hs + 16 * count)
        mask = np.unpackbits(bits, count=count).astype(bool).reshape(nx, ny)
        domain = Domain(DomainKind(tag), tuple(float(e) for e in ext))
        return cls(domain, nx, ny, samples, mask)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "GridField":
        return cls.from_bytes(Path(path).read_bytes())


def _check_same(a: GridField, b: GridField) -> None:
    if not a.same_grid(b):
        raise GridMismatch("fields live on different grids")


@dataclass(frozen=True)
class PolynomialDifferential:
    """q(z) = sum_k c_k z^k (a constant on a torus).

    With ``variable="inverse"`` the coefficients multiply z^{-k} instead,
    which is how differentials on the exterior of the disk are written.
    """

    coefficients: tuple
    variable: str = "z"

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(complex(c) for c in self.coefficients))
        if self.variable not in ("z", "inverse"):
            raise ValueError("variable must be 'z' or 'inverse'")

    @property
    def is_zero(self) -> bool:
        return not any(self.coefficients)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        w = 1.0 / z if self.variable == "inverse" else z
        out = np.zeros_like(z)
        for c in reversed(self.coefficients):
            out = out * w + c
        return out

    def on_grid(self, domain: Domain, n: int) -> GridField:
        if domain.kind is DomainKind.torus:
            if any(self.coefficients[1:]):
                raise ValueError("holomorphic differentials on a torus are constant")
            return GridField.from_function(domain, n, self.coefficients[0] if self.coefficients else 0)
        return GridField.from_function(domain, n, self)

    def to_record(self) -> dict:
        return {"kind": "polynomial_differential", "variable": self.variable,
                "coefficients": [[c.real, c.imag] for c in self.coefficients]}

    @classmethod
    def from_record(cls, record: dict) -> "PolynomialDifferential":
        return cls(tuple(complex(re, im) for re, im in record["coefficients"]), record.get("variable", "z"))


# ---------------------------------------------------------------------------
# operations

def zero_threshold(q: GridField) -> float:
    return ZERO_RELATIVE * float(np.max(np.abs(q.samples[q.mask]), initial=0.0))


def _zero_cells(q: GridField) -> np.ndarray:
    mod = np.abs(q.samples)
    peak = float(np.max(mod[q.mask], initial=0.0)) if q.mask.any() else 0.0
    if peak == 0.0:
        raise IdenticallyZero("the differential vanishes on every cell")
    return mod < ZERO_RELATIVE * peak


def l1_norm_grid(q: GridField) -> float:
    return q.integrate(np.abs(q.samples)).real


def l1_variation(q0: GridField, phi: GridField) -> tuple[complex, complex]:
    """((1/2) int conj(q0) phi / |q0|, (1/2) int q0 conj(phi) / |q0|) over non-zero cells."""
    _check_same(q0, phi)
    zero = _zero_cells(q0)
    mod = np.where(zero, 1.0, np.abs(q0.samples))
    first = np.where(zero, 0, np.conj(q0.samples) * phi.samples / mod)
    second = np.where(zero, 0, q0.samples * np.conj(phi.samples) / mod)
    return 0.5 * q0.integrate(first), 0.5 * q0.integrate(second)


class VariationReport(NamedTuple):
    steps: tuple
    residuals: tuple
    orders: tuple
    predicted: tuple
    probe: dict


def fd_check_l1_variation(q0: GridField, phi: GridField, steps=(1e-2, 1e-3, 1e-4),
                          scheme: str = "central", probe_step: float = 1e-3) -> VariationReport:
    """Difference quotients of t -> ||q0 + t phi|| against the first-order formula.

    At real t the predicted derivative is 2 Re(a) with (a, b) from
    :func:`l1_variation`.  ``scheme`` is ``"forward"`` ((f(t) - f(0))/t) or
    ``"central"`` ((f(t) - f(-t))/(2t)).  The phase probe evaluates f at
    t in {+-s, +-is} and solves for both coefficients:
    a + b = (f(s) - f(-s)) / (2s) and a - b = (f(is) - f(-is)) / (2is).
    """
    if scheme not in ("forward", "central"):
        raise ValueError("scheme must be 'forward' or 'central'")
    a, b = l1_variation(q0, phi)
    f0 = l1_norm_grid(q0)

    def f(t):
        return l1_norm_grid(q0 + phi.scaled(t))

    predicted = 2 * a.real
    residuals = []
    for t in steps:
        quotient = (f(t) - f0) / t if scheme == "forward" else (f(t) - f(-t)) / (2 * t)
        residuals.append(abs(quotient - predicted))
    orders = tuple(
        float(np.log(residuals[k] / residuals[k + 1]) / np.log(steps[k] / steps[k + 1]))
        if residuals[k] > 0 and residuals[k + 1] > 0 else float("nan")
        for k in range(len(steps) - 1))
    s = probe_step
    plus = (f(s) - f(-s)) / (2 * s)
    minus = (f(1j * s) - f(-1j * s)) / (2j * s)
    a_est, b_est = 0.5 * (plus + minus), 0.5 * (plus - minus)

    def rel(est, exact):
        return abs(est - exact) / abs(exact) if exact != 0 else abs(est - exact)

    probe = {"a": a, "b": b, "a_estimate": a_est, "b_estimate": b_est,
             "a_relative_error": rel(a_est, a), "b_relative_error": rel(b_est, b)}
    return VariationReport(tuple(steps), tuple(residuals), orders, (a, b), probe)


def tb_differential(q: GridField, k: float) -> GridField:
    """k conj(q)/|q| with zero cells set to 0 and recorded in ``flags``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    zero = _zero_cells(q)
    mod = np.where(zero, 1.0, np.abs(q.samples))
    vals = np.where(zero, 0, k * np.conj(q.samples) / mod)
    return q.with_samples(vals, flags=zero & q.mask)


def essential_sup(mu: GridField) -> float:
    """max |mu| over masked-in cells that are not flagged."""
    keep = mu.mask if mu.flags is None else mu.mask & ~mu.flags
    return float(np.max(np.abs(mu.samples[keep]), initial=0.0))


def pairing_mu_q(mu: GridField, q: GridField) -> complex:
    _check_same(mu, q)
    return q.integrate(mu.samples * q.samples)


class ConvexityProbe(NamedTuple):
    margin: float
    diagnostic: float
    degenerate: bool


def normalized(q: GridField) -> GridField:
    return q.scaled(1.0 / l1_norm_grid(q))


def strict_convexity_probe(q1: GridField, q2: GridField, distinct_tol: float = 1e-12) -> ConvexityProbe:
    """2 - ||q1 + q2|| for unit-norm q1, q2, with the equality diagnostic

        int (1 - Re(conj(q1) q2 / |q1 q2|)) |q2|,

    which vanishes exactly when q2 is a positive multiple of q1 almost everywhere.
    """
    _check_same(q1, q2)
    for name, q in (("q1", q1), ("q2", q2)):
        norm = l1_norm_grid(q)
        if abs(norm - 1) > NORMALIZATION_TOL:
            raise NotNormalized(f"{name} has norm {norm:.12g}")
    margin = 2.0 - l1_norm_grid(q1 + q2)
    degenerate = l1_norm_grid(q1 - q2) <= distinct_tol
    m1, m2 = np.abs(q1.samples), np.abs(q2.samples)
    both = (m1 > 0) & (m2 > 0)
    cos = np.where(both, np.real(np.conj(q1.samples) * q2.samples) / np.where(both, m1 * m2, 1.0), 1.0)
    cos = np.clip(cos, -1.0, 1.0)  # rounding can push |cos| past 1
    diagnostic = q1.integrate((1 - cos) * m2).real
    return ConvexityProbe(0.0 if degenerate else margin, diagnostic, degenerate)
