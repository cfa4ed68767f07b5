"""The Cauchy transform T, the Beurling transform H and the Ahlfors-Weill kernel.

    T(w)(z) = -1/pi  iint w(zeta) / (zeta - z)   dxdy
    H(w)(z) = -1/pi  p.v. iint w(zeta) / (zeta - z)^2  dxdy

Densities are cell-constant on a midpoint grid.  Cells whose centres lie within
NEAR_CELLS + 1/2 widths of ``z`` (in each direction) are integrated exactly
against the kernel; the rest use the midpoint rule.  For H the cells touching
``z`` (one, two on a grid line, four on a node) are merged into one rectangle
carrying their mean value, and the principal value is taken over it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import OriginSingular, ProbeTooCloseToBoundary
from .qdiff import Domain, DomainKind, GridField, PolynomialDifferential

NEAR_CELLS = 1
EDGE_TOL = 1e-9  # in cell widths: closer than this to a grid line counts as on it


class Smoothness(enum.Enum):
    smooth_on_closure = "smooth_on_closure"
    indicator = "indicator"


@dataclass(frozen=True)
class CompactlySupportedField:
    """A density on a planar grid, zero outside the mask."""

    grid: GridField
    smoothness: Smoothness = Smoothness.smooth_on_closure

    def __post_init__(self):
        if self.grid.domain.kind is DomainKind.torus:
            raise ValueError("singular integrals are taken over planar grids")
        object.__setattr__(self, "smoothness", Smoothness(self.smoothness))

    @classmethod
    def gaussian(cls, n: int, center=0.0, width: float = 0.5, box=(-2.0, 2.0, -2.0, 2.0),
                 cutoff: float = 1e-16) -> "CompactlySupportedField":
        """exp(-|z - c|^2 / width^2), set to zero where it drops below ``cutoff``."""
        fn = gaussian_density(center, width, cutoff)
        return cls(GridField.from_function(Domain.rectangle(*box), n, fn), Smoothness.smooth_on_closure)

    @classmethod
    def disk_indicator(cls, n: int) -> "CompactlySupportedField":
        return cls(GridField.from_function(Domain.unit_disk(), n, 1.0), Smoothness.indicator)

    def scaled(self, c: complex) -> "CompactlySupportedField":
        return CompactlySupportedField(self.grid.scaled(c), self.smoothness)

    def __add__(self, other: "CompactlySupportedField") -> "CompactlySupportedField":
        return CompactlySupportedField(self.grid + other.grid, self.smoothness)


def gaussian_density(center=0.0, width: float = 0.5, cutoff: float = 1e-16) -> Callable:
    c = complex(center)

    def fn(z):
        v = np.exp(-np.abs(z - c) ** 2 / width ** 2)
        return np.where(v < cutoff, 0.0, v)

    return fn


def gaussian_dz(center=0.0, width: float = 0.5, cutoff: float = 1e-16) -> Callable:
    """d/dz of :func:`gaussian_density` (zero where the density is cut off)."""
    c = complex(center)
    base = gaussian_density(center, width, cutoff)

    def fn(z):
        return -np.conj(z - c) / width ** 2 * base(z)

    return fn


# ---------------------------------------------------------------------------
# exact cell integrals

def _P(u, v):
    # antiderivative with d^2 P / du dv = u / (u^2 + v^2)
    r2 = u * u + v * v
    log_term = np.where(r2 > 0, 0.5 * v * np.log(np.where(r2 > 0, r2, 1.0)), 0.0)
    atan_term = np.where(u != 0, u * np.arctan(v / np.where(u != 0, u, 1.0)), 0.0)
    return log_term - v + atan_term


def cell_integral_inverse(x0, x1, y0, y1):
    """iint_{[x0,x1]x[y0,y1]} dxdy / (x + iy), corners relative to the singularity."""
    dP = _P(x1, y1) - _P(x0, y1) - _P(x1, y0) + _P(x0, y0)
    dQ = _P(y1, x1) - _P(y1, x0) - _P(y0, x1) + _P(y0, x0)
    return dP - 1j * dQ


def cell_integral_inverse_square(x0, x1, y0, y1):
    """Principal value of iint dxdy / (x + iy)^2 over a rectangle.

    The iterated integral has the closed form i [log-ratio of the corners]; when
    the singularity is inside the rectangle the symmetric principal value
    exceeds it by pi.
    """
    w11, w12 = x0 + 1j * y0, x0 + 1j * y1
    w21, w22 = x1 + 1j * y0, x1 + 1j * y1
    iterated = 1j * (np.log(np.abs(w22 * w11 / (w12 * w21)))
                     + 1j * (np.angle(w22 / w21) - np.angle(w12 / w11)))
    inside = (x0 < 0) & (x1 > 0) & (y0 < 0) & (y1 > 0)
    return iterated + np.where(inside, np.pi, 0.0)


# ---------------------------------------------------------------------------
# transforms

class _Quadrature:
    """Cell data of a density flattened over its support."""

    def __init__(self, field: CompactlySupportedField):
        g = field.grid
        self.grid = g
        self.x0, _, self.y0, _ = g.domain.extents
        self.hx, self.hy = g.spacing
        sel = g.mask & (g.samples != 0)
        self.ix, self.iy = np.nonzero(sel)
        self.centers = g.centers[sel]
        self.values = g.samples[sel]
        self.area = g.cell_area

    def _touching(self, z: complex):
        """Index ranges of the cells whose closed rectangle contains z."""
        out = []
        for t, lo, h in ((z.real, self.x0, self.hx), (z.imag, self.y0, self.hy)):
            s = (t - lo) / h
            k = int(np.floor(s))
            if abs(s - round(s)) <= EDGE_TOL:
                k = int(round(s))
                out.append((k - 1, k))
            else:
                out.append((k, k))
        return out

    def evaluate(self, z: complex, square: bool) -> complex:
        w = self.centers - z
        with np.errstate(divide="ignore", invalid="ignore"):
            kernel = 1.0 / (w * w) if square else 1.0 / w
        weights = kernel * self.area
        reach_x, reach_y = (NEAR_CELLS + 0.5 + EDGE_TOL) * self.hx, (NEAR_CELLS + 0.5 + EDGE_TOL) * self.hy
        near = (np.abs(w.real) <= reach_x) & (np.abs(w.imag) <= reach_y)
        extra = 0j
        if square:
            # the cells touching z are merged into one rectangle with their mean value, so z
            # lies strictly inside it even on grid lines and nodes
            (ax, bx), (ay, by) = self._touching(z)
            touch = (self.ix >= ax) & (self.ix <= bx) & (self.iy >= ay) & (self.iy <= by)
            count = (bx - ax + 1) * (by - ay + 1)
            mean = np.sum(self.values[touch]) / count
            x0, x1 = self.x0 + ax * self.hx - z.real, self.x0 + (bx + 1) * self.hx - z.real
            y0, y1 = self.y0 + ay * self.hy - z.imag, self.y0 + (by + 1) * self.hy - z.imag
            extra = mean * cell_integral_inverse_square(x0, x1, y0, y1)
            near &= ~touch
            weights = np.where(touch, 0.0, weights)
        if near.any():
            c = self.centers[near] - z
            x0, x1 = c.real - 0.5 * self.hx, c.real + 0.5 * self.hx
            y0, y1 = c.imag - 0.5 * self.hy, c.imag + 0.5 * self.hy
            exact = cell_integral_inverse_square(x0, x1, y0, y1) if square else cell_integral_inverse(x0, x1, y0, y1)
            weights = np.array(weights, dtype=complex)
            weights[near] = exact
        return complex(-(np.sum(self.values * weights) + extra) / np.pi)


def _transform(field: CompactlySupportedField, z, square: bool) -> np.ndarray:
    quad = _Quadrature(field)
    z = np.asarray(z, dtype=complex)
    out = np.array([quad.evaluate(complex(p), square) for p in z.ravel()])
    return out.reshape(z.shape)


def cauchy_transform(field: CompactlySupportedField, z) -> np.ndarray:
    """T(w)(z) at the points ``z``."""
    return _transform(field, z, square=False)


def beurling_transform(field: CompactlySupportedField, z) -> np.ndarray:
    """Principal-value H(w)(z) at the points ``z``."""
    return _transform(field, z, square=True)


# ---------------------------------------------------------------------------
# CR relations

class CRResiduals(NamedTuple):
    resolution: int
    T_zbar: float
    T_z: float
    H_zbar: float

    @property
    def worst(self) -> float:
        return max(self.T_zbar, self.T_z, self.H_zbar)


class CRReport(NamedTuple):
    levels: tuple
    orders: dict


def _wirtinger(values_px, values_mx, values_py, values_my, delta):
    dx = (values_px - values_mx) / (2 * delta)
    dy = (values_py - values_my) / (2 * delta)
    return 0.5 * (dx - 1j * dy), 0.5 * (dx + 1j * dy)


def snap_to_centers(grid: GridField, points) -> np.ndarray:
    """Nearest cell centres of ``grid`` to the given points."""
    x0, _, y0, _ = grid.domain.extents
    hx, hy = grid.spacing
    p = np.asarray(points, dtype=complex)
    kx = np.floor((p.real - x0) / hx)
    ky = np.floor((p.imag - y0) / hy)
    return (x0 + (kx + 0.5) * hx) + 1j * (y0 + (ky + 0.5) * hy)


def cr_residuals(field: CompactlySupportedField, density_dz: Callable, probes,
                 stencil: int = 2, margin_cells: int = 5) -> CRResiduals:
    """sup residuals of T_zbar = w, T_z = H(w) and H_zbar = w_z at the probes.

    Probes are moved to the nearest cell centres and differentiated with a
    central stencil of ``stencil`` cells, so every evaluation point is a cell
    centre.  Probes closer than ``margin_cells`` spacings to the boundary of the
    support box raise :class:`ProbeTooCloseToBoundary`.
    """
    g = field.grid
    x0, x1, y0, y1 = g.domain.extents
    hx, hy = g.spacing
    if abs(hx - hy) > 1e-12 * hx:
        raise ValueError("CR checks need square cells")
    probes = snap_to_centers(g, probes)
    reach = (margin_cells + stencil) * hx
    if np.any((probes.real - x0 < reach) | (x1 - probes.real < reach)
              | (probes.imag - y0 < reach) | (y1 - probes.imag < reach)):
        raise ProbeTooCloseToBoundary(f"probes must stay {margin_cells} spacings inside the support box")
    delta = stencil * hx
    quad = _Quadrature(field)
    shifts = np.array([0, delta, -delta, 1j * delta, -1j * delta])
    pts = probes[:, None] + shifts[None, :]
    T = np.array([[quad.evaluate(complex(p), False) for p in row] for row in pts])
    H = np.array([[quad.evaluate(complex(p), True) for p in row] for row in pts])
    T_z, T_zbar = _wirtinger(T[:, 1], T[:, 2], T[:, 3], T[:, 4], delta)
    _, H_zbar = _wirtinger(H[:, 1], H[:, 2], H[:, 3], H[:, 4], delta)
    ix = np.rint((probes.real - x0) / hx - 0.5).astype(int)
    iy = np.rint((probes.imag - y0) / hy - 0.5).astype(int)
    w = g.samples[ix, iy]
    w_z = np.asarray(density_dz(probes), dtype=complex)
    return CRResiduals(g.nx, float(np.max(np.abs(T_zbar - w), initial=0.0)),
                       float(np.max(np.abs(T_z - H[:, 0]), initial=0.0)),
                       float(np.max(np.abs(H_zbar - w_z), initial=0.0)))


def verify_cr_relations(make_field: Callable[[int], CompactlySupportedField], density_dz: Callable,
                        probes, resolutions=(256, 512), **kw) -> CRReport:
    """CR residuals at several resolutions and the observed orders between them."""
    levels = tuple(cr_residuals(make_field(n), density_dz, probes, **kw) for n in resolutions)
    orders = {}
    for name in ("T_zbar", "T_z", "H_zbar"):
        vals = [getattr(lv, name) for lv in levels]
        orders[name] = tuple(
            float(np.log(vals[k] / vals[k + 1]) / np.log(resolutions[k + 1] / resolutions[k]))
            if vals[k] > 0 and vals[k + 1] > 0 else float("nan")
            for k in range(len(vals) - 1))
    return CRReport(levels, orders)


def default_probes(count: int = 16, radius: float = 1.0, seed: int = 0) -> np.ndarray:
    """Deterministic probe points scattered in the disk of the given radius."""
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.uniform(0, 1, count))
    return r * np.exp(2j * np.pi * rng.uniform(0, 1, count))


# ---------------------------------------------------------------------------
# Ahlfors-Weill kernel

def ahlfors_weill(phi: PolynomialDifferential, z) -> np.ndarray:
    """nu(z) = -(1/(2 conj(z)^4)) (|z|^2 - 1)^2 phi(1/conj(z)) for |z| < 1.

    For ``phi`` written in the inverse variable, phi(w) = sum c_k w^{-k}, this
    is -(1/2)(|z|^2 - 1)^2 sum c_k conj(z)^{k-4}, finite at the origin exactly
    when c_k = 0 for k < 4.  In the direct variable the origin is singular
    unless phi vanishes.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) >= 1):
        raise ValueError("the Ahlfors-Weill kernel is evaluated inside the unit disk")
    if phi.is_zero:
        return np.zeros_like(z)
    zb = np.conj(z)
    damping = -0.5 * (np.abs(z) ** 2 - 1) ** 2
    at_origin = z == 0
    if phi.variable == "inverse":
        low_order = any(c != 0 for c in phi.coefficients[:4])
        if low_order and np.any(at_origin):
            raise OriginSingular("terms of order below four blow up at the origin")
        total = np.zeros_like(z)
        safe = np.where(at_origin, 1.0, zb)
        for k, c in enumerate(phi.coefficients):
            if c != 0:
                power = k - 4
                term = safe ** power if power < 0 else zb ** power
                total = total + c * term
        return damping * total
    if np.any(at_origin):
        raise OriginSingular("phi(1/conj(z)) is singular at the origin")
    return damping * phi(1.0 / zb) / zb ** 4


def beltrami_sup(phi: PolynomialDifferential, n: int = 201, exclude_origin: bool = False) -> float:
    """sup |nu| over a polar probe set of the disk (origin included when finite)."""
    r = np.linspace(0.0, 1.0, n, endpoint=False)
    theta = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
    pts = (r[:, None] * np.exp(1j * theta[None, :])).ravel()
    if exclude_origin:
        pts = pts[pts != 0]
    return float(np.max(np.abs(ahlfors_weill(phi, pts))))
