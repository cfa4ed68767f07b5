"""Named invariant checks grouped into suites, and the runner behind ``l1linf verify``.

Each check draws from its own generator, seeded by the suite seed together with
a CRC of the check name, so results do not depend on which other checks run or
on the order in which worker threads finish.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import finsler as fz
from . import integral_ops as io_ops
from . import jet_geometry as jg
from . import qdiff as qd
from . import torus as tr
from .charts import ChartTransition, PolynomialMap
from .errors import InvalidConfig

SUITES = ("jet", "finsler", "torus", "qdiff", "integral", "all")
FORMATS = ("csv", "json")
RELATIONS = {
    "le": (lambda v, t: v <= t, "<="),
    "lt": (lambda v, t: v < t, "<"),
    "ge": (lambda v, t: v >= t, ">="),
    "gt": (lambda v, t: v > t, ">"),
}
MAX_CONDITION = 1e3


def check_rng(seed: int, name: str) -> np.random.Generator:
    """Generator for one check: independent of every other check name."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, zlib.crc32(name.encode())])))


def thread_count() -> int:
    raw = os.environ.get("L1LINF_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise InvalidConfig(f"L1LINF_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise InvalidConfig(f"L1LINF_THREADS must be a positive integer, got {raw!r}")
    return n


# ---------------------------------------------------------------------------
# configuration and reports

@dataclass(frozen=True)
class SuiteConfig:
    suite: str
    seed: int = 0
    samples: int | None = None
    grid: int | None = None
    tolerances: dict = field(default_factory=dict)
    output: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.suite not in SUITES:
            raise InvalidConfig(f"unknown suite {self.suite!r}; choose from {', '.join(SUITES)}")
        if not (0 <= self.seed < 2 ** 64):
            raise InvalidConfig("seed must be a 64-bit unsigned integer")
        if self.samples is not None and self.samples < 1:
            raise InvalidConfig("samples must be at least 1")
        if self.grid is not None and self.grid < 16:
            raise InvalidConfig("grid must be at least 16")
        if self.format not in FORMATS:
            raise InvalidConfig(f"format must be one of {', '.join(FORMATS)}")
        known = {c.name for c in checks_for(self.suite)}
        for name, value in self.tolerances.items():
            if name not in known:
                raise InvalidConfig(f"no check named {name!r} in suite {self.suite!r}")
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0):
                raise InvalidConfig(f"tolerance for {name!r} must be a finite non-negative number")


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: float
    tolerance: float
    relation: str
    passed: bool
    seconds: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class SuiteReport:
    suite: str
    seed: int
    results: tuple

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> list:
        return [r for r in self.results if not r.passed]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "measured", "tolerance", "relation", "passed"])
        for r in self.results:
            w.writerow([r.name, format_float(r.measured), format_float(r.tolerance), r.relation,
                        "true" if r.passed else "false"])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"suite": self.suite, "seed": self.seed, "passed": self.passed,
               "checks": [{"check": r.name, "measured": _json_float(r.measured),
                           "tolerance": _json_float(r.tolerance), "relation": r.relation,
                           "passed": r.passed} for r in self.results]}
        return json.dumps(doc, indent=2) + "\n"

    def summary(self) -> str:
        lines = []
        for r in self.results:
            sym = RELATIONS[r.relation][1]
            lines.append(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<36} {r.measured:.3e} {sym} {r.tolerance:.3e}"
                         f"  ({r.seconds:.2f} s)")
        n_fail = len(self.failures)
        lines.append(f"{len(self.results) - n_fail}/{len(self.results)} checks passed")
        return "\n".join(lines)


def format_float(x: float) -> str:
    return "%.17g" % x


def _json_float(x: float):
    return x if math.isfinite(x) else str(x)


# ---------------------------------------------------------------------------
# check registry

@dataclass(frozen=True)
class Check:
    name: str
    run: Callable  # (rng, samples, grid) -> measured value
    tolerance: float
    relation: str = "le"
    samples: int = 1
    grid: int = 0

    @property
    def suite(self) -> str:
        return self.name.split(".", 1)[0]


_REGISTRY: list[Check] = []


def _check(name, tolerance, relation="le", samples=1, grid=0):
    def wrap(fn):
        _REGISTRY.append(Check(name, fn, float(tolerance), relation, samples, grid))
        return fn
    return wrap


def checks_for(suite: str) -> list[Check]:
    if suite == "all":
        return sorted(_REGISTRY, key=lambda c: c.name)
    return sorted((c for c in _REGISTRY if c.suite == suite), key=lambda c: c.name)


def run_check(check: Check, seed: int, samples: int | None = None, grid: int | None = None,
              tolerance: float | None = None) -> CheckResult:
    rng = check_rng(seed, check.name)
    tol = check.tolerance if tolerance is None else float(tolerance)
    t0 = time.perf_counter()
    measured = float(check.run(rng, samples or check.samples, grid or check.grid))
    elapsed = time.perf_counter() - t0
    ok = bool(RELATIONS[check.relation][0](measured, tol)) and not math.isnan(measured)
    return CheckResult(check.name, measured, tol, check.relation, ok, elapsed)


def run_suite(cfg: SuiteConfig) -> SuiteReport:
    """Run every check of ``cfg.suite``; write the report when ``cfg.output`` is set."""
    checks = checks_for(cfg.suite)

    def one(c: Check) -> CheckResult:
        return run_check(c, cfg.seed, cfg.samples, cfg.grid, cfg.tolerances.get(c.name))

    workers = min(thread_count(), len(checks))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, checks))
    else:
        results = [one(c) for c in checks]
    report = SuiteReport(cfg.suite, cfg.seed, tuple(sorted(results, key=lambda r: r.name)))
    if cfg.output is not None:
        text = report.to_csv() if cfg.format == "csv" else report.to_json()
        try:
            with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write report to {cfg.output}: {exc.strerror or exc}") from exc
    return report


# ---------------------------------------------------------------------------
# jet suite

def random_transition(rng: np.random.Generator, n: int, degree: int = 3) -> ChartTransition:
    """A polynomial chart change evaluated at a point where its Jacobian is well conditioned."""
    while True:
        poly = PolynomialMap.random(rng, n, degree=degree)
        z = 0.5 * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        t = ChartTransition.from_polynomial(poly, z)
        if t.condition_number < MAX_CONDITION:
            return t


def random_point(rng: np.random.Generator, kind: jg.BundleKind, z) -> jg.SecondOrderPoint:
    n = len(z)
    blocks = [rng.standard_normal(n) + 1j * rng.standard_normal(n) for _ in range(3)]
    return jg.SecondOrderPoint(kind, z, *blocks)


EQUIVARIANT_MAPS = {
    "flip": (jg.flip, jg.BundleKind.TT),
    "switch": (jg.switch, jg.BundleKind.TTstar),
    "dualize": (jg.dualize, jg.BundleKind.TTstar),
}


def equivariance_error(rng: np.random.Generator, which: str, cases: int) -> float:
    """max componentwise |transport(m(p)) - m(transport(p))| over random cases, dims 1-3."""
    fn, kind = EQUIVARIANT_MAPS[which]
    worst = 0.0
    for k in range(cases):
        t = random_transition(rng, 1 + k % 3)
        p = random_point(rng, kind, t.point)
        worst = max(worst, jg.transport(fn(p), t).max_difference(fn(jg.transport(p, t))))
    return worst


for _which in EQUIVARIANT_MAPS:
    _check(f"jet.{_which}_equivariance", 1e-9, samples=1000)(
        lambda rng, s, g, _w=_which: equivariance_error(rng, _w, s))


@_check("jet.flip_involution", 0.0, samples=1000)
def _flip_involution(rng, samples, grid):
    worst = 0.0
    for k in range(samples):
        n = 1 + k % 3
        p = random_point(rng, jg.BundleKind.TT, rng.standard_normal(n) + 1j * rng.standard_normal(n))
        worst = max(worst, jg.flip(jg.flip(p)).max_difference(p))
    return worst


def random_curve_pair(rng: np.random.Generator, n: int) -> tuple[jg.Curve, jg.Curve]:
    """Cubic curves in TM and T*M over the same base curve."""
    def cubic():
        return rng.standard_normal((4, n)) + 1j * rng.standard_normal((4, n))

    zc = cubic()
    return jg.Curve.polynomial(zc, cubic()), jg.Curve.polynomial(zc, cubic())


@_check("jet.pairing_derivative", 1e-6, samples=200)
def _pairing_derivative(rng, samples, grid):
    worst = 0.0
    for k in range(samples):
        cv, cw = random_curve_pair(rng, 1 + k % 3)
        worst = max(worst, jg.pairing_derivative_check(cv, cw, h=1e-5))
    return worst


@_check("jet.pairing_derivative_order", 0.5, samples=200)
def _pairing_derivative_order(rng, samples, grid):
    """max |r(h)/r(h/2) - 4| at h = 1e-3."""
    worst = 0.0
    for k in range(samples):
        cv, cw = random_curve_pair(rng, 1 + k % 3)
        ratio = jg.pairing_derivative_check(cv, cw, h=1e-3) / jg.pairing_derivative_check(cv, cw, h=5e-4)
        worst = max(worst, abs(ratio - 4.0))
    return worst


@_check("jet.symplectic_pairing", 1e-12, samples=500)
def _symplectic_pairing(rng, samples, grid):
    """max |P(V, dualize(W)) - 2 omega(W, V)| relative to the block sizes."""
    worst = 0.0
    for k in range(samples):
        n = 1 + k % 3
        z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        V = random_point(rng, jg.BundleKind.TTstar, z).replace(f=f)
        W = random_point(rng, jg.BundleKind.TTstar, z).replace(f=f)
        lhs = jg.pairing_second_order(V, jg.dualize(W))
        rhs = 2 * jg.symplectic_form(W, V)
        scale = max(1.0, float(np.max(np.abs(V.as_array()))) * float(np.max(np.abs(W.as_array()))))
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


# ---------------------------------------------------------------------------
# torus suite

@_check("torus.duality_gap", 1e-12, samples=10000)
def _torus_duality(rng, samples, grid):
    tau, q = tr.random_arrays(rng, samples)
    return float(np.max(tr.infinitesimal_duality_gaps(tau, q)))


@_check("torus.hamiltonian_duality", 1e-12, samples=10000)
def _torus_hamiltonian(rng, samples, grid):
    tau, q = tr.random_arrays(rng, samples)
    return float(np.max(tr.hamiltonian_duality_checks(tau, q)))


@_check("torus.tb_round_trip", 1e-12, samples=10000)
def _torus_round_trip(rng, samples, grid):
    tau, q = tr.random_arrays(rng, samples)
    back = tr.tb_inverse_kernel(tau, tr.tb_kernel(tau, q))
    return float(np.max(np.abs(back - q)))


@_check("torus.levi_eigenvalues", 1e-10, samples=10000)
def _torus_levi_eigen(rng, samples, grid):
    worst = 0.0
    for p in tr.random_points(rng, samples):
        lev = tr.levi_n(p)
        worst = max(worst, float(np.max(np.abs(lev.eigenvalues - lev.formula_eigenvalues))))
    return worst


@_check("torus.levi_signature_failures", 0.0, samples=10000)
def _torus_levi_signature(rng, samples, grid):
    bad = 0
    for p in tr.random_points(rng, samples):
        bad += tr.levi_n(p).signature != (1, -1)
        bad += not tr.levi_tau(tr.tb_map(p)).positive_definite
    return float(bad)


@_check("torus.levi_sign_values", 1e-12, samples=1000)
def _torus_levi_values(rng, samples, grid):
    """Relative error of the Levi form on (Im tau, i q) and (0, 1)."""
    worst = 0.0
    for p in tr.random_points(rng, samples):
        M = tr.levi_n(p).matrix
        t, q = p.tau.imag, p.fiber
        h = tr.hermitian_form(M, [t, 1j * q])
        v = tr.hermitian_form(M, [0, 1])
        eh, ev = -abs(q) * t / 2, t / (2 * abs(q))
        worst = max(worst, abs(h - eh) / abs(eh), abs(v - ev) / abs(ev))
    return worst


@_check("torus.horizontal_cr_defect", 1e-6, samples=100)
def _torus_cr(rng, samples, grid):
    worst = 0.0
    for _ in range(samples):
        tau = rng.uniform(-2, 2) + 1j * np.exp(rng.uniform(np.log(0.2), np.log(5)))
        worst = max(worst, tr.horizontal_cr_check(tr.unit_sphere_point(tau, rng.uniform(0, 2 * np.pi))).linearity_defect)
    return worst


@_check("torus.curvature", 1e-3)
def _torus_curvature(rng, samples, grid):
    return tr.curvature_check(h=0.01)


@_check("torus.curvature_order", 0.5)
def _torus_curvature_order(rng, samples, grid):
    """|e(h)/e(h/2) - 4| at h = 0.01."""
    return abs(tr.curvature_check(h=0.01) / tr.curvature_check(h=0.005) - 4.0)


# ---------------------------------------------------------------------------
# finsler suite

DUAL_PAIRS = (("l1", "linf"), ("linf", "l1"), ("l2", "l2"))


def _random_xi(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


@_check("finsler.analytic_duals", 1e-10, samples=100)
def _finsler_analytic(rng, samples, grid):
    worst = 0.0
    for src, dst in DUAL_PAIRS:
        for k in range(samples):
            n = 1 + k % 4
            xi = _random_xi(rng, n)
            F = fz.dual_metric(fz.BUILTINS[src](n), None, xi, method="analytic").value
            ref = fz.BUILTINS[dst](n)(None, xi)
            worst = max(worst, abs(F - ref) / ref)
    return worst


@_check("finsler.blackbox_duals", 1e-3, samples=100)
def _finsler_blackbox(rng, samples, grid):
    worst = 0.0
    for src, dst in DUAL_PAIRS:
        for k in range(samples):
            n = 1 + k % 4
            xi = _random_xi(rng, n)
            G = fz.as_blackbox(fz.BUILTINS[src](n))
            F = fz.dual_metric(G, None, xi, method="optimize", seed=int(rng.integers(2 ** 32))).value
            ref = fz.BUILTINS[dst](n)(None, xi)
            worst = max(worst, abs(F - ref) / ref)
    return worst


@_check("finsler.reflexive_gap", 1e-3, samples=5)
def _finsler_reflexive(rng, samples, grid):
    worst = 0.0
    for name in ("l1", "linf", "l2"):
        for n in (2, 3):
            pts = rng.standard_normal((samples, n)) + 1j * rng.standard_normal((samples, n))
            worst = max(worst, fz.reflexive_duality_gap(fz.BUILTINS[name](n), None, pts, method="optimize",
                                                        seed=int(rng.integers(2 ** 32))))
    return worst


@_check("finsler.torus_dual", 1e-6, samples=50)
def _finsler_torus(rng, samples, grid):
    G = fz.as_blackbox(fz.torus_l1_metric())
    worst = 0.0
    for _ in range(samples):
        tau = rng.uniform(-2, 2) + 1j * np.exp(rng.uniform(np.log(0.1), np.log(10)))
        mu = _random_xi(rng, 1)
        F = fz.dual_metric(G, np.array([tau]), mu, method="optimize", seed=int(rng.integers(2 ** 32))).value
        ref = abs(mu[0]) / (2 * tau.imag)
        worst = max(worst, abs(F - ref) / ref)
    return worst


def royden_ratio(G: fz.FinslerMetric, x, xi, dx, dxi) -> float:
    """Largest ratio of consecutive Royden residuals over scales 1e-2, 1e-3, 1e-4."""
    r = fz.royden_residuals(G, x, xi, dx, dxi, scales=(1e-2, 1e-3, 1e-4))
    return max(r[k + 1] / r[k] for k in range(len(r) - 1))


@_check("finsler.royden_torus", 1.0, relation="lt", samples=10)
def _royden_torus(rng, samples, grid):
    G = fz.torus_l1_metric()
    worst = 0.0
    for _ in range(samples):
        x = np.array([rng.uniform(-1, 1) + 1j * rng.uniform(0.5, 3)])
        worst = max(worst, royden_ratio(G, x, _random_xi(rng, 1), _random_xi(rng, 1), _random_xi(rng, 1)))
    return worst


@_check("finsler.royden_weighted", 1.0, relation="lt", samples=10)
def _royden_weighted(rng, samples, grid):
    worst = 0.0
    for _ in range(samples):
        G = fz.weighted_metric(rng.uniform(0.5, 2.0, 3), power=1.5)
        x = _random_xi(rng, 2)
        worst = max(worst, royden_ratio(G, x, _random_xi(rng, 3), _random_xi(rng, 2), _random_xi(rng, 3)))
    return worst


# ---------------------------------------------------------------------------
# qdiff suite

def disk_field(n: int, coefficients) -> qd.GridField:
    return qd.PolynomialDifferential(tuple(coefficients)).on_grid(qd.Domain.unit_disk(), n)


@_check("qdiff.variation_fd", 1e-3, grid=512)
def _qdiff_variation(rng, samples, grid):
    rep = qd.fd_check_l1_variation(disk_field(grid, (0, 1)), disk_field(grid, (1,)), scheme="central")
    return max(rep.residuals)


@_check("qdiff.phase_probe", 1e-2, grid=512)
def _qdiff_probe(rng, samples, grid):
    rep = qd.fd_check_l1_variation(disk_field(grid, (0, 1)), disk_field(grid, (1, 1 + 1j)), scheme="central")
    return max(rep.probe["a_relative_error"], rep.probe["b_relative_error"])


def random_differential(rng, n: int, degree: int = 3) -> qd.GridField:
    return disk_field(n, rng.standard_normal(degree + 1) + 1j * rng.standard_normal(degree + 1))


@_check("qdiff.strict_convexity_margin", 0.0, relation="gt", samples=100, grid=128)
def _qdiff_strict(rng, samples, grid):
    worst = math.inf
    for _ in range(samples):
        q1 = qd.normalized(random_differential(rng, grid))
        q2 = qd.normalized(random_differential(rng, grid))
        worst = min(worst, qd.strict_convexity_probe(q1, q2).margin)
    return worst


@_check("qdiff.rotated_pair", 1e-3, grid=128)
def _qdiff_rotated(rng, samples, grid):
    q1 = qd.normalized(disk_field(grid, (0, 1)))
    return abs(qd.strict_convexity_probe(q1, q1.scaled(1j)).margin - (2 - math.sqrt(2)))


@_check("qdiff.extremality_equality", 1e-10, samples=20, grid=128)
def _qdiff_equality(rng, samples, grid):
    worst = 0.0
    for _ in range(samples):
        q = random_differential(rng, grid)
        mu = qd.tb_differential(q, 1.0)
        worst = max(worst, abs(qd.pairing_mu_q(mu, q).real - qd.l1_norm_grid(q)) / qd.l1_norm_grid(q))
    return worst


def perturbed_unit_sup(rng, q: qd.GridField) -> qd.GridField:
    """conj(q)/|q| times a smooth phase and modulus perturbation, sup norm 1."""
    Z = q.centers
    c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    psi = 0.5 * np.real(c[0] + c[1] * Z + c[2] * Z * Z)
    shrink = 0.25 * (1 + np.cos(rng.uniform(0, 2 * np.pi) + 3 * np.real(Z)))
    mu = qd.tb_differential(q, 1.0)
    vals = mu.samples * np.exp(1j * psi) * (1 - shrink)
    vals = vals / np.max(np.abs(vals[q.mask]))
    return mu.with_samples(vals)


@_check("qdiff.extremality_gap", 1e-3, relation="gt", samples=50, grid=128)
def _qdiff_gap(rng, samples, grid):
    worst = math.inf
    for _ in range(samples):
        q = qd.normalized(random_differential(rng, grid))
        mu = perturbed_unit_sup(rng, q)
        worst = min(worst, qd.l1_norm_grid(q) - qd.pairing_mu_q(mu, q).real)
    return worst


# ---------------------------------------------------------------------------
# integral suite

def _gaussian(n: int) -> io_ops.CompactlySupportedField:
    return io_ops.CompactlySupportedField.gaussian(n)


def _cr_report(rng, samples, grid) -> io_ops.CRReport:
    probes = io_ops.default_probes(samples, radius=1.0, seed=int(rng.integers(2 ** 32)))
    return io_ops.verify_cr_relations(_gaussian, io_ops.gaussian_dz(), probes, resolutions=(grid, 2 * grid))


@_check("integral.cr_residual", 1e-2, samples=8, grid=256)
def _integral_cr(rng, samples, grid):
    return _cr_report(rng, samples, grid).levels[0].worst


@_check("integral.cr_order", 0.9, relation="ge", samples=8, grid=256)
def _integral_order(rng, samples, grid):
    return min(o for orders in _cr_report(rng, samples, grid).orders.values() for o in orders)


@_check("integral.disk_cauchy", 2e-3, grid=256)
def _integral_disk(rng, samples, grid):
    F = io_ops.CompactlySupportedField.disk_indicator(2 * grid)
    pts = np.array([0.5, -0.3 + 0.4j, 0.1j, 2.0, -1.5 + 1j, 3j])
    exact = np.where(np.abs(pts) < 1, np.conj(pts), 1 / pts)
    return float(np.max(np.abs(io_ops.cauchy_transform(F, pts) - exact)))


@_check("integral.disk_beurling_exterior", 5e-3, grid=256)
def _integral_disk_h(rng, samples, grid):
    F = io_ops.CompactlySupportedField.disk_indicator(2 * grid)
    pts = np.array([2.0, -1.5 + 1j, 3j])
    return float(np.max(np.abs(io_ops.beurling_transform(F, pts) + 1 / pts ** 2)))


@_check("integral.exterior_holomorphic", 1e-3, samples=8, grid=256)
def _integral_exterior(rng, samples, grid):
    F = io_ops.CompactlySupportedField.disk_indicator(grid)
    pts = (1.3 + rng.uniform(0, 1, samples)) * np.exp(2j * np.pi * rng.uniform(0, 1, samples))
    d = 1e-3
    worst = 0.0
    for transform in (io_ops.cauchy_transform, io_ops.beurling_transform):
        vals = [transform(F, pts + s) for s in (d, -d, 1j * d, -1j * d)]
        dzbar = 0.5 * ((vals[0] - vals[1]) / (2 * d) + 1j * (vals[2] - vals[3]) / (2 * d))
        worst = max(worst, float(np.max(np.abs(dzbar))))
    return worst


@_check("integral.ahlfors_weill_sup", 1e-12)
def _integral_aw(rng, samples, grid):
    phi = qd.PolynomialDifferential((0, 0, 0, 0, 1), variable="inverse")
    return abs(io_ops.beltrami_sup(phi) - 0.5)
