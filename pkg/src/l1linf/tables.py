"""Deterministic CSV tables behind ``l1linf table``."""

from __future__ import annotations

import csv
import io
import math

import numpy as np

from . import finsler as fz
from . import integral_ops as io_ops
from . import torus as tr
from .errors import InvalidParams
from .suites import check_rng, format_float

TABLE_KINDS = ("levi_scan", "dual_norm_table", "cr_convergence")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(float(v))
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def levi_scan(n: int = 10, imtau=(0.1, 10.0), modulus=(1e-3, 10.0)) -> str:
    """Eigenvalues of the Levi matrix on an n x n lattice of (Im tau, |q|).

    Re tau is 0 and the phase of q advances by 2 pi / n along each lattice row.
    """
    if n < 1:
        raise InvalidParams("levi_scan needs n >= 1")
    if not (0 < imtau[0] <= imtau[1] and 0 < modulus[0] <= modulus[1]):
        raise InvalidParams("lattice ranges must be positive and increasing")
    rows = []
    for i, t in enumerate(np.geomspace(imtau[0], imtau[1], n)):
        for j, m in enumerate(np.geomspace(modulus[0], modulus[1], n)):
            q = m * np.exp(2j * np.pi * j / n)
            lev = tr.levi_n(tr.TorusFiberPoint.q(1j * t, q))
            lam_minus, lam_plus = lev.formula_eigenvalues
            rows.append((0.0, t, q.real, q.imag, lam_plus, lam_minus, lev.signature == (1, -1)))
    return _csv(["re_tau", "im_tau", "re_q", "im_q", "lambda_plus", "lambda_minus", "sign_ok"], rows)


def dual_norm_table(metric: str = "l1", dim: int = 3, count: int = 5, seed: int = 0) -> str:
    """Closed-form against optimised dual norms at seeded random fiber points."""
    if metric not in fz.BUILTINS:
        raise InvalidParams(f"metric must be one of {', '.join(sorted(fz.BUILTINS))}")
    if dim < 1 or count < 1:
        raise InvalidParams("dim and count must be at least 1")
    rng = check_rng(seed, f"table.dual_norm.{metric}.{dim}")
    G = fz.BUILTINS[metric](dim)
    B = fz.as_blackbox(G)
    rows = []
    for k in range(count):
        xi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        exact = fz.dual_metric(G, None, xi, method="analytic").value
        opt = fz.dual_metric(B, None, xi, method="optimize", seed=int(rng.integers(2 ** 32))).value
        rows.append((metric, dim, k, exact, opt, abs(opt - exact) / exact))
    return _csv(["metric", "dim", "xi_index", "analytic", "optimized", "gap"], rows)


def cr_convergence(resolutions=(128, 256), probes: int = 8, seed: int = 0) -> str:
    """CR residuals of T and H for the Gaussian bump at increasing resolutions.

    ``residual_T`` is the worse of the two T relations, ``residual_H`` the H
    relation; ``order`` compares the worst residual with the previous row.
    """
    resolutions = tuple(int(r) for r in resolutions)
    if not resolutions or any(r < 16 for r in resolutions) or list(resolutions) != sorted(set(resolutions)):
        raise InvalidParams("resolutions must be distinct, increasing and at least 16")
    if probes < 1:
        raise InvalidParams("need at least one probe")
    rng = check_rng(seed, "table.cr_convergence")
    pts = io_ops.default_probes(probes, radius=1.0, seed=int(rng.integers(2 ** 32)))
    rows = []
    prev = None
    for n in resolutions:
        lv = io_ops.cr_residuals(io_ops.CompactlySupportedField.gaussian(n), io_ops.gaussian_dz(), pts)
        worst = lv.worst
        order = "" if prev is None else math.log(prev[1] / worst) / math.log(n / prev[0])
        rows.append((n, max(lv.T_zbar, lv.T_z), lv.H_zbar, order))
        prev = (n, worst)
    return _csv(["resolution", "residual_T", "residual_H", "order"], rows)


def emit_table(kind: str, params: dict | None = None) -> str:
    """CSV text for ``kind`` with the given keyword parameters."""
    params = dict(params or {})
    builders = {"levi_scan": levi_scan, "dual_norm_table": dual_norm_table, "cr_convergence": cr_convergence}
    if kind not in builders:
        raise InvalidParams(f"unknown table kind {kind!r}; choose from {', '.join(TABLE_KINDS)}")
    try:
        return builders[kind](**params)
    except TypeError as exc:
        raise InvalidParams(f"bad parameters for {kind}: {exc}") from None
