"""Vectorised double-double arithmetic (error-free transformations).

Values are pairs ``(hi, lo)`` of float64 arrays with ``hi + lo`` carrying
about 106 significant bits; :func:`to_float` rounds back to double.
"""

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1


def two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def from_float(a):
    a = np.asarray(a, dtype=float)
    return a, np.zeros_like(a)


def add(x, y):
    s, e = two_sum(x[0], y[0])
    e = e + x[1] + y[1]
    return _quick_two_sum(s, e)


def mul(x, y):
    p, e = two_prod(x[0], y[0])
    e = e + (x[0] * y[1] + x[1] * y[0])
    return _quick_two_sum(p, e)


def scale(x, c: float):
    """Multiplication by a power of two (exact)."""
    return x[0] * c, x[1] * c


def div(x, y):
    q1 = x[0] / y[0]
    r = add(x, scale(mul(from_float(q1), y), -1.0))
    q2 = r[0] / y[0]
    r = add(r, scale(mul(from_float(q2), y), -1.0))
    q3 = r[0] / y[0]
    s = _quick_two_sum(q1, q2)
    return add(s, from_float(q3))


def to_float(x):
    return x[0] + x[1]
