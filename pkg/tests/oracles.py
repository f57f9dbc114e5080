"""Independent numerical oracles used by the test suite.

Everything here deliberately avoids the package's own evaluation paths:
high-precision derivative stacks come from mpmath differentiation of the
closed correlation functions, the cancellation-prone scalar formulas are
re-evaluated in 50-digit arithmetic, and the closed-form charge correlation
derivatives are produced symbolically with sympy acting directly on the
two-dimensional partial derivatives of C.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import mpmath as mp
import numpy as np

from topocharge import custom_model

mp.mp.dps = 50


def mp_correlation(model_kind):
    if model_kind == "ring":
        return lambda x: mp.besselj(0, x)
    if model_kind == "gauss":
        return lambda x: mp.e ** (-(x**2) / 2)
    if model_kind == "sinc":
        return lambda x: mp.sin(x) / x if x != 0 else mp.mpf(1)
    raise ValueError(model_kind)


def mp_stack(model_kind, r, max_order=6):
    """C^(0..max_order)(r) by high-precision differentiation."""
    C = mp_correlation(model_kind)
    r = mp.mpf(r)
    if r == 0:
        coeffs = mp.taylor(C, 0, max_order) if model_kind != "sinc" else mp.taylor(
            lambda x: mp.sin(x) / x if x != 0 else mp.mpf(1), mp.mpf("1e-25"), max_order
        )
        return [coeffs[j] * mp.factorial(j) for j in range(max_order + 1)]
    return [mp.diff(C, r, j) for j in range(max_order + 1)]


def mp_ratio_scalars(model_kind, r):
    """The ratio-form derived scalars evaluated without cancellation loss."""
    c = mp_stack(model_kind, r)
    r = mp.mpf(r)
    return {
        "H": -c[1] / r,
        "I": (r * c[2] - c[1]) / r**2,
        "L": (r**2 * c[3] - 2 * r * c[2] + 2 * c[1]) / r**3,
        "N": 3 * (r * c[2] - c[1]) / r**3,
        "Q": -(r**3 * c[4] - 3 * r**2 * c[3] + 6 * r * c[2] - 6 * c[1]) / r**4,
        "R": -3 * (r**2 * c[3] - 3 * r * c[2] + 3 * c[1]) / r**4,
        "T": -(r**4 * c[5] - 4 * r**3 * c[4] + 12 * r**2 * c[3] - 24 * r * c[2] + 24 * c[1]) / r**5,
        "U": -3 * (r**3 * c[4] - 5 * r**2 * c[3] + 12 * r * c[2] - 12 * c[1]) / r**5,
        "V": -15 * (r**2 * c[3] - 3 * r * c[2] + 3 * c[1]) / r**5,
    }


# ---------------------------------------------------------------------------
# a 3-D one-shell correlation (sin r / r) through the Custom contract


def _sinc_polys(max_order=6):
    """(p_j, q_j) with (sin r / r)^(j) = p_j(1/r) sin r + q_j(1/r) cos r."""
    p, q = [Fraction(0), Fraction(1)], [Fraction(0)]
    out = [(tuple(p), tuple(q))]

    def s2_dp(poly):
        res = [Fraction(0)] * (len(poly) + 1)
        for k, c in enumerate(poly):
            if k:
                res[k + 1] += k * c
        return res

    def add(a, b, sb=1):
        n = max(len(a), len(b))
        return [
            (a[k] if k < len(a) else 0) + sb * (b[k] if k < len(b) else 0)
            for k in range(n)
        ]

    for _ in range(max_order):
        new_p = add([-c for c in s2_dp(p)], q, sb=-1)
        new_q = add([-c for c in s2_dp(q)], p)
        p, q = new_p, new_q
        out.append((tuple(p), tuple(q)))
    return out


_SINC_POLYS = [
    (tuple(float(c) for c in p), tuple(float(c) for c in q)) for p, q in _sinc_polys()
]


def _sinc_deriv(order, r):
    if r < 0.6:
        total = 0.0
        for k in range((order + 1) // 2, 40):
            fall = 1.0
            for i in range(order):
                fall *= 2 * k - i
            total += (-1.0) ** k / math.factorial(2 * k + 1) * fall * r ** (2 * k - order)
        return total
    s = 1.0 / r
    pv = sum(c * s**i for i, c in enumerate(_SINC_POLYS[order][0]))
    qv = sum(c * s**i for i, c in enumerate(_SINC_POLYS[order][1]))
    return pv * math.sin(r) + qv * math.cos(r)


def sinc_model():
    """C(r) = sin(r)/r: the 3-D single-shell spectrum, as a Custom model."""
    taylor = [0.0] * 9
    for k in range(5):
        taylor[2 * k] = (-1.0) ** k / math.factorial(2 * k + 1)
    return custom_model(_sinc_deriv, taylor, label="sinc")


# ---------------------------------------------------------------------------
# symbolic charge-correlation oracle (sympy, built from 2-D partials of C)


@lru_cache(maxsize=None)
def _symbolic_g(kind_tag, model_kind):
    import sympy as sp

    x, y = sp.symbols("x y", positive=True)
    rho = sp.sqrt(x**2 + y**2)
    if model_kind == "ring":
        C2d = sp.besselj(0, rho)
    else:
        C2d = sp.exp(-(rho**2) / 2)

    def axis(p, q):
        return sp.diff(C2d, x, p, y, q).subs(y, 0).rewrite(sp.besselj).simplify()

    r = sp.symbols("r", positive=True)

    def ax(p, q):
        return sp.diff(C2d, x, p, y, q).subs(y, 0).subs(x, r)

    c0 = {  # coincidence constants
        "ring": {"c2": sp.Rational(-1, 2), "c4": sp.Rational(3, 8), "c6": sp.Rational(-5, 16)},
        "gauss": {"c2": sp.Integer(-1), "c4": sp.Integer(3), "c6": sp.Integer(-15)},
    }[model_kind]

    if kind_tag == "critical":
        F0 = -c0["c2"]
        F = -ax(2, 0)
        H = -ax(0, 2)
        d = sp.Abs(2 * c0["c4"] / (3 * sp.pi * sp.sqrt(3) * c0["c2"]))
        psi = (H - F) ** 3 / sp.sqrt((F0**2 - F**2) * (F0**2 - H**2))
        h = sp.diff(psi, r) / (r * (H - F))
    elif kind_tag == "umbilic":
        L0 = c0["c4"] / 3
        L = ax(2, 2)
        M = ax(4, 0)
        N = ax(0, 4)
        P = -ax(5, 0)
        Q = -ax(3, 2)
        R = -ax(1, 4)
        W = (M + N - 2 * L) / 4
        d = sp.Abs(3 * c0["c6"] / (10 * sp.pi * c0["c4"]))
        detk = (L0**2 - W**2) * (L0**2 - L**2)
        phi = r * (Q - R) ** 2 / (4 * sp.sqrt(detk))
        psi = Q * (P + R - 2 * Q) / (4 * sp.sqrt(detk))
        h = sp.diff(phi, r) + psi
    else:
        raise ValueError(kind_tag)
    g = sp.diff(h, r) / (4 * sp.pi**2 * d**2 * r)
    return sp.lambdify(r, g, modules="mpmath")


def symbolic_g(kind_tag, model_kind, r_value) -> float:
    """g(r) for critical/umbilic points via sympy differentiation."""
    fn = _symbolic_g(kind_tag, model_kind)
    with mp.workdps(40):
        return float(fn(mp.mpf(r_value)))
