"""Field correlation models C(r) and the two-point correlation scalars
derived from them.

The statistics of an isotropic Gaussian random field are fixed by its
normalized correlation function C(r) = <f(A) f(B)> with C(0) = 1.  Every
covariance between derivatives of the field at two points separated by r
along the x-axis reduces to axis values of partial derivatives of C, which
in turn reduce to the radial derivatives C', C'', ..., C^(6).  This module
provides:

* two built-in models -- the monochromatic ring spectrum, C(r) = J0(r), and
  the squared-exponential C(r) = exp(-r^2/2) -- plus a Custom contract;
* ``eval_derivatives``: the stack C^(0..6)(r) to ~1e-12 relative accuracy;
* ``derived_correlations``: the scalar covariances of first, second and
  third field derivatives (E, F, H; G, I, L, M, N; P..Y) with
  cancellation-safe small-r evaluation via Taylor series of C.

Units: the characteristic wavenumber of the built-ins is 1, so r is measured
in units of its inverse.

Everything here is a pure function of immutable inputs (models are frozen
dataclasses); concurrent evaluation from any number of threads is safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Sequence

from scipy.special import j0 as _bessel_j0, j1 as _bessel_j1

from .errors import ContractViolation
from .numeric import double_factorial

#: highest derivative order the stack carries
MAX_ORDER = 6

#: ratio formulas hand over to Taylor series below this separation
SERIES_SWITCH_BUILTIN = 0.25
SERIES_SWITCH_CUSTOM = 1e-2

#: ring stack switches from the power series to J0/J1 recurrence forms here
_RING_STACK_SWITCH = 2.0

#: Taylor order used for the built-in series evaluation
_BUILTIN_TAYLOR_ORDER = 26


def _ring_recurrence_polys(max_order: int):
    """Coefficients (p_j, q_j) with C^(j) = p_j(1/r) J0 + q_j(1/r) J1.

    Built once by exact Fraction arithmetic from J0' = -J1,
    J1' = J0 - J1/r.
    """
    p = [Fraction(1)]
    q = [Fraction(0)]
    out = [(tuple(p), tuple(q))]
    for _ in range(max_order):
        def s2_dp(poly):
            # s^2 * poly'(s): coefficient k of poly contributes k*c_k at power k+1
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

        s_q = [Fraction(0)] + list(q)  # s * q(s)
        new_p = add([-c for c in s2_dp(p)], q)
        new_q = add(add([-c for c in p], [-c for c in s2_dp(q)]), s_q, sb=-1)
        p, q = new_p, new_q
        out.append((tuple(p), tuple(q)))
    return out


_RING_POLYS = [
    (tuple(float(c) for c in p), tuple(float(c) for c in q))
    for p, q in _ring_recurrence_polys(MAX_ORDER)
]


def _horner(coeffs, x):
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _ring_stack_series(r: float):
    """Termwise-differentiated J0 power series; accurate for r <~ 4."""
    c = [0.0] * (MAX_ORDER + 1)
    for j in range(MAX_ORDER + 1):
        total = 0.0
        k = (j + 1) // 2
        while True:
            # a_k = (-1)^k / (4^k (k!)^2), term = a_k * (2k)(2k-1)...(2k-j+1) r^(2k-j)
            ak = (-1.0) ** k / (4.0**k * math.factorial(k) ** 2)
            fall = 1.0
            for i in range(j):
                fall *= 2 * k - i
            term = ak * fall * r ** (2 * k - j)
            total += term
            k += 1
            if abs(term) < 1e-18 * max(abs(total), 1e-30) and k > j + 3:
                break
            if k > 60:
                break
        c[j] = total
    return c


def _ring_stack(r: float):
    if r <= _RING_STACK_SWITCH:
        return _ring_stack_series(r)
    b0, b1 = float(_bessel_j0(r)), float(_bessel_j1(r))
    s = 1.0 / r
    return [
        _horner(p, s) * b0 + _horner(q, s) * b1
        for p, q in _RING_POLYS
    ]


def _gauss_stack(r: float):
    # C^(j)(r) = (-1)^j He_j(r) exp(-r^2/2), He_j probabilist's Hermite
    e = math.exp(-0.5 * r * r)
    he_prev, he = 1.0, r
    c = [e, -he * e]
    for j in range(2, MAX_ORDER + 1):
        he_prev, he = he, r * he - (j - 1) * he_prev
        c.append((-1.0) ** j * he * e)
    return c


def _ring_taylor(max_order: int):
    # C = J0: a_{2k} = (-1)^k / (4^k (k!)^2)
    a = [0.0] * (max_order + 1)
    for k in range(max_order // 2 + 1):
        a[2 * k] = (-1.0) ** k / (4.0**k * math.factorial(k) ** 2)
    return a


def _gauss_taylor(max_order: int):
    a = [0.0] * (max_order + 1)
    for k in range(max_order // 2 + 1):
        a[2 * k] = (-0.5) ** k / math.factorial(k)
    return a


@dataclass(frozen=True)
class CorrelationModel:
    """An isotropic correlation function with radial derivatives to order 6.

    Built-ins are constructed with :func:`ring_model` and :func:`gauss_model`.
    Custom models supply a derivative evaluator ``deriv_fn(order, r)`` valid
    for orders 0..6 at any r >= 0 plus the Taylor coefficients of C about 0
    through order 8 (``taylor[m]`` multiplies r^m).  Positivity of the power
    spectrum is the caller's responsibility and is not verified.
    """

    kind: str  # 'ring' | 'gauss' | 'custom'
    label: str = ""
    deriv_fn: Optional[Callable[[int, float], float]] = None
    taylor: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("ring", "gauss", "custom"):
            raise ContractViolation(f"unknown correlation model kind {self.kind!r}")
        if self.kind == "custom":
            if self.deriv_fn is None or self.taylor is None:
                raise ContractViolation(
                    "custom models need deriv_fn and Taylor coefficients to order 8"
                )
            if len(self.taylor) < 9:
                raise ContractViolation("custom Taylor coefficients must reach order 8")
            if abs(self.taylor[0] - 1.0) > 1e-12:
                raise ContractViolation("C(0) must be 1 (normalized correlation)")
            if any(abs(t) > 1e-12 for t in self.taylor[1:9:2]):
                raise ContractViolation("odd Taylor coefficients of C must vanish")

    @property
    def series_switch(self) -> float:
        return SERIES_SWITCH_BUILTIN if self.kind != "custom" else SERIES_SWITCH_CUSTOM

    def taylor_coefficients(self, max_order: int) -> Sequence[float]:
        """Taylor coefficients a_0..a_max of C(r) = sum a_m r^m (odd ones 0).

        Custom models only carry orders <= 8; higher requests are truncated
        to the known coefficients.
        """
        if self.kind == "ring":
            return _ring_taylor(max_order)
        if self.kind == "gauss":
            return _gauss_taylor(max_order)
        return list(self.taylor[: max_order + 1])


_RING = CorrelationModel("ring", label="ring")
_GAUSS = CorrelationModel("gauss", label="gauss")


def ring_model() -> CorrelationModel:
    """Monochromatic 2-D spectrum on the unit circle: C(r) = J0(r)."""
    return _RING


def gauss_model() -> CorrelationModel:
    """Squared-exponential correlation C(r) = exp(-r^2 / 2)."""
    return _GAUSS


def custom_model(deriv_fn, taylor, label="custom") -> CorrelationModel:
    return CorrelationModel("custom", label=label, deriv_fn=deriv_fn, taylor=tuple(taylor))


def model_by_name(name: str) -> CorrelationModel:
    try:
        return {"ring": _RING, "gauss": _GAUSS}[name]
    except KeyError:
        raise ContractViolation(f"unknown model {name!r}; expected 'ring' or 'gauss'") from None


@dataclass(frozen=True)
class DerivativeStack:
    """C and its radial derivatives at one separation: c[j] = C^(j)(r)."""

    model: CorrelationModel
    r: float
    c: tuple  # 7 floats, orders 0..6


def eval_derivatives(model: CorrelationModel, r: float) -> DerivativeStack:
    """Evaluate C^(0..6) at r (>= 0).

    Built-ins are accurate to better than 1e-12 relative; custom models are
    as accurate as their evaluator.
    """
    if r < 0:
        raise ContractViolation("separation r must be >= 0")
    if model.kind == "ring":
        c = _ring_stack(r)
    elif model.kind == "gauss":
        c = _gauss_stack(r)
    else:
        c = []
        for order in range(MAX_ORDER + 1):
            try:
                c.append(float(model.deriv_fn(order, r)))
            except Exception as exc:
                raise ContractViolation(
                    f"custom model failed to supply derivative order {order}: {exc}"
                ) from exc
    return DerivativeStack(model=model, r=r, c=tuple(c))


@lru_cache(maxsize=64)
def _zero_limits(model: CorrelationModel):
    """Same-point constants: F0 plus the second/third derivative records."""
    c = eval_derivatives(model, 0.0).c
    return {
        "F0": -c[2],
        "M0": c[4],
        "N0": c[4],
        "L0": c[4] / 3.0,
        "S0": -c[6],
        "T0": -c[6] / 5.0,
        "U0": -c[6] / 5.0,
        "V0": -c[6],
    }


@dataclass(frozen=True)
class DerivedCorrelations:
    """All two-point covariance scalars entering the correlation matrices.

    First-derivative block: E = -C', F = -C'', H = -C'/r.
    Second-derivative block: G = C''', I = (rC''-C')/r^2,
    L = (r^2 C''' - 2rC'' + 2C')/r^3, M = C'''', N = 3(rC''-C')/r^3.
    Third-derivative block: P..V are (minus) the order-5/6 axis partials of C,
    with the combinations W = (M+N-2L)/4, X = (P-Q)/2, Y = (Q-R)/2.
    The trailing 0-subscript fields are the same-point (r=0) values.
    """

    r: float
    C: float
    E: float
    F: float
    H: float
    G: float
    I: float
    L: float
    M: float
    N: float
    P: float
    Q: float
    R: float
    S: float
    T: float
    U: float
    V: float
    W: float
    X: float
    Y: float
    F0: float
    M0: float
    N0: float
    L0: float
    S0: float
    T0: float
    U0: float
    V0: float
    stack: DerivativeStack = field(repr=False)


def _series_scalars(a, r):
    """Cancellation-prone scalars from the Taylor coefficients of C."""
    H = I = L = N = Q = R = T = U = V = 0.0
    for m in range(2, len(a), 2):
        am = a[m]
        if am == 0.0:
            continue
        m2 = m * (m - 2)
        H -= m * am * r ** (m - 2)
        if m >= 4:
            I += m2 * am * r ** (m - 3)
            L += m2 * (m - 3) * am * r ** (m - 4)
            N += 3 * m2 * am * r ** (m - 4)
        if m >= 6:
            Q -= m2 * (m - 3) * (m - 4) * am * r ** (m - 5)
            R -= 3 * m2 * (m - 4) * am * r ** (m - 5)
            T -= m2 * (m - 3) * (m - 4) * (m - 5) * am * r ** (m - 6)
            U -= 3 * m2 * (m - 4) * (m - 5) * am * r ** (m - 6)
            V -= 15 * m2 * (m - 4) * am * r ** (m - 6)
    return {"H": H, "I": I, "L": L, "N": N, "Q": Q, "R": R, "T": T, "U": U, "V": V}


def _ratio_scalars(c, r):
    c0, c1, c2, c3, c4, c5, c6 = c
    return {
        "H": -c1 / r,
        "I": (r * c2 - c1) / r**2,
        "L": (r**2 * c3 - 2 * r * c2 + 2 * c1) / r**3,
        "N": 3 * (r * c2 - c1) / r**3,
        "Q": -(r**3 * c4 - 3 * r**2 * c3 + 6 * r * c2 - 6 * c1) / r**4,
        "R": -3 * (r**2 * c3 - 3 * r * c2 + 3 * c1) / r**4,
        "T": -(r**4 * c5 - 4 * r**3 * c4 + 12 * r**2 * c3 - 24 * r * c2 + 24 * c1) / r**5,
        "U": -3 * (r**3 * c4 - 5 * r**2 * c3 + 12 * r * c2 - 12 * c1) / r**5,
        "V": -15 * (r**2 * c3 - 3 * r * c2 + 3 * c1) / r**5,
    }


def derived_correlations(stack: DerivativeStack) -> DerivedCorrelations:
    """All derived correlation scalars at the stack's separation.

    At r = 0 the exact limit record is returned; below the model's switch
    radius the ratio-form scalars are replaced by their Taylor series, which
    are free of the r^-k cancellations.
    """
    model, r, c = stack.model, stack.r, stack.c
    z = _zero_limits(model)
    if r == 0.0:
        vals = {
            "C": 1.0, "E": 0.0, "F": z["F0"], "H": z["F0"],
            "G": 0.0, "I": 0.0, "L": z["L0"], "M": z["M0"], "N": z["N0"],
            "P": 0.0, "Q": 0.0, "R": 0.0,
            "S": z["S0"], "T": z["T0"], "U": z["U0"], "V": z["V0"],
        }
    else:
        vals = {
            "C": c[0], "E": -c[1], "F": -c[2], "G": c[3], "M": c[4],
            "P": -c[5], "S": -c[6],
        }
        if r < model.series_switch:
            order = _BUILTIN_TAYLOR_ORDER if model.kind != "custom" else 8
            vals.update(_series_scalars(model.taylor_coefficients(order), r))
        else:
            vals.update(_ratio_scalars(c, r))
    vals["W"] = (vals["M"] + vals["N"] - 2 * vals["L"]) / 4.0
    vals["X"] = (vals["P"] - vals["Q"]) / 2.0
    vals["Y"] = (vals["Q"] - vals["R"]) / 2.0
    return DerivedCorrelations(r=r, stack=stack, **vals, **z)


def correlations_at(model: CorrelationModel, r: float) -> DerivedCorrelations:
    """Convenience: stack evaluation and scalar derivation in one call."""
    return derived_correlations(eval_derivatives(model, r))


def axis_partial(dc: DerivedCorrelations, p: int, q: int) -> float:
    """[d^p/dx^p d^q/dy^q C](r, 0) expressed through the derived scalars.

    q must be even (odd-q partials vanish on the axis); p + q <= 6.
    """
    if q % 2:
        return 0.0
    if p + q > MAX_ORDER:
        raise ContractViolation(f"axis partial of order {p + q} exceeds {MAX_ORDER}")
    if q == 0:
        return dc.stack.c[p]
    if q == 2:
        return (-dc.H, dc.I, dc.L, -dc.Q, -dc.T)[p]
    if q == 4:
        return (dc.N, -dc.R, -dc.U)[p]
    return -dc.V  # q == 6


def axis_partial_at_zero(model: CorrelationModel, p: int, q: int) -> float:
    """[d^p/dx^p d^q/dy^q C](0, 0) via the isotropic moment identities.

    Reflection symmetry of an isotropic C kills every partial with an odd
    count in either coordinate at the origin.
    """
    if p % 2 or q % 2:
        return 0.0
    if p + q > MAX_ORDER:
        raise ContractViolation(f"axis partial of order {p + q} exceeds {MAX_ORDER}")
    c = eval_derivatives(model, 0.0).c
    num = double_factorial(p - 1) * double_factorial(q - 1)
    return c[p + q] * num / double_factorial(p + q - 1)
