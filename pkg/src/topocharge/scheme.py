"""Generic two-point machinery for charge correlation functions.

For a singularity kind defined as the zeros of an n-component vector field v
built from derivatives of Gaussian fields, the two-point charge correlation
is an average over the joint Gaussian vector

    u = (derivative slots at A, derivative slots at B, v(A), v(B)).

Assembling its covariance matrix Sigma, the correlation reduces to

    g(r) = D / (d_A d_B (2 pi)^n sqrt(det K)),

where K is the 2n x 2n covariance block of (v(A), v(B)), Xi is the Schur
complement of K in Sigma (equivalently the inverse of the derivative block
of Sigma^{-1}), and D is a sum over Wick pairings of Xi entries generated by
the two jacobian determinant polynomials.  The module is agnostic to the
kind: each kind contributes a slot table (which field derivatives appear)
and a jacobian form (which slot monomials build det dv/dx).

Slot orderings are frozen as follows (1-based, used by ``xi_entry``):

* vector(n): A-slots (i,j) -> (i-1) n + j for component i and direction j,
  then the same for B, then v_A(1..n), v_B(1..n);
* critical:  (Axx, Ayy, Bxx, Byy, Axy, Bxy | Ax, Bx, Ay, By);
* umbilic:   (Axxx, Axyy, Bxxx, Bxyy, Axxy, Ayyy, Bxxy, Byyy |
              wA, wB, Axy, Bxy), w = (f_xx - f_yy)/2.

The separation convention is r = r_B - r_A along +x, so every derivative
acting at A contributes a factor (-1) to the covariance with a B quantity.

Assembly and evaluation are pure in (kind, model, r); evaluating grids of
separations concurrently is safe (the only caches are written at import).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .correlations import (
    CorrelationModel,
    axis_partial,
    axis_partial_at_zero,
    correlations_at,
)
from .errors import ConditioningError, ContractViolation, DegenerateSeparationError
from .kinds import SingularityKind

#: below this separation 1 - C^2 no longer conditions K acceptably
R_MIN = 1e-3

#: refuse K solves beyond this condition number
COND_LIMIT = 1e12


@dataclass(frozen=True)
class JacobianForm:
    """The jacobian determinant as a signed sum of n-fold slot products.

    ``monomials`` lists (sign, per-point slot ids); ``a_index``/``b_index``
    map per-point slot ids to global Sigma indices (0-based).  For umbilic
    points the monomials encode 2 J, hence ``point_prefactor`` = 1/2.
    """

    n: int
    m: int
    monomials: tuple
    a_index: tuple
    b_index: tuple
    point_prefactor: float = 1.0


@dataclass(frozen=True)
class SchemeProblem:
    """Assembled two-point problem for one kind/model/separation."""

    kind: SingularityKind
    model: CorrelationModel
    r: float
    sigma: np.ndarray = field(repr=False)
    kmat: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)
    jacobian: JacobianForm
    slot_labels: tuple

    @property
    def n(self) -> int:
        return self.kind.n

    @property
    def m(self) -> int:
        return self.jacobian.m


# per-point derivative slots of the scalar-field kinds: (label, terms);
# each term is (coefficient, (p, q)) for coef * d^p_x d^q_y f
_SCALAR_SLOTS = {
    "critical": (
        ("xx", ((1.0, (2, 0)),)),
        ("yy", ((1.0, (0, 2)),)),
        ("xy", ((1.0, (1, 1)),)),
    ),
    "umbilic": (
        ("xxx", ((1.0, (3, 0)),)),
        ("xyy", ((1.0, (1, 2)),)),
        ("xxy", ((1.0, (2, 1)),)),
        ("yyy", ((1.0, (0, 3)),)),
    ),
}

# v components of the scalar-field kinds, as slot-style terms
_SCALAR_FIELDS = {
    "critical": (
        ("x", ((1.0, (1, 0)),)),
        ("y", ((1.0, (0, 1)),)),
    ),
    "umbilic": (
        ("w", ((0.5, (2, 0)), (-0.5, (0, 2)))),
        ("xy", ((1.0, (1, 1)),)),
    ),
}

# global orderings for the scalar kinds: entries are (point, slot-id) with
# slot ids referring to _SCALAR_SLOTS (derivatives) then _SCALAR_FIELDS
_SCALAR_ORDER = {
    "critical": {
        "deriv": ((0, 0), (0, 1), (1, 0), (1, 1), (0, 2), (1, 2)),
        "field": ((0, 0), (1, 0), (0, 1), (1, 1)),
    },
    "umbilic": {
        "deriv": ((0, 0), (0, 1), (1, 0), (1, 1), (0, 2), (0, 3), (1, 2), (1, 3)),
        "field": ((0, 0), (1, 0), (0, 1), (1, 1)),
    },
}


def _pair_covariance(dc, model, point_i, terms_i, point_j, terms_j):
    """< (terms_i at point_i) (terms_j at point_j) > via derivatives of C."""
    total = 0.0
    for ca, (pa, qa) in terms_i:
        for cb, (pb, qb) in terms_j:
            p, q = pa + pb, qa + qb
            if point_i == point_j:
                sign = (-1.0) ** (pa + qa)
                val = axis_partial_at_zero(model, p, q)
            elif point_i == 0:  # A x B
                sign = (-1.0) ** (pa + qa)
                val = axis_partial(dc, p, q)
            else:  # B x A
                sign = (-1.0) ** (pb + qb)
                val = axis_partial(dc, p, q)
            total += ca * cb * sign * val
    return total


def _assemble_scalar_sigma(kind, model, dc):
    tag = kind.tag
    slots = _SCALAR_SLOTS[tag]
    fields = _SCALAR_FIELDS[tag]
    order = _SCALAR_ORDER[tag]
    entries = [
        ("AB"[pt] + slots[s][0], pt, slots[s][1]) for pt, s in order["deriv"]
    ] + [
        ("AB"[pt] + fields[s][0], pt, fields[s][1]) for pt, s in order["field"]
    ]
    size = len(entries)
    sigma = np.empty((size, size))
    for i, (_, pi, ti) in enumerate(entries):
        for j, (_, pj, tj) in enumerate(entries):
            if j < i:
                continue
            sigma[i, j] = sigma[j, i] = _pair_covariance(dc, model, pi, ti, pj, tj)
    labels = tuple(e[0] for e in entries)
    return sigma, labels


def _assemble_vector_sigma(n, dc):
    m = n * n
    size = 2 * m + 2 * n
    sigma = np.zeros((size, size))
    F0 = dc.F0

    def slot(point, i, j):  # derivative slot of component i in direction j
        return point * m + i * n + j

    for i in range(n):
        for j in range(n):
            a, b = slot(0, i, j), slot(1, i, j)
            sigma[a, a] = sigma[b, b] = F0
            cross = dc.F if j == 0 else dc.H
            sigma[a, b] = sigma[b, a] = cross
        # derivative x field value: only the separation direction survives
        a1, b1 = slot(0, i, 0), slot(1, i, 0)
        va, vb = 2 * m + i, 2 * m + n + i
        sigma[a1, vb] = sigma[vb, a1] = dc.E
        sigma[b1, va] = sigma[va, b1] = -dc.E
        sigma[va, va] = sigma[vb, vb] = 1.0
        sigma[va, vb] = sigma[vb, va] = dc.C

    labels = tuple(
        f"{'AB'[pt]}v{i + 1},{j + 1}" for pt in (0, 1) for i in range(n) for j in range(n)
    ) + tuple(f"{'AB'[pt]}v{i + 1}" for pt in (0, 1) for i in range(n))
    return sigma, labels


def _jacobian_form(kind) -> JacobianForm:
    if kind.tag == "vector":
        n = kind.n
        m = n * n
        monos = []
        for perm in itertools.permutations(range(n)):
            sign = _perm_sign(perm)
            monos.append((sign, tuple(i * n + perm[i] for i in range(n))))
        return JacobianForm(
            n=n,
            m=m,
            monomials=tuple(monos),
            a_index=tuple(range(m)),
            b_index=tuple(range(m, 2 * m)),
        )
    if kind.tag == "critical":
        # J = f_xx f_yy - f_xy^2, slots (xx, yy, xy)
        return JacobianForm(
            n=2,
            m=3,
            monomials=((1.0, (0, 1)), (-1.0, (2, 2))),
            a_index=(0, 1, 4),
            b_index=(2, 3, 5),
        )
    # 2 J = f_xxx f_xyy + f_yyy f_xxy - f_xyy^2 - f_xxy^2,
    # slots (xxx, xyy, xxy, yyy)
    return JacobianForm(
        n=2,
        m=4,
        monomials=((1.0, (0, 1)), (1.0, (3, 2)), (-1.0, (1, 1)), (-1.0, (2, 2))),
        a_index=(0, 1, 4, 5),
        b_index=(2, 3, 6, 7),
        point_prefactor=0.5,
    )


def _perm_sign(perm):
    sign = 1.0
    seen = [False] * len(perm)
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        k = start
        while not seen[k]:
            seen[k] = True
            k = perm[k]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def assemble_sigma(kind: SingularityKind, model: CorrelationModel, r: float) -> SchemeProblem:
    """Build Sigma, extract K, and reduce to Xi for one separation.

    Xi is computed as the Schur complement A - B K^{-1} B^T of K in Sigma,
    equivalent to the bordered-determinant minors of Sigma (see
    ``xi_entry_bordered``).  Raises ``DegenerateSeparationError`` for
    r <= R_MIN, where K degenerates as C -> 1, and ``ConditioningError`` if
    K is numerically singular at the requested separation.
    """
    if r <= R_MIN:
        raise DegenerateSeparationError(
            f"separation r = {r} is at or below the degeneracy guard {R_MIN}"
        )
    dc = correlations_at(model, r)
    if kind.tag == "vector":
        sigma, labels = _assemble_vector_sigma(kind.n, dc)
    else:
        sigma, labels = _assemble_scalar_sigma(kind, model, dc)
    jac = _jacobian_form(kind)
    two_m = 2 * jac.m
    a_blk = sigma[:two_m, :two_m]
    b_blk = sigma[:two_m, two_m:]
    kmat = sigma[two_m:, two_m:]
    cond = np.linalg.cond(kmat)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise ConditioningError(
            f"field-value block K is numerically singular at r = {r}",
            cond_estimate=cond,
        )
    xi = a_blk - b_blk @ np.linalg.solve(kmat, b_blk.T)
    xi = 0.5 * (xi + xi.T)
    return SchemeProblem(
        kind=kind, model=model, r=r, sigma=sigma, kmat=kmat, xi=xi,
        jacobian=jac, slot_labels=labels,
    )


def xi_entry(problem: SchemeProblem, i: int, j: int) -> float:
    """Xi_ij with 1-based derivative-slot indices (see the module-level
    slot orderings)."""
    two_m = 2 * problem.m
    if not (1 <= i <= two_m and 1 <= j <= two_m):
        raise ContractViolation(f"Xi indices must lie in 1..{two_m}")
    return float(problem.xi[i - 1, j - 1])


def xi_entry_bordered(problem: SchemeProblem, i: int, j: int) -> float:
    """Xi_ij from the bordered determinant det[[Sigma_ij, Sigma_iK],
    [Sigma_Kj, K]] / det K -- the minor identity route, kept as an
    independent cross-check of the Schur complement."""
    two_m = 2 * problem.m
    if not (1 <= i <= two_m and 1 <= j <= two_m):
        raise ContractViolation(f"Xi indices must lie in 1..{two_m}")
    sigma, kmat = problem.sigma, problem.kmat
    i0, j0 = i - 1, j - 1
    krange = list(range(two_m, sigma.shape[0]))
    bordered = np.empty((len(krange) + 1, len(krange) + 1))
    bordered[0, 0] = sigma[i0, j0]
    bordered[0, 1:] = sigma[i0, krange]
    bordered[1:, 0] = sigma[krange, j0]
    bordered[1:, 1:] = kmat
    return float(np.linalg.det(bordered) / np.linalg.det(kmat))


def wick_pairings(indices):
    """All perfect matchings of an even-length index tuple.

    Matchings are enumerated over positions, so repeated indices yield
    repeated (correctly multiplicity-weighted) pairings; there are exactly
    (2n-1)!! of them.
    """
    indices = tuple(indices)
    if len(indices) % 2:
        raise ContractViolation("Wick pairing needs an even number of indices")
    return [
        tuple((indices[a], indices[b]) for a, b in p)
        for p in _position_pairings(len(indices))
    ]


@lru_cache(maxsize=None)
def _position_pairings(count):
    if count == 0:
        return ((),)
    positions = tuple(range(count))

    def rec(pos):
        if not pos:
            yield ()
            return
        first, rest = pos[0], pos[1:]
        for k in range(len(rest)):
            pair = (first, rest[k])
            for tail in rec(rest[:k] + rest[k + 1 :]):
                yield (pair,) + tail

    return tuple(rec(positions))


def evaluate_D(problem: SchemeProblem) -> float:
    """The Gaussian derivative average D driving g(r).

    Each pair of jacobian monomials (one per point) contributes its sign
    product times the Wick pairing sum of Xi entries over the combined 2n
    slot indices; the i-factors of the Fourier substitution cancel the signs
    of the Gaussian derivatives, so no extra aggregate sign appears.
    """
    xi = problem.xi
    jac = problem.jacobian
    pairings = _position_pairings(2 * jac.n)
    total = 0.0
    for sign_a, mono_a in jac.monomials:
        idx_a = tuple(jac.a_index[s] for s in mono_a)
        for sign_b, mono_b in jac.monomials:
            idx = idx_a + tuple(jac.b_index[s] for s in mono_b)
            partial = 0.0
            for pairing in pairings:
                prod = 1.0
                for a, b in pairing:
                    prod *= xi[idx[a], idx[b]]
                partial += prod
            total += sign_a * sign_b * partial
    return total * jac.point_prefactor**2


def scheme_g(kind: SingularityKind, model: CorrelationModel, r: float) -> float:
    """Charge correlation g(r) straight from the matrix/pairing machinery."""
    from .analytic import density  # closed-form densities

    problem = assemble_sigma(kind, model, r)
    d = density(kind, model)
    sign, logdet = np.linalg.slogdet(problem.kmat)
    if sign <= 0:
        raise ConditioningError(
            f"det K is not positive at r = {r}", cond_estimate=np.linalg.cond(problem.kmat)
        )
    dval = evaluate_D(problem)
    n = kind.n
    return dval / (d * d * (2.0 * math.pi) ** n * math.exp(0.5 * logdet))
