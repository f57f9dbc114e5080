"""Singularity kinds handled by the package.

Three families of point singularities of smooth planar/volumetric fields are
supported, each signed by the jacobian determinant of its defining vector
field:

* ``vector``   -- zeros of an n-component random vector field in n dimensions
                  (n >= 1), signed by the jacobian of the field itself;
* ``critical`` -- gradient zeros of a 2-D scalar, signed by the hessian
                  determinant (+1 extrema, -1 saddles);
* ``umbilic``  -- points of a 2-D scalar surface where the hessian is
                  degenerate, signed by the sign of the +-1/2 index.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ContractViolation


@dataclass(frozen=True)
class SingularityKind:
    tag: str  # 'vector' | 'critical' | 'umbilic'
    n: int = 2  # spatial dimension

    def __post_init__(self):
        if self.tag not in ("vector", "critical", "umbilic"):
            raise ContractViolation(f"unknown singularity tag {self.tag!r}")
        if self.tag in ("critical", "umbilic") and self.n != 2:
            raise ContractViolation(f"{self.tag} points are defined in 2 dimensions only")
        if self.tag == "vector" and self.n < 1:
            raise ContractViolation("vector zeros need dimension n >= 1")

    @property
    def name(self) -> str:
        if self.tag == "vector":
            return f"vector{self.n}"
        return self.tag

    #: number of distinct derivative slots per point entering the jacobian
    @property
    def m(self) -> int:
        if self.tag == "vector":
            return self.n * self.n
        if self.tag == "critical":
            return 3  # f_xx, f_yy, f_xy
        return 4  # f_xxx, f_xyy, f_xxy, f_yyy

    #: highest derivative of C(r) required by the two-point machinery
    @property
    def max_derivative_order(self) -> int:
        return {"vector": 2, "critical": 4, "umbilic": 6}[self.tag]


VECTOR2 = SingularityKind("vector", 2)
VECTOR3 = SingularityKind("vector", 3)
CRITICAL = SingularityKind("critical", 2)
UMBILIC = SingularityKind("umbilic", 2)

_BY_NAME = {k.name: k for k in (VECTOR2, VECTOR3, CRITICAL, UMBILIC)}
_BY_NAME["vector1"] = SingularityKind("vector", 1)


def parse_kind(name: str) -> SingularityKind:
    """Map a CLI-style kind name (``vector2``, ``critical``, ...) to a kind."""
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ContractViolation(
            f"unknown kind {name!r}; expected one of {sorted(_BY_NAME)}"
        ) from None
