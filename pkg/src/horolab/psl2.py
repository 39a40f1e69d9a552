"""Arithmetic on PSL(2,R), the Moebius action on the upper half plane, and
a two-sided bracket for the left-invariant distance on the group.

The Riemannian metric on PSL(2,R) is the left translate of the Frobenius
pairing <X, Y> = tr(X^T Y) on traceless matrices. Its distance function has
no closed form, so every distance query returns a bracket ``[lo, hi]``:

* ``hi`` is the length of the one-parameter curve ``g exp(sX)``, i.e. the
  Frobenius norm of ``log(g^-1 h)``;
* ``lo`` comes from projecting to the hyperbolic plane, where the orbit map
  ``g -> g.i`` is sqrt(2)-Lipschitz for this pairing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

SQRT2 = math.sqrt(2.0)
EPS = np.finfo(float).eps

#: |a + d| below this counts as zero when fixing the sign of a representative.
SIGN_TOL = 1e-12
#: |trace - 2| below this counts as parabolic.
PARABOLIC_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class GroupElement:
    """Canonical SL(2,R) representative ``[[a, b], [c, d]]`` of a PSL(2,R) class.

    The constructor stores the entries verbatim; use :meth:`from_entries` for
    anything that has not already been normalised.
    """

    a: float
    b: float
    c: float
    d: float

    @classmethod
    def from_entries(cls, a: float, b: float, c: float, d: float) -> GroupElement:
        """Rescale to determinant one and fix the sign."""
        det = a * d - b * c
        if not det > 0:
            raise DomainError(f"matrix has non-positive determinant {det!r}")
        return canonicalize(_renormalize(a, b, c, d))

    @classmethod
    def from_matrix(cls, m) -> GroupElement:
        m = np.asarray(m, dtype=float)
        return cls.from_entries(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def entries(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def __matmul__(self, other: GroupElement) -> GroupElement:
        return compose(self, other)


@dataclass(frozen=True, slots=True)
class LieVector:
    """Traceless matrix ``[[x11, x12], [x21, -x11]]``."""

    x11: float
    x12: float
    x21: float

    @property
    def norm(self) -> float:
        return math.sqrt(2.0 * self.x11 * self.x11 + self.x12 * self.x12 + self.x21 * self.x21)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.x11, self.x12], [self.x21, -self.x11]])


@dataclass(frozen=True, slots=True)
class PointH2:
    x: float
    y: float

    def __post_init__(self):
        if not self.y > 0:
            raise DomainError(f"point is not in the upper half plane (y={self.y!r})")

    @property
    def complex(self) -> complex:
        return complex(self.x, self.y)


@dataclass(frozen=True, slots=True)
class DistanceBracket:
    """Interval ``[lo, hi]`` known to contain a distance.

    ``certified`` is False when only ``hi`` is trustworthy; ``lo`` is then the
    trivial bound 0.
    """

    lo: float
    hi: float
    certified: bool = True

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, value: float) -> bool:
        return self.lo <= value <= self.hi


IDENTITY = GroupElement(1.0, 0.0, 0.0, 1.0)
I_POINT = PointH2(0.0, 1.0)


def _renormalize(a, b, c, d):
    det = a * d - b * c
    # skip when the deviation is below the rounding error of det itself
    if abs(det - 1.0) <= 4.0 * EPS * (abs(a * d) + abs(b * c)):
        return a, b, c, d
    s = 1.0 / math.sqrt(det)
    return a * s, b * s, c * s, d * s


def canonicalize(m) -> GroupElement:
    """Pick the sign with ``a + d > 0`` (or ``b > 0`` on the trace-zero locus).

    Accepts a GroupElement, a 4-tuple of entries or a 2x2 array. Only the sign changes, so
    the operation is exactly idempotent.
    """
    if isinstance(m, GroupElement):
        a, b, c, d = m.a, m.b, m.c, m.d
    else:
        a, b, c, d = (float(v) for v in np.ravel(m))
    tr = a + d
    if tr < -SIGN_TOL or (abs(tr) <= SIGN_TOL and b < 0):
        return GroupElement(-a, -b, -c, -d)
    return GroupElement(a, b, c, d)


def compose(g: GroupElement, h: GroupElement) -> GroupElement:
    a = g.a * h.a + g.b * h.c
    b = g.a * h.b + g.b * h.d
    c = g.c * h.a + g.d * h.c
    d = g.c * h.b + g.d * h.d
    return canonicalize(_renormalize(a, b, c, d))


def inverse(g: GroupElement) -> GroupElement:
    return canonicalize((g.d, -g.b, -g.c, g.a))


def trace(g: GroupElement) -> float:
    return abs(g.a + g.d)


def horocycle_element(t: float) -> GroupElement:
    """The unipotent ``b_t = [[1, t], [0, 1]]``."""
    return GroupElement(1.0, float(t), 0.0, 1.0)


def diag_element(a: float) -> GroupElement:
    if not a > 0:
        raise DomainError(f"diag_element needs a > 0, got {a!r}")
    return GroupElement(float(a), 0.0, 0.0, 1.0 / a)


def rotation_element(theta: float) -> GroupElement:
    """Elliptic element fixing i that rotates the tangent plane by ``theta``."""
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return canonicalize((c, s, -s, c))


def mobius(g: GroupElement, z: PointH2) -> PointH2:
    x, y = mobius_xy(g, z.x, z.y)
    return PointH2(x, y)


def mobius_xy(g: GroupElement, x: float, y: float) -> tuple[float, float]:
    # (a z + b)/(c z + d) split into real and imaginary parts
    a, b, c, d = g.a, g.b, g.c, g.d
    re = c * x + d
    den = re * re + (c * y) ** 2
    num_re = (a * x + b) * re + a * c * y * y
    return num_re / den, y / den


def base_point(g: GroupElement) -> PointH2:
    """``g . i`` computed from the second row only (uses det = 1)."""
    den = g.c * g.c + g.d * g.d
    return PointH2((g.a * g.c + g.b * g.d) / den, 1.0 / den)


def dist_h2(z: PointH2, w: PointH2) -> float:
    return dist_h2_xy(z.x, z.y, w.x, w.y)


def dist_h2_xy(x1: float, y1: float, x2: float, y2: float) -> float:
    # asinh form; stable for nearby points
    return 2.0 * math.asinh(math.hypot(x1 - x2, y1 - y2) / (2.0 * math.sqrt(y1 * y2)))


def displacement(g: GroupElement) -> float:
    """Hyperbolic distance from i to g.i; cosh of it is half the squared Frobenius norm."""
    q = 0.5 * (g.a * g.a + g.b * g.b + g.c * g.c + g.d * g.d)
    return math.acosh(max(q, 1.0))


def classify(g: GroupElement) -> str:
    tr = trace(g)
    if abs(tr - 2.0) <= PARABOLIC_TOL:
        return "parabolic"
    return "hyperbolic" if tr > 2.0 else "elliptic"


def _log_factor(s2: float, kind: str, half_tr: float) -> float:
    """Scalar f with log(g) = f * (g - tr/2 I) for g in SL(2,R), tr >= 0.

    ``s2`` is ((a-d)/2)^2 + bc, which equals tr^2/4 - 1 for det = 1.
    """
    if kind == "parabolic":
        # asinh(s)/s and asin(s)/s share this series in the signed s^2
        return 1.0 - s2 / 6.0 + 3.0 * s2 * s2 / 40.0
    if kind == "hyperbolic":
        if s2 <= 0.0:
            s2 = half_tr * half_tr - 1.0
        sh = math.sqrt(s2)
        return math.asinh(sh) / sh
    if s2 >= 0.0:
        s2 = half_tr * half_tr - 1.0
    sn = math.sqrt(-s2)
    return math.atan2(sn, half_tr) / sn


def log_psl2(g: GroupElement) -> LieVector:
    """Principal logarithm of a canonical representative.

    Hyperbolic, parabolic and elliptic classes use the closed forms for
    asinh, the nilpotent part, and the rotation angle respectively; elliptic
    angles come out in [0, pi/2] because the representative has tr >= 0.
    """
    g = canonicalize(g)
    half_tr = 0.5 * (g.a + g.d)
    half_diff = 0.5 * (g.a - g.d)
    s2 = half_diff * half_diff + g.b * g.c
    f = _log_factor(s2, classify(g), half_tr)
    return LieVector(f * half_diff, f * g.b, f * g.c)


def exp_psl2(X: LieVector) -> GroupElement:
    q = X.x11 * X.x11 + X.x12 * X.x21  # X^2 = q I
    if abs(q) < 1e-8:
        c0 = 1.0 + q / 2.0 + q * q / 24.0
        c1 = 1.0 + q / 6.0 + q * q / 120.0
    elif q > 0:
        r = math.sqrt(q)
        c0, c1 = math.cosh(r), math.sinh(r) / r
    else:
        r = math.sqrt(-q)
        c0, c1 = math.cos(r), math.sin(r) / r
    return GroupElement.from_entries(
        c0 + c1 * X.x11, c1 * X.x12, c1 * X.x21, c0 - c1 * X.x11
    )


def entry_deviation(g: GroupElement) -> float:
    """|g11 - 1| + |g12| + |g21| + |g22 - 1| for the canonical representative."""
    return abs(g.a - 1.0) + abs(g.b) + abs(g.c) + abs(g.d - 1.0)


def dist_upper(g: GroupElement, h: GroupElement) -> float:
    return log_psl2(compose(inverse(g), h)).norm


def dist_lower(g: GroupElement, h: GroupElement) -> float:
    z, w = base_point(g), base_point(h)
    return dist_h2(z, w) / SQRT2


def dist_bracket(g: GroupElement, h: GroupElement) -> DistanceBracket:
    return DistanceBracket(dist_lower(g, h), dist_upper(g, h))


# ---------------------------------------------------------------------------
# batched versions over arrays of shape (N, 2, 2); used by the ball searches


def as_array(elements) -> np.ndarray:
    return np.array([[[g.a, g.b], [g.c, g.d]] for g in elements], dtype=float).reshape(-1, 2, 2)


def batch_base_points(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a, b, c, d = M[:, 0, 0], M[:, 0, 1], M[:, 1, 0], M[:, 1, 1]
    den = c * c + d * d
    return (a * c + b * d) / den, 1.0 / den


def batch_dist_h2(x1, y1, x2, y2) -> np.ndarray:
    return 2.0 * np.arcsinh(np.hypot(x1 - x2, y1 - y2) / (2.0 * np.sqrt(y1 * y2)))


def batch_log_norm(M: np.ndarray) -> np.ndarray:
    """Frobenius norm of the principal log, for each matrix in ``M``.

    Matrices whose determinant is not positive (cancellation garbage) get inf.
    """
    a, b, c, d = (M[:, 0, 0].copy(), M[:, 0, 1].copy(), M[:, 1, 0].copy(), M[:, 1, 1].copy())
    det = a * d - b * c
    bad = ~(det > 0) | ~np.isfinite(det)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(bad, 1.0, 1.0 / np.sqrt(np.where(bad, 1.0, det)))
        a, b, c, d = a * scale, b * scale, c * scale, d * scale
        half_tr = 0.5 * np.abs(a + d)
        half_diff = 0.5 * (a - d)
        s2 = half_diff * half_diff + b * c
        tr = 2.0 * half_tr
        para = np.abs(tr - 2.0) <= PARABOLIC_TOL
        hyp = (tr > 2.0) & ~para
        ell = ~hyp & ~para
        s2_h = np.where(s2 > 0, s2, half_tr * half_tr - 1.0)
        s2_e = np.where(s2 < 0, s2, half_tr * half_tr - 1.0)
        sh = np.sqrt(np.where(hyp, s2_h, 1.0))
        sn = np.sqrt(np.where(ell, -s2_e, 1.0))
        f = np.where(
            para,
            1.0 - s2 / 6.0 + 3.0 * s2 * s2 / 40.0,
            np.where(hyp, np.arcsinh(sh) / sh, np.arctan2(sn, half_tr) / sn),
        )
        n = np.abs(f) * np.sqrt(2.0 * half_diff * half_diff + b * b + c * c)
    n[bad | ~np.isfinite(n)] = np.inf
    return n


def batch_compose(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.matmul(A, B)
