"""The Bolza group, balls of group elements, and the quotient metric on
X = Gamma \\ PSL(2,R).

Ball completeness
-----------------
When the generators are the side pairings of a Dirichlet domain D centred at
i, the translates gD meeting a hyperbolic disc B(i, R) form a side-connected
cluster and every such g has d(i, g.i) <= R + r, with r the circumradius of
D. A breadth-first search over right multiplications that only discards
elements displaced by more than ``R + r`` therefore finds every element with
displacement <= R, unless it stops early at the word-length limit. The
radius up to which a ball is provably complete is stored on the ball as
``complete_radius`` and drives every certified lower bound in this module.
"""

from __future__ import annotations

import io
import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import psl2
from .errors import BallSizeError, DomainError, GroupConstructionError
from .psl2 import (
    IDENTITY,
    SQRT2,
    DistanceBracket,
    GroupElement,
    canonicalize,
    PointH2,
    compose,
    inverse,
    trace,
)

BALL_SCHEMA_VERSION = 1
DEDUP_TOL = 1e-9
DEFAULT_CAP = 500_000


@dataclass(frozen=True)
class FuchsianGroup:
    """Finitely generated Fuchsian group with generators closed under inversion.

    ``inverse_index[k]`` is the index of the inverse of generator k.
    ``domain_radius``/``domain_inradius`` describe the Dirichlet domain at the
    basepoint when the generators are its side pairings; None disables the
    completeness certificates.
    """

    name: str
    generators: tuple[GroupElement, ...]
    relator: tuple[int, ...]
    inverse_index: tuple[int, ...]
    basepoint: PointH2 = psl2.I_POINT
    domain_radius: float | None = None
    domain_inradius: float | None = None
    rotation_step: float | None = None

    def __post_init__(self):
        for k, j in enumerate(self.inverse_index):
            prod = compose(self.generators[k], self.generators[j])
            if psl2.entry_deviation(prod) > 1e-9:
                raise GroupConstructionError(f"generator {j} is not the inverse of generator {k}")
        for k, g in enumerate(self.generators):
            if not trace(g) > 2.0:
                raise GroupConstructionError(f"generator {k} is not hyperbolic (trace {trace(g)})")
        dev = relator_deviation(self.generators, self.relator)
        if dev > 1e-9:
            raise GroupConstructionError(f"relator product deviates from e by {dev:.3e}")

    @property
    def rank(self) -> int:
        return len(self.generators)

    def word_element(self, word: Sequence[int]) -> GroupElement:
        g = IDENTITY
        for k in word:
            g = compose(g, self.generators[k])
        return g

    def reduce_point(self, x: float, y: float, gamma: GroupElement | None = None):
        """Move ``(x, y)`` into the Dirichlet domain by greedy side pairings.

        Starts from ``gamma . (x, y)`` when a previous reduction is supplied as
        a hint. Returns the reduced point and the accumulated group element.
        """
        if gamma is None:
            gamma = IDENTITY
        else:
            x, y = psl2.mobius_xy(gamma, x, y)
        ch = _cosh_to_i(x, y)
        inner = math.cosh(self.domain_inradius) if self.domain_inradius else 1.0
        for _ in range(100_000):
            if ch <= inner:
                break
            best = None
            for k, g in enumerate(self.generators):
                gx, gy = psl2.mobius_xy(g, x, y)
                c = _cosh_to_i(gx, gy)
                if c < ch * (1.0 - 1e-14) and (best is None or c < best[0]):
                    best = (c, k, gx, gy)
            if best is None:
                break
            ch, k, x, y = best
            gamma = compose(self.generators[k], gamma)
        return x, y, gamma

    def orbit_distance(self, x: float, y: float, gamma: GroupElement | None = None):
        """Distance from (x, y) to the orbit of i, plus the reduction hint."""
        rx, ry, gamma = self.reduce_point(x, y, gamma)
        return math.acosh(max(_cosh_to_i(rx, ry), 1.0)), gamma


def _cosh_to_i(x: float, y: float) -> float:
    return (x * x + y * y + 1.0) / (2.0 * y)


def relator_deviation(generators: Sequence[GroupElement], relator: Sequence[int]) -> float:
    g = IDENTITY
    for k in relator:
        g = compose(g, generators[k])
    return max(abs(g.a - 1.0), abs(g.b), abs(g.c), abs(g.d - 1.0))


BOLZA_RELATOR = (0, 3, 6, 1, 4, 7, 2, 5)
# candidate geometric rotation steps between consecutive side pairings
_BOLZA_STEPS = (math.pi / 4.0, math.pi / 2.0)


def bolza_generator() -> GroupElement:
    r = math.sqrt(2.0)
    off = math.sqrt(2.0 + 2.0 * r)
    return GroupElement(1.0 + r, off, off, 1.0 + r)


def bolza_group() -> FuchsianGroup:
    """Side pairings of the regular octagon with angles pi/4 centred at i.

    Generator k is the conjugate of :func:`bolza_generator` by the rotation
    about i through k times the rotation step; the step is taken from a list
    of conventions found in the literature, keeping the first one whose
    relator closes up.
    """
    g0 = bolza_generator()
    t8 = math.tan(math.pi / 8.0)
    circum = math.acosh(1.0 / (t8 * t8))
    inr = math.acosh(1.0 / t8)
    errors = []
    for step in _BOLZA_STEPS:
        gens = []
        for k in range(8):
            rho = psl2.rotation_element(k * step)
            gens.append(compose(compose(rho, g0), inverse(rho)))
        dev = relator_deviation(gens, BOLZA_RELATOR)
        if dev <= 1e-9:
            return FuchsianGroup(
                name="bolza",
                generators=tuple(gens),
                relator=BOLZA_RELATOR,
                inverse_index=tuple((k + 4) % 8 for k in range(8)),
                domain_radius=circum,
                domain_inradius=inr,
                rotation_step=step,
            )
        errors.append(f"step {step:.6f}: relator deviation {dev:.3e}")
    raise GroupConstructionError("no rotation convention closes the Bolza octagon; " + "; ".join(errors))


# ---------------------------------------------------------------------------
# balls


@dataclass(frozen=True, slots=True)
class BallElement:
    element: GroupElement
    word: tuple[int, ...]
    displacement: float


@dataclass(frozen=True)
class FuchsianBall:
    group: FuchsianGroup
    elements: tuple[BallElement, ...]
    word_length_limit: int
    displacement_limit: float
    complete_radius: float
    mats: np.ndarray = field(init=False, repr=False, compare=False)
    disps: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "mats", psl2.as_array([e.element for e in self.elements]))
        object.__setattr__(self, "disps", np.array([e.displacement for e in self.elements]))
        self.mats.setflags(write=False)
        self.disps.setflags(write=False)

    def __len__(self) -> int:
        return len(self.elements)

    def non_identity(self) -> list[BallElement]:
        return [e for e in self.elements if e.word]


class _Dedup:
    """Grid hash for matrices equal within ``tol`` in every entry."""

    def __init__(self, tol: float = DEDUP_TOL, cell: float = 1e-6):
        self.tol = tol
        self.cell = cell
        self.table: dict[tuple[int, ...], list[GroupElement]] = {}

    def _keys(self, g: GroupElement):
        opts = []
        for v in g.entries:
            lo, hi = math.floor((v - self.tol) / self.cell), math.floor((v + self.tol) / self.cell)
            opts.append((lo,) if lo == hi else (lo, hi))
        return itertools.product(*opts)

    def contains(self, g: GroupElement) -> bool:
        for key in self._keys(g):
            for h in self.table.get(key, ()):
                if max(abs(p - q) for p, q in zip(g.entries, h.entries)) <= self.tol:
                    return True
        return False

    def add(self, g: GroupElement) -> None:
        key = tuple(math.floor(v / self.cell) for v in g.entries)
        self.table.setdefault(key, []).append(g)


def enumerate_ball(
    group: FuchsianGroup,
    max_word_len: int,
    max_displacement: float = math.inf,
    cap: int = DEFAULT_CAP,
    margin: float | None = None,
) -> FuchsianBall:
    """Breadth-first enumeration over reduced words, deduplicated by value.

    Elements displaced by more than ``max_displacement + margin`` are not
    expanded; the margin defaults to the Dirichlet circumradius, or twice the
    largest generator step when the group has no domain data. The returned
    ball keeps elements with displacement <= ``max_displacement``, sorted by
    displacement and then word.
    """
    if max_word_len < 0:
        raise DomainError("max_word_len must be >= 0")
    gens = group.generators
    inv = group.inverse_index
    if margin is None:
        if group.domain_radius is not None:
            margin = group.domain_radius
        else:
            margin = 2.0 * max(psl2.displacement(g) for g in gens)
    threshold = max_displacement + margin

    found: list[BallElement] = [BallElement(IDENTITY, (), 0.0)]
    seen = _Dedup()
    seen.add(IDENTITY)
    frontier = [found[0]]
    for _ in range(max_word_len):
        nxt = []
        for item in frontier:
            last = item.word[-1] if item.word else None
            for k, gk in enumerate(gens):
                if last is not None and k == inv[last]:
                    continue
                h = compose(item.element, gk)
                disp = psl2.displacement(h)
                if disp > threshold or seen.contains(h):
                    continue
                seen.add(h)
                be = BallElement(h, item.word + (k,), disp)
                found.append(be)
                nxt.append(be)
                if len(found) > cap:
                    raise BallSizeError(f"ball enumeration exceeded the cap of {cap} elements")
        frontier = nxt
        if not frontier:
            break

    if group.domain_radius is None:
        complete = 0.0
    else:
        r = group.domain_radius
        complete = min(max_displacement, threshold - r)
        if frontier:
            complete = min(complete, min(e.displacement for e in frontier) - r)
        complete = max(complete, 0.0)

    kept = sorted((e for e in found if e.displacement <= max_displacement),
                  key=lambda e: (e.displacement, e.word))
    return FuchsianBall(group, tuple(kept), max_word_len, float(max_displacement), float(complete))


def dump_ball(ball: FuchsianBall, fh) -> None:
    """Write the line-oriented cache format (see README)."""
    fh.write(f"# horolab-ball schema_version={BALL_SCHEMA_VERSION}\n")
    fh.write(
        f"# group={ball.group.name} word_length_limit={ball.word_length_limit} "
        f"displacement_limit={ball.displacement_limit!r} complete_radius={ball.complete_radius!r} "
        f"count={len(ball)}\n"
    )
    fh.write("# word a b c d displacement\n")
    for e in ball.elements:
        word = ".".join(map(str, e.word)) if e.word else "e"
        nums = " ".join(f"{v:.17g}" for v in (*e.element.entries, e.displacement))
        fh.write(f"{word} {nums}\n")


def dumps_ball(ball: FuchsianBall) -> str:
    buf = io.StringIO()
    dump_ball(ball, buf)
    return buf.getvalue()


def load_ball(source, group: FuchsianGroup, verify: bool = True) -> FuchsianBall:
    """Read a ball cache; with ``verify`` every word is re-multiplied and compared."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    lines = text.splitlines()
    if not lines or "schema_version=" not in lines[0]:
        raise DomainError("not a horolab ball cache")
    version = int(lines[0].split("schema_version=")[1].split()[0])
    if version != BALL_SCHEMA_VERSION:
        raise DomainError(f"unsupported ball schema_version {version}")
    meta = dict(kv.split("=", 1) for kv in lines[1].lstrip("# ").split())
    if meta["group"] != group.name:
        raise DomainError(f"cache is for group {meta['group']!r}, not {group.name!r}")
    elements = []
    for line in lines[2:]:
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        word = () if parts[0] == "e" else tuple(int(k) for k in parts[0].split("."))
        a, b, c, d, disp = map(float, parts[1:6])
        g = GroupElement(a, b, c, d)
        if verify:
            ref = group.word_element(word)
            if max(abs(p - q) for p, q in zip(ref.entries, g.entries)) > 1e-9:
                raise DomainError(f"cached entries for word {parts[0]} do not match the group")
        elements.append(BallElement(g, word, disp))
    return FuchsianBall(
        group,
        tuple(elements),
        int(meta["word_length_limit"]),
        float(meta["displacement_limit"]),
        float(meta["complete_radius"]),
    )


# ---------------------------------------------------------------------------
# trace gap and separation constant


@dataclass(frozen=True)
class ConstantEstimates:
    """Trace gap and separation constant read off a ball.

    ``eps_star_lb`` is min(trace - 2) over the non-identity ball elements.
    It equals the true trace gap of the whole group when ``certified`` holds:
    every hyperbolic element is conjugate to one whose axis crosses the
    Dirichlet domain, and such a conjugate has displacement at most
    (translation length + 2 * circumradius).
    """

    eps_star_lb: float
    sigma0_lb: float
    word_length_used: int
    complete_radius: float
    certified: bool
    min_trace_word: tuple[int, ...]


def translation_length(tr: float) -> float:
    return 2.0 * math.acosh(max(tr / 2.0, 1.0))


def estimate_eps_star(ball: FuchsianBall) -> ConstantEstimates:
    rest = ball.non_identity()
    if not rest:
        raise DomainError("ball has no non-identity elements")
    best = min(rest, key=lambda e: (trace(e.element), e.word))
    eps = trace(best.element) - 2.0
    certified = False
    if ball.group.domain_radius is not None:
        need = translation_length(2.0 + eps) + 2.0 * ball.group.domain_radius
        certified = ball.complete_radius >= need
    return ConstantEstimates(
        eps_star_lb=eps,
        sigma0_lb=estimate_sigma0(eps),
        word_length_used=ball.word_length_limit,
        complete_radius=ball.complete_radius,
        certified=certified,
        min_trace_word=best.word,
    )


def estimate_sigma0(estimates) -> float:
    """Lower bound for d_G(gamma g, g): translation length over sqrt(2).

    Accepts a :class:`ConstantEstimates` or a bare trace gap.
    """
    eps = estimates.eps_star_lb if isinstance(estimates, ConstantEstimates) else float(estimates)
    return translation_length(2.0 + eps) / SQRT2


# ---------------------------------------------------------------------------
# the quotient X = Gamma \ G


@dataclass(frozen=True)
class QuotientPoint:
    rep: GroupElement
    group: FuchsianGroup = field(repr=False)

    def same_point(self, other: QuotientPoint, ball: FuchsianBall) -> bool:
        return quotient_dist(self, other, ball).hi < 1e-9


def reduce_rep(g: GroupElement, group: FuchsianGroup) -> tuple[GroupElement, GroupElement]:
    """Return ``(gamma, gamma g)`` with ``gamma g . i`` in the Dirichlet domain."""
    z = psl2.base_point(g)
    _, _, gamma = group.reduce_point(z.x, z.y)
    return gamma, compose(gamma, g)


def _inv_matrix(g: GroupElement) -> np.ndarray:
    return np.array([[g.d, -g.b], [-g.c, g.a]])


def _search(g1: GroupElement, g2: GroupElement, ball: FuchsianBall):
    """Lower bounds for every ball element and the best upper bound.

    Upper bounds are only evaluated where the lower bound does not already
    exceed the running best, which is exact for the minimum.
    """
    G2 = ball.mats @ g2.matrix
    z1 = psl2.base_point(g1)
    x2, y2 = psl2.batch_base_points(G2)
    with np.errstate(invalid="ignore", over="ignore"):
        lo_all = psl2.batch_dist_h2(z1.x, z1.y, x2, y2) / SQRT2
    lo_all = np.where(np.isfinite(lo_all), lo_all, np.inf)
    inv1 = _inv_matrix(g1)
    k0 = int(np.argmin(lo_all))
    best = float(psl2.batch_log_norm(inv1 @ G2[k0:k0 + 1])[0])
    cand = np.flatnonzero(lo_all <= best)
    if cand.size:
        his = psl2.batch_log_norm(inv1 @ G2[cand])
        his = np.where(np.isfinite(his), his, np.inf)
        j = int(np.argmin(his))
        if his[j] < best:
            best, k0 = float(his[j]), int(cand[j])
    return lo_all, best, k0


def quotient_dist(x: QuotientPoint, y: QuotientPoint, ball: FuchsianBall) -> DistanceBracket:
    """Bracket for d_X(x, y) = min over gamma of d_G(g1, gamma g2).

    Both representatives are first reduced into the Dirichlet domain. The
    lower end is certified when the ball is complete up to
    sqrt(2) * hi + d(i, r1.i) + d(i, r2.i); otherwise the bracket is hi-only
    (``certified=False``, ``lo=0``). The unreduced pair is searched too, since
    for far-out representatives it keeps exact cancellations that the
    reduction would destroy; any candidate is a valid upper bound.
    """
    if x.group is not y.group and x.group != y.group:
        raise DomainError("points belong to different groups")
    if canonicalize(x.rep) == canonicalize(y.rep):
        return DistanceBracket(0.0, 0.0, True)
    _, r1 = reduce_rep(x.rep, x.group)
    _, r2 = reduce_rep(y.rep, y.group)
    lo_all, hi, _ = _search(r1, r2, ball)
    _, hi_raw, _ = _search(x.rep, y.rep, ball)
    hi = min(hi, hi_raw)
    lo = min(float(lo_all.min()), hi)
    need = SQRT2 * hi + psl2.displacement(r1) + psl2.displacement(r2)
    if ball.complete_radius >= need:
        return DistanceBracket(lo, hi, True)
    return DistanceBracket(0.0, hi, False)


def same_orbit_witness(
    x: QuotientPoint, y: QuotientPoint, ball: FuchsianBall, tol: float = 1e-9
) -> tuple[float, GroupElement] | None:
    """Search for gamma in the ball with g1^-1 gamma g2 = b_tau.

    Returns ``(tau, gamma)`` for the first match in ball order, trying the raw
    representatives before the reduced ones. ``None`` only means no witness
    inside this ball.
    """
    pairs = [(IDENTITY, x.rep, IDENTITY, y.rep)]
    g1, r1 = reduce_rep(x.rep, x.group)
    g2, r2 = reduce_rep(y.rep, y.group)
    pairs.append((g1, r1, g2, r2))
    for gam1, a, gam2, b in pairs:
        M = _inv_matrix(a) @ ball.mats @ b.matrix
        sign = np.where(M[:, 0, 0] + M[:, 1, 1] < 0, -1.0, 1.0)
        M = M * sign[:, None, None]
        ok = (np.abs(M[:, 1, 0]) < tol) & (np.abs(M[:, 0, 0] - 1.0) < tol) & (np.abs(M[:, 1, 1] - 1.0) < tol)
        hits = np.flatnonzero(ok)
        if hits.size:
            k = int(hits[0])
            gamma = compose(compose(inverse(gam1), ball.elements[k].element), gam2)
            return float(M[k, 0, 1]), gamma
    return None
