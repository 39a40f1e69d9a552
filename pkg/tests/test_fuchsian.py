import io
import itertools
import math

import numpy as np
import pytest

from horolab import fuchsian, psl2
from horolab.errors import BallSizeError, DomainError, GroupConstructionError
from horolab.expansiveness import random_element
from horolab.flows import horocycle_flow
from horolab.fuchsian import (
    FuchsianGroup, QuotientPoint, enumerate_ball, estimate_eps_star, estimate_sigma0,
    quotient_dist, same_orbit_witness,
)
from horolab.psl2 import IDENTITY, compose, diag_element, horocycle_element, inverse, trace

SQ2 = math.sqrt(2.0)
SYSTOLE = 2 * math.acosh(1 + SQ2)


def brute_force_words(group, length):
    """All products of up to ``length`` generators, no pruning, no reduction."""
    out = [IDENTITY]
    for n in range(1, length + 1):
        for w in itertools.product(range(8), repeat=n):
            out.append(group.word_element(w))
    return out


# --- the group ----------------------------------------------------------------


def test_generator_closed_form():
    g0 = fuchsian.bolza_generator()
    r = SQ2
    assert (1 + r) ** 2 - (2 + 2 * r) == pytest.approx(1.0, abs=1e-15)
    assert g0.det == pytest.approx(1.0, abs=1e-14)


def test_generators(group):
    assert group.rank == 8
    for k, g in enumerate(group.generators):
        assert trace(g) == pytest.approx(2 + 2 * SQ2, abs=1e-9)
        inv = group.generators[(k + 4) % 8]
        assert psl2.entry_deviation(compose(g, inv)) < 1e-12
    assert fuchsian.relator_deviation(group.generators, group.relator) < 1e-9


def test_relator_oracle(group):
    # independent product in numpy
    M = np.eye(2)
    for k in group.relator:
        M = M @ group.generators[k].matrix
    M *= np.sign(np.trace(M))
    assert np.abs(M - np.eye(2)).max() < 1e-9


def test_wrong_offset_rejected(group):
    g0 = fuchsian.bolza_generator()
    gens = []
    for k in range(8):
        rho = psl2.rotation_element(k * math.pi / 2)
        gens.append(compose(compose(rho, g0), inverse(rho)))
    with pytest.raises(GroupConstructionError):
        FuchsianGroup("bad", tuple(gens), group.relator, group.inverse_index)


def test_domain_reduction_lands_in_octagon(group, rng):
    for _ in range(200):
        z = psl2.base_point(random_element(rng, 6.0))
        x, y, gamma = group.reduce_point(z.x, z.y)
        assert psl2.dist_h2_xy(x, y, 0.0, 1.0) <= group.domain_radius + 1e-9
        w = psl2.mobius(gamma, z)
        assert (w.x, w.y) == pytest.approx((x, y), abs=1e-9)


# --- balls --------------------------------------------------------------------


def test_ball_small_cases(group):
    assert len(enumerate_ball(group, 0)) == 1
    b1 = enumerate_ball(group, 1)
    assert len(b1) == 9
    assert b1.elements[0].word == () and b1.elements[0].element == IDENTITY


def test_ball_radius_three_is_trivial(group):
    ball = enumerate_ball(group, 3, 3.0)
    assert [e.word for e in ball.elements] == [()]
    # oracle: every product of <= 3 generators, filtered by displacement
    near = [g for g in brute_force_words(group, 3) if psl2.displacement(g) <= 3.0]
    assert all(psl2.entry_deviation(g) < 1e-9 for g in near)


def test_ball_matches_brute_force(group, ball_w3):
    ref = brute_force_words(group, 3)
    uniq = []
    for g in ref:
        if not any(psl2.entry_deviation(compose(inverse(u), g)) < 1e-9 for u in uniq):
            uniq.append(g)
    assert len(uniq) == len(ball_w3) == 457


def test_ball_invariants(ball8):
    elems = ball8.elements
    assert elems[0].element == IDENTITY and elems[0].word == ()
    disps = [e.displacement for e in elems]
    assert disps == sorted(disps)
    M = ball8.mats
    for k in range(len(elems)):
        diff = np.abs(M[k + 1:] - M[k]).reshape(-1, 4).max(axis=1)
        assert (diff > 1e-9).all()
    assert min(e.displacement for e in ball8.non_identity()) >= 3.05
    assert ball8.complete_radius == pytest.approx(8.0)


def test_systole(ball_w3):
    sys_ = min(e.displacement for e in ball_w3.non_identity())
    assert sys_ == pytest.approx(SYSTOLE, abs=1e-9)
    assert round(sys_, 3) == 3.057


def test_ball_cap(group):
    with pytest.raises(BallSizeError):
        enumerate_ball(group, 3, cap=50)
    with pytest.raises(DomainError):
        enumerate_ball(group, -1)


def test_ball_cache_roundtrip(group):
    ball = enumerate_ball(group, 64, 5.5)
    text = fuchsian.dumps_ball(ball)
    assert text.startswith("# horolab-ball schema_version=1\n")
    back = fuchsian.load_ball(io.StringIO(text), group)
    assert len(back) == len(ball) == 65
    assert all(p.element == q.element and p.word == q.word for p, q in zip(ball.elements, back.elements))
    assert back.complete_radius == ball.complete_radius
    assert fuchsian.dumps_ball(back) == text
    with pytest.raises(DomainError):
        fuchsian.load_ball(io.StringIO(text.replace(" 0.", " 9.", 1)), group)
    with pytest.raises(DomainError):
        fuchsian.load_ball(io.StringIO("garbage\n"), group)


# --- constants ----------------------------------------------------------------


@pytest.mark.parametrize("wl", [1, 2, 3])
def test_eps_star_by_word_length(group, wl):
    est = estimate_eps_star(enumerate_ball(group, wl))
    assert est.eps_star_lb == pytest.approx(2 * SQ2, abs=1e-9)
    assert est.word_length_used == wl


def test_eps_star_certified(ball8):
    est = estimate_eps_star(ball8)
    assert est.certified
    assert est.eps_star_lb == pytest.approx(2 * SQ2, abs=1e-9)


def test_eps_star_empty(group):
    with pytest.raises(DomainError):
        estimate_eps_star(enumerate_ball(group, 0))


def test_sigma0():
    assert estimate_sigma0(2 * SQ2) == pytest.approx(SYSTOLE / SQ2, abs=1e-12)
    assert estimate_sigma0(2 * SQ2) == pytest.approx(2.1617, abs=1e-3)
    assert 0 < estimate_sigma0(1e-12) < 1e-5


def test_sigma0_sampled(ball8, rng):
    sigma = estimate_sigma0(estimate_eps_star(ball8))
    rest = ball8.non_identity()
    for _ in range(1000):
        g = random_element(rng, 3.0)
        gam = rest[rng.integers(len(rest))].element
        assert psl2.dist_lower(compose(gam, g), g) > sigma


# --- quotient metric ------------------------------------------------------------


def qp(g, group):
    return QuotientPoint(g, group)


def test_quotient_examples(group, ball8, rng):
    x = qp(random_element(rng), group)
    assert quotient_dist(x, x, ball8) == psl2.DistanceBracket(0.0, 0.0)
    for e in ball8.elements[1:40]:
        b = quotient_dist(qp(IDENTITY, group), qp(e.element, group), ball8)
        assert b.lo < 1e-12 and b.hi < 1e-12
    b = quotient_dist(qp(IDENTITY, group), qp(horocycle_element(0.1), group), ball8)
    assert b.hi <= 0.1 and b.certified


def test_quotient_symmetry(group, ball8, rng):
    for _ in range(1000):
        x, y = qp(random_element(rng, 4.0), group), qp(random_element(rng, 4.0), group)
        p, q = quotient_dist(x, y, ball8), quotient_dist(y, x, ball8)
        assert max(p.lo, q.lo) <= min(p.hi, q.hi) + 1e-12


def test_quotient_triangle(group, ball8, rng):
    # hi is a one-curve length, not a metric, so the guaranteed chain is
    # lo(x, z) <= d(x, z) <= d(x, y) + d(y, z) <= hi(x, y) + hi(y, z)
    for _ in range(1000):
        x, y, z = (qp(random_element(rng, 4.0), group) for _ in range(3))
        assert quotient_dist(x, z, ball8).lo <= (
            quotient_dist(x, y, ball8).hi + quotient_dist(y, z, ball8).hi + 1e-9)


def test_quotient_radius_stability(group, rng):
    small, big = enumerate_ball(group, 3), enumerate_ball(group, 4)
    for _ in range(100):
        x, y = qp(random_element(rng, 2.0), group), qp(random_element(rng, 2.0), group)
        p, q = quotient_dist(x, y, small), quotient_dist(x, y, big)
        assert q.hi <= p.hi + 1e-12
        if p.certified and q.certified:
            assert q.lo >= p.lo - 1e-12


def test_quotient_equivariance(group, ball8, rng):
    for _ in range(200):
        g1, g2 = random_element(rng, 3.0), random_element(rng, 3.0)
        gam = ball8.elements[rng.integers(1, 100)].element
        p = quotient_dist(qp(g1, group), qp(g2, group), ball8)
        q = quotient_dist(qp(compose(gam, g1), group), qp(g2, group), ball8)
        assert q.lo == pytest.approx(p.lo, abs=1e-9)
        assert q.hi == pytest.approx(p.hi, abs=1e-9)


def test_quotient_hi_only_when_ball_small(group):
    tiny = enumerate_ball(group, 1)
    b = quotient_dist(qp(IDENTITY, group), qp(diag_element(3.0), group), tiny)
    assert not b.certified and b.lo == 0.0 and b.hi > 0


def test_quotient_point_equality(group, ball8):
    x = qp(IDENTITY, group)
    assert x.same_point(qp(group.generators[3], group), ball8)
    assert not x.same_point(qp(horocycle_element(0.01), group), ball8)


# --- same-orbit witnesses --------------------------------------------------------


def test_witness_flow(group, ball8, rng):
    x = qp(random_element(rng), group)
    tau, gam = same_orbit_witness(x, horocycle_flow(x, 5.0), ball8)
    assert tau == pytest.approx(5.0, abs=1e-9)
    assert psl2.entry_deviation(gam) < 1e-9


def test_witness_coset(group, ball8, rng):
    g = random_element(rng)
    g0 = ball8.elements[17].element
    y = qp(compose(compose(g0, g), horocycle_element(3.0)), group)
    tau, gam = same_orbit_witness(qp(g, group), y, ball8)
    assert tau == pytest.approx(3.0, abs=1e-9)
    # g^-1 gamma g0 g b_3 is unipotent with the same shift
    k = compose(compose(inverse(g), gam), y.rep)
    assert psl2.entry_deviation(compose(k, horocycle_element(-3.0))) < 1e-8


def test_no_witness_for_diag(group, ball8):
    assert same_orbit_witness(qp(IDENTITY, group), qp(diag_element(1.05), group), ball8) is None
