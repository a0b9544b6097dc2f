import math
from fractions import Fraction

import numpy as np
import pytest

from gwlimits.offspring import (
    FINITE, GEOMETRIC, OffspringDistribution, OffspringError, conjugate, dirac,
    size_biased, subcritical_lift,
)


def test_fixture_constants(B, C, G):
    assert B.mean == pytest.approx(1.5, abs=1e-15)
    assert B.extinction == pytest.approx(1 / 3, abs=1e-15)
    assert B.fprime_c == pytest.approx(0.5, abs=1e-15)
    assert B.period == (2, 0)
    assert C.mean == pytest.approx(2.5, abs=1e-15)
    assert C.extinction == 0.0
    assert C.period == (1, 0)
    assert C.beta_boettcher == pytest.approx(math.log(2) / math.log(2.5), abs=1e-15)
    assert C.beta_harris == pytest.approx(math.log(3) / math.log(2.5), abs=1e-15)
    assert G.mean == pytest.approx(1.5, abs=1e-15)
    assert G.extinction == pytest.approx(0.5, abs=1e-14)
    assert G.fprime_c == pytest.approx(2 / 3, abs=1e-14)


def test_schroeder_exponent(B, G, C):
    assert B.alpha == pytest.approx(math.log(2) / math.log(1.5), abs=1e-14)
    assert G.alpha == pytest.approx(1.0, abs=1e-14)
    assert C.alpha == math.inf


def test_boettcher_exponent_needs_a_min_two(B):
    with pytest.raises(OffspringError):
        B.beta_boettcher


def test_parse_and_describe_round_trip():
    d = OffspringDistribution.parse("0:1/4,2:3/4")
    assert d.kind == FINITE
    assert d.prob(2) == pytest.approx(0.75)
    assert OffspringDistribution.parse(d.describe()).probs == d.probs
    g = OffspringDistribution.parse("geometric:0.75,0.5")
    assert g.kind == GEOMETRIC
    assert g.describe() == "geometric:0.75,0.5"


@pytest.mark.parametrize("bad", ["", "0:0.5,1:0.6", "x:1", "geometric:0.5", "0:-0.1,2:1.1"])
def test_parse_rejects(bad):
    with pytest.raises((OffspringError, ValueError)):
        OffspringDistribution.parse(bad)


def test_pgf_and_iterates(B, G):
    # f3(0) for B by hand: f(0)=1/4, f(1/4)=1/4+3/64=19/64, f(19/64)
    f2 = Fraction(19, 64)
    f3 = Fraction(1, 4) + Fraction(3, 4) * f2 ** 2
    assert B.iterate(3, 0.0) == pytest.approx(float(f3), abs=1e-16)
    # the geometric pgf is a Moebius map, so iterates stay closed form
    s = 0.3
    f = lambda z: 0.25 + 0.75 * 0.5 * z / (1 - 0.5 * z)
    assert G.iterate(2, s) == pytest.approx(f(f(s)), abs=1e-15)


def test_derivative_against_finite_difference(G):
    x, h = 0.4, 1e-5
    fd = (G.pgf(x + h) - G.pgf(x - h)) / (2 * h)
    assert float(G.derivative(1, x)) == pytest.approx(fd, rel=1e-9)


def test_conjugate_is_subcritical(B, G):
    cb = conjugate(B)
    assert cb.prob(0) == pytest.approx(0.75)
    assert cb.prob(2) == pytest.approx(0.25)
    assert cb.mean == pytest.approx(0.5)
    cg = conjugate(G)
    assert cg.describe() == "geometric:0.5,0.75"
    assert cg.mean == pytest.approx(2 / 3)


def test_subcritical_lift_inverts_conjugation():
    kappa, lifted = subcritical_lift(OffspringDistribution.parse("0:0.75,2:0.25"))
    assert kappa == pytest.approx(3.0)
    assert lifted.prob(0) == pytest.approx(0.25)
    assert lifted.prob(2) == pytest.approx(0.75)


def test_size_biased(B, G):
    assert size_biased(B, 1).probs[2] == pytest.approx(1.0)
    sb = size_biased(G, 1, at="c")
    assert sum(sb.probs) == pytest.approx(1.0, abs=1e-12)
    # k p(k) c^{k-1} / f'(c) with p(1) = 3/8, c = 1/2
    assert sb.prob(1) == pytest.approx(0.375 / (2 / 3), abs=1e-12)


def test_dirac_is_deterministic():
    d = dirac(3)
    assert d.mean == 3.0
    assert d.support == [3]


def test_sampling_matches_law(G):
    rng = np.random.default_rng(1)
    x = G.sample(rng, 200_000)
    assert np.mean(x == 0) == pytest.approx(0.25, abs=0.005)
    assert x.mean() == pytest.approx(1.5, abs=0.02)
