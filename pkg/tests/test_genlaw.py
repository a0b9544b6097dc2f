from fractions import Fraction

import numpy as np
import pytest

from gwlimits.genlaw import (
    CapOverflowError, UnreachableTargetError, generation_law, log_pmf_k, pmf_k,
    ratio_H, reachability,
)


def test_two_generations_exact(B):
    law = generation_law(B, 2, exact=True)
    assert law.rational[0] == Fraction(19, 64)
    assert law.rational[2] == Fraction(9, 32)
    assert law.rational[4] == Fraction(27, 64)
    assert law.rational[1] == law.rational[3] == 0


def test_float_mode_agrees(B):
    p = generation_law(B, 2).probs()
    np.testing.assert_allclose(p, [19 / 64, 0, 9 / 32, 0, 27 / 64], atol=1e-15)


def test_C_second_generation(C):
    # two or three parents, each with two or three children
    p = generation_law(C, 2).probs()
    expect = np.zeros(10)
    expect[[4, 5, 6]] = [1 / 8, 2 / 8, 1 / 8]
    expect[[6, 7, 8, 9]] += np.array([1, 3, 3, 1]) / 16
    np.testing.assert_allclose(p, expect, atol=1e-16)


def test_geometric_cap_and_tail(G):
    law = generation_law(G, 2, cap=6)
    # f_2 is again linear-fractional; its value at 0 is f(1/4)
    f = lambda z: 0.25 + 0.375 * z / (1 - 0.5 * z)
    assert law.prob(0) == pytest.approx(f(0.25), abs=1e-15)
    assert law.probs().sum() + law.tail_mass == pytest.approx(1.0, abs=1e-14)


def test_k_ancestor_pmf(B):
    assert pmf_k(B, 2, 2, 4, exact=True) == Fraction(675, 2048)
    assert np.exp(log_pmf_k(B, 2, 2, 4)) == pytest.approx(675 / 2048, rel=1e-13)


def test_ratio_H_exact(B):
    # for B and a > 0, P(Z_n = a) = (3/4) P_2(Z_{n-1} = a)
    assert ratio_H(B, 3, 1, 2, 4, exact=True) == Fraction(4, 3)
    assert ratio_H(B, 9, 1, 2, 100) == pytest.approx(4 / 3, rel=1e-13)


def test_reachability(B, C):
    assert not reachability(B, 1, 3, 3)
    assert reachability(B, 1, 3, 8)
    assert not reachability(B, 1, 3, 10)
    assert not reachability(C, 1, 2, 3)
    assert reachability(C, 1, 2, 9)


def test_unreachable_target_raises(B):
    with pytest.raises(UnreachableTargetError):
        ratio_H(B, 5, 1, 2, 7)


def test_cap_overflow(G):
    with pytest.raises(CapOverflowError):
        generation_law(G, 3, cap=1 << 30)


def test_tilted_law_is_distribution(B):
    law = generation_law(B, 10, log_tilt=0.3)
    assert law.probs().sum() + law.tail_mass == pytest.approx(1.0, abs=1e-12)
