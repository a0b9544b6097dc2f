import numpy as np
import pytest

from gwlimits.asymptotics import (
    BOETTCHER, HARRIS, RateFunction, RegimeError, boettcher_b, harris_b, harris_b_full,
    rate_M, rate_M_tilde, ratio_limit_boettcher, ratio_limit_harris, saddlepoint_check,
    saddlepoint_pmf, schroder_prefactor, tail_comparison,
)


@pytest.mark.parametrize("s", [1.2, 1.5, 3.0, 40.0])
def test_harris_function_conjugates_f(B, s):
    assert harris_b(B, float(B.pgf(s))) == pytest.approx(2 * harris_b(B, s), abs=1e-12)


@pytest.mark.parametrize("s", [0.1, 0.5, 0.9])
def test_boettcher_function_conjugates_f(C, s):
    assert boettcher_b(C, float(C.pgf(s))) == pytest.approx(2 * boettcher_b(C, s), abs=1e-12)


def test_harris_function_is_asymptotically_log(B):
    sv = harris_b_full(B, 1e6)
    assert 1e6 * sv.d1 == pytest.approx(1.0, abs=1e-9)


def test_frozen_values(B, C):
    assert harris_b(B, 2.0) == pytest.approx(0.45388469382994495, rel=1e-12)
    assert boettcher_b(C, 0.5) == pytest.approx(-1.1380029497130826, rel=1e-12)
    assert rate_M_tilde(B, 1.0) == pytest.approx(0.21626510708569052, rel=1e-9)
    assert rate_M(C, 0.5) == pytest.approx(0.5616332324979142, rel=1e-9)


@pytest.mark.parametrize("u", [0.3, 1.0, 2.5])
def test_psi_scaling(B, u):
    rf = RateFunction(B, HARRIS)
    assert rf.psi(u).value == pytest.approx(rf.psi(1.5 * u).value / 2, abs=1e-9)


def test_rate_periodicity(B, C):
    rC = RateFunction(C, BOETTCHER)
    assert rate_M_tilde(B, 1.0) == pytest.approx(rate_M_tilde(B, 2 / 1.5), abs=1e-6)
    assert rate_M(C, 0.5) == pytest.approx(rate_M(C, 0.5 * 2.5 ** (1 - rC.beta)), abs=1e-6)


def test_wrong_regime(B):
    with pytest.raises(RegimeError):
        RateFunction(B, BOETTCHER)


def test_tails_against_inverted_density(B, C, table_B, table_C):
    for row in tail_comparison(B, 1, [6.0, 9.0, 12.0], table_B, HARRIS):
        assert abs(row[3] - 1) < 1e-4
    for row in tail_comparison(C, 1, [0.05, 0.2], table_C, BOETTCHER):
        assert abs(row[3] - 1) < 1e-5


def test_saddlepoint_pmf(B, C, table_B, table_C):
    assert abs(saddlepoint_check(B, 1, 12, 2 ** 12 - 2, table_B)[2]) < 0.1
    assert saddlepoint_check(C, 1, 10, 2 ** 10 + 6, table_C)[2] == pytest.approx(0.01395, abs=1e-4)
    sp = saddlepoint_pmf(C, 1, 10, 2 ** 10 + 6, table_C)
    assert sp.side == BOETTCHER
    assert 0 <= sp.l < 10


def test_ratio_limits(B, C):
    for row in ratio_limit_harris(B, 1, 1, lambda n: 2 ** n - 2, range(6, 11)):
        assert row[3] == pytest.approx(4 / 3)
        assert row[4] < 1e-12
    for row in ratio_limit_boettcher(C, 1, 1, lambda n: 2 ** n + 6, range(6, 11)):
        assert row[3] == pytest.approx(2.0)
        assert row[4] < 1e-12


def test_schroder_prefactor_geometric(G, table_G):
    # w(x) = (1/4) e^{-x/2} so x^{1-alpha} w(x) -> 1/4 with alpha = 1
    v = schroder_prefactor(G, np.array([1e-4, 1e-3]), table_G)
    np.testing.assert_allclose(v, 0.25 * np.exp(-0.5 * np.array([1e-4, 1e-3])), rtol=1e-6)
