import math

import numpy as np
import pytest

from gwlimits.norming import (
    InvalidSeedError, default_seed, lambda_c, laplace_W, natural_seed, phi_eval,
    seneta_heyde, tilde_p, zeta,
)


def test_default_seeds(B, C):
    assert default_seed(B) == pytest.approx(-2 / math.log(1 / 3), rel=1e-15)
    assert default_seed(C) == 1.0


def test_frozen_tables(B, C, G):
    np.testing.assert_allclose(seneta_heyde(B).c[:4],
                               [1.820478453253675, 2.41242171, 3.32051569, 4.697617], rtol=1e-8)
    np.testing.assert_allclose(seneta_heyde(C).c[:4],
                               [1.0, 2.44931591, 6.07293202, 15.13217345], rtol=1e-8)
    np.testing.assert_allclose(seneta_heyde(G).c[:3],
                               [2.8853900817779268, 3.5981903121173739, 4.6641273238686285], rtol=1e-14)


@pytest.mark.parametrize("name", ["B", "C", "G"])
def test_residuals_and_ratios(laws, name):
    d = laws[name]
    t = seneta_heyde(d, 40)
    assert np.all(t.residuals < 1e-13)
    # ratios of C reach mu in double precision, so strictness lives in the deficits
    assert np.all(t.ratios <= d.mean * (1 + 4e-16))
    assert np.all(t.ratio_deficits > 0)
    assert np.all(np.diff(t.ratio_deficits) < 0)


def test_bad_seed(B):
    with pytest.raises((InvalidSeedError, ValueError)):
        seneta_heyde(B, c0=-1.0)


def test_natural_seed_gives_exponential_W(G, table_G):
    # W is 0 with prob 1/2 and Exp(1/2) otherwise
    z = np.array([0.5, 1.0, 2.0, 7.0])
    np.testing.assert_allclose(laplace_W(G, table_G, z), 0.5 + 0.25 / (0.5 + z), rtol=1e-12)


def test_natural_seed_only_for_geometric(B):
    with pytest.raises(ValueError):
        natural_seed(B)


def test_phi_is_laplace_transform(table_B, B):
    # E e^{-zW} satisfies phi(mu z) = f(phi(z))
    z = np.array([0.3, 1.0, 4.0])
    lhs = phi_eval(table_B, 1.5 * z).phi
    rhs = B.pgf(phi_eval(table_B, z).phi)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-13)


def test_phi_derivative(table_B):
    z, h = 1.3, 1e-5
    v = phi_eval(table_B, np.array([z - h, z, z + h]))
    fd = (v.phi[2] - v.phi[0]) / (2 * h)
    assert v.d1[1] == pytest.approx(fd, rel=1e-7)


def test_critical_tilt(G, B, table_G):
    assert lambda_c(G, table_G) == pytest.approx(0.5, abs=1e-12)
    assert lambda_c(B) == math.inf


def test_tilted_laws_are_distributions(B, table_B):
    for h in (0, 1, 3):
        p = tilde_p(B, 1.0, h, table_B)
        assert sum(p.probs) == pytest.approx(1.0, abs=1e-12)
        assert p.support == [0, 2]
    # zeta_h(lambda) = E[e^{lambda W / mu^h}]
    assert zeta(B, 0.0, 2, table_B) == pytest.approx(1.0, abs=1e-14)


def test_phi_tends_to_extinction_like_power(B, table_B):
    # phi(z) - c ~ z^{-alpha}: 7.2e-4 at z = 50, under 1e-6 only past z ~ 3000
    gap = np.real(phi_eval(table_B, np.array([50.0, 500.0, 5000.0])).phi) - 1 / 3
    assert gap[0] == pytest.approx(7.22048836e-04, rel=1e-6)
    assert gap[1] / gap[0] == pytest.approx(10 ** -B.alpha, rel=0.01)
    assert 0 < gap[2] < 1e-6
