import math

import numpy as np
import pytest

from gwlimits.density import (
    UnsupportedLawError, WTable, density_grid, log_w_conv, log_w_k, rho_law, rho_sample,
    w_conv, w_k,
)
from gwlimits.offspring import OffspringDistribution


def test_geometric_density_closed_form(G, table_G):
    xs = np.linspace(0.1, 10.0, 40)
    v, err = w_conv(G, 1, xs, table_G)
    np.testing.assert_allclose(v, 0.25 * np.exp(-0.5 * xs), rtol=1e-9)
    assert np.all(err < 1e-8 * v + 1e-300)


def test_geometric_convolution_is_gamma(G, table_G):
    xs = np.array([0.5, 2.0, 6.0])
    v, _ = w_conv(G, 2, xs, table_G)
    np.testing.assert_allclose(v, 0.25 ** 2 * xs * np.exp(-0.5 * xs), rtol=1e-8)


def test_frozen_B_values(B, table_B):
    v, _ = w_conv(B, 1, np.array([0.5, 1.0, 2.0]), table_B)
    np.testing.assert_allclose(v, [0.33224446, 0.37493158, 0.16884225], rtol=1e-7)


def test_B_density_functional_equation(B, table_B):
    # w(x) = mu * 3/4 * (2 c w(mu x) + w*w(mu x))
    xs = np.array([0.4, 1.0, 2.5])
    w1, _ = w_conv(B, 1, 1.5 * xs, table_B)
    w2, _ = w_conv(B, 2, 1.5 * xs, table_B)
    lhs, _ = w_conv(B, 1, xs, table_B)
    np.testing.assert_allclose(lhs, 1.5 * 0.75 * (2 / 3 * w1 + w2), rtol=1e-9)


def test_mass_of_convolution_powers(B, table_B):
    xs = np.geomspace(1e-4, 40.0, 400)
    for ell in (1, 2):
        g = density_grid(B, ell, xs, table_B)
        assert g.integral() == pytest.approx((2 / 3) ** ell, rel=1e-5)


def test_w_k_mixture(B, table_B):
    # w_2 = 2 c w + w*w for two ancestors
    x = 1.0
    expect = 2 / 3 * w_conv(B, 1, x, table_B)[0] + w_conv(B, 2, x, table_B)[0]
    assert w_k(B, 2, x, table_B) == pytest.approx(expect, rel=1e-12)
    assert w_k(B, 2, x, table_B) == pytest.approx(0.3268210816343296, rel=1e-8)
    assert log_w_k(B, 2, x, table_B) == pytest.approx(math.log(0.3268210816343296), abs=1e-8)


def test_log_density_past_underflow(B, table_B):
    lw, rel = log_w_conv(B, 1, 40.0, table_B)
    assert w_conv(B, 1, 40.0, table_B)[0] == 0.0
    assert -2000 < lw < -700
    assert rel < 1e-6


def test_rho_normalised(B, table_B):
    for r in (1, 2, 3):
        for theta in (0.2, 1.0, 5.0):
            law = rho_law(B, theta, r, table_B)
            assert law.total_pmf.sum() == pytest.approx(1.0, abs=1e-6)


def test_rho_geometric_is_shifted_poisson(G, table_G):
    # for this normalisation rho_{1,1}(s) = e^{-1/4} (1/4)^{s-1} / (s-1)!
    law = rho_law(G, 1.0, 1, table_G)
    for s in (1, 2, 3, 4):
        expect = math.exp(-0.25) * 0.25 ** (s - 1) / math.factorial(s - 1)
        assert law.pmf((s,)) == pytest.approx(expect, rel=1e-8)


def test_rho_sampling(B, table_B):
    rng = np.random.default_rng(3)
    law = rho_law(B, 1.0, 2, table_B)
    draws = [law.sample(rng) for _ in range(20_000)]
    assert rho_sample(B, 1.0, 2, rng, table_B) in {(1, 1), (1, 2), (2, 1), (2, 2)}
    freq = sum(1 for s in draws if s == (1, 1)) / len(draws)
    assert freq == pytest.approx(law.pmf((1, 1)), abs=0.01)


def test_rho_rejects(B, table_B):
    with pytest.raises(ValueError):
        rho_law(B, -1.0, 1, table_B)
    with pytest.raises(ValueError):
        rho_law(B, 1.0, 0, table_B)


def test_wtable_matches_direct(B, table_B):
    # cubic interpolation on 160 log-spaced knots
    wt = WTable(B, [1, 2], 1e-2, 10.0, table=table_B)
    for x in (0.05, 0.7, 3.3):
        for ell in (1, 2):
            assert wt.w(ell, x) == pytest.approx(w_conv(B, ell, x, table_B)[0], rel=1e-5)


def test_rho_needs_explicit_law():
    d = OffspringDistribution.truncated([0.2, 0.3, 0.3], 0.2)
    with pytest.raises(UnsupportedLawError):
        rho_law(d, 1.0, 1)
