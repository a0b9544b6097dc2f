import numpy as np
import pytest

from gwlimits.norming import seneta_heyde
from gwlimits.trees import (
    LambdaLaws, PlaneTree, ThetaSampler, TreeSizeError, TypedTree, conditioned_sampler,
    dumps_ndjson, enumerate_trees, law_restricted_conditioned, law_restricted_gw,
    law_restricted_kesten, law_restricted_T_lambda, law_restricted_theta, loads_ndjson,
    sample_gw, sample_kesten, sample_T_lambda, typed_lambda_sampler,
)


# ------------------------------------------------------------------ encoding
def test_preorder_validation():
    PlaneTree((2, 0, 1, 0))
    for bad in [(1,), (0, 0), (2, 0), (-1,)]:
        with pytest.raises(ValueError):
            PlaneTree(bad)


def test_levels_round_trip():
    t = PlaneTree((2, 2, 0, 0, 1, 0))
    assert t.levels == ((2,), (2, 1), (0, 0, 0))
    assert t.sizes == (1, 2, 3)
    assert t.height == 2
    assert PlaneTree.from_levels([[2], [2, 1]]) == t


def test_restrictions():
    t = PlaneTree((2, 2, 0, 0, 1, 0))
    assert t.restrict(1) == PlaneTree((2, 0, 0))
    assert t.restrict(0) == PlaneTree((0,))
    assert t.restrict_root(2, 1) == PlaneTree((1, 2, 0, 0))
    with pytest.raises(ValueError):
        t.restrict_root(2, 3)


def test_ndjson_round_trip():
    a = PlaneTree((2, 0, 1, 0))
    b = TypedTree(PlaneTree((1, 0)), "se")
    text = dumps_ndjson([a, b])
    assert text == '{"deg":[2,0,1,0]}\n{"deg":[1,0],"types":"se"}\n'
    assert loads_ndjson(text) == [a, b]


def test_enumeration_counts(B):
    assert len(list(enumerate_trees(B.support, 1))) == 2
    assert len(list(enumerate_trees(B.support, 2))) == 5
    assert len(list(enumerate_trees([0, 1, 2], 2))) == 1 + 3 + 9  # root degree 0, 1, 2


# ------------------------------------------------------------------ laws
@pytest.mark.parametrize("h", [1, 2, 3])
def test_gw_law_sums_to_one(B, h):
    total = sum(law_restricted_gw(B, t, h) for t in enumerate_trees(B.support, h))
    assert total == pytest.approx(1.0, abs=1e-14)


def test_kesten_law(B, G):
    assert sum(law_restricted_kesten(B, t, 2) for t in enumerate_trees(B.support, 2)) \
        == pytest.approx(1.0, abs=1e-14)
    # one spine child is size-biased, the others are tau conditioned to die
    assert law_restricted_kesten(B, PlaneTree((2, 2, 0, 0, 0)), 2) == pytest.approx(0.375, abs=1e-15)
    assert law_restricted_kesten(G, PlaneTree((1, 0)), 1) == pytest.approx(0.5625, abs=1e-14)


def test_conditioned_law(B):
    # Z_2 = 4 forces both first-generation vertices to have two children
    full = PlaneTree((2, 2, 0, 0, 2, 0, 0))
    assert law_restricted_conditioned(B, full, 2, 2, 4) == pytest.approx(1.0, abs=1e-14)
    # Z_2 = 2: one of the two slots branches, or the root has a single surviving line
    total = sum(law_restricted_conditioned(B, t, 1, 2, 2) for t in enumerate_trees(B.support, 1))
    assert total == pytest.approx(1.0, abs=1e-14)


def test_conditioned_sampler_hits_target(B, G):
    rng = np.random.default_rng(5)
    for d, n, a in [(B, 4, 6), (G, 5, 9)]:
        smp = conditioned_sampler(d, n, a)
        for _ in range(50):
            assert smp.sample(rng).z(n) == a


def test_conditioned_sampler_frequencies(B):
    rng = np.random.default_rng(11)
    smp = conditioned_sampler(B, 2, 2)
    draws = [smp.sample(rng).restrict(1) for _ in range(5_000)]
    p = law_restricted_conditioned(B, PlaneTree((2, 0, 0)), 1, 2, 2)
    assert np.mean([t == PlaneTree((2, 0, 0)) for t in draws]) == pytest.approx(p, abs=0.02)


def test_theta_law_sums(B, table_B):
    total = sum(law_restricted_theta(B, 1.0, t, 2, table_B) for t in enumerate_trees(B.support, 2))
    assert total == pytest.approx(1.0, abs=1e-6)


def test_lambda_law_sums(B, table_B):
    laws = LambdaLaws(B, 1.0, table_B)
    total = sum(law_restricted_T_lambda(B, 1.0, t, 2, laws) for t in enumerate_trees(B.support, 2))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_critical_lambda_on_geometric(G):
    from gwlimits.norming import natural_seed
    laws = LambdaLaws.critical(G, seneta_heyde(G, c0=natural_seed(G)))
    assert laws.lam == pytest.approx(0.5, abs=1e-12)


# ------------------------------------------------------------------ samplers
def test_gw_sampler_level_sizes(B):
    rng = np.random.default_rng(2)
    z1 = [sample_gw(B, 1, rng).z(1) for _ in range(10_000)]
    assert np.mean(z1) == pytest.approx(1.5, abs=0.03)


def test_gw_sampler_size_guard(C):
    with pytest.raises(TreeSizeError):
        sample_gw(C, 30, np.random.default_rng(0), max_vertices=1000)


def test_kesten_spine_never_dies(B):
    rng = np.random.default_rng(4)
    for _ in range(200):
        t = sample_kesten(B, 4, rng)
        t.check()
        assert t.tree.z(4) >= 1


def test_kesten_regular_when_no_extinction(C):
    t = sample_kesten(C, 3, np.random.default_rng(0))
    assert t.tree.height >= 3


def test_theta_sampler_types(B, table_B):
    rng = np.random.default_rng(6)
    smp = ThetaSampler(B, table_B)
    for _ in range(100):
        t = smp.sample(1.0, 3, rng)
        t.check()
        assert set(t.types) <= {"s", "e"}


def test_lambda_samplers(B, table_B):
    rng = np.random.default_rng(8)
    laws = LambdaLaws(B, 1.0, table_B)
    assert sample_T_lambda(B, 1.0, 3, rng, laws).height <= 3
    smp = typed_lambda_sampler(B, laws, "e")
    t = smp.sample(3, rng)
    assert len(t.types) == len(t.tree)


def test_samplers_are_seeded(B):
    a = [sample_gw(B, 4, np.random.default_rng(9)).deg for _ in range(3)]
    assert a[0] == a[1] == a[2]
