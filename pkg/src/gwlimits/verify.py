"""Numerical harness: strong-ratio limits, law identities, sampler/law
chi-square comparisons and the subcritical transfer."""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from .density import WTable, w_conv, w_k
from .genlaw import ratio_H, reachability
from .norming import NormingTable, seneta_heyde
from .offspring import FINITE, GEOMETRIC, OffspringDistribution, subcritical_lift
from .trees import (LambdaLaws, PlaneTree, ThetaMixture, ThetaSampler, enumerate_trees,
                    law_restricted_conditioned, law_restricted_gw, law_restricted_kesten,
                    law_restricted_T_lambda, law_restricted_T_lambda_survival, law_restricted_theta,
                    sample_gw, sample_kesten, typed_lambda_sampler)

P_THRESHOLD = 1e-3
EXTINCTION, LOW, MODERATE, HIGH = "extinction", "low", "moderate", "high"


class UnsupportedRegimeError(ValueError):
    pass


class InsufficientSamplesError(ValueError):
    pass


# ------------------------------------------------------------------ regimes
@dataclass
class RegimeSpec:
    """A regime with its target sequence a_n.

    ``rule`` maps (n, d, table) to a real target; it is rounded to the
    nearest value in the reachable congruence class and every correction is
    recorded in ``corrections``.
    """

    regime: str
    theta: float | None = None
    rule: Callable | None = None
    corrections: list = field(default_factory=list)

    def __post_init__(self):
        if self.regime not in (EXTINCTION, LOW, MODERATE, HIGH):
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.regime == MODERATE and not (self.theta and self.theta > 0):
            raise ValueError("the moderate regime needs theta > 0")

    def a_n(self, d: OffspringDistribution, n: int, table: NormingTable | None = None) -> int:
        if self.regime == EXTINCTION:
            return 0
        if self.rule is not None:
            target = float(self.rule(n, d, table))
        elif self.regime == MODERATE:
            table = table if table is not None else seneta_heyde(d)
            table.ensure(n)
            target = self.theta * table.c[n]
        else:
            raise ValueError(f"the {self.regime} regime needs an explicit rule")
        a = _nearest_reachable(d, n, target)
        if a != target:
            self.corrections.append((n, target, a))
        return a


def _nearest_reachable(d: OffspringDistribution, n: int, target: float) -> int:
    L0, r0 = d.period
    cls = pow(r0, n, L0) if L0 > 1 else 0
    base = math.floor(target)
    best = None
    for a in range(max(base - 2 * L0, 0), base + 2 * L0 + 1):
        if (a - cls) % L0 == 0 and reachability(d, 1, n, a):
            if best is None or abs(a - target) < abs(best - target):
                best = a
    if best is None:
        raise ValueError(f"no reachable value near {target} at n={n}")
    return best


def limit_H(d: OffspringDistribution, regime: RegimeSpec, h: int, k: int,
            table: NormingTable | None = None) -> float:
    c = d.extinction
    if regime.regime == EXTINCTION:
        if c == 0:
            raise UnsupportedRegimeError("no extinction when p(0) = 0")
        return c ** (k - 1)
    if regime.regime == LOW:
        a = d.a_min
        if a == 0:
            return k * c ** (k - 1) * d.fprime_c ** (-h)
        if a == 1:
            return d.fprime_c ** (-h) if k == 1 else 0.0
        return d.prob(a) ** (-(a ** h - 1) / (a - 1)) if k == a ** h else 0.0
    if regime.regime == MODERATE:
        L0, r0 = d.period
        if (k - pow(r0, h, L0)) % L0 != 0:
            return 0.0
        th = regime.theta
        mu = d.mean
        return mu ** h * w_k(d, k, mu ** h * th, table) / w_conv(d, 1, th, table)[0]
    if d.kind == FINITE:
        b = int(d.b_max)
        return d.prob(b) ** (-(b ** h - 1) / (b - 1)) if k == b ** h else 0.0
    if d.kind == GEOMETRIC:
        return 0.0
    raise UnsupportedRegimeError("the high regime with unbounded non-geometric support is open")


@dataclass(frozen=True)
class RatioRow:
    n: int
    a: int
    H: float
    limit: float
    rel_dev: float


def ratio_convergence_report(d: OffspringDistribution, regime: RegimeSpec, h: int, k: int,
                             n_range, table: NormingTable | None = None) -> list[RatioRow]:
    if regime.regime == MODERATE and table is None:
        table = seneta_heyde(d)
    lim = limit_H(d, regime, h, k, table)
    rows = []
    for n in n_range:
        a = regime.a_n(d, n, table)
        H = ratio_H(d, n, h, k, a)
        dev = abs(H / lim - 1.0) if lim != 0 else abs(H)
        rows.append(RatioRow(n, a, H, lim, dev))
    return rows


# ------------------------------------------------------------------ chi-square
@dataclass(frozen=True)
class ChiSquare:
    statistic: float
    dof: int
    p_value: float
    cells: int

    @property
    def passed(self) -> bool:
        return self.p_value > P_THRESHOLD


def chi_square_compare(samples, law, min_expected: float = 5.0) -> ChiSquare:
    """Pearson test of observed keys against a law (mapping or callable).

    Keys with expected count >= ``min_expected`` get their own cell; the
    rest, including every key never observed, are pooled into one cell of
    mass 1 - (sum of the kept masses).
    """
    counts = samples if isinstance(samples, Counter) else Counter(samples)
    N = sum(counts.values())
    if N < min_expected:
        raise InsufficientSamplesError(f"{N} samples are too few")
    if isinstance(law, Mapping):
        probs = {k: float(v) for k, v in law.items()}
    else:
        probs = {k: float(law(k)) for k in counts}
    total = math.fsum(probs.values())
    if total > 1.0 + 1e-9:
        raise ValueError(f"law masses sum to {total} > 1")
    kept = {k: p for k, p in probs.items() if N * p >= min_expected}
    obs = [counts.get(k, 0) for k in kept]
    exp = [N * p for p in kept.values()]
    rest_p = max(0.0, 1.0 - math.fsum(kept.values()))
    rest_o = N - sum(obs)
    if N * rest_p >= min_expected:
        obs.append(rest_o)
        exp.append(N * rest_p)
    elif rest_o > 0 or kept:
        # fold the small remainder into the largest cell
        if exp:
            i = int(np.argmax(exp))
            exp[i] += N * rest_p
            obs[i] += rest_o
    if not exp:
        raise InsufficientSamplesError("no cell reaches the expected-count floor")
    obs_a, exp_a = np.array(obs, dtype=float), np.array(exp, dtype=float)
    stat = float(((obs_a - exp_a) ** 2 / exp_a).sum())
    dof = len(exp) - 1
    p = 1.0 if dof == 0 else float(chi2.sf(stat, dof))
    return ChiSquare(stat, dof, p, len(exp))


def tree_key(t) -> tuple:
    tree = getattr(t, "tree", t)
    return tree.deg


def _keyed_law(fn):
    return lambda key: fn(PlaneTree(key))


# ------------------------------------------------------------------ equivalence
@dataclass(frozen=True)
class EquivalenceResult:
    name: str
    draws: int
    test: ChiSquare

    @property
    def passed(self) -> bool:
        return self.test.passed


def gw_equivalence(d: OffspringDistribution, draws: int, rng, h: int = 2) -> EquivalenceResult:
    c = Counter(sample_gw(d, h, rng).restrict(h).deg for _ in range(draws))
    law = _keyed_law(lambda t: law_restricted_gw(d, t, h))
    return EquivalenceResult(f"gw r{h}", draws, chi_square_compare(c, law))


def kesten_equivalence(d: OffspringDistribution, draws: int, rng, h: int = 2) -> EquivalenceResult:
    c = Counter(sample_kesten(d, h, rng).tree.deg for _ in range(draws))
    law = _keyed_law(lambda t: law_restricted_kesten(d, t, h))
    return EquivalenceResult(f"kesten r{h}", draws, chi_square_compare(c, law))


def theta_equivalence(d: OffspringDistribution, theta: float, draws: int, rng, h: int = 2,
                      table: NormingTable | None = None) -> EquivalenceResult:
    table = table if table is not None else seneta_heyde(d)
    sampler = ThetaSampler(d, table)
    c = Counter(sampler.sample(theta, h, rng).tree.deg for _ in range(draws))
    law = _keyed_law(lambda t: law_restricted_theta(d, theta, t, h, table))
    return EquivalenceResult(f"tau^theta r{h} theta={theta}", draws, chi_square_compare(c, law))


def lambda_e_equivalence(d: OffspringDistribution, lam: float, draws: int, rng, h: int = 2,
                         table: NormingTable | None = None) -> EquivalenceResult:
    laws = LambdaLaws(d, lam, table)
    sampler = typed_lambda_sampler(d, laws, "e")
    c = Counter(sampler.sample(h, rng).tree.deg for _ in range(draws))
    law = _keyed_law(lambda t: law_restricted_T_lambda(d, lam, t, h, laws))
    return EquivalenceResult(f"T^lambda-e skeleton r{h} lambda={lam}", draws, chi_square_compare(c, law))


def mixture_equivalence(d: OffspringDistribution, lam: float, draws: int, rng, h: int = 2,
                        table: NormingTable | None = None, theta_max: float = 8.0,
                        theta_min: float = 1e-4) -> EquivalenceResult:
    """tau^Theta with Theta ~ w(theta) e^{lambda theta} / (zeta_0 - c) against T^(lambda),*."""
    table = table if table is not None else seneta_heyde(d)
    mu = d.mean
    ells = range(1, int(d.b_max) ** h + 1)
    wt = WTable(d, ells, theta_min, theta_max * mu ** h, table=table)
    laws = LambdaLaws(d, lam, table)
    mix = ThetaMixture(d, lam, wt, theta_max, laws=laws)
    sampler = ThetaSampler(d, table, wtable=wt)
    c = Counter(sampler.sample(mix.draw(rng), h, rng, cache=False).tree.deg for _ in range(draws))
    law = _keyed_law(lambda t: law_restricted_T_lambda_survival(d, lam, t, h, laws))
    return EquivalenceResult(f"Theta mixture vs T^lambda-* r{h} lambda={lam}", draws,
                             chi_square_compare(c, law))


SUITE_JOBS = ("theta_B", "kesten_B", "kesten_G", "lambda_e_B", "mixture_B")


def _suite_job(i: int, draws: int, seq) -> EquivalenceResult:
    from .offspring import fixtures
    F = fixtures()
    B, G = F["B"], F["G"]
    rng = np.random.default_rng(seq)
    if i == 0:
        res = theta_equivalence(B, 1.0, draws, rng)
    elif i == 1:
        res = kesten_equivalence(B, draws, rng)
    elif i == 2:
        res = kesten_equivalence(G, draws, rng)
    elif i == 3:
        res = lambda_e_equivalence(B, 1.0, draws, rng)
    else:
        res = mixture_equivalence(B, 1.0, draws, rng)
    return EquivalenceResult(SUITE_JOBS[i], res.draws, res.test)


def equivalence_suite(draws: int = 100_000, seed: int = 0, workers: int = 1) -> list[EquivalenceResult]:
    """The sampler/law comparisons, each on its own stream of one master seed.

    Streams are fixed per job, so the result does not depend on ``workers``.
    """
    seqs = np.random.SeedSequence(seed).spawn(5)
    if workers <= 1:
        return [_suite_job(i, draws, s) for i, s in enumerate(seqs)]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(_suite_job, i, draws, s) for i, s in enumerate(seqs)]
        return [f.result() for f in futs]


# ------------------------------------------------------------------ exact identities
def conditioned_law_check(d: OffspringDistribution, n: int, a: int, h: int) -> float:
    """Max gap between P(r_h(tau_n) = t) by full enumeration and by the product formula."""
    if d.kind != FINITE:
        raise ValueError("full enumeration needs finite support")
    full = list(enumerate_trees(d.support, n))
    num: dict = {}
    den = 0.0
    for t in full:
        if t.z(n) != a:
            continue
        p = law_restricted_gw(d, t, n)
        den += p
        key = t.restrict(h).deg
        num[key] = num.get(key, 0.0) + p
    gap = 0.0
    for key, v in num.items():
        gap = max(gap, abs(v / den - law_restricted_conditioned(d, PlaneTree(key), h, n, a)))
    return gap


@dataclass(frozen=True)
class SubcriticalReport:
    kappa: float
    tree_gap: float
    conditioned_gap: float
    trees: int

    @property
    def passed(self) -> bool:
        return self.tree_gap < 1e-12 and self.conditioned_gap < 1e-12


def check_subcritical(d_sub: OffspringDistribution, h: int = 2, n: int = 3, a: int = 2,
                      max_degree: int = 4) -> SubcriticalReport:
    """P(r_h(tau) = t) = kappa^{1-k} P(r_h(bar tau) = t) and equality of the conditioned laws."""
    kappa, lifted = subcritical_lift(d_sub)
    degs = d_sub.support if d_sub.kind == FINITE else range(max_degree + 1)
    tree_gap = 0.0
    cond_gap = 0.0
    count = 0
    for t in enumerate_trees(degs, h):
        count += 1
        k = t.z(h)
        lhs = law_restricted_gw(d_sub, t, h)
        rhs = kappa ** (1 - k) * law_restricted_gw(lifted, t, h)
        tree_gap = max(tree_gap, abs(lhs - rhs))
        if h < n:
            p1 = law_restricted_conditioned(d_sub, t, h, n, a)
            p2 = law_restricted_conditioned(lifted, t, h, n, a)
            cond_gap = max(cond_gap, abs(p1 - p2))
    return SubcriticalReport(kappa, tree_gap, cond_gap, count)


def tv_theta(d: OffspringDistribution, theta1: float, theta2: float, h: int = 2,
             table: NormingTable | None = None) -> float:
    """Total variation between the laws of r_h(tau^theta) at two values (finite support)."""
    tot = 0.0
    for t in enumerate_trees(d.support, h):
        tot += abs(law_restricted_theta(d, theta1, t, h, table) - law_restricted_theta(d, theta2, t, h, table))
    return 0.5 * tot


def tv_theta_infinity(d: OffspringDistribution, theta: float, h: int = 2,
                      table: NormingTable | None = None) -> float:
    """TV between r_h(tau^theta) and the regular b-ary tree."""
    b = int(d.b_max)
    reg = PlaneTree.from_levels([[b] * b ** g for g in range(h)])
    return 1.0 - law_restricted_theta(d, theta, reg, h, table)
