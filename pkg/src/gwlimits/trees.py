"""Plane trees, Galton-Watson samplers and the laws of the limit trees.

Trees are stored as out-degree sequences in depth-first preorder.  Within
one generation, preorder visits vertices from left to right, so the
generation-wise form ``levels[g] = [k_u for u at depth g]`` is recovered by
grouping on depth.  Infinite trees are only ever materialised through a
depth cap: vertices at the cap are stored as leaves, which is exactly the
restriction r_h.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .density import RhoLaw, WTable, log_w_conv, log_w_k, rho_law
from .genlaw import UnreachableTargetError, generation_law
from .norming import (Condensation, NormingTable, lambda_c, log_zeta, seneta_heyde,
                      tilde_p)
from .offspring import FINITE, OffspringDistribution, conjugate, size_biased

MAX_VERTICES = 2_000_000


class TreeSizeError(RuntimeError):
    pass


# ------------------------------------------------------------------ model
@dataclass(frozen=True)
class PlaneTree:
    deg: tuple

    def __post_init__(self):
        open_slots = 1
        for i, k in enumerate(self.deg):
            if k < 0:
                raise ValueError("negative out-degree")
            if open_slots == 0:
                raise ValueError("preorder sequence continues after the tree is complete")
            open_slots += k - 1
        if open_slots != 0:
            raise ValueError("preorder sequence ends before the tree is complete")

    @classmethod
    def from_levels(cls, levels) -> "PlaneTree":
        levels = [list(l) for l in levels]
        while levels and not levels[-1]:
            levels.pop()
        if not levels:
            return cls((0,))
        # append the leaf generation below the last listed one
        last = sum(levels[-1])
        if last:
            levels.append([0] * last)
        starts = []
        for g, lev in enumerate(levels):
            if g + 1 < len(levels) and sum(lev) != len(levels[g + 1]):
                raise ValueError(f"generation {g + 1} has the wrong size")
            starts.append(np.concatenate([[0], np.cumsum(lev)]).astype(int).tolist())
        out = []
        stack = [(0, 0)]
        while stack:
            g, i = stack.pop()
            k = levels[g][i]
            out.append(k)
            if k:
                first = starts[g][i]
                stack.extend((g + 1, j) for j in range(first + k - 1, first - 1, -1))
        return cls(tuple(out))

    @cached_property
    def depths(self) -> tuple:
        out = []
        stack = []
        for k in self.deg:
            d = len(stack)
            out.append(d)
            if stack:
                stack[-1] -= 1
            if k:
                stack.append(k)
            while stack and stack[-1] == 0:
                stack.pop()
        return tuple(out)

    @cached_property
    def levels(self) -> tuple:
        gens: list[list[int]] = []
        for k, d in zip(self.deg, self.depths):
            while len(gens) <= d:
                gens.append([])
            gens[d].append(k)
        return tuple(tuple(g) for g in gens)

    @property
    def height(self) -> int:
        return len(self.levels) - 1

    def z(self, h: int) -> int:
        return len(self.levels[h]) if h < len(self.levels) else 0

    @property
    def sizes(self) -> tuple:
        return tuple(len(g) for g in self.levels)

    def __len__(self):
        return len(self.deg)

    def restrict(self, h: int) -> "PlaneTree":
        if h < 0:
            raise ValueError("h must be >= 0")
        if h >= self.height:
            return self
        return PlaneTree.from_levels(list(self.levels[:h]))

    def restrict_root(self, h: int, k: int) -> "PlaneTree":
        """r_{h,k}: keep the first k subtrees of the root, cut at depth h."""
        r = self.restrict(h)
        lev = [list(g) for g in r.levels]
        if not lev or lev[0][0] < k:
            raise ValueError("root has fewer than k children")
        keep = [list(range(k))]
        out = [[k]]
        for g in range(1, len(lev)):
            starts = np.concatenate([[0], np.cumsum(lev[g])]).astype(int)
            out.append([lev[g][i] for i in keep[-1]])
            if g + 1 < len(lev):
                keep.append([j for i in keep[-1] for j in range(starts[i], starts[i + 1])])
        return PlaneTree.from_levels(out[:-1] if not any(out[-1]) else out)

    def to_json(self, types: str | None = None) -> str:
        obj = {"deg": list(self.deg)}
        if types is not None:
            obj["types"] = types
        return json.dumps(obj, separators=(",", ":"))


@dataclass(frozen=True)
class TypedTree:
    """Plane tree with a type letter per vertex, in preorder."""

    tree: PlaneTree
    types: str

    def __post_init__(self):
        if len(self.types) != len(self.tree):
            raise ValueError("one type per vertex is required")

    @property
    def skeleton(self) -> PlaneTree:
        return self.tree

    @cached_property
    def level_types(self) -> tuple:
        gens: list[list[str]] = []
        for t, d in zip(self.types, self.tree.depths):
            while len(gens) <= d:
                gens.append([])
            gens[d].append(t)
        return tuple("".join(g) for g in gens)

    def check(self, cap: int | None = None, survivor: str = "s") -> None:
        """Ancestor closure and the at-least-one-survivor-child rule."""
        lev = self.tree.levels
        lt = self.level_types
        for g in range(len(lev) - 1):
            starts = np.concatenate([[0], np.cumsum(lev[g])]).astype(int)
            for i, (k, t) in enumerate(zip(lev[g], lt[g])):
                kids = lt[g + 1][starts[i]:starts[i + 1]]
                if t != survivor and survivor in kids:
                    raise ValueError("a survivor has a non-survivor parent")
                if t == survivor and survivor not in kids and (cap is None or g < cap):
                    raise ValueError("a survivor vertex has no survivor child")
        if cap is not None and lt and len(lt) - 1 < cap and survivor in lt[-1]:
            raise ValueError("a survivor vertex has no survivor child")

    def to_json(self) -> str:
        return self.tree.to_json(self.types)


def dumps_ndjson(trees) -> str:
    lines = []
    for t in trees:
        lines.append(t.to_json())
    return "\n".join(lines) + ("\n" if lines else "")


def loads_ndjson(text: str) -> list:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        tree = PlaneTree(tuple(obj["deg"]))
        out.append(TypedTree(tree, obj["types"]) if "types" in obj else tree)
    return out


# ------------------------------------------------------------------ helpers
class _Discrete:
    """Sampler for a law on {0, 1, ...} given by a probability array."""

    def __init__(self, probs):
        p = np.asarray(probs, dtype=float)
        self.cdf = np.cumsum(p / p.sum())
        self.cdf[-1] = 1.0

    def draw(self, rng, size=None):
        u = rng.random(size)
        return np.searchsorted(self.cdf, u, side="right") if size is not None \
            else int(np.searchsorted(self.cdf, u, side="right"))


def _slots(k: int, s: int, rng) -> set:
    """s distinct positions among k, uniformly (partial Fisher-Yates)."""
    if s >= k:
        return set(range(k))
    if s == 1:
        return {int(rng.integers(k))}
    idx = list(range(k))
    u = rng.random(s)
    for i in range(s):
        j = i + int(u[i] * (k - i))
        idx[i], idx[j] = idx[j], idx[i]
    return set(idx[:s])


def _law_array(d: OffspringDistribution) -> np.ndarray:
    return np.asarray(d.probs, dtype=float)


def _grow(d_by_gen, depth: int, rng, max_vertices: int = MAX_VERTICES) -> list:
    levels = []
    z = 1
    for g in range(depth):
        if z == 0:
            break
        ks = d_by_gen(g).draw(rng, z)
        levels.append([int(k) for k in ks])
        z = int(ks.sum())
        if z > max_vertices:
            raise TreeSizeError(f"generation {g + 1} has {z} vertices")
    return levels


def _gw_product(d: OffspringDistribution, t: PlaneTree, h: int, skip_root: bool = False) -> float:
    out = 1.0
    for g, lev in enumerate(t.levels[:h]):
        for i, k in enumerate(lev):
            if skip_root and g == 0:
                continue
            out *= d.prob(k)
    return out


# ------------------------------------------------------------------ GW
def restrict(t: PlaneTree, h: int) -> PlaneTree:
    return t.restrict(h)


def sample_gw(d: OffspringDistribution, depth_cap: int, rng, max_vertices: int = MAX_VERTICES) -> PlaneTree:
    if depth_cap < 1:
        raise ValueError("depth_cap must be >= 1")
    law = _Discrete(_law_array(d))
    return PlaneTree.from_levels(_grow(lambda g: law, depth_cap, rng, max_vertices))


def law_restricted_gw(d: OffspringDistribution, t: PlaneTree, h: int) -> float:
    """P(r_h(tau) = t): product of p(k_u) over the vertices of depth < h."""
    return _gw_product(d, t, h)


# ------------------------------------------------------------------ conditioned
class _ConditionedSampler:
    """Exact sampler of tau given Z_n = a, generation by generation."""

    def __init__(self, d: OffspringDistribution, n: int, a: int, width: int | None = None):
        self.d, self.n, self.a = d, n, a
        bmax = d.b_max
        if width is None:
            width = int(bmax) ** n if d.kind == FINITE and bmax ** n < 4096 else min(4 * (a + 8), 4096)
        self.width = width
        p = np.zeros(width + 1)
        m = min(len(d.probs), width + 1)
        p[:m] = d.probs[:m]
        self.p = p
        self._pow = [np.eye(1, width + 1, 0)[0]]
        # hit[r][m] = P_m(Z_r = a)
        self.hit = {}
        for r in range(n + 1):
            law = generation_law(d, r, cap=max(a, 1))
            q = law.pmf
            col = np.zeros(width + 1)
            acc = np.zeros(max(a, 1) + 1)
            acc[0] = 1.0
            for mm in range(width + 1):
                col[mm] = acc[a] if a < len(acc) else 0.0
                acc = np.convolve(acc, q)[: max(a, 1) + 1]
            self.hit[r] = col
        if self.hit[n][1] <= 0:
            raise UnreachableTargetError(f"P(Z_{n} = {a}) = 0")

    def _power(self, j: int) -> np.ndarray:
        while len(self._pow) <= j:
            self._pow.append(np.convolve(self._pow[-1], self.p)[: self.width + 1])
        return self._pow[j]

    def sample(self, rng, depth: int | None = None) -> PlaneTree:
        depth = self.n if depth is None else depth
        levels = []
        j = 1
        for g in range(depth):
            if j == 0:
                break
            if g < self.n:
                wts = self._power(j) * self.hit[self.n - g - 1]
                m = int(rng.choice(len(wts), p=wts / wts.sum()))
                levels.append(self._composition(j, m, rng))
            else:
                law = _Discrete(self.p)
                levels.append([int(k) for k in law.draw(rng, j)])
            j = sum(levels[-1])
        return PlaneTree.from_levels(levels)

    def _composition(self, j: int, m: int, rng) -> list:
        out = []
        for i in range(j, 0, -1):
            rest = self._power(i - 1)
            ks = np.arange(0, m + 1)
            wts = self.p[ks] * rest[m - ks]
            k = int(rng.choice(len(ks), p=wts / wts.sum()))
            out.append(k)
            m -= k
        return out


def sample_conditioned(d: OffspringDistribution, n: int, a: int, rng, sampler=None) -> PlaneTree:
    """tau conditioned on Z_n = a, exactly."""
    if sampler is None:
        sampler = _ConditionedSampler(d, n, a)
    return sampler.sample(rng)


def conditioned_sampler(d: OffspringDistribution, n: int, a: int) -> _ConditionedSampler:
    return _ConditionedSampler(d, n, a)


def law_restricted_conditioned(d: OffspringDistribution, t: PlaneTree, h: int, n: int, a: int) -> float:
    """P(r_h(tau_n) = t) = P(r_h(tau) = t) P_k(Z_{n-h} = a) / P(Z_n = a)."""
    from .genlaw import ratio_H
    k = t.z(h)
    base = law_restricted_gw(d, t, h)
    if base == 0.0:
        return 0.0
    if k == 0:
        return base * (1.0 if a == 0 else 0.0) / _pz(d, n, a)
    if h > n:
        raise ValueError("restriction depth must be at most n")
    if h == n:
        return base * (1.0 if k == a else 0.0) / _pz(d, n, a)
    return base * ratio_H(d, n, h, k, a)


def _pz(d, n, a):
    from .genlaw import pmf_k
    v = pmf_k(d, 1, n, a)
    if v <= 0:
        raise UnreachableTargetError(f"P(Z_{n} = {a}) = 0")
    return v


# ------------------------------------------------------------------ Kesten
def sample_kesten(d: OffspringDistribution, depth: int, rng) -> TypedTree:
    """Kesten tree: one survivor spine with size-biased offspring, extinct trees around it."""
    c = d.extinction
    if c == 0.0:
        spine_law = _Discrete(_law_array(size_biased(d, d.a_min, "c")))
    else:
        spine_law = _Discrete(_law_array(size_biased(d, 1, "c")))
    ext = _Discrete(_law_array(conjugate(d))) if c > 0 else None
    levels, types = [], ["s"]
    for g in range(depth):
        lev, nxt = [], []
        for t in types[-1]:
            if t == "s":
                if c == 0.0 and d.a_min >= 2:
                    k = d.a_min
                    lev.append(k)
                    nxt.extend("s" * k)
                    continue
                k = spine_law.draw(rng)
                pos = int(rng.integers(k))
                lev.append(k)
                nxt.extend("s" if i == pos else "e" for i in range(k))
            else:
                k = ext.draw(rng)
                lev.append(k)
                nxt.extend("e" * k)
        levels.append(lev)
        types.append("".join(nxt))
    return _typed(levels, types)


def _typed(levels, gen_types) -> TypedTree:
    tree = PlaneTree.from_levels(levels)
    # regroup types into preorder through the depth sequence
    counters = [0] * (len(gen_types) + 1)
    out = []
    for dpt in tree.depths:
        out.append(gen_types[dpt][counters[dpt]])
        counters[dpt] += 1
    return TypedTree(tree, "".join(out))


def law_restricted_kesten(d: OffspringDistribution, t: PlaneTree, h: int) -> float:
    """k c^{k-1} m^{-h} P(r_h(tau) = t) with m = f'(c), k = z_h(t)."""
    c = d.extinction
    k = t.z(h)
    if c == 0.0 and d.a_min >= 2:
        regular = all(all(x == d.a_min for x in lev) for lev in t.levels[:h]) and t.height >= h
        return 1.0 if regular else 0.0
    m = d.fprime_c
    if k == 0:
        return 0.0
    return k * c ** (k - 1) * m ** (-h) * law_restricted_gw(d, t, h)


# ------------------------------------------------------------------ tau^theta
class ThetaSampler:
    """Sampler of the tree tau^theta (W conditioned to equal theta).

    Backbone vertices of generation h draw their survivor-children counts
    jointly from rho_{mu^h theta, #S_h}; each then gets its total from the
    size-biased conjugate law and survivor slots uniformly.
    """

    def __init__(self, d: OffspringDistribution, table: NormingTable | None = None,
                 wtable: WTable | None = None):
        self.d = d
        self.table = table if table is not None else seneta_heyde(d)
        self.wtable = wtable
        self._rho: dict = {}
        self._biased: dict = {}
        self.ext = _Discrete(_law_array(conjugate(d))) if d.extinction > 0 else None

    def rho(self, theta: float, r: int) -> RhoLaw:
        key = (theta, r)
        if key not in self._rho:
            self._rho[key] = rho_law(self.d, theta, r, self.table, wtable=self.wtable)
        return self._rho[key]

    def biased(self, s: int) -> _Discrete:
        if s not in self._biased:
            self._biased[s] = _Discrete(_law_array(size_biased(self.d, s, "c")))
        return self._biased[s]

    def sample(self, theta: float, depth: int, rng, cache: bool = True) -> TypedTree:
        mu = self.d.mean
        levels, types = [], ["s"]
        for g in range(depth):
            cur = types[-1]
            r = cur.count("s")
            th = mu ** g * theta
            if r:
                law = self.rho(th, r) if cache else rho_law(self.d, th, r, self.table, wtable=self.wtable)
                svec = iter(law.sample(rng))
            lev, nxt = [], []
            for t in cur:
                if t == "s":
                    s = next(svec)
                    k = self.biased(s).draw(rng)
                    slots = _slots(k, s, rng)
                    lev.append(k)
                    nxt.extend("s" if i in slots else "e" for i in range(k))
                else:
                    k = self.ext.draw(rng)
                    lev.append(k)
                    nxt.extend("e" * k)
            levels.append(lev)
            types.append("".join(nxt))
        return _typed(levels, types)


def sample_theta(d: OffspringDistribution, theta: float, depth: int, rng,
                 sampler: ThetaSampler | None = None) -> TypedTree:
    if theta <= 0:
        raise ValueError("theta must be positive")
    if sampler is None:
        sampler = ThetaSampler(d)
    return sampler.sample(theta, depth, rng)


def law_restricted_theta(d: OffspringDistribution, theta: float, t: PlaneTree, h: int,
                         table: NormingTable | None = None) -> float:
    """P(r_h(tau^theta) = t) = P(r_h(tau) = t) mu^h w_k(mu^h theta) / w(theta)."""
    k = t.z(h)
    if k == 0:
        return 0.0
    base = law_restricted_gw(d, t, h)
    if base == 0.0:
        return 0.0
    mu = d.mean
    lr = log_w_k(d, k, mu ** h * theta, table) - log_w_conv(d, 1, theta, table)[0]
    return base * mu ** h * math.exp(lr)


def law_restricted_theta_typed(d: OffspringDistribution, theta: float, t: PlaneTree, h: int,
                               n_survivors: int, table: NormingTable | None = None) -> float:
    """P(r_h(tau^theta) = t, S_h = S) for any S with #S = n_survivors."""
    k = t.z(h)
    if not 1 <= n_survivors <= k:
        return 0.0
    mu = d.mean
    c = d.extinction
    lr = log_w_conv(d, n_survivors, mu ** h * theta, table)[0] - log_w_conv(d, 1, theta, table)[0]
    return law_restricted_gw(d, t, h) * c ** (k - n_survivors) * mu ** h * math.exp(lr)


# ------------------------------------------------------------------ T^lambda
class LambdaLaws:
    """zeta_h(lambda) and the laws built from them, cached per generation."""

    def __init__(self, d: OffspringDistribution, lam: float, table: NormingTable | None = None):
        self.d, self.lam = d, lam
        self.table = table if table is not None else seneta_heyde(d)
        self.lam_c = lambda_c(d, self.table) if lam != -math.inf else math.inf
        if lam > self.lam_c:
            raise ValueError(f"lambda={lam} exceeds lambda_c={self.lam_c}")
        self._lz: dict = {}

    @classmethod
    def critical(cls, d: OffspringDistribution, table: NormingTable | None = None) -> "LambdaLaws":
        """Laws at lambda = lambda_c, the tree tau^infinity."""
        table = table if table is not None else seneta_heyde(d)
        return cls(d, lambda_c(d, table), table)

    def log_zeta(self, h: int) -> float:
        if h not in self._lz:
            self._lz[h] = log_zeta(self.d, self.lam, h, self.table, self.lam_c)
        return self._lz[h]

    def zeta(self, h: int) -> float:
        lz = self.log_zeta(h)
        return math.exp(lz) if lz < 709 else math.inf

    def tilde(self, h: int):
        return tilde_p(self.d, self.lam, h, self.table, self.lam_c)


def _hat_law(d: OffspringDistribution, z_next: float, z_here: float, base: float) -> np.ndarray:
    """(z_next - base)^l / (z_here - base) * f^{(l)}(base) / l!, l >= 1."""
    from .density import _taylor_c
    if d.kind == FINITE:
        jmax = len(d.probs) - 1
    else:
        jmax = 400
    if base == d.extinction:
        a = _taylor_c(d, jmax)
    else:
        a = np.array([float(d.derivative(j, base)) / math.factorial(j) for j in range(jmax + 1)])
    j = np.arange(jmax + 1)
    with np.errstate(divide="ignore"):
        lw = np.log(np.maximum(a, 0.0)) + j * math.log(z_next - base) - math.log(z_here - base)
    lw[0] = -np.inf
    w = np.exp(lw)
    return w


def sample_T_lambda(d: OffspringDistribution, lam: float, depth: int, rng,
                    laws: LambdaLaws | None = None, root_children: int | None = None) -> PlaneTree:
    """Inhomogeneous GW tree with generation-h law p~_h^(lambda).

    When the root law condenses (zeta_0 infinite with infinite support),
    ``root_children`` fixes how many of its children are realised, which
    samples r_{depth, root_children}.
    """
    if laws is None:
        laws = LambdaLaws(d, lam)
    gens = {}

    def law(g):
        if g not in gens:
            p = laws.tilde(g)
            if isinstance(p, Condensation):
                raise ValueError("the root has infinitely many children; pass root_children")
            gens[g] = _Discrete(_law_array(p))
        return gens[g]

    root = laws.tilde(0)
    if isinstance(root, Condensation):
        if root_children is None:
            raise ValueError("the root has infinitely many children; pass root_children")
        levels = [[root_children]]
        z = root_children
        for g in range(1, depth):
            if z == 0:
                break
            ks = law(g).draw(rng, z)
            levels.append([int(k) for k in ks])
            z = int(ks.sum())
        return PlaneTree.from_levels(levels)
    return PlaneTree.from_levels(_grow(law, depth, rng))


def law_restricted_T_lambda(d: OffspringDistribution, lam: float, t: PlaneTree, h: int,
                            laws: LambdaLaws | None = None) -> float:
    """zeta_h^k / zeta_0 P(r_h(tau) = t); with a condensed root this is the r_{h,k0} law."""
    if laws is None:
        laws = LambdaLaws(d, lam)
    k = t.z(h)
    lz0, lzh = laws.log_zeta(0), laws.log_zeta(h)
    if lz0 == math.inf:
        if d.kind == FINITE:
            regular = all(all(x == int(d.b_max) for x in lev) for lev in t.levels[:h]) and t.height >= h
            return 1.0 if regular else 0.0
        k0 = t.levels[0][0]
        base = law_restricted_gw(d, t, h)
        if base == 0.0:
            return 0.0
        return math.exp(k * lzh - k0 * laws.log_zeta(1)) * base / d.prob(k0)
    base = law_restricted_gw(d, t, h)
    if base == 0.0:
        return 0.0
    if lzh == -math.inf:
        return (1.0 if k == 0 else 0.0) * base / math.exp(lz0) if lz0 > -math.inf else \
            _regular_indicator(d, t, h)
    return math.exp(k * lzh - lz0) * base


def _regular_indicator(d, t, h):
    return 1.0 if all(all(x == d.a_min for x in lev) for lev in t.levels[:h]) and t.height >= h else 0.0


class _TypedLambdaSampler:
    def __init__(self, d: OffspringDistribution, laws: LambdaLaws, variant: str):
        self.d, self.laws, self.variant = d, laws, variant
        self.base = d.extinction if variant == "e" else 1.0
        self.other = "e" if variant == "e" else "n"
        other_law = conjugate(d) if variant == "e" else d
        self.other_law = _Discrete(_law_array(other_law)) if variant == "n" or d.extinction > 0 else None
        self._hat: dict = {}
        self._tot: dict = {}

    def hat(self, h: int) -> _Discrete:
        if h not in self._hat:
            L = self.laws
            self._hat[h] = _Discrete(_hat_law(self.d, L.zeta(h + 1), L.zeta(h), self.base))
        return self._hat[h]

    def total(self, s: int) -> _Discrete:
        if s not in self._tot:
            at = "c" if self.variant == "e" else "one"
            self._tot[s] = _Discrete(_law_array(size_biased(self.d, s, at)))
        return self._tot[s]

    def sample(self, depth: int, rng, root_children: int | None = None) -> TypedTree:
        L = self.laws
        d = self.d
        z0 = L.zeta(0)
        if math.isinf(L.zeta(1)):
            k = int(d.b_max)
            levels = [[k] * (k ** g) for g in range(depth)]
            types = ["s" * (k ** g) for g in range(depth + 1)]
            return _typed(levels, types)
        if math.isinf(z0):
            if root_children is None:
                raise ValueError("the root has infinitely many children; pass root_children")
            z1 = L.zeta(1)
            ps = (z1 - self.base) / z1
            kids = "".join("s" if u < ps else self.other for u in rng.random(root_children))
            levels, types = [[root_children]], ["s", kids]
            start = 1
        else:
            root = "s" if rng.random() < (z0 - self.base) / z0 else self.other
            levels, types = [], [root]
            start = 0
        for g in range(start, depth):
            lev, nxt = [], []
            for t in types[-1]:
                if t == "s":
                    s = self.hat(g).draw(rng)
                    k = self.total(s).draw(rng)
                    slots = _slots(k, s, rng)
                    lev.append(k)
                    nxt.extend("s" if i in slots else self.other for i in range(k))
                else:
                    k = self.other_law.draw(rng)
                    lev.append(k)
                    nxt.extend(self.other * k)
            levels.append(lev)
            types.append("".join(nxt))
        return _typed(levels, types)


def sample_T_lambda_e(d: OffspringDistribution, lam: float, depth: int, rng,
                      laws: LambdaLaws | None = None, root_children: int | None = None,
                      sampler=None) -> TypedTree:
    """Two-type version: survivors carry tilted offspring, extinct vertices the conjugate law."""
    if lam == -math.inf:
        raise ValueError("the two-type construction needs lambda > -inf")
    if sampler is None:
        sampler = _TypedLambdaSampler(d, laws or LambdaLaws(d, lam), "e")
    return sampler.sample(depth, rng, root_children)


def sample_T_lambda_n(d: OffspringDistribution, lam: float, depth: int, rng,
                      laws: LambdaLaws | None = None, root_children: int | None = None,
                      sampler=None) -> TypedTree:
    """Two-type version with unconditioned GW trees grafted on the backbone (lambda > 0)."""
    if not lam > 0:
        raise ValueError("the normal-vertex construction needs lambda > 0")
    if sampler is None:
        sampler = _TypedLambdaSampler(d, laws or LambdaLaws(d, lam), "n")
    return sampler.sample(depth, rng, root_children)


def typed_lambda_sampler(d: OffspringDistribution, laws: LambdaLaws, variant: str = "e"):
    if variant not in ("e", "n"):
        raise ValueError("variant must be 'e' or 'n'")
    return _TypedLambdaSampler(d, laws, variant)


def law_restricted_T_lambda_survival(d: OffspringDistribution, lam: float, t: PlaneTree, h: int,
                                     laws: LambdaLaws | None = None) -> float:
    """Law of r_h(T^(lambda)) given non-extinction: P (zeta_h^k - c^k) / (zeta_0 - c)."""
    if laws is None:
        laws = LambdaLaws(d, lam)
    k = t.z(h)
    if k == 0:
        return 0.0
    c = d.extinction
    base = law_restricted_gw(d, t, h)
    return base * (laws.zeta(h) ** k - c ** k) / (laws.zeta(0) - c)


# ------------------------------------------------------------------ mixture
class ThetaMixture:
    """Theta_lambda with density w(theta) e^{lambda theta} / (zeta_0 - c), by inverse CDF."""

    def __init__(self, d: OffspringDistribution, lam: float, wtable: WTable,
                 theta_max: float, n: int = 4000, laws: LambdaLaws | None = None):
        self.d, self.lam = d, lam
        laws = laws or LambdaLaws(d, lam, wtable.table)
        self.theta = np.concatenate([[0.0], np.geomspace(wtable.xs[0], theta_max, n)])
        logg = np.array([wtable.log_w(1, x) for x in self.theta[1:]]) + lam * self.theta[1:]
        g = np.concatenate([[0.0], np.exp(logg)])
        # power-law start on (0, first point]
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(self.theta))])
        self.norm_check = cdf[-1] / (laws.zeta(0) - d.extinction)
        self.cdf = cdf / cdf[-1]

    def draw(self, rng) -> float:
        return float(np.interp(rng.random(), self.cdf, self.theta))


# ------------------------------------------------------------------ enumeration
def enumerate_trees(degrees, h: int, max_vertices: int = 10_000):
    """All trees r_h(t) whose vertices of depth < h have out-degree in ``degrees``."""
    degrees = sorted(set(int(k) for k in degrees))

    def rec(levels, z, g):
        if g == h or z == 0:
            yield PlaneTree.from_levels(levels)
            return
        for combo in _tuples(degrees, z):
            nz = sum(combo)
            if nz > max_vertices:
                continue
            yield from rec(levels + [list(combo)], nz, g + 1)

    yield from rec([], 1, 0)


def _tuples(degrees, z):
    if z == 0:
        yield ()
        return
    for k in degrees:
        for rest in _tuples(degrees, z - 1):
            yield (k,) + rest
