"""Offspring distributions and their generating-function algebra.

An :class:`OffspringDistribution` is either an explicit finite law, a
geometric law (zero with probability ``1 - eta``, otherwise ``1 +
Geom(q)``), or a truncated infinite law.  Every distribution caches the
quantities the rest of the package keeps asking for: mean, extinction
probability, support bounds, Schroeder exponent and lattice type.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from typing import Mapping, Sequence

import numpy as np

FINITE = "explicit-finite"
GEOMETRIC = "geometric"
TRUNCATED = "general-truncated"

_TRUNC_TAIL = 1e-17


class OffspringError(ValueError):
    """Raised for invalid laws or impossible transforms."""


class NoRootError(OffspringError):
    """No fixed point of the generating function above 1."""


class UndefinedBiasError(OffspringError):
    """The biasing derivative vanishes."""


def _to_fraction(x) -> Fraction | None:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    return None


@dataclass(frozen=True, eq=True)
class OffspringDistribution:
    """Law of the number of children of a vertex.

    ``probs[k]`` is p(k) for the stored support.  For the geometric kind
    ``probs`` is a truncation (tail mass below 1e-17) used only by array
    code; generating functions and derivatives use closed forms.
    """

    probs: tuple
    kind: str = FINITE
    eta: float | None = None
    q: float | None = None
    truncation_tail: float = 0.0
    exact: tuple | None = field(default=None, compare=False)

    # ------------------------------------------------------------ builders
    @classmethod
    def finite(cls, weights: Mapping[int, object] | Sequence) -> "OffspringDistribution":
        if isinstance(weights, Mapping):
            items = dict(weights)
        else:
            items = dict(enumerate(weights))
        if not items:
            raise OffspringError("empty offspring law")
        kmax = max(items)
        if min(items) < 0:
            raise OffspringError("negative offspring count")
        fr = [Fraction(0)] * (kmax + 1)
        exact_ok = True
        fl = [0.0] * (kmax + 1)
        for k, v in items.items():
            f = _to_fraction(v)
            if f is None:
                exact_ok = False
                fl[k] = float(v)
            else:
                fr[k] = f
                fl[k] = float(f)
        if any(x < 0 for x in fl):
            raise OffspringError("negative probability")
        total = math.fsum(fl)
        if abs(total - 1.0) > 1e-12:
            raise OffspringError(f"weights sum to {total!r}, not 1")
        while len(fl) > 1 and fl[-1] == 0.0:
            fl.pop()
            fr.pop()
        d = cls(probs=tuple(fl), kind=FINITE,
                exact=tuple(fr) if exact_ok and sum(fr) == 1 else None)
        d._check_nondegenerate()
        return d

    @classmethod
    def geometric(cls, eta: float, q: float) -> "OffspringDistribution":
        """p(0) = 1 - eta and p(k) = eta q (1-q)^(k-1) for k >= 1."""
        if not (0.0 < eta <= 1.0 and 0.0 < q <= 1.0):
            raise OffspringError("geometric parameters must lie in (0, 1]")
        probs = [1.0 - eta]
        k = 1
        while True:
            pk = eta * q * (1.0 - q) ** (k - 1)
            probs.append(pk)
            tail = eta * (1.0 - q) ** k
            if tail < _TRUNC_TAIL or q == 1.0:
                break
            k += 1
        d = cls(probs=tuple(probs), kind=GEOMETRIC, eta=float(eta), q=float(q),
                truncation_tail=float(eta * (1.0 - q) ** k))
        d._check_nondegenerate()
        return d

    @classmethod
    def truncated(cls, weights: Sequence[float], tail: float) -> "OffspringDistribution":
        """Infinite-support law stored up to a remaining tail mass."""
        d = cls(probs=tuple(float(x) for x in weights), kind=TRUNCATED,
                truncation_tail=float(tail))
        if abs(math.fsum(d.probs) + tail - 1.0) > 1e-12:
            raise OffspringError("weights plus tail must sum to 1")
        d._check_nondegenerate()
        return d

    @classmethod
    def parse(cls, text: str) -> "OffspringDistribution":
        """Parse ``geometric:eta,q`` or ``k:prob,k:prob,...``."""
        text = text.strip()
        if text.startswith("geometric:"):
            parts = text[len("geometric:"):].split(",")
            if len(parts) != 2:
                raise OffspringError("expected geometric:eta,q")
            eta, q = (float(Fraction(p.strip())) for p in parts)
            return cls.geometric(eta, q)
        weights: dict[int, object] = {}
        for item in text.split(","):
            if ":" not in item:
                raise OffspringError(f"bad item {item!r}, expected k:prob")
            k, v = item.split(":", 1)
            k = int(k)
            if k in weights:
                raise OffspringError(f"duplicate offspring count {k}")
            try:
                weights[k] = Fraction(v.strip())
            except (ValueError, ZeroDivisionError):
                raise OffspringError(f"bad probability {v!r}") from None
        return cls.finite(weights)

    def describe(self) -> str:
        if self.kind == GEOMETRIC:
            return f"geometric:{self.eta!r},{self.q!r}"
        return ",".join(f"{k}:{p!r}" for k, p in enumerate(self.probs) if p > 0)

    def _check_nondegenerate(self) -> None:
        if sum(1 for p in self.probs if p > 0) < 2 and self.truncation_tail == 0:
            raise OffspringError("degenerate law: need at least two support points")

    # ------------------------------------------------------------ basics
    @cached_property
    def p(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    @property
    def support(self) -> list[int]:
        return [k for k, v in enumerate(self.probs) if v > 0]

    @property
    def a_min(self) -> int:
        return self.support[0]

    @property
    def b_max(self) -> float:
        if self.kind == FINITE:
            return self.support[-1]
        return math.inf

    @property
    def finite_support(self) -> bool:
        return self.kind == FINITE

    @cached_property
    def mean(self) -> float:
        if self.kind == GEOMETRIC:
            return self.eta / self.q
        return math.fsum(k * v for k, v in enumerate(self.probs))

    @cached_property
    def radius(self) -> float:
        """Radius of convergence R_c of the generating function."""
        if self.kind == GEOMETRIC:
            return math.inf if self.q == 1.0 else 1.0 / (1.0 - self.q)
        if self.kind == TRUNCATED:
            return 1.0
        return math.inf

    def prob(self, k: int) -> float:
        if self.kind == GEOMETRIC:
            if k == 0:
                return 1.0 - self.eta
            return self.eta * self.q * (1.0 - self.q) ** (k - 1)
        return self.probs[k] if 0 <= k < len(self.probs) else 0.0

    # ------------------------------------------------------------ pgf
    def pgf(self, s):
        """f(s), vectorised over numpy arrays, real or complex."""
        s = np.asarray(s)
        if self.kind == GEOMETRIC:
            eta, q = self.eta, self.q
            return ((1.0 - eta) - s * (1.0 - q - eta)) / (1.0 - s * (1.0 - q))
        out = np.zeros_like(s, dtype=np.result_type(s, float))
        for pk in reversed(self.probs):
            out = out * s + pk
        return out

    def derivative(self, order: int, x):
        """f^(order)(x); for x in [0, 1] the series always converges."""
        if order < 0:
            raise ValueError("order must be >= 0")
        if order == 0:
            return self.pgf(x)
        x = np.asarray(x, dtype=float) if not np.iscomplexobj(x) else np.asarray(x)
        if self.kind == GEOMETRIC:
            rho = 1.0 - self.q
            beta0 = self.eta * self.q / rho if rho > 0 else 0.0
            if rho == 0:
                return np.zeros_like(x) + (self.eta if order == 1 else 0.0)
            return beta0 * math.factorial(order) * rho ** order / (1.0 - rho * x) ** (order + 1)
        out = np.zeros_like(x, dtype=np.result_type(x, float))
        for k in range(len(self.probs) - 1, order - 1, -1):
            out = out * x + self.probs[k] * math.perm(k, order)
        return out

    def iterate(self, n: int, z):
        """f_n(z), the n-th functional iterate (f_0 is the identity)."""
        if n < 0:
            raise ValueError("n must be >= 0")
        z = np.asarray(z)
        for _ in range(n):
            if np.isrealobj(z) and np.any(z > self.radius):
                raise OffspringError("divergence: argument beyond the radius of convergence")
            z = self.pgf(z)
            if not np.all(np.isfinite(z)):
                raise OffspringError("divergence: iterate overflowed")
        return z

    def taylor_at(self, x: float, order: int) -> np.ndarray:
        """Coefficients f^(j)(x)/j!, j = 0..order."""
        return np.array([float(self.derivative(j, x)) / math.factorial(j)
                         for j in range(order + 1)])

    # ------------------------------------------------------------ constants
    @cached_property
    def extinction(self) -> float:
        """Smallest root of f(s) = s in [0, 1]."""
        return extinction_prob(self)

    @cached_property
    def fprime_c(self) -> float:
        return float(self.derivative(1, self.extinction))

    @cached_property
    def alpha(self) -> float:
        """Schroeder exponent: f'(c) = mu^(-alpha); infinite when f'(c) = 0."""
        m = self.fprime_c
        if m == 0.0:
            return math.inf
        return -math.log(m) / math.log(self.mean)

    @cached_property
    def beta_harris(self) -> float:
        """b_max = mu^beta; infinite for unbounded support."""
        return math.log(self.b_max) / math.log(self.mean)

    @cached_property
    def beta_boettcher(self) -> float:
        """a_min = mu^beta; only defined when a_min >= 2."""
        if self.a_min < 2:
            raise OffspringError("the Boettcher exponent needs a_min >= 2")
        return math.log(self.a_min) / math.log(self.mean)

    @cached_property
    def period(self) -> tuple[int, int]:
        return period_type(self)

    def sample(self, rng: np.random.Generator, size=None):
        """Draw offspring counts."""
        if self.kind == GEOMETRIC:
            n = 1 if size is None else size
            alive = rng.random(n) < self.eta
            out = np.where(alive, rng.geometric(self.q, n), 0)
            return int(out[0]) if size is None else out
        return rng.choice(len(self.probs), size=size, p=self._normed)

    @cached_property
    def _normed(self) -> np.ndarray:
        p = self.p.copy()
        return p / p.sum()


# ---------------------------------------------------------------- operations
def pgf_iterate(d: OffspringDistribution, n: int, z):
    return d.iterate(n, z)


def derivative_at(d: OffspringDistribution, order: int, x):
    return d.derivative(order, x)


def _bisect_newton(g, dg, lo, hi, tol=1e-15):
    glo = g(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
        if hi - lo < 1e-9 * max(1.0, abs(lo)):
            break
    x = 0.5 * (lo + hi)
    for _ in range(50):
        step = g(x) / dg(x)
        x_new = x - step
        if not lo - 1e-9 <= x_new <= hi + 1e-9:
            break
        x = x_new
        if abs(step) <= tol * max(1.0, abs(x)):
            break
    return x


def extinction_prob(d: OffspringDistribution) -> float:
    """Extinction probability; exactly 0 when p(0) = 0, 1 when mu <= 1."""
    if d.prob(0) == 0.0:
        return 0.0
    if d.mean <= 1.0:
        return 1.0
    if d.kind == GEOMETRIC:
        return (1.0 - d.eta) / (1.0 - d.q)
    g = lambda s: float(d.pgf(s)) - s
    dg = lambda s: float(d.derivative(1, s)) - 1.0
    return _bisect_newton(g, dg, 0.0, 1.0 - 1e-12)


def period_type(d: OffspringDistribution) -> tuple[int, int]:
    """(L0, r0): lattice span of the support and residue of its points."""
    if d.kind != FINITE:
        return (1, 0)
    sup = d.support
    L0 = reduce(math.gcd, (k - sup[0] for k in sup[1:]), 0)
    return (L0, sup[0] % L0)


def conjugate(d: OffspringDistribution) -> OffspringDistribution:
    """Law of the offspring number on the extinction event, c^(n-1) p(n)."""
    c = d.extinction
    if c == 0.0:
        return dirac(d.a_min)
    if d.kind == GEOMETRIC:
        return OffspringDistribution.geometric(d.q, d.eta)
    w = {k: c ** (k - 1) * pk for k, pk in enumerate(d.probs) if pk > 0}
    tot = math.fsum(w.values())
    return OffspringDistribution.finite({k: v / tot for k, v in w.items()}) \
        if d.kind == FINITE else OffspringDistribution.truncated(
            [c ** (k - 1) * pk for k, pk in enumerate(d.probs)], 0.0)


def dirac(k: int) -> OffspringDistribution:
    """Point mass, built without the non-degeneracy check."""
    probs = [0.0] * (k + 1)
    probs[k] = 1.0
    fr = [Fraction(0)] * (k + 1)
    fr[k] = Fraction(1)
    return OffspringDistribution(probs=tuple(probs), kind=FINITE, exact=tuple(fr))


def size_biased(d: OffspringDistribution, order: int, at: str = "one") -> OffspringDistribution:
    """Order-``order`` size-biased law, biased at 1 (``at='one'``) or at c.

    Weight of n is C(n, l) l! x^(n-l) p(n) / f^(l)(x) with x = 1 or x = c.
    At c = 0 this is the point mass at ``order``.
    """
    if at not in ("one", "c"):
        raise ValueError("at must be 'one' or 'c'")
    x = 1.0 if at == "one" else d.extinction
    if x == 0.0:
        if d.prob(order) <= 0:
            raise UndefinedBiasError(f"p({order}) = 0")
        return dirac(order)
    norm = float(d.derivative(order, x))
    if norm <= 0:
        raise UndefinedBiasError(f"f^({order}) vanishes at {x}")
    w = [0.0] * len(d.probs)
    for n, pn in enumerate(d.probs):
        if n >= order and pn > 0:
            w[n] = math.perm(n, order) * x ** (n - order) * pn / norm
    if d.kind == FINITE:
        res = {k: v for k, v in enumerate(w) if v > 0}
        if len(res) == 1:
            return dirac(next(iter(res)))
        tot = math.fsum(res.values())
        return OffspringDistribution.finite({k: v / tot for k, v in res.items()})
    return OffspringDistribution.truncated(w, max(0.0, 1.0 - math.fsum(w)))


def subcritical_lift(d: OffspringDistribution) -> tuple[float, OffspringDistribution]:
    """Fixed point kappa > 1 of f and the supercritical law kappa^(n-1) p(n)."""
    if d.mean >= 1.0:
        raise OffspringError("subcritical_lift needs mean < 1")
    if d.kind == GEOMETRIC:
        eta, q = d.eta, d.q
        # f(s) = s  <=>  (1-q) s^2 - (2 - q - eta) s + (1 - eta) = 0, roots 1 and kappa
        if q == 1.0:
            raise NoRootError("linear generating function has no fixed point above 1")
        kappa = (1.0 - eta) / (1.0 - q)
        if not (1.0 < kappa < d.radius):
            raise NoRootError("no fixed point of f in (1, R_c)")
        return kappa, OffspringDistribution.geometric(1.0 - (1.0 - eta) / kappa,
                                                      1.0 - kappa * (1.0 - q))
    if d.kind != FINITE:
        raise NoRootError("lift needs a finite or geometric law")
    if len(d.probs) <= 2:
        raise NoRootError("linear generating function has no fixed point above 1")
    g = lambda s: float(d.pgf(s)) - s
    dg = lambda s: float(d.derivative(1, s)) - 1.0
    hi = 2.0
    while g(hi) <= 0:
        hi *= 2.0
        if hi > 1e12:
            raise NoRootError("no fixed point of f above 1")
    # f(s) - s is negative just above 1 (f'(1) < 1) and convex
    kappa = _bisect_newton(g, dg, 1.0 + 1e-12, hi)
    lifted = {k: kappa ** (k - 1) * pk for k, pk in enumerate(d.probs) if pk > 0}
    tot = math.fsum(lifted.values())
    return kappa, OffspringDistribution.finite({k: v / tot for k, v in lifted.items()})


def fixtures() -> dict[str, OffspringDistribution]:
    """The three reference laws used by tests and examples."""
    return {
        "B": OffspringDistribution.parse("0:1/4,2:3/4"),
        "C": OffspringDistribution.parse("2:1/2,3:1/2"),
        "G": OffspringDistribution.geometric(0.75, 0.5),
    }
