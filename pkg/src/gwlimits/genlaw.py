"""Exact laws of generation sizes.

P_k(Z_n = a) is the coefficient of s^a in f_n(s)^k.  Coefficients are
built by composing truncated power series: truncating at ``cap`` never
changes the coefficients of index <= cap.

Deep targets (say P(Z_14 = 2^14 - 2) for binary-type laws, around
10^-2000) underflow in plain doubles, so the series can be tilted: the
array stores the law of Z_n under the measure weighted by t^{Z_n}, which
is again a probability vector, together with log f_n(t) and log t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .offspring import FINITE, GEOMETRIC, OffspringDistribution

MAX_CAP = 1 << 20


class CapOverflowError(MemoryError):
    pass


class UnreachableTargetError(ValueError):
    """P(Z_n = a) = 0."""


@dataclass(frozen=True)
class GenerationLaw:
    """Law of Z_n from one ancestor, truncated at ``cap``.

    ``pmf[a] * exp(log_norm - a * log_tilt)`` is P(Z_n = a).  With no tilt
    (``log_tilt == 0``) ``pmf`` is the law itself.
    """

    n: int
    pmf: np.ndarray
    tail_mass: float
    log_tilt: float = 0.0
    log_norm: float = 0.0
    exact: bool = False
    rational: tuple | None = None

    @property
    def cap(self) -> int:
        return len(self.pmf) - 1

    def log_prob(self, a: int) -> float:
        if a < 0 or a > self.cap or self.pmf[a] <= 0:
            return -math.inf
        return math.log(self.pmf[a]) + self.log_norm - a * self.log_tilt

    def prob(self, a: int) -> float:
        if self.rational is not None:
            return float(self.rational[a]) if a <= self.cap else 0.0
        return math.exp(self.log_prob(a))

    def probs(self) -> np.ndarray:
        if self.log_tilt == 0.0 and self.log_norm == 0.0:
            return self.pmf.copy()
        a = np.arange(len(self.pmf))
        with np.errstate(divide="ignore"):
            return np.exp(np.log(self.pmf) + self.log_norm - a * self.log_tilt)


# ------------------------------------------------------------------ series
def _mul(a: np.ndarray, b: np.ndarray, cap: int) -> np.ndarray:
    return np.convolve(a[: cap + 1], b[: cap + 1])[: cap + 1]


def _compose(d: OffspringDistribution, weights: np.ndarray, q: np.ndarray, cap: int) -> np.ndarray:
    """sum_m weights[m] q^m truncated at cap (Horner)."""
    out = np.zeros(1)
    for wm in weights[::-1]:
        out = _mul(out, q, cap)
        if len(out) == 0:
            out = np.zeros(1)
        out[0] += wm
    res = np.zeros(min(cap + 1, max(len(out), 1)))
    res[: len(out)] = out[: len(res)]
    return res


def _compose_geometric(d: OffspringDistribution, scale: float, q: np.ndarray, cap: int,
                       norm: float) -> np.ndarray:
    """Closed form alpha0 + beta0 / (1 - rho q) with rho scaled by ``scale``."""
    rho = (1.0 - d.q) * scale
    alpha0 = (1.0 - d.q - d.eta) / (1.0 - d.q)
    beta0 = d.eta * d.q / (1.0 - d.q)
    # coefficients of 1 / (1 - rho q), by the triangular recurrence
    qq = np.zeros(cap + 1)
    qq[: min(len(q), cap + 1)] = q[: cap + 1]
    den = -rho * qq
    den[0] += 1.0
    inv = np.zeros(cap + 1)
    inv[0] = 1.0 / den[0]
    for i in range(1, cap + 1):
        inv[i] = -np.dot(den[1 : i + 1], inv[i - 1 :: -1][:i]) / den[0]
    out = beta0 * inv
    out[0] += alpha0
    return out / norm


def _log_f(d: OffspringDistribution, L: float) -> float:
    """log f(e^L), stable for large |L| (finite support) ."""
    if d.kind == GEOMETRIC:
        s = math.exp(L)
        if s >= d.radius:
            raise ValueError(f"tilt outside the domain of f: e^L = {s} >= {d.radius}")
        return math.log(float(d.pgf(s)))
    ks = np.array(d.support, dtype=float)
    lp = np.log(d.p[d.support]) + ks * L
    m = lp.max()
    return float(m + math.log(np.exp(lp - m).sum()))


def _log_f_iterates(d: OffspringDistribution, n: int, log_t: float) -> list[float]:
    out = [log_t]
    for _ in range(n):
        out.append(_log_f(d, out[-1]))
    return out


def generation_law(d: OffspringDistribution, n: int, cap: int | None = None, *,
                   exact: bool = False, log_tilt: float = 0.0) -> GenerationLaw:
    """Law of Z_n started from one ancestor, entries a = 0..cap."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if cap is None:
        if d.kind != FINITE:
            raise ValueError("cap is required for infinite support")
        cap = int(d.b_max) ** n
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if cap > MAX_CAP:
        raise CapOverflowError(f"cap {cap} exceeds the budget {MAX_CAP}")
    is_exact = d.kind == FINITE and cap >= d.b_max ** n
    if exact:
        return _generation_law_rational(d, n, cap)
    logs = _log_f_iterates(d, n, log_tilt)
    if log_tilt == 0.0:
        logs = [0.0] * (n + 1)
    # q holds the tilted law of Z_k: coefficients of f_k(t s) / f_k(t)
    q = np.zeros(min(cap, 1) + 1)
    q[1] = 1.0
    for k in range(n):
        LT = logs[k]           # log f_k(t)
        Lnext = logs[k + 1]    # log f_{k+1}(t)
        if d.kind == GEOMETRIC:
            q = _compose_geometric(d, math.exp(LT), q, cap, math.exp(Lnext) if log_tilt else 1.0)
        else:
            ks = np.arange(len(d.probs))
            with np.errstate(divide="ignore"):
                lw = np.log(d.p) + ks * LT - Lnext
            w = np.exp(lw)
            q = _compose(d, w, q, cap)
    q = np.maximum(q, 0.0)
    tail = max(0.0, 1.0 - math.fsum(q))
    return GenerationLaw(n=n, pmf=q, tail_mass=tail, log_tilt=log_tilt,
                         log_norm=logs[n] if log_tilt else 0.0, exact=is_exact)


def _generation_law_rational(d: OffspringDistribution, n: int, cap: int) -> GenerationLaw:
    if d.exact is None:
        raise ValueError("rational mode needs a finite law with rational weights")
    p = d.exact
    q = [Fraction(0), Fraction(1)]

    def mul(a, b):
        out = [Fraction(0)] * min(len(a) + len(b) - 1, cap + 1)
        for i, ai in enumerate(a):
            if ai == 0:
                continue
            for j, bj in enumerate(b[: cap + 1 - i]):
                out[i + j] += ai * bj
        return out

    for _ in range(n):
        out = [Fraction(0)]
        for pm in reversed(p):
            out = mul(out, q)
            out[0] += pm
        q = out
    q = q[: cap + 1] + [Fraction(0)] * (cap + 1 - len(q))
    tail = 1 - sum(q)
    return GenerationLaw(n=n, pmf=np.array([float(x) for x in q]), tail_mass=float(tail),
                         exact=d.b_max ** n <= cap, rational=tuple(q))


# ------------------------------------------------------------------ tilts
def saddle_tilt(d: OffspringDistribution, k: int, n: int, a: int) -> float:
    """log t such that the t-tilted mean of Z_n from k ancestors equals a.

    This keeps the target coefficient near the centre of the tilted law,
    so it never underflows.  Returns 0 when no tilt is needed.
    """
    if a == 0 or n == 0:
        return 0.0

    def tilted_mean(L):
        # d/dL log f_n(e^L) by the chain rule through the iterates
        Ls = _log_f_iterates(d, n, L)
        g = 1.0
        for Lk in Ls[:-1]:
            g *= _dlog_f(d, Lk)
        return k * g

    target = float(a)
    lo = -1.0
    while _safe_mean(tilted_mean, lo) > target and lo > -1400.0:
        lo *= 2.0
    hi = 1.0
    while _safe_mean(tilted_mean, hi) < target and hi < 1400.0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _safe_mean(tilted_mean, mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, abs(lo)):
            break
    return 0.5 * (lo + hi)


def _safe_mean(fn, L):
    try:
        v = fn(L)
    except (OverflowError, ValueError, ZeroDivisionError):
        return math.inf
    return v if math.isfinite(v) else math.inf


def _dlog_f(d: OffspringDistribution, L: float) -> float:
    """d/dL log f(e^L) = e^L f'(e^L) / f(e^L)."""
    if d.kind == GEOMETRIC:
        s = math.exp(L)
        return s * float(d.derivative(1, s)) / float(d.pgf(s))
    ks = np.array(d.support, dtype=float)
    lp = np.log(d.p[d.support]) + ks * L
    w = np.exp(lp - lp.max())
    return float((ks * w).sum() / w.sum())


# ------------------------------------------------------------------ pmf_k
def _power(q: np.ndarray, k: int, cap: int) -> np.ndarray:
    res = np.zeros(cap + 1)
    res[0] = 1.0
    base = q[: cap + 1].copy()
    while k:
        if k & 1:
            res = _mul(res, base, cap)
        k >>= 1
        if k:
            base = _mul(base, base, cap)
    out = np.zeros(cap + 1)
    out[: len(res)] = res
    return out


def log_pmf_k(d: OffspringDistribution, k: int, n: int, a: int) -> float:
    """log P_k(Z_n = a), tilted so that deep targets do not underflow."""
    if k < 1 or n < 0 or a < 0:
        raise ValueError("need k >= 1, n >= 0, a >= 0")
    if n == 0:
        return 0.0 if a == k else -math.inf
    if a == 0:
        f0 = float(d.iterate(n, 0.0))
        return k * math.log(f0) if f0 > 0 else -math.inf
    if not reachability(d, k, n, a):
        return -math.inf
    L = saddle_tilt(d, k, n, a)
    law = generation_law(d, n, cap=max(a, 1), log_tilt=L)
    c = _power(law.pmf, k, a)[a]
    if c <= 0:
        return -math.inf
    return math.log(c) + k * law.log_norm - a * law.log_tilt


def pmf_k(d: OffspringDistribution, k: int, n: int, a: int, *, exact: bool = False):
    """P_k(Z_n = a) = P(Z_n^(1) + ... + Z_n^(k) = a)."""
    if exact:
        law = _generation_law_rational(d, n, max(a, 1))
        q = list(law.rational)
        res = [Fraction(1)] + [Fraction(0)] * a
        for _ in range(k):
            new = [Fraction(0)] * (a + 1)
            for i, ri in enumerate(res):
                if ri:
                    for j in range(a + 1 - i):
                        if q[j]:
                            new[i + j] += ri * q[j]
            res = new
        return res[a]
    return math.exp(log_pmf_k(d, k, n, a))


def ratio_H(d: OffspringDistribution, n: int, h: int, k: int, a: int, *, exact: bool = False):
    """H_n(h, k) = P_k(Z_{n-h} = a) / P(Z_n = a)."""
    if not 1 <= h < n + 1:
        raise ValueError("need 1 <= h <= n")
    if exact:
        den = pmf_k(d, 1, n, a, exact=True)
        if den == 0:
            raise UnreachableTargetError(f"P(Z_{n} = {a}) = 0")
        return pmf_k(d, k, n - h, a, exact=True) / den
    den = log_pmf_k(d, 1, n, a)
    if den == -math.inf:
        raise UnreachableTargetError(f"P(Z_{n} = {a}) = 0")
    num = log_pmf_k(d, k, n - h, a)
    return 0.0 if num == -math.inf else math.exp(num - den)


# ------------------------------------------------------------------ reachability
def reachability(d: OffspringDistribution, k: int, n: int, a: int) -> bool:
    """Congruence and range test for P_k(Z_n = a) > 0.

    Necessary in general; for the range only the crude bounds k a^n <= a <=
    k b^n are used, see :func:`reachability_detail` for the uncertain band.
    """
    return reachability_detail(d, k, n, a)[0]


def reachability_detail(d: OffspringDistribution, k: int, n: int, a: int) -> tuple[bool, bool]:
    """(passes, range_uncertain).

    ``range_uncertain`` is set when a is within one lattice step of the
    extreme values, where the exact support may have gaps.
    """
    if a < 0:
        return (False, False)
    if n == 0:
        return (a == k, False)
    L0, r0 = d.period
    if a > 0 and (a - k * pow(r0, n, L0)) % L0 != 0:
        return (False, False)
    lo = k * d.a_min ** n
    hi = k * d.b_max ** n
    if a < lo or a > hi:
        return (False, False)
    if a == 0:
        return (d.prob(0) > 0, False)
    uncertain = (a - lo < L0 and a != lo) or (hi - a < L0 and a != hi)
    return (True, uncertain)
