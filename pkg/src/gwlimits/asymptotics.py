"""Boettcher and Harris asymptotics: b, b~, psi, psi~, the rate functions
M, M~, tail approximations of w and saddle-point approximations of
P_l(Z_n = a).

All of b, b~, psi, psi~ and the finite-n psi_j reduce to the same object:
iterate L -> log f(e^L) from some starting log-value and read off
K^{-N} (L_N + log p(K) / (K - 1)) once e^{L_N} is far from 1, where K is
the extreme point of the support (max for Harris, min for Boettcher).
The neglected correction is of order K^{-N} e^{-|L_N|}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .density import log_w_conv
from .genlaw import log_pmf_k
from .norming import NormingTable, _log_moments, phi_eval, phi_tilde, seneta_heyde
from .offspring import FINITE, OffspringDistribution

HARRIS = "harris"
BOETTCHER = "boettcher"
_STOP = 40.0          # |L_N| beyond which the series remainder is below 1e-17
_MAX_ITER = 5000


class RegimeError(ValueError):
    pass


class SaddleNotFoundError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SeriesValue:
    value: float
    d1: float
    d2: float
    terms: int
    tail_bound: float


def _extreme(d: OffspringDistribution, side: str) -> tuple[int, float]:
    if side == HARRIS:
        if d.kind != FINITE:
            raise RegimeError("the Harris case needs a bounded offspring support")
        K = int(d.b_max)
    else:
        K = d.a_min
        if K < 2:
            raise RegimeError("the Boettcher case needs a minimal offspring number >= 2")
    return K, math.log(d.prob(K))


def _tail_iterate(d: OffspringDistribution, side: str, L0, dL0, d2L0, N: int | None = None) -> SeriesValue:
    K, logpK = _extreme(d, side)
    L = np.atleast_1d(np.asarray(L0, dtype=float))
    dL, d2L = float(dL0), float(d2L0)
    n = 0
    while True:
        done = (L[0] > _STOP) if side == HARRIS else (L[0] < -_STOP)
        if (N is None and done) or (N is not None and n >= N):
            break
        if n >= _MAX_ITER:
            raise ArithmeticError("series did not reach its asymptotic range")
        H, m1, var = _log_moments(d, L)
        d2L = float(var[0]) * dL * dL + float(m1[0]) * d2L
        dL = float(m1[0]) * dL
        L = np.asarray(H, dtype=float)
        n += 1
    scale = float(K) ** (-n)
    value = scale * (float(L[0]) + logpK / (K - 1))
    bound = scale * math.exp(-abs(float(L[0]))) / (K - 1) * (1.0 / min(d.p[d.p > 0]))
    return SeriesValue(value, scale * dL, scale * d2L, n, bound)


# ------------------------------------------------------------------ b, b~
def harris_b_full(d: OffspringDistribution, s: float, N: int | None = None) -> SeriesValue:
    if not s > 1.0:
        raise RegimeError("b~ is defined on (1, inf)")
    return _tail_iterate(d, HARRIS, math.log(s), 1.0 / s, -1.0 / (s * s), N)


def harris_b(d: OffspringDistribution, s: float, N: int | None = None) -> float:
    """b~(s) = log s + sum_n b^{-n-1} log(f_{n+1}(s) / f_n(s)^b)."""
    return harris_b_full(d, s, N).value


def boettcher_b_full(d: OffspringDistribution, s: float, N: int | None = None) -> SeriesValue:
    if not 0.0 < s < 1.0:
        raise RegimeError("b is defined on (0, 1)")
    return _tail_iterate(d, BOETTCHER, math.log(s), 1.0 / s, -1.0 / (s * s), N)


def boettcher_b(d: OffspringDistribution, s: float, N: int | None = None) -> float:
    """b(s) = log s + sum_n a^{-n-1} log(f_{n+1}(s) / f_n(s)^a)."""
    return boettcher_b_full(d, s, N).value


# ------------------------------------------------------------------ psi
class RateFunction:
    """psi~ = b~ o E e^{uW} (Harris) or psi = b o E e^{-uW} (Boettcher).

    ``psi(u)`` returns a SeriesValue whose d1/d2 are derivatives in u.
    ``psi_j(j, u)`` is the finite-generation analog built from Z_j / c_j.
    """

    def __init__(self, d: OffspringDistribution, side: str, table: NormingTable | None = None):
        _extreme(d, side)
        self.d, self.side = d, side
        self.table = table if table is not None else seneta_heyde(d)
        self.K = _extreme(d, side)[0]
        self.mu = d.mean
        self.beta = math.log(self.K) / math.log(self.mu)

    def psi(self, u: float) -> SeriesValue:
        if not u > 0:
            raise RegimeError("psi is defined for u > 0")
        if self.side == HARRIS:
            pv = phi_tilde(self.table, np.array([u]), second=True)
        else:
            pv = phi_eval(self.table, np.array([u], dtype=complex), second=True)
        L0 = float(np.real(pv.log_phi[0]))
        return _tail_iterate(self.d, self.side, L0, float(np.real(pv.dlog1[0])),
                             float(np.real(pv.dlog2[0])))

    def psi_j(self, j: int, u: float) -> SeriesValue:
        self.table.ensure(j)
        cj = self.table.c[j]
        sign = 1.0 if self.side == HARRIS else -1.0
        # psi_j(u) = K^j * b(exp(sign u / c_j))
        sv = _tail_iterate(self.d, self.side, sign * u / cj, sign / cj, 0.0)
        s = float(self.K) ** j
        return SeriesValue(s * sv.value, s * sv.d1, s * sv.d2, sv.terms, s * sv.tail_bound)

    def _slope(self, j, u):
        sv = self.psi(u) if j is None else self.psi_j(j, u)
        return (sv.d1 if self.side == HARRIS else -sv.d1), sv

    def saddle(self, v: float, j: int | None = None) -> float:
        """u solving psi'(u) = v (Harris) or -psi'(u) = v (Boettcher)."""
        if not v > 0:
            raise SaddleNotFoundError("the saddle needs v > 0")
        if j is not None:
            lim = float(self.K) ** j / self.table.c[j]
            if (self.side == HARRIS and v >= lim) or (self.side == BOETTCHER and v <= lim):
                raise SaddleNotFoundError(f"v={v} is outside the range of psi_j' (limit {lim})")
        increasing = self.side == HARRIS
        lo, hi = 1e-8, 1.0

        def below(u):
            s, _ = self._slope(j, u)
            return s < v if increasing else s > v

        while below(hi):
            lo, hi = hi, hi * 2.0
            if hi > 1e12:
                raise SaddleNotFoundError(f"no saddle below u=1e12 for v={v}")
        while not below(lo):
            lo *= 0.5
            if lo < 1e-300:
                raise SaddleNotFoundError(f"no saddle above u=0 for v={v}")
        u = 0.5 * (lo + hi)
        for _ in range(200):
            s, sv = self._slope(j, u)
            if (s < v) == increasing:
                lo = u
            else:
                hi = u
            curv = sv.d2 if increasing else -sv.d2
            step = (v - s) / curv if curv != 0 else 0.0
            if not increasing:
                step = -step
            nu = u + step
            if not lo < nu < hi:
                nu = 0.5 * (lo + hi)
            if abs(nu - u) <= 1e-15 * u:
                return nu
            u = nu
        return u

    def legendre(self, v: float, j: int | None = None) -> tuple[float, float, float]:
        """(u*, extremum value, psi''(u*)); max(uv - psi~) or min(psi + uv)."""
        u = self.saddle(v, j)
        sv = self.psi(u) if j is None else self.psi_j(j, u)
        val = u * v - sv.value if self.side == HARRIS else sv.value + u * v
        return u, val, sv.d2

    def sigma2(self, v: float) -> float:
        return self.legendre(v)[2]

    def M(self, v: float) -> float:
        _, val, _ = self.legendre(v)
        b = self.beta
        if self.side == HARRIS:
            return v ** (-b / (b - 1.0)) * val
        return -(v ** (b / (1.0 - b))) * val


def rate_M_tilde(d: OffspringDistribution, v: float, table: NormingTable | None = None) -> float:
    """M~(v) = v^{-beta_H/(beta_H-1)} max_u (uv - psi~(u)); periodic with factor b/mu."""
    return RateFunction(d, HARRIS, table).M(v)


def rate_M(d: OffspringDistribution, v: float, table: NormingTable | None = None) -> float:
    """M(v) = -v^{beta/(1-beta)} min_u (psi(u) + uv); periodic with factor mu^{1-beta}."""
    return RateFunction(d, BOETTCHER, table).M(v)


# ------------------------------------------------------------------ tails
@dataclass(frozen=True)
class TailApprox:
    w: float
    tail_prob: float
    log_w: float
    log_tail_prob: float


def right_tail(d: OffspringDistribution, ell: int, x: float, table: NormingTable | None = None,
               rate: RateFunction | None = None) -> TailApprox:
    """Harris right-tail approximation of w^{*l}(x) and P_l(W >= x)."""
    rf = rate or RateFunction(d, HARRIS, table)
    mu, K, bH = rf.mu, rf.K, rf.beta
    if x < K / mu:
        raise RegimeError(f"x must be >= b/mu = {K / mu}")
    per = math.log(K / mu)
    r = math.floor(math.log(x) / per)
    y = x * (mu / K) ** r
    u_y, _, s2 = rf.legendre(y / ell)
    _, val, _ = rf.legendre(x / ell)
    logp = math.log(d.prob(K))
    log_m1 = -ell * logp / (K - 1) - 0.5 * math.log(2 * math.pi * ell * s2) \
        + (bH - 2) / (2 * (bH - 1)) * math.log(y)
    log_m2 = log_m1 + math.log(y) / (bH - 1) - math.log(u_y)
    expo = -ell * val
    lw = log_m1 + (2 - bH) / (2 * (bH - 1)) * math.log(x) + expo
    lp = log_m2 - bH / (2 * (bH - 1)) * math.log(x) + expo
    return TailApprox(math.exp(lw), math.exp(lp), lw, lp)


def left_tail(d: OffspringDistribution, ell: int, x: float, table: NormingTable | None = None,
              rate: RateFunction | None = None) -> TailApprox:
    """Boettcher left-tail approximation of w^{*l}(x) and P_l(W <= x)."""
    rf = rate or RateFunction(d, BOETTCHER, table)
    mu, K, b = rf.mu, rf.K, rf.beta
    if x > K / mu:
        raise RegimeError(f"x must be <= a/mu = {K / mu}")
    per = math.log(K / mu)
    r = math.floor(math.log(x) / per)
    y = x * (mu / K) ** r
    u_y, _, s2 = rf.legendre(y / ell)
    _, val, _ = rf.legendre(x / ell)
    logp = math.log(d.prob(K))
    log_m1 = -ell * logp / (K - 1) - 0.5 * math.log(2 * math.pi * ell * s2) \
        + (2 - b) / (2 * (1 - b)) * math.log(y)
    log_m2 = log_m1 - math.log(y) / (1 - b) - math.log(u_y)
    expo = ell * val
    lw = log_m1 + (b - 2) / (2 * (1 - b)) * math.log(x) + expo
    lp = log_m2 + b / (2 * (1 - b)) * math.log(x) + expo
    return TailApprox(math.exp(lw), math.exp(lp), lw, lp)


def tail_comparison(d: OffspringDistribution, ell: int, xs, table: NormingTable | None = None,
                    side: str | None = None) -> list[tuple[float, float, float, float]]:
    """Rows (x, log approx, log fourier, log-ratio) against the inverted density."""
    table = table if table is not None else seneta_heyde(d)
    if side is None:
        side = HARRIS if d.a_min < 2 else BOETTCHER
    rf = RateFunction(d, side, table)
    fn = right_tail if side == HARRIS else left_tail
    xs = np.asarray(xs, dtype=float)
    logw, _ = log_w_conv(d, ell, xs, table)
    rows = []
    for x, lw in zip(xs, logw):
        la = fn(d, ell, float(x), table, rf).log_w
        rows.append((float(x), la, float(lw), la / float(lw)))
    return rows


# ------------------------------------------------------------------ pmf
@dataclass(frozen=True)
class SaddlePmf:
    value: float
    log_value: float
    side: str
    j: int
    l: int
    y: float
    u: float
    sigma2: float


def _decompose(table: NormingTable, side: str, K: int, ell: int, n: int, a: int) -> tuple[int, int, float]:
    table.ensure(n)
    c, c0 = table.c, table.c0
    best = None
    for l in range(0, n):
        j = n - l
        lhs = c[j] * ell * float(K) ** l
        if (side == HARRIS and lhs <= c0 * a) or (side == BOETTCHER and lhs >= c0 * a):
            best = l
    if best is None:
        best = 0
    j = n - best
    return j, best, a / (c[j] * ell * float(K) ** best)


def saddlepoint_pmf(d: OffspringDistribution, ell: int, n: int, a: int,
                    table: NormingTable | None = None, side: str | None = None) -> SaddlePmf:
    """Saddle-point approximation of P_l(Z_n = a) in the Harris or Boettcher regime."""
    table = table if table is not None else seneta_heyde(d)
    table.ensure(n)
    if side is None:
        side = HARRIS if a * table.c0 >= ell * table.c[n] else BOETTCHER
    rf = RateFunction(d, side, table)
    K = rf.K
    if side == HARRIS and a >= ell * K ** n:
        raise RegimeError("the Harris approximation needs a < l b^n")
    if side == BOETTCHER and a <= ell * K ** n:
        raise RegimeError("the Boettcher approximation needs a > l a^n")
    L0, r0 = d.period
    if (a - ell * pow(r0, n, L0)) % L0 != 0:
        return SaddlePmf(0.0, -math.inf, side, 0, 0, math.nan, math.nan, math.nan)
    j, l, y = _decompose(table, side, K, ell, n, a)
    u, val, s2 = rf.legendre(y, j)
    N = ell * float(K) ** l
    logp = math.log(d.prob(K))
    # Harris: exp{-N max(uy - psi_j)}; Boettcher: exp{N min(psi_j + uy)}
    expo = -N * val if side == HARRIS else N * val
    lv = (math.log(L0) - ell * logp / (K - 1) - math.log(table.c[j])
          - 0.5 * math.log(2 * math.pi * N * s2) + expo)
    return SaddlePmf(math.exp(lv), lv, side, j, l, y, u, s2)


def saddlepoint_check(d: OffspringDistribution, ell: int, n: int, a: int,
                      table: NormingTable | None = None) -> tuple[float, float, float]:
    """(approx, exact, approx/exact - 1) with the exact value from the generation law."""
    sp = saddlepoint_pmf(d, ell, n, a, table)
    le = log_pmf_k(d, ell, n, a)
    return sp.value, math.exp(le), math.expm1(sp.log_value - le)


# ------------------------------------------------------------------ misc
def schroder_prefactor(d: OffspringDistribution, x, table: NormingTable | None = None):
    """x^{1-alpha} w(x), with alpha = -log f'(c) / log mu (Schroeder case only)."""
    if d.a_min >= 2:
        raise RegimeError("the Schroeder prefactor needs a minimal offspring number <= 1")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    logw, _ = log_w_conv(d, 1, xs, table)
    out = np.exp((1.0 - d.alpha) * np.log(xs) + logw)
    return out if np.ndim(x) else float(out[0])


def schroder_periodicity(d: OffspringDistribution, xs, table: NormingTable | None = None):
    """Rows (x, V(x), V(mu x), |difference|)."""
    xs = np.asarray(xs, dtype=float)
    v1 = schroder_prefactor(d, xs, table)
    v2 = schroder_prefactor(d, d.mean * xs, table)
    return [(float(x), float(a), float(b), float(abs(a - b))) for x, a, b in zip(xs, v1, v2)]


def ratio_limit(d: OffspringDistribution, ell: int, h: int, a_of_n, n_range, side: str | None = None):
    """Rows (n, a_n, exact ratio, limit, rel_dev) for P_{l K^h}(Z_{n-h} = a_n) / P_l(Z_n = a_n)."""
    if side is None:
        side = BOETTCHER if d.a_min >= 2 else HARRIS
    K, logpK = _extreme(d, side)
    limit = math.exp(-(K ** h - 1) * ell * logpK / (K - 1))
    rows = []
    for n in n_range:
        a = int(a_of_n(n))
        den = log_pmf_k(d, ell, n, a)
        if den == -math.inf:
            raise RegimeError(f"P_{ell}(Z_{n} = {a}) = 0; the ratio is undefined")
        num = log_pmf_k(d, ell * K ** h, n - h, a)
        r = math.exp(num - den) if num > -math.inf else 0.0
        rows.append((n, a, r, limit, abs(r / limit - 1.0)))
    return rows


def ratio_limit_boettcher(d: OffspringDistribution, ell: int, h: int, a_of_n, n_range):
    return ratio_limit(d, ell, h, a_of_n, n_range, BOETTCHER)


def ratio_limit_harris(d: OffspringDistribution, ell: int, h: int, a_of_n, n_range):
    return ratio_limit(d, ell, h, a_of_n, n_range, HARRIS)
