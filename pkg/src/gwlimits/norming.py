"""Seneta-Heyde norming and the Laplace transform of the limit W.

The norming solves f(e^{-1/c_{n+1}}) = e^{-1/c_n}.  Everything is done in
the coordinate t_n = 1 - e^{-1/c_n}, where the equation reads
G(t_{n+1}) = t_n with G(y) = 1 - f(1 - y); this keeps full relative
precision when c_n is astronomically large.

phi(z) = lim f_n(e^{-z/c_n}) is evaluated by iterating f from a deep level.
Near 1 the iteration runs on y = 1 - s, away from 1 it runs on L = log s, so
that neither the Boettcher side (s -> 0 doubly exponentially) nor the
negative axis (s -> infinity) underflows or overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .offspring import FINITE, GEOMETRIC, OffspringDistribution, dirac

DEPTH_CAP = 200
C_MAX = 1e40


class InvalidSeedError(ValueError):
    pass


class NonConvergenceError(ArithmeticError):
    pass


# ------------------------------------------------------------ y-coordinates
def _G_coeffs(d: OffspringDistribution) -> np.ndarray | None:
    """Coefficients of G(y) = 1 - f(1-y) as a polynomial in y, if short."""
    if d.kind != FINITE or len(d.probs) > 31:
        return None
    K = len(d.probs) - 1
    g = np.zeros(K + 1)
    for j in range(1, K + 1):
        g[j] = (-1) ** (j + 1) * sum(d.probs[k] * math.comb(k, j) for k in range(j, K + 1))
    return g


def _G(d: OffspringDistribution, y, coeffs=None):
    """G(y) = 1 - f(1 - y), accurate for small y."""
    if d.kind == GEOMETRIC:
        return d.eta * y / (d.q + (1.0 - d.q) * y)
    if coeffs is not None:
        out = np.zeros_like(y)
        for c in coeffs[::-1]:
            out = out * y + c
        return out
    ks = np.arange(len(d.probs))
    y = np.asarray(y)
    ly = np.log1p(-y)[..., None]
    return np.sum(d.p * -np.expm1(ks * ly), axis=-1)


def _dG(d: OffspringDistribution, y):
    return d.derivative(1, 1.0 - y)


def _d2G(d: OffspringDistribution, y):
    return -d.derivative(2, 1.0 - y)


def _log_excess(x: np.ndarray) -> np.ndarray:
    """-log(1-x) - x, accurate for small x."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-3
    series = x * x * (0.5 + x * (1.0 / 3.0 + x * (0.25 + x * 0.2)))
    direct = -np.log1p(-x) - x
    return np.where(small, series, direct)


def default_seed(d: OffspringDistribution) -> float:
    c = d.extinction
    return 1.0 if c == 0.0 else 2.0 * (-1.0 / math.log(c))


def natural_seed(d: OffspringDistribution) -> float:
    """Seed whose W equals lim Z_n / mu^n, known in closed form for geometric laws.

    For 𝒢(eta, q) the natural limit has phi(1) = c + (1-c)^2 / (2-c); a
    seed with e^{-1/c0} equal to that value produces the same W.
    """
    if d.kind != GEOMETRIC:
        raise ValueError("the natural seed is only known in closed form for geometric laws")
    c = d.extinction
    return -1.0 / math.log(c + (1.0 - c) ** 2 / (2.0 - c))


@dataclass
class NormingTable:
    """Seneta-Heyde sequence c_0..c_N for one offspring law.

    ``t[n] = 1 - exp(-1/c[n])`` is stored alongside ``c`` because the
    Laplace engine starts from it.  The table extends itself on demand
    (``ensure``); entries already computed never change.
    """

    d: OffspringDistribution
    c0: float
    t: list = field(default_factory=list)
    _coeffs: np.ndarray | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return len(self.t) - 1

    @property
    def c(self) -> np.ndarray:
        return -1.0 / np.log1p(-np.array(self.t))

    @property
    def ratios(self) -> np.ndarray:
        c = self.c
        return c[1:] / c[:-1]

    @property
    def ratio_deficits(self) -> np.ndarray:
        """mu - c_{n+1}/c_n, computed without cancellation.

        Once c_n passes ~1e16 the ratio equals mu to double precision, so
        monotonicity can only be read off these deficits.
        """
        d = self.d
        t = np.array(self.t)
        u, v = t[1:], t[:-1]
        lu = -np.log1p(-u)
        if d.kind == GEOMETRIC:
            lin = d.eta * (1.0 - d.q) * u * u / (d.q * (d.q + (1.0 - d.q) * u))
        elif self._coeffs is not None:
            lin = np.zeros_like(u)
            for g in self._coeffs[:1:-1]:
                lin = (lin + g) * u
            lin = -lin * u
        else:
            return d.mean - self.ratios
        num = lin + d.mean * _log_excess(u) - _log_excess(v)
        return num / lu

    @property
    def residuals(self) -> np.ndarray:
        """|f(e^{-1/c_{n+1}}) - e^{-1/c_n}| for n = 0..N-1."""
        c = self.c
        return np.abs(self.d.pgf(np.exp(-1.0 / c[1:])) - np.exp(-1.0 / c[:-1]))

    def _next(self, tn: float) -> float:
        d = self.d
        # G is increasing and concave with G(y) <= mu y, so Newton started
        # at tn / mu climbs monotonically to the root
        y = tn / d.mean
        for _ in range(200):
            g = float(_G(d, np.array(y), self._coeffs)) - tn
            step = -g / float(_dG(d, y))
            y_new = y + step
            if not (0.0 < y_new < 1.0):
                y_new = 0.5 * (y + (1.0 if step > 0 else 0.0))
            if abs(y_new - y) <= 1e-16 * y:
                y = y_new
                break
            y = y_new
        return y

    def ensure(self, n: int) -> None:
        if n > DEPTH_CAP:
            raise NonConvergenceError(f"norming depth {n} exceeds the cap {DEPTH_CAP}")
        while len(self.t) <= n:
            self.t.append(self._next(self.t[-1]))

    def depth_for(self, cmin: float) -> int:
        """Smallest n with c_n >= cmin (extending the table if needed)."""
        tmax = -math.expm1(-1.0 / cmin)
        n = 0
        while True:
            self.ensure(n)
            if self.t[n] <= tmax:
                return n
            n += 1

    def scale_to_natural(self) -> float:
        """lim mu^n / c_n: W from this table is W_natural times this factor.

        Only meaningful when W_natural = lim Z_n / mu^n is non-degenerate.
        """
        n = self.depth_for(1e15)
        return self.d.mean ** n * self.t[n]


def seneta_heyde(d: OffspringDistribution, N: int = 40, c0: float | None = None) -> NormingTable:
    if d.mean <= 1.0:
        raise ValueError("Seneta-Heyde norming needs a supercritical law")
    if c0 is None:
        c0 = default_seed(d)
    c = d.extinction
    if c0 <= 0 or (c > 0 and c0 <= -1.0 / math.log(c)):
        raise InvalidSeedError(f"seed c0={c0} must exceed -1/log(c) = {-1.0 / math.log(c) if c > 0 else 0.0}")
    table = NormingTable(d=d, c0=float(c0), t=[-math.expm1(-1.0 / c0)], _coeffs=_G_coeffs(d))
    table.ensure(N)
    return table


# ------------------------------------------------------------ log-coordinates
def _log_moments(d: OffspringDistribution, L):
    """H(L) = log f(e^L) with its first two derivatives in L."""
    if d.kind == GEOMETRIC:
        s = np.exp(L)
        f0 = d.pgf(s)
        f1 = d.derivative(1, s)
        f2 = d.derivative(2, s)
        if d.eta == 1.0:
            H = L + math.log(d.q) - np.log(1.0 - (1.0 - d.q) * s)
        else:
            H = np.log(f0)
        m1 = s * f1 / f0
        var = m1 + s * s * f2 / f0 - m1 * m1
        return H, m1, var
    ks = np.array(d.support, dtype=float)
    lp = np.log(d.p[d.support])
    shift = np.where(np.real(L) < 0, float(ks[0]), float(ks[-1]))
    e = lp + (ks - shift[..., None]) * L[..., None]
    emax = np.max(np.real(e), axis=-1, keepdims=True)
    w = np.exp(e - emax)
    S = w.sum(axis=-1)
    H = shift * L + emax[..., 0] + np.log(S)
    m1 = (w * ks).sum(axis=-1) / S
    m2 = (w * ks * ks).sum(axis=-1) / S
    return H, m1, m2 - m1 * m1


@dataclass
class PhiValues:
    """phi and log phi with derivatives in the argument."""

    phi: np.ndarray
    d1: np.ndarray
    d2: np.ndarray | None
    log_phi: np.ndarray
    dlog1: np.ndarray
    dlog2: np.ndarray | None


def _depths(table: NormingTable, z: np.ndarray, tol: float) -> np.ndarray:
    need = np.maximum(1e16, (1.0 + np.abs(z) ** 2) / tol)
    table.depth_for(float(need.max()) if len(need) else 1e16)
    # t_n decreases in n; the first n with t_n <= tmax has c_n >= need
    tmax = -np.expm1(-1.0 / need)
    neg_t = -np.array(table.t)
    return np.searchsorted(neg_t, -tmax, side="left")


def phi_eval(table: NormingTable, z, *, second: bool = False, tol: float = 1e-16,
             strict: bool = True) -> PhiValues:
    """Evaluate phi(z) = E e^{-zW} and its derivatives on an array of z.

    ``second`` also propagates the second derivative.  Points whose
    iterates leave the domain of f give NaN when ``strict`` is false and
    raise NonConvergenceError otherwise.
    """
    d = table.d
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    shape = z.shape
    z = z.ravel()
    depth = _depths(table, z, tol)
    nmax = int(depth.max()) if len(z) else 0
    c = table.c
    coeffs = table._coeffs
    logR = math.log(d.radius) if d.radius < math.inf else math.inf
    y, y1, y2, L, L1, L2 = (np.zeros_like(z) for _ in range(6))
    inlog = np.zeros(len(z), dtype=bool)
    bad = np.zeros(len(z), dtype=bool)
    starts = {int(k): np.nonzero(depth == k)[0] for k in np.unique(depth)}
    yidx = np.zeros(0, dtype=int)
    lidx = np.zeros(0, dtype=int)
    dcoef = d2coef = None
    if coeffs is not None:
        dcoef = np.polyder(coeffs[::-1])
        d2coef = np.polyder(dcoef)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(nmax, 0, -1):
            if k in starts:
                idx = starts[k]
                cn = c[k]
                e = np.exp(-z[idx] / cn)
                y[idx] = -np.expm1(-z[idx] / cn)
                y1[idx] = e / cn
                y2[idx] = -e / cn ** 2
                yidx = np.concatenate([yidx, idx])
            # leave the y-chart once |y| is no longer small
            if yidx.size:
                far = np.abs(y[yidx]) >= 0.5
                if far.any():
                    mv = yidx[far]
                    sv = 1.0 - y[mv]
                    L[mv] = np.log(sv)
                    L1[mv] = -y1[mv] / sv
                    L2[mv] = -y2[mv] / sv - y1[mv] ** 2 / sv ** 2
                    inlog[mv] = True
                    lidx = np.concatenate([lidx, mv])
                    yidx = yidx[~far]
            if d.kind == GEOMETRIC:
                # a real iterate at or past the pole of f
                if yidx.size:
                    past = (np.imag(z[yidx]) == 0) & (np.real(y[yidx]) <= 1.0 - d.radius)
                    bad[yidx[past]] = True
                    yidx = yidx[~past]
                if lidx.size:
                    past = (np.imag(z[lidx]) == 0) & (np.real(L[lidx]) >= logR)
                    bad[lidx[past]] = True
                    lidx = lidx[~past]
            if yidx.size:
                yy = y[yidx]
                if dcoef is not None:
                    g1 = np.polyval(dcoef, yy)
                    g2 = np.polyval(d2coef, yy) if second else None
                else:
                    g1 = _dG(d, yy)
                    g2 = _d2G(d, yy) if second else None
                if second:
                    y2[yidx] = g2 * y1[yidx] ** 2 + g1 * y2[yidx]
                y1[yidx] = g1 * y1[yidx]
                y[yidx] = _G(d, yy, coeffs)
                ok = np.isfinite(y[yidx])
                if not ok.all():
                    bad[yidx[~ok]] = True
                    yidx = yidx[ok]
            if lidx.size:
                H, m1, var = _log_moments(d, L[lidx])
                if second:
                    L2[lidx] = var * L1[lidx] ** 2 + m1 * L2[lidx]
                L1[lidx] = m1 * L1[lidx]
                L[lidx] = H
                ok = np.isfinite(H)
                if not ok.all():
                    bad[lidx[~ok]] = True
                    lidx = lidx[ok]
        if strict and bad.any():
            raise NonConvergenceError("iterates left the domain of the generating function")
        eL = np.exp(L)
        phi = np.where(inlog, eL, 1.0 - y)
        d1 = np.where(inlog, eL * L1, -y1)
        log_phi = np.where(inlog, L, np.log1p(-y))
        dlog1 = np.where(inlog, L1, -y1 / (1.0 - y))
        d2 = dlog2 = None
        if second:
            d2 = np.where(inlog, eL * (L2 + L1 ** 2), -y2)
            dlog2 = np.where(inlog, L2, -y2 / (1.0 - y) - y1 ** 2 / (1.0 - y) ** 2)
    out = []
    for arr in (phi, d1, d2, log_phi, dlog1, dlog2):
        if arr is not None:
            arr = np.where(bad, np.nan, arr).reshape(shape)
        out.append(arr)
    return PhiValues(*out)


def laplace_W(d: OffspringDistribution, table: NormingTable | None, z, tol: float = 1e-14):
    """phi(z) = E exp(-z W), real or complex z with Re z >= -lambda_c."""
    if table is None:
        table = seneta_heyde(d)
    scalar = np.ndim(z) == 0
    v = phi_eval(table, z, tol=tol).phi
    if np.isrealobj(z) or np.all(np.imag(np.asarray(z)) == 0):
        v = np.real(v)
    return v[0] if scalar else v


def phi_tilde(table: NormingTable, u, **kw) -> PhiValues:
    """phi~(u) = phi(-u) = E e^{uW}; derivatives are taken in u."""
    pv = phi_eval(table, -np.asarray(u, dtype=complex), **kw)
    flip = lambda a: None if a is None else -a
    return PhiValues(pv.phi, flip(pv.d1), pv.d2, pv.log_phi, flip(pv.dlog1), pv.dlog2)


# ------------------------------------------------------------ lambda_c, zeta
def _phi_tilde_real(table: NormingTable, u: float) -> float:
    v = float(np.real(phi_tilde(table, u, strict=False).phi[0]))
    return math.inf if math.isnan(v) else v


def lambda_c(d: OffspringDistribution, table: NormingTable | None = None) -> float:
    """sup{lambda : E e^{lambda W} < infinity} = mu sup{u : phi~(u) < R_c}."""
    if d.kind == FINITE:
        return math.inf
    R = d.radius
    if R <= 1.0:
        return 0.0
    if table is None:
        table = seneta_heyde(d)

    def below(u):
        v = _phi_tilde_real(table, u)
        return math.isfinite(v) and 0 < v < R

    hi = 1.0
    while below(hi):
        hi *= 2.0
        if hi > 1e6:
            return math.inf
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if below(mid):
            lo = mid
        else:
            hi = mid
    return d.mean * 0.5 * (lo + hi)


def log_zeta(d: OffspringDistribution, lam: float, h: int, table: NormingTable | None = None,
             lam_c: float | None = None) -> float:
    """log zeta_h(lambda) = log E exp(lambda mu^{-h} W), with the boundary cases."""
    if h < 0:
        raise ValueError("h must be >= 0")
    if lam == 0:
        return 0.0
    if lam == -math.inf:
        c = d.extinction
        return -math.inf if c == 0 else math.log(c)
    if lam_c is None:
        lam_c = lambda_c(d, table)
    if lam > lam_c:
        raise ValueError(f"lambda={lam} exceeds lambda_c={lam_c}")
    if lam == math.inf:
        return math.inf
    if lam == lam_c:
        if h == 0:
            return math.inf if d.kind == GEOMETRIC else math.log(float(d.pgf(d.radius)))
        if h == 1:
            return math.log(d.radius)
    if table is None:
        table = seneta_heyde(d)
    return float(np.real(phi_tilde(table, lam * d.mean ** (-h)).log_phi[0]))


def zeta(d: OffspringDistribution, lam: float, h: int, table: NormingTable | None = None,
         lam_c: float | None = None) -> float:
    lz = log_zeta(d, lam, h, table, lam_c)
    return math.exp(lz) if lz < 709 else math.inf


@dataclass(frozen=True)
class Condensation:
    """Placeholder law: the vertex has infinitely many children."""

    h: int

    def describe(self) -> str:
        return f"condensation at generation {self.h}"


def tilde_p(d: OffspringDistribution, lam: float, h: int, table: NormingTable | None = None,
            lam_c: float | None = None):
    """p~_h(k) = zeta_{h+1}^k / zeta_h * p(k), or a degenerate law at the boundary."""
    if lam == 0:
        return d
    if lam_c is None and lam != -math.inf:
        lam_c = lambda_c(d, table)
    lz0 = log_zeta(d, lam, h, table, lam_c)
    lz1 = log_zeta(d, lam, h + 1, table, lam_c)
    if lz0 == -math.inf:
        return dirac(d.a_min)
    if lz0 == math.inf:
        if d.kind == FINITE:
            return dirac(int(d.b_max))
        return Condensation(h)
    if d.kind == GEOMETRIC:
        return OffspringDistribution.geometric(1.0 - (1.0 - d.eta) * math.exp(-lz0),
                                               1.0 - (1.0 - d.q) * math.exp(lz1))
    ks = np.array(d.support)
    lw = np.log(d.p[ks]) + ks * lz1 - lz0
    w = np.exp(lw - lw.max())
    w /= w.sum()
    weights = {int(k): float(x) for k, x in zip(ks, w)}
    if d.kind == FINITE:
        return OffspringDistribution.finite(weights)
    full = np.zeros(len(d.probs))
    full[ks] = w
    return OffspringDistribution.truncated(list(full), 0.0)
