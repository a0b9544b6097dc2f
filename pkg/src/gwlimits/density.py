"""Density of W and the backbone offspring law.

phi(z) - c is the Laplace transform of the density w, so the l-fold
convolution is recovered by Bromwich inversion.  The derivative form

    x w^{*l}(x) = (l / 2 pi i) int e^{zx} (-phi'(z)) (phi(z) - c)^{l-1} dz

is always used: it stays absolutely integrable even when (phi - c)^l is
not (small l in the Schroeder case).  The vertical line Re z = sigma goes
through the real saddle of e^{zx} (phi(z) - c)^l, and the integrand is
handled in log space, so values far out in either tail (1e-300) come out
with full relative precision.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from .offspring import FINITE, GEOMETRIC, OffspringDistribution
from .norming import NormingTable, phi_eval, seneta_heyde

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
_BATCH = 8


class QuadratureError(ArithmeticError):
    pass


class UnsupportedLawError(ValueError):
    pass


@dataclass(frozen=True)
class QuadParams:
    sigma: float
    first_width: float
    cutoff: float
    panels: int


def _table(d: OffspringDistribution, table: NormingTable | None) -> NormingTable:
    if table is None:
        return _default_tables.setdefault(d, seneta_heyde(d))
    return table


_default_tables: dict = {}


# ------------------------------------------------------------ integrand
def _log_transform(table, z, ell, *, second=True, strict=True):
    """log F(z) with F = -phi'(phi - c)^{l-1}, plus d log F/dz and the saddle data.

    Also returns m = -d/dz log(phi - c) and k2 = d^2/dz^2 log(phi - c).
    """
    c = table.d.extinction
    pv = phi_eval(table, z, second=second, strict=strict)
    lp = pv.log_phi
    if c == 0.0:
        ratio = np.zeros_like(lp)
    else:
        with np.errstate(over="ignore"):
            ratio = c * np.exp(-lp)         # c / phi
    log_hat = lp + np.log1p(-ratio)         # log(phi - c)
    a1 = pv.dlog1 / (1.0 - ratio)           # (log(phi - c))'
    logF = lp + np.log(-pv.dlog1) + (ell - 1) * log_hat
    out = {"logF": logF, "m": -a1}
    if second:
        phi2_over = (pv.dlog2 + pv.dlog1 ** 2)   # phi'' / phi
        out["dlogF"] = phi2_over / pv.dlog1 + (ell - 1) * a1
        out["k2"] = phi2_over / (1.0 - ratio) - a1 ** 2
    return out


def saddle(table: NormingTable, ell: int, xs) -> tuple[np.ndarray, np.ndarray]:
    """Real sigma with -l (log(phi - c))'(sigma) = x, vectorised; returns (sigma, k2)."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    target = np.log(xs / ell)
    sig = np.zeros_like(xs)
    lo = np.full_like(xs, -np.inf)
    hi = np.full_like(xs, np.inf)
    k2 = np.ones_like(xs)
    for _ in range(200):
        with np.errstate(invalid="ignore", divide="ignore"):
            o = _log_transform(table, sig, ell, strict=False)
        m = np.real(o["m"])
        kk = np.real(o["k2"])
        ok = np.isfinite(m) & (m > 0) & np.isfinite(kk) & (kk > 0)
        lm = np.where(ok, np.log(np.where(ok, m, 1.0)), np.inf)
        gap = lm - target
        done = ok & (np.abs(gap) < 1e-7)
        k2 = np.where(ok, kk, k2)
        if done.all():
            break
        # m decreases in sigma
        lo = np.where(gap > 0, np.maximum(lo, sig), lo)
        hi = np.where(gap <= 0, np.minimum(hi, sig), hi)
        newton = sig + np.where(ok, gap * np.where(ok, m, 1.0) / np.where(ok, kk, 1.0), 0.0)
        inside = ok & (newton > lo) & (newton < hi)
        both = np.isfinite(lo) & np.isfinite(hi)
        step = np.maximum(1.0, np.abs(sig))
        fallback = np.where(both, 0.5 * (lo + hi),
                            np.where(np.isfinite(lo), sig + step, sig - step))
        fallback = np.where(np.isfinite(lo) & ~np.isfinite(hi), lo + step, fallback)
        sig = np.where(done, sig, np.where(inside, newton, fallback))
    return sig, k2


def _w_many(table, ell, xs, sigmas, k2s, rtol, max_cutoff):
    """Inversion integrals for many x at once; one phi evaluation per panel batch.

    Each x follows its own panel schedule (first width 1/sqrt(l k2), growth
    1.3, capped at 6 pi / x) and stops on its own tail criterion.
    """
    xs = np.asarray(xs, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    m = len(xs)
    first = 1.0 / np.sqrt(ell * np.asarray(k2s, dtype=float))
    cap = 6.0 * np.pi / xs
    base = _log_transform(table, sigmas.astype(complex), ell, second=False)
    lam0 = np.real(base["logF"]) + sigmas * xs
    total = np.zeros(m, dtype=complex)
    absum = np.zeros(m)
    a = np.zeros(m)
    width = np.minimum(first, cap)
    panels = np.zeros(m, dtype=int)
    out = [None] * m
    active = np.arange(m)
    nq = len(_GL_X)
    while active.size:
        na = active.size
        x, sg, l0 = xs[active], sigmas[active], lam0[active]
        E = np.empty((na, _BATCH + 1))
        E[:, 0] = a[active]
        w = width[active].copy()
        for j in range(_BATCH):
            E[:, j + 1] = E[:, j] + w
            w = np.minimum(w * 1.3, cap[active])
        width[active] = w
        mids = 0.5 * (E[:, 1:] + E[:, :-1])
        half = 0.5 * (E[:, 1:] - E[:, :-1])
        s = mids[..., None] + half[..., None] * _GL_X
        zq = sg[:, None, None] + 1j * s
        ze = sg[:, None] + 1j * E[:, 1:]
        o = _log_transform(table, np.concatenate([zq.ravel(), ze.ravel()]), ell, second=True)
        n = na * _BATCH * nq
        vals = np.exp(o["logF"][:n].reshape(na, _BATCH, nq) + zq * x[:, None, None]
                      - l0[:, None, None])
        contrib = (vals * _GL_W).sum(axis=-1) * half
        absum[active] += ((np.abs(vals) * _GL_W).sum(axis=-1) * half).sum(axis=1)
        # endpoint data for the asymptotic tail, integrand without e^{isx}
        dlog = o["dlogF"][n:].reshape(na, _BATCH)
        Fhat = np.exp(o["logF"][n:].reshape(na, _BATCH) + (sg * x - l0)[:, None])
        dF = 1j * Fhat * dlog
        running = total[active][:, None] + np.cumsum(contrib, axis=1)
        xc = x[:, None]
        dl = np.abs(dlog)
        # first neglected term of the integration-by-parts series
        t3 = 2.0 * (np.abs(dF) / xc ** 2) * dl / xc
        scale = np.maximum(np.abs(running.real), 1e-300)
        stop = ((t3 <= rtol * scale) & (dl <= 0.25 * xc)) | (np.abs(Fhat) / xc < 1e-18 * scale)
        keep = np.ones(na, dtype=bool)
        for r in np.nonzero(stop.any(axis=1))[0]:
            j = int(np.argmax(stop[r]))
            i = active[r]
            xv = float(x[r])
            ix = 1j * xv
            S = E[r, j + 1]
            tail = np.exp(1j * S * xv) * (-Fhat[r, j] / ix + dF[r, j] / ix ** 2)
            val = float((running[r, j] + tail).real)
            rel = (float(t3[r, j]) + 1e-15 * absum[i]) / abs(val) if val != 0 else math.inf
            logv = math.log(ell / (math.pi * xv)) + float(l0[r]) + (math.log(val) if val > 0 else -math.inf)
            out[i] = (logv, rel, QuadParams(float(sg[r]), float(first[i]), float(S), int(panels[i]) + j + 1))
            keep[r] = False
        rest = active[keep]
        total[rest] = running[keep, -1]
        a[rest] = E[keep, -1]
        panels[rest] += _BATCH
        if rest.size and a[rest].max() > max_cutoff:
            bad = rest[np.argmax(a[rest])]
            raise QuadratureError(f"no convergence of the inversion integral (x={xs[bad]}, l={ell}, "
                                  f"cutoff {a[bad]:.3g})")
        active = rest
    return out


def log_w_conv(d: OffspringDistribution, ell: int, x, table: NormingTable | None = None, *,
               rtol: float = 1e-10, max_cutoff: float = 1e7):
    """log w^{*l}(x) and its relative error; usable where w underflows.

    A non-positive quadrature result (possible only when the true value is
    below the error level) gives log = -inf.
    """
    if ell < 1:
        raise ValueError("convolution order must be >= 1")
    table = _table(d, table)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs <= 0):
        raise ValueError("x must be positive")
    cache = _cache_for(table)
    todo = [i for i, xv in enumerate(xs) if (ell, float(xv)) not in cache]
    if todo:
        sig, k2 = saddle(table, ell, xs[todo])
        res = _w_many(table, ell, xs[todo], sig, k2, rtol, max_cutoff)
        for i, r in zip(todo, res):
            cache[(ell, float(xs[i]))] = r
    logv = np.array([cache[(ell, float(xv))][0] for xv in xs])
    rel = np.array([cache[(ell, float(xv))][1] for xv in xs])
    if np.ndim(x) == 0:
        return float(logv[0]), float(rel[0])
    return logv, rel


def w_conv(d: OffspringDistribution, ell: int, x, table: NormingTable | None = None, *,
           rtol: float = 1e-10, max_cutoff: float = 1e7):
    """w^{*l}(x) with an absolute error estimate.

    Scalar x gives ``(value, err)``; an array gives two arrays.
    """
    logv, rel = log_w_conv(d, ell, x, table, rtol=rtol, max_cutoff=max_cutoff)
    val = np.exp(logv)
    err = np.where(np.isfinite(rel), val * rel, np.inf)
    if np.ndim(x) == 0:
        return float(val), float(err)
    return val, err


_caches: dict = {}


def _cache_for(table: NormingTable) -> dict:
    key = id(table)
    hit = _caches.get(key)
    if hit is None or hit[0] is not table:
        hit = (table, {})
        _caches[key] = hit
    return hit[1]


def log_w_k(d: OffspringDistribution, k: int, theta: float, table: NormingTable | None = None) -> float:
    """log of sum_i C(k,i) c^{k-i} w^{*i}(theta), stable where w underflows."""
    c = d.extinction
    terms = []
    for i in range(1, k + 1):
        if c == 0.0 and i < k:
            continue
        lc = math.log(math.comb(k, i)) + ((k - i) * math.log(c) if i < k else 0.0)
        terms.append(lc + log_w_conv(d, i, theta, table)[0])
    top = max(terms)
    if top == -math.inf:
        return -math.inf
    return top + math.log(math.fsum(math.exp(t - top) for t in terms))


def w_k(d: OffspringDistribution, k: int, theta, table: NormingTable | None = None):
    """Density of the W-mass of k independent ancestors: sum_i C(k,i) c^{k-i} w^{*i}."""
    c = d.extinction
    out = 0.0
    for i in range(1, k + 1):
        coef = math.comb(k, i) * c ** (k - i)
        if coef == 0.0:
            continue
        out = out + coef * w_conv(d, i, theta, table)[0]
    return out


# ------------------------------------------------------------ grids
@dataclass(frozen=True)
class DensityGrid:
    ell: int
    xs: np.ndarray
    values: np.ndarray
    err: np.ndarray
    quad_params: tuple = field(default=(), repr=False)
    c0: float = 0.0

    def integral(self, alpha: float | None = None) -> float:
        """Mass on (0, inf): Simpson in log x plus power-law and exponential end pieces."""
        xs, v = self.xs, np.maximum(self.values, 0.0)
        body = simpson(v * xs, x=np.log(xs))
        left = 0.0
        if v[0] > 0 and v[1] > 0:
            slope = math.log(v[1] / v[0]) / math.log(xs[1] / xs[0])   # w ~ x^slope
            left = xs[0] * v[0] / (slope + 1.0) if slope > -1.0 else math.inf
        right = 0.0
        if v[-1] > 0 and v[-2] > 0:
            rate = -math.log(v[-1] / v[-2]) / (xs[-1] - xs[-2])
            right = v[-1] / rate if rate > 0 else math.inf
        return float(body + left + right)


def density_grid(d: OffspringDistribution, ell: int, xs, table: NormingTable | None = None,
                 rtol: float = 1e-10) -> DensityGrid:
    table = _table(d, table)
    xs = np.asarray(xs, dtype=float)
    vals, errs = w_conv(d, ell, xs, table, rtol=rtol)
    qps = tuple(_cache_for(table)[(ell, float(x))][2] for x in xs)
    return DensityGrid(ell, xs, vals, errs, qps, table.c0)


# ------------------------------------------------------------ rho
def _taylor_c(d: OffspringDistribution, jmax: int) -> np.ndarray:
    """a_j = f^{(j)}(c)/j! for j = 0..jmax (a_0 is dropped by callers)."""
    c = d.extinction
    if d.kind == GEOMETRIC:
        rho = 1.0 - d.q
        beta0 = d.eta * d.q / rho
        j = np.arange(jmax + 1)
        a = beta0 * rho ** j / (1.0 - rho * c) ** (j + 1)
        a[0] = float(d.pgf(c))
        return a
    K = len(d.probs) - 1
    a = np.zeros(jmax + 1)
    for j in range(min(jmax, K) + 1):
        a[j] = sum(math.comb(k, j) * d.probs[k] * c ** (k - j) for k in range(j, K + 1))
    return a


@dataclass
class RhoLaw:
    """Joint law of the survivor-children counts of r backbone vertices."""

    theta: float
    r: int
    a: np.ndarray                 # a[j] = f^{(j)}(c)/j!, a[0] = 0
    g: list                       # g[m][t] = [x^t](f(c+x)-c)^m
    total_pmf: np.ndarray         # total_pmf[t] = P(|s| = t)
    truncated_mass: float
    scale: float                  # mu / w^{*r}(theta)
    w_tot: dict = field(default_factory=dict, repr=False)

    def pmf(self, s) -> float:
        t = sum(s)
        if len(s) != self.r or min(s) < 1 or t >= len(self.total_pmf) or self.g[self.r][t] == 0:
            return 0.0
        prod = math.prod(float(self.a[j]) if j < len(self.a) else 0.0 for j in s)
        return self.total_pmf[t] * prod / self.g[self.r][t]

    def sample(self, rng: np.random.Generator) -> tuple:
        t = _pick(self.total_pmf, rng.random())
        a = self.a
        out = []
        for i in range(self.r, 0, -1):
            rest = self.g[i - 1]
            jmax = min(len(a) - 1, t - (i - 1))
            wts = [a[j] * (rest[t - j] if t - j < len(rest) else 0.0) for j in range(1, jmax + 1)]
            j = 1 + _pick(wts, rng.random())
            out.append(j)
            t -= j
        return tuple(out)


def _pick(weights, u: float) -> int:
    """Inverse-CDF draw from unnormalised weights with one uniform."""
    target = u * sum(weights)
    acc = 0.0
    last = 0
    for i, w in enumerate(weights):
        if w > 0:
            acc += w
            last = i
            if acc > target:
                return i
    return last


class WTable:
    """log w^{*l} splined in log x, for repeated evaluation at scattered points.

    Below the grid the density is continued as a power law (the Schroeder
    behaviour near 0); above it the last log-log slope is kept.
    """

    def __init__(self, d: OffspringDistribution, ells, x_min: float, x_max: float,
                 n: int = 160, table: NormingTable | None = None):
        self.d = d
        self.table = _table(d, table)
        self.xs = np.geomspace(x_min, x_max, n)
        self._splines = {}
        for ell in ells:
            logv, _ = log_w_conv(d, ell, self.xs, self.table)
            self._splines[ell] = CubicSpline(np.log(self.xs), logv, extrapolate=True)
        self._knots = np.log(self.xs).tolist()
        self._coef = {ell: sp.c.T.tolist() for ell, sp in self._splines.items()}

    def log_w(self, ell: int, x: float) -> float:
        sp = self._splines[ell]
        lx = math.log(x)
        knots = self._knots
        lo, hi = knots[0], knots[-1]
        if lx < lo or lx > hi:
            edge = lo if lx < lo else hi
            return float(sp(edge) + sp(edge, 1) * (lx - edge))
        i = min(bisect.bisect_right(knots, lx) - 1, len(knots) - 2)
        c3, c2, c1, c0 = self._coef[ell][i]
        dx = lx - knots[i]
        return ((c3 * dx + c2) * dx + c1) * dx + c0

    def w(self, ell: int, x: float) -> float:
        return math.exp(self.log_w(ell, x))


_powers_cache: dict = {}
_taylor_cache: dict = {}


def _taylor_c_cached(d: OffspringDistribution) -> np.ndarray:
    if d not in _taylor_cache:
        a = _taylor_c(d, int(d.b_max))
        a[0] = 0.0
        _taylor_cache[d] = a
    return _taylor_cache[d]


def rho_law(d: OffspringDistribution, theta: float, r: int, table: NormingTable | None = None,
            tail: float = 1e-10, wtable: WTable | None = None) -> RhoLaw:
    if d.kind not in (FINITE, GEOMETRIC):
        raise UnsupportedLawError("rho needs finite support or a geometric law")
    if theta <= 0 or r < 1:
        raise ValueError("need theta > 0 and r >= 1")
    table = _table(d, table)
    mu = d.mean
    if wtable is not None:
        wfun = wtable.w
    else:
        wfun = lambda ell, x: w_conv(d, ell, x, table)[0]
    if d.kind == FINITE:
        tmax = r * int(d.b_max)
        a = _taylor_c_cached(d)
    else:
        tmax = r + 16
        a = _taylor_c(d, tmax)
    a[0] = 0.0
    scale = mu / wfun(r, theta)
    w_tot = {}

    def powers(tmax):
        g = [np.zeros(tmax + 1)]
        g[0][0] = 1.0
        for _ in range(r):
            g.append(np.convolve(g[-1], a[: tmax + 1])[: tmax + 1])
        return g

    while True:
        if d.kind == FINITE:
            key = (d, r)
            if key not in _powers_cache:
                _powers_cache[key] = powers(tmax)
            g = _powers_cache[key]
        else:
            g = powers(tmax)
        pmf = np.zeros(tmax + 1)
        for t in range(r, tmax + 1):
            if g[r][t] == 0:
                continue
            if t not in w_tot:
                w_tot[t] = max(wfun(t, mu * theta), 0.0)
            pmf[t] = scale * w_tot[t] * g[r][t]
        missing = 1.0 - pmf.sum()
        if d.kind == FINITE or (missing < tail and pmf[-1] < tail * 1e-3):
            break
        if tmax > 4096:
            raise UnsupportedLawError("rho support did not truncate below the tail budget")
        tmax *= 2
        a = _taylor_c(d, tmax)
        a[0] = 0.0
    return RhoLaw(theta, r, a, g, pmf, max(0.0, 1.0 - pmf.sum()), scale, w_tot)


def rho_pmf(d: OffspringDistribution, theta: float, r: int, s, table: NormingTable | None = None) -> float:
    """rho_{theta,r}(s) = mu w^{*|s|}(mu theta)/w^{*r}(theta) prod f^{(s_i)}(c)/s_i!."""
    s = tuple(int(v) for v in s)
    if len(s) != r or min(s) < 1:
        return 0.0
    table = _table(d, table)
    a = _taylor_c(d, max(s))
    prod = math.prod(float(a[j]) for j in s)
    if prod == 0.0:
        return 0.0
    mu = d.mean
    return mu * w_conv(d, sum(s), mu * theta, table)[0] / w_conv(d, r, theta, table)[0] * prod


def rho_sample(d: OffspringDistribution, theta: float, r: int, rng: np.random.Generator,
               table: NormingTable | None = None, law: RhoLaw | None = None) -> tuple:
    if law is None:
        law = rho_law(d, theta, r, table)
    return law.sample(rng)
