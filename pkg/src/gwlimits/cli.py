"""Command-line front end.

Every subcommand writes CSV (or NDJSON for trees) to ``--out`` or stdout,
preceded by one ``#`` header line echoing the seed and the arguments.
Exit codes: 0 success, 1 a checked property failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import io
import math
import sys

import numpy as np

from . import asymptotics as asy
from . import verify as ver
from .density import density_grid, rho_law
from .genlaw import UnreachableTargetError, generation_law, log_pmf_k, ratio_H
from .norming import seneta_heyde
from .offspring import FINITE, OffspringDistribution, OffspringError
from . import trees as tr


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _row(*vals) -> str:
    return ",".join(v if isinstance(v, str) else fmt(v) for v in vals)


def _dist(args) -> OffspringDistribution:
    if not args.dist:
        raise UsageError("--dist is required for this subcommand")
    try:
        return OffspringDistribution.parse(args.dist)
    except (OffspringError, ValueError) as e:
        raise UsageError(f"--dist: {e}") from None


def _floats(text: str, flag: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{flag}: expected comma-separated numbers") from None


def _grid(args) -> np.ndarray:
    if args.x:
        return np.array(_floats(args.x, "--x"))
    if args.xmin is None or args.xmax is None:
        raise UsageError("give --x or both --xmin and --xmax")
    if not 0 < args.xmin < args.xmax:
        raise UsageError("--xmin/--xmax: need 0 < xmin < xmax")
    return np.geomspace(args.xmin, args.xmax, args.points) if args.log else \
        np.linspace(args.xmin, args.xmax, args.points)


# ------------------------------------------------------------------ commands
def cmd_law(args, out) -> int:
    d = _dist(args)
    if d.kind != FINITE and args.cap is None:
        raise UsageError("--cap is required for infinite support")
    law = generation_law(d, args.n, args.cap, exact=args.exact)
    print(_row("a", "prob") if not args.exact else "a,prob,exact", file=out)
    for a in range(law.cap + 1):
        p = law.prob(a)
        if p == 0 and not args.all:
            continue
        if args.exact:
            print(f"{a},{fmt(p)},{law.rational[a]}", file=out)
        else:
            print(_row(a, p), file=out)
    return 0


def cmd_norming(args, out) -> int:
    d = _dist(args)
    t = seneta_heyde(d, args.N, args.c0)
    c = t.c
    res = t.residuals
    print(f"# c0={fmt(t.c0)}", file=out)
    print("n,c_n,ratio,residual", file=out)
    for n in range(args.N + 1):
        if n == 0:
            print(_row(n, c[0], "", ""), file=out)
        else:
            print(_row(n, c[n], c[n] / c[n - 1], res[n - 1]), file=out)
    bad = bool(np.any(res[: args.N] >= 1e-13))
    return 1 if (bad and args.check) else 0


def cmd_density(args, out) -> int:
    d = _dist(args)
    xs = _grid(args)
    table = seneta_heyde(d, c0=args.c0)
    g = density_grid(d, args.ell, xs, table)
    print(f"# c0={fmt(table.c0)}", file=out)
    print("x,value,err", file=out)
    for x, v, e in zip(g.xs, g.values, g.err):
        print(_row(x, v, e), file=out)
    return 0


def cmd_rho(args, out) -> int:
    d = _dist(args)
    table = seneta_heyde(d, c0=args.c0)
    law = rho_law(d, args.theta, args.r, table)
    print(f"# c0={fmt(table.c0)} truncated_mass={fmt(law.truncated_mass)}", file=out)
    cols = ",".join(f"s_{i}" for i in range(1, args.r + 1))
    if args.draws:
        rng = np.random.default_rng(args.seed)
        print(cols, file=out)
        for _ in range(args.draws):
            print(",".join(str(v) for v in law.sample(rng)), file=out)
        return 0
    print(cols + ",prob", file=out)
    for s in _compositions(args.r, len(law.total_pmf) - 1, len(law.a) - 1):
        p = law.pmf(s)
        if p > 0:
            print(",".join(map(str, s)) + "," + fmt(p), file=out)
    return 0


def _compositions(r: int, tmax: int, jmax: int):
    def rec(prefix, left, budget):
        if left == 0:
            yield tuple(prefix)
            return
        for j in range(1, min(jmax, budget - (left - 1)) + 1):
            yield from rec(prefix + [j], left - 1, budget - j)
    yield from rec([], r, tmax)


def cmd_sample(args, out) -> int:
    d = _dist(args)
    rng = np.random.default_rng(args.seed)
    fam = args.family
    table = seneta_heyde(d, c0=args.c0)
    items = []
    if fam == "gw":
        items = [tr.sample_gw(d, args.depth, rng) for _ in range(args.count)]
    elif fam == "conditioned":
        if args.n is None or args.a is None:
            raise UsageError("--n and --a are required for the conditioned family")
        smp = tr.conditioned_sampler(d, args.n, args.a)
        items = [smp.sample(rng) for _ in range(args.count)]
    elif fam == "kesten":
        items = [tr.sample_kesten(d, args.depth, rng) for _ in range(args.count)]
    elif fam == "theta":
        if args.theta is None:
            raise UsageError("--theta is required for the theta family")
        smp = tr.ThetaSampler(d, table)
        items = [smp.sample(args.theta, args.depth, rng) for _ in range(args.count)]
    elif fam in ("lambda", "lambda_e", "lambda_n"):
        if args.lam is None:
            raise UsageError("--lam is required for the lambda families")
        laws = tr.LambdaLaws.critical(d, table) if args.lam == "critical" else \
            tr.LambdaLaws(d, float(args.lam), table)
        if fam == "lambda":
            items = [tr.sample_T_lambda(d, laws.lam, args.depth, rng, laws, args.root_children)
                     for _ in range(args.count)]
        else:
            smp = tr.typed_lambda_sampler(d, laws, fam[-1])
            items = [smp.sample(args.depth, rng, args.root_children) for _ in range(args.count)]
    out.write(tr.dumps_ndjson(items))
    return 0


def cmd_ratio(args, out) -> int:
    d = _dist(args)
    H = ratio_H(d, args.n, args.h, args.k, args.a, exact=args.exact)
    print("n,h,k,a,H", file=out)
    print(_row(args.n, args.h, args.k, args.a, float(H)), file=out)
    return 0


def _rule(args):
    if args.base is not None:
        return lambda n, d, table: args.base ** n + args.offset
    if args.const is not None:
        return lambda n, d, table: args.const
    return None


def cmd_converge(args, out) -> int:
    d = _dist(args)
    table = seneta_heyde(d, c0=args.c0)
    regime = ver.RegimeSpec(args.regime, theta=args.theta, rule=_rule(args))
    rows = ver.ratio_convergence_report(d, regime, args.h, args.k, range(args.nmin, args.nmax + 1), table)
    print("n,a_n,H_n,limit,rel_dev", file=out)
    for r in rows:
        print(_row(r.n, r.a, r.H, r.limit, r.rel_dev), file=out)
    for n, target, a in regime.corrections:
        print(f"# n={n}: target {fmt(target)} corrected to reachable {a}", file=out)
    if args.tol is not None and rows and rows[-1].rel_dev >= args.tol:
        return 1
    return 0


def cmd_equiv(args, out) -> int:
    results = ver.equivalence_suite(args.draws, args.seed, workers=args.threads)
    print("name,draws,statistic,dof,p_value,passed", file=out)
    for r in results:
        print(_row(r.name, r.draws, r.test.statistic, r.test.dof, r.test.p_value, r.passed), file=out)
    return 0 if all(r.passed for r in results) else 1


def cmd_subcritical(args, out) -> int:
    d = _dist(args)
    rep = ver.check_subcritical(d, args.h, args.n, args.a)
    print("kappa,tree_gap,conditioned_gap,trees,passed", file=out)
    print(_row(rep.kappa, rep.tree_gap, rep.conditioned_gap, rep.trees, rep.passed), file=out)
    return 0 if rep.passed else 1


def cmd_asymptotics(args, out) -> int:
    d = _dist(args)
    table = seneta_heyde(d, c0=args.c0)
    print("x,approx,exact_or_fourier,log_ratio", file=out)
    if args.kind == "pmf":
        if args.n is None or not args.a_list:
            raise UsageError("--n and --a-list are required for --kind pmf")
        for a in (int(v) for v in _floats(args.a_list, "--a-list")):
            la = asy.saddlepoint_pmf(d, args.ell, args.n, a, table).log_value
            le = log_pmf_k(d, args.ell, args.n, a)
            print(_row(a, math.exp(la), math.exp(le), la / le), file=out)
        return 0
    side = asy.HARRIS if args.kind == "right" else asy.BOETTCHER
    for x, la, lw, ratio in asy.tail_comparison(d, args.ell, _grid(args), table, side):
        print(_row(x, math.exp(la), math.exp(lw), ratio), file=out)
    return 0


# ------------------------------------------------------------------ parser
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dist", help="offspring law: 'k:p,k:p,...' or 'geometric:eta,q'")
    common.add_argument("--seed", type=int, default=0, help="master RNG seed (default 0)")
    common.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--c0", type=float, default=None, help="norming seed c_0")

    p = argparse.ArgumentParser(prog="gwlimits", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("law", parents=[common], help="law of Z_n; CSV a,prob")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--cap", type=int)
    s.add_argument("--exact", action="store_true", help="rational arithmetic; adds column exact")
    s.add_argument("--all", action="store_true", help="also print zero rows")
    s.set_defaults(func=cmd_law)

    s = sub.add_parser("norming", parents=[common],
                       help="Seneta-Heyde table; CSV n,c_n,ratio,residual")
    s.add_argument("--N", type=int, default=40)
    s.add_argument("--check", action="store_true", help="exit 1 if a residual is >= 1e-13")
    s.set_defaults(func=cmd_norming)

    def grid_flags(s):
        s.add_argument("--x", help="comma-separated points")
        s.add_argument("--xmin", type=float)
        s.add_argument("--xmax", type=float)
        s.add_argument("--points", type=int, default=50)
        s.add_argument("--log", action="store_true", help="geometric spacing")

    s = sub.add_parser("density", parents=[common], help="w^{*l} on a grid; CSV x,value,err")
    s.add_argument("--ell", type=int, default=1)
    grid_flags(s)
    s.set_defaults(func=cmd_density)

    s = sub.add_parser("rho", parents=[common], help="backbone law; CSV s_1,...,s_r,prob (or draws with --draws)")
    s.add_argument("--theta", type=float, required=True)
    s.add_argument("--r", type=int, required=True)
    s.add_argument("--draws", type=int, default=0)
    s.set_defaults(func=cmd_rho)

    s = sub.add_parser("sample", parents=[common], help="random trees as NDJSON")
    s.add_argument("--family", required=True,
                   choices=["gw", "conditioned", "kesten", "theta", "lambda", "lambda_e", "lambda_n"])
    s.add_argument("--depth", type=int, default=3)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--n", type=int)
    s.add_argument("--a", type=int)
    s.add_argument("--theta", type=float)
    s.add_argument("--lam", help="tilt lambda, or 'critical'")
    s.add_argument("--root-children", type=int, dest="root_children")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("ratio", parents=[common], help="H_n(h,k); CSV n,h,k,a,H")
    for f in ("--n", "--h", "--k", "--a"):
        s.add_argument(f, type=int, required=True)
    s.add_argument("--exact", action="store_true")
    s.set_defaults(func=cmd_ratio)

    s = sub.add_parser("converge", parents=[common],
                       help="strong-ratio convergence; CSV n,a_n,H_n,limit,rel_dev")
    s.add_argument("--regime", required=True, choices=[ver.EXTINCTION, ver.LOW, ver.MODERATE, ver.HIGH])
    s.add_argument("--theta", type=float)
    s.add_argument("--h", type=int, default=1)
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--nmin", type=int, default=1)
    s.add_argument("--nmax", type=int, default=15)
    s.add_argument("--base", type=int, help="a_n = base^n + offset")
    s.add_argument("--offset", type=int, default=0)
    s.add_argument("--const", type=int, help="a_n = const")
    s.add_argument("--tol", type=float, help="exit 1 if the last rel_dev is >= tol")
    s.set_defaults(func=cmd_converge)

    s = sub.add_parser("equiv", parents=[common],
                       help="sampler/law chi-square suite; CSV name,draws,statistic,dof,p_value,passed")
    s.add_argument("--draws", type=int, default=100_000)
    s.set_defaults(func=cmd_equiv)

    s = sub.add_parser("subcritical", parents=[common],
                       help="subcritical transfer; CSV kappa,tree_gap,conditioned_gap,trees,passed")
    s.add_argument("--h", type=int, default=2)
    s.add_argument("--n", type=int, default=3)
    s.add_argument("--a", type=int, default=2)
    s.set_defaults(func=cmd_subcritical)

    s = sub.add_parser("asymptotics", parents=[common],
                       help="tail or pmf approximations; CSV x,approx,exact_or_fourier,log_ratio")
    s.add_argument("--kind", choices=["right", "left", "pmf"], required=True)
    s.add_argument("--ell", type=int, default=1)
    s.add_argument("--n", type=int)
    s.add_argument("--a-list", dest="a_list", help="comma-separated targets for --kind pmf")
    grid_flags(s)
    s.set_defaults(func=cmd_asymptotics)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    buf = io.StringIO()
    header = f"# seed={args.seed} command={args.command} " + " ".join(
        f"{k}={v}" for k, v in sorted(vars(args).items())
        if k not in ("func", "command", "seed") and v is not None and v is not False)
    print(header.rstrip(), file=buf)
    try:
        code = args.func(args, buf)
    except UsageError as e:
        print(f"gwlimits {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (ValueError, UnreachableTargetError, OffspringError) as e:
        print(f"gwlimits {args.command}: error: {e}", file=sys.stderr)
        return 2
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
