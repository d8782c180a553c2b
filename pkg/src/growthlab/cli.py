"""Command-line experiment runner.  Every subcommand writes one CSV table.

Exit codes: 0 success, 1 usage, 2 mathematical precondition, 3 budget.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import approxgrp, cayley, matgroup, sumprod, varieties
from .errors import BudgetError, GrowthLabError, PreconditionError
from .finfield import is_prime, make_field
from .matgroup import Elem, ElemSet, GroupCtx
from .rng import substream, worker_count


class UsageError(GrowthLabError):
    exit_code = 1


@dataclass
class RunConfig:
    subcommand: str
    n: int = 2
    p: int = 0
    k: int = 1
    gens: str = "elementary"
    set: str = "full-group"
    set_b: str = ""
    m: int = 1
    trials: int = 0
    seed: int = 0
    output: str = "-"
    extra: dict = field(default_factory=dict)

    def header(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))


# -- formatting ---------------------------------------------------------------------


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        v = float(v)
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{float(v):.6g}"
    return str(int(v)) if isinstance(v, (np.integer,)) else str(v)


def render(config: RunConfig, columns: Sequence[str], rows: Sequence[Sequence], deterministic: bool) -> str:
    buf = io.StringIO()
    buf.write(f"# growthlab {config.subcommand}\n")
    buf.write(f"# config: {config.header()}\n")
    if not deterministic:
        buf.write(f"# timestamp: {_dt.datetime.now(_dt.timezone.utc).isoformat()}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


# -- argument parsing helpers -------------------------------------------------------------


def parse_primes(text: str) -> list[int]:
    """'11..61' (all primes in range) or a comma list."""
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split(".."))
            return [x for x in range(lo, hi + 1) if is_prime(x)]
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"cannot parse prime list {text!r}") from None
    for x in out:
        if not is_prime(x):
            raise PreconditionError(f"{x} is not prime")
    return out


def parse_matrices(ctx: GroupCtx, text: str) -> list[Elem]:
    """Matrices as row-major entry lists separated by ';', e.g. '1,1,0,1;1,0,1,1'."""
    out = []
    for chunk in text.split(";"):
        try:
            vals = [int(x) for x in chunk.split(",")]
        except ValueError:
            raise UsageError(f"cannot parse matrix {chunk!r}") from None
        if len(vals) != ctx.n * ctx.n:
            raise UsageError(f"matrix {chunk!r} needs {ctx.n * ctx.n} entries")
        out.append(ctx.elem(vals))
    return out


def build_gens(ctx: GroupCtx, spec: str) -> ElemSet:
    """elementary | random:SEED[:COUNT] | explicit matrices."""
    if spec == "elementary":
        return ElemSet.from_elems(ctx, ctx.elementary_generators())
    if spec.startswith("random:"):
        parts = spec.split(":")
        try:
            seed = int(parts[1])
            count = int(parts[2]) if len(parts) > 2 else 2
        except (ValueError, IndexError):
            raise UsageError(f"cannot parse generator spec {spec!r}") from None
        mats = matgroup.random_matrices(ctx, count, substream(seed, f"gens:{ctx!r}"))
        return ElemSet.from_matrices(ctx, mats)
    if spec.startswith("explicit:"):
        spec = spec[len("explicit:") :]
    if not spec or not spec[0].isdigit():
        raise UsageError(f"cannot parse generator spec {spec!r}")
    return ElemSet.from_elems(ctx, parse_matrices(ctx, spec))


def build_set(ctx: GroupCtx, spec: str, gens: str, seed: int) -> ElemSet:
    """full-group | gens | ball:R | random:SIZE | split-torus | upper-triangular | center."""
    name, _, arg = spec.partition(":")
    try:
        if name == "full-group":
            return matgroup.enumerate_group(ctx)
        if name == "gens":
            return build_gens(ctx, gens)
        if name == "ball":
            return matgroup.ball(build_gens(ctx, gens), int(arg or 1))
        if name == "random":
            return matgroup.random_symmetric_set(ctx, int(arg), substream(seed, f"set:{ctx!r}:{arg}"))
        if name == "split-torus":
            return matgroup.enumerate_group(ctx).filter(varieties.split_torus(ctx).membership)
        if name == "upper-triangular":
            rows, cols = np.tril_indices(ctx.n, -1)
            return matgroup.enumerate_group(ctx).filter(lambda m: np.all(m[:, rows, cols] == 0, axis=1))
        if name == "center":
            return matgroup.center(ctx)
    except ValueError:
        raise UsageError(f"cannot parse set spec {spec!r}") from None
    raise UsageError(f"unknown set spec {spec!r}")


def build_variety(ctx: GroupCtx, spec: str, gens: str) -> varieties.VarietySpec:
    name, _, arg = spec.partition(":")
    if name == "split-torus":
        return varieties.split_torus(ctx)
    if name == "singular":
        return varieties.singular_set(ctx)
    if name in ("centralizer", "torus", "class"):
        g = parse_matrices(ctx, arg)[0] if arg else next(iter(build_gens(ctx, gens)))
        if name == "centralizer":
            return varieties.centralizer(ctx, g)
        if name == "torus":
            return varieties.maximal_torus(ctx, g)
        return varieties.conjugacy_class(ctx, g)
    raise UsageError(f"unknown variety {spec!r}")


# -- subcommands --------------------------------------------------------------------------


def cmd_order(cfg, ctx, args):
    return ["n", "q", "order"], [[ctx.n, ctx.q, matgroup.group_order(ctx)]]


def cmd_growth(cfg, ctx, args):
    S = build_gens(ctx, cfg.gens).symmetrize()
    rep = approxgrp.growth_iterate(S, args.delta)
    rows = []
    for j, (i, size) in enumerate(zip(rep.radii, rep.sizes)):
        ratio = rep.tripling_ratios[j - 1] if j else None
        rows.append([ctx.n, ctx.q, i, 3**i, size, ratio, math.log(size) / math.log(rep.group_order), rep.verdict, rep.partial])
    return ["n", "q", "round", "radius", "size", "tripling_ratio", "log_size_over_log_order", "verdict", "partial"], rows


def cmd_approx_cert(cfg, ctx, args):
    A = build_set(ctx, cfg.set, cfg.gens, cfg.seed)
    cert = approxgrp.approx_certify(A)
    ok = approxgrp.verify_cover(approxgrp.product_set(A, A), cert.X, A)
    return ["n", "q", "set", "set_size", "K_certified", "method", "verified"], [
        [ctx.n, ctx.q, cfg.set, len(A), cert.K_certified, cert.method, ok]
    ]


def cmd_control(cfg, ctx, args):
    A = build_set(ctx, cfg.set, cfg.gens, cfg.seed)
    B = build_set(ctx, cfg.set_b or cfg.set, cfg.gens, cfg.seed)
    res = approxgrp.control_certify(A, B, args.K)
    return ["n", "q", "size_a", "size_b", "K", "X_size", "ok"], [[ctx.n, ctx.q, len(A), len(B), res.K, len(res.X), res.ok]]


def cmd_diameter(cfg, ctx, args):
    if ctx.order > matgroup.ENUM_CAP:
        raise BudgetError(f"group order {ctx.order} exceeds the enumeration cap {matgroup.ENUM_CAP}")
    S = build_gens(ctx, cfg.gens)
    rep = cayley.cayley_report(S, cfg.gens)
    if rep.diameter is None:
        raise PreconditionError(f"S generates a proper subgroup of size {rep.ball_sizes[-1]} (|G| = {ctx.order})")
    bound = cayley.counting_bound(ctx.order, rep.step_size)
    if args.profile:
        return ["n", "q", "radius", "ball_size"], [[ctx.n, ctx.q, r, s] for r, s in enumerate(rep.ball_sizes)]
    return ["n", "q", "order", "generators", "step_size", "diameter", "counting_bound"], [
        [ctx.n, ctx.q, ctx.order, cfg.gens, rep.step_size, rep.diameter, bound]
    ]


def cmd_girth(cfg, ctx, args):
    S = list(build_gens(ctx, cfg.gens))
    if len(S) != 2:
        raise UsageError("girth needs exactly two generators")
    g = cayley.girth(S[0], S[1], args.budget)
    return ["n", "q", "a", "b", "girth", "budget"], [
        [ctx.n, ctx.q, S[0].key, S[1].key, g if g is not None else "not-found", args.budget or cayley.girth_budget(ctx)]
    ]


def cmd_random_stats(cfg, ctx, args):
    stats = cayley.random_generator_stats(ctx, cfg.trials, cfg.seed, None if not args.no_diameter else False)
    rows = [[ctx.n, ctx.q, t.trial, t.a, t.b, t.generates, t.closure_size, t.diameter, t.girth] for t in stats.trials]
    return ["n", "q", "trial", "a", "b", "generates", "closure_size", "diameter", "girth"], rows


def cmd_lp(cfg, ctx, args):
    A = build_set(ctx, cfg.set, cfg.gens, cfg.seed)
    V = build_variety(ctx, args.variety, cfg.gens)
    rep = varieties.lp_exponent(A, V, cfg.m)
    return ["n", "q", "variety", "set_size", "m", "intersection", "predicted", "observed", "degenerate"], [
        [ctx.n, ctx.q, args.variety, rep.set_size, rep.m, rep.intersection_size, rep.predicted_exponent, rep.observed_exponent, rep.degenerate]
    ]


def cmd_tori(cfg, ctx, args):
    A = build_set(ctx, cfg.set, cfg.gens, cfg.seed)
    c = varieties.involved_tori(A)
    if args.per_torus:
        rows = []
        for tid in sorted(c.tori):
            T = c.torus_points[tid]
            if ctx.n == 2 and ctx.field.k == 1:
                t = int(ctx.trace(ctx.decode_one(tid)))
                split = ctx.field.is_square(ctx.field.sub(ctx.field.mul(t, t), 4)) == "yes"
            else:
                split = None
            rows.append([ctx.n, ctx.q, tid, len(T), split, c.tori[tid], c.regular_in_torus[tid]])
        return ["n", "q", "torus_id", "torus_size", "split", "points_in_square", "regular_in_square"], rows
    return [
        "n", "q", "set_size", "square_size", "involved_count", "exponent_observed", "predicted", "central",
        "nonregular_noncentral", "partition_ok",
    ], [[ctx.n, ctx.q, c.set_size, c.square_size, c.involved_count, c.exponent_observed, c.predicted, c.central,
         c.nonregular_noncentral, c.partition_holds()]]


def cmd_invariance(cfg, ctx, args):
    A = build_set(ctx, cfg.set, cfg.gens, cfg.seed)
    c = varieties.involved_tori(A)
    frac = varieties.conjugation_invariance(A, c)
    return ["n", "q", "set_size", "involved_count", "fraction"], [[ctx.n, ctx.q, len(A), c.involved_count, frac]]


def cmd_conj_product(cfg, ctx, args):
    T = varieties.torus_spec(ctx, build_set(ctx, "split-torus", cfg.gens, cfg.seed))
    a = matgroup.random_element(ctx, cfg.seed, "conj-product")
    rep = varieties.conjugate_product_growth(T, a, T)
    return ["n", "q", "conjugator", "torus_size", "product_size", "overlap"], [
        [ctx.n, ctx.q, "random", rep.torus_sizes[0], rep.size, rep.overlap],
        [ctx.n, ctx.q, "normalizing", rep.torus_sizes[0], rep.normalizing_size, None],
    ]


def cmd_dim_fit(cfg, ctx, args):
    primes = parse_primes(args.primes)

    def family(p):
        g = matgroup.make_group(cfg.n, p)
        return build_variety(g, args.variety, "elementary") if args.variety != "group" else g.order

    counts = [(p, family(p) if args.variety == "group" else varieties.variety_point_count(family(p))) for p in primes]
    slope = varieties.empirical_dimension(dict(counts).__getitem__, primes)
    return ["n", "variety", "p", "count", "slope"], [[cfg.n, args.variety, p, c, slope] for p, c in counts]


def cmd_sumprod(cfg, ctx, args):
    fams = sumprod.FAMILIES if args.family == "all" else tuple(args.family.split(","))
    sizes = [cfg.m] if cfg.m > 1 else None
    rows = sumprod.dichotomy_scan(ctx.p, fams, sizes, args.K_thresh, cfg.seed)
    return ["p", "family", "size", "sum_size", "prod_size", "K_obs", "flagged"], [
        [ctx.p, r.family, r.size, r.sum_size, r.prod_size, r.K_obs, r.flagged] for r in rows
    ]


def cmd_lift(cfg, ctx, args):
    A = sumprod.build_family(args.family, ctx.field, cfg.m, cfg.seed)
    X = sumprod.lift_SL2(A)
    tr = approxgrp.tripling(X) if args.tripling else None
    return ["p", "family", "set_size", "lift_size", "tripling_ratio"], [
        [ctx.p, args.family, len(A), len(X), tr.ratio if tr else None]
    ]


def cmd_gen_test(cfg, ctx, args):
    S = build_gens(ctx, cfg.gens) if cfg.set in ("full-group", "gens") else build_set(ctx, cfg.set, cfg.gens, cfg.seed)
    v = sumprod.dickson_gen_test(S, args.method, seed=cfg.seed)
    return ["p", "generators", "verdict", "method", "size", "quadruples_tried"], [
        [ctx.p, cfg.gens, v.verdict, v.method, v.size, v.quadruples_tried]
    ]


def cmd_gowers(cfg, ctx, args):
    thr = approxgrp.gowers_threshold(ctx, args.d_min)
    size = math.floor(thr) + 1
    rows = []
    for t in range(cfg.trials):
        A = matgroup.random_symmetric_set(ctx, size, substream(cfg.seed, f"gowers:{ctx!r}:{t}"))
        res = approxgrp.gowers_check(ctx, A, args.d_min)
        rows.append([ctx.n, ctx.q, t, res.size, res.threshold, res.precondition, res.cube_size, res.cube_is_group])
    return ["n", "q", "trial", "set_size", "threshold", "precondition", "cube_size", "cube_is_group"], rows


def _member_predicate(ctx: GroupCtx, spec: str):
    """center | exponent:E (elements with g^E = 1)."""
    if spec == "center":
        return ctx.scalar_mask
    name, _, arg = spec.partition(":")
    if name == "exponent" and arg.isdigit():
        e = int(arg)
        ident = ctx.identity_matrix()

        def member(m):
            acc = np.broadcast_to(ident, m.shape).copy()
            for _ in range(e):
                acc = ctx.matmul(acc, m)
            return np.all(acc == ident, axis=(-2, -1))

        return member
    raise UsageError(f"unknown subgroup spec {spec!r}")


def cmd_finite_index(cfg, ctx, args):
    S = build_gens(ctx, cfg.gens).symmetrize()
    ok = matgroup.finite_index_generation_check(ctx, S, _member_predicate(ctx, args.subgroup), args.index)
    return ["n", "q", "generators", "subgroup", "index", "generated"], [[ctx.n, ctx.q, cfg.gens, args.subgroup, args.index, ok]]


def cmd_fit(cfg, ctx, args):
    reports = []
    for p in parse_primes(args.primes):
        g = matgroup.make_group(cfg.n, p)
        reports.append(cayley.cayley_report(build_gens(g, cfg.gens), cfg.gens))
    c1, c2 = cayley.scaling_fit(reports)
    return ["n", "p", "order", "diameter", "C1", "C2"], [[r.n, r.p, r.group_order, r.diameter, c1, c2] for r in reports]


COMMANDS = {
    "order": cmd_order,
    "growth": cmd_growth,
    "approx-cert": cmd_approx_cert,
    "control": cmd_control,
    "diameter": cmd_diameter,
    "girth": cmd_girth,
    "random-stats": cmd_random_stats,
    "lp": cmd_lp,
    "tori": cmd_tori,
    "invariance": cmd_invariance,
    "conj-product": cmd_conj_product,
    "dim-fit": cmd_dim_fit,
    "sumprod": cmd_sumprod,
    "lift": cmd_lift,
    "gen-test": cmd_gen_test,
    "gowers": cmd_gowers,
    "fit": cmd_fit,
    "finite-index": cmd_finite_index,
}

# subcommands whose group parameters are not used directly
_NO_GROUP = {"dim-fit", "fit"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--n", type=int, default=2)
    common.add_argument("--p", type=int, default=None)
    common.add_argument("--k", type=int, default=1)
    common.add_argument("--gens", default="elementary", help="elementary | random:SEED[:COUNT] | matrices 'a,b,c,d;...'")
    common.add_argument("--set", default="full-group", help="full-group | gens | ball:R | random:SIZE | split-torus | upper-triangular | center")
    common.add_argument("--set-b", default="")
    common.add_argument("--m", type=int, default=1, help="power, radius or size, depending on the subcommand")
    common.add_argument("--trials", type=int, default=0)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-o", "--output", default="-")
    common.add_argument("--deterministic", action="store_true", help="omit the timestamp comment line")

    parser = _Parser(prog="growthlab", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "growth":
            sp.add_argument("--delta", type=float, default=0.1)
        elif name == "control":
            sp.add_argument("--K", type=int, default=None)
        elif name == "diameter":
            sp.add_argument("--profile", action="store_true")
        elif name == "girth":
            sp.add_argument("--budget", type=int, default=None)
        elif name == "random-stats":
            sp.add_argument("--no-diameter", action="store_true")
        elif name in ("lp", "dim-fit"):
            sp.add_argument("--variety", default="split-torus")
            if name == "dim-fit":
                sp.add_argument("--primes", default="11..61")
        elif name == "tori":
            sp.add_argument("--per-torus", action="store_true")
        elif name == "sumprod":
            sp.add_argument("--family", default="all")
            sp.add_argument("--K-thresh", type=float, default=1.5)
        elif name == "lift":
            sp.add_argument("--family", default="GP")
            sp.add_argument("--tripling", action="store_true")
        elif name == "gen-test":
            sp.add_argument("--method", default="auto", choices=["auto", "closure", "search"])
        elif name == "gowers":
            sp.add_argument("--d-min", type=int, default=None)
        elif name == "fit":
            sp.add_argument("--primes", default="11..61")
        elif name == "finite-index":
            sp.add_argument("--subgroup", default="center", help="center | exponent:E")
            sp.add_argument("--index", type=int, required=True)
    return parser


_EXTRA_KEYS = ("delta", "K", "profile", "budget", "no_diameter", "variety", "primes", "per_torus", "family", "K_thresh",
               "tripling", "method", "d_min", "subgroup", "index")


def run(argv: Sequence[str] | None = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        worker_count()
        extra = {k: getattr(args, k) for k in _EXTRA_KEYS if hasattr(args, k)}
        cfg = RunConfig(args.subcommand, args.n, args.p or 0, args.k, args.gens, args.set, args.set_b, args.m,
                        args.trials, args.seed, args.output, extra)
        if args.subcommand in _NO_GROUP:
            ctx = None
        else:
            if args.p is None:
                raise UsageError("--p is required")
            field_ = make_field(args.p, args.k)
            ctx = matgroup.make_group(args.n, field_.p, field_.k)
        columns, rows = COMMANDS[args.subcommand](cfg, ctx, args)
        text = render(cfg, columns, rows, args.deterministic)
    except GrowthLabError as exc:
        print(f"growthlab: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"growthlab: error: {exc}", file=sys.stderr)
        return 1
    if args.output == "-":
        stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
