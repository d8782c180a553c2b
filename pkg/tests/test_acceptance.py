"""One test per acceptance criterion.  Each records a PASS/FAIL line that is
repeated in the pytest terminal summary."""

import math
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from growthlab.approxgrp import gowers_check, gowers_threshold, growth_iterate
from growthlab.cayley import counting_bound, cayley_report, random_generator_stats, random_pair, scaling_fit
from growthlab.finfield import primes_between
from growthlab.matgroup import (
    ElemSet,
    closure,
    enumerate_group,
    finite_index_generation_check,
    is_regular_ss,
    make_group,
    random_symmetric_set,
    sl_order,
)
from growthlab.rng import substream
from growthlab.sumprod import (
    arithmetic_progression,
    dickson_gen_test,
    geometric_progression,
    subfield_in_extension,
    sum_prod_sizes,
)
from growthlab.finfield import make_field
from growthlab.varieties import involved_tori, lp_exponent, singular_set, split_torus

# pinned after the first oracle run of the diameter fit (elementary generators, p = 11..61)
C2_GUARD = 2.0


def _commutation_classes(ctx, elements):
    """Independent torus grouping: regular semisimple elements of A^2 grouped
    by commutation, comparing each element with one representative per class."""
    ms = elements.matrices
    sq = ctx.matmul(ms[:, None], ms[None]).reshape(-1, 2, 2)
    uniq = {ctx.encode_one(m): m for m in sq}
    reps = []
    for m in uniq.values():
        if not is_regular_ss(ctx, ctx.elem(m.ravel().tolist())):
            continue
        if not any(np.array_equal(ctx.matmul(m, r), ctx.matmul(r, m)) for r in reps):
            reps.append(m)
    return len(reps)


def test_criterion_01_order_exactness(criterion):
    t0 = time.perf_counter()
    cases = [(2, 2), (2, 3), (2, 5), (2, 7), (3, 2), (3, 3)]
    got = {(n, q): len(enumerate_group(make_group(n, q))) for n, q in cases}
    elapsed = time.perf_counter() - t0
    ok = all(got[c] == sl_order(*c) for c in cases) and elapsed < 5
    assert criterion(1, ok, f"orders {list(got.values())} in {elapsed:.2f}s")


def test_criterion_02_larsen_pink_exponents(criterion):
    t0 = time.perf_counter()
    counts = {}
    for p in (31, 61, 101):
        ctx = make_group(2, p)
        counts[p] = lp_exponent(enumerate_group(ctx), split_torus(ctx)).intersection_size
    ctx = make_group(2, 101)
    G = enumerate_group(ctx)
    torus = lp_exponent(G, split_torus(ctx))
    sing = lp_exponent(G, singular_set(ctx))
    elapsed = time.perf_counter() - t0
    counts_ok = all(counts[p] == p - 1 for p in counts)
    torus_ok = abs(torus.observed_exponent - 1 / 3) <= 0.02
    sing_ok = abs(sing.observed_exponent - 2 / 3) <= 0.05
    ok = counts_ok and torus_ok and sing_ok and elapsed < 30
    detail = (
        f"|A∩V| {counts}; torus exponent {torus.observed_exponent:.6f} (±0.02 of 1/3: {torus_ok}); "
        f"singular exponent {sing.observed_exponent:.6f} from {sing.intersection_size} points "
        f"(±0.05 of 2/3: {sing_ok}); {elapsed:.1f}s"
    )
    assert criterion(2, ok, detail)


def test_criterion_03_involved_tori(criterion):
    t0 = time.perf_counter()
    results = {}
    for p in (3, 5, 7):
        ctx = make_group(2, p)
        G = enumerate_group(ctx)
        census = involved_tori(G)
        oracle = _commutation_classes(ctx, G) if p <= 5 else None
        results[p] = (census.involved_count, oracle, census.partition_holds())
    elapsed = time.perf_counter() - t0
    ok = elapsed < 60
    for p, (count, oracle, partition) in results.items():
        ok &= count == p * p and partition and (oracle is None or oracle == count)
    detail = ", ".join(f"p={p}: count {c} (want {p * p}), oracle {o}, partition {part}" for p, (c, o, part) in results.items())
    assert criterion(3, ok, f"{detail}; {elapsed:.1f}s")


def test_criterion_04_centralizer_dichotomy(criterion):
    t0 = time.perf_counter()
    checked = 0
    ok = True
    for q in (5, 7, 11):
        ctx = make_group(2, q)
        F = ctx.field
        G = enumerate_group(ctx)
        ms = G.matrices
        for g, gm in zip(G, ms):
            if not is_regular_ss(ctx, g):
                continue
            size = int(np.all(ctx.matmul(ms, gm[None]) == ctx.matmul(gm[None], ms), axis=(1, 2)).sum())
            t = int(ctx.trace(gm))
            split = F.is_square((t * t - 4) % q) == "yes"
            ok &= size == (q - 1 if split else q + 1)
            checked += 1
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 10
    assert criterion(4, ok, f"{checked} regular semisimple elements checked in {elapsed:.1f}s")


def test_criterion_05_gowers_generation(criterion):
    t0 = time.perf_counter()
    tallies = {}
    for p in (5, 7, 11, 13):
        ctx = make_group(2, p)
        d_min = (p - 1) // 2
        size = math.floor(gowers_threshold(ctx, d_min)) + 1
        good = 0
        for t in range(20):
            A = random_symmetric_set(ctx, size, substream(0, f"gowers:{ctx!r}:{t}"))
            res = gowers_check(ctx, A, d_min)
            good += res.precondition and res.cube_is_group
        tallies[p] = good
    elapsed = time.perf_counter() - t0
    ok = all(v == 20 for v in tallies.values()) and elapsed < 60
    assert criterion(5, ok, f"A^3 = G counts {tallies} (20 each required); {elapsed:.1f}s")


def test_criterion_06_diameter_sanity(criterion):
    t0 = time.perf_counter()
    reports = []
    bound_ok = True
    for p in primes_between(11, 61):
        ctx = make_group(2, p)
        rep = cayley_report(ElemSet.from_elems(ctx, ctx.elementary_generators()), "elementary")
        bound_ok &= rep.diameter is not None and rep.diameter >= counting_bound(rep.group_order, rep.step_size)
        reports.append(rep)
    c1, c2 = scaling_fit(reports)
    elapsed = time.perf_counter() - t0
    ok = bound_ok and c2 <= C2_GUARD and elapsed < 300
    diams = [r.diameter for r in reports]
    assert criterion(6, ok, f"diameters {diams}; C1={c1:.4f} C2={c2:.4f} (guard {C2_GUARD}); {elapsed:.1f}s")


def test_criterion_07_girth_trend(criterion):
    t0 = time.perf_counter()
    medians = []
    for p in (31, 61, 127):
        stats = random_generator_stats(make_group(2, p), 50, seed=1, with_diameter=False)
        vals = [t.girth if t.girth is not None else math.inf for t in stats.trials]
        medians.append(statistics.median(vals))
    elapsed = time.perf_counter() - t0
    ok = all(a <= b for a, b in zip(medians, medians[1:])) and elapsed < 300
    assert criterion(7, ok, f"median girths {medians} at p=31,61,127; {elapsed:.1f}s")


def test_criterion_08_growth_dichotomy(criterion):
    t0 = time.perf_counter()
    runs = 0
    ok = True
    for p in primes_between(11, 31):
        ctx = make_group(2, p)
        corpus = [ElemSet.from_elems(ctx, ctx.elementary_generators())]
        for t in range(4):
            corpus.append(ElemSet.from_elems(ctx, list(random_pair(ctx, 8, t))))
        for gens in corpus:
            if len(closure(ctx, gens)) != ctx.order:
                continue
            rep = growth_iterate(gens.symmetrize())
            strict = all(b > a for a, b in zip(rep.sizes, rep.sizes[1:]))
            ok &= rep.verdict == "reached-near-full" and strict and rep.sizes[-1] >= ctx.order**0.9
            runs += 1
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120
    assert criterion(8, ok, f"{runs} generating sets grew to |G|^0.9 without stalling; {elapsed:.1f}s")


def test_criterion_09_sum_product(criterion):
    t0 = time.perf_counter()
    F = make_field(1009)
    ap = arithmetic_progression(F, 50)
    gp = geometric_progression(F, 50)
    sub = subfield_in_extension(7)
    ap_s, ap_m = sum_prod_sizes(ap)
    gp_s, gp_m = sum_prod_sizes(gp)
    sub_s, sub_m = sum_prod_sizes(sub)
    # oracle: plain double loops
    oracle = lambda A: (  # noqa: E731
        len({A.field.add(a, b) for a in A for b in A}),
        len({A.field.mul(a, b) for a in A for b in A}),
    )
    oracle_ok = oracle(ap) == (ap_s, ap_m) and oracle(gp) == (gp_s, gp_m) and oracle(sub) == (sub_s, sub_m)
    bound = 50**1.5
    elapsed = time.perf_counter() - t0
    ok = oracle_ok and ap_s == 99 and ap_m >= bound and gp_m == 99 and gp_s >= bound and sub_s == sub_m == 7
    ok &= elapsed < 10
    detail = f"AP ({ap_s}, {ap_m}), GP ({gp_s}, {gp_m}), subfield ({sub_s}, {sub_m}); oracle agrees {oracle_ok}"
    assert criterion(9, ok, detail)


def test_criterion_10_dickson_agreement(criterion):
    t0 = time.perf_counter()
    total = agree = 0
    for p in primes_between(5, 101):
        ctx = make_group(2, p)
        inv2 = pow(2, -1, p)
        corpus = [
            ElemSet.from_elems(ctx, ctx.elementary_generators()),
            ElemSet.from_elems(ctx, [ctx.elem([1, 1, 0, 1]), ctx.elem([2, 0, 0, inv2])]),
            ElemSet.from_elems(ctx, [ctx.identity(), ctx.elem([p - 1, 0, 0, p - 1])]),
            ElemSet.from_elems(ctx, list(random_pair(ctx, 10, 0))),
        ]
        for S in corpus:
            exact = len(closure(ctx, S)) == ctx.order
            for method in ("auto", "search"):
                total += 1
                agree += (dickson_gen_test(S, method=method).verdict == "generates_SL2") == exact
    elapsed = time.perf_counter() - t0
    ok = agree == total and elapsed < 120
    assert criterion(10, ok, f"{agree}/{total} verdicts agree with exact closure; {elapsed:.1f}s")


def test_criterion_11_finite_index_lemma(criterion):
    t0 = time.perf_counter()
    ctx3 = make_group(2, 3)
    ident = ctx3.identity_matrix()

    def q8(m):
        m2 = ctx3.matmul(m, m)
        return np.all(ctx3.matmul(m2, m2) == ident, axis=(-2, -1))

    S3 = ElemSet.from_elems(ctx3, ctx3.elementary_generators()).symmetrize()
    r1 = finite_index_generation_check(ctx3, S3, q8, 3)
    ctx5 = make_group(2, 5)
    S5 = ElemSet.from_elems(ctx5, ctx5.elementary_generators()).symmetrize()
    r2 = finite_index_generation_check(ctx5, S5, ctx5.scalar_mask, 60)
    elapsed = time.perf_counter() - t0
    ok = r1 and r2 and elapsed < 10
    assert criterion(11, ok, f"(SL_2(F_3), Q_8, 3) -> {r1}; (SL_2(F_5), ±I, 60) -> {r2}")


DETERMINISM_RUNS = [
    ["order", "--n", "3", "--p", "3"],
    ["growth", "--p", "13", "--gens", "random:4"],
    ["girth", "--p", "31", "--gens", "random:7"],
    ["random-stats", "--p", "13", "--trials", "6", "--seed", "5"],
    ["gowers", "--p", "7", "--trials", "3", "--seed", "2"],
    ["sumprod", "--p", "101", "--family", "random,AP", "--seed", "9"],
    ["conj-product", "--p", "13", "--seed", "4"],
    ["approx-cert", "--p", "7", "--set", "random:20", "--seed", "3"],
    ["gen-test", "--p", "127", "--gens", "random:3", "--method", "search"],
    ["finite-index", "--p", "3", "--subgroup", "exponent:4", "--index", "3"],
]


def test_criterion_12_determinism(criterion):
    mismatched = []
    for argv in DETERMINISM_RUNS:
        outputs = set()
        for threads in ("1", "1", "4"):
            env = dict(os.environ, GROWTHLAB_THREADS=threads)
            res = subprocess.run(
                [sys.executable, "-m", "growthlab", *argv, "--deterministic"],
                capture_output=True,
                env=env,
                check=False,
            )
            outputs.add((res.returncode, res.stdout))
        if len(outputs) != 1 or next(iter(outputs))[0] != 0:
            mismatched.append(argv[0])
    ok = not mismatched
    assert criterion(12, ok, f"{len(DETERMINISM_RUNS)} subcommands byte-identical across runs and thread counts; mismatches {mismatched}")
