"""Membership predicates for standard subvarieties of SL_n and the
point-counting experiments built on them: intersection exponents, the
involved-tori census, conjugation invariance, conjugate products and
empirical dimension."""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

import numpy as np

from .approxgrp import power_set
from .errors import PreconditionError
from .matgroup import (
    PAIR_BUDGET,
    Elem,
    ElemSet,
    GroupCtx,
    Predicate,
    center,
    char_poly,
    commuting_mask,
    enumerate_group,
    product_set,
    regular_ss_mask,
    torus_points,
)


@dataclass
class VarietySpec:
    kind: str
    dim: int
    membership: Predicate
    ctx: GroupCtx
    label: str = ""
    points: ElemSet | None = None

    def contains(self, g: Elem) -> bool:
        return bool(self.membership(g.entries[None])[0])


def _is_cyclic(ctx: GroupCtx, m: np.ndarray) -> bool:
    """True when I, g, ..., g^(n-1) are linearly independent (non-derogatory)."""
    if ctx.n == 2:
        return not bool(ctx.scalar_mask(m[None])[0])
    F = ctx.field
    if F.k != 1:
        # rank test via brute force over coefficient triples
        return not any(
            bool(np.all(F.add(F.add(F.mul(a, np.eye(3, dtype=np.int64)), F.mul(b, m)), F.mul(c, ctx.matmul(m, m))) == 0))
            for a in range(F.q)
            for b in range(F.q)
            for c in range(F.q)
            if (a, b, c) != (0, 0, 0)
        )
    rows = np.stack([np.eye(3, dtype=np.int64).ravel(), m.ravel(), ctx.matmul(m, m).ravel()])
    return _rank_mod_p(rows, F.p) == 3


def _rank_mod_p(rows: np.ndarray, p: int) -> int:
    a = rows.copy() % p
    rank = 0
    for col in range(a.shape[1]):
        piv = next((r for r in range(rank, a.shape[0]) if a[r, col]), None)
        if piv is None:
            continue
        a[[rank, piv]] = a[[piv, rank]]
        a[rank] = a[rank] * pow(int(a[rank, col]), -1, p) % p
        for r in range(a.shape[0]):
            if r != rank and a[r, col]:
                a[r] = (a[r] - a[r, col] * a[rank]) % p
        rank += 1
    return rank


def _centralizer_dim(ctx: GroupCtx, m: np.ndarray) -> int:
    if bool(ctx.scalar_mask(m[None])[0]):
        return ctx.dim_G
    if _is_cyclic(ctx, m):
        return ctx.n - 1
    return 4  # derogatory non-scalar 3x3: minimal polynomial of degree 2


def maximal_torus(ctx: GroupCtx, g: Elem) -> VarietySpec:
    """The maximal torus through a regular semisimple ``g``."""
    pts = torus_points(ctx, g)
    return VarietySpec("maximal_torus", ctx.dim_table["maximal_torus"], pts.contains_mask, ctx, f"torus({pts.min_key()})", pts)


def split_torus(ctx: GroupCtx) -> VarietySpec:
    off = ~np.eye(ctx.n, dtype=bool)

    def member(m: np.ndarray) -> np.ndarray:
        return np.all(m[..., off] == 0, axis=-1)

    return VarietySpec("maximal_torus", ctx.dim_table["maximal_torus"], member, ctx, "split-torus")


def singular_set(ctx: GroupCtx) -> VarietySpec:
    return VarietySpec("singular_set", ctx.dim_table["singular_set"], lambda m: ~regular_ss_mask(ctx, m), ctx, "singular")


def centralizer(ctx: GroupCtx, g: Elem) -> VarietySpec:
    gm = g.entries
    return VarietySpec(
        "centralizer", _centralizer_dim(ctx, gm), lambda m: commuting_mask(ctx, m, gm), ctx, f"centralizer({g.key})"
    )


def conjugacy_class(ctx: GroupCtx, g: Elem) -> VarietySpec:
    gm = g.entries
    dim = ctx.dim_G - _centralizer_dim(ctx, gm)
    if ctx.q > ctx.n and bool(regular_ss_mask(ctx, gm[None])[0]):
        # regular semisimple classes of SL_n(F_q) are fibres of the characteristic polynomial
        target = char_poly(ctx, g)

        def member(m: np.ndarray) -> np.ndarray:
            F = ctx.field
            ok = ctx.trace(m) == F.neg(target[1])
            if ctx.n == 3:
                c2 = np.zeros(m.shape[:-2], dtype=np.int64)
                for i, j in ((0, 1), (0, 2), (1, 2)):
                    c2 = F.add(c2, F.sub(F.mul(m[..., i, i], m[..., j, j]), F.mul(m[..., i, j], m[..., j, i])))
                ok &= c2 == target[2]
            return ok

        return VarietySpec("conjugacy_class", dim, member, ctx, f"class({g.key})")
    G = enumerate_group(ctx)
    gs = G.matrices
    orbit = ElemSet.from_matrices(ctx, ctx.matmul(ctx.matmul(gs, gm[None]), ctx.inverse(gs)))
    return VarietySpec("conjugacy_class", dim, orbit.contains_mask, ctx, f"class({g.key})", orbit)


def subgroup(ctx: GroupCtx, H: ElemSet) -> VarietySpec:
    return VarietySpec("subgroup", 0, H.contains_mask, ctx, f"subgroup({len(H)})", H)


# -- Larsen-Pink exponents --------------------------------------------------------


@dataclass
class LPReport:
    set_size: int
    m: int
    intersection_size: int
    predicted_exponent: float
    observed_exponent: float
    degenerate: bool
    variety: str = ""


def lp_exponent(A: ElemSet, V: VarietySpec, m: int = 1, budget: int = PAIR_BUDGET) -> LPReport:
    Am = power_set(A, m, budget)
    inter = len(Am.filter(V.membership))
    predicted = V.dim / A.ctx.dim_G
    degenerate = len(A) <= 1 or inter == 0
    observed = math.nan if degenerate else math.log(inter) / math.log(len(A))
    return LPReport(len(A), m, inter, predicted, observed, degenerate, V.label)


# -- involved tori -----------------------------------------------------------------


@dataclass
class TorusCensus:
    set_size: int
    square_size: int
    tori: dict[int, int] = field(default_factory=dict)
    regular_in_torus: dict[int, int] = field(default_factory=dict)
    torus_points: dict[int, ElemSet] = field(default_factory=dict, repr=False)
    regular_keys: ElemSet | None = field(default=None, repr=False)
    nonregular_noncentral: int = 0
    central: int = 0
    predicted: float = 0.0

    @property
    def involved_count(self) -> int:
        return len(self.tori)

    @property
    def exponent_observed(self) -> float:
        if self.set_size <= 1 or not self.tori:
            return math.nan
        return math.log(self.involved_count) / math.log(self.set_size)

    def partition_holds(self) -> bool:
        return sum(self.regular_in_torus.values()) + self.nonregular_noncentral + self.central == self.square_size


def involved_tori(A: ElemSet, budget: int = PAIR_BUDGET) -> TorusCensus:
    """Group the regular semisimple elements of A^2 by their maximal torus."""
    ctx = A.ctx
    A2 = product_set(A, A, budget)
    reg = A2.filter(lambda m: regular_ss_mask(ctx, m))
    Z = center(ctx)
    central = len(A2.intersection(Z))
    census = TorusCensus(
        len(A),
        len(A2),
        regular_keys=reg,
        nonregular_noncentral=len(A2) - len(reg) - central,
        central=central,
        predicted=1 - ctx.rank / ctx.dim_G,
    )
    unassigned = reg
    while len(unassigned):
        g = Elem(ctx, int(unassigned.keys[0]))
        T = torus_points(ctx, g)
        tid = T.difference(Z).min_key()
        members = unassigned.intersection(T)
        census.tori[tid] = len(A2.intersection(T))
        census.regular_in_torus[tid] = len(members)
        census.torus_points[tid] = T
        unassigned = unassigned.difference(members)
    return census


def conjugation_invariance(A: ElemSet, census: TorusCensus) -> float:
    """Fraction of pairs (T involved, a in A) for which a^-1 T a is involved."""
    ctx = A.ctx
    if not census.tori or len(A) == 0:
        return math.nan
    reg = census.regular_keys
    am = A.matrices
    a_inv = ctx.inverse(am)
    hits = 0
    total = 0
    for tid, T in census.torus_points.items():
        tm = T.matrices
        # conj[i, j] = a_i^-1 t_j a_i
        conj = ctx.matmul(ctx.matmul(a_inv[:, None], tm[None]), am[:, None])
        keys = ctx.encode(conj.reshape(-1, ctx.n, ctx.n)).reshape(len(am), len(tm))
        hits += int(np.any(reg.contains_keys(keys.ravel()).reshape(keys.shape), axis=1).sum())
        total += len(am)
    return hits / total


# -- conjugate products ------------------------------------------------------------


@dataclass
class ConjProductReport:
    torus_sizes: tuple[int, int]
    size: int
    overlap: int
    normalizing_size: int | None = None


def conjugate_product_size(T1: ElemSet, a: Elem, T2: ElemSet) -> int:
    ctx = T1.ctx
    am = a.entries
    conj = ElemSet.from_matrices(ctx, ctx.matmul(ctx.matmul(ctx.inverse(am)[None], T1.matrices), am[None]))
    return len(product_set(conj, T2))


def normalizer_outside(ctx: GroupCtx, T: ElemSet) -> Elem | None:
    """Least-key element normalizing T without lying in T."""
    G = enumerate_group(ctx)
    gs = G.matrices
    tm = T.matrices
    ok = np.ones(len(gs), dtype=bool)
    for t in tm:
        conj = ctx.matmul(ctx.matmul(ctx.inverse(gs), t[None]), gs)
        ok &= T.contains_mask(conj)
    ok &= ~T.contains_mask(gs)
    idx = np.flatnonzero(ok)
    return Elem(ctx, int(G.keys[idx[0]])) if len(idx) else None


def conjugate_product_growth(T1: VarietySpec, a: Elem, T2: VarietySpec, with_normalizer: bool = True) -> ConjProductReport:
    """|T1^a · T2| for the given ``a`` and, optionally, for an element normalizing T1."""
    if T1.points is None or T2.points is None:
        raise PreconditionError("tori must be realized as point sets")
    ctx = T1.ctx
    am = a.entries
    conj = ElemSet.from_matrices(ctx, ctx.matmul(ctx.matmul(ctx.inverse(am)[None], T1.points.matrices), am[None]))
    rep = ConjProductReport(
        (len(T1.points), len(T2.points)),
        len(product_set(conj, T2.points)),
        len(conj.intersection(T2.points)),
    )
    if with_normalizer:
        w = normalizer_outside(ctx, T1.points)
        if w is not None:
            rep.normalizing_size = conjugate_product_size(T1.points, w, T2.points)
    return rep


def torus_spec(ctx: GroupCtx, T: ElemSet) -> VarietySpec:
    return VarietySpec("maximal_torus", ctx.dim_table["maximal_torus"], T.contains_mask, ctx, f"torus({T.min_key()})", T)


# -- empirical dimension ---------------------------------------------------------------


def variety_point_count(V: VarietySpec) -> int:
    return len(enumerate_group(V.ctx).filter(V.membership))


def empirical_dimension(family: Callable[[int], int] | Callable[[int], VarietySpec], primes: Iterable[int]) -> float:
    """Least-squares slope of log|V(F_p)| against log p.

    ``family`` maps a prime either to a point count or to a VarietySpec,
    which is then counted exhaustively.
    """
    primes = list(primes)
    if len(primes) < 3:
        raise PreconditionError("need at least 3 primes for a dimension fit")
    xs, ys = [], []
    for p in primes:
        v = family(p)
        count = v if isinstance(v, int) else variety_point_count(v)
        if count <= 0:
            raise PreconditionError(f"variety has no points over F_{p}")
        xs.append(math.log(p))
        ys.append(math.log(count))
    slope, _ = np.polyfit(xs, ys, 1)
    return float(slope)
