"""Product sets, tripling, approximate-subgroup and control certificates,
growth iteration and the Gowers A^3 = G test."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import PreconditionError
from .matgroup import (
    PAIR_BUDGET,
    ElemSet,
    GroupCtx,
    Visited,
    _expand,
    product_set,
)

__all__ = [
    "ApproxCertificate",
    "ControlResult",
    "GrowthReport",
    "GowersResult",
    "Tripling",
    "approx_certify",
    "control_certify",
    "gowers_check",
    "gowers_threshold",
    "growth_iterate",
    "power_set",
    "product_set",
    "tripling",
    "verify_cover",
]


def power_set(A: ElemSet, m: int, budget: int = PAIR_BUDGET) -> ElemSet:
    """A^m by repeated right multiplication with A."""
    if m < 1:
        raise PreconditionError("power must be at least 1")
    out = A
    for _ in range(m - 1):
        out = product_set(out, A, budget)
    return out


@dataclass(frozen=True)
class Tripling:
    size: int
    cube_size: int

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.cube_size, self.size)

    @property
    def exponent(self) -> float:
        """log|A^3| / log|A|; infinite for |A| = 1."""
        if self.size == 1:
            return math.inf if self.cube_size > 1 else 1.0
        return math.log(self.cube_size) / math.log(self.size)


def tripling(A: ElemSet, budget: int = PAIR_BUDGET) -> Tripling:
    if len(A) == 0:
        raise PreconditionError("tripling of an empty set")
    return Tripling(len(A), len(power_set(A, 3, budget)))


# -- certificates -----------------------------------------------------------------


@dataclass
class ApproxCertificate:
    K_certified: int
    X: ElemSet
    method: str = "greedy-cover"


def verify_cover(target: ElemSet, X: ElemSet, A: ElemSet, side: str = "left") -> bool:
    """Check target ⊆ X·A (side="left") or target ⊆ A·X (side="right")."""
    cover = product_set(X, A) if side == "left" else product_set(A, X)
    return target.issubset(cover)


def approx_certify(A: ElemSet, budget: int = PAIR_BUDGET) -> ApproxCertificate:
    """Greedy symmetric cover X with A·A ⊆ X·A.

    The identity is tried first; afterwards the least uncovered element y of
    A·A is added together with y^-1, so X stays symmetric throughout.
    |X| bounds the optimal K from above.
    """
    ctx = A.ctx
    if not A.contains_identity() or not A.is_symmetric():
        raise PreconditionError("A must be symmetric and contain the identity")
    AA = product_set(A, A, budget)
    uncovered = AA.difference(A)
    centers = [ctx.identity().key]
    am = A.matrices
    while len(uncovered):
        y = uncovered.keys[:1]
        ym = ctx.decode(y)[0]
        pair = ElemSet.from_matrices(ctx, np.stack([ym, ctx.inverse(ym)]))
        centers.extend(int(k) for k in pair.keys)
        for cm in pair.matrices:
            uncovered = uncovered.difference(ElemSet.from_matrices(ctx, ctx.matmul(cm[None], am)))
    X = ElemSet(ctx, np.array(centers, dtype=np.uint64))
    assert verify_cover(AA, X, A), "greedy cover failed post-hoc verification"
    return ApproxCertificate(len(X), X)


@dataclass
class ControlResult:
    ok: bool
    K: int
    X: ElemSet


def control_certify(A: ElemSet, B: ElemSet, K: int | None = None, max_candidates: int = 4096) -> ControlResult:
    """Greedy search for X with A ⊆ (X·B) ∩ (B·X).

    The constant reported is max(|X|, ceil(|B|/|A|)), the least K for which
    the found X witnesses K-control.  With ``K`` given, ``ok`` says whether
    that bound is met.
    """
    ctx = A.ctx
    if len(A) == 0:
        raise PreconditionError("A must be nonempty")
    if len(B) == 0:
        return ControlResult(False, math.inf, ElemSet.empty(ctx))
    need_left = A
    need_right = A
    X = ElemSet.empty(ctx)
    bm = B.matrices
    b_inv = ctx.inverse(bm)
    ident_in_b = B.contains_identity()
    while len(need_left) or len(need_right):
        a = (need_left if len(need_left) else need_right).matrices[0]
        if ident_in_b:
            cands = a[None]
        else:
            cands = np.concatenate([ctx.matmul(a[None], b_inv), ctx.matmul(b_inv, a[None])])[:max_candidates]
        left = ctx.matmul(cands[:, None], bm[None])
        right = ctx.matmul(bm[None], cands[:, None])
        lk = ctx.encode(left.reshape(-1, ctx.n, ctx.n)).reshape(len(cands), -1)
        rk = ctx.encode(right.reshape(-1, ctx.n, ctx.n)).reshape(len(cands), -1)
        gain = np.array(
            [
                need_left.contains_keys(lk[i]).sum() + need_right.contains_keys(rk[i]).sum()
                for i in range(len(cands))
            ]
        )
        best = int(np.argmax(gain))
        X = X.union(ElemSet.from_matrices(ctx, cands[best][None]))
        need_left = need_left.difference(ElemSet(ctx, lk[best]))
        need_right = need_right.difference(ElemSet(ctx, rk[best]))
    k_found = max(len(X), -(-len(B) // len(A)))
    assert verify_cover(A, X, B, "left") and verify_cover(A, X, B, "right")
    return ControlResult(K is None or k_found <= K, k_found, X)


# -- growth ------------------------------------------------------------------------


@dataclass
class GrowthReport:
    radii: list[int] = field(default_factory=list)
    sizes: list[int] = field(default_factory=list)
    tripling_ratios: list[float] = field(default_factory=list)
    verdict: str = "growing"
    group_order: int = 0
    partial: bool = False


def growth_iterate(S: ElemSet, delta: float = 0.1, max_rounds: int = 40, max_elements: int = 10**7) -> GrowthReport:
    """Track |S^(3^i)| for i = 0, 1, ... until the ball reaches |G|^(1-delta)
    or two consecutive sizes agree."""
    if not S.contains_identity() or not S.is_symmetric():
        raise PreconditionError("S must be symmetric and contain the identity")
    ctx = S.ctx
    target = ctx.order ** (1 - delta)
    rep = GrowthReport(group_order=ctx.order)
    ctx_step = S.matrices
    visited = Visited(ctx)
    for k, m in zip(S.keys, ctx_step):
        visited.add_new(m[None], np.array([k], dtype=np.uint64))
    frontier = ctx_step
    radius = 1
    for i in range(max_rounds):
        want = 3**i
        while radius < want and len(frontier):
            frontier = _expand(ctx, frontier, ctx_step, visited)
            radius += 1
            if visited.count > max_elements:
                rep.partial = True
                return rep
        size = visited.count
        if rep.sizes:
            rep.tripling_ratios.append(size / rep.sizes[-1])
        rep.radii.append(i)
        rep.sizes.append(size)
        if size >= target:
            rep.verdict = "reached-near-full"
            return rep
        if len(rep.sizes) >= 2 and rep.sizes[-1] == rep.sizes[-2]:
            rep.verdict = "stalled-proper-subgroup"
            return rep
    rep.partial = True
    return rep


# -- Gowers -------------------------------------------------------------------------


def gowers_threshold(ctx: GroupCtx, d_min: int | None = None) -> float:
    d = d_min if d_min is not None else ctx.d_min
    if d is None:
        raise PreconditionError(f"no d_min configured for {ctx!r}")
    return ctx.order / d ** (1 / 3)


@dataclass
class GowersResult:
    size: int
    threshold: float
    precondition: bool
    cube_is_group: bool
    cube_size: int


def gowers_check(ctx: GroupCtx, A: ElemSet, d_min: int | None = None, budget: int = PAIR_BUDGET) -> GowersResult:
    """Exact test of A^3 = G.  ``precondition`` is False when |A| is at or
    below |G|/d_min^(1/3); the result is then report-only."""
    thr = gowers_threshold(ctx, d_min)
    A2 = product_set(A, A, budget)
    A3 = A2 if len(A2) == ctx.order else product_set(A2, A, budget)
    return GowersResult(len(A), thr, len(A) > thr, len(A3) == ctx.order, len(A3))
