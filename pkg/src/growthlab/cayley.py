"""Breadth-first exploration of Cayley graphs of SL_n(F_q): ball profiles,
exact diameters, girth of generator pairs, random-pair statistics and
log-diameter scaling fits."""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetError, PreconditionError
from .matgroup import (
    ENUM_CAP,
    Elem,
    ElemSet,
    GroupCtx,
    Visited,
    _expand,
    random_matrices,
)
from .rng import substream, worker_count


@dataclass
class CayleyReport:
    p: int
    n: int
    group_order: int
    generators: str
    diameter: int | None
    ball_sizes: list[int] = field(default_factory=list)
    girth: int | None = None

    @property
    def step_size(self) -> int:
        return self.ball_sizes[1] if len(self.ball_sizes) > 1 else 1


def _bfs(S: ElemSet, r_max: int | None, max_elements: int = ENUM_CAP) -> list[int]:
    """Sizes of (S ∪ S^-1 ∪ {1})^r, r = 0, 1, ..., until the ball stops growing or r_max."""
    ctx = S.ctx
    step = S.symmetrize(with_identity=False).matrices
    visited = Visited(ctx)
    ident = ctx.identity_matrix()[None]
    visited.add_new(ident, ctx.encode(ident))
    frontier = ident
    sizes = [1]
    while len(frontier) and (r_max is None or len(sizes) <= r_max):
        frontier = _expand(ctx, frontier, step, visited)
        if visited.count > max_elements:
            raise BudgetError(f"ball exceeds {max_elements} elements")
        if len(frontier):
            sizes.append(visited.count)
    return sizes


def ball_profile(S: ElemSet, r_max: int) -> list[int]:
    """|S̄^r| for r = 0..r_max, S̄ = S ∪ S^-1 ∪ {1}."""
    sizes = _bfs(S, r_max)
    return sizes + [sizes[-1]] * (r_max + 1 - len(sizes))


def diameter(S: ElemSet) -> int:
    """Least r with S̄^r = G."""
    ctx = S.ctx
    if ctx.order > ENUM_CAP:
        raise BudgetError(f"group order {ctx.order} exceeds {ENUM_CAP}")
    sizes = _bfs(S, None)
    if sizes[-1] != ctx.order:
        raise PreconditionError(f"S generates a proper subgroup of size {sizes[-1]} (|G| = {ctx.order})")
    return len(sizes) - 1


def cayley_report(S: ElemSet, generators: str = "", with_girth: bool = False) -> CayleyReport:
    ctx = S.ctx
    sizes = _bfs(S, None)
    diam = len(sizes) - 1 if sizes[-1] == ctx.order else None
    rep = CayleyReport(ctx.p, ctx.n, ctx.order, generators, diam, sizes)
    if with_girth and len(S) == 2:
        a, b = list(S)
        rep.girth = girth(a, b)
    return rep


def counting_bound(order: int, step_size: int) -> float:
    """Any r with |S̄|^r >= |G| is at least log|G| / log|S̄|."""
    return math.log(order) / math.log(step_size) if step_size > 1 else math.inf


# -- girth -------------------------------------------------------------------------


def girth_budget(ctx: GroupCtx) -> int:
    return math.ceil(math.log(ctx.order) / (2 * math.log(3))) + 4


def girth(a: Elem, b: Elem, budget: int | None = None) -> int | None:
    """Length of the shortest nonempty reduced word in a, b that is trivial.

    Reduced words are explored level by level; the first level r at which a
    word lands on an element already reached (by a word of length l) yields
    relations of length r + l, and the least of these is the girth: a
    relation of length g splits into two reduced halves of lengths
    ceil(g/2) and floor(g/2) that collide no later than level ceil(g/2).
    Returns None when no relation is found within ``budget`` levels.
    """
    ctx = a.ctx
    if budget is None:
        budget = girth_budget(ctx)
    am, bm = a.entries, b.entries
    letters = np.stack([am, bm, ctx.inverse(am), ctx.inverse(bm)])
    ident = ctx.identity_matrix()
    stored = {ctx.encode_one(ident): 0}
    frontier = ident[None]
    last = np.array([-1])
    for r in range(1, budget + 1):
        prods = ctx.matmul(frontier[:, None], letters[None])  # (F, 4, n, n)
        lt = np.broadcast_to(np.arange(4), (len(frontier), 4))
        ok = (last[:, None] < 0) | (lt != (last[:, None] + 2) % 4)
        prods, lt = prods[ok], lt[ok]
        keys = ctx.encode(prods)
        best = math.inf
        level_seen: set[int] = set()
        for k in keys.tolist():
            prev = stored.get(k)
            if prev is not None:
                best = min(best, r + prev)
            elif k in level_seen:
                best = min(best, 2 * r)
            else:
                level_seen.add(k)
        if best < math.inf:
            return int(best)
        for k in level_seen:
            stored[k] = r
        frontier, last = prods, lt
    return None


# -- random generators --------------------------------------------------------------------


@dataclass
class TrialResult:
    trial: int
    a: int
    b: int
    generates: bool
    closure_size: int
    diameter: int | None
    girth: int | None


@dataclass
class RandomStats:
    p: int
    n: int
    trials: list[TrialResult]

    @property
    def generation_fraction(self) -> float:
        return sum(t.generates for t in self.trials) / len(self.trials) if self.trials else math.nan

    def _values(self, name: str) -> list[int]:
        return [getattr(t, name) for t in self.trials if getattr(t, name) is not None]

    def summary(self) -> dict[str, float]:
        out: dict[str, float] = {"trials": len(self.trials)}
        if not self.trials:
            return out
        out["generation_fraction"] = self.generation_fraction
        for name in ("diameter", "girth"):
            vals = self._values(name)
            if vals:
                out[f"{name}_min"] = min(vals)
                out[f"{name}_median"] = statistics.median(vals)
                out[f"{name}_max"] = max(vals)
        return out


def random_pair(ctx: GroupCtx, seed: int, trial: int) -> tuple[Elem, Elem]:
    m = random_matrices(ctx, 2, substream(seed, f"pair:{ctx!r}:{trial}"))
    return Elem(ctx, ctx.encode_one(m[0])), Elem(ctx, ctx.encode_one(m[1]))


def _run_trial(ctx: GroupCtx, seed: int, trial: int, with_diameter: bool) -> TrialResult:
    a, b = random_pair(ctx, seed, trial)
    g = girth(a, b)
    S = ElemSet.from_elems(ctx, [a, b])
    if with_diameter:
        sizes = _bfs(S, None)
        gen = sizes[-1] == ctx.order
        return TrialResult(trial, a.key, b.key, gen, sizes[-1], len(sizes) - 1 if gen else None, g)
    return TrialResult(trial, a.key, b.key, False, 0, None, g)


def random_generator_stats(ctx: GroupCtx, trials: int, seed: int, with_diameter: bool | None = None) -> RandomStats:
    """Generation, diameter and girth statistics over seeded random pairs."""
    if with_diameter is None:
        with_diameter = ctx.order <= 10**6
    workers = min(worker_count(), max(1, trials))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda t: _run_trial(ctx, seed, t, with_diameter), range(trials)))
    else:
        results = [_run_trial(ctx, seed, t, with_diameter) for t in range(trials)]
    return RandomStats(ctx.p, ctx.n, sorted(results, key=lambda r: r.trial))


# -- scaling ----------------------------------------------------------------------------------


def scaling_fit(reports: list[CayleyReport] | list[tuple[int, float]]) -> tuple[float, float]:
    """Fit diam = C1 (log|G|)^C2 by least squares in log-log coordinates.

    Accepts CayleyReports or (group_order, diameter) pairs; returns (C1, C2).
    """
    pts = [(r.group_order, r.diameter) if isinstance(r, CayleyReport) else r for r in reports]
    pts = [(o, d) for o, d in pts if d]
    if len(pts) < 4 or len({o for o, _ in pts}) < 4:
        raise PreconditionError("scaling fit needs at least 4 reports with distinct group orders")
    x = np.array([math.log(math.log(o)) for o, _ in pts])
    y = np.array([math.log(d) for _, d in pts])
    if np.ptp(x) < 1e-9:
        raise PreconditionError("degenerate spread of |G|")
    c2, c0 = np.polyfit(x, y, 1)
    return float(math.exp(c0)), float(c2)
