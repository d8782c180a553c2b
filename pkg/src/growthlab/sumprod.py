"""Sum-product experiments over finite fields and the bridge to SL_2:
the matrix lift of a scalar set, rational-function images, the Dickson
generation test and the grid-vanishing check."""

from __future__ import annotations

import ast
import itertools
import operator
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetError, PreconditionError
from .finfield import FieldCtx, make_field
from .matgroup import (
    Elem,
    ElemSet,
    GroupCtx,
    closure,
    enumerate_group,
    make_group,
)
from .rng import substream

TUPLE_BUDGET = 10**9
_CHUNK = 1 << 22

# Proper subgroups of SL_2(F_p), p >= 5, of order above this are solvable.
DICKSON_SMALL = 120


@dataclass(frozen=True)
class ScalarSet:
    field: FieldCtx
    values: np.ndarray

    def __post_init__(self):
        vals = np.unique(np.asarray(self.values, dtype=np.int64))
        if len(vals) and (vals[0] < 0 or vals[-1] >= self.field.q):
            raise PreconditionError(f"values must lie in [0, {self.field.q})")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def p(self) -> int:
        return self.field.p

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(int(v) for v in self.values)


# -- families ------------------------------------------------------------------


def arithmetic_progression(F: FieldCtx, length: int, start: int = 1, step: int = 1) -> ScalarSet:
    return ScalarSet(F, [(start + i * step) % F.p for i in range(length)])


def multiplicative_order(F: FieldCtx, g: int) -> int:
    x, k = g, 1
    while x != 1:
        x = int(F.mul(x, g))
        k += 1
    return k


def primitive_root(F: FieldCtx) -> int:
    for g in range(2, F.q):
        if multiplicative_order(F, g) == F.q - 1:
            return g
    return 1


def geometric_progression(F: FieldCtx, length: int, ratio: int | None = None, start: int = 1) -> ScalarSet:
    g = primitive_root(F) if ratio is None else ratio
    vals, x = [], start
    for _ in range(length):
        vals.append(x)
        x = int(F.mul(x, g))
    return ScalarSet(F, vals)


def random_scalars(F: FieldCtx, length: int, rng: np.random.Generator, nonzero: bool = True) -> ScalarSet:
    lo = 1 if nonzero else 0
    if length > F.q - lo:
        raise PreconditionError("more distinct values requested than the field has")
    return ScalarSet(F, rng.choice(np.arange(lo, F.q), size=length, replace=False))


def subfield_in_extension(p: int) -> ScalarSet:
    """F_p embedded in F_{p^2}."""
    F2 = make_field(p, 2)
    return ScalarSet(F2, np.arange(p))


# -- sum and product sets ------------------------------------------------------------


def _pairwise(F: FieldCtx, a: np.ndarray, b: np.ndarray, op: Callable) -> np.ndarray:
    if len(a) * len(b) > TUPLE_BUDGET:
        raise BudgetError(f"{len(a) * len(b)} pairs exceeds budget {TUPLE_BUDGET}")
    seen = np.zeros(F.q, dtype=bool)
    rows = max(1, _CHUNK // max(1, len(b)))
    for s in range(0, len(a), rows):
        seen[op(a[s : s + rows, None], b[None, :]).ravel()] = True
    return np.flatnonzero(seen)


def sumset(A: ScalarSet) -> ScalarSet:
    return ScalarSet(A.field, _pairwise(A.field, A.values, A.values, A.field.add))


def productset(A: ScalarSet) -> ScalarSet:
    return ScalarSet(A.field, _pairwise(A.field, A.values, A.values, A.field.mul))


def sum_prod_sizes(A: ScalarSet) -> tuple[int, int]:
    return len(sumset(A)), len(productset(A))


@dataclass
class ScanRow:
    family: str
    size: int
    sum_size: int
    prod_size: int
    K_obs: float
    flagged: bool


FAMILIES = ("AP", "GP", "random", "AP+GP", "subfield")


def build_family(name: str, F: FieldCtx, size: int, seed: int = 0) -> ScalarSet:
    if name == "AP":
        return arithmetic_progression(F, size)
    if name == "GP":
        return geometric_progression(F, size)
    if name == "random":
        return random_scalars(F, size, substream(seed, f"scalars:{F.q}:{size}"))
    if name == "AP+GP":
        half = size // 2
        ap = arithmetic_progression(F, size - half)
        gp = geometric_progression(F, half)
        return ScalarSet(F, np.concatenate([ap.values, gp.values]))
    if name == "subfield":
        return subfield_in_extension(F.p)
    raise PreconditionError(f"unknown family {name!r}; choose from {', '.join(FAMILIES)}")


def dichotomy_scan(
    p: int,
    families: Sequence[str] = FAMILIES,
    sizes: Sequence[int] | None = None,
    K_thresh: float = 1.5,
    seed: int = 0,
) -> list[ScanRow]:
    """K_obs = max(|A+A|, |A·A|)/|A| per family and size.

    A row is flagged when the set is neither tiny (|A| >= p^0.1) nor large
    (|A| <= p^0.9) and still has K_obs <= K_thresh.  In F_p no flags are
    expected; the subfield family lives in F_{p^2}.
    """
    F = make_field(p)
    if sizes is None:
        sizes = sorted({max(2, int(round(p**e))) for e in (0.2, 0.35, 0.5, 0.65, 0.8)})
    rows = []
    for fam in families:
        for size in [p] if fam == "subfield" else sizes:
            A = build_family(fam, F, size, seed)
            s, m = sum_prod_sizes(A)
            K = max(s, m) / len(A)
            ambient = A.field.q
            flagged = ambient ** 0.1 <= len(A) <= ambient**0.9 and K <= K_thresh
            rows.append(ScanRow(fam, len(A), s, m, K, flagged))
    return rows


# -- rational functions -----------------------------------------------------------------


@dataclass(frozen=True)
class ExprTree:
    """Rational expression in variables x1..xm over a finite field.

    ``op`` is one of "const", "var", "+", "-", "*", "/", "neg".
    """

    op: str
    value: int = 0
    args: tuple[ExprTree, ...] = ()

    @property
    def arity(self) -> int:
        if self.op == "var":
            return self.value
        return max((a.arity for a in self.args), default=0)

    @classmethod
    def parse(cls, text: str) -> ExprTree:
        try:
            node = ast.parse(text.strip(), mode="eval").body
        except SyntaxError as exc:
            raise PreconditionError(f"cannot parse expression {text!r}: {exc.msg}") from None
        return cls._from_ast(node)

    @classmethod
    def _from_ast(cls, node) -> ExprTree:
        ops = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/"}
        if isinstance(node, ast.BinOp) and type(node.op) in ops:
            return cls(ops[type(node.op)], args=(cls._from_ast(node.left), cls._from_ast(node.right)))
        if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Pow) and isinstance(node.right, ast.Constant):
            base = cls._from_ast(node.left)
            e = int(node.right.value)
            if e < 1:
                raise PreconditionError("only positive integer powers are supported")
            out = base
            for _ in range(e - 1):
                out = cls("*", args=(out, base))
            return out
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return cls("neg", args=(cls._from_ast(node.operand),))
        if isinstance(node, ast.Constant) and isinstance(node.value, int):
            return cls("const", node.value)
        if isinstance(node, ast.Name) and node.id.startswith("x") and node.id[1:].isdigit() and int(node.id[1:]) >= 1:
            return cls("var", int(node.id[1:]))
        raise PreconditionError(f"unsupported expression element: {ast.dump(node)}")

    def evaluate(self, F: FieldCtx, xs: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        """Values and an infinity mask (a zero denominator somewhere)."""
        shape = np.broadcast_shapes(*(x.shape for x in xs)) if xs else ()
        if self.op == "const":
            return np.full(shape, F.embed(self.value % F.p) if self.value >= 0 else F.neg(F.embed(-self.value % F.p)), dtype=np.int64), np.zeros(shape, bool)
        if self.op == "var":
            return np.broadcast_to(xs[self.value - 1], shape).astype(np.int64), np.zeros(shape, bool)
        if self.op == "neg":
            v, inf = self.args[0].evaluate(F, xs)
            return F.neg(v), inf
        (lv, li), (rv, ri) = (a.evaluate(F, xs) for a in self.args)
        inf = li | ri
        if self.op == "+":
            return F.add(lv, rv), inf
        if self.op == "-":
            return F.sub(lv, rv), inf
        if self.op == "*":
            return F.mul(lv, rv), inf
        zero = rv == 0
        safe = np.where(zero, 1, rv)
        return np.where(zero, 0, F.mul(lv, F.inv(safe))), inf | zero


@dataclass
class ImageCount:
    count: int
    infinity: int
    tuples: int


def rational_image(A: ScalarSet, psi: ExprTree | str, arity: int | None = None) -> ImageCount:
    """|psi(A, ..., A)| with tuples hitting a zero denominator set aside."""
    if isinstance(psi, str):
        psi = ExprTree.parse(psi)
    m = arity if arity is not None else max(1, psi.arity)
    if m > 3:
        raise PreconditionError("rational images support at most 3 variables")
    F, vals = A.field, A.values
    total = len(vals) ** m
    if total > TUPLE_BUDGET:
        raise BudgetError(f"{total} tuples exceeds budget {TUPLE_BUDGET}")
    seen = np.zeros(F.q, dtype=bool)
    n_inf = 0
    per_row = len(vals) ** (m - 1)
    rows = max(1, _CHUNK // per_row)
    shape = lambda i: (1,) * i + (-1,) + (1,) * (m - 1 - i)  # noqa: E731
    rest = [vals.reshape(shape(i)) for i in range(1, m)]
    for s in range(0, len(vals), rows):
        xs = [vals[s : s + rows].reshape(shape(0))] + rest
        v, inf = psi.evaluate(F, xs)
        v = np.broadcast_to(v, inf.shape)
        seen[v[~inf]] = True
        n_inf += int(inf.sum())
    return ImageCount(int(seen.sum()), n_inf, total)


# -- the SL_2 lift ----------------------------------------------------------------------


def lift_group(A: ScalarSet) -> GroupCtx:
    F = A.field
    return make_group(2, F.p, F.k)


def lift_SL2(A: ScalarSet) -> ElemSet:
    """{ (a1, a2; a3, (1 + a2 a3)/a1) : a_i in A }."""
    F = A.field
    if np.any(A.values == 0):
        raise PreconditionError("0 must not lie in A")
    ctx = lift_group(A)
    v = A.values
    a1, a2, a3 = np.meshgrid(v, v, v, indexing="ij")
    a1, a2, a3 = a1.ravel(), a2.ravel(), a3.ravel()
    d = F.mul(F.add(F.embed(1), F.mul(a2, a3)), F.inv(a1))
    mats = np.stack([np.stack([a1, a2], -1), np.stack([a3, d], -1)], -2)
    return ElemSet.from_matrices(ctx, mats)


def double_commutator(ctx: GroupCtx, h1: np.ndarray, h2: np.ndarray, h3: np.ndarray, h4: np.ndarray) -> np.ndarray:
    """[[h1, h2], [h3, h4]] with [x, y] = x^-1 y^-1 x y, batched."""

    def comm(x, y):
        return ctx.matmul(ctx.matmul(ctx.inverse(x), ctx.inverse(y)), ctx.matmul(x, y))

    return comm(comm(h1, h2), comm(h3, h4))


# -- Dickson generation test ----------------------------------------------------------------


@dataclass
class DicksonVerdict:
    verdict: str
    method: str
    size: int
    witness: tuple[Elem, Elem, Elem, Elem] | None = None
    quadruples_tried: int = 0


def _words_up_to(ctx: GroupCtx, S: ElemSet, length: int, limit: int) -> np.ndarray:
    """Distinct elements reached by words of length <= length, breadth first."""
    step = S.symmetrize(with_identity=False).matrices
    seen = ElemSet(ctx, S.keys)
    frontier = S.matrices
    for _ in range(length - 1):
        if len(seen) >= limit or not len(frontier):
            break
        prods = ctx.matmul(frontier[:, None], step[None]).reshape(-1, ctx.n, ctx.n)
        new = ElemSet.from_matrices(ctx, prods).difference(seen)
        seen = seen.union(new)
        frontier = new.matrices
    return seen.matrices[:limit]


def dickson_gen_test(
    S: ElemSet,
    method: str = "auto",
    exact_limit: int = 10**6,
    word_length: int = 8,
    max_quadruples: int = 10**5,
    seed: int = 0,
) -> DicksonVerdict:
    """Decide whether S generates SL_2(F_p).

    method="closure" compares |<S>| with |SL_2(F_p)|; "search" looks for a
    nontrivial double commutator among short words (non-solvability) and
    combines it with a capped closure of size > DICKSON_SMALL; "auto" uses
    closure when the group order is at most ``exact_limit``.
    """
    ctx = S.ctx
    if ctx.n != 2 or ctx.field.k != 1 or ctx.p < 5:
        raise PreconditionError("Dickson test needs SL_2(F_p) with p >= 5")
    if method == "auto":
        method = "closure" if ctx.order <= exact_limit else "search"
    if method == "closure":
        H = closure(ctx, S)
        if len(H) == ctx.order:
            return DicksonVerdict("generates_SL2", "closure", len(H))
        if len(H) <= DICKSON_SMALL:
            return DicksonVerdict("proper_small", "closure", len(H))
        return DicksonVerdict("proper_solvable_witness", "closure", len(H))
    if method != "search":
        raise PreconditionError(f"unknown method {method!r}")
    try:
        sample = len(closure(ctx, S, cap=DICKSON_SMALL))
    except BudgetError:
        sample = DICKSON_SMALL + 1
    if sample == ctx.order:
        return DicksonVerdict("generates_SL2", "search", sample)
    if sample <= DICKSON_SMALL:
        return DicksonVerdict("proper_small", "search", sample)
    words = _words_up_to(ctx, S, word_length, 64)
    rng = substream(seed, "dickson")
    tried = 0
    batch = 4096
    while tried < max_quadruples:
        take = min(batch, max_quadruples - tried)
        idx = rng.integers(0, len(words), size=(take, 4))
        h = [words[idx[:, i]] for i in range(4)]
        dc = double_commutator(ctx, *h)
        nontrivial = ~np.all((dc == ctx.identity_matrix()).reshape(take, -1), axis=1)
        if np.any(nontrivial):
            j = int(np.flatnonzero(nontrivial)[0])
            tried += j + 1
            wit = tuple(Elem(ctx, ctx.encode_one(h[i][j])) for i in range(4))
            return DicksonVerdict("generates_SL2", "search", sample, wit, tried)
        tried += take
    if tried == 0:
        return DicksonVerdict("undecided", "search", sample)
    return DicksonVerdict("proper_solvable_witness", "search", sample, None, tried)


# -- polynomials and the grid lemma -------------------------------------------------------------


@dataclass
class Poly:
    """Multivariate polynomial over F_p as {exponent tuple: coefficient}."""

    p: int
    nvars: int
    terms: dict[tuple[int, ...], int] = field(default_factory=dict)

    def __post_init__(self):
        self.terms = {e: c % self.p for e, c in self.terms.items() if c % self.p}

    @classmethod
    def const(cls, p: int, nvars: int, c: int) -> Poly:
        return cls(p, nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, p: int, nvars: int, i: int) -> Poly:
        e = [0] * nvars
        e[i] = 1
        return cls(p, nvars, {tuple(e): 1})

    def __add__(self, other: Poly) -> Poly:
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return Poly(self.p, self.nvars, out)

    def __neg__(self) -> Poly:
        return Poly(self.p, self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: Poly) -> Poly:
        return self + (-other)

    def __mul__(self, other: Poly) -> Poly:
        out: dict[tuple[int, ...], int] = {}
        for (e1, c1), (e2, c2) in itertools.product(self.terms.items(), other.terms.items()):
            e = tuple(a + b for a, b in zip(e1, e2))
            out[e] = out.get(e, 0) + c1 * c2
        return Poly(self.p, self.nvars, out)

    def is_zero(self) -> bool:
        return not self.terms

    def degree_in(self, i: int) -> int:
        return max((e[i] for e in self.terms), default=0)

    def evaluate(self, xs: Sequence[np.ndarray]) -> np.ndarray:
        shape = np.broadcast_shapes(*(x.shape for x in xs))
        total = np.zeros(shape, dtype=np.int64)
        for e, c in self.terms.items():
            term = np.full(shape, c, dtype=np.int64)
            for x, k in zip(xs, e):
                for _ in range(k):
                    term = term * x % self.p
            total = (total + term) % self.p
        return total

    @classmethod
    def parse(cls, text: str, p: int, nvars: int) -> Poly:
        try:
            node = ast.parse(text.strip(), mode="eval").body
        except SyntaxError as exc:
            raise PreconditionError(f"cannot parse polynomial {text!r}: {exc.msg}") from None
        binops = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul}

        def build(n) -> Poly:
            if isinstance(n, ast.BinOp) and type(n.op) in binops:
                return binops[type(n.op)](build(n.left), build(n.right))
            if isinstance(n, ast.BinOp) and isinstance(n.op, ast.Pow) and isinstance(n.right, ast.Constant):
                base, out = build(n.left), cls.const(p, nvars, 1)
                for _ in range(int(n.right.value)):
                    out = out * base
                return out
            if isinstance(n, ast.UnaryOp) and isinstance(n.op, ast.USub):
                return -build(n.operand)
            if isinstance(n, ast.Constant) and isinstance(n.value, int):
                return cls.const(p, nvars, n.value)
            if isinstance(n, ast.Name) and n.id.startswith("x") and n.id[1:].isdigit():
                i = int(n.id[1:]) - 1
                if not 0 <= i < nvars:
                    raise PreconditionError(f"variable {n.id} outside x1..x{nvars}")
                return cls.var(p, nvars, i)
            raise PreconditionError(f"unsupported polynomial element: {ast.dump(n)}")

        return build(node)


def grid_vanishing_check(poly: Poly, S: ScalarSet) -> bool:
    """Whether ``poly`` vanishes on S^m.

    When every per-variable degree is below |S| this is equivalent to the
    polynomial being zero; otherwise the check is inconclusive and raises.
    """
    m = poly.nvars
    if m > 4:
        raise PreconditionError("grid check supports at most 4 variables")
    d = max((poly.degree_in(i) for i in range(m)), default=0)
    if len(S) <= d:
        raise PreconditionError(f"inconclusive: |S| = {len(S)} does not exceed the per-variable degree {d}")
    if len(S) ** m > TUPLE_BUDGET:
        raise BudgetError("grid too large")
    vals = S.values % poly.p
    xs = [vals.reshape((1,) * i + (-1,) + (1,) * (m - 1 - i)) for i in range(m)]
    return bool(np.all(poly.evaluate(xs) == 0)) if m else poly.is_zero()


def commutator_nonvanishing_witness(A: ScalarSet, seed: int = 0, tries: int = 20000) -> tuple[int, ...] | None:
    """Twelve entries of A whose lifted matrices have a nontrivial double
    commutator, showing the cleared-denominator polynomial is not zero."""
    ctx = lift_group(A)
    F = A.field
    rng = substream(seed, "commutator-witness")
    vals = A.values
    if np.any(vals == 0):
        raise PreconditionError("0 must not lie in A")
    for start in range(0, tries, 1024):
        take = min(1024, tries - start)
        a = vals[rng.integers(0, len(vals), size=(take, 12))]
        hs = []
        for i in range(4):
            a1, a2, a3 = a[:, 3 * i], a[:, 3 * i + 1], a[:, 3 * i + 2]
            d = F.mul(F.add(F.embed(1), F.mul(a2, a3)), F.inv(a1))
            hs.append(np.stack([np.stack([a1, a2], -1), np.stack([a3, d], -1)], -2))
        dc = double_commutator(ctx, *hs)
        bad = ~np.all((dc == ctx.identity_matrix()).reshape(take, -1), axis=1)
        if np.any(bad):
            return tuple(int(x) for x in a[int(np.flatnonzero(bad)[0])])
    return None
