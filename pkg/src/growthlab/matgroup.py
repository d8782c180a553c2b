"""SL_n(F_q) for n in {2, 3}: packed element keys, batched arithmetic,
enumeration, sampling, centralizers and maximal tori.

Batches of matrices are ``int64`` arrays of shape ``(N, n, n)`` holding field
codes.  Sets of elements are sorted arrays of ``uint64`` keys.
"""

from __future__ import annotations

import functools
import math
from collections.abc import Callable, Iterable, Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetError, PreconditionError
from .finfield import FieldCtx, make_field
from .rng import substream, worker_count

ENUM_CAP = 10**7
PAIR_BUDGET = 10**9
_CHUNK_PAIRS = 1 << 21

Predicate = Callable[[np.ndarray], np.ndarray]


def sl_order(n: int, q: int) -> int:
    num = 1
    for i in range(n):
        num *= q**n - q**i
    return num // (q - 1)


@dataclass(frozen=True)
class GroupCtx:
    field: FieldCtx
    n: int
    d_min: int | None = None
    dim_G: int = field(init=False)
    rank: int = field(init=False)
    order: int = field(init=False)
    bits: int = field(init=False)
    dim_table: dict = field(init=False, compare=False, hash=False, repr=False)

    def __post_init__(self):
        n, q = self.n, self.field.q
        if n not in (2, 3):
            raise PreconditionError(f"only n in {{2, 3}} is supported, got n = {n}")
        order = sl_order(n, q)
        if order >= 1 << 128:
            raise BudgetError("group order does not fit in 128 bits")
        set_ = functools.partial(object.__setattr__, self)
        set_("dim_G", n * n - 1)
        set_("rank", n - 1)
        set_("order", order)
        set_("bits", max(1, (q - 1).bit_length()))
        set_(
            "dim_table",
            {
                "group": n * n - 1,
                "maximal_torus": n - 1,
                "regular_ss_conjugacy_class": n * n - n,
                "singular_set": n * n - 2,
                "centralizer_regular_ss": n - 1,
            },
        )
        if self.d_min is None and n == 2 and self.field.k == 1 and self.field.p >= 5:
            # smallest nontrivial complex representation of SL_2(F_p), p >= 5
            set_("d_min", (self.field.p - 1) // 2)

    @property
    def q(self) -> int:
        return self.field.q

    @property
    def p(self) -> int:
        return self.field.p

    @property
    def key_bits(self) -> int:
        return self.bits * self.n * self.n

    def __repr__(self) -> str:
        return f"SL_{self.n}({self.field!r})"

    # -- encoding ----------------------------------------------------------

    def encode(self, mats: np.ndarray) -> np.ndarray:
        """Row-major packing, first entry in the most significant bits."""
        if self.key_bits > 64:
            raise BudgetError(f"{self!r}: packed keys need {self.key_bits} bits; batch operations support 64")
        flat = np.asarray(mats, dtype=np.int64).reshape(-1, self.n * self.n).astype(np.uint64)
        key = np.zeros(flat.shape[0], dtype=np.uint64)
        shift = np.uint64(self.bits)
        for i in range(self.n * self.n):
            key = (key << shift) | flat[:, i]
        return key

    def decode(self, keys: np.ndarray) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.uint64)
        m = self.n * self.n
        out = np.empty((keys.shape[0], m), dtype=np.int64)
        mask = np.uint64((1 << self.bits) - 1)
        shift = np.uint64(self.bits)
        k = keys.copy()
        for i in range(m - 1, -1, -1):
            out[:, i] = (k & mask).astype(np.int64)
            k >>= shift
        return out.reshape(-1, self.n, self.n)

    def encode_one(self, mat) -> int:
        key = 0
        for v in np.asarray(mat, dtype=np.int64).ravel():
            key = (key << self.bits) | int(v)
        return key

    def decode_one(self, key: int) -> np.ndarray:
        m = self.n * self.n
        vals = [(key >> (self.bits * (m - 1 - i))) & ((1 << self.bits) - 1) for i in range(m)]
        return np.array(vals, dtype=np.int64).reshape(self.n, self.n)

    # -- batched arithmetic --------------------------------------------------

    def matmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        F, n = self.field, self.n
        if F.k == 1 and n * (F.p - 1) ** 2 < 1 << 63:
            return np.matmul(a, b) % F.p
        shape = np.broadcast_shapes(a.shape, b.shape)
        out = np.zeros(shape, dtype=np.int64)
        for i in range(n):
            for j in range(n):
                acc = np.zeros(shape[:-2], dtype=np.int64)
                for t in range(n):
                    acc = F.add(acc, F.mul(a[..., i, t], b[..., t, j]))
                out[..., i, j] = acc
        return out

    def det(self, m: np.ndarray) -> np.ndarray:
        F = self.field
        if self.n == 2:
            return F.sub(F.mul(m[..., 0, 0], m[..., 1, 1]), F.mul(m[..., 0, 1], m[..., 1, 0]))
        total = np.zeros(m.shape[:-2], dtype=np.int64)
        for j in range(3):
            minor = F.sub(
                F.mul(m[..., 1, (j + 1) % 3], m[..., 2, (j + 2) % 3]),
                F.mul(m[..., 1, (j + 2) % 3], m[..., 2, (j + 1) % 3]),
            )
            total = F.add(total, F.mul(m[..., 0, j], minor))
        return total

    def adjugate(self, m: np.ndarray) -> np.ndarray:
        F = self.field
        out = np.empty_like(m)
        if self.n == 2:
            out[..., 0, 0] = m[..., 1, 1]
            out[..., 1, 1] = m[..., 0, 0]
            out[..., 0, 1] = F.neg(m[..., 0, 1])
            out[..., 1, 0] = F.neg(m[..., 1, 0])
            return out
        for i in range(3):
            for j in range(3):
                r = [x for x in range(3) if x != j]
                c = [x for x in range(3) if x != i]
                minor = F.sub(
                    F.mul(m[..., r[0], c[0]], m[..., r[1], c[1]]),
                    F.mul(m[..., r[0], c[1]], m[..., r[1], c[0]]),
                )
                out[..., i, j] = minor if (i + j) % 2 == 0 else F.neg(minor)
        return out

    def inverse(self, m: np.ndarray) -> np.ndarray:
        # det = 1, so the adjugate is the inverse
        return self.adjugate(m)

    def trace(self, m: np.ndarray) -> np.ndarray:
        F = self.field
        t = m[..., 0, 0]
        for i in range(1, self.n):
            t = F.add(t, m[..., i, i])
        return t

    def identity_matrix(self) -> np.ndarray:
        return np.eye(self.n, dtype=np.int64)

    def scalar_mask(self, m: np.ndarray) -> np.ndarray:
        off = ~np.eye(self.n, dtype=bool)
        diag = np.diagonal(m, axis1=-2, axis2=-1)
        return np.all(m[..., off] == 0, axis=-1) & np.all(diag == diag[..., :1], axis=-1)

    # -- dense index -----------------------------------------------------------

    @property
    def has_dense_index(self) -> bool:
        return self.n == 2 and self.order <= ENUM_CAP

    def dense_index(self, m: np.ndarray) -> np.ndarray:
        """Bijection SL_2(F_q) -> [0, q^3 - q)."""
        q = self.q
        a, b, c, d = m[:, 0, 0], m[:, 0, 1], m[:, 1, 0], m[:, 1, 1]
        return np.where(a != 0, (a - 1) * q * q + b * q + c, (q - 1) * q * q + (b - 1) * q + d)

    # -- elements --------------------------------------------------------------

    def elem(self, rows) -> Elem:
        F = self.field
        mat = np.array(rows, dtype=np.int64).reshape(self.n, self.n)
        if np.any(mat < 0) or np.any(mat >= F.q):
            mat = mat % F.q if F.k == 1 else mat
        if np.any(mat < 0) or np.any(mat >= F.q):
            raise PreconditionError(f"entries must be field codes in [0, {F.q})")
        if int(self.det(mat)) != 1:
            raise PreconditionError(f"matrix {mat.tolist()} does not have determinant 1")
        return Elem(self, self.encode_one(mat))

    def identity(self) -> Elem:
        return Elem(self, self.encode_one(self.identity_matrix()))

    def elementary_generators(self) -> list[Elem]:
        """Transvections I + t e_ij, i != j, for t in an F_p-basis of F_q."""
        basis = [1] if self.field.k == 1 else [1, self.field.p]
        gens = []
        for i in range(self.n):
            for j in range(self.n):
                if i == j:
                    continue
                for t in basis:
                    m = self.identity_matrix()
                    m[i, j] = t
                    gens.append(Elem(self, self.encode_one(m)))
        return gens


@dataclass(frozen=True, eq=True)
class Elem:
    ctx: GroupCtx = field(compare=False, repr=False)
    key: int

    @property
    def entries(self) -> np.ndarray:
        return self.ctx.decode_one(self.key)

    def __mul__(self, other: Elem) -> Elem:
        return mul(self.ctx, self, other)

    def inv(self) -> Elem:
        return inverse(self.ctx, self)

    def __pow__(self, e: int) -> Elem:
        result, base = self.ctx.identity(), self if e >= 0 else self.inv()
        e = abs(e)
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def __repr__(self) -> str:
        return f"Elem({self.entries.tolist()})"


class ElemSet:
    """Deduplicated set of group elements stored as sorted packed keys."""

    def __init__(self, ctx: GroupCtx, keys: np.ndarray, *, sorted_unique: bool = False):
        self.ctx = ctx
        keys = np.asarray(keys, dtype=np.uint64)
        self.keys = keys if sorted_unique else np.unique(keys)
        self.keys.setflags(write=False)
        self._mats: np.ndarray | None = None

    @classmethod
    def from_matrices(cls, ctx: GroupCtx, mats: np.ndarray) -> ElemSet:
        mats = np.asarray(mats, dtype=np.int64).reshape(-1, ctx.n, ctx.n)
        return cls(ctx, ctx.encode(mats))

    @classmethod
    def from_elems(cls, ctx: GroupCtx, elems: Iterable[Elem]) -> ElemSet:
        return cls(ctx, np.array([e.key for e in elems], dtype=np.uint64))

    @classmethod
    def empty(cls, ctx: GroupCtx) -> ElemSet:
        return cls(ctx, np.zeros(0, dtype=np.uint64), sorted_unique=True)

    @property
    def matrices(self) -> np.ndarray:
        if self._mats is None:
            self._mats = self.ctx.decode(self.keys)
            self._mats.setflags(write=False)
        return self._mats

    def __len__(self) -> int:
        return int(self.keys.shape[0])

    def __iter__(self) -> Iterator[Elem]:
        for k in self.keys:
            yield Elem(self.ctx, int(k))

    def __contains__(self, g: Elem) -> bool:
        return bool(self.contains_keys(np.array([g.key], dtype=np.uint64))[0])

    def __eq__(self, other) -> bool:
        return isinstance(other, ElemSet) and np.array_equal(self.keys, other.keys)

    def __repr__(self) -> str:
        return f"ElemSet({self.ctx!r}, size={len(self)})"

    def contains_keys(self, keys: np.ndarray) -> np.ndarray:
        if len(self) == 0:
            return np.zeros(len(keys), dtype=bool)
        pos = np.searchsorted(self.keys, keys)
        pos = np.minimum(pos, len(self) - 1)
        return self.keys[pos] == keys

    def contains_mask(self, mats: np.ndarray) -> np.ndarray:
        """Membership of a matrix batch of any leading shape."""
        mats = np.asarray(mats)
        lead = mats.shape[:-2]
        keys = self.ctx.encode(mats.reshape(-1, self.ctx.n, self.ctx.n))
        return self.contains_keys(keys).reshape(lead)

    def issubset(self, other: ElemSet) -> bool:
        return bool(np.all(other.contains_keys(self.keys)))

    def union(self, other: ElemSet) -> ElemSet:
        return ElemSet(self.ctx, np.union1d(self.keys, other.keys), sorted_unique=True)

    def intersection(self, other: ElemSet) -> ElemSet:
        return ElemSet(self.ctx, np.intersect1d(self.keys, other.keys), sorted_unique=True)

    def difference(self, other: ElemSet) -> ElemSet:
        return ElemSet(self.ctx, np.setdiff1d(self.keys, other.keys), sorted_unique=True)

    def filter(self, pred: Predicate) -> ElemSet:
        if len(self) == 0:
            return self
        mask = np.asarray(pred(self.matrices), dtype=bool)
        return ElemSet(self.ctx, self.keys[mask], sorted_unique=True)

    def inverses(self) -> ElemSet:
        return ElemSet.from_matrices(self.ctx, self.ctx.inverse(self.matrices))

    def is_symmetric(self) -> bool:
        return self.inverses() == self

    def contains_identity(self) -> bool:
        return self.ctx.identity() in self

    def symmetrize(self, with_identity: bool = True) -> ElemSet:
        out = self.union(self.inverses())
        if with_identity:
            out = out.union(ElemSet.from_elems(self.ctx, [self.ctx.identity()]))
        return out

    def min_key(self) -> int:
        return int(self.keys[0])


# -- visited bookkeeping ------------------------------------------------------


class Visited:
    """Membership structure for searches: dense bitmap over the SL_2 index
    when available, sorted key array otherwise."""

    def __init__(self, ctx: GroupCtx):
        self.ctx = ctx
        self.dense = ctx.has_dense_index
        if self.dense:
            self.mask = np.zeros(ctx.order, dtype=bool)
            self.key_at = np.zeros(ctx.order, dtype=np.uint64)
        else:
            self.sorted = np.zeros(0, dtype=np.uint64)
        self.count = 0

    def add_new(self, mats: np.ndarray, keys: np.ndarray) -> np.ndarray:
        """Insert a batch; return a mask selecting the first occurrence of
        each element that was not already present."""
        if len(keys) == 0:
            return np.zeros(0, dtype=bool)
        uniq, first = np.unique(keys, return_index=True)
        if self.dense:
            idx = self.ctx.dense_index(mats[first])
            fresh = ~self.mask[idx]
            self.mask[idx[fresh]] = True
            self.key_at[idx[fresh]] = uniq[fresh]
        else:
            fresh = ~_in_sorted(self.sorted, uniq)
            self.sorted = np.union1d(self.sorted, uniq[fresh])
        out = np.zeros(len(keys), dtype=bool)
        out[first[fresh]] = True
        self.count += int(fresh.sum())
        return out

    def keys(self) -> np.ndarray:
        if self.dense:
            return np.sort(self.key_at[self.mask])
        return self.sorted


def _in_sorted(sorted_keys: np.ndarray, keys: np.ndarray) -> np.ndarray:
    if len(sorted_keys) == 0:
        return np.zeros(len(keys), dtype=bool)
    pos = np.minimum(np.searchsorted(sorted_keys, keys), len(sorted_keys) - 1)
    return sorted_keys[pos] == keys


# -- operations ----------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def make_group(n: int, p: int, k: int = 1) -> GroupCtx:
    return GroupCtx(make_field(p, k), n)


def group_order(ctx: GroupCtx) -> int:
    return ctx.order


def mul(ctx: GroupCtx, a: Elem, b: Elem) -> Elem:
    m = ctx.matmul(ctx.decode_one(a.key), ctx.decode_one(b.key))
    return Elem(ctx, ctx.encode_one(m))


def inverse(ctx: GroupCtx, a: Elem) -> Elem:
    return Elem(ctx, ctx.encode_one(ctx.inverse(ctx.decode_one(a.key))))


def identity(ctx: GroupCtx) -> Elem:
    return ctx.identity()


def char_poly(ctx: GroupCtx, g: Elem) -> list[int]:
    """Coefficients of det(xI - g), highest degree first."""
    F = ctx.field
    m = g.entries
    tr = int(ctx.trace(m))
    if ctx.n == 2:
        return [1, int(F.neg(tr)), int(ctx.det(m))]
    c2 = 0
    for i, j in ((0, 1), (0, 2), (1, 2)):
        minor = F.sub(F.mul(int(m[i, i]), int(m[j, j])), F.mul(int(m[i, j]), int(m[j, i])))
        c2 = F.add(c2, minor)
    return [1, int(F.neg(tr)), int(c2), int(F.neg(int(ctx.det(m))))]


def _poly_trim(f: list[int]) -> list[int]:
    i = 0
    while i < len(f) - 1 and f[i] == 0:
        i += 1
    return f[i:]


def _poly_mod(F: FieldCtx, f: list[int], g: list[int]) -> list[int]:
    f = _poly_trim(list(f))
    g = _poly_trim(g)
    inv_lead = F.inv(g[0])
    while len(f) >= len(g) and any(f):
        c = F.mul(f[0], inv_lead)
        for i in range(len(g)):
            f[i] = int(F.sub(f[i], F.mul(c, g[i])))
        f = _poly_trim(f[1:]) if len(f) > 1 else [0]
    return f


def poly_gcd(F: FieldCtx, f: list[int], g: list[int]) -> list[int]:
    """Monic gcd of two coefficient lists (highest degree first)."""
    f, g = _poly_trim(f), _poly_trim(g)
    while any(g):
        f, g = g, _poly_mod(F, f, g)
    inv_lead = F.inv(f[0]) if f[0] else 1
    return [int(F.mul(c, inv_lead)) for c in f]


def is_regular_ss(ctx: GroupCtx, g: Elem) -> bool:
    if ctx.q <= ctx.n:
        raise PreconditionError(f"regular semisimplicity test needs q > n (q = {ctx.q})")
    F = ctx.field
    f = char_poly(ctx, g)
    deg = len(f) - 1
    df = [int(F.mul(c, (deg - i) % F.p)) for i, c in enumerate(f[:-1])]
    return len(poly_gcd(F, f, df)) == 1


def discriminant(ctx: GroupCtx, mats: np.ndarray) -> np.ndarray:
    """Discriminant of the characteristic polynomial, batched."""
    F = ctx.field
    tr = ctx.trace(mats)
    if ctx.n == 2:
        four = F.embed(4)
        return F.sub(F.mul(tr, tr), four)
    # monic x^3 + a x^2 + b x + c
    a = F.neg(tr)
    b = np.zeros(mats.shape[:-2], dtype=np.int64)
    for i, j in ((0, 1), (0, 2), (1, 2)):
        b = F.add(b, F.sub(F.mul(mats[..., i, i], mats[..., j, j]), F.mul(mats[..., i, j], mats[..., j, i])))
    c = F.neg(ctx.det(mats))

    def k(v):
        return F.embed(v % F.p)

    a2 = F.mul(a, a)
    terms = [
        F.mul(k(18), F.mul(a, F.mul(b, c))),
        F.neg(F.mul(k(4), F.mul(a2, F.mul(a, c)))),
        F.mul(a2, F.mul(b, b)),
        F.neg(F.mul(k(4), F.mul(b, F.mul(b, b)))),
        F.neg(F.mul(k(27), F.mul(c, c))),
    ]
    out = terms[0]
    for t in terms[1:]:
        out = F.add(out, t)
    return out


def regular_ss_mask(ctx: GroupCtx, mats: np.ndarray) -> np.ndarray:
    if ctx.q <= ctx.n:
        raise PreconditionError(f"regular semisimplicity test needs q > n (q = {ctx.q})")
    return discriminant(ctx, mats) != 0


def commuting_mask(ctx: GroupCtx, mats: np.ndarray, g: np.ndarray) -> np.ndarray:
    left = ctx.matmul(mats, g)
    right = ctx.matmul(g, mats)
    return np.all((left == right).reshape(len(mats), -1), axis=1)


def _polynomials_in(ctx: GroupCtx, g: np.ndarray) -> np.ndarray:
    """All sum_i c_i g^i with i < n and coefficients in F_q, as a batch."""
    F, n, q = ctx.field, ctx.n, ctx.q
    powers = [ctx.identity_matrix(), g]
    if n == 3:
        powers.append(ctx.matmul(g, g))
    grids = np.meshgrid(*[np.arange(q, dtype=np.int64)] * n, indexing="ij")
    coeffs = [c.ravel() for c in grids]
    out = np.zeros((len(coeffs[0]), n, n), dtype=np.int64)
    for c, pw in zip(coeffs, powers):
        out = F.add(out, F.mul(c[:, None, None], pw[None, :, :]))
    return out


def centralizer_set(ctx: GroupCtx, g: Elem, ambient: ElemSet | None = None) -> ElemSet:
    """Elements of ``ambient`` (default: the whole group) commuting with ``g``."""
    gm = g.entries
    if ambient is not None:
        if len(ambient) > ENUM_CAP:
            raise BudgetError(f"ambient set of size {len(ambient)} exceeds {ENUM_CAP}")
        if len(ambient) == 0:
            return ambient
        return ElemSet(ctx, ambient.keys[commuting_mask(ctx, ambient.matrices, gm)], sorted_unique=True)
    if ctx.q > ctx.n and bool(regular_ss_mask(ctx, gm[None])[0]):
        # g has distinct eigenvalues, so its commutant is F_q[g]
        if ctx.q**ctx.n > ENUM_CAP:
            raise BudgetError(f"commutant of size q^n = {ctx.q ** ctx.n} exceeds {ENUM_CAP}")
        cands = _polynomials_in(ctx, gm)
        cands = cands[ctx.det(cands) == 1]
        return ElemSet.from_matrices(ctx, cands)
    return centralizer_set(ctx, g, enumerate_group(ctx))


def center(ctx: GroupCtx) -> ElemSet:
    F = ctx.field
    scalars = [w for w in range(1, F.q) if F.pow(w, ctx.n) == 1]
    mats = np.array([np.eye(ctx.n, dtype=np.int64) * w for w in scalars])
    return ElemSet.from_matrices(ctx, mats)


def torus_points(ctx: GroupCtx, g: Elem) -> ElemSet:
    if ctx.q <= ctx.n or not bool(regular_ss_mask(ctx, g.entries[None])[0]):
        raise PreconditionError(f"{g!r} is not regular semisimple")
    if ctx.order > ENUM_CAP:
        raise BudgetError(f"group order {ctx.order} exceeds {ENUM_CAP}")
    return centralizer_set(ctx, g)


def torus_key(ctx: GroupCtx, g: Elem) -> int:
    """Canonical id of the unique maximal torus through a regular ss ``g``:
    the least key of its non-central points."""
    return torus_points(ctx, g).difference(center(ctx)).min_key()


def closure(ctx: GroupCtx, gens: ElemSet, cap: int = ENUM_CAP) -> ElemSet:
    """Subgroup generated by ``gens``."""
    if len(gens) == 0:
        return ElemSet.from_elems(ctx, [ctx.identity()])
    step = gens.symmetrize().matrices
    visited = Visited(ctx)
    ident = ctx.identity_matrix()[None]
    visited.add_new(ident, ctx.encode(ident))
    frontier = ident
    while len(frontier):
        frontier = _expand(ctx, frontier, step, visited)
        if visited.count > cap:
            raise BudgetError(f"closure exceeds cap {cap}")
    return ElemSet(ctx, visited.keys(), sorted_unique=True)


def _expand(ctx: GroupCtx, frontier: np.ndarray, step: np.ndarray, visited: Visited) -> np.ndarray:
    """One BFS layer: right-multiply the frontier by each step, keep new elements."""
    fresh = []
    rows = max(1, _CHUNK_PAIRS // max(1, len(step)))
    for start in range(0, len(frontier), rows):
        block = frontier[start : start + rows]
        prods = ctx.matmul(block[:, None], step[None]).reshape(-1, ctx.n, ctx.n)
        keep = visited.add_new(prods, ctx.encode(prods))
        fresh.append(prods[keep])
    return np.concatenate(fresh) if fresh else np.zeros((0, ctx.n, ctx.n), dtype=np.int64)


@functools.lru_cache(maxsize=8)
def _enumerate_cached(ctx: GroupCtx) -> ElemSet:
    return closure(ctx, ElemSet.from_elems(ctx, ctx.elementary_generators()))


def enumerate_group(ctx: GroupCtx) -> ElemSet:
    if ctx.order > ENUM_CAP:
        raise BudgetError(f"|{ctx!r}| = {ctx.order} exceeds enumeration cap {ENUM_CAP}")
    return _enumerate_cached(ctx)


def random_matrices(ctx: GroupCtx, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` uniform samples: uniform invertible matrices by rejection,
    first row rescaled by det^-1."""
    F, n = ctx.field, ctx.n
    out = []
    have = 0
    while have < count:
        batch = max(16, int((count - have) * 1.5))
        m = rng.integers(0, F.q, size=(batch, n, n), dtype=np.int64)
        d = ctx.det(m)
        m = m[d != 0]
        d = d[d != 0]
        m[:, 0, :] = F.mul(m[:, 0, :], F.inv(d)[:, None])
        out.append(m)
        have += len(m)
    return np.concatenate(out)[:count]


def random_element(ctx: GroupCtx, rng_seed: int, label: str = "random_element") -> Elem:
    m = random_matrices(ctx, 1, substream(rng_seed, label))[0]
    return Elem(ctx, ctx.encode_one(m))


def random_symmetric_set(ctx: GroupCtx, size: int, rng: np.random.Generator, with_identity: bool = True) -> ElemSet:
    """Symmetric set with identity grown from uniform samples until it reaches
    ``size`` elements (may exceed by one when an inverse pair is added)."""
    if size > ctx.order:
        raise PreconditionError(f"cannot draw {size} distinct elements from a group of order {ctx.order}")
    base = ElemSet.from_elems(ctx, [ctx.identity()]) if with_identity else ElemSet.empty(ctx)
    cur = base
    while len(cur) < size:
        need = size - len(cur)
        cand = random_matrices(ctx, need, rng)
        for m in cand:
            if len(cur) >= size:
                break
            pair = ElemSet.from_matrices(ctx, np.stack([m, ctx.inverse(m)]))
            cur = cur.union(pair)
    return cur


def product_set(a: ElemSet, b: ElemSet, budget: int = PAIR_BUDGET) -> ElemSet:
    ctx = a.ctx
    pairs = len(a) * len(b)
    if pairs > budget:
        raise BudgetError(f"product set needs {pairs} pairs, budget {budget}; use a sampling experiment instead")
    if pairs == 0:
        return ElemSet.empty(ctx)
    am, bm = a.matrices, b.matrices
    rows = max(1, _CHUNK_PAIRS // len(b))
    starts = list(range(0, len(a), rows))

    def block(start: int) -> np.ndarray:
        prods = ctx.matmul(am[start : start + rows, None], bm[None]).reshape(-1, ctx.n, ctx.n)
        return np.unique(ctx.encode(prods))

    workers = min(worker_count(), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(block, starts))
    else:
        parts = [block(s) for s in starts]
    if ctx.has_dense_index and len(parts) > 1:
        mask = np.zeros(ctx.order, dtype=bool)
        key_at = np.zeros(ctx.order, dtype=np.uint64)
        for part in parts:
            idx = ctx.dense_index(ctx.decode(part))
            mask[idx] = True
            key_at[idx] = part
        return ElemSet(ctx, np.sort(key_at[mask]), sorted_unique=True)
    return ElemSet(ctx, np.unique(np.concatenate(parts)), sorted_unique=True)


def ball(gens: ElemSet, radius: int, budget: int = PAIR_BUDGET) -> ElemSet:
    """(S u S^-1 u {1})^radius."""
    ctx = gens.ctx
    step = gens.symmetrize()
    cur = ElemSet.from_elems(ctx, [ctx.identity()])
    for _ in range(radius):
        nxt = product_set(cur, step, budget)
        if nxt == cur:
            break
        cur = nxt
    return cur


def finite_index_generation_check(ctx: GroupCtx, S: ElemSet, member: Predicate, d: int) -> bool:
    """Check that S^(2d-1) meets the index-d subgroup {member} in a
    generating set of that subgroup."""
    if not S.contains_identity() or not S.is_symmetric():
        raise PreconditionError("S must be symmetric and contain the identity")
    gamma = closure(ctx, S)
    gamma0 = gamma.filter(member)
    if len(gamma0) == 0 or not gamma0.contains_identity():
        raise PreconditionError("member predicate does not contain the identity")
    if not gamma0.inverses().issubset(gamma0) or not product_set(gamma0, gamma0).issubset(gamma0):
        raise PreconditionError("member predicate is not closed under products and inverses on <S>")
    if len(gamma) != d * len(gamma0):
        raise PreconditionError(f"subgroup has index {len(gamma) // len(gamma0)}, expected {d}")
    power = S
    for _ in range(2 * d - 2):
        nxt = product_set(power, S)
        if nxt == power:
            break
        power = nxt
    witnesses = power.filter(member)
    return closure(ctx, witnesses) == gamma0


def log_size(n: int) -> float:
    return math.log(n) if n > 0 else float("-inf")
