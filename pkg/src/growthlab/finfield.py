"""Exact arithmetic over F_p and F_{p^2}.

Elements are integer codes in ``[0, q)``.  For ``k == 1`` the code is the
canonical residue.  For ``k == 2`` the code ``a + b*p`` stands for the pair
``(a, b)``, i.e. ``a + b*theta`` where ``theta`` is a root of the modulus.

All arithmetic methods accept Python ints or numpy integer arrays and
broadcast like numpy ufuncs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError

P_LIMIT = 1 << 31


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def primes_between(lo: int, hi: int) -> list[int]:
    return [n for n in range(lo, hi + 1) if is_prime(n)]


def _has_root(b: int, c: int, p: int) -> bool:
    return any((x * x + b * x + c) % p == 0 for x in range(p))


@dataclass(frozen=True)
class FieldCtx:
    """Arithmetic context for F_q with q = p**k, k in {1, 2}.

    ``modulus`` is ``(b, c)`` for the monic irreducible ``x^2 + b x + c``
    when ``k == 2`` and ``None`` otherwise.
    """

    p: int
    k: int = 1
    modulus: tuple[int, int] | None = None
    q: int = field(init=False)

    def __post_init__(self):
        if not is_prime(self.p):
            raise PreconditionError(f"{self.p} is not prime")
        if self.p >= P_LIMIT:
            raise PreconditionError(f"p = {self.p} exceeds 2^31")
        if self.k not in (1, 2):
            raise PreconditionError(f"unsupported extension degree k = {self.k}")
        if self.k == 1 and self.modulus is not None:
            raise PreconditionError("prime field takes no modulus")
        if self.k == 2:
            if self.modulus is None:
                raise PreconditionError("k = 2 requires a modulus")
            b, c = (int(v) % self.p for v in self.modulus)
            if _has_root(b, c, self.p):
                raise PreconditionError(f"x^2 + {b}x + {c} is reducible mod {self.p}")
            object.__setattr__(self, "modulus", (b, c))
        object.__setattr__(self, "q", self.p**self.k)

    # -- elements ---------------------------------------------------------

    def elements(self) -> np.ndarray:
        return np.arange(self.q, dtype=np.int64)

    def from_pair(self, a: int, b: int = 0) -> int:
        return a % self.p + (b % self.p) * self.p if self.k == 2 else a % self.p

    def to_pair(self, x: int) -> tuple[int, int]:
        x = int(x)
        return (x % self.p, x // self.p) if self.k == 2 else (x, 0)

    def embed(self, a):
        """Image of an F_p residue (or array of residues) in this field."""
        return np.asarray(a, dtype=np.int64) % self.p if isinstance(a, np.ndarray) else int(a) % self.p

    # -- arithmetic -------------------------------------------------------

    def add(self, x, y):
        p = self.p
        if self.k == 1:
            return (x + y) % p
        return (x % p + y % p) % p + ((x // p + y // p) % p) * p

    def neg(self, x):
        p = self.p
        if self.k == 1:
            return (-x) % p
        return (-(x % p)) % p + ((-(x // p)) % p) * p

    def sub(self, x, y):
        return self.add(x, self.neg(y))

    def mul(self, x, y):
        p = self.p
        if self.k == 1:
            return (x * y) % p
        a, b = x % p, x // p
        c, d = y % p, y // p
        mb, mc = self.modulus
        # theta^2 = -mb*theta - mc
        bd = (b * d) % p
        re = (a * c - mc * bd) % p
        im = ((a * d) % p + (b * c) % p - (mb * bd) % p) % p
        return re + im * p

    def pow(self, x: int, e: int) -> int:
        result, base = 1, int(x)
        if e < 0:
            base, e = self.inv(base), -e
        while e:
            if e & 1:
                result = int(self.mul(result, base))
            base = int(self.mul(base, base))
            e >>= 1
        return result

    def norm(self, x):
        """Norm to F_p: x * x^p.  For k == 1 this is x itself."""
        if self.k == 1:
            return x % self.p
        p = self.p
        a, b = x % p, x // p
        mb, mc = self.modulus
        # N(a + b theta) = a^2 - mb*a*b + mc*b^2
        return ((a * a) % p - (((mb * a) % p) * b) % p + (((mc * b) % p) * b) % p) % p

    def conj(self, x):
        """Frobenius conjugate of a + b theta, namely a + b theta^p = (a - mb b) - b theta."""
        if self.k == 1:
            return x % self.p
        p = self.p
        a, b = x % p, x // p
        mb, _ = self.modulus
        return (a - mb * b) % p + ((-b) % p) * p

    def inv(self, x):
        if isinstance(x, np.ndarray):
            if np.any(x == 0):
                raise ZeroDivisionError("inverse of zero in finite field")
            if self.k == 1:
                return _inv_mod_array(x % self.p, self.p)
            n = _inv_mod_array(self.norm(x), self.p)
            return self.mul(self.conj(x), n)
        x = int(x) % self.q
        if x == 0:
            raise ZeroDivisionError("inverse of zero in finite field")
        if self.k == 1:
            return _egcd_inv(x, self.p)
        return int(self.mul(self.conj(x), _egcd_inv(int(self.norm(x)), self.p)))

    def frobenius(self, x):
        return self.conj(x)

    def is_square(self, d: int) -> str:
        """Classify ``d`` as ``"yes"``, ``"no"`` or ``"zero"`` by Euler's criterion."""
        if self.k != 1:
            raise PreconditionError("is_square is defined for prime fields only")
        d %= self.p
        if d == 0:
            return "zero"
        if self.p == 2:
            return "yes"
        return "yes" if pow(d, (self.p - 1) // 2, self.p) == 1 else "no"

    def __repr__(self) -> str:
        if self.k == 1:
            return f"F_{self.p}"
        b, c = self.modulus
        return f"F_{self.q}[x^2+{b}x+{c}]"


def _egcd_inv(x: int, p: int) -> int:
    r0, r1, s0, s1 = p, x, 0, 1
    while r1:
        t = r0 // r1
        r0, r1 = r1, r0 - t * r1
        s0, s1 = s1, s0 - t * s1
    return s0 % p


def _inv_mod_array(x: np.ndarray, p: int) -> np.ndarray:
    """Vectorized extended Euclid; ``x`` must be nonzero mod p."""
    r0 = np.full(x.shape, p, dtype=np.int64)
    r1 = np.asarray(x, dtype=np.int64).copy()
    s0 = np.zeros(x.shape, dtype=np.int64)
    s1 = np.ones(x.shape, dtype=np.int64)
    while np.any(r1):
        live = r1 != 0
        t = np.where(live, r0 // np.where(live, r1, 1), 0)
        r0, r1 = np.where(live, r1, r0), np.where(live, r0 - t * r1, r1)
        s0, s1 = np.where(live, s1, s0), np.where(live, s0 - t * s1, s1)
    return s0 % p


def make_field(p: int, k: int = 1) -> FieldCtx:
    """Build F_{p^k}; for k = 2 the modulus is the lexicographically least
    irreducible monic quadratic x^2 + b x + c, ordered by (b, c)."""
    if not is_prime(p):
        raise PreconditionError(f"{p} is not prime")
    if k == 1:
        return FieldCtx(p)
    if k != 2:
        raise PreconditionError(f"unsupported extension degree k = {k}")
    for b in range(p):
        for c in range(p):
            if not _has_root(b, c, p):
                return FieldCtx(p, 2, (b, c))
    raise AssertionError("unreachable: an irreducible quadratic always exists")
