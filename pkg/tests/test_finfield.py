import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from growthlab.errors import PreconditionError
from growthlab.finfield import FieldCtx, is_prime, make_field, primes_between

SMALL_FIELDS = [(2, 1), (3, 1), (5, 1), (7, 1), (2, 2), (3, 2), (5, 2), (7, 2)]


def naive_prime(n):
    return n >= 2 and all(n % d for d in range(2, n))


def test_is_prime_matches_naive():
    for n in range(-3, 500):
        assert is_prime(n) == naive_prime(n), n


def test_primes_between():
    assert primes_between(10, 30) == [11, 13, 17, 19, 23, 29]


def test_rejects_bad_parameters():
    with pytest.raises(PreconditionError):
        make_field(8)
    with pytest.raises(PreconditionError):
        make_field(5, 3)
    with pytest.raises(PreconditionError):
        FieldCtx(5, 2, modulus=(0, 1))  # x^2 + 1 has roots over F_5


@pytest.mark.parametrize("p,k", SMALL_FIELDS)
def test_field_axioms_exhaustive(p, k):
    F = make_field(p, k)
    els = F.elements()
    assert len(els) == F.q == p**k
    x, y = np.meshgrid(els, els, indexing="ij")
    add = F.add(x, y)
    mul = F.mul(x, y)
    assert np.array_equal(add, add.T)
    assert np.array_equal(mul, mul.T)
    # every row of the addition table is a permutation; likewise multiplication by nonzero
    for i in range(F.q):
        assert len(set(add[i].tolist())) == F.q
        if i:
            assert len(set(mul[i, 1:].tolist())) == F.q - 1
    for a, b, c in itertools.product(els[: min(F.q, 9)], repeat=3):
        assert F.mul(a, F.add(b, c)) == F.add(F.mul(a, b), F.mul(a, c))
        assert F.mul(F.mul(a, b), c) == F.mul(a, F.mul(b, c))


@pytest.mark.parametrize("p,k", SMALL_FIELDS + [(11, 2), (13, 1), (101, 1)])
def test_inverse_against_brute_force(p, k):
    F = make_field(p, k)
    for x in range(1, F.q):
        brute = [y for y in range(1, F.q) if F.mul(x, y) == 1]
        assert brute == [F.inv(x)]
    arr = np.arange(1, F.q)
    assert np.all(F.mul(arr, F.inv(arr)) == 1)
    with pytest.raises(ZeroDivisionError):
        F.inv(0)


@pytest.mark.parametrize("p", [2, 3, 5, 7])
def test_frobenius_fixes_prime_field(p):
    F = make_field(p, 2)
    fixed = [x for x in range(F.q) if F.frobenius(x) == x]
    assert fixed == list(range(p))
    for x in range(F.q):
        assert F.frobenius(x) == F.pow(x, p)
        assert F.frobenius(F.frobenius(x)) == x
        assert F.norm(x) == F.mul(x, F.conj(x)) < p


def test_modulus_is_least_irreducible():
    F = make_field(3, 2)
    assert F.modulus == (0, 1)  # x^2 + 1
    F = make_field(7, 2)
    assert F.modulus == (0, 1)
    F = make_field(5, 2)
    assert F.modulus == (0, 2)  # x^2 + 2


def test_square_count():
    for p in primes_between(3, 101):
        F = make_field(p)
        verdicts = [F.is_square(d) for d in range(p)]
        assert verdicts[0] == "zero"
        assert verdicts.count("yes") == (p - 1) // 2
        squares = {d * d % p for d in range(1, p)}
        assert {d for d in range(1, p) if verdicts[d] == "yes"} == squares


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([5, 7, 11, 13]), st.integers(0, 10**6), st.integers(0, 10**6), st.integers(-20, 40))
def test_power_and_pair_roundtrip(p, a, b, e):
    F = make_field(p, 2)
    x = F.from_pair(a % p, b % p)
    assert F.to_pair(x) == (a % p, b % p)
    if x == 0:
        return
    expected = 1
    base = x if e >= 0 else F.inv(x)
    for _ in range(abs(e)):
        expected = F.mul(expected, base)
    assert F.pow(x, e) == expected
