import math

import numpy as np
import pytest

from growthlab.errors import PreconditionError
from growthlab.matgroup import (
    ElemSet,
    ball,
    enumerate_group,
    is_regular_ss,
    make_group,
    random_element,
    random_symmetric_set,
)
from growthlab.rng import substream
from growthlab.varieties import (
    centralizer,
    conjugacy_class,
    conjugate_product_growth,
    conjugation_invariance,
    empirical_dimension,
    involved_tori,
    lp_exponent,
    maximal_torus,
    singular_set,
    split_torus,
    variety_point_count,
)


def commutation_torus_classes(ctx, A):
    """Regular semisimple elements of A^2 grouped by commutation (two regular
    semisimple elements commute iff they share a maximal torus)."""
    ms = A.matrices
    sq = {ctx.encode_one(ctx.matmul(a, b)): ctx.matmul(a, b) for a in ms for b in ms}
    reg = [m for m in sq.values() if is_regular_ss(ctx, ctx.elem(m.ravel().tolist()))]
    classes = []
    for m in reg:
        for cls in classes:
            r = cls[0]
            if np.array_equal(ctx.matmul(m, r), ctx.matmul(r, m)):
                cls.append(m)
                break
        else:
            classes.append([m])
    return classes


@pytest.mark.parametrize("p", [3, 5])
def test_involved_tori_against_commutation_oracle(p):
    ctx = make_group(2, p)
    G = enumerate_group(ctx)
    census = involved_tori(G)
    assert census.involved_count == len(commutation_torus_classes(ctx, G))
    assert census.partition_holds()


def test_involved_tori_small_set_oracle(sl2_7):
    A = random_symmetric_set(sl2_7, 8, substream(4, "tori"))
    census = involved_tori(A)
    assert census.involved_count == len(commutation_torus_classes(sl2_7, A))
    assert census.partition_holds()
    assert 0.0 <= conjugation_invariance(A, census) <= 1.0


def test_invariance_full_group(sl2_5):
    G = enumerate_group(sl2_5)
    assert conjugation_invariance(G, involved_tori(G)) == 1.0


def test_split_torus_lp(sl2_7):
    G = enumerate_group(sl2_7)
    rep = lp_exponent(G, split_torus(sl2_7))
    assert rep.intersection_size == 6
    assert math.isclose(rep.predicted_exponent, 1 / 3)
    assert math.isclose(rep.observed_exponent, math.log(6) / math.log(336))


@pytest.mark.parametrize("p", [5, 7, 11])
def test_singular_set_count(p):
    ctx = make_group(2, p)
    # non-regular-semisimple elements of SL_2(F_p): trace +-2
    G = enumerate_group(ctx)
    brute = int(np.isin(ctx.trace(G.matrices), [2 % p, (-2) % p]).sum())
    assert variety_point_count(singular_set(ctx)) == brute == 2 * p * p


def test_centralizer_and_class(sl2_7):
    G = enumerate_group(sl2_7)
    for g in list(G)[::23]:
        C = centralizer(sl2_7, g)
        K = conjugacy_class(sl2_7, g)
        c_count = variety_point_count(C)
        k_count = variety_point_count(K)
        assert c_count * k_count == sl2_7.order  # orbit-stabilizer
        assert C.dim + K.dim == sl2_7.dim_G


def test_maximal_torus_spec(sl2_7):
    g = next(g for g in enumerate_group(sl2_7) if is_regular_ss(sl2_7, g))
    T = maximal_torus(sl2_7, g)
    assert T.contains(g)
    assert len(T.points) in (6, 8)
    assert T.dim == 1


def test_conjugate_product_growth():
    ctx = make_group(2, 31)
    T = maximal_torus(ctx, ctx.elem([2, 0, 0, 16]))
    a = random_element(ctx, 2)
    rep = conjugate_product_growth(T, a, T)
    assert rep.size * rep.overlap == 30 * 30 or rep.overlap == 0
    assert rep.size >= 30 * 30 // 2
    assert rep.normalizing_size == 30


def test_empirical_dimension():
    slope = empirical_dimension(lambda p: variety_point_count(singular_set(make_group(2, p))), [5, 7, 11, 13])
    assert abs(slope - 2) < 0.05
    slope = empirical_dimension(lambda p: make_group(2, p).order, [11, 13, 17, 19])
    assert abs(slope - 3) < 0.05
    with pytest.raises(PreconditionError):
        empirical_dimension(lambda p: p, [5, 7])


def test_lp_on_ball_is_bounded(sl2_7):
    S = ball(ElemSet.from_elems(sl2_7, sl2_7.elementary_generators()), 2)
    rep = lp_exponent(S, split_torus(sl2_7), m=2)
    assert rep.intersection_size <= 6
