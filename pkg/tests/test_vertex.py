import math
import random

import pytest

from gaudin_lab.rationals import LPoly, Q, rand_q
from gaudin_lab.ratfun import BiRatFun
from gaudin_lab.tensors import SLBasis
from gaudin_lab.vertex import (VertexContext, gbinom, is_zero_state, mono_wt, sadd,
                               sscale, ssub, state_eq, state_wt_split)

BASIS3 = SLBasis(3)


def make_ctx(n_sites=2, symbolic=True, M=3):
    basis = BASIS3 if M == 3 else SLBasis(M)
    if symbolic:
        levels = [LPoly.gen(i, n_sites) for i in range(n_sites)]
    else:
        levels = [Q(i + 2) for i in range(n_sites)]
    return VertexContext(basis, levels)


def rand_state(ctx, rng, max_len=3, max_wt=4, terms=2):
    out = {}
    for _ in range(terms):
        length = rng.randint(0, max_len)
        word = []
        budget = max_wt
        for _ in range(length):
            d = rng.randint(1, max(1, budget - (length - len(word) - 1)))
            budget -= d
            word.append((rng.randrange(ctx.n_sites), -d, rng.randrange(ctx.basis.dim)))
        sadd(out, ctx.mono_state(word, Q(rng.randint(-3, 3))))
    return {m: c for m, c in out.items() if c}


def test_gbinom():
    assert gbinom(5, 2) == 10
    assert gbinom(1, 3) == 0
    assert gbinom(-1, 2) == 1
    assert gbinom(-2, 3) == -4
    assert gbinom(-3, 0) == 1


def test_commutator_consistency():
    # [a_m, b_n] v  ==  [a,b]_{m+n} v - n delta_{m+n,0} (a|b) k v
    ctx = make_ctx(n_sites=2, symbolic=True)
    rng = random.Random(31)
    for _ in range(25):
        v = rand_state(ctx, rng)
        s = rng.randrange(2)
        a, b = rng.randrange(8), rng.randrange(8)
        m, n = rng.randint(-2, 2), rng.randint(-2, 2)
        lhs = ssub(ctx.act(s, a, m, ctx.act(s, b, n, v)),
                   ctx.act(s, b, n, ctx.act(s, a, m, v)))
        rhs = {}
        for cb, cc in ctx.basis.comm_pair(a, b):
            sadd(rhs, ctx.act(s, cb, m + n, v), cc)
        if m + n == 0:
            g = ctx.basis.pairing(a, b)
            if g:
                sadd(rhs, v, (-n * g) * ctx.levels[s])
        assert state_eq(lhs, rhs)


def test_cross_site_operators_commute():
    ctx = make_ctx(n_sites=2)
    rng = random.Random(7)
    for _ in range(10):
        v = rand_state(ctx, rng)
        a, b = rng.randrange(8), rng.randrange(8)
        m, n = rng.randint(-2, 1), rng.randint(-2, 1)
        lhs = ctx.act(0, a, m, ctx.act(1, b, n, v))
        rhs = ctx.act(1, b, n, ctx.act(0, a, m, v))
        assert state_eq(lhs, rhs)


def test_central_term():
    # a_1 b_{-1} |0> = ( [a,b]_0 + (a|b) k ) |0> = (a|b) k |0>
    ctx = make_ctx(n_sites=1, symbolic=True)
    e01 = ctx.basis.index[("e", 0, 1)]
    e10 = ctx.basis.index[("e", 1, 0)]
    v = ctx.mono_state([(0, -1, e10)])
    out = ctx.act(0, e01, 1, v)
    k = ctx.levels[0]
    assert state_eq(out, {(): k})  # (E01 | E10) = 1


def test_translate_commutation():
    # [T, a_m] = -m a_{m-1} on random states
    ctx = make_ctx(n_sites=2)
    rng = random.Random(11)
    for _ in range(20):
        v = rand_state(ctx, rng)
        s = rng.randrange(2)
        a = rng.randrange(8)
        m = rng.randint(-3, 2)
        lhs = ssub(ctx.translate(ctx.act(s, a, m, v)),
                   ctx.act(s, a, m, ctx.translate(v)))
        rhs = ctx.act(s, a, m - 1, v, scale=-m) if m else {}
        assert state_eq(lhs, rhs)


def test_translate_kills_vacuum_only():
    ctx = make_ctx(n_sites=1)
    assert ctx.translate(ctx.vacuum()) == {}
    v = ctx.mono_state([(0, -1, 3)])
    assert ctx.translate(v) == {((0, -2, 3),): Q(1)}


def test_nth_product_single_current():
    # (a_{-1}|0>)_(n) B = a_n B for all n
    ctx = make_ctx(n_sites=2)
    rng = random.Random(13)
    for _ in range(10):
        B = rand_state(ctx, rng)
        s = rng.randrange(2)
        a = rng.randrange(8)
        A = ctx.mono_state([(s, -1, a)])
        for n in range(-3, 3):
            assert state_eq(ctx.nth_product(A, n, B), ctx.act(s, a, n, B))


def test_nth_product_vacuum_axioms():
    ctx = make_ctx(n_sites=2)
    rng = random.Random(17)
    for _ in range(8):
        A = rand_state(ctx, rng)
        vac = ctx.vacuum()
        assert state_eq(ctx.nth_product(A, -1, vac), A)
        assert is_zero_state(ctx.nth_product(A, 0, vac))
        assert is_zero_state(ctx.nth_product(A, 1, vac))
        assert state_eq(ctx.nth_product(A, -2, vac), ctx.translate(A))
        assert state_eq(ctx.nth_product(vac, -1, A), A)
        assert is_zero_state(ctx.nth_product(vac, 0, A))


def test_translation_covariance_of_products():
    # (T A)_(n) B = -n A_(n-1) B
    ctx = make_ctx(n_sites=2)
    rng = random.Random(19)
    for _ in range(8):
        A = rand_state(ctx, rng, max_len=2, max_wt=3)
        B = rand_state(ctx, rng, max_len=2, max_wt=3)
        for n in range(-2, 3):
            lhs = ctx.nth_product(ctx.translate(A), n, B)
            rhs = sscale(ctx.nth_product(A, n - 1, B), -n) if n else {}
            assert state_eq(lhs, rhs)


def test_zeroth_product_is_a_derivation():
    # A_(0) (B_(n) C) = (A_(0) B)_(n) C + B_(n) (A_(0) C)
    ctx = make_ctx(n_sites=1)
    rng = random.Random(23)
    for _ in range(6):
        A = rand_state(ctx, rng, max_len=2, max_wt=2, terms=1)
        B = rand_state(ctx, rng, max_len=2, max_wt=2, terms=1)
        C = rand_state(ctx, rng, max_len=2, max_wt=2, terms=1)
        for n in (-2, -1, 0, 1):
            lhs = ctx.nth_product(A, 0, ctx.nth_product(B, n, C))
            rhs = sadd(ctx.nth_product(ctx.nth_product(A, 0, B), n, C),
                       ctx.nth_product(B, n, ctx.nth_product(A, 0, C)))
            assert state_eq(lhs, rhs)


def test_skew_symmetry():
    # A_(n) B = sum_{j>=0} (-1)^{n+j+1} (1/j!) T^j (B_(n+j) A)
    ctx = make_ctx(n_sites=2)
    rng = random.Random(29)
    for _ in range(5):
        A = rand_state(ctx, rng, max_len=2, max_wt=3, terms=1)
        B = rand_state(ctx, rng, max_len=2, max_wt=3, terms=1)
        for n in (-2, -1, 0, 1):
            lhs = ctx.nth_product(A, n, B)
            rhs = {}
            maxj = 12
            for j in range(maxj):
                prod = ctx.nth_product(B, n + j, A)
                if not prod and n + j > 8:
                    break
                for _ in range(j):
                    prod = ctx.translate(prod)
                sadd(rhs, prod, Q((-1) ** ((n + j + 1) % 2), math.factorial(j)))
            assert state_eq(lhs, rhs)


def test_is_translate_roundtrip():
    ctx = make_ctx(n_sites=2)
    rng = random.Random(37)
    for _ in range(12):
        Z = rand_state(ctx, rng, max_len=3, max_wt=4, terms=2)
        Z = {m: c for m, c in Z.items() if m}  # drop vacuum part
        v = ctx.translate(Z)
        Z2 = ctx.is_translate(v)
        assert Z2 is not None
        assert state_eq(ctx.translate(Z2), v)


def test_is_translate_rejects_non_translates():
    ctx = make_ctx(n_sites=1)
    # a_{-1}|0> has no preimage: T of any weight-0 state vanishes
    v = ctx.mono_state([(0, -1, 2)])
    assert ctx.is_translate(v) is None
    # nonzero vacuum component is never a translate
    w = ctx.vacuum()
    assert ctx.is_translate(w) is None


def test_is_translate_with_function_coefficients():
    ctx = make_ctx(n_sites=2)
    rng = random.Random(41)
    f = BiRatFun.pole_z(Q(0), 1) * BiRatFun.pole_w(Q(1), 2)
    g = BiRatFun.pole_zw(1)
    Z = {}
    sadd(Z, sscale(rand_state(ctx, rng, terms=1), f))
    sadd(Z, sscale(rand_state(ctx, rng, terms=1), g))
    Z = {m: c for m, c in Z.items() if m and c}
    v = ctx.translate(Z)
    Z2 = ctx.is_translate(v)
    assert Z2 is not None
    assert is_zero_state(ssub(ctx.translate(Z2), v))


def test_weight_split():
    ctx = make_ctx(n_sites=1)
    v = sadd(ctx.mono_state([(0, -2, 1)]), ctx.mono_state([(0, -1, 1), (0, -1, 2)]))
    parts = state_wt_split(v)
    assert set(parts) == {2}
    v2 = sadd(dict(v), ctx.vacuum())
    assert set(state_wt_split(v2)) == {0, 2}
