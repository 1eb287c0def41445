"""Tests for the spectral state builders and their structural identities."""

import pytest

from gaudin_lab.rationals import Q, ONE, rand_distinct_qs, rand_levels, rand_q, seeded_rng
from gaudin_lab.ratfun import BiRatFun, BiPoly
from gaudin_lab.states import (GaudinContext, laurent_singular,
                               laurent_singular_state, relabel_sites, smul)
from gaudin_lab.vertex import (is_zero_state, mono_wt, sadd, sscale, ssub,
                               state_eq)


def make_ctx(M, N, rng):
    points = rand_distinct_qs(rng, N)
    levels = rand_levels(rng, N, forbid=(lambda ks: any(k == -M for k in ks),))
    return GaudinContext(M, points, levels)


# --- state construction ----------------------------------------------------

def test_sigma_single_site_form():
    # one marked point: the quadratic state is (z-z1)^{-2} times the
    # dressed pair sum with prefactor 1/2
    ctx = GaudinContext(3, [Q(5)], [Q(2)])
    sig = ctx.sigma(1)
    fn = BiRatFun.pole_z(Q(5), 2)
    expected = {}
    for (a, b), q in ctx.model.ginv_pairs.items():
        sadd(expected, ctx.ctx.mono_state([(0, -1, a), (0, -1, b)], q / 2), fn)
    assert state_eq(sig, expected)


def test_sigma_two_site_cross_coefficient():
    # the mixed-site part of the quadratic state carries coefficient
    # 1/((z-z1)(z-z2)) and no factor 1/2 (two orderings collapse)
    ctx = GaudinContext(3, [Q(0), Q(1)], [Q(1), Q(1)])
    parts = ctx.model.sigma_parts(1)
    expected = {}
    for (a, b), q in ctx.model.ginv_pairs.items():
        sadd(expected, ctx.model.sctx.mono_state([(0, -1, a), (1, -1, b)], q))
    assert state_eq(parts[(0, 1)], expected)


@pytest.mark.parametrize("i", [1, 2])
def test_sigma_homogeneous_degree(i):
    # every monomial has mode weight i+1 (homogeneous degree -(i+1))
    ctx = make_ctx(3, 2, seeded_rng(7))
    for mono in ctx.sigma(i):
        assert mono_wt(mono) == i + 1


def test_current_state_matches_manual_expansion():
    ctx = GaudinContext(3, [Q(1), Q(-1)], [Q(2), Q(3)])
    a = ctx.basis.index[("e", 0, 1)]
    st = ctx.current_state({(a,): ONE}, [(-2, "z", 0)])
    expected = {}
    for s, zs in enumerate(ctx.points):
        sadd(expected, ctx.ctx.mono_state([(s, -2, a)]), BiRatFun.pole_z(zs))
    assert state_eq(st, expected)


def test_explicit_A11_coefficient():
    # cross-site monomial of A_11 carries M * Ginv * 1/((z-w)(z-z1)(w-z2))
    ctx = GaudinContext(3, [Q(2), Q(-3)], [Q(1), Q(4)])
    A, _ = ctx.explicit_AB(1, 1)
    pair = ctx.model.ginv_pairs
    a = ctx.basis.index[("e", 0, 1)]
    b = ctx.basis.index[("e", 1, 0)]
    mono = ((0, -2, a), (1, -1, b))
    want = (BiRatFun.pole_zw(1) * BiRatFun.pole_z(Q(2)) * BiRatFun.pole_w(Q(-3))
            * (Q(3) * pair[(a, b)]))
    assert A[mono] == want


# --- zeroth-product identity ----------------------------------------------

@pytest.mark.parametrize("ij", [(1, 1), (1, 2), (2, 1)])
@pytest.mark.parametrize("N", [1, 2])
def test_zeroth_theorem_mixed(ij, N):
    rng = seeded_rng(101 + N)
    for _ in range(2):
        ctx = make_ctx(3, N, rng)
        assert is_zero_state(ctx.verify_zeroth_theorem(*ij))


@pytest.mark.parametrize("N", [1, 2])
def test_zeroth_theorem_cubic(N):
    ctx = make_ctx(3, N, seeded_rng(55))
    assert is_zero_state(ctx.verify_zeroth_theorem(2, 2))


def test_zeroth_theorem_three_sites():
    ctx = make_ctx(3, 3, seeded_rng(23))
    assert is_zero_state(ctx.verify_zeroth_theorem(1, 1))
    assert is_zero_state(ctx.verify_zeroth_theorem(1, 2))


def test_site_relabel_equivariance():
    rng = seeded_rng(31)
    points = rand_distinct_qs(rng, 2)
    levels = rand_levels(rng, 2)
    perm = [1, 0]
    ctx = GaudinContext(3, points, levels)
    ctxp = GaudinContext(3, [points[1], points[0]], [levels[1], levels[0]])
    for i in (1, 2):
        moved = relabel_sites(ctxp.ctx, ctx.sigma(i), perm)
        assert state_eq(moved, ctxp.sigma(i))
    assert is_zero_state(ctxp.verify_zeroth_theorem(1, 2))


def test_degree_bookkeeping_of_zeroth_action():
    # sigma_i(z)_(0) shifts mode weight by exactly +i on graded vectors
    ctx = make_ctx(3, 2, seeded_rng(77))
    a = ctx.basis.index[("e", 0, 1)]
    b = ctx.basis.index[("e", 1, 0)]
    vectors = [
        ctx.ctx.mono_state([(0, -1, a)]),
        ctx.ctx.mono_state([(0, -2, a), (1, -1, b)]),
    ]
    for i in (1, 2):
        sig = ctx.sigma(i)
        for v in vectors:
            wt_in = mono_wt(next(iter(v)))
            out = ctx.ctx.nth_product(sig, 0, v)
            assert out
            assert all(mono_wt(m) == wt_in + i for m in out)


# --- regularity mod translates --------------------------------------------

def test_laurent_singular_roundtrip():
    rng = seeded_rng(13)
    for _ in range(20):
        f = (BiRatFun.pole_zw(rng.randint(1, 3)) * rand_q(rng, nonzero=True)
             * BiRatFun.pole_z(Q(1)) + BiRatFun.pole_w(Q(2)) * rand_q(rng))
        g = f * (BiRatFun.zvar() - BiRatFun.const(Q(3)))
        sing, reg = laurent_singular(g)
        back = reg
        for m, c in sing.items():
            assert c.is_w_free()
            back = back + c * BiRatFun.pole_zw(m)
        assert back == g
        assert reg.regular_on_diagonal()


@pytest.mark.parametrize("ij", [(1, 1), (1, 2), (2, 1)])
def test_regularity_simple_pairs(ij):
    ctx = make_ctx(3, 2, seeded_rng(sum(ij)))
    report = ctx.verify_regularity_mod_T(*ij)
    assert report["ok"]
    assert set(report["orders"]) == {1}
    assert report["orders"][1]["matches_reference"]


def test_regularity_cubic_pair():
    ctx = make_ctx(3, 2, seeded_rng(99))
    report = ctx.verify_regularity_mod_T(2, 2)
    assert report["ok"]
    assert set(report["orders"]) == {1, 2, 3}
    assert report["orders"][3]["matches_reference"]
    assert report["orders"][2]["matches_reference"]
    assert report["orders"][1]["translate"]


# --- diagonal symmetry -----------------------------------------------------

def test_gsym_all_modes():
    ctx = make_ctx(3, 2, seeded_rng(5))
    for x in range(ctx.basis.dim):
        for n in range(4):
            for i in (1, 2):
                assert is_zero_state(ctx.verify_gsym(x, n, i))


def test_gsym_rhs_nontrivial_at_n1():
    # the n=1 action itself is nonzero (the check is not vacuous)
    ctx = make_ctx(3, 2, seeded_rng(6))
    x = ctx.basis.index[("e", 0, 1)]
    assert ctx.ctx.diag_act({x: ONE}, 1, ctx.sigma(1))


# --- site conformal states and s_1 ----------------------------------------

def test_omega_site_acts_as_local_translation():
    ctx = GaudinContext(3, [Q(0), Q(1)], [Q(2), Q(-4)])
    a = ctx.basis.index[("e", 0, 1)]
    b = ctx.basis.index[("e", 1, 0)]
    v = ctx.ctx.mono_state([(0, -1, a), (1, -1, b)])
    out = ctx.ctx.nth_product(ctx.omega_site(0), 0, v)
    assert state_eq(out, ctx.ctx.mono_state([(0, -2, a), (1, -1, b)]))
    # the sum over sites implements the full translation operator
    total = {}
    for s in range(ctx.N):
        sadd(total, ctx.ctx.nth_product(ctx.omega_site(s), 0, v))
    assert state_eq(total, ctx.ctx.translate(v))


def test_omega_site_rejects_critical_level():
    ctx = GaudinContext(3, [Q(0)], [Q(-3)])
    with pytest.raises(ZeroDivisionError):
        ctx.omega_site(0)


@pytest.mark.parametrize("i", [1, 2])
def test_omega_zeroth_identity(i):
    ctx = make_ctx(3, 2, seeded_rng(40 + i))
    assert is_zero_state(ctx.verify_omega_identity(i))


@pytest.mark.parametrize("i", [1, 2])
def test_s1_zeroth_theorem(i):
    ctx = make_ctx(3, 2, seeded_rng(60 + i))
    assert is_zero_state(ctx.verify_s1_zeroth(i))


def test_s1_state_differs_from_sigma1():
    ctx = make_ctx(3, 2, seeded_rng(3))
    assert not is_zero_state(ssub(ctx.s1_state(), ctx.sigma(1)))
