import random

from gaudin_lab.rationals import Q, rand_distinct_qs, rand_q
from gaudin_lab.ratfun import BiPoly, BiRatFun, TwistData, twisted_derivative

Z = BiRatFun.zvar
W = BiRatFun.wvar
C = BiRatFun.const


def rand_fun(rng, points):
    """Random small rational function with poles among `points` and z-w."""
    out = C(0)
    for _ in range(rng.randint(1, 4)):
        term = C(rand_q(rng, nonzero=True))
        for _ in range(rng.randint(0, 2)):
            kind = rng.choice(["pz", "pw", "pzw", "z", "w"])
            p = rng.choice(points)
            if kind == "pz":
                term = term * BiRatFun.pole_z(p, rng.randint(1, 2))
            elif kind == "pw":
                term = term * BiRatFun.pole_w(p, rng.randint(1, 2))
            elif kind == "pzw":
                term = term * BiRatFun.pole_zw(1)
            elif kind == "z":
                term = term * Z()
            else:
                term = term * W()
        out = out + term
    return out


def test_cancellation_gives_canonical_form():
    a = Q(2)
    f = (Z() - C(a)) * BiRatFun.pole_z(a, 2)
    assert f == BiRatFun.pole_z(a, 1)
    g = (Z() - W()) * BiRatFun.pole_zw(1)
    assert g == C(1)
    h = (Z() * Z() - W() * W()) * BiRatFun.pole_zw(1)
    assert h == Z() + W()


def test_field_axioms_random():
    rng = random.Random(5)
    pts = rand_distinct_qs(rng, 3)
    for _ in range(15):
        f, g, h = (rand_fun(rng, pts) for _ in range(3))
        assert (f + g) * h == f * h + g * h
        assert f * g == g * f
        assert f - f == 0
        assert (f + g) + h == f + (g + h)


def test_eval_consistency_random():
    rng = random.Random(9)
    pts = rand_distinct_qs(rng, 3)
    for _ in range(10):
        f = rand_fun(rng, pts)
        g = rand_fun(rng, pts)
        zv, wv = Q(17, 5), Q(-23, 7)
        assert (f * g).eval_q(zv, wv) == f.eval_q(zv, wv) * g.eval_q(zv, wv)
        assert (f + g).eval_q(zv, wv) == f.eval_q(zv, wv) + g.eval_q(zv, wv)


def test_derivative_product_rule():
    rng = random.Random(12)
    pts = rand_distinct_qs(rng, 3)
    for _ in range(8):
        f = rand_fun(rng, pts)
        g = rand_fun(rng, pts)
        assert (f * g).dz() == f.dz() * g + f * g.dz()
        assert (f * g).dw() == f.dw() * g + f * g.dw()


def test_derivative_on_poles():
    a = Q(3, 2)
    f = BiRatFun.pole_z(a, 1)
    assert f.dz() == -BiRatFun.pole_z(a, 2)
    assert f.dw() == 0
    g = BiRatFun.pole_zw(2)
    assert g.dw() == BiRatFun.pole_zw(3) * 2
    assert g.dz() == -BiRatFun.pole_zw(3) * 2


def test_swap_vars_involution_and_sign():
    rng = random.Random(4)
    pts = rand_distinct_qs(rng, 2)
    f = BiRatFun.pole_zw(1)
    assert f.swap_vars() == -f
    for _ in range(8):
        g = rand_fun(rng, pts)
        assert g.swap_vars().swap_vars() == g
        zv, wv = Q(31, 4), Q(-8, 3)
        assert g.swap_vars().eval_q(zv, wv) == g.eval_q(wv, zv)


def test_sub_w_eq_z():
    a = Q(1)
    f = BiRatFun.pole_w(a, 1) * BiRatFun.pole_z(a, 1)
    g = f.sub_w_eq_z()
    assert g == BiRatFun.pole_z(a, 2)
    h = (Z() - W()) * BiRatFun.pole_zw(1) + W()
    assert h.sub_w_eq_z() == C(1) + Z()


def test_regular_on_diagonal():
    assert not BiRatFun.pole_zw(1).regular_on_diagonal()
    f = (Z() - W()) * BiRatFun.pole_zw(1)
    assert f.regular_on_diagonal()


def test_reciprocal():
    a, b = Q(2), Q(-1, 3)
    f = BiRatFun.pole_z(a, 2) * BiRatFun.pole_w(b, 1) * Q(7, 3)
    r = f.reciprocal()
    assert f * r == C(1)
    g = (Z() - C(a)) * (Z() - W()) * Q(-2)
    assert g * g.reciprocal() == C(1)


def test_partial_fractions_roundtrip():
    rng = random.Random(21)
    pts = rand_distinct_qs(rng, 3)
    for _ in range(12):
        f = C(0)
        for _ in range(rng.randint(1, 5)):
            p = rng.choice(pts)
            f = f + BiRatFun.pole_z(p, rng.randint(1, 3)) * rand_q(rng)
        for j in range(rng.randint(0, 3)):
            f = f + Z() ** j * rand_q(rng)
        poles, poly = f.partial_fractions()
        assert BiRatFun.from_partial_fractions(poles, poly) == f


def test_partial_fractions_mixed_numerator():
    # (3z^2 + 1) / ((z-1)^2 (z+2)) decomposed and rebuilt
    f = (Z() * Z() * 3 + C(1)) * BiRatFun.pole_z(Q(1), 2) * BiRatFun.pole_z(Q(-2), 1)
    poles, poly = f.partial_fractions()
    assert poly == []
    assert BiRatFun.from_partial_fractions(poles, poly) == f


def test_twist_phi_and_twisted_derivative():
    tw = TwistData([Q(0), Q(1)], [Q(2), Q(3)])
    phi = tw.phi("z")
    assert phi == BiRatFun.pole_z(Q(0)) * 2 + BiRatFun.pole_z(Q(1)) * 3
    f = BiRatFun.pole_z(Q(0), 1)
    M = 3
    df = twisted_derivative(f, 2, M, tw, "z")
    expect = f.dz() - phi * f * Q(2, M)
    assert df == expect
    # Leibniz-type rule: D^{i+j}(fg) = (D^i f) g + f (D^j g) when degrees add
    g = BiRatFun.pole_z(Q(1), 1)
    lhs = twisted_derivative(f * g, 5, M, tw)
    rhs = twisted_derivative(f, 2, M, tw) * g + f * twisted_derivative(g, 3, M, tw)
    assert lhs == rhs
