"""Two-marked-point layer: coset conformal state, cubic primary, product
tables, and the proportionality of both to reduced twisted integrals."""

import pytest

from gaudin_lab.rationals import Q
from gaudin_lab.twopoint import TwoPointContext, level_draws, beta_offset_ratio
from gaudin_lab.contour import beta_pochhammer
from gaudin_lab.vertex import sscale, ssub


DRAWS = level_draws(3, 5, 11)


def _ctx(k1, k2, M=3):
    return TwoPointContext(M, (Q(k1), Q(k2)))


def test_level_draw_generator():
    assert DRAWS == level_draws(3, 5, 11)
    assert len(DRAWS) == 5
    for k1, k2 in DRAWS:
        assert k1 % 3 and k2 % 3 and (k1 + k2) % 3


def test_structure_parts():
    assert _ctx(1, 1).verify_structure()
    assert _ctx(2, 5).verify_structure()


def test_xi_collapse_and_reduction():
    for k1, k2 in DRAWS:
        rep = _ctx(k1, k2).verify_xi()
        assert rep["collapse"], (k1, k2)
        assert rep["reduced"], (k1, k2)


def test_quadratic_proportionality_exact():
    for k1, k2 in DRAWS:
        assert _ctx(k1, k2).verify_quadratic_prop(), (k1, k2)


def test_cubic_proportionality_exact():
    for k1, k2 in DRAWS:
        assert _ctx(k1, k2).verify_cubic_prop(), (k1, k2)


def test_virasoro_products():
    for k1, k2 in DRAWS:
        rep = _ctx(k1, k2).virasoro_table()
        assert all(n == 0 for n in rep["residuals"].values()), (k1, k2)
        assert rep["c_match"], (k1, k2)


def test_central_charge_values():
    assert _ctx(1, 1).central_charge() == Q(4, 5)
    assert _ctx(2, 5).central_charge() == Q(13, 5)


def test_cubic_primary_products():
    for k1, k2 in ((1, 1), (2, 2), (1, 4)):
        rep = _ctx(k1, k2).primary_table()
        assert all(n == 0 for n in rep.values()), (k1, k2)


def test_w_products_table():
    tp = _ctx(1, 1)
    rep = tp.w_table(null_check=True)
    for n in (2, 3, 4, 5):
        assert rep["residuals"][n] == 0
    assert rep["scale_over_csq"] == -1
    assert rep["skew_consistent"]
    assert rep["row0_half_t_row1"]
    assert rep["row1_in_null_submodule"]


def test_w_products_table_generic_levels():
    rep = _ctx(2, 2).w_table(null_check=True)
    for n in (2, 3, 4, 5):
        assert rep["residuals"][n] == 0
    assert rep["scale_over_csq"] == -1
    assert rep["residuals"][1] > 0
    assert not rep["row1_in_null_submodule"]


def test_singular_vector():
    tp = _ctx(1, 1)
    chi = tp.singular_vector()
    assert tp.is_singular(chi)
    assert tp.in_null_submodule(chi)
    tp2 = _ctx(1, 2)
    assert not tp2.is_singular(tp2.singular_vector())


def test_null_membership_negative_control():
    tp = _ctx(1, 1)
    om = tp.omega()
    T = tp.vc.translate
    lam = ssub(tp.vc.nth_product(om, -1, om), sscale(T(T(om)), Q(3, 10)))
    assert not tp.in_null_submodule(lam)


def test_numeric_proportionality():
    res = _ctx(1, 1).numeric_prop_residuals()
    assert res["quadratic"] < 1e-9
    assert res["cubic"] < 1e-9


def test_beta_ladder_against_quadrature():
    a, b = Q(-1, 3), Q(-2, 3)
    base = beta_pochhammer(a, b).value
    for p, q in ((1, 0), (0, 1), (2, 1), (3, 3)):
        got = beta_offset_ratio(a, b, p, q)
        ref = beta_pochhammer(a - p, b - q).value / base
        assert abs(complex(float(got.numerator) / float(got.denominator))
                   - ref) <= 1e-9 * max(1.0, abs(ref))


def test_level_guards():
    with pytest.raises(ValueError):
        TwoPointContext(3, (Q(-3), Q(1)))
    with pytest.raises(ValueError):
        _ctx(3, 1).integral_state(1)
    with pytest.raises(ValueError):
        _ctx(1, 2).verify_quadratic_prop()
    with pytest.raises(ValueError):
        _ctx(Q(-3, 2), 1).c_squared()
