import pytest

from gaudin_lab.rationals import Q, ZERO, ONE, seeded_rng, rand_q, rand_distinct_qs
from gaudin_lab.ratfun import BiRatFun, twisted_derivative, solve_twisted_exact
from gaudin_lab.oper import (
    LoopElement, chevalley, cyclic_cartan, exponents, graded_basis,
    principal_elements, MiuraData, bethe_root, rho_norm, v2_from_u, v_closed,
    miura_connection, gauge_transform, canonicalize_connection, canonicalize,
    _as_fun,
)


def draw_data(rng, M, N, nroots=0):
    pts = rand_distinct_qs(rng, N)
    levels = [rand_q(rng, nonzero=True) for _ in range(N)]
    pair = []
    for s in range(N):
        row = [rand_q(rng) for _ in range(M - 1)]
        row.append(levels[s] - sum(row, ZERO))
        pair.append(row)
    roots = []
    while len(roots) < nroots:
        w = rand_q(rng)
        if w not in pts and all(w != r[0] for r in roots):
            roots.append((w, rng.randrange(M)))
    return MiuraData(M, pts, levels, pair, roots)


# --- generators and the grading ----------------------------------------

def test_chevalley_structure():
    for M in (3, 4, 5):
        e, f, h, rho, delta = chevalley(M)
        a = cyclic_cartan(M)
        for i in range(M):
            assert rho.bracket(e[i]) == e[i]
            assert rho.bracket(f[i]) == f[i].scale(-ONE)
            for j in range(M):
                assert h[i].bracket(e[j]) == e[j].scale(a[j][i])
                assert h[i].bracket(f[j]) == f[j].scale(-a[j][i])
        # delta = sum h_i is central: pure K, no matrix part
        assert not delta.mat and delta.cK == 1 and delta.cd == 0
        assert delta.pair(rho) == Q(M)
        assert rho.pair(rho) == rho_norm(M)


def test_cartan_elements_pair_to_cartan_matrix():
    for M in (3, 4):
        _, _, h, _, _ = chevalley(M)
        a = cyclic_cartan(M)
        for i in range(M):
            for j in range(M):
                assert h[i].pair(h[j]) == a[i][j]


def test_principal_commutation_table():
    for M in (3, 4):
        fam = principal_elements(M, 5)
        for j, pj in fam.p.items():
            assert fam.rho.bracket(pj) == pj.scale(Q(j))
        assert fam.p_minus1.bracket(fam.p[1]) == fam.delta.scale(-ONE)
        for mm in fam.p:
            for nn in fam.p:
                br = fam.p[mm].bracket(fam.p[nn])
                if mm + nn == 0:
                    assert br == fam.delta.scale(Q(mm))
                else:
                    assert br.is_zero()
                pr = fam.p[mm].pair(fam.p[nn])
                if mm + nn == 0:
                    assert pr == Q(M)
                else:
                    assert not pr


def test_kernel_solver_reproduces_powers():
    for M in (3, 4):
        fam = principal_elements(M, 5)
        sols = fam.solve_graded(1)
        assert len(sols) == 1 and sols[0] == fam.p[1]
        for j in fam.p:
            if j == 1:
                continue
            assert fam.kernel_dimension(j) == 1
            sol = fam.solve_graded(j)[0]
            key = next(iter(fam.p[j].mat))
            ratio = sol.mat.get(key, ZERO) / fam.p[j].mat[key]
            assert ratio and sol == fam.p[j].scale(ratio)
        # no centralizer at the imaginary grade M
        assert fam.kernel_dimension(M) == 0


def test_p_minus_two_is_wound_bracket_sum():
    for M in (3, 4, 5):
        fam = principal_elements(M, 3)
        acc = LoopElement(M)
        for i in range(M):
            acc = acc + fam.f[i].bracket(fam.f[(i + 1) % M])
        assert acc.scale(-ONE) == fam.p[-2]


# --- Miura data ---------------------------------------------------------

def test_miura_data_validation():
    with pytest.raises(ValueError):
        MiuraData(3, [Q(0)], [Q(1)], [[ONE, ONE, ONE]])  # bad row sum
    with pytest.raises(ValueError):
        MiuraData(3, [Q(0), Q(0)], [Q(1), Q(1)],
                  [[ONE, ZERO, ZERO]] * 2)  # duplicate points
    with pytest.raises(ValueError):
        MiuraData(3, [Q(0)], [Q(1)], [[ONE, ZERO, ZERO]],
                  roots=[(Q(0), 1)])  # root on a marked point
    with pytest.raises(ValueError):
        MiuraData(3, [Q(0)], [Q(1)], [[ONE, ZERO, ZERO]],
                  roots=[(Q(2), 7)])  # bad color


def test_eta_pairings_invert_the_cartan_expansion():
    rng = seeded_rng(31)
    for M in (3, 4, 5):
        data = draw_data(rng, M, 2)
        a = cyclic_cartan(M)
        for site, l in enumerate(data.eta_pairings()):
            assert l[0] == ZERO
            k = data.levels[site]
            for mrow in range(M):
                lhs = sum((a[mrow][i] * l[i] for i in range(M)), ZERO) + k / M
                assert lhs == data.pairings[site][mrow]


def test_u_funcs_poles_and_root_terms():
    rng = seeded_rng(32)
    M = 3
    data = draw_data(rng, M, 2)
    etas = data.eta_pairings()
    us = data.u_funcs()
    for i in range(M):
        expect = BiRatFun.const(ZERO)
        for s in range(2):
            expect = expect + BiRatFun.pole_z(data.points[s]) * (-etas[s][i])
        assert us[i] == expect
    # adding one root of color n shifts only u_n by 1/(z - w)
    w = Q(9, 2)
    data2 = MiuraData(M, data.points, data.levels, data.pairings,
                      roots=[(w, 1)])
    us2 = data2.u_funcs()
    for i in range(M):
        diff = us2[i] - us[i]
        assert diff == (BiRatFun.pole_z(w) if i == 1 else BiRatFun.const(ZERO))


def test_common_cartan_function_gives_zero_cubic():
    g = BiRatFun.pole_z(Q(1)) * Q(5, 3) + BiRatFun.pole_z(Q(-2), 2)
    for M in (3, 4):
        assert not v2_from_u([g] * M, M)


def test_closed_forms_single_site_hand_values():
    # one site at 0, level 3, coroot pairings (0, 1, 2):
    # the dual-coweight solve gives l = (0, 1/3, 2/3), so with a = -1/(3z)
    # the Cartan functions are (0, a, 2a) and by hand
    #   v1 = 7/9 z^{-2},   v2 = 2/81 z^{-3}
    data = MiuraData(3, [Q(0)], [Q(3)], [[Q(0), Q(1), Q(2)]])
    v1, v2 = v_closed(data)
    assert v1 == BiRatFun.pole_z(Q(0), 2) * Q(7, 9)
    assert v2 == BiRatFun.pole_z(Q(0), 3) * Q(2, 81)
    v = canonicalize(data, 2)
    assert v[1] == v1 and v[2] == v2


# --- gauge reduction ----------------------------------------------------

def test_first_gauge_step_is_minus_u_dot_e():
    rng = seeded_rng(33)
    M = 3
    data = draw_data(rng, M, 2)
    fam = principal_elements(M, 3)
    conn = miura_connection(data, fam)
    _, m = canonicalize_connection(conn, data.phi(), M, 2)
    m1 = m.grade_component(1)
    expect = LoopElement(M)
    for i, ui in enumerate(data.u_funcs()):
        if ui:
            expect = expect + _as_fun(M, fam.e[i]).scale(ui * Q(-1))
    assert m1 == expect


def test_canonicalize_matches_closed_forms():
    rng = seeded_rng(34)
    for trial in range(10):
        nroots = trial % 2
        data = draw_data(rng, 3, 2, nroots)
        v1, v2 = v_closed(data)
        v = canonicalize(data, 2)
        assert v[1] == v1
        assert v[2] == v2


def test_canonicalize_matches_closed_forms_larger_rank():
    rng = seeded_rng(35)
    for M, N, nroots in ((4, 2, 0), (4, 1, 1), (5, 2, 1)):
        data = draw_data(rng, M, N, nroots)
        v1, v2 = v_closed(data)
        v = canonicalize(data, 2)
        assert v[1] == v1 and v[2] == v2


def test_canonicalize_skips_imaginary_grades():
    rng = seeded_rng(36)
    data = draw_data(rng, 3, 2, 1)
    v = canonicalize(data, 4)
    assert sorted(v) == [1, 2, 4]
    v1, v2 = v_closed(data)
    assert v[1] == v1 and v[2] == v2


def test_gauge_invariance_of_canonical_coefficients():
    rng = seeded_rng(37)
    M = 3
    for trial in range(3):
        data = draw_data(rng, M, 2, trial % 2)
        fam = principal_elements(M, 4)
        conn = miura_connection(data, fam)
        m = LoopElement(M)
        for g in (1, 2, 3):
            for b in graded_basis(M, g):
                if rng.random() < 0.5:
                    c = BiRatFun.pole_z(
                        data.points[rng.randrange(data.N)]) * rand_q(rng)
                    m = m + _as_fun(M, b).scale(c)
        conn2 = gauge_transform(conn, m, 3)
        v = canonicalize_connection(conn, data.phi(), M, 2)[0]
        vg = canonicalize_connection(conn2, data.phi(), M, 2)[0]
        # the quadratic coefficient is strictly gauge invariant
        assert vg[1] == v[1]
        # the cubic one moves by an exact degree-2 twisted derivative
        diff = vg[2] - v[2]
        sol = solve_twisted_exact(diff, 2, M, data.twist,
                                  extra_poles=[w for w, _ in data.roots])
        assert sol is not None
        assert twisted_derivative(sol, 2, M, data.twist, "z") == diff


def test_exponent_list():
    assert exponents(3, 7) == [1, 2, 4, 5, 7]
    assert exponents(4, 9) == [1, 2, 3, 5, 6, 7, 9]


# --- root locations -----------------------------------------------------

def test_bethe_root_two_site_closed_forms():
    pts = [Q(0), Q(1)]
    rows = [[Q(9), Q(1), Q(5)], [Q(2), Q(1), Q(3)]]
    assert bethe_root(pts, rows, 1) == Q(1, 2)
    rows = [[Q(9), Q(2), Q(5)], [Q(2), Q(1), Q(3)]]
    assert bethe_root(pts, rows, 1) == Q(2, 3)
    # returned location satisfies the defining sum
    w = bethe_root(pts, rows, 1)
    assert rows[0][1] / (w - pts[0]) + rows[1][1] / (w - pts[1]) == ZERO


def test_bethe_root_many_sites_residual():
    # 2/(w+1) + 1/(w-1) + 2/(w-2) vanishes at w = 0
    pts = [Q(-1), Q(1), Q(2)]
    rows = [[Q(2)] * 3, [Q(1)] * 3, [Q(2)] * 3]
    res = bethe_root(pts, rows, 0)
    assert res(Q(0)) == ZERO
    assert res(Q(3)) != ZERO


def test_bethe_root_degenerate_pairing():
    pts = [Q(0), Q(1)]
    rows = [[Q(1), Q(2), ZERO], [Q(-1), Q(3), ZERO]]
    with pytest.raises(ZeroDivisionError):
        bethe_root(pts, rows, 0)
