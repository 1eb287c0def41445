"""Loop-matrix connections, principal elements, and quasi-canonical forms.

The relevant affine algebra is realized concretely on M x M matrices with
a formal loop parameter: elements are finite sums of (matrix, t-power)
terms plus a central coefficient and a derivation coefficient.  The
principal grade of a matrix unit E_rs t^m is M*m + (s - r); the grading
element rho = M d + (diagonal half-sum) measures this grade, and
delta = sum of the simple-node Cartan elements is central.

Provided here:

* ``LoopElement``        -- sparse loop-algebra element over any coefficient
                            ring (exact rationals or rational functions);
* ``chevalley``          -- raising/lowering/Cartan generators, rho, delta;
* ``principal_elements`` -- the commuting family p_j (j in +-E, E the
                            positive integers away from multiples of M),
                            as powers of the cyclic element, cross-checked
                            against a graded kernel solver;
* ``MiuraData``          -- marked points, levels, per-site coroot pairings
                            and optional extra first-order poles ("roots");
* ``v_closed``           -- closed-form first two coefficient functions of
                            the quasi-canonical connection;
* ``canonicalize``       -- generic grade-by-grade gauge reduction of the
                            same connection, the independent oracle for
                            ``v_closed``.
"""

from .rationals import Q, ZERO, ONE
from .ratfun import BiRatFun, TwistData, twisted_derivative
from .vertex import _solve_int_system


# ---------------------------------------------------------------------------
# loop-algebra elements
# ---------------------------------------------------------------------------

class LoopElement:
    """Sparse element: {(tpow, r, s): coeff} matrix part + cK + cd."""

    __slots__ = ("M", "mat", "cK", "cd")

    def __init__(self, M, mat=None, cK=0, cd=0):
        self.M = M
        self.mat = {} if mat is None else {k: v for k, v in mat.items() if v}
        self.cK = cK
        self.cd = cd

    @classmethod
    def unit(cls, M, tpow, r, s, coeff=ONE):
        return cls(M, {(tpow, r, s): coeff})

    def is_zero(self):
        return not self.mat and not self.cK and not self.cd

    def __bool__(self):
        return not self.is_zero()

    def __eq__(self, other):
        return (self.M == other.M and self.mat == other.mat
                and not (self.cK - other.cK) and not (self.cd - other.cd))

    def __add__(self, other):
        mat = dict(self.mat)
        for k, v in other.mat.items():
            nv = mat.get(k, 0) + v
            if nv:
                mat[k] = nv
            elif k in mat:
                del mat[k]
        return LoopElement(self.M, mat, self.cK + other.cK, self.cd + other.cd)

    def __sub__(self, other):
        return self + other.scale(-ONE)

    def scale(self, c):
        if not c:
            return LoopElement(self.M)
        return LoopElement(self.M, {k: c * v for k, v in self.mat.items()},
                           c * self.cK if self.cK else 0,
                           c * self.cd if self.cd else 0)

    def bracket(self, other):
        """Lie bracket with the loop cocycle and the derivation action."""
        M = self.M
        mat = {}
        cK = 0

        def acc(key, val):
            if not val:
                return
            nv = mat.get(key, 0) + val
            if nv:
                mat[key] = nv
            elif key in mat:
                del mat[key]

        for (m, r, s), ca in self.mat.items():
            for (n, u, v), cb in other.mat.items():
                c = ca * cb
                if s == u:
                    acc((m + n, r, v), c)
                if v == r:
                    acc((m + n, u, s), -c)
                if m + n == 0 and s == u and v == r and m:
                    cK = cK + Q(m) * c
        if self.cd:
            for (n, u, v), cb in other.mat.items():
                if n:
                    acc((n, u, v), self.cd * Q(n) * cb)
        if other.cd:
            for (m, r, s), ca in self.mat.items():
                if m:
                    acc((m, r, s), -Q(m) * ca * other.cd)
        return LoopElement(M, mat, cK, 0)

    def pair(self, other):
        """Invariant bilinear form: trace form plus (K|d) = (d|K) = 1."""
        out = 0
        for (m, r, s), ca in self.mat.items():
            cb = other.mat.get((-m, s, r))
            if cb:
                out = out + ca * cb
        if self.cK and other.cd:
            out = out + self.cK * other.cd
        if self.cd and other.cK:
            out = out + self.cd * other.cK
        return out

    def mprod(self, other):
        """Associative matrix product (ignores central/derivation parts)."""
        mat = {}
        for (m, r, s), ca in self.mat.items():
            for (n, u, v), cb in other.mat.items():
                if s == u:
                    k = (m + n, r, v)
                    nv = mat.get(k, 0) + ca * cb
                    if nv:
                        mat[k] = nv
                    elif k in mat:
                        del mat[k]
        return LoopElement(self.M, mat)

    def dz(self):
        mat = {}
        for k, v in self.mat.items():
            if isinstance(v, BiRatFun):
                dv = v.dz()
                if dv:
                    mat[k] = dv
        cK = self.cK.dz() if isinstance(self.cK, BiRatFun) else 0
        cd = self.cd.dz() if isinstance(self.cd, BiRatFun) else 0
        return LoopElement(self.M, mat, cK, cd)

    # --- principal grading ---------------------------------------------
    def grade_component(self, g):
        """Matrix part of principal grade g, plus cK/cd when g == 0."""
        M = self.M
        mat = {k: v for k, v in self.mat.items()
               if M * k[0] + k[2] - k[1] == g}
        if g == 0:
            return LoopElement(M, mat, self.cK, self.cd)
        return LoopElement(M, mat)

    def grades(self):
        gs = {self.M * m + s - r for (m, r, s) in self.mat}
        if self.cK or self.cd:
            gs.add(0)
        return sorted(gs)

    def min_grade(self):
        gs = self.grades()
        return gs[0] if gs else None

    def trace(self, tpow=0):
        out = 0
        for (m, r, s), c in self.mat.items():
            if m == tpow and r == s:
                out = out + c
        return out

    def __repr__(self):
        parts = ["%s*E[%d,%d]t^%d" % (c, r, s, m)
                 for (m, r, s), c in sorted(self.mat.items())]
        if self.cK:
            parts.append("%s*K" % (self.cK,))
        if self.cd:
            parts.append("%s*d" % (self.cd,))
        return " + ".join(parts) if parts else "0"


def chevalley(M):
    """Raising/lowering/Cartan generators, rho and delta.

    e[i] = E_{i,i+1} for i >= 1 and e[0] = E_{M,1} t; f[i] transposed with
    t^{-1} on the cyclic node; h[i] = [e[i], f[i]]; rho = M d + half-sum
    diagonal; delta = sum h[i], which comes out central.
    """
    e = [LoopElement.unit(M, 1, M - 1, 0)]
    f = [LoopElement.unit(M, -1, 0, M - 1)]
    for i in range(1, M):
        e.append(LoopElement.unit(M, 0, i - 1, i))
        f.append(LoopElement.unit(M, 0, i, i - 1))
    h = [e[i].bracket(f[i]) for i in range(M)]
    rho = LoopElement(M, {(0, i, i): Q(M - 1 - 2 * i, 2) for i in range(M)},
                      0, Q(M))
    delta = LoopElement(M)
    for hi in h:
        delta = delta + hi
    return e, f, h, rho, delta


def exponents(M, max_grade):
    """Positive grades below the cutoff that avoid multiples of M."""
    return [j for j in range(1, max_grade + 1) if j % M]


def graded_basis(M, g):
    """Basis of the grade-g subspace of the loop matrices (traceless).

    Off-diagonal matrix units at the matching t-power; at grades divisible
    by M also the traceless diagonal differences.  (Central and derivation
    directions at grade 0 are handled by callers explicitly.)
    """
    out = []
    span = abs(g) // M + 2
    for m in range(-span, span + 1):
        for r in range(M):
            for s in range(M):
                if r != s and M * m + s - r == g:
                    out.append(LoopElement.unit(M, m, r, s))
    if g % M == 0:
        m = g // M
        for i in range(M - 1):
            out.append(LoopElement(M, {(m, i, i): ONE,
                                       (m, i + 1, i + 1): -ONE}))
    return out


def _grade_coords(M, g):
    """Spanning coordinate keys of grade g: matrix units, K at grade 0."""
    keys = []
    span = abs(g) // M + 2
    for m in range(-span, span + 1):
        for r in range(M):
            for s in range(M):
                if M * m + s - r == g and (r != s or g % M == 0):
                    keys.append(("m", m, r, s))
    if g == 0:
        keys.append(("K",))
    return keys


# ---------------------------------------------------------------------------
# principal elements
# ---------------------------------------------------------------------------

def _nullspace(rows, ncols):
    """Exact rational nullspace basis of a rational matrix (rows x ncols)."""
    a = [[Q(x) for x in row] for row in rows]
    nrows = len(a)
    piv_cols = []
    rr = 0
    for c in range(ncols):
        piv = next((r for r in range(rr, nrows) if a[r][c]), None)
        if piv is None:
            continue
        a[rr], a[piv] = a[piv], a[rr]
        inv = ONE / a[rr][c]
        a[rr] = [x * inv for x in a[rr]]
        for r in range(nrows):
            if r != rr and a[r][c]:
                fac = a[r][c]
                a[r] = [x - fac * y for x, y in zip(a[r], a[rr])]
        piv_cols.append(c)
        rr += 1
    basis = []
    for fc in (c for c in range(ncols) if c not in piv_cols):
        vec = [ZERO] * ncols
        vec[fc] = ONE
        for r, pc in enumerate(piv_cols):
            vec[pc] = -a[r][fc]
        basis.append(vec)
    return basis


def _power(a, n):
    out = a
    for _ in range(n - 1):
        out = out.mprod(a)
    return out


class PrincipalFamily:
    """The commuting elements p_j and the surrounding graded structure."""

    def __init__(self, M, max_grade):
        self.M = M
        self.max_grade = max_grade
        self.e, self.f, self.h, self.rho, self.delta = chevalley(M)
        pm1 = LoopElement(M)
        for fi in self.f:
            pm1 = pm1 + fi
        lam = LoopElement(M)
        for ei in self.e:
            lam = lam + ei
        self.p_minus1 = pm1
        self.p = {1: lam, -1: pm1}
        for j in range(2, max_grade + 1):
            if j % M:
                self.p[j] = _power(lam, j)
                self.p[-j] = _power(pm1, j)

    # --- graded solver (independent route to the p_j) -------------------
    def _coord_vec(self, el, g):
        out = []
        for key in _grade_coords(self.M, g):
            if key[0] == "m":
                out.append(el.mat.get(key[1:], ZERO))
            else:
                out.append(el.cK if el.cK else ZERO)
        return out

    def _ad_matrix(self, basis, g_out):
        """Rows over grade-g_out coordinates of [p_{-1}, b] per basis b."""
        cols = [self._coord_vec(self.p_minus1.bracket(b), g_out)
                for b in basis]
        return [[col[r] for col in cols] for r in range(len(cols[0]))]

    def kernel_dimension(self, g):
        """dim of solutions of [p_{-1}, X] = 0 in grade g."""
        basis = graded_basis(self.M, g)
        rows = self._ad_matrix(basis, g - 1)
        return len(_nullspace(rows, len(basis)))

    def solve_graded(self, g):
        """Solve [p_{-1}, X] = 0 (g != 1) or [p_{-1}, X] = -delta (g == 1).

        Returns a list of basis solutions; for g == 1 the unique particular
        solution.
        """
        basis = graded_basis(self.M, g)
        rows = self._ad_matrix(basis, g - 1)
        if g == 1:
            rhs = self._coord_vec(self.delta.scale(-ONE), 0)
            sol = _solve_int_system(rows, rhs)
            if sol is None:
                raise ArithmeticError("no grade-1 solution")
            out = LoopElement(self.M)
            for c, b in zip(sol, basis):
                if c:
                    out = out + b.scale(Q(c))
            return [out]
        combos = _nullspace(rows, len(basis))
        out = []
        for vec in combos:
            el = LoopElement(self.M)
            for c, b in zip(vec, basis):
                if c:
                    el = el + b.scale(c)
            out.append(el)
        return out


_FAMILIES = {}


def principal_elements(M, max_grade):
    key = (M, max_grade)
    if key not in _FAMILIES or _FAMILIES[key].max_grade < max_grade:
        _FAMILIES[key] = PrincipalFamily(M, max_grade)
    return _FAMILIES[key]


# ---------------------------------------------------------------------------
# Miura data
# ---------------------------------------------------------------------------

def cyclic_cartan(M):
    """The (singular) cyclic Cartan matrix 2*d_ij - d_{i,j+1} - d_{i,j-1}."""
    a = [[ZERO] * M for _ in range(M)]
    for i in range(M):
        a[i][i] = a[i][i] + 2
        a[i][(i + 1) % M] = a[i][(i + 1) % M] - 1
        a[i][(i - 1) % M] = a[i][(i - 1) % M] - 1
    return a


class MiuraData:
    """Marked points, levels, per-site coroot pairings, optional root poles.

    ``pairings[i][j]`` is the pairing of the i-th site weight with the j-th
    simple coroot, j = 0..M-1; the row sum must equal the level k_i (the
    pairing with the central element).  ``roots`` is a sequence of
    (location, color) pairs, each adding a first-order pole along the
    color's simple root to the Cartan part of the connection.
    """

    def __init__(self, M, points, levels, pairings, roots=()):
        self.M = M
        self.N = len(points)
        self.points = [Q(p) for p in points]
        self.levels = [Q(k) for k in levels]
        self.pairings = [[Q(x) for x in row] for row in pairings]
        self.roots = tuple((Q(w), int(n)) for w, n in roots)
        if len(self.pairings) != self.N or len(self.levels) != self.N:
            raise ValueError("need pairings and a level per site")
        if len(set(self.points)) != self.N:
            raise ValueError("marked points must be distinct")
        for i, row in enumerate(self.pairings):
            if len(row) != M:
                raise ValueError("need one pairing per node")
            if sum(row, ZERO) != self.levels[i]:
                raise ValueError(
                    "pairings at site %d do not sum to the level" % i)
        for w, n in self.roots:
            if w in self.points:
                raise ValueError("root location collides with a marked point")
            if not 0 <= n < M:
                raise ValueError("bad root color")
        self.twist = TwistData(self.points, self.levels)

    def eta_pairings(self):
        """Per-site pairings with the grading-adapted dual coweights.

        Each site weight is expanded over the simple roots plus (1/M) of
        the grading element; the simple-root coefficients l_i are exactly
        the dual-coweight pairings.  They solve  A l = p - (k/M) 1  with A
        the cyclic Cartan matrix, whose kernel (the all-ones vector) is
        fixed by pinning l_0 = 0 -- the same convention that sets the
        derivation pairing of each weight to zero.  The dropped cyclic row
        is verified for consistency.
        """
        M = self.M
        a = cyclic_cartan(M)
        sub = [[int(a[m][i]) for i in range(1, M)] for m in range(1, M)]
        out = []
        for site in range(self.N):
            p = self.pairings[site]
            k = self.levels[site]
            rhs = [p[m] - k / M for m in range(M)]
            sol = _solve_int_system(sub, rhs[1:])
            if sol is None:
                raise ArithmeticError("coweight solve failed")
            l = [ZERO] + [Q(x) for x in sol]
            if sum((a[0][i] * l[i] for i in range(M)), ZERO) != rhs[0]:
                raise ArithmeticError("coweight solve inconsistent")
            out.append(l)
        return out

    def u_funcs(self):
        """The Cartan coefficient functions u_i(z), i = 0..M-1."""
        etas = self.eta_pairings()
        us = []
        for i in range(self.M):
            f = BiRatFun.const(ZERO)
            for site in range(self.N):
                if etas[site][i]:
                    f = f + BiRatFun.pole_z(self.points[site]) * (-etas[site][i])
            for w, n in self.roots:
                if n == i:
                    f = f + BiRatFun.pole_z(w)
            us.append(f)
        return us

    def phi(self):
        return self.twist.phi("z")


def bethe_root(points, pairings, color):
    """Root location where sum_j pairings[j][color] / (w - z_j) vanishes.

    For two sites the unique solution is returned in closed form; for more
    sites a residual evaluator is returned instead.
    """
    coef = [row[color] for row in pairings]
    pts = [Q(z) for z in points]
    if len(pts) == 2:
        den = coef[0] + coef[1]
        if not den:
            raise ZeroDivisionError("degenerate pairing sum for this color")
        return (coef[0] * pts[1] + coef[1] * pts[0]) / den

    def residual(w):
        w = Q(w)
        return sum((c / (w - z) for c, z in zip(coef, pts)), ZERO)

    return residual


# ---------------------------------------------------------------------------
# closed-form coefficient functions
# ---------------------------------------------------------------------------

def rho_norm(M):
    """Self-pairing of rho: the squared length of the diagonal half-sum."""
    return Q(M * (M * M - 1), 12)


def v2_from_u(us, M):
    """Cubic coefficient from the Cartan functions alone (indices cyclic)."""
    v2 = BiRatFun.const(ZERO)
    for i in range(M):
        up = us[(i + 1) % M]
        um = us[(i - 1) % M]
        v2 = v2 - us[i] * (up * up - um * um)
        v2 = v2 - us[i] * (up.dz() - um.dz()) * Q(1, 2)
    return v2 * Q(1, M)


def v_closed(data):
    """Closed forms of the first two quasi-canonical coefficient functions.

    v1 = (1/M) ( (u|u)/2 + D^(1)(rho|u) ) with u the simple-root part of
    the connection coefficient (the grading-element part enters only
    through the twisted derivative), and v2 is the cyclic cubic form in
    the u_i with its free twisted-derivative term fixed to zero.
    """
    M = data.M
    us = data.u_funcs()
    usum = BiRatFun.const(ZERO)
    for u in us:
        usum = usum + u
    uu = BiRatFun.const(ZERO)
    a = cyclic_cartan(M)
    for i in range(M):
        for j in range(M):
            if a[i][j]:
                uu = uu + us[i] * us[j] * a[i][j]
    v1 = (uu * Q(1, 2)
          + twisted_derivative(usum, 1, M, data.twist, "z")) * Q(1, M)
    v2 = v2_from_u(us, M)
    return v1, v2


# ---------------------------------------------------------------------------
# generic gauge reduction (the cross-oracle)
# ---------------------------------------------------------------------------

def _as_fun(M, el):
    """Promote exact-rational coefficients to constant functions."""
    def conv(c):
        return c if isinstance(c, BiRatFun) else BiRatFun.const(Q(c))
    return LoopElement(M, {k: conv(v) for k, v in el.mat.items()},
                       conv(el.cK) if el.cK else 0,
                       conv(el.cd) if el.cd else 0)


def miura_connection(data, fam=None):
    """p_{-1} + sum_i u_i h_i - (phi/M) rho with function coefficients."""
    if fam is None:
        fam = principal_elements(data.M, 3)
    conn = _as_fun(data.M, fam.p_minus1)
    for i, ui in enumerate(data.u_funcs()):
        if ui:
            conn = conn + _as_fun(data.M, fam.h[i]).scale(ui)
    conn = conn + _as_fun(data.M, fam.rho).scale(data.phi() * Q(-1, data.M))
    return conn


def gauge_transform(conn, m, max_grade):
    """Conjugate the connection d/dz + conn by exp(m), truncated in grade.

    Applies exp(ad m) to conn and subtracts the derivative series
    sum_{k>=0} ad_m^k(m') / (k+1)!.  Grades above max_grade are dropped.
    """
    M = conn.M
    out = conn
    term = conn
    k = 0
    while term:
        k += 1
        term = m.bracket(term).scale(Q(1, k))
        if term.is_zero():
            break
        out = out + term
        mg = term.min_grade()
        if mg is not None and mg > max_grade:
            break
    dm = m.dz()
    term = dm
    out = out - term
    k = 0
    while term:
        k += 1
        term = m.bracket(term).scale(Q(1, k + 1))
        if term.is_zero():
            break
        out = out - term
        mg = term.min_grade()
        if mg is not None and mg > max_grade:
            break
    keep = {key: v for key, v in out.mat.items()
            if M * key[0] + key[2] - key[1] <= max_grade}
    return LoopElement(M, keep, out.cK, out.cd)


def canonicalize_connection(conn, phi, M, max_grade):
    """Grade-by-grade gauge reduction of d/dz + conn.

    ``conn`` must be p_{-1} plus terms of non-negative principal grade with
    function coefficients.  Returns ({j: v_j over the exponents j <=
    max_grade}, gauge element m): the reduced connection is
    p_{-1} - (phi/M) rho + sum_j v_j p_j, verified exactly before return.
    """
    fam = principal_elements(M, max(max_grade + 1, 2))
    zero = BiRatFun.const(ZERO)
    target0 = _as_fun(M, fam.rho).scale(phi * Q(-1, M))
    m = LoopElement(M)
    v = {}
    for g in range(0, max_grade + 1):
        cur = gauge_transform(conn, m, max_grade) if m else conn
        gam = cur.grade_component(g)
        if g == 0:
            target = target0
        elif g % M == 0:
            target = LoopElement(M)
        else:
            vg = fam.p[-g].pair(gam)
            if not isinstance(vg, BiRatFun):
                vg = BiRatFun.const(Q(vg))
            vg = vg * Q(1, M)
            v[g] = vg
            target = _as_fun(M, fam.p[g]).scale(vg)
        resid = gam - target
        if resid.cd:
            raise ArithmeticError("derivation mismatch at grade %d" % g)
        if resid.is_zero():
            continue
        # solve [X, p_{-1}] = -resid over the grade-(g+1) subspace
        basis = graded_basis(M, g + 1)
        imgs = [b.bracket(fam.p_minus1) for b in basis]
        rows = []
        rhs = []
        for key in _grade_coords(M, g):
            if key[0] == "m":
                rows.append([int(img.mat.get(key[1:], 0)) for img in imgs])
                val = resid.mat.get(key[1:], zero)
            else:
                rows.append([int(img.cK) if img.cK else 0 for img in imgs])
                val = resid.cK if resid.cK else zero
            if not isinstance(val, BiRatFun):
                val = BiRatFun.const(Q(val))
            rhs.append(val * Q(-1))
        sol = _solve_int_system(rows, rhs)
        if sol is None:
            raise ArithmeticError("gauge solve failed at grade %d" % g)
        step = LoopElement(M)
        for c, b in zip(sol, basis):
            if c:
                step = step + _as_fun(M, b).scale(c)
        # fix the residual freedom c(z) p_{g+1} (present for exponents
        # above 1, where p_{g+1} centralizes p_{-1}) by making the
        # increment pairing-orthogonal to the principal family; this
        # reproduces the representative with vanishing free
        # twisted-derivative terms
        if g >= 1 and (g + 1) % M and (g + 1) in fam.p:
            pr = fam.p[-(g + 1)].pair(step)
            if pr:
                step = step - _as_fun(M, fam.p[g + 1]).scale(pr * Q(1, M))
        m = m + step
    # defense: the reduced connection matches the target at every grade
    cur = gauge_transform(conn, m, max_grade)
    res = cur - target0 - _as_fun(M, fam.p_minus1)
    for j, vj in v.items():
        res = res - _as_fun(M, fam.p[j]).scale(vj)
    for g in range(-1, max_grade + 1):
        if not res.grade_component(g).is_zero():
            raise ArithmeticError("canonical form residual at grade %d" % g)
    return v, m


def canonicalize(data, max_grade):
    """Quasi-canonical coefficients {j: v_j} of the connection built from data."""
    fam = principal_elements(data.M, max(max_grade + 1, 2))
    conn = miura_connection(data, fam)
    v, _ = canonicalize_connection(conn, data.phi(), data.M, max_grade)
    return v
