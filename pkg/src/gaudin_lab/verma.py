"""Truncated highest-weight modules and the density operators acting on them.

For N marked points with levels k_i and integrable-type weight data this
module builds the tensor product of highest-weight modules over the
N-site affine algebra, truncated by total principal depth, and realizes
on it:

* the grade-zero Fourier modes of the quadratic and cubic densities,
  as exact matrices depending rationally on the spectral parameter;
* the quadratic Gaudin Hamiltonians and site Casimir combinations;
* the partial-fraction decomposition of the straightened quadratic
  density into those Hamiltonians (verified entry by entry);
* the principal-degree-0/1 parts of the cubic density written in the
  dual-coweight Cartan fields, compared modulo exact second twisted
  derivatives;
* hypergeometric eigenvalue checks: contour integrals of the cubic
  density acting on the highest-weight line, and on one-excitation
  vectors located at a root of the pairing equation, against the cubic
  coefficient function of the quasi-canonical connection.

Basis states are products over sites of PBW-ordered words in the
negative-principal-grade loop generators.  All operator words are
applied with exact intermediate states; projection onto the enumerated
basis happens only at the very end and certifies, rather than assumes,
that nothing was dropped.  The grade-zero density modes preserve the
principal grade, so on this truncation their matrices are exact.

Generator labels are tuples (m, kind, a, b): kind 0 is the matrix unit
E_ab at loop power m (a != b), kind 1 is the Cartan difference
E_{a-1,a-1} - E_{a,a} at loop power m (b is 0 and unused).
"""

import itertools

from .rationals import Q, ZERO, ONE
from .ratfun import BiRatFun, TwistData, twisted_derivative, solve_twisted_exact
from .tensors import SLBasis
from .oper import (LoopElement, chevalley, cyclic_cartan, MiuraData,
                   bethe_root, v_closed)
from .vertex import _solve_int_system
from .contour import TwistedCycle, ContourSpec


def _fl(q):
    q = Q(q)
    return float(q.numerator) / float(q.denominator)


def _pg(M, lab):
    """Principal grade of a generator label."""
    m, kind, a, b = lab
    return m * M + (b - a if kind == 0 else 0)


def _label_elem(M, lab):
    """The loop-algebra element for one generator label."""
    m, kind, a, b = lab
    if kind == 0:
        return LoopElement.unit(M, m, a, b)
    return LoopElement(M, {(m, a - 1, a - 1): ONE, (m, a, a): -ONE})


def _elem_terms(M, elem):
    """Decompose a loop element into labels plus central and derivation parts.

    The diagonal part at each loop power is expanded over the Cartan
    differences by prefix sums; it must be traceless.
    """
    diag = {}
    terms = []
    for (m, r, s), c in elem.mat.items():
        if not c:
            continue
        if r == s:
            diag.setdefault(m, [ZERO] * M)
            diag[m][r] = diag[m][r] + c
        else:
            terms.append(((m, 0, r, s), c))
    for m, d in diag.items():
        if sum(d, ZERO):
            raise ArithmeticError("diagonal part is not traceless")
        run = ZERO
        for l in range(1, M):
            run = run + d[l - 1]
            if run:
                terms.append(((m, 1, l, 0), run))
    return terms, elem.cK, elem.cd


def creation_labels(M, budget):
    """Negative-principal-grade generator labels with depth <= budget."""
    out = []
    for m in range(-(budget // M) - 1, 1):
        for r in range(M):
            for s in range(M):
                if r != s and -budget <= _pg(M, (m, 0, r, s)) <= -1:
                    out.append((m, 0, r, s))
        if m < 0 and -budget <= m * M:
            for l in range(1, M):
                out.append((m, 1, l, 0))
    out.sort()
    return out


def _monos_by_cost(M, gens, budget):
    """Non-decreasing generator words for one site, grouped by depth."""
    costs = [-_pg(M, lab) for lab in gens]
    table = {c: [] for c in range(budget + 1)}

    def rec(start, rem, acc):
        table[budget - rem].append(tuple(acc))
        for j in range(start, len(gens)):
            if costs[j] <= rem:
                acc.append(gens[j])
                rec(j, rem - costs[j], acc)
                acc.pop()

    rec(0, budget, [])
    return table


class TruncatedVerma:
    """Tensor product of N highest-weight modules, cut at total depth.

    ``data`` provides the marked points, levels and per-node coroot
    pairings (any extra root data is ignored here; it matters only for
    the connection-side functions).  The basis, enumerated lazily, holds
    every product of per-site PBW words whose total principal depth is
    at most ``depth``; index 0 is the highest-weight line.
    """

    def __init__(self, data, depth=None):
        self.data = data
        self.M = data.M
        self.N = data.N
        self.depth = int(depth) if depth is not None else 3 * data.M - 2
        if not 1 <= self.depth <= 10:
            raise ValueError("truncation depth must be between 1 and 10")
        self.sl = SLBasis(self.M)
        self.gens = creation_labels(self.M, self.depth)
        self.vacuum = tuple(() for _ in range(self.N))
        self._basis = None
        self._index = None
        self._cache = {}
        self._brackets = {}
        self._partners = None
        self._t_up = None
        self._pref = None
        self._etas = None

    # -- basis ------------------------------------------------------------

    def _ensure_basis(self):
        if self._basis is not None:
            return
        per = _monos_by_cost(self.M, self.gens, self.depth)
        states = []

        def rec(site, rem, acc):
            if site == self.N:
                states.append(tuple(acc))
                return
            for c in range(rem + 1):
                for mono in per[c]:
                    acc.append(mono)
                    rec(site + 1, rem - c, acc)
                    acc.pop()

        rec(0, self.depth, [])
        states.sort(key=lambda s: (self.principal_cost(s), s))
        self._basis = states
        self._index = {s: i for i, s in enumerate(states)}

    @property
    def basis(self):
        self._ensure_basis()
        return self._basis

    @property
    def index(self):
        self._ensure_basis()
        return self._index

    @property
    def dim(self):
        return len(self.basis)

    def site_depth(self, state, site):
        return -sum(lab[0] for lab in state[site])

    def total_depth(self, state):
        return sum(self.site_depth(state, s) for s in range(self.N))

    def principal_cost(self, state):
        return -sum(_pg(self.M, lab) for mono in state for lab in mono)

    # -- straightening ----------------------------------------------------

    def _bracket_terms(self, lab, g1):
        key = (lab, g1)
        hit = self._brackets.get(key)
        if hit is None:
            br = _label_elem(self.M, lab).bracket(_label_elem(self.M, g1))
            terms, cK, cd = _elem_terms(self.M, br)
            if cd:
                raise ArithmeticError("unexpected derivation term in a bracket")
            hit = (tuple(terms), cK)
            self._brackets[key] = hit
        return hit

    def _apply_label(self, site, lab, mono):
        """One generator acting on one PBW word: {word: coefficient}."""
        key = (site, lab, mono)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        out = {}
        if not mono:
            pg = _pg(self.M, lab)
            if pg < 0:
                out[(lab,)] = ONE
            elif pg == 0:
                c = self.data.pairings[site][lab[2]]
                if c:
                    out[()] = c
            # positive grade annihilates the highest-weight vector
        else:
            g1 = mono[0]
            rest = mono[1:]
            if _pg(self.M, lab) < 0 and lab <= g1:
                out[(lab,) + mono] = ONE
            else:
                for m2, c2 in self._apply_label(site, lab, rest).items():
                    for m3, c3 in self._apply_label(site, g1, m2).items():
                        out[m3] = out.get(m3, ZERO) + c2 * c3
                terms, cK = self._bracket_terms(lab, g1)
                for lab2, c2 in terms:
                    for m3, c3 in self._apply_label(site, lab2, rest).items():
                        out[m3] = out.get(m3, ZERO) + c2 * c3
                if cK:
                    c = cK * self.data.levels[site]
                    if c:
                        out[rest] = out.get(rest, ZERO) + c
        out = {m: c for m, c in out.items() if c}
        self._cache[key] = out
        return out

    def apply_site_label(self, site, lab, vec):
        """One generator at one site on a vector {state: coefficient}."""
        out = {}
        for state, c in vec.items():
            for mono, c2 in self._apply_label(site, lab, state[site]).items():
                ns = state[:site] + (mono,) + state[site + 1:]
                prev = out.get(ns)
                out[ns] = c * c2 if prev is None else prev + c * c2
        return out

    def apply_site_elem(self, site, elem, vec):
        """A loop-algebra element at one site (K -> level, d -> -depth)."""
        terms, cK, cd = _elem_terms(self.M, elem)
        out = {}
        for lab, c in terms:
            _acc(out, self.apply_site_label(site, lab, vec), c)
        if cK:
            _acc(out, vec, cK * self.data.levels[site])
        if cd:
            for state, c in vec.items():
                g = self.site_depth(state, site)
                if g:
                    _acc1(out, state, c * cd * Q(-g))
        return out

    def mode_label(self, a, n):
        """Generator label for the n-th loop mode of the a-th sl basis element."""
        lab = self.sl.labels[a]
        if lab[0] == "e":
            return (n, 0, lab[1], lab[2])
        return (n, 1, lab[1] + 1, 0)

    def partners(self):
        """For each sl index b, the list of (a, g^{ab} != 0) metric partners."""
        if self._partners is None:
            nsl = len(self.sl.labels)
            self._partners = [
                [(a, self.sl.gram_inv[a][b]) for a in range(nsl)
                 if self.sl.gram_inv[a][b]] for b in range(nsl)]
        return self._partners

    def t_up(self):
        if self._t_up is None:
            self._t_up = self.sl.raise_tensor(self.sl.t, (0, 1, 2))
        return self._t_up

    # -- projection -------------------------------------------------------

    def project(self, vec, require_closed=True):
        """Map a state-keyed vector to basis indices, certifying closure."""
        out = {}
        for state, c in vec.items():
            if isinstance(c, BiRatFun):
                if c.is_zero():
                    continue
            elif not c:
                continue
            idx = self.index.get(state)
            if idx is None:
                if require_closed:
                    raise ArithmeticError(
                        "operator action left the truncated basis (depth %d)"
                        % self.depth)
                continue
            out[idx] = c
        return out

    # -- spectral-parameter prefactors ------------------------------------

    def prefactor_table(self):
        """Rational functions of z keyed by the site patterns of words."""
        if self._pref is None:
            pts = self.data.points
            tab = {("anom",): self.data.twist.phi("z").dz()}
            poles = [BiRatFun.pole_z(p) for p in pts]
            for i in range(self.N):
                for j in range(i, self.N):
                    tab[("pp", i, j)] = (BiRatFun.pole_z(pts[i], 2)
                                         if i == j else poles[i] * poles[j])
            for i in range(self.N):
                for j in range(i, self.N):
                    for k in range(j, self.N):
                        f = poles[i] * poles[j] * poles[k]
                        tab[("ppp", i, j, k)] = f
            self._pref = tab
        return self._pref

    def eta_coeffs(self):
        """Dual-coweight expansions over the affine Cartan generators.

        Row i solves <alpha_j, eta_i> = delta_ij with zero pairing against
        the principal grading element; the expansion is over the node
        Cartan elements (coefficients c_l) plus the derivation with
        coefficient one.
        """
        if self._etas is None:
            M = self.M
            a = cyclic_cartan(M)
            rows = [[Q(a[j][l]) for l in range(M)] for j in range(1, M)]
            rows.append([ONE] * M)
            out = []
            for i in range(M):
                rhs = [(ONE if j == i else ZERO) - (ONE if j == 0 else ZERO)
                       for j in range(1, M)]
                rhs.append(ZERO)
                sol = _solve_int_system(rows, rhs)
                if sol is None:
                    raise ArithmeticError("dual-coweight solve failed")
                sol = [Q(x) for x in sol]
                lead = sum((Q(a[0][l]) * sol[l] for l in range(M)), ZERO)
                want = (ONE if i == 0 else ZERO) - ONE
                if lead != want:
                    raise ArithmeticError("dual-coweight solve inconsistent")
                out.append(sol)
            self._etas = out
        return self._etas

    def apply_eta(self, color, site, vec):
        """The dual-coweight Cartan operator for one node at one site."""
        cs = self.eta_coeffs()[color]
        _, _, h, _, _ = chevalley(self.M)
        elem = LoopElement(self.M)
        for l in range(self.M):
            if cs[l]:
                elem = elem + h[l].scale(cs[l])
        out = self.apply_site_elem(site, elem, vec)
        for state, c in vec.items():
            g = self.site_depth(state, site)
            if g:
                _acc1(out, state, c * Q(-g))
        return out


def build_module(data, depth=None):
    """Convenience constructor for :class:`TruncatedVerma`."""
    return TruncatedVerma(data, depth)


def _acc(out, vec, coeff):
    for state, c in vec.items():
        _acc1(out, state, c * coeff)


def _acc1(out, state, val):
    prev = out.get(state)
    out[state] = val if prev is None else prev + val


# ---------------------------------------------------------------------------
# grade-zero density modes
# ---------------------------------------------------------------------------

def quadratic_action_keyed(module, vec):
    """Grade-zero mode of the quadratic density, site-pattern keyed.

    ``vec`` has exact rational coefficients.  The result maps states to
    {prefactor key: coefficient}; combine with ``module.prefactor_table``
    to obtain functions of the spectral parameter.  Includes the
    anomaly term dim/24 times the derivative of the twist logarithm.
    """
    out = {}
    dim24 = Q(module.M * module.M - 1, 24)
    N = module.N
    partners = module.partners()
    for state0, c0 in vec.items():
        _addk(out, state0, ("anom",), c0 * dim24)
        base = {state0: c0}
        dmax = module.total_depth(state0)
        for sj in range(N):
            for b in range(len(module.sl.labels)):
                if not partners[b]:
                    continue
                v1 = module.apply_site_label(sj, module.mode_label(b, 0), base)
                if v1:
                    for a, g in partners[b]:
                        half = g * Q(1, 2)
                        for si in range(N):
                            key = ("pp", min(si, sj), max(si, sj))
                            v2 = module.apply_site_label(
                                si, module.mode_label(a, 0), v1)
                            for s2, c2 in v2.items():
                                _addk(out, s2, key, c2 * half)
                for n in range(1, dmax + 1):
                    v1 = module.apply_site_label(
                        sj, module.mode_label(b, n), base)
                    if not v1:
                        continue
                    for a, g in partners[b]:
                        for si in range(N):
                            key = ("pp", min(si, sj), max(si, sj))
                            v2 = module.apply_site_label(
                                si, module.mode_label(a, -n), v1)
                            for s2, c2 in v2.items():
                                _addk(out, s2, key, c2 * g)
    return out


def cubic_action_keyed(module, vec):
    """Grade-zero mode of the cubic density, site-pattern keyed.

    Three families of mode words, each with total mode zero; the
    annihilating factor always acts first, which bounds every mode sum
    by the homogeneous depth of the current state.
    """
    out = {}
    third = Q(1, 3)
    N = module.N
    by_c = {}
    for (a, b, c), coef in module.t_up().items():
        by_c.setdefault(c, []).append((a, b, coef))
    for state0, c0 in vec.items():
        base = {state0: c0}
        D = module.total_depth(state0)
        for cidx, abl in by_c.items():
            for sc in range(N):
                # family with rightmost mode 2+j+k
                for mr in range(2, D + 1):
                    vr = module.apply_site_label(
                        sc, module.mode_label(cidx, mr), base)
                    if not vr:
                        continue
                    for j in range(mr - 1):
                        k = mr - 2 - j
                        for a, b, coef in abl:
                            w = third * coef
                            for sb in range(N):
                                v2 = module.apply_site_label(
                                    sb, module.mode_label(b, -1 - j), vr)
                                for sa in range(N):
                                    key = _tkey(sa, sb, sc)
                                    v3 = module.apply_site_label(
                                        sa, module.mode_label(a, -1 - k), v2)
                                    for s3, c3 in v3.items():
                                        _addk(out, s3, key, c3 * w)
                # families with rightmost mode j >= 0
                for j in range(D + 1):
                    vj = module.apply_site_label(
                        sc, module.mode_label(cidx, j), base)
                    if not vj:
                        continue
                    Dj = D - j
                    for a, b, coef in abl:
                        w2 = third * coef * 2
                        w3 = third * coef
                        for sb in range(N):
                            # middle mode 1+k-j, coefficient 2
                            for k in range(max(D, j)):
                                m2 = 1 + k - j
                                if m2 > Dj:
                                    break
                                v2 = module.apply_site_label(
                                    sb, module.mode_label(b, m2), vj)
                                if not v2:
                                    continue
                                for sa in range(N):
                                    key = _tkey(sa, sb, sc)
                                    v3 = module.apply_site_label(
                                        sa, module.mode_label(a, -1 - k), v2)
                                    for s3, c3 in v3.items():
                                        _addk(out, s3, key, c3 * w2)
                            # middle mode k >= 0, left mode -j-k
                            for k in range(Dj + 1):
                                v2 = module.apply_site_label(
                                    sb, module.mode_label(b, k), vj)
                                if not v2:
                                    continue
                                for sa in range(N):
                                    key = _tkey(sa, sb, sc)
                                    v3 = module.apply_site_label(
                                        sa, module.mode_label(a, -j - k), v2)
                                    for s3, c3 in v3.items():
                                        _addk(out, s3, key, c3 * w3)
    return out


def _tkey(sa, sb, sc):
    i, j, k = sorted((sa, sb, sc))
    return ("ppp", i, j, k)


def _addk(out, state, key, c):
    if not c:
        return
    row = out.setdefault(state, {})
    row[key] = row.get(key, ZERO) + c


def finish_keyed(module, keyed):
    """Combine site-pattern keys into functions of the spectral parameter."""
    tab = module.prefactor_table()
    out = {}
    for state, row in keyed.items():
        f = None
        for key, c in row.items():
            if not c:
                continue
            g = tab[key] * c
            f = g if f is None else f + g
        if f is not None and not f.is_zero():
            out[state] = f
    return out


def fourier_zero_keyed(module, i):
    """Site-pattern-keyed matrix of the grade-zero density mode."""
    if i not in (1, 2):
        raise ValueError("density index must be 1 or 2")
    action = quadratic_action_keyed if i == 1 else cubic_action_keyed
    mat = {}
    for col, state in enumerate(module.basis):
        keyed = action(module, {state: ONE})
        row = {}
        for s2, pats in keyed.items():
            pats = {k: c for k, c in pats.items() if c}
            if not pats:
                continue
            idx = module.index.get(s2)
            if idx is None:
                raise ArithmeticError("grade-zero action left the basis")
            row[idx] = pats
        mat[col] = row
    return mat


def fourier_zero(module, i):
    """Matrix of the grade-zero mode of the quadratic (i=1) or cubic (i=2)
    density on the truncated basis, entries rational in the spectral
    parameter.  These modes preserve the principal grade, so the matrix
    is exact; leaving the basis raises instead of truncating silently."""
    tab = module.prefactor_table()
    out = {}
    for col, row in fourier_zero_keyed(module, i).items():
        fin = {}
        for idx, pats in row.items():
            f = None
            for key, c in pats.items():
                g = tab[key] * c
                f = g if f is None else f + g
            if f is not None and not f.is_zero():
                fin[idx] = f
        out[col] = fin
    return out


# ---------------------------------------------------------------------------
# Sugawara bilinears, Hamiltonians, Casimir combinations
# ---------------------------------------------------------------------------

def _sugawara_apply(module, site, base, state0):
    """Half-sum bilinear at one site: 1/2 I_0 I_0 + sum_{n>0} I_{-n} I_n."""
    out = {}
    partners = module.partners()
    D = module.site_depth(state0, site)
    for b in range(len(module.sl.labels)):
        if not partners[b]:
            continue
        v1 = module.apply_site_label(site, module.mode_label(b, 0), base)
        if v1:
            for a, g in partners[b]:
                v2 = module.apply_site_label(site, module.mode_label(a, 0), v1)
                _acc(out, v2, g * Q(1, 2))
        for n in range(1, D + 1):
            v1 = module.apply_site_label(site, module.mode_label(b, n), base)
            if not v1:
                continue
            for a, g in partners[b]:
                v2 = module.apply_site_label(site, module.mode_label(a, -n), v1)
                _acc(out, v2, g)
    return out


def sugawara_site(module, site):
    """Exact matrix of the half-sum bilinear at one site."""
    mat = {}
    for col, state in enumerate(module.basis):
        vec = _sugawara_apply(module, site, {state: ONE}, state)
        mat[col] = module.project(vec)
    return mat


def _cross_bilinear(module, si, sj, base, state0):
    """sum_{n in Z} of the metric contraction I_{-n} at si times I_n at sj."""
    out = {}
    partners = module.partners()
    Di = module.site_depth(state0, si)
    Dj = module.site_depth(state0, sj)
    for b in range(len(module.sl.labels)):
        if not partners[b]:
            continue
        v1 = module.apply_site_label(sj, module.mode_label(b, 0), base)
        if v1:
            for a, g in partners[b]:
                v2 = module.apply_site_label(si, module.mode_label(a, 0), v1)
                _acc(out, v2, g)
        for n in range(1, Dj + 1):
            v1 = module.apply_site_label(sj, module.mode_label(b, n), base)
            if not v1:
                continue
            for a, g in partners[b]:
                v2 = module.apply_site_label(si, module.mode_label(a, -n), v1)
                _acc(out, v2, g)
    # negative modes: the annihilating factor sits at site si; the sites
    # differ, so the factors commute exactly and it may act first
    for a in range(len(module.sl.labels)):
        if not partners[a]:
            continue
        for m in range(1, Di + 1):
            v1 = module.apply_site_label(si, module.mode_label(a, m), base)
            if not v1:
                continue
            for b, g in partners[a]:
                v2 = module.apply_site_label(sj, module.mode_label(b, -m), v1)
                _acc(out, v2, g)
    return out


def conformal_weights(module):
    """Per-site lowest eigenvalues of the normalized energy.

    Delta_i = (pairing Gram form of the finite weight part with itself
    plus twice the half-sum) / (2 (k_i + M)), computed from the node
    pairings through the inverse finite Cartan matrix.
    """
    M = module.M
    n = M - 1
    rows = [[Q(2) if l == m else (Q(-1) if abs(l - m) == 1 else ZERO)
             for m in range(n)] for l in range(n)]
    ones = _solve_int_system(rows, [ONE] * n)
    out = []
    for site in range(module.N):
        p = module.data.pairings[site][1:]
        x = _solve_int_system(rows, list(p))
        if x is None or ones is None:
            raise ArithmeticError("finite Cartan solve failed")
        norm = sum((p[l] * Q(x[l]) for l in range(n)), ZERO)
        rho2 = 2 * sum((p[l] * Q(ones[l]) for l in range(n)), ZERO)
        k = module.data.levels[site]
        out.append((norm + rho2) / (2 * (k + M)))
    return out


def casimir_constants(module):
    """Vacuum shifts c_i = k_i dim / (24 (k_i + M)) of the site energies."""
    dim = Q(module.M * module.M - 1)
    return [k * dim / (24 * (k + Q(module.M)))
            for k in module.data.levels]


def gaudin_and_casimir(module):
    """Quadratic Hamiltonians and site Casimir combinations, exact matrices.

    Returns (hams, casimirs).  The energy operator entering the
    Hamiltonians is the cylinder-normalized zero mode of the site
    Sugawara state: on a basis monomial of homogeneous site depth g it
    acts by -(Delta_i + g - c_i), carrying the Casimir vacuum shift c_i.
    The grading operator entering the Casimir combination has no such
    shift, acting by -(Delta_i + g); the combination (k_i + M) grading
    plus the half-sum bilinear is then identically zero, which is a
    genuine check because the bilinear is built independently from mode
    words while Delta_i comes from the weight Gram form.
    """
    M, N = module.M, module.N
    levels = module.data.levels
    pts = module.data.points
    deltas = conformal_weights(module)
    shifts = casimir_constants(module)
    basis = module.basis

    def energy(site, state, shifted):
        g = Q(module.site_depth(state, site))
        val = -(deltas[site] + g)
        return val + shifts[site] if shifted else val

    hams = []
    for i in range(N):
        mat = {col: {} for col in range(module.dim)}
        for j in range(N):
            if j == i:
                continue
            pref = ONE / (pts[i] - pts[j])
            for col, state in enumerate(basis):
                diag = (levels[i] * energy(j, state, True)
                        + levels[j] * energy(i, state, True))
                row = mat[col]
                if diag:
                    row[col] = row.get(col, ZERO) + diag * pref
                cross = _cross_bilinear(module, i, j, {state: ONE}, state)
                for idx, c in module.project(cross).items():
                    row[idx] = row.get(idx, ZERO) + c * pref
        hams.append({col: {idx: c for idx, c in row.items() if c}
                     for col, row in mat.items()})

    casimirs = []
    for i in range(N):
        sug = sugawara_site(module, i)
        mat = {}
        for col, state in enumerate(basis):
            row = dict(sug[col])
            diag = (levels[i] + M) * energy(i, state, False)
            if diag:
                row[col] = row.get(col, ZERO) + diag
            mat[col] = {idx: c for idx, c in row.items() if c}
        casimirs.append(mat)
    return hams, casimirs


# ---------------------------------------------------------------------------
# the straightened quadratic density as Hamiltonians
# ---------------------------------------------------------------------------

def _mat_fun_add(target, mat, fun):
    """target += (Q-matrix) * (function of z), entries rational functions."""
    for col, row in mat.items():
        trow = target.setdefault(col, {})
        for idx, c in row.items():
            g = fun * c
            prev = trow.get(idx)
            trow[idx] = g if prev is None else prev + g


def verify_hamiltonian_decomposition(module):
    """Straightened quadratic density against its partial-fraction form.

    Checks, entry by entry in exact arithmetic, that the grade-zero mode
    of the quadratic density plus M times the first twisted derivative
    of the spread Sugawara state equals the sum of Casimir combinations
    over squared poles plus Hamiltonians over simple poles.
    """
    M, N = module.M, module.N
    pts = module.data.points
    levels = module.data.levels
    twist = module.data.twist
    shifts = casimir_constants(module)

    s10 = fourier_zero(module, 1)

    # spread Sugawara zero mode: sum_i (omega_i)_0 / (z - z_i), where
    # (omega_i)_0 = (half-sum bilinear)/(k_i+M) - c_i
    omega = {}
    for i in range(N):
        pole = BiRatFun.pole_z(pts[i])
        scale = ONE / (levels[i] + M)
        sug = sugawara_site(module, i)
        scaled = {col: {idx: c * scale for idx, c in row.items()}
                  for col, row in sug.items()}
        for col in range(module.dim):
            scaled[col][col] = scaled[col].get(col, ZERO) - shifts[i]
        _mat_fun_add(omega, scaled, pole)

    lhs = {col: dict(row) for col, row in s10.items()}
    for col, row in omega.items():
        trow = lhs.setdefault(col, {})
        for idx, f in row.items():
            g = twisted_derivative(f, 1, M, twist, "z") * Q(M)
            prev = trow.get(idx)
            trow[idx] = g if prev is None else prev + g

    hams, cas = gaudin_and_casimir(module)
    rhs = {}
    for i in range(N):
        _mat_fun_add(rhs, cas[i], BiRatFun.pole_z(pts[i], 2))
        _mat_fun_add(rhs, hams[i], BiRatFun.pole_z(pts[i]))

    checked = 0
    for col in range(module.dim):
        rows = set(lhs.get(col, {})) | set(rhs.get(col, {}))
        for idx in rows:
            f = lhs.get(col, {}).get(idx)
            g = rhs.get(col, {}).get(idx)
            if f is None:
                diff = g
            elif g is None:
                diff = f
            else:
                diff = f - g
            checked += 1
            if not diff.is_zero():
                return {"ok": False, "entries": checked,
                        "col": col, "row": idx}
    return {"ok": True, "entries": checked}


# ---------------------------------------------------------------------------
# principal-degree parts of the cubic density
# ---------------------------------------------------------------------------

def _spread_eta(module, color, vec, derivative=False):
    """The node Cartan field (or its z-derivative) acting on a function-
    valued vector, summed over sites with the matching pole factors."""
    out = {}
    for s in range(module.N):
        pref = (BiRatFun.pole_z(module.data.points[s], 2) * Q(-1)
                if derivative else BiRatFun.pole_z(module.data.points[s]))
        part = module.apply_eta(color % module.M, s, vec)
        for state, c in part.items():
            _acc1(out, state, c * pref)
    return out


def _chevalley_site_label(module, color, lower):
    M = module.M
    color = color % M
    if color == 0:
        return (-1, 0, 0, M - 1) if lower else (1, 0, M - 1, 0)
    return (0, 0, color, color - 1) if lower else (0, 0, color - 1, color)


def _spread_chevalley(module, color, lower, vec):
    out = {}
    lab = _chevalley_site_label(module, color, lower)
    for s in range(module.N):
        pref = BiRatFun.pole_z(module.data.points[s])
        part = module.apply_site_label(s, lab, vec)
        for state, c in part.items():
            _acc1(out, state, c * pref)
    return out


def degree_parts(module, col_state):
    """Displayed degree-0 and degree-1 parts of the cubic density on one
    basis state, as a function-valued vector."""
    M = module.M
    base = {col_state: BiRatFun.const(ONE)}
    out = {}
    for i in range(M):
        # degree 0: -eta_i (eta_{i+1}^2 - eta_{i-1}^2)
        #           + 1/2 eta_i (eta'_{i+1} - eta'_{i-1})
        for sgn, nb in ((Q(-1), i + 1), (ONE, i - 1)):
            w = _spread_eta(module, nb, base)
            w = _spread_eta(module, nb, w)
            w = _spread_eta(module, i, w)
            for state, f in w.items():
                _acc1(out, state, f * sgn)
            w = _spread_eta(module, nb, base, derivative=True)
            w = _spread_eta(module, i, w)
            for state, f in w.items():
                _acc1(out, state, f * (-sgn) * Q(1, 2))
        # degree 1: f_i (eta_{i+1} - eta_{i-1}) e_i
        w = _spread_chevalley(module, i, False, base)
        wp = _spread_eta(module, i + 1, w)
        wm = _spread_eta(module, i - 1, w)
        diff = dict(wp)
        for state, f in wm.items():
            _acc1(diff, state, f * Q(-1))
        w = _spread_chevalley(module, i, True, diff)
        for state, f in w.items():
            _acc1(out, state, f)
    return {s: f for s, f in out.items() if not f.is_zero()}


def verify_degree_parts(module, max_cost=2, normalization=ONE):
    """Cubic density vs its closed degree-0/1 Cartan/raising forms,
    modulo exact second twisted derivatives, on columns of bounded
    principal depth.

    ``normalization`` multiplies the closed forms before comparison.
    With the raw closed forms (normalization 1) the comparison fails on
    nonresonant data; the engine's exact certificates determine the
    self-consistent overall normalization to be 2, which is what the
    eigenvalue measurements confirm independently (see tests).

    Each entry of the difference must be an exact second twisted
    derivative of a rational function with poles at the marked points;
    the certificate is found (or refuted) by an exact linear solve.
    """
    twist = module.data.twist
    M = module.M
    checked = 0
    failures = []
    cols = 0
    for state in module.basis:
        if module.principal_cost(state) > max_cost:
            continue
        cols += 1
        keyed = cubic_action_keyed(module, {state: ONE})
        lhs = finish_keyed(module, keyed)
        rhs = degree_parts(module, state)
        rows = set(lhs) | set(rhs)
        for s2 in rows:
            f = lhs.get(s2)
            g = rhs.get(s2)
            if g is not None and normalization != ONE:
                g = g * normalization
            diff = f if g is None else (g * Q(-1) if f is None else f - g)
            checked += 1
            if diff.is_zero():
                continue
            cert = solve_twisted_exact(diff, 2, M, twist)
            if cert is None:
                failures.append((state, s2))
    return {"ok": not failures, "columns": cols, "entries": checked,
            "failures": failures}


def cartan_value_parts(data):
    """The two cyclic forms in the Cartan coefficient functions whose
    combination gives the highest-weight-line value of the cubic
    grade-zero mode: T3 = Σ uᵢ(u²ᵢ₊₁ − u²ᵢ₋₁) and
    T2 = Σ uᵢ(u'ᵢ₊₁ − u'ᵢ₋₁)."""
    M = data.M
    us = data.u_funcs()
    t3 = BiRatFun.const(ZERO)
    t2 = BiRatFun.const(ZERO)
    for i in range(M):
        up = us[(i + 1) % M]
        um = us[(i - 1) % M]
        t3 = t3 + us[i] * (up * up - um * um)
        t2 = t2 + us[i] * (up.dz() - um.dz())
    return t3, t2


def cubic_vacuum_value(data, depth=None):
    """Highest-weight-line value of the cubic grade-zero mode, as an
    exact rational function of the spectral parameter."""
    module = TruncatedVerma(data, depth=depth if depth else data.M + 1)
    keyed = cubic_action_keyed(module, {module.vacuum: ONE})
    f = finish_keyed(module, keyed).get(module.vacuum)
    return f if f is not None else BiRatFun.const(ZERO)


def vacuum_value_certificate(data, c3, c2):
    """Exact test of  svac = c3·T3 + c2·T2  modulo second twisted
    derivatives, where svac is the highest-weight-line value of the
    cubic grade-zero mode.  Returns True when the identity is exact or
    an exactness certificate exists.  The pair (2, 1) — equivalently
    svac = −2M·v₂ mod exact derivatives — certifies on every
    nonresonant draw; the pair (1, 1/2) does not."""
    t3, t2 = cartan_value_parts(data)
    diff = cubic_vacuum_value(data) - t3 * Q(c3) - t2 * Q(c2)
    if diff.is_zero():
        return True
    return solve_twisted_exact(diff, 2, data.M, data.twist) is not None


# ---------------------------------------------------------------------------
# weight vectors and hypergeometric eigenvalue checks
# ---------------------------------------------------------------------------

def weight_function(module, w, n):
    """One-excitation vector: the lowering generator of color n spread
    over sites with coefficients 1/(w - z_s)."""
    w = Q(w)
    lab = _chevalley_site_label(module, n, True)
    out = {}
    for s in range(module.N):
        state = list(module.vacuum)
        state[s] = (lab,)
        out[tuple(state)] = ONE / (w - module.data.points[s])
    return out


def _integrate_keys(cycle, i, funs, avoid=()):
    """Numeric integrals of a dict of rational functions over the cycle,
    through a shared table of pole-basis integrals."""
    base = {}
    vals = {}
    for key, f in funs.items():
        poles, poly = f.partial_fractions()
        if any(poly):
            raise ArithmeticError("prefactor does not decay at infinity")
        tot = 0.0 + 0.0j
        for (loc, e), c in poles.items():
            bk = (loc, e)
            if bk not in base:
                base[bk] = cycle.integral(
                    BiRatFun.pole_z(loc, e), i, avoid=avoid).value
            tot += _fl(c) * base[bk]
        vals[key] = tot
    return vals


def integrate_fun(cycle, i, f, avoid=()):
    """Numeric integral of one rational function over the twisted cycle."""
    return _integrate_keys(cycle, i, {0: f}, avoid=avoid)[0]


def _default_cycle(data, spec=None, base_lift=0.0, radius_scale=None,
                   ia=0, ib=1):
    if spec is not None:
        return TwistedCycle(data.twist, data.M, spec=spec)
    pts = [complex(_fl(p)) for p in data.points]
    kw = {}
    if base_lift:
        gap = abs(pts[ib] - pts[ia])
        kw["base"] = 0.5 * (pts[ia] + pts[ib]) + 1j * base_lift * gap
    if radius_scale:
        gaps = [abs(p - q) for a, p in enumerate(pts) for q in pts[a + 1:]]
        kw["radius"] = min(gaps) * radius_scale
    return TwistedCycle(data.twist, data.M,
                        spec=ContourSpec.for_points(pts, ia, ib, **kw))


def _nonzero_cycle(data, i, spec=None, **kw):
    """A pair cycle that pairs nontrivially with the exponent-i twist.

    A double loop around a pair of points can be the zero cycle when the
    exponents work out integral; in that case another pair is tried."""
    if spec is not None:
        return _default_cycle(data, spec), False
    first = None
    for ia, ib in itertools.combinations(range(data.N), 2):
        cand = _default_cycle(data, ia=ia, ib=ib, **kw)
        if first is None:
            first = cand
        if not cand.is_zero_cycle(i):
            return cand, False
    return first, True


def eigencheck(data, color=None, w=None, spec=None):
    """Contour integral of the cubic density on a vacuum or one-excitation
    vector against -M times the integral of the cubic connection
    coefficient.

    With ``color`` None the check runs on the highest-weight line and
    the connection is the plain one for ``data``.  Otherwise the vector
    is the one-excitation state at ``w`` (default: the closed-form root
    of the pairing equation for that color) and the connection acquires
    the corresponding first-order pole.  Returns a report with the
    componentwise relative residual; away from the root location the
    residual is expected to be large.
    """
    module = TruncatedVerma(data, depth=3 * data.M - 2)
    if color is None:
        vec = {module.vacuum: ONE}
        conn_data = data
        avoid = ()
        cycle, degenerate = _nonzero_cycle(data, 2, spec)
    else:
        if w is None:
            w = bethe_root(data.points, data.pairings, color)
        w = Q(w)
        conn_data = MiuraData(data.M, data.points, data.levels,
                              data.pairings, roots=((w, color),))
        vec = weight_function(module, w, color)
        avoid = (w,)
        cycle, degenerate = _nonzero_cycle(data, 2, spec,
                                           base_lift=0.4, radius_scale=0.2)
    if degenerate:
        raise ArithmeticError("every pair cycle is numerically zero")

    keyed = cubic_action_keyed(module, vec)
    used = set()
    for row in keyed.values():
        used.update(row)
    tab = module.prefactor_table()
    ints = _integrate_keys(cycle, 2, {k: tab[k] for k in used}, avoid=avoid)

    lhs = {}
    for state, row in keyed.items():
        tot = sum((_fl(c) * ints[k] for k, c in row.items()), 0.0 + 0.0j)
        lhs[state] = tot

    v2 = v_closed(conn_data)[1]
    ival = integrate_fun(cycle, 2, v2, avoid=avoid)
    rhs = {state: -data.M * ival * _fl(c) for state, c in vec.items()}

    scale = max(abs(v) for v in rhs.values())
    if not scale:
        raise ArithmeticError("trivial reference integral")
    dev = 0.0
    off = 0.0
    for state in set(lhs) | set(rhs):
        d = abs(lhs.get(state, 0) - rhs.get(state, 0)) / scale
        dev = max(dev, d)
        if state not in vec:
            off = max(off, d)
    lead = max(vec, key=lambda s: abs(_fl(vec[s])))
    measured = lhs.get(lead, 0.0) / (ival * _fl(vec[lead]))
    return {"residual": dev, "off_target": off, "scale": scale,
            "eigenvalue": -data.M * ival, "measured": measured,
            "reference": ival, "components": len(lhs),
            "w": None if color is None else w}


def linear_density_ratio(data, spec=None):
    """Measured ratio of the quadratic-density integral on the highest-
    weight line to the integral of the linear connection coefficient.

    The proportionality constant for the quadratic density is not pinned
    by the cubic-side argument; this measures it (and the off-line
    components, which should integrate to zero)."""
    module = TruncatedVerma(data, depth=3 * data.M - 2)
    vec = {module.vacuum: ONE}
    keyed = quadratic_action_keyed(module, vec)
    used = set()
    for row in keyed.values():
        used.update(row)
    tab = module.prefactor_table()
    cycle, degenerate = _nonzero_cycle(data, 1, spec)
    if degenerate:
        raise ArithmeticError("every pair cycle is numerically zero")
    ints = _integrate_keys(cycle, 1, {k: tab[k] for k in used})
    lhs = {}
    for state, row in keyed.items():
        lhs[state] = sum((_fl(c) * ints[k] for k, c in row.items()),
                        0.0 + 0.0j)
    v1 = v_closed(data)[0]
    ival = integrate_fun(cycle, 1, v1)
    vac = lhs.pop(module.vacuum)
    off = max((abs(v) for v in lhs.values()), default=0.0)
    return {"ratio": vac / ival, "off_line": off / max(abs(vac), 1e-30),
            "reference": ival}


# ---------------------------------------------------------------------------
# commuting integrals and symmetry generators
# ---------------------------------------------------------------------------

def _integrated_matrix(module, i, keyed_mat, cycle):
    tab = module.prefactor_table()
    used = set()
    for row in keyed_mat.values():
        for pats in row.values():
            used.update(pats)
    ints = _integrate_keys(cycle, i, {k: tab[k] for k in used})
    out = {}
    for col, row in keyed_mat.items():
        orow = {}
        for idx, pats in row.items():
            v = sum((_fl(c) * ints[k] for k, c in pats.items()), 0.0 + 0.0j)
            if v:
                orow[idx] = v
        out[col] = orow
    return out


def _compose(A, B):
    """Sparse product: first apply B, then A (column-keyed maps)."""
    out = {}
    for col, brow in B.items():
        orow = {}
        for mid, cb in brow.items():
            arow = A.get(mid)
            if not arow:
                continue
            for idx, ca in arow.items():
                orow[idx] = orow.get(idx, 0.0 + 0.0j) + ca * cb
        out[col] = orow
    return out


def _max_abs(mat):
    return max((abs(v) for row in mat.values() for v in row.values()),
               default=0.0)


def commuting_integrals_residual(module, spec1=None, spec2=None):
    """Relative size of the commutator of the two density integrals.

    Both integrated matrices are exact truncations (the density modes
    preserve the principal grade), so the commutator residual measures
    only quadrature error.  The two cycles are taken with different
    geometry so no accidental alignment can hide a failure.
    """
    data = module.data
    pts = [complex(_fl(p)) for p in data.points]
    if spec1 is None:
        spec1 = ContourSpec.for_points(pts, 0, 1)
    if spec2 is None:
        gaps = [abs(p - q) for a, p in enumerate(pts) for q in pts[a + 1:]]
        spec2 = ContourSpec.for_points(
            pts, 0, 1, radius=min(gaps) * 0.19,
            base=0.5 * (pts[0] + pts[1]) + 0.3j * abs(pts[1] - pts[0]))
    cyc1 = TwistedCycle(data.twist, data.M, spec=spec1)
    cyc2 = TwistedCycle(data.twist, data.M, spec=spec2)
    A1 = _integrated_matrix(module, 1, fourier_zero_keyed(module, 1), cyc1)
    A2 = _integrated_matrix(module, 2, fourier_zero_keyed(module, 2), cyc2)
    comm = _compose(A1, A2)
    rev = _compose(A2, A1)
    dev = 0.0
    for col in set(comm) | set(rev):
        rows = set(comm.get(col, {})) | set(rev.get(col, {}))
        for idx in rows:
            dev = max(dev, abs(comm.get(col, {}).get(idx, 0)
                               - rev.get(col, {}).get(idx, 0)))
    scale = max(_max_abs(A1) * _max_abs(A2), 1e-30)
    return dev / scale


def loop_generator_matrix(module, lab):
    """Matrix of one loop generator summed over sites, with the list of
    columns on which the truncated action is certified exact."""
    shift = _pg(module.M, lab)
    mat = {}
    safe = []
    for col, state in enumerate(module.basis):
        vec = {}
        for s in range(module.N):
            _acc(vec, module.apply_site_label(s, lab, {state: ONE}), ONE)
        closed = shift >= 0 or module.principal_cost(state) <= module.depth + shift
        if closed:
            mat[col] = module.project(vec)
            safe.append(col)
        else:
            mat[col] = module.project(vec, require_closed=False)
    return mat, safe


def commutator_residual_q(A, B, cols=None):
    """Exact commutator entries of two Q-matrices on selected columns."""
    out = {}
    use = cols if cols is not None else list(A)
    for col in use:
        row = {}
        for mid, cb in B.get(col, {}).items():
            for idx, ca in A.get(mid, {}).items():
                row[idx] = row.get(idx, ZERO) + ca * cb
        for mid, ca in A.get(col, {}).items():
            for idx, cb in B.get(mid, {}).items():
                row[idx] = row.get(idx, ZERO) - ca * cb
        row = {idx: c for idx, c in row.items() if c}
        if row:
            out[col] = row
    return out
