"""PBW states over N sites of the affine algebra and their n-th products.

A state lives in the N-fold vacuum module at levels (k_1, ..., k_N).  It is a
dict mapping PBW monomials to coefficients.  A monomial is a tuple of factors
(site, mode, basis_index) with mode <= -1, sorted ascending; the empty tuple
is the vacuum.  Coefficients may be exact rationals, level-polynomials
(`LPoly`), rational functions (`BiRatFun`) or plain ints -- anything closed
under +, * and scalar multiplication with a truthiness zero-test.

Commutation relations, straightened here with full memoization:

    [a_m, b_n] = [a,b]_{m+n} - n delta_{m+n,0} (a|b) k     (same site)

and operators on different sites commute.  The translation operator T acts by
a_m -> -m a_{m-1} factorwise and kills the vacuum; `is_translate` solves
T(Z) = v exactly (content-by-content block triangular solve) and is the
workhorse behind the regularity-mod-translates checks.

The n-th products are computed by the standard iterate expansion: writing a
monomial as a_{-k} C,

  (a_{-k} C)_(n) B  =  sum_{m<=-1} (-1)^{k-1} C(m,k-1) a_{m-k+1} [C_(n-m-1) B]
                     + sum_{m>=k-1} (-1)^{k-1} C(m,k-1) C_(n-m-1) [a_{m-k+1} B]

with C(m,k-1) the (generalized) binomial coefficient, truncated by weight
bounds on both sides; the vacuum satisfies |0>_(n) B = delta_{n,-1} B.
"""

import math

from .rationals import ONE, Q

# --- small helpers -----------------------------------------------------


def _accum(d, key, val):
    cur = d.get(key)
    if cur is None:
        d[key] = val
    else:
        s = cur + val
        if s:
            d[key] = s
        else:
            del d[key]


def gbinom(m, r):
    """binomial(m, r) for any integer m and r >= 0."""
    if r == 0:
        return 1
    if m >= 0:
        return math.comb(m, r)
    return (-1) ** (r % 2) * math.comb(-m + r - 1, r)


def mono_wt(mono):
    return -sum(f[1] for f in mono)


def state_wt_split(state):
    """Split a state into weight-homogeneous pieces {wt: state}."""
    out = {}
    for mono, c in state.items():
        out.setdefault(mono_wt(mono), {})[mono] = c
    return out


def sadd(dst, src, scale=1):
    """dst += scale * src (in place)."""
    if scale == 1:
        for mono, c in src.items():
            _accum(dst, mono, c)
    else:
        for mono, c in src.items():
            _accum(dst, mono, scale * c)
    return dst


def sscale(state, scale):
    return {m: scale * c for m, c in state.items()}


def ssub(a, b):
    out = dict(a)
    return sadd(out, b, -1)


def is_zero_state(state):
    return all(not c for c in state.values())


def state_eq(a, b):
    return is_zero_state(ssub(a, b))


class VertexContext:
    """Straightening, translation and n-th products at fixed basis and levels.

    `levels` is a sequence of ring elements (one per site); it enters only
    through the central terms of the commutation relations, so using `LPoly`
    generators here yields products valid for all levels at once.
    """

    def __init__(self, basis, levels):
        self.basis = basis
        self.levels = list(levels)
        self.n_sites = len(self.levels)
        self._act_cache = {}
        self._np_cache = {}

    def clear_caches(self):
        self._act_cache.clear()
        self._np_cache.clear()

    # --- operator action ------------------------------------------------
    def _act(self, site, a, m, mono):
        """Apply a^{(site)}_m to a canonical monomial; returns {mono: coeff}."""
        key = (site, a, m, mono)
        hit = self._act_cache.get(key)
        if hit is not None:
            return hit
        if not mono:
            res = {((site, m, a),): 1} if m <= -1 else {}
        else:
            first = mono[0]
            s1, m1, a1 = first
            if m <= -1 and (site, m, a) <= first:
                res = {((site, m, a),) + mono: 1}
            else:
                tail = mono[1:]
                res = {}
                for mono2, c2 in self._act(site, a, m, tail).items():
                    for mono3, c3 in self._act(s1, a1, m1, mono2).items():
                        _accum(res, mono3, c2 * c3)
                if s1 == site:
                    for cb, cc in self.basis.comm_pair(a, a1):
                        for mono3, c3 in self._act(site, cb, m + m1, tail).items():
                            _accum(res, mono3, cc * c3)
                    if m + m1 == 0:
                        g = self.basis.pairing(a, a1)
                        if g:
                            _accum(res, tail, (m * g) * self.levels[site])
        self._act_cache[key] = res
        return res

    def act(self, site, a, m, state, scale=1):
        out = {}
        for mono, c in state.items():
            cs = c if scale == 1 else scale * c
            for mono2, c2 in self._act(site, a, m, mono).items():
                _accum(out, mono2, cs * c2)
        return out

    def act_word(self, word, state):
        """Apply a product of operators (site, mode, basis), rightmost first."""
        for site, m, a in reversed(word):
            state = self.act(site, a, m, state)
        return state

    def vacuum(self):
        return {(): ONE}

    def mono_state(self, word, coeff=ONE):
        """Build coeff * (word applied to the vacuum), straightened."""
        return sscale(self.act_word(word, self.vacuum()), coeff)

    def diag_act(self, expansion, m, state, scale=1):
        """Apply sum_sites x^{(s)}_m for x = sum expansion[a] X_a."""
        out = {}
        for s in range(self.n_sites):
            for a, ca in expansion.items():
                sadd(out, self.act(s, a, m, state), ca * scale)
        return out

    # --- translation ----------------------------------------------------
    def translate(self, state):
        """T(state): a_m -> -m a_{m-1} factorwise; T|0> = 0."""
        out = {}
        for mono, c in state.items():
            for i, (s, m, a) in enumerate(mono):
                shifted = (s, m - 1, a)
                cc = c * (-m)
                if i == 0 or mono[i - 1] <= shifted:
                    _accum(out, mono[:i] + (shifted,) + mono[i + 1:], cc)
                else:
                    cur = {(shifted,) + mono[i + 1:]: 1}
                    for j in range(i - 1, -1, -1):
                        sj, mj, aj = mono[j]
                        nxt = {}
                        for mono2, c2 in cur.items():
                            for mono3, c3 in self._act(sj, aj, mj, mono2).items():
                                _accum(nxt, mono3, c2 * c3)
                        cur = nxt
                    sadd(out, cur, cc)
        return {m2: c2 for m2, c2 in out.items() if c2}

    # --- n-th products ---------------------------------------------------
    def _mono_np(self, monoA, n, monoB):
        key = (monoA, n, monoB)
        hit = self._np_cache.get(key)
        if hit is not None:
            return hit
        if not monoA:
            res = {monoB: 1} if n == -1 else {}
        else:
            s, mneg, a = monoA[0]
            k = -mneg
            C = monoA[1:]
            wtB = mono_wt(monoB)
            wtC = mono_wt(C)
            sign = -1 if (k - 1) % 2 else 1
            res = {}
            for m in range(n - wtB - wtC, 0):
                bv = gbinom(m, k - 1)
                if not bv:
                    continue
                inner = self._mono_np(C, n - m - 1, monoB)
                if not inner:
                    continue
                coeff = sign * bv
                for mono2, c2 in inner.items():
                    for mono3, c3 in self._act(s, a, m - k + 1, mono2).items():
                        _accum(res, mono3, (coeff * c2) * c3)
            for m in range(k - 1, k + wtB):
                bv = gbinom(m, k - 1)
                if not bv:
                    continue
                aB = self._act(s, a, m - k + 1, monoB)
                if not aB:
                    continue
                coeff = sign * bv
                p = n - m - 1
                for monoB2, c2 in aB.items():
                    for mono2, c3 in self._mono_np(C, p, monoB2).items():
                        _accum(res, mono2, (coeff * c2) * c3)
        self._np_cache[key] = res
        return res

    def nth_product(self, A, n, B):
        """The n-th product  A_(n) B  of two states."""
        out = {}
        for monoB, cB in B.items():
            if not cB:
                continue
            for monoA, cA in A.items():
                if not cA:
                    continue
                res = self._mono_np(monoA, n, monoB)
                if res:
                    c = cA * cB
                    for mono, c2 in res.items():
                        _accum(out, mono, c * c2)
        return {m: c for m, c in out.items() if c}

    # --- solving T(Z) = v ------------------------------------------------
    def _content(self, mono):
        return tuple(sorted((s, a) for s, m, a in mono))

    def _monos_with_content(self, content, wt):
        """All canonical monomials with the given (site, basis) multiset and
        total weight, modes <= -1."""
        r = len(content)
        out = set()

        def rec(i, remaining, acc):
            if i == r:
                if remaining == 0:
                    out.add(tuple(sorted(acc)))
                return
            left = r - i - 1
            for d in range(1, remaining - left + 1):
                s, a = content[i]
                rec(i + 1, remaining - d, acc + [(s, -d, a)])

        rec(0, wt, [])
        return sorted(out)

    def is_translate(self, state):
        """Solve T(Z) = state exactly; returns Z, or None if no solution.

        Well defined up to multiples of the vacuum (which T kills); the
        returned Z has no vacuum component.  Always verified by applying T.
        """
        residual = {m: c for m, c in state.items() if c}
        solution = {}
        # peel off (weight, content) classes, longest monomials first; the
        # image of a class under T meets shorter classes only, so this is a
        # block-triangular solve
        while True:
            residual = {m: c for m, c in residual.items() if c}
            if not residual:
                break
            if any(len(m) == 0 for m in residual):
                return None  # vacuum is not a translate
            # choose a (wt, content) class of maximal length
            best = max(residual, key=lambda m: (len(m), mono_wt(m)))
            wt, content = mono_wt(best), self._content(best)
            rows = [m for m in residual
                    if mono_wt(m) == wt and self._content(m) == content]
            cols = self._monos_with_content(content, wt - 1)
            if not cols:
                return None
            images = []
            row_index = {}
            for zmono in cols:
                img = self.translate({zmono: 1})
                keep = {}
                for m2, c2 in img.items():
                    if len(m2) == len(zmono) and self._content(m2) == content:
                        keep[m2] = c2
                        if m2 not in row_index:
                            row_index[m2] = len(row_index)
                images.append(keep)
            for m in rows:
                if m not in row_index:
                    row_index[m] = len(row_index)
            nr, nc = len(row_index), len(cols)
            A = [[0] * nc for _ in range(nr)]
            for j, img in enumerate(images):
                for m2, c2 in img.items():
                    A[row_index[m2]][j] = c2
            b = [None] * nr
            for m2, idx in row_index.items():
                b[idx] = residual.get(m2, 0)
            sol = _solve_int_system(A, b)
            if sol is None:
                return None
            zpart = {}
            for j, x in enumerate(sol):
                if x:
                    _accum(zpart, cols[j], x)
            if not zpart:
                return None
            sadd(solution, zpart)
            sadd(residual, self.translate(zpart), -1)
        # final defense: exact recheck
        if not state_eq(self.translate(solution), state):
            return None
        return solution


def _solve_int_system(A, b):
    """Solve A x = b with integer matrix A and ring-valued right side.

    Returns a solution list (ring-valued) or None if inconsistent.  Uses
    fraction-free style Gaussian elimination with exact rational pivots; the
    right side only ever undergoes +, - and scalar multiplication.
    """
    nr = len(A)
    nc = len(A[0]) if nr else 0
    M = [[Q(v) for v in row] for row in A]
    rhs = list(b)
    piv_cols = []
    r = 0
    for c in range(nc):
        p = next((i for i in range(r, nr) if M[i][c]), None)
        if p is None:
            continue
        M[r], M[p] = M[p], M[r]
        rhs[r], rhs[p] = rhs[p], rhs[r]
        inv = ONE / M[r][c]
        M[r] = [v * inv for v in M[r]]
        rhs[r] = inv * rhs[r]
        for i in range(nr):
            if i != r and M[i][c]:
                f = M[i][c]
                M[i] = [v - f * w for v, w in zip(M[i], M[r])]
                rhs[i] = rhs[i] + (-f) * rhs[r]
        piv_cols.append(c)
        r += 1
        if r == nr:
            break
    for i in range(r, nr):
        if rhs[i]:
            return None
    x = [0] * nc
    for i, c in enumerate(piv_cols):
        x[c] = rhs[i]
    return x
