"""Exact rational functions of one or two variables (z and w).

The engine only ever creates denominators that are products of the linear
factors (z - c), (w - c) and (z - w) with c drawn from a fixed set of marked
points, so a rational function is stored as

    BiRatFun(num, den)   with   den = {factor_key: exponent}

where factor_key is ('z', c), ('w', c) or ('zw',).  Cancellation is exact
trial division (a factor divides the numerator iff the numerator vanishes on
its zero locus), which makes the reduced form canonical: two functions are
equal iff their reduced numerators and denominator dicts coincide.

Univariate (w-free) functions additionally support exact partial fraction
decomposition over the pole set, which is the canonical basis used by the
operator-valued function matrices and the exactness solvers.
"""

from .rationals import ONE, Q, ZERO


class BiPoly:
    """Bivariate polynomial over Q, stored sparsely as {(ez, ew): coeff}."""

    __slots__ = ("c",)

    def __init__(self, terms=None):
        self.c = terms if terms is not None else {}

    @classmethod
    def const(cls, q):
        q = Q(q)
        return cls({(0, 0): q} if q else {})

    @classmethod
    def zvar(cls):
        return cls({(1, 0): ONE})

    @classmethod
    def wvar(cls):
        return cls({(0, 1): ONE})

    @classmethod
    def lin_z(cls, c):
        """z - c"""
        c = Q(c)
        t = {(1, 0): ONE}
        if c:
            t[(0, 0)] = -c
        return cls(t)

    @classmethod
    def lin_w(cls, c):
        """w - c"""
        c = Q(c)
        t = {(0, 1): ONE}
        if c:
            t[(0, 0)] = -c
        return cls(t)

    @classmethod
    def lin_zw(cls):
        """z - w"""
        return cls({(1, 0): ONE, (0, 1): -ONE})

    def is_zero(self):
        return not self.c

    def __bool__(self):
        return bool(self.c)

    def __eq__(self, other):
        return isinstance(other, BiPoly) and self.c == other.c

    def __add__(self, other):
        out = dict(self.c)
        for e, v in other.c.items():
            s = out.get(e, ZERO) + v
            if s:
                out[e] = s
            elif e in out:
                del out[e]
        return BiPoly(out)

    def __neg__(self):
        return BiPoly({e: -v for e, v in self.c.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, BiPoly):
            out = {}
            for (a1, b1), v1 in self.c.items():
                for (a2, b2), v2 in other.c.items():
                    e = (a1 + a2, b1 + b2)
                    s = out.get(e, ZERO) + v1 * v2
                    if s:
                        out[e] = s
                    elif e in out:
                        del out[e]
            return BiPoly(out)
        q = Q(other)
        if not q:
            return BiPoly()
        return BiPoly({e: q * v for e, v in self.c.items()})

    __rmul__ = __mul__

    def deg_z(self):
        return max((e[0] for e in self.c), default=-1)

    def deg_w(self):
        return max((e[1] for e in self.c), default=-1)

    def dz(self):
        out = {}
        for (a, b), v in self.c.items():
            if a:
                out[(a - 1, b)] = out.get((a - 1, b), ZERO) + a * v
        return BiPoly({e: v for e, v in out.items() if v})

    def dw(self):
        out = {}
        for (a, b), v in self.c.items():
            if b:
                out[(a, b - 1)] = out.get((a, b - 1), ZERO) + b * v
        return BiPoly({e: v for e, v in out.items() if v})

    def subs_z(self, c):
        """Substitute z = c; returns {ew: coeff}."""
        c = Q(c)
        out = {}
        for (a, b), v in self.c.items():
            s = out.get(b, ZERO) + v * c**a
            if s:
                out[b] = s
            elif b in out:
                del out[b]
        return out

    def subs_w(self, c):
        c = Q(c)
        out = {}
        for (a, b), v in self.c.items():
            s = out.get(a, ZERO) + v * c**b
            if s:
                out[a] = s
            elif a in out:
                del out[a]
        return out

    def subs_z_eq_w(self):
        """Substitute z = w; returns {e: coeff} in the single remaining variable."""
        out = {}
        for (a, b), v in self.c.items():
            e = a + b
            s = out.get(e, ZERO) + v
            if s:
                out[e] = s
            elif e in out:
                del out[e]
        return out

    def _zmajor(self):
        out = {}
        for (a, b), v in self.c.items():
            out.setdefault(a, {})[b] = v
        return out

    def div_lin(self, key):
        """Exact division by the linear factor `key`; returns quotient or None.

        key is ('z', c), ('w', c) or ('zw',).  None means the factor does not
        divide this polynomial.
        """
        if not self.c:
            return BiPoly()
        if key[0] == "z":
            if any(self.subs_z(key[1]).values()):
                return None
            c = key[1]
            out = {}
            # synthetic division in z, w-degree by w-degree
            zmaj = self._zmajor()
            degs = sorted(zmaj, reverse=True)
            carry = {}
            maxd = degs[0]
            for a in range(maxd, 0, -1):
                row = dict(zmaj.get(a, {}))
                for b, v in carry.items():
                    row[b] = row.get(b, ZERO) + v
                for b, v in row.items():
                    if v:
                        out[(a - 1, b)] = v
                carry = {b: c * v for b, v in row.items() if v}
            return BiPoly(out)
        if key[0] == "w":
            if any(self.subs_w(key[1]).values()):
                return None
            # reuse the z-routine by swapping variables
            swapped = BiPoly({(b, a): v for (a, b), v in self.c.items()})
            qt = swapped.div_lin(("z", key[1]))
            return BiPoly({(b, a): v for (a, b), v in qt.c.items()})
        # key == ('zw',): divide by (z - w)
        if any(self.subs_z_eq_w().values()):
            return None
        zmaj = self._zmajor()
        maxd = max(zmaj)
        out = {}
        carry = {}
        for a in range(maxd, 0, -1):
            row = dict(zmaj.get(a, {}))
            for b, v in carry.items():
                row[b] = row.get(b, ZERO) + v
            for b, v in row.items():
                if v:
                    out[(a - 1, b)] = v
            carry = {b + 1: v for b, v in row.items() if v}
        return BiPoly(out)

    def eval_q(self, zv, wv=None):
        zv = Q(zv)
        wv = Q(0) if wv is None else Q(wv)
        total = ZERO
        for (a, b), v in self.c.items():
            total += v * zv**a * wv**b
        return total

    def eval_c(self, zv, wv=0.0):
        total = 0j
        for (a, b), v in self.c.items():
            total += (v.numerator / v.denominator) * zv**a * wv**b
        return total

    def __repr__(self):
        if not self.c:
            return "0"
        bits = []
        for (a, b), v in sorted(self.c.items()):
            m = ""
            if a:
                m += "z^%d" % a if a > 1 else "z"
            if b:
                m += "w^%d" % b if b > 1 else "w"
            bits.append(("%s" % v) + ("*" + m if m else ""))
        return " + ".join(bits)


def _factor_poly(key):
    if key[0] == "z":
        return BiPoly.lin_z(key[1])
    if key[0] == "w":
        return BiPoly.lin_w(key[1])
    return BiPoly.lin_zw()


class BiRatFun:
    """Reduced rational function num / prod(factor^e) with linear factors."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=None, reduce=True):
        self.num = num
        self.den = dict(den) if den else {}
        if reduce:
            self._reduce()

    def _reduce(self):
        if not self.num.c:
            self.den = {}
            return
        for key in list(self.den):
            e = self.den[key]
            while e > 0:
                qt = self.num.div_lin(key)
                if qt is None:
                    break
                self.num = qt
                e -= 1
            if e:
                self.den[key] = e
            else:
                del self.den[key]

    # --- constructors -------------------------------------------------
    @classmethod
    def const(cls, q):
        return cls(BiPoly.const(q), None, reduce=False)

    @classmethod
    def zvar(cls):
        return cls(BiPoly.zvar(), None, reduce=False)

    @classmethod
    def wvar(cls):
        return cls(BiPoly.wvar(), None, reduce=False)

    @classmethod
    def pole_z(cls, c, e=1):
        return cls(BiPoly.const(1), {("z", Q(c)): e}, reduce=False)

    @classmethod
    def pole_w(cls, c, e=1):
        return cls(BiPoly.const(1), {("w", Q(c)): e}, reduce=False)

    @classmethod
    def pole_zw(cls, e=1):
        return cls(BiPoly.const(1), {("zw",): e}, reduce=False)

    # --- predicates ---------------------------------------------------
    def is_zero(self):
        return not self.num.c

    def __bool__(self):
        return bool(self.num.c)

    def __eq__(self, other):
        if isinstance(other, BiRatFun):
            return self.num == other.num and self.den == other.den
        if other == 0:
            return self.is_zero()
        return NotImplemented

    def regular_on_diagonal(self):
        return ("zw",) not in self.den

    def is_w_free(self):
        return all(e[1] == 0 for e in self.num.c) and all(
            k[0] == "z" for k in self.den)

    # --- arithmetic ---------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, BiRatFun):
            other = BiRatFun.const(other)
        if not other.num.c:
            return self
        if not self.num.c:
            return other
        den = dict(self.den)
        for k, e in other.den.items():
            den[k] = max(den.get(k, 0), e)
        n1 = self.num
        for k, e in den.items():
            extra = e - self.den.get(k, 0)
            if extra:
                f = _factor_poly(k)
                for _ in range(extra):
                    n1 = n1 * f
        n2 = other.num
        for k, e in den.items():
            extra = e - other.den.get(k, 0)
            if extra:
                f = _factor_poly(k)
                for _ in range(extra):
                    n2 = n2 * f
        return BiRatFun(n1 + n2, den)

    __radd__ = __add__

    def __neg__(self):
        return BiRatFun(-self.num, self.den, reduce=False)

    def __sub__(self, other):
        if not isinstance(other, BiRatFun):
            other = BiRatFun.const(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, BiRatFun):
            q = Q(other)
            if not q:
                return BiRatFun.const(0)
            return BiRatFun(self.num * q, self.den, reduce=False)
        if not self.num.c or not other.num.c:
            return BiRatFun.const(0)
        den = dict(self.den)
        for k, e in other.den.items():
            den[k] = den.get(k, 0) + e
        return BiRatFun(self.num * other.num, den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, BiRatFun):
            return self * other.reciprocal()
        return self * (ONE / Q(other))

    def __pow__(self, n):
        out = BiRatFun.const(1)
        for _ in range(n):
            out = out * self
        return out

    def reciprocal(self):
        """Invert; requires the numerator to be a scalar multiple of a product
        of the supported linear factors (found by trial division)."""
        if not self.num.c:
            raise ZeroDivisionError("reciprocal of zero function")
        num = BiPoly.const(1)
        for k, e in self.den.items():
            f = _factor_poly(k)
            for _ in range(e):
                num = num * f
        den = {}
        rem = self.num
        # peel linear factors off the old numerator by trial division
        progress = True
        while progress and (rem.deg_z() > 0 or rem.deg_w() > 0):
            progress = False
            for key in self._candidate_factors(rem):
                qt = rem.div_lin(key)
                if qt is not None:
                    den[key] = den.get(key, 0) + 1
                    rem = qt
                    progress = True
                    break
        if rem.deg_z() > 0 or rem.deg_w() > 0:
            raise ArithmeticError("numerator does not factor into linear pieces: %r" % rem)
        scalar = rem.c.get((0, 0), ZERO)
        return BiRatFun(num * (ONE / scalar), den)

    @staticmethod
    def _candidate_factors(poly):
        """Rational candidate roots for peeling z- and w-linear factors."""
        keys = []
        if poly.deg_w() == 0:
            # univariate in z: rational root candidates p/q
            lead = poly.c.get((poly.deg_z(), 0))
            const = poly.c.get((0, 0), ZERO)
            if const == 0:
                keys.append(("z", Q(0)))
            else:
                for p in _divisors(const.numerator * lead.denominator):
                    for q in _divisors(lead.numerator * const.denominator):
                        keys.append(("z", Q(p, q)))
                        keys.append(("z", -Q(p, q)))
        elif poly.deg_z() == 0:
            lead = poly.c.get((0, poly.deg_w()))
            const = poly.c.get((0, 0), ZERO)
            if const == 0:
                keys.append(("w", Q(0)))
            else:
                for p in _divisors(const.numerator * lead.denominator):
                    for q in _divisors(lead.numerator * const.denominator):
                        keys.append(("w", Q(p, q)))
                        keys.append(("w", -Q(p, q)))
        else:
            keys.append(("zw",))
        return keys

    # --- calculus -----------------------------------------------------
    def _deriv(self, var):
        dnum = self.num.dz() if var == "z" else self.num.dw()
        out = BiRatFun(dnum, self.den)
        for k, e in self.den.items():
            if k[0] == "z":
                df = ONE if var == "z" else ZERO
            elif k[0] == "w":
                df = ONE if var == "w" else ZERO
            else:
                df = ONE if var == "z" else -ONE
            if df:
                den2 = dict(self.den)
                den2[k] = e + 1
                out = out + BiRatFun(self.num * (-df * Q(e)), den2)
        return out

    def dz(self):
        return self._deriv("z")

    def dw(self):
        return self._deriv("w")

    # --- substitution and evaluation ----------------------------------
    def sub_w_eq_z(self):
        """Set w = z; fails if a (z-w) pole survives reduction."""
        if ("zw",) in self.den:
            raise ZeroDivisionError("pole on the diagonal z = w")
        nc = {}
        for (a, b), v in self.num.c.items():
            e = (a + b, 0)
            nc[e] = nc.get(e, ZERO) + v
        num = BiPoly({e: v for e, v in nc.items() if v})
        den = {}
        for k, e in self.den.items():
            nk = ("z", k[1])
            den[nk] = den.get(nk, 0) + e
        return BiRatFun(num, den)

    def swap_vars(self):
        """Exchange z and w."""
        num = BiPoly({(b, a): v for (a, b), v in self.num.c.items()})
        den = {}
        for k, e in self.den.items():
            if k[0] == "z":
                den[("w", k[1])] = e
            elif k[0] == "w":
                den[("z", k[1])] = e
            else:
                den[("zw",)] = e
        f = BiRatFun(num, den, reduce=False)
        if ("zw",) in den and den[("zw",)] % 2:
            return -f
        # (w - z)^e = (-1)^e (z - w)^e ; sign handled above for odd e
        return f

    def eval_q(self, zv, wv=None):
        top = self.num.eval_q(zv, wv)
        bot = ONE
        zv = Q(zv)
        wvq = Q(0) if wv is None else Q(wv)
        for k, e in self.den.items():
            if k[0] == "z":
                base = zv - k[1]
            elif k[0] == "w":
                base = wvq - k[1]
            else:
                base = zv - wvq
            bot *= base**e
        return top / bot

    def eval_c(self, zv, wv=0.0):
        top = self.num.eval_c(zv, wv)
        bot = 1.0 + 0j
        for k, e in self.den.items():
            if k[0] == "z":
                base = zv - (k[1].numerator / k[1].denominator)
            elif k[0] == "w":
                base = wv - (k[1].numerator / k[1].denominator)
            else:
                base = zv - wv
            bot *= base**e
        return top / bot

    # --- univariate partial fractions ---------------------------------
    def partial_fractions(self):
        """Decompose a w-free function as sum of c/(z-a)^e plus a polynomial.

        Returns (poles, poly) with poles = {(a, e): coeff} and poly a list of
        coefficients [c0, c1, ...] for c0 + c1 z + ....  Exact.
        """
        if not self.is_w_free():
            raise ValueError("partial fractions requires a w-free function")
        num = [ZERO] * (self.num.deg_z() + 1) if self.num.c else []
        for (a, _), v in self.num.c.items():
            num[a] = v
        roots = {k[1]: e for k, e in self.den.items()}
        if not roots:
            return {}, num
        den = [ONE]
        for a, e in roots.items():
            for _ in range(e):
                den = _poly_mul(den, [-a, ONE])
        quot, rem = _poly_divmod(num, den)
        while quot and not quot[-1]:
            quot.pop()
        poles = {}
        for a, e in roots.items():
            shifted = _taylor_shift(rem, a)
            other = [ONE]
            for a2, e2 in roots.items():
                if a2 == a:
                    continue
                base = [a - a2, ONE]
                for _ in range(e2):
                    other = _poly_mul(other, base)
            inv = _series_inv(other, e)
            loc = _series_mul(shifted, inv, e)
            for j in range(min(e, len(loc))):
                if loc[j]:
                    poles[(a, e - j)] = loc[j]
        return poles, quot

    @classmethod
    def from_partial_fractions(cls, poles, poly):
        out = cls.const(0)
        for (a, e), c in poles.items():
            out = out + cls.pole_z(a, e) * c
        z = cls.zvar()
        for j, c in enumerate(poly):
            if c:
                out = out + z**j * c
        return out

    def __repr__(self):
        if not self.den:
            return "(%r)" % self.num
        bits = []
        for k, e in sorted(self.den.items(), key=str):
            if k[0] == "z":
                b = "(z-%s)" % k[1]
            elif k[0] == "w":
                b = "(w-%s)" % k[1]
            else:
                b = "(z-w)"
            bits.append(b + ("^%d" % e if e > 1 else ""))
        return "(%r)/[%s]" % (self.num, "".join(bits))


# --- univariate coefficient-list helpers -------------------------------

def _divisors(n):
    n = abs(int(n))
    if n == 0:
        return [1]
    out = []
    d = 1
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            if d != n // d:
                out.append(n // d)
        d += 1
    return out


def _poly_mul(a, b):
    if not a or not b:
        return []
    out = [ZERO] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if not x:
            continue
        for j, y in enumerate(b):
            if y:
                out[i + j] += x * y
    while out and not out[-1]:
        out.pop()
    return out


def _poly_divmod(num, den):
    num = list(num)
    while num and not num[-1]:
        num.pop()
    dn = len(den) - 1
    lead = den[-1]
    quot = [ZERO] * max(0, len(num) - dn)
    while len(num) - 1 >= dn and num:
        c = num[-1] / lead
        k = len(num) - 1 - dn
        quot[k] = c
        for i in range(dn + 1):
            num[k + i] -= c * den[i]
        while num and not num[-1]:
            num.pop()
    return quot, num


def _taylor_shift(coeffs, c):
    """p(z) -> coefficients of p(c + t) in t, via binomial expansion."""
    n = len(coeffs)
    out = [ZERO] * n
    binom = [ONE]
    powc = [ONE]
    for k in range(1, n):
        powc.append(powc[-1] * c)
    for a in range(n):
        v = coeffs[a]
        if not v:
            continue
        b = ONE
        for j in range(a + 1):
            # coefficient of t^j in (c+t)^a is C(a,j) c^(a-j)
            out[j] += v * b * powc[a - j]
            b = b * (a - j) / (j + 1)
    return out


def _series_inv(coeffs, order):
    """1/p mod t^order for p with nonzero constant term."""
    a0 = coeffs[0]
    inv = [ONE / a0]
    for n in range(1, order):
        s = ZERO
        for j in range(1, min(n, len(coeffs) - 1) + 1):
            s += coeffs[j] * inv[n - j]
        inv.append(-s / a0)
    return inv


def _series_mul(a, b, order):
    out = [ZERO] * order
    for i, x in enumerate(a[:order]):
        if not x:
            continue
        for j, y in enumerate(b[: order - i]):
            if y:
                out[i + j] += x * y
    return out


# --- twist data --------------------------------------------------------

class TwistData:
    """Marked points z_i with levels k_i; the twist is phi(x) = sum k_i/(x-z_i)."""

    def __init__(self, points, levels):
        assert len(points) == len(levels)
        self.points = tuple(Q(p) for p in points)
        self.levels = tuple(Q(k) for k in levels)

    def phi(self, var="z"):
        pole = BiRatFun.pole_z if var == "z" else BiRatFun.pole_w
        out = BiRatFun.const(0)
        for p, k in zip(self.points, self.levels):
            out = out + pole(p) * k
        return out

    def phi_prime(self, var="z"):
        return self.phi(var).dz() if var == "z" else self.phi(var).dw()


def twisted_derivative(f, i, M, twist, var="z"):
    """D^i f = d f - (i/M) phi f in the variable `var`."""
    d = f.dz() if var == "z" else f.dw()
    return d - twist.phi(var) * f * Q(i, M)


def _solve_rat_system(rows, rhs):
    """Exact Gaussian solve of a rational linear system; None if inconsistent."""
    a = [[Q(v) for v in row] for row in rows]
    b = [Q(v) for v in rhs]
    nr = len(a)
    nc = len(a[0]) if nr else 0
    piv_cols = []
    r = 0
    for c in range(nc):
        p = next((i for i in range(r, nr) if a[i][c]), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        b[r], b[p] = b[p], b[r]
        inv = ONE / a[r][c]
        a[r] = [v * inv for v in a[r]]
        b[r] = b[r] * inv
        for i in range(nr):
            if i != r and a[i][c]:
                f = a[i][c]
                a[i] = [v - f * w for v, w in zip(a[i], a[r])]
                b[i] = b[i] - f * b[r]
        piv_cols.append(c)
        r += 1
        if r == nr:
            break
    for i in range(r, nr):
        if b[i]:
            return None
    x = [ZERO] * nc
    for i, c in enumerate(piv_cols):
        x[c] = b[i]
    return x


def solve_twisted_exact(f, deg, M, twist, extra_poles=(), max_order=None,
                        poly_degree=None):
    """Find rational g with D^deg g = g' - (deg/M) phi g = f, or None.

    The ansatz for g has poles at the twist points and at ``extra_poles``
    up to ``max_order`` each, plus a polynomial part.  All coefficients are
    found by an exact linear solve in partial-fraction coordinates, so a
    returned g satisfies the equation identically; None certifies that no
    rational g of the allowed shape exists.
    """
    fpoles, fpoly = f.partial_fractions()
    if max_order is None:
        max_order = max([e for (_, e) in fpoles] + [2]) + deg + 1
    if poly_degree is None:
        poly_degree = max(len(fpoly) + 1, 2)
    locs = list(dict.fromkeys(list(twist.points)
                              + [Q(p) for p in extra_poles]
                              + [a for (a, _) in fpoles]))
    basis = [BiRatFun.pole_z(a, e) for a in locs
             for e in range(1, max_order + 1)]
    basis.extend(BiRatFun.zvar() ** d if d else BiRatFun.const(ONE)
                 for d in range(poly_degree + 1))
    images = [twisted_derivative(g, deg, M, twist, "z") for g in basis]
    keys = set(fpoles)
    plen = len(fpoly)
    img_pf = []
    for im in images:
        poles, poly = im.partial_fractions()
        keys.update(poles)
        plen = max(plen, len(poly))
        img_pf.append((poles, poly))
    keys = sorted(keys, key=str)
    rows = []
    rhs = []
    for k in keys:
        rows.append([pf[0].get(k, ZERO) for pf in img_pf])
        rhs.append(fpoles.get(k, ZERO))
    for j in range(plen):
        rows.append([pf[1][j] if j < len(pf[1]) else ZERO for pf in img_pf])
        rhs.append(fpoly[j] if j < len(fpoly) else ZERO)
    sol = _solve_rat_system(rows, rhs)
    if sol is None:
        return None
    g = BiRatFun.const(ZERO)
    for c, b in zip(sol, basis):
        if c:
            g = g + b * c
    return g
