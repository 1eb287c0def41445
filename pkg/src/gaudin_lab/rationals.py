"""Exact scalar arithmetic: rational numbers and small polynomials in the levels.

All exact computations in this package run over gmpy2's rational type ``mpq``
(aliased ``Q`` here), which is hash- and equality-compatible with
``fractions.Fraction`` but several times faster.  ``LPoly`` is a tiny sparse
polynomial ring in N commuting generators ("levels" k_1..k_N) used so that
expensive vertex-algebra products can be computed once with symbolic levels and
then evaluated at many random numeric levels.
"""

import random

try:
    from gmpy2 import mpq as Q
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    from fractions import Fraction as Q

ZERO = Q(0)
ONE = Q(1)


def qstr(q):
    """Serialize a rational as the string "num/den" (den always present)."""
    q = Q(q)
    return "%s/%s" % (q.numerator, q.denominator)


def qparse(s):
    """Parse a rational from "num/den", "num", int, or float-free str."""
    if isinstance(s, str):
        if "/" in s:
            num, den = s.split("/")
            return Q(int(num), int(den))
        return Q(int(s))
    if isinstance(s, int):
        return Q(s)
    raise TypeError("cannot parse rational from %r" % (s,))


def rand_q(rng, num_max=12, den_max=8, nonzero=False):
    """Draw a bounded random rational, optionally nonzero."""
    while True:
        q = Q(rng.randint(-num_max, num_max), rng.randint(1, den_max))
        if q or not nonzero:
            return q


def rand_distinct_qs(rng, count, num_max=12, den_max=8):
    """Draw `count` pairwise distinct rationals."""
    out = []
    while len(out) < count:
        q = rand_q(rng, num_max, den_max)
        if q not in out:
            out.append(q)
    return out


def rand_levels(rng, count, forbid=()):
    """Draw `count` nonzero rational levels avoiding the predicates in `forbid`.

    Each entry of `forbid` is a callable taking the candidate tuple of levels
    and returning True if the tuple must be rejected (used to dodge
    denominators like k_i + M or k_1 + k_2 - M vanishing).
    """
    while True:
        ks = tuple(rand_q(rng, nonzero=True) for _ in range(count))
        if not any(f(ks) for f in forbid):
            return ks


def seeded_rng(seed):
    return random.Random(seed)


class LPoly:
    """Sparse polynomial in n_gens commuting generators with rational coefficients.

    Terms are stored as {exponent_tuple: Q}.  Only tiny polynomials occur
    (total degree <= 2 in practice), so plain dict arithmetic is fine.
    """

    __slots__ = ("n", "terms")

    def __init__(self, n_gens, terms=None):
        self.n = n_gens
        self.terms = {} if terms is None else terms

    @classmethod
    def const(cls, c, n_gens):
        c = Q(c)
        return cls(n_gens, {(0,) * n_gens: c} if c else {})

    @classmethod
    def gen(cls, i, n_gens):
        e = [0] * n_gens
        e[i] = 1
        return cls(n_gens, {tuple(e): ONE})

    def copy(self):
        return LPoly(self.n, dict(self.terms))

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if isinstance(other, LPoly):
            return self.n == other.n and self.terms == other.terms
        if other == 0:
            return not self.terms
        return NotImplemented

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def __add__(self, other):
        if not isinstance(other, LPoly):
            other = LPoly.const(other, self.n)
        out = dict(self.terms)
        for e, c in other.terms.items():
            c2 = out.get(e, ZERO) + c
            if c2:
                out[e] = c2
            elif e in out:
                del out[e]
        return LPoly(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return LPoly(self.n, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, LPoly) else LPoly.const(-Q(other), self.n))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, LPoly):
            out = {}
            for e1, c1 in self.terms.items():
                for e2, c2 in other.terms.items():
                    e = tuple(a + b for a, b in zip(e1, e2))
                    c = out.get(e, ZERO) + c1 * c2
                    if c:
                        out[e] = c
                    elif e in out:
                        del out[e]
            return LPoly(self.n, out)
        c = Q(other)
        if not c:
            return LPoly(self.n)
        return LPoly(self.n, {e: c * v for e, v in self.terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (ONE / Q(other))

    def evalk(self, values):
        """Evaluate at a tuple of rationals, returning a Q."""
        total = ZERO
        for e, c in self.terms.items():
            term = c
            for i, p in enumerate(e):
                if p:
                    term = term * values[i] ** p
            total += term
        return total

    def __repr__(self):
        if not self.terms:
            return "LPoly(0)"
        bits = []
        for e, c in sorted(self.terms.items()):
            mono = "*".join("k%d^%d" % (i + 1, p) if p > 1 else "k%d" % (i + 1)
                            for i, p in enumerate(e) if p)
            bits.append("%s%s" % (c, "*" + mono if mono else ""))
        return "LPoly(%s)" % " + ".join(bits)
