"""Numerical double-loop contour integration with branch tracking.

Integrands are products of fractional powers prod_j (z - z_j)^(e_j) times
a rational function.  The contour is the commutator word A B A^-1 B^-1 of
loops around two chosen points -- along it the product of fractional
powers has a univalued branch, fixed by continuous tracking of each
log(z - z_j) from the base point (principal branch there).

Main entry points:

* ``ContourSpec``       -- geometry: encircled pair, base point, radius,
                           panel count, quadrature order;
* ``TwistedCycle``      -- the contour together with marked-point twist
                           data, pairing with functions via P(z)^(-i/M)
                           for P(z) = prod (z - z_j)^(k_j);
* ``twisted_integral``  -- convenience wrapper over TwistedCycle;
* ``beta_pochhammer``   -- B(a, b), the two-point integral of z^a (z-1)^b;
* ``verify_beta_recurrences`` / ``verify_stokes`` -- identity drivers.
"""

import cmath
import math

import numpy as np

from .rationals import Q
from .ratfun import BiRatFun, twisted_derivative

TWO_PI = 2.0 * math.pi

_GL_CACHE = {}


def _leggauss(order):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


class QuadratureResult:
    """Value of a contour integral plus a refinement-difference estimate."""

    def __init__(self, value, error_estimate):
        self.value = complex(value)
        self.error_estimate = float(error_estimate)

    def __repr__(self):
        return "QuadratureResult(%r, %g)" % (self.value, self.error_estimate)


class ContourSpec:
    """Double-loop geometry around a pair of points.

    The path consists of circles of the given radius around the two
    encircled points, joined by straight segments through the base point
    (default: the midpoint), traversed in the commutator order
    A B A^-1 B^-1.
    """

    def __init__(self, za, zb, base=None, radius=None, panels=16, order=32,
                 tolerance=1e-10, max_refinements=6, clearance=None):
        self.za = complex(za)
        self.zb = complex(zb)
        if self.za == self.zb:
            raise ValueError("encircled points must be distinct")
        self.base = complex(base) if base is not None else 0.5 * (
            self.za + self.zb)
        gap = abs(self.zb - self.za)
        self.radius = float(radius) if radius is not None else gap / 4.0
        self.panels = int(panels)
        self.order = int(order)
        self.tolerance = float(tolerance)
        self.max_refinements = int(max_refinements)
        self.clearance = (float(clearance) if clearance is not None
                          else self.radius / 2.0)
        self.word = "A B A^-1 B^-1"

    @classmethod
    def for_points(cls, points, ia=0, ib=1, **kw):
        """Geometry for a family of marked points: radius = min gap / 4."""
        pts = [complex(p) for p in points]
        gaps = [abs(p - q) for i, p in enumerate(pts) for q in pts[i + 1:]]
        kw.setdefault("radius", min(gaps) / 4.0 if gaps else 0.25)
        return cls(pts[ia], pts[ib], **kw)


def _segments(spec):
    """The ordered path pieces: ('line', z0, z1) or ('arc', c, r, t0, t1)."""
    segs = []
    for center, sign in ((spec.za, +1), (spec.zb, +1),
                         (spec.za, -1), (spec.zb, -1)):
        u = spec.base - center
        entry = center + spec.radius * u / abs(u)
        th = cmath.phase(entry - center)
        segs.append(("line", spec.base, entry))
        segs.append(("arc", center, spec.radius, th, th + sign * TWO_PI))
        segs.append(("line", entry, spec.base))
    return segs


def _segment_nodes(seg, panels, xg, wg):
    """Quadrature nodes (z, weighted dz) along one path piece, in order."""
    edges = np.linspace(0.0, 1.0, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    t = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    wt = (half[:, None] * wg[None, :]).ravel()
    if seg[0] == "line":
        _, z0, z1 = seg
        z = z0 + t * (z1 - z0)
        dz = np.full_like(z, z1 - z0)
    else:
        _, c, r, t0, t1 = seg
        th = t0 + t * (t1 - t0)
        z = c + r * np.exp(1j * th)
        dz = 1j * r * np.exp(1j * th) * (t1 - t0)
    return z, dz * wt


def _segment_end(seg):
    if seg[0] == "line":
        return seg[2]
    _, c, r, _, t1 = seg
    return c + r * cmath.exp(1j * t1)


def _path_quadrature(points, exponents, feval, spec, panels):
    """One pass over the full word at a fixed panel count.

    Returns (integral value, L1 scale of the integrand along the path).
    Branch tracking failure to close (nonzero total winding) raises.
    """
    xg, wg = _leggauss(spec.order)
    segs = _segments(spec)
    npts = len(points)
    current = np.array([cmath.log(spec.base - p) for p in points])
    start = current.copy()
    total = 0.0 + 0.0j
    scale = 0.0
    for seg in segs:
        z, wdz = _segment_nodes(seg, panels, xg, wg)
        for p in points:
            d = np.min(np.abs(z - p))
            if d < spec.clearance - 1e-12:
                raise ValueError(
                    "path clearance violated near %r (%.3g)" % (p, d))
        zs = np.concatenate((z, [_segment_end(seg)]))
        logs = np.empty((npts, len(zs)), dtype=complex)
        for j, p in enumerate(points):
            seq = np.concatenate(([current[j]], np.log(zs - p)))
            im = np.unwrap(np.imag(seq))
            logs[j] = np.real(seq[1:]) + 1j * im[1:]
            current[j] = logs[j][-1]
        weight = np.exp(sum(e * logs[j][:-1]
                            for j, e in enumerate(exponents) if e))
        vals = weight * feval(z)
        total += np.sum(vals * wdz)
        scale += float(np.sum(np.abs(vals) * np.abs(wdz)))
    drift = float(np.max(np.abs(current - start)))
    if drift > 1e-12 * (1.0 + float(np.max(np.abs(start)))):
        raise ArithmeticError(
            "branch tracking did not close (drift %.3g)" % drift)
    return total, scale


def _compile_ratfun(f):
    """Turn a w-free exact rational function into a complex evaluator."""
    poles, poly = f.partial_fractions()
    pl = [(complex(float(Q(a).numerator) / float(Q(a).denominator)), e,
           complex(float(Q(c).numerator) / float(Q(c).denominator)))
          for (a, e), c in poles.items()]
    cf = [complex(float(Q(c).numerator) / float(Q(c).denominator))
          for c in poly]

    def feval(z):
        out = np.zeros_like(z, dtype=complex)
        for a, e, c in pl:
            out += c / (z - a) ** e
        if cf:
            acc = np.zeros_like(z, dtype=complex)
            for c in reversed(cf):
                acc = acc * z + c
            out += acc
        return out

    return feval


def _refine(points, exponents, feval, spec):
    """Panel-doubling driver; raises if the tolerance is not reached."""
    panels = spec.panels
    prev = None
    err = math.inf
    val = 0.0 + 0.0j
    scale = 1.0
    for _ in range(spec.max_refinements + 1):
        val, scale = _path_quadrature(points, exponents, feval, spec, panels)
        if prev is not None:
            err = abs(val - prev)
            if err < spec.tolerance * max(1.0, scale):
                return QuadratureResult(val, err), scale
        prev = val
        panels *= 2
    raise ArithmeticError(
        "quadrature did not converge (last error %.3g, scale %.3g)"
        % (err, scale))


class TwistedCycle:
    """A contour plus twist data, pairing with functions via P(z)^(-i/M)."""

    def __init__(self, data, M, spec=None, ia=0, ib=1):
        self.data = data
        self.M = int(M)
        self.points = [complex(float(Q(p).numerator) / float(Q(p).denominator))
                       for p in data.points]
        self.spec = spec if spec is not None else ContourSpec.for_points(
            self.points, ia, ib)

    def _exponents(self, i):
        return [-float(Q(i) * Q(k)) / self.M for k in self.data.levels]

    def integral_scaled(self, f, i, avoid=()):
        """(QuadratureResult, L1 path scale) for relative comparisons.

        ``avoid`` lists extra points (e.g. poles of f away from the twist
        points) that the path must clear; they enter the quadrature word
        with exponent zero, so they only tighten the clearance check.
        """
        feval = _compile_ratfun(f)
        pts = list(self.points)
        exps = self._exponents(i)
        for a in avoid:
            a = Q(a)
            za = complex(float(a.numerator) / float(a.denominator))
            if all(abs(za - p) > 1e-12 for p in pts):
                pts.append(za)
                exps.append(0.0)
        return _refine(pts, exps, feval, self.spec)

    def integral(self, f, i, avoid=()):
        return self.integral_scaled(f, i, avoid)[0]

    def is_zero_cycle(self, i, probes=None):
        """True if the cycle pairs to ~0 with a probe family of functions."""
        if probes is None:
            probes = [BiRatFun.const(Q(1))]
            probes.extend(BiRatFun.pole_z(p) for p in self.data.points)
        vals = [abs(self.integral(f, i).value) for f in probes]
        return max(vals) < 1e-12


def twisted_integral(f, i, data, M, spec=None):
    """Integral of P(z)^(-i/M) f(z) over the double-loop contour."""
    return TwistedCycle(data, M, spec).integral(f, i)


def beta_pochhammer(a, b, spec=None):
    """B(a, b): the double-loop integral of z^a (z-1)^b around 0 and 1."""
    if spec is None:
        spec = ContourSpec(0.0, 1.0)

    def feval(z):
        return np.ones_like(z, dtype=complex)

    res, _ = _refine([0.0 + 0.0j, 1.0 + 0.0j],
                     [float(a), float(b)], feval, spec)
    return res


def verify_beta_recurrences(samples, spec=None, tol=1e-9):
    """Check both shift relations and the three-term identity:

        B(a-1, b) = (a+b+1)/a B(a, b)
        B(a, b-1) = -(a+b+1)/b B(a, b)
        B(a-1, b-1) - B(a, b-1) + B(a-1, b) = 0

    Residuals are measured relative to the largest |B| in each identity,
    with a floor of 1 so that degenerate samples (all terms vanishing,
    e.g. a+b a negative integer) are judged on absolute size.
    Returns a report dict with per-sample diagnostics.
    """
    failures = []
    checked = []
    for a, b in samples:
        af, bf = float(a), float(b)
        B = beta_pochhammer(af, bf, spec).value
        Bam = beta_pochhammer(af - 1, bf, spec).value
        Bbm = beta_pochhammer(af, bf - 1, spec).value
        Babm = beta_pochhammer(af - 1, bf - 1, spec).value
        sc = max(abs(B), abs(Bam), abs(Bbm), abs(Babm), 1.0)
        r1 = abs(Bam - (af + bf + 1) / af * B) / sc if af else None
        r2 = abs(Bbm + (af + bf + 1) / bf * B) / sc if bf else None
        r3 = abs(Babm - Bbm + Bam) / sc
        entry = {"a": af, "b": bf, "shift_a": r1, "shift_b": r2,
                 "three_term": r3}
        checked.append(entry)
        bad = [k for k, r in (("shift_a", r1), ("shift_b", r2),
                              ("three_term", r3))
               if r is not None and r > tol]
        if bad:
            failures.append({"a": af, "b": bf, "violations": bad})
    return {"ok": not failures, "samples": checked, "failures": failures}


def verify_stokes(cycle, i, g):
    """Relative size of the cycle integral of the degree-i twisted
    derivative of g -- zero for a genuine twisted cycle.

    Returns (relative_residual, raw QuadratureResult).
    """
    dg = twisted_derivative(g, i, cycle.M, cycle.data, "z")
    res, scale = cycle.integral_scaled(dg, i)
    rel = abs(res.value) / max(scale, 1e-30)
    return rel, res
