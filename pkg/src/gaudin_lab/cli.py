"""Batch driver: configuration, command dispatch, JSON reporting.

Config schema (JSON object; every key optional, command-line flags win):

    {
      "M": 3,                     // rank parameter, >= 3
      "N": 2,                     // number of marked points, >= 1
      "seed": 7,                  // deterministic draw seed
      "draws": 5,                 // random draws per randomized check
      "levels": ["1", "2/3"],     // rationals as "p/q" strings
      "points": ["0", "1"],
      "pairings": [["0","0","1"], ["0","1","0"]],
      "depth": 3,                 // truncation depth override
      "contour": {"radius": 0.25, "panels": 48, "order": 12,
                  "tolerance": 1e-12},
      "jobs": 1,                  // worker threads (env GAUDIN_LAB_JOBS)
      "faultInjection": null      // "t-tensor" breaks the symmetric tensor
    }

Report schema (version 1): a JSON object

    {
      "schemaVersion": 1,
      "command": "...",
      "seed": 7,
      "aggregate": "pass" | "fail",
      "firstFailure": "record name" (present only on failure),
      "records": [ {"name": ..., "paperAnchor": ...,
                    "status": "pass" | "fail" | "info",
                    "exactZero": bool  (exact checks)
                    | "residualNorm": float  (numeric checks),
                    "runtimeMs": float, "detail": {...}}, ... ]
    }

Rationals are serialized as "p/q" strings throughout.  Exact-arithmetic
records precede quadrature-based ones so numeric noise can never mask a
symbolic failure.  Reports are byte-identical across runs for the same
config and seed, up to the runtimeMs fields.
"""

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from .rationals import Q, ZERO, seeded_rng, rand_q, rand_distinct_qs, rand_levels
from .ratfun import BiRatFun, TwistData
from .tensors import SLBasis, verify_tensor_identities
from .states import GaudinContext
from .vertex import is_zero_state
from .oper import MiuraData, bethe_root, v_closed, canonicalize
from .contour import (TwistedCycle, ContourSpec, beta_pochhammer,
                      verify_beta_recurrences, verify_stokes)
from .verma import (build_module, verify_hamiltonian_decomposition,
                    eigencheck, linear_density_ratio, vacuum_value_certificate)
from .twopoint import TwoPointContext, level_draws

SCHEMA_VERSION = 1
COMMANDS = ("tensors", "zeroth", "symmetry", "s1", "oper", "stokes",
            "bethe", "two-point", "all")


class ConfigError(Exception):
    pass


def _parse_q(x, what):
    try:
        if isinstance(x, str) and "/" in x:
            p, q = x.split("/")
            return Q(int(p.strip()), int(q.strip()))
        return Q(int(x))
    except (ValueError, ZeroDivisionError, TypeError):
        raise ConfigError("%s: %r is not a rational; use an integer or a "
                          "\"p/q\" string" % (what, x))


def _fmt_q(q):
    q = Q(q)
    return "%d/%d" % (q.numerator, q.denominator)


def _jsonify(x):
    if isinstance(x, bool) or x is None or isinstance(x, (int, float, str)):
        return x
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    if isinstance(x, dict):
        return {str(k): _jsonify(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonify(v) for v in x]
    try:
        return _fmt_q(x)
    except Exception:
        return str(x)


class RunConfig:
    """Validated run parameters; see the module docstring for the schema."""

    def __init__(self, M=3, N=2, seed=7, draws=None, levels=None, points=None,
                 pairings=None, depth=None, contour=None, jobs=None,
                 fault=None):
        if not isinstance(M, int) or M < 3:
            raise ConfigError("M must be an integer >= 3 (the invariant "
                              "symmetric tensor vanishes below rank 2)")
        if not isinstance(N, int) or N < 1:
            raise ConfigError("N must be a positive integer")
        if draws is not None and (not isinstance(draws, int) or draws < 1):
            raise ConfigError("draws must be a positive integer")
        self.M, self.N, self.seed, self.draws = M, N, int(seed), draws
        self.levels = ([_parse_q(k, "levels") for k in levels]
                       if levels is not None else None)
        self.points = ([_parse_q(z, "points") for z in points]
                       if points is not None else None)
        self.pairings = ([[_parse_q(x, "pairings") for x in row]
                          for row in pairings]
                         if pairings is not None else None)
        if self.levels is not None and len(self.levels) != N:
            raise ConfigError("levels must list one rational per site "
                              "(N = %d)" % N)
        if self.points is not None and len(set(self.points)) != len(self.points):
            raise ConfigError("points must be distinct")
        if depth is not None and (not isinstance(depth, int) or depth < 1):
            raise ConfigError("depth must be a positive integer")
        self.depth = depth
        contour = contour or {}
        if not isinstance(contour, dict):
            raise ConfigError("contour must be an object with keys among "
                              "radius, panels, order, tolerance")
        bad = set(contour) - {"radius", "panels", "order", "tolerance"}
        if bad:
            raise ConfigError("unknown contour parameters: %s"
                              % ", ".join(sorted(bad)))
        self.contour = contour
        if jobs is None:
            jobs = os.environ.get("GAUDIN_LAB_JOBS", "1")
        try:
            self.jobs = max(1, int(jobs))
        except ValueError:
            raise ConfigError("jobs must be an integer")
        if fault not in (None, "t-tensor"):
            raise ConfigError("unsupported faultInjection %r; only "
                              "\"t-tensor\" is available" % (fault,))
        self.fault = fault

    def spec_for(self, points):
        if not self.contour:
            return None
        return ContourSpec.for_points([complex(float(Q(p).numerator)
                                               / float(Q(p).denominator))
                                       for p in points], **self.contour)

    def miura_or_default(self):
        """User-supplied Miura data when complete, else a small stock draw."""
        if self.points is not None and self.levels is not None \
                and self.pairings is not None:
            try:
                return MiuraData(self.M, self.points, self.levels,
                                 self.pairings)
            except ValueError as exc:
                raise ConfigError(str(exc))
        M = self.M
        row1 = [ZERO] * M
        row1[M - 1] = Q(1)
        row2 = [ZERO] * M
        row2[1] = Q(1)
        return MiuraData(M, [Q(0), Q(1)], [Q(1), Q(1)], [row1, row2])


def _record(name, anchor, status, exact=None, residual=None, detail=None):
    rec = {"name": name, "paperAnchor": anchor, "status": status}
    if exact is not None:
        rec["exactZero"] = bool(exact)
    if residual is not None:
        rec["residualNorm"] = float(residual)
    if detail:
        rec["detail"] = _jsonify(detail)
    return rec


def _run_tasks(tasks, jobs):
    """Execute record-producing thunks, preserving order; add runtimes."""
    def timed(fn):
        t0 = time.time()
        rec = fn()
        rec.setdefault("runtimeMs", round(1000 * (time.time() - t0), 2))
        return rec

    if jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(timed, tasks))
    return [timed(fn) for fn in tasks]


# ---------------------------------------------------------------------------
# command suites
# ---------------------------------------------------------------------------

def cmd_tensors(cfg):
    t_override = None
    if cfg.fault == "t-tensor":
        basis = SLBasis(cfg.M)
        t_override = basis.t.copy()
        t_override[0, 0, 0] = t_override[0, 0, 0] + 1

    def suite():
        raw = verify_tensor_identities(cfg.M, t_override)
        merged = raw[:4] + [{
            "name": "quintic f-t contractions vanish",
            "exactZero": all(r["exactZero"] for r in raw[4:7]),
            "runtimeMs": round(sum(r["runtimeMs"] for r in raw[4:7]), 2),
        }] + raw[7:]
        out = []
        for r in merged:
            out.append(_record(r["name"], "tensor-identities",
                               "pass" if r["exactZero"] else "fail",
                               exact=r["exactZero"],
                               detail={"M": cfg.M}))
            out[-1]["runtimeMs"] = r["runtimeMs"]
        return out

    return [lambda r=rec: r for rec in suite()]


def _draw_contexts(cfg, count):
    rng = seeded_rng(cfg.seed)
    out = []
    for _ in range(count):
        if cfg.points is not None and cfg.levels is not None:
            out.append(GaudinContext(cfg.M, cfg.points, cfg.levels))
        else:
            out.append(GaudinContext(cfg.M, rand_distinct_qs(rng, cfg.N),
                                     rand_levels(rng, cfg.N)))
    return out


def cmd_zeroth(cfg):
    ctxs = _draw_contexts(cfg, cfg.draws or 1)

    def check(i, j):
        ok = all(is_zero_state(c.verify_zeroth_theorem(i, j)) for c in ctxs)
        return _record("zeroth-product-%d%d" % (i, j), "zeroth-product",
                       "pass" if ok else "fail", exact=ok,
                       detail={"M": cfg.M, "N": cfg.N, "draws": len(ctxs)})

    return [lambda i=i, j=j: check(i, j) for i in (1, 2) for j in (1, 2)]


def cmd_symmetry(cfg):
    ctx = _draw_contexts(cfg, 1)[0]
    dim = ctx.model.basis.dim

    def action(i, n):
        ok = all(is_zero_state(ctx.verify_gsym(x, n, i)) for x in range(dim))
        return _record("diagonal-action-i%d-n%d" % (i, n), "symmetry-action",
                       "pass" if ok else "fail", exact=ok,
                       detail={"basisElements": dim})

    def regular(i, j):
        rep = ctx.verify_regularity_mod_T(i, j)
        detail = {"orders": {m: {"translate": e["translate"],
                                 "matchesReference":
                                     e.get("matches_reference")}
                             for m, e in rep["orders"].items()}}
        return _record("diagonal-pole-translate-%d%d" % (i, j),
                       "regularity-mod-translate",
                       "pass" if rep["ok"] else "fail", exact=rep["ok"],
                       detail=detail)

    tasks = [lambda i=i, n=n: action(i, n) for i in (1, 2) for n in range(4)]
    tasks += [lambda i=i, j=j: regular(i, j) for i in (1, 2) for j in (1, 2)]
    return tasks


def cmd_s1(cfg):
    ctx = _draw_contexts(cfg, 1)[0]

    def zeroth(i):
        ok = is_zero_state(ctx.verify_s1_zeroth(i))
        return _record("s1-zeroth-product-i%d" % i, "s1-compatibility",
                       "pass" if ok else "fail", exact=ok)

    def omega(i):
        ok = is_zero_state(ctx.verify_omega_identity(i))
        return _record("conformal-action-i%d" % i, "s1-compatibility",
                       "pass" if ok else "fail", exact=ok)

    def decomposition():
        module = build_module(cfg.miura_or_default(), depth=cfg.depth or 3)
        rep = verify_hamiltonian_decomposition(module)
        return _record("hamiltonian-decomposition",
                       "hamiltonian-decomposition",
                       "pass" if rep["ok"] else "fail", exact=rep["ok"],
                       detail={"entries": rep.get("entries"),
                               "depth": cfg.depth or 3})

    return ([lambda i=i: zeroth(i) for i in (1, 2)]
            + [lambda i=i: omega(i) for i in (1, 2)]
            + [decomposition])


def _draw_miura(rng, M, N, nroots):
    pts = rand_distinct_qs(rng, N)
    levels = [rand_q(rng, nonzero=True) for _ in range(N)]
    pair = []
    for _ in range(N):
        row = [rand_q(rng) for _ in range(M - 1)]
        row.append(levels[len(pair)] - sum(row, ZERO))
        pair.append(row)
    roots = []
    while len(roots) < nroots:
        w = rand_q(rng)
        if w not in pts and all(w != r[0] for r in roots):
            roots.append((w, rng.randrange(M)))
    return MiuraData(M, pts, levels, pair, roots)


def cmd_oper(cfg):
    rng = seeded_rng(cfg.seed)
    count = cfg.draws or 2
    datas = [_draw_miura(rng, cfg.M, cfg.N, t % 2) for t in range(count)]

    def check(t):
        data = datas[t]
        v1, v2 = v_closed(data)
        v = canonicalize(data, 2)
        ok = (v[1] == v1) and (v[2] == v2)
        return _record("oper-cross-oracle-%d" % t, "oper-cross-oracle",
                       "pass" if ok else "fail", exact=ok,
                       detail={"roots": len(data.roots)})

    return [lambda t=t: check(t) for t in range(count)]


def cmd_stokes(cfg):
    levels = cfg.levels if cfg.levels is not None else [Q(2), Q(3)]
    points = cfg.points if cfg.points is not None else [Q(0), Q(1)]
    data = TwistData(points[:2], levels[:2])
    cyc = TwistedCycle(data, cfg.M, spec=cfg.spec_for(points[:2]))
    family = [BiRatFun.pole_z(points[0], m) for m in (1, 2, 3)]
    family += [BiRatFun.pole_z(points[1], m) for m in (1, 2, 3)]
    family += [BiRatFun.const(Q(1)), BiRatFun.zvar(), BiRatFun.zvar() ** 2]

    def stokes(i):
        worst = max(verify_stokes(cyc, i, g)[0] for g in family)
        return _record("stokes-vanishing-i%d" % i, "stokes-vanishing",
                       "pass" if worst <= 1e-10 else "fail", residual=worst,
                       detail={"family": len(family)})

    def recurrences():
        rng = seeded_rng(cfg.seed)
        samples = []
        while len(samples) < 20:
            q = rng.randrange(2, 8)
            pa = rng.randrange(-7, 8)
            pb = rng.randrange(-7, 8)
            if pa % q and pb % q:
                samples.append((pa / q, pb / q))
        rep = verify_beta_recurrences(samples, tol=1e-9)
        worst = max(max(r for r in (s["shift_a"], s["shift_b"],
                                    s["three_term"]) if r is not None)
                    for s in rep["samples"])
        return _record("beta-recurrences", "beta-recurrences",
                       "pass" if rep["ok"] else "fail", residual=worst,
                       detail={"samples": len(rep["samples"]),
                               "failures": rep["failures"]})

    def zero_argument():
        val = abs(beta_pochhammer(0.0, 0.0).value)
        return _record("beta-zero-argument", "beta-recurrences",
                       "pass" if val <= 1e-12 else "fail", residual=val)

    return [lambda i=i: stokes(i) for i in (1, 2)] + [recurrences,
                                                      zero_argument]


def cmd_bethe(cfg):
    vac1 = cfg.miura_or_default()
    vac2 = MiuraData(3, [Q(0), Q(1)], [Q(2), Q(2)],
                     [[Q(0), Q(1), Q(1)], [Q(1), Q(0), Q(1)]])
    dep = MiuraData(3, [Q(0), Q(1)], [Q(2), Q(5)],
                    [[Q(0), Q(1), Q(1)], [Q(1), Q(2), Q(2)]])
    target = 1e-8

    def vacuum(t, data):
        res = eigencheck(data)
        worst = max(res["residual"], res["off_target"])
        return _record("cubic-vacuum-eigenvalue-%d" % t,
                       "cubic-vacuum-eigenvalue",
                       "pass" if worst <= target else "fail", residual=worst,
                       detail={"assertedConstant": -Q(data.M),
                               "measuredConstant": res["measured"]})

    def decomposition():
        ok = (vacuum_value_certificate(vac1, Q(2), Q(1))
              and vacuum_value_certificate(vac2, Q(2), Q(1))
              and not vacuum_value_certificate(vac1, Q(1), Q(1, 2)))
        return _record("cubic-vacuum-decomposition",
                       "cubic-vacuum-eigenvalue",
                       "pass" if ok else "fail", exact=ok,
                       detail={"certifiedCoefficients": [Q(2), Q(1)]})

    def depth1(color):
        w = bethe_root(dep.points, dep.pairings, color)
        res = eigencheck(dep, color=color, w=w)
        worst = max(res["residual"], res["off_target"])
        return _record("cubic-depth1-eigenvalue-color%d" % color,
                       "cubic-depth1-eigenvalue",
                       "pass" if worst <= target else "fail", residual=worst,
                       detail={"root": w,
                               "assertedConstant": -Q(dep.M),
                               "measuredConstant": res["measured"]})

    def off_shell():
        w = bethe_root(dep.points, dep.pairings, 1)
        on = eigencheck(dep, color=1, w=w)["residual"]
        off = eigencheck(dep, color=1, w=Q(11, 20))["residual"]
        gap = abs(off - on)
        return _record("depth1-off-shell-control", "cubic-depth1-eigenvalue",
                       "pass" if gap > 1e-4 else "fail", residual=gap,
                       detail={"onShell": on, "offShell": off})

    def density():
        res = linear_density_ratio(vac1)
        dev = abs(res["ratio"] - vac1.M) / vac1.M
        return _record("quadratic-density-ratio", "quadratic-density",
                       "info", residual=max(dev, res["off_line"]),
                       detail={"ratio": res["ratio"]})

    return ([lambda t=t, d=d: vacuum(t, d)
             for t, d in enumerate((vac1, vac2))]
            + [decomposition]
            + [lambda c=c: depth1(c) for c in (1, 2)]
            + [off_shell, density])


def cmd_twopoint(cfg):
    draws = level_draws(3, max(cfg.draws or 5, 5), cfg.seed)
    ctxs = {kk: TwoPointContext(3, kk) for kk in draws}
    base = TwoPointContext(3, (Q(1), Q(1)))

    def xi():
        ok = all(all(c.verify_xi().values()) for c in ctxs.values())
        return _record("quadratic-integral-reduction",
                       "two-point-proportionality",
                       "pass" if ok else "fail", exact=ok,
                       detail={"draws": list(draws)})

    def virasoro():
        ok = True
        cs = {}
        for kk, c in ctxs.items():
            rep = c.virasoro_table()
            ok = ok and rep["c_match"] \
                and all(r == 0 for r in rep["residuals"].values())
            cs["%s,%s" % kk] = rep["c_closed"]
        return _record("coset-virasoro-products", "coset-virasoro",
                       "pass" if ok else "fail", exact=ok,
                       detail={"centralCharges": cs})

    def charge():
        ok = base.central_charge() == Q(4, 5)
        return _record("central-charge-value", "coset-virasoro",
                       "pass" if ok else "fail", exact=ok,
                       detail={"levels": [1, 1], "c": base.central_charge()})

    def quad():
        ok = all(c.verify_quadratic_prop() for c in ctxs.values())
        return _record("quadratic-proportionality",
                       "two-point-proportionality",
                       "pass" if ok else "fail", exact=ok,
                       detail={"draws": list(draws)})

    def cubic():
        ok = all(c.verify_cubic_prop() and c.verify_structure()
                 for c in ctxs.values())
        return _record("cubic-proportionality", "two-point-proportionality",
                       "pass" if ok else "fail", exact=ok,
                       detail={"draws": list(draws)})

    def primary():
        reps = {kk: c.primary_table() for kk, c in ctxs.items()}
        worst = max(max(r.values()) for r in reps.values())
        return _record("cubic-primary-products", "cubic-primary-products",
                       "info", exact=(worst == 0),
                       detail={"residualMonomials":
                               {"%s,%s" % kk: r for kk, r in reps.items()}})

    def w_products():
        rep = base.w_table(null_check=True)
        return _record("w-products-table", "w-products", "info",
                       detail={"residualMonomials": rep["residuals"],
                               "scaleOverClosedSquare": rep["scale_over_csq"],
                               "skewConsistent": rep["skew_consistent"],
                               "row0HalfTranslateRow1":
                                   rep["row0_half_t_row1"],
                               "row1InNullSubmodule":
                                   rep["row1_in_null_submodule"]})

    def quadrature():
        res = base.numeric_prop_residuals(spec=cfg.spec_for([Q(0), Q(1)]))
        worst = max(res.values())
        return _record("proportionality-quadrature",
                       "two-point-proportionality",
                       "pass" if worst <= 1e-9 else "fail", residual=worst,
                       detail=res)

    return [xi, virasoro, charge, quad, cubic, primary, w_products,
            quadrature]


_SUITES = {
    "tensors": cmd_tensors,
    "zeroth": cmd_zeroth,
    "symmetry": cmd_symmetry,
    "s1": cmd_s1,
    "oper": cmd_oper,
    "stokes": cmd_stokes,
    "bethe": cmd_bethe,
    "two-point": cmd_twopoint,
}

# exact-arithmetic suites first, quadrature-dominated suites last
_ALL_ORDER = ("tensors", "zeroth", "symmetry", "s1", "oper", "two-point",
              "stokes", "bethe")


def run(command, cfg):
    """Execute a command; returns (exit_code, report dict)."""
    names = _ALL_ORDER if command == "all" else (command,)
    tasks = []
    for name in names:
        tasks.extend(_SUITES[name](cfg))
    records = _run_tasks(tasks, cfg.jobs)
    failures = [r["name"] for r in records if r["status"] == "fail"]
    report = {
        "schemaVersion": SCHEMA_VERSION,
        "command": command,
        "seed": cfg.seed,
        "aggregate": "fail" if failures else "pass",
    }
    if failures:
        report["firstFailure"] = failures[0]
    report["records"] = records
    return (1 if failures else 0), report


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="gaudin-lab",
        description="Exact and numerical verification suites for the "
                    "spectral states of cyclotomic Gaudin models and their "
                    "coset two-point products.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config file (see module docs)")
    ap.add_argument("--M", type=int, dest="M")
    ap.add_argument("--N", type=int, dest="N")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--draws", type=int)
    ap.add_argument("--depth", type=int)
    ap.add_argument("--levels", help="comma-separated rationals p/q")
    ap.add_argument("--points", help="comma-separated rationals p/q")
    ap.add_argument("--jobs", type=int,
                    help="worker threads (default: GAUDIN_LAB_JOBS or 1)")
    ap.add_argument("--out", help="write the JSON report to this path")
    return ap


def _load_config(ns):
    raw = {}
    if ns.config:
        try:
            with open(ns.config) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError("cannot read config: %s" % exc)
        except json.JSONDecodeError as exc:
            raise ConfigError("config is not valid JSON: %s" % exc)
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    kw = {
        "M": raw.get("M", 3),
        "N": raw.get("N", 2),
        "seed": raw.get("seed", 7),
        "draws": raw.get("draws"),
        "levels": raw.get("levels"),
        "points": raw.get("points"),
        "pairings": raw.get("pairings"),
        "depth": raw.get("depth"),
        "contour": raw.get("contour"),
        "jobs": raw.get("jobs"),
        "fault": raw.get("faultInjection"),
    }
    for field in ("M", "N", "seed", "draws", "depth", "jobs"):
        val = getattr(ns, field, None)
        if val is not None:
            kw[field] = val
    for field in ("levels", "points"):
        val = getattr(ns, field, None)
        if val is not None:
            kw[field] = [s.strip() for s in val.split(",")]
    return RunConfig(**kw)


def main(argv=None):
    ap = _build_parser()
    ns = ap.parse_args(argv)
    try:
        cfg = _load_config(ns)
        code, report = run(ns.command, cfg)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    text = json.dumps(report, indent=2)
    if ns.out:
        with open(ns.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
