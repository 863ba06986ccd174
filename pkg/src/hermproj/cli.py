"""Command line entry point: ``python -m hermproj <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from fractions import Fraction

import numpy as np


def _num(s: str) -> float:
    return math.inf if s.lower() in ("inf", "infinity") else float(Fraction(s))


def _dump(obj) -> None:
    def conv(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, Fraction):
            return float(o)
        if isinstance(o, complex):
            return [o.real, o.imag]
        return str(o)
    print(json.dumps(obj, indent=2, default=conv))


def cmd_regions(a):
    from .exponents import (PqPoint, beta, classify, classify_near_sphere, distance_to_boundaries,
                            gamma, in_uniform_region)
    if a.grid is not None:
        import csv
        if a.grid < 2:
            raise SystemExit("--grid needs n >= 2")
        w = csv.writer(sys.stdout)
        w.writerow(["a", "b", "region", "beta", "gamma"])
        for i in range(a.grid):
            for k in range(a.grid):
                X = PqPoint(Fraction(1, 2) + Fraction(i, 2 * (a.grid - 1)), Fraction(k, 2 * (a.grid - 1)))
                w.writerow([float(X.a), float(X.b), classify(X, a.d),
                            float(beta(X, a.d)), float(gamma(X, a.d))])
        return
    if a.p is None or a.q is None:
        raise SystemExit("regions needs --p and --q, or --grid")
    X = PqPoint.from_pq(a.p, a.q)
    _dump({"p_inv": X.a, "q_inv": X.b, "region": classify(X, a.d), "beta": beta(X, a.d),
           "gamma": gamma(X, a.d), "near_sphere": classify_near_sphere(X, a.d),
           "uniform": in_uniform_region(X, a.d), "boundary_distance": distance_to_boundaries(X, a.d)})


def cmd_hermite(a):
    from .hermite import hermite_1d, wkb_hermite
    out = {"k": a.k, "t": a.t, "h_k": float(hermite_1d(a.k, a.t))}
    if a.wkb:
        w = wkb_hermite(a.k, a.t)
        out["wkb"] = {"value": w.value, "regime": w.regime, "error_budget": w.error_budget}
    _dump(out)


def _point(s: str, d: int) -> np.ndarray:
    v = np.array([float(c) for c in s.split(",")])
    if v.size != d:
        raise SystemExit(f"expected {d} coordinates in {s!r}")
    return v


def cmd_kernel(a):
    from .decompositions import build_partition
    from .kernels import EigenspaceSpec, kernel_mehler, kernel_spectral, kernel_windowed_spectral
    spec = EigenspaceSpec(a.d, a.N)
    x, y = _point(a.x, a.d), _point(a.y, a.d)
    j, kappa = a.j, a.kappa
    if a.window is not None:
        parts = a.window.split(",")
        j = int(parts[0])
        kappa = parts[1] if len(parts) > 1 else "none"
    if j is None:
        _dump({"lambda": spec.lam, "spectral": float(kernel_spectral(spec, x, y))})
        return
    eta = build_partition().psi_j_kappa(j, kappa)
    out = {"lambda": spec.lam, "window": eta.label}
    if a.method in ("spectral", "both"):
        out["spectral"] = complex(kernel_windowed_spectral(spec, eta, x, y))
    if a.method in ("mehler", "both") or a.mehler:
        out["mehler"] = complex(kernel_mehler(a.d, spec.lam, eta, x, y))
    if "spectral" in out and "mehler" in out:
        out["oracle_diff"] = abs(out["spectral"] - out["mehler"])
    _dump(out)


def cmd_decomp(a):
    from .decompositions import build_partition, caps_at_level, whitney_pairs
    P = build_partition()
    t = np.linspace(-math.pi / 2 - 0.05, math.pi / 2 + 0.05, 2000)  # even count skips t = 0
    total = P.eta_circ(t) - sum(P.psi_j_func(j)(t) + P.psi_j_func(j)(-t) for j in range(40))
    out = {"partition_error": float(np.max(np.abs(total)))}
    if a.mu is not None:
        pairs = whitney_pairs(a.d, a.mu)
        levels = sorted({p.level for p in pairs})
        out["whitney_pairs"] = len(pairs)
        out["levels"] = levels
        if a.d == 2:
            out["caps_per_level"] = {nu: len(caps_at_level(2, nu)) for nu in levels}
        kinds = {}
        for p in pairs:
            kinds.setdefault(p.kind, {}).setdefault(p.level, 0)
            kinds[p.kind][p.level] += 1
        out["pairs_per_level"] = kinds
    _dump(out)


def cmd_norm(a):
    from .kernels import EigenspaceSpec, level_weights
    from .opnorm import (PolarOperator, bracket, grid_annulus, grid_ball, localized_projection_norms,
                         projection_operator)
    spec = EigenspaceSpec(a.d, a.N)
    s = math.sqrt(spec.lam)
    rule = "gauss" if a.window is None else "trapezoid"
    if a.region == "ball":
        g = grid_ball(a.d, spec.lam, rule=rule, N=a.N, force=rule == "gauss")
        r0, r1 = 0.0, s / 2
    else:
        g = grid_annulus(a.d, spec.lam, a.mu, rule=rule, N=a.N, force=rule == "gauss")
        r0, r1 = s * (1 - a.mu), s * (1 - a.mu / 2)
    head = {"lambda": spec.lam, "mu": a.mu if a.region == "annulus" else None}
    if a.p is None and a.window is None:
        n = localized_projection_norms(spec, g, r0, r1)
        _dump(head | {"(1,inf)": n.n_1inf, "(2,inf)": n.n_2inf, "(1,2)": n.n_12, "(2,2)": n.n_22,
                      "grid_stats": g.stats(), "dim": n.dim})
        return
    p = 2.0 if a.p is None else a.p
    q = 2.0 if a.q is None else a.q
    if a.window is None:
        T = projection_operator(spec, g)
    else:
        if a.d != 2:
            raise SystemExit("--window needs d = 2")
        from .decompositions import build_partition
        T = PolarOperator.from_weights(spec, level_weights(build_partition().psi_j(a.window), spec), g)
    est = bracket(T, p, q, restarts=a.restarts, seed=a.seed)
    _dump(head | est.summary() | {"grid_stats": g.stats()})


def cmd_euclid(a):
    from .euclid import wp_at_zero, wp_kernel, wp_norm_exact, wp_tilde_norm
    out = {"k": a.k, "d": a.d, "wp(0)": wp_at_zero(a.k, a.d),
           "(1,inf)": wp_norm_exact(a.k, a.d, 1, math.inf),
           "(2,inf)": wp_norm_exact(a.k, a.d, 2, math.inf)}
    if a.r is not None:
        out["wp(r)"] = float(wp_kernel(a.k, a.d, a.r))
    if a.p is not None and a.q is not None:
        ex = wp_norm_exact(a.k, a.d, a.p, a.q)
        if ex is not None:
            out |= {"p": a.p, "q": a.q, "lower": ex, "upper": ex, "method": "closed form"}
        else:
            # ||wp_k|| = k^{d/2 (1/p - 1/q) - 1} ||wp~_k||
            est = wp_tilde_norm(a.k, a.d, a.p, a.q, R=a.R)
            sc = a.k ** (a.d / 2 * (1 / a.p - (0 if a.q == math.inf else 1 / a.q)) - 1)
            out |= est.summary() | {"lower": est.lower * sc, "upper": est.upper * sc,
                                    "truncation_flag": est.notes.get("truncation_flag")}
    _dump(out)


def cmd_lowerbound(a):
    from . import lowerbound as lb
    if a.check == "5_7":
        c = lb.verify_5_7(a.d, a.N, a.mu, (a.lo, a.hi))
        _dump({"ratio": c.ratio, "integral": c.integral, "I": c.I, "II": c.II,
               "II_over_I": c.II_over_I, "flagged": c.flagged, "x0": c.x0, **c.notes})
    elif a.check == "5_4":
        r = lb.derivative_bound_check(a.d, a.N, a.mu, tuple([1] + [0] * (a.d - 1)))
        _dump(r.__dict__)
    elif a.check == "g":
        g = lb.build_g(a.d, a.N, a.mu, lb.jset(a.d, a.N, a.mu, (a.lo, a.hi)))
        _dump({"J_size": g.J.size, "x0": g.x0, "box": g.box, "l2norm": g.l2norm})
    else:
        lam = 2 * a.N + a.d
        ell = lb.ell_of(lam, a.mu, a.d)
        A = lb.a_uv_matrix(min(a.N, 60), ell)
        Q = lb.overlap_matrix(min(a.N, 60), -ell, ell)
        _dump({"ell": ell, "k_max": min(a.N, 60), "max_closed_vs_quad": float(np.max(np.abs(A - Q)))})


def cmd_sweep(a):
    from .sweep import ExperimentConfig, report, run_sweep
    cfg = ExperimentConfig.load(a.config)
    recs = run_sweep(cfg, a.out)
    print(f"{len(recs)} records -> {a.out or cfg.output}")
    if a.report:
        report(recs, a.report, cfg.tol_lambda, cfg.tol_mu)
        print(f"report -> {a.report}")


def cmd_fit(a):
    from .sweep import load_records, summarize
    recs = load_records(a.inp)
    _dump(summarize(recs, a.tol_lambda, a.tol_mu, a.min_points))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hermproj", description="Hermite spectral projection experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("regions", help="classify an exponent pair")
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--p", type=_num, default=None)
    s.add_argument("--q", type=_num, default=None)
    s.add_argument("--grid", type=int, default=None, help="emit a CSV over an n x n lattice of (1/p, 1/q)")
    s.set_defaults(func=cmd_regions)

    s = sub.add_parser("hermite", help="evaluate a Hermite function")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--wkb", action="store_true")
    s.set_defaults(func=cmd_hermite)

    s = sub.add_parser("kernel", help="projection or windowed kernel at a point pair")
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--x", required=True, help="comma separated coordinates")
    s.add_argument("--y", required=True)
    s.add_argument("--j", type=int, default=None)
    s.add_argument("--kappa", default="none", choices=["none", "-", "+pi", "-pi"])
    s.add_argument("--window", default=None, help="j[,kappa], e.g. 2,-pi")
    s.add_argument("--method", choices=["spectral", "mehler", "both"], default="both")
    s.add_argument("--mehler", action="store_true", help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_kernel)

    s = sub.add_parser("decomp", help="partition and Whitney decomposition checks")
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--mu", type=_num, default=None)
    s.set_defaults(func=cmd_decomp)

    s = sub.add_parser("norm", help="localized projection norms")
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--region", choices=["ball", "annulus"], default="ball")
    s.add_argument("--mu", type=_num, default=0.125)
    s.add_argument("--p", type=_num, default=None)
    s.add_argument("--q", type=_num, default=None)
    s.add_argument("--window", type=int, default=None, help="use the window psi_j (d = 2, trapezoid grid)")
    s.add_argument("--restarts", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_norm)

    s = sub.add_parser("euclid", help="Euclidean annulus projector")
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--k", type=float, required=True)
    s.add_argument("--r", type=float, default=None)
    s.add_argument("--p", type=_num, default=None)
    s.add_argument("--q", type=_num, default=None)
    s.add_argument("--R", type=float, default=20.0, help="truncation radius for the rescaled operator")
    s.set_defaults(func=cmd_euclid)

    s = sub.add_parser("lowerbound", help="near-sphere concentration check")
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--mu", type=_num, default=0.125)
    s.add_argument("--lo", type=_num, default=0.0)
    s.add_argument("--hi", type=_num, default=1 / 16)
    s.add_argument("--check", choices=["5_7", "5_4", "g", "auv"], default="5_7")
    s.set_defaults(func=cmd_lowerbound)

    s = sub.add_parser("sweep", help="run a configured sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default=None)
    s.add_argument("--report", default=None, help="directory for records/summary/region map")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("fit", help="fit slopes from a records CSV")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--tol-lambda", type=float, default=0.15)
    s.add_argument("--tol-mu", type=float, default=0.25)
    s.add_argument("--min-points", type=int, default=3)
    s.set_defaults(func=cmd_fit)
    return ap


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING)
    a.func(a)
    return 0


if __name__ == "__main__":
    sys.exit(main())
