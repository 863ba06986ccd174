"""Experiment sweeps: configuration, records, slope fits and reports.

Config files are flat ``key = value`` lines (``#`` starts a comment):

    d = 2
    N_list = 16, 32, 64, 128
    mu_list = 1/8                    # dyadic, each >= lambda^{-2/3}
    pq_list = 1,inf; 2,inf; 2,6      # p,q pairs separated by ';'
    region = annulus                 # ball | annulus | global
    window = full                    # full | truncated | psi_j:<j>
    resolution = 0.25                # Nyquist factor, spacing = resolution / sqrt(lambda)
    rule = gauss                     # gauss | trapezoid
    restarts = 4
    seed = 0
    output = runs/annulus.csv
    tol_lambda = 0.15
    tol_mu = 0.25
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .decompositions import build_partition
from .exponents import PqPoint, beta, classify, distance_to_boundaries, gamma, lattice
from .fitting import fit_loglog
from .kernels import EigenspaceSpec, level_weights
from .opnorm import (INF, PolarOperator, bracket, grid_annulus, grid_ball, grid_global,
                     projection_operator, tuple_seed)

log = logging.getLogger(__name__)

CSV_COLUMNS = ["d", "N", "lambda", "mu", "p_inv", "q_inv", "lower", "upper", "beta", "gamma",
               "region", "window", "seed", "wall_ms"]
REGIONS = ("ball", "annulus", "global")
KAPPAS = ("none", "-", "+pi", "-pi")
ADVISORY_DISTANCE = 0.02


class ConfigError(ValueError):
    pass


def _parse_num(s: str) -> float:
    s = s.strip()
    if s.lower() in ("inf", "infinity", "∞"):
        return INF
    return float(Fraction(s))


@dataclass
class ExperimentConfig:
    d: int = 2
    N_list: list = field(default_factory=lambda: [16, 32, 64])
    mu_list: list = field(default_factory=lambda: [0.125])
    pq_list: list = field(default_factory=lambda: [(1.0, INF)])
    region: str = "ball"
    window: str = "full"
    resolution: float = 0.25
    rule: str = "gauss"
    restarts: int = 4
    seed: int = 0
    output: str = "sweep.csv"
    tol_lambda: float = 0.15
    tol_mu: float = 0.25

    def validate(self) -> "ExperimentConfig":
        if self.d < 2:
            raise ConfigError("d must be >= 2")
        if self.region not in REGIONS:
            raise ConfigError(f"region must be one of {REGIONS}")
        if self.rule not in ("gauss", "trapezoid"):
            raise ConfigError("rule must be gauss or trapezoid")
        _parse_window(self.window)
        for p, q in self.pq_list:
            PqPoint.from_pq(p, q)
        for mu in self.mu_list:
            k = -math.log2(mu)
            if abs(k - round(k)) > 1e-12 or k < 1:
                raise ConfigError(f"mu = {mu} is not dyadic 2^-k with k >= 1")
        if self.region == "annulus":
            for N in self.N_list:
                lam = 2 * N + self.d
                for mu in self.mu_list:
                    if mu < lam ** (-2 / 3):
                        raise ConfigError(f"mu = {mu} < lambda^(-2/3) at N = {N}")
        return self

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        kw = {}
        for ln, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {ln}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"line {ln}: unknown key {key!r}")
            if key in ("d", "restarts", "seed"):
                kw[key] = int(val)
            elif key == "N_list":
                kw[key] = [int(v) for v in val.split(",")]
            elif key == "mu_list":
                kw[key] = [_parse_num(v) for v in val.split(",")]
            elif key == "pq_list":
                pairs = []
                for item in val.split(";"):
                    p, q = item.split(",")
                    pairs.append((_parse_num(p), _parse_num(q)))
                kw[key] = pairs
            elif key in ("resolution", "tol_lambda", "tol_mu"):
                kw[key] = _parse_num(val)
            else:
                kw[key] = val
        return cls(**kw).validate()

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.parse(Path(path).read_text())

    def tuples(self):
        mus = self.mu_list if self.region == "annulus" else [None]
        for N in self.N_list:
            for mu in mus:
                for p, q in self.pq_list:
                    yield N, mu, p, q


def _parse_window(w: str):
    if w in ("full", "truncated"):
        return w, None
    if w.startswith("psi_j:"):
        return "psi_j", int(w.split(":", 1)[1])
    raise ConfigError(f"unknown window {w!r}")


@dataclass
class SweepRecord:
    d: int
    N: int
    lam: int
    mu: float | None
    p_inv: float
    q_inv: float
    lower: float
    upper: float
    beta: float
    gamma: float | None
    region: str
    window: str
    seed: int
    wall_ms: float
    grid: dict = field(default_factory=dict)
    build: str = ""

    @property
    def p(self) -> float:
        return 1 / self.p_inv

    @property
    def q(self) -> float:
        return INF if self.q_inv == 0 else 1 / self.q_inv

    def key(self, resolution: float) -> str:
        return record_key(self.d, self.N, self.mu, self.p, self.q, self.region, self.window,
                          resolution, self.seed)

    def row(self) -> list:
        return [self.d, self.N, self.lam, "" if self.mu is None else repr(self.mu),
                repr(self.p_inv), repr(self.q_inv), repr(self.lower), repr(self.upper),
                repr(self.beta), "" if self.gamma is None else repr(self.gamma),
                self.region, self.window, self.seed, f"{self.wall_ms:.3f}"]


def record_key(d, N, mu, p, q, region, window, resolution, seed) -> str:
    s = repr((int(d), int(N), None if mu is None else float(mu), float(p), float(q),
              region, window, float(resolution), int(seed)))
    return hashlib.sha256(s.encode()).hexdigest()[:16]


def build_id() -> str:
    """Short content hash of the package sources."""
    h = hashlib.sha256()
    for f in sorted(Path(__file__).parent.glob("*.py")):
        h.update(f.read_bytes())
    return h.hexdigest()[:12]


def predictions(d: int, p: float, q: float) -> tuple[float, float | None]:
    X = PqPoint.from_pq(p, q)
    b = float(beta(X, d))
    try:
        g = float(gamma(X, d))
    except ValueError:
        g = None
    return b, g


# --- operators -------------------------------------------------------------------

def region_grid(cfg: ExperimentConfig, spec: EigenspaceSpec, mu):
    kw = dict(resolution=cfg.resolution, rule=cfg.rule, N=spec.N, force=cfg.rule == "gauss")
    if cfg.region == "ball":
        return grid_ball(spec.d, spec.lam, **kw)
    if cfg.region == "annulus":
        return grid_annulus(spec.d, spec.lam, mu, **kw)
    return grid_global(spec.d, spec.lam, **kw)


def j0_of(lam: float, mu: float) -> int:
    """2^{j0 - 1} <= lam mu < 2^{j0}."""
    return int(math.floor(math.log2(lam * mu))) + 1


def _sum_weights(ws):
    n = max(w.size for w in ws)
    out = np.zeros(n, dtype=complex)
    for w in ws:
        out[: w.size] += w
    return out


def truncated_weights(spec: EigenspaceSpec, j0: int) -> np.ndarray:
    """Level weights of sum_{kappa} sum_{j < j0} psi_j^kappa."""
    P = build_partition()
    return _sum_weights([level_weights(P.family(j0 - 1, k), spec) for k in KAPPAS])


def window_weights(spec: EigenspaceSpec, window: str, mu) -> np.ndarray:
    kind, j = _parse_window(window)
    if kind == "psi_j":
        return level_weights(build_partition().psi_j(j), spec)
    if kind == "truncated":
        if mu is None:
            raise ConfigError("the truncated window needs mu")
        return truncated_weights(spec, j0_of(spec.lam, mu))
    w = np.zeros(spec.N + 1, dtype=complex)
    w[spec.N] = 1.0
    return w


def build_operator(cfg: ExperimentConfig, N: int, mu):
    spec = EigenspaceSpec(cfg.d, N)
    grid = region_grid(cfg, spec, mu)
    if cfg.window == "full":
        return projection_operator(spec, grid), grid
    if cfg.d != 2:
        raise ConfigError("windowed operators are implemented for d = 2")
    if cfg.rule != "trapezoid":
        grid = region_grid(ExperimentConfig(**{**asdict(cfg), "rule": "trapezoid"}), spec, mu)
    return PolarOperator.from_weights(spec, window_weights(spec, cfg.window, mu), grid), grid


def tail_share(spec: EigenspaceSpec, mu: float, grid) -> float:
    """||Pi - truncated||_{2->2} / ||Pi||_{2->2} on a d = 2 polar grid."""
    full = window_weights(spec, "full", mu)
    trunc = truncated_weights(spec, j0_of(spec.lam, mu))
    diff = _sum_weights([full, -trunc])
    a = PolarOperator.from_weights(spec, diff, grid).norm_22()
    b = PolarOperator.from_weights(spec, full, grid).norm_22()
    return a / b


# --- running ---------------------------------------------------------------------

def run_tuple(cfg: ExperimentConfig, N: int, mu, p: float, q: float, build: str = "") -> SweepRecord:
    t0 = time.perf_counter()
    T, grid = build_operator(cfg, N, mu)
    seed = tuple_seed(cfg.seed, 2 * N + cfg.d, -1 if mu is None else mu, p, q)
    est = bracket(T, p, q, restarts=cfg.restarts, seed=seed % (2 ** 32))
    b, g = predictions(cfg.d, p, q)
    ms = 1000 * (time.perf_counter() - t0)
    return SweepRecord(cfg.d, N, 2 * N + cfg.d, mu, 1 / p, 0.0 if q == INF else 1 / q,
                       float(est.lower), float(est.upper), b, g, cfg.region, cfg.window,
                       cfg.seed, ms, grid.stats(), build)


def load_records(path) -> list[SweepRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rec = SweepRecord(int(row["d"]), int(row["N"]), int(row["lambda"]),
                              float(row["mu"]) if row["mu"] else None,
                              float(row["p_inv"]), float(row["q_inv"]),
                              float(row["lower"]), float(row["upper"]),
                              float(row["beta"]), float(row["gamma"]) if row["gamma"] else None,
                              row["region"], row["window"], int(row["seed"]), float(row["wall_ms"]))
            b, g = predictions(rec.d, rec.p, rec.q)
            if abs(b - rec.beta) > 1e-12 or (g is None) != (rec.gamma is None) or (
                    g is not None and abs(g - rec.gamma) > 1e-12):
                raise ValueError(f"stored predictions disagree with exponent geometry: {row}")
            if rec.lower > rec.upper * (1 + 1e-9):
                raise ValueError(f"record with lower > upper: {row}")
            out.append(rec)
    return out


def write_records(records, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow(r.row())


def _sort_key(r: SweepRecord):
    return (r.N, -1.0 if r.mu is None else r.mu, r.p_inv, r.q_inv)


def run_sweep(cfg: ExperimentConfig, output: str | None = None) -> list[SweepRecord]:
    """Run every tuple not already present in the output CSV; failures are logged and skipped."""
    out = Path(output or cfg.output)
    done = {}
    if out.exists():
        for r in load_records(out):
            done[r.key(cfg.resolution)] = r
    build = build_id()
    records = dict(done)
    for N, mu, p, q in cfg.tuples():
        k = record_key(cfg.d, N, mu, p, q, cfg.region, cfg.window, cfg.resolution, cfg.seed)
        if k in records:
            continue
        try:
            rec = run_tuple(cfg, N, mu, p, q, build)
        except Exception as exc:  # one bad tuple must not end the sweep
            log.warning("tuple (N=%s, mu=%s, p=%s, q=%s) failed: %s", N, mu, p, q, exc)
            continue
        records[k] = rec
        # the whole file is rewritten in canonical order so resumed runs are byte identical
        write_records(sorted(records.values(), key=_sort_key), out)
    return sorted(records.values(), key=_sort_key)


# --- fits and reports -------------------------------------------------------------

def fit_slope(records, variable: str = "lambda", end: str = "lower", min_points: int = 4):
    if variable not in ("lambda", "mu") or end not in ("lower", "upper"):
        raise ValueError("variable in {lambda, mu}, end in {lower, upper}")
    xs = [r.lam if variable == "lambda" else r.mu for r in records]
    ys = [getattr(r, end) for r in records]
    f = fit_loglog(xs, ys, min_points=min_points)
    return f.slope, f.intercept, f.r2, f.ci


def _groups(records):
    g = {}
    for r in records:
        g.setdefault((r.p_inv, r.q_inv), []).append(r)
    return g


def summarize(records, tol_lambda: float = 0.15, tol_mu: float = 0.25, min_points: int = 3) -> dict:
    """Per (p, q): fitted slopes against beta and gamma with pass/fail."""
    out = {}
    for (pi, qi), rs in sorted(_groups(records).items()):
        d = rs[0].d
        b, g = predictions(d, 1 / pi, INF if qi == 0 else 1 / qi)
        entry = {"p_inv": pi, "q_inv": qi, "beta": b, "gamma": g,
                 "near_boundary": distance_to_boundaries(PqPoint(pi, qi), d) < ADVISORY_DISTANCE}
        for var, pred, tol in (("lambda", b, tol_lambda), ("mu", g, tol_mu)):
            fixed = "mu" if var == "lambda" else "lambda"
            by_fixed = {}
            for r in rs:
                by_fixed.setdefault(r.mu if fixed == "mu" else r.lam, []).append(r)
            slopes = {}
            for key, sub in by_fixed.items():
                if len({(r.lam if var == "lambda" else r.mu) for r in sub}) < min_points:
                    continue
                for end in ("lower", "upper"):
                    s = fit_slope(sub, var, end, min_points)[0]
                    slopes.setdefault(end, []).append(s)
            if not slopes or pred is None:
                entry[f"{var}_slope"] = None
                continue
            lo = float(np.mean(slopes["lower"]))
            up = float(np.mean(slopes["upper"]))
            entry[f"{var}_slope"] = {"lower": lo, "upper": up, "prediction": pred, "tolerance": tol,
                                     "pass": abs(lo - pred) <= tol and abs(up - pred) <= tol}
        out[f"({pi:.6g},{qi:.6g})"] = entry
    return out


def region_map_rows(d: int, n: int = 24) -> list[dict]:
    rows = []
    for X in lattice(n):
        a, b = X.as_float()
        try:
            bb = float(beta(X, d))
        except ValueError:
            bb = None
        rows.append({"p_inv": a, "q_inv": b, "region": classify(X, d), "beta": bb,
                     "distance": distance_to_boundaries(X, d)})
    return rows


def report(records, out_dir, tol_lambda: float = 0.15, tol_mu: float = 0.25,
           truncation_note: str | None = None) -> dict:
    """Write records.csv, summary.json and region_map.csv into out_dir."""
    if not records:
        raise ValueError("no records")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_records(records, out / "records.csv")
        summ = {"d": records[0].d, "targets": summarize(records, tol_lambda, tol_mu)}
        windows = {r.window for r in records}
        if "truncated" in windows:
            summ["truncation_note"] = truncation_note or (
                "windows psi_j^kappa with 2^j >= lambda mu (j >= j0, 2^(j0-1) <= lambda mu < 2^j0) omitted")
        with open(out / "summary.json", "w") as fh:
            json.dump(summ, fh, indent=2, sort_keys=True)
        rows = region_map_rows(records[0].d)
        with open(out / "region_map.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    return summ
