"""Grid certification of uniform expansion for finitely supported systems.

The functional is ``F(P, theta) = sum_i c_i log ||D_P f_i (theta)||`` (or the
``N``-step analogue over all words of length ``N``).  Given bounds ``C_M`` on the
chart derivatives and ``C_theta`` on the angular derivative, a grid of pitch
``(r, rho)`` with ``r C_M < C/4`` and ``rho C_theta < C/4`` on which ``F > C``
certifies ``F > C/4`` everywhere.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import sl2
from .errors import ConfigError, FrameError

log = logging.getLogger(__name__)

CERTIFIED = "certified"
GRID_FAILED = "grid-failed"
STEP_SIZE_INVALID = "step-size-invalid"

# rows of (point, direction, word) evaluated at once in the N-step path
_ROW_BUDGET = 1 << 21


@dataclass(frozen=True)
class GridSpec:
    r: float
    rho: float

    def __post_init__(self):
        if not (self.r > 0 and self.rho > 0):
            raise ConfigError("grid pitches must be positive")


@dataclass(frozen=True)
class DerivativeBounds:
    c_m: float
    c_theta: float
    provenance: str = "configured"
    raw_c_m: float | None = None
    raw_c_theta: float | None = None

    def __post_init__(self):
        for v in (self.c_m, self.c_theta):
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError("derivative bounds must be finite and non-negative")


@dataclass(frozen=True)
class UEConfig:
    C: float
    N: int = 1
    safety_factor: float = 2.0
    error_budget: float = 1e-6

    def __post_init__(self):
        if not self.C > 0:
            raise ConfigError("threshold C must be positive")
        if int(self.N) != self.N or self.N < 1:
            raise ConfigError("word length N must be a positive integer")
        if self.safety_factor < 1:
            raise ConfigError("safety factor must be >= 1")
        if self.error_budget < 0:
            raise ConfigError("evaluation-error budget must be >= 0")


@dataclass
class UEReport:
    verdict: str
    min_value: float
    argmin: dict
    grid_size: int
    n_points: int
    n_directions: int
    c_m: float
    c_theta: float
    r: float
    rho: float
    threshold: float
    word_length: int
    error_budget: float
    certified_constant: float | None
    bounds_provenance: str
    system: dict = field(default_factory=dict)
    elapsed_seconds: float | None = None

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# grid


@dataclass
class Grid:
    """Base points with chart data plus a common direction lattice."""

    points: np.ndarray
    region: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    thetas: np.ndarray

    @property
    def n_points(self):
        return len(self.points)

    @property
    def size(self):
        return len(self.points) * len(self.thetas)

    def __iter__(self):
        """Stream ``(SurfacePoint-like dict, theta)`` pairs in enumeration order."""
        for n in range(len(self.points)):
            p = self.point(n)
            for th in self.thetas:
                yield p, float(th)

    def point(self, n):
        out = {"region": int(self.region[n]), "t1": float(self.t1[n]), "t2": float(self.t2[n])}
        for name, v in zip("xyz", self.points[n]):
            out[name] = float(v)
        return out


def _lattice(lo, hi, pitch, closed):
    span = (hi - lo) / pitch
    count = int(math.floor(span + 1e-9)) + 1 if closed else int(math.ceil(span - 1e-9))
    return lo + pitch * np.arange(count)


def direction_lattice(rho):
    return _lattice(0.0, math.pi, rho, closed=False)


def build_grid(system, spec: GridSpec) -> Grid:
    """Deterministic grid: chart by chart, lattice rows ``t1``-major, then directions."""
    pts, reg, a, b = [], [], [], []
    for chart in system.charts():
        t = _lattice(chart.lo, chart.hi, spec.r, chart.closed)
        T1, T2 = np.meshgrid(t, t, indexing="ij")
        P, t1, t2 = system.lift(chart.region, T1.ravel(), T2.ravel())
        pts.append(P)
        reg.append(np.full(len(P), chart.region, dtype=int))
        a.append(t1)
        b.append(t2)
    return Grid(
        points=np.concatenate(pts) if pts else np.empty((0, system.dim)),
        region=np.concatenate(reg),
        t1=np.concatenate(a),
        t2=np.concatenate(b),
        thetas=direction_lattice(spec.rho),
    )


# ---------------------------------------------------------------------------
# evaluation


def generator_values(system, P, thetas, src_region=None, dst_region=None):
    """Per-generator ``F_i`` on a points x directions block, shape ``(d, n, m)``."""
    out = np.empty((system.n_generators, len(P), len(thetas)))
    for g in range(system.n_generators):
        _, mats = system.step(g, P, src_region, dst_region)
        out[g] = sl2.log_expansion_v(mats[:, None], thetas[None, :])
    return out


def _one_step_block(system, P, thetas):
    F = np.zeros((len(P), len(thetas)))
    for g in range(system.n_generators):
        _, mats = system.step(g, P)
        F += system.weights[g] * sl2.log_expansion_v(mats[:, None], thetas[None, :])
    return F


def evaluate_F_v(system, P, theta, N=1):
    """``F`` at paired rows ``(P[n], theta[n])`` for word length ``N``.

    Words of length ``N`` are expanded level by level so a shared prefix is
    evaluated once; the log-norm of each word telescopes along the evolving
    direction instead of forming the product matrix.
    """
    P = np.asarray(P, dtype=float).reshape(-1, system.dim)
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (len(P),))
    d = system.n_generators
    rows_per_point = d ** N
    chunk = max(1, _ROW_BUDGET // rows_per_point)
    out = np.empty(len(P))
    for lo in range(0, len(P), chunk):
        out[lo:lo + chunk] = _telescoped(system, P[lo:lo + chunk], theta[lo:lo + chunk], N)
    return out


def _telescoped(system, P, theta, N):
    d = system.n_generators
    owner = np.arange(len(P))
    pts, th = P, theta.copy()
    acc = np.zeros(len(P))
    wt = np.ones(len(P))
    for level in range(N):
        gen = np.tile(np.arange(d), len(pts))
        pts_rep = np.repeat(pts, d, axis=0)
        th_rep = np.repeat(th, d)
        try:
            pts, mats = system.step(gen, pts_rep)
        except FrameError as exc:
            raise FrameError(f"singular frame at word level {level + 1}: {exc}",
                             word=getattr(exc, "word", None), step=level + 1) from exc
        inc, th = sl2.step_log_growth_v(mats, th_rep)
        acc = np.repeat(acc, d) + inc
        wt = np.repeat(wt, d) * system.weights[gen]
        owner = np.repeat(owner, d)
    return np.bincount(owner, weights=wt * acc, minlength=len(P))


def evaluate_F(system, p, theta, N=1) -> float:
    """``F(P, theta)`` at a single point (ambient coordinates) and direction."""
    return float(evaluate_F_v(system, np.asarray(p, dtype=float)[None, :], [theta], N)[0])


def direct_word_log_norm(system, p, theta, gens):
    """Log growth of ``theta`` along ``gens`` (applied first to last) by explicit matrix product."""
    P = np.asarray(p, dtype=float)[None, :]
    prod = np.eye(2)
    for g in gens:
        P, mats = system.step(int(g), P)
        prod = mats[0] @ prod
    return float(sl2.log_expansion_v(prod, theta))


# ---------------------------------------------------------------------------
# derivative bounds


def estimate_derivative_bounds(system, probe_grid: GridSpec, safety_factor=2.0, h=1e-6, thetas=None):
    """Sampled ``max |dF_i/dt|`` and ``max |dF_i/dtheta|`` over a probe grid, times ``safety_factor``.

    Angular derivatives are analytic.  Chart derivatives are centered differences
    of ``F_i`` along ``t1`` and ``t2`` with the frames at the point and at its
    image held in their unperturbed regions.
    """
    grid = build_grid(system, probe_grid)
    if thetas is None:
        thetas = grid.thetas
    if grid.n_points == 0:
        raise ConfigError("probe grid is empty")
    max_t = 0.0
    max_th = 0.0
    for region in np.unique(grid.region):
        sel = grid.region == region
        P, t1, t2 = grid.points[sel], grid.t1[sel], grid.t2[sel]
        src = None if system.kind == "torus" else region - 1
        for g in range(system.n_generators):
            Q, mats = system.step(g, P)
            try:
                dth = sl2.d_log_expansion_dtheta_v(mats[:, None], thetas[None, :])
            except FloatingPointError as exc:
                raise FrameError(f"angular derivative failed for generator {g} in region {region}") from exc
            max_th = max(max_th, float(np.max(np.abs(dth))))
            dst = None if system.kind == "torus" else system.chart(Q)[0] - 1
            for axis in (0, 1):
                vals = []
                for sgn in (1.0, -1.0):
                    a = t1 + sgn * h * (axis == 0)
                    b = t2 + sgn * h * (axis == 1)
                    Pp = system.relift(region, a, b, P)
                    _, m2 = system.step(g, Pp, src, dst)
                    vals.append(sl2.log_expansion_v(m2[:, None], thetas[None, :]))
                dt = (vals[0] - vals[1]) / (2.0 * h)
                if not np.all(np.isfinite(dt)):
                    bad = int(np.flatnonzero(~np.all(np.isfinite(dt), axis=1))[0])
                    raise FrameError(
                        f"chart derivative failed for generator {system.names[g]} at {P[bad].tolist()}"
                    )
                max_t = max(max_t, float(np.max(np.abs(dt))))
    return DerivativeBounds(
        c_m=max_t * safety_factor,
        c_theta=max_th * safety_factor,
        provenance="estimated",
        raw_c_m=max_t,
        raw_c_theta=max_th,
    )


# ---------------------------------------------------------------------------
# verification


def step_sizes_ok(spec: GridSpec, bounds: DerivativeBounds, C: float) -> bool:
    """``r C_M < C/4`` and ``rho C_theta < C/4``."""
    return spec.r * bounds.c_m < C / 4 and spec.rho * bounds.c_theta < C / 4


def _run_key(system, config, spec):
    blob = json.dumps([system.describe(), asdict(spec), config.N], sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _chunk_min(system, grid, lo, hi, N):
    P = grid.points[lo:hi]
    th = grid.thetas
    if N == 1:
        F = _one_step_block(system, P, th)
    else:
        rows = np.repeat(P, len(th), axis=0)
        F = evaluate_F_v(system, rows, np.tile(th, len(P)), N).reshape(len(P), len(th))
    flat = int(np.argmin(F))
    i, j = divmod(flat, len(th))
    return float(F[i, j]), lo + i, j


def _load_checkpoint(path, key):
    done = {}
    if path and os.path.exists(path):
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                if rec.get("key") == key:
                    done[rec["chunk"]] = (rec["min"], rec["point"], rec["theta"])
    return done


def verify(system, config: UEConfig, spec: GridSpec, bounds: DerivativeBounds,
           threads=1, chunk_points=1024, checkpoint=None, grid=None) -> UEReport:
    """Run the grid certificate and return a report (violations are verdicts, not errors).

    The sweep is split into fixed chunks of ``chunk_points`` base points; results do
    not depend on ``threads``.  With ``checkpoint`` set, finished chunks are appended
    to that file and skipped on a rerun with identical inputs.
    """
    t0 = time.perf_counter()
    if grid is None:
        grid = build_grid(system, spec)
    step_ok = step_sizes_ok(spec, bounds, config.C)
    n = grid.n_points
    starts = list(range(0, n, chunk_points))
    key = _run_key(system, config, spec)
    done = _load_checkpoint(checkpoint, key)
    todo = [c for c in range(len(starts)) if c not in done]

    def work(c):
        lo = starts[c]
        return c, _chunk_min(system, grid, lo, min(lo + chunk_points, n), config.N)

    results = dict(done)
    sink = open(checkpoint, "a") if checkpoint else None
    try:
        if threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                for c, res in pool.map(work, todo):
                    results[c] = res
                    _write_checkpoint(sink, key, c, res)
        else:
            for c in todo:
                _, res = work(c)
                results[c] = res
                _write_checkpoint(sink, key, c, res)
    finally:
        if sink:
            sink.close()

    best = (math.inf, -1, -1)
    for c in range(len(starts)):
        v = results[c]
        if v[0] < best[0]:
            best = v
    min_value, pi, tj = best
    argmin = {}
    if pi >= 0:
        argmin = {"point": grid.point(pi), "theta": float(grid.thetas[tj])}
    if not step_ok:
        verdict = STEP_SIZE_INVALID
    elif min_value > config.C + config.error_budget:
        verdict = CERTIFIED
    else:
        verdict = GRID_FAILED
    return UEReport(
        verdict=verdict,
        min_value=float(min_value),
        argmin=argmin,
        grid_size=grid.size,
        n_points=grid.n_points,
        n_directions=len(grid.thetas),
        c_m=bounds.c_m,
        c_theta=bounds.c_theta,
        r=spec.r,
        rho=spec.rho,
        threshold=config.C,
        word_length=config.N,
        error_budget=config.error_budget,
        certified_constant=config.C / 4 if verdict == CERTIFIED else None,
        bounds_provenance=bounds.provenance,
        system=system.describe(),
        elapsed_seconds=time.perf_counter() - t0,
    )


def _write_checkpoint(sink, key, c, res):
    if sink is None:
        return
    sink.write(json.dumps({"key": key, "chunk": c, "min": res[0], "point": res[1], "theta": res[2]}) + "\n")
    sink.flush()


def sweep_report_csv(system, config: UEConfig, spec: GridSpec, sink, chunk_points=1024):
    """Write one CSV row per grid pair: chart data, ``theta``, ``F`` and each ``F_i``.

    ``F_i`` columns are per-generator one-step values; ``F`` is the configured
    ``N``-step functional.  Returns the number of rows written.
    """
    grid = build_grid(system, spec)
    d = system.n_generators
    shell = system.kind == "shell"
    head = (["region", "t1", "t2", "x", "y", "z"] if shell else ["t1", "t2"]) + ["theta", "F"]
    head += [f"F_{i + 1}" for i in range(d)]
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(head)
    rows = 0
    th = grid.thetas
    for lo in range(0, grid.n_points, chunk_points):
        hi = min(lo + chunk_points, grid.n_points)
        P = grid.points[lo:hi]
        Fi = generator_values(system, P, th)
        if config.N == 1:
            # same summation order as the sweep so the dumped minimum matches bit for bit
            F = np.zeros(Fi.shape[1:])
            for g in range(d):
                F += system.weights[g] * Fi[g]
        else:
            F = evaluate_F_v(system, np.repeat(P, len(th), axis=0), np.tile(th, len(P)),
                             config.N).reshape(len(P), len(th))
        for i in range(hi - lo):
            n = lo + i
            lead = ([int(grid.region[n]), repr(float(grid.t1[n])), repr(float(grid.t2[n]))]
                    + [repr(float(v)) for v in P[i]]) if shell else \
                [repr(float(grid.t1[n])), repr(float(grid.t2[n]))]
            for j in range(len(th)):
                writer.writerow(lead + [repr(float(th[j])), repr(float(F[i, j]))]
                                + [repr(float(v)) for v in Fi[:, i, j]])
                rows += 1
    return rows
