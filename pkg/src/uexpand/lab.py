"""Monte-Carlo experiments: Lyapunov exponents, Birkhoff averages and finite orbits."""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import sl2
from .errors import FrameError, NumericalDriftError, PreconditionError
from .systems.charvar import _I, _J, kappa_v, normal_v, region_v

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
_BLOCK = 4096


def sample_rng(seed, index=None):
    """Generator owned by one sample: keyed on ``(seed, index)``, independent of thread layout."""
    key = () if index is None else (int(index),)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


@dataclass
class LyapunovEstimate:
    mean: float
    stderr: float
    n_steps: int
    n_samples: int
    seed: int
    discarded: int = 0
    samples: list = field(default_factory=list)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


@dataclass
class EquidistributionReport:
    averages: dict
    references: dict
    discrepancies: dict
    n_steps: int
    seed: int
    running: list = field(default_factory=list)
    note: str = "time average along one sampled word"

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def lyapunov_lower_bound(C: float, N: int) -> float:
    """Exponent floor ``C/N`` implied by uniform expansion with constant ``C`` at word length ``N``."""
    if N < 1:
        raise PreconditionError("N must be >= 1")
    return C / N


# ---------------------------------------------------------------------------
# Lyapunov exponents


def _safe_step(system, gens, P, theta, alive):
    """One cocycle step on live rows; rows whose frame or surface check fails are killed."""
    idx = np.flatnonzero(alive)
    try:
        Q, mats = system.step(gens[idx], P[idx])
        inc, th = sl2.step_log_growth_v(mats, theta[idx])
        P[idx], theta[idx] = Q, th
        out = np.zeros(len(P))
        out[idx] = inc
        return out
    except (FrameError, NumericalDriftError):
        pass
    out = np.zeros(len(P))
    for i in idx:
        try:
            Q, mats = system.step(gens[i:i + 1], P[i:i + 1])
            inc, th = sl2.step_log_growth_v(mats, theta[i:i + 1])
        except (FrameError, NumericalDriftError) as exc:
            log.warning("sample row %d discarded: %s", i, exc)
            alive[i] = False
            continue
        P[i], theta[i], out[i] = Q[0], th[0], inc[0]
    return out


def _run_samples(system, start, start_dir, n_steps, seed, indices, trajectory=None):
    m = len(indices)
    P = np.repeat(np.asarray(start, dtype=float).reshape(1, system.dim), m, axis=0)
    theta = np.full(m, float(start_dir))
    total = np.zeros(m)
    alive = np.ones(m, dtype=bool)
    rngs = [sample_rng(seed, i) for i in indices]
    d = system.n_generators
    done = 0
    while done < n_steps:
        b = min(_BLOCK, n_steps - done)
        gens = np.stack([r.choice(d, size=b, p=system.weights) for r in rngs])
        for t in range(b):
            total += _safe_step(system, gens[:, t], P, theta, alive)
            if trajectory is not None and alive[0]:
                trajectory.append((done + t + 1, *P[0].tolist(), float(theta[0]), float(total[0])))
        done += b
    return total / n_steps, alive


def estimate_top_lyapunov(system, start, start_dir: float, n_steps: int, n_samples: int, seed: int,
                          threads: int = 1, trajectory_sink=None) -> LyapunovEstimate:
    """Mean and standard error of ``(1/n) log |D f^n (start_dir)|`` over random words.

    Samples advance together as rows of one array.  With ``threads > 1`` the sample
    set is split into contiguous blocks; every sample draws from its own stream so
    the output does not depend on the split.  ``trajectory_sink`` receives the CSV
    path of sample 0.
    """
    if n_steps < 1 or n_samples < 1:
        raise PreconditionError("n_steps and n_samples must be >= 1")
    traj = [] if trajectory_sink is not None else None
    blocks = np.array_split(np.arange(n_samples), max(1, min(threads, n_samples)))
    if len(blocks) == 1:
        parts = [_run_samples(system, start, start_dir, n_steps, seed, blocks[0], traj)]
    else:
        with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
            parts = list(pool.map(
                lambda ib: _run_samples(system, start, start_dir, n_steps, seed, ib[1],
                                        traj if ib[0] == 0 else None),
                enumerate(blocks)))
    vals = np.concatenate([p[0] for p in parts])
    alive = np.concatenate([p[1] for p in parts])
    kept = vals[alive]
    if traj is not None:
        write_trajectory_csv(trajectory_sink, traj, system.dim)
    if len(kept) == 0:
        raise FrameError("every sample hit a singular frame")
    stderr = float(kept.std(ddof=1) / math.sqrt(len(kept))) if len(kept) > 1 else 0.0
    return LyapunovEstimate(
        mean=float(kept.mean()),
        stderr=stderr,
        n_steps=n_steps,
        n_samples=n_samples,
        seed=int(seed),
        discarded=int((~alive).sum()),
        samples=[float(v) for v in vals],
    )


def write_trajectory_csv(sink, rows, dim):
    head = ["step", "x", "y"] + (["z"] if dim == 3 else []) + ["theta", "log_growth"]
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(head)
    for row in rows:
        w.writerow([row[0]] + [repr(v) for v in row[1:]])


def log_growth_along(system, start, theta: float, gens) -> float:
    """Telescoped log growth of ``theta`` along the generator sequence ``gens``."""
    P = np.asarray(start, dtype=float).reshape(1, system.dim)
    th = np.array([float(theta)])
    total = 0.0
    for g in gens:
        P, mats = system.step(int(g), P)
        inc, th = sl2.step_log_growth_v(mats, th)
        total += float(inc[0])
    return total


# ---------------------------------------------------------------------------
# Birkhoff averages


def _observable_table(kind):
    if kind == "shell":
        return {
            "one": lambda P: np.ones(len(P)),
            "x": lambda P: P[:, 0],
            "y": lambda P: P[:, 1],
            "z": lambda P: P[:, 2],
            "x2": lambda P: P[:, 0] ** 2,
            "xyz": lambda P: P[:, 0] * P[:, 1] * P[:, 2],
            "kappa": kappa_v,
        }
    return {
        "one": lambda P: np.ones(len(P)),
        "cos_x": lambda P: np.cos(P[:, 0]),
        "cos_y": lambda P: np.cos(P[:, 1]),
        "sin_x": lambda P: np.sin(P[:, 0]),
        "sin_y": lambda P: np.sin(P[:, 1]),
        "cos_x_plus_y": lambda P: np.cos(P[:, 0] + P[:, 1]),
        "cos_2x": lambda P: np.cos(2 * P[:, 0]),
    }


def named_observables(system, names=None):
    table = _observable_table(system.kind)
    if names is None:
        names = [n for n in table if n != "one"]
    missing = [n for n in names if n not in table]
    if missing:
        raise PreconditionError(f"unknown observables {missing}; choose from {sorted(table)}")
    return {n: table[n] for n in names}


def shell_reference_points(s: float, n_per_axis: int = 400):
    """Quadrature nodes and weights for the invariant area on ``kappa = s``.

    In the chart of region ``k`` the density is ``1/|n_k|``; nodes are midpoints of
    an ``n_per_axis`` square lattice on ``[-2, 2]^2``, lifted to both roots and kept
    where the region matches.  Weights are normalized to sum to 1.
    """
    h = 4.0 / n_per_axis
    t = -2.0 + h * (np.arange(n_per_axis) + 0.5)
    A, B = np.meshgrid(t, t, indexing="ij")
    A, B = A.ravel(), B.ravel()
    pts, wts = [], []
    for k in range(3):
        disc = A * A * B * B - 4.0 * (A * A + B * B - 2.0 - s)
        ok = disc > 0.0
        a, b, sq = A[ok], B[ok], np.sqrt(disc[ok])
        for sgn in (-1.0, 1.0):
            u = 0.5 * (a * b + sgn * sq)
            P = np.empty((len(a), 3))
            P[:, _I[k]], P[:, _J[k]], P[:, k] = a, b, u
            keep = (np.abs(u) <= 2.0) & (region_v(P) == k)
            pts.append(P[keep])
            wts.append(1.0 / np.abs(normal_v(P[keep])[:, k]))
    P = np.concatenate(pts)
    w = np.concatenate(wts)
    return P, w / w.sum()


def reference_integrals(system, observables, n_quad: int = 400):
    """Integrals against the natural invariant probability (Lebesgue on the torus)."""
    if system.kind == "shell":
        P, w = shell_reference_points(system.s, n_quad)
    else:
        h = TWO_PI / n_quad
        t = h * np.arange(n_quad)
        X, Y = np.meshgrid(t, t, indexing="ij")
        P = np.column_stack([X.ravel(), Y.ravel()])
        w = np.full(len(P), 1.0 / len(P))
    return {name: float(np.dot(w, phi(P))) for name, phi in observables.items()}


def birkhoff_equidistribution(system, start, observables, n_steps: int, seed: int,
                              references=None, checkpoints=None) -> EquidistributionReport:
    """Time averages of ``observables`` along one random orbit of length ``n_steps``.

    ``observables`` maps names to vectorized callables on point arrays.  The orbit
    points ``x_0 .. x_{n-1}`` enter the average.  Running averages are recorded at
    ``checkpoints`` (default: powers of ten up to ``n_steps``).
    """
    if n_steps < 1:
        raise PreconditionError("n_steps must be >= 1")
    rng = sample_rng(seed)
    gens = rng.choice(system.n_generators, size=n_steps, p=system.weights)
    orbit = system.orbit(np.asarray(start, dtype=float), gens)[:n_steps]
    if references is None:
        references = reference_integrals(system, observables)
    if checkpoints is None:
        checkpoints = [10 ** k for k in range(1, int(math.log10(n_steps)) + 1)]
        if not checkpoints or checkpoints[-1] != n_steps:
            checkpoints.append(n_steps)
    averages, running = {}, []
    cums = {}
    for name, phi in observables.items():
        vals = phi(orbit)
        cums[name] = np.cumsum(vals)
        averages[name] = float(cums[name][-1] / n_steps)
    for c in checkpoints:
        running.append({"n": int(c), **{name: float(cums[name][c - 1] / c) for name in observables}})
    disc = {name: abs(averages[name] - references[name]) for name in observables}
    return EquidistributionReport(
        averages=averages,
        references={k: float(references[k]) for k in observables},
        discrepancies=disc,
        n_steps=n_steps,
        seed=int(seed),
        running=running,
    )


# ---------------------------------------------------------------------------
# finite orbits


def detect_finite_orbit(system, start, max_points: int = 10_000, match_tol: float = 1e-8):
    """Size of the orbit of ``start`` under all generators, or ``None`` past ``max_points``.

    Points closer than ``match_tol`` in every coordinate (circularly on the torus)
    are identified, via a hash of ``match_tol``-cells and their neighbours.
    """
    if not match_tol > 0:
        raise ValueError("match_tol must be positive; exact matching of floats is meaningless")
    torus = system.kind == "torus"
    dim = system.dim
    period = int(math.floor(TWO_PI / match_tol)) + 1 if torus else None
    offsets = np.array(np.meshgrid(*[[-1, 0, 1]] * dim, indexing="ij")).reshape(dim, -1).T
    table: dict = {}
    seen: list = []

    def cell(p):
        c = np.floor(p / match_tol).astype(np.int64)
        return c % period if torus else c

    def close(p, q):
        d = np.abs(p - q)
        if torus:
            d = np.minimum(d, TWO_PI - d)
        return bool(np.all(d <= match_tol))

    def find(p):
        c = cell(p)
        for off in offsets:
            key = tuple(((c + off) % period) if torus else (c + off))
            for j in table.get(key, ()):
                if close(p, seen[j]):
                    return j
        return -1

    def add(p):
        table.setdefault(tuple(cell(p)), []).append(len(seen))
        seen.append(p)

    p0 = np.asarray(start, dtype=float)
    if torus:
        p0 = np.mod(p0, TWO_PI)
    add(p0)
    frontier = deque([p0])
    while frontier:
        batch = np.array(frontier)
        frontier.clear()
        for g in range(system.n_generators):
            imgs = system.apply(g, batch)
            for q in imgs:
                if find(q) < 0:
                    add(q)
                    if len(seen) > max_points:
                        return None
                    frontier.append(q)
    return len(seen)
