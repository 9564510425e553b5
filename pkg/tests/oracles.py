"""Independent reference computations used as test oracles.

Nothing here imports the closed forms under test: norms and directions come from
brute-force sampling, derivatives from finite differences, and the counting bound
from a separate transcription using integer arithmetic.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def random_sl2(rng, n, lo=-100.0, hi=100.0, min_norm=1.001):
    """``n`` random det-1 matrices with entries in ``[lo, hi]`` and norm above ``min_norm``."""
    out = []
    while len(out) < n:
        a, b, c = rng.uniform(lo, hi, size=(3, 4 * n))
        ok = np.abs(a) > 1e-3
        d = np.where(ok, (1.0 + b * c) / np.where(ok, a, 1.0), np.inf)
        keep = ok & (d >= lo) & (d <= hi)
        M = np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)[keep]
        M = M[brute_norm_svd(M) > min_norm]
        out.extend(M)
    return np.array(out[:n])


def brute_norm_svd(M):
    return np.linalg.svd(M, compute_uv=False)[..., 0]


def brute_directions(M, n_grid=100_000, chunk=64):
    """Grid argmin direction and grid max of ``|M v|`` over ``n_grid`` directions in ``[0, pi)``."""
    t = np.pi * np.arange(n_grid) / n_grid
    c, s = np.cos(t), np.sin(t)
    argmin = np.empty(len(M))
    vmax = np.empty(len(M))
    for lo in range(0, len(M), chunk):
        A = M[lo:lo + chunk]
        x = A[:, 0, 0, None] * c + A[:, 0, 1, None] * s
        y = A[:, 1, 0, None] * c + A[:, 1, 1, None] * s
        q = x * x + y * y
        argmin[lo:lo + chunk] = t[np.argmin(q, axis=1)]
        vmax[lo:lo + chunk] = np.sqrt(q.max(axis=1))
    return argmin, vmax


def proj_dist(a, b):
    d = np.mod(np.asarray(a) - np.asarray(b), np.pi)
    return np.minimum(d, np.pi - d)


def image_log_norm(M, theta):
    v = np.asarray(M) @ np.array([math.cos(theta), math.sin(theta)])
    return math.log(math.hypot(v[0], v[1]))


def rot(t):
    """``[[cos, sin], [-sin, cos]]``."""
    return np.array([[math.cos(t), math.sin(t)], [-math.sin(t), math.cos(t)]])


def diag(lam):
    return np.diag([lam, 1.0 / lam])


def canonical_product(lam, tau, phi):
    """``a_lam r_phi a_tau``: any product with factor norms ``lam, tau`` and angle ``phi`` is conjugate to it."""
    return diag(lam) @ rot(phi) @ diag(tau)


def min_direction_fine(M):
    """Contracting direction by golden-section refinement of a 4096-point scan."""
    n = 4096
    t = np.pi * np.arange(n) / n
    q = [np.sum((M @ np.array([math.cos(u), math.sin(u)])) ** 2) for u in t]
    i = int(np.argmin(q))
    lo, hi = t[i] - np.pi / n, t[i] + np.pi / n
    g = (math.sqrt(5) - 1) / 2
    f = lambda u: float(np.sum((M @ np.array([math.cos(u), math.sin(u)])) ** 2))
    for _ in range(80):
        a, b = hi - g * (hi - lo), lo + g * (hi - lo)
        if f(a) < f(b):
            hi = b
        else:
            lo = a
    return (0.5 * (lo + hi)) % np.pi


def xi_transcribed(W: int, n: int, delta) -> Fraction:
    """Counting bound via nested loops: sum_i (W-2) prod_{j>i}(W-1) (delta (n-i+1) - i) - n (W^n - (W-1)^n + 1)."""
    d = Fraction(delta)
    acc = Fraction(0)
    for i in range(1, n + 1):
        power = 1
        for _ in range(n - i):
            power *= W - 1
        acc += (W - 2) * power * (d * (n - i + 1) - i)
    wn = 1
    wm = 1
    for _ in range(n):
        wn *= W
        wm *= W - 1
    return acc - n * (wn - wm + 1)


def twist_np(letter, p):
    x, y, z = p
    return {
        "X": np.array([x, z, x * z - y]),
        "Y": np.array([z, y, y * z - x]),
        "x": np.array([x, x * y - z, y]),
        "y": np.array([x * y - z, y, x]),
    }[letter]


def word_np(word, p):
    for c in reversed(word):
        p = twist_np(c, p)
    return p


def numeric_jacobian(f, p, h=1e-6):
    p = np.asarray(p, dtype=float)
    cols = []
    for k in range(len(p)):
        e = np.zeros_like(p)
        e[k] = h
        cols.append((f(p + e) - f(p - e)) / (2 * h))
    return np.stack(cols, axis=1)
