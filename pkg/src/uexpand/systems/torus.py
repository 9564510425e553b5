"""Discretely perturbed standard map on the 2-torus.

Coordinates are those in which the standard map reads
``F(x, y) = (L sin x + 2x - y, x)``; a generator first shifts ``x`` by a
fixed offset ``omega``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..sl2 import Mat2
from .base import TORUS_CHART, SurfaceSystem

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

# desk-scale defaults
DEFAULT_L = 1000.0
DEFAULT_EPSILON = 0.035
DEFAULT_R = 12


@dataclass(frozen=True)
class TorusPoint:
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x) % TWO_PI)
        object.__setattr__(self, "y", float(self.y) % TWO_PI)

    def as_tuple(self):
        return (self.x, self.y)


def std_apply(L: float, omega: float, p: TorusPoint) -> TorusPoint:
    x = p.x + omega
    return TorusPoint(L * math.sin(x) + 2.0 * x - p.y, x)


def std_diff(L: float, omega: float, p: TorusPoint) -> Mat2:
    return Mat2.shear(L * math.cos(p.x + omega) + 2.0)


def omega_set(epsilon: float, r: int, L: float | None = None, delta: float = 0.5):
    """Offsets ``k * epsilon`` for ``k = -r..r``.

    With ``L`` given, warns when ``epsilon`` leaves ``[L^(delta-1), 1/(2r+1))``.
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    if L is not None and not (L ** (delta - 1.0) <= epsilon < 1.0 / (2 * r + 1)):
        log.warning(
            "epsilon=%g outside [L^(delta-1), 1/(2r+1)) = [%g, %g)",
            epsilon, L ** (delta - 1.0), 1.0 / (2 * r + 1),
        )
    return [k * epsilon for k in range(-r, r + 1)]


class StandardMapSystem(SurfaceSystem):
    """Uniform measure on ``{F o S_omega : omega in Omega}``."""

    kind = "torus"
    dim = 2

    def __init__(self, L=DEFAULT_L, epsilon=DEFAULT_EPSILON, r=DEFAULT_R, delta=0.5):
        self.L = float(L)
        self.epsilon = float(epsilon)
        self.r = int(r)
        self.omegas = np.array(omega_set(epsilon, r, L=L, delta=delta))
        n = len(self.omegas)
        names = [f"F_{k}eps" if k else "F_0" for k in range(-self.r, self.r + 1)]
        super().__init__(names, np.full(n, 1.0 / n),
                         {"system": "std", "L": self.L, "epsilon": self.epsilon, "omega_r": self.r})

    def step(self, gen, pts, src_region=None, dst_region=None):
        pts = np.asarray(pts, dtype=float)
        om = self.omegas[gen]
        x = pts[:, 0] + om
        new = np.empty_like(pts)
        new[:, 0] = np.mod(self.L * np.sin(x) + 2.0 * x - pts[:, 1], TWO_PI)
        new[:, 1] = np.mod(x, TWO_PI)
        mats = np.empty((len(pts), 2, 2))
        mats[:, 0, 0] = self.L * np.cos(x) + 2.0
        mats[:, 0, 1] = -1.0
        mats[:, 1, 0] = 1.0
        mats[:, 1, 1] = 0.0
        return new, mats

    def chart(self, pts):
        pts = np.asarray(pts)
        return np.zeros(len(pts), dtype=int), pts[:, 0], pts[:, 1]

    def charts(self):
        return [TORUS_CHART]

    def lift(self, region, t1, t2):
        t1 = np.asarray(t1, dtype=float)
        t2 = np.asarray(t2, dtype=float)
        return np.stack([np.mod(t1, TWO_PI), np.mod(t2, TWO_PI)], axis=-1), t1, t2

    def orbit(self, start, gens):
        L = self.L
        oms = self.omegas[np.asarray(gens, dtype=int)].tolist()
        xs = [0.0] * (len(oms) + 1)
        ys = [0.0] * (len(oms) + 1)
        x, y = float(start[0]), float(start[1])
        xs[0], ys[0] = x, y
        sin = math.sin
        for n, om in enumerate(oms, 1):
            u = x + om
            x, y = (L * sin(u) + 2.0 * u - y) % TWO_PI, u % TWO_PI
            xs[n], ys[n] = x, y
        return np.column_stack([xs, ys])


def std_system(L=DEFAULT_L, epsilon=DEFAULT_EPSILON, r=DEFAULT_R, delta=0.5):
    return StandardMapSystem(L, epsilon, r, delta)
