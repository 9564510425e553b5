"""Common interface for finitely supported random surface systems.

A system is a finite list of generators with probability weights.  All
evaluation is batched: points are arrays of shape ``(n, dim)`` and framed
differentials come back as ``(n, 2, 2)`` stacks in orthonormal frames, so
``log_expansion`` of a differential is ``log ||D_P f (theta)||`` in the
system's metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class SurfacePoint:
    """A point on a system's surface together with its chart data.

    ``coords`` are ambient coordinates (``(x, y)`` on the torus, ``(x, y, z)``
    on a shell).  ``region`` is 0 on the torus and the frame region 1..3 on
    a shell; ``t1, t2`` are the chart coordinates used for gridding.
    """

    coords: tuple
    region: int = 0
    t1: float = float("nan")
    t2: float = float("nan")

    def to_dict(self):
        out = {"region": self.region, "t1": self.t1, "t2": self.t2}
        for name, v in zip("xyz", self.coords):
            out[name] = v
        return out


class SurfaceSystem:
    """Base class; subclasses fill in :meth:`step` and the geometry hooks."""

    kind = "abstract"
    dim = 2

    def __init__(self, names, weights, params=None):
        weights = np.asarray(weights, dtype=float)
        if len(names) != len(weights) or len(names) == 0:
            raise ConfigError("need one positive weight per generator")
        if np.any(weights <= 0):
            raise ConfigError("weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ConfigError(f"weights sum to {weights.sum()!r}, not 1")
        self.names = tuple(names)
        self.weights = weights
        self.params = dict(params or {})

    def __len__(self):
        return len(self.names)

    @property
    def n_generators(self):
        return len(self.names)

    def step(self, gen, pts, src_region=None, dst_region=None):
        """Images and framed differentials of generator(s) ``gen`` at ``pts``.

        ``gen`` is an int (same generator for every row) or an int array with one
        entry per row.  ``src_region``/``dst_region`` force the frame choice at the
        source/image (used for per-region derivative estimates); ``None`` means
        the natural frame.
        """
        raise NotImplementedError

    def apply(self, gen, pts):
        return self.step(gen, pts)[0]

    def chart(self, pts):
        """``(region, t1, t2)`` arrays describing where each point sits."""
        raise NotImplementedError

    def charts(self):
        """Chart descriptors consumed by grid construction (see verifier)."""
        raise NotImplementedError

    def lift(self, region, t1, t2):
        """Surface points over chart coordinates ``(t1, t2)`` in ``region``.

        Returns ``(pts, t1, t2)`` restricted to the lifts that exist and belong to
        ``region``; a chart point may lift to several surface points.
        """
        raise NotImplementedError

    def relift(self, region, t1, t2, like):
        """Points over ``(t1, t2)`` on the same sheet as ``like`` (one per row, no filtering)."""
        return self.lift(region, t1, t2)[0]

    def surface_point(self, p):
        p = np.asarray(p, dtype=float).reshape(1, self.dim)
        region, t1, t2 = self.chart(p)
        return SurfacePoint(tuple(float(v) for v in p[0]), int(region[0]), float(t1[0]), float(t2[0]))

    def orbit(self, start, gens):
        """Sequential orbit ``start, g1(start), g2 g1(start), ...``; default uses :meth:`apply`."""
        out = np.empty((len(gens) + 1, self.dim))
        p = np.asarray(start, dtype=float).reshape(1, self.dim)
        out[0] = p[0]
        for n, g in enumerate(gens, 1):
            p = self.apply(int(g), p)
            out[n] = p[0]
        return out

    def describe(self):
        out = {"kind": self.kind, "generators": list(self.names)}
        out.update(self.params)
        return out

    def reordered(self, perm):
        """Same system with generators listed in the order ``perm``."""
        return _Reordered(self, perm)


class _Reordered(SurfaceSystem):
    def __init__(self, base, perm):
        perm = [int(i) for i in perm]
        if sorted(perm) != list(range(len(base))):
            raise ConfigError("perm must be a permutation of the generator indices")
        self._base = base
        self._perm = np.array(perm)
        self.kind = base.kind
        self.dim = base.dim
        super().__init__([base.names[i] for i in perm], base.weights[perm], base.params)

    def step(self, gen, pts, src_region=None, dst_region=None):
        return self._base.step(self._perm[gen], pts, src_region, dst_region)

    def chart(self, pts):
        return self._base.chart(pts)

    def charts(self):
        return self._base.charts()

    def lift(self, region, t1, t2):
        return self._base.lift(region, t1, t2)

    def relift(self, region, t1, t2, like):
        return self._base.relift(region, t1, t2, like)


class ConstantCocycleSystem(SurfaceSystem):
    """Generators that fix every torus point and carry constant differentials.

    Handy as a degenerate reference: the identity-only system has ``F == 0``.
    """

    kind = "torus"
    dim = 2

    def __init__(self, matrices, weights=None, names=None):
        mats = np.asarray(matrices, dtype=float).reshape(-1, 2, 2)
        n = len(mats)
        if weights is None:
            weights = np.full(n, 1.0 / n)
        if names is None:
            names = [f"M{i + 1}" for i in range(n)]
        super().__init__(names, weights, {"system": "constant"})
        self.matrices = mats

    def step(self, gen, pts, src_region=None, dst_region=None):
        pts = np.asarray(pts, dtype=float)
        gen = np.broadcast_to(np.asarray(gen), (len(pts),))
        return pts.copy(), self.matrices[gen]

    def chart(self, pts):
        pts = np.asarray(pts)
        return np.zeros(len(pts), dtype=int), pts[:, 0], pts[:, 1]

    def charts(self):
        return [TORUS_CHART]

    def lift(self, region, t1, t2):
        pts = np.stack([np.mod(t1, 2 * math.pi), np.mod(t2, 2 * math.pi)], axis=-1)
        return pts, np.asarray(t1, dtype=float), np.asarray(t2, dtype=float)


@dataclass(frozen=True)
class Chart:
    """A rectangular chart ``lo <= t1, t2 < hi`` (closed at ``hi`` if ``closed``)."""

    region: int
    lo: float
    hi: float
    closed: bool = field(default=False)


TORUS_CHART = Chart(region=0, lo=0.0, hi=2 * math.pi, closed=False)


def identity_system():
    return ConstantCocycleSystem([np.eye(2)], names=["id"])
