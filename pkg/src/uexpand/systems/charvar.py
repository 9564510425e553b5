"""Out(F2) acting on an SU(2) relative character variety in trace coordinates.

The shell ``X_s = {kappa = s}`` with ``kappa(x, y, z) = x^2 + y^2 + z^2 - xyz - 2``
carries the invariant area form ``dx ^ dy / n_3`` (equivalently
``dy ^ dz / n_1 = dz ^ dx / n_2``) where ``n = grad kappa``.

Tangent frames: at ``P`` let ``k`` maximize ``|n_k(P)|`` (ties to the smaller
index) and ``(i, j, k)`` be the even permutation ending in ``k``.  The frame is
``e1 = v_i / sqrt|n_k|``, ``e2 = sgn(n_k) v_j / sqrt|n_k|`` with ``v_m = n x e_m``.
The sign makes ``omega(e1, e2) = 1`` in every region, so framed differentials
have determinant exactly 1.  Chart coordinates in region ``k`` are
``(t1, t2) = (P_i, P_j)``.

Words are strings over ``X, Y`` (the twists) and ``x, y`` (their inverses),
applied rightmost letter first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import FrameError, NumericalDriftError, PreconditionError
from ..sl2 import Mat2
from .base import Chart, SurfaceSystem

SURFACE_TOL = 1e-9
_REPROJECT_TOL = 1e-12
COORD_TOL = 1e-9
FRAME_TOL = 1e-8

# region index k (0-based) -> (i, j) with (i, j, k) an even permutation
_EVEN = {0: (1, 2), 1: (2, 0), 2: (0, 1)}
_I = np.array([_EVEN[k][0] for k in range(3)])
_J = np.array([_EVEN[k][1] for k in range(3)])

LETTERS = "XYxy"
_INVERSE_LETTER = {"X": "x", "Y": "y", "x": "X", "y": "Y"}

# the eight forward generators; the other eight are their inverses (f_i = f_{17-i}^-1)
FORWARD_WORDS = (
    "XXXXY", "XXXYY", "XXYYY", "XYYYY",
    "YXXXX", "YYXXX", "YYYXX", "YYYYX",
)


# ---------------------------------------------------------------------------
# scalar surface


def kappa(p) -> float:
    x, y, z = p
    return x * x + y * y + z * z - x * y * z - 2.0


@dataclass(frozen=True)
class TracePoint:
    """A point ``(x, y, z)`` of the shell ``kappa = s``."""

    x: float
    y: float
    z: float
    s: float
    surface_tol: float = SURFACE_TOL

    def __post_init__(self):
        k = kappa((self.x, self.y, self.z))
        if abs(k - self.s) > self.surface_tol:
            raise NumericalDriftError(f"kappa = {k!r} differs from shell s = {self.s!r}")
        for v in (self.x, self.y, self.z):
            if abs(v) > 2.0 + COORD_TOL:
                raise NumericalDriftError(f"coordinate {v!r} outside [-2, 2]")

    @classmethod
    def from_xyz(cls, x, y, z):
        return cls(float(x), float(y), float(z), kappa((x, y, z)))

    def as_tuple(self):
        return (self.x, self.y, self.z)


def solve_third_coordinate(x: float, y: float, s: float):
    """Roots ``z`` in [-2, 2] of ``kappa(x, y, z) = s``, ascending.

    The equation is symmetric in the three coordinates, so this also solves for
    an ``x`` or ``y`` given the other two.
    """
    disc = x * x * y * y - 4.0 * (x * x + y * y - 2.0 - s)
    if disc < 0.0:
        return []
    sq = math.sqrt(disc)
    roots = sorted({0.5 * (x * y - sq), 0.5 * (x * y + sq)})
    return [z for z in roots if abs(z) <= 2.0 + COORD_TOL]


def _twist_tuple(letter, x, y, z):
    if letter == "X":
        return x, z, x * z - y
    if letter == "Y":
        return z, y, y * z - x
    if letter == "x":
        return x, x * y - z, y
    if letter == "y":
        return x * y - z, y, x
    raise ValueError(f"unknown letter {letter!r}")


def twist_apply(letter: str, p: TracePoint) -> TracePoint:
    q = _twist_tuple(letter, p.x, p.y, p.z)
    q = _reproject(np.array(q), p.s)
    return TracePoint(float(q[0]), float(q[1]), float(q[2]), p.s)


@dataclass(frozen=True)
class MapWord:
    """A nonempty word in the twists, applied rightmost letter first."""

    letters: str

    def __post_init__(self):
        if not self.letters:
            raise ValueError("words must be nonempty")
        bad = set(self.letters) - set(LETTERS)
        if bad:
            raise ValueError(f"unknown letters {sorted(bad)}")

    def inverse(self) -> "MapWord":
        return MapWord("".join(_INVERSE_LETTER[c] for c in reversed(self.letters)))

    def __mul__(self, other: "MapWord") -> "MapWord":
        """``u * v`` is the composition ``u o v`` (``v`` acts first)."""
        return MapWord(self.letters + other.letters)

    def __len__(self):
        return len(self.letters)

    def __str__(self):
        return "tau_" + self.letters


def word_apply(w: MapWord, p: TracePoint) -> TracePoint:
    for c in reversed(w.letters):
        p = twist_apply(c, p)
    return p


def normal(p):
    x, y, z = p.as_tuple() if isinstance(p, TracePoint) else p
    return (2.0 * x - y * z, 2.0 * y - z * x, 2.0 * z - x * y)


@dataclass(frozen=True)
class Frame:
    """Orthonormal tangent frame at a shell point.

    ``region`` is 1-based.  ``e1``/``e2`` are the normalized basis vectors in R^3;
    ``scale`` is ``sqrt|n_k(P)|`` and ``sign`` the sign of ``n_k(P)``.
    """

    region: int
    e1: tuple
    e2: tuple
    scale: float
    sign: float

    def coords(self, w):
        """Coordinates of a tangent vector ``w`` (in R^3) in this frame."""
        i, j = _EVEN[self.region - 1]
        # v_i has j-component n_k and i-component 0; v_j has i-component -n_k
        return (self.sign * w[j] / self.scale, -w[i] / self.scale)


def frame(p) -> Frame:
    P = np.asarray(p.as_tuple() if isinstance(p, TracePoint) else p, dtype=float)
    nvec = np.asarray(normal(tuple(P)))
    if np.linalg.norm(nvec) < FRAME_TOL:
        raise FrameError(f"normal vanishes at {tuple(P)}")
    k = int(np.argmax(np.abs(nvec)))
    i, j = _EVEN[k]
    vi = np.cross(nvec, np.eye(3)[i])
    vj = np.cross(nvec, np.eye(3)[j])
    scale = math.sqrt(abs(nvec[k]))
    sigma = math.copysign(1.0, nvec[k])
    return Frame(k + 1, tuple(vi / scale), tuple(sigma * vj / scale), scale, sigma)


def twist_jacobian(letter, p):
    """3x3 derivative of a single twist (or inverse twist) at ``p``."""
    x, y, z = p
    if letter == "X":
        return np.array([[1.0, 0, 0], [0, 0, 1.0], [z, -1.0, x]])
    if letter == "Y":
        return np.array([[0, 0, 1.0], [0, 1.0, 0], [-1.0, z, y]])
    if letter == "x":
        return np.array([[1.0, 0, 0], [y, x, -1.0], [0, 1.0, 0]])
    if letter == "y":
        return np.array([[y, x, -1.0], [0, 1.0, 0], [1.0, 0, 0]])
    raise ValueError(f"unknown letter {letter!r}")


def word_jacobian(w: MapWord, p) -> np.ndarray:
    P = np.asarray(p.as_tuple() if isinstance(p, TracePoint) else p, dtype=float)
    J = np.eye(3)
    for c in reversed(w.letters):
        J = twist_jacobian(c, P) @ J
        P = np.array(_twist_tuple(c, *P))
    return J


def word_diff(p: TracePoint, w: MapWord) -> Mat2:
    """Framed 2x2 differential of ``w`` at ``p`` (frame at ``p`` to frame at ``w(p)``)."""
    src = frame(p)
    step = 0
    q = p
    try:
        for step, c in enumerate(reversed(w.letters), 1):
            q = twist_apply(c, q)
            frame(q)
    except FrameError as exc:
        raise FrameError(f"singular frame after step {step} of {w}", word=str(w), step=step) from exc
    dst = frame(q)
    J = word_jacobian(w, p)
    c1 = dst.coords(J @ np.asarray(src.e1))
    c2 = dst.coords(J @ np.asarray(src.e2))
    return Mat2(c1[0], c2[0], c1[1], c2[1])


def generator_set_16():
    """The 16 words ``f_1..f_16`` (``f_i = f_{17-i}^-1``) with uniform weights."""
    fwd = [MapWord(s) for s in FORWARD_WORDS]
    words = fwd + [w.inverse() for w in reversed(fwd)]
    return [(w, 1.0 / 16.0) for w in words]


# ---------------------------------------------------------------------------
# vectorized kernels on point arrays of shape (n, 3)


def kappa_v(P):
    x, y, z = P[..., 0], P[..., 1], P[..., 2]
    return x * x + y * y + z * z - x * y * z - 2.0


def normal_v(P):
    x, y, z = P[..., 0], P[..., 1], P[..., 2]
    return np.stack([2.0 * x - y * z, 2.0 * y - z * x, 2.0 * z - x * y], axis=-1)


def _reproject(P, s):
    """One Newton step back onto ``kappa = s`` where float drift exceeds 1e-12.

    Raises when the drift is beyond the surface tolerance.
    """
    err = kappa_v(P) - s
    aerr = np.abs(err)
    if np.any(aerr > SURFACE_TOL):
        raise NumericalDriftError(f"kappa drift {float(np.max(aerr))!r} exceeds {SURFACE_TOL}")
    if np.any(aerr > _REPROJECT_TOL):
        n = normal_v(P)
        fix = aerr > _REPROJECT_TOL
        nn = np.sum(n * n, axis=-1)
        corr = np.where(fix, err / np.where(nn > 0, nn, 1.0), 0.0)
        P = P - corr[..., None] * n
    if np.any(np.abs(P) > 2.0 + COORD_TOL):
        raise NumericalDriftError("coordinate left [-2, 2]")
    return P


def twist_v(letter, P):
    x, y, z = P[:, 0], P[:, 1], P[:, 2]
    if letter == "X":
        return np.stack([x, z, x * z - y], axis=-1)
    if letter == "Y":
        return np.stack([z, y, y * z - x], axis=-1)
    if letter == "x":
        return np.stack([x, x * y - z, y], axis=-1)
    if letter == "y":
        return np.stack([x * y - z, y, x], axis=-1)
    raise ValueError(f"unknown letter {letter!r}")


def twist_push_v(letter, P, W):
    """Push tangent vectors ``W`` (shape ``(n, 3)``) by the twist derivative at ``P``."""
    x, y, z = P[:, 0], P[:, 1], P[:, 2]
    a, b, c = W[:, 0], W[:, 1], W[:, 2]
    if letter == "X":
        return np.stack([a, c, z * a - b + x * c], axis=-1)
    if letter == "Y":
        return np.stack([c, b, -a + z * b + y * c], axis=-1)
    if letter == "x":
        return np.stack([a, y * a + x * b - c, b], axis=-1)
    if letter == "y":
        return np.stack([y * a + x * b - c, b, a], axis=-1)
    raise ValueError(f"unknown letter {letter!r}")


def _letter_rows_v(codes, P, W1, W2):
    """Apply per-row letters (``codes`` index into LETTERS)."""
    outP = np.empty_like(P)
    out1 = np.empty_like(W1)
    out2 = np.empty_like(W2)
    for li, letter in enumerate(LETTERS):
        m = codes == li
        if not np.any(m):
            continue
        out1[m] = twist_push_v(letter, P[m], W1[m])
        out2[m] = twist_push_v(letter, P[m], W2[m])
        outP[m] = twist_v(letter, P[m])
    return outP, out1, out2


def region_v(P):
    """0-based frame region of each point (argmax |n_k|, first index on ties)."""
    return np.argmax(np.abs(normal_v(P)), axis=-1)


def frame_v(P, region=None):
    """Frame vectors ``(e1, e2, scale, sigma, region)`` for an array of points."""
    n = normal_v(P)
    if np.any(np.linalg.norm(n, axis=-1) < FRAME_TOL):
        raise FrameError("normal vanishes at some point")
    k = np.argmax(np.abs(n), axis=-1) if region is None else np.broadcast_to(region, (len(P),))
    rows = np.arange(len(P))
    nk = n[rows, k]
    if np.any(nk == 0.0):
        raise FrameError("forced frame region has n_k = 0")
    scale = np.sqrt(np.abs(nk))
    sigma = np.where(nk > 0, 1.0, -1.0)
    eye = np.eye(3)
    vi = np.cross(n, eye[_I[k]])
    vj = np.cross(n, eye[_J[k]])
    e1 = vi / scale[:, None]
    e2 = (sigma / scale)[:, None] * vj
    return e1, e2, scale, sigma, k


def frame_coords_v(W, scale, sigma, k):
    rows = np.arange(len(W))
    wi = W[rows, _I[k]]
    wj = W[rows, _J[k]]
    return sigma * wj / scale, -wi / scale


def word_step_v(word, P, s, src_region=None, dst_region=None):
    """Images and framed differentials of one word at every row of ``P``.

    ``word`` is a string (same word for all rows) or a sequence of strings of equal
    length, one per row.
    """
    P = np.asarray(P, dtype=float)
    e1, e2, _, _, _ = frame_v(P, src_region)
    W1, W2 = e1, e2
    if isinstance(word, str):
        for c in reversed(word):
            W1 = twist_push_v(c, P, W1)
            W2 = twist_push_v(c, P, W2)
            P = _reproject(twist_v(c, P), s)
    else:
        codes = np.array([[LETTERS.index(c) for c in w] for w in word])
        for pos in range(codes.shape[1] - 1, -1, -1):
            P, W1, W2 = _letter_rows_v(codes[:, pos], P, W1, W2)
            P = _reproject(P, s)
    _, _, scale, sigma, k = frame_v(P, dst_region)
    a, c = frame_coords_v(W1, scale, sigma, k)
    b, d = frame_coords_v(W2, scale, sigma, k)
    mats = np.empty((len(P), 2, 2))
    mats[:, 0, 0] = a
    mats[:, 0, 1] = b
    mats[:, 1, 0] = c
    mats[:, 1, 1] = d
    return P, mats


class CharacterVarietySystem(SurfaceSystem):
    """Uniform measure on the 16 five-letter generators acting on ``X_s``."""

    kind = "shell"
    dim = 3

    def __init__(self, s=1.99, words=None):
        if not -2.0 <= s < 2.0:
            raise PreconditionError("shell parameter must lie in [-2, 2)")
        self.s = float(s)
        gens = generator_set_16() if words is None else [(MapWord(w), 1.0 / len(words)) for w in words]
        self.words = [w for w, _ in gens]
        super().__init__([str(w) for w in self.words], [c for _, c in gens],
                         {"system": "cv", "s": self.s})
        self._letters = [w.letters for w in self.words]

    def step(self, gen, pts, src_region=None, dst_region=None):
        pts = np.asarray(pts, dtype=float)
        if np.ndim(gen) == 0:
            return word_step_v(self._letters[int(gen)], pts, self.s, src_region, dst_region)
        gen = np.asarray(gen)
        uniq = np.unique(gen)
        if len(uniq) == 1:
            return word_step_v(self._letters[int(uniq[0])], pts, self.s, src_region, dst_region)
        if len({len(self._letters[g]) for g in uniq}) == 1:
            return word_step_v([self._letters[g] for g in gen], pts, self.s, src_region, dst_region)
        out_p = np.empty_like(pts)
        out_m = np.empty((len(pts), 2, 2))
        for g in uniq:
            m = gen == g
            sr = None if src_region is None else np.broadcast_to(src_region, (len(pts),))[m]
            dr = None if dst_region is None else np.broadcast_to(dst_region, (len(pts),))[m]
            out_p[m], out_m[m] = word_step_v(self._letters[int(g)], pts[m], self.s, sr, dr)
        return out_p, out_m

    def chart(self, pts):
        P = np.asarray(pts, dtype=float)
        k = region_v(P)
        rows = np.arange(len(P))
        return k + 1, P[rows, _I[k]], P[rows, _J[k]]

    def charts(self):
        return [Chart(region=k, lo=-2.0, hi=2.0, closed=True) for k in (1, 2, 3)]

    def lift(self, region, t1, t2, branch=None):
        """Lift chart points of a 1-based region to the shell (both roots unless ``branch``)."""
        k = int(region) - 1
        t1 = np.asarray(t1, dtype=float)
        t2 = np.asarray(t2, dtype=float)
        disc = t1 * t1 * t2 * t2 - 4.0 * (t1 * t1 + t2 * t2 - 2.0 - self.s)
        ok = disc >= 0.0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        pts_all, a_all, b_all = [], [], []
        branches = (-1.0, 1.0) if branch is None else (float(branch),)
        for sgn in branches:
            u = 0.5 * (t1 * t2 + sgn * sq)
            keep = ok & (np.abs(u) <= 2.0)
            if sgn > 0 and branch is None:
                keep &= sq > 0.0  # double root already taken
            P = np.empty((int(keep.sum()), 3))
            P[:, _I[k]] = t1[keep]
            P[:, _J[k]] = t2[keep]
            P[:, k] = u[keep]
            pts_all.append(P)
            a_all.append(t1[keep])
            b_all.append(t2[keep])
        P = np.concatenate(pts_all)
        a = np.concatenate(a_all)
        b = np.concatenate(b_all)
        mine = region_v(P) == k
        return P[mine], a[mine], b[mine]

    def relift(self, region, t1, t2, like):
        k = int(region) - 1
        like = np.asarray(like, dtype=float)
        t1 = np.asarray(t1, dtype=float)
        t2 = np.asarray(t2, dtype=float)
        sgn = np.where(2.0 * like[:, k] - like[:, _I[k]] * like[:, _J[k]] >= 0.0, 1.0, -1.0)
        disc = t1 * t1 * t2 * t2 - 4.0 * (t1 * t1 + t2 * t2 - 2.0 - self.s)
        P = np.empty((len(t1), 3))
        P[:, _I[k]] = t1
        P[:, _J[k]] = t2
        P[:, k] = 0.5 * (t1 * t2 + sgn * np.sqrt(np.where(disc >= 0.0, disc, np.nan)))
        return P

    def orbit(self, start, gens):
        out = np.empty((len(gens) + 1, 3))
        x, y, z = (float(v) for v in start)
        out[0] = (x, y, z)
        words = [tuple(reversed(w)) for w in self._letters]
        tw = _twist_tuple
        for n, g in enumerate(gens, 1):
            for c in words[g]:
                x, y, z = tw(c, x, y, z)
            out[n] = (x, y, z)
            if n % 64 == 0:
                # keep float drift away from the surface bounded
                out[n] = _reproject(out[n][None, :], self.s)[0]
                x, y, z = out[n]
        return out

    def random_points(self, n, rng):
        """``n`` points of the shell, via random chart points in random regions."""
        got = []
        total = 0
        while total < n:
            m = max(2 * (n - total), 64)
            region = rng.integers(1, 4, size=m)
            t = rng.uniform(-2.0, 2.0, size=(m, 2))
            branch = rng.choice([-1.0, 1.0], size=m)
            for k in (1, 2, 3):
                sel = region == k
                for b in (-1.0, 1.0):
                    sb = sel & (branch == b)
                    P, _, _ = self.lift(k, t[sb, 0], t[sb, 1], branch=b)
                    got.append(P)
                    total += len(P)
        P = np.concatenate(got)
        return P[rng.permutation(len(P))[:n]]


def cv_system(s=1.99):
    return CharacterVarietySystem(s)
