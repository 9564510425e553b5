"""Closed-form projective geometry of SL(2, R).

Directions on the projective line are plain floats in ``[0, pi)``.  Every
function here is pure.  The scalar API works on :class:`Mat2`; the ``*_v``
variants take stacked arrays of shape ``(..., 2, 2)`` and are what the grid
sweeps use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DirectionUndefinedError,
    InvalidMatrixError,
    PreconditionError,
    SingularConfigurationError,
)

DET_TOL = 1e-9
DIR_TOL = 1e-6
# below this |det - 1| a matrix is kept as is; between this and DET_TOL it is rescaled
_RENORM_TOL = 1e-12

PI = math.pi


def wrap_angle(theta):
    """Reduce an angle (scalar or array) to the projective range ``[0, pi)``."""
    t = np.mod(theta, PI)
    if np.ndim(t) == 0:
        t = float(t)
        return 0.0 if t >= PI else t
    return np.where(t >= PI, 0.0, t)


def projective_distance(t1, t2):
    """Distance on R/piZ: ``min(|d|, pi - |d|)``."""
    d = np.abs(np.mod(np.asarray(t1) - np.asarray(t2), PI))
    out = np.minimum(d, PI - d)
    return float(out) if out.ndim == 0 else out


def signed_angle_difference(t1, t2):
    """Representative of ``t1 - t2`` in ``[-pi/2, pi/2)``."""
    d = np.mod(np.asarray(t1) - np.asarray(t2) + PI / 2, PI) - PI / 2
    return float(d) if d.ndim == 0 else d


@dataclass(frozen=True)
class Mat2:
    """A 2x2 area-preserving real matrix ``[[a, b], [c, d]]``.

    Construction checks ``|det - 1| <= det_tol`` and finiteness.  Matrices whose
    determinant is off by more than 1e-12 (but within tolerance) are rescaled by
    ``1/sqrt(det)``.
    """

    a: float
    b: float
    c: float
    d: float
    det_tol: float = DET_TOL

    def __post_init__(self):
        ents = (self.a, self.b, self.c, self.d)
        if not all(math.isfinite(float(e)) for e in ents):
            raise InvalidMatrixError(f"non-finite entries {ents}")
        det = self.a * self.d - self.b * self.c
        err = abs(det - 1.0)
        if err > self.det_tol:
            raise InvalidMatrixError(f"det = {det!r} is not 1 within {self.det_tol}")
        if err > _RENORM_TOL:
            s = 1.0 / math.sqrt(det)
            for name, v in zip("abcd", ents):
                object.__setattr__(self, name, float(v) * s)
        else:
            for name, v in zip("abcd", ents):
                object.__setattr__(self, name, float(v))

    @classmethod
    def from_array(cls, arr, det_tol=DET_TOL):
        arr = np.asarray(arr, dtype=float)
        return cls(arr[0, 0], arr[0, 1], arr[1, 0], arr[1, 1], det_tol=det_tol)

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def diag(cls, lam):
        return cls(lam, 0.0, 0.0, 1.0 / lam)

    @classmethod
    def rotation(cls, theta):
        """Rotation ``[[cos, sin], [-sin, cos]]``.

        It sends the direction ``theta + alpha`` to ``alpha``.
        """
        c, s = math.cos(theta), math.sin(theta)
        return cls(c, s, -s, c)

    @classmethod
    def shear(cls, A):
        """``G(A) = [[A, -1], [1, 0]]``, the standard-map differential."""
        return cls(A, -1.0, 1.0, 0.0)

    def to_array(self):
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def det(self):
        return self.a * self.d - self.b * self.c

    def inverse(self):
        return Mat2(self.d, -self.b, -self.c, self.a, det_tol=self.det_tol)

    def __matmul__(self, other):
        if not isinstance(other, Mat2):
            return NotImplemented
        return Mat2(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
            det_tol=max(self.det_tol, other.det_tol),
        )

    def apply(self, theta):
        """Image of the unit vector at angle ``theta``."""
        c, s = math.cos(theta), math.sin(theta)
        return (self.a * c + self.b * s, self.c * c + self.d * s)


@dataclass(frozen=True)
class Cartan:
    """Cartan data ``M = ±r_{-phi} a_lam r_{theta_contract - pi/2}``.

    ``phi`` is the contracting direction of the inverse matrix.
    """

    lam: float
    theta_contract: float
    phi: float

    def reconstruct(self):
        expanding = self.theta_contract - PI / 2
        return (
            Mat2.rotation(-self.phi).to_array()
            @ Mat2.diag(self.lam).to_array()
            @ Mat2.rotation(expanding).to_array()
        )


def _sq_sum(m: Mat2):
    return m.a * m.a + m.b * m.b + m.c * m.c + m.d * m.d


def _norm_from_sq_sum(S, tol=1e-9):
    if S < 2.0 - tol:
        raise InvalidMatrixError(f"a^2+b^2+c^2+d^2 = {S!r} < 2; not an SL(2) matrix")
    S = max(S, 2.0)
    return math.sqrt((S + math.sqrt(max(S * S - 4.0, 0.0))) / 2.0)


def norm(M: Mat2) -> float:
    """Operator norm ``lam >= 1`` from ``lam^2 + lam^-2 = a^2 + b^2 + c^2 + d^2``."""
    return _norm_from_sq_sum(_sq_sum(M))


def log_expansion(M: Mat2, theta: float) -> float:
    """``log ||M (cos theta, sin theta)||``.

    Equal to half the log of ``S/2 + (a^2-b^2+c^2-d^2)/2 cos 2t + (ab+cd) sin 2t``;
    the image vector is used directly because the doubled-angle sum cancels badly
    near the contracting direction of a large matrix.
    """
    x, y = M.apply(theta)
    q = x * x + y * y
    if not q > 0.0:
        raise InvalidMatrixError(f"non-positive squared norm {q!r} at theta={theta!r}")
    return 0.5 * math.log(q)


def d_log_expansion_dtheta(M: Mat2, theta: float) -> float:
    """Analytic theta-derivative of :func:`log_expansion`."""
    cs, sn = math.cos(theta), math.sin(theta)
    x, y = M.a * cs + M.b * sn, M.c * cs + M.d * sn
    dx, dy = -M.a * sn + M.b * cs, -M.c * sn + M.d * cs
    return (x * dx + y * dy) / (x * x + y * y)


def contracting_direction(M: Mat2, dir_tol: float = DIR_TOL) -> float:
    """The direction in [0, pi) that ``M`` contracts most (to length ``1/||M||``).

    The tangent equation ``tan 2t = 2(ab+cd)/(a^2+c^2-b^2-d^2)`` has two roots a
    quarter turn apart; the one with the smaller image is returned.
    """
    lam = norm(M)
    if lam <= 1.0 + dir_tol:
        raise DirectionUndefinedError(f"norm {lam!r} too close to 1; direction undefined")
    num = 2.0 * (M.a * M.b + M.c * M.d)
    den = M.a * M.a + M.c * M.c - M.b * M.b - M.d * M.d
    t0 = wrap_angle(0.5 * math.atan2(num, den))
    t1 = wrap_angle(t0 + PI / 2)
    x0, y0 = M.apply(t0)
    x1, y1 = M.apply(t1)
    return t0 if x0 * x0 + y0 * y0 < x1 * x1 + y1 * y1 else t1


def cartan(M: Mat2, dir_tol: float = DIR_TOL) -> Cartan:
    return Cartan(
        lam=norm(M),
        theta_contract=contracting_direction(M, dir_tol),
        phi=contracting_direction(M.inverse(), dir_tol),
    )


def push_direction(M: Mat2, theta: float) -> float:
    """Projective image of the direction ``theta`` under ``M``."""
    x, y = M.apply(theta)
    return wrap_angle(math.atan2(y, x))


def distance_expansion_bound(lam: float, dist: float) -> float:
    """Lower bound ``(2/pi) lam dist`` on ``||M(theta)||`` at distance ``dist`` from the contracting direction."""
    if lam < 1.0:
        raise PreconditionError("lam must be >= 1")
    if not 0.0 <= dist <= PI / 2 + 1e-15:
        raise PreconditionError("dist must lie in [0, pi/2]")
    return 2.0 / PI * lam * dist


def product_norm_threshold(lam: float, tau: float, m: float) -> float:
    """Threshold ``T`` with ``||M1 M2|| >= lam tau / m  <=>  cos 2phi >= T``.

    ``lam`` and ``tau`` are the norms of the factors and ``phi`` the angle between
    the contracting direction of ``M1`` and the expanding direction of ``M2^-1``.
    The equivalence is exact whenever ``lam tau / m >= 1``.
    """
    if lam <= 1.0 or tau <= 1.0 or m < 1.0:
        raise PreconditionError("need lam > 1, tau > 1, m >= 1")
    y = lam * tau / m
    lp, lm = lam * lam + lam ** -2, lam * lam - lam ** -2
    tp, tm = tau * tau + tau ** -2, tau * tau - tau ** -2
    return 2.0 * (y * y + y ** -2) / (lm * tm) - (lp / lm) * (tp / tm)


def angle_drift_bound(m: float, tau: float) -> float:
    """Bound ``m^2/tau^2`` on the drift of the contracting direction of ``M1 M2`` away from that of ``M2``.

    Only the branch valid for every ``m > 1`` is offered, which needs ``tau >= sqrt(2) m``.
    """
    if m <= 1.0:
        raise PreconditionError("m must exceed 1")
    if tau < math.sqrt(2.0) * m:
        raise PreconditionError("tau must be at least sqrt(2) * m")
    return m * m / (tau * tau)


def direction_sensitivity(lambda1: float, lambda2: float, phi: float) -> float:
    """Asymptotic rate ``d theta_{M1 M2} / d theta_{M1}`` for large ``lambda2``.

    Returns ``2 (1 + k cos 2phi) / ((k + cos 2phi)^2 lambda2^2)`` with
    ``k = (l1^2 + l1^-2)/(l1^2 - l1^-2)``.  Raises when ``k + cos 2phi`` falls
    below ``2/lambda2^2``, i.e. when ``phi`` is within about ``1/lambda2`` of the
    backtracking configuration ``phi = pi/2``.
    """
    if lambda1 <= 1.0 or lambda2 <= 1.0:
        raise PreconditionError("norms must exceed 1")
    k = (lambda1 ** 2 + lambda1 ** -2) / (lambda1 ** 2 - lambda1 ** -2)
    c2 = math.cos(2.0 * phi)
    den = k + c2
    if den <= 2.0 / lambda2 ** 2:
        raise SingularConfigurationError(
            f"k + cos 2phi = {den!r}; phi={phi!r} is in the backtracking regime"
        )
    return 2.0 * (1.0 + k * c2) / (den * den * lambda2 ** 2)


# ---------------------------------------------------------------------------
# vectorized forms on stacked matrices of shape (..., 2, 2)


def quad_coeffs_v(mats):
    """Coefficients ``(mean, half, cross)`` with ``||M(t)||^2 = mean + half cos 2t + cross sin 2t``."""
    a, b, c, d = mats[..., 0, 0], mats[..., 0, 1], mats[..., 1, 0], mats[..., 1, 1]
    mean = 0.5 * (a * a + b * b + c * c + d * d)
    half = 0.5 * (a * a - b * b + c * c - d * d)
    cross = a * b + c * d
    return mean, half, cross


def norm_v(mats):
    S = 2.0 * quad_coeffs_v(mats)[0]
    S = np.maximum(S, 2.0)
    return np.sqrt((S + np.sqrt(np.maximum(S * S - 4.0, 0.0))) / 2.0)


def det_v(mats):
    return mats[..., 0, 0] * mats[..., 1, 1] - mats[..., 0, 1] * mats[..., 1, 0]


def _image_v(mats, theta):
    c, s = np.cos(theta), np.sin(theta)
    x = mats[..., 0, 0] * c + mats[..., 0, 1] * s
    y = mats[..., 1, 0] * c + mats[..., 1, 1] * s
    return x, y, c, s


def log_expansion_v(mats, theta):
    """Broadcasting ``log ||M(theta)||``; ``mats`` shape ``(..., 2, 2)``, ``theta`` broadcastable to ``(...)``."""
    x, y, _, _ = _image_v(mats, np.asarray(theta))
    return 0.5 * np.log(x * x + y * y)


def d_log_expansion_dtheta_v(mats, theta):
    x, y, c, s = _image_v(mats, np.asarray(theta))
    dx = -mats[..., 0, 0] * s + mats[..., 0, 1] * c
    dy = -mats[..., 1, 0] * s + mats[..., 1, 1] * c
    return (x * dx + y * dy) / (x * x + y * y)


def contracting_direction_v(mats):
    """Contracting directions of a stack; entries with norm near 1 come back as NaN."""
    _, half, cross = quad_coeffs_v(mats)
    t0 = wrap_angle(0.5 * np.arctan2(cross, half))
    t1 = wrap_angle(t0 + PI / 2)
    x0, y0, _, _ = _image_v(mats, t0)
    x1, y1, _, _ = _image_v(mats, t1)
    out = np.where(x0 * x0 + y0 * y0 < x1 * x1 + y1 * y1, t0, t1)
    return np.where(norm_v(mats) > 1.0 + DIR_TOL, out, np.nan)


def push_direction_v(mats, theta):
    x, y, _, _ = _image_v(mats, theta)
    return wrap_angle(np.arctan2(y, x))


def step_log_growth_v(mats, theta):
    """One telescoping step: ``(log ||M(theta)||, image direction)`` for a stack."""
    x, y, _, _ = _image_v(mats, theta)
    return 0.5 * np.log(x * x + y * y), wrap_angle(np.arctan2(y, x))
