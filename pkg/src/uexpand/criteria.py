"""Sufficient conditions for uniform expansion and the standard-map combinatorial bound."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import sl2
from .errors import PreconditionError

log = logging.getLogger(__name__)

ETA_STEP = 1e-3
N_CAP = 1000


def _m0(epsilon):
    return 1.0 / math.sin(epsilon)


def admissibility_bound(epsilon: float) -> float:
    """``(1/sin eps) * sqrt(2 + 1/eps)``, the lower end of the admissible range for ``lambda_crit``."""
    return _m0(epsilon) * math.sqrt(2.0 + 1.0 / epsilon)


def admissible(epsilon: float, lambda_crit: float, lambda_max: float) -> bool:
    if not 0.0 < epsilon < math.pi / 4:
        raise PreconditionError("epsilon must lie in (0, pi/4)")
    if not (lambda_crit > 1.0 and lambda_max > 1.0):
        raise PreconditionError("lambda_crit and lambda_max must exceed 1")
    return admissibility_bound(epsilon) < lambda_crit <= lambda_max


@dataclass(frozen=True)
class CriterionParams:
    epsilon: float
    lambda_crit: float
    lambda_max: float
    eta: float
    n: int = 1

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise PreconditionError("eta must lie in [0, 1]")
        if int(self.n) != self.n or self.n < 1:
            raise PreconditionError("n must be a positive integer")

    @property
    def m0(self):
        return _m0(self.epsilon)

    @property
    def is_admissible(self):
        return admissible(self.epsilon, self.lambda_crit, self.lambda_max)


def _good_term(epsilon, lambda_crit, n):
    # log(lambda_crit^n / m0^(n-1) * eps/pi)
    return n * math.log(lambda_crit) - (n - 1) * math.log(_m0(epsilon)) + math.log(epsilon / math.pi)


def criterion_value(p: CriterionParams) -> float:
    """Lower bound on the ``n``-step expansion average when a mass ``eta`` of generators is good."""
    if not p.is_admissible:
        raise PreconditionError(
            f"inadmissible parameters: need {admissibility_bound(p.epsilon):.6g} < "
            f"lambda_crit <= lambda_max, got {p.lambda_crit}, {p.lambda_max}"
        )
    en = p.eta ** p.n
    return en * _good_term(p.epsilon, p.lambda_crit, p.n) - (1.0 - en) * p.n * math.log(p.lambda_max)


def find_eta(epsilon: float, lambda_crit: float, lambda_max: float):
    """Smallest ``n`` with a positive good term, then the smallest ``eta`` on a 1e-3 ladder.

    If no ladder value below 1 works for that ``n`` (possible when the good term is
    tiny), the next ``n`` is tried.  Returns ``(eta, n)``.
    """
    if not admissible(epsilon, lambda_crit, lambda_max):
        raise PreconditionError("find_eta needs an admissible triple")
    n0 = next((n for n in range(1, N_CAP + 1) if _good_term(epsilon, lambda_crit, n) > 0), None)
    if n0 is None:
        raise PreconditionError(f"no n <= {N_CAP} makes the good term positive")
    ladder = ETA_STEP * np.arange(1, int(round(1 / ETA_STEP)))
    for n in range(n0, N_CAP + 1):
        for eta in ladder:
            eta = float(round(eta, 3))
            if criterion_value(CriterionParams(epsilon, lambda_crit, lambda_max, eta, n)) > 0:
                if n != n0:
                    log.info("eta ladder empty at n=%d; using n=%d", n0, n)
                return eta, n
    raise PreconditionError("eta ladder exhausted")


def empirical_hypothesis_margin(system, grid_spec, epsilon: float, lambda_crit: float,
                                chunk_points: int = 1024) -> float:
    """Minimum over grid pairs of the mass of generators that are good for that direction.

    A generator is good at ``(P, theta)`` when its differential has norm above
    ``lambda_crit`` and its contracting direction is farther than ``epsilon`` from
    ``theta``.  Differentials with norm at most ``1 + DIR_TOL`` never count.
    """
    from .verifier import build_grid

    grid = build_grid(system, grid_spec)
    th = grid.thetas
    best = math.inf
    for lo in range(0, grid.n_points, chunk_points):
        P = grid.points[lo:lo + chunk_points]
        mass = np.zeros((len(P), len(th)))
        for g in range(system.n_generators):
            _, mats = system.step(g, P)
            lam = sl2.norm_v(mats)
            ok = lam > max(lambda_crit, 1.0 + sl2.DIR_TOL)
            tc = sl2.contracting_direction_v(mats)
            dist = sl2.projective_distance(tc[:, None], th[None, :])
            good = ok[:, None] & (dist > epsilon)
            mass += system.weights[g] * good
        best = min(best, float(mass.min()))
    return best


def xi_exact(omega_size: int, n: int, delta) -> Fraction:
    """Exact value of the standard-map counting bound ``Xi(|Omega|, n, delta)``."""
    if omega_size < 3 or n < 1:
        raise PreconditionError("need omega_size >= 3 and n >= 1")
    d = Fraction(delta)
    if not 0 < d < 1:
        raise PreconditionError("delta must lie in (0, 1)")
    W = omega_size
    total = sum(Fraction((W - 2) * (W - 1) ** (n - i)) * (d * (n - i + 1) - i) for i in range(1, n + 1))
    return total - (W ** n - (W - 1) ** n + 1) * n


def xi(omega_size: int, n: int, delta: float) -> float:
    return float(xi_exact(omega_size, n, delta))
