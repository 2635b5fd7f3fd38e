"""Local limit theorems for free convolution powers, run at desk scale.

* free CLT: ``(X_1 + ... + X_n)/sqrt(n)`` for a centred, unit-variance
  atomic law tends to the standard semicircle, locally uniformly inside
  ``(-2, 2)``;
* free Poisson: the ``n``-fold power of ``(1 - lam/n) delta_0 + (lam/n) delta_1``
  tends to the Marchenko-Pastur law;
* stable laws: Cauchy laws are closed under free convolution,
  ``Cauchy(g1) [+] Cauchy(g2) = Cauchy(g1 + g2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter, NotConverged
from .measures import Atoms, Cauchy, MarchenkoPastur, MeasureSpec, Semicircle, closed_form_density, scale
from .subord import ETA_FLOOR, DensityProfile, boxplus_density, self_boxplus_n

__all__ = [
    "GRID_POINTS",
    "LimitRunReport",
    "free_clt_profile",
    "free_poisson_profile",
    "cauchy_stable_check",
]

GRID_POINTS = 121
MOMENT_TOL = 1e-12


@dataclass
class LimitRunReport:
    """Sup-norm distance to the limit law on ``interval`` for each ``n``."""

    n_values: list
    sup_errors: list
    interval: tuple
    limit_law: MeasureSpec
    profiles: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if len(self.n_values) != len(self.sup_errors):
            raise ValueError("n_values and sup_errors must have equal length")


def _sup_error(prof: DensityProfile, limit: MeasureSpec) -> float:
    if not prof.all_converged:
        bad = prof.energies[~prof.converged]
        raise NotConverged(f"no convergence at energies {bad.tolist()}")
    return float(np.max(np.abs(prof.rho - closed_form_density(limit, prof.energies))))


def free_clt_profile(
    base: MeasureSpec,
    n_values,
    epsilon: float = 0.1,
    grid_points: int = GRID_POINTS,
    eta_floor: float = ETA_FLOOR,
) -> LimitRunReport:
    """Distance of the normalized ``n``-fold power of ``base`` to the semicircle.

    Parameters
    ----------
    base : MeasureSpec
        Atomic law with mean 0 and variance 1.
    n_values : sequence of int
        Numbers of summands, each at least 2.
    epsilon : float
        Margin; errors are measured on ``[-2 + epsilon, 2 - epsilon]``.

    Returns
    -------
    LimitRunReport
    """
    if not base.is_atomic:
        raise InvalidParameter("base must be atomic")
    if abs(base.mean()) >= MOMENT_TOL:
        raise InvalidParameter(f"base must be centred, mean = {base.mean()!r}")
    if abs(base.variance() - 1.0) >= MOMENT_TOL:
        raise InvalidParameter(f"base must have unit variance, variance = {base.variance()!r}")
    if not 0 < epsilon < 1:
        raise InvalidParameter("epsilon must lie in (0, 1)")
    n_values = [int(n) for n in n_values]
    if any(n < 2 for n in n_values):
        raise InvalidParameter("every n must be at least 2")
    interval = (-2.0 + epsilon, 2.0 - epsilon)
    grid = np.linspace(*interval, int(grid_points))
    limit = Semicircle(1.0)
    profiles = [self_boxplus_n(grid, scale(base, 1.0 / math.sqrt(n)), n, eta_floor) for n in n_values]
    errors = [_sup_error(p, limit) for p in profiles]
    return LimitRunReport(n_values, errors, interval, limit, profiles)


def free_poisson_profile(
    lam: float,
    n: int,
    epsilon: float = 0.1,
    grid_points: int = GRID_POINTS,
    eta_floor: float = ETA_FLOOR,
) -> LimitRunReport:
    """Distance of the ``n``-fold power of a Bernoulli(lam/n) law to Marchenko-Pastur.

    Errors are measured on ``[x_min + epsilon, x_max - epsilon]`` where
    ``x_min, x_max = (1 -+ sqrt(lam))**2``.
    """
    if not lam > 1:
        raise InvalidParameter(f"lambda must exceed 1, got {lam!r}")
    n = int(n)
    p = lam / n
    if not p < 1:
        raise InvalidParameter(f"lambda/n = {p!r} must be below 1")
    if n < 10:
        raise InvalidParameter("need n >= 10")
    limit = MarchenkoPastur(lam)
    lo, hi = limit.support()
    interval = (lo + epsilon, hi - epsilon)
    if not interval[0] < interval[1]:
        raise InvalidParameter("epsilon too large for the support")
    grid = np.linspace(*interval, int(grid_points))
    base = Atoms((0.0, 1.0), (1.0 - p, p))
    prof = self_boxplus_n(grid, base, n, eta_floor)
    return LimitRunReport([n], [_sup_error(prof, limit)], interval, limit, [prof])


def cauchy_stable_check(gamma1: float, gamma2: float, grid, eta_floor: float = ETA_FLOOR) -> float:
    """Sup gap between ``Cauchy(gamma1) [+] Cauchy(gamma2)`` and ``Cauchy(gamma1 + gamma2)``."""
    grid = np.asarray(grid, dtype=float)
    if np.any(np.abs(grid) > 10):
        raise InvalidParameter("grid must lie within [-10, 10]")
    prof = boxplus_density(grid, Cauchy(gamma1), Cauchy(gamma2), eta_floor)
    return _sup_error(prof, Cauchy(gamma1 + gamma2))
