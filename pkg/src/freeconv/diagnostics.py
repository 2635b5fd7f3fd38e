"""Smoothness and genericity of a pair of measures, and stability checks.

A pair ``(mu_A, mu_B)`` is *smooth* at ``E`` when the boundary values of both
subordination functions have strictly positive imaginary part there.  A point
is *generic* when

    k(E) = 1/m_A'(t_B) + 1/m_B'(t_A) - (E - t_A - t_B)**2

does not vanish; this is exactly the condition for the Jacobian of the
subordination system to be invertible, so that the boundary values depend
smoothly on the input measures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter, NotConverged
from .measures import MeasureSpec, levy_distance, quantize
from .subord import (
    ETA_FLOOR,
    SubordinationPoint,
    boxplus_density,
    continue_to_axis,
    parallel_map,
    semicircle_point,
)

__all__ = [
    "SMOOTH_TOL",
    "GENERIC_TOL",
    "DENSITY_TOL",
    "PointDiagnostics",
    "StabilityReport",
    "k_value",
    "diagnose",
    "diagnostics_from_point",
    "self_convolution_t",
    "smoothness_via_self_convolution",
    "semicircle_smoothness_criterion",
    "mp_genericity_cubic",
    "mp_genericity_roots",
    "stability_experiment",
    "stieltjes_gap_check",
]

SMOOTH_TOL = 1e-6
GENERIC_TOL = 1e-8
DENSITY_TOL = 1e-6
MODULUS_TOL = 1e-6


@dataclass(frozen=True)
class PointDiagnostics:
    """Smoothness and genericity flags at one energy.

    ``reliable`` is False when the point is not smooth: ``k`` is then built
    from derivatives taken next to the real axis and only indicative.
    """

    E: float
    im_ta: float
    im_tb: float
    k: complex
    smooth: bool
    generic: bool
    smooth_tol: float = SMOOTH_TOL
    generic_tol: float = GENERIC_TOL

    @property
    def reliable(self) -> bool:
        return self.smooth


def k_value(E: float, t_a: complex, t_b: complex, mu_a: MeasureSpec, mu_b: MeasureSpec) -> complex:
    """``1/m_A'(t_B) + 1/m_B'(t_A) - (E - t_A - t_B)**2``."""
    da = mu_a._transform(complex(t_b), 1)
    db = mu_b._transform(complex(t_a), 1)
    return 1.0 / da + 1.0 / db - (E - t_a - t_b) ** 2


def diagnostics_from_point(
    p: SubordinationPoint,
    mu_a: MeasureSpec,
    mu_b: MeasureSpec,
    smooth_tol: float = SMOOTH_TOL,
    generic_tol: float = GENERIC_TOL,
) -> PointDiagnostics:
    """Flags for an already converged boundary point."""
    E = p.z.real
    k = k_value(E, p.t_a, p.t_b, mu_a, mu_b)
    return PointDiagnostics(
        E=E,
        im_ta=p.t_a.imag,
        im_tb=p.t_b.imag,
        k=k,
        smooth=bool(p.t_a.imag > smooth_tol and p.t_b.imag > smooth_tol),
        generic=bool(abs(k) > generic_tol),
        smooth_tol=smooth_tol,
        generic_tol=generic_tol,
    )


def diagnose(
    E: float,
    mu_a: MeasureSpec,
    mu_b: MeasureSpec,
    eta_floor: float = ETA_FLOOR,
    smooth_tol: float = SMOOTH_TOL,
    generic_tol: float = GENERIC_TOL,
) -> PointDiagnostics:
    """Smoothness and genericity of ``(mu_a, mu_b)`` at ``E``.

    Parameters
    ----------
    E : float
        Energy on the real axis.
    mu_a, mu_b : MeasureSpec
        The two summands.
    eta_floor : float, optional
        Height at which the boundary values are read off.

    Returns
    -------
    PointDiagnostics

    Raises
    ------
    NotConverged
        If the continuation does not reach ``eta_floor``; smoothness cannot
        be certified then.
    """
    p = continue_to_axis(E, mu_a, mu_b, eta_floor)
    return diagnostics_from_point(p, mu_a, mu_b, smooth_tol, generic_tol)


def self_convolution_t(p: SubordinationPoint) -> complex:
    """Common subordination value of ``mu [+] mu`` recovered from ``m_box``.

    For identical summands ``t_A = t_B = t`` and ``m_box = 1/(z - 2t)``, so
    ``t = (z - 1/m_box)/2``.
    """
    return (p.z - 1.0 / p.m_box) / 2.0


def smoothness_via_self_convolution(E: float, mu: MeasureSpec, eta_floor: float = ETA_FLOOR) -> bool:
    """Whether ``(mu, mu)`` is smooth at ``E``, read off the density of ``mu [+] mu``.

    Positive density of ``mu [+] mu`` at ``E`` is equivalent to
    ``Im t(E) > 0`` through ``t = (E - 1/m_box)/2``.

    Raises
    ------
    NotConverged
        If the continuation for ``mu [+] mu`` stalls.
    """
    p = continue_to_axis(E, mu, mu, eta_floor)
    return bool(p.density > DENSITY_TOL)


def semicircle_smoothness_criterion(E: float, mu_b: MeasureSpec, eta_floor: float = ETA_FLOOR) -> bool:
    """Smoothness of (standard semicircle, ``mu_b``) at ``E``.

    The pair is smooth exactly where the density of the convolution is
    positive and ``|m_box(E)| != 1``.

    Raises
    ------
    NotConverged
        If the scalar continuation stalls.
    """
    p = semicircle_point(E, 1.0, mu_b, eta_floor)
    return bool(p.density > DENSITY_TOL and abs(abs(p.m_box) - 1.0) > MODULUS_TOL)


def mp_genericity_cubic(E, lam: float):
    """Cubic whose real root marks where genericity fails for the free Poisson pair.

    ``E**3 - (5 + 5/2 lam) E**2 + (7 + 13/2 lam + 2 lam**2) E
    - (3 - 5 lam + 5/4 lam**2 + 1/2 lam**3)``

    Works elementwise on arrays.
    """
    if not lam > 1:
        raise InvalidParameter(f"lambda must exceed 1, got {lam!r}")
    c = _mp_coefficients(lam)
    return ((c[0] * E + c[1]) * E + c[2]) * E + c[3]


def _mp_coefficients(lam):
    return (
        1.0,
        -(5.0 + 2.5 * lam),
        7.0 + 6.5 * lam + 2.0 * lam**2,
        -(3.0 - 5.0 * lam + 1.25 * lam**2 + 0.5 * lam**3),
    )


def mp_genericity_roots(lam: float, imag_tol: float = 1e-9) -> np.ndarray:
    """Real roots of :func:`mp_genericity_cubic`, sorted ascending."""
    if not lam > 1:
        raise InvalidParameter(f"lambda must exceed 1, got {lam!r}")
    roots = np.roots(_mp_coefficients(lam))
    return np.sort(roots[np.abs(roots.imag) < imag_tol].real)


@dataclass
class StabilityReport:
    """Rows ``(s, sup density gap, gap / s)`` sorted by decreasing ``s``."""

    rows: list = field(default_factory=list)
    interval: tuple = (0.0, 0.0)
    sizes: list = field(default_factory=list)

    @property
    def s(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows])

    @property
    def gaps(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows])


def stability_experiment(
    mu_a: MeasureSpec,
    mu_b: MeasureSpec,
    interval,
    quantization_sizes,
    grid_points: int = 61,
    eta_floor: float = ETA_FLOOR,
) -> StabilityReport:
    """Compare ``mu_a [+] mu_b`` with the convolution of quantized inputs.

    Both measures are replaced by their ``n``-point quantizations; ``s`` is
    the larger of the two Levy distances and the gap is the sup over the
    grid of the density difference.  A size of ``None`` keeps the measures
    unperturbed (``s = 0``, ratio NaN).

    Raises
    ------
    NotConverged
        If any required point fails to converge.
    InvalidParameter
        If the unperturbed pair is not smooth and generic on the grid.
    """
    a, b = map(float, interval)
    if not a < b:
        raise InvalidParameter("interval must satisfy a < b")
    if int(grid_points) < 2:
        raise InvalidParameter("need at least two grid points")
    grid = np.linspace(a, b, int(grid_points))
    ref = boxplus_density(grid, mu_a, mu_b, eta_floor)
    _require_converged(ref)
    for k, E in enumerate(grid):
        p = SubordinationPoint(complex(E, eta_floor), ref.t_a[k], ref.t_b[k], ref.m_box[k], ref.residual[k])
        d = diagnostics_from_point(p, mu_a, mu_b)
        if not (d.smooth and d.generic):
            raise InvalidParameter(f"pair is not smooth and generic at E = {E!r}")

    def one(n):
        if n is None:
            nu_a, nu_b, s = mu_a, mu_b, 0.0
        else:
            nu_a, nu_b = quantize(mu_a, int(n)), quantize(mu_b, int(n))
            s = max(levy_distance(mu_a, nu_a), levy_distance(mu_b, nu_b))
        prof = boxplus_density(grid, nu_a, nu_b, eta_floor)
        _require_converged(prof)
        gap = float(np.max(np.abs(prof.rho - ref.rho)))
        return (s, gap, gap / s if s > 0 else math.nan)

    sizes = list(quantization_sizes)
    rows = [one(n) for n in sizes]
    order = sorted(range(len(rows)), key=lambda i: -rows[i][0])
    return StabilityReport(rows=[rows[i] for i in order], interval=(a, b), sizes=[sizes[i] for i in order])


def _require_converged(prof):
    if not prof.all_converged:
        bad = prof.energies[~prof.converged]
        raise NotConverged(f"no convergence at energies {bad.tolist()}")


def stieltjes_gap_check(m1: MeasureSpec, m2: MeasureSpec, etas, energies) -> float:
    """Fitted exponent of ``max_E |m1(E + i eta) - m2(E + i eta)|`` against ``eta``.

    The gap is bounded by ``c s eta**-1 max(1, eta**-1)`` for measures at
    Levy distance ``s``, so the fitted slope should not fall below about -2.

    Returns
    -------
    float
        Least-squares slope of log-gap against log-eta, or 0 when all gaps
        vanish.
    """
    etas = np.asarray(etas, dtype=float)
    energies = np.asarray(energies, dtype=float)
    if len(etas) < 4:
        raise InvalidParameter("need at least four values of eta")
    if np.any(etas <= 0) or np.any(etas > 1):
        raise InvalidParameter("eta values must lie in (0, 1]")

    def gap(eta):
        return max(abs(m1._transform(complex(E, eta), 0) - m2._transform(complex(E, eta), 0)) for E in energies)

    gaps = np.array(parallel_map(gap, etas))
    keep = gaps > 0
    if not np.any(keep):
        return 0.0
    if np.count_nonzero(keep) < 2:
        raise InvalidParameter("need at least two nonzero gaps to fit an exponent")
    slope, _ = np.polyfit(np.log(etas[keep]), np.log(gaps[keep]), 1)
    return float(slope)
