"""Subordination solver for the free additive convolution.

For a pair of measures ``(mu_A, mu_B)`` the subordination functions
``t_A, t_B`` solve

    1 / (z - t_A - t_B) = m_A(t_B)
    1 / (z - t_A - t_B) = m_B(t_A)

and ``m_box(z) = 1 / (z - t_A - t_B)`` is the Stieltjes transform of
``mu_A [+] mu_B``.  The system has a unique solution with ``t ~ z`` far from
the real axis.  We find it there with a damped fixed-point iteration, then
follow it down towards the axis along a geometric ladder of heights,
re-solving at each rung with a damped Newton method warm-started from the
rung above.  The density is read off as ``Im m_box(E + i eta_floor) / pi``.

Two scalar reductions share the same ladder:

* a semicircular summand, where ``t_A = z + m_B(t_A)``;
* ``n`` identical summands, where the common subordination value ``t``
  satisfies ``m(t) (z - n t) = n - 1`` and ``m_box = m(t)``.
"""

from __future__ import annotations

import cmath
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    ContinuationStalled,
    InvalidParameter,
    NoConvergence,
    NonPositiveImaginaryPart,
    NotConverged,
    SingularJacobian,
)
from .measures import AffineImage, MeasureSpec, Semicircle

__all__ = [
    "SubordinationPoint",
    "DensityProfile",
    "eta_start",
    "solve_high",
    "newton_refine",
    "jacobian_determinant",
    "pair_residual",
    "continuation_ladder",
    "continue_to_axis",
    "subordination_at",
    "boxplus_density",
    "semicircle_point",
    "semicircle_boxplus",
    "self_point",
    "self_boxplus_n",
]

ETA_FLOOR = 1e-7
ACCEPT_RESIDUAL = 1e-10
HIGH_TOL = 1e-13
POLISH_TOL = 1e-14
IM_SLACK = 1e-10
SOLVER_REL_DET = 1e-15
GENERIC_REL_DET = 1e-10
MAX_HALVINGS = 30
MAX_NEWTON = 60
MAX_FIXED_POINT = 10_000
DAMPING = 0.5
STALL_RUNGS = 3
STEP_TOL = 1e-9


@dataclass(frozen=True)
class SubordinationPoint:
    """Solution of the subordination system at one point ``z``."""

    z: complex
    t_a: complex
    t_b: complex
    m_box: complex
    residual: float
    rejected: bool = False

    @property
    def eta(self) -> float:
        return self.z.imag

    @property
    def density(self) -> float:
        return self.m_box.imag / math.pi


@dataclass
class DensityProfile:
    """Density of a free convolution on a grid of energies.

    ``rho[k]`` is ``Im m_box(energies[k] + i eta_reached[k]) / pi``; for
    converged points ``eta_reached[k] == eta_floor``.  Points where the
    ladder stalled keep the values of their last accepted rung.
    """

    energies: np.ndarray
    rho: np.ndarray
    t_a: np.ndarray
    t_b: np.ndarray
    m_box: np.ndarray
    residual: np.ndarray
    eta_reached: np.ndarray
    converged: np.ndarray
    eta_floor: float

    def __len__(self):
        return len(self.energies)

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("FREECONV_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Ordered map; runs on a thread pool capped by FREECONV_THREADS."""
    items = list(items)
    n = _workers()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _ladder(eta0, floor):
    etas = []
    eta = eta0
    while eta > floor:
        etas.append(eta)
        eta *= 0.5
    etas.append(floor)
    return etas


# ---------------------------------------------------------------------------
# systems: each knows its residual, Newton step, admissible region,
# fixed-point map for large eta, and how to report a point


class _PairSystem:
    def __init__(self, mu_a, mu_b):
        self.mu_a, self.mu_b = mu_a, mu_b
        self.eta0 = eta_start(mu_a, mu_b)

    def start(self, z):
        return (z, z)

    def fixed_point(self, z, t):
        ta, tb = t
        ma = self.mu_a._transform(tb, 0)
        ta = (1 - DAMPING) * ta + DAMPING * (z - tb - 1.0 / ma)
        mb = self.mu_b._transform(ta, 0)
        tb = (1 - DAMPING) * tb + DAMPING * (z - ta - 1.0 / mb)
        return (ta, tb)

    def equations(self, z, t):
        ta, tb = t
        g = 1.0 / (z - ta - tb)
        return g - self.mu_a._transform(tb, 0), g - self.mu_b._transform(ta, 0)

    def residual(self, z, t):
        f1, f2 = self.equations(z, t)
        return math.hypot(abs(f1), abs(f2))

    def step(self, z, t, rel_det=SOLVER_REL_DET):
        ta, tb = t
        f1, f2 = self.equations(z, t)
        q = (z - ta - tb) ** -2
        da = self.mu_a._transform(tb, 1)
        db = self.mu_b._transform(ta, 1)
        det = q * (da + db) - da * db
        scale = abs(q) * (abs(da) + abs(db)) + abs(da * db)
        if not abs(det) > rel_det * scale:
            raise SingularJacobian(f"Jacobian determinant {abs(det):.3e} (scale {scale:.3e}) at z = {z!r}")
        # inverse of [[q, q - da], [q - db, q]]
        step_a = -(q * f1 - (q - da) * f2) / det
        step_b = -(-(q - db) * f1 + q * f2) / det
        return (step_a, step_b)

    def step_with_jacobian_at(self, z, t, at):
        """Newton correction for the residual at ``at`` using the Jacobian at ``t``."""
        ta, tb = t
        f1, f2 = self.equations(z, at)
        q = (z - ta - tb) ** -2
        da = self.mu_a._transform(tb, 1)
        db = self.mu_b._transform(ta, 1)
        det = q * (da + db) - da * db
        return (-(q * f1 - (q - da) * f2) / det, -(-(q - db) * f1 + q * f2) / det)

    def admissible(self, z, t):
        floor = z.imag - IM_SLACK
        return t[0].imag >= floor and t[1].imag >= floor and (z - t[0] - t[1]) != 0

    feasible = admissible

    def point(self, z, t, residual):
        ta, tb = t
        return SubordinationPoint(z, ta, tb, 1.0 / (z - ta - tb), residual)


class _SemicircleSystem:
    """Unit-variance semicircle plus ``mu_b``; variables are pre-scaled."""

    def __init__(self, variance, mu_b):
        self.sigma = math.sqrt(variance)
        self.variance = variance
        self.mu_b = mu_b
        self.mu_unit = mu_b if self.sigma == 1.0 else AffineImage(mu_b, 1.0 / self.sigma, 0.0)
        self.eta0 = 4.0 * (1.0 + max(2.0, self.mu_unit.radius()))
        self._full = _PairSystem(Semicircle(variance), mu_b)

    def start(self, z):
        return (z,)

    def fixed_point(self, z, t):
        (w,) = t
        return ((1 - DAMPING) * w + DAMPING * (z + self.mu_unit._transform(w, 0)),)

    def residual(self, z, t):
        (w,) = t
        return abs(w - z - self.mu_unit._transform(w, 0))

    def step(self, z, t, rel_det=SOLVER_REL_DET):
        (w,) = t
        g = w - z - self.mu_unit._transform(w, 0)
        dm = self.mu_unit._transform(w, 1)
        dg = 1.0 - dm
        if not abs(dg) > rel_det * (1.0 + abs(dm)):
            raise SingularJacobian(f"scalar derivative vanishes at z = {z!r}")
        return (-g / dg,)

    def step_with_jacobian_at(self, z, t, at):
        (w,) = t
        (v,) = at
        g = v - z - self.mu_unit._transform(v, 0)
        return (-g / (1.0 - self.mu_unit._transform(w, 1)),)

    def _t_b(self, z, w):
        return z - w + 1.0 / (z - w)

    def feasible(self, z, t):
        (w,) = t
        return w != z and w.imag >= z.imag - IM_SLACK

    def admissible(self, z, t):
        (w,) = t
        return self.feasible(z, t) and self._t_b(z, w).imag >= z.imag - IM_SLACK

    def point(self, z, t, residual):
        (w,) = t
        s = self.sigma
        zz = s * z
        ta, tb = s * w, s * self._t_b(z, w)
        m_box = (w - z) / s
        # certificate against the full two-equation system
        cert = self._full.residual(zz, (ta, tb)) if zz.imag > 0 else residual
        return SubordinationPoint(zz, ta, tb, m_box, cert)


class _SelfSystem:
    """``n`` identical summands: ``m(t) = (n - 1) / (z - n t)``."""

    def __init__(self, base, n):
        self.base, self.n = base, int(n)
        self.eta0 = 4.0 * (1.0 + math.sqrt(self.n) * base.radius())

    def start(self, z):
        return (z,)

    def fixed_point(self, z, t):
        (w,) = t
        m = self.base._transform(w, 0)
        target = z + (self.n - 1) * (-1.0 / m - w)
        return ((1 - DAMPING) * w + DAMPING * target,)

    def _h(self, z, w):
        return self.base._transform(w, 0) - (self.n - 1) / (z - self.n * w)

    def residual(self, z, t):
        return abs(self._h(z, t[0]))

    def step(self, z, t, rel_det=SOLVER_REL_DET):
        (w,) = t
        n = self.n
        d = z - n * w
        h = self.base._transform(w, 0) - (n - 1) / d
        dm = self.base._transform(w, 1)
        dh = dm - (n - 1) * n / (d * d)
        if not abs(dh) > rel_det * (abs(dm) + abs((n - 1) * n / (d * d))):
            raise SingularJacobian(f"scalar derivative vanishes at z = {z!r}")
        return (-h / dh,)

    def step_with_jacobian_at(self, z, t, at):
        (w,) = t
        (v,) = at
        n = self.n
        d = z - n * w
        dh = self.base._transform(w, 1) - (n - 1) * n / (d * d)
        return (-self._h(z, v) / dh,)

    def admissible(self, z, t):
        (w,) = t
        return w.imag >= z.imag - IM_SLACK and (z - self.n * w) != 0

    feasible = admissible

    def point(self, z, t, residual):
        (w,) = t
        return SubordinationPoint(z, w, w, self.base._transform(w, 0), residual)


# ---------------------------------------------------------------------------
# generic machinery


def _solve_fixed_point(system, z, tol=HIGH_TOL, max_iter=MAX_FIXED_POINT):
    t = system.start(z)
    for _ in range(max_iter):
        t = system.fixed_point(z, t)
        r = system.residual(z, t)
        if r < tol:
            return t, r
        if not math.isfinite(r):
            break
    raise NoConvergence(f"fixed-point iteration did not converge at z = {z!r}")


def _newton_once(system, z, t, r, rel_det=SOLVER_REL_DET):
    """One damped Newton step; returns (t, r, accepted)."""
    d = system.step(z, t, rel_det)
    lam = 1.0
    for _ in range(MAX_HALVINGS + 1):
        cand = tuple(a + lam * b for a, b in zip(t, d))
        if system.feasible(z, cand):
            rc = system.residual(z, cand)
            if rc < r:
                return cand, rc, True
        lam *= 0.5
    return t, r, False


def _natural_step(system, z, t):
    """Damped Newton step with Deuflhard's natural monotonicity test.

    The trial point is accepted when the simplified Newton correction there,
    computed with the Jacobian at ``t``, is shorter than the full correction.
    Unlike a residual test this is invariant under rescaling the equations,
    which matters where one equation degenerates (``t`` large).
    """
    d = system.step(z, t)
    size = math.sqrt(sum(abs(x) ** 2 for x in d))
    lam = 1.0
    for _ in range(MAX_HALVINGS + 1):
        cand = tuple(a + lam * b for a, b in zip(t, d))
        if system.feasible(z, cand):
            try:
                d_bar = system.step_with_jacobian_at(z, t, cand)
            except (ZeroDivisionError, OverflowError):
                d_bar = None
            if d_bar is not None:
                bar = math.sqrt(sum(abs(x) ** 2 for x in d_bar))
                if bar < (1.0 - lam / 4.0) * size or bar < 1e-15 * (1.0 + max(abs(x) for x in cand)):
                    return cand, True
        lam *= 0.5
    return t, False


def _step_small(system, z, t):
    """True when the Newton correction at ``t`` is negligible relative to ``t``.

    A small residual alone is not enough near cusps, where the equations are
    nearly flat in one direction.
    """
    try:
        d = system.step(z, t)
    except (SingularJacobian, ZeroDivisionError, OverflowError):
        return False
    size = math.sqrt(sum(abs(x) ** 2 for x in d))
    return size <= STEP_TOL * (1.0 + max(abs(x) for x in t))


def _polish(system, z, t):
    r = system.residual(z, t)
    best = (r, t)
    for _ in range(MAX_NEWTON):
        if r < POLISH_TOL:
            break
        t, ok = _natural_step(system, z, t)
        if not ok:
            break
        r = system.residual(z, t)
        if r < best[0]:
            best = (r, t)
    # finish with residual-monotone steps from the best point seen
    r, t = best
    for _ in range(8):
        if r < POLISH_TOL:
            break
        t, r, ok = _newton_once(system, z, t, r)
        if not ok:
            break
    return t, r


def _pole_gap(eta):
    # an atom of the convolution at E makes |m_box| ~ mass / eta
    return max(1e-12, min(1e-3, 1e3 * eta))


def _near_pole(m_box, gap):
    # |z - t_A - t_B| = 1/|m_box| below gap
    return not math.isfinite(abs(m_box)) or abs(m_box) * gap > 1.0


def _descend(system, E, floor, collect=False):
    """Follow the solution from ``E + i eta0`` down to ``E + i floor``."""
    eta0 = max(system.eta0, floor)
    z = complex(E, eta0)
    t, r = _solve_fixed_point(system, z)
    t, r = _polish(system, z, t)
    good = [(eta0, t)]
    ladder = [system.point(z, t, r)] if collect else None
    last = system.point(z, t, r)

    targets = _ladder(eta0, floor)[1:]
    failures = 0
    i = 0
    while i < len(targets):
        eta = targets[i]
        z = complex(E, eta)
        e2, t2 = good[-1]
        # plain warm start, a shift by the change in z (t ~ z), a secant in eta
        # and a power law in eta (t ~ eta**p near cusps and edges)
        guesses = [t2, tuple(b + 1j * (eta - e2) for b in t2)]
        if len(good) > 1:
            e1, t1 = good[-2]
            frac = (eta - e2) / (e2 - e1)
            guesses.append(tuple(b + (b - a) * frac for a, b in zip(t1, t2)))
            expo = math.log(eta / e2) / math.log(e2 / e1)
            with np.errstate(all="ignore"):
                guesses.append(tuple(b * (b / a) ** expo if a != 0 else b for a, b in zip(t1, t2)))
        scored = []
        for g in guesses:
            if all(cmath.isfinite(x) for x in g) and system.feasible(z, g):
                rg = system.residual(z, g)
                if math.isfinite(rg):
                    scored.append((rg, g))
        scored.sort(key=lambda sg: sg[0])
        ok = False
        for _, g in scored:
            try:
                t_new, r = _polish(system, z, g)
                ok = (
                    r <= ACCEPT_RESIDUAL
                    and system.admissible(z, t_new)
                    and _step_small(system, z, t_new)
                )
            except (SingularJacobian, ZeroDivisionError, OverflowError):
                ok = False
            if ok:
                p = system.point(z, t_new, r)
                ok = not _near_pole(p.m_box, 1e-12)
            if ok:
                break
        if ok:
            good.append((eta, t_new))
            last = p
            if collect:
                ladder.append(p)
            failures = 0
            i += 1
            continue
        failures += 1
        if failures >= STALL_RUNGS:
            raise ContinuationStalled(
                f"continuation stalled at E = {E!r} below eta = {last.eta:.3e}",
                point=last,
                eta=last.eta,
            )
        # retry with an intermediate rung between the last good height and the target
        targets.insert(i, math.sqrt(good[-1][0] * eta))
    if _near_pole(last.m_box, _pole_gap(floor)):
        raise ContinuationStalled(f"pole of m_box (atom) near E = {E!r}", point=last, eta=last.eta)
    return ladder if collect else last


def _check_floor(eta_floor):
    if not (0 < eta_floor <= 1):
        raise InvalidParameter(f"eta_floor must lie in (0, 1], got {eta_floor!r}")


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise InvalidParameter("grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise InvalidParameter("grid must be strictly increasing")
    return grid


def _profile(grid, solve, eta_floor):
    grid = _check_grid(grid)
    _check_floor(eta_floor)

    def one(E):
        try:
            return solve(E), True
        except NotConverged as exc:
            return exc.point, False
        except NoConvergence:
            return None, False

    results = parallel_map(one, grid)
    n = len(grid)
    prof = DensityProfile(
        energies=grid,
        rho=np.full(n, np.nan),
        t_a=np.full(n, np.nan + 0j),
        t_b=np.full(n, np.nan + 0j),
        m_box=np.full(n, np.nan + 0j),
        residual=np.full(n, np.nan),
        eta_reached=np.full(n, np.nan),
        converged=np.zeros(n, dtype=bool),
        eta_floor=float(eta_floor),
    )
    for k, (p, ok) in enumerate(results):
        prof.converged[k] = ok
        if p is None:
            continue
        prof.rho[k] = p.density
        prof.t_a[k], prof.t_b[k], prof.m_box[k] = p.t_a, p.t_b, p.m_box
        prof.residual[k] = p.residual
        prof.eta_reached[k] = p.eta
    return prof


# ---------------------------------------------------------------------------
# public API: pair system


def eta_start(mu_a: MeasureSpec, mu_b: MeasureSpec) -> float:
    """Height where the fixed-point iteration is a strict contraction."""
    return 4.0 * (1.0 + max(mu_a.radius(), mu_b.radius()))


def pair_residual(z, t_a, t_b, mu_a, mu_b) -> float:
    """Euclidean norm of the two subordination equations at ``(t_a, t_b)``."""
    return _PairSystem(mu_a, mu_b).residual(complex(z), (complex(t_a), complex(t_b)))


def jacobian_determinant(p: SubordinationPoint, mu_a, mu_b) -> complex:
    """``[m_A'(t_B) + m_B'(t_A)] (z - t_A - t_B)^-2 - m_A'(t_B) m_B'(t_A)``."""
    q = (p.z - p.t_a - p.t_b) ** -2
    da = mu_a._transform(p.t_b, 1)
    db = mu_b._transform(p.t_a, 1)
    return q * (da + db) - da * db


def solve_high(z, mu_a: MeasureSpec, mu_b: MeasureSpec) -> SubordinationPoint:
    """Solve the system far from the axis by damped alternating iteration.

    Intended for ``Im z >= eta_start(mu_a, mu_b)``, where the iteration
    ``t_A <- z - t_B - 1/m_A(t_B)``, ``t_B <- z - t_A - 1/m_B(t_A)`` contracts.

    Raises
    ------
    NoConvergence
        If the residual is still above 1e-13 after 10**4 sweeps.
    """
    z = complex(z)
    if not z.imag > 0:
        raise NonPositiveImaginaryPart(f"need Im z > 0, got {z!r}")
    system = _PairSystem(mu_a, mu_b)
    t, r = _solve_fixed_point(system, z)
    return system.point(z, t, r)


def newton_refine(p: SubordinationPoint, mu_a: MeasureSpec, mu_b: MeasureSpec) -> SubordinationPoint:
    """One damped Newton step on the subordination equations.

    The step is halved (at most 30 times) until the residual strictly
    decreases while ``Im t`` stays above ``Im z``.  If no such step exists the
    input is returned with ``rejected=True``.

    Raises
    ------
    SingularJacobian
        If ``|det F'|`` is below ``1e-10`` times the size of its two terms,
        i.e. the genericity condition fails numerically at ``p``.
    """
    system = _PairSystem(mu_a, mu_b)
    t = (p.t_a, p.t_b)
    system.step(p.z, t, GENERIC_REL_DET)
    r = system.residual(p.z, t)
    if r < 1e-15:
        return replace(p, residual=r, rejected=False)
    t_new, r_new, ok = _newton_once(system, p.z, t, r, GENERIC_REL_DET)
    if not ok:
        return replace(p, rejected=True)
    return system.point(p.z, t_new, r_new)


def continuation_ladder(E: float, mu_a, mu_b, eta_floor: float = ETA_FLOOR) -> list[SubordinationPoint]:
    """Every accepted rung from ``E + i eta0`` down to ``E + i eta_floor``."""
    _check_floor(eta_floor)
    return _descend(_PairSystem(mu_a, mu_b), float(E), eta_floor, collect=True)


def continue_to_axis(E: float, mu_a, mu_b, eta_floor: float = ETA_FLOOR) -> SubordinationPoint:
    """Boundary values ``t_A(E + i eta_floor)``, ``t_B(E + i eta_floor)``.

    Raises
    ------
    ContinuationStalled
        Newton failed on three consecutive rungs, or ``m_box`` has a pole
        (an atom of the convolution) at ``E``.  ``exc.point`` holds the last
        accepted rung.
    """
    _check_floor(eta_floor)
    return _descend(_PairSystem(mu_a, mu_b), float(E), eta_floor)


def subordination_at(z, mu_a, mu_b) -> SubordinationPoint:
    """Solution at an arbitrary point of the upper half-plane."""
    z = complex(z)
    if not z.imag > 0:
        raise NonPositiveImaginaryPart(f"need Im z > 0, got {z!r}")
    system = _PairSystem(mu_a, mu_b)
    if z.imag >= system.eta0:
        t, r = _solve_fixed_point(system, z)
        t, r = _polish(system, z, t)
        return system.point(z, t, r)
    return _descend(system, z.real, z.imag)


def boxplus_density(grid, mu_a, mu_b, eta_floor: float = ETA_FLOOR) -> DensityProfile:
    """Density of ``mu_a [+] mu_b`` on ``grid``; failures are flagged per point."""
    system = _PairSystem(mu_a, mu_b)
    return _profile(grid, lambda E: _descend(system, float(E), eta_floor), eta_floor)


# ---------------------------------------------------------------------------
# public API: scalar reductions


def semicircle_point(E: float, variance: float, mu_b, eta_floor: float = ETA_FLOOR) -> SubordinationPoint:
    """Boundary point for ``Semicircle(variance) [+] mu_b`` via the scalar equation."""
    if not variance > 0:
        raise InvalidParameter("semicircle variance must be positive")
    _check_floor(eta_floor)
    system = _SemicircleSystem(variance, mu_b)
    s = system.sigma
    return _descend(system, float(E) / s, eta_floor / s)


def semicircle_boxplus(grid, variance: float, mu_b, eta_floor: float = ETA_FLOOR) -> DensityProfile:
    """Density of ``Semicircle(variance) [+] mu_b``.

    Solves ``t_A = z + int mu_b(dx)/(x - t_A)`` (after rescaling to unit
    variance) and fills in ``t_B = z - t_A + 1/(z - t_A)``, ``m_box = t_A - z``.
    """
    if not variance > 0:
        raise InvalidParameter("semicircle variance must be positive")
    system = _SemicircleSystem(variance, mu_b)
    s = system.sigma
    return _profile(grid, lambda E: _descend(system, float(E) / s, eta_floor / s), eta_floor)


def self_point(E: float, base, n: int, eta_floor: float = ETA_FLOOR) -> SubordinationPoint:
    if int(n) < 2:
        raise InvalidParameter("need n >= 2 summands")
    _check_floor(eta_floor)
    return _descend(_SelfSystem(base, n), float(E), eta_floor)


def self_boxplus_n(grid, base, n: int, eta_floor: float = ETA_FLOOR) -> DensityProfile:
    """Density of the ``n``-fold free convolution power of ``base``."""
    if int(n) < 2:
        raise InvalidParameter("need n >= 2 summands")
    system = _SelfSystem(base, n)
    return _profile(grid, lambda E: _descend(system, float(E), eta_floor), eta_floor)
