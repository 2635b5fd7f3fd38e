import math

import numpy as np
import pytest

from freeconv.errors import InvalidParameter
from freeconv.limits import LimitRunReport, cauchy_stable_check, free_clt_profile, free_poisson_profile
from freeconv.measures import Atoms, MarchenkoPastur, Semicircle, closed_form_density, scale
from freeconv.subord import self_boxplus_n

from . import oracles

BERNOULLI = Atoms((-1.0, 1.0), (0.5, 0.5))


def test_clt_two_summands_matches_arcsine():
    rep = free_clt_profile(BERNOULLI, [2])
    prof = rep.profiles[0]
    # (X1 + X2)/sqrt(2) has the arcsine law on [-sqrt(2), sqrt(2)]
    x = prof.energies
    inside = np.abs(x) < math.sqrt(2)
    expected = np.where(inside, math.sqrt(2) * oracles.arcsine_density(np.where(inside, math.sqrt(2) * x, 0.0)), 0.0)
    assert np.max(np.abs(prof.rho - expected)[np.abs(x) < 1.35]) < 1e-4
    i0 = int(np.argmin(np.abs(x)))
    gap0 = abs(prof.rho[i0] - oracles.semicircle_density(0.0))
    assert gap0 == pytest.approx(1 / math.pi - 1 / (math.sqrt(2) * math.pi), abs=1e-4)
    assert rep.interval == pytest.approx((-1.9, 1.9))
    assert len(prof.energies) == 121


def test_clt_errors_strictly_decreasing():
    rep = free_clt_profile(BERNOULLI, [2, 4, 8, 16, 32, 64])
    err = np.array(rep.sup_errors)
    assert np.all(np.diff(err) < 0)
    assert err[-1] < err[0] / 3
    assert err[-1] < 0.05


def test_clt_preconditions():
    with pytest.raises(InvalidParameter):
        free_clt_profile(Atoms((-math.sqrt(0.9), math.sqrt(0.9)), (0.5, 0.5)), [2])
    with pytest.raises(InvalidParameter):
        free_clt_profile(Atoms((0.0, 2.0), (0.5, 0.5)), [2])
    with pytest.raises(InvalidParameter):
        free_clt_profile(Semicircle(1.0), [2])
    with pytest.raises(InvalidParameter):
        free_clt_profile(BERNOULLI, [1])
    with pytest.raises(InvalidParameter):
        free_clt_profile(BERNOULLI, [2], epsilon=1.0)


def test_poisson_n200():
    rep = free_poisson_profile(2.0, 200)
    assert rep.sup_errors[0] < 0.02
    lo, hi = MarchenkoPastur(2.0).support()
    assert rep.interval == pytest.approx((lo + 0.1, hi - 0.1))
    x = rep.profiles[0].energies
    assert np.max(np.abs(closed_form_density(MarchenkoPastur(2.0), x) - oracles.mp_density(x, 2.0))) < 1e-12


@pytest.mark.slow
def test_poisson_errors_decreasing():
    errs = [free_poisson_profile(2.0, n).sup_errors[0] for n in (25, 50, 100, 200)]
    assert np.all(np.diff(errs) < 0)


def test_poisson_preconditions():
    with pytest.raises(InvalidParameter, match="below 1"):
        free_poisson_profile(2.0, 1)
    with pytest.raises(InvalidParameter):
        free_poisson_profile(2.0, 5)
    with pytest.raises(InvalidParameter):
        free_poisson_profile(1.0, 100)


def test_cauchy_examples():
    assert cauchy_stable_check(1.0, 1.0, [-2, -1, 0, 1, 2]) < 1e-6
    assert cauchy_stable_check(1.0, 3.0, [0.0]) < 1e-6
    assert float(oracles.cauchy_density(0.0, 4.0)) == pytest.approx(1 / (4 * math.pi))
    with pytest.raises(InvalidParameter):
        cauchy_stable_check(1.0, 1.0, [11.0])


def test_cauchy_symmetric_output():
    from freeconv.measures import Cauchy
    from freeconv.subord import boxplus_density

    grid = np.linspace(-4, 4, 17)
    rho = boxplus_density(grid, Cauchy(1.5), Cauchy(1.5)).rho
    assert np.max(np.abs(rho - rho[::-1])) < 1e-10


@pytest.mark.parametrize("n", [2, 4, 8])
def test_semicircle_is_boxplus_stable(n):
    grid = np.linspace(-1.9, 1.9, 39)
    prof = self_boxplus_n(grid, Semicircle(1.0 / n), n)
    assert prof.all_converged
    assert np.max(np.abs(prof.rho - oracles.semicircle_density(grid))) < 1e-6


def test_densities_nonnegative_and_normalized():
    grid = np.linspace(-2.5, 2.5, 401)
    prof = self_boxplus_n(grid, scale(BERNOULLI, 0.5), 4)
    assert np.all(prof.rho >= 0)
    assert np.trapezoid(prof.rho, grid) == pytest.approx(1.0, abs=0.01)
    grid = np.linspace(-0.5, 6.5, 401)
    prof = self_boxplus_n(grid, Atoms((0.0, 1.0), (0.98, 0.02)), 100)
    assert np.all(prof.rho >= 0)
    assert np.trapezoid(prof.rho, grid) == pytest.approx(1.0, abs=0.01)


def test_report_length_check():
    with pytest.raises(ValueError):
        LimitRunReport([1, 2], [0.1], (0, 1), Semicircle(1.0))
