import math

import numpy as np
import pytest

from freeconv.diagnostics import (
    diagnose,
    k_value,
    mp_genericity_cubic,
    mp_genericity_roots,
    self_convolution_t,
    semicircle_smoothness_criterion,
    smoothness_via_self_convolution,
    stability_experiment,
    stieltjes_gap_check,
)
from freeconv.errors import InvalidParameter, NotConverged
from freeconv.measures import Atoms, MarchenkoPastur, Semicircle, dirac, quantize, stieltjes_derivative
from freeconv.subord import continue_to_axis

from . import oracles

HALF = Semicircle(0.5)
THREE_ATOMS = Atoms((-1.0, 0.0, 1.0), (1 / 3, 1 / 3, 1 / 3))


def test_diagnose_semicircle_pair():
    d = diagnose(0.0, HALF, HALF)
    t = oracles.semicircle_pair_t(0j)
    assert d.im_ta == pytest.approx(t.imag, abs=1e-6)
    assert d.im_tb == pytest.approx(t.imag, abs=1e-6)
    assert d.smooth and d.reliable
    # k(0) = 2/m'(i/2) - (0 - 2 t)^2 with m' from quadrature
    dm = oracles.stieltjes_quad(lambda x: oracles.semicircle_density(x, 0.5), -math.sqrt(2), math.sqrt(2), 0.5j, 1)
    assert d.k == pytest.approx(2 / dm - (0 - 2 * 0.5j) ** 2, abs=1e-5)
    assert d.generic


def test_diagnose_identity_not_smooth():
    d = diagnose(0.0, dirac(0.0), Semicircle(1.0))
    assert d.im_ta < 1e-6
    assert not d.smooth
    assert not d.reliable


def test_diagnose_propagates_not_converged():
    a = Atoms((0.0, 1.0), (0.7, 0.3))
    b = Atoms((0.0, 2.0), (0.6, 0.4))
    with pytest.raises(NotConverged):
        diagnose(0.0, a, b)


def test_k_value_matches_formula():
    mu = MarchenkoPastur(1.5)
    ta, tb, E = 0.3 + 0.4j, 1.0 + 0.2j, 0.7
    expected = 1 / stieltjes_derivative(mu, tb) + 1 / stieltjes_derivative(mu, ta) - (E - ta - tb) ** 2
    assert k_value(E, ta, tb, mu, mu) == pytest.approx(expected, abs=1e-14)


def test_smoothness_via_self_convolution_examples():
    assert smoothness_via_self_convolution(0.0, THREE_ATOMS)
    assert smoothness_via_self_convolution(0.0, HALF)
    assert not smoothness_via_self_convolution(5.0, HALF)


def test_self_convolution_t_matches_solver():
    for E in (-1.0, 0.0, 0.6):
        p = continue_to_axis(E, THREE_ATOMS, THREE_ATOMS)
        assert abs(self_convolution_t(p) - p.t_a) < 1e-8


@pytest.mark.parametrize("mu", [HALF, THREE_ATOMS, MarchenkoPastur(1.0)])
def test_self_convolution_agrees_with_diagnose(mu):
    lo, hi = mu.support()
    for E in np.linspace(lo - 0.5, hi + 0.5, 9):
        try:
            d = diagnose(E, mu, mu)
        except NotConverged:
            continue
        assert d.smooth == smoothness_via_self_convolution(E, mu)


def test_semicircle_smoothness_criterion_examples():
    assert not semicircle_smoothness_criterion(0.0, dirac(0.0))
    assert semicircle_smoothness_criterion(0.0, Semicircle(1.0))
    assert not semicircle_smoothness_criterion(10.0, dirac(0.0))


def test_k_continuity():
    mu_a, mu_b = Semicircle(1.0), Atoms((-1.0, 1.0), (0.5, 0.5))
    for E in (-1.0, -0.5, 0.3, 0.8, 1.2):
        k0 = diagnose(E, mu_a, mu_b).k
        gaps = [abs(diagnose(E + h, mu_a, mu_b).k - k0) for h in (1e-2, 1e-3, 1e-4)]
        assert gaps[1] < gaps[0] and gaps[2] < gaps[1]


def test_mp_cubic_values():
    assert mp_genericity_cubic(0.0, 2.0) == -2.0
    assert mp_genericity_cubic(0.1, 2.0) == pytest.approx(0.701, abs=1e-12)
    with pytest.raises(InvalidParameter):
        mp_genericity_cubic(0.0, 1.0)


def _sign_changes(values):
    s = np.sign(values)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


@pytest.mark.parametrize("lam", [1.5, 2.0, 3.0, 4.0])
def test_mp_cubic_single_root_below_edge(lam):
    xs = np.arange(-10.0, 10.0 + 1e-3, 1e-3)
    assert _sign_changes(mp_genericity_cubic(xs, lam)) == 1
    roots = mp_genericity_roots(lam)
    assert len(roots) == 1
    assert roots[0] < (1 - math.sqrt(lam)) ** 2
    assert abs(mp_genericity_cubic(roots[0], lam)) < 1e-9


def test_mp_cubic_root_location_lambda_two():
    (root,) = mp_genericity_roots(2.0)
    assert 0.07 < root < 0.08
    # bisection oracle
    a, b = 0.0, 0.1
    for _ in range(60):
        m = 0.5 * (a + b)
        a, b = (m, b) if mp_genericity_cubic(m, 2.0) < 0 else (a, m)
    assert root == pytest.approx(a, abs=1e-12)


def test_stability_unperturbed():
    rep = stability_experiment(HALF, HALF, (-1.5, 1.5), [None], 31)
    ((s, gap, ratio),) = rep.rows
    assert s == 0.0 and gap < 1e-8 and math.isnan(ratio)


@pytest.mark.slow
def test_stability_semicircle():
    rep = stability_experiment(HALF, HALF, (-1.5, 1.5), [400, 50, 200, 100])
    assert list(rep.s) == sorted(rep.s, reverse=True)
    assert rep.sizes == [50, 100, 200, 400]
    assert np.all(np.diff(rep.gaps) < 0)
    assert rep.ratios.max() / rep.ratios.min() < 20
    assert np.all(rep.ratios <= 20 * np.median(rep.ratios))
    assert np.allclose(rep.ratios, rep.gaps / rep.s)


@pytest.mark.slow
def test_stability_marchenko_pastur():
    mu = MarchenkoPastur(1.0)
    rep = stability_experiment(mu, mu, (0.5, 3.0), [50, 100, 200, 400])
    assert rep.ratios.max() / rep.ratios.min() < 20


def test_stability_requires_smooth_pair():
    with pytest.raises(InvalidParameter):
        stability_experiment(dirac(0.0), Semicircle(1.0), (-1.0, 1.0), [None], 5)


def test_stieltjes_gap_examples():
    assert stieltjes_gap_check(HALF, HALF, [0.05, 0.1, 0.2, 0.5], [0.0]) == 0.0
    m1 = Semicircle(1.0)
    slope = stieltjes_gap_check(m1, quantize(m1, 100), [0.05, 0.1, 0.2, 0.5, 1.0], np.linspace(-2, 2, 41))
    assert -2.2 <= slope <= 0


def test_stieltjes_gap_two_atoms():
    s = 0.01
    etas = np.array([1e-3, 2e-3, 4e-3, 8e-3])
    slope = stieltjes_gap_check(dirac(0.0), dirac(s), etas, [0.0])
    gaps = np.abs(1 / (-1j * etas) - 1 / (s - 1j * etas))
    expected = np.polyfit(np.log(etas), np.log(gaps), 1)[0]
    assert slope == pytest.approx(expected, abs=1e-10)
    assert -2.2 <= slope <= 0


def test_stieltjes_gap_needs_four_etas():
    with pytest.raises(InvalidParameter):
        stieltjes_gap_check(HALF, HALF, [0.1, 0.2, 0.3], [0.0])
