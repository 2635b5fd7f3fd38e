"""Monte Carlo check of the eigenvalue local law for ``A + U B U*``.

``A`` and ``B`` are diagonal with prescribed spectra and ``U`` is Haar
distributed on the unitary group.  For large ``N`` the fraction of
eigenvalues in ``(E - eta, E + eta]``, divided by ``2 eta``, approaches the
density of the free convolution of the two spectral laws.

Randomness comes from numpy's counter-based Philox generator.  Trial ``j``
at size ``N`` uses the key ``SeedSequence([seed, N, j])``, so every trial is
reproducible on its own and results do not depend on thread scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, NoConvergence, NotHermitian
from .measures import MeasureSpec, eigenvalue_grid
from .subord import boxplus_density, parallel_map

__all__ = [
    "HERMITIAN_TOL",
    "SpectralSample",
    "LocalLawReport",
    "trial_seed",
    "haar_unitary",
    "hermitian_eigenvalues",
    "sample_sum_spectrum",
    "counting_ratio",
    "local_law_experiment",
]

HERMITIAN_TOL = 1e-10


def _generator(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def trial_seed(seed: int, n: int, trial: int) -> int:
    """64-bit seed of one trial, split off ``seed`` by ``(n, trial)``."""
    return int(np.random.SeedSequence([int(seed), int(n), int(trial)]).generate_state(1, np.uint64)[0])


def haar_unitary(n: int, seed: int) -> np.ndarray:
    """Haar-distributed ``n x n`` unitary matrix.

    QR factorization of a complex Ginibre matrix, with the columns of ``Q``
    rotated by the phases of ``diag(R)`` so that the law is exactly Haar.
    """
    n = int(n)
    if n < 1:
        raise InvalidParameter("n must be at least 1")
    rng = _generator(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def hermitian_eigenvalues(matrix) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix in ascending order.

    Raises
    ------
    NotHermitian
        If the matrix is not square or ``max |M - M*| >= 1e-10``.
    NoConvergence
        If the eigensolver fails.
    """
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotHermitian("matrix must be square")
    if m.size and np.max(np.abs(m - m.conj().T)) >= HERMITIAN_TOL:
        raise NotHermitian("matrix is not Hermitian")
    try:
        return np.linalg.eigvalsh(m)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"eigensolver failed: {exc}") from exc


@dataclass(frozen=True)
class SpectralSample:
    """Sorted eigenvalues of one sampled ``A + U B U*``."""

    eigenvalues: np.ndarray
    n: int
    seed: int


def sample_sum_spectrum(a_eigs, b_eigs, seed: int) -> SpectralSample:
    """Spectrum of ``diag(a_eigs) + U diag(b_eigs) U*`` with ``U = haar_unitary(N, seed)``."""
    a = np.asarray(a_eigs, dtype=float)
    b = np.asarray(b_eigs, dtype=float)
    if a.ndim != 1 or a.shape != b.shape:
        raise InvalidParameter("a_eigs and b_eigs must be 1-d of equal length")
    n = len(a)
    if n < 2:
        raise InvalidParameter("need N >= 2")
    u = haar_unitary(n, seed)
    h = (u * b) @ u.conj().T
    h[np.diag_indices(n)] += a
    # remove rounding asymmetry before the Hermitian check
    h = 0.5 * (h + h.conj().T)
    return SpectralSample(hermitian_eigenvalues(h), n, int(seed))


def counting_ratio(sample: SpectralSample, E: float, eta: float) -> float:
    """``#{k : lambda_k in (E - eta, E + eta]} / (2 eta N)``."""
    if not eta > 0:
        raise InvalidParameter("eta must be positive")
    ev = sample.eigenvalues
    count = np.searchsorted(ev, E + eta, side="right") - np.searchsorted(ev, E - eta, side="right")
    return float(count) / (2.0 * eta * sample.n)


@dataclass
class LocalLawReport:
    """Trial-averaged counting ratios, one row per ``N`` and one column per ``eta``."""

    n_values: list
    eta_values: np.ndarray
    E: float
    estimates: np.ndarray
    stderr: np.ndarray
    target: float
    trials: int

    @property
    def errors(self) -> np.ndarray:
        return np.abs(self.estimates - self.target)


def _spectrum_source(spec):
    if isinstance(spec, MeasureSpec):
        return lambda n: eigenvalue_grid(spec, n)
    if callable(spec):
        return spec
    raise InvalidParameter("eigenvalues must come from a MeasureSpec or a callable N -> array")


def _etas_for(eta_rule, n):
    etas = np.atleast_1d(np.asarray(eta_rule(n) if callable(eta_rule) else eta_rule, dtype=float))
    if np.any(etas <= 0) or np.any(etas >= 1):
        raise InvalidParameter(f"eta values must lie in (0, 1), got {etas.tolist()} at N = {n}")
    return etas


def local_law_experiment(
    a_eigs,
    b_eigs,
    n_values,
    E: float,
    eta_rule,
    trials: int,
    seed: int,
    limit_a: MeasureSpec | None = None,
    limit_b: MeasureSpec | None = None,
) -> LocalLawReport:
    """Average ``N_eta(E) / (2 eta N)`` over independent trials for each ``N``.

    Parameters
    ----------
    a_eigs, b_eigs : MeasureSpec or callable
        Spectra of ``A`` and ``B``.  A measure is discretized to ``N``
        midpoint quantiles; a callable maps ``N`` to an array of length ``N``.
    n_values : sequence of int
        Matrix sizes.
    E : float
        Energy of the window centre.
    eta_rule : float, sequence, or callable
        Window half-width(s), either fixed or as a function of ``N``.  Every
        ``N`` must yield the same number of values.
    trials : int
        Independent Haar samples per ``N``.
    seed : int
        Master seed.
    limit_a, limit_b : MeasureSpec, optional
        Limiting spectral laws for the target density; default to
        ``a_eigs``/``b_eigs`` when those are measures.

    Returns
    -------
    LocalLawReport
    """
    trials = int(trials)
    if trials < 1:
        raise InvalidParameter("trials must be at least 1")
    limit_a = limit_a if limit_a is not None else a_eigs
    limit_b = limit_b if limit_b is not None else b_eigs
    if not (isinstance(limit_a, MeasureSpec) and isinstance(limit_b, MeasureSpec)):
        raise InvalidParameter("limit laws are needed when spectra are given as callables")
    src_a, src_b = _spectrum_source(a_eigs), _spectrum_source(b_eigs)
    n_values = [int(n) for n in n_values]
    etas = [_etas_for(eta_rule, n) for n in n_values]
    if len({len(e) for e in etas}) > 1:
        raise InvalidParameter("eta_rule must give the same number of values for every N")

    target = float(boxplus_density([float(E)], limit_a, limit_b).rho[0])

    estimates = np.empty((len(n_values), len(etas[0])))
    stderr = np.empty_like(estimates)
    for row, (n, eta) in enumerate(zip(n_values, etas)):
        a, b = src_a(n), src_b(n)

        def one(j, a=a, b=b, n=n, eta=eta):
            s = sample_sum_spectrum(a, b, trial_seed(seed, n, j))
            return [counting_ratio(s, E, e) for e in eta]

        vals = np.array(parallel_map(one, range(trials)))
        estimates[row] = vals.mean(axis=0)
        stderr[row] = vals.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else 0.0
    return LocalLawReport(
        n_values=n_values,
        eta_values=np.array(etas),
        E=float(E),
        estimates=estimates,
        stderr=stderr,
        target=target,
        trials=trials,
    )
