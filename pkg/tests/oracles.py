"""Reference values computed independently of the package.

Densities are written out from their textbook formulas, transforms come
from adaptive quadrature, and the Levy distance from a brute-force scan of
its definition.
"""

import cmath
import math

import numpy as np
from scipy import integrate


def semicircle_density(x, variance=1.0):
    s = math.sqrt(variance)
    x = np.asarray(x, dtype=float) / s
    return np.where(np.abs(x) < 2, np.sqrt(np.clip(4 - x**2, 0, None)) / (2 * np.pi), 0.0) / s


def mp_density(x, lam):
    x = np.asarray(x, dtype=float)
    lo, hi = (1 - math.sqrt(lam)) ** 2, (1 + math.sqrt(lam)) ** 2
    inside = (x > lo) & (x < hi)
    xs = np.where(inside, x, 1.0)
    return np.where(inside, np.sqrt(np.clip(4 * xs - (1 - lam + xs) ** 2, 0, None)) / (2 * np.pi * xs), 0.0)


def cauchy_density(x, gamma):
    x = np.asarray(x, dtype=float)
    return gamma / (np.pi * (x**2 + gamma**2))


def arcsine_density(x):
    """Density of the free convolution of two symmetric Bernoulli laws."""
    x = np.asarray(x, dtype=float)
    return 1.0 / (np.pi * np.sqrt(4 - x**2))


def kesten_mckay_density(x, n):
    """Density of the n-fold free convolution power of symmetric Bernoulli."""
    x = np.asarray(x, dtype=float)
    inner = np.clip(4 * (n - 1) - x**2, 0, None)
    return n * np.sqrt(inner) / (2 * np.pi * (n**2 - x**2))


def semicircle_pair_t(z):
    """Common subordination value for Semicircle(1/2) [+] Semicircle(1/2)."""
    z = complex(z)
    return (3 * z + cmath.sqrt(z - 2) * cmath.sqrt(z + 2)) / 4


def stieltjes_quad(density, lo, hi, z, order=0):
    """``int density(x) r! / (x - z)**(r + 1) dx`` by adaptive quadrature."""
    fact = math.factorial(order)

    def part(f):
        val, _ = integrate.quad(f, lo, hi, limit=400, epsabs=1e-13, epsrel=1e-12)
        return val

    re = part(lambda x: (fact * density(x) / (x - z) ** (order + 1)).real)
    im = part(lambda x: (fact * density(x) / (x - z) ** (order + 1)).imag)
    return complex(re, im)


def atoms_stieltjes(positions, weights, z, order=0):
    fact = math.factorial(order)
    return sum(w * fact / (x - z) ** (order + 1) for x, w in zip(positions, weights))


def levy_bruteforce(F1, F2, lo, hi, step=1e-4, s_step=1e-4):
    """Smallest s on an ``s_step`` grid satisfying the Levy condition on an x-grid."""
    xs = np.arange(lo, hi + step, step)
    f1 = F1(xs)
    for s in np.arange(0.0, 1.0 + s_step, s_step):
        lower = F2(xs - s) - s
        upper = F2(xs + s) + s
        if np.all(lower <= f1 + 1e-12) and np.all(f1 <= upper + 1e-12):
            return float(s)
    return 1.0


def step_cdf(positions, weights):
    positions = np.asarray(positions, dtype=float)
    weights = np.asarray(weights, dtype=float)

    def F(x):
        x = np.asarray(x, dtype=float)
        return (weights[None, :] * (positions[None, :] <= x[..., None])).sum(axis=-1)

    return F


def self_convolution_t_mp(z, lam):
    """Subordination value of MP(lam/2) [+] MP(lam/2), from t = (z - 1/m)/2 with m of MP(lam)."""
    z = complex(z)
    d = cmath.sqrt(z - (1 + math.sqrt(lam)) ** 2) * cmath.sqrt(z - (1 - math.sqrt(lam)) ** 2)
    return (3 * z + 1 - lam + d) / 4


def printed_mp_t(z, lam):
    """``(z + lam - 1 + sqrt((z - (1 + lam))**2 - 4 lam)) / 4`` with the Nevanlinna branch."""
    z = complex(z)
    d = cmath.sqrt(z - (1 + math.sqrt(lam)) ** 2) * cmath.sqrt(z - (1 - math.sqrt(lam)) ** 2)
    return (z + lam - 1 + d) / 4
