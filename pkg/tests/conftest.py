"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately avoid the package's own code paths:
closed-form autocovariances instead of the linear-system solver, normal
equations instead of lstsq, plain-loop recursions instead of lfilter.
"""

import numpy as np
import pytest


def yw_gamma0_closed_form(ar, sigma_v2):
    """Textbook closed-form variance of an AR(1)/AR(2) process."""
    if len(ar) == 1:
        (phi1,) = ar
        return sigma_v2 / (1.0 - phi1**2)
    if len(ar) == 2:
        phi1, phi2 = ar
        return (
            sigma_v2 * (1.0 - phi2) / ((1.0 + phi2) * ((1.0 - phi2) ** 2 - phi1**2))
        )
    raise ValueError("closed form implemented for p <= 2 only")


def yw_autocorr_closed_form(ar, max_lag):
    """Autocorrelations rho_1..rho_max for AR(1)/AR(2) via the YW recursion."""
    if len(ar) == 1:
        (phi1,) = ar
        return [phi1**k for k in range(1, max_lag + 1)]
    phi1, phi2 = ar
    rho = [phi1 / (1.0 - phi2)]
    rho.append(phi1 * rho[0] + phi2)
    for _ in range(2, max_lag):
        rho.append(phi1 * rho[-1] + phi2 * rho[-2])
    return rho[:max_lag]


def normal_equations_beta(X, y):
    """Coefficients by solving X'X b = X'y directly."""
    return np.linalg.solve(X.T @ X, X.T @ y)


def simulate_ar_loop(ar, sigma_v2, n, rng, burn=500):
    """Plain-loop AR recursion, independent of the package's filters."""
    p = len(ar)
    e = np.zeros(burn + n)
    v = rng.normal(0.0, np.sqrt(sigma_v2), size=burn + n)
    for t in range(burn + n):
        acc = v[t]
        for j in range(1, p + 1):
            if t - j >= 0:
                acc += ar[j - 1] * e[t - j]
        e[t] = acc
    return e[burn:]


@pytest.fixture(scope="session")
def rng_factory():
    def make(seed):
        return np.random.default_rng(seed)

    return make
