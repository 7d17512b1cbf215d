import numpy as np
import pytest

import ddjump as dj


@pytest.fixture(scope="session")
def sir():
    return dj.builtin_hamer_sir(2.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def cert05(sir):
    return dj.certify(sir, np.array([1.0, 1.0]), rho_fraction=0.5)


@pytest.fixture(scope="session")
def cert09(sir):
    return dj.certify(sir, np.array([1.0, 1.0]), rho_fraction=0.9)


@pytest.fixture(scope="session")
def cert025(sir):
    return dj.certify(sir, np.array([1.0, 1.0]), rho_fraction=0.25)


@pytest.fixture(scope="session")
def birth_death():
    # +1 at constant rate, -1 at unit per-capita rate; fixed point x=1
    return dj.parse_model(
        """
[dimension]
1
[params]
lam = 1.0
[jumps]
 1 : lam
-1 : x1
"""
    )


def identity_certificate(d=2, c=None, rho=1.0):
    """Hand-built certificate with M = I around a given center."""
    c = np.zeros(d) if c is None else np.asarray(c, dtype=float)
    A = -2.0 * np.eye(d)
    return dj.StabilityCertificate(
        c=c,
        A=A,
        eigenvalues=np.array([-2.0 + 0j] * d),
        rho_hat=2.0,
        rho=rho,
        rho_prime=0.5 * (rho + 2.0),
        M=np.eye(d),
        delta0=1.0,
        c0=1.0,
        c1=1.0,
        JstarM=1.0,
        sum_JM=float(d),
        eps=0.1,
    )
